//! Tabulates the probability of detection against rate and wind speed at a
//! typical flight altitude.
//!
//! `cargo run --example pod_curve [altitude_m]`

use msinv::pod_model::PodParams;

fn main() {
    let altitude: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(140.0);
    let params = PodParams::default();
    let winds = [1.0, 2.0, 4.0, 6.0, 8.0];
    print!("{:>8}", "kg/h");
    for w in winds {
        print!("{:>9}", format!("{w} m/s"));
    }
    println!();
    for rate in [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0] {
        print!("{rate:>8}");
        for w in winds {
            print!("{:>9.3}", params.eval(rate, altitude, w));
        }
        println!();
    }
}
