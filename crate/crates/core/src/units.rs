//! Unit conversion between the estimation scale (kg/h) and the report scale (kt/y).

/// Hours in a (non-leap) year.
pub const HOURS_PER_YEAR: f64 = 8760.0;

/// kt/y produced by a source emitting 1 kg/h for a full year.
pub const KG_H_TO_KT_Y: f64 = HOURS_PER_YEAR / 1.0e6;

/// Converts an emission rate in kg/h to kt/y.
pub fn kg_h_to_kt_y(rate: f64) -> f64 {
    rate * KG_H_TO_KT_Y
}

/// Converts a variance in (kg/h)^2 to (kt/y)^2.
pub fn var_kg_h_to_kt_y(var: f64) -> f64 {
    var * KG_H_TO_KT_Y * KG_H_TO_KT_Y
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_kg_per_hour_is_0_00876_kt_per_year() {
        assert_eq!(kg_h_to_kt_y(1.0), 0.00876);
        assert_eq!(var_kg_h_to_kt_y(1.0), 0.00876 * 0.00876);
    }
}
