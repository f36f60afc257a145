//! Round-trip float formatting shared by all CSV writers.

/// Seventeen significant digits in scientific notation.
pub fn sig17(x: f64) -> String {
    if x == 0.0 {
        // normalise negative zero so outputs are byte-stable
        return format!("{:.16e}", 0.0);
    }
    format!("{:.16e}", x)
}
