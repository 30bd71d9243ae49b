//! Nine-significant-digit rounding for everything written to disk.

/// Rounds to 9 significant digits. Serializers print the shortest
/// round-trip form of the result, so at most 9 digits appear.
pub fn round9(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

pub fn round9_all(values: &[f64]) -> Vec<f64> {
    values.iter().copied().map(round9).collect()
}
