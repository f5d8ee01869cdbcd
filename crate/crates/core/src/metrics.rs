//! Error measures shared by the numeric checks.
//!
//! Errors are relative to `max(1, |reference|)`: relative for large values,
//! absolute near zero.

pub fn scaled_error(value: f64, reference: f64) -> f64 {
    (value - reference).abs() / reference.abs().max(1.0)
}

/// Max-norm version of [`scaled_error`] for vectors of equal length.
pub fn scaled_vector_error(value: &[f64], reference: &[f64]) -> f64 {
    let diff = value
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let scale = reference.iter().map(|b| b.abs()).fold(1.0, f64::max);
    diff / scale
}

pub fn euclidean_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaling() {
        assert_eq!(scaled_error(1.5, 1.0), 0.5);
        assert_eq!(scaled_error(20.0, 10.0), 1.0);
        assert_eq!(scaled_error(1e-3, 0.0), 1e-3);
        assert_eq!(scaled_vector_error(&[2.0, 0.0], &[4.0, 0.0]), 0.5);
        assert_eq!(euclidean_norm(&[3.0, 4.0]), 5.0);
    }
}
