//! Matrix exponential by scaling and squaring with a degree-13 Padé kernel.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matrix::{ensure_square, one_norm};

const PADE13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

// Largest 1-norm for which the [13/13] approximant is accurate to unit roundoff.
const THETA13: f64 = 5.371_920_351_148_152;

/// `e^{tA}`.
pub fn matrix_exponential(a: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    let n = ensure_square(a, "matrix exponential")?;
    if !t.is_finite() {
        return Err(Error::InvalidArgument(format!("exponential time must be finite, got {t}")));
    }
    let scaled = a * t;
    let norm = one_norm(&scaled);
    if t == 0.0 || norm == 0.0 {
        return Ok(DMatrix::identity(n, n));
    }

    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let x = scaled * 2f64.powi(-squarings);

    let ident = DMatrix::<f64>::identity(n, n);
    let x2 = &x * &x;
    let x4 = &x2 * &x2;
    let x6 = &x4 * &x2;
    let b = &PADE13;

    let u_inner = &x6 * (&x6 * b[13] + &x4 * b[11] + &x2 * b[9])
        + &x6 * b[7]
        + &x4 * b[5]
        + &x2 * b[3]
        + &ident * b[1];
    let u = &x * u_inner;
    let v = &x6 * (&x6 * b[12] + &x4 * b[10] + &x2 * b[8])
        + &x6 * b[6]
        + &x4 * b[4]
        + &x2 * b[2]
        + &ident * b[0];

    let numer = &v + &u;
    let denom = &v - &u;
    let mut result = denom
        .lu()
        .solve(&numer)
        .ok_or(Error::ExponentialOverflow(norm))?;
    for _ in 0..squarings {
        result = &result * &result;
    }
    if result.iter().any(|x| !x.is_finite()) {
        return Err(Error::ExponentialOverflow(norm));
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    // Truncated Taylor series with repeated halving; independent of the Padé path.
    fn series_exp(a: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
        let n = a.nrows();
        let halvings = 12;
        let x = a * (t / 2f64.powi(halvings));
        let mut term = DMatrix::identity(n, n);
        let mut sum = term.clone();
        for k in 1..30 {
            term = &term * &x / k as f64;
            sum += &term;
        }
        for _ in 0..halvings {
            sum = &sum * &sum;
        }
        sum
    }

    #[test]
    fn zero_time_is_identity() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(matrix_exponential(&a, 0.0).unwrap(), DMatrix::identity(2, 2));
    }

    #[test]
    fn scalar_exponential() {
        let e = matrix_exponential(&DMatrix::from_element(1, 1, 3.0), 1.0).unwrap();
        assert!((e[(0, 0)] - 3f64.exp()).abs() <= 1e-13 * 3f64.exp());
    }

    #[test]
    fn rotation_quarter_turn() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let e = matrix_exponential(&a, PI / 2.0).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!((&e - &expected).norm() < 1e-14);
        assert!((&e - series_exp(&a, PI / 2.0)).norm() < 1e-12);
    }

    #[test]
    fn matches_series_for_large_argument() {
        let a = DMatrix::from_row_slice(3, 3, &[-2.0, 1.0, 0.5, 0.3, -4.0, 2.0, 1.0, 0.0, -1.0]);
        let t = 5.0;
        let e = matrix_exponential(&a, t).unwrap();
        let s = series_exp(&a, t);
        assert!((&e - &s).norm() <= 1e-10 * s.norm());
    }

    #[test]
    fn overflow_is_rejected() {
        let a = DMatrix::from_element(1, 1, 1.0);
        assert!(matches!(matrix_exponential(&a, 1e4), Err(Error::ExponentialOverflow(_))));
    }
}
