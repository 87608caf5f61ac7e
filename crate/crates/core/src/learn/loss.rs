// SPDX-License-Identifier: Apache-2.0

use super::{LearnError, Matrix};

fn check(x: &Matrix, y: &[u8]) -> Result<(), LearnError> {
    if x.as_slice().len() != y.len() {
        return Err(LearnError::Shape(format!("{} outputs for {} labels", x.as_slice().len(), y.len())));
    }
    if let Some(b) = y.iter().find(|&&b| b > 1) {
        return Err(LearnError::NonBinaryLabel(*b));
    }
    Ok(())
}

/// `log(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Mean binary cross-entropy over all `n x C` entries of raw outputs `x`
/// and 0/1 labels `y` (row-major), with its gradient w.r.t. `x`.
///
/// Uses `-[y log s(x) + (1-y) log(1-s(x))] = softplus(x) - y x`.
pub fn bce_with_logits(x: &Matrix, y: &[u8]) -> Result<(f64, Matrix), LearnError> {
    check(x, y)?;
    let n = y.len().max(1) as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(y.len());
    for (&xi, &yi) in x.as_slice().iter().zip(y) {
        let yi = yi as f64;
        loss += softplus(xi) - yi * xi;
        grad.push((sigmoid(xi) - yi) / n);
    }
    Ok((loss / n, Matrix::new(x.rows(), x.cols(), grad)?))
}

/// Mean hinge loss `max(0, 1 - s x)` with `s = 2y - 1`, and a subgradient.
pub fn hinge(x: &Matrix, y: &[u8]) -> Result<(f64, Matrix), LearnError> {
    check(x, y)?;
    let n = y.len().max(1) as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(y.len());
    for (&xi, &yi) in x.as_slice().iter().zip(y) {
        let s = if yi == 1 { 1.0 } else { -1.0 };
        let margin = 1.0 - s * xi;
        if margin > 0.0 {
            loss += margin;
            grad.push(-s / n);
        } else {
            grad.push(0.0);
        }
    }
    Ok((loss / n, Matrix::new(x.rows(), x.cols(), grad)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn m(r: usize, c: usize, v: Vec<f64>) -> Matrix {
        Matrix::new(r, c, v).unwrap()
    }

    #[test]
    fn worked_values() {
        let (l, _) = bce_with_logits(&m(1, 1, vec![0.0]), &[1]).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
        let (l, _) = bce_with_logits(&m(1, 1, vec![20.0]), &[1]).unwrap();
        assert!(l < 1e-8 && l > 0.0);
        let (l, g) = bce_with_logits(&m(1, 2, vec![1000.0, -1000.0]), &[0, 1]).unwrap();
        assert!((l - 1000.0).abs() < 1e-9);
        assert!(g.as_slice().iter().all(|g| g.is_finite()));
    }

    #[test]
    fn errors() {
        assert!(matches!(bce_with_logits(&m(1, 2, vec![0.0, 0.0]), &[1]), Err(LearnError::Shape(_))));
        assert!(matches!(bce_with_logits(&m(1, 1, vec![0.0]), &[2]), Err(LearnError::NonBinaryLabel(2))));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let x: Vec<f64> = (0..6).map(|_| rng.random_range(-4.0..4.0)).collect();
            let y: Vec<u8> = (0..6).map(|_| rng.random_range(0..2)).collect();
            let (_, g) = bce_with_logits(&m(2, 3, x.clone()), &y).unwrap();
            let h = 1e-3;
            for i in 0..6 {
                let at = |d: f64| {
                    let mut xs = x.clone();
                    xs[i] += d;
                    bce_with_logits(&m(2, 3, xs), &y).unwrap().0
                };
                let fd = (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h);
                let a = g.as_slice()[i];
                assert!((a - fd).abs() / a.abs().max(fd.abs()).max(1e-7) < 1e-6, "{a} vs {fd}");
            }
        }
    }

    #[test]
    fn hinge_values() {
        let (l, g) = hinge(&m(1, 3, vec![2.0, 0.5, 0.0]), &[1, 1, 0]).unwrap();
        assert!((l - (0.0 + 0.5 + 1.0) / 3.0).abs() < 1e-15);
        assert_eq!(g.as_slice(), &[0.0, -1.0 / 3.0, 1.0 / 3.0]);
    }
}
