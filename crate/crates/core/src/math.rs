//! Small dense helpers shared by the mixture and density code.

use ndarray::{Array2, ArrayView2};

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + xs.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

/// Numerically stable `ln(1 + e^x)`.
pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

pub fn softplus_inverse(y: f64) -> f64 {
    assert!(y > 0.0);
    if y > 30.0 {
        y
    } else {
        y.exp_m1().ln()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Solves `L z = b` for lower-triangular `L` (row-major `d×d` slice).
pub fn forward_substitute(l: &[f64], d: usize, b: &[f64], z: &mut [f64]) {
    for i in 0..d {
        let row = &l[i * d..i * d + i];
        let acc: f64 = row.iter().zip(&z[..i]).map(|(a, b)| a * b).sum();
        z[i] = (b[i] - acc) / l[i * d + i];
    }
}

/// Solves `Lᵀ u = z` for lower-triangular `L` (row-major `d×d` slice).
pub fn backward_substitute_transpose(l: &[f64], d: usize, z: &[f64], u: &mut [f64]) {
    for i in (0..d).rev() {
        let mut acc = 0.0;
        for j in i + 1..d {
            acc += l[j * d + i] * u[j];
        }
        u[i] = (z[i] - acc) / l[i * d + i];
    }
}

/// Lower Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky(a: ArrayView2<'_, f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return None;
    }
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[[i, i]] = s.sqrt();
            } else {
                l[[i, j]] = s / l[[j, j]];
            }
        }
    }
    Some(l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn lse_matches_naive() {
        let xs = [0.1, -2.0, 3.5];
        let naive = xs.iter().map(|x: &f64| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(&xs) - naive).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY; 2]), f64::NEG_INFINITY);
        assert!((log_sum_exp(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-9);
    }

    #[test]
    fn softplus_round_trip() {
        for &y in &[1e-4, 0.5, 3.0, 40.0] {
            assert!((softplus(softplus_inverse(y)) - y).abs() < 1e-12 * y.max(1.0));
        }
    }

    #[test]
    fn triangular_solves() {
        let l = [2.0, 0.0, 0.0, 1.0, 3.0, 0.0, -1.0, 0.5, 1.5];
        let b = [1.0, 2.0, 3.0];
        let mut z = [0.0; 3];
        forward_substitute(&l, 3, &b, &mut z);
        for i in 0..3 {
            let r: f64 = (0..3).map(|j| l[i * 3 + j] * z[j]).sum();
            assert!((r - b[i]).abs() < 1e-12);
        }
        let mut u = [0.0; 3];
        backward_substitute_transpose(&l, 3, &b, &mut u);
        for i in 0..3 {
            let r: f64 = (0..3).map(|j| l[j * 3 + i] * u[j]).sum();
            assert!((r - b[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_reconstructs() {
        let a = array![[4.0, 2.0, 0.4], [2.0, 5.0, 1.0], [0.4, 1.0, 3.0]];
        let l = cholesky(a.view()).unwrap();
        let back = l.dot(&l.t());
        assert!(back.iter().zip(a.iter()).all(|(x, y)| (x - y).abs() < 1e-12));
        assert!(cholesky(array![[1.0, 2.0], [2.0, 1.0]].view()).is_none());
    }
}
