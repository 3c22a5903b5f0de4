//! Pearson (PLCC) and Spearman (SRCC) correlation, plus the optional
//! four-parameter logistic mapping applied before PLCC.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

fn check_pair(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("{} vs {} values", a.len(), b.len())));
    }
    if a.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "correlation needs at least 3 pairs, got {}",
            a.len()
        )));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("correlation input".into()));
    }
    Ok(())
}

fn pearson_unchecked(a: &[f64], b: &[f64], what: &'static str) -> Result<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return Err(Error::ZeroVariance(what));
    }
    Ok((sab / libm::sqrt(saa * sbb)).clamp(-1.0, 1.0))
}

/// Pearson linear correlation. With `logistic_fit`, predictions are first
/// mapped through a least-squares four-parameter logistic.
pub fn plcc(pred: &[f64], gt: &[f64], logistic_fit: bool) -> Result<f64> {
    check_pair(pred, gt)?;
    if logistic_fit {
        let fit = Logistic4::fit(pred, gt)?;
        let mapped: Vec<f64> = pred.iter().map(|&x| fit.eval(x)).collect();
        return pearson_unchecked(&mapped, gt, "PLCC");
    }
    pearson_unchecked(pred, gt, "PLCC")
}

/// 1-based fractional ranks; tied values share the mean of their positions.
pub fn fractional_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
    let mut ranks = alloc::vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && v[order[j]] == v[order[i]] {
            j += 1;
        }
        // positions i..j (0-based) -> ranks i+1..=j
        let r = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

/// Spearman rank-order correlation with tie-averaged ranks.
pub fn srcc(pred: &[f64], gt: &[f64]) -> Result<f64> {
    check_pair(pred, gt)?;
    pearson_unchecked(&fractional_ranks(pred), &fractional_ranks(gt), "SRCC")
}

/// `f(x) = (b1 - b2) / (1 + exp(-(x - b3) / |b4|)) + b2`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Logistic4 {
    pub b: [f64; 4],
}

impl Logistic4 {
    pub fn eval(&self, x: f64) -> f64 {
        let [b1, b2, b3, b4] = self.b;
        (b1 - b2) / (1.0 + libm::exp(-(x - b3) / libm::fabs(b4).max(1e-12))) + b2
    }

    fn jacobian(&self, x: f64) -> [f64; 4] {
        let [b1, b2, b3, b4] = self.b;
        let s = libm::fabs(b4).max(1e-12);
        let e = libm::exp(-(x - b3) / s);
        let q = 1.0 / (1.0 + e);
        let dq = q * q * e; // d q / d((x - b3) / s)
        let sign = if b4 < 0.0 { -1.0 } else { 1.0 };
        [
            q,
            1.0 - q,
            (b1 - b2) * dq * (-1.0 / s),
            (b1 - b2) * dq * (-(x - b3) / (s * s)) * sign,
        ]
    }

    /// Levenberg-Marquardt least squares.
    pub fn fit(x: &[f64], y: &[f64]) -> Result<Self> {
        check_pair(x, y)?;
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let sx = libm::sqrt(x.iter().map(|v| (v - mx) * (v - mx)).sum::<f64>() / n);
        if sx <= 0.0 {
            return Err(Error::ZeroVariance("logistic fit input"));
        }
        let ymax = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let ymin = y.iter().copied().fold(f64::INFINITY, f64::min);
        let mut model = Self { b: [ymax, ymin, mx, sx] };
        let sse = |m: &Self| x.iter().zip(y).map(|(&a, &b)| { let d = m.eval(a) - b; d * d }).sum::<f64>();
        let mut cost = sse(&model);
        let mut lambda = 1e-3;
        for _ in 0..200 {
            let mut jtj = [[0.0f64; 4]; 4];
            let mut jtr = [0.0f64; 4];
            for (&a, &b) in x.iter().zip(y) {
                let j = model.jacobian(a);
                let r = b - model.eval(a);
                for p in 0..4 {
                    jtr[p] += j[p] * r;
                    for q in 0..4 {
                        jtj[p][q] += j[p] * j[q];
                    }
                }
            }
            let mut improved = false;
            for _ in 0..20 {
                let mut a = jtj;
                for (p, row) in a.iter_mut().enumerate() {
                    row[p] += lambda * (jtj[p][p].max(1e-12));
                }
                let Some(delta) = solve4(a, jtr) else {
                    lambda *= 10.0;
                    continue;
                };
                let cand = Self {
                    b: core::array::from_fn(|p| model.b[p] + delta[p]),
                };
                let c = sse(&cand);
                if c.is_finite() && c < cost {
                    let rel = (cost - c) / cost.max(1e-300);
                    model = cand;
                    cost = c;
                    lambda = (lambda / 10.0).max(1e-12);
                    improved = rel > 1e-12;
                    break;
                }
                lambda *= 10.0;
            }
            if !improved {
                break;
            }
        }
        Ok(model)
    }
}

fn solve4(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> Option<[f64; 4]> {
    for col in 0..4 {
        let piv = (col..4).max_by(|&i, &j| libm::fabs(a[i][col]).total_cmp(&libm::fabs(a[j][col])))?;
        if libm::fabs(a[piv][col]) < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..4 {
            let f = a[r][col] / a[col][col];
            for c in col..4 {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = [0.0; 4];
    for r in (0..4).rev() {
        let s: f64 = (r + 1..4).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_and_reversal() {
        let gt = [0.1, 0.5, 0.3, 0.9, 0.7];
        let pred: Vec<f64> = gt.iter().map(|g| 2.0 * g + 1.0).collect();
        assert!((plcc(&pred, &gt, false).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = gt.iter().map(|g| -g).collect();
        assert!((plcc(&neg, &gt, false).unwrap() + 1.0).abs() < 1e-12);
        assert!((srcc(&neg, &gt).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn tie_ranks() {
        assert_eq!(fractional_ranks(&[1.0, 2.0, 2.0, 3.0]), [1.0, 2.5, 2.5, 4.0]);
        assert_eq!(fractional_ranks(&[5.0, 5.0, 5.0]), [2.0, 2.0, 2.0]);
    }

    #[test]
    fn hand_tie_case() {
        let r = srcc(&[1.0, 2.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((r - 4.5 / libm::sqrt(22.5)).abs() < 1e-12);
        assert!((r - 0.9487).abs() < 1e-4);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(plcc(&[1.0; 4], &[1.0, 2.0, 3.0, 4.0], false), Err(Error::ZeroVariance(_))));
        assert!(srcc(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(srcc(&[1.0, 2.0, 3.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn logistic_fit_recovers_sigmoid_data() {
        let truth = Logistic4 { b: [0.9, 0.1, 0.5, 0.1] };
        let x: Vec<f64> = (0..40).map(|i| i as f64 / 39.0).collect();
        let y: Vec<f64> = x.iter().map(|&v| truth.eval(v)).collect();
        let fit = Logistic4::fit(&x, &y).unwrap();
        for &v in &x {
            assert!((fit.eval(v) - truth.eval(v)).abs() < 1e-4);
        }
        assert!(plcc(&x, &y, true).unwrap() > plcc(&x, &y, false).unwrap());
    }
}
