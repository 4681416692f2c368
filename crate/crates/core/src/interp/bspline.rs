//! B-spline bases with not-a-knot knot placement.

use super::InterpError;
use crate::linalg::{BandedLu, BandedMatrix};

/// Clamped knot vector for interpolation of degree `k` at `xs` with not-a-knot ends.
///
/// Odd degrees place interior knots at data sites, even degrees at midpoints;
/// `k` sites next to each boundary are skipped either way.
pub(crate) fn not_a_knot_knots(xs: &[f64], k: usize) -> Vec<f64> {
    let n = xs.len();
    let mut t = Vec::with_capacity(n + k + 1);
    t.extend(std::iter::repeat(xs[0]).take(k + 1));
    if k % 2 == 1 {
        let m = (k - 1) / 2;
        t.extend_from_slice(&xs[m + 1..n - m - 1]);
    } else {
        let m = k / 2;
        t.extend((m..n - 1 - m).map(|i| 0.5 * (xs[i] + xs[i + 1])));
    }
    t.extend(std::iter::repeat(xs[n - 1]).take(k + 1));
    debug_assert_eq!(t.len(), n + k + 1);
    t
}

/// Index `mu` with `t[mu] <= x < t[mu + 1]`, clamped to `[k, n_coef - 1]`.
pub(crate) fn find_span(t: &[f64], k: usize, x: f64) -> usize {
    let n_coef = t.len() - k - 1;
    let mu = t.partition_point(|&v| v <= x);
    mu.saturating_sub(1).clamp(k, n_coef - 1)
}

/// Values of the `k + 1` nonzero basis functions `N_{mu-k..=mu}` at `x`.
pub(crate) fn basis_funs(t: &[f64], k: usize, mu: usize, x: f64, out: &mut [f64]) {
    let mut left = [0.0; 8];
    let mut right = [0.0; 8];
    out[0] = 1.0;
    for j in 1..=k {
        left[j] = x - t[mu + 1 - j];
        right[j] = t[mu + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            let tmp = out[r] / (right[r + 1] + left[j - r]);
            out[r] = saved + right[r + 1] * tmp;
            saved = left[j - r] * tmp;
        }
        out[j] = saved;
    }
}

/// Derivatives of orders `0..=k` of the nonzero basis functions at `x`;
/// `ders[m][r]` is the `m`-th derivative of `N_{mu-k+r}`.
pub(crate) fn basis_ders(t: &[f64], k: usize, mu: usize, x: f64) -> Vec<Vec<f64>> {
    let mut ndu = vec![vec![0.0; k + 1]; k + 1];
    let mut left = vec![0.0; k + 1];
    let mut right = vec![0.0; k + 1];
    ndu[0][0] = 1.0;
    for j in 1..=k {
        left[j] = x - t[mu + 1 - j];
        right[j] = t[mu + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            ndu[j][r] = right[r + 1] + left[j - r];
            let tmp = ndu[r][j - 1] / ndu[j][r];
            ndu[r][j] = saved + right[r + 1] * tmp;
            saved = left[j - r] * tmp;
        }
        ndu[j][j] = saved;
    }
    let mut ders = vec![vec![0.0; k + 1]; k + 1];
    for j in 0..=k {
        ders[0][j] = ndu[j][k];
    }
    let mut a = vec![vec![0.0; k + 1]; 2];
    for r in 0..=k {
        let (mut s1, mut s2) = (0usize, 1usize);
        a[0][0] = 1.0;
        for m in 1..=k {
            let mut d = 0.0;
            let rk = r as isize - m as isize;
            let pk = k - m;
            if r >= m {
                a[s2][0] = a[s1][0] / ndu[pk + 1][rk as usize];
                d = a[s2][0] * ndu[rk as usize][pk];
            }
            let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
            let j2 = if (r as isize) - 1 <= pk as isize { m - 1 } else { k - r };
            for j in j1..=j2 {
                let idx = (rk + j as isize) as usize;
                a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][idx];
                d += a[s2][j] * ndu[idx][pk];
            }
            if r <= pk {
                a[s2][m] = -a[s1][m - 1] / ndu[pk + 1][r];
                d += a[s2][m] * ndu[r][pk];
            }
            ders[m][r] = d;
            std::mem::swap(&mut s1, &mut s2);
        }
    }
    let mut fac = k as f64;
    for m in 1..=k {
        for v in ders[m].iter_mut() {
            *v *= fac;
        }
        fac *= (k - m) as f64;
    }
    ders
}

/// Factorized collocation matrix `A[i][j] = N_j(xs[i])`.
pub(crate) fn collocation(xs: &[f64], t: &[f64], k: usize) -> Result<BandedLu, InterpError> {
    let n = xs.len();
    let spans: Vec<usize> = xs.iter().map(|&x| find_span(t, k, x)).collect();
    let (mut lower, mut upper) = (0usize, 0usize);
    for (i, &mu) in spans.iter().enumerate() {
        let first = mu - k;
        lower = lower.max(i.saturating_sub(first));
        upper = upper.max(mu.saturating_sub(i));
    }
    let mut a = BandedMatrix::zeros(n, lower, upper);
    let mut b = [0.0; 8];
    for (i, (&x, &mu)) in xs.iter().zip(&spans).enumerate() {
        basis_funs(t, k, mu, x, &mut b);
        for r in 0..=k {
            a.set(i, mu - k + r, b[r]);
        }
    }
    a.factorize().ok_or(InterpError::Singular)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_is_a_partition_of_unity() {
        let xs: Vec<f64> = (0..9).map(|i| (i as f64).powf(1.3)).collect();
        for k in 1..=5 {
            let t = not_a_knot_knots(&xs, k);
            for x in [0.0, 0.3, 2.2, 7.9, xs[8]] {
                let mu = find_span(&t, k, x);
                let mut b = [0.0; 8];
                basis_funs(&t, k, mu, x, &mut b);
                let s: f64 = b[..=k].iter().sum();
                assert!((s - 1.0).abs() < 1e-14, "k={k} x={x} sum={s}");
                let ders = basis_ders(&t, k, mu, x);
                for r in 0..=k {
                    assert!((ders[0][r] - b[r]).abs() < 1e-14);
                }
                // derivatives of a partition of unity sum to zero
                for m in 1..=k {
                    let s: f64 = ders[m].iter().sum();
                    assert!(s.abs() < 1e-9 * (1.0 + ders[m].iter().map(|v| v.abs()).sum::<f64>()));
                }
            }
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let xs: Vec<f64> = (0..12).map(|i| i as f64 * 0.5).collect();
        let k = 3;
        let t = not_a_knot_knots(&xs, k);
        let x = 2.3;
        let mu = find_span(&t, k, x);
        let d = basis_ders(&t, k, mu, x);
        let h = 1e-6;
        let (mut bp, mut bm) = ([0.0; 8], [0.0; 8]);
        basis_funs(&t, k, mu, x + h, &mut bp);
        basis_funs(&t, k, mu, x - h, &mut bm);
        for r in 0..=k {
            let fd = (bp[r] - bm[r]) / (2.0 * h);
            assert!((fd - d[1][r]).abs() < 1e-7, "{fd} vs {}", d[1][r]);
        }
    }
}
