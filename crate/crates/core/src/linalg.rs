//! Small dense and banded linear algebra helpers.

/// Dot product with four interleaved accumulators combined as `(s0 + s1) + (s2 + s3)`.
///
/// The fixed combination order makes the result invariant under swapping the
/// last two of four terms, which the multiplication gadget relies on.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        s[0] += a[i] * b[i];
        s[1] += a[i + 1] * b[i + 1];
        s[2] += a[i + 2] * b[i + 2];
        s[3] += a[i + 3] * b[i + 3];
    }
    for (k, i) in (4 * chunks..a.len()).enumerate() {
        s[k] += a[i] * b[i];
    }
    (s[0] + s[1]) + (s[2] + s[3])
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Solves the `n × n` row-major system `a x = b` in place by Gaussian elimination
/// with partial pivoting. Returns `None` if a pivot vanishes.
pub fn solve_dense(a: &mut [f64], b: &mut [f64], n: usize) -> Option<()> {
    debug_assert_eq!(a.len(), n * n);
    for k in 0..n {
        let (p, pmax) = (k..n)
            .map(|r| (r, a[r * n + k].abs()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pmax == 0.0 || !pmax.is_finite() {
            return None;
        }
        if p != k {
            for c in 0..n {
                a.swap(k * n + c, p * n + c);
            }
            b.swap(k, p);
        }
        let piv = a[k * n + k];
        for r in k + 1..n {
            let f = a[r * n + k] / piv;
            if f != 0.0 {
                for c in k..n {
                    a[r * n + c] -= f * a[k * n + c];
                }
                b[r] -= f * b[k];
            }
        }
    }
    for k in (0..n).rev() {
        let mut s = b[k];
        for c in k + 1..n {
            s -= a[k * n + c] * b[c];
        }
        b[k] = s / a[k * n + k];
    }
    Some(())
}

/// Determinant of a small row-major matrix via elimination.
pub fn det(a: &[f64], n: usize) -> f64 {
    let mut m = a.to_vec();
    let mut d = 1.0;
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| m[i * n + k].abs().total_cmp(&m[j * n + k].abs())).unwrap_or(k);
        if m[p * n + k] == 0.0 {
            return 0.0;
        }
        if p != k {
            for c in 0..n {
                m.swap(k * n + c, p * n + c);
            }
            d = -d;
        }
        let piv = m[k * n + k];
        d *= piv;
        for r in k + 1..n {
            let f = m[r * n + k] / piv;
            for c in k..n {
                m[r * n + c] -= f * m[k * n + c];
            }
        }
    }
    d
}

/// Square banded matrix with `lower` sub-diagonals and `upper` super-diagonals.
///
/// Solved by LU without pivoting, which is stable for the totally positive
/// B-spline collocation matrices it is built for.
#[derive(Clone, Debug)]
pub struct BandedMatrix {
    n: usize,
    lower: usize,
    upper: usize,
    // row i stores columns i - lower ..= i + upper
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, lower: usize, upper: usize) -> Self {
        BandedMatrix { n, lower, upper, data: vec![0.0; n * (lower + upper + 1)] }
    }

    fn width(&self) -> usize {
        self.lower + self.upper + 1
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        if j + self.lower < i || j > i + self.upper || j >= self.n {
            return None;
        }
        Some(i * self.width() + (j + self.lower - i))
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j).expect("entry outside band");
        self.data[s] = v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    /// Factorizes in place. Returns `None` on a zero pivot.
    pub fn factorize(mut self) -> Option<BandedLu> {
        let n = self.n;
        for k in 0..n {
            let piv = self.get(k, k);
            if piv == 0.0 || !piv.is_finite() {
                return None;
            }
            let last_row = (k + self.lower).min(n - 1);
            let last_col = (k + self.upper).min(n - 1);
            for r in k + 1..=last_row {
                let sr = self.slot(r, k).expect("in band");
                let f = self.data[sr] / piv;
                self.data[sr] = f;
                if f != 0.0 {
                    for c in k + 1..=last_col {
                        let v = self.get(k, c);
                        let s = self.slot(r, c).expect("in band");
                        self.data[s] -= f * v;
                    }
                }
            }
        }
        Some(BandedLu { m: self })
    }
}

#[derive(Clone, Debug)]
pub struct BandedLu {
    m: BandedMatrix,
}

impl BandedLu {
    pub fn solve(&self, b: &mut [f64]) {
        let m = &self.m;
        let n = m.n;
        for i in 0..n {
            let lo = i.saturating_sub(m.lower);
            let mut s = b[i];
            for j in lo..i {
                s -= m.get(i, j) * b[j];
            }
            b[i] = s;
        }
        for i in (0..n).rev() {
            let hi = (i + m.upper).min(n - 1);
            let mut s = b[i];
            for j in i + 1..=hi {
                s -= m.get(i, j) * b[j];
            }
            b[i] = s / m.get(i, i);
        }
    }

    /// Solves for several right-hand sides laid out with stride `stride` starting at
    /// `offset` inside `data`, i.e. entries `data[offset + k * stride]`, `k < n`.
    pub fn solve_strided(&self, data: &mut [f64], offset: usize, stride: usize, scratch: &mut Vec<f64>) {
        let n = self.m.n;
        scratch.clear();
        scratch.extend((0..n).map(|k| data[offset + k * stride]));
        self.solve(scratch);
        for (k, v) in scratch.iter().enumerate() {
            data[offset + k * stride] = *v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_solve() {
        let mut a = vec![2.0, 1.0, 1.0, 1.0, 3.0, 2.0, 1.0, 0.0, 0.0];
        let x = [1.0, -2.0, 3.0];
        let mut b: Vec<f64> = (0..3).map(|i| (0..3).map(|j| a[i * 3 + j] * x[j]).sum()).collect();
        solve_dense(&mut a, &mut b, 3).unwrap();
        for (u, v) in b.iter().zip(x) {
            assert!((u - v).abs() < 1e-14);
        }
        let mut sing = vec![1.0, 2.0, 2.0, 4.0];
        assert!(solve_dense(&mut sing, &mut [1.0, 1.0], 2).is_none());
    }

    #[test]
    fn determinant() {
        assert!((det(&[1.0, 2.0, 3.0, 4.0], 2) + 2.0).abs() < 1e-15);
        assert_eq!(det(&[0.0, 1.0, 1.0, 0.0], 2), -1.0);
    }

    #[test]
    fn banded_matches_dense() {
        let n = 9;
        let (lo, up) = (1, 2);
        let mut band = BandedMatrix::zeros(n, lo, up);
        let mut dense = vec![0.0; n * n];
        for i in 0..n {
            for j in i.saturating_sub(lo)..=(i + up).min(n - 1) {
                let v = if i == j { 4.0 } else { 1.0 / (1.0 + (i + 2 * j) as f64) };
                band.set(i, j, v);
                dense[i * n + j] = v;
            }
        }
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut x1 = rhs.clone();
        band.factorize().unwrap().solve(&mut x1);
        let mut x2 = rhs;
        solve_dense(&mut dense, &mut x2, n).unwrap();
        for (a, b) in x1.iter().zip(&x2) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn dot_is_symmetric_in_last_pair() {
        let a = [0.1, 0.7, -0.3, 1e-9];
        let b = [3.0, -1.0, 2.5, 7.0];
        let sw_a = [0.1, 0.7, 1e-9, -0.3];
        let sw_b = [3.0, -1.0, 7.0, 2.5];
        assert_eq!(dot(&a, &b).to_bits(), dot(&sw_a, &sw_b).to_bits());
    }
}
