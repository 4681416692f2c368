//! Delaunay triangulation (Bowyer–Watson, d ≤ 3) and barycentric point location.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::InterpError;
use crate::linalg::{det, solve_dense};

const NONE: usize = usize::MAX;
/// Super-simplex scale relative to the normalized bounding box.
const SUPER_SCALE: f64 = 1e6;
const DUPLICATE_TOL: f64 = 1e-12;
const BARY_TOL: f64 = 1e-12;

/// A Delaunay triangulation of scattered points with a value at every vertex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Triangulation {
    dim: usize,
    /// Row-major `n × dim`.
    vertices: Vec<f64>,
    values: Vec<f64>,
    simplices: Vec<Vec<usize>>,
    /// `neighbors[s][i]` is the simplex across the facet opposite vertex `i` of `s`.
    neighbors: Vec<Vec<Option<usize>>>,
}

impl Triangulation {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_vertices(&self) -> usize {
        self.values.len()
    }

    pub fn vertex(&self, i: usize) -> &[f64] {
        &self.vertices[i * self.dim..(i + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn simplices(&self) -> &[Vec<usize>] {
        &self.simplices
    }

    pub fn neighbors(&self) -> &[Vec<Option<usize>>] {
        &self.neighbors
    }

    /// `|D| (d + 1)`: coordinates plus value for each stored vertex.
    pub fn n_params(&self) -> usize {
        self.n_vertices() * (self.dim + 1)
    }

    /// Unsigned volume (length/area/volume) of simplex `s`.
    pub fn simplex_volume(&self, s: usize) -> f64 {
        let d = self.dim;
        let v = &self.simplices[s];
        let origin = self.vertex(v[0]);
        let mut m = vec![0.0; d * d];
        for r in 0..d {
            let p = self.vertex(v[r + 1]);
            for c in 0..d {
                m[r * d + c] = p[c] - origin[c];
            }
        }
        det(&m, d).abs() / factorial(d)
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.simplices.len()).map(|s| self.simplex_volume(s)).sum()
    }

    /// Barycentric coordinates of `x` with respect to simplex `s`.
    pub fn barycentric(&self, s: usize, x: &[f64], out: &mut [f64]) -> Result<(), InterpError> {
        let d = self.dim;
        let v = &self.simplices[s];
        let origin = self.vertex(v[0]);
        // columns are edge vectors from vertex 0
        let mut m = [0.0; 9];
        let mut rhs = [0.0; 3];
        for r in 0..d {
            for c in 0..d {
                m[r * d + c] = self.vertex(v[c + 1])[r] - origin[r];
            }
            rhs[r] = x[r] - origin[r];
        }
        solve_dense(&mut m[..d * d], &mut rhs[..d], d).ok_or(InterpError::WalkFailure { simplex: s })?;
        let mut w0 = 1.0;
        for k in 0..d {
            out[k + 1] = rhs[k];
            w0 -= rhs[k];
        }
        out[0] = w0;
        Ok(())
    }

    /// A point locator starting its walk at simplex 0.
    pub fn locator(&self) -> PointLocator<'_> {
        PointLocator { tri: self, last: 0 }
    }

    /// Piecewise-linear interpolant at `x`.
    pub fn predict(&self, x: &[f64]) -> Result<f64, InterpError> {
        self.locator().predict(x)
    }
}

/// Walk-based point location with a per-caller start hint.
#[derive(Clone, Debug)]
pub struct PointLocator<'a> {
    tri: &'a Triangulation,
    last: usize,
}

impl PointLocator<'_> {
    /// Returns the containing simplex and the barycentric weights of `x` in it.
    pub fn locate(&mut self, x: &[f64]) -> Result<(usize, [f64; 4]), InterpError> {
        let tri = self.tri;
        let d = tri.dim;
        if x.len() != d {
            return Err(InterpError::DimensionMismatch { expected: d, got: x.len() });
        }
        let mut w = [0.0; 4];
        if d == 1 {
            return locate_1d(tri, x[0], &mut w).map(|s| (s, w));
        }
        let mut s = self.last.min(tri.simplices.len() - 1);
        let max_steps = tri.simplices.len() + 16;
        for _ in 0..max_steps {
            tri.barycentric(s, x, &mut w[..=d])?;
            let (imin, wmin) = w[..=d]
                .iter()
                .enumerate()
                .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
            if wmin >= -BARY_TOL {
                self.last = s;
                return Ok((s, w));
            }
            match tri.neighbors[s][imin] {
                Some(n) => s = n,
                None => return Err(InterpError::OutsideHull),
            }
        }
        // the walk cycled; fall back to a scan
        for s in 0..tri.simplices.len() {
            tri.barycentric(s, x, &mut w[..=d])?;
            if w[..=d].iter().all(|&v| v >= -BARY_TOL) {
                self.last = s;
                return Ok((s, w));
            }
        }
        Err(InterpError::OutsideHull)
    }

    pub fn predict(&mut self, x: &[f64]) -> Result<f64, InterpError> {
        let (s, w) = self.locate(x)?;
        let verts = &self.tri.simplices[s];
        Ok(verts.iter().zip(&w).map(|(&v, wi)| wi * self.tri.values[v]).sum())
    }
}

fn locate_1d(tri: &Triangulation, x: f64, w: &mut [f64; 4]) -> Result<usize, InterpError> {
    let n = tri.values.len();
    let (first, last) = (tri.vertices[0], tri.vertices[n - 1]);
    if !(x >= first && x <= last) {
        return Err(InterpError::OutsideHull);
    }
    // segment s spans vertices s and s + 1
    let s = tri.vertices.partition_point(|&v| v <= x).clamp(1, n - 1) - 1;
    let (a, b) = (tri.vertices[s], tri.vertices[s + 1]);
    let t = (x - a) / (b - a);
    w[0] = 1.0 - t;
    w[1] = t;
    Ok(s)
}

fn factorial(d: usize) -> f64 {
    (1..=d).map(|k| k as f64).product()
}

/// Interpolates `f` with the piecewise-linear function on the Delaunay triangulation.
pub fn simplex_predict(tri: &Triangulation, x: &[f64]) -> Result<f64, InterpError> {
    tri.predict(x)
}

/// Triangulates `points` (row-major `n × d`, `d ≤ 3`).
pub fn delaunay_triangulate(points: &[f64], values: &[f64], d: usize) -> Result<Triangulation, InterpError> {
    if !(1..=3).contains(&d) {
        return Err(InterpError::UnsupportedDimension(d));
    }
    let n = values.len();
    if points.len() != n * d {
        return Err(InterpError::DimensionMismatch { expected: n * d, got: points.len() });
    }
    if n < d + 1 {
        return Err(InterpError::TooFewPoints { need: d + 1, got: n });
    }
    if points.iter().chain(values).any(|v| !v.is_finite()) {
        return Err(InterpError::NonFinite);
    }
    if d == 1 {
        return triangulate_1d(points, values);
    }
    Builder::new(points, d).run(values)
}

fn triangulate_1d(points: &[f64], values: &[f64]) -> Result<Triangulation, InterpError> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[a].total_cmp(&points[b]));
    let span = points[order[order.len() - 1]] - points[order[0]];
    let mut kept: Vec<usize> = Vec::with_capacity(order.len());
    for &i in &order {
        if let Some(&prev) = kept.last() {
            if points[i] - points[prev] <= DUPLICATE_TOL * span.max(1.0) {
                continue;
            }
        }
        kept.push(i);
    }
    if kept.len() < 2 {
        return Err(InterpError::Degenerate);
    }
    let m = kept.len();
    let simplices = (0..m - 1).map(|s| vec![s, s + 1]).collect();
    let neighbors = (0..m - 1)
        .map(|s| vec![(s + 1 < m - 1).then_some(s + 1), s.checked_sub(1)])
        .collect();
    Ok(Triangulation {
        dim: 1,
        vertices: kept.iter().map(|&i| points[i]).collect(),
        values: kept.iter().map(|&i| values[i]).collect(),
        simplices,
        neighbors,
    })
}

#[derive(Clone, Debug)]
struct Cell {
    v: [usize; 4],
    nb: [usize; 4],
    alive: bool,
}

struct Builder {
    d: usize,
    /// Normalized coordinates, zero-padded to 3; super vertices at the end.
    pts: Vec<[f64; 3]>,
    n_input: usize,
    original: Vec<f64>,
    cells: Vec<Cell>,
    inserted: Vec<bool>,
    last_cell: usize,
    // scratch
    mark: Vec<u32>,
    epoch: u32,
}

impl Builder {
    fn new(points: &[f64], d: usize) -> Self {
        let n = points.len() / d;
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in points.chunks_exact(d) {
            for j in 0..d {
                lo[j] = lo[j].min(p[j]);
                hi[j] = hi[j].max(p[j]);
            }
        }
        let mut center = [0.0; 3];
        let mut half = 0.0f64;
        for j in 0..d {
            center[j] = 0.5 * (lo[j] + hi[j]);
            half = half.max(0.5 * (hi[j] - lo[j]));
        }
        let half = if half > 0.0 { half } else { 1.0 };
        let mut pts: Vec<[f64; 3]> = points
            .chunks_exact(d)
            .map(|p| {
                let mut q = [0.0; 3];
                for j in 0..d {
                    q[j] = (p[j] - center[j]) / half;
                }
                q
            })
            .collect();
        // all normalized points lie in the ball of radius sqrt(d)
        let r = SUPER_SCALE * (d as f64).sqrt();
        if d == 2 {
            let s3 = 3f64.sqrt();
            pts.push([0.0, 2.0 * r, 0.0]);
            pts.push([-s3 * r, -r, 0.0]);
            pts.push([s3 * r, -r, 0.0]);
        } else {
            let k = r * 3f64.sqrt();
            pts.push([k, k, k]);
            pts.push([k, -k, -k]);
            pts.push([-k, k, -k]);
            pts.push([-k, -k, k]);
        }
        let mut b = Builder {
            d,
            pts,
            n_input: n,
            original: points.to_vec(),
            cells: Vec::new(),
            inserted: vec![false; n],
            last_cell: 0,
            mark: Vec::new(),
            epoch: 0,
        };
        let mut v = [NONE; 4];
        for (k, slot) in v.iter_mut().take(d + 1).enumerate() {
            *slot = n + k;
        }
        if b.orient(&v) < 0.0 {
            v.swap(0, 1);
        }
        b.cells.push(Cell { v, nb: [NONE; 4], alive: true });
        b
    }

    fn orient(&self, v: &[usize; 4]) -> f64 {
        let p = |i: usize| self.pts[v[i]];
        orient_pts(self.d, &[p(0), p(1), p(2), if self.d == 3 { p(3) } else { [0.0; 3] }])
    }

    /// Positive iff `q` lies strictly inside the circumsphere of `cell`.
    fn in_sphere(&self, cell: &Cell, q: [f64; 3]) -> bool {
        let d = self.d;
        let mut m = [0.0; 16];
        let w = d + 1;
        for r in 0..=d {
            let p = self.pts[cell.v[r]];
            let mut n2 = 0.0;
            for c in 0..d {
                let x = p[c] - q[c];
                m[r * w + c] = x;
                n2 += x * x;
            }
            m[r * w + d] = n2;
        }
        let scale = abs_permanent(&m[..w * w], w, 0, 0);
        let val = det(&m[..w * w], w);
        // 3D lifted determinant has the opposite sign convention
        let val = if d == 3 { -val } else { val };
        val > 1e-13 * scale
    }

    /// Orientation of the cell obtained by replacing vertex `i` of `cell` with `q`,
    /// together with the permanent of the same determinant (a roundoff scale).
    fn orient_replaced(&self, cell: &Cell, i: usize, q: [f64; 3]) -> (f64, f64) {
        let mut p = [[0.0; 3]; 4];
        for k in 0..=self.d {
            p[k] = if k == i { q } else { self.pts[cell.v[k]] };
        }
        // measure edges from q: the other vertices may be far-away super vertices
        p.swap(0, i);
        let (o, perm) = orient_with_permanent(self.d, &p);
        (if i == 0 { o } else { -o }, perm)
    }

    fn walk(&self, q: [f64; 3]) -> usize {
        let mut c = if self.cells[self.last_cell].alive {
            self.last_cell
        } else {
            self.cells.iter().rposition(|c| c.alive).expect("some cell is alive")
        };
        let d = self.d;
        let mut rot = 0usize;
        let limit = 4 * self.cells.len() + 64;
        'outer: for _ in 0..limit {
            let cell = &self.cells[c];
            rot = rot.wrapping_add(1);
            for k in 0..=d {
                let i = (k + rot) % (d + 1);
                let (o, _) = self.orient_replaced(cell, i, q);
                if o < 0.0 && cell.nb[i] != NONE {
                    c = cell.nb[i];
                    continue 'outer;
                }
            }
            return c;
        }
        // cycling only happens on near-degenerate input; scan instead
        (0..self.cells.len())
            .filter(|&c| self.cells[c].alive)
            .find(|&c| (0..=d).all(|i| self.orient_replaced(&self.cells[c], i, q).0 >= 0.0))
            .unwrap_or(c)
    }

    fn insert(&mut self, pi: usize) {
        let q = self.pts[pi];
        let d = self.d;
        let start = self.walk(q);
        for &v in &self.cells[start].v[..=d] {
            if v < self.n_input {
                let p = self.pts[v];
                let dist2: f64 = (0..d).map(|c| (p[c] - q[c]).powi(2)).sum();
                if dist2.sqrt() <= DUPLICATE_TOL {
                    return;
                }
            }
        }
        self.epoch += 1;
        if self.mark.len() < self.cells.len() {
            self.mark.resize(self.cells.len(), 0);
        }
        let epoch = self.epoch;
        let mut cavity = vec![start];
        self.mark[start] = epoch;
        let mut stack = vec![start];
        while let Some(c) = stack.pop() {
            for i in 0..=d {
                let n = self.cells[c].nb[i];
                if n != NONE && self.mark[n] != epoch && self.in_sphere(&self.cells[n], q) {
                    self.mark[n] = epoch;
                    cavity.push(n);
                    stack.push(n);
                }
            }
        }
        // grow the cavity until every boundary facet is visible from q
        let boundary = loop {
            let mut boundary = Vec::new();
            let mut grow = None;
            'scan: for &c in &cavity {
                for i in 0..=d {
                    let n = self.cells[c].nb[i];
                    if n != NONE && self.mark[n] == epoch {
                        continue;
                    }
                    let (o, scale) = self.orient_replaced(&self.cells[c], i, q);
                    if o <= 2e-15 * scale && n != NONE {
                        grow = Some(n);
                        break 'scan;
                    }
                    boundary.push((c, i));
                }
            }
            match grow {
                Some(n) => {
                    self.mark[n] = epoch;
                    cavity.push(n);
                }
                None => break boundary,
            }
        };

        let mut facet_map: HashMap<[usize; 3], (usize, usize)> = HashMap::with_capacity(boundary.len() * d);
        let mut created = Vec::with_capacity(boundary.len());
        for &(c, i) in &boundary {
            let old = self.cells[c].clone();
            let mut v = old.v;
            v[i] = pi;
            let mut nb = [NONE; 4];
            nb[i] = old.nb[i];
            let id = self.cells.len();
            self.cells.push(Cell { v, nb, alive: true });
            created.push(id);
            if old.nb[i] != NONE {
                let outer = &mut self.cells[old.nb[i]];
                for slot in outer.nb.iter_mut().take(d + 1) {
                    if *slot == c {
                        *slot = id;
                    }
                }
            }
            // facets containing the new vertex: opposite each j != i
            for j in 0..=d {
                if j == i {
                    continue;
                }
                let mut key = [NONE; 3];
                let mut k = 0;
                for (t, &vt) in v[..=d].iter().enumerate() {
                    if t != i && t != j {
                        key[k] = vt;
                        k += 1;
                    }
                }
                key[..k].sort_unstable();
                if let Some((other, oj)) = facet_map.remove(&key) {
                    self.cells[id].nb[j] = other;
                    self.cells[other].nb[oj] = id;
                } else {
                    facet_map.insert(key, (id, j));
                }
            }
        }
        for &c in &cavity {
            self.cells[c].alive = false;
        }
        self.inserted[pi] = true;
        self.last_cell = *created.last().expect("cavity has a boundary");
    }

    fn run(mut self, values: &[f64]) -> Result<Triangulation, InterpError> {
        let d = self.d;
        let n = self.n_input;
        for i in spatial_order(&self.pts[..n], d) {
            self.insert(i);
        }
        // drop super vertices and near-degenerate simplices
        let mut vmap = vec![NONE; n];
        let mut vertices = Vec::new();
        let mut vals = Vec::new();
        for i in 0..n {
            if self.inserted[i] {
                vmap[i] = vals.len();
                vals.push(values[i]);
            }
        }
        let finite: Vec<usize> = (0..self.cells.len())
            .filter(|&c| self.cells[c].alive && self.cells[c].v[..=d].iter().all(|&v| v < n))
            .collect();
        let vols: Vec<f64> = finite.iter().map(|&c| self.orient(&self.cells[c].v).abs()).collect();
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &self.pts[..n] {
            for j in 0..d {
                lo[j] = lo[j].min(p[j]);
                hi[j] = hi[j].max(p[j]);
            }
        }
        let bbox: f64 = (0..d).map(|j| hi[j] - lo[j]).product::<f64>() * factorial(d);
        let min_vol = 1e-12 * bbox / finite.len().max(1) as f64;
        let mut cmap = vec![NONE; self.cells.len()];
        let mut kept = Vec::new();
        for (&c, &vol) in finite.iter().zip(&vols) {
            if vol >= min_vol && vol > 0.0 {
                cmap[c] = kept.len();
                kept.push(c);
            }
        }
        if kept.is_empty() {
            return Err(InterpError::Degenerate);
        }
        let mut simplices = Vec::with_capacity(kept.len());
        let mut neighbors = Vec::with_capacity(kept.len());
        for &c in &kept {
            let cell = &self.cells[c];
            simplices.push(cell.v[..=d].iter().map(|&v| vmap[v]).collect());
            neighbors.push(
                cell.nb[..=d]
                    .iter()
                    .map(|&nb| if nb == NONE || cmap[nb] == NONE { None } else { Some(cmap[nb]) })
                    .collect(),
            );
        }
        for i in 0..n {
            if self.inserted[i] {
                vertices.extend_from_slice(&self.original[i * d..(i + 1) * d]);
            }
        }
        Ok(Triangulation { dim: d, vertices, values: vals, simplices, neighbors })
    }

}

/// Permanent of `|m|` restricted to rows `row..` and the columns not in `used`.
fn abs_permanent(m: &[f64], w: usize, row: usize, used: u32) -> f64 {
    if row == w {
        return 1.0;
    }
    (0..w)
        .filter(|c| used & (1 << c) == 0)
        .map(|c| m[row * w + c].abs() * abs_permanent(m, w, row + 1, used | (1 << c)))
        .sum()
}

fn orient_with_permanent(d: usize, p: &[[f64; 3]; 4]) -> (f64, f64) {
    let e = |k: usize, c: usize| p[k][c] - p[0][c];
    if d == 2 {
        let (l, r) = (e(1, 0) * e(2, 1), e(1, 1) * e(2, 0));
        (l - r, l.abs() + r.abs())
    } else {
        let m0 = (e(2, 1) * e(3, 2)).abs() + (e(2, 2) * e(3, 1)).abs();
        let m1 = (e(2, 0) * e(3, 2)).abs() + (e(2, 2) * e(3, 0)).abs();
        let m2 = (e(2, 0) * e(3, 1)).abs() + (e(2, 1) * e(3, 0)).abs();
        let perm = e(1, 0).abs() * m0 + e(1, 1).abs() * m1 + e(1, 2).abs() * m2;
        (orient_pts(d, p), perm)
    }
}

fn orient_pts(d: usize, p: &[[f64; 3]; 4]) -> f64 {
    if d == 2 {
        (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[1][1] - p[0][1]) * (p[2][0] - p[0][0])
    } else {
        let a = [p[1][0] - p[0][0], p[1][1] - p[0][1], p[1][2] - p[0][2]];
        let b = [p[2][0] - p[0][0], p[2][1] - p[0][1], p[2][2] - p[0][2]];
        let c = [p[3][0] - p[0][0], p[3][1] - p[0][1], p[3][2] - p[0][2]];
        a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0]) + a[2] * (b[0] * c[1] - b[1] * c[0])
    }
}

/// Insertion order along a Morton curve so consecutive points are close.
fn spatial_order(pts: &[[f64; 3]], d: usize) -> Vec<usize> {
    let key = |p: &[f64; 3]| -> u64 {
        let mut k = 0u64;
        let q: Vec<u64> = (0..d).map(|j| (((p[j] + 1.0) * 0.5).clamp(0.0, 1.0) * 1023.0) as u64).collect();
        for bit in (0..10).rev() {
            for c in &q {
                k = (k << 1) | ((c >> bit) & 1);
            }
        }
        k
    };
    let mut order: Vec<usize> = (0..pts.len()).collect();
    order.sort_by_key(|&i| (key(&pts[i]), i));
    order
}
