use precision_core::interp::{
    delaunay_triangulate, grid_spline_fit, interior_mask, spline_fit_1d, InterpError, Triangulation,
};
use precision_core::linalg::{det, solve_dense};
use precision_core::targets::{lookup, sample_dataset, Domain};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_points(n: usize, d: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n * d).map(|_| rng.gen::<f64>()).collect()
}

/// Circumcenter and squared radius by solving `2 (v_i - v_0) . c = |v_i|^2 - |v_0|^2`.
fn circumsphere(tri: &Triangulation, s: usize) -> (Vec<f64>, f64) {
    let d = tri.dim();
    let v = &tri.simplices()[s];
    let p0 = tri.vertex(v[0]);
    let mut a = vec![0.0; d * d];
    let mut b = vec![0.0; d];
    for r in 0..d {
        let p = tri.vertex(v[r + 1]);
        for c in 0..d {
            a[r * d + c] = 2.0 * (p[c] - p0[c]);
        }
        b[r] = p.iter().map(|x| x * x).sum::<f64>() - p0.iter().map(|x| x * x).sum::<f64>();
    }
    solve_dense(&mut a, &mut b, d).unwrap();
    let r2 = b.iter().zip(p0).map(|(c, p)| (c - p) * (c - p)).sum();
    (b, r2)
}

fn assert_empty_circumspheres(tri: &Triangulation) {
    for s in 0..tri.simplices().len() {
        let (c, r2) = circumsphere(tri, s);
        for i in 0..tri.n_vertices() {
            if tri.simplices()[s].contains(&i) {
                continue;
            }
            let d2: f64 = tri.vertex(i).iter().zip(&c).map(|(p, q)| (p - q) * (p - q)).sum();
            assert!(d2 >= r2 * (1.0 - 1e-9), "vertex {i} inside circumsphere of simplex {s}: {d2} < {r2}");
        }
    }
}

fn hull_area_2d(pts: &[f64]) -> f64 {
    let mut p: Vec<(f64, f64)> = pts.chunks_exact(2).map(|c| (c[0], c[1])).collect();
    p.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &(f64, f64)>> =
            if pass == 0 { Box::new(p.iter()) } else { Box::new(p.iter().rev()) };
        for &q in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], q) <= 0.0 {
                hull.pop();
            }
            hull.push(q);
        }
        hull.pop();
    }
    let n = hull.len();
    0.5 * (0..n).map(|i| hull[i].0 * hull[(i + 1) % n].1 - hull[(i + 1) % n].0 * hull[i].1).sum::<f64>()
}

/// Brute-force hull volume: every triple with all points on one side is a facet.
fn hull_volume_3d(pts: &[f64]) -> f64 {
    let p: Vec<[f64; 3]> = pts.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
    let n = p.len();
    let centroid = p.iter().fold([0.0; 3], |mut a, q| {
        for j in 0..3 {
            a[j] += q[j] / n as f64;
        }
        a
    });
    let vol = |a: [f64; 3], b: [f64; 3], c: [f64; 3], o: [f64; 3]| {
        let m = [a[0] - o[0], a[1] - o[1], a[2] - o[2], b[0] - o[0], b[1] - o[1], b[2] - o[2], c[0] - o[0], c[1] - o[1], c[2] - o[2]];
        det(&m, 3)
    };
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let (mut pos, mut neg) = (false, false);
                for (l, q) in p.iter().enumerate() {
                    if l == i || l == j || l == k {
                        continue;
                    }
                    let s = vol(p[i], p[j], p[k], *q);
                    pos |= s > 1e-14;
                    neg |= s < -1e-14;
                }
                if !(pos && neg) {
                    total += vol(p[i], p[j], p[k], centroid).abs() / 6.0;
                }
            }
        }
    }
    total
}

#[test]
fn delaunay_2d_random_is_empty_circle() {
    for (n, seed) in [(50, 1), (200, 2)] {
        let pts = random_points(n, 2, seed);
        let tri = delaunay_triangulate(&pts, &vec![0.0; n], 2).unwrap();
        assert_eq!(tri.n_vertices(), n);
        assert_empty_circumspheres(&tri);
    }
}

#[test]
fn delaunay_3d_random_is_empty_sphere() {
    for (n, seed) in [(40, 3), (200, 4)] {
        let pts = random_points(n, 3, seed);
        let tri = delaunay_triangulate(&pts, &vec![0.0; n], 3).unwrap();
        assert_empty_circumspheres(&tri);
    }
}

#[test]
fn simplices_tile_the_convex_hull() {
    for seed in 0..5 {
        let pts = random_points(120, 2, 100 + seed);
        let tri = delaunay_triangulate(&pts, &vec![0.0; 120], 2).unwrap();
        let hull = hull_area_2d(&pts);
        assert!((tri.total_volume() - hull).abs() <= 1e-9 * hull, "seed {seed}: {} vs {hull}", tri.total_volume());
    }
    for seed in 0..3 {
        let pts = random_points(40, 3, 200 + seed);
        let tri = delaunay_triangulate(&pts, &vec![0.0; 40], 3).unwrap();
        let hull = hull_volume_3d(&pts);
        assert!((tri.total_volume() - hull).abs() <= 1e-9 * hull, "seed {seed}: {} vs {hull}", tri.total_volume());
    }
}

#[test]
fn simplices_are_positive_and_adjacency_is_symmetric() {
    let pts = random_points(300, 3, 9);
    let tri = delaunay_triangulate(&pts, &vec![0.0; 300], 3).unwrap();
    for s in 0..tri.simplices().len() {
        assert!(tri.simplex_volume(s) > 0.0);
        for (i, nb) in tri.neighbors()[s].iter().enumerate() {
            if let Some(n) = *nb {
                assert!(tri.neighbors()[n].contains(&Some(s)));
                // shared facet: all vertices but the opposite one
                let facet: Vec<usize> = tri.simplices()[s].iter().enumerate().filter(|(k, _)| *k != i).map(|(_, &v)| v).collect();
                assert!(facet.iter().all(|v| tri.simplices()[n].contains(v)));
            }
        }
    }
}

#[test]
fn affine_targets_are_reproduced() {
    let f2 = |x: &[f64]| 2.0 * x[0] - 3.0 * x[1] + 1.0;
    let pts = random_points(400, 2, 21);
    let vals: Vec<f64> = pts.chunks_exact(2).map(f2).collect();
    let tri = delaunay_triangulate(&pts, &vals, 2).unwrap();
    let mut loc = tri.locator();
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let mut hits = 0;
    for _ in 0..2000 {
        let x = [rng.gen::<f64>(), rng.gen::<f64>()];
        match loc.predict(&x) {
            Ok(v) => {
                hits += 1;
                assert!((v - f2(&x)).abs() <= 1e-12 * f2(&x).abs().max(1.0));
            }
            Err(InterpError::OutsideHull) => {}
            Err(e) => panic!("{e}"),
        }
    }
    assert!(hits > 1800);

    let f3 = |x: &[f64]| 0.5 * x[0] + x[1] - 4.0 * x[2] + 2.0;
    let pts = random_points(300, 3, 23);
    let vals: Vec<f64> = pts.chunks_exact(3).map(f3).collect();
    let tri = delaunay_triangulate(&pts, &vals, 3).unwrap();
    let mut loc = tri.locator();
    for _ in 0..1000 {
        let x = [0.2 + 0.6 * rng.gen::<f64>(), 0.2 + 0.6 * rng.gen::<f64>(), 0.2 + 0.6 * rng.gen::<f64>()];
        let v = loc.predict(&x).unwrap();
        assert!((v - f3(&x)).abs() <= 1e-12 * f3(&x).abs().max(1.0));
    }
}

#[test]
fn barycentric_coordinates_reconstruct_the_point() {
    for d in [2, 3] {
        let n = 150;
        let pts = random_points(n, d, 30 + d as u64);
        let tri = delaunay_triangulate(&pts, &vec![0.0; n], d).unwrap();
        let mut loc = tri.locator();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..500 {
            let x: Vec<f64> = (0..d).map(|_| 0.15 + 0.7 * rng.gen::<f64>()).collect();
            let (s, w) = loc.locate(&x).unwrap();
            let w = &w[..=d];
            assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            assert!(w.iter().all(|&v| v >= -1e-12));
            for j in 0..d {
                let r: f64 = tri.simplices()[s].iter().zip(w).map(|(&v, wi)| wi * tri.vertex(v)[j]).sum();
                assert!((r - x[j]).abs() <= 1e-10);
            }
        }
    }
}

#[test]
fn training_vertices_are_fit_exactly() {
    let e = lookup("xy").unwrap();
    let data = sample_dataset(&e.spec, &e.domain, 500, 4).unwrap();
    let tri = delaunay_triangulate(&data.inputs, &data.targets, 2).unwrap();
    let mut loc = tri.locator();
    for (x, y) in data.rows().zip(&data.targets) {
        let v = loc.predict(x).unwrap();
        assert!((v - y).abs() <= 1e-12 * y.abs(), "{v} vs {y}");
    }
    assert_eq!(tri.n_params(), 500 * 3);
}

#[test]
fn prediction_outside_hull_is_reported() {
    let pts = random_points(30, 2, 8);
    let tri = delaunay_triangulate(&pts, &vec![0.0; 30], 2).unwrap();
    assert_eq!(tri.predict(&[2.0, 0.5]), Err(InterpError::OutsideHull));
    assert_eq!(tri.predict(&[-0.1, -3.0]), Err(InterpError::OutsideHull));
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn rel_rmse(pred: &[f64], y: &[f64]) -> f64 {
    let num: f64 = pred.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum();
    let den: f64 = y.iter().map(|t| t * t).sum();
    (num / den).sqrt()
}

#[test]
fn simplex_xy_error_scales_as_inverse_size() {
    let e = lookup("xy").unwrap();
    let test = sample_dataset(&e.spec, &e.domain, 30_000, 999).unwrap();
    let test = test.filter(&interior_mask(&e.domain, 0.1, &test.inputs));
    let sizes: Vec<usize> = (7..=13).map(|p| 1 << p).collect();
    let mut losses = Vec::new();
    for &n in &sizes {
        let data = sample_dataset(&e.spec, &e.domain, n, 1).unwrap();
        let tri = delaunay_triangulate(&data.inputs, &data.targets, 2).unwrap();
        let mut loc = tri.locator();
        let pred: Vec<f64> = test.rows().map(|x| loc.predict(x).unwrap()).collect();
        losses.push(rel_rmse(&pred, &test.targets));
    }
    let xs: Vec<f64> = sizes.iter().map(|&n| n as f64).collect();
    let s = slope(&xs, &losses);
    assert!((s + 1.0).abs() <= 0.2, "slope {s}, losses {losses:?}");
}

#[test]
fn cubic_spline_cos2x_error_scales_as_fourth_power() {
    let e = lookup("cos2x").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let test: Vec<f64> = (0..30_000).map(|_| rng.gen_range(1.4..4.6)).collect();
    let truth: Vec<f64> = test.iter().map(|x| (2.0 * x).cos()).collect();
    let mut xs_used = Vec::new();
    let mut losses = Vec::new();
    for p in 4..=12 {
        let n = 1usize << p;
        let xs: Vec<f64> = (0..n).map(|i| 1.0 + 4.0 * i as f64 / (n - 1) as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| e.spec.eval(&[*x]).unwrap()).collect();
        let sp = spline_fit_1d(&xs, &ys, 3).unwrap();
        let pred: Vec<f64> = test.iter().map(|&x| sp.eval(x).unwrap()).collect();
        let l = rel_rmse(&pred, &truth);
        if l > 1e-13 {
            xs_used.push(n as f64);
            losses.push(l);
        }
    }
    let s = slope(&xs_used, &losses);
    assert!((s + 4.0).abs() <= 0.5, "slope {s}, losses {losses:?}");
}

#[test]
fn quintic_spline_reaches_the_precision_floor() {
    let n = 4096;
    let xs: Vec<f64> = (0..n).map(|i| 1.0 + 4.0 * i as f64 / (n - 1) as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|x| (2.0 * x).cos()).collect();
    let sp = spline_fit_1d(&xs, &ys, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let test: Vec<f64> = (0..30_000).map(|_| rng.gen_range(1.4..4.6)).collect();
    let truth: Vec<f64> = test.iter().map(|x| (2.0 * x).cos()).collect();
    let pred: Vec<f64> = test.iter().map(|&x| sp.eval(x).unwrap()).collect();
    let l = rel_rmse(&pred, &truth);
    assert!(l <= 1e-13, "{l}");
}

#[test]
fn tricubic_error_scales_with_total_points() {
    // x1 x2 x3 is reproduced exactly by tensor cubics, so use a smooth non-polynomial
    // target; below ~16 points per axis the error is still pre-asymptotic
    let e = lookup("expxyz").unwrap();
    let test = sample_dataset(&e.spec, &e.domain, 30_000, 77).unwrap();
    let test = test.filter(&interior_mask(&e.domain, 0.1, &test.inputs));
    let mut totals = Vec::new();
    let mut losses = Vec::new();
    for m in [16usize, 24, 32, 48, 64] {
        let g = grid_spline_fit(&e.spec, &e.domain, m).unwrap();
        let pred: Vec<f64> = test.rows().map(|x| g.eval(x).unwrap()).collect();
        totals.push((m * m * m) as f64);
        losses.push(rel_rmse(&pred, &test.targets));
    }
    let s = slope(&totals, &losses);
    assert!((s + 4.0 / 3.0).abs() <= 0.3, "slope {s}, losses {losses:?}");

    let xyz = lookup("xyz").unwrap();
    let g = grid_spline_fit(&xyz.spec, &xyz.domain, 4).unwrap();
    let x = [1.7, 2.9, 4.1];
    assert!((g.eval(&x).unwrap() - xyz.spec.eval(&x).unwrap()).abs() < 1e-12 * 20.0);
}

#[test]
fn interior_mask_keeps_expected_fraction() {
    let dom = Domain::cube(2, 0.0, 1.0).unwrap();
    let pts = random_points(100_000, 2, 55);
    let kept = interior_mask(&dom, 0.1, &pts).into_iter().filter(|&k| k).count();
    assert!((kept as f64 / 1e5 - 0.64).abs() <= 0.01);
}
