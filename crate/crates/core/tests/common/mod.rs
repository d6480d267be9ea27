//! Independent reference computations shared by the oracle tests and the
//! acceptance run. Nothing here calls the spectral or Green's-function code
//! under test.

#![allow(dead_code)]

use layered_pml::geometry::{Medium, PmlConfig};
use layered_pml::{c, C64, I};
use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;

/// Chebyshev-Lobatto nodes on `[-1, 1]` (descending) and the first-derivative matrix.
fn chebyshev(n: usize) -> (Vec<f64>, DMatrix<f64>) {
    let m = n - 1;
    let t: Vec<f64> = (0..n).map(|j| (PI * j as f64 / m as f64).cos()).collect();
    let weight = |j: usize| if j == 0 || j == m { 2.0 } else { 1.0 };
    let sign = |j: usize| if j % 2 == 0 { 1.0 } else { -1.0 };
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                d[(i, j)] = weight(i) / weight(j) * sign(i + j) / (t[i] - t[j]);
            }
        }
    }
    for i in 0..n {
        let s: f64 = (0..n).filter(|&j| j != i).map(|j| d[(i, j)]).sum();
        d[(i, i)] = -s;
    }
    (t, d)
}

fn barycentric(nodes: &[f64], values: &[C64], x: f64) -> C64 {
    let m = nodes.len() - 1;
    let (mut num, mut den) = (C64::default(), 0.0);
    for (j, (&t, &v)) in nodes.iter().zip(values).enumerate() {
        if (x - t).abs() < 1e-15 {
            return v;
        }
        let mut w = if j % 2 == 0 { 1.0 } else { -1.0 };
        if j == 0 || j == m {
            w *= 0.5;
        }
        num += v * (w / (x - t));
        den += w / (x - t);
    }
    num / den
}

/// Solution of the vertical two-point problem
/// `(u'/alpha)' + alpha (k(x)^2 - xi^2) u = -delta(x - y2)`, `u(+-M2) = 0`, by
/// multi-domain Chebyshev collocation. Returns `u` at the requested heights.
pub fn collocation_vertical(medium: &Medium, cfg: &PmlConfig, y2: f64, xi: C64, n: usize, at: &[f64]) -> Vec<C64> {
    let p = &cfg.profile2;
    let (m2, h) = (p.outer(), p.half_physical);
    let mut cuts = vec![-m2, -h, 0.0, y2, h, m2];
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    let nsub = cuts.len() - 1;
    let (t, dt) = chebyshev(n);
    let size = nsub * n;
    let mut a = DMatrix::<C64>::zeros(size, size);
    let mut rhs = DVector::<C64>::zeros(size);
    let mut flux_rows: Vec<Vec<(usize, C64)>> = Vec::new();
    for s in 0..nsub {
        let (lo, hi) = (cuts[s], cuts[s + 1]);
        let half = 0.5 * (hi - lo);
        let x: Vec<f64> = t.iter().map(|&tj| 0.5 * (lo + hi) + half * tj).collect();
        let alpha: Vec<C64> = x.iter().map(|&xj| p.alpha(xj).unwrap()).collect();
        let k = if 0.5 * (lo + hi) >= 0.0 { medium.k1 } else { medium.k2 };
        let d = dt.map(|v| c(v / half, 0.0));
        // (1/alpha) D as a matrix, then D of that
        let mut flux = d.clone();
        for i in 0..n {
            for j in 0..n {
                flux[(i, j)] /= alpha[i];
            }
        }
        let op = &d * &flux;
        for i in 1..n - 1 {
            let row = s * n + i;
            for j in 0..n {
                a[(row, s * n + j)] = op[(i, j)];
            }
            a[(row, row)] += alpha[i] * (k * k - xi * xi);
        }
        // end rows: 0 is the right end, n - 1 the left
        flux_rows.push((0..n).map(|j| (s * n + j, flux[(0, j)])).collect());
        flux_rows.push((0..n).map(|j| (s * n + j, flux[(n - 1, j)])).collect());
    }
    let right = |s: usize| s * n;
    let left = |s: usize| s * n + n - 1;
    a[(left(0), left(0))] = c(1.0, 0.0);
    a[(right(nsub - 1), right(nsub - 1))] = c(1.0, 0.0);
    for s in 0..nsub - 1 {
        // continuity in the right-end row of s
        let r = right(s);
        a[(r, right(s))] = c(1.0, 0.0);
        a[(r, left(s + 1))] = c(-1.0, 0.0);
        // flux jump in the left-end row of s + 1
        let r = left(s + 1);
        for &(j, v) in &flux_rows[2 * (s + 1) + 1] {
            a[(r, j)] += v;
        }
        for &(j, v) in &flux_rows[2 * s] {
            a[(r, j)] -= v;
        }
        if (cuts[s + 1] - y2).abs() < 1e-14 {
            rhs[r] = c(-1.0, 0.0);
        }
    }
    let u = a.lu().solve(&rhs).expect("collocation system is singular");
    at.iter()
        .map(|&x| {
            let s = (0..nsub).find(|&s| x >= cuts[s] && x <= cuts[s + 1]).expect("height inside the strip");
            let vals: Vec<C64> = (0..n).map(|j| u[s * n + j]).collect();
            let (lo, hi) = (cuts[s], cuts[s + 1]);
            barycentric(&t, &vals, (2.0 * x - lo - hi) / (hi - lo))
        })
        .collect()
}

/// Tanh-sinh rule on `[a, b]`. The integrand receives the node and its
/// distances to both ends, so endpoint singularities can be evaluated without
/// cancellation. Levels are refined until two agree to `tol`.
pub fn tanh_sinh<F: Fn(f64, f64, f64) -> C64>(f: F, a: f64, b: f64, tol: f64) -> C64 {
    let half = 0.5 * (b - a);
    let sum_at = |h: f64| {
        let mut total = C64::default();
        let steps = (4.0 / h).ceil() as i64;
        for j in -steps..=steps {
            let t = j as f64 * h;
            let u = 0.5 * PI * t.sinh();
            let ch = u.cosh();
            let w = 0.5 * PI * t.cosh() / (ch * ch);
            let (da, db) = (half * u.exp() / ch, half * (-u).exp() / ch);
            if da <= 0.0 || db <= 0.0 || !w.is_finite() || w < 1e-300 {
                continue;
            }
            let x = if da < db { a + da } else { b - db };
            total += f(x, da, db) * w;
        }
        total * h * half
    };
    let mut h = 0.5;
    let mut prev = sum_at(h);
    for _ in 0..10 {
        h *= 0.5;
        let next = sum_at(h);
        if (next - prev).norm() <= tol * next.norm().max(1e-300) {
            return next;
        }
        prev = next;
    }
    prev
}

fn hankel0(z: f64) -> C64 {
    layered_pml::special::hankel1(0, c(z, 0.0)).unwrap()
}

/// Two-layer Green's function from its real-axis spectral integral, with
/// heights measured into each point's own layer.
pub fn sommerfeld(medium: &Medium, x: [f64; 2], y: [f64; 2]) -> C64 {
    let (k1, k2) = (medium.k1, medium.k2);
    let layer = |h: f64| if h >= 0.0 { 0 } else { 1 };
    let (lx, ly) = (layer(x[1]), layer(y[1]));
    let (xp, yp) = (x[1].abs(), y[1].abs());
    let delta = x[0] - y[0];
    // vertical wavenumbers with Im >= 0 from k^2 - xi^2 = (k - xi)(k + xi)
    let mu = |k: f64, xi: f64, gap: f64| {
        let w = gap * (k + xi);
        if w >= 0.0 {
            c(w.sqrt(), 0.0)
        } else {
            c(0.0, (-w).sqrt())
        }
    };
    let kernel = |xi: f64, m: [C64; 2]| -> C64 {
        let s = m[0] + m[1];
        if lx == ly {
            let (mi, mo) = (m[ly], m[1 - ly]);
            (mi - mo) / s * (I * mi * (xp + yp)).exp() / mi
        } else {
            (I * (m[ly] * yp + m[lx] * xp)).exp() / s
        }
        .scale(2.0 * (xi * delta).cos())
    };
    let tol = 1e-12;
    let mut total = C64::default();
    total += tanh_sinh(|xi, _, db| kernel(xi, [mu(k1, xi, db), mu(k2, xi, k2 - xi)]), 0.0, k1, tol);
    total += tanh_sinh(|xi, da, db| kernel(xi, [mu(k1, xi, -da), mu(k2, xi, db)]), k1, k2, tol);
    let beyond = |xi: f64, da: f64| kernel(xi, [mu(k1, xi, k1 - xi), mu(k2, xi, -da)]);
    total += tanh_sinh(|xi, da, _| beyond(xi, da), k2, k2 + 1.0, tol);
    let reach = 60.0 / (xp + yp);
    let mut a = k2 + 1.0;
    while a < k2 + 1.0 + reach {
        total += tanh_sinh(|xi, _, _| beyond(xi, xi - k2), a, a + 1.0, tol);
        a += 1.0;
    }
    if lx == ly {
        let k = if ly == 0 { k1 } else { k2 };
        let r = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt();
        0.25 * I * hankel0(k * r) + I / (4.0 * PI) * total
    } else {
        I / (2.0 * PI) * total
    }
}

/// `(i/4) H0(k r)`.
pub fn free_space(k: f64, x: [f64; 2], y: [f64; 2]) -> C64 {
    let r = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt();
    0.25 * I * hankel0(k * r)
}

/// Relative residual of `Delta u + k^2 u` from fourth-order central differences
/// with step `h` in both directions.
pub fn helmholtz_residual<F: FnMut([f64; 2]) -> C64>(mut u: F, k: f64, x: [f64; 2], h: f64) -> f64 {
    let w = [-1.0 / 12.0, 4.0 / 3.0, -5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0];
    let centre = u(x);
    let mut lap = C64::default();
    for (m, &wm) in w.iter().enumerate() {
        let s = (m as f64 - 2.0) * h;
        let (a, b) = if m == 2 { (centre, centre) } else { (u([x[0] + s, x[1]]), u([x[0], x[1] + s])) };
        lap += (a + b) * wm;
    }
    lap /= h * h;
    (lap + k * k * centre).norm() / (k * k * centre.norm())
}
