mod common;

use common::{collocation_vertical, free_space, helmholtz_residual, sommerfeld};
use layered_pml::geometry::{Medium, PmlConfig, Shape};
use layered_pml::green::{ghat, green_layered_exact, green_waveguide};
use layered_pml::special::hankel1;
use layered_pml::{c, C64};
use std::f64::consts::PI;

fn setup() -> (Medium, PmlConfig) {
    (Medium::new(1.0, 2.0).unwrap(), PmlConfig::symmetric(2.0, 1.0, Shape::Power2, 2.0, 0.5).unwrap())
}

fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm()
}

// (z, H0(z), H1(z)) from an independent double-precision library.
const HANKEL_TABLE: [([f64; 2], [f64; 2], [f64; 2]); 14] = [
    ([1.0e-1, 0.0], [9.97501562066040126e-01, -1.53423865135036674e+00], [4.99375260362423870e-02, -6.45895109470202655e+00]),
    ([1.0, 0.0], [7.65197686557966383e-01, 8.82569642156769973e-02], [4.40050585744933553e-01, -7.81212821300288907e-01]),
    ([2.5, 0.0], [-4.83837764681979560e-02, 4.98070359615231939e-01], [4.97094102464274046e-01, 1.45918137966785794e-01]),
    ([7.0, 0.0], [3.00079270519555574e-01, -2.59497439672092510e-02], [-4.68282348234580308e-03, -3.02667237024184854e-01]),
    ([30.0, 0.0], [-8.63679835810402252e-02, -1.17295731686664087e-01], [-1.18751062616623021e-01, 8.44255706617472457e-02]),
    ([0.5, 0.5], [3.81743920346518384e-01, -3.52033106707014820e-01], [-3.68254848801686407e-01, -6.89368950860556939e-01]),
    ([-2.0, 1.0], [-1.12215177796067919e-01, 1.54281685256013268e-01], [1.91216550786574735e-01, 9.62481319882485670e-02]),
    ([1.0e-3, 2.0e-3], [2.95162860936755977e-01, -3.95912163162853270e+00], [-2.54643483934841782e+02, -1.27325798023400992e+02]),
    ([12.0, 4.0], [2.00680817346052205e-04, -4.09005197992369767e-03], [-4.13609627099074603e-03, -3.54649268065967331e-04]),
    ([0.0, 5.0], [0.0, -2.34982618120455500e-03], [-2.57488089095861536e-03, -1.57665982064907656e-19]),
    ([3.0, 2.0], [-1.77932703039945898e-02, 5.28194044971553867e-02], [5.50675953373147078e-02, 2.48672812247509346e-02]),
    ([16.0, 1.0], [-6.31208858001612721e-02, 3.71795350701442234e-02], [3.53102858404644310e-02, 6.44276434819309046e-02]),
    ([18.0, 0.5], [-9.67388974501435898e-03, -1.13589193205070868e-01], [-1.13988190330009731e-01, 6.53702263006423080e-03]),
    ([-10.0, 3.0], [1.14310123753826563e-02, 4.39462700395647395e-03], [3.94241877878068712e-03, -1.17968303607401681e-02]),
];

#[test]
fn hankel_matches_reference_table() {
    for (z, h0, h1) in HANKEL_TABLE {
        let z = c(z[0], z[1]);
        let e0 = rel(hankel1(0, z).unwrap(), c(h0[0], h0[1]));
        let e1 = rel(hankel1(1, z).unwrap(), c(h1[0], h1[1]));
        assert!(e0 < 1e-11 && e1 < 1e-11, "z = {z}: {e0:e} {e1:e}");
    }
}

#[test]
fn collocation_oracle_is_converged() {
    let (m, cfg) = setup();
    let at: Vec<f64> = (0..9).map(|j| -2.5 + 0.6 * j as f64).collect();
    let a = collocation_vertical(&m, &cfg, 0.7, c(1.3, 0.2), 36, &at);
    let b = collocation_vertical(&m, &cfg, 0.7, c(1.3, 0.2), 56, &at);
    let scale = b.iter().map(|v| v.norm()).fold(0.0, f64::max);
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).norm() < 1e-11 * scale);
    }
}

#[test]
fn ghat_solves_vertical_problem() {
    let (m, cfg) = setup();
    let at: Vec<f64> = (0..13).map(|j| -2.9 + 0.48 * j as f64).collect();
    for y2 in [0.6, -0.8, 2.4] {
        for xi in [c(0.5, 0.0), c(1.5, 0.0), c(3.0, 0.0), c(0.7, 0.3), c(2.5, -0.4), c(-1.2, 0.2), c(0.0, 0.3)] {
            let oracle = collocation_vertical(&m, &cfg, y2, xi, 48, &at);
            let scale = oracle.iter().map(|v| v.norm()).fold(0.0, f64::max);
            for (&x2, o) in at.iter().zip(&oracle) {
                let g = ghat(&m, &cfg, x2, y2, xi).unwrap() * (2.0 * PI).sqrt();
                assert!((g - o).norm() < 1e-8 * scale, "xi = {xi}, x2 = {x2}, y2 = {y2}: {g} vs {o}");
            }
        }
    }
}

#[test]
fn ghat_traces_and_continuity() {
    let (m, cfg) = setup();
    let m2 = cfg.m2();
    for (y2, xi) in [(0.4, c(1.1, 0.1)), (-1.3, c(2.7, -0.2)), (0.9, c(0.2, 0.0))] {
        let g = |x2: f64| ghat(&m, &cfg, x2, y2, xi).unwrap();
        let scale = g(y2).norm();
        assert!(g(m2).norm() < 1e-10 * scale);
        assert!(g(-m2).norm() < 1e-10 * scale);
        assert!((g(1e-15) - g(-1e-15)).norm() < 1e-10 * scale);
        assert!((g(y2 + 1e-14) - g(y2 - 1e-14)).norm() < 1e-10 * scale);
    }
}

#[test]
fn layered_exact_matches_real_axis_integral() {
    let m = Medium::new(1.0, 2.0).unwrap();
    let pairs = [([0.3, 0.4], [-0.5, 0.3]), ([1.0, -0.6], [0.2, -0.4]), ([0.8, 0.7], [-0.3, -0.5]), ([-1.5, -0.2], [0.4, 0.9])];
    for (x, y) in pairs {
        let g = green_layered_exact(&m, x, y, 1e-10).unwrap().value;
        let o = sommerfeld(&m, x, y);
        assert!(rel(g, o) < 1e-6, "{x:?} {y:?}: {g} vs {o}");
    }
}

#[test]
fn equal_wavenumbers_give_free_space() {
    let m = Medium::homogeneous(1.5);
    for (x, y) in [([0.3, 0.4], [-0.5, 0.3]), ([1.0, -0.6], [0.2, 0.4]), ([0.0, -0.1], [2.0, -0.7])] {
        let g = green_layered_exact(&m, x, y, 1e-12).unwrap().value;
        assert!(rel(g, free_space(1.5, x, y)) < 1e-8);
    }
}

#[test]
fn waveguide_solves_helmholtz() {
    let (m, cfg) = setup();
    let y = [0.2, 0.5];
    let g = |x: [f64; 2]| green_waveguide(&m, &cfg, x, y, 1e-12).unwrap().value;
    for x in [[1.3, 1.2], [-1.1, 0.8], [0.9, -0.7], [-0.4, -1.5]] {
        let k = m.k_at(x[1]);
        let r = helmholtz_residual(g, k, x, 0.02);
        assert!(r < 1e-4, "{x:?}: {r:e}");
    }
    let m2 = cfg.m2();
    let scale = g([1.0, 0.0]).norm();
    for x1 in [-3.0, 0.5, 6.0] {
        assert!(g([x1, m2]).norm() < 1e-6 * scale);
        assert!(g([x1, -m2]).norm() < 1e-6 * scale);
    }
}

#[test]
fn waveguide_far_field_matches_real_axis_transform() {
    // the vertical transform is even in xi and has no branch points, so the
    // real axis is an admissible path at any separation
    let (m, cfg) = setup();
    let (x2, y2) = (0.9, 0.2);
    for sep in [20.0, 40.0] {
        let f = |xi: f64| ghat(&m, &cfg, x2, y2, c(xi, 0.0)).unwrap() * (xi * sep).cos();
        let mut total = C64::default();
        // panel ends stay clear of +-k1, +-k2, where the closed form divides by mu
        let mut cuts = vec![0.0, 0.37];
        while *cuts.last().unwrap() < 2.0 + 60.0 / (x2 - y2) {
            let next = cuts.last().unwrap() + 0.5;
            cuts.push(next);
        }
        for w in cuts.windows(2) {
            total += common::tanh_sinh(|xi, _, _| f(xi), w[0], w[1], 1e-12);
        }
        let oracle = total * 2.0 / (2.0 * PI).sqrt();
        let g = green_waveguide(&m, &cfg, [sep, x2], [0.0, y2], 1e-12).unwrap().value;
        assert!(rel(g, oracle) < 1e-6, "separation {sep}: {g} vs {oracle}");
    }
}
