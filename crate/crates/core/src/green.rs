//! Green's functions: the one-dimensional spectral Green's function, the
//! waveguide Green's function and its extension to stretched `x1`, the exact
//! two-layer Green's function, and the image series for the PML box.
//!
//! All spatial Green's functions are assembled from free-space terms
//! `(i/4) H0(k r)` and spectral integrals `c * int e^{i xi a} K(xi) dxi`, with
//! `c = i/(4 pi)` for a source and target in the same layer and `i/(2 pi)`
//! otherwise.

use crate::contour::{integrate, path_ext_pinned, real_run, BranchPoint, ClosedContour, ContourPath, Node, QuadOptions, Segment};
use crate::geometry::{layer_of, Medium, PmlConfig};
use crate::special::{phi_radial, plus_branch};
use crate::spectral::{count_zeros, kernels, SpectralPoint, ZeroCountOptions};
use crate::{c, Error, Result, C64, I};
use serde::Serialize;
use std::f64::consts::PI;

/// Most image pairs `+-n` that [`green_pml`] will sum.
pub const IMAGE_BUDGET: usize = 400;

/// Smallest magnitude the series tolerance is measured against.
const SERIES_ABS_FLOOR: f64 = 1e-3;

/// Value and gradient (in physical target coordinates) of a Green's function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GreenValue {
    pub value: C64,
    pub grad: [C64; 2],
    /// Bound on everything dropped: quadrature error estimates plus the
    /// truncated part of the image series.
    pub tail_bound: f64,
    /// Number of image terms summed (1 without a series).
    pub n_terms: usize,
}

impl GreenValue {
    fn zero() -> Self {
        Self { value: C64::default(), grad: [C64::default(); 2], tail_bound: 0.0, n_terms: 1 }
    }

    fn accumulate(&mut self, other: &GreenValue, sign: f64) {
        self.value += sign * other.value;
        self.grad[0] += sign * other.grad[0];
        self.grad[1] += sign * other.grad[1];
        self.tail_bound += other.tail_bound;
    }

    fn add_scaled(&mut self, w: C64, v: [C64; 3], err: f64) {
        self.value += w * v[0];
        self.grad[0] += w * v[1];
        self.grad[1] += w * v[2];
        self.tail_bound += w.norm() * err;
    }
}

/// Horizontal and vertical offsets of image `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImageTerm {
    pub n: i64,
    pub a_n: C64,
    pub b1: C64,
    pub b2: C64,
    pub b3: C64,
}

/// Height of a point: its layer, stretched coordinate, the stretched
/// coordinate measured into its own layer, and the stretch derivative.
#[derive(Debug, Clone, Copy)]
struct Height {
    layer: u8,
    signed: C64,
    plus: C64,
    alpha: C64,
}

impl Height {
    fn stretched(cfg: &PmlConfig, x2: f64) -> Result<Self> {
        let signed = cfg.stretch2(x2)?;
        let alpha = cfg.profile2.alpha(x2)?;
        Ok(Self::from_parts(x2, signed, alpha))
    }

    fn physical(x2: f64) -> Self {
        Self::from_parts(x2, c(x2, 0.0), c(1.0, 0.0))
    }

    fn from_parts(x2: f64, signed: C64, alpha: C64) -> Self {
        let layer = layer_of(x2);
        let plus = if layer == 1 { signed } else { -signed };
        Self { layer, signed, plus, alpha }
    }

    /// `d plus / d x2`.
    fn dplus(&self) -> C64 {
        if self.layer == 1 {
            self.alpha
        } else {
            -self.alpha
        }
    }
}

/// Horizontal separation `a = d^+` and `da/dx1`.
#[derive(Debug, Clone, Copy)]
struct Separation {
    a: C64,
    da: C64,
}

impl Separation {
    fn new(d: C64, dd: C64) -> Self {
        if d == C64::default() {
            // even in x1 - y1: the derivative at zero separation vanishes
            return Self { a: d, da: C64::default() };
        }
        let a = plus_branch(d);
        let da = if a == d { dd } else { -dd };
        Self { a, da }
    }
}

fn prefactor(same_layer: bool) -> C64 {
    if same_layer {
        I / (4.0 * PI)
    } else {
        I / (2.0 * PI)
    }
}

fn branch_points(medium: &Medium) -> [BranchPoint; 2] {
    [BranchPoint { layer: 1, k: medium.k1 }, BranchPoint { layer: 2, k: medium.k2 }]
}

/// `(i/4) H0(k sqrt(a^2 + b^2))` and its gradient, given `db/dx2`.
fn phi_term(k: f64, sep: Separation, b: C64, db: C64) -> Result<[C64; 3]> {
    let r = plus_branch((sep.a * sep.a + b * b).sqrt());
    let (v, dr) = phi_radial(k, r)?;
    Ok([v, dr * sep.a * sep.da / r, dr * b * db / r])
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Part {
    Residual,
    Layered,
    Both,
}

/// Integrand vector `e^{+-i xi a} [K, dK/dx1, dK/dx2]` at one node.
#[allow(clippy::too_many_arguments)]
fn spectral_integrand(
    medium: &Medium,
    m2_tilde: C64,
    node: &Node,
    hx: &Height,
    hy: &Height,
    part: Part,
    sep: Separation,
    sign: f64,
) -> [C64; 3] {
    let pt = SpectralPoint::at_node(medium, m2_tilde, node);
    let kv = kernels(&pt, hx.plus, hy.plus, hx.layer, hy.layer);
    let (k, kdx) = match part {
        Part::Residual => (kv.residual / kv.dispersion, kv.residual_dx / kv.dispersion),
        Part::Layered => (kv.layered, kv.layered_dx),
        Part::Both => (kv.residual / kv.dispersion + kv.layered, kv.residual_dx / kv.dispersion + kv.layered_dx),
    };
    let phase = sign * I * node.xi;
    let e = (phase * sep.a).exp();
    [e * k, phase * sep.da * e * k, e * kdx * hx.dplus()]
}

fn quad_options(tol: f64) -> QuadOptions {
    QuadOptions::new(tol).with_abs(1e-2 * tol)
}

/// `int_EXT e^{i xi a} K dxi` with `K` the requested kernel.
#[allow(clippy::too_many_arguments)]
fn ext_integral(
    medium: &Medium,
    m2_tilde: C64,
    hx: &Height,
    hy: &Height,
    part: Part,
    sep: Separation,
    decay: f64,
    tol: f64,
) -> Result<([C64; 3], f64)> {
    let path = path_ext_pinned(&branch_points(medium), decay.max(0.05));
    let r = integrate(|n: &Node| spectral_integrand(medium, m2_tilde, n, hx, hy, part, sep, 1.0), &path, quad_options(tol))?;
    Ok((r.value, r.err_est))
}

/// `int_R e^{i xi a} L dxi` for the layered kernel `L`, split into the two
/// half-lines and rotated onto rays of steepest decay of `e^{+-i xi a - xi b}`.
fn layered_line_integral(medium: &Medium, hx: &Height, hy: &Height, sep: Separation, tol: f64) -> Result<([C64; 3], f64)> {
    let b = hx.plus + hy.plus;
    let branch = branch_points(medium);
    let cut = medium.k2 + 0.5 * medium.k1;
    let m2 = c(1.0, 0.0);
    let opts = quad_options(tol);

    let w = b - I * sep.a;
    let wn = w.norm().max(1e-12);
    let mut right = real_run(0.0, cut, &branch);
    right.push(Segment::Tail { from: c(cut, 0.0), dir: w.conj() / wn, decay: wn.max(1e-3), inward: false });
    let right = ContourPath::new("layered+", right);
    let r = integrate(|n: &Node| spectral_integrand(medium, m2, n, hx, hy, Part::Layered, sep, 1.0), &right, opts)?;

    let w = b + I * sep.a;
    let angle = (-w.arg()).clamp(-0.5 * PI, -0.15);
    let dir = C64::from_polar(1.0, angle);
    let decay = (dir * w).re.max(1e-3);
    let left = ContourPath::new("layered-", vec![Segment::Tail { from: C64::default(), dir, decay, inward: false }]);
    let l = integrate(|n: &Node| spectral_integrand(medium, m2, n, hx, hy, Part::Layered, sep, -1.0), &left, opts)?;

    Ok(([r.value[0] + l.value[0], r.value[1] + l.value[1], r.value[2] + l.value[2]], r.err_est + l.err_est))
}

/// Rough exponential rate of the residual kernel along both legs of EXT.
fn ext_decay(cfg: Option<&PmlConfig>, sep: Separation) -> f64 {
    let vertical = cfg.map(|g| 2.0 * g.sigma_bar2().min(g.profile2.thickness)).unwrap_or(0.0);
    sep.a.re.min(sep.a.im).max(0.0) + vertical
}

/// The term of the image series with separation `sep`, or the waveguide
/// Green's function itself when `direct` (then the layered part is integrated
/// along the real line).
fn waveguide_term(
    medium: &Medium,
    cfg: Option<&PmlConfig>,
    hx: &Height,
    hy: &Height,
    sep: Separation,
    direct: bool,
    tol: f64,
) -> Result<GreenValue> {
    let same = hx.layer == hy.layer;
    let pref = prefactor(same);
    let m2t = cfg.map(|g| g.m2_tilde()).unwrap_or(c(1.0, 0.0));
    let mut out = GreenValue::zero();
    if same {
        let k = medium.k(hx.layer);
        let b2 = hx.plus + hy.plus;
        let mut add = |v: [C64; 3], s: f64| out.add_scaled(c(s, 0.0), v, 0.0);
        add(phi_term(k, sep, hx.signed - hy.signed, hx.alpha)?, 1.0);
        add(phi_term(k, sep, b2, hx.dplus())?, -1.0);
        if cfg.is_some() {
            add(phi_term(k, sep, 2.0 * m2t - b2, -hx.dplus())?, -1.0);
        }
    }
    if direct {
        let (v, e) = layered_line_integral(medium, hx, hy, sep, tol)?;
        out.add_scaled(pref, v, e);
        if cfg.is_some() {
            let (v, e) = ext_integral(medium, m2t, hx, hy, Part::Residual, sep, ext_decay(cfg, sep), tol)?;
            out.add_scaled(pref, v, e);
        }
    } else {
        let (v, e) = ext_integral(medium, m2t, hx, hy, Part::Both, sep, ext_decay(cfg, sep), tol)?;
        out.add_scaled(pref, v, e);
    }
    Ok(out)
}

/// One-dimensional Green's function `G^(x2, y2; xi)` of the vertical problem
/// with Dirichlet ends at `+-M2`, normalized by `1/sqrt(2 pi)`.
pub fn ghat(medium: &Medium, cfg: &PmlConfig, x2: f64, y2: f64, xi: C64) -> Result<C64> {
    let hx = Height::stretched(cfg, x2)?;
    let hy = Height::stretched(cfg, y2)?;
    let pt = SpectralPoint::new(medium, cfg.m2_tilde(), xi);
    let kv = kernels(&pt, hx.plus, hy.plus, hx.layer, hy.layer);
    let a = kv.dispersion;
    let scale = medium.k2 + pt.mu[0].norm() + pt.mu[1].norm();
    if !(a.norm() > 1e-10 * scale) {
        return Err(Error::NearDispersionZero(xi));
    }
    let e = |z: C64| (I * z).exp();
    let g = if hx.layer == hy.layer {
        let i = (hy.layer - 1) as usize;
        let (mi, mo) = (pt.mu[i], pt.mu[1 - i]);
        if mi.norm() < 1e-300 {
            return Err(Error::NearDispersionZero(xi));
        }
        let b1 = plus_branch(hx.signed - hy.signed);
        let b2 = hx.plus + hy.plus;
        let b3 = 2.0 * cfg.m2_tilde() - b2;
        let reflect = (mi - mo) / (mi + mo);
        0.5 * I * (kv.residual / a + (reflect * e(mi * b2) + e(mi * b1) - e(mi * b3)) / mi)
    } else {
        I * (kv.residual / a + kv.layered)
    };
    Ok(g / (2.0 * PI).sqrt())
}

fn check_distinct(x: [f64; 2], y: [f64; 2]) -> Result<()> {
    if x == y {
        Err(Error::CoincidentPoints)
    } else {
        Ok(())
    }
}

/// Green's function of the waveguide `R x (-M2, M2)` with the vertical PML and
/// Dirichlet walls at `x2 = +-M2`.
pub fn green_waveguide(medium: &Medium, cfg: &PmlConfig, x: [f64; 2], y: [f64; 2], tol: f64) -> Result<GreenValue> {
    check_distinct(x, y)?;
    let hx = Height::stretched(cfg, x[1])?;
    let hy = Height::stretched(cfg, y[1])?;
    let sep = Separation::new(c(x[0] - y[0], 0.0), c(1.0, 0.0));
    waveguide_term(medium, Some(cfg), &hx, &hy, sep, true, tol)
}

/// The waveguide Green's function continued to stretched `x1`, with the
/// horizontal profile extended periodically.
pub fn green_waveguide_extended(medium: &Medium, cfg: &PmlConfig, x: [f64; 2], y: [f64; 2], tol: f64) -> Result<GreenValue> {
    check_distinct(x, y)?;
    let hx = Height::stretched(cfg, x[1])?;
    let hy = Height::stretched(cfg, y[1])?;
    let d = cfg.stretch_periodic_x1(x[0]) - cfg.stretch_periodic_x1(y[0]);
    let sep = Separation::new(d, cfg.alpha_periodic_x1(x[0]));
    waveguide_term(medium, Some(cfg), &hx, &hy, sep, true, tol)
}

/// Green's function of the unbounded two-layer medium (no absorption).
pub fn green_layered_exact(medium: &Medium, x: [f64; 2], y: [f64; 2], tol: f64) -> Result<GreenValue> {
    check_distinct(x, y)?;
    let hx = Height::physical(x[1]);
    let hy = Height::physical(y[1]);
    let sep = Separation::new(c(x[0] - y[0], 0.0), c(1.0, 0.0));
    waveguide_term(medium, None, &hx, &hy, sep, true, tol)
}

/// Stretched horizontal offset of image `n` before taking the `+` branch,
/// and its derivative in `x1`.
fn image_offset(cfg: &PmlConfig, n: i64, xt: C64, yt: C64, alpha: C64) -> (C64, C64) {
    let m1t = cfg.m1_tilde();
    let m = n.div_euclid(2) as f64;
    if n.rem_euclid(2) == 0 {
        (4.0 * m * m1t + xt - yt, alpha)
    } else {
        ((4.0 * m + 2.0) * m1t - xt - yt, -alpha)
    }
}

fn check_box(cfg: &PmlConfig, p: [f64; 2]) -> Result<()> {
    let m1 = cfg.m1();
    if p[0].abs() > m1 * (1.0 + 1e-12) {
        return Err(Error::OutOfDomain { value: p[0], limit: m1 });
    }
    cfg.stretch2(p[1]).map(|_| ())
}

/// Offsets `a_n` for `|n| <= n_max` and the vertical offsets `b1, b2, b3`.
pub fn image_terms(cfg: &PmlConfig, x: [f64; 2], y: [f64; 2], n_max: usize) -> Result<Vec<ImageTerm>> {
    check_box(cfg, x)?;
    check_box(cfg, y)?;
    let (xt, yt) = (cfg.stretch_periodic_x1(x[0]), cfg.stretch_periodic_x1(y[0]));
    let (x2, y2) = (cfg.stretch2(x[1])?, cfg.stretch2(y[1])?);
    let b1 = plus_branch(x2 - y2);
    let b2 = plus_branch(x2 + y2);
    let b3 = 2.0 * cfg.m2_tilde() - b2;
    let n_max = n_max as i64;
    Ok((-n_max..=n_max)
        .map(|n| {
            let (d, _) = image_offset(cfg, n, xt, yt, c(1.0, 0.0));
            ImageTerm { n, a_n: plus_branch(d), b1, b2, b3 }
        })
        .collect())
}

/// Largest `delta` in a geometric ladder below 0.95 for which the dispersion
/// function has no zero in the square `[0, delta k1]^2` of the first quadrant.
pub fn dispersion_free_box(medium: &Medium, cfg: &PmlConfig) -> f64 {
    let m2t = cfg.m2_tilde();
    let opts = ZeroCountOptions { initial_samples: 64, margin: 1e-13, ..Default::default() };
    let mut delta = 0.95;
    while delta > 1e-3 {
        let side = delta * medium.k1;
        let f = |xi: C64| SpectralPoint::at_node(medium, m2t, &Node::plain(xi)).dispersion() / medium.k2;
        if let Ok(0) = count_zeros(f, &ClosedContour::rectangle(0.0, side, 0.0, side), opts) {
            return delta;
        }
        delta *= 0.8;
    }
    delta
}

/// Predicted ratio between consecutive image pairs: the slowest of
/// `e^{-2 M1 delta k1}`, `e^{-2 sigma_bar1 delta k1}` for the spectral terms and
/// `e^{-k1 sigma_bar1}` for the free-space images.
pub fn image_series_ratio(medium: &Medium, cfg: &PmlConfig) -> f64 {
    let delta = dispersion_free_box(medium, cfg);
    let k1 = medium.k1;
    let s1 = cfg.sigma_bar1();
    [(-2.0 * cfg.m1() * delta * k1).exp(), (-2.0 * s1 * delta * k1).exp(), (-k1 * s1).exp()]
        .into_iter()
        .fold(0.0, f64::max)
}

/// Contributions of the image pairs, for inspecting the series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageSeries {
    pub total: GreenValue,
    /// `|value|` of the pair `+-n`, for `n = 1, 2, ...`.
    pub pair_magnitudes: Vec<f64>,
    pub predicted_ratio: f64,
}

/// Green's function of the box `B_ex` with PMLs on all four sides and
/// Dirichlet walls, as the alternating image series of the extended waveguide
/// Green's function.
pub fn green_pml(medium: &Medium, cfg: &PmlConfig, x: [f64; 2], y: [f64; 2], tol: f64) -> Result<GreenValue> {
    green_pml_series(medium, cfg, x, y, tol).map(|s| s.total)
}

/// [`green_pml`] together with the magnitudes of the summed pairs.
pub fn green_pml_series(medium: &Medium, cfg: &PmlConfig, x: [f64; 2], y: [f64; 2], tol: f64) -> Result<ImageSeries> {
    let rho = image_series_ratio(medium, cfg);
    green_pml_with_ratio(medium, cfg, x, y, tol, rho)
}

/// [`green_pml_series`] with a precomputed predicted ratio (see
/// [`image_series_ratio`]), for repeated evaluations on one geometry.
pub fn green_pml_with_ratio(medium: &Medium, cfg: &PmlConfig, x: [f64; 2], y: [f64; 2], tol: f64, rho: f64) -> Result<ImageSeries> {
    check_distinct(x, y)?;
    check_box(cfg, x)?;
    check_box(cfg, y)?;
    let hx = Height::stretched(cfg, x[1])?;
    let hy = Height::stretched(cfg, y[1])?;
    let (xt, yt) = (cfg.stretch_periodic_x1(x[0]), cfg.stretch_periodic_x1(y[0]));
    let alpha = cfg.alpha_periodic_x1(x[0]);
    let sep0 = Separation::new(xt - yt, alpha);
    let mut total = waveguide_term(medium, Some(cfg), &hx, &hy, sep0, true, tol)?;
    // absolute floor: on the Dirichlet walls every term vanishes
    let scale = total.value.norm().max(SERIES_ABS_FLOOR);
    let goal = 0.25 * tol * scale;
    let rho = rho.clamp(1e-12, 1.0 - 1e-9);
    let mut constant = 0.0f64;
    let mut pairs = Vec::new();
    for n in 1..=IMAGE_BUDGET as i64 {
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        let mut pair = GreenValue::zero();
        for m in [n, -n] {
            let (d, dd) = image_offset(cfg, m, xt, yt, alpha);
            let term = waveguide_term(medium, Some(cfg), &hx, &hy, Separation::new(d, dd), false, tol)?;
            pair.accumulate(&term, sign);
        }
        total.accumulate(&pair, 1.0);
        let mag = pair.value.norm();
        pairs.push(mag);
        constant = constant.max(mag / rho.powi(n as i32));
        let tail = constant * rho.powi(n as i32 + 1) / (1.0 - rho);
        if mag <= goal && tail <= goal {
            total.tail_bound += tail;
            total.n_terms = 2 * n as usize + 1;
            return Ok(ImageSeries { total, pair_magnitudes: pairs, predicted_ratio: rho });
        }
    }
    Err(Error::SeriesBudget(IMAGE_BUDGET))
}
