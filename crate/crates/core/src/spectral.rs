//! Quantities attached to one spectral coordinate `xi`: the vertical
//! wavenumbers `mu_j`, round-trip factors `eps_j`, the dispersion function and
//! the kernels of the waveguide Green's function. Also the numerical checks of
//! the dispersion function's root-freeness and lower bounds.

use crate::contour::{ClosedContour, Node, PathConstants, Piece};
use crate::geometry::{Medium, PmlConfig};
use crate::special::{sqrt_principal, sqrt_upper};
use crate::{c, Error, Result, C64, I};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use std::f64::consts::{FRAC_PI_2, PI};

#[inline]
fn idx(layer: u8) -> usize {
    (layer - 1) as usize
}

/// Derived quantities at a spectral point. Index 0 refers to layer 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralPoint {
    pub xi: C64,
    pub mu: [C64; 2],
    /// `exp(i mu_j M2~)`.
    pub half_trip: [C64; 2],
    /// `exp(2 i mu_j M2~)`.
    pub eps: [C64; 2],
    pub m2_tilde: C64,
}

impl SpectralPoint {
    /// Both vertical wavenumbers on the branch with `Im mu >= 0`.
    pub fn new(medium: &Medium, m2_tilde: C64, xi: C64) -> Self {
        let mu = [sqrt_upper(medium.k1 * medium.k1 - xi * xi), sqrt_upper(medium.k2 * medium.k2 - xi * xi)];
        Self::from_mu(xi, mu, m2_tilde)
    }

    /// Vertical wavenumbers analytically continued along the contour that
    /// produced `node`: in the open first quadrant left of `k_j` the principal
    /// root is the continuation of the values on the imaginary axis and on
    /// `(0, k_j)`; everywhere else the `Im mu >= 0` branch applies. Pinned
    /// nodes carry `mu_l` exactly and the other root is derived from it.
    pub fn at_node(medium: &Medium, m2_tilde: C64, node: &Node) -> Self {
        let xi = node.xi;
        let ks = [medium.k1, medium.k2];
        let mut mu = [C64::default(); 2];
        for j in 0..2 {
            let k = ks[j];
            mu[j] = match node.pin {
                Some(p) if idx(p.layer) == j => p.mu,
                Some(p) => {
                    let w = k * k - p.k * p.k + p.mu * p.mu;
                    if xi.re > 0.0 && xi.im > 0.0 && xi.re < k {
                        sqrt_principal(w)
                    } else {
                        sqrt_upper(w)
                    }
                }
                None => {
                    let w = k * k - xi * xi;
                    if xi.re > 0.0 && xi.im > 0.0 && xi.re < k {
                        sqrt_principal(w)
                    } else {
                        sqrt_upper(w)
                    }
                }
            };
        }
        Self::from_mu(xi, mu, m2_tilde)
    }

    /// Builds the point from given vertical wavenumbers.
    pub fn from_mu(xi: C64, mu: [C64; 2], m2_tilde: C64) -> Self {
        let half_trip = [(I * mu[0] * m2_tilde).exp(), (I * mu[1] * m2_tilde).exp()];
        let eps = [(2.0 * I * mu[0] * m2_tilde).exp(), (2.0 * I * mu[1] * m2_tilde).exp()];
        Self { xi, mu, half_trip, eps, m2_tilde }
    }

    /// Point parametrized by `mu_layer`; the other root is `sqrt_upper`.
    pub fn from_layer_mu(medium: &Medium, m2_tilde: C64, layer: u8, mu_l: C64) -> Self {
        let (kl, ko) = if layer == 1 { (medium.k1, medium.k2) } else { (medium.k2, medium.k1) };
        let mu_o = sqrt_upper(ko * ko - kl * kl + mu_l * mu_l);
        let xi = sqrt_principal(kl * kl - mu_l * mu_l);
        let mu = if layer == 1 { [mu_l, mu_o] } else { [mu_o, mu_l] };
        Self::from_mu(xi, mu, m2_tilde)
    }

    /// `(1 - eps1 eps2)(mu1 + mu2) + (eps1 - eps2)(mu1 - mu2)`.
    pub fn dispersion(&self) -> C64 {
        let [m1, m2] = self.mu;
        let [e1, e2] = self.eps;
        (1.0 - e1 * e2) * (m1 + m2) + (e1 - e2) * (m1 - m2)
    }

    /// The factored form `(1 - eps2)(1 + eps1) mu1 + (1 - eps1)(1 + eps2) mu2`.
    pub fn dispersion_factored(&self) -> C64 {
        let [m1, m2] = self.mu;
        let [e1, e2] = self.eps;
        (1.0 - e2) * (1.0 + e1) * m1 + (1.0 - e1) * (1.0 + e2) * m2
    }

    /// Reflection and transmission coefficients.
    pub fn coefficients(&self) -> Coefficients {
        let [m1, m2] = self.mu;
        let [e1, e2] = self.eps;
        let s = m1 + m2;
        let mut b1 = [C64::default(); 2];
        let mut b2 = [C64::default(); 2];
        for i in 0..2 {
            let o = 1 - i;
            let (mi, mo) = (self.mu[i], self.mu[o]);
            b1[i] = (mi - mo) - s * self.eps[o];
            b2[i] = (mi * mi - mo * mo) * e1 * e2 - (m1 - m2) * (m1 - m2) * self.eps[i] - 4.0 * m1 * m2 * self.eps[o];
        }
        Coefficients { b: s * e1 * e2 - (e1 - e2) * (m1 - m2), b1, b2 }
    }
}

/// `B`, and `B1^i`, `B2^i` indexed by layer (0 for layer 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub b: C64,
    pub b1: [C64; 2],
    pub b2: [C64; 2],
}

/// Kernels of the waveguide Green's function for a target in `layer_x` and a
/// source in `layer_y` at one spectral point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue {
    /// Residual kernel (divided by the dispersion function in the Green's function).
    pub residual: C64,
    /// Parts multiplying `exp(i mu_1 M2~)` and `exp(i mu_2 M2~)`.
    pub residual_parts: [C64; 2],
    /// Derivative of `residual` in the target height `xp`.
    pub residual_dx: C64,
    /// Layered-medium kernel.
    pub layered: C64,
    /// Derivative of `layered` in `xp`.
    pub layered_dx: C64,
    pub dispersion: C64,
    pub coefficients: Coefficients,
}

/// Kernels at heights `xp = x2~+`, `yp = y2~+` (the stretched heights measured
/// into each point's own layer).
pub fn kernels(pt: &SpectralPoint, xp: C64, yp: C64, layer_x: u8, layer_y: u8) -> KernelValue {
    let co = pt.coefficients();
    let s = pt.mu[0] + pt.mu[1];
    let mt = pt.m2_tilde;
    let e = |z: C64| (I * z).exp();
    let i = idx(layer_y);
    let o = 1 - i;
    let (mi, mo) = (pt.mu[i], pt.mu[o]);
    let (residual, residual_dx, layered, layered_dx, parts_i, parts_o);
    if layer_x == layer_y {
        let direct = co.b2[i] * e(mi * (xp + yp)) / s;
        let (e1, e2, e3) = (e(mi * (4.0 * mt - yp - xp)), e(mi * (2.0 * mt - yp + xp)), e(mi * (2.0 * mt + yp - xp)));
        residual = direct / mi + co.b1[i] / mi * (e1 - e2 - e3);
        residual_dx = I * (direct + co.b1[i] * (e3 - e1 - e2));
        layered = 2.0 * e(mi * (xp + yp)) / s;
        layered_dx = I * mi * layered;
        let eo = pt.eps[o];
        let front = 2.0 * (eo - 1.0) + 4.0 * mo / s;
        let back = (eo - 1.0) + (1.0 + eo) * mo / mi;
        parts_i = front * e(mi * (mt + xp + yp))
            - back * (e(mi * (mt + xp + yp)) + e(mi * (3.0 * mt - xp - yp)) - e(mi * (mt - yp + xp)) - e(mi * (mt + yp - xp)));
        parts_o = -4.0 * mo / s * e(mi * (xp + yp) + mo * mt);
    } else {
        let direct = co.b * e(mi * yp + mo * xp) / s;
        let e2 = e(mi * (2.0 * mt - yp) + mo * (2.0 * mt - xp));
        let e3 = e(mi * (2.0 * mt - yp) + mo * xp);
        let e4 = e(mi * yp + mo * (2.0 * mt - xp));
        residual = direct + e2 - e3 - e4;
        residual_dx = I * mo * (direct - e2 - e3 + e4);
        layered = e(mi * yp + mo * xp) / s;
        layered_dx = I * mo * layered;
        parts_i = (mo - mi) / s * e(mi * (mt + yp) + mo * xp) - e(mi * (mt - yp) + mo * xp);
        parts_o = (pt.eps[i] + (mi - mo) / s) * e(mi * yp + mo * (mt + xp)) + e(mi * (2.0 * mt - yp) + mo * (mt - xp))
            - e(mi * yp + mo * (mt - xp));
    }
    let mut residual_parts = [C64::default(); 2];
    residual_parts[i] = parts_i;
    residual_parts[o] = parts_o;
    KernelValue { residual, residual_dx, residual_parts, layered, layered_dx, dispersion: pt.dispersion(), coefficients: co }
}

/// Stretched height measured into the point's own layer.
pub fn stretched_plus(cfg: &PmlConfig, x2: f64) -> Result<C64> {
    let s = cfg.stretch2(x2)?;
    Ok(if x2 < 0.0 { -s } else { s })
}

/// [`kernels`] from physical heights, checking the layer labels.
pub fn kernels_at(pt: &SpectralPoint, cfg: &PmlConfig, x2: f64, y2: f64, layer_x: u8, layer_y: u8) -> Result<KernelValue> {
    for (h, l) in [(x2, layer_x), (y2, layer_y)] {
        let ok = match l {
            1 => h >= 0.0,
            2 => h <= 0.0,
            _ => false,
        };
        if !ok {
            return Err(Error::LayerMismatch { x2: h, layer: l });
        }
    }
    Ok(kernels(pt, stretched_plus(cfg, x2)?, stretched_plus(cfg, y2)?, layer_x, layer_y))
}

/// Budget and margins of [`count_zeros`].
#[derive(Debug, Clone, Copy)]
pub struct ZeroCountOptions {
    /// Uniform samples per contour piece before refinement.
    pub initial_samples: usize,
    pub max_depth: u32,
    /// The function must stay above this modulus on the contour.
    pub margin: f64,
}

impl Default for ZeroCountOptions {
    fn default() -> Self {
        Self { initial_samples: 256, max_depth: 40, margin: 1e-12 }
    }
}

/// Winding number of `func` along a closed contour by phase continuation:
/// steps whose phase change exceeds a quarter turn are bisected.
pub fn count_zeros<F>(mut func: F, contour: &ClosedContour, opts: ZeroCountOptions) -> Result<i64>
where
    F: FnMut(C64) -> C64,
{
    let mut turns = 0.0;
    let mut eval = |z: C64| -> Result<C64> {
        let v = func(z);
        if !(v.re.is_finite() && v.im.is_finite()) || v.norm() < opts.margin {
            return Err(Error::ZeroOnContour(z));
        }
        Ok(v)
    };
    for piece in &contour.pieces {
        let n = opts.initial_samples.max(2);
        let mut prev_t = 0.0;
        let mut prev_v = eval(piece.point(0.0))?;
        for j in 1..=n {
            let t = j as f64 / n as f64;
            let v = eval(piece.point(t))?;
            turns += phase_walk(&mut eval, piece, prev_t, prev_v, t, v, opts.max_depth)?;
            prev_t = t;
            prev_v = v;
        }
    }
    let total = turns / (2.0 * PI);
    let rounded = total.round();
    if (total - rounded).abs() > 0.25 {
        return Err(Error::Uncertain(total));
    }
    Ok(rounded as i64)
}

fn phase_walk<E>(eval: &mut E, piece: &Piece, ta: f64, va: C64, tb: f64, vb: C64, depth: u32) -> Result<f64>
where
    E: FnMut(C64) -> Result<C64>,
{
    let step = (vb / va).arg();
    if step.abs() <= FRAC_PI_2 {
        return Ok(step);
    }
    if depth == 0 {
        return Err(Error::Uncertain(step / (2.0 * PI)));
    }
    let tm = 0.5 * (ta + tb);
    let vm = eval(piece.point(tm))?;
    Ok(phase_walk(eval, piece, ta, va, tm, vm, depth - 1)? + phase_walk(eval, piece, tm, vm, tb, vb, depth - 1)?)
}

/// `A / ((1 - eps1)(1 - eps2))` as a function of `mu1` in the closed first
/// quadrant, with `mu2 = sqrt_upper(k2^2 - k1^2 + mu1^2)`.
pub fn normalized_dispersion_mu1(medium: &Medium, m2_tilde: C64, mu1: C64) -> C64 {
    let mu2 = sqrt_upper(medium.k2 * medium.k2 - medium.k1 * medium.k1 + mu1 * mu1);
    let pt = SpectralPoint::from_mu(sqrt_principal(medium.k1 * medium.k1 - mu1 * mu1), [mu1, mu2], m2_tilde);
    pt.dispersion() / ((1.0 - pt.eps[0]) * (1.0 - pt.eps[1]))
}

/// Boundary of the quarter disk of radius `r` in the `mu1` plane with a
/// quarter disk of radius `eps` removed at the origin and a half disk of
/// radius `eps` removed around `i sqrt(k2^2 - k1^2)`.
pub fn indented_quarter_contour(medium: &Medium, eps: f64, r: f64) -> Result<ClosedContour> {
    let s = (medium.k2 * medium.k2 - medium.k1 * medium.k1).sqrt();
    if !(eps > 0.0 && eps < 0.5 * s && r > s + eps) {
        return Err(Error::BadConstants(format!("need 0 < eps < {} and r > {}", 0.5 * s, s + eps)));
    }
    Ok(ClosedContour {
        pieces: vec![
            Piece::Line { from: c(eps, 0.0), to: c(r, 0.0) },
            Piece::Arc { center: C64::default(), radius: r, theta0: 0.0, theta1: FRAC_PI_2 },
            Piece::Line { from: c(0.0, r), to: c(0.0, s + eps) },
            Piece::Arc { center: c(0.0, s), radius: eps, theta0: FRAC_PI_2, theta1: -FRAC_PI_2 },
            Piece::Line { from: c(0.0, s - eps), to: c(0.0, eps) },
            Piece::Arc { center: C64::default(), radius: eps, theta0: FRAC_PI_2, theta1: 0.0 },
        ],
    })
}

/// Number of zeros of the dispersion function inside a rectangle of the
/// fourth (or second) quadrant. The rectangle must keep `margin` away from
/// both axes.
pub fn eigen_freeness(medium: &Medium, cfg: &PmlConfig, rect: [f64; 4], margin: f64) -> Result<i64> {
    let [x0, x1, y0, y1] = rect;
    let fourth = x0 >= margin && y1 <= -margin;
    let second = x1 <= -margin && y0 >= margin;
    if !(x0 < x1 && y0 < y1 && (fourth || second)) {
        return Err(Error::BadConstants(format!("rectangle {rect:?} must stay {margin} inside an open quadrant")));
    }
    let m2t = cfg.m2_tilde();
    let scale = medium.k2;
    count_zeros(
        |xi| SpectralPoint::new(medium, m2t, xi).dispersion() / scale,
        &ClosedContour::rectangle(x0, x1, y0, y1),
        ZeroCountOptions { margin: 1e-13, ..Default::default() },
    )
}

/// Taylor coefficients `a_0..a_{n-1}` of the dispersion function in `mu_layer`
/// about `mu_layer = 0`, from the trapezoid rule on a small circle.
pub fn dispersion_taylor(medium: &Medium, m2_tilde: C64, layer: u8, n: usize) -> Vec<C64> {
    let rho = 1e-2 * medium.k1;
    let m = 32;
    let samples: Vec<C64> = (0..m)
        .map(|j| {
            let z = C64::from_polar(rho, 2.0 * PI * j as f64 / m as f64);
            dispersion_in_mu(medium, m2_tilde, layer, z)
        })
        .collect();
    (0..n)
        .map(|p| {
            let s: C64 = samples
                .iter()
                .enumerate()
                .map(|(j, v)| v * C64::from_polar(1.0, -2.0 * PI * (p * j) as f64 / m as f64))
                .sum();
            s / (m as f64 * rho.powi(p as i32))
        })
        .collect()
}

/// The dispersion function as an analytic function of `mu_layer` near 0. The
/// other root is continued from its (real, positive or upper) value at 0.
fn dispersion_in_mu(medium: &Medium, m2_tilde: C64, layer: u8, mu_l: C64) -> C64 {
    let (kl, ko) = if layer == 1 { (medium.k1, medium.k2) } else { (medium.k2, medium.k1) };
    let w = ko * ko - kl * kl + mu_l * mu_l;
    // near mu_l = 0, w stays close to a nonzero real number; pick the root
    // continuous with its value there
    let centre = sqrt_upper(c(ko * ko - kl * kl, 0.0));
    let r = sqrt_principal(w);
    let mu_o = if (r - centre).norm() <= (r + centre).norm() { r } else { -r };
    let mu = if layer == 1 { [mu_l, mu_o] } else { [mu_o, mu_l] };
    SpectralPoint::from_mu(C64::default(), mu, m2_tilde).dispersion()
}

/// `|A'(mu_j)|` at `mu_j = 0` must exceed
/// `2 s m (1 - exp(-2 s m))` with `s = sqrt(k2^2 - k1^2)` and
/// `m = min(M2, sigma_bar2)`.
pub fn branch_derivative_bound(medium: &Medium, m2: f64, sigma_bar2: f64) -> f64 {
    let s = (medium.k2 * medium.k2 - medium.k1 * medium.k1).sqrt();
    let m = m2.min(sigma_bar2);
    2.0 * s * m * (1.0 - (-2.0 * s * m).exp())
}

/// `(1 - e^{-2 a x1})(1 - e^{-2 x2 / a}) - 4 e^{-a x1 - x2 / a} |sin x1 sin x2|`,
/// nonnegative on the closed first quadrant.
pub fn interlace_function(a: f64, x1: f64, x2: f64) -> f64 {
    let p = -(-2.0 * a * x1).exp_m1();
    let q = -(-2.0 * x2 / a).exp_m1();
    p * q - 4.0 * (-a * x1 - x2 / a).exp() * (x1.sin() * x2.sin()).abs()
}

/// Left and right sides of `|(e^{i mu_j z} - 1)/mu_j| <= (4 + 2 s |z|)/|mu1 + mu2|`.
pub fn exponential_kernel_bound(medium: &Medium, xi: C64, z: C64, layer: u8) -> (f64, f64) {
    let pt = SpectralPoint::new(medium, C64::default(), xi);
    let mu = pt.mu[idx(layer)];
    let lhs = if mu.norm() < 1e-300 { z.norm() } else { (((I * mu * z).exp() - 1.0) / mu).norm() };
    let s = (medium.k2 * medium.k2 - medium.k1 * medium.k1).sqrt();
    let rhs = (4.0 + 2.0 * s * z.norm()) / (pt.mu[0] + pt.mu[1]).norm();
    (lhs, rhs)
}

/// Largest admissible path constants for the geometry and medium.
pub fn path_constants(medium: &Medium, cfg: &PmlConfig) -> Result<PathConstants> {
    let (l1, l2) = (2.0 * cfg.profile1.half_physical, 2.0 * cfg.profile2.half_physical);
    let (d1, d2) = (cfg.profile1.thickness, cfg.profile2.thickness);
    let r = cfg.source_radius;
    let (k1, k2) = (medium.k1, medium.k2);
    // t / sqrt(1 - t^2) <= bound  <=>  t <= bound / sqrt(1 + bound^2)
    let solve = |bound: f64, what: &str| -> Result<f64> {
        if bound <= 0.0 {
            return Err(Error::BadConstants(format!("{what}: no positive value satisfies the geometry")));
        }
        Ok((bound / (1.0 + bound * bound).sqrt()).min(0.95))
    };
    let eps0 = solve(l2 / (2.0 * l1), "eps0")?
        .min(((k2 * k2 - k1 * k1) / (k2 * k2 + k1 * k1)).sqrt())
        .min(2.0 * (k2 * k2 - k1 * k1).sqrt() / k1);
    let delta0 = (std::f64::consts::SQRT_2 * k1 * cfg.sigma_bar2() / 4.0).min(0.95);
    let delta1 = solve((l1 / 2.0 - r) / (l2 / 2.0 + r), "delta1")?;
    let delta2 = solve((l1 / 2.0 - r) / l2, "delta2")?.min(solve(d1 / (2.0 * d2), "delta2")?);
    let eps1 = solve((l2 / 2.0 - r) / (l1 / 2.0 + r), "eps1")?;
    Ok(PathConstants { eps0, delta0, delta1, delta2, eps1 })
}

/// How [`verify_lower_bounds`] samples the spectral plane.
#[derive(Debug, Clone, Copy)]
pub struct LowerBoundSampling {
    pub samples: usize,
    pub seed: u64,
    /// Samples are drawn with `|xi|` up to `reach * k2`.
    pub reach: f64,
}

impl Default for LowerBoundSampling {
    fn default() -> Self {
        Self { samples: 10_000, seed: 7, reach: 20.0 }
    }
}

/// Empirical maxima of the ratios bounded by the dispersion function, at the
/// base sample count and at four times that count.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct LowerBoundReport {
    pub names: Vec<&'static str>,
    pub coarse: Vec<f64>,
    pub fine: Vec<f64>,
    pub stable: bool,
}

/// `mu1 mu2 / ((mu1 + mu2) A)`, switching to a Taylor expansion of `A` in
/// `mu_j` where `|mu_j|` is tiny.
pub fn branch_ratio(medium: &Medium, m2_tilde: C64, xi: C64, taylor: &[[C64; 4]; 2]) -> f64 {
    let pt = SpectralPoint::new(medium, m2_tilde, xi);
    for j in 0..2 {
        if pt.mu[j].norm() < 1e-3 * medium.k1 {
            let z = pt.mu[j];
            let a = taylor[j];
            // A / mu_j from the series (a_0 vanishes)
            let a_over = a[1] + z * (a[2] + z * a[3]);
            let other = pt.mu[1 - j];
            return (other / ((pt.mu[0] + pt.mu[1]) * a_over)).norm();
        }
    }
    (pt.mu[0] * pt.mu[1] / ((pt.mu[0] + pt.mu[1]) * pt.dispersion())).norm()
}

/// Samples the closed fourth quadrant (the second follows by evenness) and
/// reports the maxima of `|mu2 (e^{i mu1 z} - 1)/A|`, `|mu1 (e^{i mu2 z} - 1)/A|`,
/// `|mu1 mu2 / ((mu1 + mu2) A)|`, and `|(mu1 + mu2)/A|` (the last only where
/// `|mu_j| >= eps0 k1`).
pub fn verify_lower_bounds(medium: &Medium, cfg: &PmlConfig, sampling: LowerBoundSampling) -> Result<LowerBoundReport> {
    let consts = path_constants(medium, cfg)?;
    let m2t = cfg.m2_tilde();
    let t1 = dispersion_taylor(medium, m2t, 1, 4);
    let t2 = dispersion_taylor(medium, m2t, 2, 4);
    let taylor = [[t1[0], t1[1], t1[2], t1[3]], [t2[0], t2[1], t2[2], t2[3]]];
    let run = |n: usize| -> [f64; 4] {
        let mut best = [0.0f64; 4];
        let mut rng = StdRng::seed_from_u64(sampling.seed);
        let mut next = move || rng.gen::<f64>();
        let lo = (1e-3 * medium.k1).ln();
        let hi = (sampling.reach * medium.k2).ln();
        let zmax = m2t.norm();
        for j in 0..n {
            // a quarter of the samples sit on the real axis, where the
            // branch points and any real roots live
            let xi = if j % 4 == 0 {
                c(next() * 2.0 * medium.k2, 0.0)
            } else {
                let rho = (lo + (hi - lo) * next()).exp();
                C64::from_polar(rho, -FRAC_PI_2 * next())
            };
            let z = C64::from_polar(zmax * next().max(1e-3), FRAC_PI_2 * next());
            let pt = SpectralPoint::new(medium, m2t, xi);
            let a = pt.dispersion();
            let [m1, m2] = pt.mu;
            let r3 = branch_ratio(medium, m2t, xi, &taylor);
            let near = m1.norm() < 1e-3 * medium.k1 || m2.norm() < 1e-3 * medium.k1;
            if !near {
                let r1 = (m2 * ((I * m1 * z).exp() - 1.0) / a).norm();
                let r2 = (m1 * ((I * m2 * z).exp() - 1.0) / a).norm();
                best[0] = best[0].max(r1);
                best[1] = best[1].max(r2);
            }
            best[2] = best[2].max(r3);
            if m1.norm() >= consts.eps0 * medium.k1 && m2.norm() >= consts.eps0 * medium.k1 {
                best[3] = best[3].max(((m1 + m2) / a).norm());
            }
        }
        best
    };
    let coarse = run(sampling.samples).to_vec();
    let fine = run(4 * sampling.samples).to_vec();
    let stable = coarse.iter().zip(&fine).all(|(a, b)| a.is_finite() && b.is_finite() && *b <= 2.0 * a.max(1e-300));
    Ok(LowerBoundReport {
        names: vec!["mu2_exp_mu1", "mu1_exp_mu2", "branch_ratio", "sum_ratio"],
        coarse,
        fine,
        stable,
    })
}
