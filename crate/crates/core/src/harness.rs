//! Source problems solved through Green's representations, the convergence
//! sweeps over the absorbing constant and the rate checks on their results.
//!
//! The sweep measures `u_pml - u = int (G_pml - G) f` directly. For targets and
//! sources inside `B_in` the difference kernel is smooth, and it has a spectral
//! form whose integrand factors into exponentials of the target and source
//! coordinates. [`PmlDifference`] exploits that: per spectral node it forms
//! moments of the source once and then sweeps the probes, so a full probe
//! lattice costs a few seconds.

use crate::contour::{adapted_rule, gauss_legendre, path_ext_pinned, real_half_line, BranchPoint, ContourPath, Node, QuadOptions};
use crate::fdm::{assemble, GridSpec, SourceSpec};
use crate::geometry::{layer_of, validate_assumptions, AssumptionBands, Medium, PmlConfig, PmlProfile, ProblemConfig, Shape};
use crate::green::{green_layered_exact, green_pml_with_ratio, image_series_ratio};
use crate::spectral::SpectralPoint;
use crate::{c, Error, Result, C64, I};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Quadrature node of a source: position and `weight * f(y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SourceNode {
    pub y: [f64; 2],
    pub weight: C64,
}

/// Product rule over the support of `source`, split along the interface.
/// Each half is mapped by `y2 = c2 + R sin(phi)`, `y1 = c1 + R cos(phi) u`,
/// which removes the square-root behaviour of the chords at the poles.
pub fn source_nodes(source: &SourceSpec, order: usize) -> Vec<SourceNode> {
    match source {
        SourceSpec::Point { y, strength } => vec![SourceNode { y: *y, weight: *strength }],
        SourceSpec::Disk { center, radius, .. } => {
            let (gx, gw) = gauss_legendre(order);
            let [c1, c2] = *center;
            let r = *radius;
            let asin = |t: f64| (t / r).clamp(-1.0, 1.0).asin();
            let mut parts = Vec::new();
            if c2 - r < 0.0 && c2 + r > 0.0 {
                parts.push((-0.5 * PI, asin(-c2)));
                parts.push((asin(-c2), 0.5 * PI));
            } else {
                parts.push((-0.5 * PI, 0.5 * PI));
            }
            let mut out = Vec::with_capacity(parts.len() * order * order);
            for (p0, p1) in parts {
                let (hm, hp) = (0.5 * (p1 - p0), 0.5 * (p1 + p0));
                for (&t, &wt) in gx.iter().zip(&gw) {
                    let phi = hp + hm * t;
                    let (s, co) = phi.sin_cos();
                    let y2 = c2 + r * s;
                    for (&u, &wu) in gx.iter().zip(&gw) {
                        let y = [c1 + r * co * u, y2];
                        let w = wt * hm * wu * r * r * co * co;
                        let f = source.density(y);
                        if f != C64::default() {
                            out.push(SourceNode { y, weight: w * f });
                        }
                    }
                }
            }
            out
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    /// `2 cos(xi (x1 - y1))` on the real half-line.
    Direct,
    /// The summed image factor on `+i inf -> 0 -> +inf`.
    Image,
}

/// Vertical kernel as `sum c[s][t] e^{i s mu_x xp} e^{i t mu_y yp}` for
/// `s, t` in `{+, -}` (index 0 is `+`), plus for same-layer image terms the
/// non-separable `e^{i mu |x2 - y2|} / mu` with weight `free`.
#[derive(Debug, Clone, Copy)]
struct Vertical {
    c: [[C64; 2]; 2],
    free: C64,
    mu_x: C64,
    mu_y: C64,
}

fn vertical(pt: &SpectralPoint, lx: u8, ly: u8, kind: Kind) -> Vertical {
    let a = pt.dispersion();
    let co = pt.coefficients();
    let s = pt.mu[0] + pt.mu[1];
    let i = (ly - 1) as usize;
    let o = 1 - i;
    let (mi, mo) = (pt.mu[i], pt.mu[o]);
    let (ei, eo) = (pt.eps[i], pt.eps[o]);
    let mut c = [[C64::default(); 2]; 2];
    let image = kind == Kind::Image;
    if lx == ly {
        c[0][0] = co.b2[i] / (s * mi * a);
        c[1][1] = co.b1[i] * ei * ei / (mi * a) - ei / mi;
        c[0][1] = -co.b1[i] * ei / (mi * a);
        c[1][0] = c[0][1];
        if image {
            c[0][0] += 2.0 / s - 1.0 / mi;
        }
        Vertical { c, free: if image { 1.0 / mi } else { C64::default() }, mu_x: mi, mu_y: mi }
    } else {
        c[0][0] = co.b / (s * a);
        c[1][1] = ei * eo / a;
        c[0][1] = -ei / a;
        c[1][0] = -eo / a;
        if image {
            c[0][0] += 1.0 / s;
        }
        Vertical { c, free: C64::default(), mu_x: mo, mu_y: mi }
    }
}

/// Horizontal factor as `sum h[p][q] e^{i p xi x1} e^{i q xi y1}`.
fn horizontal(xi: C64, m1_tilde: C64, kind: Kind) -> [[C64; 2]; 2] {
    match kind {
        Kind::Direct => [[C64::default(), c(1.0, 0.0)], [c(1.0, 0.0), C64::default()]],
        Kind::Image => {
            let q = (4.0 * I * xi * m1_tilde).exp();
            let den = 1.0 - q;
            let cross = q / den;
            let same = -(2.0 * I * xi * m1_tilde).exp() / den;
            [[same, cross], [cross, same]]
        }
    }
}

fn prefactor(lx: u8, ly: u8) -> C64 {
    if lx == ly {
        I / (4.0 * PI)
    } else {
        I / (2.0 * PI)
    }
}

#[inline]
fn height_plus(x2: f64) -> f64 {
    if layer_of(x2) == 1 {
        x2
    } else {
        -x2
    }
}

/// Batched evaluation of `G_pml(x, y) - G(x, y)` for `x, y` in `B_in`, where
/// `G` is the Green's function of the unbounded two-layer medium.
#[derive(Debug, Clone)]
pub struct PmlDifference {
    pub medium: Medium,
    pub cfg: PmlConfig,
    direct: Vec<(Node, C64)>,
    image: Vec<(Node, C64)>,
}

impl PmlDifference {
    /// Builds fixed spectral rules that resolve the difference kernel for a
    /// spread of target/source pairs across `B_in` to relative accuracy `tol`.
    pub fn new(medium: &Medium, cfg: &PmlConfig, tol: f64) -> Result<Self> {
        let (h1, h2) = (cfg.profile1.half_physical, cfg.profile2.half_physical);
        let pts = |a: f64, b: f64| [a * h1, b * h2];
        let pairs: [([f64; 2], [f64; 2]); 16] = [
            (pts(1.0, 1.0), pts(-1.0, 1.0)),
            (pts(1.0, 1.0), pts(1.0, 1.0)),
            (pts(-1.0, -1.0), pts(1.0, -1.0)),
            (pts(1.0, 1.0), pts(-1.0, -1.0)),
            (pts(0.0, 1.0), pts(0.0, -1.0)),
            (pts(0.0, 0.0), pts(0.0, 0.0)),
            (pts(1.0, 0.0), pts(-1.0, 0.0)),
            (pts(0.0, 1.0), pts(0.0, 0.0)),
            (pts(0.0, -1.0), pts(0.0, -1.0)),
            (pts(1.0, 1.0), pts(1.0, 0.0)),
            (pts(-1.0, -1.0), pts(-1.0, 1.0)),
            (pts(0.5, 0.3), pts(-0.2, 0.6)),
            (pts(0.5, -0.3), pts(-0.2, 0.6)),
            (pts(0.0, 0.0), pts(0.0, -1.0)),
            (pts(1.0, -1.0), pts(1.0, -1.0)),
            (pts(-1.0, 1.0), pts(1.0, -1.0)),
        ];
        let branch = [BranchPoint { layer: 1, k: medium.k1 }, BranchPoint { layer: 2, k: medium.k2 }];
        let (d1, d2) = (cfg.profile1.thickness, cfg.profile2.thickness);
        let decay = 0.5 * [2.0 * cfg.sigma_bar1(), 2.0 * d1, d2, 2.0 * cfg.sigma_bar2()].into_iter().fold(f64::INFINITY, f64::min);
        let decay = decay.max(0.05);
        let opts = QuadOptions::new(tol).with_abs(1e-3 * tol);
        let m2t = cfg.m2_tilde();
        let m1t = cfg.m1_tilde();
        let build = |kind: Kind, path: &ContourPath| -> Result<Vec<(Node, C64)>> {
            let kernel = |n: &Node| {
                let pt = SpectralPoint::at_node(medium, m2t, n);
                let mut out = [C64::default(); 16];
                for (k, (x, y)) in pairs.iter().enumerate() {
                    out[k] = pair_integrand(&pt, m1t, kind, *x, *y);
                }
                out
            };
            let rule = adapted_rule(kernel, path, opts)?;
            // drop nodes whose contribution is negligible for every pair: they
            // sit far out on the tails where the separable factors overflow
            let contrib: Vec<f64> = rule
                .iter()
                .map(|(n, w)| {
                    let pt = SpectralPoint::at_node(medium, m2t, n);
                    pairs.iter().map(|(x, y)| (pair_integrand(&pt, m1t, kind, *x, *y) * w).norm()).fold(0.0, f64::max)
                })
                .collect();
            let total = contrib.iter().copied().fold(0.0, f64::max);
            Ok(rule
                .into_iter()
                .zip(contrib)
                .filter(|(_, c)| c.is_finite() && *c > 1e-18 * total)
                .map(|(r, _)| r)
                .collect())
        };
        let real = real_half_line(0.0, &branch, decay);
        let direct = build(Kind::Direct, &ContourPath::new("real", real))?;
        let image = build(Kind::Image, &path_ext_pinned(&branch, decay))?;
        Ok(Self { medium: *medium, cfg: *cfg, direct, image })
    }

    /// Number of spectral nodes in the two rules.
    pub fn rule_sizes(&self) -> (usize, usize) {
        (self.direct.len(), self.image.len())
    }

    fn check_inner(&self, p: [f64; 2]) -> Result<()> {
        let half = [self.cfg.profile1.half_physical, self.cfg.profile2.half_physical];
        for a in 0..2 {
            if p[a].abs() > half[a] * (1.0 + 1e-12) {
                return Err(Error::OutOfDomain { value: p[a], limit: half[a] });
            }
        }
        Ok(())
    }

    /// `G_pml(x, y) - G(x, y)` for a single pair, evaluated without
    /// separation (reference for [`PmlDifference::apply`]).
    pub fn pair(&self, x: [f64; 2], y: [f64; 2]) -> Result<C64> {
        self.check_inner(x)?;
        self.check_inner(y)?;
        let m2t = self.cfg.m2_tilde();
        let m1t = self.cfg.m1_tilde();
        let mut acc = C64::default();
        for (rule, kind) in [(&self.direct, Kind::Direct), (&self.image, Kind::Image)] {
            for (n, w) in rule {
                let pt = SpectralPoint::at_node(&self.medium, m2t, n);
                acc += w * pair_integrand(&pt, m1t, kind, x, y);
            }
        }
        Ok(acc)
    }

    /// `sum_y weight(y) (G_pml - G)(x, y)` at every probe `x`.
    pub fn apply(&self, sources: &[SourceNode], probes: &[[f64; 2]]) -> Result<Vec<C64>> {
        for s in sources {
            self.check_inner(s.y)?;
        }
        for p in probes {
            self.check_inner(*p)?;
        }
        // sources by layer, sorted by height for the |x2 - y2| term
        let mut by_layer: [Vec<SourceNode>; 2] = [Vec::new(), Vec::new()];
        for s in sources {
            by_layer[(layer_of(s.y[1]) - 1) as usize].push(*s);
        }
        for v in &mut by_layer {
            v.sort_by(|a, b| a.y[1].total_cmp(&b.y[1]));
        }
        let split: Vec<[usize; 2]> = probes
            .iter()
            .map(|p| {
                let f = |j: usize| by_layer[j].partition_point(|s| s.y[1] < p[1]);
                [f(0), f(1)]
            })
            .collect();
        let m2t = self.cfg.m2_tilde();
        let m1t = self.cfg.m1_tilde();
        let mut out = vec![C64::default(); probes.len()];
        let mut below: [Vec<[C64; 2]>; 2] = [Vec::new(), Vec::new()];
        let mut above: [Vec<[C64; 2]>; 2] = [Vec::new(), Vec::new()];
        for (rule, kind) in [(&self.direct, Kind::Direct), (&self.image, Kind::Image)] {
            for (node, w) in rule {
                let pt = SpectralPoint::at_node(&self.medium, m2t, node);
                let xi = pt.xi;
                let h = horizontal(xi, m1t, kind);
                // moments[j][t][q] = sum weight e^{i t mu_j yp} e^{i q xi y1}
                let mut moments = [[[C64::default(); 2]; 2]; 2];
                for j in 0..2 {
                    let mu = pt.mu[j];
                    let src = &by_layer[j];
                    let n = src.len();
                    below[j].clear();
                    above[j].clear();
                    below[j].resize(n + 1, [C64::default(); 2]);
                    above[j].resize(n + 1, [C64::default(); 2]);
                    for (k, s) in src.iter().enumerate() {
                        let ey = (I * mu * height_plus(s.y[1])).exp();
                        let ex = (I * xi * s.y[0]).exp();
                        let (eyi, exi) = (1.0 / ey, 1.0 / ex);
                        let m = &mut moments[j];
                        m[0][0] += s.weight * ey * ex;
                        m[0][1] += s.weight * ey * exi;
                        m[1][0] += s.weight * eyi * ex;
                        m[1][1] += s.weight * eyi * exi;
                        // e^{-i mu y2} below the target, e^{+i mu y2} above it
                        let e2 = (I * mu * s.y[1]).exp();
                        let lo = s.weight / e2;
                        below[j][k + 1] = [below[j][k][0] + lo * ex, below[j][k][1] + lo * exi];
                    }
                    for (k, s) in src.iter().enumerate().rev() {
                        let e2 = (I * mu * s.y[1]).exp();
                        let ex = (I * xi * s.y[0]).exp();
                        let hi = s.weight * e2;
                        above[j][k] = [above[j][k + 1][0] + hi * ex, above[j][k + 1][1] + hi / ex];
                    }
                }
                // t_sum[lx][j][s][p] = sum_{t,q} c[s][t] h[p][q] moments[j][t][q]
                let mut t_sum = [[[[C64::default(); 2]; 2]; 2]; 2];
                let mut verts = [[None; 2]; 2];
                for lx in 0..2 {
                    for j in 0..2 {
                        if by_layer[j].is_empty() {
                            continue;
                        }
                        let v = vertical(&pt, lx as u8 + 1, j as u8 + 1, kind);
                        let scale = w * prefactor(lx as u8 + 1, j as u8 + 1);
                        for s in 0..2 {
                            for p in 0..2 {
                                let mut acc = C64::default();
                                for t in 0..2 {
                                    for q in 0..2 {
                                        acc += v.c[s][t] * h[p][q] * moments[j][t][q];
                                    }
                                }
                                t_sum[lx][j][s][p] = scale * acc;
                            }
                        }
                        verts[lx][j] = Some(v);
                    }
                }
                for (pi, x) in probes.iter().enumerate() {
                    let lx = (layer_of(x[1]) - 1) as usize;
                    let ex = (I * xi * x[0]).exp();
                    let hx = [ex, 1.0 / ex];
                    let mut acc = C64::default();
                    for j in 0..2 {
                        let Some(v) = verts[lx][j] else { continue };
                        let e = (I * v.mu_x * height_plus(x[1])).exp();
                        let xs = [e, 1.0 / e];
                        let t = &t_sum[lx][j];
                        acc += xs[0] * (hx[0] * t[0][0] + hx[1] * t[0][1]) + xs[1] * (hx[0] * t[1][0] + hx[1] * t[1][1]);
                        if v.free != C64::default() {
                            let e2 = (I * v.mu_x * x[1]).exp();
                            let k = split[pi][j];
                            let (lo, hi) = (below[j][k], above[j][k]);
                            let mut f = C64::default();
                            for p in 0..2 {
                                for q in 0..2 {
                                    f += h[p][q] * hx[p] * (e2 * lo[q] + hi[q] / e2);
                                }
                            }
                            acc += w * prefactor(lx as u8 + 1, j as u8 + 1) * v.free * f;
                        }
                    }
                    out[pi] += acc;
                }
            }
        }
        if out.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Quadrature("non-finite value from the separable sums".into()));
        }
        Ok(out)
    }
}

/// Full difference integrand (prefactor included) for one pair at one node.
fn pair_integrand(pt: &SpectralPoint, m1_tilde: C64, kind: Kind, x: [f64; 2], y: [f64; 2]) -> C64 {
    let (lx, ly) = (layer_of(x[1]), layer_of(y[1]));
    let v = vertical(pt, lx, ly, kind);
    let (xp, yp) = (height_plus(x[1]), height_plus(y[1]));
    let ex = [(I * v.mu_x * xp).exp(), (-I * v.mu_x * xp).exp()];
    let ey = [(I * v.mu_y * yp).exp(), (-I * v.mu_y * yp).exp()];
    let mut k = C64::default();
    for s in 0..2 {
        for t in 0..2 {
            k += v.c[s][t] * ex[s] * ey[t];
        }
    }
    k += v.free * (I * v.mu_x * (x[1] - y[1]).abs()).exp();
    let xi = pt.xi;
    let hor = match kind {
        Kind::Direct => 2.0 * (xi * (x[0] - y[0])).cos(),
        Kind::Image => {
            let q = (4.0 * I * xi * m1_tilde).exp();
            (2.0 * q * (xi * (x[0] - y[0])).cos() - 2.0 * (2.0 * I * xi * m1_tilde).exp() * (xi * (x[0] + y[0])).cos()) / (1.0 - q)
        }
    };
    prefactor(lx, ly) * hor * k
}

/// Uniform `n x n` lattice over `B_in`, row-major in `x1`.
pub fn inner_lattice(cfg: &PmlConfig, n: usize) -> Vec<[f64; 2]> {
    let (h1, h2) = (cfg.profile1.half_physical, cfg.profile2.half_physical);
    let step = |h: f64, i: usize| -h + 2.0 * h * i as f64 / (n - 1) as f64;
    let mut out = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            out.push([step(h1, i), step(h2, j)]);
        }
    }
    out
}

/// Trapezoid `L2` norm and `H1` seminorm of lattice values over `B_in`.
/// Gradients are central differences (one-sided on the edges); the `H1` sum
/// skips lattice points inside `exclude = (center, radius)`.
pub fn lattice_norms(cfg: &PmlConfig, n: usize, values: &[C64], exclude: Option<([f64; 2], f64)>) -> (f64, f64) {
    let (h1, h2) = (cfg.profile1.half_physical, cfg.profile2.half_physical);
    let (s1, s2) = (2.0 * h1 / (n - 1) as f64, 2.0 * h2 / (n - 1) as f64);
    let trap = |i: usize| if i == 0 || i + 1 == n { 0.5 } else { 1.0 };
    let at = |i: usize, j: usize| values[j * n + i];
    let diff = |i: usize, j: usize, axis: usize| -> C64 {
        let (len, step) = if axis == 0 { (i, s1) } else { (j, s2) };
        let get = |k: usize| if axis == 0 { at(k, j) } else { at(i, k) };
        if len == 0 {
            (get(1) - get(0)) / step
        } else if len + 1 == n {
            (get(len) - get(len - 1)) / step
        } else {
            (get(len + 1) - get(len - 1)) / (2.0 * step)
        }
    };
    let (mut l2, mut hh) = (0.0, 0.0);
    for j in 0..n {
        for i in 0..n {
            let w = trap(i) * trap(j) * s1 * s2;
            l2 += w * at(i, j).norm_sqr();
            let x = [-h1 + i as f64 * s1, -h2 + j as f64 * s2];
            if let Some((c0, r)) = exclude {
                if (x[0] - c0[0]).hypot(x[1] - c0[1]) < r {
                    continue;
                }
            }
            hh += w * (diff(i, j, 0).norm_sqr() + diff(i, j, 1).norm_sqr());
        }
    }
    (l2.sqrt(), hh.sqrt())
}

/// `int G(x, y) f(y) dy` at `x` for a Green's function with a logarithmic
/// singularity at `y = x`. Targets inside the support use a polar rule about
/// `x` (radial variable squared near the singularity, rays split where they
/// cross the interface); the order doubles until two levels agree to `tol`.
fn representation_integral<G>(green: &mut G, source: &SourceSpec, x: [f64; 2], tol: f64) -> Result<C64>
where
    G: FnMut([f64; 2], [f64; 2]) -> Result<C64>,
{
    let (center, radius) = match source {
        SourceSpec::Point { y, strength } => return Ok(strength * green(x, *y)?),
        SourceSpec::Disk { center, radius, .. } => (*center, *radius),
    };
    let inside = (x[0] - center[0]).hypot(x[1] - center[1]) < radius;
    let mut prev: Option<C64> = None;
    let mut gap = f64::INFINITY;
    for order in [8usize, 16, 32, 64] {
        let value = if inside {
            polar_integral(green, source, center, radius, x, order)?
        } else {
            let mut acc = C64::default();
            for s in source_nodes(source, 2 * order) {
                acc += s.weight * green(x, s.y)?;
            }
            acc
        };
        if let Some(p) = prev {
            gap = (value - p).norm() / value.norm().max(1e-300);
            if gap <= tol {
                return Ok(value);
            }
        }
        prev = Some(value);
    }
    Err(Error::Quadrature(format!("successive orders still differ by {gap:e} (relative)")))
}

fn polar_integral<G>(green: &mut G, source: &SourceSpec, center: [f64; 2], radius: f64, x: [f64; 2], order: usize) -> Result<C64>
where
    G: FnMut([f64; 2], [f64; 2]) -> Result<C64>,
{
    let (gx, gw) = gauss_legendre(order);
    let mut breaks = vec![0.0, PI, 2.0 * PI];
    let h2 = radius * radius - center[1] * center[1];
    if h2 > 0.0 {
        for e in [center[0] - h2.sqrt(), center[0] + h2.sqrt()] {
            let t = (-x[1]).atan2(e - x[0]).rem_euclid(2.0 * PI);
            breaks.push(t);
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let mut acc = C64::default();
    for win in breaks.windows(2) {
        let (t0, t1) = (win[0], win[1]);
        if t1 - t0 < 1e-14 {
            continue;
        }
        for (&gt, &wt) in gx.iter().zip(&gw) {
            let th = 0.5 * (t0 + t1) + 0.5 * (t1 - t0) * gt;
            let wth = 0.5 * (t1 - t0) * wt;
            let u = [th.cos(), th.sin()];
            // ray exit through the circle
            let d = [x[0] - center[0], x[1] - center[1]];
            let b = u[0] * d[0] + u[1] * d[1];
            let cc = d[0] * d[0] + d[1] * d[1] - radius * radius;
            let r1 = -b + (b * b - cc).max(0.0).sqrt();
            let mut cuts = vec![0.0];
            if u[1].abs() > 1e-14 {
                let ri = -x[1] / u[1];
                if ri > 1e-14 && ri < r1 {
                    cuts.push(ri);
                }
            }
            cuts.push(r1);
            for (k, seg) in cuts.windows(2).enumerate() {
                let (ra, rb) = (seg[0], seg[1]);
                for (&gr, &wr) in gx.iter().zip(&gw) {
                    let s = 0.5 * (gr + 1.0);
                    // squared substitution on the segment touching the target
                    let (r, jac) = if k == 0 { (rb * s * s, rb * 2.0 * s * 0.5 * wr) } else { (ra + (rb - ra) * s, 0.5 * (rb - ra) * wr) };
                    if r <= 0.0 {
                        continue;
                    }
                    let y = [x[0] + r * u[0], x[1] + r * u[1]];
                    let f = source.density(y);
                    if f == C64::default() {
                        continue;
                    }
                    acc += wth * jac * r * f * green(x, y)?;
                }
            }
        }
    }
    Ok(acc)
}

/// `u(x) = int G(x, y) f(y) dy` at each probe, with `G` the unbounded
/// two-layer Green's function.
pub fn solve_source_exact(medium: &Medium, source: &SourceSpec, probes: &[[f64; 2]], tol: f64) -> Result<Vec<C64>> {
    let gtol = 0.1 * tol;
    let mut g = |x: [f64; 2], y: [f64; 2]| green_layered_exact(medium, x, y, gtol).map(|v| v.value);
    probes.iter().map(|x| representation_integral(&mut g, source, *x, tol)).collect()
}

/// `u_pml(x) = int G_pml(x, y) f(y) dy` at each probe.
pub fn solve_source_pml(medium: &Medium, cfg: &PmlConfig, source: &SourceSpec, probes: &[[f64; 2]], tol: f64) -> Result<Vec<C64>> {
    let rho = image_series_ratio(medium, cfg);
    let gtol = 0.1 * tol;
    let mut g = |x: [f64; 2], y: [f64; 2]| green_pml_with_ratio(medium, cfg, x, y, gtol, rho).map(|s| s.total.value);
    probes.iter().map(|x| representation_integral(&mut g, source, *x, tol)).collect()
}

/// Quantity varied by a sweep. Lengths apply to both axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    /// Absorbing constant `sigma_bar` of both layers.
    SigmaBar,
    /// Layer thickness `d`.
    D,
    /// Side `L` of `B_in`.
    L,
    /// Nodes per side of the finite-difference grid.
    NGrid,
}

impl std::str::FromStr for SweepParameter {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigma_bar" => Ok(Self::SigmaBar),
            "d" => Ok(Self::D),
            "L" => Ok(Self::L),
            "n_grid" => Ok(Self::NGrid),
            _ => Err(Error::InvalidConfig(format!("unknown sweep parameter {s:?}"))),
        }
    }
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            Self::SigmaBar => "sigma_bar",
            Self::D => "d",
            Self::L => "L",
            Self::NGrid => "n_grid",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    pub medium: Medium,
    /// Geometry and profile shape; the swept quantity overrides its field.
    pub cfg: PmlConfig,
    pub source: SourceSpec,
    /// Points per side of the probe lattice over `B_in`.
    pub lattice: usize,
    /// Order of the source rule per half of the support.
    pub source_order: usize,
    /// Relative accuracy of the spectral rules.
    pub tol: f64,
}

impl SweepSpec {
    /// The default sweep: `k1 = 1, k2 = 2, L = 4, d = 1`, quadratic profile,
    /// smooth bump of radius 1 at the origin, 41 x 41 probe lattice.
    pub fn sigma_bar(values: Vec<f64>, half_width: f64) -> Result<Self> {
        let medium = Medium::new(1.0, 2.0)?;
        let cfg = PmlConfig::symmetric(half_width, 1.0, Shape::Power2, 1.0, 1.0)?;
        Ok(Self {
            parameter: SweepParameter::SigmaBar,
            values,
            medium,
            cfg,
            source: SourceSpec::bump([0.0, 0.0], 1.0),
            lattice: 41,
            source_order: 16,
            tol: 1e-9,
        })
    }

    fn validate(&self) -> Result<()> {
        if self.values.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidConfig("sweep values must be strictly increasing".into()));
        }
        if self.values.is_empty() {
            return Err(Error::InsufficientData(0));
        }
        if self.lattice < 3 {
            return Err(Error::InvalidConfig(format!("probe lattice {} is too coarse", self.lattice)));
        }
        Ok(())
    }

    /// Configuration of one row.
    pub fn config_at(&self, value: f64) -> Result<PmlConfig> {
        let rebuild = |p: &PmlProfile, half: f64, d: f64, sigma_bar: f64| PmlProfile::with_sigma_bar(half, d, p.shape, sigma_bar);
        let (p1, p2) = (&self.cfg.profile1, &self.cfg.profile2);
        let (q1, q2) = match self.parameter {
            SweepParameter::SigmaBar => (
                rebuild(p1, p1.half_physical, p1.thickness, value)?,
                rebuild(p2, p2.half_physical, p2.thickness, value)?,
            ),
            SweepParameter::D => (
                rebuild(p1, p1.half_physical, value, p1.sigma_bar())?,
                rebuild(p2, p2.half_physical, value, p2.sigma_bar())?,
            ),
            SweepParameter::L => (
                rebuild(p1, 0.5 * value, p1.thickness, p1.sigma_bar())?,
                rebuild(p2, 0.5 * value, p2.thickness, p2.sigma_bar())?,
            ),
            SweepParameter::NGrid => (*p1, *p2),
        };
        PmlConfig::new(q1, q2, self.cfg.source_radius)
    }
}

/// Least-squares line through `(parameter, ln error)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    /// Decay rate per unit of the parameter (per unit of `k1 sigma_bar` for
    /// absorbing-constant sweeps).
    pub gamma: f64,
    pub intercept: f64,
    pub r2: f64,
    pub rows_used: usize,
}

/// Fits `ln err = intercept - gamma * t` over the rows with
/// `err > 100 eps`.
pub fn fit_rate(t: &[f64], err: &[f64]) -> Result<RateFit> {
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(err)
        .filter(|(_, e)| e.is_finite() && **e > 100.0 * f64::EPSILON)
        .map(|(t, e)| (*t, e.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::InsufficientData(pts.len()));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt = pts.iter().map(|p| (p.0 - mt).powi(2)).sum::<f64>();
    let sty = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum::<f64>();
    let syy = pts.iter().map(|p| (p.1 - my).powi(2)).sum::<f64>();
    let slope = sty / stt;
    let r2 = if syy > 0.0 { sty * sty / (stt * syy) } else { 1.0 };
    Ok(RateFit { gamma: -slope, intercept: my - slope * mt, r2, rows_used: pts.len() })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorRow {
    pub parameter_value: f64,
    pub l2_err: f64,
    pub h1_err: f64,
    pub max_err: f64,
    /// Rate and quality of the `L2` fit over the whole sweep.
    pub gamma_fit: f64,
    pub fit_r2: f64,
    pub assumptions_ok: bool,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorReport {
    pub parameter: SweepParameter,
    pub rows: Vec<ErrorRow>,
    pub fit_l2: Option<RateFit>,
    pub fit_h1: Option<RateFit>,
    /// Seconds per row.
    pub timings: Vec<f64>,
}

impl ErrorReport {
    fn abscissae(&self, k1: f64) -> Vec<f64> {
        let scale = if self.parameter == SweepParameter::SigmaBar { k1 } else { 1.0 };
        self.rows.iter().map(|r| r.parameter_value * scale).collect()
    }

    fn usable(&self) -> usize {
        self.rows.iter().filter(|r| r.failure.is_none() && r.l2_err > 100.0 * f64::EPSILON).count()
    }

    /// CSV text with header `parameter,l2_err,h1_err,max_err`.
    pub fn to_csv(&self) -> String {
        let mut s = format!("{},l2_err,h1_err,max_err\n", self.parameter.name());
        for r in &self.rows {
            s.push_str(&format!("{},{:e},{:e},{:e}\n", r.parameter_value, r.l2_err, r.h1_err, r.max_err));
        }
        s
    }

    /// Gnuplot script drawing the errors on a log scale from `csv_name`.
    pub fn gnuplot_script(&self, csv_name: &str, png_name: &str) -> String {
        let xlabel = self.parameter.name();
        format!(
            "set datafile separator ','\nset terminal pngcairo size 800,600\nset output '{png_name}'\n\
             set logscale y\nset xlabel '{xlabel}'\nset ylabel 'error on B_in'\nset key top right\n\
             plot '{csv_name}' using 1:2 skip 1 with linespoints title 'L2', \\\n     \
             '{csv_name}' using 1:3 skip 1 with linespoints title 'H1', \\\n     \
             '{csv_name}' using 1:4 skip 1 with linespoints title 'max'\n"
        )
    }
}

/// Runs a sweep. Rows that fail are recorded with their error and the sweep
/// continues.
pub fn convergence_sweep(spec: &SweepSpec) -> Result<ErrorReport> {
    spec.validate()?;
    if spec.parameter == SweepParameter::NGrid {
        return grid_sweep(spec);
    }
    let sources = source_nodes(&spec.source, spec.source_order);
    let mut rows = Vec::new();
    let mut timings = Vec::new();
    for &value in &spec.values {
        let start = std::time::Instant::now();
        let row = (|| -> Result<ErrorRow> {
            let cfg = spec.config_at(value)?;
            spec.source.check_support(&cfg, 0.0)?;
            let ok = validate_assumptions(&spec.medium, &cfg, AssumptionBands::default()).all_passed();
            let probes = inner_lattice(&cfg, spec.lattice);
            let diff = PmlDifference::new(&spec.medium, &cfg, spec.tol)?;
            let values = diff.apply(&sources, &probes)?;
            let exclude = support_disk(&spec.source).map(|(c0, r)| (c0, r + 0.1 / spec.medium.k1));
            let (l2, h1) = lattice_norms(&cfg, spec.lattice, &values, exclude);
            let max = values.iter().map(|z| z.norm()).fold(0.0, f64::max);
            Ok(ErrorRow {
                parameter_value: value,
                l2_err: l2,
                h1_err: h1,
                max_err: max,
                gamma_fit: f64::NAN,
                fit_r2: f64::NAN,
                assumptions_ok: ok,
                failure: None,
            })
        })()
        .unwrap_or_else(|e| failed_row(value, e));
        rows.push(row);
        timings.push(start.elapsed().as_secs_f64());
    }
    Ok(finish_report(spec.parameter, spec.medium.k1, rows, timings))
}

fn support_disk(source: &SourceSpec) -> Option<([f64; 2], f64)> {
    match source {
        SourceSpec::Disk { center, radius, .. } => Some((*center, *radius)),
        SourceSpec::Point { y, .. } => Some((*y, 0.0)),
    }
}

fn failed_row(value: f64, e: Error) -> ErrorRow {
    ErrorRow {
        parameter_value: value,
        l2_err: f64::NAN,
        h1_err: f64::NAN,
        max_err: f64::NAN,
        gamma_fit: f64::NAN,
        fit_r2: f64::NAN,
        assumptions_ok: false,
        failure: Some(e.to_string()),
    }
}

fn finish_report(parameter: SweepParameter, k1: f64, mut rows: Vec<ErrorRow>, timings: Vec<f64>) -> ErrorReport {
    let mut report = ErrorReport { parameter, rows: Vec::new(), fit_l2: None, fit_h1: None, timings };
    std::mem::swap(&mut report.rows, &mut rows);
    let t = report.abscissae(k1);
    let l2: Vec<f64> = report.rows.iter().map(|r| r.l2_err).collect();
    let h1: Vec<f64> = report.rows.iter().map(|r| r.h1_err).collect();
    report.fit_l2 = fit_rate(&t, &l2).ok();
    report.fit_h1 = fit_rate(&t, &h1).ok();
    if let Some(f) = report.fit_l2 {
        for r in &mut report.rows {
            r.gamma_fit = f.gamma;
            r.fit_r2 = f.r2;
        }
    }
    report
}

/// Grid-refinement sweep of the finite-difference solver for a point source,
/// measured against `G_pml` on a probe lattice over `B_in` that avoids the
/// source. Lattice points are snapped to the nearest node, so the lattice
/// should be a subset of every grid. `l2_err` is the lattice RMS times
/// `|B_in|^{1/2}`; no `H1` value is formed (reported as NaN).
fn grid_sweep(spec: &SweepSpec) -> Result<ErrorReport> {
    let (y, strength) = match &spec.source {
        SourceSpec::Point { y, strength } => (*y, *strength),
        SourceSpec::Disk { .. } => {
            return Err(Error::InvalidConfig("grid sweeps take a point source".into()));
        }
    };
    let cfg = spec.cfg;
    let rho = image_series_ratio(&spec.medium, &cfg);
    let probes: Vec<[f64; 2]> = inner_lattice(&cfg, spec.lattice)
        .into_iter()
        .filter(|p| (p[0] - y[0]).hypot(p[1] - y[1]) > 0.25 * cfg.profile1.half_physical)
        .collect();
    let reference: Vec<C64> = probes
        .iter()
        .map(|p| green_pml_with_ratio(&spec.medium, &cfg, *p, y, spec.tol, rho).map(|s| strength * s.total.value))
        .collect::<Result<_>>()?;
    let area = 4.0 * cfg.profile1.half_physical * cfg.profile2.half_physical;
    let mut rows = Vec::new();
    let mut timings = Vec::new();
    for &value in &spec.values {
        let start = std::time::Instant::now();
        let n = value.round() as usize;
        let row = (|| -> Result<ErrorRow> {
            let mut sys = assemble(&spec.medium, &cfg, GridSpec { nx: n, ny: n })?;
            let (u, _) = sys.solve(&spec.source)?;
            let mut sq = 0.0;
            let mut max = 0.0f64;
            for (p, r) in probes.iter().zip(&reference) {
                let (i, j) = u.nearest(*p);
                let e = (u.value(i, j) - r).norm();
                sq += e * e;
                max = max.max(e);
            }
            let rms = (sq / probes.len() as f64).sqrt();
            Ok(ErrorRow {
                parameter_value: value,
                l2_err: rms * area.sqrt(),
                h1_err: f64::NAN,
                max_err: max,
                gamma_fit: f64::NAN,
                fit_r2: f64::NAN,
                assumptions_ok: true,
                failure: None,
            })
        })()
        .unwrap_or_else(|e| failed_row(value, e));
        rows.push(row);
        timings.push(start.elapsed().as_secs_f64());
    }
    Ok(finish_report(spec.parameter, spec.medium.k1, rows, timings))
}

/// Outcome of comparing the fitted rates of two sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateVerdict {
    pub gamma_a: f64,
    pub gamma_b: f64,
    /// `|gamma_a - gamma_b| / max(gamma_a, gamma_b)`.
    pub relative_gap: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Checks that two sweeps (differing only in the box size, or in `k1` with the
/// absorbing constant rescaled) fit the same `L2` decay rate within 25%.
pub fn rate_consistency(a: &ErrorReport, b: &ErrorReport) -> Result<RateVerdict> {
    for r in [a, b] {
        let n = r.usable();
        if n < 3 {
            return Err(Error::InsufficientData(n));
        }
    }
    let (fa, fb) = match (a.fit_l2, b.fit_l2) {
        (Some(x), Some(y)) => (x, y),
        _ => return Err(Error::InsufficientData(0)),
    };
    let top = fa.gamma.max(fb.gamma);
    let gap = (fa.gamma - fb.gamma).abs() / top;
    let threshold = 0.25;
    Ok(RateVerdict { gamma_a: fa.gamma, gamma_b: fb.gamma, relative_gap: gap, threshold, pass: top > 0.0 && gap <= threshold })
}

/// Builds the medium and configuration of a flat JSON problem description.
pub fn build_problem(p: &ProblemConfig) -> Result<(Medium, PmlConfig)> {
    p.build()
}

/// One entry of [`selftest`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelfCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Quick invariant suite on the default geometry (`k1 = 1, k2 = 2, L = 4,
/// d = 1, sigma_bar = 2`): branch conventions, dispersion roots and
/// root-freeness, boundary traces, reciprocity of both Green's functions,
/// the finite-difference solver and the difference engine.
pub fn selftest() -> Vec<SelfCheck> {
    let mut out = Vec::new();
    let mut push = |name: &'static str, r: Result<(bool, String)>| {
        let (passed, detail) = r.unwrap_or_else(|e| (false, e.to_string()));
        out.push(SelfCheck { name, passed, detail });
    };
    let medium = Medium::new(1.0, 2.0).expect("valid medium");
    let cfg = PmlConfig::symmetric(2.0, 1.0, Shape::Power2, 2.0, 1.0).expect("valid config");

    push("sqrt_upper_branch", {
        let z = crate::special::sqrt_upper(c(-4.0, -1e-30));
        Ok((z.im >= 0.0 && (z * z - c(-4.0, 0.0)).norm() < 1e-12, format!("{z}")))
    });
    push("dispersion_roots", {
        let m2t = cfg.m2_tilde();
        let worst = [medium.k1, -medium.k1, medium.k2, -medium.k2]
            .into_iter()
            .map(|k| {
                let pt = SpectralPoint::new(&medium, m2t, c(k, 0.0));
                pt.dispersion().norm() / (medium.k2 + pt.mu[0].norm() + pt.mu[1].norm())
            })
            .fold(0.0, f64::max);
        Ok((worst <= 1e-10, format!("max scaled |A| = {worst:e}")))
    });
    push("root_free_rectangle", {
        crate::spectral::eigen_freeness(&medium, &cfg, [0.2, 1.8, -1.5, -0.1], 1e-9).map(|n| (n == 0, format!("{n} zeros")))
    });
    push("boundary_trace", (|| {
        let m = cfg.m1();
        let g = crate::green::green_pml(&medium, &cfg, [m, 0.5], [0.3, 0.4], 1e-8)?.value;
        let inner = crate::green::green_pml(&medium, &cfg, [1.0, 0.5], [0.3, 0.4], 1e-8)?.value;
        Ok((g.norm() <= 1e-6 * inner.norm().max(1.0), format!("|G| = {:e} on the wall", g.norm())))
    })());
    push("green_reciprocity", (|| {
        let (x, y) = ([0.7, 0.4], [-0.5, -0.9]);
        let a = crate::green::green_pml(&medium, &cfg, x, y, 1e-9)?.value;
        let b = crate::green::green_pml(&medium, &cfg, y, x, 1e-9)?.value;
        let rel = (a - b).norm() / a.norm();
        Ok((rel <= 1e-7, format!("relative gap {rel:e}")))
    })());
    push("fd_reciprocity", (|| {
        let mut sys = assemble(&medium, &cfg, GridSpec { nx: 41, ny: 41 })?;
        let (p, q) = ([0.6, 0.3], [-0.9, -0.6]);
        let (u, _) = sys.solve(&SourceSpec::point(p))?;
        let (v, _) = sys.solve(&SourceSpec::point(q))?;
        let (a, b) = (u.value(u.nearest(q).0, u.nearest(q).1), v.value(v.nearest(p).0, v.nearest(p).1));
        let rel = (a - b).norm() / a.norm();
        Ok((rel <= 1e-10, format!("relative gap {rel:e}")))
    })());
    push("difference_engine", (|| {
        let diff = PmlDifference::new(&medium, &cfg, 1e-9)?;
        let (x, y) = ([1.2, 0.8], [-0.4, 0.5]);
        let d = diff.pair(x, y)?;
        let g = crate::green::green_pml(&medium, &cfg, x, y, 1e-10)?.value - green_layered_exact(&medium, x, y, 1e-10)?.value;
        let rel = (d - g).norm() / g.norm();
        Ok((rel <= 1e-6, format!("relative gap {rel:e}")))
    })());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_norm_of_constant() {
        let cfg = PmlConfig::symmetric(2.0, 1.0, Shape::Power2, 1.0, 1.0).unwrap();
        let v = vec![c(0.5, 0.0); 41 * 41];
        let (l2, h1) = lattice_norms(&cfg, 41, &v, None);
        assert!((l2 - 0.5 * 4.0).abs() < 1e-12);
        assert!(h1 < 1e-14);
    }

    #[test]
    fn fit_recovers_exact_rate() {
        let t: [f64; 4] = [1.0, 2.0, 3.0, 4.0];
        let e: Vec<f64> = t.iter().map(|t| 3.0 * (-0.7 * t).exp()).collect();
        let f = fit_rate(&t, &e).unwrap();
        assert!((f.gamma - 0.7).abs() < 1e-12 && (f.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn source_rule_integrates_bump() {
        // int (1 - r^2)^3 over the unit disk = pi / 4
        let nodes = source_nodes(&SourceSpec::bump([0.0, 0.3], 1.0), 12);
        let total: C64 = nodes.iter().map(|n| n.weight).sum();
        assert!((total.re - PI / 4.0).abs() < 1e-12, "{total}");
    }
}
