//! Piecewise paths in the complex spectral plane and adaptive Gauss-Kronrod
//! quadrature along them.
//!
//! Segments near the branch points `xi = k_l` are parametrized by
//! `mu_l = sqrt(k_l^2 - xi^2)` instead of `xi`; with `dxi = -mu dmu / xi` the
//! inverse square-root endpoint behaviour of the spectral kernels disappears.

use crate::{c, Error, Result, C64, I};
use std::collections::BinaryHeap;

/// Exact value of `mu_l` carried by nodes of a square-root segment, so that
/// kernels never recompute it from `xi` with cancellation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pin {
    pub layer: u8,
    pub k: f64,
    pub mu: C64,
}

/// A quadrature node in the spectral plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub xi: C64,
    pub pin: Option<Pin>,
}

impl Node {
    pub fn plain(xi: C64) -> Self {
        Self { xi, pin: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Segment {
    /// Straight line in `xi`.
    Line { from: C64, to: C64 },
    /// Straight line in `mu_l`; `xi = sqrt(k^2 - mu^2)` on the principal branch.
    SqrtLine { layer: u8, k: f64, mu_from: C64, mu_to: C64 },
    /// Ray `from + s dir`, `s >= 0`. When `inward` the ray is traversed from
    /// infinity towards `from`.
    Tail { from: C64, dir: C64, decay: f64, inward: bool },
    /// Ray in `mu_l`, traversed outward.
    SqrtTail { layer: u8, k: f64, mu_from: C64, dir: C64, decay: f64 },
}

impl Segment {
    fn is_tail(&self) -> bool {
        matches!(self, Segment::Tail { .. } | Segment::SqrtTail { .. })
    }

    fn decay(&self) -> f64 {
        match *self {
            Segment::Tail { decay, .. } | Segment::SqrtTail { decay, .. } => decay,
            _ => 0.0,
        }
    }

    /// Node and `dxi/dt` at parameter `t`.
    #[inline]
    fn eval(&self, t: f64) -> (Node, C64) {
        match *self {
            Segment::Line { from, to } => (Node::plain(from + t * (to - from)), to - from),
            Segment::SqrtLine { layer, k, mu_from, mu_to } => {
                let mu = mu_from + t * (mu_to - mu_from);
                pinned(layer, k, mu, mu_to - mu_from)
            }
            Segment::Tail { from, dir, inward, .. } => {
                let jac = if inward { -dir } else { dir };
                (Node::plain(from + t * dir), jac)
            }
            Segment::SqrtTail { layer, k, mu_from, dir, .. } => pinned(layer, k, mu_from + t * dir, dir),
        }
    }

    /// Start point in `xi` (for tails: the finite end).
    pub fn start(&self) -> C64 {
        self.eval(0.0).0.xi
    }

    /// End point in `xi` for finite segments.
    pub fn end(&self) -> Option<C64> {
        if self.is_tail() {
            None
        } else {
            Some(self.eval(1.0).0.xi)
        }
    }
}

#[inline]
fn pinned(layer: u8, k: f64, mu: C64, dmu: C64) -> (Node, C64) {
    let xi = (k * k - mu * mu).sqrt();
    let jac = if xi.norm() > 0.0 { -mu / xi * dmu } else { C64::default() };
    (Node { xi, pin: Some(Pin { layer, k, mu }) }, jac)
}

/// Ordered collection of segments.
#[derive(Debug, Clone, PartialEq)]
pub struct ContourPath {
    pub label: String,
    pub segments: Vec<Segment>,
}

/// Branch point `k` of `mu_layer`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchPoint {
    pub layer: u8,
    pub k: f64,
}

impl ContourPath {
    pub fn new(label: impl Into<String>, segments: Vec<Segment>) -> Self {
        Self { label: label.into(), segments }
    }

    /// Overrides the declared decay rate of every tail.
    pub fn with_tail_decay(mut self, rate: f64) -> Self {
        for s in &mut self.segments {
            match s {
                Segment::Tail { decay, .. } | Segment::SqrtTail { decay, .. } => *decay = rate,
                _ => {}
            }
        }
        self
    }

    /// Checks that consecutive segments connect. Inward tails must come first
    /// and outward tails last.
    pub fn is_connected(&self, tol: f64) -> bool {
        let mut prev: Option<C64> = None;
        for (n, s) in self.segments.iter().enumerate() {
            match *s {
                Segment::Tail { from, inward: true, .. } => {
                    if n != 0 {
                        return false;
                    }
                    prev = Some(from);
                }
                _ => {
                    if let Some(p) = prev {
                        if (s.start() - p).norm() > tol * (1.0 + p.norm()) {
                            return false;
                        }
                    }
                    prev = s.end();
                    if prev.is_none() && n + 1 != self.segments.len() {
                        return false;
                    }
                }
            }
        }
        true
    }
}

/// Segments covering the real interval `[a, b]`, switching to the
/// `mu`-parametrization on a neighbourhood of every branch point inside it.
/// Branch points exactly at `a` or `b` are handled too.
pub fn real_run(a: f64, b: f64, branch: &[BranchPoint]) -> Vec<Segment> {
    let mut pts: Vec<BranchPoint> = branch.iter().copied().filter(|p| p.k >= a && p.k <= b).collect();
    pts.sort_by(|p, q| p.k.total_cmp(&q.k));
    pts.dedup_by(|p, q| (p.k - q.k).abs() < 1e-14 * p.k.max(1.0));
    let mut out = Vec::new();
    let mut cursor = a;
    for (n, p) in pts.iter().enumerate() {
        let next = pts.get(n + 1).map(|q| q.k).unwrap_or(f64::INFINITY);
        let prev = if n == 0 { f64::NEG_INFINITY } else { pts[n - 1].k };
        let w = (0.5 * p.k).min(0.5 * (next - p.k)).min(0.5 * (p.k - prev));
        let lo = (p.k - w).max(cursor);
        let hi = (p.k + w).min(b);
        if lo > cursor {
            out.push(Segment::Line { from: c(cursor, 0.0), to: c(lo, 0.0) });
        }
        if lo < p.k {
            let mu_lo = c((p.k * p.k - lo * lo).max(0.0).sqrt(), 0.0);
            out.push(Segment::SqrtLine { layer: p.layer, k: p.k, mu_from: mu_lo, mu_to: C64::default() });
        }
        if hi > p.k {
            let mu_hi = c(0.0, (hi * hi - p.k * p.k).sqrt());
            out.push(Segment::SqrtLine { layer: p.layer, k: p.k, mu_from: C64::default(), mu_to: mu_hi });
        }
        cursor = hi.max(p.k);
    }
    if b > cursor {
        out.push(Segment::Line { from: c(cursor, 0.0), to: c(b, 0.0) });
    }
    out
}

/// Real half-line `[a, inf)` with branch points pinned; the tail starts beyond
/// the last branch point.
pub fn real_half_line(a: f64, branch: &[BranchPoint], decay: f64) -> Vec<Segment> {
    let kmax = branch.iter().map(|p| p.k).fold(a, f64::max);
    let kmin = branch.iter().map(|p| p.k).fold(f64::INFINITY, f64::min);
    let cut = if kmax > a { kmax + 0.5 * kmin.min(kmax) } else { a };
    let mut segs = real_run(a, cut, branch);
    segs.push(Segment::Tail { from: c(cut, 0.0), dir: c(1.0, 0.0), decay, inward: false });
    segs
}

/// The deformed path `+i inf -> 0 -> +inf` with no pinning.
pub fn path_ext() -> ContourPath {
    ContourPath::new(
        "EXT",
        vec![
            Segment::Tail { from: C64::default(), dir: I, decay: 1.0, inward: true },
            Segment::Tail { from: C64::default(), dir: c(1.0, 0.0), decay: 1.0, inward: false },
        ],
    )
}

/// `+i inf -> 0 -> +inf` with the real leg pinned at the given branch points.
pub fn path_ext_pinned(branch: &[BranchPoint], decay: f64) -> ContourPath {
    let mut segs = vec![Segment::Tail { from: C64::default(), dir: I, decay, inward: true }];
    segs.extend(real_half_line(0.0, branch, decay));
    ContourPath::new("EXT", segs)
}

/// Named deformations of the spectral integration path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PathName {
    /// Imaginary axis, real run below `k_l`, then `mu_l` from `eps0 k_l` upward.
    BranchCut0 { layer: u8 },
    /// Staircase through the box of half-height `delta0 / M2`.
    Staircase,
    /// Vertical descent at `delta1 k1`, then the real axis.
    VerticalLayered,
    /// Vertical descent at `delta2 k_l`, then the real axis.
    VerticalImage { layer: u8 },
    /// As `BranchCut0` with the constant `eps1`.
    BranchCut1 { layer: u8 },
}

/// Constants shaping the deformed paths. Each is the largest value in
/// `(0, 0.95]` compatible with the geometry.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PathConstants {
    pub eps0: f64,
    pub delta0: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub eps1: f64,
}

impl PathConstants {
    /// Predicted exponential rate `min(sqrt(2)/2, 2 eps0, 2 eps1, 2 delta1, 2 delta2)`.
    pub fn gamma(&self) -> f64 {
        [std::f64::consts::FRAC_1_SQRT_2, 2.0 * self.eps0, 2.0 * self.eps1, 2.0 * self.delta1, 2.0 * self.delta2]
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Segments of a named path. `k1, k2` are the wavenumbers, `m2` the outer
/// half-height of the box.
pub fn path_family(name: PathName, k1: f64, k2: f64, m2: f64, consts: &PathConstants, decay: f64) -> Result<ContourPath> {
    let branch = [BranchPoint { layer: 1, k: k1 }, BranchPoint { layer: 2, k: k2 }];
    let kl = |layer: u8| if layer == 1 { k1 } else { k2 };
    let ok = |v: f64, what: &str| {
        if v > 0.0 && v < 1.0 {
            Ok(v)
        } else {
            Err(Error::BadConstants(format!("{what} = {v} outside (0, 1)")))
        }
    };
    let cut_path = |layer: u8, e: f64, label: &str| -> Result<ContourPath> {
        let e = ok(e, "mu offset")?;
        let k = kl(layer);
        let corner = (1.0 - e * e).sqrt() * k;
        let mut segs = vec![Segment::Tail { from: C64::default(), dir: I, decay, inward: true }];
        let others: Vec<BranchPoint> = branch.iter().copied().filter(|p| p.layer != layer).collect();
        segs.extend(real_run(0.0, corner, &others));
        segs.push(Segment::SqrtTail { layer, k, mu_from: c(e * k, 0.0), dir: I, decay });
        Ok(ContourPath::new(label, segs))
    };
    let vertical = |x: f64, label: &str| -> ContourPath {
        let mut segs = vec![Segment::Tail { from: c(x, 0.0), dir: I, decay, inward: true }];
        segs.extend(real_half_line(x, &branch, decay));
        ContourPath::new(label, segs)
    };
    match name {
        PathName::BranchCut0 { layer } => cut_path(layer, consts.eps0, "P0"),
        PathName::BranchCut1 { layer } => cut_path(layer, consts.eps1, "P1"),
        PathName::Staircase => {
            let h = ok(consts.delta0, "delta0")? / m2;
            let w = std::f64::consts::FRAC_1_SQRT_2 * k1;
            let mut segs = vec![
                Segment::Tail { from: c(0.0, h), dir: I, decay, inward: true },
                Segment::Line { from: c(0.0, h), to: c(w, h) },
                Segment::Line { from: c(w, h), to: c(w, 0.0) },
            ];
            segs.extend(real_half_line(w, &branch, decay));
            Ok(ContourPath::new("Pf", segs))
        }
        PathName::VerticalLayered => Ok(vertical(ok(consts.delta1, "delta1")? * k1, "Pg")),
        PathName::VerticalImage { layer } => Ok(vertical(ok(consts.delta2, "delta2")? * kl(layer), "Pd2")),
    }
}

/// Tolerances and budget for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_panels: usize,
}

impl QuadOptions {
    pub fn new(rel_tol: f64) -> Self {
        Self { rel_tol, abs_tol: 0.0, max_panels: 4000 }
    }
    pub fn with_abs(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }
}

#[derive(Debug, Clone)]
pub struct QuadResult<const N: usize> {
    pub value: [C64; N],
    pub err_est: f64,
    pub panels: usize,
    /// Truncation parameter of every tail segment, in segment order.
    pub tail_ends: Vec<f64>,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone)]
struct Panel<const N: usize> {
    seg: usize,
    a: f64,
    b: f64,
    value: [C64; N],
    err: f64,
}

impl<const N: usize> PartialEq for Panel<N> {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl<const N: usize> Eq for Panel<N> {}
impl<const N: usize> PartialOrd for Panel<N> {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl<const N: usize> Ord for Panel<N> {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&o.err)
    }
}

#[inline]
fn norm_n<const N: usize>(v: &[C64; N]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Kronrod and Gauss sums on `[a, b]` of segment `seg`, plus the node maximum
/// of the integrand.
fn gk15<const N: usize, F>(kernel: &mut F, seg: &Segment, a: f64, b: f64) -> Result<([C64; N], f64, f64)>
where
    F: FnMut(&Node) -> [C64; N],
{
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut kron = [C64::default(); N];
    let mut gauss = [C64::default(); N];
    let mut peak = 0.0f64;
    let mut fvals = [[C64::default(); N]; 15];
    for j in 0..15 {
        let x = if j < 7 { -XGK[j] } else if j == 7 { 0.0 } else { XGK[14 - j] };
        let (node, jac) = seg.eval(mid + half * x);
        let v = kernel(&node);
        let mut out = [C64::default(); N];
        for n in 0..N {
            if !(v[n].re.is_finite() && v[n].im.is_finite()) {
                return Err(Error::SingularityOnPath(node.xi));
            }
            out[n] = v[n] * jac;
        }
        peak = peak.max(norm_n(&v));
        fvals[j] = out;
    }
    for j in 0..15 {
        let idx = if j < 8 { j } else { 14 - j };
        let wk = WGK[idx];
        let wg = if idx % 2 == 1 { WG[idx / 2] } else { 0.0 };
        for n in 0..N {
            kron[n] += wk * fvals[j][n];
            gauss[n] += wg * fvals[j][n];
        }
    }
    let mut err = 0.0f64;
    for n in 0..N {
        kron[n] *= half;
        gauss[n] *= half;
        let mean = kron[n] / (2.0 * half);
        let resasc: f64 = (0..15)
            .map(|j| {
                let idx = if j < 8 { j } else { 14 - j };
                WGK[idx] * (fvals[j][n] - mean).norm()
            })
            .sum::<f64>()
            * half.abs();
        let raw = (kron[n] - gauss[n]).norm();
        let e = if resasc > 0.0 && raw > 0.0 { resasc * (200.0 * raw / resasc).powf(1.5).min(1.0) } else { raw };
        err = err.max(e.max(50.0 * f64::EPSILON * kron[n].norm()));
    }
    Ok((kron, err, peak))
}

struct Plan {
    /// Parameter interval for each segment.
    ranges: Vec<(f64, f64)>,
    /// Error bound for the dropped part of each tail (0 for finite segments).
    dropped: Vec<f64>,
}

fn plan_tails<const N: usize, F>(kernel: &mut F, path: &ContourPath, opts: &QuadOptions, shrink: f64) -> Result<Plan>
where
    F: FnMut(&Node) -> [C64; N],
{
    // rough magnitude of the integral from one panel per finite segment and
    // one decay length per tail
    let mut rough = 0.0f64;
    let mut first_panels = Vec::new();
    for seg in &path.segments {
        if seg.is_tail() {
            let s0 = 1.0 / seg.decay().max(1e-12);
            let (v, _, peak) = gk15(kernel, seg, 0.0, s0)?;
            rough += norm_n(&v);
            first_panels.push((s0, peak));
        } else {
            let (v, _, _) = gk15(kernel, seg, 0.0, 1.0)?;
            rough += norm_n(&v);
            first_panels.push((1.0, 0.0));
        }
    }
    let target = shrink * (opts.rel_tol * rough).max(opts.abs_tol).max(f64::MIN_POSITIVE);
    let mut ranges = Vec::new();
    let mut dropped = Vec::new();
    for (seg, &(s0, peak)) in path.segments.iter().zip(&first_panels) {
        if !seg.is_tail() {
            ranges.push((0.0, 1.0));
            dropped.push(0.0);
            continue;
        }
        let rate = seg.decay().max(1e-12);
        let mut t = s0.max((peak / (0.1 * target)).max(1.0).ln() / rate);
        let mut tail_err = f64::INFINITY;
        for _ in 0..40 {
            let (v, _, probe_peak) = gk15(kernel, seg, t, 2.0 * t)?;
            let contribution = norm_n(&v).max(probe_peak * 1e-3 * t);
            if contribution <= 0.1 * target {
                tail_err = contribution;
                break;
            }
            t *= 2.0;
        }
        if !tail_err.is_finite() {
            return Err(Error::NoConvergence { panels: 0, err: f64::INFINITY });
        }
        ranges.push((0.0, t));
        dropped.push(tail_err);
    }
    Ok(Plan { ranges, dropped })
}

/// Adaptive quadrature of a vector-valued kernel along a path. Stops when the
/// summed panel error estimate is below `max(rel_tol |I|, abs_tol)`, with `|I|`
/// the largest component.
pub fn integrate<const N: usize, F>(mut kernel: F, path: &ContourPath, opts: QuadOptions) -> Result<QuadResult<N>>
where
    F: FnMut(&Node) -> [C64; N],
{
    let (panels, tail_err, tail_ends) = adapt(&mut kernel, path, &opts)?;
    let mut value = [C64::default(); N];
    let mut err = tail_err;
    for p in &panels {
        for n in 0..N {
            value[n] += p.value[n];
        }
        err += p.err;
    }
    Ok(QuadResult { value, err_est: err, panels: panels.len(), tail_ends })
}

type Adapted<const N: usize> = (Vec<Panel<N>>, f64, Vec<f64>);

fn adapt<const N: usize, F>(kernel: &mut F, path: &ContourPath, opts: &QuadOptions) -> Result<Adapted<N>>
where
    F: FnMut(&Node) -> [C64; N],
{
    // the tails are planned against a rough magnitude; when the legs cancel
    // the final target is smaller and the tails are planned again
    let mut shrink = 1.0;
    loop {
        match adapt_planned(kernel, path, opts, shrink)? {
            Ok(done) => return Ok(done),
            Err(ratio) if shrink > 1e-12 => shrink *= (0.1 * ratio).min(0.1),
            Err(_) => return Err(Error::NoConvergence { panels: 0, err: f64::INFINITY }),
        }
    }
}

/// Adaptive refinement with fixed tails. The inner `Err` asks for longer
/// tails and carries the ratio of the final target to the dropped tail mass.
fn adapt_planned<const N: usize, F>(
    kernel: &mut F,
    path: &ContourPath,
    opts: &QuadOptions,
    shrink: f64,
) -> Result<std::result::Result<Adapted<N>, f64>>
where
    F: FnMut(&Node) -> [C64; N],
{
    let plan = plan_tails(kernel, path, opts, shrink)?;
    let tail_err: f64 = plan.dropped.iter().sum();
    let tail_ends: Vec<f64> = path
        .segments
        .iter()
        .zip(&plan.ranges)
        .filter(|(s, _)| s.is_tail())
        .map(|(_, r)| r.1)
        .collect();
    let mut heap = BinaryHeap::new();
    let mut total = [C64::default(); N];
    let mut err_sum = 0.0;
    for (si, (seg, &(a, b))) in path.segments.iter().zip(&plan.ranges).enumerate() {
        // tails start with panels of a few decay lengths each
        let pieces = if seg.is_tail() { ((b - a) * seg.decay() / 4.0).ceil().clamp(1.0, 64.0) as usize } else { 1 };
        for j in 0..pieces {
            let pa = a + (b - a) * j as f64 / pieces as f64;
            let pb = a + (b - a) * (j + 1) as f64 / pieces as f64;
            let (v, e, _) = gk15(kernel, seg, pa, pb)?;
            for n in 0..N {
                total[n] += v[n];
            }
            err_sum += e;
            heap.push(Panel { seg: si, a: pa, b: pb, value: v, err: e });
        }
    }
    loop {
        let target = (opts.rel_tol * norm_n(&total)).max(opts.abs_tol);
        if err_sum + tail_err <= target {
            break;
        }
        if tail_err > 0.5 * target && err_sum <= 0.5 * target {
            return Ok(Err(target / tail_err));
        }
        if heap.len() >= opts.max_panels {
            return Err(Error::NoConvergence { panels: heap.len(), err: err_sum + tail_err });
        }
        let worst = heap.pop().expect("heap is never empty here");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            // panel cannot be split further in floating point
            return Err(Error::NoConvergence { panels: heap.len() + 1, err: err_sum + tail_err });
        }
        let seg = &path.segments[worst.seg];
        let (v1, e1, _) = gk15(kernel, seg, worst.a, mid)?;
        let (v2, e2, _) = gk15(kernel, seg, mid, worst.b)?;
        for n in 0..N {
            total[n] += v1[n] + v2[n] - worst.value[n];
        }
        err_sum += e1 + e2 - worst.err;
        heap.push(Panel { seg: worst.seg, a: worst.a, b: mid, value: v1, err: e1 });
        heap.push(Panel { seg: worst.seg, a: mid, b: worst.b, value: v2, err: e2 });
    }
    let panels: Vec<Panel<N>> = heap.into_vec();
    Ok(Ok((panels, tail_err, tail_ends)))
}

/// Scalar convenience wrapper around [`integrate`].
pub fn integrate_scalar<F>(mut kernel: F, path: &ContourPath, opts: QuadOptions) -> Result<(C64, f64)>
where
    F: FnMut(&Node) -> C64,
{
    let r = integrate(|n: &Node| [kernel(n)], path, opts)?;
    Ok((r.value[0], r.err_est))
}

/// Nodes and weights (including `dxi/dt`) of the panels that the adaptive
/// scheme settles on for `kernel`. Reusing them for related kernels gives a
/// fixed quadrature rule.
pub fn adapted_rule<const N: usize, F>(mut kernel: F, path: &ContourPath, opts: QuadOptions) -> Result<Vec<(Node, C64)>>
where
    F: FnMut(&Node) -> [C64; N],
{
    let (mut panels, _, _) = adapt(&mut kernel, path, &opts)?;
    panels.sort_by(|p, q| (p.seg, p.a).partial_cmp(&(q.seg, q.a)).expect("finite panel bounds"));
    let mut rule = Vec::with_capacity(15 * panels.len());
    for p in &panels {
        let seg = &path.segments[p.seg];
        let half = 0.5 * (p.b - p.a);
        let mid = 0.5 * (p.a + p.b);
        for j in 0..15 {
            let idx = if j < 8 { j } else { 14 - j };
            let x = if j < 7 { -XGK[j] } else if j == 7 { 0.0 } else { XGK[14 - j] };
            let (node, jac) = seg.eval(mid + half * x);
            rule.push((node, WGK[idx] * half * jac));
        }
    }
    Ok(rule)
}

/// Closed curve made of lines and circular arcs, used for winding numbers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Piece {
    Line { from: C64, to: C64 },
    Arc { center: C64, radius: f64, theta0: f64, theta1: f64 },
}

impl Piece {
    #[inline]
    pub fn point(&self, t: f64) -> C64 {
        match *self {
            Piece::Line { from, to } => from + t * (to - from),
            Piece::Arc { center, radius, theta0, theta1 } => {
                center + C64::from_polar(radius, theta0 + t * (theta1 - theta0))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedContour {
    pub pieces: Vec<Piece>,
}

impl ClosedContour {
    /// Positively oriented boundary of `[x0, x1] x [y0, y1]`.
    pub fn rectangle(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        let p = [c(x0, y0), c(x1, y0), c(x1, y1), c(x0, y1)];
        Self { pieces: (0..4).map(|j| Piece::Line { from: p[j], to: p[(j + 1) % 4] }).collect() }
    }

    /// Positively oriented circle.
    pub fn circle(center: C64, radius: f64) -> Self {
        Self { pieces: vec![Piece::Arc { center, radius, theta0: 0.0, theta1: 2.0 * std::f64::consts::PI }] }
    }

    pub fn is_closed(&self, tol: f64) -> bool {
        let n = self.pieces.len();
        (0..n).all(|j| (self.pieces[j].point(1.0) - self.pieces[(j + 1) % n].point(0.0)).norm() <= tol)
    }
}


/// Gauss-Legendre nodes and weights on `[-1, 1]`, by Newton iteration on the
/// Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}
