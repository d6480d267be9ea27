//! Finite-difference reference solver for the PML-truncated source problem
//! on the box `B_ex`, with Dirichlet walls.
//!
//! The operator `d1(a2/a1 d1 u) + d2(a1/a2 d2 u) + a1 a2 k^2 u` is discretized
//! with the flux-conservative five-point stencil: coefficients on cell faces,
//! `a1 a2 k^2` at nodes (averaged over the two layers on the interface line).
//! Eliminating the Dirichlet nodes leaves a complex-symmetric matrix, factored
//! as `L D L^T` in band storage without pivoting.
//!
//! Sources follow the Green's-representation convention `u = int G f`, so the
//! discrete equation is `S u = -f`.

use crate::geometry::{Medium, PmlConfig};
use crate::{c, Error, Result, C64};
use serde::Serialize;
use std::sync::Arc;

/// Largest admissible `k2 * h`.
pub const MAX_KH: f64 = 0.5;

/// Node counts along `x1` and `x2`, boundary nodes included.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NodeKind {
    Physical,
    Pml,
    Boundary,
}

/// Values at the nodes of a uniform grid over `B_ex`, row-major in `x1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldGrid {
    pub nx: usize,
    pub ny: usize,
    pub h1: f64,
    pub h2: f64,
    /// Outer half-widths `M1, M2`.
    pub half: [f64; 2],
    /// Inner half-widths `L1/2, L2/2`.
    pub inner: [f64; 2],
    pub values: Vec<C64>,
    pub mask: Vec<NodeKind>,
}

impl FieldGrid {
    fn empty(cfg: &PmlConfig, spec: GridSpec) -> Self {
        let (m1, m2) = (cfg.m1(), cfg.m2());
        let h1 = 2.0 * m1 / (spec.nx - 1) as f64;
        let h2 = 2.0 * m2 / (spec.ny - 1) as f64;
        let inner = [cfg.profile1.half_physical, cfg.profile2.half_physical];
        let mut mask = Vec::with_capacity(spec.nx * spec.ny);
        for j in 0..spec.ny {
            for i in 0..spec.nx {
                let boundary = i == 0 || j == 0 || i + 1 == spec.nx || j + 1 == spec.ny;
                let x = [-m1 + i as f64 * h1, -m2 + j as f64 * h2];
                let inside = x[0].abs() <= inner[0] * (1.0 + 1e-12) && x[1].abs() <= inner[1] * (1.0 + 1e-12);
                mask.push(if boundary {
                    NodeKind::Boundary
                } else if inside {
                    NodeKind::Physical
                } else {
                    NodeKind::Pml
                });
            }
        }
        Self { nx: spec.nx, ny: spec.ny, h1, h2, half: [m1, m2], inner, values: vec![C64::default(); spec.nx * spec.ny], mask }
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn x1(&self, i: usize) -> f64 {
        -self.half[0] + i as f64 * self.h1
    }

    pub fn x2(&self, j: usize) -> f64 {
        -self.half[1] + j as f64 * self.h2
    }

    pub fn point(&self, i: usize, j: usize) -> [f64; 2] {
        [self.x1(i), self.x2(j)]
    }

    pub fn value(&self, i: usize, j: usize) -> C64 {
        self.values[self.index(i, j)]
    }

    /// Indices of the node closest to `x`.
    pub fn nearest(&self, x: [f64; 2]) -> (usize, usize) {
        let i = ((x[0] + self.half[0]) / self.h1).round().clamp(0.0, (self.nx - 1) as f64) as usize;
        let j = ((x[1] + self.half[1]) / self.h2).round().clamp(0.0, (self.ny - 1) as f64) as usize;
        (i, j)
    }

    /// Whether `x` is a grid node up to rounding.
    pub fn is_node(&self, x: [f64; 2]) -> bool {
        let (i, j) = self.nearest(x);
        let p = self.point(i, j);
        (p[0] - x[0]).abs() <= 1e-9 * self.h1 && (p[1] - x[1]).abs() <= 1e-9 * self.h2
    }
}

/// Source term of the PML problem.
#[derive(Clone)]
pub enum SourceSpec {
    /// `strength * delta_y`.
    Point { y: [f64; 2], strength: C64 },
    /// Density supported on the disk of `radius` around `center`.
    Disk { center: [f64; 2], radius: f64, density: Arc<dyn Fn([f64; 2]) -> C64 + Send + Sync> },
}

impl std::fmt::Debug for SourceSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SourceSpec::Point { y, strength } => f.debug_struct("Point").field("y", y).field("strength", strength).finish(),
            SourceSpec::Disk { center, radius, .. } => f.debug_struct("Disk").field("center", center).field("radius", radius).finish(),
        }
    }
}

impl SourceSpec {
    /// Unit point source.
    pub fn point(y: [f64; 2]) -> Self {
        SourceSpec::Point { y, strength: c(1.0, 0.0) }
    }

    /// The bump `(1 - r^2/R^2)^3` on the disk, which is twice continuously
    /// differentiable across its rim.
    pub fn bump(center: [f64; 2], radius: f64) -> Self {
        SourceSpec::Disk { center, radius, density: Arc::new(move |y| c(bump_profile(center, radius, y), 0.0)) }
    }

    /// Density value at `y` (zero outside the support; point sources have no
    /// pointwise density).
    pub fn density(&self, y: [f64; 2]) -> C64 {
        match self {
            SourceSpec::Point { .. } => C64::default(),
            SourceSpec::Disk { center, radius, density } => {
                let r2 = (y[0] - center[0]).powi(2) + (y[1] - center[1]).powi(2);
                if r2 < radius * radius {
                    density(y)
                } else {
                    C64::default()
                }
            }
        }
    }

    /// Checks that the support stays `margin` inside `B_in`.
    pub fn check_support(&self, cfg: &PmlConfig, margin: f64) -> Result<()> {
        let (center, radius) = match self {
            SourceSpec::Point { y, .. } => (*y, 0.0),
            SourceSpec::Disk { center, radius, .. } => (*center, *radius),
        };
        let inner = [cfg.profile1.half_physical, cfg.profile2.half_physical];
        for a in 0..2 {
            if center[a].abs() + radius + margin > inner[a] {
                return Err(Error::InvalidConfig(format!(
                    "source support reaches {} along axis {}, beyond {} - {margin}",
                    center[a].abs() + radius,
                    a + 1,
                    inner[a]
                )));
            }
        }
        Ok(())
    }
}

/// `(1 - r^2/R^2)^3` inside the disk, zero outside.
pub fn bump_profile(center: [f64; 2], radius: f64, y: [f64; 2]) -> f64 {
    let r2 = ((y[0] - center[0]).powi(2) + (y[1] - center[1]).powi(2)) / (radius * radius);
    if r2 >= 1.0 {
        0.0
    } else {
        (1.0 - r2).powi(3)
    }
}

/// The assembled five-point operator on the interior nodes, stored by rows
/// as `(center, [west, east, south, north])`.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub spec: GridSpec,
    template: FieldGrid,
    diag: Vec<C64>,
    /// Coupling to the east neighbour (`i + 1`) of every node.
    east: Vec<C64>,
    /// Coupling to the north neighbour (`j + 1`) of every node.
    north: Vec<C64>,
    factor: Option<BandFactor>,
}

/// Diagnostics of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveStats {
    pub unknowns: usize,
    pub bandwidth: usize,
    pub relative_residual: f64,
    /// `max |d| / min |d|` over the pivots of `L D L^T`, a cheap lower
    /// estimate of the condition number.
    pub pivot_ratio: f64,
    pub refinement_steps: usize,
}

/// Assembles the operator for a grid over `B_ex`.
pub fn assemble(medium: &Medium, cfg: &PmlConfig, spec: GridSpec) -> Result<LinearSystem> {
    if spec.nx < 3 || spec.ny < 3 {
        return Err(Error::InvalidConfig(format!("grid {}x{} has no interior", spec.nx, spec.ny)));
    }
    let grid = FieldGrid::empty(cfg, spec);
    let (h1, h2) = (grid.h1, grid.h2);
    let kh = medium.k2 * h1.max(h2);
    if kh > MAX_KH {
        return Err(Error::Resolution(kh));
    }
    let (nx, ny) = (spec.nx, spec.ny);
    let a1 = |x: f64| cfg.profile1.alpha(x.clamp(-cfg.m1(), cfg.m1())).expect("clamped");
    let a2 = |x: f64| cfg.profile2.alpha(x.clamp(-cfg.m2(), cfg.m2())).expect("clamped");
    let mut diag = vec![C64::default(); nx * ny];
    let mut east = vec![C64::default(); nx * ny];
    let mut north = vec![C64::default(); nx * ny];
    for j in 0..ny {
        let x2 = grid.x2(j);
        let a2n = a2(x2);
        let a2f = a2(x2 + 0.5 * h2);
        let k2n = if x2.abs() <= 1e-12 * h2 {
            0.5 * (medium.k1 * medium.k1 + medium.k2 * medium.k2)
        } else {
            medium.k_at(x2).powi(2)
        };
        for i in 0..nx {
            let x1 = grid.x1(i);
            let a1n = a1(x1);
            let p = grid.index(i, j);
            east[p] = a2n / a1(x1 + 0.5 * h1) / (h1 * h1);
            north[p] = a1n / a2f / (h2 * h2);
            diag[p] = a1n * a2n * k2n;
        }
    }
    for j in 0..ny {
        for i in 0..nx {
            let p = grid.index(i, j);
            let mut d = diag[p] - east[p] - north[p];
            if i > 0 {
                d -= east[p - 1];
            }
            if j > 0 {
                d -= north[p - nx];
            }
            diag[p] = d;
        }
    }
    Ok(LinearSystem { spec, template: grid, diag, east, north, factor: None })
}

impl LinearSystem {
    fn is_interior(&self, i: usize, j: usize) -> bool {
        i > 0 && j > 0 && i + 1 < self.spec.nx && j + 1 < self.spec.ny
    }

    /// Matrix entry between interior nodes `p = (i, j)` and `q`, zero when
    /// they are not neighbours.
    pub fn entry(&self, p: (usize, usize), q: (usize, usize)) -> C64 {
        let nx = self.spec.nx;
        let (pi, pj) = p;
        let (qi, qj) = q;
        if !(self.is_interior(pi, pj) && self.is_interior(qi, qj)) {
            return C64::default();
        }
        let ip = pj * nx + pi;
        let iq = qj * nx + qi;
        if p == q {
            self.diag[ip]
        } else if pj == qj && pi + 1 == qi {
            self.east[ip]
        } else if pj == qj && qi + 1 == pi {
            self.east[iq]
        } else if pi == qi && pj + 1 == qj {
            self.north[ip]
        } else if pi == qi && qj + 1 == pj {
            self.north[iq]
        } else {
            C64::default()
        }
    }

    /// Applies the operator to a full-grid field whose boundary values are zero.
    pub fn apply(&self, u: &[C64]) -> Vec<C64> {
        let (nx, ny) = (self.spec.nx, self.spec.ny);
        let mut out = vec![C64::default(); nx * ny];
        for j in 1..ny - 1 {
            for i in 1..nx - 1 {
                let p = j * nx + i;
                let mut s = self.diag[p] * u[p];
                if i > 1 {
                    s += self.east[p - 1] * u[p - 1];
                }
                if i + 2 < nx {
                    s += self.east[p] * u[p + 1];
                }
                if j > 1 {
                    s += self.north[p - nx] * u[p - nx];
                }
                if j + 2 < ny {
                    s += self.north[p] * u[p + nx];
                }
                out[p] = s;
            }
        }
        out
    }

    /// Sum of the couplings of interior node `(i, j)` to all five stencil
    /// nodes, boundary neighbours included.
    pub fn row_sum(&self, i: usize, j: usize) -> C64 {
        let nx = self.spec.nx;
        let p = j * nx + i;
        self.diag[p] + self.east[p] + self.east[p - 1] + self.north[p] + self.north[p - nx]
    }

    /// Right-hand side `-f` on the full grid.
    fn load(&self, source: &SourceSpec) -> Result<Vec<C64>> {
        let g = &self.template;
        let mut rhs = vec![C64::default(); g.nx * g.ny];
        match source {
            SourceSpec::Point { y, strength } => {
                let (i, j) = g.nearest(*y);
                if !self.is_interior(i, j) {
                    return Err(Error::InvalidConfig(format!("point source {y:?} lies on the outer wall")));
                }
                rhs[g.index(i, j)] = -strength / (g.h1 * g.h2);
            }
            SourceSpec::Disk { .. } => {
                for j in 1..g.ny - 1 {
                    for i in 1..g.nx - 1 {
                        rhs[g.index(i, j)] = -source.density(g.point(i, j));
                    }
                }
            }
        }
        Ok(rhs)
    }

    /// Factors the matrix (once) and solves for `source`.
    pub fn solve(&mut self, source: &SourceSpec) -> Result<(FieldGrid, SolveStats)> {
        let rhs = self.load(source)?;
        self.solve_rhs(&rhs)
    }

    /// Solves `S u = rhs` for a full-grid right-hand side (boundary entries
    /// are ignored).
    pub fn solve_rhs(&mut self, rhs: &[C64]) -> Result<(FieldGrid, SolveStats)> {
        if self.factor.is_none() {
            self.factor = Some(BandFactor::new(self)?);
        }
        let f = self.factor.as_ref().expect("factored above");
        let (nx, ny) = (self.spec.nx, self.spec.ny);
        let mut field = self.template.clone();
        let mut b = vec![C64::default(); f.n];
        for j in 1..ny - 1 {
            for i in 1..nx - 1 {
                b[f.order(i, j)] = rhs[j * nx + i];
            }
        }
        let rhs_norm = b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let mut x = f.solve(&b);
        let mut steps = 0;
        let mut rel = 0.0;
        for _ in 0..4 {
            field.values.iter_mut().for_each(|v| *v = C64::default());
            for j in 1..ny - 1 {
                for i in 1..nx - 1 {
                    field.values[j * nx + i] = x[f.order(i, j)];
                }
            }
            let ax = self.apply(&field.values);
            let mut r = vec![C64::default(); f.n];
            for j in 1..ny - 1 {
                for i in 1..nx - 1 {
                    let k = f.order(i, j);
                    r[k] = b[k] - ax[j * nx + i];
                }
            }
            let rn = r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            rel = if rhs_norm > 0.0 { rn / rhs_norm } else { rn };
            if rel <= 1e-12 {
                break;
            }
            let dx = f.solve(&r);
            for (a, d) in x.iter_mut().zip(&dx) {
                *a += d;
            }
            steps += 1;
        }
        let stats = SolveStats {
            unknowns: f.n,
            bandwidth: f.bw,
            relative_residual: rel,
            pivot_ratio: f.pivot_ratio,
            refinement_steps: steps,
        };
        if !(rel <= 1e-10) {
            return Err(Error::SingularSystem(format!(
                "relative residual {rel:e} after refinement; pivot ratio {:e}",
                f.pivot_ratio
            )));
        }
        Ok((field, stats))
    }
}

/// `L D L^T` of a complex-symmetric band matrix, with `L` stored column by
/// column below the diagonal.
#[derive(Debug, Clone)]
struct BandFactor {
    n: usize,
    bw: usize,
    /// Interior nodes are numbered along the shorter grid direction first.
    by_rows: bool,
    ni: usize,
    nj: usize,
    /// Column `k` holds `d_k` followed by `l_{k+1,k} .. l_{k+bw,k}`.
    band: Vec<C64>,
    pivot_ratio: f64,
}

impl BandFactor {
    #[inline]
    fn order(&self, i: usize, j: usize) -> usize {
        if self.by_rows {
            (j - 1) * self.ni + (i - 1)
        } else {
            (i - 1) * self.nj + (j - 1)
        }
    }

    fn new(sys: &LinearSystem) -> Result<Self> {
        let (nx, ny) = (sys.spec.nx, sys.spec.ny);
        let (ni, nj) = (nx - 2, ny - 2);
        let by_rows = ni <= nj;
        let bw = if by_rows { ni } else { nj };
        let n = ni * nj;
        let w = bw + 1;
        let mut band = vec![C64::default(); n * w];
        let mut f = Self { n, bw, by_rows, ni, nj, band: Vec::new(), pivot_ratio: 1.0 };
        for j in 1..ny - 1 {
            for i in 1..nx - 1 {
                let p = j * nx + i;
                let k = f.order(i, j);
                band[k * w] = sys.diag[p];
                if i + 2 < nx {
                    let q = f.order(i + 1, j);
                    band[k.min(q) * w + k.abs_diff(q)] = sys.east[p];
                }
                if j + 2 < ny {
                    let q = f.order(i, j + 1);
                    band[k.min(q) * w + k.abs_diff(q)] = sys.north[p];
                }
            }
        }
        let scale = band.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let (mut dmin, mut dmax) = (f64::INFINITY, 0.0f64);
        let mut col = vec![C64::default(); w];
        for k in 0..n {
            let base = k * w;
            let d = band[base];
            let dn = d.norm();
            if !(dn > 1e-14 * scale) {
                return Err(Error::SingularSystem(format!("pivot {k} is {dn:e} (matrix scale {scale:e})")));
            }
            dmin = dmin.min(dn);
            dmax = dmax.max(dn);
            let m = bw.min(n - 1 - k);
            let inv = 1.0 / d;
            col[..=m].copy_from_slice(&band[base..=base + m]);
            for i in 1..=m {
                band[base + i] = col[i] * inv;
            }
            // trailing update a_{k+i, k+j} -= l_{k+i} * a_{k+j, k}
            for j in 1..=m {
                let t = col[j];
                if t == C64::default() {
                    continue;
                }
                let (head, tail) = band.split_at_mut((k + j) * w);
                let lcol = &head[base + j..=base + m];
                let target = &mut tail[..=m - j];
                for (a, l) in target.iter_mut().zip(lcol) {
                    *a -= l * t;
                }
            }
        }
        f.band = band;
        f.pivot_ratio = dmax / dmin;
        Ok(f)
    }

    fn solve(&self, b: &[C64]) -> Vec<C64> {
        let (n, w) = (self.n, self.bw + 1);
        let mut x = b.to_vec();
        for k in 0..n {
            let xk = x[k];
            if xk == C64::default() {
                continue;
            }
            let m = self.bw.min(n - 1 - k);
            for i in 1..=m {
                x[k + i] -= self.band[k * w + i] * xk;
            }
        }
        for k in 0..n {
            x[k] /= self.band[k * w];
        }
        for k in (0..n).rev() {
            let m = self.bw.min(n - 1 - k);
            let mut s = x[k];
            for i in 1..=m {
                s -= self.band[k * w + i] * x[k + i];
            }
            x[k] = s;
        }
        x
    }
}

/// Trapezoid weight of node `(i, j)` over `B_in`, zero outside.
fn inner_weight(g: &FieldGrid, i: usize, j: usize) -> f64 {
    let x = g.point(i, j);
    let tol = 1e-9;
    let mut w = g.h1 * g.h2;
    for (a, h) in [(0, g.h1), (1, g.h2)] {
        let excess = x[a].abs() - g.inner[a];
        if excess > tol * h {
            return 0.0;
        }
        if excess.abs() <= tol * h {
            w *= 0.5;
        }
    }
    w
}

/// `L2` norm and `H1` seminorm over `B_in` of `grid - reference`: trapezoid
/// rule on the nodes of `B_in`, gradients by central differences (one-sided on
/// the edges of the box).
pub fn norms<F>(grid: &FieldGrid, mut reference: F) -> (f64, f64)
where
    F: FnMut([f64; 2]) -> C64,
{
    let (nx, ny) = (grid.nx, grid.ny);
    let mut diff = vec![C64::default(); nx * ny];
    let mut used = vec![false; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            if inner_weight(grid, i, j) > 0.0 || near_inner(grid, i, j) {
                let p = grid.index(i, j);
                diff[p] = grid.values[p] - reference(grid.point(i, j));
                used[p] = true;
            }
        }
    }
    let mut l2 = 0.0;
    let mut h1 = 0.0;
    for j in 0..ny {
        for i in 0..nx {
            let w = inner_weight(grid, i, j);
            if w == 0.0 {
                continue;
            }
            let p = grid.index(i, j);
            l2 += w * diff[p].norm_sqr();
            let d1 = central(&diff, &used, p, 1, i, nx, grid.h1);
            let d2 = central(&diff, &used, p, nx, j, ny, grid.h2);
            h1 += w * (d1.norm_sqr() + d2.norm_sqr());
        }
    }
    (l2.sqrt(), h1.sqrt())
}

fn near_inner(g: &FieldGrid, i: usize, j: usize) -> bool {
    let x = g.point(i, j);
    x[0].abs() <= g.inner[0] + 1.5 * g.h1 && x[1].abs() <= g.inner[1] + 1.5 * g.h2
}

fn central(v: &[C64], used: &[bool], p: usize, stride: usize, idx: usize, n: usize, h: f64) -> C64 {
    let back = idx > 0 && used[p - stride];
    let fwd = idx + 1 < n && used[p + stride];
    match (back, fwd) {
        (true, true) => (v[p + stride] - v[p - stride]) / (2.0 * h),
        (false, true) => (v[p + stride] - v[p]) / h,
        (true, false) => (v[p] - v[p - stride]) / h,
        (false, false) => C64::default(),
    }
}
