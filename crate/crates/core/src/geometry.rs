//! Absorbing profiles, complex coordinate stretching and the box geometry of
//! the truncated problem.

use crate::{c, Error, Result, C64};
use serde::{Deserialize, Serialize};

/// Wavenumbers of the upper (`k1`, `x2 > 0`) and lower (`k2`, `x2 < 0`) layers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Medium {
    pub k1: f64,
    pub k2: f64,
}

impl Medium {
    pub fn new(k1: f64, k2: f64) -> Result<Self> {
        if !(k1 > 0.0 && k1.is_finite() && k2.is_finite()) {
            return Err(Error::InvalidConfig(format!("wavenumbers must be positive, got {k1}, {k2}")));
        }
        if k2 <= k1 {
            return Err(Error::InvalidConfig(format!("need k2 > k1, got k1 = {k1}, k2 = {k2}")));
        }
        Ok(Self { k1, k2 })
    }

    /// Allows `k2 == k1`; used to compare against the homogeneous kernel.
    pub fn homogeneous(k: f64) -> Self {
        Self { k1: k, k2: k }
    }

    /// Wavenumber of layer 1 or 2.
    #[inline]
    pub fn k(&self, layer: u8) -> f64 {
        if layer == 1 {
            self.k1
        } else {
            self.k2
        }
    }

    /// Wavenumber at height `x2` (the interface belongs to layer 1).
    #[inline]
    pub fn k_at(&self, x2: f64) -> f64 {
        self.k(layer_of(x2))
    }

    pub fn ratio(&self) -> f64 {
        self.k2 / self.k1
    }
}

/// Layer index of a height: 1 above the interface, 2 below.
#[inline]
pub fn layer_of(x2: f64) -> u8 {
    if x2 >= 0.0 {
        1
    } else {
        2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Constant,
    Power1,
    Power2,
    Power3,
}

impl Shape {
    fn exponent(self) -> i32 {
        match self {
            Shape::Constant => 0,
            Shape::Power1 => 1,
            Shape::Power2 => 2,
            Shape::Power3 => 3,
        }
    }

    pub fn power(p: u32) -> Result<Self> {
        match p {
            1 => Ok(Shape::Power1),
            2 => Ok(Shape::Power2),
            3 => Ok(Shape::Power3),
            _ => Err(Error::InvalidConfig(format!("unsupported profile power {p}"))),
        }
    }
}

/// Absorbing profile along one axis: zero on `[-half_physical, half_physical]`,
/// even, and `strength * ((|t| - half_physical) / thickness)^p` inside the layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PmlProfile {
    pub half_physical: f64,
    pub thickness: f64,
    pub shape: Shape,
    pub strength: f64,
}

impl PmlProfile {
    pub fn new(half_physical: f64, thickness: f64, shape: Shape, strength: f64) -> Result<Self> {
        if !(half_physical > 0.0 && thickness > 0.0 && strength >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "bad profile: L/2 = {half_physical}, d = {thickness}, sigma0 = {strength}"
            )));
        }
        Ok(Self { half_physical, thickness, shape, strength })
    }

    /// Profile with a prescribed integral `sigma_bar` over one layer.
    pub fn with_sigma_bar(half_physical: f64, thickness: f64, shape: Shape, sigma_bar: f64) -> Result<Self> {
        let p = shape.exponent() as f64;
        Self::new(half_physical, thickness, shape, sigma_bar * (p + 1.0) / thickness)
    }

    /// Outer half-width `M = L/2 + d`.
    #[inline]
    pub fn outer(&self) -> f64 {
        self.half_physical + self.thickness
    }

    fn check(&self, t: f64) -> Result<f64> {
        let m = self.outer();
        if t.abs() > m * (1.0 + 1e-12) {
            return Err(Error::OutOfDomain { value: t, limit: m });
        }
        Ok((t.abs() - self.half_physical).clamp(0.0, self.thickness))
    }

    /// Profile value at `t`.
    pub fn sigma(&self, t: f64) -> Result<f64> {
        let s = self.check(t)?;
        Ok(self.sigma_depth(s))
    }

    fn sigma_depth(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        self.strength * (s / self.thickness).powi(self.shape.exponent())
    }

    /// Integral of the profile from the inner edge to depth `s`.
    fn integral_depth(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        let p = self.shape.exponent();
        self.strength * self.thickness / (p as f64 + 1.0) * (s / self.thickness).powi(p + 1)
    }

    /// Total absorption of one layer.
    pub fn sigma_bar(&self) -> f64 {
        self.integral_depth(self.thickness)
    }

    /// `x + i * integral_0^x sigma`.
    pub fn stretch(&self, x: f64) -> Result<C64> {
        let s = self.check(x)?;
        Ok(c(x, x.signum() * self.integral_depth(s)))
    }

    /// `1 + i sigma(x)`, the derivative of the stretch.
    pub fn alpha(&self, x: f64) -> Result<C64> {
        Ok(c(1.0, self.sigma(x)?))
    }

    /// Stretched outer half-width `M + i sigma_bar`.
    pub fn outer_stretched(&self) -> C64 {
        c(self.outer(), self.sigma_bar())
    }
}

/// Geometry of the truncated problem: profiles along both axes and the radius
/// of the disk that carries the source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PmlConfig {
    pub profile1: PmlProfile,
    pub profile2: PmlProfile,
    pub source_radius: f64,
}

/// Axis-aligned box `[-h1, h1] x [-h2, h2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenteredBox {
    pub half: [f64; 2],
}

impl CenteredBox {
    pub fn contains(&self, x: [f64; 2]) -> bool {
        x[0].abs() <= self.half[0] && x[1].abs() <= self.half[1]
    }
}

impl PmlConfig {
    /// Builds a configuration and rejects profiles without absorption.
    pub fn new(profile1: PmlProfile, profile2: PmlProfile, source_radius: f64) -> Result<Self> {
        let cfg = Self { profile1, profile2, source_radius };
        if !(source_radius > 0.0) {
            return Err(Error::InvalidConfig(format!("source radius must be positive, got {source_radius}")));
        }
        if !(profile1.sigma_bar() > 0.0 && profile2.sigma_bar() > 0.0) {
            return Err(Error::InvalidConfig(
                "both absorbing constants must be positive; without absorption the waveguide has real modes".into(),
            ));
        }
        Ok(cfg)
    }

    /// Same geometry and profile shapes on both axes.
    pub fn symmetric(half_physical: f64, thickness: f64, shape: Shape, sigma_bar: f64, source_radius: f64) -> Result<Self> {
        let p = PmlProfile::with_sigma_bar(half_physical, thickness, shape, sigma_bar)?;
        Self::new(p, p, source_radius)
    }

    /// Like [`PmlConfig::new`] but allows zero absorption (reference runs).
    pub fn unchecked(profile1: PmlProfile, profile2: PmlProfile, source_radius: f64) -> Self {
        Self { profile1, profile2, source_radius }
    }

    pub fn m1(&self) -> f64 {
        self.profile1.outer()
    }
    pub fn m2(&self) -> f64 {
        self.profile2.outer()
    }
    pub fn m1_tilde(&self) -> C64 {
        self.profile1.outer_stretched()
    }
    pub fn m2_tilde(&self) -> C64 {
        self.profile2.outer_stretched()
    }
    pub fn sigma_bar1(&self) -> f64 {
        self.profile1.sigma_bar()
    }
    pub fn sigma_bar2(&self) -> f64 {
        self.profile2.sigma_bar()
    }

    pub fn inner_box(&self) -> CenteredBox {
        CenteredBox { half: [self.profile1.half_physical, self.profile2.half_physical] }
    }
    pub fn outer_box(&self) -> CenteredBox {
        CenteredBox { half: [self.m1(), self.m2()] }
    }

    /// Stretched height.
    pub fn stretch2(&self, x2: f64) -> Result<C64> {
        self.profile2.stretch(x2)
    }

    /// Stretch along `x1` under the `2 M1`-periodic extension of the profile.
    pub fn stretch_periodic_x1(&self, x1: f64) -> C64 {
        let m1 = self.m1();
        let n = (x1 / (2.0 * m1)).round();
        let t = (x1 - 2.0 * n * m1).clamp(-m1, m1);
        let local = self.profile1.stretch(t).expect("reduced coordinate lies in one cell");
        2.0 * n * self.m1_tilde() + local
    }

    /// Derivative of [`PmlConfig::stretch_periodic_x1`].
    pub fn alpha_periodic_x1(&self, x1: f64) -> C64 {
        let m1 = self.m1();
        let n = (x1 / (2.0 * m1)).round();
        let t = (x1 - 2.0 * n * m1).clamp(-m1, m1);
        self.profile1.alpha(t).expect("reduced coordinate lies in one cell")
    }
}

/// Flat JSON configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct ProblemConfig {
    pub k1: f64,
    pub k2: f64,
    pub L1: f64,
    pub L2: f64,
    pub d1: f64,
    pub d2: f64,
    pub sigma_shape: Shape,
    pub sigma0_1: f64,
    pub sigma0_2: f64,
    pub R: f64,
}

impl ProblemConfig {
    pub fn build(&self) -> Result<(Medium, PmlConfig)> {
        let medium = Medium::new(self.k1, self.k2)?;
        let p1 = PmlProfile::new(self.L1 / 2.0, self.d1, self.sigma_shape, self.sigma0_1)?;
        let p2 = PmlProfile::new(self.L2 / 2.0, self.d2, self.sigma_shape, self.sigma0_2)?;
        Ok((medium, PmlConfig::new(p1, p2, self.R)?))
    }

    pub fn from_parts(medium: &Medium, cfg: &PmlConfig) -> Self {
        Self {
            k1: medium.k1,
            k2: medium.k2,
            L1: 2.0 * cfg.profile1.half_physical,
            L2: 2.0 * cfg.profile2.half_physical,
            d1: cfg.profile1.thickness,
            d2: cfg.profile2.thickness,
            sigma_shape: cfg.profile1.shape,
            sigma0_1: cfg.profile1.strength,
            sigma0_2: cfg.profile2.strength,
            R: cfg.source_radius,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionCheck {
    pub name: &'static str,
    pub passed: bool,
    pub values: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub checks: Vec<AssumptionCheck>,
}

impl AssumptionReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
    pub fn check(&self, name: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Thresholds used by [`validate_assumptions`].
#[derive(Debug, Clone, Copy)]
pub struct AssumptionBands {
    /// Ratios of comparable quantities must lie in `[1/band, band]`.
    pub band: f64,
    /// Lengths and absorbing constants must be at least `min_scale / k1`.
    pub min_scale: f64,
}

impl Default for AssumptionBands {
    fn default() -> Self {
        Self { band: 4.0, min_scale: 1.0 }
    }
}

/// Standing assumptions of the truncated problem: the PML encloses the source
/// disk, the two axes are comparable, and every length is at least of order
/// one wavelength.
pub fn validate_assumptions(medium: &Medium, cfg: &PmlConfig, bands: AssumptionBands) -> AssumptionReport {
    let (l1, l2) = (2.0 * cfg.profile1.half_physical, 2.0 * cfg.profile2.half_physical);
    let (d1, d2) = (cfg.profile1.thickness, cfg.profile2.thickness);
    let (s1, s2) = (cfg.sigma_bar1(), cfg.sigma_bar2());
    let in_band = |r: f64| r.is_finite() && r >= 1.0 / bands.band && r <= bands.band;
    let ratios = [("sigma_bar1/sigma_bar2", s1 / s2), ("L1/L2", l1 / l2), ("d1/d2", d1 / d2)];
    let floor = bands.min_scale / medium.k1;
    let scales = [("L1", l1), ("L2", l2), ("d1", d1), ("d2", d2), ("sigma_bar1", s1), ("sigma_bar2", s2)];
    AssumptionReport {
        checks: vec![
            AssumptionCheck {
                name: "source_enclosed",
                passed: l1.min(l2) > 2.0 * cfg.source_radius,
                values: vec![("min_L".into(), l1.min(l2)), ("2R".into(), 2.0 * cfg.source_radius)],
            },
            AssumptionCheck {
                name: "comparable_axes",
                passed: ratios.iter().all(|(_, r)| in_band(*r)),
                values: ratios.iter().map(|(n, r)| (n.to_string(), *r)).collect(),
            },
            AssumptionCheck {
                name: "resolved_scales",
                passed: scales.iter().all(|(_, v)| *v >= floor),
                values: scales
                    .iter()
                    .map(|(n, v)| (n.to_string(), *v))
                    .chain(std::iter::once(("floor".to_string(), floor)))
                    .collect(),
            },
        ],
    }
}
