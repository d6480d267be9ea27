//! Square-root branches, Hankel functions of the first kind for orders 0..=2,
//! and the free-space Helmholtz kernel in complexified coordinates.

use crate::{c, Error, Result, C64, I};
use std::f64::consts::{FRAC_2_PI, FRAC_PI_4, PI};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Arguments with modulus below this make `1/z^2` overflow.
pub const UNDERFLOW_FLOOR: f64 = 1e-150;

/// Slack allowed below the real axis for Hankel arguments built from
/// composed stretches.
pub const TOL_BRANCH: f64 = 1e-12;

/// Upper modulus of the ascending-series region.
const SERIES_RADIUS: f64 = 2.0;
/// Lower modulus of the asymptotic-expansion region.
const ASYMPTOTIC_RADIUS: f64 = 17.0;

/// Square root with nonnegative imaginary part; nonnegative on the positive
/// real axis.
#[inline]
pub fn sqrt_upper(z: C64) -> C64 {
    let w = z.sqrt();
    if w.im < 0.0 || (w.im == 0.0 && w.re < 0.0) {
        -w
    } else {
        w
    }
}

/// The root of `z^2` with nonnegative real part. On the imaginary axis the
/// root with nonnegative imaginary part is chosen.
#[inline]
pub fn plus_branch(z: C64) -> C64 {
    if z.re > 0.0 || (z.re == 0.0 && z.im >= 0.0) {
        // keep -0.0 out of the real part so the tie rule is stable
        c(z.re.abs(), z.im)
    } else {
        -z
    }
}

/// Principal square root (cut along the negative real axis).
#[inline]
pub fn sqrt_principal(z: C64) -> C64 {
    z.sqrt()
}

/// `H^(1)_order(z)` for `order` in `{0, 1, 2}`.
pub fn hankel1(order: u32, z: C64) -> Result<C64> {
    let (h0, h1) = hankel1_01(z)?;
    match order {
        0 => Ok(h0),
        1 => Ok(h1),
        2 => Ok(2.0 * h1 / z - h0),
        _ => Err(Error::Domain(z)),
    }
}

/// `(H^(1)_0(z), H^(1)_1(z))` evaluated together.
pub fn hankel1_01(z: C64) -> Result<(C64, C64)> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::Domain(z));
    }
    let r = z.norm();
    if r < UNDERFLOW_FLOOR {
        return Err(Error::Domain(z));
    }
    if z.im < -TOL_BRANCH * r.max(1.0) {
        return Err(Error::Domain(z));
    }
    // rounding noise just below the axis is folded onto it
    let z = if z.im < 0.0 { c(z.re, 0.0) } else { z };
    if r <= SERIES_RADIUS {
        Ok(ascending(z))
    } else if r <= ASYMPTOTIC_RADIUS {
        via_macdonald(z)
    } else {
        Ok((asymptotic(0, z)?, asymptotic(1, z)?))
    }
}

/// Power series for `J0, J1, Y0, Y1`, combined into `H0, H1`.
fn ascending(z: C64) -> (C64, C64) {
    let q = -(z * z) / 4.0;
    let mut t0 = c(1.0, 0.0);
    let mut t1 = z / 2.0;
    let mut j0 = C64::default();
    let mut j1 = C64::default();
    let mut s0 = C64::default();
    let mut s1 = C64::default();
    let mut harmonic = 0.0;
    for k in 0..80u32 {
        if k > 0 {
            let kf = k as f64;
            t0 *= q / (kf * kf);
            t1 *= q / (kf * (kf + 1.0));
            harmonic += 1.0 / kf;
        }
        j0 += t0;
        j1 += t1;
        s0 -= harmonic * t0;
        s1 += (2.0 * harmonic + 1.0 / (k as f64 + 1.0)) * t1;
        if k > 3 && t0.norm() < 1e-17 * j0.norm() && t1.norm() < 1e-17 * j1.norm() {
            break;
        }
    }
    let log_half = (z / 2.0).ln();
    let y0 = FRAC_2_PI * ((log_half + EULER_GAMMA) * j0 + s0);
    let y1 = FRAC_2_PI * (log_half + EULER_GAMMA) * j1 - FRAC_2_PI / z - s1 / PI;
    (j0 + I * y0, j1 + I * y1)
}

/// Steed's continued fraction for `K0, K1` at `w = -iz`, then
/// `H0 = (2/(i pi)) K0(w)` and `H1 = -(2/pi) K1(w)`.
fn via_macdonald(z: C64) -> Result<(C64, C64)> {
    let w = -I * z;
    let a1 = 0.25;
    let mut b = 2.0 * (1.0 + w);
    let mut d = 1.0 / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = C64::default();
    let mut q2 = c(1.0, 0.0);
    let mut q = c(a1, 0.0);
    let mut cc = c(a1, 0.0);
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    let mut converged = false;
    for i in 2..20_000u32 {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        cc = -a * cc / fi;
        let qn = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qn;
        q += cc * qn;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        h += delh;
        let dels = q * delh;
        s += dels;
        if dels.norm() < 1e-17 * s.norm() {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Accuracy(z));
    }
    let k0 = (PI / (2.0 * w)).sqrt() * (-w).exp() / s;
    let k1 = k0 * (w + 0.5 - a1 * h) / w;
    Ok((2.0 / (PI * I) * k0, -FRAC_2_PI * k1))
}

/// Hankel large-argument expansion, summed until the terms reach rounding.
fn asymptotic(order: u32, z: C64) -> Result<C64> {
    let m = 4.0 * (order * order) as f64;
    let mut term = c(1.0, 0.0);
    let mut sum = term;
    let mut done = false;
    for k in 1..120u32 {
        let odd = (2 * k - 1) as f64;
        let next = term * I * (m - odd * odd) / (8.0 * k as f64 * z);
        if next.norm() > term.norm() {
            break;
        }
        term = next;
        sum += term;
        if term.norm() < 1e-16 * sum.norm() {
            done = true;
            break;
        }
    }
    if !done && term.norm() > 1e-12 * sum.norm() {
        return Err(Error::Accuracy(z));
    }
    let phase = z - order as f64 * PI / 2.0 - FRAC_PI_4;
    Ok((2.0 / (PI * z)).sqrt() * (I * phase).exp() * sum)
}

/// Right-hand side of the Hankel decay inequality
/// `|H_nu(z)| <= exp(-Im z * sqrt(1 - t^2/|z|^2)) |H_nu(t)|` for `0 < t <= |z|`.
pub fn hankel_decay_bound(order: u32, z: C64, t: f64) -> Result<f64> {
    let ratio = (t / z.norm()).min(1.0);
    let h = hankel1(order, c(t, 0.0))?;
    Ok((-z.im * (1.0 - ratio * ratio).sqrt()).exp() * h.norm())
}

/// Complexified distance `sqrt(d1^2 + d2^2)` on the branch with nonnegative
/// real part.
#[inline]
pub fn complex_distance(d: [C64; 2]) -> C64 {
    plus_branch((d[0] * d[0] + d[1] * d[1]).sqrt())
}

/// Free-space kernel `(i/4) H0(k r)` at complex points, with its gradient
/// with respect to the stretched target coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSample {
    pub value: C64,
    pub grad: [C64; 2],
}

/// `(i/4) H0(k r)` with `r` the complexified distance between `x` and `y`.
pub fn phi_free(k: f64, x: [C64; 2], y: [C64; 2]) -> Result<KernelSample> {
    let d = [x[0] - y[0], x[1] - y[1]];
    let r = complex_distance(d);
    if r.norm() < UNDERFLOW_FLOOR {
        return Err(Error::CoincidentPoints);
    }
    let (h0, h1) = hankel1_01(k * r)?;
    let value = 0.25 * I * h0;
    let radial = -0.25 * I * k * h1 / r;
    Ok(KernelSample { value, grad: [radial * d[0], radial * d[1]] })
}

/// Free-space kernel from a precomputed complexified distance `r`. Returns
/// `(i/4) H0(k r)` and `-(i/4) k H1(k r)`, the derivative in `r`.
pub fn phi_radial(k: f64, r: C64) -> Result<(C64, C64)> {
    if r.norm() < UNDERFLOW_FLOOR {
        return Err(Error::CoincidentPoints);
    }
    let (h0, h1) = hankel1_01(k * r)?;
    Ok((0.25 * I * h0, -0.25 * I * k * h1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() <= tol * b.norm().max(1e-300)
    }

    #[test]
    fn branch_examples() {
        assert_eq!(sqrt_upper(c(4.0, 0.0)), c(2.0, 0.0));
        assert!(close(sqrt_upper(c(-4.0, 0.0)), c(0.0, 2.0), 1e-15));
        assert!(close(sqrt_upper(c(-4.0, -0.0)), c(0.0, 2.0), 1e-15));
        assert!(close(sqrt_upper(c(0.0, 2.0)), c(1.0, 1.0), 1e-15));
        assert_eq!(plus_branch(c(-3.0, 0.0)), c(3.0, 0.0));
        assert_eq!(plus_branch(c(5.0, 2.0)), c(5.0, 2.0));
        assert_eq!(plus_branch(c(-1.0, 4.0)), c(1.0, -4.0));
        assert_eq!(plus_branch(c(0.0, -2.0)), c(0.0, 2.0));
    }

    #[test]
    fn region_boundaries_agree() {
        for &r in &[SERIES_RADIUS, ASYMPTOTIC_RADIUS] {
            for j in 0..=8 {
                let th = PI * j as f64 / 8.0;
                let z = c(r * th.cos(), r * th.sin());
                let lo = z * (1.0 - 1e-12);
                let hi = z * (1.0 + 1e-12);
                let (a0, a1) = hankel1_01(lo).unwrap();
                let (b0, b1) = hankel1_01(hi).unwrap();
                // first-order step across the gap: H0' = -H1, H1' = H0 - H1/z
                let dz = hi - lo;
                assert!(close(a0 - a1 * dz, b0, 1e-12), "H0 jump at {z}");
                assert!(close(a1 + (a0 - a1 / lo) * dz, b1, 1e-12), "H1 jump at {z}");
            }
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(matches!(hankel1(0, c(0.0, 0.0)), Err(Error::Domain(_))));
        assert!(matches!(hankel1(0, c(1.0, -0.5)), Err(Error::Domain(_))));
        assert!(matches!(hankel1(3, c(1.0, 0.0)), Err(Error::Domain(_))));
        assert!(hankel1(0, c(1.0, -1e-14)).is_ok());
    }
}
