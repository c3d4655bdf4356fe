//! Var(S_n) from a folded spectral measure.
//!
//! Two independent routes are provided:
//! * spectral: Var(S_n) = ∫_[0,π] I_n(y) G(dy) with the Fejér kernel
//!   I_n(y) = sin²(ny/2) / sin²(y/2);
//! * covariance: Var(S_n) = n r_0 + 2 Σ_{k=1}^{n-1} (n-k) r_k.
//!
//! plus the two-sided bound
//! (4/π²) n² G(1/n) ≤ Var(S_n) ≤ G(π) + (π²/4) n² G(A/n) + π² ∫_{A/n}^π G(y)/y³ dy.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{SpectralMeasure, DENSITY_ABS_TOL, DENSITY_REL_TOL};
use crate::quadrature::{self, Estimate};

/// Below this value of n·|y| the kernel is evaluated by its Taylor expansion.
const SMALL_ARG: f64 = 1e-6;

/// Fejér kernel without domain checks; n as a float.
#[inline]
pub(crate) fn kernel(n: f64, y: f64) -> f64 {
    let n2 = n * n;
    if y.abs() * n < SMALL_ARG {
        return n2 * (1.0 - (n2 - 1.0) * y * y / 12.0);
    }
    let ratio = (0.5 * n * y).sin() / (0.5 * y).sin();
    (ratio * ratio).min(n2)
}

/// I_n(y) = sin²(ny/2) / sin²(y/2) on [0, π], with I_n(0) = n².
pub fn fejer_kernel(n: u64, y: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("the Fejér kernel needs n >= 1"));
    }
    if !(0.0..=PI).contains(&y) {
        return Err(Error::domain(format!(
            "the Fejér kernel is evaluated on [0, pi], got y = {y}"
        )));
    }
    Ok(kernel(n as f64, y))
}

fn check_n(n: u64) -> Result<()> {
    if n == 0 {
        Err(Error::domain("partial sums need n >= 1"))
    } else {
        Ok(())
    }
}

/// Var(S_n) = ∫ I_n dG. Density pieces are cut at the zeros 2πj/n of the
/// kernel before adaptive refinement.
pub fn variance_spectral(m: &SpectralMeasure, n: u64) -> Result<f64> {
    check_n(n)?;
    let nf = n as f64;
    let mut parts = Vec::with_capacity(m.atoms().len() + 2);
    parts.push(m.atom_at_zero() * nf * nf);
    parts.extend(m.atoms().iter().map(|a| a.mass * kernel(nf, a.y)));
    let mut est = Estimate::default();
    for piece in m.density() {
        est += piece.integrate_with(|y| kernel(nf, y), 2.0 * PI / nf);
    }
    if !m.density().is_empty() {
        parts.push(quadrature::check(
            est,
            DENSITY_ABS_TOL,
            DENSITY_REL_TOL,
            &format!("Fejér integral at n = {n}"),
        )?);
    }
    Ok(quadrature::neumaier_sum(parts))
}

/// n r_0 + 2 Σ_{k=1}^{n-1} (n-k) r_k, given r_0..r_{n-1}.
pub(crate) fn triangular_sum(r: &[f64], n: u64) -> f64 {
    let n_us = n as usize;
    debug_assert!(r.len() >= n_us);
    let nf = n as f64;
    quadrature::neumaier_sum(std::iter::once(nf * r[0]).chain((1..n_us).map(|k| 2.0 * (nf - k as f64) * r[k])))
}

/// Var(S_n) by the covariance sum; the oracle for [`variance_spectral`].
pub fn variance_covariance(m: &SpectralMeasure, n: u64) -> Result<f64> {
    check_n(n)?;
    let r = m.autocovariances(n as usize - 1)?;
    Ok(triangular_sum(&r, n))
}

/// Covariance-route variances for several n, sharing one autocovariance table.
pub fn variance_covariance_many(m: &SpectralMeasure, ns: &[u64]) -> Result<Vec<f64>> {
    let Some(&n_max) = ns.iter().max() else {
        return Ok(Vec::new());
    };
    if ns.contains(&0) {
        return Err(Error::domain("partial sums need n >= 1"));
    }
    let r = m.autocovariances(n_max as usize - 1)?;
    Ok(ns.iter().map(|&n| triangular_sum(&r, n)).collect())
}

/// Spectral-route variances for several n, evaluated in parallel.
pub fn variance_spectral_many(m: &SpectralMeasure, ns: &[u64]) -> Result<Vec<f64>> {
    ns.par_iter().map(|&n| variance_spectral(m, n)).collect()
}

/// Var(S_1), ..., Var(S_{n_max}).
///
/// Purely atomic measures use the spectral route at every n. Otherwise the
/// autocovariances r_0..r_{n_max-1} are computed once and the variances
/// follow from Var(S_{n+1}) = Var(S_n) + r_0 + 2 Σ_{k=1}^{n} r_k.
pub fn variance_profile(m: &SpectralMeasure, n_max: u64) -> Result<Vec<f64>> {
    check_n(n_max)?;
    if m.is_atomic() {
        let ns: Vec<u64> = (1..=n_max).collect();
        return variance_spectral_many(m, &ns);
    }
    let r = m.autocovariances(n_max as usize - 1)?;
    let mut out = Vec::with_capacity(n_max as usize);
    // compensated running sums of Var and of Σ r_k
    let (mut var, mut var_c) = (0.0_f64, 0.0_f64);
    let (mut tail, mut tail_c) = (0.0_f64, 0.0_f64);
    for n in 0..n_max as usize {
        if n > 0 {
            kahan_add(&mut tail, &mut tail_c, r[n]);
        }
        let inc = r[0] + 2.0 * (tail + tail_c);
        kahan_add(&mut var, &mut var_c, inc);
        out.push(var + var_c);
    }
    Ok(out)
}

fn kahan_add(sum: &mut f64, comp: &mut f64, x: f64) {
    let t = *sum + x;
    if sum.abs() >= x.abs() {
        *comp += (*sum - t) + x;
    } else {
        *comp += (x - t) + *sum;
    }
    *sum = t;
}

/// Lower and upper bounds for Var(S_n) with the split point A/n.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub n: u64,
    #[serde(rename = "A")]
    pub a: f64,
    pub lower: f64,
    pub variance: f64,
    pub upper: f64,
}

impl BoundsReport {
    /// lower ≤ variance ≤ upper up to `rel_slack` · max(1, variance).
    pub fn holds(&self, rel_slack: f64) -> bool {
        let slack = rel_slack * self.variance.abs().max(1.0);
        self.lower <= self.variance + slack && self.variance <= self.upper + slack
    }
}

/// Evaluates both bounds next to the spectral variance. Requires 0 < A ≤ n.
pub fn sandwich(m: &SpectralMeasure, n: u64, a: f64) -> Result<BoundsReport> {
    check_n(n)?;
    let nf = n as f64;
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::domain(format!("A must be positive, got {a}")));
    }
    if a > nf {
        return Err(Error::domain(format!("A = {a} exceeds n = {n}")));
    }
    let variance = variance_spectral(m, n)?;
    let lower = 4.0 / (PI * PI) * nf * nf * m.g_unchecked(1.0 / nf);

    let split = a / nf;
    let mut breaks = vec![split];
    breaks.extend(m.g_breakpoints().into_iter().filter(|&b| b > split && b < PI));
    breaks.push(PI);
    let est = quadrature::adaptive_panels(|y| m.g_unchecked(y) / (y * y * y), &breaks, 1e-12, 1e-13);
    let tail = quadrature::check(est, 1e-12, 1e-13, "sandwich tail integral")?;
    let upper = m.total_mass() + PI * PI / 4.0 * nf * nf * m.g_unchecked(split) + PI * PI * tail;
    Ok(BoundsReport {
        n,
        a,
        lower,
        variance,
        upper,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{Atom, DensityPiece};

    fn white_noise() -> SpectralMeasure {
        SpectralMeasure::new(0.0, vec![], vec![DensityPiece::power(1.0 / PI, 0.0, 0.0, PI).unwrap()]).unwrap()
    }

    fn atom_at_pi() -> SpectralMeasure {
        SpectralMeasure::new(0.0, vec![Atom { y: PI, mass: 1.0 }], vec![]).unwrap()
    }

    #[test]
    fn kernel_examples() {
        for n in [1u64, 2, 7, 1000] {
            assert_eq!(fejer_kernel(n, 0.0).unwrap(), (n * n) as f64);
        }
        for &y in &[1e-9, 0.1, 1.0, 2.5, PI] {
            assert!((fejer_kernel(1, y).unwrap() - 1.0).abs() < 1e-14);
        }
        // I_2(y) = 4 cos²(y/2)
        assert!((fejer_kernel(2, PI / 2.0).unwrap() - 2.0).abs() < 1e-14);
        assert!(fejer_kernel(0, 0.1).is_err());
        assert!(fejer_kernel(3, -0.1).is_err());
        assert!(fejer_kernel(3, 4.0).is_err());
    }

    #[test]
    fn kernel_expansion_is_continuous() {
        for n in [3.0, 1e3, 1e6] {
            let y0 = SMALL_ARG / n;
            let below = kernel(n, y0 * (1.0 - 1e-9));
            let above = kernel(n, y0 * (1.0 + 1e-9));
            assert!(((below - above) / above).abs() < 1e-9, "n={n}");
        }
    }

    #[test]
    fn spectral_examples() {
        let wn = white_noise();
        for n in [1u64, 2, 5, 64, 1000] {
            let v = variance_spectral(&wn, n).unwrap();
            assert!((v - n as f64).abs() < 1e-10 * n as f64, "n={n} v={v}");
        }
        let a = atom_at_pi();
        assert!(variance_spectral(&a, 4).unwrap().abs() < 1e-20);
        assert!((variance_spectral(&a, 5).unwrap() - 1.0).abs() < 1e-14);
        let origin = SpectralMeasure::new(0.3, vec![], vec![]).unwrap();
        assert!((variance_spectral(&origin, 9).unwrap() - 0.3 * 81.0).abs() < 1e-13);
        assert!(variance_spectral(&wn, 0).is_err());
    }

    #[test]
    fn covariance_examples() {
        assert!((variance_covariance(&white_noise(), 7).unwrap() - 7.0).abs() < 1e-12);
        assert!(variance_covariance(&atom_at_pi(), 4).unwrap().abs() < 1e-12);
        let q = SpectralMeasure::new(0.0, vec![], vec![DensityPiece::power(2.0, 1.0, 0.0, PI).unwrap()]).unwrap();
        assert!((variance_covariance(&q, 2).unwrap() - (2.0 * PI * PI - 8.0)).abs() < 1e-12);
    }

    #[test]
    fn profile_matches_direct() {
        let q = SpectralMeasure::new(
            0.0,
            vec![Atom { y: 1.0, mass: 0.5 }],
            vec![DensityPiece::power(2.0, 1.0, 0.0, PI).unwrap()],
        )
        .unwrap();
        let prof = variance_profile(&q, 50).unwrap();
        for n in 1..=50u64 {
            let direct = variance_covariance(&q, n).unwrap();
            assert!((prof[n as usize - 1] - direct).abs() < 1e-10 * direct.max(1.0));
        }
    }

    #[test]
    fn sandwich_examples() {
        let wn = white_noise();
        let b = sandwich(&wn, 10, 1.0).unwrap();
        assert!((b.lower - 40.0 / PI.powi(3)).abs() < 1e-12);
        assert!(b.holds(1e-9));
        let e = sandwich(&SpectralMeasure::empty(), 5, 2.0).unwrap();
        assert_eq!((e.lower, e.variance, e.upper), (0.0, 0.0, 0.0));
        assert!(sandwich(&wn, 4, 5.0).is_err());
        assert!(sandwich(&wn, 4, 0.0).is_err());
        // upper bound for white noise: 1 + πn/4 + π(n - 1/π)
        let n = 10.0;
        assert!((b.upper - (1.0 + PI * n / 4.0 + PI * n - 1.0)).abs() < 1e-9);
    }
}
