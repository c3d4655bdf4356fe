//! Named measures: the explicit constructions used throughout the tests and
//! the CLI.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::measure::{Atom, DensityPiece, MeasureMeta, SpectralMeasure};

pub const COUNTEREXAMPLE_K_MAX: u32 = 60;
pub const NONERGODIC_K_MAX: u32 = 40;

fn meta(name: &str, tail: Option<f64>) -> MeasureMeta {
    MeasureMeta {
        name: Some(name.to_string()),
        truncation_tail: tail,
    }
}

/// G(x) = 2^{-k} on (2^{-(k+1)}, 2^{-k}], k ≥ 1: atoms of mass 2^{-k} at
/// 2^{-k} for k = 1..=k_max. Var(S_{2^r})/2^r converges while Var(S_n)/n
/// does not.
pub fn counterexample(k_max: u32) -> Result<SpectralMeasure> {
    if !(8..=1000).contains(&k_max) {
        return Err(Error::domain(format!(
            "counterexample needs 8 <= k_max <= 1000, got {k_max}"
        )));
    }
    let atoms = (1..=k_max)
        .map(|k| {
            let x = 2f64.powi(-(k as i32));
            Atom { y: x, mass: x }
        })
        .collect();
    Ok(SpectralMeasure::new(0.0, atoms, vec![])?.with_meta(meta("counterexample", Some(2f64.powi(-(k_max as i32))))))
}

/// Density scale·(2-γ)·y^{1-γ} on (0, π], so that G(x) = scale·x^{2-γ}.
pub fn power_law(gamma: f64, scale: f64) -> Result<SpectralMeasure> {
    if !(gamma > 0.0 && gamma < 2.0) {
        return Err(Error::domain(format!("power_law needs gamma in (0, 2), got {gamma}")));
    }
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::domain(format!("power_law needs scale > 0, got {scale}")));
    }
    let piece = DensityPiece::power(scale * (2.0 - gamma), 1.0 - gamma, 0.0, PI)?;
    Ok(SpectralMeasure::new(0.0, vec![], vec![piece])?.with_meta(meta("power", None)))
}

/// Flat spectrum with unit variance: power_law(1, 1/π).
pub fn white_noise() -> SpectralMeasure {
    let piece = DensityPiece::power(1.0 / PI, 0.0, 0.0, PI).expect("valid piece");
    SpectralMeasure::new(0.0, vec![], vec![piece])
        .expect("valid measure")
        .with_meta(meta("whitenoise", None))
}

/// G(x) = x²: density 2y on (0, π]. Var(S_n) = 4 ln n + O(1).
pub fn quadratic() -> SpectralMeasure {
    let piece = DensityPiece::power(2.0, 1.0, 0.0, PI).expect("valid piece");
    SpectralMeasure::new(0.0, vec![], vec![piece])
        .expect("valid measure")
        .with_meta(meta("quadratic", None))
}

/// Atoms of mass 4^{-k} at 2π·2^{-k}, k = 2..=k_max: bounded along n = 2^j,
/// unbounded along the full sequence.
pub fn nonergodic(k_max: u32) -> Result<SpectralMeasure> {
    if !(8..=500).contains(&k_max) {
        return Err(Error::domain(format!(
            "nonergodic needs 8 <= k_max <= 500, got {k_max}"
        )));
    }
    let atoms = (2..=k_max)
        .map(|k| Atom {
            y: 2.0 * PI * 2f64.powi(-(k as i32)),
            mass: 4f64.powi(-(k as i32)),
        })
        .collect();
    // Σ_{k > k_max} 4^{-k} = 4^{-k_max}/3
    let tail = 4f64.powi(-(k_max as i32)) / 3.0;
    Ok(SpectralMeasure::new(0.0, atoms, vec![])?.with_meta(meta("nonergodic", Some(tail))))
}

/// Copy of `base` with `a` added to the origin atom.
pub fn with_origin_atom(base: &SpectralMeasure, a: f64) -> Result<SpectralMeasure> {
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::domain(format!("origin atom must be > 0, got {a}")));
    }
    Ok(base.add_origin_atom(a))
}

/// (name, description) of every gallery entry addressable from the CLI.
pub const CATALOGUE: [(&str, &str); 5] = [
    (
        "counterexample",
        "atoms 2^-k at 2^-k (k=1..k_max, default 60): dyadic Var/n converges, full sequence does not",
    ),
    (
        "power",
        "density scale*(2-gamma)*y^(1-gamma), G(x)=scale*x^(2-gamma); params gamma, scale (default 1)",
    ),
    ("quadratic", "density 2y, G(x)=x^2: Var(S_n) = 4 ln n + O(1)"),
    (
        "nonergodic",
        "atoms 4^-k at 2*pi*2^-k (k=2..k_max, default 40): sup_k Var(S_2^k) finite, sup_n Var(S_n) infinite",
    ),
    (
        "whitenoise",
        "flat density 1/pi (power gamma=1, scale=1/pi): Var(S_n) = n",
    ),
];

/// Builds a gallery measure from its name and `key=value` parameters.
pub fn by_name(name: &str, params: &[(String, f64)]) -> Result<SpectralMeasure> {
    let get = |key: &str| params.iter().find(|(k, _)| k == key).map(|(_, v)| *v);
    let allowed: &[&str] = match name {
        "counterexample" | "nonergodic" => &["k_max"],
        "power" => &["gamma", "scale"],
        "quadratic" | "whitenoise" => &[],
        other => {
            return Err(Error::validation(
                "measure",
                format!("unknown gallery measure `{other}`"),
            ))
        }
    };
    if let Some((k, _)) = params.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
        return Err(Error::validation(
            "measure",
            format!("`{name}` does not take parameter `{k}`"),
        ));
    }
    let k_max = |default: u32| -> Result<u32> {
        match get("k_max") {
            None => Ok(default),
            Some(v) if v.fract() == 0.0 && v >= 0.0 && v <= u32::MAX as f64 => Ok(v as u32),
            Some(v) => Err(Error::validation(
                "measure",
                format!("k_max must be an integer, got {v}"),
            )),
        }
    };
    match name {
        "counterexample" => counterexample(k_max(COUNTEREXAMPLE_K_MAX)?),
        "nonergodic" => nonergodic(k_max(NONERGODIC_K_MAX)?),
        "power" => {
            let gamma = get("gamma").ok_or_else(|| Error::validation("measure", "power needs gamma=<value>"))?;
            power_law(gamma, get("scale").unwrap_or(1.0))
        }
        "quadratic" => Ok(quadratic()),
        _ => Ok(white_noise()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fejer::variance_spectral;

    #[test]
    fn counterexample_values() {
        let m = counterexample(60).unwrap();
        assert_eq!(m.g_eval(0.3).unwrap(), 0.5);
        assert_eq!(m.g_eval(0.25).unwrap(), 0.5 - 2f64.powi(-60));
        assert_eq!(m.total_mass(), 1.0 - 2f64.powi(-60));
        assert_eq!(m.meta().truncation_tail, Some(2f64.powi(-60)));
        assert!(counterexample(7).is_err());
    }

    #[test]
    fn power_law_values() {
        let m = power_law(0.5, 1.0).unwrap();
        assert!((m.g_eval(0.25).unwrap() - 0.125).abs() < 1e-15);
        let wn = power_law(1.0, 1.0 / PI).unwrap();
        assert!((wn.g_eval(1.0).unwrap() - 1.0 / PI).abs() < 1e-15);
        assert!(power_law(2.0, 1.0).is_err());
        assert!(power_law(0.5, 0.0).is_err());
    }

    #[test]
    fn quadratic_values() {
        let q = quadratic();
        assert!((q.g_eval(PI).unwrap() - PI * PI).abs() < 1e-13);
        assert!((q.autocovariance(1).unwrap() + 4.0).abs() < 1e-13);
    }

    #[test]
    fn nonergodic_values() {
        let m = nonergodic(40).unwrap();
        let want: f64 = (2..=40).map(|k| 4f64.powi(-k)).sum();
        assert!((m.total_mass() - want).abs() < 1e-16);
        // geometric series: Σ_{k≥2} 4^{-k} = 1/12
        assert!((m.total_mass() - 1.0 / 12.0).abs() < 1e-15);
        assert!(m.atoms().iter().all(|a| a.y <= PI / 2.0));
    }

    #[test]
    fn origin_atom() {
        let m = with_origin_atom(&white_noise(), 0.7).unwrap();
        assert!((m.total_mass() - 1.7).abs() < 1e-15);
        for n in [1u64, 3, 100] {
            let nf = n as f64;
            assert!((variance_spectral(&m, n).unwrap() - (0.7 * nf * nf + nf)).abs() < 1e-9 * nf * nf);
        }
        assert!(with_origin_atom(&white_noise(), 0.0).is_err());
    }

    #[test]
    fn truncation_robustness() {
        let (a, b) = (counterexample(30).unwrap(), counterexample(60).unwrap());
        for n in [1u64, 17, 1024, 4096] {
            let d = (variance_spectral(&a, n).unwrap() - variance_spectral(&b, n).unwrap()).abs();
            // the dropped atoms carry mass < 2^-30 and I_n ≤ n²
            assert!(d <= 2f64.powi(-30) * (n * n) as f64, "n={n} d={d}");
        }
        let (a, b) = (nonergodic(20).unwrap(), nonergodic(40).unwrap());
        for n in [1u64, 17, 1024] {
            let d = (variance_spectral(&a, n).unwrap() - variance_spectral(&b, n).unwrap()).abs();
            assert!(d <= 2f64.powi(-40) * (n * n) as f64, "n={n} d={d}");
        }
    }

    #[test]
    fn lookup_by_name() {
        let p = by_name("power", &[("gamma".into(), 0.5), ("scale".into(), 2.0)]).unwrap();
        assert!((p.g_eval(1.0).unwrap() - 2.0).abs() < 1e-15);
        assert!(by_name("power", &[]).is_err());
        assert!(by_name("quadratic", &[("k_max".into(), 3.0)]).is_err());
        assert!(by_name("nope", &[]).is_err());
        assert_eq!(
            by_name("counterexample", &[("k_max".into(), 20.0)])
                .unwrap()
                .atoms()
                .len(),
            20
        );
    }
}
