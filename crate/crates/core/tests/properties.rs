//! Invariants checked over random inputs and over the whole gallery.

use std::f64::consts::PI;

use proptest::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use specvar::asymptotics::{
    c_gamma, d_gamma, gamma_fit, theorem_check, RegularVariationModel, ScanReport, ScanRow, ScanSummary, SlowlyVarying,
};
use specvar::gallery;
use specvar::measure::toeplitz_min_eigenvalue;
use specvar::{fejer_kernel, variance_profile, variance_spectral, Atom, DensityPiece, SpectralMeasure};

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

fn all_gallery() -> Vec<(&'static str, SpectralMeasure)> {
    vec![
        ("counterexample", gallery::counterexample(60).unwrap()),
        ("power(0.5)", gallery::power_law(0.5, 1.0).unwrap()),
        ("power(1.5)", gallery::power_law(1.5, 1.0).unwrap()),
        ("quadratic", gallery::quadratic()),
        ("nonergodic", gallery::nonergodic(40).unwrap()),
        ("whitenoise", gallery::white_noise()),
    ]
}

#[test]
fn kernel_bounds_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for _ in 0..100_000 {
        let n = 1 + rng.next_u64() % 100_000;
        // half the samples concentrate near the origin
        let y = if rng.next_u64() % 2 == 0 {
            PI * uniform(&mut rng)
        } else {
            uniform(&mut rng) / n as f64
        };
        let v = fejer_kernel(n, y).unwrap();
        let nf = n as f64;
        assert!(v >= 0.0);
        assert!(
            v <= (nf * nf).min(PI * PI / (y * y)) * (1.0 + 1e-12),
            "n={n} y={y} I={v}"
        );
        if y < 1.0 / nf {
            assert!(v >= 4.0 * nf * nf / (PI * PI) * (1.0 - 1e-12), "n={n} y={y} I={v}");
        }
    }
}

#[test]
fn toeplitz_spot_check() {
    for (name, m) in all_gallery() {
        let r = m.autocovariances(63).unwrap();
        for n in [1usize, 2, 8, 32, 64] {
            let lam = toeplitz_min_eigenvalue(&r[..n]);
            assert!(lam >= -1e-8, "{name}: n={n} min eigenvalue {lam}");
        }
    }
}

#[test]
fn mass_consistency() {
    for (name, m) in all_gallery() {
        let r0 = m.autocovariance(0).unwrap();
        let g = m.g_eval(PI).unwrap();
        let tol = if m.is_atomic() { 1e-12 } else { 1e-9 };
        assert!((r0 - g).abs() <= tol * g.max(1.0), "{name}: {r0} vs {g}");
    }
}

#[test]
fn variance_is_linear_in_the_measure() {
    for (name, m) in all_gallery() {
        let doubled = m.scaled(2.0).unwrap();
        for n in [1u64, 7, 100, 1000] {
            let (a, b) = (
                variance_spectral(&m, n).unwrap(),
                variance_spectral(&doubled, n).unwrap(),
            );
            assert!((b - 2.0 * a).abs() <= 1e-12 * b, "{name} n={n}");
        }
    }
}

#[test]
fn robinson_bound_on_finite_examples() {
    let finite = [
        SpectralMeasure::new(0.0, vec![Atom { y: 1.0, mass: 1.0 }], vec![]).unwrap(),
        SpectralMeasure::new(
            0.0,
            vec![Atom { y: 0.3, mass: 0.2 }, Atom { y: PI, mass: 0.5 }],
            vec![DensityPiece::power(0.7, 2.5, 0.0, PI).unwrap()],
        )
        .unwrap(),
    ];
    for m in &finite {
        let rob = m.robinson_integral();
        assert!(rob.is_finite());
        let bound = rob * PI * PI + m.total_mass();
        let profile = variance_profile(m, 1 << 14).unwrap();
        let sup = profile.iter().copied().fold(0.0, f64::max);
        assert!(sup <= bound, "sup {sup} > {bound}");
    }
    assert!(gallery::quadratic().robinson_integral().is_infinite());
    // the untruncated counterexample diverges; truncations grow like 2^k_max
    let r30 = gallery::counterexample(30).unwrap().robinson_integral();
    let r60 = gallery::counterexample(60).unwrap().robinson_integral();
    assert!(r60 > 2f64.powi(29) * r30);
}

#[test]
fn g_ratio_is_one_on_the_power_family() {
    for (gamma, scale) in [(0.3, 1.0), (0.5, 2.0), (1.0, 0.5), (1.5, 1.0), (1.9, 3.0)] {
        let m = gallery::power_law(gamma, scale).unwrap();
        let model =
            RegularVariationModel::new(gamma, scale / c_gamma(gamma).unwrap(), SlowlyVarying::Constant).unwrap();
        let rep = theorem_check(&m, model, &[1, 2, 10, 100, 1000], 0.05).unwrap();
        for row in &rep.rows {
            assert!((row.g_ratio.unwrap() - 1.0).abs() < 1e-12, "gamma={gamma} n={}", row.n);
        }
    }
}

fn measure_strategy() -> impl Strategy<Value = SpectralMeasure> {
    (
        prop::collection::btree_map(1u32..10_000, 0.0f64..2.0, 0..6),
        prop::option::of((0.1f64..3.0, -0.9f64..3.0)),
        0.0f64..1.0,
    )
        .prop_map(|(atoms, power, a0)| {
            let atoms = atoms
                .into_iter()
                .map(|(i, mass)| Atom {
                    y: PI * i as f64 / 10_000.0,
                    mass,
                })
                .collect();
            let density = power
                .map(|(c, p)| vec![DensityPiece::power(c, p, 0.0, PI).unwrap()])
                .unwrap_or_default();
            SpectralMeasure::new(a0, atoms, density).unwrap()
        })
}

fn finite_f64() -> impl Strategy<Value = f64> {
    prop::num::f64::NORMAL | prop::num::f64::ZERO | prop::num::f64::SUBNORMAL
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn g_is_monotone(m in measure_strategy(), x1 in 0.0f64..=PI, x2 in 0.0f64..=PI) {
        let (lo, hi) = if x1 <= x2 { (x1, x2) } else { (x2, x1) };
        prop_assert!(m.g_eval(lo).unwrap() <= m.g_eval(hi).unwrap() + 1e-15);
    }

    #[test]
    fn measure_json_roundtrip(m in measure_strategy()) {
        let back = SpectralMeasure::from_json(&m.to_json().unwrap()).unwrap();
        prop_assert_eq!(back.atoms(), m.atoms());
        prop_assert_eq!(back.atom_at_zero(), m.atom_at_zero());
        for x in [0.0, 0.1, 1.0, PI] {
            prop_assert_eq!(back.g_eval(x).unwrap(), m.g_eval(x).unwrap());
        }
    }

    #[test]
    fn c_d_identity(gamma in 0.001f64..1.999) {
        let c = c_gamma(gamma).unwrap();
        let d = d_gamma(gamma).unwrap();
        let rhs = gamma / (2.0 - gamma) * 2f64.powf(gamma - 2.0) * d;
        prop_assert!((c - rhs).abs() <= 1e-12 * c.max(1.0));
    }

    #[test]
    fn gamma_fit_recovers_power_laws(g in 0.01f64..2.0, k0 in 0.01f64..100.0, scale in 0.01f64..100.0) {
        let pts: Vec<(u64, f64)> = (3..15).map(|r| (1u64 << r, k0 * ((1u64 << r) as f64).powf(g))).collect();
        let fit = gamma_fit(&pts).unwrap();
        prop_assert!((fit.gamma_hat - g).abs() < 1e-10);
        prop_assert!((fit.k0_hat / k0 - 1.0).abs() < 1e-10);
        prop_assert!(fit.residual < 1e-10);
        let scaled: Vec<(u64, f64)> = pts.iter().map(|(n, v)| (*n, scale * v)).collect();
        let fit2 = gamma_fit(&scaled).unwrap();
        prop_assert!((fit2.gamma_hat - fit.gamma_hat).abs() < 1e-10);
        prop_assert!((fit2.k0_hat / (scale * fit.k0_hat) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn scan_csv_roundtrip(rows in prop::collection::vec(
        (1u64..u64::MAX, finite_f64(), prop::option::of(finite_f64()), prop::option::of(finite_f64()),
         finite_f64(), finite_f64(), prop::option::of(finite_f64())),
        0..20,
    )) {
        let rows: Vec<ScanRow> = rows
            .into_iter()
            .map(|(n, variance, g_n, var_ratio, x, g_x, g_ratio)| ScanRow { n, variance, g_n, var_ratio, x, g_x, g_ratio })
            .collect();
        let report = ScanReport {
            model: None,
            rows,
            summary: ScanSummary { tolerance: 0.05, var_ratio: None, g_ratio: None },
        };
        let back = ScanReport::rows_from_csv(&report.to_csv()).unwrap();
        prop_assert_eq!(back, report.rows);
    }
}
