//! Quadrature building blocks: Gauss-Legendre and Gauss-Jacobi rules on
//! [0, 1], and an adaptive 15-point Gauss-Kronrod integrator.

use std::collections::BinaryHeap;
use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// A fixed rule on [0, 1].
#[derive(Debug, Clone)]
pub(crate) struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    /// ∫_a^b f(y) dy with the rule mapped affinely onto [a, b].
    #[cfg(test)]
    pub fn apply<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> f64 {
        let h = b - a;
        let mut acc = 0.0;
        for (&u, &w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(a + h * u);
        }
        acc * h
    }
}

/// Gauss rule from the three-term recurrence of monic orthogonal polynomials
/// on [-1, 1] (Golub-Welsch), mapped to [0, 1]. `mu0` is the total weight in
/// the [0, 1] variable.
fn golub_welsch(diag: &[f64], offdiag: &[f64], mu0: f64) -> Rule {
    let q = diag.len();
    let mut jac = DMatrix::<f64>::zeros(q, q);
    for i in 0..q {
        jac[(i, i)] = diag[i];
        if i + 1 < q {
            jac[(i, i + 1)] = offdiag[i];
            jac[(i + 1, i)] = offdiag[i];
        }
    }
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..q)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            ((1.0 + eig.eigenvalues[i]) / 2.0, mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Rule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    }
}

/// Gauss-Legendre rule with `q` nodes on [0, 1] (Newton iteration on P_q).
pub(crate) fn legendre_rule(q: usize) -> Rule {
    assert!(q >= 1);
    let mut nodes = vec![0.0; q];
    let mut weights = vec![0.0; q];
    let m = q.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (q as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=q {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = q as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = (1.0 - x) / 2.0;
        nodes[q - 1 - i] = (1.0 + x) / 2.0;
        weights[i] = w / 2.0;
        weights[q - 1 - i] = w / 2.0;
    }
    Rule { nodes, weights }
}

/// Gauss-Jacobi rule with `q` nodes for the weight u^p on [0, 1], p > -1.
/// Integrates u^p · poly(u) exactly for polynomials of degree < 2q.
pub(crate) fn jacobi_rule(p: f64, q: usize) -> Rule {
    assert!(p > -1.0 && q >= 1);
    // Jacobi weight (1-t)^a (1+t)^b on [-1, 1] with a = 0, b = p.
    let (a, b) = (0.0_f64, p);
    let ab = a + b;
    let mut diag = Vec::with_capacity(q);
    let mut off = Vec::with_capacity(q.saturating_sub(1));
    for k in 0..q {
        let kf = k as f64;
        if k == 0 {
            diag.push((b - a) / (ab + 2.0));
        } else {
            let s = 2.0 * kf + ab;
            diag.push((b * b - a * a) / (s * (s + 2.0)));
        }
        if k + 1 < q {
            let j = kf + 1.0;
            let s = 2.0 * j + ab;
            let num = 4.0 * j * (j + a) * (j + b) * (j + ab);
            let den = s * s * (s + 1.0) * (s - 1.0);
            off.push((num / den).sqrt());
        }
    }
    golub_welsch(&diag, &off, 1.0 / (p + 1.0))
}

/// Cached 16-point Gauss-Legendre rule.
pub(crate) fn gl16() -> &'static Rule {
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| legendre_rule(16))
}

/// ∫_0^b y^p f(y) dy for smooth f, using Gauss-Jacobi rules of two orders.
/// Returns (value, |difference between orders|).
pub(crate) fn singular_power_panel<F: Fn(f64) -> f64>(f: F, p: f64, b: f64) -> (f64, f64) {
    let coarse = jacobi_rule(p, 20);
    let fine = jacobi_rule(p, 28);
    let scale = b.powf(p + 1.0);
    let eval = |rule: &Rule| {
        rule.nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&u, &w)| w * f(b * u))
            .sum::<f64>()
            * scale
    };
    let v_fine = eval(&fine);
    (v_fine, (v_fine - eval(&coarse)).abs())
}

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_838_258_730,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

/// One G7K15 panel: (value, error estimate, ∫|f|).
fn qk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = fc * WGK[7];
    let mut res_g = fc * WG[3];
    let mut res_abs = fc.abs() * WGK[7];
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = res_k * 0.5;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    (res_k * half, err, res_abs)
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Estimate {
    pub value: f64,
    pub error: f64,
    pub abs: f64,
}

impl std::ops::AddAssign for Estimate {
    fn add_assign(&mut self, o: Self) {
        self.value += o.value;
        self.error += o.error;
        self.abs += o.abs;
    }
}

/// Bisections allowed: the larger of this and three per initial panel, so an
/// integral split at the n zeros of an oscillating kernel ends with at most
/// about 4n panels.
const MIN_SPLITS: usize = 4000;

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    abs: f64,
}

impl PartialEq for Panel {
    fn eq(&self, o: &Self) -> bool {
        self.error.total_cmp(&o.error).is_eq()
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Panel {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&o.error)
    }
}

fn panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let (value, error, abs) = qk15(f, a, b);
    Panel {
        a,
        b,
        value,
        error,
        abs,
    }
}

/// Globally adaptive G7K15 over consecutive panels: the panel with the largest
/// error is bisected until the summed error meets max(abs_tol, rel_tol·∫|f|)
/// or the subdivision budget is spent.
pub(crate) fn adaptive_panels<F: Fn(f64) -> f64>(f: F, breaks: &[f64], abs_tol: f64, rel_tol: f64) -> Estimate {
    let mut heap: BinaryHeap<Panel> = breaks
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| panel(&f, w[0], w[1]))
        .collect();
    let (mut error, mut abs) = (0.0, 0.0);
    for p in heap.iter() {
        error += p.error;
        abs += p.abs;
    }
    let budget = MIN_SPLITS.max(3 * heap.len());
    for _ in 0..budget {
        if error <= abs_tol.max(rel_tol * abs) {
            break;
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            heap.push(worst);
            break;
        }
        let (l, r) = (panel(&f, worst.a, mid), panel(&f, mid, worst.b));
        error += l.error + r.error - worst.error;
        abs += l.abs + r.abs - worst.abs;
        heap.push(l);
        heap.push(r);
    }
    let mut total = Estimate::default();
    let mut panels: Vec<Panel> = heap.into_vec();
    panels.sort_by(|x, y| x.a.total_cmp(&y.a));
    let values: Vec<f64> = panels.iter().map(|p| p.value).collect();
    total.value = neumaier_sum(values);
    for p in &panels {
        total.error += p.error;
        total.abs += p.abs;
    }
    total
}

/// Adaptive G7K15 over [a, b].
pub(crate) fn adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Estimate {
    if a == b {
        return Estimate::default();
    }
    adaptive_panels(f, &[a, b], abs_tol, rel_tol)
}

/// Fails with a numeric error when the accumulated estimate misses tolerance.
pub(crate) fn check(est: Estimate, abs_tol: f64, rel_tol: f64, context: &str) -> Result<f64> {
    let allowed = abs_tol.max(rel_tol * est.abs);
    // per-panel estimates are pessimistic; allow a modest global factor
    if est.error.is_finite() && est.value.is_finite() && est.error <= 100.0 * allowed {
        Ok(est.value)
    } else {
        Err(Error::Numeric {
            context: context.to_string(),
            achieved: est.error,
        })
    }
}

/// Compensated (Neumaier) summation.
pub(crate) fn neumaier_sum<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for x in it {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        for q in [1usize, 2, 5, 16, 24] {
            let rule = legendre_rule(q);
            assert!((rule.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            for deg in 0..(2 * q) {
                let got = rule.apply(|x| x.powi(deg as i32), 0.0, 1.0);
                let want = 1.0 / (deg as f64 + 1.0);
                assert!((got - want).abs() < 1e-13, "q={q} deg={deg} got={got}");
            }
        }
    }

    #[test]
    fn jacobi_moments() {
        for &p in &[-0.75, -0.5, 0.0, 0.5, 1.3] {
            let rule = jacobi_rule(p, 12);
            for deg in 0..24 {
                let got: f64 = rule
                    .nodes
                    .iter()
                    .zip(&rule.weights)
                    .map(|(&u, &w)| w * u.powi(deg))
                    .sum();
                let want = 1.0 / (p + deg as f64 + 1.0);
                assert!((got - want).abs() < 1e-13, "p={p} deg={deg} got={got} want={want}");
            }
        }
    }

    #[test]
    fn singular_panel_matches_closed_form() {
        // ∫_0^1 y^{-1/2} cos(y) dy = sqrt(2π) C(sqrt(2/π)) (Fresnel); use series instead
        let series: f64 = (0..30)
            .map(|j| {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                let fact: f64 = (1..=2 * j).map(|i| i as f64).product();
                sign / (fact * (2.0 * j as f64 + 0.5))
            })
            .sum();
        let (v, err) = singular_power_panel(|y| y.cos(), -0.5, 1.0);
        assert!((v - series).abs() < 1e-14, "{v} vs {series}");
        assert!(err < 1e-12);
    }

    #[test]
    fn adaptive_handles_oscillation() {
        let est = adaptive(|x| (50.0 * x).sin().powi(2), 0.0, std::f64::consts::PI, 1e-12, 1e-13);
        assert!((est.value - std::f64::consts::PI / 2.0).abs() < 1e-11);
        let est = adaptive(|x| x.sqrt(), 0.0, 1.0, 1e-12, 1e-13);
        assert!((est.value - 2.0 / 3.0).abs() < 1e-11);
    }

    #[test]
    fn neumaier_recovers_cancellation() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(neumaier_sum(xs), 2.0);
    }
}
