//! Regular-variation constants and finite-n diagnostics relating the growth
//! of Var(S_n) to the behaviour of G near the origin.
//!
//! With g(n) = n^γ L(n), Var(S_n) ~ K₀ g(n) is paired with
//! G(x) ~ C(γ) K₀ x^{2-γ} L(1/x), where C(γ) = Γ(1+γ) sin(γπ/2) / (π(2-γ)).
//! Every report here is evidence from a finite scan; none of them certifies a
//! limit.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fejer::{variance_profile, variance_spectral, variance_spectral_many};
use crate::measure::SpectralMeasure;
use crate::quadrature;
use crate::special::gamma as gamma_fn;

/// Default tolerance for "the last quartile has settled".
pub const DEFAULT_SETTLE_TOL: f64 = 0.05;

fn check_open_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma < 2.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("gamma must lie in (0, 2), got {gamma}")))
    }
}

/// C(γ) = Γ(1+γ) sin(γπ/2) / (π(2-γ)).
pub fn c_gamma(gamma: f64) -> Result<f64> {
    check_open_gamma(gamma)?;
    Ok(gamma_fn(1.0 + gamma) * (gamma * PI / 2.0).sin() / (PI * (2.0 - gamma)))
}

/// D(γ) = Γ(γ) 2^{2-γ} sin(γπ/2) / π.
pub fn d_gamma(gamma: f64) -> Result<f64> {
    check_open_gamma(gamma)?;
    Ok(gamma_fn(gamma) * 2f64.powf(2.0 - gamma) * (gamma * PI / 2.0).sin() / PI)
}

/// ∫₀^∞ sin²(y) / y^{1+γ} dy by quadrature.
///
/// [0, π] uses a Gauss-Jacobi rule for the y^{1-γ} behaviour at the origin;
/// [π, Y] is integrated period by period with Y = ⌈10⁴/(γπ)⌉π. Beyond Y the
/// integrand splits as ½y^{-1-γ} (exact tail Y^{-γ}/(2γ)) minus
/// ½cos(2y)y^{-1-γ}, whose tail is expanded by two integrations by parts;
/// the neglected remainder is below s(s+1)(s+2)·Y^{-s-2}/8 with s = 1+γ.
pub fn sin2_power_integral(gamma: f64) -> Result<f64> {
    check_open_gamma(gamma)?;
    let s = 1.0 + gamma;
    let sinc2 = |y: f64| {
        if y == 0.0 {
            1.0
        } else {
            let r = y.sin() / y;
            r * r
        }
    };
    let (head, head_err) = quadrature::singular_power_panel(sinc2, 1.0 - gamma, PI);

    let periods = (1e4 / (gamma * PI)).ceil() as u64;
    let breaks: Vec<f64> = (1..=periods).map(|j| j as f64 * PI).collect();
    let y_end = *breaks.last().expect("at least one period");
    let body = quadrature::adaptive_panels(|y| y.sin().powi(2) / y.powf(s), &breaks, 1e-13, 1e-13);

    // ∫_Y^∞ cos(2y) y^{-s} dy ≈ -sin(2Y)/(2Y^s) + s cos(2Y)/(4Y^{s+1}) + s(s+1) sin(2Y)/(8Y^{s+2})
    let (s2, c2) = (2.0 * y_end).sin_cos();
    let osc_tail = -s2 / (2.0 * y_end.powf(s))
        + s * c2 / (4.0 * y_end.powf(s + 1.0))
        + s * (s + 1.0) * s2 / (8.0 * y_end.powf(s + 2.0));
    let remainder = s * (s + 1.0) * (s + 2.0) / (8.0 * y_end.powf(s + 2.0));
    let tail = y_end.powf(-gamma) / (2.0 * gamma) - 0.5 * osc_tail;

    let err = head_err + body.error + remainder;
    if err > 1e-9 {
        return Err(Error::Numeric {
            context: format!("sin^2 power integral at gamma = {gamma}"),
            achieved: err,
        });
    }
    Ok(head + body.value + tail)
}

/// 1/C(γ) − 2^{2-γ}(2-γ)∫₀^∞ sin²y/y^{1+γ} dy; zero up to quadrature error.
pub fn quad_identity_residual(gamma: f64) -> Result<f64> {
    let c = c_gamma(gamma)?;
    let integral = sin2_power_integral(gamma)?;
    Ok(1.0 / c - 2f64.powf(2.0 - gamma) * (2.0 - gamma) * integral)
}

/// Slowly varying factor L.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SlowlyVarying {
    /// L ≡ 1
    Constant,
    /// L(x) = (ln(e + x))^a
    LogPower { a: f64 },
}

impl SlowlyVarying {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            SlowlyVarying::Constant => 1.0,
            SlowlyVarying::LogPower { a } => (std::f64::consts::E + x).ln().powf(a),
        }
    }

    /// Parses `const` or `logpow:<a>`.
    pub fn parse(text: &str) -> Result<Self> {
        match text.trim() {
            "const" | "constant" => Ok(SlowlyVarying::Constant),
            other => match other.strip_prefix("logpow:").map(str::parse::<f64>) {
                Some(Ok(a)) if a.is_finite() => Ok(SlowlyVarying::LogPower { a }),
                _ => Err(Error::validation(
                    "L",
                    format!("expected `const` or `logpow:<a>`, got `{text}`"),
                )),
            },
        }
    }
}

/// (γ, K₀, L): the model Var(S_n) ≈ K₀ n^γ L(n).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularVariationModel {
    gamma: f64,
    k0: f64,
    l: SlowlyVarying,
}

impl RegularVariationModel {
    pub fn new(gamma: f64, k0: f64, l: SlowlyVarying) -> Result<Self> {
        check_open_gamma(gamma)?;
        if !(k0.is_finite() && k0 > 0.0) {
            return Err(Error::domain(format!("K0 must be positive, got {k0}")));
        }
        Ok(Self { gamma, k0, l })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn k0(&self) -> f64 {
        self.k0
    }

    pub fn slowly_varying(&self) -> SlowlyVarying {
        self.l
    }

    /// g(n) = n^γ L(n).
    pub fn g(&self, n: f64) -> f64 {
        n.powf(self.gamma) * self.l.eval(n)
    }

    /// C(γ) K₀ x^{2-γ} L(1/x): the matching small-x profile of G.
    pub fn g_profile(&self, x: f64) -> f64 {
        c_gamma(self.gamma).expect("gamma validated") * self.k0 * x.powf(2.0 - self.gamma) * self.l.eval(1.0 / x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub n: u64,
    pub variance: f64,
    pub g_n: Option<f64>,
    pub var_ratio: Option<f64>,
    pub x: f64,
    #[serde(rename = "G_x")]
    pub g_x: f64,
    pub g_ratio: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnSummary {
    pub sup: f64,
    pub inf: f64,
    pub last: f64,
    /// Mean over the last quartile of rows.
    pub tail_mean: f64,
    /// Last-quartile values all lie within the tolerance of `tail_mean`.
    pub settled: bool,
    /// `settled` and `tail_mean` within the tolerance of 1.
    pub near_one: bool,
}

impl ColumnSummary {
    fn from_values(values: &[f64], tol: f64) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let sup = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let inf = values.iter().copied().fold(f64::INFINITY, f64::min);
        let q = values.len().div_ceil(4);
        let tail = &values[values.len() - q..];
        let tail_mean = tail.iter().sum::<f64>() / tail.len() as f64;
        let settled = tail.iter().all(|v| (v - tail_mean).abs() <= tol);
        Some(Self {
            sup,
            inf,
            last: *values.last().expect("nonempty"),
            tail_mean,
            settled,
            near_one: settled && (tail_mean - 1.0).abs() <= tol,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSummary {
    pub tolerance: f64,
    pub var_ratio: Option<ColumnSummary>,
    pub g_ratio: Option<ColumnSummary>,
}

/// Rows of Var(S_n) and G(1/n) against a regular-variation model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub model: Option<RegularVariationModel>,
    pub rows: Vec<ScanRow>,
    pub summary: ScanSummary,
}

pub const SCAN_CSV_HEADER: &str = "n,variance,g_n,var_ratio,x,G_x,g_ratio";

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl ScanReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(SCAN_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.n,
                r.variance,
                fmt_opt(r.g_n),
                fmt_opt(r.var_ratio),
                r.x,
                r.g_x,
                fmt_opt(r.g_ratio)
            );
        }
        out
    }

    /// Parses the rows written by [`ScanReport::to_csv`].
    pub fn rows_from_csv(text: &str) -> Result<Vec<ScanRow>> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == SCAN_CSV_HEADER => {}
            other => {
                return Err(Error::validation(
                    "csv header",
                    format!("expected `{SCAN_CSV_HEADER}`, got {other:?}"),
                ))
            }
        }
        lines
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, line)| {
                let cells: Vec<&str> = line.split(',').collect();
                let path = format!("csv line {}", i + 2);
                if cells.len() != 7 {
                    return Err(Error::validation(path, "expected 7 columns"));
                }
                let num = |s: &str| -> Result<f64> {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::validation(path.clone(), format!("`{s}`: {e}")))
                };
                let opt = |s: &str| -> Result<Option<f64>> {
                    if s.trim().is_empty() {
                        Ok(None)
                    } else {
                        num(s).map(Some)
                    }
                };
                Ok(ScanRow {
                    n: cells[0]
                        .trim()
                        .parse()
                        .map_err(|e| Error::validation(path.clone(), format!("n: {e}")))?,
                    variance: num(cells[1])?,
                    g_n: opt(cells[2])?,
                    var_ratio: opt(cells[3])?,
                    x: num(cells[4])?,
                    g_x: num(cells[5])?,
                    g_ratio: opt(cells[6])?,
                })
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn check_grid(ns: &[u64]) -> Result<()> {
    if ns.is_empty() {
        return Err(Error::domain("the n grid is empty"));
    }
    if ns[0] == 0 || ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("the n grid must be positive and strictly increasing"));
    }
    Ok(())
}

/// Rows with optional model columns; `model = None` leaves ratio columns empty.
pub fn scan(m: &SpectralMeasure, model: Option<RegularVariationModel>, n_grid: &[u64], tol: f64) -> Result<ScanReport> {
    check_grid(n_grid)?;
    let variances = variance_spectral_many(m, n_grid)?;
    let rows: Vec<ScanRow> = n_grid
        .iter()
        .zip(&variances)
        .map(|(&n, &variance)| {
            let nf = n as f64;
            let x = 1.0 / nf;
            let g_x = m.g_unchecked(x);
            let g_n = model.map(|md| md.g(nf));
            ScanRow {
                n,
                variance,
                g_n,
                var_ratio: model.map(|md| variance / (md.k0 * md.g(nf))),
                x,
                g_x,
                g_ratio: model.map(|md| g_x / md.g_profile(x)),
            }
        })
        .collect();
    let column = |f: fn(&ScanRow) -> Option<f64>| {
        let vals: Option<Vec<f64>> = rows.iter().map(f).collect();
        vals.and_then(|v| ColumnSummary::from_values(&v, tol))
    };
    let summary = ScanSummary {
        tolerance: tol,
        var_ratio: column(|r| r.var_ratio),
        g_ratio: column(|r| r.g_ratio),
    };
    Ok(ScanReport { model, rows, summary })
}

/// Var(S_n)/(K₀g(n)) and G(1/n)/(C(γ)K₀n^{γ-2}L(n)) along `n_grid`.
pub fn theorem_check(
    m: &SpectralMeasure,
    model: RegularVariationModel,
    n_grid: &[u64],
    tol: f64,
) -> Result<ScanReport> {
    scan(m, Some(model), n_grid, tol)
}

/// Var(S_n) for n in [lo, hi].
pub(crate) fn variance_window(m: &SpectralMeasure, lo: u64, hi: u64) -> Result<Vec<f64>> {
    if m.is_atomic() {
        let ns: Vec<u64> = (lo..=hi).collect();
        variance_spectral_many(m, &ns)
    } else {
        let mut all = variance_profile(m, hi)?;
        Ok(all.split_off(lo as usize - 1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthBoundReport {
    pub gamma: f64,
    pub subsequence: Vec<u64>,
    /// max n_{k+1}/n_k
    pub kappa: f64,
    /// sup/inf_k Var(S_{n_k}) / g(n_k)
    pub sup_subsequence: f64,
    pub inf_subsequence: f64,
    /// sup/inf over x = 1/n_k of G(x) / (x^{2-γ} L(1/x))
    pub sup_g: f64,
    pub inf_g: f64,
    /// sup/inf over every n in [n_0, n_last] of Var(S_n) / g(n)
    pub sup_full: f64,
    pub inf_full: f64,
}

impl GrowthBoundReport {
    /// Largest ratio between the three sup statistics.
    pub fn sup_spread(&self) -> f64 {
        let s = [self.sup_subsequence, self.sup_g, self.sup_full];
        let hi = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = s.iter().copied().fold(f64::INFINITY, f64::min);
        hi / lo
    }
}

/// Finite-sample sup/inf ratios for the upper- and lower-bound equivalences
/// along a subsequence with bounded growth ratio.
pub fn growth_bound_report(
    m: &SpectralMeasure,
    gamma: f64,
    l: SlowlyVarying,
    subsequence: &[u64],
) -> Result<GrowthBoundReport> {
    if !(gamma > 0.0 && gamma <= 2.0) {
        return Err(Error::domain(format!("gamma must lie in (0, 2], got {gamma}")));
    }
    check_grid(subsequence)?;
    let g = |n: f64| n.powf(gamma) * l.eval(n);
    let kappa = subsequence
        .windows(2)
        .map(|w| w[1] as f64 / w[0] as f64)
        .fold(1.0, f64::max);
    let first = subsequence[0];
    let last = *subsequence.last().expect("nonempty");
    let window = variance_window(m, first, last)?;
    let var_at = |n: u64| window[(n - first) as usize];

    let sub: Vec<f64> = subsequence.iter().map(|&n| var_at(n) / g(n as f64)).collect();
    let gs: Vec<f64> = subsequence
        .iter()
        .map(|&n| {
            let x = 1.0 / n as f64;
            m.g_unchecked(x) / (x.powf(2.0 - gamma) * l.eval(1.0 / x))
        })
        .collect();
    let full: Vec<f64> = (first..=last).map(|n| var_at(n) / g(n as f64)).collect();
    let sup = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let inf = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(GrowthBoundReport {
        gamma,
        subsequence: subsequence.to_vec(),
        kappa,
        sup_subsequence: sup(&sub),
        inf_subsequence: inf(&sub),
        sup_g: sup(&gs),
        inf_g: inf(&gs),
        sup_full: sup(&full),
        inf_full: inf(&full),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dichotomy {
    /// Var(S_n)/n² → 0: no atom at the origin.
    Vanishes,
    /// liminf Var(S_n)/n² > 0: the origin carries mass.
    PositiveLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DichotomyReport {
    /// (n, Var(S_n), Var(S_n)/n²)
    pub rows: Vec<(u64, f64, f64)>,
    pub atom_at_zero: f64,
    pub diagnosis: Dichotomy,
    pub tail_value: f64,
    /// |tail value − atom_at_zero| ≤ tolerance.
    pub consistent: bool,
}

/// The Var(S_n)/n² column and its comparison with the origin atom.
pub fn dichotomy_check(m: &SpectralMeasure, n_grid: &[u64], tol: f64) -> Result<DichotomyReport> {
    check_grid(n_grid)?;
    let variances = variance_spectral_many(m, n_grid)?;
    let rows: Vec<(u64, f64, f64)> = n_grid
        .iter()
        .zip(variances)
        .map(|(&n, v)| (n, v, v / (n as f64 * n as f64)))
        .collect();
    let tail_value = rows.last().expect("nonempty").2;
    let atom = m.atom_at_zero();
    Ok(DichotomyReport {
        rows,
        atom_at_zero: atom,
        diagnosis: if atom > 0.0 {
            Dichotomy::PositiveLimit
        } else {
            Dichotomy::Vanishes
        },
        tail_value,
        consistent: (tail_value - atom).abs() <= tol,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OctaveRow {
    pub r: u32,
    /// Var(S_{2^r}) / 2^{rγ}
    pub dyadic: f64,
    /// max/min of Var(S_n)/n^γ over n in [2^r, 2^{r+1})
    pub window_max: f64,
    pub window_min: f64,
    /// window_max / dyadic
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsequenceReport {
    pub gamma: f64,
    /// (r, Var(S_{2^r}) / 2^{rγ}) for r in r0..=r1
    pub dyadic: Vec<(u32, f64)>,
    /// Var(S_n)/n^γ for n = 2^{r0}, ..., 2^{r1}
    pub full: Vec<f64>,
    pub octaves: Vec<OctaveRow>,
}

impl SubsequenceReport {
    pub fn full_n_start(&self) -> u64 {
        1u64 << self.dyadic[0].0
    }
}

/// Dyadic and full-sequence columns of Var(S_n)/n^γ over [2^{r0}, 2^{r1}].
/// γ = 0 gives the raw variances.
pub fn subsequence_scan(m: &SpectralMeasure, gamma: f64, r0: u32, r1: u32) -> Result<SubsequenceReport> {
    if !(0.0..=2.0).contains(&gamma) {
        return Err(Error::domain(format!("gamma must lie in [0, 2], got {gamma}")));
    }
    if r0 >= r1 || r1 > 26 {
        return Err(Error::domain(format!("need r0 < r1 <= 26, got {r0}..{r1}")));
    }
    let lo = 1u64 << r0;
    let hi = 1u64 << r1;
    let raw = variance_window(m, lo, hi)?;
    let full: Vec<f64> = raw
        .iter()
        .enumerate()
        .map(|(i, v)| v / ((lo + i as u64) as f64).powf(gamma))
        .collect();
    let at = |n: u64| full[(n - lo) as usize];
    let dyadic: Vec<(u32, f64)> = (r0..=r1).map(|r| (r, at(1u64 << r))).collect();
    let octaves = (r0..r1)
        .map(|r| {
            let a = 1u64 << r;
            let slice = &full[(a - lo) as usize..(2 * a - lo) as usize];
            let window_max = slice.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let window_min = slice.iter().copied().fold(f64::INFINITY, f64::min);
            let d = at(a);
            OctaveRow {
                r,
                dyadic: d,
                window_max,
                window_min,
                ratio: window_max / d,
            }
        })
        .collect();
    Ok(SubsequenceReport {
        gamma,
        dyadic,
        full,
        octaves,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaFit {
    pub gamma_hat: f64,
    #[serde(rename = "K0_hat")]
    pub k0_hat: f64,
    pub residual: f64,
}

/// Least squares of ln Var on ln n: slope γ̂, K̂₀ = exp(intercept), RMS log residual.
pub fn gamma_fit(points: &[(u64, f64)]) -> Result<GammaFit> {
    if points.len() < 3 {
        return Err(Error::domain("gamma_fit needs at least 3 points"));
    }
    if let Some((n, v)) = points.iter().find(|(n, v)| *n == 0 || !(v.is_finite() && *v > 0.0)) {
        return Err(Error::domain(format!(
            "gamma_fit needs n > 0 and positive variances, got ({n}, {v})"
        )));
    }
    let xs: Vec<f64> = points.iter().map(|(n, _)| (*n as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, v)| v.ln()).collect();
    let len = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / len;
    let my = ys.iter().sum::<f64>() / len;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx <= 0.0 {
        return Err(Error::domain("gamma_fit design is degenerate: all n are equal"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum();
    Ok(GammaFit {
        gamma_hat: slope,
        k0_hat: intercept.exp(),
        residual: (rss / len).sqrt(),
    })
}

/// Convenience: Var(S_n)/n^γ at a single n.
pub fn normalized_variance(m: &SpectralMeasure, n: u64, gamma: f64) -> Result<f64> {
    Ok(variance_spectral(m, n)? / (n as f64).powf(gamma))
}
