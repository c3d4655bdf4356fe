//! Folded spectral measures on [0, π].
//!
//! A symmetric spectral measure F on [-π, π] is stored through its folding
//! G(x) = F([-x, x]): an optional atom at the origin, atoms in (0, π] whose
//! mass is the combined mass of the pair ±y, and nonnegative density pieces.
//! Autocovariances are r_k = ∫ cos(ky) G(dy).
//!
//! G is right-continuous: an atom at `y` is counted by `g_eval(x)` for x ≥ y.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{self, Estimate};

/// Bounds within this distance above π are snapped to π.
pub const PI_TOLERANCE: f64 = 1e-12;

/// Absolute target for density integrals.
pub const DENSITY_ABS_TOL: f64 = 1e-10;
/// Relative (to ∫|integrand|) target for density integrals.
pub const DENSITY_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Atom {
    pub y: f64,
    pub mass: f64,
}

pub type DensityFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum DensityForm {
    /// coef · y^exponent
    Power { coef: f64, exponent: f64 },
    /// Piecewise-linear interpolation of `vals` on the strictly increasing grid `ys`.
    Table { ys: Vec<f64>, vals: Vec<f64> },
    /// Caller-supplied evaluator. Not serializable.
    Opaque(DensityFn),
}

impl fmt::Debug for DensityForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DensityForm::Power { coef, exponent } => f
                .debug_struct("Power")
                .field("coef", coef)
                .field("exponent", exponent)
                .finish(),
            DensityForm::Table { ys, vals } => f.debug_struct("Table").field("ys", ys).field("vals", vals).finish(),
            DensityForm::Opaque(_) => f.write_str("Opaque(..)"),
        }
    }
}

/// A density on the interval (lo, hi].
#[derive(Debug, Clone)]
pub struct DensityPiece {
    lo: f64,
    hi: f64,
    form: DensityForm,
}

fn snap_pi(x: f64) -> f64 {
    if x > PI && x <= PI + PI_TOLERANCE {
        PI
    } else {
        x
    }
}

fn check_interval(lo: f64, hi: f64, path: &str) -> Result<(f64, f64)> {
    let hi = snap_pi(hi);
    if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || hi > PI || lo >= hi {
        return Err(Error::validation(
            path,
            format!("interval ({lo}, {hi}] must satisfy 0 <= lo < hi <= pi"),
        ));
    }
    Ok((lo, hi))
}

impl DensityPiece {
    pub fn power(coef: f64, exponent: f64, lo: f64, hi: f64) -> Result<Self> {
        Self::power_at(coef, exponent, lo, hi, "density")
    }

    fn power_at(coef: f64, exponent: f64, lo: f64, hi: f64, path: &str) -> Result<Self> {
        let (lo, hi) = check_interval(lo, hi, path)?;
        if !(coef.is_finite() && coef >= 0.0) {
            return Err(Error::validation(
                format!("{path}.coef"),
                "must be a finite number >= 0",
            ));
        }
        if !(exponent.is_finite() && exponent > -1.0) {
            return Err(Error::validation(format!("{path}.exp"), "must be > -1"));
        }
        Ok(Self {
            lo,
            hi,
            form: DensityForm::Power { coef, exponent },
        })
    }

    pub fn table(ys: Vec<f64>, vals: Vec<f64>) -> Result<Self> {
        Self::table_at(ys, vals, "density")
    }

    fn table_at(mut ys: Vec<f64>, vals: Vec<f64>, path: &str) -> Result<Self> {
        if ys.len() < 2 || ys.len() != vals.len() {
            return Err(Error::validation(
                path,
                "table needs at least two grid points and equal-length ys/vals",
            ));
        }
        let last = ys.len() - 1;
        ys[last] = snap_pi(ys[last]);
        for (i, w) in ys.windows(2).enumerate() {
            if w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater) {
                return Err(Error::validation(
                    format!("{path}.ys[{}]", i + 1),
                    "grid must be strictly increasing",
                ));
            }
        }
        for (i, v) in vals.iter().enumerate() {
            if !(v.is_finite() && *v >= 0.0) {
                return Err(Error::validation(
                    format!("{path}.vals[{i}]"),
                    "must be a finite number >= 0",
                ));
            }
        }
        let (lo, hi) = check_interval(ys[0], ys[last], path)?;
        Ok(Self {
            lo,
            hi,
            form: DensityForm::Table { ys, vals },
        })
    }

    pub fn opaque(lo: f64, hi: f64, f: DensityFn) -> Result<Self> {
        let (lo, hi) = check_interval(lo, hi, "density")?;
        // spot-check nonnegativity on an interior grid
        for i in 1..64 {
            let y = lo + (hi - lo) * i as f64 / 64.0;
            let v = f(y);
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::validation(
                    "density",
                    format!("opaque density is {v} at y = {y}"),
                ));
            }
        }
        Ok(Self {
            lo,
            hi,
            form: DensityForm::Opaque(f),
        })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn form(&self) -> &DensityForm {
        &self.form
    }

    /// Density value at y (zero outside the piece).
    pub fn density(&self, y: f64) -> f64 {
        if y <= self.lo || y > self.hi {
            return 0.0;
        }
        match &self.form {
            DensityForm::Power { coef, exponent } => coef * y.powf(*exponent),
            DensityForm::Table { ys, vals } => {
                let i = ys.partition_point(|&g| g < y).clamp(1, ys.len() - 1);
                let t = (y - ys[i - 1]) / (ys[i] - ys[i - 1]);
                vals[i - 1] + t * (vals[i] - vals[i - 1])
            }
            DensityForm::Opaque(f) => f(y),
        }
    }

    /// Exponent p when the piece is coef·y^p starting at the origin with a
    /// non-polynomial (hence non-smooth) power.
    fn origin_singularity(&self) -> Option<(f64, f64)> {
        match self.form {
            DensityForm::Power { coef, exponent }
                if self.lo == 0.0 && !(exponent >= 0.0 && exponent.fract() == 0.0) =>
            {
                Some((coef, exponent))
            }
            _ => None,
        }
    }

    /// Integer power exponent in 0..=3, when available for closed forms.
    fn small_integer_power(&self) -> Option<(f64, u32)> {
        match self.form {
            DensityForm::Power { coef, exponent } if exponent.fract() == 0.0 && (0.0..=3.0).contains(&exponent) => {
                Some((coef, exponent as u32))
            }
            _ => None,
        }
    }

    /// Structural breakpoints: the interval ends plus any table grid points.
    fn breakpoints(&self) -> Vec<f64> {
        match &self.form {
            DensityForm::Table { ys, .. } => ys.clone(),
            _ => vec![self.lo, self.hi],
        }
    }

    /// ∫_lo^min(x, hi) density.
    pub fn mass_up_to(&self, x: f64) -> f64 {
        if x <= self.lo {
            return 0.0;
        }
        let x = x.min(self.hi);
        match &self.form {
            DensityForm::Power { coef, exponent } => {
                let q = exponent + 1.0;
                coef * (x.powf(q) - self.lo.powf(q)) / q
            }
            DensityForm::Table { ys, vals } => {
                let mut acc = 0.0;
                for i in 1..ys.len() {
                    if ys[i - 1] >= x {
                        break;
                    }
                    let b = ys[i].min(x);
                    let vb = self.density(b);
                    acc += 0.5 * (vals[i - 1] + vb) * (b - ys[i - 1]);
                }
                acc
            }
            DensityForm::Opaque(f) => {
                quadrature::adaptive(|y| f(y), self.lo, x, DENSITY_ABS_TOL, DENSITY_REL_TOL).value
            }
        }
    }

    /// ∫ kernel(y) · density(y) dy over the piece, with panels cut at the
    /// multiples of `spacing` (the kernel's oscillation scale) and at the
    /// piece's own breakpoints.
    pub(crate) fn integrate_with<F: Fn(f64) -> f64>(&self, kernel: F, spacing: f64) -> Estimate {
        let mut breaks = self.breakpoints();
        if spacing.is_finite() && spacing > 0.0 {
            let first = (self.lo / spacing).floor() as u64 + 1;
            let mut j = first;
            loop {
                let y = j as f64 * spacing;
                if y >= self.hi {
                    break;
                }
                breaks.push(y);
                j += 1;
            }
        }
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();

        let mut total = Estimate::default();
        let mut start = 0;
        if let Some((coef, p)) = self.origin_singularity() {
            let b = breaks[1];
            let (v, err) = quadrature::singular_power_panel(&kernel, p, b);
            let abs = quadrature::singular_power_panel(|y| kernel(y).abs(), p, b).0;
            total += Estimate {
                value: coef * v,
                error: coef * err,
                abs: coef * abs,
            };
            start = 1;
        }
        total += quadrature::adaptive_panels(
            |y| kernel(y) * self.density(y),
            &breaks[start..],
            DENSITY_ABS_TOL,
            DENSITY_REL_TOL,
        );
        total
    }

    /// Nodes and weights (density folded into the weights) of a composite
    /// Gauss rule whose panels are no wider than `max_width`.
    fn composite_nodes(&self, max_width: f64) -> Vec<(f64, f64)> {
        let mut breaks = self.breakpoints();
        let span = self.hi - self.lo;
        let count = (span / max_width).ceil().max(1.0) as usize;
        for j in 1..count {
            breaks.push(self.lo + span * j as f64 / count as f64);
        }
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();

        let gl = quadrature::gl16();
        let mut out = Vec::with_capacity(breaks.len() * gl.nodes.len());
        let mut start = 0;
        if let Some((coef, p)) = self.origin_singularity() {
            let b = breaks[1];
            let rule = quadrature::jacobi_rule(p, 28);
            let scale = coef * b.powf(p + 1.0);
            for (&u, &w) in rule.nodes.iter().zip(&rule.weights) {
                out.push((b * u, w * scale));
            }
            start = 1;
        }
        for win in breaks[start..].windows(2) {
            let (a, b) = (win[0], win[1]);
            let h = b - a;
            for (&u, &w) in gl.nodes.iter().zip(&gl.weights) {
                let y = a + h * u;
                out.push((y, w * h * self.density(y)));
            }
        }
        out
    }
}

/// ∫_a^b y^p cos(ky) dy for integer p in 0..=3 and k > 0, by repeated
/// integration by parts.
fn cos_power_integral(p: u32, k: f64, a: f64, b: f64) -> f64 {
    let antiderivative = |y: f64| {
        let (s, c) = (k * y).sin_cos();
        // derivatives of y^p: p!/(p-j)! y^{p-j}
        let mut acc = 0.0;
        let mut coeff = 1.0;
        for j in 0..=p {
            let term = coeff * y.powi((p - j) as i32) / k.powi(j as i32 + 1);
            acc += match j % 4 {
                0 => term * s,
                1 => term * c,
                2 => -term * s,
                _ => -term * c,
            };
            coeff *= (p - j) as f64;
        }
        acc
    };
    antiderivative(b) - antiderivative(a)
}

/// Optional provenance attached to a measure (not serialized).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MeasureMeta {
    pub name: Option<String>,
    /// Mass discarded by truncating an infinite construction.
    pub truncation_tail: Option<f64>,
}

/// A folded spectral measure G on [0, π]. Immutable once built.
#[derive(Debug, Clone)]
pub struct SpectralMeasure {
    atom_at_zero: f64,
    atoms: Vec<Atom>,
    density: Vec<DensityPiece>,
    meta: MeasureMeta,
}

impl SpectralMeasure {
    /// Validates and builds a measure. Atoms may be given in any order; they
    /// are stored sorted by location. Density pieces must not overlap.
    pub fn new(atom_at_zero: f64, atoms: Vec<Atom>, density: Vec<DensityPiece>) -> Result<Self> {
        if !(atom_at_zero.is_finite() && atom_at_zero >= 0.0) {
            return Err(Error::validation("atom_at_zero", "must be a finite number >= 0"));
        }
        let mut atoms: Vec<Atom> = atoms
            .into_iter()
            .enumerate()
            .map(|(i, a)| {
                let y = snap_pi(a.y);
                if !(y.is_finite() && y > 0.0 && y <= PI) {
                    return Err(Error::validation(
                        format!("atoms[{i}].y"),
                        format!("{} is not in (0, pi]", a.y),
                    ));
                }
                if !(a.mass.is_finite() && a.mass > 0.0) {
                    return Err(Error::validation(
                        format!("atoms[{i}].mass"),
                        "must be a finite number > 0",
                    ));
                }
                Ok(Atom { y, mass: a.mass })
            })
            .collect::<Result<_>>()?;
        atoms.sort_by(|a, b| a.y.total_cmp(&b.y));
        if let Some(w) = atoms.windows(2).find(|w| w[0].y == w[1].y) {
            return Err(Error::validation("atoms", format!("duplicate location {}", w[0].y)));
        }
        let mut density = density;
        density.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        if let Some(w) = density.windows(2).find(|w| w[1].lo < w[0].hi) {
            return Err(Error::validation(
                "density",
                format!(
                    "pieces ({}, {}] and ({}, {}] overlap",
                    w[0].lo, w[0].hi, w[1].lo, w[1].hi
                ),
            ));
        }
        let m = Self {
            atom_at_zero,
            atoms,
            density,
            meta: MeasureMeta::default(),
        };
        let total = m.total_mass();
        if !total.is_finite() {
            return Err(Error::validation("density", "total mass is not finite"));
        }
        Ok(m)
    }

    /// The zero measure.
    pub fn empty() -> Self {
        Self {
            atom_at_zero: 0.0,
            atoms: Vec::new(),
            density: Vec::new(),
            meta: MeasureMeta::default(),
        }
    }

    pub fn with_meta(mut self, meta: MeasureMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn meta(&self) -> &MeasureMeta {
        &self.meta
    }

    pub fn atom_at_zero(&self) -> f64 {
        self.atom_at_zero
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn density(&self) -> &[DensityPiece] {
        &self.density
    }

    /// True when the measure has no density part.
    pub fn is_atomic(&self) -> bool {
        self.density.is_empty()
    }

    /// Copy with the origin atom increased by `a`.
    pub(crate) fn add_origin_atom(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.atom_at_zero += a;
        out
    }

    /// Copy with every mass and density multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::domain(format!("scale factor {c} must be finite and > 0")));
        }
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom {
                y: a.y,
                mass: a.mass * c,
            })
            .collect();
        let density = self
            .density
            .iter()
            .map(|p| {
                let form = match &p.form {
                    DensityForm::Power { coef, exponent } => DensityForm::Power {
                        coef: coef * c,
                        exponent: *exponent,
                    },
                    DensityForm::Table { ys, vals } => DensityForm::Table {
                        ys: ys.clone(),
                        vals: vals.iter().map(|v| v * c).collect(),
                    },
                    DensityForm::Opaque(f) => {
                        let f = f.clone();
                        DensityForm::Opaque(Arc::new(move |y| c * f(y)))
                    }
                };
                DensityPiece {
                    lo: p.lo,
                    hi: p.hi,
                    form,
                }
            })
            .collect();
        Ok(Self {
            atom_at_zero: self.atom_at_zero * c,
            atoms,
            density,
            meta: self.meta.clone(),
        })
    }

    /// G(π) = r_0.
    pub fn total_mass(&self) -> f64 {
        quadrature::neumaier_sum(
            std::iter::once(self.atom_at_zero)
                .chain(self.atoms.iter().map(|a| a.mass))
                .chain(self.density.iter().map(|p| p.mass_up_to(p.hi))),
        )
    }

    /// G(x) for x in [0, π].
    pub fn g_eval(&self, x: f64) -> Result<f64> {
        let x = snap_pi(x);
        if !(0.0..=PI).contains(&x) {
            return Err(Error::domain(format!("G is defined on [0, pi], got x = {x}")));
        }
        Ok(self.g_unchecked(x))
    }

    pub(crate) fn g_unchecked(&self, x: f64) -> f64 {
        let n_atoms = self.atoms.partition_point(|a| a.y <= x);
        quadrature::neumaier_sum(
            std::iter::once(self.atom_at_zero)
                .chain(self.atoms[..n_atoms].iter().map(|a| a.mass))
                .chain(self.density.iter().map(|p| p.mass_up_to(x))),
        )
    }

    /// Locations where G may fail to be smooth: atoms and piece boundaries.
    pub(crate) fn g_breakpoints(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.atoms.iter().map(|a| a.y).collect();
        for p in &self.density {
            out.extend(p.breakpoints());
        }
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// r_k = ∫ cos(ky) G(dy).
    pub fn autocovariance(&self, k: u64) -> Result<f64> {
        let kf = k as f64;
        let mut parts: Vec<f64> = Vec::with_capacity(self.atoms.len() + self.density.len() + 1);
        parts.push(self.atom_at_zero);
        parts.extend(self.atoms.iter().map(|a| a.mass * cos_product(kf, a.y)));
        let mut est = Estimate::default();
        for piece in &self.density {
            if k == 0 {
                parts.push(piece.mass_up_to(piece.hi));
            } else if let Some((coef, p)) = piece.small_integer_power() {
                parts.push(coef * cos_power_integral(p, kf, piece.lo, piece.hi));
            } else {
                est += piece.integrate_with(|y| (kf * y).cos(), PI / kf);
            }
        }
        let dens = quadrature::check(est, DENSITY_ABS_TOL, DENSITY_REL_TOL, &format!("autocovariance r_{k}"))?;
        parts.push(dens);
        Ok(quadrature::neumaier_sum(parts))
    }

    /// r_0, ..., r_{k_max}.
    ///
    /// Atoms and small integer powers use closed forms. Other densities are
    /// integrated on one shared composite grid whose panels are at most one
    /// period of cos(k_max·y) wide, so the cost is O(nodes · k_max).
    pub fn autocovariances(&self, k_max: usize) -> Result<Vec<f64>> {
        let len = k_max + 1;
        let mut r = vec![self.atom_at_zero; len];
        for a in &self.atoms {
            for (k, rk) in r.iter_mut().enumerate() {
                *rk += a.mass * cos_product(k as f64, a.y);
            }
        }
        let mut nodes: Vec<(f64, f64)> = Vec::new();
        for piece in &self.density {
            if let Some((coef, p)) = piece.small_integer_power() {
                r[0] += piece.mass_up_to(piece.hi);
                for (k, rk) in r.iter_mut().enumerate().skip(1) {
                    *rk += coef * cos_power_integral(p, k as f64, piece.lo, piece.hi);
                }
            } else {
                let width = (2.0 * PI / k_max.max(1) as f64).min(PI / 8.0);
                nodes.extend(piece.composite_nodes(width));
            }
        }
        if !nodes.is_empty() {
            let dens = cosine_sums(&nodes, len);
            for (rk, d) in r.iter_mut().zip(dens) {
                *rk += d;
            }
        }
        Ok(r)
    }

    /// ∫_0^π y^{-2} G(dy), or +inf when it diverges (including any origin atom).
    pub fn robinson_integral(&self) -> f64 {
        if self.atom_at_zero > 0.0 {
            return f64::INFINITY;
        }
        let mut parts: Vec<f64> = self.atoms.iter().map(|a| a.mass / (a.y * a.y)).collect();
        for piece in &self.density {
            let (lo, hi) = (piece.lo, piece.hi);
            let part = match &piece.form {
                DensityForm::Power { coef, exponent } => {
                    let p = *exponent;
                    if *coef == 0.0 {
                        0.0
                    } else if lo == 0.0 && p <= 1.0 {
                        f64::INFINITY
                    } else if p == 1.0 {
                        coef * (hi / lo).ln()
                    } else {
                        coef * (hi.powf(p - 1.0) - lo.powf(p - 1.0)) / (p - 1.0)
                    }
                }
                DensityForm::Table { ys, vals } => {
                    let mut acc = 0.0;
                    for i in 1..ys.len() {
                        let (a, b) = (ys[i - 1], ys[i]);
                        let (va, vb) = (vals[i - 1], vals[i]);
                        let slope = (vb - va) / (b - a);
                        if a == 0.0 {
                            if va > 0.0 || slope != 0.0 {
                                acc = f64::INFINITY;
                                break;
                            }
                            continue;
                        }
                        acc += (va - slope * a) * (1.0 / a - 1.0 / b) + slope * (b / a).ln();
                    }
                    acc
                }
                DensityForm::Opaque(f) => {
                    let est = quadrature::adaptive(|y| f(y) / (y * y), lo, hi, 1e-10, 1e-10);
                    if est.error <= 1e-6 * est.abs.max(1.0) {
                        est.value
                    } else {
                        f64::INFINITY
                    }
                }
            };
            parts.push(part);
        }
        if parts.iter().any(|p| p.is_infinite()) {
            return f64::INFINITY;
        }
        quadrature::neumaier_sum(parts)
    }

    /// Parses the measure JSON document.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let doc: MeasureDoc = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::validation(path, e.inner().to_string())
        })?;
        doc.into_measure()
    }

    /// Serializes to the measure JSON document. Opaque densities are rejected.
    pub fn to_json(&self) -> Result<String> {
        let mut density = Vec::with_capacity(self.density.len());
        for (i, p) in self.density.iter().enumerate() {
            density.push(match &p.form {
                DensityForm::Power { coef, exponent } => PieceDoc::Power {
                    coef: *coef,
                    exp: *exponent,
                    lo: p.lo,
                    hi: p.hi,
                },
                DensityForm::Table { ys, vals } => PieceDoc::Table {
                    ys: ys.clone(),
                    vals: vals.clone(),
                },
                DensityForm::Opaque(_) => {
                    return Err(Error::validation(
                        format!("density[{i}]"),
                        "opaque densities cannot be serialized",
                    ))
                }
            });
        }
        let doc = MeasureDoc {
            atom_at_zero: self.atom_at_zero,
            atoms: self.atoms.clone(),
            density,
        };
        serde_json::to_string_pretty(&doc).map_err(|e| Error::validation("", e.to_string()))
    }
}

/// cos(k·y) without the rounding of the product: k·y = p + e exactly, and
/// cos(p + e) ≈ cos p − e sin p.
fn cos_product(k: f64, y: f64) -> f64 {
    let p = k * y;
    let e = k.mul_add(y, -p);
    let (s, c) = p.sin_cos();
    c - e * s
}

/// Σ_i w_i cos(k y_i) for k = 0..len, by complex rotation resynchronized
/// every block of 64 lags.
fn cosine_sums(nodes: &[(f64, f64)], len: usize) -> Vec<f64> {
    const BLOCK: usize = 64;
    let blocks: Vec<Vec<f64>> = (0..len.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let k0 = b * BLOCK;
            let width = BLOCK.min(len - k0);
            let mut acc = vec![0.0; width];
            let mut comp = vec![0.0; width];
            for &(y, w) in nodes {
                let (s1, c1) = y.sin_cos();
                let (mut s, mut c) = (k0 as f64 * y).sin_cos();
                for j in 0..width {
                    // Kahan-compensated accumulation
                    let term = w * c - comp[j];
                    let t = acc[j] + term;
                    comp[j] = (t - acc[j]) - term;
                    acc[j] = t;
                    let cn = c * c1 - s * s1;
                    s = s * c1 + c * s1;
                    c = cn;
                }
            }
            acc
        })
        .collect();
    blocks.concat()
}

/// Smallest eigenvalue of the symmetric Toeplitz matrix [r_{|i-j|}].
pub fn toeplitz_min_eigenvalue(r: &[f64]) -> f64 {
    let n = r.len();
    if n == 0 {
        return 0.0;
    }
    let mat = DMatrix::from_fn(n, n, |i, j| r[i.abs_diff(j)]);
    SymmetricEigen::new(mat)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeasureDoc {
    #[serde(default)]
    atom_at_zero: f64,
    #[serde(default)]
    atoms: Vec<Atom>,
    #[serde(default)]
    density: Vec<PieceDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum PieceDoc {
    Power { coef: f64, exp: f64, lo: f64, hi: f64 },
    Table { ys: Vec<f64>, vals: Vec<f64> },
}

impl MeasureDoc {
    fn into_measure(self) -> Result<SpectralMeasure> {
        let density = self
            .density
            .into_iter()
            .enumerate()
            .map(|(i, p)| {
                let path = format!("density[{i}]");
                match p {
                    PieceDoc::Power { coef, exp, lo, hi } => DensityPiece::power_at(coef, exp, lo, hi, &path),
                    PieceDoc::Table { ys, vals } => DensityPiece::table_at(ys, vals, &path),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        SpectralMeasure::new(self.atom_at_zero, self.atoms, density)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn white_noise() -> SpectralMeasure {
        SpectralMeasure::new(0.0, vec![], vec![DensityPiece::power(1.0 / PI, 0.0, 0.0, PI).unwrap()]).unwrap()
    }

    fn quadratic() -> SpectralMeasure {
        SpectralMeasure::new(0.0, vec![], vec![DensityPiece::power(2.0, 1.0, 0.0, PI).unwrap()]).unwrap()
    }

    fn atom_at_pi() -> SpectralMeasure {
        SpectralMeasure::new(0.0, vec![Atom { y: PI, mass: 1.0 }], vec![]).unwrap()
    }

    #[test]
    fn g_eval_basic() {
        assert_eq!(SpectralMeasure::empty().g_eval(1.0).unwrap(), 0.0);
        assert!((white_noise().g_eval(PI).unwrap() - 1.0).abs() < 1e-15);
        assert!((white_noise().g_eval(1.0).unwrap() - 1.0 / PI).abs() < 1e-15);
        assert!(matches!(white_noise().g_eval(-0.1), Err(Error::Domain(_))));
        assert!(matches!(white_noise().g_eval(3.2), Err(Error::Domain(_))));
        // right-continuity at an atom
        let m = SpectralMeasure::new(0.0, vec![Atom { y: 0.5, mass: 2.0 }], vec![]).unwrap();
        assert_eq!(m.g_eval(0.5).unwrap(), 2.0);
        assert_eq!(m.g_eval(0.5 - 1e-12).unwrap(), 0.0);
    }

    #[test]
    fn autocovariance_examples() {
        let wn = white_noise();
        assert!((wn.autocovariance(0).unwrap() - 1.0).abs() < 1e-14);
        for k in 1..20 {
            assert!(wn.autocovariance(k).unwrap().abs() < 1e-14);
        }
        let a = atom_at_pi();
        for k in 0..10u64 {
            let want = if k % 2 == 0 { 1.0 } else { -1.0 };
            assert!((a.autocovariance(k).unwrap() - want).abs() < 1e-12);
        }
        let q = quadratic();
        assert!((q.autocovariance(0).unwrap() - PI * PI).abs() < 1e-12);
        for k in 1..12u64 {
            let want = if k % 2 == 1 { -4.0 / (k * k) as f64 } else { 0.0 };
            assert!((q.autocovariance(k).unwrap() - want).abs() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn closed_form_power_matches_quadrature() {
        // oracle: adaptive quadrature of the same integral
        for p in 0..=3u32 {
            for &k in &[1.0, 3.0, 17.0] {
                let want = quadrature::adaptive(|y| y.powi(p as i32) * (k * y).cos(), 0.2, 2.9, 1e-14, 1e-14).value;
                let got = cos_power_integral(p, k, 0.2, 2.9);
                assert!((got - want).abs() < 1e-12, "p={p} k={k}");
            }
        }
    }

    #[test]
    fn singular_density_autocovariance() {
        // 0.5 y^{-1/2}: r_k by the single-lag route vs the batch grid route
        let m = SpectralMeasure::new(0.0, vec![], vec![DensityPiece::power(0.5, -0.5, 0.0, PI).unwrap()]).unwrap();
        let batch = m.autocovariances(300).unwrap();
        assert!((batch[0] - PI.sqrt()).abs() < 1e-12);
        for k in [1u64, 2, 7, 50, 299] {
            let single = m.autocovariance(k).unwrap();
            assert!(
                (single - batch[k as usize]).abs() < 1e-11,
                "k={k}: {single} vs {}",
                batch[k as usize]
            );
        }
    }

    #[test]
    fn table_density_matches_power() {
        // the linear table 2y equals the quadratic measure
        let ys: Vec<f64> = vec![0.0, 1.0, 2.0, PI];
        let vals: Vec<f64> = ys.iter().map(|y| 2.0 * y).collect();
        let t = SpectralMeasure::new(0.0, vec![], vec![DensityPiece::table(ys, vals).unwrap()]).unwrap();
        let q = quadratic();
        for x in [0.3, 1.0, 1.7, PI] {
            assert!((t.g_eval(x).unwrap() - q.g_eval(x).unwrap()).abs() < 1e-13);
        }
        let rt = t.autocovariances(40).unwrap();
        let rq = q.autocovariances(40).unwrap();
        for k in 0..=40 {
            assert!((rt[k] - rq[k]).abs() < 1e-11, "k={k}");
        }
        assert!(t.robinson_integral().is_infinite());
    }

    #[test]
    fn robinson_examples() {
        assert!((atom_at_pi().robinson_integral() - 1.0 / (PI * PI)).abs() < 1e-15);
        assert!(quadratic().robinson_integral().is_infinite());
        let cubic = SpectralMeasure::new(0.0, vec![], vec![DensityPiece::power(3.0, 2.0, 0.0, PI).unwrap()]).unwrap();
        assert!((cubic.robinson_integral() - 3.0 * PI).abs() < 1e-12);
        let origin = SpectralMeasure::new(0.1, vec![], vec![]).unwrap();
        assert!(origin.robinson_integral().is_infinite());
    }

    #[test]
    fn validation_errors() {
        assert!(SpectralMeasure::new(-1.0, vec![], vec![]).is_err());
        assert!(SpectralMeasure::new(0.0, vec![Atom { y: 0.0, mass: 1.0 }], vec![]).is_err());
        assert!(SpectralMeasure::new(0.0, vec![Atom { y: 1.0, mass: 0.0 }], vec![]).is_err());
        assert!(SpectralMeasure::new(
            0.0,
            vec![Atom { y: 1.0, mass: 1.0 }, Atom { y: 1.0, mass: 2.0 }],
            vec![]
        )
        .is_err());
        assert!(DensityPiece::power(1.0, -1.0, 0.0, 1.0).is_err());
        assert!(DensityPiece::power(1.0, 0.0, 1.0, 0.5).is_err());
        assert!(DensityPiece::table(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(DensityPiece::table(vec![0.0, 1.0], vec![1.0, -1.0]).is_err());
        let a = DensityPiece::power(1.0, 0.0, 0.0, 1.0).unwrap();
        let b = DensityPiece::power(1.0, 0.0, 0.5, 2.0).unwrap();
        assert!(SpectralMeasure::new(0.0, vec![], vec![a, b]).is_err());
        // pi snapping
        assert!(DensityPiece::power(1.0, 0.0, 0.0, PI + 5e-13).is_ok());
        assert!(DensityPiece::power(1.0, 0.0, 0.0, PI + 1e-9).is_err());
    }

    #[test]
    fn json_roundtrip_and_errors() {
        let text = r#"{"atom_at_zero": 0.25,
            "atoms": [{"y": 3.141592653589793, "mass": 1.0}, {"y": 0.5, "mass": 0.5}],
            "density": [{"type": "power", "coef": 2.0, "exp": 1.0, "lo": 0.0, "hi": 1.0},
                        {"type": "table", "ys": [1.0, 2.0, 3.141592653589793], "vals": [1.0, 0.5, 0.0]}]}"#;
        let m = SpectralMeasure::from_json(text).unwrap();
        assert_eq!(m.atoms()[0].y, 0.5);
        let back = SpectralMeasure::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back.total_mass(), m.total_mass());
        assert_eq!(back.autocovariances(5).unwrap(), m.autocovariances(5).unwrap());

        let bad = r#"{"atoms": [{"y": 1.0, "mass": 1.0, "phase": 2}]}"#;
        match SpectralMeasure::from_json(bad) {
            Err(Error::Validation { path, .. }) => assert!(path.starts_with("atoms[0]"), "{path}"),
            other => panic!("unexpected {other:?}"),
        }
        let bad = r#"{"density": [{"type": "power", "coef": 1.0, "exp": -2.0, "lo": 0.0, "hi": 1.0}]}"#;
        match SpectralMeasure::from_json(bad) {
            Err(Error::Validation { path, .. }) => assert_eq!(path, "density[0].exp"),
            other => panic!("unexpected {other:?}"),
        }
        let op = DensityPiece::opaque(0.0, 1.0, Arc::new(|y: f64| y)).unwrap();
        let m = SpectralMeasure::new(0.0, vec![], vec![op]).unwrap();
        assert!(m.to_json().is_err());
    }

    #[test]
    fn opaque_density_agrees_with_power() {
        let op = DensityPiece::opaque(0.0, PI, Arc::new(|y: f64| 2.0 * y)).unwrap();
        let m = SpectralMeasure::new(0.0, vec![], vec![op]).unwrap();
        assert!((m.g_eval(1.5).unwrap() - 2.25).abs() < 1e-10);
        assert!((m.autocovariance(3).unwrap() + 4.0 / 9.0).abs() < 1e-10);
    }

    #[test]
    fn toeplitz_psd_for_single_atom() {
        let r = atom_at_pi().autocovariances(20).unwrap();
        assert!(toeplitz_min_eigenvalue(&r) > -1e-10);
    }
}
