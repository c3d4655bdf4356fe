//! Stationary Gaussian sample paths with a prescribed spectral measure, and
//! the Monte Carlo estimate of Var(S_n) they provide.
//!
//! Paths come from circulant embedding when the embedding spectrum is
//! nonnegative up to a relative tolerance, and from a pivoted Cholesky
//! factor of the Toeplitz covariance otherwise. Path p draws its normals from
//! ChaCha8 seeded with `seed` on stream p, so batches are reproducible
//! regardless of thread count.

use std::fmt::Write as _;
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::SpectralMeasure;

pub const MAX_LENGTH: usize = 1 << 16;
/// Largest N for which the dense fallback is attempted.
pub const MAX_DENSE_LENGTH: usize = 4096;
/// Embedding eigenvalues in [-CLIP_TOL·r_0, 0) are set to zero.
pub const CLIP_TOL: f64 = 1e-10;
/// Pivoted Cholesky stops once the residual diagonal falls below this times r_0.
const CHOLESKY_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Circulant,
    Cholesky,
}

/// P paths of length N, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBatch {
    paths: Vec<f64>,
    len: usize,
    count: usize,
    seed: u64,
    method: Method,
    embedding_min_eigenvalue: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchMeta {
    pub seed: u64,
    pub method: Method,
    #[serde(rename = "N")]
    pub len: usize,
    #[serde(rename = "P")]
    pub paths: usize,
    /// Smallest eigenvalue of the circulant embedding before clipping; it is
    /// reported even when the dense fallback was used.
    pub embedding_min_eigenvalue: f64,
}

impl PathBatch {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn path_count(&self) -> usize {
        self.count
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn embedding_min_eigenvalue(&self) -> f64 {
        self.embedding_min_eigenvalue
    }

    pub fn path(&self, p: usize) -> &[f64] {
        &self.paths[p * self.len..(p + 1) * self.len]
    }

    pub fn meta(&self) -> BatchMeta {
        BatchMeta {
            seed: self.seed,
            method: self.method,
            len: self.len,
            paths: self.count,
            embedding_min_eigenvalue: self.embedding_min_eigenvalue,
        }
    }

    /// `path,t,value` with t = 1..N.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("path,t,value\n");
        for p in 0..self.count {
            for (t, v) in self.path(p).iter().enumerate() {
                let _ = writeln!(out, "{p},{},{v}", t + 1);
            }
        }
        out
    }
}

/// Φ^{-1}(u) by Acklam's rational approximation (relative error < 1.2e-9).
pub fn inverse_normal_cdf(u: f64) -> f64 {
    #[allow(clippy::excessive_precision)]
    const A: [f64; 6] = [
        -3.969683028665376e1,
        2.209460984245205e2,
        -2.759285104469687e2,
        1.383577518672690e2,
        -3.066479806614716e1,
        2.506628277459239,
    ];
    #[allow(clippy::excessive_precision)]
    const B: [f64; 5] = [
        -5.447609879822406e1,
        1.615858368580409e2,
        -1.556989798598866e2,
        6.680131188771972e1,
        -1.328068155288572e1,
    ];
    #[allow(clippy::excessive_precision)]
    const C: [f64; 6] = [
        -7.784894002430293e-3,
        -3.223964580411365e-1,
        -2.400758277161838,
        -2.549732539343734,
        4.374664141464968,
        2.938163982698783,
    ];
    #[allow(clippy::excessive_precision)]
    const D: [f64; 4] = [
        7.784695709041462e-3,
        3.224671290700398e-1,
        2.445134137142996,
        3.754408661907416,
    ];
    const P_LOW: f64 = 0.02425;

    if u <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if u >= 1.0 {
        return f64::INFINITY;
    }
    if u < P_LOW {
        let q = (-2.0 * u.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if u <= 1.0 - P_LOW {
        let q = u - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - u).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// Standard normals for one path: ChaCha8(seed) on stream `path`.
struct NormalStream(ChaCha8Rng);

impl NormalStream {
    fn new(seed: u64, path: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(path);
        Self(rng)
    }

    fn next(&mut self) -> f64 {
        // 53 random bits, centred in their cell so u ∈ (0, 1)
        let u = ((self.0.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64);
        inverse_normal_cdf(u)
    }
}

enum Factor {
    Circulant {
        sqrt_eig: Vec<f64>,
        fft: Arc<dyn Fft<f64>>,
    },
    /// Columns of L with L Lᵀ ≈ Toeplitz(r), each of length N.
    LowRank(Vec<Vec<f64>>),
}

fn circulant_eigenvalues(r: &[f64], half: usize) -> Vec<f64> {
    let size = 2 * half;
    let mut row: Vec<Complex<f64>> = (0..size).map(|j| Complex::new(r[j.min(size - j)], 0.0)).collect();
    FftPlanner::new().plan_fft_forward(size).process(&mut row);
    row.into_iter().map(|c| c.re).collect()
}

fn pivoted_cholesky(r: &[f64], len: usize) -> Vec<Vec<f64>> {
    let r0 = r[0];
    let mut diag = vec![r0; len];
    let mut cols: Vec<Vec<f64>> = Vec::new();
    while cols.len() < len {
        let (pivot, &d) = diag
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("len >= 1");
        if d <= CHOLESKY_TOL * r0 {
            break;
        }
        let s = d.sqrt();
        let mut col: Vec<f64> = (0..len).map(|i| r[i.abs_diff(pivot)]).collect();
        for prev in &cols {
            let lp = prev[pivot];
            if lp != 0.0 {
                for (c, &l) in col.iter_mut().zip(prev) {
                    *c -= l * lp;
                }
            }
        }
        for (i, c) in col.iter_mut().enumerate() {
            *c /= s;
            diag[i] = (diag[i] - *c * *c).max(0.0);
        }
        diag[pivot] = 0.0;
        cols.push(col);
    }
    cols
}

fn sample_path(factor: &Factor, len: usize, seed: u64, p: usize, level: f64) -> Vec<f64> {
    let mut z = NormalStream::new(seed, p as u64);
    let mut out = match factor {
        Factor::Circulant { sqrt_eig, fft } => {
            let mut w: Vec<Complex<f64>> = sqrt_eig
                .iter()
                .map(|&s| {
                    let re = z.next();
                    let im = z.next();
                    Complex::new(s * re, s * im)
                })
                .collect();
            fft.process(&mut w);
            w[..len].iter().map(|c| c.re).collect::<Vec<f64>>()
        }
        Factor::LowRank(cols) => {
            let mut x = vec![0.0; len];
            for col in cols {
                let zi = z.next();
                for (xi, &l) in x.iter_mut().zip(col) {
                    *xi += l * zi;
                }
            }
            x
        }
    };
    if level > 0.0 {
        let shift = level.sqrt() * z.next();
        out.iter_mut().for_each(|x| *x += shift);
    }
    out
}

/// P stationary zero-mean Gaussian paths of length N with covariances
/// r_0..r_{N-1} of `m`.
///
/// An origin atom a contributes an independent N(0, a) level shared by all
/// coordinates of a path; the remaining covariance goes through the
/// circulant embedding of size 2·2^⌈log₂(N-1)⌉.
pub fn simulate(m: &SpectralMeasure, len: usize, paths: usize, seed: u64) -> Result<PathBatch> {
    if len == 0 || len > MAX_LENGTH {
        return Err(Error::domain(format!("N must lie in 1..={MAX_LENGTH}, got {len}")));
    }
    if paths == 0 {
        return Err(Error::domain("at least one path is required"));
    }
    let half = (len.max(2) - 1).next_power_of_two();
    let level = m.atom_at_zero();
    let mut r = m.autocovariances(half)?;
    r.iter_mut().for_each(|x| *x -= level);
    let r0 = r[0];

    let (factor, method, min_eig) = if r0 <= 0.0 {
        // degenerate: only the random level remains
        (Factor::LowRank(Vec::new()), Method::Cholesky, 0.0)
    } else {
        let eig = circulant_eigenvalues(&r, half);
        let min_eig = eig.iter().copied().fold(f64::INFINITY, f64::min);
        if min_eig >= -CLIP_TOL * r0 {
            let size = eig.len() as f64;
            let sqrt_eig = eig.iter().map(|&e| (e.max(0.0) / size).sqrt()).collect();
            let fft = FftPlanner::new().plan_fft_forward(eig.len());
            (Factor::Circulant { sqrt_eig, fft }, Method::Circulant, min_eig)
        } else if len <= MAX_DENSE_LENGTH {
            (Factor::LowRank(pivoted_cholesky(&r, len)), Method::Cholesky, min_eig)
        } else {
            return Err(Error::Embedding(format!(
                "circulant embedding has eigenvalue {min_eig:e} < -{CLIP_TOL:e}·r0 and N = {len} exceeds the \
                 dense fallback limit; use N <= {MAX_DENSE_LENGTH}"
            )));
        }
    };

    let rows: Vec<Vec<f64>> = (0..paths)
        .into_par_iter()
        .map(|p| sample_path(&factor, len, seed, p, level))
        .collect();
    Ok(PathBatch {
        paths: rows.concat(),
        len,
        count: paths,
        seed,
        method,
        embedding_min_eigenvalue: min_eig,
    })
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let count = values.len() as f64;
    let mean = values.iter().sum::<f64>() / count;
    if values.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (count - 1.0);
    (mean, (var / count).sqrt())
}

/// Mean of S_n² over paths and its standard error; the error is +∞ for P = 1.
pub fn empirical_variance(batch: &PathBatch, n: usize) -> Result<(f64, f64)> {
    if n == 0 || n > batch.len {
        return Err(Error::domain(format!("n must lie in 1..={}, got {n}", batch.len)));
    }
    let squares: Vec<f64> = (0..batch.count)
        .map(|p| {
            let s: f64 = batch.path(p)[..n].iter().sum();
            s * s
        })
        .collect();
    Ok(mean_and_se(&squares))
}

/// Lag-h sample autocovariance: per path the mean of x_t x_{t+h}, then the
/// mean across paths with its standard error.
pub fn sample_autocovariance(batch: &PathBatch, lag: usize) -> Result<(f64, f64)> {
    if lag >= batch.len {
        return Err(Error::domain(format!("lag must be < N = {}, got {lag}", batch.len)));
    }
    let per_path: Vec<f64> = (0..batch.count)
        .map(|p| {
            let x = batch.path(p);
            let terms = x.len() - lag;
            x[..terms].iter().zip(&x[lag..]).map(|(a, b)| a * b).sum::<f64>() / terms as f64
        })
        .collect();
    Ok(mean_and_se(&per_path))
}
