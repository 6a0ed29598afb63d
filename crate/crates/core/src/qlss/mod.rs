//! Discrete-adiabatic linear-system solver built on the sparse simulator.
//!
//! `A` is block-encoded from angle trees (`U_A = SWAP · U_R† · U_L`), the
//! adiabatic Hamiltonian `H(s)` is block-encoded on top of it, and the walk
//! `W = R · U_H` is applied `T` times along the schedule. The result is
//! scored against a dense LU solve.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;

mod system;
mod tree;
mod walk;

pub use system::{gen_linear_system, random_orthogonal, LinearSystem, Variant, MAX_N, MIN_N};
pub use tree::{build_angle_trees, AngleTree, AngleTrees};
pub use walk::{
    assemble_hs, block_encode_a, error_metric, hs_normalization, lcu_rotation, projected_distance,
    reflection_r, run_adiabatic, run_walk, state_prep_ub, RotationQuery, Schedule, WalkCircuit, WalkConfig,
    WalkRegisters,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig {
    /// Values of `n` (`N = 2^n`).
    pub sizes: Vec<u32>,
    pub kappas: Vec<f64>,
    pub variants: Vec<Variant>,
    pub t_grid: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
    /// Smallest `T` entering the slope fit.
    pub fit_min_t: usize,
    pub query: RotationQuery,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            sizes: vec![2, 3, 4],
            kappas: vec![10.0, 30.0, 50.0],
            variants: vec![Variant::PositiveDefinite, Variant::NonHermitian],
            t_grid: vec![100, 1_000, 10_000],
            reps: 10,
            seed: 0,
            fit_min_t: 1_000,
            query: RotationQuery::Fused,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorSample {
    pub variant: Variant,
    pub dim: usize,
    pub kappa: f64,
    pub steps: usize,
    pub rep: usize,
    pub error: f64,
}

/// Mean error against `T` for one `(variant, N, κ)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorCurve {
    pub variant: Variant,
    pub dim: usize,
    pub kappa: f64,
    pub reps: usize,
    pub t_grid: Vec<usize>,
    pub mean_error: Vec<f64>,
    /// Slope of `ln(mean error)` against `ln(1/T)` over `T ≥ fit_min_t`.
    pub slope: f64,
    /// Intercept of the same fit (`ln` of the error extrapolated to `T = 1`).
    pub intercept: f64,
    /// Geometric mean of `error · T` over the fit points: `error ≈ θ/T`.
    pub theta: f64,
}

impl ErrorCurve {
    pub fn mean_at(&self, t: usize) -> Option<f64> {
        self.t_grid.iter().position(|&x| x == t).map(|i| self.mean_error[i])
    }

    /// Error predicted by the fitted line at `T`.
    pub fn fitted(&self, t: usize) -> f64 {
        (self.intercept + self.slope * (1.0 / t as f64).ln()).exp()
    }
}

/// Least-squares `θ ≈ c1·κ + c2·√κ` across κ for one `(variant, N)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThetaFit {
    pub variant: Variant,
    pub dim: usize,
    pub c1: f64,
    pub c2: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub config: SweepConfig,
    pub schedule: String,
    pub samples: Vec<ErrorSample>,
    pub curves: Vec<ErrorCurve>,
    pub theta_fits: Vec<ThetaFit>,
}

impl SweepReport {
    pub fn curve(&self, variant: Variant, dim: usize, kappa: f64) -> Option<&ErrorCurve> {
        self.curves.iter().find(|c| c.variant == variant && c.dim == dim && c.kappa == kappa)
    }

    /// `variant,N,kappa,T,rep,error,slope_fit`, one row per sample.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("variant,N,kappa,T,rep,error,slope_fit\n");
        for s in &self.samples {
            let slope = self.curve(s.variant, s.dim, s.kappa).map_or(f64::NAN, |c| c.slope);
            out.push_str(&format!(
                "{},{},{},{},{},{:.6e},{:.4}\n",
                s.variant.as_str(),
                s.dim,
                s.kappa,
                s.steps,
                s.rep,
                s.error,
                slope
            ));
        }
        out
    }
}

/// Seed of one `(variant, n, κ, rep)` system. Independent of `T` and of the
/// repetition count, so prefixes of a sweep reproduce.
pub fn sample_seed(seed: u64, variant: Variant, n: u32, kappa: f64, rep: usize) -> u64 {
    let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
    for w in [variant as u64, n as u64, kappa.to_bits(), rep as u64] {
        h = splitmix(h ^ w);
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Ordinary least squares `y = a + b·x`, returning `(b, a)`.
pub fn linear_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { f64::NAN };
    (b, my - b * mx)
}

/// Least squares over the basis `(κ, √κ)`.
pub fn theta_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let (mut s11, mut s12, mut s22, mut r1, mut r2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(k, th) in points {
        let (x1, x2) = (k, k.sqrt());
        s11 += x1 * x1;
        s12 += x1 * x2;
        s22 += x2 * x2;
        r1 += x1 * th;
        r2 += x2 * th;
    }
    let det = s11 * s22 - s12 * s12;
    if det.abs() < 1e-300 {
        return (f64::NAN, f64::NAN);
    }
    ((r1 * s22 - r2 * s12) / det, (s11 * r2 - s12 * r1) / det)
}

/// Runs every `(variant, n, κ, rep)` system at every `T`. Systems run in
/// parallel on the global rayon pool; each walk owns its state.
pub fn experiment_sweep(config: &SweepConfig) -> Result<SweepReport> {
    let mut jobs = Vec::new();
    for &variant in &config.variants {
        for &n in &config.sizes {
            for &kappa in &config.kappas {
                for rep in 0..config.reps {
                    jobs.push((variant, n, kappa, rep));
                }
            }
        }
    }
    let runs: Vec<Vec<ErrorSample>> = jobs
        .par_iter()
        .map(|&(variant, n, kappa, rep)| -> Result<Vec<ErrorSample>> {
            let system = gen_linear_system(n, kappa, variant, sample_seed(config.seed, variant, n, kappa, rep))?;
            let walk = WalkCircuit::new(&system, config.query)?;
            config
                .t_grid
                .iter()
                .map(|&steps| {
                    let cfg = WalkConfig {
                        steps,
                        schedule: Schedule::Rational { kappa },
                        query: config.query,
                    };
                    let state = run_walk(&walk, &cfg)?;
                    Ok(ErrorSample {
                        variant,
                        dim: system.dim(),
                        kappa,
                        steps,
                        rep,
                        error: walk.error(&state)?,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let samples: Vec<ErrorSample> = runs.into_iter().flatten().collect();

    let mut curves = Vec::new();
    let mut theta_fits = Vec::new();
    for &variant in &config.variants {
        for &n in &config.sizes {
            let dim = 1usize << n;
            let mut thetas = Vec::new();
            for &kappa in &config.kappas {
                let mean_error: Vec<f64> = config
                    .t_grid
                    .iter()
                    .map(|&t| {
                        let errs: Vec<f64> = samples
                            .iter()
                            .filter(|s| s.variant == variant && s.dim == dim && s.kappa == kappa && s.steps == t)
                            .map(|s| s.error)
                            .collect();
                        errs.iter().sum::<f64>() / errs.len() as f64
                    })
                    .collect();
                let fit: Vec<(usize, f64)> = config
                    .t_grid
                    .iter()
                    .zip(&mean_error)
                    .filter(|(&t, _)| t >= config.fit_min_t)
                    .map(|(&t, &e)| (t, e))
                    .collect();
                let pts: Vec<(f64, f64)> = fit.iter().map(|&(t, e)| ((1.0 / t as f64).ln(), e.ln())).collect();
                let (slope, intercept) = linear_fit(&pts);
                let theta = (fit.iter().map(|&(t, e)| (e * t as f64).ln()).sum::<f64>() / fit.len() as f64).exp();
                thetas.push((kappa, theta));
                curves.push(ErrorCurve {
                    variant,
                    dim,
                    kappa,
                    reps: config.reps,
                    t_grid: config.t_grid.clone(),
                    mean_error,
                    slope,
                    intercept,
                    theta,
                });
            }
            let (c1, c2) = theta_fit(&thetas);
            theta_fits.push(ThetaFit { variant, dim, c1, c2 });
        }
    }
    Ok(SweepReport {
        config: config.clone(),
        schedule: "rational(kappa)".into(),
        samples,
        curves,
        theta_fits,
    })
}

#[cfg(test)]
mod tests;
