use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};

/// Supported range of `n` (matrix dimension `N = 2^n`).
pub const MIN_N: u32 = 1;
pub const MAX_N: u32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Variant {
    PositiveDefinite,
    NonHermitian,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::PositiveDefinite => "pd",
            Variant::NonHermitian => "nh",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pd" => Some(Variant::PositiveDefinite),
            "nh" => Some(Variant::NonHermitian),
            _ => None,
        }
    }
}

/// `A x = b` with real `A` (N x N, N = 2^n) and unit `b`.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub kappa: f64,
    pub variant: Variant,
    pub n: u32,
}

impl LinearSystem {
    /// Wraps an explicit system. `b` is normalized; `kappa` is recorded as given.
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, kappa: f64, variant: Variant) -> Result<Self> {
        let dim = a.nrows();
        if dim < 2 || !dim.is_power_of_two() || a.ncols() != dim || b.len() != dim {
            return Err(Error::BadDimension(dim as u32));
        }
        let n = dim.trailing_zeros();
        if n > MAX_N {
            return Err(Error::BadDimension(n));
        }
        if kappa < 1.0 || !kappa.is_finite() {
            return Err(Error::BadConditionNumber(kappa));
        }
        let norm = b.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidAmplitudes("b must be a nonzero finite vector".into()));
        }
        Ok(Self {
            a,
            b: b / norm,
            kappa,
            variant,
            n,
        })
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    /// `A^{-1} b / ‖A^{-1} b‖` by LU with partial pivoting.
    pub fn solution(&self) -> Result<DVector<f64>> {
        let x = self.a.clone().lu().solve(&self.b).ok_or(Error::Singular)?;
        let norm = x.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Singular);
        }
        Ok(x / norm)
    }

    /// Ratio of extreme singular values.
    pub fn condition_number(&self) -> f64 {
        let s = self.a.clone().singular_values();
        let max = s.iter().cloned().fold(0.0, f64::max);
        let min = s.iter().cloned().fold(f64::INFINITY, f64::min);
        max / min
    }

    pub fn frobenius(&self) -> f64 {
        self.a.norm()
    }
}

/// Haar-like random orthogonal matrix: QR of a Gaussian matrix with the
/// signs of `R`'s diagonal folded into `Q`.
pub fn random_orthogonal(dim: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Random system with singular values geometrically spaced on `[1/κ, 1]`.
/// `PositiveDefinite`: `A = Q Σ Qᵀ`. `NonHermitian`: `A = U Σ Vᵀ`.
/// `b` is the normalized all-ones vector.
pub fn gen_linear_system(n: u32, kappa: f64, variant: Variant, seed: u64) -> Result<LinearSystem> {
    if !(MIN_N..=MAX_N).contains(&n) {
        return Err(Error::BadDimension(n));
    }
    if kappa <= 1.0 || !kappa.is_finite() {
        return Err(Error::BadConditionNumber(kappa));
    }
    let dim = 1usize << n;
    let sigma = DVector::from_fn(dim, |i, _| kappa.powf(-(i as f64) / (dim - 1) as f64));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = random_orthogonal(dim, &mut rng);
    let a = match variant {
        Variant::PositiveDefinite => {
            let a = &u * DMatrix::from_diagonal(&sigma) * u.transpose();
            // Remove rounding asymmetry.
            (&a + a.transpose()) * 0.5
        }
        Variant::NonHermitian => {
            let v = random_orthogonal(dim, &mut rng);
            &u * DMatrix::from_diagonal(&sigma) * v.transpose()
        }
    };
    let b = DVector::from_element(dim, 1.0 / (dim as f64).sqrt());
    LinearSystem::new(a, b, kappa, variant)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_condition_number_is_exact() {
        let s = gen_linear_system(1, 10.0, Variant::PositiveDefinite, 1).unwrap();
        let sv = s.a.clone().singular_values();
        let (hi, lo) = (sv.max(), sv.min());
        assert!((hi - 1.0).abs() < 1e-12 && (lo - 0.1).abs() < 1e-12);
    }

    #[test]
    fn pd_is_symmetric_with_bounded_spectrum() {
        let s = gen_linear_system(2, 30.0, Variant::PositiveDefinite, 7).unwrap();
        assert!((&s.a - s.a.transpose()).amax() < 1e-12);
        let eig = s.a.clone().symmetric_eigen().eigenvalues;
        assert!(eig.iter().all(|&e| (1.0 / 30.0 - 1e-12..=1.0 + 1e-12).contains(&e)));
    }

    #[test]
    fn condition_numbers_within_one_percent() {
        for variant in [Variant::PositiveDefinite, Variant::NonHermitian] {
            for n in 2..=4 {
                for kappa in [10.0, 30.0, 50.0] {
                    let s = gen_linear_system(n, kappa, variant, n as u64).unwrap();
                    assert!((s.condition_number() / kappa - 1.0).abs() < 0.01);
                    assert!((s.b.norm() - 1.0).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn bad_inputs() {
        assert_eq!(gen_linear_system(5, 10.0, Variant::PositiveDefinite, 0).unwrap_err(), Error::BadDimension(5));
        assert_eq!(gen_linear_system(0, 10.0, Variant::PositiveDefinite, 0).unwrap_err(), Error::BadDimension(0));
        assert!(matches!(gen_linear_system(2, 1.0, Variant::NonHermitian, 0), Err(Error::BadConditionNumber(_))));
    }

    #[test]
    fn solution_solves() {
        let s = gen_linear_system(3, 50.0, Variant::NonHermitian, 3).unwrap();
        let x = s.solution().unwrap();
        let r = &s.a * &x;
        let r = &r / r.norm();
        assert!((r - &s.b).amax() < 1e-10);
    }

    #[test]
    fn seeded_determinism() {
        let a = gen_linear_system(2, 10.0, Variant::NonHermitian, 9).unwrap();
        let b = gen_linear_system(2, 10.0, Variant::NonHermitian, 9).unwrap();
        assert_eq!(a.a, b.a);
    }
}
