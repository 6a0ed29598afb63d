use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Rotation angles that prepare a real unit vector of length `2^depth` from
/// `|0…0⟩` by a most-significant-bit-first descent: level `l` rotates bit
/// `depth−1−l` by `Ry(θ)` with `θ` chosen by the `l` bits above it. Negative
/// entries are fixed by a sign flip at the leaves.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleTree {
    depth: u32,
    /// `levels[l][prefix]`, `prefix < 2^l`.
    levels: Vec<Vec<f64>>,
    signs: Vec<bool>,
}

impl AngleTree {
    /// Tree for `v / ‖v‖`. Returns `None` for the zero vector.
    pub fn from_amplitudes(v: &[f64]) -> Option<Self> {
        assert!(v.len().is_power_of_two(), "length must be a power of two");
        let depth = v.len().trailing_zeros();
        // sq[d][k]: squared norm of the k-th block of size 2^(depth-d).
        let mut sq: Vec<Vec<f64>> = vec![v.iter().map(|x| x * x).collect()];
        for _ in 0..depth {
            let prev = sq.last().unwrap();
            sq.push(prev.chunks(2).map(|p| p[0] + p[1]).collect());
        }
        sq.reverse();
        if sq[0][0] == 0.0 || !sq[0][0].is_finite() {
            return None;
        }
        let levels = (0..depth as usize)
            .map(|l| {
                let children = &sq[l + 1];
                (0..1usize << l)
                    .map(|p| 2.0 * children[2 * p + 1].sqrt().atan2(children[2 * p].sqrt()))
                    .collect()
            })
            .collect();
        let signs = v.iter().map(|&x| x < 0.0).collect();
        Some(Self { depth, levels, signs })
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn angle(&self, level: u32, prefix: u64) -> f64 {
        self.levels[level as usize][prefix as usize]
    }

    pub fn level(&self, level: u32) -> &[f64] {
        &self.levels[level as usize]
    }

    pub fn sign(&self, leaf: u64) -> bool {
        self.signs[leaf as usize]
    }

    pub fn signs(&self) -> &[bool] {
        &self.signs
    }

    pub fn has_signs(&self) -> bool {
        self.signs.iter().any(|&s| s)
    }

    /// Amplitudes produced by the descent, computed classically.
    pub fn prepared(&self) -> Vec<f64> {
        let mut amp = vec![1.0];
        for l in 0..self.depth as usize {
            amp = amp
                .iter()
                .enumerate()
                .flat_map(|(p, &a)| {
                    let (s, c) = (self.levels[l][p] / 2.0).sin_cos();
                    [a * c, a * s]
                })
                .collect();
        }
        for (a, &neg) in amp.iter_mut().zip(&self.signs) {
            if neg {
                *a = -*a;
            }
        }
        amp
    }
}

/// Trees for a block-encoding of `A`: one per column (`|φ_k⟩ ∝ A_{·,k}`) and
/// a global one over column norms (`|ψ⟩ = Σ_k ‖A_{·,k}‖/‖A‖_F |k⟩`).
#[derive(Debug, Clone, PartialEq)]
pub struct AngleTrees {
    pub columns: Vec<AngleTree>,
    pub global: AngleTree,
    pub frobenius: f64,
}

impl AngleTrees {
    pub fn depth(&self) -> u32 {
        self.global.depth()
    }
}

pub fn build_angle_trees(a: &DMatrix<f64>) -> Result<AngleTrees> {
    let dim = a.ncols();
    if dim < 2 || !dim.is_power_of_two() || a.nrows() != dim {
        return Err(Error::BadDimension(dim as u32));
    }
    let columns = (0..dim)
        .map(|k| {
            let col: Vec<f64> = a.column(k).iter().copied().collect();
            AngleTree::from_amplitudes(&col).ok_or(Error::ZeroColumn(k))
        })
        .collect::<Result<Vec<_>>>()?;
    let norms: Vec<f64> = (0..dim).map(|k| a.column(k).norm()).collect();
    let global = AngleTree::from_amplitudes(&norms).expect("nonzero columns");
    Ok(AngleTrees {
        columns,
        global,
        frobenius: a.norm(),
    })
}
