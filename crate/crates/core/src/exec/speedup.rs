use std::time::Instant;

use serde::Serialize;

use super::{ExecConfig, Executor};
use crate::error::{Error, Result};
use crate::gates::{apply_flip, apply_unitary2, ControlSpec, Unitary2};
use crate::state::{RegisterType, SparseState};

/// Operations timed by the scaling and speedup experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum SpeedupOp {
    X,
    /// `Rz(0.3)`: diagonal, branch-local path.
    RotDiag,
    /// `X·Rz(0.3)`: anti-diagonal, branch-local path.
    RotAdiag,
    /// `Ry(0.3)`: general path with sort, grouping and prune.
    Rot,
    /// Hadamard: general path.
    H,
}

impl SpeedupOp {
    pub fn name(self) -> &'static str {
        match self {
            SpeedupOp::X => "X",
            SpeedupOp::RotDiag => "Rot_diag",
            SpeedupOp::RotAdiag => "Rot_adiag",
            SpeedupOp::Rot => "Rot",
            SpeedupOp::H => "H",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "x" => Some(SpeedupOp::X),
            "rot_diag" | "rotdiag" => Some(SpeedupOp::RotDiag),
            "rot_adiag" | "rotadiag" => Some(SpeedupOp::RotAdiag),
            "rot" => Some(SpeedupOp::Rot),
            "h" => Some(SpeedupOp::H),
            _ => None,
        }
    }

    /// Whether the op belongs to the interference family (sort path).
    pub fn is_interference(self) -> bool {
        matches!(self, SpeedupOp::Rot | SpeedupOp::H)
    }

    pub fn all() -> [SpeedupOp; 5] {
        [SpeedupOp::X, SpeedupOp::RotDiag, SpeedupOp::RotAdiag, SpeedupOp::Rot, SpeedupOp::H]
    }

    pub fn apply(self, state: &mut SparseState) -> Result<()> {
        let q = state.register("q")?;
        let none = ControlSpec::none();
        match self {
            SpeedupOp::X => apply_flip(state, q, 0, &none),
            SpeedupOp::RotDiag => apply_unitary2(state, q, 0, &Unitary2::rz(0.3), &none),
            SpeedupOp::RotAdiag => apply_unitary2(state, q, 0, &Unitary2::x().mul(&Unitary2::rz(0.3)), &none),
            SpeedupOp::Rot => apply_unitary2(state, q, 0, &Unitary2::ry(0.3), &none),
            SpeedupOp::H => apply_unitary2(state, q, 0, &Unitary2::h(), &none),
        }
    }
}

/// Uniform superposition over `branches` values of a single register `q`.
pub fn synthetic_state(branches: usize, exec: Executor) -> Result<SparseState> {
    let width = (usize::BITS - branches.saturating_sub(1).leading_zeros()).max(1);
    let mut s = SparseState::with_capacity(1).with_executor(exec);
    let q = s.add_register("q", width, RegisterType::UnsignedInt)?;
    s.set_uniform(q, branches as u64)?;
    Ok(s)
}

/// Mean and sample standard deviation (ms) of `trials` timed runs of `op`,
/// each on a fresh copy of `base`.
pub fn time_op(op: SpeedupOp, base: &SparseState, trials: usize) -> Result<(f64, f64)> {
    let mut samples = Vec::with_capacity(trials);
    for _ in 0..trials.max(1) {
        let mut s = base.clone();
        let t0 = Instant::now();
        op.apply(&mut s)?;
        samples.push(t0.elapsed().as_secs_f64() * 1e3);
        drop(s);
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = if samples.len() > 1 {
        samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok((mean, var.sqrt()))
}

#[derive(Debug, Clone, Serialize)]
pub struct SpeedupReport {
    pub op: String,
    pub branch_count: usize,
    pub trials: usize,
    pub threads: Vec<usize>,
    pub mean_ms: Vec<f64>,
    pub stddev_ms: Vec<f64>,
    /// `T(1) / T(p)` for each entry of `threads`.
    pub speedup: Vec<f64>,
}

impl SpeedupReport {
    pub fn speedup_at(&self, p: usize) -> Option<f64> {
        self.threads.iter().position(|&t| t == p).map(|i| self.speedup[i])
    }
}

/// Times `op` on a `branch_count`-branch uniform state for every thread count
/// in `p_list` (p = 1 is always measured first and is the baseline).
pub fn measure_speedup(op: SpeedupOp, branch_count: usize, p_list: &[usize], trials: usize) -> Result<SpeedupReport> {
    let mut threads = vec![1];
    threads.extend(p_list.iter().copied().filter(|&p| p != 1));
    let base = synthetic_state(branch_count, Executor::sequential())?;
    let mut mean_ms = Vec::new();
    let mut stddev_ms = Vec::new();
    for &p in &threads {
        let exec = Executor::new(ExecConfig::with_threads(p))?;
        let mut s = base.clone();
        s.set_executor(exec);
        // Warm-up run to fault in pages and spin up workers.
        op.apply(&mut s.clone())?;
        let (m, sd) = time_op(op, &s, trials)?;
        if m > 0.0 && sd / m > 0.5 {
            return Err(Error::TimingTooNoisy(sd / m));
        }
        mean_ms.push(m);
        stddev_ms.push(sd);
    }
    let t1 = mean_ms[0];
    Ok(SpeedupReport {
        op: op.name().to_string(),
        branch_count,
        trials,
        speedup: mean_ms.iter().map(|&t| t1 / t).collect(),
        threads,
        mean_ms,
        stddev_ms,
    })
}
