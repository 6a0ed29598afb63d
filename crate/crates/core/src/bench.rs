//! Scaling studies and circuit benchmark tables.
//!
//! Times are means over repeated trials with a sample standard deviation.
//! Memory is reported as a proxy, `branches × bytes_per_branch`, which
//! counts the state representation only.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::{synthetic_state, time_op, ExecConfig, Executor, SpeedupOp};
use crate::qasm::{lower_and_run, parse_qasm, RunOptions};
use crate::qlss::linear_fit;

pub const MIN_TRIALS: usize = 10;

#[derive(Debug, Clone, Serialize)]
pub struct ScalingRow {
    pub op: String,
    pub interference: bool,
    pub branch_count: usize,
    pub trials: usize,
    pub mean_ms: f64,
    pub stddev_ms: f64,
    pub bytes_per_branch: usize,
    pub memory_proxy_bytes: usize,
}

/// Least-squares slope of `ln(time)` against `ln(branches)` for one op.
#[derive(Debug, Clone, Serialize)]
pub struct ScalingFit {
    pub op: String,
    pub slope: f64,
    pub intercept: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    pub fits: Vec<ScalingFit>,
}

impl ScalingReport {
    pub fn fit(&self, op: SpeedupOp) -> Option<&ScalingFit> {
        self.fits.iter().find(|f| f.op == op.name())
    }

    pub fn row(&self, op: SpeedupOp, branches: usize) -> Option<&ScalingRow> {
        self.rows.iter().find(|r| r.op == op.name() && r.branch_count == branches)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("op,family,branches,trials,mean_ms,stddev_ms,bytes_per_branch,memory_proxy_bytes,slope_fit\n");
        for r in &self.rows {
            let slope = self.fits.iter().find(|f| f.op == r.op).map_or(f64::NAN, |f| f.slope);
            let family = if r.interference { "interference" } else { "non-interference" };
            let _ = writeln!(
                out,
                "{},{},{},{},{:.6},{:.6},{},{},{:.4}",
                r.op, family, r.branch_count, r.trials, r.mean_ms, r.stddev_ms, r.bytes_per_branch, r.memory_proxy_bytes, slope
            );
        }
        out
    }
}

/// Log-spaced integer grid from `lo` to `hi` inclusive with `per_decade`
/// points per factor of ten.
pub fn log_grid(lo: usize, hi: usize, per_decade: usize) -> Vec<usize> {
    assert!(lo >= 1 && hi >= lo && per_decade >= 1);
    let (a, b) = ((lo as f64).log10(), (hi as f64).log10());
    let steps = ((b - a) * per_decade as f64).round().max(0.0) as usize;
    let mut out: Vec<usize> = (0..=steps)
        .map(|k| {
            let e = if steps == 0 { a } else { a + (b - a) * k as f64 / steps as f64 };
            10f64.powf(e).round() as usize
        })
        .collect();
    out.dedup();
    out
}

/// Parses `lo:hi` (numbers may use exponent notation, e.g. `10:1e7`).
pub fn parse_grid(spec: &str) -> Result<(usize, usize)> {
    let bad = || Error::InvalidConfig(format!("grid `{spec}` is not lo:hi"));
    let (lo, hi) = spec.split_once(':').ok_or_else(bad)?;
    let num = |s: &str| -> Result<usize> {
        let v: f64 = s.trim().parse().map_err(|_| bad())?;
        if v < 1.0 || !v.is_finite() {
            return Err(bad());
        }
        Ok(v.round() as usize)
    };
    let (lo, hi) = (num(lo)?, num(hi)?);
    if hi < lo {
        return Err(bad());
    }
    Ok((lo, hi))
}

/// Times each op on uniform superpositions of every grid size. States are
/// synthesized directly; each trial runs on a fresh copy.
pub fn scaling_experiment(ops: &[SpeedupOp], grid: &[usize], trials: usize, exec: ExecConfig) -> Result<ScalingReport> {
    if trials < MIN_TRIALS {
        return Err(Error::InvalidConfig(format!("at least {MIN_TRIALS} trials required, got {trials}")));
    }
    let executor = Executor::new(exec)?;
    let mut rows = Vec::new();
    for &branches in grid {
        let base = synthetic_state(branches, executor.clone())?;
        for &op in ops {
            // Warm-up to fault in pages.
            op.apply(&mut base.clone())?;
            let (mean_ms, stddev_ms) = time_op(op, &base, trials)?;
            rows.push(ScalingRow {
                op: op.name().to_string(),
                interference: op.is_interference(),
                branch_count: branches,
                trials,
                mean_ms,
                stddev_ms,
                bytes_per_branch: base.bytes_per_branch(),
                memory_proxy_bytes: branches * base.bytes_per_branch(),
            });
        }
    }
    let fits = ops
        .iter()
        .map(|&op| {
            let pts: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.op == op.name() && r.mean_ms > 0.0)
                .map(|r| ((r.branch_count as f64).ln(), r.mean_ms.ln()))
                .collect();
            let (slope, intercept) = linear_fit(&pts);
            ScalingFit {
                op: op.name().to_string(),
                slope,
                intercept,
            }
        })
        .collect();
    Ok(ScalingReport { rows, fits })
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub circuit: String,
    pub qubits: u32,
    pub gates: usize,
    pub threads: usize,
    /// Peak branch count during the run.
    pub sparsity: usize,
    pub final_branches: usize,
    pub trials: usize,
    pub mean_ms: f64,
    pub stddev_ms: f64,
    pub memory_proxy_bytes: usize,
    pub final_norm: f64,
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out =
        String::from("circuit,qubits,gates,threads,sparsity,final_branches,trials,mean_ms,stddev_ms,memory_proxy_mb,norm_error\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{:.4},{:.4},{:.6},{:.3e}",
            r.circuit,
            r.qubits,
            r.gates,
            r.threads,
            r.sparsity,
            r.final_branches,
            r.trials,
            r.mean_ms,
            r.stddev_ms,
            r.memory_proxy_bytes as f64 / (1024.0 * 1024.0),
            (r.final_norm - 1.0).abs()
        );
    }
    out
}

/// A named OpenQASM benchmark circuit.
#[derive(Debug, Clone)]
pub struct Circuit {
    pub name: String,
    pub source: String,
}

impl Circuit {
    pub fn new(name: impl Into<String>, source: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            source: source.into(),
        }
    }
}

fn header(out: &mut String) {
    out.push_str("OPENQASM 2.0;\ninclude \"qelib1.inc\";\n");
}

/// `H` then a CNOT chain: two branches at any size.
pub fn ghz(n: u32) -> String {
    let mut s = String::new();
    header(&mut s);
    let _ = writeln!(s, "qreg q[{n}];\ncreg c[{n}];\nh q[0];");
    for i in 1..n {
        let _ = writeln!(s, "cx q[{}],q[{i}];", i - 1);
    }
    s
}

/// Textbook QFT (H, controlled phases, final swaps) on the basis state
/// `|1010…⟩`, giving `2^n` branches.
pub fn qft(n: u32) -> String {
    let mut s = String::new();
    header(&mut s);
    let _ = writeln!(s, "qreg q[{n}];");
    for i in (0..n).step_by(2) {
        let _ = writeln!(s, "x q[{i}];");
    }
    for i in 0..n {
        let _ = writeln!(s, "h q[{i}];");
        for j in i + 1..n {
            let _ = writeln!(s, "cu1(pi/{}) q[{j}],q[{i}];", 1u64 << (j - i));
        }
    }
    for i in 0..n / 2 {
        let _ = writeln!(s, "swap q[{i}],q[{}];", n - 1 - i);
    }
    s
}

/// Swap test between two `(n−1)/2`-qubit product states with generic `ry`
/// angles. The controlled swap is built from `cx` and `ccx`. The peak
/// branch count is `2^n`.
pub fn swap_test(n: u32) -> String {
    assert!(n >= 3 && n % 2 == 1, "swap test needs an odd qubit count");
    let m = (n - 1) / 2;
    let mut s = String::new();
    header(&mut s);
    let _ = writeln!(s, "qreg anc[1];\nqreg a[{m}];\nqreg b[{m}];\ncreg c[1];");
    for i in 0..m {
        let _ = writeln!(s, "ry({:.6}) a[{i}];", 0.31 + 0.173 * i as f64);
        let _ = writeln!(s, "ry({:.6}) b[{i}];", 1.07 + 0.119 * i as f64);
    }
    s.push_str("h anc[0];\n");
    for i in 0..m {
        let _ = writeln!(s, "cx b[{i}],a[{i}];\nccx anc[0],a[{i}],b[{i}];\ncx b[{i}],a[{i}];");
    }
    s.push_str("h anc[0];\n");
    s
}

/// Memory word of the gate-level QRAM benchmark at `addr`.
pub fn qram_word(addr: u64) -> u64 {
    (addr.wrapping_mul(0x9e37_79b9) >> 7) & 0xfff
}

/// 20-qubit gate-level QRAM lookup: a 4-bit address, three AND-chain work
/// qubits, one select flag and a 12-bit data register. Every address is
/// decoded with `x`/`ccx` and its word copied with `cx`. With a basis-state
/// address the run stays at one branch.
pub fn qram_circuit(addr: u64) -> String {
    let mut s = String::new();
    header(&mut s);
    s.push_str("qreg a[4];\nqreg w[3];\nqreg f[1];\nqreg d[12];\n");
    for bit in 0..4 {
        if addr >> bit & 1 == 1 {
            let _ = writeln!(s, "x a[{bit}];");
        }
    }
    for i in 0..16u64 {
        let flips: Vec<u32> = (0..4).filter(|b| i >> b & 1 == 0).collect();
        for b in &flips {
            let _ = writeln!(s, "x a[{b}];");
        }
        let and = "ccx a[0],a[1],w[0];\nccx w[0],a[2],w[1];\nccx w[1],a[3],f[0];\n";
        s.push_str(and);
        let word = qram_word(i);
        for j in 0..12 {
            if word >> j & 1 == 1 {
                let _ = writeln!(s, "cx f[0],d[{j}];");
            }
        }
        s.push_str("ccx w[1],a[3],f[0];\nccx w[0],a[2],w[1];\nccx a[0],a[1],w[0];\n");
        for b in &flips {
            let _ = writeln!(s, "x a[{b}];");
        }
    }
    s
}

/// The desk-scale benchmark set.
pub fn builtin_circuits() -> Vec<Circuit> {
    vec![
        Circuit::new("ghz-23", ghz(23)),
        Circuit::new("ghz-40", ghz(40)),
        Circuit::new("ghz-255", ghz(255)),
        Circuit::new("qram-20", qram_circuit(11)),
        Circuit::new("qft-12", qft(12)),
        Circuit::new("qft-16", qft(16)),
        Circuit::new("swap_test-13", swap_test(13)),
        Circuit::new("swap_test-15", swap_test(15)),
    ]
}

/// Writes each circuit to `dir/<name>.qasm`.
pub fn write_circuits(dir: &Path, circuits: &[Circuit]) -> Result<Vec<PathBuf>> {
    let io = |p: &Path, e: std::io::Error| Error::Io {
        path: p.to_path_buf(),
        msg: e.to_string(),
    };
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    circuits
        .iter()
        .map(|c| {
            let p = dir.join(format!("{}.qasm", c.name));
            std::fs::write(&p, &c.source).map_err(|e| io(&p, e))?;
            Ok(p)
        })
        .collect()
}

/// Reads every `*.qasm` file in `dir`, sorted by name.
pub fn read_circuits(dir: &Path) -> Result<Vec<Circuit>> {
    let io = |p: &Path, e: std::io::Error| Error::Io {
        path: p.to_path_buf(),
        msg: e.to_string(),
    };
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "qasm"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let source = std::fs::read_to_string(&p).map_err(|e| io(&p, e))?;
            let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            Ok(Circuit { name, source })
        })
        .collect()
}

/// Runs every circuit at every thread count, `trials` times each.
pub fn table_benchmark(circuits: &[Circuit], thread_counts: &[usize], trials: usize) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for c in circuits {
        let ir = parse_qasm(&c.source)?;
        for &threads in thread_counts {
            let opts = RunOptions {
                exec: ExecConfig::with_threads(threads),
                trials: trials.max(1),
                ..RunOptions::default()
            };
            let (report, _) = lower_and_run(&ir, &opts)?;
            let mean = report.mean_wall_ms();
            let n = report.wall_ms.len() as f64;
            let sd = if report.wall_ms.len() > 1 {
                (report.wall_ms.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            rows.push(BenchRow {
                circuit: c.name.clone(),
                qubits: report.qubit_count,
                gates: report.gate_count,
                threads,
                sparsity: report.peak_branches,
                final_branches: report.final_branches,
                trials: report.wall_ms.len(),
                mean_ms: mean,
                stddev_ms: sd,
                memory_proxy_bytes: report.memory_proxy_bytes,
                final_norm: report.final_norm,
            });
        }
    }
    Ok(rows)
}
