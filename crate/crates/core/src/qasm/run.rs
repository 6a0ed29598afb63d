use std::collections::{BTreeMap, HashMap};
use std::f64::consts::FRAC_PI_4;
use std::fmt::Write as _;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{CircuitIR, QasmError, QubitRef, RegKind, Stmt};
use crate::error::{Error, Result};
use crate::exec::{ExecConfig, Executor};
use crate::gates::{apply_flip, apply_phase, apply_unitary2, apply_y, measure_qubit, ControlSpec, Unitary2};
use crate::qram::{qram_load, QramMemory};
use crate::state::{RegisterId, RegisterType, SparseState, DEFAULT_SLOT_CAPACITY};

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub exec: ExecConfig,
    /// Number of measurement samples; 0 runs a single trajectory without a
    /// histogram.
    pub shots: u64,
    pub seed: u64,
    /// Timed repetitions of the circuit.
    pub trials: usize,
    pub memory: Option<QramMemory>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            exec: ExecConfig::default(),
            shots: 0,
            seed: 0,
            trials: 1,
            memory: None,
        }
    }
}

/// Result of running a circuit.
///
/// `peak_branches` is the largest branch count reached, including partners
/// created transiently inside interference gates. Histogram keys list the
/// classical registers from last declared to first, separated by spaces,
/// each written most significant bit first.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub qubit_count: u32,
    pub gate_count: usize,
    pub threads: usize,
    pub wall_ms: Vec<f64>,
    pub peak_branches: usize,
    pub final_branches: usize,
    pub final_norm: f64,
    pub bytes_per_branch: usize,
    pub memory_proxy_bytes: usize,
    pub shots: u64,
    pub histogram: BTreeMap<String, u64>,
}

impl RunReport {
    pub fn mean_wall_ms(&self) -> f64 {
        if self.wall_ms.is_empty() {
            0.0
        } else {
            self.wall_ms.iter().sum::<f64>() / self.wall_ms.len() as f64
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Two sections: a one-row summary, then `outcome,count` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "qubit_count,gate_count,threads,trials,mean_wall_ms,peak_branches,final_branches,final_norm,bytes_per_branch,memory_proxy_bytes,shots\n",
        );
        let _ = writeln!(
            s,
            "{},{},{},{},{:.6},{},{},{:.15},{},{},{}",
            self.qubit_count,
            self.gate_count,
            self.threads,
            self.wall_ms.len(),
            self.mean_wall_ms(),
            self.peak_branches,
            self.final_branches,
            self.final_norm,
            self.bytes_per_branch,
            self.memory_proxy_bytes,
            self.shots
        );
        if !self.histogram.is_empty() {
            s.push_str("outcome,count\n");
            for (k, v) in &self.histogram {
                let _ = writeln!(s, "{k},{v}");
            }
        }
        s
    }
}

#[derive(Debug, Clone)]
enum Op {
    Flip(RegisterId, u32, ControlSpec),
    Y(RegisterId, u32),
    Phase(RegisterId, u32, Complex64, ControlSpec),
    U(RegisterId, u32, Unitary2, ControlSpec),
    Measure { reg: RegisterId, bit: u32, creg: usize, cbit: u32 },
    Qram(RegisterId, RegisterId),
}

struct Layout {
    // Per quantum register: simulator registers of up to 64 qubits.
    qregs: HashMap<String, Vec<RegisterId>>,
    // Per classical register: (index in declaration order, size).
    cregs: HashMap<String, (usize, u32)>,
    creg_sizes: Vec<u32>,
}

impl Layout {
    fn qubit(&self, q: &QubitRef) -> (RegisterId, u32) {
        (self.qregs[&q.reg][(q.index / 64) as usize], q.index % 64)
    }
}

fn allocate(ir: &CircuitIR, exec: &Executor) -> Result<(SparseState, Layout)> {
    let chunks: usize = ir
        .regs
        .iter()
        .filter(|r| r.kind == RegKind::Quantum)
        .map(|r| r.size.div_ceil(64) as usize)
        .sum();
    let mut state = SparseState::with_capacity(chunks.max(DEFAULT_SLOT_CAPACITY)).with_executor(exec.clone());
    let mut layout = Layout {
        qregs: HashMap::new(),
        cregs: HashMap::new(),
        creg_sizes: Vec::new(),
    };
    for r in &ir.regs {
        match r.kind {
            RegKind::Quantum => {
                let n = r.size.div_ceil(64);
                let mut ids = Vec::new();
                for k in 0..n {
                    let width = (r.size - 64 * k).min(64);
                    let name = if n == 1 { r.name.clone() } else { format!("{}.{k}", r.name) };
                    let dtype = if width == 1 { RegisterType::Boolean } else { RegisterType::UnsignedInt };
                    ids.push(state.add_register(&name, width, dtype)?);
                }
                layout.qregs.insert(r.name.clone(), ids);
            }
            RegKind::Classical => {
                layout.cregs.insert(r.name.clone(), (layout.creg_sizes.len(), r.size));
                layout.creg_sizes.push(r.size);
            }
        }
    }
    Ok((state, layout))
}

fn lower(ir: &CircuitIR, layout: &Layout, memory: Option<&QramMemory>) -> Result<Vec<Op>> {
    let mut ops = Vec::new();
    let none = ControlSpec::none();
    for ins in &ir.instrs {
        match &ins.stmt {
            Stmt::Barrier(_) => {}
            Stmt::Measure { qubit, bit } => {
                let (reg, b) = layout.qubit(qubit);
                let (creg, _) = layout.cregs[&bit.reg];
                ops.push(Op::Measure { reg, bit: b, creg, cbit: bit.index });
            }
            Stmt::Qram { addr, data } => {
                if memory.is_none() {
                    return Err(QasmError::MissingMemory { line: ins.line, col: ins.col }.into());
                }
                let single = |name: &str| -> Result<RegisterId> {
                    match layout.qregs[name].as_slice() {
                        [id] => Ok(*id),
                        _ => Err(Error::WidthMismatch(64 * layout.qregs[name].len() as u32, 64)),
                    }
                };
                ops.push(Op::Qram(single(addr)?, single(data)?));
            }
            Stmt::Gate { name, params, qubits } => {
                let q: Vec<(RegisterId, u32)> = qubits.iter().map(|x| layout.qubit(x)).collect();
                let (r, b) = q[0];
                let ctl = |i: usize| ControlSpec::on(q[i].0, q[i].1);
                let phase = |t: f64| Complex64::from_polar(1.0, t);
                match name.as_str() {
                    "id" => {}
                    "x" => ops.push(Op::Flip(r, b, none.clone())),
                    "y" => ops.push(Op::Y(r, b)),
                    "z" => ops.push(Op::Phase(r, b, Complex64::new(-1.0, 0.0), none.clone())),
                    "s" => ops.push(Op::Phase(r, b, Complex64::new(0.0, 1.0), none.clone())),
                    "sdg" => ops.push(Op::Phase(r, b, Complex64::new(0.0, -1.0), none.clone())),
                    "t" => ops.push(Op::Phase(r, b, phase(FRAC_PI_4), none.clone())),
                    "tdg" => ops.push(Op::Phase(r, b, phase(-FRAC_PI_4), none.clone())),
                    "h" => ops.push(Op::U(r, b, Unitary2::h(), none.clone())),
                    "rx" => ops.push(Op::U(r, b, Unitary2::rx(params[0]), none.clone())),
                    "ry" => ops.push(Op::U(r, b, Unitary2::ry(params[0]), none.clone())),
                    "rz" => ops.push(Op::U(r, b, Unitary2::rz(params[0]), none.clone())),
                    "u1" => ops.push(Op::Phase(r, b, phase(params[0]), none.clone())),
                    "u2" => ops.push(Op::U(r, b, Unitary2::u2(params[0], params[1]), none.clone())),
                    "u3" | "U" => ops.push(Op::U(r, b, Unitary2::u3(params[0], params[1], params[2]), none.clone())),
                    "cx" | "CX" => ops.push(Op::Flip(q[1].0, q[1].1, ctl(0))),
                    "cz" => ops.push(Op::Phase(q[1].0, q[1].1, Complex64::new(-1.0, 0.0), ctl(0))),
                    "ch" => ops.push(Op::U(q[1].0, q[1].1, Unitary2::h(), ctl(0))),
                    "crz" => ops.push(Op::U(q[1].0, q[1].1, Unitary2::rz(params[0]), ctl(0))),
                    "cu1" => ops.push(Op::Phase(q[1].0, q[1].1, phase(params[0]), ctl(0))),
                    "swap" => {
                        ops.push(Op::Flip(q[1].0, q[1].1, ctl(0)));
                        ops.push(Op::Flip(q[0].0, q[0].1, ctl(1)));
                        ops.push(Op::Flip(q[1].0, q[1].1, ctl(0)));
                    }
                    "ccx" => {
                        let c = ctl(0).and(q[1].0, q[1].1, true);
                        ops.push(Op::Flip(q[2].0, q[2].1, c));
                    }
                    other => unreachable!("parser admitted unknown gate {other}"),
                }
            }
        }
    }
    Ok(ops)
}

fn apply(state: &mut SparseState, op: &Op, memory: Option<&QramMemory>, cbits: &mut [Vec<bool>], rng: &mut ChaCha8Rng) -> Result<()> {
    match op {
        Op::Flip(r, b, c) => apply_flip(state, *r, *b, c),
        Op::Y(r, b) => apply_y(state, *r, *b, &ControlSpec::none()),
        Op::Phase(r, b, p, c) => apply_phase(state, *r, *b, *p, c),
        Op::U(r, b, u, c) => apply_unitary2(state, *r, *b, u, c),
        Op::Qram(a, d) => qram_load(state, *a, *d, memory.expect("checked during lowering")),
        Op::Measure { reg, bit, creg, cbit } => {
            let v = measure_qubit(state, *reg, *bit, rng)?;
            cbits[*creg][*cbit as usize] = v == 1;
            Ok(())
        }
    }
}

fn outcome_key(cbits: &[Vec<bool>]) -> String {
    cbits
        .iter()
        .rev()
        .map(|bits| bits.iter().rev().map(|&b| if b { '1' } else { '0' }).collect::<String>())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Samples terminal measurements from a final state without collapsing it.
fn sample_terminal_ops(state: &SparseState, ops: &[Op], creg_sizes: &[u32], shots: u64, rng: &mut ChaCha8Rng) -> BTreeMap<String, u64> {
    let mut cum = Vec::with_capacity(state.len());
    let mut acc = 0.0;
    for a in state.amplitudes() {
        acc += a.norm_sqr();
        cum.push(acc);
    }
    let mut hist = BTreeMap::new();
    for _ in 0..shots {
        let r = rng.gen::<f64>() * acc;
        let i = cum.partition_point(|&c| c <= r).min(cum.len() - 1);
        let mut cbits: Vec<Vec<bool>> = creg_sizes.iter().map(|&n| vec![false; n as usize]).collect();
        for op in ops {
            if let Op::Measure { reg, bit, creg, cbit } = op {
                cbits[*creg][*cbit as usize] = (state.value(i, *reg) >> bit) & 1 == 1;
            }
        }
        *hist.entry(outcome_key(&cbits)).or_default() += 1;
    }
    hist
}

/// Samples `shots` outcomes of measuring all qubits of `state` in the
/// computational basis, keyed by dense index.
pub fn sample_terminal(state: &SparseState, shots: u64, seed: u64) -> BTreeMap<u64, u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cum = Vec::with_capacity(state.len());
    let mut acc = 0.0;
    for a in state.amplitudes() {
        acc += a.norm_sqr();
        cum.push(acc);
    }
    let mut hist = BTreeMap::new();
    for _ in 0..shots {
        let r = rng.gen::<f64>() * acc;
        let i = cum.partition_point(|&c| c <= r).min(cum.len() - 1);
        *hist.entry(state.dense_index(i)).or_default() += 1;
    }
    hist
}

/// Allocates registers, lowers the IR and executes it.
///
/// When every measurement is terminal, the circuit is simulated once per
/// trial and shots are sampled from the final state. Otherwise every shot
/// re-runs the circuit with collapsing measurements.
pub fn lower_and_run(ir: &CircuitIR, opts: &RunOptions) -> Result<(RunReport, SparseState)> {
    let exec = Executor::new(opts.exec)?;
    let memory = opts.memory.as_ref();
    let (proto, layout) = allocate(ir, &exec)?;
    let ops = lower(ir, &layout, memory)?;
    let first_measure = ops.iter().position(|o| matches!(o, Op::Measure { .. }));
    let terminal = first_measure.is_none_or(|k| ops[k..].iter().all(|o| matches!(o, Op::Measure { .. })));
    let prefix = if terminal { &ops[..first_measure.unwrap_or(ops.len())] } else { &ops[..] };
    let fresh_cbits = || -> Vec<Vec<bool>> { layout.creg_sizes.iter().map(|&n| vec![false; n as usize]).collect() };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut wall_ms = Vec::new();
    let mut last = proto.clone();
    let mut peak = 0;
    for _ in 0..opts.trials.max(1) {
        let mut state = proto.clone();
        let mut cbits = fresh_cbits();
        let mut trial_rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let t0 = Instant::now();
        for op in prefix {
            apply(&mut state, op, memory, &mut cbits, &mut trial_rng)?;
        }
        wall_ms.push(t0.elapsed().as_secs_f64() * 1e3);
        peak = peak.max(state.table().max_system_size());
        last = state;
    }

    let mut histogram = BTreeMap::new();
    if opts.shots > 0 {
        if terminal {
            if first_measure.is_some() {
                histogram = sample_terminal_ops(&last, &ops, &layout.creg_sizes, opts.shots, &mut rng);
            }
        } else {
            for _ in 0..opts.shots {
                let mut state = proto.clone();
                let mut cbits = fresh_cbits();
                for op in &ops {
                    apply(&mut state, op, memory, &mut cbits, &mut rng)?;
                }
                peak = peak.max(state.table().max_system_size());
                *histogram.entry(outcome_key(&cbits)).or_default() += 1;
                last = state;
            }
        }
    }

    let bytes = last.bytes_per_branch();
    let report = RunReport {
        qubit_count: ir.qubit_count(),
        gate_count: ir.gate_count(),
        threads: exec.threads(),
        wall_ms,
        peak_branches: peak,
        final_branches: last.len(),
        final_norm: last.norm_sqr(),
        bytes_per_branch: bytes,
        memory_proxy_bytes: peak * bytes,
        shots: opts.shots,
        histogram,
    };
    Ok((report, last))
}

/// JSON listing of branches: amplitude and per-register values.
pub fn dump_state(state: &SparseState) -> serde_json::Value {
    let names: Vec<(RegisterId, String)> = state
        .table()
        .active_ids()
        .map(|id| (id, state.table().get(id).expect("active").name.clone()))
        .collect();
    let branches: Vec<serde_json::Value> = state
        .branches()
        .map(|b| {
            let values: serde_json::Map<String, serde_json::Value> =
                names.iter().map(|(id, n)| (n.clone(), b.value(*id).into())).collect();
            serde_json::json!({ "amplitude": [b.amplitude.re, b.amplitude.im], "values": values })
        })
        .collect();
    serde_json::Value::Array(branches)
}
