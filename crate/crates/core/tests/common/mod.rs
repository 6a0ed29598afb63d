//! Shared test oracles: a brute-force statevector simulator over the QASM
//! IR and a seeded random-circuit generator.
#![allow(dead_code)]

use std::collections::HashMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparq::qasm::{CircuitIR, RegKind, Stmt};

pub type M2 = [[Complex64; 2]; 2];

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn cis(t: f64) -> Complex64 {
    Complex64::from_polar(1.0, t)
}

/// Matrices written out from their textbook definitions.
pub fn u3(theta: f64, phi: f64, lambda: f64) -> M2 {
    let (s, co) = (theta / 2.0).sin_cos();
    [
        [c(co, 0.0), -cis(lambda) * s],
        [cis(phi) * s, cis(phi + lambda) * co],
    ]
}

pub fn matrix(name: &str, p: &[f64]) -> M2 {
    let z = c(0.0, 0.0);
    let o = c(1.0, 0.0);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    match name {
        "id" => [[o, z], [z, o]],
        "x" | "cx" | "CX" | "ccx" => [[z, o], [o, z]],
        "y" => [[z, c(0.0, -1.0)], [c(0.0, 1.0), z]],
        "z" | "cz" => [[o, z], [z, -o]],
        "h" | "ch" => [[c(h, 0.0), c(h, 0.0)], [c(h, 0.0), c(-h, 0.0)]],
        "s" => [[o, z], [z, c(0.0, 1.0)]],
        "sdg" => [[o, z], [z, c(0.0, -1.0)]],
        "t" => [[o, z], [z, cis(PI / 4.0)]],
        "tdg" => [[o, z], [z, cis(-PI / 4.0)]],
        "rx" => {
            let (s, co) = (p[0] / 2.0).sin_cos();
            [[c(co, 0.0), c(0.0, -s)], [c(0.0, -s), c(co, 0.0)]]
        }
        "ry" => {
            let (s, co) = (p[0] / 2.0).sin_cos();
            [[c(co, 0.0), c(-s, 0.0)], [c(s, 0.0), c(co, 0.0)]]
        }
        "rz" | "crz" => [[cis(-p[0] / 2.0), z], [z, cis(p[0] / 2.0)]],
        "u1" | "cu1" => [[o, z], [z, cis(p[0])]],
        "u2" => u3(PI / 2.0, p[0], p[1]),
        "u3" | "U" => u3(p[0], p[1], p[2]),
        other => panic!("no oracle matrix for {other}"),
    }
}

/// Dense statevector, qubit `k` at bit `k` of the index.
pub struct Dense {
    pub n: u32,
    pub amps: Vec<Complex64>,
}

impl Dense {
    pub fn new(n: u32) -> Self {
        let mut amps = vec![c(0.0, 0.0); 1 << n];
        amps[0] = c(1.0, 0.0);
        Self { n, amps }
    }

    /// Applies `m` to `target` on the indices where all `controls` are 1.
    pub fn apply(&mut self, m: &M2, target: u32, controls: &[u32]) {
        let tmask = 1usize << target;
        let cmask: usize = controls.iter().map(|&q| 1usize << q).sum();
        for i in 0..self.amps.len() {
            if i & tmask != 0 || i & cmask != cmask {
                continue;
            }
            let j = i | tmask;
            let (a0, a1) = (self.amps[i], self.amps[j]);
            self.amps[i] = m[0][0] * a0 + m[0][1] * a1;
            self.amps[j] = m[1][0] * a0 + m[1][1] * a1;
        }
    }

    /// Runs the gate statements of `ir`; measurements and barriers are
    /// skipped.
    pub fn run(ir: &CircuitIR) -> Self {
        let mut offset = HashMap::new();
        let mut n = 0;
        for r in ir.regs.iter().filter(|r| r.kind == RegKind::Quantum) {
            offset.insert(r.name.clone(), n);
            n += r.size;
        }
        let mut d = Dense::new(n);
        for ins in &ir.instrs {
            if let Stmt::Gate { name, params, qubits } = &ins.stmt {
                let q: Vec<u32> = qubits.iter().map(|r| offset[&r.reg] + r.index).collect();
                match name.as_str() {
                    "swap" => {
                        let x = matrix("x", &[]);
                        d.apply(&x, q[1], &[q[0]]);
                        d.apply(&x, q[0], &[q[1]]);
                        d.apply(&x, q[1], &[q[0]]);
                    }
                    "ccx" => d.apply(&matrix("x", &[]), q[2], &[q[0], q[1]]),
                    _ if q.len() == 2 => d.apply(&matrix(name, params), q[1], &[q[0]]),
                    _ => d.apply(&matrix(name, params), q[0], &[]),
                }
            }
        }
        d
    }
}

pub const ONE_QUBIT: &[(&str, usize)] = &[
    ("id", 0),
    ("x", 0),
    ("y", 0),
    ("z", 0),
    ("h", 0),
    ("s", 0),
    ("sdg", 0),
    ("t", 0),
    ("tdg", 0),
    ("rx", 1),
    ("ry", 1),
    ("rz", 1),
    ("u1", 1),
    ("u2", 2),
    ("u3", 3),
];
pub const TWO_QUBIT: &[(&str, usize)] = &[("cx", 0), ("cz", 0), ("ch", 0), ("swap", 0), ("crz", 1), ("cu1", 1)];

/// Seeded random circuit over the full gate set on `n` qubits split across
/// two registers.
pub fn random_circuit(n: u32, gates: usize, seed: u64) -> String {
    assert!(n >= 3);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let na = n / 2;
    let nb = n - na;
    let qubit = |k: u32| if k < na { format!("a[{k}]") } else { format!("b[{}]", k - na) };
    let mut s = format!("OPENQASM 2.0;\ninclude \"qelib1.inc\";\nqreg a[{na}];\nqreg b[{nb}];\n");
    let distinct = |rng: &mut ChaCha8Rng, k: usize| -> Vec<u32> {
        let mut v: Vec<u32> = Vec::new();
        while v.len() < k {
            let q = rng.gen_range(0..n);
            if !v.contains(&q) {
                v.push(q);
            }
        }
        v
    };
    for _ in 0..gates {
        let kind = rng.gen_range(0..10);
        let (name, np, arity) = if kind < 5 {
            let (g, p) = ONE_QUBIT[rng.gen_range(0..ONE_QUBIT.len())];
            (g, p, 1)
        } else if kind < 9 {
            let (g, p) = TWO_QUBIT[rng.gen_range(0..TWO_QUBIT.len())];
            (g, p, 2)
        } else {
            ("ccx", 0, 3)
        };
        let qs = distinct(&mut rng, arity);
        let params: Vec<String> = (0..np).map(|_| format!("{:?}", rng.gen_range(-PI..PI))).collect();
        let ps = if params.is_empty() { String::new() } else { format!("({})", params.join(",")) };
        let args: Vec<String> = qs.iter().map(|&q| qubit(q)).collect();
        s.push_str(&format!("{name}{ps} {};\n", args.join(",")));
    }
    s
}

pub fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}
