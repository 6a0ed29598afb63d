//! Gate operations on a [`SparseState`].
//!
//! Non-interference gates (flips, phases, arithmetic, register swaps) update
//! each branch on its own and keep the branch count. Interference gates
//! (general 2x2 unitaries) sort branches into coherent pairs, mix each pair,
//! create missing partners and prune.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec::profiler;
use crate::state::{width_mask, RegisterId, RegisterTable, SparseState};

const UNITARY_TOL: f64 = 1e-12;
const KIND_TOL: f64 = 1e-14;
const MEASURE_NORM_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Control {
    pub reg: RegisterId,
    pub bit: u32,
    pub value: bool,
}

/// Conjunction of single-bit conditions on register values.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ControlSpec {
    entries: Vec<Control>,
}

impl ControlSpec {
    pub fn none() -> Self {
        Self::default()
    }

    /// Single control requiring the bit to be 1.
    pub fn on(reg: RegisterId, bit: u32) -> Self {
        Self::none().and(reg, bit, true)
    }

    pub fn and(mut self, reg: RegisterId, bit: u32, value: bool) -> Self {
        self.entries.push(Control { reg, bit, value });
        self
    }

    pub fn entries(&self) -> &[Control] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Validates against the table and the gate target, and folds the
    /// conditions into one `(slot, mask, want)` test per register.
    pub(crate) fn compile(&self, table: &RegisterTable, target: Option<(RegisterId, u32)>) -> Result<Predicate> {
        let mut terms: Vec<(usize, u64, u64)> = Vec::new();
        for c in &self.entries {
            let width = table.get(c.reg).map_err(|_| Error::InvalidControl(c.reg))?.width;
            if c.bit >= width || target == Some((c.reg, c.bit)) {
                return Err(Error::InvalidControl(c.reg));
            }
            let bit = 1u64 << c.bit;
            let want = if c.value { bit } else { 0 };
            match terms.iter_mut().find(|t| t.0 == c.reg.index()) {
                Some(t) if t.1 & bit != 0 => return Err(Error::InvalidControl(c.reg)),
                Some(t) => {
                    t.1 |= bit;
                    t.2 |= want;
                }
                None => terms.push((c.reg.index(), bit, want)),
            }
        }
        Ok(Predicate { terms })
    }
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Predicate {
    terms: Vec<(usize, u64, u64)>,
}

impl Predicate {
    #[inline]
    pub fn holds(&self, row: &[u64]) -> bool {
        self.terms.iter().all(|&(s, m, w)| row[s] & m == w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateKind {
    Diagonal,
    AntiDiagonal,
    General,
}

/// A 2x2 unitary `[[u00, u01], [u10, u11]]` acting on `(|0>, |1>)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Unitary2 {
    pub u00: Complex64,
    pub u01: Complex64,
    pub u10: Complex64,
    pub u11: Complex64,
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

impl Unitary2 {
    /// Checked constructor; fails with [`Error::NotUnitary`] when `U†U`
    /// deviates from the identity by more than 1e-12 in any entry.
    pub fn new(u00: Complex64, u01: Complex64, u10: Complex64, u11: Complex64) -> Result<Self> {
        let u = Self { u00, u01, u10, u11 };
        let dev = u.unitarity_error();
        if dev > UNITARY_TOL || !dev.is_finite() {
            return Err(Error::NotUnitary(dev));
        }
        Ok(u)
    }

    pub(crate) const fn raw(u00: Complex64, u01: Complex64, u10: Complex64, u11: Complex64) -> Self {
        Self { u00, u01, u10, u11 }
    }

    pub fn unitarity_error(&self) -> f64 {
        let p = self.dagger().mul(self);
        [
            (p.u00 - 1.0).norm(),
            p.u01.norm(),
            p.u10.norm(),
            (p.u11 - 1.0).norm(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn kind(&self) -> GateKind {
        if self.u01.norm() <= KIND_TOL && self.u10.norm() <= KIND_TOL {
            GateKind::Diagonal
        } else if self.u00.norm() <= KIND_TOL && self.u11.norm() <= KIND_TOL {
            GateKind::AntiDiagonal
        } else {
            GateKind::General
        }
    }

    pub fn dagger(&self) -> Self {
        Self::raw(self.u00.conj(), self.u10.conj(), self.u01.conj(), self.u11.conj())
    }

    /// Matrix product `self · rhs` (apply `rhs` first).
    pub fn mul(&self, rhs: &Self) -> Self {
        Self::raw(
            self.u00 * rhs.u00 + self.u01 * rhs.u10,
            self.u00 * rhs.u01 + self.u01 * rhs.u11,
            self.u10 * rhs.u00 + self.u11 * rhs.u10,
            self.u10 * rhs.u01 + self.u11 * rhs.u11,
        )
    }

    pub fn entries(&self) -> [Complex64; 4] {
        [self.u00, self.u01, self.u10, self.u11]
    }

    pub fn identity() -> Self {
        Self::raw(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0))
    }

    pub fn h() -> Self {
        let s = FRAC_1_SQRT_2;
        Self::raw(c(s, 0.0), c(s, 0.0), c(s, 0.0), c(-s, 0.0))
    }

    pub fn x() -> Self {
        Self::raw(c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0))
    }

    pub fn y() -> Self {
        Self::raw(c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0))
    }

    pub fn z() -> Self {
        Self::phase(std::f64::consts::PI)
    }

    /// `diag(1, e^{iλ})`; also OpenQASM `u1`.
    pub fn phase(lambda: f64) -> Self {
        Self::raw(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), Complex64::from_polar(1.0, lambda))
    }

    pub fn rx(theta: f64) -> Self {
        let (s, co) = (theta / 2.0).sin_cos();
        Self::raw(c(co, 0.0), c(0.0, -s), c(0.0, -s), c(co, 0.0))
    }

    pub fn ry(theta: f64) -> Self {
        let (s, co) = (theta / 2.0).sin_cos();
        Self::raw(c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0))
    }

    pub fn rz(theta: f64) -> Self {
        Self::raw(
            Complex64::from_polar(1.0, -theta / 2.0),
            c(0.0, 0.0),
            c(0.0, 0.0),
            Complex64::from_polar(1.0, theta / 2.0),
        )
    }

    /// OpenQASM 2 `u3(θ, φ, λ)`.
    pub fn u3(theta: f64, phi: f64, lambda: f64) -> Self {
        let (s, co) = (theta / 2.0).sin_cos();
        Self::raw(
            c(co, 0.0),
            -Complex64::from_polar(s, lambda),
            Complex64::from_polar(s, phi),
            Complex64::from_polar(co, phi + lambda),
        )
    }

    pub fn u2(phi: f64, lambda: f64) -> Self {
        Self::u3(std::f64::consts::FRAC_PI_2, phi, lambda)
    }
}

fn target_mask(state: &SparseState, reg: RegisterId, bit: u32) -> Result<u64> {
    state.check_target(reg, bit)?;
    Ok(1u64 << bit)
}

/// X on one bit of the branches satisfying `controls`.
pub fn apply_flip(state: &mut SparseState, reg: RegisterId, bit: u32, controls: &ControlSpec) -> Result<()> {
    let _t = profiler::scope("flip", "X");
    let mask = target_mask(state, reg, bit)?;
    let pred = controls.compile(state.table(), Some((reg, bit)))?;
    let s = reg.index();
    state.map_branches(move |_, row| {
        if pred.holds(row) {
            row[s] ^= mask;
        }
    });
    Ok(())
}

/// Multiplies branches whose target bit is 1 by `phase` (unit modulus).
pub fn apply_phase(
    state: &mut SparseState,
    reg: RegisterId,
    bit: u32,
    phase: Complex64,
    controls: &ControlSpec,
) -> Result<()> {
    let _t = profiler::scope("phase", "Phase");
    if (phase.norm() - 1.0).abs() > UNITARY_TOL || !phase.norm().is_finite() {
        return Err(Error::NonUnitPhase(phase.norm()));
    }
    let mask = target_mask(state, reg, bit)?;
    let pred = controls.compile(state.table(), Some((reg, bit)))?;
    let s = reg.index();
    state.map_amplitudes(move |a, row| {
        if row[s] & mask != 0 && pred.holds(row) {
            *a *= phase;
        }
    });
    Ok(())
}

pub fn apply_y(state: &mut SparseState, reg: RegisterId, bit: u32, controls: &ControlSpec) -> Result<()> {
    let _t = profiler::scope("flip", "Y");
    let mask = target_mask(state, reg, bit)?;
    let pred = controls.compile(state.table(), Some((reg, bit)))?;
    let s = reg.index();
    state.map_branches(move |a, row| {
        if pred.holds(row) {
            // Y|0> = i|1>, Y|1> = -i|0>
            *a *= if row[s] & mask == 0 { c(0.0, 1.0) } else { c(0.0, -1.0) };
            row[s] ^= mask;
        }
    });
    Ok(())
}

/// Applies a 2x2 unitary, taking the branch-local fast path for diagonal and
/// anti-diagonal matrices.
pub fn apply_unitary2(
    state: &mut SparseState,
    reg: RegisterId,
    bit: u32,
    u: &Unitary2,
    controls: &ControlSpec,
) -> Result<()> {
    let dev = u.unitarity_error();
    if dev > UNITARY_TOL || !dev.is_finite() {
        return Err(Error::NotUnitary(dev));
    }
    let mask = target_mask(state, reg, bit)?;
    let pred = controls.compile(state.table(), Some((reg, bit)))?;
    let s = reg.index();
    match u.kind() {
        GateKind::Diagonal => {
            let _t = profiler::scope("rotation", "Rot_diag");
            let (d0, d1) = (u.u00, u.u11);
            state.map_amplitudes(move |a, row| {
                if pred.holds(row) {
                    *a *= if row[s] & mask == 0 { d0 } else { d1 };
                }
            });
        }
        GateKind::AntiDiagonal => {
            let _t = profiler::scope("rotation", "Rot_adiag");
            let (to1, to0) = (u.u10, u.u01);
            state.map_branches(move |a, row| {
                if pred.holds(row) {
                    *a *= if row[s] & mask == 0 { to1 } else { to0 };
                    row[s] ^= mask;
                }
            });
        }
        GateKind::General => {
            let _t = profiler::scope("rotation", "Rot");
            general(state, reg, bit, u, &pred);
        }
    }
    Ok(())
}

/// Always takes the sort/group/prune path, whatever the matrix structure.
pub fn apply_unitary2_general(
    state: &mut SparseState,
    reg: RegisterId,
    bit: u32,
    u: &Unitary2,
    controls: &ControlSpec,
) -> Result<()> {
    let _t = profiler::scope("rotation", "Rot");
    let dev = u.unitarity_error();
    if dev > UNITARY_TOL || !dev.is_finite() {
        return Err(Error::NotUnitary(dev));
    }
    state.check_target(reg, bit)?;
    let pred = controls.compile(state.table(), Some((reg, bit)))?;
    general(state, reg, bit, u, &pred);
    Ok(())
}

fn general(state: &mut SparseState, reg: RegisterId, bit: u32, u: &Unitary2, pred: &Predicate) {
    let m = u.entries();
    state.interfere(reg, bit, |row| pred.holds(row), |_| Some(m));
}

/// Interference gate whose matrix depends on the branch: `select` sees the
/// slots of a group member and returns the unitary for that group, or `None`
/// for identity. `select` must not read the target bit. Matrices are not
/// re-validated; callers guarantee unitarity.
pub fn apply_unitary2_with<F>(
    state: &mut SparseState,
    reg: RegisterId,
    bit: u32,
    controls: &ControlSpec,
    mut select: F,
) -> Result<()>
where
    F: FnMut(&[u64]) -> Option<Unitary2>,
{
    let _t = profiler::scope("rotation", "Rot_select");
    state.check_target(reg, bit)?;
    let pred = controls.compile(state.table(), Some((reg, bit)))?;
    state.interfere(reg, bit, |row| pred.holds(row), |row| select(row).map(|u| u.entries()));
    Ok(())
}

/// Branch-dependent diagonal gate: multiplies each branch satisfying
/// `controls` by `factor(slots)`, which must have unit modulus.
pub fn apply_diagonal_with<F>(state: &mut SparseState, controls: &ControlSpec, factor: F) -> Result<()>
where
    F: Fn(&[u64]) -> Complex64 + Sync + Send,
{
    let _t = profiler::scope("phase", "Phase_select");
    let pred = controls.compile(state.table(), None)?;
    state.map_amplitudes(move |a, row| {
        if pred.holds(row) {
            *a *= factor(row);
        }
    });
    Ok(())
}

/// Fixed-point angle word to radians: `θ = word · 2π / 2^64`.
pub fn angle_from_word(word: u64) -> f64 {
    word as f64 * (std::f64::consts::TAU / 18_446_744_073_709_551_616.0)
}

/// Inverse of [`angle_from_word`] for `θ` in `[0, 2π)`, rounding to the
/// nearest representable word.
pub fn word_from_angle(theta: f64) -> u64 {
    let t = theta.rem_euclid(std::f64::consts::TAU) / std::f64::consts::TAU;
    // 2^64 · t, computed in two halves to keep the low bits.
    let hi = (t * 4_294_967_296.0).floor();
    let lo = ((t * 4_294_967_296.0 - hi) * 4_294_967_296.0).round();
    ((hi as u64) << 32).wrapping_add(lo as u64)
}

/// `Ry(±θ)` on the target where `θ` is read from a 64-bit angle register
/// (see [`angle_from_word`]). `inverse` applies `Ry(-θ)`.
pub fn apply_ry_by_register(
    state: &mut SparseState,
    reg: RegisterId,
    bit: u32,
    angle_reg: RegisterId,
    inverse: bool,
    controls: &ControlSpec,
) -> Result<()> {
    if angle_reg == reg {
        return Err(Error::AliasedRegisters(reg));
    }
    let w = state.table().width(angle_reg)?;
    if w != 64 {
        return Err(Error::WidthMismatch(w, 64));
    }
    let a = angle_reg.index();
    let sign = if inverse { -1.0 } else { 1.0 };
    apply_unitary2_with(state, reg, bit, controls, |row| {
        (row[a] != 0).then(|| Unitary2::ry(sign * angle_from_word(row[a])))
    })
}

fn check_operand(state: &SparseState, reg: RegisterId) -> Result<(usize, u64)> {
    let d = state.table().get(reg)?;
    Ok((reg.index(), d.mask()))
}

/// `reg ← reg + c mod 2^width`.
pub fn arith_add_const(state: &mut SparseState, reg: RegisterId, value: u64, controls: &ControlSpec) -> Result<()> {
    let _t = profiler::scope("arith", "AddConst");
    let (s, mask) = check_operand(state, reg)?;
    let pred = controls.compile(state.table(), None)?;
    if pred.terms.iter().any(|t| t.0 == s) {
        return Err(Error::InvalidControl(reg));
    }
    state.map_branches(move |_, row| {
        if pred.holds(row) {
            row[s] = row[s].wrapping_add(value) & mask;
        }
    });
    Ok(())
}

fn two_operands(state: &SparseState, src: RegisterId, dst: RegisterId, controls: &ControlSpec) -> Result<(usize, usize, u64, Predicate)> {
    if src == dst {
        return Err(Error::AliasedRegisters(src));
    }
    let (ss, _) = check_operand(state, src)?;
    let (ds, mask) = check_operand(state, dst)?;
    let pred = controls.compile(state.table(), None)?;
    if pred.terms.iter().any(|t| t.0 == ds) {
        return Err(Error::InvalidControl(dst));
    }
    Ok((ss, ds, mask, pred))
}

/// `dst ← dst + src mod 2^width(dst)`.
pub fn arith_add_reg(state: &mut SparseState, src: RegisterId, dst: RegisterId, controls: &ControlSpec) -> Result<()> {
    let _t = profiler::scope("arith", "AddReg");
    let (ss, ds, mask, pred) = two_operands(state, src, dst, controls)?;
    state.map_branches(move |_, row| {
        if pred.holds(row) {
            row[ds] = row[ds].wrapping_add(row[ss]) & mask;
        }
    });
    Ok(())
}

/// `dst ← dst - src mod 2^width(dst)`; inverse of [`arith_add_reg`].
pub fn arith_sub_reg(state: &mut SparseState, src: RegisterId, dst: RegisterId, controls: &ControlSpec) -> Result<()> {
    let _t = profiler::scope("arith", "SubReg");
    let (ss, ds, mask, pred) = two_operands(state, src, dst, controls)?;
    state.map_branches(move |_, row| {
        if pred.holds(row) {
            row[ds] = row[ds].wrapping_sub(row[ss]) & mask;
        }
    });
    Ok(())
}

/// `dst ← dst XOR src`, truncated to the width of `dst`.
pub fn arith_xor_reg(state: &mut SparseState, src: RegisterId, dst: RegisterId, controls: &ControlSpec) -> Result<()> {
    let _t = profiler::scope("arith", "XorReg");
    let (ss, ds, mask, pred) = two_operands(state, src, dst, controls)?;
    state.map_branches(move |_, row| {
        if pred.holds(row) {
            row[ds] ^= row[ss] & mask;
        }
    });
    Ok(())
}

/// `reg ← reg · c mod 2^width` for odd `c`.
pub fn arith_mul_const_odd(state: &mut SparseState, reg: RegisterId, value: u64, controls: &ControlSpec) -> Result<()> {
    let _t = profiler::scope("arith", "MulConst");
    if value.is_multiple_of(2) {
        return Err(Error::EvenMultiplier(value));
    }
    let (s, mask) = check_operand(state, reg)?;
    let pred = controls.compile(state.table(), None)?;
    if pred.terms.iter().any(|t| t.0 == s) {
        return Err(Error::InvalidControl(reg));
    }
    state.map_branches(move |_, row| {
        if pred.holds(row) {
            row[s] = row[s].wrapping_mul(value) & mask;
        }
    });
    Ok(())
}

/// Multiplicative inverse of an odd `c` modulo `2^width`.
pub fn inverse_mod_pow2(value: u64, width: u32) -> Result<u64> {
    if value.is_multiple_of(2) {
        return Err(Error::EvenMultiplier(value));
    }
    // Newton iteration doubles the number of correct low bits each step.
    let mut x = value;
    for _ in 0..6 {
        x = x.wrapping_mul(2u64.wrapping_sub(value.wrapping_mul(x)));
    }
    Ok(x & width_mask(width))
}

/// Exchanges the contents of two equal-width registers.
pub fn swap_registers(state: &mut SparseState, a: RegisterId, b: RegisterId, controls: &ControlSpec) -> Result<()> {
    let _t = profiler::scope("flip", "SwapReg");
    if a == b {
        return Err(Error::AliasedRegisters(a));
    }
    let (wa, wb) = (state.table().width(a)?, state.table().width(b)?);
    if wa != wb {
        return Err(Error::WidthMismatch(wa, wb));
    }
    let pred = controls.compile(state.table(), None)?;
    if pred.terms.iter().any(|t| t.0 == a.index() || t.0 == b.index()) {
        return Err(Error::InvalidControl(a));
    }
    let (sa, sb) = (a.index(), b.index());
    state.map_branches(move |_, row| {
        if pred.holds(row) {
            row.swap(sa, sb);
        }
    });
    Ok(())
}

fn check_normalized(state: &SparseState) -> Result<f64> {
    let norm = state.norm_sqr();
    if (norm - 1.0).abs() > MEASURE_NORM_TOL {
        return Err(Error::UnnormalizedState(norm));
    }
    Ok(norm)
}

fn collapse<K: Ord + Copy>(state: &mut SparseState, rng: &mut impl Rng, key: impl Fn(&[u64]) -> K) -> Result<K> {
    let norm = check_normalized(state)?;
    let mut probs: BTreeMap<K, f64> = BTreeMap::new();
    for b in state.branches() {
        *probs.entry(key(b.registers)).or_default() += b.amplitude.norm_sqr();
    }
    let r = rng.gen::<f64>() * norm;
    let mut acc = 0.0;
    let mut chosen = *probs.keys().next_back().expect("state has at least one branch");
    for (&k, &p) in &probs {
        acc += p;
        if r < acc {
            chosen = k;
            break;
        }
    }
    let p = probs[&chosen];
    state.retain(|_, row| key(row) == chosen);
    state.scale(1.0 / p.sqrt());
    Ok(chosen)
}

/// Projective measurement of a whole register. The state collapses onto the
/// outcome and is renormalized.
pub fn measure_register(state: &mut SparseState, reg: RegisterId, rng: &mut impl Rng) -> Result<u64> {
    let _t = profiler::scope("measure", "MeasureReg");
    let s = reg.index();
    state.table().get(reg)?;
    collapse(state, rng, |row| row[s])
}

pub fn measure_register_seeded(state: &mut SparseState, reg: RegisterId, seed: u64) -> Result<u64> {
    measure_register(state, reg, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Measurement of a single qubit; returns 0 or 1.
pub fn measure_qubit(state: &mut SparseState, reg: RegisterId, bit: u32, rng: &mut impl Rng) -> Result<u64> {
    let _t = profiler::scope("measure", "MeasureBit");
    state.check_target(reg, bit)?;
    let s = reg.index();
    collapse(state, rng, |row| (row[s] >> bit) & 1)
}
