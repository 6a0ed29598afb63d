use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use super::system::{LinearSystem, Variant};
use super::tree::{build_angle_trees, AngleTree, AngleTrees};
use crate::error::{Error, Result};
use crate::gates::{
    apply_diagonal_with, apply_flip, apply_phase, apply_ry_by_register, apply_unitary2, apply_unitary2_with,
    swap_registers, word_from_angle, ControlSpec, Unitary2,
};
use crate::qram::{qram_load_fields, AddressField, QramMemory};
use crate::state::{RegisterId, RegisterType, SparseState};

const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// How the angle trees are queried by the controlled rotations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RotationQuery {
    /// The rotation reads its angle straight from the tree: QRAM load,
    /// `Ry` by register and unload collapsed into one interference step.
    Fused,
    /// Angles are loaded into a 64-bit `theta` register by QRAM, consumed by
    /// a register-controlled `Ry` and unloaded; signs go through a 1-bit
    /// `flag` register the same way.
    Qram,
}

/// Adiabatic schedule `f: [0,1] → [0,1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Schedule {
    /// `f(s) = κ/(κ−1)·(1 − 1/(1 + s(κ−1)))`.
    Rational { kappa: f64 },
    Linear,
    Constant(f64),
}

impl Schedule {
    pub fn eval(&self, s: f64) -> f64 {
        match *self {
            Schedule::Rational { kappa } => kappa / (kappa - 1.0) * (1.0 - 1.0 / (1.0 + s * (kappa - 1.0))),
            Schedule::Linear => s,
            Schedule::Constant(f) => f,
        }
    }

    pub fn describe(&self) -> String {
        match *self {
            Schedule::Rational { kappa } => format!("rational(kappa={kappa})"),
            Schedule::Linear => "linear".into(),
            Schedule::Constant(f) => format!("constant({f})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WalkConfig {
    /// Number of walk steps `T`.
    pub steps: usize,
    pub schedule: Schedule,
    pub query: RotationQuery,
}

impl WalkConfig {
    /// Rational schedule for the system's condition number, fused queries.
    pub fn for_system(system: &LinearSystem, steps: usize) -> Self {
        Self {
            steps,
            schedule: Schedule::Rational { kappa: system.kappa },
            query: RotationQuery::Fused,
        }
    }
}

/// Rotation tree with the `Ry` matrices precomputed for both directions.
#[derive(Debug, Clone)]
pub(crate) struct PreparedTree {
    /// `fwd[l][prefix]`; `None` where the angle is zero.
    fwd: Vec<Vec<Option<Unitary2>>>,
    inv: Vec<Vec<Option<Unitary2>>>,
    signs: Vec<bool>,
    has_signs: bool,
}

impl PreparedTree {
    pub(crate) fn new(t: &AngleTree) -> Self {
        let build = |sign: f64| -> Vec<Vec<Option<Unitary2>>> {
            (0..t.depth())
                .map(|l| {
                    t.level(l)
                        .iter()
                        .map(|&th| (th != 0.0).then(|| Unitary2::ry(sign * th)))
                        .collect()
                })
                .collect()
        };
        Self {
            fwd: build(1.0),
            inv: build(-1.0),
            signs: t.signs().to_vec(),
            has_signs: t.has_signs(),
        }
    }
}

/// A family of trees acting on `target`, chosen per branch by the value of
/// `select` (one tree when `select` is `None`).
#[derive(Debug, Clone)]
pub(crate) struct TreeFamily {
    trees: Vec<PreparedTree>,
    any_signs: bool,
    /// QRAM tables: per level, the angle words over `(select, top bits)`,
    /// and the sign bits over `(select, target)`.
    angle_mem: Vec<QramMemory>,
    sign_mem: Option<QramMemory>,
}

impl TreeFamily {
    fn new(trees: &[AngleTree], with_memory: bool) -> Result<Self> {
        let prepared: Vec<PreparedTree> = trees.iter().map(PreparedTree::new).collect();
        let any_signs = prepared.iter().any(|t| t.has_signs);
        let (mut angle_mem, mut sign_mem) = (Vec::new(), None);
        if with_memory {
            let depth = trees[0].depth();
            let sel_width = if trees.len() > 1 { trees.len().trailing_zeros() } else { 0 };
            for l in 0..depth {
                let words = trees.iter().flat_map(|t| t.level(l).iter().map(|&th| word_from_angle(th))).collect();
                angle_mem.push(QramMemory::new(sel_width + l, 64, words)?);
            }
            if any_signs {
                let bits = trees.iter().flat_map(|t| t.signs().iter().map(|&s| s as u64)).collect();
                sign_mem = Some(QramMemory::new(sel_width + depth, 1, bits)?);
            }
        }
        Ok(Self {
            trees: prepared,
            any_signs,
            angle_mem,
            sign_mem,
        })
    }

    fn fused(trees: &[AngleTree]) -> Self {
        Self::new(trees, false).expect("no memory to validate")
    }
}

/// Scratch registers used by [`RotationQuery::Qram`].
#[derive(Debug, Clone, Copy)]
pub(crate) struct Scratch {
    theta: RegisterId,
    flag: Option<RegisterId>,
}

/// Runs the controlled-rotation descent of `family` on `target` (width `n`).
/// The inverse applies the signs first, then the levels bottom-up with
/// negated angles.
#[allow(clippy::too_many_arguments)]
pub(crate) fn descend(
    state: &mut SparseState,
    family: &TreeFamily,
    target: RegisterId,
    n: u32,
    select: Option<RegisterId>,
    scratch: Option<Scratch>,
    ctl: &ControlSpec,
    inverse: bool,
) -> Result<()> {
    if inverse {
        signs(state, family, target, n, select, scratch, ctl)?;
        for l in (0..n).rev() {
            level(state, family, target, n, l, select, scratch, ctl, true)?;
        }
    } else {
        for l in 0..n {
            level(state, family, target, n, l, select, scratch, ctl, false)?;
        }
        signs(state, family, target, n, select, scratch, ctl)?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn level(
    state: &mut SparseState,
    family: &TreeFamily,
    target: RegisterId,
    n: u32,
    l: u32,
    select: Option<RegisterId>,
    scratch: Option<Scratch>,
    ctl: &ControlSpec,
    inverse: bool,
) -> Result<()> {
    let shift = n - l;
    let bit = n - 1 - l;
    match scratch {
        None => {
            let t = target.index();
            let sel = select.map(|r| r.index());
            apply_unitary2_with(state, target, bit, ctl, |row| {
                let tree = &family.trees[sel.map_or(0, |s| row[s] as usize)];
                let table = if inverse { &tree.inv } else { &tree.fwd };
                table[l as usize][(row[t] >> shift) as usize]
            })
        }
        Some(s) => {
            let mut fields = Vec::with_capacity(2);
            if let Some(r) = select {
                fields.push(AddressField::whole(r, n));
            }
            fields.push(AddressField { reg: target, shift, width: l });
            let mem = &family.angle_mem[l as usize];
            qram_load_fields(state, &fields, s.theta, mem)?;
            apply_ry_by_register(state, target, bit, s.theta, inverse, ctl)?;
            qram_load_fields(state, &fields, s.theta, mem)
        }
    }
}

fn signs(
    state: &mut SparseState,
    family: &TreeFamily,
    target: RegisterId,
    n: u32,
    select: Option<RegisterId>,
    scratch: Option<Scratch>,
    ctl: &ControlSpec,
) -> Result<()> {
    if !family.any_signs {
        return Ok(());
    }
    match scratch {
        None => {
            let t = target.index();
            let sel = select.map(|r| r.index());
            let trees = &family.trees;
            apply_diagonal_with(state, ctl, move |row| {
                let tree = &trees[sel.map_or(0, |s| row[s] as usize)];
                if tree.signs[row[t] as usize] {
                    -ONE
                } else {
                    ONE
                }
            })
        }
        Some(s) => {
            let flag = s.flag.expect("flag register allocated when signs exist");
            let mut fields = Vec::with_capacity(2);
            if let Some(r) = select {
                fields.push(AddressField::whole(r, n));
            }
            fields.push(AddressField::whole(target, n));
            let mem = family.sign_mem.as_ref().expect("sign table built");
            qram_load_fields(state, &fields, flag, mem)?;
            apply_phase(state, flag, 0, -ONE, ctl)?;
            qram_load_fields(state, &fields, flag, mem)
        }
    }
}

fn all_zero(state: &SparseState, regs: &[RegisterId]) -> bool {
    let slots: Vec<usize> = regs.iter().map(|r| r.index()).collect();
    state.branches().all(|b| slots.iter().all(|&s| b.registers[s] == 0))
}

/// Prepares `|b/‖b‖⟩` on `target`, which must hold 0 in every branch.
pub fn state_prep_ub(state: &mut SparseState, target: RegisterId, b: &[f64]) -> Result<()> {
    let n = state.table().width(target)?;
    if b.len() != 1usize << n {
        return Err(Error::BadDimension(b.len() as u32));
    }
    if !all_zero(state, &[target]) {
        return Err(Error::TargetNotZero);
    }
    let tree = AngleTree::from_amplitudes(b).ok_or_else(|| Error::InvalidAmplitudes("b is zero".into()))?;
    let family = TreeFamily::fused(std::slice::from_ref(&tree));
    descend(state, &family, target, n, None, None, &ControlSpec::none(), false)
}

/// `U_A` with `⟨i|⟨0| U_A |j⟩|0⟩ = A_ij/‖A‖_F` on `(target, ancilla)`, both
/// of width `n`. The ancilla must hold 0 in every branch.
pub fn block_encode_a(state: &mut SparseState, target: RegisterId, ancilla: RegisterId, trees: &AngleTrees) -> Result<()> {
    let n = trees.depth();
    for r in [target, ancilla] {
        let w = state.table().width(r)?;
        if w != n {
            return Err(Error::WidthMismatch(w, n));
        }
    }
    if !all_zero(state, &[ancilla]) {
        return Err(Error::AncillaNotZero);
    }
    let enc = Encoding::new(trees, RotationQuery::Fused)?;
    enc.apply(state, target, ancilla, None, &ControlSpec::none(), false)
}

/// Multiplies branches where every listed register is 0 by `+i` and all
/// others by `−i`.
pub fn reflection_r(state: &mut SparseState, ancillas: &[RegisterId]) -> Result<()> {
    for &r in ancillas {
        state.table().width(r)?;
    }
    let slots: Vec<usize> = ancillas.iter().map(|r| r.index()).collect();
    apply_diagonal_with(state, &ControlSpec::none(), move |row| {
        if slots.iter().all(|&s| row[s] == 0) {
            I
        } else {
            -I
        }
    })
}

/// Trees of `A` ready for the descent: column family selected by the
/// system register, and the global column-norm tree.
#[derive(Debug, Clone)]
struct Encoding {
    n: u32,
    columns: TreeFamily,
    global: TreeFamily,
}

impl Encoding {
    fn new(trees: &AngleTrees, query: RotationQuery) -> Result<Self> {
        let mem = query == RotationQuery::Qram;
        Ok(Self {
            n: trees.depth(),
            columns: TreeFamily::new(&trees.columns, mem)?,
            global: TreeFamily::new(std::slice::from_ref(&trees.global), mem)?,
        })
    }

    /// `U_A = SWAP · U_R† · U_L` in time order `U_L`, `U_R†`, `SWAP`.
    fn apply(
        &self,
        state: &mut SparseState,
        sys: RegisterId,
        anc: RegisterId,
        scratch: Option<Scratch>,
        ctl: &ControlSpec,
        dagger: bool,
    ) -> Result<()> {
        let n = self.n;
        if dagger {
            swap_registers(state, sys, anc, ctl)?;
            descend(state, &self.global, sys, n, None, scratch, ctl, false)?;
            descend(state, &self.columns, anc, n, Some(sys), scratch, ctl, true)
        } else {
            descend(state, &self.columns, anc, n, Some(sys), scratch, ctl, false)?;
            descend(state, &self.global, sys, n, None, scratch, ctl, true)?;
            swap_registers(state, sys, anc, ctl)
        }
    }
}

/// Register handles of a walk state.
#[derive(Debug, Clone, Copy)]
pub struct WalkRegisters {
    pub a_h: RegisterId,
    pub c: RegisterId,
    pub d: RegisterId,
    /// Dilation qubit, non-Hermitian variant only.
    pub a1: Option<RegisterId>,
    pub sys: RegisterId,
    pub anc: RegisterId,
    pub theta: Option<RegisterId>,
    pub flag: Option<RegisterId>,
}

/// `LCU` rotation on `d` for `A(f)`: `[[1−f, fα], [fα, −(1−f)]] / N_f`.
pub fn lcu_rotation(f: f64, alpha: f64) -> Unitary2 {
    let nf = (1.0 - f).hypot(f * alpha);
    let (p, q) = ((1.0 - f) / nf, f * alpha / nf);
    Unitary2::new(Complex64::new(p, 0.0), Complex64::new(q, 0.0), Complex64::new(q, 0.0), Complex64::new(-p, 0.0))
        .expect("real orthogonal")
}

/// Subnormalization `α_f` of the block-encoding of `H(s)`: `H = α_f · block`.
pub fn hs_normalization(f: f64, frobenius: f64) -> f64 {
    std::f64::consts::SQRT_2 * (1.0 - f).hypot(f * frobenius)
}

/// The walk circuit of one linear system: register layout, encodings and
/// the gate sequences for `U_H(f)`, `R` and the initial state.
#[derive(Debug, Clone)]
pub struct WalkCircuit {
    system: LinearSystem,
    alpha: f64,
    query: RotationQuery,
    enc: Encoding,
    b: TreeFamily,
    regs: WalkRegisters,
    proto: SparseState,
}

impl WalkCircuit {
    pub fn new(system: &LinearSystem, query: RotationQuery) -> Result<Self> {
        let trees = build_angle_trees(&system.a)?;
        let b_vec: Vec<f64> = system.b.iter().copied().collect();
        let b_tree =
            AngleTree::from_amplitudes(&b_vec).ok_or_else(|| Error::InvalidAmplitudes("b is zero".into()))?;
        let enc = Encoding::new(&trees, query)?;
        let b = TreeFamily::new(std::slice::from_ref(&b_tree), query == RotationQuery::Qram)?;
        let n = system.n;

        // Single-bit registers first so they lead the sort key.
        // At most eight registers; a narrow stride keeps branch copies short.
        let mut proto = SparseState::with_capacity(8);
        let a_h = proto.add_register("a_h", 1, RegisterType::Boolean)?;
        let c = proto.add_register("c", 1, RegisterType::Boolean)?;
        let d = proto.add_register("d", 1, RegisterType::Boolean)?;
        let a1 = match system.variant {
            Variant::NonHermitian => Some(proto.add_register("a1", 1, RegisterType::Boolean)?),
            Variant::PositiveDefinite => None,
        };
        let sys = proto.add_register("sys", n, RegisterType::UnsignedInt)?;
        let anc = proto.add_register("anc", n, RegisterType::UnsignedInt)?;
        let (theta, flag) = match query {
            RotationQuery::Fused => (None, None),
            RotationQuery::Qram => {
                let theta = proto.add_register("theta", 64, RegisterType::UnsignedInt)?;
                let needs_flag = enc.columns.any_signs || enc.global.any_signs || b.any_signs;
                let flag = needs_flag
                    .then(|| proto.add_register("flag", 1, RegisterType::Boolean))
                    .transpose()?;
                (Some(theta), flag)
            }
        };
        Ok(Self {
            system: system.clone(),
            alpha: trees.frobenius,
            query,
            enc,
            b,
            regs: WalkRegisters {
                a_h,
                c,
                d,
                a1,
                sys,
                anc,
                theta,
                flag,
            },
            proto,
        })
    }

    pub fn system(&self) -> &LinearSystem {
        &self.system
    }

    pub fn registers(&self) -> &WalkRegisters {
        &self.regs
    }

    pub fn query(&self) -> RotationQuery {
        self.query
    }

    /// `‖A‖_F`.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Vacuum state with the walk registers allocated.
    pub fn empty_state(&self) -> SparseState {
        self.proto.clone()
    }

    /// `|0⟩_anc |b⟩_sys` (and `|0⟩_{a1}` for the non-Hermitian variant).
    pub fn initial_state(&self) -> Result<SparseState> {
        let mut s = self.empty_state();
        self.apply_ub(&mut s, &ControlSpec::none(), false)?;
        Ok(s)
    }

    /// Registers reflected by `R` (all except `sys`, `a1` and `a_h`).
    pub fn reflected(&self) -> Vec<RegisterId> {
        let r = &self.regs;
        let mut v = vec![r.c, r.d, r.anc];
        v.extend(r.theta);
        v.extend(r.flag);
        v
    }

    fn scratch(&self) -> Option<Scratch> {
        self.regs.theta.map(|theta| Scratch {
            theta,
            flag: self.regs.flag,
        })
    }

    fn apply_ub(&self, state: &mut SparseState, ctl: &ControlSpec, inverse: bool) -> Result<()> {
        descend(state, &self.b, self.regs.sys, self.system.n, None, self.scratch(), ctl, inverse)
    }

    /// `U_A` on `(sys, anc)` without the ancilla check.
    pub fn apply_ua(&self, state: &mut SparseState, ctl: &ControlSpec, dagger: bool) -> Result<()> {
        self.enc.apply(state, self.regs.sys, self.regs.anc, self.scratch(), ctl, dagger)
    }

    /// Hermitian dilation `X(a1)·[C1(a1) U_A + C0(a1) U_A†]`, which
    /// block-encodes `[[0, A], [Aᵀ, 0]] / ‖A‖_F` over `a1`.
    fn apply_u_dilated(&self, state: &mut SparseState, ctl: &ControlSpec) -> Result<()> {
        let a1 = self.regs.a1.expect("non-Hermitian layout");
        self.apply_ua(state, &ctl.clone().and(a1, 0, true), false)?;
        self.apply_ua(state, &ctl.clone().and(a1, 0, false), true)?;
        apply_flip(state, a1, 0, ctl)
    }

    fn apply_select(&self, state: &mut SparseState, ctl: &ControlSpec, dagger: bool) -> Result<()> {
        let d = self.regs.d;
        match self.regs.a1 {
            None => self.apply_ua(state, &ctl.clone().and(d, 0, true), dagger),
            Some(a1) => {
                // Both terms are self-inverse.
                apply_phase(state, a1, 0, -ONE, &ctl.clone().and(d, 0, false))?;
                self.apply_u_dilated(state, &ctl.clone().and(d, 0, true))
            }
        }
    }

    /// Block-encoding of `A(f)` with subnormalization `α_f`.
    fn apply_uaf(&self, state: &mut SparseState, f: f64, ctl: &ControlSpec, dagger: bool) -> Result<()> {
        let d = self.regs.d;
        let r = lcu_rotation(f, self.alpha);
        if dagger {
            apply_unitary2(state, d, 0, &Unitary2::h(), ctl)?;
            self.apply_select(state, ctl, true)?;
            apply_unitary2(state, d, 0, &r, ctl)
        } else {
            apply_unitary2(state, d, 0, &r, ctl)?;
            self.apply_select(state, ctl, false)?;
            apply_unitary2(state, d, 0, &Unitary2::h(), ctl)
        }
    }

    /// `U_Q = U_b† · X_c[sys = 0, a1 = 0] · U_b`, encoding `Q_b = I − |b⟩⟨b|`.
    fn apply_uq(&self, state: &mut SparseState) -> Result<()> {
        let none = ControlSpec::none();
        self.apply_ub(state, &none, true)?;
        let mut ctl = ControlSpec::none();
        for bit in 0..self.system.n {
            ctl = ctl.and(self.regs.sys, bit, false);
        }
        if let Some(a1) = self.regs.a1 {
            ctl = ctl.and(a1, 0, false);
        }
        apply_flip(state, self.regs.c, 0, &ctl)?;
        self.apply_ub(state, &none, false)
    }

    /// `U_H(f)`, a Hermitian unitary whose zero-ancilla block is `H(f)/α_f`.
    pub fn apply_uh(&self, state: &mut SparseState, f: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::BadScheduleValue(f));
        }
        let a_h = self.regs.a_h;
        self.apply_uaf(state, f, &ControlSpec::none().and(a_h, 0, false), true)?;
        self.apply_uq(state)?;
        self.apply_uaf(state, f, &ControlSpec::on(a_h, 0), false)?;
        apply_flip(state, a_h, 0, &ControlSpec::none())
    }

    pub fn apply_reflection(&self, state: &mut SparseState) -> Result<()> {
        reflection_r(state, &self.reflected())
    }

    /// One walk step `W = R · U_H(f)`.
    pub fn step(&self, state: &mut SparseState, f: f64) -> Result<()> {
        self.apply_uh(state, f)?;
        self.apply_reflection(state)
    }

    /// Amplitudes on the zero-ancilla subspace, indexed by `sys` (and
    /// `a1·N + sys` for the non-Hermitian variant).
    pub fn project(&self, state: &SparseState) -> Vec<Complex64> {
        let dim = self.system.dim();
        let blocks = if self.regs.a1.is_some() { 2 } else { 1 };
        let mut out = vec![Complex64::new(0.0, 0.0); blocks * dim];
        let mut zero = self.reflected();
        zero.push(self.regs.a_h);
        let zero: Vec<usize> = zero.iter().map(|r| r.index()).collect();
        let (sys, a1) = (self.regs.sys.index(), self.regs.a1.map(|r| r.index()));
        for b in state.branches() {
            let r = b.registers;
            if zero.iter().all(|&s| r[s] == 0) {
                let hi = a1.map_or(0, |s| r[s] as usize);
                out[hi * dim + r[sys] as usize] += b.amplitude;
            }
        }
        out
    }

    /// Normalized solution embedded in the projected basis.
    pub fn reference(&self) -> Result<DVector<f64>> {
        let x = self.system.solution()?;
        Ok(match self.regs.a1 {
            None => x,
            Some(_) => {
                let dim = self.system.dim();
                DVector::from_fn(2 * dim, |i, _| if i < dim { 0.0 } else { x[i - dim] })
            }
        })
    }

    /// Phase-invariant distance of the projected state to the solution.
    pub fn error(&self, state: &SparseState) -> Result<f64> {
        projected_distance(&self.project(state), self.reference()?.as_slice())
    }

    /// `⟨i,0|U_A|j,0⟩` for all `i, j`, extracted from basis inputs.
    pub fn ua_block(&self) -> Result<DMatrix<Complex64>> {
        let dim = self.system.dim();
        let (sys, anc) = (self.regs.sys, self.regs.anc);
        let mut m = DMatrix::zeros(dim, dim);
        for j in 0..dim {
            let mut s = self.empty_state();
            s.set_branches([(ONE, vec![(sys, j as u64)])])?;
            self.apply_ua(&mut s, &ControlSpec::none(), false)?;
            for i in 0..dim {
                m[(i, j)] = s.amplitude_of(&[(sys, i as u64), (anc, 0)]);
            }
        }
        Ok(m)
    }

    /// Zero-ancilla block of `U_H(f)` in the basis `(a_h, [a1,] sys)`,
    /// `a_h` most significant. Equals `H(f)/α_f`.
    pub fn hs_block(&self, f: f64) -> Result<DMatrix<Complex64>> {
        let dim = self.system.dim();
        let blocks = if self.regs.a1.is_some() { 2 } else { 1 };
        let half = blocks * dim;
        let basis = |k: usize| -> Vec<(RegisterId, u64)> {
            let mut v = vec![(self.regs.a_h, (k / half) as u64), (self.regs.sys, (k % dim) as u64)];
            if let Some(a1) = self.regs.a1 {
                v.push((a1, ((k % half) / dim) as u64));
            }
            v
        };
        let total = 2 * half;
        let mut m = DMatrix::zeros(total, total);
        for j in 0..total {
            let mut s = self.empty_state();
            s.set_branches([(ONE, basis(j))])?;
            self.apply_uh(&mut s, f)?;
            for i in 0..total {
                m[(i, j)] = s.amplitude_of(&basis(i));
            }
        }
        Ok(m)
    }
}

/// `√(2 − 2|⟨x̃|ψ⟩|)` after normalizing `psi`.
pub fn projected_distance(psi: &[Complex64], reference: &[f64]) -> Result<f64> {
    assert_eq!(psi.len(), reference.len());
    let norm = psi.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if norm < 1e-9 {
        return Err(Error::ZeroProjection(norm));
    }
    let overlap: Complex64 = psi.iter().zip(reference).map(|(a, &x)| a * x).sum::<Complex64>() / norm;
    Ok((2.0 - 2.0 * overlap.norm().min(1.0)).max(0.0).sqrt())
}

/// Classical `H(f)`: `[[0, A(f)Q_b], [Q_b A(f), 0]]` with `A(f) = (1−f)I + fA`
/// (positive definite) or `A(f) = (1−f)σ_z⊗I + f[[0, A], [Aᵀ, 0]]` and
/// `b → |0⟩|b⟩` (non-Hermitian).
pub fn assemble_hs(system: &LinearSystem, f: f64) -> DMatrix<f64> {
    let dim = system.dim();
    let (af, bvec) = match system.variant {
        Variant::PositiveDefinite => (DMatrix::identity(dim, dim) * (1.0 - f) + &system.a * f, system.b.clone()),
        Variant::NonHermitian => {
            let mut af = DMatrix::zeros(2 * dim, 2 * dim);
            for i in 0..dim {
                af[(i, i)] = 1.0 - f;
                af[(dim + i, dim + i)] = -(1.0 - f);
            }
            af.view_mut((0, dim), (dim, dim)).copy_from(&(&system.a * f));
            af.view_mut((dim, 0), (dim, dim)).copy_from(&(system.a.transpose() * f));
            let b = DVector::from_fn(2 * dim, |i, _| if i < dim { system.b[i] } else { 0.0 });
            (af, b)
        }
    };
    let m = af.nrows();
    let qb = DMatrix::identity(m, m) - &bvec * bvec.transpose();
    let mut h = DMatrix::zeros(2 * m, 2 * m);
    h.view_mut((0, m), (m, m)).copy_from(&(&af * &qb));
    h.view_mut((m, 0), (m, m)).copy_from(&(&qb * &af));
    h
}

/// Prepares `ψ₀` and applies `W(f(k/T))` for `k = 0..T−1`.
pub fn run_adiabatic(system: &LinearSystem, config: &WalkConfig) -> Result<SparseState> {
    let walk = WalkCircuit::new(system, config.query)?;
    run_walk(&walk, config)
}

/// [`run_adiabatic`] on a prebuilt circuit.
pub fn run_walk(walk: &WalkCircuit, config: &WalkConfig) -> Result<SparseState> {
    if config.steps == 0 {
        return Err(Error::InvalidConfig("walk needs at least one step".into()));
    }
    let mut state = walk.initial_state()?;
    let t = config.steps as f64;
    for k in 0..config.steps {
        walk.step(&mut state, config.schedule.eval(k as f64 / t))?;
    }
    Ok(state)
}

/// Error of a walk state against its system's solution. The state must use
/// the register names of [`WalkCircuit`].
pub fn error_metric(state: &SparseState, system: &LinearSystem) -> Result<f64> {
    let dim = system.dim();
    let sys = state.register("sys")?;
    let a1 = match system.variant {
        Variant::NonHermitian => Some(state.register("a1")?),
        Variant::PositiveDefinite => None,
    };
    let mut zero = Vec::new();
    for name in ["a_h", "c", "d", "anc", "theta", "flag"] {
        if let Ok(r) = state.register(name) {
            zero.push(r.index());
        }
    }
    let blocks = if a1.is_some() { 2 } else { 1 };
    let mut psi = vec![Complex64::new(0.0, 0.0); blocks * dim];
    for b in state.branches() {
        let r = b.registers;
        if zero.iter().all(|&s| r[s] == 0) {
            let hi = a1.map_or(0, |id| r[id.index()] as usize);
            psi[hi * dim + r[sys.index()] as usize] += b.amplitude;
        }
    }
    let x = system.solution()?;
    let reference: Vec<f64> = (0..blocks * dim)
        .map(|i| if i >= (blocks - 1) * dim { x[i - (blocks - 1) * dim] } else { 0.0 })
        .collect();
    projected_distance(&psi, &reference)
}
