//! Sparse state: the list of nonzero branches over a shared register table.
//!
//! Branches are stored column-wise: one amplitude array, one flat array of
//! register slots (`capacity` words per branch) and one digest array. Every
//! public operation leaves the state with distinct branches, zeroed inactive
//! slots, digests matching the active values and no amplitude at or below
//! the prune tolerance.

use std::collections::HashMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::exec::{for_each_chunk, Dispatch, Executor};

mod order;
mod register;

pub(crate) use order::{coherent_groups, Group, KeyLayout, NONE};
pub use register::{RegisterDescriptor, RegisterId, RegisterTable, RegisterType};
pub(crate) use register::width_mask;

pub const DEFAULT_SLOT_CAPACITY: usize = 16;
pub const DEFAULT_PRUNE_TOL: f64 = 1e-12;
/// Largest qubit count accepted by [`SparseState::dense_vector`].
pub const MAX_DENSE_QUBITS: u32 = 26;
/// Norm tolerance for operations that require a normalized state.
pub const NORM_TOL: f64 = 1e-10;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Digest of a branch's active register values, given in ascending id order.
pub fn branch_digest(values: impl IntoIterator<Item = u64>) -> u64 {
    let mut h = FNV_OFFSET;
    for v in values {
        h ^= v;
        h = h.wrapping_mul(FNV_PRIME);
    }
    // Multiplication only carries upward; finish with a full avalanche.
    h ^= h >> 33;
    h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
    h ^= h >> 33;
    h = h.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    h ^ (h >> 33)
}

#[inline]
fn slot_digest(row: &[u64], active: &[usize]) -> u64 {
    branch_digest(active.iter().map(|&s| row[s]))
}

/// Borrowed view of one branch.
#[derive(Debug, Clone, Copy)]
pub struct BranchRef<'a> {
    pub amplitude: Complex64,
    /// All slots, indexed by register id. Inactive slots are zero.
    pub registers: &'a [u64],
    pub cached_hash: u64,
}

impl BranchRef<'_> {
    pub fn value(&self, id: RegisterId) -> u64 {
        self.registers[id.index()]
    }

    pub fn to_owned(&self) -> Branch {
        Branch {
            amplitude: self.amplitude,
            registers: self.registers.to_vec(),
            cached_hash: self.cached_hash,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub amplitude: Complex64,
    pub registers: Vec<u64>,
    pub cached_hash: u64,
}

#[derive(Debug, Clone)]
pub struct SparseState {
    table: RegisterTable,
    amps: Vec<Complex64>,
    regs: Vec<u64>,
    hashes: Vec<u64>,
    exec: Executor,
    prune_tol: f64,
}

impl Default for SparseState {
    fn default() -> Self {
        Self::new()
    }
}

impl SparseState {
    /// The vacuum: one branch with amplitude 1 and no registers.
    pub fn new() -> Self {
        Self::with_capacity(DEFAULT_SLOT_CAPACITY)
    }

    pub fn with_capacity(slots: usize) -> Self {
        Self {
            table: RegisterTable::new(slots),
            amps: vec![Complex64::new(1.0, 0.0)],
            regs: vec![0; slots],
            hashes: vec![branch_digest([])],
            exec: Executor::sequential(),
            prune_tol: DEFAULT_PRUNE_TOL,
        }
    }

    pub fn with_executor(mut self, exec: Executor) -> Self {
        self.exec = exec;
        self
    }

    pub fn set_executor(&mut self, exec: Executor) {
        self.exec = exec;
    }

    pub fn executor(&self) -> &Executor {
        &self.exec
    }

    pub fn prune_tolerance(&self) -> f64 {
        self.prune_tol
    }

    pub fn set_prune_tolerance(&mut self, tol: f64) {
        self.prune_tol = tol.max(0.0);
    }

    pub fn table(&self) -> &RegisterTable {
        &self.table
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn qubit_count(&self) -> u32 {
        self.table.qubit_count()
    }

    pub fn stride(&self) -> usize {
        self.table.capacity()
    }

    /// Bytes held per branch: amplitude, slot array and digest.
    pub fn bytes_per_branch(&self) -> usize {
        std::mem::size_of::<Complex64>() + 8 * self.stride() + 8
    }

    pub fn register(&self, name: &str) -> Result<RegisterId> {
        self.table.id(name)
    }

    pub fn add_register(&mut self, name: &str, width: u32, dtype: RegisterType) -> Result<RegisterId> {
        let id = self.table.add(name, width, dtype)?;
        // Slot is already zero in every branch (inactive slots are zeroed).
        // Digests fold active values in id order, so they change whenever the
        // active set does.
        self.rehash_all();
        self.table.observe_size(self.len());
        Ok(id)
    }

    /// Deactivates a register that is |0> in every branch.
    pub fn remove_register(&mut self, id: RegisterId) -> Result<()> {
        self.table.get(id)?;
        let s = id.index();
        if self.rows().any(|r| r[s] != 0) {
            return Err(Error::NonZeroContent(id));
        }
        self.table.deactivate(id)?;
        self.rehash_all();
        Ok(())
    }

    pub fn amplitude(&self, i: usize) -> Complex64 {
        self.amps[i]
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn value(&self, i: usize, id: RegisterId) -> u64 {
        self.regs[i * self.stride() + id.index()]
    }

    pub fn branch(&self, i: usize) -> BranchRef<'_> {
        let st = self.stride();
        BranchRef {
            amplitude: self.amps[i],
            registers: &self.regs[i * st..(i + 1) * st],
            cached_hash: self.hashes[i],
        }
    }

    pub fn branches(&self) -> impl Iterator<Item = BranchRef<'_>> + '_ {
        (0..self.len()).map(move |i| self.branch(i))
    }

    pub(crate) fn rows(&self) -> std::slice::ChunksExact<'_, u64> {
        self.regs.chunks_exact(self.stride().max(1))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Amplitude of the branch with the given active register values, or zero.
    pub fn amplitude_of(&self, values: &[(RegisterId, u64)]) -> Complex64 {
        let st = self.stride();
        let mut probe = vec![0u64; st];
        for &(id, v) in values {
            probe[id.index()] = v;
        }
        let h = slot_digest(&probe, self.table.active_slots());
        for i in 0..self.len() {
            if self.hashes[i] == h && self.regs[i * st..(i + 1) * st] == probe[..] {
                return self.amps[i];
            }
        }
        Complex64::new(0.0, 0.0)
    }

    fn rehash_all(&mut self) {
        let active = self.table.active_slots().to_vec();
        let st = self.stride();
        for (h, row) in self.hashes.iter_mut().zip(self.regs.chunks_exact(st.max(1))) {
            *h = slot_digest(row, &active);
        }
    }

    /// Reorders branches into idle order for `(reg, bit)`: idle register
    /// values lexicographically (id 0 most significant), then the target bit.
    pub fn sort_by_idle(&mut self, reg: RegisterId, bit: u32) -> Result<()> {
        self.check_target(reg, bit)?;
        let groups = self.groups(reg, bit);
        let st = self.stride();
        let mut amps = Vec::with_capacity(self.len());
        let mut regs = Vec::with_capacity(self.regs.len());
        let mut hashes = Vec::with_capacity(self.len());
        for g in groups {
            for i in [g.lo, g.hi] {
                if i != NONE {
                    let i = i as usize;
                    amps.push(self.amps[i]);
                    regs.extend_from_slice(&self.regs[i * st..(i + 1) * st]);
                    hashes.push(self.hashes[i]);
                }
            }
        }
        self.amps = amps;
        self.regs = regs;
        self.hashes = hashes;
        Ok(())
    }

    pub(crate) fn check_target(&self, reg: RegisterId, bit: u32) -> Result<()> {
        let width = self.table.get(reg)?.width;
        if bit >= width {
            return Err(Error::InvalidTarget { reg, bit, width });
        }
        Ok(())
    }

    pub(crate) fn groups(&self, reg: RegisterId, bit: u32) -> Vec<Group> {
        self.groups_where(reg, bit, |_| true)
    }

    /// Coherent groups among the branches satisfying `keep`, which must not
    /// depend on the target bit.
    pub(crate) fn groups_where(&self, reg: RegisterId, bit: u32, keep: impl Fn(&[u64]) -> bool) -> Vec<Group> {
        let descs = self.table.descriptors();
        let layout = KeyLayout::new(
            self.table.active_slots(),
            |s| descs[s].width,
            reg.index(),
            bit,
        );
        coherent_groups(&self.regs, self.stride(), &layout, &self.exec, keep)
    }

    /// Removes every branch with `|amplitude| <= tol`, keeping survivor order.
    pub fn prune_zero(&mut self, tol: f64) -> usize {
        let before = self.len();
        self.retain(|a, _| a.norm() > tol);
        before - self.len()
    }

    /// Keeps branches for which `keep` holds, preserving order.
    pub(crate) fn retain(&mut self, mut keep: impl FnMut(Complex64, &[u64]) -> bool) {
        let st = self.stride();
        let mut w = 0;
        for r in 0..self.len() {
            if keep(self.amps[r], &self.regs[r * st..(r + 1) * st]) {
                if w != r {
                    self.amps[w] = self.amps[r];
                    self.hashes[w] = self.hashes[r];
                    self.regs.copy_within(r * st..(r + 1) * st, w * st);
                }
                w += 1;
            }
        }
        self.amps.truncate(w);
        self.hashes.truncate(w);
        self.regs.truncate(w * st);
    }

    pub(crate) fn scale(&mut self, factor: f64) {
        for a in &mut self.amps {
            *a *= factor;
        }
    }

    /// Branch-local amplitude update; register values are left untouched.
    pub(crate) fn map_amplitudes<F>(&mut self, f: F) -> Dispatch
    where
        F: Fn(&mut Complex64, &[u64]) + Sync + Send,
    {
        let st = self.stride();
        for_each_chunk(
            &self.exec,
            &mut self.amps,
            &mut self.regs,
            st,
            &mut self.hashes,
            |amps, regs, _| {
                for (a, row) in amps.iter_mut().zip(regs.chunks_exact(st)) {
                    f(a, row);
                }
            },
        )
    }

    /// Branch-local update that may rewrite register values. `f` must act as
    /// an injective map on basis values so branches stay distinct.
    pub(crate) fn map_branches<F>(&mut self, f: F) -> Dispatch
    where
        F: Fn(&mut Complex64, &mut [u64]) + Sync + Send,
    {
        let st = self.stride();
        let active = self.table.active_slots().to_vec();
        for_each_chunk(
            &self.exec,
            &mut self.amps,
            &mut self.regs,
            st,
            &mut self.hashes,
            |amps, regs, hashes| {
                for ((a, row), h) in amps.iter_mut().zip(regs.chunks_exact_mut(st)).zip(hashes) {
                    f(a, row);
                    *h = slot_digest(row, &active);
                }
            },
        )
    }

    /// Coherent update on `(reg, bit)` of the branches satisfying `select`.
    /// For each group, `coeffs` receives the slots of one member and returns
    /// the 2x2 matrix `[u00, u01, u10, u11]` to apply, or `None` to leave the
    /// group untouched. Neither closure may depend on the target bit itself.
    /// Amplitudes are updated in place, missing partners are appended, and
    /// updated amplitudes at or below the prune tolerance are dropped.
    pub(crate) fn interfere<P, F>(&mut self, reg: RegisterId, bit: u32, select: P, mut coeffs: F)
    where
        P: Fn(&[u64]) -> bool,
        F: FnMut(&[u64]) -> Option<[Complex64; 4]>,
    {
        let groups = self.groups_where(reg, bit, &select);
        let st = self.stride();
        let slot = reg.index();
        let mask = 1u64 << bit;
        let tol_sq = self.prune_tol * self.prune_tol;
        let n = self.len();
        let mut created = 0usize;
        let mut pruned = false;
        let zero = Complex64::new(0.0, 0.0);

        for g in groups {
            let any = g.any() as usize;
            let Some([u00, u01, u10, u11]) = coeffs(&self.regs[any * st..(any + 1) * st]) else {
                continue;
            };
            let a0 = if g.lo != NONE { self.amps[g.lo as usize] } else { zero };
            let a1 = if g.hi != NONE { self.amps[g.hi as usize] } else { zero };
            let n0 = u00 * a0 + u01 * a1;
            let n1 = u10 * a0 + u11 * a1;
            if g.lo == NONE && u01 != zero || g.hi == NONE && u10 != zero {
                created += 1;
            }
            for (new, own, other, set) in [(n0, g.lo, g.hi, false), (n1, g.hi, g.lo, true)] {
                let dead = new.norm_sqr() <= tol_sq;
                if own != NONE {
                    // Exact zero marks the branch for removal below.
                    self.amps[own as usize] = if dead { zero } else { new };
                    pruned |= dead;
                } else if !dead {
                    let from = other as usize * st;
                    self.regs.extend_from_within(from..from + st);
                    let r = &mut self.regs[self.amps.len() * st..];
                    if set {
                        r[slot] |= mask;
                    } else {
                        r[slot] &= !mask;
                    }
                    let h = slot_digest(r, self.table.active_slots());
                    self.amps.push(new);
                    self.hashes.push(h);
                }
            }
        }
        self.table.observe_size(n + created);
        if pruned {
            self.retain(|a, _| a != zero);
        }
    }

    /// Replaces all branches. Values are given per active register; missing
    /// registers read as zero. Duplicate basis values are merged by summing
    /// amplitudes and the result is pruned.
    pub fn set_branches<I>(&mut self, branches: I) -> Result<()>
    where
        I: IntoIterator<Item = (Complex64, Vec<(RegisterId, u64)>)>,
    {
        let st = self.stride();
        let active = self.table.active_slots().to_vec();
        let mut amps: Vec<Complex64> = Vec::new();
        let mut regs: Vec<u64> = Vec::new();
        let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
        for (amp, values) in branches {
            if !(amp.re.is_finite() && amp.im.is_finite()) {
                return Err(Error::InvalidAmplitudes("non-finite amplitude".into()));
            }
            let mut row = vec![0u64; st];
            for (id, v) in values {
                let d = self.table.get(id)?;
                if v & !d.mask() != 0 {
                    return Err(Error::InvalidAmplitudes(format!(
                        "value {v} does not fit register {} of width {}",
                        d.name, d.width
                    )));
                }
                row[id.index()] = v;
            }
            match index.get(&row) {
                Some(&i) => amps[i] += amp,
                None => {
                    index.insert(row.clone(), amps.len());
                    amps.push(amp);
                    regs.extend_from_slice(&row);
                }
            }
        }
        self.hashes = regs.chunks_exact(st.max(1)).map(|r| slot_digest(r, &active)).collect();
        self.amps = amps;
        self.regs = regs;
        self.prune_zero(self.prune_tol);
        self.table.observe_size(self.len());
        Ok(())
    }

    /// Uniform superposition of `count` branches carrying values `0..count`
    /// in `reg`; all other registers zero.
    pub fn set_uniform(&mut self, reg: RegisterId, count: u64) -> Result<()> {
        let d = self.table.get(reg)?;
        if count == 0 || (count - 1) & !d.mask() != 0 {
            return Err(Error::InvalidAmplitudes(format!(
                "{count} values do not fit register {}",
                d.name
            )));
        }
        let st = self.stride();
        let active = self.table.active_slots().to_vec();
        let n = count as usize;
        let amp = Complex64::new(1.0 / (count as f64).sqrt(), 0.0);
        self.amps = vec![amp; n];
        self.regs = vec![0; n * st];
        for (v, row) in self.regs.chunks_exact_mut(st).enumerate() {
            row[reg.index()] = v as u64;
        }
        self.hashes = self.regs.chunks_exact(st).map(|r| slot_digest(r, &active)).collect();
        self.table.observe_size(n);
        Ok(())
    }

    /// Bit offset of each active register in the dense index (id 0 lowest).
    fn dense_offsets(&self) -> Vec<(usize, u32)> {
        let mut off = 0;
        self.table
            .active_slots()
            .iter()
            .map(|&s| {
                let o = off;
                off += self.table.descriptors()[s].width;
                (s, o)
            })
            .collect()
    }

    pub fn dense_index(&self, i: usize) -> u64 {
        let st = self.stride();
        let row = &self.regs[i * st..(i + 1) * st];
        self.dense_offsets()
            .iter()
            .fold(0u64, |acc, &(s, o)| acc | row[s] << o)
    }

    /// Full statevector; descriptor id 0 occupies the least significant bits.
    pub fn dense_vector(&self) -> Result<Vec<Complex64>> {
        let n = self.qubit_count();
        if n > MAX_DENSE_QUBITS {
            return Err(Error::TooManyQubits(n));
        }
        let offs = self.dense_offsets();
        let mut out = vec![Complex64::new(0.0, 0.0); 1usize << n];
        for (a, row) in self.amps.iter().zip(self.rows()) {
            let idx = offs.iter().fold(0usize, |acc, &(s, o)| acc | (row[s] as usize) << o);
            out[idx] += *a;
        }
        Ok(out)
    }

    /// Replaces the branches with the nonzero entries of `dense`, which is
    /// laid out as in [`Self::dense_vector`].
    pub fn from_dense(&mut self, dense: &[Complex64]) -> Result<()> {
        let n = self.qubit_count();
        if n > MAX_DENSE_QUBITS {
            return Err(Error::TooManyQubits(n));
        }
        if dense.len() != 1usize << n {
            return Err(Error::InvalidAmplitudes(format!(
                "expected {} amplitudes, got {}",
                1usize << n,
                dense.len()
            )));
        }
        let offs = self.dense_offsets();
        let descs = self.table.descriptors().to_vec();
        let branches = dense.iter().enumerate().filter(|(_, a)| **a != Complex64::new(0.0, 0.0)).map(|(idx, &a)| {
            let values = offs
                .iter()
                .map(|&(s, o)| (RegisterId(s as u32), (idx as u64 >> o) & descs[s].mask()))
                .collect();
            (a, values)
        });
        let branches: Vec<_> = branches.collect();
        let tol = self.prune_tol;
        self.prune_tol = 0.0;
        let r = self.set_branches(branches);
        self.prune_tol = tol;
        r
    }

    /// Checks every structural invariant. Used by tests and debug paths.
    pub fn check_invariants(&self) -> Result<()> {
        let st = self.stride();
        let active = self.table.active_slots();
        let descs = self.table.descriptors();
        let mut seen: HashMap<u64, Vec<usize>> = HashMap::new();
        for (i, row) in self.rows().enumerate() {
            let a = self.amps[i];
            if !(a.re.is_finite() && a.im.is_finite()) {
                return Err(Error::InvalidAmplitudes(format!("branch {i} is not finite")));
            }
            if a.norm() <= self.prune_tol {
                return Err(Error::InvalidAmplitudes(format!("branch {i} is below the prune tolerance")));
            }
            for s in 0..st {
                let live = s < descs.len() && descs[s].active;
                let ok = if live { row[s] & !descs[s].mask() == 0 } else { row[s] == 0 };
                if !ok {
                    return Err(Error::InvalidAmplitudes(format!("branch {i} slot {s} holds {}", row[s])));
                }
            }
            let h = slot_digest(row, active);
            if h != self.hashes[i] {
                return Err(Error::InvalidAmplitudes(format!("branch {i} has a stale digest")));
            }
            let bucket = seen.entry(h).or_default();
            if bucket.iter().any(|&j| self.regs[j * st..(j + 1) * st] == *row) {
                return Err(Error::InvalidAmplitudes(format!("branch {i} duplicates another branch")));
            }
            bucket.push(i);
        }
        Ok(())
    }
}
