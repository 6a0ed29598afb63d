//! Idle-bit ordering of branches.
//!
//! The sort key of a branch is the concatenation of its active register
//! values (id 0 most significant) with the target bit removed and appended as
//! the least significant bit. Keys are unique because branches are distinct,
//! so two branches are coherent partners iff their keys differ only in bit 0.

use std::cmp::Ordering;

use crate::exec::{parallel_merge_sort, Executor};

/// A coherent group: the branch with the target bit clear and the one with
/// it set. At least one side is present.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Group {
    pub lo: u32,
    pub hi: u32,
}

pub(crate) const NONE: u32 = u32::MAX;

impl Group {
    pub fn any(&self) -> u32 {
        if self.lo != NONE {
            self.lo
        } else {
            self.hi
        }
    }
}

pub(crate) struct KeyLayout {
    // (slot, width) in ascending slot order.
    parts: Vec<(usize, u32)>,
    target_slot: usize,
    target_bit: u32,
    total_bits: u32,
    // Bit offset of each part in the unpermuted concatenation, and the
    // position of the target bit in it. Valid when total_bits <= 64.
    offsets: Vec<(usize, u32)>,
    tpos: u32,
}

#[inline]
fn remove_bit(v: u64, bit: u32) -> u64 {
    let low = v & ((1u64 << bit) - 1);
    let high = v.checked_shr(bit + 1).unwrap_or(0);
    high.checked_shl(bit).unwrap_or(0) | low
}

impl KeyLayout {
    pub fn new(active: &[usize], widths: impl Fn(usize) -> u32, slot: usize, bit: u32) -> Self {
        let parts: Vec<(usize, u32)> = active.iter().map(|&s| (s, widths(s))).collect();
        let total_bits: u32 = parts.iter().map(|p| p.1).sum();
        let mut offsets = Vec::with_capacity(parts.len());
        let mut tpos = 0;
        if total_bits <= 64 {
            let mut off = total_bits;
            for &(s, w) in &parts {
                off -= w;
                offsets.push((s, off));
                if s == slot {
                    tpos = off + bit;
                }
            }
        }
        Self {
            parts,
            target_slot: slot,
            target_bit: bit,
            total_bits,
            offsets,
            tpos,
        }
    }

    /// Concatenates the registers, then moves the target bit to bit 0.
    #[inline]
    fn key64(&self, regs: &[u64]) -> u64 {
        let k = self.offsets.iter().fold(0u64, |k, &(slot, off)| k | regs[slot] << off);
        let p = self.tpos;
        let high = k.checked_shr(p + 1).unwrap_or(0).checked_shl(p + 1).unwrap_or(0);
        let low = k & ((1u64 << p) - 1);
        high | (low << 1) | ((k >> p) & 1)
    }

    #[inline]
    fn key128(&self, regs: &[u64]) -> u128 {
        let mut k = 0u128;
        let mut tbit = 0u128;
        for &(slot, w) in &self.parts {
            let mut v = regs[slot];
            let mut w = w;
            if slot == self.target_slot {
                tbit = ((v >> self.target_bit) & 1) as u128;
                v = remove_bit(v, self.target_bit);
                w -= 1;
            }
            k = k.checked_shl(w).unwrap_or(0) | v as u128;
        }
        (k << 1) | tbit
    }

    fn cmp_generic(&self, a: &[u64], b: &[u64]) -> Ordering {
        for &(slot, _) in &self.parts {
            let (mut x, mut y) = (a[slot], b[slot]);
            if slot == self.target_slot {
                x = remove_bit(x, self.target_bit);
                y = remove_bit(y, self.target_bit);
            }
            match x.cmp(&y) {
                Ordering::Equal => {}
                o => return o,
            }
        }
        let t = |r: &[u64]| (r[self.target_slot] >> self.target_bit) & 1;
        t(a).cmp(&t(b))
    }
}

/// Branch indices in idle order, grouped into coherent pairs.
pub(crate) fn coherent_groups(
    regs: &[u64],
    stride: usize,
    layout: &KeyLayout,
    exec: &Executor,
    keep: impl Fn(&[u64]) -> bool,
) -> Vec<Group> {
    let n = regs.len() / stride.max(1);
    if n == 0 {
        return Vec::new();
    }
    let row = |i: usize| &regs[i * stride..(i + 1) * stride];
    if layout.total_bits <= 64 {
        let mut keyed: Vec<(u64, u32)> = Vec::with_capacity(n);
        for (i, r) in regs.chunks_exact(stride).enumerate() {
            if keep(r) {
                keyed.push((layout.key64(r), i as u32));
            }
        }
        sort_keyed_u64(&mut keyed, exec);
        group_by_keys(&keyed)
    } else if layout.total_bits <= 128 {
        let mut keyed: Vec<(u128, u32)> = (0..n)
            .filter(|&i| keep(row(i)))
            .map(|i| (layout.key128(row(i)), i as u32))
            .collect();
        if exec.should_parallelize(n) {
            parallel_merge_sort(&mut keyed, |a, b| a.0.cmp(&b.0), exec);
        } else {
            keyed.sort_unstable_by_key(|p| p.0);
        }
        group_by_keys(&keyed)
    } else {
        let mut idx: Vec<u32> = (0..n as u32).filter(|&i| keep(row(i as usize))).collect();
        parallel_merge_sort(
            &mut idx,
            |&a, &b| layout.cmp_generic(row(a as usize), row(b as usize)),
            exec,
        );
        let tbit = |i: u32| (row(i as usize)[layout.target_slot] >> layout.target_bit) & 1;
        let n = idx.len();
        let mut out = Vec::with_capacity(n);
        let mut i = 0;
        while i < n {
            let a = idx[i];
            if tbit(a) == 0
                && i + 1 < n
                && idle_equal(layout, row(a as usize), row(idx[i + 1] as usize))
            {
                out.push(Group { lo: a, hi: idx[i + 1] });
                i += 2;
            } else {
                out.push(single(a, tbit(a)));
                i += 1;
            }
        }
        out
    }
}

fn idle_equal(layout: &KeyLayout, a: &[u64], b: &[u64]) -> bool {
    layout.parts.iter().all(|&(slot, _)| {
        if slot == layout.target_slot {
            (a[slot] ^ b[slot]) == 1u64 << layout.target_bit
        } else {
            a[slot] == b[slot]
        }
    })
}

#[inline]
fn single(i: u32, tbit: u64) -> Group {
    if tbit == 0 {
        Group { lo: i, hi: NONE }
    } else {
        Group { lo: NONE, hi: i }
    }
}

trait Key: Copy + Eq {
    fn low_bit(self) -> u64;
    fn flip_low(self) -> Self;
}

impl Key for u64 {
    fn low_bit(self) -> u64 {
        self & 1
    }
    fn flip_low(self) -> Self {
        self ^ 1
    }
}

impl Key for u128 {
    fn low_bit(self) -> u64 {
        (self & 1) as u64
    }
    fn flip_low(self) -> Self {
        self ^ 1
    }
}

fn group_by_keys<K: Key>(keyed: &[(K, u32)]) -> Vec<Group> {
    let n = keyed.len();
    let mut out = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        let (k, a) = keyed[i];
        if i + 1 < n && k.low_bit() == 0 && keyed[i + 1].0 == k.flip_low() {
            out.push(Group {
                lo: a,
                hi: keyed[i + 1].1,
            });
            i += 2;
        } else {
            out.push(single(a, k.low_bit()));
            i += 1;
        }
    }
    out
}

/// Sorts (key, index) pairs by key. Presorted input is left alone. Pooled
/// executors above the threshold use the parallel merge sort, everything else
/// an LSD radix sort over the bits that actually vary.
fn sort_keyed_u64(keyed: &mut [(u64, u32)], exec: &Executor) {
    let n = keyed.len();
    if keyed.is_sorted_by_key(|p| p.0) {
        return;
    }
    if exec.should_parallelize(n) {
        parallel_merge_sort(keyed, |a, b| a.0.cmp(&b.0), exec);
        return;
    }
    if n <= 64 {
        keyed.sort_unstable_by_key(|p| p.0);
        return;
    }
    let k0 = keyed[0].0;
    let diff = keyed.iter().fold(0u64, |acc, p| acc | (p.0 ^ k0));
    // Split the varying bits into as few digits of at most 16 bits as
    // possible, balanced so no digit is wider than it needs to be.
    let lo = diff.trailing_zeros();
    let span = 64 - diff.leading_zeros() - lo;
    let passes = span.div_ceil(16);
    let digit = span.div_ceil(passes);
    let mut counts = vec![0usize; 1 << digit];
    let mut buf = vec![(0u64, 0u32); n];
    let mut src_is_keyed = true;
    for pass in 0..passes {
        let shift = lo + pass * digit;
        let dmask = (1u64 << digit) - 1;
        let (src, dst) = if src_is_keyed {
            (&*keyed, &mut buf[..])
        } else {
            (&buf[..], &mut *keyed)
        };
        counts.iter_mut().for_each(|c| *c = 0);
        for p in src {
            counts[((p.0 >> shift) & dmask) as usize] += 1;
        }
        let mut sum = 0;
        for c in counts.iter_mut() {
            let t = *c;
            *c = sum;
            sum += t;
        }
        for p in src {
            let d = ((p.0 >> shift) & dmask) as usize;
            dst[counts[d]] = *p;
            counts[d] += 1;
        }
        src_is_keyed = !src_is_keyed;
    }
    if !src_is_keyed {
        keyed.copy_from_slice(&buf);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn remove_bit_compacts() {
        assert_eq!(remove_bit(0b1011, 1), 0b101);
        assert_eq!(remove_bit(0b1011, 0), 0b101);
        assert_eq!(remove_bit(u64::MAX, 63), u64::MAX >> 1);
        assert_eq!(remove_bit(u64::MAX, 0), u64::MAX >> 1);
    }

    #[test]
    fn radix_matches_comparison_sort() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut keys: Vec<u64> = (0..5000).map(|_| rng.gen::<u64>() >> rng.gen_range(0..60)).collect();
        keys.sort_unstable();
        keys.dedup();
        let mut keyed: Vec<(u64, u32)> = keys.iter().rev().enumerate().map(|(i, &k)| (k, i as u32)).collect();
        let mut expect = keyed.clone();
        expect.sort_unstable_by_key(|p| p.0);
        sort_keyed_u64(&mut keyed, &Executor::sequential());
        assert_eq!(keyed, expect);
    }

    #[test]
    fn wide_and_generic_keys_agree_with_narrow() {
        // Three registers; pick widths so each path is exercised on the same data.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut rows: Vec<[u64; 3]> = (0..300)
            .map(|_| [rng.gen_range(0..4), rng.gen_range(0..8), rng.gen_range(0..4)])
            .collect();
        rows.sort_unstable();
        rows.dedup();
        let flat: Vec<u64> = rows.iter().flatten().copied().collect();
        let exec = Executor::sequential();
        let groups_for = |widths: [u32; 3]| {
            let layout = KeyLayout::new(&[0, 1, 2], |s| widths[s], 1, 1);
            coherent_groups(&flat, 3, &layout, &exec, |_| true)
        };
        let narrow = groups_for([2, 3, 2]);
        let wide = groups_for([60, 40, 2]);
        let generic = groups_for([64, 64, 64]);
        assert_eq!(narrow, wide);
        assert_eq!(narrow, generic);
    }
}
