//! Oracle-level QRAM: `|i>_A |j>_D -> |i>_A |j XOR d_i>_D`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::profiler;
use crate::state::{width_mask, RegisterId, SparseState};

/// Largest supported address width (entries are held in memory).
pub const MAX_ADDR_WIDTH: u32 = 32;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QramMemory {
    addr_width: u32,
    word_width: u32,
    entries: Vec<u64>,
}

impl QramMemory {
    pub fn new(addr_width: u32, word_width: u32, entries: Vec<u64>) -> Result<Self> {
        if addr_width > MAX_ADDR_WIDTH {
            return Err(Error::InvalidMemory(format!("address width {addr_width} exceeds {MAX_ADDR_WIDTH}")));
        }
        if !(1..=64).contains(&word_width) {
            return Err(Error::InvalidMemory(format!("word width {word_width} is outside 1..=64")));
        }
        let want = 1usize << addr_width;
        if entries.len() != want {
            return Err(Error::InvalidMemory(format!(
                "{} entries for address width {addr_width}, expected {want}",
                entries.len()
            )));
        }
        let mask = width_mask(word_width);
        if let Some((index, &value)) = entries.iter().enumerate().find(|(_, &v)| v & !mask != 0) {
            return Err(Error::EntryOutOfRange { index, value, word_width });
        }
        Ok(Self {
            addr_width,
            word_width,
            entries,
        })
    }

    pub fn addr_width(&self) -> u32 {
        self.addr_width
    }

    pub fn word_width(&self) -> u32 {
        self.word_width
    }

    pub fn entries(&self) -> &[u64] {
        &self.entries
    }

    pub fn get(&self, addr: u64) -> u64 {
        self.entries[addr as usize]
    }
}

/// Reads `{addr_width, word_width, entries}` JSON.
pub fn load_memory_file(path: impl AsRef<Path>) -> Result<QramMemory> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    let raw: QramMemory = serde_json::from_str(&text).map_err(|e| Error::ParseError {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    QramMemory::new(raw.addr_width, raw.word_width, raw.entries).map_err(|e| match e {
        Error::InvalidMemory(msg) => Error::ParseError {
            path: path.to_path_buf(),
            msg,
        },
        other => other,
    })
}

/// `width` bits of register `reg` starting at bit `shift`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AddressField {
    pub reg: RegisterId,
    pub shift: u32,
    pub width: u32,
}

impl AddressField {
    pub fn whole(reg: RegisterId, width: u32) -> Self {
        Self { reg, shift: 0, width }
    }
}

/// XORs `d[addr]` into `data` in every branch.
pub fn qram_load(state: &mut SparseState, addr: RegisterId, data: RegisterId, memory: &QramMemory) -> Result<()> {
    let aw = state.table().width(addr)?;
    if aw != memory.addr_width {
        return Err(Error::WidthMismatch(aw, memory.addr_width));
    }
    qram_load_fields(state, &[AddressField::whole(addr, aw)], data, memory)
}

/// QRAM query with an address assembled from bit fields of several
/// registers, the first field most significant.
pub fn qram_load_fields(
    state: &mut SparseState,
    fields: &[AddressField],
    data: RegisterId,
    memory: &QramMemory,
) -> Result<()> {
    let _t = profiler::scope("qram", "QRAMLoad");
    let dw = state.table().width(data)?;
    if dw != memory.word_width {
        return Err(Error::WidthMismatch(dw, memory.word_width));
    }
    let mut total = 0;
    for f in fields {
        if f.reg == data {
            return Err(Error::AliasedRegisters(data));
        }
        let w = state.table().width(f.reg)?;
        if f.shift + f.width > w {
            return Err(Error::InvalidTarget {
                reg: f.reg,
                bit: f.shift + f.width - 1,
                width: w,
            });
        }
        total += f.width;
    }
    if total != memory.addr_width {
        return Err(Error::WidthMismatch(total, memory.addr_width));
    }
    let plan: Vec<(usize, u32, u64)> = fields
        .iter()
        .map(|f| (f.reg.index(), f.shift, width_mask(f.width)))
        .collect();
    let widths: Vec<u32> = fields.iter().map(|f| f.width).collect();
    let d = data.index();
    let entries = memory.entries();
    state.map_branches(move |_, row| {
        let mut a = 0u64;
        for (&(s, shift, mask), &w) in plan.iter().zip(&widths) {
            // Shifts of 64 occur for empty fields.
            a = a.checked_shl(w).unwrap_or(0) | (row[s].checked_shr(shift).unwrap_or(0) & mask);
        }
        row[d] ^= entries[a as usize];
    });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::RegisterType;
    use num_complex::Complex64;
    use std::io::Write;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn setup(aw: u32, dw: u32) -> (SparseState, RegisterId, RegisterId) {
        let mut s = SparseState::new();
        let a = s.add_register("addr", aw, RegisterType::UnsignedInt).unwrap();
        let d = s.add_register("data", dw, RegisterType::UnsignedInt).unwrap();
        (s, a, d)
    }

    #[test]
    fn single_address() {
        let m = QramMemory::new(1, 2, vec![3, 1]).unwrap();
        let (mut s, a, d) = setup(1, 2);
        s.set_branches([(c(1.0), vec![(a, 1)])]).unwrap();
        qram_load(&mut s, a, d, &m).unwrap();
        assert_eq!(s.value(0, d), 1);
    }

    #[test]
    fn superposed_address_and_involution() {
        let m = QramMemory::new(1, 2, vec![3, 1]).unwrap();
        let (mut s, a, d) = setup(1, 2);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        s.set_branches([(c(h), vec![(a, 0)]), (c(h), vec![(a, 1)])]).unwrap();
        let before = s.dense_vector().unwrap();
        qram_load(&mut s, a, d, &m).unwrap();
        assert_eq!(s.amplitude_of(&[(a, 0), (d, 3)]), c(h));
        assert_eq!(s.amplitude_of(&[(a, 1), (d, 1)]), c(h));
        qram_load(&mut s, a, d, &m).unwrap();
        assert_eq!(s.dense_vector().unwrap(), before);
    }

    #[test]
    fn width_checks() {
        let m = QramMemory::new(2, 2, vec![0; 4]).unwrap();
        let (mut s, a, d) = setup(1, 2);
        assert_eq!(qram_load(&mut s, a, d, &m), Err(Error::WidthMismatch(1, 2)));
        let (mut s, a, d) = setup(2, 3);
        assert_eq!(qram_load(&mut s, a, d, &m), Err(Error::WidthMismatch(3, 2)));
    }

    #[test]
    fn address_fields_concatenate() {
        // Address = (x bit 1..2) followed by (y whole): 2 + 1 bits.
        let m = QramMemory::new(3, 8, (0..8).map(|i| i * 10).collect()).unwrap();
        let mut s = SparseState::new();
        let x = s.add_register("x", 4, RegisterType::UnsignedInt).unwrap();
        let y = s.add_register("y", 1, RegisterType::Boolean).unwrap();
        let d = s.add_register("d", 8, RegisterType::UnsignedInt).unwrap();
        s.set_branches([(c(1.0), vec![(x, 0b0100), (y, 1)])]).unwrap();
        let fields = [AddressField { reg: x, shift: 1, width: 2 }, AddressField::whole(y, 1)];
        qram_load_fields(&mut s, &fields, d, &m).unwrap();
        assert_eq!(s.value(0, d), 50);
    }

    #[test]
    fn memory_validation() {
        assert!(matches!(QramMemory::new(1, 2, vec![1]), Err(Error::InvalidMemory(_))));
        assert_eq!(
            QramMemory::new(1, 2, vec![5, 0]),
            Err(Error::EntryOutOfRange { index: 0, value: 5, word_width: 2 })
        );
    }

    fn write_tmp(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn memory_files() {
        let f = write_tmp(r#"{"addr_width":1,"word_width":2,"entries":[3,1]}"#);
        assert_eq!(load_memory_file(f.path()).unwrap().entries().len(), 2);
        let f = write_tmp(r#"{"addr_width":2,"word_width":2,"entries":[3,1]}"#);
        assert!(matches!(load_memory_file(f.path()), Err(Error::ParseError { .. })));
        let f = write_tmp(r#"{"addr_width":1,"word_width":2,"entries":[5,1]}"#);
        assert!(matches!(load_memory_file(f.path()), Err(Error::EntryOutOfRange { index: 0, value: 5, .. })));
        let f = write_tmp("not json");
        assert!(matches!(load_memory_file(f.path()), Err(Error::ParseError { .. })));
    }
}
