use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};

/// Slot index of a register inside every branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RegisterId(pub u32);

impl RegisterId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for RegisterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegisterType {
    Boolean,
    UnsignedInt,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisterDescriptor {
    pub id: RegisterId,
    pub name: String,
    pub width: u32,
    pub dtype: RegisterType,
    pub active: bool,
}

impl RegisterDescriptor {
    /// All-ones mask of the register width.
    pub fn mask(&self) -> u64 {
        width_mask(self.width)
    }
}

pub(crate) fn width_mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

/// Register metadata shared by every branch of a state.
///
/// Ids are slot indices. A fresh slot is preferred over recycling an
/// inactive one so that a removed register's id is not reused while slots
/// remain.
#[derive(Debug, Clone)]
pub struct RegisterTable {
    descriptors: Vec<RegisterDescriptor>,
    name_index: HashMap<String, RegisterId>,
    capacity: usize,
    // Active ids, ascending.
    active: Vec<usize>,
    qubit_count: u32,
    max_qubit_count: u32,
    max_register_count: usize,
    max_system_size: usize,
}

impl RegisterTable {
    pub fn new(capacity: usize) -> Self {
        Self {
            descriptors: Vec::new(),
            name_index: HashMap::new(),
            capacity,
            active: Vec::new(),
            qubit_count: 0,
            max_qubit_count: 0,
            max_register_count: 0,
            max_system_size: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn qubit_count(&self) -> u32 {
        self.qubit_count
    }

    pub fn register_count(&self) -> usize {
        self.active.len()
    }

    pub fn max_qubit_count(&self) -> u32 {
        self.max_qubit_count
    }

    pub fn max_register_count(&self) -> usize {
        self.max_register_count
    }

    /// Largest branch count observed, including transient partners created
    /// during interference operations.
    pub fn max_system_size(&self) -> usize {
        self.max_system_size
    }

    pub(crate) fn observe_size(&mut self, size: usize) {
        self.max_system_size = self.max_system_size.max(size);
    }

    pub fn descriptors(&self) -> &[RegisterDescriptor] {
        &self.descriptors
    }

    pub fn active_ids(&self) -> impl Iterator<Item = RegisterId> + '_ {
        self.active.iter().map(|&i| RegisterId(i as u32))
    }

    pub(crate) fn active_slots(&self) -> &[usize] {
        &self.active
    }

    pub fn id(&self, name: &str) -> Result<RegisterId> {
        self.name_index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownRegister(name.to_string()))
    }

    /// Descriptor of an active register.
    pub fn get(&self, id: RegisterId) -> Result<&RegisterDescriptor> {
        match self.descriptors.get(id.index()) {
            Some(d) if d.active => Ok(d),
            _ => Err(Error::NotActive(id)),
        }
    }

    pub fn width(&self, id: RegisterId) -> Result<u32> {
        self.get(id).map(|d| d.width)
    }

    pub(crate) fn add(&mut self, name: &str, width: u32, dtype: RegisterType) -> Result<RegisterId> {
        if !(1..=64).contains(&width) {
            return Err(Error::WidthOutOfRange(width));
        }
        if self.name_index.contains_key(name) {
            return Err(Error::DuplicateName(name.to_string()));
        }
        let desc = |id: usize| RegisterDescriptor {
            id: RegisterId(id as u32),
            name: name.to_string(),
            width,
            dtype,
            active: true,
        };
        let slot = if self.descriptors.len() < self.capacity {
            let id = self.descriptors.len();
            self.descriptors.push(desc(id));
            id
        } else {
            let id = self
                .descriptors
                .iter()
                .position(|d| !d.active)
                .ok_or(Error::CapacityExceeded(self.capacity))?;
            self.descriptors[id] = desc(id);
            id
        };
        let id = RegisterId(slot as u32);
        self.name_index.insert(name.to_string(), id);
        let pos = self.active.partition_point(|&a| a < slot);
        self.active.insert(pos, slot);
        self.qubit_count += width;
        self.max_qubit_count = self.max_qubit_count.max(self.qubit_count);
        self.max_register_count = self.max_register_count.max(self.active.len());
        Ok(id)
    }

    pub(crate) fn deactivate(&mut self, id: RegisterId) -> Result<()> {
        let width = self.get(id)?.width;
        let d = &mut self.descriptors[id.index()];
        d.active = false;
        self.name_index.remove(&d.name);
        self.active.retain(|&a| a != id.index());
        self.qubit_count -= width;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_register_gets_id_zero() {
        let mut t = RegisterTable::new(4);
        let id = t.add("addr", 3, RegisterType::UnsignedInt).unwrap();
        assert_eq!(id, RegisterId(0));
        assert_eq!(t.qubit_count(), 3);
    }

    #[test]
    fn widths_add_up() {
        let mut t = RegisterTable::new(4);
        t.add("addr", 3, RegisterType::UnsignedInt).unwrap();
        t.add("data", 2, RegisterType::UnsignedInt).unwrap();
        assert_eq!(t.qubit_count(), 5);
        assert_eq!(t.register_count(), 2);
    }

    #[test]
    fn width_limits() {
        let mut t = RegisterTable::new(4);
        assert_eq!(
            t.add("x", 65, RegisterType::UnsignedInt),
            Err(Error::WidthOutOfRange(65))
        );
        assert_eq!(
            t.add("x", 0, RegisterType::Boolean),
            Err(Error::WidthOutOfRange(0))
        );
        assert!(t.add("x", 64, RegisterType::UnsignedInt).is_ok());
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut t = RegisterTable::new(4);
        t.add("a", 1, RegisterType::Boolean).unwrap();
        assert!(matches!(
            t.add("a", 2, RegisterType::Boolean),
            Err(Error::DuplicateName(_))
        ));
    }

    #[test]
    fn counters_are_monotone() {
        let mut t = RegisterTable::new(4);
        let a = t.add("a", 5, RegisterType::UnsignedInt).unwrap();
        t.add("b", 3, RegisterType::UnsignedInt).unwrap();
        t.deactivate(a).unwrap();
        assert_eq!(t.qubit_count(), 3);
        assert_eq!(t.max_qubit_count(), 8);
        assert_eq!(t.max_register_count(), 2);
    }

    #[test]
    fn recycled_name_gets_fresh_id_and_full_table_recycles() {
        let mut t = RegisterTable::new(2);
        let a = t.add("a", 1, RegisterType::Boolean).unwrap();
        t.deactivate(a).unwrap();
        let a2 = t.add("a", 1, RegisterType::Boolean).unwrap();
        assert_ne!(a, a2);
        t.deactivate(a2).unwrap();
        // Both slots used once; the first inactive one is recycled.
        assert_eq!(t.add("c", 1, RegisterType::Boolean).unwrap(), RegisterId(0));
        t.add("d", 1, RegisterType::Boolean).unwrap();
        assert_eq!(
            t.add("e", 1, RegisterType::Boolean),
            Err(Error::CapacityExceeded(2))
        );
    }
}
