//! Process-wide operation timers, keyed by (family, op name).
//!
//! Disabled by default; a disabled scope costs one relaxed atomic load.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Mutex, MutexGuard};
use std::time::{Duration, Instant};

static ENABLED: AtomicBool = AtomicBool::new(false);
/// `(op, name)` to total time and call count.
type Registry = BTreeMap<(&'static str, &'static str), (Duration, u64)>;

static REGISTRY: Mutex<Registry> = Mutex::new(BTreeMap::new());

fn registry() -> MutexGuard<'static, Registry> {
    REGISTRY.lock().unwrap_or_else(|e| e.into_inner())
}

pub fn set_enabled(on: bool) {
    ENABLED.store(on, Ordering::Relaxed);
}

pub fn is_enabled() -> bool {
    ENABLED.load(Ordering::Relaxed)
}

pub fn reset() {
    registry().clear();
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileEntry {
    pub op: &'static str,
    pub name: &'static str,
    pub total_ms: f64,
    pub calls: u64,
}

pub fn snapshot() -> Vec<ProfileEntry> {
    registry()
        .iter()
        .map(|(&(op, name), &(d, calls))| ProfileEntry {
            op,
            name,
            total_ms: d.as_secs_f64() * 1e3,
            calls,
        })
        .collect()
}

/// CSV dump with header `op,name,total_ms,calls`.
pub fn to_csv() -> String {
    let mut out = String::from("op,name,total_ms,calls\n");
    for e in snapshot() {
        let _ = writeln!(out, "{},{},{:.6},{}", e.op, e.name, e.total_ms, e.calls);
    }
    out
}

/// Guard that records the elapsed time of its scope on drop.
#[must_use]
pub struct Scope {
    key: (&'static str, &'static str),
    start: Option<Instant>,
}

pub fn scope(op: &'static str, name: &'static str) -> Scope {
    Scope {
        key: (op, name),
        start: is_enabled().then(Instant::now),
    }
}

impl Drop for Scope {
    fn drop(&mut self) {
        if let Some(start) = self.start {
            let e = start.elapsed();
            let mut r = registry();
            let slot = r.entry(self.key).or_insert((Duration::ZERO, 0));
            slot.0 += e;
            slot.1 += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_only_when_enabled() {
        // Uses a key no other test touches; the registry is global.
        let key = ("unit", "profiler-test");
        {
            let _s = scope(key.0, key.1);
        }
        assert!(!snapshot().iter().any(|e| e.name == key.1) || is_enabled());
        set_enabled(true);
        for _ in 0..3 {
            let _s = scope(key.0, key.1);
        }
        set_enabled(false);
        let e = snapshot().into_iter().find(|e| e.name == key.1).unwrap();
        assert!(e.calls >= 3);
        assert!(to_csv().starts_with("op,name,total_ms,calls\n"));
    }
}
