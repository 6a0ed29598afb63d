use std::ffi::{CStr, CString};
use std::ptr;

use sparq_ffi::*;

fn last_error() -> String {
    let p = sparq_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn bell_pair_through_the_abi() {
    unsafe {
        let s = sparq_state_new();
        let mut q = 0;
        let name = CString::new("q").unwrap();
        assert_eq!(sparq_state_add_register(s, name.as_ptr(), 2, &mut q), SparqStatus::Ok);
        assert_eq!(sparq_apply_h(s, q, 0), SparqStatus::Ok);
        let (regs, bits) = ([q], [0u32]);
        assert_eq!(sparq_apply_x(s, q, 1, regs.as_ptr(), bits.as_ptr(), ptr::null(), 1), SparqStatus::Ok);
        assert_eq!(sparq_state_branch_count(s), 2);
        assert_eq!(sparq_state_qubit_count(s), 2);
        let mut dense = [0.0f64; 8];
        assert_eq!(sparq_state_dense(s, dense.as_mut_ptr(), 8), SparqStatus::Ok);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((dense[0] - h).abs() < 1e-15 && (dense[6] - h).abs() < 1e-15);
        assert_eq!(dense[2], 0.0);
        let mut norm = 0.0;
        assert_eq!(sparq_state_norm(s, &mut norm), SparqStatus::Ok);
        assert!((norm - 1.0).abs() < 1e-15);
        let mut id = 9;
        assert_eq!(sparq_state_register_id(s, name.as_ptr(), &mut id), SparqStatus::Ok);
        assert_eq!(id, q);
        sparq_state_free(s);
    }
}

#[test]
fn general_unitary_and_zero_control() {
    unsafe {
        let s = sparq_state_new();
        let (mut a, mut b) = (0, 0);
        sparq_state_add_register(s, c"a".as_ptr(), 1, &mut a);
        sparq_state_add_register(s, c"b".as_ptr(), 1, &mut b);
        // Ry(pi/2) on b when a == 0.
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let m = [r, 0.0, -r, 0.0, r, 0.0, r, 0.0];
        let zero = [0u8];
        assert_eq!(
            sparq_apply_unitary(s, b, 0, m.as_ptr(), [a].as_ptr(), [0u32].as_ptr(), zero.as_ptr(), 1),
            SparqStatus::Ok
        );
        assert_eq!(sparq_state_branch_count(s), 2);
        let bad = [1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0];
        assert_eq!(
            sparq_apply_unitary(s, b, 0, bad.as_ptr(), ptr::null(), ptr::null(), ptr::null(), 0),
            SparqStatus::GateError
        );
        assert!(last_error().contains("unitary"));
        sparq_state_free(s);
    }
}

#[test]
fn qram_and_measurement() {
    unsafe {
        let s = sparq_state_new();
        let (mut a, mut d) = (0, 0);
        sparq_state_add_register(s, c"a".as_ptr(), 2, &mut a);
        sparq_state_add_register(s, c"d".as_ptr(), 3, &mut d);
        sparq_apply_x(s, a, 0, ptr::null(), ptr::null(), ptr::null(), 0);
        let words = [1u64, 6, 2, 7];
        assert_eq!(sparq_qram_load(s, a, d, 2, 3, words.as_ptr(), 4), SparqStatus::Ok);
        let mut v = 0;
        assert_eq!(sparq_measure_register(s, d, 1, &mut v), SparqStatus::Ok);
        assert_eq!(v, 6);
        assert_eq!(sparq_qram_load(s, a, d, 2, 3, words.as_ptr(), 3), SparqStatus::QramError);
        assert_eq!(sparq_qram_load(s, a, d, 2, 3, [1u64, 6, 2, 9].as_ptr(), 4), SparqStatus::QramError);
        sparq_state_free(s);
    }
}

#[test]
fn run_qasm_returns_a_state() {
    let src = CString::new("OPENQASM 2.0;\ninclude \"qelib1.inc\";\nqreg q[40];\nh q[0];\ncx q[0],q[39];\n").unwrap();
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(sparq_run_qasm(src.as_ptr(), 1, 0, &mut out), SparqStatus::Ok);
        assert_eq!(sparq_state_branch_count(out), 2);
        let mut buf = [0.0f64; 4];
        assert_eq!(sparq_state_dense(out, buf.as_mut_ptr(), 4), SparqStatus::RuntimeError);
        sparq_state_free(out);

        let bad = CString::new("OPENQASM 2.0;\nqreg q[1];\nfoo q[0];\n").unwrap();
        assert_eq!(sparq_run_qasm(bad.as_ptr(), 1, 0, &mut out), SparqStatus::ParseError);
    }
}

#[test]
fn errors_are_reported_not_raised() {
    unsafe {
        let mut id = 0;
        assert_eq!(sparq_state_add_register(ptr::null_mut(), c"x".as_ptr(), 1, &mut id), SparqStatus::NullPointer);
        let s = sparq_state_new();
        assert_eq!(sparq_state_add_register(s, c"x".as_ptr(), 0, &mut id), SparqStatus::RegisterError);
        sparq_state_add_register(s, c"x".as_ptr(), 1, &mut id);
        assert_eq!(sparq_state_add_register(s, c"x".as_ptr(), 1, &mut id), SparqStatus::RegisterError);
        assert_eq!(sparq_apply_h(s, id, 5), SparqStatus::GateError);
        assert_eq!(sparq_state_register_id(s, c"nope".as_ptr(), &mut id), SparqStatus::RegisterError);
        let mut buf = [0.0f64; 2];
        assert_eq!(sparq_state_dense(s, buf.as_mut_ptr(), 2), SparqStatus::InvalidArgument);
        assert_eq!(sparq_state_branch_count(ptr::null()), 0);
        sparq_state_free(s);
        sparq_state_free(ptr::null_mut());
    }
}
