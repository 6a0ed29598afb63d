use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::*;
use crate::error::Error;
use crate::state::{RegisterType, SparseState};

fn pd_identity() -> LinearSystem {
    let b = DVector::from_vec(vec![0.6, 0.8]);
    LinearSystem::new(DMatrix::identity(2, 2), b, 1.0, Variant::PositiveDefinite).unwrap()
}

fn close(a: Complex64, b: f64, tol: f64) -> bool {
    (a - b).norm() <= tol
}

#[test]
fn ub_prepares_random_vector() {
    let b = [0.1, -0.5, 0.3, 0.0, 0.7, -0.2, 0.25, 0.2];
    let norm = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut s = SparseState::new();
    let t = s.add_register("t", 3, RegisterType::UnsignedInt).unwrap();
    state_prep_ub(&mut s, t, &b).unwrap();
    let dense = s.dense_vector().unwrap();
    for (a, x) in dense.iter().zip(b) {
        assert!(close(*a, x / norm, 1e-12));
    }
}

#[test]
fn ub_trivial_cases() {
    let mut s = SparseState::new();
    let t = s.add_register("t", 2, RegisterType::UnsignedInt).unwrap();
    state_prep_ub(&mut s, t, &[1.0, 0.0, 0.0, 0.0]).unwrap();
    assert_eq!(s.len(), 1);
    assert!(close(s.amplitude(0), 1.0, 1e-15));

    let mut s = SparseState::new();
    let t = s.add_register("t", 2, RegisterType::UnsignedInt).unwrap();
    state_prep_ub(&mut s, t, &[0.5; 4]).unwrap();
    assert_eq!(s.len(), 4);
    assert!(s.amplitudes().iter().all(|&a| close(a, 0.5, 1e-12)));
    assert_eq!(state_prep_ub(&mut s, t, &[0.5; 4]).unwrap_err(), Error::TargetNotZero);
}

fn encode_block(a: &DMatrix<f64>) -> DMatrix<Complex64> {
    let dim = a.nrows();
    let n = dim.trailing_zeros();
    let trees = build_angle_trees(a).unwrap();
    let mut m = DMatrix::zeros(dim, dim);
    for j in 0..dim {
        let mut s = SparseState::new();
        let sys = s.add_register("sys", n, RegisterType::UnsignedInt).unwrap();
        let anc = s.add_register("anc", n, RegisterType::UnsignedInt).unwrap();
        s.set_branches([(Complex64::new(1.0, 0.0), vec![(sys, j as u64)])]).unwrap();
        block_encode_a(&mut s, sys, anc, &trees).unwrap();
        for i in 0..dim {
            m[(i, j)] = s.amplitude_of(&[(sys, i as u64), (anc, 0)]);
        }
    }
    m
}

#[test]
fn block_encoding_of_identity() {
    let m = encode_block(&DMatrix::identity(2, 2));
    let h = std::f64::consts::FRAC_1_SQRT_2;
    assert!(close(m[(0, 0)], h, 1e-12) && close(m[(1, 1)], h, 1e-12));
    assert!(close(m[(0, 1)], 0.0, 1e-12) && close(m[(1, 0)], 0.0, 1e-12));
}

#[test]
fn block_encoding_of_random_matrices() {
    for (n, variant, seed) in [(2, Variant::PositiveDefinite, 1), (2, Variant::NonHermitian, 2), (3, Variant::NonHermitian, 3)] {
        let sys = gen_linear_system(n, 10.0, variant, seed).unwrap();
        let m = encode_block(&sys.a);
        let f = sys.frobenius();
        for i in 0..sys.dim() {
            for j in 0..sys.dim() {
                assert!(close(m[(i, j)], sys.a[(i, j)] / f, 1e-10), "({i},{j})");
            }
        }
    }
}

#[test]
fn block_encoding_rejects_dirty_ancilla() {
    let trees = build_angle_trees(&DMatrix::identity(2, 2)).unwrap();
    let mut s = SparseState::new();
    let sys = s.add_register("sys", 1, RegisterType::UnsignedInt).unwrap();
    let anc = s.add_register("anc", 1, RegisterType::UnsignedInt).unwrap();
    s.set_branches([(Complex64::new(1.0, 0.0), vec![(anc, 1)])]).unwrap();
    assert_eq!(block_encode_a(&mut s, sys, anc, &trees).unwrap_err(), Error::AncillaNotZero);
}

#[test]
fn walk_ua_block_in_both_query_modes() {
    let sys = gen_linear_system(2, 30.0, Variant::NonHermitian, 5).unwrap();
    for q in [RotationQuery::Fused, RotationQuery::Qram] {
        let w = WalkCircuit::new(&sys, q).unwrap();
        let m = w.ua_block().unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!(close(m[(i, j)], sys.a[(i, j)] / w.alpha(), 1e-10));
            }
        }
    }
}

fn assert_hs_matches(sys: &LinearSystem, f: f64, q: RotationQuery) {
    let w = WalkCircuit::new(sys, q).unwrap();
    let block = w.hs_block(f).unwrap();
    let h = assemble_hs(sys, f) / hs_normalization(f, sys.frobenius());
    assert_eq!(block.shape(), h.shape());
    for i in 0..h.nrows() {
        for j in 0..h.ncols() {
            assert!(close(block[(i, j)], h[(i, j)], 1e-10), "{:?} f={f} ({i},{j})", sys.variant);
        }
    }
}

#[test]
fn hs_block_matches_classical_assembly() {
    for variant in [Variant::PositiveDefinite, Variant::NonHermitian] {
        let sys = gen_linear_system(2, 10.0, variant, 11).unwrap();
        for f in [0.0, 0.5, 1.0] {
            assert_hs_matches(&sys, f, RotationQuery::Fused);
        }
        assert_hs_matches(&sys, 0.3, RotationQuery::Qram);
    }
}

#[test]
fn hs_of_identity_at_f_one() {
    let sys = pd_identity();
    let w = WalkCircuit::new(&sys, RotationQuery::Fused).unwrap();
    let block = w.hs_block(1.0).unwrap();
    let qb = DMatrix::identity(2, 2) - &sys.b * sys.b.transpose();
    let scale = hs_normalization(1.0, sys.frobenius());
    for i in 0..2 {
        for j in 0..2 {
            assert!(close(block[(i, 2 + j)] * scale, qb[(i, j)], 1e-12));
            assert!(close(block[(2 + i, j)] * scale, qb[(i, j)], 1e-12));
            assert!(close(block[(i, j)], 0.0, 1e-12));
        }
    }
}

#[test]
fn initial_state_is_zero_eigenvector_of_h0() {
    for variant in [Variant::PositiveDefinite, Variant::NonHermitian] {
        let sys = gen_linear_system(2, 10.0, variant, 4).unwrap();
        let w = WalkCircuit::new(&sys, RotationQuery::Fused).unwrap();
        let mut s = w.initial_state().unwrap();
        w.apply_uh(&mut s, 0.0).unwrap();
        assert!(w.project(&s).iter().all(|a| a.norm() < 1e-12));
    }
}

#[test]
fn reflection_phases() {
    let mut s = SparseState::new();
    let a = s.add_register("a", 1, RegisterType::Boolean).unwrap();
    let x = s.add_register("x", 2, RegisterType::UnsignedInt).unwrap();
    let h = Complex64::new(0.5, 0.0);
    s.set_branches((0..4).map(|k| (h, vec![(a, k & 1), (x, k >> 1)]))).unwrap();
    let before = s.dense_vector().unwrap();
    reflection_r(&mut s, &[a]).unwrap();
    for b in s.branches() {
        let want = if b.value(a) == 0 { Complex64::new(0.0, 0.5) } else { Complex64::new(0.0, -0.5) };
        assert!((b.amplitude - want).norm() < 1e-15);
    }
    reflection_r(&mut s, &[a]).unwrap();
    let after = s.dense_vector().unwrap();
    for (p, q) in before.iter().zip(after) {
        assert!((p + q).norm() < 1e-15);
    }
}

#[test]
fn constant_zero_walk_returns_after_two_steps() {
    for variant in [Variant::PositiveDefinite, Variant::NonHermitian] {
        let sys = gen_linear_system(2, 10.0, variant, 8).unwrap();
        let w = WalkCircuit::new(&sys, RotationQuery::Fused).unwrap();
        let psi0 = w.project(&w.initial_state().unwrap());
        let cfg = WalkConfig {
            steps: 2,
            schedule: Schedule::Constant(0.0),
            query: RotationQuery::Fused,
        };
        let out = w.project(&run_walk(&w, &cfg).unwrap());
        let overlap: Complex64 = psi0.iter().zip(&out).map(|(a, b)| a.conj() * b).sum();
        assert!((overlap.norm() - 1.0).abs() < 1e-10);
        // One step leaves the zero-ancilla subspace entirely.
        let one = WalkConfig { steps: 1, ..cfg };
        let s = run_walk(&w, &one).unwrap();
        assert!(matches!(w.error(&s), Err(Error::ZeroProjection(_))));
    }
}

#[test]
fn identity_system_is_solved_at_small_t() {
    let sys = pd_identity();
    let cfg = WalkConfig {
        steps: 10,
        schedule: Schedule::Linear,
        query: RotationQuery::Fused,
    };
    let s = run_adiabatic(&sys, &cfg).unwrap();
    assert!(error_metric(&s, &sys).unwrap() <= 1e-8);
    assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
}

#[test]
fn query_modes_agree_on_walk() {
    let sys = gen_linear_system(2, 10.0, Variant::NonHermitian, 21).unwrap();
    let fused = WalkCircuit::new(&sys, RotationQuery::Fused).unwrap();
    let qram = WalkCircuit::new(&sys, RotationQuery::Qram).unwrap();
    let mut a = fused.initial_state().unwrap();
    let mut b = qram.initial_state().unwrap();
    for k in 0..6 {
        let f = k as f64 / 6.0;
        fused.step(&mut a, f).unwrap();
        qram.step(&mut b, f).unwrap();
    }
    assert_eq!(a.len(), b.len());
    for (x, y) in fused.project(&a).iter().zip(qram.project(&b)) {
        assert!((x - y).norm() < 1e-12);
    }
}

#[test]
fn error_metric_bounds() {
    let x = [0.6, 0.8];
    let c = |v: f64| Complex64::new(v, 0.0);
    assert!(projected_distance(&[c(0.6), c(0.8)], &x).unwrap() < 1e-12);
    assert!(projected_distance(&[Complex64::new(0.0, 1.2), Complex64::new(0.0, 1.6)], &x).unwrap() < 1e-7);
    let ortho = projected_distance(&[c(0.8), c(-0.6)], &x).unwrap();
    assert!((ortho - 2f64.sqrt()).abs() < 1e-12);
    assert!(matches!(projected_distance(&[c(1e-10), c(0.0)], &x), Err(Error::ZeroProjection(_))));
}

#[test]
fn error_metric_by_name_matches_circuit() {
    let sys = gen_linear_system(2, 10.0, Variant::NonHermitian, 3).unwrap();
    let cfg = WalkConfig::for_system(&sys, 20);
    let w = WalkCircuit::new(&sys, cfg.query).unwrap();
    let s = run_walk(&w, &cfg).unwrap();
    assert!((w.error(&s).unwrap() - error_metric(&s, &sys).unwrap()).abs() < 1e-15);
}

#[test]
fn schedule_endpoints() {
    let s = Schedule::Rational { kappa: 30.0 };
    assert!(s.eval(0.0).abs() < 1e-15);
    assert!((s.eval(1.0) - 1.0).abs() < 1e-12);
    assert!(s.eval(0.3) < s.eval(0.6));
}

#[test]
fn sweep_prefix_is_reproducible() {
    let mut cfg = SweepConfig {
        sizes: vec![2],
        kappas: vec![10.0],
        variants: vec![Variant::PositiveDefinite],
        t_grid: vec![20, 40],
        reps: 1,
        seed: 5,
        fit_min_t: 20,
        query: RotationQuery::Fused,
    };
    let one = experiment_sweep(&cfg).unwrap();
    cfg.reps = 3;
    let three = experiment_sweep(&cfg).unwrap();
    let first: Vec<_> = three.samples.iter().filter(|s| s.rep == 0).cloned().collect();
    assert_eq!(one.samples, first);
    assert!(three.to_csv().starts_with("variant,N,kappa,T,rep,error,slope_fit\npd,4,10,20,0,"));
}

#[test]
fn fits() {
    let (b, a) = linear_fit(&[(0.0, 1.0), (1.0, 3.0), (2.0, 5.0)]);
    assert!((b - 2.0).abs() < 1e-12 && (a - 1.0).abs() < 1e-12);
    let pts: Vec<(f64, f64)> = [10.0f64, 30.0, 50.0].iter().map(|&k| (k, 0.5 * k + 2.0 * k.sqrt())).collect();
    let (c1, c2) = theta_fit(&pts);
    assert!((c1 - 0.5).abs() < 1e-9 && (c2 - 2.0).abs() < 1e-9);
}
