use catlab::dynamics::{period_mod, CatMatrix};
use catlab::linalg::op_norm;
use catlab::propagator::{build_propagator, Route};
use catlab::quantization::{commutator_defect, product_defect, quantize, QuantumTorus, TorusSymbol};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn egorov_sweep_over_powers_of_two() {
    let m = CatMatrix::arnold();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for n in [8usize, 16, 32, 64, 128] {
        let qt = QuantumTorus::new(n).unwrap();
        let p = build_propagator(&qt, &m).unwrap();
        assert!(matches!(p.route(), Route::Generators(_)));
        for _ in 0..5 {
            let a = TorusSymbol::random(&mut rng, 5, true);
            assert!(p.egorov_defect(&a) <= 1e-9, "N={n}");
        }
    }
}

#[test]
fn trace_sum_rule() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for n in [10usize, 64, 250] {
        let qt = QuantumTorus::new(n).unwrap();
        for _ in 0..5 {
            let a = TorusSymbol::random(&mut rng, 4, false);
            let tr: Complex64 = quantize(&qt, &a).entries.trace() / n as f64;
            assert!((tr - a.mean()).norm() <= 1e-10);
        }
    }
}

#[test]
fn other_cat_maps_satisfy_egorov() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for entries in [[[1, 1], [1, 2]], [[3, 2], [1, 1]], [[2, 3], [1, 2]]] {
        let m = CatMatrix::new(entries).unwrap();
        for n in [12usize, 30] {
            let qt = QuantumTorus::new(n).unwrap();
            let p = build_propagator(&qt, &m).unwrap();
            let a = TorusSymbol::random(&mut rng, 3, true);
            assert!(p.egorov_defect(&a) <= 1e-9);
        }
    }
}

#[test]
fn defects_shrink_with_n() {
    let (a, b) = (TorusSymbol::cos_x(), TorusSymbol::cos_xi());
    let d = |n| {
        let qt = QuantumTorus::new(n).unwrap();
        (product_defect(&qt, &a, &b), commutator_defect(&qt, &a, &b))
    };
    let (p1, c1) = d(64);
    let (p2, c2) = d(256);
    assert!(p2 < p1 / 3.0 && c2 < c1 / 12.0);
}

#[test]
fn propagator_power_matches_period_mod_2n() {
    let m = CatMatrix::arnold();
    let n = 20;
    let k = period_mod(&m, 2 * n as u64);
    let p = build_propagator(&QuantumTorus::new(n).unwrap(), &m).unwrap();
    let (q, _) = p.quantum_period(10 * k).unwrap();
    assert_eq!(k % q, 0);
    let bk = p.power(q);
    let scalar = bk[(0, 0)];
    let identity = catlab::linalg::CMatrix::identity(n, n) * scalar;
    assert!(op_norm(&(bk - identity)) < 1e-8);
}
