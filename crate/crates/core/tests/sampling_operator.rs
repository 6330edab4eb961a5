use proptest::prelude::*;
use qst_core::linalg::{kron, trace, ComplexMatrix};
use qst_core::pauli::{sample_ensemble, MeasurementEnsemble, Pauli, PauliWord};
use qst_core::seed;
use qst_core::states::random_hermitian_perturbation;
use qst_core::{Complex64, Error};

/// Dense reference: `c·Re tr(O x)` with `O` built by Kronecker products.
fn dense_forward(ens: &MeasurementEnsemble, x: &ComplexMatrix) -> Vec<f64> {
    ens.words()
        .iter()
        .map(|w| {
            let o = w
                .letters()
                .iter()
                .fold(ComplexMatrix::identity(1), |acc, p| kron(&acc, &p.matrix()));
            let prod = qst_core::linalg::matmul(&o, x).unwrap();
            ens.normalization() * trace(&prod).unwrap().re
        })
        .collect()
}

#[test]
fn sparse_forward_matches_dense_kronecker() {
    for q in 1..=4 {
        let d = 1 << q;
        let ens = sample_ensemble(q, d * d / 2 + 1, q as u64).unwrap();
        let x = random_hermitian_perturbation(d, 1.0, &mut seed::rng(10 + q as u64));
        let sparse = ens.forward(&x).unwrap();
        let dense = dense_forward(&ens, &x);
        for (a, b) in sparse.iter().zip(&dense) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn word_order_is_most_significant_first() {
    let w: PauliWord = "XZ".parse().unwrap();
    let expected = kron(&Pauli::X.matrix(), &Pauli::Z.matrix());
    assert_eq!(w.matrix(), expected);
    assert_eq!(w.index(), 4 + 3);
}

#[test]
fn normalization_gives_isometry_at_full_sampling() {
    let ens = sample_ensemble(3, 64, 5).unwrap();
    assert!((ens.normalization() - 1.0).abs() < 1e-15);
    let x = random_hermitian_perturbation(8, 1.0, &mut seed::rng(6));
    let y = ens.forward(&x).unwrap();
    let lhs: f64 = y.iter().map(|v| v * v).sum();
    // ‖A x‖² = d·‖x‖²_F when every word is measured with c = 1
    let rhs = 8.0 * x.real_inner(&x);
    assert!((lhs - rhs).abs() < 1e-10 * rhs);
}

#[test]
fn capacity_and_hermiticity_errors() {
    assert!(matches!(sample_ensemble(2, 17, 0), Err(Error::Capacity { requested: 17, available: 16 })));
    let ens = sample_ensemble(1, 4, 0).unwrap();
    let mut x = ComplexMatrix::zeros(2, 2);
    x[(0, 1)] = Complex64::new(1.0, 0.0);
    assert!(matches!(ens.forward(&x), Err(Error::NotHermitian { .. })));
    assert!(ens.forward_real_part(&x).is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// `⟨A x, v⟩ = Re⟨x, A* v⟩` for Hermitian x.
    #[test]
    fn adjoint_is_the_adjoint(q in 1usize..5, frac in 0.05f64..1.0, s in any::<u64>()) {
        let d = 1usize << q;
        let m = ((frac * (d * d) as f64).ceil() as usize).max(1);
        let ens = sample_ensemble(q, m, s).unwrap();
        let mut rng = seed::rng(s ^ 1);
        let x = random_hermitian_perturbation(d, 1.0, &mut rng);
        let v: Vec<f64> = (0..m as u64).map(|k| (seed::derive(s, k) % 1000) as f64 / 500.0 - 1.0).collect();
        let ax = ens.forward(&x).unwrap();
        let lhs: f64 = ax.iter().zip(&v).map(|(a, b)| a * b).sum();
        let rhs = x.real_inner(&ens.adjoint(&v).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
    }

    #[test]
    fn pseudoinverse_is_a_right_inverse(q in 1usize..5, frac in 0.05f64..1.0, s in any::<u64>()) {
        let d = 1usize << q;
        let m = ((frac * (d * d) as f64).ceil() as usize).max(1);
        let ens = sample_ensemble(q, m, s).unwrap();
        let v: Vec<f64> = (0..m as u64).map(|k| (seed::derive(s, k) % 997) as f64 / 97.0).collect();
        let back = ens.forward(&ens.pseudoinverse_apply(&v).unwrap()).unwrap();
        for (a, b) in v.iter().zip(&back) {
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn sampled_words_are_distinct(q in 1usize..6, s in any::<u64>()) {
        let d = 1usize << q;
        let ens = sample_ensemble(q, d * d / 3 + 1, s).unwrap();
        let mut idx: Vec<u64> = ens.words().iter().map(|w| w.index()).collect();
        idx.sort_unstable();
        idx.dedup();
        prop_assert_eq!(idx.len(), ens.len());
    }
}
