//! End-to-end reconstructions: ensemble, simulated data, solver, diagnostics.

use qst_core::consensus::{consensus_solve, shard_measurements, validate_partition, Topology};
use qst_core::experiment::{run_experiment, write_csv, ExperimentSpec};
use qst_core::pauli::sample_ensemble;
use qst_core::solvers::{solve, SolverConfig, SolverKind};
use qst_core::states::{
    random_density, reconstruction_error, relative_error, simulate_measurements, validate_state, NoiseModel,
};

#[test]
fn every_solver_recovers_at_full_sampling() {
    for q in 1..=3 {
        let d = 1 << q;
        for r in [1, d.min(2)] {
            let truth = random_density(d, r, 40 + q as u64).unwrap();
            let ens = sample_ensemble(q, d * d, 41).unwrap();
            let data = simulate_measurements(&ens, &truth, &NoiseModel::noiseless(), 42).unwrap();
            // The eigenvalue shrink biases unequal spectra, so only rank one is exact for ADMM.
            let kinds: &[SolverKind] = if r == 1 { &SolverKind::ALL } else { &[SolverKind::Ls] };
            for &kind in kinds {
                let res = solve(kind, &ens, &data.record, &SolverConfig::default()).unwrap();
                let err = reconstruction_error(&truth, &res.rho_hat).unwrap();
                assert!(err < 1e-8, "{kind} q={q} r={r}: {err:e}");
                assert!(validate_state(&res.rho_hat, 1e-9).unwrap().is_valid());
            }
        }
    }
}

#[test]
fn compressed_noisy_outputs_are_states() {
    let truth = random_density(16, 1, 7).unwrap();
    let ens = sample_ensemble(4, 128, 8).unwrap();
    let data = simulate_measurements(&ens, &truth, &NoiseModel::gaussian(1e-3), 9).unwrap();
    let mut errs = Vec::new();
    for kind in SolverKind::ALL {
        let res = solve(kind, &ens, &data.record, &SolverConfig::default()).unwrap();
        let report = validate_state(&res.rho_hat, 1e-9).unwrap();
        assert!(report.is_valid(), "{kind}: {report:?}");
        errs.push(reconstruction_error(&truth, &res.rho_hat).unwrap());
    }
    // ls, admm_simple, admm_robust
    assert!(errs[1] < errs[0] / 10.0, "{errs:?}");
    assert!(errs[2] < errs[0] / 10.0, "{errs:?}");
}

#[test]
fn rank_cap_holds_end_to_end() {
    let truth = random_density(16, 2, 3).unwrap();
    let ens = sample_ensemble(4, 160, 4).unwrap();
    let data = simulate_measurements(&ens, &truth, &NoiseModel::gaussian(1e-2), 5).unwrap();
    let cfg = SolverConfig {
        rank_cap: Some(2),
        ..SolverConfig::default()
    };
    for kind in SolverKind::ALL {
        let res = solve(kind, &ens, &data.record, &cfg).unwrap();
        assert!(validate_state(&res.rho_hat, 1e-9).unwrap().rank <= 2, "{kind}");
    }
}

#[test]
fn ring_consensus_matches_complete_graph() {
    let truth = random_density(8, 1, 11).unwrap();
    let ens = sample_ensemble(3, 64, 12).unwrap();
    let data = simulate_measurements(&ens, &truth, &NoiseModel::noiseless(), 13).unwrap();
    let cfg = SolverConfig::default();

    let mut complete = shard_measurements(&ens, &data.record, 6, 14).unwrap();
    validate_partition(&complete, 64).unwrap();
    let a = consensus_solve(&mut complete, &Topology::complete(6).unwrap(), &cfg, 2000).unwrap();

    let mut ring = shard_measurements(&ens, &data.record, 6, 14).unwrap();
    let b = consensus_solve(&mut ring, &Topology::ring(6).unwrap(), &cfg, 2000).unwrap();

    assert!(reconstruction_error(&truth, &a.rho_hat).unwrap() < 1e-6);
    assert!(relative_error(&a.rho_hat, &b.rho_hat).unwrap() < 1e-5);
    // Disagreement on the sparser graph ends small too.
    assert!(b.history.last().unwrap().primal < 1e-5);
}

#[test]
fn small_sweep_is_reproducible_and_trends_down() {
    let spec = ExperimentSpec {
        eta_grid: vec![0.3, 0.6, 1.0],
        trials: 4,
        ..ExperimentSpec::gaussian_sweep(3, 1, 2024)
    };
    let first = run_experiment(&spec).unwrap();
    let second = run_experiment(&spec).unwrap();
    let (mut a, mut b) = (Vec::new(), Vec::new());
    write_csv(&first, &mut a).unwrap();
    write_csv(&second, &mut b).unwrap();
    assert_eq!(a, b);
    assert_eq!(first.rows.len(), 6);

    let med = first.medians(SolverKind::AdmmSimple);
    assert!(med[0] > med[2], "{med:?}");
    assert!(med[2] < 1e-2, "{med:?}");
    assert!(first.rows.iter().all(|r| r.failures == 0 && r.trials == 4));
}

#[test]
fn sweep_json_round_trip() {
    let spec = ExperimentSpec::outlier_sweep(2, 1, 5);
    let back = ExperimentSpec::from_json(&spec.to_json().unwrap()).unwrap();
    assert_eq!(spec, back);
    assert!(ExperimentSpec::from_json(r#"{"q": 2, "r": 1, "bogus": 1}"#).is_err());
}
