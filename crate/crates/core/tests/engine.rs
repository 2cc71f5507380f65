use num_complex::Complex64;

use spinboson::config::preset;
use spinboson::dynmap::{analyze, reconstruct_map};
use spinboson::harness::{dephasing_errors, resolve_bath, run_simulation};
use spinboson::heom::{propagate, PropagationSettings, SysMatrix, SystemSpec};
use spinboson::oracles::{lindblad_constant_rate, LindbladKind};

fn short_offresonant(level: usize, t_final_fs: f64) -> spinboson::config::ExperimentConfig {
    let mut cfg = preset("paper_offresonant").unwrap();
    cfg.heom.level = level;
    cfg.heom.t_final_fs = t_final_fs;
    cfg
}

#[test]
fn weak_bath_matches_exact_dephasing() {
    let mut cfg = preset("paper_onresonant").unwrap();
    for c in &mut cfg.bath.lorentzian {
        c.delta *= 0.05;
    }
    let bath = resolve_bath(&cfg).unwrap();
    let settings = PropagationSettings { output_step_fs: 0.5, t_final_fs: 100.0, ..cfg.propagation_settings() };
    let (errs, drift) = dephasing_errors(&bath, &[2, 4], 1e-3, &settings).unwrap();
    assert!(errs[1] < 1e-4, "L=4 error {:.3e}", errs[1]);
    assert!(errs[1] < errs[0]);
    assert!(drift < 1e-9);
}

#[test]
fn uncoupled_system_is_unitary() {
    let mut cfg = short_offresonant(2, 50.0);
    for c in &mut cfg.bath.lorentzian {
        c.delta = 0.0;
    }
    let r = run_simulation(&cfg).unwrap();
    for (v, p) in r.volume().iter().zip(&r.purity) {
        assert!((v - 1.0).abs() < 1e-9);
        assert!((p - 1.0).abs() < 1e-9);
    }
    for g in r.report.canonical_rates.iter().flatten() {
        assert!(g.iter().all(|x| x.abs() < 1e-8), "{g:?}");
    }
}

#[test]
fn halving_the_step_leaves_the_volume_unchanged() {
    let coarse = short_offresonant(3, 20.0);
    let mut fine = coarse.clone();
    fine.heom.dt /= 2.0;
    let a = run_simulation(&coarse).unwrap();
    let b = run_simulation(&fine).unwrap();
    assert!(b.effective_dt < a.effective_dt);
    let diff = a.volume().iter().zip(b.volume()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-8, "step-halving change {diff:.3e}");
}

#[test]
fn trajectories_stay_physical() {
    let cfg = short_offresonant(3, 60.0);
    let bath = resolve_bath(&cfg).unwrap();
    let sys = SystemSpec::from_omega0(cfg.system.omega0.unwrap()).unwrap();
    let h = Complex64::new(0.5, 0.0);
    let rho0 = SysMatrix::new(h, h, h, h);
    let tr = propagate(&rho0, &sys, &bath.expansion, &cfg.propagation_settings()).unwrap();
    for ((r, herm), min_eig) in tr.rho.iter().zip(&tr.hermiticity_error).zip(&tr.min_eigenvalue) {
        assert!((r.trace().re - 1.0).abs() < 1e-10);
        assert!(*herm < 1e-10);
        assert!(*min_eig > -1e-3);
    }
}

#[test]
fn markovian_dephasing_has_no_witness() {
    let times: Vec<f64> = (0..=2000).map(|i| i as f64 * 0.1).collect();
    let lind = lindblad_constant_rate(LindbladKind::Dephasing, 5e-4, 1e-3, &times);
    let trs = [&lind.trajectories[0][..], &lind.trajectories[1][..], &lind.trajectories[2][..], &lind.trajectories[3][..]];
    let map = reconstruct_map(&times, &lind.probes, trs).unwrap();
    let rep = analyze(&map, &preset("paper_onresonant").unwrap().analysis.settings());
    assert!(rep.witness_intervals.is_empty());
    assert!(rep.volume.windows(2).all(|w| w[1] <= w[0]));
}
