//! Fixed-step RK4 propagation of the hierarchy.

use std::sync::Arc;

use log::warn;
use rayon::prelude::*;
use serde::Serialize;

use super::hierarchy::Hierarchy;
use super::rhs::HeomGenerator;
use super::system::{hermitian_eigenvalues, max_abs, sigma_z, SysMatrix, SystemSpec};
use crate::bath::CorrelationExpansion;
use crate::error::{Error, Result};
use crate::units;

/// Integrator and output settings. Times are in fs except `dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PropagationSettings {
    /// Truncation level L.
    pub level: usize,
    /// Largest allowed RK4 step (a.u.).
    pub dt: f64,
    pub t_final_fs: f64,
    pub output_step_fs: f64,
    pub ado_budget: usize,
    /// Abort when any ADO entry exceeds this magnitude.
    pub divergence_threshold: f64,
    /// Keep every ADO at each output time.
    pub keep_ados: bool,
}

impl Default for PropagationSettings {
    fn default() -> Self {
        Self {
            level: 4,
            dt: 0.25,
            t_final_fs: 200.0,
            output_step_fs: 0.05,
            ado_budget: 20_000,
            divergence_threshold: 1e3,
            keep_ados: false,
        }
    }
}

impl PropagationSettings {
    pub fn output_count(&self) -> usize {
        (self.t_final_fs / self.output_step_fs).round() as usize
    }

    /// RK4 steps per output interval; the effective step divides the output
    /// interval exactly and never exceeds `dt`.
    pub fn steps_per_output(&self) -> usize {
        let ratio = units::fs_to_au(self.output_step_fs) / self.dt;
        (ratio * (1.0 - 1e-12)).ceil().max(1.0) as usize
    }

    pub fn effective_dt(&self) -> f64 {
        units::fs_to_au(self.output_step_fs) / self.steps_per_output() as f64
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.dt.is_finite() && self.dt > 0.0) {
            problems.push(format!("dt must be > 0, got {}", self.dt));
        }
        if !(self.t_final_fs.is_finite() && self.t_final_fs > 0.0) {
            problems.push(format!("t_final must be > 0, got {}", self.t_final_fs));
        }
        if !(self.output_step_fs.is_finite() && self.output_step_fs > 0.0) {
            problems.push(format!("output step must be > 0, got {}", self.output_step_fs));
        } else if units::fs_to_au(self.output_step_fs) < self.dt * (1.0 - 1e-12) {
            problems.push("output step must be at least dt".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }
}

/// ρ_S(t) in the propagation (diabatic) frame at every output time.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times_fs: Vec<f64>,
    /// Hermitian-symmetrized system density matrices.
    pub rho: Vec<SysMatrix>,
    /// ‖ρ − ρ†‖_max before symmetrization.
    pub hermiticity_error: Vec<f64>,
    /// Smallest eigenvalue of ρ_S at each output time.
    pub min_eigenvalue: Vec<f64>,
    /// Every ADO at each output time, when requested.
    pub ados: Option<Vec<Vec<SysMatrix>>>,
    pub ado_count: usize,
    pub effective_dt: f64,
    pub warnings: Vec<String>,
}

fn symmetrize(m: &SysMatrix) -> SysMatrix {
    (m + m.adjoint()) * num_complex::Complex64::new(0.5, 0.0)
}

fn axpy(out: &mut [SysMatrix], base: &[SysMatrix], scale: f64, dir: &[SysMatrix]) {
    out.par_iter_mut()
        .with_min_len(256)
        .zip(base.par_iter().zip(dir.par_iter()))
        .for_each(|(o, (b, d))| *o = b + d * num_complex::Complex64::new(scale, 0.0));
}

/// Classical RK4 integrator owning its stage buffers.
pub struct Rk4 {
    generator: HeomGenerator,
    k1: Vec<SysMatrix>,
    k2: Vec<SysMatrix>,
    k3: Vec<SysMatrix>,
    k4: Vec<SysMatrix>,
    scratch: Vec<SysMatrix>,
    hermitian: bool,
}

impl Rk4 {
    pub fn new(generator: HeomGenerator) -> Self {
        let n = generator.len();
        let z = vec![SysMatrix::zeros(); n];
        Self { generator, k1: z.clone(), k2: z.clone(), k3: z.clone(), k4: z.clone(), scratch: z, hermitian: false }
    }

    /// Evaluate mirror pairs once; only valid for states with Hermitian ρ_S.
    pub fn with_hermitian_symmetry(mut self, on: bool) -> Self {
        self.hermitian = on;
        self
    }

    pub fn step(&mut self, state: &mut [SysMatrix], h: f64) {
        let Self { generator, k1, k2, k3, k4, scratch, hermitian } = self;
        let eval = |input: &[SysMatrix], out: &mut [SysMatrix]| {
            if *hermitian {
                generator.apply_hermitian(input, out);
            } else {
                generator.apply(input, out);
            }
        };
        eval(state, k1);
        axpy(scratch, state, 0.5 * h, k1);
        eval(scratch, k2);
        axpy(scratch, state, 0.5 * h, k2);
        eval(scratch, k3);
        axpy(scratch, state, h, k3);
        eval(scratch, k4);
        let w = num_complex::Complex64::new(h / 6.0, 0.0);
        let two = num_complex::Complex64::new(2.0, 0.0);
        state
            .par_iter_mut()
            .with_min_len(256)
            .zip(k1.par_iter().zip(k2.par_iter()))
            .zip(k3.par_iter().zip(k4.par_iter()))
            .for_each(|((y, (a, b)), (c, d))| *y += (a + (b + c) * two + d) * w);
    }
}

/// Propagates a factorized initial state ρ(0) = ρ_S(0) ⊗ ρ_eq.
///
/// `initial` is given in the diabatic frame, where the coupling operator is
/// σ_z. The output is recorded every `output_step_fs` and symmetrized; the
/// integration itself never symmetrizes.
pub fn propagate(
    initial: &SysMatrix,
    sys: &SystemSpec,
    expansion: &CorrelationExpansion,
    settings: &PropagationSettings,
) -> Result<Trajectory> {
    settings.validate()?;
    let hierarchy = Arc::new(Hierarchy::build(expansion.len().max(1), settings.level, settings.ado_budget)?);
    let expansion = if expansion.is_empty() {
        // Keep one inert mode so the hierarchy is well formed.
        CorrelationExpansion {
            modes: vec![crate::bath::CorrelationMode {
                alpha: Default::default(),
                alpha_tilde: Default::default(),
                zeta: num_complex::Complex64::new(0.0, 1.0),
            }],
        }
    } else {
        expansion.clone()
    };
    let generator = HeomGenerator::for_system(hierarchy.clone(), sys, sigma_z(), &expansion)?;
    propagate_with(generator, initial, settings)
}

pub fn propagate_with(
    generator: HeomGenerator,
    initial: &SysMatrix,
    settings: &PropagationSettings,
) -> Result<Trajectory> {
    settings.validate()?;
    let count = generator.len();
    let mut state = vec![SysMatrix::zeros(); count];
    state[0] = *initial;

    let n_out = settings.output_count();
    let substeps = settings.steps_per_output();
    let h = settings.effective_dt();
    let hermitian = max_abs(&(initial - initial.adjoint())) == 0.0;
    let mut rk = Rk4::new(generator).with_hermitian_symmetry(hermitian);

    let mut traj = Trajectory {
        times_fs: Vec::with_capacity(n_out + 1),
        rho: Vec::with_capacity(n_out + 1),
        hermiticity_error: Vec::with_capacity(n_out + 1),
        min_eigenvalue: Vec::with_capacity(n_out + 1),
        ados: settings.keep_ados.then(Vec::new),
        ado_count: count,
        effective_dt: h,
        warnings: Vec::new(),
    };

    let record = |traj: &mut Trajectory, i: usize, state: &[SysMatrix]| -> Result<()> {
        let t_fs = i as f64 * settings.output_step_fs;
        let norm = state.iter().map(max_abs).fold(0.0, f64::max);
        if !norm.is_finite() || norm > settings.divergence_threshold {
            return Err(Error::Diverged { t_fs, norm });
        }
        let rho = state[0];
        let sym = symmetrize(&rho);
        let min_eig = hermitian_eigenvalues(&sym)[0];
        if min_eig < -1e-8 && traj.warnings.is_empty() {
            let msg = format!("NotPositive: rho_S eigenvalue {min_eig:.3e} at t = {t_fs:.3} fs");
            warn!("{msg}");
            traj.warnings.push(msg);
        }
        traj.times_fs.push(t_fs);
        traj.hermiticity_error.push(max_abs(&(rho - rho.adjoint())));
        traj.min_eigenvalue.push(min_eig);
        traj.rho.push(sym);
        if let Some(all) = traj.ados.as_mut() {
            all.push(state.to_vec());
        }
        Ok(())
    };

    record(&mut traj, 0, &state)?;
    for i in 1..=n_out {
        for _ in 0..substeps {
            rk.step(&mut state, h);
        }
        record(&mut traj, i, &state)?;
    }
    Ok(traj)
}
