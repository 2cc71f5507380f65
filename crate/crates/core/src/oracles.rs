//! Independent reference solutions used to validate the HEOM engine.

use std::f64::consts::PI;

use nalgebra::Matrix4;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::bath::{BathSpec, CorrelationQuadrature};
use crate::dynmap::{default_probes, DynamicalMap};
use crate::error::{Error, Result};
use crate::heom::system::SysMatrix;
use crate::quadrature::{integrate, QuadratureOptions};
use crate::units;

/// Exact reduced dynamics of an unbiased-coupling pure-dephasing model,
/// H_S = (ω₀ᵈ/2) σ_z with system-bath coupling σ_z.
#[derive(Debug, Clone)]
pub struct DephasingOracleResult {
    pub times_fs: Vec<f64>,
    /// Φ(t) = 4 ∫₀ᵗ (t − τ) Re C(τ) dτ.
    pub decoherence_exponent: Vec<f64>,
    /// ρ₁₂(t) = ρ₁₂(0) e^{−i ω₀ᵈ t} e^{−Φ(t)}.
    pub rho12: Vec<Complex64>,
    /// Populations are conserved exactly.
    pub populations: (f64, f64),
}

impl DephasingOracleResult {
    pub fn coherence_magnitude(&self) -> Vec<f64> {
        self.rho12.iter().map(|z| z.norm()).collect()
    }
}

/// Φ(t) from its spectral form (4/π) ∫₀^∞ J(ω) coth(βω/2) (1 − cos ωt)/ω² dω.
pub fn decoherence_exponent(bath: &BathSpec, t_au: f64) -> Result<f64> {
    if t_au == 0.0 {
        return Ok(0.0);
    }
    let sd = &bath.spectral_density;
    let beta = bath.beta;
    let omega_max = CorrelationQuadrature::new(bath).omega_max();
    let mut breakpoints = Vec::new();
    for c in &sd.components {
        breakpoints.extend([c.omega_c - c.gamma_w, c.omega_c, c.omega_c + c.gamma_w]);
    }
    let min_gamma = sd.components.iter().map(|c| c.gamma_w).fold(omega_max, f64::min);
    let width = (0.5 * min_gamma).min(2.0 * PI / t_au.abs());
    let small_limit = sd.slope_at_zero() * t_au * t_au / beta;
    let integrand = |w: f64| {
        if w < 1e-14 {
            return small_limit;
        }
        let s = (0.5 * w * t_au).sin();
        sd.eval(w) / (0.5 * beta * w).tanh() * 2.0 * s * s / (w * w)
    };
    // Scale of the result fixes the absolute target.
    let opts = QuadratureOptions { abs_tol: 1e-12 * (1.0 + small_limit.abs() * omega_max), ..Default::default() };
    let v = integrate(integrand, 0.0, omega_max, &breakpoints, width, opts)?;
    Ok(4.0 * v / PI)
}

/// Exact pure-dephasing trajectory for the initial state `rho0` (diabatic).
pub fn dephasing_exact(
    bath: &BathSpec,
    omega0_d: f64,
    rho0: &SysMatrix,
    times_fs: &[f64],
) -> Result<DephasingOracleResult> {
    if times_fs.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::InvalidInput("oracle times must be finite and non-negative".into()));
    }
    let exponents: Vec<f64> = times_fs
        .par_iter()
        .map(|&t| decoherence_exponent(bath, units::fs_to_au(t)))
        .collect::<Result<_>>()?;
    let rho12 = times_fs
        .iter()
        .zip(&exponents)
        .map(|(&t, &phi)| {
            let t = units::fs_to_au(t);
            rho0[(0, 1)] * Complex64::new(-phi, -omega0_d * t).exp()
        })
        .collect();
    Ok(DephasingOracleResult {
        times_fs: times_fs.to_vec(),
        decoherence_exponent: exponents,
        rho12,
        populations: (rho0[(0, 0)].re, rho0[(1, 1)].re),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LindbladKind {
    /// L(ρ) = −i[(ω/2)σ_z, ρ] + γ(σ_z ρ σ_z − ρ).
    Dephasing,
}

#[derive(Debug, Clone)]
pub struct LindbladOracle {
    pub probes: [SysMatrix; 4],
    pub trajectories: [Vec<SysMatrix>; 4],
    pub map: DynamicalMap,
}

/// Closed-form evolution of the probe states under a constant-rate
/// Lindblad generator. `rate` and `omega` are in a.u.
pub fn lindblad_constant_rate(kind: LindbladKind, rate: f64, omega: f64, times_fs: &[f64]) -> LindbladOracle {
    let LindbladKind::Dephasing = kind;
    let evolve = |rho: &SysMatrix, t_fs: f64| {
        let t = units::fs_to_au(t_fs);
        let mut out = *rho;
        let factor = Complex64::new(-2.0 * rate * t, -omega * t).exp();
        out[(0, 1)] = rho[(0, 1)] * factor;
        out[(1, 0)] = rho[(1, 0)] * factor.conj();
        out
    };
    let probes = default_probes();
    let trajectories = probes.map(|p| times_fs.iter().map(|&t| evolve(&p, t)).collect::<Vec<_>>());
    let f_matrices = times_fs
        .iter()
        .map(|&t_fs| {
            let t = units::fs_to_au(t_fs);
            let d = (-2.0 * rate * t).exp();
            let (s, c) = (omega * t).sin_cos();
            Matrix4::new(
                1.0, 0.0, 0.0, 0.0, //
                0.0, d * c, -d * s, 0.0, //
                0.0, d * s, d * c, 0.0, //
                0.0, 0.0, 0.0, 1.0,
            )
        })
        .collect();
    LindbladOracle { probes, trajectories, map: DynamicalMap { times_fs: times_fs.to_vec(), f_matrices } }
}
