use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

/// Operators on the central system's Hilbert space.
pub type SysMatrix = Matrix2<Complex64>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity() -> SysMatrix {
    SysMatrix::identity()
}

pub fn sigma_x() -> SysMatrix {
    SysMatrix::new(c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0))
}

pub fn sigma_y() -> SysMatrix {
    SysMatrix::new(c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0))
}

pub fn sigma_z() -> SysMatrix {
    SysMatrix::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0))
}

/// |i⟩⟨j| in the two-level basis.
pub fn unit(i: usize, j: usize) -> SysMatrix {
    let mut m = SysMatrix::zeros();
    m[(i, j)] = c(1.0, 0.0);
    m
}

/// Two-level system H_S = (ω₀ᵈ/2) σ_z + W σ_x in the diabatic basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SystemSpec {
    /// Diabatic gap ω₀ᵈ (a.u.).
    pub omega0_d: f64,
    /// Diabatic interstate coupling W (a.u.).
    pub w_coupling: f64,
    /// Adiabatic transition frequency ω₀ = 2 √(ω₀ᵈ²/4 + W²).
    pub omega0: f64,
}

impl SystemSpec {
    pub fn from_diabatic(omega0_d: f64, w_coupling: f64) -> Result<Self> {
        if !(omega0_d.is_finite() && w_coupling.is_finite()) {
            return Err(Error::InvalidInput("system parameters must be finite".into()));
        }
        let omega0 = 2.0 * (omega0_d * omega0_d / 4.0 + w_coupling * w_coupling).sqrt();
        Ok(Self { omega0_d, w_coupling, omega0 })
    }

    /// ω₀ᵈ = 0 and W = ω₀/2: the adiabatic states are the symmetric and
    /// antisymmetric diabatic combinations.
    pub fn from_omega0(omega0: f64) -> Result<Self> {
        if !(omega0.is_finite() && omega0 > 0.0) {
            return Err(Error::InvalidInput(format!("omega0 must be > 0, got {omega0}")));
        }
        Ok(Self { omega0_d: 0.0, w_coupling: 0.5 * omega0, omega0 })
    }

    pub fn hamiltonian(&self) -> SysMatrix {
        sigma_z() * c(0.5 * self.omega0_d, 0.0) + sigma_x() * c(self.w_coupling, 0.0)
    }

    /// Columns are the adiabatic states in the diabatic basis.
    ///
    /// The rotation angle is θ = ½ arctan(2W/ω₀ᵈ) (π/4 for ω₀ᵈ = 0, 0 for
    /// W = 0), so adiabatic state 1 is the one continuously connected to
    /// diabatic |1⟩. Each column's first nonzero component is real positive.
    pub fn adiabatic_basis(&self) -> SysMatrix {
        let theta = if self.w_coupling == 0.0 {
            0.0
        } else if self.omega0_d == 0.0 {
            std::f64::consts::FRAC_PI_4
        } else {
            0.5 * (2.0 * self.w_coupling / self.omega0_d).atan()
        };
        let (s, co) = theta.sin_cos();
        let mut first = [co, s];
        let mut second = [-s, co];
        for v in [&mut first, &mut second] {
            let lead = if v[0] != 0.0 { v[0] } else { v[1] };
            if lead < 0.0 {
                v[0] = -v[0];
                v[1] = -v[1];
            }
        }
        SysMatrix::new(c(first[0], 0.0), c(second[0], 0.0), c(first[1], 0.0), c(second[1], 0.0))
    }
}

/// U† ρ U with U the adiabatic basis of `sys`.
pub fn to_adiabatic(rho: &SysMatrix, sys: &SystemSpec) -> SysMatrix {
    let u = sys.adiabatic_basis();
    u.adjoint() * rho * u
}

/// Inverse of [`to_adiabatic`].
pub fn from_adiabatic(rho: &SysMatrix, sys: &SystemSpec) -> SysMatrix {
    let u = sys.adiabatic_basis();
    u * rho * u.adjoint()
}

pub fn purity(rho: &SysMatrix) -> f64 {
    (rho * rho).trace().re
}

/// Eigenvalues of the Hermitian part of a 2×2 matrix, ascending.
pub fn hermitian_eigenvalues(rho: &SysMatrix) -> [f64; 2] {
    let a = rho[(0, 0)].re;
    let d = rho[(1, 1)].re;
    let b = 0.5 * (rho[(0, 1)] + rho[(1, 0)].conj());
    let mean = 0.5 * (a + d);
    let radius = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
    [mean - radius, mean + radius]
}

pub fn max_abs(m: &SysMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
