//! Bosonic bath: Lorentzian spectral density and its correlation function.
//!
//! The spectral density is a sum of antisymmetrised Lorentzians
//!
//! ```text
//! J(ω) = Σ_l ω Δ_l / ([(ω − ω_l)² + Ω_l²] [(ω + ω_l)² + Ω_l²])
//! ```
//!
//! and the correlation function of the collective bath coordinate is
//!
//! ```text
//! C(t) = (1/π) ∫ e^{−iωt} J(ω) / (1 − e^{−βω}) dω .
//! ```
//!
//! For t ≥ 0 the contour is closed in the lower half-plane. Each Lorentzian
//! contributes its two poles at ±ω_l − iΩ_l, and the Bose function adds the
//! Matsubara poles at −iν_n, ν_n = 2πn/β (n ≥ 1; the n = 0 pole is cancelled
//! by J(0) = 0). Every retained term is a decaying exponential α_k e^{iζ_k t}
//! with Im ζ_k > 0. The same exponents represent C*(t) with coefficients
//! α̃_k = conj(α_{k'}), where k' is the mode with ζ_{k'} = −conj(ζ_k).
//!
//! The Matsubara series is summed plainly (no acceleration); the residual
//! decays roughly like N⁻².

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate, integrate_half_line, QuadratureOptions};
use crate::units;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Below this |ω| the Bose factor is replaced by its analytic limit.
const OMEGA_ZERO: f64 = 1e-12;

/// One antisymmetrised Lorentzian term (all in a.u.).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LorentzianComponent {
    /// Coupling amplitude Δ_l.
    pub delta: f64,
    /// Center frequency ω_l.
    pub omega_c: f64,
    /// Width Ω_l.
    pub gamma_w: f64,
}

impl LorentzianComponent {
    pub fn new(delta: f64, omega_c: f64, gamma_w: f64) -> Result<Self> {
        let c = Self { delta, omega_c, gamma_w };
        c.validate()?;
        Ok(c)
    }

    /// Zero amplitude is accepted: it switches the system-bath coupling off.
    pub fn validate(&self) -> Result<()> {
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return Err(Error::InvalidBath(format!("delta must be >= 0, got {}", self.delta)));
        }
        if !(self.omega_c.is_finite() && self.omega_c > 0.0) {
            return Err(Error::InvalidBath(format!("omega_c must be > 0, got {}", self.omega_c)));
        }
        if !(self.gamma_w.is_finite() && self.gamma_w > 0.0) {
            return Err(Error::InvalidBath(format!(
                "gamma_w must be > 0 (pole on the real axis), got {}",
                self.gamma_w
            )));
        }
        Ok(())
    }

    fn eval_complex(&self, w: Complex64) -> Complex64 {
        let o2 = self.gamma_w * self.gamma_w;
        let a = (w - self.omega_c).powi(2) + o2;
        let b = (w + self.omega_c).powi(2) + o2;
        w * self.delta / (a * b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralDensity {
    pub components: Vec<LorentzianComponent>,
}

impl SpectralDensity {
    pub fn new(components: Vec<LorentzianComponent>) -> Result<Self> {
        for c in &components {
            c.validate()?;
        }
        Ok(Self { components })
    }

    /// The two-Lorentzian density used for the on/off-resonance study.
    pub fn table1() -> Self {
        Self {
            components: vec![
                LorentzianComponent { delta: 1.0e-11, omega_c: 8.0e-4, gamma_w: 1.4e-3 },
                LorentzianComponent { delta: 3.0e-12, omega_c: 6.0e-3, gamma_w: 4.0e-4 },
            ],
        }
    }

    /// Same centers and widths with every amplitude multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            components: self
                .components
                .iter()
                .map(|c| LorentzianComponent { delta: c.delta * factor, ..*c })
                .collect(),
        }
    }

    pub fn eval(&self, omega: f64) -> f64 {
        let mut sum = 0.0;
        for c in &self.components {
            let o2 = c.gamma_w * c.gamma_w;
            let a = (omega - c.omega_c).powi(2) + o2;
            let b = (omega + c.omega_c).powi(2) + o2;
            sum += omega * c.delta / (a * b);
        }
        sum
    }

    pub fn eval_complex(&self, omega: Complex64) -> Complex64 {
        self.components.iter().map(|c| c.eval_complex(omega)).sum()
    }

    /// J'(0) = Σ Δ_l / (ω_l² + Ω_l²)².
    pub fn slope_at_zero(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.delta / (c.omega_c.powi(2) + c.gamma_w.powi(2)).powi(2))
            .sum()
    }

    fn total_delta(&self) -> f64 {
        self.components.iter().map(|c| c.delta).sum()
    }

    /// Rough magnitude of the correlation function, used to scale tolerances.
    fn magnitude_scale(&self, beta: f64) -> f64 {
        let lambda: f64 = self
            .components
            .iter()
            .map(|c| c.delta / (4.0 * c.gamma_w * (c.omega_c.powi(2) + c.gamma_w.powi(2))))
            .sum();
        let max_freq = self.components.iter().map(|c| c.omega_c).fold(1.0 / beta, f64::max);
        lambda * max_freq
    }
}

pub fn eval_spectral_density(sd: &SpectralDensity, omega: f64) -> f64 {
    sd.eval(omega)
}

/// Bath parameters; `beta` always follows from `temperature`.
#[derive(Debug, Clone, PartialEq)]
pub struct BathSpec {
    pub spectral_density: SpectralDensity,
    /// Kelvin.
    pub temperature: f64,
    /// Inverse hartree.
    pub beta: f64,
    pub n_matsubara: usize,
}

impl BathSpec {
    pub fn new(spectral_density: SpectralDensity, temperature: f64, n_matsubara: usize) -> Result<Self> {
        if !(temperature.is_finite() && temperature > 0.0) {
            return Err(Error::InvalidBath(format!(
                "temperature must be > 0 K, got {temperature}"
            )));
        }
        for c in &spectral_density.components {
            c.validate()?;
        }
        Ok(Self {
            spectral_density,
            temperature,
            beta: units::beta_from_kelvin(temperature),
            n_matsubara,
        })
    }

    pub fn with_matsubara(&self, n_matsubara: usize) -> Self {
        Self { n_matsubara, ..self.clone() }
    }

    /// ν_n = 2πn/β.
    pub fn matsubara_frequency(&self, n: usize) -> f64 {
        2.0 * PI * n as f64 / self.beta
    }

    fn bose(&self, w: Complex64) -> Complex64 {
        Complex64::new(1.0, 0.0) / (Complex64::new(1.0, 0.0) - (-self.beta * w).exp())
    }

    /// J(ω) / (1 − e^{−βω}) with the removable point at ω = 0 filled in.
    pub fn thermal_weight(&self, omega: f64) -> f64 {
        if omega.abs() < OMEGA_ZERO {
            self.spectral_density.slope_at_zero() / self.beta
        } else {
            self.spectral_density.eval(omega) / (-(-self.beta * omega).exp_m1())
        }
    }
}

/// Frequency grid used by the correlation-function quadrature.
///
/// The integration window is [−ω_max, ω_max] with
/// ω_max ≥ max_l(ω_l + 20 Ω_l), extended until the analytic bound on the
/// neglected high-frequency tail, ΣΔ_l / (2π ω_max²), falls below 1e-6 of
/// the bath's correlation scale. Panels start at 0, ±ω_l, ±ω_l ± Ω_l and are
/// no wider than min(Ω_l)/2 or one oscillation period 2π/|t|.
#[derive(Debug, Clone)]
pub struct CorrelationQuadrature {
    omega_max: f64,
    breakpoints: Vec<f64>,
    base_width: f64,
    opts: QuadratureOptions,
}

impl CorrelationQuadrature {
    pub fn new(bath: &BathSpec) -> Self {
        let sd = &bath.spectral_density;
        let scale = sd.magnitude_scale(bath.beta).max(f64::MIN_POSITIVE);
        let mut omega_max = sd
            .components
            .iter()
            .map(|c| c.omega_c + 20.0 * c.gamma_w)
            .fold(40.0 / bath.beta, f64::max);
        let tail = (sd.total_delta() / (2.0 * PI * 1e-6 * scale)).sqrt();
        if tail.is_finite() {
            omega_max = omega_max.max(tail);
        }
        let mut breakpoints = vec![0.0];
        for c in &sd.components {
            for x in [c.omega_c - c.gamma_w, c.omega_c, c.omega_c + c.gamma_w] {
                breakpoints.push(x);
                breakpoints.push(-x);
            }
        }
        let base_width = sd.components.iter().map(|c| 0.5 * c.gamma_w).fold(omega_max, f64::min);
        let opts = QuadratureOptions { abs_tol: 1e-9 * scale * PI, ..Default::default() };
        Self { omega_max, breakpoints, base_width, opts }
    }

    pub fn omega_max(&self) -> f64 {
        self.omega_max
    }

    pub fn eval(&self, bath: &BathSpec, t: f64) -> Result<Complex64> {
        if !t.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite time {t}")));
        }
        let width = if t == 0.0 { self.base_width } else { self.base_width.min(2.0 * PI / t.abs()) };
        let integral = integrate(
            |w: f64| Complex64::new(0.0, -w * t).exp() * bath.thermal_weight(w),
            -self.omega_max,
            self.omega_max,
            &self.breakpoints,
            width,
            self.opts,
        )?;
        Ok(integral / PI)
    }

    pub fn eval_many(&self, bath: &BathSpec, times: &[f64]) -> Result<Vec<Complex64>> {
        times.par_iter().map(|&t| self.eval(bath, t)).collect()
    }
}

/// C(t) by direct quadrature of the fluctuation-dissipation integral.
pub fn correlation_quadrature(bath: &BathSpec, t: f64) -> Result<Complex64> {
    CorrelationQuadrature::new(bath).eval(bath, t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationMode {
    pub alpha: Complex64,
    pub alpha_tilde: Complex64,
    pub zeta: Complex64,
}

/// C(t) = Σ α_k e^{iζ_k t}, C*(t) = Σ α̃_k e^{iζ_k t} for t ≥ 0.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationExpansion {
    pub modes: Vec<CorrelationMode>,
}

impl CorrelationExpansion {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        self.modes.iter().map(|m| m.alpha * (I * m.zeta * t).exp()).sum()
    }

    pub fn eval_conj(&self, t: f64) -> Complex64 {
        self.modes.iter().map(|m| m.alpha_tilde * (I * m.zeta * t).exp()).sum()
    }
}

/// Exponential decomposition of C(t): two modes per Lorentzian followed by
/// `bath.n_matsubara` Matsubara modes.
pub fn expand_correlation(bath: &BathSpec) -> Result<CorrelationExpansion> {
    let sd = &bath.spectral_density;
    let mut alphas = Vec::with_capacity(2 * sd.components.len() + bath.n_matsubara);
    let mut zetas = Vec::with_capacity(alphas.capacity());
    // Lorentzian poles come in pairs (ζ, −conj ζ); Matsubara poles pair with themselves.
    let mut partner = Vec::with_capacity(alphas.capacity());

    for c in &sd.components {
        c.validate()?;
        let o2 = c.gamma_w * c.gamma_w;
        let vanishing = Complex64::new(0.0, -2.0 * c.gamma_w);
        // Lower half-plane poles ±ω_l − iΩ_l; `shift` selects the other factor.
        for (p, shift) in [
            (Complex64::new(c.omega_c, -c.gamma_w), c.omega_c),
            (Complex64::new(-c.omega_c, -c.gamma_w), -c.omega_c),
        ] {
            let residue = p * c.delta / (vanishing * ((p + shift).powi(2) + o2));
            // Clockwise contour: ∫ = −2πi Σ Res, then the 1/π prefactor.
            alphas.push(-2.0 * I * residue * bath.bose(p));
            zetas.push(-p);
        }
        let base = partner.len();
        partner.push(base + 1);
        partner.push(base);
    }
    for n in 1..=bath.n_matsubara {
        let nu = bath.matsubara_frequency(n);
        let j = sd.eval_complex(Complex64::new(0.0, -nu));
        // The Bose factor has residue 1/β at every Matsubara pole.
        alphas.push(-2.0 * I * j / bath.beta);
        zetas.push(Complex64::new(0.0, nu));
        partner.push(partner.len());
    }

    let modes = (0..alphas.len())
        .map(|k| CorrelationMode {
            alpha: alphas[k],
            alpha_tilde: alphas[partner[k]].conj(),
            zeta: zetas[k],
        })
        .collect();
    Ok(CorrelationExpansion { modes })
}

/// λ = (1/π) ∫₀^∞ J(ω)/ω dω.
///
/// With σ_z coupling the counter term is proportional to the identity, so λ
/// is reported for diagnostics only and never enters the propagation.
/// For the two-Lorentzian table density, λ ≈ 7.39e-4 a.u.
pub fn renormalization_energy(sd: &SpectralDensity) -> Result<f64> {
    let integrand = |w: f64| {
        sd.components
            .iter()
            .map(|c| {
                let o2 = c.gamma_w * c.gamma_w;
                c.delta / (((w - c.omega_c).powi(2) + o2) * ((w + c.omega_c).powi(2) + o2))
            })
            .sum::<f64>()
    };
    let value = integrate_half_line(integrand, QuadratureOptions { abs_tol: 1e-14, ..Default::default() })?;
    Ok(value / PI)
}

/// Time grid on which expansion and quadrature are compared: [0, 200 fs]
/// every 0.5 fs, in a.u.
pub fn validation_grid() -> Vec<f64> {
    (0..=400).map(|i| units::fs_to_au(0.5 * i as f64)).collect()
}

/// max_t |C_modes(t) − C_ref(t)| / max_t |C_ref(t)|.
pub fn relative_sup_error(expansion: &CorrelationExpansion, times: &[f64], reference: &[Complex64]) -> f64 {
    let scale = reference.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let worst = times
        .iter()
        .zip(reference)
        .map(|(&t, c)| (expansion.eval(t) - c).norm())
        .fold(0.0, f64::max);
    if scale == 0.0 {
        worst
    } else {
        worst / scale
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatsubaraSelection {
    pub n_matsubara: usize,
    pub rel_error: f64,
    /// (N, relative sup error) for every N tried.
    pub history: Vec<(usize, f64)>,
}

/// Smallest N ≤ `max_n` whose expansion matches the quadrature reference
/// within `target`; falls back to `max_n` if none does.
pub fn auto_matsubara(
    bath: &BathSpec,
    times: &[f64],
    reference: &[Complex64],
    target: f64,
    max_n: usize,
) -> Result<MatsubaraSelection> {
    let mut history = Vec::new();
    for n in 0..=max_n {
        let expansion = expand_correlation(&bath.with_matsubara(n))?;
        let err = relative_sup_error(&expansion, times, reference);
        history.push((n, err));
        if err < target || n == max_n {
            return Ok(MatsubaraSelection { n_matsubara: n, rel_error: err, history });
        }
    }
    unreachable!("loop always returns at n == max_n")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table1_bath(n: usize) -> BathSpec {
        BathSpec::new(SpectralDensity::table1(), 300.0, n).unwrap()
    }

    #[test]
    fn spectral_density_zero_and_reference_value() {
        let sd = SpectralDensity::table1();
        assert_eq!(sd.eval(0.0), 0.0);
        // Independent evaluation of the two-term sum at ω = 8e-4.
        let expected = 9.049176964041645e-4;
        assert!((sd.eval(8.0e-4) - expected).abs() < 1e-15);
        assert!((sd.eval(8.0e-4) - 9.03e-4).abs() / 9.03e-4 < 5e-3);
    }

    #[test]
    fn complex_evaluation_matches_real_axis() {
        let sd = SpectralDensity::table1();
        for w in [-3e-3, 1e-4, 5.5e-3, 2e-2] {
            let z = sd.eval_complex(Complex64::new(w, 0.0));
            assert!((z.re - sd.eval(w)).abs() < 1e-18 && z.im == 0.0);
        }
    }

    #[test]
    fn rejects_bad_components_and_temperature() {
        assert!(matches!(LorentzianComponent::new(1e-11, 8e-4, 0.0), Err(Error::InvalidBath(_))));
        assert!(matches!(LorentzianComponent::new(1e-11, 8e-4, -1e-3), Err(Error::InvalidBath(_))));
        assert!(matches!(LorentzianComponent::new(-1.0, 8e-4, 1e-3), Err(Error::InvalidBath(_))));
        assert!(BathSpec::new(SpectralDensity::table1(), 0.0, 3).is_err());
        assert!(BathSpec::new(SpectralDensity::table1(), -5.0, 3).is_err());
    }

    #[test]
    fn expand_rejects_pole_on_real_axis() {
        let bath = BathSpec {
            spectral_density: SpectralDensity {
                components: vec![LorentzianComponent { delta: 1e-11, omega_c: 8e-4, gamma_w: 0.0 }],
            },
            temperature: 300.0,
            beta: units::beta_from_kelvin(300.0),
            n_matsubara: 2,
        };
        assert!(matches!(expand_correlation(&bath), Err(Error::InvalidBath(_))));
    }

    #[test]
    fn mode_count_and_decay() {
        for n in [0, 1, 5, 12] {
            let exp = expand_correlation(&table1_bath(n)).unwrap();
            assert_eq!(exp.len(), 4 + n);
            assert!(exp.modes.iter().all(|m| m.zeta.im > 0.0));
        }
    }

    #[test]
    fn first_matsubara_frequency() {
        let bath = table1_bath(1);
        assert!((bath.beta - 1052.58).abs() < 0.01);
        assert!((bath.matsubara_frequency(1) - 5.969299e-3).abs() < 1e-8);
    }

    #[test]
    fn conj_coefficients_reproduce_conjugate() {
        let exp = expand_correlation(&table1_bath(6)).unwrap();
        for t in [0.0, 100.0, 1234.5, 8000.0] {
            let c = exp.eval(t);
            let cc = exp.eval_conj(t);
            assert!((c.conj() - cc).norm() < 1e-20, "t={t}");
        }
        let c0 = exp.eval(0.0);
        assert!(c0.re > 0.0 && c0.im.abs() < 1e-12 * c0.re);
    }

    #[test]
    fn quadrature_at_zero_is_real_positive() {
        let bath = table1_bath(0);
        let c0 = correlation_quadrature(&bath, 0.0).unwrap();
        assert!(c0.re > 0.0);
        assert!(c0.im.abs() < 1e-9 * c0.re);
        // Frozen from an independent scipy.quad evaluation over the whole real line.
        let reference = 1.8383274883119167e-6;
        assert!((c0.re - reference).abs() / reference < 1e-5, "{c0}");
    }

    #[test]
    fn expansion_matches_quadrature_pointwise() {
        let bath = table1_bath(20);
        let exp = expand_correlation(&bath).unwrap();
        let quad = CorrelationQuadrature::new(&bath);
        let scale = quad.eval(&bath, 0.0).unwrap().norm();
        for t_fs in [0.0, 7.5, 22.0, 61.0, 150.0] {
            let t = units::fs_to_au(t_fs);
            let q = quad.eval(&bath, t).unwrap();
            assert!((exp.eval(t) - q).norm() / scale < 5e-4, "t = {t_fs} fs");
        }
    }

    #[test]
    fn renormalization_energy_values() {
        let sd = SpectralDensity::table1();
        let lambda = renormalization_energy(&sd).unwrap();
        // Closed form per Lorentzian: Δ / (4 Ω (ω_l² + Ω²)).
        let analytic: f64 = sd
            .components
            .iter()
            .map(|c| c.delta / (4.0 * c.gamma_w * (c.omega_c.powi(2) + c.gamma_w.powi(2))))
            .sum();
        assert!((lambda - analytic).abs() < 1e-10 * analytic, "{lambda} vs {analytic}");
        assert!((lambda - 7.386e-4).abs() < 1e-6);
        let doubled = renormalization_energy(&sd.scaled(2.0)).unwrap();
        assert!((doubled - 2.0 * lambda).abs() < 1e-12 * lambda);
        assert_eq!(renormalization_energy(&sd.scaled(0.0)).unwrap(), 0.0);
    }

    #[test]
    fn thermal_weight_continuous_at_zero() {
        let bath = table1_bath(0);
        let limit = bath.thermal_weight(0.0);
        let near = bath.thermal_weight(1e-9);
        assert!((limit - near).abs() < 1e-6 * limit);
    }
}
