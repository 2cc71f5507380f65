//! Dynamical map reconstruction and non-Markovianity diagnostics.
//!
//! Density matrices are represented by their coordinates in the orthonormal
//! Hermitian basis G = {I, σ_x, σ_y, σ_z}/√2, so that the map F(t) acts as a
//! real 4×4 matrix with first row (1, 0, 0, 0).
//!
//! Canonical rates use the same normalised basis: the time-local generator
//! L = Ḟ F⁻¹ is written as L(ρ) = Σ_ij c_ij G_i ρ G_j, and the lower-right
//! 3×3 block of c is the decoherence matrix. Its eigenvalues γ_k satisfy
//! −d/dt ln V = 2 Σ_k γ_k; a pure-dephasing generator γ(σ_z ρ σ_z − ρ) has
//! rates {0, 0, 2γ}.

use nalgebra::{Matrix3, Matrix4, Vector4};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::heom::system::{identity, sigma_x, sigma_y, sigma_z, SysMatrix};
use crate::units;

fn basis() -> [SysMatrix; 4] {
    let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    [identity() * s, sigma_x() * s, sigma_y() * s, sigma_z() * s]
}

/// Coordinates Tr(G_m ρ) of a Hermitian matrix.
pub fn hermitian_coordinates(rho: &SysMatrix) -> Vector4<f64> {
    let b = basis();
    Vector4::from_fn(|m, _| (b[m] * rho).trace().re)
}

pub fn from_coordinates(v: &Vector4<f64>) -> SysMatrix {
    let b = basis();
    (0..4).fold(SysMatrix::zeros(), |acc, m| acc + b[m] * Complex64::new(v[m], 0.0))
}

/// |1⟩⟨1|, |2⟩⟨2|, |+⟩⟨+|, |+i⟩⟨+i|.
pub fn default_probes() -> [SysMatrix; 4] {
    let h = Complex64::new(0.5, 0.0);
    let hi = Complex64::new(0.0, 0.5);
    [
        crate::heom::system::unit(0, 0),
        crate::heom::system::unit(1, 1),
        SysMatrix::new(h, h, h, h),
        SysMatrix::new(h, -hi, hi, h),
    ]
}

#[derive(Debug, Clone)]
pub struct DynamicalMap {
    pub times_fs: Vec<f64>,
    pub f_matrices: Vec<Matrix4<f64>>,
}

impl DynamicalMap {
    pub fn len(&self) -> usize {
        self.times_fs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times_fs.is_empty()
    }

    /// F(t_i) applied to `rho`.
    pub fn apply(&self, i: usize, rho: &SysMatrix) -> SysMatrix {
        from_coordinates(&(self.f_matrices[i] * hermitian_coordinates(rho)))
    }

    pub fn bloch_block(&self, i: usize) -> Matrix3<f64> {
        self.f_matrices[i].fixed_view::<3, 3>(1, 1).into()
    }
}

/// Solves F(t)·P = Q(t), P the probe coordinates and Q(t) the propagated ones.
pub fn reconstruct_map(
    times_fs: &[f64],
    probes: &[SysMatrix; 4],
    trajectories: [&[SysMatrix]; 4],
) -> Result<DynamicalMap> {
    for tr in trajectories {
        if tr.len() != times_fs.len() {
            return Err(Error::InvalidInput(format!(
                "trajectory has {} samples, expected {}",
                tr.len(),
                times_fs.len()
            )));
        }
    }
    let p = Matrix4::from_columns(&probes.map(|r| hermitian_coordinates(&r)));
    let gram = p.transpose() * p;
    let det = gram.determinant();
    if !(det.abs() > 1e-12) {
        return Err(Error::SingularProbeSet { det });
    }
    let p_inv = p.try_inverse().ok_or(Error::SingularProbeSet { det })?;
    let f_matrices = (0..times_fs.len())
        .map(|i| {
            let q = Matrix4::from_columns(&trajectories.map(|tr| hermitian_coordinates(&tr[i])));
            q * p_inv
        })
        .collect();
    Ok(DynamicalMap { times_fs: times_fs.to_vec(), f_matrices })
}

/// V(t) = det of the Bloch block of F(t).
pub fn volume(map: &DynamicalMap) -> Vec<f64> {
    (0..map.len()).map(|i| map.bloch_block(i).determinant()).collect()
}

/// Γ(t) = −2 ln(V(t)/V(0)) / t in a.u., undefined where V ≤ `singular_tol`.
/// Γ(0) is the right-limit slope −2 d ln V/dt from the first interval.
pub fn gamma_total(times_fs: &[f64], volume: &[f64], singular_tol: f64) -> Vec<Option<f64>> {
    let n = volume.len();
    let mut out = vec![None; n];
    if n == 0 || volume[0] <= singular_tol {
        return out;
    }
    let v0 = volume[0];
    for i in 1..n {
        if volume[i] > singular_tol {
            let t = units::fs_to_au(times_fs[i] - times_fs[0]);
            out[i] = Some(-2.0 * (volume[i] / v0).ln() / t);
        }
    }
    if n > 1 {
        out[0] = out[1].map(|_| {
            let h = units::fs_to_au(times_fs[1] - times_fs[0]);
            -2.0 * (volume[1] / v0).ln() / h
        });
    } else {
        out[0] = Some(0.0);
    }
    out
}

/// Three-point derivative stencil at sample `i`: central in the interior,
/// second-order one-sided at the ends.
fn stencil(times: &[f64], i: usize) -> Vec<(usize, f64)> {
    let n = times.len();
    if n < 2 {
        return Vec::new();
    }
    if n == 2 {
        let h = times[1] - times[0];
        return vec![(0, -1.0 / h), (1, 1.0 / h)];
    }
    let c = i.clamp(1, n - 2);
    let idx = [c - 1, c, c + 1];
    let x = times[i];
    // Derivative of the Lagrange basis polynomials at x.
    idx.iter()
        .map(|&j| {
            let others: Vec<usize> = idx.iter().copied().filter(|&m| m != j).collect();
            let denom: f64 = others.iter().map(|&m| times[j] - times[m]).product();
            let numer: f64 = (x - times[others[0]]) + (x - times[others[1]]);
            (j, numer / denom)
        })
        .collect()
}

/// Second-order finite-difference derivative on the sample grid.
pub fn time_derivative(times: &[f64], values: &[f64]) -> Vec<f64> {
    (0..values.len())
        .map(|i| stencil(times, i).iter().map(|&(j, w)| w * values[j]).sum())
        .collect()
}

/// Maximal intervals (t_start, t_end) where dV/dt > `slope_threshold`
/// (per fs), using central differences.
pub fn witness_nonmarkov(times_fs: &[f64], volume: &[f64], slope_threshold: f64) -> Vec<(f64, f64)> {
    let slope = time_derivative(times_fs, volume);
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, &s) in slope.iter().enumerate() {
        match (s > slope_threshold, start) {
            (true, None) => start = Some(i),
            (false, Some(j)) => {
                out.push((times_fs[j], times_fs[i - 1]));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(j) = start {
        out.push((times_fs[j], times_fs[times_fs.len() - 1]));
    }
    out
}

/// ∫ max(0, dV/dt) dt over the sampled window.
pub fn positive_volume_gain(times_fs: &[f64], volume: &[f64]) -> f64 {
    time_derivative(times_fs, volume)
        .windows(2)
        .zip(times_fs.windows(2))
        .map(|(s, t)| 0.5 * (s[0].max(0.0) + s[1].max(0.0)) * (t[1] - t[0]))
        .sum()
}

pub fn purity(rho: &[SysMatrix]) -> Vec<f64> {
    rho.iter().map(crate::heom::system::purity).collect()
}

/// Time-local generator data at one sample.
#[derive(Debug, Clone)]
pub struct GeneratorSample {
    /// L = Ḟ F⁻¹ in a.u.
    pub generator: Matrix4<f64>,
    /// Hamiltonian part of the generator.
    pub hamiltonian: SysMatrix,
    /// Decoherence matrix in the normalised Pauli basis.
    pub decoherence: Matrix3<Complex64>,
    /// Its eigenvalues, ascending (a.u.).
    pub rates: [f64; 3],
}

#[derive(Debug, Clone)]
pub struct CanonicalRates {
    pub samples: Vec<Option<GeneratorSample>>,
    /// First time at which F(t) is treated as singular.
    pub singular_after: Option<f64>,
}

impl CanonicalRates {
    pub fn rates(&self, i: usize) -> Option<[f64; 3]> {
        self.samples[i].as_ref().map(|s| s.rates)
    }
}

/// Index of the first sample where |det F| < `singular_tol`, or where det F
/// changes sign relative to the previous sample.
pub fn first_singular_index(volume: &[f64], singular_tol: f64) -> Option<usize> {
    (0..volume.len()).find(|&i| {
        volume[i].abs() < singular_tol || (i > 0 && volume[i].signum() != volume[i - 1].signum())
    })
}

fn structure_tensor() -> [[[[Complex64; 4]; 4]; 4]; 4] {
    let b = basis();
    let mut t = [[[[Complex64::new(0.0, 0.0); 4]; 4]; 4]; 4];
    for i in 0..4 {
        for m in 0..4 {
            for j in 0..4 {
                for n in 0..4 {
                    t[i][m][j][n] = (b[i] * b[m] * b[j] * b[n]).trace();
                }
            }
        }
    }
    t
}

/// Splits a generator acting on Hermitian coordinates into its Hamiltonian
/// part and decoherence matrix.
pub fn decompose_generator(generator: &Matrix4<f64>) -> (SysMatrix, Matrix3<Complex64>) {
    let t = structure_tensor();
    // c_ij = Σ_mn L_mn Tr(G_i G_m G_j G_n) for the Hermitian basis.
    let mut c = Matrix4::<Complex64>::zeros();
    for i in 0..4 {
        for j in 0..4 {
            let mut acc = Complex64::new(0.0, 0.0);
            for m in 0..4 {
                for n in 0..4 {
                    acc += t[i][m][j][n] * generator[(m, n)];
                }
            }
            c[(i, j)] = acc;
        }
    }
    let a: Matrix3<Complex64> = c.fixed_view::<3, 3>(1, 1).into();
    let decoherence = (a + a.adjoint()) * Complex64::new(0.5, 0.0);

    let b = basis();
    let dim = 2.0;
    let mut k = identity() * (c[(0, 0)] / (2.0 * dim));
    for i in 1..4 {
        k += b[i] * (c[(i, 0)] / dim.sqrt());
    }
    let hamiltonian = (k - k.adjoint()) * Complex64::new(0.0, 0.5);
    (hamiltonian, decoherence)
}

/// Canonical decoherence rates from L(t) = Ḟ F⁻¹, Ḟ by finite differences.
/// Samples at and after the first singular time are undefined.
pub fn canonical_rates(map: &DynamicalMap, singular_tol: f64) -> CanonicalRates {
    let n = map.len();
    let vol = volume(map);
    let cutoff = first_singular_index(&vol, singular_tol).unwrap_or(n);
    let times_au: Vec<f64> = map.times_fs.iter().map(|&t| units::fs_to_au(t)).collect();
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        if i >= cutoff || n < 2 {
            samples.push(None);
            continue;
        }
        let f_dot = stencil(&times_au, i)
            .iter()
            .fold(Matrix4::zeros(), |acc, &(j, w)| acc + map.f_matrices[j] * w);
        let Some(f_inv) = map.f_matrices[i].try_inverse() else {
            samples.push(None);
            continue;
        };
        let generator = f_dot * f_inv;
        let (hamiltonian, decoherence) = decompose_generator(&generator);
        let mut rates: Vec<f64> = decoherence.symmetric_eigenvalues().iter().copied().collect();
        rates.sort_by(f64::total_cmp);
        samples.push(Some(GeneratorSample {
            generator,
            hamiltonian,
            decoherence,
            rates: [rates[0], rates[1], rates[2]],
        }));
    }
    CanonicalRates { samples, singular_after: (cutoff < n).then(|| map.times_fs[cutoff]) }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisSettings {
    /// dV/dt threshold (per fs) for the witness.
    pub witness_threshold: f64,
    /// |det F| below which the map is treated as singular.
    pub singular_tolerance: f64,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        Self { witness_threshold: 1e-7, singular_tolerance: 1e-12 }
    }
}

#[derive(Debug, Clone)]
pub struct NonMarkovReport {
    pub times_fs: Vec<f64>,
    pub volume: Vec<f64>,
    /// dV/dt per fs.
    pub volume_slope: Vec<f64>,
    /// Γ(t) in a.u.
    pub gamma_total: Vec<Option<f64>>,
    /// γ_k(t) in a.u., ascending.
    pub canonical_rates: Vec<Option<[f64; 3]>>,
    pub witness_intervals: Vec<(f64, f64)>,
    pub singular_after: Option<f64>,
}

impl NonMarkovReport {
    pub fn witness_flags(&self, threshold: f64) -> Vec<bool> {
        self.volume_slope.iter().map(|&s| s > threshold).collect()
    }

    /// First sampled time with V(t) below `level`.
    pub fn first_time_below(&self, level: f64) -> Option<f64> {
        self.volume.iter().position(|&v| v < level).map(|i| self.times_fs[i])
    }

    pub fn positive_volume_gain(&self) -> f64 {
        positive_volume_gain(&self.times_fs, &self.volume)
    }
}

pub fn analyze(map: &DynamicalMap, settings: &AnalysisSettings) -> NonMarkovReport {
    let vol = volume(map);
    let rates = canonical_rates(map, settings.singular_tolerance);
    NonMarkovReport {
        times_fs: map.times_fs.clone(),
        volume_slope: time_derivative(&map.times_fs, &vol),
        gamma_total: gamma_total(&map.times_fs, &vol, settings.singular_tolerance),
        canonical_rates: (0..map.len()).map(|i| rates.rates(i)).collect(),
        witness_intervals: witness_nonmarkov(&map.times_fs, &vol, settings.witness_threshold),
        singular_after: rates.singular_after,
        volume: vol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(n: usize, step: f64) -> Vec<f64> {
        (0..n).map(|i| i as f64 * step).collect()
    }

    /// Pure-dephasing semigroup with rate γ (a.u.) plus rotation ω about z.
    fn dephasing_map(times_fs: &[f64], rate: f64, omega: f64) -> DynamicalMap {
        let f_matrices = times_fs
            .iter()
            .map(|&t| {
                let t = units::fs_to_au(t);
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
        DynamicalMap { times_fs: times_fs.to_vec(), f_matrices }
    }

    #[test]
    fn coordinates_round_trip() {
        for p in default_probes() {
            let v = hermitian_coordinates(&p);
            assert!((v[0] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
            let back = from_coordinates(&v);
            assert!(crate::heom::system::max_abs(&(back - p)) < 1e-15);
        }
    }

    #[test]
    fn singular_probe_set_rejected() {
        let mut probes = default_probes();
        probes[3] = probes[2];
        let tr: Vec<SysMatrix> = vec![probes[0]];
        let err = reconstruct_map(&[0.0], &probes, [&tr, &tr, &tr, &tr]).unwrap_err();
        assert!(matches!(err, Error::SingularProbeSet { .. }));
    }

    #[test]
    fn recovers_known_affine_map() {
        // A trace-preserving affine map with translation (amplitude damping-like).
        let f = Matrix4::new(
            1.0, 0.0, 0.0, 0.0, //
            0.05, 0.6, -0.2, 0.1, //
            -0.03, 0.25, 0.5, 0.0, //
            0.3, 0.0, 0.1, 0.4,
        );
        let probes = default_probes();
        let outs: Vec<Vec<SysMatrix>> = probes
            .iter()
            .map(|p| vec![*p, from_coordinates(&(f * hermitian_coordinates(p)))])
            .collect();
        let map = reconstruct_map(&[0.0, 1.0], &probes, [&outs[0], &outs[1], &outs[2], &outs[3]]).unwrap();
        assert!((map.f_matrices[0] - Matrix4::identity()).abs().max() < 1e-14);
        assert!((map.f_matrices[1] - f).abs().max() < 1e-14);
        let v = volume(&map);
        assert!((v[1] - f.determinant()).abs() < 1e-14);
    }

    #[test]
    fn unitary_map_has_unit_volume_and_zero_rates() {
        let t = grid(200, 0.05);
        let map = dephasing_map(&t, 0.0, 4e-3);
        assert!(volume(&map).iter().all(|v| (v - 1.0).abs() < 1e-12));
        let g = gamma_total(&t, &volume(&map), 1e-12);
        assert!(g.iter().all(|x| x.unwrap().abs() < 1e-10));
        let r = canonical_rates(&map, 1e-12);
        for s in r.samples.iter().flatten() {
            // One-sided end stencils leave an O(h²) residue.
            assert!(s.rates.iter().all(|x| x.abs() < 1e-8), "{:?}", s.rates);
        }
        assert!(r.singular_after.is_none());
    }

    #[test]
    fn dephasing_rates_in_normalized_basis() {
        let t = grid(400, 0.05);
        let rate = 2e-3;
        let map = dephasing_map(&t, rate, 0.0);
        let r = canonical_rates(&map, 1e-12);
        for s in r.samples.iter().flatten() {
            assert!(s.rates[0].abs() < 1e-9 && s.rates[1].abs() < 1e-9);
            // Finite-difference error is O((2γh)²).
            assert!((s.rates[2] - 2.0 * rate).abs() < 1e-4 * rate);
        }
        let v = volume(&map);
        let g = gamma_total(&t, &v, 1e-12);
        for x in &g {
            assert!((x.unwrap() - 8.0 * rate).abs() < 1e-9);
        }
    }

    #[test]
    fn generator_hamiltonian_part() {
        // Rotation about z at ω corresponds to H = (ω/2) σ_z.
        let t = grid(50, 0.05);
        let omega = 3e-3;
        let map = dephasing_map(&t, 0.0, omega);
        let r = canonical_rates(&map, 1e-12);
        let h = r.samples[10].as_ref().unwrap().hamiltonian;
        assert!((h[(0, 0)].re - omega / 2.0).abs() < 1e-8, "{h}");
        assert!((h[(1, 1)].re + omega / 2.0).abs() < 1e-8);
    }

    #[test]
    fn witness_on_synthetic_bump() {
        let t = grid(1001, 0.1);
        let (t0, width, height) = (40.0, 5.0, 1e-3);
        let v: Vec<f64> = t
            .iter()
            .map(|&x| {
                let bump = if x > t0 && x < t0 + width {
                    height * (std::f64::consts::PI * (x - t0) / width).sin().powi(2)
                } else {
                    0.0
                };
                (-x / 10_000.0).exp() * 0.5 + bump
            })
            .collect();
        let w = witness_nonmarkov(&t, &v, 1e-7);
        assert_eq!(w.len(), 1, "{w:?}");
        let (a, b) = w[0];
        assert!(a >= t0 - 0.1 && a < t0 + 0.5 && b > t0 + 2.0 && b <= t0 + width / 2.0 + 0.1, "{w:?}");

        let monotone: Vec<f64> = t.iter().map(|&x| (-x / 20.0).exp()).collect();
        assert!(witness_nonmarkov(&t, &monotone, 1e-7).is_empty());
    }

    #[test]
    fn gamma_flags_nonpositive_volume() {
        let t = [0.0, 1.0, 2.0];
        let g = gamma_total(&t, &[1.0, 0.5, -1e-3], 1e-12);
        assert!(g[0].is_some() && g[1].is_some() && g[2].is_none());
    }

    #[test]
    fn sign_change_marks_singular() {
        assert_eq!(first_singular_index(&[1.0, 0.1, 1e-3, -1e-4], 1e-12), Some(3));
        assert_eq!(first_singular_index(&[1.0, 1e-13], 1e-12), Some(1));
        assert_eq!(first_singular_index(&[1.0, 0.5], 1e-12), None);
    }

    proptest! {
        #[test]
        fn decay_law_reproduces_volume(c in 1e-5f64..5e-3, n in 10usize..200) {
            let t = grid(n, 0.25);
            let v: Vec<f64> = t.iter().map(|&x| (-c * units::fs_to_au(x)).exp()).collect();
            let g = gamma_total(&t, &v, 1e-300);
            for (i, &x) in t.iter().enumerate().skip(1) {
                let rebuilt = v[0] * (-0.5 * g[i].unwrap() * units::fs_to_au(x)).exp();
                prop_assert!((rebuilt - v[i]).abs() <= 1e-13 * v[i].max(1e-300) + 1e-300);
                prop_assert!((g[i].unwrap() - 2.0 * c).abs() < 1e-9 * c);
            }
        }

        #[test]
        fn volume_invariant_under_frame_rotation(theta in -3.0f64..3.0, a in 0.1f64..0.9, b in 0.1f64..0.9) {
            let f = Matrix4::new(
                1.0, 0.0, 0.0, 0.0,
                0.0, a, 0.1, 0.0,
                0.0, -0.2, b, 0.05,
                0.2, 0.0, 0.0, a * b,
            );
            // Rotation of the Bloch frame about y.
            let (s, c) = theta.sin_cos();
            let r = Matrix4::new(
                1.0, 0.0, 0.0, 0.0,
                0.0, c, 0.0, s,
                0.0, 0.0, 1.0, 0.0,
                0.0, -s, 0.0, c,
            );
            let rotated = r * f * r.transpose();
            let m1 = DynamicalMap { times_fs: vec![0.0], f_matrices: vec![f] };
            let m2 = DynamicalMap { times_fs: vec![0.0], f_matrices: vec![rotated] };
            prop_assert!((volume(&m1)[0] - volume(&m2)[0]).abs() < 1e-12);
        }
    }
}
