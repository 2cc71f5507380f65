//! Right-hand side of the hierarchical equations of motion:
//!
//! ```text
//! ρ̇_n = −i[H_S, ρ_n] + i Σ_k n_k ζ_k ρ_n − i[S, Σ_k ρ_{n_k⁺}]
//!        − i Σ_k n_k (α_k S ρ_{n_k⁻} − α̃_k ρ_{n_k⁻} S)
//! ```

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use super::hierarchy::Hierarchy;
use super::system::{SysMatrix, SystemSpec};
use crate::bath::CorrelationExpansion;
use crate::error::{Error, Result};

const MINUS_I: Complex64 = Complex64 { re: 0.0, im: -1.0 };

/// ADOs below this count are handled by a single task.
const MIN_CHUNK: usize = 64;

#[derive(Debug, Clone, Copy)]
struct DownLink {
    offset: usize,
    /// n_k α_k
    left: Complex64,
    /// n_k α̃_k
    right: Complex64,
}

/// The HEOM generator with all per-ADO coefficients precomputed.
///
/// Each ADO's derivative depends only on the input slice and its fixed link
/// lists, and is summed in a fixed order, so results do not depend on how
/// the sweep is split across worker threads.
#[derive(Debug, Clone)]
pub struct HeomGenerator {
    hierarchy: Arc<Hierarchy>,
    hamiltonian: SysMatrix,
    coupling: SysMatrix,
    /// i Σ_k n_k ζ_k per ADO.
    damping: Vec<Complex64>,
    up_start: Vec<usize>,
    up: Vec<usize>,
    down_start: Vec<usize>,
    down: Vec<DownLink>,
    /// Offset of the ADO n̄ with ρ_n̄ = ρ_n† for Hermitian ρ_S, where n̄
    /// swaps the occupations of conjugate-partner modes.
    mirror: Option<Vec<usize>>,
}

/// k ↦ k' with ζ_k' = −ζ_k* and α̃_k = α_k'*, if every mode has a partner.
fn conjugate_partners(expansion: &CorrelationExpansion) -> Option<Vec<usize>> {
    let modes = &expansion.modes;
    let close = |a: Complex64, b: Complex64| (a - b).norm() <= 1e-14 * a.norm().max(b.norm());
    let partners: Vec<usize> = modes
        .iter()
        .map(|m| {
            modes.iter().position(|p| close(p.zeta, -m.zeta.conj()) && close(m.alpha_tilde, p.alpha.conj()))
        })
        .collect::<Option<_>>()?;
    let involution = partners.iter().enumerate().all(|(k, &p)| partners[p] == k);
    involution.then_some(partners)
}

impl HeomGenerator {
    pub fn new(
        hierarchy: Arc<Hierarchy>,
        hamiltonian: SysMatrix,
        coupling: SysMatrix,
        expansion: &CorrelationExpansion,
    ) -> Result<Self> {
        if expansion.len() != hierarchy.modes() {
            return Err(Error::DimensionMismatch {
                expansion: expansion.len(),
                hierarchy: hierarchy.modes(),
            });
        }
        let i = Complex64::new(0.0, 1.0);
        let count = hierarchy.len();
        let mut damping = Vec::with_capacity(count);
        let mut up_start = Vec::with_capacity(count + 1);
        let mut up = Vec::new();
        let mut down_start = Vec::with_capacity(count + 1);
        let mut down = Vec::new();
        for (offset, idx) in hierarchy.indices().iter().enumerate() {
            let mut rate = Complex64::new(0.0, 0.0);
            for (k, &n) in idx.n.iter().enumerate() {
                rate += expansion.modes[k].zeta * n as f64;
            }
            damping.push(i * rate);

            up_start.push(up.len());
            up.extend(hierarchy.plus_links(offset).iter().map(|l| l.offset));

            down_start.push(down.len());
            for link in hierarchy.minus_links(offset) {
                let n = idx.n[link.mode] as f64;
                let mode = &expansion.modes[link.mode];
                down.push(DownLink { offset: link.offset, left: mode.alpha * n, right: mode.alpha_tilde * n });
            }
        }
        up_start.push(up.len());
        down_start.push(down.len());
        let mirror = conjugate_partners(expansion).and_then(|partners| {
            let mut swapped = vec![0u16; partners.len()];
            hierarchy
                .indices()
                .iter()
                .map(|idx| {
                    for (k, &p) in partners.iter().enumerate() {
                        swapped[p] = idx.n[k];
                    }
                    hierarchy.offset_of(&swapped)
                })
                .collect::<Option<Vec<_>>>()
        });
        Ok(Self { hierarchy, hamiltonian, coupling, damping, up_start, up, down_start, down, mirror })
    }

    pub fn for_system(
        hierarchy: Arc<Hierarchy>,
        sys: &SystemSpec,
        coupling: SysMatrix,
        expansion: &CorrelationExpansion,
    ) -> Result<Self> {
        Self::new(hierarchy, sys.hamiltonian(), coupling, expansion)
    }

    pub fn hierarchy(&self) -> &Arc<Hierarchy> {
        &self.hierarchy
    }

    pub fn len(&self) -> usize {
        self.damping.len()
    }

    pub fn is_empty(&self) -> bool {
        self.damping.is_empty()
    }

    #[inline]
    fn derivative(&self, input: &[SysMatrix], j: usize) -> SysMatrix {
        let rho = input[j];
        let mut upper = SysMatrix::zeros();
        for &o in &self.up[self.up_start[j]..self.up_start[j + 1]] {
            upper += input[o];
        }
        let mut left = upper;
        let mut right = upper;
        for d in &self.down[self.down_start[j]..self.down_start[j + 1]] {
            let lower = input[d.offset];
            left += lower * d.left;
            right += lower * d.right;
        }
        // −i(Hρ − ρH) − i(S P − P S) − i(S A − B S), grouped by side.
        let lhs = self.hamiltonian * rho + self.coupling * left;
        let rhs = rho * self.hamiltonian + right * self.coupling;
        (lhs - rhs) * MINUS_I + rho * self.damping[j]
    }

    /// Writes dρ/dt for every ADO into `out`.
    pub fn apply(&self, input: &[SysMatrix], out: &mut [SysMatrix]) {
        assert_eq!(input.len(), self.len());
        assert_eq!(out.len(), self.len());
        out.par_iter_mut()
            .with_min_len(MIN_CHUNK)
            .enumerate()
            .for_each(|(j, slot)| *slot = self.derivative(input, j));
    }

    pub fn has_mirror(&self) -> bool {
        self.mirror.is_some()
    }

    /// Same as [`apply`](Self::apply) for inputs obeying ρ_n̄ = ρ_n†, which
    /// the equation preserves for Hermitian ρ_S: each mirror pair is
    /// evaluated once. Falls back to the full sweep without a mirror map.
    pub fn apply_hermitian(&self, input: &[SysMatrix], out: &mut [SysMatrix]) {
        let Some(mirror) = &self.mirror else {
            return self.apply(input, out);
        };
        assert_eq!(input.len(), self.len());
        assert_eq!(out.len(), self.len());
        out.par_iter_mut()
            .with_min_len(MIN_CHUNK)
            .enumerate()
            .filter(|(j, _)| mirror[*j] >= *j)
            .for_each(|(j, slot)| *slot = self.derivative(input, j));
        for j in 0..out.len() {
            let m = mirror[j];
            if m < j {
                out[j] = out[m].adjoint();
            }
        }
    }
}

/// A full set of ADOs on a hierarchy; offset 0 is the system density matrix.
#[derive(Debug, Clone)]
pub struct HierarchyState {
    pub hierarchy: Arc<Hierarchy>,
    pub ados: Vec<SysMatrix>,
}

impl HierarchyState {
    /// Factorized initial condition: ρ_0 = `rho_s`, every other ADO zero.
    pub fn factorized(hierarchy: Arc<Hierarchy>, rho_s: SysMatrix) -> Self {
        let mut ados = vec![SysMatrix::zeros(); hierarchy.len()];
        ados[0] = rho_s;
        Self { hierarchy, ados }
    }

    pub fn system(&self) -> &SysMatrix {
        &self.ados[0]
    }
}

/// One-shot evaluation of the HEOM derivative for `state`.
pub fn heom_rhs(
    state: &HierarchyState,
    sys: &SystemSpec,
    coupling: &SysMatrix,
    expansion: &CorrelationExpansion,
) -> Result<Vec<SysMatrix>> {
    let generator = HeomGenerator::for_system(state.hierarchy.clone(), sys, *coupling, expansion)?;
    let mut out = vec![SysMatrix::zeros(); state.ados.len()];
    generator.apply(&state.ados, &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::{expand_correlation, BathSpec, SpectralDensity};
    use crate::heom::system::{max_abs, sigma_z};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sample_rho() -> SysMatrix {
        SysMatrix::new(c(0.6, 0.0), c(0.2, -0.1), c(0.2, 0.1), c(0.4, 0.0))
    }

    #[test]
    fn zero_coupling_is_bare_commutator() {
        let bath = BathSpec::new(SpectralDensity::table1().scaled(0.0), 300.0, 2).unwrap();
        let exp = expand_correlation(&bath).unwrap();
        let h = Arc::new(Hierarchy::build(exp.len(), 3, 10_000).unwrap());
        let sys = SystemSpec::from_omega0(4e-3).unwrap();
        let state = HierarchyState::factorized(h, sample_rho());
        let d = heom_rhs(&state, &sys, &sigma_z(), &exp).unwrap();
        let hs = sys.hamiltonian();
        let expected = (hs * sample_rho() - sample_rho() * hs) * MINUS_I;
        assert!(max_abs(&(d[0] - expected)) < 1e-18);
        assert!(d[1..].iter().all(|m| max_abs(m) == 0.0));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let bath = BathSpec::new(SpectralDensity::table1(), 300.0, 2).unwrap();
        let exp = expand_correlation(&bath).unwrap();
        let h = Arc::new(Hierarchy::build(exp.len() + 1, 2, 10_000).unwrap());
        let state = HierarchyState::factorized(h, sample_rho());
        let sys = SystemSpec::from_omega0(4e-3).unwrap();
        assert!(matches!(
            heom_rhs(&state, &sys, &sigma_z(), &exp),
            Err(Error::DimensionMismatch { expansion: 6, hierarchy: 7 })
        ));
    }

    #[test]
    fn mirror_sweep_matches_full_sweep() {
        let bath = BathSpec::new(SpectralDensity::table1(), 300.0, 2).unwrap();
        let exp = expand_correlation(&bath).unwrap();
        let h = Arc::new(Hierarchy::build(exp.len(), 3, 10_000).unwrap());
        let sys = SystemSpec::from_omega0(4e-3).unwrap();
        let gen = HeomGenerator::for_system(h.clone(), &sys, sigma_z(), &exp).unwrap();
        assert!(gen.has_mirror());
        // A symmetric state generated by a few exact steps from Hermitian ρ_S.
        let mut state = vec![SysMatrix::zeros(); h.len()];
        state[0] = sample_rho();
        let mut d = vec![SysMatrix::zeros(); h.len()];
        for _ in 0..3 {
            gen.apply(&state, &mut d);
            for (s, x) in state.iter_mut().zip(&d) {
                *s += x * c(50.0, 0.0);
            }
        }
        let mut full = vec![SysMatrix::zeros(); h.len()];
        let mut half = vec![SysMatrix::zeros(); h.len()];
        gen.apply(&state, &mut full);
        gen.apply_hermitian(&state, &mut half);
        let scale = full.iter().map(max_abs).fold(0.0, f64::max);
        for (a, b) in full.iter().zip(&half) {
            assert!(max_abs(&(a - b)) <= 1e-13 * scale);
        }
    }

    #[test]
    fn single_mode_terms_by_hand() {
        // One synthetic mode and L = 1: check every term of the equation.
        let alpha = c(2.0, 0.5);
        let alpha_tilde = c(1.5, -0.3);
        let zeta = c(0.7, 0.2);
        let exp = CorrelationExpansion {
            modes: vec![crate::bath::CorrelationMode { alpha, alpha_tilde, zeta }],
        };
        let h = Arc::new(Hierarchy::build(1, 1, 10).unwrap());
        let hs = SysMatrix::new(c(0.3, 0.0), c(0.1, 0.0), c(0.1, 0.0), c(-0.3, 0.0));
        let s = sigma_z();
        let gen = HeomGenerator::new(h, hs, s, &exp).unwrap();
        let r0 = sample_rho();
        let r1 = SysMatrix::new(c(0.1, 0.2), c(-0.3, 0.05), c(0.4, 0.0), c(0.0, -0.1));
        let mut out = vec![SysMatrix::zeros(); 2];
        gen.apply(&[r0, r1], &mut out);
        let i = c(0.0, 1.0);
        let e0 = (hs * r0 - r0 * hs) * (-i) + (s * r1 - r1 * s) * (-i);
        let e1 = (hs * r1 - r1 * hs) * (-i) + r1 * (i * zeta) - (s * r0 * alpha - r0 * s * alpha_tilde) * i;
        assert!(max_abs(&(out[0] - e0)) < 1e-15);
        assert!(max_abs(&(out[1] - e1)) < 1e-15);
    }
}
