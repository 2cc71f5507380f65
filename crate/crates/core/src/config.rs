//! Experiment configuration: strict TOML parsing, validation, presets and
//! the canonical hash written into every output file.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bath::{BathSpec, LorentzianComponent, SpectralDensity};
use crate::dynmap::AnalysisSettings;
use crate::error::{Error, Result};
use crate::heom::{from_adiabatic, PropagationSettings, SysMatrix, SystemSpec};
use crate::units;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    pub bath: BathConfig,
    #[serde(default)]
    pub heom: HeomConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default, skip_serializing_if = "SweepConfig::is_empty")]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    /// Free-form provenance written by the tool into manifests; ignored on input.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_info: Option<toml::Table>,
}

/// Either `omega0` alone (diabatic gap zero, W = ω₀/2) or both `omega0_d`
/// and `w_coupling`. All a.u.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega0_d: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_coupling: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathConfig {
    /// Kelvin.
    pub temperature: f64,
    /// Omitted: smallest N meeting `analysis.matsubara_tolerance`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_matsubara: Option<usize>,
    pub lorentzian: Vec<LorentzianComponent>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeomConfig {
    pub level: usize,
    /// Maximum RK4 step in a.u.
    pub dt: f64,
    pub t_final_fs: f64,
    pub output_step_fs: f64,
    pub ado_budget: usize,
    pub divergence_threshold: f64,
}

impl Default for HeomConfig {
    fn default() -> Self {
        let p = PropagationSettings::default();
        Self {
            level: p.level,
            dt: p.dt,
            t_final_fs: p.t_final_fs,
            output_step_fs: p.output_step_fs,
            ado_budget: p.ado_budget,
            divergence_threshold: p.divergence_threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    #[default]
    Simulate,
    ScanL,
    ScanStark,
    Correlation,
}

/// Initial system state; adiabatic states refer to the eigenbasis of H_S.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    #[default]
    #[serde(rename = "diabatic_1")]
    Diabatic1,
    #[serde(rename = "diabatic_2")]
    Diabatic2,
    #[serde(rename = "adiabatic_1")]
    Adiabatic1,
    #[serde(rename = "adiabatic_2")]
    Adiabatic2,
    AdiabaticPlus,
    AdiabaticPlusI,
}

impl InitialState {
    /// Density matrix in the diabatic frame.
    pub fn density_matrix(&self, sys: &SystemSpec) -> SysMatrix {
        use crate::heom::system::unit;
        let probes = crate::dynmap::default_probes();
        match self {
            InitialState::Diabatic1 => unit(0, 0),
            InitialState::Diabatic2 => unit(1, 1),
            InitialState::Adiabatic1 => from_adiabatic(&probes[0], sys),
            InitialState::Adiabatic2 => from_adiabatic(&probes[1], sys),
            InitialState::AdiabaticPlus => from_adiabatic(&probes[2], sys),
            InitialState::AdiabaticPlusI => from_adiabatic(&probes[3], sys),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub initial_state: InitialState,
    /// Output directory; not part of the manifest hash.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub levels: Vec<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub omega0_grid: Vec<f64>,
}

impl SweepConfig {
    fn is_empty(&self) -> bool {
        self.levels.is_empty() && self.omega0_grid.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    /// dV/dt threshold per fs.
    pub witness_threshold: f64,
    pub singular_tolerance: f64,
    /// V level defining the decoherence time.
    pub decoherence_threshold: f64,
    /// Target relative error of the correlation expansion when N is automatic.
    pub matsubara_tolerance: f64,
    pub matsubara_max: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        let a = AnalysisSettings::default();
        Self {
            witness_threshold: a.witness_threshold,
            singular_tolerance: a.singular_tolerance,
            decoherence_threshold: 0.01,
            matsubara_tolerance: 1e-3,
            matsubara_max: 20,
        }
    }
}

impl AnalysisConfig {
    pub fn settings(&self) -> AnalysisSettings {
        AnalysisSettings { witness_threshold: self.witness_threshold, singular_tolerance: self.singular_tolerance }
    }
}

pub const PRESETS: [(&str, &str); 4] = [
    ("paper_onresonant", include_str!("../presets/paper_onresonant.toml")),
    ("paper_offresonant", include_str!("../presets/paper_offresonant.toml")),
    ("paper_convergence", include_str!("../presets/paper_convergence.toml")),
    ("paper_stark", include_str!("../presets/paper_stark.toml")),
];

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let (_, text) = PRESETS.iter().find(|(n, _)| *n == name).ok_or_else(|| {
        let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
        Error::InvalidInput(format!("unknown preset '{name}' (available: {})", names.join(", ")))
    })?;
    parse_config_str(text, &format!("preset:{name}"))
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(before.len(), |p| before.len() - p - 1) + 1;
    (line, col)
}

/// Parses and validates a configuration; `origin` names it in diagnostics.
pub fn parse_config_str(text: &str, origin: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
        let message = match e.span() {
            Some(span) => {
                let (line, col) = line_col(text, span.start);
                format!("line {line}, column {col}: {}", e.message())
            }
            None => e.message().to_string(),
        };
        Error::Parse { path: origin.to_string(), message }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text, &path.display().to_string())
}

fn positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

impl ExperimentConfig {
    /// Checks every invariant and reports all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        let s = &self.system;
        match (s.omega0, s.omega0_d, s.w_coupling) {
            (Some(w), None, None) => {
                if !positive(w) {
                    problems.push(format!("system.omega0 must be > 0, got {w}"));
                }
            }
            (None, Some(d), Some(w)) => {
                if !(d.is_finite() && w.is_finite()) {
                    problems.push("system.omega0_d and system.w_coupling must be finite".into());
                }
            }
            (None, None, None) => {
                problems.push("system: give either omega0 or both omega0_d and w_coupling".into())
            }
            (Some(_), _, _) => {
                problems.push("system: omega0 and (omega0_d, w_coupling) are mutually exclusive".into())
            }
            _ => problems.push("system: omega0_d and w_coupling must be given together".into()),
        }

        if !positive(self.bath.temperature) {
            problems.push(format!(
                "bath.temperature must be > 0 K (Matsubara expansion), got {}",
                self.bath.temperature
            ));
        }
        if self.bath.lorentzian.is_empty() {
            problems.push("bath.lorentzian needs at least one component".into());
        }
        for (i, c) in self.bath.lorentzian.iter().enumerate() {
            if let Err(e) = c.validate() {
                problems.push(format!("bath.lorentzian[{i}]: {e}"));
            }
        }

        let h = &self.heom;
        if !positive(h.dt) {
            problems.push(format!("heom.dt must be > 0, got {}", h.dt));
        }
        if !positive(h.t_final_fs) {
            problems.push(format!("heom.t_final_fs must be > 0, got {}", h.t_final_fs));
        }
        if !positive(h.output_step_fs) {
            problems.push(format!("heom.output_step_fs must be > 0, got {}", h.output_step_fs));
        } else if positive(h.dt) && units::fs_to_au(h.output_step_fs) < h.dt * (1.0 - 1e-12) {
            problems.push(format!(
                "heom.output_step_fs ({} fs = {:.4} a.u.) must be at least dt ({} a.u.)",
                h.output_step_fs,
                units::fs_to_au(h.output_step_fs),
                h.dt
            ));
        }
        if h.ado_budget == 0 {
            problems.push("heom.ado_budget must be > 0".into());
        }
        if !positive(h.divergence_threshold) {
            problems.push("heom.divergence_threshold must be > 0".into());
        }

        for (i, w) in self.sweep.omega0_grid.iter().enumerate() {
            if !positive(*w) {
                problems.push(format!("sweep.omega0_grid[{i}] must be > 0, got {w}"));
            }
        }

        let a = &self.analysis;
        if !(a.witness_threshold.is_finite() && a.witness_threshold >= 0.0) {
            problems.push("analysis.witness_threshold must be >= 0".into());
        }
        if !(a.singular_tolerance.is_finite() && a.singular_tolerance >= 0.0) {
            problems.push("analysis.singular_tolerance must be >= 0".into());
        }
        if !(positive(a.decoherence_threshold) && a.decoherence_threshold < 1.0) {
            problems.push("analysis.decoherence_threshold must lie in (0, 1)".into());
        }
        if !positive(a.matsubara_tolerance) {
            problems.push("analysis.matsubara_tolerance must be > 0".into());
        }

        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    pub fn system_spec(&self) -> Result<SystemSpec> {
        match (self.system.omega0, self.system.omega0_d, self.system.w_coupling) {
            (Some(w), None, None) => SystemSpec::from_omega0(w),
            (None, Some(d), Some(w)) => SystemSpec::from_diabatic(d, w),
            _ => Err(Error::Validation(vec!["system: inconsistent parameters".into()])),
        }
    }

    pub fn spectral_density(&self) -> Result<SpectralDensity> {
        SpectralDensity::new(self.bath.lorentzian.clone())
    }

    /// Bath with the given number of Matsubara terms.
    pub fn bath_spec(&self, n_matsubara: usize) -> Result<BathSpec> {
        BathSpec::new(self.spectral_density()?, self.bath.temperature, n_matsubara)
    }

    pub fn propagation_settings(&self) -> PropagationSettings {
        PropagationSettings {
            level: self.heom.level,
            dt: self.heom.dt,
            t_final_fs: self.heom.t_final_fs,
            output_step_fs: self.heom.output_step_fs,
            ado_budget: self.heom.ado_budget,
            divergence_threshold: self.heom.divergence_threshold,
            keep_ados: false,
        }
    }

    /// Same configuration with ω₀ replaced (ω₀ᵈ = 0 convention).
    pub fn with_omega0(&self, omega0: f64) -> Self {
        let mut c = self.clone();
        c.system = SystemConfig { omega0: Some(omega0), omega0_d: None, w_coupling: None };
        c
    }

    pub fn with_level(&self, level: usize) -> Self {
        let mut c = self.clone();
        c.heom.level = level;
        c
    }

    /// The fields that determine results, as canonical TOML.
    pub fn canonical_toml(&self) -> String {
        let mut c = self.clone();
        c.run.out_dir = None;
        c.run_info = None;
        toml::to_string(&c).expect("configuration always serializes")
    }

    /// SHA-256 of [`canonical_toml`](Self::canonical_toml), hex encoded.
    pub fn manifest_hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_toml().as_bytes()))
    }

    /// Canonical TOML plus a `[run_info]` table.
    pub fn manifest_toml(&self, run_info: toml::Table) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# manifest_hash = {}", self.manifest_hash());
        out.push_str(&self.canonical_toml());
        if !run_info.is_empty() {
            let mut wrapper = toml::Table::new();
            wrapper.insert("run_info".into(), toml::Value::Table(run_info));
            out.push('\n');
            out.push_str(&toml::to_string(&wrapper).expect("table serializes"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> &'static str {
        r#"
[system]
omega0 = 4e-3

[bath]
temperature = 300.0

[[bath.lorentzian]]
delta = 1e-11
omega_c = 8e-4
gamma_w = 1.4e-3
"#
    }

    #[test]
    fn presets_parse() {
        for (name, _) in PRESETS {
            let cfg = preset(name).unwrap();
            assert_eq!(cfg.bath.lorentzian, SpectralDensity::table1().components, "{name}");
            assert_eq!(cfg.bath.temperature, 300.0);
            assert_eq!(cfg.heom.t_final_fs, 200.0);
            assert_eq!(cfg.heom.output_step_fs, 0.05);
        }
        let off = preset("paper_offresonant").unwrap();
        assert_eq!(off.system.omega0, Some(4e-3));
        assert_eq!(off.heom.level, 4);
        assert_eq!(preset("paper_onresonant").unwrap().system.omega0, Some(1e-3));
        assert_eq!(preset("paper_convergence").unwrap().sweep.levels, vec![1, 2, 3, 4, 5]);
        assert!(preset("paper_stark").unwrap().sweep.omega0_grid.contains(&4e-3));
        assert!(matches!(preset("nope"), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn defaults_fill_missing_sections() {
        let cfg = parse_config_str(minimal(), "t").unwrap();
        assert_eq!(cfg.heom, HeomConfig::default());
        assert_eq!(cfg.run.initial_state, InitialState::Diabatic1);
        assert_eq!(cfg.bath.n_matsubara, None);
        let echoed = cfg.canonical_toml();
        assert!(echoed.contains("dt = 0.25") && echoed.contains("witness_threshold"), "{echoed}");
    }

    #[test]
    fn unknown_key_reports_line() {
        let text = minimal().replace("temperature = 300.0", "temperature = 300.0\ntemprature = 1.0");
        match parse_config_str(&text, "cfg.toml") {
            Err(Error::Parse { path, message }) => {
                assert_eq!(path, "cfg.toml");
                assert!(message.contains("line 7"), "{message}");
                assert!(message.contains("temprature"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn both_system_forms_rejected() {
        let text = minimal().replace("omega0 = 4e-3", "omega0 = 4e-3\nomega0_d = 0.0\nw_coupling = 2e-3");
        assert!(matches!(parse_config_str(&text, "t"), Err(Error::Validation(_))));
    }

    #[test]
    fn all_violations_listed() {
        let text = minimal()
            .replace("temperature = 300.0", "temperature = 0.0")
            .replace("gamma_w = 1.4e-3", "gamma_w = 0.0")
            + "\n[heom]\ndt = -1.0\n";
        match parse_config_str(&text, "t") {
            Err(Error::Validation(v)) => {
                assert_eq!(v.len(), 3, "{v:?}");
                assert!(v[0].contains("temperature"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sampling_interval_must_cover_dt() {
        let text = minimal().to_string() + "\n[heom]\ndt = 10.0\noutput_step_fs = 0.05\n";
        assert!(matches!(parse_config_str(&text, "t"), Err(Error::Validation(_))));
    }

    #[test]
    fn manifest_round_trip_keeps_hash() {
        let mut cfg = preset("paper_offresonant").unwrap();
        cfg.bath.n_matsubara = Some(6);
        cfg.run.out_dir = Some("somewhere".into());
        let mut info = toml::Table::new();
        info.insert("wall_time_s".into(), toml::Value::Float(1.5));
        let text = cfg.manifest_toml(info);
        let back = parse_config_str(&text, "manifest").unwrap();
        assert_eq!(back.manifest_hash(), cfg.manifest_hash());
        assert!(back.run_info.is_some());
        assert_ne!(cfg.with_level(3).manifest_hash(), cfg.manifest_hash());
    }

    #[test]
    fn initial_states() {
        let sys = SystemSpec::from_omega0(4e-3).unwrap();
        let rho = InitialState::AdiabaticPlus.density_matrix(&sys);
        // For ω₀ᵈ = 0 the adiabatic |+⟩ is diabatic |1⟩.
        assert!((rho[(0, 0)].re - 1.0).abs() < 1e-15);
        assert!(crate::heom::system::max_abs(&(InitialState::Diabatic1.density_matrix(&sys) - rho)) < 1e-15);
    }
}
