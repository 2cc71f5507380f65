//! Experiment orchestration: single runs, hierarchy-depth and ω₀ scans,
//! correlation diagnostics, the oracle validation suite, and CSV output.
//!
//! Every CSV starts with a `#` header block carrying the SHA-256 of the
//! resolved configuration; the matching `manifest.toml` reproduces the run.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use log::info;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::bath::{
    auto_matsubara, expand_correlation, relative_sup_error, renormalization_energy, validation_grid, BathSpec,
    CorrelationExpansion, CorrelationQuadrature, MatsubaraSelection,
};
use crate::config::{ExperimentConfig, Scenario};
use crate::dynmap::{self, analyze, default_probes, reconstruct_map, DynamicalMap, NonMarkovReport};
use crate::error::{Error, Result};
use crate::heom::{from_adiabatic, propagate, to_adiabatic, PropagationSettings, SysMatrix, SystemSpec};
use crate::oracles;
use crate::units;

/// Bath with its Matsubara count fixed and the expansion built.
#[derive(Debug, Clone)]
pub struct ResolvedBath {
    pub bath: BathSpec,
    pub expansion: CorrelationExpansion,
    /// Present when N was chosen automatically.
    pub selection: Option<MatsubaraSelection>,
}

/// Builds the bath, choosing N by comparison with quadrature when the
/// configuration leaves it open.
pub fn resolve_bath(cfg: &ExperimentConfig) -> Result<ResolvedBath> {
    let (bath, selection) = match cfg.bath.n_matsubara {
        Some(n) => (cfg.bath_spec(n)?, None),
        None => {
            let base = cfg.bath_spec(0)?;
            let times = validation_grid();
            let reference = CorrelationQuadrature::new(&base).eval_many(&base, &times)?;
            let sel = auto_matsubara(
                &base,
                &times,
                &reference,
                cfg.analysis.matsubara_tolerance,
                cfg.analysis.matsubara_max,
            )?;
            info!("auto Matsubara: N = {} (relative error {:.3e})", sel.n_matsubara, sel.rel_error);
            (base.with_matsubara(sel.n_matsubara), Some(sel))
        }
    };
    let expansion = expand_correlation(&bath)?;
    Ok(ResolvedBath { bath, expansion, selection })
}

#[derive(Debug, Clone)]
pub struct SimulationResult {
    /// Configuration with every default and N resolved.
    pub config: ExperimentConfig,
    pub system: SystemSpec,
    pub map: DynamicalMap,
    pub report: NonMarkovReport,
    /// Propagated probe states, adiabatic frame.
    pub probes: [Vec<SysMatrix>; 4],
    /// The configured initial state evolved by the map, adiabatic frame.
    pub state: Vec<SysMatrix>,
    pub purity: Vec<f64>,
    pub modes: usize,
    pub ado_count: usize,
    pub effective_dt: f64,
    pub warnings: Vec<String>,
    pub wall_time_s: f64,
    pub matsubara_error: Option<f64>,
}

impl SimulationResult {
    pub fn times_fs(&self) -> &[f64] {
        &self.map.times_fs
    }

    pub fn volume(&self) -> &[f64] {
        &self.report.volume
    }

    /// Index of the sample closest to `t_fs`.
    pub fn index_at(&self, t_fs: f64) -> usize {
        let t = self.times_fs();
        (0..t.len()).min_by(|&a, &b| (t[a] - t_fs).abs().total_cmp(&(t[b] - t_fs).abs())).unwrap_or(0)
    }
}

fn resolved(cfg: &ExperimentConfig, bath: &ResolvedBath, scenario: Scenario) -> ExperimentConfig {
    let mut c = cfg.clone();
    c.bath.n_matsubara = Some(bath.bath.n_matsubara);
    c.run.scenario = scenario;
    c.run_info = None;
    c
}

pub fn run_simulation(cfg: &ExperimentConfig) -> Result<SimulationResult> {
    cfg.validate()?;
    let bath = resolve_bath(cfg)?;
    run_with_bath(cfg, &bath)
}

/// Propagates the four probe states, reconstructs F(t) and analyses it.
pub fn run_with_bath(cfg: &ExperimentConfig, bath: &ResolvedBath) -> Result<SimulationResult> {
    let start = Instant::now();
    let mut config = resolved(cfg, bath, Scenario::Simulate);
    config.sweep = Default::default();
    let sys = config.system_spec()?;
    let settings: PropagationSettings = config.propagation_settings();
    let probes = default_probes();
    let trajectories = probes
        .par_iter()
        .map(|p| propagate(&from_adiabatic(p, &sys), &sys, &bath.expansion, &settings))
        .collect::<Result<Vec<_>>>()?;
    let adiabatic: Vec<Vec<SysMatrix>> =
        trajectories.iter().map(|t| t.rho.iter().map(|r| to_adiabatic(r, &sys)).collect()).collect();
    let times = trajectories[0].times_fs.clone();
    let map = reconstruct_map(&times, &probes, [&adiabatic[0], &adiabatic[1], &adiabatic[2], &adiabatic[3]])?;
    let report = analyze(&map, &config.analysis.settings());

    let rho0 = to_adiabatic(&config.run.initial_state.density_matrix(&sys), &sys);
    let state: Vec<SysMatrix> = (0..map.len()).map(|i| map.apply(i, &rho0)).collect();
    let purity = dynmap::purity(&state);
    let warnings = trajectories.iter().flat_map(|t| t.warnings.iter().cloned()).collect();
    let first = &trajectories[0];
    let (ado_count, effective_dt) = (first.ado_count, first.effective_dt);
    let [a, b, c, d]: [Vec<SysMatrix>; 4] = adiabatic.try_into().expect("four probes");
    Ok(SimulationResult {
        config,
        system: sys,
        map,
        report,
        probes: [a, b, c, d],
        state,
        purity,
        modes: bath.expansion.len(),
        ado_count,
        effective_dt,
        warnings,
        wall_time_s: start.elapsed().as_secs_f64(),
        matsubara_error: bath.selection.as_ref().map(|s| s.rel_error),
    })
}

fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.12e}")
    } else {
        "nan".to_string()
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "nan".to_string(), num)
}

fn header(kind: &str, cfg: &ExperimentConfig, extra: &[(&str, String)]) -> String {
    let mut h = String::new();
    let _ = writeln!(h, "# spinboson {kind}");
    let _ = writeln!(h, "# manifest_hash = {}", cfg.manifest_hash());
    for (k, v) in extra {
        let _ = writeln!(h, "# {k} = {v}");
    }
    h
}

/// Main results table: one row per output time.
pub fn results_csv(r: &SimulationResult) -> String {
    let extra = [
        ("omega0", num(r.system.omega0)),
        ("level", r.config.heom.level.to_string()),
        ("n_matsubara", r.config.bath.n_matsubara.unwrap_or(0).to_string()),
        ("modes", r.modes.to_string()),
        ("ado_count", r.ado_count.to_string()),
        ("units", "t in fs; rates in a.u. (1/hartree-time); dVdt per fs".to_string()),
    ];
    let mut out = header("results", &r.config, &extra);
    out.push_str("t_fs,V,gamma_total,gamma1,gamma2,gamma3,purity,re_rho12,im_rho12,dVdt,witness_flag\n");
    let rep = &r.report;
    let threshold = r.config.analysis.witness_threshold;
    for i in 0..r.map.len() {
        let rates = rep.canonical_rates[i];
        let rho = &r.state[i];
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            num(rep.times_fs[i]),
            num(rep.volume[i]),
            opt(rep.gamma_total[i]),
            opt(rates.map(|g| g[0])),
            opt(rates.map(|g| g[1])),
            opt(rates.map(|g| g[2])),
            num(r.purity[i]),
            num(rho[(0, 1)].re),
            num(rho[(0, 1)].im),
            num(rep.volume_slope[i]),
            u8::from(rep.volume_slope[i] > threshold),
        );
    }
    out
}

/// Reduced density matrix of the configured initial state, adiabatic frame.
pub fn trajectory_csv(r: &SimulationResult) -> String {
    let mut out = header("trajectory", &r.config, &[("frame", "adiabatic".to_string())]);
    out.push_str("t_fs,re_rho11,re_rho22,re_rho12,im_rho12,purity\n");
    for (i, rho) in r.state.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            num(r.map.times_fs[i]),
            num(rho[(0, 0)].re),
            num(rho[(1, 1)].re),
            num(rho[(0, 1)].re),
            num(rho[(0, 1)].im),
            num(r.purity[i]),
        );
    }
    out
}

fn run_info(r: &SimulationResult) -> toml::Table {
    let mut t = toml::Table::new();
    t.insert("version".into(), env!("CARGO_PKG_VERSION").into());
    t.insert("modes".into(), (r.modes as i64).into());
    t.insert("ado_count".into(), (r.ado_count as i64).into());
    t.insert("effective_dt".into(), r.effective_dt.into());
    t.insert("wall_time_s".into(), r.wall_time_s.into());
    if let Some(e) = r.matsubara_error {
        t.insert("matsubara_rel_error".into(), e.into());
    }
    let intervals: Vec<toml::Value> = r
        .report
        .witness_intervals
        .iter()
        .map(|&(a, b)| toml::Value::Array(vec![a.into(), b.into()]))
        .collect();
    t.insert("witness_intervals_fs".into(), intervals.into());
    if let Some(s) = r.report.singular_after {
        t.insert("singular_after_fs".into(), s.into());
    }
    let warnings: Vec<toml::Value> = r.warnings.iter().map(|w| w.as_str().into()).collect();
    t.insert("warnings".into(), warnings.into());
    t
}

/// Writes `results.csv`, `trajectory.csv` and `manifest.toml` into `dir`.
pub fn write_simulation(r: &SimulationResult, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("results.csv"), results_csv(r))?;
    std::fs::write(dir.join("trajectory.csv"), trajectory_csv(r))?;
    std::fs::write(dir.join("manifest.toml"), r.config.manifest_toml(run_info(r)))?;
    Ok(())
}

fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone)]
pub struct HierarchyScan {
    pub config: ExperimentConfig,
    pub runs: Vec<SimulationResult>,
    /// (L_a, L_b, sup_t |V_a − V_b|) for consecutive entries of the level list.
    pub distances: Vec<(usize, usize, f64)>,
    pub wall_time_s: f64,
}

impl HierarchyScan {
    pub fn run(&self, level: usize) -> Option<&SimulationResult> {
        self.runs.iter().find(|r| r.config.heom.level == level)
    }

    /// sup_t |V_a − V_b| for any two scanned levels.
    pub fn distance(&self, a: usize, b: usize) -> Option<f64> {
        Some(sup_distance(self.run(a)?.volume(), self.run(b)?.volume()))
    }
}

pub fn scan_hierarchy(cfg: &ExperimentConfig) -> Result<HierarchyScan> {
    cfg.validate()?;
    if cfg.sweep.levels.is_empty() {
        return Err(Error::InvalidInput("scan-l needs a non-empty sweep.levels list".into()));
    }
    let start = Instant::now();
    let bath = resolve_bath(cfg)?;
    let mut runs = Vec::with_capacity(cfg.sweep.levels.len());
    for &level in &cfg.sweep.levels {
        info!("scan-l: L = {level}");
        runs.push(run_with_bath(&cfg.with_level(level), &bath)?);
    }
    let distances = runs
        .windows(2)
        .map(|w| (w[0].config.heom.level, w[1].config.heom.level, sup_distance(w[0].volume(), w[1].volume())))
        .collect();
    Ok(HierarchyScan {
        config: resolved(cfg, &bath, Scenario::ScanL),
        runs,
        distances,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

pub fn hierarchy_summary_csv(scan: &HierarchyScan) -> String {
    let mut out = header("scan-l", &scan.config, &[("converged_below", "0.02".to_string())]);
    out.push_str("level_a,level_b,ado_count_b,sup_dV\n");
    for (i, &(a, b, d)) in scan.distances.iter().enumerate() {
        let _ = writeln!(out, "{a},{b},{},{}", scan.runs[i + 1].ado_count, num(d));
    }
    out
}

pub fn write_hierarchy_scan(scan: &HierarchyScan, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for r in &scan.runs {
        write_simulation(r, &dir.join(format!("L{}", r.config.heom.level)))?;
    }
    std::fs::write(dir.join("scan_l_summary.csv"), hierarchy_summary_csv(scan))?;
    let mut info = toml::Table::new();
    info.insert("wall_time_s".into(), scan.wall_time_s.into());
    std::fs::write(dir.join("manifest.toml"), scan.config.manifest_toml(info))?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct StarkPoint {
    pub omega0: f64,
    /// First sampled time with V below the decoherence threshold.
    pub decoherence_time_fs: Option<f64>,
    pub positive_volume_gain: f64,
    pub witness_count: usize,
    pub min_volume: f64,
    pub final_purity: f64,
}

#[derive(Debug, Clone)]
pub struct StarkScan {
    pub config: ExperimentConfig,
    pub points: Vec<StarkPoint>,
    pub runs: Vec<SimulationResult>,
    pub wall_time_s: f64,
}

impl StarkScan {
    pub fn point(&self, omega0: f64) -> Option<&StarkPoint> {
        self.points.iter().find(|p| (p.omega0 - omega0).abs() <= 1e-12 * omega0.abs())
    }
}

/// Runs every grid point (concurrently); results are kept in grid order.
pub fn scan_stark(cfg: &ExperimentConfig) -> Result<StarkScan> {
    cfg.validate()?;
    if cfg.sweep.omega0_grid.is_empty() {
        return Err(Error::InvalidInput("scan-stark needs a non-empty sweep.omega0_grid".into()));
    }
    let start = Instant::now();
    let bath = resolve_bath(cfg)?;
    let runs = cfg
        .sweep
        .omega0_grid
        .par_iter()
        .map(|&w| run_with_bath(&cfg.with_omega0(w), &bath))
        .collect::<Result<Vec<_>>>()?;
    let threshold = cfg.analysis.decoherence_threshold;
    let points = runs
        .iter()
        .map(|r| StarkPoint {
            omega0: r.system.omega0,
            decoherence_time_fs: r.report.first_time_below(threshold),
            positive_volume_gain: r.report.positive_volume_gain(),
            witness_count: r.report.witness_intervals.len(),
            min_volume: r.volume().iter().copied().fold(f64::INFINITY, f64::min),
            final_purity: *r.purity.last().unwrap_or(&f64::NAN),
        })
        .collect();
    Ok(StarkScan {
        config: resolved(cfg, &bath, Scenario::ScanStark),
        points,
        runs,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

pub fn stark_csv(scan: &StarkScan) -> String {
    let extra = [("decoherence_threshold", num(scan.config.analysis.decoherence_threshold))];
    let mut out = header("scan-stark", &scan.config, &extra);
    out.push_str("omega0,decoherence_time_fs,positive_volume_gain,witness_count,min_V,final_purity\n");
    for p in &scan.points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            num(p.omega0),
            opt(p.decoherence_time_fs),
            num(p.positive_volume_gain),
            p.witness_count,
            num(p.min_volume),
            num(p.final_purity),
        );
    }
    out
}

pub fn write_stark_scan(scan: &StarkScan, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (i, r) in scan.runs.iter().enumerate() {
        write_simulation(r, &dir.join(format!("point{i:02}")))?;
    }
    std::fs::write(dir.join("scan_stark.csv"), stark_csv(scan))?;
    let mut info = toml::Table::new();
    info.insert("wall_time_s".into(), scan.wall_time_s.into());
    std::fs::write(dir.join("manifest.toml"), scan.config.manifest_toml(info))?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct CorrelationReport {
    pub config: ExperimentConfig,
    pub times_fs: Vec<f64>,
    pub expansion: Vec<Complex64>,
    pub quadrature: Vec<Complex64>,
    pub n_matsubara: usize,
    pub modes: usize,
    pub rel_error: f64,
    /// Mean spacing of the maxima of Re C(t) on [0, 100] fs.
    pub period_fs: Option<f64>,
    /// max |C(t)| / |C(0)| for t > 100 fs.
    pub tail_ratio: f64,
    pub renormalization_energy: f64,
    pub beta: f64,
    pub wall_time_s: f64,
}

/// Local maxima of `values`, refined by a parabola through each peak and
/// its neighbours; a maximum at the first sample counts.
pub fn local_maxima(times: &[f64], values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut peaks = Vec::new();
    if n >= 2 && values[0] > values[1] {
        peaks.push(times[0]);
    }
    for i in 1..n.saturating_sub(1) {
        let (a, b, c) = (values[i - 1], values[i], values[i + 1]);
        if b > a && b >= c {
            let denom = a - 2.0 * b + c;
            let shift = if denom != 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
            let h = 0.5 * (times[i + 1] - times[i - 1]);
            peaks.push(times[i] + shift * h);
        }
    }
    peaks
}

/// Mean spacing of the maxima of Re C(t) within [0, `window_fs`].
pub fn oscillation_period(times_fs: &[f64], values: &[f64], window_fs: f64) -> Option<f64> {
    let end = times_fs.iter().position(|&t| t > window_fs).unwrap_or(times_fs.len());
    let peaks = local_maxima(&times_fs[..end], &values[..end]);
    (peaks.len() >= 2).then(|| (peaks[peaks.len() - 1] - peaks[0]) / (peaks.len() - 1) as f64)
}

pub fn correlation_report(cfg: &ExperimentConfig) -> Result<CorrelationReport> {
    cfg.validate()?;
    let start = Instant::now();
    let bath = resolve_bath(cfg)?;
    let times = validation_grid();
    let quadrature = CorrelationQuadrature::new(&bath.bath).eval_many(&bath.bath, &times)?;
    let expansion: Vec<Complex64> = times.iter().map(|&t| bath.expansion.eval(t)).collect();
    let times_fs: Vec<f64> = times.iter().map(|&t| units::au_to_fs(t)).collect();
    let re: Vec<f64> = quadrature.iter().map(|c| c.re).collect();
    let c0 = quadrature[0].norm();
    let tail_ratio = times_fs
        .iter()
        .zip(&quadrature)
        .filter(|(t, _)| **t > 100.0)
        .map(|(_, c)| c.norm() / c0)
        .fold(0.0, f64::max);
    Ok(CorrelationReport {
        config: resolved(cfg, &bath, Scenario::Correlation),
        rel_error: relative_sup_error(&bath.expansion, &times, &quadrature),
        period_fs: oscillation_period(&times_fs, &re, 100.0),
        tail_ratio,
        renormalization_energy: renormalization_energy(&bath.bath.spectral_density)?,
        beta: bath.bath.beta,
        n_matsubara: bath.bath.n_matsubara,
        modes: bath.expansion.len(),
        times_fs,
        expansion,
        quadrature,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

pub fn correlation_csv(r: &CorrelationReport) -> String {
    let extra = [
        ("beta", num(r.beta)),
        ("n_matsubara", r.n_matsubara.to_string()),
        ("modes", r.modes.to_string()),
        ("relative_sup_error", num(r.rel_error)),
        ("period_fs", opt(r.period_fs)),
        ("tail_ratio_after_100fs", num(r.tail_ratio)),
        ("renormalization_energy", num(r.renormalization_energy)),
    ];
    let mut out = header("correlation", &r.config, &extra);
    out.push_str("t_fs,re_C,im_C,re_C_quad,im_C_quad\n");
    for i in 0..r.times_fs.len() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            num(r.times_fs[i]),
            num(r.expansion[i].re),
            num(r.expansion[i].im),
            num(r.quadrature[i].re),
            num(r.quadrature[i].im),
        );
    }
    out
}

pub fn write_correlation(r: &CorrelationReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("correlation.csv"), correlation_csv(r))?;
    let mut info = toml::Table::new();
    info.insert("wall_time_s".into(), r.wall_time_s.into());
    std::fs::write(dir.join("manifest.toml"), r.config.manifest_toml(info))?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct ValidationCheck {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: String,
}

impl ValidationCheck {
    fn below(name: &str, value: f64, tolerance: f64, detail: String) -> Self {
        Self { name: name.into(), value, tolerance, passed: value < tolerance, detail }
    }
}

/// W = 0 runs against the exact dephasing solution: sup |ρ₁₂| errors per
/// level and the worst population drift.
pub fn dephasing_errors(
    bath: &ResolvedBath,
    levels: &[usize],
    omega0_d: f64,
    settings: &PropagationSettings,
) -> Result<(Vec<f64>, f64)> {
    let sys = SystemSpec::from_diabatic(omega0_d, 0.0)?;
    let h = Complex64::new(0.5, 0.0);
    let rho0 = SysMatrix::new(h, h, h, h);
    let mut errors = Vec::new();
    let mut drift: f64 = 0.0;
    let mut oracle: Option<oracles::DephasingOracleResult> = None;
    for &level in levels {
        let s = PropagationSettings { level, ..*settings };
        let tr = propagate(&rho0, &sys, &bath.expansion, &s)?;
        let exact = match &oracle {
            Some(o) => o,
            None => oracle.insert(oracles::dephasing_exact(&bath.bath, omega0_d, &rho0, &tr.times_fs)?),
        };
        let err = tr.rho.iter().zip(&exact.rho12).map(|(r, e)| (r[(0, 1)].norm() - e.norm()).abs()).fold(0.0, f64::max);
        errors.push(err);
        for r in &tr.rho {
            drift = drift.max((r[(0, 0)].re - 0.5).abs()).max((r[(1, 1)].re - 0.5).abs());
        }
    }
    Ok((errors, drift))
}

/// Oracle suite behind `spinboson validate`.
pub fn validation_suite() -> Result<Vec<ValidationCheck>> {
    let mut checks = Vec::new();
    let base = crate::config::preset("paper_offresonant")?;

    let corr = correlation_report(&base)?;
    checks.push(ValidationCheck::below(
        "correlation_expansion_fidelity",
        corr.rel_error,
        1e-3,
        format!("N = {}, {} modes", corr.n_matsubara, corr.modes),
    ));

    let mut free = base.clone();
    for c in &mut free.bath.lorentzian {
        c.delta = 0.0;
    }
    free.heom.level = 2;
    free.heom.output_step_fs = 0.5;
    let r = run_simulation(&free)?;
    let dev = r
        .volume()
        .iter()
        .map(|v| (v - 1.0).abs())
        .chain(r.purity.iter().map(|p| (p - 1.0).abs()))
        .chain(r.state.iter().map(|s| (s.trace().re - 1.0).abs()))
        .fold(0.0, f64::max);
    checks.push(ValidationCheck::below("zero_coupling_identity", dev, 1e-9, "max |V−1|, |purity−1|, |tr−1|".into()));

    let rate = 2e-4;
    let times: Vec<f64> = (0..=4000).map(|i| i as f64 * 0.05).collect();
    let lind = oracles::lindblad_constant_rate(oracles::LindbladKind::Dephasing, rate, 2e-3, &times);
    let trs = [&lind.trajectories[0][..], &lind.trajectories[1][..], &lind.trajectories[2][..], &lind.trajectories[3][..]];
    let map = reconstruct_map(&times, &lind.probes, trs)?;
    let rep = analyze(&map, &base.analysis.settings());
    let rate_err = rep
        .canonical_rates
        .iter()
        .map(|g| g.map_or(f64::INFINITY, |g| (g[2] - 2.0 * rate).abs().max(g[0].abs()).max(g[1].abs())))
        .fold(0.0, f64::max);
    checks.push(ValidationCheck::below("lindblad_canonical_rates", rate_err, 1e-6, "rates {0, 0, 2γ}".into()));
    let g0 = rep.gamma_total[0].unwrap_or(f64::NAN);
    let gamma_spread = rep.gamma_total.iter().map(|g| g.map_or(f64::INFINITY, |g| (g - g0).abs())).fold(0.0, f64::max);
    checks.push(ValidationCheck::below("lindblad_gamma_constant", gamma_spread, 1e-6, format!("Γ = {g0:.6e}")));
    checks.push(ValidationCheck::below(
        "lindblad_no_witness",
        rep.witness_intervals.len() as f64,
        0.5,
        "witness intervals".into(),
    ));

    // The hierarchy converges quickly for a weak bath, which checks the
    // equations themselves; the Table-1 bath checks monotone convergence.
    let mut weak = base.clone();
    for c in &mut weak.bath.lorentzian {
        c.delta *= 0.05;
    }
    let weak_bath = resolve_bath(&weak)?;
    let settings = PropagationSettings { output_step_fs: 0.5, ..base.propagation_settings() };
    let (errs, drift) = dephasing_errors(&weak_bath, &[4], 1e-3, &settings)?;
    checks.push(ValidationCheck::below(
        "pure_dephasing_weak_bath_L4",
        errs[0],
        1e-4,
        "0.05 × Table-1 amplitudes".into(),
    ));
    let table_bath = resolve_bath(&base)?;
    let (errs, drift_t) = dephasing_errors(&table_bath, &[1, 2, 3, 4], 1e-3, &settings)?;
    let monotone = errs.windows(2).all(|w| w[1] < w[0]);
    checks.push(ValidationCheck {
        name: "pure_dephasing_monotone_in_L".into(),
        value: errs[3],
        tolerance: f64::NAN,
        passed: monotone,
        detail: format!(
            "sup errors L=1..4: {}",
            errs.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>().join(", ")
        ),
    });
    checks.push(ValidationCheck::below(
        "pure_dephasing_populations",
        drift.max(drift_t),
        1e-9,
        "max population drift".into(),
    ));
    Ok(checks)
}

pub fn validation_table(checks: &[ValidationCheck]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<34} {:>12} {:>10}  result  detail", "check", "value", "tolerance");
    for c in checks {
        let _ = writeln!(
            out,
            "{:<34} {:>12.4e} {:>10.1e}  {:<6}  {}",
            c.name,
            c.value,
            c.tolerance,
            if c.passed { "PASS" } else { "FAIL" },
            c.detail
        );
    }
    out
}
