//! Experiment runner: configuration, pipelines, sweeps and output records.

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::{cost_profile, CostProfile, RingLocation};
use crate::electro::{optimal_vortex_number, ring_energy, VortexNumber, WeightField};
use crate::error::{Error, Result};
use crate::giant_vortex::{decay_diagnostics, optimal_winding_scan, DecayReport, GiantVortexState, RadialGrid, SolverOptions, WindingScan};
use crate::gp2d::{
    cell_diagnostics, decoupling_check, default_alpha, detect_vortices, minimize_gp_capped, reduced_field, seed_field, vorticity_comparison, CellReport, DecouplingReport, Dictionary, DiscGrid,
    GpEnergy, GpOptions, Preset, RingStatistics, Vortex, VorticityComparison, WaveFunction,
};
use crate::numerics::gauss_legendre;
use crate::params::{regime_from_omega, regime_from_omega1, validate_regime, Regime, RegimeReport};
use crate::tf::{annulus_geometry, tf_functional, tf_profile, AnnulusGeometry, TFProfile};
use crate::trial::{build_trial, TrialInputs, TrialReport};

const SQRT_PI: f64 = 1.772_453_850_905_516;

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    Tf,
    GiantVortex,
    Cost,
    Electro,
    Trial,
    Gp2d,
    VerifyAll,
    Sweep,
}

impl Pipeline {
    pub fn name(&self) -> &'static str {
        match self {
            Pipeline::Tf => "tf",
            Pipeline::GiantVortex => "giant-vortex",
            Pipeline::Cost => "cost",
            Pipeline::Electro => "electro",
            Pipeline::Trial => "trial",
            Pipeline::Gp2d => "gp2d",
            Pipeline::VerifyAll => "verify-all",
            Pipeline::Sweep => "sweep",
        }
    }
}

/// Points of a sweep; every combination of the listed values is run.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SweepGrid {
    pub epsilon: Vec<f64>,
    pub omega1: Vec<f64>,
    /// Pipeline run at each point: `electro` (cheap) or `verify-all`.
    #[serde(default = "default_point_pipeline")]
    pub point: Pipeline,
}

fn default_point_pipeline() -> Pipeline {
    Pipeline::Electro
}

impl SweepGrid {
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.epsilon.iter().flat_map(|e| self.omega1.iter().map(move |o| (*e, *o))).collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub pipeline: Pipeline,
    pub epsilon: f64,
    /// Subcriticality; exactly one of `omega1` and `omega` is set.
    pub omega1: Option<f64>,
    pub omega: Option<f64>,
    /// Radial nodes on the annulus.
    pub grid_r: usize,
    /// Angular nodes of the 2D grid.
    pub grid_theta: usize,
    pub seed: u64,
    pub out: PathBuf,
    /// Phase noise of the giant-vortex seed.
    pub noise: f64,
    pub radial_tol: f64,
    pub gp_max_iter: usize,
    pub gp_tol_energy: f64,
    pub gp_tol_residual: f64,
    /// Trial cells and vortices per cell; chosen from the vortex number when absent.
    pub trial_cells: Option<usize>,
    pub trial_per_cell: Option<usize>,
    pub sweep: Option<SweepGrid>,
    /// Concurrent sweep points.
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            pipeline: Pipeline::VerifyAll,
            epsilon: 0.05,
            omega1: Some(0.04),
            omega: None,
            grid_r: 256,
            grid_theta: 1024,
            seed: 1,
            out: PathBuf::from("out"),
            noise: 0.05,
            radial_tol: 1e-10,
            gp_max_iter: 4000,
            gp_tol_energy: 1e-11,
            gp_tol_residual: 1e-4,
            trial_cells: None,
            trial_per_cell: None,
            sweep: None,
            workers: 2,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        if s.trim().is_empty() {
            return Err(Error::Usage("empty configuration".into()));
        }
        let c: ExperimentConfig = toml::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let usage = |m: String| Err(Error::Usage(m));
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return usage(format!("epsilon must lie in (0, 1), got {}", self.epsilon));
        }
        if self.omega1.is_some() == self.omega.is_some() {
            return usage("set exactly one of omega1 and omega".into());
        }
        if self.grid_r < 256 || self.grid_theta < 256 {
            return usage(format!("grid {} x {} is below 256 x 256", self.grid_r, self.grid_theta));
        }
        if self.workers == 0 || self.gp_max_iter == 0 {
            return usage("workers and gp_max_iter must be positive".into());
        }
        if self.pipeline == Pipeline::Sweep {
            let Some(g) = &self.sweep else { return usage("sweep pipeline needs a [sweep] table".into()) };
            if g.points().len() < 2 {
                return usage(format!("sweep needs at least 2 points, got {}", g.points().len()));
            }
            if matches!(g.point, Pipeline::Sweep) {
                return usage("sweep points cannot be sweeps".into());
            }
        }
        Ok(())
    }

    pub fn regime(&self) -> Result<Regime> {
        match (self.omega1, self.omega) {
            (Some(o1), None) => regime_from_omega1(self.epsilon, o1),
            (None, Some(o)) => regime_from_omega(self.epsilon, o),
            _ => Err(Error::Usage("set exactly one of omega1 and omega".into())),
        }
    }

    fn at_point(&self, epsilon: f64, omega1: f64, pipeline: Pipeline) -> Self {
        ExperimentConfig { pipeline, epsilon, omega1: Some(omega1), omega: None, sweep: None, ..self.clone() }
    }

    fn gp_options(&self) -> GpOptions {
        GpOptions { max_iter: self.gp_max_iter, tol_energy: self.gp_tol_energy, tol_residual: self.gp_tol_residual, ..GpOptions::default() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TfRecord {
    pub eps_omega: f64,
    pub r_h: f64,
    pub mu_tf: f64,
    pub e_tf: f64,
    pub e_quadrature: f64,
    pub mass_quadrature: f64,
    pub mu_quadrature: f64,
    pub geometry: AnnulusGeometry,
    pub regime_report: RegimeReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GiantVortexRecord {
    pub scan: WindingScan,
    pub a: i64,
    pub winding: i64,
    pub energy: f64,
    pub mu_hat: f64,
    pub residual: f64,
    pub iterations: usize,
    /// `a * 3 sqrt(pi) eps / 2`.
    pub winding_ratio: f64,
    pub decay: DecayReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostRecord {
    pub ring: Option<RingLocation>,
    pub h_star: Option<f64>,
    pub f_star: Option<f64>,
    pub g2_star: Option<f64>,
    pub argmin_h: f64,
    pub quadrature_error: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ElectroRecord {
    pub r_star: f64,
    pub i_star: f64,
    pub h_star: f64,
    /// `None` when `H(R_*) > 0`.
    pub vortex_number: Option<VortexNumber>,
    /// `-H^2 / (4 I)`.
    pub energy_drop: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SandwichRecord {
    pub giant_vortex_energy: f64,
    pub drop: f64,
    pub lower: f64,
    pub numeric: f64,
    pub upper: Option<f64>,
    pub upper_error_bar: Option<f64>,
    /// Smallest `m >= 0` with `E_gv - drop (1 + m) <= E_numeric`.
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Gp2dRecord {
    pub converged: bool,
    pub iterations: usize,
    pub energy: GpEnergy,
    pub mu: f64,
    pub residual: f64,
    pub monotone: bool,
    pub region: (f64, f64),
    pub vortices: Vec<Vortex>,
    pub neutral_clusters: usize,
    pub low_confidence: usize,
    pub ring: RingStatistics,
    pub comparison: Option<VorticityComparison>,
    pub cells: CellReport,
    pub decoupling: DecouplingReport,
    pub sandwich: Option<SandwichRecord>,
}

/// One named check; identities are hard pass/fail, reports carry no verdict.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Check {
    pub name: String,
    pub kind: CheckKind,
    pub value: f64,
    pub bound: f64,
    pub passed: Option<bool>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    Identity,
    Asymptotic,
    Report,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Verdict {
    pub config: ExperimentConfig,
    pub regime: Regime,
    pub tf: Option<TfRecord>,
    pub giant_vortex: Option<GiantVortexRecord>,
    pub cost: Option<CostRecord>,
    pub electro: Option<ElectroRecord>,
    pub trial: Option<TrialReport>,
    pub gp2d: Option<Gp2dRecord>,
    /// Stages skipped or failed, with the error text.
    pub notes: Vec<String>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl Verdict {
    fn new(config: &ExperimentConfig, regime: Regime) -> Self {
        Verdict {
            config: config.clone(),
            regime,
            tf: None,
            giant_vortex: None,
            cost: None,
            electro: None,
            trial: None,
            gp2d: None,
            notes: vec![],
            checks: vec![],
            passed: true,
        }
    }

    fn check(&mut self, name: &str, kind: CheckKind, value: f64, bound: f64, passed: Option<bool>) {
        if passed == Some(false) && kind == CheckKind::Identity {
            self.passed = false;
        }
        self.checks.push(Check { name: name.into(), kind, value, bound, passed });
    }

    /// Detected vortices in the bulk; `None` without a 2D run.
    pub fn vortex_count(&self) -> Option<usize> {
        self.gp2d.as_ref().map(|g| g.vortices.len())
    }

    pub fn predicted_count(&self) -> usize {
        self.electro.as_ref().and_then(|e| e.vortex_number).map_or(0, |v| v.count.total())
    }
}

/// Radial, cost and electrostatic stages shared by every pipeline.
pub struct Chain {
    pub regime: Regime,
    pub tf: TFProfile,
    pub geo: AnnulusGeometry,
    pub grid: RadialGrid,
    pub scan: WindingScan,
    pub state: GiantVortexState,
    pub cost: CostProfile,
    pub ring: Option<ElectroRecord>,
}

impl Chain {
    pub fn tf_only(cfg: &ExperimentConfig) -> Result<(Regime, TFProfile, AnnulusGeometry)> {
        let regime = cfg.regime()?;
        let tf = tf_profile(&regime)?;
        let geo = annulus_geometry(&regime, &tf)?;
        Ok((regime, tf, geo))
    }

    pub fn build(cfg: &ExperimentConfig) -> Result<Self> {
        let (regime, tf, geo) = Self::tf_only(cfg)?;
        let grid = RadialGrid::new(geo.r_less, cfg.grid_r)?;
        let opts = SolverOptions { tol: cfg.radial_tol, ..SolverOptions::default() };
        let (scan, state) = optimal_winding_scan(&regime, &grid, &opts)?;
        let cost = cost_profile(&state)?;
        let ring = match (cost.r_star(), cost.h_star()) {
            (Ok(r_star), Ok(h_star)) => {
                let w = WeightField::from_state(&state)?;
                let i_star = ring_energy(&w, r_star, geo.r_less)?;
                let vortex_number = match optimal_vortex_number(&regime, h_star, i_star) {
                    Ok(v) => Some(v),
                    Err(Error::NoVortices(_)) => None,
                    Err(e) => return Err(e),
                };
                Some(ElectroRecord { r_star, i_star, h_star, vortex_number, energy_drop: -h_star * h_star / (4.0 * i_star) })
            }
            _ => None,
        };
        Ok(Chain { regime, tf, geo, grid, scan, state, cost, ring })
    }

    pub fn disc_grid(&self, n_theta: usize) -> Result<DiscGrid> {
        DiscGrid::for_annulus(&self.grid, n_theta, None)
    }

    pub fn trial_inputs(&self, cfg: &ExperimentConfig) -> Result<TrialInputs<'_>> {
        let e = self.ring.as_ref().ok_or_else(|| Error::NoRing("no ring radius, no trial state".into()))?;
        let count = e.vortex_number.ok_or(Error::NoVortices(e.h_star))?.count;
        Ok(TrialInputs {
            regime: self.regime,
            state: &self.state,
            tf: &self.tf,
            geo: self.geo,
            r_star: e.r_star,
            h_star: e.h_star,
            f_star: self.cost.f_at_rstar.unwrap_or(0.0),
            i_star: e.i_star,
            n_cells: cfg.trial_cells.unwrap_or(count.cells),
            per_cell: cfg.trial_per_cell.unwrap_or(count.per_cell),
        })
    }
}

pub fn tf_record(regime: &Regime, tf: &TFProfile, geo: &AnnulusGeometry) -> TfRecord {
    let e_quadrature = tf_functional(regime, |s| tf.density(s), tf.r_h, 64);
    let mass_quadrature = gauss_legendre(|s| 2.0 * PI * s * tf.density(s), tf.r_h, 1.0, 64);
    let l2 = gauss_legendre(|s| 2.0 * PI * s * tf.density(s).powi(2), tf.r_h, 1.0, 64);
    TfRecord {
        eps_omega: regime.eps_omega(),
        r_h: tf.r_h,
        mu_tf: tf.mu_tf,
        e_tf: tf.e_tf,
        e_quadrature,
        mass_quadrature,
        mu_quadrature: e_quadrature + l2 / (regime.epsilon * regime.epsilon),
        geometry: *geo,
        regime_report: validate_regime(regime),
    }
}

fn giant_vortex_record(c: &Chain) -> GiantVortexRecord {
    let s = &c.state;
    GiantVortexRecord {
        scan: c.scan.clone(),
        a: s.a,
        winding: s.winding,
        energy: s.energy,
        mu_hat: s.mu_hat,
        residual: s.residual,
        iterations: s.iterations,
        winding_ratio: s.a as f64 * 3.0 * SQRT_PI * c.regime.epsilon / 2.0,
        decay: decay_diagnostics(s, &c.tf),
    }
}

fn cost_record(c: &Chain) -> CostRecord {
    CostRecord {
        ring: c.cost.ring,
        h_star: c.cost.h_at_rstar,
        f_star: c.cost.f_at_rstar,
        g2_star: c.cost.g2_at_rstar,
        argmin_h: c.cost.argmin_h(),
        quadrature_error: c.cost.quadrature_error,
    }
}

/// Minimizes the GP energy from a noisy giant-vortex seed and analyzes the vorticity.
pub fn run_gp2d(cfg: &ExperimentConfig, chain: &Chain, grid: &DiscGrid) -> Result<(WaveFunction, Gp2dRecord)> {
    let r = &chain.regime;
    let init = seed_field(&Preset::GiantVortex { noise: cfg.noise, seed: cfg.seed }, &chain.state, grid)?;
    let (wf, converged) = minimize_gp_capped(r, grid, init, &cfg.gp_options())?;
    let u = reduced_field(&wf.psi, &chain.state, grid)?;
    let region = chain.geo.r_bulk.max(chain.geo.r_less)..1.0;
    let data = detect_vortices(&u, grid, region.clone(), r.log_eps);
    let comparison = match &chain.ring {
        Some(e) if r.omega1 > 0.0 => {
            let dict = Dictionary::standard(region.start, Some(e.r_star));
            Some(vorticity_comparison(&data, e.h_star, e.i_star, e.r_star, &dict, &chain.state, r)?)
        }
        _ => None,
    };
    let nominal = ((2.0 * PI / (r.epsilon * r.log_eps)).round() as usize).max(1);
    let cells = cell_diagnostics(&u, &chain.state, r, grid, nominal, default_alpha(r.log_eps))?;
    let decoupling = decoupling_check(&wf.psi, &chain.state, r, grid)?;
    let sandwich = chain.ring.as_ref().filter(|e| e.h_star < 0.0).map(|e| {
        let drop = e.h_star * e.h_star / (4.0 * e.i_star);
        let e_gv = chain.state.energy;
        SandwichRecord {
            giant_vortex_energy: e_gv,
            drop,
            lower: e_gv - drop,
            numeric: wf.energy.total,
            upper: None,
            upper_error_bar: None,
            margin: ((e_gv - wf.energy.total) / drop - 1.0).max(0.0),
        }
    });
    let rec = Gp2dRecord {
        converged,
        iterations: wf.iterations,
        energy: wf.energy,
        mu: wf.mu,
        residual: wf.residual,
        monotone: wf.monotone,
        region: (region.start, region.end),
        low_confidence: data.low_confidence(),
        ring: crate::gp2d::ring_statistics(&data),
        vortices: data.vortices,
        neutral_clusters: data.neutral_clusters,
        comparison,
        cells,
        decoupling,
        sandwich,
    };
    Ok((wf, rec))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut f = fs::File::create(dir.join(name))?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}

fn write_columns(dir: &Path, name: &str, header: &[&str], columns: &[&[f64]]) -> Result<()> {
    let mut w = csv::Writer::from_path(dir.join(name))?;
    w.write_record(header)?;
    for i in 0..columns[0].len() {
        w.write_record(columns.iter().map(|c| format!("{:?}", c[i])))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SnapshotHeader<'a> {
    n_r: usize,
    n_theta: usize,
    annulus_start: usize,
    radii: &'a [f64],
    regime: Regime,
    /// Little-endian `f64` pairs `(re, im)`, row-major in `(r, theta)`.
    layout: &'static str,
}

/// Writes `psi.bin` and its JSON header `psi.json`.
pub fn write_snapshot(dir: &Path, psi: &[Complex64], grid: &DiscGrid, regime: &Regime) -> Result<()> {
    let mut bytes = Vec::with_capacity(psi.len() * 16);
    for z in psi {
        bytes.extend_from_slice(&z.re.to_le_bytes());
        bytes.extend_from_slice(&z.im.to_le_bytes());
    }
    fs::write(dir.join("psi.bin"), bytes)?;
    let header = SnapshotHeader {
        n_r: grid.n_r(),
        n_theta: grid.n_theta,
        annulus_start: grid.annulus_start,
        radii: &grid.radial.nodes,
        regime: *regime,
        layout: "f64le re,im; index = i_r * n_theta + j_theta",
    };
    write_json(dir, "psi.json", &header)
}

/// Reads a snapshot written by `write_snapshot`.
pub fn read_snapshot(dir: &Path) -> Result<Vec<Complex64>> {
    let bytes = fs::read(dir.join("psi.bin"))?;
    if bytes.len() % 16 != 0 {
        return Err(Error::Domain(format!("snapshot has {} bytes, not a multiple of 16", bytes.len())));
    }
    Ok(bytes
        .chunks_exact(16)
        .map(|c| Complex64::new(f64::from_le_bytes(c[..8].try_into().unwrap()), f64::from_le_bytes(c[8..].try_into().unwrap())))
        .collect())
}

fn write_vortices(dir: &Path, vortices: &[Vortex]) -> Result<()> {
    let mut w = csv::Writer::from_path(dir.join("vortices.csv"))?;
    w.write_record(["x", "y", "degree"])?;
    for v in vortices {
        w.write_record([format!("{:?}", v.x), format!("{:?}", v.y), v.degree.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Runs the configured pipeline and writes its records to `config.out`.
pub fn run(cfg: &ExperimentConfig) -> Result<Verdict> {
    cfg.validate()?;
    let dir = cfg.out.as_path();
    fs::create_dir_all(dir)?;
    if cfg.pipeline == Pipeline::Sweep {
        let table = sweep(cfg)?;
        write_json(dir, "sweep.json", &table)?;
        write_sweep_csv(dir, &table)?;
        let mut v = Verdict::new(cfg, cfg.regime()?);
        v.passed = table.rows.iter().all(|r| r.passed == Some(true));
        v.notes = table.rows.iter().filter_map(|r| r.error.clone()).collect();
        return Ok(v);
    }
    let v = evaluate(cfg, true)?;
    let name = match cfg.pipeline {
        Pipeline::VerifyAll => "verdict.json".to_string(),
        p => format!("{}.json", p.name().replace('-', "_")),
    };
    write_json(dir, &name, &v)?;
    Ok(v)
}

/// Runs the pipeline stages without the sweep layer; writes stage files when `write` is set.
pub fn evaluate(cfg: &ExperimentConfig, write: bool) -> Result<Verdict> {
    let dir = cfg.out.as_path();
    let (regime, tf, geo) = Chain::tf_only(cfg)?;
    let mut v = Verdict::new(cfg, regime);
    let tfr = tf_record(&regime, &tf, &geo);
    if write {
        let r: Vec<f64> = (0..=400).map(|i| i as f64 / 400.0).collect();
        let rho: Vec<f64> = r.iter().map(|x| tf.density(*x)).collect();
        write_columns(dir, "tf.csv", &["r", "rho_tf"], &[&r, &rho])?;
    }
    tf_checks(&mut v, &tfr);
    v.tf = Some(tfr);
    if cfg.pipeline == Pipeline::Tf {
        return Ok(v);
    }
    let chain = Chain::build(cfg)?;
    let gv = giant_vortex_record(&chain);
    v.check("winding ratio a 3 sqrt(pi) eps / 2", CheckKind::Asymptotic, gv.winding_ratio, 1.0, Some((gv.winding_ratio - 1.0).abs() < 0.5));
    v.check("radial residual", CheckKind::Identity, gv.residual, cfg.radial_tol.max(1e-8), Some(gv.residual < cfg.radial_tol.max(1e-8)));
    v.giant_vortex = Some(gv);
    if write {
        let rho: Vec<f64> = chain.grid.nodes.iter().map(|x| tf.density(*x)).collect();
        write_columns(dir, "giant_vortex.csv", &["r", "g", "rho_tf"], &[&chain.grid.nodes, &chain.state.g, &rho])?;
    }
    if cfg.pipeline == Pipeline::GiantVortex {
        return Ok(v);
    }
    v.cost = Some(cost_record(&chain));
    if write {
        let c = &chain.cost;
        write_columns(dir, "cost.csv", &["r", "f", "h", "f_tf", "h_tf"], &[&c.r, &c.f, &c.h, &c.f_tf, &c.h_tf])?;
    }
    if cfg.pipeline == Pipeline::Cost {
        return Ok(v);
    }
    v.electro = chain.ring.clone();
    if v.electro.is_none() {
        v.notes.push("electro: no ring radius in this regime".into());
    }
    if cfg.pipeline == Pipeline::Electro {
        return Ok(v);
    }
    let grid = chain.disc_grid(cfg.grid_theta)?;
    if matches!(cfg.pipeline, Pipeline::Trial | Pipeline::VerifyAll) {
        match chain.trial_inputs(cfg).and_then(|inp| build_trial(&inp, &grid)) {
            Ok((_, rep)) => {
                trial_checks(&mut v, &rep);
                v.trial = Some(rep);
            }
            Err(e @ (Error::NoRing(_) | Error::NoVortices(_))) => v.notes.push(format!("trial: {e}")),
            Err(e) if cfg.pipeline == Pipeline::VerifyAll => {
                v.notes.push(format!("trial: {e}"));
                v.passed = false;
            }
            Err(e) => return Err(e),
        }
    }
    if cfg.pipeline == Pipeline::Trial {
        return Ok(v);
    }
    let (wf, mut rec) = run_gp2d(cfg, &chain, &grid)?;
    if let (Some(s), Some(t)) = (rec.sandwich.as_mut(), v.trial.as_ref()) {
        s.upper = Some(t.energy.value);
        s.upper_error_bar = Some(t.energy.error_bar);
    }
    gp2d_checks(&mut v, &rec, &chain);
    if write {
        write_snapshot(dir, &wf.psi, &grid, &regime)?;
        write_vortices(dir, &rec.vortices)?;
    }
    v.gp2d = Some(rec);
    Ok(v)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn tf_checks(v: &mut Verdict, t: &TfRecord) {
    let e = rel(t.e_quadrature, t.e_tf);
    v.check("tf energy quadrature vs closed form", CheckKind::Identity, e, 1e-8, Some(e < 1e-8));
    let m = (t.mass_quadrature - 1.0).abs();
    v.check("tf mass", CheckKind::Identity, m, 1e-10, Some(m < 1e-10));
    let mu = rel(t.mu_quadrature, t.mu_tf);
    v.check("tf chemical potential", CheckKind::Identity, mu, 1e-8, Some(mu < 1e-8));
}

fn trial_checks(v: &mut Verdict, t: &TrialReport) {
    let m = (t.mass - 1.0).abs();
    v.check("trial mass", CheckKind::Identity, m, 1e-8, Some(m < 1e-8));
    let ok = t.core_windings.iter().all(|w| *w == 1);
    v.check("trial core windings +1", CheckKind::Identity, t.core_windings.iter().filter(|w| **w != 1).count() as f64, 0.0, Some(ok));
    let nm = (t.n_cells * t.per_cell) as f64;
    let net = t.outer_circulation - t.inner_circulation;
    let d = (net - 2.0 * PI * nm).abs() / (2.0 * PI * nm);
    v.check("trial net circulation 2 pi N M", CheckKind::Identity, d, 0.01, Some(d < 0.01));
    let q = (t.outer_circulation / (2.0 * PI) - (t.outer_circulation / (2.0 * PI)).round()).abs();
    v.check("trial outer circulation quantized", CheckKind::Identity, q, 0.01, Some(q < 0.01));
    let within = |x: f64| x > 1.0 / 1.5 && x < 1.5;
    v.check("trial kinetic ratio", CheckKind::Asymptotic, t.kinetic_ratio, 1.5, Some(within(t.kinetic_ratio)));
    v.check("trial rotation ratio", CheckKind::Asymptotic, t.rotation_ratio, 1.5, Some(within(t.rotation_ratio)));
    if let Some(c) = &t.cell_split {
        v.check("trial cell splitting", CheckKind::Identity, c.relative_gap, 0.02, Some(c.relative_gap < 0.02));
    }
    v.check("trial reduced energy", CheckKind::Report, t.decoupling.reduced.value, 0.0, None);
}

fn gp2d_checks(v: &mut Verdict, g: &Gp2dRecord, chain: &Chain) {
    v.check("gp2d converged", CheckKind::Report, g.residual, chain.regime.epsilon, Some(g.converged));
    let mass = (g.energy.mass - 1.0).abs();
    v.check("gp2d mass", CheckKind::Identity, mass, 1e-10, Some(mass < 1e-10));
    v.check("gp2d monotone energy", CheckKind::Identity, g.monotone as u8 as f64, 1.0, Some(g.monotone));
    let d = &g.decoupling;
    v.check("decoupling residual within error bar", CheckKind::Identity, d.residual.abs(), d.error_bar, Some(d.residual.abs() <= d.error_bar));
    v.check("bulk vortex count", CheckKind::Report, g.vortices.len() as f64, v.predicted_count() as f64, None);
    if chain.regime.omega1 < 0.0 {
        v.check("supercritical bulk is vortex free", CheckKind::Asymptotic, g.vortices.len() as f64, 0.0, Some(g.vortices.is_empty()));
    }
    if let Some(t) = &v.trial {
        let ok = t.energy.value + t.energy.error_bar >= g.energy.total;
        v.check("variational ordering", CheckKind::Identity, t.energy.value - g.energy.total, -t.energy.error_bar, Some(ok));
    }
    if let Some(s) = &g.sandwich {
        v.check("sandwich margin", CheckKind::Asymptotic, s.margin, 1.0, Some(s.margin <= 1.0));
    }
    if let Some(c) = &g.comparison {
        v.check("dual-norm ratio", CheckKind::Asymptotic, c.intrinsic_ratio, 1.0, Some(c.intrinsic_ratio < 1.0));
        v.check("explicit dual-norm ratio", CheckKind::Report, c.explicit_ratio, 1.0, None);
    }
    v.check("bad-cell fraction", CheckKind::Asymptotic, g.cells.bad_fraction, 0.2, Some(g.cells.bad_fraction < 0.2));
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub omega1: f64,
    pub passed: Option<bool>,
    pub error: Option<String>,
    pub winding_ratio: Option<f64>,
    pub r_star: Option<f64>,
    pub vortex_number: Option<f64>,
    pub predicted_count: usize,
    pub detected_count: Option<usize>,
    pub kinetic_ratio: Option<f64>,
    pub rotation_ratio: Option<f64>,
    pub margin: Option<f64>,
    pub dual_norm_ratio: Option<f64>,
}

/// Whether a column decreases along decreasing `epsilon` at fixed `omega1`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Trend {
    pub column: String,
    pub omega1: f64,
    pub values: Vec<(f64, f64)>,
    pub decreasing: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepTable {
    pub config: ExperimentConfig,
    pub rows: Vec<SweepRow>,
    pub trends: Vec<Trend>,
}

/// Runs every grid point (concurrently, up to `workers`); failing points are kept as failed rows.
pub fn sweep(cfg: &ExperimentConfig) -> Result<SweepTable> {
    cfg.validate()?;
    let grid = cfg.sweep.as_ref().ok_or_else(|| Error::Usage("sweep pipeline needs a [sweep] table".into()))?;
    let points = grid.points();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build().map_err(|e| Error::Usage(e.to_string()))?;
    let rows: Vec<SweepRow> = pool.install(|| {
        points
            .par_iter()
            .map(|&(eps, om1)| {
                let pc = cfg.at_point(eps, om1, grid.point);
                match evaluate(&pc, false) {
                    Ok(v) => sweep_row(eps, om1, &v),
                    Err(e) => SweepRow {
                        epsilon: eps,
                        omega1: om1,
                        passed: Some(false),
                        error: Some(e.to_string()),
                        winding_ratio: None,
                        r_star: None,
                        vortex_number: None,
                        predicted_count: 0,
                        detected_count: None,
                        kinetic_ratio: None,
                        rotation_ratio: None,
                        margin: None,
                        dual_norm_ratio: None,
                    },
                }
            })
            .collect()
    });
    let trends = trends(&rows);
    Ok(SweepTable { config: cfg.clone(), rows, trends })
}

fn sweep_row(eps: f64, om1: f64, v: &Verdict) -> SweepRow {
    let e = v.electro.as_ref();
    SweepRow {
        epsilon: eps,
        omega1: om1,
        passed: Some(v.passed),
        error: (!v.notes.is_empty()).then(|| v.notes.join("; ")),
        winding_ratio: v.giant_vortex.as_ref().map(|g| g.winding_ratio),
        r_star: e.map(|e| e.r_star),
        vortex_number: e.and_then(|e| e.vortex_number).map(|n| n.target),
        predicted_count: v.predicted_count(),
        detected_count: v.vortex_count(),
        kinetic_ratio: v.trial.as_ref().map(|t| t.kinetic_ratio),
        rotation_ratio: v.trial.as_ref().map(|t| t.rotation_ratio),
        margin: v.gp2d.as_ref().and_then(|g| g.sandwich.as_ref()).map(|s| s.margin),
        dual_norm_ratio: v.gp2d.as_ref().and_then(|g| g.comparison.as_ref()).map(|c| c.intrinsic_ratio),
    }
}

fn trends(rows: &[SweepRow]) -> Vec<Trend> {
    let mut omegas: Vec<f64> = rows.iter().map(|r| r.omega1).collect();
    omegas.sort_by(f64::total_cmp);
    omegas.dedup();
    let columns: [(&str, fn(&SweepRow) -> Option<f64>); 5] = [
        ("winding ratio defect", |r| r.winding_ratio.map(|w| (w - 1.0).abs())),
        ("kinetic ratio defect", |r| r.kinetic_ratio.map(|w| (w - 1.0).abs())),
        ("rotation ratio defect", |r| r.rotation_ratio.map(|w| (w - 1.0).abs())),
        ("sandwich margin", |r| r.margin),
        ("dual-norm ratio", |r| r.dual_norm_ratio),
    ];
    let mut out = vec![];
    for om in omegas {
        let mut pts: Vec<&SweepRow> = rows.iter().filter(|r| r.omega1 == om).collect();
        pts.sort_by(|a, b| b.epsilon.total_cmp(&a.epsilon));
        for (name, f) in &columns {
            let values: Vec<(f64, f64)> = pts.iter().filter_map(|r| f(r).map(|x| (r.epsilon, x))).collect();
            if values.len() >= 2 {
                let decreasing = values.windows(2).all(|p| p[1].1 < p[0].1);
                out.push(Trend { column: name.to_string(), omega1: om, values, decreasing });
            }
        }
    }
    out
}

fn write_sweep_csv(dir: &Path, t: &SweepTable) -> Result<()> {
    let mut w = csv::Writer::from_path(dir.join("sweep.csv"))?;
    let opt = |x: Option<f64>| x.map_or(String::new(), |v| format!("{v:?}"));
    w.write_record([
        "epsilon",
        "omega1",
        "passed",
        "winding_ratio",
        "r_star",
        "vortex_number",
        "predicted_count",
        "detected_count",
        "kinetic_ratio",
        "rotation_ratio",
        "margin",
        "dual_norm_ratio",
        "error",
    ])?;
    for r in &t.rows {
        w.write_record([
            format!("{:?}", r.epsilon),
            format!("{:?}", r.omega1),
            r.passed.map_or(String::new(), |p| p.to_string()),
            opt(r.winding_ratio),
            opt(r.r_star),
            opt(r.vortex_number),
            r.predicted_count.to_string(),
            r.detected_count.map_or(String::new(), |c| c.to_string()),
            opt(r.kinetic_ratio),
            opt(r.rotation_ratio),
            opt(r.margin),
            opt(r.dual_norm_ratio),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
