//! Experiment configuration and the runs behind the `comp-outage` binary.
//!
//! Every run is a pure function of an [`ExperimentConfig`]: all randomness
//! flows from the master seed through [`Seeds`], per-user work is keyed by
//! user index, and output rows are emitted in index order, so the bytes
//! produced do not depend on the number of worker threads.

use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{
    self, capacity_cdf_with, siso_outage, Conditioning, LinkProfile, OutageModel, PowerSet,
};
use crate::montecarlo::{self, chunk_rng, empirical_capacity_cdf, sample_nested_sinr, StreamRng};
use crate::network::{
    compute_profile, generate_deployment, sample_user_positions, Area, CountMode, Deployment,
    Position, PropagationParams, ReceivedPowerProfile,
};
use crate::numeric::{derive_seed, CompensatedSum};
use crate::optimize::{
    capacity_at_fixed_outage_model, maximize_goodput_model, select_best_set, Criterion,
    OptimizerSettings, SearchBounds, SetSelection,
};

/// Errors from running an experiment.
#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Model(#[from] crate::Error),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, ExperimentError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeploymentConfig {
    pub density_per_km2: f64,
    pub width_m: f64,
    pub height_m: f64,
    /// Side of the central square where users are placed.
    pub user_region_m: f64,
    pub count_mode: CountMode,
    pub tx_power_w: f64,
    /// Replay this deployment instead of generating one.
    pub file: Option<PathBuf>,
}

impl Default for DeploymentConfig {
    fn default() -> Self {
        DeploymentConfig {
            density_per_km2: 100.0,
            width_m: 3000.0,
            height_m: 3000.0,
            user_region_m: 1000.0,
            count_mode: CountMode::Exact,
            tx_power_w: 1.0,
            file: None,
        }
    }
}

/// Which criteria the set-selection run evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum CriterionMode {
    Goodput,
    FixedOutage,
    #[default]
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub n_users: usize,
    pub n_max: usize,
    pub mc_samples: usize,
    pub rate_grid_points: usize,
    /// Upper end of the capacity grid, bit/s/Hz.
    pub rate_max: f64,
    pub outage_targets: Vec<f64>,
    pub criterion: CriterionMode,
    /// Random instances per invariant suite in `validate`.
    pub validate_instances: usize,
    /// Monte-Carlo samples per oracle check in `validate`.
    pub validate_mc_samples: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n_users: 500,
            n_max: 8,
            mc_samples: 1_000_000,
            rate_grid_points: 64,
            rate_max: 8.0,
            outage_targets: vec![0.01, 0.1, 0.5],
            criterion: CriterionMode::Both,
            validate_instances: 200,
            validate_mc_samples: 200_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkConfig {
    /// Thermal noise power in the unit of the received powers; 0 means
    /// purely interference-limited.
    pub noise_power: f64,
}

impl Default for LinkConfig {
    fn default() -> Self {
        LinkConfig { noise_power: 0.0 }
    }
}

/// Full, declarative description of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub deployment: DeploymentConfig,
    pub propagation: PropagationParams,
    pub link: LinkConfig,
    pub optimizer: SearchBounds,
    pub conditioning: Conditioning,
    pub experiment: RunConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 2010,
            deployment: DeploymentConfig::default(),
            propagation: PropagationParams::default(),
            link: LinkConfig::default(),
            optimizer: SearchBounds::default(),
            conditioning: Conditioning::default(),
            experiment: RunConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| ExperimentError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text).map_err(|e| match e {
            ExperimentError::Config(message) => ExperimentError::Parse {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.experiment;
        let bad = |m: &str| Err(ExperimentError::Config(m.to_string()));
        if e.n_users == 0 || e.n_max == 0 || e.mc_samples == 0 || e.rate_grid_points < 2 {
            return bad("n_users, n_max, mc_samples must be positive and rate_grid_points >= 2");
        }
        if e.validate_instances == 0 || e.validate_mc_samples == 0 {
            return bad("validate_instances and validate_mc_samples must be positive");
        }
        if !(e.rate_max.is_finite() && e.rate_max > 0.0) {
            return bad("rate_max must be positive");
        }
        if e.outage_targets.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
            return bad("outage_targets must lie in (0, 1)");
        }
        if e.criterion != CriterionMode::Goodput && e.outage_targets.is_empty() {
            return bad("fixed-outage criterion needs at least one outage target");
        }
        let d = &self.deployment;
        Area::new(d.width_m, d.height_m)?;
        if !(d.user_region_m > 0.0 && d.density_per_km2 > 0.0 && d.tx_power_w > 0.0) {
            return bad("user_region_m, density_per_km2 and tx_power_w must be positive");
        }
        if !(self.link.noise_power.is_finite() && self.link.noise_power >= 0.0) {
            return bad("noise_power must be non-negative");
        }
        self.propagation.validate()?;
        Ok(())
    }

    pub fn seeds(&self) -> Seeds {
        Seeds::derive(self.seed)
    }

    pub fn optimizer_settings(&self) -> OptimizerSettings {
        OptimizerSettings {
            search: self.optimizer,
            conditioning: self.conditioning,
        }
    }

    pub fn criteria(&self) -> Vec<Criterion> {
        let targets = self
            .experiment
            .outage_targets
            .iter()
            .map(|&p| Criterion::FixedOutage(p));
        match self.experiment.criterion {
            CriterionMode::Goodput => vec![Criterion::Goodput],
            CriterionMode::FixedOutage => targets.collect(),
            CriterionMode::Both => std::iter::once(Criterion::Goodput).chain(targets).collect(),
        }
    }

    pub fn rate_grid(&self) -> Vec<f64> {
        let n = self.experiment.rate_grid_points;
        let step = self.experiment.rate_max / (n - 1) as f64;
        (0..n).map(|i| i as f64 * step).collect()
    }

    /// The configured deployment: loaded from file if one is set, generated
    /// from the deployment seed otherwise.
    pub fn deployment(&self) -> Result<Deployment> {
        match &self.deployment.file {
            Some(path) => load_deployment(path),
            None => Ok(generate_deployment(
                self.deployment.density_per_km2,
                Area::new(self.deployment.width_m, self.deployment.height_m)?,
                self.seeds().deployment,
                self.deployment.count_mode,
                self.deployment.tx_power_w,
            )?),
        }
    }
}

/// Independent seeds derived from the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub master: u64,
    pub deployment: u64,
    pub users: u64,
    pub shadowing: u64,
    pub montecarlo: u64,
    pub fig1_user: u64,
    pub validate: u64,
}

impl Seeds {
    pub fn derive(master: u64) -> Self {
        Seeds {
            master,
            deployment: derive_seed(master, 1),
            users: derive_seed(master, 2),
            shadowing: derive_seed(master, 3),
            montecarlo: derive_seed(master, 4),
            fig1_user: derive_seed(master, 5),
            validate: derive_seed(master, 6),
        }
    }

    pub fn user_shadowing(&self, user: usize) -> u64 {
        derive_seed(self.shadowing, user as u64)
    }
}

/// Resolved configuration written next to every run's outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord<'a> {
    pub command: &'a str,
    pub config: &'a ExperimentConfig,
    pub seeds: Seeds,
}

pub fn load_deployment(path: &Path) -> Result<Deployment> {
    let text = std::fs::read_to_string(path).map_err(|source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let d: Deployment = serde_json::from_str(&text).map_err(|e| ExperimentError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    check_deployment(&d)?;
    Ok(d)
}

pub fn check_deployment(d: &Deployment) -> Result<()> {
    Area::new(d.area.width_m, d.area.height_m)?;
    if d.base_stations.is_empty() {
        return Err(ExperimentError::Config(
            "deployment has no base stations".into(),
        ));
    }
    for bs in &d.base_stations {
        if !d.area.contains(bs.position) || !(bs.tx_power_w.is_finite() && bs.tx_power_w > 0.0) {
            return Err(ExperimentError::Config(format!(
                "base station {} lies outside the area or has an invalid power",
                bs.id
            )));
        }
    }
    Ok(())
}

/// Received power profile of user `index` placed at `position`.
pub fn user_profile(
    cfg: &ExperimentConfig,
    deployment: &Deployment,
    index: usize,
    position: Position,
) -> Result<ReceivedPowerProfile> {
    Ok(compute_profile(
        deployment,
        &cfg.propagation,
        position,
        cfg.seeds().user_shadowing(index),
    )?)
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn csv_string(header: &[String], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| ExperimentError::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Analytic and empirical capacity CDFs of the nested top-`K` sets of one
/// user.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacityCurves {
    pub rates: Vec<f64>,
    /// `analytic[k][i]`: closed-form CDF of set size `k + 1` at `rates[i]`.
    pub analytic: Vec<Vec<f64>>,
    pub empirical: Vec<Vec<f64>>,
    /// Per set size, whether any grid point used the oracle fallback.
    pub fallback: Vec<bool>,
    pub max_gap: Vec<f64>,
}

pub fn capacity_curves(
    powers_desc: &[f64],
    noise_power: f64,
    n_max: usize,
    rate_grid: &[f64],
    mc_samples: usize,
    seed: u64,
    conditioning: &Conditioning,
) -> crate::Result<CapacityCurves> {
    let k_max = n_max.min(powers_desc.len());
    let samples = sample_nested_sinr(powers_desc, k_max, noise_power, seed, mc_samples);
    let analytic_estimates = (1..=k_max)
        .into_par_iter()
        .map(|k| {
            capacity_cdf_with(
                &LinkProfile::top_k(powers_desc, k, noise_power)?,
                rate_grid,
                conditioning,
            )
        })
        .collect::<crate::Result<Vec<_>>>()?;
    let empirical = samples
        .par_iter()
        .map(|s| empirical_capacity_cdf(s, rate_grid))
        .collect::<crate::Result<Vec<_>>>()?;
    let fallback = analytic_estimates
        .iter()
        .map(|curve| curve.iter().any(|e| e.report.fell_back_to_oracle))
        .collect();
    let analytic: Vec<Vec<f64>> = analytic_estimates
        .iter()
        .map(|curve| curve.iter().map(|e| e.probability).collect())
        .collect();
    let max_gap = analytic
        .iter()
        .zip(&empirical)
        .map(|(a, e)| {
            a.iter()
                .zip(e)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(CapacityCurves {
        rates: rate_grid.to_vec(),
        analytic,
        empirical,
        fallback,
        max_gap,
    })
}

/// Agreement tolerance between analytic and empirical capacity CDFs.
pub fn cdf_gap_tolerance(mc_samples: usize) -> f64 {
    4.0 / (mc_samples as f64).sqrt() + 1e-3
}

#[derive(Debug, Clone, Serialize)]
pub struct Fig1Summary {
    pub user_position: Position,
    pub serving_powers: Vec<f64>,
    pub station_count: usize,
    pub mc_samples: usize,
    pub tolerance: f64,
    pub max_gap: Vec<f64>,
    pub fallback: Vec<bool>,
    pub passed: bool,
    pub seeds: Seeds,
}

#[derive(Debug, Clone)]
pub struct Fig1Output {
    pub csv: String,
    pub summary: Fig1Summary,
}

/// Capacity CDF curves for one user drawn uniformly in the central region.
pub fn run_fig1(cfg: &ExperimentConfig) -> Result<Fig1Output> {
    cfg.validate()?;
    let seeds = cfg.seeds();
    let deployment = cfg.deployment()?;
    let user = sample_user_positions(
        &deployment.area,
        cfg.deployment.user_region_m,
        1,
        seeds.fig1_user,
    )[0];
    let profile = compute_profile(&deployment, &cfg.propagation, user, seeds.fig1_user)?;
    let powers = profile.powers();
    let grid = cfg.rate_grid();
    let curves = capacity_curves(
        &powers,
        cfg.link.noise_power,
        cfg.experiment.n_max,
        &grid,
        cfg.experiment.mc_samples,
        seeds.montecarlo,
        &cfg.conditioning,
    )?;
    let k_max = curves.analytic.len();

    let mut header = vec!["rate".to_string()];
    header.extend((1..=k_max).map(|k| format!("analytic_cdf_N{k}")));
    header.extend((1..=k_max).map(|k| format!("empirical_cdf_N{k}")));
    header.extend((1..=k_max).map(|k| format!("fallback_N{k}")));
    let rows: Vec<Vec<String>> = grid
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let mut row = vec![fmt(r)];
            row.extend(curves.analytic.iter().map(|c| fmt(c[i])));
            row.extend(curves.empirical.iter().map(|c| fmt(c[i])));
            row.extend(curves.fallback.iter().map(|&f| u8::from(f).to_string()));
            row
        })
        .collect();

    let tolerance = cdf_gap_tolerance(cfg.experiment.mc_samples);
    let passed = curves
        .max_gap
        .iter()
        .zip(&curves.fallback)
        .all(|(&g, &f)| f || g <= tolerance);
    Ok(Fig1Output {
        csv: csv_string(&header, &rows)?,
        summary: Fig1Summary {
            user_position: user,
            serving_powers: powers[..k_max].to_vec(),
            station_count: powers.len(),
            mc_samples: cfg.experiment.mc_samples,
            tolerance,
            max_gap: curves.max_gap,
            fallback: curves.fallback,
            passed,
            seeds,
        },
    })
}

/// Selections of one user under every configured criterion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UserResult {
    pub user_id: usize,
    pub position: Position,
    pub selections: Vec<(Criterion, SetSelection)>,
}

/// Per-criterion aggregate of a set-selection run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionSummary {
    pub criterion: String,
    pub users: usize,
    pub mean_n_star: f64,
    /// `fraction[n - 1]`: share of users whose best set has `n` stations.
    pub fraction: Vec<f64>,
    pub fallback_users: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Fig2Summary {
    pub n_users: usize,
    pub failed_users: usize,
    pub criteria: Vec<CriterionSummary>,
    pub seeds: Seeds,
}

#[derive(Debug, Clone)]
pub struct Fig2Output {
    pub histogram_csv: String,
    pub users_csv: String,
    pub summary: Fig2Summary,
    pub users: Vec<UserResult>,
}

impl Fig2Output {
    pub fn any_fallback(&self) -> bool {
        self.summary.criteria.iter().any(|c| c.fallback_users > 0)
    }
}

/// Best cooperating set of every user for every criterion, plus the
/// histogram of chosen set sizes.
pub fn run_fig2(cfg: &ExperimentConfig) -> Result<Fig2Output> {
    cfg.validate()?;
    let seeds = cfg.seeds();
    let deployment = cfg.deployment()?;
    let positions = sample_user_positions(
        &deployment.area,
        cfg.deployment.user_region_m,
        cfg.experiment.n_users,
        seeds.users,
    );
    let criteria = cfg.criteria();
    let settings = cfg.optimizer_settings();
    let n_max = cfg.experiment.n_max;

    let outcomes: Vec<Result<UserResult>> = positions
        .par_iter()
        .enumerate()
        .map(|(user_id, &position)| {
            let profile = user_profile(cfg, &deployment, user_id, position)?;
            let candidates = profile.candidates();
            let selections = criteria
                .iter()
                .map(|&c| {
                    select_best_set(&candidates, cfg.link.noise_power, n_max, c, &settings)
                        .map(|s| (c, s))
                })
                .collect::<crate::Result<Vec<_>>>()?;
            Ok(UserResult {
                user_id,
                position,
                selections,
            })
        })
        .collect();

    let mut users = Vec::with_capacity(outcomes.len());
    let mut failed_users = 0;
    for (i, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(u) => users.push(u),
            Err(e) => {
                log::warn!("user {i} excluded: {e}");
                failed_users += 1;
            }
        }
    }

    let mut summaries = Vec::with_capacity(criteria.len());
    let mut hist_rows = Vec::new();
    for (ci, criterion) in criteria.iter().enumerate() {
        let mut counts = vec![0usize; n_max];
        let mut fallback_users = 0;
        let mut n_sum = 0usize;
        for u in &users {
            let sel = &u.selections[ci].1;
            counts[sel.set_size - 1] += 1;
            n_sum += sel.set_size;
            fallback_users += usize::from(sel.any_fallback());
        }
        let total = users.len().max(1) as f64;
        let fraction: Vec<f64> = counts.iter().map(|&c| c as f64 / total).collect();
        for (n, f) in fraction.iter().enumerate() {
            hist_rows.push(vec![criterion.to_string(), (n + 1).to_string(), fmt(*f)]);
        }
        summaries.push(CriterionSummary {
            criterion: criterion.to_string(),
            users: users.len(),
            mean_n_star: n_sum as f64 / total,
            fraction,
            fallback_users,
        });
    }
    let histogram_csv = csv_string(
        &["criterion".into(), "n_star".into(), "fraction".into()],
        &hist_rows,
    )?;

    let mut header: Vec<String> = [
        "user_id",
        "x_m",
        "y_m",
        "criterion",
        "n_star",
        "per_bs_spectral_efficiency",
        "gamma",
        "fallback",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((1..=n_max).map(|k| format!("goodput_K{k}")));
    header.extend((1..=n_max).map(|k| format!("spectral_efficiency_K{k}")));
    let mut user_rows = Vec::new();
    for u in &users {
        for (criterion, sel) in &u.selections {
            let mut row = vec![
                u.user_id.to_string(),
                fmt(u.position.x),
                fmt(u.position.y),
                criterion.to_string(),
                sel.set_size.to_string(),
                fmt(sel.per_bs_spectral_efficiency),
                fmt(sel.chosen().gamma),
                u8::from(sel.any_fallback()).to_string(),
            ];
            let pad = |f: &dyn Fn(usize) -> String| -> Vec<String> {
                (0..n_max)
                    .map(|k| {
                        if k < sel.per_candidate_scores.len() {
                            f(k)
                        } else {
                            String::new()
                        }
                    })
                    .collect()
            };
            row.extend(pad(&|k| fmt(sel.per_candidate_scores[k].goodput)));
            row.extend(pad(&|k| {
                fmt(sel.per_candidate_scores[k].spectral_efficiency)
            }));
            user_rows.push(row);
        }
    }
    let users_csv = csv_string(&header, &user_rows)?;

    Ok(Fig2Output {
        histogram_csv,
        users_csv,
        summary: Fig2Summary {
            n_users: cfg.experiment.n_users,
            failed_users,
            criteria: summaries,
            seeds,
        },
        users,
    })
}

/// Outcome of one invariant suite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteResult {
    pub name: String,
    pub passed: bool,
    pub checked: usize,
    pub failure_count: usize,
    /// First few failures.
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub seed: u64,
    pub suites: Vec<SuiteResult>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ValidateOptions {
    /// Add a suite that evaluates a query with duplicated serving powers.
    pub inject_degenerate: bool,
}

struct Suite {
    name: &'static str,
    checked: usize,
    failures: Vec<String>,
    failure_count: usize,
}

impl Suite {
    fn new(name: &'static str) -> Self {
        Suite {
            name,
            checked: 0,
            failures: Vec::new(),
            failure_count: 0,
        }
    }

    fn check(&mut self, ok: bool, detail: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok {
            self.failure_count += 1;
            if self.failures.len() < 5 {
                self.failures.push(detail());
            }
        }
    }

    fn error(&mut self, e: impl std::fmt::Display) {
        self.check(false, || e.to_string());
    }

    fn finish(self) -> SuiteResult {
        SuiteResult {
            name: self.name.to_string(),
            passed: self.failure_count == 0 && self.checked > 0,
            checked: self.checked,
            failure_count: self.failure_count,
            failures: self.failures,
        }
    }
}

/// `n` powers log-uniform in `[lo, hi]` with pairwise relative gaps of at
/// least `min_gap`, sorted in descending order.
pub fn random_powers(rng: &mut StreamRng, n: usize, lo: f64, hi: f64, min_gap: f64) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    loop {
        let mut v: Vec<f64> = (0..n)
            .map(|_| (a + rng.random::<f64>() * (b - a)).exp())
            .collect();
        v.sort_by(|x, y| y.total_cmp(x));
        if v.windows(2).all(|w| (w[0] - w[1]) / w[0] >= min_gap) {
            return v;
        }
    }
}

/// Random link with 1..=`max_serving` servers and 0..=`max_interferers`
/// interferers, powers in `[lo, 1]`.
pub fn random_link(
    rng: &mut StreamRng,
    max_serving: usize,
    max_interferers: usize,
    lo: f64,
    noise_power: f64,
) -> LinkProfile {
    let ns = rng.random_range(1..=max_serving);
    let ni = rng.random_range(0..=max_interferers);
    let all = random_powers(rng, ns + ni, lo, 1.0, 1e-3);
    // shuffle which powers serve so servers are not always the strongest
    let mut idx: Vec<usize> = (0..all.len()).collect();
    for i in (1..idx.len()).rev() {
        idx.swap(i, rng.random_range(0..=i));
    }
    let serving: Vec<f64> = idx[..ns].iter().map(|&i| all[i]).collect();
    let interf: Vec<f64> = idx[ns..].iter().map(|&i| all[i]).collect();
    LinkProfile::from_slices(&serving, &interf, noise_power).expect("random powers are valid")
}

/// Runs the invariant suites; the report passes only if every suite does.
pub fn run_validate(cfg: &ExperimentConfig, opts: ValidateOptions) -> Result<ValidationReport> {
    cfg.validate()?;
    let seeds = cfg.seeds();
    let n = cfg.experiment.validate_instances;
    let cond = cfg.conditioning;
    let mut suites = Vec::new();

    let mut s = Suite::new("partial_fraction_normalization");
    let mut rng = chunk_rng(seeds.validate, 1);
    for _ in 0..n {
        let size = rng.random_range(2..=8);
        let p = random_powers(&mut rng, size, 1e-6, 1.0, 1e-3);
        match LinkProfile::from_slices(&p, &[], 0.0).and_then(|l| OutageModel::new(&l, &cond)) {
            Ok(m) => {
                let sum: CompensatedSum = m.partial_fraction_weights().into_iter().collect();
                let total = sum.total();
                s.check((total - 1.0).abs() <= 1e-9, || {
                    format!("{p:?}: sum {total}")
                });
            }
            Err(e) => s.error(e),
        }
    }
    suites.push(s.finish());

    let mut s = Suite::new("monotonicity");
    let mut rng = chunk_rng(seeds.validate, 2);
    for _ in 0..n {
        let link = random_link(&mut rng, 8, 20, 1e-2, cfg.link.noise_power);
        if let Err(e) = check_monotonicity(&link, &cond, &mut rng, &mut s) {
            s.error(e);
        }
    }
    suites.push(s.finish());

    let mut s = Suite::new("boundaries");
    let mut rng = chunk_rng(seeds.validate, 3);
    for _ in 0..n {
        let mut link = random_link(&mut rng, 8, 20, 0.1, cfg.link.noise_power);
        if link.is_interference_free() {
            link = LinkProfile::new(link.serving().clone(), link.serving().clone(), 0.0)?;
        }
        let m = OutageModel::new(&link, &cond)?;
        match (m.evaluate(0.0), m.evaluate(1e9)) {
            (Ok(zero), Ok(big)) => {
                s.check(zero.probability == 0.0, || {
                    format!("P_out(0) = {}", zero.probability)
                });
                s.check(big.probability >= 1.0 - 1e-6, || {
                    format!("P_out(1e9) = {}", big.probability)
                });
            }
            (Err(e), _) | (_, Err(e)) => s.error(e),
        }
    }
    suites.push(s.finish());

    let mut s = Suite::new("siso_reduction");
    let mut rng = chunk_rng(seeds.validate, 4);
    for _ in 0..n {
        let link = random_link(&mut rng, 1, 20, 1e-3, cfg.link.noise_power);
        let g = (rng.random::<f64>() * 8.0 - 4.0).exp();
        let p1 = link.serving().as_slice()[0];
        let closed = OutageModel::new(&link, &cond).and_then(|m| m.evaluate(g));
        let direct = siso_outage(p1, link.interferers(), link.noise_power(), g);
        match (closed, direct) {
            (Ok(c), Ok(d)) => s.check((c.probability - d).abs() <= 1e-12, || {
                format!("gamma {g}: closed form {} vs {d}", c.probability)
            }),
            (Err(e), _) | (_, Err(e)) => s.error(e),
        }
    }
    suites.push(s.finish());

    let mut s = Suite::new("scale_invariance");
    let mut rng = chunk_rng(seeds.validate, 5);
    for _ in 0..n {
        let link = random_link(&mut rng, 8, 20, 1e-2, 0.0);
        let c = (rng.random::<f64>() * 20.0 - 10.0).exp();
        let g = (rng.random::<f64>() * 6.0 - 3.0).exp();
        let scaled = LinkProfile::new(
            link.serving().scaled(c)?,
            link.interferers().scaled(c)?,
            0.0,
        )?;
        let a = OutageModel::new(&link, &cond).and_then(|m| m.evaluate(g));
        let b = OutageModel::new(&scaled, &cond).and_then(|m| m.evaluate(g));
        match (a, b) {
            (Ok(a), Ok(b)) => s.check((a.probability - b.probability).abs() <= 1e-12, || {
                format!("scale {c}: {} vs {}", a.probability, b.probability)
            }),
            (Err(e), _) | (_, Err(e)) => s.error(e),
        }
    }
    suites.push(s.finish());

    let mut s = Suite::new("oracle_agreement");
    let mut rng = chunk_rng(seeds.validate, 6);
    let mc_n = cfg.experiment.validate_mc_samples;
    let oracle_cases = (n / 10).max(4);
    for case in 0..oracle_cases {
        let link = random_link(&mut rng, 8, 20, 1e-2, cfg.link.noise_power);
        let samples =
            montecarlo::sample_sinr(&link, derive_seed(seeds.montecarlo, case as u64), mc_n);
        let model = OutageModel::new(&link, &cond)?;
        for g in [0.1, 1.0, 10.0] {
            let analytic = model.evaluate(g)?;
            let empirical = montecarlo::empirical_outage(&samples, g)?;
            let p = analytic.probability;
            let tol = 4.0 * (p * (1.0 - p) / mc_n as f64).sqrt() + 1e-4;
            s.check((p - empirical).abs() <= tol, || {
                format!("gamma {g}: analytic {p} vs empirical {empirical} (tol {tol})")
            });
        }
    }
    suites.push(s.finish());

    let mut s = Suite::new("fixed_outage_consistency");
    let mut rng = chunk_rng(seeds.validate, 7);
    for _ in 0..n {
        let mut link = random_link(&mut rng, 8, 20, 1e-2, cfg.link.noise_power);
        if link.interferers().is_empty() && link.noise_power() == 0.0 {
            link = LinkProfile::new(link.serving().clone(), PowerSet::new(vec![0.5])?, 0.0)?;
        }
        let model = OutageModel::new(&link, &cond)?;
        for &p_o in &cfg.experiment.outage_targets {
            match capacity_at_fixed_outage_model(&model, p_o, cfg.optimizer.gamma_hi) {
                Ok(fo) => {
                    let back = model.evaluate(fo.gamma_o)?.probability;
                    s.check((back - p_o).abs() <= 1e-6, || {
                        format!("target {p_o}: P_out(gamma_o) = {back}")
                    });
                }
                Err(crate::Error::NoSolution { .. }) => {}
                Err(e) => s.error(e),
            }
        }
    }
    suites.push(s.finish());

    let mut s = Suite::new("goodput_sandwich");
    let mut rng = chunk_rng(seeds.validate, 8);
    for _ in 0..(n / 4).max(1) {
        let link = random_link(&mut rng, 8, 20, 1e-2, cfg.link.noise_power);
        let model = OutageModel::new(&link, &cond)?;
        match maximize_goodput_model(&model, &cfg.optimizer) {
            Ok(opt) => s.check(
                opt.goodput >= 0.0
                    && opt.goodput <= opt.rate_star
                    && (opt.goodput - opt.rate_star * (1.0 - opt.outage_at_optimum)).abs() <= 1e-12,
                || format!("{opt:?}"),
            ),
            Err(e) => s.error(e),
        }
    }
    suites.push(s.finish());

    if opts.inject_degenerate {
        let mut s = Suite::new("degenerate_injection");
        let outcome = LinkProfile::from_slices(&[1.0, 1.0], &[0.5], cfg.link.noise_power)
            .and_then(|l| analytic::evaluate_outage(&l.with_threshold(1.0)?, &cond));
        match outcome {
            Ok(est) => s.check(est.report.perturbed, || {
                "duplicated powers were evaluated without perturbation".into()
            }),
            Err(e) => s.error(e),
        }
        suites.push(s.finish());
    }

    Ok(ValidationReport {
        passed: suites.iter().all(|s| s.passed),
        seed: cfg.seed,
        suites,
    })
}

fn check_monotonicity(
    link: &LinkProfile,
    cond: &Conditioning,
    rng: &mut StreamRng,
    s: &mut Suite,
) -> crate::Result<()> {
    const SLACK: f64 = 1e-12;
    let model = OutageModel::new(link, cond)?;
    let mut last = 0.0;
    for g in crate::numeric::log_space(1e-3, 1e3, 25) {
        let p = model.evaluate(g)?.probability;
        s.check(p + SLACK >= last, || format!("gamma {g}: {p} < {last}"));
        last = p;
    }
    let g = (rng.random::<f64>() * 4.0 - 2.0).exp();
    let base = model.evaluate(g)?.probability;
    let bump = 1.0 + rng.random::<f64>();
    if !link.interferers().is_empty() {
        let k = rng.random_range(0..link.interferers().len());
        let mut i = link.interferers().as_slice().to_vec();
        i[k] *= bump;
        let louder = LinkProfile::from_slices(link.serving().as_slice(), &i, link.noise_power())?;
        let p = analytic::evaluate_outage(&louder.with_threshold(g)?, cond)?.probability;
        s.check(p + SLACK >= base, || {
            format!("raising interferer {k}: {p} < {base}")
        });
    }
    let n = rng.random_range(0..link.serving().len());
    let mut sv = link.serving().as_slice().to_vec();
    sv[n] *= bump;
    let stronger = LinkProfile::new(
        PowerSet::new(sv)?,
        link.interferers().clone(),
        link.noise_power(),
    )?;
    let p = analytic::evaluate_outage(&stronger.with_threshold(g)?, cond)?.probability;
    s.check(p <= base + SLACK, || {
        format!("raising server {n}: {p} > {base}")
    });
    Ok(())
}
