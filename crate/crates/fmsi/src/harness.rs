//! Monte Carlo study orchestration: type-I error, power curves,
//! rho-misspecification, mixture-noise H0 robustness, and the
//! baseline-comparison scenarios. Replicates run on a worker pool and are
//! gathered in index order, so result files are byte-identical for any
//! worker count; wall time goes to stderr only.

use std::fmt;
use std::path::Path;
use std::time::Instant;

use rayon::iter::{IntoParallelIterator, ParallelIterator};
use serde::{Deserialize, Serialize};

use crate::basis::{SplineBasis, WeightSpec};
use crate::error::{Error, Result};
use crate::floatfmt;
use crate::inference::{pairwise_baseline, wald_interaction_test};
use crate::model::{fit_reml, Dataset};
use crate::simgen::{
    generate_cohort, generate_dataset, generate_scenario_cohort, scenario_dataset, CohortTemplate,
    NoiseSpec, ScenarioTemplate, SimConfig, SCENARIOS,
};

/// The canonical fit-rho grid of the misspecification study.
pub const MISSPEC_RHO_GRID: [f64; 10] = [0.1, 0.2, 0.4, 0.9, 1.0, 1.2, 2.0, 8.0, 8.5, 9.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    Type1,
    Power,
    Misspec,
    MixtureH0,
    BaselineCompare,
}

impl fmt::Display for StudyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            StudyKind::Type1 => "type1",
            StudyKind::Power => "power",
            StudyKind::Misspec => "misspec",
            StudyKind::MixtureH0 => "mixture_h0",
            StudyKind::BaselineCompare => "baseline_compare",
        };
        f.write_str(s)
    }
}

fn default_replicates() -> u64 {
    1000
}

fn default_alpha_level() -> f64 {
    0.05
}

fn default_basis_size() -> usize {
    10
}

fn default_window_bp() -> f64 {
    500_000.0
}

fn default_fit_specs() -> Vec<WeightSpec> {
    vec![WeightSpec {
        form: crate::basis::WeightForm::Exponential,
        rho: 1.0,
    }]
}

/// One study: what to generate, how often, and which weight specs to test
/// with. `eta_grid` holds the interaction magnitudes swept by power and
/// misspecification studies, and the pairwise interaction coefficients of
/// the baseline comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySpec {
    pub study_kind: StudyKind,
    #[serde(default = "default_replicates")]
    pub replicates: u64,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default = "default_fit_specs")]
    pub fit_weight_specs: Vec<WeightSpec>,
    #[serde(default)]
    pub eta_grid: Vec<f64>,
    #[serde(default = "default_alpha_level")]
    pub alpha_level: f64,
    /// Worker count; 0 lets the pool pick. Execution infrastructure rather
    /// than part of the study definition, so it is left out of the echoed
    /// spec — artifacts stay byte-identical across worker counts.
    #[serde(default, skip_serializing)]
    pub parallelism: usize,
    /// Spline basis size used at fit time.
    #[serde(default = "default_basis_size")]
    pub basis_size: usize,
    /// Baseline-comparison scenario index in 1..=5.
    #[serde(default)]
    pub scenario: Option<usize>,
    /// Pairwise-baseline window around the SNP in base pairs.
    #[serde(default = "default_window_bp")]
    pub window_bp: f64,
}

impl StudySpec {
    pub fn validate(&self) -> Result<()> {
        if self.replicates < 1 {
            return Err(Error::InvalidConfig("replicates must be >= 1".into()));
        }
        if !(self.alpha_level > 0.0 && self.alpha_level < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha_level must lie in (0,1), got {}",
                self.alpha_level
            )));
        }
        if self.fit_weight_specs.is_empty() {
            return Err(Error::InvalidConfig(
                "need at least one fit weight spec".into(),
            ));
        }
        for ws in &self.fit_weight_specs {
            ws.validate()?;
        }
        if !(self.window_bp > 0.0) || !self.window_bp.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "window_bp must be positive, got {}",
                self.window_bp
            )));
        }
        self.sim.validate()?;
        if !self.eta_grid.iter().all(|e| e.is_finite()) {
            return Err(Error::InvalidConfig(
                "eta_grid entries must be finite".into(),
            ));
        }
        match self.study_kind {
            StudyKind::Type1 => {
                if !self.sim.is_h0() {
                    return Err(Error::InvalidConfig(
                        "type1 study requires all-zero eta in the generation config".into(),
                    ));
                }
            }
            StudyKind::MixtureH0 => {
                if !self.sim.is_h0() {
                    return Err(Error::InvalidConfig(
                        "mixture_h0 study requires all-zero eta in the generation config".into(),
                    ));
                }
                if !matches!(self.sim.noise, NoiseSpec::Mixture(_)) {
                    return Err(Error::InvalidConfig(
                        "mixture_h0 study requires mixture noise".into(),
                    ));
                }
            }
            StudyKind::Power => {
                if self.eta_grid.is_empty() {
                    return Err(Error::InvalidConfig(
                        "power study requires a non-empty eta_grid".into(),
                    ));
                }
            }
            StudyKind::Misspec => {
                if self.eta_grid.is_empty() {
                    return Err(Error::InvalidConfig(
                        "misspec study requires a non-empty eta_grid".into(),
                    ));
                }
                if !self
                    .fit_weight_specs
                    .iter()
                    .any(|ws| *ws == self.sim.weight_spec)
                {
                    return Err(Error::InvalidConfig(
                        "misspec study requires the generation weight spec among the fit specs"
                            .into(),
                    ));
                }
            }
            StudyKind::BaselineCompare => {
                let idx = self.scenario.ok_or_else(|| {
                    Error::InvalidConfig(
                        "baseline_compare study requires a scenario index".into(),
                    )
                })?;
                if !(1..=SCENARIOS.len()).contains(&idx) {
                    return Err(Error::InvalidConfig(format!(
                        "scenario index must lie in 1..={}, got {idx}",
                        SCENARIOS.len()
                    )));
                }
                if SCENARIOS[idx - 1].n_cpgs > self.sim.sites_per_profile {
                    return Err(Error::InvalidConfig(format!(
                        "scenario {idx} interacts with {} CpGs but profiles have only {} sites",
                        SCENARIOS[idx - 1].n_cpgs,
                        self.sim.sites_per_profile
                    )));
                }
                if self.eta_grid.is_empty() {
                    return Err(Error::InvalidConfig(
                        "baseline_compare study requires a non-empty coefficient grid".into(),
                    ));
                }
                if self.fit_weight_specs.len() != 1 {
                    return Err(Error::InvalidConfig(
                        "baseline_compare study uses exactly one fit weight spec".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// A replicate dropped from a study, with the error that excluded it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Exclusion {
    pub replicate: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PvalueRow {
    pub replicate: u64,
    pub fit_spec: String,
    pub p: f64,
}

/// Empirical rejection rate of one fit spec at the nominal level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectionRate {
    pub fit_spec: String,
    pub rate: f64,
    pub se: f64,
    pub replicates_used: usize,
}

/// One power estimate: interaction magnitude, fit label, sample size, the
/// Monte Carlo estimate, and its binomial standard error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerCell {
    pub eta: f64,
    pub rho_fit: String,
    pub n: usize,
    pub power: f64,
    pub se: f64,
    pub replicates_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EtaDrop {
    pub eta: f64,
    pub max_drop: f64,
}

/// Power lost to rho misspecification, relative to the correctly specified
/// fit, maximized over the fit grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MisspecSummary {
    pub true_spec: String,
    pub max_drop: f64,
    pub per_eta: Vec<EtaDrop>,
}

/// Everything a study produced. Serializes deterministically (17-digit
/// floats, fixed field order); wall time is reported on stderr only so
/// re-runs stay byte-identical.
#[derive(Debug, Clone, Serialize)]
pub struct StudyResult {
    pub study_kind: StudyKind,
    pub seed: u64,
    pub replicates: u64,
    pub replicates_used: usize,
    pub excluded: usize,
    pub alpha_level: f64,
    pub exclusions: Vec<Exclusion>,
    pub rejection_rates: Vec<RejectionRate>,
    pub pvalues: Vec<PvalueRow>,
    pub power: Vec<PowerCell>,
    pub misspec: Option<MisspecSummary>,
    pub spec_echo: StudySpec,
    #[serde(skip)]
    pub wall_seconds: f64,
}

impl StudyResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(floatfmt::to_json(self)?)
    }

    pub fn pvalues_csv(&self) -> String {
        let mut out = String::from("replicate,fit_spec,p\n");
        for row in &self.pvalues {
            out.push_str(&format!(
                "{},{},{}\n",
                row.replicate,
                row.fit_spec,
                floatfmt::fmt_f64(row.p)
            ));
        }
        out
    }

    pub fn power_csv(&self) -> String {
        let mut out = String::from("eta,rho_fit,N,power,se\n");
        for c in &self.power {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                floatfmt::fmt_f64(c.eta),
                c.rho_fit,
                c.n,
                floatfmt::fmt_f64(c.power),
                floatfmt::fmt_f64(c.se)
            ));
        }
        out
    }

    /// Uniform quantile pairs for QQ plotting: the study's p-values (pooled
    /// over fit specs) sorted against expected quantiles i/(R+1).
    pub fn qq_csv(&self) -> String {
        let mut ps: Vec<f64> = self.pvalues.iter().map(|r| r.p).collect();
        ps.sort_by(|a, b| a.partial_cmp(b).expect("finite p-values"));
        let denom = (ps.len() + 1) as f64;
        let mut out = String::from("expected_quantile,observed_p\n");
        for (i, &p) in ps.iter().enumerate() {
            out.push_str(&format!(
                "{},{}\n",
                floatfmt::fmt_f64((i + 1) as f64 / denom),
                floatfmt::fmt_f64(p)
            ));
        }
        out
    }
}

/// Write `study_result.json`, `pvalues.csv`, `power.csv`, and `qq.csv` into
/// `dir` (created if missing).
pub fn write_outputs(result: &StudyResult, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("study_result.json"), result.to_json()? + "\n")?;
    std::fs::write(dir.join("pvalues.csv"), result.pvalues_csv())?;
    std::fs::write(dir.join("power.csv"), result.power_csv())?;
    std::fs::write(dir.join("qq.csv"), result.qq_csv())?;
    Ok(())
}

/// Kolmogorov-Smirnov statistic of ascending p-values against Uniform(0,1).
pub fn ks_uniform(sorted: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let above = ((i + 1) as f64 / n - p).abs();
            let below = (p - i as f64 / n).abs();
            above.max(below)
        })
        .fold(0.0, f64::max)
}

/// Binomial standard error of a proportion estimated from `n` replicates.
fn binomial_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Run replicates 0..replicates on a dedicated pool, gather results in index
/// order, and apply the exclusion policy: failed replicates are recorded and
/// dropped; more than 1% of them fails the study.
fn run_pool<T: Send>(
    replicates: u64,
    parallelism: usize,
    run_one: impl Fn(u64) -> Result<T> + Sync,
) -> Result<(Vec<(u64, T)>, Vec<Exclusion>)> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;
    let raw: Vec<(u64, Result<T>)> =
        pool.install(|| (0..replicates).into_par_iter().map(|r| (r, run_one(r))).collect());
    let mut kept = Vec::with_capacity(raw.len());
    let mut exclusions = Vec::new();
    for (r, outcome) in raw {
        match outcome {
            Ok(t) => kept.push((r, t)),
            Err(e) => exclusions.push(Exclusion {
                replicate: r,
                message: e.to_string(),
            }),
        }
    }
    if exclusions.len() * 100 > replicates as usize {
        return Err(Error::ExcessiveExclusions {
            excluded: exclusions.len(),
            total: replicates as usize,
        });
    }
    Ok((kept, exclusions))
}

fn expect_kind(spec: &StudySpec, kind: StudyKind) -> Result<()> {
    if spec.study_kind != kind {
        return Err(Error::InvalidConfig(format!(
            "study spec is {}, expected {kind}",
            spec.study_kind
        )));
    }
    Ok(())
}

fn timed(
    spec: &StudySpec,
    body: impl FnOnce(&StudySpec) -> Result<StudyResult>,
) -> Result<StudyResult> {
    spec.validate()?;
    let start = Instant::now();
    let mut result = body(spec)?;
    result.wall_seconds = start.elapsed().as_secs_f64();
    eprintln!(
        "{} study: {}/{} replicates used ({} excluded) in {:.1}s",
        spec.study_kind,
        result.replicates_used,
        spec.replicates,
        result.excluded,
        result.wall_seconds
    );
    Ok(result)
}

fn empty_result(spec: &StudySpec) -> StudyResult {
    StudyResult {
        study_kind: spec.study_kind,
        seed: spec.sim.seed,
        replicates: spec.replicates,
        replicates_used: 0,
        excluded: 0,
        alpha_level: spec.alpha_level,
        exclusions: Vec::new(),
        rejection_rates: Vec::new(),
        pvalues: Vec::new(),
        power: Vec::new(),
        misspec: None,
        spec_echo: spec.clone(),
        wall_seconds: 0.0,
    }
}

/// Shared engine of the two H0 studies: generate each replicate once, fit it
/// with every weight spec, and collect p-values, rejection rates, and QQ
/// inputs.
fn run_h0_style(spec: &StudySpec) -> Result<StudyResult> {
    let template = CohortTemplate::new(&spec.sim)?;
    let spline = SplineBasis::new(spec.basis_size, 3)?;
    let labels: Vec<String> = spec.fit_weight_specs.iter().map(|w| w.label()).collect();

    let (kept, exclusions) = run_pool(spec.replicates, spec.parallelism, |r| {
        let rep = generate_dataset(&spec.sim, &template, r)?;
        spec.fit_weight_specs
            .iter()
            .map(|ws| {
                let fit = fit_reml(&rep.dataset, &spline, ws)?;
                Ok(wald_interaction_test(&fit)?.p_value)
            })
            .collect::<Result<Vec<f64>>>()
    })?;

    let used = kept.len();
    let mut pvalues = Vec::with_capacity(used * labels.len());
    let mut reject_counts = vec![0usize; labels.len()];
    for (r, ps) in &kept {
        for (j, &p) in ps.iter().enumerate() {
            if p <= spec.alpha_level {
                reject_counts[j] += 1;
            }
            pvalues.push(PvalueRow {
                replicate: *r,
                fit_spec: labels[j].clone(),
                p,
            });
        }
    }
    let rejection_rates = labels
        .iter()
        .zip(&reject_counts)
        .map(|(label, &count)| {
            let rate = count as f64 / used as f64;
            RejectionRate {
                fit_spec: label.clone(),
                rate,
                se: binomial_se(rate, used),
                replicates_used: used,
            }
        })
        .collect();

    Ok(StudyResult {
        replicates_used: used,
        excluded: exclusions.len(),
        exclusions,
        rejection_rates,
        pvalues,
        ..empty_result(spec)
    })
}

/// Type-I error study: H0 data, every fit spec applied to each replicate.
pub fn run_type1_study(spec: &StudySpec) -> Result<StudyResult> {
    expect_kind(spec, StudyKind::Type1)?;
    timed(spec, run_h0_style)
}

/// H0 robustness under mixture-normal errors; same outputs as type1.
pub fn run_mixture_h0_study(spec: &StudySpec) -> Result<StudyResult> {
    expect_kind(spec, StudyKind::MixtureH0)?;
    timed(spec, run_h0_style)
}

/// Correctly specified power study: each fit spec doubles as its generation
/// spec, and each eta in the grid scales all interactions. One cohort per
/// replicate is shared by every (spec, eta) cell, so comparisons are paired.
pub fn run_power_study(spec: &StudySpec) -> Result<StudyResult> {
    expect_kind(spec, StudyKind::Power)?;
    timed(spec, |spec| {
        let template = CohortTemplate::new(&spec.sim)?;
        let spline = SplineBasis::new(spec.basis_size, 3)?;

        let (kept, exclusions) = run_pool(spec.replicates, spec.parallelism, |r| {
            let cohort = generate_cohort(&spec.sim, &template, r)?;
            let mut out = Vec::with_capacity(spec.fit_weight_specs.len() * spec.eta_grid.len());
            for ws in &spec.fit_weight_specs {
                for &eta in &spec.eta_grid {
                    let mut cfg = spec.sim.with_eta(eta);
                    cfg.weight_spec = *ws;
                    let (dataset, _) = cohort.dataset(&cfg)?;
                    let fit = fit_reml(&dataset, &spline, ws)?;
                    out.push(wald_interaction_test(&fit)?.p_value);
                }
            }
            Ok(out)
        })?;

        let used = kept.len();
        let mut power = Vec::new();
        for (si, ws) in spec.fit_weight_specs.iter().enumerate() {
            for (ei, &eta) in spec.eta_grid.iter().enumerate() {
                let cell = si * spec.eta_grid.len() + ei;
                let count = kept
                    .iter()
                    .filter(|(_, ps)| ps[cell] <= spec.alpha_level)
                    .count();
                let rate = count as f64 / used as f64;
                power.push(PowerCell {
                    eta,
                    rho_fit: ws.label(),
                    n: spec.sim.n,
                    power: rate,
                    se: binomial_se(rate, used),
                    replicates_used: used,
                });
            }
        }

        Ok(StudyResult {
            replicates_used: used,
            excluded: exclusions.len(),
            exclusions,
            power,
            ..empty_result(spec)
        })
    })
}

/// Misspecification study: data generated under the one true weight spec,
/// each replicate tested with the whole fit grid at every eta.
pub fn run_misspec_study(spec: &StudySpec) -> Result<StudyResult> {
    expect_kind(spec, StudyKind::Misspec)?;
    timed(spec, |spec| {
        let template = CohortTemplate::new(&spec.sim)?;
        let spline = SplineBasis::new(spec.basis_size, 3)?;

        let (kept, exclusions) = run_pool(spec.replicates, spec.parallelism, |r| {
            let cohort = generate_cohort(&spec.sim, &template, r)?;
            let mut out = Vec::with_capacity(spec.eta_grid.len() * spec.fit_weight_specs.len());
            for &eta in &spec.eta_grid {
                let (dataset, _) = cohort.dataset(&spec.sim.with_eta(eta))?;
                for ws in &spec.fit_weight_specs {
                    let fit = fit_reml(&dataset, &spline, ws)?;
                    out.push(wald_interaction_test(&fit)?.p_value);
                }
            }
            Ok(out)
        })?;

        let used = kept.len();
        let n_specs = spec.fit_weight_specs.len();
        let mut power = Vec::new();
        let mut rates = vec![vec![0.0; n_specs]; spec.eta_grid.len()];
        for (ei, &eta) in spec.eta_grid.iter().enumerate() {
            for (si, ws) in spec.fit_weight_specs.iter().enumerate() {
                let cell = ei * n_specs + si;
                let count = kept
                    .iter()
                    .filter(|(_, ps)| ps[cell] <= spec.alpha_level)
                    .count();
                let rate = count as f64 / used as f64;
                rates[ei][si] = rate;
                power.push(PowerCell {
                    eta,
                    rho_fit: ws.label(),
                    n: spec.sim.n,
                    power: rate,
                    se: binomial_se(rate, used),
                    replicates_used: used,
                });
            }
        }
        let true_idx = spec
            .fit_weight_specs
            .iter()
            .position(|ws| *ws == spec.sim.weight_spec)
            .expect("validated: true spec in fit grid");
        let per_eta: Vec<EtaDrop> = spec
            .eta_grid
            .iter()
            .enumerate()
            .map(|(ei, &eta)| {
                let reference = rates[ei][true_idx];
                let max_drop = rates[ei]
                    .iter()
                    .map(|rate| reference - rate)
                    .fold(f64::NEG_INFINITY, f64::max);
                EtaDrop { eta, max_drop }
            })
            .collect();
        let max_drop = per_eta
            .iter()
            .map(|d| d.max_drop)
            .fold(f64::NEG_INFINITY, f64::max);
        let misspec = Some(MisspecSummary {
            true_spec: spec.sim.weight_spec.label(),
            max_drop,
            per_eta,
        });

        Ok(StudyResult {
            replicates_used: used,
            excluded: exclusions.len(),
            exclusions,
            power,
            misspec,
            ..empty_result(spec)
        })
    })
}

/// Baseline comparison on one pairwise scenario: per coefficient grid point,
/// the proposed test's power and the Bonferroni-corrected pairwise
/// baseline's. Raw levels are identical across the grid, so the curves are
/// smoothed once per replicate and reused with each phenotype.
pub fn run_baseline_comparison(spec: &StudySpec) -> Result<StudyResult> {
    expect_kind(spec, StudyKind::BaselineCompare)?;
    timed(spec, |spec| {
        let scenario = SCENARIOS[spec.scenario.expect("validated") - 1];
        let template = ScenarioTemplate::new(&spec.sim)?;
        let spline = SplineBasis::new(spec.basis_size, 3)?;
        let ws = spec.fit_weight_specs[0];

        let (kept, exclusions) = run_pool(spec.replicates, spec.parallelism, |r| {
            let mut shared: Option<Dataset> = None;
            let mut rows = Vec::with_capacity(spec.eta_grid.len());
            for &gamma in &spec.eta_grid {
                let cohort = generate_scenario_cohort(&spec.sim, &template, &scenario, gamma, r)?;
                let baseline = pairwise_baseline(&cohort, 0, spec.window_bp, spec.alpha_level)?;
                let dataset = match &mut shared {
                    Some(d) => {
                        d.y = cohort.y.clone();
                        d.clone()
                    }
                    None => {
                        let d = scenario_dataset(&cohort, &spec.sim.smoothing)?;
                        shared = Some(d.clone());
                        d
                    }
                };
                let fit = fit_reml(&dataset, &spline, &ws)?;
                let p = wald_interaction_test(&fit)?.p_value;
                rows.push((p <= spec.alpha_level, baseline.rejects()));
            }
            Ok(rows)
        })?;

        let used = kept.len();
        let proposed_label = format!("proposed:{}", ws.label());
        let mut power = Vec::new();
        for (gi, &gamma) in spec.eta_grid.iter().enumerate() {
            let proposed = kept.iter().filter(|(_, rows)| rows[gi].0).count() as f64 / used as f64;
            let base = kept.iter().filter(|(_, rows)| rows[gi].1).count() as f64 / used as f64;
            power.push(PowerCell {
                eta: gamma,
                rho_fit: proposed_label.clone(),
                n: spec.sim.n,
                power: proposed,
                se: binomial_se(proposed, used),
                replicates_used: used,
            });
            power.push(PowerCell {
                eta: gamma,
                rho_fit: "pairwise_bonferroni".into(),
                n: spec.sim.n,
                power: base,
                se: binomial_se(base, used),
                replicates_used: used,
            });
        }

        Ok(StudyResult {
            replicates_used: used,
            excluded: exclusions.len(),
            exclusions,
            power,
            ..empty_result(spec)
        })
    })
}

/// Dispatch on the spec's study kind.
pub fn run_study(spec: &StudySpec) -> Result<StudyResult> {
    match spec.study_kind {
        StudyKind::Type1 => run_type1_study(spec),
        StudyKind::Power => run_power_study(spec),
        StudyKind::Misspec => run_misspec_study(spec),
        StudyKind::MixtureH0 => run_mixture_h0_study(spec),
        StudyKind::BaselineCompare => run_baseline_comparison(spec),
    }
}
