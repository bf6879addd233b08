//! Synthetic cohort generation: genotypes, base methylation profiles, the
//! logit-normal replication scheme, and phenotypes under H0/H1 with Gaussian
//! or mixture-normal noise. Everything is a pure function of (config, seed);
//! replicate r draws from the stream `seed ^ r`.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::basis::{self, WeightForm, WeightSpec};
use crate::curves::{
    build_curve_set, uniform_grid, CurveSet, KernelSmoother, MethylationSample, SmoothingConfig,
};
use crate::error::{Error, Result};
use crate::inference::RawCohort;
use crate::model::{check_snp_positions, Dataset};

/// Default per-SNP main effects for the 20-SNP simulation configuration.
pub const DEFAULT_ALPHA: [f64; 20] = [
    1.20, 1.00, 0.80, 0.50, 0.30, 0.90, 1.60, 1.30, 0.67, 0.89, 1.45, 1.40, 0.45, 0.70, 1.35,
    0.95, 0.55, 0.88, 1.30, 0.50,
];

/// Methylation proportions are clamped into [EPS, 1-EPS] before the logit
/// transform, which is undefined at the boundaries.
const LOGIT_CLAMP: f64 = 1e-3;

/// Salt mixed into the seed for template-level draws (base profiles), keeping
/// them disjoint from the per-replicate streams `seed ^ r`.
const TEMPLATE_SALT: u64 = 0x7465_6d70_6c61_7465;

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn clamp_level(p: f64) -> f64 {
    p.clamp(LOGIT_CLAMP, 1.0 - LOGIT_CLAMP)
}

/// Named functional main-effect coefficient delta(t) on the scaled region.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaSpec {
    /// cos(3 pi t), the shape used throughout the simulation studies.
    #[default]
    #[serde(rename = "cos3pi")]
    Cos3Pi,
    Zero,
}

impl DeltaSpec {
    pub fn eval(self, t: f64) -> f64 {
        match self {
            DeltaSpec::Cos3Pi => (3.0 * PI * t).cos(),
            DeltaSpec::Zero => 0.0,
        }
    }
}

/// Two-component normal mixture for the error term. The defaults are the
/// components fitted to real-data residuals; draws are used exactly as
/// sampled, with no rescaling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MixtureNoise {
    pub mean1: f64,
    pub var1: f64,
    pub weight1: f64,
    pub mean2: f64,
    pub var2: f64,
    pub weight2: f64,
}

impl Default for MixtureNoise {
    fn default() -> Self {
        Self {
            mean1: -1.256,
            var1: 0.2559,
            weight1: 0.75,
            mean2: 3.815,
            var2: 0.4684,
            weight2: 0.25,
        }
    }
}

impl MixtureNoise {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.mean1,
            self.var1,
            self.weight1,
            self.mean2,
            self.var2,
            self.weight2,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidConfig(
                "mixture parameters must be finite".into(),
            ));
        }
        if !(self.weight1 > 0.0 && self.weight2 > 0.0)
            || (self.weight1 + self.weight2 - 1.0).abs() > 1e-9
        {
            return Err(Error::InvalidConfig(format!(
                "mixture weights must be positive and sum to 1, got {} and {}",
                self.weight1, self.weight2
            )));
        }
        if !(self.var1 > 0.0 && self.var2 > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "mixture variances must be positive, got {} and {}",
                self.var1, self.var2
            )));
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        self.weight1 * self.mean1 + self.weight2 * self.mean2
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.weight1 * (self.var1 + self.mean1 * self.mean1)
            + self.weight2 * (self.var2 + self.mean2 * self.mean2)
            - m * m
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        let u: f64 = rng.gen();
        let (mean, var) = if u < self.weight1 {
            (self.mean1, self.var1)
        } else {
            (self.mean2, self.var2)
        };
        let z: f64 = rng.sample(StandardNormal);
        mean + var.sqrt() * z
    }
}

/// Error-term family: Gaussian calibrated to signal-to-noise ratio 10, or an
/// explicit normal mixture.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseSpec {
    #[default]
    GaussianSnr10,
    Mixture(MixtureNoise),
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            NoiseSpec::GaussianSnr10 => Ok(()),
            NoiseSpec::Mixture(m) => m.validate(),
        }
    }
}

/// Full generation recipe for one synthetic cohort.
///
/// The replication layout spreads `n` individuals round-robin over the base
/// profiles; each individual is a logit-normal replicate of its profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// Sample size N.
    pub n: usize,
    /// SNP count D.
    pub d: usize,
    /// Minor-allele-frequency range (lo, hi) with 0 < lo <= hi < 0.5.
    pub maf_range: (f64, f64),
    /// Intercept zeta_0.
    pub zeta0: f64,
    /// Covariate coefficients; the length sets S.
    pub zeta: Vec<f64>,
    /// Covariates are drawn i.i.d. N(0, covariate_sd^2).
    pub covariate_sd: f64,
    /// Per-SNP main effects, length D.
    pub alpha: Vec<f64>,
    /// Per-SNP interaction magnitudes, length D; all zeros encodes H0.
    pub eta: Vec<f64>,
    /// Functional main-effect coefficient delta(t).
    pub delta_spec: DeltaSpec,
    /// Weight family and rho used to generate the interaction term.
    pub weight_spec: WeightSpec,
    pub noise: NoiseSpec,
    pub seed: u64,
    /// Scale sigma_t >= 0 of the shared logit shift drawn per individual.
    pub replication_sigma_t: f64,
    /// Number of distinct base methylation profiles.
    pub base_profiles: usize,
    /// Scale of each profile's shape deviation from the shared regional
    /// backbone, relative to the backbone's own amplitude. Small values mimic
    /// replicates of one genomic region, whose methylation pattern is largely
    /// conserved across individuals.
    pub profile_shape_sd: f64,
    /// CpG sites per base profile.
    pub sites_per_profile: usize,
    /// Synthetic genomic region in base pairs.
    pub region_bp: (f64, f64),
    pub smoothing: SmoothingConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n: 200,
            d: 20,
            maf_range: (0.05, 0.2),
            zeta0: 0.0,
            zeta: vec![0.3],
            covariate_sd: 0.1,
            alpha: DEFAULT_ALPHA.to_vec(),
            eta: vec![0.0; 20],
            delta_spec: DeltaSpec::Cos3Pi,
            weight_spec: WeightSpec {
                form: WeightForm::Exponential,
                rho: 1.0,
            },
            noise: NoiseSpec::GaussianSnr10,
            seed: 1,
            replication_sigma_t: 0.5,
            base_profiles: 8,
            profile_shape_sd: 0.3,
            sites_per_profile: 400,
            region_bp: (10_000_000.0, 10_270_000.0),
            smoothing: SmoothingConfig::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.maf_range;
        if !(lo > 0.0 && lo <= hi && hi < 0.5) {
            return Err(Error::InvalidConfig(format!(
                "maf_range must satisfy 0 < lo <= hi < 0.5, got ({lo}, {hi})"
            )));
        }
        if self.n < 8 {
            return Err(Error::InvalidConfig(format!(
                "sample size must be >= 8, got {}",
                self.n
            )));
        }
        if self.d < 1 {
            return Err(Error::InvalidConfig("need at least one SNP".into()));
        }
        if self.alpha.len() != self.d || self.eta.len() != self.d {
            return Err(Error::InvalidConfig(format!(
                "alpha and eta must have length d = {}, got {} and {}",
                self.d,
                self.alpha.len(),
                self.eta.len()
            )));
        }
        let coef_finite = self.zeta0.is_finite()
            && self.zeta.iter().all(|v| v.is_finite())
            && self.alpha.iter().all(|v| v.is_finite())
            && self.eta.iter().all(|v| v.is_finite());
        if !coef_finite {
            return Err(Error::InvalidConfig(
                "model coefficients must be finite".into(),
            ));
        }
        if !(self.covariate_sd >= 0.0) || !self.covariate_sd.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "covariate_sd must be >= 0, got {}",
                self.covariate_sd
            )));
        }
        if !(self.replication_sigma_t >= 0.0) || !self.replication_sigma_t.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "replication_sigma_t must be >= 0, got {}",
                self.replication_sigma_t
            )));
        }
        if self.base_profiles < 1 {
            return Err(Error::InvalidConfig(
                "need at least one base profile".into(),
            ));
        }
        if !(self.profile_shape_sd >= 0.0) || !self.profile_shape_sd.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "profile_shape_sd must be >= 0, got {}",
                self.profile_shape_sd
            )));
        }
        let (rlo, rhi) = self.region_bp;
        if !(rlo.is_finite() && rhi.is_finite() && rlo < rhi) {
            return Err(Error::InvalidConfig(format!(
                "region_bp must be a finite increasing pair, got ({rlo}, {rhi})"
            )));
        }
        self.weight_spec.validate()?;
        self.noise.validate()?;
        self.smoothing.validate()?;
        Ok(())
    }

    /// True when every interaction magnitude is zero.
    pub fn is_h0(&self) -> bool {
        self.eta.iter().all(|&e| e == 0.0)
    }

    /// Copy with every eta set to the one magnitude (the power-study knob).
    pub fn with_eta(&self, eta: f64) -> Self {
        let mut out = self.clone();
        out.eta = vec![eta; self.d];
        out
    }
}

/// Allele counts for given per-SNP frequencies: G_id = Bern(f_d) + Bern(f_d).
pub fn genotypes_for_mafs(n: usize, mafs: &[f64], rng: &mut impl Rng) -> Result<DMatrix<f64>> {
    for &f in mafs {
        if !f.is_finite() || !(0.0..=1.0).contains(&f) {
            return Err(Error::InvalidConfig(format!(
                "allele frequency must lie in [0,1], got {f}"
            )));
        }
    }
    let mut g = DMatrix::zeros(n, mafs.len());
    for (col, &f) in mafs.iter().enumerate() {
        for row in 0..n {
            let a1 = u8::from(rng.gen::<f64>() < f);
            let a2 = u8::from(rng.gen::<f64>() < f);
            g[(row, col)] = f64::from(a1 + a2);
        }
    }
    Ok(g)
}

/// Genotype matrix plus realized frequencies: per SNP, draw f ~ Uniform(lo,
/// hi) once, then the allele counts for the whole column.
pub fn simulate_genotypes(
    n: usize,
    d: usize,
    maf_range: (f64, f64),
    rng: &mut impl Rng,
) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let (lo, hi) = maf_range;
    if !(lo > 0.0 && lo <= hi && hi < 0.5) {
        return Err(Error::InvalidConfig(format!(
            "maf_range must satisfy 0 < lo <= hi < 0.5, got ({lo}, {hi})"
        )));
    }
    let mut g = DMatrix::zeros(n, d);
    let mut mafs = Vec::with_capacity(d);
    for col in 0..d {
        let f = rng.gen_range(lo..=hi);
        mafs.push(f);
        for row in 0..n {
            let a1 = u8::from(rng.gen::<f64>() < f);
            let a2 = u8::from(rng.gen::<f64>() < f);
            g[(row, col)] = f64::from(a1 + a2);
        }
    }
    Ok((g, mafs))
}

/// A random five-harmonic latent curve on [0,1]: intercept plus sinusoids at
/// frequencies 1..=5 with independent amplitudes and phases. `scale` shrinks
/// every amplitude, intercept included.
fn random_harmonic_curve(scale: f64, rng: &mut impl Rng) -> HarmonicCurve {
    let intercept = 0.5 * scale * rng.sample::<f64, _>(StandardNormal);
    let mut harmonics = [(0.0, 0.0); 5];
    for (k, h) in harmonics.iter_mut().enumerate() {
        let sd = scale * (0.64 / (k + 1) as f64).sqrt();
        *h = (
            sd * rng.sample::<f64, _>(StandardNormal),
            rng.gen_range(0.0..2.0 * PI),
        );
    }
    HarmonicCurve {
        intercept,
        harmonics,
    }
}

struct HarmonicCurve {
    intercept: f64,
    harmonics: [(f64, f64); 5],
}

impl HarmonicCurve {
    fn eval(&self, tau: f64) -> f64 {
        self.intercept
            + self
                .harmonics
                .iter()
                .enumerate()
                .map(|(k, &(amp, phase))| amp * (2.0 * PI * (k + 1) as f64 * tau + phase).sin())
                .sum::<f64>()
    }
}

/// Synthetic base methylation profiles: sorted distinct integer positions
/// drawn uniformly over the region, levels from a smooth latent function
/// through the logistic, giving levels in (0,1) with strong spatial
/// correlation. All profiles share one five-harmonic backbone; each adds its
/// own five-harmonic deviation with amplitudes shrunk by `shape_sd`, so
/// profiles look like the same genomic region measured in different people
/// (methylation patterns of a region are largely conserved) rather than
/// unrelated curves.
pub fn synthesize_base_profiles(
    count: usize,
    sites_per_profile: usize,
    region_bp: (f64, f64),
    shape_sd: f64,
    rng: &mut impl Rng,
) -> Result<Vec<MethylationSample>> {
    if count < 1 {
        return Err(Error::InvalidConfig(
            "base profile count must be >= 1".into(),
        ));
    }
    if sites_per_profile < 50 {
        return Err(Error::InvalidConfig(format!(
            "sites_per_profile must be >= 50, got {sites_per_profile}"
        )));
    }
    if !(shape_sd >= 0.0) || !shape_sd.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "shape_sd must be >= 0, got {shape_sd}"
        )));
    }
    let (lo, hi) = region_bp;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidConfig(format!(
            "region_bp must be a finite increasing pair, got ({lo}, {hi})"
        )));
    }
    let (lo_i, hi_i) = (lo.ceil() as i64, hi.floor() as i64);
    if hi_i - lo_i < 2 * sites_per_profile as i64 {
        return Err(Error::InvalidConfig(format!(
            "region ({lo}, {hi}) too narrow for {sites_per_profile} distinct integer positions"
        )));
    }
    let span = hi - lo;
    let backbone = random_harmonic_curve(1.0, rng);
    let mut profiles = Vec::with_capacity(count);
    for p in 0..count {
        let mut chosen = BTreeSet::new();
        while chosen.len() < sites_per_profile {
            chosen.insert(rng.gen_range(lo_i..=hi_i));
        }
        let positions: Vec<f64> = chosen.into_iter().map(|x| x as f64).collect();
        let deviation = random_harmonic_curve(shape_sd, rng);
        let levels: Vec<f64> = positions
            .iter()
            .map(|&pos| {
                let tau = (pos - lo) / span;
                logistic(backbone.eval(tau) + deviation.eval(tau))
            })
            .collect();
        profiles.push(MethylationSample::new(format!("base{p}"), positions, levels)?);
    }
    Ok(profiles)
}

/// Apply a shared logit-scale shift to clamped levels. A zero shift returns
/// the clamped levels bit-for-bit (the logit/logistic round trip is not exact
/// in floats).
fn shifted_levels(clamped: &[f64], logits: &[f64], vartheta: f64) -> Vec<f64> {
    if vartheta == 0.0 {
        clamped.to_vec()
    } else {
        logits.iter().map(|&x| logistic(x + vartheta)).collect()
    }
}

/// Logit-normal replicates of a base sample: per copy, one shared shift
/// vartheta ~ N(0, sigma_t^2) added on the logit scale; positions are copied
/// unchanged.
pub fn replicate_methylation(
    base: &MethylationSample,
    n_copies: usize,
    sigma_t: f64,
    rng: &mut impl Rng,
) -> Result<Vec<MethylationSample>> {
    if !(sigma_t >= 0.0) || !sigma_t.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "sigma_t must be >= 0, got {sigma_t}"
        )));
    }
    let clamped: Vec<f64> = base.levels().iter().map(|&p| clamp_level(p)).collect();
    let logits: Vec<f64> = clamped.iter().map(|&p| logit(p)).collect();
    let mut copies = Vec::with_capacity(n_copies);
    for c in 0..n_copies {
        let vartheta = sigma_t * rng.sample::<f64, _>(StandardNormal);
        copies.push(MethylationSample::new(
            format!("{}-r{}", base.id(), c + 1),
            base.positions().to_vec(),
            shifted_levels(&clamped, &logits, vartheta),
        )?);
    }
    Ok(copies)
}

/// Add noise to a signal vector; returns (y, noise variance). Gaussian noise
/// is calibrated so Var(signal) / sigma^2 = 10 with the empirical variance in
/// the numerator; mixture draws are used as sampled.
fn apply_noise(
    signal: &DVector<f64>,
    noise: &NoiseSpec,
    rng: &mut impl Rng,
) -> Result<(DVector<f64>, f64)> {
    let n = signal.len();
    let mut y = signal.clone();
    match noise {
        NoiseSpec::GaussianSnr10 => {
            if n < 2 {
                return Err(Error::InvalidConfig(
                    "need at least 2 individuals for snr-calibrated noise".into(),
                ));
            }
            let mean = signal.mean();
            let var = signal.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>()
                / (n as f64 - 1.0);
            if !var.is_finite() || var <= f64::EPSILON * (1.0 + mean * mean) {
                return Err(Error::ZeroSignalVariance);
            }
            let sigma2 = var / 10.0;
            let sd = sigma2.sqrt();
            for v in y.iter_mut() {
                *v += sd * rng.sample::<f64, _>(StandardNormal);
            }
            Ok((y, sigma2))
        }
        NoiseSpec::Mixture(m) => {
            m.validate()?;
            for v in y.iter_mut() {
                *v += m.sample(rng);
            }
            Ok((y, m.variance()))
        }
    }
}

/// Phenotype draw: realized y, the noiseless signal, and the noise variance
/// used (empirical-variance/10 for Gaussian, the mixture variance otherwise).
#[derive(Debug, Clone)]
pub struct PhenotypeDraw {
    pub y: DVector<f64>,
    pub signal: DVector<f64>,
    pub noise_variance: f64,
}

/// Assemble the generating model
///   y_i = zeta0 + w_i'zeta + g_i'alpha + Int delta(t) Pi_i(t) dt
///         + sum_d eta_d g_id Int psi_rho(|t - u_d|) Pi_i(t) dt + eps_i
/// with trapezoid-rule integrals on the curve grid. The noise draws consume
/// the same stream positions whatever eta is, so phenotypes generated from a
/// shared (seed, replicate) differ across eta only through the signal.
pub fn simulate_phenotype(
    curves: &CurveSet,
    g: &DMatrix<f64>,
    w: &DMatrix<f64>,
    snp_positions: &[f64],
    config: &SimConfig,
    rng: &mut impl Rng,
) -> Result<PhenotypeDraw> {
    config.validate()?;
    let n = curves.n_individuals();
    if g.nrows() != n || g.ncols() != config.d {
        return Err(Error::InvalidConfig(format!(
            "genotypes are {}x{}, expected {}x{}",
            g.nrows(),
            g.ncols(),
            n,
            config.d
        )));
    }
    if w.nrows() != n || w.ncols() != config.zeta.len() {
        return Err(Error::InvalidConfig(format!(
            "covariates are {}x{}, expected {}x{}",
            w.nrows(),
            w.ncols(),
            n,
            config.zeta.len()
        )));
    }
    if snp_positions.len() != config.d {
        return Err(Error::LengthMismatch {
            what: "snp positions vs d",
            left: snp_positions.len(),
            right: config.d,
        });
    }
    check_snp_positions(snp_positions)?;

    let grid = &curves.grid;
    let trap = basis::trapezoid_weights(grid)?;
    let delta_col = DVector::from_iterator(
        grid.len(),
        grid.iter()
            .zip(&trap)
            .map(|(&t, &tw)| tw * config.delta_spec.eval(t)),
    );
    let mut signal = &curves.values * delta_col;
    signal += g * DVector::from_column_slice(&config.alpha);
    if !config.zeta.is_empty() {
        signal += w * DVector::from_column_slice(&config.zeta);
    }
    signal.add_scalar_mut(config.zeta0);
    if !config.is_h0() {
        let mut psi = basis::weight_matrix(&config.weight_spec, snp_positions, grid)?;
        for (row, &tw) in trap.iter().enumerate() {
            psi.row_mut(row).scale_mut(tw);
        }
        let omega = &curves.values * psi;
        let k = g.component_mul(&omega);
        signal += k * DVector::from_column_slice(&config.eta);
    }

    let (y, noise_variance) = apply_noise(&signal, &config.noise, rng)?;
    Ok(PhenotypeDraw {
        y,
        signal,
        noise_variance,
    })
}

/// One base profile with its clamped levels, their logits, and the
/// precomputed smoother shared by every replicate of the profile.
#[derive(Debug, Clone)]
struct BaseCurve {
    id: String,
    positions: Vec<f64>,
    clamped: Vec<f64>,
    logits: Vec<f64>,
    smoother: KernelSmoother,
}

/// Per-study fixed quantities: the base profiles and one smoother per
/// profile on a shared evaluation grid. Building the template is the
/// expensive step; per-replicate generation reuses it.
#[derive(Debug, Clone)]
pub struct CohortTemplate {
    bases: Vec<BaseCurve>,
    grid: Vec<f64>,
    scaling: (f64, f64),
}

impl CohortTemplate {
    /// Draw the base profiles from the template stream (`seed ^` a fixed
    /// salt, disjoint from every replicate stream) and precompute smoothers.
    pub fn new(config: &SimConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ TEMPLATE_SALT);
        let profiles = synthesize_base_profiles(
            config.base_profiles,
            config.sites_per_profile,
            config.region_bp,
            config.profile_shape_sd,
            &mut rng,
        )?;
        let lo = profiles
            .iter()
            .map(|s| s.positions()[0])
            .fold(f64::INFINITY, f64::min);
        let hi = profiles
            .iter()
            .map(|s| *s.positions().last().expect("non-empty profile"))
            .fold(f64::NEG_INFINITY, f64::max);
        if !(lo < hi) {
            return Err(Error::DegenerateRegion(lo));
        }
        let grid = uniform_grid(config.smoothing.grid_size);
        let grid_bp: Vec<f64> = grid.iter().map(|&t| lo + t * (hi - lo)).collect();
        let bases = profiles
            .iter()
            .map(|p| -> Result<BaseCurve> {
                let clamped: Vec<f64> = p.levels().iter().map(|&v| clamp_level(v)).collect();
                let logits = clamped.iter().map(|&v| logit(v)).collect();
                Ok(BaseCurve {
                    id: p.id().to_string(),
                    positions: p.positions().to_vec(),
                    clamped,
                    logits,
                    smoother: KernelSmoother::new(p.positions(), &grid_bp, &config.smoothing)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            bases,
            grid,
            scaling: (lo, hi),
        })
    }

    pub fn n_profiles(&self) -> usize {
        self.bases.len()
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Base-pair range mapped onto the scaled grid.
    pub fn scaling(&self) -> (f64, f64) {
        self.scaling
    }

    /// The smoother shared by all replicates of one profile.
    pub fn smoother(&self, profile: usize) -> &KernelSmoother {
        &self.bases[profile].smoother
    }

    fn matches(&self, config: &SimConfig) -> bool {
        self.bases.len() == config.base_profiles
            && self.grid.len() == config.smoothing.grid_size
            && self
                .bases
                .iter()
                .all(|b| b.positions.len() == config.sites_per_profile)
    }
}

/// One generated replicate: the model-ready dataset, the raw (pre-smoothing)
/// samples behind it, and realized generation-side quantities.
#[derive(Debug, Clone)]
pub struct GeneratedReplicate {
    pub dataset: Dataset,
    pub samples: Vec<MethylationSample>,
    pub mafs: Vec<f64>,
    pub noise_variance: f64,
}

/// The coefficient-independent part of one replicate — curves, genotypes,
/// covariates — plus the RNG state the noise draws start from. Phenotypes
/// for any number of coefficient configurations can be laid over one cohort;
/// each call replays the noise stream from the same point, so sweeps over
/// eta or the generation weight stay paired.
#[derive(Debug, Clone)]
pub struct CohortDraw {
    pub ids: Vec<String>,
    pub g: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub snp_positions: Vec<f64>,
    pub curves: CurveSet,
    pub samples: Vec<MethylationSample>,
    pub mafs: Vec<f64>,
    noise_rng: ChaCha8Rng,
}

impl CohortDraw {
    /// Phenotype under `config`'s coefficients, replaying the noise stream.
    ///
    /// `config` must describe the same cohort shape (n, d, covariate count)
    /// the cohort was drawn with; coefficients, weight spec, and noise family
    /// are free to differ.
    pub fn phenotype(&self, config: &SimConfig) -> Result<PhenotypeDraw> {
        let mut rng = self.noise_rng.clone();
        simulate_phenotype(
            &self.curves,
            &self.g,
            &self.w,
            &self.snp_positions,
            config,
            &mut rng,
        )
    }

    /// Model-ready dataset under `config`'s coefficients, plus the realized
    /// noise variance.
    pub fn dataset(&self, config: &SimConfig) -> Result<(Dataset, f64)> {
        let draw = self.phenotype(config)?;
        Ok((
            Dataset {
                ids: self.ids.clone(),
                y: draw.y,
                w: self.w.clone(),
                g: self.g.clone(),
                snp_positions: self.snp_positions.clone(),
                curves: self.curves.clone(),
            },
            draw.noise_variance,
        ))
    }
}

/// Draw the coefficient-independent part of replicate `r`: SNP positions,
/// genotypes, covariates, and replication shifts, in that fixed order, from
/// the stream `seed ^ r`; then smooth the shifted profiles into curves.
pub fn generate_cohort(
    config: &SimConfig,
    template: &CohortTemplate,
    replicate: u64,
) -> Result<CohortDraw> {
    config.validate()?;
    if !template.matches(config) {
        return Err(Error::InvalidConfig(
            "cohort template was built from a different configuration".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ replicate);

    let snp_positions: Vec<f64> = (0..config.d).map(|_| rng.gen_range(0.0..1.0)).collect();
    let (g, mafs) = simulate_genotypes(config.n, config.d, config.maf_range, &mut rng)?;
    let s = config.zeta.len();
    let mut w = DMatrix::zeros(config.n, s);
    for i in 0..config.n {
        for j in 0..s {
            w[(i, j)] = config.covariate_sd * rng.sample::<f64, _>(StandardNormal);
        }
    }
    let varthetas: Vec<f64> = (0..config.n)
        .map(|_| config.replication_sigma_t * rng.sample::<f64, _>(StandardNormal))
        .collect();

    // Round-robin over profiles; smooth each profile's members in one block.
    let n_profiles = template.bases.len();
    let mut values = DMatrix::zeros(config.n, template.grid.len());
    let mut ids = vec![String::new(); config.n];
    let mut samples: Vec<Option<MethylationSample>> = vec![None; config.n];
    for (p, base) in template.bases.iter().enumerate() {
        let members: Vec<usize> = (p..config.n).step_by(n_profiles).collect();
        if members.is_empty() {
            continue;
        }
        let mut levels = DMatrix::zeros(base.positions.len(), members.len());
        for (c, &i) in members.iter().enumerate() {
            let shifted = shifted_levels(&base.clamped, &base.logits, varthetas[i]);
            ids[i] = format!("{}-i{:05}", base.id, i);
            samples[i] = Some(MethylationSample::new(
                ids[i].clone(),
                base.positions.clone(),
                shifted.clone(),
            )?);
            levels.column_mut(c).copy_from_slice(&shifted);
        }
        let smoothed = base.smoother.apply_block(&levels)?;
        for (c, &i) in members.iter().enumerate() {
            values.row_mut(i).tr_copy_from(&smoothed.column(c));
        }
    }
    let samples: Vec<MethylationSample> = samples
        .into_iter()
        .map(|s| s.expect("every individual assigned to a profile"))
        .collect();
    let curves = CurveSet {
        ids: ids.clone(),
        grid: template.grid.clone(),
        values,
        scaling: template.scaling,
    };

    Ok(CohortDraw {
        ids,
        g,
        w,
        snp_positions,
        curves,
        samples,
        mafs,
        noise_rng: rng,
    })
}

/// Generate replicate `r` of the cohort described by `config`, reusing the
/// template's base profiles and smoothers.
///
/// Uses the stream `seed ^ r`. The draw order — SNP positions, genotypes,
/// covariates, replication shifts, noise — is fixed and independent of eta,
/// so datasets generated with different interaction strengths from the same
/// (seed, r) share every other draw (paired comparisons).
pub fn generate_dataset(
    config: &SimConfig,
    template: &CohortTemplate,
    replicate: u64,
) -> Result<GeneratedReplicate> {
    let cohort = generate_cohort(config, template, replicate)?;
    let (dataset, noise_variance) = cohort.dataset(config)?;
    Ok(GeneratedReplicate {
        dataset,
        samples: cohort.samples,
        mafs: cohort.mafs,
        noise_variance,
    })
}

/// True-coefficient table for one pairwise-generation scenario of the
/// baseline comparison: y is generated from a plain linear model in age,
/// sex, one SNP, and the `n_cpgs` raw methylation levels nearest the SNP,
/// plus SNP-by-level interactions whose common coefficient the study sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub index: usize,
    /// Number of interacting CpG sites (the nearest ones to the SNP).
    pub n_cpgs: usize,
    pub intercept: f64,
    pub age: f64,
    pub sex: f64,
    pub snp: f64,
    /// Main-effect coefficient shared by every interacting CpG level.
    pub cpg: f64,
}

/// The five baseline-comparison scenarios.
pub const SCENARIOS: [ScenarioSpec; 5] = [
    ScenarioSpec {
        index: 1,
        n_cpgs: 1,
        intercept: 5.0,
        age: 0.0798,
        sex: 0.1521,
        snp: -3.0,
        cpg: -5.35744,
    },
    ScenarioSpec {
        index: 2,
        n_cpgs: 10,
        intercept: 5.16,
        age: 0.078,
        sex: 0.225,
        snp: -0.5,
        cpg: -0.2,
    },
    ScenarioSpec {
        index: 3,
        n_cpgs: 20,
        intercept: 0.2341,
        age: 0.07203,
        sex: 0.237,
        snp: -0.2,
        cpg: -0.5,
    },
    ScenarioSpec {
        index: 4,
        n_cpgs: 50,
        intercept: 0.2341,
        age: 0.07203,
        sex: 0.237,
        snp: -0.2,
        cpg: -0.5,
    },
    ScenarioSpec {
        index: 5,
        n_cpgs: 100,
        intercept: 0.2341,
        age: 0.07203,
        sex: 0.237,
        snp: -0.2,
        cpg: -0.5,
    },
];

/// Indices of the `count` positions nearest to `center`, in ascending
/// position order. Ties broken toward the lower index.
fn nearest_indices(positions: &[f64], center: f64, count: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..positions.len()).collect();
    order.sort_by(|&a, &b| {
        let da = (positions[a] - center).abs();
        let db = (positions[b] - center).abs();
        da.partial_cmp(&db)
            .expect("finite distances")
            .then(a.cmp(&b))
    });
    let mut chosen: Vec<usize> = order.into_iter().take(count).collect();
    chosen.sort_unstable();
    chosen
}

/// Baseline-study fixture: one base profile whose positions are shared by
/// every individual (array-style measurements), with the SNP placed at the
/// profile midpoint.
#[derive(Debug, Clone)]
pub struct ScenarioTemplate {
    positions: Vec<f64>,
    clamped: Vec<f64>,
    logits: Vec<f64>,
    snp_bp: f64,
}

impl ScenarioTemplate {
    pub fn new(config: &SimConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ TEMPLATE_SALT);
        let profile = synthesize_base_profiles(
            1,
            config.sites_per_profile,
            config.region_bp,
            config.profile_shape_sd,
            &mut rng,
        )?
        .pop()
        .expect("one profile requested");
        let clamped: Vec<f64> = profile.levels().iter().map(|&v| clamp_level(v)).collect();
        let logits = clamped.iter().map(|&v| logit(v)).collect();
        let first = profile.positions()[0];
        let last = *profile.positions().last().expect("non-empty profile");
        Ok(Self {
            positions: profile.positions().to_vec(),
            clamped,
            logits,
            snp_bp: 0.5 * (first + last),
        })
    }

    pub fn snp_bp(&self) -> f64 {
        self.snp_bp
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    /// The `count` site indices nearest the SNP, ascending.
    pub fn nearest_sites(&self, count: usize) -> Vec<usize> {
        nearest_indices(&self.positions, self.snp_bp, count)
    }
}

/// Generate one baseline-comparison replicate: shared-position raw levels,
/// age/sex covariates, a single SNP, and a phenotype from the pairwise linear
/// model with interaction coefficient `gamma` on each interacting site.
///
/// Draw order (genotypes, age/sex, replication shifts, noise) is fixed and
/// independent of gamma, so sweeps over gamma from the same (seed, r) are
/// paired.
pub fn generate_scenario_cohort(
    config: &SimConfig,
    template: &ScenarioTemplate,
    scenario: &ScenarioSpec,
    gamma: f64,
    replicate: u64,
) -> Result<RawCohort> {
    config.validate()?;
    if !gamma.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "interaction coefficient must be finite, got {gamma}"
        )));
    }
    let m = template.positions.len();
    if m != config.sites_per_profile {
        return Err(Error::InvalidConfig(
            "scenario template was built from a different configuration".into(),
        ));
    }
    if scenario.n_cpgs < 1 || scenario.n_cpgs > m {
        return Err(Error::InvalidConfig(format!(
            "scenario needs 1..={m} interacting sites, got {}",
            scenario.n_cpgs
        )));
    }
    let n = config.n;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ replicate);

    let (g, _mafs) = simulate_genotypes(n, 1, config.maf_range, &mut rng)?;
    let mut w = DMatrix::zeros(n, 2);
    for i in 0..n {
        w[(i, 0)] = rng.gen_range(14.0..34.0);
        w[(i, 1)] = f64::from(u8::from(rng.gen_bool(0.5)));
    }
    let mut levels = DMatrix::zeros(n, m);
    for i in 0..n {
        let vartheta = config.replication_sigma_t * rng.sample::<f64, _>(StandardNormal);
        let row = shifted_levels(&template.clamped, &template.logits, vartheta);
        levels.row_mut(i).copy_from_slice(&row);
    }

    let interacting = template.nearest_sites(scenario.n_cpgs);
    let mut signal = DVector::from_element(n, scenario.intercept);
    for i in 0..n {
        let level_sum: f64 = interacting.iter().map(|&j| levels[(i, j)]).sum();
        signal[i] += scenario.age * w[(i, 0)]
            + scenario.sex * w[(i, 1)]
            + scenario.snp * g[(i, 0)]
            + scenario.cpg * level_sum
            + gamma * g[(i, 0)] * level_sum;
    }
    let (y, _noise_variance) = apply_noise(&signal, &config.noise, &mut rng)?;

    let cohort = RawCohort {
        y,
        w,
        g,
        snp_positions_bp: vec![template.snp_bp],
        cpg_positions_bp: template.positions.clone(),
        levels,
    };
    cohort.validate()?;
    Ok(cohort)
}

/// Smooth a shared-position cohort into a model-ready dataset: levels become
/// curves, SNP coordinates are rescaled onto the curve grid's unit interval.
pub fn scenario_dataset(cohort: &RawCohort, smoothing: &SmoothingConfig) -> Result<Dataset> {
    cohort.validate()?;
    let n = cohort.n();
    let samples: Vec<MethylationSample> = (0..n)
        .map(|i| {
            MethylationSample::new(
                format!("i{i:05}"),
                cohort.cpg_positions_bp.clone(),
                cohort.levels.row(i).iter().copied().collect(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let curves = build_curve_set(&samples, smoothing)?;
    let (lo, hi) = curves.scaling;
    let snp_positions: Vec<f64> = cohort
        .snp_positions_bp
        .iter()
        .map(|&u| (u - lo) / (hi - lo))
        .collect();
    check_snp_positions(&snp_positions)?;
    Ok(Dataset {
        ids: curves.ids.clone(),
        y: cohort.y.clone(),
        w: cohort.w.clone(),
        g: cohort.g.clone(),
        snp_positions,
        curves,
    })
}
