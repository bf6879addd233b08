//! Interaction tests: the Wald-type F test of the overall SNP x curve
//! interaction, the per-CpG pairwise baseline with Bonferroni correction, and
//! logistic working residuals for binary outcomes.

use crate::error::{Error, Result};
use crate::floatfmt;
use crate::model::FittedModel;
use nalgebra::{Cholesky, DMatrix, DVector};
use serde::Serialize;

pub use crate::dist::f_upper_tail;

/// Wald test outcome for H0: eta = 0.
#[derive(Debug, Clone)]
pub struct TestResult {
    pub statistic: f64,
    pub df1: usize,
    pub df2: usize,
    pub p_value: f64,
    pub eta_hat: DVector<f64>,
    pub eta_cov: DMatrix<f64>,
}

impl TestResult {
    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Doc<'a> {
            statistic: f64,
            df1: usize,
            df2: usize,
            p_value: f64,
            eta_hat: &'a [f64],
            eta_cov: Vec<f64>,
        }
        let mut cov_row_major = Vec::with_capacity(self.eta_cov.len());
        for i in 0..self.eta_cov.nrows() {
            for j in 0..self.eta_cov.ncols() {
                cov_row_major.push(self.eta_cov[(i, j)]);
            }
        }
        Ok(floatfmt::to_json(&Doc {
            statistic: self.statistic,
            df1: self.df1,
            df2: self.df2,
            p_value: self.p_value,
            eta_hat: self.eta_hat.as_slice(),
            eta_cov: cov_row_major,
        })?)
    }
}

/// eta' Sigma^-1 eta via an equilibrated Cholesky with a condition guard; a
/// covariance block past the guard reports as degenerate rather than being
/// pseudo-inverted.
fn guarded_quadratic_form(eta: &DVector<f64>, cov: &DMatrix<f64>) -> Result<f64> {
    let d = eta.len();
    let mut scale = DVector::zeros(d);
    for i in 0..d {
        let v = cov[(i, i)];
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::DegenerateInteractionCovariance);
        }
        scale[i] = 1.0 / v.sqrt();
    }
    let equilibrated = DMatrix::from_fn(d, d, |i, j| cov[(i, j)] * scale[i] * scale[j]);
    let chol = Cholesky::new(equilibrated).ok_or(Error::DegenerateInteractionCovariance)?;
    let mut pivot_min = f64::INFINITY;
    let mut pivot_max = 0.0f64;
    for i in 0..d {
        let piv = chol.l_dirty()[(i, i)];
        pivot_min = pivot_min.min(piv);
        pivot_max = pivot_max.max(piv);
    }
    if (pivot_max / pivot_min).powi(2) > 1e12 {
        return Err(Error::DegenerateInteractionCovariance);
    }
    let rhs = eta.component_mul(&scale);
    let solved = chol.solve(&rhs);
    // Sigma^-1 eta = S (S Sigma S)^-1 S eta; the form is PSD, so clamp the
    // rounding fuzz at exactly zero.
    Ok(rhs.dot(&solved).max(0.0))
}

/// Wald-type test of the overall interaction: T_D = eta' Sigma^-1 eta / D
/// against F(D, N - S - L - 2D - 1).
pub fn wald_interaction_test(fit: &FittedModel) -> Result<TestResult> {
    let d = fit.dims.d;
    let df2 = fit.dims.df2();
    if d < 1 || df2 < 1 {
        return Err(Error::InvalidDf {
            df1: d as i64,
            df2,
        });
    }
    let eta_hat = fit.eta();
    let eta_cov = fit.eta_cov();
    let quad = guarded_quadratic_form(&eta_hat, &eta_cov)?;
    let statistic = quad / d as f64;
    let p_value = f_upper_tail(statistic, d, df2 as usize)?;
    Ok(TestResult {
        statistic,
        df1: d,
        df2: df2 as usize,
        p_value,
        eta_hat,
        eta_cov,
    })
}

/// A cohort with raw (unsmoothed) methylation levels at positions shared by
/// all individuals — the input the pairwise baseline operates on.
#[derive(Debug, Clone)]
pub struct RawCohort {
    pub y: DVector<f64>,
    /// N x S additional covariates.
    pub w: DMatrix<f64>,
    /// N x D minor-allele counts.
    pub g: DMatrix<f64>,
    /// SNP positions in base pairs.
    pub snp_positions_bp: Vec<f64>,
    /// CpG positions in base pairs, strictly increasing.
    pub cpg_positions_bp: Vec<f64>,
    /// N x m raw methylation proportions, column j at cpg_positions_bp[j].
    pub levels: DMatrix<f64>,
}

impl RawCohort {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        let fail = |msg: String| Err(Error::InvalidDataset(msg));
        if n == 0 {
            return fail("empty phenotype vector".into());
        }
        if self.w.nrows() != n || self.g.nrows() != n || self.levels.nrows() != n {
            return fail(format!(
                "inconsistent row counts: y {}, W {}, G {}, levels {}",
                n,
                self.w.nrows(),
                self.g.nrows(),
                self.levels.nrows()
            ));
        }
        if self.snp_positions_bp.len() != self.g.ncols() {
            return fail(format!(
                "{} SNP positions but {} genotype columns",
                self.snp_positions_bp.len(),
                self.g.ncols()
            ));
        }
        if self.cpg_positions_bp.len() != self.levels.ncols() {
            return fail(format!(
                "{} CpG positions but {} level columns",
                self.cpg_positions_bp.len(),
                self.levels.ncols()
            ));
        }
        if !self.cpg_positions_bp.windows(2).all(|p| p[0] < p[1]) {
            return fail("CpG positions must be strictly increasing".into());
        }
        Ok(())
    }
}

/// One SNP x CpG interaction model in the baseline sweep.
#[derive(Debug, Clone, Serialize)]
pub struct BaselinePair {
    pub snp_index: usize,
    pub cpg_position: f64,
    pub gamma_hat: f64,
    pub p_value: f64,
    /// True when the pair design was collinear and the pair was recorded
    /// with p = 1 instead of a fitted coefficient.
    pub collinear: bool,
}

/// Pairwise baseline over all CpGs within a window of one SNP.
#[derive(Debug, Clone, Serialize)]
pub struct BaselineResult {
    pub alpha: f64,
    pub n_tests: usize,
    /// Bonferroni-corrected per-test level alpha / n_tests.
    pub threshold: f64,
    /// One entry per eligible CpG, sorted by CpG position.
    pub pairs: Vec<BaselinePair>,
}

impl BaselineResult {
    pub fn significant(&self) -> Vec<&BaselinePair> {
        self.pairs.iter().filter(|p| p.p_value < self.threshold).collect()
    }

    /// Smallest pair p-value, or 1 when every pair was collinear.
    pub fn min_p(&self) -> f64 {
        self.pairs.iter().map(|p| p.p_value).fold(1.0, f64::min)
    }

    /// Family-wise rejection of "no interaction anywhere in the window".
    pub fn rejects(&self) -> bool {
        !self.significant().is_empty()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(floatfmt::to_json(self)?)
    }

    /// CSV export: `snp,cpg_position,gamma_hat,p_value,significant`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("snp,cpg_position,gamma_hat,p_value,significant\n");
        for pair in &self.pairs {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                pair.snp_index,
                pair.cpg_position,
                floatfmt::fmt_f64(pair.gamma_hat),
                floatfmt::fmt_f64(pair.p_value),
                pair.p_value < self.threshold
            ));
        }
        out
    }
}

/// OLS of y on x returning the coefficient vector, its standard errors, and
/// the residual degrees of freedom; None when the normal matrix is singular
/// or ill-conditioned past 1e12.
fn ols_with_se(x: &DMatrix<f64>, y: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>, usize)> {
    let (n, p) = x.shape();
    if n <= p {
        return None;
    }
    let xtx = x.tr_mul(x);
    let mut scale = DVector::zeros(p);
    for i in 0..p {
        let v = xtx[(i, i)];
        if !(v > 0.0) || !v.is_finite() {
            return None;
        }
        scale[i] = 1.0 / v.sqrt();
    }
    let equilibrated = DMatrix::from_fn(p, p, |i, j| xtx[(i, j)] * scale[i] * scale[j]);
    let chol = Cholesky::new(equilibrated)?;
    let mut pivot_min = f64::INFINITY;
    let mut pivot_max = 0.0f64;
    for i in 0..p {
        let piv = chol.l_dirty()[(i, i)];
        pivot_min = pivot_min.min(piv);
        pivot_max = pivot_max.max(piv);
    }
    if (pivot_max / pivot_min).powi(2) > 1e12 {
        return None;
    }
    let xty = x.tr_mul(y);
    let rhs = xty.component_mul(&scale);
    let beta = chol.solve(&rhs).component_mul(&scale);
    let resid = y - x * &beta;
    let df = n - p;
    let sigma2 = resid.norm_squared() / df as f64;
    let inv_eq = chol.inverse();
    let se = DVector::from_fn(p, |i, _| (sigma2 * inv_eq[(i, i)] * scale[i] * scale[i]).sqrt());
    Some((beta, se, df))
}

/// For each CpG j with |t_j - u_d| < window_bp, fit OLS of Y on
/// [1, W, G_d, p_j, G_d * p_j] and test the product coefficient with the
/// classical t-test; correct across the window by Bonferroni.
pub fn pairwise_baseline(
    cohort: &RawCohort,
    snp_index: usize,
    window_bp: f64,
    alpha: f64,
) -> Result<BaselineResult> {
    cohort.validate()?;
    if snp_index >= cohort.g.ncols() {
        return Err(Error::InvalidConfig(format!(
            "SNP index {snp_index} out of range for {} SNPs",
            cohort.g.ncols()
        )));
    }
    if !(window_bp > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "window must be positive, got {window_bp} bp"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidConfig(format!("alpha must be in (0,1), got {alpha}")));
    }
    let u = cohort.snp_positions_bp[snp_index];
    let eligible: Vec<usize> = (0..cohort.cpg_positions_bp.len())
        .filter(|&j| (cohort.cpg_positions_bp[j] - u).abs() < window_bp)
        .collect();
    if eligible.is_empty() {
        return Err(Error::EmptyWindow {
            snp_index,
            window_bp,
        });
    }

    let n = cohort.n();
    let s = cohort.w.ncols();
    let p = s + 4;
    let gamma_col = p - 1;
    let mut x = DMatrix::zeros(n, p);
    x.column_mut(0).fill(1.0);
    x.columns_mut(1, s).copy_from(&cohort.w);
    x.column_mut(1 + s).copy_from(&cohort.g.column(snp_index));

    let mut pairs = Vec::with_capacity(eligible.len());
    for j in eligible {
        let levels = cohort.levels.column(j);
        x.column_mut(2 + s).copy_from(&levels);
        for i in 0..n {
            x[(i, gamma_col)] = cohort.g[(i, snp_index)] * levels[i];
        }
        let pair = match ols_with_se(&x, &cohort.y) {
            Some((beta, se, df)) => {
                let t = beta[gamma_col] / se[gamma_col];
                let p_value = crate::dist::t_two_sided_p(t, df)?;
                BaselinePair {
                    snp_index,
                    cpg_position: cohort.cpg_positions_bp[j],
                    gamma_hat: beta[gamma_col],
                    p_value,
                    collinear: false,
                }
            }
            None => BaselinePair {
                snp_index,
                cpg_position: cohort.cpg_positions_bp[j],
                gamma_hat: 0.0,
                p_value: 1.0,
                collinear: true,
            },
        };
        pairs.push(pair);
    }
    let n_tests = pairs.len();
    Ok(BaselineResult {
        alpha,
        n_tests,
        threshold: alpha / n_tests as f64,
        pairs,
    })
}

/// Logistic regression by IRLS, returning the working residuals
/// (y - mu) / (mu (1 - mu)) from the converged fit. Zero-variance covariate
/// columns are dropped (an all-degenerate design reduces to intercept-only).
pub fn logistic_working_residuals(
    binary_y: &DVector<f64>,
    covariates: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    let n = binary_y.len();
    if n == 0 {
        return Err(Error::EmptySample);
    }
    if covariates.nrows() != n {
        return Err(Error::LengthMismatch {
            what: "binary outcome vs covariate rows",
            left: n,
            right: covariates.nrows(),
        });
    }
    for &v in binary_y.iter() {
        if v != 0.0 && v != 1.0 {
            return Err(Error::InvalidDataset(format!(
                "binary outcome entry {v} not in {{0,1}}"
            )));
        }
    }
    let kept: Vec<usize> = (0..covariates.ncols())
        .filter(|&j| {
            let col = covariates.column(j);
            let first = col[0];
            !col.iter().all(|&v| v == first)
        })
        .collect();
    let p = 1 + kept.len();
    let mut x = DMatrix::zeros(n, p);
    x.column_mut(0).fill(1.0);
    for (idx, &j) in kept.iter().enumerate() {
        x.column_mut(1 + idx).copy_from(&covariates.column(j));
    }

    const MAX_ITER: usize = 100;
    const GRAD_TOL: f64 = 1e-8;
    const COEF_LIMIT: f64 = 1e3;
    let mut beta = DVector::zeros(p);
    let mut mu = DVector::from_element(n, 0.5);
    for iteration in 0..MAX_ITER {
        let grad = x.tr_mul(&(binary_y - &mu));
        if grad.norm() <= GRAD_TOL {
            // A saturated mu means the gradient vanished because the fit
            // diverged, not because it converged: the working residual
            // denominator mu(1-mu) has underflowed.
            if mu.iter().any(|&m| m * (1.0 - m) < 1e-10) {
                return Err(Error::PerfectSeparation { norm: beta.norm() });
            }
            let resid = DVector::from_fn(n, |i, _| {
                (binary_y[i] - mu[i]) / (mu[i] * (1.0 - mu[i]))
            });
            return Ok(resid);
        }
        // Fisher scoring step: (X' diag(mu(1-mu)) X) delta = X'(y - mu).
        let mut xw = x.clone();
        for i in 0..n {
            let wgt = mu[i] * (1.0 - mu[i]);
            xw.row_mut(i).scale_mut(wgt);
        }
        let hess = x.tr_mul(&xw);
        let chol = Cholesky::new(hess).ok_or(Error::PerfectSeparation { norm: beta.norm() })?;
        beta += chol.solve(&grad);
        if beta.norm() > COEF_LIMIT {
            return Err(Error::PerfectSeparation { norm: beta.norm() });
        }
        let lin = &x * &beta;
        mu = lin.map(|v| 1.0 / (1.0 + (-v).exp()));
        let _ = iteration;
    }
    Err(Error::IrlsNoConvergence {
        iterations: MAX_ITER,
    })
}
