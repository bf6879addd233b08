//! Penalized scalar-on-function regression fit as a linear mixed model.
//!
//! The design is A = [1 | W | G | K | Z]: intercept, covariates, genotype main
//! effects, interaction columns K_id = G_id * Omega_id (distance-weighted curve
//! integrals around each SNP), and the spline expansion Z of the functional
//! coefficient. The spline block carries the curvature penalty lambda * P; the
//! fit solves (A'A + S_lambda) theta = A'Y, with lambda chosen by maximizing
//! the profiled restricted likelihood. The penalty is PSD with an affine
//! nullspace, so a fixed ridge epsilon*I (epsilon = 1e-8 * mean diag P) makes
//! the random-effect precision Q_lambda = lambda*P + epsilon*I invertible
//! without tying the ridge to lambda.

use crate::basis::{self, PenaltyMatrix, SplineBasis, WeightSpec};
use crate::curves::CurveSet;
use crate::error::{Error, Result};
use crate::floatfmt;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::Serialize;

/// Lambda search interval and tolerances (log10 scale).
const LOG10_LAMBDA_LO: f64 = -6.0;
const LOG10_LAMBDA_HI: f64 = 8.0;
const COARSE_GRID_POINTS: usize = 29;
const GOLDEN_TOL_LOG10: f64 = 1e-6;
/// Condition guard threshold on the squared ratio of extreme Cholesky pivots
/// of the Jacobi-equilibrated normal matrix.
const CONDITION_LIMIT: f64 = 1e12;

/// A complete analysis-ready cohort.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub ids: Vec<String>,
    pub y: DVector<f64>,
    /// N x S additional covariates (S may be 0).
    pub w: DMatrix<f64>,
    /// N x D minor-allele counts in {0,1,2}.
    pub g: DMatrix<f64>,
    /// SNP positions in scaled [0,1] coordinates.
    pub snp_positions: Vec<f64>,
    pub curves: CurveSet,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn n_covariates(&self) -> usize {
        self.w.ncols()
    }

    pub fn n_snps(&self) -> usize {
        self.g.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        let fail = |msg: String| Err(Error::InvalidDataset(msg));
        if n == 0 {
            return fail("empty phenotype vector".into());
        }
        if self.ids.len() != n {
            return fail(format!("{} ids but {} phenotypes", self.ids.len(), n));
        }
        if self.w.nrows() != n || self.g.nrows() != n || self.curves.values.nrows() != n {
            return fail(format!(
                "inconsistent row counts: y {}, W {}, G {}, curves {}",
                n,
                self.w.nrows(),
                self.g.nrows(),
                self.curves.values.nrows()
            ));
        }
        if self.g.ncols() == 0 {
            return fail("need at least one SNP".into());
        }
        if self.snp_positions.len() != self.g.ncols() {
            return fail(format!(
                "{} SNP positions but {} genotype columns",
                self.snp_positions.len(),
                self.g.ncols()
            ));
        }
        if self.y.iter().any(|v| !v.is_finite()) || self.w.iter().any(|v| !v.is_finite()) {
            return fail("non-finite phenotype or covariate value".into());
        }
        for (d, col) in self.g.column_iter().enumerate() {
            for &gv in col.iter() {
                if gv != 0.0 && gv != 1.0 && gv != 2.0 {
                    return fail(format!("genotype entry {gv} in SNP column {d} not in {{0,1,2}}"));
                }
            }
        }
        check_snp_positions(&self.snp_positions)?;
        Ok(())
    }
}

/// Reject duplicated scaled SNP positions (they make interaction columns
/// collinear) and positions outside [0,1].
pub fn check_snp_positions(positions: &[f64]) -> Result<()> {
    for (d, &u) in positions.iter().enumerate() {
        if !u.is_finite() || !(0.0..=1.0).contains(&u) {
            return Err(Error::SnpOutsideRegion {
                index: d,
                position: u,
            });
        }
        for (e, &v) in positions.iter().enumerate().skip(d + 1) {
            if u == v {
                return Err(Error::DuplicateSnpPositions {
                    first: d,
                    second: e,
                    position: u,
                });
            }
        }
    }
    Ok(())
}

/// Block layout of the coefficient vector (zeta0, zeta, alpha, eta, b).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ModelDims {
    pub n: usize,
    pub s: usize,
    pub d: usize,
    pub l: usize,
}

impl ModelDims {
    pub fn p_fixed(&self) -> usize {
        1 + self.s + 2 * self.d
    }

    pub fn p_total(&self) -> usize {
        self.p_fixed() + self.l
    }

    /// Denominator degrees of freedom of the interaction F test.
    pub fn df2(&self) -> i64 {
        self.n as i64 - self.s as i64 - self.l as i64 - 2 * self.d as i64 - 1
    }

    pub fn alpha_offset(&self) -> usize {
        1 + self.s
    }

    pub fn eta_offset(&self) -> usize {
        1 + self.s + self.d
    }

    pub fn b_offset(&self) -> usize {
        self.p_fixed()
    }
}

/// The assembled design: A = [X | Z] with X = [1 | W | G | K].
#[derive(Debug, Clone)]
pub struct DesignBlocks {
    a: DMatrix<f64>,
    dims: ModelDims,
}

impl DesignBlocks {
    /// Assemble from the individual blocks, checking for the rank-deficiency
    /// patterns the model can name (constant genotype or covariate columns,
    /// identically zero interaction or spline blocks).
    pub fn from_parts(
        w: &DMatrix<f64>,
        g: &DMatrix<f64>,
        k: &DMatrix<f64>,
        z: &DMatrix<f64>,
    ) -> Result<Self> {
        let n = g.nrows();
        let (s, d, l) = (w.ncols(), g.ncols(), z.ncols());
        if w.nrows() != n || k.nrows() != n || z.nrows() != n || k.ncols() != d {
            return Err(Error::InvalidDataset(format!(
                "design block shapes disagree: W {}x{}, G {}x{}, K {}x{}, Z {}x{}",
                w.nrows(),
                s,
                n,
                d,
                k.nrows(),
                k.ncols(),
                z.nrows(),
                l
            )));
        }
        let constant = |col: nalgebra::DVectorView<f64>| -> bool {
            let first = col[0];
            col.iter().all(|&v| v == first)
        };
        for (idx, col) in g.column_iter().enumerate() {
            if constant(col) {
                return Err(Error::MonomorphicSnp { index: idx });
            }
        }
        for (idx, col) in w.column_iter().enumerate() {
            if constant(col) {
                return Err(Error::RankDeficient(format!(
                    "covariate column {idx} is constant and collinear with the intercept"
                )));
            }
        }
        if k.iter().all(|&v| v == 0.0) {
            return Err(Error::RankDeficient(
                "interaction block K is identically zero (curves vanish near every SNP)".into(),
            ));
        }
        if z.iter().all(|&v| v == 0.0) {
            return Err(Error::RankDeficient(
                "spline block Z is identically zero (curves are identically zero)".into(),
            ));
        }
        let dims = ModelDims { n, s, d, l };
        let mut a = DMatrix::zeros(n, dims.p_total());
        a.columns_mut(0, 1).fill(1.0);
        a.columns_mut(1, s).copy_from(w);
        a.columns_mut(1 + s, d).copy_from(g);
        a.columns_mut(1 + s + d, d).copy_from(k);
        a.columns_mut(dims.p_fixed(), l).copy_from(z);
        Ok(Self { a, dims })
    }

    pub fn dims(&self) -> ModelDims {
        self.dims
    }

    /// Full design matrix A = [X | Z].
    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    /// Fixed-effect columns X = [1 | W | G | K].
    pub fn x(&self) -> nalgebra::DMatrixView<'_, f64> {
        self.a.columns(0, self.dims.p_fixed())
    }

    /// Random-effect (spline) columns Z.
    pub fn zb(&self) -> nalgebra::DMatrixView<'_, f64> {
        self.a.columns(self.dims.p_fixed(), self.dims.l)
    }
}

/// Build the design from a dataset: functional covariates Z by trapezoid
/// integration of B_l against each curve, interaction covariates
/// Omega (distance-weighted curve integrals) and K = G .* Omega elementwise.
pub fn assemble_design(
    dataset: &Dataset,
    spline: &SplineBasis,
    weight_spec: &WeightSpec,
) -> Result<DesignBlocks> {
    dataset.validate()?;
    weight_spec.validate()?;
    let grid = &dataset.curves.grid;
    let trap = basis::trapezoid_weights(grid)?;

    // Z = curves * diag(trap) * B, computed as one matmul with pre-scaled B.
    let bmat = spline.eval_matrix(grid);
    let mut b_scaled = bmat;
    for (row, &w) in trap.iter().enumerate() {
        b_scaled.row_mut(row).scale_mut(w);
    }
    let z = &dataset.curves.values * b_scaled;

    let psi = basis::weight_matrix(weight_spec, &dataset.snp_positions, grid)?;
    let mut psi_scaled = psi;
    for (row, &w) in trap.iter().enumerate() {
        psi_scaled.row_mut(row).scale_mut(w);
    }
    let omega = &dataset.curves.values * psi_scaled;
    let k = dataset.g.component_mul(&omega);

    DesignBlocks::from_parts(&dataset.w, &dataset.g, &k, &z)
}

/// Result of a REML fit: coefficient estimates, smoothing parameter, residual
/// variance, coefficient covariance and diagnostics.
#[derive(Debug, Clone)]
pub struct FittedModel {
    pub dims: ModelDims,
    pub lambda: f64,
    pub sigma2: f64,
    pub theta: DVector<f64>,
    pub cov_theta: DMatrix<f64>,
    pub reml_value: f64,
    pub warnings: Vec<String>,
}

impl FittedModel {
    pub fn zeta0(&self) -> f64 {
        self.theta[0]
    }

    pub fn zeta(&self) -> Vec<f64> {
        self.theta.rows(1, self.dims.s).iter().cloned().collect()
    }

    pub fn alpha(&self) -> Vec<f64> {
        self.theta
            .rows(self.dims.alpha_offset(), self.dims.d)
            .iter()
            .cloned()
            .collect()
    }

    /// Interaction coefficient estimates.
    pub fn eta(&self) -> DVector<f64> {
        self.theta.rows(self.dims.eta_offset(), self.dims.d).into_owned()
    }

    /// Covariance block of the interaction estimates.
    pub fn eta_cov(&self) -> DMatrix<f64> {
        let off = self.dims.eta_offset();
        self.cov_theta.view((off, off), (self.dims.d, self.dims.d)).into_owned()
    }

    /// Spline coefficients of the functional main effect.
    pub fn b_coefficients(&self) -> DVector<f64> {
        self.theta.rows(self.dims.b_offset(), self.dims.l).into_owned()
    }

    /// Serialize to JSON with named coefficient blocks and a row-major
    /// covariance, using 17-significant-digit floats.
    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct ThetaBlocks<'a> {
            zeta0: f64,
            zeta: Vec<f64>,
            alpha: Vec<f64>,
            eta: Vec<f64>,
            b: &'a [f64],
        }
        #[derive(Serialize)]
        struct Doc<'a> {
            dims: ModelDims,
            lambda: f64,
            sigma2: f64,
            theta: ThetaBlocks<'a>,
            cov_theta: Vec<f64>,
            reml_value: f64,
            warnings: &'a [String],
        }
        let b: Vec<f64> = self.b_coefficients().iter().cloned().collect();
        let mut cov_row_major = Vec::with_capacity(self.cov_theta.len());
        for i in 0..self.cov_theta.nrows() {
            for j in 0..self.cov_theta.ncols() {
                cov_row_major.push(self.cov_theta[(i, j)]);
            }
        }
        let doc = Doc {
            dims: self.dims,
            lambda: self.lambda,
            sigma2: self.sigma2,
            theta: ThetaBlocks {
                zeta0: self.zeta0(),
                zeta: self.zeta(),
                alpha: self.alpha(),
                eta: self.eta().iter().cloned().collect(),
                b: &b,
            },
            cov_theta: cov_row_major,
            reml_value: self.reml_value,
            warnings: &self.warnings,
        };
        Ok(floatfmt::to_json(&doc)?)
    }
}

/// Orthogonal diagonalization of the penalty, shared by every solve.
///
/// The spline block is rotated so the penalty is diagonal: with P = U L U',
/// the model uses Q_lambda = U diag(lambda * L_i + eps) U' after flushing the
/// nullspace eigenvalues to exactly 0 (anything below 1e-12 of the largest;
/// the computed values are off by ~1e-15 relative either way, far below the
/// smallest genuine eigenvalue, and lambda = 1e12 would amplify the junk into
/// a spurious penalty on the affine directions or a sign flip). Working in
/// the rotated coordinates keeps the unpenalized affine directions at data
/// scale in the normal matrix instead of buried under lambda * P, so one
/// Cholesky handles every lambda.
struct PenaltyEigen {
    /// L x L orthogonal matrix, columns ordered by descending eigenvalue.
    u: DMatrix<f64>,
    /// Penalty eigenvalues, clamped at 0, descending.
    evals: DVector<f64>,
    eps: f64,
}

impl PenaltyEigen {
    fn new(penalty: &PenaltyMatrix) -> Self {
        let se = nalgebra::SymmetricEigen::new(penalty.matrix().clone());
        let l = se.eigenvalues.len();
        let mut order: Vec<usize> = (0..l).collect();
        order.sort_by(|&a, &b| {
            se.eigenvalues[b]
                .partial_cmp(&se.eigenvalues[a])
                .expect("penalty eigenvalues are finite")
                .then(a.cmp(&b))
        });
        let u = DMatrix::from_fn(l, l, |i, j| se.eigenvectors[(i, order[j])]);
        let floor = se.eigenvalues.iter().fold(0.0f64, |m, &v| m.max(v)) * 1e-12;
        let evals = DVector::from_fn(l, |i, _| {
            let v = se.eigenvalues[order[i]];
            if v > floor {
                v
            } else {
                0.0
            }
        });
        Self {
            u,
            evals,
            eps: penalty.ridge_epsilon(),
        }
    }

    fn dim(&self) -> usize {
        self.evals.len()
    }

    /// i-th eigenvalue of Q_lambda.
    fn q_eigenvalue(&self, i: usize, lambda: f64) -> f64 {
        lambda * self.evals[i] + self.eps
    }

    fn logdet_q(&self, lambda: f64) -> f64 {
        (0..self.dim()).map(|i| self.q_eigenvalue(i, lambda).ln()).sum()
    }
}

/// Outcome of one guarded symmetric solve of the normal equations.
struct NormalSolve {
    chol: Cholesky<f64, Dyn>,
    /// Jacobi scaling d_i = 1/sqrt(H_ii) applied before factorization.
    scale: DVector<f64>,
    /// log det of the unscaled matrix H.
    logdet: f64,
    /// Squared ratio of extreme Cholesky pivots of the equilibrated matrix: a
    /// cheap condition lower bound that is scale-invariant, so legitimately
    /// huge lambda does not trip the guard while collinear data does.
    cond_estimate: f64,
}

impl NormalSolve {
    fn factor(h: &DMatrix<f64>) -> Result<Self> {
        let p = h.nrows();
        let mut scale = DVector::zeros(p);
        let mut logdiag = 0.0;
        for i in 0..p {
            let d = h[(i, i)];
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::Unidentifiable);
            }
            scale[i] = 1.0 / d.sqrt();
            logdiag += d.ln();
        }
        let equilibrated = DMatrix::from_fn(p, p, |i, j| h[(i, j)] * scale[i] * scale[j]);
        let chol = Cholesky::new(equilibrated).ok_or(Error::Unidentifiable)?;
        let mut logdet_eq = 0.0;
        let mut pivot_min = f64::INFINITY;
        let mut pivot_max = 0.0f64;
        let lmat = chol.l_dirty();
        for i in 0..p {
            let piv = lmat[(i, i)];
            logdet_eq += piv.ln();
            pivot_min = pivot_min.min(piv);
            pivot_max = pivot_max.max(piv);
        }
        let logdet = 2.0 * logdet_eq + logdiag;
        let cond_estimate = (pivot_max / pivot_min).powi(2);
        Ok(Self {
            chol,
            scale,
            logdet,
            cond_estimate,
        })
    }

    fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let scaled = rhs.component_mul(&self.scale);
        let z = self.chol.solve(&scaled);
        z.component_mul(&self.scale)
    }

    /// Inverse of the unscaled matrix, symmetrized.
    fn inverse(&self) -> DMatrix<f64> {
        let inv_eq = self.chol.inverse();
        let p = inv_eq.nrows();
        let mut out = DMatrix::zeros(p, p);
        for i in 0..p {
            for j in i..p {
                let v = 0.5 * (inv_eq[(i, j)] + inv_eq[(j, i)]) * self.scale[i] * self.scale[j];
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        out
    }
}

/// Shared REML state: the design with the spline block rotated into the
/// penalty eigenbasis, plus cached cross-products, so each lambda evaluation
/// costs one p x p factorization.
struct RemlWorkspace<'a> {
    dims: ModelDims,
    y: &'a DVector<f64>,
    eigen: PenaltyEigen,
    /// A in rotated coordinates: [X | Z U].
    a_rot: DMatrix<f64>,
    ata: DMatrix<f64>,
    aty: DVector<f64>,
}

struct RemlEval {
    value: f64,
    cond_estimate: f64,
}

impl<'a> RemlWorkspace<'a> {
    fn new(blocks: &'a DesignBlocks, y: &'a DVector<f64>, penalty: &'a PenaltyMatrix) -> Result<Self> {
        let dims = blocks.dims();
        if y.len() != dims.n {
            return Err(Error::LengthMismatch {
                what: "phenotype vs design rows",
                left: y.len(),
                right: dims.n,
            });
        }
        if penalty.dim() != dims.l {
            return Err(Error::LengthMismatch {
                what: "penalty vs spline block",
                left: penalty.dim(),
                right: dims.l,
            });
        }
        let eigen = PenaltyEigen::new(penalty);
        let mut a_rot = blocks.a().clone();
        let z_rot = blocks.zb() * &eigen.u;
        a_rot.columns_mut(dims.b_offset(), dims.l).copy_from(&z_rot);
        let ata = a_rot.tr_mul(&a_rot);
        let aty = a_rot.tr_mul(y);
        Ok(Self {
            dims,
            y,
            eigen,
            a_rot,
            ata,
            aty,
        })
    }

    /// A'A + S_lambda in rotated coordinates: the penalty contribution is the
    /// diagonal lambda * L_i + eps on the spline block.
    fn normal_matrix(&self, lambda: f64) -> DMatrix<f64> {
        let off = self.dims.b_offset();
        let mut h = self.ata.clone();
        for i in 0..self.dims.l {
            h[(off + i, off + i)] += self.eigen.q_eigenvalue(i, lambda);
        }
        h
    }

    /// Map rotated coefficients back to the published basis.
    fn to_original(&self, theta_rot: &DVector<f64>) -> DVector<f64> {
        let mut theta = theta_rot.clone();
        let b_rot = theta_rot.rows(self.dims.b_offset(), self.dims.l);
        theta
            .rows_mut(self.dims.b_offset(), self.dims.l)
            .copy_from(&(&self.eigen.u * b_rot));
        theta
    }

    /// Residual sum of squares plus the penalty quadratic form, for a
    /// rotated coefficient vector.
    fn penalized_rss_rot(&self, theta_rot: &DVector<f64>, lambda: f64) -> f64 {
        let resid = self.y - &self.a_rot * theta_rot;
        let b_rot = theta_rot.rows(self.dims.b_offset(), self.dims.l);
        let pen: f64 = (0..self.dims.l)
            .map(|i| self.eigen.q_eigenvalue(i, lambda) * b_rot[i] * b_rot[i])
            .sum();
        resid.norm_squared() + pen
    }

    /// Profiled restricted log-likelihood at a given lambda:
    /// l_R = -1/2 [ (N - p_f)(log sigma2_hat + 1) + log|A'A + S_lambda| - log|Q_lambda| ]
    /// using log|V| + log|X'V^-1 X| = log|A'A + S_lambda| - log|Q_lambda| and
    /// RSS_GLS = |Y - A theta|^2 + b'Q b.
    fn eval(&self, lambda: f64) -> Result<RemlEval> {
        let h = self.normal_matrix(lambda);
        let solve = NormalSolve::factor(&h)?;
        if solve.cond_estimate > CONDITION_LIMIT {
            return Err(Error::IllConditioned {
                estimate: solve.cond_estimate,
            });
        }
        let theta_rot = solve.solve(&self.aty);
        let rss_pen = self.penalized_rss_rot(&theta_rot, lambda);
        let df = (self.dims.n - self.dims.p_fixed()) as f64;
        if !(rss_pen > 0.0) || !rss_pen.is_finite() {
            return Err(Error::NonFinite {
                what: format!("penalized residual sum of squares at lambda = {lambda}"),
            });
        }
        let sigma2 = rss_pen / df;
        let value = -0.5 * (df * (sigma2.ln() + 1.0) + solve.logdet - self.eigen.logdet_q(lambda));
        if !value.is_finite() {
            return Err(Error::NonFinite {
                what: format!("REML objective at lambda = {lambda}"),
            });
        }
        Ok(RemlEval {
            value,
            cond_estimate: solve.cond_estimate,
        })
    }
}

/// BLUP / penalized least-squares solve at a fixed lambda >= 0:
/// theta = (A'A + S_lambda)^-1 A'Y with S_lambda = blockdiag(0, lambda P + eps I).
pub fn penalized_solve(
    blocks: &DesignBlocks,
    y: &DVector<f64>,
    lambda: f64,
    penalty: &PenaltyMatrix,
) -> Result<DVector<f64>> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "lambda must be finite and >= 0, got {lambda}"
        )));
    }
    let ws = RemlWorkspace::new(blocks, y, penalty)?;
    let h = ws.normal_matrix(lambda);
    let solve = NormalSolve::factor(&h)?;
    Ok(ws.to_original(&solve.solve(&ws.aty)))
}

/// Profiled restricted log-likelihood at lambda > 0 (sigma^2 maximized out in
/// closed form). Deterministic; log-determinants come from factorizations.
pub fn reml_objective(
    blocks: &DesignBlocks,
    y: &DVector<f64>,
    lambda: f64,
    penalty: &PenaltyMatrix,
) -> Result<f64> {
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "REML objective needs lambda > 0, got {lambda}"
        )));
    }
    let ws = RemlWorkspace::new(blocks, y, penalty)?;
    Ok(ws.eval(lambda)?.value)
}

/// Fit the penalized model on pre-assembled design blocks.
///
/// Lambda maximizes the restricted likelihood over log10 lambda in [-6, 8]:
/// a 29-point coarse grid brackets the maximum (grid points whose evaluation
/// fails are skipped; they cannot be maxima), then golden-section refines to
/// 1e-6 absolute in log10. Hitting either interval edge is recorded as a
/// warning on the returned fit.
pub fn fit_penalized(
    blocks: &DesignBlocks,
    y: &DVector<f64>,
    penalty: &PenaltyMatrix,
) -> Result<FittedModel> {
    let dims = blocks.dims();
    let bound = dims.s + 2 * dims.d + dims.l + 1;
    if dims.n <= bound {
        return Err(Error::InsufficientSampleSize { n: dims.n, bound });
    }
    let ws = RemlWorkspace::new(blocks, y, penalty)?;

    let mut warnings = Vec::new();
    let step = (LOG10_LAMBDA_HI - LOG10_LAMBDA_LO) / (COARSE_GRID_POINTS - 1) as f64;
    let mut best: Option<(usize, f64)> = None;
    for k in 0..COARSE_GRID_POINTS {
        let log10 = LOG10_LAMBDA_LO + step * k as f64;
        match ws.eval(10f64.powf(log10)) {
            Ok(eval) => {
                if best.map_or(true, |(_, v)| eval.value > v) {
                    best = Some((k, eval.value));
                }
            }
            Err(_) => continue,
        }
    }
    let (best_idx, _) = best.ok_or(Error::NoAdmissibleLambda)?;
    if best_idx == 0 || best_idx == COARSE_GRID_POINTS - 1 {
        warnings.push(format!(
            "lambda search hit the {} boundary of log10 lambda in [{}, {}]",
            if best_idx == 0 { "lower" } else { "upper" },
            LOG10_LAMBDA_LO,
            LOG10_LAMBDA_HI
        ));
    }
    let lo = LOG10_LAMBDA_LO + step * best_idx.saturating_sub(1) as f64;
    let hi = LOG10_LAMBDA_LO + step * (best_idx + 1).min(COARSE_GRID_POINTS - 1) as f64;
    let log10_hat = golden_section_max(lo, hi, GOLDEN_TOL_LOG10, |log10| {
        Ok(ws.eval(10f64.powf(log10))?.value)
    })?;
    let lambda_hat = 10f64.powf(log10_hat);

    // The returned theta goes through the public fixed-lambda solve, so
    // re-solving at lambda_hat reproduces it bit for bit.
    let theta = penalized_solve(blocks, y, lambda_hat, penalty)?;
    let eval = ws.eval(lambda_hat)?;
    if eval.cond_estimate > CONDITION_LIMIT {
        return Err(Error::IllConditioned {
            estimate: eval.cond_estimate,
        });
    }
    let mut theta_rot = theta.clone();
    theta_rot
        .rows_mut(dims.b_offset(), dims.l)
        .copy_from(&(ws.eigen.u.tr_mul(&theta.rows(dims.b_offset(), dims.l))));
    let rss_pen = ws.penalized_rss_rot(&theta_rot, lambda_hat);
    let df = (dims.n - dims.p_fixed()) as f64;
    if !(rss_pen > 0.0) {
        return Err(Error::NonFinite {
            what: "penalized residual sum of squares at the selected lambda".into(),
        });
    }
    let sigma2 = rss_pen / df;

    // cov(theta) = sigma2 * (A'A + S_lambda)^-1, congruence-mapped back from
    // the rotated coordinates.
    let h = ws.normal_matrix(lambda_hat);
    let solve = NormalSolve::factor(&h)?;
    let inv_rot = solve.inverse();
    let p = dims.p_total();
    let mut rot = DMatrix::identity(p, p);
    rot.view_mut((dims.b_offset(), dims.b_offset()), (dims.l, dims.l))
        .copy_from(&ws.eigen.u);
    let mut cov_theta = &rot * inv_rot * rot.transpose();
    cov_theta.scale_mut(sigma2);
    for i in 0..p {
        for j in (i + 1)..p {
            let v = 0.5 * (cov_theta[(i, j)] + cov_theta[(j, i)]);
            cov_theta[(i, j)] = v;
            cov_theta[(j, i)] = v;
        }
    }

    Ok(FittedModel {
        dims,
        lambda: lambda_hat,
        sigma2,
        theta,
        cov_theta,
        reml_value: eval.value,
        warnings,
    })
}

/// Assemble the design from a dataset and fit by REML.
pub fn fit_reml(
    dataset: &Dataset,
    spline: &SplineBasis,
    weight_spec: &WeightSpec,
) -> Result<FittedModel> {
    let blocks = assemble_design(dataset, spline, weight_spec)?;
    let penalty = basis::penalty_matrix(spline)?;
    fit_penalized(&blocks, &dataset.y, &penalty)
}

/// Golden-section maximization on [a, b] to absolute tolerance `tol`,
/// propagating evaluation errors.
fn golden_section_max(
    mut a: f64,
    mut b: f64,
    tol: f64,
    mut f: impl FnMut(f64) -> Result<f64>,
) -> Result<f64> {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    if !(b > a) {
        return Ok(0.5 * (a + b));
    }
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while b - a > tol {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2)?;
        }
    }
    Ok(0.5 * (a + b))
}
