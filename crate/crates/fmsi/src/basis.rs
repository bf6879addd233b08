//! B-spline basis machinery: clamped bases on [0,1], the curvature penalty
//! P(l,l') = integral of B_l'' B_l''', the three distance-decay weight families
//! psi_rho, and the trapezoid-rule functional/interaction covariates.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Clamped B-spline basis of `l` functions and polynomial degree `degree` on
/// [0,1], with equally spaced interior knots.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineBasis {
    l: usize,
    degree: usize,
    knots: Vec<f64>,
}

impl SplineBasis {
    /// Build the basis; requires `l >= degree + 1`.
    pub fn new(l: usize, degree: usize) -> Result<Self> {
        if degree < 1 || l < degree + 1 {
            return Err(Error::InvalidBasis { l, degree });
        }
        let interior = l - degree - 1;
        let mut knots = Vec::with_capacity(l + degree + 1);
        knots.extend(std::iter::repeat(0.0).take(degree + 1));
        let segments = (interior + 1) as f64;
        for i in 1..=interior {
            knots.push(i as f64 / segments);
        }
        knots.extend(std::iter::repeat(1.0).take(degree + 1));
        Ok(Self { l, degree, knots })
    }

    pub fn len(&self) -> usize {
        self.l
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Index mu of the knot span containing t, with t = 1 assigned to the last
    /// non-empty span so the basis is right-continuous on [0,1].
    fn find_span(&self, t: f64) -> usize {
        let p = self.degree;
        if t >= 1.0 {
            return self.l - 1;
        }
        let mut lo = p;
        let mut hi = self.l - 1;
        while lo < hi {
            let mid = (lo + hi + 1) / 2;
            if self.knots[mid] <= t {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        lo
    }

    /// Values of the `count(q)` = l + degree - q basis functions of degree `q`
    /// (on this knot vector) that are possibly non-zero, written densely into a
    /// full-length vector.
    fn eval_all_degree(&self, t: f64, q: usize) -> Vec<f64> {
        let mu = self.find_span(t);
        let mut n = vec![0.0; q + 1];
        let mut left = vec![0.0; q + 1];
        let mut right = vec![0.0; q + 1];
        n[0] = 1.0;
        for j in 1..=q {
            left[j] = t - self.knots[mu + 1 - j];
            right[j] = self.knots[mu + j] - t;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = n[r] / (right[r + 1] + left[j - r]);
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }
        let count = self.l + self.degree - q;
        let mut out = vec![0.0; count];
        for (offset, value) in n.into_iter().enumerate() {
            out[mu - q + offset] = value;
        }
        out
    }

    /// Evaluate all basis functions at t in [0,1].
    pub fn eval(&self, t: f64) -> Vec<f64> {
        self.eval_all_degree(t, self.degree)
    }

    /// Evaluate the `order`-th derivative (order 0, 1 or 2) of every basis
    /// function at t. Second derivatives are one-sided at knots (taken from the
    /// span `find_span` assigns), which is immaterial under integrals.
    pub fn eval_deriv(&self, t: f64, order: usize) -> Result<Vec<f64>> {
        let p = self.degree;
        match order {
            0 => Ok(self.eval(t)),
            1 | 2 if p >= order => {
                let tau = &self.knots;
                let inv = |num: f64| if num > 0.0 { 1.0 / num } else { 0.0 };
                if order == 1 {
                    let lower = self.eval_all_degree(t, p - 1);
                    let low = |i: usize| if i < lower.len() { lower[i] } else { 0.0 };
                    let c = |i: usize| inv(tau[i + p] - tau[i]);
                    Ok((0..self.l)
                        .map(|l| p as f64 * (c(l) * low(l) - c(l + 1) * low(l + 1)))
                        .collect())
                } else {
                    let lower = self.eval_all_degree(t, p - 2);
                    let low = |i: usize| if i < lower.len() { lower[i] } else { 0.0 };
                    let c = |i: usize| inv(tau[i + p] - tau[i]);
                    let d = |i: usize| inv(tau[i + p - 1] - tau[i]);
                    let factor = (p * (p - 1)) as f64;
                    Ok((0..self.l)
                        .map(|l| {
                            factor
                                * (c(l) * d(l) * low(l)
                                    - (c(l) + c(l + 1)) * d(l + 1) * low(l + 1)
                                    + c(l + 1) * d(l + 2) * low(l + 2))
                        })
                        .collect())
                }
            }
            _ => Err(Error::InvalidConfig(format!(
                "derivative order {order} unsupported for degree {p}"
            ))),
        }
    }

    /// Basis evaluated at each grid point: grid.len() x l.
    pub fn eval_matrix(&self, grid: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(grid.len(), self.l);
        for (row, &t) in grid.iter().enumerate() {
            let vals = self.eval(t);
            for (col, v) in vals.into_iter().enumerate() {
                m[(row, col)] = v;
            }
        }
        m
    }

    /// Greville abscissae: the knot averages at which a spline with
    /// coefficients b_l = a + c * greville_l reproduces the affine function
    /// a + c t exactly.
    pub fn greville(&self) -> Vec<f64> {
        let p = self.degree;
        (0..self.l)
            .map(|l| self.knots[l + 1..=l + p].iter().sum::<f64>() / p as f64)
            .collect()
    }
}

/// Symmetric positive semi-definite curvature penalty with entries
/// P(l,l') = integral B_l''(t) B_l'''(t) dt; its nullspace is the affine
/// coefficient space for cubic clamped bases.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyMatrix {
    entries: DMatrix<f64>,
    ridge_epsilon: f64,
}

impl PenaltyMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Fixed identifiability ridge used everywhere the penalty must be
    /// inverted: 1e-8 times the mean diagonal entry.
    pub fn ridge_epsilon(&self) -> f64 {
        self.ridge_epsilon
    }
}

/// Exact penalty matrix: second derivatives of degree-p splines are piecewise
/// polynomials of degree p-2, so per-span Gauss quadrature with p-1 points
/// integrates their products exactly.
pub fn penalty_matrix(basis: &SplineBasis) -> Result<PenaltyMatrix> {
    let p = basis.degree();
    if p < 2 {
        return Err(Error::PenaltyDegree { degree: p });
    }
    let n_gauss = (p - 1).clamp(1, 4);
    let (nodes, weights) = gauss_legendre(n_gauss);
    let l = basis.len();
    let mut entries = DMatrix::zeros(l, l);
    let knots = basis.knots();
    for span in p..l {
        let (a, b) = (knots[span], knots[span + 1]);
        if !(b > a) {
            continue;
        }
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (x, w) in nodes.iter().zip(weights) {
            let t = mid + half * x;
            let d2 = basis.eval_deriv(t, 2)?;
            let scale = w * half;
            for i in 0..l {
                if d2[i] == 0.0 {
                    continue;
                }
                for j in i..l {
                    entries[(i, j)] += scale * d2[i] * d2[j];
                }
            }
        }
    }
    // Mirror the upper triangle so symmetry is exact by construction.
    for i in 0..l {
        for j in 0..i {
            entries[(i, j)] = entries[(j, i)];
        }
    }
    let ridge_epsilon = 1e-8 * entries.diagonal().mean();
    Ok(PenaltyMatrix {
        entries,
        ridge_epsilon,
    })
}

/// Gauss-Legendre nodes and weights on [-1,1] for n <= 4 points.
fn gauss_legendre(n: usize) -> (&'static [f64], &'static [f64]) {
    const N1: ([f64; 1], [f64; 1]) = ([0.0], [2.0]);
    const N2: ([f64; 2], [f64; 2]) = ([-0.577_350_269_189_625_7, 0.577_350_269_189_625_7], [1.0, 1.0]);
    const N3: ([f64; 3], [f64; 3]) = (
        [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4],
        [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0],
    );
    const N4: ([f64; 4], [f64; 4]) = (
        [
            -0.861_136_311_594_052_6,
            -0.339_981_043_584_856_3,
            0.339_981_043_584_856_3,
            0.861_136_311_594_052_6,
        ],
        [
            0.347_854_845_137_453_86,
            0.652_145_154_862_546_1,
            0.652_145_154_862_546_1,
            0.347_854_845_137_453_86,
        ],
    );
    match n {
        1 => (&N1.0, &N1.1),
        2 => (&N2.0, &N2.1),
        3 => (&N3.0, &N3.1),
        _ => (&N4.0, &N4.1),
    }
}

/// The three parametric weight families of the interaction term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightForm {
    Exponential,
    Gaussian,
    Linear,
}

impl std::fmt::Display for WeightForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            WeightForm::Exponential => "exponential",
            WeightForm::Gaussian => "gaussian",
            WeightForm::Linear => "linear",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for WeightForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exponential" => Ok(WeightForm::Exponential),
            "gaussian" => Ok(WeightForm::Gaussian),
            "linear" => Ok(WeightForm::Linear),
            other => Err(Error::InvalidWeight(format!(
                "unknown weight form '{other}' (expected exponential, gaussian or linear)"
            ))),
        }
    }
}

/// A weight family plus its locality parameter rho (> 0); larger rho decays
/// faster, making the interaction more local around the SNP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSpec {
    pub form: WeightForm,
    pub rho: f64,
}

impl WeightSpec {
    pub fn new(form: WeightForm, rho: f64) -> Result<Self> {
        let spec = Self { form, rho };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.rho.is_finite() || self.rho <= 0.0 {
            return Err(Error::InvalidWeight(format!(
                "rho must be finite and positive, got {}",
                self.rho
            )));
        }
        Ok(())
    }

    /// Compact label used in study output tables, e.g. `exponential:0.1`.
    pub fn label(&self) -> String {
        format!("{}:{}", self.form, self.rho)
    }
}

impl std::fmt::Display for WeightSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}(rho={})", self.form, self.rho)
    }
}

/// Evaluate psi_rho at a non-negative distance u; psi_rho(0) = 1 for all forms.
pub fn weight_eval(spec: &WeightSpec, u: f64) -> Result<f64> {
    spec.validate()?;
    if !u.is_finite() || u < 0.0 {
        return Err(Error::NegativeDistance(u));
    }
    let rho = spec.rho;
    Ok(match spec.form {
        WeightForm::Exponential => (-rho * u).exp(),
        WeightForm::Gaussian => (-rho * rho * u * u).exp(),
        WeightForm::Linear => (1.0 - rho * u).max(0.0),
    })
}

/// Trapezoid quadrature weights for a strictly increasing grid.
pub fn trapezoid_weights(grid: &[f64]) -> Result<Vec<f64>> {
    let m = grid.len();
    if m < 2 {
        return Err(Error::InvalidConfig(format!(
            "quadrature grid needs >= 2 points, got {m}"
        )));
    }
    let mut w = vec![0.0; m];
    w[0] = 0.5 * (grid[1] - grid[0]);
    w[m - 1] = 0.5 * (grid[m - 1] - grid[m - 2]);
    for j in 1..m - 1 {
        w[j] = 0.5 * (grid[j + 1] - grid[j - 1]);
    }
    Ok(w)
}

/// Functional covariates Z_l = integral B_l(t) Pi(t) dt by the trapezoid rule.
pub fn functional_covariates(curve: &[f64], basis: &SplineBasis, grid: &[f64]) -> Result<Vec<f64>> {
    if curve.len() != grid.len() {
        return Err(Error::LengthMismatch {
            what: "curve vs grid",
            left: curve.len(),
            right: grid.len(),
        });
    }
    let w = trapezoid_weights(grid)?;
    let mut z = vec![0.0; basis.len()];
    for ((&t, &pi), &wj) in grid.iter().zip(curve).zip(&w) {
        let vals = basis.eval(t);
        let scale = wj * pi;
        for (l, v) in vals.into_iter().enumerate() {
            z[l] += scale * v;
        }
    }
    Ok(z)
}

/// Validate scaled SNP positions and build the grid_size x D matrix of
/// psi_rho(|t - u_d|) values.
pub fn weight_matrix(spec: &WeightSpec, snp_positions: &[f64], grid: &[f64]) -> Result<DMatrix<f64>> {
    for (d, &u) in snp_positions.iter().enumerate() {
        if !u.is_finite() || !(0.0..=1.0).contains(&u) {
            return Err(Error::SnpOutsideRegion {
                index: d,
                position: u,
            });
        }
    }
    let mut m = DMatrix::zeros(grid.len(), snp_positions.len());
    for (row, &t) in grid.iter().enumerate() {
        for (col, &u) in snp_positions.iter().enumerate() {
            m[(row, col)] = weight_eval(spec, (t - u).abs())?;
        }
    }
    Ok(m)
}

/// Interaction covariates Omega_d = integral psi_rho(|t - u_d|) Pi(t) dt by the
/// trapezoid rule; u_d are scaled SNP positions in [0,1].
pub fn interaction_covariates(
    curve: &[f64],
    spec: &WeightSpec,
    snp_positions: &[f64],
    grid: &[f64],
) -> Result<Vec<f64>> {
    if curve.len() != grid.len() {
        return Err(Error::LengthMismatch {
            what: "curve vs grid",
            left: curve.len(),
            right: grid.len(),
        });
    }
    let psi = weight_matrix(spec, snp_positions, grid)?;
    let w = trapezoid_weights(grid)?;
    let mut omega = vec![0.0; snp_positions.len()];
    for (row, (&pi, &wj)) in curve.iter().zip(&w).enumerate() {
        let scale = pi * wj;
        for (d, o) in omega.iter_mut().enumerate() {
            *o += scale * psi[(row, d)];
        }
    }
    Ok(omega)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Naive textbook Cox-de Boor recursion, evaluating one basis function at a
    /// time; the independent oracle for the production triangle algorithm.
    fn naive_b(knots: &[f64], i: usize, q: usize, t: f64) -> f64 {
        if q == 0 {
            let last_interior = t >= 1.0 && knots[i] < 1.0 && knots[i + 1] >= 1.0;
            return if (knots[i] <= t && t < knots[i + 1]) || last_interior {
                1.0
            } else {
                0.0
            };
        }
        let mut v = 0.0;
        let left = knots[i + q] - knots[i];
        if left > 0.0 {
            v += (t - knots[i]) / left * naive_b(knots, i, q - 1, t);
        }
        let right = knots[i + q + 1] - knots[i + 1];
        if right > 0.0 {
            v += (knots[i + q + 1] - t) / right * naive_b(knots, i + 1, q - 1, t);
        }
        v
    }

    fn naive_d2(knots: &[f64], i: usize, p: usize, t: f64) -> f64 {
        let inv = |x: f64| if x > 0.0 { 1.0 / x } else { 0.0 };
        let c = |j: usize| inv(knots[j + p] - knots[j]);
        let d = |j: usize| inv(knots[j + p - 1] - knots[j]);
        (p * (p - 1)) as f64
            * (c(i) * d(i) * naive_b(knots, i, p - 2, t)
                - (c(i) + c(i + 1)) * d(i + 1) * naive_b(knots, i + 1, p - 2, t)
                + c(i + 1) * d(i + 2) * naive_b(knots, i + 2, p - 2, t))
    }

    #[test]
    fn rejects_too_few_functions() {
        assert!(matches!(
            SplineBasis::new(3, 3),
            Err(Error::InvalidBasis { .. })
        ));
    }

    #[test]
    fn clamped_endpoint_values() {
        let basis = SplineBasis::new(4, 3).unwrap();
        assert_eq!(basis.eval(0.0), vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(basis.eval(1.0), vec![0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn partition_of_unity_random_points() {
        let basis = SplineBasis::new(10, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let t: f64 = rng.gen();
            let sum: f64 = basis.eval(t).iter().sum();
            assert!((sum - 1.0).abs() <= 1e-12, "sum {sum} at t = {t}");
        }
        // Endpoints included.
        for t in [0.0, 1.0] {
            let sum: f64 = basis.eval(t).iter().sum();
            assert!((sum - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn matches_naive_recursion() {
        let basis = SplineBasis::new(10, 3).unwrap();
        let knots = basis.knots();
        for step in 0..=200 {
            let t = step as f64 / 200.0;
            let vals = basis.eval(t);
            for i in 0..10 {
                let oracle = naive_b(knots, i, 3, t);
                assert_abs_diff_eq!(vals[i], oracle, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn second_derivative_matches_naive_route() {
        let basis = SplineBasis::new(8, 3).unwrap();
        let knots = basis.knots();
        for step in 0..=97 {
            let t = step as f64 / 97.0;
            let d2 = basis.eval_deriv(t, 2).unwrap();
            for i in 0..8 {
                let oracle = naive_d2(knots, i, 3, t);
                assert_abs_diff_eq!(d2[i], oracle, epsilon = 1e-9 * (1.0 + oracle.abs()));
            }
        }
    }

    #[test]
    fn penalty_annihilates_constants_and_affine() {
        let basis = SplineBasis::new(10, 3).unwrap();
        let p = penalty_matrix(&basis).unwrap();
        let ones = nalgebra::DVector::from_element(10, 1.0);
        let q_const = (ones.transpose() * p.matrix() * &ones)[(0, 0)];
        assert!(q_const.abs() <= 1e-10, "constant quadratic form {q_const}");

        let greville = basis.greville();
        let affine = nalgebra::DVector::from_iterator(10, greville.iter().map(|&x| -0.7 + 2.3 * x));
        let q_affine = (affine.transpose() * p.matrix() * &affine)[(0, 0)];
        assert!(q_affine.abs() <= 1e-10, "affine quadratic form {q_affine}");
    }

    #[test]
    fn penalty_is_psd_with_two_dim_nullspace() {
        for l in [6usize, 10, 14] {
            let basis = SplineBasis::new(l, 3).unwrap();
            let p = penalty_matrix(&basis).unwrap();
            let eig = nalgebra::SymmetricEigen::new(p.matrix().clone());
            let max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
            let mut null_count = 0;
            for &ev in eig.eigenvalues.iter() {
                assert!(ev >= -1e-10 * max, "negative eigenvalue {ev} at L = {l}");
                if ev <= 1e-9 * max {
                    null_count += 1;
                }
            }
            assert_eq!(null_count, 2, "nullspace dimension at L = {l}");
        }
    }

    #[test]
    fn penalty_matches_brute_force_quadrature() {
        // B''B'' is piecewise quadratic, so knot-aligned composite Simpson with
        // ~1e5 points integrates it exactly up to rounding; second derivatives
        // come from the naive recursion to keep the oracle independent.
        for l in [6usize, 10] {
            let basis = SplineBasis::new(l, 3).unwrap();
            let knots = basis.knots();
            let p = penalty_matrix(&basis).unwrap();
            let spans: Vec<(f64, f64)> = (3..l)
                .map(|s| (knots[s], knots[s + 1]))
                .filter(|(a, b)| b > a)
                .collect();
            let panels_per_span = (100_000 / spans.len()).div_ceil(2) * 2;
            for i in 0..l {
                for j in i..l {
                    let mut total = 0.0;
                    for &(a, b) in &spans {
                        let h = (b - a) / panels_per_span as f64;
                        let f = |t: f64| naive_d2(knots, i, 3, t) * naive_d2(knots, j, 3, t);
                        let mut s = f(a) + f(b);
                        for step in 1..panels_per_span {
                            let t = a + h * step as f64;
                            s += f(t) * if step % 2 == 1 { 4.0 } else { 2.0 };
                        }
                        total += s * h / 3.0;
                    }
                    assert_abs_diff_eq!(p.matrix()[(i, j)], total, epsilon = 1e-6);
                }
            }
        }
    }

    #[test]
    fn weight_forms_match_contract() {
        for form in [WeightForm::Exponential, WeightForm::Gaussian, WeightForm::Linear] {
            let spec = WeightSpec::new(form, 5.0).unwrap();
            assert_eq!(weight_eval(&spec, 0.0).unwrap(), 1.0);
        }
        let linear = WeightSpec::new(WeightForm::Linear, 2.0).unwrap();
        assert_eq!(weight_eval(&linear, 0.6).unwrap(), 0.0);
        let gaussian = WeightSpec::new(WeightForm::Gaussian, 2.0).unwrap();
        assert_abs_diff_eq!(
            weight_eval(&gaussian, 0.5).unwrap(),
            (-1.0f64).exp(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn weight_eval_rejects_negative_distance() {
        let spec = WeightSpec::new(WeightForm::Exponential, 1.0).unwrap();
        assert!(matches!(
            weight_eval(&spec, -0.1),
            Err(Error::NegativeDistance(_))
        ));
    }

    #[test]
    fn weight_eval_monotone_non_increasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let rho = rng.gen_range(0.05..20.0);
            let mut u1: f64 = rng.gen();
            let mut u2: f64 = rng.gen();
            if u1 > u2 {
                std::mem::swap(&mut u1, &mut u2);
            }
            for form in [WeightForm::Exponential, WeightForm::Gaussian, WeightForm::Linear] {
                let spec = WeightSpec::new(form, rho).unwrap();
                let v1 = weight_eval(&spec, u1).unwrap();
                let v2 = weight_eval(&spec, u2).unwrap();
                assert!(v1 >= v2, "{form} rho={rho}: psi({u1})={v1} < psi({u2})={v2}");
                assert!((0.0..=1.0).contains(&v1) && (0.0..=1.0).contains(&v2));
            }
        }
    }

    #[test]
    fn functional_covariates_sum_to_curve_integral() {
        let basis = SplineBasis::new(10, 3).unwrap();
        let grid = crate::curves::uniform_grid(2001);
        let ones = vec![1.0; grid.len()];
        let z = functional_covariates(&ones, &basis, &grid).unwrap();
        assert_abs_diff_eq!(z.iter().sum::<f64>(), 1.0, epsilon = 1e-8);

        let ramp: Vec<f64> = grid.clone();
        let z = functional_covariates(&ramp, &basis, &grid).unwrap();
        assert_abs_diff_eq!(z.iter().sum::<f64>(), 0.5, epsilon = 1e-8);
    }

    #[test]
    fn functional_covariates_match_exact_spline_integrals() {
        // Exact integral of a clamped B-spline: (tau_{l+p+1} - tau_l)/(p+1).
        let basis = SplineBasis::new(10, 3).unwrap();
        let knots = basis.knots();
        let grid = crate::curves::uniform_grid(2001);
        let ones = vec![1.0; grid.len()];
        let z = functional_covariates(&ones, &basis, &grid).unwrap();
        for l in 0..10 {
            let exact = (knots[l + 4] - knots[l]) / 4.0;
            assert_abs_diff_eq!(z[l], exact, epsilon = 1e-6);
        }
    }

    #[test]
    fn functional_covariates_linear_in_curve() {
        let basis = SplineBasis::new(8, 3).unwrap();
        let grid = crate::curves::uniform_grid(501);
        let c1: Vec<f64> = grid.iter().map(|t| 0.5 + 0.3 * (3.0 * t).sin()).collect();
        let c2: Vec<f64> = grid.iter().map(|t| 0.4 + 0.2 * (5.0 * t).cos()).collect();
        let (a, b) = (0.7, -0.4);
        let combo: Vec<f64> = c1.iter().zip(&c2).map(|(x, y)| a * x + b * y).collect();
        let z1 = functional_covariates(&c1, &basis, &grid).unwrap();
        let z2 = functional_covariates(&c2, &basis, &grid).unwrap();
        let zc = functional_covariates(&combo, &basis, &grid).unwrap();
        for l in 0..8 {
            assert_abs_diff_eq!(zc[l], a * z1[l] + b * z2[l], epsilon = 1e-10);
        }
    }

    #[test]
    fn functional_covariates_length_mismatch() {
        let basis = SplineBasis::new(6, 3).unwrap();
        let grid = crate::curves::uniform_grid(11);
        assert!(matches!(
            functional_covariates(&[1.0; 10], &basis, &grid),
            Err(Error::LengthMismatch { .. })
        ));
    }

    fn exp_closed_form(rho: f64, u: f64) -> f64 {
        (2.0 - (-rho * u).exp() - (-rho * (1.0 - u)).exp()) / rho
    }

    #[test]
    fn interaction_covariates_match_closed_forms() {
        let grid = crate::curves::uniform_grid(2001);
        let ones = vec![1.0; grid.len()];

        let exp1 = WeightSpec::new(WeightForm::Exponential, 1.0).unwrap();
        let omega = interaction_covariates(&ones, &exp1, &[0.0], &grid).unwrap();
        assert_abs_diff_eq!(omega[0], 1.0 - (-1.0f64).exp(), epsilon = 1e-6);

        let lin1 = WeightSpec::new(WeightForm::Linear, 1.0).unwrap();
        let omega = interaction_covariates(&ones, &lin1, &[0.0], &grid).unwrap();
        assert_abs_diff_eq!(omega[0], 0.5, epsilon = 1e-6);

        let zeros = vec![0.0; grid.len()];
        let omega = interaction_covariates(&zeros, &exp1, &[0.3, 0.9], &grid).unwrap();
        assert_eq!(omega, vec![0.0, 0.0]);
    }

    #[test]
    fn interaction_covariates_reject_outside_snp() {
        let grid = crate::curves::uniform_grid(101);
        let ones = vec![1.0; grid.len()];
        let spec = WeightSpec::new(WeightForm::Exponential, 1.0).unwrap();
        assert!(matches!(
            interaction_covariates(&ones, &spec, &[1.2], &grid),
            Err(Error::SnpOutsideRegion { .. })
        ));
    }

    #[test]
    fn trapezoid_accuracy_on_default_grid() {
        // The default 2001-point grid keeps every exponential-weight integral
        // within 1e-6 of its closed form across rho in {0.1, 1, 8, 20}.
        let spec = |rho| WeightSpec::new(WeightForm::Exponential, rho).unwrap();
        let grid = crate::curves::uniform_grid(SmoothGridDefault::SIZE);
        let ones = vec![1.0; grid.len()];
        for rho in [0.1, 1.0, 8.0, 20.0] {
            for u in [0.0, 0.5, 1.0] {
                let omega = interaction_covariates(&ones, &spec(rho), &[u], &grid).unwrap();
                let exact = exp_closed_form(rho, u);
                assert!(
                    (omega[0] - exact).abs() <= 1e-6,
                    "rho={rho} u={u}: err {}",
                    (omega[0] - exact).abs()
                );
            }
        }
        // This is why the default grid is 2001 points: at 1001 the rho = 20
        // integral misses the closed form by more than the tolerance.
        let coarse = crate::curves::uniform_grid(1001);
        let ones_coarse = vec![1.0; coarse.len()];
        let omega = interaction_covariates(&ones_coarse, &spec(20.0), &[0.5], &coarse).unwrap();
        assert!((omega[0] - exp_closed_form(20.0, 0.5)).abs() > 1e-6);
    }

    struct SmoothGridDefault;
    impl SmoothGridDefault {
        const SIZE: usize = 2001;
    }

    #[test]
    fn default_grid_size_matches_smoothing_config() {
        assert_eq!(
            crate::curves::SmoothingConfig::default().grid_size,
            SmoothGridDefault::SIZE
        );
    }

    #[test]
    fn greville_reproduces_affine_functions() {
        let basis = SplineBasis::new(9, 3).unwrap();
        let greville = basis.greville();
        for step in 0..=50 {
            let t = step as f64 / 50.0;
            let vals = basis.eval(t);
            let interp: f64 = vals
                .iter()
                .zip(&greville)
                .map(|(b, &g)| b * (1.5 - 0.8 * g))
                .sum();
            assert_abs_diff_eq!(interp, 1.5 - 0.8 * t, epsilon = 1e-12);
        }
    }
}
