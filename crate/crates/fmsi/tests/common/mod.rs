//! Independent oracles for the acceptance suite. Everything here recomputes
//! quantities the library produces, by a different route: direct dense
//! solves instead of the rotated Cholesky, quadrature instead of closed
//! forms, and special functions built from scratch.

use fmsi::{DesignBlocks, PenaltyMatrix, WeightForm, WeightSpec};
use nalgebra::{Cholesky, DMatrix, DVector};

pub const SQRT_PI: f64 = 1.772_453_850_905_516;

/// Error function by Maclaurin series (|z| <= 3.5) or the asymptotic erfc
/// expansion; absolute error well below 1e-10 on both branches.
pub fn erf_oracle(z: f64) -> f64 {
    if z < 0.0 {
        return -erf_oracle(-z);
    }
    if z <= 3.5 {
        let z2 = z * z;
        let mut term = z;
        let mut sum = z;
        let mut n = 0;
        while n < 200 {
            n += 1;
            term *= -z2 / n as f64;
            let add = term / (2 * n + 1) as f64;
            sum += add;
            if add.abs() < 1e-17 * sum.abs().max(1e-300) {
                break;
            }
        }
        2.0 / SQRT_PI * sum
    } else {
        let z2 = z * z;
        let s = 1.0 - 1.0 / (2.0 * z2) + 3.0 / (4.0 * z2 * z2) - 15.0 / (8.0 * z2 * z2 * z2);
        1.0 - (-z2).exp() / (z * SQRT_PI) * s
    }
}

/// ln Gamma(k/2) for integer k >= 1, from the exact factorial /
/// double-factorial forms; no Lanczos anywhere.
pub fn ln_gamma_half(k: u32) -> f64 {
    assert!(k >= 1);
    if k % 2 == 0 {
        // Gamma(m) = (m-1)!
        let m = k / 2;
        (1..m).map(|i| f64::from(i).ln()).sum()
    } else {
        // Gamma(m + 1/2) = sqrt(pi) * prod_{j=1..m} (j - 1/2)
        let m = (k - 1) / 2;
        0.5 * std::f64::consts::PI.ln() + (1..=m).map(|j| (f64::from(j) - 0.5).ln()).sum::<f64>()
    }
}

fn simpson_rec(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * eps {
        left + right + delta / 15.0
    } else {
        simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1)
            + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1)
    }
}

/// Adaptive Simpson quadrature with Richardson correction.
pub fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, eps: f64) -> f64 {
    let fa = f(a);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let fb = f(b);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(&f, a, b, fa, fm, fb, whole, eps, 48)
}

/// Regularized incomplete beta for half-integer parameters (a = ka/2,
/// b = kb/2), by quadrature after t = sin^2(theta): the integrand
/// 2 sin^{2a-1} cos^{2b-1} is bounded for a, b >= 1/2.
pub fn inc_beta_oracle(ka: u32, kb: u32, x: f64) -> f64 {
    assert!((0.0..=1.0).contains(&x));
    if x == 0.0 {
        return 0.0;
    }
    if x == 1.0 {
        return 1.0;
    }
    let a = f64::from(ka) / 2.0;
    let b = f64::from(kb) / 2.0;
    let ln_b = ln_gamma_half(ka) + ln_gamma_half(kb) - ln_gamma_half(ka + kb);
    let integrand = move |theta: f64| {
        let (s, c) = theta.sin_cos();
        // Guard 0^0 at the endpoints when an exponent is exactly zero.
        let sp = if 2.0 * a - 1.0 == 0.0 { 1.0 } else { s.powf(2.0 * a - 1.0) };
        let cp = if 2.0 * b - 1.0 == 0.0 { 1.0 } else { c.powf(2.0 * b - 1.0) };
        2.0 * sp * cp
    };
    let hi = x.sqrt().asin();
    let raw = adaptive_simpson(integrand, 0.0, hi, 1e-11 * ln_b.exp().max(1e-300));
    raw / ln_b.exp()
}

/// F upper tail from the incomplete-beta identity, entirely on oracle code.
pub fn f_upper_tail_oracle(x: f64, df1: u32, df2: u32) -> f64 {
    let d1 = f64::from(df1);
    let d2 = f64::from(df2);
    inc_beta_oracle(df2, df1, d2 / (d2 + d1 * x))
}

/// Closed-form integral over [0, 1] of psi_rho(|t - s|) for each weight
/// family, for a SNP at scaled position s.
pub fn psi_integral_closed_form(spec: &WeightSpec, s: f64) -> f64 {
    let rho = spec.rho;
    match spec.form {
        WeightForm::Exponential => (2.0 - (-rho * s).exp() - (-rho * (1.0 - s)).exp()) / rho,
        WeightForm::Gaussian => {
            SQRT_PI / (2.0 * rho) * (erf_oracle(rho * s) + erf_oracle(rho * (1.0 - s)))
        }
        WeightForm::Linear => {
            let left = s.min(1.0 / rho);
            let right = (1.0 - s).min(1.0 / rho);
            left + right - 0.5 * rho * (left * left + right * right)
        }
    }
}

/// Integral over [0, 1] of e^{-rho |t-s|} (c0 + c1 t) dt, elementary closed
/// form used to exercise the quadrature against a non-constant curve.
pub fn exp_psi_linear_curve_closed_form(rho: f64, s: f64, c0: f64, c1: f64) -> f64 {
    // On [0, s]: psi = e^{-rho (s - t)}; on [s, 1]: psi = e^{-rho (t - s)}.
    // int e^{k t} (c0 + c1 t) dt = e^{k t} (c0/k + c1 t/k - c1/k^2)
    let anti = |k: f64, t: f64| (k * t).exp() * (c0 / k + c1 * t / k - c1 / (k * k));
    let left = (-rho * s).exp() * (anti(rho, s) - anti(rho, 0.0));
    let right = (rho * s).exp() * (anti(-rho, 1.0) - anti(-rho, s));
    left + right
}

/// Joint-solve oracle in original coordinates: one dense full-pivot LU on
/// A'A + blockdiag(0, lambda P + eps I), no rotation, no equilibration.
pub fn direct_penalized_solve(
    blocks: &DesignBlocks,
    y: &DVector<f64>,
    lambda: f64,
    penalty: &PenaltyMatrix,
) -> DVector<f64> {
    let dims = blocks.dims();
    let a = blocks.a();
    let mut h = a.tr_mul(a);
    let off = dims.b_offset();
    let eps = penalty.ridge_epsilon();
    for i in 0..dims.l {
        for j in 0..dims.l {
            h[(off + i, off + j)] += lambda * penalty.matrix()[(i, j)];
        }
        h[(off + i, off + i)] += eps;
    }
    let aty = a.tr_mul(y);
    h.full_piv_lu().solve(&aty).expect("oracle normal equations solvable")
}

/// GLS through the marginal covariance V = I + Z Q^{-1} Z' with
/// Q = lambda P + eps I (penalty eigenvalues below 1e-12 of the largest
/// flushed to zero, matching the model's definition of Q). V^{-1} is applied
/// via the factored Woodbury identity V^{-1} = I - C (I + C'C)^{-1} C' with
/// C = Z U diag(q_i^{-1/2}): the inner matrix has spectrum >= 1, so the
/// evaluation stays accurate even when Q is nearly singular and V itself is
/// not representable. Returns the fixed-effect estimates, (X' V^{-1} X)^{-1},
/// and RSS_GLS.
pub fn gls_fixed_effects(
    blocks: &DesignBlocks,
    y: &DVector<f64>,
    lambda: f64,
    penalty: &PenaltyMatrix,
) -> (DVector<f64>, DMatrix<f64>, f64) {
    let dims = blocks.dims();
    let eps = penalty.ridge_epsilon();
    let se = nalgebra::SymmetricEigen::new(penalty.matrix().clone());
    let floor = se.eigenvalues.iter().fold(0.0f64, |m, &v| m.max(v)) * 1e-12;
    let q_evals = DVector::from_fn(dims.l, |i, _| {
        let ev = if se.eigenvalues[i] > floor { se.eigenvalues[i] } else { 0.0 };
        lambda * ev + eps
    });
    let c = blocks.zb()
        * &se.eigenvectors
        * DMatrix::from_diagonal(&q_evals.map(|v| 1.0 / v.sqrt()));
    let m_chol = Cholesky::new(DMatrix::identity(dims.l, dims.l) + c.tr_mul(&c))
        .expect("I + C'C is PD");
    let vinv = |rhs: &DMatrix<f64>| rhs - &c * m_chol.solve(&c.tr_mul(rhs));

    let x = blocks.x().into_owned();
    let vinv_x = vinv(&x);
    let xtvx = x.tr_mul(&vinv_x);
    let xtvx_inv = xtvx
        .clone()
        .try_inverse()
        .expect("X'V^-1X invertible in oracle");
    let beta = &xtvx_inv * vinv_x.tr_mul(y);
    let resid = y - &x * &beta;
    let ctr = c.tr_mul(&resid);
    let rss_gls = resid.dot(&resid) - ctr.dot(&m_chol.solve(&ctr));
    (beta, xtvx_inv, rss_gls)
}
