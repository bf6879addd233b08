//! Temporary grid-tuning pilots; run explicitly with --ignored --nocapture.

use fmsi::harness::{run_study, StudyKind, StudySpec, StudyResult};
use fmsi::simgen::{MixtureNoise, NoiseSpec, SimConfig};
use fmsi::{WeightForm, WeightSpec};

fn ws(form: WeightForm, rho: f64) -> WeightSpec {
    WeightSpec { form, rho }
}

fn nine_specs() -> Vec<WeightSpec> {
    let mut out = Vec::new();
    for form in [WeightForm::Exponential, WeightForm::Gaussian, WeightForm::Linear] {
        for rho in [0.1, 1.0, 8.0] {
            out.push(ws(form, rho));
        }
    }
    out
}

fn base(replicates: u64) -> StudySpec {
    StudySpec {
        study_kind: StudyKind::Type1,
        replicates,
        sim: SimConfig::default(),
        fit_weight_specs: vec![ws(WeightForm::Exponential, 1.0)],
        eta_grid: vec![],
        alpha_level: 0.05,
        parallelism: 1,
        basis_size: 10,
        scenario: None,
        window_bp: 500_000.0,
    }
}

fn show(r: &StudyResult) {
    for rr in &r.rejection_rates {
        println!("reject {:<18} rate={:.4} se={:.4} used={}", rr.fit_spec, rr.rate, rr.se, rr.replicates_used);
    }
    for c in &r.power {
        println!("power eta={:<6} {:<24} n={} power={:.4} se={:.4}", c.eta, c.rho_fit, c.n, c.power, c.se);
    }
    if let Some(m) = &r.misspec {
        println!("misspec true={} max_drop={:.4}", m.true_spec, m.max_drop);
        for d in &m.per_eta {
            println!("  eta={:<6} max_drop={:.4}", d.eta, d.max_drop);
        }
    }
    println!("excluded: {}", r.excluded);
}

#[test]
#[ignore]
fn pilot_timing_type1() {
    let spec = StudySpec { fit_weight_specs: nine_specs(), ..base(200) };
    show(&run_study(&spec).unwrap());
}

#[test]
#[ignore]
fn pilot_mixture() {
    let sim = SimConfig { n: 355, noise: NoiseSpec::Mixture(MixtureNoise::default()), ..SimConfig::default() };
    let spec = StudySpec {
        study_kind: StudyKind::MixtureH0,
        sim,
        fit_weight_specs: vec![ws(WeightForm::Exponential, 10.0)],
        ..base(1000)
    };
    let result = run_study(&spec).unwrap();
    show(&result);
    let mut ps: Vec<f64> = result.pvalues.iter().map(|r| r.p).collect();
    ps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    println!("KS = {:.4}", fmsi::harness::ks_uniform(&ps));
}

#[test]
#[ignore]
fn pilot_power_rho1_n200() {
    let spec = StudySpec {
        study_kind: StudyKind::Power,
        fit_weight_specs: vec![ws(WeightForm::Exponential, 1.0)],
        eta_grid: vec![0.0, 2.0, 5.0, 10.0, 20.0, 40.0],
        ..base(40)
    };
    show(&run_study(&spec).unwrap());
}

#[test]
#[ignore]
fn pilot_power_rho01_rho8_n200() {
    for rho in [0.1, 8.0] {
        println!("--- rho = {rho}");
        let spec = StudySpec {
            study_kind: StudyKind::Power,
            fit_weight_specs: vec![ws(WeightForm::Exponential, rho)],
            eta_grid: vec![0.0, 2.0, 5.0, 10.0, 20.0, 40.0],
            ..base(40)
        };
        show(&run_study(&spec).unwrap());
    }
}

#[test]
#[ignore]
fn pilot_misspec_both_directions() {
    for (true_rho, fit_rhos) in [(0.1, vec![0.1, 8.0, 8.5, 9.0]), (8.0, vec![8.0, 0.1, 0.2, 0.4])] {
        println!("--- true rho = {true_rho}");
        let mut sim = SimConfig { n: 400, ..SimConfig::default() };
        sim.weight_spec = ws(WeightForm::Exponential, true_rho);
        let spec = StudySpec {
            study_kind: StudyKind::Misspec,
            sim,
            fit_weight_specs: fit_rhos.into_iter().map(|r| ws(WeightForm::Exponential, r)).collect(),
            eta_grid: vec![0.0, 5.0, 10.0, 20.0, 40.0],
            ..base(40)
        };
        show(&run_study(&spec).unwrap());
    }
}

#[test]
#[ignore]
fn pilot_baseline_scenario3() {
    let sim = SimConfig { n: 355, noise: NoiseSpec::Mixture(MixtureNoise::default()), ..SimConfig::default() };
    let spec = StudySpec {
        study_kind: StudyKind::BaselineCompare,
        sim,
        fit_weight_specs: vec![ws(WeightForm::Exponential, 10.0)],
        eta_grid: vec![0.0, 0.02, 0.05, 0.1, 0.2, 0.4],
        scenario: Some(5),
        ..base(30)
    };
    show(&run_study(&spec).unwrap());
}

#[test]
#[ignore]
fn pilot_size_r1000_single_spec() {
    let spec = StudySpec { ..base(1000) };
    let result = run_study(&spec).unwrap();
    show(&result);
    let mut ps: Vec<f64> = result.pvalues.iter().map(|r| r.p).collect();
    ps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    println!("KS = {:.4}", fmsi::harness::ks_uniform(&ps));
    let deciles: Vec<f64> = (1..10).map(|k| ps[k * ps.len() / 10]).collect();
    println!("p deciles: {:?}", deciles.iter().map(|p| format!("{p:.3}")).collect::<Vec<_>>());
}

#[test]
#[ignore]
fn pilot_full_type1_r1000() {
    let spec = StudySpec { fit_weight_specs: nine_specs(), ..base(1000) };
    let result = run_study(&spec).unwrap();
    show(&result);
    for label in result.rejection_rates.iter().map(|r| r.fit_spec.clone()) {
        let mut ps: Vec<f64> = result
            .pvalues
            .iter()
            .filter(|r| r.fit_spec == label)
            .map(|r| r.p)
            .collect();
        ps.sort_by(|a, b| a.partial_cmp(b).unwrap());
        println!("KS[{label}] = {:.4}", fmsi::harness::ks_uniform(&ps));
    }
}

#[test]
#[ignore]
fn probe_penalty_entries() {
    let spline = fmsi::SplineBasis::new(6, 3).unwrap();
    let penalty = fmsi::basis::penalty_matrix(&spline).unwrap();
    let panels = 20_000usize;
    let nodes = 2 * panels + 1;
    let d2: Vec<Vec<f64>> = (0..nodes)
        .map(|k| {
            let t = k as f64 / (nodes - 1) as f64;
            spline.eval_deriv(t, 2).unwrap()
        })
        .collect();
    let h = 1.0 / panels as f64;
    for j in 0..6 {
        for k in j..6 {
            let mut integral = 0.0;
            for p in 0..panels {
                let a = d2[2 * p][j] * d2[2 * p][k];
                let m = d2[2 * p + 1][j] * d2[2 * p + 1][k];
                let b = d2[2 * p + 2][j] * d2[2 * p + 2][k];
                integral += h / 6.0 * (a + 4.0 * m + b);
            }
            let want = penalty.matrix()[(j, k)];
            println!("({j},{k}): gauss = {want:+.10e} simpson = {integral:+.10e} diff = {:+.3e}", integral - want);
        }
    }
}

#[test]
#[ignore]
fn probe_penalty_entries_large() {
    for l in [10usize, 13] {
        let spline = fmsi::SplineBasis::new(l, 3).unwrap();
        let penalty = fmsi::basis::penalty_matrix(&spline).unwrap();
        let panels = 20_000usize;
        let nodes = 2 * panels + 1;
        let d2: Vec<Vec<f64>> = (0..nodes)
            .map(|k| {
                let t = k as f64 / (nodes - 1) as f64;
                spline.eval_deriv(t, 2).unwrap()
            })
            .collect();
        let h = 1.0 / panels as f64;
        for j in 0..l {
            for k in j..l {
                let mut integral = 0.0;
                for p in 0..panels {
                    let a = d2[2 * p][j] * d2[2 * p][k];
                    let m = d2[2 * p + 1][j] * d2[2 * p + 1][k];
                    let b = d2[2 * p + 2][j] * d2[2 * p + 2][k];
                    integral += h / 6.0 * (a + 4.0 * m + b);
                }
                let want = penalty.matrix()[(j, k)];
                let rel = (integral - want).abs() / (1.0 + want.abs());
                if rel > 1e-8 {
                    println!("L={l} ({j},{k}): gauss = {want:+.10e} simpson = {integral:+.10e} rel = {rel:.3e}");
                }
            }
        }
        println!("L={l} done");
    }
}

#[test]
#[ignore]
fn probe_reml_interior_optimum() {
    use fmsi::model::{assemble_design, fit_penalized, reml_objective};
    use fmsi::basis::penalty_matrix;
    for (n, sigma_t, sites) in [(150usize, 1.0f64, 150usize), (200, 0.5, 200), (120, 1.5, 120)] {
        for seed in [31u64, 32, 33, 34, 35] {
            let config = fmsi::SimConfig {
                n,
                d: 2,
                alpha: vec![1.1, -0.6],
                eta: vec![0.0; 2],
                sites_per_profile: sites,
                replication_sigma_t: sigma_t,
                seed,
                smoothing: fmsi::SmoothingConfig { k: 10, h_min: 1000.0, grid_size: 201 },
                ..fmsi::SimConfig::default()
            };
            let template = fmsi::CohortTemplate::new(&config).unwrap();
            let rep = fmsi::simgen::generate_dataset(&config, &template, 0).unwrap();
            let spline = fmsi::SplineBasis::new(8, 3).unwrap();
            let spec = fmsi::WeightSpec { form: fmsi::WeightForm::Exponential, rho: 1.0 };
            let blocks = assemble_design(&rep.dataset, &spline, &spec).unwrap();
            let penalty = penalty_matrix(&spline).unwrap();
            let fit = fit_penalized(&blocks, &rep.dataset.y, &penalty).unwrap();
            let step = 14.0 / 99.0;
            let mut best = (f64::NEG_INFINITY, 0.0);
            for k in 0..100 {
                let lg = -6.0 + step * k as f64;
                if let Ok(v) = reml_objective(&blocks, &rep.dataset.y, 10f64.powf(lg), &penalty) {
                    if v > best.0 { best = (v, lg); }
                }
            }
            let at_hat = reml_objective(&blocks, &rep.dataset.y, fit.lambda, &penalty).unwrap();
            println!(
                "n={n} sigma_t={sigma_t} sites={sites} seed={seed}: lg_hat = {:+.4} grid = {:+.4} gap = {:.4} value_gap = {:+.3e}",
                fit.lambda.log10(), best.1, (fit.lambda.log10() - best.1).abs(), at_hat - best.0
            );
        }
    }
}

#[test]
#[ignore]
fn probe_wald_gls_routes() {
    use fmsi::model::{assemble_design, fit_reml};
    use fmsi::basis::penalty_matrix;
    use fmsi::inference::wald_interaction_test;
    use nalgebra::{Cholesky, DMatrix, DVector};

    for seed in 51..=55u64 {
        let config = fmsi::SimConfig {
            n: 30,
            d: 1,
            alpha: vec![1.1],
            eta: vec![0.0],
            sites_per_profile: 60,
            seed,
            smoothing: fmsi::SmoothingConfig { k: 10, h_min: 1000.0, grid_size: 201 },
            ..fmsi::SimConfig::default()
        };
        let template = fmsi::CohortTemplate::new(&config).unwrap();
        let dataset = fmsi::simgen::generate_dataset(&config, &template, 0).unwrap().dataset;
        let spline = fmsi::SplineBasis::new(6, 3).unwrap();
        let spec = fmsi::WeightSpec { form: fmsi::WeightForm::Exponential, rho: 2.0 };
        let fit = fit_reml(&dataset, &spline, &spec).unwrap();
        let wald = wald_interaction_test(&fit).unwrap();
        let blocks = assemble_design(&dataset, &spline, &spec).unwrap();
        let penalty = penalty_matrix(&spline).unwrap();
        let y = &dataset.y;
        let dims = blocks.dims();
        let eps = penalty.ridge_epsilon();
        let se = nalgebra::SymmetricEigen::new(penalty.matrix().clone());
        let floor = se.eigenvalues.iter().fold(0.0f64, |m, &v| m.max(v)) * 1e-12;
        let lambda = fit.lambda;
        let qe = DVector::from_fn(dims.l, |i, _| {
            let ev = if se.eigenvalues[i] > floor { se.eigenvalues[i] } else { 0.0 };
            lambda * ev + eps
        });
        let x = blocks.x().into_owned();
        let z = blocks.zb().into_owned();
        let idx = dims.eta_offset();
        let fstat = |xtvx_inv: &DMatrix<f64>, beta: &DVector<f64>, rss: f64| {
            let s2 = rss / (dims.n - dims.p_fixed()) as f64;
            beta[idx] * beta[idx] / (s2 * xtvx_inv[(idx, idx)])
        };

        // Route A: explicit N x N V, plain Cholesky.
        let q_inv = &se.eigenvectors
            * DMatrix::from_diagonal(&qe.map(|v| 1.0 / v))
            * se.eigenvectors.transpose();
        let v = DMatrix::identity(dims.n, dims.n) + &z * q_inv * z.transpose();
        let vc = Cholesky::new(v.clone()).unwrap();
        let vinv_x = vc.solve(&x);
        let xtvx_inv_a = x.tr_mul(&vinv_x).try_inverse().unwrap();
        let beta_a = &xtvx_inv_a * x.tr_mul(&vc.solve(y));
        let r_a = y - &x * &beta_a;
        let rss_a = (r_a.transpose() * vc.solve(&r_a))[(0, 0)];
        let f_a = fstat(&xtvx_inv_a, &beta_a, rss_a);

        // Route B: factored SMW in the penalty eigenbasis, M = I + C'C >= I.
        let c = &z * &se.eigenvectors * DMatrix::from_diagonal(&qe.map(|v| 1.0 / v.sqrt()));
        let mc = Cholesky::new(DMatrix::identity(dims.l, dims.l) + c.tr_mul(&c)).unwrap();
        let vinv = |rhs: &DMatrix<f64>| rhs - &c * mc.solve(&c.tr_mul(rhs));
        let vinv_x_b = vinv(&x);
        let xtvx_inv_b = x.tr_mul(&vinv_x_b).try_inverse().unwrap();
        let beta_b = &xtvx_inv_b * vinv_x_b.tr_mul(y);
        let r_b = y - &x * &beta_b;
        let ctr = c.tr_mul(&r_b);
        let rss_b = r_b.dot(&r_b) - ctr.dot(&mc.solve(&ctr));
        let f_b = fstat(&xtvx_inv_b, &beta_b, rss_b);

        let kv = {
            let sev = nalgebra::SymmetricEigen::new(v);
            let mx = sev.eigenvalues.max();
            let mn = sev.eigenvalues.min();
            mx / mn
        };
        let rd = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs());
        println!(
            "seed {seed}: lg_lambda = {:+.3} kappa_v = {:.2e} | A: dF = {:.2e} ds2 = {:.2e} | B: dF = {:.2e} ds2 = {:.2e} | A-B dF = {:.2e}",
            lambda.log10(),
            kv,
            rd(wald.statistic, f_a),
            rd(fit.sigma2, rss_a / (dims.n - dims.p_fixed()) as f64),
            rd(wald.statistic, f_b),
            rd(fit.sigma2, rss_b / (dims.n - dims.p_fixed()) as f64),
            rd(f_a, f_b),
        );
    }
}
