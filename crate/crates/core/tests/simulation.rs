//! Simulation-oracle checks of the fitting, inference and simulation layers.

use countreg::countdist::{draw, seeded_rng, CountParams, HurdleParams, NbParams};
use countreg::fit::{fit_homogeneous, Family, FitOptions};
use countreg::inference::{aic, compare};
use countreg::simulate::{generate_stream, recovery_study, CovariateSpec, SimDesign};
use rayon::prelude::*;

fn opts() -> FitOptions {
    FitOptions::default()
}

fn nb_design(n: usize, seed: u64, r: f64) -> SimDesign {
    SimDesign {
        n,
        seed,
        family: Family::NegativeBinomial,
        covariates: vec![
            CovariateSpec::Numeric {
                name: "x".into(),
                low: -1.0,
                high: 1.0,
            },
            CovariateSpec::Binary {
                name: "oa".into(),
                prob: 0.4,
            },
        ],
        beta: vec![1.0, -0.5, 0.25],
        r: Some(r),
        delta: None,
        hurdle_covariates: None,
    }
}

#[test]
fn poisson_intercept_reproduces_sample_mean() {
    // 10000 counts summing to 273193.
    let mut y = vec![27u64; 10_000];
    for v in y.iter_mut().take(3193) {
        *v += 1;
    }
    for m in [
        fit_homogeneous(Family::Poisson, &y, &opts()).unwrap(),
        fit_homogeneous(Family::NegativeBinomial, &y, &opts()).unwrap(),
    ] {
        let theta = m.beta[0].exp();
        assert!((theta - 27.3193).abs() < 1e-6 * 27.3193, "{} {theta}", m.family);
    }
}

#[test]
fn homogeneous_hurdle_recovers_natural_parameters() {
    let truth = (23.4883, 2.42694, 0.0552);
    let h = HurdleParams::new(NbParams::new(truth.0, truth.1).unwrap(), truth.2).unwrap();
    let mut rng = seeded_rng(41, 0);
    let y: Vec<u64> = (0..100_000).map(|_| draw(&mut rng, &CountParams::Hurdle(h))).collect();
    let m = fit_homogeneous(Family::HurdleNegativeBinomial, &y, &opts()).unwrap();
    assert!(m.converged);
    let est = m.homogeneous().unwrap();
    assert!((est.theta - truth.0).abs() < 3.0 * est.theta_std_err, "{est:?}");
    assert!((est.r.unwrap() - truth.1).abs() < 3.0 * est.r_std_err.unwrap(), "{est:?}");
    assert!((est.phi.unwrap() - truth.2).abs() < 3.0 * est.phi_std_err.unwrap(), "{est:?}");
}

#[test]
fn hurdle_regression_recovers_truth() {
    let d = SimDesign {
        n: 40_000,
        seed: 77,
        family: Family::HurdleNegativeBinomial,
        covariates: vec![CovariateSpec::Numeric {
            name: "x".into(),
            low: -1.0,
            high: 1.0,
        }],
        beta: vec![1.2, 0.4],
        r: Some(0.6),
        delta: Some(vec![-2.0, 1.0]),
        hurdle_covariates: None,
    };
    let sim = generate_stream(&d, 0).unwrap();
    let m = sim.fit(Family::HurdleNegativeBinomial, &opts()).unwrap();
    for (p, t) in m.parameters().iter().zip(sim.truth.values()) {
        assert_eq!(p.name, t.0);
        assert!((p.estimate - t.2).abs() < 3.0 * p.std_err, "{p:?} vs {}", t.2);
    }
}

#[test]
fn coverage_of_mean_coefficients() {
    let d = nb_design(5000, 5, 0.7);
    let s = recovery_study(&d, 200, &opts()).unwrap();
    assert_eq!(s.failures, 0);
    for p in s.parameters.iter().filter(|p| p.name != "r") {
        assert!((0.90..=0.99).contains(&p.coverage), "{p:?}");
    }
}

#[test]
fn boundary_truth_is_flagged() {
    let d = nb_design(2000, 6, 1e-9);
    let s = recovery_study(&d, 40, &opts()).unwrap();
    assert!(s.boundary_replications > 0);
    let r = s.parameters.iter().find(|p| p.name == "r").unwrap();
    assert!(r.boundary_flagged);
    assert!(s.parameters.iter().filter(|p| p.name != "r").all(|p| !p.boundary_flagged));
}

/// Mean estimation error of each coefficient over `reps` replications
/// starting at generator stream `first`.
fn mean_error(n: usize, first: u64, reps: u64) -> Vec<f64> {
    let d = nb_design(n, 88, 0.7);
    let est: Vec<Vec<f64>> = (first..first + reps)
        .into_par_iter()
        .map(|stream| {
            let sim = generate_stream(&d, stream).unwrap();
            let m = sim.fit(Family::NegativeBinomial, &opts()).unwrap();
            m.beta.iter().copied().collect()
        })
        .collect();
    (0..d.beta.len())
        .map(|j| est.iter().map(|e| e[j]).sum::<f64>() / reps as f64 - d.beta[j])
        .collect()
}

#[test]
fn bias_shrinks_with_sample_size() {
    // Per batch a component wins with probability about 0.87.
    let batches = 10;
    let reps = 50;
    let mut wins = [0usize; 3];
    for b in 0..batches {
        let first = 1 + b * 1000;
        let small = mean_error(2000, first, reps);
        let large = mean_error(50_000, first + 500, reps);
        for j in 0..3 {
            if large[j].abs() < small[j].abs() {
                wins[j] += 1;
            }
        }
    }
    println!("batches with smaller bias at n = 50000: {wins:?} of {batches}");
    assert!(wins.iter().all(|&w| w >= 6), "{wins:?}");
}

#[test]
fn aic_prefers_nb_on_overdispersed_data() {
    let sim = generate_stream(&nb_design(5000, 9, 0.7), 0).unwrap();
    let p = sim.fit(Family::Poisson, &opts()).unwrap();
    let nb = sim.fit(Family::NegativeBinomial, &opts()).unwrap();
    assert!(aic(&nb) < aic(&p));
}

#[test]
fn compare_orders_hurdle_data() {
    let d = SimDesign {
        n: 5000,
        seed: 10,
        family: Family::HurdleNegativeBinomial,
        covariates: vec![CovariateSpec::Numeric {
            name: "x".into(),
            low: -1.0,
            high: 1.0,
        }],
        beta: vec![1.5, 0.5],
        r: Some(0.5),
        delta: Some(vec![0.0, 0.5]),
        hurdle_covariates: None,
    };
    let sim = generate_stream(&d, 0).unwrap();
    let models: Vec<_> = [Family::Poisson, Family::NegativeBinomial, Family::HurdleNegativeBinomial]
        .iter()
        .map(|&f| sim.fit(f, &opts()).unwrap())
        .collect();
    let ranked = compare(&models).unwrap();
    let order: Vec<Family> = ranked.iter().map(|r| r.family).collect();
    assert_eq!(
        order,
        [Family::HurdleNegativeBinomial, Family::NegativeBinomial, Family::Poisson]
    );
    assert_eq!(ranked[0].delta_aic, 0.0);
}

#[test]
fn recovery_is_deterministic() {
    let d = nb_design(800, 3, 0.7);
    let a = recovery_study(&d, 8, &opts()).unwrap();
    let b = recovery_study(&d, 8, &opts()).unwrap();
    assert_eq!(a, b);
}
