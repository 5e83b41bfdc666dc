use countreg::fit::{Family, FitOptions};
use countreg::simulate::{generate_stream, CovariateSpec, SimDesign};
use countreg_cli::commands::restrict;
use rayon::prelude::*;

fn design() -> SimDesign {
    SimDesign {
        n: 2000,
        seed: 2024,
        family: Family::NegativeBinomial,
        covariates: vec![
            CovariateSpec::Numeric { name: "signal".into(), low: -1.0, high: 1.0 },
            CovariateSpec::Numeric { name: "noise".into(), low: -1.0, high: 1.0 },
        ],
        beta: vec![1.0, 0.6, 0.0],
        r: Some(0.7),
        delta: None,
        hurdle_covariates: None,
    }
}

#[test]
fn noise_covariate_is_pruned() {
    let d = design();
    let reps = 200;
    let dropped: Vec<(bool, bool)> = (0..reps)
        .into_par_iter()
        .map(|i| {
            let sim = generate_stream(&d, i + 1).unwrap();
            let r = restrict(
                Family::NegativeBinomial,
                &sim.x,
                &sim.x_h,
                sim.dataset.y(),
                0.10,
                &FitOptions::default(),
            )
            .unwrap();
            let labels = r.restricted.mean_labels;
            (!labels.iter().any(|l| l == "noise"), labels.iter().any(|l| l == "signal"))
        })
        .collect();
    let noise_gone = dropped.iter().filter(|d| d.0).count() as f64 / reps as f64;
    let signal_kept = dropped.iter().filter(|d| d.1).count();
    println!("noise dropped in {noise_gone:.3} of {reps} replications");
    assert_eq!(signal_kept, reps as usize);
    assert!(noise_gone >= 0.90, "noise dropped in only {noise_gone}");
}
