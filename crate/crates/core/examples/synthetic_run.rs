//! Generate a quasistatic synthetic panel, run the full analysis pipeline
//! on it and print the recovered parameters next to the ground truth.
//!
//! ```text
//! cargo run --release --example synthetic_run
//! ```

use nongibrat::pipeline::{config_for_synth, run_check, run_pipeline_on};
use nongibrat::synth::{gen_panel, panel_observations, GeneratorSpec};

fn main() {
    let spec = GeneratorSpec::quasistatic(100_000, 0.9, 0.2, 42);
    let out = gen_panel(&spec).expect("valid generator spec");
    let truth = &out.truth;
    println!(
        "ground truth: theta {}  log10_a {}  alpha {}  mu1 {}  mu2 {:.4}  sigma1 {:.4}  sigma2 {:.4}",
        truth.theta, truth.log10_a, truth.alpha, truth.mu1, truth.mu2, truth.sigma1, truth.sigma2
    );

    let config = config_for_synth(&spec);
    let report = run_pipeline_on(&config, &panel_observations(&out.panel)).expect("pipeline runs");
    for pair in &report.pairs {
        println!(
            "recovered:    theta_H {:.4}  theta_M {:.4}  mu1 {:.4}  mu2 {:.4}  sigma1 {:.4}  sigma2 {:.4}",
            pair.theta_h.theta,
            pair.theta_m.theta,
            pair.pareto_1.mu,
            pair.pareto_2.mu,
            pair.lognormal_1.sigma,
            pair.lognormal_2.sigma
        );
        println!(
            "ratios:       (mu1+1)/(mu2+1) {:.4}  sigma2/sigma1 {:.4}  gamma {:?}",
            pair.relations.mu_ratio, pair.relations.sigma_ratio, pair.gamma
        );
    }
    for line in run_check(&report, None).lines {
        println!("{line}");
    }
}
