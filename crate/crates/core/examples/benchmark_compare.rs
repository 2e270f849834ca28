//! Compare every reduction method with the logit learner on the breast
//! cancer data, in both evaluation modes.

use std::path::PathBuf;

use ndr::bench::{compare, EvalMode, PipelineConfig, ReductionMethod};

fn main() -> ndr::Result<()> {
    let dataset = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/breast_cancer.csv");
    for mode in [EvalMode::PaperFaithful, EvalMode::LeakageSafe] {
        let configs: Vec<PipelineConfig> = ReductionMethod::ALL
            .iter()
            .map(|&method| PipelineConfig {
                dataset: dataset.clone(),
                target: "diagnosis".into(),
                method,
                mode,
                ..PipelineConfig::default()
            })
            .collect();
        let report = compare(&configs, 4)?;
        println!("{mode:?}");
        for s in &report.summary {
            let flag = if s.best { " *" } else { "" };
            println!(
                "  {:<5} dims {:>2}  acc {:.4} ± {:.4}  (penalty {}){flag}",
                s.method.name(),
                s.dimensions,
                s.mean,
                s.se,
                s.penalty
            );
        }
        for h in &report.holdout {
            println!("  holdout {:<5} {:.4}", h.method.name(), h.value);
        }
    }
    Ok(())
}
