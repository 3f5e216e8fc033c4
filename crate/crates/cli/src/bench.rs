use serde_json::json;

use acap_bench::{grid, run, BenchReport, Operation, MAX_SAMPLES, MIN_SAMPLES};

use crate::{CliError, Output};

#[derive(Debug, Clone)]
pub struct BenchArgs {
    /// Operations to measure; all when empty.
    pub operations: Vec<Operation>,
    /// Sizes overriding each selected operation's grid.
    pub sizes: Vec<usize>,
    pub samples: usize,
}

impl Default for BenchArgs {
    fn default() -> Self {
        BenchArgs {
            operations: Vec::new(),
            sizes: Vec::new(),
            samples: 300,
        }
    }
}

impl BenchArgs {
    pub fn points(&self) -> Vec<(Operation, usize)> {
        let selected = |op: &Operation| self.operations.is_empty() || self.operations.contains(op);
        if self.sizes.is_empty() {
            grid().into_iter().filter(|(op, _)| selected(op)).collect()
        } else {
            Operation::ALL
                .into_iter()
                .filter(selected)
                .flat_map(|op| self.sizes.iter().map(move |&s| (op, s)))
                .collect()
        }
    }
}

pub fn render(report: &BenchReport) -> String {
    let mut text = format!(
        "{:<26} {:>6} {:>10} {:>8} {:>8} {:>10} {:>8}\n",
        "operation", "size", "median_us", "p99_us", "samples", "ref_median", "ratio"
    );
    for r in &report.rows {
        let reference = r.reference_median_us.map_or("-".into(), |v| v.to_string());
        let ratio = r
            .reference_ratio()
            .map_or("-".into(), |v| format!("{v:.2}x"));
        text.push_str(&format!(
            "{:<26} {:>6} {:>10} {:>8} {:>8} {:>10} {:>8}\n",
            r.operation.name(),
            r.size,
            r.median_us,
            r.p99_us,
            r.samples,
            reference,
            ratio
        ));
    }
    text.push_str(&format!("warm-up: {} untimed calls per row", report.warmup));
    text
}

/// Times the selected operations; medians and p99s in whole microseconds.
pub fn cmd_bench(args: &BenchArgs) -> Result<Output, CliError> {
    if !(MIN_SAMPLES..=MAX_SAMPLES).contains(&args.samples) {
        return Err(CliError::input(format!(
            "samples must be between {MIN_SAMPLES} and {MAX_SAMPLES}, got {}",
            args.samples
        )));
    }
    if args.sizes.contains(&0) {
        return Err(CliError::input("sizes must be positive"));
    }
    let report = run(&args.points(), args.samples);
    let ordered = report.rows.iter().all(|r| r.median_ns <= r.p99_ns);
    let mut json = serde_json::to_value(&report).expect("report serializes");
    json["ordered"] = json!(ordered);
    Ok(Output::new(ordered, render(&report), json))
}
