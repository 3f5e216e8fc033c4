use std::time::Instant;

use serde_json::json;

use acap_core::lifecycle::{
    explore, ExplorationBounds, ExplorationReport, ExploreOptions, ExploreOrder, LifecycleEvent,
    LifecycleModel, Mutation, Property,
};

use crate::{CliError, Output};

#[derive(Debug, Clone)]
pub struct ExploreArgs {
    pub max_versions: u32,
    pub max_adherence: u32,
    pub max_cap: u32,
    pub inject: Vec<Mutation>,
    pub governance: bool,
    pub order: ExploreOrder,
    pub max_states: usize,
}

impl Default for ExploreArgs {
    fn default() -> Self {
        let b = ExplorationBounds::REFERENCE;
        ExploreArgs {
            max_versions: b.max_versions,
            max_adherence: b.max_adherence_events,
            max_cap: b.max_cap_versions,
            inject: Vec::new(),
            governance: false,
            order: ExploreOrder::Bfs,
            max_states: ExploreOptions::default().max_states,
        }
    }
}

impl ExploreArgs {
    pub fn model(&self) -> Result<LifecycleModel, CliError> {
        let bounds = ExplorationBounds::new(self.max_versions, self.max_adherence, self.max_cap)
            .map_err(|e| CliError::input(e.to_string()))?;
        Ok(self.inject.iter().fold(
            LifecycleModel::new(bounds).with_governance_tiering(self.governance),
            |m, &mutation| m.with_mutation(mutation),
        ))
    }
}

fn trace_text(events: &[LifecycleEvent]) -> String {
    if events.is_empty() {
        return "(initial state)".into();
    }
    events
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(" -> ")
}

fn render(report: &ExplorationReport, elapsed_ms: u128) -> String {
    let b = report.bounds;
    let mutations = if report.mutations.is_empty() {
        "none".to_owned()
    } else {
        report
            .mutations
            .iter()
            .map(|m| m.as_str())
            .collect::<Vec<_>>()
            .join(", ")
    };
    let mut text = format!(
        "bounds: versions={} adherence={} capability={} governance={} mutations={mutations}\n\
         reachable states: {} ({} transitions, depth {}), {elapsed_ms} ms\n",
        b.max_versions,
        b.max_adherence_events,
        b.max_cap_versions,
        if report.governance_tiering {
            "on"
        } else {
            "off"
        },
        report.reachable_states,
        report.transitions,
        report.max_depth,
    );
    for p in &report.properties {
        let status = if p.holds {
            "holds".to_owned()
        } else {
            format!("VIOLATED ({} states)", p.violating)
        };
        text.push_str(&format!(
            "{:<3} {:<26} {:<8} {status}\n",
            p.id.to_string(),
            p.name,
            p.kind
        ));
    }
    if report.is_clean() {
        text.push_str("violations: none");
    }
    for v in &report.violations {
        text.push_str(&format!("{} trace: {}\n", v.property, trace_text(&v.trace)));
        if let Some(cycle) = &v.cycle {
            let tail = if cycle.is_empty() {
                "halts with nothing enabled".to_owned()
            } else {
                format!("then repeats {}", trace_text(cycle))
            };
            text.push_str(&format!("{} {tail}\n", v.property));
        }
    }
    text.trim_end().to_owned()
}

/// Runs the bounded explorer; exit 0 iff no property is violated.
pub fn cmd_explore(args: &ExploreArgs) -> Result<Output, CliError> {
    let model = args.model()?;
    let options = ExploreOptions {
        order: args.order,
        max_states: args.max_states,
    };
    let start = Instant::now();
    let report = explore(&model, &options).map_err(|e| CliError::failed(e.to_string()))?;
    let elapsed_ms = start.elapsed().as_millis();
    let mut json = serde_json::to_value(&report).expect("report serializes");
    json["elapsed_ms"] = json!(elapsed_ms);
    json["clean"] = json!(report.is_clean());
    Ok(Output::new(
        report.is_clean(),
        render(&report, elapsed_ms),
        json,
    ))
}

/// The property each mutation is expected to break.
pub fn expected_violation(mutation: Mutation) -> Property {
    match mutation {
        Mutation::SkillFromRejected => Property::S1,
        Mutation::PermitOnDisputed => Property::S6,
        Mutation::SkillUnderCapabilityDrift => Property::S7,
        Mutation::NoFetchFromStale => Property::L1,
    }
}
