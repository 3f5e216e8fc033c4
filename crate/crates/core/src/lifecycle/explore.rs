use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::liveness::check_liveness;
use super::safety::{check_safety, check_transition, Property};
use super::{
    AbstractRecord, ExplorationBounds, LifecycleEvent, LifecycleModel, LifecycleState, Mutation,
    StaleCause, SystemState, TransitionError,
};
use crate::canonical::{canonicalize_serializable, CanonicalError};
use crate::model::AdherenceDecision;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExploreOrder {
    #[default]
    Bfs,
    Dfs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExploreOptions {
    pub order: ExploreOrder,
    /// Largest number of distinct states to admit before giving up.
    pub max_states: usize,
}

impl Default for ExploreOptions {
    fn default() -> Self {
        ExploreOptions {
            order: ExploreOrder::Bfs,
            max_states: 2_000_000,
        }
    }
}

#[derive(Debug, Error)]
pub enum ExploreError {
    #[error("state budget of {budget} exhausted after {visited} states with {frontier} still on the frontier")]
    BudgetExceeded {
        budget: usize,
        visited: usize,
        frontier: usize,
    },
    #[error(transparent)]
    Canonical(#[from] CanonicalError),
}

/// Every reachable state and every enabled transition between them.
/// State 0 is the initial state.
///
/// States are identified by their [`StateSummary`]: the part of the
/// history that can still influence enabled events or a future violation,
/// plus the properties already violated. Each node keeps the first concrete
/// state discovered for its summary.
#[derive(Debug, Clone, Default)]
pub struct StateGraph {
    pub states: Vec<SystemState>,
    pub edges: Vec<Vec<(LifecycleEvent, usize)>>,
    /// Edges whose concrete step shrank or rewrote a list.
    pub non_monotone: Vec<(usize, LifecycleEvent)>,
}

impl StateGraph {
    /// Exhaustively enumerates the states reachable under `model`.
    pub fn build(model: &LifecycleModel, options: &ExploreOptions) -> Result<Self, ExploreError> {
        let mut graph = StateGraph::default();
        let mut visited: HashMap<[u8; 32], usize> = HashMap::new();
        let mut work: VecDeque<usize> = VecDeque::new();

        let initial = SystemState::initial();
        visited.insert(state_key(&initial)?, 0);
        graph.states.push(initial);
        graph.edges.push(Vec::new());
        work.push_back(0);

        while let Some(i) = match options.order {
            ExploreOrder::Bfs => work.pop_front(),
            ExploreOrder::Dfs => work.pop_back(),
        } {
            let current = graph.states[i].clone();
            for event in model.enabled_events(&current) {
                let next = model.apply(&current, event);
                if !check_transition(&current, &next) {
                    graph.non_monotone.push((i, event));
                }
                let key = state_key(&next)?;
                let j = match visited.get(&key) {
                    Some(&j) => j,
                    None => {
                        if graph.states.len() >= options.max_states {
                            return Err(ExploreError::BudgetExceeded {
                                budget: options.max_states,
                                visited: graph.states.len(),
                                frontier: work.len() + 1,
                            });
                        }
                        let j = graph.states.len();
                        visited.insert(key, j);
                        graph.states.push(next);
                        graph.edges.push(Vec::new());
                        work.push_back(j);
                        j
                    }
                };
                graph.edges[i].push((event, j));
            }
        }
        Ok(graph)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn transition_count(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }

    /// Breadth-first order from state 0 with the first-discovered parent
    /// of each state. Depends only on the edge lists, not on how the graph
    /// was built.
    pub fn bfs_tree(&self) -> BfsTree {
        let n = self.states.len();
        let mut parent = vec![None; n];
        let mut depth = vec![usize::MAX; n];
        let mut order = Vec::with_capacity(n);
        let mut queue = VecDeque::new();
        if n > 0 {
            depth[0] = 0;
            queue.push_back(0);
        }
        while let Some(i) = queue.pop_front() {
            order.push(i);
            for &(event, j) in &self.edges[i] {
                if depth[j] == usize::MAX {
                    depth[j] = depth[i] + 1;
                    parent[j] = Some((i, event));
                    queue.push_back(j);
                }
            }
        }
        BfsTree {
            parent,
            depth,
            order,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BfsTree {
    pub parent: Vec<Option<(usize, LifecycleEvent)>>,
    pub depth: Vec<usize>,
    pub order: Vec<usize>,
}

impl BfsTree {
    /// Shortest event sequence from state 0 to `target`.
    pub fn trace_to(&self, target: usize) -> Vec<LifecycleEvent> {
        let mut trace = Vec::new();
        let mut at = target;
        while let Some((prev, event)) = self.parent[at] {
            trace.push(event);
            at = prev;
        }
        trace.reverse();
        trace
    }

    pub fn rank(&self) -> Vec<usize> {
        let mut rank = vec![usize::MAX; self.parent.len()];
        for (r, &i) in self.order.iter().enumerate() {
            rank[i] = r;
        }
        rank
    }
}

/// What a concrete state contributes to its own future.
///
/// Enabled events and the properties a future append can break read only
/// the tail record, the current epoch's event count, the last event and
/// whether it was already used. Everything earlier is frozen, so it only
/// matters through the properties it already violates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StateSummary {
    pub lifecycle: LifecycleState,
    pub policy_version: u32,
    pub capability_version: u32,
    pub pending_stale_cause: Option<StaleCause>,
    pub tail: Option<AbstractRecord>,
    pub tail_events: usize,
    /// (decision, claim disputed, anchored to the tail record)
    pub last_event: Option<(AdherenceDecision, bool, bool)>,
    pub last_event_used: bool,
    pub tail_called: bool,
    pub violated: Vec<Property>,
}

impl StateSummary {
    pub fn of(s: &SystemState) -> Self {
        let tail_index = s.tail_index();
        let last_index = s.adherence_trail.len().checked_sub(1);
        StateSummary {
            lifecycle: s.lifecycle,
            policy_version: s.policy_version,
            capability_version: s.capability_version,
            pending_stale_cause: s.pending_stale_cause,
            tail: s.consent_chain.last().copied(),
            tail_events: tail_index.map_or(0, |i| s.epoch_events(i)),
            last_event: s.adherence_trail.last().map(|e| {
                (
                    e.decision,
                    e.claim_disputed,
                    Some(e.consent_index) == tail_index,
                )
            }),
            last_event_used: last_index
                .is_some_and(|i| s.skill_calls.iter().any(|c| c.event_index == Some(i))),
            tail_called: tail_index
                .is_some_and(|i| s.skill_calls.iter().any(|c| c.consent_index == Some(i))),
            violated: check_safety(s),
        }
    }
}

/// Visited-set key: digest of the canonical summary bytes.
pub fn state_key(s: &SystemState) -> Result<[u8; 32], CanonicalError> {
    let bytes = canonicalize_serializable(&StateSummary::of(s))?;
    Ok(Sha256::digest(&bytes).into())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyStatus {
    pub id: Property,
    pub name: String,
    pub kind: String,
    pub holds: bool,
    /// States (edges for S2) at which the property fails.
    pub violating: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyViolation {
    pub property: Property,
    /// Shortest event sequence from the initial state to the violation.
    pub trace: Vec<LifecycleEvent>,
    /// For liveness: events repeated forever after `trace`; empty means the
    /// run halts with nothing enabled.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cycle: Option<Vec<LifecycleEvent>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplorationReport {
    pub bounds: ExplorationBounds,
    pub governance_tiering: bool,
    pub mutations: Vec<Mutation>,
    pub reachable_states: usize,
    pub transitions: usize,
    pub max_depth: usize,
    pub states_by_lifecycle: BTreeMap<LifecycleState, usize>,
    pub stale_states: usize,
    pub terminal_stale_states: usize,
    pub properties: Vec<PropertyStatus>,
    pub violations: Vec<PropertyViolation>,
}

impl ExplorationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violation(&self, property: Property) -> Option<&PropertyViolation> {
        self.violations.iter().find(|v| v.property == property)
    }

    pub fn holds(&self, property: Property) -> bool {
        self.properties
            .iter()
            .find(|p| p.id == property)
            .is_some_and(|p| p.holds)
    }
}

/// Builds the reachable graph under `model` and checks every safety
/// property on every state, S2 on every edge, and both liveness properties
/// on the finished graph.
pub fn explore(
    model: &LifecycleModel,
    options: &ExploreOptions,
) -> Result<ExplorationReport, ExploreError> {
    let graph = StateGraph::build(model, options)?;
    Ok(report_for(model, &graph))
}

pub fn report_for(model: &LifecycleModel, graph: &StateGraph) -> ExplorationReport {
    let tree = graph.bfs_tree();
    let mut counts: BTreeMap<Property, usize> = BTreeMap::new();
    let mut first: BTreeMap<Property, Vec<LifecycleEvent>> = BTreeMap::new();

    for &i in &tree.order {
        for property in check_safety(&graph.states[i]) {
            *counts.entry(property).or_default() += 1;
            first.entry(property).or_insert_with(|| tree.trace_to(i));
        }
    }
    let rank = tree.rank();
    if let Some(&(i, event)) = graph
        .non_monotone
        .iter()
        .min_by_key(|(i, e)| (rank[*i], graph.edges[*i].iter().position(|(x, _)| x == e)))
    {
        counts.insert(Property::S2, graph.non_monotone.len());
        let mut trace = tree.trace_to(i);
        trace.push(event);
        first.insert(Property::S2, trace);
    }

    let liveness = check_liveness(graph);
    let mut violations: Vec<PropertyViolation> = Vec::new();
    let mut properties = Vec::new();
    for property in Property::ALL {
        let (violating, violation) = if property.is_liveness() {
            let (count, witness) = match property {
                Property::L1 => (liveness.l1_failing_states, &liveness.l1),
                _ => (liveness.l2_failing_states, &liveness.l2),
            };
            let violation = witness.as_ref().map(|w| {
                let mut trace = tree.trace_to(w.state);
                trace.extend(&w.path);
                PropertyViolation {
                    property,
                    trace,
                    cycle: Some(w.cycle.clone()),
                }
            });
            (count, violation)
        } else {
            let violation = first.remove(&property).map(|trace| PropertyViolation {
                property,
                trace,
                cycle: None,
            });
            (counts.get(&property).copied().unwrap_or(0), violation)
        };
        properties.push(PropertyStatus {
            id: property,
            name: property.name().to_owned(),
            kind: if property.is_liveness() {
                "liveness"
            } else {
                "safety"
            }
            .to_owned(),
            holds: violating == 0,
            violating,
        });
        violations.extend(violation);
    }

    let mut states_by_lifecycle = BTreeMap::new();
    for s in &graph.states {
        *states_by_lifecycle.entry(s.lifecycle).or_default() += 1;
    }
    ExplorationReport {
        bounds: model.bounds,
        governance_tiering: model.governance_tiering,
        mutations: model.mutations.clone(),
        reachable_states: graph.len(),
        transitions: graph.transition_count(),
        max_depth: tree
            .depth
            .iter()
            .copied()
            .filter(|d| *d != usize::MAX)
            .max()
            .unwrap_or(0),
        states_by_lifecycle,
        stale_states: liveness.stale_states,
        terminal_stale_states: liveness.terminal_stale_states,
        properties,
        violations,
    }
}

/// Re-executes `trace` from the initial state.
pub fn replay(
    model: &LifecycleModel,
    trace: &[LifecycleEvent],
) -> Result<SystemState, TransitionError> {
    trace
        .iter()
        .try_fold(SystemState::initial(), |s, e| model.step(&s, *e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(model: &LifecycleModel) -> ExplorationReport {
        explore(model, &ExploreOptions::default()).unwrap()
    }

    #[test]
    fn degenerate_bounds_are_clean() {
        let report = run(&LifecycleModel::new(
            ExplorationBounds::new(1, 1, 1).unwrap(),
        ));
        assert!(report.is_clean(), "{:?}", report.violations);
        assert_eq!(report.terminal_stale_states, 0);
        assert!(!report
            .states_by_lifecycle
            .contains_key(&LifecycleState::Stale));
    }

    #[test]
    fn skill_from_rejected_is_caught_with_a_minimal_trace() {
        let model = LifecycleModel::new(ExplorationBounds::new(1, 1, 1).unwrap())
            .with_mutation(Mutation::SkillFromRejected);
        let report = run(&model);
        let v = report.violation(Property::S1).expect("S1 violated");
        assert_eq!(
            v.trace,
            vec![
                LifecycleEvent::FetchPolicy,
                LifecycleEvent::Reject,
                LifecycleEvent::InvokeSkill
            ]
        );
        let state = replay(&model, &v.trace).unwrap();
        assert!(check_safety(&state).contains(&Property::S1));
    }

    #[test]
    fn budget_reports_frontier() {
        let options = ExploreOptions {
            max_states: 10,
            ..Default::default()
        };
        match explore(&LifecycleModel::default(), &options) {
            Err(ExploreError::BudgetExceeded {
                visited, frontier, ..
            }) => {
                assert_eq!(visited, 10);
                assert!(frontier > 0);
            }
            other => panic!("expected budget error, got {other:?}"),
        }
    }

    #[test]
    fn order_does_not_change_the_report() {
        let model = LifecycleModel::new(ExplorationBounds::new(2, 2, 2).unwrap())
            .with_mutation(Mutation::PermitOnDisputed);
        let bfs = run(&model);
        let dfs = explore(
            &model,
            &ExploreOptions {
                order: ExploreOrder::Dfs,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(bfs, dfs);
        assert!(bfs.violation(Property::S6).is_some());
    }
}
