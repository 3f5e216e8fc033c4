use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::explore::StateGraph;
use super::{LifecycleEvent, LifecycleState, StaleCause};

/// A Stale state from which some run never appends a consent record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LivenessViolation {
    pub state: usize,
    /// Events from `state` to the start of `cycle`.
    pub path: Vec<LifecycleEvent>,
    /// Events repeated forever without appending; empty for a deadlock.
    pub cycle: Vec<LifecycleEvent>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LivenessReport {
    pub stale_states: usize,
    pub terminal_stale_states: usize,
    pub l1_failing_states: usize,
    pub l2_failing_states: usize,
    pub l1: Option<LivenessViolation>,
    pub l2: Option<LivenessViolation>,
}

impl LivenessReport {
    pub fn holds(&self) -> bool {
        self.l1.is_none() && self.l2.is_none()
    }
}

/// Re-consent liveness over a finished graph.
///
/// A Stale state fails when, following only edges that do not append a
/// consent record, it can reach a state with no enabled events or a cycle.
/// On a finite graph that is exactly the existence of a run that stays
/// unbound forever. L1 covers every Stale state, L2 those entered through a
/// capability change.
pub fn check_liveness(graph: &StateGraph) -> LivenessReport {
    let n = graph.len();
    let quiet: Vec<Vec<(LifecycleEvent, usize)>> = graph
        .edges
        .iter()
        .map(|out| {
            out.iter()
                .copied()
                .filter(|(e, _)| !e.appends_consent())
                .collect()
        })
        .collect();

    let scc = strongly_connected(&quiet);
    let mut component_size = vec![0usize; n];
    for &c in &scc {
        component_size[c] += 1;
    }
    // a target is a deadlock or a state on a non-appending cycle
    let is_target: Vec<bool> = (0..n)
        .map(|i| {
            graph.edges[i].is_empty()
                || component_size[scc[i]] > 1
                || quiet[i].iter().any(|&(_, j)| j == i)
        })
        .collect();

    let mut reverse: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, out) in quiet.iter().enumerate() {
        for &(_, j) in out {
            reverse[j].push(i);
        }
    }
    let mut doomed = is_target.clone();
    let mut queue: VecDeque<usize> = (0..n).filter(|&i| is_target[i]).collect();
    while let Some(j) = queue.pop_front() {
        for &i in &reverse[j] {
            if !doomed[i] {
                doomed[i] = true;
                queue.push_back(i);
            }
        }
    }

    let tree = graph.bfs_tree();
    let mut report = LivenessReport::default();
    for &i in &tree.order {
        let s = &graph.states[i];
        if s.lifecycle != LifecycleState::Stale {
            continue;
        }
        report.stale_states += 1;
        if graph.edges[i].is_empty() {
            report.terminal_stale_states += 1;
        }
        if !doomed[i] {
            continue;
        }
        report.l1_failing_states += 1;
        let capability = s.pending_stale_cause == Some(StaleCause::CapabilityChange);
        if capability {
            report.l2_failing_states += 1;
        }
        if report.l1.is_none() {
            report.l1 = Some(witness(graph, &quiet, &is_target, &scc, i));
        }
        if capability && report.l2.is_none() {
            report.l2 = Some(witness(graph, &quiet, &is_target, &scc, i));
        }
    }
    report
}

fn witness(
    graph: &StateGraph,
    quiet: &[Vec<(LifecycleEvent, usize)>],
    is_target: &[bool],
    scc: &[usize],
    from: usize,
) -> LivenessViolation {
    let (entry, path) =
        shortest(quiet, from, |j| is_target[j], |_| true).expect("doomed states reach a target");
    let cycle = if graph.edges[entry].is_empty() {
        Vec::new()
    } else {
        // shortest way around the component back to the entry state
        let component = scc[entry];
        quiet[entry]
            .iter()
            .filter(|&&(_, j)| scc[j] == component)
            .filter_map(|&(e, j)| {
                if j == entry {
                    return Some(vec![e]);
                }
                shortest(quiet, j, |k| k == entry, |k| scc[k] == component).map(|(_, rest)| {
                    let mut c = vec![e];
                    c.extend(rest);
                    c
                })
            })
            .min_by_key(Vec::len)
            .unwrap_or_default()
    };
    LivenessViolation {
        state: from,
        path,
        cycle,
    }
}

fn shortest(
    edges: &[Vec<(LifecycleEvent, usize)>],
    from: usize,
    goal: impl Fn(usize) -> bool,
    allowed: impl Fn(usize) -> bool,
) -> Option<(usize, Vec<LifecycleEvent>)> {
    let mut parent: Vec<Option<(usize, LifecycleEvent)>> = vec![None; edges.len()];
    let mut seen = vec![false; edges.len()];
    let mut queue = VecDeque::from([from]);
    seen[from] = true;
    while let Some(i) = queue.pop_front() {
        if goal(i) {
            let mut path = Vec::new();
            let mut at = i;
            while let Some((p, e)) = parent[at] {
                path.push(e);
                at = p;
            }
            path.reverse();
            return Some((i, path));
        }
        for &(e, j) in &edges[i] {
            if !seen[j] && allowed(j) {
                seen[j] = true;
                parent[j] = Some((i, e));
                queue.push_back(j);
            }
        }
    }
    None
}

/// Component id per node (iterative Tarjan).
fn strongly_connected(edges: &[Vec<(LifecycleEvent, usize)>]) -> Vec<usize> {
    const UNSEEN: usize = usize::MAX;
    let n = edges.len();
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut component = vec![UNSEEN; n];
    let mut stack = Vec::new();
    let mut next_index = 0;
    let mut next_component = 0;

    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        // (node, next edge to try)
        let mut calls = vec![(root, 0usize)];
        while let Some(&(v, edge)) = calls.last() {
            if index[v] == UNSEEN {
                index[v] = next_index;
                low[v] = next_index;
                next_index += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            if let Some(&(_, w)) = edges[v].get(edge) {
                calls.last_mut().expect("non-empty").1 += 1;
                if index[w] == UNSEEN {
                    calls.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            calls.pop();
            if let Some(&(parent, _)) = calls.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                loop {
                    let w = stack.pop().expect("tarjan stack");
                    on_stack[w] = false;
                    component[w] = next_component;
                    if w == v {
                        break;
                    }
                }
                next_component += 1;
            }
        }
    }
    component
}
