//! Workloads for the three measured operations and a sampling harness
//! reporting median and p99 latency.
//!
//! Every workload input is built once, outside the timed region; a sample
//! times exactly one call.

use std::hint::black_box;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use acap_core::fixtures;
use acap_core::{compute_policy_hash, validate_adherence_trail, validate_consent_chain};

/// Claims in the policy the chain workload validates against.
pub const CHAIN_POLICY_CLAIMS: usize = 10;
pub const WARMUP: usize = 50;
pub const MIN_SAMPLES: usize = 200;
pub const MAX_SAMPLES: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operation {
    ComputePolicyHash,
    ValidateConsentChain,
    ValidateAdherenceTrail,
}

impl Operation {
    pub const ALL: [Operation; 3] = [
        Operation::ComputePolicyHash,
        Operation::ValidateConsentChain,
        Operation::ValidateAdherenceTrail,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Operation::ComputePolicyHash => "compute_policy_hash",
            Operation::ValidateConsentChain => "validate_consent_chain",
            Operation::ValidateAdherenceTrail => "validate_adherence_trail",
        }
    }

    /// What the size parameter counts.
    pub fn unit(self) -> &'static str {
        match self {
            Operation::ComputePolicyHash => "claims",
            Operation::ValidateConsentChain => "records",
            Operation::ValidateAdherenceTrail => "events",
        }
    }

    /// The measured grid.
    pub fn sizes(self) -> [usize; 3] {
        match self {
            Operation::ComputePolicyHash => [10, 50, 200],
            Operation::ValidateConsentChain => [1, 5, 20],
            Operation::ValidateAdherenceTrail => [10, 100, 1000],
        }
    }

    /// Reference (median, p99) in microseconds for a grid point, measured
    /// on an Apple M4.
    pub fn reference_us(self, size: usize) -> Option<(u64, u64)> {
        let table: [(usize, (u64, u64)); 3] = match self {
            Operation::ComputePolicyHash => [(10, (19, 28)), (50, (74, 88)), (200, (278, 324))],
            Operation::ValidateConsentChain => [(1, (20, 27)), (5, (96, 124)), (20, (373, 458))],
            Operation::ValidateAdherenceTrail => {
                [(10, (3, 9)), (100, (27, 32)), (1000, (265, 331))]
            }
        };
        table.into_iter().find(|(s, _)| *s == size).map(|(_, r)| r)
    }
}

impl std::str::FromStr for Operation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Operation::ALL
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| format!("unknown operation '{s}'"))
    }
}

/// A prepared call of `operation` at `size`. Returns whether the input
/// validated, so the result stays observable.
pub fn workload(operation: Operation, size: usize) -> Box<dyn Fn() -> bool> {
    match operation {
        Operation::ComputePolicyHash => {
            let doc = fixtures::policy_with_claims(size);
            Box::new(move || compute_policy_hash(black_box(&doc)).is_ok())
        }
        Operation::ValidateConsentChain => {
            let docs = vec![fixtures::policy_with_claims(CHAIN_POLICY_CLAIMS)];
            let records = fixtures::consent_chain(size, &docs[0]);
            Box::new(move || validate_consent_chain(black_box(&records), &docs, None).is_valid())
        }
        Operation::ValidateAdherenceTrail => {
            let records = fixtures::consent_chain(1, &fixtures::demo_policy());
            let events = fixtures::adherence_trail(size, &records[0].id);
            Box::new(move || {
                validate_adherence_trail(black_box(&events), &records, None).is_valid()
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub operation: Operation,
    pub size: usize,
    pub samples: usize,
    pub median_us: u64,
    pub p99_us: u64,
    pub median_ns: u64,
    pub p99_ns: u64,
    pub reference_median_us: Option<u64>,
    pub reference_p99_us: Option<u64>,
}

impl BenchRow {
    /// Measured median over the reference median.
    pub fn reference_ratio(&self) -> Option<f64> {
        self.reference_median_us
            .map(|r| self.median_ns as f64 / (r as f64 * 1000.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub warmup: usize,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn row(&self, operation: Operation, size: usize) -> Option<&BenchRow> {
        self.rows
            .iter()
            .find(|r| r.operation == operation && r.size == size)
    }
}

/// Median of sorted samples; the mean of the middle pair for even counts.
fn median(sorted: &[u64]) -> u64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2
    }
}

/// Nearest-rank percentile of sorted samples.
fn percentile(sorted: &[u64], p: f64) -> u64 {
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

fn round_us(ns: u64) -> u64 {
    (ns + 500) / 1000
}

/// Times `samples` calls after `WARMUP` untimed ones. `samples` is clamped
/// to `MIN_SAMPLES..=MAX_SAMPLES`.
pub fn measure(operation: Operation, size: usize, samples: usize) -> BenchRow {
    let samples = samples.clamp(MIN_SAMPLES, MAX_SAMPLES);
    let call = workload(operation, size);
    for _ in 0..WARMUP {
        black_box(call());
    }
    let mut times: Vec<u64> = (0..samples)
        .map(|_| {
            let start = Instant::now();
            black_box(call());
            start.elapsed().as_nanos() as u64
        })
        .collect();
    times.sort_unstable();
    let (median_ns, p99_ns) = (median(&times), percentile(&times, 99.0));
    let reference = operation.reference_us(size);
    BenchRow {
        operation,
        size,
        samples,
        median_us: round_us(median_ns),
        p99_us: round_us(p99_ns),
        median_ns,
        p99_ns,
        reference_median_us: reference.map(|r| r.0),
        reference_p99_us: reference.map(|r| r.1),
    }
}

/// Measures every `(operation, size)` pair in order.
pub fn run(points: &[(Operation, usize)], samples: usize) -> BenchReport {
    BenchReport {
        warmup: WARMUP,
        rows: points
            .iter()
            .map(|&(op, size)| measure(op, size, samples))
            .collect(),
    }
}

/// The full grid, operation by operation.
pub fn grid() -> Vec<(Operation, usize)> {
    Operation::ALL
        .into_iter()
        .flat_map(|op| op.sizes().map(|s| (op, s)))
        .collect()
}
