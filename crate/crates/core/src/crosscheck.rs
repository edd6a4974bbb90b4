//! Bound-versus-simulation comparison.
//!
//! For each grid point the closed-form decode lower bound is evaluated
//! and the same system is Monte-Carlo simulated (recoding relays, one
//! sink). A point passes when the empirical decode success rate is at
//! least `bound - 3*sigma`, with sigma the binomial deviation of the
//! estimate at the bound's own rate. Failing points are reported, not
//! hidden: they show where the closed form is optimistic about a physical
//! packet flow.

use crate::bounds::{self, BoundError, BoundParams};
use crate::channel::ChannelConfig;
use crate::codec::CodingParams;
use crate::seed;
use crate::simnet::{
    run_simulation, RelayStrategy, SimConfig, SimError, Topology,
};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CrosscheckError {
    #[error(transparent)]
    Bound(#[from] BoundError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("crosscheck config: {0}")]
    InvalidConfig(String),
}

/// Knobs for the Monte Carlo side.
#[derive(Debug, Clone)]
pub struct CrosscheckOptions {
    pub replications: u32,
    pub generations_per_rep: u64,
    pub seed: u64,
    /// Passed through to the bound evaluation; 1.0 is the real bound.
    /// Other values deliberately corrupt it so a harness can verify the
    /// comparison fails when it should.
    pub exponent_scale: f64,
}

impl Default for CrosscheckOptions {
    fn default() -> CrosscheckOptions {
        CrosscheckOptions {
            replications: 30,
            generations_per_rep: 200,
            seed: 0,
            exponent_scale: 1.0,
        }
    }
}

/// Outcome at one grid point.
#[derive(Debug, Clone)]
pub struct CrosscheckPoint {
    pub params: BoundParams,
    pub generations: u64,
    pub empirical: f64,
    pub bound: f64,
    pub sigma: f64,
    /// empirical - (bound - 3*sigma); negative means failure.
    pub margin: f64,
    pub pass: bool,
}

fn field_width_for(q: u32) -> Result<u8, CrosscheckError> {
    for f in 1..=16u8 {
        if q == 1u32 << f {
            return Ok(f);
        }
    }
    Err(CrosscheckError::InvalidConfig(format!(
        "q={q} is not a supported field size (needs 2^f, f in 1..=16)"
    )))
}

/// Simulates and compares every point. Replications parallelize; outputs
/// keep grid order and are deterministic for a given seed.
pub fn run_grid(
    points: &[BoundParams],
    opts: &CrosscheckOptions,
) -> Result<Vec<CrosscheckPoint>, CrosscheckError> {
    if opts.replications == 0 || opts.generations_per_rep == 0 {
        return Err(CrosscheckError::InvalidConfig(
            "replications and generations_per_rep must be at least 1".into(),
        ));
    }
    let jobs: Vec<(usize, u32, u64)> = (0..points.len())
        .flat_map(|p| {
            (0..opts.replications)
                .map(move |rep| (p, rep, seed::derive(opts.seed, &[p as u64, rep as u64])))
        })
        .collect();

    let outcomes: Result<Vec<(usize, u64)>, CrosscheckError> = jobs
        .par_iter()
        .map(|&(p, _rep, run_seed)| {
            let bp = &points[p];
            let f = field_width_for(bp.q)?;
            let coding = CodingParams::new(bp.n, bp.m, f, 1).map_err(SimError::from)?;
            let config = SimConfig {
                coding,
                topology: Topology {
                    n_first_hop: bp.n_first_hop as usize,
                    n_second_hop: bp.n_second_hop as usize,
                    n_sinks: 1,
                    tier0: ChannelConfig::Bernoulli { delta: bp.delta0 },
                    tier1: ChannelConfig::Bernoulli { delta: bp.delta1 },
                    tier2: ChannelConfig::Bernoulli { delta: bp.delta2 },
                    first_to_second: None,
                    second_to_sink: None,
                },
                strategy: RelayStrategy::Recode,
                total_packets: opts.generations_per_rep * bp.m as u64,
                seed: run_seed,
            };
            let result = run_simulation(&config)?;
            // One sink: every generation either decoded or failed.
            let decoded = result.generations - result.decode_failures;
            Ok((p, decoded))
        })
        .collect();
    let outcomes = outcomes?;

    let mut decoded_per_point = vec![0u64; points.len()];
    for (p, decoded) in outcomes {
        decoded_per_point[p] += decoded;
    }

    let total_gens = opts.generations_per_rep * opts.replications as u64;
    points
        .iter()
        .zip(&decoded_per_point)
        .map(|(bp, &decoded)| {
            let r = bounds::evaluate_scaled(bp, opts.exponent_scale)?;
            let bound = r.p_decode_lower;
            let empirical = decoded as f64 / total_gens as f64;
            let sigma = (bound * (1.0 - bound) / total_gens as f64).sqrt();
            let margin = empirical - (bound - 3.0 * sigma);
            Ok(CrosscheckPoint {
                params: *bp,
                generations: total_gens,
                empirical,
                bound,
                sigma,
                margin,
                pass: margin >= 0.0,
            })
        })
        .collect()
}

/// The reference comparison grid: the mid-size relay system at its
/// published operating parameters, swept over first-tier loss and
/// redundancy.
pub fn default_grid() -> Vec<BoundParams> {
    let mut points = Vec::new();
    for &big_m in &[2u32, 4] {
        for &m in &[3u16, 4, 5] {
            for &delta0 in &[0.1f64, 0.3, 0.5] {
                points.push(BoundParams {
                    n: 3,
                    m,
                    q: 256,
                    n_first_hop: 3,
                    n_second_hop: big_m,
                    delta0,
                    delta1: 0.01,
                    delta2: 0.01,
                });
            }
        }
    }
    points
}

pub fn csv_header() -> &'static str {
    "M,m,n,N,q,delta0,delta1,delta2,generations,empirical_success,p_decode_lower,sigma,margin,pass"
}

pub fn csv_row(pt: &CrosscheckPoint) -> String {
    let p = &pt.params;
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        p.n_second_hop,
        p.m,
        p.n,
        p.n_first_hop,
        p.q,
        p.delta0,
        p.delta1,
        p.delta2,
        pt.generations,
        pt.empirical,
        pt.bound,
        pt.sigma,
        pt.margin,
        if pt.pass { "pass" } else { "fail" }
    )
}
