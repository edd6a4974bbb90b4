//! Round-based simulation of the two-hop relay multicast system.
//!
//! Packets flow source -> N first-hop relays -> M second-hop relays ->
//! sinks. The source round-robins its m coded packets over the first-hop
//! relays; first-hop relays broadcast toward the second hop; second-hop
//! relays either forward verbatim or recombine; sinks decode per
//! generation. Every link is an independent erasure channel with its own
//! RNG substream, so results are deterministic for a given seed and
//! unaffected by parallelism elsewhere.

use crate::channel::{ChannelConfig, ChannelError, ErasureLink};
use crate::codec::{
    encode_source, recode, CodecError, CodedPacket, CodingParams, DecoderState, Generation,
};
use crate::seed;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

/// What a second-hop relay does with an incoming packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelayStrategy {
    /// Pass every received packet through unchanged.
    ForwardOnly,
    /// Buffer receptions and emit one fresh recombination of the buffer
    /// per innovative reception.
    Recode,
}

/// The three-tier relay topology. `None` connectivity means complete
/// bipartite between consecutive tiers.
#[derive(Debug, Clone)]
pub struct Topology {
    pub n_first_hop: usize,
    pub n_second_hop: usize,
    pub n_sinks: usize,
    /// Source to first-hop relays.
    pub tier0: ChannelConfig,
    /// First-hop to second-hop relays.
    pub tier1: ChannelConfig,
    /// Second-hop relays to sinks.
    pub tier2: ChannelConfig,
    pub first_to_second: Option<Vec<Vec<bool>>>,
    pub second_to_sink: Option<Vec<Vec<bool>>>,
}

impl Topology {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.n_first_hop == 0 || self.n_second_hop == 0 || self.n_sinks == 0 {
            return Err(SimError::InvalidConfig(
                "relay and sink counts must be at least 1".into(),
            ));
        }
        if let Some(m) = &self.first_to_second {
            if m.len() != self.n_first_hop || m.iter().any(|r| r.len() != self.n_second_hop) {
                return Err(SimError::InvalidConfig(format!(
                    "first_to_second must be {}x{}",
                    self.n_first_hop, self.n_second_hop
                )));
            }
        }
        if let Some(m) = &self.second_to_sink {
            if m.len() != self.n_second_hop || m.iter().any(|r| r.len() != self.n_sinks) {
                return Err(SimError::InvalidConfig(format!(
                    "second_to_sink must be {}x{}",
                    self.n_second_hop, self.n_sinks
                )));
            }
        }
        Ok(())
    }

    fn feeds_second(&self, i: usize, j: usize) -> bool {
        self.first_to_second.as_ref().map_or(true, |m| m[i][j])
    }

    fn feeds_sink(&self, j: usize, s: usize) -> bool {
        self.second_to_sink.as_ref().map_or(true, |m| m[j][s])
    }
}

/// One simulation run.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub coding: CodingParams,
    pub topology: Topology,
    pub strategy: RelayStrategy,
    /// Total source transmissions budgeted for the run; the generation
    /// count is this divided by the per-generation send count.
    pub total_packets: u64,
    pub seed: u64,
}

/// Aggregated outcome of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub generations: u64,
    /// Fraction of generations fully decoded, per sink.
    pub pdr_per_sink: Vec<f64>,
    pub mean_pdr: f64,
    /// Transmissions attempted per tier (0: source out, 1: first hop out,
    /// 2: second hop out).
    pub packets_sent: [u64; 3],
    pub packets_delivered: [u64; 3],
    /// Generation-sink pairs that failed to decode.
    pub decode_failures: u64,
}

enum Mode {
    Coded(RelayStrategy),
    Fragmentation,
}

struct Link {
    channel: ErasureLink,
    rng: ChaCha8Rng,
}

impl Link {
    fn build(cfg: &ChannelConfig, master: u64, labels: &[u64]) -> Result<Link, SimError> {
        Ok(Link { channel: cfg.build()?, rng: seed::rng_for(master, labels) })
    }

    fn transmit(&mut self) -> bool {
        self.channel.transmit(&mut self.rng)
    }
}

/// Runs the network-coded system with the configured relay strategy.
pub fn run_simulation(config: &SimConfig) -> Result<SimResult, SimError> {
    run(config, Mode::Coded(config.strategy))
}

/// Runs the uncoded baseline: the source sends each fragment once (as a
/// unit-coefficient packet), relays store and forward, and a generation
/// counts as delivered only when every fragment reaches the sink.
pub fn run_fragmentation_baseline(config: &SimConfig) -> Result<SimResult, SimError> {
    run(config, Mode::Fragmentation)
}

fn identity_packets(gen: &Generation, n: usize) -> Vec<CodedPacket> {
    gen.fragments
        .iter()
        .enumerate()
        .map(|(i, frag)| {
            let mut coeffs = vec![0u16; n];
            coeffs[i] = 1;
            CodedPacket { gen_id: gen.gen_id, coeffs, payload: frag.clone() }
        })
        .collect()
}

fn run(config: &SimConfig, mode: Mode) -> Result<SimResult, SimError> {
    let t = &config.topology;
    t.validate()?;
    let params = &config.coding;
    let per_gen_tx = match mode {
        Mode::Coded(_) => params.m as u64,
        Mode::Fragmentation => params.n as u64,
    };
    if config.total_packets < per_gen_tx {
        return Err(SimError::InvalidConfig(format!(
            "total_packets={} is below one generation's send count {per_gen_tx}",
            config.total_packets
        )));
    }
    let generations = config.total_packets / per_gen_tx;
    let master = config.seed;

    // Independent channel instance and RNG substream per link; channel
    // state (burst position) persists across generations.
    let mut tier0: Vec<Link> = (0..t.n_first_hop)
        .map(|i| Link::build(&t.tier0, master, &[0, i as u64]))
        .collect::<Result<_, _>>()?;
    let mut tier1: Vec<Vec<Link>> = (0..t.n_first_hop)
        .map(|i| {
            (0..t.n_second_hop)
                .map(|j| Link::build(&t.tier1, master, &[1, (i * t.n_second_hop + j) as u64]))
                .collect::<Result<_, _>>()
        })
        .collect::<Result<_, _>>()?;
    let mut tier2: Vec<Vec<Link>> = (0..t.n_second_hop)
        .map(|j| {
            (0..t.n_sinks)
                .map(|s| Link::build(&t.tier2, master, &[2, (j * t.n_sinks + s) as u64]))
                .collect::<Result<_, _>>()
        })
        .collect::<Result<_, _>>()?;
    let mut source_rng = seed::rng_for(master, &[3]);
    let mut relay_rngs: Vec<ChaCha8Rng> =
        (0..t.n_second_hop).map(|j| seed::rng_for(master, &[4, j as u64])).collect();

    let mut sent = [0u64; 3];
    let mut delivered = [0u64; 3];
    let mut decoded = vec![0u64; t.n_sinks];
    let mut decode_failures = 0u64;

    for g in 0..generations {
        let gen_id = (g % (u16::MAX as u64 + 1)) as u16;
        let fragments: Vec<Vec<u8>> = (0..params.n)
            .map(|_| (0..params.fragment_size).map(|_| source_rng.gen()).collect())
            .collect();
        let generation = Generation { gen_id, fragments };
        let packets = match mode {
            Mode::Coded(_) => encode_source(&generation, params, &mut source_rng)?,
            Mode::Fragmentation => identity_packets(&generation, params.n as usize),
        };

        // Tier 0: round-robin over first-hop relays.
        let mut first_buffers: Vec<Vec<CodedPacket>> = vec![Vec::new(); t.n_first_hop];
        for (idx, pkt) in packets.into_iter().enumerate() {
            let i = idx % t.n_first_hop;
            sent[0] += 1;
            if tier0[i].transmit() {
                delivered[0] += 1;
                first_buffers[i].push(pkt);
            }
        }

        // Tier 1: broadcast to connected second-hop relays, which react
        // per strategy.
        let mut outboxes: Vec<Vec<CodedPacket>> = vec![Vec::new(); t.n_second_hop];
        let mut buffers: Vec<Vec<CodedPacket>> = vec![Vec::new(); t.n_second_hop];
        let mut trackers: Vec<DecoderState> =
            (0..t.n_second_hop).map(|_| DecoderState::new(gen_id, params)).collect();
        for i in 0..t.n_first_hop {
            for pkt in &first_buffers[i] {
                for j in 0..t.n_second_hop {
                    if !t.feeds_second(i, j) {
                        continue;
                    }
                    sent[1] += 1;
                    if !tier1[i][j].transmit() {
                        continue;
                    }
                    delivered[1] += 1;
                    match mode {
                        Mode::Fragmentation | Mode::Coded(RelayStrategy::ForwardOnly) => {
                            outboxes[j].push(pkt.clone());
                        }
                        Mode::Coded(RelayStrategy::Recode) => {
                            let innovative = trackers[j].add(pkt)?;
                            buffers[j].push(pkt.clone());
                            if innovative {
                                let mut out =
                                    recode(&buffers[j], 1, &params.field, &mut relay_rngs[j])?;
                                outboxes[j].append(&mut out);
                            }
                        }
                    }
                }
            }
        }

        // Tier 2: broadcast to connected sinks.
        let mut sinks: Vec<DecoderState> =
            (0..t.n_sinks).map(|_| DecoderState::new(gen_id, params)).collect();
        for j in 0..t.n_second_hop {
            for pkt in &outboxes[j] {
                for s in 0..t.n_sinks {
                    if !t.feeds_sink(j, s) {
                        continue;
                    }
                    sent[2] += 1;
                    if tier2[j][s].transmit() {
                        delivered[2] += 1;
                        sinks[s].add(pkt)?;
                    }
                }
            }
        }

        for (s, dec) in sinks.iter().enumerate() {
            let ok = dec.is_complete() && dec.solve()? == generation.fragments;
            if ok {
                decoded[s] += 1;
            } else {
                decode_failures += 1;
            }
        }
    }

    let pdr_per_sink: Vec<f64> =
        decoded.iter().map(|&d| d as f64 / generations as f64).collect();
    let mean_pdr = pdr_per_sink.iter().sum::<f64>() / pdr_per_sink.len() as f64;
    Ok(SimResult {
        generations,
        pdr_per_sink,
        mean_pdr,
        packets_sent: sent,
        packets_delivered: delivered,
        decode_failures,
    })
}

/// Signal strength per candidate second-hop relay, indexed by relay id.
#[derive(Debug, Clone)]
pub struct RelaySignalMap {
    pub strengths: Vec<f64>,
}

/// Picks the `count` strongest candidates; equal strengths prefer the
/// lower id. Returned ids are ascending.
pub fn geo_select_relays(map: &RelaySignalMap, count: usize) -> Result<Vec<usize>, SimError> {
    if count > map.strengths.len() {
        return Err(SimError::InvalidConfig(format!(
            "cannot select {count} relays from {} candidates",
            map.strengths.len()
        )));
    }
    let mut ids: Vec<usize> = (0..map.strengths.len()).collect();
    ids.sort_by(|&a, &b| {
        map.strengths[b]
            .partial_cmp(&map.strengths[a])
            .expect("signal strengths must not be NaN")
            .then(a.cmp(&b))
    });
    let mut chosen: Vec<usize> = ids.into_iter().take(count).collect();
    chosen.sort_unstable();
    Ok(chosen)
}

/// Which system variant a sweep row measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepStrategy {
    /// Uncoded store-and-forward of single-packet generations.
    Fragmentation,
    NcForward,
    NcRecode,
}

impl SweepStrategy {
    pub fn label(&self) -> &'static str {
        match self {
            SweepStrategy::Fragmentation => "frag",
            SweepStrategy::NcForward => "nc-forward",
            SweepStrategy::NcRecode => "nc-recode",
        }
    }
}

/// Grid for a PDR sweep. The erasure axis moves tiers 1 and 2 together
/// (the topology's tier-0 rate stays as configured); every (strategy,
/// (n,m), field, erasure) combination becomes one row averaged over
/// `replications` seeded runs. The fragmentation baseline does no field
/// arithmetic and ignores the (n,m) and field axes: it contributes one
/// row per erasure value, reported as n=1, m=1, q=2.
#[derive(Debug, Clone)]
pub struct SweepGrid {
    pub strategies: Vec<SweepStrategy>,
    pub nm_pairs: Vec<(u16, u16)>,
    pub field_widths: Vec<u8>,
    pub erasure_values: Vec<f64>,
    pub topology: Topology,
    pub total_packets: u64,
    pub fragment_size: usize,
    pub replications: u32,
    pub seed: u64,
}

/// One aggregated grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub strategy: SweepStrategy,
    pub n: u16,
    pub m: u16,
    pub q: u32,
    pub n_first_hop: usize,
    pub n_second_hop: usize,
    pub delta0: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub replications: u32,
    pub mean_pdr: f64,
    pub stderr_pdr: f64,
}

struct RowSpec {
    strategy: SweepStrategy,
    n: u16,
    m: u16,
    f: u8,
    erasure: f64,
}

/// Runs the whole grid. Replications run in parallel with pre-derived
/// seeds; rows come back in grid order (strategy, then (n,m), then field,
/// then erasure) regardless of scheduling.
pub fn sweep(grid: &SweepGrid) -> Result<Vec<SweepRow>, SimError> {
    if grid.replications == 0 {
        return Err(SimError::InvalidConfig("replications must be at least 1".into()));
    }
    if grid.erasure_values.is_empty() {
        return Err(SimError::InvalidConfig("erasure grid is empty".into()));
    }
    grid.topology.validate()?;

    let mut rows = Vec::new();
    for &strategy in &grid.strategies {
        match strategy {
            SweepStrategy::Fragmentation => {
                for &erasure in &grid.erasure_values {
                    rows.push(RowSpec { strategy, n: 1, m: 1, f: 1, erasure });
                }
            }
            SweepStrategy::NcForward | SweepStrategy::NcRecode => {
                for &(n, m) in &grid.nm_pairs {
                    for &f in &grid.field_widths {
                        for &erasure in &grid.erasure_values {
                            rows.push(RowSpec { strategy, n, m, f, erasure });
                        }
                    }
                }
            }
        }
    }
    if rows.is_empty() {
        return Err(SimError::InvalidConfig("sweep grid is empty".into()));
    }

    let jobs: Vec<(usize, u32, u64)> = (0..rows.len())
        .flat_map(|row| {
            (0..grid.replications)
                .map(move |rep| (row, rep, seed::derive(grid.seed, &[row as u64, rep as u64])))
        })
        .collect();

    let outcomes: Result<Vec<(usize, u32, f64)>, SimError> = jobs
        .par_iter()
        .map(|&(row, rep, run_seed)| {
            let spec = &rows[row];
            let mut topology = grid.topology.clone();
            topology.tier1 = topology.tier1.with_loss(spec.erasure);
            topology.tier2 = topology.tier2.with_loss(spec.erasure);
            let coding = CodingParams::new(spec.n, spec.m, spec.f, grid.fragment_size)?;
            let config = SimConfig {
                coding,
                topology,
                strategy: match spec.strategy {
                    SweepStrategy::NcForward => RelayStrategy::ForwardOnly,
                    _ => RelayStrategy::Recode,
                },
                total_packets: grid.total_packets,
                seed: run_seed,
            };
            let result = match spec.strategy {
                SweepStrategy::Fragmentation => run_fragmentation_baseline(&config)?,
                _ => run_simulation(&config)?,
            };
            Ok((row, rep, result.mean_pdr))
        })
        .collect();
    let outcomes = outcomes?;

    // Fixed slot per replication: aggregation order (and with it the
    // floating-point sum) must not depend on scheduling.
    let mut samples: Vec<Vec<f64>> =
        vec![vec![0.0; grid.replications as usize]; rows.len()];
    for (row, rep, pdr) in outcomes {
        samples[row][rep as usize] = pdr;
    }

    let delta0 = grid.topology.tier0.loss_rate();
    Ok(rows
        .iter()
        .zip(&samples)
        .map(|(spec, vals)| {
            let reps = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / reps;
            let stderr = if vals.len() > 1 {
                let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1.0);
                (var / reps).sqrt()
            } else {
                0.0
            };
            SweepRow {
                strategy: spec.strategy,
                n: spec.n,
                m: spec.m,
                q: 1u32 << spec.f,
                n_first_hop: grid.topology.n_first_hop,
                n_second_hop: grid.topology.n_second_hop,
                delta0,
                delta1: spec.erasure,
                delta2: spec.erasure,
                replications: grid.replications,
                mean_pdr: mean,
                stderr_pdr: stderr,
            }
        })
        .collect())
}

pub fn sweep_csv_header() -> &'static str {
    "strategy,n,m,q,N,M,delta0,delta1,delta2,replications,mean_pdr,stderr_pdr"
}

pub fn sweep_csv_row(row: &SweepRow) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{}",
        row.strategy.label(),
        row.n,
        row.m,
        row.q,
        row.n_first_hop,
        row.n_second_hop,
        row.delta0,
        row.delta1,
        row.delta2,
        row.replications,
        row.mean_pdr,
        row.stderr_pdr
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_topology(n: usize, m: usize, sinks: usize, d0: f64, d1: f64, d2: f64) -> Topology {
        Topology {
            n_first_hop: n,
            n_second_hop: m,
            n_sinks: sinks,
            tier0: ChannelConfig::Bernoulli { delta: d0 },
            tier1: ChannelConfig::Bernoulli { delta: d1 },
            tier2: ChannelConfig::Bernoulli { delta: d2 },
            first_to_second: None,
            second_to_sink: None,
        }
    }

    fn config(
        n: u16,
        m: u16,
        f: u8,
        topology: Topology,
        strategy: RelayStrategy,
        total_packets: u64,
        seed: u64,
    ) -> SimConfig {
        SimConfig {
            coding: CodingParams::new(n, m, f, 1).unwrap(),
            topology,
            strategy,
            total_packets,
            seed,
        }
    }

    #[test]
    fn lossless_recoding_delivers_nearly_everything() {
        let c = config(
            4,
            4,
            8,
            uniform_topology(3, 4, 2, 0.0, 0.0, 0.0),
            RelayStrategy::Recode,
            160,
            1,
        );
        let r = run_simulation(&c).unwrap();
        assert_eq!(r.generations, 40);
        assert!(r.mean_pdr >= 0.95, "mean pdr {}", r.mean_pdr);
        for pdr in &r.pdr_per_sink {
            assert!(*pdr >= 0.9);
        }
    }

    #[test]
    fn lossless_redundant_recoding_delivers_everything() {
        let c = config(
            3,
            5,
            8,
            uniform_topology(3, 4, 2, 0.0, 0.0, 0.0),
            RelayStrategy::Recode,
            150,
            2,
        );
        let r = run_simulation(&c).unwrap();
        assert_eq!(r.mean_pdr, 1.0);
        assert_eq!(r.decode_failures, 0);
    }

    #[test]
    fn lossless_fragmentation_delivers_everything() {
        let c = config(
            6,
            6,
            1,
            uniform_topology(2, 3, 2, 0.0, 0.0, 0.0),
            RelayStrategy::ForwardOnly,
            120,
            3,
        );
        let r = run_fragmentation_baseline(&c).unwrap();
        assert_eq!(r.generations, 20);
        assert_eq!(r.mean_pdr, 1.0);
    }

    #[test]
    fn dead_first_tier_delivers_nothing() {
        let topo = uniform_topology(3, 4, 2, 1.0, 0.0, 0.0);
        let c = config(3, 4, 8, topo.clone(), RelayStrategy::Recode, 80, 4);
        let r = run_simulation(&c).unwrap();
        assert_eq!(r.mean_pdr, 0.0);
        assert_eq!(r.packets_delivered, [0, 0, 0]);
        let b = config(3, 4, 8, topo, RelayStrategy::ForwardOnly, 80, 4);
        assert_eq!(run_fragmentation_baseline(&b).unwrap().mean_pdr, 0.0);
    }

    #[test]
    fn single_link_fragmentation_matches_closed_form() {
        // N=M=1 with lossless later tiers degenerates to one erasure link;
        // delivering all n fragments has probability (1-delta)^n.
        let delta = 0.3;
        let n = 5u16;
        let gens = 2000u64;
        let c = config(
            n,
            n,
            1,
            uniform_topology(1, 1, 1, delta, 0.0, 0.0),
            RelayStrategy::ForwardOnly,
            gens * n as u64,
            5,
        );
        let r = run_fragmentation_baseline(&c).unwrap();
        let expect = (1.0f64 - delta).powi(n as i32);
        let sigma = (expect * (1.0 - expect) / gens as f64).sqrt();
        assert!(
            (r.mean_pdr - expect).abs() <= 3.0 * sigma,
            "pdr {} vs {expect} (sigma {sigma})",
            r.mean_pdr
        );
    }

    #[test]
    fn identical_configs_are_bit_identical() {
        let mk = || {
            config(
                3,
                4,
                8,
                uniform_topology(3, 2, 2, 0.1, 0.2, 0.2),
                RelayStrategy::Recode,
                400,
                42,
            )
        };
        let a = run_simulation(&mk()).unwrap();
        let b = run_simulation(&mk()).unwrap();
        assert_eq!(a, b);
        let c = run_simulation(&config(
            3,
            4,
            8,
            uniform_topology(3, 2, 2, 0.1, 0.2, 0.2),
            RelayStrategy::Recode,
            400,
            43,
        ))
        .unwrap();
        assert_ne!(a, c, "a different seed should move at least one counter");
    }

    #[test]
    fn burst_channels_run_and_conserve_packets() {
        let topo = Topology {
            tier1: ChannelConfig::GilbertElliot { target_loss: 0.2, mean_burst: 4.0 },
            ..uniform_topology(3, 4, 2, 0.05, 0.2, 0.2)
        };
        let c = config(3, 4, 8, topo, RelayStrategy::Recode, 400, 6);
        let r = run_simulation(&c).unwrap();
        for tier in 0..3 {
            assert!(r.packets_delivered[tier] <= r.packets_sent[tier]);
        }
        assert_eq!(r.packets_sent[0], 400);
        assert!(r.mean_pdr > 0.0 && r.mean_pdr <= 1.0);
    }

    #[test]
    fn partial_connectivity_is_respected() {
        // Second relay column disconnected on both hops: nothing may
        // transit through it.
        let topo = Topology {
            first_to_second: Some(vec![vec![true, false]; 2]),
            second_to_sink: Some(vec![vec![true], vec![false]]),
            ..uniform_topology(2, 2, 1, 0.0, 0.0, 0.0)
        };
        let c = config(2, 3, 8, topo, RelayStrategy::Recode, 60, 7);
        let r = run_simulation(&c).unwrap();
        // Each surviving tier-0 packet fans out to exactly one second-hop
        // relay instead of two.
        assert_eq!(r.packets_sent[1], 60);
        assert_eq!(r.mean_pdr, 1.0);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let c = config(
            3,
            4,
            8,
            uniform_topology(3, 2, 1, 0.0, 0.0, 0.0),
            RelayStrategy::Recode,
            3,
            0,
        );
        assert!(matches!(run_simulation(&c), Err(SimError::InvalidConfig(_))));
        let mut bad = config(
            3,
            4,
            8,
            uniform_topology(3, 2, 1, 0.0, 0.0, 0.0),
            RelayStrategy::Recode,
            40,
            0,
        );
        bad.topology.first_to_second = Some(vec![vec![true; 2]; 2]);
        assert!(matches!(run_simulation(&bad), Err(SimError::InvalidConfig(_))));
        bad.topology.first_to_second = None;
        bad.topology.tier1 = ChannelConfig::Bernoulli { delta: 1.5 };
        assert!(matches!(run_simulation(&bad), Err(SimError::Channel(_))));
    }

    #[test]
    fn geo_selection_prefers_strength_then_low_id() {
        let map = RelaySignalMap { strengths: vec![3.0, 1.0, 2.0] };
        assert_eq!(geo_select_relays(&map, 2).unwrap(), vec![0, 2]);
        let flat = RelaySignalMap { strengths: vec![1.0; 4] };
        assert_eq!(geo_select_relays(&flat, 2).unwrap(), vec![0, 1]);
        assert_eq!(geo_select_relays(&map, 3).unwrap(), vec![0, 1, 2]);
        assert!(geo_select_relays(&map, 4).is_err());
    }

    #[test]
    fn sweep_emits_rows_in_grid_order() {
        let grid = SweepGrid {
            strategies: vec![SweepStrategy::Fragmentation, SweepStrategy::NcRecode],
            nm_pairs: vec![(1, 2), (3, 4)],
            field_widths: vec![4, 8],
            erasure_values: vec![0.1, 0.3],
            topology: uniform_topology(3, 2, 2, 0.0, 0.0, 0.0),
            total_packets: 40,
            fragment_size: 1,
            replications: 2,
            seed: 9,
        };
        let rows = sweep(&grid).unwrap();
        // frag: 2 erasure rows; nc-recode: 2 nm * 2 fields * 2 erasures.
        assert_eq!(rows.len(), 2 + 8);
        assert_eq!(rows[0].strategy, SweepStrategy::Fragmentation);
        assert_eq!((rows[0].n, rows[0].m, rows[0].q), (1, 1, 2));
        assert_eq!(rows[0].delta1, 0.1);
        assert_eq!(rows[1].delta1, 0.3);
        let nc: Vec<(u16, u32, f64)> =
            rows[2..].iter().map(|r| (r.n, r.q, r.delta1)).collect();
        assert_eq!(
            nc,
            vec![
                (1, 16, 0.1),
                (1, 16, 0.3),
                (1, 256, 0.1),
                (1, 256, 0.3),
                (3, 16, 0.1),
                (3, 16, 0.3),
                (3, 256, 0.1),
                (3, 256, 0.3),
            ]
        );
        for r in &rows {
            assert!(r.mean_pdr >= 0.0 && r.mean_pdr <= 1.0);
            assert_eq!(r.delta0, 0.0);
            assert_eq!(r.delta1, r.delta2);
        }
    }

    #[test]
    fn lossless_sweep_point_reports_full_delivery() {
        let grid = SweepGrid {
            strategies: vec![SweepStrategy::NcRecode],
            nm_pairs: vec![(3, 5)],
            field_widths: vec![8],
            erasure_values: vec![0.0],
            topology: uniform_topology(3, 4, 2, 0.0, 0.0, 0.0),
            total_packets: 150,
            fragment_size: 1,
            replications: 3,
            seed: 10,
        };
        let rows = sweep(&grid).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].mean_pdr, 1.0);
        assert_eq!(rows[0].stderr_pdr, 0.0);
    }

    #[test]
    fn pdr_does_not_improve_when_later_tiers_get_worse() {
        let base = SweepGrid {
            strategies: vec![SweepStrategy::NcRecode],
            nm_pairs: vec![(3, 4)],
            field_widths: vec![8],
            erasure_values: vec![0.1, 0.4],
            topology: uniform_topology(3, 4, 1, 0.0, 0.0, 0.0),
            total_packets: 200,
            fragment_size: 1,
            replications: 12,
            seed: 11,
        };
        let rows = sweep(&base).unwrap();
        let slack = 2.0 * (rows[0].stderr_pdr + rows[1].stderr_pdr);
        assert!(
            rows[1].mean_pdr <= rows[0].mean_pdr + slack,
            "pdr rose from {} to {} as loss grew",
            rows[0].mean_pdr,
            rows[1].mean_pdr
        );
    }

    #[test]
    fn sweep_csv_shape() {
        assert_eq!(sweep_csv_header().split(',').count(), 12);
        let row = SweepRow {
            strategy: SweepStrategy::NcRecode,
            n: 9,
            m: 10,
            q: 256,
            n_first_hop: 3,
            n_second_hop: 4,
            delta0: 0.0,
            delta1: 0.25,
            delta2: 0.25,
            replications: 30,
            mean_pdr: 0.875,
            stderr_pdr: 0.01,
        };
        assert_eq!(
            sweep_csv_row(&row),
            "nc-recode,9,10,256,3,4,0,0.25,0.25,30,0.875,0.01"
        );
    }
}
