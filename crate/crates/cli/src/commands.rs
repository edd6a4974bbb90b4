//! Subcommand bodies: parameter-grid assembly, core calls, and CSV or
//! file output.

use std::collections::BTreeMap;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rlnc_core::bounds::{self, BoundError, BoundParams, SweepSpec};
use rlnc_core::channel::ChannelConfig;
use rlnc_core::codec::{self, wire, CodingParams, DecoderState};
use rlnc_core::crosscheck::{self, CrosscheckError, CrosscheckOptions};
use rlnc_core::simnet::{self, SimError, SweepGrid, Topology};

use crate::parse::{self, pick, FileConfig};
use crate::{BoundsArgs, CliError, CodecDecodeArgs, CodecEncodeArgs, CrosscheckArgs, SimArgs};

fn usage(flag: &str) -> impl Fn(String) -> CliError + '_ {
    move |e| CliError::Usage(format!("--{flag}: {e}"))
}

/// CSV lands in --out when given, stdout otherwise.
fn write_output(out: Option<&str>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Runtime(format!("cannot write {path}: {e}"))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|()| stdout.flush())
                .map_err(|e| CliError::Runtime(format!("cannot write stdout: {e}")))
        }
    }
}

pub fn run_bounds(args: &BoundsArgs, cfg: &FileConfig) -> Result<(), CliError> {
    let n: u16 = parse::scalar(pick(&args.n, cfg, "n", "3")).map_err(usage("n"))?;
    let n_first: u32 = parse::scalar(pick(&args.big_n, cfg, "N", "3")).map_err(usage("N"))?;
    let q: u32 = parse::scalar(pick(&args.q, cfg, "q", "256")).map_err(usage("q"))?;
    let delta1: f64 = parse::scalar(pick(&args.delta1, cfg, "delta1", "0.01")).map_err(usage("delta1"))?;
    let delta2: f64 = parse::scalar(pick(&args.delta2, cfg, "delta2", "0.01")).map_err(usage("delta2"))?;
    let m_values = parse::u16_list(pick(&args.m, cfg, "m", "3:8")).map_err(usage("m"))?;
    let second_hop_values = parse::u32_list(pick(&args.big_m, cfg, "M", "2,4")).map_err(usage("M"))?;
    let delta0_values = parse::f64_list(pick(&args.delta0, cfg, "delta0", "0:0.9:0.05")).map_err(usage("delta0"))?;

    let spec = SweepSpec {
        base: BoundParams {
            n,
            m: m_values[0],
            q,
            n_first_hop: n_first,
            n_second_hop: second_hop_values[0],
            delta0: delta0_values[0],
            delta1,
            delta2,
        },
        second_hop_values,
        m_values,
        delta0_values,
    };
    let rows = bounds::sweep_surface(&spec).map_err(|e: BoundError| CliError::Usage(e.to_string()))?;

    let mut text = String::from(bounds::csv_header());
    text.push('\n');
    for (p, r) in &rows {
        text.push_str(&bounds::csv_row(p, r));
        text.push('\n');
    }
    write_output(args.out.as_deref(), &text)
}

pub fn run_sim(args: &SimArgs, cfg: &FileConfig) -> Result<(), CliError> {
    let strategies = parse::strategy_list(pick(&args.strategies, cfg, "strategies", "frag,nc"))
        .map_err(usage("strategies"))?;
    let nm_pairs = parse::nm_list(pick(&args.nm, cfg, "nm", "9:10")).map_err(usage("nm"))?;
    let field_widths = parse::u32_list(pick(&args.q, cfg, "q", "256"))
        .and_then(|qs| qs.into_iter().map(parse::field_width_for).collect())
        .map_err(usage("q"))?;
    let erasure_values = parse::f64_list(pick(&args.erasure, cfg, "erasure", "0.05:0.4:0.05"))
        .map_err(usage("erasure"))?;
    let total_packets: u64 = parse::scalar(pick(&args.packets, cfg, "packets", "2000")).map_err(usage("packets"))?;
    let sinks: usize = parse::scalar(pick(&args.sinks, cfg, "sinks", "2")).map_err(usage("sinks"))?;
    let replications: u32 = parse::scalar(pick(&args.reps, cfg, "reps", "30")).map_err(usage("reps"))?;
    let seed: u64 = parse::scalar(pick(&args.seed, cfg, "seed", "0")).map_err(usage("seed"))?;
    let n_first: usize = parse::scalar(pick(&args.big_n, cfg, "N", "3")).map_err(usage("N"))?;
    let n_second: usize = parse::scalar(pick(&args.big_m, cfg, "M", "5")).map_err(usage("M"))?;
    let delta0: f64 = parse::scalar(pick(&args.delta0, cfg, "delta0", "0.001")).map_err(usage("delta0"))?;
    let fragment_size: usize =
        parse::scalar(pick(&args.fragment_size, cfg, "fragment-size", "1")).map_err(usage("fragment-size"))?;

    let grid = SweepGrid {
        strategies,
        nm_pairs,
        field_widths,
        erasure_values,
        topology: Topology {
            n_first_hop: n_first,
            n_second_hop: n_second,
            n_sinks: sinks,
            tier0: ChannelConfig::Bernoulli { delta: delta0 },
            tier1: ChannelConfig::Bernoulli { delta: 0.0 },
            tier2: ChannelConfig::Bernoulli { delta: 0.0 },
            first_to_second: None,
            second_to_sink: None,
        },
        total_packets,
        fragment_size,
        replications,
        seed,
    };
    let rows = simnet::sweep(&grid).map_err(|e| match e {
        SimError::InvalidConfig(_) => CliError::Usage(e.to_string()),
        other => CliError::Runtime(other.to_string()),
    })?;

    let mut text = String::from(simnet::sweep_csv_header());
    text.push('\n');
    for row in &rows {
        text.push_str(&simnet::sweep_csv_row(row));
        text.push('\n');
    }
    write_output(args.out.as_deref(), &text)
}

pub fn run_crosscheck(args: &CrosscheckArgs, cfg: &FileConfig) -> Result<(), CliError> {
    let n: u16 = parse::scalar(pick(&args.n, cfg, "n", "3")).map_err(usage("n"))?;
    let n_first: u32 = parse::scalar(pick(&args.big_n, cfg, "N", "3")).map_err(usage("N"))?;
    let q: u32 = parse::scalar(pick(&args.q, cfg, "q", "256")).map_err(usage("q"))?;
    let delta1: f64 = parse::scalar(pick(&args.delta1, cfg, "delta1", "0.01")).map_err(usage("delta1"))?;
    let delta2: f64 = parse::scalar(pick(&args.delta2, cfg, "delta2", "0.01")).map_err(usage("delta2"))?;
    let m_values = parse::u16_list(pick(&args.m, cfg, "m", "3,4,5")).map_err(usage("m"))?;
    let second_hop_values = parse::u32_list(pick(&args.big_m, cfg, "M", "2,4")).map_err(usage("M"))?;
    let delta0_values = parse::f64_list(pick(&args.delta0, cfg, "delta0", "0.1,0.3,0.5")).map_err(usage("delta0"))?;
    let replications: u32 = parse::scalar(pick(&args.reps, cfg, "reps", "30")).map_err(usage("reps"))?;
    let generations_per_rep: u64 =
        parse::scalar(pick(&args.gens_per_rep, cfg, "gens-per-rep", "200")).map_err(usage("gens-per-rep"))?;
    let seed: u64 = parse::scalar(pick(&args.seed, cfg, "seed", "0")).map_err(usage("seed"))?;

    let mut points = Vec::new();
    for &big_m in &second_hop_values {
        for &m in &m_values {
            for &delta0 in &delta0_values {
                points.push(BoundParams {
                    n,
                    m,
                    q,
                    n_first_hop: n_first,
                    n_second_hop: big_m,
                    delta0,
                    delta1,
                    delta2,
                });
            }
        }
    }
    let opts = CrosscheckOptions {
        replications,
        generations_per_rep,
        seed,
        exponent_scale: args.exponent_scale,
    };
    let results = crosscheck::run_grid(&points, &opts).map_err(|e| match e {
        CrosscheckError::Sim(_) => CliError::Runtime(e.to_string()),
        other => CliError::Usage(other.to_string()),
    })?;

    let mut text = String::from(crosscheck::csv_header());
    text.push('\n');
    for pt in &results {
        text.push_str(&crosscheck::csv_row(pt));
        text.push('\n');
    }
    write_output(args.out.as_deref(), &text)?;

    let passed = results.iter().filter(|p| p.pass).count();
    eprintln!("crosscheck: {passed}/{} points passed", results.len());
    if passed < results.len() {
        let worst = results
            .iter()
            .min_by(|a, b| a.margin.total_cmp(&b.margin))
            .expect("nonempty results");
        return Err(CliError::CrosscheckFailed(format!(
            "empirical success fell below bound - 3 sigma at {} of {} points (worst margin {:.5} at M={} m={} delta0={})",
            results.len() - passed,
            results.len(),
            worst.margin,
            worst.params.n_second_hop,
            worst.params.m,
            worst.params.delta0,
        )));
    }
    Ok(())
}

pub fn run_codec_encode(args: &CodecEncodeArgs, cfg: &FileConfig) -> Result<(), CliError> {
    let input = pick(&args.input, cfg, "input", "");
    let output = pick(&args.output, cfg, "output", "");
    if input.is_empty() || output.is_empty() {
        return Err(CliError::Usage("encode needs --input and --output".into()));
    }
    let n: u16 = parse::scalar(pick(&args.n, cfg, "n", "9")).map_err(usage("n"))?;
    let m: u16 = parse::scalar(pick(&args.m, cfg, "m", "10")).map_err(usage("m"))?;
    let f: u8 = parse::scalar(pick(&args.f, cfg, "f", "8")).map_err(usage("f"))?;
    let fragment_size: usize =
        parse::scalar(pick(&args.fragment_size, cfg, "fragment-size", "1024")).map_err(usage("fragment-size"))?;
    let seed: u64 = parse::scalar(pick(&args.seed, cfg, "seed", "0")).map_err(usage("seed"))?;

    let params = CodingParams::new(n, m, f, fragment_size).map_err(|e| CliError::Usage(e.to_string()))?;
    let header_fragment_size = u32::try_from(fragment_size)
        .map_err(|_| CliError::Usage("--fragment-size: does not fit in 32 bits".into()))?;

    let data = std::fs::read(input).map_err(|e| CliError::Runtime(format!("cannot read {input}: {e}")))?;
    let segmented = codec::segment(&data, &params).map_err(|e| CliError::Runtime(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut packets = Vec::new();
    for gen in &segmented.generations {
        packets.extend(codec::encode_source(gen, &params, &mut rng).map_err(|e| CliError::Runtime(e.to_string()))?);
    }

    let header = wire::FileHeader {
        f,
        n,
        fragment_size: header_fragment_size,
        original_len: segmented.original_len,
    };
    let file = std::fs::File::create(output)
        .map_err(|e| CliError::Runtime(format!("cannot create {output}: {e}")))?;
    let mut writer = std::io::BufWriter::new(file);
    wire::write_file(&mut writer, &header, &packets).map_err(|e| CliError::Runtime(e.to_string()))?;
    writer.flush().map_err(|e| CliError::Runtime(format!("cannot write {output}: {e}")))?;
    eprintln!(
        "encoded {} bytes as {} generations x {} packets",
        segmented.original_len,
        segmented.generations.len(),
        m
    );
    Ok(())
}

pub fn run_codec_decode(args: &CodecDecodeArgs, cfg: &FileConfig) -> Result<(), CliError> {
    let input = pick(&args.input, cfg, "input", "");
    let output = pick(&args.output, cfg, "output", "");
    if input.is_empty() || output.is_empty() {
        return Err(CliError::Usage("decode needs --input and --output".into()));
    }

    let bytes = std::fs::read(input).map_err(|e| CliError::Runtime(format!("cannot read {input}: {e}")))?;
    let (header, packets) =
        wire::read_file(&mut bytes.as_slice()).map_err(|e| CliError::Runtime(e.to_string()))?;
    let params = CodingParams::new(header.n, header.n, header.f, header.fragment_size as usize)
        .map_err(|e| CliError::Runtime(format!("bad container header: {e}")))?;

    let per_generation = params.generation_payload() as u64;
    let expected_gens = header.original_len.div_ceil(per_generation);
    if expected_gens > 65536 {
        return Err(CliError::Runtime(format!(
            "bad container header: payload spans {expected_gens} generations, above the 65536 limit"
        )));
    }
    let mut by_gen: BTreeMap<u16, Vec<_>> = BTreeMap::new();
    for pkt in packets {
        if u64::from(pkt.gen_id) >= expected_gens {
            return Err(CliError::Runtime(format!(
                "packet for generation {} but the payload only spans {} generations",
                pkt.gen_id, expected_gens
            )));
        }
        by_gen.entry(pkt.gen_id).or_default().push(pkt);
    }

    let mut decoded = Vec::new();
    let mut deficient = Vec::new();
    for gen in 0..expected_gens {
        let gen_id = gen as u16;
        let mut decoder = DecoderState::new(gen_id, &params);
        for pkt in by_gen.get(&gen_id).map(Vec::as_slice).unwrap_or(&[]) {
            decoder.add(pkt).map_err(|e| CliError::Runtime(e.to_string()))?;
        }
        if decoder.is_complete() {
            decoded.push((gen_id, decoder.solve().map_err(|e| CliError::Runtime(e.to_string()))?));
        } else {
            deficient.push((gen_id, decoder.rank()));
        }
    }
    if !deficient.is_empty() {
        for (gen_id, rank) in &deficient {
            eprintln!("generation {gen_id}: rank {rank} of {} (not decodable)", header.n);
        }
        return Err(CliError::Runtime(format!(
            "not decodable: {} of {expected_gens} generations below full rank",
            deficient.len()
        )));
    }

    let data = codec::reassemble(&decoded, header.original_len).map_err(|e| CliError::Runtime(e.to_string()))?;
    std::fs::write(output, &data).map_err(|e| CliError::Runtime(format!("cannot write {output}: {e}")))?;
    eprintln!("decoded {} bytes from {expected_gens} generations", data.len());
    Ok(())
}
