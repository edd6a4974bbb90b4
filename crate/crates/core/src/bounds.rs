//! Closed-form decoding-probability bounds for the two-hop relay system.
//!
//! The model: a source splits each generation into `n` fragments and sends
//! `m` coded packets round-robin over `N` first-hop relays (erasure rate
//! `delta0`), which forward to `M` second-hop relays (`delta1`), which
//! recombine and forward to the sink (`delta2`). `psi` is the probability
//! that one source packet contributes nothing to a recombined packet; from
//! it a union bound gives the decode failure probability at the sink.
//!
//! The failure bound is a union bound, so it can exceed 1; results carry
//! both the raw value and the clamp. Sums are evaluated in the log domain
//! because `C(n,i)*(q-1)^i` overflows doubles long before n gets
//! interesting.

use statrs::function::gamma::ln_gamma;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BoundError {
    #[error("invalid bound parameters: {0}")]
    InvalidParams(String),
}

/// Inputs for one bound evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundParams {
    pub n: u16,
    pub m: u16,
    pub q: u32,
    /// First-hop relay count (N).
    pub n_first_hop: u32,
    /// Second-hop relay count (M).
    pub n_second_hop: u32,
    pub delta0: f64,
    pub delta1: f64,
    pub delta2: f64,
}

impl BoundParams {
    pub fn validate(&self) -> Result<(), BoundError> {
        if self.n == 0 {
            return Err(BoundError::InvalidParams("n must be at least 1".into()));
        }
        if self.m < self.n {
            return Err(BoundError::InvalidParams(format!(
                "m={} must be at least n={}",
                self.m, self.n
            )));
        }
        if self.q < 2 {
            return Err(BoundError::InvalidParams("q must be at least 2".into()));
        }
        if self.n_first_hop == 0 || self.n_second_hop == 0 {
            return Err(BoundError::InvalidParams("relay counts must be at least 1".into()));
        }
        for (name, d) in [("delta0", self.delta0), ("delta1", self.delta1), ("delta2", self.delta2)]
        {
            if !(0.0..=1.0).contains(&d) || d.is_nan() {
                return Err(BoundError::InvalidParams(format!("{name}={d} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Conditions under which a result needed special handling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainNote {
    /// psi < 1/q makes the inner base negative; its absolute value was
    /// used and the point is suspect.
    SourceBaseNegative,
    /// Same situation in the inter-flow bound (delta1 < 1/q).
    InterBaseNegative,
    /// The raw failure bound exceeded 1 and was clamped.
    FailBoundClamped,
    /// The inter-flow failure sum exceeded 1; the decode bound was
    /// clamped at 0.
    InterBoundClamped,
}

impl fmt::Display for DomainNote {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DomainNote::SourceBaseNegative => "source_base_negative_abs_guard",
            DomainNote::InterBaseNegative => "inter_base_negative_abs_guard",
            DomainNote::FailBoundClamped => "p_fail_clamped_from_above",
            DomainNote::InterBoundClamped => "inter_bound_clamped_at_zero",
        };
        out.write_str(s)
    }
}

/// One evaluated point.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundResult {
    pub psi: f64,
    /// Union bound on decode failure, before clamping; may exceed 1.
    pub p_fail_raw: f64,
    /// Failure bound clamped to [0, 1].
    pub p_fail_upper: f64,
    /// 1 - p_fail_upper.
    pub p_decode_lower: f64,
    /// Decode bound for coding across the N first-hop flows.
    pub p_decode_inter_lower: f64,
    pub notes: Vec<DomainNote>,
}

impl BoundResult {
    pub fn notes_string(&self) -> String {
        self.notes.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(";")
    }
}

/// Probability that a given source packet is absent from a second-hop
/// relay's buffer: lost on all N first-hop legs or never placed on any.
pub fn psi(delta0: f64, delta1: f64, n_first_hop: u32) -> Result<f64, BoundError> {
    for (name, d) in [("delta0", delta0), ("delta1", delta1)] {
        if !(0.0..=1.0).contains(&d) || d.is_nan() {
            return Err(BoundError::InvalidParams(format!("{name}={d} outside [0, 1]")));
        }
    }
    if n_first_hop == 0 {
        return Err(BoundError::InvalidParams("n_first_hop must be at least 1".into()));
    }
    let n = n_first_hop as i32;
    Ok(((1.0 - delta0) * delta1).powi(n) + delta0.powi(n))
}

/// Distribution of one coefficient seen by the sink: zero when the source
/// packet went missing, otherwise uniform over the q-1 nonzero values.
pub fn coeff_probs(psi: f64, q: u32) -> (f64, f64) {
    debug_assert!((0.0..=1.0).contains(&psi));
    debug_assert!(q >= 2);
    (psi, (1.0 - psi) / (q as f64 - 1.0))
}

fn ln_binomial(n: u64, k: u64) -> f64 {
    debug_assert!(k <= n);
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

fn logsumexp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// Log of the union-bound failure sum:
/// ln[ (1/(q-1)) * sum_{i=1..terms} C(terms,i) (q-1)^i * brace(i)^exponent ]
/// where brace(i) = delta_last + (1-delta_last)*(1/q + (1-1/q)*base^i) and
/// base = 1 - (1-p_zero)/(1-1/q).
///
/// When p_zero < 1/q the base goes negative and odd powers lose their
/// meaning as probabilities; per the guard policy the absolute value is
/// used and the caller is told via the returned flag.
fn ln_fail_sum(terms: u32, q: u32, p_zero: f64, delta_last: f64, exponent: f64) -> (f64, bool) {
    let qf = q as f64;
    let qinv = 1.0 / qf;
    let base = 1.0 - (1.0 - p_zero) / (1.0 - qinv);
    let flagged = base < 0.0;
    let guarded = base.abs();
    let ln_q1 = (qf - 1.0).ln();
    let mut lns = Vec::with_capacity(terms as usize);
    for i in 1..=terms {
        let inner = qinv + (1.0 - qinv) * guarded.powi(i as i32);
        let brace = delta_last + (1.0 - delta_last) * inner;
        // brace > 0 always: inner >= qinv > 0.
        lns.push(ln_binomial(terms as u64, i as u64) + i as f64 * ln_q1 + exponent * brace.ln());
    }
    (logsumexp(&lns) - ln_q1, flagged)
}

/// Evaluates the source-coding failure bound and both decode bounds.
pub fn evaluate(params: &BoundParams) -> Result<BoundResult, BoundError> {
    evaluate_scaled(params, 1.0)
}

/// Diagnostic variant of [`evaluate`] that multiplies the source-coding
/// failure-sum exponent by `exponent_scale` (the inter-flow bound is left
/// untouched). Scale 1 is the real bound; other scales produce a
/// deliberately wrong curve so validation harnesses can prove their
/// comparison actually bites.
pub fn evaluate_scaled(
    params: &BoundParams,
    exponent_scale: f64,
) -> Result<BoundResult, BoundError> {
    params.validate()?;
    if !(exponent_scale > 0.0) {
        return Err(BoundError::InvalidParams(format!(
            "exponent scale {exponent_scale} must be positive"
        )));
    }
    let mut notes = Vec::new();
    let psi_v = psi(params.delta0, params.delta1, params.n_first_hop)?;

    let exponent =
        params.n_second_hop as f64 * params.m as f64 / params.n_first_hop as f64 * exponent_scale;
    let (ln_fail, flagged) =
        ln_fail_sum(params.n as u32, params.q, psi_v, params.delta2, exponent);
    if flagged {
        notes.push(DomainNote::SourceBaseNegative);
    }
    let p_fail_raw = ln_fail.exp();
    let p_fail_upper = if p_fail_raw > 1.0 {
        notes.push(DomainNote::FailBoundClamped);
        1.0
    } else {
        p_fail_raw
    };
    let p_decode_lower = 1.0 - p_fail_upper;

    // Coding across the N first-hop flows: the sink must catch one packet
    // of each flow tier-0, then invert an N-sized system fed through the
    // second hop. m plays no role.
    let (ln_fail_inter, flagged_inter) = ln_fail_sum(
        params.n_first_hop,
        params.q,
        params.delta1,
        params.delta2,
        params.n_second_hop as f64,
    );
    if flagged_inter {
        notes.push(DomainNote::InterBaseNegative);
    }
    let fail_inter = ln_fail_inter.exp();
    let lead = (1.0 - params.delta0).powi(params.n_first_hop as i32);
    let mut p_decode_inter_lower = lead * (1.0 - fail_inter);
    if p_decode_inter_lower < 0.0 {
        notes.push(DomainNote::InterBoundClamped);
        p_decode_inter_lower = 0.0;
    }
    debug_assert!(p_decode_inter_lower <= 1.0);

    Ok(BoundResult {
        psi: psi_v,
        p_fail_raw,
        p_fail_upper,
        p_decode_lower,
        p_decode_inter_lower,
        notes,
    })
}

/// Grid description for a bound surface: every (M, m, delta0) combination
/// with the remaining parameters taken from `base`.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub base: BoundParams,
    pub second_hop_values: Vec<u32>,
    pub m_values: Vec<u16>,
    pub delta0_values: Vec<f64>,
}

/// Evaluates the full surface in row order M, then m, then delta0.
pub fn sweep_surface(spec: &SweepSpec) -> Result<Vec<(BoundParams, BoundResult)>, BoundError> {
    let mut rows =
        Vec::with_capacity(spec.second_hop_values.len() * spec.m_values.len() * spec.delta0_values.len());
    for &big_m in &spec.second_hop_values {
        for &m in &spec.m_values {
            for &delta0 in &spec.delta0_values {
                let p = BoundParams {
                    m,
                    n_second_hop: big_m,
                    delta0,
                    ..spec.base
                };
                let r = evaluate(&p)?;
                rows.push((p, r));
            }
        }
    }
    Ok(rows)
}

pub fn csv_header() -> &'static str {
    "M,m,n,N,q,delta0,delta1,delta2,psi,p_fail_raw,p_fail_clamped,p_decode_lower,p_decode_inter_lower,domain_note"
}

pub fn csv_row(p: &BoundParams, r: &BoundResult) -> String {
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
        r.psi,
        r.p_fail_raw,
        r.p_fail_upper,
        r.p_decode_lower,
        r.p_decode_inter_lower,
        r.notes_string()
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fig_point(m: u16, big_m: u32, delta0: f64) -> BoundParams {
        BoundParams {
            n: 3,
            m,
            q: 256,
            n_first_hop: 3,
            n_second_hop: big_m,
            delta0,
            delta1: 0.01,
            delta2: 0.01,
        }
    }

    #[test]
    fn psi_examples() {
        assert_eq!(psi(0.0, 0.0, 4).unwrap(), 0.0);
        assert_eq!(psi(1.0, 0.3, 2).unwrap(), 1.0);
        // 0.5^3 + (0.5*0.01)^3
        assert!((psi(0.5, 0.01, 3).unwrap() - 0.125000125).abs() < 1e-12);
        assert!(psi(1.5, 0.0, 3).is_err());
        assert!(psi(0.5, 0.5, 0).is_err());
    }

    #[test]
    fn coeff_probs_examples_and_normalization() {
        assert_eq!(coeff_probs(1.0, 16), (1.0, 0.0));
        assert_eq!(coeff_probs(0.0, 2), (0.0, 1.0));
        let (p0, pnz) = coeff_probs(0.125, 256);
        assert_eq!(p0, 0.125);
        assert!((pnz - 0.875 / 255.0).abs() < 1e-15);
        assert!((pnz - 3.4314e-3).abs() < 1e-7);
        for (psi_v, q) in [(0.3, 7u32), (0.9, 2), (0.01, 65536)] {
            let (p0, pnz) = coeff_probs(psi_v, q);
            assert!((p0 + (q as f64 - 1.0) * pnz - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dead_last_hop_forces_failure() {
        // delta2=1 turns every brace into 1, so the raw sum telescopes to
        // (q^n - 1)/(q - 1).
        let p = BoundParams {
            n: 2,
            m: 3,
            q: 4,
            n_first_hop: 3,
            n_second_hop: 2,
            delta0: 0.2,
            delta1: 0.1,
            delta2: 1.0,
        };
        let r = evaluate(&p).unwrap();
        assert!((r.p_fail_raw - 5.0).abs() < 1e-9, "raw {}", r.p_fail_raw);
        assert_eq!(r.p_fail_upper, 1.0);
        assert_eq!(r.p_decode_lower, 0.0);
        assert!(r.notes.contains(&DomainNote::FailBoundClamped));
    }

    #[test]
    fn high_redundancy_points_clear_099() {
        for delta0 in [0.2, 0.35, 0.5, 0.55] {
            let r = evaluate(&fig_point(4, 4, delta0)).unwrap();
            assert!(r.p_decode_lower >= 0.99, "delta0={delta0}: {}", r.p_decode_lower);
            assert!(r.notes.is_empty(), "delta0={delta0}: {:?}", r.notes);
        }
    }

    #[test]
    fn mid_redundancy_point_lands_near_090() {
        let r = evaluate(&fig_point(5, 2, 0.5)).unwrap();
        assert!((r.p_decode_lower - 0.90).abs() <= 0.05, "got {}", r.p_decode_lower);
    }

    #[test]
    fn low_delta0_points_are_flagged() {
        // psi < 1/q there; the guard must speak up.
        let r = evaluate(&fig_point(4, 4, 0.1)).unwrap();
        assert!(r.psi < 1.0 / 256.0);
        assert!(r.notes.contains(&DomainNote::SourceBaseNegative));
    }

    #[test]
    fn inter_bound_examples() {
        let dead = BoundParams { delta0: 1.0, ..fig_point(4, 4, 1.0) };
        assert_eq!(evaluate(&dead).unwrap().p_decode_inter_lower, 0.0);

        let r = evaluate(&fig_point(4, 4, 0.5)).unwrap();
        assert!(r.p_decode_inter_lower <= 0.125 + 1e-12, "leading factor caps the bound");

        let clean = BoundParams {
            n: 3,
            m: 4,
            q: 256,
            n_first_hop: 3,
            n_second_hop: 4,
            delta0: 0.0,
            delta1: 0.0,
            delta2: 0.0,
        };
        let r = evaluate(&clean).unwrap();
        assert!(r.p_decode_inter_lower >= 0.999, "got {}", r.p_decode_inter_lower);
        // delta1=0 < 1/q sits in the flagged regime by construction.
        assert!(r.notes.contains(&DomainNote::InterBaseNegative));
    }

    #[test]
    fn inter_curve_sits_below_source_curve_at_high_first_tier_loss() {
        for delta0 in [0.3, 0.35, 0.4, 0.45, 0.5, 0.55] {
            let r = evaluate(&fig_point(4, 4, delta0)).unwrap();
            assert!(
                r.p_decode_inter_lower < r.p_decode_lower,
                "delta0={delta0}: inter {} vs source {}",
                r.p_decode_inter_lower,
                r.p_decode_lower
            );
        }
    }

    // Direct evaluation without the log domain, usable while every factor
    // fits in a double. Independent arithmetic path for comparison.
    fn naive_fail_sum(terms: u32, q: u32, p_zero: f64, delta_last: f64, exponent: f64) -> f64 {
        fn binomial(n: u64, k: u64) -> u128 {
            let mut acc: u128 = 1;
            for i in 0..k {
                acc = acc * (n - i) as u128 / (i + 1) as u128;
            }
            acc
        }
        let qf = q as f64;
        let qinv = 1.0 / qf;
        let base = (1.0 - (1.0 - p_zero) / (1.0 - qinv)).abs();
        let mut sum = 0.0;
        for i in 1..=terms {
            let inner = qinv + (1.0 - qinv) * base.powi(i as i32);
            let brace = delta_last + (1.0 - delta_last) * inner;
            sum += binomial(terms as u64, i as u64) as f64
                * (qf - 1.0).powi(i as i32)
                * brace.powf(exponent);
        }
        sum / (qf - 1.0)
    }

    #[test]
    fn log_domain_matches_direct_evaluation_on_small_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        for _ in 0..500 {
            let n = rng.gen_range(1..=5u32);
            let q = [2u32, 4, 8, 16][rng.gen_range(0..4)];
            let p_zero: f64 = rng.gen();
            let delta_last: f64 = rng.gen();
            let exponent = rng.gen_range(1.0..12.0);
            let (ln_val, _) = ln_fail_sum(n, q, p_zero, delta_last, exponent);
            let direct = naive_fail_sum(n, q, p_zero, delta_last, exponent);
            let val = ln_val.exp();
            let rel = (val - direct).abs() / direct.max(f64::MIN_POSITIVE);
            assert!(rel <= 1e-9, "n={n} q={q} p_zero={p_zero}: {val} vs {direct}");
        }
    }

    #[test]
    fn full_evaluation_matches_direct_formula() {
        let p = BoundParams {
            n: 4,
            m: 6,
            q: 16,
            n_first_hop: 3,
            n_second_hop: 2,
            delta0: 0.5,
            delta1: 0.05,
            delta2: 0.05,
        };
        let r = evaluate(&p).unwrap();
        let psi_v = psi(0.5, 0.05, 3).unwrap();
        let direct = naive_fail_sum(4, 16, psi_v, 0.05, 2.0 * 6.0 / 3.0);
        assert!((r.p_fail_raw - direct).abs() / direct <= 1e-9);
        // The inter sum blows past 1 here (q=16 with delta1 < 1/q), so the
        // decode bound clamps at zero.
        let direct_inter = naive_fail_sum(3, 16, 0.05, 0.05, 2.0);
        let expect_inter = ((1.0 - 0.5f64).powi(3) * (1.0 - direct_inter)).max(0.0);
        assert!((r.p_decode_inter_lower - expect_inter).abs() <= 1e-12);
        assert!(r.notes.contains(&DomainNote::InterBoundClamped));
    }

    #[test]
    fn failure_bound_is_monotone_where_the_model_is_clean() {
        // Scan only the regime where psi >= 1/q; the guarded region is
        // flagged instead of trusted.
        let deltas: Vec<f64> = (2..=8).map(|i| i as f64 / 10.0).collect();
        let mut prev = None;
        for &d0 in &deltas {
            let r = evaluate(&fig_point(5, 2, d0)).unwrap();
            assert!(!r.notes.contains(&DomainNote::SourceBaseNegative));
            if let Some(p) = prev {
                assert!(r.p_fail_raw >= p - 1e-12, "failure must not drop as delta0 grows");
            }
            prev = Some(r.p_fail_raw);
        }
        // More redundancy and more relays can only help.
        let base = fig_point(5, 2, 0.4);
        let more_m = BoundParams { m: 6, ..base };
        let more_relays = BoundParams { n_second_hop: 3, ..base };
        let r0 = evaluate(&base).unwrap();
        assert!(evaluate(&more_m).unwrap().p_fail_raw <= r0.p_fail_raw + 1e-12);
        assert!(evaluate(&more_relays).unwrap().p_fail_raw <= r0.p_fail_raw + 1e-12);
        // Worse later tiers can only hurt.
        for (d1, d2) in [(0.05, 0.01), (0.01, 0.05)] {
            let worse = BoundParams { delta1: d1, delta2: d2, ..base };
            assert!(evaluate(&worse).unwrap().p_fail_raw >= r0.p_fail_raw - 1e-12);
        }
    }

    #[test]
    fn union_bound_dominates_its_own_sampling_model() {
        // Monte Carlo of the generative model the bound describes: the
        // sink sees M*m/N packets, each erased with prob delta2, each
        // surviving packet carrying n coefficients that are zero with
        // prob psi and uniform nonzero otherwise. Failure frequency must
        // stay below the closed form.
        let p = BoundParams {
            n: 3,
            m: 6,
            q: 16,
            n_first_hop: 3,
            n_second_hop: 2,
            delta0: 0.5,
            delta1: 0.05,
            delta2: 0.05,
        };
        let r = evaluate(&p).unwrap();
        // Only the source bound is under test; it must be in its clean
        // regime (inter flags at this q are expected and irrelevant).
        assert!(!r.notes.contains(&DomainNote::SourceBaseNegative), "{:?}", r.notes);
        assert!(!r.notes.contains(&DomainNote::FailBoundClamped), "{:?}", r.notes);
        let (p_zero, _) = coeff_probs(r.psi, p.q);
        let receives = (p.n_second_hop as usize * p.m as usize) / p.n_first_hop as usize;

        let field = crate::gf::FieldSpec::new(4).unwrap();
        let params = crate::codec::CodingParams::new(p.n, p.m, 4, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let trials = 20_000;
        let mut fails = 0u32;
        for _ in 0..trials {
            let mut dec = crate::codec::DecoderState::new(0, &params);
            for _ in 0..receives {
                if rng.gen::<f64>() < p.delta2 {
                    continue;
                }
                let coeffs: Vec<u16> = (0..p.n as usize)
                    .map(|_| if rng.gen::<f64>() < p_zero { 0 } else { field.random_nonzero(&mut rng) })
                    .collect();
                let pkt = crate::codec::CodedPacket {
                    gen_id: 0,
                    coeffs,
                    payload: vec![0u8; 2],
                };
                dec.add(&pkt).unwrap();
            }
            if !dec.is_complete() {
                fails += 1;
            }
        }
        let mc = fails as f64 / trials as f64;
        let sigma = (mc * (1.0 - mc) / trials as f64).sqrt();
        assert!(
            mc - 3.0 * sigma <= r.p_fail_raw,
            "model failure rate {mc} exceeds the bound {}",
            r.p_fail_raw
        );
    }

    #[test]
    fn sweep_rows_come_out_in_grid_order_and_match_point_evaluation() {
        let spec = SweepSpec {
            base: fig_point(3, 2, 0.0),
            second_hop_values: vec![2, 4],
            m_values: vec![3, 5],
            delta0_values: vec![0.2, 0.5],
        };
        let rows = sweep_surface(&spec).unwrap();
        assert_eq!(rows.len(), 8);
        assert_eq!(
            rows.iter().map(|(p, _)| (p.n_second_hop, p.m, p.delta0)).collect::<Vec<_>>(),
            vec![
                (2, 3, 0.2),
                (2, 3, 0.5),
                (2, 5, 0.2),
                (2, 5, 0.5),
                (4, 3, 0.2),
                (4, 3, 0.5),
                (4, 5, 0.2),
                (4, 5, 0.5),
            ]
        );
        let single = evaluate(&rows[3].0).unwrap();
        assert_eq!(rows[3].1, single);
    }

    #[test]
    fn csv_row_shape() {
        let p = fig_point(5, 2, 0.5);
        let r = evaluate(&p).unwrap();
        assert_eq!(csv_header().split(',').count(), 14);
        let row = csv_row(&p, &r);
        assert_eq!(row.split(',').count(), 14);
        assert!(row.starts_with("2,5,3,3,256,0.5,0.01,0.01,"));
    }

    #[test]
    fn invalid_params_are_rejected() {
        let good = fig_point(5, 2, 0.5);
        assert!(evaluate(&BoundParams { n: 0, ..good }).is_err());
        assert!(evaluate(&BoundParams { m: 2, ..good }).is_err());
        assert!(evaluate(&BoundParams { q: 1, ..good }).is_err());
        assert!(evaluate(&BoundParams { n_first_hop: 0, ..good }).is_err());
        assert!(evaluate(&BoundParams { delta1: -0.2, ..good }).is_err());
    }
}
