//! Random linear coding of fragment generations.
//!
//! A file is segmented into generations of `n` fragments. The source emits
//! `m >= n` coded packets per generation, each a random linear combination
//! of that generation's fragments over GF(2^f). Relays can recombine coded
//! packets without decoding. A receiver feeds packets into a
//! [`DecoderState`], which keeps an incrementally reduced echelon system
//! and recovers the fragments once its rank reaches `n`.

pub mod wire;

use crate::gf::{FieldError, FieldSpec, Symbol};
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("invalid coding parameters: {0}")]
    InvalidParams(String),
    #[error("empty input")]
    EmptyInput,
    #[error("input spans {0} generations, the packet header caps generation ids at 65535")]
    TooManyGenerations(u64),
    #[error("packet belongs to generation {got}, decoder holds generation {want}")]
    GenerationMismatch { got: u16, want: u16 },
    #[error("packet shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("not decodable: rank {rank} of {needed}")]
    NotDecodable { rank: usize, needed: usize },
    #[error("incomplete file: missing generation {0}")]
    MissingGeneration(u16),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Coding configuration shared by source, relays, and receivers.
#[derive(Debug, Clone)]
pub struct CodingParams {
    pub n: u16,
    pub m: u16,
    pub field: FieldSpec,
    pub fragment_size: usize,
}

impl CodingParams {
    pub fn new(n: u16, m: u16, f: u8, fragment_size: usize) -> Result<CodingParams, CodecError> {
        let field = FieldSpec::new(f)?;
        if n == 0 {
            return Err(CodecError::InvalidParams("n must be at least 1".into()));
        }
        if m < n {
            return Err(CodecError::InvalidParams(format!("m={m} must be at least n={n}")));
        }
        if fragment_size == 0 {
            return Err(CodecError::InvalidParams("fragment_size must be at least 1".into()));
        }
        if !field.byte_aligned() {
            return Err(CodecError::InvalidParams(format!(
                "payload arithmetic needs f in {{1,2,4,8,16}}, got {f}"
            )));
        }
        if f == 16 && fragment_size % 2 != 0 {
            return Err(CodecError::InvalidParams(
                "f=16 needs an even fragment_size (two bytes per symbol)".into(),
            ));
        }
        Ok(CodingParams { n, m, field, fragment_size })
    }

    /// Bytes of source data one generation carries before padding.
    pub fn generation_payload(&self) -> usize {
        self.n as usize * self.fragment_size
    }
}

/// One generation of source fragments, each exactly `fragment_size` bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generation {
    pub gen_id: u16,
    pub fragments: Vec<Vec<u8>>,
}

/// A coded packet: generation tag, coefficient vector, combined payload.
/// Coefficients are kept unpacked in memory; the wire form packs them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodedPacket {
    pub gen_id: u16,
    pub coeffs: Vec<Symbol>,
    pub payload: Vec<u8>,
}

/// Segmentation result: generations plus the exact pre-padding length.
#[derive(Debug, Clone)]
pub struct SegmentedFile {
    pub generations: Vec<Generation>,
    pub original_len: u64,
}

/// Splits `data` into generations of `n` fragments, zero-filling the tail
/// of the last fragment. The original length is recorded so reassembly can
/// strip the padding again.
pub fn segment(data: &[u8], params: &CodingParams) -> Result<SegmentedFile, CodecError> {
    if data.is_empty() {
        return Err(CodecError::EmptyInput);
    }
    let per_gen = params.generation_payload();
    let gen_count = (data.len() as u64 + per_gen as u64 - 1) / per_gen as u64;
    if gen_count > u16::MAX as u64 + 1 {
        return Err(CodecError::TooManyGenerations(gen_count));
    }
    let mut generations = Vec::with_capacity(gen_count as usize);
    for g in 0..gen_count {
        let base = g as usize * per_gen;
        let mut fragments = Vec::with_capacity(params.n as usize);
        for i in 0..params.n as usize {
            let start = base + i * params.fragment_size;
            let mut frag = vec![0u8; params.fragment_size];
            if start < data.len() {
                let end = (start + params.fragment_size).min(data.len());
                frag[..end - start].copy_from_slice(&data[start..end]);
            }
            fragments.push(frag);
        }
        generations.push(Generation { gen_id: g as u16, fragments });
    }
    Ok(SegmentedFile { generations, original_len: data.len() as u64 })
}

/// Rebuilds the byte stream from fully decoded generations. `decoded` pairs
/// each generation id with its fragments; every generation implied by
/// `original_len` must be present exactly once.
pub fn reassemble(decoded: &[(u16, Vec<Vec<u8>>)], original_len: u64) -> Result<Vec<u8>, CodecError> {
    let first = decoded.first().ok_or(CodecError::EmptyInput)?;
    let n = first.1.len();
    if n == 0 || first.1[0].is_empty() {
        return Err(CodecError::ShapeMismatch("generations carry no fragment data".into()));
    }
    let fragment_size = first.1[0].len();
    let per_gen = (n * fragment_size) as u64;
    if original_len == 0 {
        return Err(CodecError::EmptyInput);
    }
    let expected = (original_len + per_gen - 1) / per_gen;
    let mut slots: Vec<Option<&Vec<Vec<u8>>>> = vec![None; expected as usize];
    for (gen_id, fragments) in decoded {
        if fragments.len() != n || fragments.iter().any(|f| f.len() != fragment_size) {
            return Err(CodecError::ShapeMismatch(format!(
                "generation {gen_id} does not match the shape of the first generation"
            )));
        }
        let idx = *gen_id as u64;
        if idx >= expected {
            return Err(CodecError::ShapeMismatch(format!(
                "generation {gen_id} is out of range for a {expected}-generation file"
            )));
        }
        slots[idx as usize] = Some(fragments);
    }
    let mut out = Vec::with_capacity((expected * per_gen) as usize);
    for (idx, slot) in slots.iter().enumerate() {
        let fragments = slot.ok_or(CodecError::MissingGeneration(idx as u16))?;
        for frag in fragments {
            out.extend_from_slice(frag);
        }
    }
    out.truncate(original_len as usize);
    Ok(out)
}

/// Draws a coding vector with every coefficient nonzero. Over GF(2) that
/// rule would pin every coefficient to 1 and collapse all combinations
/// into one packet, so there the vector is drawn from uniform bits with
/// the all-zero draw rejected instead.
pub fn sample_coeff_vector<R: Rng + ?Sized>(field: &FieldSpec, len: usize, rng: &mut R) -> Vec<Symbol> {
    debug_assert!(len > 0);
    if field.order() == 2 {
        loop {
            let v: Vec<Symbol> = (0..len).map(|_| field.random(rng)).collect();
            if v.iter().any(|&s| s != 0) {
                return v;
            }
        }
    } else {
        (0..len).map(|_| field.random_nonzero(rng)).collect()
    }
}

/// Source encoding: emits `m` coded packets for one generation.
pub fn encode_source<R: Rng + ?Sized>(
    gen: &Generation,
    params: &CodingParams,
    rng: &mut R,
) -> Result<Vec<CodedPacket>, CodecError> {
    if gen.fragments.len() != params.n as usize {
        return Err(CodecError::ShapeMismatch(format!(
            "generation {} has {} fragments, params say n={}",
            gen.gen_id,
            gen.fragments.len(),
            params.n
        )));
    }
    if gen.fragments.iter().any(|f| f.len() != params.fragment_size) {
        return Err(CodecError::ShapeMismatch("fragment length differs from fragment_size".into()));
    }
    let mut out = Vec::with_capacity(params.m as usize);
    for _ in 0..params.m {
        let coeffs = sample_coeff_vector(&params.field, params.n as usize, rng);
        let mut payload = vec![0u8; params.fragment_size];
        for (c, frag) in coeffs.iter().zip(&gen.fragments) {
            params.field.addmul_bytes(&mut payload, frag, *c);
        }
        out.push(CodedPacket { gen_id: gen.gen_id, coeffs, payload });
    }
    Ok(out)
}

/// Relay recombination: each output mixes every input with a fresh random
/// coding vector, applied identically to coefficients and payload. Outputs
/// stay inside the row space of the inputs, so recombination never
/// manufactures information.
pub fn recode<R: Rng + ?Sized>(
    inputs: &[CodedPacket],
    count: usize,
    field: &FieldSpec,
    rng: &mut R,
) -> Result<Vec<CodedPacket>, CodecError> {
    let first = inputs.first().ok_or(CodecError::EmptyInput)?;
    let n = first.coeffs.len();
    let payload_len = first.payload.len();
    for p in inputs {
        if p.gen_id != first.gen_id {
            return Err(CodecError::GenerationMismatch { got: p.gen_id, want: first.gen_id });
        }
        if p.coeffs.len() != n || p.payload.len() != payload_len {
            return Err(CodecError::ShapeMismatch("recode inputs differ in shape".into()));
        }
    }
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mix = sample_coeff_vector(field, inputs.len(), rng);
        let mut coeffs = vec![0 as Symbol; n];
        let mut payload = vec![0u8; payload_len];
        for (w, p) in mix.iter().zip(inputs) {
            if *w == 0 {
                continue;
            }
            for (acc, c) in coeffs.iter_mut().zip(&p.coeffs) {
                *acc ^= field.mul(*w, *c);
            }
            field.addmul_bytes(&mut payload, &p.payload, *w);
        }
        out.push(CodedPacket { gen_id: first.gen_id, coeffs, payload });
    }
    Ok(out)
}

struct EchelonRow {
    coeffs: Vec<Symbol>,
    payload: Vec<u8>,
}

/// Incremental Gaussian elimination for one generation.
///
/// Rows are stored fully reduced: each row is normalized to a leading 1 at
/// its pivot column and every other stored row holds a zero there. Rank
/// equals the number of stored rows and never decreases. Once rank reaches
/// `n` the system is the identity and the payloads are the fragments.
pub struct DecoderState {
    gen_id: u16,
    n: usize,
    field: FieldSpec,
    payload_len: usize,
    rows: Vec<Option<EchelonRow>>,
    rank: usize,
}

impl DecoderState {
    pub fn new(gen_id: u16, params: &CodingParams) -> DecoderState {
        DecoderState {
            gen_id,
            n: params.n as usize,
            field: params.field.clone(),
            payload_len: params.fragment_size,
            rows: (0..params.n as usize).map(|_| None).collect(),
            rank: 0,
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn is_complete(&self) -> bool {
        self.rank == self.n
    }

    pub fn gen_id(&self) -> u16 {
        self.gen_id
    }

    /// Folds one packet into the system. Returns true when the packet was
    /// innovative (it raised the rank), false when it reduced to zero.
    pub fn add(&mut self, pkt: &CodedPacket) -> Result<bool, CodecError> {
        if pkt.gen_id != self.gen_id {
            return Err(CodecError::GenerationMismatch { got: pkt.gen_id, want: self.gen_id });
        }
        if pkt.coeffs.len() != self.n {
            return Err(CodecError::ShapeMismatch(format!(
                "packet carries {} coefficients, decoder expects {}",
                pkt.coeffs.len(),
                self.n
            )));
        }
        if pkt.payload.len() != self.payload_len {
            return Err(CodecError::ShapeMismatch(format!(
                "packet payload is {} bytes, decoder expects {}",
                pkt.payload.len(),
                self.payload_len
            )));
        }
        if self.rank == self.n {
            // System already solved; nothing new can be innovative.
            return Ok(false);
        }
        let mut coeffs = pkt.coeffs.clone();
        let mut payload = pkt.payload.clone();
        // Reduce against every stored pivot. Stored rows are zero left of
        // their pivot, so eliminating at `col` never disturbs columns
        // already cleared.
        for col in 0..self.n {
            let lead = coeffs[col];
            if lead == 0 {
                continue;
            }
            if let Some(row) = &self.rows[col] {
                for (acc, c) in coeffs[col..].iter_mut().zip(&row.coeffs[col..]) {
                    *acc ^= self.field.mul(lead, *c);
                }
                self.field.addmul_bytes(&mut payload, &row.payload, lead);
            }
        }
        // Whatever survives has support only on pivot-free columns; its
        // first nonzero column is the new pivot.
        let Some(pivot) = (0..self.n).find(|&c| coeffs[c] != 0) else {
            return Ok(false);
        };
        let inv = self.field.inv(coeffs[pivot])?;
        for c in coeffs[pivot..].iter_mut() {
            *c = self.field.mul(*c, inv);
        }
        self.field.scale_bytes(&mut payload, inv);
        // Clear the new pivot's column from earlier rows; rows with a
        // later pivot are already zero there.
        for prev in 0..pivot {
            let Some(row) = self.rows[prev].as_mut() else { continue };
            let w = row.coeffs[pivot];
            if w == 0 {
                continue;
            }
            for (acc, c) in row.coeffs[pivot..].iter_mut().zip(&coeffs[pivot..]) {
                *acc = *acc ^ self.field.mul(w, *c);
            }
            let mut updated = row.payload.clone();
            self.field.addmul_bytes(&mut updated, &payload, w);
            row.payload = updated;
        }
        self.rows[pivot] = Some(EchelonRow { coeffs, payload });
        self.rank += 1;
        Ok(true)
    }

    /// Recovers the fragments. Requires full rank; the rank in the error
    /// tells the caller how far the system got.
    pub fn solve(&self) -> Result<Vec<Vec<u8>>, CodecError> {
        if self.rank < self.n {
            return Err(CodecError::NotDecodable { rank: self.rank, needed: self.n });
        }
        let mut out = Vec::with_capacity(self.n);
        for (col, slot) in self.rows.iter().enumerate() {
            let row = slot.as_ref().expect("full rank implies every pivot is present");
            debug_assert!(row.coeffs.iter().enumerate().all(|(i, &c)| c == u16::from(i == col)));
            out.push(row.payload.clone());
        }
        Ok(out)
    }
}
