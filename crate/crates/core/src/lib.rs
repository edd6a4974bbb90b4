//! Random linear network coding over erasure networks: finite-field
//! arithmetic, a generation-based codec with relay recoding, erasure
//! channel models, a two-hop relay multicast simulator, closed-form
//! decoding bounds, and a bound-versus-simulation crosscheck.
//!
//! The crate is deterministic end to end: every random consumer draws
//! from a ChaCha substream derived from a master seed, so identical
//! configurations reproduce identical results bit for bit.

pub mod bounds;
pub mod channel;
pub mod codec;
pub mod crosscheck;
pub mod gf;
pub mod seed;
pub mod simnet;

pub use channel::{ChannelConfig, ErasureLink};
pub use codec::{CodedPacket, CodingParams, DecoderState, Generation};
pub use gf::FieldSpec;
pub use simnet::{RelayStrategy, SimConfig, SimResult, Topology};
