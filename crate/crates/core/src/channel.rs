//! Packet erasure channels.
//!
//! Every link answers one question per transmission: did the packet get
//! through. [`BernoulliErasure`] drops packets independently;
//! [`GilbertElliot`] is a two-state Markov chain whose bad state produces
//! loss bursts. [`ChannelConfig`] is the value-type description used in
//! simulation configs; [`ChannelConfig::build`] turns it into a stateful
//! link.

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("infeasible channel parameters: {0}")]
    Infeasible(String),
}

/// Independent loss with probability `delta` per transmission.
#[derive(Debug, Clone)]
pub struct BernoulliErasure {
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BurstState {
    Good,
    Bad,
}

/// Two-state Markov erasure channel. The chain starts in its stationary
/// distribution (the state is drawn on the first transmission), so the
/// marginal loss probability equals [`GilbertElliot::steady_state_loss`]
/// from the very first packet.
#[derive(Debug, Clone)]
pub struct GilbertElliot {
    pub p_good_to_bad: f64,
    pub p_bad_to_good: f64,
    pub loss_good: f64,
    pub loss_bad: f64,
    state: Option<BurstState>,
}

impl GilbertElliot {
    pub fn new(
        p_good_to_bad: f64,
        p_bad_to_good: f64,
        loss_good: f64,
        loss_bad: f64,
    ) -> Result<GilbertElliot, ChannelError> {
        for (name, v) in [
            ("p_good_to_bad", p_good_to_bad),
            ("p_bad_to_good", p_bad_to_good),
            ("loss_good", loss_good),
            ("loss_bad", loss_bad),
        ] {
            if !(0.0..=1.0).contains(&v) || v.is_nan() {
                return Err(ChannelError::Infeasible(format!("{name}={v} outside [0, 1]")));
            }
        }
        Ok(GilbertElliot { p_good_to_bad, p_bad_to_good, loss_good, loss_bad, state: None })
    }

    /// Picks transition probabilities so the stationary loss rate is
    /// `target_loss` and bad periods last `mean_burst` transmissions on
    /// average, with lossless good states and fully lossy bad states.
    pub fn from_target_rate(target_loss: f64, mean_burst: f64) -> Result<GilbertElliot, ChannelError> {
        if !(0.0..1.0).contains(&target_loss) || target_loss.is_nan() {
            return Err(ChannelError::Infeasible(format!(
                "target loss {target_loss} must lie in [0, 1)"
            )));
        }
        if !(mean_burst >= 1.0) {
            return Err(ChannelError::Infeasible(format!(
                "mean burst length {mean_burst} must be at least 1"
            )));
        }
        let p_bad_to_good = 1.0 / mean_burst;
        let p_good_to_bad = p_bad_to_good * target_loss / (1.0 - target_loss);
        if p_good_to_bad > 1.0 {
            return Err(ChannelError::Infeasible(format!(
                "target loss {target_loss} with burst length {mean_burst} needs \
                 p_good_to_bad={p_good_to_bad:.4} > 1; the rate cap is {:.4}",
                mean_burst / (mean_burst + 1.0)
            )));
        }
        GilbertElliot::new(p_good_to_bad, p_bad_to_good, 0.0, 1.0)
    }

    /// Long-run fraction of time spent in the bad state.
    pub fn stationary_bad(&self) -> f64 {
        let sum = self.p_good_to_bad + self.p_bad_to_good;
        if sum == 0.0 {
            // Absorbing in whichever state it starts; report the unbiased
            // coin used for that start.
            0.5
        } else {
            self.p_good_to_bad / sum
        }
    }

    /// Long-run loss rate.
    pub fn steady_state_loss(&self) -> f64 {
        let pb = self.stationary_bad();
        (1.0 - pb) * self.loss_good + pb * self.loss_bad
    }

    fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> BurstState {
        let next = match self.state {
            None => {
                if rng.gen::<f64>() < self.stationary_bad() {
                    BurstState::Bad
                } else {
                    BurstState::Good
                }
            }
            Some(BurstState::Good) => {
                if rng.gen::<f64>() < self.p_good_to_bad {
                    BurstState::Bad
                } else {
                    BurstState::Good
                }
            }
            Some(BurstState::Bad) => {
                if rng.gen::<f64>() < self.p_bad_to_good {
                    BurstState::Good
                } else {
                    BurstState::Bad
                }
            }
        };
        self.state = Some(next);
        next
    }
}

/// A stateful link of either kind.
#[derive(Debug, Clone)]
pub enum ErasureLink {
    Bernoulli(BernoulliErasure),
    GilbertElliot(GilbertElliot),
}

impl ErasureLink {
    /// One transmission. Returns true when the packet is delivered. Every
    /// call consumes the same number of RNG draws for its kind, so delivery
    /// outcomes never desynchronize a shared stream.
    pub fn transmit<R: Rng + ?Sized>(&mut self, rng: &mut R) -> bool {
        match self {
            ErasureLink::Bernoulli(b) => rng.gen::<f64>() >= b.delta,
            ErasureLink::GilbertElliot(ge) => {
                // When both states lose alike the chain is unobservable;
                // skipping it makes this link draw-for-draw identical to a
                // Bernoulli link at the same rate, not just equal in
                // distribution.
                if ge.loss_good == ge.loss_bad {
                    return rng.gen::<f64>() >= ge.loss_good;
                }
                let loss = match ge.step(rng) {
                    BurstState::Good => ge.loss_good,
                    BurstState::Bad => ge.loss_bad,
                };
                rng.gen::<f64>() >= loss
            }
        }
    }

    /// Expected long-run loss rate of this link.
    pub fn loss_rate(&self) -> f64 {
        match self {
            ErasureLink::Bernoulli(b) => b.delta,
            ErasureLink::GilbertElliot(ge) => ge.steady_state_loss(),
        }
    }
}

/// Value-type channel description for configs and sweeps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelConfig {
    Bernoulli { delta: f64 },
    /// Burst channel hitting `target_loss` on average with bad periods of
    /// `mean_burst` transmissions.
    GilbertElliot { target_loss: f64, mean_burst: f64 },
}

impl ChannelConfig {
    pub fn build(&self) -> Result<ErasureLink, ChannelError> {
        match *self {
            ChannelConfig::Bernoulli { delta } => {
                if !(0.0..=1.0).contains(&delta) || delta.is_nan() {
                    return Err(ChannelError::Infeasible(format!(
                        "loss probability {delta} outside [0, 1]"
                    )));
                }
                Ok(ErasureLink::Bernoulli(BernoulliErasure { delta }))
            }
            ChannelConfig::GilbertElliot { target_loss, mean_burst } => {
                Ok(ErasureLink::GilbertElliot(GilbertElliot::from_target_rate(
                    target_loss,
                    mean_burst,
                )?))
            }
        }
    }

    /// The loss rate this config aims for.
    pub fn loss_rate(&self) -> f64 {
        match *self {
            ChannelConfig::Bernoulli { delta } => delta,
            ChannelConfig::GilbertElliot { target_loss, .. } => target_loss,
        }
    }

    /// Same channel kind, different loss rate. Sweeps use this to move a
    /// whole tier along an erasure axis.
    pub fn with_loss(&self, delta: f64) -> ChannelConfig {
        match *self {
            ChannelConfig::Bernoulli { .. } => ChannelConfig::Bernoulli { delta },
            ChannelConfig::GilbertElliot { mean_burst, .. } => {
                ChannelConfig::GilbertElliot { target_loss: delta, mean_burst }
            }
        }
    }
}
