use rand::Rng;

use crate::analytic::purification_bounds;
use crate::params::Probability;
use crate::protocol::bernoulli;
use crate::{Error, Result};

/// Pairs consumed by one Steane-code purification.
pub const PURIFICATION_GROUP: usize = 7;

/// Scalar model of an entangled pair held on one link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkPair {
    pub link: usize,
    pub error: Probability,
}

/// One [[7,1,3]] decoding attempt on seven raw pairs of the same link.
///
/// Succeeds with probability `(1 - eps_in)^7` and returns a pair with the
/// reduced error; on failure all seven are lost.
pub fn purify<R: Rng + ?Sized>(pairs: &[LinkPair], epsilon_in: Probability, rng: &mut R) -> Result<Option<LinkPair>> {
    if pairs.len() != PURIFICATION_GROUP {
        return Err(Error::invalid(format!(
            "purification needs exactly {PURIFICATION_GROUP} pairs, got {}",
            pairs.len()
        )));
    }
    let link = pairs[0].link;
    if pairs.iter().any(|p| p.link != link) {
        return Err(Error::invalid("purification pairs must come from the same link"));
    }
    let bounds = purification_bounds(epsilon_in, 1);
    Ok(bernoulli(rng, bounds.p_success.value()).then_some(LinkPair { link, error: bounds.epsilon_out }))
}
