use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::vocab::TokenId;

/// Below this temperature sampling is greedy (argmax, lowest id on ties).
pub const GREEDY_TEMPERATURE: f64 = 1e-6;

/// Draws a token from `logprobs` scaled by `1/temperature`.
///
/// Exactly one uniform is consumed per call, including the greedy case, so rng
/// streams stay aligned across temperatures.
pub fn sample_next<R: RngCore + ?Sized>(logprobs: &[f64], temperature: f64, rng: &mut R) -> Result<TokenId> {
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(Error::InvalidArgument(format!("temperature must be positive, got {temperature}")));
    }
    if logprobs.is_empty() {
        return Err(Error::InvalidArgument("empty distribution".into()));
    }
    let u: f64 = rng.gen();
    let max = logprobs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::InvalidArgument("distribution has no finite mass".into()));
    }
    let argmax = logprobs.iter().position(|&l| l == max).expect("max is present") as TokenId;
    if temperature < GREEDY_TEMPERATURE {
        return Ok(argmax);
    }
    let weights: Vec<f64> = logprobs.iter().map(|&l| ((l - max) / temperature).exp()).collect();
    let total: f64 = weights.iter().sum();
    let target = u * total;
    let mut cum = 0.0;
    for (i, w) in weights.iter().enumerate() {
        cum += w;
        if cum > target && *w > 0.0 {
            return Ok(i as TokenId);
        }
    }
    // Rounding left target at the very top of the mass; take the last supported token.
    Ok(weights.iter().rposition(|&w| w > 0.0).unwrap_or(argmax as usize) as TokenId)
}
