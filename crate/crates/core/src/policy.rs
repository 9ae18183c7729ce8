//! Next-token policies seen by the decoders.
//!
//! The decoders only need incremental next-token distributions, so they are
//! generic over [`Policy`]; the transformer implements it through its activation
//! cache, and [`crate::stub`] provides scripted policies for tests.

use crate::error::Result;
use crate::model::{Activations, Parameters};
use crate::vocab::TokenId;

pub trait PolicySession {
    /// Appends `token` and returns the log-distribution over the next token.
    fn push(&mut self, token: TokenId) -> Result<&[f64]>;

    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub trait Policy: Sync {
    type Session<'a>: PolicySession
    where
        Self: 'a;

    fn vocab_size(&self) -> usize;

    fn context_length(&self) -> usize;

    fn session(&self) -> Self::Session<'_>;
}

impl PolicySession for Activations<'_> {
    fn push(&mut self, token: TokenId) -> Result<&[f64]> {
        Activations::push(self, token)
    }

    fn len(&self) -> usize {
        Activations::len(self)
    }
}

impl Policy for Parameters {
    type Session<'a> = Activations<'a>;

    fn vocab_size(&self) -> usize {
        self.config().vocab_size
    }

    fn context_length(&self) -> usize {
        self.config().context_length
    }

    fn session(&self) -> Activations<'_> {
        Activations::new(self)
    }
}
