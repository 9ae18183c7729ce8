//! Scripted policies for exercising decoders, rollouts and evaluation without a
//! trained model.
//!
//! A [`StubPolicy`] maps the full token history (prompt template included) to a
//! next-token distribution.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::policy::{Policy, PolicySession};
use crate::taskgen::parse_expression;
use crate::vocab::{self, TokenId};

type Rule = dyn Fn(&[TokenId]) -> Vec<f64> + Send + Sync;

#[derive(Clone)]
pub struct StubPolicy {
    vocab_size: usize,
    context_length: usize,
    rule: Arc<Rule>,
}

impl std::fmt::Debug for StubPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StubPolicy")
            .field("vocab_size", &self.vocab_size)
            .field("context_length", &self.context_length)
            .finish_non_exhaustive()
    }
}

pub struct StubSession<'a> {
    policy: &'a StubPolicy,
    history: Vec<TokenId>,
    row: Vec<f64>,
}

impl PolicySession for StubSession<'_> {
    fn push(&mut self, token: TokenId) -> Result<&[f64]> {
        if self.history.len() >= self.policy.context_length {
            return Err(Error::ContextOverflow {
                len: self.history.len() + 1,
                max: self.policy.context_length,
            });
        }
        self.history.push(token);
        self.row = (self.policy.rule)(&self.history);
        debug_assert_eq!(self.row.len(), self.policy.vocab_size);
        Ok(&self.row)
    }

    fn len(&self) -> usize {
        self.history.len()
    }
}

impl Policy for StubPolicy {
    type Session<'a> = StubSession<'a>;

    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn context_length(&self) -> usize {
        self.context_length
    }

    fn session(&self) -> StubSession<'_> {
        StubSession { policy: self, history: Vec::new(), row: Vec::new() }
    }
}

pub fn one_hot(token: TokenId) -> Vec<f64> {
    let mut row = vec![f64::NEG_INFINITY; vocab::VOCAB_SIZE];
    row[token as usize] = 0.0;
    row
}

/// Log-distribution from unnormalized non-negative weights.
pub fn from_weights(weights: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    weights.iter().map(|w| (w / total).ln()).collect()
}

/// Where the history stands relative to the `<think>` template.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Prompt,
    /// Number of thinking tokens generated so far.
    Thinking(usize),
    /// Number of solution tokens generated so far.
    Solution(usize),
}

pub fn phase(history: &[TokenId]) -> Phase {
    let Some(open) = history.iter().position(|&t| t == vocab::THINK_OPEN) else {
        return Phase::Prompt;
    };
    match history[open..].iter().position(|&t| t == vocab::THINK_CLOSE) {
        None => Phase::Thinking(history.len() - open - 1),
        Some(close) => Phase::Solution(history.len() - open - close - 1),
    }
}

impl StubPolicy {
    pub fn new(
        context_length: usize,
        rule: impl Fn(&[TokenId]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        StubPolicy { vocab_size: vocab::VOCAB_SIZE, context_length, rule: Arc::new(rule) }
    }

    /// Thinks with digit tokens forever and never ends a solution.
    pub fn never_terminating(context_length: usize) -> Self {
        StubPolicy::new(context_length, |_| one_hot(vocab::digit(1)))
    }

    /// Emits `</think>` as its `n`-th thinking token, then `ANS 0 <eos>`.
    pub fn closes_thinking_at(context_length: usize, n: usize) -> Self {
        StubPolicy::new(context_length, move |h| match phase(h) {
            Phase::Thinking(k) if k + 1 >= n => one_hot(vocab::THINK_CLOSE),
            Phase::Thinking(_) | Phase::Prompt => one_hot(vocab::digit(1)),
            Phase::Solution(0) => one_hot(vocab::ANSWER),
            Phase::Solution(1) => one_hot(vocab::digit(0)),
            Phase::Solution(_) => one_hot(vocab::EOS),
        })
    }

    /// Thinks for `think_len` tokens, then answers correctly with probability
    /// `p_correct` (otherwise with a wrong residue). The answer is recomputed from
    /// the prompt modulo `modulus`.
    pub fn answering(context_length: usize, modulus: u64, think_len: usize, p_correct: f64) -> Self {
        StubPolicy::new(context_length, move |h| {
            let open = h.iter().position(|&t| t == vocab::THINK_OPEN);
            match phase(h) {
                Phase::Prompt => one_hot(vocab::digit(0)),
                Phase::Thinking(k) if k >= think_len => one_hot(vocab::THINK_CLOSE),
                Phase::Thinking(_) => one_hot(vocab::digit(2)),
                Phase::Solution(0) => one_hot(vocab::ANSWER),
                Phase::Solution(1) => {
                    let prompt = &h[..open.expect("solution follows <think>")];
                    let answer = evaluate_prompt(prompt, modulus).unwrap_or(0);
                    let wrong = (answer + 1) % modulus;
                    // residues are single digits for the moduli stubs are used with
                    let mut w = vec![0.0; vocab::VOCAB_SIZE];
                    w[vocab::digit((answer % 10) as u32) as usize] += p_correct;
                    w[vocab::digit((wrong % 10) as u32) as usize] += 1.0 - p_correct;
                    from_weights(&w)
                }
                Phase::Solution(_) => one_hot(vocab::EOS),
            }
        })
    }
}

/// Left-to-right modular value of a rendered prompt (`... ?`).
pub fn evaluate_prompt(prompt: &[TokenId], modulus: u64) -> Option<u64> {
    let (operands, ops) = parse_expression(prompt)?;
    let mut acc = operands[0] % modulus;
    for (op, b) in ops.iter().zip(&operands[1..]) {
        acc = op.apply(acc, b % modulus, modulus);
    }
    Some(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocab::{digit, QUERY, THINK_CLOSE, THINK_OPEN};

    #[test]
    fn phases() {
        assert_eq!(phase(&[digit(1), QUERY]), Phase::Prompt);
        assert_eq!(phase(&[QUERY, THINK_OPEN]), Phase::Thinking(0));
        assert_eq!(phase(&[QUERY, THINK_OPEN, digit(1), digit(2)]), Phase::Thinking(2));
        assert_eq!(phase(&[QUERY, THINK_OPEN, digit(1), THINK_CLOSE]), Phase::Solution(0));
    }

    #[test]
    fn stub_session_respects_context() {
        let p = StubPolicy::never_terminating(2);
        let mut s = p.session();
        s.push(QUERY).unwrap();
        s.push(THINK_OPEN).unwrap();
        assert!(matches!(s.push(digit(1)), Err(Error::ContextOverflow { .. })));
    }
}
