//! Budget-constrained decoding strategies.
//!
//! Every decode starts from `prompt ++ [<think>]`; the opening `<think>` is part of
//! the template and is not charged to any budget.
//!
//! * [`decode_separate_budget`]: thinking is capped at `t` tokens with the
//!   `</think>` counted inside `t` (injected after `t - 1` content tokens), then
//!   the solution gets its own `s` tokens.
//! * [`decode_vanilla_truncate`]: free-running, hard stop after `c` tokens.
//! * [`decode_budget_forcing`]: free-running until `c - 2` tokens, then if still
//!   thinking the suffix `</think> ANS` is injected and sampling continues to `c`.

use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::sample_next;
use crate::policy::{Policy, PolicySession};
use crate::taskgen::Problem;
use crate::vocab::{self, TokenId};

/// Thinking/solution budgets; the total is always `thinking + solution`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BudgetConfig {
    pub thinking: usize,
    pub solution: usize,
}

impl BudgetConfig {
    pub fn new(thinking: usize, solution: usize) -> Self {
        BudgetConfig { thinking, solution }
    }

    pub fn total(&self) -> usize {
        self.thinking + self.solution
    }
}

impl fmt::Display for BudgetConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}+{}", self.thinking, self.solution)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Separate,
    BudgetForcing,
    Vanilla,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Separate, Strategy::BudgetForcing, Strategy::Vanilla];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Separate => "separate",
            Strategy::BudgetForcing => "budget-forcing",
            Strategy::Vanilla => "vanilla",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown strategy {s:?} (expected separate, budget-forcing or vanilla)")))
    }
}

/// The budget a trajectory was decoded under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Budget {
    Separate(BudgetConfig),
    Total(usize),
}

impl Budget {
    pub fn cap(&self) -> usize {
        match self {
            Budget::Separate(b) => b.total(),
            Budget::Total(c) => *c,
        }
    }

    /// `(t, s)` for reporting; a total-only budget reports `(c, 0)`.
    pub fn pair(&self) -> (usize, usize) {
        match self {
            Budget::Separate(b) => (b.thinking, b.solution),
            Budget::Total(c) => (*c, 0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub problem_id: u64,
    pub prompt_tokens: Vec<TokenId>,
    /// Thinking segment without the opening `<think>`; ends with `</think>` when
    /// one was emitted or injected.
    pub think_tokens: Vec<TokenId>,
    pub solution_tokens: Vec<TokenId>,
    pub forced_think_end: bool,
    pub natural_solution_end: bool,
    /// One bit per think+solution token; false where the environment injected it.
    pub policy_chosen: Vec<bool>,
    pub strategy: Strategy,
    pub budget: Budget,
}

impl Trajectory {
    pub fn output_len(&self) -> usize {
        self.think_tokens.len() + self.solution_tokens.len()
    }

    /// Think and solution tokens in generation order.
    pub fn output(&self) -> Vec<TokenId> {
        self.think_tokens.iter().chain(&self.solution_tokens).copied().collect()
    }

    /// `prompt ++ [<think>]`, the context every output is conditioned on.
    pub fn context(&self) -> Vec<TokenId> {
        prompt_template(&self.prompt_tokens)
    }

    /// Checks the structural invariants for the trajectory's strategy.
    pub fn check(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::BudgetViolation(format!("problem {}: {msg}", self.problem_id)));
        if self.policy_chosen.len() != self.output_len() {
            return fail(format!("mask has {} bits for {} tokens", self.policy_chosen.len(), self.output_len()));
        }
        if self.output_len() > self.budget.cap() {
            return fail(format!("{} tokens exceed cap {}", self.output_len(), self.budget.cap()));
        }
        if let Budget::Separate(b) = self.budget {
            if self.think_tokens.len() > b.thinking || self.solution_tokens.len() > b.solution {
                return fail(format!(
                    "segments {}+{} exceed budget {b}",
                    self.think_tokens.len(),
                    self.solution_tokens.len()
                ));
            }
            let closes = self.think_tokens.iter().filter(|&&t| t == vocab::THINK_CLOSE).count();
            if closes != 1 || self.think_tokens.last() != Some(&vocab::THINK_CLOSE) {
                return fail("thinking segment must end with its only </think>".into());
            }
            if self
                .solution_tokens
                .iter()
                .any(|&t| t == vocab::THINK_OPEN || t == vocab::THINK_CLOSE)
            {
                return fail("think marker inside the solution".into());
            }
            let close_at = self.think_tokens.len() - 1;
            let injected: Vec<usize> = (0..self.output_len()).filter(|&i| !self.policy_chosen[i]).collect();
            let think_injected = injected.iter().filter(|&&i| i < self.think_tokens.len()).count();
            if self.forced_think_end != injected.contains(&close_at) || think_injected > 1 {
                return fail("mask disagrees with forced_think_end".into());
            }
        }
        Ok(())
    }
}

pub fn prompt_template(prompt: &[TokenId]) -> Vec<TokenId> {
    let mut ctx = prompt.to_vec();
    ctx.push(vocab::THINK_OPEN);
    ctx
}

/// Drives a policy session, feeding tokens lazily so the final token of a decode
/// is never pushed through the model.
struct Cursor<S> {
    session: S,
    pending: Vec<TokenId>,
}

impl<S: PolicySession> Cursor<S> {
    fn new(session: S, context: &[TokenId]) -> Self {
        Cursor { session, pending: context.to_vec() }
    }

    fn accept(&mut self, token: TokenId) {
        self.pending.push(token);
    }

    fn sample<R: RngCore + ?Sized>(&mut self, temperature: f64, rng: &mut R) -> Result<TokenId> {
        let (&last, rest) = self
            .pending
            .split_last()
            .ok_or_else(|| Error::InvalidArgument("nothing to condition on".into()))?;
        for &t in rest {
            self.session.push(t)?;
        }
        let row = self.session.push(last)?;
        let token = sample_next(row, temperature, rng)?;
        self.pending.clear();
        Ok(token)
    }
}

fn check_fits(policy_ctx: usize, needed: usize) -> Result<()> {
    if needed > policy_ctx {
        Err(Error::ContextOverflow { len: needed, max: policy_ctx })
    } else {
        Ok(())
    }
}

/// Thinking segment under a thinking budget of `t >= 1`: returns tokens, mask and
/// whether `</think>` was injected.
fn think_phase<S: PolicySession, R: RngCore + ?Sized>(
    cursor: &mut Cursor<S>,
    t: usize,
    temperature: f64,
    rng: &mut R,
) -> Result<(Vec<TokenId>, Vec<bool>, bool)> {
    let mut tokens = Vec::with_capacity(t);
    let mut mask = Vec::with_capacity(t);
    loop {
        if tokens.len() + 1 == t {
            tokens.push(vocab::THINK_CLOSE);
            mask.push(false);
            cursor.accept(vocab::THINK_CLOSE);
            return Ok((tokens, mask, true));
        }
        match cursor.sample(temperature, rng)? {
            vocab::THINK_CLOSE => {
                tokens.push(vocab::THINK_CLOSE);
                mask.push(true);
                cursor.accept(vocab::THINK_CLOSE);
                return Ok((tokens, mask, false));
            }
            // end-of-sequence while thinking closes the thinking phase
            vocab::EOS => {
                tokens.push(vocab::THINK_CLOSE);
                mask.push(false);
                cursor.accept(vocab::THINK_CLOSE);
                return Ok((tokens, mask, true));
            }
            tok => {
                tokens.push(tok);
                mask.push(true);
                cursor.accept(tok);
            }
        }
    }
}

/// Solution segment of at most `s` tokens, stopping at end-of-sequence.
fn solution_phase<S: PolicySession, R: RngCore + ?Sized>(
    cursor: &mut Cursor<S>,
    s: usize,
    temperature: f64,
    rng: &mut R,
) -> Result<(Vec<TokenId>, Vec<bool>, bool)> {
    let mut tokens = Vec::with_capacity(s);
    let mut mask = Vec::with_capacity(s);
    while tokens.len() < s {
        match cursor.sample(temperature, rng)? {
            vocab::EOS => {
                tokens.push(vocab::EOS);
                mask.push(true);
                return Ok((tokens, mask, true));
            }
            // a think marker here ends the solution; recorded as an injected <eos>
            vocab::THINK_OPEN | vocab::THINK_CLOSE => {
                tokens.push(vocab::EOS);
                mask.push(false);
                return Ok((tokens, mask, true));
            }
            tok => {
                tokens.push(tok);
                mask.push(true);
                cursor.accept(tok);
            }
        }
    }
    Ok((tokens, mask, false))
}

fn validate_separate(prompt_len: usize, budget: BudgetConfig, ctx: usize) -> Result<()> {
    if budget.solution == 0 {
        return Err(Error::InvalidBudget("solution budget must be at least 1".into()));
    }
    if budget.thinking == 0 {
        return Err(Error::InvalidBudget("thinking budget must leave room for </think>".into()));
    }
    check_fits(ctx, prompt_len + budget.total() + 1)
}

pub fn decode_separate_budget<P: Policy, R: RngCore + ?Sized>(
    policy: &P,
    prompt: &[TokenId],
    budget: BudgetConfig,
    temperature: f64,
    rng: &mut R,
) -> Result<Trajectory> {
    validate_separate(prompt.len(), budget, policy.context_length())?;
    let mut cursor = Cursor::new(policy.session(), &prompt_template(prompt));
    let (think, mut mask, forced) = think_phase(&mut cursor, budget.thinking, temperature, rng)?;
    let (solution, sol_mask, natural) = solution_phase(&mut cursor, budget.solution, temperature, rng)?;
    mask.extend(sol_mask);
    Ok(Trajectory {
        problem_id: 0,
        prompt_tokens: prompt.to_vec(),
        think_tokens: think,
        solution_tokens: solution,
        forced_think_end: forced,
        natural_solution_end: natural,
        policy_chosen: mask,
        strategy: Strategy::Separate,
        budget: Budget::Separate(budget),
    })
}

/// Separate budgeting with the thinking segment from `thinker` and the solution
/// from `solver`, which re-reads the completed `prompt <think> ... </think>` context.
/// Uses one rng stream for both phases, so `thinker == solver` reproduces
/// [`decode_separate_budget`] exactly.
pub fn decode_composed<P: Policy, Q: Policy, R: RngCore + ?Sized>(
    thinker: &P,
    solver: &Q,
    prompt: &[TokenId],
    budget: BudgetConfig,
    temperature: f64,
    rng: &mut R,
) -> Result<Trajectory> {
    if thinker.vocab_size() != solver.vocab_size() {
        return Err(Error::IncompatibleModels(format!(
            "vocabulary sizes {} and {} differ",
            thinker.vocab_size(),
            solver.vocab_size()
        )));
    }
    validate_separate(prompt.len(), budget, thinker.context_length().min(solver.context_length()))?;
    let template = prompt_template(prompt);
    let mut cursor = Cursor::new(thinker.session(), &template);
    let (think, mut mask, forced) = think_phase(&mut cursor, budget.thinking, temperature, rng)?;
    let mut context = template;
    context.extend_from_slice(&think);
    let mut cursor = Cursor::new(solver.session(), &context);
    let (solution, sol_mask, natural) = solution_phase(&mut cursor, budget.solution, temperature, rng)?;
    mask.extend(sol_mask);
    Ok(Trajectory {
        problem_id: 0,
        prompt_tokens: prompt.to_vec(),
        think_tokens: think,
        solution_tokens: solution,
        forced_think_end: forced,
        natural_solution_end: natural,
        policy_chosen: mask,
        strategy: Strategy::Separate,
        budget: Budget::Separate(budget),
    })
}

/// Splits a free-running output at its first `</think>`.
fn split_output(
    prompt: &[TokenId],
    output: Vec<TokenId>,
    mask: Vec<bool>,
    forced: bool,
    strategy: Strategy,
    cap: usize,
) -> Trajectory {
    let (think, solution) = match output.iter().position(|&t| t == vocab::THINK_CLOSE) {
        Some(i) => (output[..=i].to_vec(), output[i + 1..].to_vec()),
        None => (output, Vec::new()),
    };
    let natural = solution.contains(&vocab::EOS);
    Trajectory {
        problem_id: 0,
        prompt_tokens: prompt.to_vec(),
        think_tokens: think,
        solution_tokens: solution,
        forced_think_end: forced,
        natural_solution_end: natural,
        policy_chosen: mask,
        strategy,
        budget: Budget::Total(cap),
    }
}

pub fn decode_vanilla_truncate<P: Policy, R: RngCore + ?Sized>(
    policy: &P,
    prompt: &[TokenId],
    cap: usize,
    temperature: f64,
    rng: &mut R,
) -> Result<Trajectory> {
    check_fits(policy.context_length(), prompt.len() + cap)?;
    let mut cursor = Cursor::new(policy.session(), &prompt_template(prompt));
    let mut output = Vec::with_capacity(cap);
    while output.len() < cap {
        let tok = cursor.sample(temperature, rng)?;
        output.push(tok);
        if tok == vocab::EOS {
            break;
        }
        cursor.accept(tok);
    }
    let mask = vec![true; output.len()];
    Ok(split_output(prompt, output, mask, false, Strategy::Vanilla, cap))
}

/// Tokens injected when the forcing point is reached while still thinking.
pub const FORCING_SUFFIX: [TokenId; 2] = [vocab::THINK_CLOSE, vocab::ANSWER];

pub fn decode_budget_forcing<P: Policy, R: RngCore + ?Sized>(
    policy: &P,
    prompt: &[TokenId],
    cap: usize,
    temperature: f64,
    rng: &mut R,
) -> Result<Trajectory> {
    let r = FORCING_SUFFIX.len();
    if cap < r {
        return Err(Error::InvalidBudget(format!("total budget {cap} cannot hold the {r}-token forcing suffix")));
    }
    check_fits(policy.context_length(), prompt.len() + cap + r)?;
    let mut cursor = Cursor::new(policy.session(), &prompt_template(prompt));
    let mut output = Vec::with_capacity(cap);
    let mut mask = Vec::with_capacity(cap);
    let mut thinking = true;
    let mut ended = false;
    while output.len() < cap - r {
        let tok = cursor.sample(temperature, rng)?;
        output.push(tok);
        mask.push(true);
        if tok == vocab::EOS {
            ended = true;
            break;
        }
        if tok == vocab::THINK_CLOSE {
            thinking = false;
        }
        cursor.accept(tok);
    }
    let forced = thinking && !ended;
    if forced {
        for t in FORCING_SUFFIX {
            output.push(t);
            mask.push(false);
            cursor.accept(t);
        }
    }
    while !ended && output.len() < cap {
        let tok = cursor.sample(temperature, rng)?;
        output.push(tok);
        mask.push(true);
        if tok == vocab::EOS {
            break;
        }
        cursor.accept(tok);
    }
    Ok(split_output(prompt, output, mask, forced, Strategy::BudgetForcing, cap))
}

/// Decodes `problem` with `strategy`; total-budget strategies use `c = t + s`.
pub fn decode<P: Policy, R: RngCore + ?Sized>(
    policy: &P,
    strategy: Strategy,
    problem: &Problem,
    budget: BudgetConfig,
    temperature: f64,
    rng: &mut R,
) -> Result<Trajectory> {
    let prompt = &problem.prompt_tokens;
    let mut traj = match strategy {
        Strategy::Separate => decode_separate_budget(policy, prompt, budget, temperature, rng)?,
        Strategy::Vanilla => decode_vanilla_truncate(policy, prompt, budget.total(), temperature, rng)?,
        Strategy::BudgetForcing => decode_budget_forcing(policy, prompt, budget.total(), temperature, rng)?,
    };
    traj.problem_id = problem.id;
    Ok(traj)
}

/// One line of a trajectory dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub problem_id: u64,
    pub strategy: Strategy,
    pub thinking_budget: usize,
    pub solution_budget: usize,
    pub prompt: Vec<TokenId>,
    pub think: Vec<TokenId>,
    pub solution: Vec<TokenId>,
    pub mask: Vec<bool>,
    pub forced_think_end: bool,
    pub natural_solution_end: bool,
    pub reward: f64,
}

impl TrajectoryRecord {
    pub fn new(t: &Trajectory, reward: f64) -> Self {
        let (tb, sb) = t.budget.pair();
        TrajectoryRecord {
            problem_id: t.problem_id,
            strategy: t.strategy,
            thinking_budget: tb,
            solution_budget: sb,
            prompt: t.prompt_tokens.clone(),
            think: t.think_tokens.clone(),
            solution: t.solution_tokens.clone(),
            mask: t.policy_chosen.clone(),
            forced_think_end: t.forced_think_end,
            natural_solution_end: t.natural_solution_end,
            reward,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_params, ModelConfig};
    use crate::rng::{stream, Domain};
    use crate::stub::StubPolicy;
    use crate::vocab::{digit, ANSWER, EOS, QUERY, THINK_CLOSE};

    const PROMPT: [TokenId; 4] = [11, vocab::PLUS, 12, QUERY];

    fn rng() -> crate::rng::Rng {
        stream(0, Domain::Eval, &[0])
    }

    #[test]
    fn natural_think_end() {
        let p = StubPolicy::closes_thinking_at(64, 5);
        let t = decode_separate_budget(&p, &PROMPT, BudgetConfig::new(10, 4), 1.0, &mut rng()).unwrap();
        assert_eq!(t.think_tokens.len(), 5);
        assert!(!t.forced_think_end);
        assert!(t.policy_chosen.iter().all(|&b| b));
        assert_eq!(t.solution_tokens, vec![ANSWER, digit(0), EOS]);
        assert!(t.natural_solution_end);
        t.check().unwrap();
    }

    #[test]
    fn immediate_forcing_with_unit_thinking_budget() {
        let p = StubPolicy::never_terminating(64);
        let t = decode_separate_budget(&p, &PROMPT, BudgetConfig::new(1, 4), 1.0, &mut rng()).unwrap();
        assert_eq!(t.think_tokens, vec![THINK_CLOSE]);
        assert!(t.forced_think_end);
        assert!(!t.policy_chosen[0]);
        t.check().unwrap();
    }

    #[test]
    fn never_terminating_fills_both_budgets() {
        // hand simulation: 7 sampled digits, injected </think>, 4 sampled digits
        let p = StubPolicy::never_terminating(64);
        let t = decode_separate_budget(&p, &PROMPT, BudgetConfig::new(8, 4), 1.0, &mut rng()).unwrap();
        let mut expected = vec![digit(1); 7];
        expected.push(THINK_CLOSE);
        assert_eq!(t.think_tokens, expected);
        assert_eq!(t.solution_tokens, vec![digit(1); 4]);
        assert_eq!(t.output_len(), 12);
        let mut mask = vec![true; 12];
        mask[7] = false;
        assert_eq!(t.policy_chosen, mask);
        assert!(!t.natural_solution_end);
        t.check().unwrap();
    }

    #[test]
    fn separate_budget_errors() {
        let p = StubPolicy::never_terminating(16);
        assert!(matches!(
            decode_separate_budget(&p, &PROMPT, BudgetConfig::new(4, 0), 1.0, &mut rng()),
            Err(Error::InvalidBudget(_))
        ));
        assert!(matches!(
            decode_separate_budget(&p, &PROMPT, BudgetConfig::new(8, 4), 1.0, &mut rng()),
            Err(Error::ContextOverflow { .. })
        ));
    }

    #[test]
    fn vanilla_truncation() {
        let p = StubPolicy::never_terminating(64);
        let t = decode_vanilla_truncate(&p, &PROMPT, 16, 1.0, &mut rng()).unwrap();
        assert_eq!(t.think_tokens.len(), 16);
        assert!(t.solution_tokens.is_empty());
        assert_eq!(crate::taskgen::solution_reward(&t.solution_tokens, 0), 0.0);

        let t = decode_vanilla_truncate(&p, &PROMPT, 0, 1.0, &mut rng()).unwrap();
        assert_eq!(t.output_len(), 0);
    }

    #[test]
    fn vanilla_inactive_budget_matches_unbudgeted() {
        let p = StubPolicy::closes_thinking_at(64, 27);
        let t = decode_vanilla_truncate(&p, &PROMPT, 40, 1.0, &mut rng()).unwrap();
        assert_eq!(t.output_len(), 30);
        let loose = decode_vanilla_truncate(&p, &PROMPT, 60, 1.0, &mut rng()).unwrap();
        assert_eq!(t.output(), loose.output());
        assert!(t.natural_solution_end);
    }

    #[test]
    fn budget_forcing_injects_suffix() {
        let p = StubPolicy::never_terminating(64);
        let t = decode_budget_forcing(&p, &PROMPT, 10, 1.0, &mut rng()).unwrap();
        assert_eq!(t.output_len(), 10);
        let out = t.output();
        assert!(out[..8].iter().all(|&x| x == digit(1)));
        assert_eq!(&out[8..], &FORCING_SUFFIX);
        assert_eq!(t.think_tokens.len(), 9);
        assert_eq!(t.solution_tokens, vec![ANSWER]);
        assert!(t.forced_think_end);
        assert_eq!(t.policy_chosen.iter().filter(|&&b| !b).count(), 2);

        let t = decode_budget_forcing(&p, &PROMPT, 2, 1.0, &mut rng()).unwrap();
        assert_eq!(t.output(), FORCING_SUFFIX.to_vec());

        assert!(matches!(
            decode_budget_forcing(&p, &PROMPT, 1, 1.0, &mut rng()),
            Err(Error::InvalidBudget(_))
        ));
    }

    #[test]
    fn budget_forcing_inactive_matches_vanilla() {
        let p = StubPolicy::closes_thinking_at(64, 6);
        let f = decode_budget_forcing(&p, &PROMPT, 20, 1.0, &mut rng()).unwrap();
        let v = decode_vanilla_truncate(&p, &PROMPT, 20, 1.0, &mut rng()).unwrap();
        assert_eq!(f.output(), v.output());
        assert!(!f.forced_think_end);
    }

    #[test]
    fn strategies_agree_when_budgets_are_slack() {
        let params = init_params(&ModelConfig { seed: 4, ..Default::default() }).unwrap();
        let sb = BudgetConfig::new(150, 30);
        let mut agreed = 0;
        for sample in 0..40 {
            let key = [sample];
            let a = decode_separate_budget(&params, &PROMPT, sb, 1.0, &mut stream(1, Domain::Eval, &key)).unwrap();
            if a.forced_think_end || !a.natural_solution_end || a.policy_chosen.contains(&false) {
                continue;
            }
            let b = decode_vanilla_truncate(&params, &PROMPT, sb.total(), 1.0, &mut stream(1, Domain::Eval, &key))
                .unwrap();
            let c = decode_budget_forcing(&params, &PROMPT, sb.total(), 1.0, &mut stream(1, Domain::Eval, &key))
                .unwrap();
            for other in [&b, &c] {
                assert_eq!(a.think_tokens, other.think_tokens);
                assert_eq!(a.solution_tokens, other.solution_tokens);
                assert_eq!(a.policy_chosen, other.policy_chosen);
                assert_eq!(a.forced_think_end, other.forced_think_end);
            }
            agreed += 1;
        }
        assert!(agreed > 0, "no naturally terminating sample to compare");
    }

    #[test]
    fn composition_with_itself_is_plain_decode() {
        let params = init_params(&ModelConfig { seed: 8, ..Default::default() }).unwrap();
        for sample in 0..10 {
            let b = BudgetConfig::new(6 + sample as usize, 5);
            let a = decode_separate_budget(&params, &PROMPT, b, 1.0, &mut stream(2, Domain::Eval, &[sample])).unwrap();
            let c = decode_composed(&params, &params, &PROMPT, b, 1.0, &mut stream(2, Domain::Eval, &[sample]))
                .unwrap();
            assert_eq!(a, c);
        }
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
        }
        assert!("beam".parse::<Strategy>().is_err());
    }
}
