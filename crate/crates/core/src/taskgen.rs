//! Synthetic chained modular-arithmetic corpus and its exact-match reward.
//!
//! A problem of difficulty `k` is the left-to-right expression
//! `a1 op1 a2 op2 ... opk a(k+1) ?` evaluated modulo `m`, with operators drawn
//! from `{+, -, *}`. The scratchpad needed to solve it grows linearly in `k`.
//!
//! Gold completions come in two scratchpad styles so the warm-started policy has
//! real variation in reasoning length:
//!
//! ```text
//! verbose: #1 * 3 = 6 #2 + 9 = 5 </think> ANS 5 <eos>
//! terse:   #1 6 #2 5 </think> ANS 5 <eos>
//! ```

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::decoder::Trajectory;
use crate::error::{Error, Result};
use crate::rng::{self, Domain};
use crate::vocab::{self, TokenId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    fn code(self) -> u64 {
        match self {
            Split::Train => 0,
            Split::Validation => 1,
            Split::Test => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Operator {
    Add,
    Sub,
    Mul,
}

impl Operator {
    const ALL: [Operator; 3] = [Operator::Add, Operator::Sub, Operator::Mul];

    pub fn token(self) -> TokenId {
        match self {
            Operator::Add => vocab::PLUS,
            Operator::Sub => vocab::MINUS,
            Operator::Mul => vocab::TIMES,
        }
    }

    pub fn from_token(token: TokenId) -> Option<Self> {
        match token {
            vocab::PLUS => Some(Operator::Add),
            vocab::MINUS => Some(Operator::Sub),
            vocab::TIMES => Some(Operator::Mul),
            _ => None,
        }
    }

    /// `lhs op rhs (mod modulus)` for residues `lhs, rhs < modulus`.
    pub fn apply(self, lhs: u64, rhs: u64, modulus: u64) -> u64 {
        let (l, r, m) = (lhs as u128, rhs as u128, modulus as u128);
        let v = match self {
            Operator::Add => (l + r) % m,
            Operator::Sub => (l + m - r % m) % m,
            Operator::Mul => (l * r) % m,
        };
        v as u64
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Problem {
    pub id: u64,
    pub prompt_tokens: Vec<TokenId>,
    pub answer: u64,
    pub difficulty: usize,
    pub modulus: u64,
    pub split: Split,
}

impl Problem {
    pub fn text(&self) -> String {
        vocab::render(&self.prompt_tokens)
    }

    /// Operands and operators parsed back out of the prompt.
    pub fn terms(&self) -> (Vec<u64>, Vec<Operator>) {
        parse_expression(&self.prompt_tokens).expect("generated prompts are well formed")
    }

    /// Running values `c1..ck` of the left-to-right evaluation.
    pub fn intermediates(&self) -> Vec<u64> {
        let (operands, ops) = self.terms();
        let mut acc = operands[0] % self.modulus;
        ops.iter()
            .zip(&operands[1..])
            .map(|(op, &b)| {
                acc = op.apply(acc, b, self.modulus);
                acc
            })
            .collect()
    }
}

/// Splits `a1 op a2 #1 op a3 #2 ... ?` into operands and operators. Step
/// markers are optional, but a marker must directly follow the operand of the
/// step it names.
pub fn parse_expression(tokens: &[TokenId]) -> Option<(Vec<u64>, Vec<Operator>)> {
    let body = tokens.strip_suffix(&[vocab::QUERY])?;
    let mut operands = Vec::new();
    let mut ops = Vec::new();
    let mut current: Option<u64> = None;
    for &t in body {
        if let Some(d) = vocab::digit_value(t) {
            current = Some(current.unwrap_or(0).checked_mul(10)?.checked_add(d as u64)?);
        } else if t >= vocab::STEP_BASE {
            if ops.is_empty() || t != vocab::step_marker(ops.len()) || operands.len() != ops.len() {
                return None;
            }
            operands.push(current.take()?);
        } else {
            ops.push(Operator::from_token(t)?);
            if operands.len() < ops.len() {
                operands.push(current.take()?);
            } else if current.is_some() {
                return None;
            }
        }
    }
    if operands.len() == ops.len() {
        operands.push(current?);
    } else if current.is_some() {
        return None;
    }
    (operands.len() == ops.len() + 1).then_some((operands, ops))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DifficultyRange {
    pub min: usize,
    pub max: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub seed: u64,
    pub count: usize,
    pub difficulty: DifficultyRange,
    pub modulus: u64,
    pub split: Split,
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::InvalidSpec("count must be at least 1".into()));
        }
        let DifficultyRange { min, max } = self.difficulty;
        if min == 0 || min > max {
            return Err(Error::InvalidSpec(format!(
                "difficulty range {min}..={max} is empty or starts below 1"
            )));
        }
        if max > vocab::MAX_STEPS {
            return Err(Error::InvalidSpec(format!(
                "difficulty {max} exceeds the {} step markers in the vocabulary",
                vocab::MAX_STEPS
            )));
        }
        if self.modulus < 2 {
            return Err(Error::InvalidSpec("modulus must be at least 2".into()));
        }
        Ok(())
    }
}

pub fn generate_corpus(spec: &CorpusSpec) -> Result<Vec<Problem>> {
    spec.validate()?;
    let mut rng = rng::stream(spec.seed, Domain::Corpus, &[spec.split.code()]);
    let problems = (0..spec.count)
        .map(|index| {
            let k = rng.gen_range(spec.difficulty.min..=spec.difficulty.max);
            let mut prompt = Vec::with_capacity(5 * k + 2);
            let mut acc = rng.gen_range(0..spec.modulus);
            vocab::push_numeral(&mut prompt, acc);
            for step in 1..=k {
                let op = Operator::ALL[rng.gen_range(0..3)];
                let operand = rng.gen_range(0..spec.modulus);
                prompt.push(op.token());
                vocab::push_numeral(&mut prompt, operand);
                prompt.push(vocab::step_marker(step));
                acc = op.apply(acc, operand, spec.modulus);
            }
            prompt.push(vocab::QUERY);
            Problem {
                id: (spec.split.code() << 32) | index as u64,
                prompt_tokens: prompt,
                answer: acc,
                difficulty: k,
                modulus: spec.modulus,
                split: spec.split,
            }
        })
        .collect();
    Ok(problems)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScratchStyle {
    Verbose,
    Terse,
}

/// Gold completion for `problem`: scratchpad, `</think>`, `ANS <answer> <eos>`.
/// The opening `<think>` belongs to the prompt template and is not included.
pub fn gold_completion(problem: &Problem, style: ScratchStyle) -> Vec<TokenId> {
    let (operands, ops) = problem.terms();
    let mut out = Vec::new();
    for (j, (c, (op, b))) in problem
        .intermediates()
        .into_iter()
        .zip(ops.iter().zip(&operands[1..]))
        .enumerate()
    {
        out.push(vocab::step_marker(j + 1));
        if style == ScratchStyle::Verbose {
            out.push(op.token());
            vocab::push_numeral(&mut out, *b);
            out.push(vocab::EQUALS);
        }
        vocab::push_numeral(&mut out, c);
    }
    out.push(vocab::THINK_CLOSE);
    out.push(vocab::ANSWER);
    vocab::push_numeral(&mut out, problem.answer);
    out.push(vocab::EOS);
    out
}

/// Picks a style per problem (terse with probability `terse_fraction`).
pub fn gold_style(seed: u64, problem: &Problem, terse_fraction: f64) -> ScratchStyle {
    let mut rng = rng::stream(seed, Domain::Style, &[problem.id]);
    if rng.gen::<f64>() < terse_fraction {
        ScratchStyle::Terse
    } else {
        ScratchStyle::Verbose
    }
}

/// Exact-match reward on a solution segment: 1.0 iff the first `ANS` is followed
/// by a numeral equal to `answer`.
pub fn solution_reward(solution: &[TokenId], answer: u64) -> f64 {
    let Some(pos) = solution.iter().position(|&t| t == vocab::ANSWER) else {
        return 0.0;
    };
    let digits: Vec<u32> = solution[pos + 1..]
        .iter()
        .map_while(|&t| vocab::digit_value(t))
        .collect();
    if digits.is_empty() || digits.len() > 18 {
        return 0.0;
    }
    let value = digits.iter().fold(0u64, |acc, &d| acc * 10 + d as u64);
    if value == answer {
        1.0
    } else {
        0.0
    }
}

pub fn reward(trajectory: &Trajectory, problem: &Problem) -> f64 {
    solution_reward(&trajectory.solution_tokens, problem.answer)
}

/// One line of a corpus file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub id: u64,
    pub prompt: Vec<TokenId>,
    pub text: String,
    pub answer: u64,
    pub difficulty: usize,
    pub modulus: u64,
    pub split: Split,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<Vec<TokenId>>,
}

impl CorpusRecord {
    pub fn new(problem: &Problem, gold: Option<Vec<TokenId>>) -> Self {
        CorpusRecord {
            id: problem.id,
            prompt: problem.prompt_tokens.clone(),
            text: problem.text(),
            answer: problem.answer,
            difficulty: problem.difficulty,
            modulus: problem.modulus,
            split: problem.split,
            gold,
        }
    }

    pub fn problem(&self) -> Problem {
        Problem {
            id: self.id,
            prompt_tokens: self.prompt.clone(),
            answer: self.answer,
            difficulty: self.difficulty,
            modulus: self.modulus,
            split: self.split,
        }
    }
}

pub fn write_corpus(path: &Path, records: &[CorpusRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| Error::Format(e.to_string()))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_corpus(path: &Path) -> Result<Vec<CorpusRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: CorpusRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Format(format!("{}:{}: {e}", path.display(), n + 1)))?;
        out.push(record);
    }
    Ok(out)
}
