//! Closed token vocabulary shared by the task generator, the model and the decoders.
//!
//! Numerals are tokenized one digit per token. Scratchpad steps are introduced by
//! step-marker tokens `#1`..`#12`, so the vocabulary caps problem difficulty at
//! [`MAX_STEPS`].

pub type TokenId = u32;

pub const PAD: TokenId = 0;
pub const EOS: TokenId = 1;
pub const THINK_OPEN: TokenId = 2;
pub const THINK_CLOSE: TokenId = 3;
pub const ANSWER: TokenId = 4;
pub const QUERY: TokenId = 5;
pub const PLUS: TokenId = 6;
pub const MINUS: TokenId = 7;
pub const TIMES: TokenId = 8;
pub const EQUALS: TokenId = 9;
pub const DIGIT_BASE: TokenId = 10;
pub const STEP_BASE: TokenId = 20;

pub const MAX_STEPS: usize = 12;
pub const VOCAB_SIZE: usize = STEP_BASE as usize + MAX_STEPS;

pub fn digit(d: u32) -> TokenId {
    debug_assert!(d < 10);
    DIGIT_BASE + d
}

pub fn digit_value(token: TokenId) -> Option<u32> {
    (DIGIT_BASE..DIGIT_BASE + 10)
        .contains(&token)
        .then(|| token - DIGIT_BASE)
}

pub fn is_digit(token: TokenId) -> bool {
    digit_value(token).is_some()
}

/// Marker introducing scratchpad step `step` (1-based).
pub fn step_marker(step: usize) -> TokenId {
    assert!((1..=MAX_STEPS).contains(&step), "step {step} has no marker");
    STEP_BASE + step as TokenId - 1
}

pub fn is_operator(token: TokenId) -> bool {
    matches!(token, PLUS | MINUS | TIMES)
}

/// Appends the decimal digits of `value`.
pub fn push_numeral(out: &mut Vec<TokenId>, value: u64) {
    for ch in value.to_string().bytes() {
        out.push(digit((ch - b'0') as u32));
    }
}

pub fn token_text(token: TokenId) -> String {
    match token {
        PAD => "<pad>".into(),
        EOS => "<eos>".into(),
        THINK_OPEN => "<think>".into(),
        THINK_CLOSE => "</think>".into(),
        ANSWER => "ANS".into(),
        QUERY => "?".into(),
        PLUS => "+".into(),
        MINUS => "-".into(),
        TIMES => "*".into(),
        EQUALS => "=".into(),
        t if is_digit(t) => (t - DIGIT_BASE).to_string(),
        t if (STEP_BASE..VOCAB_SIZE as TokenId).contains(&t) => format!("#{}", t - STEP_BASE + 1),
        t => format!("<unk:{t}>"),
    }
}

/// Renders a token sequence as whitespace-separated text, keeping the digits of a
/// numeral together (`3 4` renders as `34`).
pub fn render(tokens: &[TokenId]) -> String {
    let mut out = String::new();
    let mut prev_digit = false;
    for &t in tokens {
        let d = is_digit(t);
        if !out.is_empty() && !(d && prev_digit) {
            out.push(' ');
        }
        out.push_str(&token_text(t));
        prev_digit = d;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numerals_render_as_words() {
        let mut t = Vec::new();
        push_numeral(&mut t, 42);
        t.push(PLUS);
        push_numeral(&mut t, 7);
        t.push(QUERY);
        assert_eq!(render(&t), "42 + 7 ?");
    }

    #[test]
    fn markers_cover_all_steps() {
        assert_eq!(step_marker(1), STEP_BASE);
        assert_eq!(step_marker(MAX_STEPS) as usize, VOCAB_SIZE - 1);
        assert_eq!(token_text(step_marker(3)), "#3");
    }
}
