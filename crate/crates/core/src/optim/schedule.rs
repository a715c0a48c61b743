use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Second- and third-stage multipliers of the base rate.
pub const STAGE_FACTORS: [f64; 3] = [1.0, 0.1, 0.05];

/// A three-stage step schedule written `"RATE (E1-E2-E3)"`: `RATE` for `E1`
/// epochs, then a tenth of it for `E2` epochs, then half of that for `E3`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScheduleSpec {
    pub base: f64,
    pub epochs: [usize; 3],
}

impl ScheduleSpec {
    pub fn new(base: f64, epochs: [usize; 3]) -> Result<Self> {
        if !(base > 0.0) || !base.is_finite() {
            return Err(Error::config(format!("learning rate must be > 0, got {base}")));
        }
        if epochs[0] == 0 {
            return Err(Error::config("the first schedule stage needs at least one epoch"));
        }
        Ok(ScheduleSpec { base, epochs })
    }

    pub fn total_epochs(&self) -> usize {
        self.epochs.iter().sum()
    }

    /// Stage (0, 1 or 2) of a zero-based epoch, or `None` past the end.
    pub fn stage(&self, epoch: usize) -> Option<usize> {
        let mut end = 0;
        for (s, &e) in self.epochs.iter().enumerate() {
            end += e;
            if epoch < end {
                return Some(s);
            }
        }
        None
    }

    pub fn stage_rate(&self, stage: usize) -> f64 {
        self.base * STAGE_FACTORS[stage]
    }

    pub fn rate(&self, epoch: usize) -> Option<f64> {
        self.stage(epoch).map(|s| self.stage_rate(s))
    }

    /// The realized per-epoch rates.
    pub fn rates(&self) -> Vec<f64> {
        (0..self.total_epochs()).map(|e| self.rate(e).unwrap()).collect()
    }
}

impl fmt::Display for ScheduleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c] = self.epochs;
        write!(f, "{} ({a}-{b}-{c})", self.base)
    }
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse { position: self.pos, message: message.into() }
    }

    fn skip_spaces(&mut self) {
        while self.text[self.pos..].starts_with(' ') {
            self.pos += 1;
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.text[self.pos..].starts_with(c) {
            self.pos += c.len_utf8();
            Ok(())
        } else {
            Err(self.err(format!("expected '{c}'")))
        }
    }

    fn take_while(&mut self, f: impl Fn(char) -> bool) -> &'a str {
        let start = self.pos;
        let len = self.text[start..].find(|c: char| !f(c)).unwrap_or(self.text.len() - start);
        self.pos += len;
        &self.text[start..start + len]
    }

    fn count(&mut self) -> Result<usize> {
        let start = self.pos;
        let digits = self.take_while(|c| c.is_ascii_digit());
        digits.parse().map_err(|_| Error::Parse { position: start, message: "expected an epoch count".into() })
    }
}

/// Parses `"RATE (E1-E2-E3)"`; errors carry the byte position of the problem.
pub fn parse_schedule(text: &str) -> Result<ScheduleSpec> {
    let mut cur = Cursor { text, pos: 0 };
    cur.skip_spaces();
    let start = cur.pos;
    let rate_text = cur.take_while(|c| c.is_ascii_digit() || matches!(c, '.' | 'e' | 'E' | '-' | '+'));
    let base: f64 = rate_text
        .parse()
        .map_err(|_| Error::Parse { position: start, message: format!("invalid learning rate {rate_text:?}") })?;
    if !(base > 0.0) || !base.is_finite() {
        return Err(Error::Parse { position: start, message: format!("learning rate must be > 0, got {rate_text}") });
    }
    cur.skip_spaces();
    cur.expect('(')?;
    cur.skip_spaces();
    let mut epochs = [0usize; 3];
    for (k, slot) in epochs.iter_mut().enumerate() {
        if k > 0 {
            cur.skip_spaces();
            cur.expect('-')?;
            cur.skip_spaces();
        }
        *slot = cur.count()?;
    }
    cur.skip_spaces();
    cur.expect(')')?;
    cur.skip_spaces();
    if cur.pos != text.len() {
        return Err(cur.err("unexpected trailing text"));
    }
    if epochs[0] == 0 {
        return Err(Error::Parse { position: text.find('(').unwrap() + 1, message: "first stage needs at least one epoch".into() });
    }
    ScheduleSpec::new(base, epochs)
}

impl FromStr for ScheduleSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_schedule(s)
    }
}
