use std::cmp::Ordering;
use std::fmt;

use crate::behavior::{Scenario, Setting};
use crate::error::{Error, Result};

/// Largest monomial basis `monomial_list` will build.
pub const MAX_MONOMIALS: usize = 5000;

/// The projector `Π_{+|setting}` of one party.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter {
    pub party: usize,
    pub setting: Setting,
}

impl Letter {
    pub fn new(party: usize, setting: Setting) -> Self {
        Self { party, setting }
    }
}

/// Canonical product of projectors: letters sorted by party (stable within a
/// party), with no two equal letters adjacent.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Monomial {
    letters: Vec<Letter>,
}

impl Monomial {
    pub fn identity() -> Self {
        Self { letters: Vec::new() }
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// Word of one party, in order.
    pub fn party_word(&self, party: usize) -> Vec<Setting> {
        self.letters
            .iter()
            .filter(|l| l.party == party)
            .map(|l| l.setting)
            .collect()
    }

    /// Hermitian conjugate: every party word reversed.
    pub fn adjoint(&self) -> Self {
        let mut letters = self.letters.clone();
        letters.reverse();
        canonical_monomial(&letters)
    }

    /// `self† · other`, canonicalized.
    pub fn adjoint_times(&self, other: &Monomial) -> Self {
        let mut word: Vec<Letter> = self.letters.iter().rev().copied().collect();
        word.extend_from_slice(&other.letters);
        canonical_monomial(&word)
    }

    /// Representative of `{m, m†}` used by real-symmetric moment matrices.
    pub fn real_key(&self) -> Self {
        let adj = self.adjoint();
        if adj < *self {
            adj
        } else {
            self.clone()
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        if text == "1" {
            return Ok(Self::identity());
        }
        let mut word = Vec::new();
        for token in text.split_whitespace() {
            let mut chars = token.chars();
            let (party, underscore, setting) = (chars.next(), chars.next(), chars.next());
            let bad = || Error::Validation(format!("malformed monomial letter {token:?}"));
            if underscore != Some('_') || chars.next().is_some() {
                return Err(bad());
            }
            let party = party.filter(|c| c.is_ascii_uppercase()).ok_or_else(bad)? as usize - 'A' as usize;
            let setting = match setting {
                Some('U') => Setting::U,
                Some('D') => Setting::D,
                _ => return Err(bad()),
            };
            word.push(Letter::new(party, setting));
        }
        Ok(canonical_monomial(&word))
    }
}

/// Shorter monomials first, then lexicographic on letters.
impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.letters
            .len()
            .cmp(&other.letters.len())
            .then_with(|| self.letters.cmp(&other.letters))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return write!(f, "1");
        }
        for (i, l) in self.letters.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            let party = char::from(b'A' + l.party as u8);
            let setting = if l.setting == Setting::U { 'U' } else { 'D' };
            write!(f, "{party}_{setting}")?;
        }
        Ok(())
    }
}

/// Letters of different parties commute; `Π² = Π` within a party.
pub fn canonical_monomial(word: &[Letter]) -> Monomial {
    let mut letters = word.to_vec();
    letters.sort_by_key(|l| l.party);
    letters.dedup();
    Monomial { letters }
}

/// Alternating words of exactly `len` letters for one party.
fn party_words(party: usize, len: usize) -> Vec<Vec<Letter>> {
    if len == 0 {
        return vec![vec![]];
    }
    [Setting::U, Setting::D]
        .into_iter()
        .map(|first| {
            (0..len)
                .map(|k| {
                    let setting = if k % 2 == 0 { first } else { other(first) };
                    Letter::new(party, setting)
                })
                .collect()
        })
        .collect()
}

fn other(s: Setting) -> Setting {
    match s {
        Setting::U => Setting::D,
        Setting::D => Setting::U,
    }
}

/// Number of canonical monomials of total length ≤ `level`.
pub fn monomial_count(n: usize, level: usize) -> usize {
    // ways[l] = monomials of length exactly l over the parties seen so far.
    let mut ways = vec![0usize; level + 1];
    ways[0] = 1;
    for _ in 0..n {
        let mut next = vec![0usize; level + 1];
        for (l, &w) in ways.iter().enumerate() {
            if w == 0 {
                continue;
            }
            for extra in 0..=level - l {
                let choices = if extra == 0 { 1 } else { 2 };
                next[l + extra] = next[l + extra].saturating_add(w.saturating_mul(choices));
            }
        }
        ways = next;
    }
    ways.iter().fold(0usize, |a, &b| a.saturating_add(b))
}

/// All canonical monomials of length ≤ `level`, shortest first then
/// lexicographic.
pub fn monomial_list(scenario: Scenario, level: usize) -> Result<Vec<Monomial>> {
    if level == 0 {
        return Err(Error::Validation("hierarchy level must be at least 1".into()));
    }
    let count = monomial_count(scenario.n, level);
    if count > MAX_MONOMIALS {
        return Err(Error::Size(format!(
            "level {level} with {} parties needs {count} monomials (limit {MAX_MONOMIALS})",
            scenario.n
        )));
    }
    let mut out: Vec<Monomial> = vec![Monomial::identity()];
    let mut partial: Vec<Vec<Letter>> = vec![vec![]];
    for party in 0..scenario.n {
        let mut next = Vec::new();
        for prefix in &partial {
            for len in 0..=level - prefix.len() {
                for w in party_words(party, len) {
                    let mut word = prefix.clone();
                    word.extend(w);
                    next.push(word);
                }
            }
        }
        partial = next;
    }
    out.extend(
        partial
            .into_iter()
            .filter(|w| !w.is_empty())
            .map(|letters| Monomial { letters }),
    );
    out.sort();
    out.dedup();
    debug_assert_eq!(out.len(), count);
    Ok(out)
}
