//! Vocabularies, fixed-length token sequences, labeled datasets, and the
//! thresholded relabeling that turns fitness observations into binary labels.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

pub type Token = u16;

/// Ordered alphabet of distinct printable symbols.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    symbols: Vec<char>,
}

impl Vocabulary {
    pub fn new(symbols: impl IntoIterator<Item = char>) -> Result<Self> {
        let symbols: Vec<char> = symbols.into_iter().collect();
        if symbols.len() < 2 {
            return Err(Error::VocabTooSmall(symbols.len()));
        }
        let mut seen = BTreeSet::new();
        for &c in &symbols {
            if !seen.insert(c) {
                return Err(Error::DuplicateSymbol(c));
            }
        }
        Ok(Vocabulary { symbols })
    }

    pub fn from_str(symbols: &str) -> Result<Self> {
        Self::new(symbols.chars())
    }

    pub fn size(&self) -> usize {
        self.symbols.len()
    }

    pub fn symbol(&self, index: usize) -> Option<char> {
        self.symbols.get(index).copied()
    }

    pub fn index_of(&self, symbol: char) -> Option<usize> {
        self.symbols.iter().position(|&c| c == symbol)
    }

    /// Parse a string into token indices.
    pub fn encode(&self, text: &str) -> Result<Sequence> {
        let mut tokens = Vec::with_capacity(text.len());
        for c in text.chars() {
            let ix = self.index_of(c).ok_or(Error::UnknownSymbol(c))?;
            tokens.push(ix as Token);
        }
        Ok(Sequence::new(tokens))
    }

    pub fn decode(&self, seq: &Sequence) -> Result<String> {
        let mut out = String::with_capacity(seq.len());
        for &t in seq.tokens() {
            let c = self.symbol(t as usize).ok_or(Error::TokenOutOfRange {
                token: t as usize,
                vocab: self.size(),
            })?;
            out.push(c);
        }
        Ok(out)
    }
}

/// Fixed-length string of token indices.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Sequence {
    tokens: Vec<Token>,
}

impl Sequence {
    pub fn new(tokens: Vec<Token>) -> Self {
        Sequence { tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn token(&self, position: usize) -> Token {
        self.tokens[position]
    }
}

/// The product space `V^M`: all sequences of a fixed length over a fixed
/// vocabulary size, with lexicographic ranking for enumeration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeqSpace {
    vocab_size: usize,
    len: usize,
}

impl SeqSpace {
    pub fn new(vocab_size: usize, len: usize) -> Result<Self> {
        if vocab_size < 2 {
            return Err(Error::VocabTooSmall(vocab_size));
        }
        if len == 0 {
            return Err(Error::InvalidParam("sequence length must be at least 1"));
        }
        Ok(SeqSpace { vocab_size, len })
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn len(&self) -> usize {
        self.len
    }

    /// |V|^M, or None on overflow.
    pub fn count(&self) -> Option<u64> {
        let mut n: u64 = 1;
        for _ in 0..self.len {
            n = n.checked_mul(self.vocab_size as u64)?;
        }
        Some(n)
    }

    pub fn validate(&self, seq: &Sequence) -> Result<()> {
        if seq.len() != self.len {
            return Err(Error::LengthMismatch { expected: self.len, got: seq.len() });
        }
        for &t in seq.tokens() {
            if t as usize >= self.vocab_size {
                return Err(Error::TokenOutOfRange { token: t as usize, vocab: self.vocab_size });
            }
        }
        Ok(())
    }

    /// Lexicographic rank of a sequence.
    pub fn index_of(&self, seq: &Sequence) -> Result<usize> {
        self.validate(seq)?;
        let mut ix = 0usize;
        for &t in seq.tokens() {
            ix = ix * self.vocab_size + t as usize;
        }
        Ok(ix)
    }

    /// Sequence at a lexicographic rank.
    pub fn seq_at(&self, mut index: usize) -> Sequence {
        let mut tokens = alloc::vec![0 as Token; self.len];
        for m in (0..self.len).rev() {
            tokens[m] = (index % self.vocab_size) as Token;
            index /= self.vocab_size;
        }
        Sequence::new(tokens)
    }

    /// Full enumeration in lexicographic order. Caller is responsible for
    /// checking `count()` is tractable first.
    pub fn iter(&self) -> impl Iterator<Item = Sequence> + '_ {
        let n = self.count().expect("enumeration overflow") as usize;
        (0..n).map(move |i| self.seq_at(i))
    }
}

/// Observations (x, y) with real-valued fitness.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    entries: Vec<(Sequence, f64)>,
    seq_len: Option<usize>,
}

impl LabeledDataset {
    pub fn new(entries: Vec<(Sequence, f64)>) -> Result<Self> {
        let mut ds = LabeledDataset { entries: Vec::new(), seq_len: None };
        for (x, y) in entries {
            ds.push(x, y)?;
        }
        Ok(ds)
    }

    pub fn empty() -> Self {
        LabeledDataset { entries: Vec::new(), seq_len: None }
    }

    pub fn push(&mut self, x: Sequence, y: f64) -> Result<()> {
        if !y.is_finite() {
            return Err(Error::NonFinite("fitness value"));
        }
        match self.seq_len {
            None => self.seq_len = Some(x.len()),
            Some(m) if m != x.len() => {
                return Err(Error::LengthMismatch { expected: m, got: x.len() })
            }
            _ => {}
        }
        self.entries.push((x, y));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn seq_len(&self) -> Option<usize> {
        self.seq_len
    }

    pub fn entries(&self) -> &[(Sequence, f64)] {
        &self.entries
    }

    pub fn sequences(&self) -> impl Iterator<Item = &Sequence> {
        self.entries.iter().map(|(x, _)| x)
    }

    pub fn fitness_values(&self) -> Vec<f64> {
        self.entries.iter().map(|&(_, y)| y).collect()
    }
}

/// Binary-labeled view of a dataset at a threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryDataset {
    entries: Vec<(Sequence, bool)>,
    threshold: f64,
}

impl BinaryDataset {
    pub fn entries(&self) -> &[(Sequence, bool)] {
        &self.entries
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.entries.iter().filter(|&&(_, z)| z).count()
    }
}

/// Relabel fitness observations as z = 1[y > tau]. Strict inequality: a value
/// exactly at the threshold is a negative.
pub fn relabel(dataset: &LabeledDataset, tau: f64) -> Result<BinaryDataset> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let entries = dataset
        .entries()
        .iter()
        .map(|(x, y)| (x.clone(), *y > tau))
        .collect();
    Ok(BinaryDataset { entries, threshold: tau })
}

/// Linear-interpolation empirical quantile at rank gamma*(n-1) over the
/// sorted values.
pub fn empirical_quantile(values: &[f64], gamma: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyValues);
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::QuantileLevel(gamma));
    }
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let h = gamma * (sorted.len() - 1) as f64;
    let lo = h as usize;
    if lo + 1 >= sorted.len() {
        return Ok(sorted[sorted.len() - 1]);
    }
    let frac = h - lo as f64;
    Ok(sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]))
}

/// Exact membership tracker over canonical token encodings.
#[derive(Clone, Debug, Default)]
pub struct QuerySet {
    seen: BTreeSet<Vec<Token>>,
}

impl QuerySet {
    pub fn new() -> Self {
        QuerySet { seen: BTreeSet::new() }
    }

    /// Insert a sequence; returns false if it was already present.
    pub fn insert(&mut self, seq: &Sequence) -> bool {
        self.seen.insert(seq.tokens().to_vec())
    }

    pub fn contains(&self, seq: &Sequence) -> bool {
        self.seen.contains(seq.tokens())
    }

    pub fn len(&self) -> usize {
        self.seen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seen.is_empty()
    }
}
