//! Bit-packed binary codes, Hamming distance, label-derived ground truth
//! and the two constant-bit extension transforms.
//!
//! Bit `q` of a code lives in bit `q % 64` of word `q / 64` (LSB first).
//! Padding bits past the code length are always zero, so word-wise
//! XOR + popcount gives the Hamming distance directly.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Largest supported code length in bits.
pub const MAX_CODE_LEN: usize = 4096;

const WORD_BITS: usize = 64;

#[inline]
pub(crate) fn words_for(len: usize) -> usize {
    len.div_ceil(WORD_BITS)
}

#[inline]
pub(crate) fn xor_popcount(a: &[u64], b: &[u64]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum()
}

fn check_len(len: usize) -> Result<()> {
    if len == 0 || len > MAX_CODE_LEN {
        return Err(Error::CodeLength(len));
    }
    Ok(())
}

/// A fixed-length code over {0, 1}.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinaryCode {
    words: Box<[u64]>,
    len: usize,
}

impl BinaryCode {
    pub fn zeros(len: usize) -> Result<Self> {
        check_len(len)?;
        Ok(Self {
            words: vec![0; words_for(len)].into_boxed_slice(),
            len,
        })
    }

    pub fn ones(len: usize) -> Result<Self> {
        let mut code = Self::zeros(len)?;
        code.words.iter_mut().for_each(|w| *w = u64::MAX);
        code.clear_padding();
        Ok(code)
    }

    pub fn from_bits(bits: &[bool]) -> Result<Self> {
        let mut code = Self::zeros(bits.len())?;
        for (q, &b) in bits.iter().enumerate() {
            code.set(q, b);
        }
        Ok(code)
    }

    /// Builds a code from packed words. Set padding bits are rejected.
    pub fn from_words(words: Vec<u64>, len: usize) -> Result<Self> {
        check_len(len)?;
        if words.len() != words_for(len) {
            return Err(Error::LengthMismatch {
                expected: words_for(len) * WORD_BITS,
                found: words.len() * WORD_BITS,
            });
        }
        let code = Self {
            words: words.into_boxed_slice(),
            len,
        };
        let mut cleared = code.clone();
        cleared.clear_padding();
        if cleared != code {
            return Err(Error::Config(format!(
                "padding bits beyond bit {} must be zero",
                len - 1
            )));
        }
        Ok(code)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get(&self, q: usize) -> bool {
        assert!(q < self.len, "bit {q} out of range for {}-bit code", self.len);
        (self.words[q / WORD_BITS] >> (q % WORD_BITS)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, q: usize, bit: bool) {
        assert!(q < self.len, "bit {q} out of range for {}-bit code", self.len);
        let mask = 1u64 << (q % WORD_BITS);
        if bit {
            self.words[q / WORD_BITS] |= mask;
        } else {
            self.words[q / WORD_BITS] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, q: usize) {
        assert!(q < self.len, "bit {q} out of range for {}-bit code", self.len);
        self.words[q / WORD_BITS] ^= 1u64 << (q % WORD_BITS);
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    pub fn bits(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |q| self.get(q))
    }

    /// Distance to `other`, which must have the same length.
    pub fn distance(&self, other: &BinaryCode) -> Result<u32> {
        hamming_distance(self, other)
    }

    /// `[self; bit^s]`: appends `s` copies of `bit`.
    pub fn extended(&self, s: usize, bit: bool) -> Result<Self> {
        let mut out = Self::zeros(self.len + s)?;
        out.words[..self.words.len()].copy_from_slice(&self.words);
        if bit {
            for q in self.len..self.len + s {
                out.set(q, true);
            }
        }
        Ok(out)
    }

    fn clear_padding(&mut self) {
        let tail = self.len % WORD_BITS;
        if tail != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << tail) - 1;
            }
        }
    }
}

impl fmt::Display for BinaryCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.bits() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BinaryCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BinaryCode({self})")
    }
}

/// Parses a bit string; character `q` is bit `q`.
impl FromStr for BinaryCode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Config(format!("invalid bit character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_bits(&bits)
    }
}

/// Number of positions at which `a` and `b` differ.
pub fn hamming_distance(a: &BinaryCode, b: &BinaryCode) -> Result<u32> {
    if a.len != b.len {
        return Err(Error::LengthMismatch {
            expected: a.len,
            found: b.len,
        });
    }
    Ok(xor_popcount(&a.words, &b.words))
}

/// A non-empty collection of codes sharing one length.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CodeSet {
    code_len: usize,
    codes: Vec<BinaryCode>,
}

impl CodeSet {
    pub fn new(code_len: usize, codes: Vec<BinaryCode>) -> Result<Self> {
        check_len(code_len)?;
        if codes.is_empty() {
            return Err(Error::EmptyCodeSet);
        }
        if let Some(bad) = codes.iter().find(|c| c.len() != code_len) {
            return Err(Error::LengthMismatch {
                expected: code_len,
                found: bad.len(),
            });
        }
        Ok(Self { code_len, codes })
    }

    /// Parses one bit string per code.
    pub fn parse<S: AsRef<str>>(codes: &[S]) -> Result<Self> {
        let codes = codes
            .iter()
            .map(|s| s.as_ref().parse())
            .collect::<Result<Vec<BinaryCode>>>()?;
        let code_len = codes.first().map(BinaryCode::len).ok_or(Error::EmptyCodeSet)?;
        Self::new(code_len, codes)
    }

    #[inline]
    pub fn code_len(&self) -> usize {
        self.code_len
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> &BinaryCode {
        &self.codes[i]
    }

    pub fn codes(&self) -> &[BinaryCode] {
        &self.codes
    }

    pub fn iter(&self) -> std::slice::Iter<'_, BinaryCode> {
        self.codes.iter()
    }

    fn extended(&self, s: usize, bit: bool) -> Result<Self> {
        let codes = self
            .codes
            .iter()
            .map(|c| c.extended(s, bit))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            code_len: self.code_len + s,
            codes,
        })
    }
}

fn check_pair(db: &CodeSet, queries: &CodeSet, s: usize) -> Result<()> {
    if s == 0 {
        return Err(Error::ZeroExtension);
    }
    if db.code_len != queries.code_len {
        return Err(Error::LengthMismatch {
            expected: db.code_len,
            found: queries.code_len,
        });
    }
    Ok(())
}

/// Appends `s` one-bits to every database and query code. All pairwise
/// distances are unchanged.
pub fn same_extension(db: &CodeSet, queries: &CodeSet, s: usize) -> Result<(CodeSet, CodeSet)> {
    check_pair(db, queries, s)?;
    Ok((db.extended(s, true)?, queries.extended(s, true)?))
}

/// Appends `s` zero-bits to database codes and `s` one-bits to query codes.
/// Every database/query distance grows by exactly `s`.
pub fn different_extension(
    db: &CodeSet,
    queries: &CodeSet,
    s: usize,
) -> Result<(CodeSet, CodeSet)> {
    check_pair(db, queries, s)?;
    Ok((db.extended(s, false)?, queries.extended(s, true)?))
}

/// Per-point integer class ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Labels(Vec<u32>);

impl Labels {
    pub fn new(values: Vec<u32>) -> Self {
        Self(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<u32> {
        self.0
    }
}

impl From<Vec<u32>> for Labels {
    fn from(values: Vec<u32>) -> Self {
        Self(values)
    }
}

/// Sorted, duplicate-free database ids.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct NeighborSet(Arc<[usize]>);

impl NeighborSet {
    pub fn new(mut ids: Vec<usize>) -> Self {
        ids.sort_unstable();
        ids.dedup();
        Self(ids.into())
    }

    #[inline]
    pub fn contains(&self, id: usize) -> bool {
        self.0.binary_search(&id).is_ok()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

/// Ground-truth neighbor sets, one per query.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroundTruth {
    db_size: usize,
    sets: Vec<NeighborSet>,
}

impl GroundTruth {
    pub fn from_sets(db_size: usize, sets: Vec<NeighborSet>) -> Result<Self> {
        for set in &sets {
            if let Some(&id) = set.as_slice().last() {
                if id >= db_size {
                    return Err(Error::IdOutOfRange { id, db_size });
                }
            }
        }
        Ok(Self { db_size, sets })
    }

    pub fn from_lists(db_size: usize, lists: Vec<Vec<usize>>) -> Result<Self> {
        Self::from_sets(db_size, lists.into_iter().map(NeighborSet::new).collect())
    }

    pub fn db_size(&self) -> usize {
        self.db_size
    }

    pub fn num_queries(&self) -> usize {
        self.sets.len()
    }

    pub fn neighbors(&self, query: usize) -> &NeighborSet {
        &self.sets[query]
    }

    /// `N⁺_j`, the number of ground-truth neighbors of query `j`.
    pub fn n_plus(&self, query: usize) -> usize {
        self.sets[query].len()
    }
}

/// `i` neighbors `j` iff their class labels match.
pub fn ground_truth_from_labels(db_labels: &Labels, query_labels: &Labels) -> Result<GroundTruth> {
    if db_labels.is_empty() || query_labels.is_empty() {
        return Err(Error::Config("label lists must be non-empty".into()));
    }
    let mut by_label: HashMap<u32, Vec<usize>> = HashMap::new();
    for (i, &label) in db_labels.as_slice().iter().enumerate() {
        by_label.entry(label).or_default().push(i);
    }
    let by_label: HashMap<u32, NeighborSet> = by_label
        .into_iter()
        .map(|(label, ids)| (label, NeighborSet::new(ids)))
        .collect();
    let sets = query_labels
        .as_slice()
        .iter()
        .map(|label| by_label.get(label).cloned().unwrap_or_default())
        .collect();
    Ok(GroundTruth {
        db_size: db_labels.len(),
        sets,
    })
}
