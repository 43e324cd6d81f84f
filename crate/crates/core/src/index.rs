//! Inverted index over hash codes, Hamming-shell enumeration and
//! radius-expanding bucket search with probe accounting.

use std::collections::HashMap;
use std::time::Instant;

use rayon::prelude::*;

use crate::codes::{BinaryCode, CodeSet, NeighborSet};
use crate::cost::ProbeSchedule;
use crate::error::{Error, Result};

/// Cumulative probe budget past which shell enumeration is refused.
pub const DEFAULT_PROBE_BUDGET: u128 = 10_000_000;

/// All database ids sharing one exact code.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bucket {
    key: BinaryCode,
    ids: Vec<usize>,
}

impl Bucket {
    pub fn key(&self) -> &BinaryCode {
        &self.key
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Code value → database ids. Buckets are kept in order of first
/// appearance so iteration is deterministic.
#[derive(Clone, Debug)]
pub struct InvertedIndex {
    code_len: usize,
    db_size: usize,
    buckets: Vec<Bucket>,
    lookup: HashMap<Box<[u64]>, usize>,
    bucket_of: Vec<usize>,
}

impl InvertedIndex {
    pub fn build(db: &CodeSet) -> Self {
        let mut buckets: Vec<Bucket> = Vec::new();
        let mut lookup: HashMap<Box<[u64]>, usize> = HashMap::new();
        let mut bucket_of = Vec::with_capacity(db.len());
        for (id, code) in db.iter().enumerate() {
            let b = *lookup.entry(code.words().into()).or_insert_with(|| {
                buckets.push(Bucket {
                    key: code.clone(),
                    ids: Vec::new(),
                });
                buckets.len() - 1
            });
            buckets[b].ids.push(id);
            bucket_of.push(b);
        }
        Self {
            code_len: db.code_len(),
            db_size: db.len(),
            buckets,
            lookup,
            bucket_of,
        }
    }

    pub fn code_len(&self) -> usize {
        self.code_len
    }

    pub fn db_size(&self) -> usize {
        self.db_size
    }

    pub fn buckets(&self) -> &[Bucket] {
        &self.buckets
    }

    pub fn num_buckets(&self) -> usize {
        self.buckets.len()
    }

    /// Ids stored under `key`, if that bucket is occupied.
    pub fn get(&self, key: &BinaryCode) -> Option<&[usize]> {
        self.probe(key.words())
    }

    #[inline]
    fn probe(&self, words: &[u64]) -> Option<&[usize]> {
        self.lookup.get(words).map(|&b| self.buckets[b].ids.as_slice())
    }

    fn check_query(&self, query: &BinaryCode) -> Result<()> {
        if query.len() != self.code_len {
            return Err(Error::LengthMismatch {
                expected: self.code_len,
                found: query.len(),
            });
        }
        Ok(())
    }

    fn check_radius(&self, radius: usize) -> Result<()> {
        if radius > self.code_len {
            return Err(Error::RadiusOutOfRange {
                radius,
                code_len: self.code_len,
            });
        }
        Ok(())
    }

    /// Per-radius point and bucket counts plus each bucket's distance, from
    /// one pass over the occupied buckets.
    fn scan_profile(&self, query: &BinaryCode) -> ScanProfile {
        let mut points = vec![0usize; self.code_len + 1];
        let mut buckets = vec![0usize; self.code_len + 1];
        let dist: Vec<u32> = self
            .buckets
            .iter()
            .map(|b| {
                let d = crate::codes::xor_popcount(b.key.words(), query.words());
                points[d as usize] += b.ids.len();
                buckets[d as usize] += 1;
                d
            })
            .collect();
        ScanProfile {
            points,
            buckets,
            dist,
        }
    }

    pub fn search(&self, query: &BinaryCode, params: &SearchParams) -> Result<SearchResult> {
        self.check_query(query)?;
        self.check_radius(params.max_radius)?;
        let schedule = ProbeSchedule::new(self.code_len);
        let start = Instant::now();

        let mut ids = Vec::new();
        let mut radius_ends = Vec::new();
        let mut stats = ProbeStats::default();
        for r in 0..=params.max_radius {
            let needed = schedule.cumulative_saturating(r)?;
            if needed > params.budget {
                return Err(Error::ProbeBudgetExceeded {
                    radius: r,
                    needed,
                    budget: params.budget,
                });
            }
            let before = ids.len();
            let mut empty = 0u128;
            let mut shell = ShellIter::new(query.clone(), r);
            while let Some(bin) = shell.advance() {
                match self.probe(bin.words()) {
                    Some(found) => ids.extend_from_slice(found),
                    None => empty += 1,
                }
            }
            radius_ends.push(ids.len());
            stats.cumulative_probes.push(needed);
            stats.empty_bins.push(empty);
            stats.empty_shell.push(ids.len() == before);
            stats.wall_ns.push(start.elapsed().as_nanos() as u64);
            if ids.len() >= params.min_candidates {
                break;
            }
        }
        Ok(SearchResult {
            ids,
            radius_ends,
            stats,
        })
    }
}

struct ScanProfile {
    points: Vec<usize>,
    buckets: Vec<usize>,
    dist: Vec<u32>,
}

pub fn build_index(db: &CodeSet) -> InvertedIndex {
    InvertedIndex::build(db)
}

/// Lending iterator over the codes at Hamming distance exactly `r` from a
/// center. Flipped-position sets come out in lexicographic order.
#[derive(Clone, Debug)]
pub struct ShellIter {
    current: BinaryCode,
    positions: Vec<usize>,
    state: ShellState,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum ShellState {
    Fresh,
    Running,
    Done,
}

impl ShellIter {
    fn new(center: BinaryCode, r: usize) -> Self {
        debug_assert!(r <= center.len());
        Self {
            current: center,
            positions: (0..r).collect(),
            state: ShellState::Fresh,
        }
    }

    /// Shell radius.
    pub fn radius(&self) -> usize {
        self.positions.len()
    }

    /// Next code in the shell, borrowed from the iterator's scratch buffer.
    pub fn advance(&mut self) -> Option<&BinaryCode> {
        match self.state {
            ShellState::Done => return None,
            ShellState::Fresh => {
                for &p in &self.positions {
                    self.current.flip(p);
                }
                self.state = ShellState::Running;
                return Some(&self.current);
            }
            ShellState::Running => {}
        }
        let (q, r) = (self.current.len(), self.positions.len());
        let Some(i) = (0..r).rev().find(|&i| self.positions[i] < q - r + i) else {
            self.state = ShellState::Done;
            return None;
        };
        for &p in &self.positions[i..] {
            self.current.flip(p);
        }
        self.positions[i] += 1;
        for j in i + 1..r {
            self.positions[j] = self.positions[j - 1] + 1;
        }
        for &p in &self.positions[i..] {
            self.current.flip(p);
        }
        Some(&self.current)
    }
}

impl Iterator for ShellIter {
    type Item = BinaryCode;

    fn next(&mut self) -> Option<BinaryCode> {
        self.advance().cloned()
    }
}

/// Every code at distance exactly `r` from `center`.
pub fn enumerate_shell(center: &BinaryCode, r: usize) -> Result<ShellIter> {
    if r > center.len() {
        return Err(Error::RadiusOutOfRange {
            radius: r,
            code_len: center.len(),
        });
    }
    Ok(ShellIter::new(center.clone(), r))
}

/// Per-radius counts for one query: `n[r]` points at distance exactly `r`,
/// `n_plus[r]` of them ground-truth neighbors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShellHistogram {
    n: Vec<usize>,
    n_plus: Vec<usize>,
}

impl ShellHistogram {
    /// Both vectors cover radii `0..=Q`.
    pub fn from_counts(n: Vec<usize>, n_plus: Vec<usize>) -> Result<Self> {
        if n.len() != n_plus.len() || n.is_empty() {
            return Err(Error::LengthMismatch {
                expected: n.len(),
                found: n_plus.len(),
            });
        }
        if let Some(r) = (0..n.len()).find(|&r| n_plus[r] > n[r]) {
            return Err(Error::Config(format!(
                "shell {r} holds {} neighbors but only {} points",
                n_plus[r], n[r]
            )));
        }
        Ok(Self { n, n_plus })
    }

    pub fn code_len(&self) -> usize {
        self.n.len() - 1
    }

    pub fn n(&self) -> &[usize] {
        &self.n
    }

    pub fn n_plus(&self) -> &[usize] {
        &self.n_plus
    }

    /// `N`, the database size.
    pub fn total(&self) -> usize {
        self.n.iter().sum()
    }

    /// `N⁺_j`.
    pub fn relevant(&self) -> usize {
        self.n_plus.iter().sum()
    }

    /// Shifts every shell outward by `s`, as appending `s` disagreeing bits
    /// would.
    pub fn shifted(&self, s: usize) -> Self {
        let pad = |v: &[usize]| {
            let mut out = vec![0; s];
            out.extend_from_slice(v);
            out
        };
        Self {
            n: pad(&self.n),
            n_plus: pad(&self.n_plus),
        }
    }
}

/// How `shell_histogram` gathers its counts. Both routes give identical
/// results.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HistogramPath {
    /// Enumerate when the full `2^Q` probe sweep fits the budget, else scan.
    Auto { budget: u128 },
    /// Probe every bin shell by shell, stopping once all points are found.
    Enumerate,
    /// One distance computation per occupied bucket.
    Scan,
}

impl Default for HistogramPath {
    fn default() -> Self {
        HistogramPath::Auto {
            budget: DEFAULT_PROBE_BUDGET,
        }
    }
}

pub fn shell_histogram(
    index: &InvertedIndex,
    query: &BinaryCode,
    relevant: &NeighborSet,
) -> Result<ShellHistogram> {
    shell_histogram_with(index, query, relevant, HistogramPath::default())
}

pub fn shell_histogram_with(
    index: &InvertedIndex,
    query: &BinaryCode,
    relevant: &NeighborSet,
    path: HistogramPath,
) -> Result<ShellHistogram> {
    index.check_query(query)?;
    if let Some(&id) = relevant.as_slice().last() {
        if id >= index.db_size {
            return Err(Error::IdOutOfRange {
                id,
                db_size: index.db_size,
            });
        }
    }
    let enumerate = match path {
        HistogramPath::Enumerate => true,
        HistogramPath::Scan => false,
        HistogramPath::Auto { budget } => ProbeSchedule::new(index.code_len)
            .cumulative(index.code_len)?
            .is_some_and(|p| p <= budget),
    };
    let q = index.code_len;
    let mut n = vec![0usize; q + 1];
    let mut n_plus = vec![0usize; q + 1];
    if enumerate {
        let mut found = 0;
        for r in 0..=q {
            if found == index.db_size {
                break;
            }
            let mut shell = ShellIter::new(query.clone(), r);
            while let Some(bin) = shell.advance() {
                if let Some(ids) = index.probe(bin.words()) {
                    n[r] += ids.len();
                    n_plus[r] += ids.iter().filter(|&&id| relevant.contains(id)).count();
                }
            }
            found += n[r];
        }
    } else {
        let profile = index.scan_profile(query);
        n = profile.points;
        for &id in relevant.as_slice() {
            n_plus[profile.dist[index.bucket_of[id]] as usize] += 1;
        }
    }
    Ok(ShellHistogram { n, n_plus })
}

/// Histograms for every query, computed in parallel; output order follows
/// `queries`.
pub fn shell_histograms(
    index: &InvertedIndex,
    queries: &CodeSet,
    gt: &crate::codes::GroundTruth,
    path: HistogramPath,
) -> Result<Vec<ShellHistogram>> {
    if gt.num_queries() != queries.len() {
        return Err(Error::Config(format!(
            "ground truth covers {} queries, code set has {}",
            gt.num_queries(),
            queries.len()
        )));
    }
    if gt.db_size() != index.db_size {
        return Err(Error::Config(format!(
            "ground truth indexes {} database points, index holds {}",
            gt.db_size(),
            index.db_size
        )));
    }
    (0..queries.len())
        .into_par_iter()
        .map(|j| shell_histogram_with(index, queries.get(j), gt.neighbors(j), path))
        .collect()
}

/// Per-radius probe accounting for one bucket search.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ProbeStats {
    /// `P(r)` after finishing radius `r`.
    pub cumulative_probes: Vec<u128>,
    /// Probed bins at radius `r` that held no points.
    pub empty_bins: Vec<u128>,
    /// Whether the whole radius-`r` shell was empty.
    pub empty_shell: Vec<bool>,
    /// Elapsed wall-clock time at the end of radius `r`. Informational only.
    pub wall_ns: Vec<u64>,
}

impl ProbeStats {
    /// Last radius probed.
    pub fn last_radius(&self) -> Option<usize> {
        self.cumulative_probes.len().checked_sub(1)
    }

    pub fn total_probes(&self) -> u128 {
        self.cumulative_probes.last().copied().unwrap_or(0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchParams {
    pub max_radius: usize,
    pub min_candidates: usize,
    pub budget: u128,
}

impl SearchParams {
    pub fn new(max_radius: usize, min_candidates: usize) -> Self {
        Self {
            max_radius,
            min_candidates,
            budget: DEFAULT_PROBE_BUDGET,
        }
    }

    pub fn with_budget(mut self, budget: u128) -> Self {
        self.budget = budget;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SearchResult {
    ids: Vec<usize>,
    radius_ends: Vec<usize>,
    pub stats: ProbeStats,
}

impl SearchResult {
    /// Every retrieved id, grouped by ascending radius.
    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    /// Ids found at exactly radius `r`.
    pub fn at_radius(&self, r: usize) -> &[usize] {
        let end = self.radius_ends[r];
        let start = if r == 0 { 0 } else { self.radius_ends[r - 1] };
        &self.ids[start..end]
    }

    pub fn radii_probed(&self) -> usize {
        self.radius_ends.len()
    }
}

/// Probes shells `0, 1, ...` until at least `min_candidates` ids are
/// gathered or `max_radius` is done.
pub fn bucket_search(
    index: &InvertedIndex,
    query: &BinaryCode,
    max_radius: usize,
    min_candidates: usize,
) -> Result<SearchResult> {
    index.search(query, &SearchParams::new(max_radius, min_candidates))
}

/// Reading of "query with empty bins" at radius `r`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EmptyBinRule {
    /// The query's entire distance-`r` shell holds no points.
    #[default]
    Shell,
    /// At least one probed bin up to radius `r` was empty.
    AnyProbe,
}

/// For each `r ≤ up_to_radius`, how many queries meet `rule`.
pub fn empty_shell_counts(
    index: &InvertedIndex,
    queries: &CodeSet,
    up_to_radius: usize,
    rule: EmptyBinRule,
) -> Result<Vec<usize>> {
    index.check_radius(up_to_radius)?;
    if queries.code_len() != index.code_len {
        return Err(Error::LengthMismatch {
            expected: index.code_len,
            found: queries.code_len(),
        });
    }
    let schedule = ProbeSchedule::new(index.code_len);
    let flags: Vec<Vec<bool>> = queries
        .codes()
        .par_iter()
        .map(|query| {
            let profile = index.scan_profile(query);
            let mut seen_empty_bin = false;
            (0..=up_to_radius)
                .map(|r| match rule {
                    EmptyBinRule::Shell => profile.points[r] == 0,
                    EmptyBinRule::AnyProbe => {
                        // buckets at one distance are distinct bins of that shell
                        let bins = schedule.shell_size(r).expect("radius checked");
                        seen_empty_bin |= bins.is_none_or(|c| (profile.buckets[r] as u128) < c);
                        seen_empty_bin
                    }
                })
                .collect()
        })
        .collect();
    Ok((0..=up_to_radius)
        .map(|r| flags.iter().filter(|f| f[r]).count())
        .collect())
}
