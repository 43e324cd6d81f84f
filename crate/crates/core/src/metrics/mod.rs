//! Retrieval metrics over shell histograms.
//!
//! Every metric here is a function of the per-query counts `N_{j,r}` and
//! `N⁺_{j,r}`:
//!
//! * average precision along the distance-ranked list, where the order
//!   inside an equal-distance shell is fixed by a [`TiePolicy`];
//! * precision and recall of everything within radius `R`;
//! * time-penalized precision, i.e. precision divided by the cumulative
//!   probe count `Σ_{r≤R} C(Q, r)`;
//! * RAAP, the mean penalized precision over radii `0..=R`, and RAMAP, its
//!   mean over queries.
//!
//! An empty retrieval (no points within radius `R`) has precision 0.
//! Queries without ground-truth neighbors are left out of every query mean
//! and reported through [`QueryMean::excluded`].

mod oracle;
mod report;

pub use oracle::oracle_metrics;
pub use report::{evaluate, evaluate_histograms, EvalOptions, EvalReport, MetricCurve};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cost::ProbeSchedule;
use crate::error::{Error, Result};
use crate::index::ShellHistogram;

/// Order of points inside one equal-distance shell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TiePolicy {
    /// Ground-truth neighbors first.
    Optimistic,
    /// Ground-truth neighbors last.
    Pessimistic,
    /// Seeded shuffle of each shell.
    Random { seed: u64 },
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl TiePolicy {
    /// Seed for the shuffle of one shell.
    ///
    /// `group` is the shell's rank among the query's non-empty shells, not
    /// its radius, so shifting every distance by a constant replays the same
    /// shuffles.
    pub fn group_seed(master: u64, query: usize, group: usize) -> u64 {
        splitmix64(splitmix64(splitmix64(master) ^ query as u64) ^ group as u64)
    }

    /// Shell contents in ranked order, `true` for a neighbor. For the random
    /// policy the slots start neighbors-first and are then shuffled with
    /// `ChaCha8Rng::seed_from_u64(group_seed(..))`.
    pub fn arrange(&self, query: usize, group: usize, points: usize, relevant: usize) -> Vec<bool> {
        let mut slots = vec![false; points];
        match *self {
            TiePolicy::Optimistic => slots[..relevant].fill(true),
            TiePolicy::Pessimistic => slots[points - relevant..].fill(true),
            TiePolicy::Random { seed } => {
                slots[..relevant].fill(true);
                let mut rng = ChaCha8Rng::seed_from_u64(Self::group_seed(seed, query, group));
                slots.shuffle(&mut rng);
            }
        }
        slots
    }
}

/// Mean of a per-query value together with how many queries were left out
/// for having no ground-truth neighbors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QueryMean {
    pub value: f64,
    pub evaluated: usize,
    pub excluded: usize,
}

/// Sum of `precision(k)` over the neighbor positions `k` of each shell,
/// accumulated by radius and divided by `N⁺`. Entry `R` is the (truncated)
/// average precision of everything within radius `R`; the last entry is the
/// full-list value. Positions past `cutoff` contribute nothing.
pub(crate) fn ap_by_radius(
    hist: &ShellHistogram,
    policy: TiePolicy,
    query: usize,
    cutoff: Option<usize>,
) -> Result<Vec<f64>> {
    let n_plus_total = hist.relevant();
    if n_plus_total == 0 {
        return Err(Error::EmptyGroundTruth);
    }
    let cutoff = cutoff.unwrap_or(usize::MAX);
    let mut out = Vec::with_capacity(hist.n().len());
    let (mut seen, mut hits, mut sum) = (0usize, 0usize, 0.0f64);
    let mut group = 0usize;
    for (&n, &p) in hist.n().iter().zip(hist.n_plus()) {
        if n > 0 {
            match policy {
                TiePolicy::Optimistic | TiePolicy::Pessimistic => {
                    let offset = if policy == TiePolicy::Optimistic { 0 } else { n - p };
                    for i in 1..=p {
                        let pos = seen + offset + i;
                        if pos > cutoff {
                            break;
                        }
                        sum += (hits + i) as f64 / pos as f64;
                    }
                }
                TiePolicy::Random { .. } => {
                    let mut h = hits;
                    for (i, rel) in policy.arrange(query, group, n, p).into_iter().enumerate() {
                        let pos = seen + i + 1;
                        if pos > cutoff {
                            break;
                        }
                        if rel {
                            h += 1;
                            sum += h as f64 / pos as f64;
                        }
                    }
                }
            }
            seen += n;
            hits += p;
            group += 1;
        }
        out.push(sum / n_plus_total as f64);
    }
    Ok(out)
}

/// Average precision of the distance-ranked list, ties ordered by `policy`.
/// Random shuffles use query id 0; see [`average_precision_at`].
pub fn average_precision(hist: &ShellHistogram, policy: TiePolicy) -> Result<f64> {
    average_precision_at(hist, policy, 0, None)
}

/// Average precision for query `query`, optionally truncated to the first
/// `cutoff` ranked positions (still normalized by `N⁺`).
pub fn average_precision_at(
    hist: &ShellHistogram,
    policy: TiePolicy,
    query: usize,
    cutoff: Option<usize>,
) -> Result<f64> {
    Ok(*ap_by_radius(hist, policy, query, cutoff)?
        .last()
        .expect("histogram covers radius 0"))
}

fn mean_over_queries<F>(hists: &[ShellHistogram], per_query: F) -> Result<QueryMean>
where
    F: Fn(usize, &ShellHistogram) -> Result<f64> + Sync,
{
    let values = hists
        .par_iter()
        .enumerate()
        .filter(|(_, h)| h.relevant() > 0)
        .map(|(j, h)| per_query(j, h))
        .collect::<Result<Vec<f64>>>()?;
    if values.is_empty() {
        return Err(Error::NoValidQueries);
    }
    Ok(QueryMean {
        value: values.iter().sum::<f64>() / values.len() as f64,
        evaluated: values.len(),
        excluded: hists.len() - values.len(),
    })
}

/// Mean average precision over queries with at least one neighbor.
pub fn mean_average_precision(hists: &[ShellHistogram], policy: TiePolicy) -> Result<QueryMean> {
    mean_over_queries(hists, |j, h| average_precision_at(h, policy, j, None))
}

fn check_radius(hist: &ShellHistogram, radius: usize) -> Result<()> {
    if radius > hist.code_len() {
        return Err(Error::RadiusOutOfRange {
            radius,
            code_len: hist.code_len(),
        });
    }
    Ok(())
}

/// Fraction of neighbors among the points within radius `radius`.
pub fn precision_at_radius(hist: &ShellHistogram, radius: usize) -> Result<f64> {
    check_radius(hist, radius)?;
    let retrieved: usize = hist.n()[..=radius].iter().sum();
    let hits: usize = hist.n_plus()[..=radius].iter().sum();
    Ok(if retrieved == 0 {
        0.0
    } else {
        hits as f64 / retrieved as f64
    })
}

/// Fraction of the `n_plus` neighbors found within radius `radius`.
pub fn recall_at_radius(hist: &ShellHistogram, radius: usize, n_plus: usize) -> Result<f64> {
    check_radius(hist, radius)?;
    if n_plus == 0 {
        return Err(Error::EmptyGroundTruth);
    }
    let hits: usize = hist.n_plus()[..=radius].iter().sum();
    Ok(hits as f64 / n_plus as f64)
}

fn check_penalty_radius(hist: &ShellHistogram, radius: usize, q_bits: usize) -> Result<()> {
    check_radius(hist, radius)?;
    if radius > q_bits {
        return Err(Error::RadiusOutOfRange {
            radius,
            code_len: q_bits,
        });
    }
    Ok(())
}

/// Precision at `radius` divided by the probes needed to reach it.
pub fn penalized_precision(hist: &ShellHistogram, radius: usize, q_bits: usize) -> Result<f64> {
    check_penalty_radius(hist, radius, q_bits)?;
    let schedule = ProbeSchedule::new(q_bits);
    Ok(precision_at_radius(hist, radius)? * schedule.penalty(radius)?)
}

/// Which radii RAAP averages over.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RaapMode {
    /// Every radius `0..=R`, empty shells included.
    #[default]
    AllRadii,
    /// Only radii whose shell holds at least one point; 0 if there are none.
    SkipEmpty,
}

/// RAAP for every radius `0..=max_radius` in one pass.
pub(crate) fn raap_curve(
    hist: &ShellHistogram,
    max_radius: usize,
    schedule: &ProbeSchedule,
    mode: RaapMode,
) -> Result<Vec<f64>> {
    check_penalty_radius(hist, max_radius, schedule.code_len())?;
    let mut out = Vec::with_capacity(max_radius + 1);
    let (mut retrieved, mut hits) = (0usize, 0usize);
    let (mut sum, mut terms) = (0.0f64, 0usize);
    for r in 0..=max_radius {
        retrieved += hist.n()[r];
        hits += hist.n_plus()[r];
        if mode == RaapMode::AllRadii || hist.n()[r] > 0 {
            let precision = if retrieved == 0 {
                0.0
            } else {
                hits as f64 / retrieved as f64
            };
            sum += precision * schedule.penalty(r)?;
            terms += 1;
        }
        out.push(if terms == 0 { 0.0 } else { sum / terms as f64 });
    }
    Ok(out)
}

/// Radius-aware average precision: mean penalized precision over radii
/// `0..=radius`.
pub fn raap(hist: &ShellHistogram, radius: usize, q_bits: usize) -> Result<f64> {
    raap_with(hist, radius, q_bits, RaapMode::AllRadii)
}

pub fn raap_with(hist: &ShellHistogram, radius: usize, q_bits: usize, mode: RaapMode) -> Result<f64> {
    check_penalty_radius(hist, radius, q_bits)?;
    let schedule = ProbeSchedule::new(q_bits);
    Ok(*raap_curve(hist, radius, &schedule, mode)?.last().expect("radius 0 present"))
}

/// Mean RAAP over queries with at least one neighbor.
pub fn ramap(hists: &[ShellHistogram], radius: usize, q_bits: usize) -> Result<QueryMean> {
    ramap_with(hists, radius, q_bits, RaapMode::AllRadii)
}

pub fn ramap_with(
    hists: &[ShellHistogram],
    radius: usize,
    q_bits: usize,
    mode: RaapMode,
) -> Result<QueryMean> {
    let schedule = ProbeSchedule::new(q_bits);
    mean_over_queries(hists, |_, h| {
        Ok(*raap_curve(h, radius, &schedule, mode)?.last().expect("radius 0 present"))
    })
}

/// Spread of MAP over admissible tie orders.
#[derive(Clone, Debug, PartialEq)]
pub struct MapUncertainty {
    /// MAP with neighbors last in every shell.
    pub min: f64,
    /// MAP with neighbors first in every shell.
    pub max: f64,
    /// MAP under `n_random` seeded shuffles.
    pub samples: Vec<f64>,
}

impl MapUncertainty {
    pub fn spread(&self) -> f64 {
        self.max - self.min
    }
}

/// Sample `i` uses master seed `seed + i`.
pub fn map_uncertainty(hists: &[ShellHistogram], n_random: usize, seed: u64) -> Result<MapUncertainty> {
    let min = mean_average_precision(hists, TiePolicy::Pessimistic)?.value;
    let max = mean_average_precision(hists, TiePolicy::Optimistic)?.value;
    let samples = (0..n_random as u64)
        .map(|i| {
            mean_average_precision(hists, TiePolicy::Random { seed: seed.wrapping_add(i) })
                .map(|m| m.value)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MapUncertainty { min, max, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn hist(n: &[usize], p: &[usize]) -> ShellHistogram {
        ShellHistogram::from_counts(n.to_vec(), p.to_vec()).unwrap()
    }

    /// AP of an explicit ranked relevance list.
    fn ap_of(list: &[bool], n_plus: usize) -> f64 {
        let mut hits = 0;
        let mut sum = 0.0;
        for (k, &rel) in list.iter().enumerate() {
            if rel {
                hits += 1;
                sum += hits as f64 / (k + 1) as f64;
            }
        }
        sum / n_plus as f64
    }

    /// Every distinct within-shell arrangement of a histogram.
    fn all_orderings(h: &ShellHistogram) -> Vec<Vec<bool>> {
        let mut lists = vec![vec![]];
        for (&n, &p) in h.n().iter().zip(h.n_plus()) {
            let mut shells = Vec::new();
            for mask in 0u32..(1 << n) {
                if mask.count_ones() as usize == p {
                    shells.push((0..n).map(|i| mask >> i & 1 == 1).collect::<Vec<_>>());
                }
            }
            lists = lists
                .iter()
                .flat_map(|l| {
                    shells.iter().map(move |s| {
                        let mut l = l.clone();
                        l.extend_from_slice(s);
                        l
                    })
                })
                .collect();
        }
        lists
    }

    #[test]
    fn ap_examples() {
        let single = hist(&[1, 0], &[1, 0]);
        for policy in [TiePolicy::Optimistic, TiePolicy::Pessimistic, TiePolicy::Random { seed: 3 }] {
            assert_eq!(average_precision(&single, policy).unwrap(), 1.0);
        }

        let mixed = hist(&[2, 0], &[1, 0]);
        let aps: Vec<f64> = all_orderings(&mixed).iter().map(|l| ap_of(l, 1)).collect();
        assert_eq!(aps.iter().cloned().fold(f64::MIN, f64::max), 1.0);
        assert_eq!(aps.iter().cloned().fold(f64::MAX, f64::min), 0.5);
        assert_eq!(average_precision(&mixed, TiePolicy::Optimistic).unwrap(), 1.0);
        assert_eq!(average_precision(&mixed, TiePolicy::Pessimistic).unwrap(), 0.5);

        assert_eq!(
            average_precision(&hist(&[3, 1], &[0, 0]), TiePolicy::Optimistic).unwrap_err(),
            Error::EmptyGroundTruth
        );
    }

    #[test]
    fn ap_policies_bound_every_ordering() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..200 {
            let q = rng.random_range(1..=4usize);
            let n: Vec<usize> = (0..=q).map(|_| rng.random_range(0..=3usize)).collect();
            let p: Vec<usize> = n.iter().map(|&x| rng.random_range(0..=x)).collect();
            if p.iter().sum::<usize>() == 0 {
                continue;
            }
            let h = hist(&n, &p);
            let aps: Vec<f64> = all_orderings(&h).iter().map(|l| ap_of(l, h.relevant())).collect();
            let lo = aps.iter().cloned().fold(f64::MAX, f64::min);
            let hi = aps.iter().cloned().fold(f64::MIN, f64::max);
            let opt = average_precision(&h, TiePolicy::Optimistic).unwrap();
            let pes = average_precision(&h, TiePolicy::Pessimistic).unwrap();
            assert!((opt - hi).abs() < 1e-12 && (pes - lo).abs() < 1e-12);
            for seed in 0..5 {
                let r = average_precision_at(&h, TiePolicy::Random { seed }, 7, None).unwrap();
                assert!(aps.iter().any(|a| (a - r).abs() < 1e-12));
                assert!(pes <= r + 1e-15 && r <= opt + 1e-15);
            }
        }
    }

    #[test]
    fn ap_cutoff_truncates_positions() {
        // ranked (optimistic): R R . | R .
        let h = hist(&[3, 2], &[2, 1]);
        let full = 1.0 + 1.0 + 3.0 / 4.0;
        assert!((average_precision(&h, TiePolicy::Optimistic).unwrap() - full / 3.0).abs() < 1e-15);
        let top3 = average_precision_at(&h, TiePolicy::Optimistic, 0, Some(3)).unwrap();
        assert!((top3 - 2.0 / 3.0).abs() < 1e-15);
        let curve = ap_by_radius(&h, TiePolicy::Optimistic, 0, None).unwrap();
        assert!((curve[0] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn map_examples() {
        let one = vec![hist(&[1, 0], &[1, 0])];
        let m = mean_average_precision(&one, TiePolicy::Optimistic).unwrap();
        assert_eq!((m.value, m.evaluated, m.excluded), (1.0, 1, 0));

        let two = vec![hist(&[1, 0], &[1, 0]), hist(&[2, 0], &[1, 0]), hist(&[1, 1], &[0, 0])];
        let m = mean_average_precision(&two, TiePolicy::Pessimistic).unwrap();
        assert_eq!((m.value, m.evaluated, m.excluded), (0.75, 2, 1));

        let none = vec![hist(&[1, 1], &[0, 0])];
        assert_eq!(
            mean_average_precision(&none, TiePolicy::Optimistic).unwrap_err(),
            Error::NoValidQueries
        );
    }

    #[test]
    fn map_ignores_distance_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let q = rng.random_range(1..=8usize);
            let hs: Vec<ShellHistogram> = (0..5)
                .map(|_| {
                    let n: Vec<usize> = (0..=q).map(|_| rng.random_range(0..=20usize)).collect();
                    let p: Vec<usize> = n.iter().map(|&x| rng.random_range(0..=x)).collect();
                    hist(&n, &p)
                })
                .collect();
            let shifted: Vec<ShellHistogram> = hs.iter().map(|h| h.shifted(3)).collect();
            for policy in [TiePolicy::Optimistic, TiePolicy::Pessimistic, TiePolicy::Random { seed: 5 }] {
                match mean_average_precision(&hs, policy) {
                    Ok(a) => assert_eq!(a, mean_average_precision(&shifted, policy).unwrap()),
                    Err(e) => assert_eq!(e, Error::NoValidQueries),
                }
            }
        }
    }

    #[test]
    fn precision_recall_examples() {
        let h = hist(&[1, 1, 1], &[1, 0, 1]);
        assert_eq!(precision_at_radius(&h, 0).unwrap(), 1.0);
        assert_eq!(precision_at_radius(&h, 1).unwrap(), 0.5);
        assert_eq!(precision_at_radius(&h, 2).unwrap(), 2.0 / 3.0);
        assert_eq!(recall_at_radius(&h, 0, 2).unwrap(), 0.5);
        assert_eq!(recall_at_radius(&h, 1, 2).unwrap(), 0.5);
        assert_eq!(recall_at_radius(&h, 2, 2).unwrap(), 1.0);
        assert_eq!(recall_at_radius(&h, 2, 0).unwrap_err(), Error::EmptyGroundTruth);
        assert!(matches!(precision_at_radius(&h, 3), Err(Error::RadiusOutOfRange { .. })));

        // full radius gives N⁺ / N
        let h = hist(&[2, 3, 5], &[1, 1, 2]);
        assert_eq!(precision_at_radius(&h, 2).unwrap(), 0.4);

        // empty ball
        let h = hist(&[0, 0, 3], &[0, 0, 1]);
        assert_eq!(precision_at_radius(&h, 0).unwrap(), 0.0);
        assert_eq!(precision_at_radius(&h, 1).unwrap(), 0.0);
    }

    #[test]
    fn penalized_precision_examples() {
        let h = hist(&[1, 1, 1], &[1, 0, 1]);
        assert_eq!(penalized_precision(&h, 0, 2).unwrap(), precision_at_radius(&h, 0).unwrap());
        assert!((penalized_precision(&h, 1, 2).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        assert!((penalized_precision(&h, 2, 2).unwrap() - (2.0 / 3.0) / 4.0).abs() < 1e-15);
        let mut last = f64::MAX;
        for q in 2..40 {
            let v = penalized_precision(&h, 1, q).unwrap();
            assert!(v < last);
            last = v;
        }
        assert!(penalized_precision(&h, 2, 1).is_err());
        for r in 1..=2 {
            assert!(penalized_precision(&h, r, 2).unwrap() < precision_at_radius(&h, r).unwrap());
        }
    }

    #[test]
    fn raap_examples() {
        // db = {00 relevant, 01 irrelevant, 11 relevant}, query 00
        let h = hist(&[1, 1, 1], &[1, 0, 1]);
        assert_eq!(raap(&h, 0, 2).unwrap(), 1.0);
        assert!((raap(&h, 1, 2).unwrap() - 7.0 / 12.0).abs() < 1e-15);
        assert!((raap(&h, 2, 2).unwrap() - 4.0 / 9.0).abs() < 1e-15);

        // perfect bucket at 0, nothing else: precision stays 1, penalty grows
        let h = hist(&[2, 0, 0, 0], &[2, 0, 0, 0]);
        let expected = (1.0 + 1.0 / 4.0 + 1.0 / 7.0 + 1.0 / 8.0) / 4.0;
        assert!((raap(&h, 3, 3).unwrap() - expected).abs() < 1e-15);
        assert_eq!(raap_with(&h, 3, 3, RaapMode::SkipEmpty).unwrap(), 1.0);

        // different-extension style: nothing until radius 2
        let h = hist(&[0, 0, 1], &[0, 0, 1]);
        assert_eq!(raap(&h, 0, 2).unwrap(), 0.0);
        assert!((raap(&h, 2, 2).unwrap() - (1.0 / 4.0) / 3.0).abs() < 1e-15);
        assert!((raap_with(&h, 2, 2, RaapMode::SkipEmpty).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(raap_with(&h, 1, 2, RaapMode::SkipEmpty).unwrap(), 0.0);
    }

    #[test]
    fn ramap_examples() {
        let hs = vec![hist(&[1, 1, 1], &[1, 0, 1]), hist(&[2, 1, 0], &[1, 1, 0]), hist(&[1, 2, 0], &[0, 0, 0])];
        let m0 = ramap(&hs, 0, 2).unwrap();
        assert_eq!(m0.excluded, 1);
        let p0 = (precision_at_radius(&hs[0], 0).unwrap() + precision_at_radius(&hs[1], 0).unwrap()) / 2.0;
        assert!((m0.value - p0).abs() < 1e-15);
        let single = ramap(&hs[..1], 2, 2).unwrap();
        assert_eq!(single.value, raap(&hs[0], 2, 2).unwrap());
    }

    #[test]
    fn uncertainty_examples() {
        let pure = vec![hist(&[2, 3], &[2, 0]), hist(&[1, 1], &[0, 1])];
        let u = map_uncertainty(&pure, 4, 1).unwrap();
        assert_eq!(u.min, u.max);
        assert!(u.samples.iter().all(|&s| s == u.min));

        let mixed = vec![hist(&[2, 0], &[1, 0])];
        let u = map_uncertainty(&mixed, 16, 9).unwrap();
        assert_eq!((u.min, u.max), (0.5, 1.0));
        assert!(u.spread() > 0.0);
        assert_eq!(u.samples.len(), 16);
        assert!(u.samples.iter().all(|&s| s == 0.5 || s == 1.0));
        assert!(u.samples.contains(&0.5) && u.samples.contains(&1.0));
    }

    #[test]
    fn random_policy_is_reproducible() {
        let h = hist(&[10, 7, 12], &[4, 3, 5]);
        let a = average_precision_at(&h, TiePolicy::Random { seed: 1 }, 3, None).unwrap();
        let b = average_precision_at(&h, TiePolicy::Random { seed: 1 }, 3, None).unwrap();
        assert_eq!(a, b);
        assert_ne!(TiePolicy::group_seed(1, 3, 0), TiePolicy::group_seed(1, 3, 1));
        assert_ne!(TiePolicy::group_seed(1, 3, 0), TiePolicy::group_seed(1, 4, 0));
    }
}
