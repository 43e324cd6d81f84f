//! Brute-force reference for [`super::evaluate`].
//!
//! Computes the full query × database distance matrix bit by bit, sorts an
//! explicit ranked list per query and evaluates each metric straight from
//! its definition. It shares no code with the index or histogram path; the
//! only common piece is the tie-shuffle seeding rule, which is part of what
//! a random tie order means.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{EvalOptions, EvalReport, MetricCurve, RaapMode, TiePolicy};
use crate::codes::{BinaryCode, CodeSet, GroundTruth};
use crate::error::{Error, Result};
use crate::index::EmptyBinRule;

fn bit_distance(a: &BinaryCode, b: &BinaryCode) -> usize {
    (0..a.len()).filter(|&q| a.get(q) != b.get(q)).count()
}

/// `Σ_{r≤R} C(Q, r)` for every `R`, from Pascal's triangle in `f64`.
fn probe_sums(q: usize) -> Vec<f64> {
    let mut row = vec![1.0f64];
    for n in 1..=q {
        let mut next = vec![1.0; n + 1];
        for k in 1..n {
            next[k] = row[k - 1] + row[k];
        }
        row = next;
    }
    row.iter()
        .scan(0.0, |acc, c| {
            *acc += c;
            Some(*acc)
        })
        .collect()
}

/// Relevance flags of a ranked list plus each entry's distance.
fn ranked(items: &[(usize, usize, bool)], policy: TiePolicy, query: usize) -> Vec<(usize, bool)> {
    let mut items = items.to_vec();
    match policy {
        TiePolicy::Optimistic => {
            items.sort_by_key(|&(d, id, rel)| (d, !rel, id));
            items.iter().map(|&(d, _, rel)| (d, rel)).collect()
        }
        TiePolicy::Pessimistic => {
            items.sort_by_key(|&(d, id, rel)| (d, rel, id));
            items.iter().map(|&(d, _, rel)| (d, rel)).collect()
        }
        TiePolicy::Random { seed } => {
            items.sort_by_key(|&(d, id, rel)| (d, !rel, id));
            let mut out = Vec::with_capacity(items.len());
            for (group, chunk) in items.chunk_by(|a, b| a.0 == b.0).enumerate() {
                let mut flags: Vec<bool> = chunk.iter().map(|&(_, _, rel)| rel).collect();
                let mut rng = ChaCha8Rng::seed_from_u64(TiePolicy::group_seed(seed, query, group));
                flags.shuffle(&mut rng);
                out.extend(flags.into_iter().map(|rel| (chunk[0].0, rel)));
            }
            out
        }
    }
}

/// AP restricted to entries within each radius `0..=q`.
fn ap_by_radius(list: &[(usize, bool)], n_plus: usize, q: usize, cutoff: Option<usize>) -> Vec<f64> {
    let cutoff = cutoff.unwrap_or(usize::MAX);
    (0..=q)
        .map(|radius| {
            let mut hits = 0;
            let mut sum = 0.0;
            for (k, &(d, rel)) in list.iter().enumerate() {
                if rel {
                    hits += 1;
                    if d <= radius && k < cutoff {
                        sum += hits as f64 / (k + 1) as f64;
                    }
                }
            }
            sum / n_plus as f64
        })
        .collect()
}

/// Recomputes every [`EvalReport`] field by exhaustive scan.
pub fn oracle_metrics(
    db: &CodeSet,
    queries: &CodeSet,
    gt: &GroundTruth,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    let q = db.code_len();
    if queries.code_len() != q {
        return Err(Error::LengthMismatch {
            expected: q,
            found: queries.code_len(),
        });
    }
    let rows = opts.max_radius.min(q) + 1;
    let probe_sums = probe_sums(q);

    let mut map_opt = vec![0.0; q + 1];
    let mut map_pes = vec![0.0; q + 1];
    let mut map_rand = vec![vec![0.0; q + 1]; opts.random_ties];
    let mut precision = vec![0.0; rows];
    let mut recall = vec![0.0; rows];
    let mut ramap = vec![0.0; rows];
    let mut empty = vec![0usize; rows];
    let mut evaluated = 0usize;

    for (j, query) in queries.iter().enumerate() {
        let items: Vec<(usize, usize, bool)> = db
            .iter()
            .enumerate()
            .map(|(i, code)| (bit_distance(code, query), i, gt.neighbors(j).contains(i)))
            .collect();

        let mut any_empty_bin = false;
        for (r, slot) in empty.iter_mut().enumerate() {
            let at_r: HashSet<&BinaryCode> = items
                .iter()
                .filter(|it| it.0 == r)
                .map(|it| db.get(it.1))
                .collect();
            let flag = match opts.empty_rule {
                EmptyBinRule::Shell => at_r.is_empty(),
                EmptyBinRule::AnyProbe => {
                    let bins = probe_sums[r] - if r == 0 { 0.0 } else { probe_sums[r - 1] };
                    any_empty_bin |= (at_r.len() as f64) < bins;
                    any_empty_bin
                }
            };
            if flag {
                *slot += 1;
            }
        }

        let n_plus = items.iter().filter(|it| it.2).count();
        if n_plus == 0 {
            continue;
        }
        evaluated += 1;

        let add = |acc: &mut [f64], vals: &[f64]| acc.iter_mut().zip(vals).for_each(|(a, v)| *a += v);
        add(&mut map_opt, &ap_by_radius(&ranked(&items, TiePolicy::Optimistic, j), n_plus, q, opts.map_cutoff));
        add(&mut map_pes, &ap_by_radius(&ranked(&items, TiePolicy::Pessimistic, j), n_plus, q, opts.map_cutoff));
        for (i, acc) in map_rand.iter_mut().enumerate() {
            let policy = TiePolicy::Random {
                seed: opts.seed.wrapping_add(i as u64),
            };
            add(acc, &ap_by_radius(&ranked(&items, policy, j), n_plus, q, opts.map_cutoff));
        }

        let prec_at = |radius: usize| {
            let within: Vec<_> = items.iter().filter(|it| it.0 <= radius).collect();
            let hits = within.iter().filter(|it| it.2).count();
            if within.is_empty() {
                0.0
            } else {
                hits as f64 / within.len() as f64
            }
        };
        for radius in 0..rows {
            precision[radius] += prec_at(radius);
            recall[radius] += items.iter().filter(|it| it.0 <= radius && it.2).count() as f64 / n_plus as f64;
            let terms: Vec<f64> = (0..=radius)
                .filter(|&r| opts.raap_mode == RaapMode::AllRadii || items.iter().any(|it| it.0 == r))
                .map(|r| prec_at(r) / probe_sums[r])
                .collect();
            ramap[radius] += if terms.is_empty() {
                0.0
            } else {
                terms.iter().sum::<f64>() / terms.len() as f64
            };
        }
    }
    if evaluated == 0 {
        return Err(Error::NoValidQueries);
    }

    let m = evaluated as f64;
    let scale = |v: Vec<f64>| -> Vec<f64> { v.into_iter().map(|x| x / m).collect() };
    let curve = |v: &[f64]| MetricCurve::new(v[..rows].iter().map(|&x| Some(x)).collect());
    let map_opt = scale(map_opt);
    let map_pes = scale(map_pes);
    let map_rand: Vec<Vec<f64>> = map_rand.into_iter().map(scale).collect();
    let rand_mean = if map_rand.is_empty() {
        MetricCurve::new(vec![None; rows])
    } else {
        let k = map_rand.len() as f64;
        MetricCurve::new(
            (0..rows)
                .map(|r| Some(map_rand.iter().map(|c| c[r]).sum::<f64>() / k))
                .collect(),
        )
    };
    Ok(EvalReport {
        code_len: q,
        evaluated_queries: evaluated,
        excluded_queries: queries.len() - evaluated,
        map_optimistic: map_opt[q],
        map_pessimistic: map_pes[q],
        map_random: map_rand.iter().map(|c| c[q]).collect(),
        map_optimistic_curve: curve(&map_opt),
        map_pessimistic_curve: curve(&map_pes),
        map_random_mean_curve: rand_mean,
        precision: curve(&scale(precision)),
        recall: curve(&scale(recall)),
        ramap: curve(&scale(ramap)),
        probes: probe_sums[..rows].iter().map(|&p| Some(p as u128)).collect(),
        empty_shells: empty.into_iter().map(Some).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::ground_truth_from_labels;

    #[test]
    fn three_point_instance() {
        let db = CodeSet::parse(&["00", "01", "11"]).unwrap();
        let queries = CodeSet::parse(&["00"]).unwrap();
        let gt = GroundTruth::from_lists(3, vec![vec![0, 2]]).unwrap();
        let rep = oracle_metrics(&db, &queries, &gt, &EvalOptions::default()).unwrap();
        let ramap: Vec<f64> = rep.ramap.values().iter().map(|v| v.unwrap()).collect();
        assert_eq!(ramap[0], 1.0);
        assert!((ramap[1] - 7.0 / 12.0).abs() < 1e-15);
        assert!((ramap[2] - 4.0 / 9.0).abs() < 1e-15);
        assert_eq!(rep.probes, vec![Some(1), Some(3), Some(4)]);
    }

    #[test]
    fn excludes_queries_without_neighbors() {
        let db = CodeSet::parse(&["00", "01"]).unwrap();
        let queries = CodeSet::parse(&["00", "11"]).unwrap();
        let gt = ground_truth_from_labels(&vec![1, 1].into(), &vec![1, 2].into()).unwrap();
        let rep = oracle_metrics(&db, &queries, &gt, &EvalOptions::default()).unwrap();
        assert_eq!((rep.evaluated_queries, rep.excluded_queries), (1, 1));

        let gt = ground_truth_from_labels(&vec![1, 1].into(), &vec![3, 2].into()).unwrap();
        assert_eq!(
            oracle_metrics(&db, &queries, &gt, &EvalOptions::default()).unwrap_err(),
            Error::NoValidQueries
        );
    }
}
