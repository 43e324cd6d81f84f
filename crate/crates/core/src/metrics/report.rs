use rayon::prelude::*;

use super::{ap_by_radius, raap_curve, RaapMode, TiePolicy};
use crate::codes::{CodeSet, GroundTruth};
use crate::cost::ProbeSchedule;
use crate::error::{Error, Result};
use crate::index::{
    empty_shell_counts, shell_histograms, EmptyBinRule, HistogramPath, InvertedIndex,
    ShellHistogram,
};

/// Values by radius; `None` marks radii beyond a code length.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricCurve(Vec<Option<f64>>);

impl MetricCurve {
    pub fn new(values: Vec<Option<f64>>) -> Self {
        Self(values)
    }

    fn from_values(values: Vec<f64>) -> Self {
        Self(values.into_iter().map(Some).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, radius: usize) -> Option<f64> {
        self.0.get(radius).copied().flatten()
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.0
    }

    /// Extends with not-available entries up to `len` radii.
    pub fn padded(&self, len: usize) -> Self {
        let mut v = self.0.clone();
        v.resize(len.max(v.len()), None);
        Self(v)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalOptions {
    /// Curves cover radii `0..=min(max_radius, Q)`.
    pub max_radius: usize,
    /// Number of seeded random tie orders sampled for MAP.
    pub random_ties: usize,
    /// Sample `i` uses master seed `seed + i`.
    pub seed: u64,
    /// Truncate the full-list MAP to the first `k` ranked positions.
    pub map_cutoff: Option<usize>,
    pub empty_rule: EmptyBinRule,
    pub raap_mode: RaapMode,
    pub histogram_path: HistogramPath,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            max_radius: usize::MAX,
            random_ties: 10,
            seed: 0,
            map_cutoff: None,
            empty_rule: EmptyBinRule::Shell,
            raap_mode: RaapMode::AllRadii,
            histogram_path: HistogramPath::default(),
        }
    }
}

/// All metric curves for one code set, indexed by radius.
///
/// The `map_*_curve` entries at radius `R` are average precision restricted
/// to the points within radius `R` (still normalized by `N⁺`); at `R = Q`
/// they equal the full-list MAP.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub code_len: usize,
    pub evaluated_queries: usize,
    pub excluded_queries: usize,
    pub map_optimistic: f64,
    pub map_pessimistic: f64,
    pub map_random: Vec<f64>,
    pub map_optimistic_curve: MetricCurve,
    pub map_pessimistic_curve: MetricCurve,
    pub map_random_mean_curve: MetricCurve,
    pub precision: MetricCurve,
    pub recall: MetricCurve,
    pub ramap: MetricCurve,
    /// Cumulative probe count `Σ_{r≤R} C(Q, r)`, saturating at `u128::MAX`.
    pub probes: Vec<Option<u128>>,
    /// Queries (all of them, neighbors or not) meeting the empty-bin rule.
    pub empty_shells: Vec<Option<usize>>,
}

impl EvalReport {
    /// Number of radius rows.
    pub fn radii(&self) -> usize {
        self.precision.len()
    }

    pub fn map_spread(&self) -> f64 {
        self.map_optimistic - self.map_pessimistic
    }

    pub fn map_random_mean(&self) -> Option<f64> {
        (!self.map_random.is_empty())
            .then(|| self.map_random.iter().sum::<f64>() / self.map_random.len() as f64)
    }

    /// Extends every curve to `rows` radii with not-available entries, for
    /// side-by-side comparison with longer codes.
    pub fn padded(&self, rows: usize) -> Self {
        let mut out = self.clone();
        for curve in [
            &mut out.map_optimistic_curve,
            &mut out.map_pessimistic_curve,
            &mut out.map_random_mean_curve,
            &mut out.precision,
            &mut out.recall,
            &mut out.ramap,
        ] {
            *curve = curve.padded(rows);
        }
        out.probes.resize(rows.max(out.probes.len()), None);
        out.empty_shells.resize(rows.max(out.empty_shells.len()), None);
        out
    }
}

struct QueryCurves {
    map_opt: Vec<f64>,
    map_pes: Vec<f64>,
    map_rand: Vec<Vec<f64>>,
    precision: Vec<f64>,
    recall: Vec<f64>,
    raap: Vec<f64>,
}

fn mean_columns<'a>(rows: impl Iterator<Item = &'a [f64]>, len: usize, count: usize) -> Vec<f64> {
    let mut sums = vec![0.0; len];
    for row in rows {
        for (s, v) in sums.iter_mut().zip(row) {
            *s += v;
        }
    }
    sums.iter().map(|s| s / count as f64).collect()
}

/// Builds every curve from precomputed histograms. Empty-shell counts use
/// the shell rule here; [`evaluate`] can apply the probe rule from the index.
pub fn evaluate_histograms(hists: &[ShellHistogram], opts: &EvalOptions) -> Result<EvalReport> {
    let code_len = hists.first().ok_or(Error::NoValidQueries)?.code_len();
    if let Some(h) = hists.iter().find(|h| h.code_len() != code_len) {
        return Err(Error::LengthMismatch {
            expected: code_len,
            found: h.code_len(),
        });
    }
    let top = opts.max_radius.min(code_len);
    let rows = top + 1;
    let schedule = ProbeSchedule::new(code_len);

    let per_query: Vec<QueryCurves> = hists
        .par_iter()
        .enumerate()
        .filter(|(_, h)| h.relevant() > 0)
        .map(|(j, h)| {
            let cut = opts.map_cutoff;
            let map_rand = (0..opts.random_ties as u64)
                .map(|i| {
                    let policy = TiePolicy::Random {
                        seed: opts.seed.wrapping_add(i),
                    };
                    ap_by_radius(h, policy, j, cut)
                })
                .collect::<Result<Vec<_>>>()?;
            let n_plus = h.relevant() as f64;
            let (mut retrieved, mut hits) = (0usize, 0usize);
            let mut precision = Vec::with_capacity(rows);
            let mut recall = Vec::with_capacity(rows);
            for r in 0..rows {
                retrieved += h.n()[r];
                hits += h.n_plus()[r];
                precision.push(if retrieved == 0 {
                    0.0
                } else {
                    hits as f64 / retrieved as f64
                });
                recall.push(hits as f64 / n_plus);
            }
            Ok(QueryCurves {
                map_opt: ap_by_radius(h, TiePolicy::Optimistic, j, cut)?,
                map_pes: ap_by_radius(h, TiePolicy::Pessimistic, j, cut)?,
                map_rand,
                precision,
                recall,
                raap: raap_curve(h, top, &schedule, opts.raap_mode)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let evaluated = per_query.len();
    if evaluated == 0 {
        return Err(Error::NoValidQueries);
    }
    let full = code_len + 1;
    let map_opt = mean_columns(per_query.iter().map(|c| c.map_opt.as_slice()), full, evaluated);
    let map_pes = mean_columns(per_query.iter().map(|c| c.map_pes.as_slice()), full, evaluated);
    let map_rand: Vec<Vec<f64>> = (0..opts.random_ties)
        .map(|i| mean_columns(per_query.iter().map(|c| c.map_rand[i].as_slice()), full, evaluated))
        .collect();
    let map_rand_mean = if map_rand.is_empty() {
        MetricCurve::new(vec![None; rows])
    } else {
        MetricCurve::from_values(
            mean_columns(map_rand.iter().map(Vec::as_slice), full, map_rand.len())[..rows].to_vec(),
        )
    };

    let empty_shells = (0..rows)
        .map(|r| Some(hists.iter().filter(|h| h.n()[r] == 0).count()))
        .collect();

    Ok(EvalReport {
        code_len,
        evaluated_queries: evaluated,
        excluded_queries: hists.len() - evaluated,
        map_optimistic: map_opt[code_len],
        map_pessimistic: map_pes[code_len],
        map_random: map_rand.iter().map(|c| c[code_len]).collect(),
        map_optimistic_curve: MetricCurve::from_values(map_opt[..rows].to_vec()),
        map_pessimistic_curve: MetricCurve::from_values(map_pes[..rows].to_vec()),
        map_random_mean_curve: map_rand_mean,
        precision: MetricCurve::from_values(mean_columns(
            per_query.iter().map(|c| c.precision.as_slice()),
            rows,
            evaluated,
        )),
        recall: MetricCurve::from_values(mean_columns(
            per_query.iter().map(|c| c.recall.as_slice()),
            rows,
            evaluated,
        )),
        ramap: MetricCurve::from_values(mean_columns(
            per_query.iter().map(|c| c.raap.as_slice()),
            rows,
            evaluated,
        )),
        probes: (0..rows)
            .map(|r| schedule.cumulative_saturating(r).ok())
            .collect(),
        empty_shells,
    })
}

/// Full pipeline: index the database, histogram every query, compute all
/// curves.
pub fn evaluate(
    db: &CodeSet,
    queries: &CodeSet,
    gt: &GroundTruth,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    if db.code_len() != queries.code_len() {
        return Err(Error::LengthMismatch {
            expected: db.code_len(),
            found: queries.code_len(),
        });
    }
    let index = InvertedIndex::build(db);
    let hists = shell_histograms(&index, queries, gt, opts.histogram_path)?;
    let mut report = evaluate_histograms(&hists, opts)?;
    if opts.empty_rule != EmptyBinRule::Shell {
        let top = opts.max_radius.min(db.code_len());
        report.empty_shells = empty_shell_counts(&index, queries, top, opts.empty_rule)?
            .into_iter()
            .map(Some)
            .collect();
    }
    Ok(report)
}
