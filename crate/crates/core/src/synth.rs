//! Planted-center code generator standing in for learned similarity-
//! preserving hashes.
//!
//! A squared-loss hash pulls same-class pairs to some target distance (0 for
//! the plain loss, `m` for the shifted one) while keeping the relative order
//! of distances. No metric here looks at how codes were learned, only at the
//! distance distribution, so the generator plants it directly: every class
//! draws a random center, and every point (database or query) is its class
//! center with a uniformly random set of `⌈m/2⌉` bits flipped. Two members of
//! one class then sit about `m` apart and members of different classes about
//! `Q/2` apart.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::codes::{ground_truth_from_labels, BinaryCode, CodeSet, Labels, MAX_CODE_LEN};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, EvalOptions, EvalReport};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CenterMode {
    /// Independent uniform centers, about `Q/2` apart.
    #[default]
    Random,
    /// Classes `2k` and `2k+1` get complementary centers, `Q` apart.
    PushedApart,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MShiftConfig {
    pub q_bits: usize,
    pub n_classes: usize,
    /// Database points per class.
    pub per_class: usize,
    /// Query points per class, drawn as fresh members.
    pub queries_per_class: usize,
    /// Target intra-class distance; 0 gives exact collisions.
    pub m: usize,
    pub seed: u64,
    pub centers: CenterMode,
}

impl MShiftConfig {
    pub fn new(q_bits: usize, n_classes: usize, per_class: usize, m: usize, seed: u64) -> Self {
        Self {
            q_bits,
            n_classes,
            per_class,
            queries_per_class: 100,
            m,
            seed,
            centers: CenterMode::Random,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.q_bits == 0 || self.q_bits > MAX_CODE_LEN {
            return Err(Error::CodeLength(self.q_bits));
        }
        if self.n_classes == 0 || self.per_class == 0 || self.queries_per_class == 0 {
            return Err(Error::Config(
                "classes, points per class and queries per class must all be at least 1".into(),
            ));
        }
        if 2 * self.m > self.q_bits {
            return Err(Error::Config(format!(
                "m = {} exceeds half the code length {}",
                self.m, self.q_bits
            )));
        }
        Ok(())
    }

    /// Bits flipped per member.
    pub fn flips(&self) -> usize {
        self.m.div_ceil(2)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SyntheticSplit {
    pub db: CodeSet,
    pub db_labels: Labels,
    pub queries: CodeSet,
    pub query_labels: Labels,
    pub centers: Vec<BinaryCode>,
}

fn random_code(rng: &mut ChaCha8Rng, q: usize) -> BinaryCode {
    let bits: Vec<bool> = (0..q).map(|_| rng.random_bool(0.5)).collect();
    BinaryCode::from_bits(&bits).expect("length validated")
}

fn member(rng: &mut ChaCha8Rng, center: &BinaryCode, flips: usize) -> BinaryCode {
    let mut code = center.clone();
    for q in sample(rng, center.len(), flips) {
        code.flip(q);
    }
    code
}

/// Draws centers, then database members class by class, then queries, all
/// from one seeded stream. Changing only `m` keeps the centers.
pub fn generate_mshift(config: &MShiftConfig) -> Result<SyntheticSplit> {
    config.validate()?;
    let q = config.q_bits;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut centers: Vec<BinaryCode> = Vec::with_capacity(config.n_classes);
    for c in 0..config.n_classes {
        let center = match config.centers {
            CenterMode::PushedApart if c % 2 == 1 => {
                let mut comp = centers[c - 1].clone();
                (0..q).for_each(|b| comp.flip(b));
                comp
            }
            _ => random_code(&mut rng, q),
        };
        centers.push(center);
    }

    let flips = config.flips();
    let mut draw = |count: usize| {
        let mut codes = Vec::with_capacity(count * config.n_classes);
        let mut labels = Vec::with_capacity(count * config.n_classes);
        for (c, center) in centers.iter().enumerate() {
            for _ in 0..count {
                codes.push(member(&mut rng, center, flips));
                labels.push(c as u32);
            }
        }
        (codes, Labels::new(labels))
    };
    let (db, db_labels) = draw(config.per_class);
    let (queries, query_labels) = draw(config.queries_per_class);
    Ok(SyntheticSplit {
        db: CodeSet::new(q, db)?,
        db_labels,
        queries: CodeSet::new(q, queries)?,
        query_labels,
        centers,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct StrategyReport {
    pub config: MShiftConfig,
    pub report: EvalReport,
}

/// Generates and evaluates every config with label-equality ground truth.
/// Configs must agree on everything except `m`.
pub fn compare_strategies(configs: &[MShiftConfig], opts: &EvalOptions) -> Result<Vec<StrategyReport>> {
    let first = configs.first().ok_or_else(|| Error::Config("no configurations".into()))?;
    for c in configs {
        let same = MShiftConfig { m: first.m, ..c.clone() };
        if &same != first {
            return Err(Error::Config(
                "compared configurations may differ only in m".into(),
            ));
        }
    }
    configs
        .par_iter()
        .map(|config| {
            let split = generate_mshift(config)?;
            let gt = ground_truth_from_labels(&split.db_labels, &split.query_labels)?;
            let report = evaluate(&split.db, &split.queries, &gt, opts)?;
            Ok(StrategyReport {
                config: config.clone(),
                report,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::{build_index, InvertedIndex};

    fn intra_inter(split: &SyntheticSplit) -> (f64, f64) {
        let labels = split.db_labels.as_slice();
        let (mut intra, mut ni, mut inter, mut ne) = (0.0, 0, 0.0, 0);
        for (i, a) in split.db.iter().enumerate().step_by(7) {
            for (k, b) in split.db.iter().enumerate().skip(i + 1).step_by(5) {
                let d = a.distance(b).unwrap() as f64;
                if labels[i] == labels[k] {
                    intra += d;
                    ni += 1;
                } else {
                    inter += d;
                    ne += 1;
                }
            }
        }
        (intra / ni as f64, inter / ne as f64)
    }

    #[test]
    fn zero_shift_collapses_classes() {
        let split = generate_mshift(&MShiftConfig::new(32, 2, 20, 0, 3)).unwrap();
        for (i, code) in split.db.iter().enumerate() {
            assert_eq!(code, &split.centers[split.db_labels.as_slice()[i] as usize]);
        }
        let d_centers = split.centers[0].distance(&split.centers[1]).unwrap();
        assert_eq!(split.db.get(0).distance(split.db.get(25)).unwrap(), d_centers);
        assert_eq!(split.queries.len(), 200);

        // every query lands in a bucket holding exactly its class
        let idx: InvertedIndex = build_index(&split.db);
        for (j, query) in split.queries.iter().enumerate() {
            let ids = idx.get(query).unwrap();
            let label = split.query_labels.as_slice()[j];
            assert!(ids.iter().all(|&i| split.db_labels.as_slice()[i] == label) || d_centers == 0);
            assert!(ids.len() >= 20);
        }
    }

    #[test]
    fn intra_class_distance_tracks_m() {
        let split = generate_mshift(&MShiftConfig::new(64, 10, 100, 8, 11)).unwrap();
        let (intra, inter) = intra_inter(&split);
        assert!((6.0..=10.0).contains(&intra), "intra {intra}");
        assert!((28.0..=36.0).contains(&inter), "inter {inter}");
        // each member sits exactly ⌈m/2⌉ from its center
        for (i, code) in split.db.iter().enumerate() {
            let c = &split.centers[split.db_labels.as_slice()[i] as usize];
            assert_eq!(code.distance(c).unwrap(), 4);
        }
    }

    #[test]
    fn odd_m_and_pushed_centers() {
        let mut config = MShiftConfig::new(16, 4, 5, 3, 1);
        config.centers = CenterMode::PushedApart;
        let split = generate_mshift(&config).unwrap();
        assert_eq!(split.centers[0].distance(&split.centers[1]).unwrap(), 16);
        assert_eq!(split.centers[2].distance(&split.centers[3]).unwrap(), 16);
        assert_eq!(config.flips(), 2);
    }

    #[test]
    fn deterministic_and_validated() {
        let config = MShiftConfig::new(24, 3, 10, 4, 99);
        assert_eq!(generate_mshift(&config).unwrap(), generate_mshift(&config).unwrap());
        let other = MShiftConfig { m: 6, ..config.clone() };
        assert_eq!(generate_mshift(&config).unwrap().centers, generate_mshift(&other).unwrap().centers);

        assert!(generate_mshift(&MShiftConfig::new(8, 2, 2, 5, 0)).is_err());
        assert!(generate_mshift(&MShiftConfig::new(8, 0, 2, 1, 0)).is_err());
        assert!(generate_mshift(&MShiftConfig::new(0, 1, 2, 0, 0)).is_err());
        assert!(generate_mshift(&MShiftConfig::new(8, 1, 1, 4, 0)).is_ok());
    }

    #[test]
    fn larger_shift_pushes_neighbors_outward() {
        let configs: Vec<MShiftConfig> = [0, 4, 8, 12]
            .iter()
            .map(|&m| MShiftConfig { queries_per_class: 20, ..MShiftConfig::new(64, 5, 100, m, 5) })
            .collect();
        let opts = EvalOptions { max_radius: 12, random_ties: 0, ..EvalOptions::default() };
        let reps = compare_strategies(&configs, &opts).unwrap();

        let empties: Vec<Vec<usize>> = reps
            .iter()
            .map(|s| s.report.empty_shells.iter().map(|e| e.unwrap()).collect())
            .collect();
        // below the smaller shift, the larger one leaves at least as many shells empty
        for (i, w) in empties.windows(2).enumerate() {
            for (r, (a, b)) in w[0].iter().zip(&w[1]).enumerate().take(configs[i].m) {
                assert!(b >= a, "r={r}: {empties:?}");
            }
        }
        assert!(empties[3][..12].iter().step_by(2).take(4).all(|&e| e > 0));

        // first occupied shell, averaged over queries
        let first_hit = |config: &MShiftConfig| {
            let split = generate_mshift(config).unwrap();
            let idx = build_index(&split.db);
            let total: usize = split
                .queries
                .iter()
                .map(|q| {
                    idx.buckets()
                        .iter()
                        .map(|b| b.key().distance(q).unwrap() as usize)
                        .min()
                        .unwrap()
                })
                .sum();
            total as f64 / split.queries.len() as f64
        };
        let means: Vec<f64> = configs.iter().map(first_hit).collect();
        assert_eq!(means[0], 0.0);
        assert!(means.windows(2).all(|w| w[1] >= w[0]), "{means:?}");
    }

    #[test]
    fn compare_requires_matching_configs() {
        let a = MShiftConfig::new(16, 2, 5, 0, 1);
        let b = MShiftConfig { seed: 2, ..a.clone() };
        assert!(compare_strategies(&[a.clone(), b], &EvalOptions::default()).is_err());
        assert!(compare_strategies(&[], &EvalOptions::default()).is_err());
        let c = MShiftConfig { m: 2, ..a.clone() };
        let opts = EvalOptions { max_radius: 4, random_ties: 1, ..EvalOptions::default() };
        let reps = compare_strategies(&[a.clone(), c, a], &opts).unwrap();
        assert_eq!(reps.len(), 3);
        assert_eq!(reps[0].report, reps[2].report);
        assert_eq!(reps[1].config.m, 2);
    }
}
