use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::{embedding_fingerprint, GroundTruth, Item, ItemId};
use crate::error::{Error, Result};

pub const GENERATOR_SCHEMA_VERSION: u32 = 1;

/// Parameters of the synthetic clustered corpus.
///
/// Each cluster has one seed item at a random unit center. Every other member
/// is, with probability `dup_fraction`, a near-duplicate of the seed (spread
/// `dup_sigma`, and with probability `exact_copy_rate` a bit-identical copy);
/// otherwise it is a looser cluster member (spread `noise_sigma`). Spreads are
/// the expected norm of a perturbation orthogonal to the seed direction, so
/// the seed-to-member cosine distance is roughly `1 - 1/sqrt(1 + sigma^2)`
/// independent of dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorConfig {
    pub schema_version: u32,
    pub n_clusters: usize,
    pub cluster_size_mean: f64,
    pub dup_fraction: f64,
    pub exact_copy_rate: f64,
    pub positive_cluster_rate: f64,
    pub embedding_dim: usize,
    pub noise_sigma: f64,
    pub dup_sigma: f64,
    pub n_accounts: u64,
    pub account_skew: f64,
    pub inactive_rate: f64,
    pub rng_seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            schema_version: GENERATOR_SCHEMA_VERSION,
            n_clusters: 20_000,
            cluster_size_mean: 10.0,
            dup_fraction: 0.6,
            exact_copy_rate: 0.1,
            positive_cluster_rate: 0.05,
            embedding_dim: 32,
            noise_sigma: 0.55,
            dup_sigma: 0.1,
            n_accounts: 2_000,
            account_skew: 0.9,
            inactive_rate: 0.1,
            rng_seed: 42,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != GENERATOR_SCHEMA_VERSION {
            return Err(Error::config(
                "schema_version",
                format!("unsupported version {}, expected {GENERATOR_SCHEMA_VERSION}", self.schema_version),
            ));
        }
        for (name, v) in [
            ("dup_fraction", self.dup_fraction),
            ("exact_copy_rate", self.exact_copy_rate),
            ("positive_cluster_rate", self.positive_cluster_rate),
            ("account_skew", self.account_skew),
            ("inactive_rate", self.inactive_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(name, format!("must lie in [0, 1], got {v}")));
            }
        }
        if !(self.cluster_size_mean >= 1.0 && self.cluster_size_mean.is_finite()) {
            return Err(Error::config("cluster_size_mean", "must be a finite value >= 1"));
        }
        if self.embedding_dim < 2 {
            return Err(Error::config("embedding_dim", "must be >= 2"));
        }
        if !(self.dup_sigma >= 0.0 && self.dup_sigma.is_finite()) {
            return Err(Error::config("dup_sigma", "must be a finite value >= 0"));
        }
        if !(self.noise_sigma.is_finite() && self.dup_sigma < self.noise_sigma) {
            return Err(Error::config("dup_sigma", "must be strictly less than noise_sigma"));
        }
        if self.n_accounts == 0 {
            return Err(Error::config("n_accounts", "must be >= 1"));
        }
        Ok(())
    }

    /// Cosine distance below which a seed/near-duplicate pair falls with
    /// probability 0.99, as implied by `dup_sigma` and the dimension.
    pub fn dup_radius(&self) -> f64 {
        perturbation_distance_quantile(self.dup_sigma, self.embedding_dim, 0.99)
    }

    /// Same quantile for the looser, non-duplicate cluster members.
    pub fn member_radius(&self, p: f64) -> f64 {
        perturbation_distance_quantile(self.noise_sigma, self.embedding_dim, p)
    }

    fn violator_pool(&self) -> u64 {
        let pool = (self.n_accounts as f64 * (1.0 - self.account_skew)).ceil() as u64;
        pool.clamp(1, self.n_accounts)
    }
}

/// For v = c + sigma * g_perp / sqrt(d), cos(v, c) = 1 / sqrt(1 + sigma^2 X)
/// with X = chi^2_{d-1} / d.
fn perturbation_distance_quantile(sigma: f64, dim: usize, p: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    let chi = ChiSquared::new((dim - 1) as f64).expect("dim >= 2");
    let x = chi.inverse_cdf(p) / dim as f64;
    1.0 - 1.0 / (1.0 + sigma * sigma * x).sqrt()
}

/// Bookkeeping for one generated cluster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlantedCluster {
    pub seed: ItemId,
    /// All items of the cluster including the seed, ascending.
    pub members: Vec<ItemId>,
    /// Members planted as near-duplicates (or exact copies) of the seed.
    pub near_duplicates: Vec<ItemId>,
    pub positive: bool,
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub items: Vec<Item>,
    pub ground_truth: GroundTruth,
    pub clusters: Vec<PlantedCluster>,
}

impl SyntheticCorpus {
    pub fn duplicate_pair_count(&self) -> usize {
        self.clusters.iter().map(|c| c.near_duplicates.len()).sum()
    }
}

/// Deterministic synthetic corpus with planted near-duplicate clusters.
pub fn generate_corpus(cfg: &GeneratorConfig) -> Result<SyntheticCorpus> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let d = cfg.embedding_dim;

    let n_positive = (cfg.positive_cluster_rate * cfg.n_clusters as f64).round() as usize;
    let mut positive = vec![false; cfg.n_clusters];
    for c in index::sample(&mut rng, cfg.n_clusters, n_positive.min(cfg.n_clusters)) {
        positive[c] = true;
    }

    let extra = (cfg.cluster_size_mean > 1.0)
        .then(|| Poisson::new(cfg.cluster_size_mean - 1.0).expect("positive rate"));
    let impressions: LogNormal<f64> = LogNormal::new(3.0, 1.0).expect("valid lognormal");
    let pool = cfg.violator_pool();

    let mut items = Vec::new();
    let mut ground_truth = GroundTruth::new();
    let mut clusters = Vec::with_capacity(cfg.n_clusters);

    for &is_positive in &positive {
        let center = random_unit(&mut rng, d);
        let size = 1 + extra.as_ref().map_or(0, |p| p.sample(&mut rng) as usize);
        let mut cluster = PlantedCluster {
            seed: items.len() as ItemId,
            members: Vec::with_capacity(size),
            near_duplicates: Vec::new(),
            positive: is_positive,
        };
        for m in 0..size {
            let id = items.len() as ItemId;
            let embedding = if m == 0 {
                center.clone()
            } else if rng.random_bool(cfg.dup_fraction) {
                cluster.near_duplicates.push(id);
                if rng.random_bool(cfg.exact_copy_rate) {
                    center.clone()
                } else {
                    perturb(&mut rng, &center, cfg.dup_sigma)
                }
            } else {
                perturb(&mut rng, &center, cfg.noise_sigma)
            };
            let account_id = if is_positive {
                rng.random_range(0..pool)
            } else {
                rng.random_range(0..cfg.n_accounts)
            };
            let impressions = if rng.random_bool(cfg.inactive_rate) {
                0
            } else {
                1 + impressions.sample(&mut rng).floor() as u64
            };
            items.push(Item {
                item_id: id,
                exact_hash: embedding_fingerprint(&embedding),
                embedding,
                account_id,
                impressions,
                created_round: 0,
            });
            ground_truth.insert(id, is_positive);
            cluster.members.push(id);
        }
        clusters.push(cluster);
    }

    Ok(SyntheticCorpus {
        items,
        ground_truth,
        clusters,
    })
}

fn gaussian(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn normalized(mut v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
    v
}

fn random_unit(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    loop {
        let g = gaussian(rng, d);
        if g.iter().any(|&x| x != 0.0) {
            return normalized(g);
        }
    }
}

fn perturb(rng: &mut impl Rng, center: &[f64], sigma: f64) -> Vec<f64> {
    let d = center.len();
    let mut g = gaussian(rng, d);
    let along: f64 = g.iter().zip(center).map(|(a, b)| a * b).sum();
    let scale = sigma / (d as f64).sqrt();
    for (gi, ci) in g.iter_mut().zip(center) {
        *gi = ci + scale * (*gi - along * ci);
    }
    normalized(g)
}
