//! Cosine-distance threshold graphs over item embeddings.
//!
//! Two construction modes share one output type: `Exact` verifies all pairs,
//! `Blocked` only verifies pairs that share a bucket in at least one band of
//! random-hyperplane sign hashes. Every reported edge is distance-verified, so
//! blocked mode can miss edges but never invents one.

use std::collections::HashMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Item, ItemId};
use crate::error::{Error, Result};

/// `1 - a.b / (|a| |b|)`, clamped to `[0, 2]`.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(distance_from_parts(dot, na, nb))
}

#[inline]
fn distance_from_parts(dot: f64, norm_a_sq: f64, norm_b_sq: f64) -> f64 {
    (1.0 - dot / (norm_a_sq * norm_b_sq).sqrt()).clamp(0.0, 2.0)
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn check_radius(name: &'static str, value: f64) -> Result<()> {
    if !(0.0..=2.0).contains(&value) {
        return Err(Error::InvalidThreshold {
            name,
            value,
            reason: "must lie in [0, 2]".into(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GraphMode {
    #[default]
    Exact,
    Blocked,
}

impl std::str::FromStr for GraphMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "exact" => Ok(GraphMode::Exact),
            "blocked" => Ok(GraphMode::Blocked),
            other => Err(format!("unknown graph mode `{other}` (expected exact or blocked)")),
        }
    }
}

/// Construction parameters. `bands` and `bits` only apply in blocked mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GraphOptions {
    pub mode: GraphMode,
    pub bands: usize,
    pub bits: usize,
    pub seed: u64,
}

impl Default for GraphOptions {
    fn default() -> Self {
        GraphOptions {
            mode: GraphMode::Exact,
            bands: 16,
            bits: 8,
            seed: 0,
        }
    }
}

impl GraphOptions {
    pub fn exact() -> Self {
        Self::default()
    }

    pub fn blocked(bands: usize, bits: usize, seed: u64) -> Self {
        GraphOptions {
            mode: GraphMode::Blocked,
            bands,
            bits,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode == GraphMode::Blocked {
            if self.bands == 0 {
                return Err(Error::config("graph.bands", "must be >= 1"));
            }
            if self.bits == 0 || self.bits > 64 {
                return Err(Error::config("graph.bits", "must lie in [1, 64]"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub id: ItemId,
    pub distance: f64,
}

/// Symmetric, irreflexive threshold graph. Adjacency lists are ordered by
/// ascending `(distance, item_id)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGraph {
    ids: Vec<ItemId>,
    index: HashMap<ItemId, u32>,
    radius: f64,
    adjacency: Vec<Vec<(u32, f64)>>,
}

impl SimilarityGraph {
    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains(&self, id: ItemId) -> bool {
        self.index.contains_key(&id)
    }

    pub fn node_ids(&self) -> &[ItemId] {
        &self.ids
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    fn slot(&self, id: ItemId) -> Result<usize> {
        self.index.get(&id).map(|&s| s as usize).ok_or(Error::UnknownItem(id))
    }

    /// All neighbors within the construction radius.
    pub fn neighbors(&self, id: ItemId) -> Result<impl Iterator<Item = Neighbor> + '_> {
        let slot = self.slot(id)?;
        Ok(self.adjacency[slot].iter().map(|&(j, d)| Neighbor {
            id: self.ids[j as usize],
            distance: d,
        }))
    }

    /// Neighbors within `radius <= self.radius()`, nearest first.
    pub fn neighbors_within(&self, id: ItemId, radius: f64) -> Result<Vec<Neighbor>> {
        check_radius("radius", radius)?;
        if radius > self.radius {
            return Err(Error::InvalidThreshold {
                name: "radius",
                value: radius,
                reason: format!("exceeds graph radius {}", self.radius),
            });
        }
        Ok(self.neighbors(id)?.take_while(|n| n.distance <= radius).collect())
    }

    /// Undirected edges `(a, b, distance)` with `a < b`, sorted.
    pub fn edges(&self) -> Vec<(ItemId, ItemId, f64)> {
        let mut out: Vec<_> = self
            .adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, adj)| {
                let a = self.ids[i];
                adj.iter().filter_map(move |&(j, d)| {
                    let b = self.ids[j as usize];
                    (a < b).then_some((a, b, d))
                })
            })
            .collect();
        out.sort_by_key(|e| (e.0, e.1));
        out
    }

    /// JSON Lines debug dump: `{"id": .., "neighbors": [[id, distance], ..]}`.
    pub fn write_dump(&self, mut w: impl Write) -> Result<()> {
        #[derive(Serialize)]
        struct Line<'a> {
            id: ItemId,
            neighbors: &'a [(ItemId, f64)],
        }
        for (i, adj) in self.adjacency.iter().enumerate() {
            let neighbors: Vec<(ItemId, f64)> = adj.iter().map(|&(j, d)| (self.ids[j as usize], d)).collect();
            serde_json::to_writer(&mut w, &Line { id: self.ids[i], neighbors: &neighbors })?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Builds the graph of all pairs at cosine distance `<= radius`.
pub fn build_graph(items: &[Item], radius: f64, options: &GraphOptions) -> Result<SimilarityGraph> {
    check_radius("radius", radius)?;
    options.validate()?;
    let n = items.len();
    let mut index = HashMap::with_capacity(n);
    for (i, it) in items.iter().enumerate() {
        if index.insert(it.item_id, i as u32).is_some() {
            return Err(Error::DuplicateId {
                id: it.item_id,
                line: None,
            });
        }
    }
    if let Some(first) = items.first() {
        let dim = first.embedding.len();
        if let Some(bad) = items.iter().find(|it| it.embedding.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: bad.embedding.len(),
            });
        }
    }
    let norms: Vec<f64> = items.iter().map(|it| dot(&it.embedding, &it.embedding)).collect();
    if norms.contains(&0.0) {
        return Err(Error::ZeroVector);
    }

    let forward = match options.mode {
        GraphMode::Exact => exact_forward(items, &norms, radius),
        GraphMode::Blocked => blocked_forward(items, &norms, radius, options),
    };

    let ids: Vec<ItemId> = items.iter().map(|it| it.item_id).collect();
    let mut adjacency: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
    for (i, fwd) in forward.into_iter().enumerate() {
        for &(j, d) in &fwd {
            adjacency[j as usize].push((i as u32, d));
        }
        adjacency[i].extend(fwd);
    }
    adjacency.par_iter_mut().for_each(|adj| {
        adj.sort_by(|a, b| a.1.total_cmp(&b.1).then(ids[a.0 as usize].cmp(&ids[b.0 as usize])));
    });

    Ok(SimilarityGraph {
        ids,
        index,
        radius,
        adjacency,
    })
}

/// For each slot `i`, the verified neighbors `j > i`.
fn exact_forward(items: &[Item], norms: &[f64], radius: f64) -> Vec<Vec<(u32, f64)>> {
    let n = items.len();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let a = &items[i].embedding;
            ((i + 1)..n)
                .filter_map(|j| {
                    let d = distance_from_parts(dot(a, &items[j].embedding), norms[i], norms[j]);
                    (d <= radius).then_some((j as u32, d))
                })
                .collect()
        })
        .collect()
}

struct Band {
    /// Slots sorted by (bucket key, slot).
    order: Vec<u32>,
    /// Per slot, the `[start, end)` range of its bucket inside `order`.
    bucket: Vec<(u32, u32)>,
}

fn blocked_forward(items: &[Item], norms: &[f64], radius: f64, options: &GraphOptions) -> Vec<Vec<(u32, f64)>> {
    let n = items.len();
    if n == 0 {
        return Vec::new();
    }
    let dim = items[0].embedding.len();
    let (bands, bits) = (options.bands, options.bits);
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let planes: Vec<f64> = (0..bands * bits * dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();

    let signatures: Vec<u64> = items
        .par_iter()
        .flat_map_iter(|it| {
            let planes = &planes;
            (0..bands).map(move |b| {
                let mut key = 0u64;
                for r in 0..bits {
                    let off = (b * bits + r) * dim;
                    if dot(&it.embedding, &planes[off..off + dim]) >= 0.0 {
                        key |= 1 << r;
                    }
                }
                key
            })
        })
        .collect();

    let tables: Vec<Band> = (0..bands)
        .into_par_iter()
        .map(|b| {
            let key = |s: u32| signatures[s as usize * bands + b];
            let mut order: Vec<u32> = (0..n as u32).collect();
            order.sort_unstable_by_key(|&s| (key(s), s));
            let mut bucket = vec![(0u32, 0u32); n];
            let mut start = 0;
            while start < n {
                let k = key(order[start]);
                let mut end = start + 1;
                while end < n && key(order[end]) == k {
                    end += 1;
                }
                for &s in &order[start..end] {
                    bucket[s as usize] = (start as u32, end as u32);
                }
                start = end;
            }
            Band { order, bucket }
        })
        .collect();

    (0..n)
        .into_par_iter()
        .map_init(
            || vec![u32::MAX; n],
            |stamp, i| {
                let a = &items[i].embedding;
                let mut out = Vec::new();
                for band in &tables {
                    let (lo, hi) = band.bucket[i];
                    let members = &band.order[lo as usize..hi as usize];
                    let after = members.partition_point(|&s| s as usize <= i);
                    for &j in &members[after..] {
                        if stamp[j as usize] == i as u32 {
                            continue;
                        }
                        stamp[j as usize] = i as u32;
                        let d = distance_from_parts(dot(a, &items[j as usize].embedding), norms[i], norms[j as usize]);
                        if d <= radius {
                            out.push((j, d));
                        }
                    }
                }
                out.sort_unstable_by_key(|&(j, _)| j);
                out
            },
        )
        .collect()
}
