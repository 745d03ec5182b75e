//! Box votes and their clustering.
//!
//! [`nmc`] is the greedy IoU-based clustering of box votes; [`spatial_cluster`]
//! is the center-distance baseline. Both produce a [`Clustering`], a
//! partition of the vote indices with one representative per cluster.

mod nmc;
mod spatial;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Aabb, ClassId, Vec3};

pub use nmc::{nmc, nmc_naive, DEFAULT_TAU};
pub use spatial::spatial_cluster;

/// A single box vote: predicted box, predicted IoU score and semantic class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vote {
    pub bbox: Aabb,
    pub score: f64,
    pub semantic: ClassId,
}

impl Vote {
    pub fn new(bbox: Aabb, score: f64, semantic: ClassId) -> Self {
        Self {
            bbox: bbox.with_label(semantic),
            score,
            semantic,
        }
    }

    pub fn center(&self) -> Vec3 {
        self.bbox.center()
    }
}

/// Votes plus, for each vote, the original point indices it stands for.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "VoteSetFile", into = "VoteSetFile")]
pub struct VoteSet {
    pub votes: Vec<Vote>,
    pub expansion: Vec<Vec<usize>>,
}

impl VoteSet {
    /// One vote per point, expansion `{i}` for vote `i`.
    pub fn per_point(votes: Vec<Vote>) -> Self {
        let expansion = (0..votes.len()).map(|i| vec![i]).collect();
        Self { votes, expansion }
    }

    pub fn new(votes: Vec<Vote>, expansion: Vec<Vec<usize>>) -> Result<Self> {
        let set = Self { votes, expansion };
        set.validate()?;
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.votes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.votes.is_empty()
    }

    /// Expansion sets must be nonempty and pairwise disjoint, scores finite.
    pub fn validate(&self) -> Result<()> {
        if self.votes.len() != self.expansion.len() {
            return Err(Error::Schema(format!(
                "{} votes but {} expansion sets",
                self.votes.len(),
                self.expansion.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for (i, (v, exp)) in self.votes.iter().zip(&self.expansion).enumerate() {
            if !v.score.is_finite() {
                return Err(Error::Schema(format!("votes[{i}].score is not finite")));
            }
            if exp.is_empty() {
                return Err(Error::Schema(format!("votes[{i}].points is empty")));
            }
            for &p in exp {
                if !seen.insert(p) {
                    return Err(Error::Schema(format!(
                        "votes[{i}].points: point {p} appears in more than one vote"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Sub-set of votes at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> VoteSet {
        VoteSet {
            votes: indices.iter().map(|&i| self.votes[i]).collect(),
            expansion: indices.iter().map(|&i| self.expansion[i].clone()).collect(),
        }
    }

    /// Greedy processing order: descending score, ties by smallest expanded
    /// point index, then by vote index. The point index survives any
    /// reordering of the votes, so the order is permutation-invariant.
    pub fn score_order(&self) -> Vec<usize> {
        let key: Vec<usize> = self
            .expansion
            .iter()
            .map(|e| e.iter().copied().min().unwrap_or(usize::MAX))
            .collect();
        let mut order: Vec<usize> = (0..self.votes.len()).collect();
        order.sort_by(|&a, &b| {
            self.votes[b]
                .score
                .total_cmp(&self.votes[a].score)
                .then(key[a].cmp(&key[b]))
                .then(a.cmp(&b))
        });
        order
    }
}

#[derive(Serialize, Deserialize)]
struct VoteRecord {
    center: Vec3,
    size: Vec3,
    score: f64,
    semantic: ClassId,
    points: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct VoteSetFile {
    votes: Vec<VoteRecord>,
}

impl TryFrom<VoteSetFile> for VoteSet {
    type Error = Error;

    fn try_from(f: VoteSetFile) -> Result<Self> {
        let mut votes = Vec::with_capacity(f.votes.len());
        let mut expansion = Vec::with_capacity(f.votes.len());
        for (i, r) in f.votes.into_iter().enumerate() {
            let bbox = Aabb::new(r.center, r.size, r.semantic)
                .map_err(|e| Error::Schema(format!("votes[{i}]: {e}")))?;
            votes.push(Vote::new(bbox, r.score, r.semantic));
            expansion.push(r.points);
        }
        VoteSet::new(votes, expansion)
    }
}

impl From<VoteSet> for VoteSetFile {
    fn from(set: VoteSet) -> Self {
        VoteSetFile {
            votes: set
                .votes
                .into_iter()
                .zip(set.expansion)
                .map(|(v, points)| VoteRecord {
                    center: v.bbox.center(),
                    size: v.bbox.size(),
                    score: v.score,
                    semantic: v.semantic,
                    points,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    pub representative: usize,
    /// Sorted ascending; includes the representative.
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Clustering {
    pub clusters: Vec<Cluster>,
}

impl Clustering {
    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    /// Checks that member sets partition `0..num_votes` and each cluster
    /// contains its representative.
    pub fn check_partition(&self, num_votes: usize) -> Result<()> {
        let mut owner = vec![usize::MAX; num_votes];
        for (ci, c) in self.clusters.iter().enumerate() {
            if c.members.is_empty() {
                return Err(Error::NotPartition(format!("cluster {ci} is empty")));
            }
            if !c.members.contains(&c.representative) {
                return Err(Error::NotPartition(format!(
                    "cluster {ci} does not contain its representative {}",
                    c.representative
                )));
            }
            for &m in &c.members {
                if m >= num_votes {
                    return Err(Error::NotPartition(format!(
                        "cluster {ci} references vote {m} of {num_votes}"
                    )));
                }
                if owner[m] != usize::MAX {
                    return Err(Error::NotPartition(format!(
                        "vote {m} is in clusters {} and {ci}",
                        owner[m]
                    )));
                }
                owner[m] = ci;
            }
        }
        if let Some(v) = owner.iter().position(|&o| o == usize::MAX) {
            return Err(Error::NotPartition(format!("vote {v} is not clustered")));
        }
        Ok(())
    }

    /// Cluster id per vote.
    pub fn assignment(&self, num_votes: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; num_votes];
        for (ci, c) in self.clusters.iter().enumerate() {
            for &m in &c.members {
                if m < num_votes {
                    out[m] = Some(ci);
                }
            }
        }
        out
    }
}

/// Clustering method used inside [`cluster_per_semantic`] and by the CLI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClusterMethod {
    Nmc { tau: f64 },
    Spatial { radius: f64 },
}

impl ClusterMethod {
    pub fn run(&self, votes: &VoteSet) -> Clustering {
        match *self {
            ClusterMethod::Nmc { tau } => nmc(votes, tau),
            ClusterMethod::Spatial { radius } => spatial_cluster(votes, radius),
        }
    }
}

/// Runs `inner` separately on the votes of each predicted semantic class.
/// Votes with different predicted classes never share a cluster. Clusters
/// are ordered by the global greedy order of their representatives.
pub fn cluster_per_semantic(votes: &VoteSet, inner: &ClusterMethod) -> Clustering {
    let mut by_class: std::collections::BTreeMap<ClassId, Vec<usize>> = Default::default();
    for (i, v) in votes.votes.iter().enumerate() {
        by_class.entry(v.semantic).or_default().push(i);
    }
    let mut clusters = Vec::new();
    for indices in by_class.values() {
        let sub = votes.select(indices);
        for c in inner.run(&sub).clusters {
            let mut members: Vec<usize> = c.members.iter().map(|&m| indices[m]).collect();
            members.sort_unstable();
            clusters.push(Cluster {
                representative: indices[c.representative],
                members,
            });
        }
    }
    let order = votes.score_order();
    let mut rank = vec![0usize; votes.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }
    clusters.sort_by_key(|c| rank[c.representative]);
    Clustering { clusters }
}
