//! Non-maximum clustering.
//!
//! Votes are visited in descending score order. The first unclustered vote
//! becomes a representative and absorbs every still-unclustered vote whose
//! box has IoU strictly greater than `tau` with the representative's box.
//! Absorbed votes are never reconsidered, so the result is a partition.

use std::collections::HashMap;

use super::{Cluster, Clustering, VoteSet};

/// Default IoU threshold.
pub const DEFAULT_TAU: f64 = 0.3;

/// Below this many votes the grid is not worth building.
const GRID_MIN_VOTES: usize = 64;

/// Clusters `votes` with IoU threshold `tau` in (0, 1).
///
/// Candidate lookup goes through a uniform grid over box centers whose cell
/// size is the largest box diagonal: two boxes can only overlap if their
/// centers are in neighbouring cells. The result is identical to
/// [`nmc_naive`].
pub fn nmc(votes: &VoteSet, tau: f64) -> Clustering {
    if votes.len() < GRID_MIN_VOTES {
        return nmc_naive(votes, tau);
    }
    let cell = votes
        .votes
        .iter()
        .map(|v| v.bbox.diagonal())
        .fold(0.0f64, f64::max);
    let key = |i: usize| {
        let c = votes.votes[i].center();
        [
            (c.x / cell).floor() as i64,
            (c.y / cell).floor() as i64,
            (c.z / cell).floor() as i64,
        ]
    };
    let mut grid: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    for i in 0..votes.len() {
        grid.entry(key(i)).or_default().push(i);
    }

    let mut clustered = vec![false; votes.len()];
    let mut clusters = Vec::new();
    for r in votes.score_order() {
        if clustered[r] {
            continue;
        }
        clustered[r] = true;
        let rep = votes.votes[r].bbox;
        let [kx, ky, kz] = key(r);
        let mut members = vec![r];
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(bucket) = grid.get_mut(&[kx + dx, ky + dy, kz + dz]) else {
                        continue;
                    };
                    bucket.retain(|&m| {
                        if clustered[m] {
                            return false;
                        }
                        if rep.iou(&votes.votes[m].bbox) > tau {
                            clustered[m] = true;
                            members.push(m);
                            return false;
                        }
                        true
                    });
                }
            }
        }
        members.sort_unstable();
        clusters.push(Cluster {
            representative: r,
            members,
        });
    }
    Clustering { clusters }
}

/// Reference O(M²) scan.
pub fn nmc_naive(votes: &VoteSet, tau: f64) -> Clustering {
    let mut clustered = vec![false; votes.len()];
    let mut clusters = Vec::new();
    for r in votes.score_order() {
        if clustered[r] {
            continue;
        }
        clustered[r] = true;
        let rep = votes.votes[r].bbox;
        let mut members = vec![r];
        for (m, v) in votes.votes.iter().enumerate() {
            if !clustered[m] && rep.iou(&v.bbox) > tau {
                clustered[m] = true;
                members.push(m);
            }
        }
        members.sort_unstable();
        clusters.push(Cluster {
            representative: r,
            members,
        });
    }
    Clustering { clusters }
}
