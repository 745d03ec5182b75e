//! Center-distance clustering: connected components of the graph linking
//! vote centers at Euclidean distance at most `radius`.

use std::collections::HashMap;

use super::{Cluster, Clustering, VoteSet};

struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut node: usize) -> usize {
        let mut root = node;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[node] != root {
            let next = self.parent[node];
            self.parent[node] = root;
            node = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return;
        }
        if self.rank[a] < self.rank[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        if self.rank[a] == self.rank[b] {
            self.rank[a] += 1;
        }
    }
}

/// Representative of each component is its highest-scoring vote (greedy
/// order of [`VoteSet::score_order`]); clusters are listed in that order.
pub fn spatial_cluster(votes: &VoteSet, radius: f64) -> Clustering {
    let m = votes.len();
    if m == 0 {
        return Clustering::default();
    }
    let centers: Vec<_> = votes.votes.iter().map(|v| v.center()).collect();
    let key = |i: usize| {
        let c = centers[i];
        [
            (c.x / radius).floor() as i64,
            (c.y / radius).floor() as i64,
            (c.z / radius).floor() as i64,
        ]
    };
    let mut grid: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    for i in 0..m {
        grid.entry(key(i)).or_default().push(i);
    }
    let r2 = radius * radius;
    let mut sets = DisjointSet::new(m);
    for i in 0..m {
        let [kx, ky, kz] = key(i);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(bucket) = grid.get(&[kx + dx, ky + dy, kz + dz]) {
                        for &j in bucket {
                            if j > i && centers[i].distance_squared(centers[j]) <= r2 {
                                sets.union(i, j);
                            }
                        }
                    }
                }
            }
        }
    }

    let mut slot_of_root: HashMap<usize, usize> = HashMap::new();
    let mut clusters: Vec<Cluster> = Vec::new();
    for i in votes.score_order() {
        let root = sets.find(i);
        let slot = *slot_of_root.entry(root).or_insert_with(|| {
            clusters.push(Cluster {
                representative: i,
                members: Vec::new(),
            });
            clusters.len() - 1
        });
        clusters[slot].members.push(i);
    }
    for c in &mut clusters {
        c.members.sort_unstable();
    }
    Clustering { clusters }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::Vote;
    use crate::geometry::{Aabb, Vec3};

    fn at(x: f64, score: f64) -> Vote {
        Vote::new(Aabb::new(Vec3::new(x, 0.0, 0.0), Vec3::splat(0.1), 1).unwrap(), score, 1)
    }

    #[test]
    fn far_apart_stay_separate() {
        let v = VoteSet::per_point(vec![at(0.0, 0.5), at(10.0, 0.6)]);
        let c = spatial_cluster(&v, 0.1);
        assert_eq!(
            c.clusters,
            vec![
                Cluster { representative: 1, members: vec![1] },
                Cluster { representative: 0, members: vec![0] },
            ]
        );
    }

    #[test]
    fn chain_is_transitive() {
        let v = VoteSet::per_point((0..6).map(|i| at(0.05 * i as f64, 0.1 * i as f64 + 0.01)).collect());
        let c = spatial_cluster(&v, 0.06);
        assert_eq!(c.clusters, vec![Cluster { representative: 5, members: (0..6).collect() }]);
    }

    #[test]
    fn empty() {
        assert!(spatial_cluster(&VoteSet::default(), 1.0).is_empty());
    }

    #[test]
    fn matches_brute_force_components() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let n = rng.gen_range(1..60);
            let votes: Vec<Vote> = (0..n)
                .map(|_| {
                    let c = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    Vote::new(Aabb::new(c, Vec3::splat(0.2), 1).unwrap(), rng.gen_range(0.0..1.0), 1)
                })
                .collect();
            let radius = rng.gen_range(0.05..0.6);
            // flood fill over the full adjacency matrix
            let mut comp = vec![usize::MAX; n];
            let mut count = 0;
            for s in 0..n {
                if comp[s] != usize::MAX {
                    continue;
                }
                let mut stack = vec![s];
                comp[s] = count;
                while let Some(u) = stack.pop() {
                    for w in 0..n {
                        if comp[w] == usize::MAX && votes[u].center().distance(votes[w].center()) <= radius {
                            comp[w] = count;
                            stack.push(w);
                        }
                    }
                }
                count += 1;
            }
            let set = VoteSet::per_point(votes);
            let c = spatial_cluster(&set, radius);
            c.check_partition(n).unwrap();
            assert_eq!(c.len(), count);
            for cl in &c.clusters {
                assert!(cl.members.iter().all(|&m| comp[m] == comp[cl.representative]));
            }
        }
    }
}
