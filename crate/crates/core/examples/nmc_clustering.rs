//! Non-maximum clustering against spatial clustering on two nested
//! same-class objects.

use boxvote::clustering::{nmc, spatial_cluster, Vote, VoteSet};
use boxvote::{Aabb, Vec3};

fn main() -> boxvote::Result<()> {
    let big = Aabb::new(Vec3::new(0.0, 0.0, 0.4), Vec3::new(1.6, 1.0, 0.8), 1)?;
    let small = Aabb::new(Vec3::new(0.02, 0.0, 0.41), Vec3::new(0.5, 0.5, 0.82), 1)?;
    let mut votes = Vec::new();
    for k in 0..20 {
        let jitter = Vec3::new(0.015 * (k % 5) as f64 - 0.03, 0.01 * (k % 3) as f64 - 0.01, 0.0);
        votes.push(Vote::new(big.translated(jitter), 0.9 - 0.01 * k as f64, 1));
        votes.push(Vote::new(small.translated(jitter), 0.85 - 0.01 * k as f64, 1));
    }
    let votes = VoteSet::per_point(votes);
    println!("NMC (tau 0.3): {} clusters", nmc(&votes, 0.3).len());
    for radius in [0.005, 0.02, 0.05] {
        println!("spatial (r {radius}): {} clusters", spatial_cluster(&votes, radius).len());
    }
    Ok(())
}
