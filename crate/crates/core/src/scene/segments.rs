use std::collections::HashMap;

use super::majority;
use crate::clustering::{Vote, VoteSet};
use crate::error::{Error, Result};
use crate::geometry::{Aabb, Vec3};

/// Averages votes that share a segment id into one vote per segment.
///
/// Center, size and score are arithmetic means; the semantic class is the
/// majority weighted by expansion size (ties to the lowest class id). The
/// expansion of a segment vote is the sorted union of its members'
/// expansions. Segments appear in order of their first vote.
pub fn aggregate_votes_by_segment(votes: &VoteSet, segment_ids: &[i64]) -> Result<VoteSet> {
    if segment_ids.len() != votes.len() {
        return Err(Error::MissingSegments(format!(
            "{} segment ids for {} votes",
            segment_ids.len(),
            votes.len()
        )));
    }
    let mut slot_of: HashMap<i64, usize> = HashMap::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    for (i, &seg) in segment_ids.iter().enumerate() {
        let slot = *slot_of.entry(seg).or_insert_with(|| {
            members.push(Vec::new());
            members.len() - 1
        });
        members[slot].push(i);
    }

    let mut out_votes = Vec::with_capacity(members.len());
    let mut out_expansion = Vec::with_capacity(members.len());
    for group in &members {
        let k = group.len() as f64;
        let (mut center, mut size, mut score) = (Vec3::ZERO, Vec3::ZERO, 0.0);
        for &i in group {
            let v = &votes.votes[i];
            center += v.bbox.center();
            size += v.bbox.size();
            score += v.score;
        }
        let semantic = majority(
            group
                .iter()
                .map(|&i| (votes.votes[i].semantic, votes.expansion[i].len())),
        );
        let bbox = Aabb::new(center / k, size / k, semantic)?;
        out_votes.push(Vote::new(bbox, score / k, semantic));
        let mut exp: Vec<usize> = group
            .iter()
            .flat_map(|&i| votes.expansion[i].iter().copied())
            .collect();
        exp.sort_unstable();
        out_expansion.push(exp);
    }
    Ok(VoteSet {
        votes: out_votes,
        expansion: out_expansion,
    })
}

/// Segment id of each vote, looked up through its first expanded point.
pub fn vote_segment_ids(votes: &VoteSet, point_segments: Option<&[i64]>) -> Result<Vec<i64>> {
    let seg = point_segments.ok_or_else(|| Error::MissingSegments("scene has no segment ids".into()))?;
    votes
        .expansion
        .iter()
        .enumerate()
        .map(|(i, e)| {
            e.first()
                .and_then(|&p| seg.get(p).copied())
                .ok_or_else(|| Error::MissingSegments(format!("vote {i} has no segment")))
        })
        .collect()
}
