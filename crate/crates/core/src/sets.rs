//! Sufficient-statistic group systems.
//!
//! A group is a set of time indices in `{1..T}` with pairwise gaps of at
//! least `p + 1`; conditioning on the lagged outcomes at those times plus the
//! within-group outcome sum eliminates the fixed effects. This module builds
//! the global maximal collection for `(T, p)`, the per-individual conditional
//! blocks, the individual-specific systems behind the beta-only estimator,
//! and the classical admissible sequence set used by the Cox estimator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::PanelDataset;

/// A strictly increasing set of time indices with gaps >= p + 1.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Group {
    pub times: Vec<usize>,
}

impl Group {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// The collection `B` of inclusion-maximal admissible groups for `(T, p)`,
/// in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupSystem {
    pub t_periods: usize,
    pub p: usize,
    pub groups: Vec<Group>,
}

/// One group's view of an individual path: conditioned lag patterns, observed
/// outcomes, and the conditioning sum.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConditionalBlock {
    pub group_index: usize,
    pub group: Group,
    /// `lag_patterns[d - 1][k]` is `y_{i, t_{g,k} - d}` for `d = 1..p`.
    pub lag_patterns: Vec<Vec<u8>>,
    pub outcome: Vec<u8>,
    /// Within-group outcome sum, the binary sufficient statistic.
    pub suff_stat: usize,
    /// False when the conditional law is degenerate (all 0 or all 1).
    pub informative: bool,
}

/// True iff `u` can be appended to `times` (anywhere) without violating the
/// gap constraint. Admissibility is downward closed, so a set is maximal in
/// the admissibility poset iff no single element extends it.
fn extendable_by(times: &[usize], u: usize, p: usize) -> bool {
    times
        .iter()
        .all(|&t| (t as i64 - u as i64).unsigned_abs() as usize >= p + 1)
}

fn is_maximal_within(times: &[usize], candidates: &[usize], p: usize) -> bool {
    !candidates
        .iter()
        .any(|&u| !times.contains(&u) && extendable_by(times, u, p))
}

/// Depth-first enumeration (lexicographic) of admissible subsets of
/// `candidates` with gaps >= p + 1 and size >= 2, keeping the maximal ones.
fn maximal_groups(candidates: &[usize], p: usize) -> Vec<Group> {
    let mut out = Vec::new();
    let mut stack = Vec::new();
    fn recurse(
        candidates: &[usize],
        start: usize,
        current: &mut Vec<usize>,
        p: usize,
        out: &mut Vec<Group>,
    ) {
        if current.len() >= 2 && is_maximal_within(current, candidates, p) {
            out.push(Group {
                times: current.clone(),
            });
        }
        for idx in start..candidates.len() {
            let u = candidates[idx];
            if current.last().map_or(true, |&last| u >= last + p + 1) {
                current.push(u);
                recurse(candidates, idx + 1, current, p, out);
                current.pop();
            }
        }
    }
    recurse(candidates, 0, &mut stack, p, &mut out);
    out
}

/// Build the maximal group collection `B` for `(T, p)`.
pub fn build_group_system(t_periods: usize, p: usize) -> Result<GroupSystem> {
    if p == 0 {
        return Err(Error::Config("AR order p must be >= 1".into()));
    }
    if t_periods < p + 2 {
        return Err(Error::IdentificationError { t: t_periods, p });
    }
    let candidates: Vec<usize> = (1..=t_periods).collect();
    Ok(GroupSystem {
        t_periods,
        p,
        groups: maximal_groups(&candidates, p),
    })
}

/// Fill every group's conditional block from individual `i`'s stored path.
pub fn blocks_for_individual(
    ds: &PanelDataset,
    i: usize,
    gs: &GroupSystem,
) -> Result<Vec<ConditionalBlock>> {
    if ds.t_periods != gs.t_periods || ds.p != gs.p {
        return Err(Error::DimensionMismatch(format!(
            "dataset (T = {}, p = {}) does not match group system (T = {}, p = {})",
            ds.t_periods, ds.p, gs.t_periods, gs.p
        )));
    }
    let mut blocks = Vec::with_capacity(gs.groups.len());
    for (g, group) in gs.groups.iter().enumerate() {
        let outcome: Vec<u8> = group
            .times
            .iter()
            .map(|&t| ds.outcome(i, t as i64))
            .collect();
        let lag_patterns: Vec<Vec<u8>> = (1..=ds.p)
            .map(|d| {
                group
                    .times
                    .iter()
                    .map(|&t| ds.outcome(i, t as i64 - d as i64))
                    .collect()
            })
            .collect();
        let suff_stat: usize = outcome.iter().map(|&y| y as usize).sum();
        let informative = suff_stat > 0 && suff_stat < group.len();
        blocks.push(ConditionalBlock {
            group_index: g,
            group: group.clone(),
            lag_patterns,
            outcome,
            suff_stat,
            informative,
        });
    }
    Ok(blocks)
}

/// Individual-specific maximal systems for the beta-only estimator, one per
/// observed lag tuple.
///
/// For `p = 1` the tuples are `(0,)` and `(1,)`, matching the classical
/// construction; for `p >= 2` eligibility requires the full lag tuple
/// `(y_{t-1}, .., y_{t-p})` to equal the key, with gaps >= p + 1.
pub fn beta_only_systems_by_tuple(ds: &PanelDataset, i: usize) -> Vec<(Vec<u8>, Vec<Group>)> {
    let p = ds.p;
    let n_tuples = 1usize << p;
    let mut out = Vec::new();
    for code in 0..n_tuples {
        let tuple: Vec<u8> = (0..p).map(|d| ((code >> d) & 1) as u8).collect();
        let eligible: Vec<usize> = (1..=ds.t_periods)
            .filter(|&t| {
                (1..=p).all(|d| ds.outcome(i, t as i64 - d as i64) == tuple[d - 1])
            })
            .collect();
        let groups = maximal_groups(&eligible, p);
        if !groups.is_empty() {
            out.push((tuple, groups));
        }
    }
    out
}

/// The `p = 1` beta-only systems `(B_i^0, B_i^1)`: maximal admissible sets
/// within the times whose lag is constant 0 (resp. 1). Either may be empty.
pub fn build_beta_only_systems(ds: &PanelDataset, i: usize) -> (Vec<Group>, Vec<Group>) {
    let mut b0 = Vec::new();
    let mut b1 = Vec::new();
    for (tuple, groups) in beta_only_systems_by_tuple(ds, i) {
        match tuple[0] {
            0 => b0 = groups,
            _ => b1 = groups,
        }
    }
    (b0, b1)
}

/// All binary sequences of length `T + 1` agreeing with `path` at both
/// endpoints and matching its interior sum; always contains `path`.
pub fn cox_admissible_set(path: &[u8]) -> Vec<Vec<u8>> {
    assert!(path.len() >= 2, "Cox admissible set needs T >= 1");
    assert!(path.iter().all(|&y| y <= 1));
    let interior = &path[1..path.len() - 1];
    let s: usize = interior.iter().map(|&y| y as usize).sum();
    let slots = interior.len();
    let mut out = Vec::new();
    // lexicographic enumeration of interior patterns with the given sum
    let mut positions: Vec<usize> = Vec::with_capacity(s);
    fn recurse(
        slots: usize,
        s: usize,
        start: usize,
        positions: &mut Vec<usize>,
        path: &[u8],
        out: &mut Vec<Vec<u8>>,
    ) {
        if positions.len() == s {
            let mut seq = vec![0u8; path.len()];
            seq[0] = path[0];
            *seq.last_mut().unwrap() = *path.last().unwrap();
            for &pos in positions.iter() {
                seq[pos + 1] = 1;
            }
            out.push(seq);
            return;
        }
        for pos in start..slots {
            positions.push(pos);
            recurse(slots, s, pos + 1, positions, path, out);
            positions.pop();
        }
    }
    recurse(slots, s, 0, &mut positions, path, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::PanelDataset;

    fn toy_dataset(p: usize, paths: Vec<Vec<u8>>, t_periods: usize) -> PanelDataset {
        let n = paths.len();
        PanelDataset {
            n,
            t_periods,
            p,
            k: 0,
            ids: (0..n as i64).collect(),
            outcomes: paths,
            covariates: vec![vec![vec![]; t_periods]; n],
        }
    }

    #[test]
    fn group_system_t3_p1_is_singleton() {
        let gs = build_group_system(3, 1).unwrap();
        assert_eq!(gs.groups, vec![Group { times: vec![1, 3] }]);
    }

    #[test]
    fn group_system_matches_t4_example() {
        let gs = build_group_system(4, 1).unwrap();
        let want: Vec<Group> = [vec![1, 3], vec![1, 4], vec![2, 4]]
            .into_iter()
            .map(|times| Group { times })
            .collect();
        assert_eq!(gs.groups, want);
    }

    #[test]
    fn group_system_matches_t5_example() {
        let gs = build_group_system(5, 1).unwrap();
        let want: Vec<Group> = [vec![1, 3, 5], vec![1, 4], vec![2, 4], vec![2, 5]]
            .into_iter()
            .map(|times| Group { times })
            .collect();
        assert_eq!(gs.groups, want);
    }

    #[test]
    fn group_system_t4_p2_forces_unique_pair() {
        let gs = build_group_system(4, 2).unwrap();
        assert_eq!(gs.groups, vec![Group { times: vec![1, 4] }]);
    }

    #[test]
    fn group_system_rejects_short_panels() {
        assert!(matches!(
            build_group_system(3, 2),
            Err(Error::IdentificationError { t: 3, p: 2 })
        ));
    }

    #[test]
    fn blocks_read_off_path_p1() {
        let ds = toy_dataset(1, vec![vec![0, 1, 0, 0]], 3);
        let gs = build_group_system(3, 1).unwrap();
        let blocks = blocks_for_individual(&ds, 0, &gs).unwrap();
        assert_eq!(blocks.len(), 1);
        let b = &blocks[0];
        assert_eq!(b.group.times, vec![1, 3]);
        assert_eq!(b.lag_patterns, vec![vec![0, 0]]);
        assert_eq!(b.outcome, vec![1, 0]);
        assert_eq!(b.suff_stat, 1);
        assert!(b.informative);
    }

    #[test]
    fn blocks_flag_non_switchers() {
        let ds = toy_dataset(1, vec![vec![0, 1, 1, 1]], 3);
        let gs = build_group_system(3, 1).unwrap();
        let blocks = blocks_for_individual(&ds, 0, &gs).unwrap();
        assert_eq!(blocks[0].suff_stat, 2);
        assert!(!blocks[0].informative);
    }

    #[test]
    fn blocks_read_off_path_p2() {
        // (y_{-1}, y_0, y_1, y_2, y_3, y_4) = (1,0,1,0,0,1)
        let ds = toy_dataset(2, vec![vec![1, 0, 1, 0, 0, 1]], 4);
        let gs = build_group_system(4, 2).unwrap();
        let blocks = blocks_for_individual(&ds, 0, &gs).unwrap();
        let b = &blocks[0];
        assert_eq!(b.group.times, vec![1, 4]);
        assert_eq!(b.lag_patterns, vec![vec![0, 0], vec![1, 0]]);
        assert_eq!(b.outcome, vec![1, 1]);
        assert_eq!(b.suff_stat, 2);
        assert!(!b.informative);
    }

    #[test]
    fn beta_only_systems_t3() {
        // path (y_0, y_1, y_2, y_3) = (0,0,0,1): all of {1,2,3} have lag 0
        let ds = toy_dataset(1, vec![vec![0, 0, 0, 1]], 3);
        let (b0, b1) = build_beta_only_systems(&ds, 0);
        assert_eq!(b0, vec![Group { times: vec![1, 3] }]);
        assert!(b1.is_empty());
    }

    #[test]
    fn beta_only_systems_from_eligible_subset() {
        // T = 5, lag-0 eligible times {1, 3, 4}
        // path: y_0=0, y_1=0 (t=2 lag 0? we need eligible exactly {1,3,4})
        // lags: t eligible iff y_{t-1} = 0; want y_0=0, y_1!=0 -> no wait.
        // eligible {1,3,4}: y_0 = 0, y_1 = 1? then t=2 has lag 1; y_2 = 0 so
        // t=3 eligible; y_3 = 0 so t=4 eligible; y_4 = 1 so t=5 not eligible.
        let ds = toy_dataset(1, vec![vec![0, 1, 0, 0, 1, 0]], 5);
        let (b0, _b1) = build_beta_only_systems(&ds, 0);
        let want: Vec<Group> = [vec![1, 3], vec![1, 4]]
            .into_iter()
            .map(|times| Group { times })
            .collect();
        assert_eq!(b0, want);
    }

    #[test]
    fn beta_only_systems_empty_when_lag_constant_one() {
        let ds = toy_dataset(1, vec![vec![1, 1, 1, 1]], 3);
        let (b0, b1) = build_beta_only_systems(&ds, 0);
        assert!(b0.is_empty());
        // all times have lag 1, so B^1 is the full maximal system
        assert_eq!(b1, vec![Group { times: vec![1, 3] }]);
    }

    #[test]
    fn cox_set_matches_interior_sum() {
        let set = cox_admissible_set(&[0, 1, 0, 1]);
        assert_eq!(set, vec![vec![0, 1, 0, 1], vec![0, 0, 1, 1]]);
        let singleton = cox_admissible_set(&[1, 0, 0, 0]);
        assert_eq!(singleton, vec![vec![1, 0, 0, 0]]);
    }

    #[test]
    fn cox_set_contains_path_and_has_binomial_size() {
        let path = [1u8, 1, 0, 1, 0, 1];
        let set = cox_admissible_set(&path);
        assert!(set.contains(&path.to_vec()));
        // interior sum 2 over 4 slots -> C(4,2) = 6
        assert_eq!(set.len(), 6);
    }
}
