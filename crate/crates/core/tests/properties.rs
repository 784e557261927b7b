//! Randomized invariants over the combinatorial and numerical building
//! blocks, complementing the fixed-seed acceptance suite.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use panelogit_core::expfam::{enumerate_lambda, logsumexp};
use panelogit_core::sets::{build_group_system, cox_admissible_set};
use panelogit_core::{MnlParameterVector, ParameterVector};

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut out = 1usize;
    for j in 0..k {
        out = out * (n - j) / (j + 1);
    }
    out
}

proptest! {
    /// Every produced group is admissible, inclusion-maximal, sorted, and
    /// the collection is in strict lexicographic order (hence duplicate
    /// free) — including T beyond the exhaustively checked range.
    #[test]
    fn group_systems_are_admissible_and_maximal(t in 3usize..=12, p in 1usize..=3) {
        prop_assume!(t >= p + 2);
        let gs = build_group_system(t, p).unwrap();
        prop_assert!(!gs.groups.is_empty());
        for pair in gs.groups.windows(2) {
            prop_assert!(pair[0].times < pair[1].times, "not in lexicographic order");
        }
        for group in &gs.groups {
            prop_assert!(group.times.len() >= 2);
            prop_assert!(group.times.iter().all(|&u| (1..=t).contains(&u)));
            for w in group.times.windows(2) {
                prop_assert!(w[1] - w[0] >= p + 1, "gap violation in {:?}", group.times);
            }
            for u in 1..=t {
                if group.times.contains(&u) {
                    continue;
                }
                let extendable = group
                    .times
                    .iter()
                    .all(|&v| (v as i64 - u as i64).unsigned_abs() as usize >= p + 1);
                prop_assert!(!extendable, "{:?} is not maximal: {u} fits", group.times);
            }
        }
    }

    /// The classical admissible sequence set has binomial cardinality,
    /// contains the observed path, and preserves endpoints and interior sum.
    #[test]
    fn cox_sets_have_binomial_size(path in proptest::collection::vec(0u8..=1, 2..=10)) {
        let set = cox_admissible_set(&path);
        let interior = &path[1..path.len() - 1];
        let s: usize = interior.iter().map(|&y| y as usize).sum();
        prop_assert_eq!(set.len(), binomial(interior.len(), s));
        prop_assert!(set.contains(&path));
        for seq in &set {
            prop_assert_eq!(seq[0], path[0]);
            prop_assert_eq!(seq[seq.len() - 1], path[path.len() - 1]);
            let seq_sum: usize = seq[1..seq.len() - 1].iter().map(|&y| y as usize).sum();
            prop_assert_eq!(seq_sum, s);
        }
    }

    /// Outcome-pattern enumeration at a fixed sum is exactly the binomial
    /// family: right count, right sums, no duplicates.
    #[test]
    fn lambda_sets_enumerate_the_binomial_family(m in 1usize..=10, s_raw in 0usize..=10) {
        let s = s_raw % (m + 1);
        let lambda = enumerate_lambda(m, s);
        prop_assert_eq!(lambda.patterns.len(), binomial(m, s));
        let mut seen = std::collections::HashSet::new();
        for pat in &lambda.patterns {
            prop_assert_eq!(pat.len(), m);
            prop_assert_eq!(pat.iter().map(|&b| b as usize).sum::<usize>(), s);
            prop_assert!(seen.insert(pat.clone()), "duplicate pattern {:?}", pat);
        }
    }

    /// log-sum-exp is shift equivariant and agrees with the naive formula
    /// on well-scaled inputs.
    #[test]
    fn logsumexp_is_shift_equivariant(
        xs in proptest::collection::vec(-30.0f64..30.0, 1..=8),
        shift in -500.0f64..500.0,
    ) {
        let naive = xs.iter().map(|x| x.exp()).sum::<f64>().ln();
        let lse = logsumexp(&xs);
        prop_assert!((lse - naive).abs() <= 1e-10 * naive.abs().max(1.0));
        let shifted: Vec<f64> = xs.iter().map(|x| x + shift).collect();
        prop_assert!((logsumexp(&shifted) - shift - lse).abs() <= 1e-9);
    }

    /// Parameter vectors survive a JSON round trip exactly.
    #[test]
    fn parameter_vectors_round_trip_through_json(
        beta in proptest::collection::vec(-10.0f64..10.0, 0..=3),
        gamma in proptest::collection::vec(-10.0f64..10.0, 1..=3),
    ) {
        let pv = ParameterVector::new(beta, gamma);
        let json = serde_json::to_string(&pv).unwrap();
        let back: ParameterVector = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(pv, back);
    }

    /// Multinomial parameter blocks survive a JSON round trip exactly.
    #[test]
    fn mnl_parameters_round_trip_through_json(
        m in 2usize..=4,
        k in 0usize..=2,
        fill in -5.0f64..5.0,
    ) {
        let mut pv = MnlParameterVector::zeros(m, k);
        pv.gamma = DMatrix::from_fn(m, m, |r, c| fill * (1 + r * m + c) as f64);
        pv.beta = (0..m)
            .map(|l| DVector::from_fn(k, |j, _| fill - (l * k + j) as f64))
            .collect();
        let json = serde_json::to_string(&pv).unwrap();
        let back: MnlParameterVector = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(pv, back);
    }
}
