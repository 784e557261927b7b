//! Multinomial AR(1) conditional log-likelihood under the identification
//! restrictions `gamma_{k1} = gamma_{1k} = 0` and `beta_1 = 0` (alternative 1
//! is the base category). The sufficient statistic of a group is the vector
//! of per-alternative outcome counts.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::expfam::{enumerate_mnl_lambda, linear_family_eval};
use crate::likelihood::LikelihoodReport;
use crate::panel::{MnlPanelDataset, MnlParameterVector};
use crate::sets::{Group, GroupSystem};

/// One group's view of a multinomial path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MnlBlock {
    pub group_index: usize,
    pub group: Group,
    /// `y_{i, t - 1}` per group time, values in {1..M}.
    pub lag_pattern: Vec<u8>,
    pub outcome: Vec<u8>,
    /// `counts[l - 1]` = occurrences of alternative `l` within the group.
    pub counts: Vec<usize>,
    pub informative: bool,
}

/// Free-parameter counts under the restrictions: `(M-1)^2` feedback
/// parameters (`M^2 - (2M - 1)`) plus `(M-1) K` slope parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MnlDim {
    pub gamma_free: usize,
    pub beta_free: usize,
}

impl MnlDim {
    pub fn total(&self) -> usize {
        self.gamma_free + self.beta_free
    }
}

pub fn mnl_identified_dim(m: usize, k: usize) -> Result<MnlDim> {
    if m < 2 {
        return Err(Error::Config(format!(
            "multinomial model needs M >= 2 alternatives, got {m}"
        )));
    }
    Ok(MnlDim {
        gamma_free: (m - 1) * (m - 1),
        beta_free: (m - 1) * k,
    })
}

/// Fill every group's block from individual `i`'s path.
pub fn mnl_blocks_for_individual(
    ds: &MnlPanelDataset,
    i: usize,
    gs: &GroupSystem,
) -> Result<Vec<MnlBlock>> {
    if gs.p != 1 || gs.t_periods != ds.t_periods {
        return Err(Error::DimensionMismatch(format!(
            "MNL dataset (T = {}) needs a p = 1 group system, got (T = {}, p = {})",
            ds.t_periods, gs.t_periods, gs.p
        )));
    }
    let mut blocks = Vec::with_capacity(gs.groups.len());
    for (g, group) in gs.groups.iter().enumerate() {
        let outcome: Vec<u8> = group.times.iter().map(|&t| ds.outcome(i, t)).collect();
        let lag_pattern: Vec<u8> = group.times.iter().map(|&t| ds.outcome(i, t - 1)).collect();
        let mut counts = vec![0usize; ds.m];
        for &y in &outcome {
            counts[y as usize - 1] += 1;
        }
        // degenerate iff a single alternative fills the whole group
        let informative = counts.iter().filter(|&&c| c > 0).count() > 1;
        blocks.push(MnlBlock {
            group_index: g,
            group: group.clone(),
            lag_pattern,
            outcome,
            counts,
            informative,
        });
    }
    Ok(blocks)
}

/// Feature vector of "outcome `l` at group position `k`" in the packed free
/// parameterization; zero for the base alternative.
fn mnl_feature(
    ds: &MnlPanelDataset,
    i: usize,
    t: usize,
    lag: u8,
    l: u8,
    dim: usize,
) -> DVector<f64> {
    let m = ds.m;
    let mut f = DVector::zeros(dim);
    if l == 1 {
        return f;
    }
    let l = l as usize;
    if lag > 1 {
        let row = lag as usize - 2;
        f[row * (m - 1) + (l - 2)] = 1.0;
    }
    let beta_offset = (m - 1) * (m - 1) + (l - 2) * ds.k;
    for (j, &x) in ds.covariate(i, t, l).iter().enumerate() {
        f[beta_offset + j] = x;
    }
    f
}

/// The multinomial conditional log-likelihood with analytic score and
/// Hessian in the free parameters.
pub fn loglik_mnl(
    ds: &MnlPanelDataset,
    gs: &GroupSystem,
    theta: &MnlParameterVector,
) -> Result<LikelihoodReport> {
    if theta.m != ds.m || theta.k != ds.k {
        return Err(Error::DimensionMismatch(format!(
            "theta has (M = {}, K = {}), dataset has (M = {}, K = {})",
            theta.m, theta.k, ds.m, ds.k
        )));
    }
    if !theta.restrictions_hold() {
        return Err(Error::Config(
            "identification restrictions gamma_{k1} = gamma_{1k} = 0, beta_1 = 0 must hold".into(),
        ));
    }
    let packed = theta.pack();
    let dim = packed.len();
    let mut report = empty_report(ds.n, dim, gs.groups.len());
    for i in 0..ds.n {
        for block in mnl_blocks_for_individual(ds, i, gs)? {
            if !block.informative {
                continue;
            }
            let patterns = enumerate_mnl_lambda(&block.counts);
            let features: Vec<DVector<f64>> = patterns
                .iter()
                .map(|pat| {
                    let mut f = DVector::zeros(dim);
                    for (k, &l) in pat.iter().enumerate() {
                        let t = block.group.times[k];
                        f += mnl_feature(ds, i, t, block.lag_pattern[k], l, dim);
                    }
                    f
                })
                .collect();
            let observed = patterns.iter().position(|p| p == &block.outcome).unwrap();
            let eval = linear_family_eval(&features, observed, &packed);
            report.value += eval.value;
            report.score += &eval.grad;
            report.hessian += &eval.hess;
            for (j, v) in eval.grad.iter().enumerate() {
                report.per_individual_scores[(i, j)] += v;
                if let Some(pgs) = report.per_group_scores.as_mut() {
                    pgs[(block.group_index, j)] += v;
                }
            }
            report.informative_count[block.group_index] += 1;
        }
    }
    Ok(report)
}

fn empty_report(n: usize, dim: usize, n_groups: usize) -> LikelihoodReport {
    LikelihoodReport {
        value: 0.0,
        score: DVector::zeros(dim),
        hessian: nalgebra::DMatrix::zeros(dim, dim),
        per_individual_scores: nalgebra::DMatrix::zeros(n, dim),
        per_group_scores: Some(nalgebra::DMatrix::zeros(n_groups, dim)),
        informative_count: vec![0; n_groups],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sets::build_group_system;
    use approx::assert_relative_eq;

    fn toy_mnl(m: usize, k: usize, t: usize, paths: Vec<Vec<u8>>, xs: Vec<Vec<Vec<Vec<f64>>>>) -> MnlPanelDataset {
        let n = paths.len();
        MnlPanelDataset {
            n,
            t_periods: t,
            m,
            k,
            ids: (0..n as i64).collect(),
            outcomes: paths,
            covariates: xs,
        }
    }

    #[test]
    fn identified_dims_match_counting_rule() {
        assert_eq!(
            mnl_identified_dim(2, 0).unwrap(),
            MnlDim {
                gamma_free: 1,
                beta_free: 0
            }
        );
        assert_eq!(mnl_identified_dim(3, 0).unwrap().gamma_free, 4);
        assert_eq!(mnl_identified_dim(3, 2).unwrap().total(), 4 + 4);
        assert!(mnl_identified_dim(1, 1).is_err());
    }

    #[test]
    fn zero_theta_two_outcome_block_is_log_half() {
        // M = 3, T = 3, group {1,3}, outcomes (2, 3): two permutations
        let xs = vec![vec![vec![vec![0.3], vec![0.1], vec![-0.2]]; 3]];
        let ds = toy_mnl(3, 1, 3, vec![vec![1, 2, 1, 3]], xs);
        let gs = build_group_system(3, 1).unwrap();
        let theta = MnlParameterVector::zeros(3, 1);
        let rep = loglik_mnl(&ds, &gs, &theta).unwrap();
        assert_relative_eq!(rep.value, 0.5_f64.ln(), epsilon = 1e-12);
        assert_eq!(rep.informative_count, vec![1]);
    }

    #[test]
    fn constant_outcome_blocks_are_non_informative() {
        let xs = vec![vec![vec![vec![0.0], vec![0.0], vec![0.0]]; 3]];
        let ds = toy_mnl(3, 1, 3, vec![vec![1, 2, 1, 2]], xs);
        let gs = build_group_system(3, 1).unwrap();
        let theta = MnlParameterVector::zeros(3, 1);
        let rep = loglik_mnl(&ds, &gs, &theta).unwrap();
        assert_eq!(rep.value, 0.0);
        assert_eq!(rep.informative_count, vec![0]);
    }

    #[test]
    fn rejects_unrestricted_parameters() {
        let xs = vec![vec![vec![vec![], vec![], vec![]]; 3]];
        let ds = toy_mnl(3, 0, 3, vec![vec![1, 2, 1, 3]], xs);
        let gs = build_group_system(3, 1).unwrap();
        let mut theta = MnlParameterVector::zeros(3, 0);
        theta.gamma[(0, 1)] = 0.5;
        assert!(matches!(
            loglik_mnl(&ds, &gs, &theta),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn row_shift_on_constant_lag_blocks_leaves_value_unchanged() {
        // lag pattern constant (= 2) within the group: adding c to the whole
        // gamma row 2 shifts every pattern's eta by a constant.
        let xs = vec![vec![vec![vec![0.4], vec![-0.3], vec![0.9]]; 3]];
        let ds = toy_mnl(3, 1, 3, vec![vec![2, 2, 2, 3]], xs);
        let gs = build_group_system(3, 1).unwrap();
        let mut theta = MnlParameterVector::zeros(3, 1);
        theta.gamma[(1, 1)] = 0.4;
        theta.gamma[(1, 2)] = -0.7;
        theta.beta[1] = DVector::from_vec(vec![0.5]);
        theta.beta[2] = DVector::from_vec(vec![-0.2]);
        let base = loglik_mnl(&ds, &gs, &theta).unwrap();
        let mut shifted = theta.clone();
        shifted.gamma[(1, 1)] += 2.5;
        shifted.gamma[(1, 2)] += 2.5;
        let rep = loglik_mnl(&ds, &gs, &shifted).unwrap();
        assert_relative_eq!(rep.value, base.value, epsilon = 1e-10);
    }
}
