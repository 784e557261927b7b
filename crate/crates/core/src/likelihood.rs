//! Binary conditional log-likelihoods: the AR(p) group-system objective, the
//! T = 3 closed form, the Cox estimator's objective, and the beta-only
//! objective, each with analytic score and Hessian.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::expfam::{enumerate_lambda, linear_family_eval, BlockEval};
use crate::panel::{PanelDataset, ParameterVector};
use crate::sets::{
    beta_only_systems_by_tuple, blocks_for_individual, cox_admissible_set, ConditionalBlock,
    GroupSystem,
};

/// Objective value with derivatives and per-unit score decompositions.
#[derive(Debug, Clone)]
pub struct LikelihoodReport {
    pub value: f64,
    pub score: DVector<f64>,
    pub hessian: DMatrix<f64>,
    /// One row per individual; columns sum to `score`.
    pub per_individual_scores: DMatrix<f64>,
    /// Group-wise score sums (rows sum to `score`), for GMM stacking.
    /// `None` for objectives without a shared group system.
    pub per_group_scores: Option<DMatrix<f64>>,
    /// Contributing (informative) individuals per group.
    pub informative_count: Vec<usize>,
}

impl LikelihoodReport {
    fn zeros(n: usize, d: usize, n_groups: usize, with_groups: bool) -> Self {
        Self {
            value: 0.0,
            score: DVector::zeros(d),
            hessian: DMatrix::zeros(d, d),
            per_individual_scores: DMatrix::zeros(n, d),
            per_group_scores: if with_groups {
                Some(DMatrix::zeros(n_groups, d))
            } else {
                None
            },
            informative_count: vec![0; n_groups],
        }
    }

    /// Total number of informative block contributions.
    pub fn informative_total(&self) -> usize {
        self.informative_count.iter().sum()
    }

    fn absorb(&mut self, i: usize, g: Option<usize>, eval: &BlockEval) {
        self.value += eval.value;
        self.score += &eval.grad;
        self.hessian += &eval.hess;
        for (j, v) in eval.grad.iter().enumerate() {
            self.per_individual_scores[(i, j)] += v;
        }
        if let (Some(g), Some(pgs)) = (g, self.per_group_scores.as_mut()) {
            for (j, v) in eval.grad.iter().enumerate() {
                pgs[(g, j)] += v;
            }
        }
        if let Some(g) = g {
            self.informative_count[g] += 1;
        }
    }
}

/// Feature row `a_k = (x_{t_k}, y_{t_k - 1}, .., y_{t_k - p})` of one group
/// time; block features are `f(lambda) = sum_k lambda_k a_k`.
fn feature_rows(ds: &PanelDataset, i: usize, block: &ConditionalBlock) -> Vec<DVector<f64>> {
    let d = ds.k + ds.p;
    block
        .group
        .times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let mut a = DVector::zeros(d);
            for (j, &x) in ds.covariate(i, t).iter().enumerate() {
                a[j] = x;
            }
            for dep in 1..=ds.p {
                a[ds.k + dep - 1] = block.lag_patterns[dep - 1][k] as f64;
            }
            a
        })
        .collect()
}

/// Evaluate one informative block; `None` when the block is degenerate and
/// contributes a structural zero.
pub(crate) fn arp_block_eval(
    ds: &PanelDataset,
    i: usize,
    block: &ConditionalBlock,
    theta: &DVector<f64>,
) -> Option<BlockEval> {
    if !block.informative {
        return None;
    }
    let rows = feature_rows(ds, i, block);
    let lambda = enumerate_lambda(block.group.len(), block.suff_stat);
    let features: Vec<DVector<f64>> = lambda
        .patterns
        .iter()
        .map(|pat| {
            let mut f = DVector::zeros(theta.len());
            for (k, &bit) in pat.iter().enumerate() {
                if bit == 1 {
                    f += &rows[k];
                }
            }
            f
        })
        .collect();
    let observed = lambda
        .patterns
        .iter()
        .position(|pat| pat == &block.outcome)
        .expect("observed outcome must be in its own lambda set");
    Some(linear_family_eval(&features, observed, theta))
}

/// The AR(p) conditional log-likelihood over the maximal group system, with
/// analytic score and Hessian computed in the same pass. Summation runs
/// left-to-right over (i, g) in fixed order.
pub fn loglik_arp(
    ds: &PanelDataset,
    gs: &GroupSystem,
    theta: &ParameterVector,
) -> Result<LikelihoodReport> {
    if theta.beta.len() != ds.k || theta.gamma.len() != ds.p {
        return Err(Error::DimensionMismatch(format!(
            "theta has (K = {}, p = {}), dataset has (K = {}, p = {})",
            theta.beta.len(),
            theta.gamma.len(),
            ds.k,
            ds.p
        )));
    }
    let packed = theta.pack();
    let mut report = LikelihoodReport::zeros(ds.n, packed.len(), gs.groups.len(), true);
    for i in 0..ds.n {
        for block in blocks_for_individual(ds, i, gs)? {
            if let Some(eval) = arp_block_eval(ds, i, &block, &packed) {
                report.absorb(i, Some(block.group_index), &eval);
            }
        }
    }
    Ok(report)
}

/// Per-individual, per-group stacked scores for GMM: returns an
/// `n x (|B| * d)` moment matrix and the `(|B| * d) x d` stacked Jacobian
/// (sum over individuals of each group's Hessian contribution).
pub fn arp_groupwise_scores(
    ds: &PanelDataset,
    gs: &GroupSystem,
    theta: &ParameterVector,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let packed = theta.pack();
    let d = packed.len();
    let n_groups = gs.groups.len();
    let mut moments = DMatrix::zeros(ds.n, n_groups * d);
    let mut jac = DMatrix::zeros(n_groups * d, d);
    for i in 0..ds.n {
        for block in blocks_for_individual(ds, i, gs)? {
            if let Some(eval) = arp_block_eval(ds, i, &block, &packed) {
                let g = block.group_index;
                for j in 0..d {
                    moments[(i, g * d + j)] = eval.grad[j];
                }
                for r in 0..d {
                    for c in 0..d {
                        jac[(g * d + r, c)] += eval.hess[(r, c)];
                    }
                }
            }
        }
    }
    Ok((moments, jac))
}

/// The T = 3, p = 1 closed form: a redundant specialized path used as a
/// cross-check against [`loglik_arp`].
///
/// Each switcher (`y_1 + y_3 = 1`) contributes
/// `y_3 z - ln(1 + exp(z))` with `z = (x_3 - x_1)'beta + c gamma`, where `c`
/// is +1 for lag pattern (0,1), -1 for (1,0), and 0 for equal lags.
pub fn loglik_t3_closed_form(
    ds: &PanelDataset,
    theta: &ParameterVector,
) -> Result<LikelihoodReport> {
    if ds.t_periods != 3 || ds.p != 1 {
        return Err(Error::WrongShape(format!(
            "closed form requires T = 3, p = 1; got T = {}, p = {}",
            ds.t_periods, ds.p
        )));
    }
    if theta.beta.len() != ds.k || theta.gamma.len() != 1 {
        return Err(Error::DimensionMismatch(
            "theta does not match (K, p = 1)".into(),
        ));
    }
    let d = ds.k + 1;
    let gamma = theta.gamma[0];
    let mut report = LikelihoodReport::zeros(ds.n, d, 1, true);
    for i in 0..ds.n {
        let y0 = ds.outcome(i, 0);
        let y1 = ds.outcome(i, 1);
        let y2 = ds.outcome(i, 2);
        let y3 = ds.outcome(i, 3);
        if y1 + y3 != 1 {
            continue;
        }
        let c = y2 as f64 - y0 as f64;
        let dx: Vec<f64> = ds
            .covariate(i, 3)
            .iter()
            .zip(ds.covariate(i, 1))
            .map(|(x3, x1)| x3 - x1)
            .collect();
        let z = dx.iter().zip(theta.beta.iter()).map(|(a, b)| a * b).sum::<f64>() + c * gamma;
        // y3 * z - ln(1 + exp(z)), stable for either sign of z
        let value = y3 as f64 * z - softplus(z);
        let pr = sigmoid(z);
        let resid = y3 as f64 - pr;
        let mut grad = DVector::zeros(d);
        for (j, &dxj) in dx.iter().enumerate() {
            grad[j] = resid * dxj;
        }
        grad[ds.k] = resid * c;
        let w = pr * (1.0 - pr);
        let mut basis = DVector::zeros(d);
        for (j, &dxj) in dx.iter().enumerate() {
            basis[j] = dxj;
        }
        basis[ds.k] = c;
        let mut hess = DMatrix::zeros(d, d);
        hess.syger(-w, &basis, &basis, 0.0);
        for r in 0..d {
            for col in (r + 1)..d {
                hess[(r, col)] = hess[(col, r)];
            }
        }
        report.absorb(i, Some(0), &BlockEval { value, grad, hess });
    }
    Ok(report)
}

/// The Cox conditional log-likelihood for the AR(1) model without covariates:
/// conditioning on `(y_0, y_T, sum of interior outcomes)` per individual.
/// Score and Hessian are in the single parameter gamma.
pub fn loglik_cox(ds: &PanelDataset, gamma: f64) -> Result<LikelihoodReport> {
    if ds.p != 1 {
        return Err(Error::WrongShape(format!(
            "Cox objective requires p = 1, got p = {}",
            ds.p
        )));
    }
    let theta = DVector::from_vec(vec![gamma]);
    let mut report = LikelihoodReport::zeros(ds.n, 1, 1, false);
    for i in 0..ds.n {
        let path = &ds.outcomes[i];
        let admissible = cox_admissible_set(path);
        let stat = |seq: &[u8]| -> f64 {
            seq.windows(2)
                .map(|w| (w[0] * w[1]) as f64)
                .sum()
        };
        let features: Vec<DVector<f64>> = admissible
            .iter()
            .map(|seq| DVector::from_vec(vec![stat(seq)]))
            .collect();
        let observed = admissible
            .iter()
            .position(|seq| seq == path)
            .expect("observed path is always admissible");
        if admissible.len() > 1 {
            report.informative_count[0] += 1;
        }
        let eval = linear_family_eval(&features, observed, &theta);
        report.absorb(i, None, &eval);
    }
    Ok(report)
}

/// The beta-only conditional log-likelihood: static conditional-logit terms
/// over the individual-specific constant-lag systems; gamma and the fixed
/// effects both cancel, so the score has length K.
pub fn loglik_beta_only(ds: &PanelDataset, beta: &DVector<f64>) -> Result<LikelihoodReport> {
    if beta.len() != ds.k {
        return Err(Error::DimensionMismatch(format!(
            "beta has length {}, dataset has K = {}",
            beta.len(),
            ds.k
        )));
    }
    let mut report = LikelihoodReport::zeros(ds.n, ds.k, 1, false);
    for i in 0..ds.n {
        for (_tuple, groups) in beta_only_systems_by_tuple(ds, i) {
            for group in groups {
                let outcome: Vec<u8> = group
                    .times
                    .iter()
                    .map(|&t| ds.outcome(i, t as i64))
                    .collect();
                let s: usize = outcome.iter().map(|&y| y as usize).sum();
                if s == 0 || s == group.len() {
                    continue;
                }
                let rows: Vec<DVector<f64>> = group
                    .times
                    .iter()
                    .map(|&t| DVector::from_column_slice(ds.covariate(i, t)))
                    .collect();
                let lambda = enumerate_lambda(group.len(), s);
                let features: Vec<DVector<f64>> = lambda
                    .patterns
                    .iter()
                    .map(|pat| {
                        let mut f = DVector::zeros(ds.k);
                        for (k, &bit) in pat.iter().enumerate() {
                            if bit == 1 {
                                f += &rows[k];
                            }
                        }
                        f
                    })
                    .collect();
                let observed = lambda
                    .patterns
                    .iter()
                    .position(|pat| pat == &outcome)
                    .unwrap();
                let eval = linear_family_eval(&features, observed, beta);
                report.informative_count[0] += 1;
                report.absorb(i, None, &eval);
            }
        }
    }
    Ok(report)
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sets::build_group_system;
    use approx::assert_relative_eq;

    fn dataset(p: usize, t: usize, k: usize, paths: Vec<Vec<u8>>, xs: Vec<Vec<Vec<f64>>>) -> PanelDataset {
        let n = paths.len();
        PanelDataset {
            n,
            t_periods: t,
            p,
            k,
            ids: (0..n as i64).collect(),
            outcomes: paths,
            covariates: xs,
        }
    }

    #[test]
    fn switcher_contribution_matches_t3_display() {
        // y = (0,1,0,0): lags equal -> contribution y3*dx*beta - ln(1+exp(dx*beta))
        let ds = dataset(
            1,
            3,
            1,
            vec![vec![0, 1, 0, 0]],
            vec![vec![vec![0.2], vec![-0.1], vec![0.9]]],
        );
        let gs = build_group_system(3, 1).unwrap();
        let theta = ParameterVector::new(vec![0.8], vec![1.3]);
        let rep = loglik_arp(&ds, &gs, &theta).unwrap();
        let dx = 0.9 - 0.2;
        let z: f64 = dx * 0.8;
        // y3 = 0
        let want = -(1.0 + z.exp()).ln();
        assert_relative_eq!(rep.value, want, epsilon = 1e-12);
    }

    #[test]
    fn zero_theta_switcher_contributes_log_half() {
        let ds = dataset(
            1,
            3,
            1,
            vec![vec![1, 1, 0, 0]],
            vec![vec![vec![0.3], vec![0.5], vec![-0.4]]],
        );
        let gs = build_group_system(3, 1).unwrap();
        let theta = ParameterVector::new(vec![0.0], vec![0.0]);
        let rep = loglik_arp(&ds, &gs, &theta).unwrap();
        assert_relative_eq!(rep.value, 0.5_f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn third_line_case_of_t3_display() {
        // y0 = 1, y2 = 0, y3 = 1, dx*beta = 0.5, gamma = 1:
        // contribution = (0.5 - 1) - ln(1 + exp(-0.5))
        let ds = dataset(
            1,
            3,
            1,
            vec![vec![1, 0, 0, 1]],
            vec![vec![vec![0.0], vec![0.0], vec![0.5]]],
        );
        let gs = build_group_system(3, 1).unwrap();
        let theta = ParameterVector::new(vec![1.0], vec![1.0]);
        let rep = loglik_arp(&ds, &gs, &theta).unwrap();
        let want = (0.5 - 1.0) - (1.0 + (-0.5_f64).exp()).ln();
        assert_relative_eq!(rep.value, want, epsilon = 1e-12);
        let closed = loglik_t3_closed_form(&ds, &theta).unwrap();
        assert_relative_eq!(closed.value, want, epsilon = 1e-12);
    }

    #[test]
    fn non_informative_blocks_are_structural_zeros() {
        let ds = dataset(
            1,
            3,
            1,
            vec![vec![0, 1, 1, 1]],
            vec![vec![vec![0.2], vec![-0.1], vec![0.9]]],
        );
        let gs = build_group_system(3, 1).unwrap();
        let theta = ParameterVector::new(vec![0.8], vec![1.3]);
        let rep = loglik_arp(&ds, &gs, &theta).unwrap();
        assert_eq!(rep.value, 0.0);
        assert_eq!(rep.score, DVector::zeros(2));
        assert_eq!(rep.informative_total(), 0);
    }

    #[test]
    fn closed_form_rejects_wrong_shape() {
        let ds = dataset(
            1,
            4,
            0,
            vec![vec![0, 1, 0, 0, 1]],
            vec![vec![vec![]; 4]],
        );
        let theta = ParameterVector::new(vec![], vec![0.5]);
        assert!(matches!(
            loglik_t3_closed_form(&ds, &theta),
            Err(Error::WrongShape(_))
        ));
    }

    #[test]
    fn cox_at_zero_gamma_is_log_admissible_set_size() {
        let ds = dataset(
            1,
            4,
            0,
            vec![vec![0, 1, 0, 1, 1], vec![1, 0, 1, 1, 0]],
            vec![vec![vec![]; 4]; 2],
        );
        let rep = loglik_cox(&ds, 0.0).unwrap();
        let want: f64 = (0..2)
            .map(|i| -(cox_admissible_set(&ds.outcomes[i]).len() as f64).ln())
            .sum();
        assert_relative_eq!(rep.value, want, epsilon = 1e-12);
    }

    #[test]
    fn cox_t3_contribution_matches_closed_form() {
        // switcher with y1 + y2 = 1: contribution
        // ln[exp(gamma y2 (y3 - y0)) / (1 + exp(gamma (y3 - y0)))]
        let gamma = 0.7;
        for path in [[0u8, 1, 0, 1], [1, 0, 1, 0], [0, 0, 1, 1], [1, 1, 0, 0]] {
            let ds = dataset(1, 3, 0, vec![path.to_vec()], vec![vec![vec![]; 3]]);
            let rep = loglik_cox(&ds, gamma).unwrap();
            let (y0, _y1, y2, y3) = (path[0] as f64, path[1], path[2] as f64, path[3] as f64);
            let want = gamma * y2 * (y3 - y0) - (1.0 + (gamma * (y3 - y0)).exp()).ln();
            assert_relative_eq!(rep.value, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn beta_only_switcher_is_static_logit_term() {
        // B^0 = {{1,3}}, switcher: contribution y3 dx beta - ln(1 + exp(dx beta))
        let ds = dataset(
            1,
            3,
            1,
            vec![vec![0, 0, 0, 1]],
            vec![vec![vec![0.1], vec![0.7], vec![0.6]]],
        );
        let beta = DVector::from_vec(vec![1.2]);
        let rep = loglik_beta_only(&ds, &beta).unwrap();
        let z: f64 = (0.6 - 0.1) * 1.2;
        assert_relative_eq!(rep.value, z - (1.0 + z.exp()).ln(), epsilon = 1e-12);
    }

    #[test]
    fn beta_only_at_zero_is_log_binomial() {
        let ds = dataset(
            1,
            5,
            1,
            vec![vec![0, 0, 1, 0, 0, 1]],
            vec![vec![vec![0.1], vec![0.7], vec![0.6], vec![-0.2], vec![0.4]]],
        );
        let beta = DVector::from_vec(vec![0.0]);
        let rep = loglik_beta_only(&ds, &beta).unwrap();
        // every informative group of size m and sum s contributes -ln C(m, s)
        let mut want = 0.0;
        for (_tuple, groups) in beta_only_systems_by_tuple(&ds, 0) {
            for g in groups {
                let s: usize = g.times.iter().map(|&t| ds.outcome(0, t as i64) as usize).sum();
                if s > 0 && s < g.len() {
                    want -= (enumerate_lambda(g.len(), s).patterns.len() as f64).ln();
                }
            }
        }
        assert_relative_eq!(rep.value, want, epsilon = 1e-12);
    }

    #[test]
    fn value_invariant_under_covariate_translation() {
        let ds = dataset(
            1,
            4,
            1,
            vec![vec![0, 1, 0, 0, 1], vec![1, 1, 1, 0, 1]],
            vec![
                vec![vec![0.2], vec![-0.1], vec![0.9], vec![0.4]],
                vec![vec![-0.5], vec![0.3], vec![0.1], vec![0.8]],
            ],
        );
        let gs = build_group_system(4, 1).unwrap();
        let theta = ParameterVector::new(vec![0.8], vec![-0.6]);
        let base = loglik_arp(&ds, &gs, &theta).unwrap();
        let mut shifted = ds.clone();
        for i in 0..shifted.n {
            for t in 0..shifted.t_periods {
                shifted.covariates[i][t][0] += 7.5;
            }
        }
        let rep = loglik_arp(&shifted, &gs, &theta).unwrap();
        assert_relative_eq!(rep.value, base.value, epsilon = 1e-10);
        assert_relative_eq!(rep.score[0], base.score[0], epsilon = 1e-9);
    }

    #[test]
    fn score_is_column_sum_of_per_individual_rows() {
        let ds = dataset(
            1,
            4,
            1,
            vec![vec![0, 1, 0, 0, 1], vec![1, 0, 1, 1, 0]],
            vec![
                vec![vec![0.2], vec![-0.1], vec![0.9], vec![0.4]],
                vec![vec![-0.5], vec![0.3], vec![0.1], vec![0.8]],
            ],
        );
        let gs = build_group_system(4, 1).unwrap();
        let theta = ParameterVector::new(vec![0.3], vec![0.9]);
        let rep = loglik_arp(&ds, &gs, &theta).unwrap();
        for j in 0..2 {
            let col_sum: f64 = (0..ds.n).map(|i| rep.per_individual_scores[(i, j)]).sum();
            assert_relative_eq!(col_sum, rep.score[j], epsilon = 1e-12);
        }
        let pgs = rep.per_group_scores.as_ref().unwrap();
        for j in 0..2 {
            let g_sum: f64 = (0..pgs.nrows()).map(|g| pgs[(g, j)]).sum();
            assert_relative_eq!(g_sum, rep.score[j], epsilon = 1e-12);
        }
    }
}
