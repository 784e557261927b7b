//! Maximization of conditional log-likelihoods (Newton with Armijo line
//! search and ridge fallback), sandwich variance, the two-step GMM combiner
//! of likelihood-equation systems, and the T = 3 moment-condition
//! diagnostics.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::likelihood::{arp_groupwise_scores, loglik_arp, loglik_cox, LikelihoodReport};
use crate::panel::{PanelDataset, ParameterVector};
use crate::sets::GroupSystem;

/// Convergence controls; defaults match the crate-wide contract
/// (`|score|_inf <= 1e-8`, 200 iterations).
#[derive(Debug, Clone, Copy)]
pub struct OptimizerOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 200,
        }
    }
}

/// Which variance estimator to attach to an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarianceKind {
    /// `H^-1 (sum_i s_i s_i') H^-1`; default for multi-group objectives.
    Sandwich,
    /// `(-H)^-1`; valid for single-group true conditional likelihoods.
    InverseHessian,
}

#[derive(Debug, Clone)]
pub struct EstimateResult {
    pub theta: DVector<f64>,
    pub vcov: DMatrix<f64>,
    pub se: DVector<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub objective_path: Vec<f64>,
    pub gradient_norm: f64,
    /// Hansen J statistic, dof, and p-value; present only for GMM fits.
    pub j_statistic: Option<f64>,
    pub j_dof: Option<usize>,
    pub j_p_value: Option<f64>,
    /// Set when the GMM weight needed a pseudo-inverse fallback.
    pub weight_fallback: bool,
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Newton direction for ascent: solve `(-H + ridge I) d = score`, doubling
/// the ridge from `1e-8 |H|` until the system solves and `d` is an ascent
/// direction.
fn ascent_direction(hessian: &DMatrix<f64>, score: &DVector<f64>) -> DVector<f64> {
    let d = score.len();
    let neg_h = -hessian;
    let h_norm = hessian.iter().fold(0.0_f64, |m, x| m.max(x.abs())).max(1e-300);
    let mut ridge = 0.0;
    loop {
        let mut a = neg_h.clone();
        for j in 0..d {
            a[(j, j)] += ridge;
        }
        if let Some(chol) = a.clone().cholesky() {
            let dir = chol.solve(score);
            if dir.dot(score) > 0.0 {
                return dir;
            }
        }
        ridge = if ridge == 0.0 { 1e-8 * h_norm } else { ridge * 2.0 };
        if ridge > 1e12 * h_norm {
            // give up on curvature, fall back to plain gradient ascent
            return score.clone();
        }
    }
}

/// Maximize a concave objective by Newton ascent with Armijo backtracking.
///
/// Returns `converged = false` (with the best iterate) when the gradient
/// tolerance is not reached within the iteration budget; errors only when
/// the objective is degenerate or evaluation fails.
pub fn maximize(
    objective: impl Fn(&DVector<f64>) -> Result<LikelihoodReport>,
    theta0: &DVector<f64>,
    opts: OptimizerOptions,
) -> Result<(EstimateResult, LikelihoodReport)> {
    let mut theta = theta0.clone();
    let mut report = objective(&theta)?;
    if report.informative_total() == 0 {
        return Err(Error::DegenerateObjective);
    }
    let mut objective_path = vec![report.value];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        if inf_norm(&report.score) <= opts.tol {
            converged = true;
            break;
        }
        iterations += 1;
        let dir = ascent_direction(&report.hessian, &report.score);
        let slope = dir.dot(&report.score);
        // The predicted Newton gain is about slope / 2. The objective is a
        // sum over individuals, so its evaluation carries rounding noise of
        // order n * eps * scale. Once the predicted gain sinks below that
        // noise floor, no further improvement is resolvable: the iterate is
        // converged to machine precision even if the gradient tolerance is
        // slightly out of reach.
        let n_terms = report.per_individual_scores.nrows() as f64;
        let noise_floor = 4.0 * f64::EPSILON * (1.0 + report.value.abs() + n_terms);
        if 0.5 * slope <= noise_floor {
            converged = true;
            break;
        }
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand = &theta + step * &dir;
            let cand_report = objective(&cand)?;
            if cand_report.value.is_finite()
                && cand_report.value >= report.value + 1e-4 * step * slope
                && cand_report.value > report.value
            {
                theta = cand;
                report = cand_report;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // no resolvable ascent step: at the noise-floor optimum
            converged = 0.5 * slope <= 60.0 * noise_floor;
            break;
        }
        objective_path.push(report.value);
    }
    if !converged && inf_norm(&report.score) <= opts.tol {
        converged = true;
    }
    let gradient_norm = inf_norm(&report.score);
    let (vcov, se) = match sandwich_vcov(&report) {
        Ok(vcov) => {
            let se = DVector::from_iterator(
                vcov.nrows(),
                (0..vcov.nrows()).map(|j| vcov[(j, j)].max(0.0).sqrt()),
            );
            (vcov, se)
        }
        Err(_) => {
            let d = theta.len();
            (
                DMatrix::from_element(d, d, f64::NAN),
                DVector::from_element(d, f64::NAN),
            )
        }
    };
    Ok((
        EstimateResult {
            theta,
            vcov,
            se,
            converged,
            iterations,
            objective_path,
            gradient_norm,
            j_statistic: None,
            j_dof: None,
            j_p_value: None,
            weight_fallback: false,
        },
        report,
    ))
}

/// Sandwich covariance `H^-1 (sum_i s_i s_i') H^-1` from a fitted report.
pub fn sandwich_vcov(report: &LikelihoodReport) -> Result<DMatrix<f64>> {
    let h_inv = report
        .hessian
        .clone()
        .try_inverse()
        .ok_or(Error::SingularHessian)?;
    let s = &report.per_individual_scores;
    let meat = s.transpose() * s;
    let vcov = &h_inv * meat * h_inv.transpose();
    Ok(symmetrize(vcov))
}

/// Inverse-Hessian covariance `(-H)^-1`; appropriate when the objective is a
/// true conditional likelihood (single group system).
pub fn inverse_hessian_vcov(report: &LikelihoodReport) -> Result<DMatrix<f64>> {
    let neg_h = -&report.hessian;
    neg_h
        .try_inverse()
        .map(symmetrize)
        .ok_or(Error::SingularHessian)
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    let mt = m.transpose();
    (m + mt) * 0.5
}

/// Per-individual moment rows and the Jacobian of their sum.
pub struct MomentEval {
    /// `n x q` matrix of individual moment contributions.
    pub per_individual: DMatrix<f64>,
    /// `q x d` Jacobian of the summed moments.
    pub jacobian_sum: DMatrix<f64>,
}

/// A system of estimating equations usable by [`gmm_estimate`]; typically the
/// stacked score contributions of one conditional likelihood.
pub struct MomentSystem<'a> {
    pub dim_moments: usize,
    pub dim_params: usize,
    pub eval: Box<dyn Fn(&DVector<f64>) -> Result<MomentEval> + 'a>,
}

/// Full score of the AR(p) conditional likelihood as a just-identified
/// moment system in the packed `(beta, gamma)` parameter.
pub fn arp_score_system<'a>(ds: &'a PanelDataset, gs: &'a GroupSystem) -> MomentSystem<'a> {
    let d = ds.k + ds.p;
    MomentSystem {
        dim_moments: d,
        dim_params: d,
        eval: Box::new(move |theta| {
            let pv = ParameterVector::unpack(theta, ds.k, ds.p)?;
            let report = loglik_arp(ds, gs, &pv)?;
            Ok(MomentEval {
                per_individual: report.per_individual_scores.clone(),
                jacobian_sum: report.hessian.clone(),
            })
        }),
    }
}

/// Group-wise stacked scores of the AR(p) conditional likelihood: one moment
/// block of dimension `K + p` per group, for optimal reweighting across
/// groups.
pub fn arp_groupwise_system<'a>(ds: &'a PanelDataset, gs: &'a GroupSystem) -> MomentSystem<'a> {
    let d = ds.k + ds.p;
    let q = gs.groups.len() * d;
    MomentSystem {
        dim_moments: q,
        dim_params: d,
        eval: Box::new(move |theta| {
            let pv = ParameterVector::unpack(theta, ds.k, ds.p)?;
            let (per_individual, jacobian_sum) = arp_groupwise_scores(ds, gs, &pv)?;
            Ok(MomentEval {
                per_individual,
                jacobian_sum,
            })
        }),
    }
}

/// Cox score (single gamma moment) for no-covariate AR(1) data; the
/// parameter vector must be the scalar gamma.
pub fn cox_score_system(ds: &PanelDataset) -> MomentSystem<'_> {
    MomentSystem {
        dim_moments: 1,
        dim_params: 1,
        eval: Box::new(move |theta| {
            let report = loglik_cox(ds, theta[0])?;
            Ok(MomentEval {
                per_individual: report.per_individual_scores.clone(),
                jacobian_sum: report.hessian.clone(),
            })
        }),
    }
}

struct StackedMoments {
    g_bar: DVector<f64>,
    per_individual: DMatrix<f64>,
    jacobian: DMatrix<f64>,
    n: usize,
}

fn stack_systems(systems: &[MomentSystem<'_>], theta: &DVector<f64>) -> Result<StackedMoments> {
    let d = theta.len();
    let q: usize = systems.iter().map(|s| s.dim_moments).sum();
    let mut n = None;
    let mut evals = Vec::with_capacity(systems.len());
    for sys in systems {
        if sys.dim_params != d {
            return Err(Error::DimensionMismatch(format!(
                "moment system expects {} parameters, got {d}",
                sys.dim_params
            )));
        }
        let e = (sys.eval)(theta)?;
        match n {
            None => n = Some(e.per_individual.nrows()),
            Some(n0) if n0 != e.per_individual.nrows() => {
                return Err(Error::DimensionMismatch(
                    "moment systems disagree on sample size".into(),
                ))
            }
            _ => {}
        }
        evals.push(e);
    }
    let n = n.ok_or_else(|| Error::Config("no moment systems supplied".into()))?;
    let mut per_individual = DMatrix::zeros(n, q);
    let mut jacobian = DMatrix::zeros(q, d);
    let mut offset = 0;
    for e in &evals {
        let qk = e.per_individual.ncols();
        per_individual
            .view_mut((0, offset), (n, qk))
            .copy_from(&e.per_individual);
        jacobian
            .view_mut((offset, 0), (qk, d))
            .copy_from(&(&e.jacobian_sum / n as f64));
        offset += qk;
    }
    let g_bar = per_individual.row_sum().transpose() / n as f64;
    Ok(StackedMoments {
        g_bar,
        per_individual,
        jacobian,
        n,
    })
}

fn gmm_step(
    systems: &[MomentSystem<'_>],
    weight: &DMatrix<f64>,
    theta0: &DVector<f64>,
    opts: OptimizerOptions,
) -> Result<(DVector<f64>, StackedMoments, bool, usize)> {
    let mut theta = theta0.clone();
    let mut stacked = stack_systems(systems, &theta)?;
    let mut converged = false;
    let mut iterations = 0;
    let objective = |s: &StackedMoments| (s.g_bar.transpose() * weight * &s.g_bar)[(0, 0)];
    let mut q_val = objective(&stacked);
    while iterations < opts.max_iter {
        let gw = stacked.jacobian.transpose() * weight;
        let grad = 2.0 * &gw * &stacked.g_bar; // gradient of g'Wg
        if inf_norm(&grad) <= opts.tol {
            converged = true;
            break;
        }
        iterations += 1;
        let gwg = &gw * &stacked.jacobian;
        let dir = match gwg.clone().cholesky() {
            Some(chol) => -chol.solve(&(&gw * &stacked.g_bar)),
            None => return Err(Error::RankDeficientMoments),
        };
        let slope = dir.dot(&grad);
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand = &theta + step * &dir;
            let cand_stacked = stack_systems(systems, &cand)?;
            let cand_q = objective(&cand_stacked);
            if cand_q.is_finite() && cand_q <= q_val + 1e-4 * step * slope {
                theta = cand;
                stacked = cand_stacked;
                q_val = cand_q;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if !converged {
        let gw = stacked.jacobian.transpose() * weight;
        let grad = 2.0 * &gw * &stacked.g_bar;
        converged = inf_norm(&grad) <= opts.tol;
    }
    Ok((theta, stacked, converged, iterations))
}

/// Two-step GMM over stacked likelihood-equation systems.
///
/// Step 1 uses the identity weight; step 2 reweights by the inverse of the
/// empirical moment covariance at the step-1 estimate (pseudo-inverse
/// fallback when singular). Returns the estimate, its GMM covariance, and
/// the Hansen J statistic with `dof = dim_moments - dim_params`.
pub fn gmm_estimate(
    systems: &[MomentSystem<'_>],
    theta0: &DVector<f64>,
    opts: OptimizerOptions,
) -> Result<EstimateResult> {
    let d = theta0.len();
    let q: usize = systems.iter().map(|s| s.dim_moments).sum();
    if q < d {
        return Err(Error::RankDeficientMoments);
    }
    let identity = DMatrix::identity(q, q);
    let (theta1, stacked1, _c1, it1) = gmm_step(systems, &identity, theta0, opts)?;

    // empirical moment covariance at the step-1 estimate, with a
    // small-sample dof correction n / (n - d)
    let n = stacked1.n;
    let mut omega = stacked1.per_individual.transpose() * &stacked1.per_individual / n as f64;
    if n > d {
        omega *= n as f64 / (n - d) as f64;
    }
    let mut weight_fallback = false;
    let weight = match omega.clone().try_inverse() {
        Some(w) => symmetrize(w),
        None => {
            weight_fallback = true;
            symmetrize(omega.clone().pseudo_inverse(1e-12).map_err(|_| Error::SingularHessian)?)
        }
    };

    let (theta, stacked, converged, it2) = gmm_step(systems, &weight, &theta1, opts)?;
    let j = n as f64 * (stacked.g_bar.transpose() * &weight * &stacked.g_bar)[(0, 0)];
    let j = j.max(0.0);
    let dof = q - d;
    let j_p_value = if dof > 0 {
        let chi = ChiSquared::new(dof as f64).expect("positive dof");
        Some(1.0 - chi.cdf(j))
    } else {
        None
    };
    let gwg = stacked.jacobian.transpose() * &weight * &stacked.jacobian;
    let vcov = gwg
        .try_inverse()
        .ok_or(Error::RankDeficientMoments)?
        / n as f64;
    let vcov = symmetrize(vcov);
    let se = DVector::from_iterator(d, (0..d).map(|j| vcov[(j, j)].max(0.0).sqrt()));
    let gw = stacked.jacobian.transpose() * &weight;
    let grad = 2.0 * gw * &stacked.g_bar;
    Ok(EstimateResult {
        theta,
        vcov,
        se,
        converged,
        iterations: it1 + it2,
        objective_path: Vec::new(),
        gradient_norm: inf_norm(&grad),
        j_statistic: Some(j),
        j_dof: Some(dof),
        j_p_value,
        weight_fallback,
    })
}

/// One of the six T = 3 moment-condition diagnostics: the sample average of
/// a lag-pattern-specific score component with its standard error.
#[derive(Debug, Clone)]
pub struct MomentCondition {
    pub label: String,
    /// Lag pattern `(y_0, y_2)` this condition restricts to.
    pub lag_pattern: (u8, u8),
    pub average: DVector<f64>,
    pub std_error: DVector<f64>,
    /// Individuals with a nonzero indicator (switcher with matching lags).
    pub cell_count: usize,
}

impl MomentCondition {
    /// Per-component z statistics; NaN on empty cells.
    pub fn z_stats(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.average.len(),
            self.average
                .iter()
                .zip(self.std_error.iter())
                .map(|(a, s)| if *s > 0.0 { a / s } else { f64::NAN }),
        )
    }

    pub fn is_empty_cell(&self) -> bool {
        self.cell_count == 0
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// The six lag-pattern-specific likelihood-equation averages for the
/// T = 3, p = 1 model, evaluated at `theta`. At the true parameter each
/// average converges in probability to zero.
pub fn moment_diagnostics(
    ds: &PanelDataset,
    theta: &ParameterVector,
) -> Result<Vec<MomentCondition>> {
    if ds.t_periods != 3 || ds.p != 1 {
        return Err(Error::WrongShape(format!(
            "moment diagnostics require T = 3, p = 1; got T = {}, p = {}",
            ds.t_periods, ds.p
        )));
    }
    let gamma = theta.gamma[0];
    // (label, lag pattern, gamma multiplier in z, beta-type?)
    let cases: [(&str, (u8, u8), f64, bool); 6] = [
        ("beta | y0=0, y2=0", (0, 0), 0.0, true),
        ("beta | y0=1, y2=1", (1, 1), 0.0, true),
        ("beta | y0=0, y2=1", (0, 1), 1.0, true),
        ("beta | y0=1, y2=0", (1, 0), -1.0, true),
        ("gamma | y0=0, y2=1", (0, 1), 1.0, false),
        ("gamma | y0=1, y2=0", (1, 0), -1.0, false),
    ];
    let mut out = Vec::with_capacity(6);
    for (label, lag, gmul, beta_type) in cases {
        let dim = if beta_type { ds.k } else { 1 };
        let mut rows: Vec<DVector<f64>> = Vec::with_capacity(ds.n);
        let mut cell_count = 0;
        for i in 0..ds.n {
            let (y0, y1, y2, y3) = (
                ds.outcome(i, 0),
                ds.outcome(i, 1),
                ds.outcome(i, 2),
                ds.outcome(i, 3),
            );
            let mut row = DVector::zeros(dim);
            if y1 + y3 == 1 && (y0, y2) == lag {
                cell_count += 1;
                let dx: Vec<f64> = ds
                    .covariate(i, 3)
                    .iter()
                    .zip(ds.covariate(i, 1))
                    .map(|(a, b)| a - b)
                    .collect();
                let z = dx
                    .iter()
                    .zip(theta.beta.iter())
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    + gmul * gamma;
                let resid = y3 as f64 - sigmoid(z);
                if beta_type {
                    for (j, &dxj) in dx.iter().enumerate() {
                        row[j] = resid * dxj;
                    }
                } else {
                    row[0] = resid;
                }
            }
            rows.push(row);
        }
        let n = ds.n as f64;
        let mut average = DVector::zeros(dim);
        for r in &rows {
            average += r;
        }
        average /= n;
        let mut var: DVector<f64> = DVector::zeros(dim);
        for r in &rows {
            for j in 0..dim {
                let dlt = r[j] - average[j];
                var[j] += dlt * dlt;
            }
        }
        let std_error = DVector::from_iterator(
            dim,
            (0..dim).map(|j| (var[j] / f64::max(n - 1.0, 1.0)).sqrt() / n.sqrt()),
        );
        out.push(MomentCondition {
            label: label.to_string(),
            lag_pattern: lag,
            average,
            std_error,
            cell_count,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};

    fn quadratic_report(theta: &DVector<f64>) -> LikelihoodReport {
        // -(theta - 1)^2, concave with maximum at 1
        let x = theta[0];
        LikelihoodReport {
            value: -(x - 1.0) * (x - 1.0),
            score: DVector::from_vec(vec![-2.0 * (x - 1.0)]),
            hessian: DMatrix::from_vec(1, 1, vec![-2.0]),
            per_individual_scores: DMatrix::from_vec(2, 1, vec![-(x - 1.0), -(x - 1.0)]),
            per_group_scores: None,
            informative_count: vec![2],
        }
    }

    #[test]
    fn maximizes_concave_quadratic() {
        let (res, _rep) = maximize(
            |t| Ok(quadratic_report(t)),
            &DVector::from_vec(vec![-7.0]),
            OptimizerOptions::default(),
        )
        .unwrap();
        assert!(res.converged);
        assert_relative_eq!(res.theta[0], 1.0, epsilon = 1e-10);
        // objective path is monotone nondecreasing
        for w in res.objective_path.windows(2) {
            assert!(w[1] >= w[0] - 1e-15);
        }
    }

    #[test]
    fn degenerate_objective_is_an_error() {
        let degenerate = |theta: &DVector<f64>| {
            let mut r = quadratic_report(theta);
            r.informative_count = vec![0];
            Ok(r)
        };
        assert!(matches!(
            maximize(degenerate, &DVector::zeros(1), OptimizerOptions::default()),
            Err(Error::DegenerateObjective)
        ));
    }

    #[test]
    fn sandwich_rejects_singular_hessian() {
        let report = LikelihoodReport {
            value: 0.0,
            score: DVector::zeros(2),
            hessian: DMatrix::zeros(2, 2),
            per_individual_scores: DMatrix::zeros(1, 2),
            per_group_scores: None,
            informative_count: vec![1],
        };
        assert!(matches!(
            sandwich_vcov(&report),
            Err(Error::SingularHessian)
        ));
    }

    #[test]
    fn covariate_scaling_rescales_standard_errors() {
        // direct equivariance check on the sandwich formula
        let s = DMatrix::from_vec(3, 1, vec![0.5, -0.2, 0.9]);
        let h = DMatrix::from_vec(1, 1, vec![-2.0]);
        let base = LikelihoodReport {
            value: 0.0,
            score: DVector::zeros(1),
            hessian: h.clone(),
            per_individual_scores: s.clone(),
            per_group_scores: None,
            informative_count: vec![3],
        };
        let c = 4.0;
        // scaling x by c scales scores by c and the Hessian by c^2
        let scaled = LikelihoodReport {
            value: 0.0,
            score: DVector::zeros(1),
            hessian: &h * c * c,
            per_individual_scores: &s * c,
            per_group_scores: None,
            informative_count: vec![3],
        };
        let v0 = sandwich_vcov(&base).unwrap()[(0, 0)];
        let v1 = sandwich_vcov(&scaled).unwrap()[(0, 0)];
        assert_relative_eq!(v1.sqrt(), v0.sqrt() / c, epsilon = 1e-12);
    }

    #[test]
    fn moment_diagnostics_require_t3() {
        let ds = PanelDataset {
            n: 1,
            t_periods: 4,
            p: 1,
            k: 0,
            ids: vec![0],
            outcomes: vec![vec![0, 1, 0, 1, 0]],
            covariates: vec![vec![vec![]; 4]],
        };
        let theta = ParameterVector::new(vec![], vec![0.0]);
        assert!(matches!(
            moment_diagnostics(&ds, &theta),
            Err(Error::WrongShape(_))
        ));
    }

    #[test]
    fn moment_diagnostics_flag_empty_cells() {
        // all y0 = 0: the y0 = 1 cells are empty
        let ds = PanelDataset {
            n: 2,
            t_periods: 3,
            p: 1,
            k: 1,
            ids: vec![0, 1],
            outcomes: vec![vec![0, 1, 0, 0], vec![0, 0, 1, 1]],
            covariates: vec![
                vec![vec![0.1], vec![0.4], vec![0.2]],
                vec![vec![-0.3], vec![0.5], vec![0.8]],
            ],
        };
        let theta = ParameterVector::new(vec![0.5], vec![0.2]);
        let conds = moment_diagnostics(&ds, &theta).unwrap();
        assert_eq!(conds.len(), 6);
        assert!(conds
            .iter()
            .filter(|c| c.lag_pattern.0 == 1)
            .all(|c| c.is_empty_cell()));
        assert!(conds
            .iter()
            .filter(|c| c.lag_pattern == (0, 0))
            .all(|c| c.cell_count == 1));
    }
}
