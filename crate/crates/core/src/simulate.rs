//! Data-generating-process simulation for binary AR(p) and multinomial AR(1)
//! panels with fixed effects, a naive pooled-logit foil estimator, and the
//! Monte Carlo replication harness producing bias/RMSE/coverage tables.
//!
//! Reproducibility: every individual path is drawn from its own counter-based
//! substream (ChaCha8 seeded through a splitmix64 chain keyed by master seed,
//! sample size, replication, and individual), so results are identical under
//! any parallel schedule.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;

use nalgebra::DVector;
use rand::distributions::Distribution;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::Normal;

use crate::error::{Error, Result};
use crate::inference::{
    arp_score_system, cox_score_system, gmm_estimate, maximize, EstimateResult, OptimizerOptions,
};
use crate::likelihood::{loglik_arp, loglik_beta_only, loglik_cox, LikelihoodReport};
use crate::mnl::loglik_mnl;
use crate::panel::{MnlPanelDataset, MnlParameterVector, PanelDataset, ParameterVector};
use crate::sets::{build_group_system, GroupSystem};

/// Population law of the individual fixed effect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaDistribution {
    Fixed(f64),
    Normal { mean: f64, sd: f64 },
    /// Support points with probabilities; probabilities must sum to 1.
    Discrete(Vec<(f64, f64)>),
}

impl AlphaDistribution {
    fn validate(&self) -> Result<()> {
        match self {
            AlphaDistribution::Normal { sd, .. } if *sd < 0.0 => Err(Error::Config(
                "alpha distribution needs sd >= 0".into(),
            )),
            AlphaDistribution::Discrete(points) => {
                let total: f64 = points.iter().map(|(_, w)| w).sum();
                if points.is_empty() || (total - 1.0).abs() > 1e-10 {
                    Err(Error::Config(
                        "discrete alpha probabilities must sum to 1".into(),
                    ))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            AlphaDistribution::Fixed(a) => *a,
            AlphaDistribution::Normal { mean, sd } => {
                if *sd == 0.0 {
                    *mean
                } else {
                    Normal::new(*mean, *sd).expect("validated").sample(rng)
                }
            }
            AlphaDistribution::Discrete(points) => {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                for (v, w) in points {
                    acc += w;
                    if u <= acc {
                        return *v;
                    }
                }
                points.last().expect("validated nonempty").0
            }
        }
    }
}

/// Rule for the `p` pre-sample outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialRule {
    /// Run the individual's own transition law for `periods` throwaway
    /// periods from an all-zero state (approximate stationarity).
    Burnin { periods: usize },
    /// Independent Bernoulli(`prob`) pre-sample outcomes.
    FixedBernoulli { prob: f64 },
}

impl Default for InitialRule {
    fn default() -> Self {
        InitialRule::Burnin { periods: 50 }
    }
}

/// Population form of the binary AR(p) data-generating process: parameters
/// are fixed, fixed effects and covariates are drawn per individual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationDgp {
    pub p: usize,
    pub t_periods: usize,
    pub theta: ParameterVector,
    pub alpha: AlphaDistribution,
    /// Covariates are i.i.d. normal(0, x_sd^2) per (i, t, component).
    #[serde(default = "default_x_sd")]
    pub x_sd: f64,
    #[serde(default)]
    pub initial: InitialRule,
}

fn default_x_sd() -> f64 {
    1.0
}

impl PopulationDgp {
    pub fn k(&self) -> usize {
        self.theta.beta.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.theta.gamma.len() != self.p {
            return Err(Error::Config(format!(
                "binary DGP needs gamma of length p = {}",
                self.p
            )));
        }
        if self.t_periods < self.p + 2 {
            return Err(Error::Config(format!(
                "binary DGP needs T >= p + 2, got T = {}",
                self.t_periods
            )));
        }
        if self.x_sd < 0.0 {
            return Err(Error::Config("x_sd must be nonnegative".into()));
        }
        self.alpha.validate()
    }
}

/// Population form of the multinomial AR(1) data-generating process. The
/// feedback matrix and slopes must satisfy the base-category restrictions so
/// the estimand coincides with the packed free parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MnlPopulationDgp {
    pub t_periods: usize,
    pub theta: MnlParameterVector,
    /// Alternative-specific fixed effects, drawn i.i.d. across alternatives
    /// 2..M (alpha_1 = 0 as the base normalization).
    pub alpha: AlphaDistribution,
    #[serde(default = "default_x_sd")]
    pub x_sd: f64,
    #[serde(default)]
    pub initial: InitialRule,
}

impl MnlPopulationDgp {
    pub fn m(&self) -> usize {
        self.theta.m
    }

    pub fn k(&self) -> usize {
        self.theta.k
    }

    pub fn validate(&self) -> Result<()> {
        if self.theta.m < 2 {
            return Err(Error::Config("multinomial DGP needs M >= 2".into()));
        }
        if !self.theta.restrictions_hold() {
            return Err(Error::Config(
                "multinomial DGP parameters must satisfy the base-category restrictions".into(),
            ));
        }
        if self.t_periods < 3 {
            return Err(Error::Config("multinomial DGP needs T >= 3".into()));
        }
        if self.x_sd < 0.0 {
            return Err(Error::Config("x_sd must be nonnegative".into()));
        }
        self.alpha.validate()
    }
}

/// Either DGP shape, as configured in a Monte Carlo run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dgp {
    Binary(PopulationDgp),
    Multinomial(MnlPopulationDgp),
}

impl Dgp {
    pub fn validate(&self) -> Result<()> {
        match self {
            Dgp::Binary(d) => d.validate(),
            Dgp::Multinomial(d) => d.validate(),
        }
    }
}

/// A simulated dataset of either shape.
#[derive(Debug, Clone, PartialEq)]
pub enum SimulatedPanel {
    Binary(PanelDataset),
    Multinomial(MnlPanelDataset),
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic substream seed for a (label, label, label) triple.
pub fn derive_seed(master: u64, a: u64, b: u64, c: u64) -> u64 {
    let mut s = splitmix64(master);
    s = splitmix64(s.wrapping_add(splitmix64(a)));
    s = splitmix64(s.wrapping_add(splitmix64(b)));
    splitmix64(s.wrapping_add(splitmix64(c)))
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn draw_x(rng: &mut ChaCha8Rng, k: usize, sd: f64) -> Vec<f64> {
    if sd == 0.0 {
        return vec![0.0; k];
    }
    let normal = Normal::new(0.0, sd).expect("positive sd");
    (0..k).map(|_| normal.sample(rng)).collect()
}

/// Forward-simulate one binary individual; returns `(outcomes, covariates)`
/// with outcomes `y_{1-p}..y_T` and covariates indexed by period.
fn simulate_binary_individual(
    dgp: &PopulationDgp,
    rng: &mut ChaCha8Rng,
) -> (Vec<u8>, Vec<Vec<f64>>) {
    let p = dgp.p;
    let k = dgp.k();
    let alpha = dgp.alpha.draw(rng);
    // state[0] = y_{t-1}, .., state[p-1] = y_{t-p}
    let mut state: Vec<u8> = match dgp.initial {
        InitialRule::FixedBernoulli { prob } => {
            (0..p).map(|_| u8::from(rng.gen::<f64>() < prob)).collect()
        }
        InitialRule::Burnin { periods } => {
            let mut s = vec![0u8; p];
            for _ in 0..periods {
                let x = draw_x(rng, k, dgp.x_sd);
                let y = draw_binary(&dgp.theta, alpha, &s, &x, rng);
                s.rotate_right(1);
                s[0] = y;
            }
            s
        }
    };
    // pre-sample outcomes oldest first: y_{1-p}, .., y_0
    let mut outcomes: Vec<u8> = state.iter().rev().copied().collect();
    let mut covariates = Vec::with_capacity(dgp.t_periods);
    for _ in 1..=dgp.t_periods {
        let x = draw_x(rng, k, dgp.x_sd);
        let y = draw_binary(&dgp.theta, alpha, &state, &x, rng);
        outcomes.push(y);
        covariates.push(x);
        state.rotate_right(1);
        state[0] = y;
    }
    (outcomes, covariates)
}

fn draw_binary(
    theta: &ParameterVector,
    alpha: f64,
    state: &[u8],
    x: &[f64],
    rng: &mut ChaCha8Rng,
) -> u8 {
    let mut z = alpha;
    for (d, &lag) in state.iter().enumerate() {
        z += theta.gamma[d] * lag as f64;
    }
    for (j, &xv) in x.iter().enumerate() {
        z += theta.beta[j] * xv;
    }
    u8::from(rng.gen::<f64>() < sigmoid(z))
}

/// Simulate a balanced binary panel; fully determined by `seed`.
pub fn simulate_panel(dgp: &PopulationDgp, n: usize, seed: u64) -> Result<PanelDataset> {
    dgp.validate()?;
    let mut outcomes = Vec::with_capacity(n);
    let mut covariates = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0, 0, i as u64));
        let (y, x) = simulate_binary_individual(dgp, &mut rng);
        outcomes.push(y);
        covariates.push(x);
    }
    Ok(PanelDataset {
        n,
        t_periods: dgp.t_periods,
        p: dgp.p,
        k: dgp.k(),
        ids: (0..n as i64).collect(),
        outcomes,
        covariates,
    })
}

fn mnl_draw(
    theta: &MnlParameterVector,
    alphas: &[f64],
    lag: u8,
    x: &[Vec<f64>],
    rng: &mut ChaCha8Rng,
) -> u8 {
    // type-1 extreme value utility maximization: softmax transition law
    let mut best = 1u8;
    let mut best_u = f64::NEG_INFINITY;
    for l in 1..=theta.m {
        let mut u = alphas[l - 1] + theta.gamma[(lag as usize - 1, l - 1)];
        for (j, &xv) in x[l - 1].iter().enumerate() {
            u += theta.beta[l - 1][j] * xv;
        }
        let unif: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        u += -(-unif.ln()).ln();
        if u > best_u {
            best_u = u;
            best = l as u8;
        }
    }
    best
}

fn draw_mnl_x(rng: &mut ChaCha8Rng, m: usize, k: usize, sd: f64) -> Vec<Vec<f64>> {
    (0..m).map(|_| draw_x(rng, k, sd)).collect()
}

/// Simulate a balanced multinomial panel; fully determined by `seed`.
pub fn simulate_panel_mnl(dgp: &MnlPopulationDgp, n: usize, seed: u64) -> Result<MnlPanelDataset> {
    dgp.validate()?;
    let m = dgp.m();
    let k = dgp.k();
    let mut outcomes = Vec::with_capacity(n);
    let mut covariates = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0, 0, i as u64));
        let mut alphas = vec![0.0; m];
        for a in alphas.iter_mut().skip(1) {
            *a = dgp.alpha.draw(&mut rng);
        }
        let mut lag: u8 = match dgp.initial {
            InitialRule::FixedBernoulli { prob } => {
                // interpret prob as uniform-vs-base mixing: base category with
                // probability 1 - prob, otherwise uniform over 2..M
                if m > 1 && rng.gen::<f64>() < prob {
                    rng.gen_range(2..=m) as u8
                } else {
                    1
                }
            }
            InitialRule::Burnin { periods } => {
                let mut l = 1u8;
                for _ in 0..periods {
                    let x = draw_mnl_x(&mut rng, m, k, dgp.x_sd);
                    l = mnl_draw(&dgp.theta, &alphas, l, &x, &mut rng);
                }
                l
            }
        };
        let mut path = vec![lag];
        let mut xs = Vec::with_capacity(dgp.t_periods);
        for _ in 1..=dgp.t_periods {
            let x = draw_mnl_x(&mut rng, m, k, dgp.x_sd);
            lag = mnl_draw(&dgp.theta, &alphas, lag, &x, &mut rng);
            path.push(lag);
            xs.push(x);
        }
        outcomes.push(path);
        covariates.push(xs);
    }
    Ok(MnlPanelDataset {
        n,
        t_periods: dgp.t_periods,
        m,
        k,
        ids: (0..n as i64).collect(),
        outcomes,
        covariates,
    })
}

/// Pooled logit ignoring fixed effects: an ordinary logit of `y_t` on
/// covariates, lagged outcomes, and an intercept over all (i, t). Provided
/// as a foil — it is inconsistent under individual heterogeneity.
///
/// Parameter layout: `(beta[K], gamma[p], intercept)`.
pub fn loglik_pooled(ds: &PanelDataset, theta: &DVector<f64>) -> Result<LikelihoodReport> {
    let d = ds.k + ds.p + 1;
    if theta.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "pooled logit expects {d} parameters (beta, gamma, intercept), got {}",
            theta.len()
        )));
    }
    let mut report = LikelihoodReport {
        value: 0.0,
        score: DVector::zeros(d),
        hessian: nalgebra::DMatrix::zeros(d, d),
        per_individual_scores: nalgebra::DMatrix::zeros(ds.n, d),
        per_group_scores: None,
        informative_count: vec![0],
    };
    for i in 0..ds.n {
        for t in 1..=ds.t_periods as i64 {
            let mut f = DVector::zeros(d);
            for (j, &xv) in ds.covariate(i, t as usize).iter().enumerate() {
                f[j] = xv;
            }
            for dlag in 1..=ds.p as i64 {
                f[ds.k + dlag as usize - 1] = ds.outcome(i, t - dlag) as f64;
            }
            f[d - 1] = 1.0;
            let y = ds.outcome(i, t) as f64;
            let z = f.dot(theta);
            let p1 = sigmoid(z);
            // log-likelihood of a Bernoulli(sigmoid(z)) observation
            let softplus = |v: f64| {
                if v > 0.0 {
                    v + (-v).exp().ln_1p()
                } else {
                    v.exp().ln_1p()
                }
            };
            report.value += y * z - softplus(z);
            let resid = y - p1;
            for j in 0..d {
                let s = resid * f[j];
                report.score[j] += s;
                report.per_individual_scores[(i, j)] += s;
            }
            let w = p1 * (1.0 - p1);
            for r in 0..d {
                for c in 0..d {
                    report.hessian[(r, c)] -= w * f[r] * f[c];
                }
            }
        }
    }
    report.informative_count = vec![ds.n];
    Ok(report)
}

/// Estimators the Monte Carlo harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    ArpCmle,
    Cox,
    BetaOnly,
    Mnl,
    GmmCombined,
    PooledLogit,
}

impl EstimatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::ArpCmle => "arp_cmle",
            EstimatorKind::Cox => "cox",
            EstimatorKind::BetaOnly => "beta_only",
            EstimatorKind::Mnl => "mnl",
            EstimatorKind::GmmCombined => "gmm_combined",
            EstimatorKind::PooledLogit => "pooled_logit",
        }
    }
}

/// Monte Carlo experiment configuration; unknown JSON keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub reps: usize,
    pub n_grid: Vec<usize>,
    pub dgp: Dgp,
    pub estimators: Vec<EstimatorKind>,
    pub seed: u64,
    #[serde(default = "default_ci_level")]
    pub ci_level: f64,
}

fn default_ci_level() -> f64 {
    0.95
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::Config("reps must be >= 1".into()));
        }
        if self.n_grid.is_empty() || self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("n_grid must be strictly increasing".into()));
        }
        if !(0.0 < self.ci_level && self.ci_level < 1.0) {
            return Err(Error::Config("ci_level must be in (0, 1)".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::Config("at least one estimator required".into()));
        }
        let is_mnl = matches!(self.dgp, Dgp::Multinomial(_));
        for e in &self.estimators {
            let fits = match e {
                EstimatorKind::Mnl => is_mnl,
                _ => !is_mnl,
            };
            if !fits {
                return Err(Error::Config(format!(
                    "estimator {} does not fit the configured DGP shape",
                    e.name()
                )));
            }
        }
        self.dgp.validate()
    }
}

/// One estimated parameter in one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub rep: usize,
    pub n: usize,
    pub estimator: String,
    pub param: String,
    pub estimate: f64,
    pub se: f64,
    pub converged: bool,
}

/// Aggregate statistics for one estimator x parameter x sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McCell {
    pub estimator: String,
    pub param: String,
    pub n: usize,
    pub truth: f64,
    pub bias: f64,
    pub rmse: f64,
    pub sd: f64,
    pub mean_se: f64,
    pub coverage: f64,
    pub convergence_rate: f64,
    /// `RMSE(n) / RMSE(4n)` when `4n` is also in the grid.
    pub rmse_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub cells: Vec<McCell>,
}

/// Full harness output: per-replication rows plus the aggregate summary.
#[derive(Debug, Clone, PartialEq)]
pub struct McRunResult {
    pub replications: Vec<Replication>,
    pub summary: McSummary,
}

/// Parameter names and true values for one estimator under one DGP.
fn truth_for(kind: EstimatorKind, dgp: &Dgp) -> Vec<(String, f64)> {
    match (kind, dgp) {
        (EstimatorKind::Mnl, Dgp::Multinomial(d)) => {
            let m = d.theta.m;
            let k = d.theta.k;
            let packed = d.theta.pack();
            let mut names = Vec::new();
            for lag in 2..=m {
                for l in 2..=m {
                    names.push(format!("gamma_{lag}{l}"));
                }
            }
            for l in 2..=m {
                for j in 1..=k {
                    names.push(format!("beta_{l}_{j}"));
                }
            }
            names
                .into_iter()
                .zip(packed.iter().copied())
                .collect()
        }
        (kind, Dgp::Binary(d)) => {
            let mut out = Vec::new();
            match kind {
                EstimatorKind::Cox | EstimatorKind::GmmCombined => {
                    out.push(("gamma1".to_string(), d.theta.gamma[0]));
                }
                EstimatorKind::BetaOnly => {
                    for (j, &b) in d.theta.beta.iter().enumerate() {
                        out.push((format!("beta{}", j + 1), b));
                    }
                }
                _ => {
                    for (j, &b) in d.theta.beta.iter().enumerate() {
                        out.push((format!("beta{}", j + 1), b));
                    }
                    for (dlag, &g) in d.theta.gamma.iter().enumerate() {
                        out.push((format!("gamma{}", dlag + 1), g));
                    }
                }
            }
            out
        }
        _ => Vec::new(),
    }
}

/// Run one estimator on one dataset; returns (estimates, ses, converged).
fn apply_estimator(
    kind: EstimatorKind,
    data: &SimulatedPanel,
    gs: Option<&GroupSystem>,
    opts: OptimizerOptions,
) -> Result<(DVector<f64>, DVector<f64>, bool)> {
    match (kind, data) {
        (EstimatorKind::ArpCmle, SimulatedPanel::Binary(ds)) => {
            let gs = gs.expect("group system prebuilt for binary estimators");
            let d = ds.k + ds.p;
            let (res, _) = maximize(
                |v| {
                    let pv = ParameterVector::unpack(v, ds.k, ds.p)?;
                    loglik_arp(ds, gs, &pv)
                },
                &DVector::zeros(d),
                opts,
            )?;
            Ok((res.theta, res.se, res.converged))
        }
        (EstimatorKind::Cox, SimulatedPanel::Binary(ds)) => {
            let (res, _) = maximize(|v| loglik_cox(ds, v[0]), &DVector::zeros(1), opts)?;
            Ok((res.theta, res.se, res.converged))
        }
        (EstimatorKind::BetaOnly, SimulatedPanel::Binary(ds)) => {
            let (res, _) = maximize(
                |v| loglik_beta_only(ds, v),
                &DVector::zeros(ds.k),
                opts,
            )?;
            Ok((res.theta, res.se, res.converged))
        }
        (EstimatorKind::PooledLogit, SimulatedPanel::Binary(ds)) => {
            let d = ds.k + ds.p + 1;
            let (res, _) = maximize(|v| loglik_pooled(ds, v), &DVector::zeros(d), opts)?;
            // drop the intercept from the report
            let keep = ds.k + ds.p;
            Ok((
                res.theta.rows(0, keep).into_owned(),
                res.se.rows(0, keep).into_owned(),
                res.converged,
            ))
        }
        (EstimatorKind::GmmCombined, SimulatedPanel::Binary(ds)) => {
            if ds.k != 0 || ds.p != 1 {
                return Err(Error::Config(
                    "gmm_combined requires a no-covariate AR(1) panel".into(),
                ));
            }
            let gs = gs.expect("group system prebuilt for binary estimators");
            let systems = vec![arp_score_system(ds, gs), cox_score_system(ds)];
            let res: EstimateResult = gmm_estimate(&systems, &DVector::zeros(1), opts)?;
            Ok((res.theta, res.se, res.converged))
        }
        (EstimatorKind::Mnl, SimulatedPanel::Multinomial(ds)) => {
            let gs = build_group_system(ds.t_periods, 1)?;
            let d = MnlParameterVector::free_dim(ds.m, ds.k);
            let (res, _) = maximize(
                |v| {
                    let pv = MnlParameterVector::unpack(v, ds.m, ds.k)?;
                    loglik_mnl(ds, &gs, &pv)
                },
                &DVector::zeros(d),
                opts,
            )?;
            Ok((res.theta, res.se, res.converged))
        }
        _ => Err(Error::Config(format!(
            "estimator {} does not fit the dataset shape",
            kind.name()
        ))),
    }
}

/// Two-sided normal critical value by bisection on the standard normal CDF.
fn normal_quantile(ci_level: f64) -> f64 {
    use statrs::distribution::ContinuousCDF;
    let std = Normal::new(0.0, 1.0).expect("standard normal");
    std.inverse_cdf(0.5 + ci_level / 2.0)
}

/// Run the full Monte Carlo experiment. Replications execute in parallel;
/// aggregation is an ordered reduction over the rep index, so the output is
/// identical for any thread count.
pub fn run_monte_carlo(cfg: &McConfig) -> Result<McRunResult> {
    cfg.validate()?;
    let mut estimators = cfg.estimators.clone();
    estimators.sort();
    estimators.dedup();
    let crit = normal_quantile(cfg.ci_level);
    let mut replications: Vec<Replication> = Vec::new();
    for (n_index, &n) in cfg.n_grid.iter().enumerate() {
        let mut rep_rows: Vec<Vec<Replication>> = (0..cfg.reps)
            .into_par_iter()
            .map(|rep| {
                run_one_rep(cfg, &estimators, n_index, n, rep)
            })
            .collect();
        for rows in rep_rows.drain(..) {
            replications.extend(rows);
        }
    }
    let summary = summarize(cfg, &replications, crit);
    Ok(McRunResult {
        replications,
        summary,
    })
}

fn run_one_rep(
    cfg: &McConfig,
    estimators: &[EstimatorKind],
    n_index: usize,
    n: usize,
    rep: usize,
) -> Vec<Replication> {
    let seed = derive_seed(cfg.seed, 1, (n_index as u64) << 32 | rep as u64, 0);
    let data = match &cfg.dgp {
        Dgp::Binary(d) => simulate_panel(d, n, seed).map(SimulatedPanel::Binary),
        Dgp::Multinomial(d) => simulate_panel_mnl(d, n, seed).map(SimulatedPanel::Multinomial),
    };
    let data = match data {
        Ok(d) => d,
        Err(_) => return Vec::new(), // validated up front; unreachable
    };
    let gs = match &data {
        SimulatedPanel::Binary(ds) => build_group_system(ds.t_periods, ds.p).ok(),
        SimulatedPanel::Multinomial(_) => None,
    };
    let opts = OptimizerOptions::default();
    let mut rows = Vec::new();
    for &kind in estimators {
        let names: Vec<String> = truth_for(kind, &cfg.dgp)
            .into_iter()
            .map(|(name, _)| name)
            .collect();
        match apply_estimator(kind, &data, gs.as_ref(), opts) {
            Ok((theta, se, converged)) => {
                for (j, name) in names.iter().enumerate() {
                    rows.push(Replication {
                        rep,
                        n,
                        estimator: kind.name().to_string(),
                        param: name.clone(),
                        estimate: theta[j],
                        se: se[j],
                        converged,
                    });
                }
            }
            Err(_) => {
                // estimator failure is recorded, not fatal
                for name in &names {
                    rows.push(Replication {
                        rep,
                        n,
                        estimator: kind.name().to_string(),
                        param: name.clone(),
                        estimate: f64::NAN,
                        se: f64::NAN,
                        converged: false,
                    });
                }
            }
        }
    }
    rows
}

fn summarize(cfg: &McConfig, replications: &[Replication], crit: f64) -> McSummary {
    // truth lookup per (estimator, param)
    let mut truth: BTreeMap<(String, String), f64> = BTreeMap::new();
    for &kind in &cfg.estimators {
        for (name, value) in truth_for(kind, &cfg.dgp) {
            truth.insert((kind.name().to_string(), name), value);
        }
    }
    let mut groups: BTreeMap<(String, String, usize), Vec<&Replication>> = BTreeMap::new();
    for r in replications {
        groups
            .entry((r.estimator.clone(), r.param.clone(), r.n))
            .or_default()
            .push(r);
    }
    let mut cells = Vec::new();
    let mut rmse_by_key: BTreeMap<(String, String, usize), f64> = BTreeMap::new();
    for ((estimator, param, n), rows) in &groups {
        let truth_v = truth[&(estimator.clone(), param.clone())];
        let total = rows.len();
        let ok: Vec<&&Replication> = rows
            .iter()
            .filter(|r| r.converged && r.estimate.is_finite())
            .collect();
        let convergence_rate = ok.len() as f64 / total as f64;
        let (bias, rmse, sd, mean_se, coverage) = if ok.is_empty() {
            (f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN)
        } else {
            let m = ok.len() as f64;
            let mean_est = ok.iter().map(|r| r.estimate).sum::<f64>() / m;
            let bias = mean_est - truth_v;
            let rmse = (ok
                .iter()
                .map(|r| (r.estimate - truth_v).powi(2))
                .sum::<f64>()
                / m)
                .sqrt();
            let sd = if ok.len() > 1 {
                (ok.iter()
                    .map(|r| (r.estimate - mean_est).powi(2))
                    .sum::<f64>()
                    / (m - 1.0))
                    .sqrt()
            } else {
                0.0
            };
            let mean_se = ok.iter().map(|r| r.se).sum::<f64>() / m;
            let covered = ok
                .iter()
                .filter(|r| (r.estimate - truth_v).abs() <= crit * r.se)
                .count();
            (bias, rmse, sd, mean_se, covered as f64 / m)
        };
        rmse_by_key.insert((estimator.clone(), param.clone(), *n), rmse);
        cells.push(McCell {
            estimator: estimator.clone(),
            param: param.clone(),
            n: *n,
            truth: truth_v,
            bias,
            rmse,
            sd,
            mean_se,
            coverage,
            convergence_rate,
            rmse_ratio: None,
        });
    }
    for cell in &mut cells {
        let key4 = (cell.estimator.clone(), cell.param.clone(), cell.n * 4);
        if let Some(&r4) = rmse_by_key.get(&key4) {
            if r4 > 0.0 && cell.rmse.is_finite() {
                cell.rmse_ratio = Some(cell.rmse / r4);
            }
        }
    }
    McSummary { cells }
}

/// Write replication-level rows as CSV.
pub fn write_replications_csv(rows: &[Replication], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["rep", "n", "estimator", "param", "estimate", "se", "converged"])?;
    for r in rows {
        w.write_record([
            r.rep.to_string(),
            r.n.to_string(),
            r.estimator.clone(),
            r.param.clone(),
            format!("{:.17e}", r.estimate),
            format!("{:.17e}", r.se),
            r.converged.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Write the aggregate summary as CSV.
pub fn write_summary_csv(summary: &McSummary, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "estimator",
        "param",
        "n",
        "truth",
        "bias",
        "rmse",
        "sd",
        "mean_se",
        "coverage",
        "convergence_rate",
        "rmse_ratio",
    ])?;
    for c in &summary.cells {
        w.write_record([
            c.estimator.clone(),
            c.param.clone(),
            c.n.to_string(),
            format!("{:.17e}", c.truth),
            format!("{:.17e}", c.bias),
            format!("{:.17e}", c.rmse),
            format!("{:.17e}", c.sd),
            format!("{:.17e}", c.mean_se),
            format!("{:.17e}", c.coverage),
            format!("{:.17e}", c.convergence_rate),
            c.rmse_ratio
                .map(|r| format!("{r:.17e}"))
                .unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Render the summary as a fixed-width text table (4 decimals).
pub fn format_summary_table(summary: &McSummary) -> String {
    let mut out = Vec::new();
    writeln!(
        out,
        "{:<14} {:<12} {:>7} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}",
        "estimator", "param", "n", "truth", "bias", "rmse", "sd", "mean_se", "cover", "conv", "ratio"
    )
    .expect("in-memory write");
    for c in &summary.cells {
        writeln!(
            out,
            "{:<14} {:<12} {:>7} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9}",
            c.estimator,
            c.param,
            c.n,
            c.truth,
            c.bias,
            c.rmse,
            c.sd,
            c.mean_se,
            c.coverage,
            c.convergence_rate,
            c.rmse_ratio
                .map(|r| format!("{r:.4}"))
                .unwrap_or_else(|| "-".to_string()),
        )
        .expect("in-memory write");
    }
    String::from_utf8(out).expect("ascii table")
}
