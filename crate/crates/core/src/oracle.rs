//! Exact brute-force probability engine over the data-generating process for
//! one individual (fixed effect and covariates held fixed). Serves as ground
//! truth for every closed-form conditional likelihood in the crate.
//!
//! All probabilities are accumulated in log space and exponentiated at the
//! boundary. Enumeration refuses to run past a hard path-count cap instead of
//! silently burning CPU.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expfam::logsumexp;
use crate::panel::ParameterVector;

pub const ENUMERATION_CAP: u64 = 1 << 20;

/// Law of the `p` pre-sample outcomes `(y_{1-p}, .., y_0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitialCondition {
    /// Fixed pre-sample values, oldest first.
    Fixed(Vec<u8>),
    /// Discrete distribution over pre-sample value vectors; weights sum to 1.
    Distribution(Vec<(Vec<u8>, f64)>),
}

/// Single-individual binary AR(p) data-generating process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub p: usize,
    pub t_periods: usize,
    pub theta: ParameterVector,
    pub alpha: f64,
    /// `x[t - 1]` is the covariate vector at period `t`, length K.
    pub x: Vec<Vec<f64>>,
    pub initial: InitialCondition,
}

impl DgpSpec {
    pub fn k(&self) -> usize {
        self.theta.beta.len()
    }
}

/// Read-only window over a full path `y_{1-p} .. y_T`.
pub struct PathView<'a> {
    full: &'a [u8],
    p: usize,
}

impl<'a> PathView<'a> {
    pub fn new(full: &'a [u8], p: usize) -> Self {
        Self { full, p }
    }

    /// `y_t` for `t` in `1-p ..= T`.
    pub fn at(&self, t: i64) -> u8 {
        self.full[(t + self.p as i64 - 1) as usize]
    }

    pub fn full(&self) -> &[u8] {
        self.full
    }
}

/// One-step transition probability: logistic in
/// `alpha + sum_d gamma_d * lag_d + x_t' beta`.
/// `lags[0]` is `y_{t-1}`, `lags[p-1]` is `y_{t-p}`.
pub fn transition_prob(spec: &DgpSpec, lags: &[u8], t: usize, outcome: u8) -> f64 {
    log_transition_prob(spec, lags, t, outcome).exp()
}

fn log_transition_prob(spec: &DgpSpec, lags: &[u8], t: usize, outcome: u8) -> f64 {
    debug_assert_eq!(lags.len(), spec.p);
    let mut z = spec.alpha;
    for (d, &lag) in lags.iter().enumerate() {
        z += spec.theta.gamma[d] * lag as f64;
    }
    for (j, &xv) in spec.x[t - 1].iter().enumerate() {
        z += spec.theta.beta[j] * xv;
    }
    // log sigma(z) = -softplus(-z); log(1 - sigma(z)) = -softplus(z)
    let softplus = |v: f64| {
        if v > 0.0 {
            v + (-v).exp().ln_1p()
        } else {
            v.exp().ln_1p()
        }
    };
    if outcome == 1 {
        -softplus(-z)
    } else {
        -softplus(z)
    }
}

fn initial_states(spec: &DgpSpec) -> Result<Vec<(Vec<u8>, f64)>> {
    match &spec.initial {
        InitialCondition::Fixed(v) => {
            if v.len() != spec.p {
                return Err(Error::Config(format!(
                    "initial condition must have length p = {}",
                    spec.p
                )));
            }
            Ok(vec![(v.clone(), 0.0)])
        }
        InitialCondition::Distribution(states) => {
            let total: f64 = states.iter().map(|(_, w)| w).sum();
            if (total - 1.0).abs() > 1e-10 {
                return Err(Error::Config(format!(
                    "initial distribution sums to {total}, not 1"
                )));
            }
            Ok(states
                .iter()
                .map(|(v, w)| (v.clone(), w.ln()))
                .collect())
        }
    }
}

/// Log-probability of the modeled path `y_1 .. y_T` given fixed initial
/// conditions (order-p Markov product of transitions).
pub fn log_path_probability(spec: &DgpSpec, path: &[u8]) -> Result<f64> {
    let init = match &spec.initial {
        InitialCondition::Fixed(v) => v.clone(),
        InitialCondition::Distribution(_) => {
            return Err(Error::Config(
                "path_probability needs fixed initial conditions".into(),
            ))
        }
    };
    if path.len() != spec.t_periods {
        return Err(Error::DimensionMismatch(format!(
            "path length {} != T = {}",
            path.len(),
            spec.t_periods
        )));
    }
    let mut full = init;
    full.extend_from_slice(path);
    let view = PathView::new(&full, spec.p);
    let mut logp = 0.0;
    for t in 1..=spec.t_periods {
        let lags: Vec<u8> = (1..=spec.p).map(|d| view.at(t as i64 - d as i64)).collect();
        logp += log_transition_prob(spec, &lags, t, view.at(t as i64));
    }
    Ok(logp)
}

pub fn path_probability(spec: &DgpSpec, path: &[u8]) -> Result<f64> {
    log_path_probability(spec, path).map(f64::exp)
}

/// Visit every full path with its log-probability (initial weight included).
pub fn for_each_path(spec: &DgpSpec, mut visit: impl FnMut(&PathView, f64)) -> Result<()> {
    let inits = initial_states(spec)?;
    let paths = inits.len() as u64 * (1u64 << spec.t_periods);
    if paths > ENUMERATION_CAP {
        return Err(Error::EnumerationCap {
            paths,
            cap: ENUMERATION_CAP,
        });
    }
    for (init, log_w) in &inits {
        let mut full = init.clone();
        full.resize(spec.p + spec.t_periods, 0);
        for code in 0u64..(1u64 << spec.t_periods) {
            for t in 0..spec.t_periods {
                full[spec.p + t] = ((code >> t) & 1) as u8;
            }
            let view = PathView::new(&full, spec.p);
            let mut logp = *log_w;
            for t in 1..=spec.t_periods {
                let lags: Vec<u8> =
                    (1..=spec.p).map(|d| view.at(t as i64 - d as i64)).collect();
                logp += log_transition_prob(spec, &lags, t, view.at(t as i64));
            }
            visit(&view, logp);
        }
    }
    Ok(())
}

/// `Pr(event | given)` by exhaustive enumeration.
pub fn conditional_probability(
    spec: &DgpSpec,
    event: impl Fn(&PathView) -> bool,
    given: impl Fn(&PathView) -> bool,
) -> Result<f64> {
    let mut num = Vec::new();
    let mut den = Vec::new();
    for_each_path(spec, |view, logp| {
        if given(view) {
            den.push(logp);
            if event(view) {
                num.push(logp);
            }
        }
    })?;
    if den.is_empty() {
        return Err(Error::ZeroConditioningEvent);
    }
    if num.is_empty() {
        return Ok(0.0);
    }
    Ok((logsumexp(&num) - logsumexp(&den)).exp())
}

/// Conditional law of the outcomes at `times` given each outcome's own lag
/// pattern and the within-set outcome sum, under the maintained model of the
/// grouped estimator: outcomes at the selected periods are independent
/// logistic draws from their (conditioned, predetermined) lag states.
///
/// `lags[k]` holds the `p` lagged outcomes for `times[k]`, most recent first.
/// The fixed effect enters every transition factor, so numeric invariance of
/// this quantity across `alpha` values is a substantive check, not a tautology.
pub fn kernel_group_conditional(
    spec: &DgpSpec,
    times: &[usize],
    lags: &[Vec<u8>],
    outcome: &[u8],
) -> Result<f64> {
    let m = times.len();
    if lags.len() != m || outcome.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "times/lags/outcome lengths disagree: {}/{}/{}",
            m,
            lags.len(),
            outcome.len()
        )));
    }
    let logp_of = |pattern: &[u8]| -> f64 {
        pattern
            .iter()
            .enumerate()
            .map(|(k, &y)| log_transition_prob(spec, &lags[k], times[k], y))
            .sum()
    };
    let target: u8 = outcome.iter().sum();
    let mut den = Vec::new();
    let mut pattern = vec![0u8; m];
    for code in 0u64..(1u64 << m) {
        for (k, slot) in pattern.iter_mut().enumerate() {
            *slot = ((code >> k) & 1) as u8;
        }
        if pattern.iter().sum::<u8>() == target {
            den.push(logp_of(&pattern));
        }
    }
    Ok((logp_of(outcome) - logsumexp(&den)).exp())
}

/// Single-individual multinomial AR(1) process with `M` alternatives.
///
/// The parameter block is deliberately unrestricted (full `gamma` matrix,
/// all `M` slope vectors, alternative-specific intercepts) so the oracle can
/// probe identification: the conditional laws must not move when
/// non-identified directions do.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MnlDgpSpec {
    pub m: usize,
    pub t_periods: usize,
    /// Full `M x M` feedback matrix, 0-indexed by (previous, current) label - 1.
    #[serde(with = "crate::panel::serde_shims::dmat")]
    pub gamma: DMatrix<f64>,
    /// Slope vector per alternative, length K each.
    #[serde(with = "crate::panel::serde_shims::dvec_list")]
    pub beta: Vec<DVector<f64>>,
    /// Alternative-specific fixed effects, length M.
    pub alphas: Vec<f64>,
    /// `x[t - 1][l - 1]` is the covariate vector of alternative `l` at `t`.
    pub x: Vec<Vec<Vec<f64>>>,
    /// Initial choice `y_0` in {1..M}.
    pub initial: u8,
}

/// Softmax transition `Pr(y_t = l | y_{t-1} = k)` with the standard
/// denominator `sum_m exp(x_m' beta_m + alpha_m + gamma_km)`.
pub fn mnl_transition_prob(spec: &MnlDgpSpec, lag: u8, t: usize, outcome: u8) -> f64 {
    let utilities = mnl_log_utilities(spec, lag, t);
    (utilities[outcome as usize - 1] - logsumexp(&utilities)).exp()
}

fn mnl_log_utilities(spec: &MnlDgpSpec, lag: u8, t: usize) -> Vec<f64> {
    (1..=spec.m)
        .map(|l| {
            let mut u = spec.alphas[l - 1] + spec.gamma[(lag as usize - 1, l - 1)];
            for (j, &xv) in spec.x[t - 1][l - 1].iter().enumerate() {
                u += spec.beta[l - 1][j] * xv;
            }
            u
        })
        .collect()
}

/// Log-probability of `y_1 .. y_T` given `y_0`.
pub fn mnl_log_path_probability(spec: &MnlDgpSpec, path: &[u8]) -> Result<f64> {
    if path.len() != spec.t_periods {
        return Err(Error::DimensionMismatch(format!(
            "path length {} != T = {}",
            path.len(),
            spec.t_periods
        )));
    }
    let mut logp = 0.0;
    let mut lag = spec.initial;
    for (t0, &y) in path.iter().enumerate() {
        let utilities = mnl_log_utilities(spec, lag, t0 + 1);
        logp += utilities[y as usize - 1] - logsumexp(&utilities);
        lag = y;
    }
    Ok(logp)
}

/// Visit every multinomial path (prefixed by `y_0`) with its log-probability.
pub fn mnl_for_each_path(spec: &MnlDgpSpec, mut visit: impl FnMut(&[u8], f64)) -> Result<()> {
    let paths = (spec.m as u64).pow(spec.t_periods as u32);
    if paths > ENUMERATION_CAP {
        return Err(Error::EnumerationCap {
            paths,
            cap: ENUMERATION_CAP,
        });
    }
    let mut full = vec![spec.initial; spec.t_periods + 1];
    fn recurse(
        spec: &MnlDgpSpec,
        t: usize,
        logp: f64,
        full: &mut Vec<u8>,
        visit: &mut impl FnMut(&[u8], f64),
    ) {
        if t > spec.t_periods {
            visit(full, logp);
            return;
        }
        let utilities = mnl_log_utilities(spec, full[t - 1], t);
        let lse = logsumexp(&utilities);
        for l in 1..=spec.m {
            full[t] = l as u8;
            recurse(spec, t + 1, logp + utilities[l - 1] - lse, full, visit);
        }
    }
    recurse(spec, 1, 0.0, &mut full, &mut visit);
    Ok(())
}

/// `Pr(event | given)` for the multinomial process; predicates see the full
/// path `(y_0, .., y_T)` indexed by `t`.
pub fn mnl_conditional_probability(
    spec: &MnlDgpSpec,
    event: impl Fn(&[u8]) -> bool,
    given: impl Fn(&[u8]) -> bool,
) -> Result<f64> {
    let mut num = Vec::new();
    let mut den = Vec::new();
    mnl_for_each_path(spec, |full, logp| {
        if given(full) {
            den.push(logp);
            if event(full) {
                num.push(logp);
            }
        }
    })?;
    if den.is_empty() {
        return Err(Error::ZeroConditioningEvent);
    }
    if num.is_empty() {
        return Ok(0.0);
    }
    Ok((logsumexp(&num) - logsumexp(&den)).exp())
}

/// Multinomial analogue of [`kernel_group_conditional`]: outcomes at `times`
/// are independent softmax draws from their conditioned lag states, and the
/// conditioning statistic is the per-alternative count vector.
pub fn mnl_kernel_group_conditional(
    spec: &MnlDgpSpec,
    times: &[usize],
    lags: &[u8],
    outcome: &[u8],
) -> Result<f64> {
    let m = times.len();
    if lags.len() != m || outcome.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "times/lags/outcome lengths disagree: {}/{}/{}",
            m,
            lags.len(),
            outcome.len()
        )));
    }
    let log_prob = |pattern: &[u8]| -> f64 {
        pattern
            .iter()
            .enumerate()
            .map(|(k, &y)| {
                let utilities = mnl_log_utilities(spec, lags[k], times[k]);
                utilities[y as usize - 1] - logsumexp(&utilities)
            })
            .sum()
    };
    let counts = |pattern: &[u8]| -> Vec<u8> {
        let mut c = vec![0u8; spec.m];
        for &y in pattern {
            c[y as usize - 1] += 1;
        }
        c
    };
    let target = counts(outcome);
    let mut den = Vec::new();
    let mut pattern = vec![1u8; m];
    loop {
        if counts(&pattern) == target {
            den.push(log_prob(&pattern));
        }
        // odometer over {1..M}^m
        let mut k = 0;
        loop {
            if k == m {
                return Ok((log_prob(outcome) - logsumexp(&den)).exp());
            }
            if (pattern[k] as usize) < spec.m {
                pattern[k] += 1;
                break;
            }
            pattern[k] = 1;
            k += 1;
        }
    }
}
