//! Shared machinery for conditional-logit style blocks.
//!
//! Every conditional likelihood in this crate has the same algebraic shape:
//! a finite pattern set Lambda, a feature vector `f(lambda)` linear in the
//! parameters, and a contribution
//! `f(y)'theta - log sum_{lambda} exp(f(lambda)'theta)`.
//! This module enumerates the pattern sets and evaluates value, gradient, and
//! Hessian of one block in a single pass.

use nalgebra::{DMatrix, DVector};

/// Numerically safe log(sum(exp(xs))) with max subtraction.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + xs.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

/// All binary vectors of length `m` with sum `s`, in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LambdaSet {
    pub patterns: Vec<Vec<u8>>,
}

pub fn enumerate_lambda(m: usize, s: usize) -> LambdaSet {
    assert!(s <= m, "sufficient statistic {s} exceeds group size {m}");
    let mut patterns = Vec::new();
    let mut current = Vec::with_capacity(m);
    fn recurse(m: usize, remaining: usize, current: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        let slots_left = m - current.len();
        if remaining > slots_left {
            return;
        }
        if current.len() == m {
            out.push(current.clone());
            return;
        }
        for v in 0u8..=1 {
            if v as usize <= remaining {
                current.push(v);
                recurse(m, remaining - v as usize, current, out);
                current.pop();
            }
        }
    }
    recurse(m, s, &mut current, &mut patterns);
    LambdaSet { patterns }
}

/// All vectors over `{1..M}` of length `sum(counts)` whose per-alternative
/// counts match `counts` (`counts[l-1]` = occurrences of label `l`), in
/// lexicographic order.
pub fn enumerate_mnl_lambda(counts: &[usize]) -> Vec<Vec<u8>> {
    let m_len: usize = counts.iter().sum();
    let mut out = Vec::new();
    let mut remaining = counts.to_vec();
    let mut current = Vec::with_capacity(m_len);
    fn recurse(
        m_len: usize,
        remaining: &mut [usize],
        current: &mut Vec<u8>,
        out: &mut Vec<Vec<u8>>,
    ) {
        if current.len() == m_len {
            out.push(current.clone());
            return;
        }
        for l in 0..remaining.len() {
            if remaining[l] > 0 {
                remaining[l] -= 1;
                current.push(l as u8 + 1);
                recurse(m_len, remaining, current, out);
                current.pop();
                remaining[l] += 1;
            }
        }
    }
    recurse(m_len, &mut remaining, &mut current, &mut out);
    out
}

/// Value, gradient, and Hessian of one block contribution.
#[derive(Debug, Clone)]
pub struct BlockEval {
    pub value: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
}

/// Evaluate `f_obs'theta - log sum_j exp(f_j'theta)` with its derivatives.
///
/// `features[j]` is the feature vector of pattern `j`; `observed` indexes the
/// realized pattern. The gradient is `f_obs - E[f]` and the Hessian is
/// `-Cov(f)` under the implied softmax law, so it is negative semidefinite by
/// construction.
pub fn linear_family_eval(
    features: &[DVector<f64>],
    observed: usize,
    theta: &DVector<f64>,
) -> BlockEval {
    let d = theta.len();
    debug_assert!(observed < features.len());
    let etas: Vec<f64> = features.iter().map(|f| f.dot(theta)).collect();
    let lse = logsumexp(&etas);
    let value = etas[observed] - lse;

    let mut mean = DVector::zeros(d);
    let mut second = DMatrix::zeros(d, d);
    for (f, &eta) in features.iter().zip(&etas) {
        let w = (eta - lse).exp();
        mean.axpy(w, f, 1.0);
        second.syger(w, f, f, 1.0);
    }
    let grad = &features[observed] - &mean;
    let mut hess = DMatrix::zeros(d, d);
    hess.syger(1.0, &mean, &mean, 0.0);
    hess -= second;
    // syger fills the lower triangle only; mirror it
    for r in 0..d {
        for c in (r + 1)..d {
            hess[(r, c)] = hess[(c, r)];
        }
    }
    BlockEval { value, grad, hess }
}
