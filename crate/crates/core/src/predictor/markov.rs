use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Probability vector over the path library.
#[derive(Debug, Clone, PartialEq)]
pub struct PathDistribution {
    pub probs: Vec<f64>,
}

impl PathDistribution {
    pub fn uniform(l: usize) -> Self {
        Self { probs: vec![1.0 / l as f64; l] }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Index of the most likely path; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    pub fn sum(&self) -> f64 {
        self.probs.iter().sum()
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let total: f64 = v.iter().sum();
    if total > 0.0 {
        v.iter_mut().for_each(|x| *x /= total);
    }
    total
}

/// Discrete Gaussian kernel centered at `mean`, normalized. A zero width
/// degenerates to a one-hot vector.
fn kernel(l: usize, mean: f64, sigma: f64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..l)
        .map(|i| {
            let d = i as f64 - mean;
            if sigma == 0.0 {
                if d == 0.0 { 1.0 } else { 0.0 }
            } else {
                (-(d * d) / (2.0 * sigma * sigma)).exp()
            }
        })
        .collect();
    normalize(&mut v);
    v
}

fn check_odd(l: usize) -> Result<()> {
    if l < 3 || l % 2 == 0 {
        return Err(Error::invalid("path count must be odd and >= 3"));
    }
    Ok(())
}

/// Gaussian prior over paths centered on the straight path.
pub fn build_initial_distribution(l: usize, sigma_init: f64) -> Result<PathDistribution> {
    check_odd(l)?;
    Ok(PathDistribution { probs: kernel(l, ((l - 1) / 2) as f64, sigma_init) })
}

/// Row-stochastic matrix whose row `i` is a Gaussian kernel centered at `i`.
pub fn build_transition_matrix(l: usize, sigma_trans: f64) -> Result<DMatrix<f64>> {
    check_odd(l)?;
    let mut m = DMatrix::zeros(l, l);
    for i in 0..l {
        for (j, v) in kernel(l, i as f64, sigma_trans).into_iter().enumerate() {
            m[(i, j)] = v;
        }
    }
    Ok(m)
}

/// Numerically stable softmax of `temperature * dist`.
pub fn softmax(dist: &[f64], temperature: f64) -> Vec<f64> {
    let scaled: Vec<f64> = dist.iter().map(|d| temperature * d).collect();
    let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut v: Vec<f64> = scaled.iter().map(|s| (s - max).exp()).collect();
    normalize(&mut v);
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub dist: PathDistribution,
    /// The product vanished and the chain restarted from `init`.
    pub reset: bool,
}

/// `normalize((dist * trans) .* p_env)`; falls back to `init` when the
/// product has no mass.
pub fn predict_step(
    dist: &PathDistribution,
    trans: &DMatrix<f64>,
    p_env: &[f64],
    init: &PathDistribution,
) -> Result<StepOutcome> {
    let l = dist.len();
    for (what, n) in [(trans.nrows(), l), (trans.ncols(), l), (p_env.len(), l), (init.len(), l)] {
        if what != n {
            return Err(Error::DimensionMismatch { expected: n, actual: what });
        }
    }
    let mut next: Vec<f64> = (0..l)
        .map(|j| (0..l).map(|i| dist.probs[i] * trans[(i, j)]).sum::<f64>() * p_env[j])
        .collect();
    let total = normalize(&mut next);
    if !(total > 0.0) || !total.is_finite() {
        return Ok(StepOutcome { dist: init.clone(), reset: true });
    }
    Ok(StepOutcome { dist: PathDistribution { probs: next }, reset: false })
}
