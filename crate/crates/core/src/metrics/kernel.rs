use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::hist::{Category, Histogram};
use super::MetricError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    GaussianEmd,
    GaussianTv,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub sigma: f64,
}

impl KernelSpec {
    pub fn gaussian_emd(sigma: f64) -> Self {
        Self { kind: KernelKind::GaussianEmd, sigma }
    }

    pub fn gaussian_tv(sigma: f64) -> Self {
        Self { kind: KernelKind::GaussianTv, sigma }
    }

    pub fn linear() -> Self {
        Self { kind: KernelKind::Linear, sigma: 1.0 }
    }

    pub fn validate(&self) -> Result<(), MetricError> {
        if self.kind != KernelKind::Linear && !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(MetricError::Config(format!("kernel bandwidth must be positive, got {}", self.sigma)));
        }
        Ok(())
    }

    fn gaussian(&self, dist: f64) -> f64 {
        (-dist * dist / (2.0 * self.sigma * self.sigma)).exp()
    }
}

/// A per-graph statistic that a kernel can compare.
pub trait Statistic: Sync {
    fn kernel(&self, other: &Self, spec: &KernelSpec) -> Result<f64, MetricError>;
}

/// First Wasserstein distance between two normalized histograms on the
/// ordered category line.
pub fn wasserstein1<K: Category>(a: &Histogram<K>, b: &Histogram<K>) -> Result<f64, MetricError> {
    if !a.is_normalized() || !b.is_normalized() {
        return Err(MetricError::Unnormalized);
    }
    if a.bin_width() != b.bin_width() {
        return Err(MetricError::Dimension("histograms use different bin widths".into()));
    }
    let pos = |k: &K| k.position().ok_or(MetricError::Unordered);
    let mut points: Vec<(usize, f64)> = Vec::with_capacity(a.len() + b.len());
    for (k, c) in a.iter() {
        points.push((pos(k)?, c));
    }
    for (k, c) in b.iter() {
        points.push((pos(k)?, -c));
    }
    points.sort_by_key(|p| p.0);
    // the cdf difference is constant between consecutive support points
    let mut cdf = 0.0;
    let mut dist = 0.0;
    for (i, &(x, c)) in points.iter().enumerate() {
        cdf += c;
        if let Some(&(next, _)) = points.get(i + 1) {
            dist += cdf.abs() * (next - x) as f64;
        }
    }
    Ok(dist * a.bin_width())
}

/// Total variation, half the L1 distance over the union of categories.
pub fn total_variation<K: Category>(a: &Histogram<K>, b: &Histogram<K>) -> f64 {
    let mut sum = 0.0;
    for (k, c) in a.iter() {
        sum += (c - b.get(k)).abs();
    }
    for (k, c) in b.iter() {
        if a.get(k) == 0.0 {
            sum += c;
        }
    }
    0.5 * sum
}

pub fn gaussian_emd_kernel<K: Category>(a: &Histogram<K>, b: &Histogram<K>, sigma: f64) -> Result<f64, MetricError> {
    let spec = KernelSpec::gaussian_emd(sigma);
    spec.validate()?;
    Ok(spec.gaussian(wasserstein1(a, b)?))
}

pub fn gaussian_tv_kernel<K: Category>(a: &Histogram<K>, b: &Histogram<K>, sigma: f64) -> Result<f64, MetricError> {
    let spec = KernelSpec::gaussian_tv(sigma);
    spec.validate()?;
    Ok(spec.gaussian(total_variation(a, b)))
}

impl<K: Category> Statistic for Histogram<K> {
    fn kernel(&self, other: &Self, spec: &KernelSpec) -> Result<f64, MetricError> {
        match spec.kind {
            KernelKind::GaussianEmd => Ok(spec.gaussian(wasserstein1(self, other)?)),
            KernelKind::GaussianTv => Ok(spec.gaussian(total_variation(self, other))),
            KernelKind::Linear => {
                Ok(self.iter().map(|(k, c)| c * other.get(k)).sum())
            }
        }
    }
}

/// Fixed-length vectors, such as mean orbit counts. The total variation form
/// is applied to the raw entries.
impl Statistic for Vec<f64> {
    fn kernel(&self, other: &Self, spec: &KernelSpec) -> Result<f64, MetricError> {
        if self.len() != other.len() {
            return Err(MetricError::Dimension(format!("vector lengths {} and {}", self.len(), other.len())));
        }
        let pairs = self.iter().zip(other);
        match spec.kind {
            KernelKind::GaussianTv => Ok(spec.gaussian(0.5 * pairs.map(|(a, b)| (a - b).abs()).sum::<f64>())),
            KernelKind::Linear => Ok(pairs.map(|(a, b)| a * b).sum()),
            KernelKind::GaussianEmd => Err(MetricError::Unordered),
        }
    }
}

fn mean_kernel<T: Statistic>(a: &[T], b: &[T], spec: &KernelSpec) -> Result<f64, MetricError> {
    // rows in parallel, summed in a fixed order
    let rows: Vec<f64> = a
        .par_iter()
        .map(|x| b.iter().map(|y| x.kernel(y, spec)).sum::<Result<f64, _>>())
        .collect::<Result<_, _>>()?;
    Ok(rows.iter().sum::<f64>() / (a.len() * b.len()) as f64)
}

/// Squared maximum mean discrepancy, biased estimator with diagonal terms,
/// clamped at zero.
pub fn mmd<T: Statistic>(a: &[T], b: &[T], spec: &KernelSpec) -> Result<f64, MetricError> {
    spec.validate()?;
    if a.is_empty() || b.is_empty() {
        return Err(MetricError::EmptySet);
    }
    let v = mean_kernel(a, a, spec)? + mean_kernel(b, b, spec)? - 2.0 * mean_kernel(a, b, spec)?;
    Ok(v.max(0.0))
}
