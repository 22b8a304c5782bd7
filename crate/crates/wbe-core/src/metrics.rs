//! Model performance metrics shared by every other module: RMSE, R²,
//! mean similarity, Pearson r, the large-sample significance threshold,
//! least-squares AIC and leave-one-out cross-validation.

use crate::error::{Error, Result};
use crate::num::{real, real_of_usize, Real};

/// Observations `x` paired with model values `y`, validated to equal length
/// and finiteness.
#[derive(Debug, Clone)]
pub struct PairedSeries<'a, T: Real> {
    x: &'a [T],
    y: &'a [T],
}

impl<'a, T: Real> PairedSeries<'a, T> {
    pub fn new(x: &'a [T], y: &'a [T]) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::LengthMismatch {
                left: x.len(),
                right: y.len(),
            });
        }
        if x.is_empty() {
            return Err(Error::EmptyInput);
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(PairedSeries { x, y })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Root mean square error between the two series.
    pub fn rmse(&self) -> T {
        let n = real_of_usize(self.x.len());
        let sse: T = self
            .x
            .iter()
            .zip(self.y)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum();
        (sse / n).sqrt()
    }

    /// Coefficient of determination, 1 - SSres/SStot, with SStot taken about
    /// the mean of the observations `x`. Errors when `x` is constant.
    pub fn r_squared(&self) -> Result<T> {
        let n = real_of_usize(self.x.len());
        let mean_x: T = self.x.iter().copied().sum::<T>() / n;
        let ss_tot: T = self.x.iter().map(|&a| (a - mean_x) * (a - mean_x)).sum();
        if ss_tot == T::zero() {
            return Err(Error::ConstantSeries);
        }
        let ss_res: T = self
            .x
            .iter()
            .zip(self.y)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum();
        Ok(T::one() - ss_res / ss_tot)
    }

    /// Mean similarity: mean over i of 1 - |y_i - x_i| / (|y_i| + |x_i|).
    /// A pair with |x| + |y| = 0 leaves the metric undefined rather than
    /// being skipped.
    pub fn msim(&self) -> Result<T> {
        let mut acc = T::zero();
        for (i, (&a, &b)) in self.x.iter().zip(self.y).enumerate() {
            let den = a.abs() + b.abs();
            if den == T::zero() {
                return Err(Error::ZeroDenominator { index: i });
            }
            acc = acc + (T::one() - (b - a).abs() / den);
        }
        Ok(acc / real_of_usize(self.x.len()))
    }

    /// Pearson correlation coefficient; errors when either series has zero
    /// variance or fewer than two points.
    pub fn pearson_r(&self) -> Result<T> {
        if self.x.len() < 2 {
            return Err(Error::TooShort {
                needed: 2,
                got: self.x.len(),
            });
        }
        let n = real_of_usize(self.x.len());
        let mx: T = self.x.iter().copied().sum::<T>() / n;
        let my: T = self.y.iter().copied().sum::<T>() / n;
        let mut sxx = T::zero();
        let mut syy = T::zero();
        let mut sxy = T::zero();
        for (&a, &b) in self.x.iter().zip(self.y) {
            let dx = a - mx;
            let dy = b - my;
            sxx = sxx + dx * dx;
            syy = syy + dy * dy;
            sxy = sxy + dx * dy;
        }
        if sxx == T::zero() || syy == T::zero() {
            return Err(Error::ConstantSeries);
        }
        Ok(sxy / (sxx.sqrt() * syy.sqrt()))
    }
}

/// Large-sample 5% significance threshold for a correlation: 1.96 / sqrt(n).
pub fn significance_threshold<T: Real>(n: usize) -> Result<T> {
    if n < 2 {
        return Err(Error::TooShort { needed: 2, got: n });
    }
    Ok(real::<T>(1.96) / real_of_usize::<T>(n).sqrt())
}

/// AIC in its least-squares form, n * ln(SSE/n) + 2k (natural log), with k
/// the number of fitted parameters.
#[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must count as undefined
pub fn aic_ls<T: Real>(n: usize, sse: T, k: usize) -> Result<T> {
    if n < 1 {
        return Err(Error::EmptyInput);
    }
    if !(sse > T::zero()) {
        return Err(Error::PerfectFit);
    }
    Ok(real_of_usize::<T>(n) * (sse / real_of_usize(n)).ln() + real::<T>(2.0) * real_of_usize(k))
}

/// Leave-one-out cross-validation score (RMSE form): n experiments, each
/// refitting on n-1 observations and predicting the held-out one.
///
/// `target` extracts the observed value from an observation; `fit_predict`
/// trains on the remaining observations and predicts the held-out one. It
/// must be deterministic.
pub fn loocv_score<T, O, G, F>(data: &[O], target: G, fit_predict: F) -> Result<T>
where
    T: Real,
    O: Clone,
    G: Fn(&O) -> T,
    F: Fn(&[O], &O) -> Result<T>,
{
    if data.len() < 3 {
        return Err(Error::TooShort {
            needed: 3,
            got: data.len(),
        });
    }
    let mut sse = T::zero();
    for fold in 0..data.len() {
        let mut train = Vec::with_capacity(data.len() - 1);
        train.extend_from_slice(&data[..fold]);
        train.extend_from_slice(&data[fold + 1..]);
        let predicted = fit_predict(&train, &data[fold]).map_err(|e| Error::LoocvFold {
            fold,
            cause: e.to_string(),
        })?;
        let err = target(&data[fold]) - predicted;
        sse = sse + err * err;
    }
    Ok((sse / real_of_usize(data.len())).sqrt())
}
