//! Noise filtering via centered moving average and LOESS.
//!
//! SMA needs an equally spaced, gap-free series; LOESS fits a degree-1 local
//! polynomial with tricube weights over the k nearest neighbors and works on
//! scattered data directly. Neither smoother estimates beyond the observed
//! ends: SMA leaves the first and last (k-1)/2 slots missing, LOESS refuses
//! evaluation outside the sampled hull.

use crate::error::{Error, Result};
use crate::metrics::PairedSeries;
use crate::num::{real, real_of_usize, Real};
use crate::series::{RegularSeries, ScatteredSeries, TimePoint};

/// Smoother choice as carried in pipeline configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmootherSpec {
    Sma { window_k: usize },
    Loess { neighbors: usize },
}

/// Centered moving average with odd window `k`; the `(k-1)/2` entries at
/// each end have no estimate and stay missing.
pub fn sma<T: Real>(s: &RegularSeries<T>, k: usize) -> Result<RegularSeries<T>> {
    let values = s.dense_values()?;
    if k.is_multiple_of(2) {
        return Err(Error::EvenWindow { k });
    }
    if k > values.len() {
        return Err(Error::WindowTooLong {
            k,
            len: values.len(),
        });
    }
    let half = (k - 1) / 2;
    let mut out: Vec<Option<T>> = vec![None; values.len()];
    for i in half..values.len() - half {
        let window = &values[i - half..=i + half];
        let sum: T = window.iter().copied().sum();
        out[i] = Some(sum / real_of_usize(k));
    }
    RegularSeries::new(s.start(), s.step_days(), out)
}

/// LOESS estimate at each input date.
pub fn loess_scattered<T: Real>(
    s: &ScatteredSeries<T>,
    neighbors: usize,
) -> Result<ScatteredSeries<T>> {
    let dates: Vec<TimePoint> = s.points().iter().map(|&(d, _)| d).collect();
    let values = loess_at(s, &dates, neighbors)?;
    ScatteredSeries::new(dates.into_iter().zip(values).collect())
}

/// LOESS evaluated on an equally spaced grid spanning the sampled hull.
pub fn loess_on_grid<T: Real>(
    s: &ScatteredSeries<T>,
    step_days: u32,
    neighbors: usize,
) -> Result<RegularSeries<T>> {
    if step_days != 1 && step_days != 7 {
        return Err(Error::BadStep { step_days });
    }
    let start = s.first_date();
    let span = start.days_until(&s.last_date());
    let n = (span / step_days as i64) as usize + 1;
    let dates: Vec<TimePoint> = (0..n)
        .map(|i| start.plus_days(i as i64 * step_days as i64))
        .collect();
    let values = loess_at(s, &dates, neighbors)?;
    RegularSeries::new(start, step_days, values.into_iter().map(Some).collect())
}

/// LOESS estimates at arbitrary dates inside the sampled hull.
pub fn loess_at<T: Real>(
    s: &ScatteredSeries<T>,
    dates: &[TimePoint],
    neighbors: usize,
) -> Result<Vec<T>> {
    let n = s.len();
    if neighbors < 3 {
        return Err(Error::InvalidInput(
            "LOESS needs at least 3 neighbors".into(),
        ));
    }
    if neighbors > n {
        return Err(Error::WindowTooLong {
            k: neighbors,
            len: n,
        });
    }
    dates
        .iter()
        .map(|&t| loess_value_at(s, t, neighbors))
        .collect()
}

fn loess_value_at<T: Real>(s: &ScatteredSeries<T>, t: TimePoint, k: usize) -> Result<T> {
    let points = s.points();
    let n = points.len();
    if t < s.first_date() || t > s.last_date() {
        return Err(Error::ExtrapolationRefused);
    }

    // expand a window of the k nearest dates around the insertion point;
    // distance ties prefer the earlier sample
    let mut hi = points.partition_point(|&(d, _)| d < t);
    let mut lo = hi;
    let dist = |i: usize| points[i].0.days_until(&t).abs();
    while hi - lo < k {
        if lo == 0 {
            hi += 1;
        } else if hi == n || dist(lo - 1) <= dist(hi) {
            lo -= 1;
        } else {
            hi += 1;
        }
    }

    let d_max = dist(lo).max(dist(hi - 1));
    if d_max == 0 {
        return Err(Error::DegenerateNeighborhood);
    }
    let d_max_t: T = real(d_max as f64);

    // weighted degree-1 fit centered at t; the intercept is the estimate
    let mut sw = T::zero();
    let mut swx = T::zero();
    let mut swy = T::zero();
    let mut swxx = T::zero();
    let mut swxy = T::zero();
    for &(date, y) in &points[lo..hi] {
        let u: T = real(t.days_until(&date) as f64);
        let ratio = (u.abs() / d_max_t).min(T::one());
        let w = {
            let c = T::one() - ratio * ratio * ratio;
            c * c * c
        };
        sw = sw + w;
        swx = swx + w * u;
        swy = swy + w * y;
        swxx = swxx + w * u * u;
        swxy = swxy + w * u * y;
    }
    if sw <= T::zero() {
        return Err(Error::DegenerateNeighborhood);
    }
    let denom = sw * swxx - swx * swx;
    let scale = sw * swxx;
    if denom.abs() <= T::epsilon() * real::<T>(16.0) * scale.abs() {
        // all usable weight on one abscissa: fall back to the weighted mean
        return Ok(swy / sw);
    }
    let slope = (sw * swxy - swx * swy) / denom;
    let intercept = (swy - slope * swx) / sw;
    Ok(intercept)
}

/// Leave-one-out score of an SMA window: each interior point is predicted by
/// the mean of its window excluding itself, and the RMSE of those
/// predictions is returned.
pub fn sma_loocv<T: Real>(s: &RegularSeries<T>, k: usize) -> Result<T> {
    let values = s.dense_values()?;
    if k.is_multiple_of(2) {
        return Err(Error::EvenWindow { k });
    }
    if k < 3 {
        return Err(Error::InvalidInput(
            "LOOCV needs a window of at least 3".into(),
        ));
    }
    if k > values.len() {
        return Err(Error::WindowTooLong {
            k,
            len: values.len(),
        });
    }
    let half = (k - 1) / 2;
    let mut sse = T::zero();
    let mut count = 0usize;
    for i in half..values.len() - half {
        let window = &values[i - half..=i + half];
        let sum: T = window.iter().copied().sum();
        let prediction = (sum - values[i]) / real_of_usize(k - 1);
        let err = values[i] - prediction;
        sse = sse + err * err;
        count += 1;
    }
    Ok((sse / real_of_usize(count)).sqrt())
}

/// Pick the SMA window with the smallest LOOCV error; ties go to the
/// smallest window. Candidates longer than the series are skipped.
pub fn select_sma_window<T: Real>(s: &RegularSeries<T>, candidates: &[usize]) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::NoViableCandidate);
    }
    let mut sorted: Vec<usize> = candidates.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut best: Option<(usize, T)> = None;
    for &k in &sorted {
        if k.is_multiple_of(2) {
            return Err(Error::EvenWindow { k });
        }
        let score = match sma_loocv(s, k) {
            Ok(v) => v,
            Err(Error::WindowTooLong { .. }) => continue,
            Err(e) => return Err(e),
        };
        match best {
            Some((_, best_score)) if score >= best_score => {}
            _ => best = Some((k, score)),
        }
    }
    best.map(|(k, _)| k).ok_or(Error::NoViableCandidate)
}

/// Pick the LOESS neighbor count whose output best matches a reference
/// series: highest Pearson r, ties broken by higher MSIM, then by the
/// smaller neighbor count.
pub fn match_loess_to_reference<T: Real>(
    s: &ScatteredSeries<T>,
    reference: &RegularSeries<T>,
    candidates: &[usize],
) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::NoViableCandidate);
    }
    let overlap: Vec<(TimePoint, T)> = reference
        .iter_present()
        .filter(|(d, _)| *d >= s.first_date() && *d <= s.last_date())
        .collect();
    if overlap.len() < 2 {
        return Err(Error::NoOverlap {
            needed: 2,
            got: overlap.len(),
        });
    }
    let dates: Vec<TimePoint> = overlap.iter().map(|&(d, _)| d).collect();
    let ref_values: Vec<T> = overlap.iter().map(|&(_, v)| v).collect();

    let mut sorted: Vec<usize> = candidates.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut best: Option<(usize, T, T)> = None; // (k, r, msim)
    for &k in &sorted {
        let smoothed = match loess_at(s, &dates, k) {
            Ok(v) => v,
            Err(Error::WindowTooLong { .. }) => continue,
            Err(e) => return Err(e),
        };
        let paired = PairedSeries::new(&ref_values, &smoothed)?;
        let r = paired.pearson_r()?;
        let msim = paired.msim()?;
        let better = match best {
            None => true,
            Some((_, best_r, best_msim)) => r > best_r || (r == best_r && msim > best_msim),
        };
        if better {
            best = Some((k, r, msim));
        }
    }
    best.map(|(k, _, _)| k).ok_or(Error::NoViableCandidate)
}
