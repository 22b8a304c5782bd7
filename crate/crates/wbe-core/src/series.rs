//! Time-series value types and resampling from scattered to regular grids.
//!
//! Monitoring data arrives as a scattered series: strictly increasing dates
//! at irregular intervals. Smoothing on a fixed window, regression joins and
//! forecasting all need an equally spaced grid, produced here either by
//! block averaging into ISO weeks or by interpolation (linear or inverse
//! distance weighting). No operation extrapolates beyond the sampled hull.

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, Duration, NaiveDate};

use crate::error::{Error, Result};
use crate::num::{real, real_of_usize, Real};

/// A calendar date; the time axis of every series has day resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimePoint(NaiveDate);

impl TimePoint {
    pub fn new(year: i32, month: u32, day: u32) -> Result<Self> {
        NaiveDate::from_ymd_opt(year, month, day)
            .map(TimePoint)
            .ok_or_else(|| Error::InvalidInput(format!("invalid date {year}-{month:02}-{day:02}")))
    }

    pub fn plus_days(&self, days: i64) -> TimePoint {
        TimePoint(self.0 + Duration::days(days))
    }

    /// Signed day count from `self` to `other`.
    pub fn days_until(&self, other: &TimePoint) -> i64 {
        other.0.signed_duration_since(self.0).num_days()
    }

    /// Monday of the ISO week containing this date; weekly slots are
    /// labelled by it.
    pub fn iso_week_monday(&self) -> TimePoint {
        let back = self.0.weekday().num_days_from_monday() as i64;
        TimePoint(self.0 - Duration::days(back))
    }

    pub fn is_weekend(&self) -> bool {
        self.0.weekday().num_days_from_monday() >= 5
    }
}

impl fmt::Display for TimePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.format("%Y-%m-%d"))
    }
}

impl FromStr for TimePoint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NaiveDate::parse_from_str(s, "%Y-%m-%d")
            .map(TimePoint)
            .map_err(|_| Error::InvalidInput(format!("invalid date '{s}'")))
    }
}

/// Irregularly spaced, time-ordered observations; the raw monitoring record.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteredSeries<T: Real> {
    points: Vec<(TimePoint, T)>,
}

impl<T: Real> ScatteredSeries<T> {
    /// Dates must be strictly increasing and all values finite.
    pub fn new(points: Vec<(TimePoint, T)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyInput);
        }
        for w in points.windows(2) {
            if w[0].0 >= w[1].0 {
                return Err(Error::UnsortedDates);
            }
        }
        if points.iter().any(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(ScatteredSeries { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[(TimePoint, T)] {
        &self.points
    }

    pub fn first_date(&self) -> TimePoint {
        self.points[0].0
    }

    pub fn last_date(&self) -> TimePoint {
        self.points[self.points.len() - 1].0
    }

    pub fn values(&self) -> Vec<T> {
        self.points.iter().map(|&(_, v)| v).collect()
    }

    /// Average all measurements per ISO-week slot (Monday through Sunday);
    /// slots without samples stay missing. Only 7-day slots are supported.
    pub fn block_average_downsample(&self, step_days: u32) -> Result<RegularSeries<T>> {
        if step_days != 7 {
            return Err(Error::WeeklyOnly { step_days });
        }
        let start = self.first_date().iso_week_monday();
        let end = self.last_date().iso_week_monday();
        let n_slots = (start.days_until(&end) / 7) as usize + 1;
        let mut sums = vec![T::zero(); n_slots];
        let mut counts = vec![0usize; n_slots];
        for &(date, value) in &self.points {
            let slot = (start.days_until(&date.iso_week_monday()) / 7) as usize;
            sums[slot] = sums[slot] + value;
            counts[slot] += 1;
        }
        let values = sums
            .iter()
            .zip(&counts)
            .map(|(&s, &c)| {
                if c > 0 {
                    Some(s / real_of_usize(c))
                } else {
                    None
                }
            })
            .collect();
        RegularSeries::new(start, 7, values)
    }

    /// Straight-line interpolation onto a grid spanning the sampled hull.
    /// Grid points that coincide with a sample return the sample value.
    pub fn linear_interpolate(&self, step_days: u32) -> Result<RegularSeries<T>> {
        self.interpolate_grid(step_days, |t| self.linear_value_at(t))
    }

    /// Value of the linear interpolant at `t`; refuses extrapolation.
    pub fn linear_value_at(&self, t: TimePoint) -> Result<T> {
        if self.points.len() < 2 {
            return Err(Error::TooShort {
                needed: 2,
                got: self.points.len(),
            });
        }
        if t < self.first_date() || t > self.last_date() {
            return Err(Error::ExtrapolationRefused);
        }
        let idx = self.points.partition_point(|&(d, _)| d < t);
        if self.points[idx].0 == t {
            return Ok(self.points[idx].1);
        }
        let (d0, y0) = self.points[idx - 1];
        let (d1, y1) = self.points[idx];
        let span: T = real(d0.days_until(&d1) as f64);
        let frac: T = real::<T>(d0.days_until(&t) as f64) / span;
        Ok(y0 + (y1 - y0) * frac)
    }

    /// Global inverse-distance weighting: value(t) = sum(w_j y_j) / sum(w_j)
    /// with w_j = |t - t_j|^(-power). An exact date hit returns the sample
    /// value itself.
    pub fn shepard_interpolate(&self, step_days: u32, power: T) -> Result<RegularSeries<T>> {
        if power <= T::zero() {
            return Err(Error::InvalidInput("Shepard power must be positive".into()));
        }
        self.interpolate_grid(step_days, |t| self.shepard_value_at(t, power))
    }

    pub fn shepard_value_at(&self, t: TimePoint, power: T) -> Result<T> {
        if self.points.len() < 2 {
            return Err(Error::TooShort {
                needed: 2,
                got: self.points.len(),
            });
        }
        if t < self.first_date() || t > self.last_date() {
            return Err(Error::ExtrapolationRefused);
        }
        let mut num = T::zero();
        let mut den = T::zero();
        for &(date, value) in &self.points {
            let dist: T = real(t.days_until(&date).abs() as f64);
            if dist == T::zero() {
                return Ok(value);
            }
            let w = dist.powf(-power);
            num = num + w * value;
            den = den + w;
        }
        Ok(num / den)
    }

    fn interpolate_grid<F>(&self, step_days: u32, value_at: F) -> Result<RegularSeries<T>>
    where
        F: Fn(TimePoint) -> Result<T>,
    {
        if step_days != 1 && step_days != 7 {
            return Err(Error::BadStep { step_days });
        }
        if self.points.len() < 2 {
            return Err(Error::TooShort {
                needed: 2,
                got: self.points.len(),
            });
        }
        let start = self.first_date();
        let span = start.days_until(&self.last_date());
        let n = (span / step_days as i64) as usize + 1;
        let mut values = Vec::with_capacity(n);
        for i in 0..n {
            let t = start.plus_days(i as i64 * step_days as i64);
            values.push(Some(value_at(t)?));
        }
        RegularSeries::new(start, step_days, values)
    }
}

/// Equally spaced values with a fixed grid step of 1 or 7 days; missing
/// entries are explicit. Index `i` maps to `start + i * step_days`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularSeries<T: Real> {
    start: TimePoint,
    step_days: u32,
    values: Vec<Option<T>>,
}

impl<T: Real> RegularSeries<T> {
    pub fn new(start: TimePoint, step_days: u32, values: Vec<Option<T>>) -> Result<Self> {
        if step_days != 1 && step_days != 7 {
            return Err(Error::BadStep { step_days });
        }
        if values.is_empty() {
            return Err(Error::EmptyInput);
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(RegularSeries {
            start,
            step_days,
            values,
        })
    }

    pub fn from_values(start: TimePoint, step_days: u32, values: Vec<T>) -> Result<Self> {
        Self::new(start, step_days, values.into_iter().map(Some).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn start(&self) -> TimePoint {
        self.start
    }

    pub fn step_days(&self) -> u32 {
        self.step_days
    }

    pub fn date_at(&self, index: usize) -> TimePoint {
        self.start.plus_days(index as i64 * self.step_days as i64)
    }

    /// Grid index of `date` if it falls exactly on the grid.
    pub fn index_of(&self, date: TimePoint) -> Option<usize> {
        let days = self.start.days_until(&date);
        if days < 0 || days % self.step_days as i64 != 0 {
            return None;
        }
        let idx = (days / self.step_days as i64) as usize;
        (idx < self.values.len()).then_some(idx)
    }

    pub fn get(&self, index: usize) -> Option<T> {
        self.values.get(index).copied().flatten()
    }

    pub fn value_at(&self, date: TimePoint) -> Option<T> {
        self.index_of(date).and_then(|i| self.get(i))
    }

    pub fn values(&self) -> &[Option<T>] {
        &self.values
    }

    pub fn is_gap_free(&self) -> bool {
        self.values.iter().all(|v| v.is_some())
    }

    /// All values as a dense vector; errors when any entry is missing.
    pub fn dense_values(&self) -> Result<Vec<T>> {
        self.values.iter().map(|v| v.ok_or(Error::Gaps)).collect()
    }

    pub fn iter_present(&self) -> impl Iterator<Item = (TimePoint, T)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|v| (self.date_at(i), v)))
    }

    pub fn to_scattered(&self) -> Result<ScatteredSeries<T>> {
        ScatteredSeries::new(self.iter_present().collect())
    }

    /// Drop missing entries at both ends (smoothers leave them there).
    pub fn trim_missing_ends(&self) -> Result<RegularSeries<T>> {
        let first = self
            .values
            .iter()
            .position(|v| v.is_some())
            .ok_or(Error::EmptyInput)?;
        let last = self.values.iter().rposition(|v| v.is_some()).unwrap();
        RegularSeries::new(
            self.date_at(first),
            self.step_days,
            self.values[first..=last].to_vec(),
        )
    }

    /// Fill interior gaps by straight lines between the neighboring present
    /// values; returns the filled series and the number of filled slots.
    /// Leading/trailing gaps are left untouched.
    pub fn fill_gaps_linear(&self) -> Result<(RegularSeries<T>, usize)> {
        let scattered = self.to_scattered()?;
        let mut values = self.values.clone();
        let mut filled = 0usize;
        if scattered.len() >= 2 {
            for (i, slot) in values.iter_mut().enumerate() {
                if slot.is_none() {
                    let date = self.start.plus_days(i as i64 * self.step_days as i64);
                    if let Ok(v) = scattered.linear_value_at(date) {
                        *slot = Some(v);
                        filled += 1;
                    }
                }
            }
        }
        Ok((
            RegularSeries {
                start: self.start,
                step_days: self.step_days,
                values,
            },
            filled,
        ))
    }

    /// First difference: output_i = y_{i+1} - y_i, start shifted one step.
    pub fn difference(&self) -> Result<RegularSeries<T>> {
        let dense = self.dense_values()?;
        if dense.len() < 2 {
            return Err(Error::TooShort {
                needed: 2,
                got: dense.len(),
            });
        }
        let values = dense.windows(2).map(|w| Some(w[1] - w[0])).collect();
        RegularSeries::new(
            self.start.plus_days(self.step_days as i64),
            self.step_days,
            values,
        )
    }

    /// Cumulative sum seeded with `anchor`; inverse of [`difference`] so that
    /// `undifference(difference(s), s[0])` reproduces `s`.
    ///
    /// [`difference`]: RegularSeries::difference
    pub fn undifference(&self, anchor: T) -> Result<RegularSeries<T>> {
        let dense = self.dense_values()?;
        if !anchor.is_finite() {
            return Err(Error::NonFinite);
        }
        let mut values = Vec::with_capacity(dense.len() + 1);
        let mut acc = anchor;
        values.push(Some(acc));
        for d in dense {
            acc = acc + d;
            values.push(Some(acc));
        }
        RegularSeries::new(
            self.start.plus_days(-(self.step_days as i64)),
            self.step_days,
            values,
        )
    }
}

/// Cumulative continuation of a differenced forecast from the last observed
/// level; used when back-transforming forecasts.
pub fn cumulate_from<T: Real>(last_level: T, diffs: &[T]) -> Vec<T> {
    let mut acc = last_level;
    diffs
        .iter()
        .map(|&d| {
            acc = acc + d;
            acc
        })
        .collect()
}
