//! Turn raw plant measurements into a normalized, outlier-screened virus
//! load series in gene copies per person equivalent per day.
//!
//! Normalization divides the virus concentration by a biomarker
//! concentration and multiplies by that biomarker's specific per-person
//! daily load (standard loads: 120 g COD, 8 g NH4-N, 11 g N per PE and day).
//! Units at the boundary are mg/L for concentrations and m³/d for flow;
//! conversion to g/L and L/d happens inside the formulas.
//!
//! Outlier screening applies Tukey's 1.5-IQR fence to biomarker values only,
//! never to the virus signal itself (on a rising pandemic limb every signal
//! value would be flagged). Samples taken above the 90th flow percentile are
//! flagged separately and excluded downstream.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::num::{mean, real, real_of_usize, Real};
use crate::series::TimePoint;

/// Routinely monitored water quality parameters usable for normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Biomarker {
    Nh4,
    Ntot,
    Cod,
}

impl Biomarker {
    pub const ALL: [Biomarker; 3] = [Biomarker::Nh4, Biomarker::Ntot, Biomarker::Cod];
}

impl fmt::Display for Biomarker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self {
            Biomarker::Nh4 => "nh4",
            Biomarker::Ntot => "ntot",
            Biomarker::Cod => "cod",
        };
        write!(f, "{tag}")
    }
}

impl FromStr for Biomarker {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "nh4" | "nh4-n" => Ok(Biomarker::Nh4),
            "ntot" | "n_tot" | "ntot-n" => Ok(Biomarker::Ntot),
            "cod" => Ok(Biomarker::Cod),
            other => Err(Error::InvalidInput(format!("unknown biomarker '{other}'"))),
        }
    }
}

/// One value per biomarker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerBiomarker<V> {
    pub nh4: V,
    pub ntot: V,
    pub cod: V,
}

impl<V: Copy> PerBiomarker<V> {
    pub fn get(&self, b: Biomarker) -> V {
        match b {
            Biomarker::Nh4 => self.nh4,
            Biomarker::Ntot => self.ntot,
            Biomarker::Cod => self.cod,
        }
    }

    pub fn set(&mut self, b: Biomarker, value: V) {
        match b {
            Biomarker::Nh4 => self.nh4 = value,
            Biomarker::Ntot => self.ntot = value,
            Biomarker::Cod => self.cod = value,
        }
    }
}

/// One dated wastewater measurement. Concentrations are mg/L, the virus
/// concentration gene copies/L, flow m³/d.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample<T: Real> {
    pub date: TimePoint,
    pub c_virus: T,
    pub flow: Option<T>,
    pub c_nh4: Option<T>,
    pub c_cod: Option<T>,
    pub c_ntot: Option<T>,
}

impl<T: Real> Sample<T> {
    pub fn new(
        date: TimePoint,
        c_virus: T,
        flow: Option<T>,
        c_nh4: Option<T>,
        c_cod: Option<T>,
        c_ntot: Option<T>,
    ) -> Result<Self> {
        let all = [Some(c_virus), flow, c_nh4, c_cod, c_ntot];
        for v in all.into_iter().flatten() {
            if !v.is_finite() || v < T::zero() {
                return Err(Error::InvalidInput(
                    "sample values must be finite and non-negative".into(),
                ));
            }
        }
        Ok(Sample {
            date,
            c_virus,
            flow,
            c_nh4,
            c_cod,
            c_ntot,
        })
    }

    pub fn biomarker(&self, b: Biomarker) -> Option<T> {
        match b {
            Biomarker::Nh4 => self.c_nh4,
            Biomarker::Ntot => self.c_ntot,
            Biomarker::Cod => self.c_cod,
        }
    }

    pub fn set_biomarker(&mut self, b: Biomarker, value: Option<T>) {
        match b {
            Biomarker::Nh4 => self.c_nh4 = value,
            Biomarker::Ntot => self.c_ntot = value,
            Biomarker::Cod => self.c_cod = value,
        }
    }
}

/// How the normalization combines the available biomarkers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormalizationPolicy {
    /// Use the first available biomarker in the configured fallback order.
    FallbackOrder,
    /// Average the load estimates over all available biomarkers.
    MeanOfAvailable,
}

/// Standard loads, calibration factors, fallback order and surrogate caps.
#[derive(Debug, Clone, PartialEq)]
pub struct BiomarkerConfig<T: Real> {
    /// Specific daily loads f_bm in g per person equivalent and day.
    pub loads: PerBiomarker<T>,
    /// Multiplicative calibration of the loads (1.0 = standard).
    pub calibration: PerBiomarker<T>,
    pub fallback_order: Vec<Biomarker>,
    /// 95th-percentile surrogate concentrations (mg/L) substituted for
    /// excessively high outliers.
    pub outlier_caps: PerBiomarker<Option<T>>,
    pub policy: NormalizationPolicy,
}

impl<T: Real> Default for BiomarkerConfig<T> {
    fn default() -> Self {
        BiomarkerConfig {
            loads: PerBiomarker {
                nh4: real(8.0),
                ntot: real(11.0),
                cod: real(120.0),
            },
            calibration: PerBiomarker {
                nh4: T::one(),
                ntot: T::one(),
                cod: T::one(),
            },
            fallback_order: vec![Biomarker::Nh4, Biomarker::Ntot, Biomarker::Cod],
            outlier_caps: PerBiomarker {
                nh4: Some(real(45.3)),
                ntot: Some(real(63.1)),
                cod: Some(real(859.0)),
            },
            policy: NormalizationPolicy::FallbackOrder,
        }
    }
}

impl<T: Real> BiomarkerConfig<T> {
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail validation
    pub fn validate(&self) -> Result<()> {
        for b in Biomarker::ALL {
            if !(self.loads.get(b) > T::zero()) {
                return Err(Error::InvalidInput(format!(
                    "load for {b} must be positive"
                )));
            }
            if !(self.calibration.get(b) > T::zero()) {
                return Err(Error::InvalidInput(format!(
                    "calibration factor for {b} must be positive"
                )));
            }
        }
        if self.fallback_order.is_empty() {
            return Err(Error::InvalidInput(
                "fallback order must not be empty".into(),
            ));
        }
        Ok(())
    }

    /// Load adjusted by its calibration factor.
    fn adjusted_load(&self, b: Biomarker) -> T {
        self.loads.get(b) * self.calibration.get(b)
    }
}

/// Which biomarker path produced a normalized value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BiomarkerUsed {
    Single(Biomarker),
    Mean,
}

impl fmt::Display for BiomarkerUsed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BiomarkerUsed::Single(b) => write!(f, "{b}"),
            BiomarkerUsed::Mean => write!(f, "mean"),
        }
    }
}

/// A normalized virus load in gene copies per person equivalent per day,
/// with provenance flags.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedPoint<T: Real> {
    pub date: TimePoint,
    pub l_virus: T,
    pub biomarker_used: BiomarkerUsed,
    pub flow_outlier: bool,
    pub biomarker_substituted: bool,
}

/// L_virus = c_virus * f_bm / c_bm with c_bm converted from mg/L to g/L and
/// f_bm multiplied by its calibration factor.
pub fn normalize<T: Real>(
    sample: &Sample<T>,
    cfg: &BiomarkerConfig<T>,
) -> Result<NormalizedPoint<T>> {
    cfg.validate()?;
    let estimate = |b: Biomarker| -> Result<T> {
        let c_mgl = sample.biomarker(b).ok_or(Error::NormalizationImpossible)?;
        if c_mgl == T::zero() {
            return Err(Error::ZeroBiomarker);
        }
        let c_gl = c_mgl / real(1000.0);
        Ok(sample.c_virus * cfg.adjusted_load(b) / c_gl)
    };

    let (l_virus, used) = match cfg.policy {
        NormalizationPolicy::FallbackOrder => {
            let b = cfg
                .fallback_order
                .iter()
                .copied()
                .find(|&b| sample.biomarker(b).is_some())
                .ok_or(Error::NormalizationImpossible)?;
            (estimate(b)?, BiomarkerUsed::Single(b))
        }
        NormalizationPolicy::MeanOfAvailable => {
            let available: Vec<Biomarker> = cfg
                .fallback_order
                .iter()
                .copied()
                .filter(|&b| sample.biomarker(b).is_some())
                .collect();
            if available.is_empty() {
                return Err(Error::NormalizationImpossible);
            }
            let estimates = available
                .iter()
                .map(|&b| estimate(b))
                .collect::<Result<Vec<T>>>()?;
            if available.len() == 1 {
                (estimates[0], BiomarkerUsed::Single(available[0]))
            } else {
                (mean(&estimates).unwrap(), BiomarkerUsed::Mean)
            }
        }
    };

    Ok(NormalizedPoint {
        date: sample.date,
        l_virus,
        biomarker_used: used,
        flow_outlier: false,
        biomarker_substituted: false,
    })
}

/// PE = c_bm * Q / f_bm (the mg/L→g/L and m³/d→L/d factors cancel).
pub fn population_equivalents<T: Real>(c_bm_mgl: T, flow_m3d: T, f_bm: T) -> Result<T> {
    if !(c_bm_mgl > T::zero() && flow_m3d > T::zero() && f_bm > T::zero()) {
        return Err(Error::InvalidInput(
            "population equivalents require positive inputs".into(),
        ));
    }
    Ok(c_bm_mgl * flow_m3d / f_bm)
}

/// Derive per-biomarker calibration factors from samples carrying all three
/// biomarkers and flow: each biomarker's mean PE estimate (at standard
/// loads) divided by the average of the three means. The factors average to
/// one by construction.
pub fn calibrate_biomarkers<T: Real>(
    samples: &[Sample<T>],
    cfg: &BiomarkerConfig<T>,
) -> Result<PerBiomarker<T>> {
    const MIN_COMPLETE: usize = 10;
    let complete: Vec<&Sample<T>> = samples
        .iter()
        .filter(|s| s.flow.is_some() && Biomarker::ALL.iter().all(|&b| s.biomarker(b).is_some()))
        .collect();
    if complete.len() < MIN_COMPLETE {
        return Err(Error::InsufficientCalibrationSamples {
            needed: MIN_COMPLETE,
            got: complete.len(),
        });
    }
    let mut means = PerBiomarker {
        nh4: T::zero(),
        ntot: T::zero(),
        cod: T::zero(),
    };
    for b in Biomarker::ALL {
        let pe: Result<Vec<T>> = complete
            .iter()
            .map(|s| {
                population_equivalents(s.biomarker(b).unwrap(), s.flow.unwrap(), cfg.loads.get(b))
            })
            .collect();
        means.set(b, mean(&pe?).unwrap());
    }
    let grand = (means.nh4 + means.ntot + means.cod) / real(3.0);
    if grand == T::zero() {
        return Err(Error::InvalidInput("degenerate calibration samples".into()));
    }
    Ok(PerBiomarker {
        nh4: means.nh4 / grand,
        ntot: means.ntot / grand,
        cod: means.cod / grand,
    })
}

/// Percentile by linear interpolation between closest ranks: at fraction
/// p/100 of the way through n-1 gaps.
pub fn percentile<T: Real>(sorted: &[T], p: T) -> Result<T> {
    if sorted.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(p >= T::zero() && p <= real(100.0)) {
        return Err(Error::InvalidInput("percentile must be in [0, 100]".into()));
    }
    let rank = p / real(100.0) * real_of_usize(sorted.len() - 1);
    let lo = rank.floor().to_usize().unwrap();
    let frac = rank - rank.floor();
    if lo + 1 >= sorted.len() {
        return Ok(sorted[sorted.len() - 1]);
    }
    Ok(sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]))
}

/// Flag samples whose inflow exceeds the 90th percentile of the recorded
/// flow history. The rule needs at least one full year of history. Samples
/// without a flow value are never flagged.
pub fn flag_flow_outliers<T: Real>(samples: &[Sample<T>], flow_history: &[T]) -> Result<Vec<bool>> {
    const MIN_HISTORY: usize = 365;
    if flow_history.len() < MIN_HISTORY {
        return Err(Error::FlowHistoryTooShort {
            needed: MIN_HISTORY,
            got: flow_history.len(),
        });
    }
    if flow_history.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let mut sorted = flow_history.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q90 = percentile(&sorted, real(90.0))?;
    Ok(samples
        .iter()
        .map(|s| s.flow.map(|q| q > q90).unwrap_or(false))
        .collect())
}

/// Tukey fence for one biomarker's campaign distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fence<T: Real> {
    pub lo: T,
    pub hi: T,
}

/// Per-biomarker 1.5-IQR fences computed from the full campaign; biomarkers
/// with fewer than four values get no fence and are never screened.
#[derive(Debug, Clone, PartialEq)]
pub struct BiomarkerFences<T: Real> {
    pub fences: PerBiomarker<Option<Fence<T>>>,
}

impl<T: Real> BiomarkerFences<T> {
    pub fn from_samples(samples: &[Sample<T>]) -> Result<Self> {
        let mut fences = PerBiomarker {
            nh4: None,
            ntot: None,
            cod: None,
        };
        for b in Biomarker::ALL {
            let mut values: Vec<T> = samples.iter().filter_map(|s| s.biomarker(b)).collect();
            if values.len() < 4 {
                continue;
            }
            values.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let q1 = percentile(&values, real(25.0))?;
            let q3 = percentile(&values, real(75.0))?;
            let iqr = q3 - q1;
            let spread = real::<T>(1.5) * iqr;
            fences.set(
                b,
                Some(Fence {
                    lo: q1 - spread,
                    hi: q3 + spread,
                }),
            );
        }
        Ok(BiomarkerFences { fences })
    }
}

/// Outcome of biomarker screening on one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ScreenedSample<T: Real> {
    pub sample: Sample<T>,
    /// Biomarker whose value was replaced by the surrogate cap, if any.
    pub substituted: Option<Biomarker>,
    /// Out-of-fence biomarkers removed from the sample.
    pub dropped: Vec<Biomarker>,
}

enum FenceClass {
    Inside,
    High,
    Low,
}

/// Apply the 1.5-IQR rule to the sample's biomarkers: out-of-fence values
/// are dropped so normalization falls back to the next biomarker. When every
/// available biomarker is out of fence, an excessively high value is
/// replaced by the configured 95th-percentile surrogate; all-low samples are
/// unusable.
pub fn screen_biomarker<T: Real>(
    sample: &Sample<T>,
    fences: &BiomarkerFences<T>,
    cfg: &BiomarkerConfig<T>,
) -> Result<ScreenedSample<T>> {
    let classify = |b: Biomarker, v: T| -> FenceClass {
        match fences.fences.get(b) {
            None => FenceClass::Inside,
            Some(f) => {
                if v > f.hi {
                    FenceClass::High
                } else if v < f.lo {
                    FenceClass::Low
                } else {
                    FenceClass::Inside
                }
            }
        }
    };

    let present: Vec<(Biomarker, T)> = Biomarker::ALL
        .iter()
        .filter_map(|&b| sample.biomarker(b).map(|v| (b, v)))
        .collect();
    if present.is_empty() {
        return Ok(ScreenedSample {
            sample: sample.clone(),
            substituted: None,
            dropped: vec![],
        });
    }

    let mut out = sample.clone();
    let mut dropped = Vec::new();
    let any_inside = present
        .iter()
        .any(|&(b, v)| matches!(classify(b, v), FenceClass::Inside));

    if any_inside {
        for &(b, v) in &present {
            if !matches!(classify(b, v), FenceClass::Inside) {
                out.set_biomarker(b, None);
                dropped.push(b);
            }
        }
        return Ok(ScreenedSample {
            sample: out,
            substituted: None,
            dropped,
        });
    }

    // every available biomarker is out of fence: surrogate an excessively
    // high one, preferring the fallback order
    let surrogate = cfg.fallback_order.iter().copied().find(|&b| {
        sample
            .biomarker(b)
            .map(|v| {
                matches!(classify(b, v), FenceClass::High) && cfg.outlier_caps.get(b).is_some()
            })
            .unwrap_or(false)
    });
    match surrogate {
        Some(b) => {
            out.set_biomarker(b, cfg.outlier_caps.get(b));
            for &(other, _) in &present {
                if other != b {
                    out.set_biomarker(other, None);
                    dropped.push(other);
                }
            }
            Ok(ScreenedSample {
                sample: out,
                substituted: Some(b),
                dropped,
            })
        }
        None => Err(Error::SampleUnusable),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn day(offset: i64) -> TimePoint {
        TimePoint::new(2021, 3, 1).unwrap().plus_days(offset)
    }

    fn sample(c_virus: f64, nh4: Option<f64>, cod: Option<f64>, ntot: Option<f64>) -> Sample<f64> {
        Sample::new(day(0), c_virus, Some(4.0e5), nh4, cod, ntot).unwrap()
    }

    #[test]
    fn sample_rejects_negative_and_nonfinite_values() {
        assert!(Sample::new(day(0), -1.0, None, None, None, None).is_err());
        assert!(Sample::new(day(0), 1.0, Some(-5.0), None, None, None).is_err());
        assert!(Sample::new(day(0), f64::NAN, None, None, None, None).is_err());
        assert!(Sample::new(day(0), 0.0, None, Some(40.0), None, None).is_ok());
    }

    #[test]
    fn normalize_nh4_hand_example() {
        let cfg = BiomarkerConfig::default();
        let s = sample(1.0e5, Some(40.0), None, None);
        let p = normalize(&s, &cfg).unwrap();
        assert!((p.l_virus - 2.0e7).abs() < 1.0);
        assert_eq!(p.biomarker_used, BiomarkerUsed::Single(Biomarker::Nh4));
        assert!(!p.flow_outlier && !p.biomarker_substituted);
    }

    #[test]
    fn normalize_zero_virus_gives_zero_load() {
        let cfg = BiomarkerConfig::default();
        for s in [
            sample(0.0, Some(40.0), None, None),
            sample(0.0, None, Some(600.0), None),
        ] {
            assert_eq!(normalize(&s, &cfg).unwrap().l_virus, 0.0);
        }
    }

    #[test]
    fn normalize_falls_back_to_ntot() {
        let cfg = BiomarkerConfig::default();
        let s = sample(2.0e5, None, None, Some(44.0));
        let p = normalize(&s, &cfg).unwrap();
        assert_eq!(p.biomarker_used, BiomarkerUsed::Single(Biomarker::Ntot));
        assert!((p.l_virus - 2.0e5 * 11.0 / 0.044).abs() < 1.0);
    }

    #[test]
    fn normalize_error_paths() {
        let cfg = BiomarkerConfig::default();
        let none = sample(1.0e5, None, None, None);
        assert_eq!(
            normalize(&none, &cfg).unwrap_err(),
            Error::NormalizationImpossible
        );
        let zero = sample(1.0e5, Some(0.0), None, None);
        assert_eq!(normalize(&zero, &cfg).unwrap_err(), Error::ZeroBiomarker);
    }

    #[test]
    fn normalize_mean_policy_averages_available() {
        let cfg = BiomarkerConfig {
            policy: NormalizationPolicy::MeanOfAvailable,
            ..Default::default()
        };
        let s = sample(1.0e5, Some(40.0), Some(600.0), None);
        let p = normalize(&s, &cfg).unwrap();
        let nh4_est = 1.0e5 * 8.0 / 0.040;
        let cod_est = 1.0e5 * 120.0 / 0.600;
        assert!((p.l_virus - 0.5 * (nh4_est + cod_est)).abs() < 1.0);
        assert_eq!(p.biomarker_used, BiomarkerUsed::Mean);
    }

    #[test]
    fn normalize_applies_calibration_factor() {
        let mut cfg = BiomarkerConfig::default();
        cfg.calibration.nh4 = 0.939;
        let s = sample(1.0e5, Some(40.0), None, None);
        let p = normalize(&s, &cfg).unwrap();
        assert!((p.l_virus - 2.0e7 * 0.939).abs() < 1.0);
    }

    #[test]
    fn population_equivalents_fixtures() {
        // big-city scale: 40 mg/L NH4 at 4e5 m³/d -> 2 million PE
        let pe: f64 = population_equivalents(40.0, 4.0e5, 8.0).unwrap();
        assert!((pe - 2.0e6).abs() < 1e-6);
        // doubling flow doubles PE
        let pe2 = population_equivalents(40.0, 8.0e5, 8.0).unwrap();
        assert!((pe2 - 2.0 * pe).abs() < 1e-6);
        // unit case
        assert!((population_equivalents(8.0_f64, 1.0, 8.0).unwrap() - 1.0).abs() < 1e-12);
        assert!(population_equivalents(0.0_f64, 1.0, 8.0).is_err());
    }

    #[test]
    fn calibration_is_unity_for_standard_proportions() {
        let cfg = BiomarkerConfig::<f64>::default();
        // all biomarkers exactly on standard composition: c = f * P / Q
        let p = 2.0e6;
        let q = 4.0e5;
        let samples: Vec<Sample<f64>> = (0..12)
            .map(|i| {
                Sample::new(
                    day(i),
                    1.0e5,
                    Some(q),
                    Some(8.0 * p / q),
                    Some(120.0 * p / q),
                    Some(11.0 * p / q),
                )
                .unwrap()
            })
            .collect();
        let factors = calibrate_biomarkers(&samples, &cfg).unwrap();
        for b in Biomarker::ALL {
            assert!((factors.get(b) - 1.0).abs() < 1e-12, "{b}");
        }
    }

    #[test]
    fn calibration_detects_biased_cod() {
        let cfg = BiomarkerConfig::<f64>::default();
        let p = 2.0e6;
        let q = 4.0e5;
        let samples: Vec<Sample<f64>> = (0..15)
            .map(|i| {
                Sample::new(
                    day(i),
                    1.0e5,
                    Some(q),
                    Some(8.0 * p / q),
                    Some(1.2 * 120.0 * p / q), // COD systematically 20% high
                    Some(11.0 * p / q),
                )
                .unwrap()
            })
            .collect();
        let factors = calibrate_biomarkers(&samples, &cfg).unwrap();
        // brute force: means are (1, 1.2, 1) x P; grand mean = 16/15 P
        assert!((factors.cod - 1.2 / (3.2 / 3.0)).abs() < 1e-12);
        assert!(factors.cod > 1.0);
        assert!(factors.nh4 < 1.0 && factors.ntot < 1.0);
        let avg = (factors.nh4 + factors.ntot + factors.cod) / 3.0;
        assert!((avg - 1.0).abs() < 1e-12);
    }

    #[test]
    fn calibration_needs_enough_complete_samples() {
        let cfg = BiomarkerConfig::<f64>::default();
        let samples: Vec<Sample<f64>> = (0..9)
            .map(|i| sample(1.0, Some(40.0), Some(600.0), Some(52.0)).clone_with_day(i))
            .collect();
        let err = calibrate_biomarkers(&samples, &cfg).unwrap_err();
        assert_eq!(
            err,
            Error::InsufficientCalibrationSamples { needed: 10, got: 9 }
        );
    }

    impl Sample<f64> {
        fn clone_with_day(&self, offset: i64) -> Sample<f64> {
            let mut s = self.clone();
            s.date = day(offset);
            s
        }
    }

    #[test]
    fn percentile_brute_force_on_integers() {
        let sorted: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        let q90 = percentile(&sorted, 90.0).unwrap();
        assert!((q90 - 900.1).abs() < 1e-9);
        assert_eq!(percentile(&sorted, 0.0).unwrap(), 1.0);
        assert_eq!(percentile(&sorted, 100.0).unwrap(), 1000.0);
    }

    #[test]
    fn flow_outlier_rule() {
        let history: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        let samples = vec![
            sample(1.0, Some(40.0), None, None).with_flow(901.0),
            sample(1.0, Some(40.0), None, None).with_flow(900.0),
            sample(1.0, Some(40.0), None, None).with_flow(500.5), // median
            sample(1.0, Some(40.0), None, None).with_flow(1000.0), // max of history
        ];
        let flags = flag_flow_outliers(&samples, &history).unwrap();
        assert_eq!(flags, vec![true, false, false, true]);

        let short: Vec<f64> = (0..364).map(|i| i as f64).collect();
        assert_eq!(
            flag_flow_outliers(&samples, &short).unwrap_err(),
            Error::FlowHistoryTooShort {
                needed: 365,
                got: 364
            }
        );
    }

    impl Sample<f64> {
        fn with_flow(mut self, q: f64) -> Sample<f64> {
            self.flow = Some(q);
            self
        }
    }

    #[test]
    fn screening_leaves_in_fence_samples_alone() {
        let campaign: Vec<Sample<f64>> = (0..40)
            .map(|i| {
                sample(
                    1.0,
                    Some(38.0 + (i % 5) as f64),
                    Some(600.0 + i as f64),
                    Some(52.0),
                )
                .clone_with_day(i as i64)
            })
            .collect();
        let fences = BiomarkerFences::from_samples(&campaign).unwrap();
        let cfg = BiomarkerConfig::default();
        let s = sample(1.0, Some(40.0), Some(610.0), Some(52.0));
        let screened = screen_biomarker(&s, &fences, &cfg).unwrap();
        assert_eq!(screened.sample, s);
        assert!(screened.dropped.is_empty() && screened.substituted.is_none());
    }

    #[test]
    fn screening_drops_high_nh4_so_cod_takes_over() {
        let campaign: Vec<Sample<f64>> = (0..40)
            .map(|i| {
                sample(
                    1.0,
                    Some(38.0 + (i % 5) as f64),
                    Some(600.0 + i as f64),
                    None,
                )
                .clone_with_day(i as i64)
            })
            .collect();
        let fences = BiomarkerFences::from_samples(&campaign).unwrap();
        let cfg = BiomarkerConfig::default();
        // NH4 at ten times Q3, COD in range
        let s = sample(2.0e5, Some(420.0), Some(610.0), None);
        let screened = screen_biomarker(&s, &fences, &cfg).unwrap();
        assert_eq!(screened.dropped, vec![Biomarker::Nh4]);
        let p = normalize(&screened.sample, &cfg).unwrap();
        assert_eq!(p.biomarker_used, BiomarkerUsed::Single(Biomarker::Cod));
    }

    #[test]
    fn screening_substitutes_cap_when_all_high() {
        let campaign: Vec<Sample<f64>> = (0..40)
            .map(|i| sample(1.0, Some(38.0 + (i % 5) as f64), None, None).clone_with_day(i as i64))
            .collect();
        let fences = BiomarkerFences::from_samples(&campaign).unwrap();
        let cfg = BiomarkerConfig::default();
        let s = sample(2.0e5, Some(800.0), None, None);
        let screened = screen_biomarker(&s, &fences, &cfg).unwrap();
        assert_eq!(screened.substituted, Some(Biomarker::Nh4));
        assert_eq!(screened.sample.c_nh4, Some(45.3)); // default surrogate cap
    }

    #[test]
    fn screening_rejects_all_low_samples() {
        let campaign: Vec<Sample<f64>> = (0..40)
            .map(|i| sample(1.0, Some(38.0 + (i % 5) as f64), None, None).clone_with_day(i as i64))
            .collect();
        let fences = BiomarkerFences::from_samples(&campaign).unwrap();
        let cfg = BiomarkerConfig::default();
        let s = sample(2.0e5, Some(0.5), None, None);
        assert_eq!(
            screen_biomarker(&s, &fences, &cfg).unwrap_err(),
            Error::SampleUnusable
        );
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn normalize_homogeneous_in_virus_concentration(
                c in 1.0_f64..1e7,
                alpha in 0.01_f64..100.0,
                nh4 in 1.0_f64..100.0,
            ) {
                let cfg = BiomarkerConfig::default();
                let base = normalize(&sample(c, Some(nh4), None, None), &cfg).unwrap();
                let scaled = normalize(&sample(alpha * c, Some(nh4), None, None), &cfg).unwrap();
                prop_assert!((scaled.l_virus - alpha * base.l_virus).abs() <= 1e-9 * scaled.l_virus.abs());
            }

            #[test]
            fn screening_is_deterministic(seed in 0u64..500) {
                let mut rng = crate::rng::Rng::new(seed);
                let campaign: Vec<Sample<f64>> = (0..30)
                    .map(|i| {
                        sample(
                            1.0,
                            Some(40.0 + 3.0 * rng.normal()),
                            Some(600.0 + 30.0 * rng.normal().abs()),
                            Some(52.0 + 4.0 * rng.normal()),
                        )
                        .clone_with_day(i as i64)
                    })
                    .collect();
                let fences = BiomarkerFences::from_samples(&campaign).unwrap();
                let cfg = BiomarkerConfig::default();
                for s in &campaign {
                    let a = screen_biomarker(s, &fences, &cfg);
                    let b = screen_biomarker(s, &fences, &cfg);
                    prop_assert_eq!(a, b);
                }
            }
        }
    }
}
