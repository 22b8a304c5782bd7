//! Forward generator of ground-truth scenarios: Gaussian prevalence waves
//! drive per-person shedding into the plant inflow, and every measurement
//! channel gets independent multiplicative lognormal noise. Documented
//! infections are a lagged, scaled copy of prevalence, so lag recovery and
//! normalization round trips have known answers.
//!
//! Generation is fully determined by the scenario seed. Each simulated day
//! consumes a fixed number of draws from one [`crate::rng::Rng`] stream in a
//! fixed order, so the output for a given seed never depends on which noise
//! channels are switched off.

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::num::{real, Real};
use crate::preprocess::Sample;
use crate::rng::Rng;
use crate::series::{RegularSeries, TimePoint};

/// When wastewater samples are taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingSchedule {
    Daily,
    /// Mondays and Thursdays.
    TwiceWeekly,
    /// Each day kept with probability 0.45 (seeded).
    Irregular,
}

impl FromStr for SamplingSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "daily" => Ok(SamplingSchedule::Daily),
            "twice_weekly" | "twice-weekly" => Ok(SamplingSchedule::TwiceWeekly),
            "irregular" => Ok(SamplingSchedule::Irregular),
            other => Err(Error::InvalidInput(format!(
                "unknown sampling schedule '{other}'"
            ))),
        }
    }
}

/// One Gaussian prevalence wave.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wave<T: Real> {
    pub peak_day: f64,
    pub peak_prevalence: T,
    /// Standard deviation of the Gaussian, in days.
    pub width_days: f64,
}

/// Relative standard deviation per measurement channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec<T: Real> {
    pub virus: T,
    pub biomarker: T,
    pub flow: T,
    pub indicator: T,
}

impl<T: Real> NoiseSpec<T> {
    pub fn none() -> Self {
        NoiseSpec {
            virus: T::zero(),
            biomarker: T::zero(),
            flow: T::zero(),
            indicator: T::zero(),
        }
    }
}

impl<T: Real> Default for NoiseSpec<T> {
    fn default() -> Self {
        NoiseSpec {
            virus: real(0.15),
            biomarker: real(0.05),
            flow: real(0.05),
            indicator: real(0.10),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario<T: Real> {
    pub start: TimePoint,
    pub duration_days: usize,
    pub waves: Vec<Wave<T>>,
    pub population: T,
    /// Shed load per infected person and day, gene copies.
    pub shed_load: T,
    /// Dry-weather inflow, m³/d.
    pub flow_base: T,
    pub noise: NoiseSpec<T>,
    pub sampling: SamplingSchedule,
    pub seed: u64,
    /// Per-day probability of a rain spike that dilutes all concentrations.
    pub rain_probability: T,
    /// Share of prevalent cases that end up as documented infections.
    pub detection_fraction: T,
    /// Days by which documented infections trail the wastewater signal.
    pub report_lag_days: usize,
    pub tests_per_day: T,
}

impl<T: Real> Default for Scenario<T> {
    /// 18 months, three pandemic waves, big-city plant scale.
    fn default() -> Self {
        Scenario {
            start: TimePoint::new(2021, 1, 4).unwrap(), // a Monday
            duration_days: 548,
            waves: vec![
                Wave {
                    peak_day: 90.0,
                    peak_prevalence: real(0.004),
                    width_days: 25.0,
                },
                Wave {
                    peak_day: 250.0,
                    peak_prevalence: real(0.008),
                    width_days: 30.0,
                },
                Wave {
                    peak_day: 430.0,
                    peak_prevalence: real(0.006),
                    width_days: 28.0,
                },
            ],
            population: real(2.0e6),
            shed_load: real(1.0e9),
            flow_base: real(4.0e5),
            noise: NoiseSpec::default(),
            sampling: SamplingSchedule::TwiceWeekly,
            seed: 42,
            rain_probability: real(0.05),
            detection_fraction: real(0.35),
            report_lag_days: 8,
            tests_per_day: real(5.0e4),
        }
    }
}

impl<T: Real> Scenario<T> {
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail validation
    pub fn validate(&self) -> Result<()> {
        if self.duration_days == 0 {
            return Err(Error::InvalidScenario("duration must be positive".into()));
        }
        if self.waves.is_empty() {
            return Err(Error::InvalidScenario("at least one wave required".into()));
        }
        for w in &self.waves {
            if !(w.peak_prevalence >= T::zero()) || !(w.width_days > 0.0) {
                return Err(Error::InvalidScenario("bad wave parameters".into()));
            }
        }
        for (name, v) in [
            ("population", self.population),
            ("shed_load", self.shed_load),
            ("flow_base", self.flow_base),
        ] {
            if !(v > T::zero()) {
                return Err(Error::InvalidScenario(format!("{name} must be positive")));
            }
        }
        for (name, v) in [
            ("noise.virus", self.noise.virus),
            ("noise.biomarker", self.noise.biomarker),
            ("noise.flow", self.noise.flow),
            ("noise.indicator", self.noise.indicator),
            ("rain_probability", self.rain_probability),
            ("tests_per_day", self.tests_per_day),
        ] {
            if !(v >= T::zero()) {
                return Err(Error::InvalidScenario(format!(
                    "{name} must be non-negative"
                )));
            }
        }
        if !(self.detection_fraction > T::zero() && self.detection_fraction <= T::one()) {
            return Err(Error::InvalidScenario(
                "detection_fraction must be in (0, 1]".into(),
            ));
        }
        for t in 0..self.duration_days {
            let p = self.prevalence_at(t as f64);
            if !(p >= T::zero() && p <= T::one()) {
                return Err(Error::InvalidScenario(format!(
                    "prevalence leaves [0, 1] on day {t}"
                )));
            }
        }
        Ok(())
    }

    /// Sum of the Gaussian waves, evaluated at any (possibly negative) day.
    pub fn prevalence_at(&self, day: f64) -> T {
        self.waves
            .iter()
            .map(|w| {
                let z = (day - w.peak_day) / w.width_days;
                w.peak_prevalence * real((-0.5 * z * z).exp())
            })
            .sum()
    }
}

/// Everything a scenario produces: plant samples on the sampling schedule
/// plus daily ground-truth and indicator series.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedData<T: Real> {
    pub samples: Vec<Sample<T>>,
    pub truth_prevalence: RegularSeries<T>,
    pub new_infections: RegularSeries<T>,
    pub tests: RegularSeries<T>,
    /// Dominant-variant share in percent, a deterministic logistic ramp.
    pub variant_share: RegularSeries<T>,
}

/// Fraction of prevalent cases documented per day; together with the
/// detection fraction it scales prevalence into daily case counts.
const DAILY_REPORTING_RATE: f64 = 0.1;

/// Run the generator. Concentrations follow mass balance: biomarker
/// c_bm = f_bm * P / Q in mg/L and virus c = L_shed * P * f_inf / (1000 Q)
/// in gene copies/L, so rain dilution cancels exactly in normalization.
pub fn generate<T: Real>(sc: &Scenario<T>) -> Result<GeneratedData<T>> {
    sc.validate()?;
    let mut rng = Rng::new(sc.seed);
    let n = sc.duration_days;

    let mut samples = Vec::new();
    let mut truth = Vec::with_capacity(n);
    let mut infections = Vec::with_capacity(n);
    let mut tests = Vec::with_capacity(n);
    let mut variant = Vec::with_capacity(n);

    type Setter<T> = fn(&mut Sample<T>, Option<T>);
    let loads: [(Setter<T>, f64); 3] = [
        (|s, v| s.c_nh4 = v, 8.0),
        (|s, v| s.c_cod = v, 120.0),
        (|s, v| s.c_ntot = v, 11.0),
    ];

    for t in 0..n {
        let date = sc.start.plus_days(t as i64);

        // fixed per-day draw order, independent of parameters
        let u_rain = rng.uniform();
        let u_rain_mag = rng.uniform();
        let u_keep = rng.uniform();
        let noise_virus = sc.noise.virus.to_f64().unwrap();
        let noise_bm = sc.noise.biomarker.to_f64().unwrap();
        let noise_flow = sc.noise.flow.to_f64().unwrap();
        let noise_ind = sc.noise.indicator.to_f64().unwrap();
        let f_virus: T = real(rng.lognormal_factor(noise_virus));
        let f_nh4: T = real(rng.lognormal_factor(noise_bm));
        let f_cod: T = real(rng.lognormal_factor(noise_bm));
        let f_ntot: T = real(rng.lognormal_factor(noise_bm));
        let f_flow: T = real(rng.lognormal_factor(noise_flow));
        let f_ind: T = real(rng.lognormal_factor(noise_ind));
        let f_tests: T = real(rng.lognormal_factor(noise_ind));

        let prevalence = sc.prevalence_at(t as f64);
        truth.push(Some(prevalence));

        // seasonal dry-weather pattern plus occasional rain spikes
        let season: T = real(1.0 + 0.1 * (2.0 * std::f64::consts::PI * t as f64 / 365.25).sin());
        let mut flow_true = sc.flow_base * season;
        if real::<T>(u_rain) < sc.rain_probability {
            flow_true = flow_true * real(1.5 + 1.5 * u_rain_mag);
        }

        // indicators exist every day
        let lagged = sc.prevalence_at(t as f64 - sc.report_lag_days as f64);
        let new_inf = sc.detection_fraction
            * real::<T>(DAILY_REPORTING_RATE)
            * sc.population
            * lagged
            * f_ind;
        infections.push(Some(new_inf));
        let weekend_factor: T = if date.is_weekend() {
            real(0.7)
        } else {
            T::one()
        };
        tests.push(Some(sc.tests_per_day * weekend_factor * f_tests));
        let ramp = 100.0 / (1.0 + (-(t as f64 - n as f64 / 2.0) / 30.0).exp());
        variant.push(Some(real(ramp)));

        let keep = match sc.sampling {
            SamplingSchedule::Daily => true,
            SamplingSchedule::TwiceWeekly => {
                let weekday = date.iso_week_monday().days_until(&date);
                weekday == 0 || weekday == 3
            }
            SamplingSchedule::Irregular => u_keep < 0.45,
        };
        if !keep {
            continue;
        }

        let liters_per_m3: T = real(1000.0);
        let c_virus =
            sc.shed_load * sc.population * prevalence / (flow_true * liters_per_m3) * f_virus;
        let mut sample = Sample::new(date, c_virus, None, None, None, None)?;
        let bm_factors = [f_nh4, f_cod, f_ntot];
        for ((setter, load), f_bm) in loads.iter().zip(bm_factors) {
            let c = real::<T>(*load) * sc.population / flow_true * f_bm;
            setter(&mut sample, Some(c));
        }
        sample.flow = Some(flow_true * f_flow);
        samples.push(sample);
    }

    Ok(GeneratedData {
        samples,
        truth_prevalence: RegularSeries::new(sc.start, 1, truth)?,
        new_infections: RegularSeries::new(sc.start, 1, infections)?,
        tests: RegularSeries::new(sc.start, 1, tests)?,
        variant_share: RegularSeries::new(sc.start, 1, variant)?,
    })
}
