//! Lag analysis and regression of the smoothed wastewater signal (plus
//! covariates) against epidemic indicators: cross-correlation over a lag
//! range, multivariate linear and univariate polynomial least squares, with
//! t-tests, LOOCV and mean-response confidence bands.

use crate::dist::{student_t_quantile, student_t_two_sided_p};
use crate::error::{Error, Result};
use crate::linalg::{least_squares, quadratic_form};
use crate::metrics::{significance_threshold, PairedSeries};
use crate::num::{real, real_of_usize, Real};
use crate::series::RegularSeries;

/// Observation rows (feature vectors, no intercept column) and the target.
#[derive(Debug, Clone)]
pub struct DesignMatrix<T: Real> {
    rows: Vec<Vec<T>>,
    target: Vec<T>,
    intercept: bool,
}

impl<T: Real> DesignMatrix<T> {
    pub fn new(rows: Vec<Vec<T>>, target: Vec<T>, intercept: bool) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyInput);
        }
        if rows.len() != target.len() {
            return Err(Error::LengthMismatch {
                left: rows.len(),
                right: target.len(),
            });
        }
        let d = rows[0].len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::LengthMismatch {
                left: d,
                right: rows.iter().map(|r| r.len()).max().unwrap(),
            });
        }
        if rows
            .iter()
            .flatten()
            .chain(target.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite);
        }
        let params = d + usize::from(intercept);
        if rows.len() <= params {
            return Err(Error::DegreesOfFreedom {
                n: rows.len(),
                params,
            });
        }
        Ok(DesignMatrix {
            rows,
            target,
            intercept,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.rows[0].len()
    }

    pub fn rows(&self) -> &[Vec<T>] {
        &self.rows
    }

    pub fn target(&self) -> &[T] {
        &self.target
    }
}

/// Per-coefficient t-test at the 5% level.
#[derive(Debug, Clone)]
pub struct TTest<T: Real> {
    pub t: T,
    pub p: T,
    pub significant: bool,
}

/// A fitted least-squares model with diagnostics. `coefficients[0]` is the
/// intercept when one was requested; feature coefficients follow in input
/// order.
#[derive(Debug, Clone)]
pub struct RegressionFit<T: Real> {
    pub coefficients: Vec<T>,
    pub residual_sd: T,
    pub r_squared: T,
    pub rmse: T,
    pub loocv: T,
    pub t_stats: Vec<TTest<T>>,
    pub dof: usize,
    intercept: bool,
    /// (X'X)^-1 in the *scaled* column space used during fitting.
    xtx_inv: Vec<Vec<T>>,
    /// Per-feature column scale applied before fitting (1 for plain fits).
    col_scale: Vec<T>,
}

impl<T: Real> RegressionFit<T> {
    pub fn has_intercept(&self) -> bool {
        self.intercept
    }

    pub fn n_features(&self) -> usize {
        self.coefficients.len() - usize::from(self.intercept)
    }
}

/// Pearson r of the signal against the indicator shifted by each lag.
#[derive(Debug, Clone)]
pub struct LagEntry<T: Real> {
    pub lag: usize,
    pub r: T,
    pub n: usize,
}

#[derive(Debug, Clone)]
pub struct LagTable<T: Real> {
    pub entries: Vec<LagEntry<T>>,
    pub best_lag: usize,
    pub best_r: T,
    /// 1.96/sqrt(n) at the best lag's overlap.
    pub threshold: T,
}

/// Correlate `signal_t` with `indicator_{t+lag}` for lag in `0..=max_lag`
/// (the indicator lags the signal). Requires both series on the same grid
/// step and at least 10 overlapping points per lag.
pub fn cross_correlate<T: Real>(
    signal: &RegularSeries<T>,
    indicator: &RegularSeries<T>,
    max_lag: usize,
) -> Result<LagTable<T>> {
    if signal.step_days() != indicator.step_days() {
        return Err(Error::BadStep {
            step_days: indicator.step_days(),
        });
    }
    let step = signal.step_days() as i64;
    let mut entries = Vec::with_capacity(max_lag + 1);
    for lag in 0..=max_lag {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (date, x) in signal.iter_present() {
            if let Some(y) = indicator.value_at(date.plus_days(lag as i64 * step)) {
                xs.push(x);
                ys.push(y);
            }
        }
        if xs.len() < 10 {
            return Err(Error::NoOverlap {
                needed: 10,
                got: xs.len(),
            });
        }
        let r = PairedSeries::new(&xs, &ys)?.pearson_r()?;
        entries.push(LagEntry {
            lag,
            r,
            n: xs.len(),
        });
    }
    let best = entries
        .iter()
        .fold(&entries[0], |best, e| if e.r > best.r { e } else { best });
    let (best_lag, best_r, best_n) = (best.lag, best.r, best.n);
    Ok(LagTable {
        entries,
        best_lag,
        best_r,
        threshold: significance_threshold(best_n)?,
    })
}

/// Multivariate linear least squares with R², RMSE, LOOCV and per-coefficient
/// t-tests (standard errors from the unscaled coefficient covariance times
/// the residual variance).
pub fn fit_linear<T: Real>(design: &DesignMatrix<T>) -> Result<RegressionFit<T>> {
    let scales = vec![T::one(); design.n_features()];
    fit_scaled(design, &scales)
}

/// Least squares of `y` on powers x^1..x^order plus an intercept.
///
/// The powers are built on x/max|x| for conditioning and the coefficients
/// are mapped back to the raw powers, so callers see the natural basis.
pub fn fit_polynomial<T: Real>(x: &[T], y: &[T], order: usize) -> Result<RegressionFit<T>> {
    if order < 1 {
        return Err(Error::InvalidInput("polynomial order must be >= 1".into()));
    }
    let scale = x.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    if scale == T::zero() {
        return Err(Error::SingularDesign);
    }
    let rows: Vec<Vec<T>> = x
        .iter()
        .map(|&v| (1..=order).map(|k| v.powi(k as i32)).collect())
        .collect();
    let scales: Vec<T> = (1..=order)
        .map(|k| T::one() / scale.powi(k as i32))
        .collect();
    let design = DesignMatrix::new(rows, y.to_vec(), true)?;
    fit_scaled(&design, &scales)
}

fn fit_scaled<T: Real>(design: &DesignMatrix<T>, scales: &[T]) -> Result<RegressionFit<T>> {
    let n = design.n_rows();
    let d = design.n_features();
    let intercept = design.intercept;
    let params = d + usize::from(intercept);
    let dof = n - params;
    if dof == 0 {
        return Err(Error::DegreesOfFreedom { n, params });
    }

    let rows: Vec<Vec<T>> = design
        .rows
        .iter()
        .map(|r| {
            let mut row = Vec::with_capacity(params);
            if intercept {
                row.push(T::one());
            }
            row.extend(r.iter().zip(scales).map(|(&v, &s)| v * s));
            row
        })
        .collect();
    let ls = least_squares(&rows, &design.target)?;

    // map coefficients back to the raw feature basis
    let mut coefficients = Vec::with_capacity(params);
    let offset = usize::from(intercept);
    if intercept {
        coefficients.push(ls.coef[0]);
    }
    for (j, &scale) in scales.iter().enumerate() {
        coefficients.push(ls.coef[offset + j] * scale);
    }

    let residual_var = ls.sse / real_of_usize(dof);
    let residual_sd = residual_var.sqrt();
    let rmse = (ls.sse / real_of_usize(n)).sqrt();
    let r_squared = PairedSeries::new(&design.target, &ls.fitted)?.r_squared()?;

    // exact leave-one-out identity for linear smoothers: e_i / (1 - h_i)
    let mut press = T::zero();
    for (i, (&e, &h)) in ls.residuals.iter().zip(&ls.hat_diag).enumerate() {
        let denom = T::one() - h;
        if denom <= T::epsilon() {
            return Err(Error::LoocvFold {
                fold: i,
                cause: "leverage of one".into(),
            });
        }
        let fold_err = e / denom;
        press = press + fold_err * fold_err;
    }
    let loocv = (press / real_of_usize(n)).sqrt();

    let dof_t = real_of_usize::<T>(dof).to_f64().unwrap();
    let t_stats = ls
        .coef
        .iter()
        .enumerate()
        .map(|(j, &b)| {
            let se = (residual_var * ls.xtx_inv[j][j]).sqrt();
            let t = b / se;
            let p = real::<T>(student_t_two_sided_p(t.to_f64().unwrap(), dof_t));
            TTest {
                t,
                p,
                significant: p < real(0.05),
            }
        })
        .collect();

    Ok(RegressionFit {
        coefficients,
        residual_sd,
        r_squared,
        rmse,
        loocv,
        t_stats,
        dof,
        intercept,
        xtx_inv: ls.xtx_inv,
        col_scale: scales.to_vec(),
    })
}

/// Predicted mean response for feature rows (no intercept column).
pub fn predict<T: Real>(fit: &RegressionFit<T>, rows: &[Vec<T>]) -> Result<Vec<T>> {
    let d = fit.n_features();
    let offset = usize::from(fit.intercept);
    rows.iter()
        .map(|r| {
            if r.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: r.len(),
                });
            }
            let mut v = if fit.intercept {
                fit.coefficients[0]
            } else {
                T::zero()
            };
            for (j, &x) in r.iter().enumerate() {
                v = v + fit.coefficients[offset + j] * x;
            }
            Ok(v)
        })
        .collect()
}

/// Symmetric confidence band for the mean response at `level` (0.90 gives
/// the 5%-95% band), using the t quantile at the fit's residual degrees of
/// freedom. Returns per-row (lower, upper).
pub fn confidence_band<T: Real>(
    fit: &RegressionFit<T>,
    rows: &[Vec<T>],
    level: T,
) -> Result<Vec<(T, T)>> {
    if !(level > T::zero() && level < T::one()) {
        return Err(Error::BadLevel);
    }
    let center = predict(fit, rows)?;
    let q = (T::one() + level) / real(2.0);
    let t_star = real::<T>(student_t_quantile(q.to_f64().unwrap(), fit.dof as f64));
    let offset = usize::from(fit.intercept);
    let mut band = Vec::with_capacity(rows.len());
    for (row, &fit_val) in rows.iter().zip(&center) {
        let mut x0 = Vec::with_capacity(offset + row.len());
        if fit.intercept {
            x0.push(T::one());
        }
        x0.extend(row.iter().zip(&fit.col_scale).map(|(&v, &s)| v * s));
        let se = (fit.residual_sd * fit.residual_sd * quadratic_form(&fit.xtx_inv, &x0)).sqrt();
        band.push((fit_val - t_star * se, fit_val + t_star * se));
    }
    Ok(band)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::TimePoint;

    fn day(offset: i64) -> TimePoint {
        TimePoint::new(2021, 3, 1).unwrap().plus_days(offset)
    }

    fn univariate(xs: &[f64], ys: &[f64]) -> DesignMatrix<f64> {
        DesignMatrix::new(xs.iter().map(|&x| vec![x]).collect(), ys.to_vec(), true).unwrap()
    }

    #[test]
    fn exact_line_has_unit_r_squared() {
        let xs: Vec<f64> = (0..12).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        let fit = fit_linear(&univariate(&xs, &ys)).unwrap();
        assert!((fit.coefficients[0] - 1.0).abs() < 1e-10);
        assert!((fit.coefficients[1] - 2.0).abs() < 1e-10);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert!(fit.rmse < 1e-9);
    }

    #[test]
    fn r_squared_agrees_with_metric_on_fitted_values() {
        let mut rng = crate::rng::Rng::new(21);
        let xs: Vec<f64> = (0..30).map(|_| rng.normal()).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 1.0 + 0.5 * x + rng.normal()).collect();
        let fit = fit_linear(&univariate(&xs, &ys)).unwrap();
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        let fitted = predict(&fit, &rows).unwrap();
        let direct = PairedSeries::new(&ys, &fitted)
            .unwrap()
            .r_squared()
            .unwrap();
        assert!((fit.r_squared - direct).abs() < 1e-12);
    }

    #[test]
    fn loocv_equals_naive_refit_loop() {
        let mut rng = crate::rng::Rng::new(33);
        for _ in 0..5 {
            let rows: Vec<Vec<f64>> = (0..25).map(|_| vec![rng.normal(), rng.normal()]).collect();
            let ys: Vec<f64> = rows
                .iter()
                .map(|r| 2.0 - r[0] + 0.5 * r[1] + 0.3 * rng.normal())
                .collect();
            let design = DesignMatrix::new(rows.clone(), ys.clone(), true).unwrap();
            let fit = fit_linear(&design).unwrap();

            let mut sse = 0.0;
            for i in 0..rows.len() {
                let mut train_rows = rows.clone();
                let mut train_y = ys.clone();
                train_rows.remove(i);
                train_y.remove(i);
                let sub = DesignMatrix::new(train_rows, train_y, true).unwrap();
                let sub_fit = fit_linear(&sub).unwrap();
                let pred = predict(&sub_fit, &[rows[i].clone()]).unwrap()[0];
                sse += (ys[i] - pred) * (ys[i] - pred);
            }
            let naive = (sse / rows.len() as f64).sqrt();
            assert!((fit.loocv - naive).abs() < 1e-9, "{} vs {naive}", fit.loocv);
        }
    }

    #[test]
    fn pure_noise_covariate_usually_insignificant() {
        let mut rng = crate::rng::Rng::new(77);
        let mut insignificant = 0;
        for _ in 0..100 {
            let rows: Vec<Vec<f64>> = (0..40).map(|_| vec![rng.normal(), rng.normal()]).collect();
            let ys: Vec<f64> = rows
                .iter()
                .map(|r| 1.0 + 2.0 * r[0] + 0.5 * rng.normal())
                .collect();
            let fit = fit_linear(&DesignMatrix::new(rows, ys, true).unwrap()).unwrap();
            // index 2 = the noise covariate
            if !fit.t_stats[2].significant {
                insignificant += 1;
            }
        }
        assert!(
            insignificant >= 90,
            "only {insignificant}/100 insignificant"
        );
    }

    #[test]
    fn polynomial_reproduces_cubic() {
        let xs: Vec<f64> = (0..20).map(|i| 0.5 * i as f64 - 4.0).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| 1.0 - 2.0 * x + 0.5 * x * x + 0.25 * x * x * x)
            .collect();
        let fit = fit_polynomial(&xs, &ys, 3).unwrap();
        assert!((fit.r_squared - 1.0).abs() < 1e-10);
        let expect = [1.0, -2.0, 0.5, 0.25];
        for (b, e) in fit.coefficients.iter().zip(expect) {
            assert!((b - e).abs() < 1e-7, "{b} vs {e}");
        }
    }

    #[test]
    fn polynomial_order_one_matches_linear() {
        let mut rng = crate::rng::Rng::new(4);
        let xs: Vec<f64> = (0..25).map(|_| 1e6 * (1.0 + rng.uniform())).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 5.0 + 3e-6 * x + rng.normal()).collect();
        let poly = fit_polynomial(&xs, &ys, 1).unwrap();
        let lin = fit_linear(&univariate(&xs, &ys)).unwrap();
        for (a, b) in poly.coefficients.iter().zip(&lin.coefficients) {
            assert!((a - b).abs() < 1e-10 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn predict_basics() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 4.0 + 0.5 * x).collect();
        let fit = fit_linear(&univariate(&xs, &ys)).unwrap();
        // zero feature vector -> intercept
        let at_zero = predict(&fit, &[vec![0.0]]).unwrap()[0];
        assert!((at_zero - 4.0).abs() < 1e-10);
        // hand-computed dot product on a 2-feature case
        let rows: Vec<Vec<f64>> = vec![
            vec![1.0, 2.0],
            vec![0.5, -1.0],
            vec![2.0, 0.0],
            vec![3.0, 1.0],
            vec![-1.0, 4.0],
        ];
        let target: Vec<f64> = rows.iter().map(|r| 1.0 + 2.0 * r[0] - 3.0 * r[1]).collect();
        let fit2 = fit_linear(&DesignMatrix::new(rows, target, true).unwrap()).unwrap();
        let pred = predict(&fit2, &[vec![2.0, 3.0]]).unwrap()[0];
        assert!((pred - (1.0 + 4.0 - 9.0)).abs() < 1e-8);
        // dimension mismatch
        assert!(matches!(
            predict(&fit2, &[vec![1.0]]),
            Err(Error::DimensionMismatch {
                expected: 2,
                got: 1
            })
        ));
    }

    #[test]
    fn band_contains_fit_and_shrinks_with_n() {
        let mut rng = crate::rng::Rng::new(8);
        let xs: Vec<f64> = (0..200).map(|i| i as f64 / 10.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 1.0 + 0.2 * x + rng.normal()).collect();
        let fit = fit_linear(&univariate(&xs, &ys)).unwrap();
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        let fitted = predict(&fit, &rows).unwrap();
        let band = confidence_band(&fit, &rows, 0.90).unwrap();
        for ((lo, hi), f) in band.iter().zip(&fitted) {
            assert!(lo <= f && f <= hi);
        }
        // at the covariate mean the half-width approaches 1.645 s/sqrt(n)
        let mean_x = xs.iter().sum::<f64>() / xs.len() as f64;
        let at_mean = confidence_band(&fit, &[vec![mean_x]], 0.90).unwrap()[0];
        let half = (at_mean.1 - at_mean.0) / 2.0;
        let asymptotic = 1.645 * fit.residual_sd / (xs.len() as f64).sqrt();
        assert!(
            (half - asymptotic).abs() / asymptotic < 0.05,
            "{half} vs {asymptotic}"
        );
        assert!(matches!(
            confidence_band(&fit, &rows, 1.0),
            Err(Error::BadLevel)
        ));
    }

    #[test]
    fn cross_correlation_identity_and_shift() {
        let mut rng = crate::rng::Rng::new(15);
        let base: Vec<f64> = (0..80)
            .map(|i| (i as f64 / 9.0).sin() * 10.0 + 0.05 * rng.normal())
            .collect();
        let x = RegularSeries::from_values(day(0), 1, base.clone()).unwrap();
        let table = cross_correlate(&x, &x, 5).unwrap();
        assert_eq!(table.best_lag, 0);
        assert!((table.best_r - 1.0).abs() < 1e-12);

        // indicator = signal shifted 3 steps later plus small noise
        let shifted: Vec<f64> = base.iter().map(|v| v + 0.01 * rng.normal()).collect();
        let y = RegularSeries::from_values(day(3), 1, shifted).unwrap();
        let table = cross_correlate(&x, &y, 8).unwrap();
        assert_eq!(table.best_lag, 3);
        assert!(table.best_r > table.threshold);
    }

    #[test]
    fn cross_correlation_affine_invariant_best_lag() {
        let mut rng = crate::rng::Rng::new(16);
        let base: Vec<f64> = (0..60)
            .map(|i| (i as f64 / 7.0).cos() * 4.0 + 0.1 * rng.normal())
            .collect();
        let x = RegularSeries::from_values(day(0), 1, base.clone()).unwrap();
        let y = RegularSeries::from_values(day(2), 1, base.clone()).unwrap();
        let plain = cross_correlate(&x, &y, 6).unwrap();
        let scaled: Vec<f64> = base.iter().map(|v| 7.0 * v + 100.0).collect();
        let ys = RegularSeries::from_values(day(2), 1, scaled).unwrap();
        let affine = cross_correlate(&x, &ys, 6).unwrap();
        assert_eq!(plain.best_lag, affine.best_lag);
    }

    #[test]
    fn cross_correlation_requires_overlap_and_same_step() {
        let x = RegularSeries::from_values(day(0), 1, vec![1.0; 12]).unwrap();
        let y_weekly = RegularSeries::from_values(day(0), 7, vec![1.0; 12]).unwrap();
        assert!(matches!(
            cross_correlate(&x, &y_weekly, 2),
            Err(Error::BadStep { .. })
        ));
        let short = RegularSeries::from_values(day(0), 1, vec![1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(
            cross_correlate(&short, &short, 1),
            Err(Error::NoOverlap { .. })
        ));
    }

    #[test]
    fn collinear_design_is_rejected() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let ys: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let design = DesignMatrix::new(rows, ys, true).unwrap();
        assert_eq!(fit_linear(&design).unwrap_err(), Error::SingularDesign);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn residuals_orthogonal_to_design(seed in 0u64..10_000) {
                let mut rng = crate::rng::Rng::new(seed);
                let rows: Vec<Vec<f64>> = (0..30).map(|_| vec![rng.normal(), 3.0 * rng.normal()]).collect();
                let ys: Vec<f64> = rows.iter().map(|r| 1.0 + r[0] - r[1] + rng.normal()).collect();
                let design = DesignMatrix::new(rows.clone(), ys.clone(), true).unwrap();
                let fit = fit_linear(&design).unwrap();
                let fitted = predict(&fit, &rows).unwrap();
                let scale = ys.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
                for j in 0..2 {
                    let dot: f64 = rows.iter().zip(ys.iter().zip(&fitted))
                        .map(|(r, (&y, &f))| r[j] * (y - f)).sum();
                    prop_assert!(dot.abs() < 1e-8 * scale);
                }
            }
        }
    }
}
