//! Univariate short-term forecasting via simple exponential smoothing and
//! AR(p), with stationarity transforms (differencing, Box-Cox plus
//! differencing) and a walk-forward post-sample evaluation harness.
//!
//! The SES recursion is forecast(t+1) = alpha * y_t + (1 - alpha) *
//! forecast(t) seeded with y_0; multistep forecasts feed forecasts back in
//! as observations, which makes every SES multistep forecast equal the
//! one-step value. AR(p) regresses y_t on its p predecessors by least
//! squares and iterates one-step predictions for longer horizons.
//!
//! Post-sample evaluation walks forward through the series: at each origin
//! the model is fitted on data up to the origin only, the forecast error is
//! scored against the held-out observations, and the per-cell RMSE is
//! aggregated over all origins. Held-out observations never train anything.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::least_squares;
use crate::metrics::aic_ls;
use crate::num::{real, real_of_usize, Real};
use crate::regression::{fit_linear, DesignMatrix};
use crate::series::{cumulate_from, RegularSeries};

/// Stationarity transform applied before fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformKind {
    None,
    Difference,
    BoxCoxDifference,
}

impl fmt::Display for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self {
            TransformKind::None => "none",
            TransformKind::Difference => "difference",
            TransformKind::BoxCoxDifference => "boxcox_difference",
        };
        write!(f, "{tag}")
    }
}

impl FromStr for TransformKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(TransformKind::None),
            "difference" | "diff" => Ok(TransformKind::Difference),
            "boxcox_difference" | "boxcox+difference" | "boxcox" => {
                Ok(TransformKind::BoxCoxDifference)
            }
            other => Err(Error::InvalidInput(format!("unknown transform '{other}'"))),
        }
    }
}

/// A transform fitted to an observed window, keeping the anchors needed for
/// exact inversion.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformChain<T: Real> {
    pub kind: TransformKind,
    pub lambda: Option<T>,
    /// First and last value of the (Box-Cox) transformed window, before
    /// differencing.
    first: Option<T>,
    last: Option<T>,
}

/// Apply `kind` to the observed window. For Box-Cox chains, `lambda` may be
/// supplied; otherwise it is estimated from the window by grid-search MLE.
pub fn fit_transform<T: Real>(
    kind: TransformKind,
    lambda: Option<T>,
    y: &[T],
) -> Result<(TransformChain<T>, Vec<T>)> {
    match kind {
        TransformKind::None => Ok((
            TransformChain {
                kind,
                lambda: None,
                first: None,
                last: None,
            },
            y.to_vec(),
        )),
        TransformKind::Difference => {
            if y.len() < 2 {
                return Err(Error::TooShort {
                    needed: 2,
                    got: y.len(),
                });
            }
            let diffs = y.windows(2).map(|w| w[1] - w[0]).collect();
            Ok((
                TransformChain {
                    kind,
                    lambda: None,
                    first: Some(y[0]),
                    last: Some(y[y.len() - 1]),
                },
                diffs,
            ))
        }
        TransformKind::BoxCoxDifference => {
            if y.len() < 2 {
                return Err(Error::TooShort {
                    needed: 2,
                    got: y.len(),
                });
            }
            let lambda = match lambda {
                Some(l) => l,
                None => boxcox_mle(y)?,
            };
            let b = boxcox(y, lambda)?;
            let diffs = b.windows(2).map(|w| w[1] - w[0]).collect();
            Ok((
                TransformChain {
                    kind,
                    lambda: Some(lambda),
                    first: Some(b[0]),
                    last: Some(b[b.len() - 1]),
                },
                diffs,
            ))
        }
    }
}

impl<T: Real> TransformChain<T> {
    /// Invert the transform on the observed window itself; composing with
    /// [`fit_transform`] reproduces the input.
    pub fn invert_window(&self, z: &[T]) -> Result<Vec<T>> {
        match self.kind {
            TransformKind::None => Ok(z.to_vec()),
            TransformKind::Difference => {
                let first = self
                    .first
                    .ok_or(Error::InvalidInput("transform not fitted".into()))?;
                let mut out = Vec::with_capacity(z.len() + 1);
                out.push(first);
                out.extend(cumulate_from(first, z));
                Ok(out)
            }
            TransformKind::BoxCoxDifference => {
                let first = self
                    .first
                    .ok_or(Error::InvalidInput("transform not fitted".into()))?;
                let lambda = self.lambda.unwrap();
                let mut levels = Vec::with_capacity(z.len() + 1);
                levels.push(first);
                levels.extend(cumulate_from(first, z));
                boxcox_inverse(&levels, lambda)
            }
        }
    }

    /// Back-transform forecasts made in the transformed space onto the
    /// original scale (naive back-transform, no bias correction).
    pub fn invert_forecast(&self, forecasts: &[T]) -> Result<Vec<T>> {
        match self.kind {
            TransformKind::None => Ok(forecasts.to_vec()),
            TransformKind::Difference => {
                let last = self
                    .last
                    .ok_or(Error::InvalidInput("transform not fitted".into()))?;
                Ok(cumulate_from(last, forecasts))
            }
            TransformKind::BoxCoxDifference => {
                let last = self
                    .last
                    .ok_or(Error::InvalidInput("transform not fitted".into()))?;
                let levels = cumulate_from(last, forecasts);
                boxcox_inverse(&levels, self.lambda.unwrap())
            }
        }
    }
}

/// Box-Cox power transform: (y^lambda - 1)/lambda, or log y at lambda = 0.
#[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail the positivity check
pub fn boxcox<T: Real>(y: &[T], lambda: T) -> Result<Vec<T>> {
    if y.iter().any(|&v| !(v > T::zero())) {
        return Err(Error::NonPositive);
    }
    Ok(y.iter()
        .map(|&v| {
            if lambda == T::zero() {
                v.ln()
            } else {
                (v.powf(lambda) - T::one()) / lambda
            }
        })
        .collect())
}

/// Exact inverse of [`boxcox`]; errors if a value leaves the transform's
/// domain (lambda * z + 1 must stay positive).
pub fn boxcox_inverse<T: Real>(z: &[T], lambda: T) -> Result<Vec<T>> {
    z.iter()
        .map(|&v| {
            if lambda == T::zero() {
                Ok(v.exp())
            } else {
                let base = lambda * v + T::one();
                if base <= T::zero() {
                    return Err(Error::BoxCoxDomain);
                }
                Ok(base.powf(T::one() / lambda))
            }
        })
        .collect()
}

/// Grid-search MLE for the Box-Cox lambda over [-2, 2] in steps of 0.001,
/// maximizing the profile log-likelihood
/// l(lambda) = -(n/2) ln(sigma²(lambda)) + (lambda - 1) sum(ln y);
/// exact ties prefer the smaller |lambda|.
#[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail the positivity check
pub fn boxcox_mle<T: Real>(y: &[T]) -> Result<T> {
    if y.len() < 20 {
        return Err(Error::TooShort {
            needed: 20,
            got: y.len(),
        });
    }
    if y.iter().any(|&v| !(v > T::zero())) {
        return Err(Error::NonPositive);
    }
    let n = y.len() as f64;
    let ln_y: Vec<f64> = y.iter().map(|&v| v.to_f64().unwrap().ln()).collect();
    let ln_sum: f64 = ln_y.iter().sum();

    let mut best_lambda = f64::NAN;
    let mut best_ll = f64::NEG_INFINITY;
    for i in 0..=4000u32 {
        let lambda = -2.0 + i as f64 * 0.001;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        if lambda.abs() < 5e-4 {
            for &l in &ln_y {
                sum += l;
                sum_sq += l * l;
            }
        } else {
            for &l in &ln_y {
                let z = ((lambda * l).exp() - 1.0) / lambda;
                sum += z;
                sum_sq += z * z;
            }
        }
        let mean = sum / n;
        let var = (sum_sq / n - mean * mean).max(0.0);
        if var <= 0.0 {
            continue;
        }
        let ll = -0.5 * n * var.ln() + (lambda - 1.0) * ln_sum;
        if !ll.is_finite() {
            continue;
        }
        if ll > best_ll || (ll == best_ll && lambda.abs() < best_lambda.abs()) {
            best_ll = ll;
            best_lambda = lambda;
        }
    }
    if best_lambda.is_nan() {
        return Err(Error::InvalidInput(
            "Box-Cox likelihood undefined everywhere".into(),
        ));
    }
    // snap the grid's zero to exactly zero
    if best_lambda.abs() < 5e-4 {
        best_lambda = 0.0;
    }
    Ok(real(best_lambda))
}

/// How the stationarity verdict is read off the ADF regression.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AdfDecisionRule<T: Real> {
    /// Compare the t statistic of the lagged level against a Dickey-Fuller
    /// critical value (−2.86 is the 5% point for a constant, large n);
    /// stationary when t is below it.
    DickeyFuller { critical: T },
    /// Read the regression's plain two-sided t-test instead: the series
    /// counts as stationary when the lagged-level coefficient is *not*
    /// significant at `alpha`.
    PlainT { alpha: T },
}

impl<T: Real> Default for AdfDecisionRule<T> {
    fn default() -> Self {
        AdfDecisionRule::DickeyFuller {
            critical: real(-2.86),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdfOutcome<T: Real> {
    pub beta_hat: T,
    pub t_stat: T,
    pub stationary: bool,
}

/// Augmented Dickey-Fuller regression dy_t = a + b y_{t-1} + c dy_{t-1},
/// judged by the default Dickey-Fuller 5% critical value.
pub fn adf_test<T: Real>(y: &RegularSeries<T>) -> Result<AdfOutcome<T>> {
    adf_test_with(y, AdfDecisionRule::default())
}

pub fn adf_test_with<T: Real>(
    y: &RegularSeries<T>,
    rule: AdfDecisionRule<T>,
) -> Result<AdfOutcome<T>> {
    let values = y.dense_values()?;
    let n = values.len();
    if n < 20 {
        return Err(Error::TooShort { needed: 20, got: n });
    }
    let dy: Vec<T> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let mut rows = Vec::with_capacity(n - 2);
    let mut target = Vec::with_capacity(n - 2);
    for t in 2..n {
        rows.push(vec![values[t - 1], dy[t - 2]]);
        target.push(dy[t - 1]);
    }
    let fit = fit_linear(&DesignMatrix::new(rows, target, true)?)?;
    let beta_hat = fit.coefficients[1];
    let beta_test = &fit.t_stats[1];
    let stationary = match rule {
        AdfDecisionRule::DickeyFuller { critical } => beta_test.t < critical,
        AdfDecisionRule::PlainT { alpha } => beta_test.p >= alpha,
    };
    Ok(AdfOutcome {
        beta_hat,
        t_stat: beta_test.t,
        stationary,
    })
}

/// Simple exponential smoothing forecast. The recursion runs through the
/// observed data; iterating beyond one step feeds forecasts back in as
/// observations, so all multistep values equal the one-step forecast.
pub fn ses_forecast<T: Real>(y: &[T], alpha: T, horizon: usize) -> Result<Vec<T>> {
    if y.is_empty() {
        return Err(Error::EmptyInput);
    }
    if horizon == 0 {
        return Err(Error::InvalidInput("horizon must be at least 1".into()));
    }
    let level = ses_level(y, alpha)?;
    Ok(vec![level; horizon])
}

/// One-step-ahead SES state after running the recursion over `y`.
fn ses_level<T: Real>(y: &[T], alpha: T) -> Result<T> {
    if !(alpha > T::zero() && alpha <= T::one()) {
        return Err(Error::BadAlpha);
    }
    let mut level = y[0];
    for &obs in y {
        level = alpha * obs + (T::one() - alpha) * level;
    }
    Ok(level)
}

/// In-sample one-step-ahead squared errors of the SES recursion, for AIC.
/// Returns (sse, number of errors).
pub fn ses_in_sample_sse<T: Real>(y: &[T], alpha: T) -> Result<(T, usize)> {
    if !(alpha > T::zero() && alpha <= T::one()) {
        return Err(Error::BadAlpha);
    }
    if y.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: y.len(),
        });
    }
    let mut level = y[0];
    let mut sse = T::zero();
    for t in 1..y.len() {
        level = alpha * y[t - 1] + (T::one() - alpha) * level;
        let e = y[t] - level;
        sse = sse + e * e;
    }
    Ok((sse, y.len() - 1))
}

/// An AR(p) model fitted by least squares on the lag matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ArModel<T: Real> {
    pub c: T,
    pub phi: Vec<T>,
    pub sse: T,
    pub n_obs: usize,
}

impl<T: Real> ArModel<T> {
    pub fn order(&self) -> usize {
        self.phi.len()
    }
}

/// Regress y_t on 1, y_{t-1}, .., y_{t-p} for t = p+1..n.
pub fn ar_fit<T: Real>(y: &[T], p: usize) -> Result<ArModel<T>> {
    if p == 0 {
        return Err(Error::InvalidInput("AR order must be at least 1".into()));
    }
    if y.len() <= 2 * p + 2 {
        return Err(Error::TooShort {
            needed: 2 * p + 3,
            got: y.len(),
        });
    }
    let n = y.len();
    let mut rows = Vec::with_capacity(n - p);
    let mut target = Vec::with_capacity(n - p);
    for t in p..n {
        let mut row = Vec::with_capacity(p + 1);
        row.push(T::one());
        for j in 1..=p {
            row.push(y[t - j]);
        }
        rows.push(row);
        target.push(y[t]);
    }
    let ls = least_squares(&rows, &target)?;
    Ok(ArModel {
        c: ls.coef[0],
        phi: ls.coef[1..].to_vec(),
        sse: ls.sse,
        n_obs: n - p,
    })
}

/// Iterated one-step predictions, feeding forecasts back as observations;
/// the white-noise term enters at its mean of zero.
pub fn ar_forecast<T: Real>(model: &ArModel<T>, history: &[T], horizon: usize) -> Result<Vec<T>> {
    let p = model.order();
    if history.len() < p {
        return Err(Error::TooShort {
            needed: p,
            got: history.len(),
        });
    }
    if horizon == 0 {
        return Err(Error::InvalidInput("horizon must be at least 1".into()));
    }
    let mut buf: Vec<T> = history[history.len() - p..].to_vec();
    let mut out = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let mut next = model.c;
        for j in 1..=p {
            next = next + model.phi[j - 1] * buf[buf.len() - j];
        }
        out.push(next);
        buf.push(next);
    }
    Ok(out)
}

/// Forecasting method with its parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method<T: Real> {
    Ses { alpha: T },
    Ar { order: usize },
}

impl<T: Real> Method<T> {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Ses { .. } => "ses",
            Method::Ar { .. } => "ar",
        }
    }

    pub fn parameter_label(&self) -> String {
        match self {
            Method::Ses { alpha } => format!("{alpha}"),
            Method::Ar { order } => format!("{order}"),
        }
    }

    /// Number of fitted parameters, for AIC.
    pub fn k(&self) -> usize {
        match self {
            Method::Ses { .. } => 1,
            Method::Ar { order } => order + 1,
        }
    }

    /// Shortest window the method can be fitted on after `kind` is applied.
    fn min_window(&self, kind: TransformKind) -> usize {
        let consumed = match kind {
            TransformKind::None => 0,
            TransformKind::Difference | TransformKind::BoxCoxDifference => 1,
        };
        let needed = match self {
            Method::Ses { .. } => 2,
            Method::Ar { order } => 2 * order + 3,
        };
        needed + consumed
    }
}

/// Fit on the transformed series and forecast `horizon` steps on the
/// original scale: transform, fit, iterate, undo differencing from the last
/// transformed observation, then undo Box-Cox.
pub fn fit_and_forecast<T: Real>(
    y: &RegularSeries<T>,
    method: Method<T>,
    kind: TransformKind,
    lambda: Option<T>,
    horizon: usize,
) -> Result<Vec<T>> {
    let dense = y.dense_values()?;
    let (chain, z) = fit_transform(kind, lambda, &dense)?;
    let forecasts = forecast_transformed(&z, method, horizon)?;
    chain.invert_forecast(&forecasts)
}

fn forecast_transformed<T: Real>(z: &[T], method: Method<T>, horizon: usize) -> Result<Vec<T>> {
    match method {
        Method::Ses { alpha } => ses_forecast(z, alpha, horizon),
        Method::Ar { order } => {
            let model = ar_fit(z, order)?;
            ar_forecast(&model, z, horizon)
        }
    }
}

/// How walk-forward errors are scored per origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorScoring {
    /// Error at the horizon endpoint only (one error per origin).
    HorizonEndpoint,
    /// Pool the errors of every step up to the horizon.
    AveragedOverHorizon,
}

impl fmt::Display for ErrorScoring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ErrorScoring::HorizonEndpoint => write!(f, "endpoint"),
            ErrorScoring::AveragedOverHorizon => write!(f, "averaged"),
        }
    }
}

/// Grid over methods, transforms, parameters and horizons.
#[derive(Debug, Clone)]
pub struct EvaluationSpec<T: Real> {
    pub ses_alphas: Vec<T>,
    pub ar_orders: Vec<usize>,
    pub transforms: Vec<TransformKind>,
    /// Horizons in grid steps.
    pub horizons: Vec<usize>,
    /// Warm-up floor: no forecast origin before this index.
    pub p_max: usize,
    pub scoring: ErrorScoring,
    /// Pins the Box-Cox lambda; `None` estimates it once from the full
    /// series before walking forward.
    pub lambda: Option<T>,
}

impl<T: Real> EvaluationSpec<T> {
    /// Paper-style defaults: horizons of 7 and 14 days expressed in grid
    /// steps, alphas 0.1..0.9, AR orders up to 10, all three transforms.
    pub fn default_for_step(step_days: u32) -> Self {
        let horizons = if step_days == 7 {
            vec![1, 2]
        } else {
            vec![7, 14]
        };
        EvaluationSpec {
            ses_alphas: vec![real(0.1), real(0.3), real(0.5), real(0.7), real(0.9)],
            ar_orders: (1..=10).collect(),
            transforms: vec![
                TransformKind::None,
                TransformKind::Difference,
                TransformKind::BoxCoxDifference,
            ],
            horizons,
            p_max: 10,
            scoring: ErrorScoring::HorizonEndpoint,
            lambda: None,
        }
    }

    fn methods(&self) -> Vec<Method<T>> {
        let mut out: Vec<Method<T>> = self
            .ses_alphas
            .iter()
            .map(|&alpha| Method::Ses { alpha })
            .collect();
        out.extend(self.ar_orders.iter().map(|&order| Method::Ar { order }));
        out
    }

    /// First origin at which every grid cell can be fitted. The AR
    /// preconditions push this past `p_max` for larger orders.
    pub fn warmup(&self) -> usize {
        let mut w = self.p_max;
        for method in self.methods() {
            for &kind in &self.transforms {
                w = w.max(method.min_window(kind));
            }
        }
        w
    }
}

/// One grid cell of the post-sample analysis.
#[derive(Debug, Clone)]
pub struct EvaluationCell<T: Real> {
    pub method: Method<T>,
    pub transform: TransformKind,
    pub horizon: usize,
    pub rmse: T,
    pub aic: T,
    pub n_origins: usize,
}

/// Post-sample RMSE/AIC grid over methods, transforms, parameters and
/// horizons.
#[derive(Debug, Clone)]
pub struct EvaluationReport<T: Real> {
    pub cells: Vec<EvaluationCell<T>>,
    /// Box-Cox lambda used by every Box-Cox cell, fitted once on the full
    /// series (not refitted per origin).
    pub lambda: Option<T>,
    pub warmup: usize,
    pub scoring: ErrorScoring,
    pub step_days: u32,
}

impl<T: Real> EvaluationReport<T> {
    /// Cell with the lowest RMSE at a horizon; ties keep grid order.
    pub fn best_at_horizon(&self, horizon: usize) -> Option<&EvaluationCell<T>> {
        self.cells
            .iter()
            .filter(|c| c.horizon == horizon)
            .fold(None, |best, c| match best {
                None => Some(c),
                Some(b) if c.rmse < b.rmse => Some(c),
                b => b,
            })
    }

    /// Best cell at a horizon restricted to one method family.
    pub fn best_for_method(&self, name: &str, horizon: usize) -> Option<&EvaluationCell<T>> {
        self.cells
            .iter()
            .filter(|c| c.method.name() == name && c.horizon == horizon)
            .fold(None, |best, c| match best {
                None => Some(c),
                Some(b) if c.rmse < b.rmse => Some(c),
                b => b,
            })
    }
}

/// One origin's forecasts in a walk-forward pass.
#[derive(Debug, Clone)]
pub struct OriginForecast<T: Real> {
    /// Number of observations the model was fitted on.
    pub origin: usize,
    /// Forecasts for steps 1..=len on the original scale.
    pub forecasts: Vec<T>,
}

/// Walk forward through `y`: at each origin i in [warmup, n - min_horizon]
/// fit on y[..i] only and forecast up to `max_horizon` steps (clipped at the
/// series end). Observations beyond the origin are never read during
/// fitting.
pub fn walk_forward<T: Real>(
    y: &[T],
    method: Method<T>,
    kind: TransformKind,
    lambda: Option<T>,
    min_horizon: usize,
    max_horizon: usize,
    warmup: usize,
) -> Result<Vec<OriginForecast<T>>> {
    let n = y.len();
    if min_horizon == 0 || max_horizon < min_horizon {
        return Err(Error::InvalidInput("bad horizon range".into()));
    }
    if n < warmup + min_horizon {
        return Err(Error::TooShort {
            needed: warmup + min_horizon,
            got: n,
        });
    }
    let mut out = Vec::with_capacity(n - min_horizon - warmup + 1);
    for origin in warmup..=n - min_horizon {
        let window = &y[..origin];
        let (chain, z) = fit_transform(kind, lambda, window)?;
        let steps = max_horizon.min(n - origin);
        let fc_z = forecast_transformed(&z, method, steps)?;
        let forecasts = chain.invert_forecast(&fc_z)?;
        out.push(OriginForecast { origin, forecasts });
    }
    Ok(out)
}

/// Run the full post-sample grid. Fitting at each origin sees only data up
/// to that origin; the Box-Cox lambda is the single full-series estimate
/// reported in the result.
pub fn post_sample_evaluate<T: Real>(
    y: &RegularSeries<T>,
    spec: &EvaluationSpec<T>,
) -> Result<EvaluationReport<T>> {
    let dense = y.dense_values()?;
    let n = dense.len();
    if spec.horizons.is_empty() || spec.transforms.is_empty() {
        return Err(Error::InvalidInput("empty evaluation grid".into()));
    }
    if spec.ses_alphas.is_empty() && spec.ar_orders.is_empty() {
        return Err(Error::InvalidInput("empty evaluation grid".into()));
    }
    let warmup = spec.warmup();
    let f_max = *spec.horizons.iter().max().unwrap();
    let f_min = *spec.horizons.iter().min().unwrap();
    let min_len = (warmup + f_max).max(spec.p_max + f_max + 10);
    if n < min_len {
        return Err(Error::TooShort {
            needed: min_len,
            got: n,
        });
    }

    let needs_boxcox = spec.transforms.contains(&TransformKind::BoxCoxDifference);
    let lambda = match (needs_boxcox, spec.lambda) {
        (false, _) => None,
        (true, Some(l)) => Some(l),
        (true, None) => Some(boxcox_mle(&dense)?),
    };

    let mut cells = Vec::new();
    for &kind in &spec.transforms {
        let cell_lambda = if kind == TransformKind::BoxCoxDifference {
            lambda
        } else {
            None
        };
        for method in spec.methods() {
            let origins = walk_forward(&dense, method, kind, cell_lambda, f_min, f_max, warmup)?;

            // in-sample AIC of the model fitted on the full transformed series
            let (_, z_full) = fit_transform(kind, cell_lambda, &dense)?;
            let (fit_sse, n_eff) = match method {
                Method::Ses { alpha } => ses_in_sample_sse(&z_full, alpha)?,
                Method::Ar { order } => {
                    let m = ar_fit(&z_full, order)?;
                    (m.sse, m.n_obs)
                }
            };
            let aic = aic_ls(n_eff, fit_sse, method.k())?;

            for &h in &spec.horizons {
                let mut sse = T::zero();
                let mut count = 0usize;
                let mut n_origins = 0usize;
                for of in &origins {
                    if of.origin + h > n {
                        continue;
                    }
                    n_origins += 1;
                    match spec.scoring {
                        ErrorScoring::HorizonEndpoint => {
                            let e = of.forecasts[h - 1] - dense[of.origin + h - 1];
                            sse = sse + e * e;
                            count += 1;
                        }
                        ErrorScoring::AveragedOverHorizon => {
                            for step in 1..=h {
                                let e = of.forecasts[step - 1] - dense[of.origin + step - 1];
                                sse = sse + e * e;
                                count += 1;
                            }
                        }
                    }
                }
                if n_origins == 0 {
                    return Err(Error::TooShort {
                        needed: warmup + h,
                        got: n,
                    });
                }
                let rmse = (sse / real_of_usize(count)).sqrt();
                cells.push(EvaluationCell {
                    method,
                    transform: kind,
                    horizon: h,
                    rmse,
                    aic,
                    n_origins,
                });
            }
        }
    }

    Ok(EvaluationReport {
        cells,
        lambda,
        warmup,
        scoring: spec.scoring,
        step_days: y.step_days(),
    })
}
