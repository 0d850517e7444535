//! Per-dimension least-squares autoregression used as the residual generator.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::TimeSeries;
use crate::error::{Error, Result};

/// Ridge added to the lag block of the normal equations.
pub const RIDGE_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArModel {
    order: usize,
    /// `coefficients[j][i]` multiplies `x_{t-1-i}` in dimension `j`.
    coefficients: Vec<Vec<f64>>,
    intercepts: Vec<f64>,
    residual_variance: Vec<f64>,
    fitted: bool,
}

impl ArModel {
    /// An unfitted model of the given order.
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::validation("AR order must be at least 1"));
        }
        Ok(Self {
            order,
            coefficients: Vec::new(),
            intercepts: Vec::new(),
            residual_variance: Vec::new(),
            fitted: false,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn is_fitted(&self) -> bool {
        self.fitted
    }

    pub fn coefficients(&self) -> &[Vec<f64>] {
        &self.coefficients
    }

    pub fn intercepts(&self) -> &[f64] {
        &self.intercepts
    }

    pub fn residual_variance(&self) -> &[f64] {
        &self.residual_variance
    }

    pub fn fit(&mut self, train: &TimeSeries) -> Result<()> {
        let p = self.order;
        if train.len() <= p + 1 {
            return Err(Error::validation(format!(
                "AR({p}) needs more than {} observations, got {}",
                p + 1,
                train.len()
            )));
        }
        let d = train.dims();
        let mut coefficients = Vec::with_capacity(d);
        let mut intercepts = Vec::with_capacity(d);
        let mut variances = Vec::with_capacity(d);
        for j in 0..d {
            let x = train.column(j);
            let (coef, c, var) = fit_column(&x, p).map_err(|e| match e {
                Error::Fit(msg) => Error::Fit(format!("dimension {j}: {msg}")),
                other => other,
            })?;
            coefficients.push(coef);
            intercepts.push(c);
            variances.push(var);
        }
        self.coefficients = coefficients;
        self.intercepts = intercepts;
        self.residual_variance = variances;
        self.fitted = true;
        Ok(())
    }

    fn check_ready(&self, series: &TimeSeries) -> Result<()> {
        if !self.fitted {
            return Err(Error::State("AR model used before fitting".into()));
        }
        if series.dims() != self.intercepts.len() {
            return Err(Error::validation(format!(
                "model fitted on {} dimensions, series has {}",
                self.intercepts.len(),
                series.dims()
            )));
        }
        Ok(())
    }

    /// One-step prediction of `x_t` from the `order` preceding rows.
    fn predict_at(&self, series: &TimeSeries, t: usize) -> Vec<f64> {
        (0..series.dims())
            .map(|j| {
                self.intercepts[j]
                    + self.coefficients[j]
                        .iter()
                        .enumerate()
                        .map(|(i, a)| a * series.row(t - 1 - i)[j])
                        .sum::<f64>()
            })
            .collect()
    }

    /// One-step predictions; the first `order` rows repeat the observations.
    pub fn predict(&self, series: &TimeSeries) -> Result<TimeSeries> {
        self.check_ready(series)?;
        let mut out = Vec::with_capacity(series.len() * series.dims());
        for t in 0..series.len() {
            if t < self.order {
                out.extend_from_slice(series.row(t));
            } else {
                out.extend(self.predict_at(series, t));
            }
        }
        TimeSeries::from_flat(series.len(), series.dims(), out)
    }

    /// `actual - predicted` per instance; the first `order` rows are zero.
    pub fn residuals(&self, series: &TimeSeries) -> Result<TimeSeries> {
        self.check_ready(series)?;
        if series.len() <= self.order {
            return Err(Error::validation(format!(
                "series of length {} is not longer than the AR order {}",
                series.len(),
                self.order
            )));
        }
        let d = series.dims();
        let mut out = vec![0.0; self.order * d];
        for t in self.order..series.len() {
            let pred = self.predict_at(series, t);
            out.extend(series.row(t).iter().zip(pred).map(|(x, p)| x - p));
        }
        TimeSeries::from_flat(series.len(), d, out)
    }
}

/// Least squares with intercept: centre lags and targets, solve the ridge
/// normal equations for the lag block, recover the intercept from the means.
fn fit_column(x: &[f64], p: usize) -> Result<(Vec<f64>, f64, f64)> {
    let n = x.len() - p;
    let design = DMatrix::from_fn(n, p, |r, i| x[p + r - 1 - i]);
    let target = DVector::from_fn(n, |r, _| x[p + r]);
    let col_means: Vec<f64> = (0..p).map(|i| design.column(i).mean()).collect();
    let y_mean = target.mean();
    let centred = DMatrix::from_fn(n, p, |r, i| design[(r, i)] - col_means[i]);
    let yc = target.add_scalar(-y_mean);
    let mut gram = centred.transpose() * &centred;
    for i in 0..p {
        gram[(i, i)] += RIDGE_EPSILON;
    }
    let rhs = centred.transpose() * yc;
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Fit("normal equations are singular".into()))?;
    let coef = chol.solve(&rhs);
    if coef.iter().any(|c| !c.is_finite()) {
        return Err(Error::Fit("non-finite coefficients".into()));
    }
    let intercept = y_mean - coef.iter().zip(&col_means).map(|(a, m)| a * m).sum::<f64>();
    let fitted = &design * &coef;
    let sse: f64 = target
        .iter()
        .zip(fitted.iter())
        .map(|(y, f)| (y - f - intercept).powi(2))
        .sum();
    Ok((coef.iter().copied().collect(), intercept, sse / n as f64))
}

pub fn fit_ar(train: &TimeSeries, order: usize) -> Result<ArModel> {
    let mut model = ArModel::new(order)?;
    model.fit(train)?;
    Ok(model)
}

pub fn residuals(model: &ArModel, series: &TimeSeries) -> Result<TimeSeries> {
    model.residuals(series)
}
