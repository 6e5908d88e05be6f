use crate::error::{Error, Result};

/// Root mean square error.
pub fn rmse(y: &[f64], yhat: &[f64]) -> Result<f64> {
    if y.len() != yhat.len() || y.is_empty() {
        return Err(Error::LengthMismatch(y.len(), yhat.len()));
    }
    let sse: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((sse / y.len() as f64).sqrt())
}

/// Coefficient of determination; negative when worse than predicting the mean.
pub fn r2(y: &[f64], yhat: &[f64]) -> Result<f64> {
    if y.len() != yhat.len() || y.is_empty() {
        return Err(Error::LengthMismatch(y.len(), yhat.len()));
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let sst: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    if !(sst > 0.0) {
        return Err(Error::DegenerateTarget);
    }
    let sse: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(1.0 - sse / sst)
}
