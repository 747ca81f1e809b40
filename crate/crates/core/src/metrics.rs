/// RMSE and maximum absolute residual, both in volts.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorMetrics {
    pub rmse: f64,
    pub max_abs: f64,
}

impl ErrorMetrics {
    pub fn from_residuals(residuals: &[f64]) -> Self {
        if residuals.is_empty() {
            return Self::default();
        }
        let mut sum_sq = 0.0;
        let mut max_abs = 0.0f64;
        for r in residuals {
            sum_sq += r * r;
            max_abs = max_abs.max(libm::fabs(*r));
        }
        ErrorMetrics {
            rmse: libm::sqrt(sum_sq / residuals.len() as f64),
            max_abs,
        }
    }

    /// Residuals `model - measured`.
    pub fn between(model: &[f64], measured: &[f64]) -> Self {
        debug_assert_eq!(model.len(), measured.len());
        let residuals: alloc::vec::Vec<f64> =
            model.iter().zip(measured).map(|(m, y)| m - y).collect();
        Self::from_residuals(&residuals)
    }
}
