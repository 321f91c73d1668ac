use crate::error::{invalid, Result};

pub const HERMITE_MAX_DEGREE: usize = 64;

/// `H_n(x; sigma)` from `sum_n t^n/n! H_n(x; sigma) = exp(t x - t^2 sigma / 2)`,
/// evaluated by `H_{n+1} = x H_n - n sigma H_{n-1}`.
pub fn hermite(n: usize, x: f64, sigma: f64) -> Result<f64> {
    if n > HERMITE_MAX_DEGREE {
        return Err(invalid("n", format!("degree {n} above {HERMITE_MAX_DEGREE}")));
    }
    if !(sigma >= 0.0) {
        return Err(invalid("sigma", format!("{sigma} must be >= 0")));
    }
    let (mut prev, mut cur) = (1.0, x);
    if n == 0 {
        return Ok(prev);
    }
    for k in 1..n {
        let next = x * cur - k as f64 * sigma * prev;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// Truncated generating series `sum_{n <= order} alpha^n / n! H_n(x; sigma)`.
pub fn hermite_series(alpha: f64, x: f64, sigma: f64, order: usize) -> Result<f64> {
    let mut total = 0.0;
    let mut coef = 1.0;
    for n in 0..=order {
        if n > 0 {
            coef *= alpha / n as f64;
        }
        total += coef * hermite(n, x, sigma)?;
    }
    Ok(total)
}
