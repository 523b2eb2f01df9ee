use crate::error::{MarketError, Result};
use crate::market::AllocationMatrix;

/// `V(x) = sum_nk x*_nk ln(x*_nk / x_nk)`, the relative entropy of `x*` with
/// respect to `x`. Entries with `x*_nk = 0` contribute nothing.
pub fn lyapunov_kl(x: &AllocationMatrix, x_star: &AllocationMatrix) -> Result<f64> {
    if x.shape() != x_star.shape() {
        return Err(MarketError::Domain("allocation shapes differ".into()));
    }
    let mut v = 0.0;
    for (i, (&xi, &si)) in x.as_slice().iter().zip(x_star.as_slice()).enumerate() {
        if si <= 0.0 {
            continue;
        }
        if xi <= 0.0 {
            let (n, k) = (i / x.n_goods(), i % x.n_goods());
            return Err(MarketError::Domain(format!(
                "x[{n}][{k}] = 0 while the reference holds {si:e}"
            )));
        }
        v += si * (si / xi).ln();
    }
    Ok(v)
}
