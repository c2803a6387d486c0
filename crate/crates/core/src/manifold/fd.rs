use super::{NttPoint, Tangent};
use crate::error::{Error, Result};
use crate::exec::Exec;

/// `1e-5 * max(1, |f(X)|)`.
pub fn default_fd_step(fx: f64) -> f64 {
    1e-5 * fx.abs().max(1.0)
}

/// Forward-difference Riemannian gradient over the orthonormal tangent basis:
/// `sum_j (f(R_X(t V_j)) - f(X)) / t * V_j`. Basis directions are evaluated
/// through `exec`; the result does not depend on the mode.
pub fn fd_gradient<F>(x: &NttPoint, f: &F, t: f64, exec: Exec) -> Result<Tangent>
where
    F: Fn(&NttPoint) -> Result<f64> + Sync + ?Sized,
{
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "finite-difference step must be positive, got {t}"
        )));
    }
    let f0 = f(x)?;
    if !f0.is_finite() {
        return Err(Error::NonFinite);
    }
    let basis = x.tangent_basis();
    let coeffs = exec.map(&basis, |v| -> Result<f64> {
        let ft = f(&x.retract(v, t)?)?;
        if !ft.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok((ft - f0) / t)
    });
    let coeffs = coeffs.into_iter().collect::<Result<Vec<_>>>()?;
    Tangent::combine(&coeffs, &basis)
}
