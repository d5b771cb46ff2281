use crate::error::{Error, Result};

/// Denominator floor of the relative error. Central differences of an O(1)
/// function carry about 1e-11 of roundoff, so components far below this are
/// compared in absolute terms.
pub const REL_FLOOR: f64 = 1e-6;

/// Outcome of a finite-difference comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_err: f64,
    /// Coordinate with the largest error.
    pub worst: usize,
    pub analytic: f64,
    pub numeric: f64,
}

/// Compares `analytic` with central differences of `f` at `point`:
/// `max_k |a_k - c_k| / max(REL_FLOOR, |a_k| + |c_k|)`.
pub fn fd_gradcheck<Fn>(mut f: Fn, analytic: &[f64], point: &[f64], eps: f64) -> Result<GradCheck>
where
    Fn: FnMut(&[f64]) -> f64,
{
    if analytic.len() != point.len() {
        return Err(Error::LengthMismatch {
            what: "analytic gradient",
            expected: point.len(),
            found: analytic.len(),
        });
    }
    let mut x = point.to_vec();
    let mut out = GradCheck {
        max_rel_err: 0.0,
        worst: 0,
        analytic: 0.0,
        numeric: 0.0,
    };
    for k in 0..x.len() {
        let orig = x[k];
        x[k] = orig + eps;
        let up = f(&x);
        x[k] = orig - eps;
        let down = f(&x);
        x[k] = orig;
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFinite {
                what: "function value in gradient check",
                index: k,
            });
        }
        let c = (up - down) / (2.0 * eps);
        let a = analytic[k];
        let err = (a - c).abs() / (a.abs() + c.abs()).max(REL_FLOOR);
        if err > out.max_rel_err || k == 0 {
            out = GradCheck {
                max_rel_err: err,
                worst: k,
                analytic: a,
                numeric: c,
            };
        }
    }
    Ok(out)
}
