use crate::error::{Error, Result};

/// Solve `f(x) = target` for nondecreasing `f` on `[lo, hi]` by bisection.
///
/// Stops as soon as `|f(x) - target| <= tol`. If the bracket collapses to
/// adjacent doubles first (a jump in `f` straddles the target), the midpoint
/// of the final bracket is returned.
pub fn invert_monotone<F>(f: F, target: f64, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(lo <= hi) {
        return Err(Error::Precondition(format!("invert_monotone: lo = {lo} > hi = {hi}")));
    }
    let f_lo = f(lo);
    let f_hi = f(hi);
    if !(f_lo <= target && target <= f_hi) {
        return Err(Error::Bracket { target, f_lo, f_hi });
    }
    if (f_lo - target).abs() <= tol {
        return Ok(lo);
    }
    if (f_hi - target).abs() <= tol {
        return Ok(hi);
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..2000 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            return Ok(mid);
        }
        let fm = f(mid);
        if (fm - target).abs() <= tol {
            return Ok(mid);
        }
        if fm < target {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity() {
        let x = invert_monotone(|x| x, 0.3, 0.0, 1.0, 1e-14).unwrap();
        assert!((x - 0.3).abs() <= 1e-14);
    }

    #[test]
    fn cube_root() {
        let x = invert_monotone(|x| x * x * x, 8.0, 0.0, 3.0, 1e-12).unwrap();
        assert!((x - 2.0).abs() < 1e-12);
    }

    #[test]
    fn outside_bracket() {
        let err = invert_monotone(|x| x, 2.0, 0.0, 1.0, 1e-12).unwrap_err();
        assert!(matches!(err, Error::Bracket { .. }));
    }

    #[test]
    fn jump_returns_jump_location() {
        let step = |x: f64| if x < 0.25 { 0.0 } else { 1.0 };
        let x = invert_monotone(step, 0.5, 0.0, 1.0, 1e-12).unwrap();
        assert!((x - 0.25).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn recovers_target(target in -5.0f64..5.0) {
            let f = |x: f64| x.powi(3) + x;
            let x = invert_monotone(f, target, -3.0, 3.0, 1e-11).unwrap();
            prop_assert!((f(x) - target).abs() <= 1e-11);
        }
    }
}
