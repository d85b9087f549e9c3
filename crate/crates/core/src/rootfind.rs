//! Bracketed scalar root finding and a damped 2D Newton iteration.

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RootError {
    #[error("no sign change on [{lo}, {hi}]: f(lo) = {flo}, f(hi) = {fhi}")]
    NoSignChange {
        lo: f64,
        hi: f64,
        flo: f64,
        fhi: f64,
    },
    #[error("function is not finite at x = {x}")]
    NotFinite { x: f64 },
    #[error("no convergence after {iterations} iterations")]
    MaxIter { iterations: usize },
}

/// Converged bracket together with the residual at the returned point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root<T> {
    pub x: T,
    pub fx: T,
    /// Width of the final bracket.
    pub width: T,
    pub iterations: usize,
}

/// Brent's method: inverse quadratic interpolation and secant steps,
/// safeguarded by bisection so the bracket always shrinks.
///
/// Stops when the bracket is narrower than `xtol * |x|` (plus a few ulps),
/// or on an exact zero.
pub fn brent<T, F>(mut f: F, lo: T, hi: T, xtol: T, max_iter: usize) -> Result<Root<T>, RootError>
where
    T: Scalar,
    F: FnMut(T) -> T,
{
    let two = T::lit(2.0);
    let half = T::lit(0.5);
    let three = T::lit(3.0);

    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    for (x, fx) in [(a, fa), (b, fb)] {
        if !fx.is_finite() {
            return Err(RootError::NotFinite { x: x.as_f64() });
        }
    }
    if fa == T::zero() {
        return Ok(Root {
            x: a,
            fx: fa,
            width: T::zero(),
            iterations: 0,
        });
    }
    if fb == T::zero() {
        return Ok(Root {
            x: b,
            fx: fb,
            width: T::zero(),
            iterations: 0,
        });
    }
    if fa.signum() == fb.signum() {
        return Err(RootError::NoSignChange {
            lo: lo.as_f64(),
            hi: hi.as_f64(),
            flo: fa.as_f64(),
            fhi: fb.as_f64(),
        });
    }

    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for iter in 1..=max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = two * T::epsilon() * b.abs() + half * xtol * b.abs();
        let m = half * (c - b);
        if m.abs() <= tol || fb == T::zero() {
            return Ok(Root {
                x: b,
                fx: fb,
                width: (c - b).abs(),
                iterations: iter,
            });
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = two * m * s;
                q = T::one() - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (two * m * qa * (qa - r) - (b - a) * (r - T::one()));
                q = (qa - T::one()) * (r - T::one()) * (s - T::one());
            }
            if p > T::zero() {
                q = -q;
            } else {
                p = -p;
            }
            if two * p < (three * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b = if d.abs() > tol {
            b + d
        } else {
            b + tol * m.signum()
        };
        fb = f(b);
        if !fb.is_finite() {
            return Err(RootError::NotFinite { x: b.as_f64() });
        }
    }
    Err(RootError::MaxIter {
        iterations: max_iter,
    })
}

/// Result of [`damped_newton_2d`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Newton2d<T> {
    pub z: [T; 2],
    pub residual: [T; 2],
    pub iterations: usize,
}

/// Damped Newton on `F: R^2 -> R^2` with a forward-difference Jacobian.
///
/// Each full step is halved until the residual norm decreases and `feasible`
/// accepts the trial point. Converged when the step is below `step_tol`
/// relative to `|z|` componentwise. Returns `None` if the iteration stalls,
/// leaves the feasible set for good, or runs out of iterations.
pub fn damped_newton_2d<T, F, P>(
    mut f: F,
    z0: [T; 2],
    feasible: P,
    step_tol: T,
    max_iter: usize,
) -> Option<Newton2d<T>>
where
    T: Scalar,
    F: FnMut([T; 2]) -> Option<[T; 2]>,
    P: Fn([T; 2]) -> bool,
{
    let norm = |r: [T; 2]| (r[0] * r[0] + r[1] * r[1]).sqrt();
    let fd_step = T::epsilon().sqrt();
    let mut z = z0;
    if !feasible(z) {
        return None;
    }
    let mut r = f(z)?;
    let mut rn = norm(r);
    for iter in 1..=max_iter {
        let mut jac = [[T::zero(); 2]; 2];
        for j in 0..2 {
            let h = fd_step * z[j].abs().max(T::one());
            let mut zp = z;
            zp[j] = z[j] + h;
            let rp = f(zp)?;
            jac[0][j] = (rp[0] - r[0]) / h;
            jac[1][j] = (rp[1] - r[1]) / h;
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if det == T::zero() || !det.is_finite() {
            return None;
        }
        let step = [
            -(jac[1][1] * r[0] - jac[0][1] * r[1]) / det,
            -(-jac[1][0] * r[0] + jac[0][0] * r[1]) / det,
        ];

        let mut damping = T::one();
        let mut accepted = None;
        for _ in 0..40 {
            let trial = [z[0] + damping * step[0], z[1] + damping * step[1]];
            if feasible(trial) {
                if let Some(rt) = f(trial) {
                    let rtn = norm(rt);
                    if rtn.is_finite() && (rtn < rn || rtn == T::zero()) {
                        accepted = Some((trial, rt, rtn));
                        break;
                    }
                }
            }
            damping = damping * T::lit(0.5);
        }
        let small_step = |s: [T; 2], at: [T; 2]| {
            (0..2).all(|i| s[i].abs() <= step_tol * at[i].abs().max(T::one()))
        };
        match accepted {
            Some((trial, rt, rtn)) => {
                let taken = [trial[0] - z[0], trial[1] - z[1]];
                let converged = small_step(taken, z);
                z = trial;
                r = rt;
                rn = rtn;
                if converged || rn == T::zero() {
                    return Some(Newton2d {
                        z,
                        residual: r,
                        iterations: iter,
                    });
                }
            }
            None => {
                // No decrease possible: either converged to rounding level or stuck.
                if small_step(step, z) {
                    return Some(Newton2d {
                        z,
                        residual: r,
                        iterations: iter,
                    });
                }
                return None;
            }
        }
    }
    None
}
