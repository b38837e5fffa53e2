//! Bracket expansion and bisection for nonincreasing scalar functions.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct RootOptions {
    /// Initial guess.
    pub start: f64,
    /// Initial bracket radius, doubled on each failed expansion.
    pub radius: f64,
    pub max_doublings: u32,
    /// Final bracket width.
    pub width_tol: f64,
    /// Accepted `|f(g)|` at the returned point.
    pub value_tol: f64,
}

impl Default for RootOptions {
    fn default() -> Self {
        RootOptions {
            start: 0.0,
            radius: 1.0,
            max_doublings: 60,
            width_tol: 1e-11,
            value_tol: 1e-9,
        }
    }
}

impl RootOptions {
    pub fn starting_at(start: f64) -> Self {
        RootOptions {
            start,
            ..RootOptions::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct Root<T> {
    pub g: f64,
    /// `f(g)`.
    pub value: f64,
    /// Whatever the function produced alongside `f(g)` at the returned point.
    pub payload: T,
    pub bracket: (f64, f64),
    /// Every evaluation as `(g, f(g))`, in order.
    pub trace: Vec<(f64, f64)>,
}

/// Finds `g` with `f(g) = 0` for a nonincreasing `f`.
///
/// The bracket grows geometrically around `opts.start` until the sign
/// changes, then bisection shrinks it to `opts.width_tol`. An exact zero
/// ends the search early.
pub fn find_root<T, F>(opts: &RootOptions, mut f: F) -> Result<Root<T>>
where
    F: FnMut(f64) -> Result<(f64, T)>,
{
    let mut trace = Vec::new();
    let mut eval = |g: f64, trace: &mut Vec<(f64, f64)>| -> Result<(f64, T)> {
        let (v, p) = f(g)?;
        if !v.is_finite() {
            return Err(Error::solver(
                format!("root function is not finite at g = {g}"),
                v,
                trace.iter().map(|t: &(f64, f64)| t.1).collect(),
            ));
        }
        trace.push((g, v));
        log::debug!("root search: f({g:.12}) = {v:.3e}");
        Ok((v, p))
    };

    let g0 = opts.start;
    let (v0, p0) = eval(g0, &mut trace)?;
    if v0 == 0.0 {
        return Ok(Root {
            g: g0,
            value: v0,
            payload: p0,
            bracket: (g0, g0),
            trace,
        });
    }
    // f nonincreasing: f > 0 means the root lies to the right
    let dir = if v0 > 0.0 { 1.0 } else { -1.0 };
    let mut near = g0;
    let mut radius = opts.radius;
    let mut far_hit = None;
    for _ in 0..=opts.max_doublings {
        let g = g0 + dir * radius;
        let (v, p) = eval(g, &mut trace)?;
        if v == 0.0 {
            let (lo, hi) = if dir > 0.0 { (near, g) } else { (g, near) };
            return Ok(Root {
                g,
                value: v,
                payload: p,
                bracket: (lo, hi),
                trace,
            });
        }
        if v.signum() != v0.signum() {
            far_hit = Some(g);
            break;
        }
        near = g;
        radius *= 2.0;
    }
    let Some(far) = far_hit else {
        return Err(Error::BracketExhausted { trace });
    };
    let (mut lo, mut hi) = if dir > 0.0 { (near, far) } else { (far, near) };

    loop {
        let mid = 0.5 * (lo + hi);
        let collapsed = mid == lo || mid == hi;
        let (v, p) = eval(mid, &mut trace)?;
        if v == 0.0 {
            return Ok(Root {
                g: mid,
                value: v,
                payload: p,
                bracket: (lo, hi),
                trace,
            });
        }
        if v > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        let narrow = hi - lo <= opts.width_tol || collapsed;
        if narrow && v.abs() <= opts.value_tol {
            return Ok(Root {
                g: mid,
                value: v,
                payload: p,
                bracket: (lo, hi),
                trace,
            });
        }
        if collapsed || hi - lo <= f64::EPSILON * lo.abs().max(hi.abs()).max(1.0) {
            // bracket collapsed but the function still jumps across zero
            return Err(Error::solver(
                format!("no root within tolerance: f({mid}) = {v:e} at bracket width {:e}", hi - lo),
                v,
                trace.iter().map(|t| t.1).collect(),
            ));
        }
    }
}
