use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{EvalGrid, OracleError};
use crate::bvp::rd_initial;

/// Default splitting step for reaction-diffusion references.
pub const RD_DEFAULT_DT: f64 = 1e-3;

/// Tolerance on `u` leaving `[0, 1]` before the solver reports instability.
const RANGE_TOL: f64 = 1e-6;

/// Strang-splitting reference for `u_t = nu u_xx + rho u (1 - u)` with the
/// Gaussian initial bump and periodic `x`.
///
/// Each step of size `h` applies the exact logistic flow for `h/2`, exact
/// spectral diffusion for `h`, then the logistic flow for `h/2`. Between
/// requested times the step is shrunk so every output time is hit exactly.
///
/// `grid` must have two axes: a half-open `x` axis with a power-of-two node
/// count, then a `t` axis with nonnegative nodes. The result is row-major
/// over `(x, t)`.
pub fn rd_reference(grid: &EvalGrid, nu: f64, rho: f64, dt: f64) -> Result<Vec<f64>, OracleError> {
    grid.validate()?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(OracleError::InvalidStep(dt));
    }
    if grid.dim() != 2 {
        return Err(OracleError::InvalidGrid("reaction-diffusion reference needs an (x, t) grid".into()));
    }
    let (xa, ta) = (&grid.axes[0], &grid.axes[1]);
    if xa.closed || !xa.n.is_power_of_two() {
        return Err(OracleError::InvalidGrid(
            "x axis must be half-open (periodic) with a power-of-two node count".into(),
        ));
    }
    if ta.lo < 0.0 {
        return Err(OracleError::InvalidGrid("t axis must start at t >= 0".into()));
    }
    if !(nu.is_finite() && rho.is_finite() && nu >= 0.0) {
        return Err(OracleError::InvalidGrid(format!("need finite nu >= 0 and rho, got ({nu}, {rho})")));
    }

    let n = xa.n;
    let length = xa.hi - xa.lo;
    let times = ta.nodes();
    let nt = times.len();
    let mut u: Vec<f64> = xa.nodes().into_iter().map(rd_initial).collect();

    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    let wavenumbers: Vec<f64> = (0..n)
        .map(|m| {
            let m = if m <= n / 2 { m as f64 } else { m as f64 - n as f64 };
            2.0 * std::f64::consts::PI * m / length
        })
        .collect();

    let react = |u: &mut [f64], h: f64| {
        let e = (rho * h).exp();
        for v in u.iter_mut() {
            *v = *v * e / (*v * e + 1.0 - *v);
        }
    };
    let mut diffuse = |u: &mut [f64], h: f64| {
        for (b, v) in buf.iter_mut().zip(u.iter()) {
            *b = Complex::new(*v, 0.0);
        }
        fwd.process(&mut buf);
        let norm = 1.0 / n as f64;
        for (b, k) in buf.iter_mut().zip(&wavenumbers) {
            *b *= (-nu * k * k * h).exp() * norm;
        }
        inv.process(&mut buf);
        for (v, b) in u.iter_mut().zip(&buf) {
            *v = b.re;
        }
    };

    let mut out = vec![0.0; n * nt];
    let mut t = 0.0;
    for (j, &target) in times.iter().enumerate() {
        let span = target - t;
        if span > 0.0 {
            let steps = (span / dt - 1e-9).ceil().max(1.0) as usize;
            let h = span / steps as f64;
            for s in 0..steps {
                react(&mut u, 0.5 * h);
                diffuse(&mut u, h);
                react(&mut u, 0.5 * h);
                let now = t + h * (s + 1) as f64;
                if let Some(&bad) = u.iter().find(|v| !(**v >= -RANGE_TOL && **v <= 1.0 + RANGE_TOL)) {
                    return Err(OracleError::Unstable { t: now, value: bad });
                }
            }
            t = target;
        }
        for (i, v) in u.iter().enumerate() {
            out[i * nt + j] = *v;
        }
    }
    Ok(out)
}
