//! Explicit Runge-Kutta integration of autonomous complex linear systems.
//!
//! The production path is the Dormand-Prince 5(4) pair with its 4th-order
//! continuous extension for output between steps; a classical fixed-step RK4
//! is kept as a cross-check.

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::scalar::{Cplx, Real};

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 5.0;

/// Integration scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    /// Adaptive Dormand-Prince 5(4) with dense output.
    DormandPrince,
    /// Classical RK4 with steps no longer than the schedule's max step.
    FixedRk4,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl<T> {
    pub rtol: T,
    pub atol: T,
    pub max_step: T,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

impl IntegrationStats {
    pub fn merge(&mut self, other: IntegrationStats) {
        self.accepted += other.accepted;
        self.rejected += other.rejected;
        self.rhs_evals += other.rhs_evals;
    }
}

/// `out = y + h * sum_s coef_s * k_s`
#[inline]
fn combine<T: Real>(out: &mut [Cplx<T>], y: &[Cplx<T>], h: T, terms: &[(f64, &[Cplx<T>])]) {
    let coefs: Vec<T> = terms.iter().map(|&(c, _)| T::of(c) * h).collect();
    for (idx, o) in out.iter_mut().enumerate() {
        let mut acc = y[idx];
        for (c, (_, k)) in coefs.iter().zip(terms) {
            acc = acc + k[idx].scale(*c);
        }
        *o = acc;
    }
}

/// Integrates `dy/dt = f(y)` from `t0` to `t1`, reporting the state at each
/// time in `outputs` (which must lie in `(t0, t1]`, ascending). On return `y`
/// holds the state at `t1` and `h` the suggested next step.
#[allow(clippy::too_many_arguments)]
pub fn integrate<T, F, O>(
    method: Method,
    rhs: F,
    t0: T,
    t1: T,
    y: &mut Vec<Cplx<T>>,
    outputs: &[T],
    control: &StepControl<T>,
    h: &mut T,
    mut on_output: O,
) -> Result<IntegrationStats>
where
    T: Real,
    F: Fn(&[Cplx<T>], &mut [Cplx<T>]),
    O: FnMut(T, &[Cplx<T>]) -> Result<()>,
{
    debug_assert!(outputs.windows(2).all(|w| w[0] < w[1]));
    debug_assert!(outputs.iter().all(|&t| t > t0 && t <= t1));
    match method {
        Method::DormandPrince => dopri5(rhs, t0, t1, y, outputs, control, h, &mut on_output),
        Method::FixedRk4 => rk4(rhs, t0, t1, y, outputs, control.max_step, &mut on_output),
    }
}

fn error_norm<T: Real>(err: &[Cplx<T>], y: &[Cplx<T>], y_new: &[Cplx<T>], c: &StepControl<T>) -> T {
    let mut acc = T::zero();
    for i in 0..err.len() {
        let sc = c.atol + c.rtol * y[i].norm().max(y_new[i].norm());
        let e = err[i];
        acc = acc + (e.re / sc).powi(2) + (e.im / sc).powi(2);
    }
    (acc / T::of(2.0 * err.len() as f64)).sqrt()
}

fn initial_step<T: Real>(y: &[Cplx<T>], f: &[Cplx<T>], c: &StepControl<T>) -> T {
    let mut d0 = T::zero();
    let mut d1 = T::zero();
    for (yi, fi) in y.iter().zip(f) {
        let sc = c.atol + c.rtol * yi.norm();
        d0 = d0 + (yi.norm() / sc).powi(2);
        d1 = d1 + (fi.norm() / sc).powi(2);
    }
    let h = if d0 > T::of(1e-10) && d1 > T::of(1e-10) {
        T::of(0.01) * (d0 / d1).sqrt()
    } else {
        T::of(1e-6)
    };
    h.min(c.max_step)
}

#[allow(clippy::too_many_arguments)]
fn dopri5<T, F, O>(
    rhs: F,
    t0: T,
    t1: T,
    y: &mut Vec<Cplx<T>>,
    outputs: &[T],
    control: &StepControl<T>,
    h_io: &mut T,
    on_output: &mut O,
) -> Result<IntegrationStats>
where
    T: Real,
    F: Fn(&[Cplx<T>], &mut [Cplx<T>]),
    O: FnMut(T, &[Cplx<T>]) -> Result<()>,
{
    let n = y.len();
    let mut stats = IntegrationStats::default();
    if !(t1 > t0) {
        return Ok(stats);
    }
    let zero = || vec![Cplx::<T>::zero(); n];
    let (mut k1, mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) =
        (zero(), zero(), zero(), zero(), zero(), zero(), zero());
    let mut stage = zero();
    let mut y_new = zero();
    let mut err = zero();
    let mut dense = zero();

    rhs(y, &mut k1);
    stats.rhs_evals += 1;

    let mut h_prop = if *h_io > T::zero() { (*h_io).min(control.max_step) } else { initial_step(y, &k1, control) };
    let mut t = t0;
    let mut next_out = 0usize;
    let mut last_rejected = false;
    let tiny = T::of(1e-13);

    while t < t1 {
        let remaining = t1 - t;
        let mut h = h_prop;
        let mut last = false;
        if h * T::of(1.0001) >= remaining {
            h = remaining;
            last = true;
        }
        if h <= tiny * t.abs().max(T::one()) {
            return Err(Error::StepUnderflow { t: t.to_f64_lossless(), h: h.to_f64_lossless() });
        }

        combine(&mut stage, y, h, &[(A21, &k1)]);
        rhs(&stage, &mut k2);
        combine(&mut stage, y, h, &[(A31, &k1), (A32, &k2)]);
        rhs(&stage, &mut k3);
        combine(&mut stage, y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
        rhs(&stage, &mut k4);
        combine(&mut stage, y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
        rhs(&stage, &mut k5);
        combine(&mut stage, y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]);
        rhs(&stage, &mut k6);
        combine(&mut y_new, y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        rhs(&y_new, &mut k7);
        stats.rhs_evals += 6;

        for i in 0..n {
            err[i] = (k1[i].scale(T::of(E1))
                + k3[i].scale(T::of(E3))
                + k4[i].scale(T::of(E4))
                + k5[i].scale(T::of(E5))
                + k6[i].scale(T::of(E6))
                + k7[i].scale(T::of(E7)))
            .scale(h);
        }
        let e = error_norm(&err, y, &y_new, control);

        if e <= T::one() && e.is_finite() {
            let t_new = if last { t1 } else { t + h };
            // dense output on (t, t_new]
            if next_out < outputs.len() && outputs[next_out] <= t_new {
                for i in 0..n {
                    dense[i] = (k1[i].scale(T::of(D1))
                        + k3[i].scale(T::of(D3))
                        + k4[i].scale(T::of(D4))
                        + k5[i].scale(T::of(D5))
                        + k6[i].scale(T::of(D6))
                        + k7[i].scale(T::of(D7)))
                    .scale(h);
                }
                while next_out < outputs.len() && outputs[next_out] <= t_new {
                    let to = outputs[next_out];
                    if to == t_new {
                        on_output(to, &y_new)?;
                    } else {
                        let theta = (to - t) / h;
                        let theta1 = T::one() - theta;
                        for i in 0..n {
                            let ydiff = y_new[i] - y[i];
                            let bspl = k1[i].scale(h) - ydiff;
                            let c3 = ydiff - k7[i].scale(h) - bspl;
                            stage[i] = y[i]
                                + (ydiff
                                    + (bspl + (c3 + dense[i].scale(theta1)).scale(theta)).scale(theta1))
                                .scale(theta);
                        }
                        on_output(to, &stage)?;
                    }
                    next_out += 1;
                }
            }
            std::mem::swap(y, &mut y_new);
            std::mem::swap(&mut k1, &mut k7);
            t = t_new;
            stats.accepted += 1;
            let mut fac = T::of(SAFETY) * e.max(T::of(1e-10)).powf(T::of(-0.2));
            fac = fac.max(T::of(FAC_MIN)).min(T::of(FAC_MAX));
            if last_rejected {
                fac = fac.min(T::one());
            }
            // a step clipped to land on t1 says little about the natural step size
            if !last {
                h_prop = (h * fac).min(control.max_step);
            }
            last_rejected = false;
        } else {
            stats.rejected += 1;
            let fac = if e.is_finite() {
                (T::of(SAFETY) * e.powf(T::of(-0.2))).max(T::of(FAC_MIN))
            } else {
                T::of(FAC_MIN)
            };
            h_prop = h * fac.min(T::one());
            last_rejected = true;
        }
    }
    *h_io = h_prop;
    Ok(stats)
}

fn rk4<T, F, O>(
    rhs: F,
    t0: T,
    t1: T,
    y: &mut [Cplx<T>],
    outputs: &[T],
    max_step: T,
    on_output: &mut O,
) -> Result<IntegrationStats>
where
    T: Real,
    F: Fn(&[Cplx<T>], &mut [Cplx<T>]),
    O: FnMut(T, &[Cplx<T>]) -> Result<()>,
{
    let n = y.len();
    let mut stats = IntegrationStats::default();
    let zero = || vec![Cplx::<T>::zero(); n];
    let (mut k1, mut k2, mut k3, mut k4, mut stage) = (zero(), zero(), zero(), zero(), zero());
    let mut t = t0;
    let targets = outputs.iter().copied().chain((outputs.last() != Some(&t1)).then_some(t1));
    for target in targets {
        if !(target > t) {
            continue;
        }
        let steps = ((target - t) / max_step).ceil().to_usize().unwrap_or(1).max(1);
        let h = (target - t) / T::of(steps as f64);
        for _ in 0..steps {
            rhs(y, &mut k1);
            combine(&mut stage, y, h, &[(0.5, &k1)]);
            rhs(&stage, &mut k2);
            combine(&mut stage, y, h, &[(0.5, &k2)]);
            rhs(&stage, &mut k3);
            combine(&mut stage, y, h, &[(1.0, &k3)]);
            rhs(&stage, &mut k4);
            let y_old = y.to_vec();
            combine(y, &y_old, h, &[(1.0 / 6.0, &k1), (1.0 / 3.0, &k2), (1.0 / 3.0, &k3), (1.0 / 6.0, &k4)]);
            stats.rhs_evals += 4;
            stats.accepted += 1;
        }
        t = target;
        if outputs.binary_search_by(|o| o.partial_cmp(&target).unwrap()).is_ok() {
            on_output(target, y)?;
        }
    }
    Ok(stats)
}
