use crate::error::{Error, Result};
use crate::scalar::Real;

/// Minimum number of positive samples a fit accepts.
pub const MIN_FIT_SAMPLES: usize = 5;

/// Closed time interval `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window<T> {
    pub start: T,
    pub end: T,
}

impl<T: Real> Window<T> {
    pub fn new(start: T, end: T) -> Self {
        Self { start, end }
    }

    #[inline]
    pub fn contains(&self, t: T) -> bool {
        t >= self.start && t <= self.end
    }
}

/// Result of a single-exponential fit `v(t) = amplitude * exp(-t / tau) [+ background]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpFit<T> {
    /// Decay time; `+inf` when the data do not decay.
    pub tau: T,
    /// Value of the exponential term at `t = 0`.
    pub amplitude: T,
    /// Fitted constant offset (zero for the pure model).
    pub background: T,
    /// RMS residual: of `ln v` for the pure model, of `v` with background.
    pub rms_residual: T,
    pub samples_used: usize,
    /// Nonpositive samples dropped from the window.
    pub samples_excluded: usize,
    /// False when the fitted slope is nonnegative.
    pub decaying: bool,
}

/// Which model `fit_exponential` solves.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum FitModel {
    /// Weighted log-linear least squares, no offset.
    #[default]
    Pure,
    /// `A e^{-t/tau} + B`, solved by variable projection over `tau`.
    WithBackground,
}

fn window_samples<T: Real>(times: &[T], values: &[T], window: &Window<T>) -> Result<Vec<(T, T)>> {
    if times.len() != values.len() {
        return Err(Error::Dimension(format!(
            "{} times against {} values",
            times.len(),
            values.len()
        )));
    }
    Ok(times
        .iter()
        .zip(values)
        .filter(|(t, _)| window.contains(**t))
        .map(|(t, v)| (*t, *v))
        .collect())
}

/// Single-exponential fit over `window`.
///
/// The pure model regresses `ln v` on `t` with weights proportional to `v`
/// (the inverse variance of `ln v` for counting noise). Samples `<= 0` are
/// dropped and counted.
pub fn fit_exponential<T: Real>(times: &[T], values: &[T], window: &Window<T>) -> Result<ExpFit<T>> {
    let samples = window_samples(times, values, window)?;
    let total = samples.len();
    let pts: Vec<(T, T)> = samples.into_iter().filter(|(_, v)| *v > T::zero() && v.is_finite()).collect();
    let excluded = total - pts.len();
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientSamples { available: pts.len(), required: MIN_FIT_SAMPLES });
    }

    let vmax = pts.iter().fold(T::zero(), |m, (_, v)| m.max(*v));
    let w: Vec<T> = pts.iter().map(|(_, v)| *v / vmax).collect();
    let y: Vec<T> = pts.iter().map(|(_, v)| v.ln()).collect();
    let sw: T = w.iter().copied().sum();
    let tbar = pts.iter().zip(&w).fold(T::zero(), |a, ((t, _), wi)| a + *wi * *t) / sw;
    let ybar = y.iter().zip(&w).fold(T::zero(), |a, (yi, wi)| a + *wi * *yi) / sw;
    let mut sxx = T::zero();
    let mut sxy = T::zero();
    for (((t, _), yi), wi) in pts.iter().zip(&y).zip(&w) {
        let dx = *t - tbar;
        sxx = sxx + *wi * dx * dx;
        sxy = sxy + *wi * dx * (*yi - ybar);
    }
    if !(sxx > T::zero()) {
        return Err(Error::InsufficientSamples { available: 1, required: MIN_FIT_SAMPLES });
    }
    let slope = sxy / sxx;
    let intercept = ybar - slope * tbar;
    let ssr = pts.iter().zip(&y).fold(T::zero(), |a, ((t, _), yi)| {
        let r = *yi - (intercept + slope * *t);
        a + r * r
    });
    let rms = (ssr / T::of(pts.len() as f64)).sqrt();
    let span = pts[pts.len() - 1].0 - pts[0].0;
    // a drop below round-off over the whole window counts as flat
    let decaying = slope * span < -T::epsilon() * T::of(64.0);
    Ok(ExpFit {
        tau: if decaying { -T::one() / slope } else { T::infinity() },
        amplitude: if decaying { intercept.exp() } else { ybar.exp() },
        background: T::zero(),
        rms_residual: rms,
        samples_used: pts.len(),
        samples_excluded: excluded,
        decaying,
    })
}

/// Weighted linear solve of `v ~ A e^{-(t - t_ref)/tau} + B` at fixed `tau`;
/// returns `(A, B, weighted SSR)`.
fn linear_amplitudes<T: Real>(pts: &[(T, T)], w: &[T], t_ref: T, tau: T) -> (T, T, T) {
    let (mut s_ee, mut s_e, mut s_1, mut s_ev, mut s_v) = (T::zero(), T::zero(), T::zero(), T::zero(), T::zero());
    for ((t, v), wi) in pts.iter().zip(w) {
        let e = (-(*t - t_ref) / tau).exp();
        s_ee = s_ee + *wi * e * e;
        s_e = s_e + *wi * e;
        s_1 = s_1 + *wi;
        s_ev = s_ev + *wi * e * *v;
        s_v = s_v + *wi * *v;
    }
    let det = s_ee * s_1 - s_e * s_e;
    let (a, b) = if det.abs() > T::epsilon() * s_ee * s_1 {
        ((s_ev * s_1 - s_e * s_v) / det, (s_ee * s_v - s_e * s_ev) / det)
    } else {
        (s_ev / s_ee, T::zero())
    };
    let ssr = pts.iter().zip(w).fold(T::zero(), |acc, ((t, v), wi)| {
        let r = *v - a * (-(*t - t_ref) / tau).exp() - b;
        acc + *wi * r * r
    });
    (a, b, ssr)
}

/// Exponential plus constant background, for imported count data with a dark
/// floor. Samples are weighted by `1 / max(v, floor)`; `tau` is found by a
/// golden-section search on `ln tau`.
pub fn fit_exponential_with_background<T: Real>(
    times: &[T],
    values: &[T],
    window: &Window<T>,
) -> Result<ExpFit<T>> {
    let pts: Vec<(T, T)> = window_samples(times, values, window)?
        .into_iter()
        .filter(|(_, v)| v.is_finite())
        .collect();
    if pts.len() < MIN_FIT_SAMPLES + 1 {
        return Err(Error::InsufficientSamples { available: pts.len(), required: MIN_FIT_SAMPLES + 1 });
    }
    let vmax = pts.iter().fold(T::zero(), |m, (_, v)| m.max(v.abs()));
    let floor = vmax * T::of(1e-6) + T::min_positive_value();
    let w: Vec<T> = pts.iter().map(|(_, v)| vmax / v.max(floor)).collect();
    let t_ref = pts[0].0;
    let span = pts[pts.len() - 1].0 - t_ref;
    let dt_min = pts.windows(2).map(|p| p[1].0 - p[0].0).fold(span, |a, b| a.min(b));

    let cost = |ln_tau: T| linear_amplitudes(&pts, &w, t_ref, ln_tau.exp()).2;
    let (mut lo, mut hi) = ((dt_min * T::of(0.1)).ln(), (span * T::of(100.0)).ln());
    let g = T::of(0.618_033_988_749_894_8);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (cost(x1), cost(x2));
    for _ in 0..200 {
        if (hi - lo).abs() < T::of(1e-12) {
            break;
        }
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = cost(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = cost(x2);
        }
    }
    let tau = ((lo + hi) * T::of(0.5)).exp();
    let (a, b, _) = linear_amplitudes(&pts, &w, t_ref, tau);
    let ssr = pts.iter().fold(T::zero(), |acc, (t, v)| {
        let r = *v - a * (-(*t - t_ref) / tau).exp() - b;
        acc + r * r
    });
    let decaying = a > T::zero() && tau < span * T::of(99.0);
    Ok(ExpFit {
        tau: if decaying { tau } else { T::infinity() },
        amplitude: a * (t_ref / tau).exp(),
        background: b,
        rms_residual: (ssr / T::of(pts.len() as f64)).sqrt(),
        samples_used: pts.len(),
        samples_excluded: 0,
        decaying,
    })
}

/// Dispatches on the fit model.
pub fn fit_with_model<T: Real>(model: FitModel, times: &[T], values: &[T], window: &Window<T>) -> Result<ExpFit<T>> {
    match model {
        FitModel::Pure => fit_exponential(times, values, window),
        FitModel::WithBackground => fit_exponential_with_background(times, values, window),
    }
}

/// Trapezoidal integral of the sampled curve over the part of `window`
/// covered by the record, interpolating linearly at the window edges.
pub fn integrate_window<T: Real>(times: &[T], values: &[T], window: &Window<T>) -> Result<T> {
    if times.len() != values.len() {
        return Err(Error::Dimension("times and values differ in length".into()));
    }
    let empty = || Error::EmptyWindow { start: window.start.to_f64_lossless(), end: window.end.to_f64_lossless() };
    let (Some(&first), Some(&last)) = (times.first(), times.last()) else {
        return Err(empty());
    };
    let a = window.start.max(first);
    let b = window.end.min(last);
    if !(b > a) {
        return Err(empty());
    }
    let interp = |t: T| -> T {
        let k = times.partition_point(|&x| x < t);
        if k < times.len() && times[k] == t {
            return values[k];
        }
        let (t0, t1) = (times[k - 1], times[k]);
        let f = (t - t0) / (t1 - t0);
        values[k - 1] + f * (values[k] - values[k - 1])
    };
    let mut pts: Vec<(T, T)> = vec![(a, interp(a))];
    pts.extend(times.iter().zip(values).filter(|(t, _)| **t > a && **t < b).map(|(t, v)| (*t, *v)));
    pts.push((b, interp(b)));
    Ok(pts
        .windows(2)
        .fold(T::zero(), |acc, p| acc + (p[1].0 - p[0].0) * (p[0].1 + p[1].1) * T::of(0.5)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn grid(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn exact_exponential() {
        let t = grid(0.0, 4.0, 81);
        let v: Vec<f64> = t.iter().map(|x| 3.0 * (-x / 2.0).exp()).collect();
        let f = fit_exponential(&t, &v, &Window::new(0.0, 4.0)).unwrap();
        assert!((f.tau - 2.0).abs() < 1e-10);
        assert!((f.amplitude - 3.0).abs() < 1e-10);
        assert!(f.rms_residual < 1e-12);
        assert!(f.decaying);
    }

    #[test]
    fn constant_is_non_decaying() {
        let t = grid(0.0, 1.0, 11);
        let v = vec![2.0; 11];
        let f = fit_exponential(&t, &v, &Window::new(0.0, 1.0)).unwrap();
        assert!(f.tau.is_infinite() && !f.decaying);
    }

    #[test]
    fn nonpositive_samples_excluded() {
        let t = grid(0.0, 1.0, 11);
        let mut v: Vec<f64> = t.iter().map(|x| (-x).exp()).collect();
        v[3] = 0.0;
        v[7] = -1e-3;
        let f = fit_exponential(&t, &v, &Window::new(0.0, 1.0)).unwrap();
        assert_eq!(f.samples_excluded, 2);
        assert_eq!(f.samples_used, 9);
        assert!((f.tau - 1.0).abs() < 1e-10);
        let few = vec![1.0, 0.5, 0.0, -1.0, 0.0, 0.1, 0.0, 0.0, 0.0, 0.0, 0.0];
        assert!(matches!(
            fit_exponential(&t, &few, &Window::new(0.0, 1.0)),
            Err(Error::InsufficientSamples { available: 3, .. })
        ));
    }

    #[test]
    fn noisy_exponential_over_seeds() {
        // synthetic-data Monte Carlo: additive noise sigma = 1e-3
        let t = grid(0.0, 3.0, 301);
        let noise = Normal::new(0.0, 1e-3).unwrap();
        for seed in 0..100 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let v: Vec<f64> = t.iter().map(|x| (-x).exp() + noise.sample(&mut rng)).collect();
            let f = fit_exponential(&t, &v, &Window::new(0.0, 3.0)).unwrap();
            assert!((f.tau - 1.0).abs() < 0.01, "seed {seed}: {}", f.tau);
        }
    }

    #[test]
    fn background_model_recovers_offset() {
        let t = grid(0.0, 8.0, 161);
        let v: Vec<f64> = t.iter().map(|x| 5.0 * (-x / 1.5).exp() + 0.2).collect();
        let f = fit_exponential_with_background(&t, &v, &Window::new(0.0, 8.0)).unwrap();
        assert!((f.tau - 1.5).abs() < 1e-6, "{}", f.tau);
        assert!((f.amplitude - 5.0).abs() < 1e-5);
        assert!((f.background - 0.2).abs() < 1e-6);
        // the pure model is biased by the offset
        let p = fit_exponential(&t, &v, &Window::new(0.0, 8.0)).unwrap();
        assert!(p.tau > 1.6);
    }

    #[test]
    fn trapezoid_integrals() {
        let t = grid(0.0, 5.0, 51);
        let ones = vec![1.0; 51];
        assert!((integrate_window(&t, &ones, &Window::new(1.0, 3.0)).unwrap() - 2.0).abs() < 1e-14);
        // window partially outside the record is clipped
        assert!((integrate_window(&t, &ones, &Window::new(4.0, 9.0)).unwrap() - 1.0).abs() < 1e-14);
        // edges off the grid are interpolated
        let lin: Vec<f64> = t.clone();
        let got = integrate_window(&t, &lin, &Window::new(0.05, 0.95)).unwrap();
        assert!((got - 0.5 * (0.95f64.powi(2) - 0.05f64.powi(2))).abs() < 1e-14);
        assert!(matches!(integrate_window(&t, &ones, &Window::new(6.0, 7.0)), Err(Error::EmptyWindow { .. })));

        let t = grid(0.0, 10.0, 10_001);
        let v: Vec<f64> = t.iter().map(|x| (-x).exp()).collect();
        let got = integrate_window(&t, &v, &Window::new(0.0, 10.0)).unwrap();
        assert!((got - 1.0).abs() < 5e-5, "{got}");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn scale_equivariance(tau in 0.2f64..5.0, amp in 0.1f64..10.0, c in 1e-3f64..1e3,
                                  wiggle in 0.0f64..0.05) {
                let t = grid(0.0, 3.0, 61);
                let v: Vec<f64> = t.iter().enumerate()
                    .map(|(k, x)| amp * (-x / tau).exp() * (1.0 + wiggle * ((k * 7 % 5) as f64 - 2.0)))
                    .collect();
                let scaled: Vec<f64> = v.iter().map(|x| c * x).collect();
                let w = Window::new(0.0, 3.0);
                let a = fit_exponential(&t, &v, &w).unwrap();
                let b = fit_exponential(&t, &scaled, &w).unwrap();
                prop_assert!((a.tau - b.tau).abs() <= 1e-12 * a.tau);
                prop_assert!((b.amplitude / a.amplitude - c).abs() <= 1e-12 * c);
            }

            #[test]
            fn shift_equivariance(tau in 0.2f64..5.0, shift in -10.0f64..10.0, wiggle in 0.0f64..0.05) {
                let t = grid(0.0, 3.0, 61);
                let v: Vec<f64> = t.iter().enumerate()
                    .map(|(k, x)| (-x / tau).exp() * (1.0 + wiggle * ((k * 3 % 7) as f64 - 3.0)))
                    .collect();
                let shifted: Vec<f64> = t.iter().map(|x| x + shift).collect();
                let a = fit_exponential(&t, &v, &Window::new(0.0, 3.0)).unwrap();
                let b = fit_exponential(&shifted, &v, &Window::new(shift, shift + 3.0)).unwrap();
                prop_assert!((a.tau - b.tau).abs() <= 1e-12 * a.tau, "{} {}", a.tau, b.tau);
            }
        }
    }
}
