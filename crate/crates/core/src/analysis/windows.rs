use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::units::TransitionSpec;

use super::fit::Window;

/// Gap between switch-off and the start of the superradiant fit, in ns.
pub const SUPER_FIT_DELAY_NS: f64 = 5.0;

/// Analysis windows, as offsets from the switch-off time `t0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayWindows<T> {
    pub super_fit_start: T,
    pub super_fit_end: T,
    /// Upper edge of the early-emission integral, which always starts at `t0`.
    pub super_count_end: T,
    pub sub_start: T,
    /// `None` runs the late window to the end of the record.
    pub sub_end: Option<T>,
}

impl<T: Real> DecayWindows<T> {
    /// Early fit from 5 ns to `1/Gamma0`, early count over `[0, 1/Gamma0]`,
    /// late window from `4/Gamma0` onward.
    pub fn from_transition(spec: &TransitionSpec) -> Self {
        Self {
            super_fit_start: T::of(spec.ns_to_gamma_units(SUPER_FIT_DELAY_NS)),
            super_fit_end: T::one(),
            super_count_end: T::one(),
            sub_start: T::of(4.0),
            sub_end: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.super_fit_start >= T::zero()
            && self.super_fit_end > self.super_fit_start
            && self.super_count_end > T::zero()
            && self.sub_start >= self.super_fit_end
            && self.sub_start >= self.super_count_end
            && self.sub_end.is_none_or(|e| e > self.sub_start);
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "analysis windows out of order: fit [{}, {}], count [0, {}], late [{}, {:?}]",
                self.super_fit_start, self.super_fit_end, self.super_count_end, self.sub_start, self.sub_end
            )))
        }
    }

    /// Record length past `t0` the analysis needs.
    pub fn required_record(&self) -> T {
        self.sub_end.unwrap_or(self.sub_start + T::of(2.0))
    }

    pub fn super_fit(&self, t0: T) -> Window<T> {
        Window::new(t0 + self.super_fit_start, t0 + self.super_fit_end)
    }

    pub fn super_count(&self, t0: T) -> Window<T> {
        Window::new(t0, t0 + self.super_count_end)
    }

    pub fn sub(&self, t0: T, t_last: T) -> Window<T> {
        Window::new(t0 + self.sub_start, self.sub_end.map_or(t_last, |e| t0 + e))
    }
}

impl<T: Real> Default for DecayWindows<T> {
    fn default() -> Self {
        Self::from_transition(&TransitionSpec::default())
    }
}
