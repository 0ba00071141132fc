/// Source of elapsed wall-clock time, in seconds, since the start of a solve.
///
/// The core crate has no access to an OS clock; callers with `std` pass an
/// `Instant`-backed implementation.
pub trait Clock {
    fn elapsed(&self) -> f64;
}

/// A clock that never advances. Time limits are never hit.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn elapsed(&self) -> f64 {
        0.0
    }
}

impl<C: Clock + ?Sized> Clock for &C {
    fn elapsed(&self) -> f64 {
        (**self).elapsed()
    }
}
