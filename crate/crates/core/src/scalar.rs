//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! All model, metric and aggregation math is written against [`Real`] so the
//! simulator can run in `f64` (the default, see the aliases in the crate root)
//! or in `f32` for memory-bound experiments.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar usable throughout the simulator.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` constant, panicking only for values the type cannot hold.
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("literal representable in scalar type")
    }

    /// Converts a count.
    fn count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    /// Lower probability clamp used by the cross-entropy loss.
    ///
    /// `1e-12` when the type resolves it next to 1.0, machine epsilon otherwise.
    fn prob_floor() -> Self {
        let floor = Self::lit(1e-12);
        if Self::one() - floor < Self::one() {
            floor
        } else {
            Self::epsilon()
        }
    }

    /// Tolerance for checking that a weight vector of `len` entries sums to one.
    fn simplex_tolerance(len: usize) -> Self {
        Self::epsilon() * Self::count(len.max(1)) * Self::lit(16.0)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Numerically stable logistic function.
pub fn sigmoid<T: Real>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}
