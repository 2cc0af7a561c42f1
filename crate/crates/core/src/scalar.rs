use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rustfft::FftNum;

/// Floating point scalar the numerical core is written against.
///
/// Implemented for `f32` and `f64`. Random draws and categorical sampling
/// always happen in `f64` and are converted afterwards, so a given seed
/// selects the same rows and latent codes regardless of the scalar type.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + FftNum
    + Sum
    + Default
    + Display
    + LowerExp
    + Debug
    + Send
    + Sync
    + 'static
{
    /// Significant decimal digits needed to round-trip a value through text.
    const DIGITS: usize;

    /// Converts an `f64` constant.
    #[inline]
    fn c(v: f64) -> Self {
        Self::from_f64(v).expect("f64 constant representable")
    }

    /// Converts a count or index.
    #[inline]
    fn from_usize_lossy(v: usize) -> Self {
        Self::from_usize(v).expect("usize representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite conversion to f64")
    }

    /// Fixed-width scientific representation with [`Real::DIGITS`] digits.
    fn to_text(self) -> String {
        format!("{:.*e}", Self::DIGITS - 1, self)
    }
}

impl Real for f32 {
    const DIGITS: usize = 9;
}

impl Real for f64 {
    const DIGITS: usize = 17;
}
