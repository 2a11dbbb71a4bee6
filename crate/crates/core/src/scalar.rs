use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Floating-point scalar the estimators are generic over (`f32` or `f64`).
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + Send + Sync + 'static {
    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn finite(self) -> bool {
        self.to_f64().is_some_and(f64::is_finite)
    }

    /// Rank threshold: 1e-12 in double precision, widened to the type's epsilon otherwise.
    fn rank_tolerance() -> Self {
        let eps = Self::default_epsilon() * Self::lit(10.0);
        let floor = Self::lit(1e-12);
        if eps > floor {
            eps
        } else {
            floor
        }
    }
}

impl<T> Real for T where T: RealField + Copy + FromPrimitive + ToPrimitive + Send + Sync + 'static {}
