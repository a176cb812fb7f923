//! Floating-point scalar abstraction for the math kernels.

use std::fmt::{Debug, Display};
use std::ops::AddAssign;

use num_traits::{Float, FromPrimitive};

/// Scalar the metric, juice, utility, and workload kernels are generic over.
///
/// `f32` keeps memory down for very large sweeps; `f64` is the default and is
/// what the simulator and all file formats use.
pub trait Scalar:
    Float + FromPrimitive + AddAssign + Default + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from `f64`, for constants like thresholds.
    fn from_config(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 constant")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
