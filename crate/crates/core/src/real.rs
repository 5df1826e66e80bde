use ndarray::NdFloat;
use num_traits::FromPrimitive;

/// Floating-point element type for dense model tensors. Training runs in
/// `f32`; gradient checks instantiate the same code with `f64`.
pub trait Real: NdFloat + FromPrimitive + Default {
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite conversion")
    }
}

impl Real for f32 {}
impl Real for f64 {}
