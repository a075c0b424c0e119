//! Scalar abstraction for the real-valued parts of the model (dB values,
//! detector statistics, traffic fractions).

use std::fmt::Debug;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point scalar usable for RSSI, thresholds and statistics.
pub trait Real: Float + FromPrimitive + ToPrimitive + Debug + Default + Send + Sync + 'static {
    /// Lossy conversion from `f64`; literals and config values go through here.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 is representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Arithmetic mean and population standard deviation.
pub fn mean_std<T: Real>(samples: &[T]) -> Option<(T, T)> {
    if samples.is_empty() {
        return None;
    }
    let n = T::from_usize(samples.len())?;
    let mean = samples.iter().fold(T::zero(), |acc, &x| acc + x) / n;
    let var = samples
        .iter()
        .fold(T::zero(), |acc, &x| acc + (x - mean) * (x - mean))
        / n;
    Some((mean, var.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_std_of_constant_is_zero_spread() {
        let (m, s) = mean_std(&[3.0f32; 10]).unwrap();
        assert_eq!(m, 3.0);
        assert_eq!(s, 0.0);
    }

    #[test]
    fn mean_std_known_values() {
        let (m, s) = mean_std(&[2.0f64, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]).unwrap();
        assert_eq!(m, 5.0);
        assert_eq!(s, 2.0);
        assert!(mean_std::<f64>(&[]).is_none());
    }
}
