use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Noise settings for the constant-velocity filter, as diagonals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KalmanConfig {
    pub process_noise: [f64; 4],
    pub measurement_noise: [f64; 4],
    /// Initial position variance for a new track.
    pub init_position_variance: f64,
    /// Initial velocity variance for a new track (velocity starts at zero).
    pub init_velocity_variance: f64,
}

impl Default for KalmanConfig {
    fn default() -> Self {
        Self {
            process_noise: [0.01, 0.01, 0.04, 0.04],
            measurement_noise: [0.04, 0.04, 0.09, 0.09],
            init_position_variance: 0.04,
            init_velocity_variance: 1.0,
        }
    }
}

impl KalmanConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.process_noise.iter().all(|&q| q >= 0.0)
            && self.measurement_noise.iter().all(|&r| r > 0.0)
            && self.init_position_variance >= 0.0
            && self.init_velocity_variance >= 0.0;
        if !ok {
            return Err(Error::config("kalman noise must be non-negative (measurement noise positive)"));
        }
        Ok(())
    }

    pub fn params(&self, dt: f64) -> KalmanParams {
        KalmanParams::new(
            dt,
            Matrix4::from_diagonal(&Vector4::from(self.process_noise)),
            Matrix4::from_diagonal(&Vector4::from(self.measurement_noise)),
        )
    }

    pub fn initial_covariance(&self) -> Matrix4<f64> {
        let (p, v) = (self.init_position_variance, self.init_velocity_variance);
        Matrix4::from_diagonal(&Vector4::new(p, p, v, v))
    }
}

/// State `[x, y, vx, vy]`, measured directly (`H = I`).
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanParams {
    pub a: Matrix4<f64>,
    pub h: Matrix4<f64>,
    pub q: Matrix4<f64>,
    pub r: Matrix4<f64>,
}

impl KalmanParams {
    pub fn new(dt: f64, q: Matrix4<f64>, r: Matrix4<f64>) -> Self {
        let mut a = Matrix4::identity();
        a[(0, 2)] = dt;
        a[(1, 3)] = dt;
        Self { a, h: Matrix4::identity(), q, r }
    }
}

pub fn kalman_predict(x: &Vector4<f64>, p: &Matrix4<f64>, params: &KalmanParams) -> (Vector4<f64>, Matrix4<f64>) {
    let x = params.a * x;
    let p = params.a * p * params.a.transpose() + params.q;
    (x, (p + p.transpose()) * 0.5)
}

/// Predict then update with measurement `z = [ox, oy, vx, vy]`. The
/// covariance update uses the Joseph form and is re-symmetrized.
pub fn kalman_step(
    x: &Vector4<f64>,
    p: &Matrix4<f64>,
    z: &Vector4<f64>,
    params: &KalmanParams,
) -> Result<(Vector4<f64>, Matrix4<f64>)> {
    let (xp, pp) = kalman_predict(x, p, params);
    let h = &params.h;
    let s = h * pp * h.transpose() + params.r;
    let s_inv = s.try_inverse().ok_or(Error::SingularInnovation)?;
    let k = pp * h.transpose() * s_inv;
    let x = xp + k * (z - h * xp);
    let ikh = Matrix4::identity() - k * h;
    let p = ikh * pp * ikh.transpose() + k * params.r * k.transpose();
    Ok((x, (p + p.transpose()) * 0.5))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stationary_measurements_settle_at_zero_velocity() {
        let params = KalmanParams::new(0.1, Matrix4::zeros(), Matrix4::identity() * 0.04);
        let (mut x, mut p) = (Vector4::new(1.0, 2.0, 0.0, 0.0), Matrix4::identity());
        let z = Vector4::new(1.0, 2.0, 0.0, 0.0);
        for _ in 0..50 {
            (x, p) = kalman_step(&x, &p, &z, &params).unwrap();
        }
        assert!(x[2].abs() < 1e-6 && x[3].abs() < 1e-6);
    }

    #[test]
    fn noiseless_constant_velocity_converges() {
        let dt = 1.0 / 30.0;
        let params = KalmanParams::new(dt, Matrix4::identity() * 1e-4, Matrix4::identity() * 1e-12);
        let (mut x, mut p) = (Vector4::zeros(), Matrix4::identity());
        for i in 1..100 {
            let z = Vector4::new(i as f64 * dt, 0.0, 1.0, 0.0);
            (x, p) = kalman_step(&x, &p, &z, &params).unwrap();
        }
        assert!((x[2] - 1.0).abs() < 1e-6, "{}", x[2]);
    }

    #[test]
    fn singular_innovation_is_an_error() {
        let params = KalmanParams::new(0.1, Matrix4::zeros(), Matrix4::zeros());
        let r = kalman_step(&Vector4::zeros(), &Matrix4::zeros(), &Vector4::zeros(), &params);
        assert!(matches!(r, Err(Error::SingularInnovation)));
    }
}
