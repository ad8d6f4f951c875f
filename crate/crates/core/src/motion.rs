//! Constant-velocity Kalman filter over `(cx, cy, w, h)` and their rates.
//!
//! The time step is one frame. Width and height are clamped to at least one
//! pixel after each prediction so the affinity terms stay defined.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::affinity::TrackletSnapshot;
use crate::error::{Error, Result};
use crate::mot_data::{AppearanceFeature, BoundingBox, Detection};

type State = SVector<f64, 8>;
type Cov = SMatrix<f64, 8, 8>;
type Obs = SVector<f64, 4>;
type ObsModel = SMatrix<f64, 4, 8>;

const MIN_EXTENT: f64 = 1.0;

/// Noise variances of the filter. Initial position variance equals the
/// measurement variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionNoiseConfig {
    /// Process noise on `cx, cy, w, h` (px^2 per frame).
    pub process_position_var: f64,
    /// Process noise on the rates ((px/frame)^2 per frame).
    pub process_velocity_var: f64,
    /// Measurement noise on each observed component (px^2).
    pub measurement_var: f64,
    /// Variance of the rates at initialization ((px/frame)^2).
    pub initial_velocity_var: f64,
}

impl Default for MotionNoiseConfig {
    fn default() -> Self {
        MotionNoiseConfig {
            process_position_var: 1.0,
            process_velocity_var: 0.25,
            measurement_var: 1.0,
            initial_velocity_var: 100.0,
        }
    }
}

impl MotionNoiseConfig {
    /// All-zero noise: exact propagation and exact measurements.
    pub fn noiseless() -> Self {
        MotionNoiseConfig {
            process_position_var: 0.0,
            process_velocity_var: 0.0,
            measurement_var: 0.0,
            initial_velocity_var: 100.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("process_position_var", self.process_position_var),
            ("process_velocity_var", self.process_velocity_var),
            ("measurement_var", self.measurement_var),
            ("initial_velocity_var", self.initial_velocity_var),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }

    fn process(&self) -> Cov {
        let mut q = Cov::zeros();
        for i in 0..4 {
            q[(i, i)] = self.process_position_var;
            q[(i + 4, i + 4)] = self.process_velocity_var;
        }
        q
    }

    fn measurement(&self) -> SMatrix<f64, 4, 4> {
        SMatrix::<f64, 4, 4>::identity() * self.measurement_var
    }
}

/// Filter mean and covariance, plus the noise model it was created with.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionState {
    mean: State,
    covariance: Cov,
    noise: MotionNoiseConfig,
}

fn transition() -> Cov {
    let mut f = Cov::identity();
    for i in 0..4 {
        f[(i, i + 4)] = 1.0;
    }
    f
}

fn observation() -> ObsModel {
    let mut h = ObsModel::zeros();
    for i in 0..4 {
        h[(i, i)] = 1.0;
    }
    h
}

fn measure(b: &BoundingBox) -> Obs {
    let (cx, cy) = b.center();
    Obs::new(cx, cy, b.w, b.h)
}

fn symmetrize(p: &Cov) -> Cov {
    (p + p.transpose()) * 0.5
}

impl MotionState {
    pub fn init(d: &Detection, cfg: &MotionNoiseConfig) -> Self {
        let z = measure(&d.bbox);
        let mut mean = State::zeros();
        mean.fixed_rows_mut::<4>(0).copy_from(&z);
        let mut covariance = Cov::zeros();
        for i in 0..4 {
            covariance[(i, i)] = cfg.measurement_var;
            covariance[(i + 4, i + 4)] = cfg.initial_velocity_var;
        }
        MotionState {
            mean,
            covariance,
            noise: *cfg,
        }
    }

    /// One-frame constant-velocity prediction.
    pub fn predict(&self) -> MotionState {
        let f = transition();
        let mut mean = f * self.mean;
        mean[2] = mean[2].max(MIN_EXTENT);
        mean[3] = mean[3].max(MIN_EXTENT);
        let covariance = symmetrize(&(f * self.covariance * f.transpose() + self.noise.process()));
        MotionState {
            mean,
            covariance,
            noise: self.noise,
        }
    }

    /// Kalman correction against the detection's `(cx, cy, w, h)`.
    pub fn update(&self, d: &Detection) -> MotionState {
        let h = observation();
        let r = self.noise.measurement();
        let z = measure(&d.bbox);
        let innovation = z - h * self.mean;
        let s = h * self.covariance * h.transpose() + r;
        let s_inv = s
            .try_inverse()
            .or_else(|| s.pseudo_inverse(1e-12).ok())
            .unwrap_or_else(SMatrix::zeros);
        let gain = self.covariance * h.transpose() * s_inv;
        let mut mean = self.mean + gain * innovation;
        let ikh = Cov::identity() - gain * h;
        // Joseph form keeps the posterior PSD.
        let covariance =
            symmetrize(&(ikh * self.covariance * ikh.transpose() + gain * r * gain.transpose()));
        mean[2] = mean[2].max(MIN_EXTENT);
        mean[3] = mean[3].max(MIN_EXTENT);
        MotionState {
            mean,
            covariance,
            noise: self.noise,
        }
    }

    pub fn mean(&self) -> [f64; 8] {
        self.mean.into()
    }

    pub fn covariance(&self) -> &SMatrix<f64, 8, 8> {
        &self.covariance
    }

    pub fn center(&self) -> (f64, f64) {
        (self.mean[0], self.mean[1])
    }

    pub fn size(&self) -> (f64, f64) {
        (self.mean[2], self.mean[3])
    }

    pub fn velocity(&self) -> (f64, f64) {
        (self.mean[4], self.mean[5])
    }

    pub fn bbox(&self) -> BoundingBox {
        BoundingBox::from_center(self.mean[0], self.mean[1], self.mean[2], self.mean[3])
    }

    pub fn snapshot(&self, feature: &AppearanceFeature) -> TrackletSnapshot {
        TrackletSnapshot {
            cx: self.mean[0],
            cy: self.mean[1],
            w: self.mean[2],
            h: self.mean[3],
            feature: feature.clone(),
        }
    }
}

pub fn init_motion(d: &Detection, cfg: &MotionNoiseConfig) -> MotionState {
    MotionState::init(d, cfg)
}

pub fn predict(s: &MotionState) -> MotionState {
    s.predict()
}

pub fn update(s: &MotionState, d: &Detection) -> MotionState {
    s.update(d)
}

pub fn snapshot(s: &MotionState, f: &AppearanceFeature) -> TrackletSnapshot {
    s.snapshot(f)
}
