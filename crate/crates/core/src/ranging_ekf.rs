//! Cooperative ranging localization.
//!
//! One extended Kalman filter over the stacked poses `[x, y, theta]` of the
//! whole group. Prediction is dead reckoning from each UAV's measured
//! velocity and yaw rate; the update fuses the pairwise ranges of the
//! current matching. Ranges only constrain distances, so the estimate keeps
//! the group's shape while its absolute position and orientation drift.

use log::warn;
use nalgebra::{DMatrix, DVector, Matrix3};

use crate::angle::wrap;
use crate::comm::{Step, UavId};
use crate::world::{advance, ControlMeasurement, NoiseConfig, Pose2D};

/// Estimated pair distances below this make the range Jacobian undefined.
pub const DEGENERATE_DISTANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct EkfConfig {
    /// Per-UAV block of the process noise covariance for one step.
    pub process_noise: Matrix3<f64>,
    /// m^2
    pub ranging_variance: f64,
    /// s
    pub ts: f64,
}

impl EkfConfig {
    /// `diag(sv^2 ts^2, sv^2 ts^2, (sg ts)^2) * inflation` and `R = sr^2`.
    pub fn from_noise(noise: &NoiseConfig, ts: f64, inflation: f64, min_ranging_sigma: f64) -> Self {
        let pos = (noise.sigma_v * ts).powi(2) * inflation;
        let head = (noise.sigma_g * ts).powi(2) * inflation;
        let sr = noise.sigma_r.max(min_ranging_sigma);
        Self {
            process_noise: Matrix3::from_diagonal(&nalgebra::Vector3::new(pos, pos, head)),
            ranging_variance: sr * sr,
            ts,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EkfEstimate {
    /// `[x0, y0, theta0, x1, y1, theta1, ...]`
    pub state: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub time_index: Step,
}

/// Pairs skipped by an update.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UpdateReport {
    pub used: usize,
    pub degenerate: Vec<(UavId, UavId)>,
}

/// d(pose_k)/d(pose_{k-1}) of the kinematic step.
pub fn motion_jacobian(pose: &Pose2D, control: &ControlMeasurement, ts: f64) -> Matrix3<f64> {
    let heading = pose.theta + ts * control.omega;
    let (s, c) = heading.sin_cos();
    Matrix3::new(
        1.0, 0.0, -ts * control.v * s, //
        0.0, 1.0, ts * control.v * c, //
        0.0, 0.0, 1.0,
    )
}

impl EkfEstimate {
    /// Known initial poses with independent per-UAV uncertainty.
    pub fn new(poses: &[Pose2D], position_variance: f64, heading_variance: f64) -> Self {
        let n = poses.len();
        let mut state = DVector::zeros(3 * n);
        let mut diag = DVector::zeros(3 * n);
        for (i, p) in poses.iter().enumerate() {
            state[3 * i] = p.x;
            state[3 * i + 1] = p.y;
            state[3 * i + 2] = p.theta;
            diag[3 * i] = position_variance;
            diag[3 * i + 1] = position_variance;
            diag[3 * i + 2] = heading_variance;
        }
        Self {
            state,
            covariance: DMatrix::from_diagonal(&diag),
            time_index: 0,
        }
    }

    pub fn n_uavs(&self) -> usize {
        self.state.len() / 3
    }

    pub fn pose(&self, uav: UavId) -> Pose2D {
        Pose2D {
            x: self.state[3 * uav],
            y: self.state[3 * uav + 1],
            theta: self.state[3 * uav + 2],
        }
    }

    pub fn poses(&self) -> Vec<Pose2D> {
        (0..self.n_uavs()).map(|i| self.pose(i)).collect()
    }

    fn set_pose(&mut self, uav: UavId, p: Pose2D) {
        self.state[3 * uav] = p.x;
        self.state[3 * uav + 1] = p.y;
        self.state[3 * uav + 2] = p.theta;
    }

    pub fn covariance_trace(&self) -> f64 {
        self.covariance.trace()
    }

    /// Trace of one UAV's 3x3 block.
    pub fn block_trace(&self, uav: UavId) -> f64 {
        (0..3).map(|d| self.covariance[(3 * uav + d, 3 * uav + d)]).sum()
    }

    /// Advances every pose by one step and propagates `F P F^T + Q`.
    pub fn predict(&mut self, controls: &[ControlMeasurement], cfg: &EkfConfig) {
        let n = self.n_uavs();
        assert_eq!(controls.len(), n, "one control per uav");
        let dim = 3 * n;
        // F is identity except for the heading column of each block, so
        // F P F^T reduces to row and column updates.
        let mut coeffs = Vec::with_capacity(n);
        for (i, u) in controls.iter().enumerate() {
            let pose = self.pose(i);
            let j = motion_jacobian(&pose, u, cfg.ts);
            coeffs.push((j[(0, 2)], j[(1, 2)]));
            self.set_pose(i, advance(pose, *u, cfg.ts));
        }
        let p = &mut self.covariance;
        for (i, &(a, b)) in coeffs.iter().enumerate() {
            let h = 3 * i + 2;
            for c in 0..dim {
                let ph = p[(h, c)];
                p[(3 * i, c)] += a * ph;
                p[(3 * i + 1, c)] += b * ph;
            }
        }
        for (j, &(a, b)) in coeffs.iter().enumerate() {
            let h = 3 * j + 2;
            for r in 0..dim {
                let ph = p[(r, h)];
                p[(r, 3 * j)] += a * ph;
                p[(r, 3 * j + 1)] += b * ph;
            }
        }
        for i in 0..n {
            for r in 0..3 {
                for c in 0..3 {
                    p[(3 * i + r, 3 * i + c)] += cfg.process_noise[(r, c)];
                }
            }
        }
        symmetrize(p);
        self.time_index += 1;
    }

    /// Predicted range between `i` and `j` and its gradient with respect to
    /// `(x_i, y_i, x_j, y_j)`; `None` when the pair nearly coincides.
    pub fn range_and_jacobian(&self, i: UavId, j: UavId) -> Option<(f64, [f64; 4])> {
        let dx = self.state[3 * i] - self.state[3 * j];
        let dy = self.state[3 * i + 1] - self.state[3 * j + 1];
        let d = dx.hypot(dy);
        if d < DEGENERATE_DISTANCE {
            return None;
        }
        Some((d, [dx / d, dy / d, -dx / d, -dy / d]))
    }

    /// Batched update with simultaneous ranges `(i, j, d_ij)`.
    pub fn update(&mut self, ranges: &[(UavId, UavId, f64)], cfg: &EkfConfig) -> UpdateReport {
        let dim = self.state.len();
        let mut report = UpdateReport::default();
        let mut rows: Vec<(UavId, UavId, f64, [f64; 4])> = Vec::with_capacity(ranges.len());
        for &(i, j, measured) in ranges {
            match self.range_and_jacobian(i, j) {
                Some((predicted, grad)) => rows.push((i, j, measured - predicted, grad)),
                None => {
                    warn!("skipping range {i}-{j}: estimated positions coincide");
                    report.degenerate.push((i, j));
                }
            }
        }
        report.used = rows.len();
        if rows.is_empty() {
            return report;
        }
        let m = rows.len();
        let mut h = DMatrix::zeros(m, dim);
        let mut innovation = DVector::zeros(m);
        for (r, (i, j, innov, g)) in rows.iter().enumerate() {
            h[(r, 3 * i)] = g[0];
            h[(r, 3 * i + 1)] = g[1];
            h[(r, 3 * j)] = g[2];
            h[(r, 3 * j + 1)] = g[3];
            innovation[r] = *innov;
        }
        let ph_t = &self.covariance * h.transpose();
        let mut s = &h * &ph_t;
        for r in 0..m {
            s[(r, r)] += cfg.ranging_variance;
        }
        let Some(chol) = s.clone().cholesky() else {
            warn!("innovation covariance not positive definite; update skipped");
            report.used = 0;
            return report;
        };
        // K = P H^T S^-1, via S K^T = H P
        let gain = chol.solve(&ph_t.transpose()).transpose();
        self.state += &gain * innovation;
        for i in 0..self.n_uavs() {
            self.state[3 * i + 2] = wrap(self.state[3 * i + 2]);
        }
        // Joseph form: (I - KH) P (I - KH)^T + K R K^T
        let mut i_kh = -&gain * &h;
        for d in 0..dim {
            i_kh[(d, d)] += 1.0;
        }
        let mut p = &i_kh * &self.covariance * i_kh.transpose();
        p += (&gain * gain.transpose()) * cfg.ranging_variance;
        symmetrize(&mut p);
        self.covariance = p;
        report
    }

    /// `(max |P - P^T|, min eigenvalue)`.
    pub fn covariance_health(&self) -> (f64, f64) {
        let p = &self.covariance;
        let asym = (p - p.transpose()).amax();
        let min_eig = p
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        (asym, min_eig)
    }
}

fn symmetrize(p: &mut DMatrix<f64>) {
    let n = p.nrows();
    for r in 0..n {
        for c in (r + 1)..n {
            let v = 0.5 * (p[(r, c)] + p[(c, r)]);
            p[(r, c)] = v;
            p[(c, r)] = v;
        }
    }
}

/// Pose at `k` from the pose at `k - s` and the `s` controls in `(k - s, k]`.
pub fn dead_reckon(start: Pose2D, controls: &[ControlMeasurement], ts: f64) -> Pose2D {
    controls.iter().fold(start, |p, u| advance(p, *u, ts))
}

/// Catches every pose up from `k - s` to `k`; `controls[i]` holds UAV `i`'s
/// own controls for the `s` steps.
pub fn estimate_with_deadreckoning(
    poses: &[Pose2D],
    controls: &[Vec<ControlMeasurement>],
    ts: f64,
) -> Vec<Pose2D> {
    poses
        .iter()
        .zip(controls)
        .map(|(p, c)| dead_reckon(*p, c, ts))
        .collect()
}

/// Position of every UAV relative to `self_id`.
pub fn relative_positions(poses: &[Pose2D], self_id: UavId) -> Vec<(f64, f64)> {
    let me = poses[self_id];
    poses.iter().map(|p| (p.x - me.x, p.y - me.y)).collect()
}
