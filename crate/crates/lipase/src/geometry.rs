//! Scene geometry: exact forward and inverse maps between Cartesian target
//! states and bistatic observables.
//!
//! Every module downstream agrees on one picture. A transmitter sits at
//! `l_t`, the receiver at `l_r`, both in a common 2-D frame with angles
//! measured counterclockwise from the +x axis. A target at position `l`
//! with velocity `v` produces the observable triple
//!
//! * bistatic range `R = |l - l_r| + |l - l_t|`, the two-leg path length,
//!   so constant-R contours are ellipses with foci at the stations;
//! * bistatic range rate `Rdot = dR/dt = (u_r + u_t) . v`, with `u_r`,
//!   `u_t` the unit vectors from each station toward the target;
//! * angle of arrival `theta = atan2(y - y_r, x - x_r)` at the receiver.
//!
//! [`measure`] evaluates this map, [`invert`] solves it back to a position
//! on the range ellipse along the AoA ray plus a velocity consistent with
//! the range rate, [`jacobian`] provides the closed-form partials used by
//! the extended Kalman filter, and [`resolutions`] gives the classic
//! bistatic resolution limits of a configuration.
//!
//! # Example
//!
//! ```
//! use lipase::geometry::{invert, measure, CartesianState, Geometry};
//! use nalgebra::Vector2;
//!
//! let g = Geometry::new(
//!     Vector2::new(255.0, 0.0),
//!     Vector2::new(0.0, 0.0),
//!     1.2,
//!     0.0,
//! );
//! let truth = CartesianState {
//!     pos: Vector2::new(-60.0, 180.0),
//!     vel: Vector2::new(4.0, -7.0),
//! };
//! let z = measure(&truth, &g).unwrap();
//! let back = invert(&z, &g).unwrap();
//! // Position comes back exactly; velocity keeps the observable component.
//! assert!((back.pos - truth.pos).norm() < 1e-9);
//! assert!((measure(&back, &g).unwrap().range_rate - z.range_rate).abs() < 1e-9);
//! ```

use nalgebra::{Matrix2, SMatrix, Vector2};

use crate::simulate::RadioConfig;
use crate::{Error, Result, SPEED_OF_LIGHT};

/// Positions and orientations of the two stations and their arrays.
///
/// `baseline_angle` is the direction of the transmitter as seen from the
/// receiver. `sur_broadside` and `ref_broadside` orient the surveillance
/// and reference arrays; array-relative angles are global angles minus the
/// broadside. `ref_aoa` is the known arrival direction of the line-of-sight
/// path at the reference array, which for a direct illuminator equals the
/// baseline angle.
#[derive(Clone, Debug, PartialEq)]
pub struct Geometry {
    /// Transmitter position `l_t`, meters.
    pub tx_pos: Vector2<f64>,
    /// Receiver position `l_r`, meters.
    pub rx_pos: Vector2<f64>,
    /// Station separation `L = |l_t - l_r|`, meters.
    pub baseline_len: f64,
    /// `atan2(y_t - y_r, x_t - x_r)`, radians.
    pub baseline_angle: f64,
    /// Surveillance-array broadside direction, radians from +x.
    pub sur_broadside: f64,
    /// Reference-array broadside direction, radians from +x.
    pub ref_broadside: f64,
    /// Global AoA of the reference line-of-sight path, radians.
    pub ref_aoa: f64,
}

impl Geometry {
    /// Builds a geometry from station positions and array broadsides,
    /// deriving the baseline and pointing the reference LoS at the
    /// transmitter.
    pub fn new(
        tx_pos: Vector2<f64>,
        rx_pos: Vector2<f64>,
        sur_broadside: f64,
        ref_broadside: f64,
    ) -> Self {
        let d = tx_pos - rx_pos;
        let baseline_angle = d.y.atan2(d.x);
        Geometry {
            tx_pos,
            rx_pos,
            baseline_len: d.norm(),
            baseline_angle,
            sur_broadside,
            ref_broadside,
            ref_aoa: baseline_angle,
        }
    }

    /// Checks the stored redundant fields against the station positions.
    pub fn validate(&self) -> Result<()> {
        let d = self.tx_pos - self.rx_pos;
        let len = d.norm();
        if len == 0.0 {
            return Err(Error::validation(
                "geometry.tx_pos",
                "transmitter and receiver coincide",
            ));
        }
        if (self.baseline_len - len).abs() > 1e-9 * len.max(1.0) {
            return Err(Error::validation(
                "geometry.baseline_len",
                format!(
                    "stored {} differs from |tx - rx| = {}",
                    self.baseline_len, len
                ),
            ));
        }
        let ang = d.y.atan2(d.x);
        if wrap_angle(self.baseline_angle - ang).abs() > 1e-9 {
            return Err(Error::validation(
                "geometry.baseline_angle",
                format!("stored {} differs from atan2 = {}", self.baseline_angle, ang),
            ));
        }
        Ok(())
    }
}

/// Target position and velocity in the common 2-D frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CartesianState {
    /// Position (x, y), meters.
    pub pos: Vector2<f64>,
    /// Velocity (vx, vy), m/s.
    pub vel: Vector2<f64>,
}

/// One measured candidate: the (R, Rdot, theta) triple.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    /// Bistatic range R, meters.
    pub bistatic_range: f64,
    /// Bistatic range rate Rdot, m/s.
    pub range_rate: f64,
    /// Angle of arrival theta at the receiver, radians in (-pi, pi].
    pub aoa: f64,
}

/// How [`invert`] turns a range rate into a velocity vector.
///
/// With `u = u_r + u_t` the bisector direction, `Exact` uses
/// `v = Rdot u / |u|^2`, so that measuring the inverted state returns the
/// original range rate. `Literal` uses `v = Rdot u / |u|`, a unit-vector
/// scaling under which the re-measured range rate comes back multiplied by
/// `|u|`. Both are exposed because the two conventions appear in practice;
/// `Exact` is the default everywhere in this crate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RangeRateInversion {
    #[default]
    Exact,
    Literal,
}

/// Resolution limits of a radio configuration, per quantity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Resolutions {
    /// Bistatic range resolution, meters.
    pub range_res: f64,
    /// Doppler resolution, Hz.
    pub doppler_res: f64,
    /// Bistatic velocity resolution, m/s.
    pub velocity_res: f64,
    /// Angular resolution of the surveillance array, radians.
    pub angular_res: f64,
}

/// Wraps an angle to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(std::f64::consts::TAU);
    if w > std::f64::consts::PI {
        w - std::f64::consts::TAU
    } else {
        w
    }
}

const STATION_EPS: f64 = 1e-9;

fn station_offsets(s: &CartesianState, g: &Geometry) -> Result<(Vector2<f64>, Vector2<f64>)> {
    let dr = s.pos - g.rx_pos;
    let dt = s.pos - g.tx_pos;
    if dr.norm() < STATION_EPS {
        return Err(Error::DegeneratePosition {
            station: "receiver",
            dist: dr.norm(),
        });
    }
    if dt.norm() < STATION_EPS {
        return Err(Error::DegeneratePosition {
            station: "transmitter",
            dist: dt.norm(),
        });
    }
    Ok((dr, dt))
}

/// Forward measurement map: Cartesian state to (R, Rdot, theta).
pub fn measure(s: &CartesianState, g: &Geometry) -> Result<Observation> {
    let (dr, dt) = station_offsets(s, g)?;
    let u = dr.normalize() + dt.normalize();
    Ok(Observation {
        bistatic_range: dr.norm() + dt.norm(),
        range_rate: u.dot(&s.vel),
        aoa: wrap_angle(dr.y.atan2(dr.x)),
    })
}

/// Inverse measurement map with the default exact range-rate convention.
pub fn invert(z: &Observation, g: &Geometry) -> Result<CartesianState> {
    invert_with(z, g, RangeRateInversion::Exact)
}

/// Inverse measurement map: intersects the AoA ray from the receiver with
/// the bistatic range ellipse and reconstructs the velocity component
/// observable from the range rate.
///
/// The receiver-to-target distance along the ray at angle `theta` is
///
/// ```text
/// r = (R^2 - L^2) / (2 (R - L cos(theta - baseline_angle)))
/// ```
///
/// and the velocity is `Rdot` spread along the bisector `u = u_r + u_t`
/// according to the chosen [`RangeRateInversion`].
pub fn invert_with(
    z: &Observation,
    g: &Geometry,
    mode: RangeRateInversion,
) -> Result<CartesianState> {
    let r_total = z.bistatic_range;
    let l = g.baseline_len;
    if r_total <= l {
        return Err(Error::DegenerateGeometry(format!(
            "bistatic range {r_total} does not exceed the baseline {l}"
        )));
    }
    let den = 2.0 * (r_total - l * (z.aoa - g.baseline_angle).cos());
    if den.abs() < 1e-12 {
        return Err(Error::DegenerateGeometry(
            "ellipse/ray intersection denominator vanishes".to_string(),
        ));
    }
    let range_from_rx = (r_total * r_total - l * l) / den;
    let pos = g.rx_pos + range_from_rx * Vector2::new(z.aoa.cos(), z.aoa.sin());

    let dr = pos - g.rx_pos;
    let dt = pos - g.tx_pos;
    if dt.norm() < STATION_EPS {
        return Err(Error::DegenerateGeometry(
            "inverted position coincides with the transmitter".to_string(),
        ));
    }
    let u = dr.normalize() + dt.normalize();
    let vel = match mode {
        RangeRateInversion::Exact => u * (z.range_rate / u.norm_squared()),
        RangeRateInversion::Literal => u * (z.range_rate / u.norm()),
    };
    Ok(CartesianState { pos, vel })
}

/// Jacobian of [`measure`] with respect to the Cartesian state vector
/// `[x, vx, y, vy]`; rows are (R, Rdot, theta).
pub fn jacobian(s: &CartesianState, g: &Geometry) -> Result<SMatrix<f64, 3, 4>> {
    let (dr, dt) = station_offsets(s, g)?;
    let nr = dr.norm();
    let nt = dt.norm();
    let v = s.vel;

    // dR/dpos doubles as dRdot/dvel.
    let dr_dx = dr.x / nr + dt.x / nt;
    let dr_dy = dr.y / nr + dt.y / nt;

    let rv = dr.dot(&v);
    let tv = dt.dot(&v);
    let drdot_dx = v.x / nr - dr.x * rv / (nr * nr * nr) + v.x / nt - dt.x * tv / (nt * nt * nt);
    let drdot_dy = v.y / nr - dr.y * rv / (nr * nr * nr) + v.y / nt - dt.y * tv / (nt * nt * nt);

    let dth_dx = -dr.y / (nr * nr);
    let dth_dy = dr.x / (nr * nr);

    Ok(SMatrix::<f64, 3, 4>::from_row_slice(&[
        dr_dx, 0.0, dr_dy, 0.0, //
        drdot_dx, dr_dx, drdot_dy, dr_dy, //
        dth_dx, 0.0, dth_dy, 0.0,
    ]))
}

/// Resolution limits for a radio configuration.
///
/// `bistatic_angle` is the angle subtended at the target by the two
/// stations (beta); `aoa` is the target direction relative to the
/// surveillance broadside, where the array's angular resolution degrades
/// toward endfire.
///
/// ```text
/// dR     = c / (2 B cos(beta/2))
/// df_D   = 1 / T
/// dv     = lambda / (2 T cos(beta/2))
/// dtheta = 2 / (N_sur |cos(aoa)|)
/// ```
pub fn resolutions(cfg: &RadioConfig, bistatic_angle: f64, aoa: f64) -> Result<Resolutions> {
    let half_beta_cos = (bistatic_angle / 2.0).cos();
    if half_beta_cos.abs() < 1e-12 {
        return Err(Error::ResolutionUndefined(
            "bistatic angle is pi: stations and target are collinear".to_string(),
        ));
    }
    let aoa_cos = aoa.cos().abs();
    if aoa_cos < 1e-12 {
        return Err(Error::ResolutionUndefined(
            "target at array endfire: cos(aoa) = 0".to_string(),
        ));
    }
    Ok(Resolutions {
        range_res: SPEED_OF_LIGHT / (2.0 * cfg.bandwidth * half_beta_cos),
        doppler_res: 1.0 / cfg.cit,
        velocity_res: cfg.wavelength() / (2.0 * cfg.cit * half_beta_cos),
        angular_res: 2.0 / (cfg.sur_array_size as f64 * aoa_cos),
    })
}

/// The variance terms H1..H5 of the position obtained by [`invert`],
/// propagated from range and AoA noise by linearization.
///
/// The closed forms are written in a frame whose +x axis runs from the
/// transmitter toward the receiver, so the caller evaluates them at the
/// convention-shifted angle `theta - baseline_angle - pi` and rotates the
/// resulting 2x2 covariance back by `baseline_angle` (the extra half turn
/// cancels inside the symmetric sandwich).
pub fn position_covariance(
    z: &Observation,
    g: &Geometry,
    sigma_r2: f64,
    sigma_theta2: f64,
) -> Matrix2<f64> {
    let r = z.bistatic_range;
    let l = g.baseline_len;
    let a = z.aoa - g.baseline_angle - std::f64::consts::PI;
    let (sin_a, cos_a) = a.sin_cos();

    let h1 = 2.0 * r * l * cos_a * cos_a + (r * r + l * l) * cos_a;
    let h2 = (l * l - r * r) * r * sin_a;
    let h3 = std::f64::consts::SQRT_2 * (l * cos_a + r);
    let h4 = r * l * (2.0 * a).sin() + (r * r + l * l) * sin_a;
    let h5 = (r * r - l * l) * (r * cos_a + l);
    let h3_4 = h3.powi(4);

    let sig_xx = (h1 * h1 * sigma_r2 + h2 * h2 * sigma_theta2) / h3_4;
    let sig_yy = (h4 * h4 * sigma_r2 + h5 * h5 * sigma_theta2) / h3_4;
    let sig_xy = (h1 * h4 * sigma_r2 + h2 * h5 * sigma_theta2) / h3_4;

    let rot = Matrix2::new(
        g.baseline_angle.cos(),
        -g.baseline_angle.sin(),
        g.baseline_angle.sin(),
        g.baseline_angle.cos(),
    );
    rot * Matrix2::new(sig_xx, sig_xy, sig_xy, sig_yy) * rot.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn paper_geometry() -> Geometry {
        Geometry::new(Vector2::new(255.0, 0.0), Vector2::new(0.0, 0.0), 1.2, 0.0)
    }

    #[test]
    fn test_measure_perpendicular_target() {
        // Target straight above the receiver: R = 100 + sqrt(255^2 + 100^2).
        let g = paper_geometry();
        let s = CartesianState {
            pos: Vector2::new(0.0, 100.0),
            vel: Vector2::new(0.0, 0.0),
        };
        let z = measure(&s, &g).unwrap();
        assert_abs_diff_eq!(z.bistatic_range, 373.9069184960467, epsilon = 1e-9);
        assert_eq!(z.range_rate, 0.0);
        assert_abs_diff_eq!(z.aoa, PI / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn test_measure_oblique_frozen() {
        let g = paper_geometry();
        let s = CartesianState {
            pos: Vector2::new(-60.0, 180.0),
            vel: Vector2::new(4.0, -7.0),
        };
        let z = measure(&s, &g).unwrap();
        assert_abs_diff_eq!(z.bistatic_range, 552.5382582835375, epsilon = 1e-9);
        assert_abs_diff_eq!(z.range_rate, -14.851639287416623, epsilon = 1e-9);
        assert_abs_diff_eq!(z.aoa, 1.892546881191539, epsilon = 1e-12);
    }

    #[test]
    fn test_measure_range_rate_matches_numeric_derivative() {
        // Rdot must be the time derivative of R along the motion; check it
        // against a central difference of R(pos + t vel) without touching
        // the closed-form rate.
        let g = paper_geometry();
        let s = CartesianState {
            pos: Vector2::new(-60.0, 180.0),
            vel: Vector2::new(4.0, -7.0),
        };
        let z = measure(&s, &g).unwrap();
        let range_at = |t: f64| {
            let shifted = CartesianState {
                pos: s.pos + s.vel * t,
                vel: s.vel,
            };
            measure(&shifted, &g).unwrap().bistatic_range
        };
        let h = 1e-4;
        let fd = (range_at(h) - range_at(-h)) / (2.0 * h);
        assert_relative_eq!(z.range_rate, fd, max_relative = 1e-7);
    }

    #[test]
    fn test_measure_bisector_velocity_cancels() {
        // On the perpendicular bisector of the baseline the two unit
        // vectors mirror each other, so a velocity parallel to the
        // baseline contributes nothing to the range rate.
        let g = paper_geometry();
        let s = CartesianState {
            pos: Vector2::new(127.5, 90.0),
            vel: Vector2::new(3.0, 0.0),
        };
        let z = measure(&s, &g).unwrap();
        assert_abs_diff_eq!(z.range_rate, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn test_measure_zero_velocity() {
        let g = paper_geometry();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let s = CartesianState {
                pos: Vector2::new(rng.gen_range(-500.0..500.0), rng.gen_range(50.0..500.0)),
                vel: Vector2::new(0.0, 0.0),
            };
            assert_eq!(measure(&s, &g).unwrap().range_rate, 0.0);
        }
    }

    #[test]
    fn test_measure_degenerate_position() {
        let g = paper_geometry();
        let at_rx = CartesianState {
            pos: g.rx_pos,
            vel: Vector2::new(1.0, 0.0),
        };
        assert!(matches!(
            measure(&at_rx, &g),
            Err(Error::DegeneratePosition { station: "receiver", .. })
        ));
        let at_tx = CartesianState {
            pos: g.tx_pos,
            vel: Vector2::new(1.0, 0.0),
        };
        assert!(matches!(
            measure(&at_tx, &g),
            Err(Error::DegeneratePosition { station: "transmitter", .. })
        ));
    }

    #[test]
    fn test_invert_perpendicular() {
        let g = paper_geometry();
        let z = Observation {
            bistatic_range: 373.9069184960467,
            range_rate: 0.0,
            aoa: PI / 2.0,
        };
        let s = invert(&z, &g).unwrap();
        assert_abs_diff_eq!(s.pos.x, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(s.pos.y, 100.0, epsilon = 1e-9);
        assert_eq!(s.vel, Vector2::new(0.0, 0.0));
    }

    #[test]
    fn test_invert_behind_receiver() {
        // R = L + 2 d0 with the ray pointing away from the transmitter
        // puts the target d0 behind the receiver on the baseline
        // extension.
        let g = paper_geometry();
        let d0 = 50.0;
        let z = Observation {
            bistatic_range: g.baseline_len + 2.0 * d0,
            range_rate: -3.0,
            aoa: PI,
        };
        let s = invert(&z, &g).unwrap();
        assert_abs_diff_eq!(s.pos.x, -d0, epsilon = 1e-9);
        assert_abs_diff_eq!(s.pos.y, 0.0, epsilon = 1e-9);
        // Exact mode: measuring back returns the same range rate.
        let back = measure(&s, &g).unwrap();
        assert_abs_diff_eq!(back.range_rate, -3.0, epsilon = 1e-12);
    }

    #[test]
    fn test_invert_literal_velocity_scales_range_rate() {
        // The literal convention divides by |u| once, so re-measuring
        // multiplies the range rate by |u|.
        let g = paper_geometry();
        let z = Observation {
            bistatic_range: 450.0,
            range_rate: -5.0,
            aoa: 1.1,
        };
        let exact = invert_with(&z, &g, RangeRateInversion::Exact).unwrap();
        let literal = invert_with(&z, &g, RangeRateInversion::Literal).unwrap();
        let dr = (exact.pos - g.rx_pos).normalize();
        let dt = (exact.pos - g.tx_pos).normalize();
        let u_norm = (dr + dt).norm();
        assert_abs_diff_eq!(
            measure(&exact, &g).unwrap().range_rate,
            z.range_rate,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            measure(&literal, &g).unwrap().range_rate,
            z.range_rate * u_norm,
            epsilon = 1e-12
        );
    }

    #[test]
    fn test_invert_rejects_range_inside_baseline() {
        let g = paper_geometry();
        let z = Observation {
            bistatic_range: g.baseline_len - 1.0,
            range_rate: 0.0,
            aoa: 0.5,
        };
        assert!(matches!(invert(&z, &g), Err(Error::DegenerateGeometry(_))));
    }

    #[test]
    fn test_roundtrip_random_observations() {
        // measure(invert(z)) = z to 1e-9 in all three components over 1000
        // random draws, exact mode.
        let g = Geometry::new(
            Vector2::new(180.0, -120.0),
            Vector2::new(-30.0, 40.0),
            0.7,
            -0.3,
        );
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..1000 {
            let z = Observation {
                bistatic_range: g.baseline_len + rng.gen_range(1.0..2000.0),
                range_rate: rng.gen_range(-30.0..30.0),
                aoa: rng.gen_range(-PI..PI),
            };
            let s = invert(&z, &g).unwrap();
            let back = measure(&s, &g).unwrap();
            assert_abs_diff_eq!(back.bistatic_range, z.bistatic_range, epsilon = 1e-9);
            assert_abs_diff_eq!(back.range_rate, z.range_rate, epsilon = 1e-9);
            assert_abs_diff_eq!(wrap_angle(back.aoa - z.aoa), 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn test_jacobian_matches_finite_differences() {
        // Central differences of measure over each state component, on 100
        // random non-degenerate states.
        let g = paper_geometry();
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        let h = 1e-4;
        for _ in 0..100 {
            let s = CartesianState {
                pos: Vector2::new(rng.gen_range(-400.0..600.0), rng.gen_range(60.0..600.0)),
                vel: Vector2::new(rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0)),
            };
            let jac = jacobian(&s, &g).unwrap();
            for col in 0..4 {
                let mut plus = s;
                let mut minus = s;
                match col {
                    0 => {
                        plus.pos.x += h;
                        minus.pos.x -= h;
                    }
                    1 => {
                        plus.vel.x += h;
                        minus.vel.x -= h;
                    }
                    2 => {
                        plus.pos.y += h;
                        minus.pos.y -= h;
                    }
                    _ => {
                        plus.vel.y += h;
                        minus.vel.y -= h;
                    }
                }
                let zp = measure(&plus, &g).unwrap();
                let zm = measure(&minus, &g).unwrap();
                let fd = [
                    (zp.bistatic_range - zm.bistatic_range) / (2.0 * h),
                    (zp.range_rate - zm.range_rate) / (2.0 * h),
                    wrap_angle(zp.aoa - zm.aoa) / (2.0 * h),
                ];
                for row in 0..3 {
                    assert_relative_eq!(
                        jac[(row, col)],
                        fd[row],
                        max_relative = 1e-5,
                        epsilon = 1e-9
                    );
                }
            }
        }
    }

    #[test]
    fn test_jacobian_velocity_independent_entries_zero() {
        let g = paper_geometry();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..50 {
            let s = CartesianState {
                pos: Vector2::new(rng.gen_range(-400.0..600.0), rng.gen_range(60.0..600.0)),
                vel: Vector2::new(rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0)),
            };
            let jac = jacobian(&s, &g).unwrap();
            // R and theta do not depend on velocity.
            assert_eq!(jac[(0, 1)], 0.0);
            assert_eq!(jac[(0, 3)], 0.0);
            assert_eq!(jac[(2, 1)], 0.0);
            assert_eq!(jac[(2, 3)], 0.0);
        }
    }

    #[test]
    fn test_jacobian_dtheta_dx_hand_value() {
        // At pos = (0, 100) with the receiver at the origin:
        // dtheta/dx = -y / |l - l_r|^2 = -100 / 100^2.
        let g = paper_geometry();
        let s = CartesianState {
            pos: Vector2::new(0.0, 100.0),
            vel: Vector2::new(0.0, 0.0),
        };
        let jac = jacobian(&s, &g).unwrap();
        assert_abs_diff_eq!(jac[(2, 0)], -0.01, epsilon = 1e-15);
    }

    #[test]
    fn test_baseline_symmetry_swap() {
        // R and Rdot are symmetric in the two stations.
        let g = paper_geometry();
        let swapped = Geometry::new(g.rx_pos, g.tx_pos, g.sur_broadside, g.ref_broadside);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let s = CartesianState {
                pos: Vector2::new(rng.gen_range(-400.0..600.0), rng.gen_range(60.0..600.0)),
                vel: Vector2::new(rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0)),
            };
            let a = measure(&s, &g).unwrap();
            let b = measure(&s, &swapped).unwrap();
            assert_abs_diff_eq!(a.bistatic_range, b.bistatic_range, epsilon = 1e-9);
            assert_abs_diff_eq!(a.range_rate, b.range_rate, epsilon = 1e-12);
        }
    }

    #[test]
    fn test_resolutions_paper_anchors() {
        let cfg = RadioConfig {
            carrier_freq: 2.123e9,
            sample_rate: 25e6,
            bandwidth: 5e6,
            cit: 0.2,
            slot_samples: 5_000_000,
            ref_array_size: 4,
            sur_array_size: 8,
            element_spacing_wavelengths: 0.5,
        };
        let res = resolutions(&cfg, 0.0, 0.0).unwrap();
        assert_relative_eq!(res.range_res, 30.0, max_relative = 0.01);
        assert_relative_eq!(res.doppler_res, 5.0, max_relative = 1e-12);
        assert_relative_eq!(res.velocity_res, 0.35, max_relative = 0.01);
        assert_relative_eq!(res.angular_res.to_degrees(), 14.3, max_relative = 0.01);
    }

    #[test]
    fn test_resolutions_degenerate_angles() {
        let cfg = RadioConfig {
            carrier_freq: 2.123e9,
            sample_rate: 25e6,
            bandwidth: 5e6,
            cit: 0.2,
            slot_samples: 5_000_000,
            ref_array_size: 4,
            sur_array_size: 8,
            element_spacing_wavelengths: 0.5,
        };
        assert!(matches!(
            resolutions(&cfg, PI, 0.0),
            Err(Error::ResolutionUndefined(_))
        ));
        assert!(matches!(
            resolutions(&cfg, 0.0, PI / 2.0),
            Err(Error::ResolutionUndefined(_))
        ));
    }

    #[test]
    fn test_position_covariance_monte_carlo() {
        // Sample covariance of invert over measurement noise matches the
        // linearized closed form within 10%.
        use rand::distributions::Distribution;
        let g = paper_geometry();
        let z0 = Observation {
            bistatic_range: 373.9069184960467,
            range_rate: 0.0,
            aoa: PI / 2.0,
        };
        let sigma_r = 7.0;
        let sigma_theta = 3.0_f64.to_radians();
        let formula = position_covariance(&z0, &g, sigma_r * sigma_r, sigma_theta * sigma_theta);

        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let normal = rand::distributions::Standard;
        let mut sum = Vector2::new(0.0, 0.0);
        let mut sum_sq = Matrix2::zeros();
        let n = 100_000;
        let gauss = |rng: &mut ChaCha8Rng| -> f64 {
            // Box-Muller keeps the test free of extra dependencies.
            let u1: f64 = Distribution::<f64>::sample(&normal, rng).max(1e-12);
            let u2: f64 = Distribution::<f64>::sample(&normal, rng);
            (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
        };
        for _ in 0..n {
            let z = Observation {
                bistatic_range: z0.bistatic_range + sigma_r * gauss(&mut rng),
                range_rate: 0.0,
                aoa: z0.aoa + sigma_theta * gauss(&mut rng),
            };
            let p = invert(&z, &g).unwrap().pos;
            sum += p;
            sum_sq += p * p.transpose();
        }
        let mean = sum / n as f64;
        let cov = sum_sq / n as f64 - mean * mean.transpose();
        assert_relative_eq!(cov[(0, 0)], formula[(0, 0)], max_relative = 0.1);
        assert_relative_eq!(cov[(1, 1)], formula[(1, 1)], max_relative = 0.1);
        let scale = (formula[(0, 0)] * formula[(1, 1)]).sqrt();
        assert_abs_diff_eq!(cov[(0, 1)], formula[(0, 1)], epsilon = 0.1 * scale);
    }

    #[test]
    fn test_position_covariance_rotation_invariant() {
        // The same physical layout rotated by an arbitrary angle must give
        // the rotated covariance: checks the baseline-frame bookkeeping.
        let g = paper_geometry();
        let z = Observation {
            bistatic_range: 500.0,
            range_rate: 0.0,
            aoa: 1.2,
        };
        let cov = position_covariance(&z, &g, 49.0, 0.003);

        let rot_angle = 0.83_f64;
        let rot = nalgebra::Rotation2::new(rot_angle);
        let g2 = Geometry::new(
            rot * Vector2::new(255.0, 0.0),
            Vector2::new(0.0, 0.0),
            1.2 + rot_angle,
            rot_angle,
        );
        let z2 = Observation {
            aoa: wrap_angle(z.aoa + rot_angle),
            ..z
        };
        let cov2 = position_covariance(&z2, &g2, 49.0, 0.003);
        let expected = rot.matrix() * cov * rot.matrix().transpose();
        assert_relative_eq!(cov2[(0, 0)], expected[(0, 0)], max_relative = 1e-9);
        assert_relative_eq!(cov2[(0, 1)], expected[(0, 1)], max_relative = 1e-9);
        assert_relative_eq!(cov2[(1, 1)], expected[(1, 1)], max_relative = 1e-9);
    }

    #[test]
    fn test_wrap_angle_boundaries() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert_abs_diff_eq!(wrap_angle(3.0 * PI), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_angle(-2.5 * PI), -0.5 * PI, epsilon = 1e-12);
        assert_eq!(wrap_angle(0.25), 0.25);
    }

    #[test]
    fn test_geometry_validate() {
        let mut g = paper_geometry();
        assert!(g.validate().is_ok());
        g.baseline_len += 1e-3;
        assert!(matches!(g.validate(), Err(Error::Validation { .. })));
    }
}
