//! Scenario configuration: one TOML file describing the radio, the scene,
//! and every processing stage, validated as a whole at load time.
//!
//! The on-disk schema ([`ScenarioFile`]) uses human units (degrees, dB)
//! and is kept verbatim inside the loaded [`Scenario`], so serializing a
//! scenario reproduces the file it came from. The derived fields (radians,
//! a fully populated [`Geometry`], the trajectory model) are computed once
//! at load, after cross-field validation; any inconsistency fails fast
//! with the offending field path in the message.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::detect::{CcConfig, CfarConfig};
use crate::geometry::{measure, wrap_angle, CartesianState, Geometry, RangeRateInversion};
use crate::simulate::RadioConfig;
use crate::track::{TrackMode, TrackerConfig};
use crate::{Error, Result};

/// The raw TOML schema. See `configs/desk.toml` for a commented example.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    /// Master seed for the waveform, noise, and path phases.
    pub seed: u64,
    /// Number of coherent-integration slots to simulate.
    pub slots: usize,
    /// Waveform oversampling factor for fractional-delay rendering.
    #[serde(default = "default_oversample")]
    pub oversample: usize,
    /// Direct-path level above the target echo at the surveillance array, dB.
    pub direct_path_excess_db: f64,
    pub radio: RadioConfig,
    pub geometry: GeometryFile,
    pub target: TargetFile,
    #[serde(default)]
    pub clutter: Vec<ClutterFile>,
    #[serde(default)]
    pub noise: NoiseFile,
    pub cc: CcConfig,
    pub cfar: CfarConfig,
    pub tracker: TrackerFile,
}

fn default_oversample() -> usize {
    4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryFile {
    pub tx_pos: [f64; 2],
    pub rx_pos: [f64; 2],
    pub sur_broadside_deg: f64,
    pub ref_broadside_deg: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetFile {
    /// Per-antenna echo power over the unit noise floor, dB.
    pub snr_db: f64,
    pub path: TargetPathFile,
}

/// Trajectory description: an explicit polyline or a parametric J hook.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetPathFile {
    /// Piecewise-linear path through `waypoints` at one speed per leg.
    Waypoints {
        waypoints: Vec<[f64; 2]>,
        speeds: Vec<f64>,
    },
    /// Straight run followed by a circular hook: positive `arc_sweep_deg`
    /// turns left (counterclockwise), negative turns right.
    J {
        start: [f64; 2],
        heading_deg: f64,
        straight_len: f64,
        arc_radius: f64,
        arc_sweep_deg: f64,
        speed: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClutterFile {
    pub pos: [f64; 2],
    /// Per-antenna echo power over the unit noise floor, dB.
    pub snr_db: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseFile {
    /// Line-of-sight power over the unit noise floor at each reference
    /// antenna, dB.
    #[serde(default = "default_ref_los_snr_db")]
    pub ref_los_snr_db: f64,
    /// Actual noise variance per reference antenna sample (the SNR fields
    /// are always defined against a variance of 1).
    #[serde(default = "default_noise_power")]
    pub ref_noise_power: f64,
    /// Actual noise variance per surveillance antenna sample.
    #[serde(default = "default_noise_power")]
    pub sur_noise_power: f64,
}

fn default_ref_los_snr_db() -> f64 {
    60.0
}

fn default_noise_power() -> f64 {
    1.0
}

impl Default for NoiseFile {
    fn default() -> Self {
        NoiseFile {
            ref_los_snr_db: default_ref_los_snr_db(),
            ref_noise_power: default_noise_power(),
            sur_noise_power: default_noise_power(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackerFile {
    #[serde(default)]
    pub mode: TrackMode,
    pub gate: f64,
    pub confirm_slots: usize,
    pub delete_slots: usize,
    pub sigma_range: f64,
    pub sigma_range_rate: f64,
    pub sigma_aoa_deg: f64,
    pub accel_noise_range: f64,
    pub accel_noise_aoa_deg: f64,
    pub accel_noise_x: f64,
    pub accel_noise_y: f64,
    #[serde(default = "default_init_sigma0_accel")]
    pub init_sigma0_accel: f64,
    #[serde(default = "default_init_sigma0_aoa_rate_deg")]
    pub init_sigma0_aoa_rate_deg: f64,
    #[serde(default = "default_init_vmax")]
    pub init_vmax: f64,
    #[serde(default)]
    pub range_rate_inversion: RangeRateInversion,
}

fn default_init_sigma0_accel() -> f64 {
    10.0
}

fn default_init_sigma0_aoa_rate_deg() -> f64 {
    3.0
}

fn default_init_vmax() -> f64 {
    15.0
}

/// A static scatterer kept after the field-of-view filter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClutterScatterer {
    pub pos: Vector2<f64>,
    pub snr_db: f64,
}

/// Noise levels after defaulting.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseLevels {
    pub ref_los_snr_db: f64,
    pub ref_noise_power: f64,
    pub sur_noise_power: f64,
}

/// Closed-form trajectory: position and velocity at any time.
#[derive(Clone, Debug, PartialEq)]
pub enum TargetPath {
    Waypoints {
        points: Vec<Vector2<f64>>,
        speeds: Vec<f64>,
        /// Cumulative time at the end of each leg.
        leg_ends: Vec<f64>,
    },
    J {
        start: Vector2<f64>,
        heading: f64,
        straight_len: f64,
        arc_radius: f64,
        arc_sweep: f64,
        speed: f64,
    },
}

impl TargetPath {
    /// Total time covered by the trajectory, seconds.
    pub fn duration(&self) -> f64 {
        match self {
            TargetPath::Waypoints { leg_ends, .. } => *leg_ends.last().unwrap(),
            TargetPath::J {
                straight_len,
                arc_radius,
                arc_sweep,
                speed,
                ..
            } => (straight_len + arc_radius * arc_sweep.abs()) / speed,
        }
    }

    /// State at time `t`, clamped to the trajectory's time span.
    pub fn state_at(&self, t: f64) -> CartesianState {
        let t = t.clamp(0.0, self.duration());
        match self {
            TargetPath::Waypoints {
                points,
                speeds,
                leg_ends,
            } => {
                // Find the leg containing t; the final instant reuses the
                // last leg's velocity.
                let leg = leg_ends
                    .iter()
                    .position(|&end| t < end)
                    .unwrap_or(speeds.len() - 1);
                let leg_start = if leg == 0 { 0.0 } else { leg_ends[leg - 1] };
                let dir = (points[leg + 1] - points[leg]).normalize();
                CartesianState {
                    pos: points[leg] + dir * speeds[leg] * (t - leg_start),
                    vel: dir * speeds[leg],
                }
            }
            TargetPath::J {
                start,
                heading,
                straight_len,
                arc_radius,
                arc_sweep,
                speed,
            } => {
                let unit = |a: f64| Vector2::new(a.cos(), a.sin());
                let speed = *speed;
                let t_straight = straight_len / speed;
                if t < t_straight || *arc_sweep == 0.0 {
                    let t = t.min(t_straight);
                    CartesianState {
                        pos: start + unit(*heading) * speed * t,
                        vel: unit(*heading) * speed,
                    }
                } else {
                    let turn = arc_sweep.signum();
                    let hook_start = start + unit(*heading) * *straight_len;
                    let center = hook_start + unit(heading + turn * std::f64::consts::FRAC_PI_2) * *arc_radius;
                    let swept = turn * (t - t_straight) * speed / arc_radius;
                    let ang = (heading - turn * std::f64::consts::FRAC_PI_2) + swept;
                    CartesianState {
                        pos: center + unit(ang) * *arc_radius,
                        vel: unit(ang + turn * std::f64::consts::FRAC_PI_2) * speed,
                    }
                }
            }
        }
    }
}

/// A loaded, validated scenario with all derived quantities in SI units.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    file: ScenarioFile,
    pub seed: u64,
    pub slots: usize,
    pub oversample: usize,
    pub radio: RadioConfig,
    pub geometry: Geometry,
    pub target: TargetPath,
    pub target_snr_db: f64,
    pub clutter: Vec<ClutterScatterer>,
    pub direct_path_excess_db: f64,
    pub noise: NoiseLevels,
    pub cc: CcConfig,
    pub cfar: CfarConfig,
    pub tracker: TrackerConfig,
}

/// CLI-level overrides applied before validation.
#[derive(Clone, Copy, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub slots: Option<usize>,
    pub doppler_window: Option<f64>,
    pub mode: Option<TrackMode>,
}

impl Scenario {
    pub fn load(path: &std::path::Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path)?;
        Scenario::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Scenario> {
        let file: ScenarioFile = toml::from_str(text)
            .map_err(|e| Error::format("scenario file", e.to_string()))?;
        Scenario::from_file(file)
    }

    /// Serializes back to TOML; reloading the result yields an identical
    /// scenario.
    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(&self.file).expect("scenario file serializes")
    }

    pub fn file(&self) -> &ScenarioFile {
        &self.file
    }

    pub fn with_overrides(&self, o: &Overrides) -> Result<Scenario> {
        let mut file = self.file.clone();
        if let Some(seed) = o.seed {
            file.seed = seed;
        }
        if let Some(slots) = o.slots {
            file.slots = slots;
        }
        if let Some(w) = o.doppler_window {
            file.cfar.doppler_window = w;
        }
        if let Some(mode) = o.mode {
            file.tracker.mode = mode;
        }
        Scenario::from_file(file)
    }

    pub fn from_file(file: ScenarioFile) -> Result<Scenario> {
        if file.slots == 0 {
            return Err(Error::validation("slots", "need at least one slot"));
        }
        if file.oversample < 2 {
            return Err(Error::validation("oversample", "need oversample >= 2"));
        }

        let radio = file.radio.normalized()?;
        let sps = file.oversample as f64 * radio.sample_rate / radio.bandwidth;
        if (sps - sps.round()).abs() > 1e-9 * sps || sps.round() < 2.0 {
            return Err(Error::validation(
                "oversample",
                format!(
                    "oversample * sample_rate / bandwidth = {sps} must be an integer >= 2 \
                     so symbols land on the oversampled grid"
                ),
            ));
        }

        radio.validate()?;
        file.cc.validate(radio.slot_samples)?;
        file.cfar.validate(radio.sample_rate, radio.slot_samples)?;

        let g = &file.geometry;
        let geometry = Geometry::new(
            Vector2::new(g.tx_pos[0], g.tx_pos[1]),
            Vector2::new(g.rx_pos[0], g.rx_pos[1]),
            g.sur_broadside_deg.to_radians(),
            g.ref_broadside_deg.to_radians(),
        );
        geometry.validate()?;
        let ref_los_rel = wrap_angle(geometry.ref_aoa - geometry.ref_broadside);
        if ref_los_rel.abs() >= std::f64::consts::FRAC_PI_2 {
            return Err(Error::validation(
                "geometry.ref_broadside_deg",
                format!(
                    "transmitter sits {:.1} deg off the reference broadside, outside the \
                     (-90, 90) deg field of view",
                    ref_los_rel.to_degrees()
                ),
            ));
        }

        let t = &file.tracker;
        let tracker = TrackerConfig {
            mode: t.mode,
            gate: t.gate,
            confirm_slots: t.confirm_slots,
            delete_slots: t.delete_slots,
            sigma_range: t.sigma_range,
            sigma_range_rate: t.sigma_range_rate,
            sigma_aoa: t.sigma_aoa_deg.to_radians(),
            accel_noise_range: t.accel_noise_range,
            accel_noise_aoa: t.accel_noise_aoa_deg.to_radians(),
            accel_noise_x: t.accel_noise_x,
            accel_noise_y: t.accel_noise_y,
            init_sigma0_accel: t.init_sigma0_accel,
            init_sigma0_aoa_rate: t.init_sigma0_aoa_rate_deg.to_radians(),
            init_vmax: t.init_vmax,
            range_rate_inversion: t.range_rate_inversion,
            slot_duration: radio.cit,
        };
        tracker.validate()?;

        let target = build_target_path(&file.target.path)?;
        let run_span = (file.slots - 1) as f64 * radio.cit;
        if target.duration() + 1e-9 < run_span {
            return Err(Error::validation(
                "target.path",
                format!(
                    "trajectory lasts {:.3} s but {} slots of {} s need {:.3} s",
                    target.duration(),
                    file.slots,
                    radio.cit,
                    run_span
                ),
            ));
        }

        // The target must stay visible to the surveillance array in every
        // simulated slot.
        for m in 0..file.slots {
            let state = target.state_at(m as f64 * radio.cit);
            let z = measure(&state, &geometry).map_err(|e| {
                Error::validation("target.path", format!("slot {m}: {e}"))
            })?;
            let rel = wrap_angle(z.aoa - geometry.sur_broadside);
            if rel.abs() >= std::f64::consts::FRAC_PI_2 {
                return Err(Error::validation(
                    "target.path",
                    format!(
                        "slot {m}: target AoA {:.1} deg relative to the surveillance \
                         broadside leaves the (-90, 90) deg field of view",
                        rel.to_degrees()
                    ),
                ));
            }
        }

        if file.noise.ref_noise_power < 0.0 || file.noise.sur_noise_power < 0.0 {
            return Err(Error::validation(
                "noise",
                "noise powers must be non-negative",
            ));
        }

        // Scatterers behind the surveillance array are invisible to it:
        // the patch antennas gate them out, so they are dropped here.
        let mut clutter = Vec::new();
        for (i, c) in file.clutter.iter().enumerate() {
            let pos = Vector2::new(c.pos[0], c.pos[1]);
            if (pos - geometry.rx_pos).norm() < 1e-6 || (pos - geometry.tx_pos).norm() < 1e-6 {
                return Err(Error::validation(
                    &format!("clutter[{i}].pos"),
                    "scatterer coincides with a station",
                ));
            }
            let aoa = {
                let d = pos - geometry.rx_pos;
                d.y.atan2(d.x)
            };
            let rel = wrap_angle(aoa - geometry.sur_broadside);
            if rel.abs() < std::f64::consts::FRAC_PI_2 {
                clutter.push(ClutterScatterer {
                    pos,
                    snr_db: c.snr_db,
                });
            } else {
                log::warn!(
                    "clutter[{i}] at ({:.1}, {:.1}) is outside the surveillance field of \
                     view and will not be rendered",
                    pos.x,
                    pos.y
                );
            }
        }

        Ok(Scenario {
            seed: file.seed,
            slots: file.slots,
            oversample: file.oversample,
            radio,
            geometry,
            target,
            target_snr_db: file.target.snr_db,
            clutter,
            direct_path_excess_db: file.direct_path_excess_db,
            noise: NoiseLevels {
                ref_los_snr_db: file.noise.ref_los_snr_db,
                ref_noise_power: file.noise.ref_noise_power,
                sur_noise_power: file.noise.sur_noise_power,
            },
            cc: file.cc,
            cfar: file.cfar,
            tracker,
            file,
        })
    }
}

fn build_target_path(spec: &TargetPathFile) -> Result<TargetPath> {
    match spec {
        TargetPathFile::Waypoints { waypoints, speeds } => {
            if waypoints.len() < 2 {
                return Err(Error::validation(
                    "target.path.waypoints",
                    "need at least two waypoints",
                ));
            }
            if speeds.len() != waypoints.len() - 1 {
                return Err(Error::validation(
                    "target.path.speeds",
                    format!(
                        "need one speed per leg: {} waypoints give {} legs, got {} speeds",
                        waypoints.len(),
                        waypoints.len() - 1,
                        speeds.len()
                    ),
                ));
            }
            let points: Vec<Vector2<f64>> =
                waypoints.iter().map(|p| Vector2::new(p[0], p[1])).collect();
            let mut leg_ends = Vec::with_capacity(speeds.len());
            let mut t = 0.0;
            for (i, (&speed, pair)) in speeds.iter().zip(points.windows(2)).enumerate() {
                if !(speed > 0.0) {
                    return Err(Error::validation(
                        &format!("target.path.speeds[{i}]"),
                        "leg speed must be positive",
                    ));
                }
                let len = (pair[1] - pair[0]).norm();
                if len == 0.0 {
                    return Err(Error::validation(
                        &format!("target.path.waypoints[{}]", i + 1),
                        "zero-length leg",
                    ));
                }
                t += len / speed;
                leg_ends.push(t);
            }
            Ok(TargetPath::Waypoints {
                points,
                speeds: speeds.clone(),
                leg_ends,
            })
        }
        TargetPathFile::J {
            start,
            heading_deg,
            straight_len,
            arc_radius,
            arc_sweep_deg,
            speed,
        } => {
            if !(*speed > 0.0) {
                return Err(Error::validation("target.path.speed", "must be positive"));
            }
            if *straight_len < 0.0 || *arc_radius <= 0.0 {
                return Err(Error::validation(
                    "target.path",
                    "straight_len must be >= 0 and arc_radius > 0",
                ));
            }
            Ok(TargetPath::J {
                start: Vector2::new(start[0], start[1]),
                heading: heading_deg.to_radians(),
                straight_len: *straight_len,
                arc_radius: *arc_radius,
                arc_sweep: arc_sweep_deg.to_radians(),
                speed: *speed,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn desk_toml() -> &'static str {
        include_str!("../configs/desk.toml")
    }

    #[test]
    fn test_load_desk_scenario() {
        let scn = Scenario::from_toml_str(desk_toml()).unwrap();
        assert_eq!(scn.radio.slot_samples, 200_000);
        assert_eq!(scn.slots, 30);
        assert!(scn.clutter.len() >= 2);
        assert_abs_diff_eq!(scn.tracker.sigma_aoa, 3.0_f64.to_radians(), epsilon = 1e-12);
        assert_abs_diff_eq!(scn.tracker.slot_duration, scn.radio.cit, epsilon = 0.0);
    }

    #[test]
    fn test_load_paper_scenario() {
        let scn = Scenario::from_toml_str(include_str!("../configs/paper.toml")).unwrap();
        assert_eq!(scn.radio.slot_samples, 5_000_000);
        assert_eq!(scn.cfar.guard, (60, 1));
        assert_eq!(scn.cfar.train, (60, 1));
    }

    #[test]
    fn test_roundtrip_identical() {
        let scn = Scenario::from_toml_str(desk_toml()).unwrap();
        let re = Scenario::from_toml_str(&scn.to_toml_string()).unwrap();
        assert_eq!(scn, re);
    }

    #[test]
    fn test_overrides_rebuild() {
        let scn = Scenario::from_toml_str(desk_toml()).unwrap();
        let o = Overrides {
            seed: Some(7),
            slots: Some(5),
            mode: Some(TrackMode::Bistatic),
            doppler_window: None,
        };
        let scn2 = scn.with_overrides(&o).unwrap();
        assert_eq!(scn2.seed, 7);
        assert_eq!(scn2.slots, 5);
        assert_eq!(scn2.tracker.mode, TrackMode::Bistatic);
        assert_eq!(scn2.cfar.doppler_window, scn.cfar.doppler_window);
    }

    #[test]
    fn test_validation_reports_field_path() {
        let bad = desk_toml().replace("bandwidth = 1.0e6", "bandwidth = 3.0e6");
        let err = Scenario::from_toml_str(&bad).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("radio"), "unexpected message: {msg}");
    }

    #[test]
    fn test_unknown_field_rejected() {
        let bad = format!("{}\n[typo_section]\nx = 1\n", desk_toml());
        assert!(matches!(
            Scenario::from_toml_str(&bad),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn test_waypoint_path_states() {
        let path = build_target_path(&TargetPathFile::Waypoints {
            waypoints: vec![[0.0, 0.0], [100.0, 0.0], [100.0, 50.0]],
            speeds: vec![10.0, 5.0],
        })
        .unwrap();
        assert_abs_diff_eq!(path.duration(), 20.0, epsilon = 1e-12);
        let s = path.state_at(5.0);
        assert_abs_diff_eq!(s.pos.x, 50.0, epsilon = 1e-12);
        assert_eq!(s.vel, Vector2::new(10.0, 0.0));
        let s = path.state_at(12.0);
        assert_abs_diff_eq!(s.pos.x, 100.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.pos.y, 10.0, epsilon = 1e-12);
        assert_eq!(s.vel, Vector2::new(0.0, 5.0));
    }

    #[test]
    fn test_j_path_geometry() {
        // Straight south for 20 m, then a right (clockwise) quarter turn
        // of radius 10: the hook ends heading west.
        let path = build_target_path(&TargetPathFile::J {
            start: [0.0, 0.0],
            heading_deg: -90.0,
            straight_len: 20.0,
            arc_radius: 10.0,
            arc_sweep_deg: -90.0,
            speed: 10.0,
        })
        .unwrap();
        let end = path.state_at(path.duration());
        assert_abs_diff_eq!(path.duration(), 2.0 + 10.0 * std::f64::consts::FRAC_PI_2 / 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(end.pos.x, -10.0, epsilon = 1e-9);
        assert_abs_diff_eq!(end.pos.y, -30.0, epsilon = 1e-9);
        assert_abs_diff_eq!(end.vel.x, -10.0, epsilon = 1e-9);
        assert_abs_diff_eq!(end.vel.y, 0.0, epsilon = 1e-9);
        // Speed is preserved along the whole path.
        for i in 0..20 {
            let s = path.state_at(path.duration() * i as f64 / 19.0);
            assert_abs_diff_eq!(s.vel.norm(), 10.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn test_clutter_behind_array_dropped() {
        let toml = desk_toml().to_string()
            + "\n[[clutter]]\npos = [-50.0, -200.0]\nsnr_db = 0.0\n";
        let base = Scenario::from_toml_str(desk_toml()).unwrap();
        let scn = Scenario::from_toml_str(&toml).unwrap();
        // The added scatterer sits behind the surveillance array. With
        // sur_broadside at 66 deg, (-50, -200) is 104 deg away.
        assert_eq!(scn.clutter.len(), base.clutter.len());
    }

    #[test]
    fn test_short_trajectory_rejected() {
        let bad = desk_toml().replace("straight_len = 40.0", "straight_len = 1.0");
        let err = Scenario::from_toml_str(&bad).unwrap_err();
        assert!(err.to_string().contains("target.path"), "{err}");
    }
}
