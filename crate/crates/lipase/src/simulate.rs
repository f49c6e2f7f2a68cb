//! Scene synthesis: an LTE-like illuminator, a moving target, static
//! clutter, and the direct path, rendered onto both antenna arrays.
//!
//! The transmitted waveform is a root-raised-cosine shaped QPSK stream at
//! the configured bandwidth, generated once for the full run on an
//! oversampled grid so that fractional path delays can be rendered by
//! interpolation. Each propagation path contributes
//!
//! ```text
//! y_a[n] = g * x(m*N + n - tau*f_s) * e^{j*2*pi*f_D*n/f_s} * steer_a(phi)
//! ```
//!
//! per antenna `a`, with the Doppler phase counted from the slot start and
//! the delay counted in absolute time, so the direct path and every echo
//! stay mutually consistent across arrays. Noise is complex white
//! Gaussian, drawn from a counter-based stream keyed by (seed, array,
//! slot, antenna): slots can be rendered in parallel and still reproduce
//! bit-identically.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detect::steering_vector;
use crate::geometry::{measure, wrap_angle, CartesianState, Observation};
use crate::scenario::Scenario;
use crate::{Error, Result, SPEED_OF_LIGHT};

/// Front-end and integration parameters shared by every stage.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadioConfig {
    /// Carrier frequency, Hz.
    pub carrier_freq: f64,
    /// Complex baseband sampling rate, Hz.
    pub sample_rate: f64,
    /// Occupied signal bandwidth, Hz.
    pub bandwidth: f64,
    /// Coherent integration time per slot, seconds.
    pub cit: f64,
    /// Samples per slot; 0 requests `cit * sample_rate`.
    #[serde(default)]
    pub slot_samples: usize,
    /// Reference array element count.
    pub ref_array_size: usize,
    /// Surveillance array element count.
    pub sur_array_size: usize,
    /// Element spacing in carrier wavelengths.
    #[serde(default = "default_element_spacing")]
    pub element_spacing_wavelengths: f64,
}

fn default_element_spacing() -> f64 {
    0.5
}

impl RadioConfig {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_freq
    }

    /// Fills `slot_samples` from `cit` when it was left at 0.
    pub fn normalized(&self) -> Result<RadioConfig> {
        let mut cfg = *self;
        if cfg.slot_samples == 0 {
            if !(cfg.cit > 0.0) || !(cfg.sample_rate > 0.0) {
                return Err(Error::validation(
                    "radio",
                    "cit and sample_rate must be positive",
                ));
            }
            cfg.slot_samples = (cfg.cit * cfg.sample_rate).round() as usize;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.carrier_freq > 0.0) {
            return Err(Error::validation("radio.carrier_freq", "must be positive"));
        }
        if !(self.sample_rate > 0.0) {
            return Err(Error::validation("radio.sample_rate", "must be positive"));
        }
        if !(self.bandwidth > 0.0) || self.bandwidth > self.sample_rate {
            return Err(Error::validation(
                "radio.bandwidth",
                "must satisfy 0 < bandwidth <= sample_rate",
            ));
        }
        if !(self.cit > 0.0) {
            return Err(Error::validation("radio.cit", "must be positive"));
        }
        let n = self.slot_samples as f64;
        if self.slot_samples == 0 || (self.cit * self.sample_rate - n).abs() > 1e-6 * n.max(1.0) {
            return Err(Error::validation(
                "radio.slot_samples",
                format!(
                    "slot_samples = {} does not equal cit * sample_rate = {}",
                    self.slot_samples,
                    self.cit * self.sample_rate
                ),
            ));
        }
        if self.ref_array_size < 1 {
            return Err(Error::validation(
                "radio.ref_array_size",
                "need at least one reference antenna",
            ));
        }
        if self.sur_array_size < 2 {
            return Err(Error::validation(
                "radio.sur_array_size",
                "need at least two surveillance antennas for bearing estimation",
            ));
        }
        if !(self.element_spacing_wavelengths > 0.0) {
            return Err(Error::validation(
                "radio.element_spacing_wavelengths",
                "must be positive",
            ));
        }
        Ok(())
    }
}

/// Which array a slot of IQ data belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArrayKind {
    Reference,
    Surveillance,
}

impl ArrayKind {
    fn stream_tag(self) -> u64 {
        match self {
            ArrayKind::Reference => 0,
            ArrayKind::Surveillance => 1,
        }
    }
}

/// What a propagation path is, which decides its bookkeeping in the scene.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PathKind {
    Los,
    Clutter,
    Target,
}

/// One propagation path as seen by one array.
#[derive(Clone, Copy, Debug)]
pub struct ScattererPath {
    pub kind: PathKind,
    /// Complex gain relative to a unit-power waveform and unit noise floor.
    pub attenuation: Complex64,
    /// Absolute propagation delay, seconds.
    pub delay: f64,
    /// Arrival angle relative to the array broadside, radians.
    pub aoa: f64,
    /// Doppler shift, Hz; zero for everything but the target.
    pub doppler: f64,
}

/// One slot of multichannel IQ data, antenna-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ArraySlot {
    pub slot_index: usize,
    pub n_antennas: usize,
    pub n_samples: usize,
    pub samples: Vec<Complex64>,
}

impl ArraySlot {
    pub fn zeros(slot_index: usize, n_antennas: usize, n_samples: usize) -> ArraySlot {
        ArraySlot {
            slot_index,
            n_antennas,
            n_samples,
            samples: vec![Complex64::new(0.0, 0.0); n_antennas * n_samples],
        }
    }

    pub fn row(&self, antenna: usize) -> &[Complex64] {
        &self.samples[antenna * self.n_samples..(antenna + 1) * self.n_samples]
    }

    pub fn row_mut(&mut self, antenna: usize) -> &mut [Complex64] {
        &mut self.samples[antenna * self.n_samples..(antenna + 1) * self.n_samples]
    }
}

/// The shaped transmit waveform on an oversampled grid.
///
/// Sample times are expressed in receiver sample periods (`1/sample_rate`);
/// the buffer covers `[-lead_samples, n_slots * slot_samples + tail)` so a
/// path delayed by up to `lead_samples` periods can still be rendered at
/// the start of the first slot.
pub struct Waveform {
    samples: Vec<Complex64>,
    oversample: usize,
    lead_samples: usize,
    pub sample_rate: f64,
}

/// Pre-signal margin, in receiver sample periods, kept ahead of slot 0.
/// At 2 MHz this covers path delays up to about 600 km.
const WAVEFORM_LEAD: usize = 4096;
const WAVEFORM_TAIL: usize = 64;

/// Root-raised-cosine rolloff used for pulse shaping.
const RRC_BETA: f64 = 0.25;
/// Shaping filter half-span, in symbol periods.
const RRC_HALF_SPAN: usize = 8;

impl Waveform {
    /// Linear interpolation at time `t` receiver sample periods from the
    /// start of slot 0. Integer times reproduce stored samples exactly.
    pub fn value_at(&self, t: f64) -> Option<Complex64> {
        let x = (t + self.lead_samples as f64) * self.oversample as f64;
        if x < 0.0 {
            return None;
        }
        let i0 = x.floor() as usize;
        if i0 + 1 >= self.samples.len() {
            return None;
        }
        let frac = x - i0 as f64;
        Some(self.samples[i0] * (1.0 - frac) + self.samples[i0 + 1] * frac)
    }
}

fn rrc_tap(u: f64, beta: f64) -> f64 {
    use std::f64::consts::{FRAC_2_PI, PI, SQRT_2};
    if u.abs() < 1e-12 {
        return 1.0 - beta + 4.0 * beta / PI;
    }
    let x = 4.0 * beta * u;
    if (x.abs() - 1.0).abs() < 1e-9 {
        let a = PI / (4.0 * beta);
        return (beta / SQRT_2) * ((1.0 + FRAC_2_PI) * a.sin() + (1.0 - FRAC_2_PI) * a.cos());
    }
    ((PI * u * (1.0 - beta)).sin() + x * (PI * u * (1.0 + beta)).cos())
        / (PI * u * (1.0 - x * x))
}

/// Generates the full-run QPSK waveform, normalized to unit mean power.
///
/// The symbol rate equals the configured bandwidth, so the occupied band
/// after root-raised-cosine shaping is `(1 + beta) * bandwidth`, centered
/// on the carrier. `oversample * sample_rate` must be an integer multiple
/// of the bandwidth so symbols land on the oversampled grid.
pub fn generate_waveform(
    seed: u64,
    cfg: &RadioConfig,
    n_slots: usize,
    oversample: usize,
) -> Result<Waveform> {
    let sps_f = oversample as f64 * cfg.sample_rate / cfg.bandwidth;
    if (sps_f - sps_f.round()).abs() > 1e-9 * sps_f || sps_f.round() < 2.0 {
        return Err(Error::validation(
            "oversample",
            format!("oversample * sample_rate / bandwidth = {sps_f} must be an integer >= 2"),
        ));
    }
    let sps = sps_f.round() as usize;

    let len = (WAVEFORM_LEAD + n_slots * cfg.slot_samples + WAVEFORM_TAIL) * oversample;
    let half = RRC_HALF_SPAN * sps;
    // Taps at every oversampled offset covered by one symbol.
    let taps: Vec<f64> = (0..=2 * half)
        .map(|i| rrc_tap((i as f64 - half as f64) / sps as f64, RRC_BETA))
        .collect();

    let mut samples = vec![Complex64::new(0.0, 0.0); len];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let constellation = [
        Complex64::new(scale, scale),
        Complex64::new(scale, -scale),
        Complex64::new(-scale, scale),
        Complex64::new(-scale, -scale),
    ];

    // Symbol k is centered at oversampled index k * sps; start early enough
    // that index 0 already sees a fully formed signal.
    let k_min = -((RRC_HALF_SPAN + 1) as i64);
    let k_max = (len / sps + RRC_HALF_SPAN + 1) as i64;
    for k in k_min..=k_max {
        let sym = constellation[rng.gen_range(0..4usize)];
        let center = k * sps as i64;
        let lo = center - half as i64;
        for (ti, tap) in taps.iter().enumerate() {
            let j = lo + ti as i64;
            if j >= 0 && (j as usize) < len {
                samples[j as usize] += sym * *tap;
            }
        }
    }

    let power: f64 = samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / len as f64;
    let norm = 1.0 / power.sqrt();
    for s in &mut samples {
        *s *= norm;
    }

    Ok(Waveform {
        samples,
        oversample,
        lead_samples: WAVEFORM_LEAD,
        sample_rate: cfg.sample_rate,
    })
}

/// Renders one path for one slot at a single (phase-center) antenna.
pub fn render_path(
    waveform: &Waveform,
    path: &ScattererPath,
    slot: usize,
    cfg: &RadioConfig,
) -> Result<Vec<Complex64>> {
    let n = cfg.slot_samples;
    let delay_samples = path.delay * cfg.sample_rate;
    let base = (slot * n) as f64 - delay_samples;
    let phase_step = std::f64::consts::TAU * path.doppler / cfg.sample_rate;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let x = waveform
            .value_at(base + i as f64)
            .ok_or(Error::DelayOutOfSpan { delay_s: path.delay })?;
        out.push(x * path.attenuation * Complex64::from_polar(1.0, phase_step * i as f64));
    }
    Ok(out)
}

/// Deterministic per-stream generator: reseeding with the same coordinates
/// reproduces the same draw regardless of evaluation order.
fn stream_rng(seed: u64, tag: u64, slot: u64, antenna: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&tag.to_le_bytes());
    key[16..24].copy_from_slice(&slot.to_le_bytes());
    key[24..32].copy_from_slice(&antenna.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

fn add_complex_noise(rng: &mut ChaCha8Rng, power: f64, row: &mut [Complex64]) {
    if power == 0.0 {
        return;
    }
    let scale = (power / 2.0).sqrt();
    for s in row.iter_mut() {
        let u1: f64 = 1.0 - rng.gen::<f64>();
        let u2: f64 = rng.gen();
        let r = (-2.0 * u1.ln()).sqrt();
        let (sin, cos) = (std::f64::consts::TAU * u2).sin_cos();
        *s += Complex64::new(scale * r * cos, scale * r * sin);
    }
}

/// Sums every path plus noise onto one array for one slot.
///
/// Each path is rendered once and spread over the antennas through the
/// array steering vector at its arrival angle; a path outside the array's
/// (-90, 90) degree field of view is an error.
pub fn synthesize_slot(
    waveform: &Waveform,
    paths: &[ScattererPath],
    noise_power: f64,
    array: ArrayKind,
    slot: usize,
    cfg: &RadioConfig,
    seed: u64,
) -> Result<ArraySlot> {
    let n_ant = match array {
        ArrayKind::Reference => cfg.ref_array_size,
        ArrayKind::Surveillance => cfg.sur_array_size,
    };
    let mut out = ArraySlot::zeros(slot, n_ant, cfg.slot_samples);

    for path in paths {
        let rel = wrap_angle(path.aoa);
        if rel.abs() >= std::f64::consts::FRAC_PI_2 {
            return Err(Error::FovViolation {
                array: match array {
                    ArrayKind::Reference => "reference",
                    ArrayKind::Surveillance => "surveillance",
                },
                aoa_rad: rel,
            });
        }
        let rendered = render_path(waveform, path, slot, cfg)?;
        let steer = steering_vector(n_ant, cfg.element_spacing_wavelengths, rel);
        for (a, &phase) in steer.iter().enumerate() {
            let row = out.row_mut(a);
            for (dst, src) in row.iter_mut().zip(&rendered) {
                *dst += phase * src;
            }
        }
    }

    for a in 0..n_ant {
        let mut rng = stream_rng(seed, array.stream_tag(), slot as u64, a as u64);
        add_complex_noise(&mut rng, noise_power, out.row_mut(a));
    }

    Ok(out)
}

/// Ground truth recorded alongside the synthesized data.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryTruth {
    /// Cartesian state at the start of each slot.
    pub states: Vec<CartesianState>,
    /// The exact bistatic observation of each state.
    pub observations: Vec<Observation>,
}

/// Everything a simulation run produces.
pub struct SceneData {
    pub ref_slots: Vec<ArraySlot>,
    pub sur_slots: Vec<ArraySlot>,
    pub truth: TrajectoryTruth,
}

fn db_to_amplitude(db: f64) -> f64 {
    10.0_f64.powf(db / 20.0)
}

/// The Doppler shift of an echo whose bistatic range changes at
/// `range_rate`: an approaching target (negative rate) shifts up.
pub fn doppler_from_range_rate(range_rate: f64, wavelength: f64) -> f64 {
    -range_rate / wavelength
}

fn path_phase(seed: u64, array: ArrayKind, index: u64) -> Complex64 {
    let mut rng = stream_rng(seed, 2, array.stream_tag(), index);
    Complex64::from_polar(1.0, rng.gen::<f64>() * std::f64::consts::TAU)
}

/// Simulates the whole run described by a scenario.
///
/// Slots are independent once the waveform exists, so they are rendered in
/// parallel; the counter-based noise streams keep the result identical to
/// a sequential evaluation.
pub fn simulate_scene(scn: &Scenario) -> Result<SceneData> {
    let cfg = &scn.radio;
    let g = &scn.geometry;
    let lambda = cfg.wavelength();
    let waveform = generate_waveform(scn.seed, cfg, scn.slots, scn.oversample)?;

    let mut states = Vec::with_capacity(scn.slots);
    let mut observations = Vec::with_capacity(scn.slots);
    for m in 0..scn.slots {
        let state = scn.target.state_at(m as f64 * cfg.cit);
        observations.push(measure(&state, g)?);
        states.push(state);
    }

    // Static surveillance paths: the direct path plus every scatterer.
    // Phases are drawn once per path so static returns stay coherent
    // across slots.
    let los_delay = g.baseline_len / SPEED_OF_LIGHT;
    let los_sur_aoa = wrap_angle(g.baseline_angle - g.sur_broadside);
    let target_amp = db_to_amplitude(scn.target_snr_db);
    let mut static_sur = vec![ScattererPath {
        kind: PathKind::Los,
        attenuation: target_amp
            * db_to_amplitude(scn.direct_path_excess_db)
            * path_phase(scn.seed, ArrayKind::Surveillance, 0),
        delay: los_delay,
        aoa: los_sur_aoa,
        doppler: 0.0,
    }];
    for (i, c) in scn.clutter.iter().enumerate() {
        let d_rx = (c.pos - g.rx_pos).norm();
        let d_tx = (c.pos - g.tx_pos).norm();
        let aoa_global = {
            let d = c.pos - g.rx_pos;
            d.y.atan2(d.x)
        };
        static_sur.push(ScattererPath {
            kind: PathKind::Clutter,
            attenuation: db_to_amplitude(c.snr_db)
                * path_phase(scn.seed, ArrayKind::Surveillance, 1 + i as u64),
            delay: (d_rx + d_tx) / SPEED_OF_LIGHT,
            aoa: wrap_angle(aoa_global - g.sur_broadside),
            doppler: 0.0,
        });
    }
    let target_phase = target_amp
        * path_phase(
            scn.seed,
            ArrayKind::Surveillance,
            1 + scn.clutter.len() as u64,
        );

    let ref_paths = vec![ScattererPath {
        kind: PathKind::Los,
        attenuation: db_to_amplitude(scn.noise.ref_los_snr_db)
            * path_phase(scn.seed, ArrayKind::Reference, 0),
        delay: los_delay,
        aoa: wrap_angle(g.baseline_angle - g.ref_broadside),
        doppler: 0.0,
    }];

    let slots: Result<Vec<(ArraySlot, ArraySlot)>> = (0..scn.slots)
        .into_par_iter()
        .map(|m| {
            let z = &observations[m];
            let mut sur_paths = static_sur.clone();
            sur_paths.push(ScattererPath {
                kind: PathKind::Target,
                attenuation: target_phase,
                delay: z.bistatic_range / SPEED_OF_LIGHT,
                aoa: wrap_angle(z.aoa - g.sur_broadside),
                doppler: doppler_from_range_rate(z.range_rate, lambda),
            });
            let sur = synthesize_slot(
                &waveform,
                &sur_paths,
                scn.noise.sur_noise_power,
                ArrayKind::Surveillance,
                m,
                cfg,
                scn.seed,
            )?;
            let rf = synthesize_slot(
                &waveform,
                &ref_paths,
                scn.noise.ref_noise_power,
                ArrayKind::Reference,
                m,
                cfg,
                scn.seed,
            )?;
            Ok((rf, sur))
        })
        .collect();
    let mut ref_slots = Vec::with_capacity(scn.slots);
    let mut sur_slots = Vec::with_capacity(scn.slots);
    for (rf, sur) in slots? {
        ref_slots.push(rf);
        sur_slots.push(sur);
    }

    Ok(SceneData {
        ref_slots,
        sur_slots,
        truth: TrajectoryTruth {
            states,
            observations,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn small_cfg() -> RadioConfig {
        RadioConfig {
            carrier_freq: 500e6,
            sample_rate: 1e6,
            bandwidth: 0.5e6,
            cit: 4096.0 / 1e6,
            slot_samples: 4096,
            ref_array_size: 2,
            sur_array_size: 4,
            element_spacing_wavelengths: 0.5,
        }
    }

    #[test]
    fn test_waveform_deterministic() {
        let cfg = small_cfg();
        let a = generate_waveform(3, &cfg, 1, 4).unwrap();
        let b = generate_waveform(3, &cfg, 1, 4).unwrap();
        let c = generate_waveform(4, &cfg, 1, 4).unwrap();
        assert_eq!(a.samples, b.samples);
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn test_waveform_unit_power() {
        let cfg = small_cfg();
        let w = generate_waveform(1, &cfg, 1, 4).unwrap();
        let p: f64 = w.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / w.samples.len() as f64;
        assert_abs_diff_eq!(p, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn test_waveform_integer_times_exact() {
        let cfg = small_cfg();
        let w = generate_waveform(1, &cfg, 1, 4).unwrap();
        let direct = w.samples[(100 + WAVEFORM_LEAD) * 4];
        assert_eq!(w.value_at(100.0).unwrap(), direct);
    }

    #[test]
    fn test_waveform_spectrum_confined() {
        // Average periodograms over segments of the on-grid waveform and
        // compare in-band against out-of-band power. The root-raised-
        // cosine edge sits at (1 + beta)/2 * B = 0.3125 MHz; beyond
        // 0.36 MHz the spectrum must be at least 30 dB down.
        let cfg = small_cfg();
        let w = generate_waveform(9, &cfg, 4, 4).unwrap();
        let seg = 1024usize;
        let n_seg = 16;
        let mut psd = vec![0.0f64; seg];
        let mut planner = rustfft::FftPlanner::new();
        let fft = planner.plan_fft_forward(seg);
        for s in 0..n_seg {
            let mut buf: Vec<Complex64> = (0..seg)
                .map(|i| w.value_at((s * seg + i) as f64).unwrap())
                .collect();
            fft.process(&mut buf);
            for (acc, v) in psd.iter_mut().zip(&buf) {
                *acc += v.norm_sqr();
            }
        }
        let bin_hz = cfg.sample_rate / seg as f64;
        let freq = |k: usize| {
            let k = k as f64;
            if k < seg as f64 / 2.0 { k * bin_hz } else { (k as f64 - seg as f64) * bin_hz }
        };
        let mut inband = (0.0, 0usize);
        let mut outband = (0.0, 0usize);
        for k in 0..seg {
            let f = freq(k).abs();
            if f < 0.2e6 {
                inband.0 += psd[k];
                inband.1 += 1;
            } else if f > 0.36e6 {
                outband.0 += psd[k];
                outband.1 += 1;
            }
        }
        let ratio = (outband.0 / outband.1 as f64) / (inband.0 / inband.1 as f64);
        assert!(ratio < 1e-3, "out-of-band leakage ratio {ratio}");
    }

    #[test]
    fn test_render_integer_delay_identity() {
        let cfg = small_cfg();
        let w = generate_waveform(5, &cfg, 2, 4).unwrap();
        let k = 37usize;
        let path = ScattererPath {
            kind: PathKind::Los,
            attenuation: Complex64::new(1.0, 0.0),
            delay: k as f64 / cfg.sample_rate,
            aoa: 0.0,
            doppler: 0.0,
        };
        let out = render_path(&w, &path, 1, &cfg).unwrap();
        for (i, &v) in out.iter().enumerate().step_by(97) {
            let t = (cfg.slot_samples + i) as f64 - k as f64;
            assert_eq!(v, w.value_at(t).unwrap());
        }
    }

    #[test]
    fn test_render_doppler_bin_peak() {
        // A Doppler-shifted copy correlates best at the matching DFT bin:
        // peak of |sum_n y[n] conj(x[n]) e^{-j*2*pi*p*n/N}| over p lands
        // at p = round(f_D * N / f_s).
        let mut cfg = small_cfg();
        cfg.slot_samples = 1024;
        cfg.cit = 1024.0 / cfg.sample_rate;
        let w = generate_waveform(11, &cfg, 1, 4).unwrap();
        let f_d = 7.0 * cfg.sample_rate / cfg.slot_samples as f64;
        let path = ScattererPath {
            kind: PathKind::Target,
            attenuation: Complex64::new(1.0, 0.0),
            delay: 0.0,
            aoa: 0.0,
            doppler: f_d,
        };
        let y = render_path(&w, &path, 0, &cfg).unwrap();
        let x: Vec<Complex64> = (0..cfg.slot_samples)
            .map(|n| w.value_at(n as f64).unwrap())
            .collect();
        let n = cfg.slot_samples as f64;
        let mut best = (0i64, 0.0f64);
        for p in -20i64..=20 {
            let acc: Complex64 = y
                .iter()
                .zip(&x)
                .enumerate()
                .map(|(i, (yi, xi))| {
                    yi * xi.conj()
                        * Complex64::from_polar(
                            1.0,
                            -std::f64::consts::TAU * p as f64 * i as f64 / n,
                        )
                })
                .sum();
            if acc.norm() > best.1 {
                best = (p, acc.norm());
            }
        }
        assert_eq!(best.0, 7);
    }

    #[test]
    fn test_doppler_sign_convention() {
        // Closing geometry (negative range rate) produces a positive shift.
        assert_abs_diff_eq!(doppler_from_range_rate(-14.12, 0.1412), 100.0, epsilon = 1e-9);
        assert!(doppler_from_range_rate(5.0, 0.1412) < 0.0);
    }

    #[test]
    fn test_synthesize_broadside_rows_identical() {
        let cfg = small_cfg();
        let w = generate_waveform(2, &cfg, 1, 4).unwrap();
        let path = ScattererPath {
            kind: PathKind::Los,
            attenuation: Complex64::new(0.5, 0.1),
            delay: 20.0 / cfg.sample_rate,
            aoa: 0.0,
            doppler: 0.0,
        };
        let slot =
            synthesize_slot(&w, &[path], 0.0, ArrayKind::Surveillance, 0, &cfg, 2).unwrap();
        for a in 1..slot.n_antennas {
            assert_eq!(slot.row(0), slot.row(a));
        }
    }

    #[test]
    fn test_synthesize_interelement_phase() {
        // At half-wavelength spacing an off-broadside plane wave advances
        // each element by exp(-j*pi*sin(phi)).
        let cfg = small_cfg();
        let w = generate_waveform(2, &cfg, 1, 4).unwrap();
        let phi = 0.5235987755982988; // 30 degrees
        let path = ScattererPath {
            kind: PathKind::Target,
            attenuation: Complex64::new(1.0, 0.0),
            delay: 5.0 / cfg.sample_rate,
            aoa: phi,
            doppler: 0.0,
        };
        let slot =
            synthesize_slot(&w, &[path], 0.0, ArrayKind::Surveillance, 0, &cfg, 7).unwrap();
        let shift = Complex64::from_polar(1.0, -std::f64::consts::PI * phi.sin());
        for (a, b) in slot.row(0).iter().zip(slot.row(1)) {
            assert_abs_diff_eq!((a * shift).re, b.re, epsilon = 1e-12);
            assert_abs_diff_eq!((a * shift).im, b.im, epsilon = 1e-12);
        }
    }

    #[test]
    fn test_synthesize_linearity() {
        let cfg = small_cfg();
        let w = generate_waveform(2, &cfg, 1, 4).unwrap();
        let p1 = ScattererPath {
            kind: PathKind::Los,
            attenuation: Complex64::new(1.0, 0.0),
            delay: 3.0 / cfg.sample_rate,
            aoa: 0.2,
            doppler: 0.0,
        };
        let p2 = ScattererPath {
            kind: PathKind::Clutter,
            attenuation: Complex64::new(0.0, 0.7),
            delay: 9.5 / cfg.sample_rate,
            aoa: -0.4,
            doppler: 0.0,
        };
        let both =
            synthesize_slot(&w, &[p1, p2], 0.0, ArrayKind::Surveillance, 0, &cfg, 1).unwrap();
        let a = synthesize_slot(&w, &[p1], 0.0, ArrayKind::Surveillance, 0, &cfg, 1).unwrap();
        let b = synthesize_slot(&w, &[p2], 0.0, ArrayKind::Surveillance, 0, &cfg, 1).unwrap();
        for ((s, x), y) in both.samples.iter().zip(&a.samples).zip(&b.samples) {
            assert_abs_diff_eq!(s.re, (x + y).re, epsilon = 1e-12);
            assert_abs_diff_eq!(s.im, (x + y).im, epsilon = 1e-12);
        }
    }

    #[test]
    fn test_synthesize_rejects_rear_hemisphere() {
        let cfg = small_cfg();
        let w = generate_waveform(2, &cfg, 1, 4).unwrap();
        let path = ScattererPath {
            kind: PathKind::Clutter,
            attenuation: Complex64::new(1.0, 0.0),
            delay: 0.0,
            aoa: 1.8,
            doppler: 0.0,
        };
        let err =
            synthesize_slot(&w, &[path], 0.0, ArrayKind::Surveillance, 0, &cfg, 1).unwrap_err();
        assert!(matches!(err, Error::FovViolation { .. }));
    }

    #[test]
    fn test_noise_streams() {
        let cfg = small_cfg();
        let w = generate_waveform(2, &cfg, 1, 4).unwrap();
        let s1 = synthesize_slot(&w, &[], 1.0, ArrayKind::Reference, 0, &cfg, 9).unwrap();
        let s2 = synthesize_slot(&w, &[], 1.0, ArrayKind::Reference, 0, &cfg, 9).unwrap();
        assert_eq!(s1, s2);
        // Different antennas, arrays, and slots all get independent draws.
        assert_ne!(s1.row(0), s1.row(1));
        let sur = synthesize_slot(&w, &[], 1.0, ArrayKind::Surveillance, 0, &cfg, 9).unwrap();
        assert_ne!(s1.row(0), sur.row(0));
        let later = synthesize_slot(&w, &[], 1.0, ArrayKind::Reference, 1, &cfg, 9).unwrap();
        assert_ne!(s1.row(0), later.row(0));
    }

    #[test]
    fn test_noise_power_level() {
        let mut cfg = small_cfg();
        cfg.slot_samples = 65536;
        cfg.cit = 65536.0 / cfg.sample_rate;
        let w = generate_waveform(2, &cfg, 1, 4).unwrap();
        let slot = synthesize_slot(&w, &[], 2.0, ArrayKind::Reference, 0, &cfg, 123).unwrap();
        let p: f64 =
            slot.row(0).iter().map(|s| s.norm_sqr()).sum::<f64>() / slot.n_samples as f64;
        assert_relative_eq!(p, 2.0, max_relative = 0.03);
    }

    #[test]
    fn test_scene_truth_matches_direct_measurement() {
        let scn = Scenario::from_toml_str(include_str!("../configs/desk.toml")).unwrap();
        let scn = scn
            .with_overrides(&crate::scenario::Overrides {
                slots: Some(2),
                ..Default::default()
            })
            .unwrap();
        let scene = simulate_scene(&scn).unwrap();
        assert_eq!(scene.truth.states.len(), 2);
        assert_eq!(scene.ref_slots.len(), 2);
        assert_eq!(scene.sur_slots[0].n_antennas, scn.radio.sur_array_size);
        for m in 0..2 {
            let z = measure(&scene.truth.states[m], &scn.geometry).unwrap();
            assert_abs_diff_eq!(
                z.bistatic_range,
                scene.truth.observations[m].bistatic_range,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn test_scene_bit_identical_rerun() {
        let scn = Scenario::from_toml_str(include_str!("../configs/desk.toml")).unwrap();
        let scn = scn
            .with_overrides(&crate::scenario::Overrides {
                slots: Some(2),
                ..Default::default()
            })
            .unwrap();
        let a = simulate_scene(&scn).unwrap();
        let b = simulate_scene(&scn).unwrap();
        assert_eq!(a.sur_slots[1].samples, b.sur_slots[1].samples);
        assert_eq!(a.ref_slots[0].samples, b.ref_slots[0].samples);
    }
}
