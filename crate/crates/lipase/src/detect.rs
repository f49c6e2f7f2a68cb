//! Per-slot detection chain: beamforming, least-squares clutter
//! cancellation, cross-ambiguity maps, CA-CFAR with clustering, AoA
//! estimation, and observation construction.
//!
//! A slot is processed as one unit. The reference array is beamformed at
//! the known illuminator direction to recover the transmitted waveform;
//! the surveillance array is beamformed along a bank of fixed directions.
//! Every surveillance channel (each beam and each raw antenna) is
//! projected away from the subspace spanned by delayed, Doppler-shifted
//! copies of the reference, which removes the direct path and static
//! clutter. Beams then go through a delay/Doppler cross-ambiguity map and
//! cell-averaging CFAR; detections are clustered across beams, each
//! cluster gets a fine-grained bearing from the per-antenna responses at
//! its peak cell, and the cell indices convert to a bistatic observation.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::geometry::{wrap_angle, Geometry, Observation};
use crate::simulate::{ArraySlot, RadioConfig};
use crate::{Error, Result, SPEED_OF_LIGHT};

/// Steering vector of an `n`-element uniform linear array for a plane wave
/// arriving `aoa` radians off broadside, with `spacing` in wavelengths:
/// element `k` carries `exp(-j*2*pi*k*spacing*sin(aoa))`.
pub fn steering_vector(n: usize, spacing: f64, aoa: f64) -> Vec<Complex64> {
    let step = -std::f64::consts::TAU * spacing * aoa.sin();
    (0..n)
        .map(|k| Complex64::from_polar(1.0, step * k as f64))
        .collect()
}

/// The fixed surveillance beam directions: arcsin of a uniform grid over
/// [-1, 1), which spaces the beams evenly in sine angle.
pub fn beam_grid(n_sur: usize) -> Vec<f64> {
    (0..n_sur)
        .map(|k| (2.0 * k as f64 / n_sur as f64 - 1.0).asin())
        .collect()
}

/// Combines the antennas of a slot with conjugate weights: per sample,
/// `sum_a conj(w[a]) * y_a[n]`. No normalization is applied, so a matched
/// weight yields the full coherent gain of the array.
pub fn beamform(slot: &ArraySlot, weight: &[Complex64]) -> Result<Vec<Complex64>> {
    if weight.len() != slot.n_antennas {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {} antennas",
            weight.len(),
            slot.n_antennas
        )));
    }
    let mut out = vec![Complex64::new(0.0, 0.0); slot.n_samples];
    for (a, w) in weight.iter().enumerate() {
        let wc = w.conj();
        for (dst, src) in out.iter_mut().zip(slot.row(a)) {
            *dst += wc * src;
        }
    }
    Ok(out)
}

/// The reference signal with its history: `sample(n)` for `n < 0` reaches
/// into the previous slot's tail, or reads zero before the recording
/// began.
#[derive(Clone, Copy)]
pub struct RefHistory<'a> {
    pub current: &'a [Complex64],
    pub prev_tail: &'a [Complex64],
}

impl RefHistory<'_> {
    fn sample(&self, n: i64) -> Complex64 {
        if n >= 0 {
            self.current[n as usize]
        } else {
            let j = self.prev_tail.len() as i64 + n;
            if j >= 0 {
                self.prev_tail[j as usize]
            } else {
                Complex64::new(0.0, 0.0)
            }
        }
    }
}

/// Clutter-cancellation regressor dimensions.
///
/// The canceller projects the surveillance signal away from every copy of
/// the reference delayed by `0..=max_delay_samples` samples and shifted by
/// `-max_doppler_bins..=max_doppler_bins` Doppler bins, so it suppresses
/// interference with Doppler in `[-P fs/N, P fs/N]` and delay up to
/// `L / fs`. The same delay span bounds the range-Doppler map.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct CcConfig {
    /// P: one-sided Doppler extent of the clutter subspace, in bins.
    pub max_doppler_bins: usize,
    /// L: maximum clutter delay, in samples.
    pub max_delay_samples: usize,
}

impl CcConfig {
    /// Number of regressor columns, (2P+1)(L+1).
    pub fn n_columns(&self) -> usize {
        (2 * self.max_doppler_bins + 1) * (self.max_delay_samples + 1)
    }

    pub fn validate(&self, slot_samples: usize) -> Result<()> {
        if self.n_columns() >= slot_samples {
            return Err(Error::validation(
                "cc",
                format!(
                    "(2P+1)(L+1) = {} must be smaller than the slot length {}",
                    self.n_columns(),
                    slot_samples
                ),
            ));
        }
        Ok(())
    }
}

/// The regressor matrix: one column per (Doppler bin, delay) pair,
/// `omega_{p,l}[n] = ref[n - l] * e^{j*2*pi*p*n/N}`.
fn build_regressor(reference: RefHistory, cc: &CcConfig) -> DMatrix<Complex64> {
    let n = reference.current.len();
    let p_max = cc.max_doppler_bins as i64;
    let l_max = cc.max_delay_samples as i64;
    let mut omega = DMatrix::zeros(n, cc.n_columns());
    let mut col = 0;
    for p in -p_max..=p_max {
        let step = std::f64::consts::TAU * p as f64 / n as f64;
        for l in 0..=l_max {
            for i in 0..n {
                omega[(i, col)] = reference.sample(i as i64 - l)
                    * Complex64::from_polar(1.0, step * i as f64);
            }
            col += 1;
        }
    }
    omega
}

/// Orthogonal-projection clutter canceller for one slot.
///
/// Holds the thin Q factor of the regressor; cancelling a channel is
/// `x - Q (Q^H x)`, the least-squares residual, without ever forming the
/// N-by-N projection matrix.
pub struct ClutterCanceller {
    q: DMatrix<Complex64>,
}

impl ClutterCanceller {
    pub fn new(reference: RefHistory, cc: &CcConfig) -> Result<ClutterCanceller> {
        let omega = build_regressor(reference, cc);
        let qr = omega.qr();
        let r = qr.r();
        let diag_max = (0..r.nrows())
            .map(|i| r[(i, i)].norm())
            .fold(0.0f64, f64::max);
        let diag_min = (0..r.nrows())
            .map(|i| r[(i, i)].norm())
            .fold(f64::INFINITY, f64::min);
        if diag_max == 0.0 || diag_min < 1e-10 * diag_max {
            return Err(Error::RankDeficient(format!(
                "clutter regressor is rank-deficient (|R_ii| spans {diag_min:.3e}..{diag_max:.3e}); \
                 is the reference signal degenerate?"
            )));
        }
        Ok(ClutterCanceller { q: qr.q() })
    }

    /// Residual of `x` against the clutter subspace.
    pub fn cancel(&self, x: &[Complex64]) -> Vec<Complex64> {
        let xv = DVector::from_column_slice(x);
        let coeffs = self.q.ad_mul(&xv);
        let proj = &self.q * coeffs;
        x.iter().zip(proj.iter()).map(|(a, b)| a - b).collect()
    }
}

/// One-shot form of [`ClutterCanceller`] for a single channel.
pub fn clutter_cancel(
    sur: &[Complex64],
    reference: RefHistory,
    cc: &CcConfig,
) -> Result<Vec<Complex64>> {
    if sur.len() != reference.current.len() {
        return Err(Error::DimensionMismatch(format!(
            "surveillance length {} vs reference length {}",
            sur.len(),
            reference.current.len()
        )));
    }
    Ok(ClutterCanceller::new(reference, cc)?.cancel(sur))
}

/// Delay/Doppler cross-ambiguity surface restricted to a Doppler window.
///
/// Row `l` covers delays of `l` samples; column `p` covers Doppler bin `p`
/// in `-half_bins..=half_bins`, where one bin is `sample_rate / N` Hz.
#[derive(Clone, Debug)]
pub struct RdMap {
    pub n_delay: usize,
    pub half_bins: usize,
    pub slot_samples: usize,
    values: Vec<Complex64>,
}

impl RdMap {
    pub fn n_doppler(&self) -> usize {
        2 * self.half_bins + 1
    }

    fn idx(&self, l: usize, p: isize) -> usize {
        debug_assert!(l < self.n_delay && p.unsigned_abs() <= self.half_bins);
        l * self.n_doppler() + (p + self.half_bins as isize) as usize
    }

    pub fn value(&self, l: usize, p: isize) -> Complex64 {
        self.values[self.idx(l, p)]
    }

    pub fn magnitude(&self, l: usize, p: isize) -> f64 {
        self.value(l, p).norm()
    }

    /// Builds a map from row-major values, columns ordered `-W..=W`.
    pub fn from_values(
        n_delay: usize,
        half_bins: usize,
        slot_samples: usize,
        values: Vec<Complex64>,
    ) -> RdMap {
        assert_eq!(values.len(), n_delay * (2 * half_bins + 1));
        RdMap {
            n_delay,
            half_bins,
            slot_samples,
            values,
        }
    }

    /// Cell with the largest magnitude, for diagnostics and tests.
    pub fn argmax(&self) -> (usize, isize, f64) {
        let mut best = (0usize, 0isize, -1.0f64);
        for l in 0..self.n_delay {
            for p in -(self.half_bins as isize)..=self.half_bins as isize {
                let m = self.magnitude(l, p);
                if m > best.2 {
                    best = (l, p, m);
                }
            }
        }
        best
    }
}

thread_local! {
    static FFT_PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn planned_fft(n: usize) -> Arc<dyn Fft<f64>> {
    FFT_PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n))
}

/// Cross-ambiguity map: `A[l,p] = sum_n sur[n] conj(ref[n-l]) e^{-j2pi pn/N}`,
/// one forward transform per delay row, keeping `|p| <= half_bins`.
pub fn caf(
    sur: &[Complex64],
    reference: RefHistory,
    max_delay: usize,
    half_bins: usize,
) -> Result<RdMap> {
    let n = sur.len();
    if reference.current.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "surveillance length {} vs reference length {}",
            n,
            reference.current.len()
        )));
    }
    if 2 * half_bins + 1 > n {
        return Err(Error::DopplerWindow(format!(
            "window of +-{half_bins} bins does not fit in {n} samples"
        )));
    }
    let fft = planned_fft(n);
    let n_dop = 2 * half_bins + 1;
    let mut values = vec![Complex64::new(0.0, 0.0); (max_delay + 1) * n_dop];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for l in 0..=max_delay {
        for (i, b) in buf.iter_mut().enumerate() {
            *b = sur[i] * reference.sample(i as i64 - l as i64).conj();
        }
        fft.process(&mut buf);
        let row = &mut values[l * n_dop..(l + 1) * n_dop];
        for (c, p) in (-(half_bins as isize)..=half_bins as isize).enumerate() {
            let k = if p >= 0 { p as usize } else { n - p.unsigned_abs() };
            row[c] = buf[k];
        }
    }
    Ok(RdMap {
        n_delay: max_delay + 1,
        half_bins,
        slot_samples: n,
        values,
    })
}

/// The cross-ambiguity response of a single channel at one cell, for
/// per-antenna bearing snapshots.
pub fn rd_response(seq: &[Complex64], reference: RefHistory, l: usize, p: isize) -> Complex64 {
    let n = seq.len();
    let step = -std::f64::consts::TAU * p as f64 / n as f64;
    seq.iter()
        .enumerate()
        .map(|(i, s)| {
            s * reference.sample(i as i64 - l as i64).conj()
                * Complex64::from_polar(1.0, step * i as f64)
        })
        .sum()
}

/// Cell-averaging CFAR window and threshold.
///
/// `guard` and `train` give the one-sided window half-widths as
/// `(Doppler bins, range bins)` pairs. A cell is declared a detection when
/// its magnitude reaches `threshold_factor` times the mean magnitude over
/// the training cells (the total window minus the guard window).
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CfarConfig {
    /// (P_guard, L_guard): guard half-widths in Doppler bins and range bins.
    pub guard: (usize, usize),
    /// (P_train, L_train): training half-widths beyond the guard window.
    pub train: (usize, usize),
    /// Linear magnitude threshold alpha; a table value of x dB converts as
    /// 10^(x/20).
    pub threshold_factor: f64,
    /// One-sided Doppler search limit in Hz; the range-Doppler map and the
    /// candidate search are restricted to this window.
    pub doppler_window: f64,
}

impl CfarConfig {
    /// One-sided Doppler window width in bins for a slot of `n` samples at
    /// `sample_rate`.
    pub fn doppler_half_bins(&self, sample_rate: f64, n: usize) -> usize {
        (self.doppler_window / (sample_rate / n as f64)).floor() as usize
    }

    pub fn validate(&self, sample_rate: f64, slot_samples: usize) -> Result<()> {
        if self.threshold_factor <= 1.0 {
            return Err(Error::validation(
                "cfar.threshold_factor",
                "threshold must exceed 1",
            ));
        }
        if self.doppler_window <= 0.0 {
            return Err(Error::validation(
                "cfar.doppler_window",
                "window must be positive",
            ));
        }
        let half = self.doppler_half_bins(sample_rate, slot_samples);
        if half >= slot_samples / 2 {
            return Err(Error::validation(
                "cfar.doppler_window",
                format!(
                    "window of {half} bins reaches past the unambiguous Doppler span of {} bins",
                    slot_samples / 2
                ),
            ));
        }
        let needed = 2 * (self.guard.0 + self.train.0) + 1;
        let have = 2 * half + 1;
        if have <= needed {
            return Err(Error::validation(
                "cfar",
                format!(
                    "Doppler window of {have} bins cannot hold the CFAR window of {needed} bins"
                ),
            ));
        }
        Ok(())
    }
}

/// CA-CFAR over a map: a cell is kept when its magnitude is at least
/// `threshold_factor` times the training-cell mean. Training windows clip
/// at the range edges (wrapping would mix unrelated delays) and wrap in
/// Doppler, matching the circular DFT axis.
pub fn cfar(map: &RdMap, cfg: &CfarConfig) -> Result<Vec<(usize, isize)>> {
    let w = map.half_bins as isize;
    let n_dop = map.n_doppler() as isize;
    let (pg, lg) = (cfg.guard.0 as isize, cfg.guard.1 as isize);
    let (pt, lt) = (cfg.train.0 as isize, cfg.train.1 as isize);
    let mags: Vec<f64> = map.values.iter().map(|v| v.norm()).collect();
    let mag_at = |l: isize, p: isize| {
        mags[l as usize * n_dop as usize + (p + w) as usize]
    };

    let mut hits = Vec::new();
    for l in 0..map.n_delay as isize {
        for p in -w..=w {
            let mut sum = 0.0;
            let mut count = 0usize;
            for dl in -(lg + lt)..=(lg + lt) {
                let ll = l + dl;
                if ll < 0 || ll >= map.n_delay as isize {
                    continue;
                }
                for dp in -(pg + pt)..=(pg + pt) {
                    if dl.abs() <= lg && dp.abs() <= pg {
                        continue;
                    }
                    // Wrap the Doppler offset onto the window.
                    let mut pp = p + dp;
                    while pp > w {
                        pp -= n_dop;
                    }
                    while pp < -w {
                        pp += n_dop;
                    }
                    sum += mag_at(ll, pp);
                    count += 1;
                }
            }
            if count == 0 {
                return Err(Error::EmptyTrainingSet { l: l as usize, p });
            }
            let noise = sum / count as f64;
            if mag_at(l, p) >= cfg.threshold_factor * noise {
                hits.push((l as usize, p));
            }
        }
    }
    Ok(hits)
}

/// A clustered candidate: the strongest cell of one connected component
/// of the cross-beam detection union.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClusterPeak {
    pub beam: usize,
    pub delay_bin: usize,
    pub doppler_bin: isize,
    pub magnitude: f64,
}

/// Merges per-beam CFAR hits into candidates: 8-connected components over
/// (delay, Doppler) cells (Doppler wraps), each reduced to its maximum-
/// magnitude cell annotated with the beam achieving that maximum.
pub fn cluster(per_beam_hits: &[Vec<(usize, isize)>], maps: &[RdMap]) -> Vec<ClusterPeak> {
    assert_eq!(per_beam_hits.len(), maps.len());
    if maps.is_empty() {
        return Vec::new();
    }
    let w = maps[0].half_bins as isize;
    let n_dop = 2 * w + 1;

    // Best (magnitude, beam) per distinct cell; BTreeMap keeps the scan
    // order deterministic.
    let mut cells: BTreeMap<(usize, isize), (f64, usize)> = BTreeMap::new();
    for (beam, hits) in per_beam_hits.iter().enumerate() {
        for &(l, p) in hits {
            let mag = maps[beam].magnitude(l, p);
            let entry = cells.entry((l, p)).or_insert((mag, beam));
            if mag > entry.0 {
                *entry = (mag, beam);
            }
        }
    }

    let keys: Vec<(usize, isize)> = cells.keys().copied().collect();
    let index: BTreeMap<(usize, isize), usize> =
        keys.iter().enumerate().map(|(i, &k)| (k, i)).collect();
    let mut visited = vec![false; keys.len()];
    let mut peaks = Vec::new();
    for start in 0..keys.len() {
        if visited[start] {
            continue;
        }
        let mut stack = vec![start];
        visited[start] = true;
        let mut best: Option<ClusterPeak> = None;
        while let Some(i) = stack.pop() {
            let (l, p) = keys[i];
            let (mag, beam) = cells[&(l, p)];
            let candidate = ClusterPeak {
                beam,
                delay_bin: l,
                doppler_bin: p,
                magnitude: mag,
            };
            best = Some(match best {
                None => candidate,
                Some(b) => {
                    let better = candidate.magnitude > b.magnitude
                        || (candidate.magnitude == b.magnitude
                            && (candidate.delay_bin, candidate.doppler_bin, candidate.beam)
                                < (b.delay_bin, b.doppler_bin, b.beam));
                    if better {
                        candidate
                    } else {
                        b
                    }
                }
            });
            for dl in -1i64..=1 {
                let ll = l as i64 + dl;
                if ll < 0 {
                    continue;
                }
                for dp in -1isize..=1 {
                    let mut pp = p + dp;
                    if pp > w {
                        pp -= n_dop;
                    }
                    if pp < -w {
                        pp += n_dop;
                    }
                    if let Some(&j) = index.get(&(ll as usize, pp)) {
                        if !visited[j] {
                            visited[j] = true;
                            stack.push(j);
                        }
                    }
                }
            }
        }
        peaks.push(best.unwrap());
    }
    peaks.sort_by(|a, b| {
        (a.delay_bin, a.doppler_bin, a.beam).cmp(&(b.delay_bin, b.doppler_bin, b.beam))
    });
    peaks
}

/// Default bearing search step: 0.1 degree.
pub const AOA_GRID_STEP: f64 = 0.1 * std::f64::consts::PI / 180.0;

/// Fine-grained bearing estimate from a per-antenna snapshot: argmax over
/// a grid of array-relative directions of `|a(theta)^H s|`.
///
/// Grid points are integer multiples of `grid_step` measured from -pi/2,
/// endpoints excluded, so halving the step refines the grid in place.
pub fn estimate_aoa(snapshot: &[Complex64], spacing: f64, grid_step: f64) -> f64 {
    let n_steps = (std::f64::consts::PI / grid_step).ceil() as usize;
    let mut best = (f64::NEG_INFINITY, 0.0);
    for k in 1..n_steps {
        let theta = -std::f64::consts::FRAC_PI_2 + k as f64 * grid_step;
        let steer = steering_vector(snapshot.len(), spacing, theta);
        let obj: Complex64 = steer
            .iter()
            .zip(snapshot)
            .map(|(a, s)| a.conj() * s)
            .sum();
        let obj = obj.norm();
        if obj > best.0 {
            best = (obj, theta);
        }
    }
    best.1
}

/// Converts a candidate cell plus bearing into a bistatic observation:
/// the delay axis starts at the baseline, one Doppler bin is `1/T` Hz,
/// and an up-shifted echo is closing (negative range rate).
pub fn to_observation(
    delay_bin: usize,
    doppler_bin: isize,
    aoa_rel: f64,
    geometry: &Geometry,
    cfg: &RadioConfig,
    slot_samples: usize,
) -> Observation {
    let doppler_hz = doppler_bin as f64 * cfg.sample_rate / slot_samples as f64;
    Observation {
        bistatic_range: geometry.baseline_len
            + delay_bin as f64 * SPEED_OF_LIGHT / cfg.sample_rate,
        range_rate: -cfg.wavelength() * doppler_hz,
        aoa: wrap_angle(geometry.sur_broadside + aoa_rel),
    }
}

/// One detection with its provenance in the map.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Detection {
    pub slot: usize,
    pub observation: Observation,
    pub beam: usize,
    pub delay_bin: usize,
    pub doppler_bin: isize,
    pub magnitude: f64,
}

/// Runs the full chain on one slot.
///
/// `prev_ref` supplies the reference history for delayed regressor copies;
/// `None` (the first slot) zero-pads, which costs at most `L` samples of
/// regressor fidelity out of `N`.
pub fn detect_slot(
    ref_slot: &ArraySlot,
    sur_slot: &ArraySlot,
    prev_ref: Option<&ArraySlot>,
    cfg: &RadioConfig,
    geometry: &Geometry,
    cc_cfg: &CcConfig,
    cfar_cfg: &CfarConfig,
) -> Result<Vec<Detection>> {
    if ref_slot.n_antennas != cfg.ref_array_size
        || sur_slot.n_antennas != cfg.sur_array_size
        || ref_slot.n_samples != sur_slot.n_samples
    {
        return Err(Error::DimensionMismatch(format!(
            "slot shapes ref {}x{} sur {}x{} against configured arrays {}/{}",
            ref_slot.n_antennas,
            ref_slot.n_samples,
            sur_slot.n_antennas,
            sur_slot.n_samples,
            cfg.ref_array_size,
            cfg.sur_array_size
        )));
    }
    let n = sur_slot.n_samples;
    let spacing = cfg.element_spacing_wavelengths;
    let l_max = cc_cfg.max_delay_samples;

    let ref_rel = wrap_angle(geometry.ref_aoa - geometry.ref_broadside);
    let ref_weight = steering_vector(cfg.ref_array_size, spacing, ref_rel);
    let ref_beam = beamform(ref_slot, &ref_weight)?;
    let tail: Vec<Complex64> = match prev_ref {
        Some(prev) => {
            let prev_beam = beamform(prev, &ref_weight)?;
            prev_beam[prev_beam.len() - l_max.min(prev_beam.len())..].to_vec()
        }
        None => Vec::new(),
    };
    let reference = RefHistory {
        current: &ref_beam,
        prev_tail: &tail,
    };

    let canceller = ClutterCanceller::new(reference, cc_cfg)?;
    let half_bins = cfar_cfg.doppler_half_bins(cfg.sample_rate, n);

    let beams = beam_grid(cfg.sur_array_size);
    let beam_results: Result<Vec<(RdMap, Vec<(usize, isize)>)>> = beams
        .par_iter()
        .map(|&beta| {
            let weight = steering_vector(cfg.sur_array_size, spacing, beta);
            let beamed = beamform(sur_slot, &weight)?;
            let clean = canceller.cancel(&beamed);
            let map = caf(&clean, reference, l_max, half_bins)?;
            let hits = cfar(&map, cfar_cfg)?;
            Ok((map, hits))
        })
        .collect();
    let beam_results = beam_results?;
    let maps: Vec<RdMap> = beam_results.iter().map(|(m, _)| m.clone()).collect();
    let hits: Vec<Vec<(usize, isize)>> =
        beam_results.into_iter().map(|(_, h)| h).collect();

    let peaks = cluster(&hits, &maps);
    if peaks.is_empty() {
        return Ok(Vec::new());
    }

    // Per-antenna cleaned channels, needed only at the candidate cells.
    let clean_rows: Vec<Vec<Complex64>> = (0..cfg.sur_array_size)
        .into_par_iter()
        .map(|a| canceller.cancel(sur_slot.row(a)))
        .collect();

    let detections = peaks
        .into_iter()
        .map(|peak| {
            let snapshot: Vec<Complex64> = clean_rows
                .iter()
                .map(|row| rd_response(row, reference, peak.delay_bin, peak.doppler_bin))
                .collect();
            let aoa_rel = estimate_aoa(&snapshot, spacing, AOA_GRID_STEP);
            Detection {
                slot: sur_slot.slot_index,
                observation: to_observation(
                    peak.delay_bin,
                    peak.doppler_bin,
                    aoa_rel,
                    geometry,
                    cfg,
                    n,
                ),
                beam: peak.beam,
                delay_bin: peak.delay_bin,
                doppler_bin: peak.doppler_bin,
                magnitude: peak.magnitude,
            }
        })
        .collect();
    Ok(detections)
}

/// Detects every slot of a run; slots are independent given the reference
/// history, so they run in parallel.
pub fn detect_run(
    ref_slots: &[ArraySlot],
    sur_slots: &[ArraySlot],
    cfg: &RadioConfig,
    geometry: &Geometry,
    cc_cfg: &CcConfig,
    cfar_cfg: &CfarConfig,
) -> Result<Vec<Vec<Detection>>> {
    if ref_slots.len() != sur_slots.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} reference slots vs {} surveillance slots",
            ref_slots.len(),
            sur_slots.len()
        )));
    }
    (0..ref_slots.len())
        .into_par_iter()
        .map(|m| {
            let prev = m.checked_sub(1).map(|i| &ref_slots[i]);
            detect_slot(
                &ref_slots[m],
                &sur_slots[m],
                prev,
                cfg,
                geometry,
                cc_cfg,
                cfar_cfg,
            )
        })
        .collect()
}
