//! Multi-target tracking: two state models, gated two-stage assignment,
//! tentative/confirmed lifecycle management, and KF/EKF correction.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector, Vector2};

use crate::geometry::{
    self, wrap_angle, CartesianState, Geometry, Observation, RangeRateInversion,
};
use crate::{Error, Result};

/// Which state space the tracker runs in.
///
/// `Bistatic` tracks `[R, Rdot, Rddot, theta, thetadot]` with a linear
/// measurement model; `Cartesian` tracks `[x, vx, y, vy]` with the
/// nonlinear bistatic measurement function linearized at the prediction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackMode {
    Bistatic,
    #[default]
    Cartesian,
}

/// Tracker tuning: gate, lifecycle spans, and noise levels.
///
/// Angles are radians here; the scenario file accepts degrees and converts
/// at load.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrackerConfig {
    pub mode: TrackMode,
    /// Gating threshold gamma on the squared Mahalanobis distance.
    pub gate: f64,
    /// Consecutive associated slots needed to confirm a tentative track.
    pub confirm_slots: usize,
    /// Slots without association after which a track is deleted.
    pub delete_slots: usize,
    /// Measurement noise sigma_R, meters.
    pub sigma_range: f64,
    /// Measurement noise sigma_Rdot, m/s.
    pub sigma_range_rate: f64,
    /// Measurement noise sigma_theta, radians.
    pub sigma_aoa: f64,
    /// Bistatic process noise sigma_Rddot, m/s^2.
    pub accel_noise_range: f64,
    /// Bistatic process noise sigma_thetaddot, rad/s^2.
    pub accel_noise_aoa: f64,
    /// Cartesian process noise sigma_xddot, m/s^2.
    pub accel_noise_x: f64,
    /// Cartesian process noise sigma_yddot, m/s^2.
    pub accel_noise_y: f64,
    /// Initial sigma for the unobserved range acceleration, m/s^2.
    pub init_sigma0_accel: f64,
    /// Initial sigma for the unobserved AoA rate, rad/s.
    pub init_sigma0_aoa_rate: f64,
    /// Velocity prior half-range for Cartesian initialization, m/s.
    pub init_vmax: f64,
    /// Velocity convention used when inverting observations.
    pub range_rate_inversion: RangeRateInversion,
    /// Slot duration T, seconds; filled from the radio config at load.
    pub slot_duration: f64,
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.gate <= 0.0 {
            return Err(Error::validation("tracker.gate", "gate must be positive"));
        }
        if self.confirm_slots == 0 || self.confirm_slots > self.delete_slots {
            return Err(Error::validation(
                "tracker.confirm_slots",
                "need 1 <= confirm_slots <= delete_slots",
            ));
        }
        for (name, v) in [
            ("tracker.sigma_range", self.sigma_range),
            ("tracker.sigma_range_rate", self.sigma_range_rate),
            ("tracker.sigma_aoa", self.sigma_aoa),
            ("tracker.accel_noise_range", self.accel_noise_range),
            ("tracker.accel_noise_aoa", self.accel_noise_aoa),
            ("tracker.accel_noise_x", self.accel_noise_x),
            ("tracker.accel_noise_y", self.accel_noise_y),
            ("tracker.init_sigma0_accel", self.init_sigma0_accel),
            ("tracker.init_sigma0_aoa_rate", self.init_sigma0_aoa_rate),
            ("tracker.init_vmax", self.init_vmax),
            ("tracker.slot_duration", self.slot_duration),
        ] {
            if !(v > 0.0) {
                return Err(Error::validation(name, "must be positive"));
            }
        }
        Ok(())
    }
}

/// Lifecycle stage of a track.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackStatus {
    Tentative,
    Confirmed,
}

/// One maintained track: the current (state, covariance) plus the
/// association flags and per-slot history the lifecycle rules read.
#[derive(Clone, Debug)]
pub struct Track {
    pub id: u64,
    pub status: TrackStatus,
    pub state: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub born_slot: usize,
    /// Association flags for the most recent slots, newest last, trimmed
    /// to the deletion window.
    pub association_history: VecDeque<bool>,
    /// Updated (state, covariance) per slot since birth.
    pub state_history: Vec<(DVector<f64>, DMatrix<f64>)>,
}

impl Track {
    fn record_slot(&mut self, associated: bool, keep: usize) {
        self.association_history.push_back(associated);
        while self.association_history.len() > keep {
            self.association_history.pop_front();
        }
    }

    fn trailing(&self, n: usize, value: bool) -> bool {
        self.association_history.len() >= n
            && self.association_history.iter().rev().take(n).all(|&b| b == value)
    }
}

fn meas_cov(cfg: &TrackerConfig) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_column_slice(&[
        cfg.sigma_range * cfg.sigma_range,
        cfg.sigma_range_rate * cfg.sigma_range_rate,
        cfg.sigma_aoa * cfg.sigma_aoa,
    ]))
}

/// State transition and process noise for one slot step, per mode.
fn transition(cfg: &TrackerConfig) -> (DMatrix<f64>, DMatrix<f64>) {
    let t = cfg.slot_duration;
    let t2 = t * t;
    match cfg.mode {
        TrackMode::Bistatic => {
            let f = DMatrix::from_row_slice(
                5,
                5,
                &[
                    1.0, t, t2 / 2.0, 0.0, 0.0,
                    0.0, 1.0, t, 0.0, 0.0,
                    0.0, 0.0, 1.0, 0.0, 0.0,
                    0.0, 0.0, 0.0, 1.0, t,
                    0.0, 0.0, 0.0, 0.0, 1.0,
                ],
            );
            let qr = cfg.accel_noise_range * cfg.accel_noise_range;
            let qa = cfg.accel_noise_aoa * cfg.accel_noise_aoa;
            let mut q = DMatrix::zeros(5, 5);
            let range_block = [
                [t2 * t2 / 4.0, t2 * t / 2.0, t2 / 2.0],
                [t2 * t / 2.0, t2, t],
                [t2 / 2.0, t, 1.0],
            ];
            for (i, row) in range_block.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    q[(i, j)] = qr * v;
                }
            }
            let aoa_block = [[t2 * t2 / 4.0, t2 * t / 2.0], [t2 * t / 2.0, t2]];
            for (i, row) in aoa_block.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    q[(3 + i, 3 + j)] = qa * v;
                }
            }
            (f, q)
        }
        TrackMode::Cartesian => {
            let f = DMatrix::from_row_slice(
                4,
                4,
                &[
                    1.0, t, 0.0, 0.0,
                    0.0, 1.0, 0.0, 0.0,
                    0.0, 0.0, 1.0, t,
                    0.0, 0.0, 0.0, 1.0,
                ],
            );
            let block = [[t2 * t2 / 4.0, t2 * t / 2.0], [t2 * t / 2.0, t2]];
            let mut q = DMatrix::zeros(4, 4);
            for (axis, qv) in [
                cfg.accel_noise_x * cfg.accel_noise_x,
                cfg.accel_noise_y * cfg.accel_noise_y,
            ]
            .into_iter()
            .enumerate()
            {
                for (i, row) in block.iter().enumerate() {
                    for (j, v) in row.iter().enumerate() {
                        q[(2 * axis + i, 2 * axis + j)] = qv * v;
                    }
                }
            }
            (f, q)
        }
    }
}

fn cartesian_state(state: &DVector<f64>) -> CartesianState {
    CartesianState {
        pos: Vector2::new(state[0], state[2]),
        vel: Vector2::new(state[1], state[3]),
    }
}

/// Measurement prediction h(s) and its matrix H for the mode: a constant
/// selector in bistatic mode, the measurement Jacobian at the state in
/// Cartesian mode.
fn measurement_model(
    state: &DVector<f64>,
    cfg: &TrackerConfig,
    geometry: &Geometry,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    match cfg.mode {
        TrackMode::Bistatic => {
            let h = DVector::from_column_slice(&[state[0], state[1], state[3]]);
            let mut bigh = DMatrix::zeros(3, 5);
            bigh[(0, 0)] = 1.0;
            bigh[(1, 1)] = 1.0;
            bigh[(2, 3)] = 1.0;
            Ok((h, bigh))
        }
        TrackMode::Cartesian => {
            let s = cartesian_state(state);
            let z = geometry::measure(&s, geometry)?;
            let jac = geometry::jacobian(&s, geometry)?;
            let h = DVector::from_column_slice(&[z.bistatic_range, z.range_rate, z.aoa]);
            let bigh = DMatrix::from_fn(3, 4, |i, j| jac[(i, j)]);
            Ok((h, bigh))
        }
    }
}

fn wrapped_residual(z: &Observation, h: &DVector<f64>) -> DVector<f64> {
    DVector::from_column_slice(&[
        z.bistatic_range - h[0],
        z.range_rate - h[1],
        wrap_angle(z.aoa - h[2]),
    ])
}

fn symmetrized(p: DMatrix<f64>) -> DMatrix<f64> {
    let pt = p.transpose();
    (p + pt) * 0.5
}

/// Starts a track from a single observation.
///
/// Bistatic mode embeds the observation directly and leaves the
/// unobserved derivative components at zero with the configured prior
/// sigmas. Cartesian mode inverts the observation to a plane state; its
/// position covariance comes from the closed-form inversion sensitivities
/// and the velocity variance from the range-rate noise plus a uniform
/// speed prior.
pub fn init_track(
    z: &Observation,
    cfg: &TrackerConfig,
    geometry: &Geometry,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    match cfg.mode {
        TrackMode::Bistatic => {
            let state = DVector::from_column_slice(&[
                z.bistatic_range,
                z.range_rate,
                0.0,
                z.aoa,
                0.0,
            ]);
            let cov = DMatrix::from_diagonal(&DVector::from_column_slice(&[
                cfg.sigma_range * cfg.sigma_range,
                cfg.sigma_range_rate * cfg.sigma_range_rate,
                cfg.init_sigma0_accel * cfg.init_sigma0_accel,
                cfg.sigma_aoa * cfg.sigma_aoa,
                cfg.init_sigma0_aoa_rate * cfg.init_sigma0_aoa_rate,
            ]));
            Ok((state, cov))
        }
        TrackMode::Cartesian => {
            let s = geometry::invert_with(z, geometry, cfg.range_rate_inversion)?;
            let pos_cov = geometry::position_covariance(
                z,
                geometry,
                cfg.sigma_range * cfg.sigma_range,
                cfg.sigma_aoa * cfg.sigma_aoa,
            );
            let u = (s.pos - geometry.rx_pos).normalize()
                + (s.pos - geometry.tx_pos).normalize();
            let sig_v2 = (cfg.sigma_range_rate / u.norm()).powi(2)
                + cfg.init_vmax * cfg.init_vmax / 3.0;
            let state =
                DVector::from_column_slice(&[s.pos.x, s.vel.x, s.pos.y, s.vel.y]);
            let mut cov = DMatrix::zeros(4, 4);
            cov[(0, 0)] = pos_cov[(0, 0)];
            cov[(0, 2)] = pos_cov[(0, 1)];
            cov[(2, 0)] = pos_cov[(1, 0)];
            cov[(2, 2)] = pos_cov[(1, 1)];
            cov[(1, 1)] = sig_v2;
            cov[(3, 3)] = sig_v2;
            Ok((state, cov))
        }
    }
}

/// One motion-model step: s to F s, P to F P F^T + Q.
pub fn predict(
    state: &DVector<f64>,
    cov: &DMatrix<f64>,
    cfg: &TrackerConfig,
) -> (DVector<f64>, DMatrix<f64>) {
    let (f, q) = transition(cfg);
    let mut s = &f * state;
    if cfg.mode == TrackMode::Bistatic {
        s[3] = wrap_angle(s[3]);
    }
    let p = symmetrized(&f * cov * f.transpose() + q);
    (s, p)
}

/// Gating decision and assignment cost for one (track, observation) pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gate {
    pub inside: bool,
    pub cost: f64,
}

fn innovation_cholesky(
    state: &DVector<f64>,
    cov: &DMatrix<f64>,
    cfg: &TrackerConfig,
    geometry: &Geometry,
) -> Result<(DVector<f64>, DMatrix<f64>, nalgebra::Cholesky<f64, nalgebra::Dyn>)> {
    let (h, bigh) = measurement_model(state, cfg, geometry)?;
    let w = &bigh * cov * bigh.transpose() + meas_cov(cfg);
    let chol = w.cholesky().ok_or_else(|| {
        Error::SingularMatrix("innovation covariance is not positive definite".to_string())
    })?;
    Ok((h, bigh, chol))
}

/// Squared Mahalanobis gate against gamma plus the log-volume penalty
/// ln|W| that makes up the assignment cost.
pub fn gate_and_cost(
    z: &Observation,
    state: &DVector<f64>,
    cov: &DMatrix<f64>,
    cfg: &TrackerConfig,
    geometry: &Geometry,
) -> Result<Gate> {
    let (h, _, chol) = innovation_cholesky(state, cov, cfg, geometry)?;
    let r = wrapped_residual(z, &h);
    let m2 = r.dot(&chol.solve(&r));
    let l = chol.l();
    let ln_det = 2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>();
    Ok(Gate {
        inside: m2 <= cfg.gate,
        cost: m2 + ln_det,
    })
}

/// Measurement update with gain K = P H^T W^-1, Joseph-form covariance,
/// and a wrapped AoA innovation.
pub fn correct(
    state: &DVector<f64>,
    cov: &DMatrix<f64>,
    z: &Observation,
    cfg: &TrackerConfig,
    geometry: &Geometry,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let (h, bigh, chol) = innovation_cholesky(state, cov, cfg, geometry)?;
    let k = cov * bigh.transpose() * chol.inverse();
    let r = wrapped_residual(z, &h);
    let mut s = state + &k * &r;
    if cfg.mode == TrackMode::Bistatic {
        s[3] = wrap_angle(s[3]);
    }
    let n = state.len();
    let i_kh = DMatrix::identity(n, n) - &k * &bigh;
    let p = &i_kh * cov * i_kh.transpose() + &k * meas_cov(cfg) * k.transpose();
    Ok((s, symmetrized(p)))
}

/// Minimum-cost maximum-cardinality one-to-one assignment.
///
/// `costs[i][j]` is the cost of pairing row i with column j, with
/// `f64::INFINITY` marking infeasible pairs. Cardinality is maximized
/// first (leaving a feasible pair unmatched is never optimal here), then
/// total cost; built by successive shortest augmenting paths, which
/// handles the negative costs a log-volume penalty can produce. Ties
/// resolve toward lower column, then lower row indices.
pub fn assign(costs: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let n_rows = costs.len();
    let n_cols = costs.first().map_or(0, |r| r.len());
    let mut match_row: Vec<Option<usize>> = vec![None; n_rows];
    let mut match_col: Vec<Option<usize>> = vec![None; n_cols];

    loop {
        // Bellman-Ford over the alternating-path graph: forward edges go
        // row -> col with the pair cost, backward edges col -> its matched
        // row with the negated cost.
        let mut dist_row = vec![f64::INFINITY; n_rows];
        let mut dist_col = vec![f64::INFINITY; n_cols];
        let mut parent_col: Vec<Option<usize>> = vec![None; n_cols];
        for (i, d) in dist_row.iter_mut().enumerate() {
            if match_row[i].is_none() {
                *d = 0.0;
            }
        }
        for _ in 0..n_rows + n_cols + 1 {
            let mut changed = false;
            for i in 0..n_rows {
                if dist_row[i].is_finite() {
                    for j in 0..n_cols {
                        let c = costs[i][j];
                        if c.is_finite() && match_col[j] != Some(i) {
                            let cand = dist_row[i] + c;
                            if cand < dist_col[j] {
                                dist_col[j] = cand;
                                parent_col[j] = Some(i);
                                changed = true;
                            }
                        }
                    }
                }
            }
            for j in 0..n_cols {
                if dist_col[j].is_finite() {
                    if let Some(i) = match_col[j] {
                        let cand = dist_col[j] - costs[i][j];
                        if cand < dist_row[i] {
                            dist_row[i] = cand;
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }

        let mut best: Option<(f64, usize)> = None;
        for j in 0..n_cols {
            if match_col[j].is_none() && dist_col[j].is_finite() {
                if best.is_none_or(|(d, _)| dist_col[j] < d) {
                    best = Some((dist_col[j], j));
                }
            }
        }
        let Some((_, mut j)) = best else { break };
        loop {
            let i = parent_col[j].expect("augmenting path is connected");
            let j_prev = match_row[i];
            match_col[j] = Some(i);
            match_row[i] = Some(j);
            match j_prev {
                None => break,
                Some(jp) => j = jp,
            }
        }
    }

    let mut pairs: Vec<(usize, usize)> = match_row
        .iter()
        .enumerate()
        .filter_map(|(i, &j)| j.map(|j| (i, j)))
        .collect();
    pairs.sort();
    pairs
}

/// Converts a track state to a plane position: directly in Cartesian
/// mode, through the range/AoA inversion in bistatic mode.
pub fn track_to_position(
    state: &DVector<f64>,
    mode: TrackMode,
    geometry: &Geometry,
) -> Result<Vector2<f64>> {
    match mode {
        TrackMode::Cartesian => Ok(Vector2::new(state[0], state[2])),
        TrackMode::Bistatic => {
            let z = Observation {
                bistatic_range: state[0],
                range_rate: state[1],
                aoa: state[3],
            };
            Ok(geometry::invert(&z, geometry)?.pos)
        }
    }
}

/// What one tracker step did: which observations extended which tracks,
/// and the birth/death bookkeeping.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepSummary {
    pub slot: usize,
    /// (track id, observation index) pairs, both assignment stages merged.
    pub associations: Vec<(u64, usize)>,
    pub spawned: Vec<u64>,
    pub deleted: Vec<u64>,
}

/// The sequential multi-target tracker: predict, two-stage assignment,
/// lifecycle maintenance, correction.
pub struct Tracker {
    cfg: TrackerConfig,
    geometry: Geometry,
    next_id: u64,
    slot: usize,
    tracks: Vec<Track>,
}

impl Tracker {
    pub fn new(cfg: TrackerConfig, geometry: Geometry) -> Tracker {
        Tracker {
            cfg,
            geometry,
            next_id: 0,
            slot: 0,
            tracks: Vec::new(),
        }
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn confirmed(&self) -> impl Iterator<Item = &Track> {
        self.tracks.iter().filter(|t| t.status == TrackStatus::Confirmed)
    }

    pub fn tentative(&self) -> impl Iterator<Item = &Track> {
        self.tracks.iter().filter(|t| t.status == TrackStatus::Tentative)
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    /// Next slot index to be processed.
    pub fn slot(&self) -> usize {
        self.slot
    }

    fn stage_costs(
        &self,
        rows: &[usize],
        cols: &[usize],
        observations: &[Observation],
    ) -> Result<Vec<Vec<f64>>> {
        let mut costs = vec![vec![f64::INFINITY; cols.len()]; rows.len()];
        for (ri, &ti) in rows.iter().enumerate() {
            let track = &self.tracks[ti];
            for (ci, &oi) in cols.iter().enumerate() {
                let gate = gate_and_cost(
                    &observations[oi],
                    &track.state,
                    &track.covariance,
                    &self.cfg,
                    &self.geometry,
                )?;
                if gate.inside {
                    costs[ri][ci] = gate.cost;
                }
            }
        }
        Ok(costs)
    }

    /// Processes one slot of observations: predicts every track, runs the
    /// confirmed-stage then tentative-stage assignments, corrects the
    /// associated tracks and coasts the rest, applies the confirmation
    /// and deletion rules, and spawns tentative tracks from the leftover
    /// observations.
    pub fn step(&mut self, observations: &[Observation]) -> Result<StepSummary> {
        let slot = self.slot;
        let keep = self.cfg.delete_slots.max(self.cfg.confirm_slots);

        for track in &mut self.tracks {
            let (s, p) = predict(&track.state, &track.covariance, &self.cfg);
            track.state = s;
            track.covariance = p;
        }

        let confirmed_rows: Vec<usize> = (0..self.tracks.len())
            .filter(|&i| self.tracks[i].status == TrackStatus::Confirmed)
            .collect();
        let all_obs: Vec<usize> = (0..observations.len()).collect();
        let stage1 = assign(&self.stage_costs(&confirmed_rows, &all_obs, observations)?);

        let mut obs_taken = vec![false; observations.len()];
        let mut track_obs: Vec<Option<usize>> = vec![None; self.tracks.len()];
        for &(ri, ci) in &stage1 {
            track_obs[confirmed_rows[ri]] = Some(all_obs[ci]);
            obs_taken[all_obs[ci]] = true;
        }

        let tentative_rows: Vec<usize> = (0..self.tracks.len())
            .filter(|&i| self.tracks[i].status == TrackStatus::Tentative)
            .collect();
        let free_obs: Vec<usize> = (0..observations.len())
            .filter(|&i| !obs_taken[i])
            .collect();
        let stage2 = assign(&self.stage_costs(&tentative_rows, &free_obs, observations)?);
        for &(ri, ci) in &stage2 {
            track_obs[tentative_rows[ri]] = Some(free_obs[ci]);
            obs_taken[free_obs[ci]] = true;
        }

        let mut summary = StepSummary {
            slot,
            ..StepSummary::default()
        };
        for (ti, track) in self.tracks.iter_mut().enumerate() {
            match track_obs[ti] {
                Some(oi) => {
                    let (s, p) = correct(
                        &track.state,
                        &track.covariance,
                        &observations[oi],
                        &self.cfg,
                        &self.geometry,
                    )?;
                    track.state = s;
                    track.covariance = p;
                    track.record_slot(true, keep);
                    summary.associations.push((track.id, oi));
                }
                None => track.record_slot(false, keep),
            }
            if track.status == TrackStatus::Tentative
                && track.trailing(self.cfg.confirm_slots, true)
            {
                track.status = TrackStatus::Confirmed;
            }
            track
                .state_history
                .push((track.state.clone(), track.covariance.clone()));
        }

        let delete_after = self.cfg.delete_slots;
        let deleted: Vec<u64> = self
            .tracks
            .iter()
            .filter(|t| t.trailing(delete_after, false))
            .map(|t| t.id)
            .collect();
        self.tracks.retain(|t| !t.trailing(delete_after, false));
        summary.deleted = deleted;

        for (oi, z) in observations.iter().enumerate() {
            if obs_taken[oi] {
                continue;
            }
            let (state, covariance) = init_track(z, &self.cfg, &self.geometry)?;
            let id = self.next_id;
            self.next_id += 1;
            let mut track = Track {
                id,
                status: TrackStatus::Tentative,
                state: state.clone(),
                covariance: covariance.clone(),
                born_slot: slot,
                association_history: VecDeque::new(),
                state_history: vec![(state, covariance)],
            };
            track.record_slot(true, keep);
            self.tracks.push(track);
            summary.spawned.push(id);
        }

        self.slot += 1;
        Ok(summary)
    }
}
