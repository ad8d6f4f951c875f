//! Frame-by-frame tracker: Kalman prediction, two-stage Kuhn-Munkres
//! association split by tracking quality, feature aggregation and tracklet
//! lifecycle management.
//!
//! Each call to [`OnlineTracker::step`] performs, in order:
//!
//! 1. affinity between every live tracklet (at its predicted state) and every
//!    detection of the frame;
//! 2. split of the tracklets into a high-quality set (quality `> tau_t`) and
//!    a low-quality set;
//! 3. matching of the high set against all detections, then of the stage-one
//!    leftovers plus the low set against the remaining detections, each
//!    stage gated at `tau_a`;
//! 4. Kalman update and feature aggregation for matched tracklets, prediction
//!    for unmatched ones (finished once lost for more than `tau_m` frames),
//!    new tracklets for unmatched detections;
//! 5. removal of tracklets whose center left the image.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::affinity::{affinity_matrix, AffinityParams, TrackletSnapshot};
use crate::assignment::solve_max_gated;
use crate::error::{Error, Result};
use crate::mot_data::{AppearanceFeature, BoundingBox, Detection, FrameSet, ImageSize, Trajectory};
use crate::motion::{MotionNoiseConfig, MotionState};

pub type TrackId = u64;

/// How a matched detection's feature is folded into the tracklet's feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureAggregation {
    /// Element-wise mean of the current and new feature, renormalized.
    #[default]
    Mean,
    /// Mean over every feature associated so far, renormalized.
    RunningMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineConfig {
    pub affinity: AffinityParams,
    /// Quality split threshold.
    pub tau_t: f64,
    /// Minimum affinity for a successful association.
    pub tau_a: f64,
    /// Frames a tracklet may stay unmatched before it is finished.
    pub tau_m: u32,
    pub aggregation: FeatureAggregation,
    pub motion: MotionNoiseConfig,
}

impl Default for OnlineConfig {
    fn default() -> Self {
        OnlineConfig {
            affinity: AffinityParams::default(),
            tau_t: 0.5,
            tau_a: 0.4,
            tau_m: 100,
            aggregation: FeatureAggregation::Mean,
            motion: MotionNoiseConfig::default(),
        }
    }
}

impl OnlineConfig {
    pub fn validate(&self) -> Result<()> {
        self.affinity.validate()?;
        self.motion.validate()?;
        if !(0.0..=1.0).contains(&self.tau_t) {
            return Err(Error::config(format!(
                "tau_t must lie in [0, 1], got {}",
                self.tau_t
            )));
        }
        if !(-1.0..=1.0).contains(&self.tau_a) {
            return Err(Error::config(format!(
                "tau_a must lie in [-1, 1], got {}",
                self.tau_a
            )));
        }
        if self.tau_m < 1 {
            return Err(Error::config("tau_m must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackState {
    Active,
    Lost,
    Finished,
}

/// One associated box: the frame, the detection box and its index in the
/// frame's detection list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackEntry {
    pub frame: u32,
    pub bbox: BoundingBox,
    pub detection: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tracklet {
    id: TrackId,
    motion: MotionState,
    feature: AppearanceFeature,
    couples: Vec<f64>,
    frames_since_match: u32,
    state: TrackState,
    history: Vec<TrackEntry>,
}

/// Mean couple affinity saturated by `1 - exp(-w3 * sqrt(length))`; 0 for an
/// empty history.
pub fn quality(couples: &[f64], w3: f64) -> f64 {
    if couples.is_empty() {
        return 0.0;
    }
    let n = couples.len() as f64;
    let mean = couples.iter().sum::<f64>() / n;
    mean * (1.0 - (-w3 * n.sqrt()).exp())
}

/// Element-wise mean renormalized to unit length. A zero mean keeps `old`.
pub fn aggregate_feature(
    old: &AppearanceFeature,
    new: &AppearanceFeature,
) -> Result<AppearanceFeature> {
    weighted_mean(old, 1.0, new)
}

fn weighted_mean(
    old: &AppearanceFeature,
    old_weight: f64,
    new: &AppearanceFeature,
) -> Result<AppearanceFeature> {
    if old.dim() != new.dim() {
        return Err(Error::contract(format!(
            "feature dimensions differ: {} vs {}",
            old.dim(),
            new.dim()
        )));
    }
    let total = old_weight + 1.0;
    let mean: Vec<f64> = old
        .values()
        .iter()
        .zip(new.values())
        .map(|(a, b)| (a * old_weight + b) / total)
        .collect();
    match AppearanceFeature::new(mean) {
        Ok(f) => Ok(f.normalized()),
        Err(_) => Ok(old.clone()),
    }
}

impl Tracklet {
    pub fn new(
        id: TrackId,
        det_index: usize,
        det: &Detection,
        motion: &MotionNoiseConfig,
    ) -> Result<Self> {
        let feature = det
            .feature
            .as_ref()
            .ok_or_else(|| {
                Error::contract(format!("detection in frame {} has no feature", det.frame))
            })?
            .normalized();
        Ok(Tracklet {
            id,
            motion: MotionState::init(det, motion),
            feature,
            couples: Vec::new(),
            frames_since_match: 0,
            state: TrackState::Active,
            history: vec![TrackEntry {
                frame: det.frame,
                bbox: det.bbox,
                detection: det_index,
            }],
        })
    }

    pub fn id(&self) -> TrackId {
        self.id
    }

    /// Number of successful associations.
    pub fn length(&self) -> usize {
        self.couples.len()
    }

    pub fn couples(&self) -> &[f64] {
        &self.couples
    }

    pub fn quality(&self, w3: f64) -> f64 {
        quality(&self.couples, w3)
    }

    pub fn feature(&self) -> &AppearanceFeature {
        &self.feature
    }

    pub fn motion(&self) -> &MotionState {
        &self.motion
    }

    pub fn state(&self) -> TrackState {
        self.state
    }

    pub fn frames_since_match(&self) -> u32 {
        self.frames_since_match
    }

    pub fn history(&self) -> &[TrackEntry] {
        &self.history
    }

    pub fn to_trajectory(&self) -> Trajectory {
        let mut t = Trajectory::new(self.id);
        for e in &self.history {
            t.push_detected(e.frame, e.bbox)
                .expect("history frames are strictly increasing");
        }
        t
    }

    fn associate(
        &mut self,
        predicted: MotionState,
        frame: u32,
        det_index: usize,
        det: &Detection,
        affinity: f64,
        mode: FeatureAggregation,
    ) -> Result<()> {
        let new = det
            .feature
            .as_ref()
            .ok_or_else(|| Error::contract("matched detection has no feature"))?;
        self.feature = match mode {
            FeatureAggregation::Mean => aggregate_feature(&self.feature, new)?,
            FeatureAggregation::RunningMean => {
                weighted_mean(&self.feature, self.history.len() as f64, &new.normalized())?
            }
        };
        self.motion = predicted.update(det);
        self.couples.push(affinity);
        self.frames_since_match = 0;
        self.state = TrackState::Active;
        self.history.push(TrackEntry {
            frame,
            bbox: det.bbox,
            detection: det_index,
        });
        Ok(())
    }
}

/// Internal record of one tracker step, exposed for inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub frame: u32,
    /// Tracklets in row order of `affinity`.
    pub rows: Vec<TrackId>,
    pub affinity: DMatrix<f64>,
    pub high: Vec<TrackId>,
    pub low: Vec<TrackId>,
    /// `(tracklet, detection index)` pairs accepted in each stage.
    pub stage_one: Vec<(TrackId, usize)>,
    pub stage_two: Vec<(TrackId, usize)>,
    pub created: Vec<TrackId>,
    /// Tracklets finished for being lost longer than `tau_m`.
    pub expired: Vec<TrackId>,
    /// Candidates dropped because their center left the image.
    pub out_of_border: Vec<TrackId>,
    /// Boxes emitted for this frame (matched or newly created tracklets).
    pub outputs: Vec<(TrackId, BoundingBox)>,
}

/// Tracker state for one sequence.
#[derive(Debug, Clone)]
pub struct OnlineTracker {
    cfg: OnlineConfig,
    image: Option<ImageSize>,
    live: Vec<Tracklet>,
    finished: Vec<Tracklet>,
    next_id: TrackId,
    last_frame: u32,
}

impl OnlineTracker {
    pub fn new(cfg: OnlineConfig, image: Option<ImageSize>) -> Result<Self> {
        cfg.validate()?;
        Ok(OnlineTracker {
            cfg,
            image,
            live: Vec::new(),
            finished: Vec::new(),
            next_id: 1,
            last_frame: 0,
        })
    }

    pub fn config(&self) -> &OnlineConfig {
        &self.cfg
    }

    /// Active and lost tracklets.
    pub fn live(&self) -> &[Tracklet] {
        &self.live
    }

    pub fn finished(&self) -> &[Tracklet] {
        &self.finished
    }

    pub fn step(&mut self, frame: u32, detections: &[Detection]) -> Result<StepReport> {
        if frame <= self.last_frame {
            return Err(Error::Sequence {
                last: self.last_frame,
                got: frame,
            });
        }
        for d in detections {
            if d.frame != frame {
                return Err(Error::contract(format!(
                    "detection of frame {} passed to step for frame {frame}",
                    d.frame
                )));
            }
            if d.feature.is_none() {
                return Err(Error::contract(format!(
                    "detection in frame {frame} has no feature"
                )));
            }
        }
        self.last_frame = frame;
        let cfg = self.cfg.clone();

        let predicted: Vec<MotionState> = self.live.iter().map(|t| t.motion.predict()).collect();
        let snapshots: Vec<TrackletSnapshot> = self
            .live
            .iter()
            .zip(&predicted)
            .map(|(t, m)| m.snapshot(&t.feature))
            .collect();
        let affinity = affinity_matrix(&snapshots, detections, &cfg.affinity)?;

        let (high, low): (Vec<usize>, Vec<usize>) =
            (0..self.live.len()).partition(|&i| self.live[i].quality(cfg.affinity.w3) > cfg.tau_t);

        let all_cols: Vec<usize> = (0..detections.len()).collect();
        let stage_one = match_subset(&affinity, &high, &all_cols, cfg.tau_a)?;

        let mut det_taken = vec![false; detections.len()];
        let mut row_taken = vec![false; self.live.len()];
        for &(r, c) in &stage_one {
            det_taken[c] = true;
            row_taken[r] = true;
        }
        let mut second_rows: Vec<usize> = high
            .iter()
            .copied()
            .filter(|&r| !row_taken[r])
            .chain(low.iter().copied())
            .collect();
        second_rows.sort_unstable();
        let second_cols: Vec<usize> = all_cols
            .iter()
            .copied()
            .filter(|&c| !det_taken[c])
            .collect();
        let stage_two = match_subset(&affinity, &second_rows, &second_cols, cfg.tau_a)?;
        for &(r, c) in &stage_two {
            det_taken[c] = true;
            row_taken[r] = true;
        }

        let rows: Vec<TrackId> = self.live.iter().map(|t| t.id).collect();
        let mut matched_det = vec![None; self.live.len()];
        for &(r, c) in stage_one.iter().chain(&stage_two) {
            matched_det[r] = Some(c);
        }

        let mut expired = Vec::new();
        for (r, (t, pred)) in self.live.iter_mut().zip(predicted).enumerate() {
            match matched_det[r] {
                Some(c) => {
                    let aff = affinity[(r, c)];
                    t.associate(pred, frame, c, &detections[c], aff, cfg.aggregation)?;
                }
                None => {
                    t.motion = pred;
                    t.frames_since_match += 1;
                    t.state = TrackState::Lost;
                    if t.frames_since_match > cfg.tau_m {
                        t.state = TrackState::Finished;
                        expired.push(t.id);
                    }
                }
            }
        }

        let mut created = Vec::new();
        for (c, d) in detections.iter().enumerate() {
            if det_taken[c] {
                continue;
            }
            let t = Tracklet::new(self.next_id, c, d, &cfg.motion)?;
            self.next_id += 1;
            created.push(t.id);
            self.live.push(t);
        }

        let mut out_of_border = Vec::new();
        if let Some(image) = self.image {
            for t in self
                .live
                .iter_mut()
                .filter(|t| t.state != TrackState::Finished)
            {
                let (cx, cy) = t.motion.center();
                if !image.contains(cx, cy) {
                    t.state = TrackState::Finished;
                    if t.history.last().is_some_and(|e| e.frame == frame) {
                        t.history.pop();
                    }
                    out_of_border.push(t.id);
                }
            }
        }

        let mut outputs = Vec::new();
        let mut keep = Vec::with_capacity(self.live.len());
        for t in self.live.drain(..) {
            if t.state == TrackState::Finished {
                if !t.history.is_empty() {
                    self.finished.push(t);
                }
                continue;
            }
            if let Some(e) = t.history.last().filter(|e| e.frame == frame) {
                outputs.push((t.id, e.bbox));
            }
            keep.push(t);
        }
        self.live = keep;

        let to_ids = |pairs: &[(usize, usize)]| -> Vec<(TrackId, usize)> {
            pairs.iter().map(|&(r, c)| (rows[r], c)).collect()
        };
        Ok(StepReport {
            frame,
            high: high.iter().map(|&i| rows[i]).collect(),
            low: low.iter().map(|&i| rows[i]).collect(),
            stage_one: to_ids(&stage_one),
            stage_two: to_ids(&stage_two),
            rows,
            affinity,
            created,
            expired,
            out_of_border,
            outputs,
        })
    }

    /// Every tracklet with at least one emitted box, sorted by id.
    pub fn into_tracklets(self) -> Vec<Tracklet> {
        let mut all: Vec<Tracklet> = self
            .finished
            .into_iter()
            .chain(self.live)
            .filter(|t| !t.history.is_empty())
            .collect();
        all.sort_by_key(|t| t.id);
        all
    }
}

/// Gated assignment restricted to a row/column subset; returns indices into
/// the full matrix.
fn match_subset(
    affinity: &DMatrix<f64>,
    rows: &[usize],
    cols: &[usize],
    tau_a: f64,
) -> Result<Vec<(usize, usize)>> {
    if rows.is_empty() || cols.is_empty() {
        return Ok(Vec::new());
    }
    let sub = DMatrix::from_fn(rows.len(), cols.len(), |i, j| affinity[(rows[i], cols[j])]);
    let res = solve_max_gated(&sub, tau_a)?;
    Ok(res
        .matches
        .iter()
        .map(|&(i, j)| (rows[i], cols[j]))
        .collect())
}

/// Runs the tracker over frames `start..=end` of `fs`.
pub(crate) fn track_range(
    fs: &FrameSet,
    start: u32,
    end: u32,
    cfg: &OnlineConfig,
) -> Result<Vec<Tracklet>> {
    let mut tracker = OnlineTracker::new(cfg.clone(), fs.image_size)?;
    for frame in start..=end {
        tracker.step(frame, fs.detections(frame))?;
    }
    Ok(tracker.into_tracklets())
}

/// Tracks a whole sequence; one trajectory per identity holding every frame
/// where the tracklet was matched or created.
pub fn run_online(fs: &FrameSet, cfg: &OnlineConfig) -> Result<Vec<Trajectory>> {
    if fs.num_frames() == 0 {
        cfg.validate()?;
        return Ok(Vec::new());
    }
    let tracklets = track_range(fs, 1, fs.num_frames(), cfg)?;
    Ok(tracklets.iter().map(Tracklet::to_trajectory).collect())
}
