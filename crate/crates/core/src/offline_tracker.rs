//! Batch tracker: short tracklets per temporal segment, joined level by level
//! as neighbouring segments merge, then gap interpolation.
//!
//! Tracklet joining is greedy global-best pairwise linking: the admissible
//! pair with the highest affinity at or above `tau_link` is merged, the
//! affinities touching the merged tracklet are recomputed, and the loop runs
//! until no admissible pair is left. Pair affinity is the product of
//!
//! * appearance: cosine of the aggregated features, clamped to `[0, 1]`;
//! * motion: Gaussian on the offset between the first tracklet's
//!   constant-velocity extrapolation and the second tracklet's first box;
//! * smoothness: `exp(-|va - vb| / (|va| + |vb| + eps))` on the velocities
//!   across the junction.
//!
//! Pairs whose mean-area ratio falls below `tau_s` are never linked. When
//! either tracklet's mean height exceeds `tau_r` of the image height, the
//! motion and smoothness exponents are scaled by `reduced_weight`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::affinity::{appearance_affinity, AffinityParams};
use crate::error::{Error, Result};
use crate::mot_data::{AppearanceFeature, BoundingBox, FrameSet, Trajectory, TrajectoryEntry};
use crate::online_tracker::{track_range, OnlineConfig};

const VELOCITY_WINDOW: usize = 5;
const SMOOTHNESS_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfflineConfig {
    /// Frames per initial segment.
    pub segment_length: u32,
    /// Minimum combined affinity for linking two tracklets.
    pub tau_link: f64,
    /// Minimum mean-area ratio of a linkable pair.
    pub tau_s: f64,
    /// Height ratio (tracklet / image) above which a target counts as big.
    pub tau_r: f64,
    /// Exponent scale of the motion and smoothness terms for big targets.
    pub reduced_weight: f64,
    /// Largest frame gap bridged by a link.
    pub max_link_gap: u32,
    /// Largest run of missing frames filled by interpolation.
    pub max_interpolation_gap: u32,
    pub affinity: AffinityParams,
}

impl Default for OfflineConfig {
    fn default() -> Self {
        OfflineConfig {
            segment_length: 10,
            tau_link: 0.3,
            tau_s: 0.5,
            tau_r: 0.5,
            reduced_weight: 0.3,
            max_link_gap: 50,
            max_interpolation_gap: 20,
            affinity: AffinityParams::default(),
        }
    }
}

impl OfflineConfig {
    pub fn validate(&self) -> Result<()> {
        self.affinity.validate()?;
        if self.segment_length < 2 {
            return Err(Error::config(format!(
                "segment_length must be at least 2, got {}",
                self.segment_length
            )));
        }
        for (name, v) in [("tau_s", self.tau_s), ("tau_r", self.tau_r)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::config(format!("{name} must lie in (0, 1], got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.tau_link) {
            return Err(Error::config(format!(
                "tau_link must lie in [0, 1], got {}",
                self.tau_link
            )));
        }
        if !(self.reduced_weight >= 0.0 && self.reduced_weight <= 1.0) {
            return Err(Error::config(format!(
                "reduced_weight must lie in [0, 1], got {}",
                self.reduced_weight
            )));
        }
        if self.max_link_gap < 1 {
            return Err(Error::config("max_link_gap must be at least 1"));
        }
        Ok(())
    }
}

/// Tracklet being grown by the offline tracker.
#[derive(Debug, Clone, PartialEq)]
pub struct OfflineTracklet {
    entries: Vec<(u32, BoundingBox)>,
    feature_sum: Vec<f64>,
    feature_count: usize,
}

impl OfflineTracklet {
    /// Builds a tracklet from frame-ordered boxes and their features.
    pub fn new(entries: Vec<(u32, BoundingBox)>, features: &[AppearanceFeature]) -> Result<Self> {
        if entries.is_empty() || features.is_empty() {
            return Err(Error::contract(
                "offline tracklet needs at least one box and feature",
            ));
        }
        if entries.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::contract("offline tracklet frames must increase"));
        }
        let dim = features[0].dim();
        let mut feature_sum = vec![0.0; dim];
        for f in features {
            if f.dim() != dim {
                return Err(Error::contract(
                    "offline tracklet features differ in dimension",
                ));
            }
            for (s, v) in feature_sum.iter_mut().zip(f.values()) {
                *s += v / f.norm();
            }
        }
        Ok(OfflineTracklet {
            entries,
            feature_sum,
            feature_count: features.len(),
        })
    }

    pub fn entries(&self) -> &[(u32, BoundingBox)] {
        &self.entries
    }

    pub fn start(&self) -> u32 {
        self.entries[0].0
    }

    pub fn end(&self) -> u32 {
        self.entries[self.entries.len() - 1].0
    }

    /// Normalized mean of the member features; `None` if they cancel out.
    pub fn feature(&self) -> Option<AppearanceFeature> {
        AppearanceFeature::new(self.feature_sum.clone())
            .ok()
            .map(|f| f.normalized())
    }

    pub fn mean_area(&self) -> f64 {
        self.entries.iter().map(|(_, b)| b.area()).sum::<f64>() / self.entries.len() as f64
    }

    pub fn mean_height(&self) -> f64 {
        self.entries.iter().map(|(_, b)| b.h).sum::<f64>() / self.entries.len() as f64
    }

    fn velocity(window: &[(u32, BoundingBox)]) -> (f64, f64) {
        if window.len() < 2 {
            return (0.0, 0.0);
        }
        let (f0, b0) = window[0];
        let (f1, b1) = window[window.len() - 1];
        let dt = (f1 - f0) as f64;
        let (x0, y0) = b0.center();
        let (x1, y1) = b1.center();
        ((x1 - x0) / dt, (y1 - y0) / dt)
    }

    /// Mean velocity over the last `min(5, len)` boxes.
    pub fn tail_velocity(&self) -> (f64, f64) {
        let k = self.entries.len().min(VELOCITY_WINDOW);
        Self::velocity(&self.entries[self.entries.len() - k..])
    }

    /// Mean velocity over the first `min(5, len)` boxes.
    pub fn head_velocity(&self) -> (f64, f64) {
        let k = self.entries.len().min(VELOCITY_WINDOW);
        Self::velocity(&self.entries[..k])
    }

    /// Concatenates two temporally disjoint tracklets.
    pub fn merge(mut self, later: OfflineTracklet) -> OfflineTracklet {
        debug_assert!(self.end() < later.start());
        self.entries.extend(later.entries);
        for (s, v) in self.feature_sum.iter_mut().zip(later.feature_sum) {
            *s += v;
        }
        self.feature_count += later.feature_count;
        self
    }

    fn sort_key(&self) -> (u32, f64, f64) {
        let b = self.entries[0].1;
        (self.start(), b.x, b.y)
    }
}

/// Temporal segment and the tracklets living in it.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub start: u32,
    pub end: u32,
    pub tracklets: Vec<OfflineTracklet>,
}

impl Segment {
    /// Number of frames covered.
    pub fn frame_count(&self) -> u32 {
        self.end - self.start + 1
    }
}

/// Consecutive disjoint frame ranges of `segment_length` frames (the last one
/// may be shorter). Tracklets are left empty.
pub fn segment_sequence(fs: &FrameSet, cfg: &OfflineConfig) -> Result<Vec<Segment>> {
    if cfg.segment_length < 2 {
        return Err(Error::config(format!(
            "segment_length must be at least 2, got {}",
            cfg.segment_length
        )));
    }
    let n = fs.num_frames();
    let mut out = Vec::new();
    let mut start = 1;
    while start <= n {
        let end = (start + cfg.segment_length - 1).min(n);
        out.push(Segment {
            start,
            end,
            tracklets: Vec::new(),
        });
        start = end + 1;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrackletPairAffinity {
    pub appearance: f64,
    pub motion: f64,
    pub smoothness: f64,
    pub combined: f64,
    pub admissible: bool,
}

impl TrackletPairAffinity {
    const INADMISSIBLE: TrackletPairAffinity = TrackletPairAffinity {
        appearance: 0.0,
        motion: 0.0,
        smoothness: 0.0,
        combined: 0.0,
        admissible: false,
    };
}

/// Affinity of linking `a` (earlier) to `b` (later).
pub fn tracklet_pair_affinity(
    a: &OfflineTracklet,
    b: &OfflineTracklet,
    cfg: &OfflineConfig,
    image_height: Option<f64>,
) -> TrackletPairAffinity {
    if a.end() >= b.start() || b.start() - a.end() > cfg.max_link_gap {
        return TrackletPairAffinity::INADMISSIBLE;
    }
    let (area_a, area_b) = (a.mean_area(), b.mean_area());
    if area_a.min(area_b) / area_a.max(area_b) < cfg.tau_s {
        return TrackletPairAffinity::INADMISSIBLE;
    }
    let (Some(fa), Some(fb)) = (a.feature(), b.feature()) else {
        return TrackletPairAffinity::INADMISSIBLE;
    };
    let Ok(cos) = appearance_affinity(&fa, &fb) else {
        return TrackletPairAffinity::INADMISSIBLE;
    };
    let appearance = cos.clamp(0.0, 1.0);

    let big = image_height
        .is_some_and(|ih| a.mean_height() / ih > cfg.tau_r || b.mean_height() / ih > cfg.tau_r);
    let scale = if big { cfg.reduced_weight } else { 1.0 };

    let gap = (b.start() - a.end()) as f64;
    let va = a.tail_velocity();
    let vb = b.head_velocity();
    let (ax, ay) = a.entries[a.entries.len() - 1].1.center();
    let first = b.entries[0].1;
    let (bx, by) = first.center();
    let nx = (ax + va.0 * gap - bx) / first.w;
    let ny = (ay + va.1 * gap - by) / first.h;
    let motion = (-cfg.affinity.w1 * scale * (nx * nx + ny * ny))
        .exp()
        .clamp(0.0, 1.0);

    let diff = ((va.0 - vb.0).powi(2) + (va.1 - vb.1).powi(2)).sqrt();
    let speed = va.0.hypot(va.1) + vb.0.hypot(vb.1);
    let smoothness = (-scale * diff / (speed + SMOOTHNESS_EPS))
        .exp()
        .clamp(0.0, 1.0);

    TrackletPairAffinity {
        appearance,
        motion,
        smoothness,
        combined: appearance * motion * smoothness,
        admissible: true,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    affinity: f64,
    earlier: usize,
    later: usize,
    versions: (u32, u32),
}

impl Eq for Candidate {}

impl Ord for Candidate {
    // max-heap: highest affinity, then lowest indices
    fn cmp(&self, o: &Self) -> Ordering {
        self.affinity
            .total_cmp(&o.affinity)
            .then_with(|| o.earlier.cmp(&self.earlier))
            .then_with(|| o.later.cmp(&self.later))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Greedy global-best linking of tracklets within one merged segment.
pub fn associate_dense_neighbors(
    mut tracklets: Vec<OfflineTracklet>,
    cfg: &OfflineConfig,
    image_height: Option<f64>,
) -> Vec<OfflineTracklet> {
    tracklets.sort_by(|a, b| {
        a.sort_key()
            .partial_cmp(&b.sort_key())
            .unwrap_or(Ordering::Equal)
    });
    let mut slots: Vec<Option<OfflineTracklet>> = tracklets.into_iter().map(Some).collect();
    let mut versions = vec![0u32; slots.len()];
    let mut heap = BinaryHeap::new();

    let consider = |heap: &mut BinaryHeap<Candidate>,
                    slots: &[Option<OfflineTracklet>],
                    versions: &[u32],
                    i: usize,
                    j: usize| {
        let (Some(a), Some(b)) = (&slots[i], &slots[j]) else {
            return;
        };
        let (earlier, later) = if a.end() < b.start() {
            (i, j)
        } else if b.end() < a.start() {
            (j, i)
        } else {
            return;
        };
        let (ea, lb) = (
            slots[earlier].as_ref().unwrap(),
            slots[later].as_ref().unwrap(),
        );
        let aff = tracklet_pair_affinity(ea, lb, cfg, image_height);
        if aff.admissible && aff.combined >= cfg.tau_link {
            heap.push(Candidate {
                affinity: aff.combined,
                earlier,
                later,
                versions: (versions[earlier], versions[later]),
            });
        }
    };

    for i in 0..slots.len() {
        for j in i + 1..slots.len() {
            consider(&mut heap, &slots, &versions, i, j);
        }
    }

    while let Some(c) = heap.pop() {
        if slots[c.earlier].is_none()
            || slots[c.later].is_none()
            || versions[c.earlier] != c.versions.0
            || versions[c.later] != c.versions.1
        {
            continue;
        }
        let earlier = slots[c.earlier].take().unwrap();
        let later = slots[c.later].take().unwrap();
        let keep = c.earlier.min(c.later);
        slots[keep] = Some(earlier.merge(later));
        versions[keep] += 1;
        versions[c.earlier.max(c.later)] += 1;
        for k in 0..slots.len() {
            if k != keep {
                consider(&mut heap, &slots, &versions, keep, k);
            }
        }
    }
    slots.into_iter().flatten().collect()
}

/// Fills runs of at most `max_gap` missing frames by linear interpolation.
pub fn interpolate(traj: &Trajectory, max_gap: u32) -> Trajectory {
    let mut out = Trajectory::new(traj.id());
    let entries = traj.entries();
    for (i, e) in entries.iter().enumerate() {
        if i > 0 {
            let prev = entries[i - 1];
            let missing = e.frame - prev.frame - 1;
            if missing >= 1 && missing <= max_gap {
                let span = (e.frame - prev.frame) as f64;
                for f in prev.frame + 1..e.frame {
                    let t = (f - prev.frame) as f64 / span;
                    let lerp = |a: f64, b: f64| a + (b - a) * t;
                    let bbox = BoundingBox {
                        x: lerp(prev.bbox.x, e.bbox.x),
                        y: lerp(prev.bbox.y, e.bbox.y),
                        w: lerp(prev.bbox.w, e.bbox.w),
                        h: lerp(prev.bbox.h, e.bbox.h),
                    };
                    out.push(TrajectoryEntry {
                        frame: f,
                        bbox,
                        interpolated: true,
                    })
                    .expect("frames increase");
                }
            }
        }
        out.push(*e).expect("frames increase");
    }
    out
}

/// Result of an offline run with per-level bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct OfflineRun {
    pub trajectories: Vec<Trajectory>,
    /// Tracklet count after the in-segment pass and after each merge level.
    pub level_counts: Vec<usize>,
}

fn segment_tracklets(
    fs: &FrameSet,
    seg: &Segment,
    online: &OnlineConfig,
) -> Result<Vec<OfflineTracklet>> {
    track_range(fs, seg.start, seg.end, online)?
        .iter()
        .map(|t| {
            let entries: Vec<(u32, BoundingBox)> =
                t.history().iter().map(|e| (e.frame, e.bbox)).collect();
            let features = t
                .history()
                .iter()
                .map(|e| {
                    fs.detections(e.frame)[e.detection]
                        .feature
                        .clone()
                        .ok_or_else(|| Error::contract("detection without feature"))
                })
                .collect::<Result<Vec<_>>>()?;
            OfflineTracklet::new(entries, &features)
        })
        .collect()
}

pub fn run_offline_detailed(
    fs: &FrameSet,
    cfg: &OfflineConfig,
    online: &OnlineConfig,
) -> Result<OfflineRun> {
    cfg.validate()?;
    online.validate()?;
    let image_height = fs.image_size.map(|s| s.height);
    let mut segments = segment_sequence(fs, cfg)?;
    for seg in &mut segments {
        seg.tracklets = segment_tracklets(fs, seg, online)?;
    }
    let mut level_counts = vec![segments.iter().map(|s| s.tracklets.len()).sum()];

    while segments.len() > 1 {
        let mut next = Vec::with_capacity(segments.len().div_ceil(2));
        let mut it = segments.into_iter();
        while let Some(first) = it.next() {
            match it.next() {
                Some(second) => {
                    let mut tracklets = first.tracklets;
                    tracklets.extend(second.tracklets);
                    next.push(Segment {
                        start: first.start,
                        end: second.end,
                        tracklets: associate_dense_neighbors(tracklets, cfg, image_height),
                    });
                }
                None => next.push(first),
            }
        }
        segments = next;
        level_counts.push(segments.iter().map(|s| s.tracklets.len()).sum());
    }

    let mut tracklets: Vec<OfflineTracklet> =
        segments.into_iter().flat_map(|s| s.tracklets).collect();
    tracklets.sort_by(|a, b| {
        a.sort_key()
            .partial_cmp(&b.sort_key())
            .unwrap_or(Ordering::Equal)
    });
    let trajectories = tracklets
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let mut traj = Trajectory::new(i as u64 + 1);
            for &(f, b) in &t.entries {
                traj.push_detected(f, b)?;
            }
            Ok(interpolate(&traj, cfg.max_interpolation_gap))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OfflineRun {
        trajectories,
        level_counts,
    })
}

pub fn run_offline(
    fs: &FrameSet,
    cfg: &OfflineConfig,
    online: &OnlineConfig,
) -> Result<Vec<Trajectory>> {
    Ok(run_offline_detailed(fs, cfg, online)?.trajectories)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mot_data::Detection;

    fn axis(i: usize) -> AppearanceFeature {
        let mut v = vec![0.0; 4];
        v[i] = 1.0;
        AppearanceFeature::new(v).unwrap()
    }

    /// Straight track of `w x h` boxes moving at `(vx, vy)`.
    fn fragment(
        frames: std::ops::RangeInclusive<u32>,
        x0: f64,
        vx: f64,
        w: f64,
        h: f64,
        f: usize,
    ) -> OfflineTracklet {
        let entries: Vec<(u32, BoundingBox)> = frames
            .map(|k| {
                (
                    k,
                    BoundingBox {
                        x: x0 + vx * k as f64,
                        y: 100.0,
                        w,
                        h,
                    },
                )
            })
            .collect();
        let feats = vec![axis(f); entries.len()];
        OfflineTracklet::new(entries, &feats).unwrap()
    }

    #[test]
    fn segmentation() {
        let cfg = OfflineConfig::default();
        let fs = |n| FrameSet::new("s").with_num_frames(n);
        assert_eq!(segment_sequence(&fs(100), &cfg).unwrap().len(), 10);
        let s = segment_sequence(&fs(95), &cfg).unwrap();
        assert_eq!(s.len(), 10);
        assert!(s[..9].iter().all(|x| x.frame_count() == 10));
        assert_eq!(s[9].frame_count(), 5);
        let one = segment_sequence(&fs(1), &cfg).unwrap();
        assert_eq!((one.len(), one[0].start, one[0].end), (1, 1, 1));
        let bad = OfflineConfig {
            segment_length: 1,
            ..cfg
        };
        assert!(matches!(
            segment_sequence(&fs(5), &bad),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn segments_partition_frames() {
        let cfg = OfflineConfig {
            segment_length: 7,
            ..Default::default()
        };
        let s = segment_sequence(&FrameSet::new("s").with_num_frames(50), &cfg).unwrap();
        let mut next = 1;
        for seg in &s {
            assert_eq!(seg.start, next);
            next = seg.end + 1;
        }
        assert_eq!(next, 51);
    }

    #[test]
    fn perfect_pair() {
        let cfg = OfflineConfig::default();
        let a = fragment(1..=10, 0.0, 3.0, 40.0, 80.0, 0);
        let b = fragment(11..=20, 0.0, 3.0, 40.0, 80.0, 0);
        let p = tracklet_pair_affinity(&a, &b, &cfg, Some(1080.0));
        assert!(p.admissible);
        assert!((p.appearance - 1.0).abs() < 1e-12);
        assert!((p.motion - 1.0).abs() < 1e-12);
        assert!((p.smoothness - 1.0).abs() < 1e-5);
        assert!((p.combined - 1.0).abs() < 1e-5);
    }

    #[test]
    fn scale_gate() {
        let cfg = OfflineConfig::default();
        // areas 40*80 and 40*32: ratio 0.4 < 0.5
        let a = fragment(1..=5, 0.0, 0.0, 40.0, 80.0, 0);
        let b = fragment(6..=10, 0.0, 0.0, 40.0, 32.0, 0);
        let p = tracklet_pair_affinity(&a, &b, &cfg, None);
        assert!(!p.admissible);
        assert_eq!(p.combined, 0.0);
    }

    #[test]
    fn overlap_and_gap_inadmissible() {
        let cfg = OfflineConfig::default();
        let a = fragment(1..=10, 0.0, 1.0, 40.0, 80.0, 0);
        let b = fragment(10..=20, 0.0, 1.0, 40.0, 80.0, 0);
        assert!(!tracklet_pair_affinity(&a, &b, &cfg, None).admissible);
        let far = fragment(61..=70, 0.0, 1.0, 40.0, 80.0, 0);
        assert!(!tracklet_pair_affinity(&a, &far, &cfg, None).admissible);
        assert!(!tracklet_pair_affinity(&b, &a, &cfg, None).admissible);
    }

    #[test]
    fn big_target_reduces_motion_weight() {
        let cfg = OfflineConfig::default();
        // height 600 in a 1000 px image: ratio 0.6 > tau_r
        let a = fragment(1..=5, 0.0, 4.0, 200.0, 600.0, 0);
        let b = fragment(6..=10, 150.0, -4.0, 200.0, 600.0, 0);
        let reduced = tracklet_pair_affinity(&a, &b, &cfg, Some(1000.0));
        let full = tracklet_pair_affinity(
            &a,
            &b,
            &OfflineConfig {
                reduced_weight: 1.0,
                ..cfg.clone()
            },
            Some(1000.0),
        );
        assert!(reduced.admissible && full.admissible);
        assert!(full.motion < 1.0 && full.smoothness < 1.0);
        assert!(reduced.combined > full.combined);
        // element-wise recomputation of both variants
        let gap = 1.0;
        let va = 4.0;
        let ax = 0.0 + 4.0 * 5.0 + 100.0 + va * gap;
        let bx = 150.0 - 4.0 * 6.0 + 100.0;
        let nx: f64 = (ax - bx) / 200.0;
        let motion = |s: f64| (-0.5 * s * nx * nx).exp();
        let smooth = |s: f64| (-s * 8.0 / (8.0 + 1e-6)).exp();
        assert!((full.motion - motion(1.0)).abs() < 1e-12);
        assert!((reduced.motion - motion(0.3)).abs() < 1e-12);
        assert!((full.smoothness - smooth(1.0)).abs() < 1e-12);
        assert!((reduced.smoothness - smooth(0.3)).abs() < 1e-12);
        // same pair in a large image is not a big target
        let small_view = tracklet_pair_affinity(&a, &b, &cfg, Some(5000.0));
        assert_eq!(small_view.combined, full.combined);
    }

    #[test]
    fn fragments_merge() {
        let cfg = OfflineConfig::default();
        let a = fragment(1..=10, 0.0, 3.0, 40.0, 80.0, 0);
        let b = fragment(11..=20, 0.0, 3.0, 40.0, 80.0, 0);
        let out = associate_dense_neighbors(vec![b, a], &cfg, None);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].entries().len(), 20);
    }

    #[test]
    fn crossing_tracks_follow_appearance() {
        let cfg = OfflineConfig::default();
        // object 0 moves right, object 1 moves left, crossing around frame 10
        let a1 = fragment(1..=9, 100.0, 5.0, 40.0, 80.0, 0);
        let b1 = fragment(1..=9, 200.0, -5.0, 40.0, 80.0, 1);
        let a2 = fragment(12..=20, 100.0, 5.0, 40.0, 80.0, 0);
        let b2 = fragment(12..=20, 200.0, -5.0, 40.0, 80.0, 1);
        let out = associate_dense_neighbors(vec![a1, b1, a2, b2], &cfg, None);
        assert_eq!(out.len(), 2);
        for t in &out {
            let f = t.feature().unwrap();
            assert_eq!(t.entries().len(), 18);
            assert!(f.values().iter().filter(|&&v| v > 0.99).count() == 1);
        }
    }

    #[test]
    fn weak_pairs_stay_apart() {
        let cfg = OfflineConfig::default();
        let a = fragment(1..=10, 0.0, 3.0, 40.0, 80.0, 0);
        let b = fragment(11..=20, 0.0, 3.0, 40.0, 80.0, 1);
        let input = vec![a, b];
        let out = associate_dense_neighbors(input.clone(), &cfg, None);
        assert_eq!(out, input);
    }

    #[test]
    fn interpolation() {
        let mut t = Trajectory::new(1);
        t.push_detected(
            1,
            BoundingBox {
                x: 0.0,
                y: 0.0,
                w: 10.0,
                h: 20.0,
            },
        )
        .unwrap();
        t.push_detected(
            7,
            BoundingBox {
                x: 60.0,
                y: 12.0,
                w: 16.0,
                h: 20.0,
            },
        )
        .unwrap();
        let filled = interpolate(&t, 10);
        assert_eq!(filled.len(), 7);
        for e in filled.entries() {
            let k = (e.frame - 1) as f64;
            assert_eq!(e.interpolated, e.frame != 1 && e.frame != 7);
            assert!((e.bbox.x - 10.0 * k).abs() < 1e-12);
            assert!((e.bbox.y - 2.0 * k).abs() < 1e-12);
            assert!((e.bbox.w - (10.0 + k)).abs() < 1e-12);
        }
        assert_eq!(filled.without_interpolated(), t);
        assert_eq!(interpolate(&t, 0), t);
        assert_eq!(interpolate(&t, 4), t);
    }

    fn synthetic_frameset() -> FrameSet {
        let mut fs = FrameSet::new("s").with_image_size(640.0, 480.0);
        for f in 1..=40u32 {
            if (9..=13).contains(&f) {
                continue;
            }
            fs.push(Detection {
                frame: f,
                bbox: BoundingBox {
                    x: 50.0 + 4.0 * f as f64,
                    y: 100.0,
                    w: 40.0,
                    h: 80.0,
                },
                score: 1.0,
                feature: Some(axis(2)),
            })
            .unwrap();
        }
        fs
    }

    #[test]
    fn end_to_end_single_track() {
        let fs = synthetic_frameset();
        let run =
            run_offline_detailed(&fs, &OfflineConfig::default(), &OnlineConfig::default()).unwrap();
        assert_eq!(run.trajectories.len(), 1);
        let t = &run.trajectories[0];
        assert_eq!(t.len(), 40);
        for f in 9..=13 {
            let e = t.entry_at(f).unwrap();
            assert!(e.interpolated);
            assert!((e.bbox.x - (50.0 + 4.0 * f as f64)).abs() < 1e-9);
        }
        assert!(run.level_counts.windows(2).all(|w| w[1] <= w[0]));
        let no_interp = OfflineConfig {
            max_interpolation_gap: 0,
            ..Default::default()
        };
        let t = run_offline(&fs, &no_interp, &OnlineConfig::default()).unwrap();
        assert_eq!(t[0].len(), 35);
        assert!(t[0].entries().iter().all(|e| !e.interpolated));
    }

    #[test]
    fn empty_sequence() {
        let out = run_offline(
            &FrameSet::new("s"),
            &OfflineConfig::default(),
            &OnlineConfig::default(),
        )
        .unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn config_ranges() {
        let bad = |f: fn(&mut OfflineConfig)| {
            let mut c = OfflineConfig::default();
            f(&mut c);
            c.validate().is_err()
        };
        assert!(bad(|c| c.tau_s = 1.5));
        assert!(bad(|c| c.tau_r = 0.0));
        assert!(bad(|c| c.segment_length = 1));
        assert!(bad(|c| c.reduced_weight = -0.1));
        assert!(!bad(|_| ()));
    }
}
