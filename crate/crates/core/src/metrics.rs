//! CLEAR-MOT evaluation: frame-wise IoU matching with correspondence
//! persistence, FP/FN/IDS/FM accumulation, MT/ML classification, MOTA and
//! MOTP.
//!
//! Matching per frame:
//!
//! 1. a ground-truth identity matched in the previous frame keeps that
//!    hypothesis if it is present and still overlaps by at least the
//!    threshold;
//! 2. the remaining pairs are solved with Kuhn-Munkres, maximizing first the
//!    number of pairs above the threshold and then their total IoU.
//!
//! An identity switch is counted when a ground-truth identity is matched to a
//! hypothesis id other than the one it was last matched to. A fragmentation
//! is counted each time a matched ground-truth identity becomes unmatched and
//! is matched again later.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::ops::{Add, AddAssign};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::assignment::solve_max;
use crate::error::{Error, Result};
use crate::mot_data::{BoundingBox, FrameSet, Trajectory};

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;
pub const MOSTLY_TRACKED_RATIO: f64 = 0.8;
pub const MOSTLY_LOST_RATIO: f64 = 0.2;

/// Raw CLEAR-MOT counts. Every reported ratio is derived from these, so
/// results from several sequences add up by summing fields.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MotMetrics {
    pub false_positives: u64,
    pub false_negatives: u64,
    pub id_switches: u64,
    pub fragmentations: u64,
    pub mostly_tracked: u64,
    pub mostly_lost: u64,
    pub gt_identities: u64,
    pub gt_boxes: u64,
    pub matches: u64,
    pub iou_sum: f64,
}

impl MotMetrics {
    /// `100 * (1 - (FP + FN + IDS) / gt boxes)`, 100 on an empty, error-free run.
    pub fn mota(&self) -> f64 {
        let errors = (self.false_positives + self.false_negatives + self.id_switches) as f64;
        if self.gt_boxes == 0 {
            return if errors == 0.0 {
                100.0
            } else {
                f64::NEG_INFINITY
            };
        }
        100.0 * (1.0 - errors / self.gt_boxes as f64)
    }

    /// Mean IoU of matched pairs, times 100.
    pub fn motp(&self) -> f64 {
        if self.matches == 0 {
            0.0
        } else {
            100.0 * self.iou_sum / self.matches as f64
        }
    }

    pub fn mt_percent(&self) -> f64 {
        percent(self.mostly_tracked, self.gt_identities)
    }

    pub fn ml_percent(&self) -> f64 {
        percent(self.mostly_lost, self.gt_identities)
    }
}

fn percent(n: u64, d: u64) -> f64 {
    if d == 0 {
        0.0
    } else {
        100.0 * n as f64 / d as f64
    }
}

impl Add for MotMetrics {
    type Output = MotMetrics;

    fn add(mut self, o: MotMetrics) -> MotMetrics {
        self += o;
        self
    }
}

impl AddAssign for MotMetrics {
    fn add_assign(&mut self, o: MotMetrics) {
        self.false_positives += o.false_positives;
        self.false_negatives += o.false_negatives;
        self.id_switches += o.id_switches;
        self.fragmentations += o.fragmentations;
        self.mostly_tracked += o.mostly_tracked;
        self.mostly_lost += o.mostly_lost;
        self.gt_identities += o.gt_identities;
        self.gt_boxes += o.gt_boxes;
        self.matches += o.matches;
        self.iou_sum += o.iou_sum;
    }
}

impl std::iter::Sum for MotMetrics {
    fn sum<I: Iterator<Item = MotMetrics>>(iter: I) -> MotMetrics {
        iter.fold(MotMetrics::default(), Add::add)
    }
}

/// Per-sequence results plus their sum.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsReport {
    pub sequences: BTreeMap<String, MotMetrics>,
}

impl MetricsReport {
    pub fn insert(&mut self, sequence: impl Into<String>, m: MotMetrics) {
        *self.sequences.entry(sequence.into()).or_default() += m;
    }

    pub fn total(&self) -> MotMetrics {
        self.sequences.values().copied().sum()
    }

    /// Table with one row per sequence followed by an `OVERALL` row.
    pub fn table(&self) -> String {
        let mut rows: Vec<(&str, MotMetrics)> = self
            .sequences
            .iter()
            .map(|(k, v)| (k.as_str(), *v))
            .collect();
        let total = self.total();
        rows.push(("OVERALL", total));
        format_table(&rows)
    }
}

/// Fixed-column table in `MT ML FP FN IDS FM MOTA MOTP` order.
pub fn format_table(rows: &[(&str, MotMetrics)]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<16} {:>8} {:>8} {:>8} {:>8} {:>6} {:>6} {:>6} {:>6}",
        "Sequence", "MT", "ML", "FP", "FN", "IDS", "FM", "MOTA", "MOTP"
    );
    for (name, m) in rows {
        let _ = writeln!(out, "{}", format_row(name, m));
    }
    out
}

pub fn format_row(name: &str, m: &MotMetrics) -> String {
    format!(
        "{:<16} {:>7.2}% {:>7.2}% {:>8} {:>8} {:>6} {:>6} {:>6.1} {:>6.1}",
        name,
        m.mt_percent(),
        m.ml_percent(),
        m.false_positives,
        m.false_negatives,
        m.id_switches,
        m.fragmentations,
        m.mota(),
        m.motp()
    )
}

/// `prefix.key=value` lines, counts first, derived ratios after.
pub fn format_key_values(prefix: &str, m: &MotMetrics) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(out, "{prefix}.{k}={v}");
    };
    kv("fp", m.false_positives.to_string());
    kv("fn", m.false_negatives.to_string());
    kv("ids", m.id_switches.to_string());
    kv("fm", m.fragmentations.to_string());
    kv("mt", m.mostly_tracked.to_string());
    kv("ml", m.mostly_lost.to_string());
    kv("gt_identities", m.gt_identities.to_string());
    kv("gt_boxes", m.gt_boxes.to_string());
    kv("matches", m.matches.to_string());
    kv("iou_sum", m.iou_sum.to_string());
    kv("mt_percent", m.mt_percent().to_string());
    kv("ml_percent", m.ml_percent().to_string());
    kv("mota", m.mota().to_string());
    kv("motp", m.motp().to_string());
    out
}

fn check_threshold(t: f64) -> Result<()> {
    if t > 0.0 && t <= 1.0 {
        Ok(())
    } else {
        Err(Error::config(format!(
            "IoU threshold must lie in (0, 1], got {t}"
        )))
    }
}

type FrameBoxes<K> = BTreeMap<u32, Vec<(K, BoundingBox)>>;

fn index_hypotheses(hyp: &[Trajectory]) -> Result<FrameBoxes<u64>> {
    let mut by_frame: FrameBoxes<u64> = BTreeMap::new();
    for t in hyp {
        for e in t.entries() {
            by_frame.entry(e.frame).or_default().push((t.id(), e.bbox));
        }
    }
    for (frame, boxes) in &by_frame {
        let mut ids = BTreeSet::new();
        if let Some((id, _)) = boxes.iter().find(|(id, _)| !ids.insert(*id)) {
            return Err(Error::Consistency(format!(
                "hypothesis id {id} appears twice in frame {frame}"
            )));
        }
    }
    Ok(by_frame)
}

/// CLEAR-MOT metrics of `hyp` against `gt`.
pub fn evaluate(gt: &[Trajectory], hyp: &[Trajectory], iou_threshold: f64) -> Result<MotMetrics> {
    check_threshold(iou_threshold)?;
    let hyp_frames = index_hypotheses(hyp)?;
    let mut gt_frames: FrameBoxes<usize> = BTreeMap::new();
    for (g, t) in gt.iter().enumerate() {
        for e in t.entries() {
            gt_frames.entry(e.frame).or_default().push((g, e.bbox));
        }
    }
    let frames: BTreeSet<u32> = gt_frames.keys().chain(hyp_frames.keys()).copied().collect();

    let mut m = MotMetrics::default();
    // hypothesis matched in the previous frame, with that frame index
    let mut prev: Vec<Option<(u32, u64)>> = vec![None; gt.len()];
    let mut last_id: Vec<Option<u64>> = vec![None; gt.len()];
    let mut tracked: Vec<Vec<bool>> = gt.iter().map(|t| Vec::with_capacity(t.len())).collect();

    let empty_g = Vec::new();
    let empty_h = Vec::new();
    for frame in frames {
        let gts = gt_frames.get(&frame).unwrap_or(&empty_g);
        let hyps = hyp_frames.get(&frame).unwrap_or(&empty_h);
        let mut gt_used = vec![false; gts.len()];
        let mut hyp_used = vec![false; hyps.len()];
        let mut pairs: Vec<(usize, usize, f64)> = Vec::new();

        for (gi, (g, gbox)) in gts.iter().enumerate() {
            let Some((pf, hid)) = prev[*g] else { continue };
            if pf + 1 != frame {
                continue;
            }
            if let Some(hi) = hyps.iter().position(|(h, _)| *h == hid) {
                let iou = gbox.iou(&hyps[hi].1);
                if iou >= iou_threshold && !hyp_used[hi] {
                    gt_used[gi] = true;
                    hyp_used[hi] = true;
                    pairs.push((gi, hi, iou));
                }
            }
        }

        let free_g: Vec<usize> = (0..gts.len()).filter(|&i| !gt_used[i]).collect();
        let free_h: Vec<usize> = (0..hyps.len()).filter(|&j| !hyp_used[j]).collect();
        if !free_g.is_empty() && !free_h.is_empty() {
            let ious = DMatrix::from_fn(free_g.len(), free_h.len(), |i, j| {
                gts[free_g[i]].1.iou(&hyps[free_h[j]].1)
            });
            // a bonus larger than any total IoU makes pair count the primary objective
            let bonus = free_g.len().min(free_h.len()) as f64 + 1.0;
            let weights = ious.map(|v| if v >= iou_threshold { bonus + v } else { 0.0 });
            for (i, j) in solve_max(&weights)?.matches {
                let iou = ious[(i, j)];
                if iou >= iou_threshold {
                    pairs.push((free_g[i], free_h[j], iou));
                }
            }
        }

        let mut matched_g = vec![false; gts.len()];
        for &(gi, hi, iou) in &pairs {
            let g = gts[gi].0;
            let hid = hyps[hi].0;
            if last_id[g].is_some_and(|l| l != hid) {
                m.id_switches += 1;
            }
            last_id[g] = Some(hid);
            prev[g] = Some((frame, hid));
            matched_g[gi] = true;
            m.matches += 1;
            m.iou_sum += iou;
        }
        for (gi, &(g, _)) in gts.iter().enumerate() {
            tracked[g].push(matched_g[gi]);
        }
        m.false_positives += (hyps.len() - pairs.len()) as u64;
        m.false_negatives += (gts.len() - pairs.len()) as u64;
        m.gt_boxes += gts.len() as u64;
    }

    for status in &tracked {
        if status.is_empty() {
            continue;
        }
        m.gt_identities += 1;
        let hits = status.iter().filter(|&&b| b).count();
        let ratio = hits as f64 / status.len() as f64;
        if ratio >= MOSTLY_TRACKED_RATIO {
            m.mostly_tracked += 1;
        } else if ratio <= MOSTLY_LOST_RATIO {
            m.mostly_lost += 1;
        }
        if let (Some(first), Some(last)) = (
            status.iter().position(|&b| b),
            status.iter().rposition(|&b| b),
        ) {
            m.fragmentations += status[first..=last]
                .windows(2)
                .filter(|w| w[0] && !w[1])
                .count() as u64;
        }
    }
    Ok(m)
}

/// FP and FN of raw detections, each scored as its own one-box hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DetectionErrors {
    pub false_positives: u64,
    pub false_negatives: u64,
}

impl DetectionErrors {
    pub fn total(&self) -> u64 {
        self.false_positives + self.false_negatives
    }
}

pub fn detection_pr(
    gt: &[Trajectory],
    detections: &FrameSet,
    iou_threshold: f64,
) -> Result<DetectionErrors> {
    let hyp: Vec<Trajectory> = detections
        .iter_detections()
        .enumerate()
        .map(|(i, d)| {
            let mut t = Trajectory::new(i as u64 + 1);
            t.push_detected(d.frame, d.bbox).expect("single entry");
            t
        })
        .collect();
    let m = evaluate(gt, &hyp, iou_threshold)?;
    Ok(DetectionErrors {
        false_positives: m.false_positives,
        false_negatives: m.false_negatives,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mot_data::Detection;

    fn bx(x: f64) -> BoundingBox {
        BoundingBox::new(x, 0.0, 10.0, 20.0).unwrap()
    }

    fn traj(id: u64, frames: impl IntoIterator<Item = u32>, x: f64) -> Trajectory {
        let mut t = Trajectory::new(id);
        for f in frames {
            t.push_detected(f, bx(x)).unwrap();
        }
        t
    }

    #[test]
    fn perfect_tracking() {
        let gt = vec![traj(1, 1..=10, 0.0), traj(2, 3..=8, 100.0)];
        let m = evaluate(&gt, &gt, 0.5).unwrap();
        assert_eq!(
            (
                m.false_positives,
                m.false_negatives,
                m.id_switches,
                m.fragmentations
            ),
            (0, 0, 0, 0)
        );
        assert_eq!(m.mota(), 100.0);
        assert_eq!(m.motp(), 100.0);
        assert_eq!(m.mt_percent(), 100.0);
        assert_eq!(m.ml_percent(), 0.0);
    }

    #[test]
    fn missed_frames() {
        let gt = vec![traj(1, 1..=10, 0.0)];
        let hyp = vec![traj(7, (1..=3).chain(6..=10), 0.0)];
        let m = evaluate(&gt, &hyp, 0.5).unwrap();
        assert_eq!(m.false_negatives, 2);
        assert_eq!(m.fragmentations, 1);
        assert!((m.mota() - 80.0).abs() < 1e-12);
    }

    #[test]
    fn id_switch() {
        let gt = vec![traj(1, 1..=10, 0.0)];
        let hyp = vec![traj(1, 1..=5, 0.0), traj(2, 6..=10, 0.0)];
        let m = evaluate(&gt, &hyp, 0.5).unwrap();
        assert_eq!(m.id_switches, 1);
        assert_eq!(m.fragmentations, 0);
        assert!((m.mota() - 90.0).abs() < 1e-12);
    }

    #[test]
    fn persistence_prefers_previous_match() {
        // hypothesis 2 overlaps better from frame 2 on, but 1 is still valid
        let gt = vec![traj(1, 1..=3, 0.0)];
        let mut h1 = Trajectory::new(1);
        let mut h2 = Trajectory::new(2);
        h1.push_detected(1, bx(0.0)).unwrap();
        for f in 2..=3 {
            h1.push_detected(f, bx(2.0)).unwrap();
            h2.push_detected(f, bx(0.0)).unwrap();
        }
        let m = evaluate(&gt, &[h1, h2], 0.5).unwrap();
        assert_eq!(m.id_switches, 0);
        assert_eq!(m.false_positives, 2);
    }

    #[test]
    fn threshold_range() {
        assert!(evaluate(&[], &[], 0.0).is_err());
        assert!(evaluate(&[], &[], 1.5).is_err());
        assert!(evaluate(&[], &[], 1.0).is_ok());
    }

    #[test]
    fn duplicate_hypothesis_ids() {
        let h = vec![traj(1, 1..=2, 0.0), traj(1, 2..=3, 0.0)];
        assert!(matches!(evaluate(&[], &h, 0.5), Err(Error::Consistency(_))));
    }

    #[test]
    fn detection_errors() {
        let gt = vec![traj(1, 1..=10, 0.0)];
        let mut fs = FrameSet::new("s");
        for f in 1..=10 {
            for x in [0.0, 300.0] {
                fs.push(Detection {
                    frame: f,
                    bbox: bx(x),
                    score: 1.0,
                    feature: None,
                })
                .unwrap();
            }
        }
        let e = detection_pr(&gt, &fs, 0.5).unwrap();
        assert_eq!(
            (e.false_positives, e.false_negatives, e.total()),
            (10, 0, 10)
        );
        let e = detection_pr(&gt, &FrameSet::new("s"), 0.5).unwrap();
        assert_eq!((e.false_positives, e.false_negatives), (0, 10));
        let exact = fs.filter_by_score(2.0);
        assert_eq!(detection_pr(&gt, &exact, 0.5).unwrap().false_negatives, 10);
    }

    #[test]
    fn sums_are_order_free() {
        let gt = vec![traj(1, 1..=10, 0.0)];
        let a = evaluate(&gt, &[traj(1, 1..=4, 0.0)], 0.5).unwrap();
        let b = evaluate(&gt, &[traj(1, 1..=10, 0.0), traj(2, 1..=3, 50.0)], 0.5).unwrap();
        let mut r1 = MetricsReport::default();
        r1.insert("a", a);
        r1.insert("b", b);
        let mut r2 = MetricsReport::default();
        r2.insert("b", b);
        r2.insert("a", a);
        assert_eq!(r1.total(), r2.total());
        assert_eq!(r1.table(), r2.table());
    }

    #[test]
    fn key_values_round_trip_mota() {
        let gt = vec![traj(1, 1..=10, 0.0)];
        let m = evaluate(&gt, &[traj(3, 2..=9, 1.0)], 0.5).unwrap();
        let kv = format_key_values("s", &m);
        let get = |k: &str| -> f64 {
            kv.lines()
                .find_map(|l| l.strip_prefix(&format!("s.{k}=")))
                .unwrap()
                .parse()
                .unwrap()
        };
        let recomputed = 100.0 * (1.0 - (get("fp") + get("fn") + get("ids")) / get("gt_boxes"));
        assert_eq!(get("mota"), recomputed);
    }
}
