//! Data model plus MOT16-style ingestion and emission.
//!
//! Detection files follow the devkit layout `frame,id,x,y,w,h,score,...`;
//! the `id` column is ignored on input. Appearance features live in a
//! companion text file holding one whitespace-separated vector per line,
//! row-aligned with the detection file.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box in pixel units, `(x, y)` being the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    /// Builds a box, rejecting non-finite coordinates and non-positive extents.
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        let b = BoundingBox { x, y, w, h };
        if !b.is_valid() {
            return Err(Error::contract(format!(
                "invalid box ({x}, {y}, {w}, {h}): extents must be positive and finite"
            )));
        }
        Ok(b)
    }

    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        BoundingBox {
            x: cx - w / 2.0,
            y: cy - h / 2.0,
            w,
            h,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.x.is_finite()
            && self.y.is_finite()
            && self.w.is_finite()
            && self.h.is_finite()
            && self.w > 0.0
            && self.h > 0.0
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Intersection over union; 0 for disjoint boxes.
    pub fn iou(&self, other: &BoundingBox) -> f64 {
        let ix = (self.x + self.w).min(other.x + other.w) - self.x.max(other.x);
        let iy = (self.y + self.h).min(other.y + other.h) - self.y.max(other.y);
        if ix <= 0.0 || iy <= 0.0 {
            return 0.0;
        }
        let inter = ix * iy;
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }
}

/// Appearance embedding with a cached Euclidean norm (always > 0).
#[derive(Debug, Clone, PartialEq)]
pub struct AppearanceFeature {
    values: Vec<f64>,
    norm: f64,
}

impl AppearanceFeature {
    pub const DEFAULT_DIM: usize = 128;

    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::contract("appearance feature is empty"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::contract("appearance feature has non-finite entries"));
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm.is_nan() || norm <= 0.0 {
            return Err(Error::contract("appearance feature has zero norm"));
        }
        Ok(AppearanceFeature { values, norm })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn dot(&self, other: &AppearanceFeature) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum()
    }

    /// Copy scaled to unit Euclidean norm.
    pub fn normalized(&self) -> AppearanceFeature {
        let values: Vec<f64> = self.values.iter().map(|v| v / self.norm).collect();
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        AppearanceFeature { values, norm }
    }
}

/// One detector response.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub frame: u32,
    pub bbox: BoundingBox,
    pub score: f64,
    pub feature: Option<AppearanceFeature>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageSize {
    pub width: f64,
    pub height: f64,
}

impl ImageSize {
    /// Half-open containment: `[0, width) x [0, height)`.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= 0.0 && x < self.width && y >= 0.0 && y < self.height
    }
}

/// Detections of one sequence grouped by 1-based frame index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameSet {
    pub sequence: String,
    pub image_size: Option<ImageSize>,
    frames: BTreeMap<u32, Vec<Detection>>,
    num_frames: u32,
}

impl FrameSet {
    pub fn new(sequence: impl Into<String>) -> Self {
        FrameSet {
            sequence: sequence.into(),
            ..Default::default()
        }
    }

    pub fn with_image_size(mut self, width: f64, height: f64) -> Self {
        self.image_size = Some(ImageSize { width, height });
        self
    }

    /// Extends the frame range so trailing frames without detections are visited.
    pub fn with_num_frames(mut self, num_frames: u32) -> Self {
        self.num_frames = self.num_frames.max(num_frames);
        self
    }

    pub fn push(&mut self, det: Detection) -> Result<()> {
        if det.frame == 0 {
            return Err(Error::contract("frame indices are 1-based"));
        }
        if !det.bbox.is_valid() {
            return Err(Error::contract(format!("invalid box {:?}", det.bbox)));
        }
        if let (Some(f), Some(first)) = (&det.feature, self.first_feature_dim()) {
            if f.dim() != first {
                return Err(Error::contract(format!(
                    "feature dimension {} differs from sequence dimension {first}",
                    f.dim()
                )));
            }
        }
        self.num_frames = self.num_frames.max(det.frame);
        self.frames.entry(det.frame).or_default().push(det);
        Ok(())
    }

    fn first_feature_dim(&self) -> Option<usize> {
        self.frames
            .values()
            .flatten()
            .find_map(|d| d.feature.as_ref().map(|f| f.dim()))
    }

    /// Highest frame index covered; frames are `1..=num_frames`.
    pub fn num_frames(&self) -> u32 {
        self.num_frames
    }

    /// Detections of `frame`, empty for frames without any.
    pub fn detections(&self, frame: u32) -> &[Detection] {
        self.frames.get(&frame).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Iterates `(frame, detections)` over every frame in ascending order.
    pub fn iter_frames(&self) -> impl Iterator<Item = (u32, &[Detection])> + '_ {
        (1..=self.num_frames).map(move |f| (f, self.detections(f)))
    }

    /// All detections, frame-major.
    pub fn iter_detections(&self) -> impl Iterator<Item = &Detection> + '_ {
        self.frames.values().flatten()
    }

    pub fn len(&self) -> usize {
        self.frames.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Keeps the detections with `score >= threshold`; frame range is preserved.
    pub fn filter_by_score(&self, threshold: f64) -> FrameSet {
        let frames = self
            .frames
            .iter()
            .map(|(&f, dets)| {
                let kept = dets
                    .iter()
                    .filter(|d| d.score >= threshold)
                    .cloned()
                    .collect();
                (f, kept)
            })
            .collect();
        FrameSet {
            sequence: self.sequence.clone(),
            image_size: self.image_size,
            frames,
            num_frames: self.num_frames,
        }
    }

    /// Restriction to frames `start..=end`, keeping original frame indices.
    pub fn slice(&self, start: u32, end: u32) -> FrameSet {
        let frames = self
            .frames
            .range(start..=end)
            .map(|(&f, d)| (f, d.clone()))
            .collect();
        FrameSet {
            sequence: self.sequence.clone(),
            image_size: self.image_size,
            frames,
            num_frames: end.min(self.num_frames),
        }
    }
}

pub fn filter_by_score(fs: &FrameSet, threshold: f64) -> FrameSet {
    fs.filter_by_score(threshold)
}

/// One entry of an output trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryEntry {
    pub frame: u32,
    pub bbox: BoundingBox,
    pub interpolated: bool,
}

/// Identity-labelled sequence of boxes with strictly increasing frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    id: u64,
    entries: Vec<TrajectoryEntry>,
}

impl Trajectory {
    pub fn new(id: u64) -> Self {
        Trajectory {
            id,
            entries: Vec::new(),
        }
    }

    pub fn from_entries(id: u64, entries: Vec<TrajectoryEntry>) -> Result<Self> {
        let mut t = Trajectory::new(id);
        for e in entries {
            t.push(e)?;
        }
        Ok(t)
    }

    pub fn push(&mut self, entry: TrajectoryEntry) -> Result<()> {
        if let Some(last) = self.entries.last() {
            if entry.frame <= last.frame {
                return Err(Error::Consistency(format!(
                    "trajectory {}: frame {} does not follow frame {}",
                    self.id, entry.frame, last.frame
                )));
            }
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn push_detected(&mut self, frame: u32, bbox: BoundingBox) -> Result<()> {
        self.push(TrajectoryEntry {
            frame,
            bbox,
            interpolated: false,
        })
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn entries(&self) -> &[TrajectoryEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn first_frame(&self) -> Option<u32> {
        self.entries.first().map(|e| e.frame)
    }

    pub fn last_frame(&self) -> Option<u32> {
        self.entries.last().map(|e| e.frame)
    }

    pub fn entry_at(&self, frame: u32) -> Option<&TrajectoryEntry> {
        self.entries
            .binary_search_by_key(&frame, |e| e.frame)
            .ok()
            .map(|i| &self.entries[i])
    }

    /// Same trajectory with interpolated entries dropped.
    pub fn without_interpolated(&self) -> Trajectory {
        Trajectory {
            id: self.id,
            entries: self
                .entries
                .iter()
                .filter(|e| !e.interpolated)
                .copied()
                .collect(),
        }
    }
}

/// Ground-truth row; columns 7-9 are kept for filtering.
#[derive(Debug, Clone, PartialEq)]
pub struct GtRecord {
    pub frame: u32,
    pub id: u64,
    pub bbox: BoundingBox,
    /// Column 7. `0` marks an ignored row in MOT16 ground truth.
    pub flag: f64,
    pub class: Option<i64>,
    pub visibility: Option<f64>,
}

impl GtRecord {
    pub fn is_ignored(&self) -> bool {
        self.flag == 0.0
    }
}

/// Contents of a MOT16 `seqinfo.ini`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeqInfo {
    pub name: String,
    pub image_size: ImageSize,
    pub seq_length: u32,
    pub frame_rate: Option<f64>,
}

fn field<T: std::str::FromStr>(cols: &[&str], idx: usize, name: &str, line: usize) -> Result<T> {
    let raw = cols.get(idx).ok_or_else(|| Error::Parse {
        line,
        message: format!("missing column {} ({name})", idx + 1),
    })?;
    raw.trim().parse::<T>().map_err(|_| Error::Parse {
        line,
        message: format!("column {} ({name}) is not numeric: {raw:?}", idx + 1),
    })
}

fn frame_field(cols: &[&str], line: usize) -> Result<u32> {
    let raw: f64 = field(cols, 0, "frame", line)?;
    if raw.fract() != 0.0 || raw < 1.0 || raw > u32::MAX as f64 {
        return Err(Error::Validation {
            line,
            message: format!("frame index must be a positive integer, got {raw}"),
        });
    }
    Ok(raw as u32)
}

fn box_fields(cols: &[&str], line: usize) -> Result<BoundingBox> {
    let x: f64 = field(cols, 2, "x", line)?;
    let y: f64 = field(cols, 3, "y", line)?;
    let w: f64 = field(cols, 4, "w", line)?;
    let h: f64 = field(cols, 5, "h", line)?;
    BoundingBox::new(x, y, w, h).map_err(|_| Error::Validation {
        line,
        message: format!("box ({x}, {y}, {w}, {h}) must have positive finite extents"),
    })
}

fn csv_rows<R: BufRead>(reader: R) -> impl Iterator<Item = Result<(usize, String)>> {
    reader
        .lines()
        .enumerate()
        .map(|(i, l)| l.map(|s| (i + 1, s)).map_err(Error::from))
        .filter(|r| !matches!(r, Ok((_, s)) if s.trim().is_empty()))
}

struct DetRow {
    frame: u32,
    bbox: BoundingBox,
    score: f64,
}

fn parse_det_rows<R: BufRead>(reader: R) -> Result<Vec<DetRow>> {
    let mut rows = Vec::new();
    for row in csv_rows(reader) {
        let (line, text) = row?;
        let cols: Vec<&str> = text.split(',').collect();
        if cols.len() < 7 {
            return Err(Error::Parse {
                line,
                message: format!("expected at least 7 columns, found {}", cols.len()),
            });
        }
        let frame = frame_field(&cols, line)?;
        // id column must still be numeric even though it is discarded
        let _: f64 = field(&cols, 1, "id", line)?;
        let bbox = box_fields(&cols, line)?;
        let score: f64 = field(&cols, 6, "score", line)?;
        rows.push(DetRow { frame, bbox, score });
    }
    Ok(rows)
}

fn frame_set_from_rows(rows: Vec<DetRow>, features: Option<Vec<AppearanceFeature>>) -> FrameSet {
    let mut fs = FrameSet::new("");
    let mut features = features.map(Vec::into_iter);
    for row in rows {
        let feature = features.as_mut().and_then(Iterator::next);
        let det = Detection {
            frame: row.frame,
            bbox: row.bbox,
            score: row.score,
            feature,
        };
        fs.num_frames = fs.num_frames.max(det.frame);
        fs.frames.entry(det.frame).or_default().push(det);
    }
    fs
}

/// Parses a detection file without appearance features.
pub fn parse_detections<R: BufRead>(reader: R) -> Result<FrameSet> {
    let rows = parse_det_rows(reader)?;
    Ok(frame_set_from_rows(rows, None))
}

/// Parses a detection file and attaches the row-aligned features.
pub fn parse_detections_with_features<R: BufRead, F: BufRead>(
    reader: R,
    features: F,
) -> Result<FrameSet> {
    let rows = parse_det_rows(reader)?;
    let feats = parse_features(features)?;
    if feats.len() != rows.len() {
        return Err(Error::Alignment {
            detections: rows.len(),
            features: feats.len(),
        });
    }
    Ok(frame_set_from_rows(rows, Some(feats)))
}

/// Parses a feature file: one whitespace-separated vector per non-blank line.
pub fn parse_features<R: BufRead>(reader: R) -> Result<Vec<AppearanceFeature>> {
    let mut out = Vec::new();
    let mut dim = None;
    for row in csv_rows(reader) {
        let (line, text) = row?;
        let values = text
            .split_whitespace()
            .map(|v| {
                v.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    message: format!("feature value is not numeric: {v:?}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        match dim {
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(Error::Validation {
                    line,
                    message: format!("feature has {} values, expected {d}", values.len()),
                })
            }
            _ => {}
        }
        let feat = AppearanceFeature::new(values).map_err(|e| Error::Validation {
            line,
            message: e.to_string(),
        })?;
        out.push(feat);
    }
    Ok(out)
}

/// Parses a `gt.txt`-style file (also accepts tracker result files).
pub fn parse_ground_truth<R: BufRead>(reader: R) -> Result<Vec<GtRecord>> {
    let mut out = Vec::new();
    for row in csv_rows(reader) {
        let (line, text) = row?;
        let cols: Vec<&str> = text.split(',').collect();
        if cols.len() < 6 {
            return Err(Error::Parse {
                line,
                message: format!("expected at least 6 columns, found {}", cols.len()),
            });
        }
        let frame = frame_field(&cols, line)?;
        let id: f64 = field(&cols, 1, "id", line)?;
        if id.fract() != 0.0 || id < 0.0 {
            return Err(Error::Validation {
                line,
                message: format!("identity must be a non-negative integer, got {id}"),
            });
        }
        let bbox = box_fields(&cols, line)?;
        let flag = if cols.len() > 6 {
            field(&cols, 6, "flag", line)?
        } else {
            1.0
        };
        let class = if cols.len() > 7 {
            let c: f64 = field(&cols, 7, "class", line)?;
            Some(c as i64)
        } else {
            None
        };
        let visibility = if cols.len() > 8 {
            Some(field(&cols, 8, "visibility", line)?)
        } else {
            None
        };
        out.push(GtRecord {
            frame,
            id: id as u64,
            bbox,
            flag,
            class,
            visibility,
        });
    }
    Ok(out)
}

/// Groups records into trajectories, dropping rows flagged as ignored.
pub fn trajectories_from_records(records: &[GtRecord]) -> Result<Vec<Trajectory>> {
    let mut by_id: BTreeMap<u64, Vec<TrajectoryEntry>> = BTreeMap::new();
    for r in records.iter().filter(|r| !r.is_ignored()) {
        by_id.entry(r.id).or_default().push(TrajectoryEntry {
            frame: r.frame,
            bbox: r.bbox,
            interpolated: false,
        });
    }
    by_id
        .into_iter()
        .map(|(id, mut entries)| {
            entries.sort_by_key(|e| e.frame);
            if let Some(w) = entries.windows(2).find(|w| w[0].frame == w[1].frame) {
                return Err(Error::Consistency(format!(
                    "identity {id} has two boxes in frame {}",
                    w[0].frame
                )));
            }
            Ok(Trajectory { id, entries })
        })
        .collect()
}

/// Parses a ground-truth or result file straight into trajectories.
pub fn parse_trajectories<R: BufRead>(reader: R) -> Result<Vec<Trajectory>> {
    trajectories_from_records(&parse_ground_truth(reader)?)
}

/// Parses the `[Sequence]` section of a `seqinfo.ini`.
pub fn parse_seqinfo(text: &str) -> Result<SeqInfo> {
    let mut kv = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty()
            || line.starts_with('[')
            || line.starts_with(';')
            || line.starts_with('#')
        {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            message: format!("expected key=value, found {line:?}"),
        })?;
        kv.insert(k.trim().to_string(), (i + 1, v.trim().to_string()));
    }
    let get = |key: &str| -> Result<&(usize, String)> {
        kv.get(key).ok_or_else(|| Error::Parse {
            line: 0,
            message: format!("seqinfo is missing {key}"),
        })
    };
    let num = |key: &str| -> Result<f64> {
        let (line, v) = get(key)?;
        v.parse().map_err(|_| Error::Parse {
            line: *line,
            message: format!("{key} is not numeric: {v:?}"),
        })
    };
    let name = get("name").map(|(_, v)| v.clone()).unwrap_or_default();
    let width = num("imWidth")?;
    let height = num("imHeight")?;
    let seq_length = num("seqLength")?;
    let frame_rate = num("frameRate").ok();
    if !(width > 0.0 && height > 0.0) {
        return Err(Error::Validation {
            line: 0,
            message: "image size must be positive".into(),
        });
    }
    Ok(SeqInfo {
        name,
        image_size: ImageSize { width, height },
        seq_length: seq_length.max(0.0) as u32,
        frame_rate,
    })
}

pub fn format_seqinfo(info: &SeqInfo) -> String {
    let mut s = format!(
        "[Sequence]\nname={}\nimWidth={}\nimHeight={}\nseqLength={}\n",
        info.name, info.image_size.width, info.image_size.height, info.seq_length
    );
    if let Some(fr) = info.frame_rate {
        s.push_str(&format!("frameRate={fr}\n"));
    }
    s
}

/// Emits MOT16 result rows `frame,id,x,y,w,h,1,-1,-1,-1` sorted by frame then id.
pub fn write_trajectories<W: Write>(trajs: &[Trajectory], mut out: W) -> Result<()> {
    let mut rows: Vec<(u32, u64, BoundingBox)> = trajs
        .iter()
        .flat_map(|t| t.entries.iter().map(move |e| (e.frame, t.id, e.bbox)))
        .collect();
    rows.sort_by_key(|r| (r.0, r.1));
    let mut seen = HashSet::new();
    for &(frame, id, _) in &rows {
        if !seen.insert((frame, id)) {
            return Err(Error::Consistency(format!(
                "identity {id} appears twice in frame {frame}"
            )));
        }
    }
    for (frame, id, b) in rows {
        writeln!(
            out,
            "{frame},{id},{:.2},{:.2},{:.2},{:.2},1,-1,-1,-1",
            b.x, b.y, b.w, b.h
        )?;
    }
    Ok(())
}

pub fn format_trajectories(trajs: &[Trajectory]) -> Result<String> {
    let mut buf = Vec::new();
    write_trajectories(trajs, &mut buf)?;
    Ok(String::from_utf8(buf).expect("ascii output"))
}

/// Emits a detection file in frame order; the id column is `-1`.
pub fn write_detections<W: Write>(fs: &FrameSet, mut out: W) -> Result<()> {
    for d in fs.iter_detections() {
        let b = d.bbox;
        writeln!(
            out,
            "{},-1,{:.2},{:.2},{:.2},{:.2},{:.4},-1,-1,-1",
            d.frame, b.x, b.y, b.w, b.h, d.score
        )?;
    }
    Ok(())
}

/// Emits the companion feature file, row-aligned with [`write_detections`].
pub fn write_features<W: Write>(fs: &FrameSet, mut out: W) -> Result<()> {
    for d in fs.iter_detections() {
        let f = d.feature.as_ref().ok_or_else(|| {
            Error::contract(format!("detection in frame {} has no feature", d.frame))
        })?;
        let line: Vec<String> = f.values().iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}
