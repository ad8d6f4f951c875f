//! Command-line runner: loads MOT16-style files, runs a tracker or an
//! evaluation, and writes results next to the resolved configuration.

pub mod config;

use std::fmt;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use mottrack::metrics::{
    detection_pr, evaluate, format_key_values, format_table, MetricsReport, MotMetrics,
};
use mottrack::mot_data::{
    format_seqinfo, parse_detections, parse_detections_with_features, parse_ground_truth,
    parse_seqinfo, parse_trajectories, trajectories_from_records, write_detections, write_features,
    write_trajectories, FrameSet, ImageSize, SeqInfo, Trajectory,
};
use mottrack::offline_tracker::run_offline;
use mottrack::online_tracker::run_online;
use mottrack::synth::generate;
use rayon::prelude::*;

pub use config::{apply_overrides, validate_config, validate_table, ConfigErrors, Mode, RunConfig};

pub const RESOLVED_CONFIG: &str = "config.resolved.toml";
pub const METRICS_TABLE: &str = "metrics.txt";
pub const METRICS_KV: &str = "metrics.kv";

#[derive(Debug)]
pub enum CliError {
    Config(ConfigErrors),
    Data(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Internal(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "configuration error:\n{e}"),
            CliError::Data(e) => write!(f, "data error: {e}"),
            CliError::Internal(e) => write!(f, "internal error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigErrors> for CliError {
    fn from(e: ConfigErrors) -> Self {
        CliError::Config(e)
    }
}

impl From<mottrack::Error> for CliError {
    fn from(e: mottrack::Error) -> Self {
        match e {
            mottrack::Error::Config(m) => CliError::Config(ConfigErrors(vec![m])),
            mottrack::Error::Contract(m) => CliError::Internal(m),
            other => CliError::Data(other.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| io_err(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| io_err(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes()).map_err(|e| io_err(path, e))?;
    w.flush().map_err(|e| io_err(path, e))
}

/// What a run printed and wrote.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOutcome {
    pub stdout: String,
    pub files: Vec<PathBuf>,
    pub metrics: Option<MetricsReport>,
}

/// Inputs of one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceInput {
    pub name: String,
    pub detections: PathBuf,
    pub features: Option<PathBuf>,
    pub ground_truth: Option<PathBuf>,
    pub seqinfo: Option<SeqInfo>,
}

impl SequenceInput {
    /// Standard layout: `det/det.txt`, `det/feat.txt`, `gt/gt.txt`, `seqinfo.ini`.
    pub fn from_dir(dir: &Path, name: &str) -> Result<SequenceInput, CliError> {
        let optional = |p: PathBuf| p.exists().then_some(p);
        let seqinfo = match optional(dir.join("seqinfo.ini")) {
            Some(p) => Some(read_seqinfo(&p)?),
            None => None,
        };
        Ok(SequenceInput {
            name: name.to_string(),
            detections: dir.join("det").join("det.txt"),
            features: optional(dir.join("det").join("feat.txt")),
            ground_truth: optional(dir.join("gt").join("gt.txt")),
            seqinfo,
        })
    }
}

fn read_seqinfo(path: &Path) -> Result<SeqInfo, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    Ok(parse_seqinfo(&text)?)
}

fn load_ground_truth(path: &Path) -> Result<Vec<Trajectory>, CliError> {
    Ok(trajectories_from_records(&parse_ground_truth(open(
        path,
    )?)?)?)
}

fn image_size(cfg: &RunConfig, input: &SequenceInput) -> Option<ImageSize> {
    input
        .seqinfo
        .as_ref()
        .map(|s| s.image_size)
        .or(match (cfg.image_width, cfg.image_height) {
            (Some(width), Some(height)) => Some(ImageSize { width, height }),
            _ => None,
        })
}

/// Result of tracking one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceResult {
    pub name: String,
    pub trajectories: Vec<Trajectory>,
    pub metrics: Option<MotMetrics>,
    pub output: PathBuf,
}

/// Loads, thresholds, tracks, writes and (if ground truth is present) scores one sequence.
pub fn track_sequence(cfg: &RunConfig, input: &SequenceInput) -> Result<SequenceResult, CliError> {
    let feat = input.features.as_ref().ok_or_else(|| {
        CliError::Data(format!(
            "mode {} needs appearance features for sequence {}",
            cfg.mode.as_str(),
            input.name
        ))
    })?;
    let mut fs = parse_detections_with_features(open(&input.detections)?, open(feat)?)?;
    fs.sequence = input.name.clone();
    fs.image_size = image_size(cfg, input);
    if let Some(info) = &input.seqinfo {
        fs = fs.with_num_frames(info.seq_length);
    }
    let fs = fs.filter_by_score(cfg.score_threshold.for_sequence(&input.name));
    let trajectories = match cfg.mode {
        Mode::Offline => run_offline(&fs, &cfg.offline, &cfg.online)?,
        _ => run_online(&fs, &cfg.online)?,
    };
    let output = cfg.output_dir.join(format!("{}.txt", input.name));
    let mut w = create(&output)?;
    write_trajectories(&trajectories, &mut w)?;
    w.flush().map_err(|e| io_err(&output, e))?;
    let metrics = match &input.ground_truth {
        Some(gt) => Some(evaluate(
            &load_ground_truth(gt)?,
            &trajectories,
            cfg.iou_threshold,
        )?),
        None => None,
    };
    Ok(SequenceResult {
        name: input.name.clone(),
        trajectories,
        metrics,
        output,
    })
}

fn single_input(cfg: &RunConfig) -> Result<SequenceInput, CliError> {
    let seqinfo = match &cfg.seqinfo {
        Some(p) => Some(read_seqinfo(p)?),
        None => None,
    };
    let name = cfg
        .sequence
        .clone()
        .or_else(|| {
            seqinfo
                .as_ref()
                .map(|s| s.name.clone())
                .filter(|n| !n.is_empty())
        })
        .unwrap_or_else(|| "sequence".to_string());
    Ok(SequenceInput {
        name,
        detections: cfg.detections.clone().unwrap_or_default(),
        features: cfg.features.clone(),
        ground_truth: cfg.ground_truth.clone(),
        seqinfo,
    })
}

fn batch_inputs(cfg: &RunConfig, root: &Path) -> Result<Vec<SequenceInput>, CliError> {
    let mut names = cfg.sequences.clone();
    if names.is_empty() {
        for entry in fs::read_dir(root).map_err(|e| io_err(root, e))? {
            let entry = entry.map_err(|e| io_err(root, e))?;
            if entry.path().join("det").join("det.txt").exists() {
                names.push(entry.file_name().to_string_lossy().into_owned());
            }
        }
        names.sort();
    }
    if names.is_empty() {
        return Err(CliError::Data(format!(
            "no sequences found under {}",
            root.display()
        )));
    }
    names
        .iter()
        .map(|n| {
            let dir = root.join(n);
            if !dir.join("det").join("det.txt").exists() {
                return Err(CliError::Data(format!(
                    "{} has no det/det.txt",
                    dir.display()
                )));
            }
            SequenceInput::from_dir(&dir, n)
        })
        .collect()
}

fn write_metrics(
    cfg: &RunConfig,
    report: &MetricsReport,
    out: &mut RunOutcome,
) -> Result<(), CliError> {
    let table = if report.sequences.len() == 1 {
        let (name, m) = report.sequences.iter().next().unwrap();
        format_table(&[(name.as_str(), *m)])
    } else {
        report.table()
    };
    let mut kv = String::new();
    for (name, m) in &report.sequences {
        kv.push_str(&format_key_values(name, m));
    }
    if report.sequences.len() > 1 {
        kv.push_str(&format_key_values("OVERALL", &report.total()));
    }
    let tpath = cfg.output_dir.join(METRICS_TABLE);
    let kpath = cfg.output_dir.join(METRICS_KV);
    write_text(&tpath, &table)?;
    write_text(&kpath, &kv)?;
    out.stdout.push_str(&table);
    out.files.extend([tpath, kpath]);
    out.metrics = Some(report.clone());
    Ok(())
}

fn run_trackers(cfg: &RunConfig, out: &mut RunOutcome) -> Result<(), CliError> {
    let inputs = match &cfg.data_root {
        Some(root) => batch_inputs(cfg, root)?,
        None => vec![single_input(cfg)?],
    };
    let results: Vec<SequenceResult> = inputs
        .par_iter()
        .map(|i| track_sequence(cfg, i))
        .collect::<Result<_, _>>()?;
    let mut report = MetricsReport::default();
    for r in &results {
        out.stdout.push_str(&format!(
            "{}: {} trajectories -> {}\n",
            r.name,
            r.trajectories.len(),
            r.output.display()
        ));
        out.files.push(r.output.clone());
        if let Some(m) = r.metrics {
            report.insert(r.name.clone(), m);
        }
    }
    if !report.sequences.is_empty() {
        write_metrics(cfg, &report, out)?;
    }
    Ok(())
}

fn run_evaluate(cfg: &RunConfig, out: &mut RunOutcome) -> Result<(), CliError> {
    let gt = load_ground_truth(cfg.ground_truth.as_deref().unwrap_or(Path::new("")))?;
    let hyp = parse_trajectories(open(cfg.hypothesis.as_deref().unwrap_or(Path::new("")))?)?;
    let m = evaluate(&gt, &hyp, cfg.iou_threshold)?;
    let mut report = MetricsReport::default();
    report.insert(cfg.sequence.clone().unwrap_or_else(|| "sequence".into()), m);
    write_metrics(cfg, &report, out)
}

fn run_detection_pr(cfg: &RunConfig, out: &mut RunOutcome) -> Result<(), CliError> {
    let input = single_input(cfg)?;
    let gt = load_ground_truth(cfg.ground_truth.as_deref().unwrap_or(Path::new("")))?;
    let fs: FrameSet = parse_detections(open(&input.detections)?)?;
    let thr = cfg.score_threshold.for_sequence(&input.name);
    let e = detection_pr(&gt, &fs.filter_by_score(thr), cfg.iou_threshold)?;
    let text = format!(
        "{:<16} {:>9} {:>8} {:>8} {:>8}\n{:<16} {:>9.3} {:>8} {:>8} {:>8}\n",
        "Sequence",
        "Threshold",
        "FP",
        "FN",
        "FP+FN",
        input.name,
        thr,
        e.false_positives,
        e.false_negatives,
        e.total()
    );
    let path = cfg.output_dir.join("detection_pr.txt");
    write_text(&path, &text)?;
    out.stdout.push_str(&text);
    out.files.push(path);
    Ok(())
}

fn run_synth(cfg: &RunConfig, out: &mut RunOutcome) -> Result<(), CliError> {
    let spec = cfg.synth.as_ref().expect("checked by check_inputs");
    let seq = generate(spec)?;
    let dir = cfg.output_dir.join(&spec.sequence);
    let det = dir.join("det").join("det.txt");
    let feat = dir.join("det").join("feat.txt");
    let gt = dir.join("gt").join("gt.txt");
    let info = dir.join("seqinfo.ini");
    let mut w = create(&det)?;
    write_detections(&seq.detections, &mut w)?;
    w.flush().map_err(|e| io_err(&det, e))?;
    let mut w = create(&feat)?;
    write_features(&seq.detections, &mut w)?;
    w.flush().map_err(|e| io_err(&feat, e))?;
    let mut w = create(&gt)?;
    write_trajectories(&seq.ground_truth, &mut w)?;
    w.flush().map_err(|e| io_err(&gt, e))?;
    let seqinfo = SeqInfo {
        name: spec.sequence.clone(),
        image_size: ImageSize {
            width: spec.image_width,
            height: spec.image_height,
        },
        seq_length: spec.num_frames,
        frame_rate: None,
    };
    write_text(&info, &format_seqinfo(&seqinfo))?;
    out.stdout.push_str(&format!(
        "{}: {} frames, {} objects, {} detections -> {}\n",
        spec.sequence,
        spec.num_frames,
        seq.ground_truth.len(),
        seq.detections.len(),
        dir.display()
    ));
    out.files.extend([det, feat, gt, info]);
    Ok(())
}

/// Executes the configured mode. The resolved configuration is written first.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    cfg.check_inputs()?;
    let mut out = RunOutcome::default();
    let resolved = cfg.output_dir.join(RESOLVED_CONFIG);
    write_text(&resolved, &cfg.to_toml_string())?;
    out.files.push(resolved);
    match cfg.mode {
        Mode::Online | Mode::Offline => run_trackers(cfg, &mut out)?,
        Mode::Evaluate => run_evaluate(cfg, &mut out)?,
        Mode::DetectionPr => run_detection_pr(cfg, &mut out)?,
        Mode::Synth => run_synth(cfg, &mut out)?,
    }
    Ok(out)
}

/// Builds a configuration from optional file text plus overrides.
pub fn load_config(text: Option<&str>, overrides: &[String]) -> Result<RunConfig, CliError> {
    let mut table: toml::Table = match text {
        Some(t) => t.parse().map_err(|e: toml::de::Error| {
            ConfigErrors(vec![format!("malformed configuration: {e}")])
        })?,
        None => toml::Table::new(),
    };
    apply_overrides(&mut table, overrides)?;
    Ok(validate_table(&table)?)
}
