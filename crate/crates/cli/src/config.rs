//! Run configuration: a TOML file with a few top-level keys and one section
//! per component. Validation collects every violation before failing.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use mottrack::affinity::AffinityParams;
use mottrack::metrics::DEFAULT_IOU_THRESHOLD;
use mottrack::motion::MotionNoiseConfig;
use mottrack::offline_tracker::OfflineConfig;
use mottrack::online_tracker::{FeatureAggregation, OnlineConfig};
use mottrack::synth::SynthSpec;
use toml::{Table, Value};

pub const DEFAULT_SCORE_THRESHOLD: f64 = 0.3;
const CROWDED_SEQUENCES: [&str; 2] = ["MOT16-03", "MOT16-04"];
const CROWDED_SCORE_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Online,
    Offline,
    Evaluate,
    DetectionPr,
    Synth,
}

impl Mode {
    pub const ALL: [Mode; 5] = [
        Mode::Online,
        Mode::Offline,
        Mode::Evaluate,
        Mode::DetectionPr,
        Mode::Synth,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Online => "online",
            Mode::Offline => "offline",
            Mode::Evaluate => "evaluate",
            Mode::DetectionPr => "detection-pr",
            Mode::Synth => "synth",
        }
    }

    pub fn is_tracker(self) -> bool {
        matches!(self, Mode::Online | Mode::Offline)
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Mode, String> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown mode {s:?}"))
    }
}

/// Detection score threshold per sequence, with a fallback.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreThresholds {
    pub default: f64,
    pub per_sequence: BTreeMap<String, f64>,
}

impl Default for ScoreThresholds {
    fn default() -> Self {
        ScoreThresholds {
            default: DEFAULT_SCORE_THRESHOLD,
            per_sequence: CROWDED_SEQUENCES
                .iter()
                .map(|s| (s.to_string(), CROWDED_SCORE_THRESHOLD))
                .collect(),
        }
    }
}

impl ScoreThresholds {
    pub fn for_sequence(&self, name: &str) -> f64 {
        self.per_sequence.get(name).copied().unwrap_or(self.default)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub sequence: Option<String>,
    pub detections: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub ground_truth: Option<PathBuf>,
    pub hypothesis: Option<PathBuf>,
    pub seqinfo: Option<PathBuf>,
    pub image_width: Option<f64>,
    pub image_height: Option<f64>,
    /// Root of a MOT16-style directory tree for batch runs.
    pub data_root: Option<PathBuf>,
    /// Sequences of `data_root` to process; empty means all subdirectories.
    pub sequences: Vec<String>,
    pub output_dir: PathBuf,
    pub seed: Option<u64>,
    pub score_threshold: ScoreThresholds,
    pub online: OnlineConfig,
    pub offline: OfflineConfig,
    pub iou_threshold: f64,
    pub synth: Option<SynthSpec>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: Mode::Online,
            sequence: None,
            detections: None,
            features: None,
            ground_truth: None,
            hypothesis: None,
            seqinfo: None,
            image_width: None,
            image_height: None,
            data_root: None,
            sequences: Vec::new(),
            output_dir: PathBuf::from("out"),
            seed: None,
            score_threshold: ScoreThresholds::default(),
            online: OnlineConfig::default(),
            offline: OfflineConfig::default(),
            iou_threshold: DEFAULT_IOU_THRESHOLD,
            synth: None,
        }
    }
}

/// Every problem found in a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors(pub Vec<String>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

const TOP_KEYS: [&str; 14] = [
    "mode",
    "sequence",
    "detections",
    "features",
    "ground_truth",
    "hypothesis",
    "seqinfo",
    "image_width",
    "image_height",
    "data_root",
    "sequences",
    "output_dir",
    "seed",
    "iou_threshold",
];
const SECTIONS: [&str; 7] = [
    "score_threshold",
    "affinity",
    "online",
    "motion",
    "offline",
    "metrics",
    "synth",
];

struct Checker {
    errors: Vec<String>,
}

impl Checker {
    fn fail(&mut self, msg: String) {
        self.errors.push(msg);
    }

    fn unknown(&mut self, t: &Table, prefix: &str, allowed: &[&str]) {
        for k in t.keys() {
            if !allowed.contains(&k.as_str()) {
                self.fail(format!("unknown key `{}`", qualified(prefix, k)));
            }
        }
    }

    fn f64(&mut self, t: &Table, prefix: &str, key: &str) -> Option<f64> {
        match t.get(key)? {
            Value::Float(v) => Some(*v),
            Value::Integer(v) => Some(*v as f64),
            other => {
                self.type_error(prefix, key, "a number", other);
                None
            }
        }
    }

    fn int(&mut self, t: &Table, prefix: &str, key: &str, min: i64, max: i64) -> Option<i64> {
        match t.get(key)? {
            Value::Integer(v) if (min..=max).contains(v) => Some(*v),
            Value::Integer(v) => {
                self.fail(format!(
                    "`{}` = {v} is outside [{min}, {max}]",
                    qualified(prefix, key)
                ));
                None
            }
            other => {
                self.type_error(prefix, key, "an integer", other);
                None
            }
        }
    }

    fn string(&mut self, t: &Table, prefix: &str, key: &str) -> Option<String> {
        match t.get(key)? {
            Value::String(s) => Some(s.clone()),
            other => {
                self.type_error(prefix, key, "a string", other);
                None
            }
        }
    }

    fn existing_path(&mut self, t: &Table, key: &str) -> Option<PathBuf> {
        let p = PathBuf::from(self.string(t, "", key)?);
        if !p.exists() {
            self.fail(format!("`{key}` refers to a missing path: {}", p.display()));
        }
        Some(p)
    }

    fn type_error(&mut self, prefix: &str, key: &str, want: &str, got: &Value) {
        self.fail(format!(
            "`{}` must be {want}, found {}",
            qualified(prefix, key),
            got.type_str()
        ));
    }

    /// Range check; `open_low` excludes the lower bound.
    fn range(&mut self, prefix: &str, key: &str, v: f64, lo: f64, hi: f64, open_low: bool) {
        let ok = v.is_finite() && (if open_low { v > lo } else { v >= lo }) && v <= hi;
        if !ok {
            let l = if open_low { '(' } else { '[' };
            self.fail(format!(
                "`{}` = {v} is outside {l}{lo}, {hi}]",
                qualified(prefix, key)
            ));
        }
    }

    fn positive(&mut self, prefix: &str, key: &str, v: f64) {
        if !(v.is_finite() && v > 0.0) {
            self.fail(format!(
                "`{}` = {v} must be positive",
                qualified(prefix, key)
            ));
        }
    }

    fn non_negative(&mut self, prefix: &str, key: &str, v: f64) {
        if !(v.is_finite() && v >= 0.0) {
            self.fail(format!(
                "`{}` = {v} must be non-negative",
                qualified(prefix, key)
            ));
        }
    }

    fn section<'a>(&mut self, root: &'a Table, name: &str) -> Option<&'a Table> {
        match root.get(name)? {
            Value::Table(t) => Some(t),
            other => {
                self.fail(format!(
                    "`{name}` must be a section, found {}",
                    other.type_str()
                ));
                None
            }
        }
    }
}

fn qualified(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

/// Parses and validates configuration text.
pub fn validate_config(text: &str) -> Result<RunConfig, ConfigErrors> {
    let table: Table = text.parse().map_err(|e: toml::de::Error| {
        ConfigErrors(vec![format!("malformed configuration: {e}")])
    })?;
    validate_table(&table)
}

/// Applies `section.key=value` overrides; values are read as TOML literals
/// and fall back to bare strings.
pub fn apply_overrides(table: &mut Table, overrides: &[String]) -> Result<(), ConfigErrors> {
    let mut errors = Vec::new();
    for o in overrides {
        let Some((path, raw)) = o.split_once('=') else {
            errors.push(format!("override {o:?} is not of the form key=value"));
            continue;
        };
        let value = format!("v = {raw}")
            .parse::<Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| Value::String(raw.trim().to_string()));
        let parts: Vec<&str> = path.trim().split('.').collect();
        if parts.iter().any(|p| p.is_empty()) {
            errors.push(format!("override {o:?} has an empty key"));
            continue;
        }
        if let Err(p) = insert_path(table, &parts, value) {
            errors.push(format!("override {o:?}: `{p}` is not a section"));
        }
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(ConfigErrors(errors))
    }
}

fn insert_path(table: &mut Table, parts: &[&str], value: Value) -> Result<(), String> {
    match parts {
        [] => Ok(()),
        [last] => {
            table.insert(last.to_string(), value);
            Ok(())
        }
        [head, rest @ ..] => match table
            .entry(head.to_string())
            .or_insert_with(|| Value::Table(Table::new()))
        {
            Value::Table(t) => insert_path(t, rest, value),
            _ => Err(head.to_string()),
        },
    }
}

pub fn validate_table(root: &Table) -> Result<RunConfig, ConfigErrors> {
    let mut c = Checker { errors: Vec::new() };
    let mut cfg = RunConfig::default();
    let mut allowed: Vec<&str> = TOP_KEYS.to_vec();
    allowed.extend(SECTIONS);
    c.unknown(root, "", &allowed);

    if let Some(m) = c.string(root, "", "mode") {
        match m.parse() {
            Ok(m) => cfg.mode = m,
            Err(e) => c.fail(format!("`mode`: {e}")),
        }
    }
    cfg.sequence = c.string(root, "", "sequence");
    cfg.detections = c.existing_path(root, "detections");
    cfg.features = c.existing_path(root, "features");
    cfg.ground_truth = c.existing_path(root, "ground_truth");
    cfg.hypothesis = c.existing_path(root, "hypothesis");
    cfg.seqinfo = c.existing_path(root, "seqinfo");
    cfg.data_root = c.existing_path(root, "data_root");
    if let Some(o) = c.string(root, "", "output_dir") {
        cfg.output_dir = PathBuf::from(o);
    }
    cfg.image_width = c.f64(root, "", "image_width");
    cfg.image_height = c.f64(root, "", "image_height");
    for (k, v) in [
        ("image_width", cfg.image_width),
        ("image_height", cfg.image_height),
    ] {
        if let Some(v) = v {
            c.positive("", k, v);
        }
    }
    if cfg.image_width.is_some() != cfg.image_height.is_some() {
        c.fail("`image_width` and `image_height` must be given together".into());
    }
    cfg.seed = c.int(root, "", "seed", 0, i64::MAX).map(|v| v as u64);
    match root.get("sequences") {
        None => {}
        Some(Value::Array(items)) => {
            for item in items {
                match item {
                    Value::String(s) => cfg.sequences.push(s.clone()),
                    other => c.fail(format!(
                        "`sequences` entries must be strings, found {}",
                        other.type_str()
                    )),
                }
            }
        }
        Some(other) => c.type_error("", "sequences", "an array of strings", other),
    }
    if let Some(v) = c.f64(root, "", "iou_threshold") {
        c.range("", "iou_threshold", v, 0.0, 1.0, true);
        cfg.iou_threshold = v;
    }

    if let Some(t) = c.section(root, "score_threshold") {
        for k in t.keys() {
            let Some(x) = c.f64(t, "score_threshold", k) else {
                continue;
            };
            if !x.is_finite() {
                c.fail(format!("`score_threshold.{k}` must be finite"));
            }
            if k == "default" {
                cfg.score_threshold.default = x;
            } else {
                cfg.score_threshold.per_sequence.insert(k.clone(), x);
            }
        }
    }

    if let Some(t) = c.section(root, "affinity") {
        c.unknown(t, "affinity", &["w1", "w2", "w3"]);
        let a = &mut cfg.online.affinity;
        for (key, slot) in [("w1", &mut a.w1), ("w2", &mut a.w2), ("w3", &mut a.w3)] {
            if let Some(v) = c.f64(t, "affinity", key) {
                c.positive("affinity", key, v);
                *slot = v;
            }
        }
    }
    cfg.offline.affinity = cfg.online.affinity;

    if let Some(t) = c.section(root, "online") {
        c.unknown(t, "online", &["tau_t", "tau_a", "tau_m", "aggregation"]);
        if let Some(v) = c.f64(t, "online", "tau_t") {
            c.range("online", "tau_t", v, 0.0, 1.0, false);
            cfg.online.tau_t = v;
        }
        if let Some(v) = c.f64(t, "online", "tau_a") {
            c.range("online", "tau_a", v, -1.0, 1.0, false);
            cfg.online.tau_a = v;
        }
        if let Some(v) = c.int(t, "online", "tau_m", 1, u32::MAX as i64) {
            cfg.online.tau_m = v as u32;
        }
        if let Some(s) = c.string(t, "online", "aggregation") {
            match s.as_str() {
                "mean" => cfg.online.aggregation = FeatureAggregation::Mean,
                "running_mean" => cfg.online.aggregation = FeatureAggregation::RunningMean,
                _ => c.fail(format!(
                    "`online.aggregation` must be \"mean\" or \"running_mean\", found {s:?}"
                )),
            }
        }
    }

    if let Some(t) = c.section(root, "motion") {
        let m = &mut cfg.online.motion;
        let keys = [
            "process_position_var",
            "process_velocity_var",
            "measurement_var",
            "initial_velocity_var",
        ];
        c.unknown(t, "motion", &keys);
        let slots = [
            &mut m.process_position_var,
            &mut m.process_velocity_var,
            &mut m.measurement_var,
            &mut m.initial_velocity_var,
        ];
        for (key, slot) in keys.into_iter().zip(slots) {
            if let Some(v) = c.f64(t, "motion", key) {
                c.non_negative("motion", key, v);
                *slot = v;
            }
        }
    }

    if let Some(t) = c.section(root, "offline") {
        let o = &mut cfg.offline;
        c.unknown(
            t,
            "offline",
            &[
                "segment_length",
                "tau_link",
                "tau_s",
                "tau_r",
                "reduced_weight",
                "max_link_gap",
                "max_interpolation_gap",
            ],
        );
        if let Some(v) = c.int(t, "offline", "segment_length", 2, u32::MAX as i64) {
            o.segment_length = v as u32;
        }
        if let Some(v) = c.f64(t, "offline", "tau_link") {
            c.range("offline", "tau_link", v, 0.0, 1.0, false);
            o.tau_link = v;
        }
        for (key, slot) in [("tau_s", &mut o.tau_s), ("tau_r", &mut o.tau_r)] {
            if let Some(v) = c.f64(t, "offline", key) {
                c.range("offline", key, v, 0.0, 1.0, true);
                *slot = v;
            }
        }
        if let Some(v) = c.f64(t, "offline", "reduced_weight") {
            c.range("offline", "reduced_weight", v, 0.0, 1.0, false);
            o.reduced_weight = v;
        }
        if let Some(v) = c.int(t, "offline", "max_link_gap", 1, u32::MAX as i64) {
            o.max_link_gap = v as u32;
        }
        if let Some(v) = c.int(t, "offline", "max_interpolation_gap", 0, u32::MAX as i64) {
            o.max_interpolation_gap = v as u32;
        }
    }

    if let Some(t) = c.section(root, "metrics") {
        c.unknown(t, "metrics", &["iou_threshold"]);
        if let Some(v) = c.f64(t, "metrics", "iou_threshold") {
            c.range("metrics", "iou_threshold", v, 0.0, 1.0, true);
            cfg.iou_threshold = v;
        }
    }

    if let Some(t) = c.section(root, "synth") {
        match Value::Table(t.clone()).try_into::<SynthSpec>() {
            Ok(mut spec) => {
                if let Some(seed) = cfg.seed {
                    spec.seed = seed;
                }
                if let Err(e) = spec.validate() {
                    c.fail(format!("`synth`: {e}"));
                }
                cfg.synth = Some(spec);
            }
            Err(e) => c.fail(format!("`synth`: {}", e.message())),
        }
    }

    if c.errors.is_empty() {
        // backstop against drift between the checks above and the library's own
        for r in [cfg.online.validate(), cfg.offline.validate()] {
            if let Err(e) = r {
                c.fail(e.to_string());
            }
        }
    }
    if c.errors.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigErrors(c.errors))
    }
}

impl RunConfig {
    /// Checks that the inputs the selected mode needs are present.
    pub fn check_inputs(&self) -> Result<(), ConfigErrors> {
        let mut c = Checker { errors: Vec::new() };
        check_mode_inputs(&mut c, self);
        if c.errors.is_empty() {
            Ok(())
        } else {
            Err(ConfigErrors(c.errors))
        }
    }
}

fn check_mode_inputs(c: &mut Checker, cfg: &RunConfig) {
    let need = |c: &mut Checker, present: bool, key: &str| {
        if !present {
            c.fail(format!("mode {} requires `{key}`", cfg.mode.as_str()));
        }
    };
    match cfg.mode {
        Mode::Online | Mode::Offline => {
            if cfg.data_root.is_none() {
                need(c, cfg.detections.is_some(), "detections");
            }
        }
        Mode::Evaluate => {
            need(c, cfg.ground_truth.is_some(), "ground_truth");
            need(c, cfg.hypothesis.is_some(), "hypothesis");
        }
        Mode::DetectionPr => {
            need(c, cfg.ground_truth.is_some(), "ground_truth");
            need(c, cfg.detections.is_some(), "detections");
        }
        Mode::Synth => need(c, cfg.synth.is_some(), "[synth]"),
    }
}

fn path_value(p: &Path) -> Value {
    Value::String(p.display().to_string())
}

impl RunConfig {
    /// Fully resolved configuration, defaults included, in the input format.
    pub fn to_table(&self) -> Table {
        let mut root = Table::new();
        root.insert("mode".into(), Value::String(self.mode.as_str().into()));
        if let Some(s) = &self.sequence {
            root.insert("sequence".into(), Value::String(s.clone()));
        }
        for (k, p) in [
            ("detections", &self.detections),
            ("features", &self.features),
            ("ground_truth", &self.ground_truth),
            ("hypothesis", &self.hypothesis),
            ("seqinfo", &self.seqinfo),
            ("data_root", &self.data_root),
        ] {
            if let Some(p) = p {
                root.insert(k.into(), path_value(p));
            }
        }
        if let (Some(w), Some(h)) = (self.image_width, self.image_height) {
            root.insert("image_width".into(), Value::Float(w));
            root.insert("image_height".into(), Value::Float(h));
        }
        if !self.sequences.is_empty() {
            root.insert(
                "sequences".into(),
                Value::Array(self.sequences.iter().cloned().map(Value::String).collect()),
            );
        }
        root.insert("output_dir".into(), path_value(&self.output_dir));
        if let Some(s) = self.seed {
            root.insert("seed".into(), Value::Integer(s as i64));
        }

        let mut st = Table::new();
        st.insert("default".into(), Value::Float(self.score_threshold.default));
        for (k, v) in &self.score_threshold.per_sequence {
            st.insert(k.clone(), Value::Float(*v));
        }
        root.insert("score_threshold".into(), Value::Table(st));

        let AffinityParams { w1, w2, w3 } = self.online.affinity;
        root.insert(
            "affinity".into(),
            floats(&[("w1", w1), ("w2", w2), ("w3", w3)]),
        );

        let mut on = floats(&[("tau_t", self.online.tau_t), ("tau_a", self.online.tau_a)]);
        if let Value::Table(t) = &mut on {
            t.insert("tau_m".into(), Value::Integer(self.online.tau_m as i64));
            let agg = match self.online.aggregation {
                FeatureAggregation::Mean => "mean",
                FeatureAggregation::RunningMean => "running_mean",
            };
            t.insert("aggregation".into(), Value::String(agg.into()));
        }
        root.insert("online".into(), on);

        let MotionNoiseConfig {
            process_position_var,
            process_velocity_var,
            measurement_var,
            initial_velocity_var,
        } = self.online.motion;
        root.insert(
            "motion".into(),
            floats(&[
                ("process_position_var", process_position_var),
                ("process_velocity_var", process_velocity_var),
                ("measurement_var", measurement_var),
                ("initial_velocity_var", initial_velocity_var),
            ]),
        );

        let o = &self.offline;
        let mut off = floats(&[
            ("tau_link", o.tau_link),
            ("tau_s", o.tau_s),
            ("tau_r", o.tau_r),
            ("reduced_weight", o.reduced_weight),
        ]);
        if let Value::Table(t) = &mut off {
            t.insert(
                "segment_length".into(),
                Value::Integer(o.segment_length as i64),
            );
            t.insert("max_link_gap".into(), Value::Integer(o.max_link_gap as i64));
            t.insert(
                "max_interpolation_gap".into(),
                Value::Integer(o.max_interpolation_gap as i64),
            );
        }
        root.insert("offline".into(), off);
        root.insert(
            "metrics".into(),
            floats(&[("iou_threshold", self.iou_threshold)]),
        );

        if let Some(spec) = &self.synth {
            if let Ok(v) = Value::try_from(spec) {
                root.insert("synth".into(), v);
            }
        }
        root
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&self.to_table()).expect("config tables serialize")
    }
}

fn floats(kv: &[(&str, f64)]) -> Value {
    Value::Table(
        kv.iter()
            .map(|(k, v)| (k.to_string(), Value::Float(*v)))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_is_defaults() {
        let cfg = validate_config("").unwrap();
        assert_eq!(cfg.mode, Mode::Online);
        assert_eq!(cfg.online, OnlineConfig::default());
        assert_eq!(
            cfg.online.affinity,
            AffinityParams {
                w1: 0.5,
                w2: 1.5,
                w3: 1.2
            }
        );
        assert_eq!(
            (cfg.online.tau_t, cfg.online.tau_a, cfg.online.tau_m),
            (0.5, 0.4, 100)
        );
        assert_eq!(cfg.offline, OfflineConfig::default());
        assert_eq!(cfg.score_threshold.for_sequence("MOT16-03"), 0.1);
        assert_eq!(cfg.score_threshold.for_sequence("MOT16-02"), 0.3);
    }

    #[test]
    fn every_violation_reported() {
        let text = "tau_z = 1\n[offline]\ntau_s = 1.5\n[online]\ntau_t = \"high\"\ntau_a = 2.0\n";
        let errs = validate_config(text).unwrap_err().0;
        let joined = errs.join("\n");
        assert!(joined.contains("tau_z"), "{joined}");
        assert!(joined.contains("offline.tau_s"), "{joined}");
        assert!(joined.contains("online.tau_t"), "{joined}");
        assert!(joined.contains("online.tau_a"), "{joined}");
        assert!(errs.len() >= 4);
    }

    #[test]
    fn missing_path_is_rejected() {
        let err = validate_config("detections = \"/nonexistent/det.txt\"").unwrap_err();
        assert!(err.to_string().contains("detections"));
    }

    #[test]
    fn overrides() {
        let mut t: Table = "[online]\ntau_t = 0.5\n".parse().unwrap();
        apply_overrides(
            &mut t,
            &[
                "online.tau_t=0.7".into(),
                "score_threshold.MOT16-05=0.2".into(),
                "mode=evaluate".into(),
            ],
        )
        .unwrap();
        assert_eq!(t["online"]["tau_t"].as_float(), Some(0.7));
        assert_eq!(t["score_threshold"]["MOT16-05"].as_float(), Some(0.2));
        assert_eq!(t["mode"].as_str(), Some("evaluate"));
        assert!(apply_overrides(&mut t, &["nonsense".into()]).is_err());
    }

    #[test]
    fn resolved_round_trip() {
        let text = "detections = \"Cargo.toml\"\nseed = 7\n[online]\naggregation = \"running_mean\"\ntau_m = 30\n\
                    [score_threshold]\nfoo = 0.45\n[offline]\nsegment_length = 8\n\
                    [synth]\nimage_width = 640\nimage_height = 480\nnum_frames = 20\n\
                    [[synth.objects]]\nx = 10\ny = 10\nw = 20\nh = 40\nvx = 1\n";
        let cfg = validate_config(text).unwrap();
        assert_eq!(cfg.synth.as_ref().unwrap().seed, 7);
        let again = validate_config(&cfg.to_toml_string()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn mode_requirements() {
        let cfg = validate_config("mode = \"evaluate\"").unwrap();
        let err = cfg.check_inputs().unwrap_err().to_string();
        assert!(err.contains("ground_truth") && err.contains("hypothesis"));
        assert!(validate_config("mode = \"synth\"")
            .unwrap()
            .check_inputs()
            .is_err());
        assert!(validate_config("").unwrap().check_inputs().is_err());
        assert!(validate_config("mode = \"fly\"").is_err());
    }
}
