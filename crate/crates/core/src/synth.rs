//! Seeded synthetic sequences with exact ground truth.
//!
//! Objects follow constant-velocity paths (optionally with a sinusoidal
//! vertical wobble). Detections are the ground-truth boxes plus Gaussian
//! jitter, minus per-object dropout windows, plus Poisson clutter. Each
//! object's features scatter around a unit archetype; the default archetypes
//! are distinct coordinate axes, so distinct objects are orthogonal.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mot_data::{AppearanceFeature, BoundingBox, Detection, FrameSet, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthObject {
    /// Top-left corner and size at `first_frame`.
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    /// Pixels per frame.
    #[serde(default)]
    pub vx: f64,
    #[serde(default)]
    pub vy: f64,
    #[serde(default = "one")]
    pub first_frame: u32,
    /// Defaults to the last frame of the sequence.
    #[serde(default)]
    pub last_frame: Option<u32>,
    /// Inclusive frame ranges without detections.
    #[serde(default)]
    pub dropouts: Vec<[u32; 2]>,
    /// Defaults to the object's coordinate axis.
    #[serde(default)]
    pub archetype: Option<Vec<f64>>,
}

fn one() -> u32 {
    1
}

fn default_dim() -> usize {
    AppearanceFeature::DEFAULT_DIM
}

fn default_sequence() -> String {
    "SYNTH".to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Wobble {
    pub amplitude: f64,
    pub period: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    #[serde(default = "default_sequence")]
    pub sequence: String,
    pub image_width: f64,
    pub image_height: f64,
    pub num_frames: u32,
    #[serde(default = "default_dim")]
    pub feature_dim: usize,
    /// Standard deviation of the x/y jitter (px).
    #[serde(default)]
    pub position_jitter: f64,
    /// Standard deviation of the w/h jitter (px).
    #[serde(default)]
    pub size_jitter: f64,
    /// Standard deviation of per-component feature noise before normalization.
    #[serde(default)]
    pub feature_jitter: f64,
    /// Mean number of spurious boxes per frame.
    #[serde(default)]
    pub clutter_rate: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub wobble: Option<Wobble>,
    #[serde(default)]
    pub objects: Vec<SynthObject>,
}

impl SynthSpec {
    pub fn new(image_width: f64, image_height: f64, num_frames: u32, seed: u64) -> Self {
        SynthSpec {
            sequence: default_sequence(),
            image_width,
            image_height,
            num_frames,
            feature_dim: default_dim(),
            position_jitter: 0.0,
            size_jitter: 0.0,
            feature_jitter: 0.0,
            clutter_rate: 0.0,
            seed,
            wobble: None,
            objects: Vec::new(),
        }
    }

    /// Adds an object visible for the whole sequence.
    pub fn with_object(mut self, x: f64, y: f64, w: f64, h: f64, vx: f64, vy: f64) -> Self {
        self.objects.push(SynthObject {
            x,
            y,
            w,
            h,
            vx,
            vy,
            first_frame: 1,
            last_frame: None,
            dropouts: Vec::new(),
            archetype: None,
        });
        self
    }

    fn last_frame(&self, o: &SynthObject) -> u32 {
        o.last_frame.unwrap_or(self.num_frames)
    }

    /// Ground-truth box of `o` at `frame`.
    pub fn box_at(&self, o: &SynthObject, frame: u32) -> BoundingBox {
        let k = (frame - o.first_frame) as f64;
        let wobble = self
            .wobble
            .map(|w| w.amplitude * (2.0 * std::f64::consts::PI * k / w.period).sin())
            .unwrap_or(0.0);
        BoundingBox {
            x: o.x + o.vx * k,
            y: o.y + o.vy * k + wobble,
            w: o.w,
            h: o.h,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::config(m));
        if !(self.image_width > 0.0 && self.image_height > 0.0) {
            return err("image size must be positive".into());
        }
        if self.feature_dim == 0 {
            return err("feature_dim must be positive".into());
        }
        for (name, v) in [
            ("position_jitter", self.position_jitter),
            ("size_jitter", self.size_jitter),
            ("feature_jitter", self.feature_jitter),
            ("clutter_rate", self.clutter_rate),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return err(format!("{name} must be >= 0"));
            }
        }
        if let Some(w) = self.wobble {
            if !(w.period > 0.0 && w.amplitude.is_finite()) {
                return err("wobble period must be positive".into());
            }
        }
        for (i, o) in self.objects.iter().enumerate() {
            let last = self.last_frame(o);
            if o.first_frame < 1 || o.first_frame > last || last > self.num_frames {
                return err(format!(
                    "object {i}: invalid frame span {}..={last}",
                    o.first_frame
                ));
            }
            if !(o.w > 0.0 && o.h > 0.0) {
                return err(format!("object {i}: size must be positive"));
            }
            match &o.archetype {
                Some(a) if a.len() != self.feature_dim => {
                    return err(format!(
                        "object {i}: archetype length {} != feature_dim",
                        a.len()
                    ))
                }
                Some(a) if AppearanceFeature::new(a.clone()).is_err() => {
                    return err(format!("object {i}: archetype must be finite and nonzero"))
                }
                None if i >= self.feature_dim => {
                    return err(format!(
                        "object {i}: no default archetype beyond feature_dim"
                    ))
                }
                _ => {}
            }
            for f in o.first_frame..=last {
                let b = self.box_at(o, f);
                if b.x < 0.0
                    || b.y < 0.0
                    || b.x + b.w > self.image_width
                    || b.y + b.h > self.image_height
                {
                    return err(format!("object {i} leaves the image at frame {f}"));
                }
            }
        }
        Ok(())
    }

    fn archetype(&self, i: usize) -> AppearanceFeature {
        match &self.objects[i].archetype {
            Some(a) => AppearanceFeature::new(a.clone())
                .expect("validated")
                .normalized(),
            None => {
                let mut v = vec![0.0; self.feature_dim];
                v[i] = 1.0;
                AppearanceFeature::new(v).expect("axis vector")
            }
        }
    }
}

/// Generated ground truth plus detections.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSequence {
    pub ground_truth: Vec<Trajectory>,
    pub detections: FrameSet,
}

fn jittered_feature(
    rng: &mut ChaCha8Rng,
    base: &AppearanceFeature,
    sigma: f64,
) -> AppearanceFeature {
    if sigma == 0.0 {
        return base.clone();
    }
    loop {
        let v: Vec<f64> = base
            .values()
            .iter()
            .map(|b| b + sigma * rng.sample::<f64, _>(StandardNormal))
            .collect();
        if let Ok(f) = AppearanceFeature::new(v) {
            return f.normalized();
        }
    }
}

fn random_feature(rng: &mut ChaCha8Rng, dim: usize) -> AppearanceFeature {
    loop {
        let v: Vec<f64> = (0..dim)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        if let Ok(f) = AppearanceFeature::new(v) {
            return f.normalized();
        }
    }
}

pub fn generate(spec: &SynthSpec) -> Result<SynthSequence> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let pos = Normal::new(0.0, spec.position_jitter.max(0.0)).expect("finite sigma");
    let size = Normal::new(0.0, spec.size_jitter.max(0.0)).expect("finite sigma");
    let clutter =
        (spec.clutter_rate > 0.0).then(|| Poisson::new(spec.clutter_rate).expect("positive rate"));
    let archetypes: Vec<AppearanceFeature> =
        (0..spec.objects.len()).map(|i| spec.archetype(i)).collect();

    let mut gt: Vec<Trajectory> = (1..=spec.objects.len() as u64)
        .map(Trajectory::new)
        .collect();
    let mut fs = FrameSet::new(spec.sequence.clone())
        .with_image_size(spec.image_width, spec.image_height)
        .with_num_frames(spec.num_frames);

    for frame in 1..=spec.num_frames {
        for (i, o) in spec.objects.iter().enumerate() {
            if frame < o.first_frame || frame > spec.last_frame(o) {
                continue;
            }
            let truth = spec.box_at(o, frame);
            gt[i].push_detected(frame, truth)?;
            if o.dropouts.iter().any(|[a, b]| (*a..=*b).contains(&frame)) {
                continue;
            }
            let bbox = BoundingBox {
                x: truth.x + pos.sample(&mut rng),
                y: truth.y + pos.sample(&mut rng),
                w: (truth.w + size.sample(&mut rng)).max(1.0),
                h: (truth.h + size.sample(&mut rng)).max(1.0),
            };
            let feature = jittered_feature(&mut rng, &archetypes[i], spec.feature_jitter);
            let score = rng.random_range(0.5..1.0);
            fs.push(Detection {
                frame,
                bbox,
                score,
                feature: Some(feature),
            })?;
        }
        if let Some(c) = &clutter {
            let n = c.sample(&mut rng) as usize;
            for _ in 0..n {
                let w = rng.random_range(20.0..60.0f64).min(spec.image_width / 2.0);
                let h = (w * rng.random_range(2.0..3.0)).min(spec.image_height / 2.0);
                let x = rng.random_range(0.0..(spec.image_width - w).max(1.0));
                let y = rng.random_range(0.0..(spec.image_height - h).max(1.0));
                let feature = random_feature(&mut rng, spec.feature_dim);
                let score = rng.random_range(0.05..0.5);
                fs.push(Detection {
                    frame,
                    bbox: BoundingBox { x, y, w, h },
                    score,
                    feature: Some(feature),
                })?;
            }
        }
    }
    gt.retain(|t| !t.is_empty());
    Ok(SynthSequence {
        ground_truth: gt,
        detections: fs,
    })
}
