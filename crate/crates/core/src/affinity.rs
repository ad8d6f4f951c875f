//! Tracklet-to-detection affinities: appearance, motion and shape terms and
//! their product.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mot_data::{AppearanceFeature, Detection};

/// Exponent weights of the motion, shape and quality terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffinityParams {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
}

impl Default for AffinityParams {
    fn default() -> Self {
        AffinityParams {
            w1: 0.5,
            w2: 1.5,
            w3: 1.2,
        }
    }
}

impl AffinityParams {
    pub fn new(w1: f64, w2: f64, w3: f64) -> Result<Self> {
        let p = AffinityParams { w1, w2, w3 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("w1", self.w1), ("w2", self.w2), ("w3", self.w3)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// What a tracklet exposes to the affinity terms: predicted geometry and its
/// aggregated appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackletSnapshot {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    pub feature: AppearanceFeature,
}

/// Cosine similarity, unclamped.
pub fn appearance_affinity(a: &AppearanceFeature, b: &AppearanceFeature) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::contract(format!(
            "feature dimensions differ: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    Ok((a.dot(b) / (a.norm() * b.norm())).clamp(-1.0, 1.0))
}

/// Gaussian on the center offset, normalized by the detection's size.
pub fn motion_affinity(t: &TrackletSnapshot, d: &Detection, p: &AffinityParams) -> f64 {
    let (dx, dy) = d.bbox.center();
    let nx = (t.cx - dx) / d.bbox.w;
    let ny = (t.cy - dy) / d.bbox.h;
    (-p.w1 * (nx * nx + ny * ny)).exp()
}

pub fn shape_affinity(t: &TrackletSnapshot, d: &Detection, p: &AffinityParams) -> f64 {
    let bh = (t.h - d.bbox.h).abs() / (t.h + d.bbox.h);
    let bw = (t.w - d.bbox.w).abs() / (t.w + d.bbox.w);
    (-p.w2 * (bh + bw)).exp()
}

pub fn combined_affinity(t: &TrackletSnapshot, d: &Detection, p: &AffinityParams) -> Result<f64> {
    let feat = d.feature.as_ref().ok_or_else(|| {
        Error::contract(format!(
            "detection in frame {} has no appearance feature",
            d.frame
        ))
    })?;
    let app = appearance_affinity(&t.feature, feat)?;
    Ok(app * motion_affinity(t, d, p) * shape_affinity(t, d, p))
}

/// `|tracklets| x |detections|` matrix of combined affinities.
pub fn affinity_matrix(
    tracklets: &[TrackletSnapshot],
    detections: &[Detection],
    p: &AffinityParams,
) -> Result<DMatrix<f64>> {
    let mut m = DMatrix::zeros(tracklets.len(), detections.len());
    for (i, t) in tracklets.iter().enumerate() {
        for (j, d) in detections.iter().enumerate() {
            m[(i, j)] = combined_affinity(t, d, p)?;
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mot_data::BoundingBox;
    use proptest::prelude::*;

    fn feat(v: &[f64]) -> AppearanceFeature {
        AppearanceFeature::new(v.to_vec()).unwrap()
    }

    fn det(cx: f64, cy: f64, w: f64, h: f64, f: Option<&[f64]>) -> Detection {
        Detection {
            frame: 1,
            bbox: BoundingBox::from_center(cx, cy, w, h),
            score: 1.0,
            feature: f.map(feat),
        }
    }

    fn snap(cx: f64, cy: f64, w: f64, h: f64, f: &[f64]) -> TrackletSnapshot {
        TrackletSnapshot {
            cx,
            cy,
            w,
            h,
            feature: feat(f),
        }
    }

    #[test]
    fn cosine_cases() {
        let a = feat(&[0.3, -2.0, 5.0]);
        assert!((appearance_affinity(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(
            appearance_affinity(&feat(&[1.0, 0.0]), &feat(&[0.0, 1.0])).unwrap(),
            0.0
        );
        let v = appearance_affinity(&feat(&[1.0, 0.0]), &feat(&[1.0, 1.0])).unwrap();
        assert!((v - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(appearance_affinity(&feat(&[1.0]), &feat(&[1.0, 0.0])).is_err());
        let neg = appearance_affinity(&feat(&[1.0, 0.0]), &feat(&[-1.0, 0.0])).unwrap();
        assert_eq!(neg, -1.0);
    }

    #[test]
    fn motion_cases() {
        let p = AffinityParams::default();
        let t = snap(100.0, 100.0, 50.0, 80.0, &[1.0]);
        assert_eq!(
            motion_affinity(&t, &det(100.0, 100.0, 50.0, 80.0, None), &p),
            1.0
        );
        let v = motion_affinity(&t, &det(110.0, 100.0, 50.0, 80.0, None), &p);
        assert!((v - 0.98020).abs() < 5e-6);
        assert!((v - (-0.02f64).exp()).abs() < 1e-15);
        let far = motion_affinity(&t, &det(1e6, 100.0, 50.0, 80.0, None), &p);
        assert!(far < 1e-100);
    }

    #[test]
    fn shape_cases() {
        let p = AffinityParams::default();
        let t = snap(0.0, 0.0, 50.0, 100.0, &[1.0]);
        assert_eq!(
            shape_affinity(&t, &det(0.0, 0.0, 50.0, 100.0, None), &p),
            1.0
        );
        let v = shape_affinity(&t, &det(0.0, 0.0, 40.0, 100.0, None), &p);
        assert!((v - 0.84648).abs() < 5e-6);
        let swapped = shape_affinity(
            &snap(0.0, 0.0, 40.0, 100.0, &[1.0]),
            &det(0.0, 0.0, 50.0, 100.0, None),
            &p,
        );
        assert_eq!(v, swapped);
    }

    #[test]
    fn combined_cases() {
        let p = AffinityParams::default();
        let f = [1.0, 2.0];
        let t = snap(100.0, 50.0, 50.0, 100.0, &f);
        let v = combined_affinity(&t, &det(110.0, 50.0, 40.0, 100.0, Some(&f)), &p).unwrap();
        // exp(-0.5 * (10/40)^2) * exp(-1.5/9)
        let expected = (-0.5f64 * 0.0625).exp() * (-1.5f64 / 9.0).exp();
        assert!((v - expected).abs() < 1e-15);
        assert!((0.98020 * 0.84648 - 0.82972f64).abs() < 5e-6);
        assert!(combined_affinity(&t, &det(0.0, 0.0, 1.0, 1.0, None), &p).is_err());
        let ortho = combined_affinity(
            &snap(0.0, 0.0, 1.0, 1.0, &[1.0, 0.0]),
            &det(0.0, 0.0, 1.0, 1.0, Some(&[0.0, 1.0])),
            &p,
        )
        .unwrap();
        assert_eq!(ortho, 0.0);
    }

    #[test]
    fn matrix_shapes() {
        let p = AffinityParams::default();
        let dets = vec![det(0.0, 0.0, 10.0, 10.0, Some(&[1.0, 0.0])); 3];
        let m = affinity_matrix(&[], &dets, &p).unwrap();
        assert_eq!(m.shape(), (0, 3));
        let one =
            affinity_matrix(&[snap(0.0, 0.0, 10.0, 10.0, &[1.0, 0.0])], &dets[..1], &p).unwrap();
        assert_eq!(one[(0, 0)], 1.0);
        let ts = vec![
            snap(0.0, 0.0, 10.0, 10.0, &[1.0, 0.2]),
            snap(30.0, 5.0, 12.0, 9.0, &[0.1, 1.0]),
        ];
        let ds = vec![
            det(2.0, 1.0, 11.0, 10.0, Some(&[1.0, 0.0])),
            det(28.0, 4.0, 12.0, 10.0, Some(&[0.0, 1.0])),
        ];
        let m = affinity_matrix(&ts, &ds, &p).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(m[(i, j)], combined_affinity(&ts[i], &ds[j], &p).unwrap());
            }
        }
    }

    #[test]
    fn params_validate() {
        assert!(AffinityParams::new(0.0, 1.0, 1.0).is_err());
        assert!(AffinityParams::new(1.0, f64::NAN, 1.0).is_err());
        assert!(AffinityParams::new(0.5, 1.5, 1.2).is_ok());
    }

    proptest! {
        #[test]
        fn factor_ranges(
            tx in -500.0..500.0f64, ty in -500.0..500.0f64,
            tw in 1.0..300.0f64, th in 1.0..300.0f64,
            dx in -500.0..500.0f64, dy in -500.0..500.0f64,
            dw in 1.0..300.0f64, dh in 1.0..300.0f64,
            fa in proptest::collection::vec(-1.0..1.0f64, 4),
            fb in proptest::collection::vec(-1.0..1.0f64, 4),
        ) {
            prop_assume!(fa.iter().any(|v| v.abs() > 1e-3) && fb.iter().any(|v| v.abs() > 1e-3));
            let p = AffinityParams::default();
            let t = snap(tx, ty, tw, th, &fa);
            let d = det(dx, dy, dw, dh, Some(&fb));
            let m = motion_affinity(&t, &d, &p);
            let s = shape_affinity(&t, &d, &p);
            let a = appearance_affinity(&t.feature, d.feature.as_ref().unwrap()).unwrap();
            prop_assert!((0.0..=1.0).contains(&m));
            prop_assert!(s > 0.0 && s <= 1.0);
            prop_assert!((-1.0..=1.0).contains(&a));
            let c = combined_affinity(&t, &d, &p).unwrap();
            prop_assert!((c - a * m * s).abs() <= 1e-12 * c.abs().max(1e-300));
        }

        #[test]
        fn motion_decreases_with_offset(off in 0.0..200.0f64, extra in 0.01..50.0f64, w in 5.0..100.0f64) {
            let p = AffinityParams::default();
            let t = snap(0.0, 0.0, w, w, &[1.0]);
            let near = motion_affinity(&t, &det(off, 0.0, w, w, None), &p);
            let far = motion_affinity(&t, &det(off + extra, 0.0, w, w, None), &p);
            prop_assume!(near > 0.0);
            prop_assert!(far < near);
            let near_y = motion_affinity(&t, &det(0.0, off, w, w, None), &p);
            let far_y = motion_affinity(&t, &det(0.0, off + extra, w, w, None), &p);
            prop_assume!(near_y > 0.0);
            prop_assert!(far_y < near_y);
        }

        #[test]
        fn shape_is_symmetric(tw in 1.0..300.0f64, th in 1.0..300.0f64, dw in 1.0..300.0f64, dh in 1.0..300.0f64) {
            let p = AffinityParams::default();
            let a = shape_affinity(&snap(0.0, 0.0, tw, th, &[1.0]), &det(0.0, 0.0, dw, dh, None), &p);
            let b = shape_affinity(&snap(0.0, 0.0, dw, dh, &[1.0]), &det(0.0, 0.0, tw, th, None), &p);
            prop_assert_eq!(a, b);
        }
    }
}
