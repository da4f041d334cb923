//! Random affine and elastic deformations applied identically to a page image
//! and its label maps.
//!
//! Transforms map *output* pixel coordinates to *input* coordinates, so every
//! warp is a single inverse-mapping resample. Pixel centers sit at integer
//! coordinates.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::raster::{Image, LabelMap, LabelMapStack};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AugmentError {
    #[error("transform is singular")]
    SingularTransform,
    #[error("elastic sigma must be positive, got {0}")]
    BadSigma(f64),
    #[error("image {0:?} and label maps {1:?} differ in size")]
    SizeMismatch((u32, u32), (u32, u32)),
    #[error("invalid augmentation config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    /// Chance that a sample is deformed at all.
    pub probability: f64,
    /// Rotation drawn from `±rotation_deg`.
    pub rotation_deg: f64,
    /// Translation drawn from `±translation_frac` of the image side.
    pub translation_frac: f64,
    pub shear_deg: f64,
    pub scale_min: f64,
    pub scale_max: f64,
    /// Gaussian smoothing of the displacement field, in pixels.
    pub elastic_sigma: f64,
    /// Displacement magnitude, in pixels.
    pub elastic_alpha: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            probability: 0.5,
            rotation_deg: 5.0,
            translation_frac: 0.02,
            shear_deg: 3.0,
            scale_min: 0.95,
            scale_max: 1.05,
            elastic_sigma: 8.0,
            elastic_alpha: 6.0,
        }
    }
}

impl AugmentConfig {
    /// No deformation at all, whatever the probability.
    pub fn identity() -> Self {
        Self {
            probability: 1.0,
            rotation_deg: 0.0,
            translation_frac: 0.0,
            shear_deg: 0.0,
            scale_min: 1.0,
            scale_max: 1.0,
            elastic_sigma: 1.0,
            elastic_alpha: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), AugmentError> {
        let nonneg = [self.rotation_deg, self.translation_frac, self.shear_deg, self.elastic_alpha];
        if !(0.0..=1.0).contains(&self.probability)
            || nonneg.iter().any(|v| !(*v >= 0.0))
            || !(self.scale_min > 0.0 && self.scale_min <= self.scale_max)
            || self.shear_deg >= 90.0
        {
            return Err(AugmentError::InvalidConfig(format!("{self:?}")));
        }
        if !(self.elastic_sigma > 0.0) {
            return Err(AugmentError::BadSigma(self.elastic_sigma));
        }
        Ok(())
    }
}

/// Row-major 2×3 matrix: `(x, y) ↦ (m[0]x + m[1]y + m[2], m[3]x + m[4]y + m[5])`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineTransform {
    pub m: [f64; 6],
}

impl AffineTransform {
    pub const IDENTITY: Self = Self { m: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0] };

    /// Moves content by `(dx, dy)`: output `(x, y)` reads input `(x − dx, y − dy)`.
    pub fn translation(dx: f64, dy: f64) -> Self {
        Self { m: [1.0, 0.0, -dx, 0.0, 1.0, -dy] }
    }

    /// Linear part is the rotation matrix of `deg`, applied about `(cx, cy)`.
    pub fn rotation_about(deg: f64, cx: f64, cy: f64) -> Self {
        let (s, c) = deg.to_radians().sin_cos();
        Self::about(Self { m: [c, -s, 0.0, s, c, 0.0] }, cx, cy)
    }

    fn about(lin: Self, cx: f64, cy: f64) -> Self {
        Self::translation_raw(cx, cy).then(&lin).then(&Self::translation_raw(-cx, -cy))
    }

    fn translation_raw(tx: f64, ty: f64) -> Self {
        Self { m: [1.0, 0.0, tx, 0.0, 1.0, ty] }
    }

    /// Matrix product `self · other` (apply `other` first).
    pub fn then(&self, other: &Self) -> Self {
        let a = &self.m;
        let b = &other.m;
        Self {
            m: [
                a[0] * b[0] + a[1] * b[3],
                a[0] * b[1] + a[1] * b[4],
                a[0] * b[2] + a[1] * b[5] + a[2],
                a[3] * b[0] + a[4] * b[3],
                a[3] * b[1] + a[4] * b[4],
                a[3] * b[2] + a[4] * b[5] + a[5],
            ],
        }
    }

    pub fn det(&self) -> f64 {
        self.m[0] * self.m[4] - self.m[1] * self.m[3]
    }

    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        (self.m[0] * x + self.m[1] * y + self.m[2], self.m[3] * x + self.m[4] * y + self.m[5])
    }

    pub fn inverse(&self) -> Result<Self, AugmentError> {
        let d = self.det();
        if d.abs() < 1e-12 || !d.is_finite() {
            return Err(AugmentError::SingularTransform);
        }
        let [a, b, c, e, f, g] = self.m;
        let (ia, ib, ie, i_f) = (f / d, -b / d, -e / d, a / d);
        Ok(Self { m: [ia, ib, -(ia * c + ib * g), ie, i_f, -(ie * c + i_f * g)] })
    }
}

fn uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

/// Translation ∘ rotation ∘ shear ∘ scale about the image center, each
/// parameter uniform in its configured range.
pub fn sample_affine(cfg: &AugmentConfig, w: u32, h: u32, rng: &mut impl Rng) -> AffineTransform {
    let rot = uniform(rng, -cfg.rotation_deg, cfg.rotation_deg);
    let tx = uniform(rng, -cfg.translation_frac, cfg.translation_frac) * w as f64;
    let ty = uniform(rng, -cfg.translation_frac, cfg.translation_frac) * h as f64;
    let shear = uniform(rng, -cfg.shear_deg, cfg.shear_deg).to_radians().tan();
    let scale = uniform(rng, cfg.scale_min, cfg.scale_max);
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let (s, c) = rot.to_radians().sin_cos();
    let r = AffineTransform { m: [c, -s, 0.0, s, c, 0.0] };
    let sh = AffineTransform { m: [1.0, shear, 0.0, 0.0, 1.0, 0.0] };
    let sc = AffineTransform { m: [scale, 0.0, 0.0, 0.0, scale, 0.0] };
    AffineTransform::translation_raw(cx, cy)
        .then(&AffineTransform::translation(tx, ty))
        .then(&r)
        .then(&sh)
        .then(&sc)
        .then(&AffineTransform::translation_raw(-cx, -cy))
}

/// Per-pixel offsets added to the source coordinates of a warp.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementField {
    pub width: u32,
    pub height: u32,
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
}

impl DisplacementField {
    pub fn zeros(width: u32, height: u32) -> Self {
        let n = (width * height) as usize;
        Self { width, height, dx: vec![0.0; n], dy: vec![0.0; n] }
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as i64;
    (-r..=r).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect()
}

fn blur_1d(src: &[f64], dst: &mut [f64], n: usize, stride: usize, kernel: &[f64]) {
    let r = (kernel.len() / 2) as i64;
    for i in 0..n as i64 {
        let (mut acc, mut wsum) = (0.0, 0.0);
        for (k, &kw) in kernel.iter().enumerate() {
            let j = i + k as i64 - r;
            if j >= 0 && j < n as i64 {
                acc += kw * src[j as usize * stride];
                wsum += kw;
            }
        }
        dst[i as usize * stride] = acc / wsum;
    }
}

/// Separable Gaussian blur, truncated at 3σ and renormalized at the borders.
pub fn gaussian_blur(data: &[f64], w: u32, h: u32, sigma: f64) -> Vec<f64> {
    let (w, h) = (w as usize, h as usize);
    let kernel = gaussian_kernel(sigma);
    let mut tmp = vec![0.0; data.len()];
    for y in 0..h {
        blur_1d(&data[y * w..], &mut tmp[y * w..], w, 1, &kernel);
    }
    let mut out = vec![0.0; data.len()];
    for x in 0..w {
        blur_1d(&tmp[x..], &mut out[x..], h, w, &kernel);
    }
    out
}

/// Uniform `[−1, 1]` noise per pixel and axis, smoothed and scaled by `alpha`.
pub fn sample_elastic(cfg: &AugmentConfig, w: u32, h: u32, rng: &mut impl Rng) -> Result<DisplacementField, AugmentError> {
    if !(cfg.elastic_sigma > 0.0) {
        return Err(AugmentError::BadSigma(cfg.elastic_sigma));
    }
    let n = (w * h) as usize;
    let raw_x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let raw_y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
    if cfg.elastic_alpha == 0.0 {
        return Ok(DisplacementField::zeros(w, h));
    }
    let scale = |v: Vec<f64>| v.into_iter().map(|d| d * cfg.elastic_alpha).collect();
    Ok(DisplacementField {
        width: w,
        height: h,
        dx: scale(gaussian_blur(&raw_x, w, h, cfg.elastic_sigma)),
        dy: scale(gaussian_blur(&raw_y, w, h, cfg.elastic_sigma)),
    })
}

fn source(t: &AffineTransform, field: Option<&DisplacementField>, x: u32, y: u32, w: u32) -> (f64, f64) {
    let (sx, sy) = t.apply(x as f64, y as f64);
    match field {
        Some(f) => {
            let i = (y * w + x) as usize;
            (sx + f.dx[i], sy + f.dy[i])
        }
        None => (sx, sy),
    }
}

/// Bilinear inverse-mapping warp; samples outside the image read 0.
pub fn warp_image(img: &Image, t: &AffineTransform, field: Option<&DisplacementField>) -> Result<Image, AugmentError> {
    if t.det().abs() < 1e-12 {
        return Err(AugmentError::SingularTransform);
    }
    let (w, h, ch) = (img.width, img.height, img.channels);
    let mut out = Image::filled(w, h, ch, 0.0);
    let (maxx, maxy) = (w as f64 - 1.0, h as f64 - 1.0);
    for y in 0..h {
        for x in 0..w {
            let (sx, sy) = source(t, field, x, y, w);
            // Tiny overshoots from rounding still count as on the grid.
            let (sx, sy) = (snap(sx, maxx), snap(sy, maxy));
            if !(sx >= 0.0 && sy >= 0.0 && sx <= maxx && sy <= maxy) {
                continue;
            }
            let (x0, y0) = (sx.floor() as u32, sy.floor() as u32);
            let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
            let (fx, fy) = ((sx - x0 as f64) as f32, (sy - y0 as f64) as f32);
            for c in 0..ch {
                let top = img.get(x0, y0, c) * (1.0 - fx) + img.get(x1, y0, c) * fx;
                let bot = img.get(x0, y1, c) * (1.0 - fx) + img.get(x1, y1, c) * fx;
                out.set(x, y, c, top * (1.0 - fy) + bot * fy);
            }
        }
    }
    Ok(out)
}

fn snap(v: f64, max: f64) -> f64 {
    if (v - v.round()).abs() < 1e-9 && v.round() >= 0.0 && v.round() <= max {
        v.round()
    } else {
        v
    }
}

/// Nearest-neighbour inverse-mapping warp; samples outside the map read class 0.
pub fn warp_labels(map: &LabelMap, t: &AffineTransform, field: Option<&DisplacementField>) -> Result<LabelMap, AugmentError> {
    if t.det().abs() < 1e-12 {
        return Err(AugmentError::SingularTransform);
    }
    let (w, h) = (map.width, map.height);
    let mut out = LabelMap::zeros(map.task, map.num_classes, w, h);
    for y in 0..h {
        for x in 0..w {
            let (sx, sy) = source(t, field, x, y, w);
            let (nx, ny) = ((sx + 0.5).floor(), (sy + 0.5).floor());
            if nx >= 0.0 && ny >= 0.0 && nx < w as f64 && ny < h as f64 {
                out.set(x, y, map.get(nx as u32, ny as u32));
            }
        }
    }
    Ok(out)
}

/// With probability `cfg.probability`, deforms the image and every label map
/// with one shared affine transform and displacement field.
pub fn augment_sample(
    img: &Image,
    labels: &LabelMapStack,
    cfg: &AugmentConfig,
    rng: &mut impl Rng,
) -> Result<(Image, LabelMapStack), AugmentError> {
    if (img.width, img.height) != (labels.width(), labels.height()) {
        return Err(AugmentError::SizeMismatch((img.width, img.height), (labels.width(), labels.height())));
    }
    cfg.validate()?;
    if cfg.probability <= 0.0 || rng.random::<f64>() >= cfg.probability {
        return Ok((img.clone(), labels.clone()));
    }
    let (w, h) = (img.width, img.height);
    let t = sample_affine(cfg, w, h, rng);
    let field = sample_elastic(cfg, w, h, rng)?;
    let field = (cfg.elastic_alpha > 0.0).then_some(&field);
    let out_img = warp_image(img, &t, field)?;
    let maps = labels.maps.iter().map(|m| warp_labels(m, &t, field)).collect::<Result<Vec<_>, _>>()?;
    Ok((out_img, LabelMapStack::new(maps)))
}
