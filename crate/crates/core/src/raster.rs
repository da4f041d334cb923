//! Images, per-task label maps and ground-truth rasterization.

use std::path::Path;

use thiserror::Error;

use crate::net::Tensor;
use crate::pagexml::{PageDocument, ZoneSchema};

/// Number of Task-1 classes (background, baseline).
pub const BASELINE_CLASSES: usize = 2;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("target size must be positive, got {0}x{1}")]
    NonPositiveTarget(u32, u32),
    #[error("zone schema is empty")]
    EmptySchema,
    #[error("baseline width must be at least 1")]
    BadBaselineWidth,
    #[error("image i/o: {0}")]
    Image(#[from] image::ImageError),
}

/// Row-major interleaved image with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: u32,
    pub height: u32,
    pub channels: u32,
    pub data: Vec<f32>,
}

impl Image {
    pub fn new(width: u32, height: u32, channels: u32, data: Vec<f32>) -> Self {
        assert!(channels == 1 || channels == 3, "channels must be 1 or 3");
        assert_eq!(data.len(), (width * height * channels) as usize, "image data length");
        Self { width, height, channels, data }
    }

    pub fn filled(width: u32, height: u32, channels: u32, value: f32) -> Self {
        Self::new(width, height, channels, vec![value; (width * height * channels) as usize])
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32, c: u32) -> f32 {
        self.data[((y * self.width + x) * self.channels + c) as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, c: u32, v: f32) {
        let i = ((y * self.width + x) * self.channels + c) as usize;
        self.data[i] = v;
    }

    /// Luminance (0.299 R + 0.587 G + 0.114 B) as a single-channel image.
    pub fn to_gray(&self) -> Image {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self
            .data
            .chunks_exact(3)
            .map(|p| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2])
            .collect();
        Image::new(self.width, self.height, 1, data)
    }

    pub fn load(path: &Path) -> Result<Image, RasterError> {
        let img = image::open(path)?;
        Ok(match img.color().channel_count() {
            1 | 2 => {
                let g = img.to_luma8();
                let data = g.as_raw().iter().map(|&v| v as f32 / 255.0).collect();
                Image::new(g.width(), g.height(), 1, data)
            }
            _ => {
                let rgb = img.to_rgb8();
                let data = rgb.as_raw().iter().map(|&v| v as f32 / 255.0).collect();
                Image::new(rgb.width(), rgb.height(), 3, data)
            }
        })
    }

    /// Quantizes to 8 bits and writes a PNG (or PPM/PGM by extension).
    pub fn save(&self, path: &Path) -> Result<(), RasterError> {
        let bytes: Vec<u8> = self.data.iter().map(|&v| to_u8(v)).collect();
        let color = if self.channels == 1 {
            image::ExtendedColorType::L8
        } else {
            image::ExtendedColorType::Rgb8
        };
        image::save_buffer(path, &bytes, self.width, self.height, color)?;
        Ok(())
    }
}

#[inline]
pub(crate) fn to_u8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Integer class map for one task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    pub task: usize,
    pub num_classes: usize,
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

impl LabelMap {
    pub fn zeros(task: usize, num_classes: usize, width: u32, height: u32) -> Self {
        assert!((2..=256).contains(&num_classes), "num_classes out of range");
        Self { task, num_classes, width, height, data: vec![0; (width * height) as usize] }
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.data[(y * self.width + x) as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: u8) {
        debug_assert!((v as usize) < self.num_classes);
        self.data[(y * self.width + x) as usize] = v;
    }

    pub fn count(&self, class: u8) -> usize {
        self.data.iter().filter(|&&v| v == class).count()
    }

    /// Nearest-neighbour resize; the only resampling ever applied to labels.
    pub fn resize_nearest(&self, tw: u32, th: u32) -> LabelMap {
        let mut out = LabelMap::zeros(self.task, self.num_classes, tw, th);
        for y in 0..th {
            let sy = (((y as f64 + 0.5) * self.height as f64 / th as f64) as u32).min(self.height - 1);
            for x in 0..tw {
                let sx = (((x as f64 + 0.5) * self.width as f64 / tw as f64) as u32).min(self.width - 1);
                out.set(x, y, self.get(sx, sy));
            }
        }
        out
    }

    /// Binary indicator of `class`.
    pub fn mask_of(&self, class: u8) -> Mask {
        Mask {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| v == class).collect(),
        }
    }
}

/// One label map per task, all the same size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMapStack {
    pub maps: Vec<LabelMap>,
}

impl LabelMapStack {
    pub fn new(maps: Vec<LabelMap>) -> Self {
        assert!(!maps.is_empty(), "stack needs at least one task");
        let (w, h) = (maps[0].width, maps[0].height);
        assert!(maps.iter().all(|m| m.width == w && m.height == h), "label maps differ in size");
        Self { maps }
    }

    pub fn num_tasks(&self) -> usize {
        self.maps.len()
    }

    pub fn width(&self) -> u32 {
        self.maps[0].width
    }

    pub fn height(&self) -> u32 {
        self.maps[0].height
    }

    /// Classes per task.
    pub fn classes(&self) -> Vec<usize> {
        self.maps.iter().map(|m| m.num_classes).collect()
    }
}

/// Boolean pixel mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub width: u32,
    pub height: u32,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height, data: vec![false; (width * height) as usize] }
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.data[(y * self.width + x) as usize]
    }

    /// Out-of-range coordinates read as background.
    #[inline]
    pub fn get_i(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as u32) < self.width && (y as u32) < self.height && self.get(x as u32, y as u32)
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        self.data[(y * self.width + x) as usize] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn and(&self, other: &Mask) -> Mask {
        assert_eq!((self.width, self.height), (other.width, other.height));
        Mask {
            width: self.width,
            height: self.height,
            data: self.data.iter().zip(&other.data).map(|(a, b)| *a && *b).collect(),
        }
    }
}

/// Bilinear resize with pixel-center alignment.
pub fn resize_image(img: &Image, tw: u32, th: u32) -> Result<Image, RasterError> {
    if tw == 0 || th == 0 {
        return Err(RasterError::NonPositiveTarget(tw, th));
    }
    if tw == img.width && th == img.height {
        return Ok(img.clone());
    }
    let c = img.channels;
    let sx = img.width as f64 / tw as f64;
    let sy = img.height as f64 / th as f64;
    let axis = |i: u32, scale: f64, n: u32| {
        let s = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (n - 1) as f64);
        let i0 = s.floor() as u32;
        let i1 = (i0 + 1).min(n - 1);
        (i0, i1, (s - i0 as f64) as f32)
    };
    let mut out = Vec::with_capacity((tw * th * c) as usize);
    for y in 0..th {
        let (y0, y1, fy) = axis(y, sy, img.height);
        for x in 0..tw {
            let (x0, x1, fx) = axis(x, sx, img.width);
            for ch in 0..c {
                let top = img.get(x0, y0, ch) * (1.0 - fx) + img.get(x1, y0, ch) * fx;
                let bot = img.get(x0, y1, ch) * (1.0 - fx) + img.get(x1, y1, ch) * fx;
                out.push((top * (1.0 - fy) + bot * fy).clamp(0.0, 1.0));
            }
        }
    }
    Ok(Image::new(tw, th, c, out))
}

/// Maps `[0, 1]` to `[-1, 1]` and lays the result out as `(γ, h, w)`.
pub fn normalize_image(img: &Image) -> Tensor<f32> {
    let (w, h, c) = (img.width as usize, img.height as usize, img.channels as usize);
    let mut data = vec![0.0f32; c * h * w];
    for (i, px) in img.data.chunks_exact(c).enumerate() {
        for (ch, &v) in px.iter().enumerate() {
            data[ch * h * w + i] = 2.0 * v - 1.0;
        }
    }
    Tensor::from_vec(vec![c, h, w], data)
}

/// Fills `polygon` (vertices in pixel-corner coordinates) into `mask` with the
/// even-odd rule evaluated at pixel centers.
pub fn fill_polygon_f(mask: &mut Mask, vertices: &[(f64, f64)]) {
    fill_polygon_with(mask.width, mask.height, vertices, |x, y| mask.set(x, y, true));
}

pub(crate) fn fill_polygon_with(width: u32, height: u32, vertices: &[(f64, f64)], mut paint: impl FnMut(u32, u32)) {
    let n = vertices.len();
    if n < 3 {
        return;
    }
    let ymin = vertices.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
    let ymax = vertices.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
    let row0 = (ymin - 0.5).ceil().max(0.0) as u32;
    let row1 = ((ymax - 0.5).floor().min(height as f64 - 1.0)).max(-1.0);
    if row1 < 0.0 {
        return;
    }
    let mut xs = Vec::new();
    for y in row0..=(row1 as u32) {
        let yc = y as f64 + 0.5;
        xs.clear();
        for i in 0..n {
            let (x0, y0) = vertices[i];
            let (x1, y1) = vertices[(i + 1) % n];
            if (y0 <= yc) != (y1 <= yc) {
                xs.push(x0 + (yc - y0) * (x1 - x0) / (y1 - y0));
            }
        }
        xs.sort_by(|a, b| a.total_cmp(b));
        for pair in xs.chunks_exact(2) {
            // pixel centers x + 0.5 in [a, b)
            let a = (pair[0] - 0.5).ceil().max(0.0);
            let b = (pair[1] - 0.5).ceil().min(width as f64);
            let mut x = a as i64;
            while (x as f64) < b {
                paint(x as u32, y);
                x += 1;
            }
        }
    }
}

/// Marks every pixel whose index lies within `radius` of the polyline.
pub fn draw_polyline(width: u32, height: u32, points: &[(f64, f64)], radius: f64, mut paint: impl FnMut(u32, u32)) {
    if points.is_empty() {
        return;
    }
    let r2 = radius * radius;
    let segs: Vec<((f64, f64), (f64, f64))> = if points.len() == 1 {
        vec![(points[0], points[0])]
    } else {
        points.windows(2).map(|w| (w[0], w[1])).collect()
    };
    let xmin = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min) - radius;
    let xmax = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max) + radius;
    let ymin = points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min) - radius;
    let ymax = points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max) + radius;
    let x0 = xmin.ceil().max(0.0) as i64;
    let x1 = xmax.floor().min(width as f64 - 1.0) as i64;
    let y0 = ymin.ceil().max(0.0) as i64;
    let y1 = ymax.floor().min(height as f64 - 1.0) as i64;
    for y in y0..=y1 {
        for x in x0..=x1 {
            let p = (x as f64, y as f64);
            if segs.iter().any(|&(a, b)| point_segment_dist2(p, a, b) <= r2 + 1e-9) {
                paint(x as u32, y as u32);
            }
        }
    }
}

pub(crate) fn point_segment_dist2(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 { 0.0 } else { (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0) };
    let (qx, qy) = (a.0 + t * dx - p.0, a.1 + t * dy - p.1);
    qx * qx + qy * qy
}

/// Rasterizes a document into `[Task-1 baselines, Task-2 zones]` label maps at
/// `tw × th`. Coordinates are scaled from the page size first.
pub fn encode_ground_truth(
    doc: &PageDocument,
    schema: &ZoneSchema,
    tw: u32,
    th: u32,
    baseline_width: f64,
) -> Result<LabelMapStack, RasterError> {
    if schema.is_empty() {
        return Err(RasterError::EmptySchema);
    }
    if tw == 0 || th == 0 {
        return Err(RasterError::NonPositiveTarget(tw, th));
    }
    if !(baseline_width >= 1.0) {
        return Err(RasterError::BadBaselineWidth);
    }
    let sx = tw as f64 / doc.width as f64;
    let sy = th as f64 / doc.height as f64;
    let mut lines = LabelMap::zeros(1, BASELINE_CLASSES, tw, th);
    let mut zones = LabelMap::zeros(2, schema.num_classes(), tw, th);
    for z in &doc.zones {
        if let Some(class) = schema.class_of(&z.label) {
            let verts: Vec<(f64, f64)> =
                z.boundary.points().iter().map(|p| (p.x as f64 * sx, p.y as f64 * sy)).collect();
            fill_polygon_with(tw, th, &verts, |x, y| zones.set(x, y, class as u8));
        }
        for l in &z.lines {
            let pts: Vec<(f64, f64)> =
                l.baseline.points().iter().map(|p| (p.x as f64 * sx, p.y as f64 * sy)).collect();
            draw_polyline(tw, th, &pts, baseline_width / 2.0, |x, y| lines.set(x, y, 1));
        }
    }
    Ok(LabelMapStack::new(vec![lines, zones]))
}

/// Writes a label map as an 8-bit grayscale PNG whose values are class indices.
pub fn save_label_map(map: &LabelMap, path: &Path) -> Result<(), RasterError> {
    image::save_buffer(path, &map.data, map.width, map.height, image::ExtendedColorType::L8)?;
    Ok(())
}
