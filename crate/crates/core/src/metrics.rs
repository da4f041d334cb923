//! Segmentation scores, a sampled-coverage baseline measure, and percentile
//! bootstrap intervals.
//!
//! The baseline measure is a surrogate: every polyline is sampled at unit arc
//! steps, predicted and reference lines are paired greedily by how much they
//! cover each other, and a sample counts as covered when it lies within the
//! reference line's tolerance of its partner.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::pagexml::Polyline;
use crate::raster::{point_segment_dist2, LabelMap};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("no pages to resample")]
    EmptyInput,
}

/// `counts[i][j]`: pixels of reference class `i` predicted as class `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(k: usize) -> Self {
        Self { counts: vec![vec![0; k]; k] }
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Reference pixel count of class `i` (τ_i).
    pub fn support(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    pub fn add(&mut self, other: &ConfusionMatrix) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
}

pub fn confusion(pred: &LabelMap, gt: &LabelMap, k: usize) -> Result<ConfusionMatrix, MetricsError> {
    if (pred.width, pred.height) != (gt.width, gt.height) {
        return Err(MetricsError::ShapeMismatch(format!(
            "prediction {}x{} vs reference {}x{}",
            pred.width, pred.height, gt.width, gt.height
        )));
    }
    let mut m = ConfusionMatrix::new(k);
    for (&p, &g) in pred.data.iter().zip(&gt.data) {
        if p as usize >= k || g as usize >= k {
            return Err(MetricsError::ShapeMismatch(format!("label {} outside 0..{k}", p.max(g))));
        }
        m.counts[g as usize][p as usize] += 1;
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegScores {
    pub pixel_acc: f64,
    pub mean_acc: f64,
    pub mean_iu: f64,
    pub fw_iu: f64,
}

/// Pixel accuracy, mean accuracy, mean IU and frequency-weighted IU. Classes
/// absent from the reference are left out of the two means.
pub fn seg_scores(m: &ConfusionMatrix) -> Result<SegScores, MetricsError> {
    let total = m.total() as f64;
    if total == 0.0 {
        return Err(MetricsError::EmptyMatrix);
    }
    let k = m.num_classes();
    let col = |j: usize| -> f64 { (0..k).map(|i| m.counts[i][j] as f64).sum() };
    let (mut diag, mut acc_sum, mut iu_sum, mut fw) = (0.0, 0.0, 0.0, 0.0);
    let mut present = 0usize;
    for i in 0..k {
        let nii = m.counts[i][i] as f64;
        let tau = m.support(i) as f64;
        diag += nii;
        if tau == 0.0 {
            continue;
        }
        present += 1;
        let iu = nii / (tau + col(i) - nii);
        acc_sum += nii / tau;
        iu_sum += iu;
        fw += tau * iu;
    }
    Ok(SegScores {
        pixel_acc: diag / total,
        mean_acc: acc_sum / present as f64,
        mean_iu: iu_sum / present as f64,
        fw_iu: fw / total,
    })
}

pub const TOLERANCE_MIN: f64 = 10.0;
pub const TOLERANCE_MAX: f64 = 30.0;
pub const TOLERANCE_FRACTION: f64 = 0.25;

fn to_f64(line: &Polyline) -> Vec<(f64, f64)> {
    line.points().iter().map(|p| (p.x as f64, p.y as f64)).collect()
}

/// Points at the midpoints of `ceil(L)` equal arc-length steps.
pub fn sample_polyline(pts: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let seg_len: Vec<f64> = pts.windows(2).map(|w| (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1)).collect();
    let total: f64 = seg_len.iter().sum();
    if total <= 0.0 {
        return pts.first().map(|&p| vec![p]).unwrap_or_default();
    }
    let n = total.ceil() as usize;
    let step = total / n as f64;
    let mut out = Vec::with_capacity(n);
    let (mut seg, mut start) = (0usize, 0.0f64);
    for i in 0..n {
        let s = (i as f64 + 0.5) * step;
        while seg + 1 < seg_len.len() && s > start + seg_len[seg] {
            start += seg_len[seg];
            seg += 1;
        }
        let t = if seg_len[seg] > 0.0 { ((s - start) / seg_len[seg]).clamp(0.0, 1.0) } else { 0.0 };
        let (a, b) = (pts[seg], pts[seg + 1]);
        out.push((a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1)));
    }
    out
}

fn mean_y(pts: &[(f64, f64)]) -> f64 {
    let s = sample_polyline(pts);
    s.iter().map(|p| p.1).sum::<f64>() / s.len() as f64
}

/// Per-line tolerance: a quarter of the vertical distance to the nearest
/// other line, clamped to `[10, 30]`; a lone line gets 30.
pub fn baseline_tolerance(gt: &[Polyline]) -> Vec<f64> {
    tolerance_f64(&gt.iter().map(to_f64).collect::<Vec<_>>())
}

pub fn tolerance_f64(gt: &[Vec<(f64, f64)>]) -> Vec<f64> {
    let ys: Vec<f64> = gt.iter().map(|l| mean_y(l)).collect();
    ys.iter()
        .enumerate()
        .map(|(i, &y)| {
            let gap = ys
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &o)| (o - y).abs())
                .fold(f64::INFINITY, f64::min);
            if gap.is_finite() {
                (TOLERANCE_FRACTION * gap).clamp(TOLERANCE_MIN, TOLERANCE_MAX)
            } else {
                TOLERANCE_MAX
            }
        })
        .collect()
}

fn dist2_to_polyline(p: (f64, f64), line: &[(f64, f64)]) -> f64 {
    if line.len() == 1 {
        return point_segment_dist2(p, line[0], line[0]);
    }
    line.windows(2).map(|w| point_segment_dist2(p, w[0], w[1])).fold(f64::INFINITY, f64::min)
}

fn covered(samples: &[(f64, f64)], other: &[(f64, f64)], tol: f64) -> u64 {
    let t2 = tol * tol;
    samples.iter().filter(|&&s| dist2_to_polyline(s, other) <= t2 + 1e-9).count() as u64
}

/// Sample counts behind the baseline scores of one page; these pool across pages.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BaselineCounts {
    pub covered_pred: u64,
    pub total_pred: u64,
    pub covered_gt: u64,
    pub total_gt: u64,
}

impl BaselineCounts {
    pub fn add(&mut self, o: &BaselineCounts) {
        self.covered_pred += o.covered_pred;
        self.total_pred += o.total_pred;
        self.covered_gt += o.covered_gt;
        self.total_gt += o.total_gt;
    }

    pub fn scores(&self) -> BaselineScores {
        let precision = if self.total_pred == 0 { 1.0 } else { self.covered_pred as f64 / self.total_pred as f64 };
        let recall = if self.total_gt == 0 { 1.0 } else { self.covered_gt as f64 / self.total_gt as f64 };
        BaselineScores::new(precision, recall)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl BaselineScores {
    pub fn new(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        Self { precision, recall, f1 }
    }
}

/// Sample counts for explicit coordinates and per-reference-line tolerances.
pub fn baseline_counts_f64(pred: &[Vec<(f64, f64)>], gt: &[Vec<(f64, f64)>], tol: &[f64]) -> BaselineCounts {
    let ps: Vec<Vec<(f64, f64)>> = pred.iter().map(|l| sample_polyline(l)).collect();
    let gs: Vec<Vec<(f64, f64)>> = gt.iter().map(|l| sample_polyline(l)).collect();
    let mut pairs = Vec::new();
    for (i, p) in pred.iter().enumerate() {
        for (j, g) in gt.iter().enumerate() {
            let cp = covered(&ps[i], g, tol[j]);
            let cg = covered(&gs[j], p, tol[j]);
            if cp + cg > 0 {
                pairs.push((cp + cg, i, j, cp, cg));
            }
        }
    }
    // Descending mutual coverage; index order breaks ties.
    pairs.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_p = vec![false; pred.len()];
    let mut used_g = vec![false; gt.len()];
    let mut c = BaselineCounts {
        total_pred: ps.iter().map(|s| s.len() as u64).sum(),
        total_gt: gs.iter().map(|s| s.len() as u64).sum(),
        ..Default::default()
    };
    for (_, i, j, cp, cg) in pairs {
        if used_p[i] || used_g[j] {
            continue;
        }
        used_p[i] = true;
        used_g[j] = true;
        c.covered_pred += cp;
        c.covered_gt += cg;
    }
    c
}

pub fn baseline_counts(pred: &[Polyline], gt: &[Polyline]) -> BaselineCounts {
    let g: Vec<Vec<(f64, f64)>> = gt.iter().map(to_f64).collect();
    let p: Vec<Vec<(f64, f64)>> = pred.iter().map(to_f64).collect();
    baseline_counts_f64(&p, &g, &tolerance_f64(&g))
}

/// Surrogate precision, recall and F1 of detected baselines. Both sets empty
/// scores 1; an empty side scores 0 on the measure that depends on the other.
pub fn baseline_prf(pred: &[Polyline], gt: &[Polyline]) -> BaselineScores {
    baseline_counts(pred, gt).scores()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapInterval {
    pub point: f64,
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
    pub reps: usize,
}

pub const BOOTSTRAP_REPS: usize = 10_000;
pub const BOOTSTRAP_LEVEL: f64 = 0.95;

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let (i, f) = (pos.floor() as usize, pos.fract());
    if i + 1 >= sorted.len() {
        sorted[sorted.len() - 1]
    } else {
        sorted[i] + f * (sorted[i + 1] - sorted[i])
    }
}

/// Percentile bootstrap over pages: resample with replacement `reps` times and
/// recompute the pooled `statistic`. The interval is widened to contain the
/// full-sample point estimate if the percentiles miss it.
pub fn bootstrap_ci<S>(
    pages: &[S],
    statistic: impl Fn(&[&S]) -> f64,
    reps: usize,
    level: f64,
    seed: u64,
) -> Result<BootstrapInterval, MetricsError> {
    if pages.is_empty() || reps == 0 {
        return Err(MetricsError::EmptyInput);
    }
    let all: Vec<&S> = pages.iter().collect();
    let point = statistic(&all);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sample: Vec<&S> = Vec::with_capacity(pages.len());
    let mut values = Vec::with_capacity(reps);
    for _ in 0..reps {
        sample.clear();
        sample.extend((0..pages.len()).map(|_| &pages[rng.random_range(0..pages.len())]));
        values.push(statistic(&sample));
    }
    values.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    let lo = quantile(&values, alpha).min(point);
    let hi = quantile(&values, 1.0 - alpha).max(point);
    Ok(BootstrapInterval { point, lo, hi, level, reps })
}

/// Metric rows with confidence intervals.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreReport {
    pub rows: Vec<(String, BootstrapInterval)>,
}

impl ScoreReport {
    pub fn push(&mut self, name: impl Into<String>, ci: BootstrapInterval) {
        self.rows.push((name.into(), ci));
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("metric,point,lo,hi\n");
        for (name, ci) in &self.rows {
            writeln!(s, "{name},{:.6},{:.6},{:.6}", ci.point, ci.lo, ci.hi).unwrap();
        }
        s
    }

    pub fn to_table(&self) -> String {
        let width = self.rows.iter().map(|(n, _)| n.len()).max().unwrap_or(6).max(6);
        let mut s = format!("{:<width$}  {:>8}  {:>8}  {:>8}\n", "metric", "point", "lo", "hi");
        for (name, ci) in &self.rows {
            writeln!(s, "{name:<width$}  {:>8.4}  {:>8.4}  {:>8.4}", ci.point, ci.lo, ci.hi).unwrap();
        }
        s
    }
}

/// Per-page inputs for the evaluation report.
#[derive(Debug, Clone)]
pub struct PageEval {
    pub baselines: BaselineCounts,
    pub zones: Option<ConfusionMatrix>,
}

/// Pooled baseline P/R/F1 and, when zone maps are present, the four
/// segmentation scores, each with a bootstrap interval.
pub fn evaluation_report(pages: &[PageEval], reps: usize, level: f64, seed: u64) -> Result<ScoreReport, MetricsError> {
    let mut report = ScoreReport::default();
    let pooled = |s: &[&PageEval]| {
        let mut c = BaselineCounts::default();
        for p in s {
            c.add(&p.baselines);
        }
        c.scores()
    };
    report.push("surrogate_precision", bootstrap_ci(pages, |s| pooled(s).precision, reps, level, seed)?);
    report.push("surrogate_recall", bootstrap_ci(pages, |s| pooled(s).recall, reps, level, seed)?);
    report.push("surrogate_f1", bootstrap_ci(pages, |s| pooled(s).f1, reps, level, seed)?);
    let zone_pages: Vec<&ConfusionMatrix> = pages.iter().filter_map(|p| p.zones.as_ref()).collect();
    if !zone_pages.is_empty() {
        let seg = |s: &[&&ConfusionMatrix]| {
            let mut m = ConfusionMatrix::new(s[0].num_classes());
            for c in s {
                m.add(c);
            }
            seg_scores(&m).unwrap_or(SegScores { pixel_acc: 0.0, mean_acc: 0.0, mean_iu: 0.0, fw_iu: 0.0 })
        };
        report.push("pixel_acc", bootstrap_ci(&zone_pages, |s| seg(s).pixel_acc, reps, level, seed)?);
        report.push("mean_acc", bootstrap_ci(&zone_pages, |s| seg(s).mean_acc, reps, level, seed)?);
        report.push("mean_iu", bootstrap_ci(&zone_pages, |s| seg(s).mean_iu, reps, level, seed)?);
        report.push("fw_iu", bootstrap_ci(&zone_pages, |s| seg(s).fw_iu, reps, level, seed)?);
    }
    Ok(report)
}
