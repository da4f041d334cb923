//! Consolidation of pixel predictions into zones and baselines.

pub mod consolidate;
pub mod contour;
pub mod otsu;
pub mod polyline;

pub use consolidate::{consolidate_page, ConsolidateMode, ConsolidateParams};
pub use contour::{baseline_regions, extract_contours, label_components, polygon_mask, zone_contours, Contour};
pub use otsu::{otsu, otsu_threshold, OtsuResult};
pub use polyline::{detect_baseline, lower_envelope, reduce_indices, reduce_polyline, DEFAULT_VERTICES};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GeometryError {
    #[error("no ink found in the baseline region")]
    NoInk,
    #[error("curve too short to form a polyline")]
    Degenerate,
    #[error("cannot reduce {n} points to {m} vertices")]
    BadM { m: usize, n: usize },
}
