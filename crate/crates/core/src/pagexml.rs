//! PAGE-XML layout documents: data model, parser and serializer.
//!
//! Zones are `TextRegion` elements whose label travels in the `custom`
//! attribute as `structure {type:<label>;}`. Text lines are represented only
//! by their `Baseline`.
//!
//! Coordinate conventions used across the crate:
//!
//! * polygon vertices sit on pixel corners; pixel `(x, y)` covers
//!   `[x, x+1) × [y, y+1)` and belongs to a polygon when its center does;
//! * polyline (baseline) vertices are pixel indices.

use std::fmt::Write as _;

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use thiserror::Error;

/// Namespace prefix shared by all PAGE content schema versions.
pub const PAGE_NS_PREFIX: &str = "http://schema.primaresearch.org/PAGE/gts/pagecontent/";

/// Namespace written by [`serialize_page`].
pub const PAGE_NS_2013: &str = "http://schema.primaresearch.org/PAGE/gts/pagecontent/2013-07-15";

/// Label of the synthetic whole-page zone produced when only baselines are
/// requested. It is accepted by every schema and carries no class index.
pub const PAGE_ZONE_LABEL: &str = "page";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PageXmlError {
    #[error("malformed XML: {0}")]
    MalformedXml(String),
    #[error("document has no Page element")]
    MissingPage,
    #[error("unsupported PAGE namespace `{0}`")]
    UnsupportedNamespace(String),
    #[error("bad coordinate string `{0}`")]
    BadCoords(String),
    #[error("zone label `{label}` (region `{region}`) is not in the schema")]
    UnknownLabel { region: String, label: String },
    #[error("schema error: {0}")]
    Schema(String),
}

#[derive(Debug, Error, Clone, Copy, PartialEq)]
#[error("scale factors must be positive, got ({0}, {1})")]
pub struct NonPositiveScale(pub f64, pub f64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Point {
    pub x: u32,
    pub y: u32,
}

impl Point {
    pub const fn new(x: u32, y: u32) -> Self {
        Self { x, y }
    }
}

fn dedup_consecutive(points: &mut Vec<Point>) {
    points.dedup();
}

/// Open piece-wise linear curve with at least two distinct consecutive points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Polyline {
    points: Vec<Point>,
}

impl Polyline {
    /// Collapses consecutive duplicates; `None` when fewer than two points remain.
    pub fn new(mut points: Vec<Point>) -> Option<Self> {
        dedup_consecutive(&mut points);
        (points.len() >= 2).then_some(Self { points })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn bbox(&self) -> BBox {
        BBox::of(&self.points)
    }

    /// Total arc length in pixels.
    pub fn length(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| {
                let dx = w[1].x as f64 - w[0].x as f64;
                let dy = w[1].y as f64 - w[0].y as f64;
                dx.hypot(dy)
            })
            .sum()
    }
}

/// Closed polygon (implicitly closed, at least three vertices, nonzero area).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Polygon {
    points: Vec<Point>,
}

impl Polygon {
    /// Collapses consecutive duplicates (including a repeated closing vertex);
    /// `None` for degenerate input.
    pub fn new(mut points: Vec<Point>) -> Option<Self> {
        dedup_consecutive(&mut points);
        while points.len() > 1 && points.first() == points.last() {
            points.pop();
        }
        if points.len() < 3 {
            return None;
        }
        let poly = Self { points };
        (poly.signed_area() != 0.0).then_some(poly)
    }

    /// Axis-aligned rectangle covering pixels `x0..x1`, `y0..y1`.
    pub fn rect(x0: u32, y0: u32, x1: u32, y1: u32) -> Option<Self> {
        Self::new(vec![
            Point::new(x0, y0),
            Point::new(x1, y0),
            Point::new(x1, y1),
            Point::new(x0, y1),
        ])
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// Shoelace sum in image coordinates (y down). Negative for polygons that
    /// run counterclockwise on screen.
    pub fn signed_area(&self) -> f64 {
        let n = self.points.len();
        let mut acc = 0i64;
        for i in 0..n {
            let a = self.points[i];
            let b = self.points[(i + 1) % n];
            acc += a.x as i64 * b.y as i64 - b.x as i64 * a.y as i64;
        }
        acc as f64 / 2.0
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn bbox(&self) -> BBox {
        BBox::of(&self.points)
    }
}

/// Inclusive bounding box over vertex coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BBox {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl BBox {
    fn of(points: &[Point]) -> Self {
        let mut b = BBox { x0: u32::MAX, y0: u32::MAX, x1: 0, y1: 0 };
        for p in points {
            b.x0 = b.x0.min(p.x);
            b.y0 = b.y0.min(p.y);
            b.x1 = b.x1.max(p.x);
            b.y1 = b.y1.max(p.y);
        }
        b
    }

    pub fn intersects(&self, other: &BBox) -> bool {
        self.x0 <= other.x1 && other.x0 <= self.x1 && self.y0 <= other.y1 && other.y0 <= self.y1
    }
}

/// Ordered zone vocabulary; class 0 is reserved for background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZoneSchema {
    labels: Vec<String>,
}

impl ZoneSchema {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self, PageXmlError> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        for (i, l) in labels.iter().enumerate() {
            if l.is_empty() || l == PAGE_ZONE_LABEL {
                return Err(PageXmlError::Schema(format!("reserved or empty label `{l}`")));
            }
            if labels[..i].contains(l) {
                return Err(PageXmlError::Schema(format!("duplicate label `{l}`")));
            }
        }
        Ok(Self { labels })
    }

    /// The six zone types of the notarial deed collection used in the
    /// original experiments.
    pub fn ohg() -> Self {
        Self::new(["$pag", "$tip", "$par", "$pac", "$not", "$nop"]).expect("static schema")
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Number of Task-2 classes including background.
    pub fn num_classes(&self) -> usize {
        self.labels.len() + 1
    }

    pub fn class_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label).map(|i| i + 1)
    }

    pub fn label_of(&self, class: usize) -> Option<&str> {
        class.checked_sub(1).and_then(|i| self.labels.get(i)).map(String::as_str)
    }

    fn accepts(&self, label: &str) -> bool {
        label == PAGE_ZONE_LABEL || self.class_of(label).is_some()
    }
}

impl Default for ZoneSchema {
    fn default() -> Self {
        Self::ohg()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextLine {
    pub id: String,
    pub baseline: Polyline,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Zone {
    pub id: String,
    pub label: String,
    pub boundary: Polygon,
    pub lines: Vec<TextLine>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PageDocument {
    pub image_filename: String,
    pub width: u32,
    pub height: u32,
    pub zones: Vec<Zone>,
}

impl PageDocument {
    pub fn new(image_filename: impl Into<String>, width: u32, height: u32) -> Self {
        Self { image_filename: image_filename.into(), width, height, zones: Vec::new() }
    }

    pub fn line_count(&self) -> usize {
        self.zones.iter().map(|z| z.lines.len()).sum()
    }

    pub fn baselines(&self) -> impl Iterator<Item = &Polyline> {
        self.zones.iter().flat_map(|z| z.lines.iter().map(|l| &l.baseline))
    }

    /// Zones sorted top-to-bottom, then left-to-right by bounding-box corner.
    /// The sort is stable, so coincident corners keep document order.
    pub fn in_reading_order(&self) -> Self {
        let mut doc = self.clone();
        doc.zones.sort_by_key(|z| {
            let b = z.boundary.bbox();
            (b.y0, b.x0)
        });
        doc
    }
}

/// Parser knobs.
#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    /// Map unknown labels to `fallback_label` instead of failing.
    pub lenient: bool,
    pub fallback_label: Option<String>,
}

/// Parsed document plus everything worth telling the caller about it.
#[derive(Debug, Clone)]
pub struct ParsedPage {
    pub doc: PageDocument,
    /// Namespace version string, e.g. `2013-07-15`.
    pub version: String,
    pub warnings: Vec<String>,
    /// `(region id, original label)` for labels replaced by the fallback.
    pub unknown_labels: Vec<(String, String)>,
}

/// Parses a PAGE-XML document with strict label handling.
pub fn parse_page(xml: &str, schema: &ZoneSchema) -> Result<PageDocument, PageXmlError> {
    parse_page_with(xml, schema, &ParseOptions::default()).map(|p| p.doc)
}

pub fn parse_page_with(
    xml: &str,
    schema: &ZoneSchema,
    opts: &ParseOptions,
) -> Result<ParsedPage, PageXmlError> {
    let mut reader = Reader::from_str(xml);
    reader.config_mut().trim_text(true);

    let mut version = None;
    let mut doc: Option<PageDocument> = None;
    let mut pages_seen = 0usize;
    let mut warnings = Vec::new();
    let mut unknown = Vec::new();

    // Open elements we care about.
    let mut region: Option<RegionBuilder> = None;
    let mut line: Option<LineBuilder> = None;
    let mut depth_in_region = 0usize;
    let mut line_depth = 0usize;

    loop {
        let ev = reader
            .read_event()
            .map_err(|e| PageXmlError::MalformedXml(e.to_string()))?;
        let (start, is_empty) = match &ev {
            Event::Start(s) => (Some(s.clone()), false),
            Event::Empty(s) => (Some(s.clone()), true),
            _ => (None, false),
        };
        if let Some(s) = start {
            let name = local_name(&s);
            match name.as_str() {
                "PcGts" => {
                    let ns = attr(&s, "xmlns")?.unwrap_or_default();
                    version = Some(check_namespace(&ns)?);
                }
                "Page" => {
                    pages_seen += 1;
                    if pages_seen == 1 {
                        let filename = attr(&s, "imageFilename")?.unwrap_or_default();
                        let w = parse_dim(attr(&s, "imageWidth")?, "imageWidth")?;
                        let h = parse_dim(attr(&s, "imageHeight")?, "imageHeight")?;
                        doc = Some(PageDocument::new(filename, w, h));
                    } else {
                        warnings.push("extra Page element ignored".to_string());
                    }
                }
                "TextRegion" if pages_seen == 1 && region.is_none() => {
                    let id = attr(&s, "id")?.unwrap_or_default();
                    let label = attr(&s, "custom")?
                        .and_then(|c| structure_type(&c))
                        .or(attr(&s, "type")?)
                        .unwrap_or_default();
                    region = Some(RegionBuilder { id, label, coords: None, lines: Vec::new() });
                    depth_in_region = 0;
                    if is_empty {
                        finish_region(&mut region, &mut doc, schema, opts, &mut warnings, &mut unknown)?;
                        continue;
                    }
                }
                "TextRegion" if region.is_some() => {
                    warnings.push("nested TextRegion ignored".to_string());
                    if !is_empty {
                        depth_in_region += 1;
                    }
                }
                "TextLine" if region.is_some() && line.is_none() => {
                    let id = attr(&s, "id")?.unwrap_or_default();
                    line = Some(LineBuilder { id, baseline: None });
                    line_depth = 0;
                    if is_empty {
                        finish_line(&mut line, &mut region, &mut warnings);
                        continue;
                    }
                }
                "Coords" if region.is_some() && line.is_none() && depth_in_region == 0 => {
                    if let Some(pts) = attr(&s, "points")? {
                        region.as_mut().unwrap().coords = Some(parse_points(&pts)?);
                    }
                }
                "Baseline" if line.is_some() => {
                    if let Some(pts) = attr(&s, "points")? {
                        line.as_mut().unwrap().baseline = Some(parse_points(&pts)?);
                    }
                }
                _ => {}
            }
            if !is_empty {
                if line.is_some() && name != "TextLine" {
                    line_depth += 1;
                } else if region.is_some() && line.is_none() && name != "TextRegion" {
                    depth_in_region += 1;
                }
            }
            continue;
        }
        match ev {
            Event::End(e) => {
                let name = String::from_utf8_lossy(e.local_name().as_ref()).into_owned();
                if line.is_some() {
                    if line_depth == 0 && name == "TextLine" {
                        finish_line(&mut line, &mut region, &mut warnings);
                    } else {
                        line_depth = line_depth.saturating_sub(1);
                    }
                } else if region.is_some() {
                    if depth_in_region == 0 && name == "TextRegion" {
                        finish_region(&mut region, &mut doc, schema, opts, &mut warnings, &mut unknown)?;
                    } else {
                        depth_in_region = depth_in_region.saturating_sub(1);
                    }
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }

    let version = version.ok_or_else(|| PageXmlError::MalformedXml("root is not PcGts".into()))?;
    let mut doc = doc.ok_or(PageXmlError::MissingPage)?;
    clamp_document(&mut doc, &mut warnings);
    Ok(ParsedPage { doc, version, warnings, unknown_labels: unknown })
}

struct RegionBuilder {
    id: String,
    label: String,
    coords: Option<Vec<Point>>,
    lines: Vec<TextLine>,
}

struct LineBuilder {
    id: String,
    baseline: Option<Vec<Point>>,
}

fn finish_line(line: &mut Option<LineBuilder>, region: &mut Option<RegionBuilder>, warnings: &mut Vec<String>) {
    let Some(l) = line.take() else { return };
    let Some(r) = region.as_mut() else { return };
    match l.baseline.and_then(Polyline::new) {
        Some(baseline) => r.lines.push(TextLine { id: l.id, baseline }),
        None => warnings.push(format!("text line `{}` has no usable baseline; skipped", l.id)),
    }
}

fn finish_region(
    region: &mut Option<RegionBuilder>,
    doc: &mut Option<PageDocument>,
    schema: &ZoneSchema,
    opts: &ParseOptions,
    warnings: &mut Vec<String>,
    unknown: &mut Vec<(String, String)>,
) -> Result<(), PageXmlError> {
    let Some(r) = region.take() else { return Ok(()) };
    let Some(doc) = doc.as_mut() else { return Ok(()) };
    let label = if schema.accepts(&r.label) {
        r.label
    } else {
        match (&opts.fallback_label, opts.lenient) {
            (Some(fb), true) if schema.accepts(fb) => {
                warnings.push(format!("region `{}`: label `{}` mapped to `{fb}`", r.id, r.label));
                unknown.push((r.id.clone(), r.label));
                fb.clone()
            }
            _ => return Err(PageXmlError::UnknownLabel { region: r.id, label: r.label }),
        }
    };
    match r.coords.and_then(|c| Polygon::new(c)) {
        Some(boundary) => doc.zones.push(Zone { id: r.id, label, boundary, lines: r.lines }),
        None => warnings.push(format!("region `{}` has degenerate coordinates; skipped", r.id)),
    }
    Ok(())
}

fn clamp_document(doc: &mut PageDocument, warnings: &mut Vec<String>) {
    let (w, h) = (doc.width, doc.height);
    let clamp = |p: &Point, clamped: &mut bool| {
        let q = Point::new(p.x.min(w), p.y.min(h));
        *clamped |= q != *p;
        q
    };
    let mut zones = Vec::with_capacity(doc.zones.len());
    for mut z in std::mem::take(&mut doc.zones) {
        let mut clamped = false;
        let pts: Vec<Point> = z.boundary.points().iter().map(|p| clamp(p, &mut clamped)).collect();
        if clamped {
            warnings.push(format!("region `{}` clamped to page bounds", z.id));
            match Polygon::new(pts) {
                Some(p) => z.boundary = p,
                None => {
                    warnings.push(format!("region `{}` degenerate after clamping; skipped", z.id));
                    continue;
                }
            }
        }
        let mut lines = Vec::with_capacity(z.lines.len());
        for mut l in std::mem::take(&mut z.lines) {
            let mut clamped = false;
            let pts: Vec<Point> = l.baseline.points().iter().map(|p| clamp(p, &mut clamped)).collect();
            if clamped {
                warnings.push(format!("baseline `{}` clamped to page bounds", l.id));
                match Polyline::new(pts) {
                    Some(p) => l.baseline = p,
                    None => continue,
                }
            }
            lines.push(l);
        }
        z.lines = lines;
        zones.push(z);
    }
    doc.zones = zones;
}

fn local_name(s: &BytesStart<'_>) -> String {
    String::from_utf8_lossy(s.local_name().as_ref()).into_owned()
}

fn attr(s: &BytesStart<'_>, key: &str) -> Result<Option<String>, PageXmlError> {
    for a in s.attributes() {
        let a = a.map_err(|e| PageXmlError::MalformedXml(e.to_string()))?;
        if a.key.as_ref() == key.as_bytes() {
            let v = a
                .unescape_value()
                .map_err(|e| PageXmlError::MalformedXml(e.to_string()))?;
            return Ok(Some(v.into_owned()));
        }
    }
    Ok(None)
}

fn parse_dim(v: Option<String>, what: &str) -> Result<u32, PageXmlError> {
    let v = v.ok_or_else(|| PageXmlError::MalformedXml(format!("Page lacks {what}")))?;
    match v.trim().parse::<u32>() {
        Ok(n) if n > 0 => Ok(n),
        _ => Err(PageXmlError::MalformedXml(format!("bad {what} `{v}`"))),
    }
}

/// Returns the namespace version (`YYYY-MM-DD`), requiring 2013 or later.
fn check_namespace(ns: &str) -> Result<String, PageXmlError> {
    let version = ns
        .strip_prefix(PAGE_NS_PREFIX)
        .ok_or_else(|| PageXmlError::UnsupportedNamespace(ns.to_string()))?;
    let year: u32 = version
        .get(..4)
        .and_then(|y| y.parse().ok())
        .ok_or_else(|| PageXmlError::UnsupportedNamespace(ns.to_string()))?;
    if year < 2013 {
        return Err(PageXmlError::UnsupportedNamespace(ns.to_string()));
    }
    Ok(version.to_string())
}

/// Extracts `<name>` from `... structure {type:<name>;} ...`.
fn structure_type(custom: &str) -> Option<String> {
    let rest = &custom[custom.find("structure")? + "structure".len()..];
    let body = &rest[rest.find('{')? + 1..];
    let body = &body[..body.find('}')?];
    body.split(';').find_map(|kv| {
        let (k, v) = kv.split_once(':')?;
        (k.trim() == "type").then(|| v.trim().to_string())
    })
}

/// Parses `"x,y x,y ..."`. Negative values are clamped to zero.
pub fn parse_points(s: &str) -> Result<Vec<Point>, PageXmlError> {
    let bad = || PageXmlError::BadCoords(s.to_string());
    let mut out = Vec::new();
    for pair in s.split_whitespace() {
        let (x, y) = pair.split_once(',').ok_or_else(bad)?;
        let x: f64 = x.trim().parse().map_err(|_| bad())?;
        let y: f64 = y.trim().parse().map_err(|_| bad())?;
        if !x.is_finite() || !y.is_finite() {
            return Err(bad());
        }
        out.push(Point::new(x.round().max(0.0) as u32, y.round().max(0.0) as u32));
    }
    if out.is_empty() {
        return Err(bad());
    }
    Ok(out)
}

fn format_points(points: &[Point]) -> String {
    let mut s = String::with_capacity(points.len() * 8);
    for (i, p) in points.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{},{}", p.x, p.y);
    }
    s
}

fn escape(s: &str) -> String {
    quick_xml::escape::escape(s).into_owned()
}

/// Serializes a document. Zones are written in reading order; output is a
/// pure function of the input.
pub fn serialize_page(doc: &PageDocument, _schema: &ZoneSchema) -> String {
    let doc = doc.in_reading_order();
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\n");
    let _ = writeln!(s, "<PcGts xmlns=\"{PAGE_NS_2013}\">");
    s.push_str("  <Metadata>\n    <Creator>doclayout</Creator>\n");
    s.push_str("    <Created>1970-01-01T00:00:00</Created>\n");
    s.push_str("    <LastChange>1970-01-01T00:00:00</LastChange>\n  </Metadata>\n");
    let _ = write!(
        s,
        "  <Page imageFilename=\"{}\" imageWidth=\"{}\" imageHeight=\"{}\"",
        escape(&doc.image_filename),
        doc.width,
        doc.height
    );
    if doc.zones.is_empty() {
        s.push_str("/>\n");
    } else {
        s.push_str(">\n");
        for z in &doc.zones {
            let _ = writeln!(
                s,
                "    <TextRegion id=\"{}\" custom=\"structure {{type:{};}}\">",
                escape(&z.id),
                escape(&z.label)
            );
            let _ = writeln!(s, "      <Coords points=\"{}\"/>", format_points(z.boundary.points()));
            for l in &z.lines {
                let _ = writeln!(s, "      <TextLine id=\"{}\">", escape(&l.id));
                let _ = writeln!(s, "        <Baseline points=\"{}\"/>", format_points(l.baseline.points()));
                s.push_str("      </TextLine>\n");
            }
            s.push_str("    </TextRegion>\n");
        }
        s.push_str("  </Page>\n");
    }
    s.push_str("</PcGts>\n");
    s
}

/// Scales every coordinate by `(sx, sy)` with rounding, then re-clamps to the
/// new page bounds.
pub fn scale_layout(doc: &PageDocument, sx: f64, sy: f64) -> Result<PageDocument, NonPositiveScale> {
    if !(sx > 0.0 && sy > 0.0 && sx.is_finite() && sy.is_finite()) {
        return Err(NonPositiveScale(sx, sy));
    }
    let width = ((doc.width as f64 * sx).round() as u32).max(1);
    let height = ((doc.height as f64 * sy).round() as u32).max(1);
    let map = |p: &Point| {
        Point::new(
            ((p.x as f64 * sx).round() as u32).min(width),
            ((p.y as f64 * sy).round() as u32).min(height),
        )
    };
    let mut out = PageDocument::new(doc.image_filename.clone(), width, height);
    for z in &doc.zones {
        // Rounding may collapse points; fall back to the unscaled shape rather
        // than dropping the element, so element counts are preserved.
        let boundary = Polygon::new(z.boundary.points().iter().map(map).collect())
            .unwrap_or_else(|| z.boundary.clone());
        let lines = z
            .lines
            .iter()
            .map(|l| TextLine {
                id: l.id.clone(),
                baseline: Polyline::new(l.baseline.points().iter().map(map).collect())
                    .unwrap_or_else(|| l.baseline.clone()),
            })
            .collect();
        out.zones.push(Zone { id: z.id.clone(), label: z.label.clone(), boundary, lines });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal(baseline: &str) -> String {
        format!(
            r#"<?xml version="1.0" encoding="UTF-8"?>
<PcGts xmlns="http://schema.primaresearch.org/PAGE/gts/pagecontent/2013-07-15">
  <Page imageFilename="a.png" imageWidth="300" imageHeight="200">
    <TextRegion id="r1" custom="readingOrder {{index:0;}} structure {{type:$par;}}">
      <Coords points="0,0 250,0 250,100 0,100"/>
      <TextLine id="l1"><Coords points="1,1 2,2 3,1"/><Baseline points="{baseline}"/></TextLine>
    </TextRegion>
  </Page>
</PcGts>"#
        )
    }

    #[test]
    fn parses_minimal_document() {
        let doc = parse_page(&minimal("10,50 200,50"), &ZoneSchema::ohg()).unwrap();
        assert_eq!(doc.zones.len(), 1);
        assert_eq!(doc.zones[0].label, "$par");
        assert_eq!(doc.zones[0].lines.len(), 1);
        assert_eq!(doc.zones[0].lines[0].baseline.points().len(), 2);
        assert_eq!((doc.width, doc.height), (300, 200));
    }

    #[test]
    fn duplicate_points_collapse() {
        let doc = parse_page(&minimal("10,50 10,50 200,50"), &ZoneSchema::ohg()).unwrap();
        let pts = doc.zones[0].lines[0].baseline.points();
        assert_eq!(pts, &[Point::new(10, 50), Point::new(200, 50)]);
    }

    #[test]
    fn coordinates_clamped_with_warning() {
        let parsed =
            parse_page_with(&minimal("10,50 900,50"), &ZoneSchema::ohg(), &ParseOptions::default()).unwrap();
        assert_eq!(parsed.doc.zones[0].lines[0].baseline.points()[1], Point::new(300, 50));
        assert_eq!(parsed.version, "2013-07-15");
        assert!(parsed.warnings.iter().any(|w| w.contains("clamped")));
    }

    #[test]
    fn error_paths() {
        let schema = ZoneSchema::ohg();
        assert!(matches!(parse_page("<PcGts", &schema), Err(PageXmlError::MalformedXml(_))));
        let no_page = format!("<PcGts xmlns=\"{PAGE_NS_2013}\"><Metadata/></PcGts>");
        assert_eq!(parse_page(&no_page, &schema), Err(PageXmlError::MissingPage));
        assert!(matches!(parse_page(&minimal("10;50 200,50"), &schema), Err(PageXmlError::BadCoords(_))));
        let old = minimal("1,1 5,5").replace("2013-07-15", "2010-03-19");
        assert!(matches!(parse_page(&old, &schema), Err(PageXmlError::UnsupportedNamespace(_))));
        let later = minimal("1,1 5,5").replace("2013-07-15", "2019-07-15");
        assert!(parse_page(&later, &schema).is_ok());
    }

    #[test]
    fn unknown_label_strict_and_lenient() {
        let xml = minimal("1,1 5,5").replace("$par", "$xyz");
        let schema = ZoneSchema::ohg();
        assert_eq!(
            parse_page(&xml, &schema),
            Err(PageXmlError::UnknownLabel { region: "r1".into(), label: "$xyz".into() })
        );
        let opts = ParseOptions { lenient: true, fallback_label: Some("$par".into()) };
        let parsed = parse_page_with(&xml, &schema, &opts).unwrap();
        assert_eq!(parsed.doc.zones[0].label, "$par");
        assert_eq!(parsed.unknown_labels, vec![("r1".to_string(), "$xyz".to_string())]);
    }

    #[test]
    fn empty_page_serializes_page_only() {
        let doc = PageDocument::new("x.png", 10, 10);
        let xml = serialize_page(&doc, &ZoneSchema::ohg());
        assert!(xml.contains("<Page imageFilename=\"x.png\" imageWidth=\"10\" imageHeight=\"10\"/>"));
        assert!(!xml.contains("TextRegion"));
        assert_eq!(parse_page(&xml, &ZoneSchema::ohg()).unwrap(), doc);
    }

    #[test]
    fn one_zone_one_baseline() {
        let doc = parse_page(&minimal("10,50 200,50"), &ZoneSchema::ohg()).unwrap();
        let xml = serialize_page(&doc, &ZoneSchema::ohg());
        assert_eq!(xml.matches("<TextRegion").count(), 1);
        assert_eq!(xml.matches("<Baseline").count(), 1);
        assert!(xml.contains("custom=\"structure {type:$par;}\""));
    }

    #[test]
    fn zones_written_in_reading_order() {
        let mut doc = PageDocument::new("x.png", 100, 100);
        for (id, y) in [("low", 40), ("high", 10)] {
            doc.zones.push(Zone {
                id: id.into(),
                label: "$par".into(),
                boundary: Polygon::rect(5, y, 50, y + 20).unwrap(),
                lines: vec![],
            });
        }
        let xml = serialize_page(&doc, &ZoneSchema::ohg());
        assert!(xml.find("id=\"high\"").unwrap() < xml.find("id=\"low\"").unwrap());
    }

    #[test]
    fn scale_examples() {
        let mut doc = PageDocument::new("x.png", 200, 100);
        doc.zones.push(Zone {
            id: "z".into(),
            label: "$par".into(),
            boundary: Polygon::rect(10, 10, 100, 50).unwrap(),
            lines: vec![TextLine {
                id: "l".into(),
                baseline: Polyline::new(vec![Point::new(100, 50), Point::new(150, 50)]).unwrap(),
            }],
        });
        assert_eq!(scale_layout(&doc, 1.0, 1.0).unwrap(), doc);
        let s = scale_layout(&doc, 0.5, 2.0).unwrap();
        assert_eq!(s.zones[0].lines[0].baseline.points()[0], Point::new(50, 100));
        assert_eq!((s.width, s.height), (100, 200));
        assert!(scale_layout(&doc, 0.0, 1.0).is_err());
        assert!(scale_layout(&doc, 1.0, -2.0).is_err());
    }

    #[test]
    fn schema_rules() {
        let s = ZoneSchema::ohg();
        assert_eq!(s.num_classes(), 7);
        assert_eq!(s.class_of("$pag"), Some(1));
        assert_eq!(s.label_of(6), Some("$nop"));
        assert_eq!(s.label_of(0), None);
        assert!(ZoneSchema::new(["a", "a"]).is_err());
        assert!(ZoneSchema::new([PAGE_ZONE_LABEL]).is_err());
    }

    #[test]
    fn structure_type_extraction() {
        assert_eq!(structure_type("structure {type:$pag;}").as_deref(), Some("$pag"));
        assert_eq!(structure_type("readingOrder {index:2;} structure {id:4; type:$not;}").as_deref(), Some("$not"));
        assert_eq!(structure_type("readingOrder {index:2;}"), None);
    }
}
