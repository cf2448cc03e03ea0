//! Per-frame segment records: the `hopmap-ingest/1` line format, validation
//! and the record filters applied before map construction.
//!
//! File layout: the first non-blank line is a header object, every following
//! line is one [`SegmentRecord`] as a JSON object.
//!
//! ```text
//! {"format":"hopmap-ingest/1","descriptor_dim":3,"pano_wrap":false,"frames":[{"frame_id":0,"image_width":640,"image_height":480}]}
//! {"frame_id":0,"segment_id":0,"centroid_x":10.0,"centroid_y":20.0,"area_px":900.0,"bbox":[0.0,5.0,25.0,35.0],"descriptor":[1.0,0.0,0.0]}
//! ```
//!
//! A file with no lines at all is an empty set of frames.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{HopmapError, Result};
use crate::vector::{dot, norm};

pub const INGEST_FORMAT: &str = "hopmap-ingest/1";

/// Largest accepted deviation of a descriptor norm from 1 before rejection.
pub const NORM_REJECT_TOLERANCE: f64 = 1e-3;
/// Deviations at or below this are treated as already normalized.
const NORM_EXACT_TOLERANCE: f64 = 1e-12;

pub const DEFAULT_TAU_STUFF: f64 = 0.9;
pub const DEFAULT_MIN_AREA_FRAC: f64 = 0.002;

/// One observed image segment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub frame_id: usize,
    pub segment_id: usize,
    pub centroid_x: f64,
    pub centroid_y: f64,
    pub area_px: f64,
    /// `[x_min, y_min, x_max, y_max]` in pixels.
    pub bbox: [f64; 4],
    pub descriptor: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semantic_vector: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_instance: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_category: Option<i64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameMeta {
    pub frame_id: usize,
    pub image_width: u32,
    pub image_height: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<f64>,
    /// Ground-truth corresponding map frame, present on labelled query sets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_map_frame: Option<usize>,
}

impl FrameMeta {
    pub fn new(frame_id: usize, image_width: u32, image_height: u32) -> Self {
        FrameMeta {
            frame_id,
            image_width,
            image_height,
            timestamp: None,
            gt_map_frame: None,
        }
    }

    pub fn image_area(&self) -> f64 {
        f64::from(self.image_width) * f64::from(self.image_height)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    descriptor_dim: usize,
    #[serde(default)]
    pano_wrap: bool,
    frames: Vec<FrameMeta>,
}

/// Frames in index order with their segment records grouped per frame.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FrameSet {
    pub frames: Vec<FrameMeta>,
    /// `records[t]` holds the segments of `frames[t]`, sorted by segment id.
    pub records: Vec<Vec<SegmentRecord>>,
    pub pano_wrap: bool,
    pub descriptor_dim: usize,
}

impl FrameSet {
    /// Builds a validated frame set from loose parts. Records are grouped
    /// by frame and sorted by segment id.
    pub fn new(
        frames: Vec<FrameMeta>,
        records: Vec<SegmentRecord>,
        pano_wrap: bool,
    ) -> Result<Self> {
        let descriptor_dim = records.first().map_or(0, |r| r.descriptor.len());
        let mut fs = FrameSet {
            records: vec![Vec::new(); frames.len()],
            frames,
            pano_wrap,
            descriptor_dim,
        };
        fs.frames.sort_by_key(|f| f.frame_id);
        for (t, f) in fs.frames.iter().enumerate() {
            if f.frame_id != t {
                return Err(HopmapError::Validation(format!(
                    "frame ids must be contiguous from 0; found {} at position {t}",
                    f.frame_id
                )));
            }
        }
        for r in records {
            let t = r.frame_id;
            match fs.records.get_mut(t) {
                Some(bucket) => bucket.push(r),
                None => {
                    return Err(HopmapError::Validation(format!(
                        "record (frame {t}, segment {}) references an unknown frame",
                        r.segment_id
                    )))
                }
            }
        }
        for bucket in &mut fs.records {
            bucket.sort_by_key(|r| r.segment_id);
        }
        fs.validate_and_normalize()?;
        Ok(fs)
    }

    pub fn num_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn num_records(&self) -> usize {
        self.records.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn iter_records(&self) -> impl Iterator<Item = &SegmentRecord> {
        self.records.iter().flatten()
    }

    /// Relabels frames so that old frame `shift` becomes frame 0, wrapping
    /// around. Used to move the cut of a panoramic traverse.
    pub fn rotated(&self, shift: usize) -> FrameSet {
        let n = self.frames.len();
        if n == 0 {
            return self.clone();
        }
        let shift = shift % n;
        let mut out = FrameSet {
            frames: Vec::with_capacity(n),
            records: Vec::with_capacity(n),
            pano_wrap: self.pano_wrap,
            descriptor_dim: self.descriptor_dim,
        };
        for new_t in 0..n {
            let old_t = (new_t + shift) % n;
            let mut meta = self.frames[old_t].clone();
            meta.frame_id = new_t;
            out.frames.push(meta);
            out.records.push(
                self.records[old_t]
                    .iter()
                    .cloned()
                    .map(|mut r| {
                        r.frame_id = new_t;
                        r
                    })
                    .collect(),
            );
        }
        out
    }

    fn validate_and_normalize(&mut self) -> Result<()> {
        let dim = self.descriptor_dim;
        let mut semantic_dim = None;
        let mut seen = HashSet::new();
        for (meta, bucket) in self.frames.iter().zip(self.records.iter_mut()) {
            for r in bucket.iter_mut() {
                let who = format!("record (frame {}, segment {})", r.frame_id, r.segment_id);
                if !seen.insert((r.frame_id, r.segment_id)) {
                    return Err(HopmapError::Validation(format!("duplicate {who}")));
                }
                if r.descriptor.len() != dim || dim == 0 {
                    return Err(HopmapError::Validation(format!(
                        "{who}: descriptor has dimension {}, expected {dim}",
                        r.descriptor.len()
                    )));
                }
                let (w, h) = (f64::from(meta.image_width), f64::from(meta.image_height));
                let in_bounds = |v: f64, hi: f64| v.is_finite() && (0.0..=hi).contains(&v);
                if !in_bounds(r.centroid_x, w) || !in_bounds(r.centroid_y, h) {
                    return Err(HopmapError::Validation(format!(
                        "{who}: centroid ({}, {}) outside the {w}x{h} image",
                        r.centroid_x, r.centroid_y
                    )));
                }
                if !(r.area_px > 0.0 && r.area_px.is_finite()) {
                    return Err(HopmapError::Validation(format!(
                        "{who}: area_px must be positive, got {}",
                        r.area_px
                    )));
                }
                unit_normalize(&mut r.descriptor, &who, "descriptor")?;
                if let Some(sem) = r.semantic_vector.as_mut() {
                    match semantic_dim {
                        None => semantic_dim = Some(sem.len()),
                        Some(d) if d != sem.len() => {
                            return Err(HopmapError::Validation(format!(
                                "{who}: semantic_vector has dimension {}, expected {d}",
                                sem.len()
                            )))
                        }
                        Some(_) => {}
                    }
                    unit_normalize(sem, &who, "semantic_vector")?;
                }
            }
        }
        Ok(())
    }
}

fn unit_normalize(v: &mut [f64], who: &str, field: &str) -> Result<()> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(HopmapError::Validation(format!(
            "{who}: {field} is not finite"
        )));
    }
    let n = norm(v);
    let dev = (n - 1.0).abs();
    if dev > NORM_REJECT_TOLERANCE {
        return Err(HopmapError::Validation(format!(
            "{who}: {field} norm {n} deviates from 1 by more than {NORM_REJECT_TOLERANCE}"
        )));
    }
    if dev > NORM_EXACT_TOLERANCE {
        v.iter_mut().for_each(|x| *x /= n);
    }
    Ok(())
}

/// Reads and validates an ingest file.
pub fn parse_frame_records(path: impl AsRef<Path>) -> Result<FrameSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_frame_records_str(&text, path)
}

/// Parses ingest text; `path` is only used in error messages.
pub fn parse_frame_records_str(text: &str, path: &Path) -> Result<FrameSet> {
    let parse_err = |line: usize, message: String| HopmapError::Parse {
        path: PathBuf::from(path),
        line,
        message,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let Some((header_line, header_text)) = lines.next() else {
        return Ok(FrameSet::default());
    };
    let header: Header = serde_json::from_str(header_text)
        .map_err(|e| parse_err(header_line, format!("bad header: {e}")))?;
    if header.format != INGEST_FORMAT {
        return Err(parse_err(
            header_line,
            format!("format {:?}, expected {INGEST_FORMAT:?}", header.format),
        ));
    }

    let mut records = Vec::new();
    for (line, body) in lines {
        let rec: SegmentRecord =
            serde_json::from_str(body).map_err(|e| parse_err(line, e.to_string()))?;
        if rec.descriptor.len() != header.descriptor_dim {
            return Err(parse_err(
                line,
                format!(
                    "descriptor has dimension {}, header declares {}",
                    rec.descriptor.len(),
                    header.descriptor_dim
                ),
            ));
        }
        records.push(rec);
    }
    let mut fs = FrameSet::new(header.frames, records, header.pano_wrap)?;
    fs.descriptor_dim = header.descriptor_dim;
    Ok(fs)
}

/// Serializes a frame set to ingest text. Floats are written in shortest
/// round-trip decimal form, so parsing the output reproduces `fs` exactly.
pub fn to_ingest_string(fs: &FrameSet) -> Result<String> {
    if fs.is_empty() {
        return Ok(String::new());
    }
    let header = Header {
        format: INGEST_FORMAT.to_string(),
        descriptor_dim: fs.descriptor_dim,
        pano_wrap: fs.pano_wrap,
        frames: fs.frames.clone(),
    };
    let mut out = serde_json::to_string(&header)?;
    out.push('\n');
    for r in fs.iter_records() {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn write_frame_records(fs: &FrameSet, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_ingest_string(fs)?)?;
    Ok(())
}

/// Drops records whose semantic vector is closer than `tau_stuff` (by dot
/// product) to any background-category text embedding. Records without a
/// semantic vector are kept.
pub fn filter_stuff(fs: &FrameSet, stuff_vectors: &[Vec<f64>], tau_stuff: f64) -> FrameSet {
    retain_records(fs, |_, r| match &r.semantic_vector {
        Some(sem) => !stuff_vectors.iter().any(|s| dot(sem, s) > tau_stuff),
        None => true,
    })
}

/// Drops records covering less than `min_area_frac` of their image.
pub fn filter_small(fs: &FrameSet, min_area_frac: f64) -> FrameSet {
    retain_records(fs, |meta, r| r.area_px / meta.image_area() >= min_area_frac)
}

fn retain_records<F>(fs: &FrameSet, keep: F) -> FrameSet
where
    F: Fn(&FrameMeta, &SegmentRecord) -> bool,
{
    FrameSet {
        frames: fs.frames.clone(),
        records: fs
            .frames
            .iter()
            .zip(&fs.records)
            .map(|(meta, bucket)| bucket.iter().filter(|r| keep(meta, r)).cloned().collect())
            .collect(),
        pano_wrap: fs.pano_wrap,
        descriptor_dim: fs.descriptor_dim,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(frame_id: usize, segment_id: usize, descriptor: Vec<f64>) -> SegmentRecord {
        SegmentRecord {
            frame_id,
            segment_id,
            centroid_x: 100.0,
            centroid_y: 100.0,
            area_px: 5000.0,
            bbox: [60.0, 60.0, 140.0, 140.0],
            descriptor,
            semantic_vector: None,
            gt_instance: None,
            gt_category: None,
        }
    }

    fn two_by_three() -> FrameSet {
        let frames = vec![FrameMeta::new(0, 640, 480), FrameMeta::new(1, 640, 480)];
        let mut recs = Vec::new();
        for t in 0..2 {
            for s in 0..3 {
                let mut d = vec![0.0; 3];
                d[s] = 1.0;
                recs.push(record(t, s, d));
            }
        }
        FrameSet::new(frames, recs, false).unwrap()
    }

    fn parse(text: &str) -> Result<FrameSet> {
        parse_frame_records_str(text, Path::new("test.jsonl"))
    }

    #[test]
    fn parses_counts() {
        let text = to_ingest_string(&two_by_three()).unwrap();
        let fs = parse(&text).unwrap();
        assert_eq!(fs.num_frames(), 2);
        assert_eq!(fs.num_records(), 6);
    }

    #[test]
    fn empty_file_is_empty_frameset() {
        let fs = parse("").unwrap();
        assert_eq!(fs.num_frames(), 0);
        assert!(parse("\n  \n").unwrap().is_empty());
    }

    #[test]
    fn rejects_short_descriptor() {
        let mut text = to_ingest_string(&two_by_three()).unwrap();
        text.push_str(
            r#"{"frame_id":1,"segment_id":9,"centroid_x":1,"centroid_y":1,"area_px":10,"bbox":[0,0,2,2],"descriptor":[0.5,0.0,0.0]}"#,
        );
        let err = parse(&text).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, HopmapError::Validation(_)));
        assert!(msg.contains("frame 1, segment 9"), "{msg}");
    }

    #[test]
    fn near_unit_descriptors_are_renormalized() {
        let fs = FrameSet::new(
            vec![FrameMeta::new(0, 10, 10)],
            vec![record(0, 0, vec![1.0005, 0.0])],
            false,
        );
        // centroid outside the 10x10 image
        assert!(fs.is_err());
        let mut r = record(0, 0, vec![1.0005, 0.0]);
        r.centroid_x = 5.0;
        r.centroid_y = 5.0;
        let fs = FrameSet::new(vec![FrameMeta::new(0, 10, 10)], vec![r], false).unwrap();
        assert_eq!(fs.records[0][0].descriptor, vec![1.0, 0.0]);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let mut text = to_ingest_string(&two_by_three()).unwrap();
        text.push_str("{not json\n");
        match parse(&text).unwrap_err() {
            HopmapError::Parse { line, .. } => assert_eq!(line, 8),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_ids_rejected() {
        let frames = vec![FrameMeta::new(0, 640, 480)];
        let recs = vec![record(0, 1, vec![1.0, 0.0]), record(0, 1, vec![0.0, 1.0])];
        let err = FrameSet::new(frames, recs, false).unwrap_err();
        assert!(err.to_string().contains("duplicate"));
    }

    #[test]
    fn mismatched_dims_rejected() {
        let frames = vec![FrameMeta::new(0, 640, 480)];
        let recs = vec![
            record(0, 0, vec![1.0, 0.0]),
            record(0, 1, vec![0.0, 0.0, 1.0]),
        ];
        assert!(FrameSet::new(frames, recs, false).is_err());
    }

    #[test]
    fn wrong_format_string_rejected() {
        let text = r#"{"format":"hopmap-ingest/0","descriptor_dim":2,"frames":[]}"#;
        assert!(matches!(
            parse(text),
            Err(HopmapError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn stuff_filter_threshold() {
        let mut fs = two_by_three();
        let wall = vec![0.0, 1.0];
        fs.records[0][0].semantic_vector = Some(vec![(1.0f64 - 0.99 * 0.99).sqrt(), 0.99]);
        let out = filter_stuff(&fs, &[wall], 0.9);
        assert_eq!(out.num_records(), 5);
        assert_eq!(out.num_frames(), 2);
        assert_eq!(filter_stuff(&fs, &[], 0.9), fs);
    }

    #[test]
    fn small_filter_threshold() {
        let mut fs = two_by_three();
        fs.records[1][2].area_px = 100.0;
        let out = filter_small(&fs, DEFAULT_MIN_AREA_FRAC);
        assert_eq!(out.num_records(), 5);
        assert_eq!(filter_small(&fs, 0.0), fs);
    }

    #[test]
    fn rotation_relabels_frames() {
        let fs = two_by_three();
        let r = fs.rotated(1);
        assert_eq!(r.records[0][0].descriptor, fs.records[1][0].descriptor);
        assert!(r
            .records
            .iter()
            .enumerate()
            .all(|(t, b)| b.iter().all(|x| x.frame_id == t)));
        assert_eq!(fs.rotated(2), fs);
    }
}
