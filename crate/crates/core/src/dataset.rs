//! Ground-truth ingestion and batch evaluation over BSDS-style corpora.
//!
//! A manifest is a text file with one image per line:
//!
//! ```text
//! # image<TAB>gt[,gt...]
//! images/2092.jpg	gt/2092-1.seg,gt/2092-2.seg
//! ```
//!
//! Relative paths resolve against the manifest's directory. Ground truth is
//! read from BSDS `.seg` files or from 8/16-bit label PNGs.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::export::read_label_png;
use crate::labels::LabelMap;
use crate::metrics::{evaluate, GroundTruth, MetricValues, MetricsReport};
use crate::pipeline::{segment_image, PipelineParams};
use crate::raster::load_image;

/// One run of a `.seg` annotation: `label` covers columns
/// `col_start..=col_end` of `row`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegRun {
    pub label: u32,
    pub row: usize,
    pub col_start: usize,
    pub col_end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegAnnotation {
    pub width: usize,
    pub height: usize,
    pub segments: usize,
    pub runs: Vec<SegRun>,
}

impl SegAnnotation {
    pub fn parse(text: &str) -> Result<Self> {
        let mut width = None;
        let mut height = None;
        let mut segments = None;
        let mut lines = text.lines().enumerate();
        let header_value = |line: usize, v: Option<&str>| -> Result<usize> {
            v.and_then(|v| v.parse().ok()).ok_or(Error::Parse {
                line,
                message: "expected a non-negative integer".into(),
            })
        };
        let mut saw_data = false;
        for (i, line) in lines.by_ref() {
            let mut it = line.split_whitespace();
            match it.next() {
                Some("width") => width = Some(header_value(i + 1, it.next())?),
                Some("height") => height = Some(header_value(i + 1, it.next())?),
                Some("segments") => segments = Some(header_value(i + 1, it.next())?),
                Some("data") => {
                    saw_data = true;
                    break;
                }
                _ => {}
            }
        }
        let missing = |what: &str| Error::Parse {
            line: 0,
            message: format!("header lacks `{what}`"),
        };
        if !saw_data {
            return Err(missing("data"));
        }
        let width = width.ok_or_else(|| missing("width"))?;
        let height = height.ok_or_else(|| missing("height"))?;
        let segments = segments.ok_or_else(|| missing("segments"))?;

        let mut runs = Vec::new();
        for (i, line) in lines {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            let bad = |message: String| Error::Parse {
                line: i + 1,
                message,
            };
            if fields.len() != 4 {
                return Err(bad(format!("expected 4 fields, found {}", fields.len())));
            }
            let nums: Vec<usize> = fields
                .iter()
                .map(|f| f.parse::<usize>().map_err(|_| bad(format!("not an integer: {f}"))))
                .collect::<Result<_>>()?;
            let run = SegRun {
                label: nums[0] as u32,
                row: nums[1],
                col_start: nums[2],
                col_end: nums[3],
            };
            if run.row >= height || run.col_start > run.col_end || run.col_end >= width {
                return Err(bad(format!(
                    "run out of range for a {width}x{height} image: row {} cols {}..={}",
                    run.row, run.col_start, run.col_end
                )));
            }
            if run.label as usize >= segments {
                return Err(bad(format!(
                    "label {} not below segment count {segments}",
                    run.label
                )));
            }
            runs.push(run);
        }
        Ok(SegAnnotation {
            width,
            height,
            segments,
            runs,
        })
    }

    /// Rasterises the runs, requiring each pixel to be covered exactly once.
    pub fn to_label_map(&self) -> Result<LabelMap> {
        let (w, h) = (self.width, self.height);
        let mut labels = vec![u32::MAX; w * h];
        for r in &self.runs {
            for x in r.col_start..=r.col_end {
                let p = r.row * w + x;
                if labels[p] != u32::MAX {
                    return Err(Error::Partition(format!(
                        "pixel ({x}, {}) covered by more than one run",
                        r.row
                    )));
                }
                labels[p] = r.label;
            }
        }
        if let Some(p) = labels.iter().position(|&l| l == u32::MAX) {
            return Err(Error::Partition(format!(
                "pixel ({}, {}) not covered by any run",
                p % w,
                p / w
            )));
        }
        LabelMap::new(w, h, labels)
    }
}

pub fn parse_seg(path: impl AsRef<Path>) -> Result<LabelMap> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    SegAnnotation::parse(&text)?.to_label_map()
}

pub fn parse_labelmap_png(path: impl AsRef<Path>) -> Result<LabelMap> {
    read_label_png(path)
}

/// Loads a ground-truth map, choosing the parser by extension.
pub fn load_ground_truth(path: impl AsRef<Path>) -> Result<LabelMap> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("seg") => parse_seg(path),
        _ => parse_labelmap_png(path),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub image: PathBuf,
    pub ground_truth: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub params: PipelineParams,
}

impl DatasetManifest {
    /// Parses manifest text; relative paths are joined onto `base`.
    pub fn parse(text: &str, base: &Path, params: PipelineParams) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (image, gts) = line.split_once('\t').ok_or(Error::Parse {
                line: i + 1,
                message: "expected `image<TAB>gt[,gt...]`".into(),
            })?;
            let ground_truth: Vec<PathBuf> = gts
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| base.join(s))
                .collect();
            if ground_truth.is_empty() {
                return Err(Error::Parse {
                    line: i + 1,
                    message: "no ground-truth paths".into(),
                });
            }
            entries.push(ManifestEntry {
                image: base.join(image.trim()),
                ground_truth,
            });
        }
        if entries.is_empty() {
            return Err(Error::EmptyManifest);
        }
        Ok(DatasetManifest { entries, params })
    }

    pub fn load(path: impl AsRef<Path>, params: PipelineParams) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse(&text, base, params)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageResult {
    pub image: PathBuf,
    pub metrics: MetricsReport,
    pub regions: usize,
    pub iterations: usize,
    pub wall_time_ms: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageFailure {
    pub image: PathBuf,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub results: Vec<ImageResult>,
    pub failures: Vec<ImageFailure>,
}

impl DatasetSummary {
    /// Dataset-level mean of every metric over successful images.
    pub fn means(&self) -> Option<MetricValues> {
        let vals: Vec<MetricValues> = self.results.iter().map(|r| r.metrics.values()).collect();
        MetricValues::mean(&vals)
    }

    /// Per-image CSV: `image,br,ue,pri,voi,bde,gce,regions,iterations,wall_time_ms`.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::io("<csv>", std::io::Error::other(e));
        w.write_record([
            "image",
            "br",
            "ue",
            "pri",
            "voi",
            "bde",
            "gce",
            "regions",
            "iterations",
            "wall_time_ms",
        ])
        .map_err(io)?;
        for r in &self.results {
            let m = r.metrics.values();
            let mut row = vec![r.image.display().to_string()];
            row.extend(m.as_array().iter().map(|v| format!("{v:.6}")));
            row.push(r.regions.to_string());
            row.push(r.iterations.to_string());
            row.push(r.wall_time_ms.to_string());
            w.write_record(&row).map_err(io)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))
    }

    /// Timing-free table of dataset means, byte-identical across runs with
    /// the same manifest and parameters.
    pub fn write_table(&self, mut out: impl Write) -> Result<()> {
        let io = |e| Error::io("<table>", e);
        writeln!(out, "images,failed,br,ue,pri,voi,bde,gce").map_err(io)?;
        let m = self.means();
        let cells: Vec<String> = match m {
            Some(m) => m.as_array().iter().map(|v| format!("{v:.6}")).collect(),
            None => vec!["nan".to_string(); 6],
        };
        writeln!(
            out,
            "{},{},{}",
            self.results.len(),
            self.failures.len(),
            cells.join(",")
        )
        .map_err(io)
    }
}

/// Segments and evaluates one manifest entry.
pub fn run_entry(entry: &ManifestEntry, params: &PipelineParams) -> Result<ImageResult> {
    let start = Instant::now();
    let img = load_image(&entry.image)?;
    let gts = entry
        .ground_truth
        .iter()
        .map(load_ground_truth)
        .collect::<Result<Vec<_>>>()?;
    let gts = GroundTruth::new(gts)?;
    let seg = segment_image(&img, params)?;
    let metrics = evaluate(&seg.labels, &gts)?;
    Ok(ImageResult {
        image: entry.image.clone(),
        metrics,
        regions: seg.num_regions(),
        iterations: seg.iterations(),
        wall_time_ms: start.elapsed().as_millis(),
    })
}

/// Runs every entry in parallel. Failing images are logged and recorded,
/// never aborting the run; results keep manifest order.
pub fn run_dataset(manifest: &DatasetManifest) -> Result<DatasetSummary> {
    if manifest.entries.is_empty() {
        return Err(Error::EmptyManifest);
    }
    manifest.params.validate()?;
    let outcomes: Vec<Result<ImageResult>> = manifest
        .entries
        .par_iter()
        .map(|e| run_entry(e, &manifest.params))
        .collect();
    let mut summary = DatasetSummary {
        results: Vec::new(),
        failures: Vec::new(),
    };
    for (entry, outcome) in manifest.entries.iter().zip(outcomes) {
        match outcome {
            Ok(r) => summary.results.push(r),
            Err(e) => {
                log::warn!("{}: {e}", entry.image.display());
                summary.failures.push(ImageFailure {
                    image: entry.image.clone(),
                    error: e.to_string(),
                });
            }
        }
    }
    Ok(summary)
}
