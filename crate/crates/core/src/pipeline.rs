//! End-to-end segmentation: Lab conversion, Canny contours, SLIC, contour
//! splitting, superpixel descriptors and region growing.

use serde::{Deserialize, Serialize};

use crate::canny::{canny_lab, gray_levels, median_thresholds, CannyParams, ContourMap, DEFAULT_CANNY_SIGMA};
use crate::coslic::coslic_split;
use crate::error::Result;
use crate::features::{extract_features, FeatureVector};
use crate::gradient::gradient_field;
use crate::lab::{to_lab, LabImage};
use crate::labels::LabelMap;
use crate::merge::{init_state, run, MergeHistory, MergeParams, PairTrace};
use crate::raster::RasterImage;
use crate::slic::{slic, SlicParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineParams {
    pub slic: SlicParams,
    pub canny_sigma: f64,
    /// Hysteresis thresholds on the `[0, 255]` lightness scale; `None` picks
    /// them from the image median.
    pub canny_low: Option<f64>,
    pub canny_high: Option<f64>,
    pub merge: MergeParams,
}

impl Default for PipelineParams {
    fn default() -> Self {
        PipelineParams {
            slic: SlicParams::default(),
            canny_sigma: DEFAULT_CANNY_SIGMA,
            canny_low: None,
            canny_high: None,
            merge: MergeParams::default(),
        }
    }
}

impl PipelineParams {
    pub fn validate(&self) -> Result<()> {
        self.slic.validate()?;
        self.merge.validate()?;
        CannyParams {
            sigma: self.canny_sigma,
            low: self.canny_low.unwrap_or(0.0),
            high: self.canny_high.unwrap_or(f64::MAX),
        }
        .validate()
    }

    /// Concrete Canny settings for one image.
    pub fn canny_for(&self, lab: &LabImage) -> CannyParams {
        let (auto_low, auto_high) = match (self.canny_low, self.canny_high) {
            (Some(l), Some(h)) => (l, h),
            _ => median_thresholds(&gray_levels(lab)),
        };
        CannyParams {
            sigma: self.canny_sigma,
            low: self.canny_low.unwrap_or(auto_low),
            high: self.canny_high.unwrap_or(auto_high),
        }
    }
}

/// Over-segmentation stage outputs.
#[derive(Debug, Clone)]
pub struct Oversegmentation {
    pub lab: LabImage,
    pub canny: CannyParams,
    pub contours: ContourMap,
    pub slic: LabelMap,
    pub coslic: LabelMap,
}

pub fn oversegment(img: &RasterImage, params: &PipelineParams) -> Result<Oversegmentation> {
    params.validate()?;
    let lab = to_lab(img);
    let canny = params.canny_for(&lab);
    let contours = canny_lab(&lab, &canny)?;
    let sp = slic(&lab, &params.slic)?;
    let coslic = coslic_split(&sp, &contours, &lab)?;
    Ok(Oversegmentation {
        lab,
        canny,
        contours,
        slic: sp,
        coslic,
    })
}

#[derive(Debug, Clone)]
pub struct Segmentation {
    pub labels: LabelMap,
    pub overseg: Oversegmentation,
    pub features: Vec<FeatureVector>,
    pub history: MergeHistory,
    pub trace: Vec<PairTrace>,
}

impl Segmentation {
    pub fn num_regions(&self) -> usize {
        self.labels.count_distinct()
    }

    pub fn iterations(&self) -> usize {
        self.history.iterations.len()
    }

    /// Partition after the first `iterations` merge iterations.
    pub fn snapshot(&self, iterations: usize) -> Result<LabelMap> {
        self.history.partition_at(&self.overseg.coslic, iterations)
    }
}

/// Runs the whole pipeline on one image.
pub fn segment_image(img: &RasterImage, params: &PipelineParams) -> Result<Segmentation> {
    let overseg = oversegment(img, params)?;
    let grad = gradient_field(&overseg.lab);
    let features = extract_features(&overseg.lab, &grad, &overseg.coslic)?;
    let n = overseg.coslic.num_labels();
    let (labels, history, trace) = if n < 2 {
        log::debug!("single superpixel, nothing to merge");
        let history = MergeHistory {
            num_superpixels: n,
            ..Default::default()
        };
        (overseg.coslic.clone(), history, Vec::new())
    } else {
        let state = init_state(&overseg.coslic, &features, &overseg.contours, &params.merge)?;
        let out = run(state)?;
        (out.labels, out.history, out.trace)
    };
    log::debug!(
        "{} superpixels -> {} regions in {} iterations",
        n,
        labels.count_distinct(),
        history.iterations.len()
    );
    Ok(Segmentation {
        labels,
        overseg,
        features,
        history,
        trace,
    })
}
