//! Ground calibration from the height-density histogram.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::{Point3, PointCloud};
use crate::denoise::{robust_filter, DenoiseError, HdbscanParams, RadiusFilterParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GroundError {
    #[error("cloud is empty")]
    EmptyCloud,
    #[error("all heights equal ({0})")]
    DegenerateHeights(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("search band holds no bins")]
    EmptyBand,
}

/// Uniform z-histogram. `counts` stays integral until smoothed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeightHistogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<f64>,
    pub smoothed: bool,
    /// Moving-average window; 1 when unsmoothed.
    pub step: usize,
}

impl HeightHistogram {
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn bin_width(&self) -> f64 {
        (self.bin_edges[self.bin_edges.len() - 1] - self.bin_edges[0]) / self.counts.len() as f64
    }

    pub fn bin_center(&self, i: usize) -> f64 {
        0.5 * (self.bin_edges[i] + self.bin_edges[i + 1])
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    /// Bin holding height `z`, clamped to the histogram.
    pub fn bin_of(&self, z: f64) -> usize {
        let lo = self.bin_edges[0];
        let i = ((z - lo) / self.bin_width()).floor();
        if i < 0.0 {
            0
        } else {
            (i as usize).min(self.counts.len() - 1)
        }
    }
}

/// Histogram over the cloud's own z-range; the top height lands in the last bin.
pub fn height_histogram(cloud: &PointCloud, n_interval: usize) -> Result<HeightHistogram, GroundError> {
    if cloud.is_empty() {
        return Err(GroundError::EmptyCloud);
    }
    let (lo, hi) = cloud
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.z), b.max(p.z)));
    if hi <= lo {
        return Err(GroundError::DegenerateHeights(lo));
    }
    height_histogram_in(cloud, n_interval, lo, hi)
}

/// Histogram over a fixed `[lo, hi]`; heights outside it are not counted.
pub fn height_histogram_in(cloud: &PointCloud, n_interval: usize, lo: f64, hi: f64) -> Result<HeightHistogram, GroundError> {
    if n_interval < 2 {
        return Err(GroundError::InvalidParameter(format!("n_interval must be at least 2, got {n_interval}")));
    }
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(GroundError::InvalidParameter(format!("bad height range [{lo}, {hi}]")));
    }
    let span = hi - lo;
    let nf = n_interval as f64;
    let mut bin_edges: Vec<f64> = (0..n_interval).map(|i| lo + span * i as f64 / nf).collect();
    bin_edges.push(hi);
    let mut counts = vec![0.0; n_interval];
    for p in cloud.iter() {
        if p.z < lo || p.z > hi {
            continue;
        }
        let mut i = (((p.z - lo) * nf / span).floor() as usize).min(n_interval - 1);
        // Settle rounding so the bin agrees with the stored edges.
        while i + 1 < n_interval && p.z >= bin_edges[i + 1] {
            i += 1;
        }
        while i > 0 && p.z < bin_edges[i] {
            i -= 1;
        }
        counts[i] += 1.0;
    }
    Ok(HeightHistogram { bin_edges, counts, smoothed: false, step: 1 })
}

/// Centered moving average of odd width `step`; the `(step - 1) / 2` bins at
/// each end, which lack a full window, are dropped.
pub fn smooth_histogram(hist: &HeightHistogram, step: usize) -> Result<HeightHistogram, GroundError> {
    let n = hist.len();
    if step == 0 || step % 2 == 0 || step > n {
        return Err(GroundError::InvalidParameter(format!("step must be odd and in 1..={n}, got {step}")));
    }
    let half = (step - 1) / 2;
    let counts = (half..n - half)
        .map(|i| hist.counts[i - half..=i + half].iter().sum::<f64>() / step as f64)
        .collect();
    Ok(HeightHistogram {
        bin_edges: hist.bin_edges[half..=n - half].to_vec(),
        counts,
        smoothed: true,
        step,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroundMode {
    FirstPeak,
    MidPlateau,
    /// Externally supplied ground height, meters.
    Override(f64),
}

impl GroundMode {
    pub fn name(&self) -> &'static str {
        match self {
            GroundMode::FirstPeak => "first-peak",
            GroundMode::MidPlateau => "mid-plateau",
            GroundMode::Override(_) => "override",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GroundEstimate {
    pub height: f64,
    pub mode: GroundMode,
    pub peak_bin: usize,
    /// Peak count over the median nonzero count; 0 for overrides.
    pub confidence: f64,
}

/// Peak rules for [`find_ground`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PeakRules {
    /// A local maximum below this fraction of the band maximum is skipped.
    pub peak_gate: f64,
    /// Bins within this fraction of the peak count form the plateau.
    pub plateau_tolerance: f64,
}

impl Default for PeakRules {
    fn default() -> Self {
        PeakRules { peak_gate: 0.5, plateau_tolerance: 0.1 }
    }
}

fn band_len(hist: &HeightHistogram, search_band: f64) -> usize {
    let top = hist.bin_edges[0] + search_band * (hist.bin_edges[hist.len()] - hist.bin_edges[0]);
    (0..hist.len()).take_while(|&i| hist.bin_center(i) <= top).count()
}

fn confidence(hist: &HeightHistogram, bin: usize) -> f64 {
    let mut nz: Vec<f64> = hist.counts.iter().copied().filter(|&c| c > 0.0).collect();
    if nz.is_empty() {
        return 0.0;
    }
    nz.sort_by(f64::total_cmp);
    let median = if nz.len() % 2 == 1 {
        nz[nz.len() / 2]
    } else {
        0.5 * (nz[nz.len() / 2 - 1] + nz[nz.len() / 2])
    };
    hist.counts[bin] / median
}

/// First significant local maximum inside the band, or the band's first
/// argmax when there is none.
fn first_peak(hist: &HeightHistogram, band: usize, gate: f64) -> usize {
    let c = &hist.counts;
    let band_max = c[..band].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for i in 0..band {
        let left = if i > 0 { c[i - 1] } else { f64::NEG_INFINITY };
        let right = if i + 1 < c.len() { c[i + 1] } else { f64::NEG_INFINITY };
        if c[i] > left && c[i] > right && c[i] >= gate * band_max {
            return i;
        }
    }
    (0..band).find(|&i| c[i] == band_max).unwrap_or(0)
}

/// Middle bin of the longest run whose counts are within the tolerance of
/// the band maximum; the lower middle for even runs.
fn mid_plateau(hist: &HeightHistogram, band: usize, tol: f64) -> usize {
    let c = &hist.counts;
    let band_max = c[..band].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let floor = (1.0 - tol) * band_max;
    let mut best = (0usize, 0usize);
    let mut i = 0;
    while i < band {
        if c[i] >= floor {
            let start = i;
            while i < band && c[i] >= floor {
                i += 1;
            }
            if i - start > best.1 - best.0 {
                best = (start, i);
            }
        } else {
            i += 1;
        }
    }
    best.0 + (best.1 - best.0 - 1) / 2
}

/// Locates the ground in the lowest `search_band` fraction of the
/// histogram's height span.
pub fn find_ground(hist: &HeightHistogram, search_band: f64, mode: GroundMode) -> Result<GroundEstimate, GroundError> {
    find_ground_with(hist, search_band, mode, &PeakRules::default())
}

pub fn find_ground_with(
    hist: &HeightHistogram,
    search_band: f64,
    mode: GroundMode,
    rules: &PeakRules,
) -> Result<GroundEstimate, GroundError> {
    if !(search_band > 0.0 && search_band <= 1.0) {
        return Err(GroundError::InvalidParameter(format!("search_band must lie in (0, 1], got {search_band}")));
    }
    if hist.is_empty() {
        return Err(GroundError::EmptyBand);
    }
    if let GroundMode::Override(h) = mode {
        return Ok(GroundEstimate { height: h, mode, peak_bin: hist.bin_of(h), confidence: 0.0 });
    }
    let band = band_len(hist, search_band);
    if band == 0 {
        return Err(GroundError::EmptyBand);
    }
    let bin = match mode {
        GroundMode::FirstPeak => first_peak(hist, band, rules.peak_gate),
        GroundMode::MidPlateau => mid_plateau(hist, band, rules.plateau_tolerance),
        GroundMode::Override(_) => unreachable!(),
    };
    Ok(GroundEstimate { height: hist.bin_center(bin), mode, peak_bin: bin, confidence: confidence(hist, bin) })
}

/// Sub-bin ground height: count-weighted mean of bin centers over the
/// contiguous bins around the peak that reach half its count.
pub fn refine_ground(hist: &HeightHistogram, est: &GroundEstimate) -> GroundEstimate {
    if matches!(est.mode, GroundMode::Override(_)) {
        return *est;
    }
    let c = &hist.counts;
    let half = 0.5 * c[est.peak_bin];
    let mut lo = est.peak_bin;
    while lo > 0 && c[lo - 1] >= half {
        lo -= 1;
    }
    let mut hi = est.peak_bin;
    while hi + 1 < c.len() && c[hi + 1] >= half {
        hi += 1;
    }
    let (mut sw, mut swz) = (0.0, 0.0);
    for i in lo..=hi {
        sw += c[i];
        swz += c[i] * hist.bin_center(i);
    }
    let mut out = *est;
    if sw > 0.0 {
        out.height = swz / sw;
    }
    out
}

/// Shifts the cloud down by `ground + margin` and drops what falls below 0.
pub fn calibrate(cloud: &PointCloud, ground: &GroundEstimate, margin: f64) -> PointCloud {
    let shift = ground.height + margin;
    cloud
        .iter()
        .map(|p| Point3::new(p.x, p.y, p.z - shift))
        .filter(|p| p.z >= 0.0)
        .collect()
}

/// Second robust-filter pass on the calibrated cloud.
pub fn fine_filter(cloud: &PointCloud, rparams: &RadiusFilterParams, hparams: &HdbscanParams) -> Result<PointCloud, DenoiseError> {
    robust_filter(cloud, rparams, hparams)
}
