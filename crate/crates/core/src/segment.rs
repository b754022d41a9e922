// SPDX-License-Identifier: MIT OR Apache-2.0

//! Multiple changepoints by binary segmentation around the single-changepoint
//! estimator.
//!
//! Segments are expanded best-first: the pending candidate with the largest
//! prominence is accepted, then both halves it creates are searched. The
//! first accepted changepoint is therefore always the full-data estimate.

use crate::data::MaskedMatrix;
use crate::detect::{detect, ChangepointEstimate, DetectConfig};
use crate::error::{Error, Result};
use crate::sigma::resolve_sigma;

/// How the noise scale is chosen for each segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaMode {
    /// One value for the whole series.
    Global,
    /// Re-estimated on every segment; falls back to the global value when the
    /// segment is too short to estimate.
    PerSegment,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationConfig {
    pub detect: DetectConfig,
    /// Keep at most this many changepoints.
    pub max_changepoints: Option<usize>,
    /// Only segments of length at least `2 * min_segment` are searched.
    pub min_segment: usize,
    /// Stop a branch when its peak falls below this.
    pub threshold: Option<f64>,
    pub sigma_mode: SigmaMode,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self {
            detect: DetectConfig::default(),
            max_changepoints: Some(1),
            min_segment: 10,
            threshold: None,
            sigma_mode: SigmaMode::Global,
        }
    }
}

impl SegmentationConfig {
    fn validate(&self) -> Result<()> {
        if self.min_segment < 2 {
            return Err(Error::invalid("min_segment must be at least 2"));
        }
        match (self.max_changepoints, self.threshold) {
            (None, None) => Err(Error::invalid(
                "binary segmentation needs max_changepoints or a threshold",
            )),
            (Some(0), _) => Err(Error::invalid("max_changepoints must be at least 1")),
            (_, Some(t)) if !(t >= 0.0 && t.is_finite()) => Err(Error::invalid(format!(
                "threshold must be finite and nonnegative, got {t}"
            ))),
            _ => Ok(()),
        }
    }
}

/// A changepoint together with where it was found.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentChangepoint {
    /// 1-based global time index.
    pub z_hat: usize,
    /// Peak of the projected series in the segment it was found in.
    pub prominence: f64,
    /// 0 for the full series.
    pub depth: usize,
    /// 1-based inclusive bounds `(lo, hi)` of that segment.
    pub segment: (usize, usize),
    pub lambda: f64,
    pub sigma: f64,
    pub estimate: ChangepointEstimate,
}

/// Why a searched segment yielded no changepoint.
#[derive(Debug, Clone, PartialEq)]
pub enum StopReason {
    /// The estimate's peak was below the configured threshold.
    BelowThreshold {
        candidate: Box<SegmentChangepoint>,
        threshold: f64,
    },
    Failed(Error),
}

impl StopReason {
    /// Machine-readable tag: `below_threshold` or the error code.
    pub fn code(&self) -> &'static str {
        match self {
            StopReason::BelowThreshold { .. } => "below_threshold",
            StopReason::Failed(e) => e.code(),
        }
    }

    pub fn message(&self) -> String {
        match self {
            StopReason::BelowThreshold {
                candidate,
                threshold,
            } => format!("peak {} below threshold {threshold}", candidate.prominence),
            StopReason::Failed(e) => e.to_string(),
        }
    }
}

/// A segment that was searched but yielded no changepoint.
#[derive(Debug, Clone, PartialEq)]
pub struct StoppedBranch {
    pub segment: (usize, usize),
    pub depth: usize,
    pub reason: StopReason,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationResult {
    /// In acceptance order; the first entry is the full-data estimate.
    pub changepoints: Vec<SegmentChangepoint>,
    /// Indices into `changepoints`, by descending prominence.
    pub order: Vec<usize>,
    pub stopped: Vec<StoppedBranch>,
}

impl SegmentationResult {
    /// Changepoints by descending prominence.
    pub fn ranked(&self) -> impl Iterator<Item = &SegmentChangepoint> {
        self.order.iter().map(|&i| &self.changepoints[i])
    }

    /// Error that stopped the root segment, if the estimator failed there.
    pub fn root_failure(&self) -> Option<&Error> {
        self.stopped
            .iter()
            .filter(|s| s.depth == 0)
            .find_map(|s| match &s.reason {
                StopReason::Failed(e) => Some(e),
                StopReason::BelowThreshold { .. } => None,
            })
    }

    /// The estimate on the full series, whether or not it was accepted.
    pub fn root_estimate(&self) -> Option<&SegmentChangepoint> {
        self.changepoints.iter().find(|c| c.depth == 0).or_else(|| {
            self.stopped.iter().find_map(|s| match &s.reason {
                StopReason::BelowThreshold { candidate, .. } if s.depth == 0 => Some(&**candidate),
                _ => None,
            })
        })
    }
}

struct Searcher<'a> {
    data: &'a MaskedMatrix,
    config: &'a SegmentationConfig,
    global_sigma: f64,
}

impl Searcher<'_> {
    fn search(&self, segment: (usize, usize), depth: usize) -> Result<SegmentChangepoint> {
        let (lo, hi) = segment;
        let sub = self.data.column_range(lo - 1, hi)?;
        let sigma = match self.config.sigma_mode {
            SigmaMode::Global => self.global_sigma,
            SigmaMode::PerSegment => resolve_sigma(&sub, None)
                .map(|(s, _)| s)
                .unwrap_or(self.global_sigma),
        };
        let d = &self.config.detect;
        let lambda = d.lambda.lambda(sub.n(), sub.p(), sigma, d.variant)?;
        let estimate = detect(&sub, sigma, d)?;
        Ok(SegmentChangepoint {
            z_hat: lo - 1 + estimate.z_hat,
            prominence: estimate.peak_value,
            depth,
            segment,
            lambda,
            sigma,
            estimate,
        })
    }

    fn children(&self, cp: &SegmentChangepoint) -> Vec<(usize, usize)> {
        let (lo, hi) = cp.segment;
        [(lo, cp.z_hat), (cp.z_hat + 1, hi)]
            .into_iter()
            .filter(|(a, b)| b + 1 - a >= 2 * self.config.min_segment)
            .collect()
    }
}

/// Binary segmentation with noise scale `sigma` for the full series.
pub fn binary_segmentation(
    m: &MaskedMatrix,
    sigma: f64,
    config: &SegmentationConfig,
) -> Result<SegmentationResult> {
    config.validate()?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    let searcher = Searcher {
        data: m,
        config,
        global_sigma: sigma,
    };
    let limit = config.max_changepoints.unwrap_or(usize::MAX);

    let mut changepoints: Vec<SegmentChangepoint> = Vec::new();
    let mut stopped = Vec::new();
    let mut pending: Vec<SegmentChangepoint> = Vec::new();

    let record = |segment,
                  depth,
                  outcome: Result<SegmentChangepoint>,
                  pending: &mut Vec<SegmentChangepoint>,
                  stopped: &mut Vec<StoppedBranch>| {
        let reason = match outcome {
            Ok(cp) => match config.threshold {
                Some(threshold) if cp.prominence < threshold => StopReason::BelowThreshold {
                    candidate: Box::new(cp),
                    threshold,
                },
                _ => return pending.push(cp),
            },
            Err(e) => StopReason::Failed(e),
        };
        stopped.push(StoppedBranch {
            segment,
            depth,
            reason,
        });
    };

    let root = (1, m.n());
    record(
        root,
        0,
        searcher.search(root, 0),
        &mut pending,
        &mut stopped,
    );

    while changepoints.len() < limit && !pending.is_empty() {
        let best = (0..pending.len())
            .max_by(|&a, &b| {
                pending[a]
                    .prominence
                    .total_cmp(&pending[b].prominence)
                    .then(pending[b].z_hat.cmp(&pending[a].z_hat))
            })
            .expect("nonempty");
        let cp = pending.swap_remove(best);
        let kids = searcher.children(&cp);
        let depth = cp.depth + 1;
        changepoints.push(cp);
        if changepoints.len() == limit {
            break;
        }
        let outcomes: Vec<_> = match kids.as_slice() {
            [a, b] => {
                let (ra, rb) =
                    rayon::join(|| searcher.search(*a, depth), || searcher.search(*b, depth));
                vec![(*a, ra), (*b, rb)]
            }
            _ => kids
                .iter()
                .map(|&s| (s, searcher.search(s, depth)))
                .collect(),
        };
        for (segment, outcome) in outcomes {
            record(segment, depth, outcome, &mut pending, &mut stopped);
        }
    }

    let mut order: Vec<usize> = (0..changepoints.len()).collect();
    order.sort_by(|&a, &b| {
        changepoints[b]
            .prominence
            .total_cmp(&changepoints[a].prominence)
            .then(changepoints[a].z_hat.cmp(&changepoints[b].z_hat))
    });
    Ok(SegmentationResult {
        changepoints,
        order,
        stopped,
    })
}
