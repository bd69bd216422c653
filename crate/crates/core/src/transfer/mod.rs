//! Transfer of scalar and tensor fields from old-mesh samples to new-mesh
//! query points by distance-weighted patches: MLS, LOGMLS and R-MLS.

pub mod field;
pub mod mls;
pub mod rotation;
pub mod search;
pub mod tensor;
pub mod weights;

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use field::{gauss_points, FieldLocation, FieldSamples, FieldValues};
pub use mls::{logmls_interpolate, mls_interpolate, BasisOrder, MlsKernel};
pub use rotation::rotation_mean;
pub use search::PointGrid;
pub use tensor::{decompose_tensor, tensor_interpolate_rmls, Mat3, ScalarScheme, TensorFactors};
pub use weights::normalized_weights;

use crate::mesh::{Mesh, Vec3};

/// Orphan queries listed in error messages.
const ORPHANS_SHOWN: usize = 20;

#[derive(Debug, Error)]
pub enum TransferError {
    #[error("empty sample patch")]
    EmptyPatch,
    #[error("all patch weights underflow with c = {c}; reduce c or the patch radius")]
    WeightUnderflow { c: f64 },
    #[error("patch of {samples} samples is rank deficient for basis order {order}")]
    RankDeficient { order: u8, samples: usize },
    #[error("sample {index} has nonpositive value {value}; LOGMLS needs positive data")]
    NonPositive { index: usize, value: f64 },
    #[error("{0}")]
    Tensor(String),
    #[error("sample {index}: {source}")]
    Sample {
        index: usize,
        source: Box<TransferError>,
    },
    #[error("rotation mean did not converge (rotations nearly half a turn apart); use a smaller patch radius")]
    RotationMean,
    #[error("{} query points have no samples within the grown radius: {}", .0.len(), orphan_list(.0))]
    Orphans(Vec<(usize, Vec3)>),
    #[error("query {index} at {point:?}: {source}")]
    Query {
        index: usize,
        point: [f64; 3],
        source: Box<TransferError>,
    },
    #[error("invalid transfer setup: {0}")]
    Invalid(String),
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("field file: {0}")]
    Csv(#[from] csv::Error),
    #[error("transfer config: {0}")]
    Parse(#[from] serde_json::Error),
}

fn orphan_list(points: &[(usize, Vec3)]) -> String {
    let mut s: Vec<String> = points
        .iter()
        .take(ORPHANS_SHOWN)
        .map(|(i, x)| format!("#{i} ({}, {}, {})", x.x, x.y, x.z))
        .collect();
    if points.len() > ORPHANS_SHOWN {
        s.push(format!("... {} more", points.len() - ORPHANS_SHOWN));
    }
    s.join(", ")
}

/// Interpolation scheme of one field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Scalars: MLS. Tensors: MLS of each component.
    Mls,
    /// Positive scalars only.
    LogMls,
    /// Tensors only: eigenvalues by LOGMLS, rotations on the rotation group.
    Rmls,
}

impl Scheme {
    fn default_for(values: &FieldValues) -> Self {
        match values {
            FieldValues::Scalar(_) => Scheme::Mls,
            FieldValues::Tensor(_) => Scheme::Rmls,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferConfig {
    /// Scheme for every field; defaults to MLS for scalars and R-MLS for tensors.
    #[serde(default)]
    pub scheme: Option<Scheme>,
    /// Per-field scheme overrides by field name.
    #[serde(default)]
    pub schemes: BTreeMap<String, Scheme>,
    #[serde(default = "default_order")]
    pub basis_order: BasisOrder,
    /// Patch radius.
    pub r_p: f64,
    /// Weight decay; defaults to `9 / r^2` for the radius `r` of each patch,
    /// including grown ones.
    #[serde(default)]
    pub c: Option<f64>,
    /// Fail instead of lowering the basis order on deficient patches.
    #[serde(default)]
    pub strict: bool,
}

fn default_order() -> BasisOrder {
    BasisOrder::Quadratic
}

/// Radius growth factor and number of growth steps for small patches.
const GROWTH: f64 = 1.5;
const GROWTH_STEPS: usize = 3;

impl TransferConfig {
    pub fn new(r_p: f64, basis_order: BasisOrder) -> Self {
        TransferConfig {
            scheme: None,
            schemes: BTreeMap::new(),
            basis_order,
            r_p,
            c: None,
            strict: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, TransferError> {
        let cfg: TransferConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, TransferError> {
        let text = std::fs::read_to_string(path).map_err(|source| TransferError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), TransferError> {
        if !(self.r_p > 0.0 && self.r_p.is_finite()) {
            return Err(TransferError::Invalid(format!("r_p = {} must be positive", self.r_p)));
        }
        if let Some(c) = self.c {
            if !(c >= 0.0 && c.is_finite()) {
                return Err(TransferError::Invalid(format!("c = {c} must be nonnegative")));
            }
        }
        Ok(())
    }

    /// Decay for a patch of radius `r`.
    pub fn decay(&self, r: f64) -> f64 {
        self.c.unwrap_or_else(|| weights::default_decay(r))
    }

    pub fn scheme_for(&self, name: &str, values: &FieldValues) -> Result<Scheme, TransferError> {
        let scheme = self
            .schemes
            .get(name)
            .copied()
            .or(self.scheme)
            .unwrap_or_else(|| Scheme::default_for(values));
        scheme.check(name, values)?;
        Ok(scheme)
    }
}

impl Scheme {
    fn check(self, name: &str, values: &FieldValues) -> Result<(), TransferError> {
        match (self, values) {
            (Scheme::Rmls, FieldValues::Scalar(_)) | (Scheme::LogMls, FieldValues::Tensor(_)) => {
                Err(TransferError::Invalid(format!(
                    "scheme {self:?} does not apply to {} field '{name}'",
                    values.kind()
                )))
            }
            _ => Ok(()),
        }
    }
}

/// Counters of one field transfer.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TransferSummary {
    pub queries: usize,
    /// Queries whose basis order was lowered.
    pub order_fallbacks: usize,
    /// Tensor queries that used the weight-only mean for eigenvectors.
    pub frame_fallbacks: usize,
    /// Queries whose patch radius had to grow.
    pub grown: usize,
}

impl std::fmt::Display for TransferSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} queries, {} basis fallbacks, {} eigenframe fallbacks, {} grown patches",
            self.queries, self.order_fallbacks, self.frame_fallbacks, self.grown
        )
    }
}

struct QueryResult {
    value: QueryValue,
    order: BasisOrder,
    frame_fallback: bool,
    grown: bool,
}

enum QueryValue {
    Scalar(f64),
    Tensor(Mat3),
}

/// Interpolates `samples` at `queries` with `scheme`.
pub fn transfer_samples(
    samples: &FieldSamples,
    queries: &[Vec3],
    scheme: Scheme,
    cfg: &TransferConfig,
) -> Result<(FieldValues, TransferSummary), TransferError> {
    cfg.validate()?;
    scheme.check("", &samples.values)?;
    if samples.is_empty() && !queries.is_empty() {
        return Err(TransferError::Orphans(queries.iter().copied().enumerate().collect()));
    }
    if let (Scheme::LogMls, FieldValues::Scalar(v)) = (scheme, &samples.values) {
        mls::check_positive(v)?;
    }
    let grid = PointGrid::new(&samples.points, cfg.r_p);
    let results: Vec<Result<Option<QueryResult>, TransferError>> = queries
        .par_iter()
        .enumerate()
        .map(|(i, xp)| {
            query(&grid, samples, xp, scheme, cfg).map_err(|e| TransferError::Query {
                index: i,
                point: (*xp).into(),
                source: Box::new(e),
            })
        })
        .collect();
    let orphans: Vec<(usize, Vec3)> = results
        .iter()
        .enumerate()
        .filter(|(_, r)| matches!(r, Ok(None)))
        .map(|(i, _)| (i, queries[i]))
        .collect();
    if !orphans.is_empty() {
        return Err(TransferError::Orphans(orphans));
    }
    let mut summary = TransferSummary {
        queries: queries.len(),
        ..Default::default()
    };
    let mut scalars = Vec::new();
    let mut tensors = Vec::new();
    for r in results {
        let r = r?.expect("orphans handled");
        summary.order_fallbacks += usize::from(r.order < cfg.basis_order);
        summary.frame_fallbacks += usize::from(r.frame_fallback);
        summary.grown += usize::from(r.grown);
        match r.value {
            QueryValue::Scalar(v) => scalars.push(v),
            QueryValue::Tensor(t) => tensors.push(t),
        }
    }
    let values = match samples.values {
        FieldValues::Scalar(_) => FieldValues::Scalar(scalars),
        FieldValues::Tensor(_) => FieldValues::Tensor(tensors),
    };
    Ok((values, summary))
}

/// One query; `None` for an orphan.
fn query(
    grid: &PointGrid,
    samples: &FieldSamples,
    xp: &Vec3,
    scheme: Scheme,
    cfg: &TransferConfig,
) -> Result<Option<QueryResult>, TransferError> {
    // grow the radius while the patch cannot support the requested basis
    let mut r = cfg.r_p;
    let mut grown = false;
    let mut step = 0;
    let (patch, w, kernel) = loop {
        let patch = grid.within(xp, r);
        let last = step == GROWTH_STEPS;
        if !patch.is_empty() {
            let points: Vec<Vec3> = patch.iter().map(|&j| samples.points[j]).collect();
            let w = normalized_weights(&points, xp, cfg.decay(r))?;
            match MlsKernel::new(&points, &w, xp, cfg.basis_order, true) {
                Ok(k) => break (patch, w, k),
                Err(e) if last => {
                    if cfg.strict {
                        return Err(e);
                    }
                    let k = MlsKernel::new(&points, &w, xp, cfg.basis_order, false)?;
                    break (patch, w, k);
                }
                Err(_) => {}
            }
        } else if last {
            return Ok(None);
        }
        r *= GROWTH;
        step += 1;
        grown = true;
    };
    let mut frame_fallback = false;
    let value = match &samples.values {
        FieldValues::Scalar(all) => {
            let v: Vec<f64> = patch.iter().map(|&j| all[j]).collect();
            QueryValue::Scalar(match scheme {
                Scheme::LogMls => kernel.apply_log(&v),
                _ => kernel.apply(&v),
            })
        }
        FieldValues::Tensor(all) => {
            let t: Vec<Mat3> = patch.iter().map(|&j| all[j]).collect();
            QueryValue::Tensor(match scheme {
                Scheme::Rmls => {
                    let out = tensor::rmls_with_kernel(&kernel, &t, &w, ScalarScheme::LogMls).map_err(|e| match e {
                        TransferError::Sample { index, source } => TransferError::Sample {
                            index: patch[index],
                            source,
                        },
                        other => other,
                    })?;
                    frame_fallback = out.q_fallback;
                    out.value
                }
                _ => tensor::componentwise_mls(&kernel, &t),
            })
        }
    };
    Ok(Some(QueryResult {
        value,
        order: kernel.order,
        frame_fallback,
        grown,
    }))
}

/// A field interpolated onto the new mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferredField {
    pub name: String,
    pub location: FieldLocation,
    pub scheme: Scheme,
    pub samples: FieldSamples,
    pub summary: TransferSummary,
}

/// Transfers named fields from `old` to `new`. Fields sampled at the old
/// quadrature points go to the new quadrature points, all others to the new
/// nodes.
pub fn transfer_fields(
    old: &Mesh,
    new: &Mesh,
    fields: &[(String, FieldSamples)],
    cfg: &TransferConfig,
) -> Result<Vec<TransferredField>, TransferError> {
    cfg.validate()?;
    fields
        .iter()
        .map(|(name, samples)| {
            let scheme = cfg.scheme_for(name, &samples.values)?;
            let location = FieldLocation::detect(old, &samples.points);
            let queries = location.query_points(new);
            let (values, summary) = transfer_samples(samples, &queries, scheme, cfg)?;
            if summary.order_fallbacks > 0 {
                log::warn!("field {name}: basis order lowered at {} queries", summary.order_fallbacks);
            }
            if summary.frame_fallbacks > 0 {
                log::warn!(
                    "field {name}: clustered eigenvalues, weight-only eigenframe mean at {} queries",
                    summary.frame_fallbacks
                );
            }
            Ok(TransferredField {
                name: name.clone(),
                location,
                scheme,
                samples: FieldSamples::new(queries, values)?,
                summary,
            })
        })
        .collect()
}
