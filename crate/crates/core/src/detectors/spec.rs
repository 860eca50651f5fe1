use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum DetectorKind {
    Ec,
    Mcd,
    Ee,
    Hbos,
    Ocsvm,
    Dbscan,
    Optics,
    Isof,
    Lof,
    Cblof,
    Kmeans,
    Knn,
    Sod,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 13] = [
        DetectorKind::Ec,
        DetectorKind::Mcd,
        DetectorKind::Ee,
        DetectorKind::Hbos,
        DetectorKind::Ocsvm,
        DetectorKind::Dbscan,
        DetectorKind::Optics,
        DetectorKind::Isof,
        DetectorKind::Lof,
        DetectorKind::Cblof,
        DetectorKind::Kmeans,
        DetectorKind::Knn,
        DetectorKind::Sod,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DetectorKind::Ec => "EC",
            DetectorKind::Mcd => "MCD",
            DetectorKind::Ee => "EE",
            DetectorKind::Hbos => "HBOS",
            DetectorKind::Ocsvm => "OCSVM",
            DetectorKind::Dbscan => "DBSCAN",
            DetectorKind::Optics => "OPTICS",
            DetectorKind::Isof => "ISOF",
            DetectorKind::Lof => "LOF",
            DetectorKind::Cblof => "CBLOF",
            DetectorKind::Kmeans => "KMEANS",
            DetectorKind::Knn => "KNN",
            DetectorKind::Sod => "SOD",
        }
    }

    pub fn is_stochastic(self) -> bool {
        matches!(
            self,
            DetectorKind::Isof
                | DetectorKind::Kmeans
                | DetectorKind::Cblof
                | DetectorKind::Mcd
                | DetectorKind::Ee
                | DetectorKind::Ocsvm
        )
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_uppercase();
        DetectorKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| Error::Parameter(format!("unknown detector `{s}`")))
    }
}

/// Parses `all` or a comma-separated list of detector names.
pub fn parse_detector_list(s: &str) -> Result<Vec<DetectorKind>> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(DetectorKind::ALL.to_vec());
    }
    let kinds = s
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(str::parse)
        .collect::<Result<Vec<_>>>()?;
    if kinds.is_empty() {
        return Err(Error::Parameter("empty detector list".into()));
    }
    Ok(kinds)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EcParams {
    /// Native labels flag rows above this percentile of d_M^2 (0-100).
    pub percentile: f64,
}

impl Default for EcParams {
    fn default() -> Self {
        EcParams { percentile: 97.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McdParams {
    /// Expected outlier fraction; sets `h = floor(n (1 - alpha))` and the
    /// chi-squared label quantile.
    pub contamination: f64,
    /// Explicit subset size overriding the contamination rule.
    pub support_size: Option<usize>,
    pub n_starts: usize,
    pub n_best: usize,
    /// Relative determinant change that ends the C-step refinement.
    pub tol: f64,
    pub max_csteps: usize,
    /// Reweighting quantile (elliptic envelope only).
    pub reweight_quantile: f64,
}

impl Default for McdParams {
    fn default() -> Self {
        McdParams {
            contamination: 0.05,
            support_size: None,
            n_starts: 500,
            n_best: 10,
            tol: 1e-7,
            max_csteps: 500,
            reweight_quantile: 0.975,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HbosParams {
    /// Bin count; `None` uses `ceil(sqrt(n))`.
    pub bins: Option<usize>,
    pub density_floor: f64,
    /// Fixed label threshold on the score; `None` uses the contamination quantile.
    pub threshold: Option<f64>,
    pub contamination: f64,
}

impl Default for HbosParams {
    fn default() -> Self {
        HbosParams {
            bins: None,
            density_floor: 1e-12,
            threshold: None,
            contamination: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OcsvmParams {
    pub nu: f64,
    /// RBF width; `None` uses `1 / (p * var(X))`.
    pub gamma: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub cache_mb: usize,
}

impl Default for OcsvmParams {
    fn default() -> Self {
        OcsvmParams {
            nu: 0.05,
            gamma: None,
            tol: 1e-6,
            max_iter: 10_000,
            cache_mb: 256,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DbscanParams {
    /// Neighborhood radius; `None` uses a percentile of the core distance.
    pub eps: Option<f64>,
    /// Minimum neighborhood size counting the point itself; `None` uses `2p`.
    pub min_pts: Option<usize>,
    pub eps_percentile: f64,
}

impl Default for DbscanParams {
    fn default() -> Self {
        DbscanParams {
            eps: None,
            min_pts: None,
            eps_percentile: 90.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpticsParams {
    pub min_pts: Option<usize>,
    /// Native labels flag reachability above this quantile.
    pub label_quantile: f64,
}

impl Default for OpticsParams {
    fn default() -> Self {
        OpticsParams {
            min_pts: None,
            label_quantile: 0.95,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IsofParams {
    pub n_trees: usize,
    pub subsample: usize,
    pub contamination: f64,
}

impl Default for IsofParams {
    fn default() -> Self {
        IsofParams {
            n_trees: 100,
            subsample: 256,
            contamination: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LofParams {
    pub k: usize,
    pub threshold: f64,
}

impl Default for LofParams {
    fn default() -> Self {
        LofParams {
            k: 20,
            threshold: 1.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KmeansParams {
    pub k: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub contamination: f64,
}

impl Default for KmeansParams {
    fn default() -> Self {
        KmeansParams {
            k: 8,
            tol: 1e-6,
            max_iter: 300,
            contamination: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CblofParams {
    pub k: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// Share of rows that large clusters must cover.
    pub alpha: f64,
    /// Size ratio separating large from small clusters.
    pub beta: f64,
    /// Multiply scores by cluster size.
    pub weighted: bool,
    pub contamination: f64,
}

impl Default for CblofParams {
    fn default() -> Self {
        CblofParams {
            k: 8,
            tol: 1e-6,
            max_iter: 300,
            alpha: 0.9,
            beta: 5.0,
            weighted: false,
            contamination: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnnParams {
    pub k: usize,
    pub contamination: f64,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams {
            k: 5,
            contamination: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SodParams {
    /// Reference-set size.
    pub ref_size: usize,
    /// Neighbor-list length used for shared-neighbor similarity.
    pub snn_k: usize,
    /// A feature is relevant when its reference variance is below
    /// `alpha` times the mean reference variance.
    pub alpha: f64,
    pub contamination: f64,
}

impl Default for SodParams {
    fn default() -> Self {
        SodParams {
            ref_size: 20,
            snn_k: 20,
            alpha: 0.8,
            contamination: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "UPPERCASE")]
pub enum DetectorParams {
    Ec(EcParams),
    Mcd(McdParams),
    Ee(McdParams),
    Hbos(HbosParams),
    Ocsvm(OcsvmParams),
    Dbscan(DbscanParams),
    Optics(OpticsParams),
    Isof(IsofParams),
    Lof(LofParams),
    Cblof(CblofParams),
    Kmeans(KmeansParams),
    Knn(KnnParams),
    Sod(SodParams),
}

impl DetectorParams {
    pub fn default_for(kind: DetectorKind) -> Self {
        match kind {
            DetectorKind::Ec => DetectorParams::Ec(Default::default()),
            DetectorKind::Mcd => DetectorParams::Mcd(Default::default()),
            DetectorKind::Ee => DetectorParams::Ee(Default::default()),
            DetectorKind::Hbos => DetectorParams::Hbos(Default::default()),
            DetectorKind::Ocsvm => DetectorParams::Ocsvm(Default::default()),
            DetectorKind::Dbscan => DetectorParams::Dbscan(Default::default()),
            DetectorKind::Optics => DetectorParams::Optics(Default::default()),
            DetectorKind::Isof => DetectorParams::Isof(Default::default()),
            DetectorKind::Lof => DetectorParams::Lof(Default::default()),
            DetectorKind::Cblof => DetectorParams::Cblof(Default::default()),
            DetectorKind::Kmeans => DetectorParams::Kmeans(Default::default()),
            DetectorKind::Knn => DetectorParams::Knn(Default::default()),
            DetectorKind::Sod => DetectorParams::Sod(Default::default()),
        }
    }

    pub fn kind(&self) -> DetectorKind {
        match self {
            DetectorParams::Ec(_) => DetectorKind::Ec,
            DetectorParams::Mcd(_) => DetectorKind::Mcd,
            DetectorParams::Ee(_) => DetectorKind::Ee,
            DetectorParams::Hbos(_) => DetectorKind::Hbos,
            DetectorParams::Ocsvm(_) => DetectorKind::Ocsvm,
            DetectorParams::Dbscan(_) => DetectorKind::Dbscan,
            DetectorParams::Optics(_) => DetectorKind::Optics,
            DetectorParams::Isof(_) => DetectorKind::Isof,
            DetectorParams::Lof(_) => DetectorKind::Lof,
            DetectorParams::Cblof(_) => DetectorKind::Cblof,
            DetectorParams::Kmeans(_) => DetectorKind::Kmeans,
            DetectorParams::Knn(_) => DetectorKind::Knn,
            DetectorParams::Sod(_) => DetectorKind::Sod,
        }
    }

    /// Parses one detector's parameter table (without the `kind` tag).
    pub fn from_toml_table(kind: DetectorKind, table: toml::Table) -> Result<Self> {
        let v = toml::Value::Table(table);
        Ok(match kind {
            DetectorKind::Ec => DetectorParams::Ec(v.try_into()?),
            DetectorKind::Mcd => DetectorParams::Mcd(v.try_into()?),
            DetectorKind::Ee => DetectorParams::Ee(v.try_into()?),
            DetectorKind::Hbos => DetectorParams::Hbos(v.try_into()?),
            DetectorKind::Ocsvm => DetectorParams::Ocsvm(v.try_into()?),
            DetectorKind::Dbscan => DetectorParams::Dbscan(v.try_into()?),
            DetectorKind::Optics => DetectorParams::Optics(v.try_into()?),
            DetectorKind::Isof => DetectorParams::Isof(v.try_into()?),
            DetectorKind::Lof => DetectorParams::Lof(v.try_into()?),
            DetectorKind::Cblof => DetectorParams::Cblof(v.try_into()?),
            DetectorKind::Kmeans => DetectorParams::Kmeans(v.try_into()?),
            DetectorKind::Knn => DetectorParams::Knn(v.try_into()?),
            DetectorKind::Sod => DetectorParams::Sod(v.try_into()?),
        })
    }
}

fn fraction(name: &str, v: f64, lo_open: bool, hi_closed: bool) -> Result<()> {
    let ok_lo = if lo_open { v > 0.0 } else { v >= 0.0 };
    let ok_hi = if hi_closed { v <= 1.0 } else { v < 1.0 };
    if ok_lo && ok_hi && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{name} = {v} out of range")))
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{name} = {v} must be positive")))
    }
}

fn at_least(name: &str, v: usize, min: usize) -> Result<()> {
    if v >= min {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{name} = {v} must be >= {min}")))
    }
}

impl DetectorParams {
    /// Range checks that do not depend on the data shape.
    pub fn validate(&self) -> Result<()> {
        match self {
            DetectorParams::Ec(p) => {
                if !(p.percentile > 0.0 && p.percentile <= 100.0) {
                    return Err(Error::Parameter(format!("EC percentile {} out of (0, 100]", p.percentile)));
                }
            }
            DetectorParams::Mcd(p) | DetectorParams::Ee(p) => {
                fraction("contamination", p.contamination, false, false)?;
                fraction("reweight_quantile", p.reweight_quantile, true, false)?;
                at_least("n_starts", p.n_starts, 1)?;
                at_least("n_best", p.n_best, 1)?;
                at_least("max_csteps", p.max_csteps, 1)?;
                positive("tol", p.tol)?;
            }
            DetectorParams::Hbos(p) => {
                if let Some(b) = p.bins {
                    at_least("bins", b, 1)?;
                }
                positive("density_floor", p.density_floor)?;
                fraction("contamination", p.contamination, true, false)?;
            }
            DetectorParams::Ocsvm(p) => {
                fraction("nu", p.nu, true, true)?;
                if let Some(g) = p.gamma {
                    positive("gamma", g)?;
                }
                positive("tol", p.tol)?;
                at_least("max_iter", p.max_iter, 1)?;
            }
            DetectorParams::Dbscan(p) => {
                if let Some(e) = p.eps {
                    positive("eps", e)?;
                }
                if let Some(m) = p.min_pts {
                    at_least("min_pts", m, 1)?;
                }
                if !(p.eps_percentile > 0.0 && p.eps_percentile <= 100.0) {
                    return Err(Error::Parameter("eps_percentile out of (0, 100]".into()));
                }
            }
            DetectorParams::Optics(p) => {
                if let Some(m) = p.min_pts {
                    at_least("min_pts", m, 1)?;
                }
                fraction("label_quantile", p.label_quantile, false, true)?;
            }
            DetectorParams::Isof(p) => {
                at_least("n_trees", p.n_trees, 1)?;
                at_least("subsample", p.subsample, 2)?;
                fraction("contamination", p.contamination, true, false)?;
            }
            DetectorParams::Lof(p) => {
                at_least("k", p.k, 1)?;
                positive("threshold", p.threshold)?;
            }
            DetectorParams::Cblof(p) => {
                at_least("k", p.k, 1)?;
                positive("tol", p.tol)?;
                at_least("max_iter", p.max_iter, 1)?;
                fraction("alpha", p.alpha, true, true)?;
                positive("beta", p.beta)?;
                fraction("contamination", p.contamination, true, false)?;
            }
            DetectorParams::Kmeans(p) => {
                at_least("k", p.k, 1)?;
                positive("tol", p.tol)?;
                at_least("max_iter", p.max_iter, 1)?;
                fraction("contamination", p.contamination, true, false)?;
            }
            DetectorParams::Knn(p) => {
                at_least("k", p.k, 1)?;
                fraction("contamination", p.contamination, true, false)?;
            }
            DetectorParams::Sod(p) => {
                at_least("ref_size", p.ref_size, 2)?;
                at_least("snn_k", p.snn_k, 1)?;
                positive("alpha", p.alpha)?;
                fraction("contamination", p.contamination, true, false)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorSpec {
    pub params: DetectorParams,
    pub seed: u64,
}

impl DetectorSpec {
    pub fn new(params: DetectorParams, seed: u64) -> Self {
        DetectorSpec { params, seed }
    }

    pub fn default_for(kind: DetectorKind, seed: u64) -> Self {
        DetectorSpec {
            params: DetectorParams::default_for(kind),
            seed,
        }
    }

    pub fn kind(&self) -> DetectorKind {
        self.params.kind()
    }
}

/// Kind-specific fit diagnostics. Row indices refer to input rows.
#[derive(Debug, Clone, PartialEq)]
pub enum FitMetadata {
    Gaussian {
        location: Vec<f64>,
        /// Row-major `p x p`.
        covariance: Vec<f64>,
        ridge: f64,
        /// Rows of the minimum-determinant subset (MCD/EE).
        support: Option<Vec<usize>>,
        /// Determinant of the raw subset covariance (MCD/EE).
        raw_determinant: Option<f64>,
        consistency_factor: f64,
        threshold: f64,
    },
    Histogram {
        bins: usize,
        threshold: f64,
    },
    OneClass {
        rho: f64,
        gamma: f64,
        alphas: Vec<f64>,
        n_support: usize,
        n_bounded: usize,
        iterations: usize,
        objective: f64,
    },
    Dbscan {
        eps: f64,
        min_pts: usize,
        core: Vec<bool>,
        /// Cluster id per row, `-1` for noise.
        clusters: Vec<i64>,
    },
    Optics {
        min_pts: usize,
        ordering: Vec<usize>,
        /// `None` where reachability is undefined.
        reachability: Vec<Option<f64>>,
        core_distance: Vec<f64>,
    },
    Isolation {
        n_trees: usize,
        subsample: usize,
        mean_path_length: Vec<f64>,
    },
    Neighbors {
        k: usize,
        threshold: f64,
    },
    Clustering {
        centroids: Vec<Vec<f64>>,
        assignment: Vec<usize>,
        sizes: Vec<usize>,
        objective_history: Vec<f64>,
        large: Option<Vec<bool>>,
    },
    Subspace {
        ref_size: usize,
        mean_dimensionality: f64,
    },
}

impl FitMetadata {
    /// Maps row-indexed content computed on `x[order]` back to input order.
    pub(crate) fn unpermute(self, order: &[usize]) -> FitMetadata {
        fn back<T: Clone>(v: Vec<T>, order: &[usize]) -> Vec<T> {
            let mut out = v.clone();
            for (k, item) in v.into_iter().enumerate() {
                out[order[k]] = item;
            }
            out
        }
        let relabel = |ix: Vec<usize>| {
            let mut ix: Vec<usize> = ix.into_iter().map(|k| order[k]).collect();
            ix.sort_unstable();
            ix
        };
        match self {
            FitMetadata::Gaussian {
                location,
                covariance,
                ridge,
                support,
                raw_determinant,
                consistency_factor,
                threshold,
            } => FitMetadata::Gaussian {
                location,
                covariance,
                ridge,
                support: support.map(relabel),
                raw_determinant,
                consistency_factor,
                threshold,
            },
            FitMetadata::OneClass {
                rho,
                gamma,
                alphas,
                n_support,
                n_bounded,
                iterations,
                objective,
            } => FitMetadata::OneClass {
                rho,
                gamma,
                alphas: back(alphas, order),
                n_support,
                n_bounded,
                iterations,
                objective,
            },
            FitMetadata::Dbscan {
                eps,
                min_pts,
                core,
                clusters,
            } => FitMetadata::Dbscan {
                eps,
                min_pts,
                core: back(core, order),
                clusters: back(clusters, order),
            },
            FitMetadata::Optics {
                min_pts,
                ordering,
                reachability,
                core_distance,
            } => FitMetadata::Optics {
                min_pts,
                ordering: ordering.into_iter().map(|k| order[k]).collect(),
                reachability: back(reachability, order),
                core_distance: back(core_distance, order),
            },
            FitMetadata::Isolation {
                n_trees,
                subsample,
                mean_path_length,
            } => FitMetadata::Isolation {
                n_trees,
                subsample,
                mean_path_length: back(mean_path_length, order),
            },
            FitMetadata::Clustering {
                centroids,
                assignment,
                sizes,
                objective_history,
                large,
            } => FitMetadata::Clustering {
                centroids,
                assignment: back(assignment, order),
                sizes,
                objective_history,
                large,
            },
            other => other,
        }
    }
}

/// One detector's per-row anomaly scores; larger means more anomalous.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    pub spec: DetectorSpec,
    pub raw_scores: Vec<f64>,
    pub native_labels: Option<Vec<bool>>,
    pub metadata: FitMetadata,
    pub elapsed: Duration,
}

impl ScoreVector {
    pub fn kind(&self) -> DetectorKind {
        self.spec.kind()
    }

    pub fn len(&self) -> usize {
        self.raw_scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw_scores.is_empty()
    }
}
