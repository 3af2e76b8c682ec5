//! Experiment configuration (TOML) and validation diagnostics.
//!
//! A config is a flat TOML document: top-level run settings plus one table
//! per concern (`[ensemble]`, `[locations]`, `[grids]`, `[relation]`,
//! `[oracle]`, `[check]`). Unknown keys are rejected so typos surface as
//! parse errors instead of silently using defaults.

use std::fmt;
use std::path::{Path, PathBuf};

use rmt_lab_core::ensemble::{BaseKind, EntryDistribution, EntryKind, EnsembleSpec};
use rmt_lab_core::relations::{RelationSpec, Separation};
use rmt_lab_core::rigidity::KRange;
use rmt_lab_core::smallball::mesoscopic_locations;
use rmt_lab_core::spectral::{LocationIssue, LocationSet};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Sample,
    Smallball,
    Rigidity,
    Relations,
    Oracle,
    Mesoscopic,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Sample => "sample",
            Self::Smallball => "smallball",
            Self::Rigidity => "rigidity",
            Self::Relations => "relations",
            Self::Oracle => "oracle",
            Self::Mesoscopic => "mesoscopic",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn default_ci_level() -> f64 {
    0.95
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("rmt-lab-out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Optional; must match the subcommand when given.
    #[serde(default)]
    pub experiment: Option<ExperimentKind>,
    #[serde(default)]
    pub master_seed: u64,
    /// Trials (smallball, mesoscopic), samples (sample, rigidity), samples
    /// per `n` (relations). Unused by `oracle`.
    #[serde(default)]
    pub trials: u64,
    #[serde(default = "default_ci_level")]
    pub ci_level: f64,
    /// 0 = automatic.
    #[serde(default)]
    pub workers: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Directory of cached spectra shared between runs.
    #[serde(default)]
    pub spectrum_cache: Option<PathBuf>,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    #[serde(default)]
    pub locations: Option<LocationConfig>,
    #[serde(default)]
    pub grids: GridConfig,
    #[serde(default)]
    pub relation: Option<RelationConfig>,
    #[serde(default)]
    pub sample: SampleConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub check: CheckConfig,
}

fn default_n() -> usize {
    200
}
fn default_variance() -> f64 {
    1.0
}
fn default_diag_scale() -> f64 {
    std::f64::consts::SQRT_2
}
fn default_entry() -> EntryKind {
    EntryKind::Gaussian
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_entry")]
    pub entry: EntryKind,
    #[serde(default = "default_variance")]
    pub variance: f64,
    #[serde(default)]
    pub sigma0: Option<f64>,
    #[serde(default)]
    pub base_kind: Option<BaseKind>,
    /// Default √2 (GOE).
    #[serde(default = "default_diag_scale")]
    pub diag_scale: f64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self { n: default_n(), entry: default_entry(), variance: 1.0, sigma0: None, base_kind: None, diag_scale: default_diag_scale() }
    }
}

impl EnsembleConfig {
    pub fn entry_distribution(&self) -> EntryDistribution {
        let mut e = EntryDistribution { kind: self.entry, variance: self.variance, sigma0: self.sigma0, base_kind: self.base_kind };
        if self.entry == EntryKind::GaussianDivisible {
            e.sigma0 = Some(self.sigma0.unwrap_or(0.5));
            e.base_kind = Some(self.base_kind.unwrap_or(BaseKind::UniformCentered));
        }
        e
    }

    pub fn spec(&self, master_seed: u64) -> EnsembleSpec {
        EnsembleSpec { n: self.n, entry: self.entry_distribution(), diag_scale: self.diag_scale, master_seed }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaUnits {
    /// Unnormalized scale, eigenvalues spread over about `[−2√n, 2√n]`.
    #[default]
    Raw,
    /// Multiples of `√n`.
    SqrtN,
}

fn default_kappa() -> f64 {
    0.5
}
fn default_delta_sep() -> f64 {
    1.0
}
fn default_sep_exponent() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocationConfig {
    /// Explicit locations. Mesoscopic runs derive them from `center` and `d`.
    #[serde(default)]
    pub lambdas: Vec<f64>,
    #[serde(default)]
    pub units: LambdaUnits,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default = "default_delta_sep")]
    pub delta_sep: f64,
    #[serde(default = "default_sep_exponent")]
    pub sep_exponent: f64,
    /// Mesoscopic: cluster centre in multiples of `√n`.
    #[serde(default)]
    pub center: f64,
    /// Mesoscopic: number of locations.
    #[serde(default)]
    pub d: Option<usize>,
}

impl LocationConfig {
    pub fn lambdas_for(&self, n: usize) -> Vec<f64> {
        let scale = match self.units {
            LambdaUnits::Raw => 1.0,
            LambdaUnits::SqrtN => (n as f64).sqrt(),
        };
        self.lambdas.iter().map(|l| l * scale).collect()
    }

    pub fn location_set(&self, n: usize) -> Result<LocationSet, LocationIssue> {
        LocationSet::new(self.lambdas_for(n), self.kappa, self.delta_sep, self.sep_exponent, n)
    }

    pub fn mesoscopic_d(&self) -> usize {
        self.d.unwrap_or(2)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Scalar thresholds applied to every location.
    #[serde(default)]
    pub delta: Vec<f64>,
    /// Explicit per-location threshold vectors (appended after `delta`).
    #[serde(default)]
    pub delta_vectors: Vec<Vec<f64>>,
    #[serde(default)]
    pub n: Vec<usize>,
    /// Inclusive `[k_lo, k_hi]`.
    #[serde(default)]
    pub k: Vec<usize>,
    #[serde(default)]
    pub t: Vec<f64>,
    /// Moment orders for the rigidity report.
    #[serde(default)]
    pub p: Vec<f64>,
    /// Grid size of the bounded-Lipschitz approximation.
    #[serde(default)]
    pub bl_grid: Option<usize>,
}

impl GridConfig {
    pub fn delta_rows(&self, d: usize) -> Vec<Vec<f64>> {
        let mut rows: Vec<Vec<f64>> = self.delta.iter().map(|x| vec![*x; d]).collect();
        rows.extend(self.delta_vectors.iter().cloned());
        rows
    }

    pub fn k_range(&self, n: usize) -> KRange {
        match self.k.as_slice() {
            [lo, hi] => KRange { lo: *lo, hi: *hi },
            _ => KRange::default_for(n),
        }
    }

    pub fn moment_orders(&self) -> Vec<f64> {
        if self.p.is_empty() {
            vec![1.0, 2.0]
        } else {
            self.p.clone()
        }
    }

    pub fn bl_grid_size(&self) -> usize {
        self.bl_grid.unwrap_or(256)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelationConfig {
    pub coefficients: Vec<f64>,
    #[serde(default)]
    pub offset: f64,
    #[serde(default)]
    pub kappa: Option<f64>,
    #[serde(default)]
    pub delta_sep: Option<f64>,
    #[serde(default = "default_sep_exponent")]
    pub sep_exponent: f64,
}

impl RelationConfig {
    pub fn spec(&self) -> RelationSpec {
        RelationSpec {
            coefficients: self.coefficients.clone(),
            offset: self.offset,
            kappa: self.kappa,
            separation: self.delta_sep.map(|delta_sep| Separation { delta_sep, sep_exponent: self.sep_exponent }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleConfig {
    /// Also compute eigenvectors and report delocalization.
    pub vectors: bool,
    /// Coordinates count as delocalized when `|v_j| ≥ deloc_coeff/√n`.
    pub deloc_coeff: f64,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self { vectors: false, deloc_coeff: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleCheck {
    DistanceIdentity,
    SigmaMinBound,
    ProductInequality,
    RegionVolume,
    HansonWright,
    Decoupling,
    OperatorNormTail,
}

impl OracleCheck {
    pub const ALL: [OracleCheck; 7] = [
        Self::DistanceIdentity,
        Self::SigmaMinBound,
        Self::ProductInequality,
        Self::RegionVolume,
        Self::HansonWright,
        Self::Decoupling,
        Self::OperatorNormTail,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::DistanceIdentity => "distance_identity",
            Self::SigmaMinBound => "sigma_min_bound",
            Self::ProductInequality => "product_inequality",
            Self::RegionVolume => "region_volume",
            Self::HansonWright => "hanson_wright",
            Self::Decoupling => "decoupling",
            Self::OperatorNormTail => "operator_norm_tail",
        }
    }
}

/// Oracle-suite parameters; defaults reproduce the reference sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    pub checks: Vec<OracleCheck>,
    pub identity_rel_tol: f64,
    pub distance_n: usize,
    pub distance_instances: u64,
    pub bound_n: usize,
    pub bound_instances: u64,
    pub product_d: usize,
    pub product_n: usize,
    pub product_instances: u64,
    pub region_d: Vec<usize>,
    pub region_s: Vec<f64>,
    pub region_samples: u64,
    pub hanson_wright_n: usize,
    pub hanson_wright_trials: u64,
    pub hanson_wright_t: Vec<f64>,
    pub decoupling_n: usize,
    pub decoupling_theta: f64,
    pub decoupling_inner: u64,
    pub decoupling_outer: u64,
    /// Matrices for the operator-norm tail use `[ensemble]`.
    pub operator_norm_trials: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            checks: vec![OracleCheck::DistanceIdentity, OracleCheck::SigmaMinBound, OracleCheck::ProductInequality, OracleCheck::RegionVolume],
            identity_rel_tol: 1e-9,
            distance_n: 5,
            distance_instances: 100,
            bound_n: 10,
            bound_instances: 200,
            product_d: 2,
            product_n: 8,
            product_instances: 500,
            region_d: vec![2],
            region_s: vec![1.5, 2.0, 3.0],
            region_samples: 1_000_000,
            hanson_wright_n: 50,
            hanson_wright_trials: 100_000,
            hanson_wright_t: vec![0.0, 1.0, 2.0, 5.0, 10.0],
            decoupling_n: 4,
            decoupling_theta: 0.3,
            decoupling_inner: 10_000,
            decoupling_outer: 1_000,
            operator_norm_trials: 1_000,
        }
    }
}

/// Optional pass/fail criteria; a failing check makes the run exit with 3.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    pub slope_min: Option<f64>,
    pub slope_max: Option<f64>,
    pub r_squared_min: Option<f64>,
    /// The whole factorization-ratio CI must lie in `[ratio_min, ratio_max]`.
    pub ratio_min: Option<f64>,
    pub ratio_max: Option<f64>,
    /// One-sided upper confidence bound (at `ci_level`) of the
    /// factorization ratio must not exceed this.
    pub ratio_upper_max: Option<f64>,
    pub envelope_spread_max: Option<f64>,
    /// Relations: every sampled minimum must be strictly positive.
    #[serde(default)]
    pub min_value_positive: bool,
    /// Rigidity: median W1 at the largest semicircle `n`.
    pub w1_median_max: Option<f64>,
    /// Rigidity: median W1 strictly decreasing along the semicircle `n` grid.
    #[serde(default)]
    pub w1_median_decreasing: bool,
    /// Sample: smallest per-sample delocalization fraction required...
    pub deloc_fraction_min: Option<f64>,
    /// ...in at least this share of samples.
    pub deloc_share_min: Option<f64>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("reading {}: {e}", path.display()))?;
        Self::from_toml(&text).map_err(|e| anyhow::anyhow!("parsing {}: {e}", path.display()))
    }

    /// Minimal config for `kind` with every section at its default.
    pub fn default_for(kind: ExperimentKind) -> Self {
        Self {
            experiment: Some(kind),
            master_seed: 0,
            trials: 0,
            ci_level: default_ci_level(),
            workers: 0,
            output_dir: default_output_dir(),
            spectrum_cache: None,
            ensemble: EnsembleConfig::default(),
            locations: None,
            grids: GridConfig::default(),
            relation: None,
            sample: SampleConfig::default(),
            oracle: OracleConfig::default(),
            check: CheckConfig::default(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub code: String,
    pub severity: Severity,
    pub message: String,
}

impl Diagnostic {
    fn error(code: &str, message: impl Into<String>) -> Self {
        Self { code: code.to_string(), severity: Severity::Error, message: message.into() }
    }

    fn warning(code: &str, message: impl Into<String>) -> Self {
        Self { code: code.to_string(), severity: Severity::Warning, message: message.into() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{sev} [{}]: {}", self.code, self.message)
    }
}

pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(|d| d.severity == Severity::Error)
}

fn location_diagnostics(set: &LocationSet, n: usize, out: &mut Vec<Diagnostic>) {
    for issue in set.issues(n) {
        let (code, msg) = match issue {
            LocationIssue::BulkViolation => ("BULK_VIOLATION", format!("a location lies outside [−(2−κ)√n, (2−κ)√n] with κ = {}, n = {n}", set.kappa)),
            LocationIssue::SeparationViolation => (
                "SEPARATION_VIOLATION",
                format!(
                    "locations closer than Δ·n^(σ−1/2) = {} (Δ = {}, σ = {}, n = {n})",
                    rmt_lab_core::spectral::required_separation(n, set.delta_sep, set.sep_exponent),
                    set.delta_sep,
                    set.sep_exponent
                ),
            ),
            LocationIssue::InvalidParameter => ("INVALID_LOCATIONS", "need κ in (0, 2), Δ > 0, σ in (0, 1] and at least one location".to_string()),
        };
        out.push(Diagnostic::error(code, msg));
    }
}

/// All problems with `config` when run as `kind`. The config is runnable iff
/// no diagnostic has error severity; warnings (e.g. OUTSIDE_HYPOTHESIS) are
/// recorded in the manifest.
pub fn validate(config: &ExperimentConfig, kind: ExperimentKind) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if let Some(k) = config.experiment {
        if k != kind {
            out.push(Diagnostic::error("EXPERIMENT_MISMATCH", format!("config declares `{k}` but the `{kind}` subcommand was used")));
        }
    }
    let spec = config.ensemble.spec(config.master_seed);
    let uses_ensemble = kind != ExperimentKind::Oracle || config.oracle.checks.contains(&OracleCheck::OperatorNormTail);
    if uses_ensemble {
        if let Err(e) = spec.validate() {
            out.push(Diagnostic::error("INVALID_ENSEMBLE", e.to_string()));
        }
    }
    if !(config.ci_level > 0.0 && config.ci_level < 1.0) {
        out.push(Diagnostic::error("INVALID_CI_LEVEL", "ci_level must lie in (0, 1)"));
    }
    if config.check.ratio_upper_max.is_some() && !(config.ci_level > 0.5) {
        out.push(Diagnostic::error("INVALID_CI_LEVEL", "a one-sided ratio bound needs ci_level above 0.5"));
    }
    if kind != ExperimentKind::Oracle && config.trials == 0 {
        out.push(Diagnostic::error("INVALID_TRIALS", "trials must be positive"));
    }
    let n = config.ensemble.n;
    let hypothesis_sensitive = matches!(kind, ExperimentKind::Smallball | ExperimentKind::Mesoscopic | ExperimentKind::Relations);
    if hypothesis_sensitive && !spec.entry.within_hypothesis() {
        out.push(Diagnostic::warning(
            "OUTSIDE_HYPOTHESIS",
            format!("entry law {:?} lacks a Gaussian component with sub-Gaussian remainder; results are exploratory", spec.entry.kind),
        ));
    }
    match kind {
        ExperimentKind::Sample => {
            if !(config.sample.deloc_coeff > 0.0) {
                out.push(Diagnostic::error("INVALID_GRID", "deloc_coeff must be positive"));
            }
            if (config.check.deloc_fraction_min.is_some() || config.check.deloc_share_min.is_some()) && !config.sample.vectors {
                out.push(Diagnostic::error("INVALID_CHECK", "delocalization checks need sample.vectors = true"));
            }
        }
        ExperimentKind::Smallball => match &config.locations {
            None => out.push(Diagnostic::error("MISSING_SECTION", "smallball needs a [locations] table")),
            Some(loc) => {
                let set = LocationSet { lambdas: loc.lambdas_for(n), kappa: loc.kappa, delta_sep: loc.delta_sep, sep_exponent: loc.sep_exponent };
                location_diagnostics(&set, n, &mut out);
                delta_diagnostics(&config.grids, set.d(), &mut out);
            }
        },
        ExperimentKind::Mesoscopic => match &config.locations {
            None => out.push(Diagnostic::error("MISSING_SECTION", "mesoscopic needs a [locations] table")),
            Some(loc) => {
                let d = loc.mesoscopic_d();
                if d == 0 || d > rmt_lab_core::smallball::MAX_LOCATIONS {
                    out.push(Diagnostic::error("INVALID_LOCATIONS", "mesoscopic d must be between 1 and 16"));
                } else {
                    for &m in &mesoscopic_n_grid(config) {
                        let set = LocationSet {
                            lambdas: mesoscopic_locations(m, loc.center, d, loc.delta_sep, loc.sep_exponent),
                            kappa: loc.kappa,
                            delta_sep: loc.delta_sep,
                            sep_exponent: loc.sep_exponent,
                        };
                        location_diagnostics(&set, m, &mut out);
                    }
                    delta_diagnostics(&config.grids, d, &mut out);
                }
                if config.grids.n.contains(&0) {
                    out.push(Diagnostic::error("INVALID_GRID", "n grid values must be positive"));
                }
            }
        },
        ExperimentKind::Rigidity => {
            match &config.locations {
                None => out.push(Diagnostic::error("MISSING_SECTION", "rigidity needs a [locations] table")),
                Some(loc) => {
                    // Each λ is checked against the bulk on its own; separation
                    // between rigidity locations is irrelevant.
                    for l in loc.lambdas_for(n) {
                        let set = LocationSet { lambdas: vec![l], kappa: loc.kappa, delta_sep: 1.0, sep_exponent: 1.0 };
                        location_diagnostics(&set, n, &mut out);
                    }
                }
            }
            let k = config.grids.k_range(n);
            if !config.grids.k.is_empty() && config.grids.k.len() != 2 {
                out.push(Diagnostic::error("INVALID_K_RANGE", "grids.k must be [k_lo, k_hi]"));
            } else if k.lo == 0 || k.lo > k.hi || k.hi > n {
                out.push(Diagnostic::error("INVALID_K_RANGE", format!("k range [{}, {}] must satisfy 1 <= k_lo <= k_hi <= n", k.lo, k.hi)));
            }
            if config.grids.moment_orders().iter().any(|p| !(*p >= 1.0)) {
                out.push(Diagnostic::error("INVALID_GRID", "moment orders must be at least 1"));
            }
            if config.grids.n.contains(&0) {
                out.push(Diagnostic::error("INVALID_GRID", "n grid values must be positive"));
            }
            if config.grids.bl_grid_size() < 16 {
                out.push(Diagnostic::error("INVALID_GRID", "bl_grid must be at least 16"));
            }
        }
        ExperimentKind::Relations => {
            match &config.relation {
                None => out.push(Diagnostic::error("MISSING_SECTION", "relations needs a [relation] table")),
                Some(r) => {
                    if let Err(e) = r.spec().validate() {
                        out.push(Diagnostic::error("INVALID_RELATION", e.to_string()));
                    }
                }
            }
            if config.grids.n.len() < 3 || config.grids.n.contains(&0) {
                out.push(Diagnostic::error("INVALID_GRID", "relations needs an n grid with at least 3 positive values"));
            }
            if config.trials > 0 && config.trials < 50 {
                out.push(Diagnostic::error("INVALID_TRIALS", "relations needs at least 50 samples per n"));
            }
        }
        ExperimentKind::Oracle => {
            let o = &config.oracle;
            if o.checks.is_empty() {
                out.push(Diagnostic::error("INVALID_ORACLE", "no oracle checks selected"));
            }
            if o.distance_n < 2 || o.bound_n < 2 || o.product_d < 2 || o.product_n == 0 {
                out.push(Diagnostic::error("INVALID_ORACLE", "identity checks need n >= 2 and product d >= 2"));
            }
            if o.region_d.iter().any(|d| !(2..=4).contains(d)) || o.region_s.iter().any(|s| !(*s > 1.0)) {
                out.push(Diagnostic::error("INVALID_ORACLE", "region volume needs d in 2..=4 and s > 1"));
            }
            if o.decoupling_n == 0 || o.decoupling_n > 8 || o.decoupling_inner < 2 || o.decoupling_outer < 2 {
                out.push(Diagnostic::error("INVALID_ORACLE", "decoupling needs 1 <= n <= 8 and at least 2 inner/outer trials"));
            }
            if o.hanson_wright_n == 0 || o.hanson_wright_trials == 0 || o.hanson_wright_t.iter().any(|t| !(*t >= 0.0)) {
                out.push(Diagnostic::error("INVALID_ORACLE", "Hanson-Wright needs n > 0, trials > 0 and t >= 0"));
            }
            if o.checks.contains(&OracleCheck::OperatorNormTail) && o.operator_norm_trials < 100 {
                out.push(Diagnostic::error("INVALID_TRIALS", "operator-norm tail needs at least 100 trials"));
            }
            if config.grids.t.iter().any(|t| !t.is_finite() || *t < -3.0) {
                out.push(Diagnostic::error("INVALID_GRID", "t values must be finite and at least -3"));
            }
        }
    }
    out
}

pub fn mesoscopic_n_grid(config: &ExperimentConfig) -> Vec<usize> {
    if config.grids.n.is_empty() {
        vec![config.ensemble.n]
    } else {
        config.grids.n.clone()
    }
}

fn delta_diagnostics(grids: &GridConfig, d: usize, out: &mut Vec<Diagnostic>) {
    let rows = grids.delta_rows(d);
    if rows.is_empty() {
        out.push(Diagnostic::error("INVALID_DELTA", "no thresholds: set grids.delta or grids.delta_vectors"));
    }
    if rows.iter().any(|r| r.len() != d) {
        out.push(Diagnostic::error("INVALID_DELTA", format!("each threshold vector needs {d} entries")));
    }
    if rows.iter().flatten().any(|x| !(*x > 0.0)) {
        out.push(Diagnostic::error("INVALID_DELTA", "thresholds must be positive"));
    }
}
