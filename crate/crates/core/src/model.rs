//! Domain types shared by every stage of the pipeline.
//!
//! Node ids on the augmented graph are 1-based: node `k` is observation
//! `X_k` and node `k + n` is its spherically symmetric variant `X_k'`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An `n x d` sample stored row-major; rows are observations.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationMatrix {
    n: usize,
    d: usize,
    values: Vec<f64>,
}

impl ObservationMatrix {
    pub fn new(n: usize, d: usize, values: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidDimension(d));
        }
        if n == 0 {
            return Err(Error::SampleTooSmall { needed: 1, found: 0 });
        }
        if values.len() != n * d {
            return Err(Error::DimensionMismatch {
                expected: n * d,
                found: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / d + 1,
                col: pos % d + 1,
            });
        }
        Ok(Self { n, d, values })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::SampleTooSmall { needed: 1, found: 0 });
        }
        let d = rows[0].as_ref().len();
        let mut values = Vec::with_capacity(n * d);
        for row in rows {
            let row = row.as_ref();
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::new(n, d, values)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.d
    }

    /// Row `i` (0-based).
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.d)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// New matrix made of the given 0-based rows, in order.
    pub fn select_rows(&self, idx: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(idx.len() * self.d);
        for &i in idx {
            if i >= self.n {
                return Err(Error::Invariant(format!(
                    "row index {i} out of bounds for {} rows",
                    self.n
                )));
            }
            values.extend_from_slice(self.row(i));
        }
        Self::new(idx.len(), self.d, values)
    }
}

/// Observations paired with their spherically symmetric variants.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSet {
    base: ObservationMatrix,
    variants: Vec<f64>,
}

impl AugmentedSet {
    /// Pairs `base` with `variants` (row-major, same shape). Each variant row
    /// must have the norm of its base row to relative tolerance 1e-9.
    pub fn new(base: ObservationMatrix, variants: Vec<f64>) -> Result<Self> {
        if variants.len() != base.n() * base.d() {
            return Err(Error::DimensionMismatch {
                expected: base.n() * base.d(),
                found: variants.len(),
            });
        }
        let d = base.d();
        for (k, (x, v)) in base.rows().zip(variants.chunks_exact(d)).enumerate() {
            let nx = norm(x);
            let nv = norm(v);
            if (nx - nv).abs() > 1e-9 * nx {
                return Err(Error::Invariant(format!(
                    "variant {} has norm {nv}, observation has norm {nx}",
                    k + 1
                )));
            }
        }
        Ok(Self { base, variants })
    }

    pub fn base(&self) -> &ObservationMatrix {
        &self.base
    }

    pub fn n(&self) -> usize {
        self.base.n()
    }

    pub fn d(&self) -> usize {
        self.base.d()
    }

    /// Variant row `i` (0-based).
    pub fn variant(&self, i: usize) -> &[f64] {
        let d = self.base.d();
        &self.variants[i * d..(i + 1) * d]
    }

    /// Vector for 1-based node id `node` in `1..=2n`.
    pub fn node(&self, node: usize) -> &[f64] {
        let n = self.n();
        debug_assert!((1..=2 * n).contains(&node));
        if node <= n {
            self.base.row(node - 1)
        } else {
            self.variant(node - n - 1)
        }
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Edge-cost kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostKind {
    /// `exp{-((1/d) z_i'z_j)^2}`.
    InnerProduct,
    /// `exp{-(1/d) sum_q z_iq^2 z_jq^2}`.
    SquaredCoordinate,
    /// `exp{-cos^2(z_i, z_j)}`.
    Cosine,
}

/// Symmetric `2n x 2n` matrix of log-costs (the negated kernel argument).
///
/// Pairs `(k, k + n)` and the diagonal are forbidden and read as `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    n: usize,
    logcost: Vec<f64>,
}

impl CostMatrix {
    /// Builds a matrix from a full `2n x 2n` row-major table. Forbidden
    /// entries are ignored; all others must be finite, `<= 0` and symmetric.
    pub fn from_logcosts(n: usize, table: Vec<f64>) -> Result<Self> {
        let size = 2 * n;
        if table.len() != size * size {
            return Err(Error::DimensionMismatch {
                expected: size * size,
                found: table.len(),
            });
        }
        let mut m = Self {
            n,
            logcost: vec![0.0; size * size],
        };
        for i in 1..=size {
            for j in 1..=size {
                if m.is_forbidden(i, j) {
                    continue;
                }
                let v = table[(i - 1) * size + (j - 1)];
                let w = table[(j - 1) * size + (i - 1)];
                if !v.is_finite() || v > 0.0 {
                    return Err(Error::Invariant(format!(
                        "log-cost ({i},{j}) = {v} must be finite and <= 0"
                    )));
                }
                if v != w {
                    return Err(Error::Invariant(format!(
                        "log-cost table not symmetric at ({i},{j})"
                    )));
                }
                m.logcost[(i - 1) * size + (j - 1)] = v;
            }
        }
        Ok(m)
    }

    /// Builds from a map of unordered allowed pairs; missing pairs get `fill`.
    pub fn from_pairs(n: usize, pairs: &[((usize, usize), f64)], fill: f64) -> Result<Self> {
        let size = 2 * n;
        let mut table = vec![fill; size * size];
        for &((i, j), v) in pairs {
            if !(1..=size).contains(&i) || !(1..=size).contains(&j) {
                return Err(Error::Invariant(format!("node pair ({i},{j}) out of range")));
            }
            table[(i - 1) * size + (j - 1)] = v;
            table[(j - 1) * size + (i - 1)] = v;
        }
        Self::from_logcosts(n, table)
    }

    pub(crate) fn zeroed(n: usize) -> Self {
        Self {
            n,
            logcost: vec![0.0; 4 * n * n],
        }
    }

    pub(crate) fn set(&mut self, i: usize, j: usize, v: f64) {
        let size = 2 * self.n;
        self.logcost[(i - 1) * size + (j - 1)] = v;
        self.logcost[(j - 1) * size + (i - 1)] = v;
    }

    /// Number of observations `n`; the matrix is `2n x 2n`.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn size(&self) -> usize {
        2 * self.n
    }

    #[inline]
    pub fn is_forbidden(&self, i: usize, j: usize) -> bool {
        i == j || i.abs_diff(j) == self.n
    }

    /// Log-cost of the edge between 1-based nodes `i` and `j`.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        if self.is_forbidden(i, j) {
            None
        } else {
            Some(self.raw(i, j))
        }
    }

    /// Unchecked read; callers guarantee the pair is allowed.
    #[inline]
    pub(crate) fn raw(&self, i: usize, j: usize) -> f64 {
        self.logcost[(i - 1) * 2 * self.n + (j - 1)]
    }

    /// Edge cost `exp(log-cost)`.
    pub fn cost(&self, i: usize, j: usize) -> Option<f64> {
        self.get(i, j).map(f64::exp)
    }
}

/// Which solver produced a covering path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathMethod {
    Heuristic,
    Exact,
}

/// Observation index (1-based) of node id `node` on a graph of `2n` nodes.
#[inline]
pub fn observation_of(node: usize, n: usize) -> usize {
    if node > n {
        node - n
    } else {
        node
    }
}

/// A path through `n` of the `2n` augmented nodes, one per observation.
///
/// Stored in canonical orientation: the endpoint with the smaller
/// observation index comes first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoveringPath {
    nodes: Vec<usize>,
    method: PathMethod,
}

impl CoveringPath {
    pub fn new(mut nodes: Vec<usize>, n: usize, method: PathMethod) -> Result<Self> {
        if nodes.len() != n {
            return Err(Error::Invariant(format!(
                "covering path has {} nodes, expected {n}",
                nodes.len()
            )));
        }
        let mut seen = vec![false; n + 1];
        for &node in &nodes {
            if !(1..=2 * n).contains(&node) {
                return Err(Error::Invariant(format!("node {node} outside 1..={}", 2 * n)));
            }
            let k = observation_of(node, n);
            if seen[k] {
                return Err(Error::Invariant(format!(
                    "observation {k} visited twice on the path"
                )));
            }
            seen[k] = true;
        }
        if n > 1 && observation_of(nodes[0], n) > observation_of(nodes[n - 1], n) {
            nodes.reverse();
        }
        Ok(Self { nodes, method })
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn method(&self) -> PathMethod {
        self.method
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Sum of `exp(log-cost)` over the `n - 1` edges.
    pub fn total_cost(&self, cost: &CostMatrix) -> f64 {
        self.nodes
            .windows(2)
            .map(|w| cost.raw(w[0], w[1]).exp())
            .sum()
    }
}

/// String signs, anti-ranks and ranks read off a covering path.
///
/// `signs[k - 1]` is 1 when observation `k` itself (not its variant) is on
/// the path; `anti_ranks[i - 1]` is the observation at position `i`;
/// `ranks` is the inverse permutation. All indices are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SignRankProfile {
    pub signs: Vec<u8>,
    pub anti_ranks: Vec<usize>,
    pub ranks: Vec<usize>,
}

impl SignRankProfile {
    pub fn n(&self) -> usize {
        self.signs.len()
    }

    /// Signs in path order, `S_{Pi_1}, ..., S_{Pi_n}`.
    pub fn signs_along_path(&self) -> impl Iterator<Item = u8> + '_ {
        self.anti_ranks.iter().map(move |&k| self.signs[k - 1])
    }
}

/// Scores `a(1), ..., a(n)` for a linear rank statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreFunction {
    values: Vec<f64>,
    symmetric: bool,
}

impl ScoreFunction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("empty score function".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("score function has non-finite entries".into()));
        }
        let n = values.len();
        let symmetric = (0..n / 2).all(|i| values[i] == values[n - 1 - i]);
        Ok(Self { values, symmetric })
    }

    /// `a(i) = 1` for all `i`; the linear rank statistic is then `T_S`.
    pub fn constant(n: usize) -> Self {
        Self {
            values: vec![1.0; n],
            symmetric: true,
        }
    }

    /// Signed-rank scores `a(i) = i` (not symmetric).
    pub fn signed_rank(n: usize) -> Self {
        Self::new((1..=n).map(|i| i as f64).collect()).expect("finite scores")
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }
}

/// Statistic selectable in a test configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatKind {
    /// `T_S` on the inner-product path.
    Sign,
    /// `T_R` on the inner-product path.
    Runs,
    /// `T_LR` on the inner-product path with user scores.
    Lr,
    /// `T~_S` on the squared-coordinate path.
    DiagSign,
    /// `T~_R` on the squared-coordinate path.
    DiagRuns,
    /// `max(T_S, T~_S)` with Bonferroni calibration.
    ModifiedSign,
    /// `min(T_R, T~_R)` with Bonferroni calibration.
    ModifiedRuns,
}

impl StatKind {
    pub const ALL: [StatKind; 7] = [
        StatKind::Sign,
        StatKind::Runs,
        StatKind::Lr,
        StatKind::DiagSign,
        StatKind::DiagRuns,
        StatKind::ModifiedSign,
        StatKind::ModifiedRuns,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StatKind::Sign => "sign",
            StatKind::Runs => "runs",
            StatKind::Lr => "lr",
            StatKind::DiagSign => "diag-sign",
            StatKind::DiagRuns => "diag-runs",
            StatKind::ModifiedSign => "modified-sign",
            StatKind::ModifiedRuns => "modified-runs",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim().replace('_', "-");
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    pub(crate) fn needs_inner(self) -> bool {
        matches!(
            self,
            StatKind::Sign
                | StatKind::Runs
                | StatKind::Lr
                | StatKind::ModifiedSign
                | StatKind::ModifiedRuns
        )
    }

    pub(crate) fn needs_diag(self) -> bool {
        matches!(
            self,
            StatKind::DiagSign
                | StatKind::DiagRuns
                | StatKind::ModifiedSign
                | StatKind::ModifiedRuns
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Calibration {
    Exact,
    Asymptotic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CenterMode {
    /// Test symmetry about the origin.
    KnownOrigin,
    /// Replace the sample by differences `X_i - X_{m+i}`.
    SampleSplit,
    /// Subtract the spatial median. Not exactly distribution-free.
    SpatialMedian,
}

pub const DEFAULT_ENUMERATION_CAP: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub alpha: f64,
    pub statistics: Vec<StatKind>,
    pub calibration: Calibration,
    pub path_method: PathMethod,
    pub center_mode: CenterMode,
    pub seed: u64,
    pub scores: Option<ScoreFunction>,
    pub allow_asymmetric: bool,
    pub enumeration_cap: usize,
    /// Grid step for exact calibration of non-integer scores.
    pub lr_resolution: Option<f64>,
}

impl Default for TestConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            statistics: vec![StatKind::Sign, StatKind::Runs],
            calibration: Calibration::Exact,
            path_method: PathMethod::Heuristic,
            center_mode: CenterMode::KnownOrigin,
            seed: 0,
            scores: None,
            allow_asymmetric: false,
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
            lr_resolution: None,
        }
    }
}

impl TestConfig {
    pub fn with_statistics(mut self, stats: &[StatKind]) -> Self {
        self.statistics = stats.to_vec();
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::OutOfRange {
                what: "alpha",
                value: self.alpha,
                lo: 0.0,
                hi: 1.0,
            });
        }
        if self.statistics.is_empty() {
            return Err(Error::InvalidParameter("no statistics requested".into()));
        }
        if self.statistics.contains(&StatKind::Lr) && self.scores.is_none() {
            return Err(Error::InvalidParameter(
                "the lr statistic needs a score function".into(),
            ));
        }
        Ok(())
    }
}

/// One statistic's line in a [`TestReport`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatRecord {
    pub name: String,
    pub value: Option<f64>,
    pub p_value: Option<f64>,
    /// Rejection boundary on the statistic's scale (inclusive).
    pub cutoff: Option<f64>,
    pub reject: bool,
    /// For Bonferroni-combined statistics, the component that fired.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fired: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportMetadata {
    pub n: usize,
    pub d: usize,
    /// Observations actually tested after centering or splitting.
    pub n_tested: usize,
    pub alpha: f64,
    pub seed: u64,
    /// Short hash of the canonical configuration JSON.
    pub config_hash: String,
    pub cost_kinds: Vec<CostKind>,
    pub path_method: PathMethod,
    pub center_mode: CenterMode,
    pub calibration: Calibration,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestReport {
    pub statistics: Vec<StatRecord>,
    pub metadata: ReportMetadata,
}

impl TestReport {
    pub fn get(&self, kind: StatKind) -> Option<&StatRecord> {
        self.statistics.iter().find(|r| r.name == kind.name())
    }

    pub fn rejects(&self, kind: StatKind) -> bool {
        self.get(kind).is_some_and(|r| r.reject)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Diagonal recipes for independent-coordinate normal generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiagRecipe {
    /// `diag(d^gamma, 1, ..., 1)`.
    Spike { gamma: f64 },
    /// First `floor(d/2)` variances `low`, the rest `high`.
    HalfHalf { low: f64, high: f64 },
    Custom(Vec<f64>),
}

/// Data-generating distribution for simulations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "family")]
pub enum GeneratorSpec {
    /// Normal with mean `location * 1_d` and covariance `a I + b J`.
    EquicorrNormal { a: f64, b: f64, location: f64 },
    DiagNormal { recipe: DiagRecipe },
    /// Elliptic Cauchy with scatter `a I + b J` about the origin.
    EllipticCauchy { a: f64, b: f64 },
    HypercubeUniform,
    IidLaplace,
    /// Two-dimensional angularly symmetric, not spherical.
    Angular2d,
    SphericalNormal,
    SphericalT { nu: f64 },
}

/// Scatter matrix implied by a generator, for diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub enum Scatter {
    Equicorrelated { a: f64, b: f64 },
    Diagonal(Vec<f64>),
    /// No closed form (angular example, t with nu <= 2).
    Unavailable,
}

impl Scatter {
    pub fn entry(&self, i: usize, j: usize) -> Option<f64> {
        match self {
            Scatter::Equicorrelated { a, b } => Some(if i == j { a + b } else { *b }),
            Scatter::Diagonal(v) => Some(if i == j { v[i] } else { 0.0 }),
            Scatter::Unavailable => None,
        }
    }

    /// Eigenvalues, unsorted.
    pub fn eigenvalues(&self, d: usize) -> Option<Vec<f64>> {
        match self {
            Scatter::Equicorrelated { a, b } => {
                let mut e = vec![*a; d];
                e[0] = a + d as f64 * b;
                Some(e)
            }
            Scatter::Diagonal(v) => Some(v.clone()),
            Scatter::Unavailable => None,
        }
    }

    pub fn diagonal(&self, d: usize) -> Option<Vec<f64>> {
        match self {
            Scatter::Equicorrelated { a, b } => Some(vec![a + b; d]),
            Scatter::Diagonal(v) => Some(v.clone()),
            Scatter::Unavailable => None,
        }
    }
}

/// Monte Carlo rejection rate for one (test, n, d) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerEstimate {
    pub label: String,
    pub test: StatKind,
    pub n: usize,
    pub d: usize,
    pub reps: usize,
    pub rejections: usize,
    pub rejection_rate: f64,
    pub mc_se: f64,
}

impl PowerEstimate {
    pub fn new(label: impl Into<String>, test: StatKind, n: usize, d: usize, reps: usize, rejections: usize) -> Self {
        let rate = rejections as f64 / reps as f64;
        Self {
            label: label.into(),
            test,
            n,
            d,
            reps,
            rejections,
            rejection_rate: rate,
            mc_se: (rate * (1.0 - rate) / reps as f64).sqrt(),
        }
    }
}
