//! Separable approximation of a value function from neighborhood terms.
//!
//! For a center block `j` and radius `l`, the term
//!
//! ```text
//! Ψ_l^j(x_B) = V(Π^{j−1} Hᵀ x_B) − V(Π^{j} Hᵀ x_B)
//! ```
//!
//! lifts the neighborhood substates into `ℝⁿ`, then measures how much `V`
//! changes when block `j` is zeroed after the blocks before it already are.
//! Summed over `j` with `V(0)` added back, the terms telescope to `V(x)`
//! exactly once every neighborhood covers the graph, and approximate it
//! otherwise. The localization error of each term is the A1 residual
//!
//! ```text
//! |Ψ_l^j(H x) − V(Π^{j−1} x) + V(Π^{j} x)|
//! ```
//!
//! and the total error is at most `(s − 1)` times its maximum.
//!
//! Block indices are 0-based: the term for center `c` zeroes blocks `0..c`
//! and `0..=c`.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::Serialize;

use crate::blockgraph::{embed, project_tail_in_place, restrict, BlockStructure, InterconnectionGraph, Neighborhood};
use crate::error::{Error, Result};
use crate::format::{csv_line, fmt17};
use crate::sampling;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeMode {
    #[default]
    Continuous,
    Discrete,
}

/// Problem metadata attached to a value function.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct OracleMeta {
    pub time_mode: TimeMode,
    /// Discount rate `δ ≥ 0`.
    pub discount: f64,
}

/// A deterministic value function `V: ℝⁿ → ℝ`.
///
/// Implementations must be pure: the same input always gives the same
/// output, and concurrent calls are allowed.
pub trait ValueOracle: Sync {
    fn dim(&self) -> usize;

    fn eval(&self, x: &[f64]) -> Result<f64>;

    fn meta(&self) -> OracleMeta {
        OracleMeta::default()
    }
}

impl<T: ValueOracle + ?Sized> ValueOracle for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn eval(&self, x: &[f64]) -> Result<f64> {
        (**self).eval(x)
    }

    fn meta(&self) -> OracleMeta {
        (**self).meta()
    }
}

/// Wraps a closure as an oracle.
pub struct FnOracle<F> {
    dim: usize,
    meta: OracleMeta,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnOracle<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self {
            dim,
            meta: OracleMeta::default(),
            f,
        }
    }

    pub fn with_meta(mut self, meta: OracleMeta) -> Self {
        self.meta = meta;
        self
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> ValueOracle for FnOracle<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "oracle input",
                expected: self.dim,
                actual: x.len(),
            });
        }
        Ok((self.f)(x))
    }

    fn meta(&self) -> OracleMeta {
        self.meta
    }
}

/// Oracle cache keyed on the exact bit patterns of the input.
pub struct Memoized<V> {
    inner: V,
    cache: Mutex<HashMap<Vec<u64>, f64>>,
    misses: AtomicUsize,
    lookups: AtomicUsize,
}

impl<V: ValueOracle> Memoized<V> {
    pub fn new(inner: V) -> Self {
        Self {
            inner,
            cache: Mutex::new(HashMap::new()),
            misses: AtomicUsize::new(0),
            lookups: AtomicUsize::new(0),
        }
    }

    /// Calls that reached the wrapped oracle.
    pub fn oracle_calls(&self) -> usize {
        self.misses.load(Ordering::Relaxed)
    }

    /// All evaluation requests, cached or not.
    pub fn requests(&self) -> usize {
        self.lookups.load(Ordering::Relaxed)
    }

    pub fn inner(&self) -> &V {
        &self.inner
    }
}

impl<V: ValueOracle> ValueOracle for Memoized<V> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn eval(&self, x: &[f64]) -> Result<f64> {
        self.lookups.fetch_add(1, Ordering::Relaxed);
        // -0.0 and 0.0 produce the same value; normalize so they share a slot.
        let key: Vec<u64> = x.iter().map(|&v| if v == 0.0 { 0 } else { v.to_bits() }).collect();
        if let Some(&v) = self.cache.lock().expect("cache poisoned").get(&key) {
            return Ok(v);
        }
        let v = self.inner.eval(x)?;
        self.misses.fetch_add(1, Ordering::Relaxed);
        self.cache.lock().expect("cache poisoned").insert(key, v);
        Ok(v)
    }

    fn meta(&self) -> OracleMeta {
        self.inner.meta()
    }
}

fn check_oracle(v: &impl ValueOracle, blocks: &BlockStructure) -> Result<()> {
    if v.dim() != blocks.dim() {
        return Err(Error::DimensionMismatch {
            context: "oracle dimension vs blocks",
            expected: blocks.dim(),
            actual: v.dim(),
        });
    }
    Ok(())
}

/// `V(Π^{c} y) − V(Π^{c+1} y)` for an already-embedded `y`.
fn zeroing_difference(v: &impl ValueOracle, blocks: &BlockStructure, center: usize, y: &[f64]) -> Result<f64> {
    let mut before = y.to_vec();
    project_tail_in_place(blocks, center, &mut before)?;
    let mut after = before.clone();
    project_tail_in_place(blocks, center + 1, &mut after)?;
    Ok(v.eval(&before)? - v.eval(&after)?)
}

/// One separable term evaluated on neighborhood coordinates `x_B`.
pub fn psi_term(v: &impl ValueOracle, blocks: &BlockStructure, nb: &Neighborhood, x_b: &[f64]) -> Result<f64> {
    check_oracle(v, blocks)?;
    let y = embed(blocks, nb, x_b)?;
    zeroing_difference(v, blocks, nb.center, &y)
}

/// The term for one center: its neighborhood, evaluated through the owning
/// approximation's oracle.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeparableTerm {
    pub center: usize,
    pub radius: usize,
    pub neighborhood: Neighborhood,
}

/// `Ψ(x) = V(0) + Σ_j Ψ_l^j(H_l^j x)`, one term per block.
pub struct SeparableApproximation<V> {
    oracle: Memoized<V>,
    blocks: BlockStructure,
    terms: Vec<SeparableTerm>,
    v0: f64,
    radius: usize,
}

/// Builds the approximation with common radius `l`.
pub fn assemble<V: ValueOracle>(
    v: V,
    graph: &InterconnectionGraph,
    blocks: &BlockStructure,
    radius: usize,
) -> Result<SeparableApproximation<V>> {
    check_oracle(&v, blocks)?;
    let terms = (0..blocks.block_count())
        .map(|j| {
            Ok(SeparableTerm {
                center: j,
                radius,
                neighborhood: graph.neighborhood(blocks, j, radius)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let oracle = Memoized::new(v);
    let v0 = oracle.eval(&vec![0.0; blocks.dim()])?;
    if !v0.is_finite() {
        return Err(Error::InvalidParameter("V(0) is not finite".into()));
    }
    Ok(SeparableApproximation {
        oracle,
        blocks: blocks.clone(),
        terms,
        v0,
        radius,
    })
}

impl<V: ValueOracle> SeparableApproximation<V> {
    pub fn terms(&self) -> &[SeparableTerm] {
        &self.terms
    }

    pub fn v0(&self) -> f64 {
        self.v0
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn blocks(&self) -> &BlockStructure {
        &self.blocks
    }

    pub fn oracle(&self) -> &Memoized<V> {
        &self.oracle
    }

    /// `d = max_j b_l^j`: every term depends on at most `d` coordinates.
    pub fn separability_degree(&self) -> usize {
        self.terms.iter().map(|t| t.neighborhood.sub_dim).max().unwrap_or(0)
    }

    /// `Ψ_l^j(x_B)` for the term centered at `j`.
    pub fn term_value(&self, j: usize, x_b: &[f64]) -> Result<f64> {
        let term = self.terms.get(j).ok_or(Error::IndexOutOfRange {
            context: "term index",
            index: j,
            bound: self.terms.len(),
        })?;
        let y = embed(&self.blocks, &term.neighborhood, x_b)?;
        zeroing_difference(&self.oracle, &self.blocks, j, &y)
    }

    /// Per-term values `Ψ_l^j(H_l^j x)`.
    pub fn term_values(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.terms
            .iter()
            .map(|t| self.term_value(t.center, &restrict(&self.blocks, &t.neighborhood, x)?))
            .collect()
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        let terms = self.term_values(x)?;
        Ok(self.v0 + terms.iter().sum::<f64>())
    }

    /// The global differences `V(Π^{j−1} x) − V(Π^{j} x)`.
    pub fn global_differences(&self, x: &[f64]) -> Result<Vec<f64>> {
        let s = self.blocks.block_count();
        let mut values = Vec::with_capacity(s + 1);
        let mut y = x.to_vec();
        values.push(self.oracle.eval(&y)?);
        for j in 1..=s {
            project_tail_in_place(&self.blocks, j, &mut y)?;
            values.push(self.oracle.eval(&y)?);
        }
        Ok(values.windows(2).map(|w| w[0] - w[1]).collect())
    }

    /// A1 residual of every term at a single point.
    pub fn residuals_at(&self, x: &[f64]) -> Result<Vec<f64>> {
        let local = self.term_values(x)?;
        let global = self.global_differences(x)?;
        Ok(local.iter().zip(&global).map(|(l, g)| (l - g).abs()).collect())
    }

    /// Maximum A1 residual per term over `samples`.
    pub fn a1_residual(&self, samples: &[Vec<f64>]) -> Result<A1Residual> {
        if samples.is_empty() {
            return Err(Error::EmptySamples);
        }
        let rows: Vec<Vec<f64>> = samples
            .par_iter()
            .map(|x| self.residuals_at(x))
            .collect::<Result<_>>()?;
        let mut per_term = vec![0.0_f64; self.terms.len()];
        for row in &rows {
            for (acc, &r) in per_term.iter_mut().zip(row) {
                *acc = acc.max(r);
            }
        }
        let max = per_term.iter().copied().fold(0.0, f64::max);
        Ok(A1Residual {
            radius: self.radius,
            per_term,
            max,
        })
    }

    /// Worst `|V(x) − Ψ(x)|` over `samples` against `(s − 1)·γ̂`.
    ///
    /// The inequality is exact in real arithmetic. Each sample is allowed an
    /// additional rounding slack of `4(s+2)·ε` times the magnitudes summed,
    /// since the telescoping sum is itself computed in floating point.
    pub fn theorem_bound_report(&self, gamma_hat: f64, samples: &[Vec<f64>]) -> Result<BoundReport> {
        let s = self.blocks.block_count();
        let bound = (s as f64 - 1.0) * gamma_hat;
        let mut max_error: f64 = 0.0;
        let mut max_excess = f64::NEG_INFINITY;
        for x in samples {
            let terms = self.term_values(x)?;
            let vx = self.oracle.eval(x)?;
            let psi = self.v0 + terms.iter().sum::<f64>();
            let err = (vx - psi).abs();
            let magnitude = vx.abs() + self.v0.abs() + terms.iter().map(|t| t.abs()).sum::<f64>();
            let slack = 4.0 * (s as f64 + 2.0) * f64::EPSILON * magnitude;
            max_error = max_error.max(err);
            max_excess = max_excess.max(err - bound - slack);
        }
        Ok(BoundReport {
            max_error,
            bound,
            satisfied: max_excess <= 0.0,
        })
    }
}

/// Empirical A1 residual table at one radius.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct A1Residual {
    pub radius: usize,
    pub per_term: Vec<f64>,
    /// Empirical `γ̂(l + 1)`.
    pub max: f64,
}

/// Builds the approximation at radius `l` and returns its A1 residuals.
pub fn a1_residual<V: ValueOracle>(
    v: V,
    graph: &InterconnectionGraph,
    blocks: &BlockStructure,
    radius: usize,
    samples: &[Vec<f64>],
) -> Result<A1Residual> {
    assemble(v, graph, blocks, radius)?.a1_residual(samples)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub max_error: f64,
    pub bound: f64,
    pub satisfied: bool,
}

/// Default finite-difference step `10⁻⁴·max(1, ‖x‖∞)`.
pub fn default_step(x: &[f64]) -> f64 {
    1e-4 * x.iter().fold(1.0_f64, |m, v| m.max(v.abs()))
}

/// Central-difference gradient with respect to block `i` of
/// `V_j(x) = V(x) − V(x with block j zeroed)`.
pub fn sensitivity_fd(
    v: &impl ValueOracle,
    blocks: &BlockStructure,
    i: usize,
    j: usize,
    x: &[f64],
    h: f64,
) -> Result<Vec<f64>> {
    check_oracle(v, blocks)?;
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("step must be positive, got {h}")));
    }
    let s = blocks.block_count();
    for (b, name) in [(i, "block i"), (j, "block j")] {
        if b >= s {
            return Err(Error::IndexOutOfRange {
                context: name,
                index: b,
                bound: s,
            });
        }
    }
    if i == j {
        return Err(Error::InvalidParameter("sensitivity needs distinct blocks".into()));
    }
    if x.len() != blocks.dim() {
        return Err(Error::DimensionMismatch {
            context: "sensitivity point",
            expected: blocks.dim(),
            actual: x.len(),
        });
    }
    let vj = |z: &[f64]| -> Result<f64> {
        let mut zero_j = z.to_vec();
        zero_j[blocks.range(j)].iter_mut().for_each(|c| *c = 0.0);
        Ok(v.eval(z)? - v.eval(&zero_j)?)
    };
    blocks
        .range(i)
        .map(|k| {
            let mut plus = x.to_vec();
            let mut minus = x.to_vec();
            plus[k] += h;
            minus[k] -= h;
            Ok((vj(&plus)? - vj(&minus)?) / (2.0 * h))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SensitivityRecord {
    pub i: usize,
    pub j: usize,
    pub dist: usize,
    /// `max_x ‖δ_ij(x)‖∞` over the sample set.
    pub value: f64,
}

/// Finite-difference sensitivities for every ordered pair at finite
/// distance.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SensitivityProfile {
    pub records: Vec<SensitivityRecord>,
    /// Fixed step, or `None` for the per-point default.
    pub step: Option<f64>,
}

impl SensitivityProfile {
    /// Empirical `γ̃(d)`: largest sensitivity among pairs at distance `d`.
    pub fn per_distance(&self) -> Vec<(usize, f64)> {
        let mut by: BTreeMap<usize, f64> = BTreeMap::new();
        for r in &self.records {
            let e = by.entry(r.dist).or_insert(0.0);
            *e = e.max(r.value);
        }
        by.into_iter().collect()
    }
}

pub fn sensitivity_profile(
    v: &impl ValueOracle,
    graph: &InterconnectionGraph,
    blocks: &BlockStructure,
    samples: &[Vec<f64>],
    step: Option<f64>,
) -> Result<SensitivityProfile> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let s = blocks.block_count();
    let pairs: Vec<(usize, usize, usize)> = (0..s)
        .flat_map(|i| (0..s).map(move |j| (i, j)))
        .filter(|&(i, j)| i != j)
        .filter_map(|(i, j)| graph.dist(i, j).map(|d| (i, j, d)))
        .collect();
    let records = pairs
        .par_iter()
        .map(|&(i, j, dist)| {
            let mut value: f64 = 0.0;
            for x in samples {
                let h = step.unwrap_or_else(|| default_step(x));
                let g = sensitivity_fd(v, blocks, i, j, x, h)?;
                value = g.iter().fold(value, |m, c| m.max(c.abs()));
            }
            Ok(SensitivityRecord { i, j, dist, value })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SensitivityProfile { records, step })
}

/// How dataset inputs are drawn from `[-a, a]^{b}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Sampler {
    /// Tensor grid with the largest per-axis count `m` such that
    /// `m^b ≤ count`.
    Grid,
    UniformRandom {
        seed: u64,
    },
}

/// Training rows `(x_B, Ψ_l^j(x_B))` for one term.
#[derive(Clone, Debug, PartialEq)]
pub struct TermDataset {
    pub neighborhood: Neighborhood,
    pub sampler: Sampler,
    pub half_width: f64,
    pub requested: usize,
    pub rows: Vec<(Vec<f64>, f64)>,
}

#[derive(Serialize)]
struct DatasetMeta<'a> {
    j: usize,
    l: usize,
    members: Vec<usize>,
    sub_dim: usize,
    sampler: &'a Sampler,
    seed: Option<u64>,
    a: f64,
    requested: usize,
    rows: usize,
}

impl TermDataset {
    pub fn to_csv(&self) -> String {
        let b = self.neighborhood.sub_dim;
        let mut out = csv_line((1..=b).map(|k| format!("x_{k}")).chain(["psi".to_string()]));
        for (x, psi) in &self.rows {
            out.push_str(&csv_line(x.iter().chain([psi]).map(|&v| fmt17(v))));
        }
        out
    }

    /// JSON sidecar; node indices are 1-based.
    pub fn metadata_json(&self) -> String {
        let seed = match self.sampler {
            Sampler::UniformRandom { seed } => Some(seed),
            Sampler::Grid => None,
        };
        let meta = DatasetMeta {
            j: self.neighborhood.center + 1,
            l: self.neighborhood.radius,
            members: self.neighborhood.members.iter().map(|m| m + 1).collect(),
            sub_dim: self.neighborhood.sub_dim,
            sampler: &self.sampler,
            seed,
            a: self.half_width,
            requested: self.requested,
            rows: self.rows.len(),
        };
        serde_json::to_string_pretty(&meta).expect("plain data serializes") + "\n"
    }

    /// Writes `<stem>.csv` and `<stem>.meta.json` under `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
        let csv = dir.join(format!("{stem}.csv"));
        let meta = dir.join(format!("{stem}.meta.json"));
        std::fs::write(&csv, self.to_csv())?;
        std::fs::write(&meta, self.metadata_json())?;
        Ok((csv, meta))
    }
}

pub fn export_term_dataset(
    v: &impl ValueOracle,
    blocks: &BlockStructure,
    nb: &Neighborhood,
    sampler: Sampler,
    count: usize,
    half_width: f64,
) -> Result<TermDataset> {
    if count == 0 {
        return Err(Error::InvalidParameter("dataset needs at least one row".into()));
    }
    if !(half_width > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "box half-width must be positive, got {half_width}"
        )));
    }
    check_oracle(v, blocks)?;
    let b = nb.sub_dim;
    let inputs = match sampler {
        Sampler::Grid => {
            let mut per_axis = 1usize;
            while (per_axis + 1).checked_pow(b as u32).is_some_and(|t| t <= count) {
                per_axis += 1;
            }
            sampling::grid(b, per_axis, half_width)
        }
        Sampler::UniformRandom { seed } => sampling::uniform(b, count, half_width, seed),
    };
    let values: Vec<f64> = inputs
        .par_iter()
        .map(|x| psi_term(v, blocks, nb, x))
        .collect::<Result<_>>()?;
    Ok(TermDataset {
        neighborhood: nb.clone(),
        sampler,
        half_width,
        requested: count,
        rows: inputs.into_iter().zip(values).collect(),
    })
}
