//! Domain spaces, grid partitions and scenario distributions.
//!
//! A [`DomainSpace`] is a bounded box. A [`Partition`] cuts every dimension
//! into equal-width bins; bins are half-open `[lo, hi)` except the last bin
//! of each dimension, which is closed so that the dimension maximum has an
//! owner. A [`ConditionSet`] is an independent product of per-dimension
//! marginals. Clipped Gaussian marginals move their out-of-range mass onto
//! atoms at the dimension bounds, exactly as the sampler clamps its draws, so
//! analytic region masses and sampled frequencies describe the same law.

use std::collections::HashSet;
use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::normal::{normal_cdf, normal_sf};
use crate::rng::{substream, Purpose};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("domain space must have at least one dimension")]
    EmptyDomain,
    #[error("dimension `{name}` has invalid bounds [{min}, {max}]")]
    InvalidBounds { name: String, min: f64, max: f64 },
    #[error("duplicate dimension name `{0}`")]
    DuplicateDimension(String),
    #[error("unknown dimension `{0}`")]
    UnknownDimension(String),
    #[error("expected {expected} values (one per dimension), got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("value {value} of dimension `{name}` lies outside [{min}, {max}]")]
    OutOfDomain {
        name: String,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("invalid grid: dimension `{name}` has {bins} bins")]
    InvalidGrid { name: String, bins: usize },
    #[error("invalid marginal for dimension `{name}`: {reason}")]
    InvalidMarginal { name: String, reason: String },
    #[error("invalid discrete condition table: {0}")]
    InvalidTable(String),
}

/// One bounded axis of the domain space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dimension {
    pub name: String,
    pub min: f64,
    pub max: f64,
    /// Display unit, e.g. `in/s`. Only used for labels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
}

impl Dimension {
    pub fn new(name: impl Into<String>, min: f64, max: f64) -> Self {
        Self {
            name: name.into(),
            min,
            max,
            unit: None,
        }
    }

    pub fn with_unit(mut self, unit: impl Into<String>) -> Self {
        self.unit = Some(unit.into());
        self
    }

    pub fn contains(&self, value: f64) -> bool {
        value >= self.min && value <= self.max
    }

    /// Axis label, `name [unit]` when a unit is known.
    pub fn label(&self) -> String {
        match &self.unit {
            Some(u) => format!("{} [{}]", self.name, u),
            None => self.name.clone(),
        }
    }
}

/// The set of all scenarios: a bounded box, one [`Dimension`] per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Dimension>", into = "Vec<Dimension>")]
pub struct DomainSpace {
    dims: Vec<Dimension>,
}

impl DomainSpace {
    pub fn new(dims: Vec<Dimension>) -> Result<Self, DomainError> {
        if dims.is_empty() {
            return Err(DomainError::EmptyDomain);
        }
        let mut seen = HashSet::new();
        for d in &dims {
            if !(d.min.is_finite() && d.max.is_finite() && d.min < d.max) {
                return Err(DomainError::InvalidBounds {
                    name: d.name.clone(),
                    min: d.min,
                    max: d.max,
                });
            }
            if !seen.insert(d.name.as_str()) {
                return Err(DomainError::DuplicateDimension(d.name.clone()));
            }
        }
        Ok(Self { dims })
    }

    pub fn dims(&self) -> &[Dimension] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn dim_index(&self, name: &str) -> Result<usize, DomainError> {
        self.dims
            .iter()
            .position(|d| d.name == name)
            .ok_or_else(|| DomainError::UnknownDimension(name.to_string()))
    }

    /// Checks arity and bounds of `x`.
    pub fn check(&self, x: &Scenario) -> Result<(), DomainError> {
        if x.len() != self.dims.len() {
            return Err(DomainError::DimensionMismatch {
                expected: self.dims.len(),
                got: x.len(),
            });
        }
        for (d, &v) in self.dims.iter().zip(x.values()) {
            if !d.contains(v) {
                return Err(DomainError::OutOfDomain {
                    name: d.name.clone(),
                    value: v,
                    min: d.min,
                    max: d.max,
                });
            }
        }
        Ok(())
    }
}

impl TryFrom<Vec<Dimension>> for DomainSpace {
    type Error = DomainError;

    fn try_from(dims: Vec<Dimension>) -> Result<Self, Self::Error> {
        Self::new(dims)
    }
}

impl From<DomainSpace> for Vec<Dimension> {
    fn from(space: DomainSpace) -> Self {
        space.dims
    }
}

/// One point of the domain space, values in dimension order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Scenario(pub Vec<f64>);

impl Scenario {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Bit pattern of the values, usable as an exact hash key.
    pub fn key(&self) -> Vec<u64> {
        self.0.iter().map(|v| v.to_bits()).collect()
    }
}

impl From<Vec<f64>> for Scenario {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

/// Bin counts per dimension, e.g. `10x10x10`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PartitionGrid {
    pub bins: Vec<usize>,
}

impl PartitionGrid {
    pub fn new(bins: Vec<usize>) -> Self {
        Self { bins }
    }

    pub fn region_count(&self) -> usize {
        self.bins.iter().product()
    }
}

impl fmt::Display for PartitionGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.bins.iter().map(|b| b.to_string()).collect();
        f.write_str(&parts.join("x"))
    }
}

impl std::str::FromStr for PartitionGrid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.split(['x', 'X', ','])
            .map(|p| match p.trim().parse::<usize>() {
                Ok(0) => Err("bin counts must be positive".to_string()),
                Ok(b) => Ok(b),
                Err(e) => Err(format!("bad bin count `{p}`: {e}")),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Self::new)
    }
}

/// Checks a grid against a space: one positive bin count per dimension.
///
/// Equal-width bins with half-open edges and a closed final bin are disjoint
/// and cover the space by construction, so no further check is needed.
pub fn validate_grid(grid: &PartitionGrid, space: &DomainSpace) -> Result<(), DomainError> {
    if grid.bins.len() != space.len() {
        return Err(DomainError::DimensionMismatch {
            expected: space.len(),
            got: grid.bins.len(),
        });
    }
    for (d, &b) in space.dims().iter().zip(&grid.bins) {
        if b == 0 {
            return Err(DomainError::InvalidGrid {
                name: d.name.clone(),
                bins: b,
            });
        }
    }
    Ok(())
}

/// Per-dimension extent of a region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    /// True for the last bin of a dimension, which includes `hi`.
    pub closed: bool,
}

impl Interval {
    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && (v < self.hi || (self.closed && v == self.hi))
    }
}

/// One cell of a partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub index: Vec<usize>,
    pub bounds: Vec<Interval>,
}

impl Region {
    pub fn contains(&self, x: &Scenario) -> bool {
        x.len() == self.bounds.len()
            && self
                .bounds
                .iter()
                .zip(x.values())
                .all(|(b, &v)| b.contains(v))
    }

    /// Whether this region is the first bin along dimension `k`, which owns
    /// the lower boundary atom.
    pub fn is_first(&self, k: usize) -> bool {
        self.index[k] == 0
    }
}

/// A validated grid bound to a space.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    space: DomainSpace,
    grid: PartitionGrid,
}

impl Partition {
    pub fn new(space: DomainSpace, grid: PartitionGrid) -> Result<Self, DomainError> {
        validate_grid(&grid, &space)?;
        Ok(Self { space, grid })
    }

    pub fn space(&self) -> &DomainSpace {
        &self.space
    }

    pub fn grid(&self) -> &PartitionGrid {
        &self.grid
    }

    pub fn region_count(&self) -> usize {
        self.grid.region_count()
    }

    /// Edge `i` of dimension `k`; edge `bins` is exactly the dimension max.
    fn edge(&self, k: usize, i: usize) -> f64 {
        let d = &self.space.dims()[k];
        let bins = self.grid.bins[k];
        if i == bins {
            d.max
        } else {
            d.min + (d.max - d.min) * (i as f64 / bins as f64)
        }
    }

    fn bin_of(&self, k: usize, v: f64) -> usize {
        let d = &self.space.dims()[k];
        let bins = self.grid.bins[k];
        let guess = ((v - d.min) / (d.max - d.min) * bins as f64).floor();
        let mut i = if guess.is_finite() && guess > 0.0 {
            (guess as usize).min(bins - 1)
        } else {
            0
        };
        // Settle rounding in the guess against the same edges used for bounds.
        while i + 1 < bins && v >= self.edge(k, i + 1) {
            i += 1;
        }
        while i > 0 && v < self.edge(k, i) {
            i -= 1;
        }
        i
    }

    /// The unique region containing `x`.
    pub fn locate(&self, x: &Scenario) -> Result<Region, DomainError> {
        Ok(self.region(&self.locate_index(x)?))
    }

    /// Per-dimension bin index of `x`.
    pub fn locate_index(&self, x: &Scenario) -> Result<Vec<usize>, DomainError> {
        self.space.check(x)?;
        Ok(x.values()
            .iter()
            .enumerate()
            .map(|(k, &v)| self.bin_of(k, v))
            .collect())
    }

    /// Row-major flat index of `x`'s region.
    pub fn locate_flat(&self, x: &Scenario) -> Result<usize, DomainError> {
        Ok(self.flat_index(&self.locate_index(x)?))
    }

    pub fn flat_index(&self, index: &[usize]) -> usize {
        index
            .iter()
            .zip(&self.grid.bins)
            .fold(0, |acc, (&i, &b)| acc * b + i)
    }

    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let mut index = vec![0; self.grid.bins.len()];
        for (k, &b) in self.grid.bins.iter().enumerate().rev() {
            index[k] = flat % b;
            flat /= b;
        }
        index
    }

    pub fn region(&self, index: &[usize]) -> Region {
        let bounds = index
            .iter()
            .enumerate()
            .map(|(k, &i)| Interval {
                lo: self.edge(k, i),
                hi: self.edge(k, i + 1),
                closed: i + 1 == self.grid.bins[k],
            })
            .collect();
        Region {
            index: index.to_vec(),
            bounds,
        }
    }

    pub fn region_at(&self, flat: usize) -> Region {
        self.region(&self.unflatten(flat))
    }

    /// All regions in row-major order.
    pub fn regions(&self) -> impl Iterator<Item = Region> + '_ {
        (0..self.region_count()).map(|f| self.region_at(f))
    }
}

/// Free-function form of [`Partition::locate`].
pub fn partition_index(
    grid: &PartitionGrid,
    space: &DomainSpace,
    x: &Scenario,
) -> Result<Region, DomainError> {
    Partition::new(space.clone(), grid.clone())?.locate(x)
}

/// Law of a single dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Marginal {
    Uniform {
        a: f64,
        b: f64,
    },
    /// Gaussian with standard deviation `sigma`, clamped to the dimension
    /// bounds.
    ClippedGaussian {
        mu: f64,
        sigma: f64,
    },
}

impl Marginal {
    fn validate(&self, dim: &Dimension) -> Result<(), DomainError> {
        let reason = match *self {
            Marginal::Uniform { a, b } => {
                if !(a.is_finite() && b.is_finite() && a < b) {
                    Some(format!("uniform needs a < b, got a={a}, b={b}"))
                } else if a < dim.min || b > dim.max {
                    Some(format!(
                        "uniform support [{a}, {b}] exceeds [{}, {}]",
                        dim.min, dim.max
                    ))
                } else {
                    None
                }
            }
            Marginal::ClippedGaussian { mu, sigma } => {
                if !(mu.is_finite() && sigma.is_finite() && sigma > 0.0) {
                    Some(format!(
                        "gaussian needs finite mu and sigma > 0, got mu={mu}, sigma={sigma}"
                    ))
                } else {
                    None
                }
            }
        };
        match reason {
            Some(reason) => Err(DomainError::InvalidMarginal {
                name: dim.name.clone(),
                reason,
            }),
            None => Ok(()),
        }
    }

    /// Probability of one bin of a dimension, including the boundary atoms
    /// the bin owns when it is the first or last bin.
    pub fn interval_mass(&self, iv: &Interval, first: bool) -> f64 {
        match *self {
            Marginal::Uniform { a, b } => {
                let lo = iv.lo.max(a);
                let hi = iv.hi.min(b);
                if hi > lo {
                    (hi - lo) / (b - a)
                } else {
                    0.0
                }
            }
            Marginal::ClippedGaussian { mu, sigma } => {
                let z_lo = (iv.lo - mu) / sigma;
                let z_hi = (iv.hi - mu) / sigma;
                match (first, iv.closed) {
                    (true, true) => 1.0,
                    (true, false) => normal_cdf(z_hi),
                    (false, true) => normal_sf(z_lo),
                    (false, false) if z_lo > 0.0 => normal_sf(z_lo) - normal_sf(z_hi),
                    (false, false) => normal_cdf(z_hi) - normal_cdf(z_lo),
                }
            }
        }
    }

    fn draw<R: Rng>(&self, dim: &Dimension, rng: &mut R) -> f64 {
        let raw = match *self {
            Marginal::Uniform { a, b } => a + (b - a) * rng.random::<f64>(),
            Marginal::ClippedGaussian { mu, sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                mu + sigma * z
            }
        };
        raw.clamp(dim.min, dim.max)
    }
}

impl fmt::Display for Marginal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Marginal::Uniform { a, b } => write!(f, "U({a}, {b})"),
            Marginal::ClippedGaussian { mu, sigma } => write!(f, "N({mu}, {sigma}^2) clipped"),
        }
    }
}

/// Anything that assigns probability mass to partition regions.
pub trait MassModel {
    fn name(&self) -> &str;
    fn region_mass(&self, region: &Region) -> f64;
}

/// An independent product distribution over a domain space.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionSet {
    name: String,
    space: DomainSpace,
    marginals: Vec<Marginal>,
}

impl ConditionSet {
    pub fn new(
        name: impl Into<String>,
        space: DomainSpace,
        marginals: Vec<Marginal>,
    ) -> Result<Self, DomainError> {
        if marginals.len() != space.len() {
            return Err(DomainError::DimensionMismatch {
                expected: space.len(),
                got: marginals.len(),
            });
        }
        for (m, d) in marginals.iter().zip(space.dims()) {
            m.validate(d)?;
        }
        Ok(Self {
            name: name.into(),
            space,
            marginals,
        })
    }

    pub fn space(&self) -> &DomainSpace {
        &self.space
    }

    pub fn marginals(&self) -> &[Marginal] {
        &self.marginals
    }

    /// Draws `n` scenarios. Scenario `i` uses its own substream of `seed`,
    /// so the output is a pure function of `(self, n, seed)` and does not
    /// depend on thread scheduling.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<Scenario> {
        (0..n as u64)
            .into_par_iter()
            .map(|i| self.sample_one(seed, i))
            .collect()
    }

    pub fn sample_one(&self, seed: u64, index: u64) -> Scenario {
        let mut rng = substream(seed, Purpose::Scenario, index);
        Scenario(
            self.marginals
                .iter()
                .zip(self.space.dims())
                .map(|(m, d)| m.draw(d, &mut rng))
                .collect(),
        )
    }

    /// Masses of every region of `partition`, in flat order.
    pub fn region_masses(&self, partition: &Partition) -> Vec<f64> {
        partition.regions().map(|r| self.region_mass(&r)).collect()
    }
}

impl MassModel for ConditionSet {
    fn name(&self) -> &str {
        &self.name
    }

    fn region_mass(&self, region: &Region) -> f64 {
        self.marginals
            .iter()
            .zip(&region.bounds)
            .enumerate()
            .map(|(k, (m, iv))| m.interval_mass(iv, region.is_first(k)))
            .product()
    }
}

/// Free-function form of [`MassModel::region_mass`].
pub fn region_mass(cond: &impl MassModel, region: &Region) -> f64 {
    cond.region_mass(region)
}

/// A finite table of scenarios with explicit probabilities.
///
/// Region masses are sums of the probabilities of the table points lying in
/// the region.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteCondition {
    name: String,
    space: DomainSpace,
    points: Vec<(Scenario, f64)>,
}

impl DiscreteCondition {
    pub fn new(
        name: impl Into<String>,
        space: DomainSpace,
        points: Vec<(Scenario, f64)>,
    ) -> Result<Self, DomainError> {
        if points.is_empty() {
            return Err(DomainError::InvalidTable("table is empty".into()));
        }
        let mut keys = HashSet::new();
        let mut total = 0.0;
        for (x, p) in &points {
            space.check(x)?;
            if !(p.is_finite() && *p >= 0.0) {
                return Err(DomainError::InvalidTable(format!(
                    "invalid probability {p}"
                )));
            }
            if !keys.insert(x.key()) {
                return Err(DomainError::InvalidTable(format!(
                    "duplicate scenario {:?}",
                    x.0
                )));
            }
            total += p;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(DomainError::InvalidTable(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self {
            name: name.into(),
            space,
            points,
        })
    }

    pub fn space(&self) -> &DomainSpace {
        &self.space
    }

    pub fn points(&self) -> &[(Scenario, f64)] {
        &self.points
    }
}

impl MassModel for DiscreteCondition {
    fn name(&self) -> &str {
        &self.name
    }

    fn region_mass(&self, region: &Region) -> f64 {
        self.points
            .iter()
            .filter(|(x, _)| region.contains(x))
            .map(|(_, p)| p)
            .sum()
    }
}
