//! Unit-vector embedding of bounded data, median statistics, the
//! median-based covariance matrix, and data contamination.

use std::io::{Read, Write};

use rand::seq::index::sample;
use rand::Rng;
use rand::SeedableRng;

use crate::error::{Error, Result};
use crate::linalg::Hermitian;
use crate::rng::SimRng;
use crate::statevec::{hadamard_test, StatePrep};

const NORM_SLACK: f64 = 1e-12;

/// Real vectors sharing one dimension, all within the norm bound `R`.
#[derive(Clone, Debug, PartialEq)]
pub struct RawDataset {
    vectors: Vec<Vec<f64>>,
    dim: usize,
    norm_bound: f64,
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl RawDataset {
    pub fn new(vectors: Vec<Vec<f64>>, norm_bound: f64) -> Result<Self> {
        let dim = vectors.first().map(Vec::len).ok_or_else(|| Error::invalid("empty dataset"))?;
        if dim == 0 {
            return Err(Error::invalid("zero-dimensional vectors"));
        }
        if !(norm_bound >= 0.0 && norm_bound.is_finite()) {
            return Err(Error::invalid(format!("norm bound must be finite and nonnegative, got {norm_bound}")));
        }
        for v in &vectors {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid("non-finite coordinate"));
            }
            let n = l2(v);
            if n > norm_bound * (1.0 + NORM_SLACK) + NORM_SLACK {
                return Err(Error::NormBound {
                    norm: n,
                    bound: norm_bound,
                });
            }
        }
        Ok(Self {
            vectors,
            dim,
            norm_bound,
        })
    }

    /// Uses the largest vector norm as `R`.
    pub fn with_tight_bound(vectors: Vec<Vec<f64>>) -> Result<Self> {
        let r = vectors.iter().map(|v| l2(v)).fold(0.0, f64::max);
        Self::new(vectors, r)
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }

    /// `e_k^T x_j` for every `j`.
    pub fn feature(&self, k: usize) -> Vec<f64> {
        self.vectors.iter().map(|v| v[k]).collect()
    }

    /// Reads the dataset CSV: a `dim=<N>,R=<R>` header record followed by one
    /// record of `N` floats per vector.
    pub fn read_csv<Rd: Read>(reader: Rd) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut records = rdr.records();
        let header = records
            .next()
            .ok_or(Error::Parse {
                line: 1,
                msg: "missing header".into(),
            })?
            .map_err(|e| parse_err(1, e))?;
        let line_of = |rec: &csv::StringRecord, fallback: usize| rec.position().map_or(fallback, |p| p.line() as usize);
        let hline = line_of(&header, 1);
        let mut dim = None;
        let mut bound = None;
        for field in header.iter() {
            let (key, value) = field.split_once('=').ok_or_else(|| Error::Parse {
                line: hline,
                msg: format!("header field `{field}` is not key=value"),
            })?;
            match key.trim() {
                "dim" => {
                    dim = Some(value.trim().parse::<usize>().map_err(|e| Error::Parse {
                        line: hline,
                        msg: format!("bad dim: {e}"),
                    })?)
                }
                "R" => bound = Some(parse_finite(value, hline)?),
                other => {
                    return Err(Error::Parse {
                        line: hline,
                        msg: format!("unknown header key `{other}`"),
                    })
                }
            }
        }
        let dim = dim.ok_or(Error::Parse {
            line: hline,
            msg: "header lacks dim".into(),
        })?;
        let bound = bound.ok_or(Error::Parse {
            line: hline,
            msg: "header lacks R".into(),
        })?;
        let mut vectors = Vec::new();
        for (i, rec) in records.enumerate() {
            let rec = rec.map_err(|e| parse_err(i + 2, e))?;
            let line = line_of(&rec, i + 2);
            if rec.len() != dim {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected {dim} values, found {}", rec.len()),
                });
            }
            let v = rec.iter().map(|f| parse_finite(f, line)).collect::<Result<Vec<_>>>()?;
            vectors.push(v);
        }
        Self::new(vectors, bound)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(writer);
        let io = |e: csv::Error| Error::invalid(format!("write failed: {e}"));
        w.write_record([format!("dim={}", self.dim), format!("R={:.16e}", self.norm_bound)])
            .map_err(io)?;
        for v in &self.vectors {
            w.write_record(v.iter().map(|x| format!("{x:.16e}"))).map_err(io)?;
        }
        w.flush().map_err(|e| Error::invalid(format!("write failed: {e}")))
    }
}

fn parse_err(line: usize, e: csv::Error) -> Error {
    Error::Parse {
        line,
        msg: e.to_string(),
    }
}

fn parse_finite(s: &str, line: usize) -> Result<f64> {
    let x: f64 = s.trim().parse().map_err(|e| Error::Parse {
        line,
        msg: format!("`{s}`: {e}"),
    })?;
    if !x.is_finite() {
        return Err(Error::Parse {
            line,
            msg: format!("non-finite value `{s}`"),
        });
    }
    Ok(x)
}

/// Unit vectors `|x_j>` and `|x_j^dagger>` in dimension `N (2 N_v + 1)`,
/// stored as `feature (x) tag` with the tag index fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitDataset {
    plain: Vec<Vec<f64>>,
    dagger: Vec<Vec<f64>>,
    dim: usize,
}

impl UnitDataset {
    pub fn len(&self) -> usize {
        self.plain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plain.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn plain(&self, j: usize) -> &[f64] {
        &self.plain[j]
    }

    pub fn dagger(&self, j: usize) -> &[f64] {
        &self.dagger[j]
    }

    /// `<x_j^dagger | x_k>`.
    pub fn overlap(&self, j: usize, k: usize) -> f64 {
        self.dagger[j].iter().zip(&self.plain[k]).map(|(a, b)| a * b).sum()
    }
}

/// `|x_j> = |x_j/|x_j|> (x) ((|x_j|/R)|0> + sqrt(1 - |x_j|^2/R^2)|j>)`, with
/// tag `j + N_v` for the dagger copy. Zero vectors use `e_0` as direction.
pub fn embed(raw: &RawDataset) -> Result<UnitDataset> {
    let nv = raw.len();
    let n = raw.dim();
    let tags = 2 * nv + 1;
    let r = raw.norm_bound();
    let mut plain = Vec::with_capacity(nv);
    let mut dagger = Vec::with_capacity(nv);
    for (j, x) in raw.vectors().iter().enumerate() {
        let norm = l2(x);
        if r == 0.0 && norm > 0.0 {
            return Err(Error::NormBound { norm, bound: r });
        }
        let ratio = if r == 0.0 { 0.0 } else { (norm / r).min(1.0) };
        let rest = (1.0 - ratio * ratio).max(0.0).sqrt();
        let dir: Vec<f64> = if norm > 0.0 {
            x.iter().map(|v| v / norm).collect()
        } else {
            let mut e = vec![0.0; n];
            e[0] = 1.0;
            e
        };
        let build = |tag: usize| {
            let mut out = vec![0.0; n * tags];
            for (f, d) in dir.iter().enumerate() {
                out[f * tags] = d * ratio;
                out[f * tags + tag] = d * rest;
            }
            out
        };
        plain.push(build(1 + j));
        dagger.push(build(1 + j + nv));
    }
    Ok(UnitDataset {
        plain,
        dagger,
        dim: n * tags,
    })
}

/// Median with the midpoint convention for even counts.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid("median of an empty list"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Ok(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// How the per-feature inner products `e_k^T x_j` are obtained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum InnerProductMode {
    #[default]
    Exact,
    /// Exact outcome probabilities of the overlap circuit on the unit
    /// vectors `(x_j/R, sqrt(1 - |x_j|^2/R^2))`.
    HadamardTest,
}

/// `features[k][j] = e_k^T x_j`.
pub fn feature_table(raw: &RawDataset, mode: InnerProductMode) -> Result<Vec<Vec<f64>>> {
    match mode {
        InnerProductMode::Exact => Ok((0..raw.dim()).map(|k| raw.feature(k)).collect()),
        InnerProductMode::HadamardTest => {
            let r = raw.norm_bound();
            if r == 0.0 {
                return Ok(vec![vec![0.0; raw.len()]; raw.dim()]);
            }
            let units: Vec<Vec<f64>> = raw.vectors().iter().map(|x| compact_unit(x, r)).collect();
            let prep = StatePrep::from_real(&units)?;
            let mut table = vec![vec![0.0; raw.len()]; raw.dim()];
            for (k, row) in table.iter_mut().enumerate() {
                for (j, slot) in row.iter_mut().enumerate() {
                    *slot = r * (2.0 * hadamard_test(&prep, j, k)? - 1.0);
                }
            }
            Ok(table)
        }
    }
}

/// `(x/R, sqrt(1 - |x|^2/R^2))`: the embedded vector with its tag register
/// collapsed to one slack coordinate.
pub fn compact_unit(x: &[f64], r: f64) -> Vec<f64> {
    let mut v: Vec<f64> = x.iter().map(|a| a / r).collect();
    let n2: f64 = v.iter().map(|a| a * a).sum();
    v.push((1.0 - n2).max(0.0).sqrt());
    let s = l2(&v);
    v.iter_mut().for_each(|a| *a /= s);
    v
}

/// Median-based covariance:
/// `M_kl = median_j [(x_jk - med_k)(x_jl - med_l)]`.
pub fn robust_pca_matrix(raw: &RawDataset, mode: InnerProductMode) -> Result<Hermitian> {
    let table = feature_table(raw, mode)?;
    robust_pca_from_features(&table)
}

pub fn robust_pca_from_features(table: &[Vec<f64>]) -> Result<Hermitian> {
    let n = table.len();
    let meds = table.iter().map(|f| median(f)).collect::<Result<Vec<_>>>()?;
    let dev: Vec<Vec<f64>> = table
        .iter()
        .zip(&meds)
        .map(|(f, m)| f.iter().map(|x| x - m).collect())
        .collect();
    let mut m = vec![vec![0.0; n]; n];
    for k in 0..n {
        for l in k..n {
            let prods: Vec<f64> = dev[k].iter().zip(&dev[l]).map(|(a, b)| a * b).collect();
            let v = median(&prods)?;
            m[k][l] = v;
            m[l][k] = v;
        }
    }
    Hermitian::from_real_rows(&m)
}

/// Mean-based (biased) covariance.
pub fn classical_pca_matrix(raw: &RawDataset) -> Result<Hermitian> {
    let n = raw.dim();
    let cols: Vec<Vec<f64>> = (0..n).map(|k| raw.feature(k)).collect();
    let means: Vec<f64> = cols.iter().map(|c| mean(c)).collect();
    let mut m = vec![vec![0.0; n]; n];
    for k in 0..n {
        for l in k..n {
            let v = mean(
                &cols[k]
                    .iter()
                    .zip(&cols[l])
                    .map(|(a, b)| (a - means[k]) * (b - means[l]))
                    .collect::<Vec<_>>(),
            );
            m[k][l] = v;
            m[l][k] = v;
        }
    }
    Hermitian::from_real_rows(&m)
}

#[derive(Clone, Debug, PartialEq)]
pub enum ContaminationStrategy {
    /// Replace the first `floor(alpha N_v)` vectors.
    ReplacePrefix,
    /// Replace randomly chosen vectors with `R u` for the unit direction `u`.
    SpikeDirection { direction: Vec<f64> },
    /// Replace randomly chosen vectors with the adversary's vectors.
    Custom,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContaminationSpec {
    pub alpha: f64,
    pub strategy: ContaminationStrategy,
    /// Replacement vectors, cycled. `ReplacePrefix` falls back to `R e_0`.
    pub adversary_vectors: Option<Vec<Vec<f64>>>,
    pub seed: u64,
}

impl ContaminationSpec {
    pub fn replaced_count(&self, n: usize) -> usize {
        (self.alpha * n as f64 + 1e-9).floor() as usize
    }
}

pub fn poison(raw: &RawDataset, spec: &ContaminationSpec) -> Result<RawDataset> {
    if !(0.0..1.0).contains(&spec.alpha) {
        return Err(Error::invalid(format!("alpha must lie in [0, 1), got {}", spec.alpha)));
    }
    let n = raw.len();
    let count = spec.replaced_count(n);
    let r = raw.norm_bound();
    let mut rng = SimRng::seed_from_u64(spec.seed);
    let check = |v: &Vec<f64>| -> Result<()> {
        if v.len() != raw.dim() {
            return Err(Error::DimensionMismatch {
                expected: raw.dim(),
                found: v.len(),
            });
        }
        let norm = l2(v);
        if norm > r * (1.0 + NORM_SLACK) + NORM_SLACK {
            return Err(Error::NormBound { norm, bound: r });
        }
        Ok(())
    };
    if let Some(adv) = &spec.adversary_vectors {
        adv.iter().try_for_each(check)?;
    }
    let (indices, replacements): (Vec<usize>, Vec<Vec<f64>>) = match &spec.strategy {
        ContaminationStrategy::ReplacePrefix => {
            let pool = match &spec.adversary_vectors {
                Some(a) if !a.is_empty() => a.clone(),
                _ => {
                    let mut e = vec![0.0; raw.dim()];
                    e[0] = r;
                    vec![e]
                }
            };
            ((0..count).collect(), (0..count).map(|i| pool[i % pool.len()].clone()).collect())
        }
        ContaminationStrategy::SpikeDirection { direction } => {
            let norm = l2(direction);
            if direction.len() != raw.dim() || norm == 0.0 {
                return Err(Error::invalid("spike direction must be a nonzero vector of the data dimension"));
            }
            let spike: Vec<f64> = direction.iter().map(|x| x * r / norm).collect();
            (sorted_sample(&mut rng, n, count), vec![spike; count])
        }
        ContaminationStrategy::Custom => {
            let pool = spec
                .adversary_vectors
                .as_ref()
                .filter(|a| !a.is_empty())
                .ok_or_else(|| Error::invalid("custom contamination needs adversary vectors"))?;
            (
                sorted_sample(&mut rng, n, count),
                (0..count).map(|i| pool[i % pool.len()].clone()).collect(),
            )
        }
    };
    let mut vectors = raw.vectors().to_vec();
    for (i, v) in indices.into_iter().zip(replacements) {
        vectors[i] = v;
    }
    RawDataset::new(vectors, r)
}

fn sorted_sample<R: Rng + ?Sized>(rng: &mut R, n: usize, count: usize) -> Vec<usize> {
    let mut idx = sample(rng, n, count).into_vec();
    idx.sort_unstable();
    idx
}

/// Scalar distributions on `[-1, 1]` with Lipschitz inverse CDFs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LipschitzFamily {
    /// Uniform on `[-1, 1]`, `L = 2`.
    Uniform,
    /// Density `1/2 + x/4`, `L = 4`.
    LinearRamp,
    /// Density `1/4 + (1 - |x|)/2`, `L = 4`.
    TentOnFloor,
}

impl LipschitzFamily {
    pub const ALL: [LipschitzFamily; 3] = [Self::Uniform, Self::LinearRamp, Self::TentOnFloor];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Uniform => "uniform",
            Self::LinearRamp => "linear-ramp",
            Self::TentOnFloor => "tent-on-floor",
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match self {
            Self::Uniform => 2.0,
            Self::LinearRamp | Self::TentOnFloor => 4.0,
        }
    }

    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match self {
            Self::Uniform => 2.0 * u - 1.0,
            Self::LinearRamp => -2.0 + (1.0 + 8.0 * u).sqrt(),
            Self::TentOnFloor => {
                let lower = |u: f64| 0.5 * (-3.0 + (1.0 + 16.0 * u).sqrt());
                if u <= 0.5 {
                    lower(u)
                } else {
                    -lower(1.0 - u)
                }
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let x = x.clamp(-1.0, 1.0);
        match self {
            Self::Uniform => 0.5 * (x + 1.0),
            Self::LinearRamp => 0.5 * (x + 1.0) + (x * x - 1.0) / 8.0,
            Self::TentOnFloor => {
                let lower = |x: f64| 0.75 * (x + 1.0) + 0.25 * (x * x - 1.0);
                if x <= 0.0 {
                    lower(x)
                } else {
                    1.0 - lower(-x)
                }
            }
        }
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5)
    }

    pub fn spec(&self) -> DistributionSpec {
        DistributionSpec { family: *self }
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        (0..n).map(|_| self.quantile(rng.random::<f64>())).collect()
    }
}

/// An inverse CDF on `[0, 1] -> [-1, 1]` with its claimed Lipschitz constant.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DistributionSpec {
    pub family: LipschitzFamily,
}

impl DistributionSpec {
    pub fn lipschitz(&self) -> f64 {
        self.family.lipschitz()
    }

    pub fn quantile(&self, u: f64) -> f64 {
        self.family.quantile(u)
    }

    /// Largest difference quotient of the quantile on a 1000-point grid.
    pub fn grid_lipschitz(&self) -> f64 {
        let n = 1000;
        (0..n)
            .map(|i| {
                let a = i as f64 / n as f64;
                let b = (i + 1) as f64 / n as f64;
                (self.quantile(b) - self.quantile(a)).abs() / (b - a)
            })
            .fold(0.0, f64::max)
    }
}

/// How contaminating mass is placed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MedianAttack {
    /// Drop the lowest `alpha n` samples and add values above the range.
    RaiseWorst,
    /// Drop the highest `alpha n` samples and add values below the range.
    LowerWorst,
    /// Overwrite random samples with uniform values far from the data.
    Random,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MedianStabilityReport {
    pub alpha: f64,
    pub lipschitz: f64,
    pub samples: usize,
    /// `|median(contaminated) - median(clean)|` on the same draw.
    pub shift: f64,
    pub bound: f64,
    pub slack: f64,
}

impl MedianStabilityReport {
    pub fn holds(&self) -> bool {
        self.shift <= self.bound + self.slack
    }
}

/// 3 sigma of an empirical quantile difference: `3 L sqrt(1/(4n)) sqrt(2)`.
pub fn median_sampling_slack(lipschitz: f64, n: usize) -> f64 {
    3.0 * lipschitz * (0.25 / n as f64).sqrt() * std::f64::consts::SQRT_2
}

/// Draws `n` samples, contaminates `floor(alpha n)` of them (total variation
/// distance at most `alpha`), and compares empirical medians.
pub fn median_stability_check<R: Rng + ?Sized>(
    dist: &DistributionSpec,
    alpha: f64,
    n: usize,
    attack: MedianAttack,
    rng: &mut R,
) -> Result<MedianStabilityReport> {
    if !(0.0..0.5).contains(&alpha) {
        return Err(Error::invalid(format!("alpha must lie in [0, 1/2), got {alpha}")));
    }
    if n == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    let mut clean = dist.family.sample(n, rng);
    clean.sort_by(f64::total_cmp);
    let m = (alpha * n as f64 + 1e-9).floor() as usize;
    let dirty: Vec<f64> = match attack {
        MedianAttack::RaiseWorst => clean[m..].iter().copied().chain(std::iter::repeat_n(1e6, m)).collect(),
        MedianAttack::LowerWorst => clean[..n - m]
            .iter()
            .copied()
            .chain(std::iter::repeat_n(-1e6, m))
            .collect(),
        MedianAttack::Random => {
            let mut d = clean.clone();
            for i in sample(rng, n, m) {
                d[i] = if rng.random::<bool>() { 1e6 } else { -1e6 } * rng.random_range(1.0..2.0);
            }
            d
        }
    };
    let shift = (median(&dirty)? - median(&clean)?).abs();
    let l = dist.lipschitz();
    Ok(MedianStabilityReport {
        alpha,
        lipschitz: l,
        samples: n,
        shift,
        bound: alpha * l,
        slack: median_sampling_slack(l, n),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn brute_robust(vs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        // Straight-line evaluation with an independent median.
        fn med(mut v: Vec<f64>) -> f64 {
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let n = v.len();
            if n % 2 == 1 {
                v[(n - 1) / 2]
            } else {
                (v[n / 2 - 1] + v[n / 2]) / 2.0
            }
        }
        let n = vs[0].len();
        let mut out = vec![vec![0.0; n]; n];
        for k in 0..n {
            for l in 0..n {
                let mk = med(vs.iter().map(|x| x[k]).collect());
                let ml = med(vs.iter().map(|x| x[l]).collect());
                out[k][l] = med(vs.iter().map(|x| (x[k] - mk) * (x[l] - ml)).collect());
            }
        }
        out
    }

    fn rng(seed: u64) -> SimRng {
        SimRng::seed_from_u64(seed)
    }

    fn random_data(rng: &mut SimRng, count: usize, dim: usize, scale: f64) -> Vec<Vec<f64>> {
        (0..count)
            .map(|_| (0..dim).map(|_| rng.random_range(-scale..scale)).collect())
            .collect()
    }

    #[test]
    fn zero_bound_embedding_is_orthogonal() {
        let raw = RawDataset::new(vec![vec![0.0; 3]; 4], 0.0).unwrap();
        let u = embed(&raw).unwrap();
        for j in 0..4 {
            for k in 0..4 {
                assert_eq!(u.overlap(j, k), 0.0);
            }
        }
    }

    #[test]
    fn unit_vectors_keep_inner_products() {
        let raw = RawDataset::new(vec![vec![0.6, 0.8], vec![1.0, 0.0]], 1.0).unwrap();
        let u = embed(&raw).unwrap();
        assert!((u.overlap(0, 1) - 0.6).abs() < 1e-15);
        assert_eq!(u.plain(0)[1], 0.0);
    }

    #[test]
    fn embedding_example() {
        let raw = RawDataset::new(vec![vec![3.0, 4.0], vec![5.0, 0.0]], 5.0).unwrap();
        let u = embed(&raw).unwrap();
        let dot = 3.0 * 5.0 + 4.0 * 0.0;
        assert!((u.overlap(0, 1) - dot / 25.0).abs() < 1e-12);
        assert_eq!(u.dim(), 2 * 5);
    }

    #[test]
    fn embedding_rejects_oversized_vector() {
        assert!(RawDataset::new(vec![vec![3.0, 4.0]], 4.0).is_err());
    }

    #[test]
    fn median_examples() {
        assert_eq!(median(&[3.0]).unwrap(), 3.0);
        assert_eq!(median(&[1.0, 2.0, 3.0, 4.0]).unwrap(), 2.5);
        assert!(median(&[]).is_err());
        let mut r = rng(1);
        let v: Vec<f64> = (0..10_000).map(|_| r.random::<f64>()).collect();
        assert!((median(&v).unwrap() - 0.5).abs() < 0.02);
    }

    #[test]
    fn robust_matrix_examples() {
        let same = RawDataset::with_tight_bound(vec![vec![0.2, -0.4]; 3]).unwrap();
        let m = robust_pca_matrix(&same, InnerProductMode::Exact).unwrap();
        assert_eq!(m.matrix().max_abs(), 0.0);
        let pm = RawDataset::with_tight_bound(vec![vec![1.0], vec![-1.0]]).unwrap();
        assert_eq!(robust_pca_matrix(&pm, InnerProductMode::Exact).unwrap()[(0, 0)].re, 1.0);
        assert_eq!(classical_pca_matrix(&pm).unwrap()[(0, 0)].re, 1.0);
        let single = RawDataset::with_tight_bound(vec![vec![0.3, 0.1]]).unwrap();
        assert_eq!(classical_pca_matrix(&single).unwrap().matrix().max_abs(), 0.0);
    }

    #[test]
    fn robust_matrix_matches_brute_force() {
        let mut r = rng(2);
        let data = random_data(&mut r, 20, 6, 1.0);
        let raw = RawDataset::with_tight_bound(data.clone()).unwrap();
        let m = robust_pca_matrix(&raw, InnerProductMode::Exact).unwrap();
        let b = brute_robust(&data);
        for k in 0..6 {
            for l in 0..6 {
                assert_eq!(m[(k, l)].re, b[k][l]);
            }
        }
    }

    #[test]
    fn hadamard_path_matches_exact() {
        let mut r = rng(3);
        let raw = RawDataset::with_tight_bound(random_data(&mut r, 6, 3, 2.0)).unwrap();
        let a = robust_pca_matrix(&raw, InnerProductMode::Exact).unwrap();
        let b = robust_pca_matrix(&raw, InnerProductMode::HadamardTest).unwrap();
        assert!((a.matrix() - b.matrix()).max_abs() < 1e-10);
    }

    #[test]
    fn classical_matches_textbook_covariance() {
        let mut r = rng(4);
        let data = random_data(&mut r, 15, 4, 3.0);
        let raw = RawDataset::with_tight_bound(data.clone()).unwrap();
        let m = classical_pca_matrix(&raw).unwrap();
        // E[xy] - E[x]E[y]
        let n = data.len() as f64;
        for k in 0..4 {
            for l in 0..4 {
                let exy: f64 = data.iter().map(|x| x[k] * x[l]).sum::<f64>() / n;
                let ex: f64 = data.iter().map(|x| x[k]).sum::<f64>() / n;
                let ey: f64 = data.iter().map(|x| x[l]).sum::<f64>() / n;
                assert!((m[(k, l)].re - (exy - ex * ey)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn poison_counts() {
        let raw = RawDataset::new((0..10).map(|i| vec![i as f64 / 10.0, 0.0]).collect(), 1.0).unwrap();
        let spec = ContaminationSpec {
            alpha: 0.0,
            strategy: ContaminationStrategy::ReplacePrefix,
            adversary_vectors: None,
            seed: 0,
        };
        assert_eq!(poison(&raw, &spec).unwrap(), raw);
        let spec = ContaminationSpec { alpha: 0.5, ..spec };
        let p = poison(&raw, &spec).unwrap();
        for i in 0..10 {
            assert_eq!(p.vectors()[i] != raw.vectors()[i], i < 5, "row {i}");
        }
        let bad = ContaminationSpec {
            adversary_vectors: Some(vec![vec![2.0, 0.0]]),
            ..spec
        };
        assert!(poison(&raw, &bad).is_err());
    }

    #[test]
    fn spike_moves_mean_not_median() {
        let mut r = rng(5);
        let n = 20_000;
        let u = LipschitzFamily::Uniform;
        let data: Vec<Vec<f64>> = (0..n).map(|_| vec![u.quantile(r.random()), 0.0]).collect();
        let raw = RawDataset::new(data, 10.0).unwrap();
        let alpha = 0.1;
        let spec = ContaminationSpec {
            alpha,
            strategy: ContaminationStrategy::SpikeDirection {
                direction: vec![1.0, 0.0],
            },
            adversary_vectors: None,
            seed: 6,
        };
        let p = poison(&raw, &spec).unwrap();
        let mean_shift = mean(&p.feature(0)) - mean(&raw.feature(0));
        let med_shift = (median(&p.feature(0)).unwrap() - median(&raw.feature(0)).unwrap()).abs();
        assert!((mean_shift - alpha * 10.0).abs() < 0.05);
        assert!(med_shift <= alpha * u.lipschitz() + median_sampling_slack(2.0, n));
    }

    #[test]
    fn quantiles_invert_cdfs() {
        for f in LipschitzFamily::ALL {
            for i in 0..=100 {
                let u = i as f64 / 100.0;
                assert!((f.cdf(f.quantile(u)) - u).abs() < 1e-12, "{}", f.name());
            }
            assert!(f.spec().grid_lipschitz() <= f.lipschitz() + 1e-9);
            assert_eq!(f.quantile(0.0), -1.0);
            assert!((f.quantile(1.0) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn stability_examples() {
        let mut r = rng(7);
        let spec = LipschitzFamily::Uniform.spec();
        let rep = median_stability_check(&spec, 0.0, 1001, MedianAttack::RaiseWorst, &mut r).unwrap();
        assert_eq!(rep.shift, 0.0);
        let rep = median_stability_check(&spec, 0.1, 100_000, MedianAttack::RaiseWorst, &mut r).unwrap();
        assert!(rep.holds());
        assert!(rep.shift >= 0.9 * rep.bound);
    }

    #[test]
    fn csv_roundtrip_and_rejections() {
        let raw = RawDataset::new(vec![vec![0.1, -0.25], vec![1.0 / 3.0, 0.5]], 1.0).unwrap();
        let mut buf = Vec::new();
        raw.write_csv(&mut buf).unwrap();
        let back = RawDataset::read_csv(&buf[..]).unwrap();
        assert_eq!(back, raw);
        assert!(RawDataset::read_csv("dim=2,R=1\n0.1,NaN\n".as_bytes()).is_err());
        assert!(RawDataset::read_csv("dim=2,R=1\n0.1,inf\n".as_bytes()).is_err());
        assert!(RawDataset::read_csv("dim=2,R=1\n0.1\n".as_bytes()).is_err());
        assert!(RawDataset::read_csv("dim=2,R=0.1\n0.5,0.5\n".as_bytes()).is_err());
        assert!(RawDataset::read_csv("dim=2\n0.5,0.5\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn embedding_is_an_isometry(seed in any::<u64>(), nv in 1usize..8, dim in 1usize..6, slack in 1.0f64..3.0) {
            let mut r = rng(seed);
            let data = random_data(&mut r, nv, dim, 1.0);
            let rmax = data.iter().map(|v| l2(v)).fold(0.0, f64::max) * slack;
            let raw = RawDataset::new(data.clone(), rmax).unwrap();
            let u = embed(&raw).unwrap();
            for j in 0..nv {
                prop_assert!((l2(u.plain(j)) - 1.0).abs() < 1e-12);
                prop_assert!((l2(u.dagger(j)) - 1.0).abs() < 1e-12);
                for k in 0..nv {
                    let dot: f64 = data[j].iter().zip(&data[k]).map(|(a, b)| a * b).sum();
                    prop_assert!((u.overlap(j, k) - dot / (rmax * rmax)).abs() < 1e-10);
                }
            }
        }

        #[test]
        fn median_is_affine_equivariant(v in prop::collection::vec(-100.0f64..100.0, 1..40), a in 0.01f64..10.0, b in -10.0f64..10.0) {
            let m = median(&v).unwrap();
            let w: Vec<f64> = v.iter().map(|x| a * x + b).collect();
            prop_assert!((median(&w).unwrap() - (a * m + b)).abs() <= 1e-9 * (1.0 + (a * m + b).abs()));
        }

        #[test]
        fn robust_matrix_ignores_order(seed in any::<u64>()) {
            let mut r = rng(seed);
            let mut data = random_data(&mut r, 9, 3, 1.0);
            let raw = RawDataset::with_tight_bound(data.clone()).unwrap();
            let a = robust_pca_matrix(&raw, InnerProductMode::Exact).unwrap();
            data.reverse();
            data.swap(0, 4);
            let b = robust_pca_matrix(&RawDataset::with_tight_bound(data).unwrap(), InnerProductMode::Exact).unwrap();
            prop_assert_eq!(a.matrix().clone(), b.matrix().clone());
            prop_assert_eq!(a.matrix().hermitian_defect(), 0.0);
        }
    }
}
