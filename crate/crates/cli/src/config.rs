//! TOML experiment configuration. Unknown keys are errors; every section is
//! optional and falls back to its defaults.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};

use aqml_core::embedding::LipschitzFamily;
use aqml_core::kmeans::{PhaseSchedule, ProtocolConfig};
use aqml_core::median_search::MedianSearchConfig;
use aqml_core::noisy::FailureMode;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subcommand {
    Qpca,
    Boost,
    Kmeans,
    Verify,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Qpca => "qpca",
            Subcommand::Boost => "boost",
            Subcommand::Kmeans => "kmeans",
            Subcommand::Verify => "verify",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub qpca: QpcaConfig,
    #[serde(default)]
    pub boost: BoostConfig,
    #[serde(default)]
    pub kmeans: KmeansConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    /// CSV in the dataset format; overrides the synthetic generator.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// `uniform`, `ramp` or `tent`, drawn independently per coordinate.
    pub family: String,
    pub samples: usize,
    pub dim: usize,
    pub norm_bound: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            path: None,
            family: "uniform".into(),
            samples: 200,
            dim: 2,
            norm_bound: 10.0,
        }
    }
}

impl DatasetConfig {
    pub fn family(&self) -> Result<LipschitzFamily> {
        parse_family(&self.family)
    }
}

pub fn parse_family(name: &str) -> Result<LipschitzFamily> {
    Ok(match name {
        "uniform" => LipschitzFamily::Uniform,
        "ramp" => LipschitzFamily::LinearRamp,
        "tent" => LipschitzFamily::TentOnFloor,
        other => bail!("unknown distribution family `{other}` (uniform, ramp, tent)"),
    })
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchConfig {
    pub epsilon: f64,
    pub epsilon_prime: f64,
    pub delta0: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.05,
            epsilon_prime: 0.01,
            delta0: 0.01,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct QpcaConfig {
    pub dataset: DatasetConfig,
    pub alphas: Vec<f64>,
    /// Trials per contamination level.
    pub trials: usize,
    /// `spike`, `prefix` or `random`.
    pub strategy: String,
    /// Defaults to the synthetic family's constant.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<f64>,
    /// `exact` or `quantum`.
    pub matrix: String,
    pub gamma: f64,
    pub delta: f64,
    /// `exact` or `lcu`.
    pub sim: String,
    pub eta: f64,
    pub lcu_delta: f64,
    pub order: usize,
    pub bits: usize,
    pub shots: u64,
    pub failure_mode: String,
    pub search: SearchConfig,
}

impl Default for QpcaConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetConfig::default(),
            alphas: vec![0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45],
            trials: 3,
            strategy: "spike".into(),
            lipschitz: None,
            matrix: "exact".into(),
            gamma: 0.05,
            delta: 0.01,
            sim: "exact".into(),
            eta: 0.0,
            lcu_delta: 0.0,
            order: 12,
            bits: 10,
            shots: 10_000,
            failure_mode: "worst-case".into(),
            search: SearchConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoostConfig {
    pub samples: usize,
    pub dim: usize,
    pub classifiers: usize,
    pub alphas: Vec<f64>,
    pub trials: usize,
    /// `projector`, `exact` or `lcu`.
    pub sim: String,
    pub bits: usize,
    pub shots: u64,
    pub eta: f64,
}

impl Default for BoostConfig {
    fn default() -> Self {
        Self {
            samples: 60,
            dim: 3,
            classifiers: 10,
            alphas: vec![0.0, 0.1, 0.2, 0.3],
            trials: 3,
            sim: "projector".into(),
            bits: 8,
            shots: 0,
            eta: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct KmeansConfig {
    /// Participant CSV in the dataset format, one row per participant.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    pub participants: usize,
    pub blobs: Vec<Vec<f64>>,
    pub spread: f64,
    pub participation: f64,
    /// Defaults to the number of blobs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    pub epsilon: f64,
    pub rounds: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convergence: Option<f64>,
    pub shot_error: f64,
    pub estimate_delta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub privacy_delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init: Option<Vec<Vec<f64>>>,
    /// Odd group count for the median aggregate; `0` skips it.
    pub groups: usize,
    pub corrupted_groups: Vec<usize>,
}

impl Default for KmeansConfig {
    fn default() -> Self {
        Self {
            path: None,
            participants: 1_000_000,
            blobs: vec![vec![0.5, 0.4], vec![-0.4, -0.5]],
            spread: 0.2,
            participation: 1.0,
            k: None,
            epsilon: 0.1,
            rounds: 4,
            convergence: None,
            shot_error: 0.3,
            estimate_delta: 1e-6,
            privacy_delta: None,
            init: None,
            groups: 0,
            corrupted_groups: Vec::new(),
        }
    }
}

impl KmeansConfig {
    pub fn k(&self) -> usize {
        self.k.unwrap_or(self.blobs.len())
    }

    pub fn protocol(&self, d: usize) -> Result<ProtocolConfig> {
        let mut p = ProtocolConfig::new(self.k(), d, self.epsilon)?;
        p.rounds = self.rounds;
        p.convergence = self.convergence.unwrap_or(self.epsilon);
        p.shot_error = self.shot_error;
        p.estimate_delta = self.estimate_delta;
        p.privacy_delta = self.privacy_delta;
        p.validate()?;
        Ok(p)
    }

    /// Rotations per participant for `rounds` rounds, planning phase 2 at a
    /// smallest cluster probability of `1/k`.
    pub fn planned_rotations(&self, d: usize) -> Result<u64> {
        let p = self.protocol(d)?;
        let s1 = PhaseSchedule::for_precision(p.epsilon / 4.0, p.shot_error, p.estimate_delta)?;
        let e2 = aqml_core::kmeans::phase_two_precision(p.epsilon, 1.0 / p.k as f64);
        ensure!(e2 > 0.0, "ε = {} is too coarse for k = {}", p.epsilon, p.k);
        let s2 = PhaseSchedule::for_precision(e2, p.shot_error, p.estimate_delta)?;
        let per_round = s1.rotations() + (d as u64 + 1) * s2.rotations();
        Ok(per_round.saturating_mul(self.rounds as u64))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    /// Criteria to run; empty means all fourteen.
    pub criteria: Vec<usize>,
}

pub fn parse_failure_mode(name: &str) -> Result<FailureMode> {
    name.parse::<FailureMode>().map_err(|e| anyhow::anyhow!("{e}"))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).context("config")?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Invariant checks for the sections `cmd` uses.
    pub fn validate(&self, cmd: Subcommand) -> Result<()> {
        match cmd {
            Subcommand::Qpca => self.validate_qpca().context("qpca config"),
            Subcommand::Boost => self.validate_boost().context("boost config"),
            Subcommand::Kmeans => self.validate_kmeans().context("kmeans config"),
            Subcommand::Verify => {
                for &c in &self.verify.criteria {
                    ensure!((1..=14).contains(&c), "criterion {c} does not exist (1..=14)");
                }
                Ok(())
            }
        }
    }

    fn validate_qpca(&self) -> Result<()> {
        let q = &self.qpca;
        let s = &q.search;
        MedianSearchConfig::new(s.epsilon, s.epsilon_prime, 1.0, s.delta0)?;
        validate_dataset(&q.dataset)?;
        ensure!(!q.alphas.is_empty(), "alphas must not be empty");
        for &a in &q.alphas {
            ensure!((0.0..0.5).contains(&a), "α must lie in [0, 1/2), got {a}");
        }
        ensure!(q.trials >= 1, "trials must be at least 1");
        ensure!(matches!(q.strategy.as_str(), "spike" | "prefix" | "random"), "unknown strategy `{}`", q.strategy);
        ensure!(matches!(q.matrix.as_str(), "exact" | "quantum"), "unknown matrix mode `{}`", q.matrix);
        ensure!(matches!(q.sim.as_str(), "exact" | "lcu"), "unknown sim mode `{}`", q.sim);
        ensure!(q.gamma > 0.0 && q.gamma < 1.0, "γ must lie in (0, 1)");
        ensure!((0.0..1.0).contains(&q.delta), "δ must lie in [0, 1)");
        ensure!(q.eta >= 0.0 && (0.0..1.0).contains(&q.lcu_delta), "LCU noise out of range");
        ensure!((1..=12).contains(&q.bits), "bits must lie in 1..=12");
        ensure!(q.order >= 1, "Taylor order must be at least 1");
        parse_failure_mode(&q.failure_mode)?;
        if let Some(l) = q.lipschitz {
            ensure!(l > 0.0, "Lipschitz constant must be positive");
        } else if q.dataset.path.is_some() {
            bail!("a dataset file needs an explicit lipschitz constant");
        }
        Ok(())
    }

    fn validate_boost(&self) -> Result<()> {
        let b = &self.boost;
        ensure!(b.samples >= 2 && b.dim >= 2, "need at least two samples and two dimensions");
        ensure!(b.classifiers >= 1, "classifiers must be at least 1");
        ensure!(b.trials >= 1, "trials must be at least 1");
        for &a in &b.alphas {
            ensure!((0.0..1.0).contains(&a), "α must lie in [0, 1), got {a}");
        }
        ensure!(matches!(b.sim.as_str(), "projector" | "exact" | "lcu"), "unknown sim mode `{}`", b.sim);
        ensure!((1..=12).contains(&b.bits), "bits must lie in 1..=12");
        Ok(())
    }

    fn validate_kmeans(&self) -> Result<()> {
        let k = &self.kmeans;
        ensure!(k.path.is_some() || !k.blobs.is_empty(), "need blobs or a participant file");
        for b in &k.blobs {
            ensure!(b.len() == k.blobs[0].len(), "blob centers differ in dimension");
        }
        ensure!((0.0..=1.0).contains(&k.participation), "participation must lie in [0, 1]");
        ensure!(k.spread >= 0.0, "spread must be nonnegative");
        if k.groups > 0 {
            ensure!(k.groups >= 3 && k.groups % 2 == 1, "group count must be odd and at least 3");
            for &g in &k.corrupted_groups {
                ensure!(g < k.groups, "corrupted group {g} out of range");
            }
        }
        if let Some(init) = &k.init {
            ensure!(init.len() == k.k(), "init needs {} centroids", k.k());
        }
        if k.path.is_none() {
            ensure!(k.participants >= 1, "N must be at least 1");
            k.check_budget(k.blobs[0].len(), k.participants)?;
        }
        Ok(())
    }
}

impl KmeansConfig {
    /// Rejects runs whose planned rotation count reaches the population.
    pub fn check_budget(&self, d: usize, n: usize) -> Result<()> {
        let q = self.planned_rotations(d)?;
        ensure!(
            q < n as u64,
            "planned q1 + q2 = {q} rotations is not below N = {n}; the privacy bound needs q1 + q2 < N"
        );
        Ok(())
    }
}

fn validate_dataset(d: &DatasetConfig) -> Result<()> {
    if d.path.is_none() {
        d.family()?;
        ensure!(d.samples >= 1 && d.dim >= 1, "dataset needs samples and dimensions");
        ensure!(d.dim <= 64, "dimension capped at 64");
        ensure!(
            d.norm_bound >= (d.dim as f64).sqrt(),
            "norm bound R = {} is below sqrt(dim) = {}",
            d.norm_bound,
            (d.dim as f64).sqrt()
        );
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_fills_defaults() {
        let c = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        c.validate(Subcommand::Qpca).unwrap();
        c.validate(Subcommand::Boost).unwrap();
        c.validate(Subcommand::Kmeans).unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_toml("sead = 3").is_err());
        assert!(ExperimentConfig::from_toml("[qpca]\nalpha = [0.1]").is_err());
        assert!(ExperimentConfig::from_toml("[qpca.search]\nepsilom = 0.1").is_err());
    }

    #[test]
    fn epsilon_admissibility() {
        let c = ExperimentConfig::from_toml("[qpca.search]\nepsilon = 0.3").unwrap();
        let err = format!("{:#}", c.validate(Subcommand::Qpca).unwrap_err());
        assert!(err.contains("ε < 1/4 required"), "{err}");
    }

    #[test]
    fn kmeans_budget_must_fit_population() {
        let c = ExperimentConfig::from_toml("[kmeans]\nparticipants = 1000").unwrap();
        let err = format!("{:#}", c.validate(Subcommand::Kmeans).unwrap_err());
        assert!(err.contains("not below N"), "{err}");
    }

    #[test]
    fn echo_round_trips() {
        let c = ExperimentConfig::from_toml("seed = 9\n[boost]\nclassifiers = 4").unwrap();
        let text = toml::to_string(&c).unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), c);
    }
}
