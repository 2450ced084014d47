//! The `qpca`, `boost` and `kmeans` pipelines.

use std::fs::File;
use std::path::Path;

use anyhow::{Context, Result};
use rand::Rng;
use rayon::prelude::*;

use aqml_core::boosting::{
    attack_ensemble, classify_by_eigenspace, classify_by_mean, spectral_gamma, train_bootstrap_ensemble, AttackSpec,
    AttackStrategy, BoostSim, ClassifyOptions,
};
use aqml_core::embedding::{median, poison, ContaminationSpec, ContaminationStrategy, RawDataset};
use aqml_core::kmeans::{
    classical_iteration, group_median_aggregate, lloyd, max_abs_diff, run_protocol, Participant,
};
use aqml_core::lcu::TaylorConfig;
use aqml_core::linalg::CVector;
use aqml_core::median_search::{list_median, MedianSearchConfig};
use aqml_core::qpca::{build_matrix, poisoning_experiment, qpca_sample, MatrixMode, SimMode};
use aqml_core::rng::{SimRng, StreamSplitter};

use crate::config::{parse_failure_mode, BoostConfig, DatasetConfig, ExperimentConfig, KmeansConfig, QpcaConfig};
use crate::output::Table;
use crate::row;

/// Tables, summary lines and bound violations of one run.
#[derive(Clone, Debug, Default)]
pub struct Report {
    pub tables: Vec<Table>,
    pub summary: Vec<String>,
    pub violations: Vec<String>,
}

impl Report {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

fn synthetic_dataset(d: &DatasetConfig, rng: &mut SimRng) -> Result<RawDataset> {
    let fam = d.family()?;
    let vectors = (0..d.samples).map(|_| fam.sample(d.dim, rng)).collect();
    Ok(RawDataset::new(vectors, d.norm_bound)?)
}

fn load_dataset(path: &Path) -> Result<RawDataset> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    RawDataset::read_csv(f).with_context(|| format!("reading {}", path.display()))
}

fn taylor(eta: f64, delta: f64, order: usize) -> TaylorConfig {
    TaylorConfig {
        eta,
        delta,
        order,
        m_disc: TaylorConfig::m_disc_for(delta, 100.0, 100_000),
        ..TaylorConfig::default()
    }
}

struct QpcaTrial {
    main: Vec<crate::output::Cell>,
    spectrum: Vec<Vec<crate::output::Cell>>,
    medians: Vec<Vec<crate::output::Cell>>,
    violations: Vec<String>,
    holds: bool,
    fragile: bool,
}

fn qpca_trial(q: &QpcaConfig, base: Option<&RawDataset>, seed: u64, alpha: f64) -> Result<QpcaTrial> {
    let split = StreamSplitter::new(seed);
    let raw = match base {
        Some(r) => r.clone(),
        None => synthetic_dataset(&q.dataset, &mut split.stream("qpca-data", 0))?,
    };
    let lipschitz = match q.lipschitz {
        Some(l) => l,
        None => q.dataset.family()?.lipschitz(),
    };
    let r = raw.norm_bound();
    let mut rng = split.stream("qpca-trial", (alpha * 1e6).round() as u64);
    let (strategy, adversary) = match q.strategy.as_str() {
        "prefix" => (ContaminationStrategy::ReplacePrefix, None),
        "random" => {
            let pool: Vec<Vec<f64>> = (0..8)
                .map(|_| {
                    let v: Vec<f64> = (0..raw.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
                    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
                    v.iter().map(|x| x * r / n).collect()
                })
                .collect();
            (ContaminationStrategy::Custom, Some(pool))
        }
        _ => (
            ContaminationStrategy::SpikeDirection {
                direction: vec![1.0; raw.dim()],
            },
            None,
        ),
    };
    let spec = ContaminationSpec {
        alpha,
        strategy,
        adversary_vectors: adversary,
        seed: rng.random(),
    };
    let rep = poisoning_experiment(&raw, &spec, lipschitz)?;
    let poisoned = poison(&raw, &spec)?;
    let mode = match q.matrix.as_str() {
        "quantum" => MatrixMode::QuantumMedian {
            gamma: q.gamma,
            delta: q.delta,
        },
        _ => MatrixMode::ExactMedian,
    };
    let built = build_matrix(&poisoned, mode, &mut rng)?;
    let n = poisoned.dim();
    let x = CVector::from_real(&vec![1.0 / (n as f64).sqrt(); n])?;
    let sim = match q.sim.as_str() {
        "lcu" => SimMode::LcuNoisy(TaylorConfig {
            failure_mode: parse_failure_mode(&q.failure_mode)?,
            ..taylor(q.eta, q.lcu_delta, q.order)
        }),
        _ => SimMode::ExactExp,
    };
    let sample = qpca_sample(&built.matrix, &x, q.bits, q.shots, sim, &mut rng)?;
    let mut queries = built.queries;
    queries.merge(sample.queries);

    let mut violations = Vec::new();
    if !rep.holds() {
        violations.push(format!(
            "qpca: seed {seed} α {alpha}: ‖M − M′‖ = {:.6} exceeds 5αL(d+2) = {:.6}",
            rep.norm, rep.bound
        ));
    }
    let spectrum = sample
        .bins
        .iter()
        .map(|b| row![seed, alpha, b.eigenvalue, b.multiplicity, b.overlap, b.mass, sample.unresolved])
        .collect();

    let s = &q.search;
    let cfg = MedianSearchConfig::for_list(s.epsilon, s.epsilon_prime, poisoned.len(), s.delta0)?
        .with_domain(-r, r)?
        .with_failure_mode(parse_failure_mode(&q.failure_mode)?);
    let bound = cfg.error_envelope(cfg.p_max) * cfg.width();
    let mut medians = Vec::new();
    for k in 0..n {
        let feature = poisoned.feature(k);
        let exact = median(&feature)?;
        let f = feature.clone();
        let res = list_median(feature.len(), move |_| f.clone(), &cfg, 1, &mut rng)?;
        let err = (res.estimate - exact).abs();
        if res.failures == 0 && err > bound + 1e-12 {
            violations.push(format!(
                "qpca: seed {seed} α {alpha}: feature {k} median error {err:.3e} exceeds envelope {bound:.3e}"
            ));
        }
        medians.push(row![seed, alpha, k, res.estimate, exact, err, bound, res.failures, res.queries.total()]);
    }

    Ok(QpcaTrial {
        main: row![seed, alpha, lipschitz, rep.d, rep.norm, rep.bound, sample.lambda_measured, queries.total()],
        spectrum,
        medians,
        violations,
        holds: rep.holds(),
        fragile: rep.classical_norm > rep.bound,
    })
}

pub fn run_qpca(cfg: &ExperimentConfig) -> Result<Report> {
    let q = &cfg.qpca;
    let base = match &q.dataset.path {
        Some(p) => Some(load_dataset(p)?),
        None => None,
    };
    let jobs: Vec<(u64, f64)> = (0..q.trials as u64)
        .flat_map(|t| q.alphas.iter().map(move |&a| (cfg.seed.wrapping_add(t), a)))
        .collect();
    let trials: Vec<QpcaTrial> = jobs
        .par_iter()
        .map(|&(seed, alpha)| qpca_trial(q, base.as_ref(), seed, alpha).with_context(|| format!("qpca seed {seed} α {alpha}")))
        .collect::<Result<_>>()?;

    let mut main = Table::new("qpca", &["seed", "alpha", "L", "d", "norm", "bound", "lambda_measured", "queries"]);
    let mut spectrum = Table::new(
        "qpca_spectrum",
        &["seed", "alpha", "eigenvalue", "multiplicity", "overlap", "mass", "unresolved"],
    );
    let mut medians = Table::new(
        "qpca_medians",
        &["seed", "alpha", "feature", "estimate", "exact", "error", "bound", "failures", "queries"],
    );
    let mut report = Report::default();
    let (mut holds, mut fragile) = (0, 0);
    for t in trials {
        main.push(t.main);
        t.spectrum.into_iter().for_each(|r| spectrum.push(r));
        t.medians.into_iter().for_each(|r| medians.push(r));
        report.violations.extend(t.violations);
        holds += usize::from(t.holds);
        fragile += usize::from(t.fragile);
    }
    let rows = main.rows.len();
    report.summary.push(format!("poisoning bound 5αL(d+2) held in {holds}/{rows} (seed, α) pairs"));
    report.summary.push(format!("mean-based PCA exceeded the same bound in {fragile}/{rows} pairs"));
    report.tables = vec![main, spectrum, medians];
    Ok(report)
}

fn boost_data(b: &BoostConfig, rng: &mut SimRng) -> Result<(RawDataset, Vec<i8>)> {
    let mut v = Vec::with_capacity(b.samples);
    let mut labels = Vec::with_capacity(b.samples);
    for i in 0..b.samples {
        let s = if i % 2 == 0 { 1.0 } else { -1.0 };
        let mut x: Vec<f64> = (0..b.dim).map(|_| rng.random_range(-0.15..0.15)).collect();
        x[0] += 0.6 * s;
        v.push(x);
        labels.push(s as i8);
    }
    Ok((RawDataset::with_tight_bound(v)?, labels))
}

fn boost_trial(b: &BoostConfig, seed: u64) -> Result<(Vec<Vec<crate::output::Cell>>, Vec<String>)> {
    let split = StreamSplitter::new(seed);
    let mut rng = split.stream("boost-train", 0);
    let (raw, labels) = boost_data(b, &mut rng)?;
    let ensemble = train_bootstrap_ensemble(&raw, &labels, b.classifiers, &mut rng)?;
    let mut test = split.stream("boost-test", 0);
    let x: Vec<f64> = (0..b.dim)
        .map(|i| if i == 0 { 0.6 } else { 0.0 } + test.random_range(-0.15..0.15))
        .collect();
    let psi = CVector::from_real(&x)?.normalized()?;
    let gamma = spectral_gamma(&ensemble.spec)?;
    let opts = ClassifyOptions {
        bits: b.bits,
        shots: b.shots,
        sim: match b.sim.as_str() {
            "exact" => BoostSim::ExactExp,
            "lcu" => BoostSim::Lcu(taylor(b.eta, 0.0, 12)),
            _ => BoostSim::Projector,
        },
        tie_positive: true,
    };
    let mut rows = Vec::new();
    let mut violations = Vec::new();
    for (i, &alpha) in b.alphas.iter().enumerate() {
        let out = attack_ensemble(
            &ensemble.spec,
            &AttackSpec {
                alpha,
                strategy: AttackStrategy::FlipWorst,
                indices: None,
                focus: Some(psi.clone()),
            },
        )?;
        if !out.within_bounds(alpha) {
            violations.push(format!(
                "boost: seed {seed} α {alpha}: shift {:.6} / {:.6} exceeds 2α",
                out.norm_shift, out.eig_shift_max
            ));
        }
        let mut crng = split.stream("boost-classify", i as u64);
        let c = classify_by_eigenspace(&psi, &out.spec, &opts, &mut crng)?;
        let m = classify_by_mean(&psi, &out.spec);
        rows.push(row![seed, alpha, gamma, "eigenspace", c.class, c.confidence, out.norm_shift, out.eig_shift_max]);
        rows.push(row![seed, alpha, gamma, "mean", m.class, m.expectation.abs(), out.norm_shift, out.eig_shift_max]);
    }
    Ok((rows, violations))
}

pub fn run_boost(cfg: &ExperimentConfig) -> Result<Report> {
    let b = &cfg.boost;
    let seeds: Vec<u64> = (0..b.trials as u64).map(|t| cfg.seed.wrapping_add(t)).collect();
    let results: Vec<_> = seeds
        .par_iter()
        .map(|&s| boost_trial(b, s).with_context(|| format!("boost seed {s}")))
        .collect::<Result<_>>()?;
    let mut table = Table::new(
        "boost",
        &["seed", "alpha", "gamma", "method", "class", "confidence", "norm_shift", "eig_shift_max"],
    );
    let mut report = Report::default();
    for (rows, v) in results {
        rows.into_iter().for_each(|r| table.push(r));
        report.violations.extend(v);
    }
    report.summary.push(format!(
        "{} attacks, eigenvalue and norm shifts within 2α in {}",
        b.alphas.len() * b.trials,
        b.alphas.len() * b.trials - report.violations.len()
    ));
    report.tables = vec![table];
    Ok(report)
}

fn kmeans_participants(k: &KmeansConfig, rng: &mut SimRng) -> Result<Vec<Participant>> {
    if let Some(p) = &k.path {
        let raw = load_dataset(p)?;
        return Ok(raw
            .vectors()
            .iter()
            .map(|x| Participant::new(x, rng.random::<f64>() < k.participation))
            .collect());
    }
    Ok((0..k.participants)
        .map(|i| {
            let c = &k.blobs[i % k.blobs.len()];
            let x: Vec<f64> = c.iter().map(|v| v + rng.random_range(-k.spread..=k.spread)).collect();
            Participant::new(&x, rng.random::<f64>() < k.participation)
        })
        .collect())
}

/// Farthest-point seeds among the first thousand participants.
fn default_init(parts: &[Participant], k: usize) -> Vec<Vec<f64>> {
    let pool = &parts[..parts.len().min(1000)];
    let mut chosen = vec![pool[0].x.clone()];
    while chosen.len() < k {
        let next = pool
            .iter()
            .max_by(|a, b| {
                let da = chosen.iter().map(|c| dist2(&a.x, c)).fold(f64::INFINITY, f64::min);
                let db = chosen.iter().map(|c| dist2(&b.x, c)).fold(f64::INFINITY, f64::min);
                da.total_cmp(&db)
            })
            .expect("nonempty pool");
        chosen.push(next.x.clone());
    }
    chosen
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn run_kmeans(cfg: &ExperimentConfig) -> Result<Report> {
    let k = &cfg.kmeans;
    let split = StreamSplitter::new(cfg.seed);
    let parts = kmeans_participants(k, &mut split.stream("kmeans-data", 0))?;
    anyhow::ensure!(!parts.is_empty(), "no participants");
    let d = parts[0].x.len();
    k.check_budget(d, parts.len())?;
    let pcfg = k.protocol(d)?;
    let init = k.init.clone().unwrap_or_else(|| default_init(&parts, pcfg.k));
    anyhow::ensure!(init.iter().all(|c| c.len() == d), "init centroids must have dimension {d}");
    let mut rng = split.stream("kmeans-protocol", 0);
    let run = run_protocol(&parts, &pcfg, &init, &mut rng)?;

    let mut report = Report::default();
    let mut traj = Table::new("trajectory", &["round", "cluster", "component", "estimate", "exact", "error"]);
    for (r, round) in run.trajectory.iter().enumerate() {
        for p in 0..pcfg.k {
            let pe = round.exact.probabilities[p];
            traj.push(row![r, p, "p", round.p_hat[p], pe, (round.p_hat[p] - pe).abs()]);
            if round.aborted {
                continue;
            }
            for q in 0..d {
                let (est, ex) = (round.centroids[p][q], round.exact.centroids[p][q]);
                traj.push(row![r, p, q.to_string(), est, ex, (est - ex).abs()]);
            }
        }
        if !round.aborted && round.error() > pcfg.epsilon {
            report.violations.push(format!(
                "kmeans: round {r}: centroid error {:.3e} exceeds ε = {}",
                round.error(),
                pcfg.epsilon
            ));
        }
    }
    let pr = run.privacy;
    let mut privacy = Table::new("privacy", &["q1", "q2", "N", "p_opt_exact", "p_opt_closed", "bound"]);
    privacy.push(row![run.budget.q1, run.budget.q2, pr.n, pr.p_opt_exact, pr.p_opt_closed_form, pr.bound]);
    if !pr.holds() || (pr.p_opt_exact - pr.p_opt_closed_form).abs() > 1e-9 {
        report.violations.push(format!(
            "kmeans: P_opt = {:.12} against closed form {:.12} and bound 1/2 + {:.6}",
            pr.p_opt_exact, pr.p_opt_closed_form, pr.bound
        ));
    }
    report.summary.push(format!(
        "{} rounds, converged = {}, budget exhausted = {}",
        run.trajectory.len(),
        run.converged,
        run.exhausted
    ));
    report.summary.push(format!(
        "q1 + q2 = {} rotations per participant, N = {}, P_opt - 1/2 = {:.6e} <= {:.6e}",
        pr.q_total,
        pr.n,
        pr.p_opt_exact - 0.5,
        pr.bound
    ));
    if let Some(fin) = run.final_centroids() {
        let fixed = lloyd(&parts, &init, pcfg.tie_seed, 1e-12, 200);
        report.summary.push(format!(
            "distance to the classical Lloyd fixed point: {:.6e} (ε = {})",
            max_abs_diff(fin, &fixed),
            pcfg.epsilon
        ));
    }
    report.tables = vec![traj, privacy];

    if k.groups > 0 {
        let mut grng = split.stream("kmeans-groups", 0);
        let g = group_median_aggregate(&parts, &init, &pcfg, k.groups, &k.corrupted_groups, &mut grng)?;
        let clean = classical_iteration(&parts, &init, pcfg.tie_seed, pcfg.epsilon).centroids;
        let mut t = Table::new("groups", &["group", "cluster", "component", "estimate", "clean"]);
        for (gi, c) in g.per_group.iter().enumerate() {
            for p in 0..pcfg.k {
                for q in 0..d {
                    t.push(row![gi.to_string(), p, q, c[p][q], clean[p][q]]);
                }
            }
        }
        for p in 0..pcfg.k {
            for q in 0..d {
                t.push(row!["median", p, q, g.aggregate[p][q], clean[p][q]]);
            }
        }
        report.summary.push(format!(
            "group median over {} groups ({} corrupted): distance to the clean iteration {:.6e}",
            k.groups,
            k.corrupted_groups.len(),
            max_abs_diff(&g.aggregate, &clean)
        ));
        report.tables.push(t);
    }
    Ok(report)
}
