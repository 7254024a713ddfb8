use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::time::Instant;

use faer::Mat;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, Statistic};
use crate::eigenstates::{entropy, overlaps, HusimiGrid};
use crate::error::{Error, Result};
use crate::floquet::{build_floquet, diagonalize};
use crate::imperfections::{propagator_for, sample_disorder, ImperfectionParams};
use crate::sawtooth::{compile_iteration, make_params, GateSequence, MapParams};
use crate::seeds;
use crate::spectral::{self, MIN_SAMPLES};

pub const SOFTWARE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// File holding per-realization results for resuming.
pub const REALIZATION_LOG: &str = "realizations.jsonl";

// Bytes of dense matrices a single realization keeps alive, per N^2 entry.
const TASK_BYTES_PER_ENTRY: usize = 6 * 16;
const DEFAULT_MEMORY_BUDGET: usize = 2 << 30;

/// A statistic with its standard error, when one can be estimated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: Option<f64>,
}

/// Result at one `(n_q, eps)` point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub n_q: usize,
    pub eps: f64,
    pub rho: f64,
    pub realizations: usize,
    pub eta: Option<Estimate>,
    pub eta_tilde: Option<Estimate>,
    pub entropy: Option<Estimate>,
    /// SHA-256 of the quasi-energies of all realizations, in order.
    pub spectra_checksum: String,
    /// Sorted quasi-energies of every realization.
    #[serde(skip)]
    pub levels: Vec<Vec<f64>>,
}

impl PointResult {
    pub fn get(&self, stat: Statistic) -> Option<Estimate> {
        match stat {
            Statistic::Eta => self.eta,
            Statistic::EtaTilde => self.eta_tilde,
            Statistic::Entropy => self.entropy,
        }
    }

    /// All unfolded spacings, pooled over realizations.
    pub fn pooled_spacings(&self) -> Vec<f64> {
        self.levels
            .iter()
            .flat_map(|l| spectral::spacings(l).unwrap_or_default())
            .collect()
    }
}

/// Outcome of a sweep, border study or single-state analysis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub software_version: String,
    pub rng: String,
    pub points: Vec<PointResult>,
    /// False when the run stopped early on its realization budget.
    pub complete: bool,
    pub wall_clock_seconds: f64,
    pub border: Option<super::border::BorderStudy>,
    pub husimi: Option<HusimiGrid>,
}

impl RunRecord {
    pub fn new(config: &ExperimentConfig) -> Self {
        Self {
            config_hash: config.hash(),
            config: config.clone(),
            software_version: SOFTWARE_VERSION.to_string(),
            rng: seeds::RNG_NAME.to_string(),
            points: Vec::new(),
            complete: true,
            wall_clock_seconds: 0.0,
            border: None,
            husimi: None,
        }
    }

    pub fn points_for(&self, n_q: usize) -> impl Iterator<Item = &PointResult> + '_ {
        self.points.iter().filter(move |p| p.n_q == n_q)
    }

    /// Statistic curve at one qubit count, skipping points where it is undefined.
    pub fn curve(&self, n_q: usize, stat: Statistic) -> Result<spectral::CrossoverCurve> {
        let mut pts: Vec<spectral::CurvePoint> = self
            .points_for(n_q)
            .filter_map(|p| {
                p.get(stat).map(|e| spectral::CurvePoint {
                    eps: p.eps,
                    value: e.value,
                    stderr: e.stderr.unwrap_or(f64::NAN),
                    realizations: p.realizations,
                })
            })
            .collect();
        pts.sort_by(|a, b| a.eps.total_cmp(&b.eps));
        spectral::CrossoverCurve::new(pts)
    }
}

/// Controls that do not affect results.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Stop after computing this many new realizations (resume test hook).
    pub max_new_realizations: Option<usize>,
    /// Bytes of dense matrices that concurrent realizations may hold.
    pub memory_budget: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Realization {
    config_hash: String,
    n_q: usize,
    eps: f64,
    index: usize,
    levels: Vec<f64>,
    entropy: Option<f64>,
}

/// Per-realization results already computed, optionally backed by a log file.
struct RealizationStore {
    done: HashMap<(usize, u64, usize), Realization>,
    log: Option<File>,
}

impl RealizationStore {
    fn open(dir: Option<&Path>, config_hash: &str) -> Result<Self> {
        let mut done = HashMap::new();
        let Some(dir) = dir else {
            return Ok(Self { done, log: None });
        };
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(REALIZATION_LOG);
        if path.exists() {
            let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
            for line in BufReader::new(file).lines() {
                let line = line.map_err(|e| Error::io(&path, e))?;
                // A torn final line from an interrupted write is ignored.
                let Ok(r) = serde_json::from_str::<Realization>(&line) else {
                    continue;
                };
                if r.config_hash == config_hash {
                    done.insert((r.n_q, r.eps.to_bits(), r.index), r);
                }
            }
        }
        let log = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        Ok(Self {
            done,
            log: Some(log),
        })
    }

    fn get(&self, n_q: usize, eps: f64, index: usize) -> Option<&Realization> {
        self.done.get(&(n_q, eps.to_bits(), index))
    }

    fn insert(&mut self, r: Realization, dir: Option<&Path>) -> Result<()> {
        if let Some(log) = self.log.as_mut() {
            let mut line = serde_json::to_string(&r)?;
            line.push('\n');
            let path = dir.map(|d| d.join(REALIZATION_LOG)).unwrap_or_default();
            log.write_all(line.as_bytes())
                .and_then(|_| log.flush())
                .map_err(|e| Error::io(path, e))?;
        }
        self.done.insert((r.n_q, r.eps.to_bits(), r.index), r);
        Ok(())
    }
}

/// Per-qubit-count data shared by all realizations.
struct QubitContext {
    params: MapParams,
    seq: GateSequence,
    ideal_vectors: Option<Mat<C64>>,
}

/// Shared machinery of sweeps and border studies.
pub(crate) struct Sweeper {
    pub(crate) cfg: ExperimentConfig,
    pub(crate) record: RunRecord,
    store: RealizationStore,
    contexts: HashMap<usize, QubitContext>,
    budget: Option<usize>,
    memory_budget: usize,
    pub(crate) interrupted: bool,
}

impl Sweeper {
    pub(crate) fn new(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Self> {
        cfg.validate()?;
        let record = RunRecord::new(cfg);
        let store = RealizationStore::open(cfg.output_dir.as_deref(), &record.config_hash)?;
        Ok(Self {
            cfg: cfg.clone(),
            record,
            store,
            contexts: HashMap::new(),
            budget: opts.max_new_realizations,
            memory_budget: opts.memory_budget.unwrap_or(DEFAULT_MEMORY_BUDGET),
            interrupted: false,
        })
    }

    fn context(&mut self, n_q: usize) -> Result<&QubitContext> {
        if !self.contexts.contains_key(&n_q) {
            let params = make_params(self.cfg.chaos, n_q, self.cfg.theta0, self.cfg.phi)?;
            let seq = compile_iteration(&params);
            let ideal_vectors = if self.cfg.needs_entropy() {
                let u = build_floquet(&params, &seq, None)?;
                Some(diagonalize(&u)?.eigenvectors)
            } else {
                None
            };
            self.contexts.insert(
                n_q,
                QubitContext {
                    params,
                    seq,
                    ideal_vectors,
                },
            );
        }
        Ok(&self.contexts[&n_q])
    }

    /// Evaluates one point, reusing stored realizations. Returns `None` when
    /// the realization budget ran out first.
    pub(crate) fn point(&mut self, n_q: usize, eps: f64) -> Result<Option<PointResult>> {
        if let Some(p) = self
            .record
            .points
            .iter()
            .find(|p| p.n_q == n_q && p.eps.to_bits() == eps.to_bits())
        {
            return Ok(Some(p.clone()));
        }
        let rho = self.cfg.coupling.rho(eps);
        // Without imperfections every realization is the same operator.
        let count = if eps == 0.0 && rho == 0.0 {
            1
        } else {
            self.cfg.realizations_for(n_q)
        };
        let missing: Vec<usize> = (0..count)
            .filter(|&r| self.store.get(n_q, eps, r).is_none())
            .collect();
        let allowed = match self.budget {
            Some(b) => missing.len().min(b),
            None => missing.len(),
        };

        let dim = 1usize << n_q;
        let concurrency = (self.memory_budget / (TASK_BYTES_PER_ENTRY * dim * dim)).max(1);
        let cfg = self.cfg.clone();
        let config_hash = self.record.config_hash.clone();
        self.context(n_q)?;
        let ctx = &self.contexts[&n_q];
        let disorder_seed = seeds::derive_u64(cfg.master_seed, &[n_q as u64, eps.to_bits()]);
        let mut fresh = Vec::with_capacity(allowed);
        for chunk in missing[..allowed].chunks(concurrency) {
            let results: Vec<Result<Realization>> = chunk
                .par_iter()
                .map(|&r| {
                    let (levels, entropy) =
                        run_realization(ctx, &cfg, eps, rho, disorder_seed, r as u64)?;
                    Ok(Realization {
                        config_hash: config_hash.clone(),
                        n_q,
                        eps,
                        index: r,
                        levels,
                        entropy,
                    })
                })
                .collect();
            for r in results {
                fresh.push(r?);
            }
        }
        let dir = self.cfg.output_dir.clone();
        for r in fresh {
            self.store.insert(r, dir.as_deref())?;
        }
        if let Some(b) = self.budget.as_mut() {
            *b -= allowed;
        }
        if allowed < missing.len() {
            self.interrupted = true;
            self.record.complete = false;
            return Ok(None);
        }

        let realizations: Vec<&Realization> = (0..count)
            .map(|r| {
                self.store
                    .get(n_q, eps, r)
                    .expect("all realizations present")
            })
            .collect();
        let point = aggregate(n_q, eps, rho, &realizations, self.cfg.needs_entropy())?;
        self.record.points.push(point.clone());
        Ok(Some(point))
    }

    pub(crate) fn finish(mut self, started: Instant) -> RunRecord {
        self.record
            .points
            .sort_by(|a, b| a.n_q.cmp(&b.n_q).then(a.eps.total_cmp(&b.eps)));
        self.record.wall_clock_seconds = started.elapsed().as_secs_f64();
        self.record
    }
}

fn run_realization(
    ctx: &QubitContext,
    cfg: &ExperimentConfig,
    eps: f64,
    rho: f64,
    disorder_seed: u64,
    index: u64,
) -> Result<(Vec<f64>, Option<f64>)> {
    let n_q = ctx.params.n_q;
    let propagator = if eps == 0.0 && rho == 0.0 {
        None
    } else {
        let imp = ImperfectionParams::from_scaled(eps, rho, cfg.tau_g)?;
        let disorder = sample_disorder(n_q, &imp, disorder_seed, index);
        Some(propagator_for(&disorder, 0.0, cfg.tau_g)?)
    };
    let u = build_floquet(&ctx.params, &ctx.seq, propagator.as_ref())?;
    let spectrum = diagonalize(&u)?;
    let entropy = match &ctx.ideal_vectors {
        Some(ideal) => Some(entropy(&overlaps(ideal, &spectrum.eigenvectors)?)?.1),
        None => None,
    };
    Ok((spectrum.quasi_energies, entropy))
}

/// Leave-one-group-out standard error of a statistic of the pooled groups.
pub fn jackknife_stderr(groups: &[Vec<f64>], stat: impl Fn(&[f64]) -> Option<f64>) -> Option<f64> {
    let n = groups.len();
    if n < 2 {
        return None;
    }
    let mut pooled = Vec::new();
    let mut values = Vec::with_capacity(n);
    for skip in 0..n {
        pooled.clear();
        for (i, g) in groups.iter().enumerate() {
            if i != skip {
                pooled.extend_from_slice(g);
            }
        }
        values.push(stat(&pooled)?);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    Some(((n - 1) as f64 / n as f64 * ss).sqrt())
}

fn spacing_estimate(
    groups: &[Vec<f64>],
    stat: fn(&[f64], usize) -> Result<f64>,
) -> Option<Estimate> {
    let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
    let value = stat(&pooled, MIN_SAMPLES).ok()?;
    let stderr = jackknife_stderr(groups, |s| stat(s, 1).ok());
    Some(Estimate { value, stderr })
}

fn aggregate(
    n_q: usize,
    eps: f64,
    rho: f64,
    realizations: &[&Realization],
    with_entropy: bool,
) -> Result<PointResult> {
    let groups: Vec<Vec<f64>> = realizations
        .iter()
        .map(|r| spectral::spacings(&r.levels))
        .collect::<Result<_>>()?;
    let entropy = if with_entropy {
        let s: Vec<f64> = realizations.iter().filter_map(|r| r.entropy).collect();
        if s.len() != realizations.len() {
            return Err(Error::Contract(
                "stored realization lacks an entropy value".into(),
            ));
        }
        let n = s.len() as f64;
        let mean = s.iter().sum::<f64>() / n;
        let stderr = (s.len() > 1)
            .then(|| (s.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt());
        Some(Estimate {
            value: mean,
            stderr,
        })
    } else {
        None
    };
    let mut hasher = Sha256::new();
    for r in realizations {
        for l in &r.levels {
            hasher.update(l.to_le_bytes());
        }
    }
    Ok(PointResult {
        n_q,
        eps,
        rho,
        realizations: realizations.len(),
        eta: spacing_estimate(&groups, spectral::eta_with_floor),
        eta_tilde: spacing_estimate(&groups, spectral::eta_tilde_with_floor),
        entropy,
        spectra_checksum: seeds::hex(&hasher.finalize()),
        levels: realizations.iter().map(|r| r.levels.clone()).collect(),
    })
}

/// Runs `body` on a pool with the configured worker count. Dense kernels run
/// single-threaded inside each task so that results do not depend on it.
pub(crate) fn with_workers<T: Send>(
    threads: Option<usize>,
    body: impl FnOnce() -> T + Send,
) -> Result<T> {
    faer::set_global_parallelism(faer::Par::Seq);
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(body))
}

/// Statistic versus imperfection strength at every configured qubit count.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<RunRecord> {
    run_sweep_with(cfg, &RunOptions::default())
}

pub fn run_sweep_with(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunRecord> {
    let started = Instant::now();
    let mut sweeper = Sweeper::new(cfg, opts)?;
    let grid = cfg.eps_grid.values()?;
    with_workers(cfg.threads, || -> Result<()> {
        for &n_q in &cfg.qubits {
            for &eps in &grid {
                if sweeper.point(n_q, eps)?.is_none() {
                    return Ok(());
                }
            }
        }
        Ok(())
    })??;
    Ok(sweeper.finish(started))
}
