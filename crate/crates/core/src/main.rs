use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;

use qsaw::eigenstates::{default_husimi_dims, husimi};
use qsaw::floquet::{build_floquet, diagonalize, distinct_levels};
use qsaw::harness::{
    emit_outputs, run_border_study, run_sweep, Artifact, CouplingRule, EpsGrid, ExperimentConfig,
    RunRecord, Statistic,
};
use qsaw::imperfections::{propagator_for, sample_disorder, ImperfectionParams};
use qsaw::qcore::StateVector;
use qsaw::sawtooth::{
    compile_iteration, default_diffusion_threshold, diffusive_fraction, make_params,
};
use qsaw::spectral::{self, Surmise};
use qsaw::{seeds, Error, Result};

#[derive(Parser)]
#[command(
    name = "qsaw",
    version,
    about = "Quantum sawtooth map under static imperfections"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build and diagonalize one Floquet operator and write its quasi-energies.
    Spectrum(SingleArgs),
    /// Crossover statistic versus imperfection strength.
    Sweep(SweepArgs),
    /// Chaos border versus qubit count, with a scaling fit.
    Border(SweepArgs),
    /// Husimi density of one eigenstate.
    Husimi(HusimiArgs),
    /// Fraction of diffusive classical trajectories.
    Classical(ClassicalArgs),
    /// Crossover measures on synthetic surmise ensembles.
    Calibrate(CalibrateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum CouplingArg {
    Zero,
    Equal,
}

impl From<CouplingArg> for CouplingRule {
    fn from(c: CouplingArg) -> Self {
        match c {
            CouplingArg::Zero => CouplingRule::Zero,
            CouplingArg::Equal => CouplingRule::Equal,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum StatArg {
    Eta,
    EtaTilde,
    Entropy,
}

impl From<StatArg> for Statistic {
    fn from(s: StatArg) -> Self {
        match s {
            StatArg::Eta => Statistic::Eta,
            StatArg::EtaTilde => Statistic::EtaTilde,
            StatArg::Entropy => Statistic::Entropy,
        }
    }
}

#[derive(Args)]
struct MapArgs {
    /// Classical chaos parameter K.
    #[arg(long = "K", allow_negative_numbers = true)]
    chaos: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    theta0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    phi: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct SingleArgs {
    #[command(flatten)]
    map: MapArgs,
    #[arg(long)]
    nq: usize,
    /// Imperfection strength epsilon.
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    #[arg(long, value_enum, default_value = "zero")]
    coupling: CouplingArg,
    /// Disorder realization index.
    #[arg(long, default_value_t = 0)]
    realization: u64,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    map: MapArgs,
    /// JSON experiment configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    nq: Option<usize>,
    /// Inclusive qubit range `lo:hi`.
    #[arg(long)]
    nq_range: Option<String>,
    /// Log grid `min:max:per-decade`.
    #[arg(long)]
    eps_grid: Option<String>,
    /// Explicit comma-separated strengths (may include 0).
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    coupling: Option<CouplingArg>,
    #[arg(long)]
    realizations: Option<usize>,
    #[arg(long, value_enum)]
    stat: Option<StatArg>,
    /// Also compute the eigenstate entropy at every point.
    #[arg(long)]
    track_entropy: bool,
    #[arg(long)]
    threshold: Option<f64>,
    /// Write raw little-endian spectra alongside the CSV files.
    #[arg(long)]
    dump_spectra: bool,
}

#[derive(Args)]
struct HusimiArgs {
    #[command(flatten)]
    single: SingleArgs,
    /// Eigenstate index in ascending quasi-energy order.
    #[arg(long, default_value_t = 0)]
    index: usize,
    /// Grid points per axis; defaults to min(256, 4 sqrt(N)).
    #[arg(long)]
    grid: Option<usize>,
}

#[derive(Args)]
struct ClassicalArgs {
    #[arg(long = "K", allow_negative_numbers = true)]
    chaos: f64,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 10_000)]
    steps: usize,
    /// Momentum excursion marking a trajectory as diffusive.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long, default_value_t = 100_000)]
    draws: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn parse_range(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::Config(format!("qubit range must be lo:hi, got {s:?}"));
    let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
    let lo: usize = lo.trim().parse().map_err(|_| bad())?;
    let hi: usize = hi.trim().parse().map_err(|_| bad())?;
    if hi < lo {
        return Err(bad());
    }
    Ok((lo..=hi).collect())
}

fn experiment_config(a: &SweepArgs) -> Result<ExperimentConfig> {
    let qubits = match (&a.nq_range, a.nq) {
        (Some(r), _) => Some(parse_range(r)?),
        (None, Some(n)) => Some(vec![n]),
        (None, None) => None,
    };
    let mut cfg = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
            let mut cfg: ExperimentConfig = serde_json::from_str(&text)?;
            if let Some(k) = a.map.chaos {
                cfg.chaos = k;
            }
            if let Some(q) = qubits {
                cfg.qubits = q;
            }
            cfg
        }
        None => {
            let chaos = a
                .map
                .chaos
                .ok_or_else(|| Error::Config("--K is required without --config".into()))?;
            let qubits =
                qubits.ok_or_else(|| Error::Config("--nq or --nq-range is required".into()))?;
            ExperimentConfig::new(chaos, qubits)
        }
    };
    if let Some(g) = &a.eps_grid {
        cfg.eps_grid = EpsGrid::parse(g)?;
    }
    if let Some(v) = &a.eps {
        cfg.eps_grid = EpsGrid::Values(v.clone());
    }
    if let Some(c) = a.coupling {
        cfg.coupling = c.into();
    }
    if let Some(t) = a.map.theta0 {
        cfg.theta0 = t;
    }
    if let Some(p) = a.map.phi {
        cfg.phi = p;
    }
    if let Some(r) = a.realizations {
        cfg.realizations = Some(r);
    }
    if let Some(s) = a.map.seed {
        cfg.master_seed = s;
    }
    if let Some(s) = a.stat {
        cfg.statistic = s.into();
    }
    if let Some(t) = a.threshold {
        cfg.threshold = Some(t);
    }
    if a.map.threads.is_some() {
        cfg.threads = a.map.threads;
    }
    cfg.track_entropy |= a.track_entropy;
    cfg.dump_spectra |= a.dump_spectra;
    cfg.output_dir = Some(a.map.out.clone());
    cfg.validate()?;
    Ok(cfg)
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Config(format!("cannot read {}: {e}", path.display()))
}

fn fmt_estimate(e: Option<qsaw::harness::Estimate>) -> String {
    match e {
        Some(e) => match e.stderr {
            Some(se) => format!("{:.4} ± {:.4}", e.value, se),
            None => format!("{:.4}", e.value),
        },
        None => "-".into(),
    }
}

fn print_points(record: &RunRecord) {
    let stat = record.config.statistic;
    println!("n_q\teps\t{}\trealizations", stat.name());
    for p in &record.points {
        println!(
            "{}\t{:e}\t{}\t{}",
            p.n_q,
            p.eps,
            fmt_estimate(p.get(stat)),
            p.realizations
        );
    }
}

fn print_written(paths: &[PathBuf]) {
    for p in paths {
        eprintln!("wrote {}", p.display());
    }
}

fn single_operator(
    a: &SingleArgs,
) -> Result<(qsaw::sawtooth::MapParams, qsaw::floquet::FloquetSpectrum)> {
    let chaos = a
        .map
        .chaos
        .ok_or_else(|| Error::Config("--K is required".into()))?;
    let regime = qsaw::harness::Regime::of(chaos);
    let theta0 = a.map.theta0.unwrap_or(regime.default_shift());
    let phi = a.map.phi.unwrap_or(regime.default_shift());
    let p = make_params(chaos, a.nq, theta0, phi)?;
    let seq = compile_iteration(&p);
    let rho = CouplingRule::from(a.coupling).rho(a.eps);
    let propagator = if a.eps == 0.0 && rho == 0.0 {
        None
    } else {
        let imp = ImperfectionParams::from_scaled(a.eps, rho, 1.0)?;
        let seed = seeds::derive_u64(a.map.seed.unwrap_or(0), &[a.nq as u64, a.eps.to_bits()]);
        let r = sample_disorder(a.nq, &imp, seed, a.realization);
        Some(propagator_for(&r, 0.0, 1.0)?)
    };
    let u = build_floquet(&p, &seq, propagator.as_ref())?;
    Ok((p, diagonalize(&u)?))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Spectrum(a) => {
            let (p, spectrum) = single_operator(&a)?;
            std::fs::create_dir_all(&a.map.out).map_err(|e| io_error(&a.map.out, e))?;
            let mut body = String::from("index,lambda\n");
            for (k, l) in spectrum.quasi_energies.iter().enumerate() {
                body.push_str(&format!("{k},{l}\n"));
            }
            let path = a.map.out.join(format!("spectrum_nq{}.csv", p.n_q));
            std::fs::write(&path, body).map_err(|e| io_error(&path, e))?;
            println!("levels\t{}", spectrum.dim());
            println!(
                "distinct\t{}",
                distinct_levels(&spectrum.quasi_energies, 1e-6).len()
            );
            println!("unitarity_residual\t{:e}", spectrum.unitarity_residual);
            println!("eigen_residual\t{:e}", spectrum.eigen_residual);
            let s = spectral::spacings(&spectrum.quasi_energies)?;
            if let Ok(e) = spectral::eta_with_floor(&s, spectral::MIN_SAMPLES) {
                println!("eta\t{e:.4}");
                println!(
                    "eta_tilde\t{:.4}",
                    spectral::eta_tilde_with_floor(&s, spectral::MIN_SAMPLES)?
                );
            }
            eprintln!("wrote {}", path.display());
        }
        Command::Sweep(a) => {
            let cfg = experiment_config(&a)?;
            let record = run_sweep(&cfg)?;
            print_points(&record);
            let mut what = vec![
                Artifact::EtaCurve,
                Artifact::SpacingHist,
                Artifact::LevelsVsEps,
            ];
            if cfg.dump_spectra {
                what.push(Artifact::RawSpectra);
            }
            print_written(&emit_outputs(&record, &what, &a.map.out)?);
        }
        Command::Border(a) => {
            let cfg = experiment_config(&a)?;
            let record = run_border_study(&cfg)?;
            let border = record
                .border
                .as_ref()
                .ok_or_else(|| Error::NotFound("border study did not complete".into()))?;
            println!("n_q\teps_chi\tstderr\tmodel_value\tentropy_border");
            for r in &border.rows {
                println!(
                    "{}\t{:e}\t{}\t{:e}\t{}",
                    r.n_q,
                    r.eps_chi,
                    r.stderr.map_or("-".into(), |s| format!("{s:e}")),
                    r.model_value,
                    r.entropy_border.map_or("-".into(), |s| format!("{s:e}"))
                );
            }
            println!(
                "fit {:?}: constant {:.4}",
                border.fit.model, border.fit.constant
            );
            println!(
                "free exponent: constant {:.4}, base-2 slope {:.4}",
                border.free_fit.constant, border.free_fit.slope
            );
            print_written(&emit_outputs(
                &record,
                &[Artifact::BorderTable, Artifact::EtaCurve],
                &a.map.out,
            )?);
        }
        Command::Husimi(a) => {
            let (p, spectrum) = single_operator(&a.single)?;
            if a.index >= spectrum.dim() {
                return Err(Error::Config(format!(
                    "eigenstate index {} out of range (N = {})",
                    a.index,
                    spectrum.dim()
                )));
            }
            let state = StateVector::normalized(
                p.n_q,
                spectrum.eigenvectors.col_as_slice(a.index).to_vec(),
            )?;
            let dims = a.grid.unwrap_or_else(|| default_husimi_dims(p.dim));
            let grid = husimi(&state, &p, dims, dims)?;
            let mut cfg = ExperimentConfig::new(p.chaos, vec![p.n_q]);
            cfg.theta0 = p.theta0;
            cfg.phi = p.phi;
            cfg.eps_grid = EpsGrid::Values(vec![a.single.eps]);
            cfg.coupling = a.single.coupling.into();
            let mut record = RunRecord::new(&cfg);
            record.husimi = Some(grid);
            println!(
                "eigenstate {} at quasi-energy {:.6}",
                a.index, spectrum.quasi_energies[a.index]
            );
            print_written(&emit_outputs(
                &record,
                &[Artifact::HusimiGrid],
                &a.single.map.out,
            )?);
        }
        Command::Classical(a) => {
            let threshold = a
                .threshold
                .unwrap_or_else(|| default_diffusion_threshold(a.chaos));
            let f = diffusive_fraction(a.chaos, a.samples, a.steps, threshold, a.seed)?;
            println!("threshold\t{threshold}");
            println!("diffusive_fraction\t{f:.4}");
        }
        Command::Calibrate(a) => {
            let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(a.seed);
            let gue = spectral::sample_surmise(Surmise::Gue, a.draws, &mut rng);
            let goe2 = spectral::sample_superposed_goe(a.draws, &mut rng);
            let floor = spectral::MIN_SAMPLES;
            println!("eta(GUE)\t{:.4}", spectral::eta_with_floor(&gue, floor)?);
            println!("eta(2xGOE)\t{:.4}", spectral::eta_with_floor(&goe2, floor)?);
            println!(
                "eta_tilde(GUE)\t{:.4}",
                spectral::eta_tilde_with_floor(&gue, floor)?
            );
            println!("s0\t{:.6}", spectral::crossing_point());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
