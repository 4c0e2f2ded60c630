//! `extvar` command-line front end.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{Purpose, RunConfig};
use crate::datagen::sample;
use crate::error::{Error, Result};
use crate::io;
use crate::optimizer::fit;
use crate::quantizer::{empirical_variance, mc_variance};
use crate::rng::{derive_seed, label};
use crate::svg::{line_plot, Series};
use crate::theory::{
    consistency_curve, lemma1_check, random_net, ulln_experiment, ConsistencySetup, UllnSetup,
};

const AFTER_HELP: &str = "\
Configuration (TOML, unknown keys rejected):
  seed, d, delta                        top-level scalars
  [lattice] dims = [m1, ..., me]
  [kernel] kind = kronecker | gaussian (sigma) | rectangular (radius)
           | table (values = { \"0\" = 1.0, \"1\" = 0.5, \"-1\" = 0.5 })
  [fit] restarts, max_iter, rel_tol, init = subsample | plusplus
  [quasi] beta = sqrt | linear (c) | constant (c)
  [sampler] kind = uniform | mixture (components = [{weight, mean, sigma}])
  [data] count
  [experiment] n_schedule, seeds, m_ref, reference_restarts, net_size,
               alpha, lemma1_m, lemma1_configs, mc_m

Output tables (CSV):
  samples        x0,...,x{d-1}
  centroids      i0,...,i{e-1},x0,...,x{d-1}   (lexicographic lattice order)
  restarts       restart,final_vn,iterations,separation,repairs
  lemma1         config_id,cell,alpha,delta,estimate,stderr,bound,pass
  ulln           n,seed,sup_discrepancy
  consistency    n,seed,vn_best,v_of_fit,v_ref,gap

Exit codes: 0 success, 1 runtime failure, 2 invalid input.";

#[derive(Debug, Parser)]
#[command(name = "extvar", version, about = "Extended-variance quantization toolkit", after_help = AFTER_HELP)]
pub struct Cli {
    /// Worker threads (outputs do not depend on this).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Run configuration file.
    #[arg(long)]
    pub config: PathBuf,

    /// Override the configuration seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a sample set from the configured sampler.
    GenData {
        #[command(flatten)]
        common: Common,
        /// Output CSV file.
        #[arg(long)]
        out: PathBuf,
        /// Override `data.count`.
        #[arg(long)]
        count: Option<usize>,
    },
    /// Minimize the empirical extended variance of a data set.
    Fit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        svg: bool,
    },
    /// Print the empirical extended variance of given centroids.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        centroids: PathBuf,
    },
    /// Monte Carlo estimate of the theoretical extended variance.
    McEval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        centroids: PathBuf,
        /// Override `experiment.mc_m`.
        #[arg(long)]
        draws: Option<usize>,
        /// Optional CSV output (estimate,stderr,draws).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one of the verification experiments.
    #[command(subcommand)]
    Experiment(Experiment),
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub common: Common,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Subcommand)]
pub enum Experiment {
    /// Displacement-bound check on random separated configurations.
    Lemma1(ExperimentArgs),
    /// Uniform law of large numbers over a random net.
    Ulln(ExperimentArgs),
    /// Consistency of fitted quasi-minimizers.
    Consistency(ExperimentArgs),
}

fn load(common: &Common, purpose: Purpose) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.validate(purpose)?;
    println!("seed = {}", cfg.seed);
    println!("config_digest = {}", cfg.digest());
    Ok(cfg)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    io::write_atomic(path, text.as_bytes())?;
    println!("wrote {}", path.display());
    Ok(())
}

fn median_curve(rows: impl Iterator<Item = (usize, f64)>) -> Vec<(f64, f64)> {
    let mut by_n: std::collections::BTreeMap<usize, Vec<f64>> = Default::default();
    for (n, v) in rows {
        by_n.entry(n).or_default().push(v);
    }
    by_n.into_iter()
        .filter_map(|(n, v)| crate::theory::median(v).map(|m| (n as f64, m)))
        .collect()
}

fn gen_data(common: &Common, out: &Path, count: Option<usize>) -> Result<()> {
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(c) = count {
        cfg.data.count = c;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    cfg.validate(Purpose::Data)?;
    println!("seed = {}", cfg.seed);
    println!("config_digest = {}", cfg.digest());
    let sampler = cfg.sampler()?;
    let samples = sample(&sampler, cfg.data.count, derive_seed(cfg.seed, &[label::DATA]))?;
    write_text(out, &io::samples_csv(&samples)?)
}

fn run_fit(common: &Common, data: &Path, out: &Path, svg: bool) -> Result<()> {
    let cfg = load(common, Purpose::Fit)?;
    let lattice = cfg.lattice()?;
    let lambda = cfg.neighborhood(&lattice)?;
    let samples = io::read_samples(data)?;
    if samples.dim() != cfg.d {
        return Err(Error::param("d", format!("config says d = {} but data has {} columns", cfg.d, samples.dim())));
    }
    let res = fit(&samples, &lattice, &lambda, &cfg.fit_params())?;
    let centroids = io::centroids_csv(&res.best_config, &lattice)?;
    let restarts = io::restarts_csv(&res)?;

    let mut report = String::new();
    let _ = writeln!(report, "# extvar fit report");
    let _ = writeln!(report, "seed = {}", cfg.seed);
    let _ = writeln!(report, "config_digest = {}", cfg.digest());
    let _ = writeln!(report, "n = {}", samples.len());
    let _ = writeln!(report, "d = {}", samples.dim());
    let _ = writeln!(report, "lattice = {:?}", lattice.dims());
    let _ = writeln!(report, "delta = {}", cfg.delta);
    let _ = writeln!(report, "best_vn = {}", res.best_vn);
    let _ = writeln!(report, "best_restart = {}", res.best_restart);
    let _ = writeln!(report, "separation = {}", res.best_config.separation());
    let _ = writeln!(report, "quasi_radius = {}", res.quasi_radius);
    let _ = writeln!(report, "failed_restarts = {}", res.failed_restarts.len());
    for (r, msg) in &res.failed_restarts {
        let _ = writeln!(report, "#   restart {r}: {msg}");
    }
    let _ = writeln!(report, "\n[centroids]\n{centroids}\n[restarts]\n{restarts}");

    write_text(&out.join("centroids.csv"), &centroids)?;
    write_text(&out.join("restarts.csv"), &restarts)?;
    write_text(&out.join("fit_report.txt"), &report)?;
    if svg {
        let series = Series {
            name: "final V_n".into(),
            points: res.per_restart.iter().map(|r| (r.restart as f64, r.final_vn)).collect(),
        };
        write_text(&out.join("restarts.svg"), &line_plot("final V_n per restart", "restart", "V_n", &[series], false, false))?;
    }
    println!("best_vn = {}", res.best_vn);
    Ok(())
}

fn run_eval(common: &Common, data: &Path, centroids: &Path) -> Result<()> {
    let cfg = load(common, Purpose::Eval)?;
    let lattice = cfg.lattice()?;
    let lambda = cfg.neighborhood(&lattice)?;
    let samples = io::read_samples(data)?;
    let x = io::read_centroids(centroids, &lattice)?;
    let vn = empirical_variance(&samples, &x, &lambda)?;
    println!("n = {}", samples.len());
    println!("vn = {vn}");
    Ok(())
}

fn run_mc_eval(common: &Common, centroids: &Path, draws: Option<usize>, out: Option<&Path>) -> Result<()> {
    let cfg = load(common, Purpose::Eval)?;
    let lattice = cfg.lattice()?;
    let lambda = cfg.neighborhood(&lattice)?;
    let x = io::read_centroids(centroids, &lattice)?;
    let m = draws.unwrap_or(cfg.experiment.mc_m);
    let est = mc_variance(&x, &lambda, &cfg.sampler()?, m, derive_seed(cfg.seed, &[label::EVAL]))?;
    println!("estimate = {}", est.estimate);
    println!("stderr = {}", est.stderr);
    if let Some(path) = out {
        write_text(path, &format!("estimate,stderr,draws\n{},{},{m}\n", est.estimate, est.stderr))?;
    }
    Ok(())
}

fn run_lemma1(args: &ExperimentArgs) -> Result<()> {
    let cfg = load(&args.common, Purpose::Lemma1)?;
    let lattice = cfg.lattice()?;
    let exp = &cfg.experiment;
    let alpha = exp.alpha.expect("validated");
    let net = random_net(&lattice, cfg.d, cfg.delta, exp.lemma1_configs, cfg.seed)?;
    let report = lemma1_check(&net, alpha, cfg.delta, exp.lemma1_m, cfg.seed)?;

    let mut summary = String::new();
    let _ = writeln!(summary, "# displacement bound check");
    let _ = writeln!(summary, "seed = {}", cfg.seed);
    let _ = writeln!(summary, "config_digest = {}", cfg.digest());
    let _ = writeln!(summary, "configs = {}", net.len());
    let _ = writeln!(summary, "records = {}", report.records.len());
    let _ = writeln!(summary, "passed = {}", report.records.iter().filter(|r| r.pass).count());
    let _ = writeln!(summary, "vacuous = {}", report.vacuous_count());
    let max_est = report.records.iter().map(|r| r.estimate).fold(0.0, f64::max);
    let _ = writeln!(summary, "max_estimate = {max_est}");
    let _ = writeln!(summary, "bound = {}", report.records.first().map_or(f64::NAN, |r| r.bound));
    let _ = writeln!(summary, "all_pass = {}", report.all_pass());

    write_text(&args.out.join("lemma1.csv"), &io::lemma1_csv(&report)?)?;
    write_text(&args.out.join("lemma1_summary.txt"), &summary)?;
    if args.svg {
        let est = Series {
            name: "estimate".into(),
            points: report.records.iter().enumerate().map(|(k, r)| (k as f64, r.estimate)).collect(),
        };
        let bound = Series {
            name: "bound".into(),
            points: report.records.iter().enumerate().map(|(k, r)| (k as f64, r.bound)).collect(),
        };
        write_text(
            &args.out.join("lemma1.svg"),
            &line_plot("displacement measure vs bound", "record", "measure", &[est, bound], false, false),
        )?;
    }
    print!("{summary}");
    if !report.all_pass() {
        return Err(Error::Fit("displacement bound violated on at least one record".into()));
    }
    Ok(())
}

fn run_ulln(args: &ExperimentArgs) -> Result<()> {
    let cfg = load(&args.common, Purpose::Ulln)?;
    let lattice = cfg.lattice()?;
    let lambda = cfg.neighborhood(&lattice)?;
    let sampler = cfg.sampler()?;
    let exp = &cfg.experiment;
    let seeds = cfg.seed_list();
    let report = ulln_experiment(&UllnSetup {
        sampler: &sampler,
        lattice: &lattice,
        lambda: &lambda,
        delta: cfg.delta,
        net_size: exp.net_size,
        n_schedule: &exp.n_schedule,
        seeds: &seeds,
        m_ref: exp.m_ref,
        seed: cfg.seed,
    })?;

    let mut summary = String::new();
    let _ = writeln!(summary, "# uniform law of large numbers");
    let _ = writeln!(summary, "seed = {}", cfg.seed);
    let _ = writeln!(summary, "config_digest = {}", cfg.digest());
    let _ = writeln!(summary, "net_size = {}", report.net_size);
    let _ = writeln!(summary, "m_ref = {}", report.m_ref);
    for &n in &exp.n_schedule {
        let _ = writeln!(summary, "median_sup_discrepancy[{n}] = {}", report.median_at(n).unwrap_or(f64::NAN));
    }
    let first = report.median_at(exp.n_schedule[0]).unwrap_or(f64::NAN);
    let last = report.median_at(*exp.n_schedule.last().unwrap()).unwrap_or(f64::NAN);
    let _ = writeln!(summary, "ratio_last_first = {}", last / first);

    write_text(&args.out.join("ulln.csv"), &io::ulln_csv(&report)?)?;
    write_text(&args.out.join("ulln_summary.txt"), &summary)?;
    if args.svg {
        let s = Series {
            name: "median sup".into(),
            points: median_curve(report.rows.iter().map(|r| (r.n, r.sup_discrepancy))),
        };
        write_text(&args.out.join("ulln.svg"), &line_plot("sup discrepancy over the net", "n", "sup |V_n - V|", &[s], true, true))?;
    }
    print!("{summary}");
    Ok(())
}

fn run_consistency(args: &ExperimentArgs) -> Result<()> {
    let cfg = load(&args.common, Purpose::Consistency)?;
    let lattice = cfg.lattice()?;
    let lambda = cfg.neighborhood(&lattice)?;
    let sampler = cfg.sampler()?;
    let exp = &cfg.experiment;
    let seeds = cfg.seed_list();
    let report = consistency_curve(&ConsistencySetup {
        sampler: &sampler,
        lattice: &lattice,
        lambda: &lambda,
        delta: cfg.delta,
        n_schedule: &exp.n_schedule,
        seeds: &seeds,
        fit_params: cfg.fit_params(),
        reference_restarts: exp.reference_restarts,
        m_ref: exp.m_ref,
        seed: cfg.seed,
    })?;

    let mut summary = String::new();
    let _ = writeln!(summary, "# consistency of quasi-minimizers");
    let _ = writeln!(summary, "seed = {}", cfg.seed);
    let _ = writeln!(summary, "config_digest = {}", cfg.digest());
    let _ = writeln!(summary, "v_ref = {}", report.v_ref);
    let _ = writeln!(summary, "v_ref_stderr = {}", report.v_ref_stderr);
    let _ = writeln!(summary, "reference_centroids = {:?}", report.reference_config.coords());
    for &n in &exp.n_schedule {
        let _ = writeln!(summary, "median_gap[{n}] = {}", report.median_gap_at(n).unwrap_or(f64::NAN));
    }
    let _ = writeln!(summary, "quasi_minimizers = {}/{}", report.rows.iter().filter(|r| r.quasi).count(), report.rows.len());
    let _ = writeln!(summary, "negative_gap_rows = {}", report.negative_gap_rows().len());

    write_text(&args.out.join("consistency.csv"), &io::consistency_csv(&report)?)?;
    write_text(&args.out.join("consistency_summary.txt"), &summary)?;
    if args.svg {
        let s = Series {
            name: "median gap".into(),
            points: median_curve(report.rows.iter().map(|r| (r.n, r.gap))),
        };
        write_text(&args.out.join("consistency.svg"), &line_plot("V(fit) - V_ref", "n", "gap", &[s], true, true))?;
    }
    print!("{summary}");
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::GenData { common, out, count } => gen_data(common, out, *count),
        Command::Fit { common, data, out, svg } => run_fit(common, data, out, *svg),
        Command::Eval { common, data, centroids } => run_eval(common, data, centroids),
        Command::McEval { common, centroids, draws, out } => run_mc_eval(common, centroids, *draws, out.as_deref()),
        Command::Experiment(Experiment::Lemma1(a)) => run_lemma1(a),
        Command::Experiment(Experiment::Ulln(a)) => run_ulln(a),
        Command::Experiment(Experiment::Consistency(a)) => run_consistency(a),
    }
}

/// Parse `argv` and run; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.threads {
        Some(0) => Err(Error::param("threads", "must be positive")),
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(|| dispatch(&cli)),
            Err(e) => Err(Error::param("threads", e.to_string())),
        },
        None => dispatch(&cli),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                2
            } else {
                1
            }
        }
    }
}
