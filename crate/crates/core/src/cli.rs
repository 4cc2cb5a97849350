//! Command-line front end.
//!
//! Every subcommand reads its inputs from the file formats in
//! [`crate::data_io`], writes CSV or JSON data files, and prints a short
//! human summary to stdout. Validation failures exit with status 2.

use std::ffi::OsString;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;

use crate::calibration::{calibrate, CalibConfig, CalibStop};
use crate::charfn::{switching_cf, CharFn};
use crate::cos::{bs_closed_form, CosConfig, CosPricer, OptionKind};
use crate::data_io;
use crate::error::{Error, Result};
use crate::estimation::{
    descriptive_stats, holding_rates, mde_fit, mle_fit, mom_fit, segment_regimes, DescriptiveStats, FitReport,
    MleConfig, ParamBounds, SegmentationRule,
};
use crate::mc::{path_rng, price_grid_mc, simulate_path, McConfig};
use crate::regime::{Regime, RegimeParams, SubordinatorFamily, SwitchingModel};

/// Exit status for usage and validation errors.
pub const EXIT_FAILURE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "switchcos",
    version,
    about = "Option pricing under two-regime switching time-changed Levy models"
)]
struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true, env = "SWITCHCOS_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Price a contract grid by COS or Monte Carlo.
    Price(PriceArgs),
    /// Simulate log-price paths.
    Simulate(SimulateArgs),
    /// Tabulate the switching characteristic function.
    PlotCf(PlotCfArgs),
    /// Fit per-regime parameters and switching rates to a price history.
    Estimate(EstimateArgs),
    /// Fit both regimes' parameters to option quotes.
    Calibrate(CalibrateArgs),
    /// Compare COS and Monte Carlo with the Black-Scholes formula.
    BsCheck(BsCheckArgs),
    /// Price a maturity-by-strike grid for surface plots.
    PayoffSurface(SurfaceArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PriceMethod {
    Cos,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FitMethod {
    Mom,
    Mde,
    Mle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Family {
    Gamma,
    Ig,
}

impl From<Family> for SubordinatorFamily {
    fn from(f: Family) -> Self {
        match f {
            Family::Gamma => SubordinatorFamily::Gamma,
            Family::Ig => SubordinatorFamily::InverseGaussian,
        }
    }
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Model JSON file.
    #[arg(long)]
    model: PathBuf,
    /// Replace both drifts by their risk-neutral values before use.
    #[arg(long)]
    risk_neutral: bool,
}

impl ModelArgs {
    fn load(&self) -> Result<SwitchingModel> {
        let m = data_io::load_model(&self.model).map_err(|e| with_path(&self.model, e))?;
        if self.risk_neutral {
            m.risk_neutral()
        } else {
            Ok(m)
        }
    }
}

#[derive(Debug, Args)]
struct McArgs {
    /// Monte Carlo paths.
    #[arg(long, default_value_t = 100_000)]
    paths: usize,
    /// Monte Carlo time step; defaults to the maturity, which is exact for European payoffs.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct PriceArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Contract grid CSV with columns maturity,strike,kind.
    #[arg(long)]
    contracts: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = PriceMethod::Cos)]
    method: PriceMethod,
    /// COS expansion terms.
    #[arg(long, default_value_t = 512)]
    n_terms: usize,
    #[command(flatten)]
    mc: McArgs,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    horizon: f64,
    #[arg(long, default_value_t = crate::regime::TRADING_DAY)]
    dt: f64,
    #[arg(long, default_value_t = 1)]
    paths: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct PlotCfArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    out: PathBuf,
    /// Horizon of the log-return.
    #[arg(long, default_value_t = 1.0)]
    maturity: f64,
    /// Grid `start:end:count` for u.
    #[arg(long, default_value = "-20:20:401")]
    u: String,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    /// Price history CSV with columns date,price.
    #[arg(long)]
    prices: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    method: FitMethod,
    #[arg(long, value_enum)]
    family: Family,
    /// `threshold:<c>` (regime 2 iff |z| > c) or `windows:<csv>` (listed windows are regime 1).
    #[arg(long)]
    regime_rule: String,
    /// Replacement for nonpositive prices.
    #[arg(long)]
    clip_floor: Option<f64>,
    /// Simulated increments per likelihood evaluation (mle only).
    #[arg(long, default_value_t = 20_000)]
    n_sim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    /// Quote CSV with columns maturity,strike,kind,mid.
    #[arg(long)]
    quotes: PathBuf,
    /// Model JSON giving the family, switching rates and starting parameters.
    #[arg(long)]
    model: PathBuf,
    /// Optional JSON `{"s0": .., "r": ..}` overriding the model's market data.
    #[arg(long)]
    market: Option<PathBuf>,
    /// Optional calibration settings JSON; omitted fields keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Report JSON, including the fitted model.
    #[arg(long)]
    out: PathBuf,
    /// Also write the fitted model alone as a model file.
    #[arg(long)]
    model_out: Option<PathBuf>,
    /// Seed for the Monte Carlo fallback; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct BsCheckArgs {
    #[arg(long, default_value_t = 100_000)]
    paths: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Optional CSV copy of the table.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SurfaceArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    out: PathBuf,
    /// Maturity grid `start:end:count`.
    #[arg(long, default_value = "0.1:2:20")]
    maturities: String,
    /// Strike grid `start:end:count`; defaults to 0.5..1.5 times spot.
    #[arg(long)]
    strikes: Option<String>,
    #[arg(long, value_enum, default_value_t = KindArg::Call)]
    kind: KindArg,
    #[arg(long, default_value_t = 512)]
    n_terms: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KindArg {
    Call,
    Put,
}

impl From<KindArg> for OptionKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Call => OptionKind::Call,
            KindArg::Put => OptionKind::Put,
        }
    }
}

fn with_path(path: &Path, e: Error) -> Error {
    Error::Invalid(format!("{}: {e}", path.display()))
}

/// Parses `start:end:count` into an inclusive, evenly spaced grid.
fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::Invalid(format!("grid `{spec}` is not start:end:count"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [a, b, n] = parts[..] else { return Err(bad()) };
    let (a, b): (f64, f64) = (
        a.trim().parse().map_err(|_| bad())?,
        b.trim().parse().map_err(|_| bad())?,
    );
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    if !(a.is_finite() && b.is_finite()) || n == 0 || (n == 1 && a != b) || (n > 1 && a >= b) {
        return Err(bad());
    }
    if n == 1 {
        return Ok(vec![a]);
    }
    let m = (n - 1) as f64;
    Ok((0..n).map(|i| (a * (m - i as f64) + b * i as f64) / m).collect())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    Ok(csv::Writer::from_writer(
        File::create(path).map_err(|e| with_path(path, e.into()))?,
    ))
}

fn run_price(a: &PriceArgs) -> Result<()> {
    let model = a.model.load()?;
    let contracts = data_io::load_contracts(&a.contracts).map_err(|e| with_path(&a.contracts, e))?;
    let mut w = csv_writer(&a.out)?;
    // group by maturity so each maturity shares one pricer or one path set
    let mut maturities: Vec<f64> = contracts.iter().map(|c| c.maturity).collect();
    maturities.sort_by(f64::total_cmp);
    maturities.dedup();
    let mut rows = vec![Vec::new(); contracts.len()];
    for t in maturities {
        let idx: Vec<usize> = (0..contracts.len()).filter(|&i| contracts[i].maturity == t).collect();
        match a.method {
            PriceMethod::Cos => {
                let pricer = CosPricer::new(&model, t, &CosConfig::with_terms(a.n_terms))?;
                for i in idx {
                    let c = &contracts[i];
                    let p = pricer.price(c.strike, c.kind)?;
                    rows[i] = vec![p.to_string()];
                }
            }
            PriceMethod::Mc => {
                let cfg = McConfig {
                    n_paths: a.mc.paths,
                    dt: a.mc.dt.unwrap_or(t),
                    seed: a.mc.seed,
                };
                if cfg.n_paths < 100 {
                    return Err(Error::Invalid(format!(
                        "--paths must be at least 100, got {}",
                        cfg.n_paths
                    )));
                }
                let strikes: Vec<(f64, OptionKind)> =
                    idx.iter().map(|&i| (contracts[i].strike, contracts[i].kind)).collect();
                for (&i, r) in idx.iter().zip(price_grid_mc(&model, t, &strikes, &cfg)?) {
                    rows[i] = vec![
                        r.price.to_string(),
                        r.std_error.to_string(),
                        r.ci95.0.to_string(),
                        r.ci95.1.to_string(),
                    ];
                }
            }
        }
    }
    let method = match a.method {
        PriceMethod::Cos => "cos",
        PriceMethod::Mc => "mc",
    };
    let mut header = vec!["maturity", "strike", "kind", "price", "method"];
    if a.method == PriceMethod::Mc {
        header.extend(["std_error", "ci_low", "ci_high"]);
    }
    w.write_record(&header)?;
    for (c, vals) in contracts.iter().zip(&rows) {
        let mut rec = vec![
            c.maturity.to_string(),
            c.strike.to_string(),
            c.kind.name().to_string(),
            vals[0].clone(),
        ];
        rec.push(method.into());
        rec.extend(vals[1..].iter().cloned());
        w.write_record(&rec)?;
    }
    w.flush()?;
    println!(
        "priced {} contracts by {method}; wrote {}",
        contracts.len(),
        a.out.display()
    );
    Ok(())
}

fn run_simulate(a: &SimulateArgs) -> Result<()> {
    let model = a.model.load()?;
    if a.paths == 0 {
        return Err(Error::Invalid("--paths must be positive".into()));
    }
    let mut w = csv_writer(&a.out)?;
    w.write_record(["path", "time", "log_price", "price", "regime"])?;
    for i in 0..a.paths {
        let p = simulate_path(&model, a.horizon, a.dt, &mut path_rng(a.seed, i as u64))?;
        for k in 0..p.times.len() {
            // the regime in force over the step ending at this time; regime 1 at t = 0
            let regime = if k == 0 { Regime::One } else { p.regimes[k - 1] };
            w.write_record([
                i.to_string(),
                p.times[k].to_string(),
                p.log_prices[k].to_string(),
                (model.s0 * p.log_prices[k].exp()).to_string(),
                regime.label().to_string(),
            ])?;
        }
    }
    w.flush()?;
    println!(
        "simulated {} path(s) to T = {}; wrote {}",
        a.paths,
        a.horizon,
        a.out.display()
    );
    Ok(())
}

fn run_plot_cf(a: &PlotCfArgs) -> Result<()> {
    let model = a.model.load()?;
    let grid = parse_grid(&a.u)?;
    let cf = CharFn::log_return(&model, a.maturity)?;
    let mut w = csv_writer(&a.out)?;
    w.write_record(["u", "re", "im"])?;
    for u in &grid {
        let v = switching_cf(&cf, Complex64::new(*u, 0.0))?;
        w.write_record([u.to_string(), v.re.to_string(), v.im.to_string()])?;
    }
    w.flush()?;
    println!(
        "tabulated the characteristic function at {} points; wrote {}",
        grid.len(),
        a.out.display()
    );
    Ok(())
}

fn parse_rule(spec: &str) -> Result<SegmentationRule> {
    if let Some(c) = spec.strip_prefix("threshold:") {
        let c: f64 = c
            .trim()
            .parse()
            .map_err(|_| Error::Invalid(format!("threshold `{c}` is not a number")))?;
        return Ok(SegmentationRule::AbsThreshold(c));
    }
    if let Some(path) = spec.strip_prefix("windows:") {
        let w = data_io::load_windows(path).map_err(|e| with_path(Path::new(path), e))?;
        return Ok(SegmentationRule::DateWindows(w));
    }
    Err(Error::Invalid(format!(
        "regime rule `{spec}` is neither threshold:<c> nor windows:<file>"
    )))
}

/// Starting point with the clock running at calendar speed on average.
fn moment_guess(stats: &DescriptiveStats, dt: f64, bounds: &ParamBounds) -> RegimeParams {
    let p = RegimeParams::from_array([stats.mean / dt, stats.std_dev / dt.sqrt(), 1.0, 1.0]);
    bounds.project(&p)
}

#[derive(Debug, Serialize)]
struct RegimeFit {
    regime: u8,
    n_obs: usize,
    stats: DescriptiveStats,
    #[serde(flatten)]
    fit: FitReport,
}

#[derive(Debug, Serialize)]
struct EstimateOutput {
    method: &'static str,
    family: SubordinatorFamily,
    dt: f64,
    n_returns: usize,
    clipped_prices: usize,
    regimes: Vec<RegimeFit>,
    lambda12: f64,
    lambda21: f64,
    mean_sojourn: [f64; 2],
}

fn run_estimate(a: &EstimateArgs) -> Result<()> {
    let data = data_io::load_prices(&a.prices, a.clip_floor).map_err(|e| with_path(&a.prices, e))?;
    let rule = parse_rule(&a.regime_rule)?;
    let labels = segment_regimes(&data.series, &rule)?;
    let rates = holding_rates(&labels, data.series.dt)?;
    let family: SubordinatorFamily = a.family.into();
    let bounds = ParamBounds::default();
    let dt = data.series.dt;
    let mut regimes = Vec::new();
    for regime in [Regime::One, Regime::Two] {
        let z = data.series.subsample(&labels, regime)?;
        let stats = descriptive_stats(&z)?;
        let guess = moment_guess(&stats, dt, &bounds);
        let fit = match a.method {
            FitMethod::Mom => mom_fit(&z, dt, family, &bounds, &guess)?,
            FitMethod::Mde | FitMethod::Mle => {
                let init = mom_fit(&z, dt, family, &bounds, &guess).map_or(guess, |f| f.params);
                if a.method == FitMethod::Mde {
                    mde_fit(&z, dt, family, &bounds, &init)?
                } else {
                    let cfg = MleConfig {
                        n_sim: a.n_sim,
                        seed: a.seed,
                    };
                    mle_fit(&z, dt, family, &bounds, &init, &cfg)?
                }
            }
        };
        println!(
            "regime {}: n = {}, mu = {:.6}, sigma = {:.6}, alpha = {:.6}, beta = {:.6} ({})",
            regime.label(),
            z.len(),
            fit.params.mu,
            fit.params.sigma,
            fit.params.alpha,
            fit.params.beta,
            fit.stop_reason
        );
        regimes.push(RegimeFit {
            regime: regime.label(),
            n_obs: z.len(),
            stats,
            fit,
        });
    }
    println!(
        "lambda12 = {:.6}, lambda21 = {:.6} per year",
        rates.lambda12(),
        rates.lambda21()
    );
    let out = EstimateOutput {
        method: match a.method {
            FitMethod::Mom => "mom",
            FitMethod::Mde => "mde",
            FitMethod::Mle => "mle",
        },
        family,
        dt,
        n_returns: data.series.len(),
        clipped_prices: data.clipped,
        regimes,
        lambda12: rates.lambda12(),
        lambda21: rates.lambda21(),
        mean_sojourn: rates.sojourn,
    };
    data_io::write_json(&a.out, &out)
}

#[derive(Debug, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct Market {
    s0: f64,
    r: f64,
}

#[derive(Debug, Serialize)]
struct CalibrateOutput {
    model: SwitchingModel,
    objective: f64,
    initial_objective: f64,
    mean_quote: f64,
    iterations: usize,
    last_step: f64,
    stop: CalibStop,
    n_quotes: usize,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| with_path(path, e.into()))?;
    serde_json::from_str(&text).map_err(|e| with_path(path, e.into()))
}

fn run_calibrate(a: &CalibrateArgs) -> Result<()> {
    let quotes = data_io::load_quotes(&a.quotes).map_err(|e| with_path(&a.quotes, e))?;
    let mut init = data_io::load_model(&a.model).map_err(|e| with_path(&a.model, e))?;
    if let Some(path) = &a.market {
        let m: Market = read_json(path)?;
        init.s0 = m.s0;
        init.r = m.r;
        init.validate()?;
    }
    let mut cfg: CalibConfig = match &a.config {
        Some(path) => read_json(path)?,
        None => CalibConfig::default(),
    };
    if let Some(seed) = a.seed {
        cfg.mc_seed = seed;
    }
    let rep = calibrate(&quotes, &init, &ParamBounds::default(), &cfg)?;
    println!(
        "calibrated {} quotes: J = {:.6e} (from {:.6e}) after {} iterations ({:?})",
        quotes.len(),
        rep.objective,
        rep.initial_objective,
        rep.iterations,
        rep.stop
    );
    if let Some(path) = &a.model_out {
        data_io::save_model(path, &rep.model)?;
    }
    let out = CalibrateOutput {
        model: rep.model,
        objective: rep.objective,
        initial_objective: rep.initial_objective,
        mean_quote: quotes.mean_quote(),
        iterations: rep.iterations,
        last_step: rep.last_step,
        stop: rep.stop,
        n_quotes: quotes.len(),
    };
    data_io::write_json(&a.out, &out)
}

/// `(maturity, strike, r, sigma)` rows with spot 20.
pub const BS_CHECK_ROWS: [(f64, f64, f64, f64); 3] =
    [(1.0, 1.0, 0.04, 0.5), (3.0, 1.0, 0.1, 1.0), (2.0, 30.0, 0.5, 0.001)];
const BS_CHECK_SPOT: f64 = 20.0;

fn run_bs_check(a: &BsCheckArgs, out: &mut dyn Write) -> Result<()> {
    let header = [
        "maturity",
        "strike",
        "r",
        "sigma",
        "bs",
        "cos",
        "mc",
        "mc_std_error",
        "ci_low",
        "ci_high",
    ];
    let mut table = Vec::new();
    for (t, k, r, sigma) in BS_CHECK_ROWS {
        let p = RegimeParams::new(r - 0.5 * sigma * sigma, sigma, 1.0, 1.0)?;
        let model = SwitchingModel::single_regime(p, SubordinatorFamily::Identity, BS_CHECK_SPOT, r)?;
        let bs = bs_closed_form(BS_CHECK_SPOT, k, r, sigma, t, OptionKind::Call);
        let cos = CosPricer::new(&model, t, &CosConfig::default())?.call(k)?;
        let cfg = McConfig {
            n_paths: a.paths,
            dt: t,
            seed: a.seed,
        };
        if cfg.n_paths < 100 {
            return Err(Error::Invalid(format!(
                "--paths must be at least 100, got {}",
                cfg.n_paths
            )));
        }
        let mc = price_grid_mc(&model, t, &[(k, OptionKind::Call)], &cfg)?[0];
        table.push([t, k, r, sigma, bs, cos, mc.price, mc.std_error, mc.ci95.0, mc.ci95.1]);
    }
    writeln!(
        out,
        "{:>8} {:>8} {:>6} {:>6} {:>12} {:>12} {:>12} {:>10}",
        "T", "K", "r", "sigma", "BS", "COS", "MC", "MC s.e."
    )?;
    for row in &table {
        writeln!(
            out,
            "{:>8} {:>8} {:>6} {:>6} {:>12.6} {:>12.6} {:>12.6} {:>10.2e}",
            row[0], row[1], row[2], row[3], row[4], row[5], row[6], row[7]
        )?;
    }
    if let Some(path) = &a.out {
        let mut w = csv_writer(path)?;
        w.write_record(header)?;
        for row in &table {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
    }
    Ok(())
}

fn run_surface(a: &SurfaceArgs) -> Result<()> {
    let model = a.model.load()?;
    let maturities = parse_grid(&a.maturities)?;
    let strikes = match &a.strikes {
        Some(s) => parse_grid(s)?,
        None => parse_grid(&format!("{}:{}:21", 0.5 * model.s0, 1.5 * model.s0))?,
    };
    if maturities[0] <= 0.0 || strikes[0] <= 0.0 {
        return Err(Error::Invalid("maturities and strikes must be positive".into()));
    }
    let kind: OptionKind = a.kind.into();
    let mut w = csv_writer(&a.out)?;
    w.write_record(["maturity", "strike", "kind", "price"])?;
    for &t in &maturities {
        let pricer = CosPricer::new(&model, t, &CosConfig::with_terms(a.n_terms))?;
        for &k in &strikes {
            w.write_record([
                t.to_string(),
                k.to_string(),
                kind.name().to_string(),
                pricer.price(k, kind)?.to_string(),
            ])?;
        }
    }
    w.flush()?;
    println!(
        "priced a {} x {} surface; wrote {}",
        maturities.len(),
        strikes.len(),
        a.out.display()
    );
    Ok(())
}

/// Parses `args` (including the program name) and runs the subcommand.
/// Returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_FAILURE } else { 0 };
        }
    };
    if let Some(n) = cli.threads {
        // a pool may already exist when run is called repeatedly in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let result = match &cli.command {
        Command::Price(a) => run_price(a),
        Command::Simulate(a) => run_simulate(a),
        Command::PlotCf(a) => run_plot_cf(a),
        Command::Estimate(a) => run_estimate(a),
        Command::Calibrate(a) => run_calibrate(a),
        Command::BsCheck(a) => run_bs_check(a, &mut std::io::stdout()),
        Command::PayoffSurface(a) => run_surface(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FAILURE
        }
    }
}
