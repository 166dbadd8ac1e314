use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use skewdiff::classifier::{classify_all, ClassifyOptions, N0_CHOICES};
use skewdiff::config::CONFIG_SCHEMA;
use skewdiff::layered::{
    build_layered, classify_layered, dispersion_stats, simulate_xy, write_dispersion_csv, write_joint_csv, LayerConfig,
    Layered, LAYER_SCHEMA,
};
use skewdiff::scale::{build_scale, ScaleFunction, ScaleOptions};
use skewdiff::series::Budget;
use skewdiff::sim::{
    mc_exit_time, mc_hitting, occupation_histogram, simulate_path, Bins, MCEstimate, McSpec, Record, Scheme, SimPlan,
};
use skewdiff::{validate, LayerError, ScaleError, SimError, SkewConfig, Tri};

const MANIFEST_SCHEMA: &str = "skewdiff-manifest/1";

#[derive(Parser, Serialize)]
#[command(name = "skewdiff", version, about = "Skew Brownian motion with interfaces accumulating at 0")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Serialize)]
enum Cmd {
    /// Run every criterion and write report.json.
    Classify(ClassifyArgs),
    /// Evaluate the scale function and derived quantities.
    Scale(ScaleArgs),
    /// Simulate paths.
    Simulate(SimulateArgs),
    /// Monte Carlo estimators.
    #[command(subcommand)]
    Mc(McCmd),
    /// Layered media model.
    #[command(subcommand)]
    Layered(LayeredCmd),
}

#[derive(Subcommand, Serialize)]
enum McCmd {
    /// P(hit b before a) from x.
    Hit(McIntervalArgs),
    /// Mean exit time of (a, b) from x.
    Exit(McIntervalArgs),
    Occupation(OccupationArgs),
    Localtime(LocaltimeArgs),
    Qv(QvArgs),
}

#[derive(Subcommand, Serialize)]
enum LayeredCmd {
    Classify(LayerInput),
    Simulate(LayeredSimArgs),
    Dispersion(DispersionArgs),
}

#[derive(Args, Serialize)]
struct Output {
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct ClassifyArgs {
    config: PathBuf,
    #[arg(long)]
    k_max: Option<u64>,
    #[arg(long, default_value_t = 1, value_parser = parse_n0)]
    n0: i64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Serialize)]
struct ScaleArgs {
    config: PathBuf,
    /// h and h′ at these points.
    #[arg(long, num_args = 1.., allow_negative_numbers = true)]
    eval: Vec<f64>,
    /// Hitting probabilities, repeatable.
    #[arg(long, num_args = 3, value_names = ["X", "A", "B"], allow_negative_numbers = true, action = clap::ArgAction::Append)]
    hitting: Vec<f64>,
    #[arg(long, num_args = 1.., allow_negative_numbers = true)]
    phi: Vec<f64>,
    /// Mean exit times, repeatable.
    #[arg(long, num_args = 3, value_names = ["X", "A", "B"], allow_negative_numbers = true, action = clap::ArgAction::Append)]
    exit: Vec<f64>,
    #[arg(long)]
    invariant: bool,
    /// Half-width of the tabulated scale function.
    #[arg(long, default_value_t = 1e3)]
    reach: f64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Serialize)]
struct RunArgs {
    #[arg(long, default_value = "exact_skew")]
    scheme: Scheme,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long)]
    paths: u64,
    /// Required; there is no implicit seed.
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    eps_cluster: Option<f64>,
}

#[derive(Args, Serialize)]
struct PathArgs {
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    x0: f64,
    /// Horizon.
    #[arg(long = "t")]
    horizon: f64,
    #[arg(long, default_value_t = 1e3)]
    x_max: f64,
    #[arg(long)]
    allow_explosive: bool,
}

#[derive(Args, Serialize)]
struct SimulateArgs {
    config: PathBuf,
    #[command(flatten)]
    run: RunArgs,
    #[command(flatten)]
    path: PathArgs,
    #[arg(long, default_value = "full_path")]
    record: Record,
    #[arg(long, default_value_t = 1)]
    stride: usize,
    /// Local-time functional `a,eps`, repeatable.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    local_time: Vec<(f64, f64)>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Serialize)]
struct McIntervalArgs {
    config: PathBuf,
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, allow_hyphen_values = true)]
    x: f64,
    #[arg(long, allow_hyphen_values = true)]
    a: f64,
    #[arg(long, allow_hyphen_values = true)]
    b: f64,
    /// Paths still inside (a, b) at this time are excluded.
    #[arg(long, default_value_t = 1e4)]
    t_cap: f64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Serialize)]
struct OccupationArgs {
    config: PathBuf,
    #[command(flatten)]
    run: RunArgs,
    #[command(flatten)]
    path: PathArgs,
    #[arg(long, allow_hyphen_values = true)]
    lo: f64,
    #[arg(long, allow_hyphen_values = true)]
    hi: f64,
    #[arg(long, default_value_t = 50)]
    bins: usize,
    #[arg(long, default_value_t = 0.0)]
    burn_in: f64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Serialize)]
struct LocaltimeArgs {
    config: PathBuf,
    #[command(flatten)]
    run: RunArgs,
    #[command(flatten)]
    path: PathArgs,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    level: f64,
    #[arg(long, default_value_t = 0.02)]
    eps: f64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Serialize)]
struct QvArgs {
    config: PathBuf,
    #[command(flatten)]
    run: RunArgs,
    #[command(flatten)]
    path: PathArgs,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Serialize)]
struct LayerInput {
    layers: PathBuf,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Serialize)]
struct LayeredSimArgs {
    layers: PathBuf,
    #[command(flatten)]
    run: RunArgs,
    #[command(flatten)]
    path: PathArgs,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    y0: f64,
    #[arg(long, default_value_t = 1)]
    stride: usize,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Serialize)]
struct DispersionArgs {
    #[command(flatten)]
    sim: LayeredSimArgs,
    /// Report times; default is 11 points on [0, t].
    #[arg(long, value_delimiter = ',')]
    grid: Vec<f64>,
}

fn parse_n0(s: &str) -> Result<i64, String> {
    let n: i64 = s.parse().map_err(|e| format!("{e}"))?;
    if N0_CHOICES.contains(&n) {
        Ok(n)
    } else {
        Err(format!("n0 must be one of {N0_CHOICES:?}"))
    }
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected `a,eps`")?;
    let a = a.trim().parse::<f64>().map_err(|e| e.to_string())?;
    let b = b.trim().parse::<f64>().map_err(|e| e.to_string())?;
    Ok((a, b))
}

/// Exit codes: 1 validation or plan, 2 inconclusive, 3 no scale function, 4 explosive.
struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn invalid(msg: impl Into<String>) -> Self {
        Self { code: 1, msg: msg.into() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::invalid(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Self::invalid(e.to_string())
    }
}

impl From<ScaleError> for Failure {
    fn from(e: ScaleError) -> Self {
        let code = match e {
            ScaleError::NoScaleFunction(_) => 3,
            ScaleError::Inconclusive(_) => 2,
            _ => 1,
        };
        Self { code, msg: e.to_string() }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Explosive(_) => Self { code: 4, msg: e.to_string() },
            SimError::Scale(s) => s.into(),
            _ => Self::invalid(e.to_string()),
        }
    }
}

impl From<LayerError> for Failure {
    fn from(e: LayerError) -> Self {
        match e {
            LayerError::Sim(s) => s.into(),
            LayerError::Scale(s) => s.into(),
            _ => Self::invalid(e.to_string()),
        }
    }
}

type Res<T = ()> = Result<T, Failure>;

fn load_config(path: &Path) -> Res<SkewConfig<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?;
    let c = SkewConfig::<f64>::from_json(&text).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?;
    let rep = validate(&c);
    if !rep.is_valid() {
        let lines: Vec<String> = rep
            .issues
            .iter()
            .map(|i| match i.index {
                Some(k) => format!("{}: {} (k={k}): {}", path.display(), i.code, i.message),
                None => format!("{}: {}: {}", path.display(), i.code, i.message),
            })
            .collect();
        return Err(Failure::invalid(lines.join("\n")));
    }
    Ok(c)
}

fn load_layers(path: &Path) -> Res<LayerConfig> {
    let text = fs::read_to_string(path).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?;
    LayerConfig::from_json(&text).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))
}

fn scale_for(c: &SkewConfig<f64>, reach: f64) -> Res<ScaleFunction> {
    Ok(build_scale(c, &ScaleOptions { reach, ..ScaleOptions::default() })?)
}

struct Out {
    dir: PathBuf,
    files: Vec<String>,
}

impl Out {
    fn new(o: &Output) -> Res<Self> {
        fs::create_dir_all(&o.out)?;
        Ok(Self { dir: o.out.clone(), files: Vec::new() })
    }

    fn create(&mut self, name: &str) -> Res<BufWriter<fs::File>> {
        self.files.push(name.to_string());
        Ok(BufWriter::new(fs::File::create(self.dir.join(name))?))
    }

    fn text(&mut self, name: &str, body: &str) -> Res {
        self.files.push(name.to_string());
        fs::write(self.dir.join(name), format!("{body}\n"))?;
        Ok(())
    }

    fn manifest(mut self, cli: &Cli, command: &str, inputs: &[&Path], seed: Option<u64>, threads: Option<usize>) -> Res {
        self.files.push("manifest.json".into());
        let m = json!({
            "schema": MANIFEST_SCHEMA,
            "command": command,
            "argv": std::env::args().collect::<Vec<_>>(),
            "inputs": inputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
            "parameters": cli,
            "seed": seed,
            "threads": threads,
            "out": self.dir.display().to_string(),
            "outputs": self.files,
            "version": env!("CARGO_PKG_VERSION"),
            "schemas": { "config": CONFIG_SCHEMA, "layers": LAYER_SCHEMA, "manifest": MANIFEST_SCHEMA },
        });
        fs::write(self.dir.join("manifest.json"), serde_json::to_string_pretty(&m).expect("json") + "\n")?;
        Ok(())
    }
}

fn plan_of(run: &RunArgs, path: &PathArgs) -> SimPlan {
    let mut p = SimPlan::new(run.scheme, path.x0, path.horizon, run.dt, run.paths, run.seed);
    p.threads = run.threads;
    p.eps_cluster = run.eps_cluster;
    p.x_max = path.x_max;
    p.allow_explosive = path.allow_explosive;
    p
}

fn write_estimates(out: &mut Out, rows: &[(&str, MCEstimate)]) -> Res {
    let mut w = csv::Writer::from_writer(out.create("estimate.csv")?);
    w.write_record(["quantity", "estimate", "std_error", "n_effective", "excluded", "target"])?;
    for (q, e) in rows {
        let target = e.target.map_or(String::new(), |t| format!("{t:e}"));
        w.write_record([
            q.to_string(),
            format!("{:e}", e.estimate),
            format!("{:e}", e.std_error),
            e.n_effective.to_string(),
            e.excluded.to_string(),
            target,
        ])?;
        let t = e.target.map_or(String::new(), |t| format!(" (analytic {t:.6})"));
        println!("{q}: {:.6} ± {:.6}, n = {}{t}", e.estimate, e.std_error, e.n_effective);
    }
    w.flush()?;
    Ok(())
}

fn classify(cli: &Cli, a: &ClassifyArgs) -> Res {
    let c = load_config(&a.config)?;
    let mut budget = Budget::default();
    if let Some(k) = a.k_max {
        budget.k_max = k;
    }
    let rep = classify_all(&c, &ClassifyOptions { n0: a.n0, budget });
    let mut out = Out::new(&a.output)?;
    out.text("report.json", &rep.to_json())?;
    for (name, v) in rep.verdicts() {
        println!("{name:<20} {:?}", v.holds);
    }
    out.manifest(cli, "classify", &[&a.config], None, None)?;
    if rep.all_conclusive() {
        Ok(())
    } else {
        Err(Failure { code: 2, msg: "some verdicts are inconclusive".into() })
    }
}

fn scale(cli: &Cli, a: &ScaleArgs) -> Res {
    let c = load_config(&a.config)?;
    let sf = scale_for(&c, a.reach)?;
    let mut out = Out::new(&a.output)?;
    if !a.eval.is_empty() {
        sf.write_scale_csv(out.create("eval.csv")?, &a.eval)?;
    }
    if !a.phi.is_empty() {
        sf.write_phi_csv(out.create("phi.csv")?, &a.phi)?;
    }
    if !a.hitting.is_empty() {
        let mut w = csv::Writer::from_writer(out.create("hitting.csv")?);
        w.write_record(["x", "a", "b", "p_lower_first", "p_upper_first"])?;
        for q in a.hitting.chunks(3) {
            let p = sf.hitting_prob(q[0], q[1], q[2]).map_err(|e| Failure::invalid(e.to_string()))?;
            let pu = sf.hitting_prob_complement(q[0], q[1], q[2]).map_err(|e| Failure::invalid(e.to_string()))?;
            w.write_record([q[0], q[1], q[2], p, pu].map(|v| format!("{v:e}")))?;
        }
        w.flush()?;
    }
    if !a.exit.is_empty() {
        let mut w = csv::Writer::from_writer(out.create("exit.csv")?);
        w.write_record(["x", "a", "b", "mean_exit_time"])?;
        for q in a.exit.chunks(3) {
            let t = sf.mean_exit_time(q[0], q[1], q[2]).map_err(|e| Failure::invalid(e.to_string()))?;
            w.write_record([q[0], q[1], q[2], t].map(|v| format!("{v:e}")))?;
        }
        w.flush()?;
    }
    if a.invariant {
        match sf.invariant() {
            Some(inv) => inv.write_csv(out.create("invariant.csv")?)?,
            None => eprintln!("invariant: total mass of ρ is infinite, no invariant probability"),
        }
    }
    out.manifest(cli, "scale", &[&a.config], None, None)
}

fn simulate(cli: &Cli, a: &SimulateArgs) -> Res {
    let c = load_config(&a.config)?;
    let sf = scale_for(&c, a.path.x_max)?;
    let mut plan = plan_of(&a.run, &a.path);
    plan.record = a.record;
    plan.stride = a.stride;
    plan.local_time = a.local_time.clone();
    let ens = simulate_path(&c, &sf, &plan)?;
    let mut out = Out::new(&a.output)?;
    match a.record {
        Record::Functionals => ens.write_functionals_csv(out.create("functionals.csv")?)?,
        _ => ens.write_paths_csv(out.create("paths.csv")?)?,
    }
    out.text("run_log.json", &serde_json::to_string_pretty(&ens.log).expect("json"))?;
    println!("{} paths, censored fraction {:.6}", ens.paths.len(), ens.censored_fraction());
    out.manifest(cli, "simulate", &[&a.config], Some(a.run.seed), a.run.threads)
}

fn mc_spec(run: &RunArgs, t_cap: f64) -> McSpec {
    let mut s = McSpec::new(run.scheme, run.paths, run.seed, run.dt);
    s.threads = run.threads;
    s.eps_cluster = run.eps_cluster;
    s.t_cap = t_cap;
    s
}

fn mc_interval(cli: &Cli, a: &McIntervalArgs, hit: bool) -> Res {
    let c = load_config(&a.config)?;
    let sf = scale_for(&c, ScaleOptions::default().reach.max(2.0 * a.a.abs().max(a.b.abs())))?;
    let spec = mc_spec(&a.run, a.t_cap);
    let (name, e) = if hit {
        ("p_upper_first", mc_hitting(&sf, &spec, a.x, a.a, a.b)?)
    } else {
        ("mean_exit_time", mc_exit_time(&sf, &spec, a.x, a.a, a.b)?)
    };
    let mut out = Out::new(&a.output)?;
    write_estimates(&mut out, &[(name, e)])?;
    let cmd = if hit { "mc hit" } else { "mc exit" };
    out.manifest(cli, cmd, &[&a.config], Some(a.run.seed), a.run.threads)
}

fn mc_occupation(cli: &Cli, a: &OccupationArgs) -> Res {
    let c = load_config(&a.config)?;
    let sf = scale_for(&c, a.path.x_max)?;
    let mut plan = plan_of(&a.run, &a.path);
    plan.burn_in = a.burn_in;
    let bins = Bins { lo: a.lo, hi: a.hi, n: a.bins };
    if !(a.lo < a.hi) || a.bins == 0 {
        return Err(Failure::invalid("need lo < hi and at least one bin"));
    }
    let occ = occupation_histogram(&c, &sf, &plan, bins)?;
    let mut out = Out::new(&a.output)?;
    occ.write_csv(out.create("occupation.csv")?)?;
    out.text("occupation.json", &serde_json::to_string_pretty(&occ).expect("json"))?;
    match occ.tv {
        Some(tv) => println!("total variation to the invariant law: {tv:.6}"),
        None => println!("no invariant probability; histogram only"),
    }
    out.manifest(cli, "mc occupation", &[&a.config], Some(a.run.seed), a.run.threads)
}

/// Functionals of paths that were not censored.
fn functional_run(c: &SkewConfig<f64>, plan: &SimPlan, f: impl Fn(&skewdiff::sim::PathRecord) -> f64) -> Res<(MCEstimate, skewdiff::PathEnsemble)> {
    let sf = scale_for(c, plan.x_max)?;
    let ens = simulate_path(c, &sf, plan)?;
    let v: Vec<f64> = ens.paths.iter().filter(|p| !p.censored).map(&f).collect();
    let mut e = MCEstimate::from_samples(&v);
    e.excluded = ens.paths.len() as u64 - e.n_effective;
    Ok((e, ens))
}

fn mc_localtime(cli: &Cli, a: &LocaltimeArgs) -> Res {
    let c = load_config(&a.config)?;
    let mut plan = plan_of(&a.run, &a.path);
    plan.record = Record::Functionals;
    plan.local_time = vec![(a.level, a.eps)];
    let (e, ens) = functional_run(&c, &plan, |p| p.local_times[0])?;
    let mut out = Out::new(&a.output)?;
    write_estimates(&mut out, &[("local_time", e)])?;
    ens.write_functionals_csv(out.create("functionals.csv")?)?;
    out.manifest(cli, "mc localtime", &[&a.config], Some(a.run.seed), a.run.threads)
}

fn mc_qv(cli: &Cli, a: &QvArgs) -> Res {
    let c = load_config(&a.config)?;
    let mut plan = plan_of(&a.run, &a.path);
    plan.record = Record::Functionals;
    let (mut e, ens) = functional_run(&c, &plan, |p| p.qv)?;
    e.target = Some(a.path.horizon);
    let mut out = Out::new(&a.output)?;
    write_estimates(&mut out, &[("quadratic_variation", e)])?;
    ens.write_functionals_csv(out.create("functionals.csv")?)?;
    out.manifest(cli, "mc qv", &[&a.config], Some(a.run.seed), a.run.threads)
}

fn layered_model(path: &Path, reach: f64) -> Res<Layered> {
    let layer = load_layers(path)?;
    Ok(build_layered(&layer, &ScaleOptions { reach, ..ScaleOptions::default() })?)
}

fn layered_classify(cli: &Cli, a: &LayerInput) -> Res {
    let lay = layered_model(&a.layers, ScaleOptions::default().reach)?;
    let rep = classify_layered(&lay, &Budget::default());
    let mut out = Out::new(&a.output)?;
    out.text("layered_report.json", &rep.to_json())?;
    println!("recurrent            {:?}", rep.recurrent);
    println!("positive_recurrent   {:?}", rep.positive_recurrent);
    println!("psi_range            [{}, {}]", rep.psi_range.0, rep.psi_range.1);
    out.manifest(cli, "layered classify", &[&a.layers], None, None)?;
    if rep.recurrent == Tri::Unknown || rep.positive_recurrent == Tri::Unknown {
        return Err(Failure { code: 2, msg: "layered verdicts are inconclusive".into() });
    }
    Ok(())
}

fn joint(a: &LayeredSimArgs) -> Res<skewdiff::layered::JointEnsemble> {
    let lay = layered_model(&a.layers, a.path.x_max)?;
    let mut plan = plan_of(&a.run, &a.path);
    plan.stride = a.stride;
    Ok(simulate_xy(&lay, &plan, a.y0)?)
}

fn layered_simulate(cli: &Cli, a: &LayeredSimArgs) -> Res {
    let ens = joint(a)?;
    let mut out = Out::new(&a.output)?;
    write_joint_csv(&ens, out.create("joint.csv")?)?;
    out.manifest(cli, "layered simulate", &[&a.layers], Some(a.run.seed), a.run.threads)
}

fn layered_dispersion(cli: &Cli, a: &DispersionArgs) -> Res {
    let ens = joint(&a.sim)?;
    let t = a.sim.path.horizon;
    let grid: Vec<f64> = if a.grid.is_empty() { (0..=10).map(|i| t * i as f64 / 10.0).collect() } else { a.grid.clone() };
    let rows = dispersion_stats(&ens, &grid);
    let mut out = Out::new(&a.sim.output)?;
    write_dispersion_csv(&rows, out.create("dispersion.csv")?)?;
    out.manifest(cli, "layered dispersion", &[&a.sim.layers], Some(a.sim.run.seed), a.sim.run.threads)
}

fn run(cli: &Cli) -> Res {
    match &cli.cmd {
        Cmd::Classify(a) => classify(cli, a),
        Cmd::Scale(a) => scale(cli, a),
        Cmd::Simulate(a) => simulate(cli, a),
        Cmd::Mc(m) => match m {
            McCmd::Hit(a) => mc_interval(cli, a, true),
            McCmd::Exit(a) => mc_interval(cli, a, false),
            McCmd::Occupation(a) => mc_occupation(cli, a),
            McCmd::Localtime(a) => mc_localtime(cli, a),
            McCmd::Qv(a) => mc_qv(cli, a),
        },
        Cmd::Layered(l) => match l {
            LayeredCmd::Classify(a) => layered_classify(cli, a),
            LayeredCmd::Simulate(a) => layered_simulate(cli, a),
            LayeredCmd::Dispersion(a) => layered_dispersion(cli, a),
        },
    }
}

fn main() -> ExitCode {
    // clap's own usage errors would exit 2, which is reserved for inconclusive verdicts
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
