//! Command-line front end. See [`run`].

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::affine::{self, SeriesOptions};
use crate::bounds::{lower_bound, upper_bound};
use crate::config::{self, ConfigError, GridSpec, KeyValues};
use crate::error::Error;
use crate::family::EquivalentFamily;
use crate::fit::dyadic;
use crate::heston::{self, HestonParams};
use crate::laplace::{self, LaplaceProblem, Order};
use crate::legendre::{CgfExpansion, RateData};
use crate::oracle::{self, McConfig};
use crate::smooth::SmoothScalarFn;

/// Environment variable holding the default worker count.
pub const THREADS_ENV: &str = "LDX_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_IO: i32 = 74;

#[derive(Debug, Parser)]
#[command(name = "ldx", version, about = "Large-deviation expansions of rescaled CGFs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Laplace expansion residuals against quadrature for the reference problems.
    Laplace(LaplaceArgs),
    /// Critical point, rate and distance on a z-grid.
    Rate(RateArgs),
    /// Tabulate the equivalent family, or certify it at one u.
    Family(FamilyArgs),
    /// First-order upper and lower bounds for p_eps(A).
    Bounds(BoundsArgs),
    /// Riccati trajectories or homogenization series for an affine model.
    Riccati(RiccatiArgs),
    /// Heston CGF expansion on a u-grid.
    Heston(HestonArgs),
    /// Monte Carlo checks of the Heston MGF and bounds.
    McValidate(McArgs),
}

#[derive(Debug, Args)]
struct Output {
    /// Output CSV path; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Source {
    /// Heston parameter file (keys r, k, a, b, sigma, rho, x0, v0).
    #[arg(long, conflicts_with = "gaussian")]
    config: Option<PathBuf>,
    /// Use the Gaussian triple (u²/2, 0, 0).
    #[arg(long)]
    gaussian: bool,
}

#[derive(Debug, Args)]
struct LaplaceArgs {
    /// gaussian, cosine, cubic or all.
    #[arg(long, default_value = "all")]
    problem: String,
    /// Comma-separated ε values; defaults to 2^-4 .. 2^-10.
    #[arg(long)]
    eps: Option<String>,
    /// Expansion order, 0 or 1.
    #[arg(long, default_value_t = 1)]
    order: u8,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct RateArgs {
    #[command(flatten)]
    source: Source,
    /// start:stop:count
    #[arg(long, allow_hyphen_values = true)]
    z_grid: String,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct FamilyArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long, allow_hyphen_values = true)]
    z_grid: Option<String>,
    #[arg(long)]
    eps: String,
    /// Certify equivalence at this u instead of tabulating.
    #[arg(long, allow_hyphen_values = true)]
    certify_u: Option<f64>,
    /// Truncation window n for certification.
    #[arg(long, default_value_t = 4)]
    window: u32,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct BoundsArgs {
    #[command(flatten)]
    source: Source,
    /// lo:hi
    #[arg(long, allow_hyphen_values = true)]
    set: String,
    #[arg(long, allow_hyphen_values = true)]
    x: f64,
    #[arg(long)]
    eps: String,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct RiccatiArgs {
    /// Affine model file.
    #[arg(long)]
    model: PathBuf,
    /// Comma-separated initial vector u.
    #[arg(long, allow_hyphen_values = true)]
    u: String,
    /// Output times for a trajectory.
    #[arg(long, conflicts_with = "series")]
    t_grid: Option<String>,
    /// Homogenization parameter for trajectories.
    #[arg(long, default_value_t = 1.0)]
    eps: f64,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Emit series coefficients up to this order instead of a trajectory.
    #[arg(long)]
    series: Option<usize>,
    /// Time at which series coefficients are taken.
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    /// Initial state for the transform coefficients.
    #[arg(long, allow_hyphen_values = true)]
    x: Option<String>,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct HestonArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    u_grid: String,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct McArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 100_000)]
    paths: usize,
    #[arg(long, default_value_t = 200)]
    steps: usize,
    #[arg(long, default_value = "0.1,0.05")]
    eps: String,
    /// MGF arguments to check.
    #[arg(long, default_value = "0.5", allow_hyphen_values = true)]
    u: String,
    /// Set A = lo:hi for the bound sandwich; requires --x.
    #[arg(long, requires = "x", allow_hyphen_values = true)]
    set: Option<String>,
    #[arg(long, requires = "set", allow_hyphen_values = true)]
    x: Option<f64>,
    #[arg(long)]
    antithetic: bool,
    /// Worker threads; overrides the LDX_THREADS environment variable.
    #[arg(long)]
    threads: Option<usize>,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Config(ConfigError),
    Io(String),
    Numeric(Error),
}

impl Failure {
    fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(ConfigError::Rejected(_)) => EXIT_DOMAIN,
            Failure::Usage(_) | Failure::Config(_) => EXIT_USAGE,
            Failure::Io(_) => EXIT_IO,
            Failure::Numeric(e) => e.exit_code(),
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage: {m}"),
            Failure::Config(e) => write!(f, "config: {e}"),
            Failure::Io(m) => write!(f, "i/o: {m}"),
            Failure::Numeric(e) => write!(f, "{e}"),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Numeric(e)
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

/// A CSV table with its leading configuration comment.
struct Table {
    comment: Vec<(String, String)>,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(command: &str, header: &[&str]) -> Self {
        Self {
            comment: vec![("command".into(), command.into())],
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn note(&mut self, key: &str, value: impl ToString) {
        self.comment.push((key.to_string(), value.to_string()));
    }

    fn render(&self) -> String {
        let mut s = String::from("#");
        for (k, v) in &self.comment {
            let _ = write!(s, " {k}={v}");
        }
        s.push('\n');
        s.push_str(&self.header.join(","));
        s.push('\n');
        for row in &self.rows {
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn read(path: &Path) -> Outcome<String> {
    std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn emit(table: &Table, output: &Output) -> Outcome<()> {
    let text = table.render();
    match &output.out {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::Io(format!("{}: {e}", p.display()))),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(text.as_bytes()).map_err(|e| Failure::Io(e.to_string()))
        }
    }
}

fn load_heston(path: &Path) -> Outcome<HestonParams> {
    Ok(config::parse_heston(&read(path)?)?)
}

fn note_heston(table: &mut Table, p: &HestonParams) {
    let vals = [
        ("r", p.r),
        ("k", p.k),
        ("a", p.a),
        ("b", p.b),
        ("sigma", p.sigma),
        ("rho", p.rho),
        ("x0", p.x0),
        ("v0", p.v0),
    ];
    for (k, v) in vals {
        table.note(k, v);
    }
}

fn resolve_source(src: &Source, table: &mut Table) -> Outcome<RateData> {
    let cgf = match (&src.config, src.gaussian) {
        (Some(path), false) => {
            let p = load_heston(path)?;
            table.note("source", "heston");
            note_heston(table, &p);
            heston::cgf_expansion(&p)?
        }
        (None, true) => {
            table.note("source", "gaussian");
            CgfExpansion::gaussian()
        }
        _ => return Err(Failure::Usage("give exactly one of --config or --gaussian".into())),
    };
    Ok(RateData::new(cgf)?)
}

fn laplace_problem(name: &str) -> Outcome<LaplaceProblem> {
    let quad = SmoothScalarFn::polynomial(&[0.0, 0.0, 0.5]);
    let (f, phi) = match name {
        "gaussian" => (SmoothScalarFn::constant(1.0), quad),
        "cosine" => {
            (SmoothScalarFn::new(f64::cos).with_derivative(|z: f64| -z.sin()).with_derivative(|z: f64| -z.cos()), quad)
        }
        "cubic" => (SmoothScalarFn::constant(1.0), SmoothScalarFn::polynomial(&[0.0, 0.0, 0.5, 1.0 / 6.0])),
        other => return Err(Failure::Usage(format!("unknown problem `{other}`"))),
    };
    let interval = if name == "cubic" { (-1.0, 1.0) } else { (-20.0, 20.0) };
    Ok(LaplaceProblem::new(f, phi, interval, 0.0)?)
}

fn cmd_laplace(args: &LaplaceArgs) -> Outcome<()> {
    let order = match args.order {
        0 => Order::Zero,
        1 => Order::One,
        o => return Err(Failure::Usage(format!("order {o} must be 0 or 1"))),
    };
    let eps = match &args.eps {
        Some(s) => config::parse_list(s)?,
        None => dyadic(1.0 / 16.0, 7),
    };
    if eps.iter().any(|e| !(*e > 0.0)) {
        return Err(Failure::Numeric(Error::Domain("eps values must be positive".into())));
    }
    let names: Vec<&str> = match args.problem.as_str() {
        "all" => vec!["gaussian", "cosine", "cubic"],
        one => vec![one],
    };
    let mut table =
        Table::new("laplace", &["problem", "eps", "quadrature", "expansion", "rel_residual", "order1", "fitted_order"]);
    table.note("problem", &args.problem);
    table.note("order", args.order);
    table.note("eps", eps.iter().map(|e| num(*e)).collect::<Vec<_>>().join(";"));
    for name in names {
        let problem = laplace_problem(name)?;
        let coeffs = laplace::expand(&problem, order)?;
        let report = laplace::residual_order(&problem, order, &eps)?;
        let fitted = report.order.map_or_else(|| "nan".to_string(), num);
        for (&e, &r) in eps.iter().zip(&report.residuals) {
            let q = laplace::quadrature_reference(&problem.integrand, &problem.exponent, problem.interval, e)?;
            table.rows.push(vec![
                name.to_string(),
                num(e),
                num(q),
                num(coeffs.evaluate(e)),
                num(r),
                num(coeffs.order1.unwrap_or(0.0)),
                fitted.clone(),
            ]);
        }
    }
    emit(&table, &args.output)
}

fn cmd_rate(args: &RateArgs) -> Outcome<()> {
    let mut table = Table::new("rate", &["z", "ustar", "rate", "distance"]);
    let rd = resolve_source(&args.source, &mut table)?;
    let grid = GridSpec::parse(&args.z_grid)?;
    table.note("z_grid", &args.z_grid);
    for z in grid.points() {
        let u = rd.ustar(z)?;
        let rate = rd.rate_at(z, u);
        table.rows.push(vec![num(z), num(u), num(rate), num((2.0 * rate).sqrt())]);
    }
    emit(&table, &args.output)
}

fn positive_list(s: &str) -> Outcome<Vec<f64>> {
    let v = config::parse_list(s)?;
    if v.iter().any(|e| !(*e > 0.0)) {
        return Err(Failure::Numeric(Error::Domain("eps values must be positive".into())));
    }
    Ok(v)
}

fn cmd_family(args: &FamilyArgs) -> Outcome<()> {
    let eps = positive_list(&args.eps)?;
    if let Some(u) = args.certify_u {
        let mut table = Table::new("family", &["window", "u", "eps", "residual", "fitted_order", "passed"]);
        let rd = resolve_source(&args.source, &mut table)?;
        table.note("certify_u", u);
        table.note("window", args.window);
        table.note("eps", &args.eps);
        let cert = EquivalentFamily::new(rd).certify_equivalence(args.window, u, &eps)?;
        let fitted = cert.order.map_or_else(|| "nan".to_string(), num);
        for (e, r) in cert.eps.iter().zip(&cert.residuals) {
            table.rows.push(vec![
                args.window.to_string(),
                num(u),
                num(*e),
                num(*r),
                fitted.clone(),
                cert.passed.to_string(),
            ]);
        }
        return emit(&table, &args.output);
    }
    let Some(z_grid) = &args.z_grid else {
        return Err(Failure::Usage("family needs --z-grid or --certify-u".into()));
    };
    let mut table = Table::new("family", &["z", "eps", "c0", "c1", "f_eps", "negative"]);
    let rd = resolve_source(&args.source, &mut table)?;
    let grid = GridSpec::parse(z_grid)?;
    table.note("z_grid", z_grid);
    table.note("eps", &args.eps);
    let fam = EquivalentFamily::new(rd);
    let mut negatives = 0usize;
    for z in grid.points() {
        let (c0, c1) = (fam.c0(z)?, fam.c1(z)?);
        for &e in &eps {
            let v = fam.f_eps(z, e)?;
            negatives += usize::from(v.negative);
            table.rows.push(vec![num(z), num(e), num(c0), num(c1), num(v.value), v.negative.to_string()]);
        }
    }
    if negatives > 0 {
        eprintln!("ldx: warning: {negatives} negative f_eps values (C0 + eps*C1 < 0)");
    }
    emit(&table, &args.output)
}

fn cmd_bounds(args: &BoundsArgs) -> Outcome<()> {
    let mut table = Table::new(
        "bounds",
        &[
            "direction",
            "case",
            "x",
            "a_minus",
            "a_plus",
            "eps",
            "exponent",
            "prefactor",
            "correction",
            "gamma",
            "value",
        ],
    );
    let rd = resolve_source(&args.source, &mut table)?;
    let set = config::parse_set(&args.set)?;
    let eps = positive_list(&args.eps)?;
    table.note("set", &args.set);
    table.note("x", args.x);
    table.note("eps", &args.eps);
    let reports = [upper_bound(&rd, set, args.x)?, lower_bound(&rd, set, args.x)?];
    for rep in &reports {
        for &e in &eps {
            table.rows.push(vec![
                rep.direction.to_string(),
                rep.case.to_string(),
                num(rep.x),
                num(rep.a_minus),
                num(rep.a_plus),
                num(e),
                num(rep.exponent),
                num(rep.prefactor),
                num(rep.correction),
                num(rep.gap_gamma),
                num(rep.value(e)),
            ]);
        }
    }
    emit(&table, &args.output)
}

fn cmd_riccati(args: &RiccatiArgs) -> Outcome<()> {
    let text = read(&args.model)?;
    let kv = KeyValues::parse(&text)?;
    let model = config::affine_from(&kv)?;
    let d = model.dim();
    let u = config::parse_list(&args.u)?;
    if u.len() != d {
        return Err(Failure::Usage(format!("--u has {} entries, model dimension is {d}", u.len())));
    }
    let psi_cols: Vec<String> = (1..=d).map(|i| format!("psi_{i}")).collect();
    let note_model = |table: &mut Table| {
        table.note("model", args.model.display());
        for k in kv.keys() {
            table.note(k, kv.get(k).unwrap_or_default().replace(' ', ""));
        }
        table.note("u", &args.u);
        table.note("tol", args.tol);
    };
    if let Some(order) = args.series {
        let mut header = vec!["n".to_string(), "phi".to_string()];
        header.extend(psi_cols);
        let x = args.x.as_deref().map(config::parse_list).transpose()?;
        if x.as_ref().is_some_and(|x| x.len() != d) {
            return Err(Failure::Usage(format!("--x must have {d} entries")));
        }
        if x.is_some() {
            header.push("transform".into());
        }
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let mut table = Table::new("riccati", &header);
        note_model(&mut table);
        table.note("series", order);
        table.note("t", args.t);
        if let Some(xs) = &args.x {
            table.note("x", xs);
        }
        let opts = SeriesOptions { tol: args.tol.min(1e-12), ..SeriesOptions::default() };
        let s = affine::series(&model, &u, args.t, order, opts)?;
        let transform = x.map(|x| s.transform_coefficients(&x));
        for n in 0..=s.order() {
            let mut row = vec![n.to_string(), num(s.phi[n])];
            row.extend(s.psi[n].iter().map(|v| num(*v)));
            if let Some(tr) = &transform {
                row.push(num(tr[n]));
            }
            table.rows.push(row);
        }
        return emit(&table, &args.output);
    }
    let Some(tg) = &args.t_grid else {
        return Err(Failure::Usage("riccati needs --t-grid or --series".into()));
    };
    let grid = GridSpec::parse(tg)?;
    let mut header = vec!["t".to_string()];
    header.extend(psi_cols);
    header.push("phi".into());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut table = Table::new("riccati", &header);
    note_model(&mut table);
    table.note("t_grid", tg);
    table.note("eps", args.eps);
    if !(args.eps > 0.0) {
        return Err(Failure::Numeric(Error::Domain("eps must be positive".into())));
    }
    let times = grid.points();
    if times[0] < 0.0 {
        return Err(Failure::Numeric(Error::Domain("times must be nonnegative".into())));
    }
    let sol = affine::solve_homogenized_at(&model, &u, args.eps, &times, args.tol)?;
    for (k, t) in times.iter().enumerate() {
        let mut row = vec![num(*t)];
        row.extend(sol.psi[k].iter().map(|v| num(*v)));
        row.push(num(sol.phi[k]));
        table.rows.push(row);
    }
    emit(&table, &args.output)
}

fn cmd_heston(args: &HestonArgs) -> Outcome<()> {
    let p = load_heston(&args.config)?;
    let grid = GridSpec::parse(&args.u_grid)?;
    let mut table =
        Table::new("heston", &["u", "lambda0", "dlambda0", "d2lambda0", "lambda1", "lambda2", "u_min", "u_max"]);
    note_heston(&mut table, &p);
    table.note("u_grid", &args.u_grid);
    let dom = heston::domain(&p);
    for u in grid.points() {
        table.rows.push(vec![
            num(u),
            num(heston::lambda0(&p, u)?),
            num(heston::dlambda0(&p, u)?),
            num(heston::d2lambda0(&p, u)?),
            num(heston::lambda1(&p, u)?),
            num(heston::lambda2(&p, u)?),
            num(dom.u_min),
            num(dom.u_max),
        ]);
    }
    emit(&table, &args.output)
}

fn thread_count(flag: Option<usize>) -> Outcome<Option<usize>> {
    if let Some(n) = flag {
        return if n > 0 { Ok(Some(n)) } else { Err(Failure::Usage("--threads must be positive".into())) };
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Failure::Usage(format!("{THREADS_ENV}={v} is not a positive integer"))),
        },
        Err(_) => Ok(None),
    }
}

fn cmd_mc(args: &McArgs) -> Outcome<()> {
    let p = load_heston(&args.config)?;
    let eps = positive_list(&args.eps)?;
    let us = config::parse_list(&args.u)?;
    let set = args.set.as_deref().map(config::parse_set).transpose()?;
    let cfg = McConfig { antithetic: args.antithetic, ..McConfig::new(args.paths, args.steps, args.seed) };
    cfg.validate()?;
    let mut table = Table::new("mc-validate", &["check", "expected", "observed", "std_error", "pass"]);
    note_heston(&mut table, &p);
    table.note("seed", args.seed);
    table.note("paths", args.paths);
    table.note("steps", args.steps);
    table.note("antithetic", args.antithetic);
    table.note("eps", &args.eps);
    table.note("u", &args.u);
    if let (Some(s), Some(x)) = (&args.set, args.x) {
        table.note("set", s);
        table.note("x", x);
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count(args.threads)? {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Failure::Usage(format!("thread pool: {e}")))?;
    let bounds = match (set, args.x) {
        (Some(a), Some(x)) => {
            let rd = RateData::new(heston::cgf_expansion(&p)?)?;
            Some((a, upper_bound(&rd, a, x)?, lower_bound(&rd, a, x)?))
        }
        _ => None,
    };
    for &e in &eps {
        let samples = pool.install(|| oracle::simulate_heston(&p, e, &cfg))?;
        for &u in &us {
            let (c, d) = heston::mgf_components(&p, u, e)?;
            let expected = (c + d * p.v0 + u * p.x0).exp();
            let est = oracle::empirical_mgf(&samples, u)?;
            let pass = (est.value - expected).abs() <= 3.0 * est.std_error;
            table.rows.push(vec![
                format!("mgf[u={u};eps={e}]"),
                num(expected),
                num(est.value),
                num(est.std_error),
                pass.to_string(),
            ]);
        }
        if let Some((a, up, lo)) = &bounds {
            let est = oracle::empirical_probability(&samples, *a)?;
            let (uv, lv) = (up.value(e), lo.value(e));
            for (name, expected, pass) in [
                ("upper", uv, est.value - 3.0 * est.std_error <= uv),
                ("lower", lv, lv - 3.0 * est.std_error <= est.value),
            ] {
                table.rows.push(vec![
                    format!("{name}[eps={e}]"),
                    num(expected),
                    num(est.value),
                    num(est.std_error),
                    pass.to_string(),
                ]);
            }
        }
    }
    emit(&table, &args.output)
}

fn dispatch(cli: &Cli) -> Outcome<()> {
    match &cli.command {
        Command::Laplace(a) => cmd_laplace(a),
        Command::Rate(a) => cmd_rate(a),
        Command::Family(a) => cmd_family(a),
        Command::Bounds(a) => cmd_bounds(a),
        Command::Riccati(a) => cmd_riccati(a),
        Command::Heston(a) => cmd_heston(a),
        Command::McValidate(a) => cmd_mc(a),
    }
}

/// Runs the command line `argv` (program name first) and returns the exit
/// code: 0 success, 2 domain or validation error (including model
/// parameters rejected on load), 3 numerical non-convergence, 64 usage or
/// malformed configuration, 74 I/O error.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("ldx: error: {f}");
            f.exit_code()
        }
    }
}
