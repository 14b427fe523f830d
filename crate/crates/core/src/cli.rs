use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use thiserror::Error;

use volfractal::fractal::{self, SurfaceKind, Window, DEFAULT_CLUSTER_RADIUS};
use volfractal::pricing::PricingError;
use volfractal::scenario::{Derivation, Scenario, PRESETS};
use volfractal::solver::{Mode, Solver, SolverConfig, SolverError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("unknown scenario {0:?} (expected one of atm, put10, put25, call10, call25)")]
    UnknownScenario(String),
    #[error(transparent)]
    Pricing(#[from] PricingError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Window(#[from] fractal::WindowError),
    #[error("cannot build worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Parser)]
#[command(
    name = "volfractal",
    version,
    about = "Complex implied-volatility Newton fractals"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the Newton iteration from one seed and print a key=value report.
    Solve(SolveArgs),
    /// Sweep a window of seeds, render a PPM and write the root census CSV.
    Fractal(FractalArgs),
    /// Write |f(σ)| or |f(σ) − V| over a window as CSV.
    Surface(SurfaceArgs),
    /// List the market presets with derived quantities.
    Scenarios(ScenariosArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Raw,
    Jackel,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Raw => Mode::Raw,
            ModeArg::Jackel => Mode::JackelLog,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SurfaceKindArg {
    /// Modulus of the discounted price.
    Price,
    /// Modulus of the calibration error against the scenario price.
    Error,
}

#[derive(Debug, Args)]
pub struct IterationArgs {
    #[arg(long, default_value = "atm")]
    pub scenario: String,
    #[arg(long, value_enum, default_value = "raw")]
    pub mode: ModeArg,
    /// Relative step tolerance.
    #[arg(long, default_value_t = 1e-8, allow_hyphen_values = true, value_parser = parse_positive)]
    pub epsilon: f64,
    #[arg(long = "max-iter", default_value_t = 100, value_parser = clap::value_parser!(u32).range(1..))]
    pub max_iter: u32,
}

impl IterationArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            mode: self.mode.into(),
            tolerance: self.epsilon,
            max_iterations: self.max_iter,
            ..SolverConfig::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub iteration: IterationArgs,
    /// Initial volatility in vols, as `a+bi`.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_seed)]
    pub seed: Complex64,
    /// Also write the report to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// `re_min:re_max:im_min:im_max` in vols, or a preset: fig3a, fig3b.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_bounds, default_value = "fig3b")]
    pub window: Bounds,
    /// `N` for a square grid or `WxH`.
    #[arg(long, value_parser = parse_res, default_value = "101")]
    pub res: (usize, usize),
    /// Worker threads; output does not depend on it.
    #[arg(long, value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: Option<u16>,
}

impl GridArgs {
    fn window(&self) -> Result<Window, CliError> {
        let b = self.window;
        Ok(Window::new(
            b.re_min, b.re_max, b.im_min, b.im_max, self.res.0, self.res.1,
        )?)
    }

    fn run<T: Send>(&self, job: impl FnOnce() -> T + Send) -> Result<T, CliError> {
        match self.threads {
            Some(n) => Ok(rayon::ThreadPoolBuilder::new()
                .num_threads(n.into())
                .build()?
                .install(job)),
            None => Ok(job()),
        }
    }
}

#[derive(Debug, Args)]
pub struct FractalArgs {
    #[command(flatten)]
    pub iteration: IterationArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Image path; the census goes next to it with extension `census.csv`.
    #[arg(long, default_value = "fractal.ppm")]
    pub out: PathBuf,
    /// Census clustering radius in decimal total volatility.
    #[arg(
        long = "cluster-radius",
        default_value_t = DEFAULT_CLUSTER_RADIUS,
        allow_hyphen_values = true,
        value_parser = parse_positive
    )]
    pub cluster_radius: f64,
}

#[derive(Debug, Args)]
pub struct SurfaceArgs {
    #[arg(value_enum)]
    pub kind: SurfaceKindArg,
    #[arg(long, default_value = "atm")]
    pub scenario: String,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value = "surface.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScenariosArgs {
    /// Also write the table to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Window bounds in vols.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

pub fn parse_bounds(s: &str) -> Result<Bounds, String> {
    let square = |h: f64| Bounds {
        re_min: -h,
        re_max: h,
        im_min: -h,
        im_max: h,
    };
    match s {
        "fig3a" => return Ok(square(1000.0)),
        "fig3b" => return Ok(square(40.0)),
        _ => {}
    }
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 4 {
        return Err("expected re_min:re_max:im_min:im_max or a preset (fig3a, fig3b)".into());
    }
    let mut v = [0.0; 4];
    for (slot, p) in v.iter_mut().zip(&parts) {
        *slot = p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}"))?;
        if !slot.is_finite() {
            return Err(format!("{p:?} is not finite"));
        }
    }
    if v[0] >= v[1] || v[2] >= v[3] {
        return Err("window needs re_min < re_max and im_min < im_max".into());
    }
    Ok(Bounds {
        re_min: v[0],
        re_max: v[1],
        im_min: v[2],
        im_max: v[3],
    })
}

pub fn parse_positive(s: &str) -> Result<f64, String> {
    match s.trim().parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
        Ok(_) => Err("must be a positive finite number".into()),
        Err(e) => Err(e.to_string()),
    }
}

pub fn parse_res(s: &str) -> Result<(usize, usize), String> {
    let one = |p: &str| -> Result<usize, String> {
        match p.trim().parse::<usize>() {
            Ok(0) => Err("resolution must be positive".into()),
            Ok(n) => Ok(n),
            Err(e) => Err(format!("{p:?}: {e}")),
        }
    };
    match s.split_once(['x', 'X']) {
        Some((w, h)) => Ok((one(w)?, one(h)?)),
        None => {
            let n = one(s)?;
            Ok((n, n))
        }
    }
}

/// Parses `a`, `bi`, `a+bi` or `a-bi`; `i` alone means a unit coefficient.
pub fn parse_seed(s: &str) -> Result<Complex64, String> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let err = || format!("{s:?} is not a complex number of the form a+bi");
    let num = |p: &str| -> Result<f64, String> {
        let v = match p {
            "" | "+" => 1.0,
            "-" => -1.0,
            _ => p.parse::<f64>().map_err(|_| err())?,
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(err())
        }
    };
    let Some(body) = t.strip_suffix(['i', 'j']) else {
        let re = t.parse::<f64>().map_err(|_| err())?;
        return if re.is_finite() {
            Ok(Complex64::new(re, 0.0))
        } else {
            Err(err())
        };
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| matches!(bytes[k], b'+' | b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    match split {
        Some(k) => Ok(Complex64::new(num(&body[..k])?, num(&body[k..])?)),
        None => Ok(Complex64::new(0.0, num(body)?)),
    }
}

fn format_complex(z: Complex64) -> String {
    format!("{}{:+}i", z.re, z.im)
}

/// Writes through a temporary file in the destination directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut builder = tempfile::Builder::new();
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        builder.permissions(std::fs::Permissions::from_mode(0o644));
    }
    let mut tmp = builder.tempfile_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn scenario(name: &str) -> Result<Scenario, CliError> {
    Ok(Scenario::by_name(name).ok_or_else(|| CliError::UnknownScenario(name.to_string()))??)
}

/// Census path for an image path: `out.ppm` becomes `out.census.csv`.
pub fn census_path(image: &Path) -> PathBuf {
    image.with_extension("census.csv")
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve(a) => solve(a),
        Command::Fractal(a) => fractal(a),
        Command::Surface(a) => surface(a),
        Command::Scenarios(a) => scenarios(a),
    }
}

fn solve(args: SolveArgs) -> Result<(), CliError> {
    let sc = scenario(&args.iteration.scenario)?;
    let config = args.iteration.config();
    let solver = Solver::new(sc.problem()?, config)?;
    let sqrt_t = sc.spec.market.maturity.sqrt();
    let seed_sigma = args.seed / 100.0;
    let outcome = solver.solve(seed_sigma * sqrt_t);

    let mut r = String::new();
    let mut kv = |k: &str, v: String| writeln!(r, "{k}={v}").expect("writing to a String");
    kv("scenario", sc.name().to_string());
    kv("parity", sc.spec.parity.to_string());
    kv("strike", sc.spec.strike.to_string());
    kv("market_vol", sc.preset.market_vol.to_string());
    kv("target_price", sc.price.to_string());
    kv("mode", config.mode.to_string());
    kv("epsilon", format!("{:e}", config.tolerance));
    kv("max_iter", config.max_iterations.to_string());
    kv("seed_vol", format_complex(args.seed));
    kv("seed_sigma", format_complex(seed_sigma));
    kv("status", outcome.status.to_string());
    kv("steps", outcome.steps.to_string());
    match outcome.root {
        Some(root) => {
            let sigma = root / sqrt_t;
            kv("root_vol", format_complex(sigma * 100.0));
            kv("root_sigma", format_complex(sigma));
            kv("root_total_vol", format_complex(root));
        }
        None => {
            kv("root_vol", "none".into());
            kv("root_sigma", "none".into());
            kv("root_total_vol", "none".into());
        }
    }
    kv(
        "residual",
        outcome.residual.map_or("none".into(), |v| format!("{v:e}")),
    );

    print!("{r}");
    if let Some(out) = &args.out {
        write_atomic(out, r.as_bytes())?;
    }
    Ok(())
}

fn fractal(args: FractalArgs) -> Result<(), CliError> {
    let sc = scenario(&args.iteration.scenario)?;
    let config = args.iteration.config();
    let solver = Solver::new(sc.problem()?, config)?;
    let window = args.grid.window()?;
    let grid = args.grid.run(|| fractal::sweep(&window, &solver))?;
    let image = fractal::render(&grid, &fractal::Palette::default(), config.max_iterations);
    let census = fractal::root_census(&grid, args.cluster_radius);

    write_atomic(&args.out, &image.to_ppm())?;
    let census_out = census_path(&args.out);
    write_atomic(&census_out, fractal::census_csv(&census).as_bytes())?;

    let (real, complex, failed) = grid.counts();
    println!("image={}", args.out.display());
    println!("census={}", census_out.display());
    println!("converged_real={real}");
    println!("converged_complex={complex}");
    println!("failed={failed}");
    println!("distinct_roots={}", census.len());
    Ok(())
}

fn surface(args: SurfaceArgs) -> Result<(), CliError> {
    let sc = scenario(&args.scenario)?;
    let window = args.grid.window()?;
    let kind = match args.kind {
        SurfaceKindArg::Price => SurfaceKind::PriceModulus,
        SurfaceKindArg::Error => SurfaceKind::ErrorModulus {
            target_price: sc.price,
        },
    };
    let grid = args
        .grid
        .run(|| fractal::surface(&window, &sc.spec, kind))?;
    write_atomic(&args.out, fractal::surface_csv(&grid).as_bytes())?;
    println!("surface={}", args.out.display());
    Ok(())
}

fn scenarios(args: ScenariosArgs) -> Result<(), CliError> {
    let mut t = String::new();
    let mut row = |cells: [String; 11]| {
        let line: Vec<String> = cells.iter().map(|c| format!("{c:>12}")).collect();
        writeln!(t, "{}", line.join(" ").trim_start()).expect("writing to a String");
    };
    row([
        "name", "parity", "vol", "delta", "strike", "quoted", "forward", "a", "b", "tau", "price",
    ]
    .map(String::from));
    for preset in PRESETS {
        let sc = Scenario::from_preset(preset)?;
        let p = sc.problem()?;
        let delta = match preset.derivation {
            Derivation::ExplicitStrike(_) => "-".to_string(),
            Derivation::FromDelta(d) => format!("{d}"),
        };
        row([
            sc.name().to_string(),
            sc.spec.parity.to_string(),
            format!("{}", preset.market_vol),
            delta,
            format!("{:.4}", sc.spec.strike),
            format!("{:.2}", preset.quoted_strike),
            format!("{:.6}", p.forward),
            format!("{:.8}", p.log_moneyness),
            format!("{:.8}", p.target),
            format!("{:.8}", p.intrinsic),
            format!("{:.6}", sc.price),
        ]);
    }
    print!("{t}");
    if let Some(out) = &args.out {
        write_atomic(out, t.as_bytes())?;
    }
    Ok(())
}
