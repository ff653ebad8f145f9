mod verify;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use hyperinv::exact_poly::{build_a_exact, build_b_exact};
use hyperinv::genfun::{self, GfParams};
use hyperinv::inversion::{build_a, build_b, build_q, build_system, solve_e0, solve_tri, MatrixParams, Seq, TriMatrixNum};
use hyperinv::io::CxRepr;
use hyperinv::operators::{self, Analytic, H0Series, OperatorParams};
use num_complex::Complex64 as Cx;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "hyperinv", version, about = "Hypergeometric inversion pairs and the operators built on them")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output format for tabular data
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    format: Format,
    /// Human-readable output
    #[arg(long, global = true)]
    pretty: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Op {
    #[value(name = "L")]
    L,
    #[value(name = "M")]
    M,
    #[value(name = "Linv")]
    Linv,
}

#[derive(clap::Args, Clone, Copy)]
struct Pair {
    #[arg(long, default_value = "0.5", value_parser = parse_cx, allow_hyphen_values = true)]
    x: Cx,
    #[arg(long, default_value = "-2", value_parser = parse_cx, allow_hyphen_values = true)]
    nu: Cx,
}

#[derive(Subcommand)]
enum Command {
    /// Export the matrices A, B and optionally Q
    Matrices {
        #[command(flatten)]
        pair: Pair,
        #[arg(long, default_value_t = 8)]
        n: usize,
        /// Exact entries as polynomials in (x, nu)
        #[arg(long)]
        exact: bool,
        /// Also write the coefficient matrix Q
        #[arg(long)]
        q: bool,
        /// Directory receiving A, B (and Q); stdout when absent
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Run a verification suite and report residuals
    Verify {
        #[arg(long, value_enum, default_value_t = verify::Suite::All)]
        suite: verify::Suite,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Solve for E given the sequence K (JSON {"values": [...]})
    Solve {
        #[command(flatten)]
        pair: Pair,
        #[arg(long)]
        k: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate L f, M f or L^{-1} f at a list of points
    Apply {
        #[command(flatten)]
        pair: Pair,
        #[arg(long, value_enum)]
        op: Op,
        /// Function as an exponential series JSON
        #[arg(long)]
        f: PathBuf,
        #[arg(long = "z", value_parser = parse_cx, allow_hyphen_values = true, required_unless_present = "series")]
        z: Vec<Cx>,
        /// Print the image as an exponential series instead of values
        /// (`L` by the coefficient map, `Linv` by a Cauchy refit on |z| = 1)
        #[arg(long)]
        series: bool,
        #[arg(long, default_value_t = 0.5)]
        rho: f64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Generating-function quantities: Xi coefficients, R(nu), Sigma and Theta
    Genfun {
        #[command(flatten)]
        pair: Pair,
        #[arg(long, default_value_t = 24)]
        order: usize,
        #[arg(long = "w", value_parser = parse_cx, allow_hyphen_values = true)]
        w: Vec<Cx>,
    },
    /// Volterra geometry, kernel exponent and the consistency check for a given K
    Volterra {
        #[command(flatten)]
        pair: Pair,
        #[arg(long, value_parser = parse_cx, allow_hyphen_values = true, default_value = "0.5")]
        z: Cx,
        /// Right-hand side K as an exponential series JSON; K = z when absent
        #[arg(long)]
        k: Option<PathBuf>,
        #[arg(long, default_value_t = 24)]
        order: usize,
    },
}

/// Failure categories mapped onto the exit codes.
#[derive(Debug)]
enum Failure {
    Verification(String),
    Domain(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Verification(_) => 1,
            Failure::Domain(_) => 2,
            Failure::Io(_) => 3,
        }
    }
}

impl From<hyperinv::Error> for Failure {
    fn from(e: hyperinv::Error) -> Self {
        Failure::Domain(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

/// Complex literal: `re`, `re+imj`, `re-imj`, `imj` or `re,im`.
fn parse_cx(s: &str) -> Result<Cx, String> {
    let s = s.trim();
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("invalid complex literal {s:?}"));
    if let Some((re, im)) = s.split_once(',') {
        return Ok(Cx::new(num(re)?, num(im)?));
    }
    let Some(body) = s.strip_suffix(['j', 'i']) else {
        return Ok(Cx::new(num(s)?, 0.0));
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len()).rev().find(|&i| matches!(bytes[i], b'+' | b'-') && !matches!(bytes[i - 1], b'e' | b'E'));
    let im_of = |t: &str| match t {
        "" | "+" => Ok(1.0),
        "-" => Ok(-1.0),
        _ => num(t),
    };
    match split {
        Some(i) => Ok(Cx::new(num(&body[..i])?, im_of(&body[i..])?)),
        None => Ok(Cx::new(0.0, im_of(body)?)),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Outcome {
    fs::write(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn render(v: &Value, pretty: bool) -> String {
    if pretty {
        serde_json::to_string_pretty(v).expect("serializable")
    } else {
        v.to_string()
    }
}

fn cx_json(z: Cx) -> Value {
    serde_json::to_value(CxRepr::from(z)).expect("serializable")
}

fn cmd_matrices(cli: &Cli, pair: Pair, n: usize, exact: bool, q: bool, out_dir: Option<&Path>) -> Outcome {
    if n == 0 {
        return Err(Failure::Domain("matrix order must be at least 1".into()));
    }
    let mut outputs: Vec<(&str, Value, Option<String>)> = Vec::new();
    if exact {
        outputs.push(("A", build_a_exact(n).to_json(), None));
        outputs.push(("B", build_b_exact(n).to_json(), None));
    } else {
        let p = MatrixParams::new(pair.x, pair.nu, n)?;
        let num = |m: &TriMatrixNum| (m.to_json(), Some(m.to_csv()));
        let (a, a_csv) = num(&build_a(&p)?);
        let (b, b_csv) = num(&build_b(&p)?);
        outputs.push(("A", a, a_csv));
        outputs.push(("B", b, b_csv));
    }
    if q {
        let m = build_q(&MatrixParams::new(pair.x, pair.nu, n)?)?;
        outputs.push(("Q", m.to_json(), Some(m.to_csv())));
    }
    let csv = cli.format == Format::Csv;
    match out_dir {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
            for (name, json, csv_text) in &outputs {
                match (csv, csv_text) {
                    (true, Some(t)) => write_text(&dir.join(format!("{name}.csv")), t)?,
                    _ => write_text(&dir.join(format!("{name}.json")), &render(json, cli.pretty))?,
                }
            }
        }
        None if csv && !exact => {
            for (name, _, csv_text) in &outputs {
                println!("# {name}");
                print!("{}", csv_text.as_deref().unwrap_or_default());
            }
        }
        None => {
            let obj: serde_json::Map<String, Value> = outputs.into_iter().map(|(k, v, _)| (k.to_string(), v)).collect();
            println!("{}", render(&Value::Object(obj), cli.pretty));
        }
    }
    Ok(())
}

fn cmd_solve(cli: &Cli, pair: Pair, k_path: &Path, out: Option<&Path>) -> Outcome {
    let k: Seq = read_json(k_path)?;
    if k.is_empty() {
        return Err(Failure::Domain("K must have at least one entry".into()));
    }
    let e = solve_e0(&k, pair.x, pair.nu)?;
    let direct = solve_tri(&build_system(&MatrixParams::new(pair.x, pair.nu, k.len())?)?, &k)?;
    let scale = direct.max_abs();
    let residual = if scale == 0.0 { e.max_abs() } else { e.max_abs_diff(&direct) / scale };
    let report = json!({ "e": e, "residual": residual });
    let text = render(&report, cli.pretty);
    match out {
        Some(path) => write_text(path, &text),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_apply(cli: &Cli, pair: Pair, op: Op, f_path: &Path, zs: &[Cx], series: bool, rho: f64, tol: f64) -> Outcome {
    let f: H0Series = read_json(f_path)?;
    let mut p = match op {
        Op::Linv => OperatorParams::for_contour(pair.x, pair.nu)?,
        _ => OperatorParams::new(pair.x, pair.nu)?,
    };
    p.contour.rho = rho;
    p.contour.tol = tol;
    if series {
        let image = match op {
            Op::L => operators::apply_l_series(&f, &p)?,
            Op::Linv => operators::refit_h0(|z| Ok(operators::linv_contour(&f, z, &p)?.value), f.order(), 1.0, 64)?,
            Op::M => return Err(Failure::Domain("--series is available for L and Linv".into())),
        };
        let v = serde_json::to_value(&image).expect("serializable");
        println!("{}", render(&v, cli.pretty));
        return Ok(());
    }
    let mut rows = Vec::new();
    for &z in zs {
        let (_, warning) = operators::eval_h0(&f, z);
        let (value, flag) = match op {
            Op::L => (operators::apply_l_quad(&f, z, &p)?, false),
            Op::M => (operators::apply_m_quad(&f, z, &p)?, false),
            Op::Linv => {
                let r = operators::linv_contour(&f, z, &p)?;
                (r.value, r.endpoint_flag)
            }
        };
        if warning {
            eprintln!("warning: series truncation is significant at z = {z}");
        }
        rows.push((z, value, warning, flag));
    }
    if cli.format == Format::Csv || cli.pretty {
        println!("z_re,z_im,re,im,truncation_warning");
        for (z, v, w, _) in &rows {
            println!("{},{},{},{},{}", z.re, z.im, v.re, v.im, w);
        }
    } else {
        let values: Vec<Value> = rows
            .iter()
            .map(|&(z, v, w, flag)| {
                let mut o = json!({ "z": cx_json(z), "value": cx_json(v), "truncation_warning": w });
                if op == Op::Linv {
                    o["endpoint_flag"] = json!(flag);
                }
                o
            })
            .collect();
        println!("{}", json!({ "op": op_name(op), "values": values }));
    }
    Ok(())
}

fn op_name(op: Op) -> &'static str {
    match op {
        Op::L => "L",
        Op::M => "M",
        Op::Linv => "Linv",
    }
}

fn cmd_genfun(cli: &Cli, pair: Pair, order: usize, ws: &[Cx]) -> Outcome {
    let p = GfParams::new(pair.x, pair.nu, order)?;
    let xi = genfun::xi_series(&p)?;
    let mut points = Vec::new();
    for &w in ws {
        let closed = genfun::sigma_closed(w, pair.nu)?;
        let series = genfun::sigma_series(w, pair.nu, 80).ok();
        points.push(json!({
            "w": cx_json(w),
            "theta": cx_json(genfun::theta(w, pair.nu)?),
            "sigma": cx_json(closed),
            "sigma_series": series.map(|s| cx_json(s.value)),
            "tail_bound": series.map(|s| s.tail_bound),
            "ode_residual": genfun::ode_residual(w, pair.nu)?,
        }));
    }
    let report = json!({
        "radius": genfun::radius_r(pair.nu),
        "psi": cx_json(genfun::psi_nu(pair.nu)),
        "prefactor_zero": genfun::prefactor_zero(&p).map(cx_json),
        "xi_coeffs": xi.coeffs().iter().map(|&c| cx_json(c)).collect::<Vec<_>>(),
        "points": points,
    });
    println!("{}", render(&report, cli.pretty));
    Ok(())
}

fn cmd_volterra(cli: &Cli, pair: Pair, z: Cx, k_path: Option<&Path>, order: usize) -> Outcome {
    let p = OperatorParams::new(pair.x, pair.nu)?;
    if pair.nu.im != 0.0 {
        return Err(Failure::Domain("Volterra form needs real nu".into()));
    }
    let geometry = operators::VolterraGeometry::new(pair.nu.re)?;
    let k = match k_path {
        Some(path) => read_json::<H0Series>(path)?,
        None => {
            let mut c = vec![Cx::new(0.0, 0.0); order.max(1)];
            c[0] = Cx::new(1.0, 0.0);
            H0Series::new(c)
        }
    };
    // E* carries no alternating sign, unlike K
    let e = H0Series::new(solve_e0(&Seq::new(k.to_signed()), pair.x, pair.nu)?.values().to_vec());
    let lhs = operators::volterra_lhs(&e, z, &p)?;
    let rhs = z / pair.x * operators::k1_from_k(&k, &p).value(z);
    let exponent = operators::singularity_exponent(z, &p, None, 1e-6, 1e-3, 16)?;
    let report = json!({
        "t_hat": geometry.t_hat,
        "tau_hat": geometry.tau_hat,
        "lhs": cx_json(lhs),
        "rhs": cx_json(rhs),
        "rel_err": (lhs - rhs).norm() / rhs.norm().max(f64::MIN_POSITIVE),
        "kernel_exponent": exponent,
    });
    println!("{}", render(&report, cli.pretty));
    Ok(())
}

fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Matrices { pair, n, exact, q, out_dir } => cmd_matrices(cli, *pair, *n, *exact, *q, out_dir.as_deref()),
        Command::Verify { suite, n, seed } => {
            let reports = verify::run(*suite, *n, *seed);
            verify::print(&reports, cli.pretty);
            match reports.iter().find(|r| !r.pass) {
                Some(r) => Err(Failure::Verification(format!("suite {} failed", r.suite))),
                None => Ok(()),
            }
        }
        Command::Solve { pair, k, out } => cmd_solve(cli, *pair, k, out.as_deref()),
        Command::Apply { pair, op, f, z, series, rho, tol } => cmd_apply(cli, *pair, *op, f, z, *series, *rho, *tol),
        Command::Genfun { pair, order, w } => cmd_genfun(cli, *pair, *order, w),
        Command::Volterra { pair, z, k, order } => cmd_volterra(cli, *pair, *z, k.as_deref(), *order),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = std::env::var("HYPERINV_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // only fails if a pool was already installed
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build_global();
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Verification(m) | Failure::Domain(m) | Failure::Io(m) => eprintln!("error: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}
