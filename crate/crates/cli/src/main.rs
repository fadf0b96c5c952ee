use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64 as C64;

use wqp::params::LogParams;
use wqp::rmatrix::{build_r, build_r_hat};
use wqp::runner::{self, Ray, RunManifest, Summary, SweepSpec};
use wqp::structfn::write_sweep_csv;
use wqp::{Error, SpectralPoint, TruncationPolicy};

#[derive(Parser, Debug)]
#[command(
    name = "wqp",
    version,
    about = "Elliptic R-matrix and W_{q,p} structure-function identity checks"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Output directory (reports, CSVs, matrix dumps).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed applied to every check in the manifest.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Tolerance applied to every check in the manifest.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Tail tolerance of every series and product.
    #[arg(long = "tail-eps", global = true)]
    tail_eps: Option<f64>,
    /// Worker threads; 0 picks the number of cores.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a manifest of checks and sweeps.
    Check {
        /// Manifest file (TOML).
        manifest: Option<PathBuf>,
        /// Run a manifest shipped with the library instead, e.g. `paper-suite`.
        #[arg(long, conflicts_with = "manifest")]
        bundled: Option<String>,
    },
    /// Fixed smoke subset at baked-in parameters.
    Quick {
        #[arg(short = 'N', long = "rank", default_value_t = 2)]
        rank: usize,
    },
    /// Evaluate one function along a ray of log coordinates and emit CSV.
    Sweep {
        /// One of F, Y, G, f_h, tau_n.
        #[arg(long)]
        function: String,
        #[arg(short = 'N', long = "rank")]
        rank: usize,
        #[arg(long, default_value_t = 1, allow_hyphen_values = true)]
        n: i64,
        #[arg(long, allow_hyphen_values = true)]
        h: Option<i64>,
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        zeta: C64,
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        tau: Option<C64>,
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        start: C64,
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        end: C64,
        #[arg(long, default_value_t = 50)]
        steps: usize,
    },
    /// Write R (or R-hat) at one point in the text matrix format.
    DumpR {
        #[arg(short = 'N', long = "rank")]
        rank: usize,
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        zeta: C64,
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        tau: C64,
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        xi: C64,
        /// Dump R-hat instead of R.
        #[arg(long)]
        hat: bool,
        /// Central charge; with --hat this dumps the starred matrix.
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        c: Option<C64>,
    },
}

/// `re,im` or a bare real number.
fn parse_complex(s: &str) -> Result<C64, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |t: &str| t.parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
    match parts.as_slice() {
        [re] => Ok(C64::new(num(re)?, 0.0)),
        [re, im] => Ok(C64::new(num(re)?, num(im)?)),
        _ => Err(format!("expected `re,im`, got `{s}`")),
    }
}

fn pair(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

fn trunc_with(global: &Global, base: TruncationPolicy) -> TruncationPolicy {
    match global.tail_eps {
        Some(eps) => base.with_tail_eps(eps),
        None => base,
    }
}

fn print_summary(s: &Summary) {
    println!("pass {} fail {} refused {}", s.pass, s.fail, s.refused);
}

fn status(s: &Summary) -> ExitCode {
    if s.fail == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

/// Output sink: a file under `--out` when given, else stdout.
fn sink(out: Option<&Path>, file: &str) -> Result<Box<dyn Write>, Error> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
            let path = dir.join(file);
            let f = fs::File::create(&path)
                .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        None => Ok(Box::new(io::stdout().lock())),
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    let g = &cli.global;
    match cli.command {
        Command::Check { manifest, bundled } => {
            let mut m = match (manifest, bundled) {
                (Some(path), None) => RunManifest::load(&path)?,
                (None, Some(name)) => runner::bundled(&name)
                    .ok_or_else(|| Error::Manifest(format!("no bundled manifest `{name}`")))?,
                _ => {
                    return Err(Error::Manifest(
                        "give a manifest path or --bundled NAME".into(),
                    ))
                }
            };
            m.trunc = trunc_with(g, m.trunc);
            if let Some(seed) = g.seed {
                m.override_seed(seed);
            }
            if let Some(tol) = g.tol {
                m.override_all_tols(tol);
            }
            m.validate()?;
            let summary = runner::run_manifest(&m, g.out.as_deref(), g.jobs)?;
            print_summary(&summary);
            Ok(status(&summary))
        }
        Command::Quick { rank } => {
            let mut m = runner::quick_manifest(rank);
            m.trunc = trunc_with(g, m.trunc);
            if let Some(tol) = g.tol {
                m.override_all_tols(tol);
            }
            let summary = match &g.out {
                Some(dir) => runner::run_manifest(&m, Some(dir), g.jobs)?,
                None => {
                    let lines = runner::evaluate_manifest(&m, g.jobs)?;
                    for line in &lines {
                        println!("{}", line.to_json());
                    }
                    Summary::from_lines(&lines)
                }
            };
            print_summary(&summary);
            Ok(status(&summary))
        }
        Command::Sweep {
            function,
            rank,
            n,
            h,
            zeta,
            tau,
            start,
            end,
            steps,
        } => {
            let spec = SweepSpec {
                function: function.clone(),
                name: None,
                rank,
                n,
                h,
                zeta: pair(zeta),
                tau: tau.map(pair),
                ray: Ray {
                    start: pair(start),
                    end: pair(end),
                    steps,
                },
            };
            let m = RunManifest {
                sweeps: vec![spec.clone()],
                ..Default::default()
            };
            m.validate()?;
            let rows = runner::evaluate_sweep(&spec, &trunc_with(g, TruncationPolicy::default()))?;
            let mut w = sink(g.out.as_deref(), &format!("sweep_{function}.csv"))?;
            write_sweep_csv(&mut w, &rows)?;
            w.flush()?;
            Ok(ExitCode::SUCCESS)
        }
        Command::DumpR {
            rank,
            zeta,
            tau,
            xi,
            hat,
            c,
        } => {
            let trunc = trunc_with(g, TruncationPolicy::default());
            let mut params = LogParams::new(rank, zeta, tau)?;
            if let Some(c) = c {
                params = params.with_c(c);
            }
            let z = SpectralPoint::new(xi);
            let m = if hat {
                build_r_hat(z, &params, c.is_some(), &trunc)?
            } else {
                build_r(z, &params, &trunc)?
            };
            let file = if hat {
                format!("Rhat_N{rank}.txt")
            } else {
                format!("R_N{rank}.txt")
            };
            let mut w = sink(g.out.as_deref(), &file)?;
            m.write_text(&mut w)?;
            w.flush()?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
