//! Command-line interface: point evaluators for characters, traces, and
//! theta sums; inspectors for the modular data and the branching tables;
//! and the verification suite. Exit code 0 means success, 1 means a
//! verification check failed, 2 means the input could not be used.

use std::fs;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use num_complex::Complex64;

use crate::chars::ModuleCharacterSet;
use crate::error::Result;
use crate::io;
use crate::kernels::SiegelPoint;
use crate::modular;
use crate::verify;

#[derive(Parser)]
#[command(
    name = "voatrace",
    version,
    about = "Numerical trace-function checks for even-lattice vertex operator algebras"
)]
struct Cli {
    /// Absolute tolerance for the inner series evaluations.
    #[arg(long, global = true)]
    tol: Option<f64>,

    /// Budget for exact lattice-vector enumeration per theta sum
    /// (point evaluation commands).
    #[arg(long, global = true, default_value_t = 10_000_000)]
    max_vectors: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one module character at a point of the upper half-plane.
    ///
    /// LATTICE is a JSON file path or a bundled name (a1, two-i2, glue, e8);
    /// TAU is a complex literal like "0.3+1.2i".
    Char {
        lattice: String,
        /// Module index in the canonical coset order.
        module: usize,
        tau: String,
    },

    /// Evaluate one diagonal multi-variable trace; POINT is one complex
    /// literal per lattice rank, comma-separated, e.g. "i,2i".
    Trace {
        lattice: String,
        module: usize,
        point: String,
    },

    /// Evaluate one theta sum (no eta normalization) at a Siegel point;
    /// POINT is a matrix literal with ";" between rows, e.g.
    /// "[[2i,0.5i];[0.5i,i]]".
    Gamma {
        lattice: String,
        module: usize,
        point: String,
    },

    /// Print the modular S and T matrices with a condition estimate.
    Smatrix {
        lattice: String,
        /// Print the discriminant-form closed form and its validation
        /// residual instead of the numerically solved matrix.
        #[arg(long)]
        closed_form: bool,
    },

    /// Print the branching tables, module coverage, and intertwining
    /// residuals for a sublattice pair (file path or bundled name:
    /// orthogonal-split, glued-split).
    Branch { pair: String },

    /// Run the verification suite: every identity check on its sample set
    /// plus one negative control per check.
    Verify {
        /// Suite file path (defaults to the compiled-in suite).
        #[arg(long)]
        suite: Option<String>,
        /// Write the full JSON report here.
        #[arg(long)]
        report: Option<String>,
        /// Extend the Siegel-point sample sets with seeded random points.
        #[arg(long)]
        seed: Option<u64>,
    },
}

/// Formats one complex value as "(re, im)" with 15 significant digits.
fn fmt_value(z: Complex64) -> String {
    format!("({:.14e}, {:.14e})", z.re, z.im)
}

/// Formats one matrix entry with 12 significant digits.
fn fmt_entry(z: Complex64) -> String {
    format!("({:.11e}, {:.11e})", z.re, z.im)
}

fn print_matrix(label: &str, rows: usize, entry: impl Fn(usize, usize) -> Complex64) {
    println!("{label}:");
    for j in 0..rows {
        let cells: Vec<String> = (0..rows).map(|h| fmt_entry(entry(j, h))).collect();
        println!("  [{}]", cells.join(", "));
    }
}

pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    let eval_tol = cli.tol.unwrap_or(verify::DEFAULT_EVAL_TOL);
    let budget = cli.max_vectors;
    match cli.command {
        Command::Char { lattice, module, tau } => {
            let m = ModuleCharacterSet::new(io::load_lattice(&lattice)?);
            let value = m.char_single(module, io::parse_complex(&tau)?)?;
            println!("{}", fmt_value(value));
            Ok(0)
        }
        Command::Trace { lattice, module, point } => {
            let m = ModuleCharacterSet::new(io::load_lattice(&lattice)?);
            let taus: Vec<Complex64> = point
                .split(',')
                .map(io::parse_complex)
                .collect::<Result<_>>()?;
            let a = SiegelPoint::diagonal(&taus)?;
            let value = m.trace_hg_with_budget(module, &a, eval_tol, budget)?;
            println!("{}", fmt_value(value));
            Ok(0)
        }
        Command::Gamma { lattice, module, point } => {
            let m = ModuleCharacterSet::new(io::load_lattice(&lattice)?);
            let a = io::parse_point_matrix(&point)?;
            let value = m.gamma_with_budget(module, &a, eval_tol, budget)?;
            println!("{}", fmt_value(value));
            Ok(0)
        }
        Command::Smatrix { lattice, closed_form } => {
            let m = ModuleCharacterSet::new(io::load_lattice(&lattice)?);
            let n = m.num_modules();
            if closed_form {
                let closed = modular::s_matrix_closed_form(&m);
                print_matrix("S (closed form)", n, |j, h| closed.s_entry(j, h));
                let taus = [
                    Complex64::new(0.0, 1.0),
                    Complex64::new(0.31, 1.1),
                    Complex64::new(-0.4, 0.8),
                ];
                let residual = modular::functional_inversion_residual(&closed, &m, &taus)?;
                println!("validation residual: {:.3e}", residual);
            } else {
                let datum = modular::best_modular_datum(&m)?;
                print_matrix("S", n, |j, h| datum.s_entry(j, h));
                let t = modular::t_matrix(&m);
                print_matrix("T", n, |j, h| {
                    if j == h {
                        t[j]
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                });
                println!("condition estimate: {:.3e}", datum.condition());
            }
            Ok(0)
        }
        Command::Branch { pair } => {
            let named = io::load_pair(&pair)?;
            let p = &named.pair;
            println!(
                "pair {}: {} -> {} x {} (glue index {})",
                named.name,
                p.full().name(),
                p.part(0).name(),
                p.part(1).name(),
                p.glue_index()
            );
            let matrices = p.all_branching_matrices()?;
            for r in &matrices {
                println!("module {}:", r.module());
                for row in r.rows() {
                    let cells: Vec<String> = row.iter().map(|e| e.to_string()).collect();
                    println!("  [{}]", cells.join(", "));
                }
            }
            let coverage = p.module_coverage()?;
            let describe = |witness: &Option<crate::branching::CoverageWitness>| match witness {
                Some(w) => format!("module {} (partner {})", w.module, w.partner),
                None => "UNCOVERED".to_owned(),
            };
            for (i, w) in coverage.part1.iter().enumerate() {
                println!("part1 module {i}: {}", describe(w));
            }
            for (i, w) in coverage.part2.iter().enumerate() {
                println!("part2 module {i}: {}", describe(w));
            }
            let (full, p1, p2) = (
                ModuleCharacterSet::new(p.full().clone()),
                ModuleCharacterSet::new(p.part(0).clone()),
                ModuleCharacterSet::new(p.part(1).clone()),
            );
            let d_full = modular::best_modular_datum(&full)?;
            let d1 = modular::best_modular_datum(&p1)?;
            let d2 = modular::best_modular_datum(&p2)?;
            let residuals = p.intertwining_residuals(&d_full, &d1, &d2)?;
            for (k, r) in residuals.iter().enumerate() {
                println!("intertwining residual module {k}: {:.3e}", r);
            }
            let worst = residuals.iter().copied().fold(0.0f64, f64::max);
            println!("max intertwining residual: {:.3e}", worst);
            Ok(0)
        }
        Command::Verify { suite, report, seed } => {
            let mut config = io::load_suite(suite.as_deref().unwrap_or("default"))?;
            if let Some(t) = cli.tol {
                config.override_tolerances(t);
            }
            if let Some(s) = seed {
                config.extend_with_seed(s, 2)?;
            }
            let result = verify::run_suite(&config)?;
            for r in &result.reports {
                println!(
                    "{}: {} (max residual {:.3e}, tolerance {:.1e}, {} samples, {:.2}s)",
                    r.check_name,
                    if r.passed { "PASS" } else { "FAIL" },
                    r.max_residual(),
                    r.tolerance,
                    r.residuals.len(),
                    r.wall_time.as_secs_f64(),
                );
            }
            let rejected = result.controls.iter().filter(|c| c.rejected).count();
            println!("negative controls rejected: {rejected}/{}", result.controls.len());
            for c in &result.controls {
                if !c.rejected {
                    println!(
                        "control {} NOT rejected (residual {:.3e})",
                        c.check_name, c.residual
                    );
                }
            }
            println!("suite: {}", if result.passed { "PASS" } else { "FAIL" });
            if let Some(path) = report {
                fs::write(&path, result.to_json()).map_err(|e| {
                    crate::error::Error::InvalidInput(format!("cannot write {path}: {e}"))
                })?;
            }
            Ok(if result.passed { 0 } else { 1 })
        }
    }
}
