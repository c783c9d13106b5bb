//! `mcouple` — build, verify and benchmark one-dimensional martingale
//! couplings between measures in convex order.
//!
//! Measures enter as JSON files `{"atoms":[{"x":…,"w":…}]}` and couplings
//! as `{"atoms":[{"x":…,"y":…,"w":…}]}`. Reports go to stdout as JSON with
//! sorted keys (or CSV with a header row); errors are structured JSON on
//! stderr. Exit codes: 0 success, 1 validation failure, 2 usage error.

use std::fs;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use mcouple::analysis;
use mcouple::lp::{self, ConstraintMode, CostSpec, LpStatus, Sense};
use mcouple::{
    build_kernel, build_submartingale, build_supermartingale, comonotone, lift_to_joint, sample,
    DiscreteMeasure, JointMeasure, QParam,
};

mod discretize;

#[derive(Parser)]
#[command(name = "mcouple", version, about, disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct PairArgs {
    /// First marginal (.measure.json)
    #[arg(long)]
    mu: String,
    /// Second marginal (.measure.json)
    #[arg(long)]
    nu: String,
}

#[derive(Args)]
struct OutArgs {
    /// Write output here instead of stdout
    #[arg(long)]
    out: Option<String>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CouplingKind {
    It,
    Nit,
    Product,
    Zeta,
    Mix,
    Comonotone,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LpMode {
    None,
    Martingale,
    Supermartingale,
    Submartingale,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LpSense {
    Min,
    Max,
}

#[derive(Subcommand)]
enum Command {
    /// Convex / decreasing / increasing convex order report
    OrderCheck {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Build a coupling from a parameter family
    Build {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long, value_enum)]
        coupling: CouplingKind,
        /// Mixture weight of the left component (mix only)
        #[arg(long)]
        lambda: Option<f64>,
        /// Left component of a mixture
        #[arg(long, value_enum)]
        left: Option<CouplingKind>,
        /// Right component of a mixture
        #[arg(long, value_enum)]
        right: Option<CouplingKind>,
        /// Also write the parameter itself as JSON
        #[arg(long)]
        q_out: Option<String>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Verify a coupling file against its marginals
    Verify {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long)]
        joint: String,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Transport costs of a coupling file for a list of exponents
    Cost {
        #[arg(long)]
        joint: String,
        /// Comma-separated exponents, e.g. 1,2
        #[arg(long, value_delimiter = ',', default_value = "1")]
        rho: Vec<f64>,
    },
    /// Cost / 2·W₁ bound report for a fresh build
    Bound {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long, value_enum, default_value_t = CouplingKind::It)]
        coupling: CouplingKind,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Irreducible component decomposition
    Decompose {
        #[command(flatten)]
        pair: PairArgs,
    },
    /// Inverse transform supermartingale coupling (mu <=_dcx nu)
    Supermartingale {
        #[command(flatten)]
        pair: PairArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Submartingale coupling by reflection (mu <=_icx nu)
    Submartingale {
        #[command(flatten)]
        pair: PairArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Exact transport LP over (super/sub)martingale couplings
    LpMartingale {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long, default_value_t = 1.0)]
        rho: f64,
        #[arg(long, value_enum, default_value_t = LpMode::Martingale)]
        mode: LpMode,
        #[arg(long, value_enum, default_value_t = LpSense::Min)]
        sense: LpSense,
    },
    /// C_ρ table across parameter families
    Crho {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
        rhos: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "it")]
        couplings: Vec<CouplingKind>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Marginal-stability experiment over a schedule of perturbed pairs
    Stability {
        #[command(flatten)]
        pair: PairArgs,
        /// JSON manifest {"pairs":[{"mu":path,"nu":path},…]}
        #[arg(long)]
        schedule: String,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Draw i.i.d. samples from a built coupling
    Sample {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long, value_enum, default_value_t = CouplingKind::It)]
        coupling: CouplingKind,
        #[arg(short, long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Equal-mass quantile-midpoint discretization of a named distribution
    Discretize {
        #[arg(long)]
        dist: String,
        /// Rate of the exponential distribution
        #[arg(long, default_value_t = 1.0)]
        rate: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        mean: f64,
        #[arg(long, default_value_t = 1.0)]
        std: f64,
        /// Lower endpoint of the uniform distribution
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        lo: f64,
        /// Upper endpoint of the uniform distribution
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        hi: f64,
        #[arg(short, long)]
        n: usize,
        #[arg(long)]
        out: Option<String>,
    },
}

fn default_tol() -> f64 {
    std::env::var("MCOUPLE_TOL")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(mcouple::error::DEFAULT_TOL)
}

fn read_measure(path: &str) -> Result<DiscreteMeasure, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("cannot read {path}: {e}"))?;
    DiscreteMeasure::from_json_str(&text).map_err(|e| format!("{path}: {e}"))
}

fn read_joint(path: &str) -> Result<JointMeasure, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("cannot read {path}: {e}"))?;
    JointMeasure::from_json_str(&text).map_err(|e| format!("{path}: {e}"))
}

/// Serializes with sorted keys (serde_json maps are ordered).
fn sorted_json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string(&serde_json::to_value(value).expect("serializable report"))
        .expect("JSON encoding")
}

/// Prints a line, swallowing broken pipes (e.g. output piped into `head`).
fn print_line(text: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout(), "{text}");
}

fn emit(out: &Option<String>, text: &str) -> Result<(), String> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| format!("cannot write {path}: {e}")),
        None => {
            print_line(text.trim_end());
            Ok(())
        }
    }
}

fn build_q(
    kind: CouplingKind,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    lambda: Option<f64>,
    left: Option<CouplingKind>,
    right: Option<CouplingKind>,
) -> Result<QParam, String> {
    let q = match kind {
        CouplingKind::It => mcouple::q_it(mu, nu),
        CouplingKind::Nit => mcouple::q_nit(mu, nu),
        CouplingKind::Product => mcouple::q_product(mu, nu),
        CouplingKind::Zeta => mcouple::q_zeta(mu, nu),
        CouplingKind::Mix => {
            let lambda = lambda.ok_or("mix needs --lambda")?;
            let left = left.ok_or("mix needs --left")?;
            let right = right.ok_or("mix needs --right")?;
            if matches!(left, CouplingKind::Mix | CouplingKind::Comonotone)
                || matches!(right, CouplingKind::Mix | CouplingKind::Comonotone)
            {
                return Err("mixture components must be base parameter kinds".into());
            }
            let l = build_q(left, mu, nu, None, None, None)?;
            let r = build_q(right, mu, nu, None, None, None)?;
            mcouple::q_mix(lambda, l, r)
        }
        CouplingKind::Comonotone => return Err("comonotone is not a parameter kind".into()),
    };
    q.map_err(|e| e.to_string())
}

fn build_joint(
    kind: CouplingKind,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    lambda: Option<f64>,
    left: Option<CouplingKind>,
    right: Option<CouplingKind>,
) -> Result<(JointMeasure, Option<QParam>), String> {
    if kind == CouplingKind::Comonotone {
        return Ok((comonotone(mu, nu), None));
    }
    let q = build_q(kind, mu, nu, lambda, left, right)?;
    let cells = build_kernel(&q, mu, nu).map_err(|e| e.to_string())?;
    Ok((lift_to_joint(&cells, mu), Some(q)))
}

fn run(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::OrderCheck { pair, tol } => {
            let mu = read_measure(&pair.mu)?;
            let nu = read_measure(&pair.nu)?;
            let report = mu.check_order(&nu, tol.unwrap_or_else(default_tol));
            print_line(&sorted_json(&report));
            Ok(())
        }
        Command::Build {
            pair,
            coupling,
            lambda,
            left,
            right,
            q_out,
            out,
        } => {
            let mu = read_measure(&pair.mu)?;
            let nu = read_measure(&pair.nu)?;
            let (joint, q) = build_joint(coupling, &mu, &nu, lambda, left, right)?;
            if let Some(path) = q_out {
                let q = q.ok_or("comonotone has no parameter to write")?;
                fs::write(&path, q.to_json_string())
                    .map_err(|e| format!("cannot write {path}: {e}"))?;
            }
            let text = match out.format {
                Format::Json => joint.to_json_string(),
                Format::Csv => joint.to_csv_string(),
            };
            emit(&out.out, &text)
        }
        Command::Verify { pair, joint, tol } => {
            let mu = read_measure(&pair.mu)?;
            let nu = read_measure(&pair.nu)?;
            let j = read_joint(&joint)?;
            let report = analysis::verify_coupling(&j, &mu, &nu, tol.unwrap_or_else(default_tol));
            print_line(&sorted_json(&report));
            Ok(())
        }
        Command::Cost { joint, rho } => {
            let j = read_joint(&joint)?;
            let costs: Vec<Value> = rho
                .iter()
                .map(|&r| json!({"rho": r, "value": analysis::cost(&j, r)}))
                .collect();
            print_line(&serde_json::to_string(&json!({ "costs": costs })).unwrap());
            Ok(())
        }
        Command::Bound {
            pair,
            coupling,
            tol,
        } => {
            let mu = read_measure(&pair.mu)?;
            let nu = read_measure(&pair.nu)?;
            let (joint, _) = build_joint(coupling, &mu, &nu, None, None, None)?;
            let report = analysis::verify_coupling(&joint, &mu, &nu, tol.unwrap_or_else(default_tol));
            let doc = json!({
                "cost1": report.cost1,
                "w1": report.w1,
                "ratio": report.ratio,
                "holds": report.bound_2w1_holds,
            });
            print_line(&serde_json::to_string(&doc).unwrap());
            Ok(())
        }
        Command::Decompose { pair } => {
            let mu = read_measure(&pair.mu)?;
            let nu = read_measure(&pair.nu)?;
            let dec = analysis::irreducible_components(&mu, &nu).map_err(|e| e.to_string())?;
            let comps: Vec<Value> = dec
                .components
                .iter()
                .map(|c| {
                    json!({
                        "t_low": c.t_low,
                        "t_high": c.t_high,
                        "mass": c.mass,
                        "mu": serde_json::from_str::<Value>(&c.mu_n.to_json_string()).unwrap(),
                        "nu": serde_json::from_str::<Value>(&c.nu_n.to_json_string()).unwrap(),
                    })
                })
                .collect();
            print_line(&serde_json::to_string(&json!({ "components": comps })).unwrap());
            Ok(())
        }
        Command::Supermartingale { pair, out } => {
            let mu = read_measure(&pair.mu)?;
            let nu = read_measure(&pair.nu)?;
            let joint = build_supermartingale(&mu, &nu).map_err(|e| e.to_string())?;
            let text = match out.format {
                Format::Json => joint.to_json_string(),
                Format::Csv => joint.to_csv_string(),
            };
            emit(&out.out, &text)
        }
        Command::Submartingale { pair, out } => {
            let mu = read_measure(&pair.mu)?;
            let nu = read_measure(&pair.nu)?;
            let joint = build_submartingale(&mu, &nu).map_err(|e| e.to_string())?;
            let text = match out.format {
                Format::Json => joint.to_json_string(),
                Format::Csv => joint.to_csv_string(),
            };
            emit(&out.out, &text)
        }
        Command::LpMartingale {
            pair,
            rho,
            mode,
            sense,
        } => {
            let mu = read_measure(&pair.mu)?;
            let nu = read_measure(&pair.nu)?;
            let mode = match mode {
                LpMode::None => ConstraintMode::None,
                LpMode::Martingale => ConstraintMode::Martingale,
                LpMode::Supermartingale => ConstraintMode::Supermartingale,
                LpMode::Submartingale => ConstraintMode::Submartingale,
            };
            let sense = match sense {
                LpSense::Min => Sense::Min,
                LpSense::Max => Sense::Max,
            };
            let sol = lp::min_cost_coupling(&mu, &nu, &CostSpec::Rho(rho), mode, sense)
                .map_err(|e| e.to_string())?;
            let status = match sol.status {
                LpStatus::Optimal => "optimal",
                LpStatus::Infeasible => "infeasible",
                LpStatus::Unbounded => "unbounded",
            };
            let doc = if sol.status == LpStatus::Optimal {
                json!({"value": sol.value, "status": status})
            } else {
                json!({"value": null, "status": status})
            };
            print_line(&serde_json::to_string(&doc).unwrap());
            Ok(())
        }
        Command::Crho {
            pair,
            rhos,
            couplings,
            out,
        } => {
            let mu = read_measure(&pair.mu)?;
            let nu = read_measure(&pair.nu)?;
            let qs: Vec<QParam> = couplings
                .iter()
                .map(|&k| build_q(k, &mu, &nu, None, None, None))
                .collect::<Result<_, _>>()?;
            let table =
                analysis::crho_extremality(&mu, &nu, &qs, &rhos).map_err(|e| e.to_string())?;
            let text = match out.format {
                Format::Csv => {
                    let mut s = String::from("coupling,rho,c_rho\n");
                    for row in &table.rows {
                        for (k, &rho) in table.rhos.iter().enumerate() {
                            s.push_str(&format!("{},{},{}\n", row.label, rho, row.values[k]));
                        }
                    }
                    s
                }
                Format::Json => {
                    let rows: Vec<Value> = table
                        .rows
                        .iter()
                        .map(|r| json!({"coupling": r.label, "values": r.values}))
                        .collect();
                    serde_json::to_string(&json!({"rhos": table.rhos, "rows": rows})).unwrap()
                }
            };
            emit(&out.out, &text)
        }
        Command::Stability {
            pair,
            schedule,
            out,
        } => {
            let mu = read_measure(&pair.mu)?;
            let nu = read_measure(&pair.nu)?;
            let manifest: Value = serde_json::from_str(
                &fs::read_to_string(&schedule)
                    .map_err(|e| format!("cannot read {schedule}: {e}"))?,
            )
            .map_err(|e| format!("{schedule}: {e}"))?;
            let pairs = manifest["pairs"]
                .as_array()
                .ok_or("schedule manifest needs a \"pairs\" array")?;
            let mut entries = Vec::with_capacity(pairs.len());
            for p in pairs {
                let mu_path = p["mu"].as_str().ok_or("schedule entry needs \"mu\"")?;
                let nu_path = p["nu"].as_str().ok_or("schedule entry needs \"nu\"")?;
                entries.push((read_measure(mu_path)?, read_measure(nu_path)?));
            }
            let rows =
                analysis::stability_experiment(&mu, &nu, &entries).map_err(|e| e.to_string())?;
            let text = match out.format {
                Format::Csv => {
                    let mut s = String::from("w1_mu,w1_nu,w1_joint\n");
                    for r in &rows {
                        s.push_str(&format!("{},{},{}\n", r.w1_mu, r.w1_nu, r.w1_joint));
                    }
                    s
                }
                Format::Json => sorted_json(&rows),
            };
            emit(&out.out, &text)
        }
        Command::Sample {
            pair,
            coupling,
            n,
            seed,
            out,
        } => {
            if n == 0 {
                return Err("need n >= 1".into());
            }
            let mu = read_measure(&pair.mu)?;
            let nu = read_measure(&pair.nu)?;
            if coupling == CouplingKind::Comonotone {
                return Err("sampling works on parameter-built kernels; use build for the comonotone coupling".into());
            }
            let q = build_q(coupling, &mu, &nu, None, None, None)?;
            let cells = build_kernel(&q, &mu, &nu).map_err(|e| e.to_string())?;
            let draws = sample(&cells, &mu, n, seed);
            let text = match out.format {
                Format::Csv => {
                    let mut s = String::from("x,y\n");
                    for (x, y) in &draws {
                        s.push_str(&format!("{x},{y}\n"));
                    }
                    s
                }
                Format::Json => serde_json::to_string(&draws).unwrap(),
            };
            emit(&out.out, &text)
        }
        Command::Discretize {
            dist,
            rate,
            mean,
            std,
            lo,
            hi,
            n,
            out,
        } => {
            let m = discretize::discretize(&dist, rate, mean, std, lo, hi, n)
                .map_err(|e| e.to_string())?;
            emit(&out, &m.to_json_string())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            let doc = json!({"error": "validation", "message": message});
            eprintln!("{}", serde_json::to_string(&doc).unwrap());
            ExitCode::FAILURE
        }
    }
}
