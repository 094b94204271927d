mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use config::{Format, Overrides, RunConfig};
use definetti_core::definetti::{theorem_bounds, verify_theorem, VerifyOptions};
use definetti_core::extension::{
    detect_entanglement, extendible_distance_bounds, DetectOptions, Metric, SolveOptions, Verdict,
};
use definetti_core::io;
use definetti_core::linalg::EIG_CUTOFF;
use definetti_core::measurement::{seesaw, write_witness, MeasurementClass, Objective, SeesawOptions};
use definetti_core::sos::{self, OracleOptions, SphereProblem, Variant};
use definetti_core::state::{random_state, Ensemble};
use definetti_core::sweeps;
use definetti_core::Error;

const EXIT_POSITIVE: u8 = 1;
const EXIT_UNDECIDED: u8 = 2;
const EXIT_INPUT: u8 = 3;
const EXIT_RESOURCE: u8 = 4;

#[derive(Parser)]
#[command(name = "definetti", version, about = "De Finetti bounds, one-way LOCC distinguishability and symmetric-extension tests")]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum EnsembleArg {
    HaarPure,
    HilbertSchmidt,
    BoseSymmetric,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Norm,
    Relent,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Which {
    Lemma2,
    Lemma3,
    Pinsker,
    Nesting,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Symmetric-extension test at the level the target accuracy requires.
    DetectEntanglement {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        epsilon: f64,
        #[arg(long, value_parser = parse_metric)]
        metric: Metric,
        /// Override the level derived from epsilon.
        #[arg(long)]
        level: Option<usize>,
    },
    /// Distance bounds between the k-marginal of an n-system symmetric state and de Finetti states.
    DefinettiBound {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        dim: usize,
    },
    /// Build the de Finetti candidate for a symmetric state and estimate its distance.
    Verify {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        k: usize,
    },
    /// Seesaw lower bound on a restricted distinguishability measure.
    LoccNorm {
        #[arg(long)]
        rho: PathBuf,
        #[arg(long)]
        sigma: PathBuf,
        #[arg(long, value_parser = parse_class, default_value = "one-way-full")]
        class: MeasurementClass,
        #[arg(long, value_enum, default_value = "norm")]
        objective: ObjectiveArg,
        /// Directory to write the witness measurement into.
        #[arg(long)]
        witness_out: Option<PathBuf>,
    },
    /// Product-vector optimum of a quadratic form against its level-l relaxation.
    SosOpt {
        #[arg(long)]
        objective: PathBuf,
        #[arg(long, value_parser = parse_variant)]
        variant: Variant,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        level: usize,
        /// Asserts {M, 1-M} is a one-way measurement (not checked).
        #[arg(long)]
        one_way: bool,
    },
    /// Randomized sweeps over the chain identity, pigeonhole bound, Pinsker and class nesting.
    VerifyLemmas {
        #[arg(long, value_enum, default_value = "all")]
        which: Which,
        /// Trials per sweep; each sweep has its own default.
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Write a random state file.
    GenState {
        #[arg(long, value_enum)]
        ensemble: EnsembleArg,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        dim: usize,
        /// Pure states averaged per Bose-symmetric sample.
        #[arg(long, default_value_t = Ensemble::DEFAULT_BOSE_MIX)]
        mix: usize,
        /// Output path; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_metric(s: &str) -> Result<Metric, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_class(s: &str) -> Result<MeasurementClass, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// A finished command: its document, human lines and exit status.
struct Outcome {
    json: serde_json::Value,
    human: Vec<String>,
    code: u8,
}

#[derive(Serialize)]
struct Document<'a, P: Serialize, R: Serialize> {
    command: &'static str,
    config: &'a RunConfig,
    /// Eigenvalues at or below this are treated as zero in every entropy.
    entropy_cutoff: f64,
    params: P,
    result: R,
}

fn document<P: Serialize, R: Serialize>(command: &'static str, cfg: &RunConfig, params: P, result: R) -> serde_json::Value {
    serde_json::to_value(Document {
        command,
        config: cfg,
        entropy_cutoff: EIG_CUTOFF,
        params,
        result,
    })
    .expect("reports serialize")
}

/// Shortest decimal for `x` rounded to five places.
fn r5(x: f64) -> String {
    format!("{}", (x * 1e5).round() / 1e5)
}

fn seesaw_options(cfg: &RunConfig) -> SeesawOptions {
    SeesawOptions {
        restarts: cfg.restarts,
        iterations: cfg.iterations,
        seed: cfg.seed,
        ..Default::default()
    }
}

fn run(cmd: Command, cfg: &RunConfig) -> Result<Outcome, Error> {
    match cmd {
        Command::DetectEntanglement {
            state,
            epsilon,
            metric,
            level,
        } => {
            let rho = io::read_state(&state)?;
            let opts = DetectOptions {
                solve: SolveOptions {
                    affine_tol: cfg.affine_tol,
                    cone_tol: cfg.cone_tol,
                    max_iter: cfg.max_iter,
                    seed: cfg.seed,
                    stall_window: cfg.stall_window,
                },
                level,
                max_dim: cfg.max_dim,
            };
            let r = detect_entanglement(&rho, epsilon, metric, &opts)?;
            let k = rho.num_subsystems();
            let bounds = if r.level > k {
                Some(extendible_distance_bounds(k, r.level, rho.dims())?)
            } else {
                None
            };
            let verdict = match r.verdict {
                Verdict::SeparableWithinEpsilon => "SEPARABLE-WITHIN-EPSILON",
                Verdict::Entangled => "ENTANGLED",
                Verdict::Undecided => "UNDECIDED",
            };
            let mut human = vec![
                format!("verdict: {verdict}"),
                format!(
                    "extension level: {} (accuracy {epsilon} in {} needs {})",
                    r.level,
                    if metric == Metric::Norm { "one-way norm" } else { "one-way relative entropy" },
                    r.required_level
                ),
                format!("iterations: {}", r.result.iterations),
                format!("affine residual: {:.3e}", r.result.affine_residual),
                format!("cone residual: {:.3e}", r.result.cone_residual),
            ];
            if let Some(s) = r.result.separation_residual {
                human.push(format!("separation residual: {s:.3e}"));
                human.push(format!(
                    "certificate validated on samples: {}",
                    r.result.certificate_validated.unwrap_or(false)
                ));
            }
            if let Some(b) = bounds {
                human.push(format!(
                    "any {}-extendible state is within {} bits (relative entropy) and {} (norm) of separable",
                    r.level,
                    r5(b.relent_bits),
                    r5(b.norm)
                ));
            }
            let code = match r.verdict {
                Verdict::SeparableWithinEpsilon => 0,
                Verdict::Entangled => EXIT_POSITIVE,
                Verdict::Undecided => EXIT_UNDECIDED,
            };
            let params = serde_json::json!({"state": state, "epsilon": epsilon, "metric": metric, "level": level});
            let result = serde_json::json!({"detection": r, "extendible_bounds": bounds});
            Ok(Outcome {
                json: document("detect-entanglement", cfg, params, result),
                human,
                code,
            })
        }
        Command::DefinettiBound { n, k, dim } => {
            let b = theorem_bounds(n, k, dim)?;
            let human = vec![
                format!("relative entropy to de Finetti states (k = {k} of n = {n}, dim {dim}): {} bits", r5(b.relent_bits)),
                format!("one-way norm distance to de Finetti states: {}", r5(b.norm)),
            ];
            let params = serde_json::json!({"n": n, "k": k, "dim": dim});
            Ok(Outcome {
                json: document("definetti-bound", cfg, params, b),
                human,
                code: 0,
            })
        }
        Command::Verify { state, k } => {
            let rho = io::read_state(&state)?;
            let opts = VerifyOptions {
                seed: cfg.seed,
                restarts: cfg.restarts,
                iterations: cfg.iterations,
                qstar_restarts: cfg.qstar_restarts,
            };
            let r = verify_theorem(&rho, k, &opts)?;
            let human = vec![
                format!("pass: {}", r.pass),
                format!("de Finetti components: {}", r.candidate.weights.len()),
                format!(
                    "one-way norm distance (seesaw lower bound): {:.6} <= bound {}",
                    r.distance_estimate,
                    r5(r.bounds.norm)
                ),
                format!(
                    "one-way relative entropy (seesaw lower bound): {:.6} bits <= bound {} bits",
                    r.relent_estimate.bits(),
                    r5(r.bounds.relent_bits)
                ),
                format!("unmeasured block: {}", r.qstar.block_star),
            ];
            let code = if r.pass { 0 } else { EXIT_POSITIVE };
            let params = serde_json::json!({"state": state, "k": k});
            Ok(Outcome {
                json: document("verify", cfg, params, r),
                human,
                code,
            })
        }
        Command::LoccNorm {
            rho,
            sigma,
            class,
            objective,
            witness_out,
        } => {
            let a = io::read_state(&rho)?;
            let b = io::read_state(&sigma)?;
            let obj = match objective {
                ObjectiveArg::Norm => Objective::Norm,
                ObjectiveArg::Relent => Objective::RelativeEntropy,
            };
            let r = seesaw(&a, &b, class, obj, &seesaw_options(cfg), None)?;
            if let Some(dir) = &witness_out {
                write_witness(dir, &r.witness, a.dims())?;
            }
            let what = match objective {
                ObjectiveArg::Norm => "restricted norm",
                ObjectiveArg::Relent => "restricted relative entropy (bits)",
            };
            let human = vec![
                format!("{what} under {} (lower bound): {}", class.name(), r.value),
                format!("converged: {}", r.converged),
            ];
            let params = serde_json::json!({
                "rho": rho, "sigma": sigma, "class": class,
                "objective": match objective { ObjectiveArg::Norm => "norm", ObjectiveArg::Relent => "relent" },
                "witness_out": witness_out,
            });
            let result = serde_json::json!({"value": r.value, "converged": r.converged, "best_restart": r.best_restart});
            Ok(Outcome {
                json: document("locc-norm", cfg, params, result),
                human,
                code: 0,
            })
        }
        Command::SosOpt {
            objective,
            variant,
            k,
            level,
            one_way,
        } => {
            let (dims, m) = io::read_operator(&objective)?;
            if dims.len() != k || dims.iter().any(|&d| d != dims[0]) {
                return Err(Error::Format(format!(
                    "field `dims`: expected {k} equal local dimensions, got {dims:?}"
                )));
            }
            let p = SphereProblem::new(m, dims[0], k, variant, one_way)?;
            let opts = OracleOptions {
                restarts: cfg.oracle_restarts,
                iterations: cfg.oracle_iterations,
                seed: cfg.seed,
            };
            let relax = sos::relax_capped(&p, level, cfg.max_dim)?;
            let s = sos::sandwich_check(&p, level, &opts)?;
            let mut human = vec![
                format!("pass: {}", s.pass),
                format!("relaxation value at level {level}: {:.10}", s.relax),
                format!("product oracle (lower bound): {:.10}", s.oracle),
            ];
            if let Some(g) = s.gap_bound {
                human.push(format!("additive gap bound: {g:.10}"));
            }
            if s.guarantee_conditional {
                human.push("note: the gap guarantee assumes {M, 1-M} is a one-way measurement (pass --one-way to assert it)".into());
            }
            let code = if s.pass { 0 } else { EXIT_POSITIVE };
            let params = serde_json::json!({"objective": objective, "variant": variant, "k": k, "level": level, "one_way": one_way});
            let result = serde_json::json!({"sandwich": s, "power_iteration_value": relax.power_value});
            Ok(Outcome {
                json: document("sos-opt", cfg, params, result),
                human,
                code,
            })
        }
        Command::VerifyLemmas { which, trials } => {
            let on = |w: Which| which == w || which == Which::All;
            let mut human = Vec::new();
            let mut result = serde_json::Map::new();
            let mut pass = true;
            if on(Which::Lemma2) {
                let r = sweeps::chain_identity_sweep(trials.unwrap_or(200), cfg.seed)?;
                human.push(format!(
                    "chain identity over {} trials: max residual {:.3e} (sub-identities {:.3e}, {:.3e}) pass {}",
                    r.trials, r.max_residual, r.max_split_residual, r.max_conditional_residual, r.pass
                ));
                pass &= r.pass;
                result.insert("lemma2".into(), serde_json::to_value(r).expect("serializes"));
            }
            if on(Which::Lemma3) {
                let r = sweeps::pigeonhole_sweep(trials.unwrap_or(100), 3, cfg.seed)?;
                human.push(format!(
                    "pigeonhole over {} trials: max min-term {:.6} <= {:.6}, chain residual {:.3e} pass {}",
                    r.trials, r.max_min_term, r.bound, r.max_chain_residual, r.pass
                ));
                pass &= r.pass;
                result.insert("lemma3".into(), serde_json::to_value(r).expect("serializes"));
            }
            if on(Which::Pinsker) {
                let r = sweeps::pinsker_sweep(trials.unwrap_or(500), cfg.seed)?;
                human.push(format!(
                    "Pinsker and data processing over {} trials: min slack {:.3e}, max processing gain {:.3e} pass {}",
                    r.trials, r.min_pinsker_slack, r.max_processing_gain, r.pass
                ));
                pass &= r.pass;
                result.insert("pinsker".into(), serde_json::to_value(r).expect("serializes"));
            }
            if on(Which::Nesting) {
                let r = sweeps::nesting_sweep(trials.unwrap_or(50), cfg.seed, &seesaw_options(cfg))?;
                human.push(format!(
                    "class nesting over {} trials: embedding gap {:.3e}, min full excess {:.3e} pass {}",
                    r.trials, r.max_embedding_gap, r.min_full_excess, r.pass
                ));
                pass &= r.pass;
                result.insert("nesting".into(), serde_json::to_value(r).expect("serializes"));
            }
            result.insert("pass".into(), pass.into());
            let which_name = which.to_possible_value().expect("named").get_name().to_owned();
            let params = serde_json::json!({"which": which_name, "trials": trials});
            Ok(Outcome {
                json: document("verify-lemmas", cfg, params, result),
                human,
                code: if pass { 0 } else { EXIT_POSITIVE },
            })
        }
        Command::GenState {
            ensemble,
            n,
            dim,
            mix,
            out,
        } => {
            let e = match ensemble {
                EnsembleArg::HaarPure => Ensemble::HaarPure,
                EnsembleArg::HilbertSchmidt => Ensemble::HilbertSchmidtMixed,
                EnsembleArg::BoseSymmetric => Ensemble::BoseSymmetric { mix },
            };
            let total = (dim as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
            if total > cfg.max_dim as u128 {
                return Err(Error::Resource {
                    what: format!("state on {n} systems of dimension {dim}"),
                    required: total,
                    available: cfg.max_dim as u128,
                });
            }
            let rho = random_state(&vec![dim; n], cfg.seed, e)?;
            let text = io::format_state(&rho);
            match &out {
                Some(path) => {
                    std::fs::write(path, &text)?;
                    let params = serde_json::json!({"ensemble": e, "n": n, "dim": dim, "out": path});
                    Ok(Outcome {
                        json: document("gen-state", cfg, params, serde_json::json!({"purity": rho.purity()})),
                        human: vec![format!("wrote {}", path.display())],
                        code: 0,
                    })
                }
                None => {
                    let _ = std::io::stdout().lock().write_all(text.as_bytes());
                    Ok(Outcome {
                        json: serde_json::Value::Null,
                        human: Vec::new(),
                        code: 0,
                    })
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT } else { 0 });
        }
    };
    let cfg = match RunConfig::resolve(&cli.overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: config: {e}");
            return ExitCode::from(EXIT_INPUT);
        }
    };
    match run(cli.command, &cfg) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            // a closed pipe only loses the report, not the verdict
            let _ = match cfg.format {
                Format::Json if !out.json.is_null() => {
                    writeln!(stdout, "{}", serde_json::to_string_pretty(&out.json).expect("serializes"))
                }
                _ => out.human.iter().try_for_each(|l| writeln!(stdout, "{l}")),
            };
            ExitCode::from(out.code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Resource { .. } => EXIT_RESOURCE,
                _ => EXIT_INPUT,
            })
        }
    }
}
