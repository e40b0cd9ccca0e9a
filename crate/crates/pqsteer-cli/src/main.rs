//! Command-line front end: validate assemblage files, run the activation
//! demo and pipeline, emit self-testing and other certificates, reconstruct
//! quantum realizations, and drive the see-saw optimizer.
//!
//! Exit codes: 0 success / certified pass, 1 certified fail, 2 input error,
//! 3 inconclusive.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use pqsteer::activation::{
    activate_with, build_network_correlations, CharlieMeasurements, ToleranceSet, Verdict,
};
use pqsteer::assemblage::{Assemblage, BipartiteAssemblage, NetworkAssemblage};
use pqsteer::certify::{
    classical_bound, extremality_certificate, independence_check, network_selftest_certificate,
    optimal_selftest_correlations, optimal_selftest_observables, quantum_nonnegativity_sweep,
    selftest_certificate, SweepConfig,
};
use pqsteer::error::Error;
use pqsteer::functionals::{
    decompose_to_bell, icd_expression, CdCorrelations, SteeringFunctional,
};
use pqsteer::quantum::{
    assemblage_from_model, ghjw_realization, ghz_model, pr_box_assemblage, reference_assemblage,
};
use pqsteer::seesaw::{
    seesaw_activated_bell, seesaw_correlator, Direction, SeesawConfig, SeesawOutcome,
};

const EXIT_PASS: u8 = 0;
const EXIT_FAIL: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_INCONCLUSIVE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "pqsteer",
    about = "Steering assemblages: validation, network activation, certificates",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Clone)]
struct OutputArgs {
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Check an assemblage file against its constraints.
    Validate {
        #[arg(long)]
        input: PathBuf,
        /// Feasibility tolerance override.
        #[arg(long)]
        tol: Option<f64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// End-to-end activation demo on the shipped no-signalling assemblage.
    Demo {
        /// Branch mixing parameter of the reference resource.
        #[arg(long, default_value_t = 0.0)]
        r: f64,
        /// Verdict tolerance override.
        #[arg(long)]
        tol: Option<f64>,
        /// Seed recorded in the report (the demo itself is deterministic).
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Run the quantum baseline model instead of the demo assemblage.
        #[arg(long)]
        quantum_baseline: bool,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Activate an assemblage file against a steering functional file.
    Activate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        functional: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        r: f64,
        /// Embed into n qubits instead of the minimal ceil(log2 d).
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Self-testing certificate of a correlation table (default: the
    /// shipped optimal model).
    Selftest {
        /// Correlation table file p(cd|zw); omitted = optimal fixture.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Score tolerance around the maximal violation.
        #[arg(long, default_value_t = 1e-6)]
        eps: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// See-saw optimization of a Bell objective.
    Seesaw {
        #[arg(long, value_enum)]
        objective: Objective,
        #[arg(long, value_enum, default_value = "maximize")]
        direction: DirectionArg,
        #[arg(long, default_value_t = 16)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Branch parameter for the activated objective.
        #[arg(long, default_value_t = 0.0)]
        r: f64,
        /// Steering functional file for the activated objective
        /// (default: the shifted-CHSH functional).
        #[arg(long)]
        functional: Option<PathBuf>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Quantum realization of a bipartite assemblage file.
    Ghjw {
        #[arg(long)]
        input: PathBuf,
        /// Write the reconstructed model here.
        #[arg(long)]
        model_out: Option<PathBuf>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Extremality / independence / non-negativity certificates.
    Certify {
        #[arg(long, value_enum)]
        kind: CertifyKind,
        /// Bipartite assemblage (extremality) or network assemblage
        /// (independence).
        #[arg(long)]
        input: Option<PathBuf>,
        /// Bipartite resource for the independence check.
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Steering functional for the non-negativity sweep
        /// (default: shifted CHSH).
        #[arg(long)]
        functional: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Objective {
    Chsh,
    Icd,
    Activated,
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionArg {
    Maximize,
    Minimize,
}

#[derive(Clone, Copy, ValueEnum)]
enum CertifyKind {
    Extremality,
    Independence,
    Nonnegativity,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            let (code, tag) = error_exit(&e);
            let envelope = json!({ "error": { "code": tag, "message": e.to_string() } });
            eprintln!("{}", envelope);
            ExitCode::from(code)
        }
    }
}

fn error_exit(e: &Error) -> (u8, &'static str) {
    match e {
        Error::Parse(_) | Error::Json(_) | Error::Io(_) | Error::Missing(_) => {
            (EXIT_INPUT, "parse-error")
        }
        Error::DimensionMismatch(_) | Error::InvalidParameter(_) => (EXIT_INPUT, "invalid-input"),
        Error::NotHermitian(_) | Error::NotPsd(_) => (EXIT_INPUT, "invalid-input"),
        Error::Validation(_) | Error::Inconsistent(_) => (EXIT_FAIL, "validation-failed"),
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Validate { input, tol, output } => cmd_validate(&input, tol, &output),
        Command::Demo {
            r,
            tol,
            seed,
            quantum_baseline,
            output,
        } => cmd_demo(r, tol, seed, quantum_baseline, &output),
        Command::Activate {
            input,
            functional,
            r,
            n,
            tol,
            output,
        } => cmd_activate(&input, &functional, r, n, tol, &output),
        Command::Selftest { input, eps, output } => cmd_selftest(input.as_deref(), eps, &output),
        Command::Seesaw {
            objective,
            direction,
            restarts,
            seed,
            r,
            functional,
            output,
        } => cmd_seesaw(objective, direction, restarts, seed, r, functional.as_deref(), &output),
        Command::Ghjw {
            input,
            model_out,
            output,
        } => cmd_ghjw(&input, model_out.as_deref(), &output),
        Command::Certify {
            kind,
            input,
            reference,
            functional,
            trials,
            seed,
            output,
        } => cmd_certify(
            kind,
            input.as_deref(),
            reference.as_deref(),
            functional.as_deref(),
            trials,
            seed,
            &output,
        ),
    }
}

/// Distinguishes the three assemblage schemas by their element keys.
fn sniff_kind(path: &Path) -> Result<&'static str, Error> {
    let text = std::fs::read_to_string(path)?;
    let doc: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {}", path.display(), e)))?;
    let first = doc
        .get("elements")
        .and_then(|e| e.as_array())
        .and_then(|a| a.first())
        .ok_or_else(|| Error::Parse("file has no elements array".into()))?;
    let has = |k: &str| first.get(k).is_some();
    if has("a") && has("d") {
        Ok("network")
    } else if has("a") {
        Ok("tripartite")
    } else if has("d") {
        Ok("bipartite")
    } else {
        Err(Error::Parse("unrecognized element keys".into()))
    }
}

fn cmd_validate(input: &Path, tol: Option<f64>, output: &OutputArgs) -> Result<u8, Error> {
    let tol = tol.unwrap_or(pqsteer::mat::FEASIBILITY_TOL);
    let kind = sniff_kind(input)?;
    let (report, warnings) = match kind {
        "tripartite" => {
            let loaded = Assemblage::load(input)?;
            (loaded.value.validate_with_tol(tol), loaded.warnings)
        }
        "bipartite" => {
            let loaded = BipartiteAssemblage::load(input)?;
            (loaded.value.validate_with_tol(tol), loaded.warnings)
        }
        _ => {
            let loaded = NetworkAssemblage::load(input)?;
            (loaded.value.validate_with_tol(tol), loaded.warnings)
        }
    };
    let pass = report.pass;
    let doc = json!({
        "command": "validate",
        "input": input.display().to_string(),
        "kind": kind,
        "warnings": warnings,
        "report": report,
    });
    let csv = vec![
        ("kind".to_string(), kind.to_string()),
        ("pass".to_string(), pass.to_string()),
        ("tolerance".to_string(), format!("{:e}", report.tolerance)),
        (
            "worst_violation".to_string(),
            format!("{:e}", report.worst_violation()),
        ),
    ];
    emit(output, &doc, csv)?;
    Ok(if pass { EXIT_PASS } else { EXIT_FAIL })
}

fn cmd_demo(
    r: f64,
    tol: Option<f64>,
    seed: u64,
    quantum_baseline: bool,
    output: &OutputArgs,
) -> Result<u8, Error> {
    let mut tolerances = ToleranceSet::default();
    if let Some(t) = tol {
        tolerances.verdict = t;
    }
    let asm = if quantum_baseline {
        assemblage_from_model(&ghz_model(), 2)?
    } else {
        pr_box_assemblage()
    };
    let functional = pqsteer::functionals::shifted_chsh_functional(2);
    let activation = activate_with(&asm, &functional, r, tolerances)?;

    // Self-testing stage: the fixture model's correlations, plus the same
    // score read off the four-party table at the transposed-branch
    // reference the fixture realizes.
    let selftest = selftest_certificate(&optimal_selftest_correlations(), 1e-6)?;
    let reference = reference_assemblage(1, 0.0)?;
    let mut charlie = CharlieMeasurements::readout_only(2, 1)?;
    for obs in optimal_selftest_observables() {
        charlie.push_cprime_observable(2, &obs)?;
    }
    let charlie = charlie.star_last();
    let corr = build_network_correlations(&asm, reference.as_bipartite(), &charlie)?;
    let network_selftest = network_selftest_certificate(&corr, 1e-6)?;

    let post_quantum = activation.verdict == Verdict::PostQuantum;
    let pass = post_quantum && selftest.pass;
    let doc = json!({
        "command": "demo",
        "seed": seed,
        "quantum_baseline": quantum_baseline,
        "activation": activation,
        "selftest": selftest,
        "network_selftest": network_selftest,
    });
    let csv = vec![
        ("r".to_string(), format!("{}", r)),
        (
            "steering_value".to_string(),
            format!("{:.15}", activation.steering_value),
        ),
        (
            "bell_value".to_string(),
            format!("{:.15}", activation.bell_value),
        ),
        (
            "verdict".to_string(),
            format!("{:?}", activation.verdict).to_lowercase(),
        ),
        (
            "selftest_score".to_string(),
            format!("{:.15}", selftest.score),
        ),
        ("selftest_pass".to_string(), selftest.pass.to_string()),
    ];
    emit(output, &doc, csv)?;
    Ok(if pass {
        EXIT_PASS
    } else if !post_quantum {
        EXIT_INCONCLUSIVE
    } else {
        EXIT_FAIL
    })
}

fn cmd_activate(
    input: &Path,
    functional_path: &Path,
    r: f64,
    n: Option<usize>,
    tol: Option<f64>,
    output: &OutputArgs,
) -> Result<u8, Error> {
    let mut tolerances = ToleranceSet::default();
    if let Some(t) = tol {
        tolerances.verdict = t;
    }
    let asm = Assemblage::load(input)?;
    let functional = SteeringFunctional::load(functional_path)?;
    let report = match n {
        // Explicit qubit count: embed into 2^n before activating.
        Some(n) => {
            let target = 1usize
                .checked_shl(n as u32)
                .filter(|&t| t >= asm.value.scenario.d_c)
                .ok_or_else(|| {
                    Error::InvalidParameter(format!(
                        "cannot embed dimension {} into 2^{}",
                        asm.value.scenario.d_c, n
                    ))
                })?;
            let padded_asm = pqsteer::activation::embed_assemblage(&asm.value, target)?;
            let padded_f = functional.value.pad_to(target)?;
            pqsteer::activation::activate_with(&padded_asm, &padded_f, r, tolerances)?
        }
        None => pqsteer::activation::activate_n_with(&asm.value, &functional.value, r, tolerances)?,
    };
    let post_quantum = report.verdict == Verdict::PostQuantum;
    let doc = json!({
        "command": "activate",
        "input": input.display().to_string(),
        "functional": functional_path.display().to_string(),
        "warnings": asm.warnings,
        "report": report,
    });
    let csv = vec![
        ("n".to_string(), report.n.to_string()),
        ("r".to_string(), format!("{}", report.r)),
        (
            "steering_value".to_string(),
            format!("{:.15}", report.steering_value),
        ),
        (
            "bell_value".to_string(),
            format!("{:.15}", report.bell_value),
        ),
        (
            "verdict".to_string(),
            format!("{:?}", report.verdict).to_lowercase(),
        ),
        ("input_digest".to_string(), report.input_digest.clone()),
    ];
    emit(output, &doc, csv)?;
    Ok(if post_quantum {
        EXIT_PASS
    } else {
        EXIT_INCONCLUSIVE
    })
}

fn cmd_selftest(input: Option<&Path>, eps: f64, output: &OutputArgs) -> Result<u8, Error> {
    let (corr, source) = match input {
        Some(path) => (CdCorrelations::load(path)?, path.display().to_string()),
        None => (optimal_selftest_correlations(), "optimal-fixture".into()),
    };
    let validation = corr.validate();
    let cert = selftest_certificate(&corr, eps)?;
    let doc = json!({
        "command": "selftest",
        "input": source,
        "table_validation": validation,
        "certificate": cert,
    });
    let csv = vec![
        ("score".to_string(), format!("{:.15}", cert.score)),
        ("threshold".to_string(), format!("{:.15}", cert.threshold)),
        ("pass".to_string(), cert.pass.to_string()),
    ];
    emit(output, &doc, csv)?;
    Ok(if cert.pass { EXIT_PASS } else { EXIT_FAIL })
}

fn cmd_seesaw(
    objective: Objective,
    direction: DirectionArg,
    restarts: usize,
    seed: u64,
    r: f64,
    functional: Option<&Path>,
    output: &OutputArgs,
) -> Result<u8, Error> {
    let direction = match direction {
        DirectionArg::Maximize => Direction::Maximize,
        DirectionArg::Minimize => Direction::Minimize,
    };
    let mut config = SeesawConfig::new(vec![2, 2], direction, seed);
    config.restarts = restarts.max(1);

    let (outcome, bound, name): (SeesawOutcome, Option<f64>, &str) = match objective {
        Objective::Chsh => {
            let expr = pqsteer::certify::chsh_expression();
            let bound = classical_bound(&expr);
            (seesaw_correlator(&expr, &config)?, Some(bound), "chsh")
        }
        Objective::Icd => {
            let expr = icd_expression();
            let bound = classical_bound(&expr);
            (seesaw_correlator(&expr, &config)?, Some(bound), "icd")
        }
        Objective::Activated => {
            let f = match functional {
                Some(path) => SteeringFunctional::load(path)?.value,
                None => pqsteer::functionals::shifted_chsh_functional(2),
            };
            let d_c = f.scenario.d_c;
            if !d_c.is_power_of_two() {
                return Err(Error::InvalidParameter(
                    "activated objective needs a power-of-two steered dimension".into(),
                ));
            }
            let n = d_c.trailing_zeros() as usize;
            let bell = decompose_to_bell(&f, n)?;
            (
                seesaw_activated_bell(&bell, r, &config)?,
                None,
                "activated",
            )
        }
    };

    let doc = json!({
        "command": "seesaw",
        "objective": name,
        "seed": seed,
        "restarts": config.restarts,
        "value": outcome.value,
        "converged": outcome.converged,
        "iterations": outcome.iterations,
        "classical_bound": bound,
        "trajectory_len": outcome.trajectory.len(),
    });
    let csv = vec![
        ("objective".to_string(), name.to_string()),
        ("value".to_string(), format!("{:.15}", outcome.value)),
        ("converged".to_string(), outcome.converged.to_string()),
    ];
    emit(output, &doc, csv)?;
    Ok(EXIT_PASS)
}

fn cmd_ghjw(
    input: &Path,
    model_out: Option<&Path>,
    output: &OutputArgs,
) -> Result<u8, Error> {
    let asm = BipartiteAssemblage::load(input)?;
    let model = ghjw_realization(&asm.value)?;
    let error = pqsteer::certify::ghjw_round_trip_error(&asm.value)?;
    if let Some(path) = model_out {
        model.save(path)?;
    }
    let doc = json!({
        "command": "ghjw",
        "input": input.display().to_string(),
        "warnings": asm.warnings,
        "dims": model.dims,
        "round_trip_error": error,
        "model_written": model_out.map(|p| p.display().to_string()),
    });
    let csv = vec![
        ("round_trip_error".to_string(), format!("{:e}", error)),
        ("purifier_dim".to_string(), model.dims[1].to_string()),
    ];
    emit(output, &doc, csv)?;
    Ok(if error <= 1e-9 { EXIT_PASS } else { EXIT_FAIL })
}

fn cmd_certify(
    kind: CertifyKind,
    input: Option<&Path>,
    reference: Option<&Path>,
    functional: Option<&Path>,
    trials: usize,
    seed: u64,
    output: &OutputArgs,
) -> Result<u8, Error> {
    let cert = match kind {
        CertifyKind::Extremality => {
            let path = input.ok_or_else(|| {
                Error::Missing("extremality needs --input (bipartite assemblage)".into())
            })?;
            let asm = BipartiteAssemblage::load(path)?;
            extremality_certificate(&asm.value)?
        }
        CertifyKind::Independence => {
            let net_path = input.ok_or_else(|| {
                Error::Missing("independence needs --input (network assemblage)".into())
            })?;
            let ref_path = reference.ok_or_else(|| {
                Error::Missing("independence needs --reference (bipartite assemblage)".into())
            })?;
            let net = NetworkAssemblage::load(net_path)?;
            let reference = BipartiteAssemblage::load(ref_path)?;
            independence_check(&net.value, &reference.value)?
        }
        CertifyKind::Nonnegativity => {
            let f = match functional {
                Some(path) => SteeringFunctional::load(path)?.value,
                None => pqsteer::functionals::shifted_chsh_functional(2),
            };
            let d_c = f.scenario.d_c;
            if !d_c.is_power_of_two() {
                return Err(Error::InvalidParameter(
                    "non-negativity sweep needs a power-of-two steered dimension".into(),
                ));
            }
            let n = d_c.trailing_zeros() as usize;
            let bell = decompose_to_bell(&f, n)?;
            quantum_nonnegativity_sweep(&bell, SweepConfig::new(trials, seed))?
        }
    };
    let pass = cert.pass;
    let doc = json!({
        "command": "certify",
        "seed": seed,
        "trials": trials,
        "certificate": cert,
    });
    let csv = vec![
        ("kind".to_string(), format!("{:?}", cert.kind).to_lowercase()),
        ("score".to_string(), format!("{:.15}", cert.score)),
        ("threshold".to_string(), format!("{:e}", cert.threshold)),
        ("pass".to_string(), pass.to_string()),
    ];
    emit(output, &doc, csv)?;
    Ok(if pass { EXIT_PASS } else { EXIT_FAIL })
}

/// Writes the report as pretty JSON or two-column CSV (scalar fields only).
fn emit(
    output: &OutputArgs,
    doc: &serde_json::Value,
    csv_rows: Vec<(String, String)>,
) -> Result<(), Error> {
    let text = match output.format {
        Format::Json => serde_json::to_string_pretty(doc)?,
        Format::Csv => {
            let mut s = String::from("field,value\n");
            for (k, v) in csv_rows {
                s.push_str(&format!("{},{}\n", k, v));
            }
            s
        }
    };
    match &output.out {
        Some(path) => std::fs::write(path, text)?,
        None => println!("{}", text),
    }
    Ok(())
}
