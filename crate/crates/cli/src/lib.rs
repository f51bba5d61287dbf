//! The `ventnet` pipeline: synthesize a cohort, pretrain on the proxy task,
//! train the dense regressor, prune and rewire it, evaluate and compare.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

use std::path::PathBuf;

use clap::{Arg, ArgAction, ArgMatches, Command};

use crate::commands::Ctx;
use crate::config::{flag_of, RunConfig, KEYS};
use crate::error::Result;

pub const OUT_DIR_ENV: &str = "VENTNET_OUT_DIR";

fn heading(group: &str) -> &'static str {
    match group {
        "dataset" => "Dataset settings",
        "architecture" => "Architecture settings",
        "training" => "Training settings",
        "pruning" => "Pruning settings",
        _ => "Evaluation settings",
    }
}

fn path_arg(name: &'static str, help: &'static str) -> Arg {
    Arg::new(name).long(name).value_name("PATH").value_parser(clap::value_parser!(PathBuf)).help(help)
}

pub fn command() -> Command {
    let defaults = RunConfig::default();
    let mut cmd = Command::new("ventnet")
        .about("Minute-ventilation regression from synthetic wearable signals: dense vs pruned networks")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .arg(path_arg("config", "key=value settings file; flags override its entries").global(true))
        .arg(
            Arg::new("out-dir")
                .long("out-dir")
                .global(true)
                .value_name("DIR")
                .value_parser(clap::value_parser!(PathBuf))
                .help(format!("directory for outputs [default: ${OUT_DIR_ENV}, else .]")),
        )
        .arg(
            Arg::new("force")
                .long("force")
                .global(true)
                .action(ArgAction::SetTrue)
                .help("overwrite existing outputs"),
        );
    for k in KEYS {
        let flag: &'static str = Box::leak(flag_of(k.name).into_boxed_str());
        let default = defaults.get(k.name).unwrap_or_default();
        cmd = cmd.arg(
            Arg::new(k.name)
                .long(flag)
                .global(true)
                .value_name("VALUE")
                .help_heading(heading(k.group))
                .help(format!("{} [default: {default}]", k.help)),
        );
    }
    let out = || path_arg("out", "primary output file");
    let data = || path_arg("data", "dataset file (its .manifest sidecar must sit next to it)");
    let model = || path_arg("model", "checkpoint file").required(true);
    cmd.subcommand(Command::new("config").about("Print every setting with its effective value"))
        .subcommand(Command::new("synth").about("Generate the synthetic cohort").arg(out()))
        .subcommand(
            Command::new("init")
                .about("Write an untrained NeuralNetA checkpoint")
                .arg(data())
                .arg(out()),
        )
        .subcommand(Command::new("pretrain").about("Pretrain a classifier copy on the proxy breathing task").arg(out()))
        .subcommand(
            Command::new("train")
                .about("Train NeuralNetA, optionally starting from a pretrained checkpoint")
                .arg(data().required(true))
                .arg(path_arg("pretrained", "proxy checkpoint whose conv layers seed the network"))
                .arg(out()),
        )
        .subcommand(
            Command::new("prune")
                .about("Prune NeuralNetA, add sparse skips and fine-tune into NeuralNetB")
                .arg(model())
                .arg(data().required(true))
                .arg(out()),
        )
        .subcommand(
            Command::new("eval")
                .about("Predict one partition and report error metrics")
                .arg(model())
                .arg(data().required(true))
                .arg(Arg::new("name").long("name").value_name("NAME").help("model label [default: checkpoint stem]"))
                .arg(out()),
        )
        .subcommand(
            Command::new("compare")
                .about("Compare two prediction files: metrics, significance, plots")
                .arg(path_arg("a", "predictions of the reference model").required(true))
                .arg(path_arg("b", "predictions of the candidate model").required(true))
                .arg(path_arg("prune-summary", "summary written by prune (adds prune_summary.csv)")),
        )
}

fn ctx(m: &ArgMatches) -> Result<Ctx> {
    let text = match m.get_one::<PathBuf>("config") {
        Some(p) => Some(io::read_text(p)?),
        None => None,
    };
    let overrides: Vec<(String, String)> = KEYS
        .iter()
        .filter_map(|k| m.get_one::<String>(k.name).map(|v| (k.name.to_string(), v.clone())))
        .collect();
    let cfg = RunConfig::load(text.as_deref(), &overrides)?;
    let out_dir = m
        .get_one::<PathBuf>("out-dir")
        .cloned()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    Ok(Ctx {
        cfg,
        out_dir,
        force: m.get_flag("force"),
    })
}

/// Runs one parsed invocation.
pub fn run(matches: &ArgMatches) -> Result<()> {
    let (name, m) = matches.subcommand().expect("a subcommand is required");
    let c = ctx(m)?;
    let path = |k: &str| m.get_one::<PathBuf>(k).cloned();
    let req = |k: &str| path(k).expect("required by clap");
    match name {
        "config" => {
            print!("{}", c.cfg.to_kv());
            Ok(())
        }
        "synth" => commands::synth(&c, path("out")),
        "init" => commands::init(&c, path("data"), path("out")),
        "pretrain" => commands::pretrain(&c, path("out")),
        "train" => commands::train_a(&c, &req("data"), path("pretrained"), path("out")),
        "prune" => commands::prune(&c, &req("model"), &req("data"), path("out")),
        "eval" => commands::eval(&c, &req("model"), &req("data"), m.get_one::<String>("name").cloned(), path("out")),
        "compare" => commands::compare(&c, &req("a"), &req("b"), path("prune-summary")),
        other => unreachable!("unknown subcommand {other}"),
    }
}
