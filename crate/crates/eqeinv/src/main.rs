//! `eqeinv` command line: generate datasets, train, tune, evaluate, and
//! predict layer thicknesses from EQE spectra.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Arg, ArgAction, Command};

use eqeinv::cli::{self, CliError, PredictInput};
use eqeinv::config::{ConfigMap, CONFIG_KEYS};

fn command() -> Command {
    let with_overrides = |cmd: Command| -> Command {
        let mut cmd = cmd
            .arg(
                Arg::new("config")
                    .long("config")
                    .value_name("FILE")
                    .global(true)
                    .help("Run configuration file (sectioned key = value)"),
            )
            .arg(
                Arg::new("seed")
                    .long("seed")
                    .value_name("N")
                    .global(true)
                    .help("Global seed (shorthand for --run.seed)"),
            )
            .arg(
                Arg::new("out")
                    .long("out")
                    .value_name("DIR")
                    .global(true)
                    .help("Output directory for this run"),
            )
            .arg(
                Arg::new("threads")
                    .long("threads")
                    .value_name("N")
                    .global(true)
                    .help("Worker threads (0 = all cores; shorthand for --run.threads)"),
            );
        for (key, default) in CONFIG_KEYS {
            cmd = cmd.arg(
                Arg::new(*key)
                    .long(*key)
                    .value_name("VALUE")
                    .global(true)
                    .hide_short_help(true)
                    .help(format!("Override config key (default: {default})")),
            );
        }
        cmd
    };
    with_overrides(
        Command::new("eqeinv")
            .about("Simulate perovskite solar-cell EQE spectra and invert layer thicknesses")
            .subcommand_required(true)
            .arg_required_else_help(true)
            .subcommand(Command::new("generate").about("Sample stacks, simulate EQE, and write a dataset"))
            .subcommand(
                Command::new("train")
                    .about("Train a network on a generated dataset")
                    .arg(
                        Arg::new("dataset")
                            .long("dataset")
                            .value_name("DIR")
                            .required(true)
                            .help("Dataset directory produced by generate"),
                    ),
            )
            .subcommand(
                Command::new("tune")
                    .about("Bayesian-optimize training hyperparameters")
                    .arg(
                        Arg::new("dataset")
                            .long("dataset")
                            .value_name("DIR")
                            .required(true)
                            .help("Dataset directory produced by generate"),
                    )
                    .arg(
                        Arg::new("budget")
                            .long("budget")
                            .value_name("N")
                            .required(true)
                            .help("Total trial count (including any resumed trials)"),
                    ),
            )
            .subcommand(
                Command::new("eval")
                    .about("Evaluate a model against a dataset split")
                    .arg(
                        Arg::new("model")
                            .long("model")
                            .value_name("FILE")
                            .required(true)
                            .help("Model file written by train or tune"),
                    )
                    .arg(
                        Arg::new("dataset")
                            .long("dataset")
                            .value_name("DIR")
                            .required(true)
                            .help("Dataset directory produced by generate"),
                    )
                    .arg(
                        Arg::new("split")
                            .long("split")
                            .value_name("NAME")
                            .default_value("test")
                            .help("Split to evaluate: train, val, or test"),
                    ),
            )
            .subcommand(
                Command::new("predict")
                    .about("Predict layer thicknesses for an EQE curve or a stack file")
                    .arg(
                        Arg::new("model")
                            .long("model")
                            .value_name("FILE")
                            .required(true)
                            .help("Model file written by train or tune"),
                    )
                    .arg(
                        Arg::new("eqe")
                            .long("eqe")
                            .value_name("CSV")
                            .help("EQE curve (wavelength_nm,forward[,reverse])"),
                    )
                    .arg(
                        Arg::new("stack")
                            .long("stack")
                            .value_name("FILE")
                            .conflicts_with("eqe")
                            .help("Stack description file to simulate and invert"),
                    ),
            ),
    )
    .disable_help_subcommand(true)
    .arg(
        Arg::new("quiet")
            .long("quiet")
            .action(ArgAction::SetTrue)
            .global(true)
            .hide(true),
    )
}

fn build_config(matches: &clap::ArgMatches) -> Result<ConfigMap, CliError> {
    let mut config = ConfigMap::defaults();
    if let Some(path) = matches.get_one::<String>("config") {
        config.load_file(&PathBuf::from(path))?;
    }
    for (key, _) in CONFIG_KEYS {
        if let Some(value) = matches.get_one::<String>(key) {
            config.set(key, value)?;
        }
    }
    if let Some(seed) = matches.get_one::<String>("seed") {
        config.set("run.seed", seed)?;
    }
    if let Some(threads) = matches.get_one::<String>("threads") {
        config.set("run.threads", threads)?;
    }
    Ok(config)
}

fn out_dir(matches: &clap::ArgMatches) -> PathBuf {
    matches
        .get_one::<String>("out")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("run-out"))
}

fn run() -> Result<(), CliError> {
    let matches = command()
        .try_get_matches()
        .unwrap_or_else(|e| {
            // Keep clap's rendering but pin usage errors to exit code 1
            // (except --help/--version, which are successes).
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        });

    let (name, sub) = matches.subcommand().expect("subcommand required");
    let config = build_config(sub)?;
    let threads = config.get_usize("run.threads")?;
    if threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    let out = out_dir(sub);

    match name {
        "generate" => {
            cli::cmd_generate(&config, &out)?;
        }
        "train" => {
            let dataset = PathBuf::from(sub.get_one::<String>("dataset").unwrap());
            cli::cmd_train(&config, &dataset, &out)?;
        }
        "tune" => {
            let dataset = PathBuf::from(sub.get_one::<String>("dataset").unwrap());
            let budget: usize = sub
                .get_one::<String>("budget")
                .unwrap()
                .parse()
                .map_err(|e| CliError::Usage(format!("--budget: {e}")))?;
            cli::cmd_tune(&config, &dataset, budget, &out)?;
        }
        "eval" => {
            let model = PathBuf::from(sub.get_one::<String>("model").unwrap());
            let dataset = PathBuf::from(sub.get_one::<String>("dataset").unwrap());
            let split = sub.get_one::<String>("split").unwrap();
            cli::cmd_eval(&config, &model, &dataset, split, &out)?;
        }
        "predict" => {
            let model = PathBuf::from(sub.get_one::<String>("model").unwrap());
            let input = match (sub.get_one::<String>("eqe"), sub.get_one::<String>("stack")) {
                (Some(eqe), None) => PredictInput::EqeCsv(PathBuf::from(eqe)),
                (None, Some(stack)) => PredictInput::StackFile(PathBuf::from(stack)),
                _ => {
                    return Err(CliError::Usage(
                        "predict needs exactly one of --eqe or --stack".into(),
                    ))
                }
            };
            cli::cmd_predict(&config, &model, input)?;
        }
        other => return Err(CliError::Usage(format!("unknown subcommand {other}"))),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
