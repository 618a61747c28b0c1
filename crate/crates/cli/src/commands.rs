use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use gbmo::{
    load_dataset, load_features_csv, load_model, save_model, write_csv, BoostMode, BoosterConfig64, Dataset64,
    Matrix,
};

use crate::{
    exit, BenchArgs, CliError, CliResult, Command, ConfidenceArgs, PredictArgs, SynthArgs, TrainArgs,
};

pub(crate) fn dispatch(command: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<()> {
    match command {
        Command::Train(a) => train(a, stdout, stderr),
        Command::Predict(a) => predict(a, stdout),
        Command::Synth(a) => synth(a, stdout),
        Command::Bench(a) => bench_cmd(a, stdout),
        Command::Confidence(a) => confidence(a, stdout),
    }
}

fn io_error(path: &Path, e: io::Error) -> CliError {
    CliError {
        code: exit::DATA,
        message: format!("{}: {e}", path.display()),
    }
}

fn write_output(out: Option<&Path>, stdout: &mut dyn Write, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> CliResult<()> {
    match out {
        Some(path) => {
            let file = fs::File::create(path).map_err(|e| io_error(path, e))?;
            let mut w = BufWriter::new(file);
            body(&mut w).and_then(|_| w.flush()).map_err(|e| io_error(path, e))
        }
        None => body(stdout).map_err(|e| io_error(Path::new("<stdout>"), e)),
    }
}

fn train(args: TrainArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<()> {
    let config = args.hyper.to_config()?;
    let data: Dataset64 = load_dataset(&args.data, args.labels)?;
    let eval = args
        .eval_data
        .as_ref()
        .map(|p| load_dataset::<f64>(p, args.labels))
        .transpose()?;
    let fit = gbmo::train(&data, eval.as_ref(), &config)?;
    save_model(&fit.ensemble, &args.model)?;
    let history_path = args.history.unwrap_or_else(|| {
        let mut p = args.model.clone().into_os_string();
        p.push(".history.csv");
        PathBuf::from(p)
    });
    write_output(Some(&history_path), stdout, |w| {
        writeln!(w, "round,train_loss,eval_metric,seconds")?;
        for r in &fit.history {
            writeln!(w, "{r}")?;
        }
        Ok(())
    })?;
    let monitored = if eval.is_some() {
        config.metric().to_string()
    } else {
        format!("train_{}", config.loss)
    };
    let _ = writeln!(
        stderr,
        "trained {} rounds, {} trees kept",
        fit.history.len(),
        fit.ensemble.num_trees()
    );
    let best = fit.best_value.map_or_else(String::new, |v| v.to_string());
    writeln!(stdout, "best_round={} {monitored}={best}", fit.best_round)
        .map_err(|e| io_error(Path::new("<stdout>"), e))
}

fn predict(args: PredictArgs, stdout: &mut dyn Write) -> CliResult<()> {
    if args.workers == Some(0) {
        return Err(CliError::usage("--workers must be positive"));
    }
    let model = load_model::<f64>(&args.model)?;
    let features: Matrix<f64> = load_features_csv(&args.data, args.labels)?;
    let run = || model.predict(&features, args.probabilities);
    let pred = match args.workers {
        Some(n) => rayon_pool(n)?.install(run)?,
        None => run()?,
    };
    write_output(args.out.as_deref(), stdout, |w| {
        let header: Vec<String> = (0..model.num_outputs()).map(|j| format!("y{j}")).collect();
        writeln!(w, "{}", header.join(","))?;
        let mut line = String::new();
        for row in pred.iter_rows() {
            line.clear();
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    line.push(',');
                }
                line.push_str(&v.to_string());
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    })
}

fn rayon_pool(n: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| CliError::usage(format!("cannot start {n} workers: {e}")))
}

fn synth(args: SynthArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let data: Dataset64 = args.kind.generate(args.n, args.seed)?;
    write_output(args.out.as_deref(), stdout, |w| write_csv(w, &data))
}

/// One timing measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub mode: BoostMode,
    pub outputs: usize,
    pub workers: usize,
    pub rounds: usize,
    pub mean_seconds: f64,
}

/// Times `rounds` boosting rounds, after one untimed warm-up round, for every mode and
/// every target replication factor. Early stopping is disabled.
pub fn bench(
    data: &Dataset64,
    modes: &[BoostMode],
    replicate: &[usize],
    config: &BoosterConfig64,
    rounds: usize,
) -> CliResult<Vec<BenchRow>> {
    if rounds == 0 {
        return Err(CliError::usage("bench needs at least one timed round"));
    }
    if modes.is_empty() || replicate.is_empty() {
        return Err(CliError::usage("bench needs at least one mode and one replication factor"));
    }
    let workers = config
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let mut rows = Vec::new();
    for &factor in replicate {
        let ds = data.replicate_targets(factor)?;
        for &mode in modes {
            let cfg = BoosterConfig64 {
                mode,
                max_rounds: rounds + 1,
                early_stop_patience: None,
                workers: Some(workers),
                ..config.clone()
            };
            let fit = gbmo::train(&ds, None, &cfg)?;
            let timed = &fit.history[1.min(fit.history.len())..];
            let mean_seconds = timed.iter().map(|r| r.seconds).sum::<f64>() / timed.len().max(1) as f64;
            rows.push(BenchRow {
                mode,
                outputs: ds.num_outputs(),
                workers,
                rounds: timed.len(),
                mean_seconds,
            });
        }
    }
    Ok(rows)
}

fn bench_cmd(args: BenchArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let mut hyper = args.hyper.clone();
    let rounds = hyper.rounds.take().unwrap_or(10);
    if rounds == 0 {
        return Err(CliError::usage("--rounds must be positive for bench"));
    }
    if args.modes.iter().any(|m| m.is_sparse()) && hyper.topk.is_none() {
        return Err(CliError::usage("sparse modes require --topk"));
    }
    let config = hyper.to_config()?;
    let data: Dataset64 = load_dataset(&args.data, args.labels)?;
    let rows = bench(&data, &args.modes, &args.replicate, &config, rounds)?;
    let out = &mut *stdout;
    let w = |e| io_error(Path::new("<stdout>"), e);
    writeln!(out, "mode,outputs,workers,rounds,mean_seconds").map_err(w)?;
    for r in &rows {
        writeln!(out, "{},{},{},{},{:.6}", r.mode, r.outputs, r.workers, r.rounds, r.mean_seconds).map_err(w)?;
    }
    if args.replicate.len() > 1 {
        writeln!(out, "mode,outputs_from,outputs_to,ratio").map_err(w)?;
        for &mode in &args.modes {
            let of_mode: Vec<&BenchRow> = rows.iter().filter(|r| r.mode == mode).collect();
            for pair in of_mode.windows(2) {
                writeln!(
                    out,
                    "{mode},{},{},{:.4}",
                    pair[0].outputs,
                    pair[1].outputs,
                    pair[1].mean_seconds / pair[0].mean_seconds
                )
                .map_err(w)?;
            }
        }
    }
    Ok(())
}

/// Reads trial results given inline as comma-separated numbers, or from a file of
/// numbers separated by commas or whitespace.
pub(crate) fn parse_trials(spec: &str) -> CliResult<Vec<f64>> {
    let parse = |text: &str| -> Option<Vec<f64>> {
        text.split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().ok())
            .collect()
    };
    if let Some(v) = parse(spec) {
        return Ok(v);
    }
    let text = fs::read_to_string(spec).map_err(|e| io_error(Path::new(spec), e))?;
    parse(&text).ok_or_else(|| CliError {
        code: exit::DATA,
        message: format!("{spec}: expected numbers separated by commas or whitespace"),
    })
}

fn confidence(args: ConfidenceArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let a = parse_trials(&args.a)?;
    let b = parse_trials(&args.b)?;
    let p = gbmo::confidence(&a, &b, args.direction)?;
    writeln!(stdout, "{p}").map_err(|e| io_error(Path::new("<stdout>"), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trials_inline_and_from_file() {
        assert_eq!(parse_trials("1,2.5,-3").unwrap(), vec![1.0, 2.5, -3.0]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.txt");
        fs::write(&p, "0.5\n0.25\n").unwrap();
        assert_eq!(parse_trials(p.to_str().unwrap()).unwrap(), vec![0.5, 0.25]);
        assert_eq!(parse_trials("missing-file").unwrap_err().code, exit::DATA);
    }
}
