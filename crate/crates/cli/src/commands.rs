use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::Context;
use log::info;
use procalign::alignment::{align, render_two_rows, CostParams};
use procalign::calibration::{
    default_epsilon_grid, evaluate, read_dataset, tune_epsilon, dataset_to_records, LabeledProbTrace, MetricsReport,
    SplitFractions,
};
use procalign::discovery::{select_best, threshold_sweep, QualityReport, SweepEntry, DEFAULT_THRESHOLD_GRID};
use procalign::eventdata::{parse_event_log_csv, parse_prob_trace, write_event_log_csv, EventLog, LabeledTrace, TraceFormat};
use procalign::petri::{dot_export, pnml_read, pnml_write, PetriNet};
use procalign::report::{format_float, to_stable_json};
use procalign::synth::{generate_corpus, run_repetitions, write_seed_csv, ConfusionPair, ExperimentParams, NoiseKind, NoiseModel};
use serde::Serialize;

use crate::config::{
    check_epsilon, check_epsilon_grid, check_fractions, check_threshold_grid, input_file, output_dir, parse_fractions,
    required, RunConfig,
};
use crate::{usage, AlignArgs, DiscoverArgs, EvaluateArgs, PipelineArgs, SynthArgs, TuneArgs};

/// Writes `contents` next to `path` and renames it into place.
fn write_atomic(path: &Path, contents: &[u8]) -> anyhow::Result<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("output");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming {} to {}", tmp.display(), path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> anyhow::Result<()> {
    write_atomic(path, to_stable_json(value)?.as_bytes())
}

fn read_net(path: PathBuf) -> anyhow::Result<PetriNet> {
    let path = input_file(path)?;
    let xml = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    pnml_read(&xml).with_context(|| format!("parsing net {}", path.display()))
}

fn read_labeled(path: PathBuf) -> anyhow::Result<Vec<LabeledProbTrace>> {
    let path = input_file(path)?;
    let file = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
    read_dataset(BufReader::new(file)).with_context(|| format!("reading dataset {}", path.display()))
}

fn read_log(path: PathBuf) -> anyhow::Result<EventLog> {
    let path = input_file(path)?;
    let file = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
    parse_event_log_csv(BufReader::new(file)).with_context(|| format!("reading event log {}", path.display()))
}

fn write_log(path: &Path, log: &EventLog) -> anyhow::Result<()> {
    let mut buf = Vec::new();
    write_event_log_csv(log, &mut buf)?;
    write_atomic(path, &buf)
}

fn truth_log(traces: &[LabeledProbTrace]) -> anyhow::Result<EventLog> {
    let traces = traces
        .iter()
        .map(|t| LabeledTrace::new(t.trace().case_id(), t.truth().to_vec(), None))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EventLog::new(traces)?)
}

/// Runs the threshold sweep, writes every quality report plus the selected
/// model, and returns the selected sweep entry.
fn discover_into(log: &EventLog, grid: &[f64], out: &Path) -> anyhow::Result<SweepEntry> {
    let mut sweep = threshold_sweep(log, grid)?;
    let reports: Vec<QualityReport> = sweep.iter().map(|e| e.report).collect();
    for r in &reports {
        info!(
            "threshold {}: fitness {:.4} precision {:.4} F {:.4}",
            r.threshold, r.fitness, r.precision, r.f_score
        );
        write_json(&out.join(format!("quality_{}.json", format_float(r.threshold))), r)?;
    }
    let best = select_best(&reports).expect("non-empty sweep");
    let entry = sweep.swap_remove(best);
    write_atomic(&out.join("model.pnml"), pnml_write(&entry.net).as_bytes())?;
    let frequencies = entry.graph.activity_frequencies();
    write_atomic(&out.join("model.dot"), dot_export(&entry.net, Some(&frequencies)).as_bytes())?;
    write_atomic(&out.join("dependency_graph.dot"), entry.graph.to_dot().as_bytes())?;
    #[derive(Serialize)]
    struct Selection<'a> {
        selected_threshold: f64,
        reports: &'a [QualityReport],
    }
    write_json(
        &out.join("quality.json"),
        &Selection {
            selected_threshold: entry.report.threshold,
            reports: &reports,
        },
    )?;
    Ok(entry)
}

pub fn discover(args: DiscoverArgs, config: &RunConfig, out: Option<PathBuf>) -> anyhow::Result<()> {
    let log = read_log(required(args.log, &config.event_log, "log")?)?;
    let grid = check_threshold_grid(
        args.thresholds
            .or_else(|| config.threshold_grid.clone())
            .unwrap_or_else(|| DEFAULT_THRESHOLD_GRID.to_vec()),
    )?;
    let out = output_dir(out, config)?;
    let entry = discover_into(&log, &grid, &out)?;
    println!(
        "selected threshold {} (fitness {}, precision {}, F-score {})",
        entry.report.threshold,
        format_float(entry.report.fitness),
        format_float(entry.report.precision),
        format_float(entry.report.f_score)
    );
    Ok(())
}

pub fn align_cmd(args: AlignArgs, config: &RunConfig, out: Option<PathBuf>) -> anyhow::Result<()> {
    let epsilon = check_epsilon(required(args.epsilon, &config.epsilon, "epsilon")?)?;
    let net = read_net(required(args.net, &config.net, "net")?)?;
    let trace_path = input_file(required(args.trace, &config.trace, "trace")?)?;
    let format = TraceFormat::from_path(&trace_path);
    let file = File::open(&trace_path).with_context(|| format!("opening {}", trace_path.display()))?;
    let mut trace = parse_prob_trace(BufReader::new(file), format).with_context(|| format!("reading trace {}", trace_path.display()))?;
    if trace.case_id().is_empty() {
        let stem = trace_path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_owned();
        trace = trace.with_case_id(stem);
    }
    let out = output_dir(out, config)?;
    let alignment = align(&net, &trace, CostParams::new(epsilon)?)?;
    info!(
        "aligned {} events with {} moves, {} states expanded",
        trace.len(),
        alignment.moves().len(),
        alignment.stats().expanded
    );
    let text = render_two_rows(&alignment);
    write_json(&out.join("alignment.json"), &alignment.to_record())?;
    write_atomic(&out.join("alignment.txt"), text.as_bytes())?;
    print!("{text}");
    println!("total cost {}", format_float(alignment.total_cost()));
    Ok(())
}

fn epsilon_grid(flag: Option<Vec<f64>>, config: &RunConfig) -> anyhow::Result<Vec<f64>> {
    check_epsilon_grid(
        flag.or_else(|| config.epsilon_grid.clone())
            .unwrap_or_else(default_epsilon_grid),
    )
}

pub fn tune(args: TuneArgs, config: &RunConfig, out: Option<PathBuf>) -> anyhow::Result<()> {
    let grid = epsilon_grid(args.epsilons, config)?;
    let net = read_net(required(args.net, &config.net, "net")?)?;
    let val = read_labeled(required(args.dataset, &config.dataset, "dataset")?)?;
    if val.is_empty() {
        return Err(usage("dataset is empty"));
    }
    let out = output_dir(out, config)?;
    let result = tune_epsilon(&val, &net, &grid)?;
    write_json(&out.join("tuning.json"), &result)?;
    let mut csv = Vec::new();
    result.write_csv(&mut csv)?;
    write_atomic(&out.join("tuning.csv"), &csv)?;
    println!(
        "best epsilon {} (validation accuracy {})",
        result.best_epsilon,
        format_float(result.best_accuracy())
    );
    Ok(())
}

fn print_metrics(name: &str, m: &MetricsReport) {
    println!(
        "{name:<10} accuracy {:<12} macro F1 {}",
        format_float(m.accuracy),
        format_float(m.macro_f1)
    );
}

pub fn evaluate_cmd(args: EvaluateArgs, config: &RunConfig, out: Option<PathBuf>) -> anyhow::Result<()> {
    let epsilon = check_epsilon(required(args.epsilon, &config.epsilon, "epsilon")?)?;
    let net = read_net(required(args.net, &config.net, "net")?)?;
    let test = read_labeled(required(args.dataset, &config.dataset, "dataset")?)?;
    let out = output_dir(out, config)?;
    let evaluation = evaluate(&test, &net, epsilon)?;
    write_json(&out.join("evaluation.json"), &evaluation)?;
    print_metrics("baseline", &evaluation.baseline);
    print_metrics("calibrated", &evaluation.calibrated);
    Ok(())
}

fn parse_confusion(raw: &str) -> anyhow::Result<ConfusionPair> {
    let err = || usage(format!("--confusion expects FROM:TO:MASS, got `{raw}`"));
    let (rest, mass) = raw.rsplit_once(':').ok_or_else(err)?;
    let (from, to) = rest.split_once(':').ok_or_else(err)?;
    let swap_mass = mass.trim().parse().map_err(|_| err())?;
    Ok(ConfusionPair {
        from: from.to_owned(),
        to: to.to_owned(),
        swap_mass,
    })
}

fn fractions(flag: Option<Vec<f64>>, config: &RunConfig) -> anyhow::Result<SplitFractions> {
    let f = match flag {
        Some(raw) => parse_fractions(&raw)?,
        None => config.fractions.unwrap_or_default(),
    };
    check_fractions(f)
}

pub fn synth(args: SynthArgs, config: &RunConfig, out: Option<PathBuf>) -> anyhow::Result<()> {
    let sc = &config.synth;
    let net = read_net(required(args.net, &config.net, "net")?)?;
    let mut noise = if let Some(c) = args.dirichlet {
        NoiseModel::dirichlet(c, 0)
    } else if !args.confusion.is_empty() {
        let pairs = args.confusion.iter().map(|c| parse_confusion(c)).collect::<anyhow::Result<_>>()?;
        NoiseModel {
            kind: NoiseKind::Confusion { pairs },
            seed: 0,
        }
    } else {
        sc.noise.clone().unwrap_or_else(NoiseModel::none)
    };
    noise.seed = args.noise_seed.or(sc.noise.as_ref().map(|n| n.seed)).unwrap_or(0);
    let discover = args.discover || sc.discover.unwrap_or(false);
    let params = ExperimentParams {
        n_traces: args.n_traces.or(sc.n_traces).unwrap_or(100),
        max_len: args.max_len.or(sc.max_len).unwrap_or(100),
        noise,
        epsilon_grid: epsilon_grid(args.epsilons, config)?,
        fractions: fractions(args.fractions, config)?,
        seed: args.seed.or(config.seed).unwrap_or(0),
        discovery_grid: if discover {
            Some(check_threshold_grid(
                config.threshold_grid.clone().unwrap_or_else(|| DEFAULT_THRESHOLD_GRID.to_vec()),
            )?)
        } else {
            None
        },
    };
    let repetitions = args.repetitions.or(sc.repetitions).unwrap_or(1);
    if repetitions == 0 {
        return Err(usage("--repetitions must be positive"));
    }
    let alphabet = procalign::synth::net_alphabet(&net)?;
    params.noise.validate(&alphabet).map_err(|e| usage(e.to_string()))?;
    params.fractions.counts(params.n_traces).map_err(|e| usage(e.to_string()))?;

    let out = output_dir(out, config)?;
    let corpus = generate_corpus(&net, params.n_traces, params.max_len, &params.noise, params.seed)?;
    write_json(&out.join("dataset.json"), &dataset_to_records(&corpus))?;
    write_log(&out.join("event_log.csv"), &truth_log(&corpus)?)?;

    let reports = run_repetitions(&net, &params, repetitions)?;
    let n = reports.len() as f64;
    let mean = |f: fn(&procalign::synth::ExperimentReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    #[derive(Serialize)]
    struct Summary<'a> {
        params: &'a ExperimentParams,
        repetitions: u64,
        mean_baseline_accuracy: f64,
        mean_calibrated_accuracy: f64,
        mean_improvement: f64,
        runs: &'a [procalign::synth::ExperimentReport],
    }
    let summary = Summary {
        params: &params,
        repetitions,
        mean_baseline_accuracy: mean(|r| r.baseline_accuracy),
        mean_calibrated_accuracy: mean(|r| r.calibrated_accuracy),
        mean_improvement: mean(|r| r.improvement),
        runs: &reports,
    };
    write_json(&out.join("experiment.json"), &summary)?;
    let mut csv = Vec::new();
    write_seed_csv(&reports, &mut csv)?;
    write_atomic(&out.join("experiments.csv"), &csv)?;
    println!(
        "{} run(s): mean accuracy {} argmax, {} calibrated",
        reports.len(),
        format_float(summary.mean_baseline_accuracy),
        format_float(summary.mean_calibrated_accuracy)
    );
    Ok(())
}

#[derive(Serialize)]
struct Scores {
    accuracy: f64,
    macro_f1: f64,
}

impl From<&MetricsReport> for Scores {
    fn from(m: &MetricsReport) -> Self {
        Scores {
            accuracy: m.accuracy,
            macro_f1: m.macro_f1,
        }
    }
}

#[derive(Serialize)]
struct PipelineSummary {
    n_train: usize,
    n_val: usize,
    n_test: usize,
    discovery: Option<QualityReport>,
    best_epsilon: f64,
    baseline: Scores,
    calibrated: Scores,
    improvement: f64,
}

pub fn pipeline(args: PipelineArgs, config: &RunConfig, out: Option<PathBuf>) -> anyhow::Result<()> {
    let split = fractions(args.fractions, config)?;
    let eps_grid = epsilon_grid(args.epsilons, config)?;
    let thr_grid = check_threshold_grid(
        args.thresholds
            .or_else(|| config.threshold_grid.clone())
            .unwrap_or_else(|| DEFAULT_THRESHOLD_GRID.to_vec()),
    )?;
    let dataset = read_labeled(required(args.dataset, &config.dataset, "dataset")?)?;
    let given_net = args.net.or_else(|| config.net.clone()).map(read_net).transpose()?;
    let (train, val, test) = split.split(&dataset).map_err(|e| usage(e.to_string()))?;
    let out = output_dir(out, config)?;
    info!("split {} traces into {}/{}/{}", dataset.len(), train.len(), val.len(), test.len());

    let (net, discovery) = match given_net {
        Some(net) => (net, None),
        None => {
            if train.is_empty() {
                return Err(usage("no training traces to discover a model from"));
            }
            let log = truth_log(train)?;
            write_log(&out.join("event_log.csv"), &log)?;
            let entry = discover_into(&log, &thr_grid, &out)?;
            (entry.net, Some(entry.report))
        }
    };

    let tuning = tune_epsilon(val, &net, &eps_grid)?;
    write_json(&out.join("tuning.json"), &tuning)?;
    let mut csv = Vec::new();
    tuning.write_csv(&mut csv)?;
    write_atomic(&out.join("tuning.csv"), &csv)?;

    let evaluation = evaluate(test, &net, tuning.best_epsilon)?;
    write_json(&out.join("evaluation.json"), &evaluation)?;

    let summary = PipelineSummary {
        n_train: train.len(),
        n_val: val.len(),
        n_test: test.len(),
        discovery,
        best_epsilon: tuning.best_epsilon,
        baseline: (&evaluation.baseline).into(),
        calibrated: (&evaluation.calibrated).into(),
        improvement: evaluation.accuracy_gain(),
    };
    write_json(&out.join("pipeline.json"), &summary)?;
    println!("best epsilon {}", tuning.best_epsilon);
    print_metrics("baseline", &evaluation.baseline);
    print_metrics("calibrated", &evaluation.calibrated);
    Ok(())
}
