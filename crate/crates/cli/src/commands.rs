use std::path::{Path, PathBuf};
use std::time::Instant;

use synapse_cascade::bench::{ingest_features, run_benchmark, run_benchmark_on, Lifetimes};
use synapse_cascade::fit::{fit, FitProblem, Unknown};
use synapse_cascade::io::{format_significant, read_feature_matrix, read_table, write_metrics_to, write_trace_to, TIME_DIGITS};
use synapse_cascade::protocol::{recover_to_baseline, run_cycle, run_relaxation, Phase, WeightTrace};
use synapse_cascade::{apply_pulse_train_with, read_trace, ChainState, Propagator, TraceOptions};

use crate::config::{BenchRunConfig, FitConfig, PlotConfig, ProtocolConfig, Recipe, Resolved, SimulateConfig};
use crate::manifest::{write_atomic, RunManifest};
use crate::svg::{Chart, Series};
use crate::CliError;

struct Outputs<'a> {
    dir: &'a Path,
    written: Vec<PathBuf>,
}

impl Outputs<'_> {
    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        write_atomic(&path, bytes)?;
        self.written.push(path);
        Ok(())
    }

    fn trace(&mut self, name: &str, trace: &WeightTrace) -> Result<(), CliError> {
        let mut buf = Vec::new();
        write_trace_to(trace, &mut buf)?;
        self.write(name, &buf)
    }

    fn table(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
        let mut text = header.join(",");
        text.push('\n');
        for row in rows {
            text.push_str(&row.join(","));
            text.push('\n');
        }
        self.write(name, text.as_bytes())
    }
}

fn time(t: f64) -> String {
    format_significant(t, TIME_DIGITS)
}

fn exact(x: f64) -> String {
    format!("{x:?}")
}

pub(crate) fn dispatch(resolved: &Resolved, dir: &Path) -> Result<(), CliError> {
    let start = Instant::now();
    std::fs::create_dir_all(dir).map_err(|e| CliError::file(dir, e))?;
    let mut out = Outputs {
        dir,
        written: Vec::new(),
    };
    let seeds = match resolved {
        Resolved::Simulate(cfg) => simulate(cfg, &mut out)?,
        Resolved::Protocol { recipe, config } => protocol(*recipe, config, &mut out)?,
        Resolved::Fit(cfg) => fit_trace(cfg, &mut out)?,
        Resolved::Bench(cfg) => bench(cfg, &mut out)?,
        Resolved::Plot(cfg) => plot(cfg, &mut out)?,
    };
    let manifest = RunManifest {
        subcommand: resolved.label(),
        config: resolved.clone(),
        seeds,
        version: env!("CARGO_PKG_VERSION").to_string(),
        outputs: out.written,
        wall_clock: start.elapsed().as_secs_f64(),
    };
    manifest.write(dir)?;
    Ok(())
}

fn simulate(cfg: &SimulateConfig, out: &mut Outputs) -> Result<Vec<u64>, CliError> {
    let p = Propagator::new(&cfg.chain)?;
    let initial = match &cfg.initial {
        None => ChainState::zeros(p.len()),
        Some(u) if u.len() == p.len() => ChainState::new(u.clone(), 0.0),
        Some(u) => {
            return Err(CliError::Config(format!(
                "initial has {} levels but the chain has {}",
                u.len(),
                p.len()
            )))
        }
    };
    let opts = TraceOptions {
        samples_per_phase: cfg.samples_per_phase,
    };
    let trace = apply_pulse_train_with(&p, &initial, &cfg.schedule, &cfg.drive, opts)?;
    out.trace("trace.csv", &trace)?;
    println!("{} samples, u1 change {:.6}", trace.len(), trace.u1_change());
    Ok(Vec::new())
}

fn protocol(recipe: Recipe, cfg: &ProtocolConfig, out: &mut Outputs) -> Result<Vec<u64>, CliError> {
    let p = Propagator::new(&cfg.chain)?;
    match recipe {
        Recipe::Relaxation => {
            let r = &cfg.relaxation;
            let trace = run_relaxation(&p, &cfg.drive, &r.pulse, r.observe)?;
            let samples = trace.samples();
            let initial = samples[0].u1();
            let end = samples.iter().rev().find(|s| s.phase == Phase::On).map(|s| s.u1()).unwrap_or(initial);
            let written = end - initial;
            let rows: Vec<Vec<String>> = samples
                .iter()
                .filter(|s| s.phase == Phase::Free)
                .map(|s| {
                    let f = if written != 0.0 { (end - s.u1()) / written } else { f64::NAN };
                    vec![time(s.time), exact(f)]
                })
                .collect();
            let last = rows.last().map(|r| r[1].clone()).unwrap_or_default();
            out.trace("trace.csv", &trace)?;
            out.table("recovery.csv", &["time", "recovery_fraction"], rows)?;
            println!("recovery fraction after {} s: {last}", r.observe);
        }
        Recipe::Cycle => {
            let c = &cfg.cycle;
            let (trace, report) = run_cycle(&p, &cfg.drive, &c.potentiation, &c.depression, c.cycles)?;
            out.trace("trace.csv", &trace)?;
            out.table(
                "legs.csv",
                &["leg", "cycle", "polarity", "range"],
                report.per_cycle_range.iter().enumerate().map(|(i, r)| {
                    let polarity = if i % 2 == 0 { "potentiation" } else { "depression" };
                    vec![(i + 1).to_string(), (i / 2 + 1).to_string(), polarity.into(), exact(*r)]
                }),
            )?;
            out.table(
                "convergence.csv",
                &["cycle", "max_difference"],
                report
                    .convergence
                    .iter()
                    .enumerate()
                    .map(|(i, d)| vec![(i + 2).to_string(), exact(*d)]),
            )?;
            match report.cycles_to_convergence(c.threshold) {
                Some(n) => println!("converged at cycle {n} (threshold {})", c.threshold),
                None => println!("not converged within {} cycles (threshold {})", c.cycles, c.threshold),
            }
        }
        Recipe::Recover => {
            let r = &cfg.recover;
            let n = recover_to_baseline(&p, &cfg.drive, &r.forward, r.reverse_amplitude, r.tolerance)?;
            out.table(
                "recover.csv",
                &["forward_pulses", "reverse_amplitude", "reverse_pulses"],
                [vec![r.forward.count.to_string(), exact(r.reverse_amplitude), n.to_string()]],
            )?;
            println!("{n} reverse pulses to baseline");
        }
    }
    Ok(Vec::new())
}

#[derive(serde::Serialize)]
struct FitReport<'a> {
    unknowns: Vec<String>,
    parameters: &'a [Unknown],
    log2_estimates: &'a [f64],
    estimates: Vec<f64>,
    residual: f64,
    iterations: usize,
    evaluations: usize,
}

fn fit_trace(cfg: &FitConfig, out: &mut Outputs) -> Result<Vec<u64>, CliError> {
    let path = cfg.trace.as_ref().ok_or_else(|| CliError::Usage("fit needs an observed trace".into()))?;
    let observed = read_trace(path)?;
    let problem = FitProblem::new(&observed, cfg.segments.clone(), cfg.chain.clone(), cfg.unknowns.clone(), cfg.drive)?;
    let result = fit(&problem)?;
    let report = FitReport {
        unknowns: result.unknowns.iter().map(ToString::to_string).collect(),
        parameters: &result.unknowns,
        log2_estimates: &result.estimates,
        estimates: result.estimates.iter().map(|e| e.exp2()).collect(),
        residual: result.residual,
        iterations: result.iterations,
        evaluations: result.evaluations,
    };
    let mut json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Config(e.to_string()))?;
    json.push('\n');
    out.write("fit.json", json.as_bytes())?;
    for (u, e) in report.unknowns.iter().zip(&report.estimates) {
        println!("{u} = {e:.6e}");
    }
    println!("rms residual {:.3e}", result.residual);
    Ok(Vec::new())
}

fn bench(cfg: &BenchRunConfig, out: &mut Outputs) -> Result<Vec<u64>, CliError> {
    let b = &cfg.bench;
    let series = match &cfg.features {
        None => run_benchmark(b)?,
        Some(path) => {
            let matrix = read_feature_matrix(path)?;
            run_benchmark_on(b, &ingest_features(&matrix, b.neurons)?)?
        }
    };
    let mut buf = Vec::new();
    write_metrics_to(&series, &mut buf)?;
    out.write("metrics.csv", &buf)?;
    let life = Lifetimes::of(&series, b)?;
    out.table(
        "lifetimes.csv",
        &["metric", "threshold", "lifetime"],
        [
            ("fd", b.accuracy_threshold, life.fd),
            ("fc", b.accuracy_threshold, life.fc),
            ("iosnr", b.snr_threshold, life.io_snr),
            ("rsnr", b.snr_threshold, life.r_snr),
        ]
        .map(|(m, t, l)| vec![m.to_string(), exact(t), exact(l)]),
    )?;
    println!(
        "lifetimes: fd {:.1}, fc {:.1}, iosnr {:.1}, rsnr {:.1}",
        life.fd, life.fc, life.io_snr, life.r_snr
    );
    let mut seeds = b.trial_seeds();
    seeds.extend(b.calibration_seeds());
    Ok(seeds)
}

fn plot(cfg: &PlotConfig, out: &mut Outputs) -> Result<Vec<u64>, CliError> {
    let path = cfg.input.as_ref().ok_or_else(|| CliError::Usage("plot needs an input CSV".into()))?;
    let table = read_table(path)?;
    let x_name = match &cfg.x {
        Some(x) => x.clone(),
        None => table
            .columns
            .first()
            .cloned()
            .ok_or_else(|| CliError::Usage(format!("{} has no columns", path.display())))?,
    };
    let column = |name: &str| {
        table
            .column(name)
            .ok_or_else(|| CliError::Usage(format!("unknown column '{name}' in {}", path.display())))
    };
    let x = column(&x_name)?;
    let names: Vec<&str> = if cfg.columns.is_empty() {
        table
            .columns
            .iter()
            .zip(&table.values)
            .filter(|(c, v)| **c != x_name && v.iter().any(|y| y.is_finite()))
            .map(|(c, _)| c.as_str())
            .collect()
    } else {
        cfg.columns.iter().map(String::as_str).collect()
    };
    let series = names
        .iter()
        .map(|n| Ok(Series { name: n, y: column(n)? }))
        .collect::<Result<Vec<_>, CliError>>()?;
    let svg = Chart {
        title: cfg.title.as_deref(),
        x_label: &x_name,
        x,
        series,
        log_x: cfg.log_x,
    }
    .render();
    out.write(&cfg.output, svg.as_bytes())?;
    Ok(Vec::new())
}
