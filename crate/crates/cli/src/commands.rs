use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::time::Instant;

use iqmon::collector::{run_simulation, DrillQuery, SimulationOutput, SliceFilter};
use iqmon::eval::{ks_trigger, rank_error_report, AccuracyReport};
use iqmon::{Estimator, QuantileSummary, Sketch};

use crate::config::Experiment;
use crate::error::CliError;
use crate::report::{save_csv, save_json, BenchRow, DrillRow, TriggerRow};

/// Timed repetitions per bench size; the fastest one is reported.
const BENCH_REPEATS: usize = 5;
const SOFT_DOUBLING_LIMIT: f64 = 2.5;

fn prepare_out(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))
}

/// The whole fleet first, then one slice per distinct label value.
fn slice_filters(exp: &Experiment) -> Vec<SliceFilter> {
    let mut filters = vec![SliceFilter::all()];
    for (key, values) in &exp.slices {
        let distinct: BTreeSet<&String> = values.iter().collect();
        filters.extend(distinct.into_iter().map(|v| SliceFilter::all().with(key, v)));
    }
    filters
}

fn drill_rows(exp: &Experiment, sim: &SimulationOutput) -> Result<Vec<DrillRow>, CliError> {
    let query = DrillQuery {
        estimator: exp.server_estimator(),
        epochs: None,
    };
    let mut rows = Vec::new();
    for filter in slice_filters(exp) {
        let view = sim.server.drill(&filter, &query)?;
        rows.extend(view.pooled.levels().map(|(p, value)| DrillRow {
            slice: filter.to_string(),
            p,
            value,
            count: view.pooled.count(),
        }));
    }
    Ok(rows)
}

pub fn simulate(exp: &Experiment) -> Result<Vec<DrillRow>, CliError> {
    let sim = run_simulation(&exp.agent_specs(), &exp.simulation(false)?)?;
    let rows = drill_rows(exp, &sim)?;

    prepare_out(&exp.out)?;
    fs::write(exp.out.join("records.bin"), &sim.log)?;
    save_csv(&rows, &exp.out.join("drill.csv"))?;
    save_json(&rows, &exp.out.join("drill.json"))?;

    let stats = sim.server.stats();
    println!(
        "records: {} accepted, {} duplicates, {} rejected ({} bytes)",
        stats.accepted,
        stats.duplicates,
        stats.rejected,
        sim.log.len()
    );
    println!("{:<24} {:>8} {:>14} {:>12}", "slice", "p", "value", "count");
    for r in &rows {
        println!("{:<24} {:>8} {:>14.6} {:>12}", r.slice, r.p, r.value, r.count);
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutcome {
    pub overall: AccuracyReport,
    pub post_shift: Option<AccuracyReport>,
    pub triggers: Vec<TriggerRow>,
}

fn print_report(label: &str, rep: &AccuracyReport) {
    println!("{label}: eps_max {:.6} logit_max {:.6}", rep.eps_max, rep.logit_max);
}

fn save_report(rep: &AccuracyReport, dir: &Path, stem: &str) -> Result<(), CliError> {
    rep.write_csv(fs::File::create(dir.join(format!("{stem}.csv")))?)?;
    fs::write(dir.join(format!("{stem}.json")), rep.to_json() + "\n")?;
    Ok(())
}

/// Replays the first agent's stream through a nominal sketch and tests each
/// interval's buffer against the summary of everything before it.
fn trigger_trace(exp: &Experiment, observations: &[f64]) -> Result<Vec<TriggerRow>, CliError> {
    let mut sketch = Sketch::new(exp.grid.clone(), exp.buffer, Estimator::Nominal)?;
    let mut rows = Vec::new();
    for (interval, chunk) in observations.chunks(exp.buffer).enumerate() {
        let mut buf = chunk.to_vec();
        buf.sort_by(f64::total_cmp);
        if interval > 0 {
            let t = ks_trigger(&sketch.summary()?, &buf, exp.trigger)?;
            rows.push(TriggerRow {
                interval: interval as u64,
                statistic: t.statistic,
                p_value: t.p_value,
                fired: t.fired,
            });
        }
        sketch.extend(buf)?;
    }
    Ok(rows)
}

pub fn eval(exp: &Experiment) -> Result<EvalOutcome, CliError> {
    let intervals = exp.intervals()?;
    let retained = (exp.agents as u128) * (intervals as u128) * (exp.buffer as u128);
    if retained > exp.memory_cap as u128 {
        return Err(CliError::Config(format!(
            "retaining {retained} observations for the oracle exceeds `memory_cap` = {}",
            exp.memory_cap
        )));
    }

    let sim = run_simulation(&exp.agent_specs(), &exp.simulation(true)?)?;
    let query = DrillQuery {
        estimator: exp.server_estimator(),
        epochs: None,
    };
    let pooled: QuantileSummary = sim.server.drill(&SliceFilter::all(), &query)?.pooled;

    let mut all: Vec<f64> = sim.traces.iter().flat_map(|t| t.observations.iter().copied()).collect();
    all.sort_by(f64::total_cmp);
    let overall = rank_error_report(&pooled, &all)?;
    let post_shift = match &exp.shift {
        Some((at, _)) if *at < intervals => {
            let skip = *at as usize * exp.buffer;
            let mut post: Vec<f64> = sim.traces.iter().flat_map(|t| t.observations[skip..].iter().copied()).collect();
            post.sort_by(f64::total_cmp);
            Some(rank_error_report(&pooled, &post)?)
        }
        _ => None,
    };
    let triggers = trigger_trace(exp, &sim.traces[0].observations)?;

    prepare_out(&exp.out)?;
    save_report(&overall, &exp.out, "accuracy")?;
    print_report("all data", &overall);
    if let Some(rep) = &post_shift {
        save_report(rep, &exp.out, "accuracy_post_shift")?;
        print_report("post shift", rep);
    }
    save_csv(&triggers, &exp.out.join("triggers.csv"))?;
    let fired = triggers.iter().filter(|t| t.fired).count();
    println!(
        "trigger (agent 0, alpha {}): fired {fired} of {} intervals",
        exp.trigger.alpha(),
        triggers.len()
    );
    Ok(EvalOutcome {
        overall,
        post_shift,
        triggers,
    })
}

pub fn bench(exp: &Experiment) -> Result<Vec<BenchRow>, CliError> {
    let largest = *exp.bench_sizes.iter().max().expect("validated nonempty");
    let mut generator = exp.stream_spec(exp.seed).generator()?;
    let mut data = Vec::with_capacity(largest);
    let mut interval = 0;
    while data.len() < largest {
        let n = exp.buffer.min(largest - data.len());
        generator.fill(interval, &mut data, n);
        interval += 1;
    }

    let mut rows: Vec<BenchRow> = Vec::new();
    for &size in &exp.bench_sizes {
        let mut best = f64::INFINITY;
        for _ in 0..BENCH_REPEATS {
            let start = Instant::now();
            let mut sketch = Sketch::new(exp.grid.clone(), exp.buffer, exp.estimator())?;
            sketch.extend(data[..size].iter().copied())?;
            sketch.flush()?;
            std::hint::black_box(sketch.summary()?);
            best = best.min(start.elapsed().as_secs_f64());
        }
        let ratio = rows.last().map(|prev| {
            let doublings = (size as f64 / prev.size as f64).log2();
            (best / prev.seconds).powf(1.0 / doublings)
        });
        rows.push(BenchRow {
            size,
            seconds: best,
            ratio,
        });
    }

    prepare_out(&exp.out)?;
    save_csv(&rows, &exp.out.join("bench.csv"))?;
    println!("{:>10} {:>12} {:>16}", "size", "seconds", "ratio/doubling");
    for r in &rows {
        let ratio = r.ratio.map_or("-".to_string(), |x| format!("{x:.3}"));
        println!("{:>10} {:>12.6} {:>16}", r.size, r.seconds, ratio);
    }
    if rows.iter().filter_map(|r| r.ratio).any(|r| r.is_nan() || r > SOFT_DOUBLING_LIMIT) {
        eprintln!("warning: time grew faster than {SOFT_DOUBLING_LIMIT}x per doubling (loaded machine?)");
    }
    Ok(rows)
}
