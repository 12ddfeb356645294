use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::Serialize;
use serde_json::json;

use spectemp::data::{load_csv, synth_seasonal, Dataset, DatasetManifest};
use spectemp::experiments::{
    ablation_variants, forecast_vs_persistence, fit, prepare_task, run_ablation, signed_relation, theory_report,
    write_ablation_csv, write_embedding_csv, write_race_csv, AblationRow, ForecastTask,
};
use spectemp::model::{save_checkpoint, ModelConfig};
use spectemp::train::evaluate;
use spectemp::twl::{
    check_spectral_conditions, distinguishable, fixtures, read_dtdg, refine_to_fixpoint, wl_test, write_color_table,
    write_dtdg, Dtdg, Verdict,
};

use crate::config::{DatasetSpec, RunConfig};
use crate::CliError;

pub struct Run<'a> {
    pub cfg: &'a RunConfig,
    pub seed: u64,
    pub out: &'a Path,
}

fn create(out: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    let path = out.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))
}

fn write_json<T: Serialize>(out: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let mut w = create(out, name)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::data(e.to_string()))?;
    std::io::Write::write_all(&mut w, b"\n").map_err(|e| CliError::data(e.to_string()))?;
    Ok(())
}

fn load_dataset(run: &Run) -> Result<Dataset, CliError> {
    Ok(match &run.cfg.dataset {
        DatasetSpec::Seasonal(opts) => synth_seasonal(opts, run.seed)?,
        DatasetSpec::Csv { path, options } => load_csv(path, options)?,
    })
}

fn dataset_manifest(run: &Run, ds: &Dataset) -> DatasetManifest {
    DatasetManifest {
        name: ds.name.clone(),
        shape: [ds.variables(), ds.len(), ds.dims()],
        normalization: run.cfg.task.normalization,
        split_ratios: run.cfg.task.split,
        seed: matches!(run.cfg.dataset, DatasetSpec::Seasonal(_)).then_some(run.seed),
        labels: ds.labels.clone(),
    }
}

/// Model config with its window lengths and feature width taken from the task.
fn task_model(run: &Run, dims: usize) -> ModelConfig {
    ModelConfig { lookback: run.cfg.task.lookback, horizon: run.cfg.task.horizon, dims, ..run.cfg.model.clone() }
}

fn prepare(run: &Run) -> Result<(ModelConfig, ForecastTask), CliError> {
    let ds = load_dataset(run)?;
    write_json(run.out, "dataset_manifest.json", &dataset_manifest(run, &ds))?;
    let task = prepare_task(&ds, &run.cfg.task)?;
    let model = task_model(run, ds.dims());
    model.validate()?;
    Ok((model, task))
}

pub fn train(run: &Run) -> Result<(), CliError> {
    let (model, task) = prepare(run)?;
    let (state, history) = fit(&model, &task, &run.cfg.train, run.seed)?;
    save_checkpoint(&run.out.join("checkpoint.bin"), &state)?;
    history.write_csv(create(run.out, "train_run.csv")?)?;
    let m = evaluate(&state, &task.test, Some(&task.norm))?;
    write_json(run.out, "metrics.json", &json!({ "mae": m.mae, "rmse": m.rmse }))?;
    println!("test MAE {:.6}, RMSE {:.6} after {} epochs", m.mae, m.rmse, history.epochs.len());
    Ok(())
}

pub fn forecast(run: &Run) -> Result<(), CliError> {
    let (model, task) = prepare(run)?;
    let (state, report) = forecast_vs_persistence(&model, &task, &run.cfg.train, run.seed)?;
    save_checkpoint(&run.out.join("checkpoint.bin"), &state)?;
    report.run.write_csv(create(run.out, "train_run.csv")?)?;
    write_json(run.out, "metrics.json", &json!({ "mae": report.model.mae, "rmse": report.model.rmse }))?;
    write_json(
        run.out,
        "forecast_report.json",
        &json!({
            "seed": run.seed,
            "model": report.model,
            "persistence": report.persistence,
            "mae_improvement": report.mae_improvement,
        }),
    )?;
    println!(
        "test MAE {:.6} vs persistence {:.6} ({:.1}% better)",
        report.model.mae,
        report.persistence.mae,
        100.0 * report.mae_improvement
    );
    Ok(())
}

#[derive(Serialize)]
struct AblationSummary {
    variant: String,
    label: String,
    seeds: usize,
    mae: f64,
    rmse: f64,
    mae_std: f64,
}

fn summarize(rows: &[AblationRow]) -> Vec<AblationSummary> {
    let mut ids: Vec<&str> = Vec::new();
    for r in rows {
        if !ids.contains(&r.variant.as_str()) {
            ids.push(&r.variant);
        }
    }
    ids.into_iter()
        .map(|id| {
            let group: Vec<&AblationRow> = rows.iter().filter(|r| r.variant == id).collect();
            let k = group.len() as f64;
            let mae = group.iter().map(|r| r.mae).sum::<f64>() / k;
            let var = group.iter().map(|r| (r.mae - mae).powi(2)).sum::<f64>() / k;
            AblationSummary {
                variant: id.to_string(),
                label: group[0].label.clone(),
                seeds: group.len(),
                mae,
                rmse: group.iter().map(|r| r.rmse).sum::<f64>() / k,
                mae_std: var.sqrt(),
            }
        })
        .collect()
}

pub fn ablate(run: &Run) -> Result<(), CliError> {
    let axis = run.cfg.ablation.axis()?;
    if run.cfg.ablation.repeats == 0 {
        return Err(CliError::usage("ablation.repeats must be positive"));
    }
    let (model, task) = prepare(run)?;
    let seeds: Vec<u64> = (0..run.cfg.ablation.repeats as u64).map(|i| run.seed + i).collect();
    println!("axis {axis}: {} variants × {} seeds", ablation_variants(axis, &model).len(), seeds.len());
    let rows = run_ablation(axis, &model, &task, &run.cfg.train, &seeds)?;
    write_ablation_csv(create(run.out, "ablation_runs.csv")?, &rows)?;
    let summary = summarize(&rows);
    let mut w = csv::Writer::from_writer(create(run.out, "ablation.csv")?);
    for s in &summary {
        w.serialize(s).map_err(|e| CliError::data(e.to_string()))?;
        println!("{:>4}  {:<48} MAE {:.4} ± {:.4}  RMSE {:.4}", s.variant, s.label, s.mae, s.mae_std, s.rmse);
    }
    w.flush().map_err(|e| CliError::data(e.to_string()))?;
    Ok(())
}

pub fn theory(run: &Run) -> Result<(), CliError> {
    let (model, task) = prepare(run)?;
    let report = theory_report(&run.cfg.theory, Some((&model, &task, &run.cfg.train)), run.seed)?;
    write_json(run.out, "theory_report.json", &report)?;
    write_race_csv(create(run.out, "race.csv")?, &report.race)?;
    let s = &report.column_sampling;
    println!("column sampling: violation rate {:.3}, exact-rank error {:.2e}", s.violation_rate, s.exact_rank_max_lhs);
    for o in &report.orthogonality {
        println!("{:<11} weight {:?}: residual {:.2e} orthogonal={}", o.basis, o.weight, o.residual, o.orthogonal);
    }
    if let Some(d) = &report.density {
        println!("density fit: alpha {:.3} (residual {:.3e})", d.alpha, d.residual);
    }
    Ok(())
}

pub fn synth(run: &Run) -> Result<(), CliError> {
    let opts = &run.cfg.signed;
    let model = ModelConfig { lookback: opts.task.lookback, horizon: opts.task.horizon, ..run.cfg.model.clone() };
    let report = signed_relation(opts, &model, &run.cfg.train, run.seed)?;
    let n = report.labels.len();
    write_json(
        run.out,
        "dataset_manifest.json",
        &DatasetManifest {
            name: "signed_groups".into(),
            shape: [n, opts.length, 1],
            normalization: opts.task.normalization,
            split_ratios: opts.task.split,
            seed: Some(run.seed),
            labels: Some(report.labels.clone()),
        },
    )?;
    let mut labels = csv::Writer::from_writer(create(run.out, "labels.csv")?);
    labels.write_record(["node_id", "label"]).map_err(|e| CliError::data(e.to_string()))?;
    for (i, l) in report.labels.iter().enumerate() {
        labels.serialize((i, l)).map_err(|e| CliError::data(e.to_string()))?;
    }
    labels.flush().map_err(|e| CliError::data(e.to_string()))?;
    write_embedding_csv(create(run.out, "embedding_tggc.csv")?, &report.tggc_embedding)?;
    write_embedding_csv(create(run.out, "embedding_control.csv")?, &report.control_embedding)?;
    write_json(run.out, "synth_report.json", &report)?;
    println!(
        "silhouette: model {:.4}, low-pass control {:.4}, inputs {:.4}",
        report.tggc_silhouette, report.control_silhouette, report.input_silhouette
    );
    Ok(())
}

fn letter(v: usize) -> String {
    if v < 26 {
        char::from(b'A' + v as u8).to_string()
    } else {
        v.to_string()
    }
}

/// Graph padded with isolated nodes to `nodes`.
fn pad(g: &Dtdg, nodes: usize) -> Result<Dtdg, CliError> {
    if g.nodes() >= nodes {
        return Ok(g.clone());
    }
    let snaps = g
        .snapshots()
        .iter()
        .map(|s| {
            let f = s.features();
            let mut x = ndarray::Array2::zeros((nodes, f.ncols()));
            x.slice_mut(ndarray::s![..g.nodes(), ..]).assign(f);
            (s.edges().to_vec(), x)
        })
        .collect();
    Ok(Dtdg::new(nodes, snaps)?)
}

fn describe(name: &str, g: &Dtdg, run: &Run) -> Result<serde_json::Value, CliError> {
    let cap = run.cfg.twl.steps.unwrap_or(g.nodes() * g.steps());
    let state = refine_to_fixpoint(g, cap);
    write_color_table(create(run.out, &format!("{name}_colors.csv"))?, &[vec![&state]])?;
    let last = g.steps() - 1;
    let mut merged = Vec::new();
    for u in 0..g.nodes() {
        for v in (u + 1)..g.nodes() {
            if !distinguishable(g, u, v, last, cap)? {
                merged.push(json!([letter(u), letter(v)]));
            }
        }
    }
    println!(
        "{name}: {} nodes × {} snapshots, {} color classes at t{last}; indistinguishable pairs at t{last}: {}",
        g.nodes(),
        g.steps(),
        state.distinct(last),
        if merged.is_empty() { "none".to_string() } else { serde_json::to_string(&merged).unwrap_or_default() }
    );
    let spectral = if g.topology_fixed() {
        serde_json::to_value(check_spectral_conditions(g, run.cfg.twl.tolerance)?).map_err(|e| CliError::data(e.to_string()))?
    } else {
        serde_json::Value::Null
    };
    let self_test = wl_test(g, g, run.cfg.twl.steps)?;
    Ok(json!({
        "name": name,
        "nodes": g.nodes(),
        "snapshots": g.steps(),
        "refinement_steps": state.step,
        "classes_at_last_snapshot": state.distinct(last),
        "indistinguishable_pairs": merged,
        "self_test": verdict_name(self_test.verdict),
        "spectral_conditions": spectral,
    }))
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::NonIsomorphic => "non_isomorphic",
        Verdict::Inconclusive => "inconclusive",
    }
}

pub fn twl(run: &Run) -> Result<(), CliError> {
    let settings = &run.cfg.twl;
    let (left, right) = match (&settings.left, &settings.right) {
        (None, None) => {
            let (l, r) = (fixtures::failing_example(), fixtures::separating_example());
            write_dtdg(create(run.out, "merging_fixture.dtdg")?, &l)?;
            write_dtdg(create(run.out, "separating_fixture.dtdg")?, &r)?;
            (l, Some(r))
        }
        (Some(l), r) => (read_dtdg(l)?, r.as_deref().map(read_dtdg).transpose()?),
        (None, Some(_)) => return Err(CliError::usage("twl.right requires twl.left")),
    };
    let mut graphs = vec![describe("left", &left, run)?];
    let mut pair = serde_json::Value::Null;
    if let Some(right) = right {
        graphs.push(describe("right", &right, run)?);
        if left.steps() == right.steps() {
            let nodes = left.nodes().max(right.nodes());
            let out = wl_test(&pad(&left, nodes)?, &pad(&right, nodes)?, settings.steps)?;
            println!(
                "left vs right: {}{}",
                verdict_name(out.verdict),
                out.separating_step.map(|s| format!(" at step {s}")).unwrap_or_default()
            );
            pair = json!({
                "verdict": verdict_name(out.verdict),
                "separating_step": out.separating_step,
                "steps_run": out.steps_run,
                "padded_nodes": nodes,
            });
        } else {
            println!("left vs right: non_isomorphic (snapshot counts differ)");
            pair = json!({ "verdict": "non_isomorphic", "reason": "snapshot counts differ" });
        }
    }
    write_json(run.out, "twl_report.json", &json!({ "seed": run.seed, "graphs": graphs, "pair": pair }))
}
