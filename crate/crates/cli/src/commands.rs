use std::collections::BTreeMap;
use std::fs;
use std::io::Write;

use bouts_core::data::{load_category, load_task_csv, overlap_split, prepare, Partition, PreparedTask};
use bouts_core::pathsweep::{explained_variance, log_grid, normalized_absolute_error, sweep, Quartiles};
use bouts_core::stability::SelectionMatrix;
use bouts_core::study::{run_study, StudyConfig};
use bouts_core::synth::{Nonlinearity, SynthSpec};
use bouts_core::{BoutsError, BoutsModel, Matrix, Standardizer, TaskDataset};
use indexmap::IndexMap;

use crate::config::{CliError, Resolved};
use crate::output::{file_stem, write_json, ModelFile, SelectedFeatures, SelectedLambda, MODEL_FORMAT};
use crate::{NonlinearityArg, PredictArgs, SynthArgs};

/// Raw feature rows to predictions in the units of the raw target.
fn predict_raw(model: &BoutsModel, t: usize, scaler: &Standardizer, x: &Matrix) -> Result<Vec<f64>, CliError> {
    let pred = model.predict(t, &scaler.transform_x(x)?)?;
    Ok(scaler.inverse_y(&pred))
}

fn selected(model: &BoutsModel) -> SelectedFeatures {
    SelectedFeatures {
        universal: model.universal_features(),
        task_specific: model
            .task_names
            .iter()
            .enumerate()
            .map(|(t, n)| (n.clone(), model.task_specific_features(t)))
            .collect(),
    }
}

fn nan_empty(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

pub fn fit(r: &Resolved) -> Result<(), CliError> {
    let c = &r.config;
    let data = load_category(&r.manifest)?;
    let split = overlap_split(&data.tasks, c.ratios, c.seed)?;
    let prepared = prepare(&data, &split)?;
    let train: Vec<TaskDataset> = prepared.iter().map(|p| p.train.clone()).collect();
    let model = BoutsModel::fit(&train, &c.boost)?;

    fs::create_dir_all(&r.out)?;
    let file = ModelFile {
        format: MODEL_FORMAT,
        split_seed: c.seed,
        config: c.boost.clone(),
        standardizers: prepared.iter().map(|p| (p.name().to_string(), p.standardizer.clone())).collect(),
        model,
    };
    let model = &file.model;
    write_json(&r.out.join("model.json"), &file)?;
    write_json(&r.out.join("selected_features.json"), &selected(model))?;
    let importances: IndexMap<&str, BTreeMap<String, f64>> = model
        .task_names
        .iter()
        .enumerate()
        .map(|(t, n)| (n.as_str(), model.feature_importances(t)))
        .collect();
    write_json(&r.out.join("importances.json"), &importances)?;
    fs::write(r.out.join("split.json"), split.to_json(&data.tasks)? + "\n")?;

    let mut metrics = csv::Writer::from_path(r.out.join("metrics.csv"))?;
    metrics.write_record([
        "task",
        "n_train",
        "n_val",
        "n_test",
        "ev_train",
        "nae_test_q25",
        "nae_test_median",
        "nae_test_q75",
    ])?;
    for (t, p) in prepared.iter().enumerate() {
        let ev = explained_variance(&p.train.y, &model.predict(t, &p.train.x)?)?;
        let nae = normalized_absolute_error(&p.test.y, &model.predict(t, &p.test.x)?)?;
        let q = if nae.is_empty() {
            Quartiles { q25: f64::NAN, median: f64::NAN, q75: f64::NAN }
        } else {
            Quartiles::of(&nae)
        };
        metrics.write_record([
            p.name().to_string(),
            p.train.n_samples().to_string(),
            p.val.n_samples().to_string(),
            p.test.n_samples().to_string(),
            ev.to_string(),
            nan_empty(q.q25),
            nan_empty(q.median),
            nan_empty(q.q75),
        ])?;
    }
    metrics.flush()?;

    let mut preds = csv::Writer::from_path(r.out.join("predictions.csv"))?;
    preds.write_record(["task", "sample_id", "partition", "y_true", "y_pred"])?;
    for (t, (task, s)) in data.tasks.iter().zip(&split.tasks).enumerate() {
        let scaler = &file.standardizers[t];
        for (label, part) in [("train", Partition::Train), ("val", Partition::Val), ("test", Partition::Test)] {
            let rows = task.select_rows(s.get(part));
            let y = predict_raw(model, t, scaler, &rows.x)?;
            for ((id, truth), pred) in rows.sample_ids.iter().zip(&rows.y).zip(&y) {
                preds.write_record([task.name.as_str(), id, label, &truth.to_string(), &pred.to_string()])?;
            }
        }
    }
    preds.flush()?;
    Ok(())
}

pub fn path(r: &Resolved) -> Result<(), CliError> {
    let c = &r.config;
    let data = load_category(&r.manifest)?;
    let split = overlap_split(&data.tasks, c.ratios, c.seed)?;
    let prepared: Vec<PreparedTask> = prepare(&data, &split)?;
    let grid = log_grid(c.path.grid_points, c.path.log_base)?;
    let path = sweep(&prepared, &c.boost, &grid, &c.path.downstream)?;
    let choice = path.select(c.path.drop)?;
    let point = &path.points[choice.index];

    fs::create_dir_all(&r.out)?;
    path.write_csv(r.out.join("path.csv"))?;
    fs::write(r.out.join("path.json"), path.to_json()? + "\n")?;
    fs::write(r.out.join("features_vs_lambda.csv"), path.features_table())?;
    let selection = SelectedLambda {
        index: choice.index,
        lambda: point.lambda,
        log_lambda: point.lambda.ln(),
        drop: c.path.drop,
        warning: choice.warning,
        universal: point.universal.clone(),
        task_specific: path.task_names.iter().cloned().zip(point.task_specific.iter().cloned()).collect(),
    };
    write_json(&r.out.join("selected_lambda.json"), &selection)?;
    if choice.warning {
        eprintln!(
            "warning: the smallest penalty already loses more than {}% explained variance; selected index 0",
            100.0 * c.path.drop
        );
    }
    Ok(())
}

pub fn stability(r: &Resolved) -> Result<(), CliError> {
    let c = &r.config;
    let data = load_category(&r.manifest)?;
    let study = StudyConfig {
        replicates: c.replicates,
        seed: c.seed,
        ratios: c.ratios,
        boost: c.boost.clone(),
        variant: c.variant,
        alpha: c.alpha,
    };
    let selections = run_study(&data, &study)?;
    let report = selections.report(&study);

    let dir = r.out.join("selections");
    fs::create_dir_all(&dir)?;
    write_json(&r.out.join("stability_report.json"), &report)?;
    selections.universal.write_csv(dir.join("universal.csv"))?;
    let write = |prefix: &str, zs: &[SelectionMatrix]| -> Result<(), CliError> {
        for (name, z) in selections.task_names.iter().zip(zs) {
            z.write_csv(dir.join(format!("{prefix}_{}.csv", file_stem(name))))?;
        }
        Ok(())
    };
    write("bouts", &selections.bouts)?;
    write("single_task", &selections.single_task)?;
    for note in &report.notes {
        eprintln!("note: {note}");
    }
    Ok(())
}

pub fn synth(a: &SynthArgs) -> Result<(), CliError> {
    let structural = a.tasks.is_some()
        || a.features.is_some()
        || a.universal.is_some()
        || a.task_specific.is_some()
        || !a.samples.is_empty();
    let mut spec = match &a.spec {
        Some(p) if structural => {
            return Err(CliError::Usage(format!(
                "--spec {} fixes the layout; --tasks, --features, --universal, --task-specific and --samples cannot be combined with it",
                p.display()
            )))
        }
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", p.display())))?;
            let mut s: SynthSpec =
                serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
            if let Some(seed) = a.seed {
                s.seed = seed;
            }
            s
        }
        None => {
            let d = SynthSpec::default();
            let n_tasks = match (a.tasks, a.samples.len()) {
                (Some(t), 0 | 1) => t,
                (Some(t), k) if k == t => t,
                (Some(t), k) => {
                    return Err(CliError::Usage(format!("--samples lists {k} sizes for {t} tasks")));
                }
                (None, k) if k > 1 => k,
                (None, _) => d.n_tasks(),
            };
            let first = a.samples.first().copied().unwrap_or(d.n_samples[0]);
            let mut s = SynthSpec::planted(
                n_tasks,
                a.features.unwrap_or(d.n_features),
                a.universal.unwrap_or(d.universal.len()),
                a.task_specific.unwrap_or(d.task_specific[0].len()),
                first,
                a.seed.unwrap_or(0),
            );
            if a.samples.len() > 1 {
                s.n_samples = a.samples.clone();
            }
            s
        }
    };
    if let Some(v) = a.noise {
        spec.noise_sigma = v;
    }
    if let Some(v) = a.nonlinearity {
        spec.nonlinearity = match v {
            NonlinearityArg::Linear => Nonlinearity::Linear,
            NonlinearityArg::Quadratic => Nonlinearity::Quadratic,
            NonlinearityArg::Interaction => Nonlinearity::Interaction,
        };
    }
    if let Some(v) = a.correlation {
        spec.correlation_rho = v;
    }
    if let Some(v) = a.shared_fraction {
        spec.shared_fraction = v;
    }
    let data = spec.generate()?;
    data.write(&a.out)?;
    write_json(&a.out.join("spec.json"), &spec)?;
    Ok(())
}

pub fn predict(a: &PredictArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&a.model)
        .map_err(|e| CliError::Usage(format!("cannot read model {}: {e}", a.model.display())))?;
    let file: ModelFile = serde_json::from_str(&text)?;
    if file.format != MODEL_FORMAT {
        return Err(BoutsError::Data(format!("unsupported model format {}", file.format)).into());
    }
    let model = &file.model;
    let t = match &a.task {
        Some(name) => model.task_index(name).ok_or_else(|| {
            CliError::Usage(format!("unknown task '{name}'; the model has {}", model.task_names.join(", ")))
        })?,
        None if model.n_tasks() == 1 => 0,
        None => {
            return Err(CliError::Usage(format!(
                "--task is required for a multitask model ({})",
                model.task_names.join(", ")
            )))
        }
    };
    let scaler = file
        .standardizers
        .get(&model.task_names[t])
        .ok_or_else(|| BoutsError::Data(format!("model file has no scaler for task '{}'", model.task_names[t])))?;
    let input = load_task_csv(&a.input, &model.task_names[t])?;
    let pos: BTreeMap<&str, usize> = input.feature_names.iter().enumerate().map(|(j, n)| (n.as_str(), j)).collect();
    let columns = model
        .feature_names
        .iter()
        .map(|n| {
            pos.get(n.as_str()).copied().ok_or_else(|| {
                BoutsError::Data(format!("{}: missing feature column '{n}'", a.input.display()))
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let y = predict_raw(model, t, scaler, &input.x.select_columns(&columns))?;

    let sink: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(fs::File::create(p)?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["sample_id", "y_true", "y_pred"])?;
    for ((id, truth), pred) in input.sample_ids.iter().zip(&input.y).zip(&y) {
        w.write_record([id.as_str(), &truth.to_string(), &pred.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
