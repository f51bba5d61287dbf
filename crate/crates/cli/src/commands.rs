use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ventnet_core::graph::{build_neural_net_a, NetworkGraph, VggConfig};
use ventnet_core::pruning::{connectivity_score, make_neural_net_b, PruneSummary};
use ventnet_core::stats::{
    bland_altman, compare_models, level_bars_svg, mae, metrics_csv, pearson_r, per_subject_rmse, rmse, scatter_svg,
    stratified_error, Predictions, LOA_COVERAGE,
};
use ventnet_core::synth::{
    build_dataset, encode_dataset, generate_proxy, manifest_path, split_subjects, SignalWindow, SplitPart,
    PROXY_CLASSES,
};
use ventnet_core::trainer::{
    encode_checkpoint, finetune, predict, pretrain_proxy, train, transfer_head, Checkpoint, LoadMode, Model,
    Normalizer, Samples,
};

use crate::config::RunConfig;
use crate::error::{config, fail, from_stats, from_train, Class, Result};
use crate::io::{
    check_outputs, history_csv, load_checkpoint, load_dataset, load_predictions, predictions_text, read_text,
    write_atomic, LoadedData,
};

pub struct Ctx {
    pub cfg: RunConfig,
    pub out_dir: PathBuf,
    pub force: bool,
}

impl Ctx {
    fn out(&self, given: Option<PathBuf>, default_name: &str) -> PathBuf {
        given.unwrap_or_else(|| self.out_dir.join(default_name))
    }
}

/// `<dir>/<stem>.<suffix>` next to a primary output.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn build_graph(vgg: &VggConfig, seed: u64) -> Result<NetworkGraph<f32>> {
    build_neural_net_a(vgg, &mut ChaCha8Rng::seed_from_u64(seed)).map_err(|e| config(e.to_string()))
}

fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    write_atomic(path, &encode_checkpoint(ckpt))
}

/// Explicit sampling settings must agree with the dataset being read.
fn check_config_matches(cfg: &RunConfig, data: &LoadedData, path: &Path) -> Result<()> {
    let m = &data.manifest;
    for (key, want, have) in [
        ("fs_hz", cfg.manifest.fs_hz, m.fs_hz),
        ("window_seconds", cfg.manifest.window_seconds, m.window_seconds),
    ] {
        if cfg.explicit.contains(key) && want != have {
            return Err(config(format!("config {key}={want} but {} was built with {key}={have}", path.display())));
        }
    }
    Ok(())
}

fn check_graph_fits(graph: &NetworkGraph<f32>, model: &Path, data: &LoadedData, path: &Path) -> Result<()> {
    if graph.input_len() != data.file.window_len || graph.input_channels() != 2 {
        return Err(config(format!(
            "{} expects {} x {} inputs, {} holds 2 x {} windows",
            model.display(),
            graph.input_channels(),
            graph.input_len(),
            path.display(),
            data.file.window_len
        )));
    }
    Ok(())
}

fn part(data: &LoadedData, which: SplitPart) -> Result<Samples> {
    let m = &data.manifest;
    let ids: Vec<u32> = (0..m.n_subjects as u32).collect();
    let split = split_subjects(&ids, m.split, m.rng_seed).map_err(|e| config(e.to_string()))?;
    let keep = split.ids(which);
    let windows: Vec<&SignalWindow> = data.file.windows.iter().filter(|w| keep.contains(&w.subject_id)).collect();
    if windows.is_empty() {
        return Err(config(format!("the {} partition of the dataset is empty", which.name())));
    }
    Samples::from_windows(&windows).map_err(|e| from_train("dataset", e))
}

pub fn synth(ctx: &Ctx, out: Option<PathBuf>) -> Result<()> {
    let path = ctx.out(out, "dataset.vntd");
    let mpath = manifest_path(&path);
    check_outputs(&[&path, &mpath], ctx.force)?;
    let m = &ctx.cfg.manifest;
    let ds = build_dataset(m).map_err(|e| config(e.to_string()))?;
    let bytes = encode_dataset(m.fs_hz as f32, &ds.windows).map_err(|e| config(e.to_string()))?;
    write_atomic(&path, &bytes)?;
    write_atomic(&mpath, m.to_kv().as_bytes())?;
    println!(
        "subjects={} female={} male={} windows={} fs_hz={} window_len={}",
        m.n_subjects,
        m.n_female,
        m.n_male,
        ds.windows.len(),
        m.fs_hz,
        m.window_len()
    );
    println!(
        "split train/val/test subjects={}/{}/{}",
        ds.split.train.len(),
        ds.split.val.len(),
        ds.split.test.len()
    );
    println!("wrote {} ({} bytes)", path.display(), bytes.len());
    Ok(())
}

/// Freshly initialized NeuralNetA, sized for `data` or for the configured window.
pub fn init(ctx: &Ctx, data: Option<PathBuf>, out: Option<PathBuf>) -> Result<()> {
    let path = ctx.out(out, "model_init.vntc");
    check_outputs(&[&path], ctx.force)?;
    let input_len = match &data {
        Some(d) => {
            let loaded = load_dataset(d)?;
            check_config_matches(&ctx.cfg, &loaded, d)?;
            loaded.file.window_len
        }
        None => ctx.cfg.manifest.window_len(),
    };
    let graph = build_graph(&ctx.cfg.vgg(input_len), ctx.cfg.init_seed)?;
    println!("params={}", graph.param_count());
    save_checkpoint(
        &path,
        &Checkpoint {
            graph,
            norm: None,
            optimizer: None,
            epoch: 0,
            history: Vec::new(),
        },
    )?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn pretrain(ctx: &Ctx, out: Option<PathBuf>) -> Result<()> {
    let cfg = &ctx.cfg;
    let path = ctx.out(out, "proxy.vntc");
    let hist = sibling(&path, "history.csv");
    check_outputs(&[&path, &hist], ctx.force)?;
    let m = &cfg.manifest;
    let proxy = generate_proxy(cfg.proxy_windows, m.window_seconds, m.fs_hz, &m.generator, cfg.proxy_seed)
        .map_err(|e| config(e.to_string()))?;
    let (train_set, val_set) = proxy.split(0.2);
    let graph = build_graph(&cfg.vgg(m.window_len()).with_outputs(PROXY_CLASSES), cfg.init_seed)?;
    let outcome = pretrain_proxy(graph, &train_set, &val_set, &cfg.train).map_err(|e| from_train("pretraining", e))?;
    let mut csv = String::from("epoch,train_loss,val_accuracy\n");
    for r in &outcome.history {
        let _ = writeln!(csv, "{},{},{}", r.epoch, r.train_loss, r.val_accuracy);
    }
    save_checkpoint(
        &path,
        &Checkpoint {
            graph: outcome.graph,
            norm: Some(outcome.norm),
            optimizer: None,
            epoch: outcome.history.len(),
            history: Vec::new(),
        },
    )?;
    write_atomic(&hist, csv.as_bytes())?;
    println!(
        "proxy classes={} windows={} best_val_accuracy={:.4}",
        PROXY_CLASSES,
        proxy.len(),
        outcome.best_accuracy
    );
    println!("wrote {}", path.display());
    Ok(())
}

pub fn train_a(ctx: &Ctx, data_path: &Path, pretrained: Option<PathBuf>, out: Option<PathBuf>) -> Result<()> {
    let cfg = &ctx.cfg;
    let path = ctx.out(out, "model_a.vntc");
    let hist = sibling(&path, "history.csv");
    check_outputs(&[&path, &hist], ctx.force)?;
    let data = load_dataset(data_path)?;
    check_config_matches(cfg, &data, data_path)?;
    let pre = pretrained.map(|p| load_checkpoint(&p, LoadMode::EvalOnly).map(|c| (p, c))).transpose()?;
    let train_set = part(&data, SplitPart::Train)?;
    let val_set = part(&data, SplitPart::Val)?;
    let mut graph = build_graph(&cfg.vgg(data.file.window_len), cfg.init_seed)?;
    if let Some((p, ckpt)) = &pre {
        let moved = transfer_head(&ckpt.graph, &mut graph)
            .map_err(|e| config(format!("{} cannot seed this network: {e}", p.display())))?;
        println!("transferred {moved} layers from {}", p.display());
    }
    println!("params={}", graph.param_count());
    let outcome = train(graph, &train_set, &val_set, &cfg.train).map_err(|e| from_train("training", e))?;
    let best = &outcome.history[outcome.best_epoch - 1];
    println!(
        "epochs={} best_epoch={} train_rmse={:.4} val_rmse={:.4}",
        outcome.history.len(),
        outcome.best_epoch,
        best.train_rmse,
        best.val_rmse
    );
    save_checkpoint(
        &path,
        &Checkpoint {
            graph: outcome.model.graph,
            norm: Some(outcome.model.norm),
            optimizer: Some(outcome.optimizer),
            epoch: outcome.best_epoch,
            history: outcome.history.clone(),
        },
    )?;
    write_atomic(&hist, history_csv(&outcome.history).as_bytes())?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn prune(ctx: &Ctx, model: &Path, data_path: &Path, out: Option<PathBuf>) -> Result<()> {
    let cfg = &ctx.cfg;
    let path = ctx.out(out, "model_b.vntc");
    let hist = sibling(&path, "history.csv");
    let summary_kv = sibling(&path, "prune.txt");
    let summary_csv = sibling(&path, "prune.csv");
    check_outputs(&[&path, &hist, &summary_kv, &summary_csv], ctx.force)?;
    let a = load_checkpoint(model, LoadMode::EvalOnly)?;
    let norm = a
        .norm
        .clone()
        .ok_or_else(|| config(format!("{} has never been trained; run train first", model.display())))?;
    let data = load_dataset(data_path)?;
    check_config_matches(cfg, &data, data_path)?;
    check_graph_fits(&a.graph, model, &data, data_path)?;
    let train_set = part(&data, SplitPart::Train)?;
    let val_set = part(&data, SplitPart::Val)?;
    let (b, summary) = make_neural_net_b(&a.graph, &cfg.prune, &mut ChaCha8Rng::seed_from_u64(cfg.prune_seed))
        .map_err(|e| config(e.to_string()))?;
    println!(
        "sparsity={} scope={} effective params {} -> {} ({:.1}%), skip edges={}",
        summary.sparsity,
        summary.scope.name(),
        summary.params_effective_a,
        summary.params_effective_b,
        100.0 * summary.param_ratio(),
        summary.skip_edges
    );
    let outcome = finetune(&Model { graph: b, norm }, &train_set, &val_set, &cfg.train)
        .map_err(|e| from_train("fine-tuning", e))?;
    if let Some(best) = outcome.history.get(outcome.best_epoch.wrapping_sub(1)) {
        println!("finetune best_epoch={} val_rmse={:.4}", outcome.best_epoch, best.val_rmse);
    }
    save_checkpoint(
        &path,
        &Checkpoint {
            graph: outcome.model.graph,
            norm: Some(outcome.model.norm),
            optimizer: Some(outcome.optimizer),
            epoch: outcome.best_epoch,
            history: outcome.history.clone(),
        },
    )?;
    write_atomic(&hist, history_csv(&outcome.history).as_bytes())?;
    write_atomic(&summary_kv, summary.to_kv().as_bytes())?;
    write_atomic(&summary_csv, format!("{}\n{}\n", PruneSummary::CSV_HEADER, summary.csv_row()).as_bytes())?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn eval(ctx: &Ctx, model: &Path, data_path: &Path, name: Option<String>, out: Option<PathBuf>) -> Result<()> {
    let cfg = &ctx.cfg;
    let name = name.unwrap_or_else(|| model.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default());
    if name.is_empty() || name.contains([',', '\n', '#']) {
        return Err(config(format!("model name {name:?} must be nonempty without commas or '#'")));
    }
    let path = ctx.out(out, &format!("{name}.predictions.csv"));
    let report_path = path.with_file_name(format!("{name}.report.txt"));
    check_outputs(&[&path, &report_path], ctx.force)?;
    let ckpt = load_checkpoint(model, LoadMode::EvalOnly)?;
    let data = load_dataset(data_path)?;
    check_config_matches(cfg, &data, data_path)?;
    check_graph_fits(&ckpt.graph, model, &data, data_path)?;
    let train_set = part(&data, SplitPart::Train)?;
    let set = part(&data, cfg.eval_split)?;
    // An untrained network still needs input scaling; fit it on the training split.
    let norm = ckpt.norm.clone().unwrap_or_else(|| Normalizer::fit(&train_set));
    let model_obj = Model {
        graph: ckpt.graph,
        norm,
    };
    let pred = predict(&model_obj, &set).map_err(|e| from_train("evaluation", e))?;
    if let Some(i) = pred.iter().position(|v| !v.is_finite()) {
        return Err(fail(Class::Numeric, format!("non-finite prediction for window {i}")));
    }
    let p = Predictions {
        model_name: name.clone(),
        split: cfg.eval_split.name().into(),
        subject_ids: set.subjects.clone(),
        window_ids: set.window_ids.clone(),
        levels: set.levels.clone(),
        reference: set.targets.iter().map(|&v| v as f64).collect(),
        predicted: pred.iter().map(|&v| v as f64).collect(),
        effective_params: model_obj.graph.effective_param_count(),
        connectivity: connectivity_score(&model_obj.graph).score,
    };
    let train_mean = train_set.targets.iter().map(|&v| v as f64).sum::<f64>() / train_set.len() as f64;
    let baseline: Vec<f64> = vec![train_mean; p.len()];
    let ctx_err = |e| from_stats(&name, e);
    let mut pairs: Vec<(String, String)> = vec![
        ("model".into(), name.clone()),
        ("split".into(), p.split.clone()),
        ("n".into(), p.len().to_string()),
        ("effective_params".into(), p.effective_params.to_string()),
        ("connectivity".into(), format!("{:e}", p.connectivity)),
        ("rmse".into(), format!("{:.6}", rmse(&p.predicted, &p.reference).map_err(ctx_err)?)),
        ("mae".into(), format!("{:.6}", mae(&p.predicted, &p.reference).map_err(ctx_err)?)),
        ("baseline_rmse".into(), format!("{:.6}", rmse(&baseline, &p.reference).map_err(ctx_err)?)),
        (
            "pearson_r".into(),
            pearson_r(&p.predicted, &p.reference)
                .map(|r| format!("{r:.6}"))
                .unwrap_or_else(|_| "undefined".into()),
        ),
    ];
    if let Ok(ba) = bland_altman(&p.predicted, &p.reference, LOA_COVERAGE) {
        pairs.push(("mean_diff".into(), format!("{:.6}", ba.mean_diff)));
        pairs.push(("lower_loa".into(), format!("{:.6}", ba.lower)));
        pairs.push(("upper_loa".into(), format!("{:.6}", ba.upper)));
    }
    for (l, e) in stratified_error(&p.predicted, &p.reference, &p.levels).map_err(ctx_err)? {
        pairs.push((format!("rmse_level{l}"), format!("{e:.6}")));
    }
    let report = ventnet_core::kv::render(&pairs);
    write_atomic(&path, predictions_text(&p).as_bytes())?;
    write_atomic(&report_path, report.as_bytes())?;
    print!("{report}");
    println!("wrote {}", path.display());
    Ok(())
}

/// Files written by `compare`, relative to the output directory.
pub const COMPARE_OUTPUTS: [&str; 9] = [
    "metrics.csv",
    "comparison.txt",
    "significance.csv",
    "level_rmse.csv",
    "level_rmse.svg",
    "scatter.csv",
    "scatter.svg",
    "subject_rmse.csv",
    "prune_summary.csv",
];

pub fn compare(ctx: &Ctx, a_path: &Path, b_path: &Path, prune_summary: Option<PathBuf>) -> Result<()> {
    let outputs: Vec<PathBuf> = COMPARE_OUTPUTS
        .iter()
        .filter(|n| prune_summary.is_some() || **n != "prune_summary.csv")
        .map(|n| ctx.out_dir.join(n))
        .collect();
    check_outputs(&outputs.iter().map(PathBuf::as_path).collect::<Vec<_>>(), ctx.force)?;
    let a = load_predictions(a_path)?;
    let b = load_predictions(b_path)?;
    let summary = prune_summary
        .as_ref()
        .map(|p| {
            PruneSummary::from_kv(&read_text(p)?).map_err(|e| fail(Class::DataFormat, format!("{}: {e}", p.display())))
        })
        .transpose()?;
    if a.model_name == b.model_name {
        return Err(config(format!("both prediction files are labelled {:?}", a.model_name)));
    }
    let cmp = compare_models(&a, &b, ctx.cfg.alpha).map_err(|e| from_stats("compare", e))?;
    let metrics = metrics_csv(&[&a, &b]).map_err(|e| from_stats("metrics", e))?;

    let mut kv = cmp.to_kv();
    if let Some(s) = &summary {
        for (k, v) in s.to_pairs() {
            let _ = writeln!(kv, "prune.{k}={v}");
        }
    }
    let sig = &cmp.significance;
    let significance = format!(
        "model_a,model_b,n_used,statistic,p_value,alpha,annotation,method\n{},{},{},{},{:.6},{},{},{}\n",
        a.model_name,
        b.model_name,
        sig.n_used,
        sig.statistic,
        sig.p_value,
        sig.alpha,
        sig.annotation.label(),
        if sig.method == ventnet_core::stats::Method::Exact { "exact" } else { "normal" }
    );
    let mut levels = String::from("model,level,n,rmse\n");
    for (p, r) in [(&a, &cmp.report_a), (&b, &cmp.report_b)] {
        for (l, e) in &r.per_level_rmse {
            let n = p.levels.iter().filter(|v| *v == l).count();
            let _ = writeln!(levels, "{},{l},{n},{e}", p.model_name);
        }
    }
    let mut scatter = String::from("model,subject,window,level,reference,predicted\n");
    let mut subjects = String::from("model,subject,rmse\n");
    for p in [&a, &b] {
        for i in 0..p.len() {
            let _ = writeln!(
                scatter,
                "{},{},{},{},{},{}",
                p.model_name, p.subject_ids[i], p.window_ids[i], p.levels[i], p.reference[i], p.predicted[i]
            );
        }
        for (s, e) in per_subject_rmse(&p.predicted, &p.reference, &p.subject_ids).map_err(|e| from_stats("subjects", e))? {
            let _ = writeln!(subjects, "{},{s},{e}", p.model_name);
        }
    }
    let mut files: Vec<(&str, String)> = vec![
        ("metrics.csv", metrics),
        ("comparison.txt", kv),
        ("significance.csv", significance),
        ("level_rmse.csv", levels),
        ("level_rmse.svg", level_bars_svg(&[&cmp.report_a, &cmp.report_b])),
        ("scatter.csv", scatter),
        ("scatter.svg", scatter_svg(&[&a, &b])),
        ("subject_rmse.csv", subjects),
    ];
    if let Some(s) = &summary {
        files.push(("prune_summary.csv", format!("{}\n{}\n", PruneSummary::CSV_HEADER, s.csv_row())));
    }
    for (name, body) in &files {
        write_atomic(&ctx.out_dir.join(name), body.as_bytes())?;
    }
    println!(
        "{}: rmse={:.4} r={:.4} | {}: rmse={:.4} r={:.4}",
        a.model_name, cmp.report_a.rmse, cmp.report_a.pearson_r, b.model_name, cmp.report_b.rmse, cmp.report_b.pearson_r
    );
    println!(
        "delta_rmse={:.4} delta_r={:.4} delta_params={:.1}% p={:.4} {}",
        cmp.delta_rmse,
        cmp.delta_r,
        100.0 * cmp.delta_params,
        sig.p_value,
        sig.annotation.label()
    );
    println!("wrote {} files to {}", files.len(), ctx.out_dir.display());
    Ok(())
}
