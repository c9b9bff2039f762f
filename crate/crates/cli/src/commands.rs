use std::fs;
use std::path::{Path, PathBuf};

use eeg_lstm::augment::{build_corpus, read_corpus, write_corpus, AugmentedCorpus};
use eeg_lstm::checkpoint::{load_checkpoint_for, save_checkpoint, Checkpoint};
use eeg_lstm::dataset::{class_counts, load_dataset, save_json, stratified_split, BandTag, DatasetManifest, SplitPlan, Trial};
use eeg_lstm::metrics::EvalReport;
use eeg_lstm::nn::{param_count, REPORTED_PARAM_COUNT};
use eeg_lstm::synth::{generate, MANIFEST_FILE};
use eeg_lstm::train::{
    band_training_set, evaluate, finetune_observed, initial_checkpoint, pretrain_curriculum,
    run_table2_protocol_observed, select, PreparedSet, ProtocolEvent, TrainHistory,
};
use serde::Serialize;

use crate::config::RunConfig;
use crate::{Cli, CliError, Command};

pub const CONFIG_ECHO: &str = "effective_config.toml";

struct Ctx {
    cfg: RunConfig,
    out: Option<PathBuf>,
}

impl Ctx {
    fn out(&self) -> Result<&Path, CliError> {
        self.out
            .as_deref()
            .ok_or_else(|| CliError::Usage("--out <DIR> is required for this command".into()))
    }

    /// Creates the output directory and echoes the effective config into it.
    fn prepare_out(&self) -> Result<Option<&Path>, CliError> {
        let Some(out) = self.out.as_deref() else {
            return Ok(None);
        };
        fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
        let path = out.join(CONFIG_ECHO);
        fs::write(&path, self.cfg.to_toml()).map_err(|e| io_err(&path, e))?;
        Ok(Some(out))
    }

    fn split(&self, trials: &[Trial]) -> Result<SplitPlan, CliError> {
        let labels: Vec<_> = trials.iter().map(|t| t.label).collect();
        Ok(stratified_split(&labels, self.cfg.protocol.split_ratio, self.cfg.seed)?)
    }

    fn prepared(&self, trials: &[Trial], idx: &[usize]) -> Result<PreparedSet, CliError> {
        Ok(PreparedSet::new(&select(trials, idx)?, &self.cfg.model, self.cfg.train.normalize)?)
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(eeg_lstm::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    Ok(save_json(path, value)?)
}

fn load_trials(dir: &Path) -> Result<Vec<Trial>, CliError> {
    let manifest = DatasetManifest::read(&dir.join(MANIFEST_FILE))?;
    Ok(load_dataset(&manifest)?)
}

fn epoch_line(label: &str, epoch: usize, h: &TrainHistory) {
    println!(
        "{label} epoch {:>3}  loss {:.4}  acc {:.4}  {:.2}s",
        epoch + 1,
        h.loss[epoch],
        h.accuracy[epoch],
        h.epoch_seconds[epoch]
    );
}

fn print_eval(name: &str, r: &EvalReport) {
    println!(
        "{name}: weighted F1 {:.4}  accuracy {:.4}  per-class F1 [{:.4}, {:.4}, {:.4}]",
        r.weighted_f1, r.accuracy, r.per_class[0].f1, r.per_class[1].f1, r.per_class[2].f1
    );
}

#[derive(Serialize)]
struct EvalOutput<'a> {
    checkpoint: String,
    provenance: &'a [eeg_lstm::checkpoint::Stage],
    test_trials: usize,
    weighted_f1: f64,
    macro_f1: f64,
    accuracy: f64,
    per_class_f1: [f64; 3],
    confusion: [[u64; 3]; 3],
}

fn eval_output<'a>(path: &Path, ckpt: &'a Checkpoint, r: &EvalReport, n: usize) -> EvalOutput<'a> {
    EvalOutput {
        checkpoint: path.display().to_string(),
        provenance: &ckpt.provenance,
        test_trials: n,
        weighted_f1: r.weighted_f1,
        macro_f1: r.macro_f1,
        accuracy: r.accuracy,
        per_class_f1: [r.per_class[0].f1, r.per_class[1].f1, r.per_class[2].f1],
        confusion: r.confusion.counts,
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        // only fails if a pool already exists, which cannot happen this early
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    if let Command::Synth(args) = &cli.command {
        if let Some(pc) = &args.per_class {
            cfg.synth.per_class = pc
                .as_slice()
                .try_into()
                .map_err(|_| CliError::Usage("--per-class takes three counts: left,high,right".into()))?;
        }
        if let Some(p) = args.participants {
            cfg.synth.participants = p;
        }
    }
    if let Command::Table2(args) = &cli.command {
        cfg.protocol.mixed_pool |= args.mixed_pool;
    }
    cfg.validate()?;
    eprintln!("seed {}", cfg.seed);
    let ctx = Ctx { cfg, out: cli.out };
    match cli.command {
        Command::Synth(_) => synth(&ctx),
        Command::Augment(a) => augment(&ctx, &a.data),
        Command::Train(a) => train(&ctx, &a.data, a.epochs),
        Command::Pretrain(a) => pretrain(&ctx, &a),
        Command::Finetune(a) => finetune(&ctx, &a),
        Command::Eval(a) => eval(&ctx, &a),
        Command::Table2(a) => table2(&ctx, &a),
        Command::Params => params(&ctx),
    }
}

fn synth(ctx: &Ctx) -> Result<(), CliError> {
    ctx.out()?;
    let spec = ctx.cfg.synth_spec();
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let out = ctx.prepare_out()?.expect("checked above");
    let manifest = generate(&spec, out)?;
    let [l, h, r] = class_counts(manifest.labels());
    println!(
        "wrote {} trials (left {l}, high {h}, right {r}) from {} participants to {}",
        manifest.len(),
        spec.n_participants,
        out.display()
    );
    Ok(())
}

fn bands(ctx: &Ctx) -> Vec<eeg_lstm::dsp::BandSpec> {
    ctx.cfg.filter.bands.iter().map(|b| b.spec()).collect()
}

fn augment(ctx: &Ctx, data: &Path) -> Result<(), CliError> {
    ctx.out()?;
    let trials = load_trials(data)?;
    let fs = trials.first().map_or(eeg_lstm::dsp::DEFAULT_FS, |t| t.fs);
    let corpus = build_corpus(&trials, &bands(ctx), fs, ctx.cfg.filter.order)?;
    let out = ctx.prepare_out()?.expect("checked above");
    write_corpus(&corpus, out)?;
    for (tag, subset) in &corpus.subsets {
        let [l, h, r] = class_counts(subset.iter().map(|t| t.label));
        println!("{tag:<6} {} trials (left {l}, high {h}, right {r})", subset.len());
    }
    println!("corpus {} trials, hash {}", corpus.total(), corpus.provenance.corpus_hash);
    Ok(())
}

fn train(ctx: &Ctx, data: &Path, epochs: Option<usize>) -> Result<(), CliError> {
    ctx.out()?;
    let trials = load_trials(data)?;
    let split = ctx.split(&trials)?;
    let train_set = ctx.prepared(&trials, &split.train)?;
    let test_set = ctx.prepared(&trials, &split.test)?;
    let out = ctx.prepare_out()?.expect("checked above");
    split.save(&out.join("split.json"))?;
    let cfg = ctx.cfg.train_config(epochs.unwrap_or(ctx.cfg.train.epochs));
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let init = initial_checkpoint(&ctx.cfg.model, ctx.cfg.seed)?;
    let (ckpt, history) = finetune_observed(&init, &train_set, &cfg, &mut |e, h| epoch_line("train", e, h))?;
    finish_training(ctx, out, "model.nckp", &ckpt, &history, &test_set)
}

fn finish_training(
    ctx: &Ctx,
    out: &Path,
    name: &str,
    ckpt: &Checkpoint,
    history: &TrainHistory,
    test_set: &PreparedSet,
) -> Result<(), CliError> {
    let path = out.join(name);
    save_checkpoint(ckpt, &path)?;
    write_json(&out.join("history.json"), history)?;
    let report = evaluate(&ckpt.params, test_set, ctx.cfg.train.batch_size)?;
    write_json(&out.join("eval.json"), &eval_output(&path, ckpt, &report, test_set.len()))?;
    print_eval("test", &report);
    println!("saved {}", path.display());
    Ok(())
}

fn pretrain(ctx: &Ctx, args: &crate::PretrainArgs) -> Result<(), CliError> {
    ctx.out()?;
    let order: Vec<BandTag> = match &args.order {
        Some(names) => names
            .iter()
            .map(|n| n.parse::<BandTag>().map_err(|e| CliError::Usage(e.to_string())))
            .collect::<Result<_, _>>()?,
        None => ctx.cfg.protocol.curriculum.clone(),
    };
    if order.is_empty() || order.contains(&BandTag::Raw) {
        return Err(CliError::Usage("--order must list band subsets".into()));
    }
    let epochs = args.epochs.unwrap_or(ctx.cfg.protocol.pretrain_epochs);
    let corpus: AugmentedCorpus = read_corpus(&args.corpus)?;
    let first = corpus
        .subsets
        .values()
        .next()
        .ok_or_else(|| CliError::Runtime(eeg_lstm::Error::Dataset("corpus is empty".into())))?;
    let split = ctx.split(first)?;
    let sets = order
        .iter()
        .map(|&tag| band_training_set(&corpus, tag, &split.train, &ctx.cfg.model, ctx.cfg.train.normalize))
        .collect::<eeg_lstm::Result<Vec<_>>>()?;
    let start = match &args.from {
        Some(p) => load_checkpoint_for(p, &ctx.cfg.model)?,
        None => initial_checkpoint(&ctx.cfg.model, ctx.cfg.seed)?,
    };
    let out = ctx.prepare_out()?.expect("checked above");
    split.save(&out.join("split.json"))?;
    let refs: Vec<&PreparedSet> = sets.iter().collect();
    let stages = pretrain_curriculum(&start, &order, &refs, epochs, &ctx.cfg.train_config(epochs))?;
    for (i, (tag, ckpt, history)) in stages.iter().enumerate() {
        let path = out.join(format!("stage{}_{tag}.nckp", i + 1));
        save_checkpoint(ckpt, &path)?;
        write_json(&out.join(format!("stage{}_{tag}_history.json", i + 1)), history)?;
        println!(
            "stage {} {tag}: final loss {:.4}  acc {:.4}  -> {}",
            i + 1,
            history.loss.last().copied().unwrap_or(f64::NAN),
            history.accuracy.last().copied().unwrap_or(f64::NAN),
            path.display()
        );
    }
    Ok(())
}

fn finetune(ctx: &Ctx, args: &crate::FinetuneArgs) -> Result<(), CliError> {
    ctx.out()?;
    let start = load_checkpoint_for(&args.checkpoint, &ctx.cfg.model)?;
    let trials = load_trials(&args.data)?;
    let split = ctx.split(&trials)?;
    let train_set = ctx.prepared(&trials, &split.train)?;
    let test_set = ctx.prepared(&trials, &split.test)?;
    let out = ctx.prepare_out()?.expect("checked above");
    split.save(&out.join("split.json"))?;
    let cfg = ctx.cfg.train_config(args.epochs.unwrap_or(ctx.cfg.protocol.finetune_epochs));
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let (ckpt, history) = finetune_observed(&start, &train_set, &cfg, &mut |e, h| epoch_line("finetune", e, h))?;
    finish_training(ctx, out, "finetuned.nckp", &ckpt, &history, &test_set)
}

fn eval(ctx: &Ctx, args: &crate::EvalArgs) -> Result<(), CliError> {
    let ckpt = load_checkpoint_for(&args.checkpoint, &ctx.cfg.model)?;
    let trials = load_trials(&args.data)?;
    let split = match &args.split {
        Some(p) => SplitPlan::load(p)?,
        None => ctx.split(&trials)?,
    };
    let test_set = ctx.prepared(&trials, &split.test)?;
    let report = evaluate(&ckpt.params, &test_set, ctx.cfg.train.batch_size)?;
    print_eval("test", &report);
    for (i, row) in report.confusion.counts.iter().enumerate() {
        println!("  true {i}: {row:?}");
    }
    if let Some(out) = ctx.prepare_out()? {
        write_json(&out.join("eval.json"), &eval_output(&args.checkpoint, &ckpt, &report, test_set.len()))?;
    }
    Ok(())
}

fn table2(ctx: &Ctx, args: &crate::Table2Args) -> Result<(), CliError> {
    ctx.out()?;
    let trials = load_trials(&args.data)?;
    let corpus = match &args.corpus {
        Some(dir) => read_corpus(dir)?,
        None => {
            let fs = trials.first().map_or(eeg_lstm::dsp::DEFAULT_FS, |t| t.fs);
            build_corpus(&trials, &bands(ctx), fs, ctx.cfg.filter.order)?
        }
    };
    let out = ctx.prepare_out()?.expect("checked above");
    let report = run_table2_protocol_observed(&trials, &corpus, &ctx.cfg.protocol_config(), &mut |ev| match ev {
        ProtocolEvent::Stage { row, subset, epochs } => eprintln!("[{row}] {subset} for {epochs} epochs"),
        ProtocolEvent::Epoch {
            row,
            epoch,
            loss,
            accuracy,
        } => eprintln!("[{row}] epoch {:>3}  loss {loss:.4}  acc {accuracy:.4}", epoch + 1),
        ProtocolEvent::Row(r) => eprintln!("[{}] test weighted F1 {:.4}", r.label, r.weighted_f1),
    })?;
    let json = report.to_json()?;
    let path = out.join("report.json");
    fs::write(&path, json).map_err(|e| io_err(&path, e))?;
    let text = report.to_text();
    let path = out.join("report.txt");
    fs::write(&path, &text).map_err(|e| io_err(&path, e))?;
    print!("{text}");
    println!("ref: F1 values published for the same rows, shown for comparison only");
    Ok(())
}

#[derive(Serialize)]
struct ParamsOutput {
    layers: Vec<(String, usize)>,
    total: usize,
    reported_total: usize,
}

fn params(ctx: &Ctx) -> Result<(), CliError> {
    let layers = ctx.cfg.model.layer_param_counts();
    let total = param_count(&ctx.cfg.model);
    println!("{:<8} {:>10}", "layer", "params");
    for (name, n) in &layers {
        println!("{name:<8} {n:>10}");
    }
    println!("{:<8} {total:>10}", "total");
    println!(
        "note: the original publication reports {REPORTED_PARAM_COUNT} parameters for this architecture; \
         the layer formulas 4h(d+h+1) and out(in+1) give {total} for the configuration above"
    );
    if let Some(out) = ctx.prepare_out()? {
        write_json(
            &out.join("params.json"),
            &ParamsOutput {
                layers,
                total,
                reported_total: REPORTED_PARAM_COUNT,
            },
        )?;
    }
    Ok(())
}
