//! Runs the five-row comparison on the synthetic benchmark.
//!
//! usage: benchmark [seeds] [lstm sizes] [theta amplitude] [baseline,pre,fine]
//! e.g.   benchmark 1,2,3 16,8 0.6 100,20,50
//!
//! `BENCH_RATIOS=alpha,beta` rescales the secondary components and
//! `BENCH_PER_CLASS=n` changes the class size and `BENCH_LR` the Adam
//! learning rate, for calibration sweeps.

use std::time::Instant;

use eeg_lstm::augment::build_corpus;
use eeg_lstm::dsp::{BandName, DEFAULT_FS, DEFAULT_ORDER};
use eeg_lstm::nn::ModelConfig;
use eeg_lstm::synth::{benchmark_spec, default_benchmark_spec, generate_trials};
use eeg_lstm::train::{run_table2_protocol, ProtocolConfig};

fn list(arg: Option<String>, default: &str) -> Vec<String> {
    arg.unwrap_or_else(|| default.to_string()).split(',').map(str::to_string).collect()
}

fn main() -> eeg_lstm::Result<()> {
    let mut args = std::env::args().skip(1);
    let seeds: Vec<u64> = list(args.next(), "1,2,3").iter().map(|s| s.parse().unwrap()).collect();
    let sizes: Vec<usize> = list(args.next(), "16,8").iter().map(|s| s.parse().unwrap()).collect();
    let amplitude: Option<f64> = args.next().map(|s| s.parse().unwrap());
    let budget: Vec<usize> = list(args.next(), "100,20,50").iter().map(|s| s.parse().unwrap()).collect();

    let mut spec = amplitude.map_or_else(default_benchmark_spec, benchmark_spec);
    if let Ok(r) = std::env::var("BENCH_RATIOS") {
        let r: Vec<f64> = r.split(',').map(|s| s.parse().unwrap()).collect();
        for sig in spec.signatures.iter_mut() {
            let theta = sig[0].amplitude;
            sig[1].amplitude = theta * r[0];
            sig[2].amplitude = theta * r[1];
        }
    }
    if let Ok(n) = std::env::var("BENCH_PER_CLASS") {
        spec.n_per_class = [n.parse().unwrap(); 3];
    }
    let trials = generate_trials(&spec)?;
    let bands: Vec<_> = BandName::ALL.iter().map(|b| b.spec()).collect();
    let corpus = build_corpus(&trials, &bands, DEFAULT_FS, DEFAULT_ORDER)?;

    let mut model = ModelConfig::default().with_lstm_sizes(&sizes);
    model.dense_hidden = 16;
    for seed in seeds {
        let mut cfg = ProtocolConfig {
            model: model.clone(),
            baseline_epochs: budget[0],
            pretrain_epochs: budget[1],
            finetune_epochs: budget[2],
            ..ProtocolConfig::default()
        };
        cfg.train.seed = seed;
        if let Ok(lr) = std::env::var("BENCH_LR") {
            cfg.train.adam.learning_rate = lr.parse().unwrap();
        }
        let start = Instant::now();
        let report = run_table2_protocol(&trials, &corpus, &cfg)?;
        println!("seed {seed} ({:.0} s)", start.elapsed().as_secs_f64());
        print!("{}", report.to_text());
    }
    Ok(())
}
