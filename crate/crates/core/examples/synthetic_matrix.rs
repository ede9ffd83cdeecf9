//! Generates the default synthetic corpus in memory, trains a codebook and
//! prints the configuration matrix.
//!
//! `cargo run --release -p egosearch --example synthetic_matrix -- [seed] [noise] [distractor_rate] [words]`

use std::time::Instant;

use egosearch::trainer::sweep;
use egosearch::{
    generate, run_matrix, train_codebook, FilterMethod, MatrixOptions, PresetOptions, QueryMode, Rerank, SynthSpec,
    TargetMode, ThresholdPolicy,
};

fn main() -> egosearch::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, d: &str| args.get(i).cloned().unwrap_or_else(|| d.to_string());
    let seed: u64 = arg(0, "4").parse().unwrap();
    let opts = PresetOptions {
        noise: arg(1, "0.4").parse().unwrap(),
        distractor_rate: arg(2, "0.15").parse().unwrap(),
        ..PresetOptions::default()
    };
    let words: usize = arg(3, "96").parse().unwrap();

    let start = Instant::now();
    let corpus = generate(&SynthSpec::preset(seed, &opts)?)?;
    let codebook = train_codebook(&corpus.descriptor_samples(7), words, 30, seed)?;
    let ds = corpus.to_dataset(&codebook)?;
    println!("prepared in {:?}", start.elapsed());

    let fixed = run_matrix(&ds, &MatrixOptions::default())?;
    println!("-- default thresholds\n{}", fixed.to_text());

    let days = ds.judged_days();
    let (train, _) = days.split_at(days.len() * 2 / 5);
    let trained = run_matrix(
        &ds,
        &MatrixOptions {
            policy: ThresholdPolicy::Trained {
                train_days: train.to_vec(),
            },
            eval_days: Vec::new(),
        },
    )?;
    println!("-- trained thresholds\n{}", trained.to_text());
    let worst = trained.cells().map(|c| c.amrr).fold(f64::INFINITY, f64::min);
    println!(
        "summary: baseline {:.4} worst cell {:.4} best cell {:.4}",
        trained.baseline(),
        worst,
        trained.best_cell().map_or(0.0, |c| c.amrr)
    );

    let cache = ds.score_cache(QueryMode::FullImage, TargetMode::Saliency, train)?;
    for method in FilterMethod::ALL {
        for rerank in Rerank::ALL {
            let s = sweep(&cache, method, rerank)?;
            println!(
                "sweep {method} {rerank}: best {:.2} -> {:.4} (ends {:.4} / {:.4})",
                s.best_threshold, s.best_amrr, s.amrr_at[0], s.amrr_at[100]
            );
        }
    }
    println!("total {:?}", start.elapsed());
    Ok(())
}
