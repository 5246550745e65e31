//! Recall of every ablation variant on synthetic pairs.
//!
//! Usage: ablation [seeds] [key=value ...] where keys are trainer or fixture
//! fields, e.g. `ablation 5 dim=32 epochs=40 groups=8`.

use crossval::experiment::{PreparedPair, Variant};
use crossval::synth::{generate, SyntheticConfig};
use crossval::trainer::TrainerConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let seeds: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(3);
    let mut trainer = serde_json::to_value(TrainerConfig::default())?;
    let mut fixture = serde_json::to_value(SyntheticConfig::default())?;
    let mut lambdas = vec![];
    let mut cross_only = false;
    let mut cross_sum = 0.0;
    for kv in args {
        let (k, v) = kv.split_once('=').ok_or("expected key=value")?;
        let value: serde_json::Value = serde_json::from_str(v).unwrap_or(v.into());
        if k == "cross" {
            cross_only = v == "1";
        } else if k == "lambdas" {
            lambdas = v.split(',').map(|x| x.parse().unwrap()).collect();
        } else if trainer.get(k).is_some() {
            trainer[k] = value;
        } else if fixture.get(k).is_some() {
            fixture[k] = value;
        } else {
            return Err(format!("unknown key {k}").into());
        }
    }
    let trainer: TrainerConfig = serde_json::from_value(trainer)?;
    let fixture: SyntheticConfig = serde_json::from_value(fixture)?;
    let mut sums = [0.0; 4];
    let mut lsums = vec![0.0; lambdas.len()];
    let start = std::time::Instant::now();
    for seed in 0..seeds {
        let pair = generate(&SyntheticConfig {
            seed,
            ..fixture.clone()
        })?;
        let prepared = PreparedPair::from_synthetic(&pair)?;
        let cfg = TrainerConfig {
            seed,
            ..trainer.clone()
        };
        let mut line = format!("seed {seed}:");
        for (i, v) in Variant::ALL.iter().enumerate() {
            let m = prepared.run(*v, &cfg)?;
            sums[i] += m.recall;
            line += &format!(" {:?}={:.3}", v, m.recall);
        }
        if cross_only {
            let c = TrainerConfig {
                confidence: false,
                cross_negatives: true,
                ..cfg.clone()
            };
            let r = prepared.run_with(true, &c)?.recall;
            cross_sum += r;
            line += &format!(" cross={r:.3}");
        }
        for (i, l) in lambdas.iter().enumerate() {
            let m = prepared.run(
                Variant::Full,
                &TrainerConfig {
                    lambda: *l,
                    ..cfg.clone()
                },
            )?;
            lsums[i] += m.recall;
            line += &format!(" l{l}={:.3}", m.recall);
        }
        println!("{line}");
    }
    let n = seeds as f64;
    println!(
        "mean: single={:.3} two={:.3} conf={:.3} full={:.3}  ({:.1}s)",
        sums[0] / n,
        sums[1] / n,
        sums[2] / n,
        sums[3] / n,
        start.elapsed().as_secs_f64()
    );
    if cross_only {
        println!("cross only: {:.3}", cross_sum / n);
    }
    for (l, s) in lambdas.iter().zip(&lsums) {
        println!("lambda {l}: {:.3}", s / n);
    }
    Ok(())
}
