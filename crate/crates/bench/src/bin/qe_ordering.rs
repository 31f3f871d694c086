//! Mean quantization error per strategy on random and clustered corpora.
//!
//! Checks the benchmark-level ordering QE(hbrb) <= QE(kmajority) * 1.02 and reports
//! whether local-brb lies between the two. Exits 1 if the ordering fails on any corpus.
//!
//! Usage: `qe_ordering [n] [seeds]` (defaults 50000 and 5).

use hbrb_bench::{clustered_set, random_set};
use hbrb_core::{quantization_report, train, DescriptorSet, Strategy, TrainConfig};

fn mean_qe(corpus: &DescriptorSet, strategy: Strategy, seed: u64) -> f64 {
    let cfg = TrainConfig {
        k: 8,
        depth: 3,
        strategy,
        seed,
        ..TrainConfig::default()
    };
    let vocab = train(corpus, &cfg).expect("train");
    quantization_report(&vocab, corpus).expect("report").mean_qe
}

type Corpus = fn(usize, u64) -> DescriptorSet;

fn main() {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(50_000, |a| a.parse().expect("n"));
    let seeds: u64 = args.next().map_or(5, |a| a.parse().expect("seeds"));
    let corpora: [(&str, Corpus); 3] = [
        ("random", |n, s| random_set(n, s)),
        ("clustered-100", |n, s| clustered_set(100, n, s)),
        ("clustered-512", |n, s| clustered_set(512, n, s)),
    ];
    let mut ok = true;
    for (name, make) in corpora {
        let mut sums = [0.0; 3];
        for seed in 0..seeds {
            let corpus = make(n, seed);
            for (i, s) in Strategy::ALL.into_iter().enumerate() {
                sums[i] += mean_qe(&corpus, s, seed);
            }
        }
        let [km, local, hbrb] = sums.map(|s| s / seeds as f64);
        let ordered = hbrb <= km * 1.02;
        let between = local >= hbrb.min(km) && local <= hbrb.max(km);
        ok &= ordered;
        println!(
            "{name:<14} kmajority={km:.3} local-brb={local:.3} hbrb={hbrb:.3} ordering={} local-between={}",
            if ordered { "ok" } else { "FAIL" },
            if between { "yes" } else { "no" },
        );
    }
    std::process::exit(if ok { 0 } else { 1 });
}
