//! Bias and coverage of every procedure on its matched design.
//!
//! `cargo run --release --example matched_designs -- [reps] [seed] [P3,P14,...]`

use std::time::Instant;

use proxi2s::proximal::Procedure;
use proxi2s::sim::{matched_config, run_study, Estimator};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let reps: usize = args.get(1).map_or(50, |s| s.parse().expect("reps"));
    let seed: u64 = args.get(2).map_or(20230601, |s| s.parse().expect("seed"));
    let only: Vec<&str> = args.get(3).map(|s| s.split(',').collect()).unwrap_or_default();
    for p in Procedure::ALL {
        if !only.is_empty() && !only.contains(&p.id()) {
            continue;
        }
        let mut c = matched_config(p);
        c.replications = reps;
        c.master_seed = seed;
        let n = c.sample_sizes[0];
        let t = Instant::now();
        match run_study(&c) {
            Ok(r) => {
                let ts = r.row(n, Estimator::TwoStage).expect("two-stage row");
                let nv = r.row(n, Estimator::Naive).expect("naive row");
                println!(
                    "{:4} bias {:+.4} (z {:+.2})  emp se {:.4}  model se {:.4}  coverage {:.3}  failures {}  naive bias {:+.3}  [{:.1?}]",
                    p.id(),
                    ts.bias,
                    ts.bias / ts.mc_se(reps),
                    ts.empirical_se,
                    ts.model_se,
                    ts.coverage,
                    ts.failures,
                    nv.bias,
                    t.elapsed()
                );
            }
            Err(e) => println!("{:4} error: {e}", p.id()),
        }
    }
}
