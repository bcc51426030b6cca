// Scratch end-to-end check: full AL loop on one problem, both strategies.
use almgp::active::{run_loop, LoopInputs, StopMetric, Strategy};
use almgp::mgp::MgpParams;
use almgp::problems::{make_oracle, make_problem_data, Problem, ProblemName};
use almgp::{stage_seed, stages};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn main() {
    let name = match std::env::args().nth(1).as_deref() {
        Some("synthetic2d") => ProblemName::Synthetic2d,
        Some("sphere3d") => ProblemName::Sphere3d,
        Some("borehole8d") => ProblemName::Borehole8d,
        _ => ProblemName::Trig1d,
    };
    let reps: u64 = std::env::args()
        .nth(2)
        .and_then(|s| s.parse().ok())
        .unwrap_or(10);
    let mut p = Problem::get(name);
    p.al.stop_metric = StopMetric::Off;
    for strategy in [Strategy::Alc, Strategy::Random] {
        let mut finals = Vec::new();
        let t0 = Instant::now();
        for seed in 0..reps {
            let ts = Instant::now();
            let data = make_problem_data(&p, seed).unwrap();
            let mut init_rng = ChaCha8Rng::seed_from_u64(stage_seed(seed, stages::INIT));
            let init = MgpParams::init(&p.arch, &mut init_rng);
            let inputs = LoopInputs {
                arch: &p.arch,
                init,
                train: data.train,
                pool: data.pool,
                test: &data.test,
                strategy,
                al: &p.al,
                opt: &p.opt,
                rmse_stop_in_optimizer: p.rmse_stop_in_optimizer,
                run_id: 0,
                seed,
            };
            let oracle = make_oracle(&p, seed);
            match run_loop(inputs, oracle) {
                Ok(out) => {
                    let last = out.records.last().unwrap();
                    println!(
                        "{name:?} {strategy:?} seed {seed}: rounds={} final_rmse={:.5} ({:.0}s)",
                        last.iteration,
                        last.test_rmse,
                        ts.elapsed().as_secs_f64()
                    );
                    finals.push(last.test_rmse);
                }
                Err(abort) => {
                    println!("{name:?} {strategy:?} seed {seed}: ABORT {:?}", abort.error);
                    finals.push(f64::NAN);
                }
            }
        }
        let mean = finals.iter().sum::<f64>() / finals.len() as f64;
        println!(
            "== {name:?} {strategy:?}: mean final rmse {mean:.5} over {} seeds, {:.1}s total",
            finals.len(),
            t0.elapsed().as_secs_f64()
        );
    }
}
