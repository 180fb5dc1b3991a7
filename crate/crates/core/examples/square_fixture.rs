use lacuna_core::fixture::{run_square_fixture, FixtureConfig};

fn main() {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    for seed in 0..seeds {
        let cfg = FixtureConfig {
            seed,
            ..Default::default()
        };
        let t0 = std::time::Instant::now();
        let run = run_square_fixture(&cfg).expect("fixture run");
        println!("seed {seed} square {:?} ({:.2?})", run.lacuna.square, t0.elapsed());
        for (name, report) in &run.reports {
            println!("[{name}]\n{}", report.to_table());
        }
    }
}
