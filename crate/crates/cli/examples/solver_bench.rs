//! Compares tour costs found by the built-in solvers (and an external LKH
//! binary when `LKH` points at one) on random 12-variable tables.
//!
//!     cargo run --release -p bntsp-cli --example solver_bench

use std::time::Instant;

use bntsp_cli::{cmd_learn, RunConfig, Solver};
use bntsp_core::synthetic::random_table;

fn main() {
    let lkh = std::env::var_os("LKH");
    let mut solvers = vec![Solver::Kopt2, Solver::Kopt3];
    if lkh.is_some() {
        solvers.push(Solver::LkhExternal);
    }
    println!("{:>8} {:>14} {:>14} {:>9}", "instance", "solver", "tour cost", "seconds");
    for inst in 0..5u64 {
        let dir = tempfile::tempdir().expect("temp dir");
        let table = random_table(12, 2000, inst).expect("table");
        let mut schema = String::new();
        for (name, &r) in table.names().iter().zip(table.cardinalities()) {
            let states: Vec<String> = (0..r).map(|s| format!("\"{s}\"")).collect();
            schema += &format!("[[variables]]\nname = \"{name}\"\nkind = \"categorical\"\nstates = [{}]\n", states.join(", "));
        }
        std::fs::write(dir.path().join("schema.toml"), schema).expect("schema");
        table.write_csv(&dir.path().join("train.csv")).expect("csv");
        let config = "schema = \"schema.toml\"\ndata = \"train.csv\"\noutput_dir = \".\"\n[split]\ntest_count = 1\n";
        let mut cfg = RunConfig::from_toml_str(config, dir.path()).expect("config");
        cfg.lkh_path = lkh.clone().map(Into::into);
        for &solver in &solvers {
            cfg.solver = solver;
            let start = Instant::now();
            match cmd_learn(&cfg) {
                Ok(report) => println!(
                    "{inst:>8} {:>14} {:>14.4} {:>9.3}",
                    solver.to_string(),
                    report.tour_cost,
                    start.elapsed().as_secs_f64()
                ),
                Err(e) => println!("{inst:>8} {:>14} failed: {e}", solver.to_string()),
            }
        }
    }
}
