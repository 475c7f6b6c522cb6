//! Regenerates `data/chain.csv`: 1100 rows of the noisy binary chain
//! A → B → C (each link copies with probability 0.9).
//!
//!     cargo run -p bntsp-cli --example gen_chain -- data/chain.csv

use std::path::PathBuf;

fn main() {
    let path: PathBuf = std::env::args_os()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| "data/chain.csv".into());
    let table = bntsp_core::synthetic::noisy_chain_table(3, 1100, 0.9, 17).expect("valid chain");
    table.write_csv(&path).expect("writable output");
    println!("wrote {} rows to {}", table.n_rows(), path.display());
}
