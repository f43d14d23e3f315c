//! Small benchmark over the three synthetic classes through the CLI entry
//! point. Set `SOLVER_THREADS` to solve instances concurrently.
//!
//! ```text
//! cargo run --release --example benchmark_classes -- [resolution] [pairs]
//! ```

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let res = args.get(1).cloned().unwrap_or_else(|| "16".into());
    let pairs = args.get(2).cloned().unwrap_or_else(|| "2".into());
    let json = std::env::temp_dir().join("smoothot_bench.json");
    let code = smoothot::cli::run([
        "smoothot",
        "bench",
        "--classes",
        "whitenoise,smooth,bump",
        "--res",
        &res,
        "--pairs",
        &pairs,
        "--json",
        json.to_str().expect("utf-8 temp path"),
    ]);
    println!("report written to {}", json.display());
    std::process::exit(code);
}
