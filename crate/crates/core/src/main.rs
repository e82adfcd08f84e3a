fn main() {
    if let Some(n) = std::env::var("SCHRATE_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            // Only fails if a pool already exists, which cannot happen this early.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    std::process::exit(schrate::cli::main_with_args(std::env::args_os()));
}
