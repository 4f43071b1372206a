fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Ok(v) = std::env::var("NLPF_THREADS") {
        match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                {
                    log::warn!("could not size thread pool: {e}");
                }
            }
            _ => log::warn!("ignoring NLPF_THREADS={v:?}: expected a positive integer"),
        }
    }
    std::process::exit(nlpf::cli::run(std::env::args_os()));
}
