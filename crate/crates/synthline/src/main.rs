fn main() {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "synthline=info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    std::process::exit(synthline::cli::dispatch(std::env::args_os()));
}
