fn main() {
    // Exit quietly when stdout is closed early, as in `valvetime complexity | head`.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    std::process::exit(valvetime::cli::run(std::env::args_os()));
}
