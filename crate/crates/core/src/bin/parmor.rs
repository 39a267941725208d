fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PARMOR_LOG", "error")).init();
    std::process::exit(parmor::cli::run(std::env::args_os()));
}
