use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let code = quasifisher_cli::run(quasifisher_cli::Cli::parse());
    std::process::exit(code);
}
