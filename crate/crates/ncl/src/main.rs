use clap::Parser;
use ncl::cli::{error_code, execute, Cli};

fn main() {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_env("NCL_LOG")
        .format_timestamp(None)
        .init();
    let code = match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            error_code(&e)
        }
    };
    std::process::exit(code);
}
