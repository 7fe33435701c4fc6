use clap::Parser;
use levelcraft::cli::{dispatch, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LEVELCRAFT_LOG", "warn")).init();
    std::process::exit(dispatch(Cli::parse()));
}
