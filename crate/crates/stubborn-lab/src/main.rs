use clap::Parser;
use stubborn_lab::cli::{self, Cli};

fn main() {
    cli::init_thread_pool_from_env();
    let parsed = Cli::parse();
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    std::process::exit(cli::run(parsed, &mut lock));
}
