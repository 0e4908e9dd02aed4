use clap::Parser;
use releq_cli::args::Cli;
use releq_cli::{configure_threads, run_config, EXIT_INPUT, EXIT_OK};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let code = configure_threads()
        .and_then(|()| cli.into_config())
        .and_then(|cfg| run_config(&cfg))
        .unwrap_or_else(|e| {
            eprintln!("error: {e:#}");
            EXIT_INPUT
        });
    std::process::exit(code);
}
