use clap::Parser;
use leakmap_cli::Cli;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap uses 2 for usage errors, which is reserved for numerical failures.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let result = leakmap_cli::init_threads().and_then(|()| leakmap_cli::run(&cli));
    match result {
        Ok(manifest) => log::info!("{}: wrote {} files", manifest.command, manifest.files.len() + 1),
        Err(e) => {
            log::error!("{e}");
            std::process::exit(e.exit_code());
        }
    }
}
