use clap::Parser;

fn main() {
    let cli = sfgen_cli::Cli::parse();
    let result = sfgen_cli::threads_from_env().and_then(|threads| {
        if let Some(n) = threads {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| anyhow::anyhow!("cli: thread pool: {e}"))?;
        }
        sfgen_cli::run(cli)
    });
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
