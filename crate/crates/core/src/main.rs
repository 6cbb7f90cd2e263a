use std::io::IsTerminal;

fn main() {
    let threads = std::env::var(designbench::cli::THREADS_ENV).ok();
    let stdout = std::io::stdout();
    let code = designbench::cli::run(
        std::env::args_os(),
        threads.as_deref(),
        stdout.is_terminal(),
        &mut stdout.lock(),
        &mut std::io::stderr(),
    );
    std::process::exit(code);
}
