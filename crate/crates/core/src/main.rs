use clap::Parser;

fn main() -> std::process::ExitCode {
    let cli = hemodyn::cli::Cli::parse();
    std::process::ExitCode::from(hemodyn::cli::run(cli))
}
