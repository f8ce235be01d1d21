use std::process::ExitCode;

fn main() -> ExitCode {
    rkhs_dagma::cli::run()
}
