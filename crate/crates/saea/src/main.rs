//! `saea` command-line entry point.

fn main() {
    let args: Vec<std::ffi::OsString> = std::env::args_os().collect();
    std::process::exit(saea::cli::run(args));
}
