use std::process::ExitCode;

fn main() -> ExitCode {
    let r = alpforce_cli::run(std::env::args_os());
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
    if r.exit_code == 0 {
        println!("{}", r.summary.trim_end());
    } else {
        eprintln!("{}", r.summary.trim_end());
    }
    ExitCode::from(r.exit_code as u8)
}
