use std::process::ExitCode;

use etabs_cli::{parse_args, run};

fn main() -> ExitCode {
    let style = if std::env::var_os("ETABS_NO_COLOR").is_some() {
        env_logger::WriteStyle::Never
    } else {
        env_logger::WriteStyle::Auto
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .write_style(style)
        .init();

    let cfg = match parse_args(std::env::args_os()) {
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
        Ok(Err(usage)) => {
            eprintln!("error: {usage}");
            return ExitCode::from(2);
        }
        Ok(Ok(cfg)) => cfg,
    };
    match run(&cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
