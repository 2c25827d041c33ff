use std::io::Write;

fn main() {
    env_logger::init();
    let (code, text) = dhj_cli::run_args(std::env::args_os());
    if code == 0 || code == 3 {
        print!("{text}");
        let _ = std::io::stdout().flush();
    } else {
        eprint!("{text}");
    }
    std::process::exit(code);
}
