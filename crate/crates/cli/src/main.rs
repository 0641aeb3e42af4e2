use std::process::ExitCode;

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let mut stdout = std::io::stdout();
    match nsvd_cli::run(&argv, &mut stdout) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if e.code == nsvd_cli::EXIT_OK {
                print!("{}", e.message);
            } else {
                eprintln!("nsvd: {}", e.message.trim_end());
            }
            ExitCode::from(e.code as u8)
        }
    }
}
