use std::io;

fn main() {
    let env = |key: &str| std::env::var(key).ok();
    let stdin = io::stdin();
    let mut io = patternwise_cli::Io {
        stdin: &mut stdin.lock(),
        stdout: &mut io::stdout(),
        stderr: &mut io::stderr(),
        env: &env,
    };
    std::process::exit(patternwise_cli::run(std::env::args_os(), &mut io));
}
