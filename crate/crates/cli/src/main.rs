use clap::Parser;
use conesv_cli::app::{run, Cli};

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(done) => {
            print!("{}", done.stdout);
            std::process::exit(done.code);
        }
        Err(e) => {
            eprintln!("conesv: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
