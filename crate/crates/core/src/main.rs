use clap::error::ErrorKind;
use clap::Parser;
use serde_json::json;

use fracou::cli::{self, Cli};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            let record = json!({
                "schema_version": cli::SCHEMA_VERSION,
                "error": {
                    "module": "cli",
                    "code": "invalid_arguments",
                    "message": e.to_string().trim_end(),
                    "exit_code": 2,
                }
            });
            eprintln!("{record}");
            std::process::exit(2);
        }
    };
    if let Err(e) = cli::run(&cli) {
        eprintln!("{}", cli::error_record(&e));
        std::process::exit(e.exit_code());
    }
}
