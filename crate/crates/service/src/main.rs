use std::process::ExitCode;

use liverkg_service::{serve, Config};

#[tokio::main]
async fn main() -> ExitCode {
    let result = match Config::from_env() {
        Ok(config) => serve(config).await,
        Err(e) => Err(e),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("liverkg-service: {e}");
            ExitCode::FAILURE
        }
    }
}
