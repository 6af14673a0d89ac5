//! Runs the sample configurations in `examples/configs/` through the same
//! entry point as the `fracpow` binary, writing under `target/example-out`.

use std::path::Path;

use fracpow::cli::{execute, Command, DtnMode, RunConfig};

fn main() -> fracpow::Result<()> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let configs = root.join("examples/configs");
    let out = root.join("../../target/example-out");
    let runs = [
        (
            "scalar.toml",
            Command::Dtn {
                mode: DtnMode::Apply,
            },
        ),
        ("linear_verify.toml", Command::Verify),
        ("plap_evolve.toml", Command::Evolve),
        ("obstacle.toml", Command::Solve),
    ];
    for (file, command) in runs {
        let cfg = RunConfig::load(&configs.join(file))?;
        let outcome = execute(command, &cfg, &out)?;
        println!(
            "{:<12} {file:<20} pass={} -> {}",
            command.dir_name(),
            outcome.pass,
            outcome.dir.display()
        );
    }
    Ok(())
}
