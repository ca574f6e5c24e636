use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use fpki::naming::parse_domain;
use fpki::trustcalc::{derived, is_authentic, Key, View};

#[derive(Parser)]
#[command(name = "trustcalc", version, about = "Derivations over trust views")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Prints every statement derivable from the view but not in it.
    Derive { view: PathBuf },
    /// Whether `key` is authentic for `name` at `time`.
    Check {
        view: PathBuf,
        key: String,
        name: String,
        time: u64,
    },
}

fn load(p: &PathBuf) -> Result<View> {
    let text = std::fs::read_to_string(p).with_context(|| p.display().to_string())?;
    Ok(View::parse(&text)?)
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Derive { view } => {
            for s in derived(&load(&view)?) {
                println!("{s}");
            }
        }
        Cmd::Check {
            view,
            key,
            name,
            time,
        } => {
            let key: Key = key.parse().map_err(anyhow::Error::msg)?;
            let ok = is_authentic(&load(&view)?, &key, &parse_domain(&name)?, time);
            println!("{}", if ok { "authentic" } else { "not authentic" });
            if !ok {
                std::process::exit(1);
            }
        }
    }
    Ok(())
}
