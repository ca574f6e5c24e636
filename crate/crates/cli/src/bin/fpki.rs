use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use fpki::certmodel::{Authority, SigningKey, Validity};
use fpki::harness::{bench, run_scenario, to_csv, Scenario};
use fpki::mapserver::{encode_delta, MapItem, MapServer};
use fpki::naming::parse_domain;
use fpki::transport::{
    fetch, system_clock, FetchOptions, ServerAddr, TransportMode, TransportServer,
};

#[derive(Parser)]
#[command(
    name = "fpki",
    version,
    about = "Scenarios, benchmarks and proof delivery"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Scenario files.
    Scenario {
        #[command(subcommand)]
        cmd: ScenarioCmd,
    },
    /// Proof sizes and lookup times as CSV.
    Bench {
        /// Leaf counts, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "1024,8192,65536")]
        leaves: Vec<usize>,
        /// Name depths below the public suffix, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        depths: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Lookups per configuration.
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
    /// Writes a delta file of certificates from one synthetic CA and prints
    /// the CA's key id.
    SampleItems {
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serves lookups for a map-server state file over UDP and TCP.
    Serve {
        #[arg(long)]
        state: PathBuf,
        /// Query-name suffix, e.g. mapserver1.net.
        #[arg(long)]
        suffix: String,
        #[arg(long, default_value = "127.0.0.1:5300")]
        bind: SocketAddr,
    },
    /// Fetches a proof bundle and writes it to a file.
    Fetch {
        #[arg(long)]
        udp: SocketAddr,
        #[arg(long)]
        tcp: SocketAddr,
        #[arg(long)]
        suffix: String,
        name: String,
        /// Skip the datagram attempt.
        #[arg(long)]
        stream: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ScenarioCmd {
    /// Runs scenario files and reports every expectation.
    Run { files: Vec<PathBuf> },
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Scenario {
            cmd: ScenarioCmd::Run { files },
        } => {
            if files.is_empty() {
                bail!("no scenario files given");
            }
            let mut failed = 0;
            for f in files {
                let s = Scenario::from_file(&f).with_context(|| f.display().to_string())?;
                let r = run_scenario(&s).with_context(|| f.display().to_string())?;
                println!("{r}");
                if !r.passed() {
                    failed += 1;
                }
            }
            if failed > 0 {
                bail!("{failed} scenario(s) failed");
            }
        }
        Cmd::Bench {
            leaves,
            depths,
            seed,
            samples,
        } => {
            print!("{}", to_csv(&bench(&leaves, &depths, seed, samples)));
        }
        Cmd::SampleItems { count, seed, out } => {
            let ca = Authority::root(
                SigningKey::derive(seed, "sample-ca"),
                Validity::new(0, u64::MAX / 2),
            );
            let items: Vec<MapItem> = (0..count)
                .map(|i| {
                    let n = parse_domain(&format!("site{i}.com")).expect("generated name");
                    let key = SigningKey::derive(seed, &format!("sample-{i}")).public();
                    MapItem::Certificate(ca.issue(
                        &[n],
                        key,
                        Validity::new(0, 1 << 40),
                        None,
                        i as u64,
                    ))
                })
                .collect();
            std::fs::write(&out, encode_delta(&items))?;
            println!("{}", ca.key_id());
        }
        Cmd::Serve {
            state,
            suffix,
            bind,
        } => {
            let server = MapServer::load(&state)?;
            if server.latest_head().is_none() {
                bail!("state has no committed revision");
            }
            let t = TransportServer::start(
                bind,
                server.view_handle(),
                parse_domain(&suffix)?,
                system_clock(),
            )?;
            let a = t.addr();
            eprintln!("serving {} udp={} tcp={}", server.id(), a.udp, a.tcp);
            loop {
                std::thread::park();
            }
        }
        Cmd::Fetch {
            udp,
            tcp,
            suffix,
            name,
            stream,
            out,
        } => {
            let opts = FetchOptions {
                mode: if stream {
                    TransportMode::Stream
                } else {
                    TransportMode::Datagram
                },
                timeout: Duration::from_secs(2),
                attempts: 2,
            };
            let f = fetch(
                &ServerAddr { udp, tcp },
                &parse_domain(&suffix)?,
                &parse_domain(&name)?,
                &opts,
            )?;
            use fpki::certmodel::Canonical;
            let bytes = f.bundle.to_bytes();
            println!(
                "server={} revision={} levels={} bytes={} ttl={} via={:?}",
                f.bundle.server_id,
                f.bundle.smh.revision,
                f.bundle.levels.len(),
                bytes.len(),
                f.ttl,
                f.via
            );
            if let Some(p) = out {
                std::fs::write(p, bytes)?;
            }
        }
    }
    Ok(())
}
