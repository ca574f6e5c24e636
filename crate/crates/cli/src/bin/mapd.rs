use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use fpki::certmodel::{Canonical, CertChain, KeyId, SigningKey};
use fpki::mapserver::{
    decode_delta, encode_delta, Auditor, MapItem, MapServer, MapServerConfig, SignedMapHead,
};
use fpki::naming::{parse_domain, PublicSuffixList};

#[derive(Parser)]
#[command(
    name = "mapd",
    version,
    about = "Map server operations on a state file"
)]
struct Cli {
    /// Snapshot file holding the server state.
    #[arg(long, global = true, default_value = "mapd.state")]
    state: PathBuf,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Creates an empty state.
    Init {
        #[arg(long)]
        id: String,
        /// Supported CA key ids (hex).
        #[arg(long, required = true, num_args = 1..)]
        supports: Vec<KeyId>,
        /// Seed for the signing key (32 bytes hex); random when absent.
        #[arg(long)]
        key_seed: Option<String>,
        #[arg(long)]
        mmd: Option<u64>,
        /// Public suffix list file.
        #[arg(long)]
        psl: Option<PathBuf>,
        /// Tree nonce (hex).
        #[arg(long)]
        nonce: Option<String>,
    },
    /// Stages certificates or revocations from a delta file or a single
    /// encoded certificate chain.
    Ingest { file: PathBuf },
    /// Commits staged items as a new revision.
    Commit {
        #[arg(long)]
        now: Option<u64>,
    },
    /// Writes the proof bundle for a name.
    Lookup {
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stages removal of certificates expired before `now`.
    Prune {
        #[arg(long)]
        now: u64,
    },
    /// Writes the head and delta of a revision.
    Export {
        revision: u64,
        #[arg(long)]
        head: PathBuf,
        #[arg(long)]
        delta: PathBuf,
    },
    /// Checks that `delta` takes the map from head `old` to head `new`.
    /// `old` may be `none` for the first revision.
    Audit {
        old: String,
        new: PathBuf,
        delta: PathBuf,
    },
    /// Prints the server id, key and latest head.
    Info,
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn hex32(s: &str) -> Result<[u8; 32]> {
    let v = hex::decode(s).context("hex")?;
    v.try_into()
        .map_err(|_| anyhow::anyhow!("expected 32 bytes"))
}

fn load(path: &Path) -> Result<MapServer> {
    MapServer::load(path).with_context(|| format!("loading {}", path.display()))
}

fn read_head(path: &Path) -> Result<SignedMapHead> {
    Ok(SignedMapHead::from_bytes(&std::fs::read(path)?)?)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Init {
            id,
            supports,
            key_seed,
            mmd,
            psl,
            nonce,
        } => {
            if cli.state.exists() {
                bail!("{} already exists", cli.state.display());
            }
            let mut cfg = MapServerConfig::new(id, supports.into_iter().collect::<BTreeSet<_>>());
            if let Some(m) = mmd {
                cfg.mmd = m;
            }
            if let Some(p) = psl {
                cfg.psl = PublicSuffixList::from_file(&p)?;
            }
            cfg.nonce = nonce.as_deref().map(hex32).transpose()?;
            let seed = match key_seed {
                Some(s) => hex32(&s)?,
                None => rand::random(),
            };
            let s = MapServer::new(cfg, SigningKey::from_seed(seed));
            s.save(&cli.state)?;
            println!("{} key {}", s.id(), s.public_key());
        }
        Cmd::Ingest { file } => {
            let mut s = load(&cli.state)?;
            let bytes = std::fs::read(&file)?;
            let items = match decode_delta(&bytes) {
                Ok(items) => items,
                Err(_) => vec![MapItem::Certificate(
                    CertChain::from_bytes(&bytes).context(
                        "input is neither a delta file nor an encoded certificate chain",
                    )?,
                )],
            };
            let (mut ok, mut rejected) = (0, 0);
            for item in items {
                match s.ingest(item) {
                    Ok(()) => ok += 1,
                    Err(e) => {
                        rejected += 1;
                        eprintln!("rejected: {e}");
                    }
                }
            }
            s.save(&cli.state)?;
            println!("staged {ok}, rejected {rejected}");
        }
        Cmd::Commit { now: t } => {
            let mut s = load(&cli.state)?;
            let h = s.commit(t.unwrap_or_else(now));
            s.save(&cli.state)?;
            println!("revision {} root {}", h.revision, hex::encode(h.root));
        }
        Cmd::Lookup { name, out } => {
            let s = load(&cli.state)?;
            let b = s.lookup(&parse_domain(&name)?)?;
            let bytes = b.to_bytes();
            println!(
                "revision {} levels {} present {} bytes {}",
                b.smh.revision,
                b.levels.len(),
                b.levels.iter().filter(|l| l.entry.is_some()).count(),
                bytes.len()
            );
            if let Some(p) = out {
                std::fs::write(p, bytes)?;
            }
        }
        Cmd::Prune { now: t } => {
            let mut s = load(&cli.state)?;
            let n = s.prune_expired(t);
            s.save(&cli.state)?;
            println!("pruned {n}");
        }
        Cmd::Export {
            revision,
            head,
            delta,
        } => {
            let s = load(&cli.state)?;
            let rec = s.audit_record(revision)?;
            std::fs::write(head, rec.new.to_bytes())?;
            std::fs::write(delta, encode_delta(&rec.delta))?;
        }
        Cmd::Audit { old, new, delta } => {
            // The state file is the auditor's copy: its history is replayed
            // and checked before the step under audit.
            let s = load(&cli.state)?;
            let old = match old.as_str() {
                "none" | "-" => None,
                p => Some(read_head(Path::new(p))?),
            };
            let new = read_head(&new)?;
            let delta = decode_delta(&std::fs::read(&delta)?)?;
            let upto = old.as_ref().map_or(0, |h| h.revision + 1);
            let mut a = Auditor::new(s.config(), s.public_key());
            for r in 0..upto {
                a.audit(&s.audit_record(r)?)
                    .with_context(|| format!("history revision {r}"))?;
            }
            let mut log = fpki::merkle::ConsistencyTree::new();
            for h in a.heads() {
                log.append(h.to_bytes());
            }
            let size = log.len();
            log.append(new.to_bytes());
            let proof = log.prove_consistency(size, size + 1)?;
            match a.audit_step(old.as_ref(), &new, &delta, &log.root(), &proof) {
                Ok(()) => println!("ok revision {}", new.revision),
                Err(e) => bail!("audit failed: {e}"),
            }
        }
        Cmd::Info => {
            let s = load(&cli.state)?;
            println!("id {}", s.id());
            println!("key {}", s.public_key());
            println!("revisions {}", s.heads().len());
            println!("pending {}", s.pending().len());
            if let Some(h) = s.latest_head() {
                println!("root {}", hex::encode(h.root));
            }
        }
    }
    Ok(())
}
