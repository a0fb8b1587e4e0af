use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand};
use pecs_core::{export_deck, load_deck, Phase};
use pecs_service::api::profile_view;
use pecs_service::{Clock, FileStore, Service, ServiceConfig, SystemClock};

#[derive(Parser)]
#[command(name = "pecs", about = "PECS learning service and admin tools")]
struct Cli {
    /// Store file. PECS_STORE is used when the flag is absent.
    #[arg(long, global = true, env = "PECS_STORE", default_value = "pecs-store.json")]
    store: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Directory served under /assets/.
        #[arg(long)]
        assets: Option<PathBuf>,
    },
    /// Validate a deck file and add it to the store.
    Ingest {
        deck_file: PathBuf,
        /// Deck id; defaults to the file stem.
        #[arg(long)]
        id: Option<String>,
        /// Replace an existing deck with the same id.
        #[arg(long)]
        replace: bool,
    },
    /// Print a stored deck in interchange form.
    Export { deck_id: String },
    /// Print a learner's progress report.
    Report {
        #[arg(long)]
        learner: String,
    },
    /// Put a learner back to (or forward to) a phase.
    ResetPhase {
        #[arg(long)]
        learner: String,
        #[arg(long)]
        phase: u8,
    },
    /// Link a child account to a therapist or parent account.
    Link {
        #[arg(long)]
        child: String,
        #[arg(long)]
        adult: String,
    },
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let store = FileStore::new(&cli.store);
    let config = ServiceConfig::default();
    let clock = SystemClock;

    match cli.command {
        Command::Serve { port, host, assets } => {
            let config = ServiceConfig {
                assets_dir: assets,
                ..config
            };
            let service = Service::open(store, Arc::new(clock), config)
                .with_context(|| format!("opening store {}", cli.store.display()))?;
            let addr: SocketAddr = format!("{host}:{port}").parse().context("bad --host/--port")?;
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(pecs_service::server::serve(Arc::new(service), addr))?;
        }
        Command::Ingest { deck_file, id, replace } => {
            let doc = std::fs::read_to_string(&deck_file)
                .with_context(|| format!("reading {}", deck_file.display()))?;
            let deck = load_deck(&doc).map_err(|e| anyhow!("{}: {e}", e.code()))?;
            let id = match id {
                Some(id) => id,
                None => deck_file
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .ok_or_else(|| anyhow!("cannot derive a deck id from {}; pass --id", deck_file.display()))?
                    .to_string(),
            };
            let mut state = store.load_or_init(config.rule, config.kdf_rounds)?;
            if state.decks.contains_key(&id) && !replace {
                bail!("deck {id:?} already exists; pass --replace to overwrite it");
            }
            let n = deck.len();
            state.decks.insert(id.clone(), deck);
            store.save(&state)?;
            println!("ingested deck {id:?} ({n} cards)");
        }
        Command::Export { deck_id } => {
            let state = store.load_or_init(config.rule, config.kdf_rounds)?;
            let deck = state
                .decks
                .get(&deck_id)
                .ok_or_else(|| anyhow!("UnknownDeck: no deck {deck_id:?}"))?;
            print!("{}", export_deck(deck));
        }
        Command::Report { learner } => {
            let state = store.load_or_init(config.rule, config.kdf_rounds)?;
            let report = state.learners.progress_chart(&learner).map_err(|e| anyhow!("{}: {e}", e.code()))?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::ResetPhase { learner, phase } => {
            let phase = Phase::new(phase).ok_or_else(|| anyhow!("phase must be between 1 and 4"))?;
            let mut state = store.load_or_init(config.rule, config.kdf_rounds)?;
            let profile = state
                .learners
                .reset_phase(&learner, phase, clock.now_ms())
                .map_err(|e| anyhow!("{}: {e}", e.code()))?;
            let view = profile_view(profile);
            store.save(&state)?;
            println!("{}", serde_json::to_string_pretty(&view)?);
        }
        Command::Link { child, adult } => {
            let mut state = store.load_or_init(config.rule, config.kdf_rounds)?;
            state
                .learners
                .link(&child, &adult)
                .map_err(|e| anyhow!("{}: {e}", e.code()))?;
            store.save(&state)?;
            println!("linked {child} to {adult}");
        }
    }
    Ok(())
}
