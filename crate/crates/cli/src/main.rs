//! `rcshare` command-line driver.

use std::collections::BTreeMap;
use std::error::Error;
use std::fs;
use std::io::Write;
use std::net::TcpListener;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::{Parser, Subcommand};
use rcshare_core::crypto::keystore::KeyStore;
use rcshare_core::sim::{
    attack_trials, run_scenario, tcp, AttackKind, AttackSpec, ExchangeOutcome, ExchangeSpec, KeySet, Pick, Scenario,
    ScenarioConfig, Simulator,
};
use rcshare_core::{table1, DepartmentDb, PartyId, Role};

type CliResult = Result<ExitCode, Box<dyn Error>>;

#[derive(Parser, Debug)]
#[command(name = "rcshare", version, about = "Role- and cooperation-based secure information sharing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate key pairs into a key-store directory.
    Keygen {
        /// Party to generate a key for (repeatable).
        #[arg(long = "party", required_unless_present = "config")]
        parties: Vec<PartyId>,
        #[arg(long, default_value_t = 512)]
        bits: u32,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Generate keys for every party of this scenario instead.
        #[arg(long, conflicts_with = "parties")]
        config: Option<PathBuf>,
    },
    /// Run a scenario in-process and print every exchange.
    Demo {
        #[arg(long)]
        config: PathBuf,
        /// Write the full transcript as JSON.
        #[arg(long)]
        transcript: Option<PathBuf>,
        /// Send the exchanges to a running personnel endpoint instead.
        #[arg(long)]
        personnel_addr: Option<String>,
    },
    /// Run the ten reference exchanges and compare the shared lists.
    Table1 {
        #[arg(long, default_value = "fixtures/table1.json")]
        fixtures: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 512)]
        bits: u32,
        /// Send the exchanges to a running personnel endpoint instead.
        #[arg(long)]
        personnel_addr: Option<String>,
    },
    /// Serve one role over TCP.
    Serve {
        #[arg(long)]
        role: Role,
        #[arg(long)]
        listen: String,
        #[arg(long)]
        keys: PathBuf,
        #[arg(long)]
        config: PathBuf,
    },
    /// Repeat one attack and print the detection rate.
    Attack {
        #[arg(long)]
        kind: AttackKind,
        #[arg(long)]
        hop: u8,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Field tag to flip (`random`, decimal or 0x hex). Tamper only.
        #[arg(long, default_value = "random")]
        field: Pick<u8>,
        /// Bit index inside the field. Tamper only.
        #[arg(long, default_value = "random")]
        bit: Pick<u32>,
        /// Index of the scenario exchange to attack.
        #[arg(long, default_value_t = 0)]
        exchange: usize,
        /// Scenario to attack; the reference exchanges by default.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 512)]
        bits: u32,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Keygen { parties, bits, seed, out, config } => keygen(parties, bits, seed, out, config),
        Command::Demo { config, transcript, personnel_addr } => demo(config, transcript, personnel_addr),
        Command::Table1 { fixtures, seed, bits, personnel_addr } => run_table1(fixtures, seed, bits, personnel_addr),
        Command::Serve { role, listen, keys, config } => serve(role, &listen, keys, config),
        Command::Attack { kind, hop, seed, trials, field, bit, exchange, config, bits } => {
            let spec = AttackSpec { exchange, ..AttackSpec::new(kind, hop).with_field(field).with_bit(bit) };
            attack(spec, seed, trials, config, bits)
        }
    };
    result.unwrap_or_else(|e| {
        eprintln!("rcshare: {e}");
        ExitCode::from(2)
    })
}

fn keygen(parties: Vec<PartyId>, bits: u32, seed: u64, out: PathBuf, config: Option<PathBuf>) -> CliResult {
    let (parties, overrides) = match config {
        Some(path) => {
            let sc = Scenario::load(path)?;
            (sc.parties(), sc.config.parties.clone())
        }
        None => (parties, BTreeMap::new()),
    };
    let keys = KeySet::from_seed(seed, bits, &parties, &overrides)?;
    let store = KeyStore::new(&out);
    for (party, pair) in keys.iter() {
        store.save(party, pair)?;
        println!("{party} {} bits {}", pair.bits(), pair.public().fingerprint());
    }
    println!("wrote {} key pairs to {}", parties.len(), out.display());
    Ok(ExitCode::SUCCESS)
}

fn describe(outcome: &ExchangeOutcome) -> String {
    match outcome {
        ExchangeOutcome::Answer(list) => list.to_string(),
        ExchangeOutcome::Error(e) => e.to_string(),
    }
}

fn demo(config: PathBuf, transcript: Option<PathBuf>, personnel_addr: Option<String>) -> CliResult {
    let sc = Scenario::load(&config)?;
    if let Some(addr) = personnel_addr {
        let outcomes = tcp::run_remote(&sc, &addr)?;
        for (i, (ex, out)) in sc.exchanges.iter().zip(&outcomes).enumerate() {
            println!("{:>3} {} -> {}: {}", i + 1, ex.personnel, ex.department, describe(out));
        }
        return Ok(ExitCode::SUCCESS);
    }
    let t = run_scenario(&sc)?;
    for (i, r) in t.results.iter().enumerate() {
        let attack = r.attack.as_ref().map(|a| format!(" [{} hop {}]", a.kind, a.hop)).unwrap_or_default();
        println!("{:>3} {} -> {}{attack}: {}", i + 1, r.personnel, r.department, describe(&r.outcome));
    }
    if let Some(path) = transcript {
        fs::write(&path, t.to_json())?;
        println!("transcript written to {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn table1_config(fixtures: &PathBuf, seed: u64, bits: u32) -> Result<Scenario, Box<dyn Error>> {
    let db = DepartmentDb::load(fixtures)?;
    let mut cfg = ScenarioConfig::new(seed, fixtures);
    cfg.key_bits = bits;
    cfg.exchanges = Some(
        table1::ROWS
            .iter()
            .map(|r| ExchangeSpec { personnel: r.personnel_id(), department: r.department_id(), query: None })
            .collect(),
    );
    Ok(Scenario::new(cfg, db, None)?)
}

fn run_table1(fixtures: PathBuf, seed: u64, bits: u32, personnel_addr: Option<String>) -> CliResult {
    let sc = table1_config(&fixtures, seed, bits)?;
    let started = Instant::now();
    let answers = match personnel_addr {
        Some(addr) => tcp::answers(&tcp::run_remote(&sc, &addr)?),
        None => run_scenario(&sc)?.answers(),
    };
    let elapsed = started.elapsed();
    let matched = table1::ROWS
        .iter()
        .zip(&answers)
        .filter(|(row, got)| got.as_ref() == Some(&row.expected()))
        .count();
    for line in table1::diff(&answers) {
        println!("{line}");
    }
    println!("{matched}/{} rows match ({:.2}s, {bits}-bit keys)", table1::ROWS.len(), elapsed.as_secs_f64());
    Ok(if matched == table1::ROWS.len() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn serve(role: Role, listen: &str, keys: PathBuf, config: PathBuf) -> CliResult {
    let mut sc = Scenario::load(&config)?;
    sc.keys_dir = Some(keys);
    let node = tcp::Node::new(&sc, role)?;
    let listener = TcpListener::bind(listen).map_err(|e| format!("cannot listen on {listen}: {e}"))?;
    println!("{role} listening on {}", listener.local_addr()?);
    std::io::stdout().flush()?;
    tcp::serve(listener, Arc::new(node))?;
    Ok(ExitCode::SUCCESS)
}

fn attack(spec: AttackSpec, seed: u64, trials: usize, config: Option<PathBuf>, bits: u32) -> CliResult {
    spec.validate()?;
    let sc = match config {
        Some(path) => Scenario::load(path)?,
        None => rcshare_core::sim::table1_scenario(seed, bits),
    };
    let sim = Simulator::new(&sc)?;
    let summary = attack_trials(&sim, &spec, seed, trials)?;
    println!(
        "{} hop {}: detected {}/{} (rate {:.4})",
        spec.kind,
        spec.hop,
        summary.detected,
        summary.trials,
        summary.rate()
    );
    for (code, n) in &summary.codes {
        println!("  {code}: {n}");
    }
    Ok(ExitCode::SUCCESS)
}
