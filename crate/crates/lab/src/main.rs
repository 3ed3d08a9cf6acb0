use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use rwre_lab::experiments::dump_environment;
use rwre_lab::{run_manifest, write_run, ExperimentKind, ExperimentManifest, GreenMode, Pool};

#[derive(Parser)]
#[command(name = "rwre", version, about = "Random walks in Dirichlet environments: experiments and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Manifest file (`key = value` lines).
    #[arg(long)]
    manifest: PathBuf,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    workers: Option<usize>,
    /// Root directory for run records; overrides the manifest's `out`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GreenFlags {
    #[arg(long)]
    mode: Option<GreenMode>,
    #[arg(long)]
    radius: Option<u32>,
    #[arg(long)]
    delta: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Reinforced-walk velocity against its bounds.
    Velocity(Common),
    /// Annealed path law against the reinforced sampler.
    Equivalence(Common),
    /// Green function computations and identities.
    Green {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        flags: GreenFlags,
    },
    /// Kalikow auxiliary kernel and its bounds.
    Kalikow(Common),
    /// Low-disorder velocity expansion.
    Expansion(Common),
    /// Reduced-size run of every check.
    Verify(Common),
    /// Writes the environment on a box as CSV.
    DumpEnv {
        #[arg(long)]
        manifest: PathBuf,
        /// Box radius; defaults to the manifest's `radius`.
        #[arg(long)]
        radius: Option<u32>,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(path: &PathBuf, kind: Option<ExperimentKind>) -> anyhow::Result<ExperimentManifest> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(ExperimentManifest::parse(&text, kind)?)
}

fn run(kind: ExperimentKind, common: &Common, flags: Option<&GreenFlags>) -> anyhow::Result<bool> {
    let mut manifest = load(&common.manifest, Some(kind))?;
    if let Some(f) = flags {
        manifest.mode = f.mode.or(manifest.mode);
        manifest.radius = f.radius.or(manifest.radius);
        manifest.delta = f.delta.or(manifest.delta);
    }
    let pool = Pool::new(common.workers)?;
    let (record, outcome) = run_manifest(&manifest, &pool)?;
    let root = common.out.clone().or_else(|| manifest.out.clone()).unwrap_or_else(|| PathBuf::from("runs"));
    let dir = write_run(&root, &record, &outcome)?;
    for v in &record.verdicts {
        println!("{:<28} {}", v.name, if v.passed { "pass" } else { "FAIL" });
    }
    println!("record: {}", dir.join("record.json").display());
    Ok(record.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Velocity(c) => run(ExperimentKind::Velocity, c, None),
        Command::Equivalence(c) => run(ExperimentKind::Equivalence, c, None),
        Command::Green { common, flags } => run(ExperimentKind::Green, common, Some(flags)),
        Command::Kalikow(c) => run(ExperimentKind::Kalikow, c, None),
        Command::Expansion(c) => run(ExperimentKind::Expansion, c, None),
        Command::Verify(c) => run(ExperimentKind::Verify, c, None),
        Command::DumpEnv { manifest, radius, out } => dump(manifest, *radius, out.as_ref()).map(|()| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dump(path: &PathBuf, radius: Option<u32>, out: Option<&PathBuf>) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    // only `dim`, `alphas` and `seed` matter here, so any kind will do
    let declared = text.lines().any(|l| {
        l.split('#').next().and_then(|c| c.split_once('=')).is_some_and(|(k, _)| k.trim() == "kind")
    });
    let manifest = ExperimentManifest::parse(&text, (!declared).then_some(ExperimentKind::Verify))?;
    let Some(weights) = manifest.weights() else {
        bail!("manifest needs `dim` and `alphas`");
    };
    let Some(radius) = radius.or(manifest.radius) else {
        bail!("no box radius: pass --radius or set `radius`");
    };
    let csv = dump_environment(&weights, manifest.seed, radius).to_csv();
    match out {
        Some(p) => std::fs::write(p, csv).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{csv}"),
    }
    Ok(())
}
