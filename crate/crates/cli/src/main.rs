use clap::{Args, Parser, Subcommand};
use gflab::association::{sweep, verify_claim, Claim, ClaimReport, CLAIM_NAMES};
use gflab::embeddings::Rep;
use gflab::functionals::{write_csv, Combo, Product};
use gflab::identities::{certificates, float_cross_check, IdentityBounds};
use gflab::mollifier::{Mollifier, MollifierSpec};
use gflab::poly::rat_to_string;
use gflab::{Error, Result};
use serde::Serialize;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

mod config;

use config::{PsiSelection, RunConfig};

#[derive(Parser)]
#[command(name = "gflab", version, about = "Products of generalized functions: sweeps, fits and claim checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Verify a claim for several mollifier families and test functions
    Verify(RunArgs),
    /// Write the ε-sweep of a claim's left-hand side (or a named combo) as CSV
    Sweep(SweepArgs),
    /// Run the exact binomial identity suite
    Identities(IdentityArgs),
    /// Build a mollifier and dump it as JSON
    Mollifier(MollifierArgs),
    /// List the available claims
    ListClaims,
}

#[derive(Args, Clone, Default)]
struct RunArgs {
    /// JSON run configuration; flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    claim: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    a: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    b: Option<f64>,
    #[arg(long)]
    p: Option<u32>,
    #[arg(long)]
    q: Option<u32>,
    /// vanishing moments of the mollifiers
    #[arg(long)]
    q_moments: Option<u32>,
    /// smoothness exponent of the mollifiers
    #[arg(long)]
    s: Option<u32>,
    /// support radius of the mollifiers
    #[arg(long)]
    l: Option<f64>,
    /// seed of the first mollifier family
    #[arg(long)]
    seed: Option<u64>,
    /// number of mollifier families
    #[arg(long)]
    families: Option<u32>,
    /// symmetric mollifiers without free coefficients
    #[arg(long)]
    plain: bool,
    #[arg(long)]
    eps0: Option<f64>,
    #[arg(long)]
    ratio: Option<f64>,
    #[arg(long)]
    steps: Option<u32>,
    #[arg(long)]
    tol: Option<f64>,
    /// comma-separated test-function names (even, generic, vanishing)
    #[arg(long, value_delimiter = ',')]
    psi: Option<Vec<String>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($flag:ident => $($field:ident).+),* $(,)?) => {
                $(if let Some(v) = self.$flag.clone() { cfg.$($field).+ = v.into(); })*
            };
        }
        set!(claim => claim, a => a, b => b, p => p, q => q);
        set!(q_moments => mollifier.q, s => mollifier.s, l => mollifier.l, seed => mollifier.seed,
             families => mollifier.families, eps0 => grid.eps0, ratio => grid.ratio, steps => grid.steps,
             tol => tol);
        if self.plain {
            cfg.mollifier.plain = true;
        }
        if let Some(names) = &self.psi {
            cfg.psis = PsiSelection::Named(names.clone());
        }
        if let Some(out) = &self.out {
            cfg.out = Some(out.display().to_string());
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// sweep a named combination instead of a claim: delta, delta-delta, delta-delta1
    #[arg(long)]
    combo: Option<String>,
}

#[derive(Args)]
struct IdentityArgs {
    /// bound on p and n
    #[arg(long, default_value_t = 12)]
    max_p: u32,
    #[arg(long, default_value_t = 6)]
    max_h: u32,
    #[arg(long, default_value_t = 2024)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MollifierArgs {
    #[arg(long, default_value_t = 2)]
    q_moments: u32,
    #[arg(long, default_value_t = 10)]
    s: u32,
    #[arg(long, default_value_t = 1.0)]
    l: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    plain: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Claim failure (exit 1) vs. any other error (exit 2).
enum Outcome {
    Pass,
    Fail,
}

fn emit(out: Option<&str>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::Config(format!("cannot write {path}: {e}"))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| Error::Config(format!("cannot write to stdout: {e}")))
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct VerifyOutput<'a> {
    #[serde(flatten)]
    report: &'a ClaimReport,
    config: &'a RunConfig,
}

fn cmd_verify(args: &RunArgs) -> Result<Outcome> {
    let cfg = args.resolve()?;
    let claim = cfg.claim()?;
    cfg.grid.validate()?;
    let mollifiers = cfg.mollifiers()?;
    let psis = cfg.psis()?;
    let report = verify_claim(&claim, &mollifiers, &psis, &cfg.grid, cfg.tol)?;
    emit(cfg.out.as_deref(), &to_json(&VerifyOutput { report: &report, config: &cfg }))?;
    eprintln!(
        "{}: {} (divergent max {:.3e}, worst c0 rel err {:.3e})",
        report.claim_id,
        report.verdict,
        report.divergent_max,
        report.c0_checks.iter().map(|c| c.rel_err).fold(0.0, f64::max)
    );
    for d in &report.diagnostics {
        eprintln!("  note: {d}");
    }
    Ok(if report.passed() { Outcome::Pass } else { Outcome::Fail })
}

fn named_combo(name: &str, m: &std::sync::Arc<Mollifier>) -> Result<Combo> {
    let d0 = Rep::delta(0, m)?;
    let combo = match name {
        "delta" => Combo::new().term(1.0, Product::from(d0)),
        "delta-delta" => Combo::new().term(1.0, Product::new(d0.clone(), [d0])?),
        "delta-delta1" => Combo::new().term(1.0, Product::new(d0, [Rep::delta(1, m)?])?),
        other => {
            return Err(Error::Config(format!(
                "unknown combo {other:?}; known: delta, delta-delta, delta-delta1"
            )))
        }
    };
    Ok(combo)
}

fn cmd_sweep(args: &SweepArgs) -> Result<Outcome> {
    let cfg = args.run.resolve()?;
    cfg.grid.validate()?;
    let m = cfg.mollifiers()?.into_iter().next().expect("at least one family");
    let psi = cfg.psis()?.into_iter().next().ok_or_else(|| Error::Config("no test function selected".into()))?;
    let combo = match &args.combo {
        Some(name) => named_combo(name, &m)?,
        None => cfg.claim()?.lhs(&m)?,
    };
    let rows = sweep(&combo, &psi, &cfg.grid)?;
    let mut buf = Vec::new();
    write_csv(&rows, &mut buf).map_err(|e| Error::Config(format!("cannot format CSV: {e}")))?;
    emit(cfg.out.as_deref(), &String::from_utf8(buf).expect("CSV is UTF-8"))?;
    Ok(Outcome::Pass)
}

#[derive(Serialize)]
struct IdentityOutput {
    bounds: IdentityBounds,
    float_cross_check_max_rel: f64,
    certificates: Vec<gflab::identities::Certificate>,
}

fn cmd_identities(args: &IdentityArgs) -> Result<Outcome> {
    if args.max_p == 0 || args.max_h == 0 {
        return Err(Error::Config("identity bounds must be positive".into()));
    }
    let bounds = IdentityBounds { p_max: args.max_p, n_max: args.max_p, h_max: args.max_h, seed: args.seed };
    let certs = certificates(&bounds);
    let cross = float_cross_check(args.max_p, 20, args.seed);
    let failed = certs.iter().filter(|c| c.status != "exact").count();
    let out = IdentityOutput { bounds, float_cross_check_max_rel: cross, certificates: certs };
    emit(args.out.as_ref().map(|p| p.to_str().unwrap_or_default()), &to_json(&out))?;
    eprintln!("{} identity instances, {failed} failed; float cross-check {cross:.2e}", out.certificates.len());
    Ok(if failed == 0 && cross <= 1e-10 { Outcome::Pass } else { Outcome::Fail })
}

#[derive(Serialize)]
struct MollifierOutput {
    #[serde(flatten)]
    record: gflab::mollifier::MollifierRecord,
    moments: Vec<String>,
    l2_norm_sq: String,
    first_moment_sq: String,
}

fn cmd_mollifier(args: &MollifierArgs) -> Result<Outcome> {
    let mut spec = MollifierSpec::new(args.q_moments, args.s, args.l, args.seed)?;
    if args.plain {
        spec = spec.with_extra(0);
    }
    let m = Mollifier::build(&spec)?;
    let out = MollifierOutput {
        record: m.to_record(),
        moments: (0..=args.q_moments + 2).map(|j| rat_to_string(&m.moment(j))).collect(),
        l2_norm_sq: rat_to_string(&m.l2_norm_sq()),
        first_moment_sq: rat_to_string(&m.first_moment_sq()),
    };
    emit(args.out.as_ref().map(|p| p.to_str().unwrap_or_default()), &to_json(&out))?;
    Ok(Outcome::Pass)
}

fn cmd_list_claims() -> Result<Outcome> {
    let examples = [
        Claim::Mik { p: 1, q: 1 },
        Claim::Thm1 { a: -0.4, b: -0.4 },
        Claim::Thm2 { a: -0.5 },
        Claim::Thm2x { a: 0.5 },
        Claim::Thm3 { a: 0.5 },
        Claim::Cor2 { a: 0.7 },
        Claim::Cor3 { a: 0.7 },
        Claim::Thm4 { a: 0.5, p: 3 },
    ];
    let mut text = String::new();
    for (name, claim) in CLAIM_NAMES.iter().zip(examples) {
        let params = claim.params();
        let keys: Vec<String> = params.as_object().map(|o| o.keys().map(|k| format!("--{k}")).collect()).unwrap_or_default();
        let (coef, dist) = claim.rhs();
        text.push_str(&format!("{name:6} {:10} e.g. {} -> ({coef}) {dist}\n", keys.join(" "), claim.id()));
    }
    emit(None, &text)?;
    Ok(Outcome::Pass)
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("GFLAB_THREADS") else { return Ok(()) };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("GFLAB_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("cannot size the worker pool: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match &cli.command {
        Command::Verify(args) => cmd_verify(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Identities(args) => cmd_identities(args),
        Command::Mollifier(args) => cmd_mollifier(args),
        Command::ListClaims => cmd_list_claims(),
    });
    match result {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

