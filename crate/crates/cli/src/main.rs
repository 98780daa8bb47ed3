use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use coulomb_core::checks::{run_suite, SuiteOptions};
use coulomb_core::gale::{duality_report, gale_dual, ToricConfig};
use coulomb_core::lie::{Conventions, HalfHyperWeight, So2Model};
use coulomb_core::monopole::{
    coulomb_hilbert_series, hs_contribution_check, nilcone_reference_hs, refined_hilbert_series,
    refined_implosion_integral, EngineError, HsRequest, RunStats, Strategy,
};
use coulomb_core::quiver::{
    balance_report, build_bouquet_quiver, build_dn_implosion_quiver, build_linear_nilpotent_quiver,
    build_partial_implosion_quiver, detect_decoupled_u1, expected_coulomb_dimension_real,
    gauge_group_rank, higgs_quaternionic_dimension, predict_global_symmetry, DnVariant, Family,
    GaugeDimConvention, Quiver,
};
use coulomb_core::series::plethystic_log;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

#[derive(Parser)]
#[command(name = "coulomb-hs", version, about = "Coulomb branch Hilbert series of 3d N=4 quivers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a quiver JSON file for one of the built-in families.
    Generate(GenerateArgs),
    /// Balance, symmetry and dimension bookkeeping for a quiver.
    Report {
        quiver: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Hilbert series by the monopole formula.
    Hs(HsArgs),
    /// Compare the refined bouquet integral with the nilpotent cone.
    ImplosionCheck(ImplosionArgs),
    /// Gale dual of an integer vector configuration.
    Gale {
        matrix: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Run every reproduction check.
    CheckSuite(SuiteArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Nilpotent,
    Bouquet,
    Partial,
    Dn,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(value_enum)]
    kind: Kind,
    #[arg(long)]
    n: u32,
    /// Leg lengths for `partial`, comma separated.
    #[arg(long, value_delimiter = ',')]
    partition: Vec<u32>,
    /// `dn`: replace the SO(2n) flavor node by SO(2) leaves.
    #[arg(long, conflicts_with = "flavor")]
    bouquet: bool,
    /// `dn`: keep the SO(2n) flavor node.
    #[arg(long)]
    flavor: bool,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightArg {
    Full,
    Half,
}

#[derive(Clone, Copy, ValueEnum)]
enum So2Arg {
    So2,
    O2,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Factorized,
    Direct,
}

#[derive(Args, Clone, Copy)]
struct ConventionArgs {
    /// Orthosymplectic bifundamental weight.
    #[arg(long, value_enum, default_value = "full")]
    half_hyper: WeightArg,
    /// Treat SO(2) nodes as SO(2) or O(2).
    #[arg(long, value_enum, default_value = "so2")]
    so2: So2Arg,
}

impl ConventionArgs {
    fn get(self) -> Conventions {
        Conventions {
            half_hyper: match self.half_hyper {
                WeightArg::Full => HalfHyperWeight::Full,
                WeightArg::Half => HalfHyperWeight::Half,
            },
            so2: match self.so2 {
                So2Arg::So2 => So2Model::So2,
                So2Arg::O2 => So2Model::O2,
            },
        }
    }
}

#[derive(Args)]
struct HsArgs {
    quiver: PathBuf,
    #[arg(long, default_value_t = 8)]
    order: usize,
    /// U(1) gauge node to ungauge.
    #[arg(long)]
    ungauge: Option<String>,
    /// Unitary gauge nodes that carry a fugacity.
    #[arg(long, num_args = 1..)]
    refine: Vec<String>,
    /// Also print the plethystic logarithm.
    #[arg(long)]
    pl: bool,
    #[arg(long, env = "COULOMB_HS_THREADS")]
    threads: Option<usize>,
    #[arg(long, value_enum, default_value = "factorized")]
    strategy: StrategyArg,
    #[command(flatten)]
    conventions: ConventionArgs,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ImplosionArgs {
    #[arg(long)]
    n: u32,
    #[arg(long, default_value_t = 8)]
    order: usize,
    /// Power of (1 - t^2) in front of the integral; defaults to n - 1.
    #[arg(long)]
    prefactor_exponent: Option<u32>,
    #[arg(long, env = "COULOMB_HS_THREADS")]
    threads: Option<usize>,
}

#[derive(Args)]
struct SuiteArgs {
    #[arg(long, env = "COULOMB_HS_THREADS")]
    threads: Option<usize>,
    /// Truncation order of the bouquet(5) run.
    #[arg(long, default_value_t = 4)]
    bouquet5_order: usize,
    #[arg(long)]
    skip_d4: bool,
    #[command(flatten)]
    conventions: ConventionArgs,
    #[arg(long)]
    json: bool,
}

enum Failure {
    Invalid(String),
    Compute(String),
    Checks,
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::Compute(_) => 2,
            Failure::Checks => 3,
        }
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Quiver(q) => Failure::Invalid(q.to_string()),
            EngineError::DecoupledU1Unresolved => Failure::Compute(
                "the diagonal U(1) decouples and the monopole sum diverges; \
                 pass --ungauge <ID> naming a U(1) gauge node"
                    .into(),
            ),
            EngineError::InvalidRefinement(_) => Failure::Invalid(format!("--refine: {e}")),
            other => Failure::Compute(other.to_string()),
        }
    }
}

#[derive(Serialize)]
struct RunManifest {
    command: String,
    input_sha256: String,
    order: usize,
    bound_reached: u32,
    charge_count: String,
    wall_time_ms: u128,
    version: &'static str,
}

impl RunManifest {
    fn new(command: &str, input: &[u8], order: usize, stats: &RunStats, start: Instant) -> Self {
        RunManifest {
            command: command.into(),
            input_sha256: hex::encode(Sha256::digest(input)),
            order,
            bound_reached: stats.bound_reached,
            charge_count: stats.charge_count.to_string(),
            wall_time_ms: start.elapsed().as_millis(),
            version: env!("CARGO_PKG_VERSION"),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Report { quiver, json } => report(&quiver, json),
        Command::Hs(a) => hs(a),
        Command::ImplosionCheck(a) => implosion_check(a),
        Command::Gale { matrix, json } => gale(&matrix, json),
        Command::CheckSuite(a) => check_suite(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Invalid(m) | Failure::Compute(m) => eprintln!("error: {m}"),
                Failure::Checks => {}
            }
            ExitCode::from(f.code())
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))
}

fn load_quiver(path: &Path) -> Result<(Quiver, Vec<u8>), Failure> {
    let bytes = read(path)?;
    let text = String::from_utf8_lossy(&bytes);
    let q = Quiver::from_json_str(&text)
        .map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?;
    Ok((q, bytes))
}

fn generate(a: GenerateArgs) -> Result<(), Failure> {
    let built = match a.kind {
        Kind::Nilpotent => build_linear_nilpotent_quiver(a.n),
        Kind::Bouquet => build_bouquet_quiver(a.n),
        Kind::Partial => build_partial_implosion_quiver(a.n, &a.partition),
        Kind::Dn => build_dn_implosion_quiver(
            a.n,
            if a.flavor { DnVariant::Flavor } else { DnVariant::Bouquet },
        ),
    };
    let q = built.map_err(|e| Failure::Invalid(e.to_string()))?;
    let text = q.to_json_string() + "\n";
    match a.output {
        Some(path) => {
            fs::write(&path, text).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn report(path: &Path, json: bool) -> Result<(), Failure> {
    let (q, _) = load_quiver(path)?;
    let invalid = |e: coulomb_core::quiver::QuiverError| Failure::Invalid(e.to_string());
    let balance = balance_report(&q).map_err(invalid)?;
    let symmetry = predict_global_symmetry(&q).map_err(invalid)?;
    let decoupled = detect_decoupled_u1(&q);
    let rank = gauge_group_rank(&q);
    let coulomb_dim = expected_coulomb_dimension_real(&q).ok();
    let unitary = q.nodes().iter().all(|n| n.group.family == Family::Unitary);
    let higgs = if unitary {
        Some(
            higgs_quaternionic_dimension(&q, GaugeDimConvention::QuotientDecoupled)
                .map_err(invalid)?,
        )
    } else {
        None
    };

    let factors: Vec<String> = symmetry.semisimple.iter().map(|c| c.label.to_string()).collect();
    let groups: Vec<String> = symmetry.semisimple.iter().map(|c| c.label.group_name()).collect();
    let mut summary = if factors.is_empty() {
        "no balanced subquiver".to_string()
    } else {
        format!("{} balanced; predicted {}", factors.join(" + "), groups.join(" x "))
    };
    if symmetry.abelian_rank > 0 {
        summary.push_str(&format!(" + abelian rank {}", symmetry.abelian_rank));
    }

    if json {
        let v = json!({
            "summary": summary,
            "balance": balance,
            "symmetry": symmetry,
            "gauge_rank": rank,
            "coulomb_dimension_real": coulomb_dim,
            "higgs_quaternionic_dimension": higgs,
            "decoupled_u1": decoupled,
        });
        println!("{}", serde_json::to_string_pretty(&v).expect("report serializes"));
        return Ok(());
    }
    println!("{summary}");
    println!("balances:");
    for (id, b) in &balance.balances {
        println!("  {id:<10} {b}");
    }
    for c in &symmetry.semisimple {
        println!("component {} [{}] -> {}", c.label, c.nodes.join(" "), c.label.group_name());
    }
    for c in &symmetry.unrecognized {
        println!("component {} [{}]", c.label, c.nodes.join(" "));
    }
    println!("symmetry dimension: {}", symmetry.total_dimension);
    println!("gauge rank: {rank}");
    match coulomb_dim {
        Some(d) => println!("coulomb dimension (real): {d}"),
        None => println!("coulomb dimension (real): undefined until a U(1) is ungauged"),
    }
    if let Some(h) = higgs {
        println!("higgs dimension (quaternionic): {h}");
    }
    println!("decoupled U(1): {}", if decoupled { "yes" } else { "no" });
    Ok(())
}

fn hs(a: HsArgs) -> Result<(), Failure> {
    let start = Instant::now();
    let (q, bytes) = load_quiver(&a.quiver)?;
    let mut input = bytes;
    input.extend_from_slice(
        format!(
            "|ungauge={:?}|refine={:?}|weight={}|so2={}",
            a.ungauge,
            a.refine,
            matches!(a.conventions.half_hyper, WeightArg::Full),
            matches!(a.conventions.so2, So2Arg::So2)
        )
        .as_bytes(),
    );
    let mut req = HsRequest::new(q, a.order)
        .conventions(a.conventions.get())
        .threads(a.threads)
        .strategy(match a.strategy {
            StrategyArg::Factorized => Strategy::Factorized,
            StrategyArg::Direct => Strategy::Direct,
        });
    if let Some(id) = &a.ungauge {
        req = req.ungauge(id.clone());
    }

    let (text, series_json, unrefined, stats) = if a.refine.is_empty() {
        let run = coulomb_hilbert_series(&req)?;
        (run.series.to_string(), run.series.to_json(), run.series, run.stats)
    } else {
        let run = refined_hilbert_series(&req.refine(a.refine.clone()))?;
        let flat = run.series.at_unit_fugacities();
        (run.series.to_string(), run.series.to_json(), flat, run.stats)
    };
    let pl = if a.pl {
        Some(plethystic_log(&unrefined, a.order).map_err(|e| Failure::Compute(e.to_string()))?)
    } else {
        None
    };
    let manifest = RunManifest::new("hs", &input, a.order, &stats, start);

    if a.json {
        let mut v = json!({ "series": series_json, "manifest": manifest });
        if let Some(pl) = &pl {
            v["pl"] = pl.to_json();
        }
        println!("{}", serde_json::to_string_pretty(&v).expect("output serializes"));
    } else {
        println!("{text}");
        if let Some(pl) = &pl {
            println!("PL: {pl}");
        }
        println!("{}", serde_json::to_string(&series_json).expect("series serializes"));
        println!("manifest: {}", serde_json::to_string(&manifest).expect("manifest serializes"));
    }
    Ok(())
}

fn implosion_check(a: ImplosionArgs) -> Result<(), Failure> {
    if a.n < 2 {
        return Err(Failure::Invalid(format!("--n must be at least 2, got {}", a.n)));
    }
    let conv = Conventions::default();
    let exponent = a.prefactor_exponent.unwrap_or(a.n - 1);
    let integral = refined_implosion_integral(a.n, a.order, exponent, conv, a.threads)?;
    let reference = nilcone_reference_hs(a.n, a.order);
    let mut all = true;
    let mut line = |name: &str, pass: bool, detail: String| {
        all &= pass;
        println!("{:<4} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    };
    line(
        "refined integral vs nilpotent cone",
        integral == reference,
        format!("prefactor (1-t^2)^{exponent}, order {}", a.order),
    );
    if integral != reference {
        println!("     computed:  {integral}");
        println!("     reference: {reference}");
    }
    let c = hs_contribution_check(a.n, conv, a.threads)?;
    let expected = c.t2_expected_enhanced.unwrap_or(c.t2_expected_generic);
    line("t^2 coefficient", c.t2_matches, format!("{} (expected {expected})", c.t2_coefficient));
    println!(
        "info t^{} coefficient {} with {} bare bouquet monopoles",
        c.top_exponent, c.top_coefficient, c.identified_bouquet_monopoles
    );
    if all {
        Ok(())
    } else {
        Err(Failure::Checks)
    }
}

fn gale(path: &Path, json: bool) -> Result<(), Failure> {
    let bytes = read(path)?;
    let c: ToricConfig = serde_json::from_slice(&bytes)
        .map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?;
    let invalid = |e: coulomb_core::gale::GaleError| Failure::Invalid(e.to_string());
    let dual = gale_dual(&c).map_err(invalid)?;
    let r = duality_report(&c).map_err(invalid)?;
    if json {
        let v = json!({ "dual": dual, "report": r });
        println!("{}", serde_json::to_string_pretty(&v).expect("output serializes"));
        return Ok(());
    }
    println!("dual configuration in Z^{} ({} vectors):", dual.n(), dual.d());
    for (i, col) in dual.columns().iter().enumerate() {
        println!("  v{} = {col:?}", i + 1);
    }
    let rows: [(&str, String); 9] = [
        ("rank n", r.n.to_string()),
        ("vectors d", r.d.to_string()),
        ("dim_R primal", r.dim_primal.to_string()),
        ("dim_R dual", r.dim_dual.to_string()),
        ("FI parameters primal", r.fi_primal.to_string()),
        ("FI parameters dual", r.fi_dual.to_string()),
        ("isometry rank primal", r.isometry_rank_primal.to_string()),
        ("isometry rank dual", r.isometry_rank_dual.to_string()),
        ("column lattice index", r.torsion_order.clone()),
    ];
    for (k, v) in rows {
        println!("  {k:<22} {v}");
    }
    if !r.nonprimitive_columns.is_empty() {
        let cols: Vec<String> =
            r.nonprimitive_columns.iter().map(|i| format!("u{}", i + 1)).collect();
        println!("  non-primitive columns  {}", cols.join(" "));
    }
    Ok(())
}

fn check_suite(a: SuiteArgs) -> Result<(), Failure> {
    let opts = SuiteOptions {
        threads: a.threads,
        conventions: a.conventions.get(),
        bouquet5_order: a.bouquet5_order,
        include_d4: !a.skip_d4,
        ..SuiteOptions::default()
    };
    let outcomes = run_suite(&opts);
    let digest_input: Vec<Value> =
        outcomes.iter().map(|o| json!([o.id, o.expected, o.computed, o.pass])).collect();
    let hash =
        hex::encode(Sha256::digest(serde_json::to_vec(&digest_input).expect("outcomes serialize")));
    let all = outcomes.iter().all(|o| o.pass);
    if a.json {
        let v = json!({ "checks": outcomes, "result_sha256": hash, "pass": all });
        println!("{}", serde_json::to_string_pretty(&v).expect("output serializes"));
    } else {
        for o in &outcomes {
            println!(
                "{:<4} [{:>2}] {} | expected {} | computed {} | {} ms",
                if o.pass { "PASS" } else { "FAIL" },
                o.id,
                o.name,
                o.expected,
                o.computed,
                o.elapsed.as_millis()
            );
        }
        println!("result sha256: {hash}");
    }
    if all {
        Ok(())
    } else {
        Err(Failure::Checks)
    }
}
