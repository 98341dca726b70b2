//! `pdl`: command line front end for the decision and duality toolkit.
//!
//! Exit codes: 0 yes/valid/pass, 1 no/invalid/fail, 2 error, 3 unknown.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use pdl_core::algebra::{
    adjunction_holds, dual_of, embeds, is_exact, lattice_from_json, satisfies_sigma,
    validate_explicit, ExplicitLattice,
};
use pdl_core::config::Caps;
use pdl_core::decide::{decide, verdict_to_json, Verdict};
use pdl_core::error::Error;
use pdl_core::formulas::{parse_sentence, s_pairs, SPairReading};
use pdl_core::free::{check_free_characterizations, free_pdl};
use pdl_core::poset::{
    boolean_poset, enumerate_posets, p_extension_size, poset_from_json, poset_to_json,
};
use pdl_core::skeleton::{brute_force_skeleton, check_free_skeleton, witness_to_json};
use pdl_core::surject::synthesize_surjection;

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Parser)]
#[command(name = "pdl", version, about = "Universal sentences in the free pseudocomplemented distributive lattice: decision, exactness, skeletons")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output format. Env: PDLWB_FORMAT.
    #[arg(long, global = true)]
    format: Option<Format>,
    /// Worker threads (0 = all cores). Env: PDLWB_THREADS.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for randomized re-verification. Env: PDLWB_SEED.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Cap: points materialized for P(X). Env: PDLWB_P_EXTENSION_MAX.
    #[arg(long, global = true)]
    p_extension_max: Option<u64>,
    /// Cap: poset size for subset enumeration. Env: PDLWB_ENUM_MAX_BITS.
    #[arg(long, global = true)]
    enum_max_bits: Option<usize>,
    /// Cap: variables on the exhaustive decision path. Env: PDLWB_DECIDE_K_MAX.
    #[arg(long, global = true)]
    decide_k_max: Option<usize>,
    /// Cap: largest materialized free algebra. Env: PDLWB_FREE_N_MAX.
    #[arg(long, global = true)]
    free_n_max: Option<usize>,
    /// Budget: assignment evaluations. Env: PDLWB_EVAL_BUDGET.
    #[arg(long, global = true)]
    eval_budget: Option<u64>,
    /// Budget: map search nodes. Env: PDLWB_SEARCH_BUDGET.
    #[arg(long, global = true)]
    search_budget: Option<u64>,
    /// Budget: brute-force skeleton nodes. Env: PDLWB_SKELETON_BF_BUDGET.
    #[arg(long, global = true)]
    skeleton_bf_budget: Option<u64>,
    /// Samples for surjection re-verification. Env: PDLWB_VERIFY_SAMPLES.
    #[arg(long, global = true)]
    verify_samples: Option<u32>,
    /// Cap: coordinates of synthesized surjection domains. Env: PDLWB_SURJECT_K_MAX.
    #[arg(long, global = true)]
    surject_k_max: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Check a poset file for a free skeleton and print the witness.
    Skeleton { file: PathBuf },
    /// Check a lattice file for exactness (embeddability into the free algebra).
    Exact { file: PathBuf },
    /// Decide validity of a universal sentence in the free algebra.
    Decide {
        sentence: Option<String>,
        /// Read the sentence from a file instead (wins over the argument).
        #[arg(long)]
        file: Option<PathBuf>,
    },
    /// Report on the free algebra on n generators.
    Free {
        n: usize,
        /// Print sizes and counts (the default).
        #[arg(long)]
        info: bool,
        /// Run the atom/join-irreducible/order characterization checks.
        #[arg(long)]
        check: bool,
    },
    /// Search for an embedding of lattice A into lattice B.
    Embed { file_a: PathBuf, file_b: PathBuf },
    /// Check whether every small-generated subalgebra of a lattice is exact.
    Sigma {
        file: PathBuf,
        #[arg(long, default_value_t = 2)]
        gen_budget: usize,
    },
    /// Run an oracle cross-validation suite: skeleton, duality, freechar, surjection.
    Crosscheck {
        suite: String,
        #[arg(long)]
        size_cap: Option<usize>,
    },
}

fn env_parse<T: std::str::FromStr>(name: &str) -> Option<T> {
    std::env::var(name).ok().and_then(|v| v.parse().ok())
}

/// Flags win over PDLWB_* environment variables, which win over defaults.
fn effective_caps(cli: &Cli) -> Caps {
    let mut caps = Caps::default();
    macro_rules! pick {
        ($field:ident, $env:literal) => {
            if let Some(v) = cli.$field {
                caps.$field = v;
            } else if let Some(v) = env_parse($env) {
                caps.$field = v;
            }
        };
    }
    pick!(p_extension_max, "PDLWB_P_EXTENSION_MAX");
    pick!(enum_max_bits, "PDLWB_ENUM_MAX_BITS");
    pick!(decide_k_max, "PDLWB_DECIDE_K_MAX");
    pick!(free_n_max, "PDLWB_FREE_N_MAX");
    pick!(eval_budget, "PDLWB_EVAL_BUDGET");
    pick!(search_budget, "PDLWB_SEARCH_BUDGET");
    pick!(skeleton_bf_budget, "PDLWB_SKELETON_BF_BUDGET");
    pick!(verify_samples, "PDLWB_VERIFY_SAMPLES");
    pick!(surject_k_max, "PDLWB_SURJECT_K_MAX");
    pick!(seed, "PDLWB_SEED");
    pick!(threads, "PDLWB_THREADS");
    caps
}

struct Ctx {
    caps: Caps,
    format: Format,
}

impl Ctx {
    fn emit(&self, payload: Value, text: String) {
        match self.format {
            Format::Json => println!("{payload}"),
            Format::Text => println!("{text}"),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let caps = effective_caps(&cli);
    if caps.threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(caps.threads).build_global();
    }
    let format = cli
        .format
        .or_else(|| match env_parse::<String>("PDLWB_FORMAT").as_deref() {
            Some("json") => Some(Format::Json),
            Some("text") => Some(Format::Text),
            _ => None,
        })
        .unwrap_or(Format::Text);
    let ctx = Ctx { caps, format };
    match run(&cli.command, &ctx) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            match ctx.format {
                Format::Json => println!("{}", json!({"error": e.to_string()})),
                Format::Text => eprintln!("error: {e}"),
            }
            ExitCode::from(2)
        }
    }
}

fn run(cmd: &Command, ctx: &Ctx) -> Result<u8, Error> {
    match cmd {
        Command::Skeleton { file } => cmd_skeleton(file, ctx),
        Command::Exact { file } => cmd_exact(file, ctx),
        Command::Decide { sentence, file } => cmd_decide(sentence.as_deref(), file.as_deref(), ctx),
        Command::Free { n, info, check } => cmd_free(*n, *info, *check, ctx),
        Command::Embed { file_a, file_b } => cmd_embed(file_a, file_b, ctx),
        Command::Sigma { file, gen_budget } => cmd_sigma(file, *gen_budget, ctx),
        Command::Crosscheck { suite, size_cap } => cmd_crosscheck(suite, *size_cap, ctx),
    }
}

fn cmd_skeleton(file: &PathBuf, ctx: &Ctx) -> Result<u8, Error> {
    let poset = poset_from_json(&fs::read_to_string(file)?)?;
    match check_free_skeleton(&poset) {
        Some(w) => {
            let wj = witness_to_json(&w);
            ctx.emit(
                json!({"skeleton": true, "witness": wj}),
                format!("free skeleton found\n{wj}"),
            );
            Ok(0)
        }
        None => {
            ctx.emit(json!({"skeleton": false}), "none".into());
            Ok(1)
        }
    }
}

fn cmd_exact(file: &PathBuf, ctx: &Ctx) -> Result<u8, Error> {
    let a = lattice_from_json(&fs::read_to_string(file)?, &ctx.caps)?;
    let dual = poset_to_json(a.dual());
    match check_free_skeleton(a.dual()) {
        Some(w) => {
            ctx.emit(
                json!({"exact": true, "dual": dual, "witness": witness_to_json(&w)}),
                format!("exact (dual has a free skeleton)\ndual: {dual}"),
            );
            Ok(0)
        }
        None => {
            ctx.emit(
                json!({"exact": false, "dual": dual}),
                format!("not exact (dual has no free skeleton)\ndual: {dual}"),
            );
            Ok(1)
        }
    }
}

fn cmd_decide(sentence: Option<&str>, file: Option<&std::path::Path>, ctx: &Ctx) -> Result<u8, Error> {
    let text = match (file, sentence) {
        (Some(f), _) => fs::read_to_string(f)?,
        (None, Some(s)) => s.to_string(),
        (None, None) => {
            return Err(Error::Precondition("no sentence given (argument or --file)".into()))
        }
    };
    let s = parse_sentence(text.trim())?;
    let verdict = decide(&s, &ctx.caps)?;
    let j = verdict_to_json(&verdict);
    let (code, line) = match &verdict {
        Verdict::Valid { checked_quotients } => {
            (0, format!("valid (checked {checked_quotients} quotients)"))
        }
        Verdict::Invalid { witness_dual, .. } => {
            (1, format!("invalid (witness dual on {} points)\n{j}", witness_dual.len()))
        }
        Verdict::Unknown { reason, .. } => (3, format!("unknown: {reason}")),
    };
    ctx.emit(j, line);
    Ok(code)
}

fn cmd_free(n: usize, info: bool, check: bool, ctx: &Ctx) -> Result<u8, Error> {
    if check && !info {
        let report = check_free_characterizations(n, SPairReading::Corrected, &ctx.caps)?;
        let clean = report.clean();
        ctx.emit(
            serde_json::to_value(&report)?,
            format!(
                "n={n}: atoms {}, join-irreducibles {}, order {}",
                if report.atoms_ok { "ok" } else { "MISMATCH" },
                if report.jirr_ok { "ok" } else { "MISMATCH" },
                if report.order_iso_ok { "ok" } else { "MISMATCH" },
            ),
        );
        return Ok(if clean { 0 } else { 1 });
    }
    let dual_size = p_extension_size(&boolean_poset(n)?)
        .ok_or_else(|| Error::CapExceeded(format!("|P(2^{n})| overflows")))?;
    if n <= ctx.caps.free_n_max {
        let f = free_pdl(n, &ctx.caps)?;
        let atoms = pdl_core::algebra::atoms(&f.algebra).len();
        let jirr = pdl_core::algebra::join_irreducibles(&f.algebra).len();
        ctx.emit(
            json!({
                "n": n,
                "dual_size": dual_size,
                "algebra_size": f.algebra.len(),
                "atoms": atoms,
                "join_irreducibles": jirr,
            }),
            format!(
                "F({n}): dual {dual_size} points, {} elements, {atoms} atoms, {jirr} join-irreducibles",
                f.algebra.len()
            ),
        );
    } else {
        ctx.emit(
            json!({"n": n, "dual_size": dual_size}),
            format!("F({n}): dual {dual_size} points (algebra not materialized at this cap)"),
        );
    }
    Ok(0)
}

fn cmd_embed(file_a: &PathBuf, file_b: &PathBuf, ctx: &Ctx) -> Result<u8, Error> {
    let a = lattice_from_json(&fs::read_to_string(file_a)?, &ctx.caps)?;
    let b = lattice_from_json(&fs::read_to_string(file_b)?, &ctx.caps)?;
    match embeds(&a, &b, &ctx.caps)? {
        Some(map) => {
            let named: Vec<String> =
                map.iter().map(|&i| b.element_name(i)).collect();
            ctx.emit(
                json!({"embeds": true, "map": named}),
                format!("embeds: {}", named.join(", ")),
            );
            Ok(0)
        }
        None => {
            ctx.emit(json!({"embeds": false}), "no embedding".into());
            Ok(1)
        }
    }
}

fn cmd_sigma(file: &PathBuf, gen_budget: usize, ctx: &Ctx) -> Result<u8, Error> {
    let a = lattice_from_json(&fs::read_to_string(file)?, &ctx.caps)?;
    let ok = satisfies_sigma(&a, gen_budget);
    ctx.emit(
        json!({"sigma": ok, "gen_budget": gen_budget}),
        format!(
            "subalgebras on up to {gen_budget} generators: {}",
            if ok { "all exact" } else { "non-exact subalgebra found" }
        ),
    );
    Ok(if ok { 0 } else { 1 })
}

fn cmd_crosscheck(suite: &str, size_cap: Option<usize>, ctx: &Ctx) -> Result<u8, Error> {
    let caps = &ctx.caps;
    let mut failures: Vec<String> = Vec::new();
    let mut checked = 0u64;
    match suite {
        // the fast checker against the definitional brute-force search
        "skeleton" => {
            let cap = size_cap.unwrap_or(5);
            for n in 1..=cap {
                for p in enumerate_posets(n, caps)? {
                    checked += 1;
                    let fast = check_free_skeleton(&p).is_some();
                    let slow = brute_force_skeleton(&p, caps)?.is_some();
                    if fast != slow {
                        failures.push(format!("skeleton mismatch on a {n}-element poset"));
                    }
                }
            }
        }
        // upset algebra of the dual round-trips through Birkhoff validation
        "duality" => {
            let cap = size_cap.unwrap_or(5);
            for n in 1..=cap {
                for p in enumerate_posets(n, caps)? {
                    checked += 1;
                    let a = pdl_core::algebra::from_dual(&p, caps)?;
                    if !adjunction_holds(&a) {
                        failures.push(format!("adjunction fails on a {n}-point dual"));
                    }
                    let explicit = ExplicitLattice(a.order_poset());
                    match validate_explicit(&explicit, caps) {
                        Ok(v) => {
                            if v.algebra.len() != a.len() {
                                failures.push(format!("round trip size change at {n} points"));
                            }
                        }
                        Err(e) => failures.push(format!("round trip rejected: {e}")),
                    }
                    let d = dual_of(&explicit, caps)?;
                    if d.len() != p.len() {
                        failures.push(format!("dual size {} != {}", d.len(), p.len()));
                    }
                }
            }
        }
        // atom/join-irreducible/order characterizations of the free algebras
        "freechar" => {
            for n in 1..=2 {
                checked += 1;
                let report = check_free_characterizations(n, SPairReading::Corrected, caps)?;
                if !report.clean() {
                    failures.push(format!("free characterization fails at n={n}"));
                }
                let pairs = s_pairs(n, SPairReading::Corrected).len() as u64;
                let dual = p_extension_size(&boolean_poset(n)?).unwrap();
                if pairs != dual {
                    failures.push(format!("pair-family count {pairs} != dual size {dual}"));
                }
            }
        }
        // constructive surjections against their verification reports
        "surjection" => {
            use pdl_core::poset::build_poset;
            let targets = [
                build_poset(&["s"], &[])?,
                build_poset(&["a", "b", "c"], &[("a", "b"), ("b", "c")])?,
                build_poset(&["b", "a1", "a2"], &[("b", "a1"), ("b", "a2")])?,
            ];
            for t in &targets {
                checked += 1;
                let w = check_free_skeleton(t)
                    .ok_or_else(|| Error::Precondition("target lost its skeleton".into()))?;
                let s = synthesize_surjection(t, &w, caps)?;
                if !s.report.ok {
                    failures.push(format!("surjection onto {} points fails", t.len()));
                }
            }
        }
        // every exact algebra from small duals satisfies the axiom scheme
        "sigma" => {
            let cap = size_cap.unwrap_or(4);
            for n in 1..=cap {
                for p in enumerate_posets(n, caps)? {
                    if check_free_skeleton(&p).is_none() {
                        continue;
                    }
                    checked += 1;
                    let a = pdl_core::algebra::from_dual(&p, caps)?;
                    if !satisfies_sigma(&a, a.len()) {
                        failures.push(format!("exact algebra from a {n}-point dual fails sigma"));
                    }
                    if !is_exact(&a) {
                        failures.push("exactness flip".into());
                    }
                }
            }
        }
        other => {
            return Err(Error::Precondition(format!(
                "unknown suite {other}; expected skeleton|duality|freechar|surjection|sigma"
            )))
        }
    }
    let pass = failures.is_empty();
    ctx.emit(
        json!({"suite": suite, "checked": checked, "pass": pass, "failures": failures}),
        format!(
            "{suite}: {checked} cases, {}",
            if pass { "pass".to_string() } else { format!("FAIL {failures:?}") }
        ),
    );
    Ok(if pass { 0 } else { 1 })
}
