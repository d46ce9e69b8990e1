//! Command-line front end.
//!
//! Exit codes: 0 success, 1 verification failure or nothing found, 2 usage,
//! parse, or cap errors. JSON output has sorted keys and a trailing newline.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::certify::{search_certificate, verify_certificate, Certificate, CertifyConfig, Verdict};
use crate::dynamics::{enumerate_quasi_fixed, find_quasi_fixed_avoiding, DensityOutcome, VarietySpec};
use crate::freegroup::{FreeEndo, StallingsGraph, Word};
use crate::gf::DEFAULT_FIELD_CAP;
use crate::poly::{IqSystem, MPoly, PolyMap, DEFAULT_TERM_BUDGET};

/// Environment variable overriding the field-order and enumeration cap.
pub const CAP_ENV: &str = "QUASIFIX_CAP";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Debug, Parser)]
#[command(name = "quasifix", version, about = "Quasi-fixed points and finite quotients of mapping tori")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[arg(long, value_enum, default_value = "json", global = true)]
    pub format: Format,
    /// Write the primary output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List quasi-fixed points of a polynomial map up to a field degree.
    Quasifixed {
        #[arg(long)]
        p: u64,
        #[arg(long)]
        n: usize,
        /// Coordinate polynomials in x1..xn, comma separated.
        #[arg(long)]
        map: String,
        #[arg(long, default_value_t = 3)]
        smax: u32,
    },
    /// Find a quasi-fixed point on V where the polynomial W does not vanish.
    Density {
        #[arg(long)]
        p: u64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        map: String,
        /// Defining polynomials of V; empty means all of A^n.
        #[arg(long, default_value = "")]
        v: String,
        #[arg(long)]
        w: String,
        #[arg(long, default_value_t = 4)]
        smax: u32,
    },
    /// Quotient dimension of I_Q and the iterate congruences.
    Iq {
        #[arg(long)]
        p: u64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        map: String,
        #[arg(long)]
        q: u64,
        #[arg(long, default_value_t = 2)]
        j: u32,
        /// Symbolic term budget.
        #[arg(long, default_value_t = DEFAULT_TERM_BUDGET)]
        budget: usize,
    },
    /// Stallings folding of a list of words.
    Fold {
        #[arg(long)]
        k: usize,
        words: Vec<String>,
    },
    /// Search for a finite-quotient certificate.
    Certify {
        /// JSON file `{"rank": k, "images": [...]}`.
        #[arg(long)]
        endo: PathBuf,
        #[arg(long)]
        word: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 6)]
        smax: u32,
        /// Orbit step budget per seed.
        #[arg(long)]
        budget: Option<u64>,
        #[arg(long, default_value_t = 64)]
        seeds: u64,
        #[arg(long)]
        allow_non_injective: bool,
    },
    /// Verify a certificate file.
    Verify { certificate: PathBuf },
}

/// Captured result of one invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

struct Failure {
    code: i32,
    message: String,
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure { code: EXIT_USAGE, message: e.to_string() }
}

fn field_cap() -> Result<u64, Failure> {
    match std::env::var(CAP_ENV) {
        Ok(v) => v
            .trim()
            .parse::<u64>()
            .ok()
            .filter(|&c| c > 0)
            .ok_or_else(|| usage(format!("{CAP_ENV} must be a positive integer, got {v:?}"))),
        Err(_) => Ok(DEFAULT_FIELD_CAP),
    }
}

fn render_json(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("value serializes");
    s.push('\n');
    s
}

fn point_text(point: &[Vec<u64>]) -> String {
    let coords: Vec<String> = point.iter().map(|c| format!("{c:?}")).collect();
    format!("({})", coords.join(", "))
}

/// Primary output plus exit code. `note` goes to stdout when `body` is
/// redirected by `--out`.
struct Report {
    body: String,
    code: i32,
    note: Option<String>,
}

pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            return if code == 0 {
                Outcome { code, stdout: text, stderr: String::new() }
            } else {
                Outcome { code: EXIT_USAGE, stdout: String::new(), stderr: text }
            };
        }
    };
    let result = dispatch(&cli).and_then(|r| match &cli.out {
        Some(path) => std::fs::write(path, &r.body)
            .map(|_| Report { body: r.note.unwrap_or_default(), code: r.code, note: None })
            .map_err(|e| usage(format!("writing {}: {e}", path.display()))),
        None => Ok(r),
    });
    match result {
        Ok(r) => Outcome { code: r.code, stdout: r.body, stderr: String::new() },
        Err(f) => Outcome { code: f.code, stdout: String::new(), stderr: format!("error: {}\n", f.message) },
    }
}

fn dispatch(cli: &Cli) -> Result<Report, Failure> {
    let fmt = cli.format;
    match &cli.command {
        Command::Quasifixed { p, n, map, smax } => {
            let f = PolyMap::parse(map, *n, *p).map_err(usage)?;
            let wits = enumerate_quasi_fixed(&f, *smax, field_cap()?).map_err(usage)?;
            let records: Vec<_> = wits.iter().map(|w| w.to_record()).collect();
            let body = match fmt {
                Format::Json => render_json(&json!({
                    "p": p, "n": n, "map": f.to_string(), "s_max": smax,
                    "count": records.len(), "witnesses": records,
                })),
                Format::Text => {
                    let mut s = format!("p={p} n={n} map={f} s_max={smax} count={}\n", records.len());
                    for r in &records {
                        let _ = writeln!(s, "s={} m={} point={}", r.s, r.m, point_text(&r.point));
                    }
                    s
                }
            };
            Ok(Report { body, code: EXIT_OK, note: None })
        }
        Command::Density { p, n, map, v, w, smax } => {
            let f = PolyMap::parse(map, *n, *p).map_err(usage)?;
            let var = VarietySpec::parse(v, *n, *p).map_err(usage)?;
            let w_spec = MPoly::parse(w, *n, *p).map_err(usage)?;
            let outcome = find_quasi_fixed_avoiding(&f, &var, &w_spec, *smax, field_cap()?).map_err(usage)?;
            let (value, code) = match &outcome {
                DensityOutcome::Found(wit) => (
                    json!({"status": "found", "witness": wit.to_record()}),
                    EXIT_OK,
                ),
                DensityOutcome::NotFound { searched_degree, witnesses_seen } => (
                    json!({"status": "not-found", "searched_degree": searched_degree, "witnesses_seen": witnesses_seen}),
                    EXIT_FAIL,
                ),
            };
            let body = match fmt {
                Format::Json => render_json(&value),
                Format::Text => match &outcome {
                    DensityOutcome::Found(wit) => {
                        let r = wit.to_record();
                        format!("found p={} s={} m={} point={}\n", r.p, r.s, r.m, point_text(&r.point))
                    }
                    DensityOutcome::NotFound { searched_degree, witnesses_seen } => {
                        format!("not-found searched_degree={searched_degree} witnesses_seen={witnesses_seen}\n")
                    }
                },
            };
            Ok(Report { body, code, note: None })
        }
        Command::Iq { p, n, map, q, j, budget } => {
            let f = PolyMap::parse(map, *n, *p).map_err(usage)?;
            let sys = IqSystem::new(f.clone(), *q).map_err(usage)?.with_budget(*budget);
            let dim = sys.quotient_dimension().map_err(usage)?;
            let congruences = (1..=*j)
                .map(|jj| sys.iterate_congruence_check(jj).map(|ok| (jj, ok)))
                .collect::<Result<Vec<_>, _>>()
                .map_err(usage)?;
            let expected = q.checked_pow(*n as u32);
            let body = match fmt {
                Format::Json => render_json(&json!({
                    "p": p, "n": n, "map": f.to_string(), "q": q,
                    "dimension": dim, "expected": expected,
                    "congruences": congruences.iter().map(|(jj, ok)| json!({"j": jj, "holds": ok})).collect::<Vec<_>>(),
                })),
                Format::Text => {
                    let mut s = format!("p={p} n={n} map={f} q={q} dimension={dim} expected={}\n",
                        expected.map_or("overflow".to_string(), |e| e.to_string()));
                    for (jj, ok) in &congruences {
                        let _ = writeln!(s, "j={jj} holds={ok}");
                    }
                    s
                }
            };
            Ok(Report { body, code: EXIT_OK, note: None })
        }
        Command::Fold { k, words } => {
            let parsed = words
                .iter()
                .map(|w| Word::parse(w, *k))
                .collect::<Result<Vec<_>, _>>()
                .map_err(usage)?;
            let g = StallingsGraph::fold(&parsed, *k);
            let injective = (parsed.len() == *k).then(|| g.rank() == *k as i64);
            let shown: Vec<String> = parsed.iter().map(Word::to_string).collect();
            let body = match fmt {
                Format::Json => render_json(&json!({
                    "k": k, "words": shown, "vertices": g.vertex_count(),
                    "edges": g.edge_count(), "rank": g.rank(), "injective": injective,
                })),
                Format::Text => format!(
                    "k={k} words={} vertices={} edges={} rank={} injective={}\n",
                    shown.join(","),
                    g.vertex_count(),
                    g.edge_count(),
                    g.rank(),
                    injective.map_or("n/a".to_string(), |b| b.to_string())
                ),
            };
            Ok(Report { body, code: EXIT_OK, note: None })
        }
        Command::Certify { endo, word, seed, smax, budget, seeds, allow_non_injective } => {
            let text = std::fs::read_to_string(endo).map_err(|e| usage(format!("reading {}: {e}", endo.display())))?;
            let phi = FreeEndo::from_json(&text).map_err(usage)?;
            let w = Word::parse(word, phi.rank()).map_err(usage)?;
            let defaults = CertifyConfig::default();
            let config = CertifyConfig {
                s_max: *smax,
                seeds_per_field: *seeds,
                orbit_budget: budget.unwrap_or(defaults.orbit_budget),
                field_cap: field_cap()?,
                seed: *seed,
                allow_non_injective: *allow_non_injective,
                ..defaults
            };
            let cert = match search_certificate(&phi, &w, &config) {
                Ok(c) => c,
                Err(e @ crate::certify::CertifyError::NotFound { .. }) => {
                    return Err(Failure { code: EXIT_FAIL, message: e.to_string() })
                }
                Err(e) => return Err(usage(e)),
            };
            let verdict = verify_certificate(&cert).map_err(usage)?;
            let code = if verdict.passed() { EXIT_OK } else { EXIT_FAIL };
            Ok(Report {
                body: cert.to_canonical_json(),
                code,
                note: Some(render_verdict(&verdict, fmt)),
            })
        }
        Command::Verify { certificate } => {
            let text = std::fs::read_to_string(certificate)
                .map_err(|e| usage(format!("reading {}: {e}", certificate.display())))?;
            let cert = Certificate::from_json(&text).map_err(usage)?;
            let verdict = verify_certificate(&cert).map_err(usage)?;
            let code = if verdict.passed() { EXIT_OK } else { EXIT_FAIL };
            Ok(Report { body: render_verdict(&verdict, fmt), code, note: None })
        }
    }
}

fn render_verdict(v: &Verdict, fmt: Format) -> String {
    match fmt {
        Format::Json => render_json(&json!({"passed": v.passed(), "checks": v.checks})),
        Format::Text => format!("{v}\n"),
    }
}
