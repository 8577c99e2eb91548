//! `crr`: price, replicate and verify derivatives in a Cox-Ross-Rubinstein market.
//!
//! Exit codes: 0 success, 2 market not viable (price/replicate), 3 invalid
//! input, 4 portfolio does not replicate, 5 market not viable (check).

use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use crr_core::crr::{CrrMarket, MarketConfig, RISKY, RISK_FREE};
use crr_core::format::sig6;
use crr_core::io::{
    read_path_table_csv, read_portfolio_csv, write_lattice_csv, write_portfolio_csv,
};
use crr_core::lattice::{PathMeasure, TossPath};
use crr_core::market::closing_value_lattice;
use crr_core::payoff::{payoff_horizon, PayoffExpr, PayoffHorizon};
use crr_core::pricing::{
    construct_arbitrage, is_arbitrage_process, price_lattice, replicating_portfolio,
    verify_replication, verify_replication_table, PathTable, Payoff, DEFAULT_TOLERANCE,
};
use crr_core::Error;

const EXIT_NOT_VIABLE: u8 = 2;
const EXIT_INPUT: u8 = 3;
const EXIT_NOT_REPLICATING: u8 = 4;
const EXIT_CHECK_NOT_VIABLE: u8 = 5;

#[derive(Parser)]
#[command(
    name = "crr",
    version,
    about = "Binomial-market pricing, replication and verification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the fair price of a payoff.
    Price {
        #[command(flatten)]
        job: PayoffJob,
        /// Write the backward-induction value tree as CSV.
        #[arg(long, value_name = "FILE")]
        tree: Option<PathBuf>,
    },
    /// Synthesize the replicating portfolio of a payoff.
    Replicate {
        #[command(flatten)]
        job: PayoffJob,
        /// Portfolio CSV destination (stdout if omitted).
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
        tolerance: f64,
    },
    /// Check an external portfolio against a payoff.
    Verify {
        #[command(flatten)]
        job: PayoffJob,
        #[arg(long, value_name = "FILE")]
        portfolio: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
        tolerance: f64,
    },
    /// Report viability and the risk-neutral parameter.
    Check {
        #[arg(long, value_name = "FILE")]
        config: PathBuf,
    },
}

#[derive(Args)]
struct PayoffJob {
    /// JSON market configuration.
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
    /// Payoff expression, e.g. `lookback` or `pos(S_T - 98)`.
    #[arg(
        long,
        value_name = "EXPR",
        required_unless_present = "path_table",
        conflicts_with = "path_table"
    )]
    payoff: Option<String>,
    /// CSV table `prefix,value` with one row per terminal path.
    #[arg(long, value_name = "FILE")]
    path_table: Option<PathBuf>,
    /// Maturity; defaults to the horizon of the configuration.
    #[arg(long, value_name = "N")]
    maturity: Option<usize>,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NotViable => Self {
                code: EXIT_NOT_VIABLE,
                message: "market not viable: requires d < 1+r < u".into(),
            },
            other => Self::input(other.to_string()),
        }
    }
}

type CmdResult = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT } else { 0 });
        }
    };
    let outcome = match cli.command {
        Command::Price { job, tree } => cmd_price(&job, tree.as_deref()),
        Command::Replicate {
            job,
            out,
            tolerance,
        } => cmd_replicate(&job, out.as_deref(), tolerance),
        Command::Verify {
            job,
            portfolio,
            tolerance,
        } => cmd_verify(&job, &portfolio, tolerance),
        Command::Check { config } => cmd_check(&config),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<File, Failure> {
    File::create(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn load_config(path: &Path) -> Result<MarketConfig, Failure> {
    MarketConfig::from_json(&read_text(path)?)
        .map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn check_tolerance(tolerance: f64) -> Result<(), Failure> {
    if tolerance.is_finite() && tolerance >= 0.0 {
        Ok(())
    } else {
        Err(Failure::input(format!(
            "tolerance must be a nonnegative number, got {tolerance}"
        )))
    }
}

/// Market, payoff and maturity shared by the payoff-driven commands.
struct Job {
    market: CrrMarket,
    payoff: Box<dyn Payoff>,
    maturity: usize,
}

impl PayoffJob {
    fn load(&self) -> Result<Job, Failure> {
        let config = load_config(&self.config)?;
        let maturity = self.maturity.unwrap_or(config.horizon);
        if maturity > config.horizon {
            return Err(Failure::input(format!(
                "maturity {maturity} exceeds the horizon {}",
                config.horizon
            )));
        }
        let payoff: Box<dyn Payoff> = match (&self.payoff, &self.path_table) {
            (Some(text), _) => {
                let expr: PayoffExpr = text
                    .parse()
                    .map_err(|e| Failure::input(format!("payoff: {e}")))?;
                if let PayoffHorizon::Explicit(last) = payoff_horizon(&expr) {
                    if last > maturity {
                        return Err(Failure::input(format!(
                            "payoff reads S[{last}] past the maturity {maturity}"
                        )));
                    }
                }
                Box::new(expr)
            }
            (None, Some(path)) => {
                let table: PathTable = read_path_table_csv(open(path)?, maturity)
                    .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
                Box::new(table)
            }
            (None, None) => {
                return Err(Failure::input(
                    "one of --payoff or --path-table is required",
                ))
            }
        };
        Ok(Job {
            market: config.market()?,
            payoff,
            maturity,
        })
    }
}

fn cmd_price(job: &PayoffJob, tree: Option<&Path>) -> CmdResult {
    let Job {
        market,
        payoff,
        maturity,
    } = job.load()?;
    let lattice = price_lattice(&market, payoff.as_ref(), maturity)?;
    if let Some(path) = tree {
        write_lattice_csv(lattice.values(), create(path)?)?;
    }
    println!("{}", sig6(lattice.price()));
    Ok(0)
}

fn cmd_replicate(job: &PayoffJob, out: Option<&Path>, tolerance: f64) -> CmdResult {
    check_tolerance(tolerance)?;
    let Job {
        market,
        payoff,
        maturity,
    } = job.load()?;
    let portfolio = replicating_portfolio(&market, payoff.as_ref(), maturity)?;
    match out {
        Some(path) => write_portfolio_csv(&portfolio, create(path)?)?,
        None => write_portfolio_csv(&portfolio, io::stdout().lock())?,
    }
    let report = verify_replication(&market, &portfolio, payoff.as_ref(), maturity, tolerance)?;
    eprintln!(
        "init value: {} ({})",
        sig6(report.init_value),
        report.init_value + 0.0
    );
    eprintln!("{report}");
    Ok(if report.is_replicating() {
        0
    } else {
        EXIT_NOT_REPLICATING
    })
}

fn cmd_verify(job: &PayoffJob, portfolio: &Path, tolerance: f64) -> CmdResult {
    check_tolerance(tolerance)?;
    let Job {
        market,
        payoff,
        maturity,
    } = job.load()?;
    let table = read_portfolio_csv(open(portfolio)?, market.horizon())
        .map_err(|e| Failure::input(format!("{}: {e}", portfolio.display())))?;
    let mut stdout = io::stdout().lock();
    let report =
        match verify_replication_table(&market, &table, payoff.as_ref(), maturity, tolerance) {
            Ok(report) => report,
            Err(Error::NonStockSupport(asset)) => {
                let _ = writeln!(stdout, "stock-only: FAIL (holds non-stock asset {asset})");
                let _ = writeln!(stdout, "replicating: no");
                return Ok(EXIT_NOT_REPLICATING);
            }
            Err(e) => return Err(Failure::input(format!("{}: {e}", portfolio.display()))),
        };
    let _ = writeln!(stdout, "stock-only: pass");
    let _ = writeln!(stdout, "{report}");
    let _ = writeln!(
        stdout,
        "init value: {} ({})",
        sig6(report.init_value),
        report.init_value + 0.0
    );
    Ok(if report.is_replicating() {
        0
    } else {
        EXIT_NOT_REPLICATING
    })
}

fn cmd_check(config: &Path) -> CmdResult {
    let config = load_config(config)?;
    let market = config.market()?;
    let mut stdout = io::stdout().lock();
    if market.is_viable() {
        let q = market.risk_neutral_q()?;
        let _ = writeln!(stdout, "viable; q = {}", sig6(q));
        return Ok(0);
    }
    let params = market.params();
    let _ = writeln!(
        stdout,
        "not viable: requires d < 1+r < u (d = {}, 1+r = {}, u = {})",
        params.d,
        1.0 + params.r,
        params.u
    );
    let arbitrage = construct_arbitrage(&market)?;
    let root = TossPath::empty();
    let risky = arbitrage.quantities().quantity(RISKY, 1, &root)?;
    let bond = arbitrage.quantities().quantity(RISK_FREE, 1, &root)?;
    let _ = writeln!(stdout, "arbitrage portfolio (held at every time):");
    let _ = writeln!(stdout, "asset,quantity");
    let _ = writeln!(stdout, "{RISKY},{risky}");
    let _ = writeln!(stdout, "{RISK_FREE},{bond}");
    let closing = closing_value_lattice(market.market(), &arbitrage);
    let _ = writeln!(stdout, "closing value at time 1:");
    let _ = writeln!(stdout, "prefix,value");
    for (k, x) in closing.level(1).iter().enumerate() {
        let _ = writeln!(stdout, "{},{}", TossPath::from_index(1, k), sig6(*x));
    }
    let measure = PathMeasure::new(params.p)?;
    let verdict = is_arbitrage_process(market.market(), &measure, &arbitrage);
    match verdict.witness_time {
        Some(n) if verdict.is_arbitrage => {
            let _ = writeln!(stdout, "verified arbitrage; witness time: {n}");
        }
        _ => {
            let _ = writeln!(
                stdout,
                "arbitrage not certified: {}",
                verdict.violated_clause
            );
        }
    }
    Ok(EXIT_CHECK_NOT_VIABLE)
}
