use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ergodic_towers::field::parse_rational;
use ergodic_towers::{Error, Field, Interval, IntervalSet, PiecewiseTranslation, QuadNumber, Rational, System};

#[derive(Parser, Debug, Clone)]
#[command(name = "ergodic-towers", version, about = "Exact tower constructions and stability-time experiments")]
pub struct RunConfig {
    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Also write the constructed tower as JSON to this path.
    #[arg(long, global = true)]
    pub dump_tower: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Return-time tower over a base set, with Kac and fatness checks.
    Kakutani(KakutaniArgs),
    /// Rokhlin tower of a given height and error.
    Rokhlin(RokhlinArgs),
    /// Inflation (skyscraper) system and its column tower.
    Inflate(InflateArgs),
    /// Indicator counterexample on the inflation system.
    Counterexample(CounterexampleArgs),
    /// Stagewise construction of a fat tower.
    Intrinsic(IntrinsicArgs),
    /// Monte-Carlo mean of the truncated stability time.
    Estimate(EstimateArgs),
}

#[derive(Args, Debug, Clone)]
pub struct KakutaniArgs {
    /// `rotation:alpha=golden` or `inflation:imax=10`.
    #[arg(long, default_value = "rotation:alpha=golden")]
    pub system: SystemSpec,

    /// Base set as `start,end` pairs separated by `;` (ground coordinates).
    #[arg(long, default_value = "0,golden")]
    pub base: String,
}

#[derive(Args, Debug, Clone)]
pub struct RokhlinArgs {
    #[arg(long, default_value = "rotation:alpha=golden")]
    pub system: SystemSpec,

    #[arg(long)]
    pub height: usize,

    #[arg(long, default_value = "1/10", value_parser = rational_arg)]
    pub eps: Rational,
}

#[derive(Args, Debug, Clone)]
pub struct InflateArgs {
    #[arg(long, default_value_t = 10)]
    pub imax: usize,

    /// Rotation angle of the base system.
    #[arg(long, default_value = "golden")]
    pub alpha: String,
}

#[derive(Args, Debug, Clone)]
pub struct CounterexampleArgs {
    #[arg(long, default_value_t = 10)]
    pub imax: usize,

    #[arg(long, default_value = "golden")]
    pub alpha: String,

    /// Largest horizon H.
    #[arg(long, default_value_t = 512)]
    pub horizon: usize,

    /// Horizons to tabulate; defaults to the powers of two from 16 up to H.
    #[arg(long, value_delimiter = ',')]
    pub horizons: Option<Vec<usize>>,

    /// Tail-measure bound used to choose N0.
    #[arg(long, default_value = "1/4", value_parser = rational_arg)]
    pub bound: Rational,

    /// Last column index in the chain; defaults to the tallest column not
    /// exceeding each horizon.
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct IntrinsicArgs {
    #[arg(long, default_value = "rotation:alpha=golden")]
    pub system: SystemSpec,

    #[arg(long, value_delimiter = ',', default_value = "1,16,256")]
    pub ks: Vec<usize>,

    #[arg(long, default_value_t = 3)]
    pub stages: usize,

    #[arg(long, default_value = "1/10", value_parser = rational_arg)]
    pub eps: Rational,

    #[arg(long, default_value = "1/8", value_parser = rational_arg)]
    pub budget: Rational,
}

#[derive(Args, Debug, Clone)]
pub struct EstimateArgs {
    #[arg(long, default_value = "inflation:imax=10")]
    pub system: SystemSpec,

    /// The set `A` as `start,end` pairs separated by `;`; defaults to the
    /// counterexample set of an inflation system.
    #[arg(long)]
    pub set: Option<String>,

    /// Tail-measure bound used to choose N0 for the default set.
    #[arg(long, default_value = "1/4", value_parser = rational_arg)]
    pub bound: Rational,

    #[arg(long, value_delimiter = ',', default_value = "16,32,64,128,256,512,1024")]
    pub horizons: Vec<usize>,

    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,

    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

pub fn rational_arg(s: &str) -> Result<Rational, String> {
    parse_rational(s).map_err(|e| e.to_string())
}

/// `rotation:alpha=A[,d=D]` or `inflation:imax=N[,alpha=A][,d=D]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SystemSpec {
    Rotation { alpha: String, d: u64 },
    Inflation { imax: usize, alpha: String, d: u64 },
}

impl FromStr for SystemSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut alpha = "golden".to_string();
        let mut d = 5;
        let mut imax = None;
        for kv in rest.split(',').filter(|kv| !kv.is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| format!("expected key=value, got {kv:?}"))?;
            match k {
                "alpha" => alpha = v.to_string(),
                "d" => d = v.parse().map_err(|_| format!("bad discriminant {v:?}"))?,
                "imax" => imax = Some(v.parse().map_err(|_| format!("bad imax {v:?}"))?),
                _ => return Err(format!("unknown system option {k:?}")),
            }
        }
        match kind {
            "rotation" if imax.is_none() => Ok(SystemSpec::Rotation { alpha, d }),
            "inflation" => Ok(SystemSpec::Inflation {
                imax: imax.ok_or("inflation needs imax")?,
                alpha,
                d,
            }),
            _ => Err(format!("unknown system {s:?}")),
        }
    }
}

impl SystemSpec {
    pub fn build(&self) -> Result<System, Error> {
        match self {
            SystemSpec::Rotation { alpha, d } => {
                let field = Field::new(*d)?;
                System::rotation(field.parse(alpha)?)
            }
            SystemSpec::Inflation { imax, alpha, d } => {
                let field = Field::new(*d)?;
                ergodic_towers::build_inflation(PiecewiseTranslation::rotation(field.parse(alpha)?)?, *imax)
            }
        }
    }
}

/// Parses `a,b;c,d` into an interval set of the given field.
pub fn parse_set(field: Field, s: &str) -> Result<IntervalSet, Error> {
    let mut raw = Vec::new();
    for pair in s.split(';').filter(|p| !p.trim().is_empty()) {
        let (a, b) = pair.split_once(',').ok_or_else(|| Error::Parse {
            input: pair.to_string(),
            reason: "expected start,end".into(),
        })?;
        let a: QuadNumber = field.parse(a.trim())?;
        let b: QuadNumber = field.parse(b.trim())?;
        raw.push(Interval::new(a, b));
    }
    IntervalSet::normalize(field, raw)
}
