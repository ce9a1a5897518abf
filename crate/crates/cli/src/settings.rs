use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(name = "crlab", version, about = "CR-geometric invariants of horizontal submanifolds of spheres")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Volume of the chart by product quadrature.
    Volume,
    /// Willmore-type energies and the Gauss-Bonnet residual.
    Energies,
    /// CR-volume by multi-start optimization over Moebius parameters.
    CrVolume,
    /// Moebius parameter balancing the chart.
    Balance,
    /// CR automorphism normalizing the mean curvature at a point.
    Normalize,
    /// Lower bound for the conformal volume from dilations.
    Dilation,
    /// Degeneration asymptotics.
    Asymptotics {
        #[command(subcommand)]
        action: AsymptoticsAction,
    },
    /// Self-checking suites.
    Verify {
        #[command(subcommand)]
        suite: VerifySuite,
    },
    /// First Laplace eigenvalue of a flat torus.
    Lambda1,
    /// List the built-in charts.
    Catalog,
}

#[derive(Subcommand, Debug, Clone, Copy)]
pub enum AsymptoticsAction {
    /// Measure degenerate volumes at a point and fit the expansion.
    Scan,
    /// Fit the expansion to `t,value` rows of a CSV file (`--input`).
    Fit,
}

#[derive(Subcommand, Debug, Clone, Copy)]
pub enum VerifySuite {
    Identities,
    Appendix,
    Sextic,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Formulas {
    Consistent,
    Reversing,
}

/// Flags shared by all subcommands. Every flag overrides the key of the
/// same name (with `_` for `-`) in the config file.
#[derive(Args, Debug, Default, Clone)]
pub struct Flags {
    /// Catalog chart name.
    #[arg(long, global = true)]
    pub chart: Option<String>,
    /// Chart given by expressions in a TOML file.
    #[arg(long, global = true, value_name = "PATH")]
    pub expr: Option<PathBuf>,
    #[arg(long, global = true)]
    pub m: Option<usize>,
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Moebius parameter, comma separated (2n+2 values).
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub b: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub amplitude: Option<f64>,
    #[arg(long, global = true)]
    pub mode: Option<usize>,
    /// Legendrian torus weights `a,b`.
    #[arg(long, global = true, value_delimiter = ',')]
    pub weights: Option<Vec<u32>>,
    /// Nodes per axis.
    #[arg(long, global = true)]
    pub res: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Number of cases (appendix) or sample points (identities).
    #[arg(long, global = true)]
    pub cases: Option<usize>,
    /// Chart parameters of a point, comma separated.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub point: Option<Vec<f64>>,
    /// Degeneration parameters, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    pub t: Option<Vec<f64>>,
    /// Random starts for cr-volume.
    #[arg(long, global = true)]
    pub starts: Option<usize>,
    #[arg(long, global = true)]
    pub max_evals: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub formulas: Option<Formulas>,
    /// Dilation direction (defaults to b, else e1).
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub direction: Option<Vec<f64>>,
    /// Dilations are scanned over [1/range, range].
    #[arg(long, global = true)]
    pub range: Option<f64>,
    /// Lattice vectors for lambda1.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub v1: Option<Vec<f64>>,
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub v2: Option<Vec<f64>>,
    /// CSV input for `asymptotics fit`.
    #[arg(long, global = true, value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// Config file (TOML, flat keys).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// JSON report destination.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// CSV destination for scans.
    #[arg(long, global = true, value_name = "PATH")]
    pub csv: Option<PathBuf>,
}

/// Effective settings after merging the config file and the flags.
#[derive(Serialize, Deserialize, Debug, Default, Clone, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chart: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expr: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub res: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cases: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub starts: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_evals: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub formulas: Option<Formulas>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direction: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub range: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v1: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v2: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
}

impl Settings {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        let mut s: Settings = toml::from_str(&text).map_err(|e| format!("bad config {}: {e}", path.display()))?;
        // relative paths in the config are relative to the config file
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut s.expr, &mut s.input, &mut s.out, &mut s.csv].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(s)
    }

    pub fn merge(mut self, f: Flags) -> Self {
        macro_rules! over {
            ($($field:ident),*) => { $( if f.$field.is_some() { self.$field = f.$field; } )* };
        }
        over!(
            chart, expr, m, n, b, amplitude, mode, weights, res, seed, cases, point, t, starts, max_evals, formulas,
            direction, range, v1, v2, input, out, csv
        );
        self
    }
}
