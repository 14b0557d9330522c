// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
// WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
// License for the specific language governing permissions and limitations
// under the License.

//! Command-line configuration and list parsing.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ListError {
    #[error("empty list")]
    Empty,
    #[error("item {index} ({item:?}): {message}")]
    Item {
        index: usize,
        item: String,
        message: String,
    },
}

fn items(s: &str) -> Result<Vec<(usize, &str)>, ListError> {
    if s.trim().is_empty() {
        return Err(ListError::Empty);
    }
    Ok(s.split(',').map(str::trim).enumerate().collect())
}

/// Comma-separated positive finite reals, e.g. `1,1.5,2`.
pub fn parse_reals(s: &str) -> Result<Vec<f64>, ListError> {
    items(s)?
        .into_iter()
        .map(|(index, item)| {
            let bad = |message: &str| ListError::Item {
                index,
                item: item.to_string(),
                message: message.to_string(),
            };
            let v: f64 = item.parse().map_err(|_| bad("not a number"))?;
            if !v.is_finite() || v <= 0.0 {
                return Err(bad("must be positive and finite"));
            }
            Ok(v)
        })
        .collect()
}

/// Comma-separated positive integers, e.g. `101,201`.
pub fn parse_counts(s: &str) -> Result<Vec<usize>, ListError> {
    items(s)?
        .into_iter()
        .map(|(index, item)| {
            let bad = |message: &str| ListError::Item {
                index,
                item: item.to_string(),
                message: message.to_string(),
            };
            let v: usize = item.parse().map_err(|_| bad("not a nonnegative integer"))?;
            if v == 0 {
                return Err(bad("must be positive"));
            }
            Ok(v)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct RealList(pub Vec<f64>);

impl FromStr for RealList {
    type Err = ListError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_reals(s).map(RealList)
    }
}

impl Serialize for RealList {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CountList(pub Vec<usize>);

impl FromStr for CountList {
    type Err = ListError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_counts(s).map(CountList)
    }
}

impl Serialize for CountList {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

/// Built-in spaces with their weights.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExampleName {
    #[value(name = "grid1d")]
    #[serde(rename = "grid1d")]
    Grid1d,
    #[value(name = "grid2d")]
    #[serde(rename = "grid2d")]
    Grid2d,
    SegmentPair,
    SpherePlane,
    #[value(name = "power-alpha1")]
    #[serde(rename = "power-alpha1")]
    PowerAlpha1,
    #[value(name = "a1-power")]
    #[serde(rename = "a1-power")]
    A1Power,
    Random,
    #[value(name = "jacobian2d")]
    #[serde(rename = "jacobian2d")]
    Jacobian2d,
}

impl fmt::Display for ExampleName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(
            self.to_possible_value()
                .expect("no skipped variants")
                .get_name(),
        )
    }
}

/// Refinement families for `suite`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Constant,
    #[value(name = "power-alpha1")]
    #[serde(rename = "power-alpha1")]
    PowerAlpha1,
    #[value(name = "a1-power")]
    #[serde(rename = "a1-power")]
    A1Power,
    #[value(name = "power2d-alpha1")]
    #[serde(rename = "power2d-alpha1")]
    Power2dAlpha1,
    #[value(name = "power2d-alpha2")]
    #[serde(rename = "power2d-alpha2")]
    Power2dAlpha2,
    SegmentPair,
}

#[derive(Parser, Debug)]
#[command(
    name = "weightlab",
    version,
    about = "Muckenhoupt and strong A_inf diagnostics on finite metric measure spaces"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandName {
    Classify,
    Metrize,
    Mollify,
    Modulus,
    Examples,
    Suite,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Constant curves for conditions (1)-(5), A_1, A_p and the implication table.
    Classify(Options),
    /// Quasi-distance, chain metric and distortion.
    Metrize(Options),
    /// Mollified weights with convergence, reverse Hölder and Gehring probes.
    Mollify(Options),
    /// Curve-family modulus between a ball and the complement of its double.
    Modulus(Options),
    /// Write built-in example spaces as space files.
    Examples(Options),
    /// Stability of constants across a refinement family.
    Suite(Options),
}

impl Command {
    pub fn parts(&self) -> (CommandName, &Options) {
        match self {
            Command::Classify(o) => (CommandName::Classify, o),
            Command::Metrize(o) => (CommandName::Metrize, o),
            Command::Mollify(o) => (CommandName::Mollify, o),
            Command::Modulus(o) => (CommandName::Modulus, o),
            Command::Examples(o) => (CommandName::Examples, o),
            Command::Suite(o) => (CommandName::Suite, o),
        }
    }
}

/// Flags shared by every command. The full set is embedded in each report.
#[derive(Args, Debug, Clone, Default, PartialEq, Serialize)]
pub struct Options {
    /// Space file to analyze.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Built-in example instead of an input file.
    #[arg(long, value_enum)]
    pub example: Option<ExampleName>,
    /// Resolution of the built-in example (points per axis).
    #[arg(long)]
    pub n: Option<usize>,
    /// Exponents p, comma separated.
    #[arg(long)]
    pub p_grid: Option<RealList>,
    /// Scales ε, comma separated.
    #[arg(long)]
    pub eps_grid: Option<RealList>,
    /// Mollification scales t, comma separated.
    #[arg(long)]
    pub t_grid: Option<RealList>,
    /// Ball radius for `modulus`.
    #[arg(long)]
    pub r: Option<f64>,
    /// Ball center for `modulus` (default: point nearest the centroid).
    #[arg(long)]
    pub x0: Option<usize>,
    /// Solver tolerance.
    #[arg(long, default_value_t = weightlab::modulus::DEFAULT_TOL)]
    pub tol: f64,
    /// Confine chains from x to y to B(x, 2d(x,y)).
    #[arg(long)]
    pub restricted_chains: bool,
    /// Use open balls for doubling constants.
    #[arg(long)]
    pub open_balls: bool,
    /// Resolutions of a refinement family, comma separated.
    #[arg(long)]
    pub scales: Option<CountList>,
    /// Refinement family for `suite`.
    #[arg(long, value_enum)]
    pub family: Option<Family>,
    /// Report path (stdout when absent); plot data goes next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed for randomized examples.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}
