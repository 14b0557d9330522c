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

//! The six commands. Each returns the report text plus plot tables; nothing
//! here touches the filesystem except `examples` and input loading.

use std::fmt::Write as _;
use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

use weightlab::corpus::{load, space_to_string, to_report_string, write_atomic, CorpusError};
use weightlab::modulus::{
    ball_modulus_check, p_modulus, BallModulus, CurveFamily, ModulusError, ModulusResult,
};
use weightlab::mollify::{
    default_t_grid, gehring_probe, mollify, uniform_rhi_probe, weak_convergence_probe,
    GehringProbe, MollifyError, RhiProbe, Sandwich, TestSet, WeakTable, DEFAULT_GEHRING_GRID,
};
use weightlab::space::{Bound, Convention, Space, SpaceError, Weight};
use weightlab::strong::{
    chain_metrization, comparison_check, quasi_distance, sa_verdict, Comparison, Metrization,
    SaVerdict, Stability, StrongError, STABILITY_FACTOR,
};
use weightlab::weights::{
    a1_constant, classify, implication_matrix, ClassReport, CurvePoint, Extremum, Grids,
    ImplicationTable, WeightError, DEFAULT_EPS_GRID, DEFAULT_P_GRID,
};

use crate::config::{CommandName, ExampleName, Family, Options};
use crate::examples::{build, default_scales, family_member};

pub const TOOL: &str = "weightlab";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error(transparent)]
    Strong(#[from] StrongError),
    #[error(transparent)]
    Mollify(#[from] MollifyError),
    #[error(transparent)]
    Modulus(#[from] ModulusError),
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Report text, plot tables (`suffix`, TSV text) and whether a mathematical
/// finding should set exit code 2.
#[derive(Debug)]
pub struct Outcome {
    pub report: String,
    pub tables: Vec<(String, String)>,
    pub finding: bool,
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: CommandName,
    config: &'a Options,
    result: T,
}

fn render<T: Serialize>(command: CommandName, config: &Options, result: T) -> String {
    let mut s = to_report_string(&Report {
        tool: TOOL,
        version: VERSION,
        command,
        config,
        result,
    });
    s.push('\n');
    s
}

/// Plot-table number: 15 significant digits, `inf` for unbounded values.
fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.14e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn bound_num(b: Bound) -> String {
    num(b.finite().unwrap_or(f64::INFINITY))
}

fn curve_table(x: &str, y: &str, pts: &[CurvePoint]) -> String {
    let mut s = format!("{x}\t{y}\n");
    for p in pts {
        let _ = writeln!(s, "{}\t{}", num(p.x), bound_num(p.value));
    }
    s
}

#[derive(Serialize)]
struct SpaceSummary {
    source: String,
    points: usize,
    q: f64,
    diameter: f64,
    mu_total: f64,
    nu_total: f64,
}

struct Input {
    space: Space,
    weight: Weight,
    summary: SpaceSummary,
}

/// Loads `--input` or builds `--example`; a file without a weight gets `ω ≡ 1`.
fn load_input(o: &Options) -> Result<Input, CliError> {
    let (space, weight, source) = match (&o.input, o.example) {
        (Some(_), Some(_)) => {
            return Err(config_err("--input and --example are mutually exclusive"))
        }
        (None, None) => return Err(config_err("one of --input or --example is required")),
        (Some(path), None) => {
            if o.n.is_some() {
                return Err(config_err("--n applies only to --example"));
            }
            let (s, w) = load(path)?;
            let w = w.unwrap_or_else(|| Weight::constant(s.len(), 1.0));
            (s, w, path.display().to_string())
        }
        (None, Some(name)) => {
            let (s, w) = build(name, o.n, o.seed)?;
            (s, w, format!("example:{name}"))
        }
    };
    let summary = SpaceSummary {
        source,
        points: space.len(),
        q: space.q(),
        diameter: space.diameter(),
        mu_total: space.mu().iter().sum(),
        nu_total: space
            .mu()
            .iter()
            .zip(weight.values())
            .map(|(m, w)| m * w)
            .sum(),
    };
    Ok(Input {
        space,
        weight,
        summary,
    })
}

fn check_tol(o: &Options) -> Result<(), CliError> {
    if !(o.tol > 0.0 && o.tol < 1.0) {
        return Err(config_err(format!(
            "--tol must lie in (0, 1), got {}",
            o.tol
        )));
    }
    Ok(())
}

fn p_grid(o: &Options, default: &[f64]) -> Result<Vec<f64>, CliError> {
    let p = o
        .p_grid
        .as_ref()
        .map_or_else(|| default.to_vec(), |l| l.0.clone());
    if let Some(&bad) = p.iter().find(|&&p| p < 1.0) {
        return Err(config_err(format!(
            "p values must be at least 1, got {bad}"
        )));
    }
    Ok(p)
}

fn convention(o: &Options) -> Convention {
    if o.open_balls {
        Convention::Open
    } else {
        Convention::Closed
    }
}

pub fn run_command(command: CommandName, o: &Options) -> Result<Outcome, CliError> {
    if command != CommandName::Suite && o.family.is_some() {
        return Err(config_err("--family applies only to suite"));
    }
    match command {
        CommandName::Classify => run_classify(o),
        CommandName::Metrize => run_metrize(o),
        CommandName::Mollify => run_mollify(o),
        CommandName::Modulus => run_modulus(o),
        CommandName::Examples => run_examples(o),
        CommandName::Suite => run_suite(o),
    }
}

#[derive(Serialize)]
struct ClassifyResult {
    space: SpaceSummary,
    convention: Convention,
    report: ClassReport,
    implications: ImplicationTable,
}

fn run_classify(o: &Options) -> Result<Outcome, CliError> {
    let input = load_input(o)?;
    let grids = Grids {
        p: p_grid(o, &DEFAULT_P_GRID)?,
        eps: o
            .eps_grid
            .as_ref()
            .map_or_else(|| DEFAULT_EPS_GRID.to_vec(), |l| l.0.clone()),
    };
    let report = classify(&input.space, &input.weight, &grids, convention(o))?;
    let implications = implication_matrix(&report)?;
    let tables = vec![
        (
            "cond1".into(),
            curve_table("eps", "delta", &report.cond1_curve),
        ),
        ("cond2".into(), curve_table("p", "c", &report.cond2_curve)),
        ("cond4".into(), curve_table("p", "c", &report.cond4_curve)),
        (
            "cond2_swapped".into(),
            curve_table("p", "c", &report.cond2_swapped_curve),
        ),
        ("rhi".into(), curve_table("eps", "c", &report.rhi_curve)),
        ("ap".into(), curve_table("p", "c", &report.ap_curve.points)),
    ];
    let finding = implications.violations > 0;
    let result = ClassifyResult {
        space: input.summary,
        convention: convention(o),
        report,
        implications,
    };
    Ok(Outcome {
        report: render(CommandName::Classify, o, result),
        tables,
        finding,
    })
}

#[derive(Serialize)]
struct PairValues {
    i: usize,
    j: usize,
    delta_nu: f64,
    delta: f64,
}

#[derive(Serialize)]
struct MetrizeResult {
    space: SpaceSummary,
    metrization: Metrization,
    witness_values: Option<PairValues>,
    restricted: Option<Metrization>,
    comparison: Option<Comparison>,
    comparison_error: Option<String>,
}

fn pair_values(m: &Metrization) -> Option<PairValues> {
    m.witness.map(|(i, j)| PairValues {
        i,
        j,
        delta_nu: m.delta_nu_at(i, j),
        delta: m.delta_at(i, j),
    })
}

fn run_metrize(o: &Options) -> Result<Outcome, CliError> {
    let input = load_input(o)?;
    let (s, w) = (&input.space, &input.weight);
    let dn = quasi_distance(s, w)?;
    let m = chain_metrization(&dn, s, false)?;
    let restricted = if o.restricted_chains {
        Some(chain_metrization(&dn, s, true)?)
    } else {
        None
    };
    // a non-doubling ν is a finding about the weight, not an input error
    let (comparison, comparison_error) = match comparison_check(s, w) {
        Ok(c) => (Some(c), None),
        Err(e @ StrongError::NonDoubling { .. }) => (None, Some(e.to_string())),
        Err(e) => return Err(e.into()),
    };
    let n = s.len();
    let mut table = String::from("point\tmax_ratio\n");
    for i in 0..n {
        let r = (0..n)
            .filter(|&j| j != i)
            .map(|j| {
                let d = m.delta_at(i, j);
                if d == 0.0 {
                    f64::INFINITY
                } else {
                    m.delta_nu_at(i, j) / d
                }
            })
            .fold(1.0, f64::max);
        let _ = writeln!(table, "{i}\t{}", num(r));
    }
    let result = MetrizeResult {
        space: input.summary,
        witness_values: pair_values(&m),
        metrization: m,
        restricted,
        comparison,
        comparison_error,
    };
    Ok(Outcome {
        report: render(CommandName::Metrize, o, result),
        tables: vec![("distortion".into(), table)],
        finding: false,
    })
}

#[derive(Serialize)]
struct MollifyScale {
    t: f64,
    net_size: usize,
    overlap: usize,
    partition_error: f64,
    partition_lower: f64,
    nu_t_total: f64,
    total_error: f64,
    sandwich: Sandwich,
    local_constant: Bound,
    comparability: Bound,
    gehring: GehringProbe,
}

#[derive(Serialize)]
struct MollifyResult {
    space: SpaceSummary,
    scales: Vec<MollifyScale>,
    weak: WeakTable,
    rhi: RhiProbe,
}

/// `X` and, with coordinates, the open box at the center with half the
/// width of the bounding box.
fn test_sets(space: &Space) -> Result<Vec<TestSet>, CliError> {
    let mut sets = vec![TestSet::whole(space)];
    if let Some(coords) = space.coords() {
        let dim = coords.first().map_or(0, Vec::len);
        let (mut lo, mut hi) = (vec![f64::INFINITY; dim], vec![f64::NEG_INFINITY; dim]);
        for c in coords {
            for k in 0..dim {
                lo[k] = lo[k].min(c[k]);
                hi[k] = hi[k].max(c[k]);
            }
        }
        let (a, b): (Vec<f64>, Vec<f64>) = lo
            .iter()
            .zip(&hi)
            .map(|(&l, &h)| {
                let (mid, quarter) = ((l + h) / 2.0, (h - l) / 4.0);
                (mid - quarter, mid + quarter)
            })
            .unzip();
        sets.push(TestSet::open_box(space, "center", &a, &b)?);
    }
    Ok(sets)
}

fn run_mollify(o: &Options) -> Result<Outcome, CliError> {
    let input = load_input(o)?;
    let (s, w) = (&input.space, &input.weight);
    let t_grid = o
        .t_grid
        .as_ref()
        .map_or_else(|| default_t_grid(s), |l| l.0.clone());
    let eps_grid = o
        .eps_grid
        .as_ref()
        .map_or_else(|| DEFAULT_GEHRING_GRID.to_vec(), |l| l.0.clone());
    let nu_total = input.summary.nu_total;
    let mut scales = Vec::with_capacity(t_grid.len());
    let mut omega = String::from("point\tomega");
    for t in &t_grid {
        let _ = write!(omega, "\tt={}", num(*t));
    }
    omega.push('\n');
    let mut columns = Vec::with_capacity(t_grid.len());
    for &t in &t_grid {
        let m = mollify(s, w, t)?;
        let partition_error = m
            .partition
            .sums(s.len())
            .iter()
            .map(|x| (x - 1.0).abs())
            .fold(0.0, f64::max);
        let nu_t_total: f64 = m
            .omega_t
            .values()
            .iter()
            .zip(s.mu())
            .map(|(a, b)| a * b)
            .sum();
        let gehring = gehring_probe(s, &m, &eps_grid)?;
        columns.push(m.omega_t.values().to_vec());
        scales.push(MollifyScale {
            t,
            net_size: m.net.centers.len(),
            overlap: m.net.overlap,
            partition_error,
            partition_lower: m.partition_lower,
            nu_t_total,
            total_error: (nu_t_total - nu_total).abs() / nu_total.max(f64::MIN_POSITIVE),
            sandwich: m.sandwich,
            local_constant: m.local_constant,
            comparability: m.comparability,
            gehring,
        });
    }
    for i in 0..s.len() {
        let _ = write!(omega, "{i}\t{}", num(w[i]));
        for c in &columns {
            let _ = write!(omega, "\t{}", num(c[i]));
        }
        omega.push('\n');
    }
    let sets = test_sets(s)?;
    let weak = weak_convergence_probe(s, w, &t_grid, &sets)?;
    let mut weak_tsv = String::from("t\tset\trelative_error\n");
    for r in &weak.rows {
        let _ = writeln!(
            weak_tsv,
            "{}\t{}\t{}",
            num(r.t),
            r.set,
            num(r.relative_error)
        );
    }
    let rhi = uniform_rhi_probe(s, w, &t_grid)?;
    let result = MollifyResult {
        space: input.summary,
        scales,
        weak,
        rhi,
    };
    Ok(Outcome {
        report: render(CommandName::Mollify, o, result),
        tables: vec![("omega".into(), omega), ("weak".into(), weak_tsv)],
        finding: false,
    })
}

#[derive(Serialize)]
struct ModulusRun {
    space: SpaceSummary,
    x0: usize,
    r: f64,
    ball_modulus: BallModulus,
    /// `p`-modulus of the same family for each grid `p > 1`.
    higher: Vec<ModulusResult>,
}

/// Point nearest the coordinate centroid, or point 0 without coordinates.
fn central_point(space: &Space) -> usize {
    let Some(coords) = space.coords() else {
        return 0;
    };
    let dim = coords.first().map_or(0, Vec::len);
    let n = coords.len() as f64;
    let centroid: Vec<f64> = (0..dim)
        .map(|k| coords.iter().map(|c| c[k]).sum::<f64>() / n)
        .collect();
    let d2 = |c: &[f64]| {
        c.iter()
            .zip(&centroid)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
    };
    (0..coords.len())
        .min_by(|&a, &b| d2(&coords[a]).total_cmp(&d2(&coords[b])).then(a.cmp(&b)))
        .unwrap_or(0)
}

fn run_modulus(o: &Options) -> Result<Outcome, CliError> {
    check_tol(o)?;
    let input = load_input(o)?;
    let s = &input.space;
    let x0 = o.x0.unwrap_or_else(|| central_point(s));
    let r = o.r.unwrap_or(s.diameter() / 8.0);
    if !(r > 0.0 && r.is_finite()) {
        return Err(config_err(format!(
            "--r must be positive and finite, got {r}"
        )));
    }
    let ps = p_grid(o, &[1.0])?;
    let ball_modulus = ball_modulus_check(s, x0, r, o.tol)?;
    let family = CurveFamily::new(
        s,
        (0..s.len()).filter(|&v| s.dist(x0, v) <= r).collect(),
        (0..s.len()).filter(|&v| s.dist(x0, v) > 2.0 * r).collect(),
    )?;
    let mut higher = Vec::new();
    for &p in ps.iter().filter(|&&p| p > 1.0) {
        higher.push(p_modulus(s, &family, p, o.tol)?);
    }
    let mut rho = String::from("point\trho_1");
    for m in &higher {
        let _ = write!(rho, "\trho_{}", num(m.p));
    }
    rho.push('\n');
    for v in 0..s.len() {
        let _ = write!(rho, "{v}\t{}", num(ball_modulus.modulus.rho[v]));
        for m in &higher {
            let _ = write!(rho, "\t{}", num(m.rho[v]));
        }
        rho.push('\n');
    }
    let result = ModulusRun {
        space: input.summary,
        x0,
        r,
        ball_modulus,
        higher,
    };
    Ok(Outcome {
        report: render(CommandName::Modulus, o, result),
        tables: vec![("rho".into(), rho)],
        finding: false,
    })
}

#[derive(Serialize)]
struct ExampleFile {
    name: ExampleName,
    path: PathBuf,
    points: usize,
}

/// Writes space files. With `--example` and no `--out` the space document
/// itself is the output; otherwise a manifest of written files is.
fn run_examples(o: &Options) -> Result<Outcome, CliError> {
    use clap::ValueEnum;
    if o.input.is_some() {
        return Err(config_err("examples takes --example, not --input"));
    }
    if let (Some(name), None) = (o.example, &o.out) {
        let (s, w) = build(name, o.n, o.seed)?;
        return Ok(Outcome {
            report: space_to_string(&s, Some(&w)),
            tables: vec![],
            finding: false,
        });
    }
    let out = o
        .out
        .as_ref()
        .ok_or_else(|| config_err("examples needs --out DIR without --example"))?;
    let mut files = Vec::new();
    match o.example {
        Some(name) => {
            let (s, w) = build(name, o.n, o.seed)?;
            write_atomic(out, space_to_string(&s, Some(&w)).as_bytes())?;
            files.push(ExampleFile {
                name,
                path: out.clone(),
                points: s.len(),
            });
        }
        None => {
            std::fs::create_dir_all(out).map_err(|source| CorpusError::Io {
                path: out.display().to_string(),
                source,
            })?;
            for &name in ExampleName::value_variants() {
                let (s, w) = build(name, o.n, o.seed)?;
                let path = out.join(format!("{name}.json"));
                write_atomic(&path, space_to_string(&s, Some(&w)).as_bytes())?;
                files.push(ExampleFile {
                    name,
                    path,
                    points: s.len(),
                });
            }
        }
    }
    Ok(Outcome {
        report: render(CommandName::Examples, o, files),
        tables: vec![],
        finding: false,
    })
}

#[derive(Serialize)]
struct ConstantCheck {
    name: String,
    values: Vec<Bound>,
    /// Largest over smallest value across scales; absent when some value
    /// is unbounded or missing.
    spread: Option<f64>,
    passed: bool,
}

#[derive(Serialize)]
struct SuiteResult {
    family: Family,
    scales: Vec<usize>,
    stability: Stability,
    a1: Vec<Extremum>,
    checks: Vec<ConstantCheck>,
    passed: bool,
}

fn constant_check(name: String, values: Vec<Bound>) -> ConstantCheck {
    let finite: Vec<f64> = values.iter().filter_map(|b| b.finite()).collect();
    let spread = (finite.len() == values.len() && !finite.is_empty()).then(|| {
        let max = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = finite.iter().copied().fold(f64::INFINITY, f64::min);
        max / min
    });
    ConstantCheck {
        name,
        passed: spread.is_some_and(|s| s <= STABILITY_FACTOR),
        values,
        spread,
    }
}

/// Families whose weight is expected in `A_1`, so its constant is gated too.
fn expects_a1(f: Family) -> bool {
    matches!(f, Family::Constant | Family::A1Power)
}

fn run_suite(o: &Options) -> Result<Outcome, CliError> {
    if o.input.is_some() || o.example.is_some() || o.n.is_some() {
        return Err(config_err(
            "suite takes --family and --scales, not --input/--example/--n",
        ));
    }
    let family = o.family.ok_or_else(|| config_err("suite needs --family"))?;
    let scales = o
        .scales
        .as_ref()
        .map_or_else(|| default_scales(family), |l| l.0.clone());
    let ps = p_grid(o, &[4.0])?;
    let members = scales
        .iter()
        .map(|&n| family_member(family, n))
        .collect::<Result<Vec<_>, _>>()?;
    let stability = sa_verdict(&members, &ps, o.restricted_chains)?;
    let a1 = members
        .iter()
        .map(|(s, w)| a1_constant(s, w))
        .collect::<Result<Vec<_>, _>>()?;
    let mut checks = vec![ConstantCheck {
        name: "distortion".into(),
        values: stability.scales.iter().map(|e| e.distortion).collect(),
        spread: stability.max_step_ratio,
        passed: stability.verdict == SaVerdict::Stable,
    }];
    if expects_a1(family) {
        checks.push(constant_check(
            "A_1".into(),
            a1.iter().map(|e| e.value).collect(),
        ));
    }
    for (k, &p) in ps.iter().enumerate().filter(|(_, &p)| p > 1.0) {
        // A_p points skip p = 1, so the index shifts by the p = 1 entries before k
        let pos = ps[..k].iter().filter(|&&q| q > 1.0).count();
        let values = stability
            .scales
            .iter()
            .map(|e| {
                e.ap_curve
                    .points
                    .get(pos)
                    .map_or(Bound::Unbounded, |c| c.value)
            })
            .collect();
        checks.push(constant_check(format!("A_p(p={p})"), values));
    }
    let passed = checks.iter().all(|c| c.passed);
    let mut tsv = String::from("n\tdistortion");
    for c in &checks[1..] {
        let _ = write!(tsv, "\t{}", c.name);
    }
    tsv.push('\n');
    for (k, e) in stability.scales.iter().enumerate() {
        let _ = write!(tsv, "{}\t{}", e.n, bound_num(e.distortion));
        for c in &checks[1..] {
            let _ = write!(tsv, "\t{}", bound_num(c.values[k]));
        }
        tsv.push('\n');
    }
    let result = SuiteResult {
        family,
        scales,
        stability,
        a1,
        checks,
        passed,
    };
    Ok(Outcome {
        report: render(CommandName::Suite, o, result),
        tables: vec![("scales".into(), tsv)],
        finding: !passed,
    })
}
