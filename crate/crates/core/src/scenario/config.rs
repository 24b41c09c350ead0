//! Scenario files.
//!
//! A scenario is a JSON object:
//!
//! ```json
//! {
//!   "scenario": "cournot",
//!   "graph": { "kind": "path", "n": 5 },
//!   "params": { "price": 12, "noise_var": 1 },
//!   "horizon": 10,
//!   "seed": 1,
//!   "output_dir": "out/cournot-line"
//! }
//! ```
//!
//! Parsing walks the whole document and reports every problem it finds,
//! each tagged with the path of the offending field.

use std::fmt;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use serde_json::{Map, Value};
use thiserror::Error;

use crate::coefficients::SolveMethod;
use crate::game::{coordination_spec, cournot_spec, GameSpec, VectorGameSpec};
use crate::graph::NetworkGraph;
use crate::oracle::BatchCheck;

/// Largest network a scenario may describe.
pub const MAX_AGENTS: usize = 500;
/// Largest state dimension a scenario may describe.
pub const MAX_STATE_DIM: usize = 16;
/// Longest horizon a scenario may request.
pub const MAX_HORIZON: usize = 1000;
/// Output directory used when the scenario names none.
pub const DEFAULT_OUTPUT_DIR: &str = "out";

/// One validation failure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    /// Dotted path such as `params.beta[2][2]`; empty for the document root.
    pub path: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid JSON at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{}", render(.0))]
    Invalid(Vec<FieldError>),
}

fn render(errors: &[FieldError]) -> String {
    let mut out = format!("{} validation error(s)", errors.len());
    for e in errors {
        out.push_str("\n  ");
        out.push_str(&e.to_string());
    }
    out
}

impl ConfigError {
    /// Validation failures, empty for read and syntax errors.
    pub fn field_errors(&self) -> &[FieldError] {
        match self {
            ConfigError::Invalid(errors) => errors,
            _ => &[],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Cournot,
    Coordination,
    CustomScalar,
    CustomVector,
}

impl ScenarioKind {
    const NAMES: [(&'static str, ScenarioKind); 4] = [
        ("cournot", ScenarioKind::Cournot),
        ("coordination", ScenarioKind::Coordination),
        ("custom-scalar", ScenarioKind::CustomScalar),
        ("custom-vector", ScenarioKind::CustomVector),
    ];

    pub fn name(self) -> &'static str {
        Self::NAMES
            .iter()
            .find(|(_, k)| *k == self)
            .map(|(n, _)| *n)
            .unwrap_or("")
    }
}

/// The payoff side of a scenario.
#[derive(Debug, Clone)]
pub enum Game {
    Scalar(GameSpec),
    Vector(VectorGameSpec),
}

/// A fully validated scenario.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub game: Game,
    pub graph: NetworkGraph,
    pub horizon: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub batch_check: BatchCheck,
    pub solver: SolveMethod,
    pub write_coefficients: bool,
}

/// Reads and validates a scenario file.
pub fn parse_config(path: impl AsRef<Path>) -> Result<ScenarioConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_str(&text)
}

/// Validates a scenario given as JSON text.
pub fn parse_config_str(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| ConfigError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let mut ck = Checker::default();
    let Some(root) = doc.as_object() else {
        ck.fail("", "a scenario must be a JSON object");
        return Err(ConfigError::Invalid(ck.errors));
    };
    ck.keys(
        root,
        "",
        &[
            "scenario",
            "graph",
            "params",
            "horizon",
            "seed",
            "output_dir",
            "batch_check",
            "solver",
            "write_coefficients",
        ],
    );

    let kind = ck.required(root, "", "scenario").and_then(|v| {
        let name = ck.string(v, "scenario")?;
        let found = ScenarioKind::NAMES.iter().find(|(n, _)| *n == name).map(|(_, k)| *k);
        if found.is_none() {
            ck.fail(
                "scenario",
                format!("unknown scenario {name:?}, expected one of {}", kind_list()),
            );
        }
        found
    });
    let graph = ck.required(root, "", "graph").and_then(|v| parse_graph(&mut ck, v));
    let n = graph.as_ref().map(NetworkGraph::n_agents);
    let game = match (kind, ck.required(root, "", "params")) {
        (Some(kind), Some(params)) => parse_params(&mut ck, kind, params, n),
        _ => None,
    };

    let horizon = root.get("horizon").and_then(|v| {
        let h = ck.uint(v, "horizon")?;
        if h > MAX_HORIZON as u64 {
            ck.fail("horizon", format!("must be at most {MAX_HORIZON}, got {h}"));
            return None;
        }
        Some(h as usize)
    });
    let seed = root.get("seed").map_or(Some(0), |v| ck.uint(v, "seed"));
    let output_dir = root
        .get("output_dir")
        .map_or(Some(DEFAULT_OUTPUT_DIR.to_string()), |v| {
            let s = ck.string(v, "output_dir")?;
            if s.is_empty() {
                ck.fail("output_dir", "must not be empty");
                return None;
            }
            Some(s.to_string())
        });
    let batch_check = root.get("batch_check").map_or(Some(BatchCheck::All), |v| {
        let s = ck.string(v, "batch_check")?;
        let parsed = match s {
            "all" => Some(BatchCheck::All),
            "final" => Some(BatchCheck::Final),
            "skip" => Some(BatchCheck::Skip),
            _ => None,
        };
        if parsed.is_none() {
            ck.fail(
                "batch_check",
                format!("expected \"all\", \"final\" or \"skip\", got {s:?}"),
            );
        }
        parsed
    });
    let solver = root.get("solver").map_or(Some(SolveMethod::Auto), |v| {
        let s = ck.string(v, "solver")?;
        let parsed = match s {
            "auto" => Some(SolveMethod::Auto),
            "dense" => Some(SolveMethod::Dense),
            "structured" => Some(SolveMethod::Structured),
            _ => None,
        };
        if parsed.is_none() {
            ck.fail(
                "solver",
                format!("expected \"auto\", \"dense\" or \"structured\", got {s:?}"),
            );
        }
        parsed
    });
    let write_coefficients = root
        .get("write_coefficients")
        .map_or(Some(false), |v| ck.boolean(v, "write_coefficients"));

    if !ck.errors.is_empty() {
        return Err(ConfigError::Invalid(ck.errors));
    }
    match (
        kind,
        game,
        graph,
        seed,
        output_dir,
        batch_check,
        solver,
        write_coefficients,
    ) {
        (Some(kind), Some(game), Some(graph), Some(seed), Some(dir), Some(batch_check), Some(solver), Some(coeffs)) => {
            let horizon = horizon.unwrap_or(2 * graph.diameter() + 2);
            Ok(ScenarioConfig {
                kind,
                game,
                graph,
                horizon,
                seed,
                output_dir: PathBuf::from(dir),
                batch_check,
                solver,
                write_coefficients: coeffs,
            })
        }
        _ => Err(ConfigError::Invalid(vec![FieldError {
            path: String::new(),
            message: "incomplete scenario".into(),
        }])),
    }
}

fn kind_list() -> String {
    ScenarioKind::NAMES
        .iter()
        .map(|(n, _)| format!("{n:?}"))
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Default)]
struct Checker {
    errors: Vec<FieldError>,
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

impl Checker {
    fn fail(&mut self, path: &str, message: impl Into<String>) {
        self.errors.push(FieldError {
            path: path.to_string(),
            message: message.into(),
        });
    }

    fn keys(&mut self, map: &Map<String, Value>, path: &str, allowed: &[&str]) {
        for key in map.keys() {
            if !allowed.contains(&key.as_str()) {
                self.fail(&join(path, key), "unknown key");
            }
        }
    }

    fn required<'a>(&mut self, map: &'a Map<String, Value>, path: &str, key: &str) -> Option<&'a Value> {
        let v = map.get(key);
        if v.is_none() {
            self.fail(&join(path, key), "missing");
        }
        v
    }

    fn object<'a>(&mut self, v: &'a Value, path: &str) -> Option<&'a Map<String, Value>> {
        let o = v.as_object();
        if o.is_none() {
            self.fail(path, format!("expected an object, got {}", type_name(v)));
        }
        o
    }

    fn string<'a>(&mut self, v: &'a Value, path: &str) -> Option<&'a str> {
        let s = v.as_str();
        if s.is_none() {
            self.fail(path, format!("expected a string, got {}", type_name(v)));
        }
        s
    }

    fn boolean(&mut self, v: &Value, path: &str) -> Option<bool> {
        let b = v.as_bool();
        if b.is_none() {
            self.fail(path, format!("expected true or false, got {}", type_name(v)));
        }
        b
    }

    fn uint(&mut self, v: &Value, path: &str) -> Option<u64> {
        let u = v.as_u64();
        if u.is_none() {
            self.fail(path, format!("expected a nonnegative integer, got {}", describe(v)));
        }
        u
    }

    fn number(&mut self, v: &Value, path: &str) -> Option<f64> {
        match v.as_f64() {
            Some(x) if x.is_finite() => Some(x),
            _ => {
                self.fail(path, format!("expected a finite number, got {}", describe(v)));
                None
            }
        }
    }

    fn positive(&mut self, v: &Value, path: &str) -> Option<f64> {
        let x = self.number(v, path)?;
        if x <= 0.0 {
            self.fail(path, format!("must be positive, got {x}"));
            return None;
        }
        Some(x)
    }

    fn array<'a>(&mut self, v: &'a Value, path: &str, len: Option<usize>) -> Option<&'a Vec<Value>> {
        let Some(items) = v.as_array() else {
            self.fail(path, format!("expected an array, got {}", type_name(v)));
            return None;
        };
        if let Some(len) = len {
            if items.len() != len {
                self.fail(path, format!("expected {len} entries, got {}", items.len()));
                return None;
            }
        }
        Some(items)
    }

    /// Numbers of an array, each checked by `each`. `None` when any fails.
    fn numbers(
        &mut self,
        v: &Value,
        path: &str,
        len: Option<usize>,
        each: fn(&mut Self, &Value, &str) -> Option<f64>,
    ) -> Option<Vec<f64>> {
        let items = self.array(v, path, len)?;
        let parsed: Vec<Option<f64>> = items
            .iter()
            .enumerate()
            .map(|(k, item)| each(self, item, &format!("{path}[{k}]")))
            .collect();
        parsed.into_iter().collect()
    }

    /// Row-major `rows × cols` matrix from nested arrays.
    fn matrix(&mut self, v: &Value, path: &str, rows: Option<usize>, cols: Option<usize>) -> Option<DMatrix<f64>> {
        let items = self.array(v, path, rows)?;
        let rows_parsed: Vec<Option<Vec<f64>>> = items
            .iter()
            .enumerate()
            .map(|(r, row)| self.numbers(row, &format!("{path}[{r}]"), cols, Self::number))
            .collect();
        let rows_parsed: Vec<Vec<f64>> = rows_parsed.into_iter().collect::<Option<_>>()?;
        let width = rows_parsed.first().map_or(0, Vec::len);
        if let Some((r, row)) = rows_parsed.iter().enumerate().find(|(_, row)| row.len() != width) {
            self.fail(
                &format!("{path}[{r}]"),
                format!("expected {width} entries, got {}", row.len()),
            );
            return None;
        }
        Some(DMatrix::from_fn(rows_parsed.len(), width, |r, c| rows_parsed[r][c]))
    }

    fn agent_count(&mut self, v: &Value, path: &str) -> Option<usize> {
        let n = self.uint(v, path)?;
        if n < 2 || n > MAX_AGENTS as u64 {
            self.fail(path, format!("must lie in 2..={MAX_AGENTS}, got {n}"));
            return None;
        }
        Some(n as usize)
    }
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Array(_) => "an array",
        Value::Object(_) => "an object",
    }
}

fn describe(v: &Value) -> String {
    match v {
        Value::Number(x) => x.to_string(),
        other => type_name(other).to_string(),
    }
}

fn parse_graph(ck: &mut Checker, v: &Value) -> Option<NetworkGraph> {
    let o = ck.object(v, "graph")?;
    let kind = ck
        .required(o, "graph", "kind")
        .and_then(|k| ck.string(k, "graph.kind"))?;
    let allowed: &[&str] = match kind {
        "path" | "ring" | "complete" => &["kind", "n"],
        "star" => &["kind", "n", "center"],
        "geometric" => &["kind", "n", "side", "radius", "seed"],
        "erdos-renyi" => &["kind", "n", "p", "seed"],
        "edges" => &["kind", "n", "edges"],
        other => {
            ck.fail(
                "graph.kind",
                format!(
                    "unknown graph kind {other:?}, expected \"path\", \"star\", \"ring\", \"complete\", \"geometric\", \"erdos-renyi\" or \"edges\""
                ),
            );
            return None;
        }
    };
    ck.keys(o, "graph", allowed);
    let n = ck.required(o, "graph", "n").and_then(|n| ck.agent_count(n, "graph.n"));
    let seed = |ck: &mut Checker| o.get("seed").map_or(Some(0), |s| ck.uint(s, "graph.seed"));
    let built = match kind {
        "path" => NetworkGraph::path(n?),
        "ring" => NetworkGraph::ring(n?),
        "complete" => NetworkGraph::complete(n?),
        "star" => {
            let center = o.get("center").map_or(Some(0), |c| ck.uint(c, "graph.center"));
            NetworkGraph::star(n?, center? as usize)
        }
        "geometric" => {
            let side = ck
                .required(o, "graph", "side")
                .and_then(|s| ck.positive(s, "graph.side"));
            let radius = ck
                .required(o, "graph", "radius")
                .and_then(|r| ck.positive(r, "graph.radius"));
            let seed = seed(ck);
            NetworkGraph::geometric(n?, side?, radius?, seed?)
        }
        "erdos-renyi" => {
            let p = ck.required(o, "graph", "p").and_then(|p| {
                let p_val = ck.number(p, "graph.p")?;
                if !(p_val > 0.0 && p_val <= 1.0) {
                    ck.fail("graph.p", format!("must lie in (0, 1], got {p_val}"));
                    return None;
                }
                Some(p_val)
            });
            let seed = seed(ck);
            NetworkGraph::erdos_renyi(n?, p?, seed?)
        }
        _ => {
            let edges = ck.required(o, "graph", "edges").and_then(|e| parse_edges(ck, e));
            NetworkGraph::from_edges(n?, &edges?)
        }
    };
    match built {
        Ok(g) => Some(g),
        Err(e) => {
            ck.fail("graph", e.to_string());
            None
        }
    }
}

fn parse_edges(ck: &mut Checker, v: &Value) -> Option<Vec<(usize, usize)>> {
    let items = ck.array(v, "graph.edges", None)?;
    let mut ok = true;
    let mut edges = Vec::with_capacity(items.len());
    for (k, item) in items.iter().enumerate() {
        let path = format!("graph.edges[{k}]");
        let pair = ck.array(item, &path, Some(2)).and_then(|p| {
            Some((
                ck.uint(&p[0], &format!("{path}[0]"))?,
                ck.uint(&p[1], &format!("{path}[1]"))?,
            ))
        });
        match pair {
            Some((a, b)) => edges.push((a.min(usize::MAX as u64) as usize, b.min(usize::MAX as u64) as usize)),
            None => ok = false,
        }
    }
    ok.then_some(edges)
}

/// Noise variances given as one number for everyone or one per agent.
fn per_agent_variances(ck: &mut Checker, v: &Value, path: &str, n: Option<usize>) -> Option<Vec<f64>> {
    if v.is_array() {
        ck.numbers(v, path, n, Checker::positive)
    } else {
        let c = ck.positive(v, path)?;
        n.map(|n| vec![c; n])
    }
}

fn parse_params(ck: &mut Checker, kind: ScenarioKind, v: &Value, n: Option<usize>) -> Option<Game> {
    let o = ck.object(v, "params")?;
    let before = ck.errors.len();
    let game = match kind {
        ScenarioKind::Cournot => {
            ck.keys(o, "params", &["price", "unit_cost", "noise_var"]);
            let price = ck
                .required(o, "params", "price")
                .and_then(|p| ck.number(p, "params.price"));
            let cost = o
                .get("unit_cost")
                .map_or(Some(0.0), |c| ck.number(c, "params.unit_cost"));
            let noise = ck
                .required(o, "params", "noise_var")
                .and_then(|c| per_agent_variances(ck, c, "params.noise_var", n));
            if let (Some(p), Some(c)) = (price, cost) {
                if p <= c {
                    ck.fail("params.price", format!("must exceed unit_cost {c}, got {p}"));
                }
            }
            finish(
                ck,
                before,
                n.is_some(),
                || cournot_spec(price?, cost?, noise?, n?).ok().map(Game::Scalar),
                "params",
            )
        }
        ScenarioKind::CustomScalar => {
            ck.keys(o, "params", &["beta", "delta", "theta", "noise_var"]);
            let beta = ck
                .required(o, "params", "beta")
                .and_then(|b| ck.matrix(b, "params.beta", n, n));
            if let Some(b) = &beta {
                if b.nrows() != b.ncols() {
                    ck.fail(
                        "params.beta",
                        format!("must be square, got {}x{}", b.nrows(), b.ncols()),
                    );
                }
                for i in 0..b.nrows().min(b.ncols()) {
                    if b[(i, i)] != 0.0 {
                        ck.fail(
                            &format!("params.beta[{i}][{i}]"),
                            format!("self-coupling must be 0, got {}", b[(i, i)]),
                        );
                    }
                }
            }
            let delta = ck
                .required(o, "params", "delta")
                .and_then(|d| ck.number(d, "params.delta"));
            let theta = ck
                .required(o, "params", "theta")
                .and_then(|t| ck.number(t, "params.theta"));
            let noise = ck
                .required(o, "params", "noise_var")
                .and_then(|c| per_agent_variances(ck, c, "params.noise_var", n));
            finish(
                ck,
                before,
                n.is_some(),
                || {
                    GameSpec::new(beta?, delta?, DVector::from_vec(noise?), theta?)
                        .ok()
                        .map(Game::Scalar)
                },
                "params",
            )
        }
        ScenarioKind::Coordination => {
            ck.keys(o, "params", &["lambda", "theta", "noise_var"]);
            let lambda = ck.required(o, "params", "lambda").and_then(|l| {
                let x = ck.number(l, "params.lambda")?;
                if !(x > 0.0 && x < 1.0) {
                    ck.fail("params.lambda", format!("must lie in (0, 1), got {x}"));
                    return None;
                }
                Some(x)
            });
            let theta = ck.required(o, "params", "theta").and_then(|t| {
                let theta = ck.numbers(t, "params.theta", None, Checker::number)?;
                if theta.is_empty() || theta.len() > MAX_STATE_DIM {
                    ck.fail(
                        "params.theta",
                        format!("needs 1..={MAX_STATE_DIM} components, got {}", theta.len()),
                    );
                    return None;
                }
                Some(theta)
            });
            let m = theta.as_ref().map(Vec::len);
            let noise = ck
                .required(o, "params", "noise_var")
                .and_then(|c| diagonal_noise(ck, c, "params.noise_var", n, m));
            finish(
                ck,
                before,
                n.is_some(),
                || {
                    coordination_spec(lambda?, noise?, n?, DVector::from_vec(theta?))
                        .ok()
                        .map(Game::Vector)
                },
                "params",
            )
        }
        ScenarioKind::CustomVector => {
            ck.keys(o, "params", &["coupling", "state_weight", "theta", "noise_cov"]);
            let theta = ck.required(o, "params", "theta").and_then(|t| {
                let theta = ck.numbers(t, "params.theta", None, Checker::number)?;
                if theta.is_empty() || theta.len() > MAX_STATE_DIM {
                    ck.fail(
                        "params.theta",
                        format!("needs 1..={MAX_STATE_DIM} components, got {}", theta.len()),
                    );
                    return None;
                }
                Some(theta)
            });
            let m = theta.as_ref().map(Vec::len);
            let weight = ck
                .required(o, "params", "state_weight")
                .and_then(|w| ck.matrix(w, "params.state_weight", m, m));
            let coupling = ck.required(o, "params", "coupling").and_then(|c| {
                let rows = ck.array(c, "params.coupling", n)?;
                let mut grid = Vec::with_capacity(rows.len());
                let mut ok = true;
                for (i, row) in rows.iter().enumerate() {
                    let path = format!("params.coupling[{i}]");
                    let Some(blocks) = ck.array(row, &path, n.or(Some(rows.len()))) else {
                        ok = false;
                        continue;
                    };
                    let mut parsed = Vec::with_capacity(blocks.len());
                    for (j, block) in blocks.iter().enumerate() {
                        let bpath = format!("{path}[{j}]");
                        match ck.matrix(block, &bpath, m, m) {
                            Some(b) if i == j && b.iter().any(|x| *x != 0.0) => {
                                ck.fail(&bpath, "self-coupling block must be zero");
                                ok = false;
                            }
                            Some(b) => parsed.push(b),
                            None => ok = false,
                        }
                    }
                    grid.push(parsed);
                }
                ok.then_some(grid)
            });
            let noise = ck.required(o, "params", "noise_cov").and_then(|c| {
                let items = ck.array(c, "params.noise_cov", n)?;
                let mut ok = true;
                let mut out = Vec::with_capacity(items.len());
                for (i, item) in items.iter().enumerate() {
                    let path = format!("params.noise_cov[{i}]");
                    match ck.matrix(item, &path, m, m) {
                        Some(cov) => {
                            if let Some(msg) = diagonal_pd_problem(&cov) {
                                ck.fail(&path, msg);
                                ok = false;
                            }
                            out.push(cov);
                        }
                        None => ok = false,
                    }
                }
                ok.then_some(out)
            });
            finish(
                ck,
                before,
                n.is_some(),
                || {
                    VectorGameSpec::new(coupling?, weight?, noise?, DVector::from_vec(theta?))
                        .ok()
                        .map(Game::Vector)
                },
                "params",
            )
        }
    };
    game
}

/// Runs `build` only if no error was recorded since `before`; a builder
/// rejection that slipped past the field checks is reported at `path`.
/// `sized` is false when the network failed, so the agent count is unknown.
fn finish(
    ck: &mut Checker,
    before: usize,
    sized: bool,
    build: impl FnOnce() -> Option<Game>,
    path: &str,
) -> Option<Game> {
    if ck.errors.len() > before || !sized {
        return None;
    }
    let game = build();
    if game.is_none() {
        ck.fail(path, "inconsistent payoff parameters");
    }
    game
}

fn diagonal_pd_problem(cov: &DMatrix<f64>) -> Option<String> {
    for r in 0..cov.nrows() {
        for c in 0..cov.ncols() {
            if r != c && cov[(r, c)] != 0.0 {
                return Some(format!("must be diagonal, entry [{r}][{c}] is {}", cov[(r, c)]));
            }
        }
        if cov[(r, r)] <= 0.0 {
            return Some(format!(
                "diagonal entry [{r}][{r}] must be positive, got {}",
                cov[(r, r)]
            ));
        }
    }
    None
}

/// Diagonal noise covariances: one number for every agent and component,
/// one list of `m` variances shared by all agents, or `N` such lists.
fn diagonal_noise(
    ck: &mut Checker,
    v: &Value,
    path: &str,
    n: Option<usize>,
    m: Option<usize>,
) -> Option<Vec<DMatrix<f64>>> {
    let diag = |d: &[f64]| DMatrix::from_diagonal(&DVector::from_row_slice(d));
    match v {
        Value::Array(items) if items.first().is_some_and(Value::is_array) => {
            let items = ck.array(v, path, n)?;
            let per_agent: Vec<Option<Vec<f64>>> = items
                .iter()
                .enumerate()
                .map(|(i, item)| ck.numbers(item, &format!("{path}[{i}]"), m, Checker::positive))
                .collect();
            let per_agent: Vec<Vec<f64>> = per_agent.into_iter().collect::<Option<_>>()?;
            Some(per_agent.iter().map(|d| diag(d)).collect())
        }
        Value::Array(_) => {
            let shared = ck.numbers(v, path, m, Checker::positive)?;
            Some(vec![diag(&shared); n?])
        }
        _ => {
            let c = ck.positive(v, path)?;
            Some(vec![diag(&vec![c; m?]); n?])
        }
    }
}
