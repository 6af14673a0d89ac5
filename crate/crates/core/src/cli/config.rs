//! Run configuration: a TOML document with `[operator]`, `[frac]`, `[mesh]`,
//! `[solver]` and `[run]` sections. Every schema error names the offending
//! field path, e.g. `frac.s`.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DMatrix;
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::extension::{Method, SolverConfig};
use crate::hilbert::HVector;
use crate::mesh::{graded_zmesh, FarBc, FracParams, ZMesh};
use crate::monops::{
    make_box, make_linear_spd, make_plap_grid, make_power_prox, make_scalar, FluxKind, GridSpec,
    LateralBc, LerayLionsField, SharedOp,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LateralSpec {
    Dirichlet,
    Neumann,
    NeumannMeanZero,
    /// Constant Robin coefficient `b ≥ 0`.
    Robin(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum OperatorSpec {
    LinearSpd {
        matrix: DMatrix<f64>,
    },
    Scalar {
        dim: usize,
        a: f64,
    },
    Box {
        dim: usize,
        lo: f64,
        hi: f64,
    },
    PowerProx {
        dim: usize,
        c: f64,
        q: f64,
    },
    PlapGrid {
        p: f64,
        shape: Vec<usize>,
        spacing: f64,
        lateral: LateralSpec,
    },
    /// Weighted p-Laplacian with `c(x) = c0 + c1·Σx`.
    LerayLions {
        p: f64,
        shape: Vec<usize>,
        spacing: f64,
        lateral: LateralSpec,
        weight: (f64, f64),
    },
}

impl OperatorSpec {
    pub fn dim(&self) -> usize {
        match self {
            OperatorSpec::LinearSpd { matrix } => matrix.nrows(),
            OperatorSpec::Scalar { dim, .. }
            | OperatorSpec::Box { dim, .. }
            | OperatorSpec::PowerProx { dim, .. } => *dim,
            OperatorSpec::PlapGrid { shape, .. } | OperatorSpec::LerayLions { shape, .. } => {
                shape.iter().product()
            }
        }
    }

    pub fn build(&self) -> Result<SharedOp> {
        let ctx = |e: Error| Error::config("operator", e.to_string());
        Ok(match self {
            OperatorSpec::LinearSpd { matrix } => {
                Arc::new(make_linear_spd(matrix.clone()).map_err(ctx)?)
            }
            OperatorSpec::Scalar { dim, a } => Arc::new(make_scalar(*dim, *a).map_err(ctx)?),
            OperatorSpec::Box { dim, lo, hi } => Arc::new(make_box(*dim, *lo, *hi).map_err(ctx)?),
            OperatorSpec::PowerProx { dim, c, q } => {
                Arc::new(make_power_prox(*dim, *c, *q).map_err(ctx)?)
            }
            OperatorSpec::PlapGrid {
                p,
                shape,
                spacing,
                lateral,
            } => {
                let field = LerayLionsField::p_laplace(*p, lateral_bc(*lateral));
                Arc::new(make_plap_grid(field, grid(shape, *spacing)).map_err(ctx)?)
            }
            OperatorSpec::LerayLions {
                p,
                shape,
                spacing,
                lateral,
                weight,
            } => {
                let (c0, c1) = *weight;
                // grid coordinates are nonnegative, so c ≥ c0
                let field = LerayLionsField {
                    p: *p,
                    eta: c0,
                    flux: FluxKind::Weighted(Arc::new(move |x: &[f64]| {
                        c0 + c1 * x.iter().sum::<f64>()
                    })),
                    lateral_bc: lateral_bc(*lateral),
                };
                Arc::new(make_plap_grid(field, grid(shape, *spacing)).map_err(ctx)?)
            }
        })
    }

    /// Smallest positive spectral value, when it is known in closed form.
    pub fn lambda_min(&self) -> Option<f64> {
        match self {
            OperatorSpec::LinearSpd { matrix } => {
                let ev = matrix.clone().symmetric_eigen().eigenvalues;
                ev.iter().copied().filter(|&l| l > 1e-12).reduce(f64::min)
            }
            OperatorSpec::Scalar { a, .. } => Some(*a),
            _ => None,
        }
    }
}

fn lateral_bc(l: LateralSpec) -> LateralBc {
    match l {
        LateralSpec::Dirichlet => LateralBc::Dirichlet,
        LateralSpec::Neumann => LateralBc::Neumann,
        LateralSpec::NeumannMeanZero => LateralBc::NeumannMeanZero,
        LateralSpec::Robin(b) => LateralBc::Robin(Arc::new(move |_: &[f64]| b)),
    }
}

fn grid(shape: &[usize], spacing: f64) -> GridSpec {
    GridSpec {
        shape: shape.to_vec(),
        spacing,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Auto {
    Auto,
    Value(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshSpec {
    pub n_nodes: usize,
    pub z_max: Auto,
    pub grading: Auto,
    pub far_bc: FarBc,
    /// Spectral gap used by `z_max = "auto"` when the operator does not provide one.
    pub lambda_min: Option<f64>,
}

impl MeshSpec {
    pub fn build(&self, params: &FracParams, op: &OperatorSpec) -> Result<ZMesh> {
        self.build_with(params, op, self.n_nodes)
    }

    /// As [`build`](Self::build) with `n` cells instead of `n_nodes`.
    pub fn build_with(&self, params: &FracParams, op: &OperatorSpec, n: usize) -> Result<ZMesh> {
        let z = match self.z_max {
            Auto::Value(z) => z,
            Auto::Auto => {
                let lmin = self.lambda_min.or_else(|| op.lambda_min()).ok_or_else(|| {
                    Error::config(
                        "mesh.lambda_min",
                        "required by z_max = \"auto\" for this operator kind",
                    )
                })?;
                params
                    .auto_z(lmin)
                    .map_err(|e| Error::config("mesh.lambda_min", e.to_string()))?
            }
        };
        let g = match self.grading {
            Auto::Value(g) => g,
            Auto::Auto => params.default_grading(),
        };
        Ok(graded_zmesh(n, z, g)
            .map_err(|e| Error::config("mesh", e.to_string()))?
            .with_far_bc(self.far_bc))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    Dirichlet,
    Robin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub phi: Option<HVector>,
    pub boundary: BoundaryKind,
    pub lambda: f64,
    pub t_final: f64,
    pub m: usize,
    pub record_stride: Option<usize>,
    /// Random pairs per sampled property check.
    pub pairs: usize,
    /// Verification checks to run; empty means every check that applies.
    pub checks: Vec<String>,
    pub spectral_tol: f64,
    pub n_list: Vec<usize>,
    pub m_list: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub name: String,
    pub seed: u64,
    pub operator: OperatorSpec,
    pub s_values: Vec<f64>,
    pub mesh: MeshSpec,
    pub solver: SolverConfig,
    pub run: RunSpec,
    /// SHA-256 of the configuration text.
    pub hash: String,
}

pub const CHECKS: [&str; 8] = [
    "spectral",
    "bessel",
    "brute",
    "estimates",
    "contraction",
    "monotonicity",
    "robin",
    "complete_contraction",
];

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("--config", format!("{}: {e}", path.display())))?;
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("run")
            .to_string();
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")), &name)
    }

    /// Parses configuration text; relative CSV paths resolve against `base`.
    pub fn parse(text: &str, base: &Path, default_name: &str) -> Result<Self> {
        let doc: Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config("<document>", e.message().to_string()))?;
        let root = Section {
            table: &doc,
            path: String::new(),
            base,
        };
        root.allow(&["name", "seed", "operator", "frac", "mesh", "solver", "run"])?;

        let name = root
            .opt_str("name")?
            .unwrap_or_else(|| default_name.to_string());
        if name.is_empty() || name.contains(['/', '\\']) || name == "." || name == ".." {
            return Err(Error::config("name", "must be a plain directory name"));
        }
        let seed = root.opt_u64("seed")?.unwrap_or(0);
        let operator = parse_operator(&root.section("operator")?)?;
        let s_values = parse_frac(&root.section("frac")?)?;
        let mesh = parse_mesh(&root.opt_section("mesh")?)?;
        let solver = parse_solver(&root.opt_section("solver")?)?;
        let run = parse_run(&root.opt_section("run")?, operator.dim())?;

        let hash = Sha256::digest(text.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect();
        Ok(Self {
            name,
            seed,
            operator,
            s_values,
            mesh,
            solver,
            run,
            hash,
        })
    }

    pub fn phi(&self) -> Result<&HVector> {
        self.run
            .phi
            .as_ref()
            .ok_or_else(|| Error::config("run.phi", "missing"))
    }
}

struct Section<'a> {
    table: &'a Table,
    path: String,
    base: &'a Path,
}

static EMPTY: std::sync::LazyLock<Table> = std::sync::LazyLock::new(Table::new);

impl<'a> Section<'a> {
    fn key(&self, k: &str) -> String {
        if self.path.is_empty() {
            k.to_string()
        } else {
            format!("{}.{k}", self.path)
        }
    }

    fn allow(&self, keys: &[&str]) -> Result<()> {
        match self.table.keys().find(|k| !keys.contains(&k.as_str())) {
            Some(k) => Err(Error::config(&self.key(k), "unknown field")),
            None => Ok(()),
        }
    }

    fn section(&self, k: &str) -> Result<Section<'a>> {
        match self.table.get(k) {
            Some(Value::Table(t)) => Ok(Section {
                table: t,
                path: self.key(k),
                base: self.base,
            }),
            Some(_) => Err(Error::config(&self.key(k), "expected a table")),
            None => Err(Error::config(&self.key(k), "missing section")),
        }
    }

    fn opt_section(&self, k: &str) -> Result<Section<'a>> {
        match self.table.get(k) {
            None => Ok(Section {
                table: &EMPTY,
                path: self.key(k),
                base: self.base,
            }),
            Some(_) => self.section(k),
        }
    }

    fn opt_f64(&self, k: &str) -> Result<Option<f64>> {
        match self.table.get(k) {
            None => Ok(None),
            Some(v) => as_f64(v)
                .map(Some)
                .ok_or_else(|| Error::config(&self.key(k), "expected a number")),
        }
    }

    fn f64(&self, k: &str) -> Result<f64> {
        self.opt_f64(k)?
            .ok_or_else(|| Error::config(&self.key(k), "missing"))
    }

    fn opt_u64(&self, k: &str) -> Result<Option<u64>> {
        match self.table.get(k) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as u64)),
            Some(_) => Err(Error::config(
                &self.key(k),
                "expected a nonnegative integer",
            )),
        }
    }

    fn opt_usize(&self, k: &str) -> Result<Option<usize>> {
        Ok(self.opt_u64(k)?.map(|v| v as usize))
    }

    fn opt_str(&self, k: &str) -> Result<Option<String>> {
        match self.table.get(k) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(_) => Err(Error::config(&self.key(k), "expected a string")),
        }
    }

    fn opt_list<T>(
        &self,
        k: &str,
        item: impl Fn(&Value) -> Option<T>,
        what: &str,
    ) -> Result<Option<Vec<T>>> {
        match self.table.get(k) {
            None => Ok(None),
            Some(Value::Array(a)) => a
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    item(v).ok_or_else(|| {
                        Error::config(&format!("{}[{i}]", self.key(k)), format!("expected {what}"))
                    })
                })
                .collect::<Result<Vec<T>>>()
                .map(Some),
            Some(_) => Err(Error::config(&self.key(k), "expected an array")),
        }
    }

    fn opt_f64_list(&self, k: &str) -> Result<Option<Vec<f64>>> {
        self.opt_list(k, as_f64, "a number")
    }

    fn opt_usize_list(&self, k: &str) -> Result<Option<Vec<usize>>> {
        self.opt_list(
            k,
            |v| v.as_integer().filter(|i| *i > 0).map(|i| i as usize),
            "a positive integer",
        )
    }

    fn opt_auto(&self, k: &str) -> Result<Option<Auto>> {
        match self.table.get(k) {
            None => Ok(None),
            Some(Value::String(s)) if s == "auto" => Ok(Some(Auto::Auto)),
            Some(v) => as_f64(v)
                .map(|x| Some(Auto::Value(x)))
                .ok_or_else(|| Error::config(&self.key(k), "expected a number or \"auto\"")),
        }
    }

    fn path_of(&self, k: &str) -> Result<Option<PathBuf>> {
        Ok(self.opt_str(k)?.map(|p| self.base.join(p)))
    }
}

fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Float(f) => Some(*f),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn positive(sec: &Section, k: &str, x: f64) -> Result<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(Error::config(
            &sec.key(k),
            format!("must be positive, got {x}"),
        ))
    }
}

fn parse_lateral(sec: &Section) -> Result<LateralSpec> {
    let b = sec.opt_f64("robin_b")?;
    let kind = sec
        .opt_str("lateral_bc")?
        .unwrap_or_else(|| "dirichlet".into());
    let spec = match kind.as_str() {
        "dirichlet" => LateralSpec::Dirichlet,
        "neumann" => LateralSpec::Neumann,
        "neumann_mean_zero" => LateralSpec::NeumannMeanZero,
        "robin" => {
            let b = b.ok_or_else(|| {
                Error::config(&sec.key("robin_b"), "required by lateral_bc = \"robin\"")
            })?;
            if !(b >= 0.0) {
                return Err(Error::config(&sec.key("robin_b"), "must be nonnegative"));
            }
            LateralSpec::Robin(b)
        }
        other => {
            return Err(Error::config(
                &sec.key("lateral_bc"),
                format!("unknown condition `{other}`"),
            ))
        }
    };
    if b.is_some() && !matches!(spec, LateralSpec::Robin(_)) {
        return Err(Error::config(
            &sec.key("robin_b"),
            "only used with lateral_bc = \"robin\"",
        ));
    }
    Ok(spec)
}

fn parse_operator(sec: &Section) -> Result<OperatorSpec> {
    let kind = sec
        .opt_str("kind")?
        .ok_or_else(|| Error::config(&sec.key("kind"), "missing"))?;
    let dim = || -> Result<usize> {
        let d = sec.opt_usize("dim")?.unwrap_or(1);
        if d == 0 {
            return Err(Error::config(&sec.key("dim"), "must be at least 1"));
        }
        Ok(d)
    };
    let grid_fields = || -> Result<(f64, Vec<usize>, f64, LateralSpec)> {
        let p = sec.f64("p")?;
        if !(p > 1.0) {
            return Err(Error::config(
                &sec.key("p"),
                format!("must exceed 1, got {p}"),
            ));
        }
        let shape = sec
            .opt_usize_list("shape")?
            .ok_or_else(|| Error::config(&sec.key("shape"), "missing"))?;
        if shape.is_empty() || shape.len() > 2 {
            return Err(Error::config(
                &sec.key("shape"),
                "one or two extents expected",
            ));
        }
        let default_h = 1.0 / (shape[0] + 1) as f64;
        let spacing = positive(sec, "spacing", sec.opt_f64("spacing")?.unwrap_or(default_h))?;
        Ok((p, shape, spacing, parse_lateral(sec)?))
    };
    let spec = match kind.as_str() {
        "linear_spd" => {
            sec.allow(&["kind", "matrix", "matrix_csv"])?;
            let matrix = match (sec.table.get("matrix"), sec.path_of("matrix_csv")?) {
                (Some(_), Some(_)) => {
                    return Err(Error::config(
                        &sec.key("matrix"),
                        "give either matrix or matrix_csv",
                    ))
                }
                (Some(Value::Array(rows)), None) => inline_matrix(rows, &sec.key("matrix"))?,
                (Some(_), None) => {
                    return Err(Error::config(
                        &sec.key("matrix"),
                        "expected an array of rows",
                    ))
                }
                (None, Some(p)) => read_matrix_csv(&p)
                    .map_err(|e| Error::config(&sec.key("matrix_csv"), e.to_string()))?,
                (None, None) => return Err(Error::config(&sec.key("matrix_csv"), "missing")),
            };
            OperatorSpec::LinearSpd { matrix }
        }
        "scalar" => {
            sec.allow(&["kind", "dim", "a"])?;
            let a = sec.f64("a")?;
            if !(a >= 0.0) {
                return Err(Error::config(&sec.key("a"), "must be nonnegative"));
            }
            OperatorSpec::Scalar { dim: dim()?, a }
        }
        "box" => {
            sec.allow(&["kind", "dim", "lo", "hi"])?;
            let (lo, hi) = (sec.f64("lo")?, sec.f64("hi")?);
            if !(lo <= hi) {
                return Err(Error::config(&sec.key("hi"), "must be at least lo"));
            }
            OperatorSpec::Box {
                dim: dim()?,
                lo,
                hi,
            }
        }
        "power_prox" => {
            sec.allow(&["kind", "dim", "c", "q"])?;
            let c = positive(sec, "c", sec.f64("c")?)?;
            let q = sec.f64("q")?;
            if !(q >= 1.0) {
                return Err(Error::config(&sec.key("q"), "must be at least 1"));
            }
            OperatorSpec::PowerProx { dim: dim()?, c, q }
        }
        "plap_grid" => {
            sec.allow(&["kind", "p", "shape", "spacing", "lateral_bc", "robin_b"])?;
            let (p, shape, spacing, lateral) = grid_fields()?;
            OperatorSpec::PlapGrid {
                p,
                shape,
                spacing,
                lateral,
            }
        }
        "leray_lions" => {
            sec.allow(&[
                "kind",
                "p",
                "shape",
                "spacing",
                "lateral_bc",
                "robin_b",
                "weight",
            ])?;
            let (p, shape, spacing, lateral) = grid_fields()?;
            let w = sec
                .opt_f64_list("weight")?
                .unwrap_or_else(|| vec![1.0, 0.0]);
            if w.len() != 2 || !(w[0] > 0.0) || !(w[1] >= 0.0) {
                return Err(Error::config(
                    &sec.key("weight"),
                    "expected [c0, c1] with c0 > 0 and c1 ≥ 0",
                ));
            }
            OperatorSpec::LerayLions {
                p,
                shape,
                spacing,
                lateral,
                weight: (w[0], w[1]),
            }
        }
        other => {
            return Err(Error::config(
                &sec.key("kind"),
                format!("unknown operator kind `{other}`"),
            ))
        }
    };
    Ok(spec)
}

fn parse_frac(sec: &Section) -> Result<Vec<f64>> {
    sec.allow(&["s", "values"])?;
    let check = |k: String, s: f64| {
        if s > 0.0 && s < 1.0 {
            Ok(s)
        } else {
            Err(Error::config(&k, format!("must lie in (0, 1), got {s}")))
        }
    };
    match (sec.opt_f64("s")?, sec.opt_f64_list("values")?) {
        (Some(_), Some(_)) => Err(Error::config(&sec.key("values"), "give either s or values")),
        (Some(s), None) => Ok(vec![check(sec.key("s"), s)?]),
        (None, Some(v)) if !v.is_empty() => v
            .iter()
            .enumerate()
            .map(|(i, &s)| check(format!("{}[{i}]", sec.key("values")), s))
            .collect(),
        _ => Err(Error::config(&sec.key("s"), "missing")),
    }
}

fn parse_mesh(sec: &Section) -> Result<MeshSpec> {
    sec.allow(&["n_nodes", "z_max", "grading", "far_bc", "lambda_min"])?;
    let n_nodes = sec.opt_usize("n_nodes")?.unwrap_or(1024);
    if n_nodes < 8 {
        return Err(Error::config(
            &sec.key("n_nodes"),
            "at least 8 cells required",
        ));
    }
    let z_max = sec.opt_auto("z_max")?.unwrap_or(Auto::Auto);
    if let Auto::Value(z) = z_max {
        positive(sec, "z_max", z)?;
    }
    let grading = sec.opt_auto("grading")?.unwrap_or(Auto::Auto);
    if let Auto::Value(g) = grading {
        if !(g >= 1.0) {
            return Err(Error::config(&sec.key("grading"), "must be at least 1"));
        }
    }
    let far_bc = match sec.opt_str("far_bc")?.as_deref() {
        None | Some("dirichlet") => FarBc::DirichletAtZero,
        Some("neumann") => FarBc::HomogeneousNeumann,
        Some(other) => {
            return Err(Error::config(
                &sec.key("far_bc"),
                format!("unknown condition `{other}`"),
            ))
        }
    };
    let lambda_min = sec
        .opt_f64("lambda_min")?
        .map(|l| positive(sec, "lambda_min", l))
        .transpose()?;
    Ok(MeshSpec {
        n_nodes,
        z_max,
        grading,
        far_bc,
        lambda_min,
    })
}

fn parse_solver(sec: &Section) -> Result<SolverConfig> {
    sec.allow(&["method", "mu", "relaxation", "max_iters", "tol", "anderson"])?;
    let mut cfg = SolverConfig::default();
    cfg.method = match sec.opt_str("method")?.as_deref() {
        None | Some("splitting") => Method::Splitting,
        Some("regularized_path") => Method::RegularizedPath,
        Some(other) => {
            return Err(Error::config(
                &sec.key("method"),
                format!("unknown method `{other}`"),
            ))
        }
    };
    if let Some(mu) = sec.opt_f64("mu")? {
        cfg.mu = positive(sec, "mu", mu)?;
    }
    if let Some(r) = sec.opt_f64("relaxation")? {
        if !(r > 0.0 && r < 2.0) {
            return Err(Error::config(&sec.key("relaxation"), "must lie in (0, 2)"));
        }
        cfg.relaxation = r;
    }
    if let Some(m) = sec.opt_usize("max_iters")? {
        cfg.max_iters = m;
    }
    if let Some(t) = sec.opt_f64("tol")? {
        cfg.tol = positive(sec, "tol", t)?;
    }
    if let Some(a) = sec.opt_usize("anderson")? {
        cfg.anderson = a;
    }
    cfg.validate()
        .map_err(|e| Error::config(&sec.path, e.to_string()))?;
    Ok(cfg)
}

fn parse_run(sec: &Section, dim: usize) -> Result<RunSpec> {
    sec.allow(&[
        "phi",
        "phi_csv",
        "boundary",
        "lambda",
        "t_final",
        "m",
        "record_stride",
        "pairs",
        "checks",
        "spectral_tol",
        "n_list",
        "m_list",
    ])?;
    let phi = match (sec.opt_f64_list("phi")?, sec.path_of("phi_csv")?) {
        (Some(_), Some(_)) => {
            return Err(Error::config(&sec.key("phi"), "give either phi or phi_csv"))
        }
        (Some(v), None) => Some((HVector::from_vec(v), sec.key("phi"))),
        (None, Some(p)) => Some((
            read_vector_csv(&p).map_err(|e| Error::config(&sec.key("phi_csv"), e.to_string()))?,
            sec.key("phi_csv"),
        )),
        (None, None) => None,
    };
    if let Some((v, key)) = &phi {
        if v.len() != dim {
            return Err(Error::config(
                key,
                format!("has {} entries, the operator acts on {dim}", v.len()),
            ));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::config(key, "entries must be finite"));
        }
    }
    let boundary = match sec.opt_str("boundary")?.as_deref() {
        None | Some("dirichlet") => BoundaryKind::Dirichlet,
        Some("robin") => BoundaryKind::Robin,
        Some(other) => {
            return Err(Error::config(
                &sec.key("boundary"),
                format!("unknown boundary `{other}`"),
            ))
        }
    };
    let checks = sec
        .opt_list("checks", |v| v.as_str().map(str::to_string), "a string")?
        .unwrap_or_default();
    for (i, c) in checks.iter().enumerate() {
        if !CHECKS.contains(&c.as_str()) {
            return Err(Error::config(
                &format!("{}[{i}]", sec.key("checks")),
                format!("unknown check `{c}`"),
            ));
        }
    }
    let m = sec.opt_usize("m")?.unwrap_or(64);
    if m == 0 {
        return Err(Error::config(
            &sec.key("m"),
            "at least one substep required",
        ));
    }
    let record_stride = sec.opt_usize("record_stride")?;
    if record_stride == Some(0) {
        return Err(Error::config(
            &sec.key("record_stride"),
            "must be at least 1",
        ));
    }
    Ok(RunSpec {
        phi: phi.map(|p| p.0),
        boundary,
        lambda: positive(sec, "lambda", sec.opt_f64("lambda")?.unwrap_or(1.0))?,
        t_final: positive(sec, "t_final", sec.opt_f64("t_final")?.unwrap_or(1.0))?,
        m,
        record_stride,
        pairs: sec.opt_usize("pairs")?.unwrap_or(20),
        checks,
        spectral_tol: positive(
            sec,
            "spectral_tol",
            sec.opt_f64("spectral_tol")?.unwrap_or(1e-3),
        )?,
        n_list: sec
            .opt_usize_list("n_list")?
            .unwrap_or_else(|| vec![128, 256, 512, 1024]),
        m_list: sec
            .opt_usize_list("m_list")?
            .unwrap_or_else(|| vec![16, 32, 64, 128]),
    })
}

fn inline_matrix(rows: &[Value], key: &str) -> Result<DMatrix<f64>> {
    let mut data = Vec::new();
    let mut ncols = None;
    for (i, row) in rows.iter().enumerate() {
        let Value::Array(r) = row else {
            return Err(Error::config(&format!("{key}[{i}]"), "expected an array"));
        };
        let vals: Vec<f64> = r
            .iter()
            .enumerate()
            .map(|(j, v)| {
                as_f64(v)
                    .ok_or_else(|| Error::config(&format!("{key}[{i}][{j}]"), "expected a number"))
            })
            .collect::<Result<_>>()?;
        if *ncols.get_or_insert(vals.len()) != vals.len() {
            return Err(Error::config(
                &format!("{key}[{i}]"),
                "rows differ in length",
            ));
        }
        data.extend(vals);
    }
    let n = ncols.unwrap_or(0);
    Ok(DMatrix::from_row_slice(rows.len(), n, &data))
}

fn read_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| {
                f.trim().parse::<f64>().map_err(|_| {
                    Error::param("csv", format!("row {}: `{f}` is not a number", i + 2))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// A matrix stored row by row under a header row.
pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let rows = read_rows(path)?;
    let n = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::param("csv", "rows differ in length"));
    }
    Ok(DMatrix::from_row_slice(rows.len(), n, &rows.concat()))
}

/// A vector stored as a single column or a single row under a header row.
pub fn read_vector_csv(path: &Path) -> Result<HVector> {
    let rows = read_rows(path)?;
    if rows.len() == 1 || rows.iter().all(|r| r.len() == 1) {
        Ok(HVector::from_vec(rows.concat()))
    } else {
        Err(Error::param(
            "csv",
            "expected a single row or a single column",
        ))
    }
}

pub fn write_vector_csv(path: &Path, header: &str, v: &HVector) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record([header])?;
    for x in v.iter() {
        wtr.write_record([format!("{x:.17e}")])?;
    }
    wtr.flush()?;
    Ok(())
}
