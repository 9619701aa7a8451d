//! Run configuration: every control parameter of the meshing pipeline with
//! its recommended default, plus shape/sizing selection, parsed from a plain
//! `key = value` text file.

use crate::error::{Error, Result};
use crate::geom::{Point2, Rect};
use crate::sdf::{BoolOp, Shape};
use std::fmt;
use std::path::{Path, PathBuf};

/// Meshing algorithm selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    DistMesh,
    Cvd,
    Hybrid,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::DistMesh => "dm",
            Algorithm::Cvd => "cvd",
            Algorithm::Hybrid => "hybrid",
        }
    }

    pub fn parse(s: &str) -> Option<Algorithm> {
        match s {
            "dm" => Some(Algorithm::DistMesh),
            "cvd" => Some(Algorithm::Cvd),
            "hybrid" => Some(Algorithm::Hybrid),
            _ => None,
        }
    }
}

/// Shape expression as written in the config file.
#[derive(Debug, Clone, PartialEq)]
pub enum ShapeSpec {
    Circle { cx: f64, cy: f64, r: f64 },
    Rect { x0: f64, x1: f64, y0: f64, y1: f64 },
    Contour(PathBuf),
    Combine(BoolOp, Box<ShapeSpec>, Box<ShapeSpec>),
}

impl ShapeSpec {
    /// True for contour or boolean-combined shapes (the "complicated" cases
    /// that default to the point addition scheme).
    pub fn is_composite(&self) -> bool {
        matches!(self, ShapeSpec::Contour(_) | ShapeSpec::Combine(..))
    }

    pub fn build(&self, domain: Rect) -> Result<Shape> {
        match self {
            ShapeSpec::Circle { cx, cy, r } => {
                Shape::circle(domain, Point2::new(*cx, *cy), *r)
            }
            ShapeSpec::Rect { x0, x1, y0, y1 } => {
                Shape::rectangle(domain, Rect::new(*x0, *x1, *y0, *y1))
            }
            ShapeSpec::Contour(path) => Shape::contour_from_file(domain, path),
            ShapeSpec::Combine(op, a, b) => Ok(Shape::combine(
                *op,
                a.build(domain)?,
                b.build(domain)?,
            )),
        }
    }
}

impl fmt::Display for ShapeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShapeSpec::Circle { cx, cy, r } => write!(f, "circle {cx} {cy} {r}"),
            ShapeSpec::Rect { x0, x1, y0, y1 } => write!(f, "rect {x0} {x1} {y0} {y1}"),
            ShapeSpec::Contour(p) => write!(f, "contour {}", p.display()),
            ShapeSpec::Combine(op, a, b) => {
                let name = match op {
                    BoolOp::Union => "union",
                    BoolOp::Difference => "difference",
                    BoolOp::Intersection => "intersection",
                };
                write!(f, "{name}({a}, {b})")
            }
        }
    }
}

/// Element sizing selection: a uniform field or the automatic
/// feature-size-based field with gradation rate `k`.
#[derive(Debug, Clone, PartialEq)]
pub enum SizingSpec {
    Constant,
    Auto { k: f64 },
}

impl fmt::Display for SizingSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SizingSpec::Constant => write!(f, "constant"),
            SizingSpec::Auto { k } => write!(f, "auto K={k}"),
        }
    }
}

/// All control parameters of the meshing pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    // grid construction
    pub n_opt: f64,
    pub fac_grid: f64,
    // boundary approximation points
    pub fac_s: f64,
    pub n_grid: usize,
    // medial axis trimming
    pub n_nei_thres: usize,
    pub fac_nei: f64,
    // point initialization / addition
    pub eta: f64,
    /// Initial point fraction; `None` resolves per shape (1.0 for simple
    /// convex primitives with constant sizing, 0.2 otherwise).
    pub fac_init: Option<f64>,
    pub t_add_quality: f64,
    pub fac_add: f64,
    // movement thresholds
    pub fac_retria_mvmt: f64,
    pub fac_end_mvmt: f64,
    pub fac_pt_mvmt: f64,
    pub fac_geps: f64,
    // adaptive signed distance field
    pub t_depth_adf: u32,
    pub fac_etol_adf: f64,
    // termination
    pub t_end_quality: f64,
    pub t_end_alpha_max: f64,
    // voronoi / triangle extraction
    pub fac_voro_bound: f64,
    pub t_tria_ccircum: f64,
    // hybrid switch
    pub t_switch_quality: f64,
    // newton projection
    pub newton_damping: f64,
    pub t_newton_ct: u32,
    // spring system
    pub fac_f: f64,
    pub spring_k: f64,
    pub dt: f64,
    // run parameters
    pub n_total: usize,
    pub algorithm: Algorithm,
    pub threads: usize,
    pub seed: u64,
    /// 0 = no per-iteration output; -1 = first and final mesh only;
    /// m > 0 = output every m iterations.
    pub output_interval: i64,
    pub output_dir: PathBuf,
    pub domain: Rect,
    pub shape: ShapeSpec,
    pub sizing: SizingSpec,
    /// Safety cap on meshing iterations (not a termination criterion).
    pub max_iters: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            n_opt: 3.3,
            fac_grid: 5.0,
            fac_s: 0.5,
            n_grid: 5,
            n_nei_thres: 3,
            fac_nei: 2.0,
            eta: 0.5,
            fac_init: None,
            t_add_quality: 0.002,
            fac_add: 0.6,
            fac_retria_mvmt: 0.1,
            fac_end_mvmt: 0.001,
            fac_pt_mvmt: 0.4,
            fac_geps: 0.01,
            t_depth_adf: 10,
            fac_etol_adf: 0.1,
            t_end_quality: 0.001,
            t_end_alpha_max: 0.005,
            fac_voro_bound: 5.0,
            t_tria_ccircum: 0.4,
            t_switch_quality: 0.0015,
            newton_damping: 1.0,
            t_newton_ct: 10,
            fac_f: 1.2,
            spring_k: 1.0,
            dt: 0.2,
            n_total: 5000,
            algorithm: Algorithm::DistMesh,
            threads: 1,
            seed: 1,
            output_interval: 0,
            output_dir: PathBuf::from("meshing_outputs"),
            domain: Rect::UNIT,
            shape: ShapeSpec::Circle {
                cx: 0.5,
                cy: 0.5,
                r: 0.1,
            },
            sizing: SizingSpec::Auto { k: 0.005 },
            max_iters: 5000,
        }
    }
}

impl Config {
    /// The effective initial point fraction.
    pub fn resolved_fac_init(&self) -> f64 {
        match self.fac_init {
            Some(v) => v,
            None => {
                if !self.shape.is_composite() && self.sizing == SizingSpec::Constant {
                    1.0
                } else {
                    0.2
                }
            }
        }
    }

    pub fn n_init(&self) -> usize {
        ((self.resolved_fac_init() * self.n_total as f64).round() as usize)
            .clamp(1, self.n_total)
    }

    /// Parse a `key = value` config text. Unspecified keys keep their
    /// defaults, unknown keys are errors.
    pub fn parse(text: &str) -> Result<Config> {
        let mut cfg = Config::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: lineno + 1,
                msg: "expected `key = value`".into(),
            })?;
            let key = key.trim();
            let value = value.trim();
            cfg.set(key, value).map_err(|e| match e {
                Error::Validation(msg) => Error::Parse {
                    line: lineno + 1,
                    msg,
                },
                other => other,
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse_file(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Config::parse(&text)
    }

    /// Assign one key. Used by both the file parser and CLI overrides.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num(key: &str, value: &str) -> Result<f64> {
            value
                .parse::<f64>()
                .map_err(|_| Error::Validation(format!("bad number for {key}: `{value}`")))
        }
        fn int(key: &str, value: &str) -> Result<i64> {
            value
                .parse::<i64>()
                .map_err(|_| Error::Validation(format!("bad integer for {key}: `{value}`")))
        }
        match key {
            "n_opt" => self.n_opt = num(key, value)?,
            "fac_grid" => self.fac_grid = num(key, value)?,
            "fac_s" => self.fac_s = num(key, value)?,
            "n_grid" => self.n_grid = int(key, value)? as usize,
            "n_nei_thres" => self.n_nei_thres = int(key, value)? as usize,
            "fac_nei" => self.fac_nei = num(key, value)?,
            "eta" => self.eta = num(key, value)?,
            "fac_init" => {
                self.fac_init = if value == "auto" {
                    None
                } else {
                    Some(num(key, value)?)
                }
            }
            "t_add_quality" => self.t_add_quality = num(key, value)?,
            "fac_add" => self.fac_add = num(key, value)?,
            "fac_retria_mvmt" => self.fac_retria_mvmt = num(key, value)?,
            "fac_end_mvmt" => self.fac_end_mvmt = num(key, value)?,
            "fac_pt_mvmt" => self.fac_pt_mvmt = num(key, value)?,
            "fac_geps" => self.fac_geps = num(key, value)?,
            "t_depth_adf" => self.t_depth_adf = int(key, value)? as u32,
            "fac_etol_adf" => self.fac_etol_adf = num(key, value)?,
            "t_end_quality" => self.t_end_quality = num(key, value)?,
            "t_end_alpha_max" => self.t_end_alpha_max = num(key, value)?,
            "fac_voro_bound" => self.fac_voro_bound = num(key, value)?,
            "t_tria_ccircum" => self.t_tria_ccircum = num(key, value)?,
            "t_switch_quality" => self.t_switch_quality = num(key, value)?,
            "newton_damping" => self.newton_damping = num(key, value)?,
            "t_newton_ct" => self.t_newton_ct = int(key, value)? as u32,
            "fac_f" => self.fac_f = num(key, value)?,
            "spring_k" => self.spring_k = num(key, value)?,
            "dt" => self.dt = num(key, value)?,
            "n_total" => self.n_total = int(key, value)? as usize,
            "algorithm" => {
                self.algorithm = Algorithm::parse(value).ok_or_else(|| {
                    Error::Validation(format!("unknown algorithm `{value}` (dm|cvd|hybrid)"))
                })?
            }
            "threads" => self.threads = int(key, value)? as usize,
            "seed" => {
                self.seed = value
                    .parse::<u64>()
                    .map_err(|_| Error::Validation(format!("bad seed `{value}`")))?
            }
            "output_interval" => self.output_interval = int(key, value)?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            "domain" => {
                let v: Vec<f64> = value
                    .split_whitespace()
                    .map(|t| num("domain", t))
                    .collect::<Result<_>>()?;
                if v.len() != 4 {
                    return Err(Error::Validation(
                        "domain wants `ax bx ay by`".into(),
                    ));
                }
                self.domain = Rect::new(v[0], v[1], v[2], v[3]);
            }
            "shape" => self.shape = parse_shape(value)?,
            "sizing" => self.sizing = parse_sizing(value)?,
            "max_iters" => self.max_iters = int(key, value)? as usize,
            _ => return Err(Error::Validation(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let positive: &[(&str, f64)] = &[
            ("n_opt", self.n_opt),
            ("fac_grid", self.fac_grid),
            ("fac_s", self.fac_s),
            ("fac_nei", self.fac_nei),
            ("eta", self.eta),
            ("t_add_quality", self.t_add_quality),
            ("fac_add", self.fac_add),
            ("fac_retria_mvmt", self.fac_retria_mvmt),
            ("fac_end_mvmt", self.fac_end_mvmt),
            ("fac_pt_mvmt", self.fac_pt_mvmt),
            ("fac_geps", self.fac_geps),
            ("fac_etol_adf", self.fac_etol_adf),
            ("t_end_quality", self.t_end_quality),
            ("t_end_alpha_max", self.t_end_alpha_max),
            ("fac_voro_bound", self.fac_voro_bound),
            ("t_tria_ccircum", self.t_tria_ccircum),
            ("t_switch_quality", self.t_switch_quality),
            ("newton_damping", self.newton_damping),
            ("fac_f", self.fac_f),
            ("spring_k", self.spring_k),
            ("dt", self.dt),
        ];
        for (name, v) in positive {
            if !v.is_finite() || *v <= 0.0 {
                return Err(Error::Validation(format!("{name} must be > 0, got {v}")));
            }
        }
        if let Some(fi) = self.fac_init {
            if !(0.0 < fi && fi <= 1.0) {
                return Err(Error::Validation(format!(
                    "fac_init must be in (0, 1], got {fi}"
                )));
            }
        }
        if let SizingSpec::Auto { k } = self.sizing {
            if k < 0.0 || !k.is_finite() {
                return Err(Error::Validation(format!("K must be >= 0, got {k}")));
            }
        }
        if self.n_total < 1 {
            return Err(Error::Validation("n_total must be >= 1".into()));
        }
        if self.n_grid < 1 {
            return Err(Error::Validation("n_grid must be >= 1".into()));
        }
        if self.threads < 1 {
            return Err(Error::Validation("threads must be >= 1".into()));
        }
        if self.output_interval < -1 {
            return Err(Error::Validation(
                "output_interval must be 0, -1, or a positive integer".into(),
            ));
        }
        if self.domain.width() <= 0.0 || self.domain.height() <= 0.0 {
            return Err(Error::DegenerateDomain(format!(
                "domain [{}, {}] x [{}, {}]",
                self.domain.ax, self.domain.bx, self.domain.ay, self.domain.by
            )));
        }
        Ok(())
    }

    /// Canonical text form; `Config::parse` of the output reproduces `self`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        kv("n_opt", self.n_opt.to_string());
        kv("fac_grid", self.fac_grid.to_string());
        kv("fac_s", self.fac_s.to_string());
        kv("n_grid", self.n_grid.to_string());
        kv("n_nei_thres", self.n_nei_thres.to_string());
        kv("fac_nei", self.fac_nei.to_string());
        kv("eta", self.eta.to_string());
        kv(
            "fac_init",
            self.fac_init.map_or("auto".into(), |v| v.to_string()),
        );
        kv("t_add_quality", self.t_add_quality.to_string());
        kv("fac_add", self.fac_add.to_string());
        kv("fac_retria_mvmt", self.fac_retria_mvmt.to_string());
        kv("fac_end_mvmt", self.fac_end_mvmt.to_string());
        kv("fac_pt_mvmt", self.fac_pt_mvmt.to_string());
        kv("fac_geps", self.fac_geps.to_string());
        kv("t_depth_adf", self.t_depth_adf.to_string());
        kv("fac_etol_adf", self.fac_etol_adf.to_string());
        kv("t_end_quality", self.t_end_quality.to_string());
        kv("t_end_alpha_max", self.t_end_alpha_max.to_string());
        kv("fac_voro_bound", self.fac_voro_bound.to_string());
        kv("t_tria_ccircum", self.t_tria_ccircum.to_string());
        kv("t_switch_quality", self.t_switch_quality.to_string());
        kv("newton_damping", self.newton_damping.to_string());
        kv("t_newton_ct", self.t_newton_ct.to_string());
        kv("fac_f", self.fac_f.to_string());
        kv("spring_k", self.spring_k.to_string());
        kv("dt", self.dt.to_string());
        kv("n_total", self.n_total.to_string());
        kv("algorithm", self.algorithm.as_str().to_string());
        kv("threads", self.threads.to_string());
        kv("seed", self.seed.to_string());
        kv("output_interval", self.output_interval.to_string());
        kv("output_dir", self.output_dir.display().to_string());
        kv(
            "domain",
            format!(
                "{} {} {} {}",
                self.domain.ax, self.domain.bx, self.domain.ay, self.domain.by
            ),
        );
        kv("shape", self.shape.to_string());
        kv("sizing", self.sizing.to_string());
        kv("max_iters", self.max_iters.to_string());
        s
    }
}

fn parse_sizing(s: &str) -> Result<SizingSpec> {
    let s = s.trim();
    if s == "constant" {
        return Ok(SizingSpec::Constant);
    }
    if let Some(rest) = s.strip_prefix("auto") {
        let rest = rest.trim();
        let k = rest
            .strip_prefix("K=")
            .or_else(|| rest.strip_prefix("k="))
            .ok_or_else(|| Error::Validation(format!("sizing auto wants `K=<v>`, got `{s}`")))?;
        let k = k
            .trim()
            .parse::<f64>()
            .map_err(|_| Error::Validation(format!("bad K value `{k}`")))?;
        return Ok(SizingSpec::Auto { k });
    }
    Err(Error::Validation(format!(
        "sizing must be `constant` or `auto K=<v>`, got `{s}`"
    )))
}

/// Recursive-descent parser for shape expressions:
/// `circle cx cy r`, `rect x0 x1 y0 y1`, `contour <path>`,
/// `union|difference|intersection ( <shape> , <shape> )`.
pub fn parse_shape(s: &str) -> Result<ShapeSpec> {
    let s = s.trim();
    for (name, op) in [
        ("union", BoolOp::Union),
        ("difference", BoolOp::Difference),
        ("intersection", BoolOp::Intersection),
    ] {
        if let Some(rest) = s.strip_prefix(name) {
            let rest = rest.trim();
            if !rest.starts_with('(') || !rest.ends_with(')') {
                return Err(Error::Validation(format!(
                    "{name} wants `(<shape>, <shape>)`"
                )));
            }
            let inner = &rest[1..rest.len() - 1];
            let (a, b) = split_top_level(inner)?;
            return Ok(ShapeSpec::Combine(
                op,
                Box::new(parse_shape(a)?),
                Box::new(parse_shape(b)?),
            ));
        }
    }
    let mut tokens = s.split_whitespace();
    let head = tokens
        .next()
        .ok_or_else(|| Error::Validation("empty shape expression".into()))?;
    let nums = |tokens: std::str::SplitWhitespace<'_>, want: usize| -> Result<Vec<f64>> {
        let v: Vec<f64> = tokens
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| Error::Validation(format!("bad number `{t}` in shape")))
            })
            .collect::<Result<_>>()?;
        if v.len() != want {
            return Err(Error::Validation(format!(
                "shape `{head}` wants {want} numbers, got {}",
                v.len()
            )));
        }
        Ok(v)
    };
    match head {
        "circle" => {
            let v = nums(tokens, 3)?;
            Ok(ShapeSpec::Circle {
                cx: v[0],
                cy: v[1],
                r: v[2],
            })
        }
        "rect" => {
            let v = nums(tokens, 4)?;
            Ok(ShapeSpec::Rect {
                x0: v[0],
                x1: v[1],
                y0: v[2],
                y1: v[3],
            })
        }
        "contour" => {
            let path: String = tokens.collect::<Vec<_>>().join(" ");
            if path.is_empty() {
                return Err(Error::Validation("contour wants a file path".into()));
            }
            Ok(ShapeSpec::Contour(PathBuf::from(path)))
        }
        other => Err(Error::Validation(format!("unknown shape `{other}`"))),
    }
}

/// Split `a, b` at the top-level comma (ignoring commas inside parentheses).
fn split_top_level(s: &str) -> Result<(&str, &str)> {
    let mut depth = 0usize;
    for (i, ch) in s.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => {
                depth = depth.checked_sub(1).ok_or_else(|| {
                    Error::Validation("unbalanced parentheses in shape".into())
                })?
            }
            ',' if depth == 0 => return Ok((&s[..i], &s[i + 1..])),
            _ => {}
        }
    }
    Err(Error::Validation(
        "expected two comma-separated shapes".into(),
    ))
}
