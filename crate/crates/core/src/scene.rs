//! Line-oriented scene format.
//!
//! A scene is a sequence of blocks. Each block starts with a header
//! `[kind key=value ...]` followed by `key = value` lines; `#` starts a
//! comment. Block kinds:
//!
//! ```text
//! [settings]                       tol_sum, tol_cal, tol_comass, quad, seed,
//!                                  edge_samples, restarts
//! [generate name=sigma kind=kaehler_sigma n=3]
//!                                  kaehler_sigma (n), kaehler_sigma_prime (n, m),
//!                                  kaehler_two_edge (n, m),
//!                                  book (azimuths | sectors, degrees),
//!                                  prism_cone (p, radius, height[, apex])
//! [form name=w]                    dim = 4
//!                                  coeff (1,3)=1 (2,4)=1
//! [face name=F]                    patch = affine | holomorphic
//!                                  origin, du, dv (affine), domain,
//!                                  rotations = (1,2,0.5) ..., translate,
//!                                  orientation = + | -, calibration = <form>
//! [edge name=E]                    faces = F G ...
//!                                  segment = (x,...) (y,...)
//!                                  or trace = <face> with path = line u0 v0 u1 v1
//!                                  | arc r a0 a1
//! ```
//!
//! Faces and edges produced by a named `generate` block are prefixed with
//! `name.`. Domains are `square`, `triangle`, `rectangle u0 u1 v0 v1`,
//! `quarter_disk r` or `polygon u1 v1 u2 v2 ...`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::constructions::{
    build_book, build_book_from_sectors, build_prism_cone, build_sigma, build_sigma_prime, build_two_edge,
    holomorphic_radius, rotation_about_plane,
};
use crate::criterion::{Configuration, Tolerances};
use crate::exterior::{ConstantForm, MultiIndex};
use crate::surfaces::{EdgeCurve, Face, Orientation, ParamPath, Patch, PatchDomain, PatchMap};
use crate::{Error, Result, Vector};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Settings {
    pub tol_sum: Option<f64>,
    pub tol_cal: Option<f64>,
    pub tol_comass: Option<f64>,
    pub quad: Option<usize>,
    pub seed: Option<u64>,
    pub edge_samples: Option<usize>,
    pub restarts: Option<usize>,
}

impl Settings {
    /// Defaults overridden by the values present in the scene.
    pub fn tolerances(&self) -> Tolerances {
        let mut t = Tolerances::default();
        if let Some(x) = self.tol_sum {
            t.tol_sum = x;
        }
        if let Some(x) = self.tol_cal {
            t.tol_cal = x;
        }
        if let Some(x) = self.tol_comass {
            t.tol_comass = x;
        }
        if let Some(x) = self.seed {
            t.seed = x;
        }
        if let Some(x) = self.edge_samples {
            t.edge_samples = x;
        }
        if let Some(x) = self.restarts {
            t.comass_restarts = x;
        }
        t
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GeneratorKind {
    KaehlerSigma,
    KaehlerSigmaPrime,
    KaehlerTwoEdge,
    Book,
    PrismCone,
}

impl GeneratorKind {
    const ALL: [GeneratorKind; 5] = [
        GeneratorKind::KaehlerSigma,
        GeneratorKind::KaehlerSigmaPrime,
        GeneratorKind::KaehlerTwoEdge,
        GeneratorKind::Book,
        GeneratorKind::PrismCone,
    ];

    pub fn id(self) -> &'static str {
        match self {
            GeneratorKind::KaehlerSigma => "kaehler_sigma",
            GeneratorKind::KaehlerSigmaPrime => "kaehler_sigma_prime",
            GeneratorKind::KaehlerTwoEdge => "kaehler_two_edge",
            GeneratorKind::Book => "book",
            GeneratorKind::PrismCone => "prism_cone",
        }
    }

    fn from_id(id: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.id() == id)
    }

    /// Accepted parameters and whether each is a list.
    fn keys(self) -> &'static [(&'static str, bool)] {
        match self {
            GeneratorKind::KaehlerSigma => &[("n", false)],
            GeneratorKind::KaehlerSigmaPrime | GeneratorKind::KaehlerTwoEdge => &[("n", false), ("m", false)],
            GeneratorKind::Book => &[("azimuths", true), ("sectors", true)],
            GeneratorKind::PrismCone => &[("p", false), ("radius", false), ("height", false), ("apex", true)],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ParamValue {
    Number(f64),
    List(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenerateBlock {
    pub name: Option<String>,
    pub kind: GeneratorKind,
    pub params: BTreeMap<String, ParamValue>,
}

impl GenerateBlock {
    fn number(&self, key: &str) -> Result<f64> {
        match self.params.get(key) {
            Some(ParamValue::Number(x)) => Ok(*x),
            _ => Err(Error::InvalidArgument(format!("{} needs a numeric '{key}'", self.kind.id()))),
        }
    }

    fn integer(&self, key: &str) -> Result<usize> {
        let x = self.number(key)?;
        if x.fract() != 0.0 || !(0.0..=1e9).contains(&x) {
            return Err(Error::InvalidArgument(format!("'{key}' must be a non-negative integer, got {x}")));
        }
        Ok(x as usize)
    }

    fn list(&self, key: &str) -> Option<&[f64]> {
        match self.params.get(key) {
            Some(ParamValue::List(v)) => Some(v),
            _ => None,
        }
    }

    pub fn build(&self) -> Result<Configuration> {
        match self.kind {
            GeneratorKind::KaehlerSigma => build_sigma(self.integer("n")?),
            GeneratorKind::KaehlerSigmaPrime => build_sigma_prime(self.integer("n")?, self.integer("m")?),
            GeneratorKind::KaehlerTwoEdge => build_two_edge(self.integer("n")?, self.integer("m")?),
            GeneratorKind::Book => match (self.list("azimuths"), self.list("sectors")) {
                (Some(a), None) => build_book(&a.iter().map(|d| d.to_radians()).collect::<Vec<_>>()),
                (None, Some(s)) => build_book_from_sectors(&s.iter().map(|d| d.to_radians()).collect::<Vec<_>>()),
                _ => Err(Error::InvalidArgument("book needs exactly one of 'azimuths' or 'sectors'".into())),
            },
            GeneratorKind::PrismCone => {
                let apex = match self.list("apex") {
                    Some(a) => Some(Vector::from_column_slice(a)),
                    None => None,
                };
                build_prism_cone(self.integer("p")?, self.number("radius")?, self.number("height")?, apex)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FormBlock {
    pub name: String,
    pub form: ConstantForm,
}

#[derive(Clone, Debug, PartialEq)]
pub enum PatchSpec {
    Affine { origin: Vec<f64>, du: Vec<f64>, dv: Vec<f64> },
    Holomorphic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FaceBlock {
    pub name: String,
    pub patch: PatchSpec,
    pub domain: Option<PatchDomain>,
    /// `(i, j, θ)`: rotation by `θ` fixing the coordinate plane `(i, j)`, applied in order.
    pub rotations: Vec<(usize, usize, f64)>,
    pub translate: Option<Vec<f64>>,
    pub orientation: Orientation,
    pub calibration: String,
}

#[derive(Clone, Debug, PartialEq)]
pub enum EdgeGeometry {
    Segment { from: Vec<f64>, to: Vec<f64> },
    Trace { face: String, path: ParamPath },
}

#[derive(Clone, Debug, PartialEq)]
pub struct EdgeBlock {
    pub name: String,
    pub geometry: EdgeGeometry,
    pub faces: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Block {
    Generate(GenerateBlock),
    Form(FormBlock),
    Face(FaceBlock),
    Edge(EdgeBlock),
}

/// Parsed scene. Equality ignores source line numbers.
#[derive(Clone, Debug, Default)]
pub struct Scene {
    pub settings: Settings,
    pub blocks: Vec<Block>,
    lines: Vec<usize>,
}

impl PartialEq for Scene {
    fn eq(&self, other: &Self) -> bool {
        self.settings == other.settings && self.blocks == other.blocks
    }
}

struct Entry {
    key: String,
    value: String,
    line: usize,
}

struct RawBlock {
    kind: String,
    name: Option<String>,
    line: usize,
    entries: Vec<Entry>,
    coeff_lines: Vec<(usize, String)>,
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn parse_header(line: usize, text: &str) -> Result<RawBlock> {
    let inner = text
        .strip_prefix('[')
        .and_then(|t| t.strip_suffix(']'))
        .ok_or_else(|| parse_error(line, "malformed block header"))?;
    let mut tokens = inner.split_whitespace();
    let kind = tokens.next().ok_or_else(|| parse_error(line, "empty block header"))?.to_string();
    let mut block = RawBlock { kind, name: None, line, entries: Vec::new(), coeff_lines: Vec::new() };
    for token in tokens {
        let (k, v) = token
            .split_once('=')
            .ok_or_else(|| parse_error(line, format!("expected key=value in header, got '{token}'")))?;
        if k == "name" {
            if block.name.is_some() {
                return Err(parse_error(line, "duplicate 'name'"));
            }
            block.name = Some(v.to_string());
        } else {
            block.entries.push(Entry { key: k.to_string(), value: v.to_string(), line });
        }
    }
    Ok(block)
}

fn split_blocks(text: &str) -> Result<Vec<RawBlock>> {
    let mut blocks: Vec<RawBlock> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if content.starts_with('[') {
            blocks.push(parse_header(line, content)?);
            continue;
        }
        let block = blocks.last_mut().ok_or_else(|| parse_error(line, "content before the first block header"))?;
        if let Some(rest) = content.strip_prefix("coeff") {
            if rest.starts_with(char::is_whitespace) {
                block.coeff_lines.push((line, rest.trim().to_string()));
                continue;
            }
        }
        let (k, v) = content
            .split_once('=')
            .ok_or_else(|| parse_error(line, format!("expected 'key = value', got '{content}'")))?;
        block.entries.push(Entry { key: k.trim().to_string(), value: v.trim().to_string(), line });
    }
    Ok(blocks)
}

fn number(line: usize, text: &str) -> Result<f64> {
    let x: f64 = text.trim().parse().map_err(|_| parse_error(line, format!("malformed number '{text}'")))?;
    if !x.is_finite() {
        return Err(parse_error(line, format!("non-finite number '{text}'")));
    }
    Ok(x)
}

fn numbers(line: usize, text: &str) -> Result<Vec<f64>> {
    text.split_whitespace().map(|t| number(line, t)).collect()
}

fn integer<T: std::str::FromStr>(line: usize, text: &str) -> Result<T> {
    text.trim().parse().map_err(|_| parse_error(line, format!("malformed integer '{text}'")))
}

/// Parenthesized tuples `(a,b,...)` separated by whitespace.
fn tuples(line: usize, text: &str) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::new();
    let mut rest = text.trim();
    while !rest.is_empty() {
        let body = rest.strip_prefix('(').ok_or_else(|| parse_error(line, format!("expected '(' in '{text}'")))?;
        let end = body.find(')').ok_or_else(|| parse_error(line, format!("unclosed '(' in '{text}'")))?;
        out.push(body[..end].split(',').map(|t| number(line, t)).collect::<Result<Vec<_>>>()?);
        rest = body[end + 1..].trim_start();
    }
    Ok(out)
}

fn parse_coefficients(line: usize, text: &str, terms: &mut Vec<(MultiIndex, f64)>) -> Result<()> {
    let mut rest = text.trim();
    while !rest.is_empty() {
        let body = rest.strip_prefix('(').ok_or_else(|| parse_error(line, format!("expected '(' in '{text}'")))?;
        let end = body.find(')').ok_or_else(|| parse_error(line, "unclosed multi-index"))?;
        let indices = body[..end]
            .split(',')
            .map(|t| integer::<usize>(line, t))
            .collect::<Result<Vec<_>>>()?;
        let after = body[end + 1..].trim_start();
        let after = after.strip_prefix('=').ok_or_else(|| parse_error(line, "expected '=' after multi-index"))?.trim_start();
        let stop = after.find(|c: char| c.is_whitespace() || c == '(').unwrap_or(after.len());
        let value = number(line, &after[..stop])?;
        let idx = MultiIndex::from_one_based(&indices).map_err(|e| parse_error(line, e.to_string()))?;
        if terms.iter().any(|(i, _)| *i == idx) {
            return Err(parse_error(line, format!("multi-index {idx} given twice")));
        }
        terms.push((idx, value));
        rest = after[stop..].trim_start();
    }
    Ok(())
}

fn parse_domain(line: usize, text: &str) -> Result<PatchDomain> {
    let mut tokens = text.split_whitespace();
    let kind = tokens.next().unwrap_or("");
    let args = numbers(line, &tokens.collect::<Vec<_>>().join(" "))?;
    let domain = match (kind, args.len()) {
        ("square", 0) => PatchDomain::unit_square(),
        ("triangle", 0) => PatchDomain::unit_triangle(),
        ("rectangle", 4) => PatchDomain::Rectangle { u0: args[0], u1: args[1], v0: args[2], v1: args[3] },
        ("quarter_disk", 1) => PatchDomain::QuarterDisk { radius: args[0] },
        ("polygon", n) if n >= 6 && n % 2 == 0 => {
            PatchDomain::Polygon { vertices: args.chunks(2).map(|c| [c[0], c[1]]).collect() }
        }
        _ => return Err(parse_error(line, format!("malformed domain '{text}'"))),
    };
    domain.validate().map_err(|e| parse_error(line, e.to_string()))?;
    Ok(domain)
}

fn parse_path(line: usize, text: &str) -> Result<ParamPath> {
    let mut tokens = text.split_whitespace();
    let kind = tokens.next().unwrap_or("");
    let args = numbers(line, &tokens.collect::<Vec<_>>().join(" "))?;
    match (kind, args.len()) {
        ("line", 4) => Ok(ParamPath::Line { from: [args[0], args[1]], to: [args[2], args[3]] }),
        ("arc", 3) => Ok(ParamPath::Arc { radius: args[0], start: args[1], end: args[2] }),
        _ => Err(parse_error(line, format!("malformed path '{text}'"))),
    }
}

/// Key lookup with unknown/duplicate-key diagnostics.
struct Fields<'a> {
    block: &'a RawBlock,
    map: HashMap<&'a str, &'a Entry>,
}

impl<'a> Fields<'a> {
    fn new(block: &'a RawBlock, allowed: &[&str]) -> Result<Self> {
        let mut map = HashMap::new();
        for e in &block.entries {
            if !allowed.contains(&e.key.as_str()) {
                return Err(parse_error(e.line, format!("unknown key '{}' in [{}] block", e.key, block.kind)));
            }
            if map.insert(e.key.as_str(), e).is_some() {
                return Err(parse_error(e.line, format!("duplicate key '{}'", e.key)));
            }
        }
        if block.kind != "form" {
            if let Some((line, _)) = block.coeff_lines.first() {
                return Err(parse_error(*line, format!("'coeff' is not valid in a [{}] block", block.kind)));
            }
        }
        Ok(Self { block, map })
    }

    fn get(&self, key: &str) -> Option<&'a Entry> {
        self.map.get(key).copied()
    }

    fn require(&self, key: &str) -> Result<&'a Entry> {
        self.get(key)
            .ok_or_else(|| parse_error(self.block.line, format!("[{}] block is missing '{key}'", self.block.kind)))
    }

    fn name(&self) -> Result<String> {
        self.block
            .name
            .clone()
            .ok_or_else(|| parse_error(self.block.line, format!("[{}] block needs name=...", self.block.kind)))
    }
}

fn vector_field(entry: &Entry) -> Result<Vec<f64>> {
    let v = numbers(entry.line, &entry.value)?;
    if v.is_empty() {
        return Err(parse_error(entry.line, format!("'{}' needs at least one number", entry.key)));
    }
    Ok(v)
}

fn parse_settings(raw: &RawBlock, settings: &mut Settings) -> Result<()> {
    let f = Fields::new(raw, &["tol_sum", "tol_cal", "tol_comass", "quad", "seed", "edge_samples", "restarts"])?;
    if raw.name.is_some() {
        return Err(parse_error(raw.line, "[settings] takes no name"));
    }
    let num = |k: &str| f.get(k).map(|e| number(e.line, &e.value)).transpose();
    settings.tol_sum = num("tol_sum")?;
    settings.tol_cal = num("tol_cal")?;
    settings.tol_comass = num("tol_comass")?;
    settings.quad = f.get("quad").map(|e| integer(e.line, &e.value)).transpose()?;
    settings.seed = f.get("seed").map(|e| integer(e.line, &e.value)).transpose()?;
    settings.edge_samples = f.get("edge_samples").map(|e| integer(e.line, &e.value)).transpose()?;
    settings.restarts = f.get("restarts").map(|e| integer(e.line, &e.value)).transpose()?;
    if settings.quad.is_some_and(|q| q < 2) {
        return Err(parse_error(f.require("quad")?.line, "quad must be at least 2"));
    }
    Ok(())
}

fn parse_generate(raw: &RawBlock) -> Result<GenerateBlock> {
    let kind_entry = raw
        .entries
        .iter()
        .find(|e| e.key == "kind")
        .ok_or_else(|| parse_error(raw.line, "[generate] block is missing 'kind'"))?;
    let kind = GeneratorKind::from_id(&kind_entry.value)
        .ok_or_else(|| parse_error(kind_entry.line, format!("unknown generator '{}'", kind_entry.value)))?;
    let mut allowed: Vec<&str> = kind.keys().iter().map(|(k, _)| *k).collect();
    allowed.push("kind");
    let f = Fields::new(raw, &allowed)?;
    let mut params = BTreeMap::new();
    for (key, is_list) in kind.keys() {
        if let Some(e) = f.get(key) {
            let value = if *is_list {
                ParamValue::List(vector_field(e)?)
            } else {
                ParamValue::Number(number(e.line, &e.value)?)
            };
            params.insert(key.to_string(), value);
        }
    }
    Ok(GenerateBlock { name: raw.name.clone(), kind, params })
}

fn parse_form(raw: &RawBlock) -> Result<FormBlock> {
    let f = Fields::new(raw, &["dim"])?;
    let name = f.name()?;
    let dim_entry = f.require("dim")?;
    let dim: usize = integer(dim_entry.line, &dim_entry.value)?;
    let mut terms = Vec::new();
    for (line, text) in &raw.coeff_lines {
        parse_coefficients(*line, text, &mut terms)?;
    }
    let degree = terms.first().map(|(i, _)| i.degree()).unwrap_or(2);
    let form = ConstantForm::new(dim, degree, terms).map_err(|e| parse_error(raw.line, e.to_string()))?;
    Ok(FormBlock { name, form })
}

fn parse_face(raw: &RawBlock) -> Result<FaceBlock> {
    let f = Fields::new(
        raw,
        &["patch", "origin", "du", "dv", "domain", "rotations", "translate", "orientation", "calibration"],
    )?;
    let name = f.name()?;
    let patch_entry = f.require("patch")?;
    let patch = match patch_entry.value.as_str() {
        "affine" => PatchSpec::Affine {
            origin: vector_field(f.require("origin")?)?,
            du: vector_field(f.require("du")?)?,
            dv: vector_field(f.require("dv")?)?,
        },
        "holomorphic" => {
            if let Some(e) = ["origin", "du", "dv"].iter().find_map(|k| f.get(k)) {
                return Err(parse_error(e.line, format!("'{}' applies only to affine patches", e.key)));
            }
            PatchSpec::Holomorphic
        }
        other => return Err(parse_error(patch_entry.line, format!("unknown patch '{other}'"))),
    };
    let domain = f.get("domain").map(|e| parse_domain(e.line, &e.value)).transpose()?;
    let rotations = match f.get("rotations") {
        Some(e) => tuples(e.line, &e.value)?
            .into_iter()
            .map(|t| match t.as_slice() {
                [i, j, theta] if i.fract() == 0.0 && j.fract() == 0.0 && *i >= 1.0 && *j >= 1.0 => {
                    Ok((*i as usize, *j as usize, *theta))
                }
                _ => Err(parse_error(e.line, "rotations are (i,j,theta) with integer axes")),
            })
            .collect::<Result<Vec<_>>>()?,
        None => Vec::new(),
    };
    let translate = f.get("translate").map(vector_field).transpose()?;
    let orientation = match f.get("orientation").map(|e| (e.line, e.value.as_str())) {
        None | Some((_, "+")) => Orientation::Positive,
        Some((_, "-")) => Orientation::Negative,
        Some((line, other)) => return Err(parse_error(line, format!("orientation must be + or -, got '{other}'"))),
    };
    let calibration = f.require("calibration")?.value.clone();
    Ok(FaceBlock { name, patch, domain, rotations, translate, orientation, calibration })
}

fn parse_edge(raw: &RawBlock) -> Result<EdgeBlock> {
    let f = Fields::new(raw, &["faces", "segment", "trace", "path"])?;
    let name = f.name()?;
    let faces: Vec<String> = f.require("faces")?.value.split_whitespace().map(str::to_string).collect();
    let geometry = match (f.get("segment"), f.get("trace")) {
        (Some(e), None) => {
            if let Some(p) = f.get("path") {
                return Err(parse_error(p.line, "'path' applies only to traced edges"));
            }
            let mut pts = tuples(e.line, &e.value)?;
            if pts.len() != 2 || pts[0].len() != pts[1].len() {
                return Err(parse_error(e.line, "segment needs two points of equal dimension"));
            }
            let to = pts.pop().unwrap_or_default();
            let from = pts.pop().unwrap_or_default();
            EdgeGeometry::Segment { from, to }
        }
        (None, Some(e)) => {
            let p = f.require("path")?;
            EdgeGeometry::Trace { face: e.value.clone(), path: parse_path(p.line, &p.value)? }
        }
        _ => return Err(parse_error(raw.line, "an edge needs exactly one of 'segment' or 'trace'")),
    };
    Ok(EdgeBlock { name, geometry, faces })
}

/// Parses and fully resolves a scene: syntax, keys, numbers, names and
/// references, and every builder call.
pub fn parse_scene(text: &str) -> Result<Scene> {
    let mut scene = Scene::default();
    let mut seen_settings = false;
    for raw in split_blocks(text)? {
        let block = match raw.kind.as_str() {
            "settings" => {
                if seen_settings {
                    return Err(parse_error(raw.line, "duplicate [settings] block"));
                }
                seen_settings = true;
                parse_settings(&raw, &mut scene.settings)?;
                continue;
            }
            "generate" => Block::Generate(parse_generate(&raw)?),
            "form" => Block::Form(parse_form(&raw)?),
            "face" => Block::Face(parse_face(&raw)?),
            "edge" => Block::Edge(parse_edge(&raw)?),
            other => return Err(parse_error(raw.line, format!("unknown block kind '{other}'"))),
        };
        scene.blocks.push(block);
        scene.lines.push(raw.line);
    }
    scene.build()?;
    Ok(scene)
}

fn prefixed(prefix: &Option<String>, name: &str) -> String {
    match prefix {
        Some(p) => format!("{p}.{name}"),
        None => name.to_string(),
    }
}

impl Scene {
    fn line_of(&self, block: usize) -> usize {
        self.lines.get(block).copied().unwrap_or(0)
    }

    /// The configuration described by the scene. Name clashes, unresolved
    /// references and builder failures are reported with the line of the
    /// offending block (0 for scenes not produced by the parser).
    pub fn build(&self) -> Result<Configuration> {
        let mut forms: HashMap<&str, &ConstantForm> = HashMap::new();
        let mut names: HashSet<String> = HashSet::new();
        for (b, block) in self.blocks.iter().enumerate() {
            if let Block::Form(fb) = block {
                if forms.insert(fb.name.as_str(), &fb.form).is_some() {
                    return Err(parse_error(self.line_of(b), format!("duplicate form name '{}'", fb.name)));
                }
            }
        }

        let mut faces: Vec<Face> = Vec::new();
        let mut edges: Vec<(EdgeCurve, Vec<String>)> = Vec::new();
        let mut claim = |name: &str, b: usize| -> Result<()> {
            if !names.insert(name.to_string()) {
                return Err(parse_error(self.line_of(b), format!("duplicate face or edge name '{name}'")));
            }
            Ok(())
        };
        for (b, block) in self.blocks.iter().enumerate() {
            let at = |e: Error| match e {
                Error::Parse { .. } => e,
                other => parse_error(self.line_of(b), other.to_string()),
            };
            match block {
                Block::Generate(g) => {
                    let config = g.build().map_err(at)?;
                    for face in config.faces() {
                        let mut face = face.clone();
                        face.name = prefixed(&g.name, &face.name);
                        claim(&face.name, b)?;
                        faces.push(face);
                    }
                    for inc in config.edges() {
                        let mut edge = inc.edge.clone();
                        edge.name = prefixed(&g.name, &edge.name);
                        claim(&edge.name, b)?;
                        let incident = inc.faces.iter().map(|&f| prefixed(&g.name, &config.faces()[f].name)).collect();
                        edges.push((edge, incident));
                    }
                }
                Block::Face(fb) => {
                    claim(&fb.name, b)?;
                    let form = forms
                        .get(fb.calibration.as_str())
                        .ok_or_else(|| parse_error(self.line_of(b), format!("unknown form '{}'", fb.calibration)))?;
                    faces.push(fb.to_face((*form).clone()).map_err(at)?);
                }
                Block::Form(_) | Block::Edge(_) => {}
            }
        }
        for (b, block) in self.blocks.iter().enumerate() {
            if let Block::Edge(eb) = block {
                claim(&eb.name, b)?;
                let edge = match &eb.geometry {
                    EdgeGeometry::Segment { from, to } => EdgeCurve::segment(
                        eb.name.clone(),
                        Vector::from_column_slice(from),
                        Vector::from_column_slice(to),
                    )
                    .map_err(|e| parse_error(self.line_of(b), e.to_string()))?,
                    EdgeGeometry::Trace { face, path } => {
                        let host = faces
                            .iter()
                            .find(|f| f.name == *face)
                            .ok_or_else(|| parse_error(self.line_of(b), format!("unknown face '{face}'")))?;
                        EdgeCurve::trace(eb.name.clone(), host.patch.clone(), path.clone())
                    }
                };
                for f in &eb.faces {
                    if !faces.iter().any(|x| x.name == *f) {
                        return Err(parse_error(self.line_of(b), format!("unknown face '{f}'")));
                    }
                }
                edges.push((edge, eb.faces.clone()));
            }
        }
        let first_line = self.lines.first().copied().unwrap_or(0);
        Configuration::new(faces, edges).map_err(|e| match e {
            Error::Parse { .. } => e,
            other => parse_error(first_line, other.to_string()),
        })
    }

    /// Canonical text form; `parse_scene(serialize(s)) == s`.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let s = &self.settings;
        let mut settings = Vec::new();
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                settings.push(format!("{k} = {v}"));
            }
        };
        push("tol_sum", s.tol_sum.map(fmt_num));
        push("tol_cal", s.tol_cal.map(fmt_num));
        push("tol_comass", s.tol_comass.map(fmt_num));
        push("quad", s.quad.map(|x| x.to_string()));
        push("seed", s.seed.map(|x| x.to_string()));
        push("edge_samples", s.edge_samples.map(|x| x.to_string()));
        push("restarts", s.restarts.map(|x| x.to_string()));
        if !settings.is_empty() {
            out.push_str("[settings]\n");
            for line in settings {
                out.push_str(&line);
                out.push('\n');
            }
        }
        for block in &self.blocks {
            if !out.is_empty() {
                out.push('\n');
            }
            match block {
                Block::Generate(g) => {
                    out.push_str(&header("generate", g.name.as_deref()));
                    let _ = writeln!(out, "kind = {}", g.kind.id());
                    for (k, v) in &g.params {
                        let value = match v {
                            ParamValue::Number(x) => fmt_num(*x),
                            ParamValue::List(xs) => join(xs),
                        };
                        let _ = writeln!(out, "{k} = {value}");
                    }
                }
                Block::Form(fb) => {
                    out.push_str(&header("form", Some(&fb.name)));
                    let _ = writeln!(out, "dim = {}", fb.form.dim());
                    let terms: Vec<String> = fb
                        .form
                        .coefficients()
                        .iter()
                        .map(|(idx, c)| format!("{idx}={}", fmt_num(*c)))
                        .collect();
                    if !terms.is_empty() {
                        let _ = writeln!(out, "coeff {}", terms.join(" "));
                    }
                }
                Block::Face(fb) => {
                    out.push_str(&header("face", Some(&fb.name)));
                    match &fb.patch {
                        PatchSpec::Affine { origin, du, dv } => {
                            out.push_str("patch = affine\n");
                            let _ = writeln!(out, "origin = {}", join(origin));
                            let _ = writeln!(out, "du = {}", join(du));
                            let _ = writeln!(out, "dv = {}", join(dv));
                        }
                        PatchSpec::Holomorphic => out.push_str("patch = holomorphic\n"),
                    }
                    if let Some(d) = &fb.domain {
                        let _ = writeln!(out, "domain = {}", fmt_domain(d));
                    }
                    if !fb.rotations.is_empty() {
                        let r: Vec<String> =
                            fb.rotations.iter().map(|(i, j, t)| format!("({i},{j},{})", fmt_num(*t))).collect();
                        let _ = writeln!(out, "rotations = {}", r.join(" "));
                    }
                    if let Some(t) = &fb.translate {
                        let _ = writeln!(out, "translate = {}", join(t));
                    }
                    let sign = if fb.orientation == Orientation::Positive { "+" } else { "-" };
                    let _ = writeln!(out, "orientation = {sign}");
                    let _ = writeln!(out, "calibration = {}", fb.calibration);
                }
                Block::Edge(eb) => {
                    out.push_str(&header("edge", Some(&eb.name)));
                    let _ = writeln!(out, "faces = {}", eb.faces.join(" "));
                    match &eb.geometry {
                        EdgeGeometry::Segment { from, to } => {
                            let _ = writeln!(out, "segment = {} {}", tuple(from), tuple(to));
                        }
                        EdgeGeometry::Trace { face, path } => {
                            let _ = writeln!(out, "trace = {face}");
                            let p = match path {
                                ParamPath::Line { from, to } => format!("line {}", join(&[from[0], from[1], to[0], to[1]])),
                                ParamPath::Arc { radius, start, end } => format!("arc {}", join(&[*radius, *start, *end])),
                            };
                            let _ = writeln!(out, "path = {p}");
                        }
                    }
                }
            }
        }
        out
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.serialize().as_bytes()))
    }

    pub fn generate_blocks(&self) -> impl Iterator<Item = &GenerateBlock> {
        self.blocks.iter().filter_map(|b| match b {
            Block::Generate(g) => Some(g),
            _ => None,
        })
    }

    /// Resolves a builder parameter `[block.]key[index]` to
    /// `(block position, key, list index)`.
    fn locate(&self, param: &str) -> Result<(usize, String, Option<usize>)> {
        let (block_name, rest) = match param.rsplit_once('.') {
            Some((b, r)) => (Some(b), r),
            None => (None, param),
        };
        let (key, index) = match rest.split_once('[') {
            Some((k, i)) => {
                let i = i
                    .strip_suffix(']')
                    .and_then(|i| i.parse::<usize>().ok())
                    .ok_or_else(|| Error::InvalidArgument(format!("malformed parameter index in '{param}'")))?;
                (k.to_string(), Some(i))
            }
            None => (rest.to_string(), None),
        };
        let candidates: Vec<usize> = self
            .blocks
            .iter()
            .enumerate()
            .filter_map(|(i, b)| match b {
                Block::Generate(g)
                    if block_name.is_none_or(|n| g.name.as_deref() == Some(n)) && g.params.contains_key(&key) =>
                {
                    Some(i)
                }
                _ => None,
            })
            .collect();
        match candidates.as_slice() {
            [one] => Ok((*one, key, index)),
            [] => Err(Error::InvalidArgument(format!("no generate block exposes parameter '{param}'"))),
            _ => Err(Error::InvalidArgument(format!("parameter '{param}' is ambiguous; qualify it with the block name"))),
        }
    }

    /// Current value of a numeric builder parameter.
    pub fn parameter(&self, param: &str) -> Result<f64> {
        let (b, key, index) = self.locate(param)?;
        let Block::Generate(g) = &self.blocks[b] else { unreachable!("located blocks are generate blocks") };
        match (&g.params[&key], index) {
            (ParamValue::Number(x), None) => Ok(*x),
            (ParamValue::List(xs), Some(i)) if i < xs.len() => Ok(xs[i]),
            _ => Err(Error::InvalidArgument(format!("parameter '{param}' is not a numeric scalar"))),
        }
    }

    /// Copy of the scene with one builder parameter replaced.
    pub fn with_parameter(&self, param: &str, value: f64) -> Result<Scene> {
        let (b, key, index) = self.locate(param)?;
        let mut scene = self.clone();
        let Block::Generate(g) = &mut scene.blocks[b] else { unreachable!("located blocks are generate blocks") };
        match (g.params.get_mut(&key), index) {
            (Some(ParamValue::Number(x)), None) => *x = value,
            (Some(ParamValue::List(xs)), Some(i)) if i < xs.len() => xs[i] = value,
            _ => return Err(Error::InvalidArgument(format!("parameter '{param}' is not a numeric scalar"))),
        }
        Ok(scene)
    }
}

impl FaceBlock {
    fn to_face(&self, calibration: ConstantForm) -> Result<Face> {
        let (map, default_domain) = match &self.patch {
            PatchSpec::Affine { origin, du, dv } => (
                PatchMap::Affine {
                    origin: Vector::from_column_slice(origin),
                    du: Vector::from_column_slice(du),
                    dv: Vector::from_column_slice(dv),
                },
                PatchDomain::unit_square(),
            ),
            PatchSpec::Holomorphic => {
                (PatchMap::Holomorphic, PatchDomain::QuarterDisk { radius: holomorphic_radius() })
            }
        };
        let mut patch = Patch::new(self.domain.clone().unwrap_or(default_domain), map)?;
        for &(i, j, theta) in &self.rotations {
            if patch.dim() != 4 {
                return Err(Error::InvalidArgument("rotations are defined on R^4 only".into()));
            }
            patch = patch.with_isometry(&rotation_about_plane((i, j), theta)?)?;
        }
        if let Some(t) = &self.translate {
            patch = patch.with_translation(Vector::from_column_slice(t))?;
        }
        Face::new(self.name.clone(), patch, self.orientation, calibration)
    }
}

fn header(kind: &str, name: Option<&str>) -> String {
    match name {
        Some(n) => format!("[{kind} name={n}]\n"),
        None => format!("[{kind}]\n"),
    }
}

/// Shortest round-tripping decimal; integral values without a fraction.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x:?}")
    }
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| fmt_num(*x)).collect::<Vec<_>>().join(" ")
}

fn tuple(xs: &[f64]) -> String {
    format!("({})", xs.iter().map(|x| fmt_num(*x)).collect::<Vec<_>>().join(","))
}

fn fmt_domain(d: &PatchDomain) -> String {
    match d {
        PatchDomain::Rectangle { u0, u1, v0, v1 } => format!("rectangle {}", join(&[*u0, *u1, *v0, *v1])),
        PatchDomain::QuarterDisk { radius } => format!("quarter_disk {}", fmt_num(*radius)),
        PatchDomain::Polygon { vertices } => {
            format!("polygon {}", join(&vertices.iter().flat_map(|v| [v[0], v[1]]).collect::<Vec<_>>()))
        }
    }
}
