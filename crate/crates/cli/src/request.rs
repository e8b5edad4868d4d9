//! Request documents: strict parsing into canonical form and canonical serialization.
//!
//! A document is `{"schema": 1, "kind": ..., "payload": {...}, "options": {...}}`.
//! Probability arrays carry an explicit `"order"` naming their axes; parsing
//! permutes them into the canonical order so two documents that differ only in
//! axis order normalize to the same request.

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use polybound::causal::FormulaVariant;
use polybound::entropic::uniform_settings;
use polybound::quantum::NpaLevel;
use polybound::{Error, Tolerances};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u64 = 1;
pub const DEFAULT_INPUT_TOLERANCE: f64 = 1e-9;
pub const MAX_AUDIT_SAMPLES: usize = 10_000;

pub const TABLE_ORDER: [&str; 3] = ["y", "x", "z"];
pub const BEHAVIOR_ORDER: [&str; 4] = ["a", "b", "x", "y"];
pub const PAIR_ORDER: [&str; 2] = ["x", "y"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    IvBounds,
    Chsh,
    Membership,
    Npa,
    Gap,
    Pns,
    Manski,
    Frechet,
    Entropic,
    Audit,
}

impl Kind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Kind::IvBounds => "iv-bounds",
            Kind::Chsh => "chsh",
            Kind::Membership => "membership",
            Kind::Npa => "npa",
            Kind::Gap => "gap",
            Kind::Pns => "pns",
            Kind::Manski => "manski",
            Kind::Frechet => "frechet",
            Kind::Entropic => "entropic",
            Kind::Audit => "audit",
        }
    }

    fn parse(s: &str) -> CliResult<Self> {
        Kind::from_str(s, false).map_err(|_| CliError::schema(format!("unknown kind {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Md,
}

/// Fully resolved options; every field is explicit in the canonical form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    /// Allowed deviation of each probability block from total mass one.
    pub tolerance: f64,
    pub tolerances: Tolerances,
    pub npa_level: NpaLevel,
    pub variant: FormulaVariant,
    pub renormalize: bool,
    pub audit: bool,
    pub format: Format,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_INPUT_TOLERANCE,
            tolerances: Tolerances::default(),
            npa_level: NpaLevel::L1,
            variant: FormulaVariant::Standard,
            renormalize: false,
            audit: false,
            format: Format::Json,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOptions {
    tolerance: Option<f64>,
    tolerances: Option<Tolerances>,
    npa_level: Option<NpaLevel>,
    variant: Option<FormulaVariant>,
    renormalize: Option<bool>,
    audit: Option<bool>,
    format: Option<Format>,
}

/// Command-line flags; each set field wins over the document's options.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub tolerance: Option<f64>,
    pub npa_level: Option<NpaLevel>,
    pub variant: Option<FormulaVariant>,
    pub renormalize: bool,
    pub audit: bool,
    pub format: Option<Format>,
}

pub type Table = [[[f64; 2]; 2]; 2];
pub type BehaviorTable = [[[[f64; 2]; 2]; 2]; 2];
pub type Pair = [[f64; 2]; 2];

#[derive(Debug, Clone, PartialEq)]
pub enum BellData {
    Correlations(Pair),
    Behavior(BehaviorTable),
}

#[derive(Debug, Clone, PartialEq)]
pub enum GapData {
    Coefficients(Pair),
    Behavior(BehaviorTable),
    Table(Table),
}

#[derive(Debug, Clone, PartialEq)]
pub enum EntropicData {
    Behavior { behavior: BehaviorTable, settings: Pair },
    Vector { n: usize, h: Vec<f64> },
    Joint { arities: Vec<usize>, p: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    IvBounds { table: Table },
    Chsh(BellData),
    Membership { behavior: BehaviorTable },
    Npa { coefficients: Pair },
    Gap(GapData),
    Pns { p_yx: f64, p_yxp: f64, observational: Pair },
    Manski { e1: f64, e0: f64, px1: f64 },
    Frechet { u: f64, v: f64 },
    Entropic(EntropicData),
    Audit { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Request {
    pub kind: Kind,
    pub payload: Payload,
    pub settings: Settings,
}

/// A parsed request plus notes produced while normalizing it.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed {
    pub request: Request,
    pub warnings: Vec<String>,
}

fn object<'a>(v: &'a Value, what: &str, allowed: &[&str]) -> CliResult<&'a Map<String, Value>> {
    let m = v
        .as_object()
        .ok_or_else(|| CliError::schema(format!("{what} must be an object")))?;
    if let Some(k) = m.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(CliError::schema(format!("unknown field {k:?} in {what}")));
    }
    Ok(m)
}

fn field<'a>(m: &'a Map<String, Value>, key: &str, what: &str) -> CliResult<&'a Value> {
    m.get(key)
        .ok_or_else(|| CliError::schema(format!("{what} is missing {key:?}")))
}

fn number(v: &Value, what: &str) -> CliResult<f64> {
    match v {
        Value::Number(n) => n
            .as_f64()
            .filter(|x| x.is_finite())
            .ok_or_else(|| CliError::schema(format!("{what} is not a finite number"))),
        _ => Err(CliError::schema(format!("{what} must be a number"))),
    }
}

fn integer(v: &Value, what: &str) -> CliResult<u64> {
    v.as_u64()
        .ok_or_else(|| CliError::schema(format!("{what} must be a non-negative integer")))
}

fn numbers(v: &Value, what: &str) -> CliResult<Vec<f64>> {
    v.as_array()
        .ok_or_else(|| CliError::schema(format!("{what} must be an array")))?
        .iter()
        .enumerate()
        .map(|(i, x)| number(x, &format!("{what}[{i}]")))
        .collect()
}

/// Flattens a nested array with every dimension of length two.
fn flatten_binary(v: &Value, depth: usize, what: &str, out: &mut Vec<f64>) -> CliResult<()> {
    if depth == 0 {
        out.push(number(v, what)?);
        return Ok(());
    }
    let arr = v
        .as_array()
        .filter(|a| a.len() == 2)
        .ok_or_else(|| CliError::schema(format!("{what} must be a nested array of shape 2^{depth}")))?;
    for (i, x) in arr.iter().enumerate() {
        flatten_binary(x, depth - 1, &format!("{what}[{i}]"), out)?;
    }
    Ok(())
}

fn pair_matrix(v: &Value, what: &str) -> CliResult<Pair> {
    let mut flat = Vec::with_capacity(4);
    flatten_binary(v, 2, what, &mut flat)?;
    Ok([[flat[0], flat[1]], [flat[2], flat[3]]])
}

/// `{"order": [...], "p": nested}` with binary axes, returned flat in `canonical` order
/// (first axis most significant).
fn indexed(v: &Value, canonical: &[&str], what: &str) -> CliResult<Vec<f64>> {
    let m = object(v, what, &["order", "p"])?;
    let order: Vec<String> = field(m, "order", what)?
        .as_array()
        .ok_or_else(|| CliError::schema(format!("{what}.order must be an array")))?
        .iter()
        .map(|s| {
            s.as_str()
                .map(str::to_owned)
                .ok_or_else(|| CliError::schema(format!("{what}.order entries must be strings")))
        })
        .collect::<CliResult<_>>()?;
    let mut sorted_given = order.clone();
    sorted_given.sort();
    let mut sorted_canon: Vec<String> = canonical.iter().map(|s| s.to_string()).collect();
    sorted_canon.sort();
    if sorted_given != sorted_canon {
        return Err(CliError::schema(format!(
            "{what}.order must be a permutation of {canonical:?}, got {order:?}"
        )));
    }
    let d = canonical.len();
    let mut given = Vec::with_capacity(1 << d);
    flatten_binary(field(m, "p", what)?, d, &format!("{what}.p"), &mut given)?;
    // Axis `k` of the input is canonical axis `pos[k]`.
    let pos: Vec<usize> = order
        .iter()
        .map(|o| canonical.iter().position(|c| c == o).expect("checked permutation"))
        .collect();
    let mut out = vec![0.0; 1 << d];
    for (gi, &val) in given.iter().enumerate() {
        let mut ci = 0;
        for (k, &p) in pos.iter().enumerate() {
            let bit = gi >> (d - 1 - k) & 1;
            ci |= bit << (d - 1 - p);
        }
        out[ci] = val;
    }
    Ok(out)
}

fn nested(flat: &[f64], depth: usize) -> Value {
    if depth == 0 {
        return json!(flat[0]);
    }
    let half = flat.len() / 2;
    Value::Array(vec![nested(&flat[..half], depth - 1), nested(&flat[half..], depth - 1)])
}

fn indexed_value(flat: &[f64], canonical: &[&str]) -> Value {
    json!({"order": canonical, "p": nested(flat, canonical.len())})
}

/// Checks entries and block sums of a flat array split into consecutive blocks
/// after grouping by `block_of`; renormalizes when allowed.
struct Normalizer<'a> {
    settings: &'a Settings,
    warnings: &'a mut Vec<String>,
}

impl Normalizer<'_> {
    fn blocks(&mut self, what: &'static str, flat: &mut [f64], block_of: impl Fn(usize) -> usize, blocks: usize) -> CliResult<()> {
        for &v in flat.iter() {
            if v < 0.0 {
                return Err(Error::NegativeProbability { what, value: v }.into());
            }
        }
        let mut sums = vec![0.0; blocks];
        for (i, v) in flat.iter().enumerate() {
            sums[block_of(i)] += v;
        }
        let mut rescaled = false;
        for (b, &s) in sums.iter().enumerate() {
            if (s - 1.0).abs() <= self.settings.tolerance {
                continue;
            }
            if !self.settings.renormalize || s <= 0.0 {
                return Err(Error::NotNormalized { what, sum: s }.into());
            }
            for (i, v) in flat.iter_mut().enumerate() {
                if block_of(i) == b {
                    *v /= s;
                }
            }
            rescaled = true;
        }
        if rescaled {
            self.warnings.push(format!("renormalized: {what}"));
        }
        Ok(())
    }

    fn table(&mut self, flat: &mut [f64]) -> CliResult<Table> {
        // Canonical index 4y + 2x + z; blocks by z.
        self.blocks("observed table", flat, |i| i & 1, 2)?;
        Ok(std::array::from_fn(|y| std::array::from_fn(|x| std::array::from_fn(|z| flat[4 * y + 2 * x + z]))))
    }

    fn behavior(&mut self, flat: &mut [f64]) -> CliResult<BehaviorTable> {
        // Canonical index 8a + 4b + 2x + y; blocks by (x, y).
        self.blocks("behavior", flat, |i| i & 3, 4)?;
        Ok(std::array::from_fn(|a| {
            std::array::from_fn(|b| std::array::from_fn(|x| std::array::from_fn(|y| flat[8 * a + 4 * b + 2 * x + y])))
        }))
    }

    fn pair(&mut self, what: &'static str, flat: &mut [f64]) -> CliResult<Pair> {
        self.blocks(what, flat, |_| 0, 1)?;
        Ok([[flat[0], flat[1]], [flat[2], flat[3]]])
    }
}

fn resolve_settings(raw: Option<&Value>, o: &Overrides) -> CliResult<Settings> {
    let raw: RawOptions = match raw {
        Some(v) => serde_json::from_value(v.clone()).map_err(|e| CliError::schema(format!("options: {e}")))?,
        None => RawOptions::default(),
    };
    let d = Settings::default();
    let s = Settings {
        tolerance: o.tolerance.or(raw.tolerance).unwrap_or(d.tolerance),
        tolerances: raw.tolerances.unwrap_or(d.tolerances),
        npa_level: o.npa_level.or(raw.npa_level).unwrap_or(d.npa_level),
        variant: o.variant.or(raw.variant).unwrap_or(d.variant),
        renormalize: o.renormalize || raw.renormalize.unwrap_or(d.renormalize),
        audit: o.audit || raw.audit.unwrap_or(d.audit),
        format: o.format.or(raw.format).unwrap_or(d.format),
    };
    if !(s.tolerance.is_finite() && s.tolerance >= 0.0) {
        return Err(CliError::schema("options.tolerance must be a non-negative number"));
    }
    Ok(s)
}

fn bell_data(m: &Map<String, Value>, norm: &mut Normalizer<'_>) -> CliResult<BellData> {
    match (m.get("correlations"), m.get("behavior")) {
        (Some(c), None) => Ok(BellData::Correlations(pair_matrix(c, "payload.correlations")?)),
        (None, Some(b)) => Ok(BellData::Behavior(norm.behavior(&mut indexed(b, &BEHAVIOR_ORDER, "payload.behavior")?)?)),
        _ => Err(CliError::schema("payload needs exactly one of \"correlations\" or \"behavior\"")),
    }
}

fn coefficients(v: &Value) -> CliResult<Pair> {
    match v.as_str() {
        Some("chsh") => Ok([[1.0, 1.0], [1.0, -1.0]]),
        Some(other) => Err(CliError::schema(format!("unknown named functional {other:?}"))),
        None => pair_matrix(v, "payload.coefficients"),
    }
}

fn parse_payload(kind: Kind, v: &Value, settings: &Settings, warnings: &mut Vec<String>) -> CliResult<Payload> {
    let mut norm = Normalizer { settings, warnings };
    let p = "payload";
    Ok(match kind {
        Kind::IvBounds => {
            let m = object(v, p, &["table"])?;
            let mut flat = indexed(field(m, "table", p)?, &TABLE_ORDER, "payload.table")?;
            Payload::IvBounds {
                table: norm.table(&mut flat)?,
            }
        }
        Kind::Chsh => Payload::Chsh(bell_data(object(v, p, &["correlations", "behavior"])?, &mut norm)?),
        Kind::Membership => {
            let m = object(v, p, &["behavior"])?;
            let mut flat = indexed(field(m, "behavior", p)?, &BEHAVIOR_ORDER, "payload.behavior")?;
            Payload::Membership {
                behavior: norm.behavior(&mut flat)?,
            }
        }
        Kind::Npa => {
            let m = object(v, p, &["coefficients"])?;
            Payload::Npa {
                coefficients: coefficients(field(m, "coefficients", p)?)?,
            }
        }
        Kind::Gap => {
            let m = object(v, p, &["coefficients", "behavior", "table"])?;
            match (m.get("coefficients"), m.get("behavior"), m.get("table")) {
                (Some(c), None, None) => Payload::Gap(GapData::Coefficients(coefficients(c)?)),
                (None, Some(b), None) => {
                    let mut flat = indexed(b, &BEHAVIOR_ORDER, "payload.behavior")?;
                    Payload::Gap(GapData::Behavior(norm.behavior(&mut flat)?))
                }
                (None, None, Some(t)) => {
                    let mut flat = indexed(t, &TABLE_ORDER, "payload.table")?;
                    Payload::Gap(GapData::Table(norm.table(&mut flat)?))
                }
                _ => return Err(CliError::schema("gap payload needs exactly one of coefficients, behavior, table")),
            }
        }
        Kind::Pns => {
            let m = object(v, p, &["experimental", "observational"])?;
            let e = object(field(m, "experimental", p)?, "payload.experimental", &["p_yx", "p_yxp"])?;
            let mut obs = indexed(field(m, "observational", p)?, &PAIR_ORDER, "payload.observational")?;
            Payload::Pns {
                p_yx: number(field(e, "p_yx", "payload.experimental")?, "p_yx")?,
                p_yxp: number(field(e, "p_yxp", "payload.experimental")?, "p_yxp")?,
                observational: norm.pair("observational joint", &mut obs)?,
            }
        }
        Kind::Manski => {
            let m = object(v, p, &["e1", "e0", "px1"])?;
            Payload::Manski {
                e1: number(field(m, "e1", p)?, "e1")?,
                e0: number(field(m, "e0", p)?, "e0")?,
                px1: number(field(m, "px1", p)?, "px1")?,
            }
        }
        Kind::Frechet => {
            let m = object(v, p, &["u", "v"])?;
            Payload::Frechet {
                u: number(field(m, "u", p)?, "u")?,
                v: number(field(m, "v", p)?, "v")?,
            }
        }
        Kind::Entropic => {
            let m = object(v, p, &["behavior", "settings", "entropy_vector", "joint"])?;
            match (m.get("behavior"), m.get("entropy_vector"), m.get("joint")) {
                (Some(b), None, None) => {
                    let mut flat = indexed(b, &BEHAVIOR_ORDER, "payload.behavior")?;
                    let behavior = norm.behavior(&mut flat)?;
                    let settings = match m.get("settings") {
                        Some(s) => norm.pair("settings distribution", &mut indexed(s, &PAIR_ORDER, "payload.settings")?)?,
                        None => uniform_settings(),
                    };
                    Payload::Entropic(EntropicData::Behavior { behavior, settings })
                }
                (None, Some(h), None) if !m.contains_key("settings") => {
                    let hm = object(h, "payload.entropy_vector", &["n", "h"])?;
                    Payload::Entropic(EntropicData::Vector {
                        n: integer(field(hm, "n", "payload.entropy_vector")?, "n")? as usize,
                        h: numbers(field(hm, "h", "payload.entropy_vector")?, "payload.entropy_vector.h")?,
                    })
                }
                (None, None, Some(j)) if !m.contains_key("settings") => {
                    let jm = object(j, "payload.joint", &["arities", "p"])?;
                    let arities = field(jm, "arities", "payload.joint")?
                        .as_array()
                        .ok_or_else(|| CliError::schema("payload.joint.arities must be an array"))?
                        .iter()
                        .map(|a| integer(a, "arity").map(|a| a as usize))
                        .collect::<CliResult<Vec<_>>>()?;
                    let mut p = numbers(field(jm, "p", "payload.joint")?, "payload.joint.p")?;
                    norm.blocks("joint distribution", &mut p, |_| 0, 1)?;
                    Payload::Entropic(EntropicData::Joint { arities, p })
                }
                _ => {
                    return Err(CliError::schema(
                        "entropic payload needs exactly one of behavior (+ optional settings), entropy_vector, joint",
                    ))
                }
            }
        }
        Kind::Audit => {
            let m = object(v, p, &["samples", "seed"])?;
            let samples = m.get("samples").map(|s| integer(s, "samples")).transpose()?.unwrap_or(50) as usize;
            if samples == 0 || samples > MAX_AUDIT_SAMPLES {
                return Err(CliError::schema(format!("samples must be in 1..={MAX_AUDIT_SAMPLES}")));
            }
            Payload::Audit {
                samples,
                seed: m.get("seed").map(|s| integer(s, "seed")).transpose()?.unwrap_or(0),
            }
        }
    })
}

impl Request {
    /// Parses a document. `kind` comes from the command line; a `"kind"` in the
    /// document must agree with it when both are present.
    pub fn from_value(doc: &Value, kind: Option<Kind>, overrides: &Overrides) -> CliResult<Parsed> {
        let m = object(doc, "request", &["schema", "kind", "payload", "options"])?;
        match m.get("schema").and_then(Value::as_u64) {
            Some(SCHEMA_VERSION) => {}
            Some(other) => return Err(CliError::schema(format!("unsupported schema version {other}"))),
            None => return Err(CliError::schema("missing or non-integer \"schema\" (expected 1)")),
        }
        let doc_kind = m
            .get("kind")
            .map(|k| {
                k.as_str()
                    .ok_or_else(|| CliError::schema("kind must be a string"))
                    .and_then(Kind::parse)
            })
            .transpose()?;
        let kind = match (kind, doc_kind) {
            (Some(a), Some(b)) if a != b => {
                return Err(CliError::schema(format!(
                    "command kind {} does not match document kind {}",
                    a.as_str(),
                    b.as_str()
                )))
            }
            (Some(k), _) | (None, Some(k)) => k,
            (None, None) => return Err(CliError::schema("no kind given")),
        };
        let settings = resolve_settings(m.get("options"), overrides)?;
        let mut warnings = Vec::new();
        let payload = parse_payload(kind, field(m, "payload", "request")?, &settings, &mut warnings)?;
        Ok(Parsed {
            request: Request { kind, payload, settings },
            warnings,
        })
    }

    pub fn parse(text: &str, kind: Option<Kind>, overrides: &Overrides) -> CliResult<Parsed> {
        let doc: Value = serde_json::from_str(text).map_err(|e| CliError::schema(format!("invalid JSON: {e}")))?;
        Self::from_value(&doc, kind, overrides)
    }

    /// Canonical document: canonical axis order, every option explicit.
    pub fn to_value(&self) -> Value {
        json!({
            "schema": SCHEMA_VERSION,
            "kind": self.kind.as_str(),
            "payload": self.payload.to_value(),
            "options": serde_json::to_value(&self.settings).expect("settings serialize"),
        })
    }
}

fn table_flat(t: &Table) -> Vec<f64> {
    t.iter().flatten().flatten().copied().collect()
}

fn behavior_flat(b: &BehaviorTable) -> Vec<f64> {
    b.iter().flatten().flatten().flatten().copied().collect()
}

fn pair_flat(p: &Pair) -> Vec<f64> {
    p.iter().flatten().copied().collect()
}

impl Payload {
    pub fn to_value(&self) -> Value {
        let behavior = |b: &BehaviorTable| indexed_value(&behavior_flat(b), &BEHAVIOR_ORDER);
        let table = |t: &Table| indexed_value(&table_flat(t), &TABLE_ORDER);
        match self {
            Payload::IvBounds { table: t } => json!({ "table": table(t) }),
            Payload::Chsh(BellData::Correlations(c)) => json!({ "correlations": c }),
            Payload::Chsh(BellData::Behavior(b)) | Payload::Membership { behavior: b } => json!({ "behavior": behavior(b) }),
            Payload::Npa { coefficients } | Payload::Gap(GapData::Coefficients(coefficients)) => {
                json!({ "coefficients": coefficients })
            }
            Payload::Gap(GapData::Behavior(b)) => json!({ "behavior": behavior(b) }),
            Payload::Gap(GapData::Table(t)) => json!({ "table": table(t) }),
            Payload::Pns {
                p_yx,
                p_yxp,
                observational,
            } => json!({
                "experimental": {"p_yx": p_yx, "p_yxp": p_yxp},
                "observational": indexed_value(&pair_flat(observational), &PAIR_ORDER),
            }),
            Payload::Manski { e1, e0, px1 } => json!({"e1": e1, "e0": e0, "px1": px1}),
            Payload::Frechet { u, v } => json!({"u": u, "v": v}),
            Payload::Entropic(EntropicData::Behavior { behavior: b, settings }) => json!({
                "behavior": behavior(b),
                "settings": indexed_value(&pair_flat(settings), &PAIR_ORDER),
            }),
            Payload::Entropic(EntropicData::Vector { n, h }) => json!({"entropy_vector": {"n": n, "h": h}}),
            Payload::Entropic(EntropicData::Joint { arities, p }) => json!({"joint": {"arities": arities, "p": p}}),
            Payload::Audit { samples, seed } => json!({"samples": samples, "seed": seed}),
        }
    }
}
