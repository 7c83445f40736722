//! Instance documents, CSV tables with provenance headers, and manifests.
//!
//! Floats are written in the shortest form that round-trips exactly (never
//! more than 17 significant digits), so files reload bit-for-bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dist::{Label, MatchDistribution};
use crate::error::{MatchError, Result};
use crate::local::LocalRow;
use crate::model::{DensityLambda, PotentialV};
use crate::sampler::{ExactInstance, Marks, PartialInstance};

pub const SCHEMA_VERSION: u32 = 1;

/// Probabilities at or below this are omitted from marginal CSVs.
pub const PROB_FLOOR: f64 = 1e-15;

/// Version string stamped into every output file.
pub fn version_string() -> String {
    match option_env!("BAYESMATCH_GIT_DESCRIBE") {
        Some(d) => d.to_string(),
        None => format!("v{}", env!("CARGO_PKG_VERSION")),
    }
}

/// Shortest round-trip decimal; scientific notation outside `[1e-4, 1e15)`.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceKind {
    Exact,
    Partial,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceParams {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    pub potential: PotentialV,
    pub density: DensityLambda,
}

/// Latent bookkeeping of a partial instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkDoc {
    pub latent_count: usize,
    #[serde(flatten)]
    pub sets: Marks,
    pub pi_x: Vec<usize>,
    pub pi_y: Vec<usize>,
}

/// On-disk instance; `pi_star` uses `−1` for an unmatched X.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceDoc {
    pub schema_version: u32,
    pub kind: InstanceKind,
    pub params: InstanceParams,
    pub seed: u64,
    #[serde(rename = "X")]
    pub x: Vec<f64>,
    #[serde(rename = "Y")]
    pub y: Vec<f64>,
    pub pi_star: Vec<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marks: Option<MarkDoc>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Instance {
    Exact(ExactInstance),
    Partial(PartialInstance),
}

impl Instance {
    pub fn kind(&self) -> InstanceKind {
        match self {
            Instance::Exact(_) => InstanceKind::Exact,
            Instance::Partial(_) => InstanceKind::Partial,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            Instance::Exact(i) => i.n,
            Instance::Partial(i) => i.n,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            Instance::Exact(i) => i.seed,
            Instance::Partial(i) => i.seed,
        }
    }

    /// True labels of the X points.
    pub fn truth(&self) -> Vec<Label> {
        match self {
            Instance::Exact(i) => i.pi_star.iter().map(|&j| Label::Y(j as i64)).collect(),
            Instance::Partial(i) => i.pi_star.iter().map(|&t| t.into()).collect(),
        }
    }

    pub fn to_doc(&self) -> InstanceDoc {
        match self {
            Instance::Exact(i) => InstanceDoc {
                schema_version: SCHEMA_VERSION,
                kind: InstanceKind::Exact,
                params: InstanceParams {
                    n: i.n,
                    p: None,
                    potential: i.potential.clone(),
                    density: i.density.clone(),
                },
                seed: i.seed,
                x: i.x.clone(),
                y: i.y.clone(),
                pi_star: i.pi_star.iter().map(|&j| j as i64).collect(),
                marks: None,
            },
            Instance::Partial(i) => InstanceDoc {
                schema_version: SCHEMA_VERSION,
                kind: InstanceKind::Partial,
                params: InstanceParams {
                    n: i.n,
                    p: Some(i.p),
                    potential: i.potential.clone(),
                    density: i.density.clone(),
                },
                seed: i.seed,
                x: i.x.clone(),
                y: i.y.clone(),
                pi_star: i.pi_star.iter().map(|&t| Label::from(t).code()).collect(),
                marks: Some(MarkDoc {
                    latent_count: i.latent_count,
                    sets: i.marks.clone(),
                    pi_x: i.pi_x.clone(),
                    pi_y: i.pi_y.clone(),
                }),
            },
        }
    }

    pub fn from_doc(doc: InstanceDoc) -> Result<Self> {
        if doc.schema_version != SCHEMA_VERSION {
            return Err(MatchError::InvalidParameter(format!(
                "unsupported instance schema_version {}",
                doc.schema_version
            )));
        }
        let InstanceParams { n, p, potential, density } = doc.params;
        potential.validate()?;
        density.validate()?;
        match doc.kind {
            InstanceKind::Exact => {
                if doc.pi_star.iter().any(|&j| j < 0) {
                    return Err(MatchError::InvalidParameter("exact pi_star cannot contain −1".into()));
                }
                let mut inst = ExactInstance::from_data(
                    doc.x,
                    doc.y,
                    doc.pi_star.iter().map(|&j| j as usize).collect(),
                    potential,
                    density,
                )?;
                if inst.n != n {
                    return Err(MatchError::InvalidParameter(format!("params.n = {n} but {} points", inst.n)));
                }
                inst.seed = doc.seed;
                Ok(Instance::Exact(inst))
            }
            InstanceKind::Partial => {
                let p = p.ok_or_else(|| MatchError::InvalidParameter("partial instance needs params.p".into()))?;
                let pi = doc.pi_star.iter().map(|&j| (j >= 0).then_some(j as usize)).collect();
                let mut inst = PartialInstance::from_data(n, p, doc.x, doc.y, pi, potential, density)?;
                if let Some(m) = doc.marks {
                    inst.latent_count = m.latent_count;
                    inst.marks = m.sets;
                    inst.pi_x = m.pi_x;
                    inst.pi_y = m.pi_y;
                }
                inst.seed = doc.seed;
                inst.validate()?;
                Ok(Instance::Partial(inst))
            }
        }
    }
}

pub fn instance_to_json(inst: &Instance) -> Result<String> {
    Ok(serde_json::to_string_pretty(&inst.to_doc())? + "\n")
}

pub fn instance_from_json(text: &str) -> Result<Instance> {
    Instance::from_doc(serde_json::from_str(text)?)
}

pub fn read_instance(path: &Path) -> Result<Instance> {
    instance_from_json(&fs::read_to_string(path)?)
}

/// Writes the instance document and returns its SHA-256.
pub fn write_instance(path: &Path, inst: &Instance) -> Result<String> {
    let text = instance_to_json(inst)?;
    fs::write(path, &text)?;
    Ok(sha256_hex(text.as_bytes()))
}

/// Provenance lines embedded at the top of every output.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
}

impl Provenance {
    pub fn new(config_bytes: &[u8], seed: u64) -> Self {
        Provenance {
            config_hash: sha256_hex(config_bytes),
            seed,
            version: version_string(),
        }
    }
}

/// Prefix of the only line that may differ between identical runs.
pub const TIMESTAMP_PREFIX: &str = "# generated_at=";

/// In-memory CSV: mandatory header, comma-separated, LF line endings.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CsvTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        CsvTable {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push<S: ToString>(&mut self, row: impl IntoIterator<Item = S>) {
        let row: Vec<String> = row.into_iter().map(|c| c.to_string()).collect();
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Header and rows, without provenance.
    pub fn body(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }

    pub fn render(&self, prov: &Provenance) -> String {
        let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        format!(
            "# config_hash={}\n# seed={}\n# version={}\n{TIMESTAMP_PREFIX}{now}\n{}",
            prov.config_hash,
            prov.seed,
            prov.version,
            self.body()
        )
    }

    pub fn write(&self, path: &Path, prov: &Provenance) -> Result<()> {
        fs::write(path, self.render(prov))?;
        Ok(())
    }
}

/// Content of a rendered CSV without the timestamp line.
pub fn csv_body(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with(TIMESTAMP_PREFIX))
        .fold(String::new(), |mut s, l| {
            s.push_str(l);
            s.push('\n');
            s
        })
}

pub fn csv_body_hash(text: &str) -> String {
    sha256_hex(csv_body(text).as_bytes())
}

/// `(i, j, prob)` rows; `j = −1` encodes `∅`.
pub fn marginal_csv(rows: &[MatchDistribution]) -> CsvTable {
    let mut t = CsvTable::new(["i", "j", "prob"]);
    for (i, d) in rows.iter().enumerate() {
        for &(l, p) in d.entries() {
            if p > PROB_FLOOR {
                t.push([i.to_string(), l.code().to_string(), fmt_f64(p)]);
            }
        }
    }
    t
}

/// Local rows with an `engine_flag` column. Skipped rows have empty `j` and
/// `prob`.
pub fn local_csv(index: &[usize], rows: &[LocalRow]) -> CsvTable {
    let mut t = CsvTable::new(["i", "j", "prob", "engine_flag"]);
    for (&i, r) in index.iter().zip(rows) {
        match &r.dist {
            Some(d) => {
                for &(l, p) in d.entries() {
                    if p > PROB_FLOOR {
                        t.push([i.to_string(), l.code().to_string(), fmt_f64(p), r.flag.name().to_string()]);
                    }
                }
            }
            None => t.push([i.to_string(), String::new(), String::new(), r.flag.name().to_string()]),
        }
    }
    t
}

/// Side-car metadata of a marginal computation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalMeta {
    pub engine: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band: Option<usize>,
    pub runtime_s: f64,
    pub instance_seed: u64,
    #[serde(flatten)]
    pub provenance: Provenance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub kind: InstanceKind,
    pub n: usize,
    pub rep: usize,
    pub seed: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    #[serde(flatten)]
    pub provenance: Provenance,
    pub entries: Vec<ManifestEntry>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::{sample_exact_instance, sample_partial_instance};

    fn g() -> PotentialV {
        PotentialV::gaussian(1.0).unwrap()
    }

    #[test]
    fn exact_round_trip_is_bit_exact() {
        let inst = Instance::Exact(sample_exact_instance(&g(), &DensityLambda::Uniform, 9, 4).unwrap());
        let back = instance_from_json(&instance_to_json(&inst).unwrap()).unwrap();
        assert_eq!(back, inst);
    }

    #[test]
    fn partial_round_trip_keeps_marks() {
        let inst = Instance::Partial(sample_partial_instance(&g(), &DensityLambda::Uniform, 12, 0.5, 8).unwrap());
        let text = instance_to_json(&inst).unwrap();
        assert!(text.contains("\"marks\""));
        assert_eq!(instance_from_json(&text).unwrap(), inst);
    }

    #[test]
    fn schema_mismatch_rejected() {
        let inst = Instance::Exact(sample_exact_instance(&g(), &DensityLambda::Uniform, 3, 1).unwrap());
        let mut doc = inst.to_doc();
        doc.schema_version = 99;
        assert!(Instance::from_doc(doc).is_err());
    }

    #[test]
    fn body_excludes_timestamp() {
        let mut t = CsvTable::new(["a", "b"]);
        t.push([fmt_f64(1.5), fmt_f64(2.0)]);
        let prov = Provenance::new(b"{}", 3);
        let text = t.render(&prov);
        assert!(text.ends_with("a,b\n1.5,2\n"));
        assert!(!csv_body(&text).contains("generated_at"));
        assert!(csv_body(&text).contains("# seed=3"));
    }

    #[test]
    fn float_format_round_trips() {
        for v in [0.0, 1.0, 0.25, 4.289754464381262e-10, 1e-300, 123456.789, 3e20, -2.5e-7] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(4.289754464381262e-10), "4.289754464381262e-10");
    }

    #[test]
    fn marginal_rows_encode_unmatched() {
        let d = MatchDistribution::new(vec![(Label::Unmatched, 0.25), (Label::Y(2), 0.75), (Label::Y(3), 0.0)]).unwrap();
        assert_eq!(marginal_csv(&[d]).body(), "i,j,prob\n0,-1,0.25\n0,2,0.75\n");
    }
}
