//! Dataset ingestion (IDX image/label files), chain trace persistence
//! (CSV and a small binary ensemble format), and experiment config parsing.
//!
//! IDX numbers are big-endian regardless of host. Trace floats are written
//! with 17 significant digits so a write→read round trip is bit-exact.

use std::collections::BTreeMap;
use std::fmt::Write as FmtWrite;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use crate::bnn::PriorSpec;
use crate::core::{
    validate_config, ChainRecord, ControllerConfig, EnsembleMember, Error, ParameterVector,
    Result, SamplerConfig,
};
use crate::potentials::Potential;

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

/// A classification dataset: one image per row (raw bytes 0..=255) plus a
/// label per image. Counts always match and every label is below 10.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledImageSet {
    pub images: Array2<u8>,
    pub labels: Vec<u8>,
}

impl LabeledImageSet {
    pub fn new(images: Array2<u8>, labels: Vec<u8>) -> Result<Self> {
        if images.nrows() != labels.len() {
            return Err(Error::Shape(format!(
                "{} images but {} labels",
                images.nrows(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= 10) {
            return Err(Error::Check(format!("label {bad} out of range 0..10")));
        }
        Ok(Self { images, labels })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn pixels(&self) -> usize {
        self.images.ncols()
    }

    /// Keeps the first `n` examples (useful for desk-scale subsets).
    pub fn truncate(&self, n: usize) -> Result<Self> {
        if n > self.n() {
            return Err(Error::Shape(format!(
                "cannot take {n} examples from a set of {}",
                self.n()
            )));
        }
        Self::new(
            self.images.slice(ndarray::s![..n, ..]).to_owned(),
            self.labels[..n].to_vec(),
        )
    }
}

fn read_u32_be(bytes: &[u8], pos: usize, what: &str) -> Result<u32> {
    let end = pos + 4;
    if bytes.len() < end {
        return Err(Error::Idx(format!("truncated header while reading {what}")));
    }
    Ok(u32::from_be_bytes(bytes[pos..end].try_into().unwrap()))
}

/// Reads an IDX image file: magic 0x00000803, then big-endian counts
/// (N, rows, cols), then N·rows·cols raw bytes. The byte length must agree
/// with the declared sizes exactly.
pub fn load_idx_images(path: &Path) -> Result<Array2<u8>> {
    let bytes = fs::read(path)?;
    let magic = read_u32_be(&bytes, 0, "magic")?;
    if magic != IMAGE_MAGIC {
        return Err(Error::Idx(format!(
            "wrong magic {magic:#010x}, image files start with {IMAGE_MAGIC:#010x}"
        )));
    }
    let n = read_u32_be(&bytes, 4, "image count")? as u64;
    let rows = read_u32_be(&bytes, 8, "row count")? as u64;
    let cols = read_u32_be(&bytes, 12, "column count")? as u64;
    let payload = n
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or_else(|| Error::Idx("declared dimensions overflow".into()))?;
    let expected = 16u64 + payload;
    if bytes.len() as u64 != expected {
        return Err(Error::Idx(format!(
            "file is {} bytes but the header declares {expected}",
            bytes.len()
        )));
    }
    let pixels = usize::try_from(rows * cols)
        .map_err(|_| Error::Idx("image size exceeds addressable memory".into()))?;
    let n = usize::try_from(n).map_err(|_| Error::Idx("image count overflow".into()))?;
    Array2::from_shape_vec((n, pixels), bytes[16..].to_vec())
        .map_err(|e| Error::Idx(format!("shape error: {e}")))
}

/// Reads an IDX label file: magic 0x00000801, big-endian N, then N bytes,
/// each below 10.
pub fn load_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let bytes = fs::read(path)?;
    let magic = read_u32_be(&bytes, 0, "magic")?;
    if magic != LABEL_MAGIC {
        return Err(Error::Idx(format!(
            "wrong magic {magic:#010x}, label files start with {LABEL_MAGIC:#010x}"
        )));
    }
    let n = read_u32_be(&bytes, 4, "label count")? as u64;
    if bytes.len() as u64 != 8 + n {
        return Err(Error::Idx(format!(
            "file is {} bytes but the header declares {}",
            bytes.len(),
            8 + n
        )));
    }
    let labels = bytes[8..].to_vec();
    if let Some(&bad) = labels.iter().find(|&&l| l >= 10) {
        return Err(Error::Idx(format!("label {bad} out of range 0..10")));
    }
    Ok(labels)
}

/// Writes an IDX image file (inverse of `load_idx_images`).
pub fn write_idx_images(images: &Array2<u8>, rows: u32, cols: u32, path: &Path) -> Result<()> {
    if images.ncols() != (rows as usize) * (cols as usize) {
        return Err(Error::Shape(format!(
            "{} pixels per row but {rows}x{cols} requested",
            images.ncols()
        )));
    }
    let mut bytes = Vec::with_capacity(16 + images.len());
    bytes.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
    bytes.extend_from_slice(&(images.nrows() as u32).to_be_bytes());
    bytes.extend_from_slice(&rows.to_be_bytes());
    bytes.extend_from_slice(&cols.to_be_bytes());
    for row in images.rows() {
        bytes.extend(row.iter());
    }
    fs::write(path, bytes)?;
    Ok(())
}

/// Writes an IDX label file (inverse of `load_idx_labels`).
pub fn write_idx_labels(labels: &[u8], path: &Path) -> Result<()> {
    if let Some(&bad) = labels.iter().find(|&&l| l >= 10) {
        return Err(Error::Check(format!("label {bad} out of range 0..10")));
    }
    let mut bytes = Vec::with_capacity(8 + labels.len());
    bytes.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    bytes.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    bytes.extend_from_slice(labels);
    fs::write(path, bytes)?;
    Ok(())
}

/// Loads a matching image/label pair into one validated set.
pub fn load_image_set(images_path: &Path, labels_path: &Path) -> Result<LabeledImageSet> {
    LabeledImageSet::new(load_idx_images(images_path)?, load_idx_labels(labels_path)?)
}

/// 17 significant digits: enough for an exact f64 round trip.
pub(crate) fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes chain records as CSV: `step,dt,zeta,potential` plus
/// `theta_0..theta_{d-1}` columns when every record carries a snapshot of
/// dimension at most 4. Floats use 17 significant digits, so output bytes
/// are deterministic and parse back exactly.
pub fn write_trace(records: &[ChainRecord], path: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(Error::Check("refusing to write an empty trace".into()));
    }
    let theta_dim = match records[0].theta.as_ref() {
        Some(t) if t.dim() <= 4 && records.iter().all(|r| {
            r.theta.as_ref().map(|v| v.dim()) == Some(t.dim())
        }) =>
        {
            Some(t.dim())
        }
        _ => None,
    };
    let mut out = String::new();
    out.push_str("step,dt,zeta,potential");
    if let Some(d) = theta_dim {
        for i in 0..d {
            let _ = write!(out, ",theta_{i}");
        }
    }
    out.push('\n');
    for r in records {
        let _ = write!(
            out,
            "{},{},{},{}",
            r.step,
            fmt_float(r.dt),
            fmt_float(r.zeta),
            fmt_float(r.potential)
        );
        if theta_dim.is_some() {
            for v in r.theta.as_ref().unwrap().as_slice() {
                let _ = write!(out, ",{}", fmt_float(*v));
            }
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Parses a trace CSV produced by `write_trace`.
pub fn read_trace(path: &Path) -> Result<Vec<ChainRecord>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty trace file".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 4 || cols[..4] != ["step", "dt", "zeta", "potential"] {
        return Err(Error::Parse(format!("unexpected trace header '{header}'")));
    }
    for (i, name) in cols[4..].iter().enumerate() {
        if *name != format!("theta_{i}") {
            return Err(Error::Parse(format!("unexpected trace column '{name}'")));
        }
    }
    let dim = cols.len() - 4;
    let mut records = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(Error::Parse(format!(
                "line {}: {} fields, header has {}",
                lineno + 2,
                fields.len(),
                cols.len()
            )));
        }
        let step: u64 = fields[0]
            .parse()
            .map_err(|e| Error::Parse(format!("line {}: step: {e}", lineno + 2)))?;
        let mut nums = [0.0; 3];
        for (slot, raw) in nums.iter_mut().zip(&fields[1..4]) {
            *slot = raw
                .parse()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 2)))?;
        }
        let theta = if dim > 0 {
            let mut values = Vec::with_capacity(dim);
            for raw in &fields[4..] {
                values.push(
                    raw.parse()
                        .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 2)))?,
                );
            }
            Some(ParameterVector::new(values))
        } else {
            None
        };
        records.push(ChainRecord {
            step,
            theta,
            dt: nums[0],
            zeta: nums[1],
            potential: nums[2],
        });
    }
    Ok(records)
}

const ENSEMBLE_MAGIC: &[u8; 4] = b"SAEN";
const ENSEMBLE_VERSION: u32 = 1;

/// Persists posterior snapshots as flat binary vectors: a small header
/// (magic, version, dim, count) followed by one (step, Δt weight, θ) block
/// per member, all little-endian.
pub fn write_ensemble(members: &[EnsembleMember], path: &Path) -> Result<()> {
    let dim = match members.first() {
        None => return Err(Error::Check("refusing to write an empty ensemble".into())),
        Some(m) => m.theta.dim(),
    };
    if dim == 0 || members.iter().any(|m| m.theta.dim() != dim) {
        return Err(Error::Shape("ensemble members must share a nonzero dim".into()));
    }
    let mut bytes = Vec::with_capacity(24 + members.len() * (16 + 8 * dim));
    bytes.extend_from_slice(ENSEMBLE_MAGIC);
    bytes.extend_from_slice(&ENSEMBLE_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(dim as u64).to_le_bytes());
    bytes.extend_from_slice(&(members.len() as u64).to_le_bytes());
    for m in members {
        bytes.extend_from_slice(&m.step.to_le_bytes());
        bytes.extend_from_slice(&m.weight_dt.to_le_bytes());
        for v in m.theta.as_slice() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, bytes)?;
    Ok(())
}

/// Reads an ensemble file written by `write_ensemble`.
pub fn read_ensemble(path: &Path) -> Result<Vec<EnsembleMember>> {
    let bytes = fs::read(path)?;
    if bytes.len() < 24 || &bytes[..4] != ENSEMBLE_MAGIC {
        return Err(Error::Parse("not an ensemble file".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != ENSEMBLE_VERSION {
        return Err(Error::Parse(format!("unsupported ensemble version {version}")));
    }
    let dim = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
    let member_bytes = 16 + 8 * dim;
    let expected = 24 + count
        .checked_mul(member_bytes)
        .ok_or_else(|| Error::Parse("ensemble size overflow".into()))?;
    if bytes.len() != expected {
        return Err(Error::Parse(format!(
            "file is {} bytes but the header declares {expected}",
            bytes.len()
        )));
    }
    let mut members = Vec::with_capacity(count);
    let mut pos = 24;
    for _ in 0..count {
        let step = u64::from_le_bytes(bytes[pos..pos + 8].try_into().unwrap());
        let weight_dt = f64::from_le_bytes(bytes[pos + 8..pos + 16].try_into().unwrap());
        let mut values = Vec::with_capacity(dim);
        for k in 0..dim {
            let at = pos + 16 + 8 * k;
            values.push(f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap()));
        }
        members.push(EnsembleMember {
            step,
            weight_dt,
            theta: ParameterVector::new(values),
        });
        pos += member_bytes;
    }
    Ok(members)
}

/// Which sampler(s) an invocation runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerChoice {
    Sgld,
    Sasgld,
    Both,
}

impl SamplerChoice {
    pub fn from_id(id: &str) -> Result<Self> {
        match id {
            "sgld" => Ok(SamplerChoice::Sgld),
            "sasgld" => Ok(SamplerChoice::Sasgld),
            "both" => Ok(SamplerChoice::Both),
            other => Err(Error::Config(vec![format!(
                "sampler must be sgld, sasgld or both, got '{other}'"
            )])),
        }
    }

    pub fn kinds(&self) -> Vec<crate::samplers::SamplerKind> {
        use crate::samplers::SamplerKind;
        match self {
            SamplerChoice::Sgld => vec![SamplerKind::Sgld],
            SamplerChoice::Sasgld => vec![SamplerKind::Sasgld],
            SamplerChoice::Both => vec![SamplerKind::Sgld, SamplerKind::Sasgld],
        }
    }
}

/// Classifier-target settings (architecture, prior, dataset selection).
#[derive(Debug, Clone, PartialEq)]
pub struct BnnTargetSpec {
    /// Hidden layer widths; input 784 and output 10 are implied.
    pub hidden: Vec<usize>,
    pub prior: PriorSpec,
    /// Directory holding IDX files; when absent the harness generates its
    /// bundled synthetic dataset.
    pub data_dir: Option<PathBuf>,
    pub n_train: usize,
    pub n_test: usize,
}

/// What the chain samples from.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetSpec {
    Toy(Potential),
    Bnn(BnnTargetSpec),
}

impl TargetSpec {
    pub fn id(&self) -> String {
        match self {
            TargetSpec::Toy(p) => p.id().to_string(),
            TargetSpec::Bnn(_) => "bnn".to_string(),
        }
    }
}

/// A fully validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub sampler: SamplerChoice,
    pub target: TargetSpec,
    pub chain: SamplerConfig,
    pub controller: ControllerConfig,
    /// Seeds to run; defaults to `[chain.seed]`.
    pub seeds: Vec<u64>,
    pub batch_size: usize,
    pub out_dir: Option<PathBuf>,
}

const KNOWN_KEYS: &[&str] = &[
    "sampler", "target", "potential", "prior", "n_steps", "dtau", "beta", "alpha", "r", "s",
    "m", "M_upper", "delta", "batch_size", "thinning", "burn_in", "seed", "out_dir", "data_dir",
    "n_train", "n_test", "hidden", "tau", "sigma_p", "seeds",
];

struct KeyMap {
    entries: BTreeMap<String, String>,
    errors: Vec<String>,
}

impl KeyMap {
    fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str, default: T) -> T
    where
        T::Err: std::fmt::Display,
    {
        match self.take(key) {
            None => default,
            Some(raw) => match raw.parse() {
                Ok(v) => v,
                Err(e) => {
                    self.errors.push(format!("key '{key}': {e}"));
                    default
                }
            },
        }
    }

    fn parse_list<T: std::str::FromStr>(&mut self, key: &str) -> Option<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.take(key)?;
        let mut out = Vec::new();
        for piece in raw.split(',') {
            match piece.trim().parse() {
                Ok(v) => out.push(v),
                Err(e) => {
                    self.errors.push(format!("key '{key}': '{}': {e}", piece.trim()));
                    return None;
                }
            }
        }
        Some(out)
    }
}

fn key_map(text: &str) -> KeyMap {
    let mut entries = BTreeMap::new();
    let mut errors = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            errors.push(format!("line {}: expected 'key = value'", lineno + 1));
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        if !KNOWN_KEYS.contains(&key) {
            errors.push(format!("unknown key '{key}'"));
            continue;
        }
        if entries.insert(key.to_string(), value.to_string()).is_some() {
            errors.push(format!("duplicate key '{key}'"));
        }
    }
    KeyMap { entries, errors }
}

/// Parses a `key = value` experiment config. Unknown keys are errors, all
/// violations are reported together, and per-target defaults fill in the
/// controller settings.
pub fn parse_experiment_config(path: &Path) -> Result<ExperimentConfig> {
    parse_experiment_config_str(&fs::read_to_string(path)?)
}

pub fn parse_experiment_config_str(text: &str) -> Result<ExperimentConfig> {
    let mut map = key_map(text);

    let target_raw = match (map.take("target"), map.take("potential")) {
        (Some(_), Some(_)) => {
            map.errors
                .push("'target' and 'potential' are aliases, set only one".into());
            None
        }
        (Some(t), None) | (None, Some(t)) => Some(t),
        (None, None) => {
            map.errors.push("missing required key 'target'".into());
            None
        }
    };

    let sampler = match map.take("sampler") {
        None => SamplerChoice::Both,
        Some(raw) => match SamplerChoice::from_id(&raw) {
            Ok(choice) => choice,
            Err(Error::Config(mut msgs)) => {
                map.errors.append(&mut msgs);
                SamplerChoice::Both
            }
            Err(e) => return Err(e),
        },
    };

    // Per-target controller and schedule defaults. The toy rows keep the
    // monitor responsive on the curvature scale of each landscape; the bnn
    // row is sized for gradients of a full-dataset posterior, where the
    // useful stepsizes sit four orders of magnitude below the toy ones.
    struct Defaults {
        alpha: f64,
        r: f64,
        s: f64,
        m: f64,
        m_upper: f64,
        dtau: f64,
        thinning: u64,
    }
    let defaults = match target_raw.as_deref() {
        Some("star") => Defaults {
            alpha: 0.5,
            r: 0.5,
            s: 2.0,
            m: 5e-4,
            m_upper: 0.1,
            dtau: 0.1,
            thinning: 1,
        },
        Some("muller_brown") => Defaults {
            alpha: 0.07,
            r: 0.25,
            s: 2.0,
            m: 1e-3,
            m_upper: 1e-2,
            dtau: 1.0,
            thinning: 1,
        },
        Some("bnn") => Defaults {
            alpha: 5000.0,
            r: 1.0,
            s: 1e-8,
            m: 1e-4,
            m_upper: 1.25,
            dtau: 1.8e-4,
            thinning: 10,
        },
        _ => Defaults {
            alpha: 1.0,
            r: 1.0,
            s: 1.0,
            m: 0.5,
            m_upper: 2.0,
            dtau: 0.1,
            thinning: 1,
        },
    };

    let n_steps: u64 = map.parse("n_steps", 10_000);
    let chain = SamplerConfig {
        dtau: map.parse("dtau", defaults.dtau),
        beta: map.parse("beta", 1.0),
        seed: map.parse("seed", 0),
        n_steps,
        thinning: map.parse("thinning", defaults.thinning),
        burn_in: map.parse("burn_in", n_steps / 2),
    };
    let controller = ControllerConfig {
        alpha: map.parse("alpha", defaults.alpha),
        r: map.parse("r", defaults.r),
        s: map.parse("s", defaults.s),
        m: map.parse("m", defaults.m),
        m_upper: map.parse("M_upper", defaults.m_upper),
        delta: map.parse("delta", 1e-8),
    };
    let batch_size: usize = map.parse("batch_size", 100);
    let seeds: Vec<u64> = map
        .parse_list("seeds")
        .unwrap_or_else(|| vec![chain.seed]);
    let out_dir = map.take("out_dir").map(PathBuf::from);

    let bnn_keys = ["prior", "tau", "sigma_p", "hidden", "data_dir", "n_train", "n_test"];
    let target = match target_raw.as_deref() {
        Some("bnn") => {
            let prior = match map.take("prior").as_deref() {
                None | Some("horseshoe") => PriorSpec::Horseshoe {
                    tau: map.parse("tau", 0.1),
                },
                Some("gaussian") => PriorSpec::Gaussian {
                    sigma_p: map.parse("sigma_p", 1.0),
                },
                Some(other) => {
                    map.errors
                        .push(format!("prior must be horseshoe or gaussian, got '{other}'"));
                    PriorSpec::Horseshoe { tau: 0.1 }
                }
            };
            Some(TargetSpec::Bnn(BnnTargetSpec {
                hidden: map.parse_list("hidden").unwrap_or_else(|| vec![32]),
                prior,
                data_dir: map.take("data_dir").map(PathBuf::from),
                n_train: map.parse("n_train", 5000),
                n_test: map.parse("n_test", 1000),
            }))
        }
        Some(name) => {
            for key in bnn_keys {
                if map.take(key).is_some() {
                    map.errors
                        .push(format!("key '{key}' only applies to target = bnn"));
                }
            }
            match Potential::from_id(name) {
                Ok(p) => Some(TargetSpec::Toy(p)),
                Err(_) => {
                    map.errors.push(format!(
                        "target must be muller_brown, star, quadratic, double_well or bnn, got '{name}'"
                    ));
                    None
                }
            }
        }
        None => None,
    };

    let mut errors = std::mem::take(&mut map.errors);
    if let Err(mut msgs) = validate_config(&chain, &controller) {
        errors.append(&mut msgs);
    }
    if batch_size == 0 {
        errors.push("batch_size must be positive".into());
    }
    if seeds.is_empty() {
        errors.push("seeds must not be empty".into());
    }
    if let Some(TargetSpec::Bnn(spec)) = &target {
        if spec.hidden.is_empty() || spec.hidden.iter().any(|&w| w == 0) {
            errors.push("hidden must list positive layer widths".into());
        }
        if spec.n_train == 0 || spec.n_test == 0 {
            errors.push("n_train and n_test must be positive".into());
        }
        if let Err(Error::Config(msgs)) = spec.prior.validate() {
            errors.extend(msgs);
        }
    }
    if !errors.is_empty() {
        return Err(Error::Config(errors));
    }
    Ok(ExperimentConfig {
        sampler,
        target: target.expect("target errors already reported"),
        chain,
        controller,
        seeds,
        batch_size,
        out_dir,
    })
}
