//! JSON input files.

use std::path::Path;

use anyhow::{bail, Context};
use num_complex::Complex64;
use qpower::qap::QapInstance;
use qpower::qubo::{QuboInstance, Sense, VariableDomain};
use qpower::{AnyOperator, DenseOperator, DiagonalOperator};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuboFile {
    pub n: usize,
    pub linear: Vec<f64>,
    #[serde(default)]
    pub quadratic: Vec<(usize, usize, f64)>,
    #[serde(default)]
    pub sense: Option<Sense>,
    #[serde(default)]
    pub domain: Option<VariableDomain>,
}

impl QuboFile {
    /// Build the instance; `sense` overrides the file, and a missing sense
    /// defaults to maximization.
    pub fn into_instance(self, sense: Option<Sense>) -> anyhow::Result<QuboInstance> {
        let sense = sense.or(self.sense).unwrap_or(Sense::Maximize);
        let quadratic = self
            .quadratic
            .into_iter()
            .map(|(j, k, q)| if j > k { (k, j, q) } else { (j, k, q) })
            .collect();
        Ok(QuboInstance::with_domain(
            self.n,
            self.linear,
            quadratic,
            sense,
            self.domain.unwrap_or_default(),
        )?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QapFile {
    pub n: usize,
    #[serde(rename = "F")]
    pub f: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    pub d: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Option<Vec<Vec<f64>>>,
}

impl QapFile {
    pub fn into_instance(self) -> anyhow::Result<QapInstance> {
        let b = self.b.unwrap_or_else(|| vec![vec![0.0; self.n]; self.n]);
        let inst = QapInstance::new(self.f, self.d, b)?;
        if inst.n() != self.n {
            bail!(
                "declared n = {} but matrices are {}x{}",
                self.n,
                inst.n(),
                inst.n()
            );
        }
        Ok(inst)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DiagonalFile {
    n: usize,
    phases: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DenseFile {
    n: usize,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

/// A problem file is either a QUBO or a QAP.
pub enum Problem {
    Qubo(QuboFile),
    Qap(QapFile),
}

pub fn read_json(path: &Path) -> anyhow::Result<Value> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn read_qubo(path: &Path) -> anyhow::Result<QuboFile> {
    serde_json::from_value(read_json(path)?)
        .with_context(|| format!("{} is not a QUBO file", path.display()))
}

pub fn read_qap(path: &Path) -> anyhow::Result<QapFile> {
    serde_json::from_value(read_json(path)?)
        .with_context(|| format!("{} is not a QAP file", path.display()))
}

pub fn read_problem(path: &Path) -> anyhow::Result<Problem> {
    let v = read_json(path)?;
    if v.get("F").is_some() {
        Ok(Problem::Qap(
            serde_json::from_value(v).context("malformed QAP file")?,
        ))
    } else {
        Ok(Problem::Qubo(
            serde_json::from_value(v).context("malformed QUBO file")?,
        ))
    }
}

pub fn read_operator(path: &Path) -> anyhow::Result<AnyOperator> {
    let v = read_json(path)?;
    if v.get("phases").is_some() {
        let f: DiagonalFile =
            serde_json::from_value(v).context("malformed diagonal operator file")?;
        if f.phases.len() != 1usize.checked_shl(f.n as u32).unwrap_or(0) {
            bail!(
                "n = {} needs {} phases, found {}",
                f.n,
                1usize << f.n.min(63),
                f.phases.len()
            );
        }
        Ok(AnyOperator::Diagonal(DiagonalOperator::new(f.phases)?))
    } else if v.get("re").is_some() {
        let f: DenseFile = serde_json::from_value(v).context("malformed dense operator file")?;
        let dim = 1usize.checked_shl(f.n as u32).unwrap_or(0);
        if f.re.len() != dim || f.im.len() != dim {
            bail!("n = {} needs {dim} rows in re and im", f.n);
        }
        let mut entries = Vec::with_capacity(dim * dim);
        for (r, i) in f.re.iter().zip(&f.im) {
            if r.len() != dim || i.len() != dim {
                bail!("every row must have {dim} entries");
            }
            entries.extend(r.iter().zip(i).map(|(&a, &b)| Complex64::new(a, b)));
        }
        Ok(AnyOperator::Dense(DenseOperator::new(f.n, entries)?))
    } else {
        bail!(
            "{}: expected a \"phases\" or \"re\"/\"im\" operator file",
            path.display()
        )
    }
}
