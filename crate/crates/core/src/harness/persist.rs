//! Text persistence for value tables and MDPs.
//!
//! Documents are flat `key = value` lines (valid TOML). Reals are written with
//! 17 significant digits, which is enough for every binary64 value to read
//! back bit-identically. Value tables end with a SHA-256 over the preceding
//! lines, checked on load.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::mdp::{KnownTask, TabularMdp, ValueSource, ValueTable};

/// A value table plus the task quantities needed to run inference on it.
/// The dynamics are deliberately absent.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredValueTable {
    pub table: ValueTable,
    pub gamma: f64,
    /// Row-major `r(s, a)`.
    pub reward: Vec<f64>,
}

impl StoredValueTable {
    pub fn new(table: ValueTable, gamma: f64, reward: Vec<f64>) -> Result<Self> {
        if reward.len() != table.num_states() * table.num_actions() {
            return Err(Error::Dimension {
                expected: format!("{} reward entries", table.num_states() * table.num_actions()),
                actual: reward.len().to_string(),
            });
        }
        crate::mdp::validate_gamma(gamma)?;
        Ok(Self { table, gamma, reward })
    }

    pub fn from_mdp(table: ValueTable, mdp: &TabularMdp) -> Result<Self> {
        Self::new(table, mdp.gamma(), mdp.rewards().to_vec())
    }
}

impl KnownTask for StoredValueTable {
    fn num_states(&self) -> usize {
        self.table.num_states()
    }
    fn num_actions(&self) -> usize {
        self.table.num_actions()
    }
    fn reward(&self, state: usize, action: usize) -> f64 {
        self.reward[state * self.table.num_actions() + action]
    }
    fn gamma(&self) -> f64 {
        self.gamma
    }
}

/// 17 significant digits.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_reals(xs: &[f64]) -> String {
    let body: Vec<String> = xs.iter().map(|&x| fmt_real(x)).collect();
    format!("[{}]", body.join(", "))
}

fn canonical_body(stored: &StoredValueTable) -> String {
    let t = &stored.table;
    let mut out = String::new();
    let _ = writeln!(out, "num_states = {}", t.num_states());
    let _ = writeln!(out, "num_actions = {}", t.num_actions());
    let _ = writeln!(out, "gamma = {}", fmt_real(stored.gamma));
    if let Some(eps) = t.certified_epsilon() {
        let _ = writeln!(out, "certified_epsilon = {}", fmt_real(eps));
    }
    let _ = writeln!(out, "source = \"{}\"", t.source().as_str());
    let _ = writeln!(out, "q = {}", fmt_reals(t.entries()));
    let _ = writeln!(out, "reward = {}", fmt_reals(&stored.reward));
    out
}

fn content_hash(body: &str) -> String {
    Sha256::digest(body.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Serializes a stored table, including its content hash.
pub fn value_table_document(stored: &StoredValueTable) -> String {
    let body = canonical_body(stored);
    let hash = content_hash(&body);
    format!("{body}content_hash = \"{hash}\"\n")
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ValueTableDoc {
    num_states: usize,
    num_actions: usize,
    gamma: f64,
    certified_epsilon: Option<f64>,
    source: String,
    q: Vec<f64>,
    reward: Vec<f64>,
    content_hash: String,
}

/// Parses a value-table document and checks its content hash. The returned
/// table keeps the source tag it was saved with.
pub fn parse_value_table(text: &str) -> Result<StoredValueTable> {
    let doc: ValueTableDoc = toml::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
    let source = doc.source.parse::<ValueSource>()?;
    let table = ValueTable::new(doc.num_states, doc.num_actions, doc.q, doc.certified_epsilon, source)?;
    let stored = StoredValueTable::new(table, doc.gamma, doc.reward)?;
    let computed = content_hash(&canonical_body(&stored));
    if computed != doc.content_hash {
        return Err(Error::Corruption {
            stored: doc.content_hash,
            computed,
        });
    }
    Ok(stored)
}

pub fn save_value_table(path: impl AsRef<Path>, stored: &StoredValueTable) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, value_table_document(stored)).map_err(|e| Error::io(path, e))
}

/// Loads and verifies a value table; the table's source becomes `loaded`.
pub fn load_value_table(path: impl AsRef<Path>) -> Result<StoredValueTable> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut stored = parse_value_table(&text)?;
    stored.table = stored.table.with_source(ValueSource::Loaded);
    Ok(stored)
}

pub fn mdp_document(mdp: &TabularMdp) -> String {
    let transitions: Vec<String> = mdp.transitions().iter().map(|t| t.to_string()).collect();
    format!(
        "num_states = {}\nnum_actions = {}\ngamma = {}\ntransition = [{}]\nreward = {}\n",
        mdp.num_states(),
        mdp.num_actions(),
        fmt_real(mdp.gamma()),
        transitions.join(", "),
        fmt_reals(mdp.rewards())
    )
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MdpDoc {
    num_states: usize,
    num_actions: usize,
    gamma: f64,
    transition: Vec<usize>,
    reward: Vec<f64>,
}

pub fn parse_mdp(text: &str) -> Result<TabularMdp> {
    let doc: MdpDoc = toml::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
    TabularMdp::new(doc.num_states, doc.num_actions, doc.transition, doc.reward, doc.gamma)
}

pub fn save_mdp(path: impl AsRef<Path>, mdp: &TabularMdp) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, mdp_document(mdp)).map_err(|e| Error::io(path, e))
}

pub fn load_mdp(path: impl AsRef<Path>) -> Result<TabularMdp> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_mdp(&text)
}
