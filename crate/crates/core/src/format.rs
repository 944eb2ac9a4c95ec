//! JSON documents for MDP instances and loss sequences.
//!
//! MDP document:
//!
//! ```json
//! {
//!   "num_states": 2, "num_actions": 2, "horizon": 2, "initial_state": 0,
//!   "transitions": [/* H*S*A*S numbers, row-major over [h][s][a][s'] */]
//! }
//! ```
//!
//! Loss-sequence document, one table per episode:
//!
//! ```json
//! {
//!   "num_states": 2, "num_actions": 2, "horizon": 2,
//!   "losses": [[/* H*S*A numbers, row-major over [h][s][a] */], ...]
//! }
//! ```

use std::fs;
use std::path::Path;

use ndarray::{Array3, Array4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{Dims, LossTable, TabularMdp};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MdpDocument {
    pub num_states: usize,
    pub num_actions: usize,
    pub horizon: usize,
    pub initial_state: usize,
    pub transitions: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LossSequenceDocument {
    pub num_states: usize,
    pub num_actions: usize,
    pub horizon: usize,
    pub losses: Vec<Vec<f64>>,
}

impl MdpDocument {
    /// Shapes the flat table; the result is not yet validated.
    pub fn to_unchecked_mdp(&self) -> std::result::Result<TabularMdp, String> {
        let shape = (self.horizon, self.num_states, self.num_actions, self.num_states);
        let p = Array4::from_shape_vec(shape, self.transitions.clone()).map_err(|_| {
            format!(
                "transitions has {} entries, expected H*S*A*S = {}",
                self.transitions.len(),
                self.horizon * self.num_states * self.num_actions * self.num_states
            )
        })?;
        Ok(TabularMdp::new_unchecked(self.initial_state, p))
    }

    pub fn into_mdp(self) -> Result<TabularMdp> {
        let mdp = self.to_unchecked_mdp().map_err(Error::InvalidMdp)?;
        TabularMdp::new(mdp.initial_state(), mdp.transitions().clone())
    }
}

impl From<&TabularMdp> for MdpDocument {
    fn from(mdp: &TabularMdp) -> Self {
        Self {
            num_states: mdp.num_states(),
            num_actions: mdp.num_actions(),
            horizon: mdp.horizon(),
            initial_state: mdp.initial_state(),
            transitions: mdp.transitions().iter().copied().collect(),
        }
    }
}

impl LossSequenceDocument {
    pub fn from_tables(dims: Dims, tables: &[LossTable]) -> Self {
        Self {
            num_states: dims.num_states,
            num_actions: dims.num_actions,
            horizon: dims.horizon,
            losses: tables.iter().map(|t| t.values().iter().copied().collect()).collect(),
        }
    }

    pub fn dims(&self) -> Dims {
        Dims {
            horizon: self.horizon,
            num_states: self.num_states,
            num_actions: self.num_actions,
        }
    }

    pub fn into_tables(self) -> Result<Vec<LossTable>> {
        let shape = self.dims().shape3();
        self.losses
            .into_iter()
            .enumerate()
            .map(|(k, flat)| {
                let n = flat.len();
                let values = Array3::from_shape_vec(shape, flat).map_err(|_| {
                    Error::InvalidLoss(format!(
                        "episode {k}: {n} entries, expected H*S*A = {}",
                        shape.0 * shape.1 * shape.2
                    ))
                })?;
                LossTable::new(values)
            })
            .collect()
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("documents always serialize");
    text.push('\n');
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_mdp_document(path: &Path) -> Result<MdpDocument> {
    read_json(path)
}

pub fn read_mdp(path: &Path) -> Result<TabularMdp> {
    read_mdp_document(path)?.into_mdp()
}

pub fn write_mdp(path: &Path, mdp: &TabularMdp) -> Result<()> {
    write_json(path, &MdpDocument::from(mdp))
}

pub fn read_loss_sequence(path: &Path) -> Result<(Dims, Vec<LossTable>)> {
    let doc: LossSequenceDocument = read_json(path)?;
    let dims = doc.dims();
    Ok((dims, doc.into_tables()?))
}

pub fn write_loss_sequence(path: &Path, dims: Dims, tables: &[LossTable]) -> Result<()> {
    write_json(path, &LossSequenceDocument::from_tables(dims, tables))
}
