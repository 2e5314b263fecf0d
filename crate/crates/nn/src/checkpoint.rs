use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::NnError;
use crate::mlp::{Mlp, MlpSpec};
use crate::policy::GaussianPolicy;

pub const CHECKPOINT_VERSION: u32 = 1;

/// Serialized network weights. JSON with shortest-round-trip floats, so a
/// save/load cycle reproduces every parameter bit for bit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    #[serde(flatten)]
    pub payload: NetPayload,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NetPayload {
    Mlp { spec: MlpSpec, params: Vec<f64> },
    GaussianPolicy { spec: MlpSpec, action_dim: usize, params: Vec<f64> },
}

impl Checkpoint {
    pub fn of_mlp(net: &Mlp) -> Self {
        Self {
            format_version: CHECKPOINT_VERSION,
            payload: NetPayload::Mlp { spec: net.spec().clone(), params: net.params().to_vec() },
        }
    }

    pub fn of_policy(policy: &GaussianPolicy) -> Self {
        Self {
            format_version: CHECKPOINT_VERSION,
            payload: NetPayload::GaussianPolicy {
                spec: policy.net().spec().clone(),
                action_dim: policy.action_dim(),
                params: policy.net().params().to_vec(),
            },
        }
    }

    fn validate(&self) -> Result<(), NnError> {
        if self.format_version != CHECKPOINT_VERSION {
            return Err(NnError::CheckpointVersion {
                expected: CHECKPOINT_VERSION,
                got: self.format_version,
            });
        }
        let params = match &self.payload {
            NetPayload::Mlp { params, .. } => params,
            NetPayload::GaussianPolicy { params, .. } => params,
        };
        if params.iter().any(|p| !p.is_finite()) {
            return Err(NnError::NonFiniteParams);
        }
        Ok(())
    }

    pub fn into_mlp(self) -> Result<Mlp, NnError> {
        self.validate()?;
        match self.payload {
            NetPayload::Mlp { spec, params } => Mlp::from_params(spec, params),
            NetPayload::GaussianPolicy { .. } => {
                Err(NnError::CheckpointMismatch("expected a plain network, found a policy".into()))
            }
        }
    }

    pub fn into_policy(self) -> Result<GaussianPolicy, NnError> {
        self.validate()?;
        match self.payload {
            NetPayload::GaussianPolicy { spec, action_dim, params } => {
                GaussianPolicy::from_net(Mlp::from_params(spec, params)?, action_dim)
            }
            NetPayload::Mlp { .. } => {
                Err(NnError::CheckpointMismatch("expected a policy, found a plain network".into()))
            }
        }
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<(), NnError> {
        let mut w = BufWriter::new(w);
        serde_json::to_writer(&mut w, self)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self, NnError> {
        let ckpt: Checkpoint = serde_json::from_reader(BufReader::new(r))?;
        ckpt.validate()?;
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<(), NnError> {
        self.write_to(fs::File::create(path)?)
    }

    pub fn load(path: &Path) -> Result<Self, NnError> {
        Self::read_from(fs::File::open(path)?)
    }
}
