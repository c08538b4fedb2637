//! Binary checkpoint format.
//!
//! ```text
//! "FUD1"                      magic
//! u32                         format version
//! [u8; 32]                    SHA-256 of the config JSON
//! u64 + bytes                 metadata JSON
//! u32                         tensor count
//! per tensor:
//!   u32 + bytes               name
//!   u32                       rank
//!   u64 × rank                dims
//!   f64 × product(dims)       values
//! [u8; 32]                    SHA-256 of everything above
//! ```
//!
//! All integers and floats are little-endian. Tensor names are
//! `<component>.<part>`, e.g. `host.bottom.emb.h3`, `host.top.1.weight`,
//! `guest.adam_m.4`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{Method, TrainConfig};
use super::model::{build_guest, build_host, LocalDnn};
use crate::data::FeatureSchema;
use crate::federation::{GuestParty, HostOptimizers, HostParty};
use crate::nn::{Mlp, OptimizerState, Parameterized, Tensor, Tower};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"FUD1";
const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Aligned-only training with the distillation loss.
    Step1,
    /// Paired aligned/unaligned training with a frozen transfer network.
    Step2,
    /// A baseline trained in one phase.
    Single,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Phase::Step1 => "step1",
            Phase::Step2 => "step2",
            Phase::Single => "single",
        })
    }
}

#[derive(Clone, Debug)]
pub enum Model {
    Federated { guest: GuestParty, host: HostParty },
    Local(LocalDnn),
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub method: Method,
    pub phase: Phase,
    pub config: TrainConfig,
    /// Epoch (0-based) whose parameters were kept.
    pub epoch: usize,
    /// Validation AUC after every epoch that ran.
    pub val_history: Vec<Option<f64>>,
    pub model: Model,
}

#[derive(Serialize, Deserialize)]
struct Meta {
    method: Method,
    phase: Phase,
    epoch: usize,
    val_history: Vec<Option<f64>>,
    config: TrainConfig,
    host_schema: FeatureSchema,
    guest_schema: Option<FeatureSchema>,
    has_rep: bool,
    rep_frozen: bool,
    optimizer_steps: BTreeMap<String, u64>,
}

#[derive(Clone, Debug)]
pub(crate) enum Params {
    Tower(Tower),
    Mlp(Mlp),
}

/// One trainable component with its optimizer state, in a uniform shape
/// for naming and copying tensors.
#[derive(Clone, Debug)]
pub(crate) struct Component {
    pub name: &'static str,
    pub params: Params,
    pub optimizer: OptimizerState,
}

impl Component {
    fn param_names(&self) -> Vec<String> {
        match &self.params {
            Params::Tower(t) => {
                let mut names: Vec<String> = t
                    .embeddings
                    .tables()
                    .iter()
                    .map(|tab| format!("{}.emb.{}", self.name, tab.slot))
                    .collect();
                names.extend(mlp_names(&format!("{}.mlp", self.name), &t.mlp));
                names
            }
            Params::Mlp(m) => mlp_names(self.name, m),
        }
    }

    fn named(&self) -> Vec<(String, &Tensor)> {
        let names = self.param_names();
        let params = match &self.params {
            Params::Tower(t) => t.parameters(),
            Params::Mlp(m) => m.parameters(),
        };
        let mut out: Vec<(String, &Tensor)> = names.into_iter().zip(params).collect();
        for (i, t) in self.optimizer.first_moment.iter().enumerate() {
            out.push((format!("{}.adam_m.{i}", self.name), t));
        }
        for (i, t) in self.optimizer.second_moment.iter().enumerate() {
            out.push((format!("{}.adam_v.{i}", self.name), t));
        }
        out
    }

    /// Parameters first, then optimizer moments when `with_optimizer`.
    fn named_mut(&mut self, with_optimizer: bool) -> Vec<(String, &mut Tensor)> {
        let names = self.param_names();
        let params = match &mut self.params {
            Params::Tower(t) => t.parameters_mut(),
            Params::Mlp(m) => m.parameters_mut(),
        };
        let mut out: Vec<(String, &mut Tensor)> = names.into_iter().zip(params).collect();
        if with_optimizer {
            for (i, t) in self.optimizer.first_moment.iter_mut().enumerate() {
                out.push((format!("{}.adam_m.{i}", self.name), t));
            }
            for (i, t) in self.optimizer.second_moment.iter_mut().enumerate() {
                out.push((format!("{}.adam_v.{i}", self.name), t));
            }
        }
        out
    }
}

fn mlp_names(prefix: &str, mlp: &Mlp) -> Vec<String> {
    (0..mlp.layers().len())
        .flat_map(|l| [format!("{prefix}.{l}.weight"), format!("{prefix}.{l}.bias")])
        .collect()
}

fn tower(c: Component) -> Result<(Tower, OptimizerState)> {
    match c.params {
        Params::Tower(t) => Ok((t, c.optimizer)),
        Params::Mlp(_) => Err(Error::Checkpoint(format!("component {} should be a tower", c.name))),
    }
}

fn mlp(c: Component) -> Result<(Mlp, OptimizerState)> {
    match c.params {
        Params::Mlp(m) => Ok((m, c.optimizer)),
        Params::Tower(_) => Err(Error::Checkpoint(format!("component {} should be an MLP", c.name))),
    }
}

impl Model {
    pub(crate) fn into_components(self) -> Vec<Component> {
        match self {
            Model::Federated { guest, host } => {
                let (_, g_tower, g_opt, _) = guest.into_parts();
                let (bottom, top, rep, opts) = host.into_parts();
                let mut v = vec![
                    Component { name: "guest", params: Params::Tower(g_tower), optimizer: g_opt },
                    Component { name: "host.bottom", params: Params::Tower(bottom), optimizer: opts.bottom },
                    Component { name: "host.top", params: Params::Mlp(top), optimizer: opts.top },
                ];
                if let (Some(r), Some(o)) = (rep, opts.rep) {
                    v.push(Component { name: "host.rep", params: Params::Mlp(r), optimizer: o });
                }
                v
            }
            Model::Local(l) => vec![
                Component { name: "local.body", params: Params::Tower(l.body), optimizer: l.body_optimizer },
                Component { name: "local.head", params: Params::Mlp(l.head), optimizer: l.head_optimizer },
            ],
        }
    }

    /// Reassemble a model from components produced by [`Self::into_components`].
    pub(crate) fn from_components(
        comps: Vec<Component>,
        host_schema: &FeatureSchema,
        guest_schema: Option<&FeatureSchema>,
        cfg: &TrainConfig,
        rep_frozen: bool,
    ) -> Result<Self> {
        let mut by_name: BTreeMap<&'static str, Component> = comps.into_iter().map(|c| (c.name, c)).collect();
        let mut take = |name: &str| {
            by_name
                .remove(name)
                .ok_or_else(|| Error::Checkpoint(format!("component {name} is missing")))
        };
        if let Some(gs) = guest_schema {
            let (g_tower, g_opt) = tower(take("guest")?)?;
            let (bottom, opt_bottom) = tower(take("host.bottom")?)?;
            let (top, opt_top) = mlp(take("host.top")?)?;
            let rep = take("host.rep").ok().map(mlp).transpose()?;
            let guest_rep_dim = g_tower.out_dim();
            let guest = GuestParty::new(gs.clone(), g_tower, g_opt, cfg.guest_update)?;
            let (rep, opt_rep) = match rep {
                Some((r, o)) => (Some(r), Some(o)),
                None => (None, None),
            };
            let mut host = HostParty::from_parts(
                host_schema.clone(),
                bottom,
                top,
                rep,
                guest_rep_dim,
                HostOptimizers { bottom: opt_bottom, top: opt_top, rep: opt_rep },
            )?;
            if rep_frozen {
                host.freeze_rep();
            }
            Ok(Model::Federated { guest, host })
        } else {
            let (body, body_optimizer) = tower(take("local.body")?)?;
            let (head, head_optimizer) = mlp(take("local.head")?)?;
            Ok(Model::Local(LocalDnn {
                schema: host_schema.clone(),
                body,
                head,
                body_optimizer,
                head_optimizer,
            }))
        }
    }
}

/// Freshly initialized components for `cfg`, used as the template every
/// load or warm start copies into.
pub(crate) fn template(
    method: Method,
    cfg: &TrainConfig,
    host_schema: &FeatureSchema,
    guest_schema: Option<&FeatureSchema>,
    with_rep: bool,
) -> Result<Vec<Component>> {
    let model = match (method, guest_schema) {
        (Method::LocalDnn, _) => Model::Local(LocalDnn::init(host_schema, cfg)?),
        (_, Some(gs)) => Model::Federated {
            guest: build_guest(gs, cfg)?,
            host: build_host(host_schema, cfg, with_rep)?,
        },
        (_, None) => return Err(Error::Checkpoint("federated model without a guest schema".into())),
    };
    Ok(model.into_components())
}

/// Copy every tensor of the components named in `only` (all when `None`)
/// from `src` into `dst`. Shapes must agree exactly.
pub(crate) fn transplant(
    dst: &mut [Component],
    src: &[Component],
    only: Option<&[&str]>,
    with_optimizer: bool,
) -> Result<()> {
    let source: BTreeMap<String, &Tensor> = src.iter().flat_map(Component::named).collect();
    for comp in dst.iter_mut() {
        if only.is_some_and(|o| !o.contains(&comp.name)) {
            continue;
        }
        for (name, t) in comp.named_mut(with_optimizer) {
            copy_into(&name, t, source.get(&name).copied())?;
        }
    }
    Ok(())
}

fn copy_into(name: &str, dst: &mut Tensor, src: Option<&Tensor>) -> Result<()> {
    let src = src.ok_or_else(|| Error::DimMismatch {
        component: name.to_string(),
        expected: format!("{:?}", dst.shape()),
        found: "absent".into(),
    })?;
    if src.shape() != dst.shape() {
        return Err(Error::DimMismatch {
            component: name.to_string(),
            expected: format!("{:?}", dst.shape()),
            found: format!("{:?}", src.shape()),
        });
    }
    dst.data_mut().copy_from_slice(src.data());
    Ok(())
}

impl Checkpoint {
    fn schemas(&self) -> (FeatureSchema, Option<FeatureSchema>) {
        match &self.model {
            Model::Federated { guest, host } => (host.schema().clone(), Some(guest.schema().clone())),
            Model::Local(l) => (l.schema.clone(), None),
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let (host_schema, guest_schema) = self.schemas();
        let (has_rep, rep_frozen) = match &self.model {
            Model::Federated { host, .. } => (host.rep().is_some(), host.rep_frozen()),
            Model::Local(_) => (false, false),
        };
        let comps = self.model.clone().into_components();
        let meta = Meta {
            method: self.method,
            phase: self.phase,
            epoch: self.epoch,
            val_history: self.val_history.clone(),
            config: self.config.clone(),
            host_schema,
            guest_schema,
            has_rep,
            rep_frozen,
            optimizer_steps: comps.iter().map(|c| (c.name.to_string(), c.optimizer.step)).collect(),
        };
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&Sha256::digest(serde_json::to_vec(&self.config)?));
        let meta = serde_json::to_vec(&meta)?;
        out.extend_from_slice(&(meta.len() as u64).to_le_bytes());
        out.extend_from_slice(&meta);
        let named: Vec<(String, &Tensor)> = comps.iter().flat_map(Component::named).collect();
        out.extend_from_slice(&(named.len() as u32).to_le_bytes());
        for (name, t) in named {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
            for &d in t.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            out.extend_from_slice(&t.to_le_bytes());
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MAGIC.len() + 4 + 32 + 32 {
            return Err(Error::Checkpoint("file is truncated".into()));
        }
        if &bytes[..4] != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint (bad magic)".into()));
        }
        let (body, digest) = bytes.split_at(bytes.len() - 32);
        let mut r = Reader { buf: body, pos: 4 };
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported format version {version}")));
        }
        if Sha256::digest(body).as_slice() != digest {
            return Err(Error::Checkpoint("integrity digest mismatch (corrupt or truncated file)".into()));
        }
        let config_digest = r.take(32)?.to_vec();
        let meta_len = r.u64()? as usize;
        let meta: Meta = serde_json::from_slice(r.take(meta_len)?)
            .map_err(|e| Error::Checkpoint(format!("bad metadata: {e}")))?;
        if Sha256::digest(serde_json::to_vec(&meta.config)?).as_slice() != config_digest.as_slice() {
            return Err(Error::Checkpoint("config digest does not match the stored config".into()));
        }
        let count = r.u32()? as usize;
        let mut stored: Vec<(String, Tensor)> = Vec::with_capacity(count);
        for _ in 0..count {
            let name_len = r.u32()? as usize;
            let name = String::from_utf8(r.take(name_len)?.to_vec())
                .map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?;
            let rank = r.u32()? as usize;
            let shape = (0..rank).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let n: usize = shape.iter().product();
            let raw = r.take(n.checked_mul(8).ok_or_else(|| Error::Checkpoint("tensor too large".into()))?)?;
            let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
            let t = Tensor::new(shape, data).map_err(|e| Error::Checkpoint(format!("tensor {name}: {e}")))?;
            stored.push((name, t));
        }
        if r.pos != body.len() {
            return Err(Error::Checkpoint("trailing bytes after the tensor table".into()));
        }

        let mut comps = template(
            meta.method,
            &meta.config,
            &meta.host_schema,
            meta.guest_schema.as_ref(),
            meta.has_rep,
        )?;
        let source: BTreeMap<&str, &Tensor> = stored.iter().map(|(n, t)| (n.as_str(), t)).collect();
        let mut used = 0;
        for comp in comps.iter_mut() {
            comp.optimizer.step = meta.optimizer_steps.get(comp.name).copied().unwrap_or(0);
            for (name, t) in comp.named_mut(true) {
                copy_into(&name, t, source.get(name.as_str()).copied())?;
                used += 1;
            }
        }
        if used != stored.len() {
            return Err(Error::Checkpoint(format!(
                "{} stored tensors are not part of the model",
                stored.len() - used
            )));
        }
        let model = Model::from_components(
            comps,
            &meta.host_schema,
            meta.guest_schema.as_ref(),
            &meta.config,
            meta.rep_frozen,
        )?;
        Ok(Self {
            method: meta.method,
            phase: meta.phase,
            config: meta.config,
            epoch: meta.epoch,
            val_history: meta.val_history,
            model,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Checkpoint("file is truncated".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
