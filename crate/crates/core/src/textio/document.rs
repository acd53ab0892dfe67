use std::collections::BTreeMap;

use thiserror::Error;

use crate::checker::Mode;
use crate::distributions::{DelayCdf, Tick};
use crate::model::transform::flag_name;
use crate::model::{
    prtesm_to_pta, GuardStyle, NetworkError, Prtesm, PtaNetwork, StateExpr, TransformError, TransformOptions,
};
use crate::prob::Prob;
use crate::sim::ScenarioConfig;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NamedDistribution {
    pub name: String,
    pub cdf: DelayCdf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionBinding {
    pub pin: String,
    /// Distribution name; falls back to the transition's own annotation.
    pub delay: Option<String>,
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModuleBinding {
    pub machine: String,
    pub id: String,
    /// Ids of modules whose flags arm this one.
    pub after: Vec<String>,
    pub done: Option<String>,
    pub actions: Vec<ActionBinding>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkSpec {
    pub name: Option<String>,
    pub timing: GuardStyle,
    pub modules: Vec<ModuleBinding>,
    pub target: Option<StateExpr>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryMode {
    Max,
    Min,
    Both,
}

impl QueryMode {
    pub fn keyword(self) -> &'static str {
        match self {
            QueryMode::Max => "max",
            QueryMode::Min => "min",
            QueryMode::Both => "both",
        }
    }

    pub fn modes(self) -> Vec<Mode> {
        match self {
            QueryMode::Max => vec![Mode::Max],
            QueryMode::Min => vec![Mode::Min],
            QueryMode::Both => vec![Mode::Max, Mode::Min],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuerySpec {
    pub name: String,
    /// Defaults to the network target.
    pub target: Option<StateExpr>,
    pub bound: Tick,
    pub mode: QueryMode,
    /// A published value to compare against.
    pub reference: Option<Prob>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelDocument {
    pub distributions: Vec<NamedDistribution>,
    pub machines: Vec<Prtesm>,
    pub network: Option<NetworkSpec>,
    pub queries: Vec<QuerySpec>,
    pub scenario: Option<ScenarioConfig>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BuildError {
    #[error("the model has no network")]
    NoNetwork,
    #[error("unknown machine `{0}`")]
    UnknownMachine(String),
    #[error("unknown distribution `{0}`")]
    UnknownDistribution(String),
    #[error("module `{module}`: action `{pin}` has no delay distribution")]
    NoDelay { module: String, pin: String },
    #[error("module `{module}`: {source}")]
    Transform { module: String, source: TransformError },
    #[error(transparent)]
    Network(#[from] NetworkError),
}

impl ModelDocument {
    pub fn distribution(&self, name: &str) -> Option<&DelayCdf> {
        self.distributions.iter().find(|d| d.name == name).map(|d| &d.cdf)
    }

    pub fn machine(&self, name: &str) -> Option<&Prtesm> {
        self.machines.iter().find(|m| m.name == name)
    }

    pub fn query(&self, name: &str) -> Option<&QuerySpec> {
        self.queries.iter().find(|q| q.name == name)
    }

    /// The query's own target, else the network's.
    pub fn query_target<'a>(&'a self, q: &'a QuerySpec) -> Option<&'a StateExpr> {
        q.target.as_ref().or_else(|| self.network.as_ref().and_then(|n| n.target.as_ref()))
    }

    /// Generates one PTA module per binding and composes them into a network.
    pub fn build_network(&self) -> Result<PtaNetwork, BuildError> {
        let net = self.network.as_ref().ok_or(BuildError::NoNetwork)?;
        let mut constants = Vec::new();
        let mut modules = Vec::new();
        for b in &net.modules {
            let machine = self.machine(&b.machine).ok_or_else(|| BuildError::UnknownMachine(b.machine.clone()))?;
            let mut dists = BTreeMap::new();
            let mut opts = TransformOptions::new(&b.id);
            opts.guard_style = net.timing;
            opts.arm_on = b.after.iter().map(|id| flag_name(id)).collect();
            opts.done_label = b.done.clone();
            let mut pins = Vec::new();
            for a in &b.actions {
                let name = a
                    .delay
                    .clone()
                    .or_else(|| {
                        machine
                            .transitions
                            .iter()
                            .find(|t| t.pin() == Some(a.pin.as_str()))
                            .and_then(|t| t.delay.clone())
                    })
                    .ok_or_else(|| BuildError::NoDelay { module: b.id.clone(), pin: a.pin.clone() })?;
                let cdf = self.distribution(&name).ok_or_else(|| BuildError::UnknownDistribution(name.clone()))?;
                dists.insert(a.pin.clone(), cdf.clone());
                if let Some(l) = &a.label {
                    opts.labels.insert(a.pin.clone(), l.clone());
                }
                pins.push(a.pin.clone());
            }
            let t = prtesm_to_pta(machine, &pins, &dists, &opts)
                .map_err(|source| BuildError::Transform { module: b.id.clone(), source })?;
            constants.extend(t.constants);
            modules.push(t.module);
        }
        Ok(PtaNetwork::new(constants, modules)?)
    }
}
