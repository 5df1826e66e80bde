//! Flat JSON run configurations.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{
    CliError, CommonArgs, LearnGraphArgs, LinkPredictArgs, NodeClassifyArgs, RecommendArgs,
    TrialArgs,
};

/// Reads a flat JSON object; keys absent from `T`'s serialized default are
/// rejected.
pub(crate) fn load<T: DeserializeOwned + Serialize + Default>(
    path: Option<&Path>,
) -> Result<T, CliError> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let bad = |msg: String| CliError::Usage(format!("config {}: {msg}", path.display()));
    let text = std::fs::read_to_string(path).map_err(|e| bad(e.to_string()))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
    let Value::Object(map) = &value else {
        return Err(bad("expected a JSON object".into()));
    };
    let known = serde_json::to_value(T::default()).map_err(|e| bad(e.to_string()))?;
    if let Some(key) = map.keys().find(|k| known.get(k.as_str()).is_none()) {
        return Err(bad(format!("unknown key {key:?}")));
    }
    serde_json::from_value(value).map_err(|e| bad(e.to_string()))
}

macro_rules! set {
    ($cfg:ident . $field:ident, $value:expr) => {
        if let Some(v) = $value {
            $cfg.$field = v;
        }
    };
}

macro_rules! flag {
    ($cfg:ident . $field:ident, $value:expr) => {
        if $value {
            $cfg.$field = true;
        }
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnGraphConfig {
    pub embeddings: Option<PathBuf>,
    pub distances: Option<PathBuf>,
    pub k: usize,
    pub target_degree: f64,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub approximate: bool,
    pub ef: usize,
    pub max_iters: usize,
    pub out: PathBuf,
    pub allow_nonconverged: bool,
    pub seed: u64,
    pub jobs: usize,
    pub deterministic: bool,
}

impl Default for LearnGraphConfig {
    fn default() -> Self {
        LearnGraphConfig {
            embeddings: None,
            distances: None,
            k: 20,
            target_degree: 10.0,
            alpha: None,
            beta: None,
            approximate: false,
            ef: 64,
            max_iters: 20_000,
            out: PathBuf::from("learned.tsv"),
            allow_nonconverged: false,
            seed: 0,
            jobs: 1,
            deterministic: false,
        }
    }
}

fn apply_common(seed: &mut u64, jobs: &mut usize, deterministic: &mut bool, c: &CommonArgs) {
    if let Some(s) = c.seed {
        *seed = s;
    }
    if let Some(j) = c.jobs {
        *jobs = j;
    }
    if c.deterministic {
        *deterministic = true;
    }
}

impl LearnGraphConfig {
    pub(crate) fn resolve(a: &LearnGraphArgs) -> Result<Self, CliError> {
        let mut c: Self = load(a.common.config.as_deref())?;
        apply_common(&mut c.seed, &mut c.jobs, &mut c.deterministic, &a.common);
        if a.embeddings.is_some() {
            c.embeddings = a.embeddings.clone();
        }
        if a.distances.is_some() {
            c.distances = a.distances.clone();
        }
        set!(c.k, a.k);
        set!(c.target_degree, a.target_degree);
        if a.alpha.is_some() {
            c.alpha = a.alpha;
        }
        if a.beta.is_some() {
            c.beta = a.beta;
        }
        flag!(c.approximate, a.approximate);
        set!(c.ef, a.ef);
        set!(c.max_iters, a.max_iters);
        set!(c.out, a.out.clone());
        flag!(c.allow_nonconverged, a.allow_nonconverged);
        if c.deterministic {
            c.approximate = false;
        }
        match (c.embeddings.is_some(), c.distances.is_some()) {
            (false, false) => {
                return Err(CliError::Usage(
                    "one of --embeddings or --distances is required".into(),
                ))
            }
            (true, true) => {
                return Err(CliError::Usage(
                    "--embeddings and --distances are exclusive".into(),
                ))
            }
            _ => {}
        }
        if c.alpha.is_some() != c.beta.is_some() {
            return Err(CliError::Usage(
                "--alpha and --beta must be given together".into(),
            ));
        }
        Ok(c)
    }
}

/// Fields shared by the trial-based commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrialConfig {
    pub dataset: String,
    pub trials: usize,
    pub seed: u64,
    pub jobs: usize,
    pub deterministic: bool,
    pub out_dir: PathBuf,
}

impl Default for TrialConfig {
    fn default() -> Self {
        TrialConfig {
            dataset: "cora".into(),
            trials: 10,
            seed: 0,
            jobs: 1,
            deterministic: false,
            out_dir: PathBuf::from("runs"),
        }
    }
}

impl TrialConfig {
    fn apply(&mut self, c: &CommonArgs, t: &TrialArgs) -> Result<(), CliError> {
        apply_common(&mut self.seed, &mut self.jobs, &mut self.deterministic, c);
        set!(self.out_dir, c.out_dir.clone());
        set!(self.dataset, t.dataset.clone());
        set!(self.trials, t.trials);
        if self.trials == 0 {
            return Err(CliError::Usage("--trials must be at least 1".into()));
        }
        if self.jobs == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        Ok(())
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.trials as u64).map(|k| self.seed + k).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NodeClassifyConfig {
    #[serde(flatten)]
    pub trial: TrialConfig,
    pub content: Option<PathBuf>,
    pub cites: Option<PathBuf>,
    pub labels_per_class: usize,
    pub val_size: usize,
    pub baseline_also: bool,
    pub k: usize,
    pub target_degree: f64,
    pub delta: Option<f64>,
    pub delta_grid: Vec<f64>,
    pub densify_union: bool,
    pub mc_samples: usize,
    pub mc_rate: f64,
    pub epochs: usize,
    pub lr: f64,
    pub vgae_epochs: usize,
    pub learn_graph: bool,
}

impl Default for NodeClassifyConfig {
    fn default() -> Self {
        let p = crate::pipelines::BgcnConfig::default();
        NodeClassifyConfig {
            trial: TrialConfig::default(),
            content: None,
            cites: None,
            labels_per_class: 20,
            val_size: crate::data::DEFAULT_VAL_NODES,
            baseline_also: false,
            k: p.k,
            target_degree: p.target_degree,
            delta: None,
            delta_grid: Vec::new(),
            densify_union: false,
            mc_samples: p.mc_samples,
            mc_rate: p.mc_rate,
            epochs: p.gcn.epochs,
            lr: p.gcn.lr,
            vgae_epochs: p.vgae.epochs,
            learn_graph: true,
        }
    }
}

impl NodeClassifyConfig {
    pub(crate) fn resolve(a: &NodeClassifyArgs) -> Result<Self, CliError> {
        let mut c: Self = load(a.common.config.as_deref())?;
        c.trial.apply(&a.common, &a.trial)?;
        if a.content.is_some() {
            c.content = a.content.clone();
        }
        if a.cites.is_some() {
            c.cites = a.cites.clone();
        }
        set!(c.labels_per_class, a.labels_per_class);
        set!(c.val_size, a.val_size);
        flag!(c.baseline_also, a.baseline_also);
        set!(c.k, a.trial.k);
        set!(c.target_degree, a.trial.target_degree);
        set!(c.epochs, a.trial.epochs);
        set!(c.lr, a.trial.lr);
        if a.delta.is_some() {
            c.delta = a.delta;
        }
        set!(c.delta_grid, a.delta_grid.clone());
        flag!(c.densify_union, a.densify_union);
        set!(c.mc_samples, a.mc_samples);
        set!(c.mc_rate, a.mc_rate);
        set!(c.vgae_epochs, a.vgae_epochs);
        if a.no_graph_learning {
            c.learn_graph = false;
        }
        Ok(c)
    }

    pub fn pipeline(&self) -> crate::pipelines::BgcnConfig {
        let mut p = crate::pipelines::BgcnConfig {
            k: self.k,
            target_degree: self.target_degree,
            delta: self.delta,
            delta_grid: self.delta_grid.clone(),
            densify_union: self.densify_union,
            mc_samples: self.mc_samples,
            mc_rate: self.mc_rate,
            learn_graph: self.learn_graph,
            ..Default::default()
        };
        p.gcn.epochs = self.epochs;
        p.gcn.lr = self.lr;
        p.vgae.epochs = self.vgae_epochs;
        if self.trial.deterministic {
            p.support = crate::pipelines::SupportMode::Exact;
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkPredictConfig {
    #[serde(flatten)]
    pub trial: TrialConfig,
    pub content: Option<PathBuf>,
    pub cites: Option<PathBuf>,
    pub k: usize,
    pub target_degree: f64,
    pub epochs: usize,
    pub lr: f64,
    pub binarize: bool,
    pub top_m: Option<usize>,
    pub recon: crate::pipelines::ReconSource,
    pub identity_graft: bool,
}

impl Default for LinkPredictConfig {
    fn default() -> Self {
        let p = crate::pipelines::BvgaeConfig::default();
        LinkPredictConfig {
            trial: TrialConfig::default(),
            content: None,
            cites: None,
            k: p.k,
            target_degree: p.target_degree,
            epochs: p.vgae.epochs,
            lr: p.vgae.lr,
            binarize: false,
            top_m: None,
            recon: p.recon,
            identity_graft: false,
        }
    }
}

impl LinkPredictConfig {
    pub(crate) fn resolve(a: &LinkPredictArgs) -> Result<Self, CliError> {
        let mut c: Self = load(a.common.config.as_deref())?;
        c.trial.apply(&a.common, &a.trial)?;
        if a.content.is_some() {
            c.content = a.content.clone();
        }
        if a.cites.is_some() {
            c.cites = a.cites.clone();
        }
        set!(c.k, a.trial.k);
        set!(c.target_degree, a.trial.target_degree);
        set!(c.epochs, a.trial.epochs);
        set!(c.lr, a.trial.lr);
        flag!(c.binarize, a.binarize);
        if a.top_m.is_some() {
            c.top_m = a.top_m;
        }
        if let Some(r) = &a.recon {
            c.recon = match r.as_str() {
                "observed" => crate::pipelines::ReconSource::Observed,
                "grafted" => crate::pipelines::ReconSource::Grafted,
                other => return Err(CliError::Usage(format!("unknown --recon {other:?}"))),
            };
        }
        flag!(c.identity_graft, a.identity_graft);
        Ok(c)
    }

    pub fn pipeline(&self) -> crate::pipelines::BvgaeConfig {
        let mut p = crate::pipelines::BvgaeConfig {
            k: self.k,
            target_degree: self.target_degree,
            binarize: self.binarize,
            top_m: self.top_m,
            recon: self.recon,
            identity_graft: self.identity_graft,
            ..Default::default()
        };
        p.vgae.epochs = self.epochs;
        p.vgae.lr = self.lr;
        if self.trial.deterministic {
            p.support = crate::pipelines::SupportMode::Exact;
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecommendConfig {
    #[serde(flatten)]
    pub trial: TrialConfig,
    pub interactions: Option<PathBuf>,
    pub th1: usize,
    pub th2: usize,
    pub min_rating: Option<f64>,
    pub fractions: Vec<f64>,
    pub k: usize,
    pub dim: usize,
    pub batch_size: usize,
    pub score_scale: f64,
    pub epochs: usize,
    pub lr: f64,
    pub patience: usize,
    pub continuation_patience: usize,
}

impl Default for RecommendConfig {
    fn default() -> Self {
        let p = crate::pipelines::BrecConfig::default();
        RecommendConfig {
            trial: TrialConfig {
                dataset: "ml100k".into(),
                trials: 1,
                ..TrialConfig::default()
            },
            interactions: None,
            th1: 10,
            th2: 10,
            min_rating: None,
            fractions: p.fraction_grid,
            k: p.k,
            dim: p.dim,
            batch_size: p.batch_size,
            score_scale: p.score_scale,
            epochs: p.bpr.epochs,
            lr: p.bpr.lr,
            patience: p.bpr.early_stop_patience.unwrap_or(50),
            continuation_patience: p.continuation_patience,
        }
    }
}

impl RecommendConfig {
    pub(crate) fn resolve(a: &RecommendArgs) -> Result<Self, CliError> {
        let mut c: Self = load(a.common.config.as_deref())?;
        c.trial.apply(&a.common, &a.trial)?;
        if a.interactions.is_some() {
            c.interactions = a.interactions.clone();
        }
        set!(c.th1, a.th1);
        set!(c.th2, a.th2);
        if a.min_rating.is_some() {
            c.min_rating = a.min_rating;
        }
        set!(c.fractions, a.fractions.clone());
        set!(c.k, a.trial.k);
        set!(c.dim, a.dim);
        set!(c.batch_size, a.batch_size);
        set!(c.score_scale, a.score_scale);
        set!(c.epochs, a.trial.epochs);
        set!(c.lr, a.trial.lr);
        set!(c.patience, a.patience);
        set!(c.continuation_patience, a.continuation_patience);
        Ok(c)
    }

    pub fn pipeline(&self) -> crate::pipelines::BrecConfig {
        let mut p = crate::pipelines::BrecConfig {
            dim: self.dim,
            batch_size: self.batch_size,
            score_scale: self.score_scale,
            continuation_epochs: self.epochs,
            continuation_patience: self.continuation_patience,
            k: self.k,
            fraction_grid: self.fractions.clone(),
            ..Default::default()
        };
        p.bpr.epochs = self.epochs;
        p.bpr.lr = self.lr;
        p.bpr.early_stop_patience = Some(self.patience);
        p
    }
}
