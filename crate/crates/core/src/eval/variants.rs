//! Ablation variants, each a way of growing the target model from the
//! same source model and split.

use super::ExperimentConfig;
use crate::citl::{grow_target, TransferConfig};
use crate::data::TargetSplit;
use crate::error::{Error, Result};
use crate::growth::{GrowConfig, GrowthLog};
use crate::model::{ModelKind, ShallowModel};

pub trait Variant: Send + Sync {
    fn name(&self) -> &'static str;

    /// `split` is already normalized with `source.norm`.
    fn train(&self, source: &ShallowModel, split: &TargetSplit, cfg: &ExperimentConfig, seed: u64)
        -> Result<(ShallowModel, GrowthLog)>;
}

fn transfer_cfg(cfg: &ExperimentConfig, seed: u64) -> TransferConfig {
    cfg.seeded(seed).1
}

/// Ridge-regularized growth on the labeled target cycles only.
#[derive(Debug, Default, Clone, Copy)]
pub struct Baseline;

impl Variant for Baseline {
    fn name(&self) -> &'static str {
        "baseline"
    }

    fn train(&self, source: &ShallowModel, split: &TargetSplit, cfg: &ExperimentConfig, seed: u64)
        -> Result<(ShallowModel, GrowthLog)> {
        let t = transfer_cfg(cfg, seed);
        let grow = GrowConfig {
            c: cfg.baseline_c,
            ..t.grow
        };
        grow.validate()?;
        crate::rscn::grow_ridge(&split.labeled.x, &split.labeled.targets(), source.norm.clone(), &grow, ModelKind::Rscn)
    }
}

/// Target growth with the labeled fit term only.
#[derive(Debug, Default, Clone, Copy)]
pub struct StructuralRiskOnly;

impl Variant for StructuralRiskOnly {
    fn name(&self) -> &'static str {
        "structural_risk"
    }

    fn train(&self, source: &ShallowModel, split: &TargetSplit, cfg: &ExperimentConfig, seed: u64)
        -> Result<(ShallowModel, GrowthLog)> {
        let t = TransferConfig {
            c_tu: 0.0,
            eta: 0.0,
            ..transfer_cfg(cfg, seed)
        };
        grow_target(&split.labeled, &split.unlabeled, source, &t)
    }
}

/// Target growth with the pseudo-label term but no manifold term.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoManifold;

impl Variant for NoManifold {
    fn name(&self) -> &'static str {
        "no_manifold"
    }

    fn train(&self, source: &ShallowModel, split: &TargetSplit, cfg: &ExperimentConfig, seed: u64)
        -> Result<(ShallowModel, GrowthLog)> {
        let t = TransferConfig {
            eta: 0.0,
            ..transfer_cfg(cfg, seed)
        };
        grow_target(&split.labeled, &split.unlabeled, source, &t)
    }
}

/// Target growth with every term of the objective.
#[derive(Debug, Default, Clone, Copy)]
pub struct FullCitl;

impl Variant for FullCitl {
    fn name(&self) -> &'static str {
        "full"
    }

    fn train(&self, source: &ShallowModel, split: &TargetSplit, cfg: &ExperimentConfig, seed: u64)
        -> Result<(ShallowModel, GrowthLog)> {
        grow_target(&split.labeled, &split.unlabeled, source, &transfer_cfg(cfg, seed))
    }
}

/// Variants in registration order, looked up by name.
pub struct VariantRegistry {
    variants: Vec<Box<dyn Variant>>,
}

impl VariantRegistry {
    pub fn empty() -> Self {
        VariantRegistry { variants: Vec::new() }
    }

    pub fn standard() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(Baseline));
        r.register(Box::new(StructuralRiskOnly));
        r.register(Box::new(NoManifold));
        r.register(Box::new(FullCitl));
        r
    }

    /// Adds `v`, replacing any variant with the same name in place.
    pub fn register(&mut self, v: Box<dyn Variant>) {
        match self.variants.iter().position(|x| x.name() == v.name()) {
            Some(i) => self.variants[i] = v,
            None => self.variants.push(v),
        }
    }

    pub fn get(&self, name: &str) -> Result<&dyn Variant> {
        self.iter().find(|v| v.name() == name).ok_or_else(|| {
            Error::InvalidConfig(format!("unknown variant {name:?} (known: {})", self.names().join(", ")))
        })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.iter().map(|v| v.name()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &dyn Variant> {
        self.variants.iter().map(|b| b.as_ref())
    }
}

impl Default for VariantRegistry {
    fn default() -> Self {
        Self::standard()
    }
}
