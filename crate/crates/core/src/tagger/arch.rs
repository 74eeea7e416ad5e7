//! Tagger architecture registry.
//!
//! Every tagger variant is a strategy behind the [`TaggerArch`] trait: it
//! names itself and lays out the shared network body (convolution stack,
//! recurrent layer, number of output heads). The registry resolves the
//! `--kind` name given on the command line or stored in a model bundle; the
//! body executor itself is common to all variants.

use crate::error::{Error, Result};
use crate::features::HyperParams;

/// Concrete layer sizes for one variant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerPlan {
    /// Feature-map count per convolution layer; empty for purely recurrent
    /// variants. Each convolution is followed by dropout.
    pub conv_maps: Vec<usize>,
    /// Hidden units of the recurrent layer, if the variant has one.
    pub gru_units: Option<usize>,
    /// One head per predicted tag sequence: 1 for single-role models, 2 for
    /// joint aspect+opinion models.
    pub heads: usize,
}

impl LayerPlan {
    /// Width of the representation feeding the output head(s).
    pub fn body_out_dim(&self, input_dim: usize) -> usize {
        self.gru_units
            .or_else(|| self.conv_maps.last().copied())
            .unwrap_or(input_dim)
    }

    pub fn is_joint(&self) -> bool {
        self.heads == 2
    }
}

pub trait TaggerArch: Send + Sync {
    fn name(&self) -> &'static str;
    fn plan(&self, hp: &HyperParams) -> LayerPlan;
    /// Whether POS one-hot features are enabled when the caller does not say.
    fn default_use_pos(&self) -> bool {
        false
    }
}

/// Convolution stack only: embed -> 3 x (conv + relu + dropout) -> head.
pub struct CnnArch;

impl TaggerArch for CnnArch {
    fn name(&self) -> &'static str {
        "cnn"
    }
    fn plan(&self, hp: &HyperParams) -> LayerPlan {
        LayerPlan {
            conv_maps: vec![hp.d_conv; 3],
            gru_units: None,
            heads: 1,
        }
    }
}

/// Recurrent only: embed -> GRU -> head.
pub struct RnnArch;

impl TaggerArch for RnnArch {
    fn name(&self) -> &'static str {
        "rnn"
    }
    fn plan(&self, hp: &HyperParams) -> LayerPlan {
        LayerPlan {
            conv_maps: vec![],
            gru_units: Some(hp.d_gru),
            heads: 1,
        }
    }
}

/// Convolution stack feeding a GRU: embed -> 3 x conv -> GRU -> head.
pub struct StackedArch;

impl TaggerArch for StackedArch {
    fn name(&self) -> &'static str {
        "stacked"
    }
    fn plan(&self, hp: &HyperParams) -> LayerPlan {
        LayerPlan {
            conv_maps: vec![hp.d_conv; 3],
            gru_units: Some(hp.d_gru),
            heads: 1,
        }
    }
    fn default_use_pos(&self) -> bool {
        true
    }
}

/// Stacked body with two output heads predicting aspects and opinions at
/// once.
pub struct JointSmallArch;

impl TaggerArch for JointSmallArch {
    fn name(&self) -> &'static str {
        "joint-small"
    }
    fn plan(&self, hp: &HyperParams) -> LayerPlan {
        LayerPlan {
            conv_maps: vec![hp.d_conv; 3],
            gru_units: Some(hp.d_gru),
            heads: 2,
        }
    }
}

/// Joint body with doubled convolution maps and recurrent units.
pub struct JointLargeArch;

impl TaggerArch for JointLargeArch {
    fn name(&self) -> &'static str {
        "joint-large"
    }
    fn plan(&self, hp: &HyperParams) -> LayerPlan {
        LayerPlan {
            conv_maps: vec![2 * hp.d_conv; 3],
            gru_units: Some(2 * hp.d_gru),
            heads: 2,
        }
    }
}

/// Name-keyed registry of tagger variants, in a stable display order.
pub struct ArchRegistry {
    entries: Vec<Box<dyn TaggerArch>>,
}

impl ArchRegistry {
    pub fn standard() -> Self {
        ArchRegistry {
            entries: vec![
                Box::new(CnnArch),
                Box::new(RnnArch),
                Box::new(StackedArch),
                Box::new(JointSmallArch),
                Box::new(JointLargeArch),
            ],
        }
    }

    pub fn register(&mut self, arch: Box<dyn TaggerArch>) {
        self.entries.retain(|e| e.name() != arch.name());
        self.entries.push(arch);
    }

    pub fn get(&self, name: &str) -> Option<&dyn TaggerArch> {
        self.entries
            .iter()
            .find(|e| e.name() == name)
            .map(|e| e.as_ref())
    }

    pub fn resolve(&self, name: &str) -> Result<&dyn TaggerArch> {
        self.get(name).ok_or_else(|| {
            Error::Config(format!(
                "unknown tagger kind '{name}'; available: {}",
                self.names().join(", ")
            ))
        })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|e| e.name()).collect()
    }
}

impl Default for ArchRegistry {
    fn default() -> Self {
        ArchRegistry::standard()
    }
}
