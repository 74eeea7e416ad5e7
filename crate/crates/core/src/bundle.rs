//! Model bundle serialization.
//!
//! Layout: an 8-byte little-endian header length, a JSON header (format
//! version, model kind, hyperparameters, vocabulary, parameter names and
//! shapes), then every parameter's values as little-endian f64 in header
//! order. Values round-trip bit for bit, so save -> load -> save is
//! byte-identical and a loaded model predicts exactly like the one that
//! wrote it.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{HyperParams, Vocabulary};
use crate::nn::{ParamSet, Parameter, Tensor2};
use crate::relation::RelationModel;
use crate::sentiment::SentimentModel;
use crate::tagger::{ArchRegistry, TaggerModel};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ParamMeta {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BundleHeader {
    format_version: u32,
    kind: String,
    hyperparams: HyperParams,
    use_pos: bool,
    vocab_words: Vec<String>,
    params: Vec<ParamMeta>,
}

/// In-memory form of a serialized model: metadata plus named value tensors.
#[derive(Debug, Clone)]
pub struct ModelBundle {
    pub format_version: u32,
    pub kind: String,
    pub hyperparams: HyperParams,
    pub use_pos: bool,
    pub vocab_words: Vec<String>,
    pub params: Vec<(String, Tensor2)>,
}

impl ModelBundle {
    fn from_parts(
        kind: &str,
        hp: &HyperParams,
        use_pos: bool,
        vocab: &Vocabulary,
        params: Vec<&Parameter>,
    ) -> Self {
        ModelBundle {
            format_version: FORMAT_VERSION,
            kind: kind.to_string(),
            hyperparams: *hp,
            use_pos,
            vocab_words: vocab.words().to_vec(),
            params: params
                .into_iter()
                .map(|p| (p.name.clone(), p.value.clone()))
                .collect(),
        }
    }

    /// Copies bundle values into a freshly built model's parameters. Names
    /// must match one to one, in any order; shapes must agree.
    fn apply_to(&self, params: Vec<&mut Parameter>) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::Bundle(format!(
                "model expects {} parameters, bundle has {}",
                params.len(),
                self.params.len()
            )));
        }
        for target in params {
            let (_, value) = self
                .params
                .iter()
                .find(|(name, _)| *name == target.name)
                .ok_or_else(|| {
                    Error::Bundle(format!("bundle is missing parameter '{}'", target.name))
                })?;
            if value.rows() != target.rows() || value.cols() != target.cols() {
                return Err(Error::Bundle(format!(
                    "parameter '{}': bundle shape {} does not match model shape {}",
                    target.name,
                    value.shape_str(),
                    target.value.shape_str()
                )));
            }
            target.value = value.clone();
            target.zero_grad();
            target.rms_cache.fill(0.0);
        }
        Ok(())
    }

    pub fn write(&self, mut w: impl Write) -> Result<()> {
        let header = BundleHeader {
            format_version: self.format_version,
            kind: self.kind.clone(),
            hyperparams: self.hyperparams,
            use_pos: self.use_pos,
            vocab_words: self.vocab_words.clone(),
            params: self
                .params
                .iter()
                .map(|(name, t)| ParamMeta {
                    name: name.clone(),
                    rows: t.rows(),
                    cols: t.cols(),
                })
                .collect(),
        };
        let header_bytes = serde_json::to_vec(&header)?;
        w.write_all(&(header_bytes.len() as u64).to_le_bytes())?;
        w.write_all(&header_bytes)?;
        for (_, tensor) in &self.params {
            for v in tensor.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read(mut r: impl Read) -> Result<Self> {
        let mut len_bytes = [0u8; 8];
        r.read_exact(&mut len_bytes)
            .map_err(|_| Error::Bundle("truncated bundle: missing header length".into()))?;
        let header_len = u64::from_le_bytes(len_bytes) as usize;
        let mut header_bytes = vec![0u8; header_len];
        r.read_exact(&mut header_bytes)
            .map_err(|_| Error::Bundle("truncated bundle: incomplete header".into()))?;
        let header: BundleHeader = serde_json::from_slice(&header_bytes)
            .map_err(|e| Error::Bundle(format!("bad header: {e}")))?;
        if header.format_version != FORMAT_VERSION {
            return Err(Error::Bundle(format!(
                "unsupported format version {} (expected {FORMAT_VERSION})",
                header.format_version
            )));
        }
        let mut params = Vec::with_capacity(header.params.len());
        for meta in &header.params {
            let n = meta.rows * meta.cols;
            let mut data = Vec::with_capacity(n);
            let mut buf = [0u8; 8];
            for _ in 0..n {
                r.read_exact(&mut buf).map_err(|_| {
                    Error::Bundle(format!("truncated bundle: parameter '{}'", meta.name))
                })?;
                data.push(f64::from_le_bytes(buf));
            }
            params.push((
                meta.name.clone(),
                Tensor2::from_flat(meta.rows, meta.cols, data),
            ));
        }
        Ok(ModelBundle {
            format_version: header.format_version,
            kind: header.kind,
            hyperparams: header.hyperparams,
            use_pos: header.use_pos,
            vocab_words: header.vocab_words,
            params,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(BufReader::new(File::open(path)?))
    }

    pub fn total_values(&self) -> usize {
        self.params.iter().map(|(_, t)| t.len()).sum()
    }
}

/// Any of the three trained stage models.
pub enum AnyModel {
    Tagger(TaggerModel),
    Sentiment(SentimentModel),
    Relation(RelationModel),
}

impl AnyModel {
    pub fn kind(&self) -> &str {
        match self {
            AnyModel::Tagger(m) => &m.kind,
            AnyModel::Sentiment(_) => "sentiment",
            AnyModel::Relation(_) => "relation",
        }
    }
}

impl TaggerModel {
    pub fn to_bundle(&self) -> ModelBundle {
        ModelBundle::from_parts(
            &self.kind,
            &self.hp,
            self.use_pos,
            &self.vocab,
            self.params(),
        )
    }

    pub fn from_bundle(bundle: &ModelBundle) -> Result<Self> {
        let registry = ArchRegistry::standard();
        let arch = registry.resolve(&bundle.kind)?;
        let vocab = Vocabulary::from_saved_words(bundle.vocab_words.clone())?;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut model = TaggerModel::init(
            arch,
            &bundle.hyperparams,
            bundle.use_pos,
            vocab,
            None,
            &mut rng,
        )?;
        bundle.apply_to(model.params_mut())?;
        Ok(model)
    }
}

impl SentimentModel {
    pub fn to_bundle(&self) -> ModelBundle {
        ModelBundle::from_parts("sentiment", &self.hp, true, &self.vocab, self.params())
    }

    pub fn from_bundle(bundle: &ModelBundle) -> Result<Self> {
        if bundle.kind != "sentiment" {
            return Err(Error::Bundle(format!(
                "expected a sentiment bundle, found kind '{}'",
                bundle.kind
            )));
        }
        let vocab = Vocabulary::from_saved_words(bundle.vocab_words.clone())?;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut model = SentimentModel::init(&bundle.hyperparams, vocab, None, &mut rng)?;
        bundle.apply_to(model.params_mut())?;
        Ok(model)
    }
}

impl RelationModel {
    pub fn to_bundle(&self) -> ModelBundle {
        ModelBundle::from_parts("relation", &self.hp, true, &self.vocab, self.params())
    }

    pub fn from_bundle(bundle: &ModelBundle) -> Result<Self> {
        if bundle.kind != "relation" {
            return Err(Error::Bundle(format!(
                "expected a relation bundle, found kind '{}'",
                bundle.kind
            )));
        }
        let vocab = Vocabulary::from_saved_words(bundle.vocab_words.clone())?;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut model = RelationModel::init(&bundle.hyperparams, vocab, None, &mut rng)?;
        bundle.apply_to(model.params_mut())?;
        Ok(model)
    }
}

/// Loads a bundle and reconstructs whichever model kind it holds.
pub fn load_model(path: &Path) -> Result<AnyModel> {
    let bundle = ModelBundle::load(path)?;
    model_from_bundle(&bundle)
}

pub fn model_from_bundle(bundle: &ModelBundle) -> Result<AnyModel> {
    match bundle.kind.as_str() {
        "sentiment" => Ok(AnyModel::Sentiment(SentimentModel::from_bundle(bundle)?)),
        "relation" => Ok(AnyModel::Relation(RelationModel::from_bundle(bundle)?)),
        _ => Ok(AnyModel::Tagger(TaggerModel::from_bundle(bundle)?)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Review;
    use crate::features::PosTagSet;
    use crate::iob2::{SentimentLabel, Span, SpanRole};
    use crate::tagger::{train_tagger, TaggerTrainConfig};

    fn tiny_hp() -> HyperParams {
        HyperParams {
            d_word: 6,
            d_pos: PosTagSet::WIDTH,
            d_dist: 3,
            d_conv: 4,
            l_conv: 3,
            d_gru: 4,
            d_pol: 4,
            d_rel: 4,
            l_pol: 8,
            l_rel: 8,
            dropout: 0.5,
        }
    }

    fn corpus() -> Vec<Review> {
        vec![Review {
            id: "r1".to_string(),
            tokens: ["the", "battery", "life", "is", "great"]
                .map(String::from)
                .to_vec(),
            pos: ["DT", "NN", "NN", "VBZ", "JJ"].map(String::from).to_vec(),
            aspects: vec![Span::new(1, 3, SpanRole::Aspect)],
            opinions: vec![
                Span::new(4, 5, SpanRole::Opinion).with_sentiment(SentimentLabel::Positive)
            ],
            relations: vec![(0, 0)],
        }]
    }

    fn trained_tagger() -> TaggerModel {
        let cfg = TaggerTrainConfig {
            kind: "stacked".to_string(),
            hp: tiny_hp(),
            epochs: 2,
            seed: 3,
            ..TaggerTrainConfig::default()
        };
        train_tagger(&corpus(), None, &cfg).unwrap().0
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let model = trained_tagger();
        let bundle = model.to_bundle();
        let mut first = Vec::new();
        bundle.write(&mut first).unwrap();
        let reloaded = ModelBundle::read(first.as_slice()).unwrap();
        let mut second = Vec::new();
        reloaded.write(&mut second).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn loaded_model_predicts_bit_identically() {
        let model = trained_tagger();
        let bundle = model.to_bundle();
        let mut bytes = Vec::new();
        bundle.write(&mut bytes).unwrap();
        let restored =
            TaggerModel::from_bundle(&ModelBundle::read(bytes.as_slice()).unwrap()).unwrap();
        let r = &corpus()[0];
        let original = model.tag_probabilities(&r.tokens, &r.pos).unwrap();
        let roundtrip = restored.tag_probabilities(&r.tokens, &r.pos).unwrap();
        assert_eq!(original[0], roundtrip[0]);
        assert_eq!(original[1], roundtrip[1]);
    }

    #[test]
    fn version_mismatch_is_a_fault() {
        let model = trained_tagger();
        let mut bundle = model.to_bundle();
        bundle.format_version = 99;
        let mut bytes = Vec::new();
        bundle.write(&mut bytes).unwrap();
        let err = ModelBundle::read(bytes.as_slice()).unwrap_err();
        assert!(err.to_string().contains("version"), "{err}");
    }

    #[test]
    fn kind_mismatch_is_a_fault() {
        let model = trained_tagger();
        let bundle = model.to_bundle();
        assert!(SentimentModel::from_bundle(&bundle).is_err());
        assert!(RelationModel::from_bundle(&bundle).is_err());
    }

    #[test]
    fn truncated_bundle_is_a_fault() {
        let model = trained_tagger();
        let mut bytes = Vec::new();
        model.to_bundle().write(&mut bytes).unwrap();
        bytes.truncate(bytes.len() - 3);
        assert!(ModelBundle::read(bytes.as_slice()).is_err());
    }

    #[test]
    fn sentiment_and_relation_bundles_round_trip() {
        use crate::relation::{train_relation, RelationTrainConfig};
        use crate::sentiment::{train_sentiment, SentimentTrainConfig};
        let corpus = corpus();
        let (s, _) = train_sentiment(
            &corpus,
            None,
            &SentimentTrainConfig {
                hp: tiny_hp(),
                epochs: 1,
                seed: 5,
                ..SentimentTrainConfig::default()
            },
        )
        .unwrap();
        let restored = match model_from_bundle(&s.to_bundle()).unwrap() {
            AnyModel::Sentiment(m) => m,
            _ => panic!("wrong kind"),
        };
        let r = &corpus[0];
        let a = s
            .classify_opinion(&r.tokens, &r.pos, &r.opinions[0])
            .unwrap();
        let b = restored
            .classify_opinion(&r.tokens, &r.pos, &r.opinions[0])
            .unwrap();
        assert_eq!(a, b);

        let (rel, _) = train_relation(
            &corpus,
            None,
            &RelationTrainConfig {
                hp: tiny_hp(),
                epochs: 1,
                seed: 5,
                ..RelationTrainConfig::default()
            },
        )
        .unwrap();
        let restored = match model_from_bundle(&rel.to_bundle()).unwrap() {
            AnyModel::Relation(m) => m,
            _ => panic!("wrong kind"),
        };
        let pair = crate::relation::generate_candidates(&r.aspects, &r.opinions)
            .into_iter()
            .next()
            .unwrap();
        let pa = rel.classify_pair(&r.tokens, &r.pos, &pair).unwrap();
        let pb = restored.classify_pair(&r.tokens, &r.pos, &pair).unwrap();
        assert_eq!(pa, pb);
    }
}
