//! Aspect and opinion term extraction as IOB2 sequence tagging.
//!
//! One shared network body (embedding, optional convolution stack, optional
//! GRU) feeds one or two softmax heads over the three tags. Single-head
//! variants run as a pair of independently trained models, one per role;
//! joint variants predict both tag sequences from one body.

pub mod arch;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::Review;
use crate::error::{Error, Result};
use crate::features::{
    assemble_input, scatter_input_grad, FeatureIndices, HyperParams, PosTagSet, Vocabulary,
};
use crate::iob2::{self, Span, SpanRole, Tag};
use crate::nn::conv1d::Conv1dCtx;
use crate::nn::dense::DenseCtx;
use crate::nn::dropout::{dropout_apply, dropout_backward, DropoutMask, DropoutMode};
use crate::nn::gru::GruCtx;
use crate::nn::init;
use crate::nn::{
    cross_entropy_loss, rmsprop_step, softmax_rows, Activation, Conv1d, Dense, Embedding, Gru,
    ParamSet, Parameter, RmsPropConfig, Tensor2,
};
use crate::training::TrainTrace;

pub use arch::{ArchRegistry, LayerPlan, TaggerArch};

/// The shared tagger body plus its head(s); works on index sequences, not
/// raw tokens.
#[derive(Debug, Clone)]
pub struct TaggerNet {
    embed: Embedding,
    convs: Vec<Conv1d>,
    gru: Option<Gru>,
    heads: Vec<Dense>,
    dropout: f64,
    use_pos: bool,
    d_pos: usize,
}

pub struct TaggerForward {
    feats: FeatureIndices,
    conv_ctxs: Vec<Conv1dCtx>,
    masks: Vec<DropoutMask>,
    gru_ctx: Option<GruCtx>,
    head_ctxs: Vec<DenseCtx>,
    /// Per-head tag probabilities, one row per token.
    pub head_probs: Vec<Tensor2>,
}

impl TaggerNet {
    fn init(
        prefix: &str,
        plan: &LayerPlan,
        hp: &HyperParams,
        use_pos: bool,
        head_names: &[String],
        embed_table: Tensor2,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        assert_eq!(head_names.len(), plan.heads);
        let input_dim = hp.d_word + if use_pos { hp.d_pos } else { 0 };
        let embed = Embedding::new(Parameter::new(format!("{prefix}word_embed"), embed_table));
        let mut convs = Vec::with_capacity(plan.conv_maps.len());
        let mut width = input_dim;
        for (i, &maps) in plan.conv_maps.iter().enumerate() {
            let kernel = Parameter::new(
                format!("{prefix}conv{}.kernel", i + 1),
                init::glorot_uniform(maps, width * hp.l_conv, rng),
            );
            let bias = Parameter::new(
                format!("{prefix}conv{}.bias", i + 1),
                Tensor2::zeros(maps, 1),
            );
            convs.push(Conv1d::new(kernel, bias, hp.l_conv));
            width = maps;
        }
        let gru = plan.gru_units.map(|units| {
            let g = |name: &str, r: usize, c: usize, rng: &mut ChaCha8Rng| {
                Parameter::new(
                    format!("{prefix}gru.{name}"),
                    init::glorot_uniform(r, c, rng),
                )
            };
            let b = |name: &str, r: usize| {
                Parameter::new(format!("{prefix}gru.{name}"), Tensor2::zeros(r, 1))
            };
            let gru = Gru::new(
                g("w_z", units, width, rng),
                g("u_z", units, units, rng),
                b("b_z", units),
                g("w_r", units, width, rng),
                g("u_r", units, units, rng),
                b("b_r", units),
                g("w_h", units, width, rng),
                g("u_h", units, units, rng),
                b("b_h", units),
            );
            width = units;
            gru
        });
        let heads = head_names
            .iter()
            .map(|name| {
                Dense::new(
                    Parameter::new(
                        format!("{prefix}{name}.w"),
                        init::glorot_uniform(Tag::COUNT, width, rng),
                    ),
                    Parameter::new(format!("{prefix}{name}.b"), Tensor2::zeros(Tag::COUNT, 1)),
                    Activation::Identity,
                )
            })
            .collect();
        TaggerNet {
            embed,
            convs,
            gru,
            heads,
            dropout: hp.dropout,
            use_pos,
            d_pos: hp.d_pos,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.embed.dim() + if self.use_pos { self.d_pos } else { 0 }
    }

    pub fn forward<R: Rng>(
        &self,
        words: &[usize],
        pos: &[usize],
        mode: DropoutMode,
        rng: &mut R,
    ) -> Result<TaggerForward> {
        let feats = FeatureIndices {
            words: words.to_vec(),
            pos: self.use_pos.then(|| pos.to_vec()),
            distances: vec![],
        };
        let mut x = assemble_input(&feats, &self.embed.table, self.d_pos, &[])?;
        let mut conv_ctxs = Vec::with_capacity(self.convs.len());
        let mut masks = Vec::with_capacity(self.convs.len());
        for conv in &self.convs {
            let (out, ctx) = conv.forward(&x)?;
            let (dropped, mask) = dropout_apply(&out, self.dropout, mode, rng);
            conv_ctxs.push(ctx);
            masks.push(mask);
            x = dropped;
        }
        let gru_ctx = match &self.gru {
            Some(gru) => {
                let (states, ctx) = gru.forward(&x)?;
                x = states;
                Some(ctx)
            }
            None => None,
        };
        let mut head_ctxs = Vec::with_capacity(self.heads.len());
        let mut head_probs = Vec::with_capacity(self.heads.len());
        for head in &self.heads {
            let (logits, ctx) = head.forward(&x)?;
            head_probs.push(softmax_rows(&logits));
            head_ctxs.push(ctx);
        }
        Ok(TaggerForward {
            feats,
            conv_ctxs,
            masks,
            gru_ctx,
            head_ctxs,
            head_probs,
        })
    }

    /// Backward pass from per-head logit gradients down to the embedding
    /// table; gradients accumulate into the parameters.
    pub fn backward(&mut self, fwd: &TaggerForward, head_logit_grads: &[Tensor2]) {
        assert_eq!(head_logit_grads.len(), self.heads.len());
        let mut grad: Option<Tensor2> = None;
        for ((head, ctx), g) in self
            .heads
            .iter_mut()
            .zip(&fwd.head_ctxs)
            .zip(head_logit_grads)
        {
            let gi = head.backward_from_logits(ctx, g);
            match &mut grad {
                Some(total) => total.add_assign(&gi),
                None => grad = Some(gi),
            }
        }
        let mut grad = grad.expect("at least one head");
        if let Some(gru) = &mut self.gru {
            grad = gru.backward(fwd.gru_ctx.as_ref().expect("gru ctx"), &grad);
        }
        for i in (0..self.convs.len()).rev() {
            grad = dropout_backward(&fwd.masks[i], &grad);
            grad = self.convs[i].backward(&fwd.conv_ctxs[i], &grad);
        }
        scatter_input_grad(
            &fwd.feats,
            &grad,
            &mut self.embed.table,
            self.d_pos,
            &mut [],
        );
    }

    /// Forward + summed per-head cross-entropy + backward. Head losses are
    /// weighted by `head_weights`; the usual joint setting is `[1.0, 1.0]`.
    pub fn loss_backward<R: Rng>(
        &mut self,
        words: &[usize],
        pos: &[usize],
        targets: &[&[usize]],
        head_weights: &[f64],
        mode: DropoutMode,
        rng: &mut R,
    ) -> Result<f64> {
        let fwd = self.forward(words, pos, mode, rng)?;
        let mut total = 0.0;
        let mut grads = Vec::with_capacity(self.heads.len());
        for ((probs, target), &w) in fwd.head_probs.iter().zip(targets).zip(head_weights) {
            let ce = cross_entropy_loss(probs, target)?;
            total += w * ce.loss;
            let mut g = ce.logit_grad;
            for v in g.data_mut() {
                *v *= w;
            }
            grads.push(g);
        }
        self.backward(&fwd, &grads);
        Ok(total)
    }

    pub fn loss_only(
        &self,
        words: &[usize],
        pos: &[usize],
        targets: &[&[usize]],
        head_weights: &[f64],
    ) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let fwd = self.forward(words, pos, DropoutMode::Infer, &mut rng)?;
        let mut total = 0.0;
        for ((probs, target), &w) in fwd.head_probs.iter().zip(targets).zip(head_weights) {
            total += w * cross_entropy_loss(probs, target)?.loss;
        }
        Ok(total)
    }
}

impl ParamSet for TaggerNet {
    fn params(&self) -> Vec<&Parameter> {
        let mut out = vec![&self.embed.table];
        for c in &self.convs {
            out.push(&c.kernel);
            out.push(&c.bias);
        }
        if let Some(g) = &self.gru {
            out.extend(g.params());
        }
        for h in &self.heads {
            out.push(&h.weights);
            out.push(&h.bias);
        }
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut out = vec![&mut self.embed.table];
        for c in &mut self.convs {
            out.push(&mut c.kernel);
            out.push(&mut c.bias);
        }
        if let Some(g) = &mut self.gru {
            out.extend(g.params_mut());
        }
        for h in &mut self.heads {
            out.push(&mut h.weights);
            out.push(&mut h.bias);
        }
        out
    }
}

/// Picks the most probable tag; exact ties fall to O, then B, then I.
pub fn argmax_tag(probs: &[f64]) -> Tag {
    let mut best = Tag::O;
    for tag in [Tag::B, Tag::I] {
        if probs[tag.index()] > probs[best.index()] {
            best = tag;
        }
    }
    best
}

#[derive(Debug, Clone)]
enum TaggerNets {
    Separate {
        aspect: TaggerNet,
        opinion: TaggerNet,
    },
    Joint(TaggerNet),
}

/// A trained (or freshly initialized) term-extraction model: tokenized text
/// in, aspect and opinion spans out.
#[derive(Debug, Clone)]
pub struct TaggerModel {
    pub kind: String,
    pub hp: HyperParams,
    pub use_pos: bool,
    pub vocab: Vocabulary,
    pos_tags: PosTagSet,
    nets: TaggerNets,
}

/// A review pre-encoded for the network.
#[derive(Debug, Clone)]
pub struct TagSample {
    pub words: Vec<usize>,
    pub pos: Vec<usize>,
    pub aspect_tags: Vec<usize>,
    pub opinion_tags: Vec<usize>,
}

impl TaggerModel {
    pub fn init(
        arch: &dyn TaggerArch,
        hp: &HyperParams,
        use_pos: bool,
        vocab: Vocabulary,
        pretrained_table: Option<&Tensor2>,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        hp.validate()?;
        let plan = arch.plan(hp);
        let make_table = |rng: &mut ChaCha8Rng| -> Result<Tensor2> {
            match pretrained_table {
                Some(t) => {
                    if t.rows() != vocab.len() || t.cols() != hp.d_word {
                        return Err(Error::Config(format!(
                            "embedding table {} does not match vocabulary of {} x {}",
                            t.shape_str(),
                            vocab.len(),
                            hp.d_word
                        )));
                    }
                    Ok(t.clone())
                }
                None => {
                    let mut t = init::embedding_table(vocab.len(), hp.d_word, rng);
                    t.row_mut(vocab.pad_index())
                        .iter_mut()
                        .for_each(|v| *v = 0.0);
                    Ok(t)
                }
            }
        };
        let nets = if plan.is_joint() {
            let table = make_table(rng)?;
            TaggerNets::Joint(TaggerNet::init(
                "",
                &plan,
                hp,
                use_pos,
                &["head_aspect".to_string(), "head_opinion".to_string()],
                table,
                rng,
            ))
        } else {
            let aspect_table = make_table(rng)?;
            let aspect = TaggerNet::init(
                "aspect.",
                &plan,
                hp,
                use_pos,
                &["head".to_string()],
                aspect_table,
                rng,
            );
            let opinion_table = make_table(rng)?;
            let opinion = TaggerNet::init(
                "opinion.",
                &plan,
                hp,
                use_pos,
                &["head".to_string()],
                opinion_table,
                rng,
            );
            TaggerNets::Separate { aspect, opinion }
        };
        Ok(TaggerModel {
            kind: arch.name().to_string(),
            hp: *hp,
            use_pos,
            vocab,
            pos_tags: PosTagSet::new(),
            nets,
        })
    }

    pub fn is_joint(&self) -> bool {
        matches!(self.nets, TaggerNets::Joint(_))
    }

    pub fn encode_sample(&self, review: &Review) -> Result<TagSample> {
        let words = self.vocab.encode_tokens(&review.tokens);
        let pos = self.pos_tags.encode_tags(&review.pos);
        let aspect_tags = iob2::encode(&review.aspects, review.len())?
            .iter()
            .map(|t| t.index())
            .collect();
        let opinion_tags = iob2::encode(&review.opinions, review.len())?
            .iter()
            .map(|t| t.index())
            .collect();
        Ok(TagSample {
            words,
            pos,
            aspect_tags,
            opinion_tags,
        })
    }

    /// One training update on one review; returns the sample loss.
    pub fn train_step(
        &mut self,
        sample: &TagSample,
        rms: &RmsPropConfig,
        rng: &mut ChaCha8Rng,
    ) -> Result<f64> {
        let loss = match &mut self.nets {
            TaggerNets::Separate { aspect, opinion } => {
                let la = aspect.loss_backward(
                    &sample.words,
                    &sample.pos,
                    &[&sample.aspect_tags],
                    &[1.0],
                    DropoutMode::Train,
                    rng,
                )?;
                for p in aspect.params_mut() {
                    rmsprop_step(p, rms)?;
                }
                let lo = opinion.loss_backward(
                    &sample.words,
                    &sample.pos,
                    &[&sample.opinion_tags],
                    &[1.0],
                    DropoutMode::Train,
                    rng,
                )?;
                for p in opinion.params_mut() {
                    rmsprop_step(p, rms)?;
                }
                la + lo
            }
            TaggerNets::Joint(net) => {
                let loss = net.loss_backward(
                    &sample.words,
                    &sample.pos,
                    &[&sample.aspect_tags, &sample.opinion_tags],
                    &[1.0, 1.0],
                    DropoutMode::Train,
                    rng,
                )?;
                for p in net.params_mut() {
                    rmsprop_step(p, rms)?;
                }
                loss
            }
        };
        Ok(loss)
    }

    /// Deterministic loss of one sample with dropout disabled; used by the
    /// gradient checker.
    pub fn sample_loss(&self, sample: &TagSample) -> Result<f64> {
        match &self.nets {
            TaggerNets::Separate { aspect, opinion } => {
                Ok(
                    aspect.loss_only(&sample.words, &sample.pos, &[&sample.aspect_tags], &[1.0])?
                        + opinion.loss_only(
                            &sample.words,
                            &sample.pos,
                            &[&sample.opinion_tags],
                            &[1.0],
                        )?,
                )
            }
            TaggerNets::Joint(net) => net.loss_only(
                &sample.words,
                &sample.pos,
                &[&sample.aspect_tags, &sample.opinion_tags],
                &[1.0, 1.0],
            ),
        }
    }

    /// Like [`Self::sample_loss`] but also accumulates gradients.
    pub fn sample_loss_backward(&mut self, sample: &TagSample) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        match &mut self.nets {
            TaggerNets::Separate { aspect, opinion } => Ok(aspect.loss_backward(
                &sample.words,
                &sample.pos,
                &[&sample.aspect_tags],
                &[1.0],
                DropoutMode::Infer,
                &mut rng,
            )? + opinion.loss_backward(
                &sample.words,
                &sample.pos,
                &[&sample.opinion_tags],
                &[1.0],
                DropoutMode::Infer,
                &mut rng,
            )?),
            TaggerNets::Joint(net) => net.loss_backward(
                &sample.words,
                &sample.pos,
                &[&sample.aspect_tags, &sample.opinion_tags],
                &[1.0, 1.0],
                DropoutMode::Infer,
                &mut rng,
            ),
        }
    }

    /// Per-token tag probabilities, `[aspect, opinion]`, rows summing to 1.
    pub fn tag_probabilities(&self, tokens: &[String], pos: &[String]) -> Result<[Tensor2; 2]> {
        let words = self.vocab.encode_tokens(tokens);
        let pos_idx = self.pos_tags.encode_tags(pos);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        match &self.nets {
            TaggerNets::Separate { aspect, opinion } => {
                let fa = aspect.forward(&words, &pos_idx, DropoutMode::Infer, &mut rng)?;
                let fo = opinion.forward(&words, &pos_idx, DropoutMode::Infer, &mut rng)?;
                Ok([
                    fa.head_probs.into_iter().next().unwrap(),
                    fo.head_probs.into_iter().next().unwrap(),
                ])
            }
            TaggerNets::Joint(net) => {
                let fwd = net.forward(&words, &pos_idx, DropoutMode::Infer, &mut rng)?;
                let mut probs = fwd.head_probs.into_iter();
                Ok([probs.next().unwrap(), probs.next().unwrap()])
            }
        }
    }

    /// Predicted IOB2 tag sequences (aspect, opinion), already repaired.
    pub fn tag_sequences(&self, tokens: &[String], pos: &[String]) -> Result<(Vec<Tag>, Vec<Tag>)> {
        if tokens.is_empty() {
            return Ok((vec![], vec![]));
        }
        let [aspect_probs, opinion_probs] = self.tag_probabilities(tokens, pos)?;
        let to_tags = |probs: &Tensor2| {
            let raw: Vec<Tag> = (0..probs.rows())
                .map(|r| argmax_tag(probs.row(r)))
                .collect();
            iob2::repair(&raw)
        };
        Ok((to_tags(&aspect_probs), to_tags(&opinion_probs)))
    }

    /// Predicted aspect and opinion spans of one review.
    pub fn predict_review(
        &self,
        tokens: &[String],
        pos: &[String],
    ) -> Result<(Vec<Span>, Vec<Span>)> {
        let (aspect_tags, opinion_tags) = self.tag_sequences(tokens, pos)?;
        let aspects =
            iob2::decode(&aspect_tags, SpanRole::Aspect).expect("repaired tags always decode");
        let opinions =
            iob2::decode(&opinion_tags, SpanRole::Opinion).expect("repaired tags always decode");
        Ok((aspects, opinions))
    }
}

impl ParamSet for TaggerModel {
    fn params(&self) -> Vec<&Parameter> {
        match &self.nets {
            TaggerNets::Separate { aspect, opinion } => {
                let mut out = aspect.params();
                out.extend(opinion.params());
                out
            }
            TaggerNets::Joint(net) => net.params(),
        }
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        match &mut self.nets {
            TaggerNets::Separate { aspect, opinion } => {
                let mut out = aspect.params_mut();
                out.extend(opinion.params_mut());
                out
            }
            TaggerNets::Joint(net) => net.params_mut(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TaggerTrainConfig {
    pub kind: String,
    /// None uses the architecture's default.
    pub use_pos: Option<bool>,
    pub hp: HyperParams,
    pub rms: RmsPropConfig,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TaggerTrainConfig {
    fn default() -> Self {
        TaggerTrainConfig {
            kind: "stacked".to_string(),
            use_pos: None,
            hp: HyperParams::default(),
            rms: RmsPropConfig::default(),
            epochs: 15,
            seed: 42,
        }
    }
}

/// Trains a term-extraction model: one sample at a time, reshuffled every
/// epoch, RMSProp updates after every sample.
pub fn train_tagger(
    corpus: &[Review],
    pretrained: Option<&(Vocabulary, Parameter)>,
    cfg: &TaggerTrainConfig,
) -> Result<(TaggerModel, TrainTrace)> {
    if corpus.is_empty() {
        return Err(Error::Config("training corpus is empty".into()));
    }
    cfg.rms.validate()?;
    let registry = ArchRegistry::standard();
    let arch = registry.resolve(&cfg.kind)?;
    let use_pos = cfg.use_pos.unwrap_or_else(|| arch.default_use_pos());
    let vocab = match pretrained {
        Some((v, _)) => v.clone(),
        None => Vocabulary::from_tokens(
            corpus
                .iter()
                .flat_map(|r| r.tokens.iter().map(String::as_str)),
        ),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = TaggerModel::init(
        arch,
        &cfg.hp,
        use_pos,
        vocab,
        pretrained.map(|(_, p)| &p.value),
        &mut rng,
    )?;
    let samples: Vec<TagSample> = corpus
        .iter()
        .map(|r| model.encode_sample(r))
        .collect::<Result<_>>()?;
    let mut trace = TrainTrace {
        samples_per_epoch: samples.len(),
        ..TrainTrace::default()
    };
    let mut order: Vec<usize> = (0..samples.len()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &i in &order {
            let loss = model.train_step(&samples[i], &cfg.rms, &mut rng)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite {
                    context: format!(
                        "tagger loss at epoch {epoch}, sample {i} (review '{}')",
                        corpus[i].id
                    ),
                });
            }
            total += loss;
        }
        trace.epoch_mean_loss.push(total / samples.len() as f64);
    }
    Ok((model, trace))
}

/// Runs the model over a whole corpus; spans come back decoded and valid.
pub fn predict_corpus(
    model: &TaggerModel,
    corpus: &[Review],
) -> Result<Vec<(Vec<Span>, Vec<Span>)>> {
    corpus
        .iter()
        .map(|r| model.predict_review(&r.tokens, &r.pos))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::iob2::SentimentLabel;

    fn tiny_hp() -> HyperParams {
        HyperParams {
            d_word: 8,
            d_pos: PosTagSet::WIDTH,
            d_dist: 3,
            d_conv: 5,
            l_conv: 3,
            d_gru: 6,
            d_pol: 6,
            d_rel: 6,
            l_pol: 8,
            l_rel: 8,
            dropout: 0.5,
        }
    }

    fn review(
        id: &str,
        text: &str,
        aspects: &[(usize, usize)],
        opinions: &[(usize, usize)],
    ) -> Review {
        let tokens: Vec<String> = text.split_whitespace().map(String::from).collect();
        let pos = vec!["NN".to_string(); tokens.len()];
        Review {
            id: id.to_string(),
            tokens,
            pos,
            aspects: aspects
                .iter()
                .map(|&(s, e)| Span::new(s, e, SpanRole::Aspect))
                .collect(),
            opinions: opinions
                .iter()
                .map(|&(s, e)| {
                    Span::new(s, e, SpanRole::Opinion).with_sentiment(SentimentLabel::Positive)
                })
                .collect(),
            relations: vec![],
        }
    }

    fn tiny_corpus() -> Vec<Review> {
        vec![
            review("r1", "the battery life is great", &[(1, 3)], &[(4, 5)]),
            review("r2", "awful screen on this phone", &[(1, 2)], &[(0, 1)]),
            review("r3", "nice keyboard", &[(1, 2)], &[(0, 1)]),
        ]
    }

    fn cfg(kind: &str, epochs: usize) -> TaggerTrainConfig {
        TaggerTrainConfig {
            kind: kind.to_string(),
            use_pos: Some(kind == "stacked"),
            hp: tiny_hp(),
            epochs,
            seed: 7,
            ..TaggerTrainConfig::default()
        }
    }

    #[test]
    fn zeroed_head_predicts_all_o_by_tie_priority() {
        let (mut model, _) = train_tagger(&tiny_corpus(), None, &cfg("stacked", 0)).unwrap();
        for p in model.params_mut() {
            if p.name.contains("head") {
                p.value.fill(0.0);
            }
        }
        let tokens: Vec<String> = ["the", "battery", "life"].map(String::from).to_vec();
        let pos = vec!["DT".to_string(), "NN".to_string(), "NN".to_string()];
        let [aspect_probs, _] = model.tag_probabilities(&tokens, &pos).unwrap();
        for r in 0..aspect_probs.rows() {
            for c in 0..3 {
                assert!((aspect_probs.get(r, c) - 1.0 / 3.0).abs() < 1e-12);
            }
        }
        let (aspect_tags, opinion_tags) = model.tag_sequences(&tokens, &pos).unwrap();
        assert_eq!(aspect_tags, vec![Tag::O; 3]);
        assert_eq!(opinion_tags, vec![Tag::O; 3]);
    }

    #[test]
    fn single_token_input_yields_single_tag() {
        let (model, _) = train_tagger(&tiny_corpus(), None, &cfg("rnn", 0)).unwrap();
        let (a, o) = model
            .tag_sequences(&["nice".to_string()], &["JJ".to_string()])
            .unwrap();
        assert_eq!(a.len(), 1);
        assert_eq!(o.len(), 1);
    }

    #[test]
    fn empty_token_list_yields_empty_tags_without_fault() {
        let (model, _) = train_tagger(&tiny_corpus(), None, &cfg("cnn", 0)).unwrap();
        let (a, o) = model.tag_sequences(&[], &[]).unwrap();
        assert!(a.is_empty());
        assert!(o.is_empty());
    }

    #[test]
    fn training_tolerates_an_empty_review() {
        let mut corpus = tiny_corpus();
        corpus.push(Review {
            id: "empty".to_string(),
            tokens: vec![],
            pos: vec![],
            aspects: vec![],
            opinions: vec![],
            relations: vec![],
        });
        for kind in ["cnn", "rnn", "stacked"] {
            let (model, trace) = train_tagger(&corpus, None, &cfg(kind, 2)).unwrap();
            assert_eq!(trace.epoch_mean_loss.len(), 2);
            assert!(trace.epoch_mean_loss.iter().all(|l| l.is_finite()));
            let out = predict_corpus(&model, &corpus).unwrap();
            assert!(out[3].0.is_empty() && out[3].1.is_empty());
        }
    }

    #[test]
    fn probability_rows_sum_to_one() {
        let (model, _) = train_tagger(&tiny_corpus(), None, &cfg("stacked", 1)).unwrap();
        let r = &tiny_corpus()[0];
        for probs in model.tag_probabilities(&r.tokens, &r.pos).unwrap() {
            for row in 0..probs.rows() {
                let sum: f64 = probs.row(row).iter().sum();
                assert!((sum - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn zero_epochs_returns_initialization_deterministically() {
        let (a, trace) = train_tagger(&tiny_corpus(), None, &cfg("stacked", 0)).unwrap();
        let (b, _) = train_tagger(&tiny_corpus(), None, &cfg("stacked", 0)).unwrap();
        assert!(trace.epoch_mean_loss.is_empty());
        for (pa, pb) in a.params().iter().zip(b.params()) {
            assert_eq!(pa.value, pb.value, "{}", pa.name);
        }
    }

    #[test]
    fn same_seed_reproduces_the_loss_trace() {
        let (_, t1) = train_tagger(&tiny_corpus(), None, &cfg("joint-small", 3)).unwrap();
        let (_, t2) = train_tagger(&tiny_corpus(), None, &cfg("joint-small", 3)).unwrap();
        assert_eq!(t1, t2);
        let mut other = cfg("joint-small", 3);
        other.seed = 8;
        let (_, t3) = train_tagger(&tiny_corpus(), None, &other).unwrap();
        assert_ne!(t1, t3);
    }

    #[test]
    fn single_review_rnn_loss_is_monotone_within_tolerance() {
        // The RNN variant has no dropout, so the per-epoch training loss is
        // an honest optimizer-progress signal: allow only small transient
        // upticks and require overall descent.
        let corpus = vec![review(
            "r1",
            "the battery life is great",
            &[(1, 3)],
            &[(4, 5)],
        )];
        let mut c = cfg("rnn", 50);
        c.use_pos = Some(false);
        let (_, trace) = train_tagger(&corpus, None, &c).unwrap();
        let losses = &trace.epoch_mean_loss;
        assert_eq!(losses.len(), 50);
        for pair in losses.windows(2) {
            assert!(
                pair[1] <= pair[0] * 1.05,
                "loss jumped {} -> {}",
                pair[0],
                pair[1]
            );
        }
        assert!(losses[49] < losses[0] * 0.95, "no real descent: {losses:?}");
    }

    #[test]
    fn predictions_are_always_valid_span_sets() {
        for seed in 0..3 {
            let mut c = cfg("cnn", 1);
            c.seed = seed;
            let (model, _) = train_tagger(&tiny_corpus(), None, &c).unwrap();
            for r in tiny_corpus() {
                let (aspects, opinions) = model.predict_review(&r.tokens, &r.pos).unwrap();
                crate::iob2::validate_spans(&aspects, r.len()).unwrap();
                crate::iob2::validate_spans(&opinions, r.len()).unwrap();
            }
        }
    }

    #[test]
    fn joint_head_with_zero_weight_matches_single_model_gradients() {
        // Same seed, same body: a joint model whose opinion head has loss
        // weight 0 must produce bit-for-bit the single aspect model's
        // gradients on the shared parameters.
        let hp = tiny_hp();
        let vocab = Vocabulary::from_tokens(["the", "battery", "life", "is", "great"]);
        let registry = ArchRegistry::standard();
        let mut rng_single = ChaCha8Rng::seed_from_u64(5);
        let mut single = TaggerModel::init(
            registry.resolve("stacked").unwrap(),
            &hp,
            false,
            vocab.clone(),
            None,
            &mut rng_single,
        )
        .unwrap();
        let mut rng_joint = ChaCha8Rng::seed_from_u64(5);
        let mut joint = TaggerModel::init(
            registry.resolve("joint-small").unwrap(),
            &hp,
            false,
            vocab,
            None,
            &mut rng_joint,
        )
        .unwrap();

        let r = review("r1", "the battery life is great", &[(1, 3)], &[(4, 5)]);
        let sample = single.encode_sample(&r).unwrap();

        // Single model: gradients of the aspect net only.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        match &mut single.nets {
            TaggerNets::Separate { aspect, .. } => {
                aspect
                    .loss_backward(
                        &sample.words,
                        &sample.pos,
                        &[&sample.aspect_tags],
                        &[1.0],
                        DropoutMode::Infer,
                        &mut rng,
                    )
                    .unwrap();
            }
            _ => unreachable!(),
        }
        match &mut joint.nets {
            TaggerNets::Joint(net) => {
                net.loss_backward(
                    &sample.words,
                    &sample.pos,
                    &[&sample.aspect_tags, &sample.opinion_tags],
                    &[1.0, 0.0],
                    DropoutMode::Infer,
                    &mut rng,
                )
                .unwrap();
            }
            _ => unreachable!(),
        }

        let single_params = match &single.nets {
            TaggerNets::Separate { aspect, .. } => aspect.params(),
            _ => unreachable!(),
        };
        let joint_params = match &joint.nets {
            TaggerNets::Joint(net) => net.params(),
            _ => unreachable!(),
        };
        // Shared prefix: embedding, convs, gru, first head.
        let shared = single_params.len();
        for i in 0..shared {
            let a = single_params[i];
            let b = joint_params[i];
            assert_eq!(a.value, b.value, "init mismatch at {}", a.name);
            for (ga, gb) in a.grad.data().iter().zip(b.grad.data()) {
                assert!((ga - gb).abs() <= 1e-10, "grad mismatch at {}", a.name);
            }
        }
    }

    #[test]
    fn predict_corpus_handles_empty_and_all_o() {
        let (model, _) = train_tagger(&tiny_corpus(), None, &cfg("rnn", 0)).unwrap();
        assert!(predict_corpus(&model, &[]).unwrap().is_empty());
        let out = predict_corpus(&model, &tiny_corpus()).unwrap();
        assert_eq!(out.len(), 3);
    }

    #[test]
    fn overfits_one_sentence_to_its_gold_tags() {
        // Memorization oracle: after enough epochs on a single sentence the
        // stacked tagger reproduces the gold tag sequence exactly.
        let corpus = vec![review(
            "r1",
            "the battery life is great",
            &[(1, 3)],
            &[(4, 5)],
        )];
        let mut c = cfg("stacked", 150);
        c.hp.dropout = 0.0;
        let (model, _) = train_tagger(&corpus, None, &c).unwrap();
        let (aspect_tags, opinion_tags) = model
            .tag_sequences(&corpus[0].tokens, &corpus[0].pos)
            .unwrap();
        assert_eq!(
            aspect_tags,
            vec![Tag::O, Tag::B, Tag::I, Tag::O, Tag::O],
            "aspect tags"
        );
        assert_eq!(
            opinion_tags,
            vec![Tag::O, Tag::O, Tag::O, Tag::O, Tag::B],
            "opinion tags"
        );
    }
}
