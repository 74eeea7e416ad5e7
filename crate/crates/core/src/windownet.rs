//! Shared network body for the sentiment and relation classifiers: an
//! assembled feature window feeds a GRU whose final hidden state passes
//! through a maxout hidden layer and a maxout output layer producing raw
//! logits. The caller applies softmax or sigmoid and supplies the fused
//! logit gradient on the way back.

use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::features::{assemble_input, scatter_input_grad, FeatureIndices, HyperParams};
use crate::nn::gru::GruCtx;
use crate::nn::init;
use crate::nn::maxout::MaxoutCtx;
use crate::nn::{Embedding, Gru, Maxout, MaxoutPiece, ParamSet, Parameter, Tensor2};

pub(crate) const MAXOUT_PIECES: usize = 2;

#[derive(Debug, Clone)]
pub(crate) struct WindowNet {
    pub word_embed: Embedding,
    pub dist_embeds: Vec<Embedding>,
    pub gru: Gru,
    pub hidden: Maxout,
    pub output: Maxout,
    pub d_pos: usize,
}

pub(crate) struct WindowNetCtx {
    feats: FeatureIndices,
    gru_ctx: GruCtx,
    steps: usize,
    hidden_ctx: MaxoutCtx,
    output_ctx: MaxoutCtx,
}

fn maxout_layer(name: &str, out_dim: usize, in_dim: usize, rng: &mut ChaCha8Rng) -> Maxout {
    let pieces = (0..MAXOUT_PIECES)
        .map(|p| MaxoutPiece {
            weights: Parameter::new(
                format!("{name}.p{p}.w"),
                init::glorot_uniform(out_dim, in_dim, rng),
            ),
            bias: Parameter::new(format!("{name}.p{p}.b"), Tensor2::zeros(out_dim, 1)),
        })
        .collect();
    Maxout::new(pieces)
}

impl WindowNet {
    /// `dist_names` decides how many distance tables the input carries;
    /// `out_dim` is the size of the final logit vector.
    pub fn init(
        hp: &HyperParams,
        vocab_rows: usize,
        pad_row: usize,
        pretrained_table: Option<&Tensor2>,
        dist_names: &[&str],
        hidden_dim: usize,
        out_dim: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        hp.validate()?;
        let table = match pretrained_table {
            Some(t) => {
                if t.rows() != vocab_rows || t.cols() != hp.d_word {
                    return Err(crate::error::Error::Config(format!(
                        "embedding table {} does not match vocabulary of {} x {}",
                        t.shape_str(),
                        vocab_rows,
                        hp.d_word
                    )));
                }
                t.clone()
            }
            None => {
                let mut t = init::embedding_table(vocab_rows, hp.d_word, rng);
                t.row_mut(pad_row).iter_mut().for_each(|v| *v = 0.0);
                t
            }
        };
        let word_embed = Embedding::new(Parameter::new("word_embed", table));
        let dist_rows = crate::features::DistanceIndexer::default().table_size();
        let dist_embeds = dist_names
            .iter()
            .map(|name| {
                Embedding::new(Parameter::new(
                    name.to_string(),
                    init::embedding_table(dist_rows, hp.d_dist, rng),
                ))
            })
            .collect::<Vec<_>>();
        let input_dim = hp.d_word + hp.d_pos + dist_names.len() * hp.d_dist;
        let g = |name: &str, r: usize, c: usize, rng: &mut ChaCha8Rng| {
            Parameter::new(format!("gru.{name}"), init::glorot_uniform(r, c, rng))
        };
        let b = |name: &str, r: usize| Parameter::new(format!("gru.{name}"), Tensor2::zeros(r, 1));
        let units = hp.d_gru;
        let gru = Gru::new(
            g("w_z", units, input_dim, rng),
            g("u_z", units, units, rng),
            b("b_z", units),
            g("w_r", units, input_dim, rng),
            g("u_r", units, units, rng),
            b("b_r", units),
            g("w_h", units, input_dim, rng),
            g("u_h", units, units, rng),
            b("b_h", units),
        );
        let hidden = maxout_layer("hidden", hidden_dim, units, rng);
        let output = maxout_layer("output", out_dim, hidden_dim, rng);
        Ok(WindowNet {
            word_embed,
            dist_embeds,
            gru,
            hidden,
            output,
            d_pos: hp.d_pos,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.gru.in_dim()
    }

    /// Runs the window through the network; returns the 1 x out_dim logits.
    pub fn forward(&self, feats: &FeatureIndices) -> Result<(Tensor2, WindowNetCtx)> {
        let dist_tables: Vec<&Parameter> = self.dist_embeds.iter().map(|e| &e.table).collect();
        let x = assemble_input(feats, &self.word_embed.table, self.d_pos, &dist_tables)?;
        let (states, gru_ctx) = self.gru.forward(&x)?;
        let steps = states.rows();
        let mut final_state = Tensor2::zeros(1, states.cols());
        final_state
            .row_mut(0)
            .copy_from_slice(states.row(steps - 1));
        let (h, hidden_ctx) = self.hidden.forward(&final_state)?;
        let (logits, output_ctx) = self.output.forward(&h)?;
        Ok((
            logits,
            WindowNetCtx {
                feats: feats.clone(),
                gru_ctx,
                steps,
                hidden_ctx,
                output_ctx,
            },
        ))
    }

    /// Backward from the fused logit gradient (1 x out_dim) down into the
    /// embedding tables.
    pub fn backward(&mut self, ctx: &WindowNetCtx, logit_grad: &Tensor2) {
        let gh = self.output.backward(&ctx.output_ctx, logit_grad);
        let gfinal = self.hidden.backward(&ctx.hidden_ctx, &gh);
        let mut grad_states = Tensor2::zeros(ctx.steps, self.gru.hidden_dim());
        grad_states
            .row_mut(ctx.steps - 1)
            .copy_from_slice(gfinal.row(0));
        let gx = self.gru.backward(&ctx.gru_ctx, &grad_states);
        let mut dist_tables: Vec<&mut Parameter> =
            self.dist_embeds.iter_mut().map(|e| &mut e.table).collect();
        scatter_input_grad(
            &ctx.feats,
            &gx,
            &mut self.word_embed.table,
            self.d_pos,
            &mut dist_tables,
        );
    }
}

impl ParamSet for WindowNet {
    fn params(&self) -> Vec<&Parameter> {
        let mut out = vec![&self.word_embed.table];
        for d in &self.dist_embeds {
            out.push(&d.table);
        }
        out.extend(self.gru.params());
        for p in &self.hidden.pieces {
            out.push(&p.weights);
            out.push(&p.bias);
        }
        for p in &self.output.pieces {
            out.push(&p.weights);
            out.push(&p.bias);
        }
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut out = vec![&mut self.word_embed.table];
        for d in &mut self.dist_embeds {
            out.push(&mut d.table);
        }
        out.extend(self.gru.params_mut());
        for p in &mut self.hidden.pieces {
            out.push(&mut p.weights);
            out.push(&mut p.bias);
        }
        for p in &mut self.output.pieces {
            out.push(&mut p.weights);
            out.push(&mut p.bias);
        }
        out
    }
}
