//! Implementations of the CLI verbs.

use std::path::PathBuf;
use std::process::ExitCode;

use rayon::prelude::*;

use relsa::bundle::{load_model, AnyModel, ModelBundle};
use relsa::check;
use relsa::corpus::{load_corpus, save_corpus, write_corpus, Review};
use relsa::error::{Error, Result};
use relsa::eval::{kfold, relation_prf, sentiment_accuracy, strict_prf, Accuracy, Prf};
use relsa::features::{load_embeddings, HyperParams, Vocabulary};
use relsa::iob2::Span;
use relsa::nn::{Parameter, RmsPropConfig, REL_ERR_TOLERANCE};
use relsa::pipeline::run_pipeline;
use relsa::relation::{extract_relations, train_relation, RelationTrainConfig};
use relsa::sentiment::{gold_labels, train_sentiment, SentimentTrainConfig};
use relsa::tagger::{predict_corpus, train_tagger, TaggerTrainConfig};
use relsa::training::TrainTrace;

use crate::report;
use crate::{
    EvalMode, EvaluateArgs, GradcheckArgs, InspectArgs, PipelineArgs, PredictArgs, Stage,
    TrainArgs, EXIT_NUMERIC,
};

pub const EMBEDDING_TRIM: usize = 200_000;
pub const DEFAULT_EPOCHS_TERMS: usize = 15;
pub const DEFAULT_EPOCHS_SENTIMENT: usize = 14;
pub const DEFAULT_EPOCHS_RELATIONS: usize = 28;

type Pretrained = (Vocabulary, Parameter);

fn load_pretrained(path: Option<&PathBuf>, hp: &HyperParams) -> Result<Option<Pretrained>> {
    match path {
        Some(p) => Ok(Some(load_embeddings(p, EMBEDDING_TRIM, hp.d_word)?)),
        None => {
            eprintln!(
                "warning: no embeddings file supplied; word vectors start from random initialization"
            );
            Ok(None)
        }
    }
}

fn print_trace(stage: &str, trace: &TrainTrace) {
    for (epoch, loss) in trace.epoch_mean_loss.iter().enumerate() {
        println!(
            "{stage} epoch {:>3}/{} mean-loss {:.6}",
            epoch + 1,
            trace.epoch_mean_loss.len(),
            loss
        );
    }
    if trace.unreachable_gold > 0 {
        eprintln!(
            "warning: {} gold relation(s) beyond the distance filter were unreachable in training",
            trace.unreachable_gold
        );
    }
}

pub fn train(args: &TrainArgs, json: bool) -> Result<ExitCode> {
    let corpus = load_corpus(&args.corpus)?;
    let hp = HyperParams::default();
    let rms = RmsPropConfig {
        learning_rate: args.learning_rate,
        decay_rho: args.decay_rho,
        epsilon: args.rms_epsilon,
    };
    let pretrained = load_pretrained(args.embeddings.as_ref(), &hp)?;
    let (bundle, trace, stage_name) = match args.stage {
        Stage::Terms => {
            let cfg = TaggerTrainConfig {
                kind: args.kind.clone(),
                use_pos: args.use_pos,
                hp,
                rms,
                epochs: args.epochs.unwrap_or(DEFAULT_EPOCHS_TERMS),
                seed: args.seed,
            };
            let (model, trace) = train_tagger(&corpus, pretrained.as_ref(), &cfg)?;
            (model.to_bundle(), trace, "terms")
        }
        Stage::Sentiment => {
            let cfg = SentimentTrainConfig {
                hp,
                rms,
                epochs: args.epochs.unwrap_or(DEFAULT_EPOCHS_SENTIMENT),
                seed: args.seed,
            };
            let (model, trace) = train_sentiment(&corpus, pretrained.as_ref(), &cfg)?;
            (model.to_bundle(), trace, "sentiment")
        }
        Stage::Relations => {
            let cfg = RelationTrainConfig {
                hp,
                rms,
                epochs: args.epochs.unwrap_or(DEFAULT_EPOCHS_RELATIONS),
                seed: args.seed,
            };
            let (model, trace) = train_relation(&corpus, pretrained.as_ref(), &cfg)?;
            (model.to_bundle(), trace, "relations")
        }
    };
    bundle.save(&args.out)?;
    if json {
        println!(
            "{}",
            serde_json::json!({
                "stage": stage_name,
                "model": args.out.display().to_string(),
                "kind": bundle.kind,
                "epoch_mean_loss": trace.epoch_mean_loss,
                "samples_per_epoch": trace.samples_per_epoch,
                "unreachable_gold": trace.unreachable_gold,
            })
        );
    } else {
        print_trace(stage_name, &trace);
        println!(
            "wrote {} model ({} parameter values) to {}",
            bundle.kind,
            bundle.total_values(),
            args.out.display()
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn emit_corpus(out: Option<&PathBuf>, reviews: &[Review]) -> Result<()> {
    match out {
        Some(path) => save_corpus(path, reviews),
        None => write_corpus(std::io::stdout().lock(), reviews),
    }
}

pub fn predict(args: &PredictArgs, _json: bool) -> Result<ExitCode> {
    let corpus = load_corpus(&args.corpus)?;
    let model = load_model(&args.model)?;
    let annotated: Vec<Review> = match &model {
        AnyModel::Tagger(tagger) => {
            let spans = predict_corpus(tagger, &corpus)?;
            corpus
                .iter()
                .zip(spans)
                .map(|(r, (aspects, opinions))| Review {
                    id: r.id.clone(),
                    tokens: r.tokens.clone(),
                    pos: r.pos.clone(),
                    aspects,
                    opinions,
                    relations: vec![],
                })
                .collect()
        }
        AnyModel::Sentiment(model) => {
            let mut out = corpus.clone();
            for review in &mut out {
                for opinion in &mut review.opinions {
                    let (label, _) =
                        model.classify_opinion(&review.tokens, &review.pos, opinion)?;
                    opinion.sentiment = Some(label);
                }
            }
            out
        }
        AnyModel::Relation(model) => {
            let spans: Vec<(Vec<Span>, Vec<Span>)> = corpus
                .iter()
                .map(|r| (r.aspects.clone(), r.opinions.clone()))
                .collect();
            let kept = extract_relations(model, &corpus, &spans, args.threshold)?;
            let mut out = corpus.clone();
            for (review, pairs) in out.iter_mut().zip(kept) {
                review.relations = pairs
                    .into_iter()
                    .map(|p| (p.aspect_index, p.opinion_index))
                    .collect();
            }
            out
        }
    };
    emit_corpus(args.out.as_ref(), &annotated)?;
    if args.out.is_some() {
        eprintln!(
            "predicted with {} model over {} review(s)",
            model.kind(),
            annotated.len()
        );
    }
    Ok(ExitCode::SUCCESS)
}

pub fn pipeline(args: &PipelineArgs, _json: bool) -> Result<ExitCode> {
    if args.models.len() != 3 {
        return Err(Error::Config(format!(
            "pipeline needs exactly three --model bundles (terms, sentiment, relations), got {}",
            args.models.len()
        )));
    }
    let mut tagger = None;
    let mut sentiment = None;
    let mut relation = None;
    for path in &args.models {
        match load_model(path)? {
            AnyModel::Tagger(m) if tagger.is_none() => tagger = Some(m),
            AnyModel::Sentiment(m) if sentiment.is_none() => sentiment = Some(m),
            AnyModel::Relation(m) if relation.is_none() => relation = Some(m),
            other => {
                return Err(Error::Config(format!(
                    "duplicate model kind '{}' in --model arguments",
                    other.kind()
                )))
            }
        }
    }
    let (tagger, sentiment, relation) = (
        tagger.ok_or_else(|| Error::Config("missing a terms (tagger) bundle".into()))?,
        sentiment.ok_or_else(|| Error::Config("missing a sentiment bundle".into()))?,
        relation.ok_or_else(|| Error::Config("missing a relations bundle".into()))?,
    );
    let corpus = load_corpus(&args.corpus)?;
    let annotated = run_pipeline(&corpus, &tagger, &sentiment, &relation, args.threshold)?;
    emit_corpus(args.out.as_ref(), &annotated)?;
    if args.out.is_some() {
        eprintln!("pipeline annotated {} review(s)", annotated.len());
    }
    Ok(ExitCode::SUCCESS)
}

fn align_by_id(gold: &[Review], pred: &[Review]) -> Result<()> {
    if gold.len() != pred.len() {
        return Err(Error::Config(format!(
            "gold corpus has {} reviews, predictions have {}",
            gold.len(),
            pred.len()
        )));
    }
    for (g, p) in gold.iter().zip(pred) {
        if g.id != p.id {
            return Err(Error::Config(format!(
                "review id mismatch: gold '{}' vs prediction '{}'",
                g.id, p.id
            )));
        }
        if g.tokens != p.tokens {
            return Err(Error::Config(format!(
                "review '{}' has different tokens in gold and predictions",
                g.id
            )));
        }
    }
    Ok(())
}

fn gold_relation_pairs(review: &Review) -> Vec<(Span, Span)> {
    review
        .relations
        .iter()
        .map(|&(a, o)| (review.aspects[a], review.opinions[o]))
        .collect()
}

/// Terms and relations predictions for the non-cv evaluate modes, either
/// from a predictions file or by running a model bundle.
fn predicted_spans(
    args: &EvaluateArgs,
    gold: &[Review],
) -> Result<(Vec<Vec<Span>>, Vec<Vec<Span>>)> {
    match (&args.pred, &args.model) {
        (Some(path), None) => {
            let pred = load_corpus(path)?;
            align_by_id(gold, &pred)?;
            Ok((
                pred.iter().map(|r| r.aspects.clone()).collect(),
                pred.iter().map(|r| r.opinions.clone()).collect(),
            ))
        }
        (None, Some(path)) => match load_model(path)? {
            AnyModel::Tagger(model) => {
                let spans = predict_corpus(&model, gold)?;
                Ok(spans.into_iter().unzip())
            }
            other => Err(Error::Config(format!(
                "terms evaluation needs a tagger bundle, found kind '{}'",
                other.kind()
            ))),
        },
        _ => Err(Error::Config(
            "provide exactly one of --pred or --model".into(),
        )),
    }
}

fn evaluate_terms(args: &EvaluateArgs, gold: &[Review], json: bool) -> Result<()> {
    let gold_aspects: Vec<Vec<Span>> = gold.iter().map(|r| r.aspects.clone()).collect();
    let gold_opinions: Vec<Vec<Span>> = gold.iter().map(|r| r.opinions.clone()).collect();
    let (pred_aspects, pred_opinions) = predicted_spans(args, gold)?;
    let aspects = strict_prf(&gold_aspects, &pred_aspects);
    let opinions = strict_prf(&gold_opinions, &pred_opinions);
    report::terms(aspects, opinions, json);
    Ok(())
}

fn evaluate_sentiment(args: &EvaluateArgs, gold: &[Review], json: bool) -> Result<()> {
    let gold_flat = gold_labels(gold)?;
    let predicted = match (&args.pred, &args.model) {
        (Some(path), None) => {
            let pred = load_corpus(path)?;
            align_by_id(gold, &pred)?;
            let mut labels = Vec::new();
            for (g, p) in gold.iter().zip(&pred) {
                for opinion in &g.opinions {
                    let matched = p
                        .opinions
                        .iter()
                        .find(|o| o.start == opinion.start && o.end == opinion.end)
                        .ok_or_else(|| {
                            Error::Config(format!(
                                "review '{}': prediction lacks opinion [{}, {})",
                                g.id, opinion.start, opinion.end
                            ))
                        })?;
                    labels.push(matched.sentiment.ok_or_else(|| {
                        Error::Config(format!(
                            "review '{}': predicted opinion [{}, {}) has no sentiment",
                            g.id, opinion.start, opinion.end
                        ))
                    })?);
                }
            }
            labels
        }
        (None, Some(path)) => match load_model(path)? {
            AnyModel::Sentiment(model) => {
                let mut labels = Vec::new();
                for review in gold {
                    for opinion in &review.opinions {
                        let (label, _) =
                            model.classify_opinion(&review.tokens, &review.pos, opinion)?;
                        labels.push(label);
                    }
                }
                labels
            }
            other => {
                return Err(Error::Config(format!(
                    "sentiment evaluation needs a sentiment bundle, found kind '{}'",
                    other.kind()
                )))
            }
        },
        _ => {
            return Err(Error::Config(
                "provide exactly one of --pred or --model".into(),
            ))
        }
    };
    let accuracy = sentiment_accuracy(&gold_flat, &predicted)?;
    report::sentiment(accuracy, json);
    Ok(())
}

fn evaluate_relations(args: &EvaluateArgs, gold: &[Review], json: bool) -> Result<()> {
    let gold_pairs: Vec<Vec<(Span, Span)>> = gold.iter().map(gold_relation_pairs).collect();
    let predicted: Vec<Vec<(Span, Span)>> = match (&args.pred, &args.model) {
        (Some(path), None) => {
            let pred = load_corpus(path)?;
            align_by_id(gold, &pred)?;
            pred.iter().map(gold_relation_pairs).collect()
        }
        (None, Some(path)) => match load_model(path)? {
            AnyModel::Relation(model) => {
                // Table-style setting: classify pairs over the gold spans.
                let spans: Vec<(Vec<Span>, Vec<Span>)> = gold
                    .iter()
                    .map(|r| (r.aspects.clone(), r.opinions.clone()))
                    .collect();
                extract_relations(&model, gold, &spans, args.threshold)?
                    .into_iter()
                    .map(|pairs| pairs.into_iter().map(|p| (p.aspect, p.opinion)).collect())
                    .collect()
            }
            other => {
                return Err(Error::Config(format!(
                    "relations evaluation needs a relation bundle, found kind '{}'",
                    other.kind()
                )))
            }
        },
        _ => {
            return Err(Error::Config(
                "provide exactly one of --pred or --model".into(),
            ))
        }
    };
    let prf = relation_prf(&gold_pairs, &predicted);
    report::relations(prf, json);
    Ok(())
}

/// One fold's scores; stages without data in the whole corpus are skipped.
#[derive(Debug, Clone)]
pub struct FoldScores {
    pub fold: usize,
    pub aspects: Prf,
    pub opinions: Prf,
    pub sentiment: Option<Accuracy>,
    pub relations: Option<Prf>,
}

fn evaluate_cv(args: &EvaluateArgs, gold: &[Review], json: bool) -> Result<()> {
    let hp = HyperParams::default();
    let pretrained = load_pretrained(args.embeddings.as_ref(), &hp)?;
    let plan = kfold(gold, args.k, args.seed)?;
    let run_sentiment = gold
        .iter()
        .any(|r| r.opinions.iter().any(|o| o.sentiment.is_some()));
    let run_relations = gold.iter().any(|r| !r.relations.is_empty());
    let folds: Vec<Result<FoldScores>> = (0..args.k)
        .into_par_iter()
        .map(|fold| {
            let (train_refs, test_refs) = plan.split(gold, fold);
            let train_set: Vec<Review> = train_refs.into_iter().cloned().collect();
            let test_set: Vec<Review> = test_refs.into_iter().cloned().collect();
            let fold_seed = args.seed.wrapping_add(fold as u64 + 1);

            let tagger_cfg = TaggerTrainConfig {
                kind: args.kind.clone(),
                use_pos: args.use_pos,
                hp,
                rms: RmsPropConfig::default(),
                epochs: args.epochs.unwrap_or(DEFAULT_EPOCHS_TERMS),
                seed: fold_seed,
            };
            let (tagger, _) = train_tagger(&train_set, pretrained.as_ref(), &tagger_cfg)?;
            let spans = predict_corpus(&tagger, &test_set)?;
            let (pred_aspects, pred_opinions): (Vec<_>, Vec<_>) = spans.into_iter().unzip();
            let gold_aspects: Vec<Vec<Span>> = test_set.iter().map(|r| r.aspects.clone()).collect();
            let gold_opinions: Vec<Vec<Span>> =
                test_set.iter().map(|r| r.opinions.clone()).collect();
            let aspects = strict_prf(&gold_aspects, &pred_aspects);
            let opinions = strict_prf(&gold_opinions, &pred_opinions);

            let sentiment = if run_sentiment {
                let cfg = SentimentTrainConfig {
                    hp,
                    rms: RmsPropConfig::default(),
                    epochs: args.epochs.unwrap_or(DEFAULT_EPOCHS_SENTIMENT),
                    seed: fold_seed,
                };
                let (model, _) = train_sentiment(&train_set, pretrained.as_ref(), &cfg)?;
                let gold_flat = gold_labels(&test_set)?;
                let mut predicted = Vec::new();
                for review in &test_set {
                    for opinion in &review.opinions {
                        let (label, _) =
                            model.classify_opinion(&review.tokens, &review.pos, opinion)?;
                        predicted.push(label);
                    }
                }
                Some(sentiment_accuracy(&gold_flat, &predicted)?)
            } else {
                None
            };

            let relations = if run_relations {
                let cfg = RelationTrainConfig {
                    hp,
                    rms: RmsPropConfig::default(),
                    epochs: args.epochs.unwrap_or(DEFAULT_EPOCHS_RELATIONS),
                    seed: fold_seed,
                };
                let (model, _) = train_relation(&train_set, pretrained.as_ref(), &cfg)?;
                let gold_pairs: Vec<Vec<(Span, Span)>> =
                    test_set.iter().map(gold_relation_pairs).collect();
                let spans: Vec<(Vec<Span>, Vec<Span>)> = test_set
                    .iter()
                    .map(|r| (r.aspects.clone(), r.opinions.clone()))
                    .collect();
                let predicted: Vec<Vec<(Span, Span)>> =
                    extract_relations(&model, &test_set, &spans, args.threshold)?
                        .into_iter()
                        .map(|pairs| pairs.into_iter().map(|p| (p.aspect, p.opinion)).collect())
                        .collect();
                Some(relation_prf(&gold_pairs, &predicted))
            } else {
                None
            };

            Ok(FoldScores {
                fold,
                aspects,
                opinions,
                sentiment,
                relations,
            })
        })
        .collect();
    let folds: Vec<FoldScores> = folds.into_iter().collect::<Result<_>>()?;
    let filter_recall = relsa::relation::filter_recall(gold);
    report::cross_validation(&folds, args.k, args.seed, filter_recall, json);
    Ok(())
}

pub fn evaluate(args: &EvaluateArgs, json: bool) -> Result<ExitCode> {
    let gold = load_corpus(&args.corpus)?;
    match args.mode {
        EvalMode::Terms => evaluate_terms(args, &gold, json)?,
        EvalMode::Sentiment => evaluate_sentiment(args, &gold, json)?,
        EvalMode::Relations => evaluate_relations(args, &gold, json)?,
        EvalMode::Cv => evaluate_cv(args, &gold, json)?,
    }
    Ok(ExitCode::SUCCESS)
}

pub fn gradcheck(args: &GradcheckArgs, json: bool) -> Result<ExitCode> {
    let reports = if args.kind == "all" {
        check::gradcheck_all(args.seed)?
    } else {
        check::validate_kind(&args.kind)?;
        vec![(
            args.kind.clone(),
            check::gradcheck_by_kind(&args.kind, args.seed)?,
        )]
    };
    let all_pass = reports.iter().all(|(_, r)| r.passes(REL_ERR_TOLERANCE));
    if json {
        let value = serde_json::json!({
            "tolerance": REL_ERR_TOLERANCE,
            "seed": args.seed,
            "pass": all_pass,
            "models": reports.iter().map(|(kind, r)| serde_json::json!({
                "kind": kind,
                "max_rel_err": r.max_rel_err,
                "pass": r.passes(REL_ERR_TOLERANCE),
                "groups": r.groups.iter().map(|g| serde_json::json!({
                    "name": g.name,
                    "entries": g.entries,
                    "max_rel_err": g.max_rel_err,
                })).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
        });
        println!("{value}");
    } else {
        for (kind, r) in &reports {
            println!("{kind}: max relative error {:.3e}", r.max_rel_err);
            for g in &r.groups {
                println!(
                    "  {:<28} {:>7} entries  max rel err {:.3e}",
                    g.name, g.entries, g.max_rel_err
                );
            }
            println!(
                "  -> {}",
                if r.passes(REL_ERR_TOLERANCE) {
                    "PASS"
                } else {
                    "FAIL"
                }
            );
        }
    }
    Ok(if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_NUMERIC)
    })
}

pub fn inspect(args: &InspectArgs, json: bool) -> Result<ExitCode> {
    let bundle = ModelBundle::load(&args.model)?;
    report::inspect(&bundle, json);
    Ok(ExitCode::SUCCESS)
}
