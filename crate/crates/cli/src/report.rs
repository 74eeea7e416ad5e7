//! Report rendering: aligned text tables on stdout, or JSON with --json.

use relsa::bundle::ModelBundle;
use relsa::eval::{Accuracy, Prf};

use crate::commands::FoldScores;

fn prf_row(label: &str, prf: &Prf) {
    println!(
        "{:<10} P {:>7.3}  R {:>7.3}  F1 {:>7.3}   (tp {} fp {} fn {})",
        label,
        prf.precision,
        prf.recall,
        prf.f1,
        prf.counts.true_positive,
        prf.counts.false_positive,
        prf.counts.false_negative
    );
}

pub fn terms(aspects: Prf, opinions: Prf, json: bool) {
    if json {
        println!(
            "{}",
            serde_json::json!({ "aspects": aspects, "opinions": opinions })
        );
    } else {
        prf_row("aspects", &aspects);
        prf_row("opinions", &opinions);
    }
}

pub fn sentiment(accuracy: Accuracy, json: bool) {
    if json {
        println!("{}", serde_json::json!(accuracy));
    } else {
        println!(
            "accuracy {:.3}   correct {}   incorrect {}",
            accuracy.accuracy, accuracy.correct, accuracy.incorrect
        );
    }
}

pub fn relations(prf: Prf, json: bool) {
    if json {
        println!("{}", serde_json::json!(prf));
    } else {
        prf_row("relations", &prf);
    }
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct MeanPrf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn mean_prf<'a>(values: impl Iterator<Item = &'a Prf>) -> Option<MeanPrf> {
    let collected: Vec<&Prf> = values.collect();
    if collected.is_empty() {
        return None;
    }
    let n = collected.len() as f64;
    Some(MeanPrf {
        precision: collected.iter().map(|p| p.precision).sum::<f64>() / n,
        recall: collected.iter().map(|p| p.recall).sum::<f64>() / n,
        f1: collected.iter().map(|p| p.f1).sum::<f64>() / n,
    })
}

fn mean_prf_row(label: &str, prf: &MeanPrf) {
    println!(
        "{:<10} P {:>7.3}  R {:>7.3}  F1 {:>7.3}",
        label, prf.precision, prf.recall, prf.f1
    );
}

/// Macro-averaged cross-validation report: term extraction per role,
/// sentiment accuracy with mean correct/incorrect counts, relation P/R/F1.
pub fn cross_validation(
    folds: &[FoldScores],
    k: usize,
    seed: u64,
    filter_recall: Option<f64>,
    json: bool,
) {
    let aspects = mean_prf(folds.iter().map(|f| &f.aspects)).expect("at least one fold");
    let opinions = mean_prf(folds.iter().map(|f| &f.opinions)).expect("at least one fold");
    let sentiments: Vec<&Accuracy> = folds.iter().filter_map(|f| f.sentiment.as_ref()).collect();
    let sentiment_mean = (!sentiments.is_empty()).then(|| {
        let n = sentiments.len() as f64;
        (
            sentiments.iter().map(|a| a.accuracy).sum::<f64>() / n,
            sentiments.iter().map(|a| a.correct as f64).sum::<f64>() / n,
            sentiments.iter().map(|a| a.incorrect as f64).sum::<f64>() / n,
        )
    });
    let relations = mean_prf(folds.iter().filter_map(|f| f.relations.as_ref()));

    if json {
        let value = serde_json::json!({
            "k": k,
            "seed": seed,
            "terms": { "aspects": aspects, "opinions": opinions },
            "sentiment": sentiment_mean.map(|(accuracy, correct, incorrect)| serde_json::json!({
                "accuracy": accuracy, "correct": correct, "incorrect": incorrect,
            })),
            "relations": relations,
            "relation_filter_recall": filter_recall,
            "folds": folds.iter().map(|f| serde_json::json!({
                "fold": f.fold,
                "aspects": f.aspects,
                "opinions": f.opinions,
                "sentiment": f.sentiment,
                "relations": f.relations,
            })).collect::<Vec<_>>(),
        });
        println!("{value}");
        return;
    }

    println!("{k}-fold cross-validation (seed {seed}), macro-averaged:");
    println!("-- term extraction --");
    mean_prf_row("aspects", &aspects);
    mean_prf_row("opinions", &opinions);
    match sentiment_mean {
        Some((accuracy, correct, incorrect)) => {
            println!("-- sentiment (gold opinion terms) --");
            println!(
                "accuracy {:.3}   correct {:.1}   incorrect {:.1}",
                accuracy, correct, incorrect
            );
        }
        None => println!("-- sentiment skipped: no labeled opinions in the corpus --"),
    }
    match relations {
        Some(prf) => {
            println!("-- relations (gold spans) --");
            mean_prf_row("relations", &prf);
            if let Some(recall) = filter_recall {
                println!(
                    "distance filter keeps {:.1}% of gold relations",
                    recall * 100.0
                );
            }
        }
        None => println!("-- relations skipped: no gold relations in the corpus --"),
    }
}

pub fn inspect(bundle: &ModelBundle, json: bool) {
    if json {
        let value = serde_json::json!({
            "format_version": bundle.format_version,
            "kind": bundle.kind,
            "use_pos": bundle.use_pos,
            "hyperparams": bundle.hyperparams,
            "vocabulary_size": bundle.vocab_words.len(),
            "total_values": bundle.total_values(),
            "params": bundle.params.iter().map(|(name, t)| serde_json::json!({
                "name": name, "rows": t.rows(), "cols": t.cols(),
            })).collect::<Vec<_>>(),
        });
        println!("{value}");
        return;
    }
    println!("kind            {}", bundle.kind);
    println!("format version  {}", bundle.format_version);
    println!("vocabulary      {} entries", bundle.vocab_words.len());
    println!("pos features    {}", bundle.use_pos);
    println!(
        "sizes           d_word {} d_pos {} d_dist {} d_conv {} l_conv {} d_gru {} d_pol {} d_rel {} l_pol {} l_rel {} dropout {}",
        bundle.hyperparams.d_word,
        bundle.hyperparams.d_pos,
        bundle.hyperparams.d_dist,
        bundle.hyperparams.d_conv,
        bundle.hyperparams.l_conv,
        bundle.hyperparams.d_gru,
        bundle.hyperparams.d_pol,
        bundle.hyperparams.d_rel,
        bundle.hyperparams.l_pol,
        bundle.hyperparams.l_rel,
        bundle.hyperparams.dropout,
    );
    println!(
        "parameters ({} tensors, {} values):",
        bundle.params.len(),
        bundle.total_values()
    );
    for (name, t) in &bundle.params {
        println!(
            "  {:<28} {:>6} x {:<6} = {}",
            name,
            t.rows(),
            t.cols(),
            t.len()
        );
    }
}
