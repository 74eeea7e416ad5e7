//! Three-stage pipeline: extract terms, label the predicted opinion terms
//! with sentiments, then link predicted aspect-opinion pairs. The output
//! uses the corpus schema, so pipeline predictions load back as a corpus.

use crate::corpus::Review;
use crate::error::Result;
use crate::relation::{extract_relations, RelationModel};
use crate::sentiment::SentimentModel;
use crate::tagger::TaggerModel;

/// Annotates every review with predicted aspects, sentiment-labeled
/// opinions and relations. Reviews where stage 1 finds nothing pass through
/// with empty annotations and never reach the later stages.
pub fn run_pipeline(
    corpus: &[Review],
    tagger: &TaggerModel,
    sentiment: &SentimentModel,
    relation: &RelationModel,
    threshold: f64,
) -> Result<Vec<Review>> {
    let mut annotated = Vec::with_capacity(corpus.len());
    for review in corpus {
        let (aspects, mut opinions) = tagger.predict_review(&review.tokens, &review.pos)?;
        let mut relations = Vec::new();
        if !(aspects.is_empty() && opinions.is_empty()) {
            for opinion in &mut opinions {
                let (label, _) =
                    sentiment.classify_opinion(&review.tokens, &review.pos, opinion)?;
                opinion.sentiment = Some(label);
            }
            let kept = extract_relations(
                relation,
                std::slice::from_ref(review),
                &[(aspects.clone(), opinions.clone())],
                threshold,
            )?;
            relations = kept
                .into_iter()
                .next()
                .unwrap()
                .into_iter()
                .map(|pair| (pair.aspect_index, pair.opinion_index))
                .collect();
        }
        annotated.push(Review {
            id: review.id.clone(),
            tokens: review.tokens.clone(),
            pos: review.pos.clone(),
            aspects,
            opinions,
            relations,
        });
    }
    Ok(annotated)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_corpus, write_corpus};
    use crate::features::{HyperParams, PosTagSet};
    use crate::relation::{train_relation, RelationTrainConfig, DEFAULT_THRESHOLD};
    use crate::sentiment::{train_sentiment, SentimentTrainConfig};
    use crate::synth::templated_corpus;
    use crate::tagger::{train_tagger, TaggerTrainConfig};

    fn tiny_hp() -> HyperParams {
        HyperParams {
            d_word: 8,
            d_pos: PosTagSet::WIDTH,
            d_dist: 3,
            d_conv: 4,
            l_conv: 3,
            d_gru: 6,
            d_pol: 6,
            d_rel: 6,
            l_pol: 8,
            l_rel: 8,
            dropout: 0.5,
        }
    }

    #[test]
    fn pipeline_output_round_trips_as_a_corpus() {
        let corpus: Vec<_> = templated_corpus().into_iter().take(6).collect();
        let (tagger, _) = train_tagger(
            &corpus,
            None,
            &TaggerTrainConfig {
                kind: "stacked".to_string(),
                hp: tiny_hp(),
                epochs: 2,
                seed: 1,
                ..TaggerTrainConfig::default()
            },
        )
        .unwrap();
        let (sentiment, _) = train_sentiment(
            &corpus,
            None,
            &SentimentTrainConfig {
                hp: tiny_hp(),
                epochs: 2,
                seed: 1,
                ..SentimentTrainConfig::default()
            },
        )
        .unwrap();
        let (relation, _) = train_relation(
            &corpus,
            None,
            &RelationTrainConfig {
                hp: tiny_hp(),
                epochs: 2,
                seed: 1,
                ..RelationTrainConfig::default()
            },
        )
        .unwrap();
        let annotated =
            run_pipeline(&corpus, &tagger, &sentiment, &relation, DEFAULT_THRESHOLD).unwrap();
        assert_eq!(annotated.len(), corpus.len());
        for r in &annotated {
            r.validate().unwrap();
            // Every predicted opinion carries a sentiment.
            for o in &r.opinions {
                assert!(o.sentiment.is_some());
            }
        }
        let mut bytes = Vec::new();
        write_corpus(&mut bytes, &annotated).unwrap();
        let reloaded = parse_corpus(std::io::Cursor::new(bytes)).unwrap();
        assert_eq!(reloaded, annotated);
    }

    #[test]
    fn empty_stage_one_output_short_circuits() {
        let corpus: Vec<_> = templated_corpus().into_iter().take(3).collect();
        let (mut tagger, _) = train_tagger(
            &corpus,
            None,
            &TaggerTrainConfig {
                kind: "rnn".to_string(),
                hp: tiny_hp(),
                epochs: 0,
                seed: 1,
                ..TaggerTrainConfig::default()
            },
        )
        .unwrap();
        // Zero both heads: uniform probabilities, all-O predictions.
        use crate::nn::ParamSet;
        for p in tagger.params_mut() {
            if p.name.contains("head") {
                p.value.fill(0.0);
            }
        }
        let (sentiment, _) = train_sentiment(
            &corpus,
            None,
            &SentimentTrainConfig {
                hp: tiny_hp(),
                epochs: 0,
                seed: 1,
                ..SentimentTrainConfig::default()
            },
        )
        .unwrap();
        let (relation, _) = train_relation(
            &corpus,
            None,
            &RelationTrainConfig {
                hp: tiny_hp(),
                epochs: 0,
                seed: 1,
                ..RelationTrainConfig::default()
            },
        )
        .unwrap();
        let annotated =
            run_pipeline(&corpus, &tagger, &sentiment, &relation, DEFAULT_THRESHOLD).unwrap();
        for r in &annotated {
            assert!(r.aspects.is_empty());
            assert!(r.opinions.is_empty());
            assert!(r.relations.is_empty());
        }
    }
}
