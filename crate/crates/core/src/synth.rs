//! Synthetic corpora for demos, smoke tests and the acceptance suite.
//!
//! The templated corpus is fully deterministic: thirty short reviews built
//! from fixed aspect phrases, sentiment-labeled opinion phrases and three
//! sentence frames, with gold relations. Every opinion phrase always carries
//! the same label, and two-pair sentences contribute negative relation
//! candidates, so the corpus is memorizable by all three components.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::Review;
use crate::iob2::{SentimentLabel, Span, SpanRole};

const ASPECTS: &[(&str, &str)] = &[
    ("battery life", "NN NN"),
    ("screen", "NN"),
    ("sake menu", "NN NN"),
    ("camera", "NN"),
    ("keyboard", "NN"),
    ("price", "NN"),
    ("carafe", "NN"),
    ("blade", "NN"),
    ("handle", "NN"),
    ("speaker", "NN"),
];

const OPINIONS: &[(&str, &str, SentimentLabel)] = &[
    ("great", "JJ", SentimentLabel::Positive),
    ("really nice", "RB JJ", SentimentLabel::Positive),
    ("sharp", "JJ", SentimentLabel::Positive),
    ("terrible", "JJ", SentimentLabel::Negative),
    ("marginal at best", "JJ IN JJS", SentimentLabel::Negative),
    ("awful", "JJ", SentimentLabel::Negative),
    ("okay", "JJ", SentimentLabel::Neutral),
    ("average", "JJ", SentimentLabel::Neutral),
    ("different", "JJ", SentimentLabel::Unknown),
    ("unusual", "JJ", SentimentLabel::Unknown),
];

struct Builder {
    tokens: Vec<String>,
    pos: Vec<String>,
    aspects: Vec<Span>,
    opinions: Vec<Span>,
    relations: Vec<(usize, usize)>,
}

impl Builder {
    fn new() -> Self {
        Builder {
            tokens: vec![],
            pos: vec![],
            aspects: vec![],
            opinions: vec![],
            relations: vec![],
        }
    }

    fn word(&mut self, token: &str, tag: &str) -> &mut Self {
        self.tokens.push(token.to_string());
        self.pos.push(tag.to_string());
        self
    }

    fn phrase(&mut self, phrase: &str, tags: &str) -> (usize, usize) {
        let start = self.tokens.len();
        for (token, tag) in phrase.split_whitespace().zip(tags.split_whitespace()) {
            self.word(token, tag);
        }
        (start, self.tokens.len())
    }

    fn aspect(&mut self, idx: usize) -> usize {
        let (phrase, tags) = ASPECTS[idx % ASPECTS.len()];
        let (start, end) = self.phrase(phrase, tags);
        self.aspects.push(Span::new(start, end, SpanRole::Aspect));
        self.aspects.len() - 1
    }

    fn opinion(&mut self, idx: usize) -> usize {
        let (phrase, tags, label) = OPINIONS[idx % OPINIONS.len()];
        let (start, end) = self.phrase(phrase, tags);
        self.opinions
            .push(Span::new(start, end, SpanRole::Opinion).with_sentiment(label));
        self.opinions.len() - 1
    }

    fn relate(&mut self, aspect: usize, opinion: usize) -> &mut Self {
        self.relations.push((aspect, opinion));
        self
    }

    fn build(self, id: String) -> Review {
        let review = Review {
            id,
            tokens: self.tokens,
            pos: self.pos,
            aspects: self.aspects,
            opinions: self.opinions,
            relations: self.relations,
        };
        review.validate().expect("template must be valid");
        review
    }
}

/// "the {aspect} is {opinion}"
fn frame_copula(id: String, aspect: usize, opinion: usize) -> Review {
    let mut b = Builder::new();
    b.word("the", "DT");
    let a = b.aspect(aspect);
    b.word("is", "VBZ");
    let o = b.opinion(opinion);
    b.relate(a, o);
    b.build(id)
}

/// "{opinion} {aspect} overall"
fn frame_fronted(id: String, aspect: usize, opinion: usize) -> Review {
    let mut b = Builder::new();
    let o = b.opinion(opinion);
    let a = b.aspect(aspect);
    b.word("overall", "RB");
    b.relate(a, o);
    b.build(id)
}

/// "the {a1} is {o1} but the {a2} is {o2}" with two gold relations; the
/// cross pairs are negative candidates.
fn frame_contrast(id: String, a1: usize, o1: usize, a2: usize, o2: usize) -> Review {
    let mut b = Builder::new();
    b.word("the", "DT");
    let first_aspect = b.aspect(a1);
    b.word("is", "VBZ");
    let first_opinion = b.opinion(o1);
    b.word("but", "CC");
    b.word("the", "DT");
    let second_aspect = b.aspect(a2);
    b.word("is", "VBZ");
    let second_opinion = b.opinion(o2);
    b.relate(first_aspect, first_opinion);
    b.relate(second_aspect, second_opinion);
    b.build(id)
}

/// The deterministic thirty-review corpus: twelve copula sentences, eight
/// fronted-opinion sentences and ten two-pair contrast sentences.
pub fn templated_corpus() -> Vec<Review> {
    let mut reviews = Vec::with_capacity(30);
    for i in 0..12 {
        reviews.push(frame_copula(format!("syn{:02}", i), i, i));
    }
    for i in 0..8 {
        reviews.push(frame_fronted(format!("syn{:02}", 12 + i), i + 3, i + 5));
    }
    for i in 0..10 {
        reviews.push(frame_contrast(
            format!("syn{:02}", 20 + i),
            i,
            i + 2,
            i + 4,
            i + 7,
        ));
    }
    reviews
}

/// Single-opinion reviews with an exact count of positive gold labels;
/// review order is shuffled by the seed. The Positive-Only baseline scores
/// `positive / total` on this corpus to machine precision.
pub fn frequency_corpus(total: usize, positive: usize, seed: u64) -> Vec<Review> {
    assert!(positive <= total);
    let others = [
        SentimentLabel::Negative,
        SentimentLabel::Neutral,
        SentimentLabel::Unknown,
    ];
    let mut reviews: Vec<Review> = (0..total)
        .map(|i| {
            let label = if i < positive {
                SentimentLabel::Positive
            } else {
                others[i % others.len()]
            };
            let (word, tags, _) = OPINIONS
                .iter()
                .find(|(_, _, l)| *l == label)
                .expect("label has a phrase");
            let mut b = Builder::new();
            b.word("item", "NN");
            b.word("feels", "VBZ");
            let start = b.tokens.len();
            b.phrase(word, tags);
            let end = b.tokens.len();
            b.opinions
                .push(Span::new(start, end, SpanRole::Opinion).with_sentiment(label));
            b.build(format!("freq{:04}", i))
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    reviews.shuffle(&mut rng);
    reviews
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relation::generate_candidates;

    #[test]
    fn corpus_has_thirty_valid_reviews() {
        let corpus = templated_corpus();
        assert_eq!(corpus.len(), 30);
        for r in &corpus {
            r.validate().unwrap();
            assert!(!r.relations.is_empty());
        }
    }

    #[test]
    fn first_review_is_the_battery_life_sentence() {
        let corpus = templated_corpus();
        let r = &corpus[0];
        assert_eq!(r.tokens.join(" "), "the battery life is great");
        assert_eq!(r.aspects[0].start, 1);
        assert_eq!(r.aspects[0].end, 3);
        assert_eq!(r.opinions[0].sentiment, Some(SentimentLabel::Positive));
    }

    #[test]
    fn all_four_labels_are_well_represented() {
        let corpus = templated_corpus();
        let mut counts = [0usize; 4];
        for r in &corpus {
            for o in &r.opinions {
                counts[o.sentiment.unwrap().index()] += 1;
            }
        }
        for (i, &c) in counts.iter().enumerate() {
            assert!(c >= 5, "label {i} appears only {c} times");
        }
    }

    #[test]
    fn contrast_frames_contribute_negative_candidates() {
        let corpus = templated_corpus();
        let mut negatives = 0;
        for r in &corpus {
            let gold: std::collections::HashSet<_> = r.relations.iter().copied().collect();
            for c in generate_candidates(&r.aspects, &r.opinions) {
                if !gold.contains(&(c.aspect_index, c.opinion_index)) {
                    negatives += 1;
                }
            }
        }
        assert_eq!(negatives, 20, "two cross pairs per contrast sentence");
    }

    #[test]
    fn frequency_corpus_has_the_exact_positive_count() {
        for (total, positive) in [(20, 10), (1000, 647), (10, 9)] {
            let corpus = frequency_corpus(total, positive, 9);
            let found = corpus
                .iter()
                .flat_map(|r| &r.opinions)
                .filter(|o| o.sentiment == Some(SentimentLabel::Positive))
                .count();
            assert_eq!(found, positive);
            assert_eq!(corpus.len(), total);
        }
    }

    #[test]
    fn frequency_corpus_is_seed_deterministic() {
        assert_eq!(frequency_corpus(50, 20, 1), frequency_corpus(50, 20, 1));
        assert_ne!(frequency_corpus(50, 20, 1), frequency_corpus(50, 20, 2));
    }
}
