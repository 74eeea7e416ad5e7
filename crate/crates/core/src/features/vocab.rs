//! Vocabulary handling, POS tag inventory and the word2vec-style text
//! embedding loader.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::{Parameter, Tensor2};

pub const UNK_TOKEN: &str = "<UNK>";
pub const PAD_TOKEN: &str = "<PAD>";

/// Dense word index with dedicated unknown and padding entries.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
    unk_index: usize,
    pad_index: usize,
}

impl Vocabulary {
    /// Builds a vocabulary from distinct, already-lowercased words; `<UNK>`
    /// and `<PAD>` are appended after them.
    pub fn from_words(mut words: Vec<String>) -> Self {
        let unk_index = words.len();
        let pad_index = words.len() + 1;
        words.push(UNK_TOKEN.to_string());
        words.push(PAD_TOKEN.to_string());
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        Vocabulary {
            words,
            index,
            unk_index,
            pad_index,
        }
    }

    /// Sorted unique lowercased tokens of a corpus; used when no pretrained
    /// embeddings are supplied.
    pub fn from_tokens<'a>(tokens: impl IntoIterator<Item = &'a str>) -> Self {
        let mut unique: Vec<String> = tokens
            .into_iter()
            .map(str::to_lowercase)
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        unique.retain(|w| w != UNK_TOKEN && w != PAD_TOKEN);
        Vocabulary::from_words(unique)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn unk_index(&self) -> usize {
        self.unk_index
    }

    pub fn pad_index(&self) -> usize {
        self.pad_index
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Index of a token, lowercased; unseen words map to `<UNK>`.
    pub fn index_of(&self, word: &str) -> usize {
        let lower = word.to_lowercase();
        self.index.get(&lower).copied().unwrap_or(self.unk_index)
    }

    pub fn encode_tokens(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.index_of(t)).collect()
    }

    /// Rebuilds from a serialized word list (bundle loading). The last two
    /// entries must be the unknown and padding tokens.
    pub fn from_saved_words(words: Vec<String>) -> Result<Self> {
        if words.len() < 2
            || words[words.len() - 2] != UNK_TOKEN
            || words[words.len() - 1] != PAD_TOKEN
        {
            return Err(Error::Bundle(
                "vocabulary word list must end with <UNK> and <PAD>".to_string(),
            ));
        }
        let mut base = words;
        base.truncate(base.len() - 2);
        Ok(Vocabulary::from_words(base))
    }
}

/// The 45 Penn Treebank tags plus one padding tag, one-hot encoded at width
/// 46. Unknown tags map to the padding slot.
#[derive(Debug, Clone)]
pub struct PosTagSet {
    index: HashMap<&'static str, usize>,
}

pub const PTB_TAGS: [&str; 45] = [
    "CC", "CD", "DT", "EX", "FW", "IN", "JJ", "JJR", "JJS", "LS", "MD", "NN", "NNS", "NNP", "NNPS",
    "PDT", "POS", "PRP", "PRP$", "RB", "RBR", "RBS", "RP", "SYM", "TO", "UH", "VB", "VBD", "VBG",
    "VBN", "VBP", "VBZ", "WDT", "WP", "WP$", "WRB", "#", "$", "''", "(", ")", ",", ".", ":", "``",
];

impl PosTagSet {
    pub const WIDTH: usize = 46;

    pub fn new() -> Self {
        let index = PTB_TAGS.iter().enumerate().map(|(i, &t)| (t, i)).collect();
        PosTagSet { index }
    }

    pub fn padding_index(&self) -> usize {
        PTB_TAGS.len()
    }

    pub fn index_of(&self, tag: &str) -> usize {
        self.index
            .get(tag)
            .copied()
            .unwrap_or_else(|| self.padding_index())
    }

    pub fn encode_tags(&self, tags: &[String]) -> Vec<usize> {
        tags.iter().map(|t| self.index_of(t)).collect()
    }
}

impl Default for PosTagSet {
    fn default() -> Self {
        PosTagSet::new()
    }
}

/// Loads word2vec-style text embeddings: a "count dim" header line followed
/// by "word v1 .. vdim" lines in frequency order. Keeps at most `trim_to`
/// words, lowercases them, and appends an `<UNK>` row (mean of all kept
/// vectors) and a zero `<PAD>` row.
pub fn load_embeddings(
    path: &Path,
    trim_to: usize,
    expected_dim: usize,
) -> Result<(Vocabulary, Parameter)> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| embedding_err(1, "missing header line"))??;
    let mut parts = header.split_whitespace();
    let count: usize = parts
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| embedding_err(1, "header must start with the word count"))?;
    let dim: usize = parts
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| embedding_err(1, "header must contain the vector dimension"))?;
    if dim != expected_dim {
        return Err(embedding_err(
            1,
            &format!("vector dimension {dim} does not match configured {expected_dim}"),
        ));
    }

    let keep = count.min(trim_to);
    let mut words: Vec<String> = Vec::with_capacity(keep);
    let mut seen: HashMap<String, ()> = HashMap::with_capacity(keep);
    let mut rows: Vec<f64> = Vec::with_capacity(keep * dim);
    for entry in 0..keep {
        let line_no = entry + 2;
        let line = lines
            .next()
            .ok_or_else(|| embedding_err(line_no, "unexpected end of file"))??;
        let mut fields = line.split_whitespace();
        let word = fields
            .next()
            .ok_or_else(|| embedding_err(line_no, "empty line"))?
            .to_lowercase();
        let mut values = Vec::with_capacity(dim);
        for field in fields {
            let v: f64 = field
                .parse()
                .map_err(|_| embedding_err(line_no, &format!("bad float '{field}'")))?;
            values.push(v);
        }
        if values.len() != dim {
            return Err(embedding_err(
                line_no,
                &format!("expected {dim} values, found {}", values.len()),
            ));
        }
        if seen.insert(word.clone(), ()).is_some() {
            continue; // duplicate after lowercasing; keep the more frequent row
        }
        words.push(word);
        rows.extend_from_slice(&values);
    }

    let kept = words.len();
    let vocab = Vocabulary::from_words(words);
    let mut table = Tensor2::zeros(vocab.len(), dim);
    table.data_mut()[..kept * dim].copy_from_slice(&rows);
    // <UNK> row: mean of all loaded vectors. <PAD> stays zero.
    if kept > 0 {
        for d in 0..dim {
            let mean = (0..kept).map(|r| table.get(r, d)).sum::<f64>() / kept as f64;
            table.set(vocab.unk_index(), d, mean);
        }
    }
    Ok((vocab, Parameter::new("word_embed", table)))
}

fn embedding_err(line: usize, reason: &str) -> Error {
    Error::EmbeddingFile {
        line,
        reason: reason.to_string(),
    }
}
