//! Character-level byte-pair encoding with an end-of-word marker.
//!
//! Every word is split into characters and its last character carries the
//! end-of-word marker, so `ab` starts as `a b</w>`. Training repeatedly merges
//! the most frequent adjacent pair (ties: lexicographically smallest pair)
//! until the vocabulary budget is used up or no pair occurs more than once.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{self, BufRead, Write};

use thiserror::Error;

pub const PAD: u32 = 0;
pub const BOS: u32 = 1;
pub const EOS: u32 = 2;
pub const UNK: u32 = 3;
pub const SPECIALS: [&str; 4] = ["<pad>", "<s>", "</s>", "<unk>"];
pub const END_OF_WORD: &str = "</w>";
pub const DEFAULT_MAX_VOCAB: usize = 10_000;
const FORMAT_TAG: &str = "bpe-v1";

#[derive(Debug, Error)]
pub enum BpeError {
    #[error("cannot train on an empty corpus")]
    EmptyCorpus,
    #[error("vocabulary budget {max_vocab} is below the {needed} entries needed for specials and the alphabet")]
    VocabTooSmall { max_vocab: usize, needed: usize },
    #[error("token id {0} is outside the vocabulary")]
    UnknownId(u32),
    #[error("bad model file at line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Symbol {
    text: String,
    end_of_word: bool,
}

impl Symbol {
    fn form(&self) -> String {
        if self.end_of_word {
            format!("{}{END_OF_WORD}", self.text)
        } else {
            self.text.clone()
        }
    }

    fn from_form(form: &str) -> Self {
        match form.strip_suffix(END_OF_WORD) {
            Some(text) if !text.is_empty() => Symbol { text: text.to_string(), end_of_word: true },
            _ => Symbol { text: form.to_string(), end_of_word: false },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BpeModel {
    max_vocab: usize,
    /// Non-special entries; id = index + SPECIALS.len().
    symbols: Vec<Symbol>,
    index: HashMap<Symbol, u32>,
    merges: Vec<(u32, u32)>,
    /// (left, right) -> (rank, merged id)
    merge_rank: HashMap<(u32, u32), (usize, u32)>,
}

impl BpeModel {
    fn with_alphabet(max_vocab: usize, alphabet: &BTreeSet<char>) -> Self {
        let mut model = BpeModel {
            max_vocab,
            symbols: Vec::new(),
            index: HashMap::new(),
            merges: Vec::new(),
            merge_rank: HashMap::new(),
        };
        for &c in alphabet {
            for end_of_word in [false, true] {
                model.intern(Symbol { text: c.to_string(), end_of_word });
            }
        }
        model
    }

    fn intern(&mut self, sym: Symbol) -> u32 {
        if let Some(&id) = self.index.get(&sym) {
            return id;
        }
        let id = (self.symbols.len() + SPECIALS.len()) as u32;
        self.index.insert(sym.clone(), id);
        self.symbols.push(sym);
        id
    }

    fn symbol(&self, id: u32) -> Option<&Symbol> {
        (id as usize).checked_sub(SPECIALS.len()).and_then(|i| self.symbols.get(i))
    }

    fn add_merge(&mut self, left: u32, right: u32) -> u32 {
        let (l, r) = (self.symbol(left).expect("left id"), self.symbol(right).expect("right id"));
        let merged = Symbol { text: format!("{}{}", l.text, r.text), end_of_word: r.end_of_word };
        let id = self.intern(merged);
        self.merge_rank.insert((left, right), (self.merges.len(), id));
        self.merges.push((left, right));
        id
    }

    pub fn vocab_size(&self) -> usize {
        SPECIALS.len() + self.symbols.len()
    }

    pub fn max_vocab(&self) -> usize {
        self.max_vocab
    }

    pub fn merge_count(&self) -> usize {
        self.merges.len()
    }

    /// Merges as (left, right) subword strings, in training order.
    pub fn merges(&self) -> Vec<(String, String)> {
        self.merges.iter().map(|&(l, r)| (self.token(l).unwrap(), self.token(r).unwrap())).collect()
    }

    /// Subword string for an id, with the end-of-word marker where present.
    pub fn token(&self, id: u32) -> Option<String> {
        match SPECIALS.get(id as usize) {
            Some(s) => Some(s.to_string()),
            None => self.symbol(id).map(Symbol::form),
        }
    }

    pub fn id_of(&self, subword: &str) -> Option<u32> {
        self.index.get(&Symbol::from_form(subword)).copied()
    }

    /// Copy keeping only the first `n` merges (vocabulary entries created by
    /// later merges are dropped too).
    pub fn truncated(&self, n: usize) -> BpeModel {
        let alphabet: BTreeSet<char> = self
            .symbols
            .iter()
            .filter(|s| s.text.chars().count() == 1)
            .filter_map(|s| s.text.chars().next())
            .collect();
        let mut out = BpeModel::with_alphabet(self.max_vocab, &alphabet);
        for &(l, r) in self.merges.iter().take(n) {
            let l = out.intern(self.symbol(l).unwrap().clone());
            let r = out.intern(self.symbol(r).unwrap().clone());
            out.add_merge(l, r);
        }
        out
    }

    fn word_ids(&self, word: &str) -> Vec<u32> {
        let chars: Vec<char> = word.chars().collect();
        let n = chars.len();
        chars
            .into_iter()
            .enumerate()
            .map(|(i, c)| {
                let sym = Symbol { text: c.to_string(), end_of_word: i + 1 == n };
                self.index.get(&sym).copied().unwrap_or(UNK)
            })
            .collect()
    }

    fn apply_merges(&self, mut ids: Vec<u32>) -> Vec<u32> {
        loop {
            let best = ids
                .windows(2)
                .filter_map(|w| self.merge_rank.get(&(w[0], w[1])).map(|&(rank, id)| (rank, (w[0], w[1]), id)))
                .min();
            let Some((_, pair, merged)) = best else {
                return ids;
            };
            ids = merge_pair(&ids, pair, merged);
        }
    }

    /// Subword ids for `text`, without BOS/EOS.
    pub fn encode(&self, text: &str) -> Vec<u32> {
        text.split_whitespace().flat_map(|w| self.apply_merges(self.word_ids(w))).collect()
    }

    /// Inverse of [`encode`](Self::encode); special ids are skipped.
    pub fn decode(&self, ids: &[u32]) -> Result<String, BpeError> {
        let mut out = String::new();
        for &id in ids {
            if (id as usize) < SPECIALS.len() {
                continue;
            }
            let sym = self.symbol(id).ok_or(BpeError::UnknownId(id))?;
            out.push_str(&sym.text);
            if sym.end_of_word {
                out.push(' ');
            }
        }
        Ok(out.trim_end().to_string())
    }

    pub fn write<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{FORMAT_TAG} {}", self.max_vocab)?;
        for (l, r) in self.merges() {
            writeln!(out, "{l}\t{r}")?;
        }
        writeln!(out)?;
        for id in 0..self.vocab_size() as u32 {
            writeln!(out, "{}\t{id}", self.token(id).unwrap())?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(input: R) -> Result<BpeModel, BpeError> {
        let bad = |line: usize, reason: String| BpeError::Format { line, reason };
        let mut lines = input.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| bad(1, "empty file".into()))?;
        let header = header?;
        let max_vocab = header
            .strip_prefix(FORMAT_TAG)
            .and_then(|rest| rest.trim().parse::<usize>().ok())
            .ok_or_else(|| bad(1, format!("expected `{FORMAT_TAG} <max_vocab>`, got {header:?}")))?;

        let mut merges = Vec::new();
        let mut vocab: Vec<String> = Vec::new();
        let mut in_vocab = false;
        for (i, line) in lines {
            let line = line?;
            let lineno = i + 1;
            if !in_vocab {
                if line.is_empty() {
                    in_vocab = true;
                    continue;
                }
                let (l, r) = line.split_once('\t').ok_or_else(|| bad(lineno, "merge without a tab".into()))?;
                merges.push((l.to_string(), r.to_string()));
            } else {
                if line.is_empty() {
                    continue;
                }
                let (tok, id) = line.rsplit_once('\t').ok_or_else(|| bad(lineno, "vocab line without a tab".into()))?;
                let id: usize = id.parse().map_err(|_| bad(lineno, format!("bad id {id:?}")))?;
                if id != vocab.len() {
                    return Err(bad(lineno, format!("ids must be dense; expected {}, got {id}", vocab.len())));
                }
                vocab.push(tok.to_string());
            }
        }
        if vocab.len() < SPECIALS.len() || vocab[..SPECIALS.len()] != SPECIALS {
            return Err(bad(0, "vocabulary must start with the special tokens".into()));
        }

        let mut model = BpeModel {
            max_vocab,
            symbols: Vec::new(),
            index: HashMap::new(),
            merges: Vec::new(),
            merge_rank: HashMap::new(),
        };
        for form in &vocab[SPECIALS.len()..] {
            let before = model.symbols.len();
            model.intern(Symbol::from_form(form));
            if model.symbols.len() == before {
                return Err(bad(0, format!("duplicate vocabulary entry {form:?}")));
            }
        }
        for (l, r) in merges {
            let (Some(li), Some(ri)) = (model.id_of(&l), model.id_of(&r)) else {
                return Err(bad(0, format!("merge ({l:?}, {r:?}) refers to unknown subwords")));
            };
            let before = model.symbols.len();
            model.add_merge(li, ri);
            if model.symbols.len() != before {
                return Err(bad(0, format!("merge ({l:?}, {r:?}) produces a subword missing from the vocabulary")));
            }
        }
        Ok(model)
    }
}

fn merge_pair(ids: &[u32], pair: (u32, u32), merged: u32) -> Vec<u32> {
    let mut out = Vec::with_capacity(ids.len());
    let mut i = 0;
    while i < ids.len() {
        if i + 1 < ids.len() && (ids[i], ids[i + 1]) == pair {
            out.push(merged);
            i += 2;
        } else {
            out.push(ids[i]);
            i += 1;
        }
    }
    out
}

/// Learns merges from whitespace-tokenized `corpus`.
pub fn train_bpe<S: AsRef<str>>(corpus: &[S], max_vocab: usize) -> Result<BpeModel, BpeError> {
    let mut word_freq: BTreeMap<&str, usize> = BTreeMap::new();
    for line in corpus {
        for w in line.as_ref().split_whitespace() {
            *word_freq.entry(w).or_default() += 1;
        }
    }
    if word_freq.is_empty() {
        return Err(BpeError::EmptyCorpus);
    }
    let alphabet: BTreeSet<char> = word_freq.keys().flat_map(|w| w.chars()).collect();
    let mut model = BpeModel::with_alphabet(max_vocab, &alphabet);
    if model.vocab_size() > max_vocab {
        return Err(BpeError::VocabTooSmall { max_vocab, needed: model.vocab_size() });
    }

    let mut words: Vec<(Vec<u32>, usize)> = word_freq.iter().map(|(w, &f)| (model.word_ids(w), f)).collect();
    while model.vocab_size() < max_vocab {
        let mut counts: HashMap<(u32, u32), usize> = HashMap::new();
        for (ids, f) in &words {
            for w in ids.windows(2) {
                *counts.entry((w[0], w[1])).or_default() += f;
            }
        }
        let Some((&pair, &freq)) = counts.iter().max_by(|a, b| {
            a.1.cmp(b.1).then_with(|| {
                let ka = (model.token(a.0 .0), model.token(a.0 .1));
                let kb = (model.token(b.0 .0), model.token(b.0 .1));
                kb.cmp(&ka)
            })
        }) else {
            break;
        };
        if freq <= 1 {
            break;
        }
        let merged = model.add_merge(pair.0, pair.1);
        for (ids, _) in &mut words {
            if ids.windows(2).any(|w| (w[0], w[1]) == pair) {
                *ids = merge_pair(ids, pair, merged);
            }
        }
    }
    Ok(model)
}
