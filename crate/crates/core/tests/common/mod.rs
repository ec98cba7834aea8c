#![allow(dead_code)]

use std::collections::BTreeMap;

use clipse_core::{Annotation, Category, Corpus, EvalMode};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Independent single-pass tokenizer: maximal runs of word characters,
/// maximal runs of other non-space characters.
pub fn oracle_tokens(text: &str) -> Vec<(usize, usize, String)> {
    #[derive(PartialEq, Clone, Copy)]
    enum Class {
        Word,
        Punct,
        Space,
    }
    let class = |c: char| {
        if c.is_alphanumeric() || c == '_' {
            Class::Word
        } else if c.is_whitespace() {
            Class::Space
        } else {
            Class::Punct
        }
    };
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let k = class(chars[i]);
        let mut j = i + 1;
        while j < chars.len() && class(chars[j]) == k {
            j += 1;
        }
        if k != Class::Space {
            out.push((i, j, chars[i..j].iter().collect()));
        }
        i = j;
    }
    out
}

fn slice(text: &str, start: usize, stop: usize) -> String {
    text.chars().skip(start).take(stop - start).collect()
}

/// A noisy copy of `anns`: spans are dropped, trimmed, widened, relabelled,
/// and spurious spans are added. Every output span is valid for its text.
pub fn degrade(
    corpus: &Corpus,
    anns: &[Annotation],
    rng: &mut ChaCha8Rng,
    keep: f64,
) -> Vec<Annotation> {
    let mut out = Vec::new();
    for ann in anns {
        if !rng.gen_bool(keep) {
            continue;
        }
        let len = corpus.documents[&ann.doc_id].text.chars().count();
        let mut a = ann.clone();
        match rng.gen_range(0..6) {
            0 if a.len() > 1 => a.start += 1,
            1 if a.len() > 1 => a.stop -= 1,
            2 => a.stop = (a.stop + rng.gen_range(1..4)).min(len),
            3 => {
                let c = Category::ALL[rng.gen_range(0..Category::ALL.len())];
                a.category = Some(c);
                a.raw_label = c.as_str().to_string();
            }
            _ => {}
        }
        out.push(a);
    }
    for doc in corpus.documents.values() {
        let len = doc.text.chars().count();
        for _ in 0..rng.gen_range(0..3) {
            if len < 2 {
                break;
            }
            let start = rng.gen_range(0..len - 1);
            let stop = (start + rng.gen_range(1..8)).min(len);
            let c = Category::ALL[rng.gen_range(0..Category::ALL.len())];
            out.push(Annotation {
                doc_id: doc.doc_id.clone(),
                start,
                stop,
                literal: String::new(),
                raw_label: c.as_str().to_string(),
                category: Some(c),
                annotator: String::new(),
            });
        }
    }
    for a in &mut out {
        a.literal = slice(&corpus.documents[&a.doc_id].text, a.start, a.stop);
    }
    out
}

/// class name -> (tp, fp, fn)
pub type ClassCounts = BTreeMap<String, (u64, u64, u64)>;

/// Brute-force scorer over oracle tokens. Returns per-document token totals
/// and class counts.
pub fn oracle_counts(
    corpus: &Corpus,
    gold: &[Annotation],
    pred: &[Annotation],
    mode: EvalMode,
) -> BTreeMap<String, (u64, ClassCounts)> {
    let winner = |anns: &[Annotation], doc: &str, s: usize, e: usize| -> Option<Category> {
        let mut best: Option<(usize, usize, Category)> = None;
        for a in anns.iter().filter(|a| a.doc_id == doc) {
            let lo = s.max(a.start);
            let hi = e.min(a.stop);
            if hi <= lo {
                continue;
            }
            let cand = (hi - lo, a.start, a.category.unwrap());
            best = match best {
                None => Some(cand),
                Some(b) => {
                    let better = cand.0 > b.0
                        || (cand.0 == b.0 && (cand.1 < b.1 || (cand.1 == b.1 && cand.2 < b.2)));
                    Some(if better { cand } else { b })
                }
            };
        }
        best.map(|b| b.2)
    };
    let classes: Vec<String> = match mode {
        EvalMode::Multiclass => Category::ALL
            .iter()
            .map(|c| c.as_str().to_string())
            .collect(),
        _ => vec!["phi".to_string()],
    };
    let mut out = BTreeMap::new();
    for doc in corpus.documents.values() {
        let tokens = oracle_tokens(&doc.text);
        let mut counts: ClassCounts = classes.iter().map(|c| (c.clone(), (0, 0, 0))).collect();
        for (s, e, _) in &tokens {
            let g = winner(gold, &doc.doc_id, *s, *e);
            let p = winner(pred, &doc.doc_id, *s, *e);
            let (gc, pc): (Option<String>, Option<String>) = match mode {
                EvalMode::Binary => (g.map(|_| "phi".into()), p.map(|_| "phi".into())),
                EvalMode::Multiclass => {
                    (g.map(|c| c.as_str().into()), p.map(|c| c.as_str().into()))
                }
                EvalMode::PerEntity(target) => {
                    if g.is_some() && g != Some(target) {
                        continue;
                    }
                    (g.map(|_| "phi".into()), p.map(|_| "phi".into()))
                }
            };
            for class in &classes {
                let in_g = gc.as_deref() == Some(class.as_str());
                let in_p = pc.as_deref() == Some(class.as_str());
                let entry = counts.get_mut(class).unwrap();
                match (in_g, in_p) {
                    (true, true) => entry.0 += 1,
                    (false, true) => entry.1 += 1,
                    (true, false) => entry.2 += 1,
                    _ => {}
                }
            }
        }
        out.insert(doc.doc_id.clone(), (tokens.len() as u64, counts));
    }
    out
}
