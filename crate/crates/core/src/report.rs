//! Static HTML report of true positives, false positives and false
//! negatives, one section per document.

use std::fmt::Write as _;

use crate::corpus::Corpus;
use crate::error::Result;
use crate::evaluate::{ConfusionCounts, EvalClass, EvalResult, Evaluator, Metrics};
use crate::harmonize::{Category, EvalMode};
use crate::text::CharIndex;

const STYLE: &str = "\
body{font-family:system-ui,sans-serif;margin:2em;color:#222}\
table{border-collapse:collapse;margin:1em 0}\
th,td{border:1px solid #ccc;padding:.25em .6em;text-align:right}\
th:first-child,td:first-child{text-align:left}\
pre.doc{white-space:pre-wrap;background:#fafafa;border:1px solid #ddd;padding:1em;line-height:1.6}\
.tp,.lg-tp{background:#c8f0c8}\
.fp,.lg-fp{background:#ffe2a8}\
.fn,.lg-fn{background:#f7b2b2;outline:1px solid #c33}\
.fn.fp{background:linear-gradient(#f7b2b2,#ffe2a8)}\
.ignored{color:#888}\
ul.legend{list-style:none;padding:0}\
ul.legend li{display:inline-block;margin-right:1.5em}\
ul.legend b{display:inline-block;padding:0 .4em}";

/// Escapes text for element content and attribute values.
pub fn escape_html(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

fn label_name(label: Option<Category>) -> &'static str {
    label.map_or("none", Category::as_str)
}

/// Span classes for one token, mirroring how the token is counted.
fn token_classes(
    gold: Option<Category>,
    pred: Option<Category>,
    mode: EvalMode,
) -> Option<&'static str> {
    let (g, p) = match mode {
        EvalMode::Binary => (gold.is_some(), pred.is_some()),
        EvalMode::PerEntity(target) => match gold {
            Some(c) if c != target => return Some("ignored"),
            _ => (gold.is_some(), pred.is_some()),
        },
        EvalMode::Multiclass => {
            return match (gold, pred) {
                (None, None) => None,
                (Some(g), Some(p)) if g == p => Some("tp"),
                (Some(_), Some(_)) => Some("fn fp"),
                (Some(_), None) => Some("fn"),
                (None, Some(_)) => Some("fp"),
            }
        }
    };
    match (g, p) {
        (true, true) => Some("tp"),
        (true, false) => Some("fn"),
        (false, true) => Some("fp"),
        (false, false) => None,
    }
}

fn metrics_row(out: &mut String, name: &str, counts: Option<(u64, u64, u64)>, m: &Metrics) {
    let _ = write!(out, "<tr><td>{}</td>", escape_html(name));
    match counts {
        Some((tp, fp, fn_)) => {
            let _ = write!(out, "<td>{tp}</td><td>{fp}</td><td>{fn_}</td>");
        }
        None => out.push_str("<td></td><td></td><td></td>"),
    }
    let _ = writeln!(
        out,
        "<td>{:.4}</td><td>{:.4}</td><td>{:.4}</td><td>{:.3}</td></tr>",
        m.precision, m.recall, m.f1, m.fn_per_1000
    );
}

fn doc_fn(counts: Option<&ConfusionCounts>) -> u64 {
    counts.map_or(0, ConfusionCounts::total_fn)
}

/// Renders a self-contained HTML page. Output depends only on the inputs.
pub fn render_report(
    corpus: &Corpus,
    gold: &str,
    pred: &str,
    evaluator: &Evaluator,
    result: &EvalResult,
) -> Result<String> {
    let mode = evaluator.scenario.mode;
    let labeled = evaluator.label_corpus(corpus, &[gold, pred])?;

    let mut order: Vec<usize> = (0..labeled.len()).collect();
    let doc_ids: Vec<&String> = corpus.documents.keys().collect();
    order.sort_by(|&a, &b| {
        let fa = doc_fn(result.documents.get(doc_ids[a]));
        let fb = doc_fn(result.documents.get(doc_ids[b]));
        fb.cmp(&fa).then_with(|| doc_ids[a].cmp(doc_ids[b]))
    });

    let mut out = String::new();
    out.push_str("<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n");
    let _ = writeln!(
        out,
        "<title>PHI evaluation: {} vs {}</title>",
        escape_html(pred),
        escape_html(gold)
    );
    let _ = writeln!(out, "<style>{STYLE}</style>\n</head>\n<body>");
    let _ = writeln!(
        out,
        "<h1>PHI evaluation</h1>\n<p>gold: <code>{}</code> &middot; prediction: <code>{}</code> &middot; tokenizer: <code>{}</code> &middot; scenario fingerprint: <code>{}</code></p>",
        escape_html(gold),
        escape_html(pred),
        evaluator.tokenizer.name(),
        evaluator.fingerprint()
    );
    out.push_str(
        "<ul class=\"legend\"><li><b class=\"lg-tp\">true positive</b></li>\
         <li><b class=\"lg-fp\">false positive</b></li>\
         <li><b class=\"lg-fn\">false negative</b></li></ul>\n",
    );

    out.push_str("<h2>Metrics</h2>\n<table class=\"metrics\">\n<thead><tr><th>class</th><th>tp</th><th>fp</th><th>fn</th><th>precision</th><th>recall</th><th>F1</th><th>FN per 1000 tokens</th></tr></thead>\n<tbody>\n");
    for (class, m) in &result.per_class {
        let c = result
            .counts
            .per_class
            .get(class)
            .copied()
            .unwrap_or_default();
        metrics_row(&mut out, &class.to_string(), Some((c.tp, c.fp, c.fn_)), m);
    }
    let pooled = result.counts.pooled();
    if result.per_class.len() > 1 || !result.per_class.contains_key(&EvalClass::Phi) {
        metrics_row(
            &mut out,
            "micro",
            Some((pooled.tp, pooled.fp, pooled.fn_)),
            &result.micro,
        );
    }
    out.push_str("</tbody>\n</table>\n");
    let _ = writeln!(
        out,
        "<p>{} documents, {} tokens.</p>",
        result.counts.total_documents, result.counts.total_tokens
    );

    out.push_str("<h2>Documents</h2>\n<table class=\"documents\">\n<thead><tr><th>doc_id</th><th>tokens</th><th>tp</th><th>fp</th><th>fn</th></tr></thead>\n<tbody>\n");
    for &i in &order {
        let c = result
            .documents
            .get(doc_ids[i])
            .cloned()
            .unwrap_or_default();
        let p = c.pooled();
        let _ = writeln!(
            out,
            "<tr><td><a href=\"#doc-{i}\">{}</a></td><td>{}</td><td>{}</td><td>{}</td><td>{}</td></tr>",
            escape_html(doc_ids[i]),
            c.total_tokens,
            p.tp,
            p.fp,
            p.fn_
        );
    }
    out.push_str("</tbody>\n</table>\n");

    for &i in &order {
        let doc = &corpus.documents[doc_ids[i]];
        let (tokens, labelings) = &labeled[i];
        let index = CharIndex::new(&doc.text);
        let _ = writeln!(
            out,
            "<section id=\"doc-{i}\">\n<h3>{}</h3>",
            escape_html(&doc.doc_id)
        );
        out.push_str("<pre class=\"doc\">");
        let mut cursor = 0;
        for (t, token) in tokens.iter().enumerate() {
            out.push_str(&escape_html(
                index.slice(cursor, token.start).unwrap_or_default(),
            ));
            let text = escape_html(index.slice(token.start, token.stop).unwrap_or_default());
            let (g, p) = (labelings[0].labels[t], labelings[1].labels[t]);
            match token_classes(g, p, mode) {
                Some(class) => {
                    let _ = write!(
                        out,
                        "<span class=\"{class}\" title=\"gold: {} / pred: {}\">{text}</span>",
                        label_name(g),
                        label_name(p)
                    );
                }
                None => out.push_str(&text),
            }
            cursor = token.stop;
        }
        out.push_str(&escape_html(
            index.slice(cursor, index.len()).unwrap_or_default(),
        ));
        out.push_str("</pre>\n</section>\n");
    }
    out.push_str("</body>\n</html>\n");
    Ok(out)
}
