//! Rule-based reference deidentification: regular-expression rules plus
//! gazetteer lookup.
//!
//! Candidate spans from every rule and gazetteer compete; the longest
//! wins, ties go to the earliest start and then to the rule listed first
//! (gazetteers rank after all pattern rules). Output never overlaps.

use std::path::Path;

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};

use crate::corpus::{Annotation, Corpus, Document, Gazetteer};
use crate::error::{Error, Result};
use crate::harmonize::{AnnotationFlags, Category, EvalMode, ScenarioConfig};
use crate::lexicon::{CITIES, COUNTRIES, FIRST_NAMES, STATES, SURNAMES};
use crate::text::CharIndex;

/// Default annotator name for tagger output.
pub const REF_TAGGER: &str = "ref_tagger";

/// Shortest gazetteer entry that is matched.
pub const MIN_GAZETTEER_ENTRY: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternRule {
    pub rule_id: String,
    pub category: Category,
    pub pattern: String,
    #[serde(default)]
    pub case_insensitive: bool,
    /// Raw label written on matches; defaults to the category name.
    #[serde(default)]
    pub raw_label: Option<String>,
}

impl PatternRule {
    pub fn new(rule_id: &str, category: Category, pattern: &str) -> Self {
        Self {
            rule_id: rule_id.to_string(),
            category,
            pattern: pattern.to_string(),
            case_insensitive: false,
            raw_label: None,
        }
    }

    pub fn case_insensitive(mut self) -> Self {
        self.case_insensitive = true;
        self
    }

    pub fn labelled(mut self, raw_label: &str) -> Self {
        self.raw_label = Some(raw_label.to_string());
        self
    }
}

/// Which disputed entity kinds the tagger reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtectedEntities {
    pub profession: bool,
    pub age_under_90: bool,
    pub nonpatient_names: bool,
    pub large_geo: bool,
    pub lone_year: bool,
    pub organization: bool,
}

impl Default for ProtectedEntities {
    fn default() -> Self {
        Self {
            profession: true,
            age_under_90: true,
            nonpatient_names: true,
            large_geo: true,
            lone_year: true,
            organization: true,
        }
    }
}

impl ProtectedEntities {
    fn as_scenario(&self) -> ScenarioConfig {
        ScenarioConfig {
            mode: EvalMode::Binary,
            include_profession: self.profession,
            include_age_under_90: self.age_under_90,
            include_nonpatient_names: self.nonpatient_names,
            include_large_geo: self.large_geo,
            include_lone_year: self.lone_year,
            include_organization: self.organization,
        }
    }
}

#[derive(Debug, Clone)]
struct Matcher {
    regex: Regex,
    category: Category,
    raw_label: String,
}

/// A validated set of rules and gazetteers with compiled matchers.
#[derive(Debug, Clone)]
pub struct TaggerProfile {
    rules: Vec<PatternRule>,
    gazetteers: Vec<Gazetteer>,
    protected: ProtectedEntities,
    matchers: Vec<Matcher>,
}

impl TaggerProfile {
    pub fn new(
        rules: Vec<PatternRule>,
        gazetteers: Vec<Gazetteer>,
        protected: ProtectedEntities,
    ) -> Result<Self> {
        if rules.is_empty() {
            return Err(Error::Profile(
                "a profile needs at least one pattern rule".into(),
            ));
        }
        let mut matchers = Vec::with_capacity(rules.len() + gazetteers.len());
        for (i, rule) in rules.iter().enumerate() {
            if rules[..i].iter().any(|r| r.rule_id == rule.rule_id) {
                return Err(Error::Profile(format!(
                    "duplicate rule id {:?}",
                    rule.rule_id
                )));
            }
            let regex = RegexBuilder::new(&rule.pattern)
                .case_insensitive(rule.case_insensitive)
                .build()
                .map_err(|source| Error::Pattern {
                    rule_id: rule.rule_id.clone(),
                    source,
                })?;
            matchers.push(Matcher {
                regex,
                category: rule.category,
                raw_label: rule
                    .raw_label
                    .clone()
                    .unwrap_or_else(|| rule.category.to_string()),
            });
        }
        for gaz in &gazetteers {
            if let Some(regex) = gazetteer_regex(gaz)? {
                matchers.push(Matcher {
                    regex,
                    category: gaz.category,
                    raw_label: gaz.category.to_string(),
                });
            }
        }
        Ok(Self {
            rules,
            gazetteers,
            protected,
            matchers,
        })
    }

    pub fn rules(&self) -> &[PatternRule] {
        &self.rules
    }

    pub fn gazetteers(&self) -> &[Gazetteer] {
        &self.gazetteers
    }

    pub fn protected(&self) -> ProtectedEntities {
        self.protected
    }

    /// A copy with extra gazetteers appended after the existing ones.
    pub fn with_gazetteers(&self, extra: &[Gazetteer]) -> Result<Self> {
        let mut gazetteers = self.gazetteers.clone();
        gazetteers.extend_from_slice(extra);
        Self::new(self.rules.clone(), gazetteers, self.protected)
    }

    /// Loads a TOML profile:
    ///
    /// ```toml
    /// [[rule]]
    /// id = "phone"
    /// category = "contact"
    /// pattern = '\d{3}-\d{3}-\d{4}'
    /// case_insensitive = false
    ///
    /// [[gazetteer]]
    /// name = "surnames"
    /// category = "name"
    /// path = "surnames.txt"    # one entry per line, relative to the profile
    ///
    /// [protected]
    /// lone_year = false
    /// ```
    pub fn load(path: &Path) -> Result<Self> {
        let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&content, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn from_toml(content: &str, base_dir: &Path) -> Result<Self> {
        let file: ProfileFile =
            toml::from_str(content).map_err(|e| Error::Profile(e.to_string()))?;
        let rules = file
            .rule
            .into_iter()
            .map(|r| PatternRule {
                rule_id: r.id,
                category: r.category,
                pattern: r.pattern,
                case_insensitive: r.case_insensitive,
                raw_label: r.raw_label,
            })
            .collect();
        let mut gazetteers = Vec::new();
        for g in file.gazetteer {
            let mut entries = g.entries;
            if let Some(rel) = g.path {
                let path = base_dir.join(rel);
                let content = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                entries.extend(content.lines().map(str::to_string));
            }
            let gaz = Gazetteer::from_entries(g.name, g.category, entries);
            gaz.validate()?;
            gazetteers.push(gaz);
        }
        Self::new(rules, gazetteers, file.protected)
    }
}

#[derive(Deserialize)]
struct ProfileFile {
    #[serde(default)]
    rule: Vec<RuleEntry>,
    #[serde(default)]
    gazetteer: Vec<GazetteerEntry>,
    #[serde(default)]
    protected: ProtectedEntities,
}

#[derive(Deserialize)]
struct RuleEntry {
    id: String,
    category: Category,
    pattern: String,
    #[serde(default)]
    case_insensitive: bool,
    #[serde(default)]
    raw_label: Option<String>,
}

#[derive(Deserialize)]
struct GazetteerEntry {
    name: String,
    category: Category,
    #[serde(default)]
    path: Option<String>,
    #[serde(default)]
    entries: Vec<String>,
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// One case-insensitive alternation over all entries, longest first, with
/// a word boundary on every edge that is a word character.
fn gazetteer_regex(gaz: &Gazetteer) -> Result<Option<Regex>> {
    let mut entries: Vec<&str> = gaz
        .entries
        .iter()
        .map(String::as_str)
        .filter(|e| e.chars().count() >= MIN_GAZETTEER_ENTRY)
        .collect();
    if entries.is_empty() {
        return Ok(None);
    }
    entries.sort_by(|a, b| b.chars().count().cmp(&a.chars().count()).then(a.cmp(b)));
    let alternatives: Vec<String> = entries
        .iter()
        .map(|e| {
            let lead = if e.starts_with(is_word_char) {
                r"\b"
            } else {
                ""
            };
            let trail = if e.ends_with(is_word_char) { r"\b" } else { "" };
            format!("{lead}{}{trail}", regex::escape(e))
        })
        .collect();
    let pattern = format!("(?:{})", alternatives.join("|"));
    RegexBuilder::new(&pattern)
        .case_insensitive(true)
        .size_limit(64 << 20)
        .build()
        .map(Some)
        .map_err(|source| Error::Pattern {
            rule_id: format!("gazetteer:{}", gaz.name),
            source,
        })
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    start: usize,
    stop: usize,
    priority: usize,
}

/// Tags one document. Total: never fails for a valid profile.
pub fn tag_document(doc: &Document, profile: &TaggerProfile) -> Vec<Annotation> {
    let index = CharIndex::new(&doc.text);
    let mut candidates = Vec::new();
    for (priority, matcher) in profile.matchers.iter().enumerate() {
        let phi = matcher.regex.capture_names().any(|n| n == Some("phi"));
        for caps in matcher.regex.captures_iter(&doc.text) {
            let span = if phi { caps.name("phi") } else { caps.get(0) };
            let Some(span) = span else { continue };
            if span.start() == span.end() {
                continue;
            }
            candidates.push(Candidate {
                start: index.char_offset(span.start()),
                stop: index.char_offset(span.end()),
                priority,
            });
        }
    }
    candidates.sort_by(|a, b| {
        (b.stop - b.start)
            .cmp(&(a.stop - a.start))
            .then(a.start.cmp(&b.start))
            .then(a.priority.cmp(&b.priority))
    });

    let scenario = profile.protected.as_scenario();
    let mut taken = vec![false; index.len()];
    let mut out = Vec::new();
    for cand in candidates {
        if taken[cand.start..cand.stop].iter().any(|t| *t) {
            continue;
        }
        let matcher = &profile.matchers[cand.priority];
        let ann = Annotation {
            doc_id: doc.doc_id.clone(),
            start: cand.start,
            stop: cand.stop,
            literal: index
                .slice(cand.start, cand.stop)
                .unwrap_or_default()
                .to_string(),
            raw_label: matcher.raw_label.clone(),
            category: Some(matcher.category),
            annotator: REF_TAGGER.to_string(),
        };
        if !scenario.keeps(&AnnotationFlags::derive(&ann)) {
            continue;
        }
        taken[cand.start..cand.stop]
            .iter_mut()
            .for_each(|t| *t = true);
        out.push(ann);
    }
    out.sort_by_key(|a| (a.start, a.stop));
    out
}

/// Tags every document of `corpus`, returning a copy with the result
/// stored under `annotator`.
pub fn tag_corpus(
    corpus: &Corpus,
    profile: &TaggerProfile,
    annotator: &str,
    overwrite: bool,
) -> Result<Corpus> {
    if corpus.annotation_sets.contains_key(annotator) && !overwrite {
        return Err(Error::DuplicateAnnotator(annotator.to_string()));
    }
    use rayon::prelude::*;
    let docs: Vec<&Document> = corpus.documents.values().collect();
    let annotations: Vec<Annotation> = docs
        .par_iter()
        .flat_map_iter(|doc| tag_document(doc, profile))
        .collect();
    let mut out = corpus.clone();
    out.set_annotations(annotator, annotations);
    Ok(out)
}

const MONTH_NAMES: &str = r"(?:jan(?:uary)?|feb(?:ruary)?|mar(?:ch)?|apr(?:il)?|may|june?|july?|aug(?:ust)?|sep(?:t(?:ember)?)?|oct(?:ober)?|nov(?:ember)?|dec(?:ember)?)";
const CAPITALIZED: &str = r"\p{Lu}[\p{L}'-]+(?:[ \t]+\p{Lu}[\p{L}'-]+)?";

/// The builtin rule set with name and location gazetteers.
pub fn builtin_profile() -> TaggerProfile {
    let rules =
        vec![
        PatternRule::new("date_iso", Category::Date, r"\b\d{4}-\d{1,2}-\d{1,2}\b"),
        PatternRule::new(
            "date_numeric",
            Category::Date,
            r"\b\d{1,2}[/.-]\d{1,2}[/.-](?:\d{4}|\d{2})\b",
        ),
        PatternRule::new(
            "date_month_day",
            Category::Date,
            &format!(r"\b{MONTH_NAMES}\.?\s+\d{{1,2}}(?:st|nd|rd|th)?\b(?:,?\s+\d{{4}}\b)?"),
        )
        .case_insensitive(),
        PatternRule::new(
            "date_day_month",
            Category::Date,
            &format!(r"\b\d{{1,2}}(?:st|nd|rd|th)?\s+{MONTH_NAMES}\.?,?\s+\d{{4}}\b"),
        )
        .case_insensitive(),
        PatternRule::new(
            "date_lone_year",
            Category::Date,
            r"\b(?:in|since|until|from|during)\s+(?P<phi>(?:19|20)\d{2})\b",
        )
        .case_insensitive(),
        PatternRule::new(
            "time",
            Category::Date,
            r"\b(?:[01]?\d|2[0-3]):[0-5]\d\b(?::[0-5]\d\b)?(?:\s?[AaPp][Mm]\b)?",
        )
        .labelled("time"),
        PatternRule::new(
            "phone",
            Category::Contact,
            r"(?:\(\d{3}\)[ \t]?|\b\d{3}[-.])\d{3}[-.]\d{4}\b",
        )
        .labelled("phone"),
        PatternRule::new(
            "email",
            Category::Contact,
            r"\b[A-Za-z0-9._%+-]+@[A-Za-z0-9-]+(?:\.[A-Za-z0-9-]+)*\.[A-Za-z]{2,}\b",
        )
        .labelled("email"),
        PatternRule::new(
            "mrn",
            Category::Id,
            r"\b(?:mrn|mr#|medical record(?: number)?|record number)\s*[:#]?\s*(?P<phi>\d{4,10})\b",
        )
        .case_insensitive()
        .labelled("medicalrecord"),
        PatternRule::new(
            "age_years_old",
            Category::Age,
            r"\b(?P<phi>\d{1,3})[ \t-]*(?:years?|yrs?)[ \t-]*old\b",
        )
        .case_insensitive(),
        PatternRule::new(
            "age_yo",
            Category::Age,
            r"\b(?P<phi>\d{1,3})[ \t]*(?:yo\b|y/o\b|y\.o\.)",
        )
        .case_insensitive(),
        PatternRule::new("age_prefix", Category::Age, r"\bage[:\s]+(?P<phi>\d{1,3})\b")
            .case_insensitive(),
        PatternRule::new("zip", Category::Location, r"\b\d{5}(?:-\d{4})?\b").labelled("zip"),
        PatternRule::new("id_number", Category::Id, r"\b\d{6,9}\b").labelled("idnum"),
        PatternRule::new(
            "honorific_doctor",
            Category::Name,
            &format!(r"\bDr\.?[ \t]+(?P<phi>{CAPITALIZED})"),
        )
        .labelled("doctor"),
        PatternRule::new(
            "honorific_title",
            Category::Name,
            &format!(r"\b(?:Mr|Mrs|Ms|Miss)\.?[ \t]+(?P<phi>{CAPITALIZED})"),
        )
        .labelled("patient"),
    ];
    let mut names: Vec<&str> = SURNAMES.to_vec();
    names.extend_from_slice(FIRST_NAMES);
    let mut places: Vec<&str> = CITIES.to_vec();
    places.extend_from_slice(STATES);
    places.extend_from_slice(COUNTRIES);
    let gazetteers = vec![
        Gazetteer::from_entries("builtin_names", Category::Name, names),
        Gazetteer::from_entries("builtin_places", Category::Location, places),
    ];
    TaggerProfile::new(rules, gazetteers, ProtectedEntities::default())
        .expect("builtin profile is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spans(text: &str, profile: &TaggerProfile) -> Vec<(usize, usize, Category, String)> {
        tag_document(&Document::new("d", text), profile)
            .into_iter()
            .map(|a| (a.start, a.stop, a.category.unwrap(), a.literal))
            .collect()
    }

    /// Finds `a-b-c` digit groups of lengths 3-3-4 by a manual scan.
    fn phone_oracle(text: &str) -> Vec<(usize, usize)> {
        let chars: Vec<char> = text.chars().collect();
        let shape = "ddd-ddd-dddd";
        let mut out = Vec::new();
        for i in 0..chars.len() {
            if i + shape.len() > chars.len() {
                break;
            }
            let fits = shape.chars().zip(&chars[i..]).all(|(s, c)| match s {
                'd' => c.is_ascii_digit(),
                _ => *c == s,
            });
            let before_ok = i == 0 || !chars[i - 1].is_alphanumeric();
            let after = i + shape.len();
            let after_ok = after == chars.len() || !chars[after].is_alphanumeric();
            if fits && before_ok && after_ok {
                out.push((i, after));
            }
        }
        out
    }

    #[test]
    fn phone_number() {
        let text = "Call 555-123-4567 now";
        let oracle = phone_oracle(text);
        assert_eq!(oracle, vec![(5, 17)]);
        let got = spans(text, &builtin_profile());
        assert_eq!(got.len(), 1);
        assert_eq!((got[0].0, got[0].1, got[0].2), (5, 17, Category::Contact));
    }

    #[test]
    fn no_phi() {
        let profile = TaggerProfile::new(
            builtin_profile().rules().to_vec(),
            vec![],
            ProtectedEntities::default(),
        )
        .unwrap();
        assert!(spans("no phi present", &profile).is_empty());
        assert!(spans("he is fine", &builtin_profile()).is_empty());
    }

    #[test]
    fn gazetteer_word_boundaries() {
        let profile = TaggerProfile::new(
            vec![PatternRule::new("never", Category::Id, r"\bzzzz\b")],
            vec![Gazetteer::from_entries("n", Category::Name, ["Smith", "X"])],
            ProtectedEntities::default(),
        )
        .unwrap();
        let text = "Dr. Smith, SMITH and Smithson; X marks";
        let got = spans(text, &profile);
        // boundary oracle: occurrences of "smith" (case-folded) not touching word chars
        let lower: Vec<char> = text.to_lowercase().chars().collect();
        let mut expected = Vec::new();
        for i in 0..lower.len().saturating_sub(4) {
            let w: String = lower[i..i + 5].iter().collect();
            let before = i == 0 || !lower[i - 1].is_alphanumeric();
            let after = i + 5 == lower.len() || !lower[i + 5].is_alphanumeric();
            if w == "smith" && before && after {
                expected.push((i, i + 5));
            }
        }
        let got_spans: Vec<(usize, usize)> = got.iter().map(|g| (g.0, g.1)).collect();
        assert_eq!(got_spans, expected);
        assert_eq!(got_spans, vec![(4, 9), (11, 16)]);
    }

    #[test]
    fn builtin_pattern_families() {
        let p = builtin_profile();
        let cases: &[(&str, &str, Category)] = &[
            ("12/03/1998", "12/03/1998", Category::Date),
            ("seen 3-4-07 today", "3-4-07", Category::Date),
            ("on 2067-05-03.", "2067-05-03", Category::Date),
            ("on March 3, 2067 at", "March 3, 2067", Category::Date),
            ("on 3 march 2067 at", "3 march 2067", Category::Date),
            ("by Mar 14 next", "Mar 14", Category::Date),
            ("since 1998.", "1998", Category::Date),
            ("at 14:30 today", "14:30", Category::Date),
            ("at 9:05 PM today", "9:05 PM", Category::Date),
            ("john@x.org", "john@x.org", Category::Contact),
            ("call (617) 555-0123.", "(617) 555-0123", Category::Contact),
            ("fax 617.555.0123.", "617.555.0123", Category::Contact),
            ("MRN: 12345", "12345", Category::Id),
            ("Accession: 12345678", "12345678", Category::Id),
            ("a 45 year old man", "45", Category::Age),
            ("a 93 yo man", "93", Category::Age),
            ("Clinical: age 67, with", "67", Category::Age),
            ("Ohio 02115", "02115", Category::Location),
            ("seen by Dr. Nguyen today", "Nguyen", Category::Name),
            (
                "Mrs. Katarina Ortega arrived",
                "Katarina Ortega",
                Category::Name,
            ),
        ];
        for (text, literal, category) in cases {
            let got = spans(text, &p);
            assert!(
                got.iter().any(|g| g.3 == *literal && g.2 == *category),
                "{text:?} -> {got:?}"
            );
        }
    }

    #[test]
    fn longest_match_wins_and_no_overlap() {
        let p = builtin_profile();
        // the date contains a bare number run that would be an id on its own
        let got = spans("on 19980312 and 03/12/1998", &p);
        assert_eq!(got[0].2, Category::Id);
        assert_eq!(got[1].3, "03/12/1998");
        let anns = tag_document(
            &Document::new("d", "Dr. Smith Jones 555-123-4567 12/03/1998 MRN 1234567"),
            &p,
        );
        for pair in anns.windows(2) {
            assert!(pair[0].stop <= pair[1].start);
        }
    }

    #[test]
    fn protected_flags_drop_unprotected_kinds() {
        let base = builtin_profile();
        let profile = TaggerProfile::new(
            base.rules().to_vec(),
            vec![],
            ProtectedEntities {
                lone_year: false,
                ..ProtectedEntities::default()
            },
        )
        .unwrap();
        assert!(spans("since 1998.", &profile).is_empty());
        assert_eq!(spans("since 1998.", &base).len(), 1);
    }

    #[test]
    fn profile_validation() {
        assert!(TaggerProfile::new(vec![], vec![], ProtectedEntities::default()).is_err());
        let dup = vec![
            PatternRule::new("a", Category::Id, r"\d"),
            PatternRule::new("a", Category::Id, r"\d\d"),
        ];
        assert!(TaggerProfile::new(dup, vec![], ProtectedEntities::default()).is_err());
        let bad = vec![PatternRule::new("a", Category::Id, r"(")];
        assert!(matches!(
            TaggerProfile::new(bad, vec![], ProtectedEntities::default()),
            Err(Error::Pattern { .. })
        ));
    }

    #[test]
    fn toml_profile() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("names.txt"), "Smith\nJones\n\n").unwrap();
        let toml = r#"
[[rule]]
id = "phone"
category = "contact"
pattern = '\d{3}-\d{3}-\d{4}'

[[gazetteer]]
name = "names"
category = "name"
path = "names.txt"
entries = ["Okafor"]

[protected]
lone_year = false
"#;
        let path = dir.path().join("profile.toml");
        std::fs::write(&path, toml).unwrap();
        let p = TaggerProfile::load(&path).unwrap();
        assert_eq!(p.gazetteers()[0].entries.len(), 3);
        assert!(!p.protected().lone_year);
        assert!(p.protected().profession);
        let got = spans("Smith called 555-123-4567 for Okafor", &p);
        assert_eq!(got.len(), 3);
    }

    #[test]
    fn deterministic() {
        let p = builtin_profile();
        let doc = Document::new(
            "d",
            "Dr. Smith saw Amara Novak on 03/12/1998 in Springfield.",
        );
        assert_eq!(tag_document(&doc, &p), tag_document(&doc, &p));
    }
}
