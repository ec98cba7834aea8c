//! Label harmonization and evaluation scenarios.
//!
//! Raw labels from different corpora and tools are mapped onto seven
//! canonical categories. A [`ScenarioConfig`] then decides which of the
//! disputed entity kinds (professions, ages under 90, non-patient names,
//! large geographic units, lone years, organizations) take part in an
//! evaluation, and whether categories are scored separately or collapsed
//! to a single PHI class.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Annotation;
use crate::error::{Error, Result};

/// The canonical PHI categories. Declaration order is the tie-break
/// order used wherever categories compete.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Name,
    Profession,
    Location,
    Age,
    Date,
    Id,
    Contact,
}

impl Category {
    pub const ALL: [Category; 7] = [
        Category::Name,
        Category::Profession,
        Category::Location,
        Category::Age,
        Category::Date,
        Category::Id,
        Category::Contact,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Name => "name",
            Category::Profession => "profession",
            Category::Location => "location",
            Category::Age => "age",
            Category::Date => "date",
            Category::Id => "id",
            Category::Contact => "contact",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let folded = s.trim().to_lowercase();
        Category::ALL
            .into_iter()
            .find(|c| c.as_str() == folded)
            .ok_or_else(|| Error::UnknownLabel(s.to_string()))
    }
}

/// What to do with a raw label the map does not know.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnknownPolicy {
    #[default]
    Error,
    Drop,
    PassAsIs,
}

impl FromStr for UnknownPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "error" => Ok(UnknownPolicy::Error),
            "drop" => Ok(UnknownPolicy::Drop),
            "pass" | "pass_as_is" | "pass-as-is" => Ok(UnknownPolicy::PassAsIs),
            other => Err(Error::Usage(format!("unknown label policy {other:?}"))),
        }
    }
}

/// Outcome of mapping one raw label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Disposition {
    Mapped(Category),
    Dropped,
    /// Kept without a category; evaluation will reject it until a later
    /// map resolves it.
    PassThrough(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMap {
    rules: BTreeMap<String, Category>,
    pub unknown_policy: UnknownPolicy,
}

const TABLE: &[(Category, &[&str])] = &[
    (
        Category::Name,
        &[
            "name",
            "doctor",
            "patient",
            "username",
            "hcpname",
            "relativeproxyname",
            "ptname",
            "ptnameinitial",
            "misc",
        ],
    ),
    (Category::Profession, &["profession"]),
    (
        Category::Location,
        &[
            "location",
            "loc",
            "department",
            "hospital",
            "organization",
            "org",
            "street",
            "state",
            "city",
            "country",
            "zip",
            "location-other",
        ],
    ),
    (Category::Age, &["age"]),
    (Category::Date, &["date", "dateyear", "time"]),
    (
        Category::Id,
        &[
            "device",
            "idnum",
            "medicalrecord",
            "medicalrecordnumber",
            "id",
            "other",
        ],
    ),
    (Category::Contact, &["email", "fax", "phone", "contact"]),
];

/// The label map covering every subtype used by the benchmark corpora.
pub fn builtin_label_map() -> LabelMap {
    let mut map = LabelMap::new(UnknownPolicy::Error);
    for (category, labels) in TABLE {
        for label in *labels {
            map.rules.insert((*label).to_string(), *category);
        }
    }
    map
}

impl Default for LabelMap {
    fn default() -> Self {
        builtin_label_map()
    }
}

impl LabelMap {
    pub fn new(unknown_policy: UnknownPolicy) -> Self {
        Self {
            rules: BTreeMap::new(),
            unknown_policy,
        }
    }

    pub fn with_policy(mut self, policy: UnknownPolicy) -> Self {
        self.unknown_policy = policy;
        self
    }

    /// Adds a rule. A raw label may be mapped only once.
    pub fn insert(&mut self, raw: &str, category: Category) -> Result<()> {
        let key = raw.trim().to_lowercase();
        match self.rules.get(&key) {
            Some(existing) if *existing != category => Err(Error::Invalid(format!(
                "label {key:?} mapped to both {existing} and {category}"
            ))),
            _ => {
                self.rules.insert(key, category);
                Ok(())
            }
        }
    }

    pub fn rules(&self) -> &BTreeMap<String, Category> {
        &self.rules
    }

    /// Parses a two-column TSV of `raw_label<TAB>category`. A header row
    /// reading `raw_label` / `category` is skipped; blank lines and `#`
    /// comments are ignored.
    pub fn from_tsv(content: &str, policy: UnknownPolicy) -> Result<Self> {
        let mut map = LabelMap::new(policy);
        for (lineno, line) in content.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split('\t');
            let (raw, cat) = match (cols.next(), cols.next()) {
                (Some(r), Some(c)) => (r.trim(), c.trim()),
                _ => {
                    return Err(Error::parse(
                        format!("label map line {}", lineno + 1),
                        "expected raw_label<TAB>category",
                    ))
                }
            };
            if lineno == 0 && raw.eq_ignore_ascii_case("raw_label") {
                continue;
            }
            if raw.is_empty() {
                return Err(Error::parse(
                    format!("label map line {}", lineno + 1),
                    "empty raw label",
                ));
            }
            let category = cat.parse().map_err(|_| {
                Error::parse(
                    format!("label map line {}", lineno + 1),
                    format!("unknown category {cat:?}"),
                )
            })?;
            map.insert(raw, category)?;
        }
        Ok(map)
    }

    pub fn load_tsv(path: &Path, policy: UnknownPolicy) -> Result<Self> {
        let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_tsv(&content, policy)
    }

    /// Case-folded lookup with the unknown-label policy applied.
    pub fn map_label(&self, raw: &str) -> Result<Disposition> {
        let key = raw.trim().to_lowercase();
        if let Some(category) = self.rules.get(&key) {
            return Ok(Disposition::Mapped(*category));
        }
        match self.unknown_policy {
            UnknownPolicy::Error => Err(Error::UnknownLabel(raw.to_string())),
            UnknownPolicy::Drop => Ok(Disposition::Dropped),
            UnknownPolicy::PassAsIs => Ok(Disposition::PassThrough(raw.to_string())),
        }
    }

    /// Fills in missing categories. Annotations that already carry a
    /// category are kept as they are.
    pub fn harmonize(&self, annotations: &[Annotation]) -> Result<Vec<Annotation>> {
        let mut out = Vec::with_capacity(annotations.len());
        for ann in annotations {
            if ann.category.is_some() {
                out.push(ann.clone());
                continue;
            }
            match self.map_label(&ann.raw_label)? {
                Disposition::Mapped(category) => out.push(Annotation {
                    category: Some(category),
                    ..ann.clone()
                }),
                Disposition::Dropped => {}
                Disposition::PassThrough(_) => out.push(ann.clone()),
            }
        }
        Ok(out)
    }
}

/// How token labels are turned into scored classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    /// Every category collapses to one PHI class.
    Binary,
    /// Each category is its own class.
    Multiclass,
    /// Only gold tokens of this category are positives; any PHI prediction
    /// on them counts as a hit. Gold tokens of other categories are not
    /// scored.
    PerEntity(Category),
}

/// Evaluation scenario: scoring mode plus which disputed entity kinds
/// are kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub mode: EvalMode,
    pub include_profession: bool,
    pub include_age_under_90: bool,
    pub include_nonpatient_names: bool,
    pub include_large_geo: bool,
    pub include_lone_year: bool,
    pub include_organization: bool,
}

impl ScenarioConfig {
    pub const PRESETS: [&'static str; 4] = ["binary", "hipaa-strict", "multiclass", "name-only"];

    /// Keeps every entity kind.
    pub fn inclusive(mode: EvalMode) -> Self {
        Self {
            mode,
            include_profession: true,
            include_age_under_90: true,
            include_nonpatient_names: true,
            include_large_geo: true,
            include_lone_year: true,
            include_organization: true,
        }
    }

    pub fn binary() -> Self {
        Self::inclusive(EvalMode::Binary)
    }

    pub fn multiclass() -> Self {
        Self::inclusive(EvalMode::Multiclass)
    }

    pub fn name_only() -> Self {
        Self::inclusive(EvalMode::PerEntity(Category::Name))
    }

    /// Binary scoring restricted to Safe Harbor identifiers: all six
    /// disputed entity kinds are excluded.
    pub fn hipaa_strict() -> Self {
        Self {
            mode: EvalMode::Binary,
            include_profession: false,
            include_age_under_90: false,
            include_nonpatient_names: false,
            include_large_geo: false,
            include_lone_year: false,
            include_organization: false,
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "binary" => Ok(Self::binary()),
            "hipaa-strict" | "hipaa_strict" => Ok(Self::hipaa_strict()),
            "multiclass" => Ok(Self::multiclass()),
            "name-only" | "name_only" => Ok(Self::name_only()),
            other => Err(Error::Usage(format!(
                "unknown scenario {other:?} (expected one of {})",
                Self::PRESETS.join(", ")
            ))),
        }
    }

    /// Whether an annotation with these attributes survives the scenario.
    pub fn keeps(&self, flags: &AnnotationFlags) -> bool {
        !((flags.profession && !self.include_profession)
            || (flags.age_under_90 && !self.include_age_under_90)
            || (flags.nonpatient_name && !self.include_nonpatient_names)
            || (flags.large_geo && !self.include_large_geo)
            || (flags.lone_year && !self.include_lone_year)
            || (flags.organization && !self.include_organization))
    }
}

/// Disputed attributes of a single annotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct AnnotationFlags {
    pub profession: bool,
    pub age_under_90: bool,
    pub nonpatient_name: bool,
    pub large_geo: bool,
    pub lone_year: bool,
    pub organization: bool,
}

const NONPATIENT_NAME_LABELS: &[&str] = &["doctor", "hcpname", "username"];
const LARGE_GEO_LABELS: &[&str] = &["country", "state"];
const ORGANIZATION_LABELS: &[&str] = &["organization", "org"];

impl AnnotationFlags {
    /// Derives flags from the raw label, category and literal. Attributes
    /// that cannot be derived stay unflagged.
    pub fn derive(ann: &Annotation) -> Self {
        let raw = ann.raw_label.trim().to_lowercase();
        let literal = ann.literal.trim();
        Self {
            profession: ann.category == Some(Category::Profession) || raw == "profession",
            age_under_90: ann.category == Some(Category::Age)
                && literal.parse::<u32>().is_ok_and(|age| age < 90),
            nonpatient_name: NONPATIENT_NAME_LABELS.contains(&raw.as_str()),
            large_geo: LARGE_GEO_LABELS.contains(&raw.as_str()),
            lone_year: ann.category == Some(Category::Date)
                && ann.literal.chars().count() == 4
                && ann.literal.chars().all(|c| c.is_ascii_digit()),
            organization: ORGANIZATION_LABELS.contains(&raw.as_str()),
        }
    }
}

/// Removes annotations whose flagged attributes the scenario excludes.
/// `flags` is aligned with `annotations`.
pub fn apply_scenario(
    annotations: &[Annotation],
    cfg: &ScenarioConfig,
    flags: &[AnnotationFlags],
) -> Result<Vec<Annotation>> {
    if flags.len() != annotations.len() {
        return Err(Error::Usage(format!(
            "{} flag records for {} annotations",
            flags.len(),
            annotations.len()
        )));
    }
    let mut out = Vec::with_capacity(annotations.len());
    for (ann, f) in annotations.iter().zip(flags) {
        if ann.category.is_none() {
            return Err(Error::MissingCategory {
                doc_id: ann.doc_id.clone(),
                start: ann.start,
                stop: ann.stop,
                raw_label: ann.raw_label.clone(),
            });
        }
        if cfg.keeps(f) {
            out.push(ann.clone());
        }
    }
    Ok(out)
}

/// [`apply_scenario`] with flags derived by [`AnnotationFlags::derive`].
pub fn apply_scenario_derived(
    annotations: &[Annotation],
    cfg: &ScenarioConfig,
) -> Result<Vec<Annotation>> {
    let flags: Vec<AnnotationFlags> = annotations.iter().map(AnnotationFlags::derive).collect();
    apply_scenario(annotations, cfg, &flags)
}
