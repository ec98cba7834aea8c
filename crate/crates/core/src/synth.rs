//! Seeded generator of synthetic clinical notes with exact gold spans.
//!
//! Each document is rendered from a template whose `{SLOT}` markers are
//! filled from the embedded word pools. The slot offsets become the gold
//! annotations, so gold literals always equal their text slices and never
//! overlap. Every document draws from its own stream derived from
//! `(seed, doc_index)`.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::corpus::{Annotation, Corpus, Document, Split, GOLD};
use crate::error::{Error, Result};
use crate::harmonize::{builtin_label_map, Disposition, LabelMap};
use crate::lexicon::{
    CITIES, COUNTRIES, EMAIL_DOMAINS, FIRST_NAMES, HOSPITALS, MONTHS, ORGANIZATIONS, PROFESSIONS,
    STATES, SURNAMES,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TemplateSet {
    Radiology,
    Discharge,
    #[default]
    Mixed,
}

impl TemplateSet {
    pub fn name(self) -> &'static str {
        match self {
            TemplateSet::Radiology => "radiology",
            TemplateSet::Discharge => "discharge",
            TemplateSet::Mixed => "mixed",
        }
    }
}

impl fmt::Display for TemplateSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TemplateSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "radiology" => Ok(TemplateSet::Radiology),
            "discharge" => Ok(TemplateSet::Discharge),
            "mixed" => Ok(TemplateSet::Mixed),
            other => Err(Error::Usage(format!(
                "unknown template set {other:?} (expected radiology, discharge or mixed)"
            ))),
        }
    }
}

const RADIOLOGY: &[&str] = &[
    "EXAMINATION: CT chest with contrast\n\
     DATE OF EXAM: {DATE} {TIME}\n\
     PATIENT: {PATIENT}    MRN: {MRN}\n\
     REFERRING PHYSICIAN: Dr. {DOCTOR}\n\n\
     HISTORY: {AGE} year old with persistent cough. Prior imaging at {HOSPITAL} in {YEAR}.\n\n\
     FINDINGS: No focal consolidation. Heart size within normal limits.\n\n\
     IMPRESSION: No acute cardiopulmonary process.\n\
     Dictated by Dr. {DOCTOR} on {DATE}. Questions: {PHONE}.\n",
    "US ABDOMEN COMPLETE\n\
     Accession: {IDNUM}\n\
     Exam date: {DATE}\n\
     Patient {PATIENT}, {AGE} yo, referred from {CITY}.\n\
     Comparison: outside study dated {DATE}.\n\
     Liver normal in size and echotexture. No gallstones.\n\
     Results phoned to Dr. {DOCTOR} at {TIME} on {DATE}.\n",
    "MRI BRAIN WITHOUT CONTRAST\n\
     MRN {MRN}. Exam performed {DATE} at {HOSPITAL}.\n\
     Clinical: age {AGE}, headaches since {YEAR}.\n\
     No intracranial hemorrhage or mass effect.\n\
     Reviewed with Dr. {DOCTOR}; report faxed to {FAX}.\n",
];

const DISCHARGE: &[&str] = &[
    "DISCHARGE SUMMARY\n\
     Patient: {PATIENT}   MRN: {MRN}\n\
     Admitted: {DATE}   Discharged: {DATE}\n\
     Attending: Dr. {DOCTOR}\n\n\
     The patient is a {AGE} year old {PROFESSION} employed by {ORGANIZATION} who \
     presented with chest pain. Lives in {CITY}, {STATE} {ZIP}. Family emigrated \
     from {COUNTRY} in {YEAR}.\n\n\
     Follow up with Dr. {DOCTOR} on {DATE} at {TIME}. Contact {PHONE} or \
     {EMAIL} with concerns.\n",
    "DISCHARGE NOTE\n\
     Name: {PATIENT}\n\
     Record number: {MRN}   Account: {IDNUM}\n\
     Date of admission: {DATE}\n\n\
     {AGE} yo retired {PROFESSION} from {CITY} admitted to {HOSPITAL} for pneumonia. \
     Treated with antibiotics and discharged home on {DATE}.\n\
     Primary care: Dr. {DOCTOR}, phone {PHONE}, fax {FAX}.\n\
     Daughter reachable at {EMAIL}.\n",
    "TRANSFER SUMMARY\n\
     {PATIENT} (MRN {MRN}) transferred on {DATE} from {HOSPITAL}.\n\
     History: age {AGE}. Worked as a {PROFESSION} at {ORGANIZATION} until {YEAR}.\n\
     Home address in {CITY}, {STATE} {ZIP}, {COUNTRY}.\n\
     Accepting physician Dr. {DOCTOR} notified at {TIME}.\n",
];

/// A fill value with the raw label recorded in gold.
struct Fill {
    text: String,
    raw_label: &'static str,
}

fn pick<'a, R: Rng>(rng: &mut R, pool: &[&'a str]) -> &'a str {
    pool.choose(rng).copied().expect("non-empty pool")
}

fn pad2<R: Rng>(rng: &mut R, n: u32) -> String {
    if rng.gen_bool(0.5) {
        format!("{n:02}")
    } else {
        n.to_string()
    }
}

fn render_date<R: Rng>(rng: &mut R) -> String {
    let year: u32 = rng.gen_range(1930..=2090);
    let month: u32 = rng.gen_range(1..=12);
    let day: u32 = rng.gen_range(1..=28);
    let month_name = MONTHS[(month - 1) as usize];
    match rng.gen_range(0..8) {
        0 => format!("{}/{}/{year}", pad2(rng, month), pad2(rng, day)),
        1 => format!("{}/{}/{:02}", pad2(rng, month), pad2(rng, day), year % 100),
        2 => format!("{}-{}-{year}", pad2(rng, day), pad2(rng, month)),
        3 => format!("{}.{}.{year}", pad2(rng, day), pad2(rng, month)),
        4 => format!("{year}-{month:02}-{day:02}"),
        5 => format!("{month_name} {day}, {year}"),
        6 => format!("{day} {month_name} {year}"),
        _ => format!("{} {day}", &month_name[..3]),
    }
}

fn render_time<R: Rng>(rng: &mut R) -> String {
    if rng.gen_bool(0.5) {
        format!("{:02}:{:02}", rng.gen_range(0..24), rng.gen_range(0..60))
    } else {
        let suffix = if rng.gen_bool(0.5) { "am" } else { "PM" };
        format!(
            "{}:{:02} {suffix}",
            rng.gen_range(1..=12),
            rng.gen_range(0..60)
        )
    }
}

fn render_phone<R: Rng>(rng: &mut R) -> String {
    let (a, b, c) = (
        rng.gen_range(201..=989),
        rng.gen_range(200..=999),
        rng.gen_range(0..=9999),
    );
    match rng.gen_range(0..3) {
        0 => format!("{a}-{b}-{c:04}"),
        1 => format!("({a}) {b}-{c:04}"),
        _ => format!("{a}.{b}.{c:04}"),
    }
}

fn render_digits<R: Rng>(rng: &mut R, min_len: usize, max_len: usize) -> String {
    let len = rng.gen_range(min_len..=max_len);
    let mut s = String::with_capacity(len);
    s.push(char::from(b'1' + rng.gen_range(0..9u8)));
    for _ in 1..len {
        s.push(char::from(b'0' + rng.gen_range(0..10u8)));
    }
    s
}

fn fill_slot<R: Rng>(slot: &str, rng: &mut R) -> Result<Fill> {
    let (text, raw_label) = match slot {
        "PATIENT" => {
            let name = if rng.gen_bool(0.2) {
                format!(
                    "{} {} {}",
                    pick(rng, FIRST_NAMES),
                    pick(rng, FIRST_NAMES),
                    pick(rng, SURNAMES)
                )
            } else {
                format!("{} {}", pick(rng, FIRST_NAMES), pick(rng, SURNAMES))
            };
            (name, "patient")
        }
        "DOCTOR" => (pick(rng, SURNAMES).to_string(), "doctor"),
        "DATE" => (render_date(rng), "date"),
        "TIME" => (render_time(rng), "time"),
        "YEAR" => (rng.gen_range(1950..=2089u32).to_string(), "date"),
        "MRN" => (render_digits(rng, 6, 9), "medicalrecord"),
        "IDNUM" => (render_digits(rng, 6, 9), "idnum"),
        "PHONE" => (render_phone(rng), "phone"),
        "FAX" => (render_phone(rng), "fax"),
        "EMAIL" => (
            format!(
                "{}.{}@{}",
                pick(rng, FIRST_NAMES).to_lowercase(),
                pick(rng, SURNAMES).to_lowercase(),
                pick(rng, EMAIL_DOMAINS)
            ),
            "email",
        ),
        "AGE" => (rng.gen_range(18..=104u32).to_string(), "age"),
        "CITY" => (pick(rng, CITIES).to_string(), "city"),
        "STATE" => (pick(rng, STATES).to_string(), "state"),
        "COUNTRY" => (pick(rng, COUNTRIES).to_string(), "country"),
        "ZIP" => (render_digits(rng, 5, 5), "zip"),
        "HOSPITAL" => (pick(rng, HOSPITALS).to_string(), "hospital"),
        "PROFESSION" => (pick(rng, PROFESSIONS).to_string(), "profession"),
        "ORGANIZATION" => (pick(rng, ORGANIZATIONS).to_string(), "organization"),
        other => return Err(Error::Invalid(format!("unknown template slot {other:?}"))),
    };
    Ok(Fill { text, raw_label })
}

/// Renders one template, returning the text and its gold annotations.
fn render<R: Rng>(
    template: &str,
    doc_id: &str,
    rng: &mut R,
    labels: &LabelMap,
) -> Result<(String, Vec<Annotation>)> {
    let mut text = String::new();
    let mut chars = 0usize;
    let mut annotations = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let literal = &rest[..open];
        text.push_str(literal);
        chars += literal.chars().count();
        let close = rest[open..]
            .find('}')
            .ok_or_else(|| Error::Invalid(format!("unterminated slot in template: {rest:?}")))?
            + open;
        let fill = fill_slot(&rest[open + 1..close], rng)?;
        let len = fill.text.chars().count();
        let category = match labels.map_label(fill.raw_label)? {
            Disposition::Mapped(c) => Some(c),
            _ => None,
        };
        annotations.push(Annotation {
            doc_id: doc_id.to_string(),
            start: chars,
            stop: chars + len,
            literal: fill.text.clone(),
            raw_label: fill.raw_label.to_string(),
            category,
            annotator: GOLD.to_string(),
        });
        text.push_str(&fill.text);
        chars += len;
        rest = &rest[close + 1..];
    }
    text.push_str(rest);
    Ok((text, annotations))
}

fn document_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Generates `n_docs` notes with gold annotations under annotator `gold`.
/// The first 80% of documents (by index) are `train`, the rest `test`.
pub fn generate_corpus(seed: u64, n_docs: usize, template_set: TemplateSet) -> Result<Corpus> {
    if n_docs < 1 {
        return Err(Error::Usage("n_docs must be at least 1".into()));
    }
    let labels = builtin_label_map();
    let rendered: Vec<(Document, Vec<Annotation>)> = (0..n_docs)
        .into_par_iter()
        .map(|index| {
            let mut rng = document_rng(seed, index);
            let pool = match template_set {
                TemplateSet::Radiology => RADIOLOGY,
                TemplateSet::Discharge => DISCHARGE,
                TemplateSet::Mixed => {
                    if rng.gen_bool(0.5) {
                        RADIOLOGY
                    } else {
                        DISCHARGE
                    }
                }
            };
            let template = pick(&mut rng, pool);
            let doc_id = format!("synth-{index:05}");
            let (text, anns) = render(template, &doc_id, &mut rng, &labels)?;
            let split = if index * 5 < n_docs * 4 {
                Split::Train
            } else {
                Split::Test
            };
            let doc = Document::new(doc_id, text)
                .with_source(format!("synth-{template_set}"))
                .with_split(split);
            Ok((doc, anns))
        })
        .collect::<Result<_>>()?;
    let (docs, anns): (Vec<_>, Vec<_>) = rendered.into_iter().unzip();
    Corpus::from_parts(docs, anns.into_iter().flatten(), Vec::new())
}
