use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use super::DebiasError;
use crate::corpus::{CoarseType, Paragraph, QaExample};
use crate::runconfig::sha256_hex;
use crate::seed::SeededRng;
use crate::text::{mentions_answer, tokenize};

pub const BUNDLED_TEMPLATES: &str = include_str!("../../data/related_templates.json");
pub const PLACEHOLDER: &str = "#Name";
pub const GENERIC: &str = "generic";

/// Sentence templates per entity type; every template carries `#Name`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    by_type: BTreeMap<String, Vec<String>>,
}

impl TemplateSet {
    pub fn new(by_type: BTreeMap<String, Vec<String>>) -> Result<Self, DebiasError> {
        if by_type.get(GENERIC).is_none_or(Vec::is_empty) {
            return Err(DebiasError::NoGenericTemplates);
        }
        for (ty, list) in &by_type {
            if let Some(t) = list.iter().find(|t| !t.contains(PLACEHOLDER)) {
                return Err(DebiasError::TemplateWithoutPlaceholder {
                    entity_type: ty.clone(),
                    template: t.clone(),
                });
            }
        }
        Ok(Self { by_type })
    }

    pub fn from_json(text: &str) -> Result<Self, DebiasError> {
        let map: BTreeMap<String, Vec<String>> =
            serde_json::from_str(text).map_err(|e| DebiasError::Resource(e.to_string()))?;
        Self::new(map)
    }

    pub fn bundled() -> Self {
        Self::from_json(BUNDLED_TEMPLATES).expect("bundled templates are valid")
    }

    pub fn get(&self, entity_type: &str) -> Option<&[String]> {
        self.by_type.get(entity_type).map(Vec::as_slice)
    }

    pub fn types(&self) -> impl Iterator<Item = &str> {
        self.by_type.keys().map(String::as_str)
    }

    pub fn digest(&self) -> String {
        sha256_hex(serde_json::to_string(&self.by_type).expect("templates serialize").as_bytes())
    }
}

/// Optional entity types per paragraph title, e.g. from an external NER pass.
pub type EntityHints = BTreeMap<String, String>;

const FILM: &[&str] = &["film", "films", "movie", "movies"];
const MAGAZINE: &[&str] = &["magazine", "magazines"];
const ALBUM: &[&str] = &["album", "albums"];
const PERSON_CUES: &[&str] = &[
    "who", "whom", "whose", "director", "father", "mother", "born", "died", "spouse", "wife",
    "husband", "son", "daughter", "performer", "composer",
];

fn keyword_type(question_tokens: &BTreeSet<String>) -> Option<&'static str> {
    let has = |words: &[&str]| words.iter().any(|w| question_tokens.contains(*w));
    if has(FILM) {
        Some("film")
    } else if has(MAGAZINE) {
        Some("magazine")
    } else if has(ALBUM) {
        Some("album")
    } else {
        None
    }
}

/// Entity type of a paragraph from hints, question keywords and the question type.
///
/// A paragraph named in the question (or any paragraph of a comparison question)
/// takes the type of the question's film/magazine/album keyword. Otherwise
/// person cues ("who", "director", "born", ...) give `person`. Anything else is generic.
pub fn detect_entity_type(
    paragraph: &Paragraph,
    example: &QaExample,
    templates: &TemplateSet,
    hints: Option<&EntityHints>,
) -> String {
    if let Some(t) = hints.and_then(|h| h.get(&paragraph.title)) {
        if templates.get(t).is_some() {
            return t.clone();
        }
    }
    let q: BTreeSet<String> = tokenize(&example.question).into_iter().collect();
    let named = mentions_answer(&example.question, &paragraph.title);
    let comparison = example.qtype.coarse() == CoarseType::Comparison;
    let kw = keyword_type(&q);
    let pick = match kw {
        Some(t) if named || comparison => t,
        _ if PERSON_CUES.iter().any(|c| q.contains(*c)) && (kw.is_none() || !named) => "person",
        _ => GENERIC,
    };
    if templates.get(pick).is_some() {
        pick.to_string()
    } else {
        GENERIC.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rendered {
    pub text: String,
    pub entity_type: String,
    /// Detected type had no usable template; the generic type was used.
    pub fell_back: bool,
    /// The answer occurs only through the paragraph title itself.
    pub answer_via_title: bool,
}

fn render(template: &str, title: &str) -> String {
    template.replace(PLACEHOLDER, title)
}

enum Fit {
    Clean,
    ViaTitle,
    Collides,
}

fn fit(template: &str, paragraph: &Paragraph, answer: &str) -> Fit {
    let text = render(template, &paragraph.title);
    if paragraph.sentences.contains(&text) {
        return Fit::Collides;
    }
    if !mentions_answer(&text, answer) {
        return Fit::Clean;
    }
    let body = template.replace(PLACEHOLDER, " ");
    if mentions_answer(&paragraph.title, answer) && !mentions_answer(&body, answer) {
        Fit::ViaTitle
    } else {
        Fit::Collides
    }
}

/// Renders one template for the paragraph with `#Name` = paragraph title.
///
/// Templates whose own words contain the gold answer, or whose rendering repeats
/// a sentence already in the paragraph, are excluded; one of the remaining
/// templates is drawn uniformly. When the title itself contains the answer the
/// sentence is still emitted and flagged.
pub fn render_related(
    paragraph: &Paragraph,
    example: &QaExample,
    templates: &TemplateSet,
    rng: &mut SeededRng,
    hints: Option<&EntityHints>,
) -> Result<Rendered, DebiasError> {
    let detected = detect_entity_type(paragraph, example, templates, hints);
    let mut tried = vec![detected.clone()];
    if detected != GENERIC {
        tried.push(GENERIC.to_string());
    }
    for (attempt, ty) in tried.iter().enumerate() {
        let list = templates.get(ty).unwrap_or_default();
        let usable: Vec<(&String, bool)> = list
            .iter()
            .filter_map(|t| match fit(t, paragraph, &example.answer) {
                Fit::Clean => Some((t, false)),
                Fit::ViaTitle => Some((t, true)),
                Fit::Collides => None,
            })
            .collect();
        if usable.is_empty() {
            continue;
        }
        let (t, via_title) = usable[rng.gen_range(0..usable.len())];
        return Ok(Rendered {
            text: render(t, &paragraph.title),
            entity_type: ty.clone(),
            fell_back: attempt > 0,
            answer_via_title: via_title,
        });
    }
    Err(DebiasError::TemplatesCollide {
        example: example.id.clone(),
        paragraph: paragraph.title.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Provenance, QuestionType, SupportingFact};
    use crate::seed::rng_from;

    fn example(question: &str, answer: &str, qtype: QuestionType, titles: &[&str]) -> QaExample {
        QaExample {
            id: "e".into(),
            question: question.into(),
            answer: answer.into(),
            qtype,
            context: titles
                .iter()
                .map(|t| Paragraph::new(*t, vec![format!("{t} is something.")]))
                .collect(),
            supporting_facts: vec![SupportingFact::new(titles[0], 0)],
            evidence_sets: vec![],
            provenance: Provenance::default(),
            extra: Default::default(),
        }
    }

    fn single(ty: &str, template: &str) -> TemplateSet {
        let mut m = BTreeMap::new();
        m.insert(ty.to_string(), vec![template.to_string()]);
        m.insert(GENERIC.to_string(), vec!["#Name is well known.".to_string()]);
        TemplateSet::new(m).unwrap()
    }

    #[test]
    fn bundled_inventory() {
        let t = TemplateSet::bundled();
        for ty in ["film", "person", "magazine", "album", "generic"] {
            assert!(t.get(ty).unwrap().len() >= 3, "{ty}");
        }
    }

    #[test]
    fn validation() {
        let mut m = BTreeMap::new();
        m.insert("film".to_string(), vec!["#Name is a nice film.".to_string()]);
        assert!(matches!(TemplateSet::new(m.clone()), Err(DebiasError::NoGenericTemplates)));
        m.insert(GENERIC.to_string(), vec!["no placeholder".to_string()]);
        assert!(matches!(
            TemplateSet::new(m),
            Err(DebiasError::TemplateWithoutPlaceholder { .. })
        ));
    }

    #[test]
    fn film_keyword_renders_nice_film() {
        let ex = example(
            "Who is the director of film Polish-Russian War?",
            "Xawery Żuławski",
            QuestionType::Compositional,
            &["Polish-Russian War", "Xawery Żuławski"],
        );
        let t = single("film", "#Name is a nice film.");
        let r = render_related(&ex.context[0], &ex, &t, &mut rng_from(1), None).unwrap();
        assert_eq!(r.text, "Polish-Russian War is a nice film.");
        assert_eq!(r.entity_type, "film");
        // the director's paragraph is not named in the question: person
        let bundled = TemplateSet::bundled();
        assert_eq!(detect_entity_type(&ex.context[1], &ex, &bundled, None), "person");
        assert_eq!(detect_entity_type(&ex.context[0], &ex, &bundled, None), "film");
    }

    #[test]
    fn no_keyword_falls_to_generic() {
        let ex = example("What is the capital of Ruritania?", "Strelsau", QuestionType::Bridge, &["Ruritania"]);
        let t = TemplateSet::bundled();
        assert_eq!(detect_entity_type(&ex.context[0], &ex, &t, None), GENERIC);
        let t = single("film", "#Name is a nice film.");
        let r = render_related(&ex.context[0], &ex, &t, &mut rng_from(1), None).unwrap();
        assert_eq!(r.text, "Ruritania is well known.");
    }

    #[test]
    fn hints_override_keywords() {
        let ex = example("What is the capital of Ruritania?", "Strelsau", QuestionType::Bridge, &["Ruritania"]);
        let mut hints = EntityHints::new();
        hints.insert("Ruritania".into(), "album".into());
        assert_eq!(detect_entity_type(&ex.context[0], &ex, &TemplateSet::bundled(), Some(&hints)), "album");
    }

    #[test]
    fn colliding_templates_fall_back_then_error() {
        let ex = example("Which film is nice, A or B?", "nice", QuestionType::Comparison, &["A", "B"]);
        let t = single("film", "#Name is a nice film.");
        let r = render_related(&ex.context[0], &ex, &t, &mut rng_from(1), None).unwrap();
        assert!(r.fell_back);
        assert_eq!(r.text, "A is well known.");

        let ex = example("Which film is it, A or B?", "is", QuestionType::Comparison, &["A", "B"]);
        assert!(matches!(
            render_related(&ex.context[0], &ex, &t, &mut rng_from(1), None),
            Err(DebiasError::TemplatesCollide { .. })
        ));
    }

    #[test]
    fn answer_inside_title_is_flagged_not_rejected() {
        let ex = example("Who was born first, Alma or Bert?", "Alma", QuestionType::Comparison, &["Alma", "Bert"]);
        let r = render_related(&ex.context[0], &ex, &TemplateSet::bundled(), &mut rng_from(2), None).unwrap();
        assert!(r.answer_via_title);
        assert_eq!(r.entity_type, "person");
    }
}
