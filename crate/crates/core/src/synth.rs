//! Small generated corpora with planted structure, for property checks and demos.
//!
//! Names are built from nonsense syllables so they never collide with the
//! bundled sentence pool or templates.

use crate::corpus::{EvidenceTriple, Paragraph, Provenance, QaExample, QuestionType, SupportingFact};

const SYLLABLES: &[&str] = &["kav", "dor", "mel", "zan", "tor", "lix", "quen", "ras", "bov", "sef", "nur", "gal"];
const PLACES: &[&str] = &["Ostvale", "Kelmar", "Drunholt", "Varnesk", "Pellisar", "Qorvia"];
const COUNTRIES: &[&str] = &["Arvenland", "Belmoria", "Castrelle", "Dunmark"];

fn cap(s: &str) -> String {
    let mut c = s.chars();
    c.next().map(|f| f.to_uppercase().collect::<String>() + c.as_str()).unwrap_or_default()
}

/// Distinct two-word name for every `k` below 1728.
pub fn name(k: usize) -> String {
    let n = SYLLABLES.len();
    let first = format!("{}{}a", SYLLABLES[k % n], SYLLABLES[(k / n) % n]);
    let last = format!("{}en", SYLLABLES[(k / (n * n)) % n]);
    format!("{} {}", cap(&first), cap(&last))
}

fn example(
    id: String,
    question: String,
    answer: String,
    qtype: QuestionType,
    context: Vec<Paragraph>,
    sfs: Vec<SupportingFact>,
    evidence: Vec<EvidenceTriple>,
) -> QaExample {
    QaExample {
        id,
        question,
        answer,
        qtype,
        context,
        supporting_facts: sfs,
        evidence_sets: vec![evidence],
        provenance: Provenance::default(),
        extra: Default::default(),
    }
}

fn distractor(k: usize) -> Paragraph {
    let who = name(k);
    Paragraph::new(
        who.clone(),
        vec![
            format!("{who} was a painter from {}.", PLACES[k % PLACES.len()]),
            "Several of the works are held in private collections.".into(),
        ],
    )
}

fn film_bridge(i: usize, base: usize, answer_at: usize) -> QaExample {
    let (film, director) = (name(base), name(base + 1));
    let place = PLACES[i % PLACES.len()];
    let mut film_sents = vec![
        format!("{film} is a 2001 film directed by {director}."),
        "It was shot over two summers with a small crew.".to_string(),
        "The film premiered at a regional festival.".to_string(),
    ];
    if answer_at > 0 {
        film_sents.swap(0, answer_at);
    }
    example(
        format!("syn-{i:04}"),
        format!("Who directed the film {film}?"),
        director.clone(),
        QuestionType::Compositional,
        vec![
            Paragraph::new(film.clone(), film_sents),
            distractor(base + 2),
            Paragraph::new(
                director.clone(),
                vec![
                    format!("{director} was a director born in {place}."),
                    "Early work included several short documentaries.".into(),
                ],
            ),
            distractor(base + 3),
        ],
        vec![SupportingFact::new(film.clone(), answer_at), SupportingFact::new(director.clone(), 0)],
        vec![
            EvidenceTriple::new(film, "director", director.clone()),
            EvidenceTriple::new(director, "place of birth", place),
        ],
    )
}

fn born_first(i: usize, base: usize) -> QaExample {
    let (a, b) = (name(base), name(base + 1));
    let (ya, yb) = (1890 + i % 40, 1940 + i % 40);
    example(
        format!("syn-{i:04}"),
        format!("Who was born first, {a} or {b}?"),
        a.clone(),
        QuestionType::Comparison,
        vec![
            Paragraph::new(
                a.clone(),
                vec![format!("{a} was born in {ya}."), "The family later moved abroad.".into()],
            ),
            distractor(base + 2),
            Paragraph::new(
                b.clone(),
                vec![format!("{b} was born in {yb}."), "Training began at a local school.".into()],
            ),
        ],
        vec![SupportingFact::new(a.clone(), 0), SupportingFact::new(b.clone(), 0)],
        vec![
            EvidenceTriple::new(a, "date of birth", ya.to_string()),
            EvidenceTriple::new(b, "date of birth", yb.to_string()),
        ],
    )
}

/// Every supporting fact sits at sentence 0 and the answer is in the first
/// sentence of a gold paragraph. Alternates film bridge and comparison questions.
pub fn position0_corpus(n: usize) -> Vec<QaExample> {
    (0..n)
        .map(|i| if i % 2 == 0 { film_bridge(i, 4 * i, 0) } else { born_first(i, 4 * i) })
        .collect()
}

/// Like `position0_corpus`, but every fourth bridge question keeps its answer in sentence 2.
pub fn toy_corpus(n: usize) -> Vec<QaExample> {
    (0..n)
        .map(|i| match i % 4 {
            0 => film_bridge(i, 4 * i, 2),
            2 => film_bridge(i, 4 * i, 0),
            _ => born_first(i, 4 * i),
        })
        .collect()
}

/// Comparison questions with planted gold: born-first, came-out-earlier and
/// same-country questions, the gold consistent with the triples.
pub fn comparison_suite(n: usize) -> Vec<QaExample> {
    (0..n)
        .map(|i| {
            let (a, b) = (name(4 * i), name(4 * i + 1));
            let gold_first = i % 2 == 0;
            let id = format!("cmp-{i:04}");
            let ctx = |sa: String, sb: String| {
                vec![
                    Paragraph::new(a.clone(), vec![sa, "Little else is recorded.".into()]),
                    distractor(4 * i + 2),
                    Paragraph::new(b.clone(), vec![sb, "Records are incomplete.".into()]),
                ]
            };
            let sfs = vec![SupportingFact::new(a.clone(), 0), SupportingFact::new(b.clone(), 0)];
            let (early, late) = (1900 + i, 1960 + i);
            let (ya, yb) = if gold_first { (early, late) } else { (late, early) };
            let gold = if gold_first { a.clone() } else { b.clone() };
            match i % 3 {
                0 => example(
                    id,
                    format!("Who was born first, {a} or {b}?"),
                    gold,
                    QuestionType::Comparison,
                    ctx(format!("{a} was born in {ya}."), format!("{b} was born in {yb}.")),
                    sfs,
                    vec![
                        EvidenceTriple::new(a.clone(), "date of birth", ya.to_string()),
                        EvidenceTriple::new(b.clone(), "date of birth", yb.to_string()),
                    ],
                ),
                1 => example(
                    id,
                    format!("Which film came out earlier, {a} or {b}?"),
                    gold,
                    QuestionType::Comparison,
                    ctx(format!("{a} is a film released in {ya}."), format!("{b} is a film released in {yb}.")),
                    sfs,
                    vec![
                        EvidenceTriple::new(a.clone(), "publication date", ya.to_string()),
                        EvidenceTriple::new(b.clone(), "publication date", yb.to_string()),
                    ],
                ),
                _ => {
                    let same = i % 2 == 0;
                    let ca = COUNTRIES[i % COUNTRIES.len()];
                    let cb = if same { ca } else { COUNTRIES[(i + 1) % COUNTRIES.len()] };
                    example(
                        id,
                        format!("Are {a} and {b} located in the same country?"),
                        if same { "yes".into() } else { "no".into() },
                        QuestionType::Comparison,
                        ctx(format!("{a} is an airport in {ca}."), format!("{b} is an airport in {cb}.")),
                        sfs,
                        vec![
                            EvidenceTriple::new(a.clone(), "country", ca),
                            EvidenceTriple::new(b.clone(), "country", cb),
                        ],
                    )
                }
            }
        })
        .collect()
}

/// Two-hop bridge questions with planted triples; the first-hop object is the
/// intermediate entity.
pub fn bridge_suite(n: usize) -> Vec<QaExample> {
    (0..n)
        .map(|i| {
            let (x, y, z) = (name(4 * i), name(4 * i + 1), name(4 * i + 2));
            let id = format!("brg-{i:04}");
            let (question, qtype, r1, r2, s1, s2) = if i % 2 == 0 {
                (
                    format!("Who is the father of the director of film {x}?"),
                    QuestionType::Compositional,
                    "director",
                    "father",
                    format!("{x} is a film directed by {y}."),
                    format!("{y} is the son of {z}."),
                )
            } else {
                (
                    format!("Who is the paternal grandfather of {x}?"),
                    QuestionType::Inference,
                    "father",
                    "father",
                    format!("{x} was the son of {y}."),
                    format!("{y} was the son of {z}."),
                )
            };
            example(
                id,
                question,
                z.clone(),
                qtype,
                vec![
                    Paragraph::new(x.clone(), vec![s1, "Not much else is known.".into()]),
                    Paragraph::new(y.clone(), vec![s2, "The estate passed to relatives.".into()]),
                    distractor(4 * i + 3),
                ],
                vec![SupportingFact::new(x.clone(), 0), SupportingFact::new(y.clone(), 0)],
                vec![EvidenceTriple::new(x, r1, y.clone()), EvidenceTriple::new(y, r2, z)],
            )
        })
        .collect()
}
