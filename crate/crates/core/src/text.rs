//! Surface forms shared by the generators and the mock model: question
//! templates, their parsers, and a small rule-based assertion extractor.
//!
//! The extractor understands the sentence shapes the generators emit
//! ("The capital of X is Y", "X is a city in Y", "a, b are T", and
//! "S R O" for any relation in a [`RelationLexicon`]). Clauses are split at
//! ", " or "; " only when a connective follows; negated clauses are skipped.

use std::sync::LazyLock;

use regex::Regex;

use crate::domain::KnowledgeTriplet;

pub const CAPITAL_OF: &str = "capitalOf";
pub const CITY_OF: &str = "cityOf";
pub const IS: &str = "is";
pub const LOCATED_IN: &str = "is located in";

const CONNECTIVES: &[&str] = &[
    "as", "while", "whereas", "since", "so", "because", "but", "not", "therefore", "and", "which",
];

const DISCOURSE_PREFIXES: &[&str] = &[
    "in other words",
    "therefore",
    "thus",
    "hence",
    "clearly",
    "so",
    "as",
    "since",
    "because",
    "while",
    "whereas",
    "and",
    "but",
];

const DEFAULT_RELATIONS: &[&str] = &[
    "is",
    "are",
    "was",
    "is located in",
    "is a city in",
    "is the capital of",
    "is the president of",
    "is a citizen of",
    "plays",
    "plays the",
    "professionally plays the sport",
    "speaks",
    "was born in",
    "died in",
    "was published in",
    "works in",
    "works as",
    "lives in",
    "was founded in",
    "is owned by",
    "is headquartered in",
    "was created by",
    "was developed by",
    "was written by",
    "is affiliated with",
    "holds the position of",
    "plays for",
    "is a member of",
    "is located in the continent of",
    "was originally aired on",
    "is produced by",
    "is a product of",
    "the official language of",
    "has citizenship of",
    "has the profession of",
];

/// Lowercases, collapses whitespace, and strips a leading article and
/// trailing punctuation.
pub fn normalize_entity(s: &str) -> String {
    let lowered = s.trim().to_lowercase();
    let mut words: Vec<&str> = lowered.split_whitespace().collect();
    if words.len() > 1 && matches!(words[0], "a" | "an" | "the") {
        words.remove(0);
    }
    let joined = words.join(" ");
    joined
        .trim_end_matches(['.', ',', ';', ':', '!', '?', '"'])
        .trim()
        .to_string()
}

pub fn normalize_relation(r: &str) -> String {
    r.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Adds an indefinite article to a bare lowercase common noun.
pub fn with_article(noun: &str) -> String {
    let trimmed = noun.trim();
    let first = trimmed.split_whitespace().next().unwrap_or("");
    let starts_upper = trimmed.chars().next().is_some_and(char::is_uppercase);
    if starts_upper || matches!(first, "a" | "an" | "the") || trimmed.is_empty() {
        return trimmed.to_string();
    }
    let vowel = trimmed
        .chars()
        .next()
        .is_some_and(|c| "aeiou".contains(c.to_ascii_lowercase()));
    format!("{} {trimmed}", if vowel { "an" } else { "a" })
}

pub fn has_article(s: &str) -> bool {
    matches!(
        s.split_whitespace().next(),
        Some("a" | "an" | "the")
    )
}

/// Surface relations recognised by the generic "S R O" rule, matched
/// longest-first at the earliest word position.
#[derive(Debug, Clone)]
pub struct RelationLexicon {
    relations: Vec<Vec<String>>,
}

impl Default for RelationLexicon {
    fn default() -> Self {
        let mut lex = RelationLexicon { relations: Vec::new() };
        for r in DEFAULT_RELATIONS {
            lex.insert(r);
        }
        lex
    }
}

impl RelationLexicon {
    pub fn empty() -> Self {
        RelationLexicon { relations: Vec::new() }
    }

    /// Registers a surface relation. Internal relation names without
    /// spaces and with uppercase letters (`capitalOf`) are ignored.
    pub fn insert(&mut self, relation: &str) {
        if relation.chars().any(char::is_uppercase) && !relation.contains(' ') {
            return;
        }
        let words: Vec<String> = relation.split_whitespace().map(str::to_lowercase).collect();
        if words.is_empty() || self.relations.contains(&words) {
            return;
        }
        self.relations.push(words);
        self.relations
            .sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
    }

    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    /// Splits `clause` into (subject, relation, object) at the earliest,
    /// longest relation occurrence with non-empty subject and object.
    pub fn split<'a>(&self, clause: &'a str) -> Option<KnowledgeTriplet> {
        let words: Vec<&'a str> = clause.split_whitespace().collect();
        for i in 1..words.len() {
            for rel in &self.relations {
                let end = i + rel.len();
                if end >= words.len() {
                    continue;
                }
                let hit = words[i..end]
                    .iter()
                    .zip(rel)
                    .all(|(w, r)| w.to_lowercase() == *r);
                if hit {
                    return Some(KnowledgeTriplet::new(
                        words[..i].join(" "),
                        words[i..end].join(" "),
                        words[end..].join(" "),
                    ));
                }
            }
        }
        None
    }
}

static CAPITAL_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^the capital of (.+?) is (.+)$").unwrap());
static CITY_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^(.+?) is a city in (.+)$").unwrap());
static LIST_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(.+?) are (located in )?(.+)$").unwrap());
static SENTENCE_END_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[.!?]+(?:\s+|$)").unwrap());

/// Splits text into sentences at terminal punctuation. A period after a
/// single capital letter (an initial) does not end a sentence.
pub fn sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut start = 0;
    for m in SENTENCE_END_RE.find_iter(text) {
        let before = &text[start..m.start()];
        let last_word = before.split_whitespace().last().unwrap_or("");
        let is_initial = last_word.chars().count() == 1
            && last_word.chars().all(char::is_uppercase)
            && m.as_str().starts_with('.');
        if is_initial && m.end() < text.len() {
            continue;
        }
        let sentence = text[start..m.start()].trim();
        if !sentence.is_empty() {
            out.push(sentence.to_string());
        }
        start = m.end();
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        out.push(tail.to_string());
    }
    out
}

/// Splits a sentence at ", " or "; " when the next word is a connective.
pub fn clauses(sentence: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut rest = sentence;
    loop {
        let cut = [", ", "; "]
            .iter()
            .filter_map(|sep| rest.find(sep).map(|i| (i, sep.len())))
            .min();
        match cut {
            Some((i, len)) => {
                let after = &rest[i + len..];
                let next_word = after
                    .split(|c: char| c.is_whitespace() || c == ',')
                    .next()
                    .unwrap_or("")
                    .to_lowercase();
                current.push_str(&rest[..i]);
                if CONNECTIVES.contains(&next_word.as_str()) {
                    out.push(std::mem::take(&mut current));
                } else {
                    current.push_str(&rest[i..i + len]);
                }
                rest = after;
            }
            None => {
                current.push_str(rest);
                out.push(current);
                break;
            }
        }
    }
    out.into_iter()
        .map(|c| c.trim().to_string())
        .filter(|c| !c.is_empty())
        .collect()
}

fn is_negated(clause: &str) -> bool {
    clause.split_whitespace().any(|w| {
        let w = w.to_lowercase();
        w == "not" || w.ends_with("n't") || w == "never" || w == "no"
    })
}

fn strip_discourse(clause: &str) -> &str {
    let mut c = clause.trim();
    loop {
        let lower = c.to_lowercase();
        let hit = DISCOURSE_PREFIXES.iter().find(|p| {
            lower.starts_with(*p)
                && lower[p.len()..].starts_with([' ', ','])
        });
        match hit {
            Some(p) => c = c[p.len()..].trim_start_matches(',').trim_start(),
            None => return c,
        }
    }
}

/// Extracts the triplets asserted by one clause.
pub fn parse_clause(clause: &str, lexicon: &RelationLexicon) -> Vec<KnowledgeTriplet> {
    let clause = strip_discourse(clause)
        .trim_end_matches(['.', '!', '?', ',', ';'])
        .trim();
    if clause.is_empty() || is_negated(clause) {
        return Vec::new();
    }
    if let Some(c) = CAPITAL_RE.captures(clause) {
        return vec![KnowledgeTriplet::new(&c[1], CAPITAL_OF, &c[2])];
    }
    if let Some(c) = CITY_RE.captures(clause) {
        return vec![KnowledgeTriplet::new(&c[1], CITY_OF, &c[2])];
    }
    if let Some(c) = LIST_RE.captures(clause) {
        let relation = if c.get(2).is_some() { LOCATED_IN } else { IS };
        return split_items(&c[1])
            .into_iter()
            .map(|item| KnowledgeTriplet::new(item, relation, &c[3]))
            .collect();
    }
    lexicon.split(clause).into_iter().collect()
}

/// Extracts every triplet asserted anywhere in `text`.
pub fn parse_assertions(text: &str, lexicon: &RelationLexicon) -> Vec<KnowledgeTriplet> {
    sentences(text)
        .iter()
        .flat_map(|s| clauses(s))
        .flat_map(|c| parse_clause(&c, lexicon))
        .collect()
}

fn split_items(list: &str) -> Vec<String> {
    list.split(", ")
        .flat_map(|part| part.split(" and "))
        .map(|s| s.trim().trim_start_matches("and ").trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

/// Renders the canonical sentence for a triplet.
pub fn render_fact(t: &KnowledgeTriplet) -> String {
    match t.relation.as_str() {
        CAPITAL_OF => format!("The capital of {} is {}.", t.subject, t.object),
        CITY_OF => format!("{} is a city in {}.", t.subject, t.object),
        r => format!("{} {} {}.", t.subject, r, t.object),
    }
}

/// Yes/no question checking a fact triplet.
pub fn factcheck_question(t: &KnowledgeTriplet) -> String {
    let r = t.relation.trim();
    if r == IS {
        format!("Is {} {}?", t.subject, t.object)
    } else if let Some(rest) = r.strip_prefix("is ") {
        format!("Is {} {} {}?", t.subject, rest, t.object)
    } else {
        format!("Is it true that {} {} {}?", t.subject, r, t.object)
    }
}

pub fn analogy_question(capital_a: &str, country_a: &str, city_b: &str, options: [&str; 2]) -> String {
    format!(
        "Fill in the blank: {capital_a} is to {country_a} like {city_b} is to __ (A) {} (B) {}.",
        options[0], options[1]
    )
}

/// How a membership question refers to the target type.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Membership {
    Is,
    LocatedIn,
}

impl Membership {
    pub fn relation(self) -> &'static str {
        match self {
            Membership::Is => IS,
            Membership::LocatedIn => LOCATED_IN,
        }
    }

    fn phrase(self) -> &'static str {
        match self {
            Membership::Is => "",
            Membership::LocatedIn => "located in ",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantifier {
    All,
    Any,
}

pub fn count_question(target: &str, membership: Membership, items: &[String], options: [usize; 2]) -> String {
    format!(
        "How many of them are {}{target}? {}. (A) {} (B) {}.",
        membership.phrase(),
        items.join(", "),
        options[0],
        options[1]
    )
}

pub fn quantifier_question(
    quantifier: Quantifier,
    target: &str,
    membership: Membership,
    items: &[String],
) -> String {
    let q = match quantifier {
        Quantifier::All => "all",
        Quantifier::Any => "any",
    };
    format!(
        "Are {q} of them {}{target}? {}. (A) yes (B) no.",
        membership.phrase(),
        items.join(", ")
    )
}

/// A question recognised by [`parse_question`].
#[derive(Debug, Clone, PartialEq)]
pub enum Question {
    /// Candidate readings of a yes/no fact query, most specific first.
    Fact(Vec<KnowledgeTriplet>),
    Analogy {
        capital_a: String,
        country_a: String,
        city_b: String,
        options: [String; 2],
    },
    Count {
        target: String,
        membership: Membership,
        items: Vec<String>,
        options: [String; 2],
    },
    Quantified {
        quantifier: Quantifier,
        target: String,
        membership: Membership,
        items: Vec<String>,
    },
}

static ANALOGY_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^Fill in the blank: (.+?) is to (.+?) like (.+?) is to _+\.? \(A\) (.+?) \(B\) (.+?)\.?(?: Answer\?)?$")
        .unwrap()
});
static COUNT_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^How many of them are (located in )?(.+?)\? (.+)\. \(A\) (\S+) \(B\) (\S+?)\.?(?: Answer\?)?$")
        .unwrap()
});
static QUANT_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^Are (all|any) of them (located in )?(.+?)\? (.+)\. \(A\) yes \(B\) no\.?(?: Answer\?)?$")
        .unwrap()
});

const QUESTION_STARTS: &[&str] = &[
    "Is ",
    "Fill in the blank: ",
    "How many of them are ",
    "Are all of them ",
    "Are any of them ",
];

/// Finds and parses the last recognisable question in a line of prompt text.
pub fn find_question(line: &str, lexicon: &RelationLexicon) -> Option<Question> {
    let mut starts: Vec<usize> = Vec::new();
    for pat in QUESTION_STARTS {
        for (i, _) in line.match_indices(pat) {
            let boundary = i == 0 || {
                let before = line[..i].trim_end();
                before.len() < line[..i].len()
                    && before.ends_with(['.', '?', '!', '"', ':'])
            };
            if boundary {
                starts.push(i);
            }
        }
    }
    starts.sort_unstable();
    starts
        .into_iter()
        .rev()
        .find_map(|i| parse_question(line[i..].trim(), lexicon))
}

pub fn parse_question(q: &str, lexicon: &RelationLexicon) -> Option<Question> {
    let q = q.trim();
    if let Some(c) = ANALOGY_RE.captures(q) {
        return Some(Question::Analogy {
            capital_a: c[1].to_string(),
            country_a: c[2].to_string(),
            city_b: c[3].to_string(),
            options: [c[4].to_string(), c[5].to_string()],
        });
    }
    if let Some(c) = COUNT_RE.captures(q) {
        return Some(Question::Count {
            target: c[2].to_string(),
            membership: if c.get(1).is_some() { Membership::LocatedIn } else { Membership::Is },
            items: c[3].split(", ").map(str::to_string).collect(),
            options: [c[4].to_string(), c[5].to_string()],
        });
    }
    if let Some(c) = QUANT_RE.captures(q) {
        return Some(Question::Quantified {
            quantifier: if &c[1] == "all" { Quantifier::All } else { Quantifier::Any },
            target: c[3].to_string(),
            membership: if c.get(2).is_some() { Membership::LocatedIn } else { Membership::Is },
            items: c[4].split(", ").map(str::to_string).collect(),
        });
    }
    let body = q.strip_suffix('?')?;
    if let Some(stmt) = body.strip_prefix("Is it true that ") {
        let t = parse_clause(stmt, lexicon);
        return (t.len() == 1).then_some(Question::Fact(t));
    }
    let body = body.strip_prefix("Is ")?;
    let words: Vec<&str> = body.split_whitespace().collect();
    let mut readings = Vec::new();
    for k in 1..words.len() {
        let stmt = format!("{} is {}", words[..k].join(" "), words[k..].join(" "));
        if let [t] = parse_clause(&stmt, lexicon).as_slice() {
            readings.push(t.clone());
        }
    }
    (!readings.is_empty()).then_some(Question::Fact(readings))
}
