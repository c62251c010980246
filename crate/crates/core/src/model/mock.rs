//! Deterministic rule-based stand-in for an edited language model.
//!
//! The mock holds a knowledge base keyed by (subject, relation). Every
//! request builds an effective view in which "New Fact: S R O." context
//! lines override stored triplets. Label logits are `+L` for the label the
//! view entails and `-L` for the other, with `L = gap * (1 + support)` where
//! `support` is the fraction of decided explanation assertions that the
//! view confirms. Token logprobs are `base_logprob`, lowered by
//! `contradiction_penalty / n_tokens` for each contradicted assertion in
//! the target.

use std::collections::{BTreeMap, HashSet};
use std::sync::LazyLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    Capabilities, GenerateRequest, GenerateResponse, LabelLogitsRequest, LabelLogitsResponse,
    LogprobsRequest, LogprobsResponse, ModelEndpoint, TokenizeRequest, TokenizeResponse, FACT_PREFIX,
};
use crate::domain::KnowledgeTriplet;
use crate::error::{bail, Result};
use crate::text::{
    self, normalize_entity, normalize_relation, Membership, Quantifier, Question, RelationLexicon,
    CAPITAL_OF, CITY_OF,
};

const COT_MARKERS: &[&str] = &["Let's think step by step:", "Explanation:"];
const ANSWER_MARKER: &str = "The best answer is:";
const MISTAKE_WORDS: &[&str] = &["desert", "ocean", "volcano", "banana", "glacier", "bicycle", "moon"];
const SYNONYMS: &[(&str, &str)] = &[
    (" died in ", " passed away in "),
    (" was published in ", " was released in "),
    (", while ", ", whereas "),
    (", whereas ", ", while "),
    (", as ", ", since "),
    (", since ", ", because "),
    (", not ", ", but not "),
    ("Therefore, ", "Thus, "),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MockConfig {
    pub logit_gap: f64,
    pub base_logprob: f64,
    pub contradiction_penalty: f64,
    pub noise_sigma: f64,
    pub seed: u64,
    /// Logprob bonus for target words that also occur in the prompt.
    pub copy_bonus: f64,
}

impl Default for MockConfig {
    fn default() -> Self {
        MockConfig {
            logit_gap: 4.0,
            base_logprob: -2.0,
            contradiction_penalty: 2.0,
            noise_sigma: 0.0,
            seed: 0,
            copy_bonus: 0.0,
        }
    }
}

type Key = (String, String);

#[derive(Debug, Clone)]
pub struct MockModel {
    config: MockConfig,
    kb: BTreeMap<Key, String>,
    lexicon: RelationLexicon,
}

static TOKEN_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r#"\s*(?:[^\s.,;:!?"()]+|[.,;:!?"()])|\s+"#).unwrap()
});

/// Splits text into words that carry their leading whitespace, with
/// punctuation as separate tokens. Concatenating the tokens restores the
/// input exactly.
pub fn mock_tokenize(text: &str) -> Vec<String> {
    TOKEN_RE.find_iter(text).map(|m| m.as_str().to_string()).collect()
}

fn key(subject: &str, relation: &str) -> Key {
    let rel = match relation {
        CAPITAL_OF | CITY_OF => relation.to_string(),
        r => normalize_relation(r),
    };
    (normalize_entity(subject), rel)
}

/// The stored KB overlaid with request-scoped context facts.
struct View<'a> {
    base: &'a BTreeMap<Key, String>,
    overlay: BTreeMap<Key, String>,
}

impl View<'_> {
    fn get(&self, subject: &str, relation: &str) -> Option<&str> {
        let k = key(subject, relation);
        if let Some(v) = self.overlay.get(&k).or_else(|| self.base.get(&k)) {
            return Some(v);
        }
        if k.1 != text::IS {
            return None;
        }
        // A bare copula may stand in for a single "is ..." relation.
        let mut found: Option<&str> = None;
        for map in [&self.overlay, self.base] {
            let range = map.range((k.0.clone(), String::new())..);
            for ((s, r), o) in range {
                if *s != k.0 {
                    break;
                }
                if r.starts_with("is ") {
                    if found.is_some_and(|f| f != o) {
                        return None;
                    }
                    found = Some(o);
                }
            }
            if found.is_some() {
                return found;
            }
        }
        None
    }

    fn get_norm(&self, subject: &str, relation: &str) -> Option<String> {
        self.get(subject, relation).map(normalize_entity)
    }

    /// `Some(true)` when the view confirms the triplet, `Some(false)` when it
    /// holds a different object, `None` when the view has no entry.
    fn holds(&self, t: &KnowledgeTriplet) -> Option<bool> {
        self.get_norm(&t.subject, &t.relation)
            .map(|o| o == normalize_entity(&t.object))
    }
}

impl MockModel {
    pub fn new(config: MockConfig) -> Self {
        MockModel {
            config,
            kb: BTreeMap::new(),
            lexicon: RelationLexicon::default(),
        }
    }

    pub fn config(&self) -> &MockConfig {
        &self.config
    }

    /// Adds stored facts; later facts replace earlier ones with the same
    /// (subject, relation).
    pub fn with_facts<'a>(mut self, facts: impl IntoIterator<Item = &'a KnowledgeTriplet>) -> Self {
        for f in facts {
            self.lexicon.insert(&f.relation);
            self.kb.insert(key(&f.subject, &f.relation), f.object.trim().to_string());
        }
        self
    }

    pub fn with_relations<'a>(mut self, relations: impl IntoIterator<Item = &'a str>) -> Self {
        for r in relations {
            self.lexicon.insert(r);
        }
        self
    }

    pub fn kb_len(&self) -> usize {
        self.kb.len()
    }

    fn view(&self, context: &[String]) -> View<'_> {
        let mut overlay = BTreeMap::new();
        for line in context {
            let fact = line.trim().strip_prefix(FACT_PREFIX.trim_end()).unwrap_or(line).trim();
            for t in text::parse_assertions(fact, &self.lexicon) {
                overlay.insert(key(&t.subject, &t.relation), t.object.trim().to_string());
            }
        }
        View { base: &self.kb, overlay }
    }

    fn rng_for<T: Serialize>(&self, tag: &str, req: &T) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(self.config.seed.to_le_bytes());
        h.update(tag.as_bytes());
        h.update(serde_json::to_vec(req).unwrap_or_default());
        let digest = h.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest);
        ChaCha8Rng::from_seed(seed)
    }

    fn noise(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.config.noise_sigma > 0.0 {
            rng.sample(Normal::new(0.0, self.config.noise_sigma).expect("sigma validated"))
        } else {
            0.0
        }
    }

    fn find_question(&self, prompt: &str) -> Option<Question> {
        let question_part = COT_MARKERS
            .iter()
            .filter_map(|m| prompt.find(m))
            .min()
            .map_or(prompt, |i| &prompt[..i]);
        question_part
            .lines()
            .rev()
            .find_map(|line| text::find_question(line, &self.lexicon))
    }

    /// Index into `labels` of the label the view entails.
    fn entailed(&self, view: &View<'_>, q: &Question, labels: &[String]) -> Option<usize> {
        let find = |name: &str| labels.iter().position(|l| l.eq_ignore_ascii_case(name));
        match q {
            Question::Fact(readings) => readings
                .iter()
                .find_map(|t| view.holds(t))
                .and_then(|truth| find(if truth { "yes" } else { "no" })),
            Question::Analogy {
                capital_a,
                country_a,
                city_b,
                options,
            } => {
                let is_capital = view.get_norm(country_a, CAPITAL_OF) == Some(normalize_entity(capital_a));
                let is_city = view.get_norm(capital_a, CITY_OF) == Some(normalize_entity(country_a));
                let city_b_norm = normalize_entity(city_b);
                let capital_match = |opt: &String| view.get_norm(opt, CAPITAL_OF) == Some(city_b_norm.clone());
                let city_match = |opt: &String| view.get_norm(city_b, CITY_OF) == Some(normalize_entity(opt));
                let mut relations: Vec<&dyn Fn(&String) -> bool> = Vec::new();
                if is_capital {
                    relations.push(&capital_match);
                }
                if is_city || is_capital {
                    relations.push(&city_match);
                }
                relations.iter().find_map(|rel| {
                    let hits: Vec<usize> = (0..2).filter(|&i| rel(&options[i])).collect();
                    match hits.as_slice() {
                        [i] => find(["A", "B"][*i]),
                        _ => None,
                    }
                })
            }
            Question::Count {
                target,
                membership,
                items,
                options,
            } => {
                let n = member_count(view, target, *membership, items);
                let i = options.iter().position(|o| o.parse::<usize>() == Ok(n))?;
                find(["A", "B"][i])
            }
            Question::Quantified {
                quantifier,
                target,
                membership,
                items,
            } => {
                let n = member_count(view, target, *membership, items);
                let yes = match quantifier {
                    Quantifier::All => n == items.len(),
                    Quantifier::Any => n > 0,
                };
                find(if yes { "A" } else { "B" })
            }
        }
    }

    /// Fraction of decided explanation assertions confirmed by the view.
    fn support(&self, view: &View<'_>, prompt: &str) -> f64 {
        let Some(expl) = explanation_in(prompt) else {
            return 0.0;
        };
        let (mut yes, mut decided) = (0usize, 0usize);
        for t in text::parse_assertions(expl, &self.lexicon) {
            if let Some(h) = view.holds(&t) {
                decided += 1;
                yes += usize::from(h);
            }
        }
        if decided == 0 {
            0.0
        } else {
            yes as f64 / decided as f64
        }
    }

    fn contradictions(&self, view: &View<'_>, target: &str) -> usize {
        text::parse_assertions(target, &self.lexicon)
            .iter()
            .filter(|t| view.holds(t) == Some(false))
            .count()
    }

    fn explain(&self, view: &View<'_>, q: &Question) -> Option<String> {
        match q {
            Question::Fact(readings) => readings.iter().find_map(|t| {
                let o = view.get(&t.subject, &t.relation)?;
                Some(format!("{} {} {}.", t.subject, t.relation, o))
            }),
            Question::Analogy { city_b, .. } => {
                let country = view.get(city_b, CITY_OF)?;
                Some(format!("{city_b} is a city in {country}."))
            }
            Question::Count {
                target,
                membership,
                items,
                ..
            }
            | Question::Quantified {
                target,
                membership,
                items,
                ..
            } => {
                let members: Vec<&str> = items
                    .iter()
                    .filter(|i| is_member(view, i, target, *membership))
                    .map(String::as_str)
                    .collect();
                if members.is_empty() {
                    return Some(format!("None of them are {target}."));
                }
                let verb = match membership {
                    Membership::Is => "are",
                    Membership::LocatedIn => "are located in",
                };
                Some(format!("{} {verb} {target}.", members.join(", ")))
            }
        }
    }

    fn rewrite(&self, prompt: &str, original: &str, seed: u64) -> String {
        let lower = prompt.to_lowercase();
        if lower.contains("paraphras") {
            paraphrase_text(original)
        } else if lower.contains("mistake") {
            insert_mistake(original, seed)
        } else {
            original.to_string()
        }
    }
}

fn is_member(view: &View<'_>, item: &str, target: &str, membership: Membership) -> bool {
    view.get_norm(item, membership.relation()) == Some(normalize_entity(target))
}

fn member_count(view: &View<'_>, target: &str, membership: Membership, items: &[String]) -> usize {
    items
        .iter()
        .filter(|i| is_member(view, i, target, membership))
        .count()
}

/// The explanation segment of a CoT or simulator prompt.
fn explanation_in(prompt: &str) -> Option<&str> {
    let (pos, marker) = COT_MARKERS
        .iter()
        .filter_map(|m| prompt.rfind(m).map(|i| (i, *m)))
        .max()?;
    let rest = &prompt[pos + marker.len()..];
    let end = rest.rfind(ANSWER_MARKER).unwrap_or(rest.len());
    Some(rest[..end].trim())
}

fn insert_mistake(original: &str, seed: u64) -> String {
    let trimmed = original.trim_end();
    let body = trimmed.trim_end_matches(|c: char| c.is_ascii_punctuation());
    let tail = &trimmed[body.len()..];
    let (head, last) = match body.rfind(' ') {
        Some(i) => (&body[..=i], &body[i + 1..]),
        None => ("", body),
    };
    let start = (seed as usize) % MISTAKE_WORDS.len();
    let replacement = (0..MISTAKE_WORDS.len())
        .map(|k| MISTAKE_WORDS[(start + k) % MISTAKE_WORDS.len()])
        .find(|w| !w.eq_ignore_ascii_case(last))
        .unwrap_or("desert");
    format!("{head}{replacement}{tail}")
}

fn paraphrase_text(original: &str) -> String {
    for (from, to) in SYNONYMS {
        if original.contains(from) {
            return original.replacen(from, to, 1);
        }
    }
    format!("In other words, {original}")
}

fn prompt_words(prompt: &str) -> HashSet<String> {
    prompt
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

static REWRITE_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?s)Original: (.*)\nRewritten:\s*$").unwrap());

impl ModelEndpoint for MockModel {
    fn descriptor(&self) -> String {
        let mut h = Sha256::new();
        for ((s, r), o) in &self.kb {
            h.update(format!("{s}\t{r}\t{o}\n").as_bytes());
        }
        let c = &self.config;
        format!(
            "mock/v1 gap={} base={} penalty={} sigma={} seed={} copy={} kb={}",
            c.logit_gap,
            c.base_logprob,
            c.contradiction_penalty,
            c.noise_sigma,
            c.seed,
            c.copy_bonus,
            &hex::encode(h.finalize())[..12]
        )
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities::ALL
    }

    fn tokenize(&self, req: &TokenizeRequest) -> Result<TokenizeResponse> {
        let tokens = mock_tokenize(&req.text);
        let ids = tokens
            .iter()
            .map(|t| {
                let d = Sha256::digest(t.as_bytes());
                i64::from(u32::from_le_bytes([d[0], d[1], d[2], d[3]]))
            })
            .collect();
        Ok(TokenizeResponse { tokens, ids })
    }

    fn label_logits(&self, req: &LabelLogitsRequest) -> Result<LabelLogitsResponse> {
        if req.labels.is_empty() {
            bail!(InvalidInstance, "empty label set");
        }
        let view = self.view(&req.context);
        let mut rng = self.rng_for("label_logits", req);
        let entailed = self
            .find_question(&req.prompt)
            .and_then(|q| self.entailed(&view, &q, &req.labels));
        let (mut logits, fallback) = match entailed {
            Some(idx) => {
                let l = self.config.logit_gap * (1.0 + self.support(&view, &req.prompt));
                let logits = (0..req.labels.len())
                    .map(|i| if i == idx { l } else { -l })
                    .collect::<Vec<_>>();
                (logits, false)
            }
            None => (vec![0.0; req.labels.len()], true),
        };
        for l in &mut logits {
            *l += self.noise(&mut rng);
        }
        Ok(LabelLogitsResponse { logits, fallback })
    }

    fn generate(&self, req: &GenerateRequest) -> Result<GenerateResponse> {
        let mut text = if let Some(c) = REWRITE_RE.captures(&req.prompt) {
            self.rewrite(&req.prompt, c[1].trim(), req.seed)
        } else {
            let view = self.view(&req.context);
            match self.find_question(&req.prompt) {
                Some(q) => {
                    let expl = self
                        .explain(&view, &q)
                        .unwrap_or_else(|| "I cannot recall the relevant fact.".to_string());
                    let labels = ["yes", "no", "A", "B"].map(String::from);
                    match self.entailed(&view, &q, &labels) {
                        Some(i) => format!("{expl}\n{ANSWER_MARKER} {}", labels[i]),
                        None => expl,
                    }
                }
                None => "I cannot recall the relevant fact.".to_string(),
            }
        };
        if let Some(cut) = req.stop.iter().filter_map(|s| text.find(s.as_str())).min() {
            text.truncate(cut);
        }
        let tokens = mock_tokenize(&text);
        if tokens.len() > req.max_tokens {
            text = tokens[..req.max_tokens].concat();
        }
        Ok(GenerateResponse { text })
    }

    fn logprobs(&self, req: &LogprobsRequest) -> Result<LogprobsResponse> {
        if req.target.is_empty() {
            bail!(EmptyExplanation, "logprob target is empty");
        }
        let view = self.view(&req.context);
        let tokens = mock_tokenize(&req.target);
        let n = tokens.len() as f64;
        let penalty = self.config.contradiction_penalty * self.contradictions(&view, &req.target) as f64 / n;
        let seen = prompt_words(&req.prefix);
        let mut rng = self.rng_for("logprobs", req);
        let logprobs = tokens
            .iter()
            .map(|t| {
                let word = t.trim().to_lowercase();
                let bonus = if self.config.copy_bonus != 0.0 && seen.contains(&word) {
                    self.config.copy_bonus
                } else {
                    0.0
                };
                (self.config.base_logprob - penalty + bonus + self.noise(&mut rng)).min(0.0)
            })
            .collect();
        Ok(LogprobsResponse { tokens, logprobs })
    }
}
