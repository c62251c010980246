//! Chain-of-thought corruptions: truncation, filler replacement, and
//! helper-model rewrites. Transforms only ever see the explanation text.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::model::{self, GenerateParams, IceContext, ModelEndpoint};
use crate::prompts::PromptSet;

const STATIVE_VERBS: &[&str] = &[
    "is", "are", "was", "were", "be", "been", "being", "has", "have", "had", "seems", "appears", "knows",
    "believes", "contains", "belongs",
];

const ACTION_VERBS: &[&str] = &[
    "plays", "play", "played", "died", "dies", "passed", "published", "wrote", "writes", "won", "wins",
    "lives", "lived", "works", "worked", "speaks", "spoke", "founded", "created", "developed", "produced",
    "sings", "sang", "flows", "borders", "invented", "discovered", "directed", "received", "moved",
    "became", "joined", "led", "made", "happened", "occurred", "released", "came", "went", "happen",
    "did", "does", "do", "leads", "makes", "serves", "served",
];

/// Words skipped when looking for the first noun after a stative verb.
const NON_NOUNS: &[&str] = &[
    "a", "an", "the", "not", "also", "very", "no", "in", "of", "on", "at", "to", "for", "with", "by",
    "from", "located", "known", "considered", "called", "situated", "really", "indeed", "this", "that",
    "its", "his", "her", "their", "one", "all", "any", "some", "more", "most",
];

const RULE2_CONNECTIVES: &[&str] = &["while", "whereas", "so", "as", "since"];

/// First ⌊n/3⌋ characters.
pub fn truncate_one_third(expl: &str) -> String {
    let n = expl.chars().count() / 3;
    expl.chars().take(n).collect()
}

/// True when the period at byte `i` closes a single capital initial ("P.").
fn is_initial(expl: &str, i: usize) -> bool {
    let word = expl[..i].rsplit(char::is_whitespace).next().unwrap_or("");
    let mut chars = word.chars();
    matches!((chars.next(), chars.next()), (Some(c), None) if c.is_uppercase())
}

/// Byte offsets just past each sentence terminator ("." "!" "?" followed by
/// whitespace or end of text). Periods after initials do not count.
fn sentence_ends(expl: &str) -> Vec<usize> {
    let mut ends = Vec::new();
    let mut iter = expl.char_indices().peekable();
    while let Some((i, c)) = iter.next() {
        if c == '.' && is_initial(expl, i) {
            continue;
        }
        if matches!(c, '.' | '!' | '?') {
            match iter.peek() {
                None => ends.push(i + c.len_utf8()),
                Some((_, next)) if next.is_whitespace() => ends.push(i + c.len_utf8()),
                _ => {}
            }
        }
    }
    ends
}

fn bare(word: &str) -> String {
    word.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase()
}

/// Byte spans of whitespace-separated words.
fn word_spans(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_whitespace(), start) {
            (false, None) => start = Some(i),
            (true, Some(s)) => {
                spans.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        spans.push((s, text.len()));
    }
    spans
}

fn rule_first_sentence(expl: &str) -> Option<String> {
    let ends = sentence_ends(expl);
    let trailing = expl[ends.last().copied().unwrap_or(0)..].trim().is_empty();
    let count = ends.len() + usize::from(!trailing);
    (count > 3).then(|| expl[..ends[0]].to_string())
}

fn rule_connective_comma(expl: &str) -> Option<String> {
    for (i, _) in expl.match_indices(',') {
        let next = expl[i + 1..].split_whitespace().next().map(bare);
        if next.is_some_and(|w| RULE2_CONNECTIVES.contains(&w.as_str())) {
            let head = expl[..i].trim_end();
            if !head.is_empty() {
                return Some(head.to_string());
            }
        }
    }
    None
}

fn rule_first_verb(expl: &str) -> Option<String> {
    let spans = word_spans(expl);
    let (vi, stative) = spans.iter().enumerate().find_map(|(i, &(s, e))| {
        let w = bare(&expl[s..e]);
        if STATIVE_VERBS.contains(&w.as_str()) {
            Some((i, true))
        } else if ACTION_VERBS.contains(&w.as_str()) {
            Some((i, false))
        } else {
            None
        }
    })?;
    let end_of = |i: usize| {
        let (s, e) = spans[i];
        s + expl[s..e].trim_end_matches(|c: char| !c.is_alphanumeric()).len()
    };
    if !stative {
        return Some(expl[..end_of(vi)].to_string());
    }
    (vi + 1..spans.len())
        .find(|&i| {
            let w = bare(&expl[spans[i].0..spans[i].1]);
            !w.is_empty() && !NON_NOUNS.contains(&w.as_str()) && !STATIVE_VERBS.contains(&w.as_str())
        })
        .map(|i| expl[..end_of(i)].to_string())
}

fn rule_first_comma(expl: &str) -> Option<String> {
    let i = expl.find([',', ';'])?;
    let head = expl[..i].trim_end();
    (!head.is_empty()).then(|| head.to_string())
}

/// Ordered truncation heuristics producing a syntactically complete prefix:
/// more than three sentences keeps the first; a comma before
/// while/whereas/so/as/since keeps what precedes it; otherwise the first
/// verb decides (action verbs end the prefix, stative verbs extend it to
/// the next noun); then the first comma or semicolon; then one third.
pub fn truncate_heuristic(expl: &str) -> String {
    let out = rule_first_sentence(expl)
        .or_else(|| rule_connective_comma(expl))
        .or_else(|| rule_first_verb(expl))
        .or_else(|| rule_first_comma(expl))
        .unwrap_or_else(|| truncate_one_third(expl));
    if out.trim().is_empty() {
        if let Some(&(s, e)) = word_spans(expl).first() {
            return expl[..e.max(s)].to_string();
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FillerKind {
    #[default]
    Dots,
    Stars,
    Dashes,
    Dollar,
    Pilcrow,
}

impl FillerKind {
    pub const ALL: [FillerKind; 5] = [
        FillerKind::Dots,
        FillerKind::Stars,
        FillerKind::Dashes,
        FillerKind::Dollar,
        FillerKind::Pilcrow,
    ];

    pub fn unit(self) -> &'static str {
        match self {
            FillerKind::Dots => "...",
            FillerKind::Stars => "***",
            FillerKind::Dashes => "---",
            FillerKind::Dollar => "$$$",
            FillerKind::Pilcrow => "¶¶¶",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FillerKind::Dots => "dots",
            FillerKind::Stars => "stars",
            FillerKind::Dashes => "dashes",
            FillerKind::Dollar => "dollar",
            FillerKind::Pilcrow => "pilcrow",
        }
    }
}

/// Repeating: every character becomes one filler unit. Otherwise the
/// whole explanation becomes a single unit.
pub fn fill_tokens(expl: &str, kind: FillerKind, repeating: bool) -> String {
    if repeating {
        kind.unit().repeat(expl.chars().count())
    } else {
        kind.unit().to_string()
    }
}

const HELPER_ATTEMPTS: u64 = 3;

fn rewrite(
    helper: &dyn ModelEndpoint,
    prompt: &str,
    expl: &str,
    seed: u64,
    accept_noop: bool,
) -> Result<String> {
    let max_tokens = model::mock_tokenize(expl).len() * 3 + 32;
    for attempt in 0..HELPER_ATTEMPTS {
        let params = GenerateParams {
            max_tokens,
            stop: Vec::new(),
            temperature: 0.0,
            seed: seed.wrapping_add(attempt),
        };
        let out = model::generate(helper, &IceContext::empty(), prompt, &params)?;
        let out = out.trim().to_string();
        if out != expl.trim() || accept_noop {
            return Ok(out);
        }
    }
    bail!(
        CorruptionNoop,
        "helper returned the input unchanged after {HELPER_ATTEMPTS} attempts"
    )
}

/// Asks `helper` to insert a mistake. Fails with `CORRUPTION_NOOP` if every
/// attempt echoes the input.
pub fn add_mistake(helper: &dyn ModelEndpoint, prompts: &PromptSet, expl: &str, seed: u64) -> Result<String> {
    rewrite(helper, &prompts.mistake(expl), expl, seed, false)
}

pub fn paraphrase(helper: &dyn ModelEndpoint, prompts: &PromptSet, expl: &str, seed: u64) -> Result<String> {
    rewrite(helper, &prompts.paraphrase(expl), expl, seed, false)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionKind {
    EarlyAnswering,
    EarlyAnsweringHeuristic,
    Filler,
    AddingMistakes,
    Paraphrasing,
}

impl CorruptionKind {
    pub fn needs_helper(self) -> bool {
        matches!(self, CorruptionKind::AddingMistakes | CorruptionKind::Paraphrasing)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CorruptionSpec {
    pub kind: CorruptionKind,
    #[serde(default)]
    pub filler_kind: FillerKind,
    #[serde(default)]
    pub repeating: bool,
    /// Accept a helper output equal to its input instead of failing.
    #[serde(default)]
    pub accept_noop: bool,
}

impl CorruptionSpec {
    pub fn new(kind: CorruptionKind) -> Self {
        CorruptionSpec {
            kind,
            filler_kind: FillerKind::Dots,
            repeating: false,
            accept_noop: false,
        }
    }

    pub fn filler(filler_kind: FillerKind, repeating: bool) -> Self {
        CorruptionSpec {
            filler_kind,
            repeating,
            ..CorruptionSpec::new(CorruptionKind::Filler)
        }
    }

    /// Applies the corruption. `helper` is required for mistake insertion and
    /// paraphrasing and ignored otherwise.
    pub fn apply(
        &self,
        expl: &str,
        helper: Option<&dyn ModelEndpoint>,
        prompts: &PromptSet,
        seed: u64,
    ) -> Result<String> {
        if expl.is_empty() {
            bail!(EmptyExplanation, "cannot corrupt an empty explanation");
        }
        let helper = match (self.kind.needs_helper(), helper) {
            (true, None) => bail!(Config, "{} corruption requires a helper endpoint", self),
            (_, h) => h,
        };
        Ok(match self.kind {
            CorruptionKind::EarlyAnswering => truncate_one_third(expl),
            CorruptionKind::EarlyAnsweringHeuristic => truncate_heuristic(expl),
            CorruptionKind::Filler => fill_tokens(expl, self.filler_kind, self.repeating),
            CorruptionKind::AddingMistakes => {
                rewrite(helper.expect("checked"), &prompts.mistake(expl), expl, seed, self.accept_noop)?
            }
            CorruptionKind::Paraphrasing => {
                rewrite(helper.expect("checked"), &prompts.paraphrase(expl), expl, seed, self.accept_noop)?
            }
        })
    }
}

impl fmt::Display for CorruptionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            CorruptionKind::EarlyAnswering => f.write_str("early_answering/one_third"),
            CorruptionKind::EarlyAnsweringHeuristic => f.write_str("early_answering/heuristic"),
            CorruptionKind::Filler => write!(
                f,
                "filler/{}/{}",
                self.filler_kind.as_str(),
                if self.repeating { "repeating" } else { "non-repeating" }
            ),
            CorruptionKind::AddingMistakes => f.write_str("adding_mistakes"),
            CorruptionKind::Paraphrasing => f.write_str("paraphrasing"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{MockConfig, MockModel};
    use crate::ErrorCode;
    use proptest::prelude::*;

    #[test]
    fn one_third_examples() {
        assert_eq!(truncate_one_third("abcdefghi"), "abc");
        assert_eq!(truncate_one_third("ab"), "");
        let t = truncate_one_third("Satchel Paige professionally plays the sport hurling, not baseball.");
        assert!(t.starts_with("Satchel Paige profess"));
        assert!(t.chars().count().abs_diff("Satchel Paige profess".len()) <= 1);
    }

    #[test]
    fn heuristic_examples() {
        assert_eq!(
            truncate_heuristic("A is here. B is there. C is near. D is far."),
            "A is here."
        );
        assert_eq!(
            truncate_heuristic("Berlin is the capital of France, while London is not."),
            "Berlin is the capital of France"
        );
        assert_eq!(truncate_heuristic("Paris is a city in France."), "Paris is a city");
        assert_eq!(
            truncate_heuristic("Satchel Paige professionally plays the sport hurling, not baseball."),
            "Satchel Paige professionally plays"
        );
        assert_eq!(truncate_heuristic("Hi"), "Hi");
    }

    #[test]
    fn filler_examples() {
        assert_eq!(fill_tokens("ab", FillerKind::Dots, true), "......");
        assert_eq!(fill_tokens("The capital of France is Paris.", FillerKind::Dots, false), "...");
        assert_eq!(fill_tokens("ab", FillerKind::Stars, true), "******");
        assert_eq!(fill_tokens("é", FillerKind::Pilcrow, true), "¶¶¶");
    }

    struct Echo;

    impl ModelEndpoint for Echo {
        fn descriptor(&self) -> String {
            "echo".into()
        }
        fn capabilities(&self) -> crate::model::Capabilities {
            crate::model::Capabilities::ALL
        }
        fn tokenize(&self, r: &crate::model::TokenizeRequest) -> Result<crate::model::TokenizeResponse> {
            Ok(crate::model::TokenizeResponse { tokens: vec![r.text.clone()], ids: vec![0] })
        }
        fn label_logits(&self, r: &crate::model::LabelLogitsRequest) -> Result<crate::model::LabelLogitsResponse> {
            Ok(crate::model::LabelLogitsResponse { logits: vec![0.0; r.labels.len()], fallback: true })
        }
        fn generate(&self, r: &crate::model::GenerateRequest) -> Result<crate::model::GenerateResponse> {
            let text = r.prompt.rsplit("Original: ").next().unwrap().trim_end_matches("\nRewritten:");
            Ok(crate::model::GenerateResponse { text: text.to_string() })
        }
        fn logprobs(&self, _: &crate::model::LogprobsRequest) -> Result<crate::model::LogprobsResponse> {
            unreachable!()
        }
    }

    #[test]
    fn helper_noop_is_an_error_unless_accepted() {
        let prompts = PromptSet::default();
        let err = paraphrase(&Echo, &prompts, "Some text.", 0).unwrap_err();
        assert_eq!(err.code(), ErrorCode::CorruptionNoop);
        let spec = CorruptionSpec {
            accept_noop: true,
            ..CorruptionSpec::new(CorruptionKind::Paraphrasing)
        };
        assert_eq!(spec.apply("Some text.", Some(&Echo), &prompts, 0).unwrap(), "Some text.");
    }

    #[test]
    fn mock_helper_is_deterministic_and_changes_text() {
        let helper = MockModel::new(MockConfig::default());
        let prompts = PromptSet::default();
        let e = "Yaoundé is a city in Cameroon as Tokyo is a city in Japan.";
        let a = add_mistake(&helper, &prompts, e, 0).unwrap();
        assert_eq!(a, "Yaoundé is a city in Cameroon as Tokyo is a city in desert.");
        assert_eq!(a, add_mistake(&helper, &prompts, e, 0).unwrap());
        let p = paraphrase(&helper, &prompts, e, 0).unwrap();
        assert_ne!(p, e);
        assert_eq!(p, paraphrase(&helper, &prompts, e, 0).unwrap());
    }

    #[test]
    fn missing_helper_is_config_error() {
        let spec = CorruptionSpec::new(CorruptionKind::AddingMistakes);
        let err = spec.apply("x y", None, &PromptSet::default(), 0).unwrap_err();
        assert_eq!(err.code(), ErrorCode::Config);
    }

    proptest! {
        #[test]
        fn filler_length_laws(s in "\\PC{1,60}", k in 0usize..5) {
            let kind = FillerKind::ALL[k];
            prop_assert_eq!(fill_tokens(&s, kind, true).chars().count(), 3 * s.chars().count());
            prop_assert_eq!(fill_tokens(&s, kind, false).chars().count(), 3);
        }

        #[test]
        fn truncations_are_prefixes(s in "[A-Za-z ,.;]{1,80}") {
            prop_assert!(s.starts_with(&truncate_one_third(&s)));
            let h = truncate_heuristic(&s);
            prop_assert!(s.starts_with(&h));
            if s.split_whitespace().next().is_some() {
                prop_assert!(!h.trim().is_empty());
            }
        }
    }
}
