//! The 28 evaluation contexts: seven countries crossed with four topics in
//! a frozen topic-major order, so matrix rows mean the same thing in every
//! run and fixture.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const COUNTRY_COUNT: usize = 7;
pub const TOPIC_COUNT: usize = 4;
pub const CONTEXT_COUNT: usize = COUNTRY_COUNT * TOPIC_COUNT;

const DEFAULT_VIGNETTES_JSON: &str = include_str!("../data/vignettes.json");

#[derive(Debug, Error)]
pub enum ContextError {
    #[error("unknown scope `{0}`: expected one of the seven countries or four topics")]
    UnknownScope(String),
    #[error("failed to read vignette file: {0}")]
    VignetteIo(#[from] std::io::Error),
    #[error("vignette file is not valid JSON: {0}")]
    VignetteJson(#[from] serde_json::Error),
    #[error("vignette file is missing topic `{0}`")]
    MissingVignette(&'static str),
    #[error("vignette file names unknown topic `{0}`")]
    UnknownVignetteTopic(String),
    #[error("vignette for topic `{0}` is empty")]
    EmptyVignette(&'static str),
}

/// The seven survey countries, in their canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Country {
    UnitedStates,
    UnitedKingdom,
    India,
    Germany,
    France,
    Canada,
    Australia,
}

impl Country {
    pub const ALL: [Country; COUNTRY_COUNT] = [
        Country::UnitedStates,
        Country::UnitedKingdom,
        Country::India,
        Country::Germany,
        Country::France,
        Country::Canada,
        Country::Australia,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Country::UnitedStates => "United States",
            Country::UnitedKingdom => "United Kingdom",
            Country::India => "India",
            Country::Germany => "Germany",
            Country::France => "France",
            Country::Canada => "Canada",
            Country::Australia => "Australia",
        }
    }

    /// 1-based position in the canonical order.
    pub fn rank(self) -> u8 {
        Country::ALL.iter().position(|c| *c == self).unwrap() as u8 + 1
    }

    pub fn from_name(name: &str) -> Option<Country> {
        let needle = name.trim().to_lowercase();
        Country::ALL
            .into_iter()
            .find(|c| c.name().to_lowercase() == needle)
    }
}

impl std::fmt::Display for Country {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PopulationAxis {
    Individual,
    Social,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StakesAxis {
    Low,
    High,
}

/// The four scenario topics, each a quadrant of the
/// (population, stakes) plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Topic {
    EducationalSupervision,
    CollaborativeWriting,
    FinanceSupportForPublicSectors,
    Healthcare,
}

impl Topic {
    pub const ALL: [Topic; TOPIC_COUNT] = [
        Topic::EducationalSupervision,
        Topic::CollaborativeWriting,
        Topic::FinanceSupportForPublicSectors,
        Topic::Healthcare,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Topic::EducationalSupervision => "Educational Supervision",
            Topic::CollaborativeWriting => "Collaborative Writing",
            Topic::FinanceSupportForPublicSectors => "Finance Support for Public Sectors",
            Topic::Healthcare => "Healthcare",
        }
    }

    pub fn population_axis(self) -> PopulationAxis {
        match self {
            Topic::EducationalSupervision | Topic::FinanceSupportForPublicSectors => {
                PopulationAxis::Social
            }
            Topic::CollaborativeWriting | Topic::Healthcare => PopulationAxis::Individual,
        }
    }

    pub fn stakes_axis(self) -> StakesAxis {
        match self {
            Topic::EducationalSupervision | Topic::CollaborativeWriting => StakesAxis::Low,
            Topic::FinanceSupportForPublicSectors | Topic::Healthcare => StakesAxis::High,
        }
    }

    /// 1-based position in the canonical order.
    pub fn rank(self) -> u8 {
        Topic::ALL.iter().position(|t| *t == self).unwrap() as u8 + 1
    }

    pub fn from_name(name: &str) -> Option<Topic> {
        let needle = name.trim().to_lowercase();
        Topic::ALL
            .into_iter()
            .find(|t| t.name().to_lowercase() == needle)
    }
}

impl std::fmt::Display for Topic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One evaluation context. `index` runs 1..=28 and is the deterministic
/// function 7 * (topic_rank - 1) + country_rank of the two canonical
/// orders, i.e. topic-major, country-minor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Context {
    pub index: u8,
    pub country: Country,
    pub topic: Topic,
}

impl Context {
    pub fn of(country: Country, topic: Topic) -> Context {
        Context {
            index: (COUNTRY_COUNT as u8) * (topic.rank() - 1) + country.rank(),
            country,
            topic,
        }
    }

    /// 0-based matrix row for this context.
    pub fn row(self) -> usize {
        usize::from(self.index) - 1
    }

    pub fn label(self) -> String {
        format!("{} / {}", self.country.name(), self.topic.name())
    }
}

/// All 28 contexts in index order.
pub fn enumerate_contexts() -> Vec<Context> {
    let mut contexts = Vec::with_capacity(CONTEXT_COUNT);
    for topic in Topic::ALL {
        for country in Country::ALL {
            contexts.push(Context::of(country, topic));
        }
    }
    contexts
}

/// A grouping selector: one country (4 contexts) or one topic (7 contexts).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scope {
    Country(Country),
    Topic(Topic),
}

impl Scope {
    pub fn parse(selector: &str) -> Result<Scope, ContextError> {
        if let Some(country) = Country::from_name(selector) {
            return Ok(Scope::Country(country));
        }
        if let Some(topic) = Topic::from_name(selector) {
            return Ok(Scope::Topic(topic));
        }
        Err(ContextError::UnknownScope(selector.to_string()))
    }

    pub fn label(self) -> &'static str {
        match self {
            Scope::Country(c) => c.name(),
            Scope::Topic(t) => t.name(),
        }
    }
}

/// A grouping axis: all country scopes or all topic scopes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Grouping {
    Country,
    Topic,
}

impl Grouping {
    pub fn parse(name: &str) -> Result<Grouping, ContextError> {
        match name.trim().to_lowercase().as_str() {
            "country" => Ok(Grouping::Country),
            "topic" => Ok(Grouping::Topic),
            other => Err(ContextError::UnknownScope(other.to_string())),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Grouping::Country => "country",
            Grouping::Topic => "topic",
        }
    }

    /// The scopes along this axis, in canonical order.
    pub fn scopes(self) -> Vec<Scope> {
        match self {
            Grouping::Country => Country::ALL.into_iter().map(Scope::Country).collect(),
            Grouping::Topic => Topic::ALL.into_iter().map(Scope::Topic).collect(),
        }
    }
}

/// The contexts belonging to a scope, in index order.
pub fn group_contexts(scope: Scope) -> Vec<Context> {
    enumerate_contexts()
        .into_iter()
        .filter(|ctx| match scope {
            Scope::Country(c) => ctx.country == c,
            Scope::Topic(t) => ctx.topic == t,
        })
        .collect()
}

/// Vignette texts keyed by topic, loaded from a JSON file mapping topic
/// name -> text. Every topic must be present.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VignetteSet {
    texts: BTreeMap<Topic, String>,
}

impl VignetteSet {
    pub fn from_json_str(json: &str) -> Result<VignetteSet, ContextError> {
        let raw: BTreeMap<String, String> = serde_json::from_str(json)?;
        let mut texts = BTreeMap::new();
        for (key, text) in raw {
            let topic = Topic::from_name(&key)
                .ok_or_else(|| ContextError::UnknownVignetteTopic(key.clone()))?;
            texts.insert(topic, text);
        }
        for topic in Topic::ALL {
            match texts.get(&topic) {
                None => return Err(ContextError::MissingVignette(topic.name())),
                Some(text) if text.trim().is_empty() => {
                    return Err(ContextError::EmptyVignette(topic.name()))
                }
                Some(_) => {}
            }
        }
        Ok(VignetteSet { texts })
    }

    pub fn load(path: &Path) -> Result<VignetteSet, ContextError> {
        let json = std::fs::read_to_string(path)?;
        VignetteSet::from_json_str(&json)
    }

    /// The vignettes bundled with the crate.
    pub fn bundled() -> &'static VignetteSet {
        static BUNDLED: OnceLock<VignetteSet> = OnceLock::new();
        BUNDLED.get_or_init(|| {
            VignetteSet::from_json_str(DEFAULT_VIGNETTES_JSON)
                .expect("bundled vignettes are valid")
        })
    }

    pub fn get(&self, topic: Topic) -> &str {
        &self.texts[&topic]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn enumeration_is_a_bijection_onto_1_to_28() {
        let contexts = enumerate_contexts();
        assert_eq!(contexts.len(), CONTEXT_COUNT);
        let indices: BTreeSet<u8> = contexts.iter().map(|c| c.index).collect();
        assert_eq!(indices.len(), CONTEXT_COUNT);
        assert_eq!(*indices.first().unwrap(), 1);
        assert_eq!(*indices.last().unwrap(), 28);
        for ctx in &contexts {
            assert_eq!(Context::of(ctx.country, ctx.topic), *ctx);
        }
    }

    #[test]
    fn first_and_last_contexts_follow_canonical_orders() {
        let contexts = enumerate_contexts();
        let first = contexts.first().unwrap();
        assert_eq!(first.index, 1);
        assert_eq!(first.country, Country::UnitedStates);
        assert_eq!(first.topic, Topic::EducationalSupervision);
        let last = contexts.last().unwrap();
        assert_eq!(last.index, 28);
        assert_eq!(last.country, Country::Australia);
        assert_eq!(last.topic, Topic::Healthcare);
    }

    #[test]
    fn index_formula_collaborative_writing_india() {
        let ctx = Context::of(Country::India, Topic::CollaborativeWriting);
        assert_eq!(ctx.index, 10); // 7 * 1 + 3
    }

    #[test]
    fn topic_axes_match_the_quadrants() {
        use PopulationAxis::*;
        use StakesAxis::*;
        let expect = [
            (Topic::EducationalSupervision, Social, Low),
            (Topic::CollaborativeWriting, Individual, Low),
            (Topic::FinanceSupportForPublicSectors, Social, High),
            (Topic::Healthcare, Individual, High),
        ];
        for (topic, population, stakes) in expect {
            assert_eq!(topic.population_axis(), population);
            assert_eq!(topic.stakes_axis(), stakes);
        }
    }

    #[test]
    fn grouping_sizes_and_unions() {
        let germany = group_contexts(Scope::parse("Germany").unwrap());
        assert_eq!(germany.len(), 4);
        let topics: BTreeSet<Topic> = germany.iter().map(|c| c.topic).collect();
        assert_eq!(topics.len(), 4);

        let healthcare = group_contexts(Scope::parse("Healthcare").unwrap());
        assert_eq!(healthcare.len(), 7);
        let countries: BTreeSet<Country> = healthcare.iter().map(|c| c.country).collect();
        assert_eq!(countries.len(), 7);

        let mut by_country: BTreeSet<u8> = BTreeSet::new();
        for c in Country::ALL {
            by_country.extend(group_contexts(Scope::Country(c)).iter().map(|x| x.index));
        }
        let mut by_topic: BTreeSet<u8> = BTreeSet::new();
        for t in Topic::ALL {
            by_topic.extend(group_contexts(Scope::Topic(t)).iter().map(|x| x.index));
        }
        assert_eq!(by_country.len(), CONTEXT_COUNT);
        assert_eq!(by_country, by_topic);
    }

    #[test]
    fn unknown_scope_is_an_error() {
        assert!(matches!(
            Scope::parse("Mars"),
            Err(ContextError::UnknownScope(_))
        ));
    }

    #[test]
    fn bundled_vignettes_cover_every_topic() {
        let vignettes = VignetteSet::bundled();
        for topic in Topic::ALL {
            let text = vignettes.get(topic);
            let words = text.split_whitespace().count();
            assert!(
                (60..=120).contains(&words),
                "{} vignette has {} words",
                topic.name(),
                words
            );
        }
    }

    #[test]
    fn vignette_file_missing_topic_fails() {
        let json = r#"{"Healthcare": "text"}"#;
        assert!(matches!(
            VignetteSet::from_json_str(json),
            Err(ContextError::MissingVignette(_))
        ));
    }

    #[test]
    fn vignette_file_unknown_topic_fails() {
        let json = r#"{"Healthcare": "a", "Collaborative Writing": "b",
                       "Educational Supervision": "c",
                       "Finance Support for Public Sectors": "d",
                       "Cooking": "e"}"#;
        assert!(matches!(
            VignetteSet::from_json_str(json),
            Err(ContextError::UnknownVignetteTopic(_))
        ));
    }
}
