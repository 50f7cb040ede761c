//! The five-parameter information flow space.
//!
//! A [`ParameterSpace`] holds the value lists for sender, recipient,
//! attribute, subject and transmission principle, a set of exclusion rules
//! and a sentence template. [`enumerate_flows`] expands it into the filtered
//! Cartesian product and [`partition_by_sender_attribute`] cuts the result
//! into the per-respondent assignment units.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Placeholder token that may appear inside parameter values.
pub const SUBJECT_TOKEN: &str = "{subject}";

/// Default template. Sentences are capitalised after substitution, so the
/// sender's article ("a fitness tracker") becomes the sentence opener.
pub const DEFAULT_SENTENCE_TEMPLATE: &str =
    "{sender} records {attribute} and sends this information to {recipient}{transmission_principle}.";

#[derive(Debug, Error)]
pub enum FlowspaceError {
    #[error("config schema violation: {0}")]
    Schema(#[from] serde_json::Error),
    #[error("`{0}` must contain at least one value")]
    EmptyList(Slot),
    #[error("duplicate value {value:?} in `{slot}`")]
    Duplicate { slot: Slot, value: String },
    #[error("exclusion #{index} binds no slots")]
    EmptyExclusion { index: usize },
    #[error("exclusion #{index} references unknown {slot} value {value:?}")]
    UnknownExclusionValue {
        index: usize,
        slot: Slot,
        value: String,
    },
    #[error("expected exactly one null transmission principle, found {0}")]
    NullPrinciple(usize),
    #[error("sentence template: {0}")]
    Template(String),
    #[error("value {value:?} is not a known {slot}")]
    UnknownValue { slot: Slot, value: String },
}

/// One of the five contextual-integrity parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    Sender,
    Recipient,
    Attribute,
    Subject,
    TransmissionPrinciple,
}

impl Slot {
    pub const ALL: [Slot; 5] = [
        Slot::Sender,
        Slot::Recipient,
        Slot::Attribute,
        Slot::Subject,
        Slot::TransmissionPrinciple,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Slot::Sender => "sender",
            Slot::Recipient => "recipient",
            Slot::Attribute => "attribute",
            Slot::Subject => "subject",
            Slot::TransmissionPrinciple => "transmission_principle",
        }
    }

    fn placeholder(self) -> String {
        format!("{{{}}}", self.as_str())
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Transmission principle entry as it appears in the config document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrincipleEntry {
    pub text: String,
    #[serde(default)]
    pub null: bool,
}

/// Conjunctive partial tuple; a flow is excluded when every bound slot matches.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExclusionRule {
    pub slots: BTreeMap<Slot, String>,
    #[serde(default)]
    pub reason: String,
}

impl ExclusionRule {
    pub fn matches(&self, tuple: &FlowTuple<'_>) -> bool {
        self.slots.iter().all(|(slot, value)| tuple.get(*slot) == value)
    }
}

/// On-disk shape of the parameter-space config.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    pub senders: Vec<String>,
    pub recipients: Vec<String>,
    pub attributes: Vec<String>,
    #[serde(default = "default_subjects")]
    pub subjects: Vec<String>,
    pub transmission_principles: Vec<PrincipleEntry>,
    #[serde(default)]
    pub exclusions: Vec<ExclusionRule>,
    #[serde(default = "default_template")]
    pub sentence_template: String,
}

fn default_subjects() -> Vec<String> {
    vec!["its owner".to_string()]
}

fn default_template() -> String {
    DEFAULT_SENTENCE_TEMPLATE.to_string()
}

/// Validated parameter space. Construct with [`load_parameter_space`] or
/// [`ParameterSpace::from_document`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParameterSpace {
    senders: Vec<String>,
    recipients: Vec<String>,
    attributes: Vec<String>,
    subjects: Vec<String>,
    principles: Vec<String>,
    null_principle: usize,
    exclusions: Vec<ExclusionRule>,
    template: String,
}

/// Collapse runs of whitespace and trim.
pub fn normalize_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn normalize_list(slot: Slot, values: &[String]) -> Result<Vec<String>, FlowspaceError> {
    if values.is_empty() {
        return Err(FlowspaceError::EmptyList(slot));
    }
    let mut out: Vec<String> = Vec::with_capacity(values.len());
    for v in values {
        let v = normalize_whitespace(v);
        if v.is_empty() {
            return Err(FlowspaceError::Template(format!("empty {slot} value")));
        }
        if out.contains(&v) {
            return Err(FlowspaceError::Duplicate { slot, value: v });
        }
        out.push(v);
    }
    Ok(out)
}

fn validate_template(template: &str) -> Result<(), FlowspaceError> {
    for slot in Slot::ALL {
        let count = template.matches(&slot.placeholder()).count();
        let ok = match slot {
            // The subject normally reaches the sentence through "{subject}"
            // tokens inside other values, so the template may omit it.
            Slot::Subject => count <= 1,
            _ => count == 1,
        };
        if !ok {
            return Err(FlowspaceError::Template(format!(
                "slot {{{slot}}} appears {count} times"
            )));
        }
    }
    let mut stripped = template.to_string();
    for slot in Slot::ALL {
        stripped = stripped.replace(&slot.placeholder(), "");
    }
    if stripped.contains('{') || stripped.contains('}') {
        return Err(FlowspaceError::Template(format!(
            "unknown placeholder in {template:?}"
        )));
    }
    Ok(())
}

/// Parse and validate a JSON config document.
pub fn load_parameter_space(config_document: &str) -> Result<ParameterSpace, FlowspaceError> {
    let doc: ConfigDocument = serde_json::from_str(config_document)?;
    ParameterSpace::from_document(doc)
}

impl ParameterSpace {
    pub fn from_document(doc: ConfigDocument) -> Result<Self, FlowspaceError> {
        let senders = normalize_list(Slot::Sender, &doc.senders)?;
        let recipients = normalize_list(Slot::Recipient, &doc.recipients)?;
        let attributes = normalize_list(Slot::Attribute, &doc.attributes)?;
        let subjects = normalize_list(Slot::Subject, &doc.subjects)?;
        let texts: Vec<String> = doc
            .transmission_principles
            .iter()
            .map(|p| p.text.clone())
            .collect();
        let principles = normalize_list(Slot::TransmissionPrinciple, &texts)?;
        let nulls: Vec<usize> = doc
            .transmission_principles
            .iter()
            .enumerate()
            .filter(|(_, p)| p.null)
            .map(|(i, _)| i)
            .collect();
        if nulls.len() != 1 {
            return Err(FlowspaceError::NullPrinciple(nulls.len()));
        }
        let template = normalize_whitespace(&doc.sentence_template);
        validate_template(&template)?;

        let mut space = ParameterSpace {
            senders,
            recipients,
            attributes,
            subjects,
            principles,
            null_principle: nulls[0],
            exclusions: Vec::with_capacity(doc.exclusions.len()),
            template,
        };
        for (index, rule) in doc.exclusions.into_iter().enumerate() {
            if rule.slots.is_empty() {
                return Err(FlowspaceError::EmptyExclusion { index });
            }
            let mut slots = BTreeMap::new();
            for (slot, value) in rule.slots {
                let value = normalize_whitespace(&value);
                if !space.values(slot).contains(&value) {
                    return Err(FlowspaceError::UnknownExclusionValue { index, slot, value });
                }
                slots.insert(slot, value);
            }
            space.exclusions.push(ExclusionRule {
                slots,
                reason: rule.reason,
            });
        }
        Ok(space)
    }

    /// Inverse of [`ParameterSpace::from_document`] (values are normalised).
    pub fn to_document(&self) -> ConfigDocument {
        ConfigDocument {
            senders: self.senders.clone(),
            recipients: self.recipients.clone(),
            attributes: self.attributes.clone(),
            subjects: self.subjects.clone(),
            transmission_principles: self
                .principles
                .iter()
                .enumerate()
                .map(|(i, text)| PrincipleEntry {
                    text: text.clone(),
                    null: i == self.null_principle,
                })
                .collect(),
            exclusions: self.exclusions.clone(),
            sentence_template: self.template.clone(),
        }
    }

    pub fn values(&self, slot: Slot) -> &[String] {
        match slot {
            Slot::Sender => &self.senders,
            Slot::Recipient => &self.recipients,
            Slot::Attribute => &self.attributes,
            Slot::Subject => &self.subjects,
            Slot::TransmissionPrinciple => &self.principles,
        }
    }

    pub fn senders(&self) -> &[String] {
        &self.senders
    }

    pub fn recipients(&self) -> &[String] {
        &self.recipients
    }

    pub fn attributes(&self) -> &[String] {
        &self.attributes
    }

    pub fn subjects(&self) -> &[String] {
        &self.subjects
    }

    pub fn transmission_principles(&self) -> &[String] {
        &self.principles
    }

    pub fn null_principle(&self) -> &str {
        &self.principles[self.null_principle]
    }

    pub fn is_null_principle(&self, tp: &str) -> bool {
        tp == self.null_principle()
    }

    /// Non-null principles in config order.
    pub fn conditional_principles(&self) -> impl Iterator<Item = &str> {
        self.principles
            .iter()
            .enumerate()
            .filter(move |(i, _)| *i != self.null_principle)
            .map(|(_, p)| p.as_str())
    }

    pub fn exclusions(&self) -> &[ExclusionRule] {
        &self.exclusions
    }

    pub fn sentence_template(&self) -> &str {
        &self.template
    }

    /// Position of `value` in the config list for `slot`.
    pub fn index_of(&self, slot: Slot, value: &str) -> Option<usize> {
        self.values(slot).iter().position(|v| v == value)
    }

    /// Resolve a value given either raw (`{subject}'s doctor`) or rendered
    /// with one of the configured subjects (`its owner's doctor`).
    pub fn resolve(&self, slot: Slot, value: &str) -> Option<&str> {
        let value = normalize_whitespace(value);
        self.values(slot)
            .iter()
            .find(|v| {
                **v == value
                    || self
                        .subjects
                        .iter()
                        .any(|s| substitute_subject(v, s) == value)
            })
            .map(String::as_str)
    }

    /// Display form: `{subject}` replaced when the space has a single subject.
    pub fn display(&self, value: &str) -> String {
        match self.subjects.as_slice() {
            [only] => substitute_subject(value, only),
            _ => value.to_string(),
        }
    }

    pub fn is_excluded(&self, tuple: &FlowTuple<'_>) -> bool {
        self.exclusions.iter().any(|r| r.matches(tuple))
    }

    pub fn tuple_count(&self) -> usize {
        Slot::ALL.iter().map(|s| self.values(*s).len()).product()
    }
}

/// Borrowed five-value tuple.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlowTuple<'a> {
    pub sender: &'a str,
    pub recipient: &'a str,
    pub attribute: &'a str,
    pub subject: &'a str,
    pub transmission_principle: &'a str,
}

impl<'a> FlowTuple<'a> {
    pub fn get(&self, slot: Slot) -> &'a str {
        match slot {
            Slot::Sender => self.sender,
            Slot::Recipient => self.recipient,
            Slot::Attribute => self.attribute,
            Slot::Subject => self.subject,
            Slot::TransmissionPrinciple => self.transmission_principle,
        }
    }
}

/// Stable identifier for a flow: truncated SHA-256 over the five
/// whitespace-normalised values, unit-separator delimited.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FlowId(pub String);

impl FlowId {
    pub fn of(tuple: &FlowTuple<'_>) -> Self {
        let mut hasher = Sha256::new();
        for (i, slot) in Slot::ALL.iter().enumerate() {
            if i > 0 {
                hasher.update([0x1f]);
            }
            hasher.update(normalize_whitespace(tuple.get(*slot)).as_bytes());
        }
        let digest = hasher.finalize();
        FlowId(
            digest[..8]
                .iter()
                .map(|b| format!("{b:02x}"))
                .collect::<String>(),
        )
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for FlowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InformationFlow {
    pub flow_id: FlowId,
    pub sender: String,
    pub recipient: String,
    pub attribute: String,
    pub subject: String,
    pub transmission_principle: String,
    pub sentence: String,
}

impl InformationFlow {
    pub fn tuple(&self) -> FlowTuple<'_> {
        FlowTuple {
            sender: &self.sender,
            recipient: &self.recipient,
            attribute: &self.attribute,
            subject: &self.subject,
            transmission_principle: &self.transmission_principle,
        }
    }

    pub fn value(&self, slot: Slot) -> &str {
        self.tuple().get(slot)
    }
}

pub fn substitute_subject(text: &str, subject: &str) -> String {
    text.replace(SUBJECT_TOKEN, subject)
}

fn capitalize_first(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Instantiate the sentence template for one tuple.
///
/// The null principle renders as an empty clause; any other principle is
/// appended after a single space.
pub fn render_sentence(
    space: &ParameterSpace,
    sender: &str,
    recipient: &str,
    attribute: &str,
    subject: &str,
    tp: &str,
) -> Result<String, FlowspaceError> {
    for (slot, value) in [
        (Slot::Sender, sender),
        (Slot::Recipient, recipient),
        (Slot::Attribute, attribute),
        (Slot::Subject, subject),
        (Slot::TransmissionPrinciple, tp),
    ] {
        if space.index_of(slot, value).is_none() {
            return Err(FlowspaceError::UnknownValue {
                slot,
                value: value.to_string(),
            });
        }
    }
    validate_template(&space.template)?;
    let clause = if space.is_null_principle(tp) {
        String::new()
    } else {
        format!(" {tp}")
    };
    // Fill the four value slots first so their embedded {subject} tokens are
    // expanded by the final subject pass.
    let filled = space
        .template
        .replace("{sender}", sender)
        .replace("{recipient}", recipient)
        .replace("{attribute}", attribute)
        .replace("{transmission_principle}", &clause);
    let sentence = substitute_subject(&filled, subject);
    if sentence.contains('{') || sentence.contains('}') {
        return Err(FlowspaceError::Template(format!(
            "unexpanded placeholder in {sentence:?}"
        )));
    }
    Ok(capitalize_first(&sentence))
}

/// Filtered Cartesian product, lexicographic in config order
/// (sender, attribute, subject, recipient, transmission principle).
///
/// The nesting order keeps each sender/attribute set contiguous.
pub fn enumerate_flows(space: &ParameterSpace) -> Vec<InformationFlow> {
    let mut flows = Vec::new();
    for sender in &space.senders {
        for attribute in &space.attributes {
            for subject in &space.subjects {
                for recipient in &space.recipients {
                    for tp in &space.principles {
                        let tuple = FlowTuple {
                            sender,
                            recipient,
                            attribute,
                            subject,
                            transmission_principle: tp,
                        };
                        if space.is_excluded(&tuple) {
                            continue;
                        }
                        let sentence =
                            render_sentence(space, sender, recipient, attribute, subject, tp)
                                .expect("validated space renders every tuple");
                        flows.push(InformationFlow {
                            flow_id: FlowId::of(&tuple),
                            sender: sender.clone(),
                            recipient: recipient.clone(),
                            attribute: attribute.clone(),
                            subject: subject.clone(),
                            transmission_principle: tp.clone(),
                            sentence,
                        });
                    }
                }
            }
        }
    }
    flows
}

/// All flows sharing one sender, attribute and subject: the unit handed to a
/// single respondent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowSet {
    pub set_id: String,
    pub sender: String,
    pub attribute: String,
    pub subject: String,
    pub flows: Vec<InformationFlow>,
}

impl FlowSet {
    /// Recipients present in the set, in first-appearance order.
    pub fn recipients(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for f in &self.flows {
            if !out.contains(&f.recipient.as_str()) {
                out.push(&f.recipient);
            }
        }
        out
    }
}

/// Format for set identifiers, 1-based.
pub fn set_id_for(index: usize) -> String {
    format!("set-{:02}", index + 1)
}

/// Group flows by (sender, attribute, subject). Sets are numbered in order of
/// first appearance, which for [`enumerate_flows`] output is config order.
pub fn partition_by_sender_attribute(flows: &[InformationFlow]) -> Vec<FlowSet> {
    let mut sets: Vec<FlowSet> = Vec::new();
    let mut index: BTreeMap<(&str, &str, &str), usize> = BTreeMap::new();
    for flow in flows {
        let key = (
            flow.sender.as_str(),
            flow.attribute.as_str(),
            flow.subject.as_str(),
        );
        let slot = *index.entry(key).or_insert_with(|| {
            sets.push(FlowSet {
                set_id: set_id_for(sets.len()),
                sender: flow.sender.clone(),
                attribute: flow.attribute.clone(),
                subject: flow.subject.clone(),
                flows: Vec::new(),
            });
            sets.len() - 1
        });
        sets[slot].flows.push(flow.clone());
    }
    sets
}

/// The Table-1 smart-home space with the reconstructed exclusion list.
pub const SMART_HOME_CONFIG: &str = include_str!("../data/smart_home.json");

pub fn smart_home_space() -> ParameterSpace {
    load_parameter_space(SMART_HOME_CONFIG).expect("shipped config is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(exclusions: &str) -> String {
        format!(
            r#"{{
            "senders": ["s1", "s2"],
            "recipients": ["r1", "r2"],
            "attributes": ["a1", "a2"],
            "subjects": ["its owner"],
            "transmission_principles": [{{"text": "if t1", "null": false}}, {{"text": "null", "null": true}}],
            "exclusions": [{exclusions}],
            "sentence_template": "{{sender}} records {{attribute}} and sends this information to {{recipient}}{{transmission_principle}}."
        }}"#
        )
    }

    #[test]
    fn shipped_config_matches_table_sizes() {
        let space = smart_home_space();
        assert_eq!(space.senders().len(), 8);
        assert_eq!(space.recipients().len(), 8);
        assert_eq!(space.attributes().len(), 9);
        assert_eq!(space.subjects(), ["its owner"]);
        assert_eq!(space.transmission_principles().len(), 13);
        assert_eq!(space.conditional_principles().count(), 12);
    }

    #[test]
    fn shipped_config_yields_3840_flows_in_48_sets() {
        let space = smart_home_space();
        let flows = enumerate_flows(&space);
        assert_eq!(flows.len(), 3840);
        let sets = partition_by_sender_attribute(&flows);
        assert_eq!(sets.len(), 48);
        assert!(sets.iter().all(|s| s.flows.len() == 80));
    }

    #[test]
    fn minimal_config_is_valid() {
        let doc = r#"{"senders":["a thing"],"recipients":["someone"],"attributes":["data"],
            "subjects":["its owner"],"transmission_principles":[{"text":"null","null":true}],
            "exclusions":[],"sentence_template":"{sender} records {attribute} and sends this information to {recipient}{transmission_principle}."}"#;
        let space = load_parameter_space(doc).unwrap();
        let flows = enumerate_flows(&space);
        assert_eq!(flows.len(), 1);
        assert_eq!(
            flows[0].sentence,
            "A thing records data and sends this information to someone."
        );
    }

    #[test]
    fn unknown_exclusion_value_is_rejected() {
        let doc = tiny(r#"{"slots": {"sender": "a toaster"}, "reason": "x"}"#);
        match load_parameter_space(&doc) {
            Err(FlowspaceError::UnknownExclusionValue { slot, value, .. }) => {
                assert_eq!(slot, Slot::Sender);
                assert_eq!(value, "a toaster");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_exclusion_is_rejected() {
        let doc = tiny(r#"{"slots": {}, "reason": "x"}"#);
        assert!(matches!(
            load_parameter_space(&doc),
            Err(FlowspaceError::EmptyExclusion { index: 0 })
        ));
    }

    #[test]
    fn duplicate_values_are_rejected() {
        let doc = tiny("").replace(r#"["s1", "s2"]"#, r#"["s1", " s1 "]"#);
        assert!(matches!(
            load_parameter_space(&doc),
            Err(FlowspaceError::Duplicate { slot: Slot::Sender, .. })
        ));
    }

    #[test]
    fn null_principle_count_is_checked() {
        let none = tiny("").replace(r#""null", "null": true"#, r#""null", "null": false"#);
        assert!(matches!(
            load_parameter_space(&none),
            Err(FlowspaceError::NullPrinciple(0))
        ));
        let two = tiny("").replace(r#""if t1", "null": false"#, r#""if t1", "null": true"#);
        assert!(matches!(
            load_parameter_space(&two),
            Err(FlowspaceError::NullPrinciple(2))
        ));
    }

    #[test]
    fn schema_violation_names_the_field() {
        let doc = tiny("").replace("\"senders\"", "\"sendrs\"");
        let err = load_parameter_space(&doc).unwrap_err();
        assert!(err.to_string().contains("sendrs"), "{err}");
    }

    #[test]
    fn template_must_reference_each_slot_once() {
        let doc = tiny("").replace("{{recipient}}", "");
        let doc = doc.replace("{recipient}", "");
        assert!(matches!(
            load_parameter_space(&doc),
            Err(FlowspaceError::Template(_))
        ));
        let doc = tiny("").replace("{sender} records", "{sender} {sender} records");
        assert!(matches!(
            load_parameter_space(&doc),
            Err(FlowspaceError::Template(_))
        ));
    }

    #[test]
    fn derived_count_with_three_exclusions() {
        // 16 tuples; the three rules each remove one distinct tuple.
        let doc = tiny(
            r#"{"slots": {"sender": "s1", "recipient": "r1", "attribute": "a1", "transmission_principle": "null"}, "reason": ""},
               {"slots": {"sender": "s2", "recipient": "r2", "attribute": "a1", "transmission_principle": "if t1"}, "reason": ""},
               {"slots": {"sender": "s2", "recipient": "r1", "attribute": "a2", "subject": "its owner", "transmission_principle": "null"}, "reason": ""}"#,
        );
        let space = load_parameter_space(&doc).unwrap();
        assert_eq!(space.tuple_count(), 16);
        assert_eq!(enumerate_flows(&space).len(), 13);
    }

    #[test]
    fn consent_sentence_renders() {
        let space = smart_home_space();
        let s = render_sentence(
            &space,
            "a fitness tracker",
            "{subject}'s doctor",
            "{subject}'s exercise routine",
            "its owner",
            "if {subject} has given consent",
        )
        .unwrap();
        assert_eq!(
            s,
            "A fitness tracker records its owner's exercise routine and sends this information to its owner's doctor if its owner has given consent."
        );
        let null = render_sentence(
            &space,
            "a fitness tracker",
            "{subject}'s doctor",
            "{subject}'s exercise routine",
            "its owner",
            "null",
        )
        .unwrap();
        assert_eq!(
            null,
            "A fitness tracker records its owner's exercise routine and sends this information to its owner's doctor."
        );
    }

    #[test]
    fn subject_placeholder_is_substituted() {
        let space = smart_home_space();
        let s = render_sentence(
            &space,
            "a door lock",
            "its manufacturer",
            "{subject}'s location",
            "its owner",
            "null",
        )
        .unwrap();
        assert!(s.contains("its owner's location"));
    }

    #[test]
    fn render_rejects_values_outside_the_space() {
        let space = smart_home_space();
        let err = render_sentence(&space, "a toaster", "its manufacturer", "{subject}'s location", "its owner", "null");
        assert!(matches!(err, Err(FlowspaceError::UnknownValue { slot: Slot::Sender, .. })));
    }

    #[test]
    fn partition_edge_cases() {
        let space = smart_home_space();
        let flows = enumerate_flows(&space);
        let single = partition_by_sender_attribute(&flows[..1]);
        assert_eq!(single.len(), 1);
        assert_eq!(single[0].flows.len(), 1);

        let pair: Vec<_> = flows
            .iter()
            .filter(|f| f.sender == flows[0].sender && f.attribute == flows[0].attribute && space.is_null_principle(&f.transmission_principle))
            .take(2)
            .cloned()
            .collect();
        assert_ne!(pair[0].recipient, pair[1].recipient);
        let sets = partition_by_sender_attribute(&pair);
        assert_eq!(sets.len(), 1);
        assert_eq!(sets[0].flows.len(), 2);
    }

    #[test]
    fn flow_ids_are_stable_and_whitespace_insensitive() {
        let t = FlowTuple {
            sender: "a  door lock",
            recipient: "its manufacturer",
            attribute: "x",
            subject: "its owner",
            transmission_principle: "null",
        };
        let u = FlowTuple {
            sender: "a door lock ",
            ..t
        };
        assert_eq!(FlowId::of(&t), FlowId::of(&u));
        // Frozen value: ids must not drift between releases.
        assert_eq!(FlowId::of(&u).as_str().len(), 16);
        let v = FlowTuple {
            recipient: "its manufacturerx",
            ..t
        };
        assert_ne!(FlowId::of(&t), FlowId::of(&v));
    }

    #[test]
    fn document_round_trip() {
        let space = smart_home_space();
        let again = ParameterSpace::from_document(space.to_document()).unwrap();
        assert_eq!(space, again);
    }

    #[test]
    fn resolve_accepts_rendered_values() {
        let space = smart_home_space();
        assert_eq!(
            space.resolve(Slot::Recipient, "its owner's immediate family"),
            Some("{subject}'s immediate family")
        );
        assert_eq!(space.resolve(Slot::Recipient, "nobody"), None);
    }
}
