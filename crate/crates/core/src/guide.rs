//! Scapolite rule documents and guide assembly.
//!
//! A rule document is a YAML front-matter block between `---` lines followed
//! by Markdown. Each `## /path` header in the Markdown addresses a field of
//! the rule object by slash-path; numeric segments index lists, so
//! `## /implementations/0/description` fills the first implementation's
//! description. Front matter may hold the placeholder `<see below>` for a
//! field that a section fills in; the placeholder is never emitted back.
//!
//! A guide is a directory of rule documents plus one `profiles.yml`. Rule
//! order is the lexicographic order of the file names carrying the rules.

use crate::automation::{Automation, MainSetting, OptionValue};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_yaml::Value;
use std::path::Path;

pub const PLACEHOLDER: &str = "<see below>";
pub const PROFILES_FILE: &str = "profiles.yml";

#[derive(Debug, thiserror::Error)]
pub enum GuideError {
    #[error("malformed front matter: {0}")]
    MalformedFrontMatter(String),
    #[error("section header addresses no field: `{0}`")]
    UnresolvablePath(String),
    #[error("duplicate section path: `{0}`")]
    DuplicatePath(String),
    #[error("invalid rule: {0}")]
    InvalidRule(String),
    #[error("duplicate rule id `{id}` (in `{file}`)")]
    DuplicateRuleId { id: String, file: String },
    #[error("profile `{profile}` references unknown rule `{rule}`")]
    ProfileReferencesUnknownRule { profile: String, rule: String },
    #[error("profile `{profile}` lists rule `{rule}` twice")]
    DuplicateProfileRule { profile: String, rule: String },
    #[error("unknown profile `{0}`")]
    UnknownProfile(String),
    #[error("malformed profiles file: {0}")]
    MalformedProfiles(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}: {source}")]
    InFile {
        file: String,
        #[source]
        source: Box<GuideError>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScapoliteClass {
    Rule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HistoryAction {
    Created,
    Modified,
    Deleted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub version: String,
    pub action: HistoryAction,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Implementation {
    pub relative_id: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub automations: Vec<Automation>,
}

/// One configuration requirement of a guide.
#[derive(Debug, Clone, PartialEq)]
pub struct ScapoliteRule {
    pub scapolite_class: ScapoliteClass,
    pub scapolite_version: String,
    pub id: String,
    pub id_namespace: String,
    pub title: String,
    pub rule_text: String,
    pub implementations: Vec<Implementation>,
    pub history: Vec<HistoryEntry>,
    /// Unknown front-matter keys, preserved verbatim through round-trips.
    pub extra: IndexMap<String, Value>,
}

impl ScapoliteRule {
    /// All automations of the rule, across implementations, in order.
    pub fn automations(&self) -> impl Iterator<Item = &Automation> {
        self.implementations
            .iter()
            .flat_map(|i| i.automations.iter())
    }
}

/// Checks the structural invariants a rule must satisfy to serialize.
pub fn validate_rule(rule: &ScapoliteRule) -> Result<(), GuideError> {
    if rule.id.is_empty() {
        return Err(GuideError::InvalidRule("id must be non-empty".into()));
    }
    let mut seen = std::collections::BTreeSet::new();
    for implementation in &rule.implementations {
        if implementation.relative_id.is_empty() {
            return Err(GuideError::InvalidRule(format!(
                "rule `{}`: implementation relative_id must be non-empty",
                rule.id
            )));
        }
        if !seen.insert(&implementation.relative_id) {
            return Err(GuideError::InvalidRule(format!(
                "rule `{}`: duplicate implementation relative_id `{}`",
                rule.id, implementation.relative_id
            )));
        }
    }
    for entry in &rule.history {
        if entry.version.is_empty() {
            return Err(GuideError::InvalidRule(format!(
                "rule `{}`: history entries need a version",
                rule.id
            )));
        }
    }
    for automation in rule.automations() {
        validate_automation(automation, &rule.id, false)?;
    }
    for (name, body) in markdown_fields(rule) {
        if body.lines().any(|l| l.starts_with("## /")) {
            return Err(GuideError::InvalidRule(format!(
                "rule `{}`: field {name} contains a `## /` section header line",
                rule.id
            )));
        }
        if body != body.trim_matches('\n') {
            return Err(GuideError::InvalidRule(format!(
                "rule `{}`: field {name} has leading or trailing newlines",
                rule.id
            )));
        }
    }
    Ok(())
}

fn validate_automation(a: &Automation, rule_id: &str, nested: bool) -> Result<(), GuideError> {
    match a {
        Automation::Compound(c) => {
            if nested {
                return Err(GuideError::InvalidRule(format!(
                    "rule `{rule_id}`: compound automations must not nest"
                )));
            }
            if c.automations.is_empty() {
                return Err(GuideError::InvalidRule(format!(
                    "rule `{rule_id}`: compound automation has no children"
                )));
            }
            for child in &c.automations {
                validate_automation(child, rule_id, true)?;
            }
        }
        Automation::WinGpo(gpo) => {
            for constraint in gpo.constraints.values() {
                constraint
                    .validate()
                    .map_err(|e| GuideError::InvalidRule(format!("rule `{rule_id}`: {e}")))?;
            }
        }
        Automation::Registry(reg) => {
            if let Some(constraint) = &reg.constraints {
                constraint
                    .validate()
                    .map_err(|e| GuideError::InvalidRule(format!("rule `{rule_id}`: {e}")))?;
            }
        }
        Automation::Script(s) => {
            if s.expected.each_item.key.is_empty() || s.expected.each_item.equal_to.is_empty() {
                return Err(GuideError::InvalidRule(format!(
                    "rule `{rule_id}`: script expectation needs key and equal_to"
                )));
            }
        }
    }
    Ok(())
}

fn markdown_fields(rule: &ScapoliteRule) -> Vec<(String, &str)> {
    let mut fields = vec![("/rule".to_string(), rule.rule_text.as_str())];
    for (i, implementation) in rule.implementations.iter().enumerate() {
        fields.push((
            format!("/implementations/{i}/description"),
            implementation.description.as_str(),
        ));
    }
    fields
}

fn split_front_matter(text: &str) -> Result<(&str, &str), GuideError> {
    let rest = text
        .strip_prefix("---\n")
        .or_else(|| text.strip_prefix("---\r\n"))
        .ok_or_else(|| {
            GuideError::MalformedFrontMatter("document must start with a `---` line".into())
        })?;
    let mut search = 0;
    while let Some(pos) = rest[search..].find("\n---") {
        let at = search + pos;
        let after = &rest[at + 4..];
        if after.is_empty() || after.starts_with('\n') || after.starts_with("\r\n") {
            let yaml = &rest[..at + 1];
            let body = after.strip_prefix('\n').unwrap_or(after);
            if body.contains("\n---\n") || body.starts_with("---\n") {
                return Err(GuideError::MalformedFrontMatter(
                    "document contains more than one front-matter block".into(),
                ));
            }
            return Ok((yaml, body));
        }
        search = at + 1;
    }
    Err(GuideError::MalformedFrontMatter(
        "missing closing `---` line".into(),
    ))
}

fn as_string(value: &Value, key: &str) -> Result<String, GuideError> {
    match value {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        other => Err(GuideError::MalformedFrontMatter(format!(
            "key `{key}` must be a scalar, found {other:?}"
        ))),
    }
}

fn strip_placeholder(text: String) -> String {
    if text == PLACEHOLDER {
        String::new()
    } else {
        text
    }
}

/// Parse one Scapolite rule document.
pub fn parse_rule_document(text: &str) -> Result<ScapoliteRule, GuideError> {
    let (yaml, body) = split_front_matter(text)?;
    let mapping: serde_yaml::Mapping =
        serde_yaml::from_str(yaml).map_err(|e| GuideError::MalformedFrontMatter(e.to_string()))?;

    let mut scapolite_class = None;
    let mut scapolite_version = String::new();
    let mut id = String::new();
    let mut id_namespace = String::new();
    let mut title = String::new();
    let mut rule_text = String::new();
    let mut implementations: Vec<Implementation> = Vec::new();
    let mut history: Vec<HistoryEntry> = Vec::new();
    let mut extra = IndexMap::new();

    for (key, value) in mapping {
        let key = match key {
            Value::String(s) => s,
            other => {
                return Err(GuideError::MalformedFrontMatter(format!(
                    "non-string front-matter key {other:?}"
                )))
            }
        };
        match key.as_str() {
            "scapolite" => {
                let block: serde_yaml::Mapping = serde_yaml::from_value(value).map_err(|e| {
                    GuideError::MalformedFrontMatter(format!("scapolite block: {e}"))
                })?;
                for (k, v) in block {
                    match k.as_str() {
                        Some("class") => {
                            scapolite_class =
                                Some(serde_yaml::from_value::<ScapoliteClass>(v).map_err(|_| {
                                    GuideError::MalformedFrontMatter(
                                        "scapolite class must be `rule`".into(),
                                    )
                                })?)
                        }
                        Some("version") => scapolite_version = as_string(&v, "scapolite.version")?,
                        _ => {
                            return Err(GuideError::MalformedFrontMatter(format!(
                                "unknown scapolite key {k:?}"
                            )))
                        }
                    }
                }
            }
            "id" => id = as_string(&value, "id")?,
            "id_namespace" => id_namespace = as_string(&value, "id_namespace")?,
            "title" => title = strip_placeholder(as_string(&value, "title")?),
            "rule" => rule_text = strip_placeholder(as_string(&value, "rule")?),
            "implementations" => {
                implementations = serde_yaml::from_value(value).map_err(|e| {
                    GuideError::MalformedFrontMatter(format!("implementations: {e}"))
                })?;
                for implementation in &mut implementations {
                    implementation.description =
                        strip_placeholder(std::mem::take(&mut implementation.description));
                }
            }
            "history" => {
                history = serde_yaml::from_value(value)
                    .map_err(|e| GuideError::MalformedFrontMatter(format!("history: {e}")))?
            }
            _ => {
                extra.insert(key, value);
            }
        }
    }

    let scapolite_class = scapolite_class.ok_or_else(|| {
        GuideError::MalformedFrontMatter("missing scapolite class/version block".into())
    })?;
    if id.is_empty() {
        return Err(GuideError::MalformedFrontMatter(
            "missing or empty id".into(),
        ));
    }

    let mut rule = ScapoliteRule {
        scapolite_class,
        scapolite_version,
        id,
        id_namespace,
        title,
        rule_text,
        implementations,
        history,
        extra,
    };

    let mut seen_paths = std::collections::BTreeSet::new();
    for (path, section_body) in parse_sections(body)? {
        if !seen_paths.insert(path.clone()) {
            return Err(GuideError::DuplicatePath(path));
        }
        apply_section(&mut rule, &path, section_body)?;
    }

    validate_rule(&rule)?;
    Ok(rule)
}

fn parse_sections(body: &str) -> Result<Vec<(String, String)>, GuideError> {
    let mut sections: Vec<(String, Vec<&str>)> = Vec::new();
    for line in body.lines() {
        if let Some(path) = line.strip_prefix("## /") {
            sections.push((format!("/{}", path.trim()), Vec::new()));
        } else if let Some((_, lines)) = sections.last_mut() {
            lines.push(line);
        } else if !line.trim().is_empty() {
            return Err(GuideError::MalformedFrontMatter(format!(
                "unexpected content before first `## /` section: `{line}`"
            )));
        }
    }
    Ok(sections
        .into_iter()
        .map(|(path, lines)| (path, lines.join("\n").trim_matches('\n').to_string()))
        .collect())
}

fn apply_section(rule: &mut ScapoliteRule, path: &str, body: String) -> Result<(), GuideError> {
    let segments: Vec<&str> = path.trim_start_matches('/').split('/').collect();
    match segments.as_slice() {
        ["rule"] => rule.rule_text = body,
        ["title"] => rule.title = body,
        ["implementations", index, "description"] => {
            let index: usize = index
                .parse()
                .map_err(|_| GuideError::UnresolvablePath(path.to_string()))?;
            let implementation = rule
                .implementations
                .get_mut(index)
                .ok_or_else(|| GuideError::UnresolvablePath(path.to_string()))?;
            implementation.description = body;
        }
        _ => return Err(GuideError::UnresolvablePath(path.to_string())),
    }
    Ok(())
}

/// Serialize a rule back into document form. Markdown-merged fields become
/// `## /path` sections; the front matter never carries placeholders.
pub fn serialize_rule_document(rule: &ScapoliteRule) -> Result<String, GuideError> {
    validate_rule(rule)?;

    let mut mapping = serde_yaml::Mapping::new();
    let mut scapolite = serde_yaml::Mapping::new();
    scapolite.insert(
        "class".into(),
        serde_yaml::to_value(rule.scapolite_class).unwrap(),
    );
    scapolite.insert(
        "version".into(),
        Value::String(rule.scapolite_version.clone()),
    );
    mapping.insert("scapolite".into(), Value::Mapping(scapolite));
    mapping.insert("id".into(), Value::String(rule.id.clone()));
    if !rule.id_namespace.is_empty() {
        mapping.insert(
            "id_namespace".into(),
            Value::String(rule.id_namespace.clone()),
        );
    }
    if !rule.title.is_empty() {
        mapping.insert("title".into(), Value::String(rule.title.clone()));
    }
    if !rule.implementations.is_empty() {
        let stripped: Vec<Implementation> = rule
            .implementations
            .iter()
            .map(|i| Implementation {
                relative_id: i.relative_id.clone(),
                description: String::new(),
                automations: i.automations.clone(),
            })
            .collect();
        let mut value =
            serde_yaml::to_value(&stripped).map_err(|e| GuideError::InvalidRule(e.to_string()))?;
        if let Value::Sequence(items) = &mut value {
            for item in items {
                if let Value::Mapping(m) = item {
                    m.remove("description");
                    if matches!(m.get("automations"), Some(Value::Sequence(s)) if s.is_empty()) {
                        m.remove("automations");
                    }
                }
            }
        }
        mapping.insert("implementations".into(), value);
    }
    if !rule.history.is_empty() {
        mapping.insert(
            "history".into(),
            serde_yaml::to_value(&rule.history)
                .map_err(|e| GuideError::InvalidRule(e.to_string()))?,
        );
    }
    for (key, value) in &rule.extra {
        mapping.insert(Value::String(key.clone()), value.clone());
    }

    let yaml =
        serde_yaml::to_string(&mapping).map_err(|e| GuideError::InvalidRule(e.to_string()))?;
    let mut out = String::new();
    out.push_str("---\n");
    out.push_str(&yaml);
    out.push_str("---\n");
    for (path, body) in markdown_fields(rule) {
        if !body.is_empty() {
            out.push_str(&format!("\n## {path}\n{body}\n"));
        }
    }
    Ok(out)
}

/// Substitution of one automation option value for one rule of a profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueOverride {
    pub rule_id: String,
    pub option: String,
    pub value: OptionValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileDef {
    pub profile_id: String,
    pub included_rule_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub value_overrides: Vec<ValueOverride>,
}

/// A set of rules in a fixed total order, plus the profiles tailoring them.
#[derive(Debug, Clone, PartialEq)]
pub struct Guide {
    pub guide_id: String,
    pub rules: Vec<ScapoliteRule>,
    pub profiles: IndexMap<String, ProfileDef>,
}

impl Guide {
    pub fn rule(&self, id: &str) -> Option<&ScapoliteRule> {
        self.rules.iter().find(|r| r.id == id)
    }
}

#[derive(Debug, Deserialize)]
struct ProfilesFile {
    guide_id: String,
    #[serde(default)]
    profiles: Vec<ProfileDef>,
}

/// Load a guide from a directory of rule documents plus `profiles.yml`.
/// Rules are ordered by the lexicographic order of their file names.
pub fn load_guide(dir: &Path) -> Result<Guide, GuideError> {
    let io_err = |path: &Path, source| GuideError::Io {
        path: path.display().to_string(),
        source,
    };

    let mut files: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| io_err(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "md"))
        .collect();
    files.sort_by_key(|p| p.file_name().map(|n| n.to_os_string()));

    let mut rules: Vec<ScapoliteRule> = Vec::new();
    for file in &files {
        let text = std::fs::read_to_string(file).map_err(|e| io_err(file, e))?;
        let file_name = file
            .file_name()
            .unwrap_or_default()
            .to_string_lossy()
            .to_string();
        let rule = parse_rule_document(&text).map_err(|e| GuideError::InFile {
            file: file_name.clone(),
            source: Box::new(e),
        })?;
        if rules.iter().any(|r| r.id == rule.id) {
            return Err(GuideError::DuplicateRuleId {
                id: rule.id,
                file: file_name,
            });
        }
        rules.push(rule);
    }

    let profiles_path = dir.join(PROFILES_FILE);
    let text = std::fs::read_to_string(&profiles_path).map_err(|e| io_err(&profiles_path, e))?;
    let file: ProfilesFile =
        serde_yaml::from_str(&text).map_err(|e| GuideError::MalformedProfiles(e.to_string()))?;

    let mut profiles = IndexMap::new();
    for profile in file.profiles {
        let mut seen = std::collections::BTreeSet::new();
        for rule_id in &profile.included_rule_ids {
            if !rules.iter().any(|r| &r.id == rule_id) {
                return Err(GuideError::ProfileReferencesUnknownRule {
                    profile: profile.profile_id.clone(),
                    rule: rule_id.clone(),
                });
            }
            if !seen.insert(rule_id.clone()) {
                return Err(GuideError::DuplicateProfileRule {
                    profile: profile.profile_id.clone(),
                    rule: rule_id.clone(),
                });
            }
        }
        profiles.insert(profile.profile_id.clone(), profile);
    }

    Ok(Guide {
        guide_id: file.guide_id,
        rules,
        profiles,
    })
}

fn apply_override(automation: &mut Automation, option: &str, value: &OptionValue) {
    match automation {
        Automation::WinGpo(gpo) => {
            if option == "main_setting" {
                if let OptionValue::Text(text) = value {
                    match text.as_str() {
                        "Enabled" => gpo.value.main_setting = MainSetting::Enabled,
                        "Disabled" => gpo.value.main_setting = MainSetting::Disabled,
                        _ => {}
                    }
                }
            } else {
                gpo.value.options.insert(option.to_string(), value.clone());
            }
        }
        Automation::Compound(c) => {
            for child in &mut c.automations {
                apply_override(child, option, value);
            }
        }
        _ => {}
    }
}

/// The rules of a profile, in guide order, with value overrides substituted
/// into their policy automations.
pub fn select_profile(guide: &Guide, profile_id: &str) -> Result<Vec<ScapoliteRule>, GuideError> {
    let profile = guide
        .profiles
        .get(profile_id)
        .ok_or_else(|| GuideError::UnknownProfile(profile_id.to_string()))?;

    let mut selected = Vec::new();
    for rule in &guide.rules {
        if !profile.included_rule_ids.iter().any(|id| id == &rule.id) {
            continue;
        }
        let mut rule = rule.clone();
        for value_override in &profile.value_overrides {
            if value_override.rule_id != rule.id {
                continue;
            }
            for implementation in &mut rule.implementations {
                for automation in &mut implementation.automations {
                    apply_override(automation, &value_override.option, &value_override.value);
                }
            }
        }
        selected.push(rule);
    }
    Ok(selected)
}
