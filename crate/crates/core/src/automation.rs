//! Automation variants and the policy-to-registry transformation.
//!
//! A rule's machine-readable part is a list of automations. The abstract
//! `win_gpo` variant names a Windows policy by its UI path; the concrete
//! `windows_registry` variant names the registry value the policy maps to.
//! The mapping data lives in an external [`PolicyCatalog`] so the
//! transformation itself stays table-driven.

use indexmap::IndexMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::str::FromStr;

pub const SYSTEM_WIN_GPO: &str = "org.scapolite.implementation.win_gpo";
pub const SYSTEM_WINDOWS_REGISTRY: &str = "org.scapolite.implementation.windows_registry";
pub const SYSTEM_COMPOUND: &str = "org.scapolite.automation.compound";
pub const SYSTEM_SCRIPT: &str = "org.scapolite.automation.script";

/// The placeholder used for main-setting selectors in catalog entries.
pub const MAIN_SETTING_SELECTOR: &str = "main_setting";

#[derive(Debug, thiserror::Error)]
pub enum TransformError {
    #[error("malformed action `{0}`: expected `DWORD:<integer>` or `SZ:<text>`")]
    MalformedAction(String),
    #[error("duplicate ui_path in catalog: `{0}`")]
    DuplicateUiPath(String),
    #[error("catalog entry `{0}`: main_setting encoding must cover Enabled and Disabled")]
    IncompleteMainSettingEncoding(String),
    #[error("no catalog entry for policy path `{0}`")]
    UnknownPolicyPath(String),
    #[error("policy `{ui_path}` has no setting for option `{option}`")]
    UnknownOption { ui_path: String, option: String },
    #[error("option `{option}`: value `{value}` has no encoding")]
    UnencodableValue { option: String, value: String },
    #[error("compound automations must not contain further compounds")]
    NestedCompound,
    #[error("invalid constraint: {0}")]
    InvalidConstraint(String),
    #[error("malformed catalog: {0}")]
    MalformedCatalog(String),
}

/// A typed registry action, serialized as `TYPE:payload` (e.g. `DWORD:15`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TypedAction {
    Dword(i64),
    Sz(String),
}

impl TypedAction {
    pub fn value_type(&self) -> &'static str {
        match self {
            TypedAction::Dword(_) => "DWORD",
            TypedAction::Sz(_) => "SZ",
        }
    }
}

impl FromStr for TypedAction {
    type Err = TransformError;

    fn from_str(text: &str) -> Result<Self, TransformError> {
        let (kind, payload) = text
            .split_once(':')
            .ok_or_else(|| TransformError::MalformedAction(text.to_string()))?;
        match kind {
            "DWORD" => payload
                .parse::<i64>()
                .map(TypedAction::Dword)
                .map_err(|_| TransformError::MalformedAction(text.to_string())),
            "SZ" => Ok(TypedAction::Sz(payload.to_string())),
            _ => Err(TransformError::MalformedAction(text.to_string())),
        }
    }
}

impl fmt::Display for TypedAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypedAction::Dword(n) => write!(f, "DWORD:{n}"),
            TypedAction::Sz(s) => write!(f, "SZ:{s}"),
        }
    }
}

impl Serialize for TypedAction {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for TypedAction {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Which registry hive a setting lives under.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum ConfigScope {
    #[default]
    Computer,
    User,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MainSetting {
    Enabled,
    Disabled,
}

impl MainSetting {
    pub fn as_str(&self) -> &'static str {
        match self {
            MainSetting::Enabled => "Enabled",
            MainSetting::Disabled => "Disabled",
        }
    }
}

/// A policy option value: either an integer or a named choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OptionValue {
    Int(i64),
    Text(String),
}

impl fmt::Display for OptionValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OptionValue::Int(n) => write!(f, "{n}"),
            OptionValue::Text(s) => write!(f, "{s}"),
        }
    }
}

/// The `value` block of a `win_gpo` automation: the mandatory main setting
/// plus any further options keyed by their UI labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpoValue {
    pub main_setting: MainSetting,
    #[serde(flatten)]
    pub options: IndexMap<String, OptionValue>,
}

/// An inclusive bound on an integer-valued setting; values inside the bound
/// are compliant even when they differ from the written action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constraint {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<i64>,
}

impl Constraint {
    pub fn validate(&self) -> Result<(), TransformError> {
        match (self.min, self.max) {
            (None, None) => Err(TransformError::InvalidConstraint(
                "at least one of min/max must be present".into(),
            )),
            (Some(lo), Some(hi)) if lo > hi => Err(TransformError::InvalidConstraint(format!(
                "min {lo} exceeds max {hi}"
            ))),
            _ => Ok(()),
        }
    }

    pub fn contains(&self, value: i64) -> bool {
        self.min.is_none_or(|lo| value >= lo) && self.max.is_none_or(|hi| value <= hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinGpoAutomation {
    pub ui_path: String,
    pub value: GpoValue,
    #[serde(default, skip_serializing_if = "IndexMap::is_empty")]
    pub constraints: IndexMap<String, Constraint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistryAutomation {
    #[serde(default)]
    pub config: ConfigScope,
    pub registry_key: String,
    pub value_name: String,
    pub action: TypedAction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraints: Option<Constraint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompoundAutomation {
    pub automations: Vec<Automation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptAutomation {
    pub script: String,
    pub expected: ExpectedOutput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedOutput {
    pub output_processor: OutputProcessor,
    pub each_item: EachItem,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputProcessor {
    #[serde(rename = "Format-List")]
    FormatList,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EachItem {
    pub key: String,
    pub equal_to: String,
}

/// Any automation as it appears in a Scapolite rule, discriminated by its
/// `system` string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "system")]
pub enum Automation {
    #[serde(rename = "org.scapolite.implementation.win_gpo")]
    WinGpo(WinGpoAutomation),
    #[serde(rename = "org.scapolite.implementation.windows_registry")]
    Registry(RegistryAutomation),
    #[serde(rename = "org.scapolite.automation.compound")]
    Compound(CompoundAutomation),
    #[serde(rename = "org.scapolite.automation.script")]
    Script(ScriptAutomation),
}

/// An automation the executor can act on directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "system")]
pub enum ConcreteAutomation {
    #[serde(rename = "org.scapolite.implementation.windows_registry")]
    Registry(RegistryAutomation),
    #[serde(rename = "org.scapolite.automation.script")]
    Script(ScriptAutomation),
}

/// How an option value maps onto a registry action.
#[derive(Debug, Clone, PartialEq)]
pub enum Encoding {
    /// Integer option values become `DWORD:<n>` verbatim.
    IntegerDword,
    /// Named choices map through an explicit table.
    Map(IndexMap<String, TypedAction>),
}

impl Serialize for Encoding {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Encoding::IntegerDword => serializer.serialize_str("integer_dword"),
            Encoding::Map(map) => map.serialize(serializer),
        }
    }
}

impl<'de> Deserialize<'de> for Encoding {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Tag(String),
            Map(IndexMap<String, TypedAction>),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Tag(tag) if tag == "integer_dword" => Ok(Encoding::IntegerDword),
            Raw::Tag(tag) => Err(serde::de::Error::custom(format!(
                "unknown encoding `{tag}`, expected `integer_dword` or a value map"
            ))),
            Raw::Map(map) => Ok(Encoding::Map(map)),
        }
    }
}

/// One setting a policy controls: which value in the automation selects it
/// and how the selected value encodes into a registry action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingMap {
    pub selector: String,
    pub value_name: String,
    pub encoding: Encoding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub ui_path: String,
    #[serde(default)]
    pub config: ConfigScope,
    pub registry_key: String,
    pub settings: Vec<SettingMap>,
}

/// Maps Windows-policy UI paths to the registry settings they control.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PolicyCatalog {
    entries: IndexMap<String, CatalogEntry>,
}

impl PolicyCatalog {
    pub fn entry(&self, ui_path: &str) -> Option<&CatalogEntry> {
        self.entries.get(ui_path)
    }

    pub fn entries(&self) -> impl Iterator<Item = &CatalogEntry> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Parse and validate a policy catalog document.
pub fn load_policy_catalog(text: &str) -> Result<PolicyCatalog, TransformError> {
    #[derive(Deserialize)]
    struct CatalogFile {
        #[serde(default)]
        entries: Vec<CatalogEntry>,
    }

    let file: CatalogFile =
        serde_yaml::from_str(text).map_err(|e| TransformError::MalformedCatalog(e.to_string()))?;

    let mut entries = IndexMap::new();
    for entry in file.entries {
        for setting in &entry.settings {
            if setting.selector == MAIN_SETTING_SELECTOR {
                let covers = match &setting.encoding {
                    Encoding::Map(map) => {
                        map.contains_key("Enabled") && map.contains_key("Disabled")
                    }
                    Encoding::IntegerDword => false,
                };
                if !covers {
                    return Err(TransformError::IncompleteMainSettingEncoding(
                        entry.ui_path.clone(),
                    ));
                }
            }
        }
        if entries
            .insert(entry.ui_path.clone(), entry.clone())
            .is_some()
        {
            return Err(TransformError::DuplicateUiPath(entry.ui_path));
        }
    }
    Ok(PolicyCatalog { entries })
}

fn encode_option(
    setting: &SettingMap,
    option: &str,
    value: &OptionValue,
) -> Result<TypedAction, TransformError> {
    match (&setting.encoding, value) {
        (Encoding::IntegerDword, OptionValue::Int(n)) => Ok(TypedAction::Dword(*n)),
        (Encoding::Map(map), value) => {
            map.get(&value.to_string())
                .cloned()
                .ok_or_else(|| TransformError::UnencodableValue {
                    option: option.to_string(),
                    value: value.to_string(),
                })
        }
        (Encoding::IntegerDword, OptionValue::Text(s)) => Err(TransformError::UnencodableValue {
            option: option.to_string(),
            value: s.clone(),
        }),
    }
}

/// Transform an abstract Windows-policy automation into a compound of
/// concrete registry automations.
///
/// Children are produced in catalog order, one per setting whose selector
/// appears in the automation's value block. A constraint keyed by an option
/// lands on exactly the registry automation generated for that option.
pub fn transform_gpo(
    automation: &WinGpoAutomation,
    catalog: &PolicyCatalog,
) -> Result<CompoundAutomation, TransformError> {
    let entry = catalog
        .entry(&automation.ui_path)
        .ok_or_else(|| TransformError::UnknownPolicyPath(automation.ui_path.clone()))?;

    for option in automation.value.options.keys() {
        if !entry.settings.iter().any(|s| &s.selector == option) {
            return Err(TransformError::UnknownOption {
                ui_path: automation.ui_path.clone(),
                option: option.clone(),
            });
        }
    }

    let mut children = Vec::new();
    for setting in &entry.settings {
        let action = if setting.selector == MAIN_SETTING_SELECTOR {
            let chosen = OptionValue::Text(automation.value.main_setting.as_str().to_string());
            Some(encode_option(setting, MAIN_SETTING_SELECTOR, &chosen)?)
        } else if let Some(value) = automation.value.options.get(&setting.selector) {
            Some(encode_option(setting, &setting.selector, value)?)
        } else {
            None
        };
        if let Some(action) = action {
            let constraints = if setting.selector == MAIN_SETTING_SELECTOR {
                None
            } else {
                automation.constraints.get(&setting.selector).copied()
            };
            if let Some(c) = &constraints {
                c.validate()?;
            }
            children.push(Automation::Registry(RegistryAutomation {
                config: entry.config,
                registry_key: entry.registry_key.clone(),
                value_name: setting.value_name.clone(),
                action,
                constraints,
            }));
        }
    }
    Ok(CompoundAutomation {
        automations: children,
    })
}

/// A rule's automations after resolution to concrete form.
#[derive(Debug, Clone, PartialEq)]
pub enum ResolvedAutomations {
    Resolved(Vec<ConcreteAutomation>),
    NoAutomation,
}

fn resolve_one(
    automation: &Automation,
    catalog: &PolicyCatalog,
    out: &mut Vec<ConcreteAutomation>,
    inside_compound: bool,
) -> Result<(), TransformError> {
    match automation {
        Automation::WinGpo(gpo) => {
            let compound = transform_gpo(gpo, catalog)?;
            for child in compound.automations {
                match child {
                    Automation::Registry(r) => out.push(ConcreteAutomation::Registry(r)),
                    // transform_gpo only produces registry children
                    _ => unreachable!("transform_gpo produced a non-registry child"),
                }
            }
        }
        Automation::Registry(r) => out.push(ConcreteAutomation::Registry(r.clone())),
        Automation::Script(s) => out.push(ConcreteAutomation::Script(s.clone())),
        Automation::Compound(c) => {
            if inside_compound {
                return Err(TransformError::NestedCompound);
            }
            for child in &c.automations {
                resolve_one(child, catalog, out, true)?;
            }
        }
    }
    Ok(())
}

/// Resolve every automation of a list of implementations into a flat ordered
/// list of concrete automations. Compounds are flattened one level; deeper
/// nesting is rejected.
pub fn resolve_automations(
    automations: &[Automation],
    catalog: &PolicyCatalog,
) -> Result<ResolvedAutomations, TransformError> {
    let mut out = Vec::new();
    for automation in automations {
        resolve_one(automation, catalog, &mut out, false)?;
    }
    if out.is_empty() {
        Ok(ResolvedAutomations::NoAutomation)
    } else {
        Ok(ResolvedAutomations::Resolved(out))
    }
}
