//! Rulepack compilation, OVAL check generation, and static analyses.
//!
//! The rulepack is the executor's input: one entry per profile rule with the
//! rule's concrete automations. Its JSON serialization is canonical, i.e.
//! emitting the same rulepack twice yields identical bytes.

use crate::automation::{
    resolve_automations, ConcreteAutomation, ConfigScope, PolicyCatalog, RegistryAutomation,
    ResolvedAutomations, TransformError, TypedAction,
};
use crate::guide::{select_profile, Guide, GuideError};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ArtifactError {
    #[error("rule `{rule_id}`: {source}")]
    Resolution {
        rule_id: String,
        #[source]
        source: TransformError,
    },
    #[error(transparent)]
    Guide(#[from] GuideError),
    #[error("malformed rulepack: {0}")]
    MalformedRulepack(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RulepackEntry {
    pub rule_id: String,
    pub title: String,
    pub no_automation: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub automations: Vec<ConcreteAutomation>,
}

impl RulepackEntry {
    pub fn registry_automations(&self) -> impl Iterator<Item = &RegistryAutomation> {
        self.automations.iter().filter_map(|a| match a {
            ConcreteAutomation::Registry(r) => Some(r),
            ConcreteAutomation::Script(_) => None,
        })
    }

    pub fn script_automations(&self) -> impl Iterator<Item = &crate::automation::ScriptAutomation> {
        self.automations.iter().filter_map(|a| match a {
            ConcreteAutomation::Script(s) => Some(s),
            ConcreteAutomation::Registry(_) => None,
        })
    }
}

/// Per-profile compiled artifact: the profile's rules with their concrete
/// automations, in profile rule order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rulepack {
    pub guide_id: String,
    pub profile_id: String,
    pub entries: Vec<RulepackEntry>,
}

impl Rulepack {
    pub fn entry(&self, rule_id: &str) -> Option<&RulepackEntry> {
        self.entries.iter().find(|e| e.rule_id == rule_id)
    }

    pub fn rule_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.rule_id.as_str())
    }
}

/// Compile a guide profile into a rulepack, resolving every abstract
/// automation through the catalog.
pub fn build_rulepack(
    guide: &Guide,
    profile_id: &str,
    catalog: &PolicyCatalog,
) -> Result<Rulepack, ArtifactError> {
    let rules = select_profile(guide, profile_id)?;
    let mut entries = Vec::with_capacity(rules.len());
    for rule in rules {
        let automations: Vec<_> = rule.automations().cloned().collect();
        let resolved = resolve_automations(&automations, catalog).map_err(|source| {
            ArtifactError::Resolution {
                rule_id: rule.id.clone(),
                source,
            }
        })?;
        let (no_automation, automations) = match resolved {
            ResolvedAutomations::NoAutomation => (true, Vec::new()),
            ResolvedAutomations::Resolved(list) => (false, list),
        };
        entries.push(RulepackEntry {
            rule_id: rule.id,
            title: rule.title,
            no_automation,
            automations,
        });
    }
    Ok(Rulepack {
        guide_id: guide.guide_id.clone(),
        profile_id: profile_id.to_string(),
        entries,
    })
}

/// Canonical rulepack serialization; the same rulepack always yields the
/// same bytes.
pub fn emit_rulepack(rulepack: &Rulepack) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(rulepack).expect("rulepack serialization");
    bytes.push(b'\n');
    bytes
}

/// Parse and validate rulepack bytes.
pub fn load_rulepack(bytes: &[u8]) -> Result<Rulepack, ArtifactError> {
    let rulepack: Rulepack = serde_json::from_slice(bytes)
        .map_err(|e| ArtifactError::MalformedRulepack(e.to_string()))?;
    let mut seen = std::collections::BTreeSet::new();
    for entry in &rulepack.entries {
        if !seen.insert(&entry.rule_id) {
            return Err(ArtifactError::MalformedRulepack(format!(
                "duplicate rule_id `{}`",
                entry.rule_id
            )));
        }
        if entry.no_automation != entry.automations.is_empty() {
            return Err(ArtifactError::MalformedRulepack(format!(
                "rule `{}`: no_automation flag disagrees with the automation list",
                entry.rule_id
            )));
        }
        for automation in entry.registry_automations() {
            if let Some(constraint) = &automation.constraints {
                constraint.validate().map_err(|e| {
                    ArtifactError::MalformedRulepack(format!("rule `{}`: {e}", entry.rule_id))
                })?;
            }
        }
    }
    Ok(rulepack)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SameSettingGroup {
    pub config: ConfigScope,
    pub registry_key: String,
    pub value_name: String,
    pub rule_ids: Vec<String>,
}

/// Findings of the static rulepack analyses: rules without any automation
/// and groups of rules that write the same security setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticFindings {
    pub no_automation_ids: Vec<String>,
    pub same_setting_groups: Vec<SameSettingGroup>,
}

impl StaticFindings {
    /// Rule ids appearing in any same-setting group, in rulepack order.
    pub fn same_setting_rule_ids(&self) -> Vec<String> {
        let mut ids = Vec::new();
        for group in &self.same_setting_groups {
            for id in &group.rule_ids {
                if !ids.contains(id) {
                    ids.push(id.clone());
                }
            }
        }
        ids
    }
}

pub fn analyze_rulepack(rulepack: &Rulepack) -> StaticFindings {
    let no_automation_ids = rulepack
        .entries
        .iter()
        .filter(|e| e.no_automation)
        .map(|e| e.rule_id.clone())
        .collect();

    let mut by_setting: IndexMap<(ConfigScope, String, String), Vec<String>> = IndexMap::new();
    for entry in &rulepack.entries {
        for automation in entry.registry_automations() {
            let key = (
                automation.config,
                automation.registry_key.clone(),
                automation.value_name.clone(),
            );
            let rules = by_setting.entry(key).or_default();
            if !rules.contains(&entry.rule_id) {
                rules.push(entry.rule_id.clone());
            }
        }
    }
    let same_setting_groups = by_setting
        .into_iter()
        .filter(|(_, rules)| rules.len() >= 2)
        .map(
            |((config, registry_key, value_name), rule_ids)| SameSettingGroup {
                config,
                registry_key,
                value_name,
                rule_ids,
            },
        )
        .collect();

    StaticFindings {
        no_automation_ids,
        same_setting_groups,
    }
}

/// Layout of the emitted OVAL document. `Nested` inlines each registry test
/// inside its criterion; `Flat` keeps tests/objects/states in their own
/// top-level sections behind id references.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OvalLayout {
    #[default]
    Nested,
    Flat,
}

pub const OVAL_NS: &str = "http://oval.mitre.org/XMLSchema/oval-definitions-5";
pub const OVAL_WIN_NS: &str = "http://oval.mitre.org/XMLSchema/oval-definitions-5#windows";

const ID_BASE: u64 = 100_000;
const ID_STRIDE: u64 = 10;

fn xml_escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

/// One check a registry automation expands to: the object to collect plus
/// the state expected of it.
struct RegistryCheck {
    id: u64,
    key: String,
    name: String,
    reg_type: &'static str,
    datatype: &'static str,
    operation: &'static str,
    value: String,
}

enum PlannedCheck {
    Registry(RegistryCheck),
    /// A script or missing automation; evaluates to error.
    Unresolvable {
        id: u64,
    },
}

struct PlannedDefinition {
    id: u64,
    rule_id: String,
    checks: Vec<PlannedCheck>,
}

/// Expand a registry automation into its state checks. Exact actions check
/// equality; a min/max constraint replaces equality with the matching
/// ordered comparison, one check per bound.
fn registry_checks(automation: &RegistryAutomation, alloc: &mut u64) -> Vec<PlannedCheck> {
    let mut take_id = || {
        let id = *alloc;
        *alloc += 1;
        id
    };
    let (reg_type, datatype) = match automation.action {
        TypedAction::Dword(_) => ("reg_dword", "int"),
        TypedAction::Sz(_) => ("reg_sz", "string"),
    };
    let payload = match &automation.action {
        TypedAction::Dword(n) => n.to_string(),
        TypedAction::Sz(s) => s.clone(),
    };
    let base = |id: u64, operation: &'static str, value: String| {
        PlannedCheck::Registry(RegistryCheck {
            id,
            key: automation.registry_key.clone(),
            name: automation.value_name.clone(),
            reg_type,
            datatype,
            operation,
            value,
        })
    };
    match (&automation.action, &automation.constraints) {
        (TypedAction::Dword(_), Some(constraint)) => {
            let mut checks = Vec::new();
            if let Some(min) = constraint.min {
                checks.push(base(take_id(), "greater than or equal", min.to_string()));
            }
            if let Some(max) = constraint.max {
                checks.push(base(take_id(), "less than or equal", max.to_string()));
            }
            checks
        }
        _ => vec![base(take_id(), "equals", payload)],
    }
}

fn plan_definitions(rulepack: &Rulepack) -> Vec<PlannedDefinition> {
    let mut alloc = ID_BASE;
    let mut definitions = Vec::with_capacity(rulepack.entries.len());
    for entry in &rulepack.entries {
        if !alloc.is_multiple_of(ID_STRIDE) {
            alloc += ID_STRIDE - alloc % ID_STRIDE;
        }
        let definition_id = alloc;
        let mut checks = Vec::new();
        if entry.no_automation {
            let id = alloc;
            alloc += 1;
            checks.push(PlannedCheck::Unresolvable { id });
        } else {
            for automation in &entry.automations {
                match automation {
                    // User-scope settings have no hive in this subset either,
                    // so they fall into the unresolvable bucket with scripts.
                    ConcreteAutomation::Registry(r) if r.config == ConfigScope::Computer => {
                        checks.extend(registry_checks(r, &mut alloc));
                    }
                    _ => {
                        let id = alloc;
                        alloc += 1;
                        checks.push(PlannedCheck::Unresolvable { id });
                    }
                }
            }
        }
        definitions.push(PlannedDefinition {
            id: definition_id,
            rule_id: entry.rule_id.clone(),
            checks,
        });
    }
    definitions
}

fn write_registry_object(out: &mut String, check: &RegistryCheck, indent: &str) {
    let id = check.id;
    out.push_str(&format!(
        "{indent}<win:registry_object id=\"oval:obj:{id}\" version=\"1\">\n"
    ));
    out.push_str(&format!(
        "{indent}  <win:hive datatype=\"string\" operation=\"equals\">HKEY_LOCAL_MACHINE</win:hive>\n"
    ));
    out.push_str(&format!(
        "{indent}  <win:key datatype=\"string\" operation=\"case insensitive equals\">{}</win:key>\n",
        xml_escape(&check.key)
    ));
    out.push_str(&format!(
        "{indent}  <win:name datatype=\"string\" operation=\"equals\">{}</win:name>\n",
        xml_escape(&check.name)
    ));
    out.push_str(&format!("{indent}</win:registry_object>\n"));
}

fn write_registry_state(out: &mut String, check: &RegistryCheck, indent: &str) {
    let id = check.id;
    out.push_str(&format!(
        "{indent}<win:registry_state id=\"oval:ste:{id}\" version=\"1\">\n"
    ));
    out.push_str(&format!(
        "{indent}  <win:type datatype=\"string\" operation=\"equals\">{}</win:type>\n",
        check.reg_type
    ));
    out.push_str(&format!(
        "{indent}  <win:value datatype=\"{}\" entity_check=\"all\" operation=\"{}\">{}</win:value>\n",
        check.datatype,
        check.operation,
        xml_escape(&check.value)
    ));
    out.push_str(&format!("{indent}</win:registry_state>\n"));
}

fn write_registry_test(out: &mut String, check: &RegistryCheck, indent: &str, inline: bool) {
    let id = check.id;
    out.push_str(&format!(
        "{indent}<win:registry_test check=\"all\" check_existence=\"at_least_one_exists\" id=\"oval:tst:{id}\" version=\"1\">\n"
    ));
    if inline {
        write_registry_object(out, check, &format!("{indent}  "));
        write_registry_state(out, check, &format!("{indent}  "));
    } else {
        out.push_str(&format!(
            "{indent}  <win:object object_ref=\"oval:obj:{id}\"/>\n"
        ));
        out.push_str(&format!(
            "{indent}  <win:state state_ref=\"oval:ste:{id}\"/>\n"
        ));
    }
    out.push_str(&format!("{indent}</win:registry_test>\n"));
}

fn write_unknown_test(out: &mut String, id: u64, indent: &str) {
    out.push_str(&format!(
        "{indent}<oval:unknown_test id=\"oval:tst:{id}\" version=\"1\"/>\n"
    ));
}

/// Emit the OVAL check document for a rulepack in the default nested layout.
pub fn emit_oval(rulepack: &Rulepack) -> Vec<u8> {
    emit_oval_with(rulepack, OvalLayout::Nested)
}

pub fn emit_oval_with(rulepack: &Rulepack, layout: OvalLayout) -> Vec<u8> {
    let definitions = plan_definitions(rulepack);
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str(&format!(
        "<oval_definitions xmlns:oval=\"{OVAL_NS}\" xmlns:win=\"{OVAL_WIN_NS}\">\n"
    ));
    out.push_str("  <definitions>\n");
    for definition in &definitions {
        out.push_str(&format!(
            "    <definition class=\"compliance\" id=\"oval:def:{}\" version=\"1\" rule_id=\"{}\">\n",
            definition.id,
            xml_escape(&definition.rule_id)
        ));
        out.push_str("      <criteria negate=\"false\" operator=\"AND\">\n");
        for check in &definition.checks {
            let id = match check {
                PlannedCheck::Registry(r) => r.id,
                PlannedCheck::Unresolvable { id } => *id,
            };
            out.push_str("        <criteria negate=\"false\" operator=\"AND\">\n");
            match layout {
                OvalLayout::Nested => {
                    out.push_str(&format!(
                        "          <criterion negate=\"false\" test_ref=\"oval:tst:{id}\">\n"
                    ));
                    match check {
                        PlannedCheck::Registry(r) => {
                            write_registry_test(&mut out, r, "            ", true)
                        }
                        PlannedCheck::Unresolvable { id } => {
                            write_unknown_test(&mut out, *id, "            ")
                        }
                    }
                    out.push_str("          </criterion>\n");
                }
                OvalLayout::Flat => {
                    out.push_str(&format!(
                        "          <criterion negate=\"false\" test_ref=\"oval:tst:{id}\"/>\n"
                    ));
                }
            }
            out.push_str("        </criteria>\n");
        }
        out.push_str("      </criteria>\n");
        out.push_str("    </definition>\n");
    }
    out.push_str("  </definitions>\n");

    if layout == OvalLayout::Flat {
        out.push_str("  <tests>\n");
        for definition in &definitions {
            for check in &definition.checks {
                match check {
                    PlannedCheck::Registry(r) => write_registry_test(&mut out, r, "    ", false),
                    PlannedCheck::Unresolvable { id } => write_unknown_test(&mut out, *id, "    "),
                }
            }
        }
        out.push_str("  </tests>\n");
        out.push_str("  <objects>\n");
        for definition in &definitions {
            for check in &definition.checks {
                if let PlannedCheck::Registry(r) = check {
                    write_registry_object(&mut out, r, "    ");
                }
            }
        }
        out.push_str("  </objects>\n");
        out.push_str("  <states>\n");
        for definition in &definitions {
            for check in &definition.checks {
                if let PlannedCheck::Registry(r) = check {
                    write_registry_state(&mut out, r, "    ");
                }
            }
        }
        out.push_str("  </states>\n");
    }

    out.push_str("</oval_definitions>\n");
    out.into_bytes()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automation::{Constraint, ScriptAutomation};

    pub(crate) fn registry(key: &str, name: &str, action: TypedAction) -> ConcreteAutomation {
        ConcreteAutomation::Registry(RegistryAutomation {
            config: ConfigScope::Computer,
            registry_key: key.to_string(),
            value_name: name.to_string(),
            action,
            constraints: None,
        })
    }

    pub(crate) fn fve_rule_entry() -> RulepackEntry {
        let mut length = RegistryAutomation {
            config: ConfigScope::Computer,
            registry_key: "Software\\Policies\\Microsoft\\FVE".into(),
            value_name: "RDVPassphraseLength".into(),
            action: TypedAction::Dword(15),
            constraints: Some(Constraint {
                min: Some(15),
                max: None,
            }),
        };
        length.constraints = Some(Constraint {
            min: Some(15),
            max: None,
        });
        RulepackEntry {
            rule_id: "BL942-1101".into(),
            title: "Configure use of passwords for removable data drives".into(),
            no_automation: false,
            automations: vec![
                registry(
                    "Software\\Policies\\Microsoft\\FVE",
                    "RDVPassphrase",
                    TypedAction::Dword(1),
                ),
                registry(
                    "Software\\Policies\\Microsoft\\FVE",
                    "RDVPassphraseComplexity",
                    TypedAction::Dword(1),
                ),
                ConcreteAutomation::Registry(length),
            ],
        }
    }

    fn sample_rulepack() -> Rulepack {
        Rulepack {
            guide_id: "g".into(),
            profile_id: "full".into(),
            entries: vec![
                fve_rule_entry(),
                RulepackEntry {
                    rule_id: "R18_2_1".into(),
                    title: "No automation yet".into(),
                    no_automation: true,
                    automations: vec![],
                },
                RulepackEntry {
                    rule_id: "S1".into(),
                    title: "Script-checked".into(),
                    no_automation: false,
                    automations: vec![ConcreteAutomation::Script(ScriptAutomation {
                        script: "Get-Volume".into(),
                        expected: crate::automation::ExpectedOutput {
                            output_processor: crate::automation::OutputProcessor::FormatList,
                            each_item: crate::automation::EachItem {
                                key: "FileSystemType".into(),
                                equal_to: "NTFS".into(),
                            },
                        },
                    })],
                },
            ],
        }
    }

    #[test]
    fn empty_profile_builds_an_empty_rulepack() {
        let guide = crate::guide::Guide {
            guide_id: "g".into(),
            rules: vec![],
            profiles: IndexMap::from([(
                "none".to_string(),
                crate::guide::ProfileDef {
                    profile_id: "none".into(),
                    included_rule_ids: vec![],
                    value_overrides: vec![],
                },
            )]),
        };
        let rulepack = build_rulepack(&guide, "none", &PolicyCatalog::default()).unwrap();
        assert!(rulepack.entries.is_empty());
        assert_eq!(rulepack.profile_id, "none");
    }

    #[test]
    fn rulepack_roundtrips_and_is_byte_stable() {
        let rulepack = sample_rulepack();
        let bytes = emit_rulepack(&rulepack);
        assert_eq!(load_rulepack(&bytes).unwrap(), rulepack);
        assert_eq!(emit_rulepack(&rulepack), bytes);
    }

    #[test]
    fn duplicate_rule_id_fails_to_load() {
        let mut rulepack = sample_rulepack();
        rulepack.entries.push(rulepack.entries[0].clone());
        let bytes = emit_rulepack(&rulepack);
        assert!(matches!(
            load_rulepack(&bytes),
            Err(ArtifactError::MalformedRulepack(_))
        ));
    }

    #[test]
    fn inconsistent_no_automation_flag_fails_to_load() {
        let text = r#"{
  "guide_id": "g",
  "profile_id": "p",
  "entries": [
    {"rule_id": "R1", "title": "t", "no_automation": true,
     "automations": [{"system": "org.scapolite.implementation.windows_registry",
                      "config": "Computer", "registry_key": "K", "value_name": "V",
                      "action": "DWORD:1"}]}
  ]
}"#;
        assert!(matches!(
            load_rulepack(text.as_bytes()),
            Err(ArtifactError::MalformedRulepack(_))
        ));
    }

    #[test]
    fn analyze_reports_no_automation_in_rulepack_order() {
        let findings = analyze_rulepack(&sample_rulepack());
        assert_eq!(findings.no_automation_ids, ["R18_2_1"]);
        assert!(findings.same_setting_groups.is_empty());
    }

    #[test]
    fn analyze_groups_rules_sharing_a_setting() {
        let mut rulepack = sample_rulepack();
        rulepack.entries.push(RulepackEntry {
            rule_id: "R-dup".into(),
            title: "Also writes RDVPassphrase".into(),
            no_automation: false,
            automations: vec![registry(
                "Software\\Policies\\Microsoft\\FVE",
                "RDVPassphrase",
                TypedAction::Dword(1),
            )],
        });
        let findings = analyze_rulepack(&rulepack);

        // brute force: every unordered pair of entries sharing a triple
        let mut expected_pairs = Vec::new();
        for (i, a) in rulepack.entries.iter().enumerate() {
            for b in rulepack.entries.iter().skip(i + 1) {
                let shares = a.registry_automations().any(|ra| {
                    b.registry_automations().any(|rb| {
                        ra.config == rb.config
                            && ra.registry_key == rb.registry_key
                            && ra.value_name == rb.value_name
                    })
                });
                if shares {
                    expected_pairs.push((a.rule_id.clone(), b.rule_id.clone()));
                }
            }
        }
        assert_eq!(
            expected_pairs,
            [("BL942-1101".to_string(), "R-dup".to_string())]
        );
        assert_eq!(findings.same_setting_groups.len(), 1);
        let group = &findings.same_setting_groups[0];
        assert_eq!(group.value_name, "RDVPassphrase");
        assert_eq!(group.rule_ids, ["BL942-1101", "R-dup"]);
    }

    #[test]
    fn one_rule_writing_a_triple_twice_is_not_a_group() {
        let mut rulepack = sample_rulepack();
        rulepack.entries[0].automations.push(registry(
            "Software\\Policies\\Microsoft\\FVE",
            "RDVPassphrase",
            TypedAction::Dword(1),
        ));
        assert!(analyze_rulepack(&rulepack).same_setting_groups.is_empty());
    }

    #[test]
    fn oval_carries_the_expected_registry_fields() {
        let bytes = emit_oval(&sample_rulepack());
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.contains(
            "<win:registry_test check=\"all\" check_existence=\"at_least_one_exists\" id=\"oval:tst:100000\" version=\"1\">"
        ));
        assert!(text.contains(
            "<win:key datatype=\"string\" operation=\"case insensitive equals\">Software\\Policies\\Microsoft\\FVE</win:key>"
        ));
        assert!(text.contains(
            "<win:name datatype=\"string\" operation=\"equals\">RDVPassphrase</win:name>"
        ));
        assert!(text
            .contains("<win:type datatype=\"string\" operation=\"equals\">reg_dword</win:type>"));
        assert!(text.contains(
            "<win:value datatype=\"int\" entity_check=\"all\" operation=\"equals\">1</win:value>"
        ));
        assert!(text.contains("<win:value datatype=\"int\" entity_check=\"all\" operation=\"greater than or equal\">15</win:value>"));
        assert!(text.contains("<criteria negate=\"false\" operator=\"AND\">"));
        // scripts and missing automations become error-evaluating tests
        assert!(text.contains("<oval:unknown_test"));
    }

    #[test]
    fn oval_is_deterministic_and_ids_unique() {
        let rulepack = sample_rulepack();
        let a = emit_oval(&rulepack);
        assert_eq!(a, emit_oval(&rulepack));

        let text = String::from_utf8(a).unwrap();
        let mut ids: Vec<&str> = text
            .match_indices("id=\"oval:tst:")
            .map(|(at, _)| &text[at + 4..text[at + 4..].find('"').unwrap() + at + 4])
            .collect();
        let total = ids.len();
        ids.sort_unstable();
        ids.dedup();
        // nested layout repeats each test id on criterion + test element
        assert_eq!(ids.len() * 2, total + ids.len());
    }

    #[test]
    fn empty_rulepack_emits_zero_definitions() {
        let rulepack = Rulepack {
            guide_id: "g".into(),
            profile_id: "p".into(),
            entries: vec![],
        };
        let text = String::from_utf8(emit_oval(&rulepack)).unwrap();
        assert!(!text.contains("<definition "));
    }

    #[test]
    fn definition_ids_use_ten_stride_per_rule() {
        let text = String::from_utf8(emit_oval(&sample_rulepack())).unwrap();
        assert!(text.contains("id=\"oval:def:100000\""));
        assert!(text.contains("id=\"oval:def:100010\""));
        assert!(text.contains("id=\"oval:def:100020\""));
    }
}
