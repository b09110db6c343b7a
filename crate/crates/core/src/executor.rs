//! Native execution of rulepack entries against a target: compliance
//! checks, setting application with backups, and reverts.
//!
//! Failures never surface as `Err`; they are encoded in the run results so
//! a testrun can keep going and report what happened.

use crate::artifact::{Rulepack, RulepackEntry};
use crate::automation::{RegistryAutomation, ScriptAutomation, TypedAction};
use crate::target::{RegistryPath, TargetError, TargetState};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

/// Compliance category of one rule in one check run. Exactly one per rule:
/// `Empty` means a checked setting is absent, `Unknown` that the rule could
/// not be evaluated at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckCategory {
    Compliant,
    NonCompliant,
    Empty,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleCheck {
    pub category: CheckCategory,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRun {
    pub activity_id: String,
    pub per_rule: IndexMap<String, RuleCheck>,
    pub blacklisted: Vec<String>,
    pub failure: Option<String>,
}

impl CheckRun {
    pub fn ids_in_category(&self, category: CheckCategory) -> Vec<String> {
        self.per_rule
            .iter()
            .filter(|(_, check)| check.category == category)
            .map(|(id, _)| id.clone())
            .collect()
    }

    pub fn count_in_category(&self, category: CheckCategory) -> usize {
        self.per_rule
            .values()
            .filter(|c| c.category == category)
            .count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NotAppliedReason {
    Blacklisted,
    SkippedBeforeStart,
    NotImplementable,
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackupEntry {
    pub path: RegistryPath,
    pub previous: Option<TypedAction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApplyFailure {
    /// The culprit in one-by-one mode: the rule whose write most recently
    /// succeeded. Bulk applies cannot attribute the failure.
    pub rule_id: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApplyRun {
    pub activity_id: String,
    pub applied: Vec<String>,
    pub not_applied: IndexMap<String, NotAppliedReason>,
    /// Prior values per rule, in write order; covers applied and
    /// partially-applied rules.
    pub backups: IndexMap<String, Vec<BackupEntry>>,
    pub failure: Option<ApplyFailure>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartAt {
    Rule(usize),
    AfterBlacklist,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ApplyMode {
    Bulk,
    OneByOne { start_at: Option<StartAtSpec> },
}

/// Start point of a one-by-one apply, as specified by the caller.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StartAtSpec {
    Rule(String),
    AfterBlacklist,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NotRevertedReason {
    NoBackup,
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevertRun {
    pub activity_id: String,
    pub reverted: Vec<String>,
    pub not_reverted: IndexMap<String, NotRevertedReason>,
    pub failure: Option<String>,
}

fn registry_path(automation: &RegistryAutomation) -> RegistryPath {
    RegistryPath::new(
        automation.config,
        automation.registry_key.clone(),
        automation.value_name.clone(),
    )
}

/// Whether a present value satisfies a registry automation: equal to the
/// action, or inside [min, max] when a constraint exists. Types must match.
fn satisfies(value: &TypedAction, automation: &RegistryAutomation) -> bool {
    match (&automation.constraints, value, &automation.action) {
        (Some(constraint), TypedAction::Dword(actual), TypedAction::Dword(_)) => {
            constraint.contains(*actual)
        }
        (Some(_), _, _) => false,
        (None, actual, expected) => actual == expected,
    }
}

enum AutomationVerdict {
    Compliant,
    Violation(String),
    Missing(String),
    Unknown(String),
}

/// Parse `Format-List` style output: blank-line-separated records of
/// `Key : Value` lines.
pub fn parse_format_list(output: &str) -> Result<Vec<IndexMap<String, String>>, String> {
    let mut records = Vec::new();
    let mut current: IndexMap<String, String> = IndexMap::new();
    for line in output.lines() {
        if line.trim().is_empty() {
            if !current.is_empty() {
                records.push(std::mem::take(&mut current));
            }
            continue;
        }
        let (key, value) = line
            .split_once(':')
            .ok_or_else(|| format!("line without `key : value` shape: `{line}`"))?;
        current.insert(key.trim().to_string(), value.trim().to_string());
    }
    if !current.is_empty() {
        records.push(current);
    }
    Ok(records)
}

fn check_script(script: &ScriptAutomation, target: &TargetState) -> AutomationVerdict {
    let output = match target.run_script(&script.script) {
        Ok(output) => output,
        Err(TargetError::ConnectionLost) => {
            return AutomationVerdict::Unknown("connection to target lost".into())
        }
        Err(e) => return AutomationVerdict::Unknown(e.to_string()),
    };
    let records = match parse_format_list(&output) {
        Ok(records) => records,
        Err(e) => return AutomationVerdict::Unknown(format!("unparseable script output: {e}")),
    };
    let expected = &script.expected.each_item;
    // zero records satisfy the per-item expectation vacuously
    for (index, record) in records.iter().enumerate() {
        match record.get(&expected.key) {
            Some(value) if value == &expected.equal_to => {}
            Some(value) => {
                return AutomationVerdict::Violation(format!(
                    "record {index}: {} is `{value}`, expected `{}`",
                    expected.key, expected.equal_to
                ))
            }
            None => {
                return AutomationVerdict::Violation(format!(
                    "record {index} lacks key `{}`",
                    expected.key
                ))
            }
        }
    }
    AutomationVerdict::Compliant
}

fn check_entry(entry: &RulepackEntry, target: &TargetState, lost: &mut bool) -> RuleCheck {
    if entry.no_automation {
        return RuleCheck {
            category: CheckCategory::Unknown,
            detail: "rule has no automation".into(),
        };
    }
    let mut violation: Option<String> = None;
    let mut unknown: Option<String> = None;
    let mut missing: Option<String> = None;
    for automation in &entry.automations {
        let verdict = match automation {
            crate::automation::ConcreteAutomation::Registry(reg) => {
                match target.read_value(&registry_path(reg)) {
                    Err(TargetError::ConnectionLost) => {
                        *lost = true;
                        AutomationVerdict::Unknown("connection to target lost".into())
                    }
                    Err(e) => AutomationVerdict::Unknown(e.to_string()),
                    Ok(None) => AutomationVerdict::Missing(format!(
                        "{}\\{} is absent",
                        reg.registry_key, reg.value_name
                    )),
                    Ok(Some(value)) => {
                        if satisfies(value, reg) {
                            AutomationVerdict::Compliant
                        } else {
                            AutomationVerdict::Violation(format!(
                                "{}\\{} is {value}, expected {}{}",
                                reg.registry_key,
                                reg.value_name,
                                reg.action,
                                reg.constraints
                                    .map(|c| format!(" (min {:?} max {:?})", c.min, c.max))
                                    .unwrap_or_default()
                            ))
                        }
                    }
                }
            }
            crate::automation::ConcreteAutomation::Script(script) => check_script(script, target),
        };
        match verdict {
            AutomationVerdict::Compliant => {}
            AutomationVerdict::Violation(d) => {
                violation.get_or_insert(d);
            }
            AutomationVerdict::Unknown(d) => {
                unknown.get_or_insert(d);
            }
            AutomationVerdict::Missing(d) => {
                missing.get_or_insert(d);
            }
        }
    }
    // a violating present value dominates; an unevaluable automation
    // dominates a merely absent one
    if let Some(detail) = violation {
        RuleCheck {
            category: CheckCategory::NonCompliant,
            detail,
        }
    } else if let Some(detail) = unknown {
        RuleCheck {
            category: CheckCategory::Unknown,
            detail,
        }
    } else if let Some(detail) = missing {
        RuleCheck {
            category: CheckCategory::Empty,
            detail,
        }
    } else {
        RuleCheck {
            category: CheckCategory::Compliant,
            detail: "all automations satisfied".into(),
        }
    }
}

/// Check every non-blacklisted rulepack entry against the target.
pub fn check_all(
    rulepack: &Rulepack,
    target: &TargetState,
    blacklist: &[String],
    activity_id: &str,
) -> CheckRun {
    let mut per_rule = IndexMap::new();
    let mut blacklisted = Vec::new();
    let mut lost = !target.is_connected();
    let mut failure = if lost {
        Some("connection to target lost".to_string())
    } else {
        None
    };

    for entry in &rulepack.entries {
        if blacklist.contains(&entry.rule_id) {
            blacklisted.push(entry.rule_id.clone());
            continue;
        }
        let check = if lost {
            RuleCheck {
                category: CheckCategory::Unknown,
                detail: "connection to target lost".into(),
            }
        } else {
            let check = check_entry(entry, target, &mut lost);
            if lost && failure.is_none() {
                failure = Some("connection to target lost".to_string());
            }
            check
        };
        per_rule.insert(entry.rule_id.clone(), check);
    }

    CheckRun {
        activity_id: activity_id.to_string(),
        per_rule,
        blacklisted,
        failure,
    }
}

fn start_index(rulepack: &Rulepack, blacklist: &[String], start_at: &Option<StartAtSpec>) -> usize {
    match start_at {
        None => 0,
        Some(StartAtSpec::Rule(id)) => rulepack
            .entries
            .iter()
            .position(|e| &e.rule_id == id)
            // an id missing from the rulepack skips every entry
            .unwrap_or(rulepack.entries.len()),
        Some(StartAtSpec::AfterBlacklist) => rulepack
            .entries
            .iter()
            .rposition(|e| blacklist.contains(&e.rule_id))
            .map_or(0, |last| last + 1),
    }
}

/// Apply rulepack entries to the target in rulepack order, backing up each
/// setting's prior value before writing it.
pub fn apply_all(
    rulepack: &Rulepack,
    target: &mut TargetState,
    blacklist: &[String],
    mode: &ApplyMode,
    activity_id: &str,
) -> ApplyRun {
    let (one_by_one, start) = match mode {
        ApplyMode::Bulk => (false, 0),
        ApplyMode::OneByOne { start_at } => (true, start_index(rulepack, blacklist, start_at)),
    };

    let mut applied = Vec::new();
    let mut not_applied = IndexMap::new();
    let mut backups: IndexMap<String, Vec<BackupEntry>> = IndexMap::new();
    let mut failure: Option<ApplyFailure> = None;
    let mut last_successful_write: Option<String> = None;
    let mut aborted = !target.is_connected();
    if aborted {
        failure = Some(ApplyFailure {
            rule_id: None,
            message: "connection to target lost".into(),
        });
    }

    for (index, entry) in rulepack.entries.iter().enumerate() {
        if blacklist.contains(&entry.rule_id) {
            not_applied.insert(entry.rule_id.clone(), NotAppliedReason::Blacklisted);
            continue;
        }
        if index < start {
            not_applied.insert(entry.rule_id.clone(), NotAppliedReason::SkippedBeforeStart);
            continue;
        }
        if aborted {
            not_applied.insert(entry.rule_id.clone(), NotAppliedReason::Aborted);
            continue;
        }
        let registry: Vec<&RegistryAutomation> = entry.registry_automations().collect();
        if registry.is_empty() {
            not_applied.insert(entry.rule_id.clone(), NotAppliedReason::NotImplementable);
            continue;
        }
        let mut rule_backups = Vec::new();
        let mut failed = false;
        for automation in registry {
            // constrained automations write the action's literal payload
            match target.write_value(registry_path(automation), automation.action.clone()) {
                Ok(previous) => {
                    rule_backups.push(BackupEntry {
                        path: registry_path(automation),
                        previous,
                    });
                    last_successful_write = Some(entry.rule_id.clone());
                }
                Err(TargetError::ConnectionLost) => {
                    failure = Some(ApplyFailure {
                        rule_id: if one_by_one {
                            last_successful_write.clone()
                        } else {
                            None
                        },
                        message: "connection to target lost".into(),
                    });
                    aborted = true;
                    failed = true;
                    break;
                }
                Err(e) => {
                    failure = Some(ApplyFailure {
                        rule_id: if one_by_one {
                            Some(entry.rule_id.clone())
                        } else {
                            None
                        },
                        message: e.to_string(),
                    });
                    aborted = true;
                    failed = true;
                    break;
                }
            }
        }
        if !rule_backups.is_empty() {
            backups.insert(entry.rule_id.clone(), rule_backups);
        }
        if failed {
            not_applied.insert(entry.rule_id.clone(), NotAppliedReason::Aborted);
        } else {
            applied.push(entry.rule_id.clone());
        }
    }

    ApplyRun {
        activity_id: activity_id.to_string(),
        applied,
        not_applied,
        backups,
        failure,
    }
}

/// Restore backed-up settings. Rules revert in reverse rulepack order and
/// writes in reverse order within a rule, so overlapping writes to the same
/// setting land back on the original value.
pub fn revert_all(
    rulepack: &Rulepack,
    target: &mut TargetState,
    backups: &IndexMap<String, Vec<BackupEntry>>,
    activity_id: &str,
) -> RevertRun {
    let mut reverted = Vec::new();
    let mut not_reverted = IndexMap::new();
    let mut failure = None;
    let mut aborted = !target.is_connected();
    if aborted {
        failure = Some("connection to target lost".to_string());
    }

    for entry in rulepack.entries.iter().rev() {
        if aborted {
            not_reverted.insert(entry.rule_id.clone(), NotRevertedReason::Aborted);
            continue;
        }
        let Some(rule_backups) = backups.get(&entry.rule_id) else {
            not_reverted.insert(entry.rule_id.clone(), NotRevertedReason::NoBackup);
            continue;
        };
        let mut failed = false;
        for backup in rule_backups.iter().rev() {
            let result = match &backup.previous {
                Some(value) => target
                    .write_value(backup.path.clone(), value.clone())
                    .map(|_| ()),
                None => target.delete_value(&backup.path).map(|_| ()),
            };
            if let Err(e) = result {
                failure = Some(e.to_string());
                aborted = true;
                failed = true;
                break;
            }
        }
        if failed {
            not_reverted.insert(entry.rule_id.clone(), NotRevertedReason::Aborted);
        } else {
            reverted.push(entry.rule_id.clone());
        }
    }

    let order = |id: &String| rulepack.entries.iter().position(|e| &e.rule_id == id);
    reverted.sort_by_key(order);
    not_reverted.sort_by_cached_key(|id, _| order(id));

    RevertRun {
        activity_id: activity_id.to_string(),
        reverted,
        not_reverted,
        failure,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::artifact::{Rulepack, RulepackEntry};
    use crate::automation::{
        ConcreteAutomation, ConfigScope, Constraint, EachItem, ExpectedOutput, OutputProcessor,
        ScriptAutomation,
    };

    fn reg_entry(
        rule_id: &str,
        name: &str,
        action: TypedAction,
        constraints: Option<Constraint>,
    ) -> RulepackEntry {
        RulepackEntry {
            rule_id: rule_id.into(),
            title: rule_id.into(),
            no_automation: false,
            automations: vec![ConcreteAutomation::Registry(RegistryAutomation {
                config: ConfigScope::Computer,
                registry_key: "Software\\Policies\\Microsoft\\FVE".into(),
                value_name: name.into(),
                action,
                constraints,
            })],
        }
    }

    fn fve_rulepack() -> Rulepack {
        Rulepack {
            guide_id: "g".into(),
            profile_id: "p".into(),
            entries: vec![RulepackEntry {
                rule_id: "BL942-1101".into(),
                title: "t".into(),
                no_automation: false,
                automations: vec![
                    ConcreteAutomation::Registry(RegistryAutomation {
                        config: ConfigScope::Computer,
                        registry_key: "Software\\Policies\\Microsoft\\FVE".into(),
                        value_name: "RDVPassphrase".into(),
                        action: TypedAction::Dword(1),
                        constraints: None,
                    }),
                    ConcreteAutomation::Registry(RegistryAutomation {
                        config: ConfigScope::Computer,
                        registry_key: "Software\\Policies\\Microsoft\\FVE".into(),
                        value_name: "RDVPassphraseComplexity".into(),
                        action: TypedAction::Dword(1),
                        constraints: None,
                    }),
                    ConcreteAutomation::Registry(RegistryAutomation {
                        config: ConfigScope::Computer,
                        registry_key: "Software\\Policies\\Microsoft\\FVE".into(),
                        value_name: "RDVPassphraseLength".into(),
                        action: TypedAction::Dword(15),
                        constraints: Some(Constraint {
                            min: Some(15),
                            max: None,
                        }),
                    }),
                ],
            }],
        }
    }

    fn fve_store(target: &mut TargetState, passphrase: i64, complexity: i64, length: i64) {
        for (name, value) in [
            ("RDVPassphrase", passphrase),
            ("RDVPassphraseComplexity", complexity),
            ("RDVPassphraseLength", length),
        ] {
            target
                .write_value(
                    RegistryPath::new(
                        ConfigScope::Computer,
                        "Software\\Policies\\Microsoft\\FVE",
                        name,
                    ),
                    TypedAction::Dword(value),
                )
                .unwrap();
        }
    }

    #[test]
    fn constraint_makes_larger_values_compliant() {
        let rulepack = fve_rulepack();
        let mut target = TargetState::new();
        fve_store(&mut target, 1, 1, 20);
        let run = check_all(&rulepack, &target, &[], "check");
        assert_eq!(
            run.per_rule["BL942-1101"].category,
            CheckCategory::Compliant
        );
    }

    #[test]
    fn empty_store_checks_empty() {
        let rulepack = fve_rulepack();
        let target = TargetState::new();
        let run = check_all(&rulepack, &target, &[], "check");
        assert_eq!(run.per_rule["BL942-1101"].category, CheckCategory::Empty);
    }

    #[test]
    fn short_length_checks_non_compliant() {
        let rulepack = fve_rulepack();
        let mut target = TargetState::new();
        fve_store(&mut target, 1, 1, 14);
        let run = check_all(&rulepack, &target, &[], "check");
        assert_eq!(
            run.per_rule["BL942-1101"].category,
            CheckCategory::NonCompliant
        );

        // brute-force oracle: categorize by scanning every triple directly
        let entry = &rulepack.entries[0];
        let mut any_violation = false;
        let mut any_absent = false;
        for automation in entry.registry_automations() {
            match target.read_value(&registry_path(automation)).unwrap() {
                None => any_absent = true,
                Some(value) => {
                    let ok = match (&automation.constraints, value) {
                        (Some(c), TypedAction::Dword(n)) => c.contains(*n),
                        (Some(_), _) => false,
                        (None, v) => v == &automation.action,
                    };
                    if !ok {
                        any_violation = true;
                    }
                }
            }
        }
        let expected = if any_violation {
            CheckCategory::NonCompliant
        } else if any_absent {
            CheckCategory::Empty
        } else {
            CheckCategory::Compliant
        };
        assert_eq!(run.per_rule["BL942-1101"].category, expected);
    }

    #[test]
    fn violation_dominates_missing_siblings() {
        let rulepack = fve_rulepack();
        let mut target = TargetState::new();
        target
            .write_value(
                RegistryPath::new(
                    ConfigScope::Computer,
                    "Software\\Policies\\Microsoft\\FVE",
                    "RDVPassphrase",
                ),
                TypedAction::Dword(0),
            )
            .unwrap();
        let run = check_all(&rulepack, &target, &[], "check");
        assert_eq!(
            run.per_rule["BL942-1101"].category,
            CheckCategory::NonCompliant
        );
    }

    #[test]
    fn type_mismatch_is_non_compliant() {
        let rulepack = fve_rulepack();
        let mut target = TargetState::new();
        fve_store(&mut target, 1, 1, 15);
        target
            .write_value(
                RegistryPath::new(
                    ConfigScope::Computer,
                    "Software\\Policies\\Microsoft\\FVE",
                    "RDVPassphrase",
                ),
                TypedAction::Sz("1".into()),
            )
            .unwrap();
        let run = check_all(&rulepack, &target, &[], "check");
        assert_eq!(
            run.per_rule["BL942-1101"].category,
            CheckCategory::NonCompliant
        );
    }

    fn script_entry(rule_id: &str, script: &str) -> RulepackEntry {
        RulepackEntry {
            rule_id: rule_id.into(),
            title: rule_id.into(),
            no_automation: false,
            automations: vec![ConcreteAutomation::Script(ScriptAutomation {
                script: script.into(),
                expected: ExpectedOutput {
                    output_processor: OutputProcessor::FormatList,
                    each_item: EachItem {
                        key: "FileSystemType".into(),
                        equal_to: "NTFS".into(),
                    },
                },
            })],
        }
    }

    #[test]
    fn script_records_all_matching_is_compliant() {
        let rulepack = Rulepack {
            guide_id: "g".into(),
            profile_id: "p".into(),
            entries: vec![script_entry("S1", "Get-Volume")],
        };
        let mut target = TargetState::new();
        target.register_script(
            "Get-Volume",
            crate::target::ScriptBehavior::Output {
                output: "Size : 2147483648\nFileSystemType : NTFS\n\nSize : 5368709120\nFileSystemType : NTFS".into(),
            },
        );
        let run = check_all(&rulepack, &target, &[], "check");
        assert_eq!(run.per_rule["S1"].category, CheckCategory::Compliant);
    }

    #[test]
    fn script_verdicts_cover_mismatch_error_and_vacuous_cases() {
        let rulepack = Rulepack {
            guide_id: "g".into(),
            profile_id: "p".into(),
            entries: vec![
                script_entry("mismatch", "A"),
                script_entry("missing_key", "B"),
                script_entry("vacuous", "C"),
                script_entry("failing", "D"),
                script_entry("unregistered", "E"),
                script_entry("unparseable", "F"),
            ],
        };
        let mut target = TargetState::new();
        target.register_script(
            "A",
            crate::target::ScriptBehavior::Output {
                output: "FileSystemType : FAT32".into(),
            },
        );
        target.register_script(
            "B",
            crate::target::ScriptBehavior::Output {
                output: "Size : 1".into(),
            },
        );
        target.register_script(
            "C",
            crate::target::ScriptBehavior::Output { output: "".into() },
        );
        target.register_script(
            "D",
            crate::target::ScriptBehavior::Failure {
                failure: "access denied".into(),
            },
        );
        target.register_script(
            "F",
            crate::target::ScriptBehavior::Output {
                output: "no separator here".into(),
            },
        );
        let run = check_all(&rulepack, &target, &[], "check");
        assert_eq!(
            run.per_rule["mismatch"].category,
            CheckCategory::NonCompliant
        );
        assert_eq!(
            run.per_rule["missing_key"].category,
            CheckCategory::NonCompliant
        );
        assert_eq!(run.per_rule["vacuous"].category, CheckCategory::Compliant);
        assert_eq!(run.per_rule["failing"].category, CheckCategory::Unknown);
        assert_eq!(
            run.per_rule["unregistered"].category,
            CheckCategory::Unknown
        );
        assert_eq!(run.per_rule["unparseable"].category, CheckCategory::Unknown);
    }

    fn numbered_rulepack(n: usize) -> Rulepack {
        Rulepack {
            guide_id: "g".into(),
            profile_id: "p".into(),
            entries: (1..=n)
                .map(|i| {
                    reg_entry(
                        &format!("R{i}"),
                        &format!("V{i}"),
                        TypedAction::Dword(i as i64),
                        None,
                    )
                })
                .collect(),
        }
    }

    #[test]
    fn apply_then_check_is_all_compliant_and_revert_restores() {
        let rulepack = numbered_rulepack(5);
        let mut target = TargetState::new();
        target
            .write_value(
                RegistryPath::new(
                    ConfigScope::Computer,
                    "Software\\Policies\\Microsoft\\FVE",
                    "V2",
                ),
                TypedAction::Dword(99),
            )
            .unwrap();
        let snapshot = target.snapshot();

        let apply = apply_all(&rulepack, &mut target, &[], &ApplyMode::Bulk, "apply");
        assert_eq!(apply.applied.len(), 5);
        assert!(apply.failure.is_none());
        // the overwritten value is in the backups
        assert_eq!(
            apply.backups["R2"][0].previous,
            Some(TypedAction::Dword(99))
        );

        let check = check_all(&rulepack, &target, &[], "check");
        for id in &apply.applied {
            assert_eq!(check.per_rule[id].category, CheckCategory::Compliant);
        }

        let revert = revert_all(&rulepack, &mut target, &apply.backups, "revert");
        assert_eq!(revert.reverted.len(), 5);
        assert_eq!(target.store_snapshot(), snapshot.store_snapshot());
    }

    #[test]
    fn blacklist_skips_every_rule() {
        let rulepack = numbered_rulepack(3);
        let mut target = TargetState::new();
        let blacklist: Vec<String> = rulepack.rule_ids().map(String::from).collect();
        let run = apply_all(
            &rulepack,
            &mut target,
            &blacklist,
            &ApplyMode::Bulk,
            "apply",
        );
        assert!(run.applied.is_empty());
        assert_eq!(run.not_applied.len(), 3);
        assert!(run
            .not_applied
            .values()
            .all(|r| *r == NotAppliedReason::Blacklisted));
        assert!(target.store_snapshot().is_empty());
    }

    #[test]
    fn blacklisted_triples_are_never_written() {
        let rulepack = numbered_rulepack(3);
        let mut target = TargetState::new();
        let run = apply_all(
            &rulepack,
            &mut target,
            &["R2".into()],
            &ApplyMode::Bulk,
            "apply",
        );
        assert_eq!(run.applied, ["R1", "R3"]);
        assert!(target
            .read_value(&RegistryPath::new(
                ConfigScope::Computer,
                "Software\\Policies\\Microsoft\\FVE",
                "V2"
            ))
            .unwrap()
            .is_none());
    }

    #[test]
    fn one_by_one_and_bulk_agree_without_disruption() {
        let rulepack = numbered_rulepack(6);
        let mut bulk_target = TargetState::new();
        let mut obo_target = TargetState::new();
        apply_all(&rulepack, &mut bulk_target, &[], &ApplyMode::Bulk, "apply");
        apply_all(
            &rulepack,
            &mut obo_target,
            &[],
            &ApplyMode::OneByOne { start_at: None },
            "apply",
        );
        assert_eq!(bulk_target.store_snapshot(), obo_target.store_snapshot());
    }

    fn disrupted_target(rule_index: usize) -> TargetState {
        let mut target = TargetState::new();
        target.add_disruptor(RegistryPath::new(
            ConfigScope::Computer,
            "Software\\Policies\\Microsoft\\FVE",
            format!("V{rule_index}"),
        ));
        target
    }

    #[test]
    fn failure_is_attributed_to_the_last_successful_rule() {
        let rulepack = numbered_rulepack(6);
        let mut target = disrupted_target(4);
        let run = apply_all(
            &rulepack,
            &mut target,
            &[],
            &ApplyMode::OneByOne { start_at: None },
            "apply",
        );
        let failure = run.failure.expect("apply must fail");
        assert_eq!(failure.rule_id.as_deref(), Some("R4"));
        assert_eq!(run.applied, ["R1", "R2", "R3", "R4"]);
        assert_eq!(run.not_applied["R5"], NotAppliedReason::Aborted);
        assert_eq!(run.not_applied["R6"], NotAppliedReason::Aborted);
    }

    #[test]
    fn bulk_mode_does_not_attribute() {
        let rulepack = numbered_rulepack(6);
        let mut target = disrupted_target(4);
        let run = apply_all(&rulepack, &mut target, &[], &ApplyMode::Bulk, "apply");
        assert_eq!(run.failure.expect("apply must fail").rule_id, None);
    }

    #[test]
    fn rerun_after_blacklist_applies_the_tail() {
        let rulepack = numbered_rulepack(6);
        let blacklist = vec!["R4".to_string()];
        let mut target = disrupted_target(4);
        let run = apply_all(
            &rulepack,
            &mut target,
            &blacklist,
            &ApplyMode::OneByOne {
                start_at: Some(StartAtSpec::AfterBlacklist),
            },
            "apply",
        );
        assert!(run.failure.is_none());
        assert_eq!(run.applied, ["R5", "R6"]);
        assert_eq!(run.not_applied["R4"], NotAppliedReason::Blacklisted);
        assert_eq!(run.not_applied["R1"], NotAppliedReason::SkippedBeforeStart);

        let check = check_all(&rulepack, &target, &blacklist, "check");
        assert_eq!(check.per_rule.len() + check.blacklisted.len(), 6);
        let total = check.count_in_category(CheckCategory::Compliant)
            + check.count_in_category(CheckCategory::NonCompliant)
            + check.count_in_category(CheckCategory::Empty)
            + check.count_in_category(CheckCategory::Unknown);
        assert_eq!(total, 5);
    }

    #[test]
    fn start_at_a_specific_rule() {
        let rulepack = numbered_rulepack(4);
        let mut target = TargetState::new();
        let run = apply_all(
            &rulepack,
            &mut target,
            &[],
            &ApplyMode::OneByOne {
                start_at: Some(StartAtSpec::Rule("R3".into())),
            },
            "apply",
        );
        assert_eq!(run.applied, ["R3", "R4"]);
        assert_eq!(run.not_applied["R1"], NotAppliedReason::SkippedBeforeStart);
        assert_eq!(run.not_applied["R2"], NotAppliedReason::SkippedBeforeStart);
    }

    #[test]
    fn partial_apply_reverts_cleanly_after_reconnect() {
        // one rule with two writes; the first one trips the disruptor
        let mut entry = reg_entry("R1", "A", TypedAction::Dword(1), None);
        entry
            .automations
            .push(ConcreteAutomation::Registry(RegistryAutomation {
                config: ConfigScope::Computer,
                registry_key: "Software\\Policies\\Microsoft\\FVE".into(),
                value_name: "B".into(),
                action: TypedAction::Dword(2),
                constraints: None,
            }));
        let rulepack = Rulepack {
            guide_id: "g".into(),
            profile_id: "p".into(),
            entries: vec![entry],
        };

        let mut target = TargetState::new();
        target.add_disruptor(RegistryPath::new(
            ConfigScope::Computer,
            "Software\\Policies\\Microsoft\\FVE",
            "A",
        ));
        let snapshot = target.snapshot();

        let run = apply_all(
            &rulepack,
            &mut target,
            &[],
            &ApplyMode::OneByOne { start_at: None },
            "apply",
        );
        assert_eq!(run.failure.as_ref().unwrap().rule_id.as_deref(), Some("R1"));
        assert_eq!(run.not_applied["R1"], NotAppliedReason::Aborted);
        assert_eq!(run.backups["R1"].len(), 1);

        target.reset_connection();
        let revert = revert_all(&rulepack, &mut target, &run.backups, "revert");
        assert_eq!(revert.reverted, ["R1"]);
        assert_eq!(target.store_snapshot(), snapshot.store_snapshot());
    }

    #[test]
    fn revert_without_backups_reports_no_backup() {
        let rulepack = numbered_rulepack(2);
        let mut target = TargetState::new();
        let run = revert_all(&rulepack, &mut target, &IndexMap::new(), "revert");
        assert!(run.reverted.is_empty());
        assert!(run
            .not_reverted
            .values()
            .all(|r| *r == NotRevertedReason::NoBackup));
    }

    #[test]
    fn overlapping_writes_restore_the_original_value() {
        // two rules writing the same triple with the same action
        let shared = |rule_id: &str| reg_entry(rule_id, "Shared", TypedAction::Dword(7), None);
        let rulepack = Rulepack {
            guide_id: "g".into(),
            profile_id: "p".into(),
            entries: vec![shared("R1"), shared("R2")],
        };
        let mut target = TargetState::new();
        let shared_path = RegistryPath::new(
            ConfigScope::Computer,
            "Software\\Policies\\Microsoft\\FVE",
            "Shared",
        );
        target
            .write_value(shared_path.clone(), TypedAction::Dword(42))
            .unwrap();
        let snapshot = target.snapshot();

        let apply = apply_all(&rulepack, &mut target, &[], &ApplyMode::Bulk, "apply");
        assert_eq!(apply.applied, ["R1", "R2"]);
        revert_all(&rulepack, &mut target, &apply.backups, "revert");
        assert_eq!(target.store_snapshot(), snapshot.store_snapshot());
        assert_eq!(
            target.read_value(&shared_path).unwrap(),
            Some(&TypedAction::Dword(42))
        );
    }

    #[test]
    fn check_partition_covers_all_unblacklisted_rules() {
        let mut rulepack = numbered_rulepack(4);
        rulepack.entries.push(RulepackEntry {
            rule_id: "NOAUTO".into(),
            title: "t".into(),
            no_automation: true,
            automations: vec![],
        });
        let mut target = TargetState::new();
        fve_store(&mut target, 1, 1, 1); // unrelated noise
        target
            .write_value(
                RegistryPath::new(
                    ConfigScope::Computer,
                    "Software\\Policies\\Microsoft\\FVE",
                    "V1",
                ),
                TypedAction::Dword(1),
            )
            .unwrap();
        let run = check_all(&rulepack, &target, &["R3".into()], "check");
        assert_eq!(run.blacklisted, ["R3"]);
        let total = run.count_in_category(CheckCategory::Compliant)
            + run.count_in_category(CheckCategory::NonCompliant)
            + run.count_in_category(CheckCategory::Empty)
            + run.count_in_category(CheckCategory::Unknown);
        assert_eq!(total, rulepack.entries.len() - run.blacklisted.len());
        assert_eq!(run.per_rule["NOAUTO"].category, CheckCategory::Unknown);
    }
}
