//! The test specification file and the validation algebra over activity
//! results.
//!
//! A spec lists testruns, each an ordered sequence of activities; every
//! activity carries declarative validations. A `count` validation checks
//! result counts, `by_id` the concrete rule identifiers behind one count,
//! and `compare` the per-rule differences between two check activities of
//! the same testrun. Expected blocks may be left unfilled on a first run;
//! unfilled validations never fail and get filled by the spec update.

use crate::artifact::StaticFindings;
use crate::executor::{ApplyRun, CheckCategory, CheckRun, RevertRun};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

pub const SPEC_FILE_NAME: &str = ".scapolite_tests.yml";
pub const UPDATED_SPEC_FILE_NAME: &str = ".scapolite_tests.updated.yml";

/// Value of `start_at` selecting the entry after the last blacklisted rule.
pub const START_AFTER_BLACKLIST: &str = "after_blacklist";

pub const CHECK_COUNT_KEYS: [&str; 5] = [
    "blacklist_rules",
    "compliant_checks",
    "non_compliant_checks",
    "empty_checks",
    "unknown_checks",
];
pub const APPLY_COUNT_KEYS: [&str; 2] = ["applied_automations", "not_applied_automations"];
pub const REVERT_COUNT_KEYS: [&str; 2] = ["reverted_rules", "not_reverted_rules"];
pub const STATIC_COUNT_KEYS: [&str; 2] = ["no_automation", "same_setting"];
pub const COMPARE_KEYS: [&str; 6] = [
    "rules_passed_only_here",
    "rules_passed_only_there",
    "rules_failed_only_here",
    "rules_failed_only_there",
    "rules_unknown_only_here",
    "rules_unknown_only_there",
];

#[derive(Debug, thiserror::Error)]
pub enum SpecError {
    #[error("malformed test specification: {0}")]
    MalformedSpec(String),
    #[error("duplicate activity id `{0}`")]
    DuplicateActivityId(String),
    #[error("compare_with `{compare_with}` names no earlier activity (in `{activity}`)")]
    DanglingCompareWith {
        activity: String,
        compare_with: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivityType {
    PsScripts,
    Ciscat,
    ExamineSferaAutomationJson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsSubType {
    CheckAll,
    ApplyAll,
    RevertAll,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApplyModeSpec {
    Bulk,
    OneByOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImprovementDirection {
    Rise,
    Fall,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationType {
    Count,
    ById,
    Compare,
}

/// An expected value: a count or a list of rule ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExpectedValue {
    Count(i64),
    Ids(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Validation {
    pub sub_type: ValidationType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare_with: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub improvement: Option<ImprovementDirection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<IndexMap<String, ExpectedValue>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check_ids: Option<Vec<String>>,
}

impl Validation {
    /// A validation is unfilled when it carries no expected data yet.
    pub fn is_unfilled(&self) -> bool {
        let expected_empty = self.expected.as_ref().is_none_or(|m| m.is_empty());
        match self.sub_type {
            ValidationType::ById if self.result.is_some() => {
                self.check_ids.as_ref().is_none_or(|ids| ids.is_empty())
            }
            _ => expected_empty,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Activity {
    pub id: String,
    #[serde(rename = "type")]
    pub activity_type: ActivityType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sub_type: Option<PsSubType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blacklist_rules: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub apply_mode: Option<ApplyModeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_at: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub validations: Vec<Validation>,
}

impl Activity {
    pub fn blacklist(&self) -> &[String] {
        self.blacklist_rules.as_deref().unwrap_or(&[])
    }

    /// Whether the activity produces per-rule check categories.
    pub fn is_check(&self) -> bool {
        matches!(
            (self.activity_type, self.sub_type),
            (ActivityType::PsScripts, Some(PsSubType::CheckAll)) | (ActivityType::Ciscat, _)
        )
    }

    /// Count keys this activity exposes to validations.
    pub fn count_vocabulary(&self) -> &'static [&'static str] {
        match (self.activity_type, self.sub_type) {
            (ActivityType::PsScripts, Some(PsSubType::ApplyAll)) => &APPLY_COUNT_KEYS,
            (ActivityType::PsScripts, Some(PsSubType::RevertAll)) => &REVERT_COUNT_KEYS,
            (ActivityType::PsScripts, _) | (ActivityType::Ciscat, _) => &CHECK_COUNT_KEYS,
            (ActivityType::ExamineSferaAutomationJson, _) => &STATIC_COUNT_KEYS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Testrun {
    pub name: String,
    pub testrun_ps_profile: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub testrun_ciscat_profile: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub testrun_benchmark_filename: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub activities: Vec<Activity>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub os_family: Option<String>,
    pub os_image: String,
    pub os_image_version: String,
    pub ciscat_version: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub testruns: Vec<Testrun>,
    #[serde(default, rename = "static", skip_serializing_if = "Vec::is_empty")]
    pub static_activities: Vec<Activity>,
}

fn validate_activity(
    activity: &Activity,
    earlier: &[&Activity],
    is_static: bool,
) -> Result<(), SpecError> {
    let id = &activity.id;
    match activity.activity_type {
        ActivityType::PsScripts => {
            if activity.sub_type.is_none() {
                return Err(SpecError::MalformedSpec(format!(
                    "activity `{id}`: ps_scripts requires a sub_type"
                )));
            }
        }
        _ => {
            if activity.sub_type.is_some() {
                return Err(SpecError::MalformedSpec(format!(
                    "activity `{id}`: sub_type is only valid for ps_scripts"
                )));
            }
        }
    }
    if is_static && activity.activity_type != ActivityType::ExamineSferaAutomationJson {
        return Err(SpecError::MalformedSpec(format!(
            "static activity `{id}` must have a static type"
        )));
    }
    let is_apply = activity.sub_type == Some(PsSubType::ApplyAll);
    if activity.blacklist_rules.is_some() && !(activity.is_check() || is_apply) {
        return Err(SpecError::MalformedSpec(format!(
            "activity `{id}`: blacklist_rules only applies to check or apply activities"
        )));
    }
    if (activity.apply_mode.is_some() || activity.start_at.is_some()) && !is_apply {
        return Err(SpecError::MalformedSpec(format!(
            "activity `{id}`: apply_mode/start_at only apply to apply_all activities"
        )));
    }
    if activity.start_at.is_some() && activity.apply_mode != Some(ApplyModeSpec::OneByOne) {
        return Err(SpecError::MalformedSpec(format!(
            "activity `{id}`: start_at requires apply_mode one_by_one"
        )));
    }

    for (index, validation) in activity.validations.iter().enumerate() {
        validate_validation(validation, activity, earlier).map_err(|e| match e {
            SpecError::MalformedSpec(m) => {
                SpecError::MalformedSpec(format!("activity `{id}` validation {index}: {m}"))
            }
            other => other,
        })?;
    }
    Ok(())
}

fn validate_validation(
    validation: &Validation,
    activity: &Activity,
    earlier: &[&Activity],
) -> Result<(), SpecError> {
    match validation.sub_type {
        ValidationType::Compare => {
            let Some(compare_with) = &validation.compare_with else {
                return Err(SpecError::MalformedSpec(
                    "compare requires compare_with".into(),
                ));
            };
            if !activity.is_check() {
                return Err(SpecError::MalformedSpec(
                    "compare validations need a check activity".into(),
                ));
            }
            let target = earlier.iter().find(|a| &a.id == compare_with);
            match target {
                None => {
                    return Err(SpecError::DanglingCompareWith {
                        activity: activity.id.clone(),
                        compare_with: compare_with.clone(),
                    })
                }
                Some(target) if !target.is_check() => {
                    return Err(SpecError::MalformedSpec(format!(
                        "compare_with `{compare_with}` is not a check activity"
                    )))
                }
                Some(_) => {}
            }
            if let Some(expected) = &validation.expected {
                for key in expected.keys() {
                    if !COMPARE_KEYS.contains(&key.as_str()) {
                        return Err(SpecError::MalformedSpec(format!(
                            "unknown compare key `{key}`"
                        )));
                    }
                    if matches!(expected[key], ExpectedValue::Count(_)) {
                        return Err(SpecError::MalformedSpec(format!(
                            "compare key `{key}` must hold an id list"
                        )));
                    }
                }
            }
        }
        ValidationType::Count | ValidationType::ById => {
            if validation.compare_with.is_some() {
                return Err(SpecError::MalformedSpec(
                    "compare_with is only valid on compare validations".into(),
                ));
            }
            let vocabulary = activity.count_vocabulary();
            if let Some(result) = &validation.result {
                if validation.sub_type == ValidationType::Count {
                    return Err(SpecError::MalformedSpec(
                        "result selectors only apply to by_id validations".into(),
                    ));
                }
                if !vocabulary.contains(&result.as_str()) {
                    return Err(SpecError::MalformedSpec(format!(
                        "result `{result}` is not a category of this activity"
                    )));
                }
            }
            if validation.sub_type == ValidationType::ById
                && validation.result.is_none()
                && activity.activity_type != ActivityType::ExamineSferaAutomationJson
            {
                return Err(SpecError::MalformedSpec(
                    "by_id on a dynamic activity requires a result selector".into(),
                ));
            }
            if let Some(expected) = &validation.expected {
                for (key, value) in expected {
                    if !vocabulary.contains(&key.as_str()) {
                        return Err(SpecError::MalformedSpec(format!(
                            "key `{key}` is not in this activity's vocabulary"
                        )));
                    }
                    match (validation.sub_type, value) {
                        (ValidationType::Count, ExpectedValue::Ids(_)) => {
                            return Err(SpecError::MalformedSpec(format!(
                                "count key `{key}` must hold a number"
                            )))
                        }
                        (ValidationType::ById, ExpectedValue::Count(_)) => {
                            return Err(SpecError::MalformedSpec(format!(
                                "by_id key `{key}` must hold an id list"
                            )))
                        }
                        _ => {}
                    }
                }
            }
        }
    }
    Ok(())
}

fn validate_spec(spec: &TestSpec) -> Result<(), SpecError> {
    let mut names = std::collections::BTreeSet::new();
    for testrun in &spec.testruns {
        if !names.insert(&testrun.name) {
            return Err(SpecError::MalformedSpec(format!(
                "duplicate testrun name `{}`",
                testrun.name
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for (index, activity) in testrun.activities.iter().enumerate() {
            if !seen.insert(&activity.id) {
                return Err(SpecError::DuplicateActivityId(activity.id.clone()));
            }
            let earlier: Vec<&Activity> = testrun.activities[..index].iter().collect();
            validate_activity(activity, &earlier, false)?;
        }
    }
    let mut seen = std::collections::BTreeSet::new();
    for activity in &spec.static_activities {
        if !seen.insert(&activity.id) {
            return Err(SpecError::DuplicateActivityId(activity.id.clone()));
        }
        validate_activity(activity, &[], true)?;
    }
    Ok(())
}

pub fn parse_test_spec(text: &str) -> Result<TestSpec, SpecError> {
    let spec: TestSpec =
        serde_yaml::from_str(text).map_err(|e| SpecError::MalformedSpec(e.to_string()))?;
    validate_spec(&spec)?;
    Ok(spec)
}

pub fn emit_test_spec(spec: &TestSpec) -> String {
    serde_yaml::to_string(spec).expect("test spec serialization")
}

/// The result one activity produced, in the shape validations consume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActivityResult {
    Check(CheckRun),
    Apply(ApplyRun),
    Revert(RevertRun),
    Static(StaticFindings),
}

impl ActivityResult {
    pub fn count_for(&self, key: &str) -> Option<i64> {
        let count = match (self, key) {
            (ActivityResult::Check(run), "blacklist_rules") => run.blacklisted.len(),
            (ActivityResult::Check(run), "compliant_checks") => {
                run.count_in_category(CheckCategory::Compliant)
            }
            (ActivityResult::Check(run), "non_compliant_checks") => {
                run.count_in_category(CheckCategory::NonCompliant)
            }
            (ActivityResult::Check(run), "empty_checks") => {
                run.count_in_category(CheckCategory::Empty)
            }
            (ActivityResult::Check(run), "unknown_checks") => {
                run.count_in_category(CheckCategory::Unknown)
            }
            (ActivityResult::Apply(run), "applied_automations") => run.applied.len(),
            (ActivityResult::Apply(run), "not_applied_automations") => run.not_applied.len(),
            (ActivityResult::Revert(run), "reverted_rules") => run.reverted.len(),
            (ActivityResult::Revert(run), "not_reverted_rules") => run.not_reverted.len(),
            (ActivityResult::Static(findings), "no_automation") => findings.no_automation_ids.len(),
            (ActivityResult::Static(findings), "same_setting") => {
                findings.same_setting_groups.len()
            }
            _ => return None,
        };
        Some(count as i64)
    }

    pub fn ids_for(&self, key: &str) -> Option<Vec<String>> {
        match (self, key) {
            (ActivityResult::Check(run), "blacklist_rules") => Some(run.blacklisted.clone()),
            (ActivityResult::Check(run), "compliant_checks") => {
                Some(run.ids_in_category(CheckCategory::Compliant))
            }
            (ActivityResult::Check(run), "non_compliant_checks") => {
                Some(run.ids_in_category(CheckCategory::NonCompliant))
            }
            (ActivityResult::Check(run), "empty_checks") => {
                Some(run.ids_in_category(CheckCategory::Empty))
            }
            (ActivityResult::Check(run), "unknown_checks") => {
                Some(run.ids_in_category(CheckCategory::Unknown))
            }
            (ActivityResult::Apply(run), "applied_automations") => Some(run.applied.clone()),
            (ActivityResult::Apply(run), "not_applied_automations") => {
                Some(run.not_applied.keys().cloned().collect())
            }
            (ActivityResult::Revert(run), "reverted_rules") => Some(run.reverted.clone()),
            (ActivityResult::Revert(run), "not_reverted_rules") => {
                Some(run.not_reverted.keys().cloned().collect())
            }
            (ActivityResult::Static(findings), "no_automation") => {
                Some(findings.no_automation_ids.clone())
            }
            (ActivityResult::Static(findings), "same_setting") => {
                Some(findings.same_setting_rule_ids())
            }
            _ => None,
        }
    }

    pub fn check_run(&self) -> Option<&CheckRun> {
        match self {
            ActivityResult::Check(run) => Some(run),
            _ => None,
        }
    }

    pub fn failure(&self) -> Option<&str> {
        match self {
            ActivityResult::Check(run) => run.failure.as_deref(),
            ActivityResult::Apply(run) => run.failure.as_ref().map(|f| f.message.as_str()),
            ActivityResult::Revert(run) => run.failure.as_deref(),
            ActivityResult::Static(_) => None,
        }
    }
}

/// Severity order: pass < improvement < degradation < critical. Unfilled
/// outcomes stand apart; they never fail a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValidationStatus {
    Pass,
    Unfilled,
    Improvement,
    Degradation,
    Critical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KeyDetail {
    Count {
        expected: Option<i64>,
        actual: i64,
    },
    Ids {
        expected: Option<Vec<String>>,
        actual: Vec<String>,
        confirmed: Vec<String>,
        expected_not_found: Vec<String>,
        found_not_expected: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyOutcome {
    pub key: String,
    pub status: ValidationStatus,
    pub detail: KeyDetail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationOutcome {
    pub status: ValidationStatus,
    pub keys: Vec<KeyOutcome>,
}

impl ValidationOutcome {
    pub fn key(&self, name: &str) -> Option<&KeyOutcome> {
        self.keys.iter().find(|k| k.key == name)
    }
}

/// Classify one key's diff, honoring the improvement directive: an equal
/// result passes, a directed count change is an improvement, identical
/// cardinality with different ids is critical, anything else degrades.
pub fn classify(detail: &KeyDetail, improvement: Option<ImprovementDirection>) -> ValidationStatus {
    let direction_of = |expected: i64, actual: i64| match improvement {
        Some(ImprovementDirection::Rise) if actual > expected => ValidationStatus::Improvement,
        Some(ImprovementDirection::Fall) if actual < expected => ValidationStatus::Improvement,
        _ => ValidationStatus::Degradation,
    };
    match detail {
        KeyDetail::Count { expected: None, .. } => ValidationStatus::Unfilled,
        KeyDetail::Count {
            expected: Some(expected),
            actual,
        } => {
            if expected == actual {
                ValidationStatus::Pass
            } else {
                direction_of(*expected, *actual)
            }
        }
        KeyDetail::Ids { expected: None, .. } => ValidationStatus::Unfilled,
        KeyDetail::Ids {
            expected: Some(expected),
            actual,
            expected_not_found,
            found_not_expected,
            ..
        } => {
            if expected_not_found.is_empty() && found_not_expected.is_empty() {
                ValidationStatus::Pass
            } else if expected.len() == actual.len() {
                ValidationStatus::Critical
            } else {
                direction_of(expected.len() as i64, actual.len() as i64)
            }
        }
    }
}

fn overall_status(keys: &[KeyOutcome], unfilled: bool) -> ValidationStatus {
    if unfilled {
        return ValidationStatus::Unfilled;
    }
    keys.iter()
        .map(|k| k.status)
        .max()
        .unwrap_or(ValidationStatus::Pass)
}

fn ids_detail(expected: Option<&Vec<String>>, actual: Vec<String>) -> KeyDetail {
    match expected {
        None => KeyDetail::Ids {
            expected: None,
            actual,
            confirmed: Vec::new(),
            expected_not_found: Vec::new(),
            found_not_expected: Vec::new(),
        },
        Some(expected) => {
            let confirmed: Vec<String> = expected
                .iter()
                .filter(|id| actual.contains(id))
                .cloned()
                .collect();
            let expected_not_found: Vec<String> = expected
                .iter()
                .filter(|id| !actual.contains(id))
                .cloned()
                .collect();
            let found_not_expected: Vec<String> = actual
                .iter()
                .filter(|id| !expected.contains(id))
                .cloned()
                .collect();
            KeyDetail::Ids {
                expected: Some(expected.clone()),
                actual,
                confirmed,
                expected_not_found,
                found_not_expected,
            }
        }
    }
}

fn key_outcome(
    key: &str,
    detail: KeyDetail,
    improvement: Option<ImprovementDirection>,
) -> KeyOutcome {
    let status = classify(&detail, improvement);
    KeyOutcome {
        key: key.to_string(),
        status,
        detail,
    }
}

/// Diff a count validation against an activity result. An unfilled
/// validation records actuals for the activity's whole vocabulary.
pub fn compute_count(
    validation: &Validation,
    activity: &Activity,
    result: &ActivityResult,
) -> ValidationOutcome {
    let unfilled = validation.is_unfilled();
    let keys: Vec<KeyOutcome> = if unfilled {
        activity
            .count_vocabulary()
            .iter()
            .map(|key| {
                let actual = result.count_for(key).unwrap_or(0);
                key_outcome(
                    key,
                    KeyDetail::Count {
                        expected: None,
                        actual,
                    },
                    validation.improvement,
                )
            })
            .collect()
    } else {
        validation
            .expected
            .as_ref()
            .map(|expected| {
                expected
                    .iter()
                    .map(|(key, value)| {
                        let actual = result.count_for(key).unwrap_or(0);
                        let expected = match value {
                            ExpectedValue::Count(n) => Some(*n),
                            ExpectedValue::Ids(ids) => Some(ids.len() as i64),
                        };
                        key_outcome(
                            key,
                            KeyDetail::Count { expected, actual },
                            validation.improvement,
                        )
                    })
                    .collect()
            })
            .unwrap_or_default()
    };
    ValidationOutcome {
        status: overall_status(&keys, unfilled),
        keys,
    }
}

/// Diff a by_id validation: either `result` + `check_ids` selecting one
/// category, or an expected map of id lists per category key.
pub fn compute_by_id(
    validation: &Validation,
    activity: &Activity,
    result: &ActivityResult,
) -> ValidationOutcome {
    let unfilled = validation.is_unfilled();
    let mut keys = Vec::new();
    if let Some(category) = &validation.result {
        let actual = result.ids_for(category).unwrap_or_default();
        let expected = if unfilled {
            None
        } else {
            validation.check_ids.as_ref()
        };
        keys.push(key_outcome(
            category,
            ids_detail(expected, actual),
            validation.improvement,
        ));
    } else if unfilled {
        for key in activity.count_vocabulary() {
            let actual = result.ids_for(key).unwrap_or_default();
            keys.push(key_outcome(
                key,
                ids_detail(None, actual),
                validation.improvement,
            ));
        }
    } else if let Some(expected) = &validation.expected {
        for (key, value) in expected {
            let actual = result.ids_for(key).unwrap_or_default();
            let expected_ids = match value {
                ExpectedValue::Ids(ids) => Some(ids),
                ExpectedValue::Count(_) => None,
            };
            keys.push(key_outcome(
                key,
                ids_detail(expected_ids, actual),
                validation.improvement,
            ));
        }
    }
    ValidationOutcome {
        status: overall_status(&keys, unfilled),
        keys,
    }
}

fn category_ids(run: &CheckRun, category: CheckCategory, fold_empty: bool) -> Vec<String> {
    let mut ids = run.ids_in_category(category);
    if fold_empty && category == CheckCategory::Unknown {
        // order by the run's per-rule order, not by category
        ids = run
            .per_rule
            .iter()
            .filter(|(_, check)| {
                check.category == CheckCategory::Unknown || check.category == CheckCategory::Empty
            })
            .map(|(id, _)| id.clone())
            .collect();
    }
    ids
}

fn difference(here: &[String], there: &[String]) -> Vec<String> {
    here.iter()
        .filter(|id| !there.contains(id))
        .cloned()
        .collect()
}

/// The six compare lists between two check runs. With `fold_empty`, the
/// empty category folds into unknown on both sides before the differences;
/// used when the two activities come from different check tools.
pub fn compare_lists(
    here: &CheckRun,
    there: &CheckRun,
    fold_empty: bool,
) -> IndexMap<String, Vec<String>> {
    let mut lists = IndexMap::new();
    for (name, category) in [
        ("passed", CheckCategory::Compliant),
        ("failed", CheckCategory::NonCompliant),
        ("unknown", CheckCategory::Unknown),
    ] {
        let here_ids = category_ids(here, category, fold_empty);
        let there_ids = category_ids(there, category, fold_empty);
        lists.insert(
            format!("rules_{name}_only_here"),
            difference(&here_ids, &there_ids),
        );
        lists.insert(
            format!("rules_{name}_only_there"),
            difference(&there_ids, &here_ids),
        );
    }
    lists
}

/// Diff a compare validation between the owning activity's result (`here`)
/// and the compare_with target's (`there`).
pub fn compute_compare(
    validation: &Validation,
    here: &CheckRun,
    there: &CheckRun,
    fold_empty: bool,
) -> ValidationOutcome {
    let lists = compare_lists(here, there, fold_empty);
    let unfilled = validation.is_unfilled();
    let mut keys = Vec::new();
    if unfilled {
        for key in COMPARE_KEYS {
            keys.push(key_outcome(
                key,
                ids_detail(None, lists[key].clone()),
                validation.improvement,
            ));
        }
    } else if let Some(expected) = &validation.expected {
        for (key, value) in expected {
            let actual = lists.get(key).cloned().unwrap_or_default();
            let expected_ids = match value {
                ExpectedValue::Ids(ids) => Some(ids),
                ExpectedValue::Count(_) => None,
            };
            keys.push(key_outcome(
                key,
                ids_detail(expected_ids, actual),
                validation.improvement,
            ));
        }
    }
    ValidationOutcome {
        status: overall_status(&keys, unfilled),
        keys,
    }
}
