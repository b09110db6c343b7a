//! End-to-end testrun orchestration and reporting.
//!
//! Each testrun gets a fresh target, runs its activities in order, threads
//! apply backups into later reverts, and keeps every activity's result
//! around for compare validations. Testruns are independent and execute on
//! worker threads; the report is assembled in spec order, so output does
//! not depend on scheduling.

use crate::artifact::{analyze_rulepack, emit_oval, Rulepack};
use crate::executor::{
    apply_all, check_all, revert_all, ApplyMode, BackupEntry, CheckRun, RuleCheck, StartAtSpec,
};
use crate::oval::{evaluate, parse_oval, to_check_categories};
use crate::target::TargetState;
use crate::testspec::{
    compute_by_id, compute_compare, compute_count, Activity, ActivityResult, ActivityType,
    ApplyModeSpec, ExpectedValue, ImprovementDirection, KeyDetail, PsSubType, TestSpec, Testrun,
    ValidationOutcome, ValidationStatus, ValidationType, START_AFTER_BLACKLIST,
};
use chrono::{DateTime, Utc};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum RunnerError {
    #[error("testrun `{testrun}`: {message}")]
    ProfileResolution { testrun: String, message: String },
    #[error("no rulepack available for the static activities: {0}")]
    StaticRulepack(String),
    #[error("missing raw result for activity `{0}`")]
    MissingRawResult(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityReport {
    pub activity_id: String,
    pub failure: Option<String>,
    pub outcomes: Vec<ValidationOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestrunReport {
    pub name: String,
    pub failure: Option<String>,
    pub activities: Vec<ActivityReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub started: DateTime<Utc>,
    pub finished: DateTime<Utc>,
    pub static_activities: Vec<ActivityReport>,
    pub testruns: Vec<TestrunReport>,
}

/// Raw per-activity results, keyed `<scope>/<activity_id>` where scope is
/// `static` or the testrun's slug.
pub type RawResults = BTreeMap<String, Vec<u8>>;

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub report: TestReport,
    pub raw: RawResults,
}

pub fn testrun_slug(index: usize, name: &str) -> String {
    let sanitized: String = name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '_'
            }
        })
        .collect();
    format!("testrun{:02}_{sanitized}", index + 1)
}

fn apply_mode_of(activity: &Activity) -> ApplyMode {
    match activity.apply_mode {
        None | Some(ApplyModeSpec::Bulk) => ApplyMode::Bulk,
        Some(ApplyModeSpec::OneByOne) => ApplyMode::OneByOne {
            start_at: activity.start_at.as_ref().map(|start| {
                if start == START_AFTER_BLACKLIST {
                    StartAtSpec::AfterBlacklist
                } else {
                    StartAtSpec::Rule(start.clone())
                }
            }),
        },
    }
}

fn run_ciscat(rulepack: &Rulepack, target: &TargetState, activity: &Activity) -> CheckRun {
    let failure = (!target.is_connected()).then(|| "connection to target lost".to_string());
    let bytes = emit_oval(rulepack);
    let doc = match parse_oval(&bytes) {
        Ok(doc) => doc,
        Err(e) => {
            return CheckRun {
                activity_id: activity.id.clone(),
                per_rule: IndexMap::new(),
                blacklisted: Vec::new(),
                failure: Some(format!("generated check document did not parse: {e}")),
            }
        }
    };
    let categories = to_check_categories(&evaluate(&doc, target));
    let mut per_rule = IndexMap::new();
    let mut blacklisted = Vec::new();
    for (rule_id, category) in categories {
        if activity.blacklist().contains(&rule_id) {
            blacklisted.push(rule_id);
            continue;
        }
        per_rule.insert(
            rule_id,
            RuleCheck {
                category,
                detail: "external check".into(),
            },
        );
    }
    CheckRun {
        activity_id: activity.id.clone(),
        per_rule,
        blacklisted,
        failure,
    }
}

fn merge_backups(
    cumulative: &mut IndexMap<String, Vec<BackupEntry>>,
    new: &IndexMap<String, Vec<BackupEntry>>,
) {
    for (rule_id, entries) in new {
        let slot = cumulative.entry(rule_id.clone()).or_default();
        for entry in entries {
            // the first backup of a path holds the true original value
            if !slot.iter().any(|e| e.path == entry.path) {
                slot.push(entry.clone());
            }
        }
    }
}

fn compute_outcomes(
    activity: &Activity,
    result: &ActivityResult,
    earlier: &IndexMap<String, (ActivityType, ActivityResult)>,
) -> Vec<ValidationOutcome> {
    activity
        .validations
        .iter()
        .map(|validation| match validation.sub_type {
            ValidationType::Count => compute_count(validation, activity, result),
            ValidationType::ById => compute_by_id(validation, activity, result),
            ValidationType::Compare => {
                let compare_with = validation.compare_with.as_deref().unwrap_or_default();
                let (there_type, there_result) = &earlier[compare_with];
                let here = result.check_run().expect("compare on a check activity");
                let there = there_result
                    .check_run()
                    .expect("compare_with a check activity");
                let fold_empty = *there_type != activity.activity_type;
                compute_compare(validation, here, there, fold_empty)
            }
        })
        .collect()
}

fn serialize_result(result: &ActivityResult) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(result).expect("activity result serialization");
    bytes.push(b'\n');
    bytes
}

fn run_testrun(
    testrun: &Testrun,
    rulepack: &Rulepack,
    mut target: TargetState,
) -> (TestrunReport, Vec<(String, Vec<u8>)>) {
    let mut activities = Vec::new();
    let mut raw = Vec::new();
    let mut earlier: IndexMap<String, (ActivityType, ActivityResult)> = IndexMap::new();
    let mut backups: IndexMap<String, Vec<BackupEntry>> = IndexMap::new();

    for activity in &testrun.activities {
        let result = match (activity.activity_type, activity.sub_type) {
            (ActivityType::PsScripts, Some(PsSubType::CheckAll)) => ActivityResult::Check(
                check_all(rulepack, &target, activity.blacklist(), &activity.id),
            ),
            (ActivityType::PsScripts, Some(PsSubType::ApplyAll)) => {
                let run = apply_all(
                    rulepack,
                    &mut target,
                    activity.blacklist(),
                    &apply_mode_of(activity),
                    &activity.id,
                );
                merge_backups(&mut backups, &run.backups);
                ActivityResult::Apply(run)
            }
            (ActivityType::PsScripts, Some(PsSubType::RevertAll)) => {
                let run = revert_all(rulepack, &mut target, &backups, &activity.id);
                backups.clear();
                ActivityResult::Revert(run)
            }
            (ActivityType::Ciscat, _) => {
                ActivityResult::Check(run_ciscat(rulepack, &target, activity))
            }
            (ActivityType::ExamineSferaAutomationJson, _) => {
                ActivityResult::Static(analyze_rulepack(rulepack))
            }
            (ActivityType::PsScripts, None) => unreachable!("validated at parse time"),
        };

        let failure = match &result {
            ActivityResult::Apply(run) => run.failure.as_ref().map(|f| match &f.rule_id {
                Some(rule_id) => format!("{} (attributed to rule {rule_id})", f.message),
                None => f.message.clone(),
            }),
            other => other.failure().map(String::from),
        };

        let outcomes = compute_outcomes(activity, &result, &earlier);
        raw.push((activity.id.clone(), serialize_result(&result)));
        activities.push(ActivityReport {
            activity_id: activity.id.clone(),
            failure,
            outcomes,
        });
        earlier.insert(activity.id.clone(), (activity.activity_type, result));
    }

    // target dropped here: each testrun's instance is destroyed afterwards
    (
        TestrunReport {
            name: testrun.name.clone(),
            failure: None,
            activities,
        },
        raw,
    )
}

/// Execute a test specification: static activities once, then every testrun
/// on its own fresh target. A profile-resolution failure aborts only the
/// affected testrun.
pub fn run_all<R, T>(
    spec: &TestSpec,
    rulepack_for: R,
    target_for: T,
) -> Result<RunOutput, RunnerError>
where
    R: Fn(Option<&str>) -> Result<Rulepack, String> + Sync,
    T: Fn(&Testrun) -> Result<TargetState, String> + Sync,
{
    let started = Utc::now();
    let mut raw: RawResults = BTreeMap::new();

    let mut static_activities = Vec::new();
    if !spec.static_activities.is_empty() {
        let rulepack = rulepack_for(None).map_err(RunnerError::StaticRulepack)?;
        let findings = analyze_rulepack(&rulepack);
        for activity in &spec.static_activities {
            let result = ActivityResult::Static(findings.clone());
            let outcomes = compute_outcomes(activity, &result, &IndexMap::new());
            raw.insert(format!("static/{}", activity.id), serialize_result(&result));
            static_activities.push(ActivityReport {
                activity_id: activity.id.clone(),
                failure: None,
                outcomes,
            });
        }
    }

    let mut testruns: Vec<Option<TestrunReport>> = Vec::new();
    testruns.resize(spec.testruns.len(), None);
    let mut testrun_raw: Vec<Vec<(String, Vec<u8>)>> = Vec::new();
    testrun_raw.resize(spec.testruns.len(), Vec::new());

    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for testrun in &spec.testruns {
            let rulepack_for = &rulepack_for;
            let target_for = &target_for;
            handles.push(scope.spawn(move || {
                let rulepack = match rulepack_for(Some(&testrun.testrun_ps_profile)) {
                    Ok(rulepack) => rulepack,
                    Err(message) => {
                        return (
                            TestrunReport {
                                name: testrun.name.clone(),
                                failure: Some(message),
                                activities: Vec::new(),
                            },
                            Vec::new(),
                        )
                    }
                };
                let target = match target_for(testrun) {
                    Ok(target) => target,
                    Err(message) => {
                        return (
                            TestrunReport {
                                name: testrun.name.clone(),
                                failure: Some(message),
                                activities: Vec::new(),
                            },
                            Vec::new(),
                        )
                    }
                };
                run_testrun(testrun, &rulepack, target)
            }));
        }
        for (index, handle) in handles.into_iter().enumerate() {
            let (report, raw_entries) = handle.join().expect("testrun worker panicked");
            testruns[index] = Some(report);
            testrun_raw[index] = raw_entries;
        }
    });

    for (index, entries) in testrun_raw.into_iter().enumerate() {
        let slug = testrun_slug(index, &spec.testruns[index].name);
        for (activity_id, bytes) in entries {
            raw.insert(format!("{slug}/{activity_id}"), bytes);
        }
    }

    let report = TestReport {
        started,
        finished: Utc::now(),
        static_activities,
        testruns: testruns
            .into_iter()
            .map(|r| r.expect("every testrun reported"))
            .collect(),
    };
    Ok(RunOutput { report, raw })
}

fn render_id_set(ids: &[String]) -> String {
    let quoted: Vec<String> = ids.iter().map(|id| format!("'{id}'")).collect();
    format!("{{{}}}", quoted.join(", "))
}

/// Render one key's deviation as report lines; nothing for a passing or
/// unfilled key. Identifier diffs use the exact four-line layout with the
/// ids in spec-listed order.
pub fn render_difference(
    outcome: &ValidationOutcome,
    category_key: &str,
    improvement: Option<ImprovementDirection>,
) -> Vec<String> {
    let Some(key_outcome) = outcome.key(category_key) else {
        return Vec::new();
    };
    if matches!(
        key_outcome.status,
        ValidationStatus::Pass | ValidationStatus::Unfilled
    ) {
        return Vec::new();
    }
    let severity = match key_outcome.status {
        ValidationStatus::Critical => "CRITICAL",
        ValidationStatus::Degradation => "DEGRADATION",
        ValidationStatus::Improvement => "IMPROVEMENT",
        ValidationStatus::Pass | ValidationStatus::Unfilled => unreachable!(),
    };
    let suffix = match improvement {
        Some(ImprovementDirection::Rise) => " (IMPROVEMENT: 'rise')",
        Some(ImprovementDirection::Fall) => " (IMPROVEMENT: 'fall')",
        None => "",
    };
    let mut lines = Vec::new();
    match &key_outcome.detail {
        KeyDetail::Count { expected, actual } => {
            lines.push(format!(
                "{severity} - Validation failed, DIFFERENT numbers{suffix}!"
            ));
            if let Some(expected) = expected {
                lines.push(format!(
                    "    Expected '{category_key}': {expected}, found: {actual}"
                ));
            }
        }
        KeyDetail::Ids {
            expected,
            actual,
            confirmed,
            expected_not_found,
            found_not_expected,
        } => {
            let same_numbers = expected.as_ref().map(Vec::len) == Some(actual.len());
            let phrase = if same_numbers {
                "SAME numbers, but DIFFERENT IDs"
            } else {
                "DIFFERENT numbers"
            };
            lines.push(format!("{severity} - Validation failed, {phrase}{suffix}!"));
            lines.push(format!(
                "    Expected and confirmed(found) '{category_key}' IDs: {}",
                render_id_set(confirmed)
            ));
            lines.push(format!(
                "    Expected '{category_key}' IDs, but not found: {}",
                render_id_set(expected_not_found)
            ));
            lines.push(format!(
                "    Found '{category_key}' IDs, but not expected: {}",
                render_id_set(found_not_expected)
            ));
        }
    }
    lines
}

/// Overall verdict of a report, in ascending severity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Verdict {
    Ok,
    Improved,
    Degraded,
    Critical,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Ok | Verdict::Improved => 0,
            Verdict::Degraded => 1,
            Verdict::Critical => 3,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Verdict::Ok => "OK",
            Verdict::Improved => "IMPROVED",
            Verdict::Degraded => "DEGRADED",
            Verdict::Critical => "CRITICAL",
        }
    }
}

fn activity_verdict(activity: &ActivityReport) -> Verdict {
    if activity.failure.is_some() {
        return Verdict::Critical;
    }
    activity
        .outcomes
        .iter()
        .map(|outcome| match outcome.status {
            ValidationStatus::Critical => Verdict::Critical,
            ValidationStatus::Degradation => Verdict::Degraded,
            ValidationStatus::Improvement => Verdict::Improved,
            ValidationStatus::Pass | ValidationStatus::Unfilled => Verdict::Ok,
        })
        .max()
        .unwrap_or(Verdict::Ok)
}

pub fn report_verdict(report: &TestReport) -> Verdict {
    let testrun_failures = report
        .testruns
        .iter()
        .filter(|t| t.failure.is_some())
        .map(|_| Verdict::Critical);
    report
        .static_activities
        .iter()
        .chain(report.testruns.iter().flat_map(|t| t.activities.iter()))
        .map(activity_verdict)
        .chain(testrun_failures)
        .max()
        .unwrap_or(Verdict::Ok)
}

fn summary_line(activity: &ActivityReport) -> String {
    if let Some(failure) = &activity.failure {
        return format!("  \u{26a1} {}: {failure}", activity.activity_id);
    }
    let glyph = match activity_verdict(activity) {
        Verdict::Critical => "\u{2717}",
        Verdict::Degraded => "\u{2193}",
        Verdict::Improved => "\u{2191}",
        Verdict::Ok => "\u{2713}",
    };
    let mut deltas = Vec::new();
    for outcome in &activity.outcomes {
        for key in &outcome.keys {
            if matches!(
                key.status,
                ValidationStatus::Pass | ValidationStatus::Unfilled
            ) {
                continue;
            }
            match &key.detail {
                KeyDetail::Count {
                    expected: Some(expected),
                    actual,
                } => deltas.push(format!("{} expected {expected}, actual {actual}", key.key)),
                KeyDetail::Ids {
                    expected: Some(expected),
                    actual,
                    ..
                } => deltas.push(format!(
                    "{} expected {} ids, actual {}",
                    key.key,
                    expected.len(),
                    actual.len()
                )),
                _ => {}
            }
        }
    }
    if deltas.is_empty() {
        format!("  {glyph} {}", activity.activity_id)
    } else {
        format!("  {glyph} {}: {}", activity.activity_id, deltas.join("; "))
    }
}

/// One line per activity with a status glyph plus count deltas, and a final
/// verdict line.
pub fn render_summary(report: &TestReport) -> String {
    let mut out = String::new();
    if !report.static_activities.is_empty() {
        out.push_str("static:\n");
        for activity in &report.static_activities {
            out.push_str(&summary_line(activity));
            out.push('\n');
        }
    }
    for testrun in &report.testruns {
        out.push_str(&format!("testrun '{}':\n", testrun.name));
        if let Some(failure) = &testrun.failure {
            out.push_str(&format!("  \u{26a1} testrun failed: {failure}\n"));
        }
        for activity in &testrun.activities {
            out.push_str(&summary_line(activity));
            out.push('\n');
        }
    }
    out.push_str(&format!("verdict: {}\n", report_verdict(report).label()));
    out
}

fn deviation_blocks(
    spec_activity: &Activity,
    report: &ActivityReport,
    location: &str,
    out: &mut String,
) {
    for (validation, outcome) in spec_activity.validations.iter().zip(&report.outcomes) {
        if matches!(
            outcome.status,
            ValidationStatus::Pass | ValidationStatus::Unfilled
        ) {
            continue;
        }
        for key in &outcome.keys {
            let lines = render_difference(outcome, &key.key, validation.improvement);
            if lines.is_empty() {
                continue;
            }
            out.push_str(&format!(
                "[{location} / {} / {:?}]\n",
                report.activity_id, validation.sub_type
            ));
            for line in lines {
                out.push_str(&line);
                out.push('\n');
            }
        }
    }
}

/// The full deviation report: one block per failing validation key, empty
/// when everything passed.
pub fn render_deviations(spec: &TestSpec, report: &TestReport) -> String {
    let mut out = String::new();
    for (activity, activity_report) in spec.static_activities.iter().zip(&report.static_activities)
    {
        deviation_blocks(activity, activity_report, "static", &mut out);
    }
    for (testrun, testrun_report) in spec.testruns.iter().zip(&report.testruns) {
        for (activity, activity_report) in testrun.activities.iter().zip(&testrun_report.activities)
        {
            deviation_blocks(activity, activity_report, &testrun.name, &mut out);
        }
    }
    out
}

fn render_detailed(report: &TestReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("started:  {}\n", report.started.to_rfc3339()));
    out.push_str(&format!("finished: {}\n", report.finished.to_rfc3339()));
    let mut section = |label: &str, activities: &[ActivityReport], failure: Option<&str>| {
        out.push_str(&format!("\n== {label}\n"));
        if let Some(failure) = failure {
            out.push_str(&format!("  FAILURE: {failure}\n"));
        }
        for activity in activities {
            out.push_str(&format!("activity {}\n", activity.activity_id));
            if let Some(failure) = &activity.failure {
                out.push_str(&format!("  failure: {failure}\n"));
            }
            for (index, outcome) in activity.outcomes.iter().enumerate() {
                out.push_str(&format!("  validation {index}: {:?}\n", outcome.status));
                for key in &outcome.keys {
                    match &key.detail {
                        KeyDetail::Count { expected, actual } => out.push_str(&format!(
                            "    {}: expected {expected:?}, actual {actual}\n",
                            key.key
                        )),
                        KeyDetail::Ids {
                            expected, actual, ..
                        } => out.push_str(&format!(
                            "    {}: expected {:?} ids, actual {} -> {:?}\n",
                            key.key,
                            expected.as_ref().map(Vec::len),
                            actual.len(),
                            key.status
                        )),
                    }
                }
            }
        }
    };
    section("static", &report.static_activities, None);
    let testruns: Vec<(String, Vec<ActivityReport>, Option<String>)> = report
        .testruns
        .iter()
        .map(|t| (t.name.clone(), t.activities.clone(), t.failure.clone()))
        .collect();
    for (name, activities, failure) in &testruns {
        section(name, activities, failure.as_deref());
    }
    out
}

fn updated_expected(
    outcome: &ValidationOutcome,
    authored: Option<&IndexMap<String, ExpectedValue>>,
) -> IndexMap<String, ExpectedValue> {
    let authored_keys: Option<Vec<&String>> = authored.map(|m| m.keys().collect());
    let mut map = IndexMap::new();
    for key in &outcome.keys {
        if let Some(authored_keys) = &authored_keys {
            if !authored_keys.is_empty() && !authored_keys.contains(&&key.key) {
                continue;
            }
        }
        let value = match &key.detail {
            KeyDetail::Count { actual, .. } => ExpectedValue::Count(*actual),
            KeyDetail::Ids { actual, .. } => ExpectedValue::Ids(actual.clone()),
        };
        map.insert(key.key.clone(), value);
    }
    map
}

/// Replace every validation's expected data with the computed actuals.
/// Structure, comments, and improvement directives stay untouched; filled
/// blocks keep their authored key set, unfilled ones gain the activity's
/// whole vocabulary.
pub fn update_spec(spec: &TestSpec, report: &TestReport) -> TestSpec {
    let mut updated = spec.clone();

    let update_activity = |activity: &mut Activity, report: &ActivityReport| {
        for (validation, outcome) in activity.validations.iter_mut().zip(&report.outcomes) {
            match validation.sub_type {
                ValidationType::ById if validation.result.is_some() => {
                    let category = validation.result.as_deref().unwrap_or_default();
                    if let Some(key) = outcome.key(category) {
                        if let KeyDetail::Ids { actual, .. } = &key.detail {
                            validation.check_ids = Some(actual.clone());
                        }
                    }
                }
                ValidationType::Count | ValidationType::ById | ValidationType::Compare => {
                    validation.expected =
                        Some(updated_expected(outcome, validation.expected.as_ref()));
                }
            }
        }
    };

    for (activity, report) in updated
        .static_activities
        .iter_mut()
        .zip(&report.static_activities)
    {
        update_activity(activity, report);
    }
    for (testrun, testrun_report) in updated.testruns.iter_mut().zip(&report.testruns) {
        for (activity, activity_report) in testrun
            .activities
            .iter_mut()
            .zip(&testrun_report.activities)
        {
            update_activity(activity, activity_report);
        }
    }
    updated
}

/// Archived output of one run: detailed log, deviation report, updated
/// spec, and the raw per-activity results.
#[derive(Debug, Clone, PartialEq)]
pub struct StagingBundle {
    pub detailed_log: String,
    pub deviation_report: String,
    pub updated_spec: TestSpec,
    pub raw_results: RawResults,
    pub report: TestReport,
}

/// Assemble the bundle, refusing when any activity's raw result is missing.
pub fn assemble_bundle(
    spec: &TestSpec,
    report: &TestReport,
    raw: &RawResults,
) -> Result<StagingBundle, RunnerError> {
    for activity in &spec.static_activities {
        let key = format!("static/{}", activity.id);
        if !raw.contains_key(&key) {
            return Err(RunnerError::MissingRawResult(key));
        }
    }
    for (index, testrun) in spec.testruns.iter().enumerate() {
        // a testrun that failed before its first activity has no raw output
        if report
            .testruns
            .get(index)
            .is_some_and(|t| t.failure.is_some())
        {
            continue;
        }
        let slug = testrun_slug(index, &testrun.name);
        for activity in &testrun.activities {
            let key = format!("{slug}/{}", activity.id);
            if !raw.contains_key(&key) {
                return Err(RunnerError::MissingRawResult(key));
            }
        }
    }
    Ok(StagingBundle {
        detailed_log: render_detailed(report),
        deviation_report: render_deviations(spec, report),
        updated_spec: update_spec(spec, report),
        raw_results: raw.clone(),
        report: report.clone(),
    })
}

impl StagingBundle {
    /// Write the bundle under `dir`: `detailed.log`, `deviations.txt`, the
    /// updated spec, `summary.txt`, `report.json`, and `raw/<scope>/<id>.json`.
    pub fn write_to(&self, dir: &Path) -> Result<(), RunnerError> {
        let io_err = |path: &Path| {
            let path = path.display().to_string();
            move |source| RunnerError::Io {
                path: path.clone(),
                source,
            }
        };
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let write = |name: &str, bytes: &[u8]| {
            let path = dir.join(name);
            std::fs::write(&path, bytes).map_err(io_err(&path))
        };
        write("detailed.log", self.detailed_log.as_bytes())?;
        write("deviations.txt", self.deviation_report.as_bytes())?;
        write(
            crate::testspec::SPEC_FILE_NAME,
            crate::testspec::emit_test_spec(&self.updated_spec).as_bytes(),
        )?;
        write("summary.txt", render_summary(&self.report).as_bytes())?;
        let mut report_json =
            serde_json::to_vec_pretty(&self.report).expect("report serialization");
        report_json.push(b'\n');
        write("report.json", &report_json)?;
        for (key, bytes) in &self.raw_results {
            let path = dir.join("raw").join(format!("{key}.json"));
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).map_err(io_err(parent))?;
            }
            std::fs::write(&path, bytes).map_err(io_err(&path))?;
        }
        Ok(())
    }
}

/// Build and write the staging bundle in one step.
pub fn build_staging_bundle(
    spec: &TestSpec,
    report: &TestReport,
    raw: &RawResults,
    out_dir: &Path,
) -> Result<StagingBundle, RunnerError> {
    let bundle = assemble_bundle(spec, report, raw)?;
    bundle.write_to(out_dir)?;
    Ok(bundle)
}
