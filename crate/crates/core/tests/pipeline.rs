//! End-to-end runs over the fixture guide: the committed golden spec must
//! pass everywhere, testruns must stay isolated from each other, and the
//! two checkers must agree on registry-backed rules.

use scapolite_core::runner::{report_verdict, run_all, Verdict};
use scapolite_core::testspec::{parse_test_spec, Testrun, ValidationStatus};
use scapolite_core::{
    build_rulepack, load_guide, load_policy_catalog, Guide, PolicyCatalog, Rulepack, TargetState,
};
use std::path::{Path, PathBuf};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn load_fixture_inputs() -> (Guide, PolicyCatalog) {
    let guide = load_guide(&fixtures().join("guide")).unwrap();
    let catalog =
        load_policy_catalog(&std::fs::read_to_string(fixtures().join("catalog.yml")).unwrap())
            .unwrap();
    (guide, catalog)
}

fn rulepack_factory(
    guide: &Guide,
    catalog: &PolicyCatalog,
) -> impl Fn(Option<&str>) -> Result<Rulepack, String> + Sync + 'static {
    let guide = guide.clone();
    let catalog = catalog.clone();
    move |profile: Option<&str>| {
        let profile = profile.unwrap_or("full");
        build_rulepack(&guide, profile, &catalog).map_err(|e| e.to_string())
    }
}

#[test]
fn golden_spec_passes_on_the_clean_target() {
    let (guide, catalog) = load_fixture_inputs();
    let spec_text = std::fs::read_to_string(fixtures().join("guide/.scapolite_tests.yml")).unwrap();
    let spec = parse_test_spec(&spec_text).unwrap();

    let clean = fixtures().join("targets/clean.yml");
    let output = run_all(&spec, rulepack_factory(&guide, &catalog), |_: &Testrun| {
        TargetState::from_fixture_path(&clean).map_err(|e| e.to_string())
    })
    .unwrap();

    assert_eq!(report_verdict(&output.report), Verdict::Ok);
    for testrun in &output.report.testruns {
        assert!(testrun.failure.is_none());
        for activity in &testrun.activities {
            assert!(
                activity.failure.is_none(),
                "{} failed",
                activity.activity_id
            );
            for outcome in &activity.outcomes {
                assert_eq!(
                    outcome.status,
                    ValidationStatus::Pass,
                    "{} has a non-pass outcome",
                    activity.activity_id
                );
            }
        }
    }
    for activity in &output.report.static_activities {
        for outcome in &activity.outcomes {
            assert_eq!(outcome.status, ValidationStatus::Pass);
        }
    }
}

fn apply_check_spec(testrun_names: &[&str]) -> String {
    let mut text = String::from(
        "os_image: SimTarget\nos_image_version: '1'\nciscat_version: sim-oval-1\ntestruns:\n",
    );
    for name in testrun_names {
        text.push_str(&format!(
            "\
- name: {name}
  testrun_ps_profile: full
  activities:
  - id: apply
    type: ps_scripts
    sub_type: apply_all
    apply_mode: one_by_one
  - id: check
    type: ps_scripts
    sub_type: check_all
"
        ));
    }
    text
}

#[test]
fn a_disrupted_testrun_does_not_affect_its_siblings() {
    let (guide, catalog) = load_fixture_inputs();
    let spec = parse_test_spec(&apply_check_spec(&["clean", "broken"])).unwrap();

    let output = run_all(
        &spec,
        rulepack_factory(&guide, &catalog),
        |testrun: &Testrun| {
            let fixture = if testrun.name == "broken" {
                "targets/disruptor.yml"
            } else {
                "targets/clean.yml"
            };
            TargetState::from_fixture_path(&fixtures().join(fixture)).map_err(|e| e.to_string())
        },
    )
    .unwrap();

    let clean = &output.report.testruns[0];
    assert!(clean.activities.iter().all(|a| a.failure.is_none()));

    let broken = &output.report.testruns[1];
    let apply_failure = broken.activities[0].failure.as_deref().unwrap();
    assert!(
        apply_failure.contains("attributed to rule BL942-2003"),
        "unexpected failure text: {apply_failure}"
    );
    // the check after the lost connection also reports the failure
    assert!(broken.activities[1].failure.is_some());

    let summary = scapolite_core::render_summary(&output.report);
    assert!(summary
        .contains("\u{26a1} apply: connection to target lost (attributed to rule BL942-2003)"));

    // rerunning the clean testrun alone yields the identical result
    let spec_single = parse_test_spec(&apply_check_spec(&["clean"])).unwrap();
    let solo_output = run_all(
        &spec_single,
        rulepack_factory(&guide, &catalog),
        |_: &Testrun| {
            TargetState::from_fixture_path(&fixtures().join("targets/clean.yml"))
                .map_err(|e| e.to_string())
        },
    )
    .unwrap();
    assert_eq!(solo_output.report.testruns[0].activities, clean.activities);
}

#[test]
fn native_and_oval_checkers_agree_on_a_populated_store() {
    let (guide, catalog) = load_fixture_inputs();
    let rulepack = build_rulepack(&guide, "full", &catalog).unwrap();

    let mut target = TargetState::from_fixture_path(&fixtures().join("targets/clean.yml")).unwrap();
    scapolite_core::apply_all(
        &rulepack,
        &mut target,
        &[],
        &scapolite_core::ApplyMode::Bulk,
        "apply",
    );

    let native = scapolite_core::check_all(&rulepack, &target, &[], "check");
    let doc = scapolite_core::parse_oval(&scapolite_core::emit_oval(&rulepack)).unwrap();
    let oval = scapolite_core::to_check_categories(&scapolite_core::evaluate(&doc, &target));

    for entry in &rulepack.entries {
        if entry.no_automation || entry.registry_automations().count() == 0 {
            continue;
        }
        assert_eq!(
            native.per_rule[&entry.rule_id].category, oval[&entry.rule_id],
            "checkers disagree on {}",
            entry.rule_id
        );
    }
}

#[test]
fn identical_inputs_produce_identical_reports_and_specs() {
    let (guide, catalog) = load_fixture_inputs();
    let spec_text = std::fs::read_to_string(fixtures().join("guide/.scapolite_tests.yml"))
        .unwrap()
        // break one expectation so the deviation report has content
        .replace("compliant_checks: 1\n", "compliant_checks: 3\n");
    let spec = parse_test_spec(&spec_text).unwrap();

    let run_once = || {
        let clean = fixtures().join("targets/clean.yml");
        let output = run_all(&spec, rulepack_factory(&guide, &catalog), |_: &Testrun| {
            TargetState::from_fixture_path(&clean).map_err(|e| e.to_string())
        })
        .unwrap();
        let deviations = scapolite_core::runner::render_deviations(&spec, &output.report);
        let updated = scapolite_core::update_spec(&spec, &output.report);
        (deviations, scapolite_core::emit_test_spec(&updated))
    };

    let (first_deviations, first_updated) = run_once();
    let (second_deviations, second_updated) = run_once();
    assert!(!first_deviations.is_empty());
    assert_eq!(first_deviations, second_deviations);
    assert_eq!(first_updated, second_updated);
}

#[test]
fn start_after_blacklist_flows_through_the_runner() {
    let (guide, catalog) = load_fixture_inputs();
    let spec = parse_test_spec(
        "\
os_image: SimTarget
os_image_version: '1'
ciscat_version: sim-oval-1
testruns:
- name: resume_after_blacklist
  testrun_ps_profile: full
  activities:
  - id: apply
    type: ps_scripts
    sub_type: apply_all
    blacklist_rules: [BL942-2003]
    apply_mode: one_by_one
    start_at: after_blacklist
  - id: check
    type: ps_scripts
    sub_type: check_all
    blacklist_rules: [BL942-2003]
",
    )
    .unwrap();

    let disruptor = fixtures().join("targets/disruptor.yml");
    let output = run_all(&spec, rulepack_factory(&guide, &catalog), |_: &Testrun| {
        TargetState::from_fixture_path(&disruptor).map_err(|e| e.to_string())
    })
    .unwrap();

    // the culprit is blacklisted and skipped, so nothing fails
    let testrun = &output.report.testruns[0];
    assert!(testrun.activities.iter().all(|a| a.failure.is_none()));
}
