//! Round-trip properties of the rule-document format over randomly
//! generated valid rules, plus determinism of guide loading.

use indexmap::IndexMap;
use proptest::prelude::*;
use scapolite_core::automation::{
    Automation, CompoundAutomation, Constraint, EachItem, ExpectedOutput, GpoValue, MainSetting,
    OptionValue, OutputProcessor, RegistryAutomation, ScriptAutomation, TypedAction,
    WinGpoAutomation,
};
use scapolite_core::guide::{
    parse_rule_document, serialize_rule_document, HistoryAction, HistoryEntry, Implementation,
    ScapoliteClass, ScapoliteRule,
};
use std::path::{Path, PathBuf};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn free_line() -> impl Strategy<Value = String> {
    "[A-Za-z0-9][A-Za-z0-9 ,.()'`*-]{0,40}".prop_map(|s| s.trim().to_string())
}

fn markdown_body() -> impl Strategy<Value = String> {
    proptest::collection::vec(free_line(), 0..4).prop_map(|lines| lines.join("\n"))
}

fn action_strategy() -> impl Strategy<Value = TypedAction> {
    prop_oneof![
        (-1000i64..100000).prop_map(TypedAction::Dword),
        "[A-Za-z0-9 ]{0,12}".prop_map(TypedAction::Sz),
    ]
}

fn constraint_strategy() -> impl Strategy<Value = Constraint> {
    (-50i64..50, 0i64..40, 0u8..3).prop_map(|(base, width, kind)| match kind {
        0 => Constraint {
            min: Some(base),
            max: None,
        },
        1 => Constraint {
            min: None,
            max: Some(base),
        },
        _ => Constraint {
            min: Some(base),
            max: Some(base + width),
        },
    })
}

fn registry_strategy() -> impl Strategy<Value = Automation> {
    (
        "[A-Za-z]{3,10}",
        "[A-Za-z]{3,14}",
        action_strategy(),
        proptest::option::of(constraint_strategy()),
    )
        .prop_map(|(key_root, value_name, action, constraints)| {
            Automation::Registry(RegistryAutomation {
                config: Default::default(),
                registry_key: format!("Software\\{key_root}\\Settings"),
                value_name,
                action,
                constraints,
            })
        })
}

fn script_strategy() -> impl Strategy<Value = Automation> {
    (
        "[A-Za-z][A-Za-z0-9 .$|-]{4,30}",
        "[A-Za-z]{2,10}",
        "[A-Za-z0-9]{1,10}",
    )
        .prop_map(|(script, key, equal_to)| {
            Automation::Script(ScriptAutomation {
                script: script.trim().to_string(),
                expected: ExpectedOutput {
                    output_processor: OutputProcessor::FormatList,
                    each_item: EachItem { key, equal_to },
                },
            })
        })
}

fn gpo_strategy() -> impl Strategy<Value = Automation> {
    let option_name = "[A-Za-z][A-Za-z ]{2,18}".prop_map(|s| s.trim().to_string());
    let option_value = prop_oneof![
        (0i64..200).prop_map(OptionValue::Int),
        "[A-Za-z][A-Za-z ]{0,14}".prop_map(|s| OptionValue::Text(s.trim().to_string())),
    ];
    (
        "[A-Za-z]{4,12}",
        prop_oneof![Just(MainSetting::Enabled), Just(MainSetting::Disabled)],
        proptest::collection::vec((option_name, option_value), 0..3),
        proptest::collection::vec(constraint_strategy(), 0..2),
    )
        .prop_map(|(path_root, main_setting, options, constraints)| {
            let options: IndexMap<String, OptionValue> = options.into_iter().collect();
            let int_options: Vec<&String> = options
                .iter()
                .filter(|(_, v)| matches!(v, OptionValue::Int(_)))
                .map(|(k, _)| k)
                .collect();
            let constraints: IndexMap<String, Constraint> = int_options
                .into_iter()
                .zip(constraints)
                .map(|(name, c)| (name.clone(), c))
                .collect();
            Automation::WinGpo(WinGpoAutomation {
                ui_path: format!("Computer Configuration\\...\\{path_root}"),
                value: GpoValue {
                    main_setting,
                    options,
                },
                constraints,
            })
        })
}

fn automation_strategy() -> impl Strategy<Value = Automation> {
    let leaf = prop_oneof![registry_strategy(), script_strategy(), gpo_strategy()];
    prop_oneof![
        registry_strategy(),
        script_strategy(),
        gpo_strategy(),
        proptest::collection::vec(leaf, 1..3)
            .prop_map(|automations| Automation::Compound(CompoundAutomation { automations })),
    ]
}

prop_compose! {
    fn rule_strategy()(
        id in "[A-Z]{2,4}[0-9]{3}-[0-9]{1,4}",
        namespace in "[a-z]{2,5}\\.[a-z]{4,9}",
        version in "0\\.[0-9]{1,2}",
        title in free_line(),
        rule_text in markdown_body(),
        implementations in proptest::collection::vec(
            (markdown_body(), proptest::collection::vec(automation_strategy(), 0..3)),
            0..3,
        ),
        history in proptest::collection::vec(
            ("[0-9]\\.[0-9]", prop_oneof![
                Just(HistoryAction::Created),
                Just(HistoryAction::Modified),
                Just(HistoryAction::Deleted),
            ], free_line()),
            0..3,
        ),
        extras in proptest::collection::vec(("x_[a-z]{2,8}", free_line()), 0..3),
    ) -> ScapoliteRule {
        ScapoliteRule {
            scapolite_class: ScapoliteClass::Rule,
            scapolite_version: version,
            id,
            id_namespace: namespace,
            title,
            rule_text,
            implementations: implementations
                .into_iter()
                .enumerate()
                .map(|(index, (description, automations))| Implementation {
                    relative_id: format!("{:02}", index + 1),
                    description,
                    automations,
                })
                .collect(),
            history: history
                .into_iter()
                .map(|(version, action, description)| HistoryEntry { version, action, description })
                .collect(),
            extra: extras
                .into_iter()
                .map(|(key, value)| (key, serde_yaml::Value::String(value)))
                .collect(),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn parse_inverts_serialize(rule in rule_strategy()) {
        let document = serialize_rule_document(&rule).unwrap();
        let reparsed = parse_rule_document(&document).unwrap();
        prop_assert_eq!(reparsed, rule);
    }

    #[test]
    fn every_section_body_lands_verbatim_in_its_field(rule in rule_strategy()) {
        let document = serialize_rule_document(&rule).unwrap();
        let reparsed = parse_rule_document(&document).unwrap();
        prop_assert_eq!(&reparsed.rule_text, &rule.rule_text);
        for (mine, theirs) in reparsed.implementations.iter().zip(&rule.implementations) {
            prop_assert_eq!(&mine.description, &theirs.description);
        }
    }
}

#[test]
fn fixture_guide_loads_deterministically() {
    let dir = fixtures().join("guide");
    let first = scapolite_core::load_guide(&dir).unwrap();
    let second = scapolite_core::load_guide(&dir).unwrap();
    assert_eq!(first, second);

    let ids: Vec<&str> = first.rules.iter().map(|r| r.id.as_str()).collect();
    assert_eq!(ids.len(), 12);
    assert_eq!(ids[0], "BL942-1101");
    assert_eq!(ids[6], "R18_2_1");

    let first_docs: Vec<String> = first
        .rules
        .iter()
        .map(|r| serialize_rule_document(r).unwrap())
        .collect();
    let second_docs: Vec<String> = second
        .rules
        .iter()
        .map(|r| serialize_rule_document(r).unwrap())
        .collect();
    assert_eq!(first_docs, second_docs);
}

#[test]
fn fixture_rules_roundtrip_through_their_files() {
    let dir = fixtures().join("guide");
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_none_or(|ext| ext != "md") {
            continue;
        }
        let text = std::fs::read_to_string(&path).unwrap();
        let rule = parse_rule_document(&text).unwrap();
        let emitted = serialize_rule_document(&rule).unwrap();
        let reparsed = parse_rule_document(&emitted).unwrap();
        assert_eq!(reparsed, rule, "{} does not round-trip", path.display());
    }
}
