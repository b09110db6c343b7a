//! Independent evaluator for the emitted OVAL subset. It parses the XML
//! from scratch and evaluates registry tests against a target, playing the
//! role of an external scanner whose results can be compared with the
//! native checker's.
//!
//! The subset knows `registry_test` (with object and state either inline or
//! referenced) and `unknown_test`, which always evaluates to error. Keys
//! match case-insensitively, names exactly; results use OVAL's three-valued
//! logic where `false` dominates `error` under AND and `true` does under OR.

use crate::automation::{ConfigScope, TypedAction};
use crate::executor::CheckCategory;
use crate::target::TargetState;
use indexmap::IndexMap;
use roxmltree::Node;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, thiserror::Error)]
pub enum OvalError {
    #[error("malformed OVAL document: {0}")]
    MalformedOval(String),
    #[error("dangling reference `{0}`")]
    DanglingReference(String),
    #[error("unsupported OVAL feature: {0}")]
    UnsupportedFeature(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Operator {
    And,
    Or,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CriteriaNode {
    Criteria {
        operator: Operator,
        negate: bool,
        children: Vec<CriteriaNode>,
    },
    Criterion {
        negate: bool,
        test_ref: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeyOp {
    Equals,
    CaseInsensitiveEquals,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueOp {
    Equals,
    GreaterThanOrEqual,
    LessThanOrEqual,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegistryObjectDef {
    pub hive: String,
    pub key: String,
    pub key_op: KeyOp,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateValue {
    pub datatype: String,
    pub operation: ValueOp,
    pub raw: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegistryStateDef {
    pub reg_type: Option<String>,
    pub value: Option<StateValue>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegistryTestDef {
    pub object_ref: String,
    pub state_ref: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OvalTest {
    Registry(RegistryTestDef),
    Unknown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OvalDefinition {
    pub id: String,
    pub rule_id: String,
    pub criteria: CriteriaNode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OvalDoc {
    pub definitions: Vec<OvalDefinition>,
    pub tests: BTreeMap<String, OvalTest>,
    pub objects: BTreeMap<String, RegistryObjectDef>,
    pub states: BTreeMap<String, RegistryStateDef>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OvalVerdict {
    Pass,
    Fail,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvalResult {
    pub per_rule: IndexMap<String, OvalVerdict>,
}

fn attr<'a>(node: &'a Node, name: &str) -> Result<&'a str, OvalError> {
    node.attribute(name).ok_or_else(|| {
        OvalError::MalformedOval(format!(
            "element `{}` lacks attribute `{name}`",
            node.tag_name().name()
        ))
    })
}

fn parse_bool(text: &str) -> Result<bool, OvalError> {
    match text {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(OvalError::MalformedOval(format!("bad boolean `{other}`"))),
    }
}

struct Tables {
    tests: BTreeMap<String, OvalTest>,
    objects: BTreeMap<String, RegistryObjectDef>,
    states: BTreeMap<String, RegistryStateDef>,
}

impl Tables {
    fn insert_test(&mut self, id: String, test: OvalTest) -> Result<(), OvalError> {
        if let Some(existing) = self.tests.get(&id) {
            if existing != &test {
                return Err(OvalError::MalformedOval(format!(
                    "conflicting test id `{id}`"
                )));
            }
        }
        self.tests.insert(id, test);
        Ok(())
    }
}

fn element_children<'a, 'input>(
    node: &'a Node<'a, 'input>,
) -> impl Iterator<Item = Node<'a, 'input>> {
    node.children().filter(|c| c.is_element())
}

fn parse_registry_object(node: &Node) -> Result<(String, RegistryObjectDef), OvalError> {
    let id = attr(node, "id")?.to_string();
    let mut hive = None;
    let mut key = None;
    let mut key_op = KeyOp::Equals;
    let mut name = None;
    for child in element_children(node) {
        let text = child.text().unwrap_or("").trim().to_string();
        match child.tag_name().name() {
            "hive" => {
                if attr(&child, "operation")? != "equals" {
                    return Err(OvalError::UnsupportedFeature("hive operation".into()));
                }
                hive = Some(text);
            }
            "key" => {
                key_op = match attr(&child, "operation")? {
                    "equals" => KeyOp::Equals,
                    "case insensitive equals" => KeyOp::CaseInsensitiveEquals,
                    other => {
                        return Err(OvalError::UnsupportedFeature(format!(
                            "key operation `{other}`"
                        )))
                    }
                };
                key = Some(text);
            }
            "name" => {
                if attr(&child, "operation")? != "equals" {
                    return Err(OvalError::UnsupportedFeature("name operation".into()));
                }
                name = Some(text);
            }
            other => {
                return Err(OvalError::UnsupportedFeature(format!(
                    "registry_object child `{other}`"
                )))
            }
        }
    }
    let object = RegistryObjectDef {
        hive: hive.ok_or_else(|| OvalError::MalformedOval(format!("object `{id}` lacks hive")))?,
        key: key.ok_or_else(|| OvalError::MalformedOval(format!("object `{id}` lacks key")))?,
        key_op,
        name: name.ok_or_else(|| OvalError::MalformedOval(format!("object `{id}` lacks name")))?,
    };
    if object.hive != "HKEY_LOCAL_MACHINE" {
        return Err(OvalError::UnsupportedFeature(format!(
            "hive `{}`",
            object.hive
        )));
    }
    Ok((id, object))
}

fn parse_registry_state(node: &Node) -> Result<(String, RegistryStateDef), OvalError> {
    let id = attr(node, "id")?.to_string();
    let mut reg_type = None;
    let mut value = None;
    for child in element_children(node) {
        let text = child.text().unwrap_or("").trim().to_string();
        match child.tag_name().name() {
            "type" => {
                if attr(&child, "operation")? != "equals" {
                    return Err(OvalError::UnsupportedFeature("type operation".into()));
                }
                reg_type = Some(text);
            }
            "value" => {
                let datatype = attr(&child, "datatype")?.to_string();
                if attr(&child, "entity_check")? != "all" {
                    return Err(OvalError::UnsupportedFeature("value entity_check".into()));
                }
                let operation = match attr(&child, "operation")? {
                    "equals" => ValueOp::Equals,
                    "greater than or equal" => ValueOp::GreaterThanOrEqual,
                    "less than or equal" => ValueOp::LessThanOrEqual,
                    other => {
                        return Err(OvalError::UnsupportedFeature(format!(
                            "value operation `{other}`"
                        )))
                    }
                };
                if datatype != "int" && operation != ValueOp::Equals {
                    return Err(OvalError::UnsupportedFeature(
                        "ordered comparison on non-int value".into(),
                    ));
                }
                value = Some(StateValue {
                    datatype,
                    operation,
                    raw: text,
                });
            }
            other => {
                return Err(OvalError::UnsupportedFeature(format!(
                    "registry_state child `{other}`"
                )))
            }
        }
    }
    Ok((id, RegistryStateDef { reg_type, value }))
}

fn parse_registry_test(node: &Node, tables: &mut Tables) -> Result<String, OvalError> {
    let id = attr(node, "id")?.to_string();
    if attr(node, "check")? != "all" {
        return Err(OvalError::UnsupportedFeature("test check".into()));
    }
    if attr(node, "check_existence")? != "at_least_one_exists" {
        return Err(OvalError::UnsupportedFeature("test check_existence".into()));
    }
    let mut object_ref = None;
    let mut state_ref = None;
    for child in element_children(node) {
        match child.tag_name().name() {
            "registry_object" => {
                let (object_id, object) = parse_registry_object(&child)?;
                tables.objects.insert(object_id.clone(), object);
                object_ref = Some(object_id);
            }
            "registry_state" => {
                let (state_id, state) = parse_registry_state(&child)?;
                tables.states.insert(state_id.clone(), state);
                state_ref = Some(state_id);
            }
            "object" => object_ref = Some(attr(&child, "object_ref")?.to_string()),
            "state" => state_ref = Some(attr(&child, "state_ref")?.to_string()),
            other => {
                return Err(OvalError::UnsupportedFeature(format!(
                    "registry_test child `{other}`"
                )))
            }
        }
    }
    let object_ref = object_ref
        .ok_or_else(|| OvalError::MalformedOval(format!("test `{id}` lacks an object")))?;
    tables.insert_test(
        id.clone(),
        OvalTest::Registry(RegistryTestDef {
            object_ref,
            state_ref,
        }),
    )?;
    Ok(id)
}

fn parse_criteria(node: &Node, tables: &mut Tables) -> Result<CriteriaNode, OvalError> {
    let negate = parse_bool(attr(node, "negate")?)?;
    let operator = match attr(node, "operator")? {
        "AND" => Operator::And,
        "OR" => Operator::Or,
        other => return Err(OvalError::UnsupportedFeature(format!("operator `{other}`"))),
    };
    let mut children = Vec::new();
    for child in element_children(node) {
        match child.tag_name().name() {
            "criteria" => children.push(parse_criteria(&child, tables)?),
            "criterion" => children.push(parse_criterion(&child, tables)?),
            other => {
                return Err(OvalError::UnsupportedFeature(format!(
                    "criteria child `{other}`"
                )))
            }
        }
    }
    if children.is_empty() {
        return Err(OvalError::MalformedOval("criteria without children".into()));
    }
    Ok(CriteriaNode::Criteria {
        operator,
        negate,
        children,
    })
}

fn parse_criterion(node: &Node, tables: &mut Tables) -> Result<CriteriaNode, OvalError> {
    let negate = parse_bool(attr(node, "negate")?)?;
    let test_ref = attr(node, "test_ref")?.to_string();
    for child in element_children(node) {
        match child.tag_name().name() {
            "registry_test" => {
                parse_registry_test(&child, tables)?;
            }
            "unknown_test" => {
                let id = attr(&child, "id")?.to_string();
                tables.insert_test(id, OvalTest::Unknown)?;
            }
            other => {
                return Err(OvalError::UnsupportedFeature(format!(
                    "criterion child `{other}`"
                )))
            }
        }
    }
    Ok(CriteriaNode::Criterion { negate, test_ref })
}

/// Parse an OVAL document of the supported subset, in nested or flat layout.
pub fn parse_oval(bytes: &[u8]) -> Result<OvalDoc, OvalError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| OvalError::MalformedOval(format!("not UTF-8: {e}")))?;
    let doc =
        roxmltree::Document::parse(text).map_err(|e| OvalError::MalformedOval(e.to_string()))?;
    let root = doc.root_element();
    if root.tag_name().name() != "oval_definitions" {
        return Err(OvalError::MalformedOval(format!(
            "unexpected root element `{}`",
            root.tag_name().name()
        )));
    }

    let mut tables = Tables {
        tests: BTreeMap::new(),
        objects: BTreeMap::new(),
        states: BTreeMap::new(),
    };
    let mut definitions = Vec::new();

    for section in element_children(&root) {
        match section.tag_name().name() {
            "generator" => {}
            "definitions" => {
                for node in element_children(&section) {
                    if node.tag_name().name() != "definition" {
                        return Err(OvalError::UnsupportedFeature(format!(
                            "definitions child `{}`",
                            node.tag_name().name()
                        )));
                    }
                    let id = attr(&node, "id")?.to_string();
                    let rule_id = attr(&node, "rule_id")?.to_string();
                    let mut criteria = None;
                    for child in element_children(&node) {
                        match child.tag_name().name() {
                            "criteria" => criteria = Some(parse_criteria(&child, &mut tables)?),
                            other => {
                                return Err(OvalError::UnsupportedFeature(format!(
                                    "definition child `{other}`"
                                )))
                            }
                        }
                    }
                    let criteria = criteria.ok_or_else(|| {
                        OvalError::MalformedOval(format!("definition `{id}` lacks criteria"))
                    })?;
                    definitions.push(OvalDefinition {
                        id,
                        rule_id,
                        criteria,
                    });
                }
            }
            "tests" => {
                for node in element_children(&section) {
                    match node.tag_name().name() {
                        "registry_test" => {
                            parse_registry_test(&node, &mut tables)?;
                        }
                        "unknown_test" => {
                            let id = attr(&node, "id")?.to_string();
                            tables.insert_test(id, OvalTest::Unknown)?;
                        }
                        other => {
                            return Err(OvalError::UnsupportedFeature(format!("test `{other}`")))
                        }
                    }
                }
            }
            "objects" => {
                for node in element_children(&section) {
                    if node.tag_name().name() != "registry_object" {
                        return Err(OvalError::UnsupportedFeature(format!(
                            "object `{}`",
                            node.tag_name().name()
                        )));
                    }
                    let (id, object) = parse_registry_object(&node)?;
                    tables.objects.insert(id, object);
                }
            }
            "states" => {
                for node in element_children(&section) {
                    if node.tag_name().name() != "registry_state" {
                        return Err(OvalError::UnsupportedFeature(format!(
                            "state `{}`",
                            node.tag_name().name()
                        )));
                    }
                    let (id, state) = parse_registry_state(&node)?;
                    tables.states.insert(id, state);
                }
            }
            other => return Err(OvalError::UnsupportedFeature(format!("section `{other}`"))),
        }
    }

    let document = OvalDoc {
        definitions,
        tests: tables.tests,
        objects: tables.objects,
        states: tables.states,
    };
    check_references(&document)?;
    Ok(document)
}

fn walk_criteria<'a>(node: &'a CriteriaNode, refs: &mut Vec<&'a str>) {
    match node {
        CriteriaNode::Criteria { children, .. } => {
            for child in children {
                walk_criteria(child, refs);
            }
        }
        CriteriaNode::Criterion { test_ref, .. } => refs.push(test_ref),
    }
}

fn check_references(doc: &OvalDoc) -> Result<(), OvalError> {
    for definition in &doc.definitions {
        let mut refs = Vec::new();
        walk_criteria(&definition.criteria, &mut refs);
        for test_ref in refs {
            match doc.tests.get(test_ref) {
                None => return Err(OvalError::DanglingReference(test_ref.to_string())),
                Some(OvalTest::Registry(test)) => {
                    if !doc.objects.contains_key(&test.object_ref) {
                        return Err(OvalError::DanglingReference(test.object_ref.clone()));
                    }
                    if let Some(state_ref) = &test.state_ref {
                        if !doc.states.contains_key(state_ref) {
                            return Err(OvalError::DanglingReference(state_ref.clone()));
                        }
                    }
                }
                Some(OvalTest::Unknown) => {}
            }
        }
    }
    Ok(())
}

/// OVAL's three-valued logic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TriState {
    True,
    False,
    Error,
}

impl TriState {
    fn negate(self, negate: bool) -> TriState {
        match (negate, self) {
            (false, v) => v,
            (true, TriState::True) => TriState::False,
            (true, TriState::False) => TriState::True,
            (true, TriState::Error) => TriState::Error,
        }
    }
}

/// Combine criteria children: under AND a false child dominates an error,
/// under OR a true child does.
pub fn combine(operator: Operator, results: &[TriState]) -> TriState {
    match operator {
        Operator::And => {
            if results.contains(&TriState::False) {
                TriState::False
            } else if results.contains(&TriState::Error) {
                TriState::Error
            } else {
                TriState::True
            }
        }
        Operator::Or => {
            if results.contains(&TriState::True) {
                TriState::True
            } else if results.contains(&TriState::Error) {
                TriState::Error
            } else {
                TriState::False
            }
        }
    }
}

/// Evaluate a criteria tree against a test-result lookup.
pub fn eval_criteria(node: &CriteriaNode, lookup: &dyn Fn(&str) -> TriState) -> TriState {
    match node {
        CriteriaNode::Criterion { negate, test_ref } => lookup(test_ref).negate(*negate),
        CriteriaNode::Criteria {
            operator,
            negate,
            children,
        } => {
            let results: Vec<TriState> =
                children.iter().map(|c| eval_criteria(c, lookup)).collect();
            combine(*operator, &results).negate(*negate)
        }
    }
}

fn state_matches(state: &RegistryStateDef, action: &TypedAction) -> bool {
    if let Some(reg_type) = &state.reg_type {
        let actual = match action {
            TypedAction::Dword(_) => "reg_dword",
            TypedAction::Sz(_) => "reg_sz",
        };
        if reg_type != actual {
            return false;
        }
    }
    match &state.value {
        None => true,
        Some(value) if value.datatype == "int" => {
            let (TypedAction::Dword(actual), Ok(expected)) = (action, value.raw.parse::<i64>())
            else {
                return false;
            };
            match value.operation {
                ValueOp::Equals => *actual == expected,
                ValueOp::GreaterThanOrEqual => *actual >= expected,
                ValueOp::LessThanOrEqual => *actual <= expected,
            }
        }
        Some(value) => match action {
            TypedAction::Sz(actual) => actual == &value.raw,
            TypedAction::Dword(_) => false,
        },
    }
}

fn eval_registry_test(doc: &OvalDoc, test: &RegistryTestDef, target: &TargetState) -> TriState {
    let Ok(entries) = target.entries() else {
        return TriState::Error;
    };
    // cross-references were checked at parse time
    let object = &doc.objects[&test.object_ref];
    let matches: Vec<&TypedAction> = entries
        .filter(|(path, _)| {
            path.config == ConfigScope::Computer
                && path.value_name == object.name
                && match object.key_op {
                    KeyOp::Equals => path.registry_key == object.key,
                    KeyOp::CaseInsensitiveEquals => {
                        path.registry_key.eq_ignore_ascii_case(&object.key)
                    }
                }
        })
        .map(|(_, action)| action)
        .collect();
    if matches.is_empty() {
        // check_existence="at_least_one_exists"
        return TriState::False;
    }
    match test.state_ref.as_ref().map(|id| &doc.states[id]) {
        None => TriState::True,
        Some(state) => {
            // check="all": every collected value must satisfy the state
            if matches.iter().all(|action| state_matches(state, action)) {
                TriState::True
            } else {
                TriState::False
            }
        }
    }
}

/// Evaluate every definition of the document against the target.
pub fn evaluate(doc: &OvalDoc, target: &TargetState) -> OvalResult {
    let lookup = |test_ref: &str| match doc.tests.get(test_ref) {
        Some(OvalTest::Registry(test)) => eval_registry_test(doc, test, target),
        Some(OvalTest::Unknown) | None => TriState::Error,
    };
    let mut per_rule = IndexMap::new();
    for definition in &doc.definitions {
        let verdict = match eval_criteria(&definition.criteria, &lookup) {
            TriState::True => OvalVerdict::Pass,
            TriState::False => OvalVerdict::Fail,
            TriState::Error => OvalVerdict::Error,
        };
        per_rule.insert(definition.rule_id.clone(), verdict);
    }
    OvalResult { per_rule }
}

/// Align scanner verdicts with the native check categories. OVAL cannot
/// express `empty`: an absent setting fails its existence check, so it
/// surfaces as non-compliant here rather than empty.
pub fn to_check_categories(result: &OvalResult) -> IndexMap<String, CheckCategory> {
    result
        .per_rule
        .iter()
        .map(|(rule_id, verdict)| {
            let category = match verdict {
                OvalVerdict::Pass => CheckCategory::Compliant,
                OvalVerdict::Fail => CheckCategory::NonCompliant,
                OvalVerdict::Error => CheckCategory::Unknown,
            };
            (rule_id.clone(), category)
        })
        .collect()
}
