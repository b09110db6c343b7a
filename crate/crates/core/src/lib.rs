//! Toolchain for machine-readable security-configuration guides: compiles
//! Scapolite documents into rulepacks and OVAL checks, and executes
//! declarative test specifications against simulated target systems.
//!
//! The pipeline, end to end:
//!
//! 1. [`guide`] parses rule documents and assembles them into a [`Guide`]
//!    with profiles.
//! 2. [`automation`] transforms abstract Windows-policy automations into
//!    concrete registry automations through a [`PolicyCatalog`].
//! 3. [`artifact`] compiles a profile into a [`Rulepack`] plus an OVAL
//!    check document, and runs static analyses over it.
//! 4. [`executor`] applies, checks, and reverts rulepack entries against a
//!    simulated [`TargetState`]; [`oval`] evaluates the generated OVAL
//!    document independently, standing in for an external scanner.
//! 5. [`testspec`] and [`runner`] execute `.scapolite_tests.yml`
//!    specifications and produce reports, difference listings, and updated
//!    expectation files.

pub mod artifact;
pub mod automation;
pub mod executor;
pub mod guide;
pub mod oval;
pub mod runner;
pub mod target;
pub mod testspec;

pub use artifact::{
    analyze_rulepack, build_rulepack, emit_oval, emit_oval_with, emit_rulepack, load_rulepack,
    ArtifactError, OvalLayout, Rulepack, RulepackEntry, StaticFindings,
};
pub use automation::{
    load_policy_catalog, resolve_automations, transform_gpo, Automation, ConcreteAutomation,
    ConfigScope, Constraint, PolicyCatalog, RegistryAutomation, ResolvedAutomations,
    ScriptAutomation, TransformError, TypedAction,
};
pub use executor::{
    apply_all, check_all, revert_all, ApplyMode, ApplyRun, CheckCategory, CheckRun, RevertRun,
    StartAtSpec,
};
pub use guide::{
    load_guide, parse_rule_document, select_profile, serialize_rule_document, Guide, GuideError,
    ProfileDef, ScapoliteRule,
};
pub use oval::{evaluate, parse_oval, to_check_categories, OvalDoc, OvalError, OvalResult};
pub use runner::{
    build_staging_bundle, render_difference, render_summary, report_verdict, run_all, update_spec,
    RunOutput, RunnerError, StagingBundle, TestReport, Verdict,
};
pub use target::{RegistryPath, ScriptBehavior, TargetError, TargetState};
pub use testspec::{
    emit_test_spec, parse_test_spec, ActivityResult, SpecError, TestSpec, ValidationOutcome,
    ValidationStatus, SPEC_FILE_NAME, UPDATED_SPEC_FILE_NAME,
};
