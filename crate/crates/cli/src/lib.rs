//! Command implementations behind the `scapolite` binary.
//!
//! `generate` compiles a guide into per-profile rulepacks and OVAL check
//! documents. `test` runs the guide's test specification: static analyses
//! always, dynamic testruns only when test execution is switched on.
//! `report` re-renders the summary and deviation report from an archived
//! bundle without executing anything.

use scapolite_core::runner;
use scapolite_core::testspec::{self, TestSpec};
use scapolite_core::{
    build_rulepack, emit_oval, emit_rulepack, load_guide, load_policy_catalog, parse_test_spec,
    Guide, PolicyCatalog, Rulepack, TargetState,
};
use std::path::{Path, PathBuf};

pub const EXECUTE_TESTS_VAR: &str = "EXECUTE_TESTS";

/// Exit codes: 0 pass, 1 degradations, 2 usage/resolution errors,
/// 3 critical deviations or failures.
pub const EXIT_OK: i32 = 0;
pub const EXIT_DEGRADED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CRITICAL: i32 = 3;

#[derive(Debug, Clone)]
pub struct CliConfig {
    pub guide_dir: PathBuf,
    pub catalog_path: PathBuf,
    /// Defaults to `<guide_dir>/.scapolite_tests.yml`.
    pub spec_path: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub execute_tests: bool,
    pub update_spec: bool,
    pub target_fixture: Option<PathBuf>,
}

impl CliConfig {
    pub fn spec_path(&self) -> PathBuf {
        self.spec_path
            .clone()
            .unwrap_or_else(|| self.guide_dir.join(testspec::SPEC_FILE_NAME))
    }
}

/// The explicit flag wins; otherwise the environment variable enables
/// execution when it is exactly `true`.
pub fn resolve_execute_tests(flag: Option<bool>, env_value: Option<&str>) -> bool {
    match flag {
        Some(value) => value,
        None => env_value == Some("true"),
    }
}

fn load_inputs(cfg: &CliConfig) -> Result<(Guide, PolicyCatalog), String> {
    let guide = load_guide(&cfg.guide_dir).map_err(|e| e.to_string())?;
    if guide.rules.is_empty() {
        return Err(format!(
            "guide directory `{}` contains no rules",
            cfg.guide_dir.display()
        ));
    }
    let catalog_text = std::fs::read_to_string(&cfg.catalog_path)
        .map_err(|e| format!("{}: {e}", cfg.catalog_path.display()))?;
    let catalog = load_policy_catalog(&catalog_text).map_err(|e| e.to_string())?;
    Ok((guide, catalog))
}

/// Compile every profile of the guide into `rulepack_<profile>.json` and
/// `checks_<profile>.oval.xml` under the output directory.
pub fn cmd_generate(cfg: &CliConfig) -> i32 {
    let (guide, catalog) = match load_inputs(cfg) {
        Ok(inputs) => inputs,
        Err(message) => {
            eprintln!("error: {message}");
            return EXIT_USAGE;
        }
    };
    if let Err(e) = std::fs::create_dir_all(&cfg.out_dir) {
        eprintln!("error: {}: {e}", cfg.out_dir.display());
        return EXIT_USAGE;
    }
    for profile_id in guide.profiles.keys() {
        let rulepack = match build_rulepack(&guide, profile_id, &catalog) {
            Ok(rulepack) => rulepack,
            Err(e) => {
                eprintln!("error: profile `{profile_id}`: {e}");
                return EXIT_USAGE;
            }
        };
        let rulepack_path = cfg.out_dir.join(format!("rulepack_{profile_id}.json"));
        let oval_path = cfg.out_dir.join(format!("checks_{profile_id}.oval.xml"));
        if let Err(e) = std::fs::write(&rulepack_path, emit_rulepack(&rulepack)) {
            eprintln!("error: {}: {e}", rulepack_path.display());
            return EXIT_USAGE;
        }
        if let Err(e) = std::fs::write(&oval_path, emit_oval(&rulepack)) {
            eprintln!("error: {}: {e}", oval_path.display());
            return EXIT_USAGE;
        }
        println!(
            "wrote {} and {}",
            rulepack_path.display(),
            oval_path.display()
        );
    }
    EXIT_OK
}

fn static_profile<'a>(spec: &'a TestSpec, guide: &'a Guide) -> Option<&'a str> {
    spec.testruns
        .first()
        .map(|t| t.testrun_ps_profile.as_str())
        .or_else(|| guide.profiles.keys().next().map(String::as_str))
}

/// Run the test specification. Dynamic testruns execute only with
/// `execute_tests`; without it no target is ever constructed.
pub fn cmd_test(cfg: &CliConfig) -> i32 {
    let (guide, catalog) = match load_inputs(cfg) {
        Ok(inputs) => inputs,
        Err(message) => {
            eprintln!("error: {message}");
            return EXIT_USAGE;
        }
    };
    let spec_path = cfg.spec_path();
    let spec_text = match std::fs::read_to_string(&spec_path) {
        Ok(text) => text,
        Err(e) => {
            eprintln!("error: {}: {e}", spec_path.display());
            return EXIT_USAGE;
        }
    };
    let spec = match parse_test_spec(&spec_text) {
        Ok(spec) => spec,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };

    let executed_spec = if cfg.execute_tests {
        spec.clone()
    } else {
        TestSpec {
            testruns: Vec::new(),
            ..spec.clone()
        }
    };
    if cfg.execute_tests && cfg.target_fixture.is_none() {
        eprintln!("error: --target-fixture is required to execute dynamic testruns");
        return EXIT_USAGE;
    }

    let rulepack_for = |profile: Option<&str>| -> Result<Rulepack, String> {
        let profile = match profile {
            Some(profile) => profile,
            None => static_profile(&spec, &guide).ok_or("guide declares no profiles")?,
        };
        build_rulepack(&guide, profile, &catalog).map_err(|e| e.to_string())
    };
    let target_for = |_: &testspec::Testrun| -> Result<TargetState, String> {
        let path = cfg.target_fixture.as_deref().expect("checked above");
        TargetState::from_fixture_path(path).map_err(|e| e.to_string())
    };

    let output = match runner::run_all(&executed_spec, rulepack_for, target_for) {
        Ok(output) => output,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };

    // updating expectations never clobbers the authored file; the filled
    // spec goes to a sibling for review
    if cfg.update_spec {
        let updated = runner::update_spec(&spec, &output.report);
        let updated_path = spec_path.with_file_name(testspec::UPDATED_SPEC_FILE_NAME);
        if let Err(e) = std::fs::write(&updated_path, testspec::emit_test_spec(&updated)) {
            eprintln!("error: {}: {e}", updated_path.display());
            return EXIT_USAGE;
        }
        println!("wrote {}", updated_path.display());
    }

    match runner::build_staging_bundle(&executed_spec, &output.report, &output.raw, &cfg.out_dir) {
        Ok(bundle) => {
            print!("{}", runner::render_summary(&bundle.report));
            runner::report_verdict(&bundle.report).exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

/// Re-render summary and deviations from an archived bundle.
pub fn cmd_report(cfg: &CliConfig) -> i32 {
    let report_path = cfg.out_dir.join("report.json");
    let bytes = match std::fs::read(&report_path) {
        Ok(bytes) => bytes,
        Err(e) => {
            eprintln!("error: {}: {e}", report_path.display());
            return EXIT_USAGE;
        }
    };
    let report: runner::TestReport = match serde_json::from_slice(&bytes) {
        Ok(report) => report,
        Err(e) => {
            eprintln!("error: {}: {e}", report_path.display());
            return EXIT_USAGE;
        }
    };
    print!("{}", runner::render_summary(&report));
    let deviations_path = cfg.out_dir.join("deviations.txt");
    match std::fs::read_to_string(&deviations_path) {
        Ok(deviations) if deviations.is_empty() => println!("no deviations"),
        Ok(deviations) => print!("{deviations}"),
        Err(e) => {
            eprintln!("error: {}: {e}", deviations_path.display());
            return EXIT_USAGE;
        }
    }
    runner::report_verdict(&report).exit_code()
}

/// Errors usable by integration tests that drive the binary.
pub fn workspace_fixture(relative: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(relative)
}
