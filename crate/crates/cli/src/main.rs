use clap::{Args, Parser, Subcommand};
use scapolite_cli::{
    cmd_generate, cmd_report, cmd_test, resolve_execute_tests, CliConfig, EXECUTE_TESTS_VAR,
};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "scapolite",
    version,
    about = "Security-configuration guide toolchain"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Guide directory (rule documents plus profiles.yml)
    #[arg(long = "guide")]
    guide_dir: PathBuf,
    /// Policy catalog mapping UI paths to registry settings
    #[arg(long = "catalog")]
    catalog_path: PathBuf,
    /// Output directory
    #[arg(long = "out")]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Compile rulepacks and OVAL check documents for every profile
    Generate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run the guide's test specification
    Test {
        #[command(flatten)]
        common: CommonArgs,
        /// Test specification file (default: <guide>/.scapolite_tests.yml)
        #[arg(long = "spec")]
        spec_path: Option<PathBuf>,
        /// Execute dynamic testruns; the flag overrides EXECUTE_TESTS
        #[arg(long = "execute-tests", num_args = 0..=1, default_missing_value = "true")]
        execute_tests: Option<bool>,
        /// Write the filled expectations beside the spec file
        #[arg(long = "update-spec")]
        update_spec: bool,
        /// Target fixture the testruns execute against
        #[arg(long = "target-fixture")]
        target_fixture: Option<PathBuf>,
    },
    /// Re-render summary and deviations from an archived bundle
    Report {
        /// Bundle directory written by `test`
        #[arg(long = "out")]
        out_dir: PathBuf,
    },
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Generate { common } => cmd_generate(&CliConfig {
            guide_dir: common.guide_dir,
            catalog_path: common.catalog_path,
            spec_path: None,
            out_dir: common.out_dir,
            execute_tests: false,
            update_spec: false,
            target_fixture: None,
        }),
        Command::Test {
            common,
            spec_path,
            execute_tests,
            update_spec,
            target_fixture,
        } => {
            let env_value = std::env::var(EXECUTE_TESTS_VAR).ok();
            cmd_test(&CliConfig {
                guide_dir: common.guide_dir,
                catalog_path: common.catalog_path,
                spec_path,
                out_dir: common.out_dir,
                execute_tests: resolve_execute_tests(execute_tests, env_value.as_deref()),
                update_spec,
                target_fixture,
            })
        }
        Command::Report { out_dir } => cmd_report(&CliConfig {
            guide_dir: PathBuf::new(),
            catalog_path: PathBuf::new(),
            spec_path: None,
            out_dir,
            execute_tests: false,
            update_spec: false,
            target_fixture: None,
        }),
    };
    std::process::exit(code);
}
