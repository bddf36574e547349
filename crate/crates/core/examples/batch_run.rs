//! The runner behind the binary, driven from code: a config is written,
//! two commands run into a scratch directory and the report merges them.

use heatlab::cli::{self, RunConfig};

const CONFIG: &str = r#"
schema_version = 1
seed = 7
backend = "mixture"
dim = 1

[identities]
trials = 8
delta_list = [0.0, 0.5]

[concavity]
q_list = [1.5, 2.0, 3.0, 5.0]
t_list = [0.1, 0.5]
"#;

fn main() -> heatlab::Result<()> {
    let cfg = RunConfig::from_toml(CONFIG)?;
    let root = std::env::temp_dir().join(format!("heatlab-batch-{}", std::process::id()));
    let ids = cli::cmd_verify_identities(&cfg, &root.join("ids"))?;
    println!("verify-identities: {} (exit {})", ids.message, cli::exit_code(&Ok(ids.clone())));
    let scan = cli::cmd_scan_concavity(&cfg, &root.join("scan"))?;
    println!("scan-concavity: {}", scan.message);
    let report = cli::cmd_report(&[root.join("scan"), root.join("ids")], Some(&root.join("report")))?;
    print!("{}", report.message);
    std::fs::remove_dir_all(&root)?;
    Ok(())
}
