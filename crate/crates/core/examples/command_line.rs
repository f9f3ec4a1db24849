//! Drives the command line in-process: validate, solve, check and project
//! on a small configuration, writing into a temporary directory.

use logkirchhoff::cli::run_command;

const CONFIG: &str = r#"
[model]
a = 1.0
b = 1.0
p = 7.0
lambda = 10.0

[potential]
kind = "step-well"
h0 = 1.0
omega_ball = 1

[truncation]
radius = 6
"#;

fn main() -> logkirchhoff::Result<()> {
    let dir = tempfile::tempdir()?;
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, CONFIG)?;
    let out = dir.path().to_str().unwrap().to_string();
    let cfg = cfg.to_str().unwrap().to_string();
    let nodal = format!("{out}/solve_nodal.json");
    for args in [
        vec!["validate", "-c", &cfg, "--output-dir", &out],
        vec!["solve", "-c", &cfg, "--output-dir", &out],
        vec!["check", "-i", &nodal],
        vec!["project", "-i", &nodal, "--onto", "n"],
    ] {
        println!("$ logkirchhoff {}", args.join(" "));
        let code = run_command(std::iter::once("logkirchhoff").chain(args.iter().copied()));
        println!("exit {code}\n");
    }
    Ok(())
}
