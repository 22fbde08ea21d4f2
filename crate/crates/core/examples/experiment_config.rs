//! Driving the experiment runner from a config string, the way the
//! `driftstab` binary does from a file.

use driftstab::cli::{cmd_check, cmd_stoptimes, ExperimentConfig};

const CONFIG: &str = r#"
[plant]
a = 2.5

[quantizer]
K = 4
B_exp = 2

[channel]
p = 0.9

[run]
T = 10000
n_traj = 8
seed = 1
delta0_idx = 15
"#;

fn main() -> driftstab::Result<()> {
    let cfg = ExperimentConfig::parse(CONFIG)?;
    let dir = std::env::temp_dir().join("driftstab-example");
    let mut out = std::io::stdout();
    let check = cmd_check(&cfg, &dir, &mut out)?;
    let rc = cfg.resolve(None)?;
    let tail = cmd_stoptimes(&rc, 20_000, None, None, &dir, &mut out)?;
    println!("check passed: {}, tail sandwiched: {}", check.passed, tail.passed);
    for p in check.written.iter().chain(&tail.written) {
        println!("wrote {}", p.display());
    }
    Ok(())
}
