//! Runs a small architecture sweep from an inline config and prints the
//! summary.

use std::path::Path;

use mdl_probe::experiment::{run_sweep, ExperimentConfig, SweepSummary};

const CONFIG: &str = r#"
name = "sweep-demo"
method = "online"
seeds = [0]
out_dir = "sweep-demo"

[data.synthetic]
n_train = 1500
n_dev = 200
n_test = 200
seed = 3

[data.synthetic.task]
kind = "typed"
dim = 16
num_classes = 5
vocab = 300
context_noise = 0.5
label_noise = 0.05

[probe]
epochs = 30

[sweep]
archs = ["linear", "mlp1", "mlp2"]
hidden = [16, 64]
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let base = std::env::temp_dir();
    let config = ExperimentConfig::from_toml_str(CONFIG, &[])?;
    let path = run_sweep(&config, &base)?;
    let summary: SweepSummary = serde_json::from_str(&std::fs::read_to_string(&path)?)?;
    for entry in &summary.settings {
        let online = &entry.aggregate[0];
        println!(
            "{:<10} {:>7.0} bits, test accuracy {:.3}",
            entry.report.parent().unwrap_or(Path::new("")).display(),
            online.total_bits.mean,
            online.accuracy.mean
        );
    }
    println!("summary at {}", path.display());
    Ok(())
}
