//! Runs a two-seed experiment, writes `report.json` and turns its learning
//! curves into CSV files.

use mdl_probe::experiment::{emit_curves, run_config, CodelengthReport, ExperimentConfig};

const CONFIG: &str = r#"
name = "curves-demo"
method = "both"
seeds = [0, 1]
out_dir = "curves-demo"

[data.synthetic]
n_train = 1000
n_dev = 200
n_test = 200
seed = 3

[data.synthetic.task]
kind = "typed"
dim = 16
num_classes = 4
vocab = 200
context_noise = 0.5
label_noise = 0.05

[probe]
arch = "mlp1"
hidden = 32
lr = 0.003
epochs = 30

[variational]
lr = 0.01
epochs = 20
samples = 2
"#;

fn main() -> mdl_probe::Result<()> {
    let base = std::env::temp_dir();
    let config = ExperimentConfig::from_toml_str(CONFIG, &[])?;
    let path = run_config(&config, &base)?;
    let report = CodelengthReport::read(&path)?;
    for agg in &report.aggregate {
        println!("{:<12} {:.0} ± {:.0} bits over {} seeds", agg.method, agg.total_bits.mean, agg.total_bits.std, agg.seeds);
    }
    for csv in emit_curves(&path, path.with_file_name("curves"))? {
        println!("wrote {}", csv.display());
    }
    Ok(())
}
