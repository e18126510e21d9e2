//! Generates a typed synthetic task with its control labels and writes both
//! as binary dataset files.
//!
//! cargo run --example gen_datasets -- [out_dir]

use mdl_probe::datasets::{gen_typed_task, make_control_labels, read_dataset, write_dataset, TypedTaskSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("mdl-datasets"), Into::into);
    let spec = TypedTaskSpec {
        n: 2000,
        dim: 16,
        num_classes: 5,
        vocab: 300,
        context_noise: 0.5,
        label_noise: 0.05,
        informative_dims: None,
    };
    let task = gen_typed_task(&spec, 1)?;
    let control = task.with_labels("typed-control", make_control_labels(&task, 2)?)?;

    std::fs::create_dir_all(&out)?;
    for (stem, data) in [("task", &task), ("control", &control)] {
        let (f, l) = (out.join(format!("{stem}.features.bin")), out.join(format!("{stem}.labels.bin")));
        write_dataset(data, &f, &l)?;
        let back = read_dataset(&f, &l)?;
        println!("{stem}: {} examples, d={}, K={}, label counts {:?}", back.len(), back.dim(), back.num_classes, back.label_counts());
    }
    println!("written to {}", out.display());
    Ok(())
}
