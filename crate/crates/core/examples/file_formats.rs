// Write a model, a trajectory and a run manifest, then read them back.

use std::error::Error;

use ncrsm::acceptance::simulate_from_zero;
use ncrsm::io::{self, RunManifest};
use ncrsm::ModelParams;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let dir = std::env::temp_dir().join(format!("ncrsm-formats-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let params = ModelParams::example1();
    let traj = simulate_from_zero(&params, 50, 2)?;

    let model_path = dir.join("model.json");
    let data_path = dir.join("data.csv");
    let manifest_path = dir.join("data.manifest.json");
    io::write_params(&model_path, &params, Some("data.manifest.json"))?;
    io::write_trajectory(&data_path, &traj, Some("data.manifest.json"))?;
    let mut manifest = RunManifest::new("example", serde_json::json!({ "samples": 50 }));
    manifest.seeds.push(2);
    manifest.hash_input(&model_path)?;
    manifest.outputs.push(io::file_name(&data_path));
    manifest.write(&manifest_path)?;

    let (back, reference) = io::read_params(&model_path)?;
    let traj_back = io::read_trajectory(&data_path, None)?;
    println!("model round trip exact: {}", back == params);
    println!("trajectory round trip exact: {}", traj_back == traj);
    println!("artifacts reference {}", reference.unwrap_or_default());
    println!("model sha256 {}", RunManifest::read(&manifest_path)?.input_hashes.values().next().unwrap());
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
