//! Leave-one-out precision@k for the random, Bayesian-network and
//! autoencoder recommenders on 2000 sampled level-1 configurations, printed
//! as CSV.

use autoeng::corpus::{generate_synthetic_hwconfigs, l1_generator_network};
use autoeng::pipeline::{run_hwrec, HwrecConfig, HwrecModelKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = generate_synthetic_hwconfigs(&l1_generator_network(), 2000, 1)?;
    let ks = [1, 3, 5, 9];
    println!("model,{}", ks.map(|k| format!("p@{k}")).join(","));
    for kind in [HwrecModelKind::Random, HwrecModelKind::Bn, HwrecModelKind::Ae] {
        let config = HwrecConfig {
            model: kind,
            seed: 1,
            ..Default::default()
        };
        let run = run_hwrec(&data, &config, &ks)?;
        let cells: Vec<String> = ks.iter().map(|k| format!("{:.3}", run.report.p_at_k[k])).collect();
        println!("{kind},{}", cells.join(","));
    }
    Ok(())
}
