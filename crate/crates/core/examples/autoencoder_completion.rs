//! A shallow autoencoder over multi-hot hardware vectors. Shows the effect
//! of the L1 penalty on weight mass and a ranked completion.

use autoeng::corpus::{generate_synthetic_hwconfigs, l1_generator_network, HardwareConfig, Level, Taxonomy};
use autoeng::hwrec::{ae_complete, recommend_top_k, train_autoencoder, AutoencoderParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tax = Taxonomy::builtin(Level::L1);
    let data = generate_synthetic_hwconfigs(&l1_generator_network(), 1500, 9)?;

    for l1 in [0.0, 1e-3, 1e-2] {
        let params = AutoencoderParams {
            l1,
            seed: 3,
            ..Default::default()
        };
        let model = train_autoencoder(&data, &params)?;
        let losses = &model.epoch_losses;
        println!(
            "l1={l1:<6} hidden {} loss {:.4} -> {:.4}, |W|_1 = {:.2}",
            model.d_hidden(),
            losses[0],
            losses[losses.len() - 1],
            model.weight_l1_norm()
        );
        if l1 == 0.0 {
            let partial = HardwareConfig::from_slots(Level::L1, &[0, 1]);
            let ranked = recommend_top_k(&ae_complete(&model, &partial)?, 3);
            let names: Vec<String> = ranked
                .iter()
                .map(|(s, v)| format!("{} {v:.3}", tax.categories()[*s]))
                .collect();
            println!("  completion of {:?}: {names:?}", partial.category_names(&tax));
        }
    }
    Ok(())
}
