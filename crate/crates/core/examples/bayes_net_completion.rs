//! Learns a level-1 Bayesian network from sampled configurations with exact
//! BIC structure search, then completes a partial hardware list.

use autoeng::corpus::{generate_synthetic_hwconfigs, l1_generator_network, Level, Taxonomy};
use autoeng::hwrec::{bn_conditional, fit_bn_cpts, learn_bn_structure, recommend_top_k, Evidence};
use autoeng::pipeline::config_from_names;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tax = Taxonomy::builtin(Level::L1);
    let truth = l1_generator_network();
    let data = generate_synthetic_hwconfigs(&truth, 3000, 4)?;

    let t = std::time::Instant::now();
    let dag = learn_bn_structure(&data, 12)?;
    println!("structure search over 9 variables took {:.1?}", t.elapsed());
    let net = fit_bn_cpts(&dag, &data)?;
    for v in 0..net.n_vars() {
        let parents: Vec<&str> = dag.parents(v).iter().map(|&p| net.variables()[p].as_str()).collect();
        let true_parents: Vec<&str> =
            truth.dag().parents(v).iter().map(|&p| truth.variables()[p].as_str()).collect();
        println!("{:>24} <- {:?}  (generator: {:?})", net.variables()[v], parents, true_parents);
    }

    let partial = config_from_names(&["Arduino", "Sensors"], &tax)?;
    let scores = bn_conditional(&net, &Evidence::present_only(&partial))?;
    println!("\ngiven {:?}:", partial.category_names(&tax));
    for (slot, p) in recommend_top_k(&scores, 4) {
        println!("  P({} | present) = {p:.3}", tax.categories()[slot]);
    }
    println!("\n{}", net.to_json());
    Ok(())
}
