//! Maps raw component names onto both taxonomy levels; unknown names are
//! reported, never guessed.

use autoeng::corpus::{normalize_components, Level, Taxonomy};

fn main() {
    let raw = ["Arduino UNO", "  HC-SR04 ", "16x2 LCD", "flux capacitor", "9V battery"];
    for level in [Level::L1, Level::L2] {
        let tax = Taxonomy::builtin(level);
        let (config, unmapped) = normalize_components(&raw, &tax);
        println!(
            "{level}: {} of {} categories set {:?}, unmapped {unmapped:?}",
            config.count(),
            tax.categories().len(),
            config.category_names(&tax)
        );
    }
}
