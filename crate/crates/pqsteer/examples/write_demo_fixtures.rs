//! Writes the demo input files (assemblages, functional, reference resource,
//! correlation table) into a directory, ready for the CLI:
//!
//! ```sh
//! cargo run -p pqsteer --example write_demo_fixtures -- fixtures/
//! pqsteer activate --input fixtures/pr_box.json --functional fixtures/shifted_chsh.json
//! ```

use pqsteer::assemblage::tensor;
use pqsteer::certify::{optimal_selftest_correlations, star_assemblage};
use pqsteer::functionals::shifted_chsh_functional;
use pqsteer::quantum::{assemblage_from_model, bipartite_from_model, ghz_model, pr_box_assemblage, sample_bipartite_model};

fn main() {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "fixtures".into());
    std::fs::create_dir_all(&dir).expect("create fixture directory");
    let path = |name: &str| format!("{}/{}", dir, name);

    pr_box_assemblage().save(path("pr_box.json")).unwrap();
    shifted_chsh_functional(2)
        .save(path("shifted_chsh.json"))
        .unwrap();
    assemblage_from_model(&ghz_model(), 2)
        .unwrap()
        .save(path("ghz_baseline.json"))
        .unwrap();

    let reference = star_assemblage();
    reference.save(path("reference_point.json")).unwrap();
    tensor(&pr_box_assemblage(), &reference)
        .unwrap()
        .save(path("pr_box_network.json"))
        .unwrap();

    // A generic quantum bipartite assemblage for the realization round trip.
    bipartite_from_model(&sample_bipartite_model(2, 4, 3, 2, 42), 0)
        .unwrap()
        .save(path("random_bipartite.json"))
        .unwrap();

    optimal_selftest_correlations()
        .save(path("optimal_table.json"))
        .unwrap();

    println!("fixtures written to {}/", dir);
}
