use pqsteer::certify::{quantum_nonnegativity_sweep, SweepConfig};
use pqsteer::functionals::{decompose_to_bell, shifted_chsh_functional};
use pqsteer::seesaw::{seesaw_activated_bell, Direction, SeesawConfig};
use std::time::Instant;

fn main() {
    let f = shifted_chsh_functional(2);
    let bell = decompose_to_bell(&f, 1).unwrap();

    let t = Instant::now();
    let cert = quantum_nonnegativity_sweep(&bell, SweepConfig::new(1000, 2024)).unwrap();
    println!("1000 trials: {:.2?}  min={:.3e} pass={}", t.elapsed(), cert.score, cert.pass);

    let t = Instant::now();
    let mut cfg = SeesawConfig::new(vec![2, 2], Direction::Minimize, 31);
    cfg.restarts = 32;
    cfg.max_iterations = 150;
    let o = seesaw_activated_bell(&bell, 0.0, &cfg).unwrap();
    println!("seesaw 32 restarts: {:.2?}  min={:.3e}", t.elapsed(), o.value);
}
