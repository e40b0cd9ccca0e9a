//! Alternating (see-saw) optimization over quantum models: each pass fixes
//! all but one party's effects (or the state) and solves that block exactly
//! as an eigenproblem, so the objective moves monotonically and every
//! iterate is a valid model. The values found are attainable bounds —
//! lower bounds on maxima, upper bounds on minima — never converse bounds.

use rand::RngCore;

use crate::error::{Error, Result};
use crate::functionals::{BellCoefficients, CorrelatorExpression};
use crate::mat::{ComplexMatrix, C64};
use crate::quantum::{
    haar_state_vector, haar_unitary, pauli_steered_elements, rng_from_seed, QuantumModel,
};

const TIE_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Maximize,
    Minimize,
}

#[derive(Clone, Debug)]
pub struct SeesawConfig {
    /// Local dimensions of the optimized parties.
    pub dims: Vec<usize>,
    pub max_iterations: usize,
    /// Convergence threshold on the objective change per iteration.
    pub tolerance: f64,
    pub restarts: usize,
    pub seed: u64,
    pub direction: Direction,
}

impl SeesawConfig {
    pub fn new(dims: Vec<usize>, direction: Direction, seed: u64) -> Self {
        Self {
            dims,
            max_iterations: 500,
            tolerance: 1e-14,
            restarts: 16,
            seed,
            direction,
        }
    }

    fn check(&self) -> Result<()> {
        if self.dims.contains(&0) {
            return Err(Error::InvalidParameter("party dims must be >= 1".into()));
        }
        if self.tolerance <= 0.0 {
            return Err(Error::InvalidParameter("tolerance must be > 0".into()));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidParameter("restarts must be >= 1".into()));
        }
        Ok(())
    }
}

/// Result of a see-saw run: the best value over all restarts, the model
/// attaining it, and the winning restart's objective trajectory.
#[derive(Clone, Debug)]
pub struct SeesawOutcome {
    pub value: f64,
    pub model: QuantumModel,
    pub converged: bool,
    pub iterations: usize,
    pub trajectory: Vec<f64>,
}

/// Deterministic per-restart seeds derived from the master seed.
pub fn random_restart_schedule(config: &SeesawConfig) -> Vec<u64> {
    let mut rng = rng_from_seed(config.seed);
    (0..config.restarts).map(|_| rng.next_u64()).collect()
}

fn better(direction: Direction, candidate: f64, incumbent: f64) -> bool {
    match direction {
        Direction::Maximize => candidate > incumbent,
        Direction::Minimize => candidate < incumbent,
    }
}

fn worst_start(direction: Direction) -> f64 {
    match direction {
        Direction::Maximize => f64::NEG_INFINITY,
        Direction::Minimize => f64::INFINITY,
    }
}

/// Projector onto the eigenspace that improves tr[M G] for a binary split;
/// ties (|λ| ≤ TIE_EPS) are assigned to outcome 0.
fn improving_projector(g: &ComplexMatrix, direction: Direction) -> Result<ComplexMatrix> {
    let eig = g.hermitian_eig()?;
    Ok(match direction {
        Direction::Maximize => eig.eigenspace_projector(|l| l > -TIE_EPS),
        Direction::Minimize => eig.eigenspace_projector(|l| l < TIE_EPS),
    })
}

/// Extremal eigenvector of the objective operator as a pure density matrix.
fn extremal_state(w: &ComplexMatrix, direction: Direction) -> Result<ComplexMatrix> {
    let eig = w.hermitian_eig()?;
    let idx = match direction {
        Direction::Maximize => 0,
        Direction::Minimize => eig.values.len() - 1,
    };
    let col: Vec<C64> = (0..w.dim()).map(|i| eig.vectors[(i, idx)]).collect();
    Ok(ComplexMatrix::outer(&col))
}

/// Random rank-⌈d/2⌉ projector in a Haar-random basis.
fn random_projector(dim: usize, rng: &mut rand_chacha::ChaCha8Rng) -> ComplexMatrix {
    let u = haar_unitary(dim, rng);
    let rank = dim.div_ceil(2);
    ComplexMatrix::from_fn(dim, |i, j| {
        (0..rank).map(|k| u[(i, k)] * u[(j, k)].conj()).sum()
    })
}

fn random_binary_projective(
    dim: usize,
    settings: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Vec<Vec<ComplexMatrix>> {
    (0..settings)
        .map(|_| {
            let p = random_projector(dim, rng);
            let q = ComplexMatrix::identity(dim).sub(&p);
            vec![p, q]
        })
        .collect()
}

/// See-saw over a two-party correlator expression Σ g_zw E_zw: binary
/// projective measurements for both parties and a shared pure state.
pub fn seesaw_correlator(
    expr: &CorrelatorExpression,
    config: &SeesawConfig,
) -> Result<SeesawOutcome> {
    config.check()?;
    if config.dims.len() != 2 {
        return Err(Error::InvalidParameter(
            "correlator see-saw needs exactly two party dims".into(),
        ));
    }
    let (d1, d2) = (config.dims[0], config.dims[1]);
    let dims = [d1, d2];
    let mut best: Option<SeesawOutcome> = None;

    for restart_seed in random_restart_schedule(config) {
        let mut rng = rng_from_seed(restart_seed);
        let mut state = ComplexMatrix::outer(&haar_state_vector(d1 * d2, &mut rng));
        let mut first = random_binary_projective(d1, expr.n_z, &mut rng);
        let mut second = random_binary_projective(d2, expr.n_w, &mut rng);

        let observable = |setting: &[ComplexMatrix]| setting[0].sub(&setting[1]);
        let objective = |state: &ComplexMatrix,
                         first: &[Vec<ComplexMatrix>],
                         second: &[Vec<ComplexMatrix>]|
         -> f64 {
            let mut total = 0.0;
            for z in 0..expr.n_z {
                for w in 0..expr.n_w {
                    if expr.g[z][w] != 0.0 {
                        let op = observable(&first[z]).kron(&observable(&second[w]));
                        total += expr.g[z][w] * op.trace_product(state).re;
                    }
                }
            }
            total
        };

        let mut trajectory = vec![objective(&state, &first, &second)];
        let mut converged = false;
        let mut iterations = 0;
        for _ in 0..config.max_iterations {
            iterations += 1;

            // First party: each setting's observable aligns with its local
            // operator H_z = Σ_w g_zw tr_2[(I ⊗ D_w) ρ].
            let t: Vec<ComplexMatrix> = (0..expr.n_w)
                .map(|w| {
                    ComplexMatrix::identity(d1)
                        .kron(&observable(&second[w]))
                        .matmul(&state)
                        .partial_trace(&dims, &[0])
                        .expect("dims consistent")
                })
                .collect();
            for z in 0..expr.n_z {
                let mut h = ComplexMatrix::zeros(d1);
                for w in 0..expr.n_w {
                    if expr.g[z][w] != 0.0 {
                        h = h.add(&t[w].scale(expr.g[z][w]));
                    }
                }
                let p = improving_projector(&h.symmetrize(), config.direction)?;
                let q = ComplexMatrix::identity(d1).sub(&p);
                first[z] = vec![p, q];
            }

            // Second party.
            let s: Vec<ComplexMatrix> = (0..expr.n_z)
                .map(|z| {
                    observable(&first[z])
                        .kron(&ComplexMatrix::identity(d2))
                        .matmul(&state)
                        .partial_trace(&dims, &[1])
                        .expect("dims consistent")
                })
                .collect();
            for w in 0..expr.n_w {
                let mut h = ComplexMatrix::zeros(d2);
                for z in 0..expr.n_z {
                    if expr.g[z][w] != 0.0 {
                        h = h.add(&s[z].scale(expr.g[z][w]));
                    }
                }
                let p = improving_projector(&h.symmetrize(), config.direction)?;
                let q = ComplexMatrix::identity(d2).sub(&p);
                second[w] = vec![p, q];
            }

            // State: extremal eigenvector of the Bell operator.
            let mut bell_op = ComplexMatrix::zeros(d1 * d2);
            for z in 0..expr.n_z {
                for w in 0..expr.n_w {
                    if expr.g[z][w] != 0.0 {
                        bell_op = bell_op.add(
                            &observable(&first[z])
                                .kron(&observable(&second[w]))
                                .scale(expr.g[z][w]),
                        );
                    }
                }
            }
            state = extremal_state(&bell_op.symmetrize(), config.direction)?;

            let value = objective(&state, &first, &second);
            let delta = (value - trajectory.last().unwrap()).abs();
            trajectory.push(value);
            if delta < config.tolerance {
                converged = true;
                break;
            }
        }

        let value = *trajectory.last().unwrap();
        let outcome = SeesawOutcome {
            value,
            model: QuantumModel {
                dims: vec![d1, d2],
                state,
                measurements: vec![first, second],
            },
            converged,
            iterations,
            trajectory,
        };
        let incumbent = best
            .as_ref()
            .map(|b| b.value)
            .unwrap_or(worst_start(config.direction));
        if best.is_none() || better(config.direction, value, incumbent) {
            best = Some(outcome);
        }
    }
    Ok(best.expect("restarts >= 1"))
}

/// K[i, j] = Σ_kl M[(i,k),(j,l)] Φ[l,k]: the C-side operator obtained by
/// contracting the joint readout effect with a fixed second-factor
/// operator; tr[σ K] = tr[M (σ ⊗ Φ)].
fn contract_second_factor(
    m: &ComplexMatrix,
    phi: &ComplexMatrix,
    d1: usize,
    d2: usize,
) -> ComplexMatrix {
    ComplexMatrix::from_fn(d1, |i, j| {
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..d2 {
            for l in 0..d2 {
                acc += m[(i * d2 + k, j * d2 + l)] * phi[(l, k)];
            }
        }
        acc
    })
}

/// See-saw over the activated network functional at fixed branch parameter
/// r: Alice and Bob's binary measurements and the tripartite state vary,
/// and so does Charlie's joint readout effect (0 ≼ M ≼ I on C ⊗ C' ⊗ flag).
/// The C'–flag side stays pinned to the reference resource. `config.dims`
/// gives Alice and Bob's dimensions.
pub fn seesaw_activated_bell(
    bell: &BellCoefficients,
    r: f64,
    config: &SeesawConfig,
) -> Result<SeesawOutcome> {
    config.check()?;
    if config.dims.len() != 2 {
        return Err(Error::InvalidParameter(
            "activated see-saw needs dims for Alice and Bob".into(),
        ));
    }
    let scenario = bell.scenario.clone();
    if scenario.n_a != 2 || scenario.n_b != 2 {
        return Err(Error::InvalidParameter(
            "activated see-saw supports binary outcomes only".into(),
        ));
    }
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::InvalidParameter("r must lie in [0, 1]".into()));
    }
    let n = bell.n;
    let d_c = 1usize << n;
    let (d_a, d_b) = (config.dims[0], config.dims[1]);
    let dims3 = [d_a, d_b, d_c];
    let readout_dim = d_c * d_c * 2;
    let dani = bell.dani().clone();

    // Unit-weight reference operators (the coefficients are defined against
    // these): Φ_abxy = Σ_dw f_abdxyw [ r σ̃ ⊗ |0⟩⟨0| + (1−r) σ̃ᵀ ⊗ |1⟩⟨1| ].
    let sp = pauli_steered_elements(n);
    let flag0 = ComplexMatrix::basis_projector(2, 0);
    let flag1 = ComplexMatrix::basis_projector(2, 1);
    let mut phi = Vec::with_capacity(scenario.n_a * scenario.n_b * scenario.n_x * scenario.n_y);
    for a in 0..scenario.n_a {
        for b in 0..scenario.n_b {
            for x in 0..scenario.n_x {
                for y in 0..scenario.n_y {
                    let mut acc = ComplexMatrix::zeros(d_c * 2);
                    for d in 0..dani.n_d {
                        for w in 0..dani.n_w {
                            let f = bell.get(a, b, d, x, y, w);
                            if f != 0.0 {
                                let branch = sp
                                    .element(d, w)
                                    .kron(&flag0)
                                    .scale(r)
                                    .add(
                                        &sp.element(d, w)
                                            .transpose()
                                            .kron(&flag1)
                                            .scale(1.0 - r),
                                    );
                                acc = acc.add(&branch.scale(f));
                            }
                        }
                    }
                    phi.push(acc);
                }
            }
        }
    }
    let phi_index =
        |a: usize, b: usize, x: usize, y: usize| ((a * scenario.n_b + b) * scenario.n_x + x) * scenario.n_y + y;

    let mut best: Option<SeesawOutcome> = None;
    for restart_seed in random_restart_schedule(config) {
        let mut rng = rng_from_seed(restart_seed);
        let mut state = ComplexMatrix::outer(&haar_state_vector(d_a * d_b * d_c, &mut rng));
        let mut alice = random_binary_projective(d_a, scenario.n_x, &mut rng);
        let mut bob = random_binary_projective(d_b, scenario.n_y, &mut rng);
        let mut readout = random_projector(readout_dim, &mut rng);

        let assemble = |state: &ComplexMatrix,
                        alice: &[Vec<ComplexMatrix>],
                        bob: &[Vec<ComplexMatrix>],
                        a: usize,
                        b: usize,
                        x: usize,
                        y: usize| {
            alice[x][a]
                .kron(&bob[y][b])
                .kron(&ComplexMatrix::identity(d_c))
                .matmul(state)
                .partial_trace(&dims3, &[2])
                .expect("dims consistent")
        };
        let objective = |state: &ComplexMatrix,
                         alice: &[Vec<ComplexMatrix>],
                         bob: &[Vec<ComplexMatrix>],
                         readout: &ComplexMatrix|
         -> f64 {
            let mut total = 0.0;
            for a in 0..scenario.n_a {
                for b in 0..scenario.n_b {
                    for x in 0..scenario.n_x {
                        for y in 0..scenario.n_y {
                            let sigma = assemble(state, alice, bob, a, b, x, y);
                            total += crate::activation::trace_against_product(
                                readout,
                                &sigma,
                                &phi[phi_index(a, b, x, y)],
                            )
                            .re;
                        }
                    }
                }
            }
            total
        };

        let mut trajectory = vec![objective(&state, &alice, &bob, &readout)];
        let mut converged = false;
        let mut iterations = 0;
        for _ in 0..config.max_iterations {
            iterations += 1;

            let k_ops: Vec<ComplexMatrix> = phi
                .iter()
                .map(|p| contract_second_factor(&readout, p, d_c, d_c * 2))
                .collect();

            // Alice: G_a|x = Σ_by tr_BC[(I ⊗ M_b|y ⊗ K_abxy) ρ].
            for x in 0..scenario.n_x {
                let mut g = [ComplexMatrix::zeros(d_a), ComplexMatrix::zeros(d_a)];
                for (a, slot) in g.iter_mut().enumerate() {
                    for b in 0..scenario.n_b {
                        for y in 0..scenario.n_y {
                            let op = ComplexMatrix::identity(d_a)
                                .kron(&bob[y][b])
                                .kron(&k_ops[phi_index(a, b, x, y)]);
                            *slot = slot.add(
                                &op.matmul(&state)
                                    .partial_trace(&dims3, &[0])
                                    .expect("dims consistent"),
                            );
                        }
                    }
                }
                let diff = g[0].sub(&g[1]).symmetrize();
                let p = improving_projector(&diff, config.direction)?;
                let q = ComplexMatrix::identity(d_a).sub(&p);
                alice[x] = vec![p, q];
            }

            // Bob.
            for y in 0..scenario.n_y {
                let mut g = [ComplexMatrix::zeros(d_b), ComplexMatrix::zeros(d_b)];
                for (b, slot) in g.iter_mut().enumerate() {
                    for a in 0..scenario.n_a {
                        for x in 0..scenario.n_x {
                            let op = alice[x][a]
                                .kron(&ComplexMatrix::identity(d_b))
                                .kron(&k_ops[phi_index(a, b, x, y)]);
                            *slot = slot.add(
                                &op.matmul(&state)
                                    .partial_trace(&dims3, &[1])
                                    .expect("dims consistent"),
                            );
                        }
                    }
                }
                let diff = g[0].sub(&g[1]).symmetrize();
                let p = improving_projector(&diff, config.direction)?;
                let q = ComplexMatrix::identity(d_b).sub(&p);
                bob[y] = vec![p, q];
            }

            // Readout: G = Σ σ_ab|xy ⊗ Φ_abxy, optimized over 0 ≼ M ≼ I.
            let mut g = ComplexMatrix::zeros(readout_dim);
            for a in 0..scenario.n_a {
                for b in 0..scenario.n_b {
                    for x in 0..scenario.n_x {
                        for y in 0..scenario.n_y {
                            let sigma = assemble(&state, &alice, &bob, a, b, x, y);
                            g = g.add(&sigma.kron(&phi[phi_index(a, b, x, y)]));
                        }
                    }
                }
            }
            readout = improving_projector(&g.symmetrize(), config.direction)?;

            // State: extremal eigenvector of W = Σ M_a|x ⊗ M_b|y ⊗ K_abxy.
            let k_ops: Vec<ComplexMatrix> = phi
                .iter()
                .map(|p| contract_second_factor(&readout, p, d_c, d_c * 2))
                .collect();
            let mut w_op = ComplexMatrix::zeros(d_a * d_b * d_c);
            for a in 0..scenario.n_a {
                for b in 0..scenario.n_b {
                    for x in 0..scenario.n_x {
                        for y in 0..scenario.n_y {
                            w_op = w_op.add(
                                &alice[x][a]
                                    .kron(&bob[y][b])
                                    .kron(&k_ops[phi_index(a, b, x, y)]),
                            );
                        }
                    }
                }
            }
            state = extremal_state(&w_op.symmetrize(), config.direction)?;

            let value = objective(&state, &alice, &bob, &readout);
            let delta = (value - trajectory.last().unwrap()).abs();
            trajectory.push(value);
            if delta < config.tolerance {
                converged = true;
                break;
            }
        }

        let value = *trajectory.last().unwrap();
        let outcome = SeesawOutcome {
            value,
            model: QuantumModel {
                dims: vec![d_a, d_b, d_c],
                state,
                measurements: vec![alice, bob, Vec::new()],
            },
            converged,
            iterations,
            trajectory,
        };
        let incumbent = best
            .as_ref()
            .map(|b| b.value)
            .unwrap_or(worst_start(config.direction));
        if best.is_none() || better(config.direction, value, incumbent) {
            best = Some(outcome);
        }
    }
    Ok(best.expect("restarts >= 1"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::{chsh_expression, optimal_selftest_model, selftest_maximum};
    use crate::functionals::{
        decompose_to_bell, icd_expression, shifted_chsh_functional, CdCorrelations,
    };

    const SQRT2: f64 = std::f64::consts::SQRT_2;

    #[test]
    fn restart_schedule_is_deterministic() {
        let cfg = SeesawConfig::new(vec![2, 2], Direction::Maximize, 0);
        let s1 = random_restart_schedule(&cfg);
        let s2 = random_restart_schedule(&cfg);
        assert_eq!(s1, s2);
        assert_eq!(s1.len(), cfg.restarts);
        let mut unique = s1.clone();
        unique.sort_unstable();
        unique.dedup();
        assert_eq!(unique.len(), s1.len());

        let empty = SeesawConfig {
            restarts: 0,
            ..cfg
        };
        assert!(random_restart_schedule(&empty).is_empty());
    }

    #[test]
    fn chsh_seesaw_reaches_tsirelson() {
        let mut cfg = SeesawConfig::new(vec![2, 2], Direction::Maximize, 1);
        cfg.restarts = 8;
        let outcome = seesaw_correlator(&chsh_expression(), &cfg).unwrap();
        assert!(
            (outcome.value - 2.0 * SQRT2).abs() < 1e-6,
            "value {}",
            outcome.value
        );
        assert!(outcome.model.validate().pass);
    }

    #[test]
    fn icd_seesaw_reaches_maximal_violation() {
        let mut cfg = SeesawConfig::new(vec![2, 2], Direction::Maximize, 2);
        cfg.restarts = 8;
        let outcome = seesaw_correlator(&icd_expression(), &cfg).unwrap();
        assert!(
            (outcome.value - selftest_maximum()).abs() < 1e-6,
            "value {}",
            outcome.value
        );
        // The winning model's correlations score the same through the table
        // route.
        let corr = CdCorrelations::from_model(&outcome.model).unwrap();
        let table_score = crate::functionals::icd_value(&corr).unwrap();
        assert!((table_score - outcome.value).abs() < 1e-9);
    }

    #[test]
    fn trajectories_are_monotone_and_feasible() {
        let mut cfg = SeesawConfig::new(vec![2, 2], Direction::Maximize, 3);
        cfg.restarts = 4;
        let outcome = seesaw_correlator(&chsh_expression(), &cfg).unwrap();
        for pair in outcome.trajectory.windows(2) {
            assert!(pair[1] >= pair[0] - 1e-12);
        }
        assert!(outcome.model.validate().pass);

        let f = shifted_chsh_functional(2);
        let bell = decompose_to_bell(&f, 1).unwrap();
        let mut cfg = SeesawConfig::new(vec![2, 2], Direction::Minimize, 4);
        cfg.restarts = 4;
        cfg.max_iterations = 60;
        let outcome = seesaw_activated_bell(&bell, 1.0, &cfg).unwrap();
        for pair in outcome.trajectory.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12);
        }
        assert!(outcome.model.validate().pass);
    }

    #[test]
    fn identical_configs_reproduce_trajectories_bitwise() {
        let cfg = SeesawConfig {
            restarts: 3,
            max_iterations: 40,
            ..SeesawConfig::new(vec![2, 2], Direction::Maximize, 9)
        };
        let o1 = seesaw_correlator(&icd_expression(), &cfg).unwrap();
        let o2 = seesaw_correlator(&icd_expression(), &cfg).unwrap();
        assert_eq!(o1.trajectory, o2.trajectory);
        assert_eq!(o1.model.state, o2.model.state);
    }

    #[test]
    fn activated_minimum_stays_nonnegative() {
        // The minimum of the activated functional over quantum models is 0;
        // see-saw closes in from above and must not find anything below.
        let f = shifted_chsh_functional(2);
        let bell = decompose_to_bell(&f, 1).unwrap();
        for r in [0.0, 1.0] {
            let mut cfg = SeesawConfig::new(vec![2, 2], Direction::Minimize, 5);
            cfg.restarts = 8;
            cfg.max_iterations = 120;
            let outcome = seesaw_activated_bell(&bell, r, &cfg).unwrap();
            assert!(outcome.value >= -1e-6, "r = {} found {}", r, outcome.value);
            // It should actually reach (close to) zero from above.
            assert!(
                outcome.value <= 1e-3,
                "r = {} stuck at {}",
                r,
                outcome.value
            );
        }
    }

    #[test]
    fn optimized_readout_never_loses_to_the_default() {
        let f = shifted_chsh_functional(2);
        let bell = decompose_to_bell(&f, 1).unwrap();
        let mut cfg = SeesawConfig::new(vec![2, 2], Direction::Minimize, 6);
        cfg.restarts = 2;
        cfg.max_iterations = 30;
        let outcome = seesaw_activated_bell(&bell, 0.0, &cfg).unwrap();

        let asm = crate::quantum::assemblage_from_model(&outcome.model, 2).unwrap();
        let reference = crate::quantum::reference_assemblage(1, 0.0).unwrap();
        let charlie = crate::activation::CharlieMeasurements::readout_only(2, 1).unwrap();
        let corr = crate::activation::build_network_correlations(
            &asm,
            reference.as_bipartite(),
            &charlie,
        )
        .unwrap();
        let default_value = crate::functionals::evaluate_bell(&bell, &corr).unwrap();
        assert!(outcome.value <= default_value + 1e-10);
    }

    #[test]
    fn fixture_observables_match_seesaw_maximum() {
        let model = optimal_selftest_model();
        let corr = CdCorrelations::from_model(&model).unwrap();
        let fixture = crate::functionals::icd_value(&corr).unwrap();
        let mut cfg = SeesawConfig::new(vec![2, 2], Direction::Maximize, 12);
        cfg.restarts = 6;
        let outcome = seesaw_correlator(&icd_expression(), &cfg).unwrap();
        assert!((outcome.value - fixture).abs() < 1e-6);
    }
}
