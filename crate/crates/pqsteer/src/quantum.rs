//! Quantum realizations of assemblages: explicit models (shared state plus
//! per-party POVMs), Born-rule evaluation, the Pauli reference assemblage and
//! its flag-qubit mixture, GHJW realizations of bipartite assemblages,
//! Haar-random sampling of states and measurements, and the PR-box demo
//! assemblage.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::assemblage::{
    read_json, write_json, Assemblage, BipartiteAssemblage, ConstraintCheck, Loaded, Scenario,
    ValidationReport,
};
use crate::error::{Error, Result};
use crate::mat::{ComplexMatrix, C64, FEASIBILITY_TOL, RANK_CUTOFF};

/// Pauli operators, indexed by Dani's measurement label: w = 0 → X,
/// w = 1 → Y, w = 2 → Z.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn from_w(w: usize) -> Pauli {
        match w {
            0 => Pauli::X,
            1 => Pauli::Y,
            2 => Pauli::Z,
            _ => panic!("pauli index {} out of range", w),
        }
    }

    pub fn matrix(self) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(2);
        match self {
            Pauli::X => {
                m[(0, 1)] = C64::new(1.0, 0.0);
                m[(1, 0)] = C64::new(1.0, 0.0);
            }
            Pauli::Y => {
                m[(0, 1)] = C64::new(0.0, -1.0);
                m[(1, 0)] = C64::new(0.0, 1.0);
            }
            Pauli::Z => {
                m[(0, 0)] = C64::new(1.0, 0.0);
                m[(1, 1)] = C64::new(-1.0, 0.0);
            }
        }
        m
    }
}

/// The 4^n tensor products of {I, X, Y, Z}: an orthogonal basis for Hermitian
/// operators on n qubits, with tr(B_i B_j) = 2^n δ_ij.
pub fn tensor_pauli_basis(n: usize) -> Vec<ComplexMatrix> {
    assert!(n >= 1, "tensor_pauli_basis needs n >= 1");
    let singles = [
        ComplexMatrix::identity(2),
        Pauli::X.matrix(),
        Pauli::Y.matrix(),
        Pauli::Z.matrix(),
    ];
    let count = 4usize.pow(n as u32);
    let mut out = Vec::with_capacity(count);
    for s in 0..count {
        let mut digits = Vec::with_capacity(n);
        let mut rest = s;
        for _ in 0..n {
            digits.push(rest % 4);
            rest /= 4;
        }
        digits.reverse(); // most significant digit = leftmost factor
        let mut m = singles[digits[0]].clone();
        for &dig in &digits[1..] {
            m = m.kron(&singles[dig]);
        }
        out.push(m);
    }
    out
}

/// The Pauli-eigenprojector family σ̃_d|w = ⊗_i (I + (−1)^{d_i} P_{w_i})/2
/// over d ∈ {0,1}^n (bits, most significant first) and w ∈ {X,Y,Z}^n
/// (base-3 digits, most significant first). Each element has unit trace; for
/// every w the elements sum over d to the identity, and for n = 1
/// σ̃_0|w − σ̃_1|w = P_w.
pub struct SteeredPaulis {
    pub n: usize,
    elems: Vec<ComplexMatrix>,
}

pub fn pauli_steered_elements(n: usize) -> SteeredPaulis {
    assert!(n >= 1, "pauli_steered_elements needs n >= 1");
    let n_d = 1usize << n;
    let n_w = 3usize.pow(n as u32);
    let mut elems = Vec::with_capacity(n_d * n_w);
    for d in 0..n_d {
        for w in 0..n_w {
            let mut digits = Vec::with_capacity(n);
            let mut rest = w;
            for _ in 0..n {
                digits.push(rest % 3);
                rest /= 3;
            }
            digits.reverse();
            let mut m: Option<ComplexMatrix> = None;
            for i in 0..n {
                let di = (d >> (n - 1 - i)) & 1;
                let sign = if di == 0 { 1.0 } else { -1.0 };
                let factor = ComplexMatrix::identity(2)
                    .add(&Pauli::from_w(digits[i]).matrix().scale(sign))
                    .scale(0.5);
                m = Some(match m {
                    None => factor,
                    Some(acc) => acc.kron(&factor),
                });
            }
            elems.push(m.unwrap());
        }
    }
    SteeredPaulis { n, elems }
}

impl SteeredPaulis {
    pub fn n_d(&self) -> usize {
        1 << self.n
    }

    pub fn n_w(&self) -> usize {
        3usize.pow(self.n as u32)
    }

    pub fn element(&self, d: usize, w: usize) -> &ComplexMatrix {
        &self.elems[d * self.n_w() + w]
    }
}

/// The reference resource between Charlie's second subsystem and Dani: the
/// Pauli-steered family with its branch / transposed-branch mixture tagged by
/// a flag qubit (last tensor factor),
///
///   σ_d|w = [ r · σ̃_d|w ⊗ |0⟩⟨0| + (1−r) · σ̃ᵀ_d|w ⊗ |1⟩⟨1| ] / 2^n.
///
/// The 1/2^n factor gives the elements their Born weight: Dani's outcomes on
/// half of a maximally entangled state are uniform, so Σ_d tr σ_d|w = 1 and
/// the family is a valid bipartite assemblage.
pub struct ReferenceAssemblage {
    pub n: usize,
    pub r: f64,
    assemblage: BipartiteAssemblage,
}

pub fn reference_assemblage(n: usize, r: f64) -> Result<ReferenceAssemblage> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::InvalidParameter(format!(
            "mixing parameter r = {} outside [0, 1]",
            r
        )));
    }
    let steered = pauli_steered_elements(n);
    let dim = (1usize << n) * 2;
    let weight = 1.0 / (1usize << n) as f64;
    let flag0 = ComplexMatrix::basis_projector(2, 0);
    let flag1 = ComplexMatrix::basis_projector(2, 1);
    let assemblage = BipartiteAssemblage::build(steered.n_d(), steered.n_w(), dim, |d, w| {
        let plain = steered.element(d, w);
        plain
            .kron(&flag0)
            .scale(r)
            .add(&plain.transpose().kron(&flag1).scale(1.0 - r))
            .scale(weight)
    })?;
    Ok(ReferenceAssemblage { n, r, assemblage })
}

impl ReferenceAssemblage {
    pub fn element(&self, d: usize, w: usize) -> &ComplexMatrix {
        self.assemblage.element(d, w)
    }

    pub fn as_bipartite(&self) -> &BipartiteAssemblage {
        &self.assemblage
    }

    pub fn n_d(&self) -> usize {
        self.assemblage.n_d
    }

    pub fn n_w(&self) -> usize {
        self.assemblage.n_w
    }

    /// Dimension including the flag factor.
    pub fn dim(&self) -> usize {
        self.assemblage.dim
    }
}

/// A shared state with per-party measurement sets. Parties that are only
/// steered carry an empty measurement list.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumModel {
    pub dims: Vec<usize>,
    /// Density matrix on the tensor product of `dims`, in party order.
    pub state: ComplexMatrix,
    /// measurements[party][setting][outcome]
    pub measurements: Vec<Vec<Vec<ComplexMatrix>>>,
}

impl QuantumModel {
    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn validate(&self) -> ValidationReport {
        self.validate_with_tol(FEASIBILITY_TOL)
    }

    pub fn validate_with_tol(&self, tol: f64) -> ValidationReport {
        let mut checks: Vec<ConstraintCheck> = Vec::new();
        let push = |checks: &mut Vec<ConstraintCheck>, name: &str, worst: f64, detail: &str| {
            checks.push(ConstraintCheck {
                name: name.into(),
                pass: worst <= tol,
                worst,
                detail: detail.into(),
            });
        };

        let dim_ok = self.state.dim() == self.total_dim()
            && self.measurements.len() == self.dims.len()
            && self
                .measurements
                .iter()
                .zip(&self.dims)
                .all(|(party, &d)| {
                    party
                        .iter()
                        .all(|setting| setting.iter().all(|m| m.dim() == d))
                });
        push(
            &mut checks,
            "shapes",
            if dim_ok { 0.0 } else { f64::INFINITY },
            "state and effect dimensions match party dims",
        );
        if !dim_ok {
            return ValidationReport {
                pass: false,
                tolerance: tol,
                checks,
            };
        }

        push(
            &mut checks,
            "state_hermitian",
            self.state.hermitian_residual(),
            "state is Hermitian",
        );
        let min = self
            .state
            .symmetrize()
            .min_eigenvalue()
            .expect("symmetrized state");
        push(&mut checks, "state_psd", (-min).max(0.0), "state is PSD");
        push(
            &mut checks,
            "state_trace",
            (self.state.trace().re - 1.0).abs(),
            "state has unit trace",
        );

        let mut worst_complete = 0.0f64;
        let mut worst_psd = 0.0f64;
        for (party, &d) in self.measurements.iter().zip(&self.dims) {
            for setting in party {
                let mut total = ComplexMatrix::zeros(d);
                for effect in setting {
                    total = total.add(effect);
                    let min = effect
                        .symmetrize()
                        .min_eigenvalue()
                        .expect("symmetrized effect");
                    worst_psd = worst_psd.max((-min).max(0.0));
                }
                worst_complete =
                    worst_complete.max(total.max_abs_diff(&ComplexMatrix::identity(d)));
            }
        }
        push(
            &mut checks,
            "povm_completeness",
            worst_complete,
            "effects of each setting sum to identity",
        );
        push(&mut checks, "effect_psd", worst_psd, "effects are PSD");

        ValidationReport {
            pass: checks.iter().all(|c| c.pass),
            tolerance: tol,
            checks,
        }
    }

    /// Entrywise complex conjugation of state and effects. Realizes the
    /// transpose closure: the conjugated model generates exactly the
    /// elementwise-transposed assemblage.
    pub fn conjugate(&self) -> Self {
        Self {
            dims: self.dims.clone(),
            state: self.state.conj(),
            measurements: self
                .measurements
                .iter()
                .map(|party| {
                    party
                        .iter()
                        .map(|setting| setting.iter().map(|m| m.conj()).collect())
                        .collect()
                })
                .collect(),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(
            path,
            &QuantumModelFile {
                dims: self.dims.clone(),
                state: self.state.clone(),
                parties: self
                    .measurements
                    .iter()
                    .map(|p| PartyRecord {
                        settings: p.clone(),
                    })
                    .collect(),
            },
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Loaded<Self>> {
        let file: QuantumModelFile = read_json(path)?;
        let model = Self {
            dims: file.dims,
            state: file.state,
            measurements: file.parties.into_iter().map(|p| p.settings).collect(),
        };
        let rep = model.validate();
        let warnings = if rep.pass {
            Vec::new()
        } else {
            rep.checks
                .iter()
                .filter(|c| !c.pass)
                .map(|c| format!("model check '{}' fails (worst {:.3e})", c.name, c.worst))
                .collect()
        };
        Ok(Loaded {
            value: model,
            warnings,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct QuantumModelFile {
    dims: Vec<usize>,
    state: ComplexMatrix,
    parties: Vec<PartyRecord>,
}

#[derive(Serialize, Deserialize)]
struct PartyRecord {
    settings: Vec<Vec<ComplexMatrix>>,
}

/// The two effects (I ± O)/2 of a binary observable with outcomes 0 ↦ +1,
/// 1 ↦ −1.
pub fn observable_effects(obs: &ComplexMatrix) -> [ComplexMatrix; 2] {
    let id = ComplexMatrix::identity(obs.dim());
    [id.add(obs).scale(0.5), id.sub(obs).scale(0.5)]
}

fn model_operator(model: &QuantumModel, effects: &[(usize, &ComplexMatrix)]) -> ComplexMatrix {
    // Kron of the given per-party effects with identities elsewhere, in
    // party order.
    let mut out: Option<ComplexMatrix> = None;
    for (party, &d) in model.dims.iter().enumerate() {
        let factor = effects
            .iter()
            .find(|(p, _)| *p == party)
            .map(|(_, m)| (*m).clone())
            .unwrap_or_else(|| ComplexMatrix::identity(d));
        out = Some(match out {
            None => factor,
            Some(acc) => acc.kron(&factor),
        });
    }
    out.expect("at least one party")
}

fn require_valid(model: &QuantumModel) -> Result<()> {
    let rep = model.validate();
    if !rep.pass {
        return Err(Error::Validation(format!(
            "quantum model fails validation (worst violation {:.3e})",
            rep.worst_violation()
        )));
    }
    Ok(())
}

/// Born-rule assemblage of a tripartite model: the two measured parties (in
/// party order) play Alice and Bob, `steered` is Charlie.
pub fn assemblage_from_model(model: &QuantumModel, steered: usize) -> Result<Assemblage> {
    require_valid(model)?;
    if model.dims.len() != 3 || steered >= 3 {
        return Err(Error::InvalidParameter(
            "assemblage_from_model needs a 3-party model and a steered party index < 3".into(),
        ));
    }
    if !model.measurements[steered].is_empty() {
        return Err(Error::InvalidParameter(
            "the steered party must carry no measurements".into(),
        ));
    }
    let measured: Vec<usize> = (0..3).filter(|&p| p != steered).collect();
    let (pa, pb) = (measured[0], measured[1]);
    if model.measurements[pa].is_empty() || model.measurements[pb].is_empty() {
        return Err(Error::InvalidParameter(
            "both non-steered parties need at least one setting".into(),
        ));
    }
    let scenario = Scenario::new(
        model.measurements[pa].len(),
        model.measurements[pb].len(),
        model.measurements[pa][0].len(),
        model.measurements[pb][0].len(),
        model.dims[steered],
    );
    let dims = model.dims.clone();
    Assemblage::build(scenario, |a, b, x, y| {
        let op = model_operator(
            model,
            &[
                (pa, &model.measurements[pa][x][a]),
                (pb, &model.measurements[pb][y][b]),
            ],
        );
        op.matmul(&model.state)
            .partial_trace(&dims, &[steered])
            .expect("dims consistent")
    })
}

/// Born-rule bipartite assemblage of a 2-party model; the other party is
/// measured.
pub fn bipartite_from_model(model: &QuantumModel, steered: usize) -> Result<BipartiteAssemblage> {
    require_valid(model)?;
    if model.dims.len() != 2 || steered >= 2 {
        return Err(Error::InvalidParameter(
            "bipartite_from_model needs a 2-party model and a steered party index < 2".into(),
        ));
    }
    let measured = 1 - steered;
    if model.measurements[measured].is_empty() {
        return Err(Error::InvalidParameter(
            "the measured party needs at least one setting".into(),
        ));
    }
    let n_w = model.measurements[measured].len();
    let n_d = model.measurements[measured][0].len();
    let dims = model.dims.clone();
    BipartiteAssemblage::build(n_d, n_w, model.dims[steered], |d, w| {
        let op = model_operator(model, &[(measured, &model.measurements[measured][w][d])]);
        op.matmul(&model.state)
            .partial_trace(&dims, &[steered])
            .expect("dims consistent")
    })
}

/// GHJW realization of a bipartite assemblage: purify the reduced state in
/// its eigenbasis (eigenvalues above the rank cutoff) and read the
/// measurement operators off the assemblage elements in those coordinates.
/// Feeding the result back through `bipartite_from_model` reproduces the
/// input.
pub fn ghjw_realization(asm: &BipartiteAssemblage) -> Result<QuantumModel> {
    let rho = asm.reduced_state(0);
    for w in 1..asm.n_w {
        let diff = asm.reduced_state(w).max_abs_diff(&rho);
        if diff > 1e-8 {
            return Err(Error::Inconsistent(format!(
                "reduced state differs across inputs by {:.3e}",
                diff
            )));
        }
    }
    let eig = rho.symmetrize().hermitian_eig()?;
    let lambda_max = eig.values.first().copied().unwrap_or(0.0).max(0.0);
    let cutoff = RANK_CUTOFF * lambda_max;
    let kept: Vec<usize> = (0..eig.values.len())
        .filter(|&i| eig.values[i] > cutoff && eig.values[i] > 0.0)
        .collect();
    if kept.is_empty() {
        return Err(Error::Inconsistent(
            "reduced state has no support above the rank cutoff".into(),
        ));
    }
    let k = kept.len();
    let dim_c = asm.dim;

    // |ψ⟩ = Σ_i sqrt(λ_i) |v_i⟩ ⊗ |i⟩ on C ⊗ D with dim(D) = rank(ρ).
    let mut psi = vec![C64::new(0.0, 0.0); dim_c * k];
    for (slot, &i) in kept.iter().enumerate() {
        let root = eig.values[i].sqrt();
        for row in 0..dim_c {
            psi[row * k + slot] = eig.vectors[(row, i)] * root;
        }
    }
    let state = ComplexMatrix::outer(&psi);

    // M_d|w[j, i] = ⟨v_i| σ_d|w |v_j⟩ / sqrt(λ_i λ_j): the assemblage element
    // sandwiched by ρ^{-1/2} and transposed, in the purification basis.
    let mut dani_settings = Vec::with_capacity(asm.n_w);
    for w in 0..asm.n_w {
        let mut effects = Vec::with_capacity(asm.n_d);
        for d in 0..asm.n_d {
            let sigma = asm.element(d, w);
            let mut m = ComplexMatrix::zeros(k);
            for (si, &i) in kept.iter().enumerate() {
                for (sj, &j) in kept.iter().enumerate() {
                    let mut sandwich = C64::new(0.0, 0.0);
                    for row in 0..dim_c {
                        for col in 0..dim_c {
                            sandwich += eig.vectors[(row, i)].conj()
                                * sigma[(row, col)]
                                * eig.vectors[(col, j)];
                        }
                    }
                    m[(sj, si)] = sandwich / (eig.values[i] * eig.values[j]).sqrt();
                }
            }
            effects.push(m);
        }
        dani_settings.push(effects);
    }

    Ok(QuantumModel {
        dims: vec![dim_c, k],
        state,
        measurements: vec![Vec::new(), dani_settings],
    })
}

/// ChaCha-seeded RNG used by every sampling entry point; a fixed seed gives
/// bitwise-reproducible output.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn standard_complex(rng: &mut ChaCha8Rng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) / 2f64.sqrt()
}

/// Haar-random unitary: QR of a complex Ginibre matrix via modified
/// Gram-Schmidt (the positive-diagonal R makes Q Haar-distributed).
pub fn haar_unitary(dim: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    let g = ComplexMatrix::from_fn(dim, |_, _| standard_complex(rng));
    let mut q: Vec<Vec<C64>> = Vec::with_capacity(dim); // columns
    for j in 0..dim {
        let mut v: Vec<C64> = (0..dim).map(|i| g[(i, j)]).collect();
        for _ in 0..2 {
            for col in q.iter() {
                let overlap: C64 = col.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                for (vi, qi) in v.iter_mut().zip(col) {
                    *vi -= overlap * qi;
                }
            }
        }
        let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for vi in v.iter_mut() {
            *vi /= norm;
        }
        q.push(v);
    }
    ComplexMatrix::from_fn(dim, |i, j| q[j][i])
}

/// Haar-random pure state vector.
pub fn haar_state_vector(dim: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
    let mut v: Vec<C64> = (0..dim).map(|_| standard_complex(rng)).collect();
    let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for z in v.iter_mut() {
        *z /= norm;
    }
    v
}

/// Generic (full-rank, non-projective) POVM: compress a Haar unitary on the
/// system ⊗ outcome-register space. Covers the "any effects" quantifier that
/// projective sampling would miss.
pub fn random_povm(dim: usize, outcomes: usize, rng: &mut ChaCha8Rng) -> Vec<ComplexMatrix> {
    let u = haar_unitary(dim * outcomes, rng);
    (0..outcomes)
        .map(|o| {
            // Block A_o[i, j] = U[(i, o), (j, 0)]; effect M_o = A_o† A_o.
            ComplexMatrix::from_fn(dim, |i, j| {
                (0..dim)
                    .map(|row| {
                        u[(row * outcomes + o, i * outcomes)].conj()
                            * u[(row * outcomes + o, j * outcomes)]
                    })
                    .sum()
            })
        })
        .collect()
}

/// Random effect with 0 ≼ M ≼ I: Haar eigenbasis with uniform eigenvalues.
pub fn random_effect(dim: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    let u = haar_unitary(dim, rng);
    let lambdas: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
    ComplexMatrix::from_fn(dim, |i, j| {
        (0..dim)
            .map(|k| u[(i, k)] * u[(j, k)].conj() * lambdas[k])
            .sum()
    })
}

/// Random full-rank density matrix (partial trace of a Haar pure state on a
/// doubled space).
pub fn random_density(dim: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    let psi = haar_state_vector(dim * dim, rng);
    ComplexMatrix::outer(&psi)
        .partial_trace(&[dim, dim], &[0])
        .expect("square split")
}

/// Haar-random tripartite model for the given scenario: pure global state on
/// dims (d_a, d_b, d_c) and independent random POVMs for Alice and Bob.
pub fn sample_quantum_model(scenario: &Scenario, d_a: usize, d_b: usize, seed: u64) -> QuantumModel {
    let mut rng = rng_from_seed(seed);
    sample_quantum_model_with(scenario, d_a, d_b, &mut rng)
}

pub fn sample_quantum_model_with(
    scenario: &Scenario,
    d_a: usize,
    d_b: usize,
    rng: &mut ChaCha8Rng,
) -> QuantumModel {
    let psi = haar_state_vector(d_a * d_b * scenario.d_c, rng);
    let alice = (0..scenario.n_x)
        .map(|_| random_povm(d_a, scenario.n_a, rng))
        .collect();
    let bob = (0..scenario.n_y)
        .map(|_| random_povm(d_b, scenario.n_b, rng))
        .collect();
    QuantumModel {
        dims: vec![d_a, d_b, scenario.d_c],
        state: ComplexMatrix::outer(&psi),
        measurements: vec![alice, bob, Vec::new()],
    }
}

/// Assemblage of a Haar-random model, computed through the pure-state fast
/// path. Deterministic in the seed.
pub fn sample_quantum_assemblage(
    scenario: &Scenario,
    d_a: usize,
    d_b: usize,
    seed: u64,
) -> Result<Assemblage> {
    let mut rng = rng_from_seed(seed);
    sample_quantum_assemblage_with(scenario, d_a, d_b, &mut rng)
}

pub fn sample_quantum_assemblage_with(
    scenario: &Scenario,
    d_a: usize,
    d_b: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Assemblage> {
    let d_c = scenario.d_c;
    let psi = haar_state_vector(d_a * d_b * d_c, rng);
    let alice: Vec<Vec<ComplexMatrix>> = (0..scenario.n_x)
        .map(|_| random_povm(d_a, scenario.n_a, rng))
        .collect();
    let bob: Vec<Vec<ComplexMatrix>> = (0..scenario.n_y)
        .map(|_| random_povm(d_b, scenario.n_b, rng))
        .collect();
    born_assemblage_from_pure(&psi, d_a, d_b, scenario.clone(), &alice, &bob)
}

/// σ_ab|xy = tr_AB[(M_a|x ⊗ M_b|y ⊗ I)|ψ⟩⟨ψ|] without forming any operator
/// on the full space.
pub fn born_assemblage_from_pure(
    psi: &[C64],
    d_a: usize,
    d_b: usize,
    scenario: Scenario,
    alice: &[Vec<ComplexMatrix>],
    bob: &[Vec<ComplexMatrix>],
) -> Result<Assemblage> {
    let d_c = scenario.d_c;
    if psi.len() != d_a * d_b * d_c {
        return Err(Error::DimensionMismatch(
            "state vector length does not match dims".into(),
        ));
    }
    Assemblage::build(scenario, |a, b, x, y| {
        let ma = &alice[x][a];
        let mb = &bob[y][b];
        // φ = (M_a ⊗ M_b ⊗ I) ψ, applied factor by factor.
        let mut phi = vec![C64::new(0.0, 0.0); psi.len()];
        for bet in 0..d_b {
            for gam in 0..d_c {
                for alp in 0..d_a {
                    let mut acc = C64::new(0.0, 0.0);
                    for alp2 in 0..d_a {
                        acc += ma[(alp, alp2)] * psi[(alp2 * d_b + bet) * d_c + gam];
                    }
                    phi[(alp * d_b + bet) * d_c + gam] = acc;
                }
            }
        }
        let mut phi2 = vec![C64::new(0.0, 0.0); psi.len()];
        for alp in 0..d_a {
            for gam in 0..d_c {
                for bet in 0..d_b {
                    let mut acc = C64::new(0.0, 0.0);
                    for bet2 in 0..d_b {
                        acc += mb[(bet, bet2)] * phi[(alp * d_b + bet2) * d_c + gam];
                    }
                    phi2[(alp * d_b + bet) * d_c + gam] = acc;
                }
            }
        }
        ComplexMatrix::from_fn(d_c, |g1, g2| {
            let mut acc = C64::new(0.0, 0.0);
            for alp in 0..d_a {
                for bet in 0..d_b {
                    acc += phi2[(alp * d_b + bet) * d_c + g1]
                        * psi[(alp * d_b + bet) * d_c + g2].conj();
                }
            }
            acc
        })
    })
}

/// Random 2-party model (Charlie steered, Dani measuring) for GHJW and
/// self-testing experiments.
pub fn sample_bipartite_model(
    dim_c: usize,
    dim_d: usize,
    n_w: usize,
    n_d: usize,
    seed: u64,
) -> QuantumModel {
    let mut rng = rng_from_seed(seed);
    let psi = haar_state_vector(dim_c * dim_d, &mut rng);
    let dani = (0..n_w)
        .map(|_| random_povm(dim_d, n_d, &mut rng))
        .collect();
    QuantumModel {
        dims: vec![dim_c, dim_d],
        state: ComplexMatrix::outer(&psi),
        measurements: vec![Vec::new(), dani],
    }
}

/// The PR-box demo assemblage: σ_ab|xy = p_PR(ab|xy) · I/2 with
/// p_PR(ab|xy) = 1/2 iff a ⊕ b = x·y. Its correlation marginal reaches the
/// algebraic CHSH maximum of 4, so no quantum model generates it.
pub fn pr_box_assemblage() -> Assemblage {
    let rho = ComplexMatrix::identity(2).scale(0.5);
    Assemblage::build(Scenario::new(2, 2, 2, 2, 2), |a, b, x, y| {
        if a ^ b == x & y {
            rho.scale(0.5)
        } else {
            ComplexMatrix::zeros(2)
        }
    })
    .expect("static scenario")
}

/// GHZ state with Alice and Bob measuring Z and X; steers Charlie to a
/// classically-correlated assemblage, the quantum baseline for the pipeline.
pub fn ghz_model() -> QuantumModel {
    let inv = 1.0 / 2f64.sqrt();
    let mut psi = vec![C64::new(0.0, 0.0); 8];
    psi[0] = C64::new(inv, 0.0);
    psi[7] = C64::new(inv, 0.0);
    let z = observable_effects(&Pauli::Z.matrix()).to_vec();
    let x = observable_effects(&Pauli::X.matrix()).to_vec();
    QuantumModel {
        dims: vec![2, 2, 2],
        state: ComplexMatrix::outer(&psi),
        measurements: vec![vec![z.clone(), x.clone()], vec![z, x], Vec::new()],
    }
}

/// Maximally entangled pair between Alice and Bob (Charlie uncorrelated) with
/// the CHSH-optimal measurement angles: the correlation marginal reaches the
/// quantum maximum 2√2.
pub fn tsirelson_model() -> QuantumModel {
    let inv = 1.0 / 2f64.sqrt();
    // Φ+ on A⊗B, |0⟩ on C: basis index (α·2 + β)·2 + γ.
    let mut psi = vec![C64::new(0.0, 0.0); 8];
    psi[0] = C64::new(inv, 0.0);
    psi[6] = C64::new(inv, 0.0);
    let z = Pauli::Z.matrix();
    let x = Pauli::X.matrix();
    let alice = vec![
        observable_effects(&z).to_vec(),
        observable_effects(&x).to_vec(),
    ];
    let bob = vec![
        observable_effects(&z.add(&x).scale(inv)).to_vec(),
        observable_effects(&z.sub(&x).scale(inv)).to_vec(),
    ];
    QuantumModel {
        dims: vec![2, 2, 2],
        state: ComplexMatrix::outer(&psi),
        measurements: vec![alice, bob, Vec::new()],
    }
}

/// CHSH value E00 + E01 + E10 − E11 of an assemblage's correlation marginal.
pub fn chsh_of_marginal(asm: &Assemblage) -> f64 {
    let mut value = 0.0;
    for x in 0..2 {
        for y in 0..2 {
            let sign = if x == 1 && y == 1 { -1.0 } else { 1.0 };
            let mut e = 0.0;
            for a in 0..2 {
                for b in 0..2 {
                    let parity = if (a + b) % 2 == 0 { 1.0 } else { -1.0 };
                    e += parity * asm.probability(a, b, x, y);
                }
            }
            value += sign * e;
        }
    }
    value
}
