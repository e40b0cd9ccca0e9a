//! The activation pipeline: embed a steering assemblage in a four-party
//! network next to the Pauli reference resource, let Charlie perform the
//! joint entangled readout, and evaluate the induced network Bell
//! functional. A negative value certifies post-quantumness of the input
//! assemblage.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::assemblage::{Assemblage, BipartiteAssemblage};
use crate::error::{Error, Result};
use crate::functionals::{
    decompose_to_bell, evaluate_bell, evaluate_steering, BellCoefficients, NetworkCorrelations,
    SteeringFunctional,
};
use crate::mat::{ComplexMatrix, C64, ALGEBRAIC_TOL, FEASIBILITY_TOL};
use crate::quantum::reference_assemblage;

/// Projector onto |Ψ_n⟩ = 2^{-n/2} Σ_k |kk⟩, the maximally entangled state
/// across Charlie's two 2^n-dimensional subsystems. Invariant under global
/// transpose.
pub fn max_entangled_projector(n: usize) -> ComplexMatrix {
    assert!(n >= 1, "max_entangled_projector needs n >= 1");
    let d = 1usize << n;
    let weight = 1.0 / d as f64;
    let mut m = ComplexMatrix::zeros(d * d);
    for k in 0..d {
        for l in 0..d {
            m[(k * d + k, l * d + l)] = C64::new(weight, 0.0);
        }
    }
    m
}

/// tr[M_0 (ξ ⊗ A)] for the entangled readout M_0 = |Ψ_n⟩⟨Ψ_n|. Equals
/// 2^{-n} tr(Aᵀ ξ): the joint measurement reads the overlap of the unknown
/// operator with the transposed known one.
pub fn entangled_readout(xi: &ComplexMatrix, a: &ComplexMatrix) -> Result<f64> {
    if xi.dim() != a.dim() {
        return Err(Error::DimensionMismatch(format!(
            "readout factors have dims {} and {}",
            xi.dim(),
            a.dim()
        )));
    }
    let d = xi.dim();
    if !d.is_power_of_two() {
        return Err(Error::InvalidParameter(
            "readout factors must live on 2^n dimensions".into(),
        ));
    }
    let n = d.trailing_zeros() as usize;
    let m0 = max_entangled_projector(n);
    Ok(m0.trace_product(&xi.kron(a)).re)
}

/// tr[M (σ ⊗ τ)] without forming the Kronecker product.
pub(crate) fn trace_against_product(
    m: &ComplexMatrix,
    sigma: &ComplexMatrix,
    tau: &ComplexMatrix,
) -> C64 {
    let (ds, dt) = (sigma.dim(), tau.dim());
    debug_assert_eq!(m.dim(), ds * dt);
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..ds {
        for j in 0..ds {
            let s = sigma[(j, i)];
            if s == C64::new(0.0, 0.0) {
                continue;
            }
            for k in 0..dt {
                for l in 0..dt {
                    acc += m[(i * dt + k, j * dt + l)] * s * tau[(l, k)];
                }
            }
        }
    }
    acc
}

/// Charlie's measurement settings on his combined system C ⊗ C' ⊗ flag
/// (dimension d_c · 2^n · 2). One of them is the joint readout setting
/// `star`; by default its outcome-0 effect is |Ψ_n⟩⟨Ψ_n| ⊗ I_flag.
#[derive(Clone, Debug)]
pub struct CharlieMeasurements {
    povms: Vec<Vec<ComplexMatrix>>,
    star: usize,
    dim: usize,
}

impl CharlieMeasurements {
    /// Just the readout setting with the default effect M_0 ⊗ I_flag;
    /// requires d_c = 2^n so the projector pairs C with C'.
    pub fn readout_only(d_c: usize, n: usize) -> Result<Self> {
        if d_c != 1usize << n {
            return Err(Error::DimensionMismatch(format!(
                "default readout needs d_c = 2^n (d_c = {}, n = {})",
                d_c, n
            )));
        }
        let dim = d_c * (1usize << n) * 2;
        let effect = max_entangled_projector(n).kron(&ComplexMatrix::identity(2));
        Self::readout_with_effect(effect, dim)
    }

    /// A custom joint readout effect 0 ≼ M ≼ I on the full dimension;
    /// the star setting becomes {M, I − M}.
    pub fn readout_with_effect(effect: ComplexMatrix, dim: usize) -> Result<Self> {
        if effect.dim() != dim {
            return Err(Error::DimensionMismatch(format!(
                "readout effect dim {} does not match system dim {}",
                effect.dim(),
                dim
            )));
        }
        let complement = ComplexMatrix::identity(dim).sub(&effect);
        Ok(Self {
            povms: vec![vec![effect, complement]],
            star: 0,
            dim,
        })
    }

    /// Appends a binary setting measuring the observable `obs` on the C'
    /// factor (identity on C and the flag): the self-testing settings that
    /// sit next to the readout.
    pub fn push_cprime_observable(&mut self, d_c: usize, obs: &ComplexMatrix) -> Result<()> {
        let d_cp = obs.dim();
        if d_c * d_cp * 2 != self.dim {
            return Err(Error::DimensionMismatch(
                "observable dimension does not fit the C' factor".into(),
            ));
        }
        let id_c = ComplexMatrix::identity(d_c);
        let id_f = ComplexMatrix::identity(2);
        let effects = crate::quantum::observable_effects(obs);
        self.povms.push(vec![
            id_c.kron(&effects[0]).kron(&id_f),
            id_c.kron(&effects[1]).kron(&id_f),
        ]);
        Ok(())
    }

    /// Reorders so the readout comes last, after the self-testing settings.
    pub fn star_last(mut self) -> Self {
        let star_povm = self.povms.remove(self.star);
        self.povms.push(star_povm);
        self.star = self.povms.len() - 1;
        self
    }

    pub fn star(&self) -> usize {
        self.star
    }

    pub fn settings(&self) -> &[Vec<ComplexMatrix>] {
        &self.povms
    }

    fn check(&self, tol: f64) -> Result<()> {
        let outcomes = self.povms.first().map(|s| s.len()).unwrap_or(0);
        if outcomes == 0 {
            return Err(Error::InvalidParameter(
                "Charlie needs at least one setting with outcomes".into(),
            ));
        }
        for (z, setting) in self.povms.iter().enumerate() {
            if setting.len() != outcomes {
                return Err(Error::InvalidParameter(
                    "all Charlie settings must share an outcome count".into(),
                ));
            }
            let mut total = ComplexMatrix::zeros(self.dim);
            for effect in setting {
                if effect.dim() != self.dim {
                    return Err(Error::DimensionMismatch(format!(
                        "setting {} effect dim {} != {}",
                        z,
                        effect.dim(),
                        self.dim
                    )));
                }
                let min = effect.symmetrize().min_eigenvalue()?;
                if min < -tol {
                    return Err(Error::NotPsd(min));
                }
                total = total.add(effect);
            }
            let dev = total.max_abs_diff(&ComplexMatrix::identity(self.dim));
            if dev > tol {
                return Err(Error::Validation(format!(
                    "setting {} effects sum to identity only within {:.3e}",
                    z, dev
                )));
            }
        }
        Ok(())
    }
}

/// Born-rule table p(abcd|xyzw) of the network experiment: the tripartite
/// assemblage next to a bipartite Charlie–Dani resource (canonically the
/// reference assemblage), measured by Charlie's settings. The output is a
/// valid (normalized, no-signalling) conditional distribution.
pub fn build_network_correlations(
    asm: &Assemblage,
    reference: &BipartiteAssemblage,
    charlie: &CharlieMeasurements,
) -> Result<NetworkCorrelations> {
    let s = &asm.scenario;
    let expected_dim = s.d_c * reference.dim;
    if charlie.dim != expected_dim {
        return Err(Error::DimensionMismatch(format!(
            "Charlie effects act on dim {}, system is {} x {} = {}",
            charlie.dim, s.d_c, reference.dim, expected_dim
        )));
    }
    charlie.check(FEASIBILITY_TOL)?;

    let n_c = charlie.povms[0].len();
    let (n_z, n_w, n_d) = (charlie.povms.len(), reference.n_w, reference.n_d);
    let mut corr = NetworkCorrelations {
        n_a: s.n_a,
        n_b: s.n_b,
        n_c,
        n_d,
        n_x: s.n_x,
        n_y: s.n_y,
        n_z,
        n_w,
        star: charlie.star,
        p: vec![0.0; s.n_a * s.n_b * n_c * n_d * s.n_x * s.n_y * n_z * n_w],
    };
    for ((a, b, x, y), sigma) in asm.iter() {
        for d in 0..n_d {
            for w in 0..n_w {
                let tau = reference.element(d, w);
                for (z, setting) in charlie.povms.iter().enumerate() {
                    for (c, effect) in setting.iter().enumerate() {
                        let p = trace_against_product(effect, sigma, tau).re;
                        corr.set(a, b, c, d, x, y, z, w, p);
                    }
                }
            }
        }
    }
    Ok(corr)
}

/// Verdict of an activation run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    PostQuantum,
    Inconclusive,
}

/// Tolerances a run was evaluated with.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ToleranceSet {
    /// PSD / normalization / no-signalling feasibility checks.
    pub feasibility: f64,
    /// Exact algebraic identities.
    pub algebraic: f64,
    /// The activated Bell value must fall below −verdict to count as
    /// post-quantum; covers the numeric floor of the quantum side.
    pub verdict: f64,
}

impl Default for ToleranceSet {
    fn default() -> Self {
        Self {
            feasibility: FEASIBILITY_TOL,
            algebraic: ALGEBRAIC_TOL,
            verdict: 1e-6,
        }
    }
}

/// Full provenance of one activation run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ActivationReport {
    /// SHA-256 of the input assemblage content.
    pub input_digest: String,
    /// SHA-256 of the steering functional content.
    pub functional_digest: String,
    pub n: usize,
    pub r: f64,
    pub coefficients: BellCoefficients,
    pub steering_value: f64,
    pub steering_imag_residue: f64,
    pub bell_value: f64,
    pub verdict: Verdict,
    pub tolerances: ToleranceSet,
}

impl ActivationReport {
    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        crate::assemblage::write_json(path, self)
    }
}

/// Content hash of an assemblage: scenario cardinalities and element entries
/// in index order.
pub fn assemblage_digest(asm: &Assemblage) -> String {
    let mut hasher = Sha256::new();
    let s = &asm.scenario;
    for v in [s.n_x, s.n_y, s.n_a, s.n_b, s.d_c] {
        hasher.update((v as u64).to_le_bytes());
    }
    for m in asm.elements() {
        for z in m.data() {
            hasher.update(z.re.to_le_bytes());
            hasher.update(z.im.to_le_bytes());
        }
    }
    hex::encode(hasher.finalize())
}

/// Content hash of a steering functional.
pub fn functional_digest(f: &SteeringFunctional) -> String {
    let mut hasher = Sha256::new();
    let s = &f.scenario;
    for v in [s.n_x, s.n_y, s.n_a, s.n_b, s.d_c] {
        hasher.update((v as u64).to_le_bytes());
    }
    hasher.update(f.quantum_bound.to_le_bytes());
    for m in f.coefficients() {
        for z in m.data() {
            hasher.update(z.re.to_le_bytes());
            hasher.update(z.im.to_le_bytes());
        }
    }
    hex::encode(hasher.finalize())
}

/// Runs the activation pipeline on an assemblage whose steered dimension is
/// already a power of two: decompose the functional, build the network
/// table with the default readout, and evaluate the induced Bell value,
/// which equals
///
///   r/2^n · Σ f tr(σ̃ᵀ σ)  +  (1−r)/2^n · Σ f tr(σ̃ σ).
///
/// For r ∈ {0,1} this is 2^{-n} times the steering value of the assemblage
/// (r = 0) or of its elementwise transpose (r = 1); either being negative
/// certifies post-quantumness, because transposition preserves the
/// existence of a quantum realization.
pub fn activate(
    asm: &Assemblage,
    functional: &SteeringFunctional,
    r: f64,
) -> Result<ActivationReport> {
    activate_with(asm, functional, r, ToleranceSet::default())
}

pub fn activate_with(
    asm: &Assemblage,
    functional: &SteeringFunctional,
    r: f64,
    tolerances: ToleranceSet,
) -> Result<ActivationReport> {
    if functional.quantum_bound != 0.0 {
        return Err(Error::InvalidParameter(
            "activation needs a functional with quantum bound 0".into(),
        ));
    }
    if functional.scenario != asm.scenario {
        return Err(Error::DimensionMismatch(
            "functional and assemblage scenarios differ".into(),
        ));
    }
    let d_c = asm.scenario.d_c;
    if !d_c.is_power_of_two() || d_c < 2 {
        return Err(Error::InvalidParameter(format!(
            "steered dimension {} is not a power of two; use activate_n",
            d_c
        )));
    }
    let n = d_c.trailing_zeros() as usize;

    let coefficients = decompose_to_bell(functional, n)?;
    let reference = reference_assemblage(n, r)?;
    let charlie = CharlieMeasurements::readout_only(d_c, n)?;
    let corr = build_network_correlations(asm, reference.as_bipartite(), &charlie)?;
    let bell_value = evaluate_bell(&coefficients, &corr)?;
    let steering = evaluate_steering(functional, asm)?;

    let verdict = if bell_value < -tolerances.verdict {
        Verdict::PostQuantum
    } else {
        Verdict::Inconclusive
    };
    Ok(ActivationReport {
        input_digest: assemblage_digest(asm),
        functional_digest: functional_digest(functional),
        n,
        r,
        coefficients,
        steering_value: steering.value,
        steering_imag_residue: steering.imag_residue,
        bell_value,
        verdict,
        tolerances,
    })
}

/// Zero-pads every element into the first `dim` basis vectors of a larger
/// space. Traces are unchanged, so validity is preserved.
pub fn embed_assemblage(asm: &Assemblage, dim: usize) -> Result<Assemblage> {
    let old = asm.scenario.d_c;
    if dim < old {
        return Err(Error::InvalidParameter(
            "embedding target smaller than current dimension".into(),
        ));
    }
    let mut scenario = asm.scenario.clone();
    scenario.d_c = dim;
    Assemblage::build(scenario, |a, b, x, y| {
        let m = asm.element(a, b, x, y);
        ComplexMatrix::from_fn(dim, |i, j| {
            if i < old && j < old {
                m[(i, j)]
            } else {
                C64::new(0.0, 0.0)
            }
        })
    })
}

/// Activation for arbitrary steered dimension: isometrically zero-pads the
/// assemblage and the functional into n = ⌈log2 d⌉ qubits, then runs
/// `activate`. Padded values equal the originals because the functional is
/// zero outside the embedded block.
pub fn activate_n(
    asm: &Assemblage,
    functional: &SteeringFunctional,
    r: f64,
) -> Result<ActivationReport> {
    activate_n_with(asm, functional, r, ToleranceSet::default())
}

pub fn activate_n_with(
    asm: &Assemblage,
    functional: &SteeringFunctional,
    r: f64,
    tolerances: ToleranceSet,
) -> Result<ActivationReport> {
    let d = asm.scenario.d_c;
    if d < 2 {
        return Err(Error::InvalidParameter(
            "steered dimension must be at least 2".into(),
        ));
    }
    if d.is_power_of_two() {
        return activate_with(asm, functional, r, tolerances);
    }
    let n = (usize::BITS - (d - 1).leading_zeros()) as usize;
    let target = 1usize << n;
    let padded_asm = embed_assemblage(asm, target)?;
    let padded_f = functional.pad_to(target)?;
    activate_with(&padded_asm, &padded_f, r, tolerances)
}
