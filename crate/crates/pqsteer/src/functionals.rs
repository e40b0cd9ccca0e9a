//! Steering and Bell functionals: evaluating a steering functional on an
//! assemblage, decomposing its coefficient operators in the Pauli-steered
//! basis to get network Bell coefficients, correlation tables with their
//! validity checks, correlator expressions (the self-testing inequality and
//! CHSH live here), and the activated Bell value.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::assemblage::{
    read_json, write_json, Assemblage, ConstraintCheck, DaniBlock, Loaded, Scenario,
    ValidationReport,
};
use crate::error::{Error, Result};
use crate::mat::{ComplexMatrix, C64, FEASIBILITY_TOL};
use crate::quantum::{pauli_steered_elements, tensor_pauli_basis, QuantumModel};

/// A steering functional: one Hermitian coefficient operator F_abxy per
/// index tuple, with the bound its value respects on quantum assemblages
/// (0 for every functional shipped here).
#[derive(Clone, Debug)]
pub struct SteeringFunctional {
    pub scenario: Scenario,
    coefficients: Vec<ComplexMatrix>,
    pub quantum_bound: f64,
}

impl SteeringFunctional {
    pub fn new(
        scenario: Scenario,
        coefficients: Vec<ComplexMatrix>,
        quantum_bound: f64,
    ) -> Result<Self> {
        scenario.check()?;
        let count = scenario.n_a * scenario.n_b * scenario.n_x * scenario.n_y;
        if coefficients.len() != count {
            return Err(Error::DimensionMismatch(format!(
                "expected {} coefficient operators, got {}",
                count,
                coefficients.len()
            )));
        }
        for (k, m) in coefficients.iter().enumerate() {
            if m.dim() != scenario.d_c {
                return Err(Error::DimensionMismatch(format!(
                    "coefficient #{} has dim {}, scenario d_c is {}",
                    k,
                    m.dim(),
                    scenario.d_c
                )));
            }
            let res = m.hermitian_residual();
            if res > 1e-12 {
                return Err(Error::NotHermitian(res));
            }
        }
        Ok(Self {
            scenario,
            coefficients,
            quantum_bound,
        })
    }

    pub fn build(
        scenario: Scenario,
        quantum_bound: f64,
        mut f: impl FnMut(usize, usize, usize, usize) -> ComplexMatrix,
    ) -> Result<Self> {
        let mut coefficients = Vec::new();
        for a in 0..scenario.n_a {
            for b in 0..scenario.n_b {
                for x in 0..scenario.n_x {
                    for y in 0..scenario.n_y {
                        coefficients.push(f(a, b, x, y));
                    }
                }
            }
        }
        Self::new(scenario, coefficients, quantum_bound)
    }

    pub fn coefficient(&self, a: usize, b: usize, x: usize, y: usize) -> &ComplexMatrix {
        let s = &self.scenario;
        &self.coefficients[((a * s.n_b + b) * s.n_x + x) * s.n_y + y]
    }

    pub fn coefficients(&self) -> &[ComplexMatrix] {
        &self.coefficients
    }

    /// Zero-pads every coefficient operator into a larger dimension (values
    /// on the embedded block are unchanged, zero outside).
    pub fn pad_to(&self, dim: usize) -> Result<Self> {
        if dim < self.scenario.d_c {
            return Err(Error::InvalidParameter(
                "padding target smaller than current dimension".into(),
            ));
        }
        let mut scenario = self.scenario.clone();
        scenario.d_c = dim;
        let old = self.scenario.d_c;
        let coefficients = self
            .coefficients
            .iter()
            .map(|m| {
                ComplexMatrix::from_fn(dim, |i, j| {
                    if i < old && j < old {
                        m[(i, j)]
                    } else {
                        C64::new(0.0, 0.0)
                    }
                })
            })
            .collect();
        Ok(Self {
            scenario,
            coefficients,
            quantum_bound: self.quantum_bound,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let s = &self.scenario;
        let mut records = Vec::new();
        for a in 0..s.n_a {
            for b in 0..s.n_b {
                for x in 0..s.n_x {
                    for y in 0..s.n_y {
                        records.push(FunctionalRecord {
                            a,
                            b,
                            x,
                            y,
                            matrix: self.coefficient(a, b, x, y).clone(),
                        });
                    }
                }
            }
        }
        write_json(
            path,
            &FunctionalFile {
                scenario: s.clone(),
                quantum_bound: self.quantum_bound,
                coefficients: records,
            },
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Loaded<Self>> {
        let file: FunctionalFile = read_json(path)?;
        let s = &file.scenario;
        s.check()?;
        let count = s.n_a * s.n_b * s.n_x * s.n_y;
        let mut slots: Vec<Option<ComplexMatrix>> = vec![None; count];
        for rec in file.coefficients {
            if rec.a >= s.n_a || rec.b >= s.n_b || rec.x >= s.n_x || rec.y >= s.n_y {
                return Err(Error::Parse(format!(
                    "coefficient key (a={},b={},x={},y={}) out of range",
                    rec.a, rec.b, rec.x, rec.y
                )));
            }
            let idx = ((rec.a * s.n_b + rec.b) * s.n_x + rec.x) * s.n_y + rec.y;
            if slots[idx].is_some() {
                return Err(Error::Parse("duplicate coefficient key".into()));
            }
            slots[idx] = Some(rec.matrix);
        }
        if slots.iter().any(Option::is_none) {
            return Err(Error::Parse("missing coefficient keys".into()));
        }
        let value = Self::new(
            file.scenario,
            slots.into_iter().map(Option::unwrap).collect(),
            file.quantum_bound,
        )?;
        Ok(Loaded {
            value,
            warnings: Vec::new(),
        })
    }
}

#[derive(Serialize, Deserialize)]
struct FunctionalFile {
    scenario: Scenario,
    quantum_bound: f64,
    coefficients: Vec<FunctionalRecord>,
}

#[derive(Serialize, Deserialize)]
struct FunctionalRecord {
    a: usize,
    b: usize,
    x: usize,
    y: usize,
    matrix: ComplexMatrix,
}

/// A real trace sum together with the imaginary residue that was discarded
/// to produce it. The residue stays below 1e-10 for Hermitian data; it is
/// carried so callers can see when it does not.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TraceSum {
    pub value: f64,
    pub imag_residue: f64,
}

/// Σ_abxy tr(F_abxy σ_ab|xy). Non-negative whenever the assemblage has a
/// quantum realization and the functional's quantum bound is 0.
pub fn evaluate_steering(functional: &SteeringFunctional, asm: &Assemblage) -> Result<TraceSum> {
    if functional.scenario != asm.scenario {
        return Err(Error::DimensionMismatch(
            "functional and assemblage scenarios differ".into(),
        ));
    }
    let mut acc = C64::new(0.0, 0.0);
    for ((a, b, x, y), m) in asm.iter() {
        acc += functional.coefficient(a, b, x, y).trace_product(m);
    }
    Ok(TraceSum {
        value: acc.re,
        imag_residue: acc.im.abs(),
    })
}

/// The shifted-CHSH steering functional
/// F_abxy = (√2/2 − (−1)^{a⊕b⊕xy}) · I/d. Its value on an assemblage equals
/// 2√2 − CHSH(correlation marginal), which is ≥ 0 for quantum assemblages
/// and 2√2 − 4 on the PR box.
pub fn shifted_chsh_functional(d_c: usize) -> SteeringFunctional {
    let scenario = Scenario::new(2, 2, 2, 2, d_c);
    SteeringFunctional::build(scenario, 0.0, |a, b, x, y| {
        let sign = if (a ^ b ^ (x & y)) == 0 { 1.0 } else { -1.0 };
        let shift = 2f64.sqrt() / 2.0 - sign;
        ComplexMatrix::identity(d_c).scale(shift)
    })
    .expect("static scenario")
}

/// Real coefficient tensor f_{abdxyw} of the network Bell functional
/// obtained by expanding each F_abxy over the Pauli-steered family.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct BellCoefficients {
    pub scenario: Scenario,
    /// Index order (a, b, d, x, y, w), row-major.
    pub coefficients: Vec<f64>,
    /// Qubit count of the reference family the expansion used.
    pub n: usize,
}

impl BellCoefficients {
    pub fn dani(&self) -> &DaniBlock {
        self.scenario.dani.as_ref().expect("built with dani block")
    }

    pub fn index(&self, a: usize, b: usize, d: usize, x: usize, y: usize, w: usize) -> usize {
        let s = &self.scenario;
        let dn = self.dani();
        ((((a * s.n_b + b) * dn.n_d + d) * s.n_x + x) * s.n_y + y) * dn.n_w + w
    }

    pub fn get(&self, a: usize, b: usize, d: usize, x: usize, y: usize, w: usize) -> f64 {
        self.coefficients[self.index(a, b, d, x, y, w)]
    }

    pub fn zeros_like(scenario: Scenario, n: usize) -> Self {
        let dn = scenario.dani.clone().expect("needs dani block");
        let len =
            scenario.n_a * scenario.n_b * dn.n_d * scenario.n_x * scenario.n_y * dn.n_w;
        Self {
            scenario,
            coefficients: vec![0.0; len],
            n,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        read_json(path)
    }
}

/// Expands each coefficient operator of a steering functional as a real
/// combination of the Pauli-steered family on n qubits:
///
///   F = Σ_dw f_dw σ̃_d|w,
///
/// using the canonical rule per tensor factor: an identity component spreads
/// tr-part/6 over all six (d_i, w_i) pairs, a Pauli component P contributes
/// (−1)^{d_i} to its own w_i. Reconstruction is exact because the rule
/// reproduces each tensor-Pauli basis operator factor by factor.
pub fn decompose_to_bell(functional: &SteeringFunctional, n: usize) -> Result<BellCoefficients> {
    let d_c = functional.scenario.d_c;
    if d_c != 1usize << n {
        return Err(Error::DimensionMismatch(format!(
            "d_c = {} is not 2^{}; embed the functional first",
            d_c, n
        )));
    }
    let basis = tensor_pauli_basis(n);
    let n_d = 1usize << n;
    let n_w = 3usize.pow(n as u32);
    let scenario = functional
        .scenario
        .clone()
        .with_dani(n_w, n_d, (1usize << n) * 2);
    let mut out = BellCoefficients::zeros_like(scenario, n);

    let s = functional.scenario.clone();
    for a in 0..s.n_a {
        for b in 0..s.n_b {
            for x in 0..s.n_x {
                for y in 0..s.n_y {
                    let f_op = functional.coefficient(a, b, x, y);
                    // Real Pauli expansion coefficients c_s = tr(B_s F)/2^n.
                    let coeffs: Vec<f64> = basis
                        .iter()
                        .map(|bmat| bmat.trace_product(f_op).re / (1u64 << n) as f64)
                        .collect();
                    for (sidx, &c) in coeffs.iter().enumerate() {
                        if c == 0.0 {
                            continue;
                        }
                        // Base-4 digits of the basis index, leftmost factor
                        // first.
                        let mut digits = Vec::with_capacity(n);
                        let mut rest = sidx;
                        for _ in 0..n {
                            digits.push(rest % 4);
                            rest /= 4;
                        }
                        digits.reverse();
                        for d in 0..n_d {
                            for w in 0..n_w {
                                let mut wd = Vec::with_capacity(n);
                                let mut wrest = w;
                                for _ in 0..n {
                                    wd.push(wrest % 3);
                                    wrest /= 3;
                                }
                                wd.reverse();
                                let mut weight = 1.0;
                                for i in 0..n {
                                    let di = (d >> (n - 1 - i)) & 1;
                                    weight *= match digits[i] {
                                        0 => 1.0 / 3.0,
                                        p => {
                                            if wd[i] == p - 1 {
                                                if di == 0 {
                                                    1.0
                                                } else {
                                                    -1.0
                                                }
                                            } else {
                                                0.0
                                            }
                                        }
                                    };
                                    if weight == 0.0 {
                                        break;
                                    }
                                }
                                if weight != 0.0 {
                                    let idx = out.index(a, b, d, x, y, w);
                                    out.coefficients[idx] += c * weight;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Rebuilds Σ_dw f_dw σ̃_d|w for one (a,b,x,y); test hook for the exactness
/// of the decomposition.
pub fn reconstruct_coefficient(
    bell: &BellCoefficients,
    a: usize,
    b: usize,
    x: usize,
    y: usize,
) -> ComplexMatrix {
    let sp = pauli_steered_elements(bell.n);
    let mut acc = ComplexMatrix::zeros(1 << bell.n);
    for d in 0..sp.n_d() {
        for w in 0..sp.n_w() {
            acc = acc.add(&sp.element(d, w).scale(bell.get(a, b, d, x, y, w)));
        }
    }
    acc
}

/// Correlations p(cd|zw) between Charlie and Dani, binary outcomes.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CdCorrelations {
    pub n_z: usize,
    pub n_w: usize,
    /// Index order (c, d, z, w), row-major; c, d ∈ {0, 1}.
    pub p: Vec<f64>,
}

impl CdCorrelations {
    pub fn new(n_z: usize, n_w: usize, p: Vec<f64>) -> Result<Self> {
        if p.len() != 4 * n_z * n_w {
            return Err(Error::DimensionMismatch(format!(
                "expected {} probabilities, got {}",
                4 * n_z * n_w,
                p.len()
            )));
        }
        Ok(Self { n_z, n_w, p })
    }

    pub fn get(&self, c: usize, d: usize, z: usize, w: usize) -> f64 {
        self.p[((c * 2 + d) * self.n_z + z) * self.n_w + w]
    }

    /// E_zw = Σ_cd (−1)^{c+d} p(cd|zw).
    pub fn correlator(&self, z: usize, w: usize) -> f64 {
        let mut e = 0.0;
        for c in 0..2 {
            for d in 0..2 {
                let sign = if (c + d) % 2 == 0 { 1.0 } else { -1.0 };
                e += sign * self.get(c, d, z, w);
            }
        }
        e
    }

    /// Born-rule table of a two-party model (party 0 = Charlie = z, party 1
    /// = Dani = w), both with binary outcomes.
    pub fn from_model(model: &QuantumModel) -> Result<Self> {
        let rep = model.validate();
        if !rep.pass {
            return Err(Error::Validation(format!(
                "model fails validation (worst {:.3e})",
                rep.worst_violation()
            )));
        }
        if model.dims.len() != 2 {
            return Err(Error::InvalidParameter("needs a 2-party model".into()));
        }
        let n_z = model.measurements[0].len();
        let n_w = model.measurements[1].len();
        if model.measurements[0].iter().any(|s| s.len() != 2)
            || model.measurements[1].iter().any(|s| s.len() != 2)
        {
            return Err(Error::InvalidParameter(
                "both parties must have binary outcomes".into(),
            ));
        }
        let mut p = vec![0.0; 4 * n_z * n_w];
        for c in 0..2 {
            for d in 0..2 {
                for z in 0..n_z {
                    for w in 0..n_w {
                        let op = model.measurements[0][z][c].kron(&model.measurements[1][w][d]);
                        p[((c * 2 + d) * n_z + z) * n_w + w] =
                            op.trace_product(&model.state).re;
                    }
                }
            }
        }
        Self::new(n_z, n_w, p)
    }

    pub fn validate(&self) -> ValidationReport {
        let tol = FEASIBILITY_TOL;
        let mut checks = Vec::new();
        let min = self.p.iter().cloned().fold(f64::INFINITY, f64::min);
        checks.push(ConstraintCheck {
            name: "nonnegative".into(),
            pass: min >= -tol,
            worst: (-min).max(0.0),
            detail: "probabilities >= -tol".into(),
        });
        let mut worst = 0.0f64;
        for z in 0..self.n_z {
            for w in 0..self.n_w {
                let total: f64 = (0..2)
                    .flat_map(|c| (0..2).map(move |d| (c, d)))
                    .map(|(c, d)| self.get(c, d, z, w))
                    .sum();
                worst = worst.max((total - 1.0).abs());
            }
        }
        checks.push(ConstraintCheck {
            name: "normalization".into(),
            pass: worst <= tol,
            worst,
            detail: "sum_cd p(cd|zw) = 1".into(),
        });
        let mut worst = 0.0f64;
        for c in 0..2 {
            for z in 0..self.n_z {
                let base: f64 = (0..2).map(|d| self.get(c, d, z, 0)).sum();
                for w in 1..self.n_w {
                    let m: f64 = (0..2).map(|d| self.get(c, d, z, w)).sum();
                    worst = worst.max((m - base).abs());
                }
            }
        }
        for d in 0..2 {
            for w in 0..self.n_w {
                let base: f64 = (0..2).map(|c| self.get(c, d, 0, w)).sum();
                for z in 1..self.n_z {
                    let m: f64 = (0..2).map(|c| self.get(c, d, z, w)).sum();
                    worst = worst.max((m - base).abs());
                }
            }
        }
        checks.push(ConstraintCheck {
            name: "no_signalling".into(),
            pass: worst <= tol,
            worst,
            detail: "marginals independent of the other input".into(),
        });
        ValidationReport {
            pass: checks.iter().all(|c| c.pass),
            tolerance: tol,
            checks,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        read_json(path)
    }
}

/// A linear combination Σ_zw g_zw E_zw of two-party correlators.
#[derive(Clone, Debug)]
pub struct CorrelatorExpression {
    pub n_z: usize,
    pub n_w: usize,
    /// g[z][w]
    pub g: Vec<Vec<f64>>,
}

impl CorrelatorExpression {
    pub fn evaluate(&self, corr: &CdCorrelations) -> Result<f64> {
        if corr.n_z < self.n_z || corr.n_w < self.n_w {
            return Err(Error::DimensionMismatch(format!(
                "expression needs {}x{} settings, table has {}x{}",
                self.n_z, self.n_w, corr.n_z, corr.n_w
            )));
        }
        let mut v = 0.0;
        for z in 0..self.n_z {
            for w in 0..self.n_w {
                if self.g[z][w] != 0.0 {
                    v += self.g[z][w] * corr.correlator(z, w);
                }
            }
        }
        Ok(v)
    }
}

/// Coefficients of the 12-term self-testing inequality: three CHSH-type
/// blocks pairing Charlie's six observables with Dani's three, classical
/// bound 6, quantum maximum 6√2.
pub fn icd_expression() -> CorrelatorExpression {
    let mut g = vec![vec![0.0; 3]; 6];
    g[0][0] = 1.0; // E_11
    g[0][1] = 1.0; // E_12
    g[1][0] = -1.0; // -E_21
    g[1][1] = 1.0; // E_22
    g[2][0] = 1.0; // E_31
    g[3][0] = 1.0; // E_41
    g[2][2] = 1.0; // E_33
    g[3][2] = -1.0; // -E_43
    g[4][1] = 1.0; // E_52
    g[5][1] = 1.0; // E_62
    g[4][2] = 1.0; // E_53
    g[5][2] = -1.0; // -E_63
    CorrelatorExpression { n_z: 6, n_w: 3, g }
}

/// The self-testing score of a (c,d|z,w) table: the 12-term correlator
/// combination above. Needs at least six z settings and three w settings.
pub fn icd_value(corr: &CdCorrelations) -> Result<f64> {
    icd_expression().evaluate(corr)
}

/// Four-party correlation table p(abcd|xyzw). Charlie's settings include the
/// distinguished joint measurement `star` with binary outcomes.
#[derive(Clone, Debug)]
pub struct NetworkCorrelations {
    pub n_a: usize,
    pub n_b: usize,
    pub n_c: usize,
    pub n_d: usize,
    pub n_x: usize,
    pub n_y: usize,
    pub n_z: usize,
    pub n_w: usize,
    /// Charlie's setting index holding the joint readout measurement.
    pub star: usize,
    /// Index order (a, b, c, d, x, y, z, w), row-major.
    pub p: Vec<f64>,
}

impl NetworkCorrelations {
    pub fn get(
        &self,
        a: usize,
        b: usize,
        c: usize,
        d: usize,
        x: usize,
        y: usize,
        z: usize,
        w: usize,
    ) -> f64 {
        let idx = ((((((a * self.n_b + b) * self.n_c + c) * self.n_d + d) * self.n_x + x)
            * self.n_y
            + y)
            * self.n_z
            + z)
            * self.n_w
            + w;
        self.p[idx]
    }

    pub(crate) fn set(
        &mut self,
        a: usize,
        b: usize,
        c: usize,
        d: usize,
        x: usize,
        y: usize,
        z: usize,
        w: usize,
        value: f64,
    ) {
        let idx = ((((((a * self.n_b + b) * self.n_c + c) * self.n_d + d) * self.n_x + x)
            * self.n_y
            + y)
            * self.n_z
            + z)
            * self.n_w
            + w;
        self.p[idx] = value;
    }

    /// Dani's outcome distribution p(d|w), evaluated at x = y = 0 and
    /// z = star (no-signalling makes the choice immaterial).
    pub fn dani_marginal(&self, d: usize, w: usize) -> f64 {
        let mut total = 0.0;
        for a in 0..self.n_a {
            for b in 0..self.n_b {
                for c in 0..self.n_c {
                    total += self.get(a, b, c, d, 0, 0, self.star, w);
                }
            }
        }
        total
    }

    /// Marginal table p(cd|zw) (summed over a, b at x = y = 0). Defined for
    /// binary Charlie and Dani outcomes.
    pub fn cd_marginal(&self) -> Result<CdCorrelations> {
        if self.n_c != 2 || self.n_d != 2 {
            return Err(Error::DimensionMismatch(format!(
                "cd marginal needs binary outcomes, table has n_c = {}, n_d = {}",
                self.n_c, self.n_d
            )));
        }
        let mut p = vec![0.0; 4 * self.n_z * self.n_w];
        for c in 0..2 {
            for d in 0..2 {
                for z in 0..self.n_z {
                    for w in 0..self.n_w {
                        let mut total = 0.0;
                        for a in 0..self.n_a {
                            for b in 0..self.n_b {
                                total += self.get(a, b, c, d, 0, 0, z, w);
                            }
                        }
                        p[((c * 2 + d) * self.n_z + z) * self.n_w + w] = total;
                    }
                }
            }
        }
        Ok(CdCorrelations {
            n_z: self.n_z,
            n_w: self.n_w,
            p,
        })
    }

    pub fn validate(&self) -> ValidationReport {
        let tol = FEASIBILITY_TOL;
        let mut checks = Vec::new();
        let min = self.p.iter().cloned().fold(f64::INFINITY, f64::min);
        checks.push(ConstraintCheck {
            name: "nonnegative".into(),
            pass: min >= -tol,
            worst: (-min).max(0.0),
            detail: "probabilities >= -tol".into(),
        });

        let mut worst = 0.0f64;
        for x in 0..self.n_x {
            for y in 0..self.n_y {
                for z in 0..self.n_z {
                    for w in 0..self.n_w {
                        let mut total = 0.0;
                        for a in 0..self.n_a {
                            for b in 0..self.n_b {
                                for c in 0..self.n_c {
                                    for d in 0..self.n_d {
                                        total += self.get(a, b, c, d, x, y, z, w);
                                    }
                                }
                            }
                        }
                        worst = worst.max((total - 1.0).abs());
                    }
                }
            }
        }
        checks.push(ConstraintCheck {
            name: "normalization".into(),
            pass: worst <= tol,
            worst,
            detail: "sum_abcd p = 1 per input tuple".into(),
        });

        // No-signalling: for each party, its outcome marginal must not
        // depend on its own input once the outcome is summed out.
        let mut worst = 0.0f64;
        // Alice
        for b in 0..self.n_b {
            for c in 0..self.n_c {
                for d in 0..self.n_d {
                    for y in 0..self.n_y {
                        for z in 0..self.n_z {
                            for w in 0..self.n_w {
                                let base: f64 = (0..self.n_a)
                                    .map(|a| self.get(a, b, c, d, 0, y, z, w))
                                    .sum();
                                for x in 1..self.n_x {
                                    let m: f64 = (0..self.n_a)
                                        .map(|a| self.get(a, b, c, d, x, y, z, w))
                                        .sum();
                                    worst = worst.max((m - base).abs());
                                }
                            }
                        }
                    }
                }
            }
        }
        // Bob
        for a in 0..self.n_a {
            for c in 0..self.n_c {
                for d in 0..self.n_d {
                    for x in 0..self.n_x {
                        for z in 0..self.n_z {
                            for w in 0..self.n_w {
                                let base: f64 = (0..self.n_b)
                                    .map(|b| self.get(a, b, c, d, x, 0, z, w))
                                    .sum();
                                for y in 1..self.n_y {
                                    let m: f64 = (0..self.n_b)
                                        .map(|b| self.get(a, b, c, d, x, y, z, w))
                                        .sum();
                                    worst = worst.max((m - base).abs());
                                }
                            }
                        }
                    }
                }
            }
        }
        // Charlie
        for a in 0..self.n_a {
            for b in 0..self.n_b {
                for d in 0..self.n_d {
                    for x in 0..self.n_x {
                        for y in 0..self.n_y {
                            for w in 0..self.n_w {
                                let base: f64 = (0..self.n_c)
                                    .map(|c| self.get(a, b, c, d, x, y, 0, w))
                                    .sum();
                                for z in 1..self.n_z {
                                    let m: f64 = (0..self.n_c)
                                        .map(|c| self.get(a, b, c, d, x, y, z, w))
                                        .sum();
                                    worst = worst.max((m - base).abs());
                                }
                            }
                        }
                    }
                }
            }
        }
        // Dani
        for a in 0..self.n_a {
            for b in 0..self.n_b {
                for c in 0..self.n_c {
                    for x in 0..self.n_x {
                        for y in 0..self.n_y {
                            for z in 0..self.n_z {
                                let base: f64 = (0..self.n_d)
                                    .map(|d| self.get(a, b, c, d, x, y, z, 0))
                                    .sum();
                                for w in 1..self.n_w {
                                    let m: f64 = (0..self.n_d)
                                        .map(|d| self.get(a, b, c, d, x, y, z, w))
                                        .sum();
                                    worst = worst.max((m - base).abs());
                                }
                            }
                        }
                    }
                }
            }
        }
        checks.push(ConstraintCheck {
            name: "no_signalling".into(),
            pass: worst <= tol,
            worst,
            detail: "each party's marginal independent of its input".into(),
        });

        ValidationReport {
            pass: checks.iter().all(|c| c.pass),
            tolerance: tol,
            checks,
        }
    }
}

/// The activated Bell value: contracts f_{abdxyw} against the joint
/// probabilities p(ab, c=0, d | xy, star, w), weighted per Dani outcome.
/// The stored joint table carries Dani's uniform outcome factor 1/n_d (the
/// reference resource steers with equal weight), while the coefficients are
/// defined against unit-weight reference operators; the contraction is
/// therefore rescaled by n_d. Negative values certify that no quantum model
/// generates the Alice–Bob side of the table.
pub fn evaluate_bell(bell: &BellCoefficients, corr: &NetworkCorrelations) -> Result<f64> {
    let s = &bell.scenario;
    let dn = bell.dani();
    if corr.n_a != s.n_a
        || corr.n_b != s.n_b
        || corr.n_x != s.n_x
        || corr.n_y != s.n_y
        || corr.n_d != dn.n_d
        || corr.n_w != dn.n_w
    {
        return Err(Error::DimensionMismatch(
            "coefficient and table shapes differ".into(),
        ));
    }
    if corr.star >= corr.n_z {
        return Err(Error::Missing("table has no star setting".into()));
    }
    let mut value = 0.0;
    for a in 0..s.n_a {
        for b in 0..s.n_b {
            for d in 0..dn.n_d {
                for x in 0..s.n_x {
                    for y in 0..s.n_y {
                        for w in 0..dn.n_w {
                            let f = bell.get(a, b, d, x, y, w);
                            if f != 0.0 {
                                value += f * corr.get(a, b, 0, d, x, y, corr.star, w);
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(value * dn.n_d as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{
        assemblage_from_model, observable_effects, pr_box_assemblage, rng_from_seed,
        sample_quantum_assemblage, tsirelson_model, Pauli,
    };
    use rand::Rng;

    const SQRT2: f64 = std::f64::consts::SQRT_2;

    #[test]
    fn normalization_functional_evaluates_to_one() {
        let f = SteeringFunctional::build(Scenario::new(2, 2, 2, 2, 2), 0.0, |_, _, _, _| {
            ComplexMatrix::identity(2).scale(0.25)
        })
        .unwrap();
        let pr = pr_box_assemblage();
        assert!((evaluate_steering(&f, &pr).unwrap().value - 1.0).abs() < 1e-12);
        let qs = sample_quantum_assemblage(&Scenario::new(2, 2, 2, 2, 2), 2, 2, 3).unwrap();
        assert!((evaluate_steering(&f, &qs).unwrap().value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shifted_chsh_on_pr_box_matches_hand_sum() {
        // Oracle: direct 16-term sum over the PR probabilities.
        let mut expected = 0.0;
        for a in 0..2usize {
            for b in 0..2usize {
                for x in 0..2usize {
                    for y in 0..2usize {
                        let p = if a ^ b == x & y { 0.5 } else { 0.0 };
                        let sign = if (a ^ b ^ (x & y)) == 0 { 1.0 } else { -1.0 };
                        expected += (SQRT2 / 2.0 - sign) * p;
                    }
                }
            }
        }
        assert!((expected - (2.0 * SQRT2 - 4.0)).abs() < 1e-12);

        let f = shifted_chsh_functional(2);
        let got = evaluate_steering(&f, &pr_box_assemblage()).unwrap();
        assert!((got.value - expected).abs() < 1e-12);
        assert!(got.imag_residue < 1e-12);
    }

    #[test]
    fn shifted_chsh_on_local_deterministic_point() {
        // a = b = 0 regardless of input: CHSH = 2, shifted value 2√2 − 2.
        let rho = ComplexMatrix::identity(2).scale(0.5);
        let mut probs = vec![0.0; 16];
        probs[0] = 1.0; // (a,b,x,y) stride: a=0,b=0 covers first 4 slots
        probs[1] = 1.0;
        probs[2] = 1.0;
        probs[3] = 1.0;
        let asm = Assemblage::unsteered(Scenario::new(2, 2, 2, 2, 2), &probs, &rho).unwrap();
        let f = shifted_chsh_functional(2);
        let v = evaluate_steering(&f, &asm).unwrap().value;
        assert!((v - (2.0 * SQRT2 - 2.0)).abs() < 1e-12);
    }

    #[test]
    fn shifted_chsh_vanishes_at_the_quantum_maximum() {
        let asm = assemblage_from_model(&tsirelson_model(), 2).unwrap();
        let f = shifted_chsh_functional(2);
        assert!(evaluate_steering(&f, &asm).unwrap().value.abs() < 1e-12);
    }

    #[test]
    fn shifted_chsh_nonnegative_on_sampled_quantum_assemblages() {
        let f = shifted_chsh_functional(2);
        let s = Scenario::new(2, 2, 2, 2, 2);
        for seed in 0..200 {
            let asm = sample_quantum_assemblage(&s, 2, 2, seed).unwrap();
            let v = evaluate_steering(&f, &asm).unwrap().value;
            assert!(v >= -1e-7, "seed {} gave {}", seed, v);
        }
    }

    #[test]
    fn decompose_identity_spreads_uniformly() {
        let f = SteeringFunctional::build(Scenario::new(1, 1, 1, 1, 2), 0.0, |_, _, _, _| {
            ComplexMatrix::identity(2)
        })
        .unwrap();
        let bell = decompose_to_bell(&f, 1).unwrap();
        for d in 0..2 {
            for w in 0..3 {
                assert!((bell.get(0, 0, d, 0, 0, w) - 1.0 / 3.0).abs() < 1e-14);
            }
        }
        let rec = reconstruct_coefficient(&bell, 0, 0, 0, 0);
        assert!(rec.max_abs_diff(&ComplexMatrix::identity(2)) < 1e-14);
    }

    #[test]
    fn decompose_pauli_z_hits_its_own_setting() {
        let f = SteeringFunctional::build(Scenario::new(1, 1, 1, 1, 2), 0.0, |_, _, _, _| {
            Pauli::Z.matrix()
        })
        .unwrap();
        let bell = decompose_to_bell(&f, 1).unwrap();
        for d in 0..2 {
            for w in 0..3 {
                let expected = if w == 2 {
                    if d == 0 {
                        1.0
                    } else {
                        -1.0
                    }
                } else {
                    0.0
                };
                assert!((bell.get(0, 0, d, 0, 0, w) - expected).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn decompose_zz_is_parity_weighted() {
        let zz = Pauli::Z.matrix().kron(&Pauli::Z.matrix());
        let f = SteeringFunctional::build(Scenario::new(1, 1, 1, 1, 4), 0.0, |_, _, _, _| {
            zz.clone()
        })
        .unwrap();
        let bell = decompose_to_bell(&f, 2).unwrap();
        // w index of (Z,Z) is 8; coefficient (−1)^{d1+d2}.
        for d in 0..4usize {
            for w in 0..9 {
                let parity = ((d >> 1) + (d & 1)) % 2;
                let expected = if w == 8 {
                    if parity == 0 {
                        1.0
                    } else {
                        -1.0
                    }
                } else {
                    0.0
                };
                assert!((bell.get(0, 0, d, 0, 0, w) - expected).abs() < 1e-14);
            }
        }
        let rec = reconstruct_coefficient(&bell, 0, 0, 0, 0);
        assert!(rec.max_abs_diff(&zz) < 1e-13);
    }

    #[test]
    fn decomposition_reconstructs_random_hermitian_exactly() {
        for (n, dim) in [(1usize, 2usize), (2, 4)] {
            let mut rng = rng_from_seed(21 + n as u64);
            for _ in 0..20 {
                let h = ComplexMatrix::from_fn(dim, |_, _| {
                    C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
                })
                .symmetrize();
                let f = SteeringFunctional::build(
                    Scenario::new(1, 1, 1, 1, dim),
                    0.0,
                    |_, _, _, _| h.clone(),
                )
                .unwrap();
                let bell = decompose_to_bell(&f, n).unwrap();
                let rec = reconstruct_coefficient(&bell, 0, 0, 0, 0);
                assert!(rec.max_abs_diff(&h) <= 1e-10);
            }
        }
    }

    #[test]
    fn decompose_rejects_non_power_of_two() {
        let f = SteeringFunctional::build(Scenario::new(1, 1, 1, 1, 3), 0.0, |_, _, _, _| {
            ComplexMatrix::identity(3)
        })
        .unwrap();
        assert!(decompose_to_bell(&f, 1).is_err());
    }

    #[test]
    fn uniform_table_has_zero_icd() {
        let corr = CdCorrelations::new(6, 3, vec![0.25; 4 * 18]).unwrap();
        assert!(icd_value(&corr).unwrap().abs() < 1e-15);
    }

    #[test]
    fn icd_relabel_invariance() {
        // Flipping both outcome labels leaves every correlator unchanged.
        let mut rng = rng_from_seed(5);
        let mut p = vec![0.0; 4 * 18];
        for z in 0..6 {
            for w in 0..3 {
                let mut cell = [0.0; 4];
                let mut total = 0.0;
                for v in cell.iter_mut() {
                    *v = rng.gen::<f64>();
                    total += *v;
                }
                for (k, v) in cell.iter().enumerate() {
                    p[(k * 6 + z) * 3 + w] = v / total;
                }
            }
        }
        let corr = CdCorrelations::new(6, 3, p.clone()).unwrap();
        let mut flipped = corr.clone();
        for z in 0..6 {
            for w in 0..3 {
                for c in 0..2 {
                    for d in 0..2 {
                        flipped.p[((c * 2 + d) * 6 + z) * 3 + w] =
                            corr.get(1 - c, 1 - d, z, w);
                    }
                }
            }
        }
        let v1 = icd_value(&corr).unwrap();
        let v2 = icd_value(&flipped).unwrap();
        assert!((v1 - v2).abs() < 1e-12);
    }

    #[test]
    fn icd_requires_enough_settings() {
        let corr = CdCorrelations::new(4, 3, vec![0.25; 4 * 12]).unwrap();
        assert!(icd_value(&corr).is_err());
    }

    #[test]
    fn functional_save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.json");
        let f = shifted_chsh_functional(2);
        f.save(&path).unwrap();
        let loaded = SteeringFunctional::load(&path).unwrap().value;
        assert_eq!(loaded.scenario, f.scenario);
        for (a, b) in loaded.coefficients().iter().zip(f.coefficients()) {
            assert!(a.max_abs_diff(b) == 0.0);
        }
    }

    #[test]
    fn charlie_dani_model_tables_validate() {
        let inv = 1.0 / SQRT2;
        let phi = vec![
            C64::new(inv, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(inv, 0.0),
        ];
        let z = Pauli::Z.matrix();
        let x = Pauli::X.matrix();
        let model = QuantumModel {
            dims: vec![2, 2],
            state: ComplexMatrix::outer(&phi),
            measurements: vec![
                vec![
                    observable_effects(&z).to_vec(),
                    observable_effects(&x).to_vec(),
                ],
                vec![
                    observable_effects(&x).to_vec(),
                    observable_effects(&Pauli::Y.matrix()).to_vec(),
                    observable_effects(&z).to_vec(),
                ],
            ],
        };
        let corr = CdCorrelations::from_model(&model).unwrap();
        assert!(corr.validate().pass);
        // ⟨Z ⊗ Z⟩ on Φ+ is 1.
        assert!((corr.correlator(0, 2) - 1.0).abs() < 1e-12);
    }
}
