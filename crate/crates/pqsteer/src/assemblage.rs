//! The assemblage data model: scenarios, the tripartite / bipartite /
//! four-party network assemblage types, their validity constraints
//! (positivity, normalization, no-signalling, reduced-state consistency),
//! tensoring, element transposes, and the on-disk JSON schema.
//!
//! Index conventions are fixed crate-wide: tripartite elements are keyed
//! (a, b, x, y), bipartite elements (d, w), network elements
//! (a, b, d, x, y, w). The flag qubit, where present, is the last tensor
//! factor.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::{ComplexMatrix, FEASIBILITY_TOL};

/// Cardinalities of the steering scenario: Alice and Bob's inputs/outputs and
/// the dimension of the steered system. The optional Dani block extends the
/// scenario to the four-party network.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub n_x: usize,
    pub n_y: usize,
    pub n_a: usize,
    pub n_b: usize,
    pub d_c: usize,
    #[serde(flatten, skip_serializing_if = "Option::is_none", default)]
    pub dani: Option<DaniBlock>,
}

/// Dani's input/output cardinalities and the dimension of Charlie's second
/// subsystem.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DaniBlock {
    pub n_w: usize,
    pub n_d: usize,
    pub d_cp: usize,
}

impl Scenario {
    pub fn new(n_x: usize, n_y: usize, n_a: usize, n_b: usize, d_c: usize) -> Self {
        Self {
            n_x,
            n_y,
            n_a,
            n_b,
            d_c,
            dani: None,
        }
    }

    pub fn with_dani(mut self, n_w: usize, n_d: usize, d_cp: usize) -> Self {
        self.dani = Some(DaniBlock { n_w, n_d, d_cp });
        self
    }

    pub fn check(&self) -> Result<()> {
        let mut all = vec![self.n_x, self.n_y, self.n_a, self.n_b, self.d_c];
        if let Some(d) = &self.dani {
            all.extend([d.n_w, d.n_d, d.d_cp]);
        }
        if all.contains(&0) {
            return Err(Error::InvalidParameter(
                "scenario cardinalities and dimensions must all be >= 1".into(),
            ));
        }
        Ok(())
    }

    fn element_count(&self) -> usize {
        self.n_a * self.n_b * self.n_x * self.n_y
    }
}

/// One constraint line of a validation report.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConstraintCheck {
    pub name: String,
    pub pass: bool,
    /// Worst violation magnitude, in max-entry norm where applicable.
    pub worst: f64,
    pub detail: String,
}

/// Outcome of validating an assemblage (or related object) against its
/// constraints; `pass` iff every constraint holds within tolerance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ValidationReport {
    pub pass: bool,
    pub tolerance: f64,
    pub checks: Vec<ConstraintCheck>,
}

impl ValidationReport {
    fn from_checks(tolerance: f64, checks: Vec<ConstraintCheck>) -> Self {
        Self {
            pass: checks.iter().all(|c| c.pass),
            tolerance,
            checks,
        }
    }

    pub fn worst_violation(&self) -> f64 {
        self.checks.iter().map(|c| c.worst).fold(0.0, f64::max)
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "validation: {} (tolerance {:.1e})",
            if self.pass { "PASS" } else { "FAIL" },
            self.tolerance
        )?;
        for c in &self.checks {
            writeln!(
                f,
                "  [{}] {} worst={:.3e} {}",
                if c.pass { "ok" } else { "FAIL" },
                c.name,
                c.worst,
                c.detail
            )?;
        }
        Ok(())
    }
}

fn check(name: &str, worst: f64, tol: f64, detail: String) -> ConstraintCheck {
    ConstraintCheck {
        name: name.to_string(),
        pass: worst <= tol,
        worst,
        detail,
    }
}

/// Tripartite assemblage: one subnormalized operator on Charlie's space per
/// (a, b, x, y).
#[derive(Clone, Debug, PartialEq)]
pub struct Assemblage {
    pub scenario: Scenario,
    elements: Vec<ComplexMatrix>,
}

impl Assemblage {
    pub fn from_elements(scenario: Scenario, elements: Vec<ComplexMatrix>) -> Result<Self> {
        scenario.check()?;
        if elements.len() != scenario.element_count() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} elements, got {}",
                scenario.element_count(),
                elements.len()
            )));
        }
        if let Some(m) = elements.iter().find(|m| m.dim() != scenario.d_c) {
            return Err(Error::DimensionMismatch(format!(
                "element dimension {} does not match d_c = {}",
                m.dim(),
                scenario.d_c
            )));
        }
        Ok(Self { scenario, elements })
    }

    pub fn build(
        scenario: Scenario,
        mut f: impl FnMut(usize, usize, usize, usize) -> ComplexMatrix,
    ) -> Result<Self> {
        scenario.check()?;
        let mut elements = Vec::with_capacity(scenario.element_count());
        for a in 0..scenario.n_a {
            for b in 0..scenario.n_b {
                for x in 0..scenario.n_x {
                    for y in 0..scenario.n_y {
                        elements.push(f(a, b, x, y));
                    }
                }
            }
        }
        Self::from_elements(scenario, elements)
    }

    /// Unsteered assemblage p(ab|xy) · ρ. `probs` is keyed like elements.
    pub fn unsteered(scenario: Scenario, probs: &[f64], rho: &ComplexMatrix) -> Result<Self> {
        if probs.len() != scenario.element_count() {
            return Err(Error::DimensionMismatch(
                "probability table size does not match scenario".into(),
            ));
        }
        let elems = probs.iter().map(|&p| rho.scale(p)).collect();
        Self::from_elements(scenario, elems)
    }

    pub fn index(&self, a: usize, b: usize, x: usize, y: usize) -> usize {
        let s = &self.scenario;
        ((a * s.n_b + b) * s.n_x + x) * s.n_y + y
    }

    pub fn element(&self, a: usize, b: usize, x: usize, y: usize) -> &ComplexMatrix {
        &self.elements[self.index(a, b, x, y)]
    }

    pub fn elements(&self) -> &[ComplexMatrix] {
        &self.elements
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize, usize, usize), &ComplexMatrix)> {
        let s = self.scenario.clone();
        self.elements.iter().enumerate().map(move |(k, m)| {
            let y = k % s.n_y;
            let x = (k / s.n_y) % s.n_x;
            let b = (k / (s.n_y * s.n_x)) % s.n_b;
            let a = k / (s.n_y * s.n_x * s.n_b);
            ((a, b, x, y), m)
        })
    }

    /// Σ_ab σ_ab|xy for one input pair.
    pub fn reduced_state(&self, x: usize, y: usize) -> ComplexMatrix {
        let mut acc = ComplexMatrix::zeros(self.scenario.d_c);
        for a in 0..self.scenario.n_a {
            for b in 0..self.scenario.n_b {
                acc = acc.add(self.element(a, b, x, y));
            }
        }
        acc
    }

    /// The correlation marginal p(ab|xy) = tr σ_ab|xy.
    pub fn probability(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.element(a, b, x, y).trace().re
    }

    /// Transposes every element. The transpose of a valid assemblage is
    /// valid: traces and spectra are transpose-invariant and the linear
    /// constraints commute with transposition.
    pub fn transpose_elements(&self) -> Self {
        Self {
            scenario: self.scenario.clone(),
            elements: self.elements.iter().map(|m| m.transpose()).collect(),
        }
    }

    pub fn validate(&self) -> ValidationReport {
        self.validate_with_tol(FEASIBILITY_TOL)
    }

    pub fn validate_with_tol(&self, tol: f64) -> ValidationReport {
        let s = &self.scenario;
        let mut checks = Vec::new();

        checks.push(hermiticity_check(&self.elements, tol));
        checks.push(psd_check(&self.elements, tol));

        // Normalization: Σ_ab tr σ_ab|xy = 1 for every (x, y).
        let mut worst = 0.0f64;
        for x in 0..s.n_x {
            for y in 0..s.n_y {
                let total: f64 = (0..s.n_a)
                    .flat_map(|a| (0..s.n_b).map(move |b| (a, b)))
                    .map(|(a, b)| self.probability(a, b, x, y))
                    .sum();
                worst = worst.max((total - 1.0).abs());
            }
        }
        checks.push(check(
            "normalization",
            worst,
            tol,
            "sum_ab tr sigma_ab|xy = 1 per (x,y)".into(),
        ));

        // No-signalling: Σ_a σ_ab|xy independent of x.
        let mut worst = 0.0f64;
        for b in 0..s.n_b {
            for y in 0..s.n_y {
                let base = self.sum_over_a(b, 0, y);
                for x in 1..s.n_x {
                    worst = worst.max(self.sum_over_a(b, x, y).max_abs_diff(&base));
                }
            }
        }
        checks.push(check(
            "no_signalling_a",
            worst,
            tol,
            "sum_a sigma_ab|xy independent of x".into(),
        ));

        let mut worst = 0.0f64;
        for a in 0..s.n_a {
            for x in 0..s.n_x {
                let base = self.sum_over_b(a, x, 0);
                for y in 1..s.n_y {
                    worst = worst.max(self.sum_over_b(a, x, y).max_abs_diff(&base));
                }
            }
        }
        checks.push(check(
            "no_signalling_b",
            worst,
            tol,
            "sum_b sigma_ab|xy independent of y".into(),
        ));

        // Reduced state identical for all input pairs.
        let base = self.reduced_state(0, 0);
        let mut worst = 0.0f64;
        for x in 0..s.n_x {
            for y in 0..s.n_y {
                worst = worst.max(self.reduced_state(x, y).max_abs_diff(&base));
            }
        }
        checks.push(check(
            "reduced_state",
            worst,
            tol,
            "sum_ab sigma_ab|xy independent of (x,y)".into(),
        ));

        ValidationReport::from_checks(tol, checks)
    }

    fn sum_over_a(&self, b: usize, x: usize, y: usize) -> ComplexMatrix {
        let mut acc = ComplexMatrix::zeros(self.scenario.d_c);
        for a in 0..self.scenario.n_a {
            acc = acc.add(self.element(a, b, x, y));
        }
        acc
    }

    fn sum_over_b(&self, a: usize, x: usize, y: usize) -> ComplexMatrix {
        let mut acc = ComplexMatrix::zeros(self.scenario.d_c);
        for b in 0..self.scenario.n_b {
            acc = acc.add(self.element(a, b, x, y));
        }
        acc
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = AssemblageFile {
            scenario: self.scenario.clone(),
            elements: self
                .iter()
                .map(|((a, b, x, y), m)| TripartiteRecord {
                    a,
                    b,
                    x,
                    y,
                    matrix: m.clone(),
                })
                .collect(),
        };
        write_json(path, &file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Loaded<Self>> {
        let file: AssemblageFile = read_json(path)?;
        let s = &file.scenario;
        s.check()?;
        let mut slots: Vec<Option<ComplexMatrix>> = vec![None; s.element_count()];
        for rec in file.elements {
            if rec.a >= s.n_a || rec.b >= s.n_b || rec.x >= s.n_x || rec.y >= s.n_y {
                return Err(Error::Parse(format!(
                    "element key (a={},b={},x={},y={}) out of range for scenario",
                    rec.a, rec.b, rec.x, rec.y
                )));
            }
            let idx = ((rec.a * s.n_b + rec.b) * s.n_x + rec.x) * s.n_y + rec.y;
            if slots[idx].is_some() {
                return Err(Error::Parse(format!(
                    "duplicate element key (a={},b={},x={},y={})",
                    rec.a, rec.b, rec.x, rec.y
                )));
            }
            slots[idx] = Some(rec.matrix);
        }
        let mut elements = Vec::with_capacity(slots.len());
        for (idx, slot) in slots.into_iter().enumerate() {
            match slot {
                Some(m) => elements.push(m),
                None => {
                    let y = idx % s.n_y;
                    let x = (idx / s.n_y) % s.n_x;
                    let b = (idx / (s.n_y * s.n_x)) % s.n_b;
                    let a = idx / (s.n_y * s.n_x * s.n_b);
                    return Err(Error::Parse(format!(
                        "missing element key (a={},b={},x={},y={})",
                        a, b, x, y
                    )));
                }
            }
        }
        let value = Self::from_elements(file.scenario, elements)?;
        let warnings = hermiticity_warnings(value.elements());
        Ok(Loaded { value, warnings })
    }
}

/// Bipartite assemblage: one operator per (d, w), the resource between
/// Charlie's second subsystem and Dani.
#[derive(Clone, Debug, PartialEq)]
pub struct BipartiteAssemblage {
    pub n_d: usize,
    pub n_w: usize,
    pub dim: usize,
    elements: Vec<ComplexMatrix>,
}

impl BipartiteAssemblage {
    pub fn from_elements(
        n_d: usize,
        n_w: usize,
        dim: usize,
        elements: Vec<ComplexMatrix>,
    ) -> Result<Self> {
        if n_d == 0 || n_w == 0 || dim == 0 {
            return Err(Error::InvalidParameter(
                "bipartite assemblage cardinalities must be >= 1".into(),
            ));
        }
        if elements.len() != n_d * n_w {
            return Err(Error::DimensionMismatch(format!(
                "expected {} elements, got {}",
                n_d * n_w,
                elements.len()
            )));
        }
        if let Some(m) = elements.iter().find(|m| m.dim() != dim) {
            return Err(Error::DimensionMismatch(format!(
                "element dimension {} does not match dim = {}",
                m.dim(),
                dim
            )));
        }
        Ok(Self {
            n_d,
            n_w,
            dim,
            elements,
        })
    }

    pub fn build(
        n_d: usize,
        n_w: usize,
        dim: usize,
        mut f: impl FnMut(usize, usize) -> ComplexMatrix,
    ) -> Result<Self> {
        let mut elements = Vec::with_capacity(n_d * n_w);
        for d in 0..n_d {
            for w in 0..n_w {
                elements.push(f(d, w));
            }
        }
        Self::from_elements(n_d, n_w, dim, elements)
    }

    pub fn element(&self, d: usize, w: usize) -> &ComplexMatrix {
        &self.elements[d * self.n_w + w]
    }

    pub fn elements(&self) -> &[ComplexMatrix] {
        &self.elements
    }

    pub fn probability(&self, d: usize, w: usize) -> f64 {
        self.element(d, w).trace().re
    }

    /// Σ_d σ_d|w for one input.
    pub fn reduced_state(&self, w: usize) -> ComplexMatrix {
        let mut acc = ComplexMatrix::zeros(self.dim);
        for d in 0..self.n_d {
            acc = acc.add(self.element(d, w));
        }
        acc
    }

    pub fn transpose_elements(&self) -> Self {
        Self {
            n_d: self.n_d,
            n_w: self.n_w,
            dim: self.dim,
            elements: self.elements.iter().map(|m| m.transpose()).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.elements
            .iter()
            .zip(&other.elements)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max)
    }

    pub fn validate(&self) -> ValidationReport {
        self.validate_with_tol(FEASIBILITY_TOL)
    }

    pub fn validate_with_tol(&self, tol: f64) -> ValidationReport {
        let mut checks = Vec::new();
        checks.push(hermiticity_check(&self.elements, tol));
        checks.push(psd_check(&self.elements, tol));

        let mut worst = 0.0f64;
        for w in 0..self.n_w {
            let total: f64 = (0..self.n_d).map(|d| self.probability(d, w)).sum();
            worst = worst.max((total - 1.0).abs());
        }
        checks.push(check(
            "normalization",
            worst,
            tol,
            "sum_d tr sigma_d|w = 1 per w".into(),
        ));

        let base = self.reduced_state(0);
        let mut worst = 0.0f64;
        for w in 1..self.n_w {
            worst = worst.max(self.reduced_state(w).max_abs_diff(&base));
        }
        checks.push(check(
            "reduced_state",
            worst,
            tol,
            "sum_d sigma_d|w independent of w".into(),
        ));

        ValidationReport::from_checks(tol, checks)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut elements = Vec::with_capacity(self.elements.len());
        for d in 0..self.n_d {
            for w in 0..self.n_w {
                elements.push(BipartiteRecord {
                    d,
                    w,
                    matrix: self.element(d, w).clone(),
                });
            }
        }
        write_json(
            path,
            &BipartiteFile {
                scenario: BipartiteScenarioRecord {
                    n_d: self.n_d,
                    n_w: self.n_w,
                    dim: self.dim,
                },
                elements,
            },
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Loaded<Self>> {
        let file: BipartiteFile = read_json(path)?;
        let s = file.scenario;
        let mut slots: Vec<Option<ComplexMatrix>> = vec![None; s.n_d * s.n_w];
        for rec in file.elements {
            if rec.d >= s.n_d || rec.w >= s.n_w {
                return Err(Error::Parse(format!(
                    "element key (d={},w={}) out of range",
                    rec.d, rec.w
                )));
            }
            let idx = rec.d * s.n_w + rec.w;
            if slots[idx].is_some() {
                return Err(Error::Parse(format!(
                    "duplicate element key (d={},w={})",
                    rec.d, rec.w
                )));
            }
            slots[idx] = Some(rec.matrix);
        }
        let mut elements = Vec::with_capacity(slots.len());
        for (idx, slot) in slots.into_iter().enumerate() {
            match slot {
                Some(m) => elements.push(m),
                None => {
                    return Err(Error::Parse(format!(
                        "missing element key (d={},w={})",
                        idx / s.n_w,
                        idx % s.n_w
                    )))
                }
            }
        }
        let value = Self::from_elements(s.n_d, s.n_w, s.dim, elements)?;
        let warnings = hermiticity_warnings(value.elements());
        Ok(Loaded { value, warnings })
    }
}

/// Four-party network assemblage: one operator on Charlie's combined system
/// per (a, b, d, x, y, w).
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkAssemblage {
    pub scenario: Scenario,
    elements: Vec<ComplexMatrix>,
}

impl NetworkAssemblage {
    pub fn from_elements(scenario: Scenario, elements: Vec<ComplexMatrix>) -> Result<Self> {
        scenario.check()?;
        let dani = scenario
            .dani
            .clone()
            .ok_or_else(|| Error::InvalidParameter("network scenario needs a dani block".into()))?;
        let count = scenario.element_count() * dani.n_d * dani.n_w;
        if elements.len() != count {
            return Err(Error::DimensionMismatch(format!(
                "expected {} elements, got {}",
                count,
                elements.len()
            )));
        }
        let dim = scenario.d_c * dani.d_cp;
        if let Some(m) = elements.iter().find(|m| m.dim() != dim) {
            return Err(Error::DimensionMismatch(format!(
                "element dimension {} does not match d_c*d_cp = {}",
                m.dim(),
                dim
            )));
        }
        Ok(Self { scenario, elements })
    }

    pub fn build(
        scenario: Scenario,
        mut f: impl FnMut(usize, usize, usize, usize, usize, usize) -> ComplexMatrix,
    ) -> Result<Self> {
        let dani = scenario
            .dani
            .clone()
            .ok_or_else(|| Error::InvalidParameter("network scenario needs a dani block".into()))?;
        let mut elements = Vec::new();
        for a in 0..scenario.n_a {
            for b in 0..scenario.n_b {
                for d in 0..dani.n_d {
                    for x in 0..scenario.n_x {
                        for y in 0..scenario.n_y {
                            for w in 0..dani.n_w {
                                elements.push(f(a, b, d, x, y, w));
                            }
                        }
                    }
                }
            }
        }
        Self::from_elements(scenario, elements)
    }

    pub fn dani(&self) -> &DaniBlock {
        self.scenario.dani.as_ref().expect("checked at construction")
    }

    pub fn index(&self, a: usize, b: usize, d: usize, x: usize, y: usize, w: usize) -> usize {
        let s = &self.scenario;
        let dn = self.dani();
        ((((a * s.n_b + b) * dn.n_d + d) * s.n_x + x) * s.n_y + y) * dn.n_w + w
    }

    pub fn element(
        &self,
        a: usize,
        b: usize,
        d: usize,
        x: usize,
        y: usize,
        w: usize,
    ) -> &ComplexMatrix {
        &self.elements[self.index(a, b, d, x, y, w)]
    }

    pub fn set_element(
        &mut self,
        a: usize,
        b: usize,
        d: usize,
        x: usize,
        y: usize,
        w: usize,
        m: ComplexMatrix,
    ) {
        let idx = self.index(a, b, d, x, y, w);
        self.elements[idx] = m;
    }

    pub fn elements(&self) -> &[ComplexMatrix] {
        &self.elements
    }

    pub fn validate(&self) -> ValidationReport {
        self.validate_with_tol(FEASIBILITY_TOL)
    }

    pub fn validate_with_tol(&self, tol: f64) -> ValidationReport {
        let s = &self.scenario;
        let dn = self.dani().clone();
        let dim = s.d_c * dn.d_cp;
        let mut checks = Vec::new();
        checks.push(hermiticity_check(&self.elements, tol));
        checks.push(psd_check(&self.elements, tol));

        let mut worst = 0.0f64;
        for x in 0..s.n_x {
            for y in 0..s.n_y {
                for w in 0..dn.n_w {
                    let mut total = 0.0;
                    for a in 0..s.n_a {
                        for b in 0..s.n_b {
                            for d in 0..dn.n_d {
                                total += self.element(a, b, d, x, y, w).trace().re;
                            }
                        }
                    }
                    worst = worst.max((total - 1.0).abs());
                }
            }
        }
        checks.push(check(
            "normalization",
            worst,
            tol,
            "sum_abd tr sigma = 1 per (x,y,w)".into(),
        ));

        // No-signalling for each black-box party: the marginal over that
        // party's outcome must not depend on its input.
        let sum_a = |b: usize, d: usize, x: usize, y: usize, w: usize| {
            let mut acc = ComplexMatrix::zeros(dim);
            for a in 0..s.n_a {
                acc = acc.add(self.element(a, b, d, x, y, w));
            }
            acc
        };
        let mut worst = 0.0f64;
        for b in 0..s.n_b {
            for d in 0..dn.n_d {
                for y in 0..s.n_y {
                    for w in 0..dn.n_w {
                        let base = sum_a(b, d, 0, y, w);
                        for x in 1..s.n_x {
                            worst = worst.max(sum_a(b, d, x, y, w).max_abs_diff(&base));
                        }
                    }
                }
            }
        }
        checks.push(check(
            "no_signalling_a",
            worst,
            tol,
            "sum_a sigma independent of x".into(),
        ));

        let sum_b = |a: usize, d: usize, x: usize, y: usize, w: usize| {
            let mut acc = ComplexMatrix::zeros(dim);
            for b in 0..s.n_b {
                acc = acc.add(self.element(a, b, d, x, y, w));
            }
            acc
        };
        let mut worst = 0.0f64;
        for a in 0..s.n_a {
            for d in 0..dn.n_d {
                for x in 0..s.n_x {
                    for w in 0..dn.n_w {
                        let base = sum_b(a, d, x, 0, w);
                        for y in 1..s.n_y {
                            worst = worst.max(sum_b(a, d, x, y, w).max_abs_diff(&base));
                        }
                    }
                }
            }
        }
        checks.push(check(
            "no_signalling_b",
            worst,
            tol,
            "sum_b sigma independent of y".into(),
        ));

        let sum_d = |a: usize, b: usize, x: usize, y: usize, w: usize| {
            let mut acc = ComplexMatrix::zeros(dim);
            for d in 0..dn.n_d {
                acc = acc.add(self.element(a, b, d, x, y, w));
            }
            acc
        };
        let mut worst = 0.0f64;
        for a in 0..s.n_a {
            for b in 0..s.n_b {
                for x in 0..s.n_x {
                    for y in 0..s.n_y {
                        let base = sum_d(a, b, x, y, 0);
                        for w in 1..dn.n_w {
                            worst = worst.max(sum_d(a, b, x, y, w).max_abs_diff(&base));
                        }
                    }
                }
            }
        }
        checks.push(check(
            "no_signalling_d",
            worst,
            tol,
            "sum_d sigma independent of w".into(),
        ));

        let reduced = |x: usize, y: usize, w: usize| {
            let mut acc = ComplexMatrix::zeros(dim);
            for a in 0..s.n_a {
                for b in 0..s.n_b {
                    for d in 0..dn.n_d {
                        acc = acc.add(self.element(a, b, d, x, y, w));
                    }
                }
            }
            acc
        };
        let base = reduced(0, 0, 0);
        let mut worst = 0.0f64;
        for x in 0..s.n_x {
            for y in 0..s.n_y {
                for w in 0..dn.n_w {
                    worst = worst.max(reduced(x, y, w).max_abs_diff(&base));
                }
            }
        }
        checks.push(check(
            "reduced_state",
            worst,
            tol,
            "sum_abd sigma independent of (x,y,w)".into(),
        ));

        ValidationReport::from_checks(tol, checks)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let s = &self.scenario;
        let dn = self.dani().clone();
        let mut elements = Vec::with_capacity(self.elements.len());
        for a in 0..s.n_a {
            for b in 0..s.n_b {
                for d in 0..dn.n_d {
                    for x in 0..s.n_x {
                        for y in 0..s.n_y {
                            for w in 0..dn.n_w {
                                elements.push(NetworkRecord {
                                    a,
                                    b,
                                    d,
                                    x,
                                    y,
                                    w,
                                    matrix: self.element(a, b, d, x, y, w).clone(),
                                });
                            }
                        }
                    }
                }
            }
        }
        write_json(
            path,
            &NetworkFile {
                scenario: s.clone(),
                elements,
            },
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Loaded<Self>> {
        let file: NetworkFile = read_json(path)?;
        file.scenario.check()?;
        let s = file.scenario.clone();
        let dn = s
            .dani
            .clone()
            .ok_or_else(|| Error::Parse("network file lacks dani block".into()))?;
        let count = s.element_count() * dn.n_d * dn.n_w;
        let mut slots: Vec<Option<ComplexMatrix>> = vec![None; count];
        for rec in file.elements {
            if rec.a >= s.n_a
                || rec.b >= s.n_b
                || rec.d >= dn.n_d
                || rec.x >= s.n_x
                || rec.y >= s.n_y
                || rec.w >= dn.n_w
            {
                return Err(Error::Parse(format!(
                    "element key (a={},b={},d={},x={},y={},w={}) out of range",
                    rec.a, rec.b, rec.d, rec.x, rec.y, rec.w
                )));
            }
            let idx = ((((rec.a * s.n_b + rec.b) * dn.n_d + rec.d) * s.n_x + rec.x) * s.n_y
                + rec.y)
                * dn.n_w
                + rec.w;
            if slots[idx].is_some() {
                return Err(Error::Parse("duplicate element key".into()));
            }
            slots[idx] = Some(rec.matrix);
        }
        if slots.iter().any(Option::is_none) {
            return Err(Error::Parse("missing element keys in network file".into()));
        }
        let elements = slots.into_iter().map(Option::unwrap).collect();
        let value = Self::from_elements(file.scenario, elements)?;
        let warnings = hermiticity_warnings(value.elements());
        Ok(Loaded { value, warnings })
    }
}

/// Elementwise Kronecker product of a tripartite assemblage with a bipartite
/// one: the network assemblage of the combined experiment. Both inputs must
/// validate.
pub fn tensor(asm: &Assemblage, bip: &BipartiteAssemblage) -> Result<NetworkAssemblage> {
    let rep = asm.validate();
    if !rep.pass {
        return Err(Error::Validation(format!(
            "tripartite input fails validation (worst violation {:.3e})",
            rep.worst_violation()
        )));
    }
    let rep = bip.validate();
    if !rep.pass {
        return Err(Error::Validation(format!(
            "bipartite input fails validation (worst violation {:.3e})",
            rep.worst_violation()
        )));
    }
    let scenario = asm.scenario.clone().with_dani(bip.n_w, bip.n_d, bip.dim);
    NetworkAssemblage::build(scenario, |a, b, d, x, y, w| {
        asm.element(a, b, x, y).kron(bip.element(d, w))
    })
}

/// A value loaded from disk together with non-fatal diagnostics.
#[derive(Debug)]
pub struct Loaded<T> {
    pub value: T,
    pub warnings: Vec<String>,
}

fn hermiticity_warnings(elements: &[ComplexMatrix]) -> Vec<String> {
    let mut warnings = Vec::new();
    for (k, m) in elements.iter().enumerate() {
        let res = m.hermitian_residual();
        if res > 1e-12 {
            warnings.push(format!(
                "element #{} is not Hermitian (max |M - M\u{2020}| = {:.3e})",
                k, res
            ));
        }
    }
    warnings
}

fn hermiticity_check(elements: &[ComplexMatrix], tol: f64) -> ConstraintCheck {
    let worst = elements
        .iter()
        .map(|m| m.hermitian_residual())
        .fold(0.0, f64::max);
    check("hermitian", worst, tol, "max |M - M\u{2020}| per element".into())
}

fn psd_check(elements: &[ComplexMatrix], tol: f64) -> ConstraintCheck {
    // Works on the Hermitian part so a gross hermiticity failure is reported
    // by its own check instead of aborting this one.
    let worst = elements
        .iter()
        .map(|m| {
            let min = m
                .symmetrize()
                .min_eigenvalue()
                .expect("symmetrized matrix is Hermitian");
            (-min).max(0.0)
        })
        .fold(0.0, f64::max);
    check("psd", worst, tol, "min eigenvalue >= -tol per element".into())
}

pub(crate) fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text)?;
    Ok(())
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<T> {
    let text = std::fs::read_to_string(&path)?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Parse(format!("{}: {}", path.as_ref().display(), e)))
}

#[derive(Serialize, Deserialize)]
struct AssemblageFile {
    scenario: Scenario,
    elements: Vec<TripartiteRecord>,
}

#[derive(Serialize, Deserialize)]
struct TripartiteRecord {
    a: usize,
    b: usize,
    x: usize,
    y: usize,
    matrix: ComplexMatrix,
}

#[derive(Serialize, Deserialize)]
struct BipartiteFile {
    scenario: BipartiteScenarioRecord,
    elements: Vec<BipartiteRecord>,
}

#[derive(Serialize, Deserialize)]
struct BipartiteScenarioRecord {
    n_d: usize,
    n_w: usize,
    dim: usize,
}

#[derive(Serialize, Deserialize)]
struct BipartiteRecord {
    d: usize,
    w: usize,
    matrix: ComplexMatrix,
}

#[derive(Serialize, Deserialize)]
struct NetworkFile {
    scenario: Scenario,
    elements: Vec<NetworkRecord>,
}

#[derive(Serialize, Deserialize)]
struct NetworkRecord {
    a: usize,
    b: usize,
    d: usize,
    x: usize,
    y: usize,
    w: usize,
    matrix: ComplexMatrix,
}
