//! Hamiltonian assembly, the mass-scaled interaction sum, the collapse
//! operator and the state-dependent collapse generator `beta = V - <V>`.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{inner, CompositeSpace, StateVector, SubsystemKind, SubsystemSpec};
use crate::sparse::CsrMatrix;

pub const HERMITIAN_TOL: f64 = 1e-12;

/// Pair potential as a function of the separation `x_i - x_j` (energy units).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum PairPotential {
    /// `-depth * exp(-r^2 / (2 range^2))`
    GaussianWell { depth: f64, range: f64 },
    /// `strength / sqrt(r^2 + softening^2)`
    SoftCoulomb { strength: f64, softening: f64 },
    /// `height` for `|r| <= half_width`, zero outside.
    SquareBarrier { height: f64, half_width: f64 },
    /// `strength` at zero separation only.
    Contact { strength: f64 },
    /// Piecewise-linear through `(separations, values)`, clamped at the ends.
    Tabulated {
        separations: Vec<f64>,
        values: Vec<f64>,
    },
}

impl PairPotential {
    pub fn value(&self, r: f64) -> f64 {
        match self {
            PairPotential::GaussianWell { depth, range } => {
                -depth * (-r * r / (2.0 * range * range)).exp()
            }
            PairPotential::SoftCoulomb {
                strength,
                softening,
            } => strength / (r * r + softening * softening).sqrt(),
            PairPotential::SquareBarrier { height, half_width } => {
                if r.abs() <= *half_width {
                    *height
                } else {
                    0.0
                }
            }
            PairPotential::Contact { strength } => {
                if r.abs() < 1e-12 {
                    *strength
                } else {
                    0.0
                }
            }
            PairPotential::Tabulated {
                separations,
                values,
            } => {
                let n = separations.len();
                if r <= separations[0] {
                    return values[0];
                }
                if r >= separations[n - 1] {
                    return values[n - 1];
                }
                let k = separations.partition_point(|&s| s <= r);
                let (s0, s1) = (separations[k - 1], separations[k]);
                let w = (r - s0) / (s1 - s0);
                values[k - 1] * (1.0 - w) + values[k] * w
            }
        }
    }

    fn errors(&self) -> Vec<String> {
        let finite = |x: f64| x.is_finite();
        match self {
            PairPotential::GaussianWell { depth, range } => {
                let mut e = Vec::new();
                if !finite(*depth) {
                    e.push("gaussian_well depth must be finite".into());
                }
                if !(finite(*range) && *range > 0.0) {
                    e.push("gaussian_well range must be > 0".into());
                }
                e
            }
            PairPotential::SoftCoulomb {
                strength,
                softening,
            } => {
                let mut e = Vec::new();
                if !finite(*strength) {
                    e.push("soft_coulomb strength must be finite".into());
                }
                if !(finite(*softening) && *softening > 0.0) {
                    e.push("soft_coulomb softening must be > 0".into());
                }
                e
            }
            PairPotential::SquareBarrier { height, half_width } => {
                if finite(*height) && finite(*half_width) && *half_width >= 0.0 {
                    vec![]
                } else {
                    vec!["square_barrier needs finite height and half_width >= 0".into()]
                }
            }
            PairPotential::Contact { strength } => {
                if finite(*strength) {
                    vec![]
                } else {
                    vec!["contact strength must be finite".into()]
                }
            }
            PairPotential::Tabulated {
                separations,
                values,
            } => {
                let mut e = Vec::new();
                if separations.is_empty() || separations.len() != values.len() {
                    e.push("tabulated potential needs equal-length, nonempty separations and values".into());
                }
                if separations.windows(2).any(|w| w[1] <= w[0]) {
                    e.push("tabulated separations must be strictly increasing".into());
                }
                if separations.iter().chain(values).any(|x| !x.is_finite()) {
                    e.push("tabulated potential samples must be finite".into());
                }
                e
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorTerm {
    /// Three-point-stencil kinetic energy of a lattice subsystem.
    Kinetic {
        subsystem: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mass: Option<f64>,
    },
    /// One-body potential sampled per level. Test-only: conservation audits
    /// refuse to certify configurations that contain one.
    ExternalPotential { subsystem: String, samples: Vec<f64> },
    Interaction {
        a: String,
        b: String,
        potential: PairPotential,
    },
    /// `g * sigma_z ⊗ x_pointer`, with `sigma_z = 2 S_z` for any spin dimension.
    SpinCoupling {
        spin: String,
        pointer: String,
        strength: f64,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSpec {
    pub terms: Vec<OperatorTerm>,
}

impl OperatorSpec {
    pub fn new(terms: Vec<OperatorTerm>) -> Self {
        Self { terms }
    }

    pub fn has_external_potential(&self) -> bool {
        self.terms
            .iter()
            .any(|t| matches!(t, OperatorTerm::ExternalPotential { .. }))
    }

    pub fn has_interactions(&self) -> bool {
        self.terms.iter().any(|t| {
            matches!(
                t,
                OperatorTerm::Interaction { .. } | OperatorTerm::SpinCoupling { .. }
            )
        })
    }

    /// Every problem with this spec on `space`.
    pub fn validation_errors(&self, space: &CompositeSpace) -> Vec<String> {
        let mut errs = Vec::new();
        let lookup = |label: &str, errs: &mut Vec<String>| -> Option<SubsystemSpec> {
            match space.subsystem(label) {
                Ok(s) => Some(s.clone()),
                Err(_) => {
                    errs.push(format!("unknown subsystem label `{label}`"));
                    None
                }
            }
        };
        for term in &self.terms {
            match term {
                OperatorTerm::Kinetic { subsystem, mass } => {
                    if let Some(s) = lookup(subsystem, &mut errs) {
                        if s.kind != SubsystemKind::Lattice1d {
                            errs.push(format!("kinetic term on non-lattice subsystem `{subsystem}`"));
                        }
                    }
                    if let Some(m) = mass {
                        if !(m.is_finite() && *m > 0.0) {
                            errs.push(format!("kinetic mass for `{subsystem}` must be > 0"));
                        }
                    }
                }
                OperatorTerm::ExternalPotential { subsystem, samples } => {
                    if let Some(s) = lookup(subsystem, &mut errs) {
                        if samples.len() != s.dim {
                            errs.push(format!(
                                "external potential on `{subsystem}` has {} samples, expected {}",
                                samples.len(),
                                s.dim
                            ));
                        }
                    }
                    if samples.iter().any(|x| !x.is_finite()) {
                        errs.push(format!("non-finite potential sample on `{subsystem}`"));
                    }
                }
                OperatorTerm::Interaction { a, b, potential } => {
                    if a == b {
                        errs.push(format!("interaction references `{a}` twice"));
                    }
                    let sa = lookup(a, &mut errs);
                    let sb = lookup(b, &mut errs);
                    if let (Some(sa), Some(sb)) = (sa, sb) {
                        if sa.periodic && sb.periodic && (sa.dim != sb.dim || sa.spacing() != sb.spacing()) {
                            errs.push(format!(
                                "minimum-image interaction `{a}`-`{b}` requires matching periodic grids"
                            ));
                        }
                    }
                    errs.extend(potential.errors());
                }
                OperatorTerm::SpinCoupling {
                    spin,
                    pointer,
                    strength,
                } => {
                    if spin == pointer {
                        errs.push(format!("spin coupling references `{spin}` twice"));
                    }
                    if let Some(s) = lookup(spin, &mut errs) {
                        if s.kind != SubsystemKind::Spin {
                            errs.push(format!("spin coupling needs a spin subsystem, `{spin}` is {}", s.kind.name()));
                        }
                    }
                    lookup(pointer, &mut errs);
                    if !strength.is_finite() {
                        errs.push("spin coupling strength must be finite".into());
                    }
                }
            }
        }
        errs
    }

    fn check(&self, space: &CompositeSpace) -> Result<()> {
        // Unknown labels get their own error variant.
        for term in &self.terms {
            let labels: Vec<&String> = match term {
                OperatorTerm::Kinetic { subsystem, .. }
                | OperatorTerm::ExternalPotential { subsystem, .. } => vec![subsystem],
                OperatorTerm::Interaction { a, b, .. } => vec![a, b],
                OperatorTerm::SpinCoupling { spin, pointer, .. } => vec![spin, pointer],
            };
            for l in labels {
                space.position(l)?;
            }
        }
        let errs = self.validation_errors(space);
        if errs.iter().any(|e| e.starts_with("non-finite")) {
            return Err(Error::NonFinite(errs.join("; ")));
        }
        if !errs.is_empty() {
            return Err(Error::InvalidOperator(errs.join("; ")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct AssembledOperator {
    pub space: Arc<CompositeSpace>,
    pub matrix: CsrMatrix,
    /// Set only when `|M - M^dagger|_max < 1e-12` was verified.
    pub hermitian: bool,
    pub warnings: Vec<String>,
}

impl AssembledOperator {
    pub fn new(space: Arc<CompositeSpace>, matrix: CsrMatrix) -> Result<Self> {
        if matrix.dim() != space.total_dim() {
            return Err(Error::dim(space.total_dim(), matrix.dim(), "operator size"));
        }
        if !matrix.is_finite() {
            return Err(Error::NonFinite("operator entries".into()));
        }
        let hermitian = matrix.hermiticity_error() < HERMITIAN_TOL;
        Ok(Self {
            space,
            matrix,
            hermitian,
            warnings: Vec::new(),
        })
    }

    pub fn require_hermitian(&self) -> Result<()> {
        if self.hermitian {
            Ok(())
        } else {
            Err(Error::NotHermitian(self.matrix.hermiticity_error()))
        }
    }
}

/// Separation `x_a - x_b` between the levels of two subsystems, using the
/// minimum image when both are periodic lattices on the same grid.
fn separation(sa: &SubsystemSpec, sb: &SubsystemSpec, la: usize, lb: usize, ca: &[f64], cb: &[f64]) -> f64 {
    if sa.kind == SubsystemKind::Lattice1d && sb.kind == SubsystemKind::Lattice1d && sa.periodic && sb.periodic {
        let n = sa.dim as i64;
        let mut d = (la as i64 - lb as i64).rem_euclid(n);
        if d >= (n + 1) / 2 {
            d -= n;
        }
        d as f64 * sa.spacing() + (ca[0] - cb[0])
    } else {
        ca[la] - cb[lb]
    }
}

/// Diagonal (in the product basis) of one interaction or spin-coupling term.
fn term_diagonal(term: &OperatorTerm, space: &CompositeSpace) -> Result<Option<(Vec<f64>, f64)>> {
    let subs = space.subsystems();
    match term {
        OperatorTerm::Interaction { a, b, potential } => {
            let (pa, pb) = (space.position(a)?, space.position(b)?);
            let (ca, cb) = (subs[pa].coordinates(), subs[pb].coordinates());
            let mut diag = Vec::with_capacity(space.total_dim());
            for i in 0..space.total_dim() {
                let r = separation(&subs[pa], &subs[pb], space.level(i, pa), space.level(i, pb), &ca, &cb);
                let v = potential.value(r);
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!("pair potential `{a}`-`{b}` at r = {r}")));
                }
                diag.push(v);
            }
            Ok(Some((diag, subs[pa].mass + subs[pb].mass)))
        }
        OperatorTerm::SpinCoupling {
            spin,
            pointer,
            strength,
        } => {
            let (ps, pp) = (space.position(spin)?, space.position(pointer)?);
            let (cs, cp) = (subs[ps].coordinates(), subs[pp].coordinates());
            let diag = (0..space.total_dim())
                .map(|i| strength * 2.0 * cs[space.level(i, ps)] * cp[space.level(i, pp)])
                .collect();
            Ok(Some((diag, subs[ps].mass + subs[pp].mass)))
        }
        _ => Ok(None),
    }
}

fn kinetic_triplets(space: &CompositeSpace, pos: usize, mass: f64, out: &mut Vec<(usize, usize, Complex64)>) {
    let spec = &space.subsystems()[pos];
    let dx = spec.spacing();
    let coef = 1.0 / (2.0 * mass * dx * dx);
    let n = spec.dim;
    let stride = space.stride(pos);
    let hop = Complex64::new(-coef, 0.0);
    for i in 0..space.total_dim() {
        let l = space.level(i, pos);
        out.push((i, i, Complex64::new(2.0 * coef, 0.0)));
        if l + 1 < n {
            out.push((i, i + stride, hop));
        } else if spec.periodic {
            out.push((i, i + stride - n * stride, hop));
        }
        if l > 0 {
            out.push((i, i - stride, hop));
        } else if spec.periodic {
            out.push((i, i + (n - 1) * stride, hop));
        }
    }
}

/// Full Hamiltonian: kinetic + external + interaction + spin-coupling terms.
pub fn assemble_hamiltonian(spec: &OperatorSpec, space: &Arc<CompositeSpace>) -> Result<AssembledOperator> {
    spec.check(space)?;
    let dim = space.total_dim();
    let mut diag = vec![0.0; dim];
    let mut offdiag = Vec::new();
    for term in &spec.terms {
        match term {
            OperatorTerm::Kinetic { subsystem, mass } => {
                let pos = space.position(subsystem)?;
                let m = mass.unwrap_or(space.subsystems()[pos].mass);
                kinetic_triplets(space, pos, m, &mut offdiag);
            }
            OperatorTerm::ExternalPotential { subsystem, samples } => {
                let pos = space.position(subsystem)?;
                for (d, v) in diag.iter_mut().zip(space.lift_diagonal(pos, samples)) {
                    *d += v;
                }
            }
            _ => {
                if let Some((values, _)) = term_diagonal(term, space)? {
                    for (d, v) in diag.iter_mut().zip(values) {
                        *d += v;
                    }
                }
            }
        }
    }
    offdiag.extend(
        diag.iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (i, i, Complex64::new(*v, 0.0))),
    );
    let op = AssembledOperator::new(space.clone(), CsrMatrix::from_triplets(dim, offdiag))?;
    op.require_hermitian()?;
    Ok(op)
}

/// `V' = sum_ij V_ij / (m_i + m_j)` over interaction and spin-coupling terms.
///
/// A spec without interactions yields the zero operator with a warning.
pub fn scaled_interaction_sum(spec: &OperatorSpec, space: &Arc<CompositeSpace>) -> Result<AssembledOperator> {
    spec.check(space)?;
    let mut diag = vec![0.0; space.total_dim()];
    for term in &spec.terms {
        if let Some((values, mass_sum)) = term_diagonal(term, space)? {
            for (d, v) in diag.iter_mut().zip(values) {
                *d += v / mass_sum;
            }
        }
    }
    let mut op = AssembledOperator::new(space.clone(), CsrMatrix::from_real_diagonal(&diag))?;
    if !spec.has_interactions() {
        op.warnings
            .push("no interaction terms: collapse generator is identically zero".into());
    }
    Ok(op)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollapseParams {
    /// Velocity scale `c` in `V = V' / (c^2 sqrt(tau0))`.
    pub c_scale: f64,
    pub tau0: f64,
}

impl Default for CollapseParams {
    fn default() -> Self {
        Self {
            c_scale: 1.0,
            tau0: 1.0,
        }
    }
}

impl CollapseParams {
    pub fn validation_errors(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if !(self.c_scale.is_finite() && self.c_scale > 0.0) {
            errs.push("collapse c_scale must be finite and > 0".into());
        }
        if !(self.tau0.is_finite() && self.tau0 > 0.0) {
            errs.push("collapse tau0 must be finite and > 0".into());
        }
        errs
    }

    pub fn factor(&self) -> f64 {
        1.0 / (self.c_scale * self.c_scale * self.tau0.sqrt())
    }
}

/// `V = V' / (c^2 sqrt(tau0))`; units of 1/sqrt(time).
pub fn collapse_operator(vprime: &AssembledOperator, params: &CollapseParams) -> Result<AssembledOperator> {
    let errs = params.validation_errors();
    if !errs.is_empty() {
        return Err(Error::InvalidParameter(errs.join("; ")));
    }
    vprime.require_hermitian()?;
    let mut op = AssembledOperator::new(vprime.space.clone(), vprime.matrix.scale_real(params.factor()))?;
    op.warnings = vprime.warnings.clone();
    Ok(op)
}

/// Applies `beta = V - <V>` to `psi`, returning `(beta psi, <V>)`.
pub fn beta_apply(vhat: &AssembledOperator, psi: &StateVector) -> Result<(Vec<Complex64>, f64)> {
    vhat.require_hermitian()?;
    if vhat.matrix.dim() != psi.amplitudes().len() {
        return Err(Error::dim(vhat.matrix.dim(), psi.amplitudes().len(), "beta_apply"));
    }
    let mut out = vhat.matrix.matvec(psi.amplitudes());
    let v_mean = inner(psi.amplitudes(), &out).re;
    for (o, p) in out.iter_mut().zip(psi.amplitudes()) {
        *o -= p * v_mean;
    }
    Ok((out, v_mean))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::SubsystemSpec;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn space(subs: Vec<SubsystemSpec>) -> Arc<CompositeSpace> {
        Arc::new(CompositeSpace::new(subs).unwrap())
    }

    #[test]
    fn periodic_kinetic_rows_sum_to_zero() {
        let sp = space(vec![SubsystemSpec::lattice("x", 8, 1.0, 0.5, true)]);
        let h = assemble_hamiltonian(
            &OperatorSpec::new(vec![OperatorTerm::Kinetic {
                subsystem: "x".into(),
                mass: None,
            }]),
            &sp,
        )
        .unwrap();
        assert!(h.hermitian);
        for r in 0..8 {
            let s: Complex64 = h.matrix.row(r).map(|(_, v)| v).sum();
            assert_eq!(s, c(0.0, 0.0));
        }
        assert_eq!(h.matrix.get(0, 7), c(-2.0, 0.0));
    }

    #[test]
    fn hard_wall_kinetic_drops_boundary_hops() {
        let sp = space(vec![SubsystemSpec::lattice("x", 4, 1.0, 1.0, false)]);
        let h = assemble_hamiltonian(
            &OperatorSpec::new(vec![OperatorTerm::Kinetic {
                subsystem: "x".into(),
                mass: None,
            }]),
            &sp,
        )
        .unwrap();
        assert_eq!(h.matrix.get(0, 3), c(0.0, 0.0));
        assert_eq!(h.matrix.nnz(), 10);
    }

    #[test]
    fn external_two_level_eigenvalues() {
        let sp = space(vec![SubsystemSpec::discrete("q", 2, 1.0)]);
        let h = assemble_hamiltonian(
            &OperatorSpec::new(vec![OperatorTerm::ExternalPotential {
                subsystem: "q".into(),
                samples: vec![0.3, -1.1],
            }]),
            &sp,
        )
        .unwrap();
        let eig = h.matrix.to_dense().symmetric_eigen();
        let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        assert_abs_diff_eq!(ev[0], -1.1, epsilon = 1e-14);
        assert_abs_diff_eq!(ev[1], 0.3, epsilon = 1e-14);
    }

    #[test]
    fn contact_interaction_by_direct_indexing() {
        let n = 6;
        let sp = space(vec![
            SubsystemSpec::lattice("p1", n, 1.0, 0.5, true),
            SubsystemSpec::lattice("p2", n, 1.0, 0.5, true),
        ]);
        let kappa = 2.5;
        let h = assemble_hamiltonian(
            &OperatorSpec::new(vec![OperatorTerm::Interaction {
                a: "p1".into(),
                b: "p2".into(),
                potential: PairPotential::Contact { strength: kappa },
            }]),
            &sp,
        )
        .unwrap();
        assert!(h.matrix.is_diagonal());
        for i1 in 0..n {
            for i2 in 0..n {
                let expect = if i1 == i2 { kappa } else { 0.0 };
                assert_eq!(h.matrix.get(i1 * n + i2, i1 * n + i2).re, expect);
            }
        }
    }

    #[test]
    fn minimum_image_wraps_separations() {
        let n = 8;
        let sp = space(vec![
            SubsystemSpec::lattice("p1", n, 1.0, 1.0, true),
            SubsystemSpec::lattice("p2", n, 1.0, 1.0, true),
        ]);
        let pot = PairPotential::Tabulated {
            separations: vec![-10.0, 10.0],
            values: vec![-10.0, 10.0],
        };
        let h = assemble_hamiltonian(
            &OperatorSpec::new(vec![OperatorTerm::Interaction {
                a: "p1".into(),
                b: "p2".into(),
                potential: pot,
            }]),
            &sp,
        )
        .unwrap();
        // site 7 vs site 0: raw separation 7, minimum image -1.
        assert_abs_diff_eq!(h.matrix.get(7 * n, 7 * n).re, -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(h.matrix.get(3, 3).re, -3.0, epsilon = 1e-14);
    }

    #[test]
    fn spec_errors() {
        let sp = space(vec![SubsystemSpec::discrete("q", 2, 1.0)]);
        let bad = OperatorSpec::new(vec![OperatorTerm::Kinetic {
            subsystem: "nope".into(),
            mass: None,
        }]);
        assert!(matches!(assemble_hamiltonian(&bad, &sp), Err(Error::UnknownSubsystem(_))));
        let nan = OperatorSpec::new(vec![OperatorTerm::ExternalPotential {
            subsystem: "q".into(),
            samples: vec![f64::NAN, 0.0],
        }]);
        assert!(matches!(assemble_hamiltonian(&nan, &sp), Err(Error::NonFinite(_))));
        let selfint = OperatorSpec::new(vec![OperatorTerm::Interaction {
            a: "q".into(),
            b: "q".into(),
            potential: PairPotential::Contact { strength: 1.0 },
        }]);
        assert!(matches!(assemble_hamiltonian(&selfint, &sp), Err(Error::InvalidOperator(_))));
    }

    fn pair_space(m1: f64, m2: f64) -> Arc<CompositeSpace> {
        space(vec![
            SubsystemSpec::lattice("p1", 8, m1, 0.5, true),
            SubsystemSpec::lattice("p2", 8, m2, 0.5, true),
        ])
    }

    fn well(a: &str, b: &str) -> OperatorTerm {
        OperatorTerm::Interaction {
            a: a.into(),
            b: b.into(),
            potential: PairPotential::GaussianWell {
                depth: 1.0,
                range: 0.7,
            },
        }
    }

    #[test]
    fn scaled_sum_halves_equal_unit_masses() {
        let sp = pair_space(1.0, 1.0);
        let spec = OperatorSpec::new(vec![
            OperatorTerm::Kinetic {
                subsystem: "p1".into(),
                mass: None,
            },
            well("p1", "p2"),
        ]);
        let vp = scaled_interaction_sum(&spec, &sp).unwrap();
        let raw = assemble_hamiltonian(&OperatorSpec::new(vec![well("p1", "p2")]), &sp).unwrap();
        assert_eq!(vp.matrix.sub(&raw.matrix.scale_real(0.5)).max_abs(), 0.0);
        assert!(vp.warnings.is_empty());
    }

    #[test]
    fn heavy_apparatus_suppresses_scaled_sum() {
        let light = scaled_interaction_sum(&OperatorSpec::new(vec![well("p1", "p2")]), &pair_space(1.0, 1.0)).unwrap();
        let heavy = scaled_interaction_sum(&OperatorSpec::new(vec![well("p1", "p2")]), &pair_space(1e20, 1.0)).unwrap();
        let ratio = heavy.matrix.max_abs() / light.matrix.max_abs();
        // (1 + 1) / (1e20 + 1)
        assert_abs_diff_eq!(ratio * 1e20, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn scaled_sum_is_linear() {
        let sp = space(vec![
            SubsystemSpec::lattice("p1", 4, 1.0, 0.5, true),
            SubsystemSpec::lattice("p2", 4, 2.0, 0.5, true),
            SubsystemSpec::discrete("d", 2, 3.0),
        ]);
        let t2 = OperatorTerm::Interaction {
            a: "p2".into(),
            b: "d".into(),
            potential: PairPotential::SoftCoulomb {
                strength: 0.4,
                softening: 1.0,
            },
        };
        let both = scaled_interaction_sum(&OperatorSpec::new(vec![well("p1", "p2"), t2.clone()]), &sp).unwrap();
        let a = scaled_interaction_sum(&OperatorSpec::new(vec![well("p1", "p2")]), &sp).unwrap();
        let b = scaled_interaction_sum(&OperatorSpec::new(vec![t2]), &sp).unwrap();
        assert!(both.matrix.sub(&a.matrix.add(&b.matrix)).max_abs() < 1e-15);
    }

    #[test]
    fn empty_interaction_sum_is_flagged() {
        let sp = pair_space(1.0, 1.0);
        let vp = scaled_interaction_sum(&OperatorSpec::default(), &sp).unwrap();
        assert_eq!(vp.matrix.max_abs(), 0.0);
        assert_eq!(vp.warnings.len(), 1);
    }

    #[test]
    fn collapse_operator_scaling() {
        let sp = pair_space(1.0, 1.0);
        let vp = scaled_interaction_sum(&OperatorSpec::new(vec![well("p1", "p2")]), &sp).unwrap();
        let unit = collapse_operator(&vp, &CollapseParams { c_scale: 1.0, tau0: 1.0 }).unwrap();
        assert_eq!(unit.matrix, vp.matrix);
        let tau4 = collapse_operator(&vp, &CollapseParams { c_scale: 1.0, tau0: 4.0 }).unwrap();
        assert!(tau4.matrix.sub(&vp.matrix.scale_real(0.5)).max_abs() < 1e-16);
        let c2 = collapse_operator(&vp, &CollapseParams { c_scale: 2.0, tau0: 1.0 }).unwrap();
        assert!(c2.matrix.sub(&vp.matrix.scale_real(0.25)).max_abs() < 1e-16);
        assert!(collapse_operator(&vp, &CollapseParams { c_scale: 0.0, tau0: 1.0 }).is_err());
        assert!(collapse_operator(&vp, &CollapseParams { c_scale: 1.0, tau0: f64::INFINITY }).is_err());
    }

    fn qubit_op(m: DMatrix<Complex64>) -> (Arc<CompositeSpace>, AssembledOperator) {
        let sp = space(vec![SubsystemSpec::discrete("q", m.nrows(), 1.0)]);
        let op = AssembledOperator::new(sp.clone(), CsrMatrix::from_dense(&m)).unwrap();
        (sp, op)
    }

    #[test]
    fn beta_on_plus_state() {
        let (sp, v) = qubit_op(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0, 0.0), c(-1.0, 0.0)])));
        let psi = StateVector::new(sp, vec![c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        let (b, mean) = beta_apply(&v, &psi).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(mean, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b[0].re, s, epsilon = 1e-15);
        assert_abs_diff_eq!(b[1].re, -s, epsilon = 1e-15);
    }

    #[test]
    fn beta_vanishes_on_eigenvectors() {
        let (sp, v) = qubit_op(DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]));
        let psi = StateVector::new(sp, vec![c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        let (b, mean) = beta_apply(&v, &psi).unwrap();
        assert_abs_diff_eq!(mean, 1.0, epsilon = 1e-15);
        assert!(b.iter().all(|x| x.norm() < 1e-12));
    }

    #[test]
    fn beta_rejects_non_hermitian() {
        let (sp, v) = qubit_op(DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]));
        assert!(!v.hermitian);
        let psi = StateVector::basis(sp, 0).unwrap();
        assert!(matches!(beta_apply(&v, &psi), Err(Error::NotHermitian(_))));
    }
}
