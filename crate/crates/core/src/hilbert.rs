//! Composite tensor-product state spaces and normalized state vectors.
//!
//! Amplitudes are stored densely in row-major subsystem order: the first
//! declared subsystem is the most significant index. Lattice coordinates are
//! `x_j = x_min + j * grid_spacing`; units are natural (hbar = 1).

use std::collections::HashSet;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Probability mass allowed in the edge sites of a hard-wall lattice.
pub const BOUNDARY_LEAKAGE_LIMIT: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubsystemKind {
    Lattice1d,
    Spin,
    Discrete,
}

impl SubsystemKind {
    pub fn name(self) -> &'static str {
        match self {
            SubsystemKind::Lattice1d => "lattice1d",
            SubsystemKind::Spin => "spin",
            SubsystemKind::Discrete => "discrete",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsystemSpec {
    pub label: String,
    pub kind: SubsystemKind,
    pub dim: usize,
    /// Carrier mass; enters the `1/(m_i + m_j)` scaling of the collapse operator.
    pub mass: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_spacing: Option<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub periodic: bool,
    /// Leftmost lattice coordinate; defaults to `-(dim / 2) * grid_spacing`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_min: Option<f64>,
}

impl SubsystemSpec {
    pub fn lattice(label: &str, dim: usize, mass: f64, spacing: f64, periodic: bool) -> Self {
        Self {
            label: label.to_string(),
            kind: SubsystemKind::Lattice1d,
            dim,
            mass,
            grid_spacing: Some(spacing),
            periodic,
            x_min: None,
        }
    }

    pub fn spin(label: &str, dim: usize, mass: f64) -> Self {
        Self {
            label: label.to_string(),
            kind: SubsystemKind::Spin,
            dim,
            mass,
            grid_spacing: None,
            periodic: false,
            x_min: None,
        }
    }

    pub fn discrete(label: &str, dim: usize, mass: f64) -> Self {
        Self {
            label: label.to_string(),
            kind: SubsystemKind::Discrete,
            dim,
            mass,
            grid_spacing: None,
            periodic: false,
            x_min: None,
        }
    }

    pub fn with_x_min(mut self, x_min: f64) -> Self {
        self.x_min = Some(x_min);
        self
    }

    pub fn spacing(&self) -> f64 {
        self.grid_spacing.unwrap_or(1.0)
    }

    /// Coordinate attached to each level.
    ///
    /// Lattice sites map to positions, spin levels to their projection
    /// `m = S - j` (level 0 is "up"), discrete levels to their index.
    pub fn coordinates(&self) -> Vec<f64> {
        match self.kind {
            SubsystemKind::Lattice1d => {
                let dx = self.spacing();
                let x0 = self.x_min.unwrap_or(-((self.dim / 2) as f64) * dx);
                (0..self.dim).map(|j| x0 + j as f64 * dx).collect()
            }
            SubsystemKind::Spin => {
                let s = (self.dim as f64 - 1.0) / 2.0;
                (0..self.dim).map(|j| s - j as f64).collect()
            }
            SubsystemKind::Discrete => (0..self.dim).map(|j| j as f64).collect(),
        }
    }

    fn errors(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let who = &self.label;
        if self.dim == 0 {
            errs.push(format!("subsystem `{who}`: dim must be positive"));
        }
        if !(self.mass.is_finite() && self.mass > 0.0) {
            errs.push(format!("subsystem `{who}`: mass must be finite and > 0"));
        }
        match self.kind {
            SubsystemKind::Lattice1d => {
                if self.dim < 2 {
                    errs.push(format!("subsystem `{who}`: lattice requires dim >= 2"));
                }
                match self.grid_spacing {
                    Some(dx) if dx.is_finite() && dx > 0.0 => {}
                    _ => errs.push(format!("subsystem `{who}`: lattice requires grid_spacing > 0")),
                }
            }
            _ => {
                if self.grid_spacing.is_some() || self.periodic || self.x_min.is_some() {
                    errs.push(format!(
                        "subsystem `{who}`: grid_spacing/periodic/x_min apply to lattice subsystems only"
                    ));
                }
            }
        }
        errs
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompositeSpace {
    subsystems: Vec<SubsystemSpec>,
    strides: Vec<usize>,
    total_dim: usize,
}

impl CompositeSpace {
    pub fn new(subsystems: Vec<SubsystemSpec>) -> Result<Self> {
        let errs = Self::validation_errors(&subsystems);
        if !errs.is_empty() {
            return Err(Error::InvalidSpace(errs.join("; ")));
        }
        let mut strides = vec![1usize; subsystems.len()];
        for s in (0..subsystems.len().saturating_sub(1)).rev() {
            strides[s] = strides[s + 1] * subsystems[s + 1].dim;
        }
        let total_dim = subsystems.iter().map(|s| s.dim).product();
        Ok(Self {
            subsystems,
            strides,
            total_dim,
        })
    }

    /// All problems with a subsystem list, not just the first.
    pub fn validation_errors(subsystems: &[SubsystemSpec]) -> Vec<String> {
        let mut errs = Vec::new();
        if subsystems.is_empty() {
            errs.push("space must declare at least one subsystem".to_string());
        }
        let mut seen = HashSet::new();
        for s in subsystems {
            if !seen.insert(s.label.as_str()) {
                errs.push(format!("duplicate subsystem label `{}`", s.label));
            }
            errs.extend(s.errors());
        }
        let total = subsystems
            .iter()
            .try_fold(1usize, |acc, s| acc.checked_mul(s.dim.max(1)));
        if total.is_none_or(|t| t > 1 << 24) {
            errs.push("total dimension exceeds 2^24".to_string());
        }
        errs
    }

    pub fn subsystems(&self) -> &[SubsystemSpec] {
        &self.subsystems
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    pub fn position(&self, label: &str) -> Result<usize> {
        self.subsystems
            .iter()
            .position(|s| s.label == label)
            .ok_or_else(|| Error::UnknownSubsystem(label.to_string()))
    }

    pub fn subsystem(&self, label: &str) -> Result<&SubsystemSpec> {
        Ok(&self.subsystems[self.position(label)?])
    }

    pub fn stride(&self, pos: usize) -> usize {
        self.strides[pos]
    }

    /// Level of subsystem `pos` in basis state `index`.
    pub fn level(&self, index: usize, pos: usize) -> usize {
        (index / self.strides[pos]) % self.subsystems[pos].dim
    }

    pub fn levels(&self, index: usize) -> Vec<usize> {
        (0..self.subsystems.len())
            .map(|p| self.level(index, p))
            .collect()
    }

    pub fn index_of(&self, levels: &[usize]) -> usize {
        levels
            .iter()
            .zip(&self.strides)
            .map(|(l, s)| l * s)
            .sum()
    }

    /// Diagonal of a single-subsystem diagonal operator lifted to the full space.
    pub fn lift_diagonal(&self, pos: usize, local: &[f64]) -> Vec<f64> {
        (0..self.total_dim)
            .map(|i| local[self.level(i, pos)])
            .collect()
    }

    /// `op ⊗ I` placed on subsystem `pos`.
    pub fn embed(&self, pos: usize, local: &CsrMatrix) -> Result<CsrMatrix> {
        let d = self.subsystems[pos].dim;
        if local.dim() != d {
            return Err(Error::dim(d, local.dim(), "embedded single-subsystem operator"));
        }
        let stride = self.strides[pos];
        let mut t = Vec::with_capacity(self.total_dim * local.nnz() / d.max(1));
        for i in 0..self.total_dim {
            let li = self.level(i, pos);
            let base = i - li * stride;
            for (lj, v) in local.row(li) {
                t.push((i, base + lj * stride, v));
            }
        }
        Ok(CsrMatrix::from_triplets(self.total_dim, t))
    }
}

#[derive(Clone, Debug)]
pub struct StateVector {
    space: Arc<CompositeSpace>,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// Normalizes `amplitudes` onto `space`.
    pub fn new(space: Arc<CompositeSpace>, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != space.total_dim() {
            return Err(Error::dim(space.total_dim(), amplitudes.len(), "state amplitudes"));
        }
        let amplitudes = renormalized(&amplitudes)?;
        Ok(Self { space, amplitudes })
    }

    pub fn basis(space: Arc<CompositeSpace>, index: usize) -> Result<Self> {
        let mut amps = vec![Complex64::new(0.0, 0.0); space.total_dim()];
        *amps
            .get_mut(index)
            .ok_or_else(|| Error::dim(space.total_dim(), index, "basis index out of range"))? =
            Complex64::new(1.0, 0.0);
        Self::new(space, amps)
    }

    pub fn space(&self) -> &Arc<CompositeSpace> {
        &self.space
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amplitudes)
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        inner(&self.amplitudes, &other.amplitudes)
    }
}

pub fn norm(amps: &[Complex64]) -> f64 {
    amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Returns `amps / |amps|`.
pub fn renormalized(amps: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = norm(amps);
    if !n.is_finite() {
        return Err(Error::NonFinite("state norm".into()));
    }
    if n == 0.0 {
        return Err(Error::ZeroNorm("cannot renormalize".into()));
    }
    Ok(amps.iter().map(|a| a / n).collect())
}

pub fn renormalize(psi: &StateVector) -> Result<StateVector> {
    StateVector::new(psi.space.clone(), psi.amplitudes.clone())
}

/// Kronecker product of `a` (more significant) and `b`.
pub fn kron(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    a.iter()
        .flat_map(|x| b.iter().map(move |y| x * y))
        .collect()
}

/// Normalized tensor product of one factor per subsystem, in declaration order.
pub fn make_product_state(
    space: Arc<CompositeSpace>,
    factors: &[Vec<Complex64>],
) -> Result<StateVector> {
    let subs = space.subsystems();
    if factors.len() != subs.len() {
        return Err(Error::dim(subs.len(), factors.len(), "number of product factors"));
    }
    let mut amps = vec![Complex64::new(1.0, 0.0)];
    for (f, s) in factors.iter().zip(subs) {
        if f.len() != s.dim {
            return Err(Error::dim(s.dim, f.len(), format!("factor for `{}`", s.label)));
        }
        let n = norm(f);
        if n == 0.0 {
            return Err(Error::ZeroNorm(format!("factor for `{}`", s.label)));
        }
        if !n.is_finite() {
            return Err(Error::NonFinite(format!("factor for `{}`", s.label)));
        }
        amps = kron(&amps, &f.iter().map(|x| x / n).collect::<Vec<_>>());
    }
    StateVector::new(space, amps)
}

/// Unnormalized samples of `exp(-(x - x0)^2 / 4a^2 + i k0 x)` times the
/// continuum normalization `(2 pi a^2)^(-1/4)`. No resolvability checks.
pub fn sample_gaussian(coords: &[f64], x0: f64, a: f64, k0: f64) -> Vec<Complex64> {
    let n0 = (2.0 * std::f64::consts::PI * a * a).powf(-0.25);
    coords
        .iter()
        .map(|&x| {
            let env = n0 * (-(x - x0).powi(2) / (4.0 * a * a)).exp();
            Complex64::from_polar(env, k0 * x)
        })
        .collect()
}

/// Gaussian wave packet on a lattice subsystem, normalized on the grid.
pub fn gaussian_packet(
    space: &CompositeSpace,
    subsystem: &str,
    x0: f64,
    a: f64,
    k0: f64,
) -> Result<Vec<Complex64>> {
    let spec = space.subsystem(subsystem)?;
    if spec.kind != SubsystemKind::Lattice1d {
        return Err(Error::WrongKind {
            label: spec.label.clone(),
            kind: spec.kind.name(),
            required: "lattice1d",
        });
    }
    if !(a.is_finite() && x0.is_finite() && k0.is_finite()) {
        return Err(Error::NonFinite("gaussian packet parameters".into()));
    }
    let dx = spec.spacing();
    if a < 2.0 * dx {
        return Err(Error::Unresolvable {
            width: a,
            spacing: dx,
        });
    }
    let samples = renormalized(&sample_gaussian(&spec.coordinates(), x0, a, k0))?;
    if !spec.periodic {
        let n = samples.len();
        let mass = samples[0].norm_sqr() + samples[n - 1].norm_sqr();
        if mass > BOUNDARY_LEAKAGE_LIMIT {
            return Err(Error::BoundaryLeakage { mass });
        }
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn two_qubits() -> Arc<CompositeSpace> {
        Arc::new(
            CompositeSpace::new(vec![
                SubsystemSpec::discrete("a", 2, 1.0),
                SubsystemSpec::discrete("b", 2, 1.0),
            ])
            .unwrap(),
        )
    }

    #[test]
    fn basis_product() {
        let psi = make_product_state(
            two_qubits(),
            &[vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(1.0, 0.0)]],
        )
        .unwrap();
        assert_eq!(
            psi.amplitudes(),
            &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]
        );
    }

    #[test]
    fn single_factor_is_normalized() {
        let space = Arc::new(CompositeSpace::new(vec![SubsystemSpec::discrete("q", 2, 1.0)]).unwrap());
        let psi = make_product_state(space, &[vec![c(3.0, 0.0), c(4.0, 0.0)]]).unwrap();
        assert_abs_diff_eq!(psi.amplitudes()[0].re, 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(psi.amplitudes()[1].re, 0.8, epsilon = 1e-15);
    }

    #[test]
    fn product_errors() {
        let space = two_qubits();
        let err = make_product_state(space.clone(), &[vec![c(1.0, 0.0)], vec![c(1.0, 0.0); 2]]);
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
        let err = make_product_state(space, &[vec![c(0.0, 0.0); 2], vec![c(1.0, 0.0); 2]]);
        assert!(matches!(err, Err(Error::ZeroNorm(_))));
    }

    #[test]
    fn renormalize_examples() {
        assert_eq!(norm(&[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]), 1.0);
        let r = renormalized(&[c(0.0, 2.0), c(0.0, 0.0)]).unwrap();
        assert_eq!(r, vec![c(0.0, 1.0), c(0.0, 0.0)]);
        assert!(matches!(renormalized(&[c(0.0, 0.0)]), Err(Error::ZeroNorm(_))));
        assert!(matches!(
            renormalized(&[c(f64::NAN, 0.0)]),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn space_validation_collects_everything() {
        let errs = CompositeSpace::validation_errors(&[
            SubsystemSpec::lattice("x", 1, -1.0, 0.0, false),
            SubsystemSpec::discrete("x", 2, 1.0),
        ]);
        assert!(errs.iter().any(|e| e.contains("duplicate")));
        assert!(errs.iter().any(|e| e.contains("dim >= 2")));
        assert!(errs.iter().any(|e| e.contains("mass")));
        assert!(errs.iter().any(|e| e.contains("grid_spacing")));
    }

    #[test]
    fn index_bookkeeping() {
        let space = CompositeSpace::new(vec![
            SubsystemSpec::discrete("a", 3, 1.0),
            SubsystemSpec::discrete("b", 2, 1.0),
            SubsystemSpec::discrete("c", 4, 1.0),
        ])
        .unwrap();
        assert_eq!(space.total_dim(), 24);
        for i in 0..24 {
            assert_eq!(space.index_of(&space.levels(i)), i);
        }
        assert_eq!(space.levels(13), vec![1, 1, 1]);
    }

    #[test]
    fn spin_coordinates_are_projections() {
        assert_eq!(SubsystemSpec::spin("s", 2, 1.0).coordinates(), vec![0.5, -0.5]);
        assert_eq!(SubsystemSpec::spin("s", 3, 1.0).coordinates(), vec![1.0, 0.0, -1.0]);
    }

    #[test]
    fn packet_checks() {
        let space = CompositeSpace::new(vec![SubsystemSpec::lattice("x", 64, 1.0, 0.25, false)])
            .unwrap();
        assert!(matches!(
            gaussian_packet(&space, "x", 0.0, 0.4, 0.0),
            Err(Error::Unresolvable { .. })
        ));
        assert!(matches!(
            gaussian_packet(&space, "x", 7.0, 1.0, 0.0),
            Err(Error::BoundaryLeakage { .. })
        ));
        assert!(gaussian_packet(&space, "x", 0.0, 1.0, 0.0).is_ok());
        assert!(matches!(
            gaussian_packet(&space, "y", 0.0, 1.0, 0.0),
            Err(Error::UnknownSubsystem(_))
        ));
    }
}
