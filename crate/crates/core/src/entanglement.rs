//! Reduced density matrices, Schmidt decompositions and entropies of pure
//! bipartite states, plus the closed forms for the equal-amplitude
//! two-branch (photon ⊗ mirror) state.
//!
//! Entropies are in nats.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{gaussian_packet, inner, kron, CompositeSpace, StateVector, SubsystemSpec};

/// Eigenvalues down to this are treated as floating-point zero.
pub const NEGATIVE_EIGENVALUE_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bipartition {
    pub side_a: Vec<String>,
    pub side_b: Vec<String>,
}

impl Bipartition {
    /// `side_a` against its complement in `space`.
    pub fn new(space: &CompositeSpace, side_a: &[&str]) -> Result<Self> {
        let side_a: Vec<String> = side_a.iter().map(|s| s.to_string()).collect();
        let side_b = space
            .subsystems()
            .iter()
            .map(|s| s.label.clone())
            .filter(|l| !side_a.contains(l))
            .collect();
        let p = Self { side_a, side_b };
        p.validate(space)?;
        Ok(p)
    }

    pub fn validate(&self, space: &CompositeSpace) -> Result<()> {
        if self.side_a.is_empty() || self.side_b.is_empty() {
            return Err(Error::InvalidPartition("both sides must be nonempty".into()));
        }
        for l in self.side_a.iter().chain(&self.side_b) {
            space
                .position(l)
                .map_err(|_| Error::InvalidPartition(format!("unknown subsystem `{l}`")))?;
        }
        if self.side_a.iter().any(|l| self.side_b.contains(l)) {
            return Err(Error::InvalidPartition("sides overlap".into()));
        }
        let mut all: Vec<&String> = self.side_a.iter().chain(&self.side_b).collect();
        all.sort();
        all.dedup();
        if all.len() != space.subsystems().len() || all.len() != self.side_a.len() + self.side_b.len() {
            return Err(Error::InvalidPartition("sides must cover every subsystem exactly once".into()));
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        format!("{}|{}", self.side_a.join("+"), self.side_b.join("+"))
    }

    pub fn swapped(&self) -> Self {
        Self {
            side_a: self.side_b.clone(),
            side_b: self.side_a.clone(),
        }
    }
}

/// Amplitudes reshaped into a `dim_a x dim_b` matrix. Each side keeps the
/// space's declaration order internally.
fn reshape(psi: &StateVector, part: &Bipartition) -> Result<DMatrix<Complex64>> {
    let space = psi.space();
    part.validate(space)?;
    let subs = space.subsystems();
    let positions = |side: &[String]| -> Vec<usize> {
        let mut p: Vec<usize> = side.iter().map(|l| space.position(l).unwrap()).collect();
        p.sort_unstable();
        p
    };
    let (pa, pb) = (positions(&part.side_a), positions(&part.side_b));
    let dim_of = |p: &[usize]| p.iter().map(|&i| subs[i].dim).product::<usize>();
    let (da, db) = (dim_of(&pa), dim_of(&pb));
    let flat = |i: usize, p: &[usize]| p.iter().fold(0, |acc, &s| acc * subs[s].dim + space.level(i, s));
    let mut m = DMatrix::zeros(da, db);
    for (i, amp) in psi.amplitudes().iter().enumerate() {
        m[(flat(i, &pa), flat(i, &pb))] = *amp;
    }
    Ok(m)
}

/// `Tr_B |ψ><ψ|` on side A.
pub fn reduced_density(psi: &StateVector, part: &Bipartition) -> Result<DMatrix<Complex64>> {
    let m = reshape(psi, part)?;
    let rho = &m * m.adjoint();
    Ok((&rho + rho.adjoint()) * Complex64::new(0.5, 0.0))
}

#[derive(Clone, Debug)]
pub struct SchmidtResult {
    /// Descending, nonnegative.
    pub coefficients: Vec<f64>,
    pub left_vectors: Vec<Vec<Complex64>>,
    pub right_vectors: Vec<Vec<Complex64>>,
}

impl SchmidtResult {
    pub fn weights(&self) -> Vec<f64> {
        self.coefficients.iter().map(|c| c * c).collect()
    }

    pub fn entropy(&self) -> f64 {
        entropy_of_weights(&self.weights())
    }

    pub fn rank(&self, tol: f64) -> usize {
        self.coefficients.iter().filter(|&&c| c > tol).count()
    }

    /// `Σ λ_k a_k ⊗ b_k` in side-A-major order.
    pub fn reconstruct(&self) -> Vec<Complex64> {
        let da = self.left_vectors.first().map_or(0, Vec::len);
        let db = self.right_vectors.first().map_or(0, Vec::len);
        let mut out = vec![Complex64::new(0.0, 0.0); da * db];
        for ((l, a), b) in self.coefficients.iter().zip(&self.left_vectors).zip(&self.right_vectors) {
            for (o, x) in out.iter_mut().zip(kron(a, b)) {
                *o += x * l;
            }
        }
        out
    }
}

/// Schmidt decomposition via the SVD of the reshaped amplitude matrix.
pub fn schmidt(psi: &StateVector, part: &Bipartition) -> Result<SchmidtResult> {
    let m = reshape(psi, part)?;
    let svd = m.svd(true, true);
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    Ok(SchmidtResult {
        coefficients: order.iter().map(|&k| svd.singular_values[k]).collect(),
        left_vectors: order.iter().map(|&k| u.column(k).iter().copied().collect()).collect(),
        right_vectors: order.iter().map(|&k| vt.row(k).iter().copied().collect()).collect(),
    })
}

/// Something with a probability spectrum.
pub trait Spectrum {
    fn spectrum(&self) -> Result<Vec<f64>>;
}

impl Spectrum for DMatrix<Complex64> {
    fn spectrum(&self) -> Result<Vec<f64>> {
        if !self.is_square() {
            return Err(Error::dim(self.nrows(), self.ncols(), "density matrix must be square"));
        }
        let herm = (self + self.adjoint()) * Complex64::new(0.5, 0.0);
        let eig = herm.symmetric_eigen();
        eig.eigenvalues.iter().map(|&l| clip_eigenvalue(l)).collect()
    }
}

impl Spectrum for SchmidtResult {
    fn spectrum(&self) -> Result<Vec<f64>> {
        Ok(self.weights())
    }
}

fn clip_eigenvalue(l: f64) -> Result<f64> {
    if l < -NEGATIVE_EIGENVALUE_TOL {
        Err(Error::NegativeEigenvalue(l))
    } else {
        Ok(l.max(0.0))
    }
}

/// `-Σ λ ln λ` with `0 ln 0 = 0`.
pub fn entropy_of_weights(weights: &[f64]) -> f64 {
    weights
        .iter()
        .filter(|&&w| w > 0.0)
        .map(|&w| -w * w.ln())
        .sum::<f64>()
        .max(0.0)
}

/// Von Neumann entropy in nats.
pub fn vn_entropy<S: Spectrum + ?Sized>(source: &S) -> Result<f64> {
    Ok(entropy_of_weights(&source.spectrum()?))
}

pub fn nats_to_bits(s: f64) -> f64 {
    s / std::f64::consts::LN_2
}

/// `Tr ρ²`.
pub fn purity(rho: &DMatrix<Complex64>) -> f64 {
    (rho * rho).trace().re
}

/// Entropy of the Schmidt weights `((1+μ)/2, (1-μ)/2)`.
pub fn two_branch_entropy_exact(mu: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&mu) {
        return Err(Error::InvalidParameter(format!("overlap μ = {mu} outside [0, 1]")));
    }
    Ok(entropy_of_weights(&[(1.0 + mu) / 2.0, (1.0 - mu) / 2.0]))
}

/// Small-δ form `(δ/2)(1 - ln(δ/2))`; zero at δ = 0.
pub fn two_branch_entropy_approx(delta: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::InvalidParameter(format!("δ = {delta} outside [0, 1)")));
    }
    if delta == 0.0 {
        return Ok(0.0);
    }
    let h = delta / 2.0;
    Ok(h * (1.0 - h.ln()))
}

/// How the mirror states `|B_r>`, `|B_t>` are realized.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MirrorModel {
    /// Two-level mirror with `<B_r|B_t> = μ` set explicitly.
    TwoMode,
    /// Mirror on a hard-wall lattice; branches are Gaussians of half-width
    /// `width` displaced by `±d/2`, with `d` solved so the lattice overlap is μ.
    DisplacedGaussian { sites: usize, spacing: f64, width: f64 },
}

/// `(|r>|B_r> + |t>|B_t>)/sqrt(2)` with `<B_r|B_t> = 1 - δ`.
///
/// The space is `photon` (2 levels: 0 = reflected, 1 = transmitted) ⊗ `mirror`.
pub fn build_two_branch_state(delta: f64, model: &MirrorModel) -> Result<StateVector> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::InvalidParameter(format!("δ = {delta} outside [0, 1]")));
    }
    let mu = 1.0 - delta;
    let photon = SubsystemSpec::discrete("photon", 2, 1.0);
    let (mirror, br, bt) = match model {
        MirrorModel::TwoMode => {
            let br = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
            let bt = vec![Complex64::new(mu, 0.0), Complex64::new((1.0 - mu * mu).max(0.0).sqrt(), 0.0)];
            (SubsystemSpec::discrete("mirror", 2, 1.0), br, bt)
        }
        MirrorModel::DisplacedGaussian { sites, spacing, width } => {
            let mirror = SubsystemSpec::lattice("mirror", *sites, 1.0, *spacing, false);
            let solo = CompositeSpace::new(vec![mirror.clone()])?;
            let (br, bt) = displaced_pair(&solo, mu, *width)?;
            (mirror, br, bt)
        }
    };
    let space = Arc::new(CompositeSpace::new(vec![photon, mirror])?);
    let r = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
    let t = [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
    let amps: Vec<Complex64> = kron(&r, &br)
        .into_iter()
        .zip(kron(&t, &bt))
        .map(|(a, b)| a + b)
        .collect();
    StateVector::new(space, amps)
}

fn displaced_pair(space: &CompositeSpace, mu: f64, width: f64) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let unrealizable = |why: String| Error::InvalidParameter(format!("overlap {mu} unrealizable: {why}"));
    if mu <= 0.0 {
        return Err(unrealizable("displaced Gaussians never become orthogonal".into()));
    }
    let pair = |d: f64| -> Result<(Vec<Complex64>, Vec<Complex64>)> {
        Ok((
            gaussian_packet(space, "mirror", -d / 2.0, width, 0.0)?,
            gaussian_packet(space, "mirror", d / 2.0, width, 0.0)?,
        ))
    };
    let overlap = |d: f64| -> Result<f64> {
        let (a, b) = pair(d)?;
        Ok(inner(&a, &b).re)
    };
    if mu == 1.0 {
        return pair(0.0);
    }
    // Continuum overlap exp(-d²/8a²) brackets the lattice root.
    let guess = (-8.0 * width * width * mu.ln()).sqrt();
    let (mut lo, mut hi) = (0.0, 2.0 * guess);
    if overlap(hi).map_err(|e| unrealizable(e.to_string()))? > mu {
        return Err(unrealizable("displacement does not fit the grid".into()));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if overlap(mid)? > mu {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 * guess.max(1.0) {
            break;
        }
    }
    pair(0.5 * (lo + hi))
}

/// `<B_r|B_t>` between the mirror states conditioned on photon level 0 and 1
/// of a state built by [`build_two_branch_state`].
pub fn branch_overlap(psi: &StateVector) -> Result<Complex64> {
    let half = psi.amplitudes().len() / 2;
    let (r, t) = psi.amplitudes().split_at(half);
    let nr = crate::hilbert::norm(r);
    let nt = crate::hilbert::norm(t);
    if nr == 0.0 || nt == 0.0 {
        return Err(Error::ZeroNorm("empty branch".into()));
    }
    Ok(inner(r, t) / (nr * nt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn qubits(n: usize) -> Arc<CompositeSpace> {
        let subs = (0..n).map(|i| SubsystemSpec::discrete(&format!("q{i}"), 2, 1.0)).collect();
        Arc::new(CompositeSpace::new(subs).unwrap())
    }

    fn bell() -> StateVector {
        StateVector::new(qubits(2), vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]).unwrap()
    }

    #[test]
    fn bell_reduces_to_maximally_mixed() {
        let psi = bell();
        let p = Bipartition::new(psi.space(), &["q0"]).unwrap();
        let rho = reduced_density(&psi, &p).unwrap();
        assert_abs_diff_eq!(rho[(0, 0)].re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(rho[(0, 1)].norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(vn_entropy(&rho).unwrap(), std::f64::consts::LN_2, epsilon = 1e-14);
        assert_abs_diff_eq!(purity(&rho), 0.5, epsilon = 1e-15);
        let s = schmidt(&psi, &p).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(s.coefficients[0], h, epsilon = 1e-14);
        assert_abs_diff_eq!(s.coefficients[1], h, epsilon = 1e-14);
    }

    #[test]
    fn product_state_is_rank_one() {
        let psi = crate::hilbert::make_product_state(
            qubits(2),
            &[vec![c(1.0, 0.0), c(0.0, 2.0)], vec![c(0.3, 0.0), c(-1.0, 0.1)]],
        )
        .unwrap();
        let p = Bipartition::new(psi.space(), &["q1"]).unwrap();
        let s = schmidt(&psi, &p).unwrap();
        assert_abs_diff_eq!(s.coefficients[0], 1.0, epsilon = 1e-14);
        assert_eq!(s.rank(1e-12), 1);
        let rho = reduced_density(&psi, &p).unwrap();
        assert_abs_diff_eq!(purity(&rho), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(vn_entropy(&rho).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn invalid_partitions() {
        let sp = qubits(3);
        assert!(Bipartition::new(&sp, &[]).is_err());
        assert!(Bipartition::new(&sp, &["q0", "q1", "q2"]).is_err());
        assert!(Bipartition::new(&sp, &["zz"]).is_err());
        let overlap = Bipartition {
            side_a: vec!["q0".into(), "q1".into()],
            side_b: vec!["q1".into(), "q2".into()],
        };
        assert!(overlap.validate(&sp).is_err());
        let missing = Bipartition {
            side_a: vec!["q0".into()],
            side_b: vec!["q1".into()],
        };
        assert!(missing.validate(&sp).is_err());
    }

    #[test]
    fn negative_spectrum_is_rejected() {
        let rho = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.1, 0.0), c(-0.1, 0.0)]));
        assert!(matches!(vn_entropy(&rho), Err(Error::NegativeEigenvalue(_))));
        let tiny = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0, 0.0), c(-1e-12, 0.0)]));
        assert_abs_diff_eq!(vn_entropy(&tiny).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn closed_form_entropies() {
        assert_eq!(two_branch_entropy_exact(1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(two_branch_entropy_exact(0.0).unwrap(), std::f64::consts::LN_2, epsilon = 1e-15);
        // -(0.995 ln 0.995 + 0.005 ln 0.005)
        assert_abs_diff_eq!(two_branch_entropy_exact(0.99).unwrap(), 0.031479, epsilon = 1e-4);
        // 0.005 (1 - ln 0.005)
        assert_abs_diff_eq!(two_branch_entropy_approx(0.01).unwrap(), 0.031492, epsilon = 1e-5);
        assert_eq!(two_branch_entropy_approx(0.0).unwrap(), 0.0);
        assert!(two_branch_entropy_approx(1e-300).unwrap() < 1e-297);
        assert!(two_branch_entropy_exact(1.5).is_err());
        assert!(two_branch_entropy_approx(1.0).is_err());
        assert_abs_diff_eq!(nats_to_bits(std::f64::consts::LN_2), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn entropy_and_purity_of_known_spectrum() {
        let rho = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(0.995, 0.0), c(0.005, 0.0)]));
        assert_abs_diff_eq!(vn_entropy(&rho).unwrap(), 0.0315, epsilon = 1e-3);
        assert_abs_diff_eq!(purity(&rho), 0.99005, epsilon = 1e-12);
    }

    #[test]
    fn two_mode_branch_state() {
        let psi = build_two_branch_state(0.01, &MirrorModel::TwoMode).unwrap();
        assert_abs_diff_eq!(branch_overlap(&psi).unwrap().re, 0.99, epsilon = 1e-12);
        let p = Bipartition::new(psi.space(), &["photon"]).unwrap();
        let rho = reduced_density(&psi, &p).unwrap();
        let mut ev = rho.spectrum().unwrap();
        ev.sort_by(f64::total_cmp);
        assert_abs_diff_eq!(ev[1], 0.995, epsilon = 1e-9);
        assert_abs_diff_eq!(ev[0], 0.005, epsilon = 1e-9);
        let s = vn_entropy(&rho).unwrap();
        assert_abs_diff_eq!(s, two_branch_entropy_exact(0.99).unwrap(), epsilon = 1e-6);

        let product = build_two_branch_state(0.0, &MirrorModel::TwoMode).unwrap();
        assert_abs_diff_eq!(schmidt(&product, &p).unwrap().entropy(), 0.0, epsilon = 1e-12);
        let orth = build_two_branch_state(1.0, &MirrorModel::TwoMode).unwrap();
        assert_abs_diff_eq!(schmidt(&orth, &p).unwrap().entropy(), std::f64::consts::LN_2, epsilon = 1e-12);
    }

    #[test]
    fn displaced_gaussian_branch_state() {
        let model = MirrorModel::DisplacedGaussian {
            sites: 128,
            spacing: 0.125,
            width: 1.0,
        };
        let psi = build_two_branch_state(0.01, &model).unwrap();
        assert_abs_diff_eq!(branch_overlap(&psi).unwrap().re, 0.99, epsilon = 1e-6);
        let p = Bipartition::new(psi.space(), &["photon"]).unwrap();
        let s = schmidt(&psi, &p).unwrap().entropy();
        assert_abs_diff_eq!(s, two_branch_entropy_exact(0.99).unwrap(), epsilon = 1e-6);
        assert!(build_two_branch_state(1.0, &model).is_err());
        let zero = build_two_branch_state(0.0, &model).unwrap();
        assert_abs_diff_eq!(schmidt(&zero, &p).unwrap().entropy(), 0.0, epsilon = 1e-10);
    }
}
