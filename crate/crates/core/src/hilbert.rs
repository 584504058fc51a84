//! States, observables and unitary maps over the two small Hilbert spaces the
//! simulator needs: a single two-valued degree of freedom (dimension 2) and a
//! pair of them (dimension 4, path ⊗ spin or particle 1 ⊗ particle 2).
//!
//! Slot 1 is always the first tensor factor. With the standard labels the
//! dimension-4 basis order is `(u,+), (u,-), (d,+), (d,-)`, so `u` is the
//! `Z₁ = +1` eigenvector and `+` the `Z₂ = +1` eigenvector.

use num_traits::{One, Zero};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{inner, norm, Matrix, C};
use crate::scalar::Scalar;

/// Basis labels of the path ⊗ spin space, in amplitude order.
pub const PATH_SPIN_LABELS: [&str; 4] = ["u,+", "u,-", "d,+", "d,-"];

/// Basis labels of a lone spin.
pub const SPIN_LABELS: [&str; 2] = ["+", "-"];

pub fn path_spin_labels() -> Vec<String> {
    PATH_SPIN_LABELS.iter().map(|s| s.to_string()).collect()
}

pub fn spin_labels() -> Vec<String> {
    SPIN_LABELS.iter().map(|s| s.to_string()).collect()
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 2 || dim == 4 {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(dim))
    }
}

fn check_labels(labels: &[String], dim: usize) -> Result<()> {
    if labels.len() != dim {
        return Err(Error::InvalidLabels(format!(
            "{} labels for dimension {dim}",
            labels.len()
        )));
    }
    for (i, l) in labels.iter().enumerate() {
        if labels[..i].contains(l) {
            return Err(Error::InvalidLabels(format!("duplicate label `{l}`")));
        }
    }
    Ok(())
}

/// Normalized pure state over a labeled mode basis.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector<T: Scalar> {
    amplitudes: Vec<C<T>>,
    labels: Vec<String>,
}

impl<T: Scalar> StateVector<T> {
    /// Validates normalization; use [`StateVector::normalized`] for raw amplitudes.
    pub fn new(amplitudes: Vec<C<T>>, labels: Vec<String>) -> Result<Self> {
        let n = Self::validate_raw(&amplitudes, &labels)?;
        if (n - T::one()).abs() > T::tolerance() {
            return Err(Error::NotNormalized(n.as_f64()));
        }
        Ok(StateVector { amplitudes, labels })
    }

    /// Rescales the amplitudes to unit norm.
    pub fn normalized(amplitudes: Vec<C<T>>, labels: Vec<String>) -> Result<Self> {
        let n = Self::validate_raw(&amplitudes, &labels)?;
        if n <= T::tolerance() {
            return Err(Error::ZeroNorm);
        }
        let inv = C::new(n.recip(), T::zero());
        Ok(StateVector { amplitudes: amplitudes.into_iter().map(|a| a * inv).collect(), labels })
    }

    fn validate_raw(amplitudes: &[C<T>], labels: &[String]) -> Result<T> {
        check_dim(amplitudes.len())?;
        check_labels(labels, amplitudes.len())?;
        if !amplitudes.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NonFinite("amplitudes"));
        }
        Ok(norm(amplitudes))
    }

    /// Real amplitudes, normalized.
    pub fn from_real(amplitudes: &[f64], labels: Vec<String>) -> Result<Self> {
        Self::normalized(
            amplitudes.iter().map(|&a| C::new(T::of(a), T::zero())).collect(),
            labels,
        )
    }

    /// The `index`-th basis mode.
    pub fn basis(labels: Vec<String>, index: usize) -> Result<Self> {
        let dim = labels.len();
        if index >= dim {
            return Err(Error::InvalidLabels(format!("basis index {index} out of range")));
        }
        let mut amps = vec![C::zero(); dim];
        amps[index] = C::one();
        Self::new(amps, labels)
    }

    /// Basis mode with the given label.
    pub fn basis_labeled(labels: Vec<String>, label: &str) -> Result<Self> {
        let index = labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::InvalidLabels(format!("no mode `{label}`")))?;
        Self::basis(labels, index)
    }

    /// Gaussian-random amplitudes, normalized (uniform on the unit sphere).
    pub fn random<R: Rng + ?Sized>(labels: Vec<String>, rng: &mut R) -> Self {
        loop {
            let amps: Vec<C<T>> = (0..labels.len())
                .map(|_| {
                    let re: f64 = StandardNormal.sample(rng);
                    let im: f64 = StandardNormal.sample(rng);
                    C::new(T::of(re), T::of(im))
                })
                .collect();
            if let Ok(s) = Self::normalized(amps, labels.clone()) {
                return s;
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C<T>] {
        &self.amplitudes
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn amplitude_of(&self, label: &str) -> Option<C<T>> {
        self.labels.iter().position(|l| l == label).map(|i| self.amplitudes[i])
    }

    pub fn norm(&self) -> T {
        norm(&self.amplitudes)
    }

    pub fn inner(&self, other: &Self) -> C<T> {
        inner(&self.amplitudes, &other.amplitudes)
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &Self) -> T {
        self.inner(other).norm_sqr()
    }

    /// Same amplitudes in a different labeling of the same dimension.
    pub fn relabeled(&self, labels: Vec<String>) -> Result<Self> {
        check_labels(&labels, self.dim())?;
        Ok(StateVector { amplitudes: self.amplitudes.clone(), labels })
    }

    /// Equality up to a global phase, within tolerance.
    pub fn same_ray(&self, other: &Self) -> bool {
        self.dim() == other.dim() && (self.fidelity(other) - T::one()).abs() <= T::tolerance()
    }
}

/// Hermitian operator.
#[derive(Clone, Debug, PartialEq)]
pub struct Observable<T: Scalar> {
    matrix: Matrix<T>,
}

impl<T: Scalar> Observable<T> {
    pub fn new(matrix: Matrix<T>) -> Result<Self> {
        check_dim(matrix.dim())?;
        matrix.check_finite()?;
        let defect = matrix.hermiticity_defect();
        if defect > T::tolerance() {
            return Err(Error::NotHermitian(defect.as_f64()));
        }
        Ok(Observable { matrix })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::new(Matrix::identity(dim))
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.matrix
    }

    pub fn is_involution(&self) -> bool {
        self.matrix.involution_defect() <= T::tolerance()
    }

    /// `O|ψ⟩` as a raw amplitude vector.
    pub fn act(&self, s: &StateVector<T>) -> Result<Vec<C<T>>> {
        self.matrix.mul_vec(s.amplitudes())
    }
}

/// Spin direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// The ±1-valued spin observable along `axis`.
pub fn pauli<T: Scalar>(axis: Axis) -> Observable<T> {
    let (o, l) = (T::one(), T::zero());
    let rows = match axis {
        Axis::X => vec![vec![C::new(l, l), C::new(o, l)], vec![C::new(o, l), C::new(l, l)]],
        Axis::Y => vec![vec![C::new(l, l), C::new(l, -o)], vec![C::new(l, o), C::new(l, l)]],
        Axis::Z => vec![vec![C::new(o, l), C::new(l, l)], vec![C::new(l, l), C::new(-o, l)]],
    };
    Observable { matrix: Matrix::from_rows(rows).expect("2x2 literal") }
}

/// Lifts a single-slot observable into the two-slot space.
pub fn embed<T: Scalar>(op: &Observable<T>, slot: usize) -> Result<Observable<T>> {
    if op.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: op.dim() });
    }
    let id = Matrix::identity(2);
    let matrix = match slot {
        1 => op.matrix.kron(&id),
        2 => id.kron(&op.matrix),
        other => return Err(Error::InvalidSlot(other)),
    };
    Observable::new(matrix)
}

/// Operator product of two observables; rejected unless the result is Hermitian.
pub fn product<T: Scalar>(a: &Observable<T>, b: &Observable<T>) -> Result<Observable<T>> {
    let m = a.matrix.matmul(&b.matrix)?;
    let defect = m.hermiticity_defect();
    if defect > T::tolerance() {
        return Err(Error::NotHermitian(defect.as_f64()));
    }
    Ok(Observable { matrix: m })
}

/// `ab − ba`.
pub fn commutator<T: Scalar>(a: &Observable<T>, b: &Observable<T>) -> Result<Matrix<T>> {
    a.matrix.matmul(&b.matrix)?.sub(&b.matrix.matmul(&a.matrix)?)
}

pub fn commute<T: Scalar>(a: &Observable<T>, b: &Observable<T>) -> Result<bool> {
    Ok(commutator(a, b)?.is_zero_within(T::tolerance()))
}

/// Spectral split of a ±1-valued observable.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectorPair<T: Scalar> {
    pub plus: Matrix<T>,
    pub minus: Matrix<T>,
}

impl<T: Scalar> ProjectorPair<T> {
    /// Largest violation among completeness, idempotence and orthogonality.
    pub fn defect(&self) -> T {
        let dim = self.plus.dim();
        let id = Matrix::identity(dim);
        let checks = [
            self.plus.add(&self.minus).and_then(|s| s.distance(&id)),
            self.plus.matmul(&self.plus).and_then(|p| p.distance(&self.plus)),
            self.minus.matmul(&self.minus).and_then(|p| p.distance(&self.minus)),
            self.plus.matmul(&self.minus).map(|p| p.frobenius_norm()),
        ];
        checks
            .into_iter()
            .map(|c| c.unwrap_or_else(|_| T::infinity()))
            .fold(T::zero(), T::max)
    }

    pub fn get(&self, positive: bool) -> &Matrix<T> {
        if positive {
            &self.plus
        } else {
            &self.minus
        }
    }
}

/// `((I + O)/2, (I − O)/2)`. The identity yields a zero `minus`.
pub fn spectral_projectors<T: Scalar>(o: &Observable<T>) -> Result<ProjectorPair<T>> {
    let defect = o.matrix.involution_defect();
    if defect > T::tolerance() {
        return Err(Error::NotInvolution(defect.as_f64()));
    }
    let id = Matrix::identity(o.dim());
    let half = T::of(0.5);
    Ok(ProjectorPair {
        plus: id.add(&o.matrix)?.scale_real(half),
        minus: id.sub(&o.matrix)?.scale_real(half),
    })
}

/// `⟨ψ|O|ψ⟩`.
pub fn expectation<T: Scalar>(s: &StateVector<T>, o: &Observable<T>) -> Result<T> {
    if s.dim() != o.dim() {
        return Err(Error::DimensionMismatch { expected: o.dim(), found: s.dim() });
    }
    let v = o.act(s)?;
    let z = inner(s.amplitudes(), &v);
    debug_assert!(z.im.abs() <= T::tolerance() * T::of(10.0));
    Ok(z.re)
}

/// Unitary between two labeled mode bases.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryMap<T: Scalar> {
    matrix: Matrix<T>,
    input_labels: Vec<String>,
    output_labels: Vec<String>,
}

impl<T: Scalar> UnitaryMap<T> {
    pub fn new(
        matrix: Matrix<T>,
        input_labels: Vec<String>,
        output_labels: Vec<String>,
    ) -> Result<Self> {
        check_dim(matrix.dim())?;
        matrix.check_finite()?;
        check_labels(&input_labels, matrix.dim())?;
        check_labels(&output_labels, matrix.dim())?;
        let defect = matrix.unitarity_defect();
        if defect > T::tolerance() {
            return Err(Error::NotUnitary(defect.as_f64()));
        }
        Ok(UnitaryMap { matrix, input_labels, output_labels })
    }

    pub fn identity(labels: Vec<String>) -> Result<Self> {
        Self::new(Matrix::identity(labels.len()), labels.clone(), labels)
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.matrix
    }

    pub fn input_labels(&self) -> &[String] {
        &self.input_labels
    }

    pub fn output_labels(&self) -> &[String] {
        &self.output_labels
    }

    /// The reverse map, from output labels back to input labels.
    pub fn inverse(&self) -> Self {
        UnitaryMap {
            matrix: self.matrix.adjoint(),
            input_labels: self.output_labels.clone(),
            output_labels: self.input_labels.clone(),
        }
    }
}

/// Evolves `s`, which must be expressed in the map's input labels.
pub fn apply<T: Scalar>(u: &UnitaryMap<T>, s: &StateVector<T>) -> Result<StateVector<T>> {
    if s.dim() != u.matrix.dim() {
        return Err(Error::DimensionMismatch { expected: u.matrix.dim(), found: s.dim() });
    }
    if s.labels() != u.input_labels.as_slice() {
        return Err(Error::InvalidLabels(format!(
            "state labels {:?} do not match map inputs {:?}",
            s.labels(),
            u.input_labels
        )));
    }
    let out = u.matrix.mul_vec(s.amplitudes())?;
    if (norm(&out) - T::one()).abs() <= T::tolerance() {
        StateVector::new(out, u.output_labels.clone())
    } else {
        // rounding drift from an almost-unitary matrix
        StateVector::normalized(out, u.output_labels.clone())
    }
}

#[cfg(test)]
pub(crate) fn cr<T: Scalar>(re: f64) -> C<T> {
    num_complex::Complex::new(T::of(re), T::zero())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::{self, Obs};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const TOL: f64 = 1e-12;

    fn real_diag(o: &Observable<f64>) -> Vec<f64> {
        (0..o.dim()).map(|i| o.matrix()[(i, i)].re).collect()
    }

    #[test]
    fn pauli_definitions() {
        let z = pauli::<f64>(Axis::Z);
        assert_eq!(real_diag(&z), vec![1.0, -1.0]);
        assert!(z.matrix()[(0, 1)].is_zero());
        let x = pauli::<f64>(Axis::X);
        assert_eq!(x.matrix()[(0, 1)], cr(1.0));
        assert_eq!(x.matrix()[(1, 0)], cr(1.0));
        assert_eq!(real_diag(&x), vec![0.0, 0.0]);
        for axis in [Axis::X, Axis::Y, Axis::Z] {
            assert!(pauli::<f64>(axis).is_involution());
        }
    }

    #[test]
    fn embed_acts_on_the_named_slot() {
        let z1 = embed(&pauli::<f64>(Axis::Z), 1).unwrap();
        let up_plus = presets::state::<f64>("u+").unwrap();
        assert!((expectation(&up_plus, &z1).unwrap() - 1.0).abs() < TOL);

        let z2 = embed(&pauli::<f64>(Axis::Z), 2).unwrap();
        let up_minus = presets::state::<f64>("u-").unwrap();
        assert!((expectation(&up_minus, &z2).unwrap() + 1.0).abs() < TOL);

        let x1 = embed(&pauli::<f64>(Axis::X), 1).unwrap();
        let flipped = x1.act(&up_plus).unwrap();
        let down_plus = presets::state::<f64>("d+").unwrap();
        assert_eq!(flipped, down_plus.amplitudes().to_vec());
    }

    #[test]
    fn embed_rejects_bad_slot_and_dim() {
        let z = pauli::<f64>(Axis::Z);
        assert_eq!(embed(&z, 0), Err(Error::InvalidSlot(0)));
        assert_eq!(embed(&z, 3), Err(Error::InvalidSlot(3)));
        let z1 = embed(&z, 1).unwrap();
        assert!(matches!(embed(&z1, 1), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn product_of_commuting_factors() {
        let z1z2 = presets::observable::<f64>(Obs::Z1Z2);
        let dm = presets::state::<f64>("d-").unwrap();
        assert!((expectation(&dm, &z1z2).unwrap() - 1.0).abs() < TOL);
        assert!(z1z2.is_involution());
    }

    #[test]
    fn product_of_mixed_pairs_is_y_y() {
        // Oracle: explicit 4x4 of Y⊗Y built entry by entry.
        // Y = [[0,-i],[i,0]], so (Y⊗Y)[r][c] = Y[r/2][c/2]·Y[r%2][c%2].
        let y = [[C::new(0.0, 0.0), C::new(0.0, -1.0)], [C::new(0.0, 1.0), C::new(0.0, 0.0)]];
        let mut yy = Matrix::<f64>::zeros(4);
        for r in 0..4 {
            for c in 0..4 {
                yy[(r, c)] = y[r / 2][c / 2] * y[r % 2][c % 2];
            }
        }
        let lhs = product(
            &presets::observable::<f64>(Obs::Z1X2),
            &presets::observable::<f64>(Obs::X1Z2),
        )
        .unwrap();
        assert!(lhs.matrix().approx_eq(&yy, TOL));
        // Y⊗Y is the real matrix antidiag(-1, 1, 1, -1)
        assert_eq!(yy[(0, 3)], cr(-1.0));
        assert_eq!(yy[(1, 2)], cr(1.0));
    }

    #[test]
    fn product_rejects_non_commuting_and_mismatched() {
        let z1 = presets::observable::<f64>(Obs::Z1);
        let x1 = presets::observable::<f64>(Obs::X1);
        assert!(matches!(product(&z1, &x1), Err(Error::NotHermitian(_))));
        let z = pauli::<f64>(Axis::Z);
        assert!(matches!(product(&z, &z1), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn commutators_match_the_algebra() {
        use Obs::*;
        let o = presets::observable::<f64>;
        assert!(commutator(&o(Z1Z2), &o(X1X2)).unwrap().frobenius_norm() == 0.0);
        assert!(commutator(&o(Z1X2), &o(X1Z2)).unwrap().frobenius_norm() == 0.0);
        // [Z,X] = 2iY, so ‖[Z,X]⊗I‖_F = 2·‖Y‖_F·‖I₂‖_F = 2·√2·√2 = 4.
        let n = commutator(&o(Z1), &o(X1)).unwrap().frobenius_norm();
        assert!((n - 4.0).abs() < TOL);
        let n2 = commutator(&o(Z2), &o(X2)).unwrap().frobenius_norm();
        assert!((n2 - 4.0).abs() < TOL);
    }

    #[test]
    fn spectral_projectors_of_z_and_identity() {
        let p = spectral_projectors(&pauli::<f64>(Axis::Z)).unwrap();
        assert!(p.plus.approx_eq(&Matrix::diag(&[cr(1.0), cr(0.0)]), 0.0));
        assert!(p.minus.approx_eq(&Matrix::diag(&[cr(0.0), cr(1.0)]), 0.0));

        let id = Observable::<f64>::identity(4).unwrap();
        let p = spectral_projectors(&id).unwrap();
        assert!(p.minus.is_zero_within(0.0));
        assert!(p.plus.approx_eq(&Matrix::identity(4), 0.0));
    }

    #[test]
    fn spectral_projector_trace_is_eigenspace_rank() {
        // Oracle: count +1 entries on the diagonal of the (already diagonal) Z1Z2.
        let z1z2 = presets::observable::<f64>(Obs::Z1Z2);
        let rank = (0..4).filter(|&i| (z1z2.matrix()[(i, i)].re - 1.0).abs() < TOL).count();
        let p = spectral_projectors(&z1z2).unwrap();
        assert!((p.plus.trace().re - rank as f64).abs() < TOL);
        assert_eq!(rank, 2);
    }

    #[test]
    fn spectral_projectors_rejects_non_involution() {
        let m = Matrix::<f64>::diag(&[cr(2.0), cr(-1.0)]);
        let o = Observable::new(m).unwrap();
        assert!(matches!(spectral_projectors(&o), Err(Error::NotInvolution(_))));
    }

    #[test]
    fn expectations() {
        use Obs::*;
        let singlet = presets::state::<f64>("singlet").unwrap();
        let z1z2 = presets::observable::<f64>(Z1Z2);
        assert!((expectation(&singlet, &z1z2).unwrap() + 1.0).abs() < TOL);
        let phi = presets::state::<f64>("phi+").unwrap();
        let yy = presets::observable::<f64>(Y1Y2);
        // Oracle: Y⊗Y|u,+⟩ = i·i|d,-⟩ = -|d,-⟩, Y⊗Y|d,-⟩ = (-i)(-i)|u,+⟩ = -|u,+⟩.
        let v = [0.5f64.sqrt(), 0.0, 0.0, 0.5f64.sqrt()];
        let yyv = [-v[3], 0.0, 0.0, -v[0]];
        let oracle: f64 = v.iter().zip(&yyv).map(|(a, b)| a * b).sum();
        assert!((oracle + 1.0).abs() < TOL);
        assert!((expectation(&phi, &yy).unwrap() - oracle).abs() < TOL);
        let mismatch = expectation(&presets::state::<f64>("z+").unwrap(), &z1z2);
        assert!(matches!(mismatch, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn state_validation() {
        let labels = path_spin_labels();
        assert!(matches!(
            StateVector::<f64>::new(vec![cr(1.0), cr(1.0), cr(0.0), cr(0.0)], labels.clone()),
            Err(Error::NotNormalized(_))
        ));
        assert_eq!(
            StateVector::<f64>::normalized(vec![cr(0.0); 4], labels.clone()),
            Err(Error::ZeroNorm)
        );
        assert_eq!(
            StateVector::<f64>::normalized(vec![cr(1.0); 3], labels[..3].to_vec()),
            Err(Error::UnsupportedDimension(3))
        );
        let dup = vec!["a".into(), "a".into()];
        assert!(matches!(
            StateVector::<f64>::basis(dup, 0),
            Err(Error::InvalidLabels(_))
        ));
    }

    #[test]
    fn apply_identity_and_label_check() {
        let s = presets::state::<f64>("phi+").unwrap();
        let id = UnitaryMap::identity(path_spin_labels()).unwrap();
        assert_eq!(apply(&id, &s).unwrap(), s);
        let spin = UnitaryMap::<f64>::identity(spin_labels()).unwrap();
        assert!(matches!(apply(&spin, &s), Err(Error::DimensionMismatch { .. })));
        let z = presets::state::<f64>("z+").unwrap().relabeled(vec!["a".into(), "b".into()]);
        assert!(matches!(apply(&spin, &z.unwrap()), Err(Error::InvalidLabels(_))));
    }

    #[test]
    fn unitary_map_rejects_non_unitary() {
        let m = Matrix::<f64>::diag(&[cr(1.0), cr(0.5)]);
        assert!(matches!(
            UnitaryMap::new(m, spin_labels(), spin_labels()),
            Err(Error::NotUnitary(_))
        ));
    }

    #[test]
    fn random_states_are_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let s = StateVector::<f64>::random(path_spin_labels(), &mut rng);
            assert!((s.norm() - 1.0).abs() < TOL);
        }
    }

    #[test]
    fn single_precision_algebra() {
        let z1z2 = presets::observable::<f32>(Obs::Z1Z2);
        let x1x2 = presets::observable::<f32>(Obs::X1X2);
        assert!(commute(&z1z2, &x1x2).unwrap());
        let p = spectral_projectors(&z1z2).unwrap();
        assert!(p.defect() <= f32::tolerance());
        let singlet = presets::state::<f32>("singlet").unwrap();
        assert!((expectation(&singlet, &x1x2).unwrap() + 1.0).abs() <= f32::tolerance());
    }
}
