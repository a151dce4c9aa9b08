//! Block-encodings and ideal spectral-level polynomial transforms.
//!
//! A block-encoding is a unitary `U` with projectors `Pi` (right) and
//! `Pi~` (left) whose compressed block `Pi~ U Pi` embeds the operator of
//! interest. Polynomial transforms are applied directly to the singular
//! values of that block and charged `degree * queries_per_call` oracle
//! queries, the query cost the transform's circuit would pay; measurement
//! statistics are reproduced exactly from the spectral data.

use nalgebra::{DMatrix, DVector};
use rand::distr::Distribution;

use crate::error::{Error, Result};
use crate::ledger::QueryLedger;
use crate::poly::BoundedPolynomial;
use crate::stats::SimRng;

/// Largest statevector dimension the simulator will allocate.
pub const DIMENSION_CAP: usize = 1 << 14;
/// Numerical tolerance on unitarity / idempotency checks.
pub const MATRIX_TOL: f64 = 1e-10;

/// Boolean oracle input of power-of-two size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleInput {
    bits: Vec<bool>,
}

impl OracleInput {
    pub fn new(bits: Vec<bool>) -> Result<Self> {
        if bits.is_empty() || !bits.len().is_power_of_two() {
            return Err(Error::InvalidSize(bits.len()));
        }
        Ok(Self { bits })
    }

    /// Parse a string of `0`/`1` characters.
    pub fn parse(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::InvalidInput(format!("bad bit char {other:?}"))),
            })
            .collect::<Result<Vec<bool>>>()?;
        Self::new(bits)
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn bit(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn hamming_weight(&self) -> u64 {
        self.bits.iter().filter(|&&b| b).count() as u64
    }

    pub fn complement(&self) -> Self {
        Self { bits: self.bits.iter().map(|b| !b).collect() }
    }

    pub fn n_qubits(&self) -> u32 {
        self.bits.len().trailing_zeros()
    }
}

/// Diagonal 0/1 projector (all projectors used here are diagonal in the
/// computational basis).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Projector {
    mask: Vec<bool>,
}

impl Projector {
    pub fn from_mask(mask: Vec<bool>) -> Self {
        Self { mask }
    }

    /// Projector onto a single basis state.
    pub fn basis_state(dim: usize, index: usize) -> Self {
        let mut mask = vec![false; dim];
        mask[index] = true;
        Self { mask }
    }

    pub fn dim(&self) -> usize {
        self.mask.len()
    }

    pub fn rank(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim(), self.dim(), |i, j| {
            if i == j && self.mask[i] { 1.0 } else { 0.0 }
        })
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.dim(), |i, _| if self.mask[i] { v[i] } else { 0.0 })
    }

    /// Distance of `v` from its projection (0 when `v` is in the image).
    pub fn residual(&self, v: &DVector<f64>) -> f64 {
        (0..self.dim())
            .filter(|&i| !self.mask[i])
            .map(|i| v[i] * v[i])
            .sum::<f64>()
            .sqrt()
    }
}

/// Signed singular triples of the encoded block over paired orthonormal
/// systems: the block equals `sum_i values[i] * left_i * right_i^T`.
#[derive(Debug, Clone, PartialEq)]
struct SpectralForm {
    values: Vec<f64>,
    left_vecs: DMatrix<f64>,
    right_vecs: DMatrix<f64>,
}

/// Recipe for materializing the encoding's unitary.
#[derive(Debug, Clone, PartialEq)]
enum UnitaryKind {
    Dense(DMatrix<f64>),
    /// `O_X (H^{(x) n} (x) I_2)` on n+1 qubits.
    HadamardOracle { bits: Vec<bool> },
    /// One-ancilla dilation `[[A, S], [S, -A]]` with `S = sqrt(I - A^2)`.
    Dilation { a: DMatrix<f64> },
    /// Result of a spectral-level polynomial transform; the unitary is
    /// completed from the spectral form on demand.
    Synthesized,
}

/// A unitary with two projectors and a per-call oracle query cost.
#[derive(Debug, Clone)]
pub struct BlockEncoding {
    kind: UnitaryKind,
    left: Projector,
    right: Projector,
    queries_per_call: u64,
    spectral: SpectralForm,
}

impl BlockEncoding {
    /// Scalar block-encoding of `value` in a 2x2 rotation; the block
    /// `<1| U |0>` equals `value`.
    pub fn scalar(value: f64, queries_per_call: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::InvalidInput(format!(
                "scalar block value {value} outside [0, 1]"
            )));
        }
        let c = (1.0 - value * value).max(0.0).sqrt();
        let u = DMatrix::from_row_slice(2, 2, &[c, value, value, -c]);
        let spectral = SpectralForm {
            values: vec![value],
            left_vecs: DMatrix::from_column_slice(2, 1, &[0.0, 1.0]),
            right_vecs: DMatrix::from_column_slice(2, 1, &[1.0, 0.0]),
        };
        Ok(Self {
            kind: UnitaryKind::Dense(u),
            left: Projector::basis_state(2, 1),
            right: Projector::basis_state(2, 0),
            queries_per_call,
            spectral,
        })
    }

    /// Block-encoding of `sqrt(|x| / N)` via one query: Hadamards on the
    /// index register followed by the oracle writing `x_i` into the flag.
    pub fn threshold(input: &OracleInput, queries_per_call: u64) -> Result<Self> {
        Self::hamming_encoding(input, true, queries_per_call)
    }

    /// Same unitary with the flag projector replaced by `I (x) |0><0|`,
    /// encoding `sqrt((N - |x|) / N)`.
    pub fn complement(input: &OracleInput, queries_per_call: u64) -> Result<Self> {
        Self::hamming_encoding(input, false, queries_per_call)
    }

    fn hamming_encoding(input: &OracleInput, flag_one: bool, queries_per_call: u64) -> Result<Self> {
        let n = input.len();
        let dim = 2 * n;
        if dim > DIMENSION_CAP {
            return Err(Error::InvalidSize(n));
        }
        let marked = if flag_one { input.hamming_weight() } else { n as u64 - input.hamming_weight() };
        let sigma = (marked as f64 / n as f64).sqrt();
        let flag_bit = usize::from(flag_one);
        let mut left = DVector::zeros(dim);
        if marked > 0 {
            let amp = 1.0 / (marked as f64).sqrt();
            for (i, &b) in input.bits().iter().enumerate() {
                if b == flag_one {
                    left[2 * i + flag_bit] = amp;
                }
            }
        } else {
            // Zero-amplitude block: complete the singular pair with the
            // canonical flag-register state.
            left[flag_bit] = 1.0;
        }
        let mut right = DVector::zeros(dim);
        right[0] = 1.0;
        let spectral = SpectralForm {
            values: vec![sigma],
            left_vecs: DMatrix::from_columns(&[left]),
            right_vecs: DMatrix::from_columns(&[right]),
        };
        let flag_mask: Vec<bool> = (0..dim).map(|i| i % 2 == flag_bit).collect();
        Ok(Self {
            kind: UnitaryKind::HadamardOracle { bits: input.bits().to_vec() },
            left: Projector::from_mask(flag_mask),
            right: Projector::basis_state(dim, 0),
            queries_per_call,
        spectral,
        })
    }

    /// Block-encoding of `H / 3` for a bounded-degree symmetric `H` with
    /// entries in [-1, 1], via a one-ancilla dilation.
    pub fn nand(h: &DMatrix<f64>, queries_per_call: u64) -> Result<Self> {
        let m = h.nrows();
        if h.ncols() != m {
            return Err(Error::InvalidOperator("H must be square".into()));
        }
        if 2 * m > DIMENSION_CAP {
            return Err(Error::InvalidSize(m));
        }
        for i in 0..m {
            let mut degree = 0usize;
            for j in 0..m {
                if (h[(i, j)] - h[(j, i)]).abs() > MATRIX_TOL {
                    return Err(Error::InvalidOperator(format!(
                        "asymmetric entry at ({i}, {j})"
                    )));
                }
                if h[(i, j)].abs() > 1.0 + MATRIX_TOL {
                    return Err(Error::InvalidOperator(format!(
                        "entry ({i}, {j}) exceeds 1 in magnitude"
                    )));
                }
                if i != j && h[(i, j)] != 0.0 {
                    degree += 1;
                }
            }
            if degree > 3 {
                return Err(Error::InvalidOperator(format!(
                    "row {i} has degree {degree} > 3"
                )));
            }
        }
        let a = h / 3.0;
        let eig = nalgebra::SymmetricEigen::new(a.clone());
        let dim = 2 * m;
        let mut values = Vec::with_capacity(m);
        let mut cols = Vec::with_capacity(m);
        for k in 0..m {
            values.push(eig.eigenvalues[k]);
            let mut v = DVector::zeros(dim);
            for i in 0..m {
                v[i] = eig.eigenvectors[(i, k)];
            }
            cols.push(v);
        }
        let vecs = DMatrix::from_columns(&cols);
        let mask: Vec<bool> = (0..dim).map(|i| i < m).collect();
        Ok(Self {
            kind: UnitaryKind::Dilation { a },
            left: Projector::from_mask(mask.clone()),
            right: Projector::from_mask(mask),
            queries_per_call,
            spectral: SpectralForm { values, left_vecs: vecs.clone(), right_vecs: vecs },
        })
    }

    /// General constructor: validates unitarity and projector shape, then
    /// extracts the block's singular triples with a dense SVD.
    pub fn from_parts(
        u: DMatrix<f64>,
        left: Projector,
        right: Projector,
        queries_per_call: u64,
    ) -> Result<Self> {
        let dim = u.nrows();
        if u.ncols() != dim || left.dim() != dim || right.dim() != dim {
            return Err(Error::InvalidOperator("dimension mismatch".into()));
        }
        if dim > DIMENSION_CAP {
            return Err(Error::InvalidSize(dim));
        }
        let gram = u.transpose() * &u;
        for i in 0..dim {
            for j in 0..dim {
                let target = if i == j { 1.0 } else { 0.0 };
                if (gram[(i, j)] - target).abs() > MATRIX_TOL {
                    return Err(Error::InvalidOperator(format!(
                        "U is not unitary: gram[{i}][{j}] = {}",
                        gram[(i, j)]
                    )));
                }
            }
        }
        // Compressed block Pi~ U Pi.
        let block = DMatrix::from_fn(dim, dim, |i, j| {
            if left.mask()[i] && right.mask()[j] { u[(i, j)] } else { 0.0 }
        });
        let r = left.rank().min(right.rank());
        let svd = block.svd(true, true);
        let u_m = svd.u.as_ref().expect("svd with u");
        let v_t = svd.v_t.as_ref().expect("svd with v_t");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| {
            svd.singular_values[b]
                .partial_cmp(&svd.singular_values[a])
                .expect("finite singular values")
        });
        let mut values = Vec::with_capacity(r);
        let mut lcols = Vec::with_capacity(r);
        let mut rcols = Vec::with_capacity(r);
        for &k in order.iter().take(r) {
            let sv = svd.singular_values[k];
            if sv > 1.0 + crate::poly::RANGE_SLACK {
                return Err(Error::InvalidOperator(format!(
                    "singular value {sv} exceeds 1"
                )));
            }
            values.push(sv);
            lcols.push(u_m.column(k).into_owned());
            rcols.push(v_t.row(k).transpose());
        }
        Ok(Self {
            kind: UnitaryKind::Dense(u),
            left,
            right,
            queries_per_call,
            spectral: SpectralForm {
                values,
                left_vecs: DMatrix::from_columns(&lcols),
                right_vecs: DMatrix::from_columns(&rcols),
            },
        })
    }

    pub fn dim(&self) -> usize {
        self.left.dim()
    }

    pub fn queries_per_call(&self) -> u64 {
        self.queries_per_call
    }

    pub fn left_projector(&self) -> &Projector {
        &self.left
    }

    pub fn right_projector(&self) -> &Projector {
        &self.right
    }

    /// Signed singular values of the encoded block.
    pub fn block_values(&self) -> &[f64] {
        &self.spectral.values
    }

    /// The encoded block as a dense matrix (for tests and certificates).
    pub fn block_matrix(&self) -> DMatrix<f64> {
        let dim = self.dim();
        let mut out = DMatrix::zeros(dim, dim);
        for (k, &val) in self.spectral.values.iter().enumerate() {
            let l = self.spectral.left_vecs.column(k);
            let r = self.spectral.right_vecs.column(k);
            for i in 0..dim {
                if l[i] == 0.0 {
                    continue;
                }
                for j in 0..dim {
                    out[(i, j)] += val * l[i] * r[j];
                }
            }
        }
        out
    }

    /// The block value of a rank-one (scalar) encoding.
    pub fn block_value(&self) -> Result<f64> {
        if self.spectral.values.len() != 1 {
            return Err(Error::Internal(format!(
                "block_value on a rank-{} encoding",
                self.spectral.values.len()
            )));
        }
        Ok(self.spectral.values[0])
    }

    /// Materialize the unitary. For transformed encodings this completes the
    /// block into a full unitary (the circuit QSVT guarantees to exist).
    pub fn unitary(&self) -> Result<DMatrix<f64>> {
        match &self.kind {
            UnitaryKind::Dense(u) => Ok(u.clone()),
            UnitaryKind::HadamardOracle { bits } => {
                let n = bits.len();
                let dim = 2 * n;
                let scale = 1.0 / (n as f64).sqrt();
                let mut u = DMatrix::zeros(dim, dim);
                for j in 0..n {
                    for b in 0..2usize {
                        for (i, &xi) in bits.iter().enumerate() {
                            let sign = if (i & j).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                            let out_bit = b ^ usize::from(xi);
                            u[(2 * i + out_bit, 2 * j + b)] = sign * scale;
                        }
                    }
                }
                Ok(u)
            }
            UnitaryKind::Dilation { a } => {
                let m = a.nrows();
                let eig = nalgebra::SymmetricEigen::new(a.clone());
                let mut s = DMatrix::zeros(m, m);
                for k in 0..m {
                    let lambda: f64 = eig.eigenvalues[k];
                    let sk = (1.0 - lambda * lambda).max(0.0).sqrt();
                    let q = eig.eigenvectors.column(k);
                    for i in 0..m {
                        for j in 0..m {
                            s[(i, j)] += sk * q[i] * q[j];
                        }
                    }
                }
                let mut u = DMatrix::zeros(2 * m, 2 * m);
                u.view_mut((0, 0), (m, m)).copy_from(a);
                u.view_mut((0, m), (m, m)).copy_from(&s);
                u.view_mut((m, 0), (m, m)).copy_from(&s);
                u.view_mut((m, m), (m, m)).copy_from(&(-a));
                Ok(u)
            }
            UnitaryKind::Synthesized => self.complete_unitary(),
        }
    }

    /// Complete the spectral form into an explicit unitary with
    /// `Pi~ U Pi = block`.
    fn complete_unitary(&self) -> Result<DMatrix<f64>> {
        let dim = self.dim();
        let r = self.spectral.values.len();
        let mut domain: Vec<DVector<f64>> = Vec::with_capacity(dim);
        let mut images: Vec<DVector<f64>> = Vec::with_capacity(dim);

        // Orthonormal kernel directions of the left projector, consumed as
        // leak targets for the transformed singular pairs.
        let mut leak: Vec<DVector<f64>> = Vec::new();
        let mut used_leak = 0usize;
        for i in 0..dim {
            if !self.left.mask()[i] {
                let mut e = DVector::zeros(dim);
                e[i] = 1.0;
                leak.push(e);
            }
        }

        for k in 0..r {
            let val = self.spectral.values[k].clamp(-1.0, 1.0);
            let s = (1.0 - val * val).max(0.0).sqrt();
            let mut img = self.spectral.left_vecs.column(k) * val;
            if s > 1e-12 {
                let z = leak.get(used_leak).ok_or_else(|| {
                    Error::Internal("not enough kernel room to complete the unitary".into())
                })?;
                img += z * s;
                used_leak += 1;
            }
            domain.push(self.spectral.right_vecs.column(k).into_owned());
            images.push(img);
        }

        // Directions of im(Pi) outside the right singular span must map into
        // ker(Pi~) so the compressed block stays exactly the spectral sum.
        for i in 0..dim {
            if !self.right.mask()[i] {
                continue;
            }
            let mut e = DVector::zeros(dim);
            e[i] = 1.0;
            for d in &domain {
                let c = d.dot(&e);
                e -= d * c;
            }
            if e.norm() > 1e-9 {
                e /= e.norm();
                let z = leak.get(used_leak).ok_or_else(|| {
                    Error::Internal("not enough kernel room to complete the unitary".into())
                })?;
                images.push(z.clone());
                used_leak += 1;
                domain.push(e);
            }
        }

        // Complete both bases over the remaining space.
        complete_basis(&mut domain, dim);
        complete_basis(&mut images, dim);
        if domain.len() != dim || images.len() != dim {
            return Err(Error::Internal("unitary completion failed".into()));
        }
        let mut u = DMatrix::zeros(dim, dim);
        for (d, img) in domain.iter().zip(images.iter()) {
            // u += img * d^T
            for i in 0..dim {
                if img[i] == 0.0 {
                    continue;
                }
                for j in 0..dim {
                    u[(i, j)] += img[i] * d[j];
                }
            }
        }
        Ok(u)
    }

    /// Success probability of the flag measurement from `initial_state`
    /// (which must lie in the image of the right projector):
    /// `|| Pi~ U psi ||^2`.
    pub fn success_probability(&self, initial_state: &DVector<f64>) -> Result<f64> {
        if initial_state.len() != self.dim() {
            return Err(Error::InvalidInput("state dimension mismatch".into()));
        }
        if (initial_state.norm() - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidInput("initial state is not normalized".into()));
        }
        if self.right.residual(initial_state) > 1e-8 {
            return Err(Error::InvalidInput(
                "initial state outside the right projector image".into(),
            ));
        }
        let mut p = 0.0;
        for (k, &val) in self.spectral.values.iter().enumerate() {
            let overlap = self.spectral.right_vecs.column(k).dot(initial_state);
            p += (val * overlap).powi(2);
        }
        if p > 1.0 + crate::poly::RANGE_SLACK {
            return Err(Error::Internal(format!("flag probability {p} exceeds 1")));
        }
        Ok(p.clamp(0.0, 1.0))
    }

    /// Canonical initial state for rank-one right projectors: the single
    /// basis state in the projector image.
    pub fn canonical_right_state(&self) -> Result<DVector<f64>> {
        if self.right.rank() != 1 {
            return Err(Error::Internal(
                "canonical state requires a rank-one right projector".into(),
            ));
        }
        let idx = self
            .right
            .mask()
            .iter()
            .position(|&m| m)
            .expect("rank-one projector has a masked index");
        Ok(basis_state(self.dim(), idx))
    }

    /// Draw `shots` flag measurements, charging one circuit of
    /// `queries_per_call` per shot (zero-query circuits are free and not
    /// recorded).
    pub fn sample_flag(
        &self,
        initial_state: &DVector<f64>,
        shots: u64,
        ledger: &mut QueryLedger,
        rng: &mut SimRng,
    ) -> Result<u64> {
        let p = self.success_probability(initial_state)?;
        if self.queries_per_call > 0 {
            ledger.record_circuits(self.queries_per_call, shots)?;
        }
        let dist = rand_distr::Binomial::new(shots, p)
            .map_err(|e| Error::Internal(format!("binomial sampling: {e}")))?;
        Ok(dist.sample(rng))
    }
}

fn complete_basis(basis: &mut Vec<DVector<f64>>, dim: usize) {
    for i in 0..dim {
        if basis.len() == dim {
            break;
        }
        let mut e = DVector::zeros(dim);
        e[i] = 1.0;
        for b in basis.iter() {
            let c = b.dot(&e);
            e -= b * c;
        }
        let n = e.norm();
        if n > 1e-9 {
            basis.push(e / n);
        }
    }
}

/// Apply the polynomial to the singular values of the encoded block:
/// the result's block is `sum_i P(sigma_i) |w_i><v_i|` and its per-call cost
/// is `degree(p) * queries_per_call`.
pub fn apply_qsvt(be: &BlockEncoding, p: &BoundedPolynomial) -> Result<BlockEncoding> {
    let values = be
        .spectral
        .values
        .iter()
        .map(|&v| {
            let transformed = p.eval(v.abs())?;
            Ok(if v < 0.0 { -transformed } else { transformed })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(BlockEncoding {
        kind: UnitaryKind::Synthesized,
        left: be.left.clone(),
        right: be.right.clone(),
        queries_per_call: p.degree() as u64 * be.queries_per_call,
        spectral: SpectralForm {
            values,
            left_vecs: be.spectral.left_vecs.clone(),
            right_vecs: be.spectral.right_vecs.clone(),
        },
    })
}

/// Basis state of the given dimension.
pub fn basis_state(dim: usize, index: usize) -> DVector<f64> {
    let mut v = DVector::zeros(dim);
    v[index] = 1.0;
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{step_poly, StepSpec};
    use crate::stats::rng_from_seed;
    use rand::Rng;

    fn exhaustive_inputs(n: usize) -> impl Iterator<Item = OracleInput> {
        (0..(1usize << n)).map(move |m| {
            OracleInput::new((0..n).map(|i| (m >> i) & 1 == 1).collect()).unwrap()
        })
    }

    #[test]
    fn oracle_input_validation() {
        assert!(OracleInput::new(vec![true, false, true]).is_err());
        assert!(OracleInput::parse("0110").is_ok());
        assert!(OracleInput::parse("01x0").is_err());
        assert_eq!(OracleInput::parse("0110").unwrap().hamming_weight(), 2);
    }

    #[test]
    fn threshold_block_extremes() {
        let zero = OracleInput::parse("0000").unwrap();
        assert_eq!(BlockEncoding::threshold(&zero, 1).unwrap().block_value().unwrap(), 0.0);
        let ones = OracleInput::parse("1111").unwrap();
        assert!((BlockEncoding::threshold(&ones, 1).unwrap().block_value().unwrap() - 1.0).abs() < 1e-12);
        let single = OracleInput::parse("1000").unwrap();
        assert!((BlockEncoding::threshold(&single, 1).unwrap().block_value().unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn complement_block_values() {
        let zero = OracleInput::parse("0000").unwrap();
        assert!((BlockEncoding::complement(&zero, 1).unwrap().block_value().unwrap() - 1.0).abs() < 1e-12);
        let ones = OracleInput::parse("1111").unwrap();
        assert_eq!(BlockEncoding::complement(&ones, 1).unwrap().block_value().unwrap(), 0.0);
        let half = OracleInput::parse("1100").unwrap();
        let got = BlockEncoding::complement(&half, 1).unwrap().block_value().unwrap();
        assert!((got - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn threshold_encoding_exhaustive_small_sizes() {
        for n in [2usize, 4, 8, 16] {
            for input in exhaustive_inputs(n) {
                let be = BlockEncoding::threshold(&input, 1).unwrap();
                let expect = (input.hamming_weight() as f64 / n as f64).sqrt();
                assert!((be.block_value().unwrap() - expect).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn threshold_unitary_is_unitary_and_consistent() {
        for input in [OracleInput::parse("0110").unwrap(), OracleInput::parse("10010110").unwrap()] {
            let be = BlockEncoding::threshold(&input, 1).unwrap();
            let u = be.unitary().unwrap();
            let dim = be.dim();
            let gram = u.transpose() * &u;
            assert!((gram - DMatrix::identity(dim, dim)).abs().max() < MATRIX_TOL);
            // Spectral block agrees with the dense compressed block.
            let dense = BlockEncoding::from_parts(u, be.left.clone(), be.right.clone(), 1).unwrap();
            assert!((be.block_matrix() - dense.block_matrix()).abs().max() < 1e-10);
        }
    }

    #[test]
    fn projector_invariants() {
        let be = BlockEncoding::threshold(&OracleInput::parse("0110").unwrap(), 1).unwrap();
        for proj in [be.left_projector(), be.right_projector()] {
            let m = proj.matrix();
            assert!(((&m * &m) - &m).abs().max() < MATRIX_TOL);
            assert!((m.transpose() - &m).abs().max() < MATRIX_TOL);
        }
    }

    #[test]
    fn nand_encoding_rejects_bad_operators() {
        let mut h = DMatrix::zeros(3, 3);
        h[(0, 1)] = 0.5;
        assert!(BlockEncoding::nand(&h, 1).is_err()); // asymmetric
        let mut h = DMatrix::zeros(5, 5);
        for j in 1..5 {
            h[(0, j)] = 0.5;
            h[(j, 0)] = 0.5;
        }
        assert!(BlockEncoding::nand(&h, 1).is_err()); // degree 4
    }

    #[test]
    fn nand_zero_matrix() {
        let h = DMatrix::zeros(4, 4);
        let be = BlockEncoding::nand(&h, 1).unwrap();
        assert!(be.block_matrix().abs().max() < 1e-15);
    }

    #[test]
    fn nand_single_edge_singular_values() {
        let w = 0.7;
        let mut h = DMatrix::zeros(3, 3);
        h[(0, 1)] = w;
        h[(1, 0)] = w;
        let be = BlockEncoding::nand(&h, 1).unwrap();
        let mut svs: Vec<f64> = be.block_values().iter().map(|v| v.abs()).collect();
        svs.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert!((svs[0] - w / 3.0).abs() < 1e-12);
        assert!((svs[1] - w / 3.0).abs() < 1e-12);
        assert!(svs[2].abs() < 1e-12);
    }

    #[test]
    fn nand_block_matches_dense_oracle() {
        let tree = crate::nand::NandTree::balanced(2).unwrap();
        let x = OracleInput::parse("0000").unwrap();
        let h = tree.adjacency_matrix(&x).unwrap();
        let be = BlockEncoding::nand(&h, 1).unwrap();
        let m = h.nrows();
        let block = be.block_matrix();
        for i in 0..m {
            for j in 0..m {
                assert!((block[(i, j)] - h[(i, j)] / 3.0).abs() < 1e-10);
            }
        }
        // Eigenvalues of the block equal eigenvalues of H / 3.
        let mut got: Vec<f64> = be.block_values().to_vec();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let eig = nalgebra::SymmetricEigen::new(h / 3.0);
        let mut want: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (g, w) in got.iter().zip(want.iter()) {
            assert!((g - w).abs() < 1e-10);
        }
    }

    #[test]
    fn qsvt_identity_and_constant() {
        let be = BlockEncoding::scalar(0.6, 1).unwrap();
        let ident = BoundedPolynomial::from_chebyshev(vec![0.0, 1.0]).unwrap();
        let out = apply_qsvt(&be, &ident).unwrap();
        assert!((out.block_value().unwrap() - 0.6).abs() < 1e-10);
        assert_eq!(out.queries_per_call(), 1);

        let one = BoundedPolynomial::from_chebyshev(vec![1.0]).unwrap();
        for a in [0.0, 0.3, 1.0] {
            let be = BlockEncoding::scalar(a, 1).unwrap();
            let out = apply_qsvt(&be, &one).unwrap();
            assert!((out.block_value().unwrap() - 1.0).abs() < 1e-12);
            assert_eq!(out.queries_per_call(), 0);
        }
    }

    #[test]
    fn qsvt_step_matches_eval_on_scalar() {
        let spec = StepSpec::new(0.1, 0.125, 0.4).unwrap();
        let p = step_poly(&spec).unwrap();
        for n in [4usize, 8] {
            for input in exhaustive_inputs(n) {
                let be = BlockEncoding::threshold(&input, 1).unwrap();
                let sigma = be.block_value().unwrap();
                let out = apply_qsvt(&be, &p).unwrap();
                let want = p.eval(sigma).unwrap();
                assert!((out.block_value().unwrap() - want).abs() < 1e-10);
                assert_eq!(out.queries_per_call(), p.degree() as u64);
            }
        }
    }

    #[test]
    fn qsvt_cost_law_exact() {
        let be = BlockEncoding::scalar(0.5, 3).unwrap();
        let spec = StepSpec::new(0.2, 0.125, 0.0).unwrap();
        let p = step_poly(&spec).unwrap();
        let out = apply_qsvt(&be, &p).unwrap();
        assert_eq!(out.queries_per_call(), 3 * p.degree() as u64);
    }

    fn random_orthogonal(dim: usize, rng: &mut SimRng) -> DMatrix<f64> {
        let m = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
        let qr = m.qr();
        qr.q()
    }

    #[test]
    fn qsvt_spectral_fidelity_random() {
        let mut rng = rng_from_seed(11);
        for trial in 0..30 {
            let dim = 8;
            let u = random_orthogonal(dim, &mut rng);
            let rank_l = rng.random_range(2..=6);
            let rank_r = rng.random_range(2..=6);
            let mut lmask = vec![false; dim];
            let mut rmask = vec![false; dim];
            for i in 0..rank_l {
                lmask[i] = true;
            }
            for i in 0..rank_r {
                rmask[dim - 1 - i] = true;
            }
            let be = BlockEncoding::from_parts(
                u.clone(),
                Projector::from_mask(lmask.clone()),
                Projector::from_mask(rmask.clone()),
                1,
            )
            .unwrap();

            // Random bounded polynomial of degree <= 12.
            let deg = rng.random_range(1..=12);
            let raw: Vec<f64> = (0..=deg).map(|_| rng.random_range(-1.0..1.0)).collect();
            let scale: f64 = raw.iter().map(|c| c.abs()).sum::<f64>().max(1.0);
            let p = BoundedPolynomial::from_chebyshev(raw.iter().map(|c| c / scale).collect()).unwrap();

            let out = apply_qsvt(&be, &p).unwrap();

            // Independent oracle: dense SVD of the compressed block.
            let block = DMatrix::from_fn(dim, dim, |i, j| {
                if lmask[i] && rmask[j] { u[(i, j)] } else { 0.0 }
            });
            let svd = block.clone().svd(true, true);
            let su = svd.u.unwrap();
            let vt = svd.v_t.unwrap();
            let r = rank_l.min(rank_r);
            let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
            order.sort_by(|&a, &b| {
                svd.singular_values[b].partial_cmp(&svd.singular_values[a]).unwrap()
            });
            let mut want = DMatrix::zeros(dim, dim);
            for &k in order.iter().take(r) {
                let pv = p.eval(svd.singular_values[k]).unwrap();
                let wv = su.column(k);
                let vv = vt.row(k);
                for i in 0..dim {
                    for j in 0..dim {
                        want[(i, j)] += pv * wv[i] * vv[j];
                    }
                }
            }
            let got = out.block_matrix();
            assert!(
                (got - want).abs().max() < 1e-9,
                "spectral fidelity failed on trial {trial}"
            );
        }
    }

    #[test]
    fn synthesized_unitary_is_unitary_and_embeds_block() {
        let spec = StepSpec::new(0.15, 0.125, 0.3).unwrap();
        let p = step_poly(&spec).unwrap();
        let input = OracleInput::parse("0110").unwrap();
        let be = BlockEncoding::threshold(&input, 1).unwrap();
        let out = apply_qsvt(&be, &p).unwrap();
        let u = out.unitary().unwrap();
        let dim = out.dim();
        let gram = u.transpose() * &u;
        assert!((gram - DMatrix::identity(dim, dim)).abs().max() < 1e-9);
        let block = DMatrix::from_fn(dim, dim, |i, j| {
            if out.left.mask()[i] && out.right.mask()[j] { u[(i, j)] } else { 0.0 }
        });
        assert!((block - out.block_matrix()).abs().max() < 1e-9);
    }

    #[test]
    fn sample_flag_extremes_and_concentration() {
        let mut ledger = QueryLedger::new(10).unwrap();
        let mut rng = rng_from_seed(5);

        let zero = BlockEncoding::scalar(0.0, 1).unwrap();
        let ones = zero
            .sample_flag(&basis_state(2, 0), 100, &mut ledger, &mut rng)
            .unwrap();
        assert_eq!(ones, 0);

        let one = BlockEncoding::scalar(1.0, 1).unwrap();
        let ones = one
            .sample_flag(&basis_state(2, 0), 100, &mut ledger, &mut rng)
            .unwrap();
        assert_eq!(ones, 100);

        let p_sq = 0.8f64;
        let be = BlockEncoding::scalar(p_sq.sqrt(), 1).unwrap();
        let ones = be
            .sample_flag(&basis_state(2, 0), 10_000, &mut ledger, &mut rng)
            .unwrap();
        assert!((ones as f64 / 10_000.0 - 0.8).abs() < 0.02);
        assert_eq!(ledger.summary().circuits, 100 + 100 + 10_000);
    }

    #[test]
    fn sample_flag_rejects_bad_state() {
        let be = BlockEncoding::scalar(0.5, 1).unwrap();
        let mut ledger = QueryLedger::new(4).unwrap();
        let mut rng = rng_from_seed(1);
        // |1> is outside the right projector image.
        let err = be.sample_flag(&basis_state(2, 1), 1, &mut ledger, &mut rng);
        assert!(err.is_err());
    }

    #[test]
    fn sample_flag_propagates_depth_exceeded() {
        let spec = StepSpec::new(0.1, 0.125, 0.3).unwrap();
        let p = step_poly(&spec).unwrap();
        let be = BlockEncoding::scalar(0.4, 1).unwrap();
        let out = apply_qsvt(&be, &p).unwrap();
        let mut ledger = QueryLedger::new(2).unwrap();
        let mut rng = rng_from_seed(1);
        let err = out.sample_flag(&basis_state(2, 0), 1, &mut ledger, &mut rng);
        assert!(matches!(err, Err(Error::DepthExceeded { .. })));
    }

    #[test]
    fn probability_conservation_over_constructed_encodings() {
        let spec = StepSpec::new(0.1, 0.125, 0.35).unwrap();
        let p = step_poly(&spec).unwrap();
        for input in exhaustive_inputs(8) {
            let be = BlockEncoding::threshold(&input, 1).unwrap();
            let out = apply_qsvt(&be, &p).unwrap();
            let prob = out
                .success_probability(&basis_state(out.dim(), 0))
                .unwrap();
            assert!((0.0..=1.0).contains(&prob));
        }
    }
}
