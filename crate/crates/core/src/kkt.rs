//! Direct solver for saddle-point systems
//!
//! ```text
//! [ H  Cᵀ ] [ x ]   [ r₁ ]
//! [ C  0  ] [ p ] + [ r₂ ] = 0
//! ```
//!
//! The matrix is factored as `L D Lᵀ` with `L` unit block lower bidiagonal
//! and `D` block diagonal, with respect to a caller-supplied partition of the
//! unknowns under which the matrix is block tridiagonal. Each pivot block is
//! inverted through its symmetric eigendecomposition, which also gives the
//! inertia of the whole matrix (Haynsworth additivity). Without a partition
//! the whole matrix is a single dense block.
//!
//! `H` is positive definite on `ker C` and `C` has full row rank exactly when
//! the inertia is `(d, m, 0)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use nalgebra_sparse::{CooMatrix, CsrMatrix};
use thiserror::Error;

/// Pivot eigenvalues below this fraction of the largest matrix entry count as zero.
pub const PIVOT_TOL: f64 = 1e-12;

const MAX_REFINEMENT_STEPS: usize = 3;
const MAX_DOUBLINGS: u32 = 60;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KktError {
    #[error("constraint Jacobian is rank deficient (singular saddle-point matrix)")]
    RankDeficient,
    #[error(
        "Hessian is not positive definite on ker C: inertia ({positive}, {negative}, {zero}), \
         expected ({expected_positive}, {expected_negative}, 0)"
    )]
    IndefiniteOnKernel {
        positive: usize,
        negative: usize,
        zero: usize,
        expected_positive: usize,
        expected_negative: usize,
    },
    #[error("Hessian regularization did not certify convexity on ker C after {0} doublings")]
    UnboundedRegularization(u32),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix H is not symmetric (relative asymmetry {0:e})")]
    NotSymmetric(f64),
}

/// Number of positive, negative and zero eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Inertia {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

/// Grouping of the `d + m` saddle-point unknowns into consecutive pivot
/// blocks. Unknown `i < d` is primal, `d + j` is the multiplier of row `j`
/// of `C`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KktPartition {
    blocks: Vec<Vec<usize>>,
}

impl KktPartition {
    pub fn single(size: usize) -> Self {
        Self {
            blocks: vec![(0..size).collect()],
        }
    }

    /// Panics unless the blocks cover `0..size` exactly once.
    pub fn new(blocks: Vec<Vec<usize>>, size: usize) -> Self {
        let mut seen = vec![false; size];
        for &i in blocks.iter().flatten() {
            assert!(
                i < size && !seen[i],
                "partition index {i} out of range or repeated"
            );
            seen[i] = true;
        }
        assert!(
            seen.iter().all(|&s| s),
            "partition does not cover all unknowns"
        );
        Self { blocks }
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    /// Flattened ordering of the unknowns.
    pub fn ordering(&self) -> Vec<usize> {
        self.blocks.iter().flatten().copied().collect()
    }
}

/// The data of one saddle-point solve.
#[derive(Debug, Clone)]
pub struct SaddlePointSystem {
    pub h: CsrMatrix<f64>,
    pub c: CsrMatrix<f64>,
    pub r1: DVector<f64>,
    pub r2: DVector<f64>,
    pub partition: Option<KktPartition>,
}

impl SaddlePointSystem {
    pub fn new(
        h: CsrMatrix<f64>,
        c: CsrMatrix<f64>,
        r1: DVector<f64>,
        r2: DVector<f64>,
    ) -> Result<Self, KktError> {
        check_dims(&h, &c)?;
        if r1.len() != h.nrows() || r2.len() != c.nrows() {
            return Err(KktError::DimensionMismatch(format!(
                "rhs lengths ({}, {}) for a {}+{} system",
                r1.len(),
                r2.len(),
                h.nrows(),
                c.nrows()
            )));
        }
        Ok(Self {
            h,
            c,
            r1,
            r2,
            partition: None,
        })
    }

    pub fn from_dense(
        h: &DMatrix<f64>,
        c: &DMatrix<f64>,
        r1: DVector<f64>,
        r2: DVector<f64>,
    ) -> Result<Self, KktError> {
        Self::new(dense_to_csr(h), dense_to_csr(c), r1, r2)
    }

    pub fn with_partition(mut self, partition: KktPartition) -> Self {
        self.partition = Some(partition);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KktSolution {
    pub step: DVector<f64>,
    pub multiplier: DVector<f64>,
    /// ∞-norm of `K z + r` after refinement.
    pub residual_norm: f64,
}

fn check_dims(h: &CsrMatrix<f64>, c: &CsrMatrix<f64>) -> Result<(), KktError> {
    if h.nrows() != h.ncols() {
        return Err(KktError::DimensionMismatch(format!(
            "H is {}x{}",
            h.nrows(),
            h.ncols()
        )));
    }
    if c.ncols() != h.nrows() {
        return Err(KktError::DimensionMismatch(format!(
            "C has {} columns, H has {} rows",
            c.ncols(),
            h.nrows()
        )));
    }
    let scale = max_abs(h).max(f64::MIN_POSITIVE);
    let mut asym: f64 = 0.0;
    let ht = h.transpose();
    for ((i, j, a), (i2, j2, b)) in h.triplet_iter().zip(ht.triplet_iter()) {
        if i == i2 && j == j2 {
            asym = asym.max((a - b).abs());
        } else {
            // differing sparsity patterns; fall back to a lookup
            asym = asym.max(symmetric_defect(h));
            break;
        }
    }
    if asym > 1e-12 * scale {
        return Err(KktError::NotSymmetric(asym / scale));
    }
    Ok(())
}

fn symmetric_defect(h: &CsrMatrix<f64>) -> f64 {
    let d = DMatrix::from(h);
    (&d - d.transpose()).amax()
}

pub fn dense_to_csr(m: &DMatrix<f64>) -> CsrMatrix<f64> {
    let mut coo = CooMatrix::new(m.nrows(), m.ncols());
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if m[(i, j)] != 0.0 {
                coo.push(i, j, m[(i, j)]);
            }
        }
    }
    CsrMatrix::from(&coo)
}

pub fn identity_csr(n: usize) -> CsrMatrix<f64> {
    CsrMatrix::identity(n)
}

fn max_abs(m: &CsrMatrix<f64>) -> f64 {
    m.values().iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// `A x` for a CSR matrix.
pub fn csr_mul(a: &CsrMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(a.nrows());
    for (i, row) in a.row_iter().enumerate() {
        out[i] = row
            .col_indices()
            .iter()
            .zip(row.values())
            .map(|(&j, v)| v * x[j])
            .sum();
    }
    out
}

/// `Aᵀ y` for a CSR matrix.
pub fn csr_tr_mul(a: &CsrMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(a.ncols());
    for (i, row) in a.row_iter().enumerate() {
        let yi = y[i];
        if yi == 0.0 {
            continue;
        }
        for (&j, v) in row.col_indices().iter().zip(row.values()) {
            out[j] += v * yi;
        }
    }
    out
}

/// `H + shift·I`.
pub fn shift_diagonal(h: &CsrMatrix<f64>, shift: f64) -> CsrMatrix<f64> {
    if shift == 0.0 {
        return h.clone();
    }
    let mut coo = CooMatrix::new(h.nrows(), h.ncols());
    for (i, j, v) in h.triplet_iter() {
        coo.push(i, j, *v);
    }
    for i in 0..h.nrows() {
        coo.push(i, i, shift);
    }
    CsrMatrix::from(&coo)
}

/// Block `L D Lᵀ` factorization of a saddle-point matrix.
#[derive(Debug, Clone)]
pub struct SaddlePointFactorization {
    h: CsrMatrix<f64>,
    c: CsrMatrix<f64>,
    blocks: Vec<Vec<usize>>,
    /// `D_k⁻¹`
    pivot_inverses: Vec<DMatrix<f64>>,
    /// `L_{k+1,k}`
    lower: Vec<DMatrix<f64>>,
    inertia: Inertia,
}

impl SaddlePointFactorization {
    /// Factors `[H Cᵀ; C 0]` and certifies the inertia `(d, m, 0)`.
    pub fn factor(
        h: &CsrMatrix<f64>,
        c: &CsrMatrix<f64>,
        partition: Option<&KktPartition>,
    ) -> Result<Self, KktError> {
        check_dims(h, c)?;
        let d = h.nrows();
        let m = c.nrows();
        let size = d + m;
        let blocks = match partition {
            Some(p) if p.blocks.iter().map(Vec::len).sum::<usize>() == size => p.blocks.clone(),
            Some(_) => {
                return Err(KktError::DimensionMismatch(
                    "partition does not match system size".into(),
                ))
            }
            None => KktPartition::single(size).blocks,
        };
        let blocks = match assemble_blocks(h, c, &blocks) {
            Some(assembled) => return Self::factor_assembled(h, c, blocks, assembled),
            // couplings beyond neighbouring blocks: treat as dense
            None => KktPartition::single(size).blocks,
        };
        let assembled = assemble_blocks(h, c, &blocks).expect("single block always assembles");
        Self::factor_assembled(h, c, blocks, assembled)
    }

    fn factor_assembled(
        h: &CsrMatrix<f64>,
        c: &CsrMatrix<f64>,
        blocks: Vec<Vec<usize>>,
        (diag, sub): (Vec<DMatrix<f64>>, Vec<DMatrix<f64>>),
    ) -> Result<Self, KktError> {
        let d = h.nrows();
        let m = c.nrows();
        let scale = max_abs(h).max(max_abs(c)).max(1.0);
        let tol = PIVOT_TOL * scale;

        let mut inertia = Inertia::default();
        let mut multipliers_seen = 0;
        let mut pivot_inverses = Vec::with_capacity(blocks.len());
        let mut lower = Vec::with_capacity(sub.len());
        let mut pivot = diag[0].clone();
        for k in 0..blocks.len() {
            multipliers_seen += blocks[k].iter().filter(|&&i| i >= d).count();
            let eig = SymmetricEigen::new(pivot.clone());
            let mut zero = 0;
            for &lambda in eig.eigenvalues.iter() {
                if lambda.abs() <= tol {
                    zero += 1;
                } else if lambda > 0.0 {
                    inertia.positive += 1;
                } else {
                    inertia.negative += 1;
                }
            }
            if zero > 0 {
                inertia.zero += zero;
                // negative count below the number of multipliers points at C
                return Err(if inertia.negative < multipliers_seen {
                    KktError::RankDeficient
                } else {
                    KktError::IndefiniteOnKernel {
                        positive: inertia.positive,
                        negative: inertia.negative,
                        zero: inertia.zero,
                        expected_positive: d,
                        expected_negative: m,
                    }
                });
            }
            let inv_vals = eig.eigenvalues.map(|l| 1.0 / l);
            let inv = &eig.eigenvectors
                * DMatrix::from_diagonal(&inv_vals)
                * eig.eigenvectors.transpose();
            if k + 1 < blocks.len() {
                let l = &sub[k] * &inv;
                pivot = &diag[k + 1] - &l * sub[k].transpose();
                lower.push(l);
            }
            pivot_inverses.push(inv);
        }
        if inertia.positive != d || inertia.negative != m {
            return Err(KktError::IndefiniteOnKernel {
                positive: inertia.positive,
                negative: inertia.negative,
                zero: 0,
                expected_positive: d,
                expected_negative: m,
            });
        }
        Ok(Self {
            h: h.clone(),
            c: c.clone(),
            blocks,
            pivot_inverses,
            lower,
            inertia,
        })
    }

    pub fn inertia(&self) -> Inertia {
        self.inertia
    }

    pub fn primal_dim(&self) -> usize {
        self.h.nrows()
    }

    pub fn constraint_dim(&self) -> usize {
        self.c.nrows()
    }

    pub fn hessian(&self) -> &CsrMatrix<f64> {
        &self.h
    }

    pub fn jacobian(&self) -> &CsrMatrix<f64> {
        &self.c
    }

    fn apply(&self, z: &DVector<f64>) -> DVector<f64> {
        let d = self.primal_dim();
        let x = z.rows(0, d).into_owned();
        let p = z.rows(d, self.constraint_dim()).into_owned();
        let top = csr_mul(&self.h, &x) + csr_tr_mul(&self.c, &p);
        let bottom = csr_mul(&self.c, &x);
        let mut out = DVector::zeros(z.len());
        out.rows_mut(0, d).copy_from(&top);
        out.rows_mut(d, bottom.len()).copy_from(&bottom);
        out
    }

    /// `K⁻¹ b` through the factors.
    fn back_substitute(&self, b: &DVector<f64>) -> DVector<f64> {
        let nb = self.blocks.len();
        let gather = |k: usize, v: &DVector<f64>| {
            DVector::from_iterator(self.blocks[k].len(), self.blocks[k].iter().map(|&i| v[i]))
        };
        let mut w: Vec<DVector<f64>> = Vec::with_capacity(nb);
        w.push(gather(0, b));
        for k in 1..nb {
            let next = gather(k, b) - &self.lower[k - 1] * &w[k - 1];
            w.push(next);
        }
        let mut z: Vec<DVector<f64>> = w
            .iter()
            .zip(&self.pivot_inverses)
            .map(|(wk, inv)| inv * wk)
            .collect();
        for k in (0..nb - 1).rev() {
            let correction = self.lower[k].tr_mul(&z[k + 1]);
            z[k] -= correction;
        }
        let mut out = DVector::zeros(b.len());
        for (k, zk) in z.iter().enumerate() {
            for (&i, v) in self.blocks[k].iter().zip(zk.iter()) {
                out[i] = *v;
            }
        }
        out
    }

    /// Solves `K [x; p] + [r₁; r₂] = 0` with iterative refinement.
    pub fn solve(&self, r1: &DVector<f64>, r2: &DVector<f64>) -> KktSolution {
        let d = self.primal_dim();
        let m = self.constraint_dim();
        assert_eq!(r1.len(), d, "r1 length");
        assert_eq!(r2.len(), m, "r2 length");
        let mut b = DVector::zeros(d + m);
        b.rows_mut(0, d).copy_from(&(-r1));
        b.rows_mut(d, m).copy_from(&(-r2));

        let mut z = self.back_substitute(&b);
        let mut residual = &b - self.apply(&z);
        let target = 4.0 * f64::EPSILON * (b.amax() + z.amax()).max(f64::MIN_POSITIVE);
        for _ in 0..MAX_REFINEMENT_STEPS {
            if residual.amax() <= target {
                break;
            }
            z += self.back_substitute(&residual);
            residual = &b - self.apply(&z);
        }
        KktSolution {
            step: z.rows(0, d).into_owned(),
            multiplier: z.rows(d, m).into_owned(),
            residual_norm: residual.amax(),
        }
    }

    /// Full normal step `Δn = −C⁻c₀` when this factors the metric system.
    pub fn normal_step(&self, c0: &DVector<f64>) -> DVector<f64> {
        self.solve(&DVector::zeros(self.primal_dim()), c0).step
    }

    /// Projected gradient `v` and multiplier estimate `p` for the covector `f′`.
    pub fn lagrange_multiplier(&self, fprime: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let sol = self.solve(fprime, &DVector::zeros(self.constraint_dim()));
        (sol.step, sol.multiplier)
    }

    /// Tangential step `Δt ∈ ker C` and its multiplier for the given rhs covector.
    pub fn tangential_step(&self, rhs: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let sol = self.solve(rhs, &DVector::zeros(self.constraint_dim()));
        (sol.step, sol.multiplier)
    }
}

type AssembledBlocks = (Vec<DMatrix<f64>>, Vec<DMatrix<f64>>);

/// Dense diagonal blocks `K_kk` and subdiagonal blocks `K_{k+1,k}`, or `None`
/// when the matrix is not block tridiagonal under `blocks`.
fn assemble_blocks(
    h: &CsrMatrix<f64>,
    c: &CsrMatrix<f64>,
    blocks: &[Vec<usize>],
) -> Option<AssembledBlocks> {
    let d = h.nrows();
    let size = d + c.nrows();
    let mut owner = vec![(0usize, 0usize); size];
    for (k, block) in blocks.iter().enumerate() {
        for (local, &i) in block.iter().enumerate() {
            owner[i] = (k, local);
        }
    }
    let mut diag: Vec<DMatrix<f64>> = blocks
        .iter()
        .map(|b| DMatrix::zeros(b.len(), b.len()))
        .collect();
    let mut sub: Vec<DMatrix<f64>> = blocks
        .windows(2)
        .map(|w| DMatrix::zeros(w[1].len(), w[0].len()))
        .collect();

    let mut place = |row: usize, col: usize, v: f64, mirror: bool| -> bool {
        let (br, lr) = owner[row];
        let (bc, lc) = owner[col];
        if br == bc {
            diag[br][(lr, lc)] += v;
            if mirror {
                diag[br][(lc, lr)] += v;
            }
        } else if br == bc + 1 {
            sub[bc][(lr, lc)] += v;
        } else if bc == br + 1 {
            if mirror {
                sub[br][(lc, lr)] += v;
            }
        } else {
            return false;
        }
        true
    };
    for (i, j, v) in h.triplet_iter() {
        if !place(i, j, *v, false) {
            return None;
        }
    }
    for (r, j, v) in c.triplet_iter() {
        if !place(d + r, j, *v, true) {
            return None;
        }
    }
    Some((diag, sub))
}

/// One-shot solve of a saddle-point system.
pub fn solve_saddle(sys: &SaddlePointSystem) -> Result<KktSolution, KktError> {
    let fact = SaddlePointFactorization::factor(&sys.h, &sys.c, sys.partition.as_ref())?;
    Ok(fact.solve(&sys.r1, &sys.r2))
}

/// Minimal-norm solution of `C w + c₀ = 0` in the metric `metric`.
pub fn normal_step(
    c: &CsrMatrix<f64>,
    metric: &CsrMatrix<f64>,
    c0: &DVector<f64>,
) -> Result<DVector<f64>, KktError> {
    Ok(SaddlePointFactorization::factor(metric, c, None)?.normal_step(c0))
}

/// Multiplier estimate `p = −f′C⁻` together with the projected gradient `v`.
pub fn lagrange_multiplier(
    c: &CsrMatrix<f64>,
    metric: &CsrMatrix<f64>,
    fprime: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>), KktError> {
    Ok(SaddlePointFactorization::factor(metric, c, None)?.lagrange_multiplier(fprime))
}

/// Minimizer of `rhs·δt + ½ H(δt, δt)` over `ker C`, with its multiplier.
pub fn tangential_step(
    h_lag: &CsrMatrix<f64>,
    c: &CsrMatrix<f64>,
    rhs: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>), KktError> {
    Ok(SaddlePointFactorization::factor(h_lag, c, None)?.tangential_step(rhs))
}

/// Result of [`hessian_regularize`].
#[derive(Debug, Clone)]
pub struct RegularizedHessian {
    pub hessian: CsrMatrix<f64>,
    pub shift: f64,
    pub factorization: SaddlePointFactorization,
}

/// `H + λI` for the smallest `λ ∈ {0, λ₀, 2λ₀, 4λ₀, …}` whose saddle-point
/// inertia certifies positive definiteness on `ker C`, with
/// `λ₀ = 1e-8·(1 + max|H_ij|)`.
pub fn hessian_regularize(
    h_lag: &CsrMatrix<f64>,
    c: &CsrMatrix<f64>,
    partition: Option<&KktPartition>,
) -> Result<RegularizedHessian, KktError> {
    match SaddlePointFactorization::factor(h_lag, c, partition) {
        Ok(factorization) => {
            return Ok(RegularizedHessian {
                hessian: h_lag.clone(),
                shift: 0.0,
                factorization,
            })
        }
        Err(KktError::IndefiniteOnKernel { .. }) => {}
        Err(e) => return Err(e),
    }
    let base = 1e-8 * (1.0 + max_abs(h_lag));
    for k in 0..=MAX_DOUBLINGS {
        let shift = base * 2f64.powi(k as i32);
        let hessian = shift_diagonal(h_lag, shift);
        match SaddlePointFactorization::factor(&hessian, c, partition) {
            Ok(factorization) => {
                return Ok(RegularizedHessian {
                    hessian,
                    shift,
                    factorization,
                })
            }
            Err(KktError::IndefiniteOnKernel { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(KktError::UnboundedRegularization(MAX_DOUBLINGS))
}
