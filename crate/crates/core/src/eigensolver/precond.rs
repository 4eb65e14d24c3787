use std::sync::Once;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};

use super::problem::QuotientProblem;
use super::SolverError;

static SEQUENTIAL: Once = Once::new();

/// Sparse Cholesky factor of the linearized operator, reusing the symbolic
/// analysis across refreshes.
pub(crate) struct Preconditioner {
    symbolic: Option<SymbolicLlt<usize>>,
    factor: Option<Llt<usize, f64>>,
    triplets: Vec<Triplet<usize, usize, f64>>,
    n: usize,
}

impl Preconditioner {
    pub(crate) fn new(n: usize) -> Self {
        SEQUENTIAL.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
        Self { symbolic: None, factor: None, triplets: Vec::new(), n }
    }

    /// Factor `K_w - alpha B_w + shift M_w` at `u`. Returns `false` when the
    /// matrix is not numerically positive definite.
    pub(crate) fn refresh<P: QuotientProblem + ?Sized>(
        &mut self,
        problem: &P,
        u: &[f64],
        shift: f64,
    ) -> Result<bool, SolverError> {
        problem.preconditioner(u, shift, &mut self.triplets);
        let matrix = SparseColMat::<usize, f64>::try_new_from_triplets(self.n, self.n, &self.triplets)
            .map_err(|e| SolverError::Factorization(format!("{e:?}")))?;
        if self.symbolic.is_none() {
            let sym = SymbolicLlt::try_new(matrix.symbolic(), Side::Lower)
                .map_err(|e| SolverError::Factorization(format!("{e:?}")))?;
            self.symbolic = Some(sym);
        }
        let sym = self.symbolic.clone().unwrap();
        match Llt::try_new_with_symbolic(sym, matrix.as_ref(), Side::Lower) {
            Ok(llt) => {
                self.factor = Some(llt);
                Ok(true)
            }
            Err(_) => {
                self.factor = None;
                Ok(false)
            }
        }
    }

    /// `out = P^{-1} r`; identity when no factor is available.
    pub(crate) fn apply(&self, r: &[f64], out: &mut [f64]) {
        match &self.factor {
            Some(llt) => {
                let mut b = Mat::<f64>::from_fn(self.n, 1, |i, _| r[i]);
                llt.solve_in_place(b.as_mut());
                for (i, o) in out.iter_mut().enumerate() {
                    *o = b[(i, 0)];
                }
            }
            None => out.copy_from_slice(r),
        }
    }
}
