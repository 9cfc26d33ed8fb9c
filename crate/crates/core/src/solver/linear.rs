//! Sparse LU with a fill-reducing column ordering and partial pivoting.
//!
//! The symbolic analysis (COLAMD ordering, elimination structure) is done once
//! for a fixed sparsity pattern; every Newton iteration only refactors
//! numerically. All work runs sequentially so pivot order is reproducible.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::sparse::linalg::lu::{factorize_symbolic_lu, NumericLu, SymbolicLu};
use faer::sparse::linalg::LuError;
use faer::sparse::{Argsort, Pair, SparseColMat, SymbolicSparseColMat};
use faer::{Conj, MatMut, Par};

#[derive(Debug, Clone, PartialEq)]
pub enum LinearError {
    /// No pivot could be found for this original column.
    Singular { column: usize },
    /// Factorization went through but produced a non-finite entry at this
    /// position of the solution (zero numerical pivot).
    NonFinite { index: usize },
    Internal(String),
}

pub struct SparseLu {
    n: usize,
    csc: SymbolicSparseColMat<usize>,
    argsort: Argsort<usize>,
    symbolic: SymbolicLu<usize>,
    numeric: NumericLu<usize, f64>,
}

impl std::fmt::Debug for SparseLu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseLu").field("n", &self.n).finish_non_exhaustive()
    }
}

impl SparseLu {
    /// Analyses the pattern given as `(row, col)` pairs; duplicates are summed
    /// when values are supplied later.
    pub fn analyse(n: usize, pattern: &[(usize, usize)]) -> Result<Self, LinearError> {
        let pairs: Vec<Pair<usize, usize>> =
            pattern.iter().map(|&(row, col)| Pair { row, col }).collect();
        let (csc, argsort) = SymbolicSparseColMat::try_new_from_indices(n, n, &pairs)
            .map_err(|e| LinearError::Internal(format!("{e:?}")))?;
        let symbolic = factorize_symbolic_lu(csc.as_ref(), Default::default())
            .map_err(|e| LinearError::Internal(format!("{e:?}")))?;
        Ok(SparseLu { n, csc, argsort, symbolic, numeric: NumericLu::new() })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Factors the matrix whose values are listed in pattern order and
    /// overwrites `rhs` with the solution.
    pub fn solve(&mut self, values: &[f64], rhs: &mut [f64]) -> Result<(), LinearError> {
        assert_eq!(rhs.len(), self.n);
        let mat = SparseColMat::new_from_argsort(self.csc.clone(), &self.argsort, values)
            .map_err(|e| LinearError::Internal(format!("{e:?}")))?;
        let par = Par::Seq;
        let mut buf = MemBuffer::new(
            self.symbolic
                .factorize_numeric_lu_scratch::<f64>(par, Default::default())
                .or(self.symbolic.solve_in_place_scratch::<f64>(1, par)),
        );
        let stack = MemStack::new(&mut buf);
        let lu = match self.symbolic.factorize_numeric_lu(
            &mut self.numeric,
            mat.as_ref(),
            par,
            stack,
            Default::default(),
        ) {
            Ok(lu) => lu,
            Err(LuError::SymbolicSingular { index }) => {
                let (fwd, _) = self.symbolic.col_perm().arrays();
                let column = fwd.get(index).copied().unwrap_or(index);
                return Err(LinearError::Singular { column });
            }
            Err(e) => return Err(LinearError::Internal(format!("{e:?}"))),
        };
        let rhs_mat = MatMut::from_column_major_slice_mut(rhs, self.n, 1);
        lu.solve_in_place_with_conj(Conj::No, rhs_mat, par, stack);
        if let Some(index) = rhs.iter().position(|x| !x.is_finite()) {
            return Err(LinearError::NonFinite { index });
        }
        Ok(())
    }
}
