//! Small dense linear-algebra helpers shared by the solvers and the case
//! studies: a Lyapunov solver, nullspace and ones-complement bases, a
//! symmetric eigendecomposition wrapper, and a plain-text matrix format
//! for fixtures.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("matrix is not Hurwitz (max eigenvalue real part {max_re:.3e})")]
    NotHurwitz { max_re: f64 },
    #[error("matrix is not symmetric (max asymmetry {asym:.3e})")]
    NotSymmetric { asym: f64 },
    #[error("linear system is singular ({0})")]
    Singular(&'static str),
    #[error("bad matrix text: {0}")]
    BadMatrixText(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Largest real part over the spectrum of a square matrix.
pub fn spectral_abscissa(a: &DMatrix<f64>) -> f64 {
    a.complex_eigenvalues()
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Solves the continuous Lyapunov equation `A X + X Aᵀ + Q = 0` for
/// Hurwitz `A` by vectorization: `(I ⊗ A + A ⊗ I) vec(X) = -vec(Q)`.
///
/// The Kronecker system is dense, so this is meant for the reduced state
/// dimensions that appear here (tens, not thousands). The result is
/// symmetrized before returning; `Q` is expected symmetric.
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>, NumericsError> {
    let n = a.nrows();
    assert_eq!(a.ncols(), n, "A must be square");
    assert_eq!((q.nrows(), q.ncols()), (n, n), "Q must match A");

    let max_re = spectral_abscissa(a);
    if max_re >= 0.0 {
        return Err(NumericsError::NotHurwitz { max_re });
    }

    let eye = DMatrix::<f64>::identity(n, n);
    let m = eye.kronecker(a) + a.kronecker(&eye);
    let rhs = DVector::from_column_slice(q.as_slice()).scale(-1.0);
    let v = m
        .lu()
        .solve(&rhs)
        .ok_or(NumericsError::Singular("Kronecker Lyapunov system"))?;
    let x = DMatrix::from_column_slice(n, n, v.as_slice());
    Ok((&x + x.transpose()) * 0.5)
}

/// Orthonormal basis for the nullspace of `m`, one column per basis vector.
///
/// Computed from the eigendecomposition of the Gram matrix `mᵀm`: eigenvectors
/// whose eigenvalue is below `1e-10 * max(1, λ_max)` span the nullspace. This
/// handles wide matrices, where a thin SVD would not expose the kernel.
pub fn nullspace_basis(m: &DMatrix<f64>) -> DMatrix<f64> {
    let cols = m.ncols();
    if cols == 0 {
        return DMatrix::zeros(0, 0);
    }
    let gram = m.transpose() * m;
    let eig = symmetric_eigs(&gram).expect("Gram matrix is symmetric by construction");
    let lam_max = eig.values.last().copied().unwrap_or(0.0);
    let tol = 1e-10 * lam_max.max(1.0);
    let null_cols: Vec<usize> = (0..cols).filter(|&i| eig.values[i] <= tol).collect();
    let mut basis = DMatrix::zeros(cols, null_cols.len());
    for (k, &i) in null_cols.iter().enumerate() {
        basis.set_column(k, &eig.vectors.column(i));
    }
    basis
}

/// An `n x (n-1)` matrix `V` with orthonormal columns orthogonal to the ones
/// vector: `Vᵀ1 = 0`, `VᵀV = I`.
///
/// Built from the Householder reflection exchanging `e₁` and `1/√n`; columns
/// 2..n of that reflection are the basis.
pub fn ones_complement(n: usize) -> DMatrix<f64> {
    assert!(n >= 2, "need at least two nodes");
    let ones_unit = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut w = -ones_unit;
    w[0] += 1.0;
    let w = w.normalize();
    let h = DMatrix::identity(n, n) - 2.0 * &w * w.transpose();
    h.columns(1, n - 1).into_owned()
}

/// Eigendecomposition of a symmetric matrix, eigenvalues ascending.
pub struct SymmetricEigs {
    pub values: Vec<f64>,
    /// Column `i` is the unit eigenvector for `values[i]`.
    pub vectors: DMatrix<f64>,
}

/// Wraps the symmetric eigensolver with a symmetry check and an ascending
/// sort. Asymmetry beyond `1e-10 * (1 + max |entry|)` is an error rather
/// than silently symmetrized.
pub fn symmetric_eigs(s: &DMatrix<f64>) -> Result<SymmetricEigs, NumericsError> {
    let n = s.nrows();
    assert_eq!(s.ncols(), n, "matrix must be square");
    let scale = 1.0 + s.amax();
    let asym = (s - s.transpose()).amax();
    if asym > 1e-10 * scale {
        return Err(NumericsError::NotSymmetric { asym });
    }
    let sym = (s + s.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &eig.eigenvectors.column(i));
    }
    Ok(SymmetricEigs { values, vectors })
}

/// Reads a matrix in the fixture text format: a header line `rows cols`
/// followed by `rows*cols` whitespace-separated entries in row-major order
/// (line breaks are not significant after the header).
pub fn read_matrix_text<R: BufRead>(reader: R) -> Result<DMatrix<f64>, NumericsError> {
    let mut tokens = Vec::new();
    for line in reader.lines() {
        let line = line?;
        tokens.extend(line.split_whitespace().map(str::to_owned));
    }
    if tokens.len() < 2 {
        return Err(NumericsError::BadMatrixText("missing 'rows cols' header".into()));
    }
    let rows: usize = tokens[0]
        .parse()
        .map_err(|_| NumericsError::BadMatrixText(format!("bad row count '{}'", tokens[0])))?;
    let cols: usize = tokens[1]
        .parse()
        .map_err(|_| NumericsError::BadMatrixText(format!("bad column count '{}'", tokens[1])))?;
    let body = &tokens[2..];
    if body.len() != rows * cols {
        return Err(NumericsError::BadMatrixText(format!(
            "expected {} entries for a {}x{} matrix, found {}",
            rows * cols,
            rows,
            cols,
            body.len()
        )));
    }
    let mut entries = Vec::with_capacity(rows * cols);
    for t in body {
        entries.push(
            t.parse::<f64>()
                .map_err(|_| NumericsError::BadMatrixText(format!("bad entry '{t}'")))?,
        );
    }
    Ok(DMatrix::from_row_slice(rows, cols, &entries))
}

/// Writes a matrix in the fixture text format. Entries use the shortest
/// representation that round-trips through `f64` parsing.
pub fn write_matrix_text<W: Write>(m: &DMatrix<f64>, mut writer: W) -> std::io::Result<()> {
    writeln!(writer, "{} {}", m.nrows(), m.ncols())?;
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{}", m[(i, j)])).collect();
        writeln!(writer, "{}", row.join(" "))?;
    }
    Ok(())
}
