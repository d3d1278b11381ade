//! Thin safe wrappers over the dense LAPACK routines this crate relies on:
//! symmetric eigendecomposition (full spectrum and contiguous index ranges),
//! LU solves with a condition estimate, and rank-revealing least squares.
//!
//! All wrappers are deterministic given their inputs. Symmetric matrices are
//! passed to LAPACK without transposition (a symmetric buffer reads the same
//! in row- and column-major order); general matrices are handled in
//! transposed form with the transposition folded into the routine arguments.

use ndarray::{Array1, Array2, ArrayView2, ShapeBuilder};

use crate::error::{Error, Result};

#[link(name = "openblas")]
extern "C" {
    fn dsyevd_(
        jobz: *const u8,
        uplo: *const u8,
        n: *const i32,
        a: *mut f64,
        lda: *const i32,
        w: *mut f64,
        work: *mut f64,
        lwork: *const i32,
        iwork: *mut i32,
        liwork: *const i32,
        info: *mut i32,
    );
    fn dsyevr_(
        jobz: *const u8,
        range: *const u8,
        uplo: *const u8,
        n: *const i32,
        a: *mut f64,
        lda: *const i32,
        vl: *const f64,
        vu: *const f64,
        il: *const i32,
        iu: *const i32,
        abstol: *const f64,
        m: *mut i32,
        w: *mut f64,
        z: *mut f64,
        ldz: *const i32,
        isuppz: *mut i32,
        work: *mut f64,
        lwork: *const i32,
        iwork: *mut i32,
        liwork: *const i32,
        info: *mut i32,
    );
    fn dgetrf_(
        m: *const i32,
        n: *const i32,
        a: *mut f64,
        lda: *const i32,
        ipiv: *mut i32,
        info: *mut i32,
    );
    fn dgecon_(
        norm: *const u8,
        n: *const i32,
        a: *const f64,
        lda: *const i32,
        anorm: *const f64,
        rcond: *mut f64,
        work: *mut f64,
        iwork: *mut i32,
        info: *mut i32,
    );
    fn dgetrs_(
        trans: *const u8,
        n: *const i32,
        nrhs: *const i32,
        a: *const f64,
        lda: *const i32,
        ipiv: *const i32,
        b: *mut f64,
        ldb: *const i32,
        info: *mut i32,
    );
    fn dgelsy_(
        m: *const i32,
        n: *const i32,
        nrhs: *const i32,
        a: *mut f64,
        lda: *const i32,
        b: *mut f64,
        ldb: *const i32,
        jpvt: *mut i32,
        rcond: *const f64,
        rank: *mut i32,
        work: *mut f64,
        lwork: *const i32,
        info: *mut i32,
    );
    fn openblas_set_num_threads(num_threads: i32);
}

/// Pin the BLAS thread pool size. Experiments call this with 1 so that
/// results do not depend on the host's core count and replicate-level
/// parallelism is not oversubscribed.
pub fn set_blas_threads(n: usize) {
    unsafe { openblas_set_num_threads(n.max(1) as i32) }
}

fn check_square(a: &ArrayView2<f64>, routine: &'static str) -> Result<i32> {
    let (r, c) = a.dim();
    if r != c {
        return Err(Error::Parameter(format!(
            "{routine} needs a square matrix, got {r}x{c}"
        )));
    }
    i32::try_from(r).map_err(|_| Error::Parameter(format!("{routine}: dimension {r} too large")))
}

fn lapack_err(routine: &'static str, info: i32) -> Error {
    Error::Lapack { routine, info }
}

/// Full symmetric eigendecomposition. Returns eigenvalues in ascending order
/// and the matching orthonormal eigenvectors as the columns of the second
/// output.
pub fn eigh_full(a: ArrayView2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = check_square(&a, "eigh_full")?;
    if n == 0 {
        return Err(Error::Parameter("eigh_full: empty matrix".into()));
    }
    // dsyevd overwrites its input with the eigenvectors (column-major). A
    // symmetric buffer is layout-agnostic, so the row-major data can be
    // handed over directly.
    let mut buf: Vec<f64> = a.iter().copied().collect();
    let mut w = vec![0.0f64; n as usize];
    let (jobz, uplo) = (b'V', b'L');
    let mut info = 0i32;

    // Workspace query, then the real call.
    let (mut wkopt, mut iwkopt) = (0.0f64, 0i32);
    let query = -1i32;
    unsafe {
        dsyevd_(
            &jobz, &uplo, &n, buf.as_mut_ptr(), &n, w.as_mut_ptr(), &mut wkopt, &query,
            &mut iwkopt, &query, &mut info,
        );
    }
    if info != 0 {
        return Err(lapack_err("dsyevd (workspace query)", info));
    }
    let lwork = wkopt as i32;
    let liwork = iwkopt;
    let mut work = vec![0.0f64; lwork as usize];
    let mut iwork = vec![0i32; liwork as usize];
    unsafe {
        dsyevd_(
            &jobz, &uplo, &n, buf.as_mut_ptr(), &n, w.as_mut_ptr(), work.as_mut_ptr(), &lwork,
            iwork.as_mut_ptr(), &liwork, &mut info,
        );
    }
    if info != 0 {
        return Err(lapack_err("dsyevd", info));
    }
    let nn = n as usize;
    // `buf` now holds eigenvectors column-major; column r is eigenvector r.
    let vecs = Array2::from_shape_vec((nn, nn).f(), buf)
        .expect("dsyevd output has the queried shape")
        .as_standard_layout()
        .to_owned();
    Ok((Array1::from_vec(w), vecs))
}

/// Eigenpairs `lo..=hi` (0-based positions in the ascending eigenvalue order)
/// of a symmetric matrix, without computing the rest of the spectrum. Much
/// faster than [`eigh_full`] when only a few extreme pairs are needed.
pub fn eigh_range(a: ArrayView2<f64>, lo: usize, hi: usize) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = check_square(&a, "eigh_range")?;
    let nn = n as usize;
    if lo > hi || hi >= nn {
        return Err(Error::Parameter(format!(
            "eigh_range: invalid index range {lo}..={hi} for dimension {nn}"
        )));
    }
    let mut buf: Vec<f64> = a.iter().copied().collect();
    let m_req = hi - lo + 1;
    let (jobz, range, uplo) = (b'V', b'I', b'L');
    let (vl, vu, abstol) = (0.0f64, 0.0f64, 0.0f64);
    // LAPACK index ranges are 1-based and inclusive.
    let il = (lo + 1) as i32;
    let iu = (hi + 1) as i32;
    let mut m = 0i32;
    let mut w = vec![0.0f64; nn];
    let mut z = vec![0.0f64; nn * m_req];
    let mut isuppz = vec![0i32; 2 * m_req.max(1)];
    let mut info = 0i32;

    let (mut wkopt, mut iwkopt) = (0.0f64, 0i32);
    let query = -1i32;
    unsafe {
        dsyevr_(
            &jobz, &range, &uplo, &n, buf.as_mut_ptr(), &n, &vl, &vu, &il, &iu, &abstol, &mut m,
            w.as_mut_ptr(), z.as_mut_ptr(), &n, isuppz.as_mut_ptr(), &mut wkopt, &query,
            &mut iwkopt, &query, &mut info,
        );
    }
    if info != 0 {
        return Err(lapack_err("dsyevr (workspace query)", info));
    }
    let lwork = wkopt as i32;
    let liwork = iwkopt;
    let mut work = vec![0.0f64; lwork as usize];
    let mut iwork = vec![0i32; liwork as usize];
    unsafe {
        dsyevr_(
            &jobz, &range, &uplo, &n, buf.as_mut_ptr(), &n, &vl, &vu, &il, &iu, &abstol, &mut m,
            w.as_mut_ptr(), z.as_mut_ptr(), &n, isuppz.as_mut_ptr(), work.as_mut_ptr(), &lwork,
            iwork.as_mut_ptr(), &liwork, &mut info,
        );
    }
    if info != 0 {
        return Err(lapack_err("dsyevr", info));
    }
    if m as usize != m_req {
        return Err(lapack_err("dsyevr (eigenpair count)", m));
    }
    w.truncate(m_req);
    let vecs = Array2::from_shape_vec((nn, m_req).f(), z)
        .expect("dsyevr output has the queried shape")
        .as_standard_layout()
        .to_owned();
    Ok((Array1::from_vec(w), vecs))
}

/// Solution of `A x = b` by LU with partial pivoting, together with a 1-norm
/// condition estimate of the system. Errors if the factorization detects
/// singularity or the condition estimate exceeds `cond_limit`.
pub fn lu_solve(a: ArrayView2<f64>, b: &[f64], cond_limit: f64) -> Result<Vec<f64>> {
    let n = check_square(&a, "lu_solve")?;
    let nn = n as usize;
    if b.len() != nn {
        return Err(Error::Parameter(format!(
            "lu_solve: rhs length {} does not match dimension {nn}",
            b.len()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) || b.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parameter("lu_solve: non-finite input".into()));
    }
    // The row-major buffer reads column-major as Aᵀ; factor that and solve
    // with trans='T'. The condition number is norm-convention-symmetric:
    // ‖Aᵀ‖₁ = ‖A‖∞, so the estimate below is cond_∞(A).
    let mut lu: Vec<f64> = a.iter().copied().collect();
    let anorm = (0..nn)
        .map(|i| a.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0f64, f64::max);
    let mut ipiv = vec![0i32; nn];
    let mut info = 0i32;
    unsafe { dgetrf_(&n, &n, lu.as_mut_ptr(), &n, ipiv.as_mut_ptr(), &mut info) }
    if info > 0 {
        return Err(Error::Solve(format!(
            "matrix is singular (zero pivot at position {info})"
        )));
    }
    if info < 0 {
        return Err(lapack_err("dgetrf", info));
    }

    let mut rcond = 0.0f64;
    let mut work = vec![0.0f64; 4 * nn];
    let mut iwork = vec![0i32; nn];
    let norm = b'1';
    unsafe {
        dgecon_(
            &norm, &n, lu.as_ptr(), &n, &anorm, &mut rcond, work.as_mut_ptr(),
            iwork.as_mut_ptr(), &mut info,
        );
    }
    if info != 0 {
        return Err(lapack_err("dgecon", info));
    }
    if rcond <= 0.0 || 1.0 / rcond > cond_limit {
        return Err(Error::Solve(format!(
            "condition estimate {:.3e} exceeds limit {cond_limit:.1e}",
            if rcond > 0.0 { 1.0 / rcond } else { f64::INFINITY }
        )));
    }

    let mut x = b.to_vec();
    let (trans, nrhs) = (b'T', 1i32);
    unsafe {
        dgetrs_(
            &trans, &n, &nrhs, lu.as_ptr(), &n, ipiv.as_ptr(), x.as_mut_ptr(), &n, &mut info,
        );
    }
    if info != 0 {
        return Err(lapack_err("dgetrs", info));
    }
    Ok(x)
}

/// Outcome of a rank-revealing least-squares solve.
pub struct Lstsq {
    /// Minimum-norm least-squares solution (length = number of columns).
    pub solution: Vec<f64>,
    /// Effective numerical rank at the requested tolerance.
    pub rank: usize,
    /// Column indices LAPACK deemed (nearly) dependent on the leading
    /// `rank` pivoted columns; empty at full rank.
    pub dependent_columns: Vec<usize>,
}

/// Least squares `min ‖A x − b‖₂` via complete orthogonal factorization with
/// column pivoting (`dgelsy`). `rcond` sets the rank-detection tolerance:
/// columns whose pivoted-R diagonal falls below `rcond` times the largest are
/// treated as dependent.
pub fn lstsq(a: ArrayView2<f64>, b: &[f64], rcond: f64) -> Result<Lstsq> {
    let (rows, cols) = a.dim();
    if b.len() != rows {
        return Err(Error::Parameter(format!(
            "lstsq: rhs length {} does not match row count {rows}",
            b.len()
        )));
    }
    if rows == 0 || cols == 0 {
        return Err(Error::Parameter("lstsq: empty problem".into()));
    }
    if a.iter().any(|v| !v.is_finite()) || b.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parameter("lstsq: non-finite input".into()));
    }
    let m = i32::try_from(rows).map_err(|_| Error::Parameter("lstsq: too many rows".into()))?;
    let n = i32::try_from(cols).map_err(|_| Error::Parameter("lstsq: too many columns".into()))?;

    // dgelsy needs genuine column-major storage.
    let mut af = vec![0.0f64; rows * cols];
    for (j, col) in a.axis_iter(ndarray::Axis(1)).enumerate() {
        for (i, v) in col.iter().enumerate() {
            af[j * rows + i] = *v;
        }
    }
    let ldb = rows.max(cols);
    let mut rhs = vec![0.0f64; ldb];
    rhs[..rows].copy_from_slice(b);

    let nrhs = 1i32;
    let ldb_i = ldb as i32;
    let mut jpvt = vec![0i32; cols];
    let mut rank = 0i32;
    let mut info = 0i32;
    let mut wkopt = 0.0f64;
    let query = -1i32;
    unsafe {
        dgelsy_(
            &m, &n, &nrhs, af.as_mut_ptr(), &m, rhs.as_mut_ptr(), &ldb_i, jpvt.as_mut_ptr(),
            &rcond, &mut rank, &mut wkopt, &query, &mut info,
        );
    }
    if info != 0 {
        return Err(lapack_err("dgelsy (workspace query)", info));
    }
    let lwork = wkopt as i32;
    let mut work = vec![0.0f64; lwork as usize];
    unsafe {
        dgelsy_(
            &m, &n, &nrhs, af.as_mut_ptr(), &m, rhs.as_mut_ptr(), &ldb_i, jpvt.as_mut_ptr(),
            &rcond, &mut rank, work.as_mut_ptr(), &lwork, &mut info,
        );
    }
    if info != 0 {
        return Err(lapack_err("dgelsy", info));
    }
    let rank = rank as usize;
    let dependent_columns = jpvt[rank..]
        .iter()
        .map(|&one_based| (one_based - 1) as usize)
        .collect();
    rhs.truncate(cols);
    Ok(Lstsq {
        solution: rhs,
        rank,
        dependent_columns,
    })
}
