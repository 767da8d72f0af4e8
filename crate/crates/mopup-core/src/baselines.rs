//! Comparison methods: the MPCA/HOOI matrix iteration, which projects onto
//! the current subspaces rather than their complements, and the plain HOSVD
//! initializer for matrix samples.

use crate::error::{argument, Result};
use crate::linalg::{self, Matrix, Part, Side, Subspace};
use crate::mopup::{ApOptions, FitResult, UpdateOrder};
use crate::parallel;
use crate::spiked::MatrixSampleSet;

fn span_gram(
    centered: &[Matrix],
    sub: &Subspace,
    v_update: bool,
    deterministic: bool,
) -> Matrix {
    let dim = if v_update {
        centered[0].ncols()
    } else {
        centered[0].nrows()
    };
    parallel::sum_terms(centered.len(), dim, dim, deterministic, |i| {
        let w = if v_update {
            linalg::project_out(&centered[i], sub, Side::Left, Part::Span)
                .expect("dimensions validated by caller")
        } else {
            linalg::project_out(&centered[i].transpose(), sub, Side::Left, Part::Span)
                .expect("dimensions validated by caller")
        };
        w.transpose() * &w
    })
}

/// MPCA solved by orthogonal iteration: identical loop shell and stopping
/// semantics to the alternating-projection fit, but each Gram projects the
/// samples onto span of the other mode's current estimate (the core-only
/// model X = U S V^T + Z).
pub fn hooi_mpca_fit(
    set: &MatrixSampleSet,
    r1: usize,
    r2: usize,
    init: (Subspace, Subspace),
    opts: &ApOptions,
) -> Result<FitResult> {
    opts.validate()?;
    let (p1, p2) = (set.p1(), set.p2());
    let (u0, v0) = init;
    if u0.ambient_dim() != p1 || v0.ambient_dim() != p2 {
        return Err(argument("init ambient dimensions do not match the samples"));
    }
    if u0.rank() != r1 || v0.rank() != r2 {
        return Err(argument(format!(
            "init ranks ({}, {}) do not match target ({r1}, {r2})",
            u0.rank(),
            v0.rank()
        )));
    }

    let centered = set.centered();
    let mut u = u0;
    let mut v = v0;
    let mut converged = false;
    let mut iterations_run = 0;
    let mut objective_trace = Vec::new();
    let mut step_trace = Vec::new();

    for _ in 0..opts.max_iter {
        let gram_v = span_gram(&centered, &u, true, opts.deterministic);
        let v_new = linalg::top_eigenvectors(&gram_v, r2)?;
        let u_source = match opts.update_order {
            UpdateOrder::PaperJacobi => &v,
            UpdateOrder::GaussSeidel => &v_new,
        };
        let gram_u = span_gram(&centered, u_source, false, opts.deterministic);
        let u_new = linalg::top_eigenvectors(&gram_u, r1)?;

        let step = linalg::sin_theta(&u_new, &u)?.max(linalg::sin_theta(&v_new, &v)?);
        u = u_new;
        v = v_new;
        iterations_run += 1;
        step_trace.push(step);
        if opts.record_trace {
            objective_trace.push(crate::mopup::objective(set, &u, &v)?);
        }
        if step <= opts.tol {
            converged = true;
            break;
        }
    }

    Ok(FitResult {
        u_hat: u,
        v_hat: v,
        iterations_run,
        converged,
        objective_trace,
        step_trace,
    })
}

/// HOSVD initializer for matrix samples: top left singular subspaces of the
/// column-concatenated centered samples (row-concatenated transposes for V),
/// accumulated as Gram matrices.
pub fn hosvd_matrix_init(
    set: &MatrixSampleSet,
    r1: usize,
    r2: usize,
) -> Result<(Subspace, Subspace)> {
    let (p1, p2, n) = (set.p1(), set.p2(), set.n());
    if r1 < 1 || r1 >= p1 || r2 < 1 || r2 >= p2 {
        return Err(argument(format!(
            "ranks ({r1}, {r2}) out of range for {p1} x {p2} samples"
        )));
    }
    let centered = set.centered();
    let gram_u = parallel::sum_terms(n, p1, p1, true, |i| &centered[i] * centered[i].transpose());
    let gram_v = parallel::sum_terms(n, p2, p2, true, |i| centered[i].transpose() * &centered[i]);
    Ok((
        linalg::top_eigenvectors(&gram_u, r1)?,
        linalg::top_eigenvectors(&gram_v, r2)?,
    ))
}

/// MPCA with its standard companion initializer (HOSVD).
pub fn mpca_fit(set: &MatrixSampleSet, r1: usize, r2: usize, opts: &ApOptions) -> Result<FitResult> {
    let init = hosvd_matrix_init(set, r1, r2)?;
    hooi_mpca_fit(set, r1, r2, init, opts)
}
