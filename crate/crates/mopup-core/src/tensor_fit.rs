//! Order-d extension: HOSVD initialization and the alternating-projection
//! iteration over tensor sample sets.

use crate::error::{argument, Result};
use crate::linalg::{self, Subspace};
use crate::mopup::ApOptions;
use crate::parallel;
use crate::spiked::TensorSampleSet;
use crate::tensor::{self, Tensor};

#[derive(Debug, Clone)]
pub struct TensorFitResult {
    pub loadings: Vec<Subspace>,
    pub iterations_run: usize,
    pub converged: bool,
    pub step_trace: Vec<f64>,
}

fn check_ranks(set: &TensorSampleSet, ranks: &[usize]) -> Result<()> {
    let dims = set.dims();
    if ranks.len() != dims.len() {
        return Err(argument(format!(
            "got {} ranks for an order-{} tensor",
            ranks.len(),
            dims.len()
        )));
    }
    for (k, (&r, &p)) in ranks.iter().zip(dims).enumerate() {
        if r < 1 || r >= p {
            return Err(argument(format!(
                "mode-{k} rank {r} out of range for dimension {p}"
            )));
        }
    }
    Ok(())
}

/// Per-mode top left singular subspaces of the column-concatenated centered
/// unfoldings. The concatenation is never materialized; the Gram matrix
/// sum_i M_k(X_i) M_k(X_i)^T is accumulated instead, which has the same top
/// eigenspace.
pub fn hosvd_init(set: &TensorSampleSet, ranks: &[usize]) -> Result<Vec<Subspace>> {
    check_ranks(set, ranks)?;
    let centered = set.centered();
    let dims = set.dims().to_vec();
    dims.iter()
        .enumerate()
        .map(|(k, &pk)| {
            let gram = parallel::sum_terms(centered.len(), pk, pk, true, |i| {
                let unf = tensor::unfold(&centered[i], k).expect("mode is valid");
                &unf * unf.transpose()
            });
            linalg::top_eigenvectors(&gram, ranks[k])
        })
        .collect()
}

/// One mode update: top eigenvectors of the Gram of mode-j unfoldings after
/// projecting every other mode onto its complement.
fn mode_update(
    centered: &[Tensor],
    complements: &[Subspace],
    mode: usize,
    rank: usize,
    deterministic: bool,
) -> Result<Subspace> {
    let pj = centered[0].dims()[mode];
    let gram = parallel::sum_terms(centered.len(), pj, pj, deterministic, |i| {
        let mut y = centered[i].clone();
        for (k, comp) in complements.iter().enumerate() {
            if k == mode {
                continue;
            }
            y = tensor::mode_product(&y, &comp.basis().transpose(), k)
                .expect("complement dims match");
        }
        let unf = tensor::unfold(&y, mode).expect("mode is valid");
        &unf * unf.transpose()
    });
    linalg::top_eigenvectors(&gram, rank)
}

/// Alternating projection for order-d samples (d >= 3; the matrix case has
/// its own path). Within a sweep, modes update in ascending order and every
/// complement projection reads the previous iteration's loadings.
pub fn ap_fit_tensor(
    set: &TensorSampleSet,
    ranks: &[usize],
    init: Vec<Subspace>,
    opts: &ApOptions,
) -> Result<TensorFitResult> {
    opts.validate()?;
    let dims = set.dims().to_vec();
    if dims.len() < 3 {
        return Err(argument("tensor fitting requires order >= 3"));
    }
    check_ranks(set, ranks)?;
    if init.len() != dims.len() {
        return Err(argument("init loading count does not match tensor order"));
    }
    for (k, u) in init.iter().enumerate() {
        if u.ambient_dim() != dims[k] || u.rank() != ranks[k] {
            return Err(argument(format!(
                "init loading {k} is {}x{}, expected {}x{}",
                u.ambient_dim(),
                u.rank(),
                dims[k],
                ranks[k]
            )));
        }
    }

    let centered = set.centered();
    let mut loadings = init;
    let mut converged = false;
    let mut iterations_run = 0;
    let mut step_trace = Vec::new();

    for _ in 0..opts.max_iter {
        let complements: Vec<Subspace> = loadings
            .iter()
            .map(linalg::orthonormal_complement)
            .collect::<Result<_>>()?;
        let mut new_loadings = Vec::with_capacity(loadings.len());
        for j in 0..dims.len() {
            new_loadings.push(mode_update(
                &centered,
                &complements,
                j,
                ranks[j],
                opts.deterministic,
            )?);
        }
        let step = loadings
            .iter()
            .zip(&new_loadings)
            .map(|(old, new)| linalg::sin_theta(new, old).expect("same shape"))
            .fold(0.0f64, f64::max);
        loadings = new_loadings;
        iterations_run += 1;
        step_trace.push(step);
        if step <= opts.tol {
            converged = true;
            break;
        }
    }

    Ok(TensorFitResult {
        loadings,
        iterations_run,
        converged,
        step_trace,
    })
}

/// Max per-mode sin-theta distance to a reference set of loadings.
pub fn max_mode_error(estimate: &[Subspace], truth: &[Subspace]) -> Result<f64> {
    if estimate.len() != truth.len() {
        return Err(argument("loading count mismatch"));
    }
    let mut err = 0.0f64;
    for (e, t) in estimate.iter().zip(truth) {
        err = err.max(linalg::sin_theta(e, t)?);
    }
    Ok(err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spiked::{
        random_subspace, sample_tensor_set, NoiseSpec, ScoreDist, TensorModelParams,
        TensorSampleSet,
    };

    fn order3_set(seed: u64) -> TensorSampleSet {
        let params = TensorModelParams::random(
            &[8, 8, 8],
            &[2, 2, 2],
            ScoreDist::GaussianStd,
            NoiseSpec::none(),
            seed,
        )
        .unwrap();
        sample_tensor_set(&params, 6, seed ^ 0xface).unwrap()
    }

    #[test]
    fn hosvd_recovers_single_mode_spike() {
        // Only the mode-0 score is nonzero: the mode-0 unfolding columns all
        // lie in span(U_0).
        let u0 = random_subspace(6, 2, 1).unwrap();
        let u1 = random_subspace(5, 2, 2).unwrap();
        let u2 = random_subspace(4, 1, 3).unwrap();
        let params = TensorModelParams::new(
            vec![u0.clone(), u1, u2],
            ScoreDist::GaussianStd,
            NoiseSpec::none(),
        )
        .unwrap();
        let full = sample_tensor_set(&params, 4, 4).unwrap();
        let truth = full.truth().unwrap();
        // rebuild samples keeping only the mode-0 term
        let samples: Vec<Tensor> = (0..full.n())
            .map(|i| {
                tensor::mode_product(&truth.scores[i][0], u0.basis(), 0).unwrap()
            })
            .collect();
        let set = TensorSampleSet::new(samples).unwrap();
        let init = hosvd_init(&set, &[2, 2, 1]).unwrap();
        assert!(linalg::sin_theta(&init[0], &u0).unwrap() <= 1e-8);
    }

    #[test]
    fn hosvd_sample_permutation_invariant() {
        let set = order3_set(9);
        let mut reordered: Vec<Tensor> = set.samples().to_vec();
        reordered.reverse();
        let permuted = TensorSampleSet::new(reordered).unwrap();
        let a = hosvd_init(&set, &[2, 2, 2]).unwrap();
        let b = hosvd_init(&permuted, &[2, 2, 2]).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!(linalg::sin_theta(x, y).unwrap() <= 1e-10);
        }
    }

    #[test]
    fn hosvd_empty_set_errors() {
        assert!(TensorSampleSet::new(vec![]).is_err());
    }

    #[test]
    fn ap_tensor_zero_iterations_returns_init() {
        let set = order3_set(10);
        let init = hosvd_init(&set, &[2, 2, 2]).unwrap();
        let opts = ApOptions {
            max_iter: 0,
            ..Default::default()
        };
        let fit = ap_fit_tensor(&set, &[2, 2, 2], init.clone(), &opts).unwrap();
        assert!(!fit.converged);
        for (a, b) in fit.loadings.iter().zip(&init) {
            assert_eq!(a.basis(), b.basis());
        }
    }

    #[test]
    fn ap_tensor_rejects_order_two() {
        let params = TensorModelParams::random(
            &[5, 4],
            &[2, 1],
            ScoreDist::GaussianStd,
            NoiseSpec::none(),
            5,
        )
        .unwrap();
        let set = sample_tensor_set(&params, 3, 6).unwrap();
        let init = hosvd_init(&set, &[2, 1]).unwrap();
        assert!(ap_fit_tensor(&set, &[2, 1], init, &ApOptions::default()).is_err());
    }

    #[test]
    fn ap_tensor_improves_on_hosvd() {
        for seed in [31u64, 32, 33] {
            let set = order3_set(seed);
            let truth = &set.truth().unwrap().params.loadings;
            let init = hosvd_init(&set, &[2, 2, 2]).unwrap();
            let init_err = max_mode_error(&init, truth).unwrap();
            let opts = ApOptions {
                max_iter: 20,
                ..Default::default()
            };
            let fit = ap_fit_tensor(&set, &[2, 2, 2], init, &opts).unwrap();
            let final_err = max_mode_error(&fit.loadings, truth).unwrap();
            assert!(final_err <= 0.05, "seed {seed}: final error {final_err}");
            assert!(
                final_err <= init_err + 1e-12,
                "seed {seed}: {final_err} vs init {init_err}"
            );
        }
    }

    #[test]
    fn ap_tensor_truth_is_fixed_point() {
        // On noiseless data, starting at the exact loadings moves nothing:
        // each cross term dies under the complement projections, so every
        // mode update returns its own span.
        let set = order3_set(40);
        let truth = set.truth().unwrap().params.loadings.clone();
        let opts = ApOptions {
            max_iter: 1,
            ..Default::default()
        };
        let fit = ap_fit_tensor(&set, &[2, 2, 2], truth.clone(), &opts).unwrap();
        let err = max_mode_error(&fit.loadings, &truth).unwrap();
        assert!(err <= 1e-8, "moved {err} away from the exact fixed point");
    }

    #[test]
    fn mode_symmetry() {
        // permuting tensor modes permutes the outputs
        let set = order3_set(50);
        let truth = &set.truth().unwrap().params.loadings;
        // build the mode-permuted sample set (swap modes 0 and 2)
        let permuted: Vec<Tensor> = set
            .samples()
            .iter()
            .map(|t| {
                let dims = t.dims();
                let mut out = Tensor::zeros(vec![dims[2], dims[1], dims[0]]);
                for i0 in 0..dims[0] {
                    for i1 in 0..dims[1] {
                        for i2 in 0..dims[2] {
                            out.set(&[i2, i1, i0], t.get(&[i0, i1, i2]));
                        }
                    }
                }
                out
            })
            .collect();
        let pset = TensorSampleSet::new(permuted).unwrap();
        let opts = ApOptions {
            max_iter: 5,
            ..Default::default()
        };
        let fit_a = ap_fit_tensor(
            &set,
            &[2, 2, 2],
            hosvd_init(&set, &[2, 2, 2]).unwrap(),
            &opts,
        )
        .unwrap();
        let fit_b = ap_fit_tensor(
            &pset,
            &[2, 2, 2],
            hosvd_init(&pset, &[2, 2, 2]).unwrap(),
            &opts,
        )
        .unwrap();
        assert!(linalg::sin_theta(&fit_a.loadings[0], &fit_b.loadings[2]).unwrap() <= 1e-10);
        assert!(linalg::sin_theta(&fit_a.loadings[1], &fit_b.loadings[1]).unwrap() <= 1e-10);
        assert!(linalg::sin_theta(&fit_a.loadings[2], &fit_b.loadings[0]).unwrap() <= 1e-10);
        let _ = truth;
    }

    #[test]
    fn translation_and_scale_invariance() {
        let params = TensorModelParams::random(
            &[6, 6, 6],
            &[2, 2, 2],
            ScoreDist::GaussianStd,
            NoiseSpec::gaussian(0.1),
            60,
        )
        .unwrap();
        let set = sample_tensor_set(&params, 5, 61).unwrap();
        let shift = {
            let mut t = Tensor::zeros(vec![6, 6, 6]);
            for (i, v) in t.data_mut().iter_mut().enumerate() {
                *v = (i % 13) as f64;
            }
            t
        };
        let shifted =
            TensorSampleSet::new(set.samples().iter().map(|x| x.clone() + &shift).collect())
                .unwrap();
        let scaled = TensorSampleSet::new(
            set.samples()
                .iter()
                .map(|x| {
                    let mut y = x.clone();
                    for v in y.data_mut() {
                        *v *= -2.0;
                    }
                    y
                })
                .collect(),
        )
        .unwrap();
        let opts = ApOptions {
            max_iter: 5,
            ..Default::default()
        };
        let ranks = [2, 2, 2];
        let base =
            ap_fit_tensor(&set, &ranks, hosvd_init(&set, &ranks).unwrap(), &opts).unwrap();
        let f_shift =
            ap_fit_tensor(&shifted, &ranks, hosvd_init(&shifted, &ranks).unwrap(), &opts).unwrap();
        let f_scale =
            ap_fit_tensor(&scaled, &ranks, hosvd_init(&scaled, &ranks).unwrap(), &opts).unwrap();
        for k in 0..3 {
            assert!(
                linalg::sin_theta(&base.loadings[k], &f_shift.loadings[k]).unwrap() <= 1e-9
            );
            assert!(
                linalg::sin_theta(&base.loadings[k], &f_scale.loadings[k]).unwrap() <= 1e-10
            );
        }
    }
}
