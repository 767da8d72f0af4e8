//! Synthetic data generation under the matrix and order-d spiked covariance
//! models, with seeded reproducible randomness.
//!
//! Randomness is split into named streams keyed by (seed, path): each
//! (sample index, role) pair gets its own ChaCha8 generator seeded through a
//! splitmix64 mix of the base seed and the path elements. Changing the noise
//! family therefore leaves the score draws for the same seed untouched, and
//! samples can be generated in parallel. Reproducibility is promised within a
//! build, not bitwise across implementations.

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{argument, Result};
use crate::linalg::{self, Matrix, Subspace};
use crate::tensor::{self, Tensor};

const ROLE_SCORE_A: u64 = 0;
const ROLE_SCORE_B: u64 = 1;
const ROLE_NOISE: u64 = 2;
const ROLE_TENSOR_SCORE_BASE: u64 = 16;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Generator for the stream addressed by `path` under `seed`.
pub fn stream_rng(seed: u64, path: &[u64]) -> ChaCha8Rng {
    let mut s = splitmix64(seed);
    for &p in path {
        s = splitmix64(s ^ p.wrapping_mul(0x2545f4914f6cdd1d));
    }
    rand::SeedableRng::seed_from_u64(s)
}

/// Matrix with i.i.d. standard gaussian entries.
pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Haar-distributed random subspace: orthonormalized p x r standard-gaussian
/// draw. Deterministic given the seed.
pub fn random_subspace(p: usize, r: usize, seed: u64) -> Result<Subspace> {
    if r < 1 || r >= p {
        return Err(argument(format!("rank {r} must satisfy 1 <= r < p = {p}")));
    }
    let mut rng = stream_rng(seed, &[u64::MAX]);
    let g = gaussian_matrix(p, r, &mut rng);
    Subspace::orthonormalize(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseFamily {
    None,
    Uniform,
    Gaussian,
    StudentT3,
}

/// Entry-wise noise specification: uniform over (-R, R), gaussian with
/// standard deviation R, or R times a central t with 3 degrees of freedom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub family: NoiseFamily,
    pub scale: f64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self {
            family: NoiseFamily::None,
            scale: 0.0,
        }
    }

    pub fn gaussian(scale: f64) -> Self {
        Self {
            family: NoiseFamily::Gaussian,
            scale,
        }
    }

    pub fn uniform(scale: f64) -> Self {
        Self {
            family: NoiseFamily::Uniform,
            scale,
        }
    }

    pub fn student_t3(scale: f64) -> Self {
        Self {
            family: NoiseFamily::StudentT3,
            scale,
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self.family {
            NoiseFamily::None => 0.0,
            NoiseFamily::Uniform => self.scale * (2.0 * rng.random::<f64>() - 1.0),
            NoiseFamily::Gaussian => self.scale * rng.sample::<f64, _>(StandardNormal),
            NoiseFamily::StudentT3 => {
                // t_3 via gaussian / sqrt(chi^2_3 / 3)
                let g: f64 = rng.sample(StandardNormal);
                let chi2: f64 = (0..3)
                    .map(|_| {
                        let x: f64 = rng.sample(StandardNormal);
                        x * x
                    })
                    .sum();
                self.scale * g / (chi2 / 3.0).sqrt()
            }
        }
    }

    fn sample_matrix(&self, rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| self.sample(rng))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreDist {
    /// i.i.d. uniform over (-1, 1).
    UniformPm1,
    /// i.i.d. standard gaussian.
    GaussianStd,
}

impl ScoreDist {
    fn sample_matrix(&self, rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
        match self {
            ScoreDist::UniformPm1 => {
                Matrix::from_fn(rows, cols, |_, _| 2.0 * rng.random::<f64>() - 1.0)
            }
            ScoreDist::GaussianStd => gaussian_matrix(rows, cols, rng),
        }
    }
}

/// Parameters of the matrix model X = M + U A + B V^T + Z.
#[derive(Debug, Clone)]
pub struct MatrixModelParams {
    pub mean: Matrix,
    pub u_loading: Subspace,
    pub v_loading: Subspace,
    pub score_dist: ScoreDist,
    pub noise: NoiseSpec,
}

impl MatrixModelParams {
    pub fn new(
        mean: Matrix,
        u_loading: Subspace,
        v_loading: Subspace,
        score_dist: ScoreDist,
        noise: NoiseSpec,
    ) -> Result<Self> {
        if u_loading.ambient_dim() != mean.nrows() || v_loading.ambient_dim() != mean.ncols() {
            return Err(argument("loading dimensions do not match the mean matrix"));
        }
        if u_loading.is_full() || v_loading.is_full() {
            return Err(argument("ranks must be strictly below ambient dimensions"));
        }
        Ok(Self {
            mean,
            u_loading,
            v_loading,
            score_dist,
            noise,
        })
    }

    /// Zero mean, Haar loadings drawn from `seed`.
    pub fn random(
        p1: usize,
        p2: usize,
        r1: usize,
        r2: usize,
        score_dist: ScoreDist,
        noise: NoiseSpec,
        seed: u64,
    ) -> Result<Self> {
        let u = random_subspace(p1, r1, splitmix64(seed ^ 0xa11ce))?;
        let v = random_subspace(p2, r2, splitmix64(seed ^ 0xb0b))?;
        Self::new(Matrix::zeros(p1, p2), u, v, score_dist, noise)
    }

    pub fn p1(&self) -> usize {
        self.mean.nrows()
    }

    pub fn p2(&self) -> usize {
        self.mean.ncols()
    }

    pub fn r1(&self) -> usize {
        self.u_loading.rank()
    }

    pub fn r2(&self) -> usize {
        self.v_loading.rank()
    }
}

/// Realized draws retained alongside generated samples, so tests can compare
/// estimates against the exact signal.
#[derive(Debug, Clone)]
pub struct MatrixTruth {
    pub params: MatrixModelParams,
    pub scores_a: Vec<Matrix>,
    pub scores_b: Vec<Matrix>,
    pub noise: Vec<Matrix>,
}

impl MatrixTruth {
    /// The noiseless signal M + U A_i + B_i V^T of sample i.
    pub fn signal(&self, i: usize) -> Matrix {
        &self.params.mean
            + self.params.u_loading.basis() * &self.scores_a[i]
            + &self.scores_b[i] * self.params.v_loading.basis().transpose()
    }
}

/// n matrix observations sharing dimensions, plus their mean.
#[derive(Debug, Clone)]
pub struct MatrixSampleSet {
    samples: Vec<Matrix>,
    mean_bar: Matrix,
    truth: Option<Box<MatrixTruth>>,
}

impl MatrixSampleSet {
    pub fn new(samples: Vec<Matrix>) -> Result<Self> {
        Self::with_truth(samples, None)
    }

    pub fn with_truth(samples: Vec<Matrix>, truth: Option<Box<MatrixTruth>>) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| argument("sample set is empty"))?;
        let (p1, p2) = (first.nrows(), first.ncols());
        if samples.iter().any(|s| s.nrows() != p1 || s.ncols() != p2) {
            return Err(argument("samples do not share dimensions"));
        }
        if samples.iter().any(|s| s.iter().any(|x| !x.is_finite())) {
            return Err(argument("samples contain non-finite entries"));
        }
        let mut mean_bar = Matrix::zeros(p1, p2);
        for s in &samples {
            mean_bar += s;
        }
        mean_bar /= samples.len() as f64;
        Ok(Self {
            samples,
            mean_bar,
            truth,
        })
    }

    pub fn n(&self) -> usize {
        self.samples.len()
    }

    pub fn p1(&self) -> usize {
        self.mean_bar.nrows()
    }

    pub fn p2(&self) -> usize {
        self.mean_bar.ncols()
    }

    pub fn samples(&self) -> &[Matrix] {
        &self.samples
    }

    pub fn mean_bar(&self) -> &Matrix {
        &self.mean_bar
    }

    pub fn truth(&self) -> Option<&MatrixTruth> {
        self.truth.as_deref()
    }

    /// Centered copies X_i - X_bar.
    pub fn centered(&self) -> Vec<Matrix> {
        self.samples.iter().map(|s| s - &self.mean_bar).collect()
    }
}

/// Draws n samples X_i = M + U A_i + B_i V^T + Z_i with per-(sample, role)
/// RNG streams; the realized truth is retained.
pub fn sample_matrix_set(params: &MatrixModelParams, n: usize, seed: u64) -> Result<MatrixSampleSet> {
    if n == 0 {
        return Err(argument("sample count must be at least 1"));
    }
    let (p1, p2, r1, r2) = (params.p1(), params.p2(), params.r1(), params.r2());
    let mut samples = Vec::with_capacity(n);
    let mut scores_a = Vec::with_capacity(n);
    let mut scores_b = Vec::with_capacity(n);
    let mut noise = Vec::with_capacity(n);
    for i in 0..n {
        let a = params
            .score_dist
            .sample_matrix(r1, p2, &mut stream_rng(seed, &[i as u64, ROLE_SCORE_A]));
        let b = params
            .score_dist
            .sample_matrix(p1, r2, &mut stream_rng(seed, &[i as u64, ROLE_SCORE_B]));
        let z = params
            .noise
            .sample_matrix(p1, p2, &mut stream_rng(seed, &[i as u64, ROLE_NOISE]));
        let x = &params.mean
            + params.u_loading.basis() * &a
            + &b * params.v_loading.basis().transpose()
            + &z;
        samples.push(x);
        scores_a.push(a);
        scores_b.push(b);
        noise.push(z);
    }
    let truth = MatrixTruth {
        params: params.clone(),
        scores_a,
        scores_b,
        noise,
    };
    MatrixSampleSet::with_truth(samples, Some(Box::new(truth)))
}

/// Parameters of the order-d model X = sum_k A_k x_k U_k + Z.
#[derive(Debug, Clone)]
pub struct TensorModelParams {
    pub loadings: Vec<Subspace>,
    pub score_dist: ScoreDist,
    pub noise: NoiseSpec,
}

impl TensorModelParams {
    pub fn new(loadings: Vec<Subspace>, score_dist: ScoreDist, noise: NoiseSpec) -> Result<Self> {
        if loadings.len() < 2 {
            return Err(argument("tensor model needs at least 2 modes"));
        }
        if loadings.iter().any(|u| u.is_full()) {
            return Err(argument("ranks must be strictly below ambient dimensions"));
        }
        Ok(Self {
            loadings,
            score_dist,
            noise,
        })
    }

    pub fn random(
        dims: &[usize],
        ranks: &[usize],
        score_dist: ScoreDist,
        noise: NoiseSpec,
        seed: u64,
    ) -> Result<Self> {
        if dims.len() != ranks.len() {
            return Err(argument("dims and ranks length mismatch"));
        }
        let loadings = dims
            .iter()
            .zip(ranks)
            .enumerate()
            .map(|(k, (&p, &r))| random_subspace(p, r, splitmix64(seed ^ (k as u64 + 0xc0de))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(loadings, score_dist, noise)
    }

    pub fn dims(&self) -> Vec<usize> {
        self.loadings.iter().map(|u| u.ambient_dim()).collect()
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.loadings.iter().map(|u| u.rank()).collect()
    }
}

#[derive(Debug, Clone)]
pub struct TensorTruth {
    pub params: TensorModelParams,
    /// scores[i][k]: the mode-k score tensor of sample i.
    pub scores: Vec<Vec<Tensor>>,
    pub noise: Vec<Tensor>,
}

impl TensorTruth {
    /// The noiseless signal sum_k A_{i,k} x_k U_k of sample i.
    pub fn signal(&self, i: usize) -> Tensor {
        let dims = self.params.dims();
        let mut acc = Tensor::zeros(dims);
        for (k, u) in self.params.loadings.iter().enumerate() {
            let term = tensor::mode_product(&self.scores[i][k], u.basis(), k)
                .expect("score dims match by construction");
            acc = acc + &term;
        }
        acc
    }
}

#[derive(Debug, Clone)]
pub struct TensorSampleSet {
    samples: Vec<Tensor>,
    mean_bar: Tensor,
    truth: Option<Box<TensorTruth>>,
}

impl TensorSampleSet {
    pub fn new(samples: Vec<Tensor>) -> Result<Self> {
        Self::with_truth(samples, None)
    }

    pub fn with_truth(samples: Vec<Tensor>, truth: Option<Box<TensorTruth>>) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| argument("sample set is empty"))?;
        let dims = first.dims().to_vec();
        if samples.iter().any(|s| s.dims() != dims.as_slice()) {
            return Err(argument("samples do not share dimensions"));
        }
        let mut mean = Tensor::zeros(dims);
        for s in &samples {
            mean = mean + s;
        }
        let n = samples.len() as f64;
        for v in mean.data_mut() {
            *v /= n;
        }
        Ok(Self {
            samples,
            mean_bar: mean,
            truth,
        })
    }

    pub fn n(&self) -> usize {
        self.samples.len()
    }

    pub fn dims(&self) -> &[usize] {
        self.mean_bar.dims()
    }

    pub fn samples(&self) -> &[Tensor] {
        &self.samples
    }

    pub fn mean_bar(&self) -> &Tensor {
        &self.mean_bar
    }

    pub fn truth(&self) -> Option<&TensorTruth> {
        self.truth.as_deref()
    }

    pub fn centered(&self) -> Vec<Tensor> {
        self.samples.iter().map(|s| s - &self.mean_bar).collect()
    }
}

fn sample_score_tensor(
    dims: &[usize],
    mode: usize,
    rank: usize,
    dist: ScoreDist,
    rng: &mut ChaCha8Rng,
) -> Tensor {
    let mut score_dims = dims.to_vec();
    score_dims[mode] = rank;
    let len: usize = score_dims.iter().product();
    let data: Vec<f64> = match dist {
        ScoreDist::UniformPm1 => (0..len).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect(),
        ScoreDist::GaussianStd => (0..len).map(|_| rng.sample(StandardNormal)).collect(),
    };
    Tensor::new(score_dims, data).expect("score tensor dims are valid")
}

/// Draws n tensor samples X_i = sum_k A_{i,k} x_k U_k + Z_i.
pub fn sample_tensor_set(params: &TensorModelParams, n: usize, seed: u64) -> Result<TensorSampleSet> {
    if n == 0 {
        return Err(argument("sample count must be at least 1"));
    }
    let dims = params.dims();
    let ranks = params.ranks();
    let total: usize = dims.iter().product();
    let mut samples = Vec::with_capacity(n);
    let mut scores = Vec::with_capacity(n);
    let mut noises = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = Tensor::zeros(dims.clone());
        let mut sample_scores = Vec::with_capacity(dims.len());
        for (k, u) in params.loadings.iter().enumerate() {
            let a = sample_score_tensor(
                &dims,
                k,
                ranks[k],
                params.score_dist,
                &mut stream_rng(seed, &[i as u64, ROLE_TENSOR_SCORE_BASE + k as u64]),
            );
            let term = tensor::mode_product(&a, u.basis(), k)?;
            x = x + &term;
            sample_scores.push(a);
        }
        let mut z_rng = stream_rng(seed, &[i as u64, ROLE_NOISE]);
        let z_data: Vec<f64> = (0..total).map(|_| params.noise.sample(&mut z_rng)).collect();
        let z = Tensor::new(dims.clone(), z_data)?;
        let x = x + &z;
        samples.push(x);
        scores.push(sample_scores);
        noises.push(z);
    }
    let truth = TensorTruth {
        params: params.clone(),
        scores,
        noise: noises,
    };
    TensorSampleSet::with_truth(samples, Some(Box::new(truth)))
}

/// Diagnostic for the spiked covariance structure: the relative Frobenius
/// residual of the complement block of the empirical covariance,
/// ||W^T (Sigma_hat - sigma_hat^2 I) W||_F / ||Sigma_hat||_F with
/// W = V_perp (x) U_perp. The noise level sigma_hat^2 is estimated as the
/// mean diagonal of the complement block, the minimal consistent choice.
pub fn covariance_residual(set: &MatrixSampleSet, u: &Subspace, v: &Subspace) -> Result<f64> {
    if set.n() < 2 {
        return Err(argument("covariance residual needs at least 2 samples"));
    }
    if u.ambient_dim() != set.p1() || v.ambient_dim() != set.p2() {
        return Err(argument("loading dimensions do not match the sample set"));
    }
    let d = set.p1() * set.p2();
    let mut sigma = Matrix::zeros(d, d);
    for c in set.centered() {
        let vec = DVector::from_column_slice(c.as_slice());
        sigma += &vec * vec.transpose();
    }
    sigma /= (set.n() - 1) as f64;

    let u_perp = linalg::orthonormal_complement(u)?;
    let v_perp = linalg::orthonormal_complement(v)?;
    let w = linalg::kronecker(v_perp.basis(), u_perp.basis());
    let block = w.transpose() * &sigma * &w;
    let m = block.nrows();
    let sigma2_hat = block.diagonal().sum() / m as f64;
    let residual = (&block - sigma2_hat * Matrix::identity(m, m)).norm();
    Ok(residual / sigma.norm())
}
