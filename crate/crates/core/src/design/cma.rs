//! (μ/μ_w, λ) evolution strategy with cumulative step-size and covariance
//! adaptation.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

/// Search distribution state. Sampling consumes the caller's RNG, so runs
/// are reproducible given its seed.
#[derive(Clone, Debug)]
pub struct Cma {
    dim: usize,
    lambda: usize,
    mu: usize,
    weights: Vec<f64>,
    mu_eff: f64,
    c_sigma: f64,
    d_sigma: f64,
    c_c: f64,
    c_1: f64,
    c_mu: f64,
    chi_n: f64,

    mean: DVector<f64>,
    sigma: f64,
    cov: DMatrix<f64>,
    p_sigma: DVector<f64>,
    p_c: DVector<f64>,
    basis: DMatrix<f64>,
    scales: DVector<f64>,
    generation: usize,
}

/// One sampled generation.
#[derive(Clone, Debug)]
pub struct Generation {
    pub candidates: Vec<Vec<f64>>,
}

impl Cma {
    /// `coordinate_scales` sets the initial covariance `diag(s²)`; `sigma0`
    /// multiplies it. `parents` defaults to `lambda / 2`.
    pub fn new(
        mean: Vec<f64>,
        sigma0: f64,
        coordinate_scales: &[f64],
        lambda: usize,
        parents: Option<usize>,
    ) -> Self {
        let n = mean.len();
        let mu = parents.unwrap_or(lambda / 2).clamp(1, lambda);
        let raw: Vec<f64> = (1..=mu)
            .map(|i| (mu as f64 + 0.5).ln() - (i as f64).ln())
            .collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
        let nf = n as f64;

        let c_sigma = (mu_eff + 2.0) / (nf + mu_eff + 5.0);
        let d_sigma =
            1.0 + 2.0 * (((mu_eff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / nf) / (nf + 4.0 + 2.0 * mu_eff / nf);
        let c_1 = 2.0 / ((nf + 1.3).powi(2) + mu_eff);
        let c_mu = (1.0 - c_1)
            .min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((nf + 2.0).powi(2) + mu_eff));
        let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));

        let scales = DVector::from_iterator(n, coordinate_scales.iter().copied());
        let cov = DMatrix::from_diagonal(&scales.map(|s| s * s));
        Self {
            dim: n,
            lambda,
            mu,
            weights,
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c_1,
            c_mu,
            chi_n,
            mean: DVector::from_vec(mean),
            sigma: sigma0,
            cov,
            p_sigma: DVector::zeros(n),
            p_c: DVector::zeros(n),
            basis: DMatrix::identity(n, n),
            scales,
            generation: 0,
        }
    }

    pub fn lambda(&self) -> usize {
        self.lambda
    }

    pub fn mean(&self) -> &[f64] {
        self.mean.as_slice()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    /// Draws `λ` candidates `m + σ B D z`.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Generation {
        let mut candidates = Vec::with_capacity(self.lambda);
        for _ in 0..self.lambda {
            let z = DVector::from_iterator(
                self.dim,
                (0..self.dim).map(|_| rng.sample::<f64, _>(StandardNormal)),
            );
            let y = &self.basis * z.component_mul(&self.scales);
            let x = &self.mean + &y * self.sigma;
            candidates.push(x.iter().copied().collect());
        }
        Generation { candidates }
    }

    /// Updates the distribution from scores (lower is better). Candidates may
    /// have been repaired after sampling; the step actually taken is used.
    pub fn tell(&mut self, generation: &Generation, scores: &[f64]) {
        assert_eq!(scores.len(), generation.candidates.len());
        let mut order: Vec<usize> = (0..scores.len()).collect();
        // Stable sort: ties keep sampling order.
        order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

        let old_mean = self.mean.clone();
        let ys: Vec<DVector<f64>> = order[..self.mu]
            .iter()
            .map(|&i| {
                let x = DVector::from_iterator(self.dim, generation.candidates[i].iter().copied());
                (x - &old_mean) / self.sigma
            })
            .collect();
        let mut y_w = DVector::zeros(self.dim);
        for (w, y) in self.weights.iter().zip(&ys) {
            y_w += y * *w;
        }
        self.mean = &old_mean + &y_w * self.sigma;

        // C^{-1/2} y_w through the eigen basis.
        let inv_sqrt = DMatrix::from_diagonal(&self.scales.map(|d| 1.0 / d));
        let c_inv_sqrt_yw = &self.basis * (inv_sqrt * (self.basis.transpose() * &y_w));
        self.p_sigma = &self.p_sigma * (1.0 - self.c_sigma)
            + c_inv_sqrt_yw * (self.c_sigma * (2.0 - self.c_sigma) * self.mu_eff).sqrt();

        self.generation += 1;
        let ps_norm = self.p_sigma.norm();
        let decay = (1.0 - (1.0 - self.c_sigma).powi(2 * self.generation as i32)).sqrt();
        let h_sigma = ps_norm / decay / self.chi_n < 1.4 + 2.0 / (self.dim as f64 + 1.0);
        let hs = if h_sigma { 1.0 } else { 0.0 };
        self.p_c = &self.p_c * (1.0 - self.c_c)
            + &y_w * (hs * (self.c_c * (2.0 - self.c_c) * self.mu_eff).sqrt());

        let delta = (1.0 - hs) * self.c_c * (2.0 - self.c_c);
        let mut rank_mu = DMatrix::zeros(self.dim, self.dim);
        for (w, y) in self.weights.iter().zip(&ys) {
            rank_mu += y * y.transpose() * *w;
        }
        self.cov = &self.cov * (1.0 - self.c_1 - self.c_mu + self.c_1 * delta)
            + &self.p_c * self.p_c.transpose() * self.c_1
            + rank_mu * self.c_mu;

        self.sigma *= ((self.c_sigma / self.d_sigma) * (ps_norm / self.chi_n - 1.0)).exp();
        self.decompose();
    }

    fn decompose(&mut self) {
        // Enforce symmetry against round-off before the eigen solve.
        let sym = (&self.cov + self.cov.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym.clone());
        self.cov = sym;
        self.basis = eig.eigenvectors;
        self.scales = eig.eigenvalues.map(|l| l.max(1e-300).sqrt());
    }
}
