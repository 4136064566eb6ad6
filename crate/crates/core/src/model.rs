//! The TGP regression function `f(x) = W ×_d (U^(d)ᵀ φ_d(x))`, its Gaussian
//! priors, log joint and analytic gradients.
//!
//! The log joint omits the Gaussian normalising constants; they do not depend
//! on the parameters and cancel in every accept ratio and gradient.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TgpError};
use crate::features::{FeatureMap, FeatureVec};
use crate::input::Coord;
use crate::linalg::{dot, Matrix};
use crate::tensor::{
    contract_all_but_one_unchecked, full_contract_unchecked, kron_into_buf, DenseTensor, TuckerWeights,
    DEFAULT_RECONSTRUCT_LIMIT,
};

/// A featurised training or test example.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub features: Vec<FeatureVec>,
    pub target: f64,
}

/// Reusable buffers for prediction and gradient evaluation.
#[derive(Debug, Default, Clone)]
pub struct Scratch {
    psi: Vec<Vec<f64>>,
    buf: Vec<f64>,
    out: Vec<f64>,
    kron: Vec<f64>,
    kron_next: Vec<f64>,
}

/// Gradient of the log joint, shaped like the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    pub grad_w: DenseTensor,
    pub grad_u: Vec<Matrix>,
}

impl GradientBundle {
    pub fn zeros_like(weights: &TuckerWeights) -> Self {
        let z = weights.zeros_like();
        GradientBundle {
            grad_w: z.core,
            grad_u: z.factors,
        }
    }

    /// Same layout as [`TuckerWeights::to_flat`].
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = self.grad_w.data().to_vec();
        for u in &self.grad_u {
            out.extend_from_slice(u.as_slice());
        }
        out
    }

    fn fill_zero(&mut self) {
        self.grad_w.data_mut().iter_mut().for_each(|x| *x = 0.0);
        for u in &mut self.grad_u {
            u.as_mut_slice().iter_mut().for_each(|x| *x = 0.0);
        }
    }
}

/// TGP regression model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TgpModel {
    pub maps: Vec<FeatureMap>,
    pub weights: TuckerWeights,
    /// Observation noise variance `σ²`.
    pub noise_var: f64,
    /// Prior variance `σ_u²` of factor entries.
    pub prior_u_var: f64,
    /// Prior variance `σ_w²` of core entries.
    pub prior_w_var: f64,
}

impl TgpModel {
    pub fn new(
        maps: Vec<FeatureMap>,
        weights: TuckerWeights,
        noise_var: f64,
        prior_u_var: f64,
        prior_w_var: f64,
    ) -> Result<Self> {
        let model = TgpModel {
            maps,
            weights,
            noise_var,
            prior_u_var,
            prior_w_var,
        };
        model.validate()?;
        Ok(model)
    }

    /// Model with weights drawn from the prior, `σ_u² = 1/r` and `σ_w² = 1`.
    pub fn from_prior(maps: Vec<FeatureMap>, rank: usize, noise_var: f64, seed: u64) -> Result<Self> {
        if rank < 1 {
            return Err(TgpError::invalid("rank must be at least 1"));
        }
        let prior_u_var = 1.0 / rank as f64;
        let rows: Vec<usize> = maps.iter().map(FeatureMap::output_len).collect();
        let weights = sample_prior(&rows, rank, prior_u_var, 1.0, seed)?;
        TgpModel::new(maps, weights, noise_var, prior_u_var, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.maps.len() != self.weights.order() {
            return Err(TgpError::mismatch(format!(
                "{} feature maps for {} factor matrices",
                self.maps.len(),
                self.weights.order()
            )));
        }
        for (d, (map, u)) in self.maps.iter().zip(&self.weights.factors).enumerate() {
            if map.output_len() != u.rows() {
                return Err(TgpError::mismatch(format!(
                    "feature map {d} has {} outputs but factor {d} has {} rows",
                    map.output_len(),
                    u.rows()
                )));
            }
        }
        for (name, v) in [
            ("noise variance", self.noise_var),
            ("factor prior variance", self.prior_u_var),
            ("core prior variance", self.prior_w_var),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(TgpError::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn order(&self) -> usize {
        self.maps.len()
    }

    pub fn featurize(&self, x: &[Coord]) -> Result<Vec<FeatureVec>> {
        if x.len() != self.order() {
            return Err(TgpError::mismatch(format!(
                "input has {} coordinates, model has {} dimensions",
                x.len(),
                self.order()
            )));
        }
        self.maps.iter().zip(x).map(|(m, c)| m.apply(c)).collect()
    }

    pub fn observations(&self, xs: &[Vec<Coord>], ys: &[f64]) -> Result<Vec<Observation>> {
        if xs.len() != ys.len() {
            return Err(TgpError::mismatch(format!("{} inputs but {} targets", xs.len(), ys.len())));
        }
        xs.iter()
            .zip(ys)
            .map(|(x, &y)| {
                Ok(Observation {
                    features: self.featurize(x)?,
                    target: y,
                })
            })
            .collect()
    }

    pub fn predict(&self, x: &[Coord]) -> Result<f64> {
        let feats = self.featurize(x)?;
        Ok(self.predict_features(&feats, &mut Scratch::default()))
    }

    /// `f(x)` for features produced by this model's maps.
    pub fn predict_features(&self, features: &[FeatureVec], scratch: &mut Scratch) -> f64 {
        evaluate(&self.weights, features, scratch)
    }

    /// `ψ_d = U^(d)ᵀ φ_d(x)` for every dimension.
    pub fn projections(&self, x: &[Coord]) -> Result<Vec<Vec<f64>>> {
        let feats = self.featurize(x)?;
        let mut psi = Vec::new();
        project_all(&self.weights, &feats, &mut psi);
        Ok(psi)
    }

    /// `−Σ (y − f)² / (2σ²)`.
    pub fn log_likelihood(&self, data: &[Observation]) -> f64 {
        -self.sse(data) / (2.0 * self.noise_var)
    }

    /// Sum of squared residuals over `data`.
    pub fn sse(&self, data: &[Observation]) -> f64 {
        let mut scratch = Scratch::default();
        data.iter()
            .map(|o| {
                let r = o.target - self.predict_features(&o.features, &mut scratch);
                r * r
            })
            .sum()
    }

    /// `−Σ_k tr(U^(k)ᵀU^(k)) / (2σ_u²) − wᵀw / (2σ_w²)`.
    pub fn log_prior(&self) -> f64 {
        let u: f64 = self.weights.factors.iter().map(Matrix::frobenius_sq).sum();
        let w: f64 = self.weights.core.data().iter().map(|x| x * x).sum();
        -u / (2.0 * self.prior_u_var) - w / (2.0 * self.prior_w_var)
    }

    pub fn log_joint(&self, data: &[Observation]) -> f64 {
        self.log_likelihood(data) + self.log_prior()
    }

    /// Root mean squared error over `data`; zero for empty data.
    pub fn rmse(&self, data: &[Observation]) -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        (self.sse(data) / data.len() as f64).sqrt()
    }

    /// Prior gradient plus `scale` times the summed likelihood gradient over `batch`.
    pub fn grad_log_joint(&self, batch: &[Observation], scale: f64) -> Result<GradientBundle> {
        let mut grad = GradientBundle::zeros_like(&self.weights);
        self.grad_log_joint_into(batch, scale, &mut grad, &mut Scratch::default())?;
        Ok(grad)
    }

    /// [`grad_log_joint`](Self::grad_log_joint) writing into an existing bundle.
    pub fn grad_log_joint_into(
        &self,
        batch: &[Observation],
        scale: f64,
        grad: &mut GradientBundle,
        scratch: &mut Scratch,
    ) -> Result<()> {
        self.grad_accumulate(batch.iter(), batch.is_empty(), scale, grad, scratch)
    }

    /// Gradient over the rows `data[i]` for `i` in `indices`.
    pub fn grad_log_joint_subset(
        &self,
        data: &[Observation],
        indices: &[usize],
        scale: f64,
        grad: &mut GradientBundle,
        scratch: &mut Scratch,
    ) -> Result<()> {
        self.grad_accumulate(indices.iter().map(|&i| &data[i]), indices.is_empty(), scale, grad, scratch)
    }

    fn grad_accumulate<'a>(
        &self,
        batch: impl Iterator<Item = &'a Observation>,
        empty: bool,
        scale: f64,
        grad: &mut GradientBundle,
        scratch: &mut Scratch,
    ) -> Result<()> {
        if empty && scale != 0.0 {
            return Err(TgpError::Empty("gradient batch"));
        }
        grad.fill_zero();
        let w = &self.weights;
        let inv_w = -1.0 / self.prior_w_var;
        for (g, &x) in grad.grad_w.data_mut().iter_mut().zip(w.core.data()) {
            *g = inv_w * x;
        }
        let inv_u = -1.0 / self.prior_u_var;
        for (g, u) in grad.grad_u.iter_mut().zip(&w.factors) {
            for (gi, &x) in g.as_mut_slice().iter_mut().zip(u.as_slice()) {
                *gi = inv_u * x;
            }
        }
        if scale == 0.0 {
            return Ok(());
        }
        let Scratch {
            psi,
            buf,
            out,
            kron,
            kron_next,
        } = scratch;
        if w.order() == 2 {
            let r1 = w.core.dims()[1];
            let core = w.core.data();
            for obs in batch {
                project_all(w, &obs.features, psi);
                let (p0, p1) = (&psi[0], &psi[1]);
                // out = W ψ₁, buf = Wᵀ ψ₀.
                out.clear();
                out.extend(core.chunks_exact(r1).map(|row| dot(row, p1)));
                let f = dot(p0, out);
                let c = scale * (obs.target - f) / self.noise_var;
                if c == 0.0 {
                    continue;
                }
                buf.clear();
                buf.resize(r1, 0.0);
                let gw = grad.grad_w.data_mut();
                for ((row, grow), &a) in core.chunks_exact(r1).zip(gw.chunks_exact_mut(r1)).zip(p0.iter()) {
                    let ca = c * a;
                    for j in 0..r1 {
                        buf[j] += a * row[j];
                        grow[j] += ca * p1[j];
                    }
                }
                obs.features[0].add_outer(&mut grad.grad_u[0], c, out);
                obs.features[1].add_outer(&mut grad.grad_u[1], c, buf);
            }
            return Ok(());
        }
        for obs in batch {
            project_all(w, &obs.features, psi);
            let psi_ref: Vec<&[f64]> = psi.iter().map(Vec::as_slice).collect();
            let f = full_contract_unchecked(&w.core, &psi_ref, buf);
            let c = scale * (obs.target - f) / self.noise_var;
            if c == 0.0 {
                continue;
            }
            kron_into_buf(&psi_ref, kron, kron_next);
            for (g, &k) in grad.grad_w.data_mut().iter_mut().zip(kron.iter()) {
                *g += c * k;
            }
            for (k, phi) in obs.features.iter().enumerate() {
                contract_all_but_one_unchecked(&w.core, &psi_ref, k, buf, out);
                phi.add_outer(&mut grad.grad_u[k], c, out);
            }
        }
        Ok(())
    }

    /// Entries `W_{i₁..i_D} ∏_d ψ_d(x)_{i_d}`; they sum to `f(x)`.
    pub fn additive_components(&self, x: &[Coord]) -> Result<DenseTensor> {
        self.additive_components_with_limit(x, DEFAULT_RECONSTRUCT_LIMIT)
    }

    pub fn additive_components_with_limit(&self, x: &[Coord], limit: usize) -> Result<DenseTensor> {
        let requested = self.weights.core.len();
        if requested > limit {
            return Err(TgpError::SizeLimit { requested, limit });
        }
        let psi = self.projections(x)?;
        let refs: Vec<&[f64]> = psi.iter().map(Vec::as_slice).collect();
        let mut kron = Vec::new();
        kron_into_buf(&refs, &mut kron, &mut Vec::new());
        let data = self.weights.core.data().iter().zip(&kron).map(|(w, k)| w * k).collect();
        DenseTensor::new(self.weights.core.dims().to_vec(), data)
    }
}

/// `f(x)` under `weights` for features of matching lengths.
pub fn evaluate(weights: &TuckerWeights, features: &[FeatureVec], scratch: &mut Scratch) -> f64 {
    project_all(weights, features, &mut scratch.psi);
    let psi: Vec<&[f64]> = scratch.psi.iter().map(Vec::as_slice).collect();
    full_contract_unchecked(&weights.core, &psi, &mut scratch.buf)
}

fn project_all(w: &TuckerWeights, features: &[FeatureVec], psi: &mut Vec<Vec<f64>>) {
    psi.resize_with(features.len(), Vec::new);
    for ((p, phi), u) in psi.iter_mut().zip(features).zip(&w.factors) {
        p.resize(u.cols(), 0.0);
        phi.project(u, p);
    }
}

/// Draws `W ~ N(0, σ_w²)` (extent `rank` in each of `rows.len()` modes) and
/// `U^(d) ~ N(0, σ_u²)` with `rows[d]` rows.
///
/// Each block uses its own ChaCha stream (core 0, factor `d` stream `d + 1`)
/// and fills row-major, so appending rows to a factor leaves the existing rows
/// unchanged for the same seed.
pub fn sample_prior(rows: &[usize], rank: usize, prior_u_var: f64, prior_w_var: f64, seed: u64) -> Result<TuckerWeights> {
    if rank < 1 || rows.is_empty() || rows.iter().any(|&n| n < 1) {
        return Err(TgpError::invalid("prior sampling needs rank ≥ 1 and every n_d ≥ 1"));
    }
    if !(prior_u_var >= 0.0 && prior_w_var >= 0.0) {
        return Err(TgpError::invalid("prior variances must be non-negative"));
    }
    let mut weights = TuckerWeights::zeros(rows, &vec![rank; rows.len()])?;
    fill_normal(weights.core.data_mut(), prior_w_var.sqrt(), seed, 0);
    for (d, u) in weights.factors.iter_mut().enumerate() {
        fill_normal(u.as_mut_slice(), prior_u_var.sqrt(), seed, d as u64 + 1);
    }
    Ok(weights)
}

pub(crate) fn fill_normal(out: &mut [f64], sd: f64, seed: u64, stream: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    for x in out {
        let z: f64 = StandardNormal.sample(&mut rng);
        *x = sd * z;
    }
}
