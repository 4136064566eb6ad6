//! Per-dimension feature maps `φ_d` with `k_d(x, x') ≈ φ_d(x)ᵀ φ_d(x')`.
//!
//! Identity, Cholesky-grid and inducing-complete Nyström features reproduce
//! their kernel exactly; random Fourier and hashed features are unbiased
//! Monte Carlo approximations whose draws are fixed at construction and
//! serialised with the model.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TgpError};
use crate::input::Coord;
use crate::kernels::KernelSpec;
use crate::linalg::{cholesky_jittered, forward_substitute, Matrix};

/// Largest axis accepted by [`build_cholesky_features`] unless a limit is given.
pub const DEFAULT_GRID_AXIS_LIMIT: usize = 8_000;

/// A feature vector, kept sparse where the map allows it.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureVec {
    /// Unit vector `e_index`.
    Unit { index: usize, len: usize },
    /// Sparse vector with distinct, in-range indices.
    Sparse { len: usize, entries: Vec<(usize, f64)> },
    Dense(Vec<f64>),
}

impl FeatureVec {
    pub fn len(&self) -> usize {
        match self {
            FeatureVec::Unit { len, .. } | FeatureVec::Sparse { len, .. } => *len,
            FeatureVec::Dense(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_dense(&self) -> Vec<f64> {
        match self {
            FeatureVec::Unit { index, len } => {
                let mut v = vec![0.0; *len];
                v[*index] = 1.0;
                v
            }
            FeatureVec::Sparse { len, entries } => {
                let mut v = vec![0.0; *len];
                for &(i, x) in entries {
                    v[i] += x;
                }
                v
            }
            FeatureVec::Dense(v) => v.clone(),
        }
    }

    pub fn dot(&self, other: &FeatureVec) -> f64 {
        match (self, other) {
            (FeatureVec::Dense(a), FeatureVec::Dense(b)) => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            (FeatureVec::Dense(a), sparse) | (sparse, FeatureVec::Dense(a)) => {
                sparse.for_each_nonzero_sum(|i, x| x * a[i])
            }
            _ => {
                let b = other.to_dense();
                self.for_each_nonzero_sum(|i, x| x * b[i])
            }
        }
    }

    fn for_each_nonzero_sum(&self, mut f: impl FnMut(usize, f64) -> f64) -> f64 {
        match self {
            FeatureVec::Unit { index, .. } => f(*index, 1.0),
            FeatureVec::Sparse { entries, .. } => entries.iter().map(|&(i, x)| f(i, x)).sum(),
            FeatureVec::Dense(v) => v.iter().enumerate().map(|(i, &x)| f(i, x)).sum(),
        }
    }

    /// `out = Uᵀ φ` for a factor matrix `U` with `len()` rows.
    pub fn project(&self, u: &Matrix, out: &mut [f64]) {
        match self {
            FeatureVec::Unit { index, .. } => out.copy_from_slice(u.row(*index)),
            FeatureVec::Sparse { entries, .. } => {
                out.iter_mut().for_each(|o| *o = 0.0);
                for &(i, x) in entries {
                    for (o, &w) in out.iter_mut().zip(u.row(i)) {
                        *o += x * w;
                    }
                }
            }
            FeatureVec::Dense(v) => {
                out.iter_mut().for_each(|o| *o = 0.0);
                for (i, &x) in v.iter().enumerate() {
                    if x == 0.0 {
                        continue;
                    }
                    for (o, &w) in out.iter_mut().zip(u.row(i)) {
                        *o += x * w;
                    }
                }
            }
        }
    }

    /// `grad += coef · φ cᵀ`, touching only rows where `φ` is non-zero.
    pub fn add_outer(&self, grad: &mut Matrix, coef: f64, c: &[f64]) {
        let mut add_row = |i: usize, x: f64| {
            let s = coef * x;
            for (g, &cj) in grad.row_mut(i).iter_mut().zip(c) {
                *g += s * cj;
            }
        };
        match self {
            FeatureVec::Unit { index, .. } => add_row(*index, 1.0),
            FeatureVec::Sparse { entries, .. } => entries.iter().for_each(|&(i, x)| add_row(i, x)),
            FeatureVec::Dense(v) => v
                .iter()
                .enumerate()
                .filter(|(_, &x)| x != 0.0)
                .for_each(|(i, &x)| add_row(i, x)),
        }
    }
}

/// A constructed feature map for one input dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FeatureMap {
    /// Unit vectors over `cardinality` categories.
    Identity { cardinality: usize },
    /// Signed hashing of a base map into `buckets` outputs.
    Hashed {
        base: Box<FeatureMap>,
        buckets: usize,
        seed: u64,
    },
    /// Rows of the Cholesky factor of one grid axis' gram matrix.
    CholeskyGrid {
        points: Vec<Coord>,
        kernel: KernelSpec,
        factor: Matrix,
        jitter: f64,
    },
    /// `σ_f √(2/n) cos(v_kᵀx + b_k)`; `frequencies` is `n × input_dim`.
    RandomFourier {
        variance: f64,
        frequencies: Matrix,
        phases: Vec<f64>,
    },
    /// `L_nn⁻¹ k(Z, x)` for inducing points `Z`.
    Nystrom {
        inducing: Vec<Coord>,
        kernel: KernelSpec,
        factor: Matrix,
        jitter: f64,
    },
    /// `[a e_i ; b ω(i)]` with binary side vectors stored as index sets.
    SideAugmented {
        cardinality: usize,
        id_weight: f64,
        side_weight: f64,
        side_len: usize,
        side_sets: Vec<Vec<usize>>,
    },
}

impl FeatureMap {
    pub fn identity(cardinality: usize) -> Self {
        FeatureMap::Identity { cardinality }
    }

    pub fn output_len(&self) -> usize {
        match self {
            FeatureMap::Identity { cardinality } => *cardinality,
            FeatureMap::Hashed { buckets, .. } => *buckets,
            FeatureMap::CholeskyGrid { points, .. } => points.len(),
            FeatureMap::RandomFourier { phases, .. } => phases.len(),
            FeatureMap::Nystrom { inducing, .. } => inducing.len(),
            FeatureMap::SideAugmented {
                cardinality,
                side_len,
                ..
            } => cardinality + side_len,
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, FeatureMap::Identity { .. })
    }

    pub fn apply(&self, x: &Coord) -> Result<FeatureVec> {
        match self {
            FeatureMap::Identity { cardinality } => {
                let i = x.category()?;
                check_index(i, *cardinality)?;
                Ok(FeatureVec::Unit {
                    index: i,
                    len: *cardinality,
                })
            }
            FeatureMap::Hashed { base, buckets, seed } => {
                let inner = base.apply(x)?;
                let mut dense = vec![0.0; *buckets];
                let mut scatter = |i: usize, v: f64| {
                    dense[hash_bucket(*seed, i, *buckets)] += hash_sign(*seed, i) * v;
                };
                match &inner {
                    FeatureVec::Unit { index, .. } => scatter(*index, 1.0),
                    FeatureVec::Sparse { entries, .. } => entries.iter().for_each(|&(i, v)| scatter(i, v)),
                    FeatureVec::Dense(v) => v.iter().enumerate().for_each(|(i, &v)| scatter(i, v)),
                }
                Ok(FeatureVec::Dense(dense))
            }
            FeatureMap::CholeskyGrid { points, factor, .. } => {
                let i = match x.id {
                    Some(i) => {
                        check_index(i, points.len())?;
                        i
                    }
                    None => points
                        .iter()
                        .position(|p| p.values == x.values)
                        .ok_or_else(|| TgpError::invalid("coordinate is not a point of the grid axis"))?,
                };
                Ok(FeatureVec::Dense(factor.row(i).to_vec()))
            }
            FeatureMap::RandomFourier {
                variance,
                frequencies,
                phases,
            } => {
                let xs = x.covariates()?;
                if xs.len() != frequencies.cols() {
                    return Err(TgpError::mismatch(format!(
                        "random Fourier map expects {} covariates, got {}",
                        frequencies.cols(),
                        xs.len()
                    )));
                }
                let n = phases.len();
                let scale = (variance * 2.0 / n as f64).sqrt();
                Ok(FeatureVec::Dense(
                    phases
                        .iter()
                        .enumerate()
                        .map(|(k, b)| {
                            let arg: f64 = frequencies.row(k).iter().zip(xs).map(|(v, x)| v * x).sum();
                            scale * (arg + b).cos()
                        })
                        .collect(),
                ))
            }
            FeatureMap::Nystrom {
                inducing,
                kernel,
                factor,
                ..
            } => {
                let kx = inducing
                    .iter()
                    .map(|z| kernel.eval(z, x))
                    .collect::<Result<Vec<f64>>>()?;
                Ok(FeatureVec::Dense(forward_substitute(factor, &kx)))
            }
            FeatureMap::SideAugmented {
                cardinality,
                id_weight,
                side_weight,
                side_sets,
                ..
            } => {
                let i = x.category()?;
                check_index(i, *cardinality)?;
                let mut entries = Vec::with_capacity(1 + side_sets[i].len());
                if *id_weight != 0.0 {
                    entries.push((i, *id_weight));
                }
                if *side_weight != 0.0 {
                    entries.extend(side_sets[i].iter().map(|&k| (cardinality + k, *side_weight)));
                }
                Ok(FeatureVec::Sparse {
                    len: self.output_len(),
                    entries,
                })
            }
        }
    }
}

fn check_index(i: usize, n: usize) -> Result<()> {
    if i < n {
        Ok(())
    } else {
        Err(TgpError::IndexOutOfRange { index: i, size: n })
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Bucket `h(i) ∈ [0, m)` for hash seed `seed`.
pub fn hash_bucket(seed: u64, i: usize, m: usize) -> usize {
    let x = splitmix64(splitmix64(seed) ^ i as u64);
    ((x as u128 * m as u128) >> 64) as usize
}

/// Sign `ξ(i) ∈ {±1}` from a mix independent of [`hash_bucket`].
pub fn hash_sign(seed: u64, i: usize) -> f64 {
    let x = splitmix64(splitmix64(seed ^ 0xD1B5_4A32_D192_ED03) ^ i as u64);
    if x >> 63 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Unit vector `e_i` of length `n`.
pub fn identity_features(i: usize, n: usize) -> Result<Vec<f64>> {
    check_index(i, n)?;
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    Ok(v)
}

/// `φ̄_j = Σ_{i : h(i) = j} ξ(i) φ_i`.
pub fn hash_features(base: &[f64], m: usize, seed: u64) -> Result<Vec<f64>> {
    if m < 1 {
        return Err(TgpError::invalid("hashed feature length must be at least 1"));
    }
    let mut out = vec![0.0; m];
    for (i, &v) in base.iter().enumerate() {
        out[hash_bucket(seed, i, m)] += hash_sign(seed, i) * v;
    }
    Ok(out)
}

/// Wraps `base` so its outputs are hashed down to `m` entries.
pub fn hashed(base: FeatureMap, m: usize, seed: u64) -> Result<FeatureMap> {
    if m < 1 {
        return Err(TgpError::invalid("hashed feature length must be at least 1"));
    }
    Ok(FeatureMap::Hashed {
        base: Box::new(base),
        buckets: m,
        seed,
    })
}

/// Cholesky features for one grid axis.
pub fn build_cholesky_features(points: Vec<Coord>, kernel: KernelSpec) -> Result<FeatureMap> {
    build_cholesky_features_with_limit(points, kernel, DEFAULT_GRID_AXIS_LIMIT)
}

pub fn build_cholesky_features_with_limit(
    points: Vec<Coord>,
    kernel: KernelSpec,
    limit: usize,
) -> Result<FeatureMap> {
    kernel.validate()?;
    if points.len() > limit {
        return Err(TgpError::SizeLimit {
            requested: points.len(),
            limit,
        });
    }
    let k = kernel.gram(&points)?;
    let (factor, jitter) = cholesky_jittered(&k)?;
    Ok(FeatureMap::CholeskyGrid {
        points,
        kernel,
        factor,
        jitter,
    })
}

/// Cholesky features for every axis of a grid.
pub fn build_grid_features(axes: Vec<Vec<Coord>>, kernels: Vec<KernelSpec>) -> Result<Vec<FeatureMap>> {
    if axes.len() != kernels.len() {
        return Err(TgpError::mismatch(format!(
            "{} grid axes but {} kernels",
            axes.len(),
            kernels.len()
        )));
    }
    axes.into_iter()
        .zip(kernels)
        .map(|(p, k)| build_cholesky_features(p, k))
        .collect()
}

/// Random Fourier features for a squared-exponential kernel on `input_dim` covariates.
pub fn build_rff(spec: &KernelSpec, n: usize, input_dim: usize, seed: u64) -> Result<FeatureMap> {
    spec.validate()?;
    let KernelSpec::SquaredExponential {
        variance,
        lengthscales,
    } = spec
    else {
        return Err(TgpError::invalid(
            "random Fourier features need a squared exponential kernel",
        ));
    };
    if n < 1 || input_dim < 1 {
        return Err(TgpError::invalid("random Fourier features need n ≥ 1 and input_dim ≥ 1"));
    }
    let scales: Vec<f64> = if lengthscales.len() == 1 {
        vec![1.0 / lengthscales[0]; input_dim]
    } else if lengthscales.len() == input_dim {
        lengthscales.iter().map(|l| 1.0 / l).collect()
    } else {
        return Err(TgpError::mismatch(format!(
            "{} lengthscales for {input_dim} covariates",
            lengthscales.len()
        )));
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut frequencies = Matrix::zeros(n, input_dim);
    for k in 0..n {
        for (c, s) in scales.iter().enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            frequencies[(k, c)] = z * s;
        }
    }
    let phases = (0..n).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
    Ok(FeatureMap::RandomFourier {
        variance: *variance,
        frequencies,
        phases,
    })
}

/// Nyström features from a set of inducing points.
pub fn build_nystrom(spec: KernelSpec, inducing: Vec<Coord>) -> Result<FeatureMap> {
    spec.validate()?;
    let k = spec.gram(&inducing)?;
    let (factor, jitter) = cholesky_jittered(&k)?;
    Ok(FeatureMap::Nystrom {
        inducing,
        kernel: spec,
        factor,
        jitter,
    })
}

/// Side-augmented map over `cardinality` ids; `side_sets[i]` lists the non-zeros of `ω(i)`.
pub fn side_augmented(
    cardinality: usize,
    side_len: usize,
    side_sets: Vec<Vec<usize>>,
    a: f64,
    b: f64,
) -> Result<FeatureMap> {
    if !(a >= 0.0 && b >= 0.0) {
        return Err(TgpError::invalid("side-information weights must be non-negative"));
    }
    if side_sets.len() != cardinality {
        return Err(TgpError::mismatch(format!(
            "{} side vectors for {cardinality} ids",
            side_sets.len()
        )));
    }
    if let Some(&k) = side_sets.iter().flatten().find(|&&k| k >= side_len) {
        return Err(TgpError::IndexOutOfRange {
            index: k,
            size: side_len,
        });
    }
    Ok(FeatureMap::SideAugmented {
        cardinality,
        id_weight: a,
        side_weight: b,
        side_len,
        side_sets,
    })
}

/// `[a e_i ; b ω]`.
pub fn augment_side_info(i: usize, n: usize, omega: &[f64], a: f64, b: f64) -> Result<Vec<f64>> {
    if !(a >= 0.0 && b >= 0.0) {
        return Err(TgpError::invalid("side-information weights must be non-negative"));
    }
    let mut v = identity_features(i, n)?;
    v[i] = a;
    v.extend(omega.iter().map(|w| b * w));
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot;

    #[test]
    fn identity_examples() {
        assert_eq!(identity_features(0, 3).unwrap(), vec![1.0, 0.0, 0.0]);
        assert!(identity_features(3, 3).is_err());
        for i in 0..3 {
            for j in 0..3 {
                let d = dot(&identity_features(i, 3).unwrap(), &identity_features(j, 3).unwrap());
                assert_eq!(d, if i == j { 1.0 } else { 0.0 });
            }
        }
        let u = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        let phi = FeatureMap::identity(3).apply(&Coord::id(1)).unwrap();
        let mut out = [0.0; 2];
        phi.project(&u, &mut out);
        assert_eq!(out, [3.0, 4.0]);
    }

    #[test]
    fn hashing_zero_and_length() {
        assert_eq!(hash_features(&[0.0; 10], 4, 9).unwrap(), vec![0.0; 4]);
        assert!(hash_features(&[1.0], 0, 9).is_err());
        let a = hash_features(&[1.0, 2.0, 3.0], 5, 42).unwrap();
        assert_eq!(a, hash_features(&[1.0, 2.0, 3.0], 5, 42).unwrap());
    }

    #[test]
    fn collision_free_hash_preserves_inner_products() {
        // Search for a seed whose bucket map is injective for n = m = 4.
        let n = 4;
        let seed = (0u64..10_000)
            .find(|&s| {
                let mut seen = vec![false; n];
                (0..n).all(|i| !std::mem::replace(&mut seen[hash_bucket(s, i, n)], true))
            })
            .unwrap();
        let x = [1.0, -2.0, 0.5, 3.0];
        let y = [0.3, 0.7, -1.0, 2.0];
        let hx = hash_features(&x, n, seed).unwrap();
        let hy = hash_features(&y, n, seed).unwrap();
        assert_eq!(dot(&hx, &hy), dot(&x, &y));
        let mut sorted_abs: Vec<f64> = hx.iter().map(|v| v.abs()).collect();
        sorted_abs.sort_by(f64::total_cmp);
        assert_eq!(sorted_abs, vec![0.5, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn hashed_map_matches_free_function() {
        let base = FeatureMap::identity(10);
        let map = hashed(base, 4, 3).unwrap();
        let v = map.apply(&Coord::id(7)).unwrap().to_dense();
        assert_eq!(v, hash_features(&identity_features(7, 10).unwrap(), 4, 3).unwrap());
    }

    #[test]
    fn cholesky_delta_axis_gives_unit_vectors() {
        let pts: Vec<Coord> = (0..4).map(Coord::id).collect();
        let map = build_cholesky_features(pts, KernelSpec::Delta).unwrap();
        for i in 0..4 {
            assert_eq!(map.apply(&Coord::id(i)).unwrap().to_dense(), identity_features(i, 4).unwrap());
        }
    }

    #[test]
    fn cholesky_single_point() {
        let map = build_cholesky_features(vec![Coord::scalar(0.4)], KernelSpec::se(2.0, 1.0)).unwrap();
        let v = map.apply(&Coord::scalar(0.4)).unwrap().to_dense();
        assert!((v[0] - 2.0f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn cholesky_five_point_axis_reproduces_gram() {
        let pts: Vec<Coord> = [0.0, 0.7, 1.1, 2.0, 3.5].iter().map(|&x| Coord::scalar(x)).collect();
        let k = KernelSpec::se(1.3, 0.8);
        let gram = k.gram(&pts).unwrap();
        let map = build_cholesky_features(pts.clone(), k).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let d = map.apply(&Coord::id(i)).unwrap().dot(&map.apply(&Coord::id(j)).unwrap());
                assert!((d - gram[(i, j)]).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn cholesky_axis_limit() {
        let pts: Vec<Coord> = (0..5).map(Coord::id).collect();
        assert!(matches!(
            build_cholesky_features_with_limit(pts, KernelSpec::Delta, 4),
            Err(TgpError::SizeLimit { .. })
        ));
    }

    #[test]
    fn rff_components_are_bounded() {
        let n = 64;
        let map = build_rff(&KernelSpec::se(2.0, 0.5), n, 2, 11).unwrap();
        let bound = 2.0f64.sqrt() * (2.0 / n as f64).sqrt();
        let v = map.apply(&Coord::real(vec![0.3, -1.2])).unwrap().to_dense();
        assert_eq!(v.len(), n);
        assert!(v.iter().all(|x| x.abs() <= bound + 1e-15));
        assert!(build_rff(&KernelSpec::Delta, 4, 1, 0).is_err());
        assert!(map.apply(&Coord::scalar(1.0)).is_err());
    }

    #[test]
    fn nystrom_single_inducing_point() {
        let k = KernelSpec::se(3.0, 1.0);
        let map = build_nystrom(k, vec![Coord::scalar(1.0)]).unwrap();
        let v = map.apply(&Coord::scalar(1.0)).unwrap().to_dense();
        assert!((v[0] - 3.0f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn side_augmentation_examples() {
        let omega = [1.0, 0.0, 1.0];
        let v = augment_side_info(1, 3, &omega, 2.0, 0.0).unwrap();
        assert_eq!(v, vec![0.0, 2.0, 0.0, 0.0, 0.0, 0.0]);
        let v = augment_side_info(1, 3, &omega, 1.0, 1.0).unwrap();
        assert_eq!(dot(&v, &v), 1.0 + dot(&omega, &omega));
        let x = augment_side_info(0, 4, &[1.0, 1.0, 0.0, 1.0], 0.5, 0.3).unwrap();
        let y = augment_side_info(2, 4, &[1.0, 0.0, 1.0, 1.0], 0.5, 0.3).unwrap();
        assert!((dot(&x, &y) - 0.18).abs() < 1e-15);
        assert!(augment_side_info(4, 4, &omega, 1.0, 1.0).is_err());
        assert!(augment_side_info(0, 4, &omega, -1.0, 1.0).is_err());
    }

    #[test]
    fn side_augmented_map_matches_dense_builder() {
        let sets = vec![vec![0, 2], vec![], vec![1]];
        let map = side_augmented(3, 3, sets, 0.5, 0.3).unwrap();
        let v = map.apply(&Coord::id(0)).unwrap().to_dense();
        assert_eq!(v, augment_side_info(0, 3, &[1.0, 0.0, 1.0], 0.5, 0.3).unwrap());
        assert!(side_augmented(3, 3, vec![vec![3], vec![], vec![]], 1.0, 1.0).is_err());
    }

    #[test]
    fn sparse_and_dense_projections_agree() {
        let u = Matrix::from_fn(5, 3, |i, j| (i * 3 + j) as f64 * 0.1 - 0.4);
        let sparse = FeatureVec::Sparse {
            len: 5,
            entries: vec![(1, 0.5), (4, -2.0)],
        };
        let dense = FeatureVec::Dense(sparse.to_dense());
        let mut a = [0.0; 3];
        let mut b = [0.0; 3];
        sparse.project(&u, &mut a);
        dense.project(&u, &mut b);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-15);
        }
        let mut g1 = Matrix::zeros(5, 3);
        let mut g2 = Matrix::zeros(5, 3);
        sparse.add_outer(&mut g1, 2.0, &[1.0, 2.0, 3.0]);
        dense.add_outer(&mut g2, 2.0, &[1.0, 2.0, 3.0]);
        assert_eq!(g1, g2);
        assert!((sparse.dot(&dense) - 4.25).abs() < 1e-15);
    }
}
