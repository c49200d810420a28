//! Patch projection, Shepard merging and the end-to-end denoiser.
//!
//! ```text
//! image -> patches -> kNN graph -> geodesics -> Gramian -> top-L right
//!       singular vectors -> projected patches -> merged image -> clamp
//! ```
//!
//! The stages are exposed separately ([`spectral_basis_input`],
//! [`reconstruct`]) so callers can cache the Gramian across ranks or time
//! the backend on its own.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::gramian::{gramian_from_distances, GramianMatrix};
use crate::image::GrayImage;
use crate::linalg::{pairwise_sum, Matrix};
use crate::lowrank::{compute_owned, Backend, BackendOptions, SingularTriplets};
use crate::patchgraph::{check_rho, extract_patches, geodesic_distances, knn_graph, GeodesicAlgorithm, PatchMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct DenoiseParams {
    /// Neighbours per patch in the kNN graph.
    pub delta: usize,
    /// Odd patch side, at least 3.
    pub rho: usize,
    /// Number of right singular vectors kept.
    pub rank: usize,
    pub backend: Backend,
    /// Backend tuning. Its `seed` is replaced by [`DenoiseParams::seed`].
    pub backend_options: BackendOptions,
    pub geodesic_algorithm: GeodesicAlgorithm,
    pub seed: u64,
}

impl DenoiseParams {
    /// Exact backend, Dijkstra geodesics, seed 0.
    pub fn new(delta: usize, rho: usize, rank: usize) -> Self {
        Self {
            delta,
            rho,
            rank,
            backend: Backend::Exact,
            backend_options: BackendOptions::default(),
            geodesic_algorithm: GeodesicAlgorithm::DijkstraAll,
            seed: 0,
        }
    }

    pub fn with_backend(mut self, backend: Backend) -> Self {
        self.backend = backend;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Options actually handed to the backend.
    pub fn resolved_options(&self) -> BackendOptions {
        BackendOptions {
            seed: self.seed,
            ..self.backend_options.clone()
        }
    }

    pub fn validate(&self, rows: usize, cols: usize) -> Result<()> {
        check_rho(self.rho, rows, cols)?;
        let n = rows * cols;
        if self.delta == 0 || self.delta >= n {
            return Err(Error::param("delta", alloc::format!("must lie in 1..{n}")));
        }
        if self.rank == 0 || self.rank > n {
            return Err(Error::param("rank", alloc::format!("must lie in 1..={n}")));
        }
        self.backend_options.validate()
    }
}

/// Denoised image plus what the backend reported.
#[derive(Debug, Clone)]
pub struct DenoiseOutcome {
    pub image: GrayImage,
    /// `None` when there was nothing to project (all patches identical).
    pub triplets: Option<SingularTriplets>,
}

impl DenoiseOutcome {
    /// False only when the backend stopped at its iteration limit.
    pub fn converged(&self) -> bool {
        self.triplets.as_ref().is_none_or(|t| t.converged)
    }
}

/// `P~ = V (Vᵀ P)`: every patch coordinate (a column of `P`, one entry per
/// pixel) is projected onto the span of the columns of `right`.
pub fn project_patches(patches: &PatchMatrix, right: &Matrix) -> Result<PatchMatrix> {
    let (rows, cols) = patches.image_shape();
    let p = patches.to_matrix();
    let projected = project_columns(&p, right)?;
    PatchMatrix::from_matrix(&projected, patches.rho(), rows, cols)
}

fn project_columns(p: &Matrix, right: &Matrix) -> Result<Matrix> {
    if right.rows() != p.rows() || right.cols() == 0 {
        return Err(Error::DimensionMismatch {
            expected: (p.rows(), right.cols().max(1)),
            found: right.shape(),
        });
    }
    Ok(right.mul(&right.tr_mul(p)))
}

/// Projection of the mean-centred patch coordinates, with the means added
/// back. The Gramian annihilates the constant vector, so the plain
/// projection would also remove the mean brightness of every coordinate.
pub fn project_patches_centered(patches: &PatchMatrix, right: &Matrix) -> Result<PatchMatrix> {
    let (rows, cols) = patches.image_shape();
    let (centered, means) = center_columns(patches.to_matrix());
    let mut projected = project_columns(&centered, right)?;
    add_column_means(&mut projected, &means);
    PatchMatrix::from_matrix(&projected, patches.rho(), rows, cols)
}

fn center_columns(mut p: Matrix) -> (Matrix, Vec<f64>) {
    let n = p.rows() as f64;
    let means: Vec<f64> = p.columns().map(|c| pairwise_sum(c) / n).collect();
    for (j, &m) in means.iter().enumerate() {
        p.col_mut(j).iter_mut().for_each(|x| *x -= m);
    }
    (p, means)
}

fn add_column_means(p: &mut Matrix, means: &[f64]) {
    for (j, &m) in means.iter().enumerate() {
        p.col_mut(j).iter_mut().for_each(|x| *x += m);
    }
}

/// Normalized weights `exp(-|d|^2) / sum` for the given pixel offsets.
pub fn shepard_weights(offsets: &[(isize, isize)]) -> Vec<f64> {
    let raw: Vec<f64> = offsets
        .iter()
        .map(|&(di, dj)| libm::exp(-((di * di + dj * dj) as f64)))
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Every pixel is the weighted mean of its value in all patches whose
/// centre lies within `(rho - 1) / 2` in the max-norm. Only in-image
/// centres count, so a patch contributes exactly the pixel its window
/// covers at that offset.
pub fn shepard_merge(patches: &PatchMatrix) -> Result<GrayImage> {
    let (rows, cols) = patches.image_shape();
    let rho = patches.rho();
    let half = (rho / 2) as isize;
    let weight: Vec<f64> = (-half..=half)
        .flat_map(|di| (-half..=half).map(move |dj| libm::exp(-((di * di + dj * dj) as f64))))
        .collect();
    let mut out = vec![0.0; rows * cols];
    for i in 0..rows as isize {
        for j in 0..cols as isize {
            let (mut acc, mut total) = (0.0, 0.0);
            for di in -half..=half {
                let ti = i - di;
                if ti < 0 || ti >= rows as isize {
                    continue;
                }
                for dj in -half..=half {
                    let tj = j - dj;
                    if tj < 0 || tj >= cols as isize {
                        continue;
                    }
                    let slot = ((di + half) as usize) * rho + (dj + half) as usize;
                    let w = weight[slot];
                    let t = ti as usize * cols + tj as usize;
                    acc += w * patches.row(t)[slot];
                    total += w;
                }
            }
            out[i as usize * cols + j as usize] = acc / total;
        }
    }
    GrayImage::new(rows, cols, out)
}

/// True when every patch coordinate is equal (a constant image), in which
/// case [`denoise`] returns its input unchanged.
pub fn uniform_patches(patches: &PatchMatrix) -> bool {
    let data = patches.as_slice();
    data.iter().all(|&x| x == data[0])
}

/// Patches and Gramian for `image`; the expensive, rank-independent part of
/// [`denoise`].
pub fn spectral_basis_input(
    image: &GrayImage,
    delta: usize,
    rho: usize,
    algorithm: GeodesicAlgorithm,
) -> Result<(PatchMatrix, GramianMatrix)> {
    let patches = extract_patches(image, rho)?;
    let graph = knn_graph(&patches, delta)?;
    let distances = geodesic_distances(&graph, algorithm)?;
    Ok((patches, gramian_from_distances(distances)?))
}

/// Centred projection onto `right`, Shepard merge and clamping.
pub fn reconstruct(patches: &PatchMatrix, right: &Matrix) -> Result<GrayImage> {
    Ok(shepard_merge(&project_patches_centered(patches, right)?)?.clamp_to_range())
}

pub fn denoise(image: &GrayImage, params: &DenoiseParams) -> Result<GrayImage> {
    denoise_with_report(image, params).map(|o| o.image)
}

/// [`denoise`], also returning the backend's triplets so callers can warn on
/// non-convergence.
pub fn denoise_with_report(image: &GrayImage, params: &DenoiseParams) -> Result<DenoiseOutcome> {
    denoise_observed(image, params, |_| {})
}

/// Pipeline stages in execution order, as reported by [`denoise_observed`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Patches,
    Graph,
    Geodesic,
    Gramian,
    Backend,
    Merge,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Patches,
        Stage::Graph,
        Stage::Geodesic,
        Stage::Gramian,
        Stage::Backend,
        Stage::Merge,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Patches => "patches",
            Stage::Graph => "graph",
            Stage::Geodesic => "geodesic",
            Stage::Gramian => "gramian",
            Stage::Backend => "backend",
            Stage::Merge => "merge",
        }
    }
}

/// [`denoise_with_report`], calling `on_stage` as each stage finishes. For a
/// constant input only [`Stage::Patches`] is reported.
pub fn denoise_observed(
    image: &GrayImage,
    params: &DenoiseParams,
    mut on_stage: impl FnMut(Stage),
) -> Result<DenoiseOutcome> {
    params.validate(image.rows(), image.cols())?;
    let patches = extract_patches(image, params.rho)?;
    on_stage(Stage::Patches);
    if uniform_patches(&patches) {
        // Centred patches are zero, so every basis returns the input.
        return Ok(DenoiseOutcome {
            image: image.clamp_to_range(),
            triplets: None,
        });
    }
    let graph = knn_graph(&patches, params.delta)?;
    on_stage(Stage::Graph);
    let distances = geodesic_distances(&graph, params.geodesic_algorithm)?;
    on_stage(Stage::Geodesic);
    let gramian = gramian_from_distances(distances)?;
    on_stage(Stage::Gramian);
    let triplets = compute_owned(
        gramian.into_matrix(),
        params.rank,
        params.backend,
        &params.resolved_options(),
    )?;
    on_stage(Stage::Backend);
    let image = reconstruct(&patches, &triplets.right)?;
    on_stage(Stage::Merge);
    Ok(DenoiseOutcome {
        image,
        triplets: Some(triplets),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::thin_qr;
    use crate::metrics::psnr;
    use crate::noise::{contaminate, NoiseSpec};
    use crate::rng::Stream;
    use proptest::prelude::*;

    fn textured(rows: usize, cols: usize) -> GrayImage {
        GrayImage::from_fn(rows, cols, |i, j| {
            let (x, y) = (i as f64, j as f64);
            128.0 + 70.0 * libm::sin(0.45 * x) * libm::cos(0.3 * y) + if (i / 5 + j / 5) % 2 == 0 { 25.0 } else { -25.0 }
        })
        .unwrap()
    }

    fn orthonormal(n: usize, k: usize, seed: u64) -> Matrix {
        let mut s = Stream::new(seed);
        thin_qr(&Matrix::from_fn(n, k, |_, _| s.gaussian())).q
    }

    #[test]
    fn full_basis_projection_is_identity() {
        let patches = extract_patches(&textured(5, 6), 3).unwrap();
        let v = orthonormal(30, 30, 1);
        let out = project_patches(&patches, &v).unwrap();
        let diff = out.as_slice().iter().zip(patches.as_slice()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-10);
    }

    #[test]
    fn orthogonal_basis_annihilates() {
        // Constant coordinates against a basis orthogonal to the ones vector.
        let patches = extract_patches(&GrayImage::filled(4, 4, 90.0).unwrap(), 3).unwrap();
        let mut v = Matrix::zeros(16, 2);
        v[(0, 0)] = libm::sqrt(0.5);
        v[(1, 0)] = -libm::sqrt(0.5);
        v[(2, 1)] = libm::sqrt(0.5);
        v[(3, 1)] = -libm::sqrt(0.5);
        let out = project_patches(&patches, &v).unwrap();
        assert!(out.as_slice().iter().all(|x| x.abs() < 1e-12));
        let centred = project_patches_centered(&patches, &v).unwrap();
        assert!(centred.as_slice().iter().all(|x| (x - 90.0).abs() < 1e-12));
    }

    #[test]
    fn projection_dimension_mismatch() {
        let patches = extract_patches(&textured(5, 5), 3).unwrap();
        assert!(project_patches(&patches, &Matrix::identity(24)).is_err());
    }

    #[test]
    fn merge_of_unprojected_patches_recovers_image() {
        for rho in [3, 5, 7] {
            let img = textured(11, 9);
            let merged = shepard_merge(&extract_patches(&img, rho).unwrap()).unwrap();
            let err = merged.pixels().iter().zip(img.pixels()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-10, "rho {rho}: {err}");
        }
    }

    #[test]
    fn weight_normalization() {
        assert_eq!(shepard_weights(&[(1, 1)]), [1.0]);
        assert_eq!(shepard_weights(&[(0, 1), (-1, 0)]), [0.5, 0.5]);
        let w = shepard_weights(&[(0, 0), (1, 0), (1, 1)]);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(w[0] > w[1] && w[1] > w[2]);
    }

    #[test]
    fn merge_matches_explicit_weights_at_a_corner() {
        // Pixel (0, 0) with rho = 3 is covered by centres (0,0), (0,1), (1,0), (1,1).
        let img = textured(6, 6);
        let mut patches = extract_patches(&img, 3).unwrap();
        let mut s = Stream::new(5);
        let mut m = patches.to_matrix();
        m.as_mut_slice().iter_mut().for_each(|x| *x += s.gaussian());
        patches = PatchMatrix::from_matrix(&m, 3, 6, 6).unwrap();
        let merged = shepard_merge(&patches).unwrap();
        let w = shepard_weights(&[(0, 0), (0, -1), (-1, 0), (-1, -1)]);
        let value = |t: usize, slot: usize| patches.row(t)[slot];
        let want = w[0] * value(0, 4) + w[1] * value(1, 3) + w[2] * value(6, 1) + w[3] * value(7, 0);
        assert!((merged.get(0, 0) - want).abs() < 1e-12);
    }

    #[test]
    fn constant_image_is_fixed_point() {
        let img = GrayImage::filled(8, 8, 77.0).unwrap();
        for backend in Backend::ALL {
            let params = DenoiseParams::new(4, 3, 3).with_backend(backend);
            assert_eq!(denoise(&img, &params).unwrap(), img, "{backend}");
        }
    }

    #[test]
    fn stages_reported_in_order() {
        let mut seen = Vec::new();
        let params = DenoiseParams::new(5, 3, 4);
        denoise_observed(&textured(10, 10), &params, |s| seen.push(s)).unwrap();
        assert_eq!(seen, Stage::ALL);

        seen.clear();
        denoise_observed(&GrayImage::filled(6, 6, 3.0).unwrap(), &params, |s| seen.push(s)).unwrap();
        assert_eq!(seen, [Stage::Patches]);
    }

    #[test]
    fn denoising_improves_psnr() {
        let clean = textured(24, 24);
        let noisy = contaminate(&clean, &NoiseSpec::new(25.0, 3).unwrap());
        let params = DenoiseParams::new(8, 5, 12);
        let out = denoise(&noisy, &params).unwrap();
        assert!(psnr(&clean, &out).unwrap() > psnr(&clean, &noisy).unwrap() + 1.0);
    }

    #[test]
    fn backends_agree_on_small_image() {
        let clean = textured(20, 20);
        let noisy = contaminate(&clean, &NoiseSpec::new(20.0, 8).unwrap());
        let base = DenoiseParams::new(6, 3, 8);
        let exact = psnr(&clean, &denoise(&noisy, &base).unwrap()).unwrap();
        for backend in [Backend::Alb, Backend::Pime] {
            let out = denoise(&noisy, &base.clone().with_backend(backend)).unwrap();
            let p = psnr(&clean, &out).unwrap();
            assert!((p - exact).abs() < 0.5, "{backend}: {p} vs {exact}");
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let img = textured(6, 6);
        assert!(denoise(&img, &DenoiseParams::new(0, 3, 2)).is_err());
        assert!(denoise(&img, &DenoiseParams::new(36, 3, 2)).is_err());
        assert!(denoise(&img, &DenoiseParams::new(3, 4, 2)).is_err());
        assert!(denoise(&img, &DenoiseParams::new(3, 3, 37)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn projection_is_idempotent(seed in 0u64..1000, k in 1usize..20) {
            let patches = extract_patches(&textured(5, 5), 3).unwrap();
            let v = orthonormal(25, k, seed);
            let once = project_patches(&patches, &v).unwrap();
            let twice = project_patches(&once, &v).unwrap();
            let scale = once.as_slice().iter().fold(1.0_f64, |m, x| m.max(x.abs()));
            for (a, b) in once.as_slice().iter().zip(twice.as_slice()) {
                prop_assert!((a - b).abs() <= 1e-12 * scale);
            }
        }

        #[test]
        fn output_stays_in_range(seed in 0u64..1000, sigma in 0.0f64..120.0) {
            let noisy = contaminate(&textured(10, 10), &NoiseSpec::new(sigma, seed).unwrap());
            let out = denoise(&noisy, &DenoiseParams::new(4, 3, 3)).unwrap();
            prop_assert!(out.pixels().iter().all(|&p| (0.0..=255.0).contains(&p)));
        }
    }
}
