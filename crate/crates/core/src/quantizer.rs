//! Voronoi assignment and the extended variance.
//!
//! For a configuration `x = (x_i)_{i∈I}` and kernel `Λ`, the per-observation
//! cost is `g_x(ω) = Σ_j Λ(c(ω) − j)‖x_j − ω‖²` where `c(ω)` is the nearest
//! centroid, ties going to the lexicographically smallest index. The
//! empirical extended variance is `V_n(x) = (1/2n) Σ_k g_x(ω_k)` and the
//! theoretical one is `V(x) = ½ E[g_x]`.

use rayon::prelude::*;

use crate::datagen::{draw_chunk, PointSampler};
use crate::error::{Error, Result};
use crate::lattice::NeighborhoodFunction;
use crate::rng::CHUNK;
use crate::sum::{CompensatedSum, MeanVar};

fn check_unit_cube(what: &str, coords: &[f64]) -> Result<()> {
    if let Some((pos, v)) = coords
        .iter()
        .enumerate()
        .find(|(_, v)| !(v.is_finite() && (0.0..=1.0).contains(*v)))
    {
        return Err(Error::OutOfUnitCube(format!(
            "{what} value {v} at flat position {pos}"
        )));
    }
    Ok(())
}

fn check_shape(dim: usize, len: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::param("d", "data dimension must be positive"));
    }
    if !len.is_multiple_of(dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: len % dim,
        });
    }
    Ok(())
}

/// Centroid positions indexed by flat lattice index.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    dim: usize,
    coords: Vec<f64>,
}

impl Configuration {
    /// Build from row-major coordinates (`len × dim`).
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        check_shape(dim, coords.len())?;
        if coords.is_empty() {
            return Err(Error::param("centroids", "configuration has no centroids"));
        }
        check_unit_cube("centroid", &coords)?;
        Ok(Self { dim, coords })
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: p.len(),
            });
        }
        Self::new(dim, points.concat())
    }

    /// Unchecked constructor for values that are convex combinations of
    /// in-cube points.
    pub(crate) fn from_raw(dim: usize, coords: Vec<f64>) -> Self {
        debug_assert!(coords.len().is_multiple_of(dim));
        Self { dim, coords }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of centroids `|I|`.
    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub(crate) fn point_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// `min_{i≠j} ‖x_i − x_j‖`; infinite for a single centroid.
    pub fn separation(&self) -> f64 {
        self.closest_pair().map_or(f64::INFINITY, |(_, _, d2)| d2.sqrt())
    }

    /// Whether the configuration lies in `D_I^δ`.
    pub fn is_separated(&self, delta: f64) -> bool {
        self.separation() >= delta
    }

    /// Closest pair `(i, j, ‖x_i − x_j‖²)` with `i < j`, first in
    /// lexicographic pair order among exact ties.
    pub(crate) fn closest_pair(&self) -> Option<(usize, usize, f64)> {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                let d2 = sq_dist(self.point(i), self.point(j));
                if best.is_none_or(|(_, _, b)| d2 < b) {
                    best = Some((i, j, d2));
                }
            }
        }
        best
    }
}

/// Observations in `[0,1]^d`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    dim: usize,
    data: Vec<f64>,
}

impl SampleSet {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        check_shape(dim, data.len())?;
        check_unit_cube("observation", &data)?;
        Ok(Self { dim, data })
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: p.len(),
            });
        }
        Self::new(dim.max(1), points.concat())
    }

    pub(crate) fn from_raw(dim: usize, data: Vec<f64>) -> Self {
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of observations `n`.
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn point(&self, k: usize) -> &[f64] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    pub fn points(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Result of partitioning a sample set into Voronoi cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// Cell (flat lattice index) of each observation.
    pub cells: Vec<usize>,
    /// `n_i`.
    pub counts: Vec<usize>,
    /// `S_i`, row-major `|I| × d`.
    pub sums: Vec<f64>,
    dim: usize,
}

impl Assignment {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sum(&self, i: usize) -> &[f64] {
        &self.sums[i * self.dim..(i + 1) * self.dim]
    }

    pub fn n(&self) -> usize {
        self.cells.len()
    }
}

/// Estimate with its Monte Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

/// Nearest centroid; strict `<` keeps the lowest flat index on exact ties.
#[inline]
pub(crate) fn nearest(omega: &[f64], x: &Configuration) -> usize {
    let mut best = 0;
    let mut best_d2 = sq_dist(omega, x.point(0));
    for i in 1..x.len() {
        let d2 = sq_dist(omega, x.point(i));
        if d2 < best_d2 {
            best = i;
            best_d2 = d2;
        }
    }
    best
}

#[inline]
pub(crate) fn g_unchecked(
    omega: &[f64],
    cell: usize,
    x: &Configuration,
    lambda: &NeighborhoodFunction,
) -> f64 {
    lambda
        .row(cell)
        .iter()
        .zip(x.points())
        .map(|(&w, xj)| if w == 0.0 { 0.0 } else { w * sq_dist(xj, omega) })
        .sum()
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

fn check_kernel(x: &Configuration, lambda: &NeighborhoodFunction) -> Result<()> {
    check_dim(lambda.lattice().len(), x.len())?;
    if lambda.lattice().rank() > x.dim() {
        return Err(Error::param(
            "lattice",
            format!(
                "lattice dimension {} exceeds data dimension {}",
                lambda.lattice().rank(),
                x.dim()
            ),
        ));
    }
    Ok(())
}

/// Voronoi cell of `omega`: the lexicographically smallest minimizer of
/// `i ↦ ‖x_i − ω‖²`, comparing computed squared distances exactly.
pub fn assign(omega: &[f64], x: &Configuration) -> Result<usize> {
    check_dim(x.dim(), omega.len())?;
    Ok(nearest(omega, x))
}

/// Apply [`assign`] to every sample; cell sums accumulate in sample order.
pub fn partition(samples: &SampleSet, x: &Configuration) -> Result<Assignment> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    check_dim(x.dim(), samples.dim())?;
    Ok(partition_unchecked(samples, x))
}

pub(crate) fn partition_unchecked(samples: &SampleSet, x: &Configuration) -> Assignment {
    let dim = x.dim();
    let cells: Vec<usize> = samples
        .data()
        .par_chunks(CHUNK * dim)
        .flat_map_iter(|chunk| chunk.chunks_exact(dim).map(|w| nearest(w, x)))
        .collect();
    let mut counts = vec![0usize; x.len()];
    let mut sums = vec![0.0; x.len() * dim];
    for (omega, &c) in samples.points().zip(&cells) {
        counts[c] += 1;
        for (s, &w) in sums[c * dim..(c + 1) * dim].iter_mut().zip(omega) {
            *s += w;
        }
    }
    Assignment {
        cells,
        counts,
        sums,
        dim,
    }
}

/// `g_x(ω) = Σ_j Λ(assign(ω, x) − j)‖x_j − ω‖²`.
pub fn g_value(omega: &[f64], x: &Configuration, lambda: &NeighborhoodFunction) -> Result<f64> {
    check_kernel(x, lambda)?;
    let cell = assign(omega, x)?;
    Ok(g_unchecked(omega, cell, x, lambda))
}

/// `V_n(x) = (1/2n) Σ_k g_x(ω_k)` with compensated accumulation.
pub fn empirical_variance(
    samples: &SampleSet,
    x: &Configuration,
    lambda: &NeighborhoodFunction,
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    check_dim(x.dim(), samples.dim())?;
    check_kernel(x, lambda)?;
    let dim = x.dim();
    let g: Vec<f64> = samples
        .data()
        .par_chunks(CHUNK * dim)
        .flat_map_iter(|chunk| {
            chunk
                .chunks_exact(dim)
                .map(|w| g_unchecked(w, nearest(w, x), x, lambda))
        })
        .collect();
    Ok(finish_variance(&g))
}

/// `V_n` for a known cell map; bitwise equal to [`empirical_variance`] when
/// `cells` is the Voronoi assignment of `x`.
pub(crate) fn variance_with_cells(
    samples: &SampleSet,
    x: &Configuration,
    lambda: &NeighborhoodFunction,
    cells: &[usize],
) -> f64 {
    let dim = x.dim();
    let g: Vec<f64> = samples
        .data()
        .par_chunks(CHUNK * dim)
        .zip(cells.par_chunks(CHUNK))
        .flat_map_iter(|(chunk, cs)| {
            chunk
                .chunks_exact(dim)
                .zip(cs)
                .map(|(w, &c)| g_unchecked(w, c, x, lambda))
        })
        .collect();
    finish_variance(&g)
}

fn finish_variance(g: &[f64]) -> f64 {
    crate::sum::sum(g.iter().copied()) / (2.0 * g.len() as f64)
}

/// Grouped evaluation `(1/2n) Σ_{i,j} Λ(i−j) Σ_{ω∈C_i} ‖x_j − ω‖²`.
///
/// Algebraically equal to [`empirical_variance`]; used to cross-check it.
pub fn empirical_variance_grouped(
    samples: &SampleSet,
    x: &Configuration,
    lambda: &NeighborhoodFunction,
) -> Result<f64> {
    check_kernel(x, lambda)?;
    let asg = partition(samples, x)?;
    let k = x.len();
    let mut per_pair = vec![CompensatedSum::new(); k * k];
    for (omega, &i) in samples.points().zip(&asg.cells) {
        for (j, xj) in x.points().enumerate() {
            per_pair[i * k + j].add(sq_dist(xj, omega));
        }
    }
    let mut total = CompensatedSum::new();
    for i in 0..k {
        for j in 0..k {
            total.add(lambda.weight(i, j) * per_pair[i * k + j].total());
        }
    }
    Ok(total.total() / (2.0 * samples.len() as f64))
}

/// Chunked Monte Carlo mean of `f` over `m` draws from `sampler`.
///
/// Chunk `c` uses substream `(seed, c)`, so the draws are the same points
/// [`crate::datagen::sample`] returns for `(sampler, m, seed)`, and the
/// result does not depend on the worker count.
pub(crate) fn mc_mean<S, F>(sampler: &S, m: usize, seed: u64, f: F) -> MeanVar
where
    S: PointSampler + ?Sized,
    F: Fn(&[f64]) -> f64 + Sync,
{
    let dim = sampler.dim();
    let chunks = m.div_ceil(CHUNK);
    let parts: Vec<MeanVar> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let count = CHUNK.min(m - c * CHUNK);
            let pts = draw_chunk(sampler, seed, c, count);
            let mut mv = MeanVar::default();
            for w in pts.chunks_exact(dim) {
                mv.push(f(w));
            }
            mv
        })
        .collect();
    parts.iter().fold(MeanVar::default(), |mut acc, p| {
        acc.merge(p);
        acc
    })
}

/// Monte Carlo estimate of `V(x) = ½ E_P[g_x]` from `m` draws.
pub fn mc_variance<S: PointSampler + ?Sized>(
    x: &Configuration,
    lambda: &NeighborhoodFunction,
    sampler: &S,
    m: usize,
    seed: u64,
) -> Result<McEstimate> {
    if m < 2 {
        return Err(Error::param("M", format!("need at least 2 draws, got {m}")));
    }
    check_kernel(x, lambda)?;
    check_dim(x.dim(), sampler.dim())?;
    let mv = mc_mean(sampler, m, seed, |w| {
        0.5 * g_unchecked(w, nearest(w, x), x, lambda)
    });
    Ok(McEstimate {
        estimate: mv.mean,
        stderr: mv.stderr(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::Sampler;
    use crate::lattice::{Kernel, Lattice};
    use crate::rng::StreamRng;
    use proptest::prelude::*;

    fn line2() -> Lattice {
        Lattice::new(&[2]).unwrap()
    }

    fn half_table() -> Kernel {
        Kernel::table([(&[0i64][..], 1.0), (&[1][..], 0.5), (&[-1][..], 0.5)])
    }

    fn cfg(pts: &[f64]) -> Configuration {
        Configuration::new(1, pts.to_vec()).unwrap()
    }

    fn samples(pts: &[f64]) -> SampleSet {
        SampleSet::new(1, pts.to_vec()).unwrap()
    }

    #[test]
    fn assign_strictly_closer() {
        assert_eq!(assign(&[0.4], &cfg(&[0.2, 0.8])).unwrap(), 0);
    }

    #[test]
    fn assign_tie_goes_to_lower_index() {
        assert_eq!(assign(&[0.5], &cfg(&[0.2, 0.8])).unwrap(), 0);
        // exactly representable tie, either order
        assert_eq!(assign(&[0.5], &cfg(&[0.25, 0.75])).unwrap(), 0);
        assert_eq!(assign(&[0.5], &cfg(&[0.75, 0.25])).unwrap(), 0);
    }

    #[test]
    fn assign_two_by_two() {
        let x = Configuration::from_points(&[
            vec![0.1, 0.1],
            vec![0.1, 0.9],
            vec![0.9, 0.1],
            vec![0.9, 0.9],
        ])
        .unwrap();
        let l = Lattice::new(&[2, 2]).unwrap();
        let cell = assign(&[0.2, 0.8], &x).unwrap();
        assert_eq!(l.coords(cell), vec![0, 1]);
    }

    #[test]
    fn assign_dimension_mismatch() {
        assert!(matches!(
            assign(&[0.1, 0.2], &cfg(&[0.2, 0.8])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn partition_counts_and_sums() {
        let asg = partition(&samples(&[0.0, 0.4, 1.0]), &cfg(&[0.2, 0.8])).unwrap();
        assert_eq!(asg.cells, vec![0, 0, 1]);
        assert_eq!(asg.counts, vec![2, 1]);
        assert_eq!(asg.sums, vec![0.4, 1.0]);
    }

    #[test]
    fn partition_empty_cell() {
        let asg = partition(&samples(&[0.0, 0.1]), &cfg(&[0.2, 0.8])).unwrap();
        assert_eq!(asg.counts, vec![2, 0]);
        assert_eq!(asg.sums, vec![0.1, 0.0]);
    }

    #[test]
    fn partition_rejects_empty() {
        let empty = SampleSet::new(1, vec![]).unwrap();
        assert!(matches!(
            partition(&empty, &cfg(&[0.2, 0.8])),
            Err(Error::EmptySamples)
        ));
    }

    #[test]
    fn g_hand_values() {
        let l = line2();
        let nf = NeighborhoodFunction::new(&l, half_table()).unwrap();
        let x = cfg(&[0.2, 0.8]);
        assert!((g_value(&[0.0], &x, &nf).unwrap() - 0.36).abs() < 1e-15);
        assert!((g_value(&[0.4], &x, &nf).unwrap() - 0.12).abs() < 1e-15);
        let kr = NeighborhoodFunction::new(&l, Kernel::Kronecker).unwrap();
        assert_eq!(g_value(&[0.2], &x, &kr).unwrap(), 0.0);
    }

    #[test]
    fn empirical_variance_hand_values() {
        let l = line2();
        let x = cfg(&[0.2, 0.8]);
        let s = samples(&[0.0, 0.4, 1.0]);
        let nf = NeighborhoodFunction::new(&l, half_table()).unwrap();
        assert!((empirical_variance(&s, &x, &nf).unwrap() - 0.14).abs() < 1e-15);
        let kr = NeighborhoodFunction::new(&l, Kernel::Kronecker).unwrap();
        assert!((empirical_variance(&s, &x, &kr).unwrap() - 0.02).abs() < 1e-15);
        assert_eq!(empirical_variance(&samples(&[0.2, 0.8]), &x, &kr).unwrap(), 0.0);
    }

    #[test]
    fn empirical_variance_rejects_empty_and_wrong_lattice() {
        let x = cfg(&[0.2, 0.8]);
        let kr = NeighborhoodFunction::new(&line2(), Kernel::Kronecker).unwrap();
        assert!(matches!(
            empirical_variance(&SampleSet::new(1, vec![]).unwrap(), &x, &kr),
            Err(Error::EmptySamples)
        ));
        let big = NeighborhoodFunction::new(&Lattice::new(&[3]).unwrap(), Kernel::Kronecker).unwrap();
        assert!(empirical_variance(&samples(&[0.1]), &x, &big).is_err());
    }

    #[test]
    fn out_of_cube_rejected() {
        assert!(matches!(
            SampleSet::new(1, vec![0.5, 1.2]),
            Err(Error::OutOfUnitCube(_))
        ));
        assert!(Configuration::new(2, vec![0.5, f64::NAN]).is_err());
        assert!(SampleSet::new(1, vec![0.0, 1.0]).is_ok());
    }

    struct Constant(Vec<f64>);

    impl PointSampler for Constant {
        fn dim(&self) -> usize {
            self.0.len()
        }
        fn draw(&self, _rng: &mut StreamRng, out: &mut [f64]) {
            out.copy_from_slice(&self.0);
        }
    }

    #[test]
    fn mc_variance_constant_sampler() {
        let nf = NeighborhoodFunction::new(&line2(), half_table()).unwrap();
        let x = cfg(&[0.2, 0.8]);
        let est = mc_variance(&x, &nf, &Constant(vec![0.0]), 1000, 3).unwrap();
        assert!((est.estimate - 0.18).abs() < 1e-15);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn mc_variance_needs_two_draws() {
        let nf = NeighborhoodFunction::new(&line2(), Kernel::Kronecker).unwrap();
        let u = Sampler::uniform(1).unwrap();
        assert!(mc_variance(&cfg(&[0.25, 0.75]), &nf, &u, 1, 0).is_err());
    }

    #[test]
    fn mc_variance_two_level_uniform() {
        let u = Sampler::uniform(1).unwrap();
        let x = cfg(&[0.25, 0.75]);
        let kr = NeighborhoodFunction::new(&line2(), Kernel::Kronecker).unwrap();
        let est = mc_variance(&x, &kr, &u, 1_000_000, 11).unwrap();
        assert!((est.estimate - 1.0 / 96.0).abs() <= 3.0 * est.stderr, "{est:?}");
        let nf = NeighborhoodFunction::new(&line2(), half_table()).unwrap();
        let est = mc_variance(&x, &nf, &u, 1_000_000, 12).unwrap();
        assert!((est.estimate - 0.078125).abs() <= 3.0 * est.stderr, "{est:?}");
    }

    #[test]
    fn mc_variance_seed_coverage() {
        // 3-stderr windows over 100 seeds; a handful of misses is expected.
        let u = Sampler::uniform(1).unwrap();
        let x = cfg(&[0.25, 0.75]);
        let nf = NeighborhoodFunction::new(&line2(), half_table()).unwrap();
        let misses = (0..100u64)
            .filter(|&s| {
                let est = mc_variance(&x, &nf, &u, 20_000, s).unwrap();
                (est.estimate - 0.078125).abs() > 3.0 * est.stderr
            })
            .count();
        assert!(misses <= 3, "{misses} misses");
    }

    fn arb_instance() -> impl Strategy<Value = (usize, Vec<f64>, Vec<f64>)> {
        (1usize..4, 1usize..6).prop_flat_map(|(d, k)| {
            (
                Just(d),
                prop::collection::vec(0.0f64..=1.0, d * k),
                prop::collection::vec(0.0f64..=1.0, d * 40),
            )
        })
    }

    proptest! {
        #[test]
        fn assignment_is_lexicographic_argmin((d, xs, ws) in arb_instance()) {
            let x = Configuration::new(d, xs).unwrap();
            for w in ws.chunks_exact(d) {
                let c = assign(w, &x).unwrap();
                let dc = sq_dist(x.point(c), w);
                for j in 0..x.len() {
                    let dj = sq_dist(x.point(j), w);
                    prop_assert!(dc <= dj);
                    if dj == dc {
                        prop_assert!(c <= j);
                    }
                }
            }
        }

        #[test]
        fn duplicate_centroids_tie_to_first(d in 1usize..4, p in prop::collection::vec(0.0f64..=1.0, 3), w in prop::collection::vec(0.0f64..=1.0, 3)) {
            let pt = &p[..d];
            let x = Configuration::new(d, [pt, pt, pt].concat()).unwrap();
            prop_assert_eq!(assign(&w[..d], &x).unwrap(), 0);
        }

        #[test]
        fn bounds_and_reductions((d, xs, ws) in arb_instance(), sigma in 0.2f64..3.0) {
            let k = xs.len() / d;
            let lattice = Lattice::new(&[k]).unwrap();
            let x = Configuration::new(d, xs).unwrap();
            let s = SampleSet::new(d, ws).unwrap();
            let nf = NeighborhoodFunction::new(&lattice, Kernel::Gaussian { sigma }).unwrap();
            let bound = (k * d) as f64;
            for w in s.points() {
                let g = g_value(w, &x, &nf).unwrap();
                prop_assert!((0.0..=bound).contains(&g));
            }
            let vn = empirical_variance(&s, &x, &nf).unwrap();
            prop_assert!(vn >= 0.0 && vn <= bound / 2.0);
            let grouped = empirical_variance_grouped(&s, &x, &nf).unwrap();
            prop_assert!((vn - grouped).abs() <= 1e-12);

            let kr = NeighborhoodFunction::new(&lattice, Kernel::Kronecker).unwrap();
            let vk = empirical_variance(&s, &x, &kr).unwrap();
            let mse = crate::sum::sum(s.points().map(|w| {
                x.points().map(|c| sq_dist(c, w)).fold(f64::INFINITY, f64::min)
            })) / s.len() as f64;
            prop_assert_eq!(2.0 * vk, mse);
        }
    }
}
