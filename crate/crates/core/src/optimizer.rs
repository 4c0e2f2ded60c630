//! Batch minimization of the empirical extended variance.
//!
//! Each restart alternates a Voronoi partition with the frozen-partition
//! minimizer
//!
//! ```text
//! x_j ← Σ_i Λ(i−j) S_i / Σ_i Λ(i−j) n_i
//! ```
//!
//! and optionally repairs the configuration back into `D_I^δ`. For a general
//! kernel the Voronoi reassignment is not the greedy step for the extended
//! cost, so a full iteration may increase `V_n`; the best configuration
//! visited is tracked instead of the last one.

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{Lattice, NeighborhoodFunction};
use crate::quantizer::{
    empirical_variance, partition_unchecked, sq_dist, variance_with_cells, Assignment,
    Configuration, SampleSet,
};
use crate::rng::{label, substream, StreamRng};

/// Number of consecutive iterations without relative improvement of the
/// restart's best value above `rel_tol` before the restart stops.
const STALL_PATIENCE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Init {
    /// `|I|` distinct observations drawn uniformly.
    #[default]
    Subsample,
    /// Distance-squared-proportional seeding.
    PlusPlus,
}

/// `β(n)` for the quasi-minimizer radius `1/β(n)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum QuasiMinimizerSpec {
    #[default]
    Sqrt,
    Linear(f64),
    Constant(f64),
}

impl QuasiMinimizerSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            QuasiMinimizerSpec::Sqrt => Ok(()),
            QuasiMinimizerSpec::Linear(c) | QuasiMinimizerSpec::Constant(c) => {
                if c.is_finite() && c > 0.0 {
                    Ok(())
                } else {
                    Err(Error::param("quasi.c", format!("must be positive, got {c}")))
                }
            }
        }
    }

    pub fn beta(&self, n: usize) -> f64 {
        let n = n as f64;
        match *self {
            QuasiMinimizerSpec::Sqrt => n.sqrt(),
            QuasiMinimizerSpec::Linear(c) => c * n,
            QuasiMinimizerSpec::Constant(c) => c,
        }
    }

    pub fn radius(&self, n: usize) -> f64 {
        1.0 / self.beta(n)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitParams {
    pub restarts: usize,
    pub max_iter: usize,
    pub rel_tol: f64,
    pub delta: f64,
    pub init: Init,
    pub seed: u64,
    pub quasi: QuasiMinimizerSpec,
    /// Record every visited configuration in [`RestartSummary::trace`].
    pub keep_trace: bool,
}

impl Default for FitParams {
    fn default() -> Self {
        Self {
            restarts: 20,
            max_iter: 200,
            rel_tol: 1e-10,
            delta: 0.0,
            init: Init::Subsample,
            seed: 0,
            quasi: QuasiMinimizerSpec::Sqrt,
            keep_trace: false,
        }
    }
}

impl FitParams {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::param("restarts", "must be positive"));
        }
        if !(self.rel_tol.is_finite() && self.rel_tol > 0.0) {
            return Err(Error::param("rel_tol", format!("must be positive, got {}", self.rel_tol)));
        }
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return Err(Error::param("delta", format!("must be nonnegative, got {}", self.delta)));
        }
        self.quasi.validate()
    }
}

/// One visited configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateRecord {
    pub cells: Vec<usize>,
    pub config: Configuration,
    pub vn: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestartSummary {
    pub restart: usize,
    /// `V_n` of the last iterate.
    pub final_vn: f64,
    /// Best `V_n` over this restart's iterates.
    pub best_vn: f64,
    pub iterations: usize,
    /// Separation of the best iterate.
    pub separation: f64,
    /// Number of separation repairs that moved the configuration.
    pub repairs: usize,
    pub trace: Vec<IterateRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub best_config: Configuration,
    pub best_vn: f64,
    pub best_restart: usize,
    pub per_restart: Vec<RestartSummary>,
    /// `1/β(n)` used for the quasi-minimizer test.
    pub quasi_radius: f64,
    /// Restarts abandoned because the separation repair failed.
    pub failed_restarts: Vec<(usize, String)>,
}

fn check_assignment(asg: &Assignment, lambda: &NeighborhoodFunction, prev: &Configuration) -> Result<()> {
    let k = lambda.lattice().len();
    if prev.len() != k {
        return Err(Error::DimensionMismatch { expected: k, got: prev.len() });
    }
    if asg.counts.len() != k || asg.sums.len() != k * prev.dim() {
        return Err(Error::DimensionMismatch { expected: k, got: asg.counts.len() });
    }
    if asg.dim() != prev.dim() {
        return Err(Error::DimensionMismatch { expected: prev.dim(), got: asg.dim() });
    }
    Ok(())
}

/// Frozen-partition minimizer: `x_j = Σ_i Λ(i−j) S_i / Σ_i Λ(i−j) n_i`,
/// keeping `x_j` from `previous` when the denominator is zero.
pub fn batch_update(
    assignment: &Assignment,
    lambda: &NeighborhoodFunction,
    previous: &Configuration,
) -> Result<Configuration> {
    check_assignment(assignment, lambda, previous)?;
    Ok(batch_update_unchecked(assignment, lambda, previous))
}

fn batch_update_unchecked(
    asg: &Assignment,
    lambda: &NeighborhoodFunction,
    previous: &Configuration,
) -> Configuration {
    let k = previous.len();
    let dim = previous.dim();
    let mut out = previous.clone();
    let mut num = vec![0.0; dim];
    for j in 0..k {
        num.iter_mut().for_each(|v| *v = 0.0);
        let mut den = 0.0;
        for i in 0..k {
            let w = lambda.weight(i, j);
            if w == 0.0 || asg.counts[i] == 0 {
                continue;
            }
            den += w * asg.counts[i] as f64;
            for (acc, &s) in num.iter_mut().zip(asg.sum(i)) {
                *acc += w * s;
            }
        }
        if den > 0.0 {
            for (dst, &acc) in out.point_mut(j).iter_mut().zip(&num) {
                *dst = (acc / den).clamp(0.0, 1.0);
            }
        }
    }
    out
}

/// Move the pair `(i, j)` apart along their difference to distance `delta`,
/// keeping both inside the cube.
fn push_apart(x: &mut Configuration, i: usize, j: usize, delta: f64) {
    let dim = x.dim();
    let xi = x.point(i).to_vec();
    let xj = x.point(j).to_vec();
    let dist = sq_dist(&xi, &xj).sqrt();
    let dir: Vec<f64> = if dist == 0.0 {
        (0..dim).map(|c| if c == 0 { 1.0 } else { 0.0 }).collect()
    } else {
        xi.iter().zip(&xj).map(|(a, b)| (b - a) / dist).collect()
    };
    let mut half = delta / 2.0;
    for _ in 0..8 {
        for c in 0..dim {
            let reach = half * dir[c].abs();
            let mut mid = 0.5 * (xi[c] + xj[c]);
            if reach <= 0.5 {
                mid = mid.clamp(reach, 1.0 - reach);
            }
            x.point_mut(i)[c] = (mid - half * dir[c]).clamp(0.0, 1.0);
            x.point_mut(j)[c] = (mid + half * dir[c]).clamp(0.0, 1.0);
        }
        if sq_dist(x.point(i), x.point(j)).sqrt() >= delta {
            return;
        }
        // rounding left the pair a hair short
        half *= 1.0 + 1e-12;
    }
}

fn repair(x: &Configuration, delta: f64) -> Result<(Configuration, usize)> {
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Error::param("delta", format!("must be nonnegative, got {delta}")));
    }
    if x.is_separated(delta) {
        return Ok((x.clone(), 0));
    }
    let k = x.len();
    let budget = 10 * k * k;
    let mut out = x.clone();
    for pass in 1..=budget {
        let (i, j, _) = out.closest_pair().expect("at least two centroids");
        push_apart(&mut out, i, j, delta);
        if out.is_separated(delta) {
            return Ok((out, pass));
        }
    }
    Err(Error::InfeasibleSeparation(format!(
        "separation {:.6} < delta {delta} after {budget} repair passes on {k} centroids in dimension {}",
        out.separation(),
        x.dim()
    )))
}

/// Push the closest pairs apart until the configuration lies in `D_I^δ`.
pub fn enforce_separation(x: &Configuration, delta: f64) -> Result<Configuration> {
    repair(x, delta).map(|(c, _)| c)
}

/// `V_n(x) < best_known_vn + 1/β(n)`.
///
/// `best_known_vn` stands in for the infimum of `V_n` over `D_I^δ`, which
/// cannot be computed exactly.
pub fn is_quasi_minimizer(
    x: &Configuration,
    samples: &SampleSet,
    lambda: &NeighborhoodFunction,
    best_known_vn: f64,
    spec: QuasiMinimizerSpec,
) -> Result<bool> {
    let vn = empirical_variance(samples, x, lambda)?;
    Ok(vn < best_known_vn + spec.radius(samples.len()))
}

/// Initial configuration for restart `restart`, from substream `(seed, restart)`.
pub fn initial_configuration(
    samples: &SampleSet,
    k: usize,
    init: Init,
    seed: u64,
    restart: usize,
) -> Result<Configuration> {
    let n = samples.len();
    if n == 0 {
        return Err(Error::EmptySamples);
    }
    let mut rng = substream(seed, &[label::RESTART, restart as u64]);
    let picks: Vec<usize> = match init {
        Init::Subsample => {
            if n < k {
                return Err(Error::param(
                    "init",
                    format!("subsample init needs n >= |I| ({n} < {k})"),
                ));
            }
            index::sample(&mut rng, n, k).into_vec()
        }
        Init::PlusPlus => plus_plus(samples, k, &mut rng),
    };
    let coords = picks.iter().flat_map(|&p| samples.point(p).iter().copied()).collect();
    Ok(Configuration::from_raw(samples.dim(), coords))
}

fn plus_plus(samples: &SampleSet, k: usize, rng: &mut StreamRng) -> Vec<usize> {
    let n = samples.len();
    let mut picks = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = samples.points().map(|w| sq_dist(w, samples.point(picks[0]))).collect();
    while picks.len() < k {
        let total = crate::sum::sum(d2.iter().copied());
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            d2.iter()
                .position(|&v| {
                    acc += v;
                    acc > target
                })
                .unwrap_or_else(|| d2.iter().rposition(|&v| v > 0.0).unwrap_or(n - 1))
        } else {
            rng.random_range(0..n)
        };
        picks.push(next);
        let p = samples.point(next);
        for (dv, w) in d2.iter_mut().zip(samples.points()) {
            *dv = dv.min(sq_dist(w, p));
        }
    }
    picks
}

struct RestartOutcome {
    summary: RestartSummary,
    best: Configuration,
}

fn descend(
    samples: &SampleSet,
    lambda: &NeighborhoodFunction,
    start: Configuration,
    params: &FitParams,
    restart: usize,
) -> Result<RestartOutcome> {
    let mut repairs = 0;
    let mut x = start;
    if params.delta > 0.0 {
        let (fixed, passes) = repair(&x, params.delta)?;
        repairs += usize::from(passes > 0);
        x = fixed;
    }
    let mut asg = partition_unchecked(samples, &x);
    let mut vn = variance_with_cells(samples, &x, lambda, &asg.cells);
    let mut best = x.clone();
    let mut best_vn = vn;
    let mut trace = Vec::new();
    if params.keep_trace {
        trace.push(IterateRecord { cells: asg.cells.clone(), config: x.clone(), vn });
    }

    let mut iterations = 0;
    let mut stalled = 0;
    while iterations < params.max_iter {
        let mut next = batch_update_unchecked(&asg, lambda, &x);
        if params.delta > 0.0 {
            let (fixed, passes) = repair(&next, params.delta)?;
            repairs += usize::from(passes > 0);
            next = fixed;
        }
        let next_asg = partition_unchecked(samples, &next);
        let next_vn = variance_with_cells(samples, &next, lambda, &next_asg.cells);
        iterations += 1;

        let previous_best = best_vn;
        if next_vn < best_vn {
            best_vn = next_vn;
            best = next.clone();
        }
        if params.keep_trace {
            trace.push(IterateRecord {
                cells: next_asg.cells.clone(),
                config: next.clone(),
                vn: next_vn,
            });
        }
        let unchanged = next_asg.cells == asg.cells;
        x = next;
        asg = next_asg;
        vn = next_vn;
        if unchanged {
            break;
        }
        if previous_best - best_vn < params.rel_tol * previous_best.abs() {
            stalled += 1;
            if stalled >= STALL_PATIENCE {
                break;
            }
        } else {
            stalled = 0;
        }
    }

    Ok(RestartOutcome {
        summary: RestartSummary {
            restart,
            final_vn: vn,
            best_vn,
            iterations,
            separation: best.separation(),
            repairs,
            trace,
        },
        best,
    })
}

/// Multi-start batch minimization of `V_n` over configurations indexed by
/// `lattice`.
///
/// Restarts run in parallel but each draws from its own substream, and the
/// best is selected by `(V_n, restart index)`, so the result does not depend
/// on the worker count.
pub fn fit(
    samples: &SampleSet,
    lattice: &Lattice,
    lambda: &NeighborhoodFunction,
    params: &FitParams,
) -> Result<FitResult> {
    params.validate()?;
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    if lambda.lattice() != lattice {
        return Err(Error::param("kernel", "neighborhood function was built for another lattice"));
    }
    if lattice.rank() > samples.dim() {
        return Err(Error::param(
            "lattice",
            format!("lattice dimension {} exceeds data dimension {}", lattice.rank(), samples.dim()),
        ));
    }
    let k = lattice.len();
    if params.init == Init::Subsample && samples.len() < k {
        return Err(Error::param(
            "init",
            format!("subsample init needs n >= |I| ({} < {k})", samples.len()),
        ));
    }

    let outcomes: Vec<Result<RestartOutcome>> = (0..params.restarts)
        .into_par_iter()
        .map(|r| {
            let start = initial_configuration(samples, k, params.init, params.seed, r)?;
            descend(samples, lambda, start, params, r)
        })
        .collect();

    let mut per_restart = Vec::new();
    let mut failed_restarts = Vec::new();
    let mut best: Option<(f64, usize, Configuration)> = None;
    for (r, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(o) => {
                if best.as_ref().is_none_or(|(v, _, _)| o.summary.best_vn < *v) {
                    best = Some((o.summary.best_vn, r, o.best));
                }
                per_restart.push(o.summary);
            }
            Err(e @ Error::InfeasibleSeparation(_)) => failed_restarts.push((r, e.to_string())),
            Err(e) => return Err(e),
        }
    }

    let (best_vn, best_restart, best_config) = best.ok_or_else(|| {
        Error::InfeasibleSeparation(format!(
            "all {} restarts failed to reach delta = {}; first failure: {}",
            params.restarts,
            params.delta,
            failed_restarts.first().map_or("-", |(_, m)| m.as_str())
        ))
    })?;
    Ok(FitResult {
        best_config,
        best_vn,
        best_restart,
        per_restart,
        quasi_radius: params.quasi.radius(samples.len()),
        failed_restarts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Kernel;
    use crate::quantizer::partition;
    use proptest::prelude::*;
    use rand::Rng;

    fn line(k: usize) -> Lattice {
        Lattice::new(&[k]).unwrap()
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
    fn weighted_update_hand_values() {
        let nf = NeighborhoodFunction::new(&line(2), half_table()).unwrap();
        let x = cfg(&[0.2, 0.8]);
        let asg = partition(&samples(&[0.0, 0.4, 1.0]), &x).unwrap();
        let up = batch_update(&asg, &nf, &x).unwrap();
        assert!((up.point(0)[0] - 0.36).abs() < 1e-15);
        assert!((up.point(1)[0] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn kronecker_update_is_cell_mean() {
        let nf = NeighborhoodFunction::new(&line(2), Kernel::Kronecker).unwrap();
        let x = cfg(&[0.2, 0.8]);
        let asg = partition(&samples(&[0.0, 0.4, 1.0]), &x).unwrap();
        let up = batch_update(&asg, &nf, &x).unwrap();
        assert_eq!(up.coords(), &[0.2, 1.0]);
    }

    #[test]
    fn empty_cell_keeps_previous() {
        let nf = NeighborhoodFunction::new(&line(2), Kernel::Kronecker).unwrap();
        let x = cfg(&[0.2, 0.8]);
        let asg = partition(&samples(&[0.0, 0.1]), &x).unwrap();
        let up = batch_update(&asg, &nf, &x).unwrap();
        assert_eq!(up.point(1), &[0.8]);
    }

    #[test]
    fn separation_noop_when_satisfied() {
        let x = cfg(&[0.25, 0.75]);
        assert_eq!(enforce_separation(&x, 0.4).unwrap(), x);
    }

    #[test]
    fn coincident_points_pushed_along_first_axis() {
        let x = Configuration::new(2, vec![0.5, 0.5, 0.5, 0.5]).unwrap();
        let y = enforce_separation(&x, 0.1).unwrap();
        assert!((y.point(0)[0] - 0.45).abs() < 1e-12);
        assert!((y.point(1)[0] - 0.55).abs() < 1e-12);
        assert_eq!(y.point(0)[1], 0.5);
        assert_eq!(y.point(1)[1], 0.5);
    }

    #[test]
    fn pigeonhole_separation_fails() {
        let x = cfg(&[0.1, 0.2, 0.3, 0.4, 0.5]);
        assert!(matches!(
            enforce_separation(&x, 0.5),
            Err(Error::InfeasibleSeparation(_))
        ));
    }

    #[test]
    fn separation_at_boundary_reaches_delta() {
        let x = cfg(&[0.0, 0.0]);
        let y = enforce_separation(&x, 0.5).unwrap();
        assert!(y.separation() >= 0.5);
        let y = enforce_separation(&cfg(&[0.3, 0.3, 0.7]), 0.4).unwrap();
        assert!(y.separation() >= 0.4, "{y:?}");
    }

    #[test]
    fn quasi_minimizer_radius() {
        assert!((QuasiMinimizerSpec::Sqrt.radius(100) - 0.1).abs() < 1e-15);
        assert_eq!(QuasiMinimizerSpec::Linear(2.0).beta(10), 20.0);
        assert_eq!(QuasiMinimizerSpec::Constant(4.0).radius(1000), 0.25);
        assert!(QuasiMinimizerSpec::Constant(0.0).validate().is_err());
    }

    #[test]
    fn quasi_minimizer_membership() {
        let nf = NeighborhoodFunction::new(&line(2), half_table()).unwrap();
        let x = cfg(&[0.2, 0.8]);
        let pts: Vec<f64> = (0..100).map(|i| i as f64 / 99.0).collect();
        let s = samples(&pts);
        let vn = empirical_variance(&s, &x, &nf).unwrap();
        let spec = QuasiMinimizerSpec::Sqrt;
        assert!(is_quasi_minimizer(&x, &s, &nf, vn, spec).unwrap());
        let r = spec.radius(100);
        assert!(!is_quasi_minimizer(&x, &s, &nf, vn - 2.0 * r, spec).unwrap());
    }

    #[test]
    fn zero_iterations_keeps_initial_best() {
        let l = line(2);
        let nf = NeighborhoodFunction::new(&l, Kernel::Kronecker).unwrap();
        let s = samples(&[0.0, 0.1, 0.5, 0.9, 1.0]);
        let params = FitParams { max_iter: 0, restarts: 4, seed: 3, ..Default::default() };
        let res = fit(&s, &l, &nf, &params).unwrap();
        let best_init = (0..4)
            .map(|r| {
                let x = initial_configuration(&s, 2, Init::Subsample, 3, r).unwrap();
                empirical_variance(&s, &x, &nf).unwrap()
            })
            .fold(f64::INFINITY, f64::min);
        assert_eq!(res.best_vn, best_init);
        assert!(res.per_restart.iter().all(|r| r.iterations == 0));
    }

    #[test]
    fn fit_validation_errors() {
        let l = line(3);
        let nf = NeighborhoodFunction::new(&l, Kernel::Kronecker).unwrap();
        let s = samples(&[0.1, 0.2]);
        assert!(fit(&s, &l, &nf, &FitParams::default()).is_err());
        let pp = FitParams { init: Init::PlusPlus, ..Default::default() };
        assert!(fit(&s, &l, &nf, &pp).is_ok());
        let sq = Lattice::new(&[2, 2]).unwrap();
        let nf2 = NeighborhoodFunction::new(&sq, Kernel::Kronecker).unwrap();
        let s1 = samples(&[0.1, 0.2, 0.3, 0.4]);
        assert!(fit(&s1, &sq, &nf2, &FitParams::default()).is_err());
        let bad = FitParams { rel_tol: 0.0, ..Default::default() };
        assert!(fit(&s1, &l, &nf, &bad).is_err());
    }

    #[test]
    fn infeasible_delta_fails_every_restart() {
        let l = line(5);
        let nf = NeighborhoodFunction::new(&l, Kernel::Kronecker).unwrap();
        let s = samples(&[0.0, 0.25, 0.5, 0.75, 1.0, 0.3]);
        let params = FitParams { delta: 0.5, restarts: 3, ..Default::default() };
        assert!(matches!(fit(&s, &l, &nf, &params), Err(Error::InfeasibleSeparation(_))));
    }

    #[test]
    fn separated_fit_stays_in_d() {
        let l = Lattice::new(&[3]).unwrap();
        let nf = NeighborhoodFunction::new(&l, Kernel::Gaussian { sigma: 1.0 }).unwrap();
        let pts: Vec<f64> = (0..200).map(|i| (i as f64 / 199.0).powi(2)).collect();
        let s = samples(&pts);
        let params = FitParams { delta: 0.3, restarts: 4, keep_trace: true, ..Default::default() };
        let res = fit(&s, &l, &nf, &params).unwrap();
        assert!(res.best_config.separation() >= 0.3);
        for r in &res.per_restart {
            for it in &r.trace {
                assert!(it.config.separation() >= 0.3);
            }
        }
    }

    #[test]
    fn plus_plus_picks_distinct_points_when_possible() {
        let s = samples(&[0.0, 0.0, 0.0, 1.0]);
        let x = initial_configuration(&s, 2, Init::PlusPlus, 5, 0).unwrap();
        let mut c = x.coords().to_vec();
        c.sort_by(f64::total_cmp);
        assert_eq!(c, vec![0.0, 1.0]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn separation_postcondition(d in 1usize..4, k in 2usize..6, seed in any::<u64>(), frac in 0.0f64..1.0) {
            let mut rng = substream(seed, &[]);
            let coords: Vec<f64> = (0..d * k).map(|_| rng.random::<f64>()).collect();
            let x = Configuration::new(d, coords).unwrap();
            // Stay below a comfortable packing density.
            let delta = frac * 0.5 / (k as f64).powf(1.0 / d as f64);
            if let Ok(y) = enforce_separation(&x, delta) {
                prop_assert!(y.separation() >= delta);
                prop_assert!(y.coords().iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }

        #[test]
        fn kronecker_iterations_never_increase(seed in any::<u64>(), k in 2usize..6, d in 1usize..3) {
            let l = Lattice::new(&[k]).unwrap();
            let nf = NeighborhoodFunction::new(&l, Kernel::Kronecker).unwrap();
            let mut rng = substream(seed, &[]);
            let pts: Vec<f64> = (0..d * 80).map(|_| rng.random::<f64>().powi(2)).collect();
            let s = SampleSet::new(d, pts).unwrap();
            let params = FitParams { restarts: 2, seed, keep_trace: true, ..Default::default() };
            let res = fit(&s, &l, &nf, &params).unwrap();
            for r in &res.per_restart {
                for w in r.trace.windows(2) {
                    prop_assert!(w[1].vn <= w[0].vn + 1e-12);
                }
            }
        }

        #[test]
        fn best_so_far_is_nonincreasing(seed in any::<u64>(), sigma in 0.3f64..2.0) {
            let l = Lattice::new(&[2, 2]).unwrap();
            let nf = NeighborhoodFunction::new(&l, Kernel::Gaussian { sigma }).unwrap();
            let mut rng = substream(seed, &[]);
            let pts: Vec<f64> = (0..2 * 60).map(|_| rng.random::<f64>()).collect();
            let s = SampleSet::new(2, pts).unwrap();
            let params = FitParams { restarts: 3, seed, keep_trace: true, ..Default::default() };
            let res = fit(&s, &l, &nf, &params).unwrap();
            let mut best = f64::INFINITY;
            for r in &res.per_restart {
                for it in &r.trace {
                    let next = best.min(it.vn);
                    prop_assert!(next <= best);
                    best = next;
                }
                prop_assert!(res.best_vn <= r.best_vn);
            }
            prop_assert_eq!(best, res.best_vn);
            prop_assert_eq!(empirical_variance(&s, &res.best_config, &nf).unwrap(), res.best_vn);
        }
    }
}
