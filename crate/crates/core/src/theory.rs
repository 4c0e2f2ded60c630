//! Monte Carlo checks of the theoretical results on the extended variance:
//! the Voronoi displacement bound, the uniform law of large numbers over
//! `D_I^δ`, and the consistency of quasi-minimizers.

use rayon::prelude::*;

use crate::datagen::{random_config_in_d, sample, PointSampler, Sampler};
use crate::error::{Error, Result};
use crate::lattice::{Lattice, NeighborhoodFunction};
use crate::optimizer::{fit, is_quasi_minimizer, FitParams};
use crate::quantizer::{
    empirical_variance, mc_mean, mc_variance, nearest, sq_dist, Configuration, McEstimate,
    SampleSet,
};
use crate::rng::{derive_seed, label};

/// Rejection budget when drawing random separated configurations.
pub const NET_MAX_TRIES: usize = 100_000;

fn check_alpha(alpha: f64, delta: f64) -> Result<()> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::Hypothesis(format!("delta must be positive, got {delta}")));
    }
    if !(alpha.is_finite() && alpha > 0.0 && alpha < delta / 2.0) {
        return Err(Error::Hypothesis(format!(
            "displacement bound requires 0 < alpha < delta/2, got alpha = {alpha}, delta = {delta}"
        )));
    }
    Ok(())
}

/// `(|I| − 1)(2α/δ + α)(√2)^{d−1}`, an upper bound on the Lebesgue measure
/// of the points that leave cell `i` when `x_i` moves by less than `α`,
/// for `x ∈ D_I^δ` and `0 < α < δ/2`.
pub fn lemma1_bound(alpha: f64, delta: f64, d: usize, card: usize) -> Result<f64> {
    check_alpha(alpha, delta)?;
    if d == 0 || card == 0 {
        return Err(Error::Hypothesis("d and |I| must be positive".into()));
    }
    Ok((card - 1) as f64
        * (2.0 * alpha / delta + alpha)
        * std::f64::consts::SQRT_2.powi(d as i32 - 1))
}

/// The same bound for configurations only known to lie in `D_I^{δ/2}`:
/// `(|I| − 1)(4α/δ + α)(√2)^{d−1}`, requiring `α < δ/4`.
pub fn lemma1_bound_half_separation(alpha: f64, delta: f64, d: usize, card: usize) -> Result<f64> {
    lemma1_bound(alpha, delta / 2.0, d, card)
}

/// Superset indicator for the displacement set of cell `i`: `ω` is in cell
/// `i` and some other centroid is within `α` of beating `x_i`.
pub fn in_displacement_band(omega: &[f64], x: &Configuration, i: usize, alpha: f64) -> bool {
    if nearest(omega, x) != i {
        return false;
    }
    let own = sq_dist(x.point(i), omega).sqrt();
    (0..x.len())
        .filter(|&j| j != i)
        .any(|j| sq_dist(x.point(j), omega).sqrt() < own + alpha)
}

/// Uniform Monte Carlo estimate of the measure of the displacement superset.
pub fn estimate_u_measure(
    x: &Configuration,
    cell: usize,
    alpha: f64,
    delta: f64,
    m: usize,
    seed: u64,
) -> Result<McEstimate> {
    check_alpha(alpha, delta)?;
    if cell >= x.len() {
        return Err(Error::param("cell", format!("{cell} out of range for {} centroids", x.len())));
    }
    if !x.is_separated(delta) {
        return Err(Error::Hypothesis(format!(
            "configuration separation {} is below delta = {delta}",
            x.separation()
        )));
    }
    if m < 2 {
        return Err(Error::param("M", format!("need at least 2 draws, got {m}")));
    }
    let uniform = Sampler::uniform(x.dim())?;
    let mv = mc_mean(&uniform, m, seed, |w| {
        if in_displacement_band(w, x, cell, alpha) {
            1.0
        } else {
            0.0
        }
    });
    Ok(McEstimate {
        estimate: mv.mean,
        stderr: mv.stderr(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lemma1Record {
    pub config_id: usize,
    pub cell: usize,
    pub alpha: f64,
    pub delta: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub bound: f64,
    /// `estimate − 3·stderr ≤ bound`.
    pub pass: bool,
    /// The bound is at least 1 and says nothing.
    pub vacuous: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Lemma1Report {
    pub records: Vec<Lemma1Record>,
}

impl Lemma1Report {
    pub fn all_pass(&self) -> bool {
        self.records.iter().all(|r| r.pass)
    }

    pub fn vacuous_count(&self) -> usize {
        self.records.iter().filter(|r| r.vacuous).count()
    }
}

/// Check the displacement bound on every cell of every configuration.
pub fn lemma1_check(
    configs: &[Configuration],
    alpha: f64,
    delta: f64,
    m: usize,
    seed: u64,
) -> Result<Lemma1Report> {
    let jobs: Vec<(usize, usize)> = configs
        .iter()
        .enumerate()
        .flat_map(|(c, x)| (0..x.len()).map(move |i| (c, i)))
        .collect();
    let records = jobs
        .into_par_iter()
        .map(|(c, i)| {
            let x = &configs[c];
            let bound = lemma1_bound(alpha, delta, x.dim(), x.len())?;
            let est = estimate_u_measure(
                x,
                i,
                alpha,
                delta,
                m,
                derive_seed(seed, &[label::LEMMA, c as u64, i as u64]),
            )?;
            Ok(Lemma1Record {
                config_id: c,
                cell: i,
                alpha,
                delta,
                estimate: est.estimate,
                stderr: est.stderr,
                bound,
                pass: est.estimate - 3.0 * est.stderr <= bound,
                vacuous: bound >= 1.0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Lemma1Report { records })
}

/// `count` random configurations in `D_I^δ`, member `c` from substream `(seed, c)`.
pub fn random_net(lattice: &Lattice, d: usize, delta: f64, count: usize, seed: u64) -> Result<Vec<Configuration>> {
    (0..count)
        .into_par_iter()
        .map(|c| {
            random_config_in_d(
                lattice,
                d,
                delta,
                derive_seed(seed, &[label::NET, c as u64]),
                NET_MAX_TRIES,
            )
        })
        .collect()
}

/// Where the theoretical values `V(x)` of the net come from.
#[derive(Debug, Clone)]
pub enum Reference<'a> {
    /// Known values, one per net member.
    Exact(Vec<f64>),
    /// `mc_variance` with a common seed for every member.
    MonteCarlo { sampler: &'a Sampler, m: usize, seed: u64 },
}

/// Monte Carlo `V(x)` for every member of the net.
pub fn reference_values(
    net: &[Configuration],
    lambda: &NeighborhoodFunction,
    sampler: &Sampler,
    m: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    net.iter()
        .map(|x| mc_variance(x, lambda, sampler, m, seed).map(|e| e.estimate))
        .collect()
}

/// `max_{x ∈ net} |V_n(x) − V(x)|`.
pub fn ulln_discrepancy(
    net: &[Configuration],
    samples: &SampleSet,
    lambda: &NeighborhoodFunction,
    reference: &Reference<'_>,
    delta: f64,
) -> Result<f64> {
    if net.is_empty() {
        return Err(Error::param("net", "net is empty"));
    }
    if let Some(pos) = net.iter().position(|x| !x.is_separated(delta)) {
        return Err(Error::Hypothesis(format!(
            "net member {pos} has separation {} < delta = {delta}",
            net[pos].separation()
        )));
    }
    let refs = match reference {
        Reference::Exact(v) => {
            if v.len() != net.len() {
                return Err(Error::DimensionMismatch { expected: net.len(), got: v.len() });
            }
            v.clone()
        }
        Reference::MonteCarlo { sampler, m, seed } => reference_values(net, lambda, sampler, *m, *seed)?,
    };
    let mut sup: f64 = 0.0;
    for (x, v) in net.iter().zip(refs) {
        sup = sup.max((empirical_variance(samples, x, lambda)? - v).abs());
    }
    Ok(sup)
}

#[derive(Debug, Clone, PartialEq)]
pub struct UllnRow {
    pub n: usize,
    pub seed: u64,
    pub sup_discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UllnReport {
    pub lattice_dims: Vec<usize>,
    pub d: usize,
    pub delta: f64,
    pub net_size: usize,
    pub m_ref: usize,
    pub rows: Vec<UllnRow>,
}

impl UllnReport {
    /// Median sup-discrepancy over seeds at sample size `n`.
    pub fn median_at(&self, n: usize) -> Option<f64> {
        median(self.rows.iter().filter(|r| r.n == n).map(|r| r.sup_discrepancy).collect())
    }
}

pub(crate) fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let k = v.len();
    Some(if k % 2 == 1 { v[k / 2] } else { 0.5 * (v[k / 2 - 1] + v[k / 2]) })
}

#[derive(Debug, Clone)]
pub struct UllnSetup<'a> {
    pub sampler: &'a Sampler,
    pub lattice: &'a Lattice,
    pub lambda: &'a NeighborhoodFunction,
    pub delta: f64,
    pub net_size: usize,
    pub n_schedule: &'a [usize],
    pub seeds: &'a [u64],
    pub m_ref: usize,
    pub seed: u64,
}

/// Sup-discrepancy over a random net for every `(n, seed)` cell.
pub fn ulln_experiment(setup: &UllnSetup<'_>) -> Result<UllnReport> {
    let d = setup.sampler.dim();
    let net = random_net(setup.lattice, d, setup.delta, setup.net_size, setup.seed)?;
    let refs = reference_values(
        &net,
        setup.lambda,
        setup.sampler,
        setup.m_ref,
        derive_seed(setup.seed, &[label::REFERENCE]),
    )?;
    let reference = Reference::Exact(refs);
    let grid: Vec<(usize, u64)> = setup
        .n_schedule
        .iter()
        .flat_map(|&n| setup.seeds.iter().map(move |&s| (n, s)))
        .collect();
    let rows = grid
        .into_par_iter()
        .map(|(n, s)| {
            let data = sample(setup.sampler, n, derive_seed(setup.seed, &[label::DATA, n as u64, s]))?;
            let sup = ulln_discrepancy(&net, &data, setup.lambda, &reference, setup.delta)?;
            Ok(UllnRow { n, seed: s, sup_discrepancy: sup })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(UllnReport {
        lattice_dims: setup.lattice.dims().to_vec(),
        d,
        delta: setup.delta,
        net_size: setup.net_size,
        m_ref: setup.m_ref,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyRow {
    pub n: usize,
    pub seed: u64,
    /// Best `V_n` reported by the fit.
    pub vn_best: f64,
    /// Monte Carlo `V(x̂_n)`.
    pub v_of_fit: f64,
    pub v_of_fit_stderr: f64,
    pub v_ref: f64,
    /// `V(x̂_n) − V̄`.
    pub gap: f64,
    /// Whether `x̂_n` passed the quasi-minimizer test against the fit's best value.
    pub quasi: bool,
    pub config: Configuration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport {
    /// Estimate of `min V`.
    pub v_ref: f64,
    pub v_ref_stderr: f64,
    pub reference_config: Configuration,
    pub rows: Vec<ConsistencyRow>,
}

impl ConsistencyReport {
    pub fn median_gap_at(&self, n: usize) -> Option<f64> {
        median(self.rows.iter().filter(|r| r.n == n).map(|r| r.gap).collect())
    }

    /// Rows whose gap is below `−3·(combined stderr)`.
    pub fn negative_gap_rows(&self) -> Vec<&ConsistencyRow> {
        self.rows
            .iter()
            .filter(|r| {
                let se = (r.v_of_fit_stderr.powi(2) + self.v_ref_stderr.powi(2)).sqrt();
                r.gap < -3.0 * se
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct ConsistencySetup<'a> {
    pub sampler: &'a Sampler,
    pub lattice: &'a Lattice,
    pub lambda: &'a NeighborhoodFunction,
    pub delta: f64,
    pub n_schedule: &'a [usize],
    pub seeds: &'a [u64],
    /// Parameters for the per-row fits; `seed` and `delta` are overridden.
    pub fit_params: FitParams,
    /// Restarts for the reference fit on the size-`m_ref` proxy sample.
    pub reference_restarts: usize,
    pub m_ref: usize,
    pub seed: u64,
}

/// Gap between the theoretical value of fitted configurations and the
/// estimated minimum `V̄`, across a schedule of sample sizes.
///
/// `V̄` comes from fitting a size-`m_ref` sample drawn with the evaluation
/// seed; every `V(x̂_n)` is evaluated on those same draws, so the gaps share
/// their Monte Carlo noise with `V̄`.
pub fn consistency_curve(setup: &ConsistencySetup<'_>) -> Result<ConsistencyReport> {
    if setup.n_schedule.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param("n_schedule", "must be strictly increasing"));
    }
    if setup.seeds.is_empty() {
        return Err(Error::param("seeds", "need at least one seed"));
    }
    let eval_seed = derive_seed(setup.seed, &[label::EVAL]);
    let proxy = sample(setup.sampler, setup.m_ref, eval_seed)?;
    let ref_params = FitParams {
        restarts: setup.reference_restarts.max(1),
        delta: setup.delta,
        seed: derive_seed(setup.seed, &[label::REFERENCE]),
        keep_trace: false,
        ..setup.fit_params.clone()
    };
    let reference = fit(&proxy, setup.lattice, setup.lambda, &ref_params)?;
    drop(proxy);
    let v_ref = mc_variance(&reference.best_config, setup.lambda, setup.sampler, setup.m_ref, eval_seed)?;

    let grid: Vec<(usize, u64)> = setup
        .n_schedule
        .iter()
        .flat_map(|&n| setup.seeds.iter().map(move |&s| (n, s)))
        .collect();
    let rows = grid
        .into_par_iter()
        .map(|(n, s)| {
            let data = sample(setup.sampler, n, derive_seed(setup.seed, &[label::DATA, n as u64, s]))?;
            let params = FitParams {
                delta: setup.delta,
                seed: derive_seed(setup.seed, &[label::FIT, n as u64, s]),
                keep_trace: false,
                ..setup.fit_params.clone()
            };
            let res = fit(&data, setup.lattice, setup.lambda, &params)?;
            let v = mc_variance(&res.best_config, setup.lambda, setup.sampler, setup.m_ref, eval_seed)?;
            let quasi = is_quasi_minimizer(&res.best_config, &data, setup.lambda, res.best_vn, params.quasi)?;
            Ok(ConsistencyRow {
                n,
                seed: s,
                vn_best: res.best_vn,
                v_of_fit: v.estimate,
                v_of_fit_stderr: v.stderr,
                v_ref: v_ref.estimate,
                gap: v.estimate - v_ref.estimate,
                quasi,
                config: res.best_config,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(ConsistencyReport {
        v_ref: v_ref.estimate,
        v_ref_stderr: v_ref.stderr,
        reference_config: reference.best_config,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Kernel;
    use proptest::prelude::*;

    #[test]
    fn bound_substitutions() {
        assert!((lemma1_bound(0.01, 0.5, 1, 2).unwrap() - 0.05).abs() < 1e-15);
        assert!((lemma1_bound(0.05, 0.2, 2, 4).unwrap() - 3.0 * 0.55 * 2f64.sqrt()).abs() < 1e-12);
        assert!((lemma1_bound(0.05, 0.2, 2, 4).unwrap() - 2.33345).abs() < 1e-5);
        assert!(lemma1_bound(1e-12, 0.5, 3, 5).unwrap() < 1e-9);
        assert!((lemma1_bound_half_separation(0.01, 0.5, 1, 2).unwrap() - (0.08 + 0.01)).abs() < 1e-15);
    }

    #[test]
    fn bound_hypothesis() {
        assert!(matches!(lemma1_bound(0.0, 0.5, 1, 2), Err(Error::Hypothesis(_))));
        assert!(matches!(lemma1_bound(0.25, 0.5, 1, 2), Err(Error::Hypothesis(_))));
        assert!(lemma1_bound_half_separation(0.2, 0.5, 1, 2).is_err());
    }

    #[test]
    fn interior_point_not_in_band() {
        let x = Configuration::new(1, vec![0.25, 0.75]).unwrap();
        assert!(!in_displacement_band(&[0.1], &x, 0, 0.01));
        assert!(in_displacement_band(&[0.499], &x, 0, 0.01));
        assert!(in_displacement_band(&[0.5], &x, 0, 0.01));
        assert!(!in_displacement_band(&[0.5], &x, 1, 0.01));
    }

    /// Brute-force measure of the 1-d band by a fine midpoint rule.
    fn band_by_quadrature(x: &Configuration, i: usize, alpha: f64) -> f64 {
        let steps = 2_000_000;
        let h = 1.0 / steps as f64;
        (0..steps)
            .filter(|&s| in_displacement_band(&[(s as f64 + 0.5) * h], x, i, alpha))
            .count() as f64
            * h
    }

    #[test]
    fn band_measure_in_one_dimension() {
        let x = Configuration::new(1, vec![0.25, 0.75]).unwrap();
        let exact = band_by_quadrature(&x, 0, 0.01);
        assert!((exact - 0.005).abs() < 1e-6);
        let est = estimate_u_measure(&x, 0, 0.01, 0.5, 1_000_000, 4).unwrap();
        assert!((est.estimate - 0.005).abs() <= 3.0 * est.stderr, "{est:?}");
        assert!(est.estimate <= lemma1_bound(0.01, 0.5, 1, 2).unwrap());
    }

    #[test]
    fn estimate_rejects_unseparated_config() {
        let x = Configuration::new(1, vec![0.45, 0.55]).unwrap();
        assert!(matches!(
            estimate_u_measure(&x, 0, 0.01, 0.5, 100, 0),
            Err(Error::Hypothesis(_))
        ));
        assert!(estimate_u_measure(&x, 0, 0.06, 0.1, 100, 0).is_err());
    }

    #[test]
    fn discrepancy_zero_when_samples_are_the_atoms() {
        let l = Lattice::new(&[2]).unwrap();
        let nf = NeighborhoodFunction::new(&l, Kernel::Gaussian { sigma: 1.0 }).unwrap();
        let atoms = SampleSet::new(1, vec![0.05, 0.3, 0.55, 0.9]).unwrap();
        let net = vec![
            Configuration::new(1, vec![0.2, 0.8]).unwrap(),
            Configuration::new(1, vec![0.6, 0.1]).unwrap(),
        ];
        let exact: Vec<f64> = net.iter().map(|x| empirical_variance(&atoms, x, &nf).unwrap()).collect();
        let disc = ulln_discrepancy(&net, &atoms, &nf, &Reference::Exact(exact), 0.3).unwrap();
        assert_eq!(disc, 0.0);
    }

    #[test]
    fn discrepancy_validates_net() {
        let l = Lattice::new(&[2]).unwrap();
        let nf = NeighborhoodFunction::new(&l, Kernel::Kronecker).unwrap();
        let s = SampleSet::new(1, vec![0.5]).unwrap();
        assert!(ulln_discrepancy(&[], &s, &nf, &Reference::Exact(vec![]), 0.0).is_err());
        let tight = vec![Configuration::new(1, vec![0.5, 0.55]).unwrap()];
        assert!(ulln_discrepancy(&tight, &s, &nf, &Reference::Exact(vec![0.0]), 0.1).is_err());
    }

    #[test]
    fn single_config_discrepancy_is_small_at_large_n() {
        let l = Lattice::new(&[2]).unwrap();
        let nf = NeighborhoodFunction::new(&l, Kernel::Kronecker).unwrap();
        let u = Sampler::uniform(1).unwrap();
        let net = vec![Configuration::new(1, vec![0.25, 0.75]).unwrap()];
        let reference = Reference::Exact(vec![1.0 / 96.0]);
        let hits = (0..100u64)
            .filter(|&s| {
                let data = sample(&u, 100_000, s).unwrap();
                ulln_discrepancy(&net, &data, &nf, &reference, 0.5).unwrap() < 0.005
            })
            .count();
        assert!(hits >= 95, "{hits}");
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(vec![]), None);
    }

    proptest! {
        #[test]
        fn bound_monotonicity(a in 0.001f64..0.1, b in 0.001f64..0.1, delta in 0.25f64..1.0, d in 1usize..6, card in 1usize..20) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let f = |al: f64, de: f64, c: usize| lemma1_bound(al, de, d, c).unwrap();
            prop_assert!(f(lo, delta, card) <= f(hi, delta, card));
            prop_assert!(f(lo, delta, card) <= f(lo, delta, card + 1));
            prop_assert!(f(lo, delta * 1.5, card) <= f(lo, delta, card));
        }

        #[test]
        fn estimate_is_a_probability(seed in any::<u64>(), alpha in 0.001f64..0.05) {
            let l = Lattice::new(&[3]).unwrap();
            let x = random_config_in_d(&l, 2, 0.2, seed, 10_000).unwrap();
            let est = estimate_u_measure(&x, (seed % 3) as usize, alpha, 0.2, 4096, seed).unwrap();
            prop_assert!((0.0..=1.0).contains(&est.estimate));
        }
    }
}
