//! Index lattices and neighborhood kernels.
//!
//! A [`Lattice`] is the box `{0..m_1−1} × … × {0..m_e−1} ⊂ Z^e`. Its points
//! are stored by flat row-major index, so increasing flat index is exactly
//! the lexicographic order on coordinates; every tie-break in the crate
//! relies on that.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lattice {
    dims: Vec<usize>,
    strides: Vec<usize>,
    len: usize,
}

impl Lattice {
    pub fn new(dims: &[usize]) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidLattice("no axes given".into()));
        }
        if let Some(axis) = dims.iter().position(|&m| m == 0) {
            return Err(Error::InvalidLattice(format!("axis {axis} has zero length")));
        }
        let len = dims
            .iter()
            .try_fold(1usize, |acc, &m| acc.checked_mul(m))
            .ok_or_else(|| Error::InvalidLattice("lattice size overflows".into()))?;
        let mut strides = vec![1usize; dims.len()];
        for a in (0..dims.len().saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * dims[a + 1];
        }
        Ok(Self {
            dims: dims.to_vec(),
            strides,
            len,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Lattice dimension `e`.
    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    /// Number of lattice points `|I|`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Coordinates of the point with flat index `flat`.
    pub fn coords(&self, flat: usize) -> Vec<i64> {
        assert!(flat < self.len, "flat index {flat} out of range");
        self.dims
            .iter()
            .zip(&self.strides)
            .map(|(&m, &s)| ((flat / s) % m) as i64)
            .collect()
    }

    /// Flat index of a point, or `None` outside the box.
    pub fn index_of(&self, coords: &[i64]) -> Option<usize> {
        if coords.len() != self.dims.len() {
            return None;
        }
        let mut flat = 0usize;
        for ((&c, &m), &s) in coords.iter().zip(&self.dims).zip(&self.strides) {
            if c < 0 || c as usize >= m {
                return None;
            }
            flat += c as usize * s;
        }
        Some(flat)
    }

    /// All points in lexicographic order.
    pub fn points(&self) -> impl Iterator<Item = Vec<i64>> + '_ {
        (0..self.len).map(move |i| self.coords(i))
    }

    fn difference_shape(&self) -> Vec<usize> {
        self.dims.iter().map(|&m| 2 * m - 1).collect()
    }

    /// Position of the offset `k ∈ I − I` in the dense difference table.
    fn difference_index(&self, k: &[i64]) -> Option<usize> {
        if k.len() != self.dims.len() {
            return None;
        }
        let mut idx = 0usize;
        for (&ka, &m) in k.iter().zip(&self.dims) {
            let span = m as i64 - 1;
            if ka < -span || ka > span {
                return None;
            }
            idx = idx * (2 * m - 1) + (ka + span) as usize;
        }
        Some(idx)
    }

    fn difference_offsets(&self) -> Vec<Vec<i64>> {
        let shape = self.difference_shape();
        let total: usize = shape.iter().product();
        (0..total)
            .map(|mut idx| {
                let mut k = vec![0i64; shape.len()];
                for a in (0..shape.len()).rev() {
                    k[a] = (idx % shape[a]) as i64 - (self.dims[a] as i64 - 1);
                    idx /= shape[a];
                }
                k
            })
            .collect()
    }
}

/// Neighborhood kernel families.
#[derive(Debug, Clone, PartialEq)]
pub enum Kernel {
    /// 1 at the origin, 0 elsewhere. Recovers K-means.
    Kronecker,
    /// `exp(−‖k‖² / (2σ²))`.
    Gaussian { sigma: f64 },
    /// 1 if `‖k‖_∞ ≤ radius`, else 0.
    Rectangular { radius: u64 },
    /// Explicit value for every offset of `I − I`.
    Table(BTreeMap<Vec<i64>, f64>),
}

impl Kernel {
    /// Convenience constructor for explicit tables.
    pub fn table<'a>(entries: impl IntoIterator<Item = (&'a [i64], f64)>) -> Self {
        Kernel::Table(entries.into_iter().map(|(k, v)| (k.to_vec(), v)).collect())
    }

    fn eval(&self, k: &[i64]) -> Option<f64> {
        match self {
            Kernel::Kronecker => Some(if k.iter().all(|&c| c == 0) { 1.0 } else { 0.0 }),
            Kernel::Gaussian { sigma } => {
                let sq: f64 = k.iter().map(|&c| (c * c) as f64).sum();
                Some((-sq / (2.0 * sigma * sigma)).exp())
            }
            Kernel::Rectangular { radius } => {
                let inf = k.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0);
                Some(if inf <= *radius { 1.0 } else { 0.0 })
            }
            Kernel::Table(map) => map.get(k).copied(),
        }
    }
}

/// A kernel resolved on the difference set of one lattice.
///
/// Values are tabulated at construction, together with the `|I| × |I|`
/// weight matrix `W[i][j] = Λ(i − j)` used by every inner loop.
#[derive(Debug, Clone)]
pub struct NeighborhoodFunction {
    lattice: Lattice,
    kernel: Kernel,
    differences: Vec<f64>,
    weights: Vec<f64>,
}

impl NeighborhoodFunction {
    pub fn new(lattice: &Lattice, kernel: Kernel) -> Result<Self> {
        match &kernel {
            Kernel::Gaussian { sigma } if !(sigma.is_finite() && *sigma > 0.0) => {
                return Err(Error::InvalidKernel(format!(
                    "gaussian sigma must be positive and finite, got {sigma}"
                )));
            }
            Kernel::Table(map) => {
                if let Some(k) = map.keys().find(|k| lattice.difference_index(k).is_none()) {
                    return Err(Error::InvalidKernel(format!(
                        "table offset {k:?} is not in the difference set of lattice {:?}",
                        lattice.dims()
                    )));
                }
            }
            _ => {}
        }

        let offsets = lattice.difference_offsets();
        let mut differences = Vec::with_capacity(offsets.len());
        for k in &offsets {
            let v = kernel.eval(k).ok_or_else(|| {
                Error::InvalidKernel(format!("table has no entry for offset {k:?}"))
            })?;
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidKernel(format!(
                    "value {v} at offset {k:?} is outside [0, 1]"
                )));
            }
            differences.push(v);
        }
        for k in &offsets {
            let neg: Vec<i64> = k.iter().map(|c| -c).collect();
            let a = differences[lattice.difference_index(k).unwrap()];
            let b = differences[lattice.difference_index(&neg).unwrap()];
            if a != b {
                return Err(Error::InvalidKernel(format!(
                    "asymmetric: Λ({k:?}) = {a} but Λ({neg:?}) = {b}"
                )));
            }
        }
        let zero = vec![0i64; lattice.rank()];
        let at_zero = differences[lattice.difference_index(&zero).unwrap()];
        if at_zero != 1.0 {
            return Err(Error::InvalidKernel(format!("Λ(0) = {at_zero}, expected 1")));
        }

        let n = lattice.len();
        let coords: Vec<Vec<i64>> = lattice.points().collect();
        let mut weights = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let k: Vec<i64> = coords[i].iter().zip(&coords[j]).map(|(a, b)| a - b).collect();
                weights[i * n + j] = differences[lattice.difference_index(&k).unwrap()];
            }
        }

        Ok(Self {
            lattice: lattice.clone(),
            kernel,
            differences,
            weights,
        })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    /// `Λ(k)` for an offset `k ∈ I − I`.
    pub fn value(&self, k: &[i64]) -> Result<f64> {
        self.lattice
            .difference_index(k)
            .map(|idx| self.differences[idx])
            .ok_or_else(|| Error::OffsetOutOfDomain(k.to_vec()))
    }

    /// `Λ(i − j)` for flat lattice indices.
    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.lattice.len() + j]
    }

    /// Row `i` of the weight matrix: `j ↦ Λ(i − j)`.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.lattice.len();
        &self.weights[i * n..(i + 1) * n]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn one_d_table(v0: f64, vp: f64, vm: f64) -> Kernel {
        Kernel::table([(&[0i64][..], v0), (&[1][..], vp), (&[-1][..], vm)])
    }

    #[test]
    fn one_axis_lattice_enumerates_box() {
        let l = Lattice::new(&[4]).unwrap();
        assert_eq!(l.len(), 4);
        let pts: Vec<_> = l.points().collect();
        assert_eq!(pts, vec![vec![0], vec![1], vec![2], vec![3]]);
    }

    #[test]
    fn square_lattice_is_lexicographic() {
        let l = Lattice::new(&[2, 2]).unwrap();
        let pts: Vec<_> = l.points().collect();
        assert_eq!(pts, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        assert_eq!(l.index_of(&[1, 0]), Some(2));
        assert_eq!(l.index_of(&[2, 0]), None);
    }

    #[test]
    fn bad_dims_rejected() {
        assert!(matches!(Lattice::new(&[]), Err(Error::InvalidLattice(_))));
        assert!(matches!(Lattice::new(&[3, 0]), Err(Error::InvalidLattice(_))));
    }

    #[test]
    fn kronecker_at_origin_is_one() {
        let l = Lattice::new(&[3]).unwrap();
        let nf = NeighborhoodFunction::new(&l, Kernel::Kronecker).unwrap();
        assert_eq!(nf.value(&[0]).unwrap(), 1.0);
        assert_eq!(nf.value(&[2]).unwrap(), 0.0);
    }

    #[test]
    fn gaussian_unit_offset() {
        let l = Lattice::new(&[2]).unwrap();
        let nf = NeighborhoodFunction::new(&l, Kernel::Gaussian { sigma: 1.0 }).unwrap();
        assert!((nf.value(&[1]).unwrap() - 0.606_530_659_712_633_4).abs() < 1e-15);
    }

    #[test]
    fn rectangular_uses_sup_norm() {
        let l = Lattice::new(&[3, 3]).unwrap();
        let nf = NeighborhoodFunction::new(&l, Kernel::Rectangular { radius: 1 }).unwrap();
        assert_eq!(nf.value(&[1, -1]).unwrap(), 1.0);
        assert_eq!(nf.value(&[2, 0]).unwrap(), 0.0);
    }

    #[test]
    fn asymmetric_table_rejected() {
        let l = Lattice::new(&[2]).unwrap();
        let err = NeighborhoodFunction::new(&l, one_d_table(1.0, 0.5, 0.4)).unwrap_err();
        assert!(matches!(err, Error::InvalidKernel(_)));
    }

    #[test]
    fn table_validation() {
        let l = Lattice::new(&[2]).unwrap();
        assert!(NeighborhoodFunction::new(&l, one_d_table(1.0, 0.5, 0.5)).is_ok());
        assert!(NeighborhoodFunction::new(&l, one_d_table(0.9, 0.5, 0.5)).is_err());
        assert!(NeighborhoodFunction::new(&l, one_d_table(1.0, 1.5, 1.5)).is_err());
        let missing = Kernel::table([(&[0i64][..], 1.0), (&[1][..], 0.5)]);
        assert!(NeighborhoodFunction::new(&l, missing).is_err());
        let extra = Kernel::table([(&[0i64][..], 1.0), (&[1][..], 0.5), (&[-1][..], 0.5), (&[2][..], 0.1)]);
        assert!(NeighborhoodFunction::new(&l, extra).is_err());
    }

    #[test]
    fn offset_outside_difference_set() {
        let l = Lattice::new(&[2]).unwrap();
        let nf = NeighborhoodFunction::new(&l, Kernel::Kronecker).unwrap();
        assert!(matches!(nf.value(&[2]), Err(Error::OffsetOutOfDomain(_))));
        assert!(matches!(nf.value(&[0, 0]), Err(Error::OffsetOutOfDomain(_))));
    }

    #[test]
    fn bad_sigma_rejected() {
        let l = Lattice::new(&[2]).unwrap();
        assert!(NeighborhoodFunction::new(&l, Kernel::Gaussian { sigma: 0.0 }).is_err());
    }

    fn arb_lattice() -> impl Strategy<Value = Lattice> {
        prop::collection::vec(1usize..5, 1..4)
            .prop_filter("at most 64 points", |d| d.iter().product::<usize>() <= 64)
            .prop_map(|d| Lattice::new(&d).unwrap())
    }

    fn arb_kernel() -> impl Strategy<Value = Kernel> {
        prop_oneof![
            Just(Kernel::Kronecker),
            (0.1f64..5.0).prop_map(|sigma| Kernel::Gaussian { sigma }),
            (0u64..4).prop_map(|radius| Kernel::Rectangular { radius }),
        ]
    }

    proptest! {
        #[test]
        fn kernels_satisfy_invariants(l in arb_lattice(), kernel in arb_kernel()) {
            let nf = NeighborhoodFunction::new(&l, kernel).unwrap();
            for k in l.difference_offsets() {
                let neg: Vec<i64> = k.iter().map(|c| -c).collect();
                let v = nf.value(&k).unwrap();
                prop_assert!((0.0..=1.0).contains(&v));
                prop_assert_eq!(v, nf.value(&neg).unwrap());
            }
            prop_assert_eq!(nf.value(&vec![0; l.rank()]).unwrap(), 1.0);
        }

        #[test]
        fn symmetric_random_tables_accepted(l in arb_lattice(), seed in any::<u64>()) {
            // Build a symmetric table by hashing |k| canonical form.
            let mut map = BTreeMap::new();
            for k in l.difference_offsets() {
                let neg: Vec<i64> = k.iter().map(|c| -c).collect();
                let canon = std::cmp::max(k.clone(), neg);
                let h = crate::rng::derive_seed(seed, &canon.iter().map(|&c| c as u64).collect::<Vec<_>>());
                let v = if k.iter().all(|&c| c == 0) { 1.0 } else { (h >> 11) as f64 / (1u64 << 53) as f64 };
                map.insert(k, v);
            }
            let nf = NeighborhoodFunction::new(&l, Kernel::Table(map.clone())).unwrap();
            for (k, v) in map {
                prop_assert_eq!(nf.value(&k).unwrap(), v);
            }
        }

        #[test]
        fn flat_order_is_strict_lexicographic(l in arb_lattice()) {
            let pts: Vec<_> = l.points().collect();
            for a in 0..pts.len() {
                for b in 0..pts.len() {
                    prop_assert_eq!(a.cmp(&b), pts[a].cmp(&pts[b]));
                    prop_assert_eq!(l.index_of(&pts[a]), Some(a));
                }
            }
        }
    }
}
