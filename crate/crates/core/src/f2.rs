//! Linear algebra over GF(2).
//!
//! Vectors are packed into a single `u64` word. Coordinate `i` of an
//! `n`-dimensional vector lives at bit `n - 1 - i`, so the packed word is
//! exactly the computational-basis index of the corresponding `n`-qubit
//! register and lexicographic order on coordinates is integer order.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Largest ambient dimension a packed vector can hold.
pub const MAX_AMBIENT_DIM: usize = 64;

/// Default cap on `dim(S)` for [`F2Subspace::enumerate`].
pub const DEFAULT_ENUMERATION_CAP: usize = 20;

#[inline]
fn mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct F2Vector {
    n: usize,
    bits: u64,
}

impl F2Vector {
    pub fn new(n: usize, bits: u64) -> Result<Self> {
        if n > MAX_AMBIENT_DIM {
            return Err(Error::InvalidDimension(format!(
                "ambient dimension {n} exceeds {MAX_AMBIENT_DIM}"
            )));
        }
        if bits & !mask(n) != 0 {
            return Err(Error::InvalidDimension(format!(
                "value {bits:#x} does not fit in {n} bits"
            )));
        }
        Ok(Self { n, bits })
    }

    pub fn zero(n: usize) -> Self {
        Self { n, bits: 0 }
    }

    /// Builds a vector from explicit coordinates, first coordinate first.
    pub fn from_coords(coords: &[u8]) -> Result<Self> {
        let n = coords.len();
        let mut bits = 0u64;
        for &c in coords {
            if c > 1 {
                return Err(Error::InvalidParameter(format!(
                    "coordinate {c} is not a bit"
                )));
            }
            bits = (bits << 1) | c as u64;
        }
        Self::new(n, bits)
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        Self {
            n,
            bits: rng.gen::<u64>() & mask(n),
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn bits(&self) -> u64 {
        self.bits
    }

    #[inline]
    pub fn is_zero(&self) -> bool {
        self.bits == 0
    }

    pub fn coord(&self, i: usize) -> u8 {
        assert!(
            i < self.n,
            "coordinate {i} out of range for length {}",
            self.n
        );
        ((self.bits >> (self.n - 1 - i)) & 1) as u8
    }

    /// Inner product mod 2.
    pub fn dot(&self, other: &F2Vector) -> Result<u8> {
        if self.n != other.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                got: other.n,
            });
        }
        Ok(((self.bits & other.bits).count_ones() & 1) as u8)
    }

    pub fn xor(&self, other: &F2Vector) -> Result<F2Vector> {
        if self.n != other.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                got: other.n,
            });
        }
        Ok(F2Vector {
            n: self.n,
            bits: self.bits ^ other.bits,
        })
    }

    pub fn to_hex(&self) -> String {
        let width = self.n.div_ceil(4).max(1);
        format!("{:0width$x}", self.bits, width = width)
    }

    pub fn from_hex(n: usize, s: &str) -> Result<Self> {
        let bits = u64::from_str_radix(s, 16)
            .map_err(|e| Error::Serialization(format!("bad hex row `{s}`: {e}")))?;
        Self::new(n, bits)
    }
}

impl fmt::Debug for F2Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F2Vector({self})")
    }
}

impl fmt::Display for F2Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.n {
            write!(f, "{}", self.coord(i))?;
        }
        Ok(())
    }
}

/// A linear subspace of GF(2)^n stored as its reduced row-echelon basis.
///
/// The RREF basis is unique for a given set of vectors, so structural
/// equality of two values coincides with equality of the subspaces.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct F2Subspace {
    n: usize,
    rows: Vec<u64>,
}

impl fmt::Debug for F2Subspace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<String> = self.basis().iter().map(|v| v.to_string()).collect();
        f.debug_struct("F2Subspace")
            .field("n", &self.n)
            .field("basis", &rows)
            .finish()
    }
}

/// Reduces `rows` in place to RREF and drops zero rows.
fn rref(n: usize, mut rows: Vec<u64>) -> Vec<u64> {
    let mut rank = 0;
    for col in 0..n {
        let bit = 1u64 << (n - 1 - col);
        let Some(pivot) = (rank..rows.len()).find(|&r| rows[r] & bit != 0) else {
            continue;
        };
        rows.swap(rank, pivot);
        let p = rows[rank];
        for (r, row) in rows.iter_mut().enumerate() {
            if r != rank && *row & bit != 0 {
                *row ^= p;
            }
        }
        rank += 1;
        if rank == rows.len() {
            break;
        }
    }
    rows.truncate(rank);
    rows
}

/// Bit mask of the leading coordinate of a nonzero packed row.
#[inline]
fn leading_bit(row: u64) -> u64 {
    1u64 << (63 - row.leading_zeros())
}

impl F2Subspace {
    fn check_n(n: usize) -> Result<()> {
        if n > MAX_AMBIENT_DIM {
            return Err(Error::InvalidDimension(format!(
                "ambient dimension {n} exceeds {MAX_AMBIENT_DIM}"
            )));
        }
        Ok(())
    }

    pub fn zero(n: usize) -> Result<Self> {
        Self::check_n(n)?;
        Ok(Self {
            n,
            rows: Vec::new(),
        })
    }

    pub fn full(n: usize) -> Result<Self> {
        Self::check_n(n)?;
        let rows = (0..n).map(|c| 1u64 << (n - 1 - c)).collect();
        Ok(Self { n, rows })
    }

    /// The span of an arbitrary list of vectors, canonicalized.
    pub fn span(n: usize, vectors: &[F2Vector]) -> Result<Self> {
        Self::check_n(n)?;
        let mut rows = Vec::with_capacity(vectors.len());
        for v in vectors {
            if v.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    got: v.len(),
                });
            }
            if !v.is_zero() {
                rows.push(v.bits());
            }
        }
        Ok(Self {
            n,
            rows: rref(n, rows),
        })
    }

    #[inline]
    pub fn ambient_dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    /// Number of vectors in the subspace, `2^dim`.
    pub fn cardinality(&self) -> u128 {
        1u128 << self.dim()
    }

    pub fn basis(&self) -> Vec<F2Vector> {
        self.rows
            .iter()
            .map(|&bits| F2Vector { n: self.n, bits })
            .collect()
    }

    /// Reduces a packed value against the basis; zero iff it is a member.
    #[inline]
    fn reduce(&self, mut bits: u64) -> u64 {
        for &row in &self.rows {
            if bits & leading_bit(row) != 0 {
                bits ^= row;
            }
        }
        bits
    }

    /// Membership test on a packed value of width `ambient_dim`.
    ///
    /// Callers own the width check; this is the hot path used by oracle gates.
    #[inline]
    pub fn contains_bits(&self, bits: u64) -> bool {
        self.reduce(bits) == 0
    }

    /// Set membership. The zero vector is a member of every subspace.
    pub fn member(&self, v: &F2Vector) -> Result<bool> {
        if v.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                got: v.len(),
            });
        }
        Ok(self.contains_bits(v.bits()))
    }

    /// The orthogonal complement `{y : x·y = 0 for all x in S}`.
    pub fn dual(&self) -> F2Subspace {
        let n = self.n;
        let pivots: Vec<u64> = self.rows.iter().map(|&r| leading_bit(r)).collect();
        let pivot_mask = pivots.iter().fold(0u64, |acc, p| acc | p);
        let mut out = Vec::with_capacity(n - self.rows.len());
        for col in 0..n {
            let free = 1u64 << (n - 1 - col);
            if pivot_mask & free != 0 {
                continue;
            }
            // y_free = 1 and y_pivot(k) = row_k[free] zeroes every row product.
            let mut y = free;
            for (row, pivot) in self.rows.iter().zip(&pivots) {
                if row & free != 0 {
                    y |= pivot;
                }
            }
            out.push(y);
        }
        F2Subspace {
            n,
            rows: rref(n, out),
        }
    }

    /// Vector with coefficient word `coeffs` (row 0 is the most significant
    /// coefficient bit).
    #[inline]
    pub fn combination(&self, coeffs: u64) -> u64 {
        let d = self.rows.len();
        let mut v = 0u64;
        for (k, &row) in self.rows.iter().enumerate() {
            if (coeffs >> (d - 1 - k)) & 1 == 1 {
                v ^= row;
            }
        }
        v
    }

    /// All `2^dim` members in lexicographic order of their coefficient vectors.
    ///
    /// Because the basis is in RREF this is also increasing integer order.
    pub fn enumerate(&self) -> Result<Vec<F2Vector>> {
        self.enumerate_with_cap(DEFAULT_ENUMERATION_CAP)
    }

    pub fn enumerate_with_cap(&self, cap: usize) -> Result<Vec<F2Vector>> {
        if self.dim() > cap {
            return Err(Error::Resource {
                what: "subspace enumeration (dimension)",
                requested: self.dim(),
                cap,
            });
        }
        Ok((0..(1u64 << self.dim()))
            .map(|c| F2Vector {
                n: self.n,
                bits: self.combination(c),
            })
            .collect())
    }

    /// A uniformly random member.
    pub fn random_member<R: Rng + ?Sized>(&self, rng: &mut R) -> F2Vector {
        let c = rng.gen::<u64>() & mask(self.dim());
        F2Vector {
            n: self.n,
            bits: self.combination(c),
        }
    }

    pub fn is_subspace_of(&self, other: &F2Subspace) -> bool {
        self.n == other.n && self.rows.iter().all(|&r| other.contains_bits(r))
    }
}

/// A uniformly random `d`-dimensional subspace of GF(2)^n.
///
/// Draws a uniformly random ordered basis by rejection; every subspace has
/// the same number of ordered bases, so the induced subspace is uniform.
pub fn rand_subspace<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Result<F2Subspace> {
    F2Subspace::check_n(n)?;
    if d > n {
        return Err(Error::InvalidDimension(format!(
            "cannot pick a {d}-dimensional subspace of GF(2)^{n}"
        )));
    }
    let mut span = F2Subspace {
        n,
        rows: Vec::with_capacity(d),
    };
    while span.dim() < d {
        let v = rng.gen::<u64>() & mask(n);
        if span.reduce(v) == 0 {
            continue;
        }
        let mut rows = span.rows.clone();
        rows.push(v);
        span.rows = rref(n, rows);
    }
    Ok(span)
}

#[derive(Serialize, Deserialize)]
struct SubspaceRepr {
    n: usize,
    basis: Vec<String>,
}

impl Serialize for F2Subspace {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        SubspaceRepr {
            n: self.n,
            basis: self.basis().iter().map(F2Vector::to_hex).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for F2Subspace {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = SubspaceRepr::deserialize(deserializer)?;
        let rows = repr
            .basis
            .iter()
            .map(|s| F2Vector::from_hex(repr.n, s))
            .collect::<Result<Vec<_>>>()
            .map_err(D::Error::custom)?;
        let span = F2Subspace::span(repr.n, &rows).map_err(D::Error::custom)?;
        if span.dim() != rows.len() {
            return Err(D::Error::custom("basis rows are linearly dependent"));
        }
        Ok(span)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::{BTreeSet, HashMap};

    fn v(coords: &[u8]) -> F2Vector {
        F2Vector::from_coords(coords).unwrap()
    }

    /// Every subspace of GF(2)^n, found by closing every subset of vectors
    /// under addition. Independent of the RREF code path.
    fn all_subspaces_brute(n: usize) -> BTreeSet<BTreeSet<u64>> {
        let mut seen = BTreeSet::new();
        let mut frontier = vec![BTreeSet::from([0u64])];
        seen.insert(BTreeSet::from([0u64]));
        while let Some(s) = frontier.pop() {
            for x in 0..(1u64 << n) {
                if s.contains(&x) {
                    continue;
                }
                let mut t = s.clone();
                for &y in &s {
                    t.insert(x ^ y);
                }
                if seen.insert(t.clone()) {
                    frontier.push(t);
                }
            }
        }
        seen
    }

    fn members(s: &F2Subspace) -> BTreeSet<u64> {
        s.enumerate().unwrap().iter().map(|v| v.bits()).collect()
    }

    #[test]
    fn rand_subspace_trivial_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(
            rand_subspace(2, 0, &mut rng).unwrap(),
            F2Subspace::zero(2).unwrap()
        );
        assert_eq!(
            rand_subspace(2, 2, &mut rng).unwrap(),
            F2Subspace::full(2).unwrap()
        );
        assert!(matches!(
            rand_subspace(2, 3, &mut rng),
            Err(Error::InvalidDimension(_))
        ));
    }

    #[test]
    fn three_lines_in_the_plane_are_equally_likely() {
        let lines: Vec<_> = all_subspaces_brute(2)
            .into_iter()
            .filter(|s| s.len() == 2)
            .collect();
        assert_eq!(lines.len(), 3);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 10_000;
        let mut counts: HashMap<BTreeSet<u64>, usize> = HashMap::new();
        for _ in 0..draws {
            let s = rand_subspace(2, 1, &mut rng).unwrap();
            *counts.entry(members(&s)).or_default() += 1;
        }
        let p = 1.0 / 3.0;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        for line in &lines {
            let c = *counts.get(line).unwrap_or(&0) as f64;
            assert!(
                (c - draws as f64 * p).abs() <= 3.0 * sigma,
                "line {line:?}: {c}"
            );
        }
    }

    #[test]
    fn dual_examples() {
        assert_eq!(
            F2Subspace::zero(3).unwrap().dual(),
            F2Subspace::full(3).unwrap()
        );
        let s = F2Subspace::span(2, &[v(&[1, 0])]).unwrap();
        assert_eq!(s.dual(), F2Subspace::span(2, &[v(&[0, 1])]).unwrap());
    }

    #[test]
    fn dual_matches_brute_force_exhaustively() {
        for n in 1..=6 {
            for set in all_subspaces_brute(n) {
                let basis: Vec<_> = set.iter().map(|&b| F2Vector::new(n, b).unwrap()).collect();
                let s = F2Subspace::span(n, &basis).unwrap();
                assert_eq!(members(&s), set);
                let d = s.dual();
                assert_eq!(d.dim(), n - s.dim());
                let brute: BTreeSet<u64> = (0..(1u64 << n))
                    .filter(|y| set.iter().all(|x| (x & y).count_ones() % 2 == 0))
                    .collect();
                assert_eq!(members(&d), brute);
                assert_eq!(d.dual(), s);
            }
        }
    }

    #[test]
    fn membership_examples() {
        let s = F2Subspace::span(2, &[v(&[1, 1])]).unwrap();
        assert!(s.member(&F2Vector::zero(2)).unwrap());
        assert!(!s.member(&v(&[1, 0])).unwrap());
        assert!(s.member(&v(&[1, 1])).unwrap());
        assert!(matches!(
            s.member(&v(&[1, 1, 0])),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn enumeration_examples() {
        assert_eq!(
            F2Subspace::zero(3).unwrap().enumerate().unwrap(),
            vec![F2Vector::zero(3)]
        );
        let s = F2Subspace::span(2, &[v(&[0, 1])]).unwrap();
        assert_eq!(s.enumerate().unwrap(), vec![v(&[0, 0]), v(&[0, 1])]);
        let big = F2Subspace::full(21).unwrap();
        assert!(matches!(big.enumerate(), Err(Error::Resource { .. })));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let n = rng.gen_range(1..=6);
            let d = rng.gen_range(0..=n);
            let s = rand_subspace(n, d, &mut rng).unwrap();
            let list = s.enumerate().unwrap();
            assert_eq!(list.len(), 1 << d);
            assert!(list.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn json_shape() {
        let s = F2Subspace::span(6, &[v(&[1, 0, 1, 0, 0, 1]), v(&[0, 1, 1, 1, 0, 0])]).unwrap();
        let js = serde_json::to_value(&s).unwrap();
        assert_eq!(js["n"], 6);
        assert_eq!(js["basis"], serde_json::json!(["29", "1c"]));
        let back: F2Subspace = serde_json::from_value(js).unwrap();
        assert_eq!(back, s);
        let dep = serde_json::json!({"n": 2, "basis": ["3", "3"]});
        assert!(serde_json::from_value::<F2Subspace>(dep).is_err());
    }

    #[test]
    fn chi_square_uniformity_over_planes_in_f2_4() {
        let planes: Vec<_> = all_subspaces_brute(4)
            .into_iter()
            .filter(|s| s.len() == 4)
            .collect();
        assert_eq!(planes.len(), 35);
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let draws = 100_000usize;
        let mut counts: HashMap<BTreeSet<u64>, usize> = HashMap::new();
        for _ in 0..draws {
            *counts
                .entry(members(&rand_subspace(4, 2, &mut rng).unwrap()))
                .or_default() += 1;
        }
        assert_eq!(counts.len(), 35);
        let expected = draws as f64 / 35.0;
        let chi2: f64 = planes
            .iter()
            .map(|p| {
                let c = counts[p] as f64;
                (c - expected).powi(2) / expected
            })
            .sum();
        // 34 degrees of freedom, upper 0.001 quantile.
        assert!(chi2 < 65.25, "chi2 = {chi2}");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn subspace() -> impl Strategy<Value = F2Subspace> {
            (1usize..=10).prop_flat_map(|n| {
                prop::collection::vec(0u64..(1u64 << n), 0..=n).prop_map(move |rows| {
                    let vs: Vec<_> = rows.iter().map(|&b| F2Vector::new(n, b).unwrap()).collect();
                    F2Subspace::span(n, &vs).unwrap()
                })
            })
        }

        proptest! {
            #[test]
            fn respanning_gives_identical_basis(s in subspace(), seed in any::<u64>()) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut gens: Vec<F2Vector> = (0..(s.dim() + 3)).map(|_| s.random_member(&mut rng)).collect();
                gens.extend(s.basis());
                let again = F2Subspace::span(s.ambient_dim(), &gens).unwrap();
                prop_assert_eq!(again.basis(), s.basis());
            }

            #[test]
            fn dual_is_orthogonal_with_complementary_dimension(s in subspace()) {
                let d = s.dual();
                prop_assert_eq!(d.dim(), s.ambient_dim() - s.dim());
                for a in s.basis() {
                    for b in d.basis() {
                        prop_assert_eq!(a.dot(&b).unwrap(), 0);
                    }
                }
                prop_assert_eq!(d.dual(), s);
            }
        }
    }
}
