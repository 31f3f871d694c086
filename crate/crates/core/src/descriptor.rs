//! Binary descriptors, their real-valued relaxation, and the conversions between them.
//!
//! Bit `i` of a descriptor lives in octet `i / 8` at position `7 - i % 8`, i.e. bits are
//! MSB-first within each octet. This is the order in which ORB-SLAM vocabulary files print
//! descriptor octets, so centroids serialize byte-identically.

use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default descriptor width (ORB).
pub const DEFAULT_BITS: usize = 256;

/// Default real-to-binary threshold.
pub const BINARIZE_THRESHOLD: f64 = 0.5;

/// A fixed-width bit string.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BinaryDescriptor {
    bytes: Vec<u8>,
}

impl BinaryDescriptor {
    pub fn from_bytes(bytes: impl Into<Vec<u8>>) -> Self {
        Self {
            bytes: bytes.into(),
        }
    }

    pub fn zeros(bits: usize) -> Self {
        debug_assert!(bits.is_multiple_of(8));
        Self {
            bytes: vec![0; bits / 8],
        }
    }

    pub fn ones(bits: usize) -> Self {
        Self {
            bytes: vec![0xff; bits / 8],
        }
    }

    /// Builds a descriptor from a bit slice; `bits.len()` must be a multiple of 8.
    pub fn from_bits(bits: &[bool]) -> Self {
        let mut d = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            d.set_bit(i, b);
        }
        d
    }

    pub fn random<R: Rng + ?Sized>(bits: usize, rng: &mut R) -> Self {
        let mut bytes = vec![0u8; bits / 8];
        rng.fill(bytes.as_mut_slice());
        Self { bytes }
    }

    #[inline]
    pub fn bits(&self) -> usize {
        self.bytes.len() * 8
    }

    #[inline]
    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    #[inline]
    pub fn bit(&self, i: usize) -> bool {
        (self.bytes[i / 8] >> (7 - i % 8)) & 1 == 1
    }

    #[inline]
    pub fn set_bit(&mut self, i: usize, value: bool) {
        let mask = 1u8 << (7 - i % 8);
        if value {
            self.bytes[i / 8] |= mask;
        } else {
            self.bytes[i / 8] &= !mask;
        }
    }

    pub fn complement(&self) -> Self {
        Self {
            bytes: self.bytes.iter().map(|b| !b).collect(),
        }
    }

    pub fn count_ones(&self) -> u32 {
        self.bytes.iter().map(|b| b.count_ones()).sum()
    }

    /// Hamming distance without the width check. Callers guarantee equal widths.
    #[inline]
    pub fn distance(&self, other: &Self) -> u32 {
        debug_assert_eq!(self.bytes.len(), other.bytes.len());
        hamming_bytes(&self.bytes, &other.bytes)
    }
}

impl std::fmt::Debug for BinaryDescriptor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("BinaryDescriptor(")?;
        for b in &self.bytes {
            write!(f, "{b:08b}")?;
        }
        f.write_str(")")
    }
}

#[inline]
fn hamming_bytes(a: &[u8], b: &[u8]) -> u32 {
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let tail: u32 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| (x ^ y).count_ones())
        .sum();
    tail + ca
        .zip(cb)
        .map(|(x, y)| {
            let x = u64::from_le_bytes(x.try_into().unwrap());
            let y = u64::from_le_bytes(y.try_into().unwrap());
            (x ^ y).count_ones()
        })
        .sum::<u32>()
}

/// Per-bit real relaxation of a binary descriptor; every component lies in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RealDescriptor {
    values: Vec<f64>,
}

impl RealDescriptor {
    /// Wraps `values`, rejecting components outside `[0, 1]` (and NaN).
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Config(format!(
                "real descriptor component {bad} outside [0, 1]"
            )));
        }
        Ok(Self { values })
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub(crate) fn distance_sq(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.values.len(), other.values.len());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}

fn check_width(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::WidthMismatch { expected, found });
    }
    Ok(())
}

pub fn hamming(a: &BinaryDescriptor, b: &BinaryDescriptor) -> Result<u32> {
    check_width(a.bits(), b.bits())?;
    Ok(a.distance(b))
}

/// Binary-to-real: component `i` is 1.0 when bit `i` is set.
pub fn realize(b: &BinaryDescriptor) -> RealDescriptor {
    let values = (0..b.bits())
        .map(|i| if b.bit(i) { 1.0 } else { 0.0 })
        .collect();
    RealDescriptor { values }
}

/// Real-to-binary: bit `i` is set iff `values[i] > threshold`. Values equal to the
/// threshold map to 0, which keeps this consistent with the majority tie rule.
pub fn binarize(r: &RealDescriptor, threshold: f64) -> BinaryDescriptor {
    let mut out = BinaryDescriptor::zeros(r.len());
    for (i, &v) in r.values.iter().enumerate() {
        if v > threshold {
            out.set_bit(i, true);
        }
    }
    out
}

/// Per-bit set counts over a collection of descriptors.
#[derive(Clone, Debug)]
pub(crate) struct BitCounts {
    counts: Vec<u32>,
    total: u32,
}

impl BitCounts {
    pub(crate) fn new(bits: usize) -> Self {
        Self {
            counts: vec![0; bits],
            total: 0,
        }
    }

    #[inline]
    pub(crate) fn add(&mut self, d: &BinaryDescriptor) {
        for (byte, counts) in d.as_bytes().iter().zip(self.counts.chunks_exact_mut(8)) {
            for (j, c) in counts.iter_mut().enumerate() {
                *c += ((byte >> (7 - j)) & 1) as u32;
            }
        }
        self.total += 1;
    }

    /// Bit set iff strictly more than half of the inputs set it.
    pub(crate) fn majority(&self) -> BinaryDescriptor {
        let mut out = BinaryDescriptor::zeros(self.counts.len());
        for (i, &c) in self.counts.iter().enumerate() {
            if 2 * c > self.total {
                out.set_bit(i, true);
            }
        }
        out
    }

    /// Component-wise mean of the realized inputs. `count / n` is exactly what summing
    /// 0.0/1.0 values and dividing by `n` yields, so this equals `real_mean` bit for bit.
    pub(crate) fn mean(&self) -> RealDescriptor {
        let n = self.total as f64;
        RealDescriptor {
            values: self.counts.iter().map(|&c| c as f64 / n).collect(),
        }
    }
}

/// k-majority centroid: bit set iff strictly more than half the inputs set it; ties give 0.
pub fn majority_centroid(descs: &[BinaryDescriptor]) -> Result<BinaryDescriptor> {
    let first = descs
        .first()
        .ok_or(Error::EmptyInput("majority_centroid"))?;
    let mut counts = BitCounts::new(first.bits());
    for d in descs {
        check_width(first.bits(), d.bits())?;
        counts.add(d);
    }
    Ok(counts.majority())
}

/// Component-wise arithmetic mean, summed in input order.
pub fn real_mean(points: &[RealDescriptor]) -> Result<RealDescriptor> {
    let first = points.first().ok_or(Error::EmptyInput("real_mean"))?;
    for p in points {
        check_width(first.len(), p.len())?;
    }
    let refs: Vec<&RealDescriptor> = points.iter().collect();
    Ok(mean_of_refs(&refs))
}

pub(crate) fn mean_of_refs(points: &[&RealDescriptor]) -> RealDescriptor {
    let mut sum = vec![0.0f64; points[0].len()];
    for p in points {
        for (s, v) in sum.iter_mut().zip(&p.values) {
            *s += v;
        }
    }
    let n = points.len() as f64;
    for s in &mut sum {
        *s /= n;
    }
    RealDescriptor { values: sum }
}

pub fn euclidean_sq(a: &RealDescriptor, b: &RealDescriptor) -> Result<f64> {
    check_width(a.len(), b.len())?;
    Ok(a.distance_sq(b))
}

/// A corpus of descriptors partitioned into per-image groups.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DescriptorSet {
    bits: usize,
    descriptors: Vec<BinaryDescriptor>,
    /// Exclusive end offsets of each group.
    group_ends: Vec<usize>,
}

impl DescriptorSet {
    /// Builds a set from descriptors and exclusive group end offsets.
    ///
    /// An empty `group_ends` on a non-empty set means "one group".
    pub fn new(
        bits: usize,
        descriptors: Vec<BinaryDescriptor>,
        group_ends: Vec<usize>,
    ) -> Result<Self> {
        if bits == 0 || !bits.is_multiple_of(8) {
            return Err(Error::Config(format!(
                "descriptor width {bits} is not a positive multiple of 8"
            )));
        }
        for d in &descriptors {
            check_width(bits, d.bits())?;
        }
        let mut prev = 0;
        for &end in &group_ends {
            if end < prev {
                return Err(Error::Config("group offsets are not ordered".into()));
            }
            prev = end;
        }
        if !group_ends.is_empty() && prev != descriptors.len() {
            return Err(Error::Config(format!(
                "groups cover {prev} descriptors but the set has {}",
                descriptors.len()
            )));
        }
        Ok(Self {
            bits,
            descriptors,
            group_ends,
        })
    }

    /// One group holding every descriptor. Width is taken from the first descriptor.
    pub fn single(descriptors: Vec<BinaryDescriptor>) -> Result<Self> {
        let bits = descriptors.first().map_or(DEFAULT_BITS, |d| d.bits());
        let ends = if descriptors.is_empty() {
            vec![]
        } else {
            vec![descriptors.len()]
        };
        Self::new(bits, descriptors, ends)
    }

    pub fn from_groups(bits: usize, groups: Vec<Vec<BinaryDescriptor>>) -> Result<Self> {
        let mut ends = Vec::with_capacity(groups.len());
        let mut all = Vec::new();
        for g in groups {
            all.extend(g);
            ends.push(all.len());
        }
        Self::new(bits, all, ends)
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn descriptors(&self) -> &[BinaryDescriptor] {
        &self.descriptors
    }

    pub fn len(&self) -> usize {
        self.descriptors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.descriptors.is_empty()
    }

    /// The stored group end offsets, exactly as given.
    pub fn group_ends(&self) -> &[usize] {
        &self.group_ends
    }

    /// Group ranges, with a set lacking group metadata treated as one group.
    pub fn group_ranges(&self) -> Vec<Range<usize>> {
        if self.group_ends.is_empty() {
            return if self.descriptors.is_empty() {
                vec![]
            } else {
                std::iter::once(0..self.descriptors.len()).collect()
            };
        }
        let mut start = 0;
        self.group_ends
            .iter()
            .map(|&end| {
                let r = start..end;
                start = end;
                r
            })
            .collect()
    }

    pub fn group_count(&self) -> usize {
        self.group_ranges().len()
    }

    pub fn groups(&self) -> impl Iterator<Item = &[BinaryDescriptor]> + '_ {
        self.group_ranges()
            .into_iter()
            .map(move |r| &self.descriptors[r])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn d8(byte: u8) -> BinaryDescriptor {
        BinaryDescriptor::from_bytes(vec![byte])
    }

    fn real(v: &[f64]) -> RealDescriptor {
        RealDescriptor::new(v.to_vec()).unwrap()
    }

    #[test]
    fn hamming_fixtures() {
        let x = BinaryDescriptor::random(256, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(hamming(&x, &x).unwrap(), 0);
        assert_eq!(hamming(&d8(0), &d8(0xff)).unwrap(), 8);
        assert_eq!(hamming(&d8(0b1100_1010), &d8(0b1010_1010)).unwrap(), 2);
    }

    #[test]
    fn hamming_width_mismatch() {
        let err = hamming(&d8(0), &BinaryDescriptor::zeros(16)).unwrap_err();
        assert!(matches!(
            err,
            Error::WidthMismatch {
                expected: 8,
                found: 16
            }
        ));
    }

    #[test]
    fn hamming_handles_non_multiple_of_64() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for bits in [8, 24, 72, 136] {
            let a = BinaryDescriptor::random(bits, &mut rng);
            let b = BinaryDescriptor::random(bits, &mut rng);
            let naive = (0..bits).filter(|&i| a.bit(i) != b.bit(i)).count() as u32;
            assert_eq!(a.distance(&b), naive);
        }
    }

    #[test]
    fn realize_bit_order() {
        assert_eq!(realize(&d8(0)).values(), &[0.0; 8]);
        assert_eq!(
            realize(&d8(0b1000_0001)).values(),
            &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]
        );
    }

    #[test]
    fn binarize_fixtures() {
        let r = real(&[1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(binarize(&r, 0.5), d8(0b1100_0000));
        assert_eq!(binarize(&real(&[0.5; 8]), 0.5), d8(0));
        let r = real(&[0.51, 0.49, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let b = binarize(&r, 0.5);
        assert!(b.bit(0));
        assert!(!b.bit(1));
    }

    #[test]
    fn real_descriptor_rejects_out_of_range() {
        assert!(RealDescriptor::new(vec![0.0, 1.5]).is_err());
        assert!(RealDescriptor::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn majority_fixtures() {
        let x = d8(0b1011_0010);
        assert_eq!(majority_centroid(std::slice::from_ref(&x)).unwrap(), x);
        // Upper nibble carries the D=4 pattern; set-votes per bit are (3, 1, 1, 0).
        let v = [d8(0b1100_0000), d8(0b1010_0000), d8(0b1000_0000)];
        assert_eq!(majority_centroid(&v).unwrap(), d8(0b1000_0000));
        assert_eq!(
            majority_centroid(&[x.clone(), x.complement()]).unwrap(),
            d8(0)
        );
        assert!(matches!(majority_centroid(&[]), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn majority_is_exhaustive_minimizer() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=7 {
            for _ in 0..20 {
                let v: Vec<_> = (0..n)
                    .map(|_| BinaryDescriptor::random(8, &mut rng))
                    .collect();
                let cost = |c: &BinaryDescriptor| v.iter().map(|d| d.distance(c)).sum::<u32>();
                let best = (0..=255u8).map(|b| cost(&d8(b))).min().unwrap();
                assert_eq!(cost(&majority_centroid(&v).unwrap()), best);
            }
        }
    }

    #[test]
    fn real_mean_fixtures() {
        let r = real(&[0.25, 0.75]);
        assert_eq!(real_mean(std::slice::from_ref(&r)).unwrap(), r);
        let m = real_mean(&[real(&[0.0; 4]), real(&[1.0; 4])]).unwrap();
        assert_eq!(m.values(), &[0.5; 4]);
        assert!(real_mean(&[]).is_err());
    }

    #[test]
    fn real_mean_matches_summation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<_> = (0..10)
            .map(|_| real(&(0..16).map(|_| rng.gen::<f64>()).collect::<Vec<_>>()))
            .collect();
        let m = real_mean(&pts).unwrap();
        for i in 0..16 {
            let mut s = 0.0;
            for p in &pts {
                s += p.values()[i];
            }
            assert!((m.values()[i] - s / 10.0).abs() < 1e-12);
        }
    }

    #[test]
    fn real_mean_is_stationary_under_perturbation() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pts: Vec<_> = (0..12)
            .map(|_| real(&(0..8).map(|_| rng.gen::<f64>()).collect::<Vec<_>>()))
            .collect();
        let m = real_mean(&pts).unwrap();
        let objective = |c: &[f64]| -> f64 {
            pts.iter()
                .map(|p| {
                    p.values()
                        .iter()
                        .zip(c)
                        .map(|(a, b)| (a - b).powi(2))
                        .sum::<f64>()
                })
                .sum()
        };
        let base = objective(m.values());
        for i in 0..8 {
            for eps in [1e-3, -1e-3] {
                let mut c = m.values().to_vec();
                c[i] += eps;
                assert!(objective(&c) >= base);
            }
        }
    }

    #[test]
    fn euclidean_fixtures() {
        let a = real(&[0.5, 0.5]);
        assert_eq!(euclidean_sq(&a, &a).unwrap(), 0.0);
        assert_eq!(euclidean_sq(&a, &real(&[0.0, 1.0])).unwrap(), 0.5);
        assert!(euclidean_sq(&a, &real(&[0.0])).is_err());
    }

    #[test]
    fn bit_counts_mean_equals_real_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let v: Vec<_> = (0..37)
            .map(|_| BinaryDescriptor::random(64, &mut rng))
            .collect();
        let mut counts = BitCounts::new(64);
        v.iter().for_each(|d| counts.add(d));
        let realized: Vec<_> = v.iter().map(realize).collect();
        assert_eq!(counts.mean(), real_mean(&realized).unwrap());
    }

    #[test]
    fn descriptor_set_groups() {
        let d = || BinaryDescriptor::zeros(8);
        let set = DescriptorSet::new(8, vec![d(), d(), d()], vec![]).unwrap();
        assert_eq!(set.group_ranges(), vec![0..3]);
        let set = DescriptorSet::new(8, vec![d(), d(), d()], vec![1, 1, 3]).unwrap();
        assert_eq!(set.group_ranges(), vec![0..1, 1..1, 1..3]);
        assert!(DescriptorSet::new(8, vec![d()], vec![2]).is_err());
        assert!(DescriptorSet::new(8, vec![d(), d()], vec![2, 1]).is_err());
        assert!(DescriptorSet::new(12, vec![], vec![]).is_err());
        assert!(DescriptorSet::new(16, vec![d()], vec![]).is_err());
        assert_eq!(DescriptorSet::single(vec![]).unwrap().group_count(), 0);
    }

    fn arb_desc(bytes: usize) -> impl Strategy<Value = BinaryDescriptor> {
        proptest::collection::vec(any::<u8>(), bytes).prop_map(BinaryDescriptor::from_bytes)
    }

    proptest! {
        #[test]
        fn binarize_realize_roundtrip(x in arb_desc(32)) {
            prop_assert_eq!(binarize(&realize(&x), BINARIZE_THRESHOLD), x);
        }

        #[test]
        fn euclidean_of_realized_is_hamming(x in arb_desc(32), y in arb_desc(32)) {
            prop_assert_eq!(
                euclidean_sq(&realize(&x), &realize(&y)).unwrap(),
                hamming(&x, &y).unwrap() as f64
            );
        }

        #[test]
        fn hamming_triangle(x in arb_desc(32), y in arb_desc(32), z in arb_desc(32)) {
            prop_assert!(x.distance(&z) <= x.distance(&y) + y.distance(&z));
            prop_assert_eq!(x.distance(&y), y.distance(&x));
        }

        #[test]
        fn majority_equals_binarized_mean(v in proptest::collection::vec(arb_desc(4), 1..12)) {
            let realized: Vec<_> = v.iter().map(realize).collect();
            prop_assert_eq!(
                majority_centroid(&v).unwrap(),
                binarize(&real_mean(&realized).unwrap(), BINARIZE_THRESHOLD)
            );
        }
    }
}
