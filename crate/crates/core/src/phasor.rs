//! Complex phasors and the symmetrical-components (Fortescue) transform.
//!
//! Every electrical quantity in the crate is a per-unit phasor. Angles are
//! radians internally; degrees only appear at I/O boundaries.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fundamental-frequency phasor in per-unit.
pub type Phasor = Complex64;

/// The Fortescue operator, the unit phasor at +120 degrees.
pub const ALPHA: Phasor = Phasor::new(-0.5, 0.866_025_403_784_438_6);
/// `ALPHA * ALPHA`, the unit phasor at -120 degrees.
pub const ALPHA2: Phasor = Phasor::new(-0.5, -0.866_025_403_784_438_6);

pub const ZERO: Phasor = Phasor::new(0.0, 0.0);

#[inline]
pub fn is_finite(z: Phasor) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

/// Builds a phasor from a magnitude and an angle in degrees.
pub fn from_polar_deg(mag: f64, deg: f64) -> Phasor {
    Phasor::from_polar(mag, deg.to_radians())
}

/// Phase-domain triple (a, b, c). Serialized as `[[re, im], [re, im], [re, im]]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[Phasor; 3]", into = "[Phasor; 3]")]
pub struct ThreePhaseSet {
    pub a: Phasor,
    pub b: Phasor,
    pub c: Phasor,
}

impl ThreePhaseSet {
    pub const fn new(a: Phasor, b: Phasor, c: Phasor) -> Self {
        Self { a, b, c }
    }

    /// Balanced positive-sequence set with phase `a` equal to `a`.
    pub fn balanced(a: Phasor) -> Self {
        Self::new(a, ALPHA2 * a, ALPHA * a)
    }

    pub fn as_array(&self) -> [Phasor; 3] {
        [self.a, self.b, self.c]
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|z| is_finite(*z))
    }

    pub fn scale(&self, k: Phasor) -> Self {
        Self::new(self.a * k, self.b * k, self.c * k)
    }

    /// Weighted phase combination `w_a*a + w_b*b + w_c*c`.
    pub fn combine(&self, weights: [f64; 3]) -> Phasor {
        self.a * weights[0] + self.b * weights[1] + self.c * weights[2]
    }
}

impl From<[Phasor; 3]> for ThreePhaseSet {
    fn from(v: [Phasor; 3]) -> Self {
        Self::new(v[0], v[1], v[2])
    }
}

impl From<ThreePhaseSet> for [Phasor; 3] {
    fn from(s: ThreePhaseSet) -> Self {
        s.as_array()
    }
}

impl Add for ThreePhaseSet {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.a + o.a, self.b + o.b, self.c + o.c)
    }
}

impl Sub for ThreePhaseSet {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.a - o.a, self.b - o.b, self.c - o.c)
    }
}

impl Mul<f64> for ThreePhaseSet {
    type Output = Self;
    fn mul(self, k: f64) -> Self {
        Self::new(self.a * k, self.b * k, self.c * k)
    }
}

/// Positive-, negative- and zero-sequence components referred to phase `a`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SequenceSet {
    pub pos: Phasor,
    pub neg: Phasor,
    pub zero: Phasor,
}

impl SequenceSet {
    pub const fn new(pos: Phasor, neg: Phasor, zero: Phasor) -> Self {
        Self { pos, neg, zero }
    }

    pub fn is_finite(&self) -> bool {
        is_finite(self.pos) && is_finite(self.neg) && is_finite(self.zero)
    }

    pub fn get(&self, seq: Sequence) -> Phasor {
        match seq {
            Sequence::Pos => self.pos,
            Sequence::Neg => self.neg,
            Sequence::Zero => self.zero,
        }
    }
}

impl Add for SequenceSet {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.pos + o.pos, self.neg + o.neg, self.zero + o.zero)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sequence {
    Pos,
    Neg,
    Zero,
}

impl Sequence {
    pub const ALL: [Sequence; 3] = [Sequence::Pos, Sequence::Neg, Sequence::Zero];
}

/// Total line impedance per sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SequenceImpedances {
    pub z1: Phasor,
    pub z2: Phasor,
    pub z0: Phasor,
}

impl SequenceImpedances {
    /// Negative sequence defaults to the positive-sequence impedance.
    pub fn new(z1: Phasor, z0: Phasor) -> Self {
        Self { z1, z2: z1, z0 }
    }

    pub fn get(&self, seq: Sequence) -> Phasor {
        match seq {
            Sequence::Pos => self.z1,
            Sequence::Neg => self.z2,
            Sequence::Zero => self.z0,
        }
    }
}

/// Forward transform: `pos = (a + α b + α² c)/3`, `neg = (a + α² b + α c)/3`,
/// `zero = (a + b + c)/3`.
pub fn to_sequence(abc: &ThreePhaseSet) -> Result<SequenceSet> {
    if !abc.is_finite() {
        return Err(Error::InvalidInput(format!("non-finite phase set {abc:?}")));
    }
    Ok(to_sequence_unchecked(abc))
}

pub(crate) fn to_sequence_unchecked(abc: &ThreePhaseSet) -> SequenceSet {
    let ThreePhaseSet { a, b, c } = *abc;
    SequenceSet {
        pos: (a + ALPHA * b + ALPHA2 * c) / 3.0,
        neg: (a + ALPHA2 * b + ALPHA * c) / 3.0,
        zero: (a + b + c) / 3.0,
    }
}

/// Inverse transform.
pub fn from_sequence(seq: &SequenceSet) -> Result<ThreePhaseSet> {
    if !seq.is_finite() {
        return Err(Error::InvalidInput(format!("non-finite sequence set {seq:?}")));
    }
    Ok(from_sequence_unchecked(seq))
}

pub(crate) fn from_sequence_unchecked(seq: &SequenceSet) -> ThreePhaseSet {
    let SequenceSet { pos, neg, zero } = *seq;
    ThreePhaseSet { a: pos + neg + zero, b: ALPHA2 * pos + ALPHA * neg + zero, c: ALPHA * pos + ALPHA2 * neg + zero }
}

/// Zero-sequence compensation factor `K0 = Z0 / Z1`.
pub fn zero_seq_factor(z: &SequenceImpedances) -> Result<Phasor> {
    if z.z1.norm() == 0.0 || !is_finite(z.z1) {
        return Err(Error::DegenerateImpedance(format!("z1 = {}", z.z1)));
    }
    Ok(z.z0 / z.z1)
}
