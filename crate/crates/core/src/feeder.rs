//! Radial feeder description: total line impedances, IBR taps along the
//! main line and the grid Thevenin source behind the IED bus.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phasor::{is_finite, Phasor, Sequence, SequenceImpedances};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IbrTap {
    pub id: String,
    /// Per-unit distance from the IED, strictly inside (0, 1).
    pub position: f64,
    /// Rated active power on the system base.
    pub rated_power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "GridSourceFile", into = "GridSourceFile")]
pub struct GridSource {
    /// Pre-fault Thevenin voltage at the IED bus.
    pub emf: Phasor,
    pub z: SequenceImpedances,
}

#[derive(Serialize, Deserialize)]
struct GridSourceFile {
    emf: Phasor,
    z1: Phasor,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    z2: Option<Phasor>,
    z0: Phasor,
}

impl From<GridSourceFile> for GridSource {
    fn from(f: GridSourceFile) -> Self {
        Self { emf: f.emf, z: SequenceImpedances { z1: f.z1, z2: f.z2.unwrap_or(f.z1), z0: f.z0 } }
    }
}

impl From<GridSource> for GridSourceFile {
    fn from(s: GridSource) -> Self {
        Self { emf: s.emf, z1: s.z.z1, z2: Some(s.z.z2), z0: s.z.z0 }
    }
}

#[derive(Serialize, Deserialize)]
struct LineFile {
    z1: Phasor,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    z2: Option<Phasor>,
    z0: Phasor,
}

mod line_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(z: &SequenceImpedances, s: S) -> std::result::Result<S::Ok, S::Error> {
        LineFile { z1: z.z1, z2: Some(z.z2), z0: z.z0 }.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<SequenceImpedances, D::Error> {
        let f = LineFile::deserialize(d)?;
        Ok(SequenceImpedances { z1: f.z1, z2: f.z2.unwrap_or(f.z1), z0: f.z0 })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeederSpec {
    pub name: String,
    pub base_mva: f64,
    pub base_kv: f64,
    #[serde(with = "line_serde")]
    pub line: SequenceImpedances,
    pub source: GridSource,
    #[serde(default)]
    pub taps: Vec<IbrTap>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub from: f64,
    pub to: f64,
}

impl Segment {
    pub fn new(from: f64, to: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&from) || !(0.0..=1.0).contains(&to) || from > to {
            return Err(Error::Range(format!("segment ({from}, {to}) outside 0 <= from <= to <= 1")));
        }
        Ok(Self { from, to })
    }

    pub fn length(&self) -> f64 {
        self.to - self.from
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Finding {
    NonFinite(String),
    NonPositiveBase,
    DegenerateLine,
    ZeroEmf,
    OutOfRange { id: String, position: f64 },
    DuplicatePosition { first: String, second: String, position: f64 },
    NotAscending { id: String },
    NonPositiveRating { id: String },
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Finding::NonFinite(what) => write!(f, "non-finite value in {what}"),
            Finding::NonPositiveBase => write!(f, "base_mva and base_kv must be positive"),
            Finding::DegenerateLine => write!(f, "line z1 must be non-zero"),
            Finding::ZeroEmf => write!(f, "source emf must be non-zero"),
            Finding::OutOfRange { id, position } => {
                write!(f, "tap {id} at {position} is outside (0, 1)")
            }
            Finding::DuplicatePosition { first, second, position } => {
                write!(f, "taps {first} and {second} share position {position}")
            }
            Finding::NotAscending { id } => write!(f, "tap {id} is out of ascending order"),
            Finding::NonPositiveRating { id } => write!(f, "tap {id} has non-positive rating"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            return Ok(());
        }
        let msgs: Vec<String> = self.findings.iter().map(ToString::to_string).collect();
        Err(Error::Config(msgs.join("; ")))
    }
}

impl FeederSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse { line: e.line(), message: e.to_string() })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let spec = Self::from_json(&text)?;
        spec.validate().into_result()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("feeder spec serializes")
    }

    pub fn validate(&self) -> ValidationReport {
        let mut findings = Vec::new();
        let line = [self.line.z1, self.line.z2, self.line.z0];
        if !line.iter().all(|z| is_finite(*z)) {
            findings.push(Finding::NonFinite("line".into()));
        }
        let src = [self.source.emf, self.source.z.z1, self.source.z.z2, self.source.z.z0];
        if !src.iter().all(|z| is_finite(*z)) {
            findings.push(Finding::NonFinite("source".into()));
        }
        if !(self.base_mva > 0.0 && self.base_kv > 0.0) {
            findings.push(Finding::NonPositiveBase);
        }
        if self.line.z1.norm() == 0.0 {
            findings.push(Finding::DegenerateLine);
        }
        if self.source.emf.norm() == 0.0 {
            findings.push(Finding::ZeroEmf);
        }
        for (i, tap) in self.taps.iter().enumerate() {
            if !(tap.position > 0.0 && tap.position < 1.0) {
                findings.push(Finding::OutOfRange { id: tap.id.clone(), position: tap.position });
            }
            if !(tap.rated_power > 0.0) {
                findings.push(Finding::NonPositiveRating { id: tap.id.clone() });
            }
            if i > 0 {
                let prev = &self.taps[i - 1];
                if tap.position == prev.position {
                    findings.push(Finding::DuplicatePosition {
                        first: prev.id.clone(),
                        second: tap.id.clone(),
                        position: tap.position,
                    });
                } else if tap.position < prev.position {
                    findings.push(Finding::NotAscending { id: tap.id.clone() });
                }
            }
        }
        ValidationReport { findings }
    }

    pub fn tap_positions(&self) -> Vec<f64> {
        self.taps.iter().map(|t| t.position).collect()
    }

    /// `(to - from) * Z_L` for the requested sequence.
    pub fn segment_impedance(&self, seg: Segment, seq: Sequence) -> Result<Phasor> {
        let seg = Segment::new(seg.from, seg.to)?;
        Ok(self.line.get(seq) * seg.length())
    }

    /// Taps strictly upstream of `d` (position < d), ascending.
    pub fn taps_upstream_of(&self, d: f64) -> Result<Vec<&IbrTap>> {
        if !(0.0..=1.0).contains(&d) {
            return Err(Error::Range(format!("distance {d} outside [0, 1]")));
        }
        Ok(self.taps.iter().filter(|t| t.position < d).collect())
    }

    pub fn base_impedance_ohm(&self) -> f64 {
        self.base_kv * self.base_kv / self.base_mva
    }

    pub fn base_current_amp(&self) -> f64 {
        self.base_mva * 1e6 / (3f64.sqrt() * self.base_kv * 1e3)
    }

    /// A 34.5 kV collector feeder with five 4.2 MW turbines
    /// (100 MVA base).
    pub fn reference() -> Self {
        let taps = [0.2, 0.35, 0.5, 0.65, 0.8]
            .iter()
            .enumerate()
            .map(|(i, &position)| IbrTap { id: format!("WTG{}", i + 1), position, rated_power: 0.042 })
            .collect();
        Self {
            name: "reference-collector".into(),
            base_mva: 100.0,
            base_kv: 34.5,
            line: SequenceImpedances::new(Phasor::new(0.08, 0.25), Phasor::new(0.25, 0.80)),
            source: GridSource {
                emf: Phasor::new(1.0, 0.0),
                z: SequenceImpedances {
                    z1: Phasor::new(0.004, 0.05),
                    z2: Phasor::new(0.004, 0.05),
                    z0: Phasor::new(0.002, 0.04),
                },
            },
            taps,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_taps() -> FeederSpec {
        let mut s = FeederSpec::reference();
        s.taps =
            [0.2, 0.5, 0.8].iter().map(|&p| IbrTap { id: format!("T{p}"), position: p, rated_power: 0.1 }).collect();
        s
    }

    #[test]
    fn reference_is_well_formed() {
        assert!(FeederSpec::reference().validate().is_ok());
    }

    #[test]
    fn duplicate_position_reported_once() {
        let mut s = three_taps();
        s.taps[1].position = 0.2;
        let r = s.validate();
        assert_eq!(r.findings.len(), 1);
        assert!(matches!(r.findings[0], Finding::DuplicatePosition { .. }));
    }

    #[test]
    fn out_of_range_tap() {
        let mut s = three_taps();
        s.taps[2].position = 1.2;
        let r = s.validate();
        assert_eq!(r.findings, vec![Finding::OutOfRange { id: "T0.8".into(), position: 1.2 }]);
    }

    #[test]
    fn segment_impedances() {
        let mut s = three_taps();
        s.line.z0 = Phasor::new(0.6, 1.2);
        assert_eq!(s.segment_impedance(Segment { from: 0.0, to: 1.0 }, Sequence::Pos).unwrap(), s.line.z1);
        for seq in Sequence::ALL {
            assert_eq!(s.segment_impedance(Segment { from: 0.3, to: 0.3 }, seq).unwrap().norm(), 0.0);
        }
        let z = s.segment_impedance(Segment { from: 0.25, to: 0.75 }, Sequence::Zero).unwrap();
        assert!((z - Phasor::new(0.3, 0.6)).norm() < 1e-15);
        assert!(s.segment_impedance(Segment { from: 0.7, to: 0.2 }, Sequence::Pos).is_err());
        assert!(Segment::new(-0.1, 0.5).is_err());
    }

    #[test]
    fn upstream_taps() {
        let s = three_taps();
        let ids = |d: f64| -> Vec<f64> { s.taps_upstream_of(d).unwrap().iter().map(|t| t.position).collect() };
        assert!(ids(0.1).is_empty());
        assert_eq!(ids(0.6), vec![0.2, 0.5]);
        // Boundary: a tap sitting exactly at d is not upstream.
        assert_eq!(ids(0.5), vec![0.2]);
        assert!(s.taps_upstream_of(1.5).is_err());
    }

    #[test]
    fn json_defaults_z2_to_z1() {
        let text = r#"{
            "name": "f", "base_mva": 100, "base_kv": 34.5,
            "line": {"z1": [0.1, 0.3], "z0": [0.3, 0.9]},
            "source": {"emf": [1, 0], "z1": [0, 0.05], "z0": [0, 0.04]},
            "taps": [{"id": "a", "position": 0.4, "rated_power": 0.1}]
        }"#;
        let s = FeederSpec::from_json(text).unwrap();
        assert_eq!(s.line.z2, s.line.z1);
        assert_eq!(s.source.z.z2, s.source.z.z1);
        let again = FeederSpec::from_json(&s.to_json()).unwrap();
        assert_eq!(again, s);
    }

    #[test]
    fn bases() {
        let s = FeederSpec::reference();
        assert!((s.base_impedance_ohm() - 11.9025).abs() < 1e-12);
        assert!((s.base_current_amp() - 1673.479).abs() < 1e-3);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn segment_additivity(mut v in proptest::collection::vec(0.0f64..=1.0, 3)) {
                v.sort_by(f64::total_cmp);
                let s = FeederSpec::reference();
                for seq in Sequence::ALL {
                    let ab = s.segment_impedance(Segment { from: v[0], to: v[1] }, seq).unwrap();
                    let bc = s.segment_impedance(Segment { from: v[1], to: v[2] }, seq).unwrap();
                    let ac = s.segment_impedance(Segment { from: v[0], to: v[2] }, seq).unwrap();
                    prop_assert!((ab + bc - ac).norm() <= 1e-12);
                }
            }

            #[test]
            fn upstream_is_monotone(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                let s = FeederSpec::reference();
                let small = s.taps_upstream_of(lo).unwrap();
                let big = s.taps_upstream_of(hi).unwrap();
                prop_assert!(small.iter().all(|t| big.iter().any(|u| u.id == t.id)));
            }
        }
    }
}
