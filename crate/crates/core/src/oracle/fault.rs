//! Fault descriptions and the sequence-network interconnection at the
//! fault point.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phasor::{Phasor, SequenceSet, ALPHA, ALPHA2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum FaultType {
    AG,
    BG,
    CG,
    AB,
    BC,
    CA,
    ABG,
    BCG,
    CAG,
    ABC,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FaultClass {
    #[serde(rename = "SLG")]
    Slg,
    #[serde(rename = "DLG")]
    Dlg,
    #[serde(rename = "LL")]
    Ll,
    #[serde(rename = "3P")]
    ThreePhase,
}

impl fmt::Display for FaultClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FaultClass::Slg => "SLG",
            FaultClass::Dlg => "DLG",
            FaultClass::Ll => "LL",
            FaultClass::ThreePhase => "3P",
        })
    }
}

impl FaultType {
    pub const ALL: [FaultType; 10] = [
        FaultType::AG,
        FaultType::BG,
        FaultType::CG,
        FaultType::AB,
        FaultType::BC,
        FaultType::CA,
        FaultType::ABG,
        FaultType::BCG,
        FaultType::CAG,
        FaultType::ABC,
    ];

    pub fn class(self) -> FaultClass {
        use FaultType::*;
        match self {
            AG | BG | CG => FaultClass::Slg,
            AB | BC | CA => FaultClass::Ll,
            ABG | BCG | CAG => FaultClass::Dlg,
            ABC => FaultClass::ThreePhase,
        }
    }

    pub fn involves_ground(self) -> bool {
        matches!(self.class(), FaultClass::Slg | FaultClass::Dlg)
    }

    /// Faulted phases as indices (0 = a), in loop order.
    pub fn phases(self) -> &'static [usize] {
        use FaultType::*;
        match self {
            AG => &[0],
            BG => &[1],
            CG => &[2],
            AB | ABG => &[0, 1],
            BC | BCG => &[1, 2],
            CA | CAG => &[2, 0],
            ABC => &[0, 1, 2],
        }
    }

    pub fn as_str(self) -> &'static str {
        use FaultType::*;
        match self {
            AG => "AG",
            BG => "BG",
            CG => "CG",
            AB => "AB",
            BC => "BC",
            CA => "CA",
            ABG => "ABG",
            BCG => "BCG",
            CAG => "CAG",
            ABC => "ABC",
        }
    }
}

impl fmt::Display for FaultType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FaultType {
    type Err = Error;

    /// Accepts `AG`, `A-G`, `AB-G`, `ab_g` and similar spellings.
    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).map(|c| c.to_ascii_uppercase()).collect();
        let t = match norm.as_str() {
            "AG" => FaultType::AG,
            "BG" => FaultType::BG,
            "CG" => FaultType::CG,
            "AB" | "BA" => FaultType::AB,
            "BC" | "CB" => FaultType::BC,
            "CA" | "AC" => FaultType::CA,
            "ABG" | "BAG" => FaultType::ABG,
            "BCG" | "CBG" => FaultType::BCG,
            "CAG" | "ACG" => FaultType::CAG,
            "ABC" | "3P" | "ABCG" => FaultType::ABC,
            _ => return Err(Error::UnsupportedType(format!("fault type '{s}'"))),
        };
        Ok(t)
    }
}

impl TryFrom<String> for FaultType {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<FaultType> for String {
    fn from(t: FaultType) -> Self {
        t.as_str().to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultSpec {
    #[serde(rename = "type")]
    pub fault_type: FaultType,
    /// Per-unit distance from the IED.
    pub distance: f64,
    /// Fault resistance in per-unit.
    #[serde(rename = "resistance_pu")]
    pub resistance: f64,
    /// Raw resistance in ohms when the scenario was specified that way.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resistance_ohm: Option<f64>,
    /// Carried as metadata only; the quasi-static solution does not depend on it.
    #[serde(rename = "inception_deg", default)]
    pub inception_angle: f64,
}

impl FaultSpec {
    pub fn new(fault_type: FaultType, distance: f64, resistance: f64) -> Self {
        Self { fault_type, distance, resistance, resistance_ohm: None, inception_angle: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.distance) {
            return Err(Error::Range(format!("fault distance {} outside [0, 1]", self.distance)));
        }
        if !(self.resistance >= 0.0) || !self.resistance.is_finite() {
            return Err(Error::Range(format!("fault resistance {} must be >= 0", self.resistance)));
        }
        Ok(())
    }
}

/// Phase-from-sequence row for phase `p`, sequence order (pos, neg, zero).
fn fortescue_row(p: usize) -> [Phasor; 3] {
    let one = Phasor::new(1.0, 0.0);
    match p {
        0 => [one, one, one],
        1 => [ALPHA2, ALPHA, one],
        _ => [ALPHA, ALPHA2, one],
    }
}

/// One linear fault-point constraint `cv . V_abc + ci . I_abc = 0`.
struct Constraint {
    cv: [f64; 3],
    ci: [f64; 3],
}

fn unit(p: usize) -> [f64; 3] {
    let mut e = [0.0; 3];
    e[p] = 1.0;
    e
}

fn constraints(fault: FaultType, rf: f64) -> [Constraint; 3] {
    let ph = fault.phases();
    let open = |p: usize| Constraint { cv: [0.0; 3], ci: unit(p) };
    let to_ground = |p: usize| {
        let mut ci = [0.0; 3];
        ci[p] = -rf;
        Constraint { cv: unit(p), ci }
    };
    let other = |used: &[usize]| (0..3).find(|p| !used.contains(p)).unwrap();
    match fault.class() {
        FaultClass::Slg => {
            let p = ph[0];
            let rest: Vec<usize> = (0..3).filter(|q| *q != p).collect();
            [to_ground(p), open(rest[0]), open(rest[1])]
        }
        FaultClass::Ll => {
            let (p, q) = (ph[0], ph[1]);
            let mut cv = [0.0; 3];
            cv[p] = 1.0;
            cv[q] = -1.0;
            let mut ci = [0.0; 3];
            ci[p] = -rf;
            let mut sum = [0.0; 3];
            sum[p] = 1.0;
            sum[q] = 1.0;
            [Constraint { cv, ci }, Constraint { cv: [0.0; 3], ci: sum }, open(other(ph))]
        }
        // One resistance per faulted phase to a solidly grounded common point.
        FaultClass::Dlg => [to_ground(ph[0]), to_ground(ph[1]), open(other(ph))],
        FaultClass::ThreePhase => [to_ground(0), to_ground(1), to_ground(2)],
    }
}

/// Solves the fault-point sequence currents drawn out of the three
/// sequence networks, given each network's Thevenin equivalent at the
/// fault node.
pub fn interconnect(fault: FaultType, rf: f64, vth: &SequenceSet, zth: &SequenceSet) -> Result<SequenceSet> {
    let v = [vth.pos, vth.neg, vth.zero];
    let z = [zth.pos, zth.neg, zth.zero];
    let mut m = Matrix3::<Phasor>::zeros();
    let mut rhs = Vector3::<Phasor>::zeros();
    for (r, c) in constraints(fault, rf).iter().enumerate() {
        // Row vectors u = cv . A and w = ci . A.
        let mut u = [Phasor::default(); 3];
        let mut w = [Phasor::default(); 3];
        for p in 0..3 {
            let row = fortescue_row(p);
            for s in 0..3 {
                u[s] += row[s] * c.cv[p];
                w[s] += row[s] * c.ci[p];
            }
        }
        for s in 0..3 {
            m[(r, s)] = w[s] - u[s] * z[s];
            rhs[r] -= u[s] * v[s];
        }
    }
    let x = m.lu().solve(&rhs).ok_or_else(|| Error::InvalidInput(format!("singular {fault} interconnection")))?;
    let out = SequenceSet::new(x[0], x[1], x[2]);
    if !out.is_finite() {
        return Err(Error::InvalidInput(format!("non-finite {fault} fault current")));
    }
    Ok(out)
}
