//! Linear sequence-network solve for a radial line with frozen tap
//! injections.
//!
//! The line has no shunt branches and its remote end is open, so every
//! injected current returns through the grid source branch. The voltage at
//! distance `x` is then
//!
//! ```text
//! V(x) = E + Zs * sum_j I_j + z * sum_j I_j * min(x, p_j)
//! ```
//!
//! where `I_j` are node injections at positions `p_j` (the fault draws
//! `-I_F` at its own position). Taps carry no zero-sequence branch.

use crate::error::{Error, Result};
use crate::feeder::FeederSpec;
use crate::phasor::{Phasor, Sequence, SequenceSet};

use super::fault::{interconnect, FaultSpec};

/// Per-tap injected sequence currents, in tap order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TapInjections {
    pub pos: Vec<Phasor>,
    pub neg: Vec<Phasor>,
}

impl TapInjections {
    pub fn zeros(n: usize) -> Self {
        Self { pos: vec![Phasor::default(); n], neg: vec![Phasor::default(); n] }
    }

    pub fn len(&self) -> usize {
        self.pos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pos.is_empty()
    }

    fn get(&self, seq: Sequence) -> Option<&[Phasor]> {
        match seq {
            Sequence::Pos => Some(&self.pos),
            Sequence::Neg => Some(&self.neg),
            Sequence::Zero => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSolution {
    pub ied_v: SequenceSet,
    /// Current leaving the IED bus into the line.
    pub ied_i: SequenceSet,
    pub tap_v: Vec<SequenceSet>,
    /// Current drawn out of each sequence network at the fault node.
    pub fault_i: SequenceSet,
    pub fault_v: SequenceSet,
}

fn emf_for(seq: Sequence, emf: Phasor) -> Phasor {
    match seq {
        Sequence::Pos => emf,
        _ => Phasor::default(),
    }
}

/// Voltage at `x` in one sequence network carrying the given injections.
fn node_voltage(spec: &FeederSpec, seq: Sequence, emf: Phasor, injections: &[(f64, Phasor)], x: f64) -> Phasor {
    let zs = spec.source.z.get(seq);
    let zl = spec.line.get(seq);
    let mut v = emf_for(seq, emf);
    for &(p, i) in injections {
        v += zs * i + zl * i * x.min(p);
    }
    v
}

fn tap_list(spec: &FeederSpec, inj: &TapInjections, seq: Sequence) -> Vec<(f64, Phasor)> {
    match inj.get(seq) {
        Some(cur) => spec.taps.iter().zip(cur).map(|(t, &i)| (t.position, i)).collect(),
        None => Vec::new(),
    }
}

/// Thevenin voltage and impedance of each sequence network at `d`, with
/// the tap injections held as fixed current sources.
pub fn thevenin_at(spec: &FeederSpec, d: f64, emf: Phasor, inj: &TapInjections) -> (SequenceSet, SequenceSet) {
    let mut v = [Phasor::default(); 3];
    let mut z = [Phasor::default(); 3];
    for (k, seq) in Sequence::ALL.into_iter().enumerate() {
        v[k] = node_voltage(spec, seq, emf, &tap_list(spec, inj, seq), d);
        z[k] = spec.source.z.get(seq) + spec.line.get(seq) * d;
    }
    (SequenceSet::new(v[0], v[1], v[2]), SequenceSet::new(z[0], z[1], z[2]))
}

/// Solves the three sequence networks for the given grid emf and frozen
/// tap injections, optionally with a fault applied.
pub fn solve_network(
    spec: &FeederSpec,
    fault: Option<&FaultSpec>,
    emf: Phasor,
    inj: &TapInjections,
) -> Result<NetworkSolution> {
    if inj.pos.len() != spec.taps.len() || inj.neg.len() != spec.taps.len() {
        return Err(Error::InvalidInput(format!(
            "{} taps but {} / {} injections",
            spec.taps.len(),
            inj.pos.len(),
            inj.neg.len()
        )));
    }
    let fault_i = match fault {
        Some(f) => {
            f.validate()?;
            let (vth, zth) = thevenin_at(spec, f.distance, emf, inj);
            interconnect(f.fault_type, f.resistance, &vth, &zth)?
        }
        None => SequenceSet::default(),
    };

    let mut ied_v = [Phasor::default(); 3];
    let mut ied_i = [Phasor::default(); 3];
    let mut fault_v = [Phasor::default(); 3];
    let mut tap_v = vec![[Phasor::default(); 3]; spec.taps.len()];
    for (k, seq) in Sequence::ALL.into_iter().enumerate() {
        let mut all = tap_list(spec, inj, seq);
        if let Some(f) = fault {
            all.push((f.distance, -fault_i.get(seq)));
        }
        ied_v[k] = node_voltage(spec, seq, emf, &all, 0.0);
        ied_i[k] = -all.iter().map(|(_, i)| i).sum::<Phasor>();
        if let Some(f) = fault {
            fault_v[k] = node_voltage(spec, seq, emf, &all, f.distance);
        }
        for (t, tap) in spec.taps.iter().enumerate() {
            tap_v[t][k] = node_voltage(spec, seq, emf, &all, tap.position);
        }
    }
    let set = |a: [Phasor; 3]| SequenceSet::new(a[0], a[1], a[2]);
    Ok(NetworkSolution {
        ied_v: set(ied_v),
        ied_i: set(ied_i),
        tap_v: tap_v.into_iter().map(set).collect(),
        fault_i,
        fault_v: set(fault_v),
    })
}
