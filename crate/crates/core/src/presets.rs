//! Named states and observables.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::hilbert::{
    embed, path_spin_labels, pauli, product, spin_labels, Axis, Observable, StateVector,
};
use crate::scalar::Scalar;

/// Preset state names accepted by [`state`].
pub const STATE_NAMES: [&str; 11] =
    ["u+", "u-", "d+", "d-", "phi+", "singlet", "x+u", "z+", "z-", "x+", "x-"];

/// Named preparation.
///
/// Two-slot presets use the path ⊗ spin labels:
/// `phi+ = (|u,+⟩+|d,-⟩)/√2`, `singlet = (|u,-⟩−|d,+⟩)/√2`,
/// `x+u = (|u⟩+|d⟩)|+⟩/√2`. Single-spin presets are `z±`, `x±`.
pub fn state<T: Scalar>(name: &str) -> Result<StateVector<T>> {
    let amps: &[f64] = match name {
        "u+" => &[1.0, 0.0, 0.0, 0.0],
        "u-" => &[0.0, 1.0, 0.0, 0.0],
        "d+" => &[0.0, 0.0, 1.0, 0.0],
        "d-" => &[0.0, 0.0, 0.0, 1.0],
        "phi+" => &[1.0, 0.0, 0.0, 1.0],
        "singlet" => &[0.0, 1.0, -1.0, 0.0],
        "x+u" => &[1.0, 0.0, 1.0, 0.0],
        "z+" => &[1.0, 0.0],
        "z-" => &[0.0, 1.0],
        "x+" => &[1.0, 1.0],
        "x-" => &[1.0, -1.0],
        other => return Err(Error::InvalidLabels(format!("unknown preset state `{other}`"))),
    };
    let labels = if amps.len() == 4 { path_spin_labels() } else { spin_labels() };
    StateVector::from_real(amps, labels)
}

/// The observables that appear in the scenario.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Obs {
    Z1,
    X1,
    Z2,
    X2,
    Y1,
    Y2,
    Z1Z2,
    X1X2,
    Z1X2,
    X1Z2,
    Y1Y2,
}

impl Obs {
    pub const ALL: [Obs; 11] = [
        Obs::Z1,
        Obs::X1,
        Obs::Z2,
        Obs::X2,
        Obs::Y1,
        Obs::Y2,
        Obs::Z1Z2,
        Obs::X1X2,
        Obs::Z1X2,
        Obs::X1Z2,
        Obs::Y1Y2,
    ];

    /// The eight observables of the contextuality argument.
    pub const SCENARIO: [Obs; 8] =
        [Obs::Z1, Obs::Z2, Obs::X1, Obs::X2, Obs::Z1Z2, Obs::X1X2, Obs::Z1X2, Obs::X1Z2];

    pub fn name(self) -> &'static str {
        match self {
            Obs::Z1 => "Z1",
            Obs::X1 => "X1",
            Obs::Z2 => "Z2",
            Obs::X2 => "X2",
            Obs::Y1 => "Y1",
            Obs::Y2 => "Y2",
            Obs::Z1Z2 => "Z1Z2",
            Obs::X1X2 => "X1X2",
            Obs::Z1X2 => "Z1X2",
            Obs::X1Z2 => "X1Z2",
            Obs::Y1Y2 => "Y1Y2",
        }
    }

    fn factors(self) -> &'static [(Axis, usize)] {
        match self {
            Obs::Z1 => &[(Axis::Z, 1)],
            Obs::X1 => &[(Axis::X, 1)],
            Obs::Z2 => &[(Axis::Z, 2)],
            Obs::X2 => &[(Axis::X, 2)],
            Obs::Y1 => &[(Axis::Y, 1)],
            Obs::Y2 => &[(Axis::Y, 2)],
            Obs::Z1Z2 => &[(Axis::Z, 1), (Axis::Z, 2)],
            Obs::X1X2 => &[(Axis::X, 1), (Axis::X, 2)],
            Obs::Z1X2 => &[(Axis::Z, 1), (Axis::X, 2)],
            Obs::X1Z2 => &[(Axis::X, 1), (Axis::Z, 2)],
            Obs::Y1Y2 => &[(Axis::Y, 1), (Axis::Y, 2)],
        }
    }
}

impl fmt::Display for Obs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Obs {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let cleaned: String = s.chars().filter(|c| !matches!(c, '*' | '·' | ' ')).collect();
        Obs::ALL
            .into_iter()
            .find(|o| o.name().eq_ignore_ascii_case(&cleaned))
            .ok_or_else(|| Error::InvalidProduct(format!("unknown observable `{s}`")))
    }
}

/// Builds the named two-slot observable.
pub fn observable<T: Scalar>(which: Obs) -> Observable<T> {
    let mut factors = which.factors().iter().map(|&(axis, slot)| {
        embed(&pauli::<T>(axis), slot).expect("slot is 1 or 2")
    });
    let first = factors.next().expect("at least one factor");
    factors.fold(first, |acc, f| product(&acc, &f).expect("cross-slot factors commute"))
}

/// Single-spin observable by axis name (`X`, `Y`, `Z`).
pub fn spin_observable<T: Scalar>(name: &str) -> Result<Observable<T>> {
    match name.to_ascii_uppercase().as_str() {
        "X" => Ok(pauli(Axis::X)),
        "Y" => Ok(pauli(Axis::Y)),
        "Z" => Ok(pauli(Axis::Z)),
        other => Err(Error::InvalidProduct(format!("unknown spin observable `{other}`"))),
    }
}
