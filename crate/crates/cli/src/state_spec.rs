//! State mini-language.
//!
//! A state is either a preset name (`u+`, `phi+`, `singlet`, `x+u`, `z+`, …)
//! or a `;`-separated amplitude list, each entry `re,im` (or just `re`), in
//! basis order `(u,+),(u,-),(d,+),(d,-)` for four entries or `+,-` for two.
//! Unnormalized lists are rescaled; a warning is returned when the norm was
//! off by more than [`WARN_THRESHOLD`].

use kslab::hilbert::{path_spin_labels, spin_labels, StateVector};
use kslab::presets;
use num_complex::Complex;

use crate::error::{CliError, CliResult};

pub const WARN_THRESHOLD: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct ParsedState {
    pub state: StateVector<f64>,
    pub warning: Option<String>,
}

pub fn parse_state(text: &str) -> CliResult<ParsedState> {
    let trimmed = text.trim();
    if let Ok(state) = presets::state::<f64>(trimmed) {
        return Ok(ParsedState { state, warning: None });
    }
    if !trimmed.contains(|c: char| c.is_ascii_digit()) {
        return Err(CliError::Parse(format!(
            "`{trimmed}` is neither a preset ({}) nor an amplitude list",
            presets::STATE_NAMES.join(", ")
        )));
    }
    let amplitudes = trimmed
        .split(';')
        .map(parse_amplitude)
        .collect::<CliResult<Vec<_>>>()?;
    let labels = match amplitudes.len() {
        2 => spin_labels(),
        4 => path_spin_labels(),
        n => {
            return Err(CliError::Validation(format!(
                "amplitude list has {n} entries; expected 2 or 4"
            )))
        }
    };
    let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let warning = ((norm - 1.0).abs() > WARN_THRESHOLD)
        .then(|| format!("input state normalized (norm was {norm})"));
    let state = StateVector::normalized(amplitudes, labels)?;
    Ok(ParsedState { state, warning })
}

fn parse_amplitude(entry: &str) -> CliResult<Complex<f64>> {
    let parts: Vec<&str> = entry.split(',').map(str::trim).collect();
    let num = |s: &str| {
        s.parse::<f64>()
            .map_err(|_| CliError::Parse(format!("`{s}` is not a number in amplitude `{entry}`")))
    };
    match parts.as_slice() {
        [re] => Ok(Complex::new(num(re)?, 0.0)),
        [re, im] => Ok(Complex::new(num(re)?, num(im)?)),
        _ => Err(CliError::Parse(format!("amplitude `{entry}` must be `re,im`"))),
    }
}
