//! Unit suffixes accepted in configuration files, normalized to SI.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Dimensionless,
    Frequency,
    Inductance,
    Capacitance,
    Length,
    Resistance,
    Time,
    Temperature,
    Power,
    Energy,
    CapacitancePerLength,
    SheetInductance,
    SheetResistance,
    Resistivity,
    ConductancePerLength,
    Decibel,
}

impl Dimension {
    /// Canonical SI symbol used when emitting.
    pub fn si_symbol(self) -> &'static str {
        match self {
            Dimension::Dimensionless => "",
            Dimension::Frequency => "Hz",
            Dimension::Inductance => "H",
            Dimension::Capacitance => "F",
            Dimension::Length => "m",
            Dimension::Resistance => "Ohm",
            Dimension::Time => "s",
            Dimension::Temperature => "K",
            Dimension::Power => "W",
            Dimension::Energy => "J",
            Dimension::CapacitancePerLength => "F/m",
            Dimension::SheetInductance => "H/sq",
            Dimension::SheetResistance => "Ohm/sq",
            Dimension::Resistivity => "Ohm*m",
            Dimension::ConductancePerLength => "S/m",
            Dimension::Decibel => "dB",
        }
    }
}

const PREFIXES: [(&str, f64); 10] = [
    ("a", 1e-18),
    ("f", 1e-15),
    ("p", 1e-12),
    ("n", 1e-9),
    ("u", 1e-6),
    ("m", 1e-3),
    ("", 1.0),
    ("k", 1e3),
    ("M", 1e6),
    ("G", 1e9),
];

const BASES: [(&str, Dimension); 14] = [
    ("Hz", Dimension::Frequency),
    ("H", Dimension::Inductance),
    ("F", Dimension::Capacitance),
    ("m", Dimension::Length),
    ("Ohm", Dimension::Resistance),
    ("s", Dimension::Time),
    ("K", Dimension::Temperature),
    ("W", Dimension::Power),
    ("J", Dimension::Energy),
    ("eV", Dimension::Energy),
    ("H/sq", Dimension::SheetInductance),
    ("Ohm/sq", Dimension::SheetResistance),
    ("S/m", Dimension::ConductancePerLength),
    ("Hz/photon", Dimension::Frequency),
];

fn canonical(unit: &str) -> String {
    unit.trim()
        .replace(['µ', 'μ'], "u")
        .replace('Ω', "Ohm")
        .replace("ohm", "Ohm")
        .replace('·', "*")
}

fn prefixed(unit: &str, base: &str) -> Option<f64> {
    let stem = unit.strip_suffix(base)?;
    PREFIXES.iter().find(|(p, _)| *p == stem).map(|(_, s)| *s)
}

/// Resolves a unit string to its dimension and the factor to SI.
pub fn lookup(unit: &str) -> Option<(Dimension, f64)> {
    let u = canonical(unit);
    if u.is_empty() {
        return Some((Dimension::Dimensionless, 1.0));
    }
    if u == "dB" {
        return Some((Dimension::Decibel, 1.0));
    }
    // Compound units with a prefixed numerator and denominator.
    if let Some((num, den)) = u.split_once('/') {
        let den_len = match den {
            "m" => Some(1.0),
            "um" => Some(1e-6),
            "mm" => Some(1e-3),
            "cm" => Some(1e-2),
            _ => None,
        };
        if let Some(dl) = den_len {
            if let Some(s) = prefixed(num, "F") {
                return Some((Dimension::CapacitancePerLength, s / dl));
            }
            if let Some(s) = prefixed(num, "S") {
                return Some((Dimension::ConductancePerLength, s / dl));
            }
        }
        if den == "Ohm/m" || den == "(Ohm*m)" {
            if let Some(s) = prefixed(num, "1") {
                return Some((Dimension::ConductancePerLength, s));
            }
        }
    }
    if let Some((num, len)) = u.split_once('*') {
        let l = match len {
            "m" => Some(1.0),
            "cm" => Some(1e-2),
            "mm" => Some(1e-3),
            "um" => Some(1e-6),
            _ => None,
        };
        if let (Some(l), Some(s)) = (l, prefixed(num, "Ohm")) {
            return Some((Dimension::Resistivity, s * l));
        }
    }
    for (base, dim) in BASES.iter().rev() {
        if let Some(s) = prefixed(&u, base) {
            let s = if *base == "eV" { s * crate::constants::E_CHARGE } else { s };
            return Some((*dim, s));
        }
    }
    None
}

/// A number with its normalized dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantity {
    pub si: f64,
    pub dim: Dimension,
}

/// Converts `value unit` to SI. `dBm` becomes watts.
pub fn to_si(key: &str, value: f64, unit: &str) -> Result<Quantity> {
    if canonical(unit) == "dBm" {
        return Ok(Quantity { si: 1e-3 * 10f64.powf(value / 10.0), dim: Dimension::Power });
    }
    let (dim, scale) = lookup(unit).ok_or_else(|| Error::Unit {
        key: key.into(),
        msg: format!("unknown unit `{unit}`"),
    })?;
    Ok(Quantity { si: value * scale, dim })
}

/// Power after a line attenuation in dB.
pub fn attenuate(power: f64, attenuation_db: f64) -> f64 {
    power * 10f64.powf(-attenuation_db / 10.0)
}

/// Splits `"6.04 GHz"` into the number and the trailing unit text.
pub fn split_number(s: &str) -> Option<(f64, &str)> {
    let s = s.trim();
    let end = s
        .char_indices()
        .find(|&(i, c)| {
            !(c.is_ascii_digit()
                || c == '.'
                || c == '+'
                || c == '-'
                || ((c == 'e' || c == 'E')
                    && i > 0
                    && s[i + 1..].starts_with(|d: char| d.is_ascii_digit() || d == '-' || d == '+')))
        })
        .map_or(s.len(), |(i, _)| i);
    let v: f64 = s[..end].parse().ok()?;
    Some((v, s[end..].trim()))
}

/// Parses `number [unit]` and checks the dimension.
pub fn parse_quantity(key: &str, text: &str, dim: Dimension) -> Result<f64> {
    let (v, unit) = split_number(text).ok_or_else(|| Error::Unit {
        key: key.into(),
        msg: format!("expected a number with unit, got `{text}`"),
    })?;
    let q = to_si(key, v, unit)?;
    if q.dim != dim {
        return Err(Error::Unit {
            key: key.into(),
            msg: format!("expected {dim:?} (e.g. `{}`), got {:?}", dim.si_symbol(), q.dim),
        });
    }
    if !q.si.is_finite() {
        return Err(Error::Unit { key: key.into(), msg: "value is not finite".into() });
    }
    Ok(q.si)
}
