//! Line-oriented analysis configuration.
//!
//! ```text
//! # comment
//! [device.AH24]
//! f_r = 4.79 GHz
//! l_g = 860 pH
//! temps = 0.3, 0.5, 0.7 K
//! trace = "ah24.csv"
//! ```
//!
//! Numbers carry an optional unit suffix and are stored in SI. Quoted values
//! are text; bare words (`auto`, `off`) are text as well.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::circle_fit::{DelayMode, FitOptions};
use crate::error::{Error, Result, Violation};
use crate::io::units::{split_number, to_si, Dimension};
use crate::loss::{InductiveSplit, LossLedger, PackageLoss};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Value {
    Quantity { si: f64, dim: Dimension },
    List { si: Vec<f64>, dim: Dimension },
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub key: String,
    pub value: Value,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Section {
    pub name: String,
    pub entries: Vec<Entry>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Config {
    pub sections: Vec<Section>,
}

fn parse_value(key: &str, raw: &str, line: usize) -> Result<Value> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Err(Error::Parse { line, msg: format!("`{key}` has no value") });
    }
    if let Some(rest) = raw.strip_prefix('"') {
        let text = rest
            .strip_suffix('"')
            .ok_or_else(|| Error::Parse { line, msg: format!("unterminated string for `{key}`") })?;
        if text.contains('"') {
            return Err(Error::Parse { line, msg: format!("embedded quote in `{key}`") });
        }
        return Ok(Value::Text(text.to_string()));
    }
    if raw.contains(',') {
        let items: Vec<&str> = raw.split(',').collect();
        let (last_v, unit) = split_number(items[items.len() - 1])
            .ok_or_else(|| Error::Parse { line, msg: format!("list `{key}` must hold numbers") })?;
        let mut si = Vec::with_capacity(items.len());
        let mut dim = Dimension::Dimensionless;
        for (i, item) in items.iter().enumerate() {
            let (v, u) = if i + 1 == items.len() {
                (last_v, "")
            } else {
                split_number(item).ok_or_else(|| Error::Parse { line, msg: format!("list `{key}` must hold numbers") })?
            };
            if !u.is_empty() {
                return Err(Error::Unit { key: key.into(), msg: "a list takes one unit after its last item".into() });
            }
            let q = to_si(key, v, unit)?;
            if !q.si.is_finite() {
                return Err(Error::Parse { line, msg: format!("`{key}` holds a non-finite item") });
            }
            dim = q.dim;
            si.push(q.si);
        }
        return Ok(Value::List { si, dim });
    }
    match split_number(raw) {
        Some((v, unit)) => {
            let q = to_si(key, v, unit)?;
            if !q.si.is_finite() {
                return Err(Error::Parse { line, msg: format!("`{key}` is not finite") });
            }
            Ok(Value::Quantity { si: q.si, dim: q.dim })
        }
        None if raw.chars().all(|c| c.is_ascii_alphanumeric() || "_-.".contains(c)) => Ok(Value::Text(raw.into())),
        None => Err(Error::Parse { line, msg: format!("cannot read value of `{key}`: {raw}") }),
    }
}

fn valid_ident(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || "_-.".contains(c))
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Config { sections: vec![Section::default()] };
        for (i, raw_line) in text.lines().enumerate() {
            let line = i + 1;
            let l = raw_line.split_once('#').map_or(raw_line, |(a, _)| a).trim();
            if l.is_empty() {
                continue;
            }
            if let Some(rest) = l.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| Error::Parse { line, msg: "section header missing `]`".into() })?
                    .trim();
                if !valid_ident(name) {
                    return Err(Error::Parse { line, msg: format!("invalid section name `{name}`") });
                }
                if cfg.sections.iter().any(|s| s.name == name) {
                    return Err(Error::Parse { line, msg: format!("duplicate section `{name}`") });
                }
                cfg.sections.push(Section { name: name.into(), entries: Vec::new() });
                continue;
            }
            let (k, v) = l
                .split_once('=')
                .ok_or_else(|| Error::Parse { line, msg: "expected `key = value`".into() })?;
            let key = k.trim();
            if !valid_ident(key) {
                return Err(Error::Parse { line, msg: format!("invalid key `{key}`") });
            }
            let sec = cfg.sections.last_mut().expect("root section");
            if sec.entries.iter().any(|e| e.key == key) {
                return Err(Error::Parse { line, msg: format!("duplicate key `{key}`") });
            }
            let value = parse_value(key, v, line)?;
            sec.entries.push(Entry { key: key.into(), value, line });
        }
        Ok(cfg)
    }

    /// Canonical text form with SI units and round-trip number formatting.
    pub fn emit(&self) -> String {
        let mut out = String::new();
        for s in &self.sections {
            if s.name.is_empty() && s.entries.is_empty() {
                continue;
            }
            if !s.name.is_empty() {
                if !out.is_empty() {
                    out.push('\n');
                }
                let _ = writeln!(out, "[{}]", s.name);
            }
            for e in &s.entries {
                let v = match &e.value {
                    Value::Quantity { si, dim } => format!("{si:?} {}", dim.si_symbol()),
                    Value::List { si, dim } => {
                        let items: Vec<String> = si.iter().map(|v| format!("{v:?}")).collect();
                        format!("{} {}", items.join(", "), dim.si_symbol())
                    }
                    Value::Text(t) => format!("\"{t}\""),
                };
                let _ = writeln!(out, "{} = {}", e.key, v.trim_end());
            }
        }
        out
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    /// Sections named `prefix.NAME`, with `NAME`.
    pub fn sections_with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = (&'a str, &'a Section)> + 'a {
        self.sections.iter().filter_map(move |s| {
            s.name.strip_prefix(prefix).and_then(|r| r.strip_prefix('.')).map(|n| (n, s))
        })
    }
}

impl Section {
    pub fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }

    fn qualified(&self, key: &str) -> String {
        if self.name.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.name)
        }
    }

    pub fn opt_quantity(&self, key: &str, dim: Dimension) -> Result<Option<f64>> {
        match self.get(key).map(|e| &e.value) {
            None => Ok(None),
            Some(Value::Quantity { si, dim: d }) if *d == dim => Ok(Some(*si)),
            Some(Value::Quantity { dim: d, .. }) => Err(Error::Unit {
                key: self.qualified(key),
                msg: if dim == Dimension::Dimensionless {
                    format!("expected a plain number, got {d:?}")
                } else {
                    format!("expected {dim:?} (e.g. `{}`), got {d:?}", dim.si_symbol())
                },
            }),
            Some(_) => Err(Error::invalid(&self.qualified(key), "must be a single number")),
        }
    }

    pub fn quantity(&self, key: &str, dim: Dimension) -> Result<f64> {
        self.opt_quantity(key, dim)?.ok_or_else(|| Error::MissingKey(self.qualified(key)))
    }

    pub fn list(&self, key: &str, dim: Dimension) -> Result<Vec<f64>> {
        match self.get(key).map(|e| &e.value) {
            None => Err(Error::MissingKey(self.qualified(key))),
            Some(Value::List { si, dim: d }) if *d == dim => Ok(si.clone()),
            Some(Value::Quantity { si, dim: d }) if *d == dim => Ok(vec![*si]),
            Some(_) => Err(Error::Unit { key: self.qualified(key), msg: format!("expected a list in {dim:?}") }),
        }
    }

    pub fn opt_text(&self, key: &str) -> Result<Option<&str>> {
        match self.get(key).map(|e| &e.value) {
            None => Ok(None),
            Some(Value::Text(t)) => Ok(Some(t)),
            Some(_) => Err(Error::invalid(&self.qualified(key), "must be text")),
        }
    }
}

/// Inputs for one device. Absent entries stay `None`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DeviceConfig {
    pub name: String,
    pub f_r: Option<f64>,
    pub l_g: Option<f64>,
    pub c_s: Option<f64>,
    pub l_strip: Option<f64>,
    pub w_strip: Option<f64>,
    pub thickness: Option<f64>,
    pub rho_n: Option<f64>,
    pub t_c: Option<f64>,
    pub l_sq: Option<f64>,
    pub p_strip: Option<f64>,
    pub alpha: Option<f64>,
    pub kerr: Option<f64>,
    pub q_int: Option<f64>,
    pub q_bulk: Option<f64>,
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub devices: Vec<DeviceConfig>,
    pub loss: Option<LossLedger>,
    pub output_dir: Option<PathBuf>,
    pub fit: FitOptions,
    /// Line attenuation between source and chip, dB.
    pub attenuation_db: f64,
    pub seed: Option<u64>,
}

impl AnalysisConfig {
    pub fn from_config(cfg: &Config, base_dir: &Path) -> Result<Self> {
        let mut devices = Vec::new();
        for (name, s) in cfg.sections_with_prefix("device") {
            use Dimension::*;
            let q = |k: &str, d: Dimension| s.opt_quantity(k, d);
            devices.push(DeviceConfig {
                name: name.into(),
                f_r: q("f_r", Frequency)?,
                l_g: q("l_g", Inductance)?,
                c_s: q("c_s", Capacitance)?,
                l_strip: q("l_strip", Length)?,
                w_strip: q("w_strip", Length)?,
                thickness: q("thickness", Length)?,
                rho_n: q("rho_n", Resistivity)?,
                t_c: q("t_c", Temperature)?,
                l_sq: q("l_sq", SheetInductance)?,
                p_strip: q("p_strip", Dimensionless)?,
                alpha: q("alpha", Dimensionless)?,
                kerr: q("kerr", Frequency)?,
                q_int: q("q_int", Dimensionless)?,
                q_bulk: q("q_bulk", Dimensionless)?,
                trace: s.opt_text("trace")?.map(|p| base_dir.join(p)),
            });
        }
        let loss = cfg.section("loss").map(loss_from_section).transpose()?;
        let mut fit = FitOptions::default();
        let mut output_dir = None;
        let mut attenuation_db = 0.0;
        let mut seed = None;
        if let Some(s) = cfg.section("fit") {
            match s.get("delay").map(|e| &e.value) {
                None => {}
                Some(Value::Text(t)) if t == "auto" => fit.delay = DelayMode::Auto,
                Some(Value::Text(t)) if t == "off" => fit.delay = DelayMode::Off,
                Some(_) => fit.delay = DelayMode::Fixed(s.quantity("delay", Dimension::Time)?),
            }
            if let Some(v) = s.opt_quantity("edge_fraction", Dimension::Dimensionless)? {
                fit.edge_fraction = v;
            }
        }
        if let Some(s) = cfg.section("output") {
            output_dir = s.opt_text("dir")?.map(|d| base_dir.join(d));
        }
        if let Some(s) = cfg.section("calibration") {
            attenuation_db = s.opt_quantity("attenuation", Dimension::Decibel)?.unwrap_or(0.0);
        }
        if let Some(s) = cfg.sections.first() {
            if let Some(v) = s.opt_quantity("seed", Dimension::Dimensionless)? {
                if !(v >= 0.0 && v.fract() == 0.0 && v < 2f64.powi(64)) {
                    return Err(Error::invalid("seed", "must be a non-negative integer"));
                }
                seed = Some(v as u64);
            }
        }
        let a = Self { devices, loss, output_dir, fit, attenuation_db, seed };
        a.validate()?;
        Ok(a)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_config(&Config::parse(&text)?, base)
    }

    /// Checks referenced files exist and every declared number is positive
    /// where required.
    pub fn validate(&self) -> Result<()> {
        let mut v = Vec::new();
        for d in &self.devices {
            if let Some(p) = &d.trace {
                if !p.exists() {
                    v.push(Violation {
                        field: format!("device.{}.trace", d.name),
                        constraint: format!("file {} does not exist", p.display()),
                    });
                }
            }
            for (k, x) in [
                ("f_r", d.f_r),
                ("c_s", d.c_s),
                ("l_strip", d.l_strip),
                ("w_strip", d.w_strip),
                ("thickness", d.thickness),
                ("rho_n", d.rho_n),
                ("t_c", d.t_c),
                ("l_sq", d.l_sq),
            ] {
                if let Some(x) = x {
                    if !(x > 0.0) {
                        v.push(Violation { field: format!("device.{}.{k}", d.name), constraint: "must be positive".into() });
                    }
                }
            }
        }
        if let Some(l) = &self.loss {
            if let Err(Error::Invalid(mut e)) = l.validate() {
                v.append(&mut e);
            }
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid(v))
        }
    }

    pub fn device(&self, name: &str) -> Option<&DeviceConfig> {
        self.devices.iter().find(|d| d.name == name)
    }
}

fn loss_from_section(s: &Section) -> Result<LossLedger> {
    let d = Dimension::Dimensionless;
    let z = |k: &str| -> Result<f64> { Ok(s.opt_quantity(k, d)?.unwrap_or(0.0)) };
    let split = match (s.opt_quantity("q_ind_inv", d)?, s.opt_quantity("q_contact_inv", d)?) {
        (Some(a), Some(b)) => Some(InductiveSplit { q_ind_inv: a, q_contact_inv: b }),
        (None, None) => None,
        _ => return Err(Error::invalid("loss", "q_ind_inv and q_contact_inv must be given together")),
    };
    let q_ind_contact_inv = match (s.opt_quantity("q_ind_contact_inv", d)?, split) {
        (Some(v), _) => v,
        (None, Some(sp)) => sp.q_ind_inv + sp.q_contact_inv,
        (None, None) => 0.0,
    };
    let package = PackageLoss {
        gamma_ma: z("pkg_gamma_ma")?,
        p_ma: z("pkg_p_ma")?,
        gamma_cond: z("pkg_gamma_cond")?,
        p_cond: z("pkg_p_cond")?,
        y_seam: s.opt_quantity("pkg_y_seam", Dimension::ConductancePerLength)?.unwrap_or(0.0),
        g_seam_inv: s.opt_quantity("pkg_g_seam_inv", Dimension::Resistivity)?.unwrap_or(0.0),
    };
    Ok(LossLedger {
        gamma_bulk: z("gamma_bulk")?,
        p_bulk: z("p_bulk")?,
        gamma_surf: z("gamma_surf")?,
        p_ma: z("p_ma")?,
        p_ms: z("p_ms")?,
        p_sa: z("p_sa")?,
        q_ind_contact_inv,
        split,
        package,
    })
}

/// Flat view used in reports: `section.key -> SI value`.
pub fn flatten(cfg: &Config) -> BTreeMap<String, f64> {
    let mut m = BTreeMap::new();
    for s in &cfg.sections {
        for e in &s.entries {
            if let Value::Quantity { si, .. } = e.value {
                m.insert(s.qualified(&e.key), si);
            }
        }
    }
    m
}
