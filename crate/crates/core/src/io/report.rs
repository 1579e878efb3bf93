//! Versioned JSON report bundle.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::FitReport;

pub const REPORT_SCHEMA: &str = "reskit-report/1";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    pub command: String,
    /// SHA-256 of the configuration text.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    /// Input file name to SHA-256.
    #[serde(default)]
    pub inputs: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// One device (or one synthetic run) in a report.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DeviceReport {
    pub name: String,
    #[serde(default)]
    pub fits: Vec<FitReport>,
    /// Derived quantities in SI units, keyed by name.
    #[serde(default)]
    pub derived: BTreeMap<String, f64>,
    #[serde(default)]
    pub flags: Vec<String>,
}

impl DeviceReport {
    pub fn new(name: &str) -> Self {
        Self { name: name.into(), ..Default::default() }
    }

    /// Records a derived value; non-finite values become a flag instead.
    pub fn set(&mut self, key: &str, v: f64) -> &mut Self {
        if v.is_finite() {
            self.derived.insert(key.into(), v);
        } else {
            self.flags.push(format!("{key} is not finite"));
        }
        self
    }

    pub fn flag(&mut self, msg: impl Into<String>) -> &mut Self {
        self.flags.push(msg.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub schema: String,
    pub provenance: Provenance,
    pub devices: Vec<DeviceReport>,
}

impl ReportBundle {
    pub fn new(provenance: Provenance) -> Self {
        Self { schema: REPORT_SCHEMA.into(), provenance, devices: Vec::new() }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(text)?;
        if r.schema != REPORT_SCHEMA {
            return Err(Error::invalid("schema", &format!("unsupported report schema `{}`", r.schema)));
        }
        Ok(r)
    }

    pub fn device(&self, name: &str) -> Option<&DeviceReport> {
        self.devices.iter().find(|d| d.name == name)
    }

    /// Tidy `device,quantity,value` table of every derived value and fit
    /// estimate.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut cw = csv::Writer::from_writer(w);
        cw.write_record(["device", "quantity", "value", "sigma"])?;
        for d in &self.devices {
            for (i, f) in d.fits.iter().enumerate() {
                for e in &f.estimates {
                    let q = if d.fits.len() > 1 { format!("fit{i}.{}", e.name) } else { e.name.clone() };
                    let sigma = e.sigma.map(|s| format!("{s:e}")).unwrap_or_default();
                    cw.write_record([d.name.as_str(), q.as_str(), &format!("{:e}", e.value), &sigma])?;
                }
            }
            for (k, v) in &d.derived {
                cw.write_record([d.name.as_str(), k.as_str(), &format!("{v:e}"), ""])?;
            }
        }
        cw.flush()?;
        Ok(())
    }
}
