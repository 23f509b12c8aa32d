//! Flat key-value scenario files.
//!
//! A config is a TOML document with top-level keys only. Quantities use
//! the usual radio-engineering units: powers in dBm, noise
//! density in dBm/Hz, carrier in GHz, deadline in ms, radius in km. Each
//! such key also has an internal-unit alternative (`*_mw`, `*_mw_per_hz`,
//! `carrier_hz`, `deadline_s`); giving both spellings of one quantity is
//! an error. Missing keys keep their defaults.
//!
//! | key | unit | default |
//! |-----|------|---------|
//! | `radius_km` | km | 0.5 |
//! | `traffic_density` (or `lambda`) | frames/s/km² | 10 |
//! | `path_loss_exponent` | | 4 |
//! | `power_control` | | 0.5 |
//! | `peak_power_dbm` / `peak_power_mw` | dBm / mW | 200 mW |
//! | `ref_power_dbm` / `ref_power_mw` | dBm at 1 km / mW | 10 dBm |
//! | `noise_psd_dbm_per_hz` / `noise_psd_mw_per_hz` | | −174 dBm/Hz |
//! | `carrier_ghz` / `carrier_hz` | | 2.4 GHz |
//! | `wavelength_unit_m` | m | 1 |
//! | `bits_per_pixel`, `compression` | | 24, 2 |
//! | `rho_max` | Erlang | 0.99 |
//! | `deadline_ms` / `deadline_s` | | 500 ms |
//! | `omega_min`, `a_min` | | 0.8, 0.9 |
//! | `beta1`, `beta2` | | 0.5, 1e6 |
//! | `error_margin` | | 0.017 |
//! | `c1` … `c5` | | detector fit |

use std::fmt::Write as _;
use std::path::Path;

use crate::dimensioning::Scenario;
use crate::error::{Error, Result};

fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

#[derive(Clone, Copy)]
enum Unit {
    Plain,
    Dbm,
    Giga,
    Milli,
}

impl Unit {
    fn to_internal(self, v: f64) -> f64 {
        match self {
            Unit::Plain => v,
            Unit::Dbm => dbm_to_mw(v),
            Unit::Giga => v * 1e9,
            Unit::Milli => v * 1e-3,
        }
    }

    fn to_display(self, v: f64) -> f64 {
        match self {
            Unit::Plain => v,
            Unit::Dbm => mw_to_dbm(v),
            Unit::Giga => v / 1e9,
            Unit::Milli => v * 1e3,
        }
    }
}

/// A scenario quantity: internal key, optional display-unit key, accessor.
struct Field {
    internal: &'static str,
    table: Option<(&'static str, Unit)>,
    alias: Option<&'static str>,
    get: fn(&mut Scenario) -> &mut f64,
}

const FIELDS: &[Field] = &[
    Field {
        internal: "radius_km",
        table: None,
        alias: None,
        get: |s| &mut s.radius_km,
    },
    Field {
        internal: "traffic_density",
        table: None,
        alias: Some("lambda"),
        get: |s| &mut s.traffic_density,
    },
    Field {
        internal: "path_loss_exponent",
        table: None,
        alias: None,
        get: |s| &mut s.channel.path_loss_exponent,
    },
    Field {
        internal: "power_control",
        table: None,
        alias: None,
        get: |s| &mut s.channel.power_control,
    },
    Field {
        internal: "peak_power_mw",
        table: Some(("peak_power_dbm", Unit::Dbm)),
        alias: None,
        get: |s| &mut s.channel.peak_power_mw,
    },
    Field {
        internal: "ref_power_mw",
        table: Some(("ref_power_dbm", Unit::Dbm)),
        alias: None,
        get: |s| &mut s.channel.ref_power_mw,
    },
    Field {
        internal: "noise_psd_mw_per_hz",
        table: Some(("noise_psd_dbm_per_hz", Unit::Dbm)),
        alias: None,
        get: |s| &mut s.channel.noise_psd_mw_per_hz,
    },
    Field {
        internal: "carrier_hz",
        table: Some(("carrier_ghz", Unit::Giga)),
        alias: None,
        get: |s| &mut s.channel.carrier_hz,
    },
    Field {
        internal: "wavelength_unit_m",
        table: None,
        alias: None,
        get: |s| &mut s.channel.wavelength_unit_m,
    },
    Field {
        internal: "bits_per_pixel",
        table: None,
        alias: None,
        get: |s| &mut s.frame.bits_per_pixel,
    },
    Field {
        internal: "compression",
        table: None,
        alias: None,
        get: |s| &mut s.frame.compression,
    },
    Field {
        internal: "rho_max",
        table: None,
        alias: None,
        get: |s| &mut s.rho_max,
    },
    Field {
        internal: "deadline_s",
        table: Some(("deadline_ms", Unit::Milli)),
        alias: None,
        get: |s| &mut s.deadline_s,
    },
    Field {
        internal: "omega_min",
        table: None,
        alias: None,
        get: |s| &mut s.omega_min,
    },
    Field {
        internal: "a_min",
        table: None,
        alias: None,
        get: |s| &mut s.a_min,
    },
    Field {
        internal: "beta1",
        table: None,
        alias: None,
        get: |s| &mut s.beta1,
    },
    Field {
        internal: "beta2",
        table: None,
        alias: None,
        get: |s| &mut s.beta2,
    },
    Field {
        internal: "error_margin",
        table: None,
        alias: None,
        get: |s| &mut s.error_margin,
    },
    Field {
        internal: "c1",
        table: None,
        alias: None,
        get: |s| &mut s.detector.c1,
    },
    Field {
        internal: "c2",
        table: None,
        alias: None,
        get: |s| &mut s.detector.c2,
    },
    Field {
        internal: "c3",
        table: None,
        alias: None,
        get: |s| &mut s.detector.c3,
    },
    Field {
        internal: "c4",
        table: None,
        alias: None,
        get: |s| &mut s.detector.c4,
    },
    Field {
        internal: "c5",
        table: None,
        alias: None,
        get: |s| &mut s.detector.c5,
    },
];

fn lookup(key: &str) -> Option<(&'static Field, Unit)> {
    FIELDS.iter().find_map(|f| {
        if f.internal == key || f.alias == Some(key) {
            Some((f, Unit::Plain))
        } else {
            match f.table {
                Some((k, u)) if k == key => Some((f, u)),
                _ => None,
            }
        }
    })
}

fn config_err(key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        message: message.into(),
    }
}

/// Parses a config document over the defaults and validates the result.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::ConfigParse(e.to_string()))?;
    let mut sc = Scenario::default();
    let mut seen: Vec<(&'static str, String)> = Vec::new();
    for (key, value) in &table {
        let (field, unit) = lookup(key).ok_or_else(|| config_err(key, "unknown key"))?;
        if let Some((_, other)) = seen.iter().find(|(k, _)| *k == field.internal) {
            return Err(config_err(key, format!("conflicts with `{other}`")));
        }
        let v = match value {
            toml::Value::Float(f) => *f,
            toml::Value::Integer(i) => *i as f64,
            other => {
                return Err(config_err(
                    key,
                    format!("expected a number, found {}", other.type_str()),
                ))
            }
        };
        if !v.is_finite() {
            return Err(config_err(key, "must be finite"));
        }
        *(field.get)(&mut sc) = unit.to_internal(v);
        seen.push((field.internal, key.clone()));
    }
    sc.validate().map_err(|e| match e {
        Error::Scenario(m) => config_err(scenario_key(&m), m),
        e => e,
    })?;
    Ok(sc)
}

/// Best guess at the key a validation message is about.
fn scenario_key(message: &str) -> &'static str {
    FIELDS
        .iter()
        .map(|f| f.internal)
        .find(|k| message.contains(k))
        .unwrap_or("scenario")
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    parse_scenario(&std::fs::read_to_string(path)?)
}

/// Effective config of `sc`, in display units (dBm, GHz, ms) wherever that converts back
/// to the identical value, so the echo re-parses to `sc` exactly.
pub fn scenario_to_config(sc: &Scenario) -> String {
    let mut sc = sc.clone();
    let mut out = String::new();
    for f in FIELDS {
        let v = *(f.get)(&mut sc);
        let (key, shown) = match f.table {
            Some((k, u)) if u.to_internal(u.to_display(v)) == v => (k, u.to_display(v)),
            _ => (f.internal, v),
        };
        let _ = writeln!(out, "{key} = {shown:?}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default() {
        assert_eq!(parse_scenario("").unwrap(), Scenario::default());
    }

    #[test]
    fn table_units_convert() {
        let sc = parse_scenario(
            "peak_power_dbm = 23\nref_power_dbm = 10\nnoise_psd_dbm_per_hz = -174\ncarrier_ghz = 2.4\ndeadline_ms = 500\nlambda = 5",
        )
        .unwrap();
        assert!((sc.channel.peak_power_mw - 199.526_231_496_888).abs() < 1e-9);
        assert!((sc.channel.ref_power_mw - 10.0).abs() < 1e-12);
        assert!((sc.channel.noise_psd_mw_per_hz / 10f64.powf(-17.4) - 1.0).abs() < 1e-12);
        assert!((sc.channel.carrier_hz - 2.4e9).abs() < 1e-3);
        assert!((sc.deadline_s - 0.5).abs() < 1e-15);
        assert_eq!(sc.traffic_density, 5.0);
    }

    #[test]
    fn errors_name_the_key() {
        let key = |text: &str| match parse_scenario(text).unwrap_err() {
            Error::Config { key, .. } => key,
            e => panic!("{e}"),
        };
        assert_eq!(key("radius = 1"), "radius");
        assert_eq!(key("beta1 = \"half\""), "beta1");
        assert_eq!(key("deadline_ms = 10\ndeadline_s = 0.01"), "deadline_s");
        assert_eq!(key("beta1 = 1.5"), "beta1");
        assert_eq!(key("radius_km = -1"), "radius_km");
        assert!(matches!(
            parse_scenario("radius_km = = 1"),
            Err(Error::ConfigParse(_))
        ));
    }

    #[test]
    fn echo_round_trips() {
        let defaults = Scenario::default();
        let text = scenario_to_config(&defaults);
        assert!(text.contains("deadline_ms = 500.0"));
        assert_eq!(parse_scenario(&text).unwrap(), defaults);

        let odd = parse_scenario("peak_power_dbm = 23\nnoise_psd_dbm_per_hz = -170.3\ncarrier_ghz = 3.5\ndeadline_ms = 123.4").unwrap();
        assert_eq!(parse_scenario(&scenario_to_config(&odd)).unwrap(), odd);
    }
}
