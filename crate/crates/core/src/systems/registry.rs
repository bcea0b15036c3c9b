//! Name-based system construction for run configurations.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use serde::Deserialize;

use super::{assemble_barotropic, assemble_nsf, Gas, NsfTransport, PressureLaw, SystemSpec, Transport};
use crate::error::{Error, Result};

pub type SystemConstructor = Arc<dyn Fn(&serde_json::Value) -> Result<SystemSpec> + Send + Sync>;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NsfParams {
    d: usize,
    gas: Gas,
    transport: NsfTransport,
    #[serde(default = "one")]
    rho_bar: f64,
    #[serde(default = "one")]
    theta_bar: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BarotropicParams {
    d: usize,
    pressure: PressureLaw,
    transport: Transport,
    #[serde(default = "one")]
    rho_bar: f64,
    rho_range: (f64, f64),
}

fn one() -> f64 {
    1.0
}

fn parse<T: for<'de> Deserialize<'de>>(name: &str, v: &serde_json::Value) -> Result<T> {
    serde_json::from_value(v.clone())
        .map_err(|e| Error::InvalidArgument(format!("bad parameters for system '{name}': {e}")))
}

fn registry() -> &'static RwLock<HashMap<String, SystemConstructor>> {
    static REG: OnceLock<RwLock<HashMap<String, SystemConstructor>>> = OnceLock::new();
    REG.get_or_init(|| {
        let mut m: HashMap<String, SystemConstructor> = HashMap::new();
        m.insert(
            "nsf".into(),
            Arc::new(|v| {
                let p: NsfParams = parse("nsf", v)?;
                assemble_nsf(p.d, p.gas, p.transport, p.rho_bar, p.theta_bar)
            }),
        );
        m.insert(
            "barotropic".into(),
            Arc::new(|v| {
                let p: BarotropicParams = parse("barotropic", v)?;
                assemble_barotropic(p.d, p.pressure, p.transport, p.rho_bar, p.rho_range)
            }),
        );
        RwLock::new(m)
    })
}

/// Makes a custom system available to [`system_from_config`]. Replaces any
/// previous constructor with the same name.
pub fn register_system(name: &str, ctor: SystemConstructor) {
    registry().write().unwrap_or_else(|e| e.into_inner()).insert(name.to_string(), ctor);
}

pub fn system_from_config(name: &str, params: &serde_json::Value) -> Result<SystemSpec> {
    let ctor = registry()
        .read()
        .unwrap_or_else(|e| e.into_inner())
        .get(name)
        .cloned()
        .ok_or_else(|| Error::InvalidArgument(format!("unknown system '{name}'")))?;
    ctor(params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_from_json() {
        let v = serde_json::json!({"d": 1, "pressure": {"a": 1.0, "gamma": 2.0},
            "transport": {"mu": 1.0, "lambda": 0.0}, "rho_range": [0.5, 2.0]});
        let s = system_from_config("barotropic", &v).unwrap();
        assert_eq!(s.n(), 2);
        let v = serde_json::json!({"d": 2, "gas": {"R": 1.0, "c_v": 1.0},
            "transport": {"mu": 1.0, "lambda": 0.0, "k": 1.0}});
        assert_eq!(system_from_config("nsf", &v).unwrap().n(), 4);
        assert!(system_from_config("euler", &v).is_err());
        let bad = serde_json::json!({"d": 2, "gas": {"R": 1.0, "c_v": 1.0}, "transport": {"mu": 1.0, "lambda": 0.0, "k": 1.0}, "extra": 1});
        assert!(system_from_config("nsf", &bad).is_err());
    }

    #[test]
    fn custom_registration() {
        register_system(
            "nsf-alias",
            Arc::new(|v| system_from_config("nsf", v)),
        );
        let v = serde_json::json!({"d": 1, "gas": {"R": 1.0, "c_v": 2.0},
            "transport": {"mu": 1.0, "lambda": 0.0, "k": 1.0}});
        assert_eq!(system_from_config("nsf-alias", &v).unwrap().n(), 3);
    }
}
