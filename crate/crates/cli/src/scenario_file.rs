//! TOML scenario files for `--scenario custom`.
//!
//! Every key is optional. An empty file runs the four side-by-side MAC schemes
//! over K = 1..8 with the default physical parameters. See `configs/` for one
//! commented file per figure.

use serde::Deserialize;

use sdma_core::harness::{Scenario, DEFAULT_TOPOLOGIES};
use sdma_core::mac::table2_configs;
use sdma_core::rf::dbm_to_mw;
use sdma_core::{McsPolicy, McsTable, RxStrategy, SchemeConfig, SchemeKind, SimParams, TxStrategy};

use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: Option<String>,
    k_values: Option<Vec<usize>>,
    topologies: Option<usize>,
    seed: Option<u64>,
    #[serde(default)]
    params: ParamsFile,
    #[serde(default)]
    scheme: Vec<SchemeFile>,
    #[serde(default)]
    mcs: Vec<toml::Value>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsFile {
    n_antennas: Option<usize>,
    n_subcarriers: Option<usize>,
    bandwidth_hz: Option<f64>,
    guard_fraction: Option<f64>,
    tx_power_dbm: Option<f64>,
    noise_dbm: Option<f64>,
    pathloss_exponent: Option<f64>,
    ref_distance_m: Option<f64>,
    wavelength_m: Option<f64>,
    area_m: Option<(f64, f64)>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum McsSpec {
    Index(usize),
    Name(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SchemeFile {
    name: String,
    #[serde(default = "concurrent")]
    kind: SchemeKind,
    #[serde(default = "beamnull")]
    tx: TxStrategy,
    #[serde(default = "zf")]
    rx: RxStrategy,
    mcs: McsSpec,
    #[serde(default)]
    est_noise: f64,
    #[serde(default)]
    backoff_db: f64,
}

fn concurrent() -> SchemeKind {
    SchemeKind::Concurrent
}

fn beamnull() -> TxStrategy {
    TxStrategy::Beamnull
}

fn zf() -> RxStrategy {
    RxStrategy::Zf
}

impl ParamsFile {
    fn apply(&self, p: &mut SimParams) {
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { p.$f = v; })* };
        }
        set!(
            n_antennas,
            n_subcarriers,
            bandwidth_hz,
            guard_fraction,
            pathloss_exponent,
            ref_distance_m,
            wavelength_m,
            area_m
        );
        if let Some(v) = self.tx_power_dbm {
            p.tx_power_mw = dbm_to_mw(v);
        }
        if let Some(v) = self.noise_dbm {
            p.noise_var_mw = dbm_to_mw(v);
        }
    }
}

fn policy(spec: &McsSpec, scheme: &str) -> Result<McsPolicy, CliError> {
    match spec {
        McsSpec::Index(i) => Ok(McsPolicy::Fixed(*i)),
        McsSpec::Name(s) if s.eq_ignore_ascii_case("adaptive") => Ok(McsPolicy::Adaptive),
        McsSpec::Name(s) => Err(CliError::Config(format!(
            "scheme `{scheme}`: mcs must be an index or \"adaptive\", got `{s}`"
        ))),
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario, CliError> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;

    let mut params = SimParams::default();
    file.params.apply(&mut params);

    let mcs_table = if file.mcs.is_empty() {
        McsTable::default()
    } else {
        let doc = toml::to_string(&toml::Table::from_iter([(
            "mcs".to_string(),
            toml::Value::Array(file.mcs),
        )]))
        .map_err(|e| CliError::Config(e.to_string()))?;
        McsTable::from_toml_str(&doc)?
    };

    let schemes = if file.scheme.is_empty() {
        table2_configs()
    } else {
        file.scheme
            .iter()
            .map(|s| {
                Ok(SchemeConfig {
                    name: s.name.clone(),
                    kind: s.kind,
                    tx: s.tx,
                    rx: s.rx,
                    mcs: policy(&s.mcs, &s.name)?,
                    est_noise_ratio: s.est_noise,
                    backoff_db: s.backoff_db,
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?
    };

    let scenario = Scenario {
        name: file.name.unwrap_or_else(|| "custom".into()),
        schemes,
        k_values: file.k_values.unwrap_or_else(|| (1..=8).collect()),
        n_topologies: file.topologies.unwrap_or(DEFAULT_TOPOLOGIES),
        base_seed: file.seed.unwrap_or(0),
        params,
        mcs_table,
        keep_samples: false,
    };
    scenario.validate()?;
    Ok(scenario)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_uses_defaults() {
        let s = parse_scenario("").unwrap();
        assert_eq!(s.schemes, table2_configs());
        assert_eq!(s.k_values, (1..=8).collect::<Vec<_>>());
        assert_eq!(s.n_topologies, 1000);
        assert_eq!(s.params, SimParams::default());
    }

    #[test]
    fn full_file() {
        let s = parse_scenario(
            r#"
            name = "mine"
            k_values = [2, 4]
            topologies = 50
            seed = 9
            [params]
            n_antennas = 2
            noise_dbm = -110.0
            area_m = [100.0, 50.0]
            [[scheme]]
            name = "a"
            tx = "beamform"
            rx = "ummse"
            mcs = "adaptive"
            est_noise = 0.5
            backoff_db = 1.0
            [[scheme]]
            name = "b"
            kind = "nonconcurrent"
            mcs = 3
            "#,
        )
        .unwrap();
        assert_eq!(s.name, "mine");
        assert_eq!((s.n_topologies, s.base_seed), (50, 9));
        assert_eq!(s.params.n_antennas, 2);
        assert!((s.params.noise_var_mw - 1e-11).abs() < 1e-20);
        assert_eq!(s.params.area_m, (100.0, 50.0));
        assert_eq!(s.schemes[0].rx, RxStrategy::UniversalMmse);
        assert_eq!(s.schemes[0].mcs, McsPolicy::Adaptive);
        assert_eq!(s.schemes[0].backoff_db, 1.0);
        assert_eq!(s.schemes[1].kind, SchemeKind::NonConcurrent);
        assert_eq!(s.schemes[1].mcs, McsPolicy::Fixed(3));
    }

    #[test]
    fn custom_mcs_table() {
        let s = parse_scenario(
            r#"
            [[mcs]]
            modulation = "BPSK"
            code_rate = "1/2"
            threshold_db = 2.0
            [[mcs]]
            modulation = "QPSK"
            code_rate = "3/4"
            threshold_db = 7.0
            [[scheme]]
            name = "x"
            mcs = 1
            "#,
        )
        .unwrap();
        assert_eq!(s.mcs_table.len(), 2);
        assert!(parse_scenario("[[scheme]]\nname = \"x\"\nmcs = 9\n").is_err());
    }

    #[test]
    fn errors_name_the_problem() {
        let e = parse_scenario("topologies = \"many\"").unwrap_err().to_string();
        assert!(e.contains("topologies"), "{e}");
        let e = parse_scenario("[params]\nantennas = 3").unwrap_err().to_string();
        assert!(e.contains("antennas"), "{e}");
        let e = parse_scenario("[[scheme]]\nname = \"x\"\nmcs = \"best\"")
            .unwrap_err()
            .to_string();
        assert!(e.contains("adaptive"), "{e}");
        assert!(parse_scenario("topologies = 0").is_err());
        assert!(parse_scenario("k_values = []").is_err());
    }
}
