//! Experiment configuration, read from TOML.
//!
//! Sections mirror the parameter grouping of the default scenario: `[aaa]` (active
//! antenna array), `[itu]` (approximate port pattern), `[elevation]`, `[azimuth]`,
//! `[general]`, plus `[cluster]`, `[users]` and `[sdb]`. Every field has a default.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::array::{ArrayGeometry, ElementPattern, ElementPatternParams, ItuPortPatternParams};
use crate::beamforming::{DinkelbachOptions, MrtScaling, SdbOptions};
use crate::channel::PathLossModel;
use crate::correlation::ScfMethod;
use crate::spectra::{AzimuthSpectrum, ClusterConfig, ElevationSpectrum};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    PatternCompare,
    CorrCompare,
    SingleUser,
    MultiUser,
    MultiCell,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::PatternCompare => "pattern-compare",
            Scenario::CorrCompare => "corr-compare",
            Scenario::SingleUser => "single-user",
            Scenario::MultiUser => "multi-user",
            Scenario::MultiCell => "multi-cell",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Downtilt strategy, written `sdb`, `com`, `muab`, `los`, `eigen` or `cst:<deg>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strategy {
    Sdb,
    Com,
    Muab,
    Los,
    Eigen,
    Cst(f64),
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Sdb => f.write_str("sdb"),
            Strategy::Com => f.write_str("com"),
            Strategy::Muab => f.write_str("muab"),
            Strategy::Los => f.write_str("los"),
            Strategy::Eigen => f.write_str("eigen"),
            Strategy::Cst(t) => write!(f, "cst:{t}"),
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        Ok(match s.as_str() {
            "sdb" => Strategy::Sdb,
            "com" => Strategy::Com,
            "muab" => Strategy::Muab,
            "los" => Strategy::Los,
            "eigen" => Strategy::Eigen,
            _ => {
                let angle = s
                    .strip_prefix("cst:")
                    .and_then(|a| a.parse::<f64>().ok())
                    .ok_or_else(|| Error::Config(format!("unknown strategy '{s}'")))?;
                if !(angle > 0.0 && angle < 180.0) {
                    return Err(Error::Config(format!("CST tilt must lie in (0, 180), got {angle}")));
                }
                Strategy::Cst(angle)
            }
        })
    }
}

impl Serialize for Strategy {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Strategy {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Active antenna array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AaaSection {
    /// Elements per port (vertical).
    pub m_per_port: usize,
    /// Ports (horizontal).
    pub n_ports: usize,
    pub d_v: f64,
    pub d_h: f64,
    pub theta_tilt_deg: f64,
    pub element: ElementPatternParams,
    pub isotropic: bool,
}

impl Default for AaaSection {
    fn default() -> Self {
        Self {
            m_per_port: 8,
            n_ports: 4,
            d_v: 0.8,
            d_h: 0.5,
            theta_tilt_deg: 90.0,
            element: ElementPatternParams::default(),
            isotropic: false,
        }
    }
}

impl AaaSection {
    pub fn geometry(&self, n_ports: usize) -> Result<ArrayGeometry> {
        let pattern = if self.isotropic { ElementPattern::Isotropic } else { ElementPattern::Directional(self.element) };
        ArrayGeometry::new(self.m_per_port, n_ports, self.d_v, self.d_h)?.with_pattern(pattern)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneralSection {
    pub p_tx_dbm: f64,
    pub noise_dbm: f64,
    pub path_loss: PathLossModel,
    pub shadow_fading_std_db: f64,
    /// Correlation integration method for per-user covariances.
    pub scf: ScfMethod,
    /// Samples for Monte-Carlo correlation estimates in the correlation scenario.
    pub mc_samples: usize,
    /// Angular step of the pattern cut, degrees.
    pub pattern_step_deg: f64,
    /// Conjugate-beamforming normalization in the multi-user scenarios.
    pub mrt_scaling: MrtScaling,
    /// Apply path loss and shadowing; otherwise every link has unit gain.
    pub large_scale: bool,
}

impl Default for GeneralSection {
    fn default() -> Self {
        Self {
            p_tx_dbm: 56.0,
            noise_dbm: -100.0,
            path_loss: PathLossModel::default(),
            shadow_fading_std_db: 6.0,
            scf: ScfMethod::Grid { order: 8 },
            mc_samples: 100_000,
            pattern_step_deg: 0.01,
            mrt_scaling: MrtScaling::PerUser,
            large_scale: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UsersSection {
    pub radius_m: f64,
    pub min_distance_m: f64,
    pub bs_height_m: f64,
    pub ue_height_m: f64,
    /// Users are placed within +-this azimuth of boresight.
    pub sector_half_width_deg: f64,
    /// Distance of the single-user scenario's user.
    pub single_user_distance_m: f64,
    /// Azimuth of the single-user scenario's user.
    pub single_user_azimuth_deg: f64,
    /// MUAB weights; uniform when empty.
    pub muab_weights: Vec<f64>,
}

impl Default for UsersSection {
    fn default() -> Self {
        Self {
            radius_m: 250.0,
            min_distance_m: 30.0,
            bs_height_m: 25.0,
            ue_height_m: 1.5,
            sector_half_width_deg: 60.0,
            single_user_distance_m: 250.0,
            single_user_azimuth_deg: 0.0,
            muab_weights: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SdbSection {
    pub randomizations: usize,
    pub dinkelbach_tol: f64,
    pub dinkelbach_max_iterations: usize,
    pub outer_iterations: usize,
    pub refine_iterations: usize,
    /// Leakage caps are this multiple of the leakage under centre-of-mass tilt weights.
    pub leakage_eta: f64,
    /// Multi-cell SDB counts interference from the other cells at their reference weights.
    pub inter_cell_aware: bool,
    /// Multi-cell solves, each with inter-cell terms taken at the previous weights.
    pub coordination_rounds: usize,
}

impl Default for SdbSection {
    fn default() -> Self {
        let o = SdbOptions::default();
        Self {
            randomizations: o.randomizations,
            dinkelbach_tol: o.dinkelbach.tol,
            dinkelbach_max_iterations: o.dinkelbach.max_iterations,
            outer_iterations: o.outer_iterations,
            refine_iterations: o.refine_iterations,
            leakage_eta: 1.0,
            inter_cell_aware: true,
            coordination_rounds: 2,
        }
    }
}

impl SdbSection {
    pub fn options(&self, seed: u64, scaling: MrtScaling) -> SdbOptions {
        SdbOptions {
            scaling,
            randomizations: self.randomizations,
            dinkelbach: DinkelbachOptions { tol: self.dinkelbach_tol, max_iterations: self.dinkelbach_max_iterations },
            outer_iterations: self.outer_iterations,
            refine_iterations: self.refine_iterations,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub seed: u64,
    /// Channel realizations per sweep point.
    pub trials: usize,
    /// Realizations sharing one user drop; standard errors are over drop means.
    pub draws_per_drop: usize,
    pub strategies: Vec<Strategy>,
    /// Swept values: port counts (single-user), users per cell (multi-user, multi-cell)
    /// or ignored. Empty selects the scenario default.
    pub sweep: Vec<f64>,
    pub out: Option<PathBuf>,
    /// Also write a gnuplot script next to the CSV.
    pub plot_script: bool,
    pub aaa: AaaSection,
    pub itu: ItuPortPatternParams,
    pub elevation: ElevationSpectrum,
    pub azimuth: AzimuthSpectrum,
    pub general: GeneralSection,
    pub cluster: ClusterConfig,
    pub users: UsersSection,
    pub sdb: SdbSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::for_scenario(Scenario::SingleUser)
    }
}

impl ExperimentConfig {
    /// Defaults of the named scenario.
    pub fn for_scenario(scenario: Scenario) -> Self {
        let strategies = match scenario {
            Scenario::SingleUser => vec![Strategy::Eigen, Strategy::Los, Strategy::Cst(100.0), Strategy::Cst(90.0)],
            Scenario::MultiUser | Scenario::MultiCell => vec![Strategy::Sdb, Strategy::Com, Strategy::Cst(90.0)],
            _ => Vec::new(),
        };
        let n_ports = match scenario {
            Scenario::MultiUser => 12,
            Scenario::MultiCell => 18,
            _ => 4,
        };
        Self {
            scenario,
            seed: 1,
            trials: 5000,
            draws_per_drop: 10,
            strategies,
            sweep: Vec::new(),
            out: None,
            plot_script: false,
            aaa: AaaSection { n_ports, ..AaaSection::default() },
            itu: ItuPortPatternParams::default(),
            elevation: ElevationSpectrum::default(),
            azimuth: AzimuthSpectrum::default(),
            general: match scenario {
                // Intra-cell study: covariances carry correlation only, powers are equalized.
                Scenario::MultiUser => GeneralSection { mrt_scaling: MrtScaling::Common, large_scale: false, ..GeneralSection::default() },
                _ => GeneralSection::default(),
            },
            cluster: ClusterConfig::default(),
            users: UsersSection::default(),
            sdb: SdbSection::default(),
        }
    }

    /// Parses a config, filling absent fields from the defaults of its scenario.
    pub fn from_toml_str(s: &str) -> Result<Self> {
        Self::parse(s, None)
    }

    /// Parses a config for `scenario`; a different `scenario` field in the text is an error.
    pub fn from_toml_str_for(s: &str, scenario: Scenario) -> Result<Self> {
        Self::parse(s, Some(scenario))
    }

    fn parse(s: &str, expected: Option<Scenario>) -> Result<Self> {
        let mut user: toml::Table = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        let scenario = match (user.get("scenario"), expected) {
            (Some(v), _) => Scenario::deserialize(v.clone()).map_err(|e| Error::Config(format!("scenario: {e}")))?,
            (None, Some(sc)) => sc,
            (None, None) => Scenario::SingleUser,
        };
        if let Some(sc) = expected {
            if sc != scenario {
                return Err(Error::Config(format!("config is for the {scenario} scenario, not {sc}")));
            }
        }
        user.insert("scenario".into(), toml::Value::String(scenario.name().into()));
        let mut base = toml::Table::try_from(Self::for_scenario(scenario)).map_err(|e| Error::Config(e.to_string()))?;
        merge(&mut base, user);
        let cfg = Self::deserialize(base).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path, scenario: Option<Scenario>) -> Result<Self> {
        let s = std::fs::read_to_string(path)?;
        Self::parse(&s, scenario).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Sweep values, falling back to the scenario default.
    pub fn sweep_values(&self) -> Vec<f64> {
        if !self.sweep.is_empty() {
            return self.sweep.clone();
        }
        match self.scenario {
            Scenario::SingleUser => vec![self.aaa.n_ports as f64],
            Scenario::MultiUser => vec![2.0, 4.0, 8.0],
            Scenario::MultiCell => vec![2.0, 4.0],
            _ => vec![0.0],
        }
    }

    /// Number of user drops per sweep point.
    pub fn drops(&self) -> usize {
        self.trials.div_ceil(self.draws_per_drop)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.trials == 0 || self.draws_per_drop == 0 {
            return bad("trials and draws_per_drop must be >= 1".into());
        }
        let u = &self.users;
        if !(u.min_distance_m > 0.0 && u.radius_m > u.min_distance_m) {
            return bad(format!("need 0 < min_distance_m < radius_m, got {} and {}", u.min_distance_m, u.radius_m));
        }
        if !(u.sector_half_width_deg > 0.0 && u.sector_half_width_deg <= 180.0) {
            return bad(format!("sector_half_width_deg must lie in (0, 180], got {}", u.sector_half_width_deg));
        }
        if !(u.single_user_distance_m > 0.0) || !u.bs_height_m.is_finite() || !u.ue_height_m.is_finite() {
            return bad("user distance must be > 0 and heights finite".into());
        }
        if !u.muab_weights.is_empty() && u.muab_weights.iter().any(|w| !(*w >= 0.0)) {
            return bad("muab_weights must be nonnegative".into());
        }
        if !(self.general.shadow_fading_std_db >= 0.0) || self.general.mc_samples == 0 {
            return bad("shadow_fading_std_db must be >= 0 and mc_samples >= 1".into());
        }
        if !(self.general.pattern_step_deg > 0.0 && self.general.pattern_step_deg <= 5.0) {
            return bad("pattern_step_deg must lie in (0, 5]".into());
        }
        if !(self.sdb.leakage_eta > 0.0) || self.sdb.outer_iterations == 0 || self.sdb.dinkelbach_max_iterations == 0 || !(self.sdb.dinkelbach_tol > 0.0) {
            return bad("sdb.leakage_eta and dinkelbach_tol must be > 0 and iteration counts >= 1".into());
        }
        for v in &self.sweep {
            if !(v.is_finite() && *v >= 1.0 && v.fract() == 0.0) {
                return bad(format!("sweep values must be positive integers, got {v}"));
            }
        }
        let check = |e: Error| Error::Config(e.to_string());
        self.aaa.geometry(self.aaa.n_ports).map_err(check)?;
        self.itu.validate().map_err(check)?;
        self.elevation.validate().map_err(check)?;
        self.azimuth.validate().map_err(check)?;
        self.cluster.validate().map_err(check)?;
        self.general.scf.validate().map_err(check)?;
        if !(self.aaa.theta_tilt_deg > 0.0 && self.aaa.theta_tilt_deg < 180.0) {
            return bad(format!("theta_tilt_deg must lie in (0, 180), got {}", self.aaa.theta_tilt_deg));
        }
        for s in &self.strategies {
            let ok = match s {
                Strategy::Los | Strategy::Eigen => self.scenario == Scenario::SingleUser,
                Strategy::Sdb | Strategy::Com | Strategy::Muab => {
                    matches!(self.scenario, Scenario::MultiUser | Scenario::MultiCell)
                }
                Strategy::Cst(_) => true,
            };
            if !ok {
                return bad(format!("strategy '{s}' is not available in the {} scenario", self.scenario));
            }
        }
        Ok(())
    }
}

/// Overlays `top` on `base`. Tables carrying a `kind` tag replace the default wholesale.
fn merge(base: &mut toml::Table, top: toml::Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) if !t.contains_key("kind") => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategy_round_trip() {
        for s in ["sdb", "com", "muab", "los", "eigen", "cst:90", "cst:100.5"] {
            assert_eq!(s.parse::<Strategy>().unwrap().to_string(), s);
        }
        assert!("cst:0".parse::<Strategy>().is_err());
        assert!("tilt".parse::<Strategy>().is_err());
    }

    #[test]
    fn toml_round_trip_and_defaults() {
        let cfg = ExperimentConfig::for_scenario(Scenario::MultiUser);
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
        let small = ExperimentConfig::from_toml_str("scenario = \"multi-cell\"\n[aaa]\nn_ports = 6\n").unwrap();
        assert_eq!(small.aaa.m_per_port, 8);
        assert_eq!(small.aaa.n_ports, 6);
        assert_eq!(small.strategies, vec![Strategy::Sdb, Strategy::Com, Strategy::Cst(90.0)]);
        assert_eq!(small.elevation, ElevationSpectrum::default());
        let fixed = ExperimentConfig::from_toml_str("[elevation]\nkind = \"fixed\"\ntheta_deg = 95.0\n").unwrap();
        assert_eq!(fixed.elevation, ElevationSpectrum::Fixed { theta_deg: 95.0 });
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ExperimentConfig::from_toml_str("trials = 0").is_err());
        assert!(ExperimentConfig::from_toml_str("[users]\nradius_m = 20.0").is_err());
        assert!(ExperimentConfig::from_toml_str("unknown = 1").is_err());
        assert!(ExperimentConfig::from_toml_str("scenario = \"multi-user\"\nstrategies = [\"eigen\"]").is_err());
        assert!(ExperimentConfig::from_toml_str_for("scenario = \"multi-user\"", Scenario::MultiCell).is_err());
        let mc = ExperimentConfig::from_toml_str_for("trials = 10", Scenario::MultiCell).unwrap();
        assert_eq!((mc.scenario, mc.aaa.n_ports), (Scenario::MultiCell, 18));
    }
}
