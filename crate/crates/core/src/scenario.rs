//! Scenario files: a TOML document with one section per layer, named
//! presets, command-line overrides, and sweep parameters.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::map::{parse_map, synth_map, MapContext, PoiCounts, RoadGraph};
use crate::mobility::{MobilityParams, SECONDS_PER_DAY};
use crate::radio::RadioParams;
use crate::routing::RouterKind;
use crate::traffic::TrafficConfig;

const HOUR: f64 = 3600.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapSource {
    #[default]
    Synthetic,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MapConfig {
    pub source: MapSource,
    pub width: f64,
    pub height: f64,
    pub grid_step: f64,
    /// Seeds the synthetic street grid and POI placement.
    pub seed: u64,
    /// WKT file, used when `source = "file"`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    pub pois: PoiCounts,
}

impl Default for MapConfig {
    fn default() -> Self {
        MapConfig {
            source: MapSource::Synthetic,
            width: 500.0,
            height: 500.0,
            grid_step: 50.0,
            seed: 1,
            file: None,
            pois: PoiCounts {
                houses: 24,
                offices: 9,
                evening_spots: 6,
                bus_stops: 12,
            },
        }
    }
}

impl MapConfig {
    pub fn load_graph(&self) -> Result<RoadGraph> {
        match self.source {
            MapSource::Synthetic => synth_map(self.width, self.height, self.grid_step, self.seed),
            MapSource::File => {
                let path = self
                    .file
                    .as_ref()
                    .ok_or_else(|| SimError::config("map.file", "required when source = \"file\""))?;
                let text = std::fs::read_to_string(path).map_err(|e| SimError::Io {
                    path: path.display().to_string(),
                    reason: e.to_string(),
                })?;
                parse_map(&text)
            }
        }
    }

    /// Builds the road graph and places POIs; fixed for a given map seed.
    pub fn build(&self, office_area: f64) -> Result<MapContext> {
        let poi_seed = self.seed ^ 0x9e37_79b9_7f4a_7c15;
        MapContext::build(self.load_graph()?, &self.pois, office_area, poi_seed)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeConfig {
    /// Node count per mobility group A..E.
    pub groups: [usize; 5],
}

impl Default for NodeConfig {
    fn default() -> Self {
        NodeConfig {
            groups: [16, 14, 15, 3, 2],
        }
    }
}

impl NodeConfig {
    pub fn count(&self) -> usize {
        self.groups.iter().sum()
    }

    /// Scales the groups to `total` nodes, keeping proportions by the
    /// largest-remainder method.
    pub fn rescaled(&self, total: usize) -> Result<NodeConfig> {
        let current = self.count();
        if current == 0 {
            return Err(SimError::config("nodes.groups", "all groups are empty"));
        }
        let exact: Vec<f64> = self
            .groups
            .iter()
            .map(|&g| g as f64 * total as f64 / current as f64)
            .collect();
        let mut groups = [0usize; 5];
        for (g, e) in groups.iter_mut().zip(&exact) {
            *g = e.floor() as usize;
        }
        let mut order: Vec<usize> = (0..5).collect();
        order.sort_by(|&a, &b| {
            let ra = exact[a] - exact[a].floor();
            let rb = exact[b] - exact[b].floor();
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        let short = total - groups.iter().sum::<usize>();
        for &i in order.iter().take(short) {
            groups[i] += 1;
        }
        Ok(NodeConfig { groups })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RoutingConfig {
    pub router: RouterKind,
    /// Initial copy tokens per message.
    pub copies: u32,
    /// Buffer capacity per node in bytes.
    pub buffer: u64,
    /// AP probability after an empty scan (Epidemic and SnW).
    pub p_ap: f64,
}

impl Default for RoutingConfig {
    fn default() -> Self {
        RoutingConfig {
            router: RouterKind::Hrson,
            copies: 10,
            buffer: 100_000_000,
            p_ap: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EngineConfig {
    pub duration: f64,
    pub tick: f64,
    pub seeds: Vec<u64>,
    /// Ticks between copy-token audits (copy-limited routers only).
    pub token_check_interval: u64,
    /// Seconds between TTL purges.
    pub ttl_sweep_interval: f64,
    /// Run the seeds of a batch on the rayon pool.
    pub parallel: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            duration: SECONDS_PER_DAY,
            tick: 1.0,
            seeds: (0..8).collect(),
            token_check_interval: 100,
            ttl_sweep_interval: 60.0,
            parallel: true,
        }
    }
}

/// A parameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    /// Creation interval range, written `min-max` in seconds.
    Traffic,
    /// Message TTL in hours.
    Ttl,
    Copies,
    /// Office count; evening spots follow at one fifth (at least three).
    Homes,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Traffic => "traffic",
            SweepParam::Ttl => "ttl",
            SweepParam::Copies => "copies",
            SweepParam::Homes => "homes",
        }
    }

    /// `base` with this parameter set to `value`.
    pub fn apply(self, base: &ScenarioConfig, value: &str) -> Result<ScenarioConfig> {
        let bad = |why: &str| SimError::config("sweep.values", format!("{}: `{value}` {why}", self.name()));
        let mut cfg = base.clone();
        let v = value.trim();
        match self {
            SweepParam::Copies => {
                cfg.routing.copies = v.parse().map_err(|_| bad("is not a copy count"))?;
            }
            SweepParam::Ttl => {
                let hours: f64 = v.parse().map_err(|_| bad("is not a number of hours"))?;
                cfg.traffic.ttl = hours * HOUR;
            }
            SweepParam::Traffic => {
                let (a, b) = v.split_once('-').ok_or_else(|| bad("should look like min-max"))?;
                let a: f64 = a.trim().parse().map_err(|_| bad("has a bad minimum"))?;
                let b: f64 = b.trim().parse().map_err(|_| bad("has a bad maximum"))?;
                cfg.traffic.interval = [a, b];
            }
            SweepParam::Homes => {
                let offices: usize = v.parse().map_err(|_| bad("is not an office count"))?;
                cfg.map.pois.offices = offices;
                cfg.map.pois.evening_spots = (offices / 5).max(3);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "traffic" | "traffic_interval" => Ok(SweepParam::Traffic),
            "ttl" => Ok(SweepParam::Ttl),
            "copies" => Ok(SweepParam::Copies),
            "homes" => Ok(SweepParam::Homes),
            other => Err(SimError::config(
                "sweep.param",
                format!("unknown parameter `{other}` (expected traffic, ttl, copies or homes)"),
            )),
        }
    }
}

fn all_routers() -> Vec<RouterKind> {
    RouterKind::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub param: SweepParam,
    pub values: Vec<String>,
    #[serde(default = "all_routers")]
    pub routers: Vec<RouterKind>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub map: MapConfig,
    #[serde(default)]
    pub nodes: NodeConfig,
    #[serde(default)]
    pub mobility: MobilityParams,
    #[serde(default)]
    pub traffic: TrafficConfig,
    #[serde(default)]
    pub radio: RadioParams,
    #[serde(default)]
    pub routing: RoutingConfig,
    #[serde(default)]
    pub engine: EngineConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

impl ScenarioConfig {
    pub fn node_count(&self) -> usize {
        self.nodes.count()
    }

    /// Checks every section; errors name the offending key.
    pub fn validate(&self) -> Result<()> {
        let e = &self.engine;
        if !(e.duration > 0.0 && e.duration.is_finite()) {
            return Err(SimError::config("engine.duration", "must be positive"));
        }
        if !(e.tick > 0.0 && e.tick <= e.duration) {
            return Err(SimError::config("engine.tick", "must lie in (0, duration]"));
        }
        if e.seeds.is_empty() {
            return Err(SimError::config("engine.seeds", "needs at least one seed"));
        }
        if e.token_check_interval == 0 {
            return Err(SimError::config("engine.token_check_interval", "must be positive"));
        }
        if e.ttl_sweep_interval.is_nan() || e.ttl_sweep_interval <= 0.0 {
            return Err(SimError::config("engine.ttl_sweep_interval", "must be positive"));
        }
        if self.node_count() < 2 {
            return Err(SimError::config("nodes.groups", "needs at least two nodes"));
        }
        let r = &self.routing;
        if r.copies == 0 {
            return Err(SimError::config("routing.copies", "must be at least 1"));
        }
        if r.buffer == 0 {
            return Err(SimError::config("routing.buffer", "must be positive"));
        }
        if !(0.0..=1.0).contains(&r.p_ap) {
            return Err(SimError::config("routing.p_ap", "must lie in [0, 1]"));
        }
        let m = &self.map;
        if m.source == MapSource::File && m.file.is_none() {
            return Err(SimError::config("map.file", "required when source = \"file\""));
        }
        if m.source == MapSource::Synthetic && !(m.width > 0.0 && m.height > 0.0 && m.grid_step > 0.0) {
            return Err(SimError::config("map", "width, height and grid_step must be positive"));
        }
        for (key, n) in [
            ("map.pois.houses", m.pois.houses),
            ("map.pois.offices", m.pois.offices),
            ("map.pois.evening_spots", m.pois.evening_spots),
        ] {
            if n == 0 {
                return Err(SimError::config(key, "must be positive"));
            }
        }
        self.mobility.validate()?;
        self.traffic.validate()?;
        self.radio.validate()?;
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return Err(SimError::config("sweep.values", "needs at least one value"));
            }
            if s.routers.is_empty() {
                return Err(SimError::config("sweep.routers", "needs at least one router"));
            }
            let base = ScenarioConfig {
                sweep: None,
                ..self.clone()
            };
            for v in &s.values {
                s.param.apply(&base, v)?;
            }
        }
        Ok(())
    }

    /// Parses and validates a TOML document.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| SimError::config("scenario", e.to_string().trim_end()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| SimError::config("scenario", e.to_string()))
    }

    /// Applies `key = value` overrides (dotted keys, TOML values; bare
    /// words are taken as strings), then re-validates.
    pub fn with_overrides(&self, overrides: &[(String, String)]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut doc: toml::Table = toml::from_str(&self.to_toml()?)
            .map_err(|e| SimError::config("scenario", e.to_string()))?;
        for (key, raw) in overrides {
            set_path(&mut doc, key, parse_value(raw))?;
        }
        let text = toml::to_string(&doc).map_err(|e| SimError::config("scenario", e.to_string()))?;
        Self::from_toml(&text)
    }
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_path(doc: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(SimError::config(key, "malformed key"));
    }
    let (last, parents) = parts.split_last().expect("non-empty");
    let mut table = doc;
    for p in parents {
        let entry = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| SimError::config(key, format!("`{p}` is not a section")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

/// Command-line style adjustments applied on top of a scenario.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub copies: Option<u32>,
    /// Hours.
    pub ttl_hours: Option<f64>,
    pub router: Option<RouterKind>,
    pub nodes: Option<usize>,
    pub duration: Option<f64>,
    /// Raw `key=value` pairs.
    pub keys: Vec<(String, String)>,
}

impl Overrides {
    pub fn apply(&self, base: &ScenarioConfig) -> Result<ScenarioConfig> {
        let mut pairs = Vec::new();
        if let Some(c) = self.copies {
            pairs.push(("routing.copies".to_string(), c.to_string()));
        }
        if let Some(h) = self.ttl_hours {
            pairs.push(("traffic.ttl".to_string(), format!("{:?}", h * HOUR)));
        }
        if let Some(r) = self.router {
            pairs.push(("routing.router".to_string(), format!("\"{}\"", r.name())));
        }
        if let Some(d) = self.duration {
            pairs.push(("engine.duration".to_string(), format!("{d:?}")));
        }
        if let Some(n) = self.nodes {
            let g = base.nodes.rescaled(n)?.groups;
            pairs.push(("nodes.groups".to_string(), format!("{g:?}")));
        }
        pairs.extend(self.keys.iter().cloned());
        base.with_overrides(&pairs)
    }
}

/// Splits `key=value`.
pub fn parse_assignment(s: &str) -> Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| SimError::config(s, "expected key=value"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

pub const PRESET_NAMES: [&str; 8] = [
    "scenario1", "scenario2", "scenario3", "scenario4", "desk1", "desk2", "desk3", "desk4",
];

fn sweep(param: SweepParam, values: &[&str]) -> Option<SweepConfig> {
    Some(SweepConfig {
        param,
        values: values.iter().map(|s| s.to_string()).collect(),
        routers: all_routers(),
    })
}

const COPIES_VALUES: [&str; 5] = ["4", "8", "12", "16", "20"];
const TTL_VALUES: [&str; 4] = ["6", "12", "18", "24"];
const TRAFFIC_VALUES: [&str; 4] = ["75-100", "50-75", "25-50", "10-25"];
/// Full-size intervals stretched 6x. At that load flooding still overflows
/// every buffer while copy-limited routers fit, as at full size.
const DESK_TRAFFIC_VALUES: [&str; 4] = ["450-600", "300-450", "150-300", "60-150"];
const DESK_INTERVAL: [f64; 2] = [60.0, 300.0];

/// Full-size study: 1000 nodes over five working days.
fn full_scale(variant: u8) -> ScenarioConfig {
    let mut cfg = ScenarioConfig {
        map: MapConfig {
            source: MapSource::Synthetic,
            width: 1750.0,
            height: 2125.0,
            grid_step: 125.0,
            seed: 1,
            file: None,
            pois: PoiCounts {
                houses: 203,
                offices: 45,
                evening_spots: 9,
                bus_stops: 30,
            },
        },
        nodes: NodeConfig {
            groups: [325, 275, 300, 50, 50],
        },
        engine: EngineConfig {
            duration: 5.0 * SECONDS_PER_DAY,
            seeds: (0..32).collect(),
            ..EngineConfig::default()
        },
        ..ScenarioConfig::default()
    };
    match variant {
        1 => {
            cfg.map.pois.offices = 50;
            cfg.map.pois.evening_spots = 10;
            cfg.sweep = sweep(SweepParam::Homes, &["50", "150", "250", "350", "450"]);
        }
        2 => cfg.sweep = sweep(SweepParam::Copies, &COPIES_VALUES),
        3 => cfg.sweep = sweep(SweepParam::Ttl, &TTL_VALUES),
        _ => {
            cfg.traffic.interval = [75.0, 100.0];
            cfg.sweep = sweep(SweepParam::Traffic, &TRAFFIC_VALUES);
        }
    }
    cfg
}

/// 50 nodes on a 500 m square for one day.
fn desk_scale(variant: u8) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default();
    cfg.traffic.interval = DESK_INTERVAL;
    match variant {
        1 => cfg.sweep = sweep(SweepParam::Homes, &["15", "30", "45", "60", "75"]),
        2 => cfg.sweep = sweep(SweepParam::Copies, &COPIES_VALUES),
        3 => cfg.sweep = sweep(SweepParam::Ttl, &TTL_VALUES),
        _ => {
            cfg.traffic.interval = [450.0, 600.0];
            cfg.sweep = sweep(SweepParam::Traffic, &DESK_TRAFFIC_VALUES);
        }
    }
    cfg
}

/// A built-in scenario by name.
pub fn preset(name: &str) -> Option<ScenarioConfig> {
    let (scale, variant) = if let Some(v) = name.strip_prefix("scenario") {
        (true, v)
    } else {
        (false, name.strip_prefix("desk")?)
    };
    let v: u8 = variant.parse().ok().filter(|v| (1..=4).contains(v))?;
    Some(if scale { full_scale(v) } else { desk_scale(v) })
}

/// Loads a scenario file, or a preset when `source` names one and no such
/// file exists.
pub fn load_scenario(source: &str, overrides: &Overrides) -> Result<ScenarioConfig> {
    let path = Path::new(source);
    let base = if path.exists() {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::Io {
            path: source.to_string(),
            reason: e.to_string(),
        })?;
        ScenarioConfig::from_toml(&text)?
    } else if let Some(p) = preset(source) {
        p
    } else {
        return Err(SimError::Io {
            path: source.to_string(),
            reason: format!("no such file or preset (presets: {})", PRESET_NAMES.join(", ")),
        });
    };
    overrides.apply(&base)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_round_trip_and_validate() {
        for name in PRESET_NAMES {
            let cfg = preset(name).unwrap();
            cfg.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
            let text = cfg.to_toml().unwrap();
            assert_eq!(ScenarioConfig::from_toml(&text).unwrap(), cfg, "{name}");
        }
        assert!(preset("scenario5").is_none());
        assert!(preset("desk").is_none());
    }

    #[test]
    fn traffic_preset_fixes_ttl_and_copies() {
        let cfg = preset("scenario4").unwrap();
        assert_eq!(cfg.traffic.ttl, 24.0 * HOUR);
        assert_eq!(cfg.routing.copies, 10);
        assert_eq!(cfg.sweep.as_ref().unwrap().param, SweepParam::Traffic);
        assert_eq!(cfg.node_count(), 1000);
    }

    #[test]
    fn copies_override() {
        let base = preset("scenario2").unwrap();
        let o = Overrides {
            copies: Some(12),
            ..Overrides::default()
        };
        assert_eq!(o.apply(&base).unwrap().routing.copies, 12);
    }

    #[test]
    fn misspelled_key_is_named() {
        let err = ScenarioConfig::from_toml("[routing]\ncopise = 4\n").unwrap_err();
        assert!(err.to_string().contains("copise"), "{err}");
        let err = ScenarioConfig::default()
            .with_overrides(&[("routing.copise".into(), "4".into())])
            .unwrap_err();
        assert!(err.to_string().contains("copise"), "{err}");
    }

    #[test]
    fn type_mismatch_and_constraint_errors_name_the_key() {
        let err = ScenarioConfig::from_toml("[routing]\ncopies = \"many\"\n").unwrap_err();
        assert!(err.to_string().contains("copies"), "{err}");
        let err = ScenarioConfig::from_toml("[engine]\nduration = -5.0\n").unwrap_err();
        assert!(err.to_string().contains("engine.duration"), "{err}");
    }

    #[test]
    fn empty_document_is_the_default() {
        assert_eq!(ScenarioConfig::from_toml("").unwrap(), ScenarioConfig::default());
    }

    #[test]
    fn rescale_keeps_total() {
        let n = NodeConfig {
            groups: [325, 275, 300, 50, 50],
        };
        assert_eq!(n.rescaled(50).unwrap().groups, [16, 14, 15, 3, 2]);
        for total in [0, 2, 7, 99, 1000, 1234] {
            assert_eq!(n.rescaled(total).unwrap().count(), total);
        }
    }

    #[test]
    fn sweep_values_apply() {
        let base = ScenarioConfig::default();
        assert_eq!(SweepParam::Ttl.apply(&base, "6").unwrap().traffic.ttl, 21_600.0);
        assert_eq!(
            SweepParam::Traffic.apply(&base, "25-50").unwrap().traffic.interval,
            [25.0, 50.0]
        );
        let homes = SweepParam::Homes.apply(&base, "450").unwrap();
        assert_eq!((homes.map.pois.offices, homes.map.pois.evening_spots), (450, 90));
        assert!(SweepParam::Copies.apply(&base, "x").is_err());
        assert!(SweepParam::Copies.apply(&base, "0").is_err());
        assert!("bogus".parse::<SweepParam>().is_err());
    }

    #[test]
    fn empty_sweep_is_rejected() {
        let cfg = ScenarioConfig {
            sweep: Some(SweepConfig {
                param: SweepParam::Copies,
                values: vec![],
                routers: all_routers(),
            }),
            ..ScenarioConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn assignment_parsing() {
        assert_eq!(
            parse_assignment("radio.range = 30").unwrap(),
            ("radio.range".to_string(), "30".to_string())
        );
        assert!(parse_assignment("radio.range").is_err());
        let cfg = ScenarioConfig::default()
            .with_overrides(&[
                ("radio.range".into(), "30.0".into()),
                ("routing.router".into(), "snw".into()),
            ])
            .unwrap();
        assert_eq!(cfg.radio.range, 30.0);
        assert_eq!(cfg.routing.router, RouterKind::SprayAndWait);
    }
}
