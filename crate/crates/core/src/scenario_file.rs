//! Plain-text scenario files.
//!
//! ```text
//! # comment
//! name = corridor
//! sigma_db = 7.5
//! correlation_distance = 50
//! min_distance = 500
//! modes = rss, drss
//!
//! [base_stations]
//! -250, 10
//! 0, -10
//! 250, 10
//! ```
//!
//! `key = value` lines may appear anywhere; other non-blank lines belong to
//! the most recent `[section]` and hold one `x, y` pair each.

use std::collections::BTreeMap;
use std::path::Path;

use crate::adversary::Region;
use crate::channel::{NetworkGeometry, Point};
use crate::detector::Mode;
use crate::error::{LvsError, Result};
use crate::experiments::{
    AttackPolicy, McSettings, Scenario, SearchOverrides, Sweep, CLAIMED_LOCATION, DEFAULT_MC_THRESHOLDS,
    DEFAULT_MC_TRIALS, PATH_LOSS_EXPONENT, REFERENCE_DISTANCE, REFERENCE_POWER_DB,
};
use crate::format::fmt_g12;

const KEYS: &[&str] = &[
    "name",
    "sigma_db",
    "correlation_distance",
    "min_distance",
    "claimed_location",
    "reference_power",
    "reference_distance",
    "path_loss_exponent",
    "attack",
    "true_location",
    "power_boost_db",
    "modes",
    "roc_thresholds",
    "mc_trials",
    "mc_seed",
    "mc_thresholds",
    "sweep_correlation_distance",
    "sweep_min_distance",
    "boost_offsets",
    "search_region",
    "coarse_grid_step",
    "refine_iterations",
    "refine_shrink",
];

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Top,
    BaseStations,
    ComparisonLocations,
}

struct Entry {
    line: usize,
    value: String,
}

struct Parser<'a> {
    path: &'a str,
    entries: BTreeMap<&'static str, Entry>,
}

impl Parser<'_> {
    fn err(&self, line: usize, message: impl Into<String>) -> LvsError {
        LvsError::Parse {
            path: self.path.to_string(),
            line,
            message: message.into(),
        }
    }

    fn take(&mut self, key: &str) -> Option<Entry> {
        self.entries.remove(key)
    }

    fn required(&mut self, key: &str, last_line: usize) -> Result<Entry> {
        self.take(key)
            .ok_or_else(|| self.err(last_line, format!("missing required key `{key}`")))
    }

    fn float(&self, e: &Entry) -> Result<f64> {
        parse_float(&e.value).map_err(|m| self.err(e.line, m))
    }

    fn floats(&self, e: &Entry) -> Result<Vec<f64>> {
        e.value
            .split(',')
            .map(parse_float)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|m| self.err(e.line, m))
    }

    fn point(&self, e: &Entry) -> Result<Point> {
        parse_point(&e.value).map_err(|m| self.err(e.line, m))
    }

    fn opt_float(&mut self, key: &str, default: f64) -> Result<f64> {
        match self.take(key) {
            Some(e) => self.float(&e),
            None => Ok(default),
        }
    }

    fn integer<T: std::str::FromStr>(&self, e: &Entry) -> Result<T> {
        e.value.trim().parse().map_err(|_| {
            self.err(
                e.line,
                format!("expected a non-negative integer, got {:?}", e.value.trim()),
            )
        })
    }
}

fn parse_float(s: &str) -> std::result::Result<f64, String> {
    let t = s.trim();
    match t.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("expected a finite number, got {t:?}")),
    }
}

fn parse_point(s: &str) -> std::result::Result<Point, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("expected `x, y`, got {:?}", s.trim()));
    }
    Ok(Point::new(parse_float(parts[0])?, parse_float(parts[1])?))
}

/// Parses scenario text; `path` is only used in error messages.
pub fn parse_scenario(text: &str, path: &str) -> Result<Scenario> {
    let mut p = Parser {
        path,
        entries: BTreeMap::new(),
    };
    let mut section = Section::Top;
    let mut seen_sections = Vec::new();
    let mut stations = Vec::new();
    let mut comparisons = Vec::new();
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| p.err(line_no, "unterminated section header"))?
                .trim();
            section = match name {
                "base_stations" => Section::BaseStations,
                "comparison_locations" => Section::ComparisonLocations,
                other => return Err(p.err(line_no, format!("unknown section [{other}]"))),
            };
            if seen_sections.contains(&name.to_string()) {
                return Err(p.err(line_no, format!("duplicate section [{name}]")));
            }
            seen_sections.push(name.to_string());
            continue;
        }
        if let Some((key, value)) = line.split_once('=') {
            let key = key.trim();
            let Some(&known) = KEYS.iter().find(|k| **k == key) else {
                return Err(p.err(line_no, format!("unknown key `{key}`")));
            };
            if let Some(prev) = p.entries.get(known) {
                return Err(p.err(
                    line_no,
                    format!("duplicate key `{key}` (first set on line {})", prev.line),
                ));
            }
            p.entries.insert(
                known,
                Entry {
                    line: line_no,
                    value: value.trim().to_string(),
                },
            );
            continue;
        }
        let point = parse_point(line).map_err(|m| p.err(line_no, m))?;
        match section {
            Section::Top => return Err(p.err(line_no, "coordinate pair outside a section")),
            Section::BaseStations => stations.push(point),
            Section::ComparisonLocations => comparisons.push(point),
        }
    }

    let e = p.required("name", last_line)?;
    let name = e.value.clone();
    let e = p.required("sigma_db", last_line)?;
    let sigma_db = p.float(&e)?;
    let e = p.required("correlation_distance", last_line)?;
    let correlation_distance = p.float(&e)?;
    let e = p.required("min_distance", last_line)?;
    let min_distance = p.float(&e)?;

    let claimed = match p.take("claimed_location") {
        Some(e) => p.point(&e)?,
        None => CLAIMED_LOCATION,
    };
    let reference_power = p.opt_float("reference_power", REFERENCE_POWER_DB)?;
    let reference_distance = p.opt_float("reference_distance", REFERENCE_DISTANCE)?;
    let path_loss_exponent = p.opt_float("path_loss_exponent", PATH_LOSS_EXPONENT)?;
    if stations.is_empty() {
        return Err(p.err(last_line, "missing [base_stations] section"));
    }
    let geometry = NetworkGeometry::new(
        stations,
        claimed,
        reference_power,
        reference_distance,
        path_loss_exponent,
    )?;

    let attack_entry = p.take("attack");
    let true_location = p.take("true_location");
    let boost = p.take("power_boost_db");
    let attack = match attack_entry.as_ref().map(|e| (e.line, e.value.as_str())) {
        None | Some((_, "optimal")) => {
            if let Some(e) = true_location.as_ref().or(boost.as_ref()) {
                return Err(p.err(e.line, "true_location and power_boost_db require `attack = fixed`"));
            }
            AttackPolicy::Optimal
        }
        Some((line, "fixed")) => {
            let loc = true_location.ok_or_else(|| p.err(line, "`attack = fixed` requires true_location"))?;
            let location = p.point(&loc)?;
            match boost {
                Some(b) => AttackPolicy::FixedLocationAndBoost {
                    location,
                    power_boost_db: p.float(&b)?,
                },
                None => AttackPolicy::FixedLocation(location),
            }
        }
        Some((line, other)) => return Err(p.err(line, format!("attack must be optimal or fixed, got {other:?}"))),
    };

    let modes = match p.take("modes") {
        Some(e) => e
            .value
            .split(',')
            .map(|m| m.parse::<Mode>().map_err(|err| p.err(e.line, err.to_string())))
            .collect::<Result<Vec<_>>>()?,
        None => vec![Mode::Rss, Mode::Drss],
    };
    let thresholds = match p.take("roc_thresholds") {
        Some(e) => Some(p.floats(&e)?),
        None => None,
    };
    let trials = match p.take("mc_trials") {
        Some(e) => p.integer(&e)?,
        None => DEFAULT_MC_TRIALS,
    };
    let seed = match p.take("mc_seed") {
        Some(e) => p.integer(&e)?,
        None => 0,
    };
    let mc_thresholds = match p.take("mc_thresholds") {
        Some(e) => p.floats(&e)?,
        None => DEFAULT_MC_THRESHOLDS.to_vec(),
    };

    let sweep_dc = p.take("sweep_correlation_distance");
    let sweep_r = p.take("sweep_min_distance");
    let sweep = match (sweep_dc, sweep_r) {
        (Some(_), Some(e)) => return Err(p.err(e.line, "only one sweep key may be set")),
        (Some(e), None) => Sweep::CorrelationDistance(p.floats(&e)?),
        (None, Some(e)) => Sweep::MinDistance(p.floats(&e)?),
        (None, None) => Sweep::None,
    };
    let boost_offsets = match p.take("boost_offsets") {
        Some(e) => p.floats(&e)?,
        None => Vec::new(),
    };

    let region = match p.take("search_region") {
        Some(e) => {
            let v = p.floats(&e)?;
            if v.len() != 4 {
                return Err(p.err(e.line, "search_region needs `xmin, ymin, xmax, ymax`"));
            }
            Some(
                Region::new(Point::new(v[0], v[1]), Point::new(v[2], v[3]))
                    .map_err(|err| p.err(e.line, err.to_string()))?,
            )
        }
        None => None,
    };
    let coarse_grid_step = match p.take("coarse_grid_step") {
        Some(e) => Some(p.float(&e)?),
        None => None,
    };
    let refine_iterations = match p.take("refine_iterations") {
        Some(e) => Some(p.integer(&e)?),
        None => None,
    };
    let refine_shrink = match p.take("refine_shrink") {
        Some(e) => Some(p.float(&e)?),
        None => None,
    };

    let scenario = Scenario {
        name,
        geometry,
        sigma_db,
        correlation_distance,
        min_distance,
        attack,
        modes,
        thresholds,
        mc: McSettings {
            trials,
            seed,
            thresholds: mc_thresholds,
        },
        sweep,
        comparison_locations: comparisons,
        boost_offsets,
        search: SearchOverrides {
            region,
            coarse_grid_step,
            refine_iterations,
            refine_shrink,
        },
    };
    scenario.validate()?;
    Ok(scenario)
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| LvsError::Io(format!("{}: {e}", path.display())))?;
    parse_scenario(&text, &path.display().to_string())
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| fmt_g12(*v)).collect::<Vec<_>>().join(", ")
}

fn point(p: Point) -> String {
    format!("{}, {}", fmt_g12(p.x), fmt_g12(p.y))
}

/// Writes a scenario in the format read by [`parse_scenario`]. Values are
/// printed with 12 significant digits.
pub fn write_scenario(s: &Scenario) -> String {
    let g = &s.geometry;
    let mut out = Vec::new();
    out.push(format!("name = {}", s.name));
    out.push(format!("sigma_db = {}", fmt_g12(s.sigma_db)));
    out.push(format!("correlation_distance = {}", fmt_g12(s.correlation_distance)));
    out.push(format!("min_distance = {}", fmt_g12(s.min_distance)));
    out.push(format!("claimed_location = {}", point(g.claimed_location())));
    out.push(format!("reference_power = {}", fmt_g12(g.reference_power_db())));
    out.push(format!("reference_distance = {}", fmt_g12(g.reference_distance())));
    out.push(format!("path_loss_exponent = {}", fmt_g12(g.path_loss_exponent())));
    match s.attack {
        AttackPolicy::Optimal => out.push("attack = optimal".into()),
        AttackPolicy::FixedLocation(p) => {
            out.push("attack = fixed".into());
            out.push(format!("true_location = {}", point(p)));
        }
        AttackPolicy::FixedLocationAndBoost {
            location,
            power_boost_db,
        } => {
            out.push("attack = fixed".into());
            out.push(format!("true_location = {}", point(location)));
            out.push(format!("power_boost_db = {}", fmt_g12(power_boost_db)));
        }
    }
    let modes: Vec<&str> = s.modes.iter().map(Mode::as_str).collect();
    out.push(format!("modes = {}", modes.join(", ")));
    if let Some(t) = &s.thresholds {
        out.push(format!("roc_thresholds = {}", join(t)));
    }
    out.push(format!("mc_trials = {}", s.mc.trials));
    out.push(format!("mc_seed = {}", s.mc.seed));
    out.push(format!("mc_thresholds = {}", join(&s.mc.thresholds)));
    match &s.sweep {
        Sweep::None => {}
        Sweep::CorrelationDistance(v) => out.push(format!("sweep_correlation_distance = {}", join(v))),
        Sweep::MinDistance(v) => out.push(format!("sweep_min_distance = {}", join(v))),
    }
    if !s.boost_offsets.is_empty() {
        out.push(format!("boost_offsets = {}", join(&s.boost_offsets)));
    }
    if let Some(r) = s.search.region {
        out.push(format!(
            "search_region = {}",
            join(&[r.min.x, r.min.y, r.max.x, r.max.y])
        ));
    }
    if let Some(v) = s.search.coarse_grid_step {
        out.push(format!("coarse_grid_step = {}", fmt_g12(v)));
    }
    if let Some(v) = s.search.refine_iterations {
        out.push(format!("refine_iterations = {v}"));
    }
    if let Some(v) = s.search.refine_shrink {
        out.push(format!("refine_shrink = {}", fmt_g12(v)));
    }
    out.push(String::new());
    out.push("[base_stations]".into());
    out.extend(g.base_stations().iter().map(|p| point(*p)));
    if !s.comparison_locations.is_empty() {
        out.push(String::new());
        out.push("[comparison_locations]".into());
        out.extend(s.comparison_locations.iter().map(|p| point(*p)));
    }
    out.push(String::new());
    out.join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::builtin_scenarios;

    const MINIMAL: &str = "name = tiny\nsigma_db = 5\ncorrelation_distance = 50\nmin_distance = 100\n[base_stations]\n0, 10\n131.4, -9.3\n20.6, -0.9\n";

    fn parse_err(text: &str) -> (usize, String) {
        match parse_scenario(text, "t.scenario").unwrap_err() {
            LvsError::Parse { line, message, .. } => (line, message),
            other => panic!("expected a parse error, got {other}"),
        }
    }

    #[test]
    fn minimal_file_gets_defaults() {
        let s = parse_scenario(MINIMAL, "t").unwrap();
        assert_eq!(s.geometry.claimed_location(), Point::new(50.0, 5.0));
        assert_eq!(s.modes, vec![Mode::Rss, Mode::Drss]);
        assert_eq!(s.attack, AttackPolicy::Optimal);
        assert_eq!(s.mc.trials, DEFAULT_MC_TRIALS);
        assert_eq!(s.sweep, Sweep::None);
    }

    #[test]
    fn builtins_round_trip() {
        for s in builtin_scenarios() {
            let text = write_scenario(&s);
            assert_eq!(parse_scenario(&text, "rt").unwrap(), s, "{text}");
        }
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert_eq!(parse_err("name = a\nbogus = 1\n").0, 2);
        let (line, msg) = parse_err("name = a\nname = b\n");
        assert_eq!(line, 2);
        assert!(msg.contains("duplicate"));
        assert_eq!(parse_err("name = a\n1, 2\n").0, 2);
        assert_eq!(parse_err("[stations]\n").0, 1);
        let (line, msg) = parse_err(&MINIMAL.replace("sigma_db = 5", "sigma_db = five"));
        assert_eq!(line, 2);
        assert!(msg.contains("finite number"));
        assert!(parse_err("name = a\n").1.contains("missing required key"));
    }

    #[test]
    fn fixed_attack_inside_disc_is_rejected() {
        let text = format!("{MINIMAL}attack = fixed\ntrue_location = 60, 5\n");
        let err = parse_scenario(&text, "t").unwrap_err().to_string();
        assert!(err.contains("minimum-distance"), "{err}");
        let text = format!("{MINIMAL}true_location = 600, 5\n");
        assert!(parse_err(&text).1.contains("attack = fixed"));
    }

    #[test]
    fn conflicting_sweeps_rejected() {
        let text = format!("{MINIMAL}sweep_min_distance = 100, 200\nsweep_correlation_distance = 0\n");
        assert!(parse_err(&text).1.contains("only one sweep"));
    }
}
