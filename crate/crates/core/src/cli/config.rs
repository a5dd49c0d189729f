//! Run configuration: a flat `[section]` / `key = value` document with `#`
//! comments. Keys before the first section header belong to `[run]`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;

use crate::discretization::GridSpec;
use crate::inertial::InertialScheme;
use crate::model::{InertialPressureConvention, PermeabilityModel, PhysicalParams};
use crate::operators::CgSettings;
use crate::quasistatic::SourcePath;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{key}: {message}")]
    Schema { key: String, message: String },
}

impl ConfigError {
    fn schema(key: &str, message: impl Into<String>) -> Self {
        Self::Schema {
            key: key.to_string(),
            message: message.into(),
        }
    }
}

/// Every accepted `section.key`.
const KNOWN_KEYS: &[&str] = &[
    "run.mode",
    "run.seed",
    "params.D",
    "params.alpha",
    "params.c_p",
    "params.rho_p",
    "params.h",
    "grid.M",
    "grid.N",
    "grid.N3",
    "time.T",
    "time.tau",
    "time.scheme",
    "time.source_path",
    "permeability.preset",
    "permeability.value",
    "permeability.k0",
    "permeability.amplitude",
    "permeability.omega",
    "permeability.contrast",
    "permeability.width",
    "sources.preset",
    "sources.f_scale",
    "sources.g_scale",
    "sources.amplitude",
    "sources.omega",
    "initial.preset",
    "initial.kind",
    "initial.convention",
    "initial.scale",
    "solver.cg_tol",
    "solver.cg_max_iter",
    "verify.suites",
    "verify.energy_steps",
    "output.dir",
    "output.snapshot_every",
    "output.slice_points",
];

/// Raw `section.key -> (value, line)` entries; line 0 marks an override.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Document {
    entries: BTreeMap<String, (String, usize)>,
}

impl Document {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut doc = Document::default();
        let mut section = "run".to_string();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| ConfigError::Parse {
                    line,
                    message: format!("unterminated section header '{content}'"),
                })?;
                let name = name.trim();
                if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                    return Err(ConfigError::Parse {
                        line,
                        message: format!("invalid section name '{name}'"),
                    });
                }
                section = name.to_string();
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Parse {
                line,
                message: format!("expected 'key = value', got '{content}'"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(ConfigError::Parse {
                    line,
                    message: format!("invalid key '{key}'"),
                });
            }
            if value.is_empty() {
                return Err(ConfigError::Parse {
                    line,
                    message: format!("missing value for '{key}'"),
                });
            }
            let full = format!("{section}.{key}");
            if let Some((_, first)) = doc.entries.get(&full) {
                return Err(ConfigError::Parse {
                    line,
                    message: format!("duplicate key '{full}' (first set on line {first})"),
                });
            }
            doc.entries.insert(full, (value.to_string(), line));
        }
        Ok(doc)
    }

    /// Applies `key=value`, where `key` is `section.key` or a `[run]` key.
    pub fn apply_override(&mut self, spec: &str) -> Result<(), ConfigError> {
        let (key, value) = spec
            .split_once('=')
            .ok_or_else(|| ConfigError::schema(spec, "override must have the form key=value"))?;
        let (key, value) = (key.trim(), value.trim());
        let full = if key.contains('.') { key.to_string() } else { format!("run.{key}") };
        if !KNOWN_KEYS.contains(&full.as_str()) {
            return Err(ConfigError::schema(&full, "unknown key"));
        }
        self.entries.insert(full, (value.to_string(), 0));
        Ok(())
    }

    fn check_known(&self) -> Result<(), ConfigError> {
        for key in self.entries.keys() {
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(ConfigError::schema(key, "unknown key"));
            }
        }
        Ok(())
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    fn get<T: FromStr>(&self, key: &str, default: Option<T>) -> Result<T, ConfigError> {
        match self.raw(key) {
            Some(v) => v
                .parse()
                .map_err(|_| ConfigError::schema(key, format!("cannot parse value '{v}'"))),
            None => default.ok_or_else(|| ConfigError::schema(key, "required key is missing")),
        }
    }

    fn choice<T: Copy>(&self, key: &str, options: &[(&str, T)], default: Option<T>) -> Result<T, ConfigError> {
        match self.raw(key) {
            Some(v) => options.iter().find(|(name, _)| *name == v).map(|(_, t)| *t).ok_or_else(|| {
                let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
                ConfigError::schema(key, format!("'{v}' is not one of {}", names.join(", ")))
            }),
            None => default.ok_or_else(|| ConfigError::schema(key, "required key is missing")),
        }
    }
}

fn name_of<T: PartialEq + Copy>(options: &[(&'static str, T)], value: T) -> &'static str {
    options.iter().find(|(_, t)| *t == value).map(|(n, _)| *n).expect("every variant is named")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Quasistatic,
    Inertial,
    Verify,
    Convergence,
}

const MODES: &[(&str, Mode)] = &[
    ("quasistatic", Mode::Quasistatic),
    ("inertial", Mode::Inertial),
    ("verify", Mode::Verify),
    ("convergence", Mode::Convergence),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PermeabilityPreset {
    Constant,
    SinInTime,
    LayeredX3,
}

const PERMEABILITY_PRESETS: &[(&str, PermeabilityPreset)] = &[
    ("constant", PermeabilityPreset::Constant),
    ("sin-in-time", PermeabilityPreset::SinInTime),
    ("layered-x3", PermeabilityPreset::LayeredX3),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourcePreset {
    Zero,
    /// Smooth random low-mode plate load and fluid source.
    SmoothRandom,
    /// `f = amplitude sin(omega t)` on mode (1,1), no fluid source.
    HarmonicLoad,
}

const SOURCE_PRESETS: &[(&str, SourcePreset)] = &[
    ("zero", SourcePreset::Zero),
    ("smooth-random", SourcePreset::SmoothRandom),
    ("harmonic-load", SourcePreset::HarmonicLoad),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialPreset {
    Zero,
    SmoothRandom,
}

const INITIAL_PRESETS: &[(&str, InitialPreset)] = &[("zero", InitialPreset::Zero), ("smooth-random", InitialPreset::SmoothRandom)];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialKind {
    FluidContent,
    Pressure,
}

const INITIAL_KINDS: &[(&str, InitialKind)] = &[("fluid-content", InitialKind::FluidContent), ("pressure", InitialKind::Pressure)];

const CONVENTIONS: &[(&str, InertialPressureConvention)] = &[
    ("from-velocity", InertialPressureConvention::FromVelocity),
    ("from-displacement", InertialPressureConvention::FromDisplacement),
];

const SCHEMES: &[(&str, InertialScheme)] = &[
    ("backward-euler", InertialScheme::BackwardEuler),
    ("crank-nicolson", InertialScheme::CrankNicolson),
];

const SOURCE_PATHS: &[(&str, SourcePath)] = &[("direct", SourcePath::Direct), ("translated", SourcePath::Translated)];

#[derive(Debug, Clone, PartialEq)]
pub struct PermeabilityConfig {
    pub preset: PermeabilityPreset,
    /// `constant` value.
    pub value: f64,
    /// Base level for `sin-in-time` and `layered-x3`.
    pub k0: f64,
    pub amplitude: f64,
    pub omega: f64,
    pub contrast: f64,
    /// Layer transition width as a fraction of `h`.
    pub width: f64,
}

impl PermeabilityConfig {
    pub fn model(&self, h: f64) -> PermeabilityModel {
        match self.preset {
            PermeabilityPreset::Constant => PermeabilityModel::constant(self.value),
            PermeabilityPreset::SinInTime => PermeabilityModel::sin_in_time(self.k0, self.amplitude, self.omega),
            PermeabilityPreset::LayeredX3 => PermeabilityModel::layered_x3(self.k0, self.contrast, h, self.width),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceConfig {
    pub preset: SourcePreset,
    pub f_scale: f64,
    pub g_scale: f64,
    pub amplitude: f64,
    pub omega: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialConfig {
    pub preset: InitialPreset,
    pub kind: InitialKind,
    pub convention: InertialPressureConvention,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Snapshot every this many steps (the final state is always written);
    /// 0 writes only the initial and final states.
    pub snapshot_every: usize,
    /// Points per direction in the slice CSVs.
    pub slice_points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub seed: u64,
    pub params: PhysicalParams,
    pub grid: GridSpec,
    pub t_final: f64,
    pub tau: f64,
    pub scheme: InertialScheme,
    pub source_path: SourcePath,
    pub permeability: PermeabilityConfig,
    pub sources: SourceConfig,
    pub initial: InitialConfig,
    pub cg: CgSettings,
    /// `default`, `all`, or a comma-separated list of suite names.
    pub suites: String,
    pub energy_steps: usize,
    pub output: OutputConfig,
}

/// Parses a configuration document with no overrides.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    parse_config_with(text, &[])
}

/// Parses, applies `key=value` overrides, then validates.
pub fn parse_config_with(text: &str, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let mut doc = Document::parse(text)?;
    for o in overrides {
        doc.apply_override(o)?;
    }
    RunConfig::from_document(&doc)
}

impl RunConfig {
    pub fn from_document(doc: &Document) -> Result<Self, ConfigError> {
        doc.check_known()?;
        let mode = doc.choice("run.mode", MODES, None)?;
        let params = PhysicalParams::new(
            doc.get("params.D", None)?,
            doc.get("params.alpha", None)?,
            doc.get("params.c_p", None)?,
            doc.get("params.rho_p", Some(0.0))?,
            doc.get("params.h", None)?,
        );
        let max_iter: usize = doc.get("solver.cg_max_iter", Some(0))?;
        let cfg = Self {
            mode,
            seed: doc.get("run.seed", Some(0))?,
            params,
            grid: GridSpec::new(doc.get("grid.M", None)?, doc.get("grid.N", None)?, doc.get("grid.N3", None)?),
            t_final: doc.get("time.T", None)?,
            tau: doc.get("time.tau", None)?,
            scheme: doc.choice("time.scheme", SCHEMES, Some(InertialScheme::BackwardEuler))?,
            source_path: doc.choice("time.source_path", SOURCE_PATHS, Some(SourcePath::Direct))?,
            permeability: PermeabilityConfig {
                preset: doc.choice("permeability.preset", PERMEABILITY_PRESETS, Some(PermeabilityPreset::Constant))?,
                value: doc.get("permeability.value", Some(1.0))?,
                k0: doc.get("permeability.k0", Some(1.0))?,
                amplitude: doc.get("permeability.amplitude", Some(0.5))?,
                omega: doc.get("permeability.omega", Some(1.0))?,
                contrast: doc.get("permeability.contrast", Some(0.5))?,
                width: doc.get("permeability.width", Some(0.25))?,
            },
            sources: SourceConfig {
                preset: doc.choice("sources.preset", SOURCE_PRESETS, Some(SourcePreset::Zero))?,
                f_scale: doc.get("sources.f_scale", Some(1.0))?,
                g_scale: doc.get("sources.g_scale", Some(1.0))?,
                amplitude: doc.get("sources.amplitude", Some(1.0))?,
                omega: doc.get("sources.omega", Some(1.0))?,
            },
            initial: InitialConfig {
                preset: doc.choice("initial.preset", INITIAL_PRESETS, Some(InitialPreset::Zero))?,
                kind: doc.choice("initial.kind", INITIAL_KINDS, Some(InitialKind::FluidContent))?,
                convention: doc.choice("initial.convention", CONVENTIONS, Some(InertialPressureConvention::FromVelocity))?,
                scale: doc.get("initial.scale", Some(1.0))?,
            },
            cg: CgSettings {
                tol: doc.get("solver.cg_tol", Some(CgSettings::default().tol))?,
                max_iter: (max_iter > 0).then_some(max_iter),
            },
            suites: doc.get("verify.suites", Some("default".to_string()))?,
            energy_steps: doc.get("verify.energy_steps", Some(500))?,
            output: OutputConfig {
                dir: PathBuf::from(doc.get("output.dir", Some("poroplate-out".to_string()))?),
                snapshot_every: doc.get("output.snapshot_every", Some(10))?,
                slice_points: doc.get("output.slice_points", Some(33))?,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let p = &self.params;
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::schema(key, format!("must be positive, got {v}")))
            }
        };
        positive("params.D", p.d)?;
        positive("params.h", p.h)?;
        if !p.alpha.is_finite() || p.alpha == 0.0 {
            return Err(ConfigError::schema("params.alpha", format!("must be finite and nonzero, got {}", p.alpha)));
        }
        if !(p.rho_p >= 0.0 && p.rho_p.is_finite()) {
            return Err(ConfigError::schema("params.rho_p", format!("must be nonnegative, got {}", p.rho_p)));
        }
        if p.c_p == 0.0 {
            return Err(ConfigError::schema("params.c_p", "incompressible case unsupported (c_p = 0)"));
        }
        positive("params.c_p", p.c_p)?;
        if self.mode == Mode::Inertial {
            positive("params.rho_p", p.rho_p)?;
        }
        for (key, v) in [("grid.M", self.grid.m), ("grid.N", self.grid.n)] {
            if v == 0 {
                return Err(ConfigError::schema(key, "must be at least 1"));
            }
        }
        if self.grid.n3 < 3 {
            return Err(ConfigError::schema("grid.N3", format!("must be at least 3, got {}", self.grid.n3)));
        }
        positive("time.T", self.t_final)?;
        positive("time.tau", self.tau)?;
        let steps = (self.t_final / self.tau).round();
        if (steps * self.tau - self.t_final).abs() > 1e-9 * self.t_final {
            return Err(ConfigError::schema("time.tau", format!("must divide T = {}", self.t_final)));
        }
        positive("solver.cg_tol", self.cg.tol)?;
        if self.output.slice_points < 2 {
            return Err(ConfigError::schema("output.slice_points", "must be at least 2"));
        }
        if self.energy_steps == 0 {
            return Err(ConfigError::schema("verify.energy_steps", "must be at least 1"));
        }
        self.suite_names()?;
        Ok(())
    }

    /// Suite names selected by `verify.suites`.
    pub fn suite_names(&self) -> Result<Vec<&'static str>, ConfigError> {
        match self.suites.as_str() {
            "default" => Ok(crate::verify::DEFAULT_SUITES.to_vec()),
            "all" => Ok(crate::verify::ALL_SUITES.to_vec()),
            list => list
                .split(',')
                .map(|name| {
                    let name = name.trim();
                    crate::verify::ALL_SUITES
                        .iter()
                        .find(|s| **s == name)
                        .copied()
                        .ok_or_else(|| ConfigError::schema("verify.suites", format!("unknown suite '{name}'")))
                })
                .collect(),
        }
    }

    pub fn permeability_model(&self) -> PermeabilityModel {
        self.permeability.model(self.params.h)
    }
}

impl fmt::Display for RunConfig {
    /// Effective configuration with every key; parsing it reproduces `self`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = &self.params;
        writeln!(f, "# effective configuration")?;
        writeln!(f, "[run]")?;
        writeln!(f, "mode = {}", name_of(MODES, self.mode))?;
        writeln!(f, "seed = {}", self.seed)?;
        writeln!(f, "\n[params]")?;
        writeln!(f, "D = {:?}\nalpha = {:?}\nc_p = {:?}\nrho_p = {:?}\nh = {:?}", p.d, p.alpha, p.c_p, p.rho_p, p.h)?;
        writeln!(f, "\n[grid]")?;
        writeln!(f, "M = {}\nN = {}\nN3 = {}", self.grid.m, self.grid.n, self.grid.n3)?;
        writeln!(f, "\n[time]")?;
        writeln!(f, "T = {:?}\ntau = {:?}", self.t_final, self.tau)?;
        writeln!(f, "scheme = {}", name_of(SCHEMES, self.scheme))?;
        writeln!(f, "source_path = {}", name_of(SOURCE_PATHS, self.source_path))?;
        let k = &self.permeability;
        writeln!(f, "\n[permeability]")?;
        writeln!(f, "preset = {}", name_of(PERMEABILITY_PRESETS, k.preset))?;
        writeln!(
            f,
            "value = {:?}\nk0 = {:?}\namplitude = {:?}\nomega = {:?}\ncontrast = {:?}\nwidth = {:?}",
            k.value, k.k0, k.amplitude, k.omega, k.contrast, k.width
        )?;
        let s = &self.sources;
        writeln!(f, "\n[sources]")?;
        writeln!(f, "preset = {}", name_of(SOURCE_PRESETS, s.preset))?;
        writeln!(f, "f_scale = {:?}\ng_scale = {:?}\namplitude = {:?}\nomega = {:?}", s.f_scale, s.g_scale, s.amplitude, s.omega)?;
        let i = &self.initial;
        writeln!(f, "\n[initial]")?;
        writeln!(f, "preset = {}", name_of(INITIAL_PRESETS, i.preset))?;
        writeln!(f, "kind = {}", name_of(INITIAL_KINDS, i.kind))?;
        writeln!(f, "convention = {}", name_of(CONVENTIONS, i.convention))?;
        writeln!(f, "scale = {:?}", i.scale)?;
        writeln!(f, "\n[solver]")?;
        writeln!(f, "cg_tol = {:?}\ncg_max_iter = {}", self.cg.tol, self.cg.max_iter.unwrap_or(0))?;
        writeln!(f, "\n[verify]")?;
        writeln!(f, "suites = {}\nenergy_steps = {}", self.suites, self.energy_steps)?;
        writeln!(f, "\n[output]")?;
        writeln!(f, "dir = {}", self.output.dir.display())?;
        writeln!(f, "snapshot_every = {}\nslice_points = {}", self.output.snapshot_every, self.output.slice_points)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "mode = quasistatic\n[params]\nD = 1.0\nalpha = 1.0\nc_p = 1.0\nh = 0.5\n[grid]\nM = 2\nN = 2\nN3 = 9\n[time]\nT = 1.0\ntau = 0.1\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.mode, Mode::Quasistatic);
        assert_eq!(cfg.permeability.preset, PermeabilityPreset::Constant);
        assert_eq!(cfg.permeability.value, 1.0);
        assert_eq!(cfg.sources.preset, SourcePreset::Zero);
        assert_eq!(cfg.params.rho_p, 0.0);
    }

    #[test]
    fn incompressible_rejected() {
        let text = MINIMAL.replace("c_p = 1.0", "c_p = 0");
        match parse_config(&text) {
            Err(ConfigError::Schema { key, message }) => {
                assert_eq!(key, "params.c_p");
                assert!(message.contains("incompressible case unsupported"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let text = MINIMAL.replace("D = 1.0", "D 1.0");
        assert_eq!(parse_config(&text).unwrap_err(), ConfigError::Parse { line: 3, message: "expected 'key = value', got 'D 1.0'".into() });
    }

    #[test]
    fn unknown_key_named() {
        let text = format!("{MINIMAL}bogus = 3\n");
        assert!(matches!(parse_config(&text), Err(ConfigError::Schema { key, .. }) if key == "time.bogus"));
        assert!(matches!(parse_config_with(MINIMAL, &["grid.P=2".into()]), Err(ConfigError::Schema { key, .. }) if key == "grid.P"));
    }

    #[test]
    fn echo_round_trips() {
        let cfg = parse_config_with(MINIMAL, &["permeability.preset=sin-in-time".into(), "params.D=0.3".into(), "solver.cg_max_iter=40".into()]).unwrap();
        assert_eq!(parse_config(&cfg.to_string()).unwrap(), cfg);
    }

    #[test]
    fn overrides_apply_before_validation() {
        let text = MINIMAL.replace("c_p = 1.0", "c_p = 0");
        assert!(parse_config_with(&text, &["params.c_p=2".into()]).is_ok());
        let cfg = parse_config_with(MINIMAL, &["mode=verify".into()]).unwrap();
        assert_eq!(cfg.mode, Mode::Verify);
    }

    #[test]
    fn comments_and_duplicates() {
        let text = format!("# header\n{}", MINIMAL.replace("h = 0.5", "h = 0.5 # half thickness"));
        assert_eq!(parse_config(&text).unwrap().params.h, 0.5);
        let dup = format!("{MINIMAL}tau = 0.2\n");
        assert!(matches!(parse_config(&dup), Err(ConfigError::Parse { line: 14, .. })));
    }
}
