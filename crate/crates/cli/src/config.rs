//! Line-oriented `key = value` experiment configuration.
//!
//! Blank lines and `#` comments are ignored. Vectors are written as three
//! comma-separated numbers, optionally in brackets. Every key not listed for
//! the chosen experiment is rejected.

use std::collections::BTreeMap;
use std::str::FromStr;

use geomech::geom::Vec3;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("missing key `{0}`")]
    MissingKey(String),
    #[error("bad value for `{key}` on line {line}: {reason}")]
    BadValue { key: String, line: usize, reason: String },
}

impl ConfigError {
    pub fn kind(&self) -> &'static str {
        match self {
            ConfigError::Parse { .. } => "parse",
            ConfigError::MissingKey(_) => "missing-key",
            ConfigError::BadValue { .. } => "bad-value",
        }
    }
}

type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    Vi,
    Rk45,
    Rk45Quat,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSetup {
    MassSpring { m: f64, kappa: f64, q0: f64, qdot0: f64 },
    Planar { m: f64, l: f64, g: f64, theta0: f64, omega0: f64 },
    Spherical { m: f64, l: f64, g: f64, q0: Vec3, omega0: Vec3 },
    Rigid(RigidSetup),
}

/// Symmetric dumbbell of two spheres in a central field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidSetup {
    pub mu: f64,
    /// Mass of each sphere.
    pub mass: f64,
    pub length: f64,
    pub sphere_radius: f64,
    /// Initial circular-orbit radius.
    pub radius: f64,
    /// Body angular velocity. Orbit transfers start with the orbital rate instead.
    pub spin: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateSetup {
    pub model: ModelSetup,
    pub integrator: Integrator,
    pub h: f64,
    pub steps: usize,
    pub rtol: f64,
    pub atol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DmocSetup {
    pub m: f64,
    pub l: f64,
    pub g: f64,
    pub h: f64,
    pub steps: usize,
    pub q0: Vec3,
    pub omega0: Vec3,
    pub q_final: Vec3,
    pub omega_final: Vec3,
    pub max_outer: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShootSetup {
    pub body: RigidSetup,
    /// Target circular-orbit radius.
    pub target_radius: f64,
    pub h: f64,
    pub steps: usize,
    pub w_f: f64,
    pub w_m: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClagSetup {
    pub m: f64,
    pub cart: f64,
    pub l: f64,
    pub g: f64,
    pub h: f64,
    pub steps: usize,
    /// Gain as a multiple of the computed critical value.
    pub kappa_factor: f64,
    pub theta0: f64,
    pub s0: f64,
    pub thetadot0: f64,
    pub sdot0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Setup {
    Simulate(SimulateSetup),
    Dmoc(DmocSetup),
    Shoot(ShootSetup),
    Clag(ClagSetup),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub setup: Setup,
    pub seed: u64,
    /// CSV file name, relative to the output directory.
    pub output: String,
}

struct Entry {
    value: String,
    line: usize,
    used: bool,
}

struct Table {
    entries: BTreeMap<String, Entry>,
}

impl Table {
    fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((k, v)) = content.split_once('=') else {
                return Err(ConfigError::Parse {
                    line,
                    message: format!("expected `key = value`, found `{content}`"),
                });
            };
            let key = k.trim();
            if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(ConfigError::Parse {
                    line,
                    message: format!("invalid key `{key}`"),
                });
            }
            let entry = Entry {
                value: v.trim().to_string(),
                line,
                used: false,
            };
            if entries.insert(key.to_string(), entry).is_some() {
                return Err(ConfigError::Parse {
                    line,
                    message: format!("duplicate key `{key}`"),
                });
            }
        }
        Ok(Table { entries })
    }

    fn raw(&mut self, key: &str) -> Option<(String, usize)> {
        self.entries.get_mut(key).map(|e| {
            e.used = true;
            (e.value.clone(), e.line)
        })
    }

    fn bad(key: &str, line: usize, reason: impl Into<String>) -> ConfigError {
        ConfigError::BadValue {
            key: key.to_string(),
            line,
            reason: reason.into(),
        }
    }

    fn opt<T: FromStr>(&mut self, key: &str) -> Result<Option<(T, usize)>> {
        match self.raw(key) {
            None => Ok(None),
            Some((v, line)) => v
                .parse::<T>()
                .map(|x| Some((x, line)))
                .map_err(|_| Self::bad(key, line, format!("cannot parse `{v}`"))),
        }
    }

    fn f64_or(&mut self, key: &str, default: f64, check: fn(f64) -> bool, what: &str) -> Result<f64> {
        match self.opt::<f64>(key)? {
            None => Ok(default),
            Some((x, line)) if x.is_finite() && check(x) => {
                let _ = line;
                Ok(x)
            }
            Some((x, line)) => Err(Self::bad(key, line, format!("{x} is not {what}"))),
        }
    }

    fn f64_req(&mut self, key: &str, check: fn(f64) -> bool, what: &str) -> Result<f64> {
        if !self.entries.contains_key(key) {
            return Err(ConfigError::MissingKey(key.to_string()));
        }
        self.f64_or(key, f64::NAN, check, what)
    }

    fn usize_or(&mut self, key: &str, default: usize) -> Result<usize> {
        Ok(self.opt::<usize>(key)?.map_or(default, |(x, _)| x))
    }

    fn vec3_or(&mut self, key: &str, default: Vec3) -> Result<Vec3> {
        let Some((v, line)) = self.raw(key) else {
            return Ok(default);
        };
        let inner = v.trim().trim_start_matches('[').trim_end_matches(']');
        let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Self::bad(key, line, format!("expected three components, found `{v}`")));
        }
        let mut out = Vec3::zeros();
        for (i, p) in parts.iter().enumerate() {
            out[i] = p
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Self::bad(key, line, format!("cannot parse component `{p}`")))?;
        }
        Ok(out)
    }

    fn string_req(&mut self, key: &str) -> Result<(String, usize)> {
        self.raw(key).ok_or_else(|| ConfigError::MissingKey(key.to_string()))
    }

    /// Step count from `steps`, or from `horizon / h` rounded to nearest.
    fn steps(&mut self, h: f64) -> Result<usize> {
        let steps = self.opt::<usize>("steps")?;
        let horizon = self.opt::<f64>("horizon")?;
        match (steps, horizon) {
            (Some(_), Some((_, line))) => Err(Self::bad("horizon", line, "give either `steps` or `horizon`, not both")),
            (Some((0, line)), None) => Err(Self::bad("steps", line, "must be positive")),
            (Some((n, _)), None) => Ok(n),
            (None, Some((t, line))) if t.is_finite() && t > 0.0 => {
                let n = (t / h).round();
                if n < 1.0 {
                    return Err(Self::bad("horizon", line, "shorter than one step"));
                }
                Ok(n as usize)
            }
            (None, Some((t, line))) => Err(Self::bad("horizon", line, format!("{t} is not positive"))),
            (None, None) => Err(ConfigError::MissingKey("horizon".into())),
        }
    }

    fn finish(self) -> Result<()> {
        if let Some((k, e)) = self.entries.iter().filter(|(_, e)| !e.used).min_by_key(|(_, e)| e.line) {
            return Err(ConfigError::Parse {
                line: e.line,
                message: format!("unknown key `{k}`"),
            });
        }
        Ok(())
    }
}

fn positive(x: f64) -> bool {
    x > 0.0
}

fn nonnegative(x: f64) -> bool {
    x >= 0.0
}

fn any(_: f64) -> bool {
    true
}

fn rigid_body(t: &mut Table, spin: bool) -> Result<RigidSetup> {
    Ok(RigidSetup {
        mu: t.f64_or("mu", 1.0, nonnegative, "nonnegative")?,
        mass: t.f64_or("mass", 1.0, positive, "positive")?,
        length: t.f64_or("length", 1.0, positive, "positive")?,
        sphere_radius: t.f64_or("sphere_radius", 0.1, nonnegative, "nonnegative")?,
        radius: t.f64_or("radius", 3.0, positive, "positive")?,
        spin: if spin { t.vec3_or("spin", Vec3::zeros())? } else { Vec3::zeros() },
    })
}

fn simulate(t: &mut Table) -> Result<(SimulateSetup, String)> {
    let (model_name, line) = t.string_req("model")?;
    let (integ_name, iline) = t.raw("integrator").unwrap_or(("vi".into(), 0));
    let integrator = match integ_name.as_str() {
        "vi" => Integrator::Vi,
        "rk45" => Integrator::Rk45,
        "rk45-quat" => Integrator::Rk45Quat,
        other => return Err(Table::bad("integrator", iline, format!("unknown integrator `{other}`"))),
    };
    let model = match model_name.as_str() {
        "mass_spring" => ModelSetup::MassSpring {
            m: t.f64_or("m", 1.0, positive, "positive")?,
            kappa: t.f64_or("kappa", 1.0, nonnegative, "nonnegative")?,
            q0: t.f64_or("q0", 2f64.sqrt(), any, "finite")?,
            qdot0: t.f64_or("qdot0", 0.0, any, "finite")?,
        },
        "planar" => ModelSetup::Planar {
            m: t.f64_or("m", 1.0, positive, "positive")?,
            l: t.f64_or("l", 9.81, positive, "positive")?,
            g: t.f64_or("g", 9.81, nonnegative, "nonnegative")?,
            theta0: t.f64_or("theta0", std::f64::consts::FRAC_PI_2, any, "finite")?,
            omega0: t.f64_or("omega0", 0.0, any, "finite")?,
        },
        "spherical" => ModelSetup::Spherical {
            m: t.f64_or("m", 1.0, positive, "positive")?,
            l: t.f64_or("l", 9.81, positive, "positive")?,
            g: t.f64_or("g", 9.81, nonnegative, "nonnegative")?,
            q0: t.vec3_or("q0", Vec3::z())?,
            omega0: t.vec3_or("omega0", Vec3::zeros())?,
        },
        "rigid" => ModelSetup::Rigid(rigid_body(t, true)?),
        other => return Err(Table::bad("model", line, format!("unknown model `{other}`"))),
    };
    if integrator == Integrator::Rk45Quat && !matches!(model, ModelSetup::Rigid(_)) {
        return Err(Table::bad("integrator", iline, "rk45-quat needs the rigid model"));
    }
    let h = t.f64_req("h", positive, "positive")?;
    let steps = t.steps(h)?;
    let setup = SimulateSetup {
        model,
        integrator,
        h,
        steps,
        rtol: t.f64_or("rtol", 1e-3, positive, "positive")?,
        atol: t.f64_or("atol", 1e-6, positive, "positive")?,
    };
    let default_out = format!("simulate_{model_name}_{integ_name}.csv");
    Ok((setup, default_out))
}

fn dmoc(t: &mut Table) -> Result<DmocSetup> {
    let h = t.f64_req("h", positive, "positive")?;
    Ok(DmocSetup {
        m: t.f64_or("m", 1.0, positive, "positive")?,
        l: t.f64_or("l", 9.81, positive, "positive")?,
        g: t.f64_or("g", 9.81, nonnegative, "nonnegative")?,
        h,
        steps: t.steps(h)?,
        q0: t.vec3_or("q0", Vec3::z())?,
        omega0: t.vec3_or("omega0", Vec3::zeros())?,
        q_final: t.vec3_or("q_final", -Vec3::z())?,
        omega_final: t.vec3_or("omega_final", Vec3::zeros())?,
        max_outer: t.usize_or("max_outer", 40)?,
    })
}

fn shoot(t: &mut Table) -> Result<ShootSetup> {
    let body = rigid_body(t, false)?;
    let h = t.f64_req("h", positive, "positive")?;
    Ok(ShootSetup {
        body,
        target_radius: t.f64_req("target_radius", positive, "positive")?,
        h,
        steps: t.steps(h)?,
        w_f: t.f64_or("w_f", 1.0, positive, "positive")?,
        w_m: t.f64_or("w_m", 1.0, positive, "positive")?,
        max_iter: t.usize_or("max_iter", 100)?,
    })
}

fn clag(t: &mut Table) -> Result<ClagSetup> {
    let h = t.f64_req("h", positive, "positive")?;
    Ok(ClagSetup {
        m: t.f64_or("m", 0.14, positive, "positive")?,
        cart: t.f64_or("cart_mass", 0.44, positive, "positive")?,
        l: t.f64_or("l", 0.215, positive, "positive")?,
        g: t.f64_or("g", 9.81, nonnegative, "nonnegative")?,
        h,
        steps: t.steps(h)?,
        kappa_factor: t.f64_or("kappa_factor", 2.0, positive, "positive")?,
        theta0: t.f64_or("theta0", 0.1, any, "finite")?,
        s0: t.f64_or("s0", 0.0, any, "finite")?,
        thetadot0: t.f64_or("thetadot0", 0.0, any, "finite")?,
        sdot0: t.f64_or("sdot0", 0.0, any, "finite")?,
    })
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut t = Table::parse(text)?;
    let (kind, line) = t.string_req("experiment")?;
    let seed = t.usize_or("seed", 0)? as u64;
    let (setup, default_out) = match kind.as_str() {
        "simulate" => {
            let (s, out) = simulate(&mut t)?;
            (Setup::Simulate(s), out)
        }
        "dmoc" => (Setup::Dmoc(dmoc(&mut t)?), "dmoc.csv".to_string()),
        "shoot" => (Setup::Shoot(shoot(&mut t)?), "shoot.csv".to_string()),
        "clag" => (Setup::Clag(clag(&mut t)?), "clag.csv".to_string()),
        other => return Err(Table::bad("experiment", line, format!("unknown experiment `{other}`"))),
    };
    let output = t.raw("output").map_or(default_out, |(v, _)| v);
    t.finish()?;
    Ok(ExperimentConfig { setup, seed, output })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_mass_spring() {
        let cfg = parse_config("experiment = simulate\nmodel = mass_spring\nh = 0.035\nhorizon = 1\n").unwrap();
        let Setup::Simulate(s) = &cfg.setup else { panic!() };
        assert_eq!(s.integrator, Integrator::Vi);
        assert_eq!(s.steps, 29);
        assert_eq!(
            s.model,
            ModelSetup::MassSpring {
                m: 1.0,
                kappa: 1.0,
                q0: 2f64.sqrt(),
                qdot0: 0.0
            }
        );
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.output, "simulate_mass_spring_vi.csv");
    }

    #[test]
    fn negative_step_is_bad_value() {
        let err = parse_config("experiment = simulate\nmodel = planar\nh = -0.1\nsteps = 3").unwrap_err();
        assert!(matches!(err, ConfigError::BadValue { ref key, line: 3, .. } if key == "h"), "{err:?}");
    }

    #[test]
    fn unknown_key_reports_line() {
        let err = parse_config("experiment = clag\nh = 0.05\nsteps = 10\n# note\ncolour = red\n").unwrap_err();
        assert_eq!(err, ConfigError::Parse { line: 5, message: "unknown key `colour`".into() });
    }

    #[test]
    fn missing_keys() {
        assert_eq!(parse_config("").unwrap_err(), ConfigError::MissingKey("experiment".into()));
        let err = parse_config("experiment = dmoc\nsteps = 30").unwrap_err();
        assert_eq!(err, ConfigError::MissingKey("h".into()));
        let err = parse_config("experiment = dmoc\nh = 0.1").unwrap_err();
        assert_eq!(err, ConfigError::MissingKey("horizon".into()));
    }

    #[test]
    fn malformed_lines() {
        let err = parse_config("experiment = simulate\nthis line has no equals\n").unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 2, .. }));
        let err = parse_config("experiment = simulate\nexperiment = dmoc\n").unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 2, .. }));
    }

    #[test]
    fn vectors_and_comments() {
        let cfg = parse_config(
            "experiment = simulate # trailing\nmodel = spherical\nq0 = [0.6, 0, 0.8]\nomega0 = 1,2,3\nh = 0.05\nsteps = 4\n",
        )
        .unwrap();
        let Setup::Simulate(SimulateSetup {
            model: ModelSetup::Spherical { q0, omega0, .. },
            ..
        }) = cfg.setup
        else {
            panic!()
        };
        assert_eq!(q0, Vec3::new(0.6, 0.0, 0.8));
        assert_eq!(omega0, Vec3::new(1.0, 2.0, 3.0));
        let err = parse_config("experiment = simulate\nmodel = spherical\nq0 = 1, 2\nh = 1\nsteps = 1").unwrap_err();
        assert!(matches!(err, ConfigError::BadValue { line: 3, .. }));
    }

    #[test]
    fn quaternion_integrator_needs_rigid_model() {
        let err = parse_config("experiment = simulate\nmodel = planar\nintegrator = rk45-quat\nh = 0.1\nsteps = 2").unwrap_err();
        assert!(matches!(err, ConfigError::BadValue { line: 3, .. }));
    }

    #[test]
    fn steps_and_horizon_are_exclusive() {
        let err = parse_config("experiment = clag\nh = 0.05\nsteps = 10\nhorizon = 1").unwrap_err();
        assert!(matches!(err, ConfigError::BadValue { line: 4, .. }));
    }

    fn shipped() -> std::path::PathBuf {
        std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
    }

    #[test]
    fn shipped_spherical_config_matches_the_reference_setup() {
        let text = std::fs::read_to_string(shipped().join("spherical.cfg")).unwrap();
        let cfg = parse_config(&text).unwrap();
        let Setup::Simulate(s) = cfg.setup else {
            panic!()
        };
        let want = ModelSetup::Spherical {
            m: 1.0,
            l: 9.81,
            g: 9.81,
            q0: Vec3::new(3f64.sqrt() / 2.0, 0.0, 0.5),
            omega0: Vec3::new(3f64.sqrt(), 0.0, 3.0) * 0.1,
        };
        assert_eq!(s.model, want);
        assert_eq!((s.h, s.steps), (0.05, 4000));
    }

    #[test]
    fn every_shipped_config_parses() {
        for entry in std::fs::read_dir(shipped()).unwrap() {
            let path = entry.unwrap().path();
            let text = std::fs::read_to_string(&path).unwrap();
            parse_config(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        }
    }
}
