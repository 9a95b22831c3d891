//! Dispatch from a parsed configuration to the simulators and optimizers.

use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use geomech::baselines::{drift_stats, rk45_integrate, systems, OdeProblem, Rk45Options};
use geomech::clag::{self, CartPendParams, ShapingGains};
use geomech::geom::{Mat3, Rot3, Vec3};
use geomech::models::rigid::circular_orbit_state;
use geomech::models::*;
use geomech::optctrl::direct::{solve_swingup, DmocOptions, SwingUpProblem};
use geomech::optctrl::indirect::{shoot, ShootOptions, TransferProblem, Vec12};
use nalgebra::DVector;
use thiserror::Error;

use crate::config::*;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{context}: {source}")]
    Model {
        context: &'static str,
        #[source]
        source: geomech::Error,
    },
    #[error("cannot write {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl RunError {
    pub fn kind(&self) -> &'static str {
        match self {
            RunError::Model { .. } => "model",
            RunError::Io { .. } => "io",
        }
    }
}

type Result<T> = std::result::Result<T, RunError>;

trait Context<T> {
    fn context(self, context: &'static str) -> Result<T>;
}

impl<T> Context<T> for geomech::Result<T> {
    fn context(self, context: &'static str) -> Result<T> {
        self.map_err(|source| RunError::Model { context, source })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Int(usize),
    Text(String),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Num(x) => write!(f, "{x:.16e}"),
            Value::Int(n) => write!(f, "{n}"),
            Value::Text(s) => f.write_str(s),
        }
    }
}

/// Ordered `key = value` results of one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSummary {
    pub entries: Vec<(String, Value)>,
}

impl RunSummary {
    fn num(&mut self, key: &str, x: f64) {
        self.entries.push((key.into(), Value::Num(x)));
    }

    fn int(&mut self, key: &str, n: usize) {
        self.entries.push((key.into(), Value::Int(n)));
    }

    fn text(&mut self, key: &str, s: impl Into<String>) {
        self.entries.push((key.into(), Value::Text(s.into())));
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    /// Numeric entry; integers are widened.
    pub fn number(&self, key: &str) -> Option<f64> {
        match self.get(key)? {
            Value::Num(x) => Some(*x),
            Value::Int(n) => Some(*n as f64),
            Value::Text(_) => None,
        }
    }
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

struct Csv {
    path: PathBuf,
    out: BufWriter<File>,
}

impl Csv {
    fn create(path: PathBuf, header: &[&str]) -> Result<Self> {
        let file = File::create(&path).map_err(|source| RunError::Io {
            path: path.clone(),
            source,
        })?;
        let mut csv = Csv {
            path,
            out: BufWriter::new(file),
        };
        let line = header.join(",");
        csv.line(&line)?;
        Ok(csv)
    }

    fn line(&mut self, s: &str) -> Result<()> {
        writeln!(self.out, "{s}").map_err(|source| RunError::Io {
            path: self.path.clone(),
            source,
        })
    }

    /// Index followed by values; `None` leaves the field empty.
    fn row(&mut self, k: usize, values: &[Option<f64>]) -> Result<()> {
        let mut s = k.to_string();
        for v in values {
            s.push(',');
            if let Some(x) = v {
                s.push_str(&format!("{x:.16e}"));
            }
        }
        self.line(&s)
    }

    fn finish(mut self) -> Result<PathBuf> {
        self.out.flush().map_err(|source| RunError::Io {
            path: self.path.clone(),
            source,
        })?;
        Ok(self.path)
    }
}

fn some(xs: &[f64]) -> Vec<Option<f64>> {
    xs.iter().copied().map(Some).collect()
}

fn vec3(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

fn rot_rows(r: &Rot3) -> [f64; 9] {
    let m = r.matrix();
    std::array::from_fn(|i| m[(i / 3, i % 3)])
}

fn amplitude(e: &[f64]) -> f64 {
    let (lo, hi) = e.iter().fold((f64::MAX, f64::MIN), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    hi - lo
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn max(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(0.0, f64::max)
}

/// Runs `cfg`, writing its CSV into `out_dir`.
pub fn run(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunSummary> {
    let start = Instant::now();
    let path = out_dir.join(&cfg.output);
    let mut summary = RunSummary::default();
    match &cfg.setup {
        Setup::Simulate(s) => run_simulate(s, path, &mut summary)?,
        Setup::Dmoc(s) => run_dmoc(s, cfg.seed, path, &mut summary)?,
        Setup::Shoot(s) => run_shoot(s, path, &mut summary)?,
        Setup::Clag(s) => run_clag(s, path, &mut summary)?,
    }
    summary.num("wall_time_s", start.elapsed().as_secs_f64());
    Ok(summary)
}

/// Samples of an adaptive run at `t = k h`.
fn rk_samples<F>(s: &SimulateSetup, f: F, y0: DVector<f64>, summary: &mut RunSummary) -> Result<Vec<DVector<f64>>>
where
    F: Fn(f64, &DVector<f64>) -> DVector<f64>,
{
    let ts: Vec<f64> = (0..=s.steps).map(|k| k as f64 * s.h).collect();
    let prob = OdeProblem {
        f,
        y0,
        t0: 0.0,
        tf: ts[s.steps],
    };
    let opts = Rk45Options {
        rtol: s.rtol,
        atol: s.atol,
        ..Rk45Options::default()
    };
    let tr = rk45_integrate(&prob, &ts, &opts).context("rk45 integration")?;
    summary.int("rk_accepted", tr.accepted);
    summary.int("rk_rejected", tr.rejected);
    summary.int("rk_evaluations", tr.evaluations);
    Ok(tr.y)
}

struct Series {
    energy: Vec<f64>,
    /// Name and per-sample values of the structure diagnostic.
    structure: Option<(&'static str, Vec<f64>)>,
}

fn run_simulate(s: &SimulateSetup, path: PathBuf, summary: &mut RunSummary) -> Result<()> {
    let integ = match s.integrator {
        Integrator::Vi => "vi",
        Integrator::Rk45 => "rk45",
        Integrator::Rk45Quat => "rk45-quat",
    };
    let model = match s.model {
        ModelSetup::MassSpring { .. } => "mass_spring",
        ModelSetup::Planar { .. } => "planar",
        ModelSetup::Spherical { .. } => "spherical",
        ModelSetup::Rigid(_) => "rigid",
    };
    summary.text("experiment", "simulate");
    summary.text("model", model);
    summary.text("integrator", integ);
    summary.int("steps", s.steps);
    summary.num("h", s.h);
    let vi = s.integrator == Integrator::Vi;
    let t = |k: usize| k as f64 * s.h;

    let series = match &s.model {
        &ModelSetup::MassSpring { m, kappa, q0, qdot0 } => {
            let p = MassSpringParams { m, kappa };
            let s0 = MassSpringState { q: q0, qdot: qdot0 };
            let states = if vi {
                mass_spring::rollout(&p, s0, s.h, s.steps)
            } else {
                let y = rk_samples(s, systems::mass_spring_rhs(p), systems::mass_spring_pack(&s0), summary)?;
                y.iter().map(systems::mass_spring_unpack).collect()
            };
            let mut csv = Csv::create(path.clone(), &["k", "t", "q", "qdot", "energy"])?;
            let mut energy = Vec::with_capacity(states.len());
            for (k, st) in states.iter().enumerate() {
                let e = mass_spring::energy(&p, st);
                energy.push(e);
                csv.row(k, &some(&[t(k), st.q, st.qdot, e]))?;
            }
            csv.finish()?;
            Series { energy, structure: None }
        }
        &ModelSetup::Planar { m, l, g, theta0, omega0 } => {
            let p = PlanarParams { m, l, g };
            let s0 = PlanarPendState::from_angle(theta0, omega0);
            let states = if vi {
                planar::rollout(&p, s0, s.h, s.steps).context("planar pendulum rollout")?
            } else {
                let y = rk_samples(s, systems::planar_rhs(p), systems::planar_pack(&s0), summary)?;
                y.iter().map(systems::planar_unpack).collect()
            };
            let mut csv = Csv::create(path.clone(), &["k", "t", "theta", "omega", "energy", "ortho_error"])?;
            let mut energy = Vec::with_capacity(states.len());
            let mut ortho = Vec::with_capacity(states.len());
            for (k, st) in states.iter().enumerate() {
                let e = planar::energy(&p, st);
                energy.push(e);
                ortho.push(st.r.ortho_error());
                csv.row(k, &some(&[t(k), st.r.angle(), st.omega, e, st.r.ortho_error()]))?;
            }
            csv.finish()?;
            Series {
                energy,
                structure: Some(("ortho_error", ortho)),
            }
        }
        &ModelSetup::Spherical { m, l, g, q0, omega0 } => {
            let p = SphericalParams { m, l, g };
            let s0 = SphericalPendState::projected(q0, omega0).context("spherical pendulum initial state")?;
            let states = if vi {
                spherical::rollout(&p, s0, s.h, s.steps).context("spherical pendulum rollout")?
            } else {
                let y = rk_samples(s, systems::spherical_rhs(p), systems::spherical_pack(&s0), summary)?;
                y.iter().map(systems::spherical_unpack).collect()
            };
            let header = ["k", "t", "q1", "q2", "q3", "w1", "w2", "w3", "energy", "unit_length_error"];
            let mut csv = Csv::create(path.clone(), &header)?;
            let mut energy = Vec::with_capacity(states.len());
            let mut unit = Vec::with_capacity(states.len());
            let mut axial = 0.0f64;
            for (k, st) in states.iter().enumerate() {
                let e = spherical::energy(&p, st);
                let q = st.q.vector();
                energy.push(e);
                unit.push(st.q.unit_length_error());
                axial = axial.max((st.omega.z - s0.omega.z).abs());
                let mut row = vec![t(k)];
                row.extend(vec3(q));
                row.extend(vec3(&st.omega));
                row.extend([e, st.q.unit_length_error()]);
                csv.row(k, &some(&row))?;
            }
            csv.finish()?;
            let stats = drift_stats(&energy);
            summary.num("mean_abs_energy_dev_per_ml2", stats.mean_abs_dev / (m * l * l));
            summary.num("max_axial_rate_drift", axial);
            Series {
                energy,
                structure: Some(("unit_length_error", unit)),
            }
        }
        ModelSetup::Rigid(b) => {
            let pot = DumbbellPotential::symmetric(b.mu, b.mass, b.length);
            let p = RigidParams::new(pot.total_mass(), pot.inertia(b.sphere_radius)).context("dumbbell parameters")?;
            let s0 = circular_orbit_state(&pot, b.radius, b.spin);
            let states: Vec<RigidState> = match s.integrator {
                Integrator::Vi => rigid::rollout(&p, &pot, s0, s.h, s.steps).context("rigid body rollout")?,
                Integrator::Rk45 => rk_samples(s, systems::rigid_matrix_rhs(p, pot), systems::rigid_matrix_pack(&s0), summary)?
                    .iter()
                    .map(systems::rigid_matrix_unpack)
                    .collect(),
                Integrator::Rk45Quat => rk_samples(s, systems::rigid_quat_rhs(p, pot), systems::rigid_quat_pack(&s0), summary)?
                    .iter()
                    .map(systems::rigid_quat_unpack)
                    .collect(),
            };
            let mut header = vec!["k", "t", "x1", "x2", "x3", "v1", "v2", "v3", "w1", "w2", "w3"];
            header.extend(["r11", "r12", "r13", "r21", "r22", "r23", "r31", "r32", "r33"]);
            header.extend(["energy", "ortho_error"]);
            let mut csv = Csv::create(path.clone(), &header)?;
            let mut energy = Vec::with_capacity(states.len());
            let mut ortho = Vec::with_capacity(states.len());
            for (k, st) in states.iter().enumerate() {
                let e = rigid::energy(&p, &pot, st).context("rigid body energy")?;
                energy.push(e);
                ortho.push(st.r.ortho_error());
                let mut row = vec![t(k)];
                row.extend(vec3(&st.x));
                row.extend(vec3(&st.v));
                row.extend(vec3(&st.omega));
                row.extend(rot_rows(&st.r));
                row.extend([e, st.r.ortho_error()]);
                csv.row(k, &some(&row))?;
            }
            csv.finish()?;
            Series {
                energy,
                structure: Some(("ortho_error", ortho)),
            }
        }
    };

    let stats = drift_stats(&series.energy);
    let amp = amplitude(&series.energy);
    summary.num("mean_abs_energy_dev", stats.mean_abs_dev);
    summary.num("energy_slope", stats.slope);
    summary.num("energy_amplitude", amp);
    if amp > 0.0 {
        summary.num("energy_slope_over_amplitude", stats.slope / amp);
    }
    if let Some((name, errs)) = &series.structure {
        summary.num(&format!("mean_{name}"), mean(errs));
        summary.num(&format!("max_{name}"), max(errs));
    }
    summary.text("csv", path.display().to_string());
    Ok(())
}

fn run_dmoc(s: &DmocSetup, seed: u64, path: PathBuf, summary: &mut RunSummary) -> Result<()> {
    let problem = SwingUpProblem {
        params: SphericalParams { m: s.m, l: s.l, g: s.g },
        initial: SphericalPendState::projected(s.q0, s.omega0).context("initial swing-up state")?,
        desired: SphericalPendState::projected(s.q_final, s.omega_final).context("desired swing-up state")?,
        steps: s.steps,
        h: s.h,
    };
    let opts = DmocOptions {
        seed,
        max_outer: s.max_outer,
        ..DmocOptions::default()
    };
    let sol = solve_swingup(&problem, None, &opts).context("dmoc swing-up")?;
    let moments = sol.schedule.moments(&sol.trajectory);
    let header = ["k", "t", "q1", "q2", "q3", "w1", "w2", "w3", "u1", "u2", "u3"];
    let mut csv = Csv::create(path.clone(), &header)?;
    for (k, (st, u)) in sol.trajectory.iter().zip(&moments).enumerate() {
        let mut row = vec![k as f64 * s.h];
        row.extend(vec3(st.q.vector()));
        row.extend(vec3(&st.omega));
        row.extend(vec3(u));
        csv.row(k, &some(&row))?;
    }
    csv.finish()?;
    let r = &sol.report;
    summary.text("experiment", "dmoc");
    summary.int("steps", s.steps);
    summary.num("h", s.h);
    summary.num("cost", r.cost);
    summary.num("constraint_violation", r.constraint_violation);
    summary.num("stationarity", r.stationarity);
    summary.int("iterations", r.iterations);
    summary.int("outer_iterations", r.outer_iterations);
    summary.int("evaluations", r.evaluations);
    summary.text("csv", path.display().to_string());
    Ok(())
}

/// Transfer between coplanar circular orbits of radii `radius` and
/// `target_radius`, arriving with the mean orbital phase and the dumbbell
/// spinning at the final orbital rate.
pub fn orbit_transfer_problem(s: &ShootSetup) -> Result<TransferProblem> {
    let b = &s.body;
    let pot = DumbbellPotential::symmetric(b.mu, b.mass, b.length);
    let params = RigidParams::new(pot.total_mass(), pot.inertia(b.sphere_radius)).context("dumbbell parameters")?;
    let (r0, r1) = (b.radius, s.target_radius);
    let n0 = (b.mu / (r0 * r0 * r0)).sqrt();
    let n1 = (b.mu / (r1 * r1 * r1)).sqrt();
    let initial = circular_orbit_state(&pot, r0, Vec3::new(0.0, 0.0, n0));
    let phi = 0.5 * (n0 + n1) * s.h * s.steps as f64;
    let rot = Rot3::exp(&(Vec3::z() * phi));
    let desired = RigidState {
        r: rot,
        x: rot.rotate(&Vec3::new(r1, 0.0, 0.0)),
        omega: Vec3::new(0.0, 0.0, n1),
        v: rot.rotate(&Vec3::new(0.0, (b.mu / r1).sqrt(), 0.0)),
    };
    Ok(TransferProblem {
        params,
        potential: pot,
        initial,
        desired,
        steps: s.steps,
        h: s.h,
        w_f: Mat3::identity() * s.w_f,
        w_m: Mat3::identity() * s.w_m,
    })
}

fn run_shoot(s: &ShootSetup, path: PathBuf, summary: &mut RunSummary) -> Result<()> {
    let prob = orbit_transfer_problem(s)?;
    let opts = ShootOptions {
        max_iter: s.max_iter,
        ..ShootOptions::default()
    };
    let sol = shoot(&prob, &Vec12::zeros(), &opts).context("orbit transfer shooting")?;
    let mut header = vec!["k", "t", "x1", "x2", "x3", "v1", "v2", "v3", "w1", "w2", "w3"];
    header.extend(["r11", "r12", "r13", "r21", "r22", "r23", "r31", "r32", "r33"]);
    header.extend(["uf1", "uf2", "uf3", "um1", "um2", "um3"]);
    let mut csv = Csv::create(path.clone(), &header)?;
    for (k, st) in sol.extremal.states.iter().enumerate() {
        let mut row = vec![k as f64 * s.h];
        row.extend(vec3(&st.x));
        row.extend(vec3(&st.v));
        row.extend(vec3(&st.omega));
        row.extend(rot_rows(&st.r));
        let mut row = some(&row);
        match sol.extremal.controls.get(k) {
            Some((f, m)) => row.extend(some(&vec3(f)).into_iter().chain(some(&vec3(m)))),
            None => row.extend([None; 6]),
        }
        csv.row(k, &row)?;
    }
    csv.finish()?;
    let hist = &sol.residual_history;
    summary.text("experiment", "shoot");
    summary.int("steps", s.steps);
    summary.num("h", s.h);
    summary.int("iterations", sol.iterations);
    summary.num("initial_residual", hist[0]);
    summary.num("final_residual", *hist.last().expect("nonempty history"));
    let h: Vec<String> = hist.iter().map(|r| format!("{r:.3e}")).collect();
    summary.text("residual_history", h.join(" "));
    summary.num("cost", sol.cost);
    summary.text("csv", path.display().to_string());
    Ok(())
}

fn run_clag(s: &ClagSetup, path: PathBuf, summary: &mut RunSummary) -> Result<()> {
    let p = CartPendParams::new(s.m, s.cart, s.l, s.g).context("cart-pendulum parameters")?;
    let kc = clag::critical_kappa(&p, s.h).context("critical gain")?;
    let gains = ShapingGains::new(s.kappa_factor * kc, p.gamma()).context("shaping gains")?;
    let q0 = DVector::from_vec(vec![s.theta0, s.s0]);
    let qdot0 = DVector::from_vec(vec![s.thetadot0, s.sdot0]);
    let qs = clag::simulate(&p, &gains, &q0, &qdot0, s.h, s.steps).context("controlled cart-pendulum")?;
    let n = qs.len();
    let momentum: Vec<f64> = qs
        .windows(2)
        .map(|w| clag::controlled_momentum(&p, &gains, &w[0], &w[1], s.h))
        .collect();
    let control: Vec<f64> = qs
        .windows(3)
        .map(|w| clag::control_input(&p, &gains, &w[0], &w[1], &w[2], s.h))
        .collect();
    let mut csv = Csv::create(path.clone(), &["k", "t", "theta", "s", "momentum", "control"])?;
    for (k, q) in qs.iter().enumerate() {
        let u = if k >= 1 { control.get(k - 1).copied() } else { None };
        csv.row(k, &[Some(k as f64 * s.h), Some(q[0]), Some(q[1]), momentum.get(k).copied(), u])?;
    }
    csv.finish()?;
    let theta: Vec<f64> = qs.iter().map(|q| q[0].abs()).collect();
    let mom_dev: Vec<f64> = momentum.iter().map(|m| (m - momentum[0]).abs()).collect();
    let abs_u: Vec<f64> = control.iter().map(|u| u.abs()).collect();
    summary.text("experiment", "clag");
    summary.int("steps", s.steps);
    summary.num("h", s.h);
    summary.num("kappa_crit", kc);
    summary.num("kappa", gains.kappa);
    summary.num("sigma", gains.sigma);
    if let Some(&m0) = momentum.first() {
        summary.num("momentum", m0);
        summary.num("momentum_max_dev", max(&mom_dev));
    }
    summary.num("max_abs_theta", max(&theta));
    summary.num("max_abs_theta_first100", max(&theta[..n.min(101)]));
    summary.num("s_drift", (qs[n - 1][1] - qs[0][1]).abs());
    summary.num("max_abs_control", max(&abs_u));
    summary.text("csv", path.display().to_string());
    Ok(())
}
