//! One function per subcommand. Each returns the tables it produced; sweep
//! points run on the rayon pool and are collected in input order.

use rayon::prelude::*;
use surftrap_core::circuit::{beta_at_resonance, fit_asymmetry, ResonatorNetwork};
use surftrap_core::constants::{angular, Ion, ELEMENTARY_CHARGE};
use surftrap_core::dcsolve::{
    equilibrium_on_null, mode_dc_target, solve_dc_with, DcSolverOptions, DcTarget, Regularization,
};
use surftrap_core::dynamics::{
    beta_to_sideband_ratio, integrate_motion, sideband_ratio_to_beta, Integrator, MotionOptions,
    PhaseState, SamplingBox, TrapForce,
};
use surftrap_core::efield::{FieldBasis, Order};
use surftrap_core::geometry::Role;
use surftrap_core::numeric::golden_max;
use surftrap_core::pseudo::{
    analyze_point, find_rf_null, mode_analysis_with, pseudo_jet, pseudopotential,
    rf_amplitude_for_target, rf_sample, shaped_drive, total_energy, DriveConfig, ModeAxis,
    ModeOptions, NullSearch,
};
use surftrap_core::thermo::{
    estimate_nbar, estimate_nbar_lineshape, lamb_dicke, synthesize_scan, Noise, SidebandScan,
};
use surftrap_core::{Matrix3, Vector3};

use crate::error::CliError;
use crate::output::{format_num, Cell, Table};
use crate::scenario::{DcTargetKind, IntegratorKind, MapPlane, RegularizationKind, Scenario, UM};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    PotentialMap,
    NullScan,
    Modes,
    RfPowerCurve,
    DcSolve,
    CircuitSweep,
    Beta,
    Trajectory,
    Thermometry,
}

impl Command {
    pub const ALL: [Command; 9] = [
        Command::PotentialMap,
        Command::NullScan,
        Command::Modes,
        Command::RfPowerCurve,
        Command::DcSolve,
        Command::CircuitSweep,
        Command::Beta,
        Command::Trajectory,
        Command::Thermometry,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Command::PotentialMap => "potential-map",
            Command::NullScan => "null-scan",
            Command::Modes => "modes",
            Command::RfPowerCurve => "rf-power-curve",
            Command::DcSolve => "dc-solve",
            Command::CircuitSweep => "circuit-sweep",
            Command::Beta => "beta",
            Command::Trajectory => "trajectory",
            Command::Thermometry => "thermometry",
        }
    }
}

impl std::str::FromStr for Command {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Command::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| CliError::config(format!("unknown command `{s}`")))
    }
}

/// Everything a command needs besides its scenario section.
#[derive(Clone, Debug)]
pub struct Context {
    pub basis: FieldBasis,
    pub ion: Ion,
    /// Drive from `[drive]` with all dc voltages zero.
    pub drive: DriveConfig,
    pub network: ResonatorNetwork,
    pub wavevector: Vector3<f64>,
    pub seed: u64,
}

pub fn execute(command: Command, s: &Scenario, ctx: &Context) -> Result<Vec<Table>, CliError> {
    match command {
        Command::PotentialMap => potential_map(s, ctx),
        Command::NullScan => null_scan(s, ctx),
        Command::Modes => modes(s, ctx),
        Command::RfPowerCurve => rf_power_curve(s, ctx),
        Command::DcSolve => dc_solve(s, ctx),
        Command::CircuitSweep => circuit_sweep(s, ctx),
        Command::Beta => beta(s, ctx),
        Command::Trajectory => trajectory(s, ctx),
        Command::Thermometry => thermometry(s, ctx),
    }
}

/// Parallel map that reports the first failure in input order.
fn par_map<T: Sync, R: Send>(
    items: &[T],
    f: impl Fn(&T) -> Result<R, CliError> + Sync + Send,
) -> Result<Vec<R>, CliError> {
    let results: Vec<Result<R, CliError>> = items.par_iter().map(f).collect();
    results.into_iter().collect()
}

fn mev(joules: f64) -> f64 {
    joules / ELEMENTARY_CHARGE * 1e3
}

fn mhz(omega: f64) -> f64 {
    omega / (2.0 * std::f64::consts::PI) / 1e6
}

fn um3(p: &Vector3<f64>) -> String {
    format!(
        "{} {} {}",
        format_num(p.x / UM),
        format_num(p.y / UM),
        format_num(p.z / UM)
    )
}

fn rf_magnitude(
    basis: &FieldBasis,
    drive: &DriveConfig,
    p: &Vector3<f64>,
) -> Result<f64, CliError> {
    let g = rf_sample(basis, drive, p, Order::Gradient)?.gradient;
    Ok(g.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt())
}

fn symmetry_guess(basis: &FieldBasis) -> (f64, f64) {
    basis.layout().symmetry_point
}

fn null_point(
    basis: &FieldBasis,
    drive: &DriveConfig,
    height: f64,
) -> Result<Vector3<f64>, CliError> {
    let (x, y) = find_rf_null(
        basis,
        drive,
        height,
        symmetry_guess(basis),
        &NullSearch::default(),
    )?;
    Ok(Vector3::new(x, y, height))
}

fn potential_map(s: &Scenario, ctx: &Context) -> Result<Vec<Table>, CliError> {
    let spec = &s.potential_map;
    let drive = if spec.dc_height_um > 0.0 {
        shaped_drive(
            &ctx.basis,
            &ctx.drive,
            spec.dc_height_um * UM,
            &s.shape.target(),
        )?
        .0
    } else {
        ctx.drive.clone()
    };
    let us = spec.u_um.values()?;
    let vs = spec.v_um.values()?;
    let points: Vec<Vector3<f64>> = vs
        .iter()
        .flat_map(|&v| {
            us.iter().map(move |&u| match spec.plane {
                MapPlane::Xy => Vector3::new(u, v, spec.offset_um) * UM,
                MapPlane::Xz => Vector3::new(u, spec.offset_um, v) * UM,
            })
        })
        .collect();
    let values = par_map(&points, |p| {
        let psi = pseudopotential(&ctx.basis, &drive, p)?;
        let total = total_energy(&ctx.basis, &drive, p)?;
        Ok((psi, total, rf_magnitude(&ctx.basis, &drive, p)?))
    })?;
    let mut t = Table::new(
        "potential_map",
        &[
            "x_um",
            "y_um",
            "z_um",
            "pseudo_meV",
            "total_meV",
            "rf_field_V_per_m",
        ],
    );
    let mut best = 0;
    for (k, (p, (psi, total, e))) in points.iter().zip(&values).enumerate() {
        if *psi < values[best].0 {
            best = k;
        }
        t.push(vec![
            (p.x / UM).into(),
            (p.y / UM).into(),
            (p.z / UM).into(),
            mev(*psi).into(),
            mev(*total).into(),
            (*e).into(),
        ]);
    }
    t.note("pseudo_min_um", um3(&points[best]));
    t.note("pseudo_min_meV", format_num(mev(values[best].0)));
    Ok(vec![t])
}

fn null_scan(s: &Scenario, ctx: &Context) -> Result<Vec<Table>, CliError> {
    let spec = &s.null_scan;
    let heights = spec.heights_um.values()?;
    let guess = (spec.guess_um[0] * UM, spec.guess_um[1] * UM);
    let (x0, y0) = symmetry_guess(&ctx.basis);
    let m = ctx.ion.mass;
    let rows = par_map(&heights, |&h| {
        let z = h * UM;
        let (x, y) = find_rf_null(&ctx.basis, &ctx.drive, z, guess, &NullSearch::default())?;
        let p = Vector3::new(x, y, z);
        let jet = pseudo_jet(&ctx.basis, &ctx.drive, &p)?;
        let freq = |k: f64| if k > 0.0 { mhz((k / m).sqrt()) } else { 0.0 };
        Ok(vec![
            h.into(),
            (x / UM).into(),
            (y / UM).into(),
            rf_magnitude(&ctx.basis, &ctx.drive, &p)?.into(),
            rf_magnitude(&ctx.basis, &ctx.drive, &Vector3::new(x0, y0, z))?.into(),
            rf_magnitude(&ctx.basis, &ctx.drive, &Vector3::new(x0 + 50.0 * UM, y0, z))?.into(),
            mev(jet.value).into(),
            freq(jet.hessian[(0, 0)]).into(),
            freq(jet.hessian[(1, 1)]).into(),
        ])
    })?;
    let mut t = Table::new(
        "null_scan",
        &[
            "height_um",
            "x_um",
            "y_um",
            "rf_field_null_V_per_m",
            "rf_field_axis_V_per_m",
            "rf_field_50um_V_per_m",
            "pseudo_meV",
            "rf_x_MHz",
            "rf_y_MHz",
        ],
    );
    for r in rows {
        t.push(r);
    }
    Ok(vec![t])
}

fn voltage_table(basis: &FieldBasis, drive: &DriveConfig) -> Table {
    let mut t = Table::new(
        "voltages",
        &["electrode", "role", "dc_V", "rf_re_V", "rf_im_V"],
    );
    for (i, e) in basis.layout().electrodes.iter().enumerate() {
        t.push(vec![
            e.name.as_str().into(),
            e.role.as_str().into(),
            drive.dc[i].into(),
            drive.rf[i].re.into(),
            drive.rf[i].im.into(),
        ]);
    }
    t
}

fn modes(s: &Scenario, ctx: &Context) -> Result<Vec<Table>, CliError> {
    let (d, p) = shaped_drive(
        &ctx.basis,
        &ctx.drive,
        s.modes.height_um * UM,
        &s.shape.target(),
    )?;
    let sol = mode_analysis_with(&ctx.basis, &d, &p, &ModeOptions::default())?;
    let mut t = Table::new(
        "modes",
        &[
            "axis",
            "frequency_MHz",
            "mathieu_q",
            "mathieu_a",
            "dir_x",
            "dir_y",
            "dir_z",
            "depth_meV",
        ],
    );
    for a in ModeAxis::ALL {
        let k = a as usize;
        let dir = sol.axis(a);
        t.push(vec![
            a.as_str().into(),
            mhz(sol.frequencies[k]).into(),
            sol.mathieu_q[k].into(),
            sol.mathieu_a[k].into(),
            dir.x.into(),
            dir.y.into(),
            dir.z.into(),
            sol.depth[k].map_or(Cell::Text(String::new()), |v| mev(v).into()),
        ]);
    }
    t.note("equilibrium_um", um3(&sol.equilibrium));
    t.note(
        "vertical_tilt_deg",
        format_num(sol.vertical_tilt().to_degrees()),
    );
    t.note("planar_splitting", format_num(sol.planar_splitting()));
    t.note("rf_amplitude_V", format_num(d.rf_peak()));
    Ok(vec![t, voltage_table(&ctx.basis, &d)])
}

fn rf_power_curve(s: &Scenario, ctx: &Context) -> Result<Vec<Table>, CliError> {
    let spec = &s.rf_power_curve;
    if spec.tilts_deg.is_empty() {
        return Err(CliError::config("rf_power_curve: tilts_deg is empty"));
    }
    let heights = spec.heights_um.values()?;
    let target = angular(spec.target_mhz * 1e6);
    let shapes: Vec<_> = spec
        .tilts_deg
        .iter()
        .map(|&t| s.shape.target_with_tilt(t))
        .collect();
    let rows = par_map(&heights, |&h| {
        shapes
            .iter()
            .map(|shape| {
                Ok(rf_amplitude_for_target(
                    &ctx.basis,
                    &ctx.drive,
                    h * UM,
                    target,
                    shape,
                    spec.max_amplitude_v,
                )?)
            })
            .collect::<Result<Vec<f64>, CliError>>()
    })?;
    let names: Vec<String> = if spec.tilts_deg.len() == 1 {
        vec!["v_required_V".into()]
    } else {
        spec.tilts_deg
            .iter()
            .map(|t| format!("v_required_tilt{}deg_V", format_num(*t)))
            .collect()
    };
    let mut columns = vec!["height_um"];
    columns.extend(names.iter().map(String::as_str));
    let mut t = Table::new("rf_power_curve", &columns);
    for (h, r) in heights.iter().zip(&rows) {
        let mut row: Vec<Cell> = vec![(*h).into()];
        row.extend(r.iter().map(|&v| Cell::from(v)));
        t.push(row);
    }
    for (k, name) in names.iter().enumerate() {
        let (i, v) = rows
            .iter()
            .enumerate()
            .map(|(i, r)| (i, r[k]))
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        t.note(
            &format!("{name}_min"),
            format!("{} at height_um {}", format_num(v), format_num(heights[i])),
        );
    }
    Ok(vec![t])
}

fn regularization(kind: RegularizationKind, ridge: f64) -> Result<Regularization, CliError> {
    if !(ridge >= 0.0) {
        return Err(CliError::config("dc_solve: ridge must be non-negative"));
    }
    Ok(match kind {
        RegularizationKind::None => Regularization::None,
        RegularizationKind::Ridge => Regularization::Ridge(ridge),
        RegularizationKind::AlwaysRidge => Regularization::AlwaysRidge(ridge),
    })
}

fn dc_solve(s: &Scenario, ctx: &Context) -> Result<Vec<Table>, CliError> {
    let spec = &s.dc_solve;
    let basis = &ctx.basis;
    let p_in = Vector3::from(spec.point_um) * UM;
    let mut target = match spec.target {
        DcTargetKind::Shape => {
            let p = if ctx.drive.rf_peak() > 0.0 {
                let (x, y) = find_rf_null(
                    basis,
                    &ctx.drive,
                    p_in.z,
                    (p_in.x, p_in.y),
                    &NullSearch::default(),
                )?;
                Vector3::new(x, y, p_in.z)
            } else {
                p_in
            };
            mode_dc_target(basis, &ctx.drive, &p, &s.shape.target())?
        }
        DcTargetKind::Explicit => {
            let h = spec.hessian_v_per_m2;
            let hessian = Matrix3::new(h[0], h[3], h[4], h[3], h[1], h[5], h[4], h[5], h[2]);
            DcTarget::new(p_in, Vector3::from(spec.field_v_per_m), hessian)
        }
    };
    if let Some([lo, hi]) = spec.bounds_v {
        let n = basis
            .layout()
            .electrodes
            .iter()
            .filter(|e| e.role == Role::Dc)
            .count();
        target = target.with_bounds(vec![(lo, hi); n]);
    }
    let opts = DcSolverOptions {
        regularization: regularization(spec.regularization, spec.ridge)?,
        ..DcSolverOptions::default()
    };
    let sol = solve_dc_with(basis, &target, &opts)?;
    let mut t = Table::new("dc_solve", &["electrode", "role", "voltage_V", "clamped"]);
    for &i in &sol.electrodes {
        let e = &basis.layout().electrodes[i];
        t.push(vec![
            e.name.as_str().into(),
            e.role.as_str().into(),
            sol.voltages[i].into(),
            Cell::Int(i64::from(sol.clamped.contains(&i))),
        ]);
    }
    let f = sol.achieved_field;
    let h = sol.achieved_hessian;
    t.note("point_um", um3(&target.point));
    t.note("attained", sol.attained);
    t.note("residual_norm_V_per_m", format_num(sol.residual_norm));
    t.note(
        "achieved_field_V_per_m",
        format!(
            "{} {} {}",
            format_num(f.x),
            format_num(f.y),
            format_num(f.z)
        ),
    );
    t.note(
        "achieved_hessian_V_per_m2",
        [
            h[(0, 0)],
            h[(1, 1)],
            h[(2, 2)],
            h[(0, 1)],
            h[(0, 2)],
            h[(1, 2)],
        ]
        .map(format_num)
        .join(" "),
    );
    let mut d = ctx.drive.clone();
    d.dc = sol.voltages.clone();
    let [lo, hi] = spec.equilibrium_search_um;
    match equilibrium_on_null(basis, &d, (lo * UM, hi * UM)) {
        Ok(z) => t.note("equilibrium_height_um", format_num(z / UM)),
        Err(e) => t.note("equilibrium_height_um", format!("none ({e})")),
    }
    if spec.target == DcTargetKind::Shape {
        let opts = ModeOptions {
            compute_depth: false,
            ..ModeOptions::default()
        };
        let sol = analyze_point(basis, &d, &target.point, &opts)?;
        let m = ctx.ion.mass;
        for a in ModeAxis::ALL {
            t.note(
                &format!("frequency_{}_MHz", a.as_str()),
                format_num(sol.signed_frequency(a, m) / (2.0 * std::f64::consts::PI) / 1e6),
            );
        }
        t.note("planar_splitting", format_num(sol.planar_splitting()));
        t.note(
            "vertical_tilt_deg",
            format_num(sol.vertical_tilt().to_degrees()),
        );
    }
    Ok(vec![t])
}

fn circuit_sweep(s: &Scenario, ctx: &Context) -> Result<Vec<Table>, CliError> {
    let spec = &s.circuit_sweep;
    if spec.points < 2 || !(spec.span_fraction > 0.0) {
        return Err(CliError::config(
            "circuit_sweep: need at least two points and a positive span_fraction",
        ));
    }
    let basis = &ctx.basis;
    let p = null_point(basis, &ctx.drive, spec.height_um * UM)?;
    let k = ctx.wavevector;
    let mut net = ctx.network;
    let mut delta = 0.0;
    if let Some(b) = spec.fit_beta {
        delta = fit_asymmetry(&net, basis, &ctx.drive, &p, &k, b)?;
        net.plus.c_trap += delta;
    }
    let untuned = beta_at_resonance(&net, basis, &ctx.drive, &p, &k)?;
    let nominal = ctx.network.plus.cv;
    let beta_at = |cv: f64| -> Result<_, CliError> {
        let mut n = net;
        n.plus.cv = cv;
        Ok(beta_at_resonance(&n, basis, &ctx.drive, &p, &k)?)
    };
    // equal shunt capacitance, refined on β
    let guess = net.minus.cv + net.minus.c_trap - net.plus.c_trap;
    let reach = 0.02 * nominal;
    let mut failure = None;
    let (matched, _) = golden_max(
        |cv| match beta_at(cv) {
            Ok(b) => -b.beta,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NEG_INFINITY
            }
        },
        guess - reach,
        guess + reach,
        1e-9 * nominal,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let n = spec.points;
    let cvs: Vec<f64> = (0..n)
        .map(|i| matched + nominal * spec.span_fraction * (2.0 * i as f64 / (n - 1) as f64 - 1.0))
        .collect();
    let rows = par_map(&cvs, |&cv| beta_at(cv))?;
    let mut t = Table::new(
        "circuit_sweep",
        &[
            "cv_plus_pF",
            "detuning_percent",
            "resonance_MHz",
            "amplitude_ratio",
            "phase_error_mrad",
            "beta",
        ],
    );
    for r in &rows {
        t.push(vec![
            (r.cv_plus * 1e12).into(),
            (100.0 * (r.cv_plus - matched) / nominal).into(),
            mhz(r.resonance).into(),
            r.amplitude_ratio.into(),
            (r.phase_error * 1e3).into(),
            r.beta.into(),
        ]);
    }
    t.note("height_um", format_num(spec.height_um));
    t.note("fitted_delta_c_trap_pF", format_num(delta * 1e12));
    t.note("matched_cv_plus_pF", format_num(matched * 1e12));
    t.note("nominal_cv_pF", format_num(nominal * 1e12));
    t.note("untuned_beta", format_num(untuned.beta));
    t.note("untuned_resonance_MHz", format_num(mhz(untuned.resonance)));
    Ok(vec![t])
}

fn beta(s: &Scenario, ctx: &Context) -> Result<Vec<Table>, CliError> {
    let spec = &s.beta;
    let p = null_point(&ctx.basis, &ctx.drive, spec.height_um * UM)?;
    let net = beta_at_resonance(&ctx.network, &ctx.basis, &ctx.drive, &p, &ctx.wavevector)?;
    let mut t = Table::new("beta", &["source", "beta", "sideband_ratio"]);
    t.push(vec![
        "network".into(),
        net.beta.into(),
        beta_to_sideband_ratio(net.beta).into(),
    ]);
    for &r in &spec.ratios {
        t.push(vec![
            "ratio".into(),
            sideband_ratio_to_beta(r)?.into(),
            r.into(),
        ]);
    }
    for &b in &spec.betas {
        if !(b >= 0.0) {
            return Err(CliError::config(
                "beta: modulation indices must be non-negative",
            ));
        }
        t.push(vec![
            "beta".into(),
            b.into(),
            beta_to_sideband_ratio(b).into(),
        ]);
    }
    t.note("point_um", um3(&p));
    t.note("resonance_MHz", format_num(mhz(net.resonance)));
    t.note("amplitude_ratio", format_num(net.amplitude_ratio));
    t.note("phase_error_mrad", format_num(net.phase_error * 1e3));
    Ok(vec![t])
}

fn trajectory(s: &Scenario, ctx: &Context) -> Result<Vec<Table>, CliError> {
    let spec = &s.trajectory;
    let (d, p) = shaped_drive(
        &ctx.basis,
        &ctx.drive,
        spec.height_um * UM,
        &s.shape.target(),
    )?;
    let sol = mode_analysis_with(
        &ctx.basis,
        &d,
        &p,
        &ModeOptions {
            compute_depth: false,
            ..ModeOptions::default()
        },
    )?;
    if !(spec.step_ns > 0.0 && spec.rtol > 0.0 && spec.bound_um > 0.0) {
        return Err(CliError::config(
            "trajectory: step_ns, rtol and bound_um must be positive",
        ));
    }
    let step = spec.step_ns * 1e-9;
    let integrator = match spec.integrator {
        IntegratorKind::Adaptive => Integrator::Adaptive {
            rtol: spec.rtol,
            atol: spec.rtol * 1e-8,
            initial_step: step,
        },
        IntegratorKind::Verlet => Integrator::Symplectic { step },
    };
    let opts = MotionOptions {
        integrator,
        sample_interval: Some(spec.sample_interval_ns * 1e-9),
        bounds: Some(SamplingBox::around(&p, spec.bound_um * UM, 1e-6)),
        max_steps: 200_000_000,
    };
    let initial = PhaseState {
        t: 0.0,
        position: p + Vector3::from(spec.displacement_um) * UM,
        velocity: Vector3::zeros(),
    };
    let force = TrapForce::new(&ctx.basis, &d);
    let traj = integrate_motion(&force, &initial, spec.duration_us * 1e-6, &opts)?;
    let mut t = Table::new(
        "trajectory",
        &[
            "t_us",
            "x_um",
            "y_um",
            "z_um",
            "vx_m_per_s",
            "vy_m_per_s",
            "vz_m_per_s",
        ],
    );
    for st in &traj.samples {
        t.push(vec![
            (st.t * 1e6).into(),
            (st.position.x / UM).into(),
            (st.position.y / UM).into(),
            (st.position.z / UM).into(),
            st.velocity.x.into(),
            st.velocity.y.into(),
            st.velocity.z.into(),
        ]);
    }
    t.note("trap_point_um", um3(&p));
    for a in ModeAxis::ALL {
        t.note(
            &format!("predicted_{}_MHz", a.as_str()),
            format_num(mhz(sol.frequency(a))),
        );
    }
    t.note("accepted_steps", traj.accepted_steps);
    t.note("rejected_steps", traj.rejected_steps);
    Ok(vec![t])
}

fn thermometry(s: &Scenario, ctx: &Context) -> Result<Vec<Table>, CliError> {
    let spec = &s.thermometry;
    if spec.repeats == 0 || spec.points < 2 {
        return Err(CliError::config(
            "thermometry: need at least one repeat and two points",
        ));
    }
    let mode = angular(spec.mode_mhz * 1e6);
    let eta = spec
        .eta
        .unwrap_or_else(|| lamb_dicke(ctx.wavevector.norm(), ctx.ion.mass, mode));
    let rabi = angular(spec.rabi_khz * 1e3);
    let scan = SidebandScan {
        mode_frequency: mode,
        eta,
        rabi_frequency: rabi,
        probe_time: spec
            .probe_time_us
            .map_or_else(|| SidebandScan::blue_pi_time(eta, rabi), |t| t * 1e-6),
        detunings: SidebandScan::uniform_detunings(angular(spec.span_khz * 1e3), spec.points),
        shots: spec.shots,
    };
    let jobs: Vec<(f64, u64)> = spec
        .nbar
        .iter()
        .enumerate()
        .flat_map(|(i, &n)| (0..spec.repeats).map(move |r| (n, (i * spec.repeats + r) as u64)))
        .map(|(n, k)| (n, ctx.seed.wrapping_add(k)))
        .collect();
    let results = par_map(&jobs, |&(nbar, seed)| {
        let (red, blue) = synthesize_scan(&scan, nbar, Noise::Binomial { seed })?;
        let est = estimate_nbar(&red, &blue)?;
        let line = estimate_nbar_lineshape(&scan, &red, &blue)?;
        Ok((red, blue, est, line))
    })?;
    let mut scans = Table::new(
        "thermometry_scans",
        &["nbar_true", "seed", "detuning_kHz", "red", "blue"],
    );
    let mut est = Table::new(
        "thermometry_estimates",
        &[
            "nbar_true",
            "seed",
            "nbar",
            "nbar_sd",
            "ratio",
            "ratio_sd",
            "nbar_lineshape",
            "nbar_lineshape_sd",
        ],
    );
    for (&(nbar, seed), (red, blue, e, line)) in jobs.iter().zip(&results) {
        for (k, &d) in scan.detunings.iter().enumerate() {
            scans.push(vec![
                nbar.into(),
                seed.into(),
                (d / (2.0 * std::f64::consts::PI) / 1e3).into(),
                red.excited[k].into(),
                blue.excited[k].into(),
            ]);
        }
        est.push(vec![
            nbar.into(),
            seed.into(),
            e.nbar.into(),
            e.uncertainty.into(),
            e.ratio.into(),
            e.ratio_uncertainty.into(),
            line.0.into(),
            line.1.into(),
        ]);
    }
    for t in [&mut scans, &mut est] {
        t.note("eta", format_num(eta));
        t.note("probe_time_us", format_num(scan.probe_time * 1e6));
        t.note("shots", spec.shots);
    }
    Ok(vec![scans, est])
}
