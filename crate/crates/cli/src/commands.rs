use std::io::Write;
use std::sync::Mutex;

use serde_json::json;

use ftl_homog::convergence::{lwr_bridge_run, CellResult};
use ftl_homog::micro_sim::corrector_state;
use ftl_homog::*;

use crate::config::{MicroStart, ScenarioConfig};
use crate::output::{io_err, open, OutDir, Plot};
use crate::CliError;

pub fn validate(cfg: &ScenarioConfig, quiet: bool) -> Result<(), CliError> {
    let dist = cfg.distribution()?;
    let report = validate_assumptions(&dist);
    if !quiet {
        print!("{report}");
    }
    if report.all_passed() {
        Ok(())
    } else {
        let failed: Vec<String> = report.failures().map(|c| format!("{:?}", c.assumption)).collect();
        Err(CliError::Failure(format!("assumptions failed: {}", failed.join(", "))))
    }
}

fn flux_for(cfg: &ScenarioConfig, dist: &TypeDistribution) -> Result<EffectiveFlux, CliError> {
    let p = cfg.flux_params();
    Ok(build_flux(dist, p.p_max, p.grid_points, p.tol)?)
}

pub fn build_flux_cmd(cfg: &ScenarioConfig, out: &OutDir) -> Result<(), CliError> {
    let dist = cfg.distribution()?;
    let flux = flux_for(cfg, &dist)?;
    out.write("flux.csv", |w| flux.write_csv(w))?;
    out.write("fundamental_diagram.csv", |w| flux.write_fundamental_diagram_csv(w))?;
    if !flux.precision_capped().is_empty() && !out.quiet {
        println!(
            "note: {} nodes hit the floating-point floor before tol (first at p = {})",
            flux.precision_capped().len(),
            flux.precision_capped()[0]
        );
    }
    if cfg.output.plots {
        write_plot(
            out,
            "flux.gp",
            &Plot {
                output: "flux.png",
                title: "effective velocity",
                xlabel: "headway p [m]",
                ylabel: "F(p) [m/s]",
                loglog: false,
                series: vec![("flux.csv", "1:2", "F", "lines")],
            },
        )?;
        write_plot(
            out,
            "fundamental_diagram.gp",
            &Plot {
                output: "fundamental_diagram.png",
                title: "fundamental diagram",
                xlabel: "density rho [1/m]",
                ylabel: "flow q [1/s]",
                loglog: false,
                series: vec![("fundamental_diagram.csv", "1:3", "q", "lines")],
            },
        )?;
    }
    Ok(())
}

pub fn simulate(cfg: &ScenarioConfig, out: &OutDir) -> Result<(), CliError> {
    let dist = cfg.distribution()?;
    let m = &cfg.micro;
    if m.vehicles < 2 {
        return Err(CliError::Failure(format!(
            "[micro] vehicles must be at least 2, got {}",
            m.vehicles
        )));
    }
    let types = sample_types(&dist, m.vehicles, m.seed)?;
    let state = match m.start {
        MicroStart::Corrector => {
            let theta = m
                .theta
                .ok_or_else(|| CliError::Failure("start = \"corrector\" needs theta".into()))?;
            corrector_state(types, &dist, theta)?
        }
        MicroStart::Profile => {
            if !(m.epsilon > 0.0) {
                return Err(CliError::Failure(format!(
                    "[micro] epsilon must be positive, got {}",
                    m.epsilon
                )));
            }
            let u0 = cfg.initial_profile()?;
            let xs = ftl_homog::convergence::discretize_initial(&u0, m.epsilon, 0, m.vehicles as i64 - 1)?;
            MicroState::new(xs, types, cfg.leader()?)?
        }
    };
    let dt = m.dt.unwrap_or(m.dt_factor / dist.alpha());
    let mut traj = integrate(
        &state,
        &dist,
        StepConfig {
            horizon: m.horizon,
            dt,
            sample_every: m.sample_every,
        },
    )?;
    traj.seed = Some(m.seed);
    out.write("trajectory.csv", |w| traj.write_csv(&dist, w))?;
    let mut summary = json!({
        "vehicles": m.vehicles,
        "horizon": m.horizon,
        "dt": dt,
        "seed": m.seed,
        "final_time": traj.final_time(),
    });
    if cfg.output.plots {
        write_plot(
            out,
            "trajectory.gp",
            &Plot {
                output: "trajectory.png",
                title: "vehicle positions",
                xlabel: "t [s]",
                ylabel: "U_i [m]",
                loglog: false,
                series: vec![("trajectory.csv", "1:3", "U_i(t)", "dots")],
            },
        )?;
    }
    let mut result = Ok(());
    if m.start == MicroStart::Corrector {
        let theta = m.theta.unwrap_or_default();
        let t = traj.final_time();
        let dev = traj
            .final_positions()
            .iter()
            .zip(&traj.snapshots[0])
            .map(|(x1, x0)| ((x1 - x0) / t - theta).abs())
            .fold(0.0, f64::max);
        let ok = dev <= 1e-8;
        if !out.quiet {
            println!(
                "constant-speed check: max |mean speed - {theta}| = {dev:.3e} ({})",
                if ok { "pass" } else { "fail" }
            );
        }
        summary["corrector_max_deviation"] = dev.into();
        summary["corrector_check"] = (if ok { "pass" } else { "fail" }).into();
        if !ok {
            result = Err(CliError::Failure(format!(
                "corrector run drifted from speed {theta} by {dev:e}"
            )));
        }
    }
    if cfg.output.json() {
        out.write_json("simulate.json", summary)?;
    }
    result
}

pub fn solve_macro(cfg: &ScenarioConfig, out: &OutDir) -> Result<(), CliError> {
    let mc = cfg
        .macro_grid
        .as_ref()
        .ok_or_else(|| CliError::Failure("solve-macro needs a [macro] section".into()))?;
    let dist = cfg.distribution()?;
    let flux = flux_for(cfg, &dist)?;
    let u0 = cfg.initial_profile()?;
    if mc.lwr {
        let (g_lo, g_hi) = u0.gradient_bounds(mc.x_min, mc.x_max);
        if !(g_lo > 0.0) {
            return Err(CliError::Failure(format!(
                "the density form needs 1/C <= u0' <= C on [{}, {}]; u0' ranges over [{g_lo}, {g_hi}]",
                mc.x_min, mc.x_max
            )));
        }
    }
    let times: Vec<f64> = (1..mc.outputs)
        .map(|k| mc.t_final * k as f64 / mc.outputs as f64)
        .collect();
    let grid = Grid1D::with_cfl(
        mc.x_min,
        mc.x_max,
        mc.nx,
        mc.t_final,
        flux.lipschitz(),
        mc.cfl_safety,
        cfg.boundary(),
    )?
    .with_output_times(&times)?;
    let xs = grid.nodes();
    let u_init: Vec<f64> = xs.iter().map(|&x| u0.eval(x)).collect();
    let hj = solve_hj(&u_init, &flux, &grid)?;
    out.write("hj.csv", |w| hj.write_csv(w))?;
    if cfg.output.plots {
        write_plot(
            out,
            "hj.gp",
            &Plot {
                output: "hj.png",
                title: "u(x, t)",
                xlabel: "label x",
                ylabel: "u [m]",
                loglog: false,
                series: vec![("hj.csv", "2:3", "u", "lines")],
            },
        )?;
    }
    let mut summary = json!({
        "dx": grid.dx(),
        "dt": grid.dt,
        "t_final": mc.t_final,
        "clamped_gradients": hj.clamped_gradients,
    });
    if mc.lwr {
        let run = lwr_bridge_run(&flux, &u0, (mc.x_min, mc.x_max), mc.t_final, grid.dx(), mc.cfl_safety)?;
        out.write("lwr.csv", |w| run.lwr.write_csv(w))?;
        let (y0, _) = run.report.interval;
        let dx = run.report.dx;
        let j0 = ((y0 - run.lwr.grid.x_min) / dx).round() as usize;
        let lwr_last = run.lwr.last();
        out.write("bridge.csv", |w| {
            writeln!(w, "y,rho_hj,rho_lwr")?;
            for (k, r) in run.pushed.iter().enumerate() {
                writeln!(w, "{},{r},{}", y0 + (k as f64 + 0.5) * dx, lwr_last[j0 + k])?;
            }
            Ok(())
        })?;
        if !out.quiet {
            println!(
                "push-forward vs Godunov at t = {}: L1 = {:.4e} on [{:.3}, {:.3}] (dx = {dx}); net boundary outflow {:.2e}",
                mc.t_final, run.report.l1, run.report.interval.0, run.report.interval.1, -run.report.mass_change
            );
        }
        summary["bridge"] = serde_json::to_value(&run.report).expect("plain data");
        if cfg.output.plots {
            write_plot(
                out,
                "bridge.gp",
                &Plot {
                    output: "bridge.png",
                    title: "density at final time",
                    xlabel: "position y [m]",
                    ylabel: "rho [1/m]",
                    loglog: false,
                    series: vec![
                        ("bridge.csv", "1:2", "push-forward of u", "lines"),
                        ("bridge.csv", "1:3", "Godunov", "points"),
                    ],
                },
            )?;
        }
    }
    if cfg.output.json() {
        out.write_json("solve_macro.json", summary)?;
    }
    Ok(())
}

fn cell_row(c: &CellResult) -> String {
    format!(
        "{},{},{},{},{},{}",
        c.epsilon,
        c.seed,
        c.sup_error,
        c.l1_error,
        c.initial_error,
        c.failure.as_deref().unwrap_or("").replace([',', '\n'], ";")
    )
}

const CELL_HEADER: &str = "epsilon,seed,sup_error,l1_error,initial_error,failure";

pub fn converge(cfg: &ScenarioConfig, out: &OutDir) -> Result<(), CliError> {
    let scenario = cfg.scenario()?;
    let partial_path = out.path("cells.partial.csv");
    let mut w = open(&partial_path)?;
    writeln!(w, "{}{CELL_HEADER}", out.header())
        .and_then(|_| w.flush())
        .map_err(|e| io_err(&partial_path, e))?;
    let writer = Mutex::new(w);
    let quiet = out.quiet;
    let report = convergence_study_with(&scenario, |c| {
        let mut w = writer.lock().expect("writer lock");
        // Rows land as cells finish so an interrupted run keeps them.
        let _ = writeln!(w, "{}", cell_row(c)).and_then(|_| w.flush());
        if !quiet {
            match &c.failure {
                None => println!("eps {:<8} seed {:<6} sup error {:.5}", c.epsilon, c.seed, c.sup_error),
                Some(f) => println!("eps {:<8} seed {:<6} failed: {f}", c.epsilon, c.seed),
            }
        }
    })?;
    drop(writer);

    let mut cells = report.cells.clone();
    cells.sort_by(|a, b| b.epsilon.total_cmp(&a.epsilon).then(a.seed.cmp(&b.seed)));
    out.write("cells.csv", |w| {
        writeln!(w, "{CELL_HEADER}")?;
        for c in &cells {
            writeln!(w, "{}", cell_row(c))?;
        }
        Ok(())
    })?;
    // Wall times vary run to run, so they stay out of the reproducible files.
    out.write("timings.csv", |w| {
        writeln!(w, "epsilon,seed,wall_time_s")?;
        for c in &cells {
            writeln!(w, "{},{},{}", c.epsilon, c.seed, c.wall_time_s)?;
        }
        Ok(())
    })?;
    out.write("summary.csv", |w| {
        writeln!(w, "epsilon,mean_sup_error,max_sup_error,completed")?;
        for s in &report.summaries {
            writeln!(
                w,
                "{},{},{},{}",
                s.epsilon, s.mean_sup_error, s.max_sup_error, s.completed
            )?;
        }
        Ok(())
    })?;
    let failed = report.cells.iter().any(|c| c.failure.is_some());
    if !failed {
        let _ = std::fs::remove_file(&partial_path);
    }
    let verdict = match report.verdict {
        Verdict::Pass => "pass",
        Verdict::Fail => "fail",
        Verdict::InsufficientData => "insufficient data",
    };
    if cfg.output.json() {
        let mut v = serde_json::to_value(&report).expect("plain data");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("cells");
            obj.insert("verdict".into(), verdict.into());
        }
        out.write_json("report.json", v)?;
    }
    if cfg.output.plots {
        write_plot(
            out,
            "convergence.gp",
            &Plot {
                output: "convergence.png",
                title: "micro-macro error",
                xlabel: "epsilon",
                ylabel: "sup error",
                loglog: true,
                series: vec![
                    ("summary.csv", "1:3", "max over seeds", "linespoints"),
                    ("summary.csv", "1:2", "mean over seeds", "linespoints"),
                ],
            },
        )?;
    }
    if !out.quiet {
        for n in &report.notes {
            println!("note: {n}");
        }
        println!("verdict: {verdict}");
    }
    match report.verdict {
        Verdict::Fail => Err(CliError::Failure(format!(
            "convergence verdict: fail ({})",
            report.notes.join("; ")
        ))),
        _ => Ok(()),
    }
}

pub fn fundamental_diagram(cfg: &ScenarioConfig, out: &OutDir) -> Result<(), CliError> {
    let dist = cfg.distribution()?;
    let flux = flux_for(cfg, &dist)?;
    let s = &cfg.study;
    let headways = if s.fd_headways.is_empty() {
        let (lo, hi) = (dist.h0_bar(), flux.p_max());
        (1..=12).map(|k| lo + (hi - lo) * k as f64 / 12.0).collect()
    } else {
        s.fd_headways.clone()
    };
    let probe = SpeedProbe {
        vehicles: s.fd_vehicles,
        horizon: s.fd_horizon,
        dt: s.dt_factor / dist.alpha(),
    };
    let rows = fundamental_diagram_study(&dist, &flux, &headways, &s.seeds, probe)?;
    out.write("fundamental_diagram_study.csv", |w| {
        writeln!(w, "p,F_bar,empirical_mean,empirical_sd,n_seeds")?;
        for r in &rows {
            writeln!(
                w,
                "{},{},{},{},{}",
                r.p, r.f_bar, r.empirical_mean, r.empirical_sd, r.n_seeds
            )?;
        }
        Ok(())
    })?;
    if !out.quiet {
        for r in &rows {
            println!(
                "p {:<8.4} F {:.5}  micro {:.5} +- {:.5}",
                r.p, r.f_bar, r.empirical_mean, r.empirical_sd
            );
        }
    }
    if cfg.output.json() {
        out.write_json("fundamental_diagram_study.json", json!({ "rows": rows }))?;
    }
    if cfg.output.plots {
        write_plot(
            out,
            "fundamental_diagram_study.gp",
            &Plot {
                output: "fundamental_diagram_study.png",
                title: "long-time speed against F",
                xlabel: "headway p [m]",
                ylabel: "speed [m/s]",
                loglog: false,
                series: vec![
                    ("fundamental_diagram_study.csv", "1:2", "F", "lines"),
                    ("fundamental_diagram_study.csv", "1:3:4", "micro mean", "yerrorbars"),
                ],
            },
        )?;
    }
    Ok(())
}

fn write_plot(out: &OutDir, name: &str, plot: &Plot) -> Result<(), CliError> {
    let script = plot.script();
    out.write(name, |w| w.write_all(script.as_bytes()))?;
    Ok(())
}
