use std::fmt::Write as _;
use std::fs::File;
use std::io::BufReader;
use std::time::Instant;

use rayon::prelude::*;

use super::{ExperimentKind, ExperimentSpec, OutputFile};
use crate::closed_forms::{density_distance_bound_check, upper_bound};
use crate::error::{Error, Result};
use crate::fock::WaveFunction;
use crate::lattice::{self, ChainSpec, SpectralDecomposition};
use crate::linalg::C64;
use crate::optimizer::{optimize, OptimizeReport};
use crate::projection::{objective, reconstruct_w, OrbitalSet};

pub(super) fn dispatch(spec: &ExperimentSpec) -> Result<Vec<OutputFile>> {
    match spec.kind {
        ExperimentKind::ConvergenceTrace => convergence_trace(spec),
        ExperimentKind::SlowTail => slow_tail(spec),
        ExperimentKind::GsSweep => gs_sweep(spec),
        ExperimentKind::QuenchFidelity => quench_fidelity(spec),
        ExperimentKind::DensityCompare => density_compare(spec),
        ExperimentKind::BoundReport => bound_report(spec),
        ExperimentKind::Optimize => optimize_dump(spec),
    }
}

/// Ground state of `spec` (confined to `L_i` sites) evolved for time `t`
/// after release, with the interaction switched to `quench_u`.
pub fn quench_state(spec: &ChainSpec, quench_u: f64, t: f64) -> Result<WaveFunction> {
    let psi0 = lattice::confined_ground_state(spec)?;
    lattice::evolve(&spec.with_interaction(quench_u), &psi0, t)
}

/// `I` of a free-fermion quench state against the analytically propagated
/// `L_i` site orbitals; equals one up to round-off.
pub fn free_fermion_check(psi: &WaveFunction, sites: usize, t: f64) -> Result<f64> {
    let v = OrbitalSet::new(lattice::propagated_site_orbitals(psi.dim(), sites, t)?)?;
    objective(psi, &v)
}

fn e(x: f64) -> String {
    format!("{x:.15e}")
}

fn label(li: usize, t: f64) -> String {
    format!("Li{li}_t{t}")
}

fn elapsed(start: Instant) -> f64 {
    start.elapsed().as_secs_f64()
}

/// Released chain of the spec: spectral data plus projected initial states.
struct Quench {
    spectral: SpectralDecomposition,
    initial: Vec<(usize, Vec<C64>)>,
}

impl Quench {
    fn new(spec: &ExperimentSpec) -> Result<Self> {
        let l = spec.length.unwrap_or(0);
        let n = spec.n_particles.unwrap_or(0);
        let u = spec.interaction.unwrap_or(0.0);
        let after = spec.quench_interaction.unwrap_or(u);
        let spectral = lattice::build_hamiltonian(&ChainSpec::new(l, n, after))?.spectral()?;
        let initial = spec
            .confinements
            .iter()
            .map(|&li| {
                let psi0 = lattice::confined_ground_state(&ChainSpec::new(l, n, u).confined(li))?;
                Ok((li, spectral.project(&psi0)?))
            })
            .collect::<Result<_>>()?;
        Ok(Self { spectral, initial })
    }

    fn state(&self, li: usize, t: f64) -> WaveFunction {
        let (_, c) = self
            .initial
            .iter()
            .find(|(l, _)| *l == li)
            .expect("configured L_i");
        self.spectral.evolve_coefficients(c, t)
    }
}

fn trace_summary_rows(out: &mut String, label: &str, m: usize, report: &OptimizeReport) {
    for t in &report.traces {
        writeln!(
            out,
            "{label},{m},{},{},{},{},{},{}",
            t.restart_id,
            e(t.initial),
            e(t.final_objective()),
            t.sweeps,
            t.converged,
            t.stagnated
        )
        .unwrap();
    }
}

fn convergence_trace(spec: &ExperimentSpec) -> Result<Vec<OutputFile>> {
    let start = Instant::now();
    let (l, n, u) = model(spec);
    let mut states = vec![(
        "ground".to_string(),
        lattice::ground_state(&ChainSpec::new(l, n, u))?,
    )];
    let quench = Quench::new(spec)?;
    for &li in &spec.confinements {
        for &t in &spec.t_grid {
            states.push((label(li, t), quench.state(li, t)));
        }
    }
    let mut files = Vec::new();
    let mut summary =
        String::from("state,M,restart,initial_I,final_I,sweeps,converged,stagnated\n");
    for (name, psi) in &states {
        for &m in &spec.m_list {
            let t0 = Instant::now();
            let report = optimize(psi, &spec.optimizer(m))?;
            trace_summary_rows(&mut summary, name, m, &report);
            files.push(OutputFile {
                name: format!("trace_{name}_M{m}.csv"),
                contents: report.trace_csv(),
                wall_time_s: elapsed(t0),
            });
        }
    }
    files.push(OutputFile {
        name: "convergence_summary.csv".into(),
        contents: summary,
        wall_time_s: elapsed(start),
    });
    Ok(files)
}

fn slow_tail(spec: &ExperimentSpec) -> Result<Vec<OutputFile>> {
    let start = Instant::now();
    let quench = Quench::new(spec)?;
    let free = spec.quench_interaction == Some(0.0);
    let mut files = Vec::new();
    let mut summary = String::from("L_i,t,restart,I_15,I_100,I_final,steps,exact_I\n");
    for &li in &spec.confinements {
        for &t in &spec.t_grid {
            let t0 = Instant::now();
            let psi = quench.state(li, t);
            let report = optimize(&psi, &spec.optimizer(li))?;
            let exact = if free {
                e(free_fermion_check(&psi, li, t)?)
            } else {
                String::new()
            };
            for tr in &report.traces {
                writeln!(
                    summary,
                    "{li},{t},{},{},{},{},{},{exact}",
                    tr.restart_id,
                    e(tr.objective_after(15)),
                    e(tr.objective_after(100)),
                    e(tr.final_objective()),
                    tr.steps.len()
                )
                .unwrap();
            }
            files.push(OutputFile {
                name: format!("slow_tail_{}.csv", label(li, t)),
                contents: report.trace_csv(),
                wall_time_s: elapsed(t0),
            });
        }
    }
    files.push(OutputFile {
        name: "slow_tail_summary.csv".into(),
        contents: summary,
        wall_time_s: elapsed(start),
    });
    Ok(files)
}

fn gs_sweep(spec: &ExperimentSpec) -> Result<Vec<OutputFile>> {
    let start = Instant::now();
    let n = spec.n_particles.unwrap_or(0);
    let grid: Vec<(f64, usize)> = spec
        .u_list
        .iter()
        .flat_map(|&u| spec.l_range.iter().map(move |&l| (u, l)))
        .collect();
    let rows = grid
        .par_iter()
        .map(|&(u, l)| -> Result<String> {
            let sd = lattice::build_hamiltonian(&ChainSpec::new(l, n, u))?.spectral()?;
            let psi = sd.ground_state();
            let mut rows = String::new();
            for &m in &spec.m_list {
                let report = optimize(&psi, &spec.optimizer(m))?;
                writeln!(
                    rows,
                    "{l},{u},{m},{},{},{},{}",
                    e(report.best_objective()),
                    e(upper_bound(&psi, m)?),
                    e(report.spread()),
                    sd.ground_level_degenerate()
                )
                .unwrap();
            }
            Ok(rows)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut csv = String::from("L,U,M,I_max,I_upper,spread,degenerate\n");
    rows.iter().for_each(|r| csv.push_str(r));
    Ok(vec![OutputFile {
        name: "gs_sweep.csv".into(),
        contents: csv,
        wall_time_s: elapsed(start),
    }])
}

fn model(spec: &ExperimentSpec) -> (usize, usize, f64) {
    (
        spec.length.unwrap_or(0),
        spec.n_particles.unwrap_or(0),
        spec.interaction.unwrap_or(0.0),
    )
}

fn quench_fidelity(spec: &ExperimentSpec) -> Result<Vec<OutputFile>> {
    let start = Instant::now();
    let quench = Quench::new(spec)?;
    let u_after = spec.quench_interaction.unwrap_or(0.0);
    let mut fidelity = String::from("L_i,t,M,I_max,I_upper,spread,E_int\n");
    let mut files = Vec::new();
    for &li in &spec.confinements {
        let t0 = Instant::now();
        let rows = spec
            .t_grid
            .par_iter()
            .map(|&t| -> Result<(String, String)> {
                let psi = quench.state(li, t);
                let e_int = lattice::interaction_energy(&psi, u_after);
                let e_total = lattice::hopping_energy(&psi)? + e_int;
                let mut fid = String::new();
                for &m in &spec.m_list {
                    let report = optimize(&psi, &spec.optimizer(m))?;
                    writeln!(
                        fid,
                        "{li},{t},{m},{},{},{},{}",
                        e(report.best_objective()),
                        e(upper_bound(&psi, m)?),
                        e(report.spread()),
                        e(e_int)
                    )
                    .unwrap();
                }
                let mut obs = format!("{t},{},{}", e(e_total), e(e_int));
                for x in lattice::density(&psi) {
                    write!(obs, ",{}", e(x)).unwrap();
                }
                obs.push('\n');
                Ok((fid, obs))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut obs = String::from("t,E_total,E_int");
        for i in 0..quench.spectral.basis().dim() {
            write!(obs, ",n_{i}").unwrap();
        }
        obs.push('\n');
        for (fid, o) in rows {
            fidelity.push_str(&fid);
            obs.push_str(&o);
        }
        files.push(OutputFile {
            name: format!("observables_Li{li}.csv"),
            contents: obs,
            wall_time_s: elapsed(t0),
        });
    }
    files.insert(
        0,
        OutputFile {
            name: "quench_fidelity.csv".into(),
            contents: fidelity,
            wall_time_s: elapsed(start),
        },
    );
    Ok(files)
}

fn density_compare(spec: &ExperimentSpec) -> Result<Vec<OutputFile>> {
    let start = Instant::now();
    let quench = Quench::new(spec)?;
    let mut summary =
        String::from("L_i,t,M,I_max,epsilon,delta1,bound,bound_ok,max_abs_deviation\n");
    let mut files = Vec::new();
    for (&li, &t) in spec.confinements.iter().zip(&spec.t_grid) {
        let t0 = Instant::now();
        let psi = quench.state(li, t);
        let exact = lattice::density(&psi);
        let mut columns = Vec::new();
        for &m in &spec.m_list {
            let report = optimize(&psi, &spec.optimizer(m))?;
            let best = report.best_trace();
            let w = reconstruct_w(&best.amplitudes, &best.orbitals)?;
            let n_w = lattice::density(&w);
            let check = density_distance_bound_check(&psi, &w)?;
            let dev = exact
                .iter()
                .zip(&n_w)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            writeln!(
                summary,
                "{li},{t},{m},{},{},{},{},{},{}",
                e(report.best_objective()),
                e(check.epsilon),
                e(check.delta1),
                e(check.bound),
                check.bound_ok,
                e(dev)
            )
            .unwrap();
            columns.push(n_w);
        }
        let mut csv = String::from("site,n_exact");
        for m in &spec.m_list {
            write!(csv, ",n_M{m}").unwrap();
        }
        csv.push('\n');
        for (i, x) in exact.iter().enumerate() {
            write!(csv, "{i},{}", e(*x)).unwrap();
            for col in &columns {
                write!(csv, ",{}", e(col[i])).unwrap();
            }
            csv.push('\n');
        }
        files.push(OutputFile {
            name: format!("density_{}.csv", label(li, t)),
            contents: csv,
            wall_time_s: elapsed(t0),
        });
    }
    files.push(OutputFile {
        name: "density_summary.csv".into(),
        contents: summary,
        wall_time_s: elapsed(start),
    });
    Ok(files)
}

fn read_dump(spec: &ExperimentSpec) -> Result<WaveFunction> {
    let path = spec
        .wavefunction
        .as_ref()
        .ok_or_else(|| Error::Config("missing `wavefunction`".into()))?;
    let file = File::open(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    WaveFunction::read_dump(BufReader::new(file))
}

fn bound_report(spec: &ExperimentSpec) -> Result<Vec<OutputFile>> {
    let start = Instant::now();
    let mut states = Vec::new();
    if spec.wavefunction.is_some() {
        states.push(("file".to_string(), read_dump(spec)?));
    } else {
        let (l, n, u) = model(spec);
        states.push((
            "ground".to_string(),
            lattice::ground_state(&ChainSpec::new(l, n, u))?,
        ));
        let quench = Quench::new(spec)?;
        for &li in &spec.confinements {
            for &t in &spec.t_grid {
                states.push((label(li, t), quench.state(li, t)));
            }
        }
    }
    let mut csv = String::from("state,M,I_opt,I_upper,ratio\n");
    for (name, psi) in &states {
        for &m in &spec.m_list {
            check_m(psi, m)?;
            let i_opt = optimize(psi, &spec.optimizer(m))?.best_objective();
            let i_up = upper_bound(psi, m)?;
            writeln!(
                csv,
                "{name},{m},{},{},{}",
                e(i_opt),
                e(i_up),
                e(i_up / i_opt)
            )
            .unwrap();
        }
    }
    Ok(vec![OutputFile {
        name: "bound_report.csv".into(),
        contents: csv,
        wall_time_s: elapsed(start),
    }])
}

fn check_m(psi: &WaveFunction, m: usize) -> Result<()> {
    if m < psi.n_particles() || m > psi.dim() {
        return Err(Error::Config(format!(
            "need N <= M <= d, got N={} M={m} d={}",
            psi.n_particles(),
            psi.dim()
        )));
    }
    Ok(())
}

fn optimize_dump(spec: &ExperimentSpec) -> Result<Vec<OutputFile>> {
    let start = Instant::now();
    let psi = read_dump(spec)?;
    let mut files = Vec::new();
    let mut summary = String::from("M,I_max,I_upper,spread,converged_restarts\n");
    for &m in &spec.m_list {
        check_m(&psi, m)?;
        let t0 = Instant::now();
        let report = optimize(&psi, &spec.optimizer(m))?;
        let best = report.best_trace();
        let converged = report.traces.iter().filter(|t| t.converged).count();
        writeln!(
            summary,
            "{m},{},{},{},{converged}",
            e(report.best_objective()),
            e(upper_bound(&psi, m)?),
            e(report.spread())
        )
        .unwrap();
        let wall = elapsed(t0);
        for (name, contents) in [
            (format!("trace_M{m}.csv"), report.trace_csv()),
            (format!("orbitals_M{m}.txt"), best.orbitals.to_text()),
            (format!("amplitudes_M{m}.csv"), best.amplitudes.to_csv()),
        ] {
            files.push(OutputFile {
                name,
                contents,
                wall_time_s: wall,
            });
        }
    }
    files.insert(
        0,
        OutputFile {
            name: "optimize_summary.csv".into(),
            contents: summary,
            wall_time_s: elapsed(start),
        },
    );
    Ok(files)
}
