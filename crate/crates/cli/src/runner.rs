//! Experiment orchestration: builds the shared ensembles a config's checks
//! need, runs the checks, and writes the machine-readable artifacts.
//!
//! Outputs in the config's `output_dir`:
//!
//! * `manifest.json` — config echo, code version, wall time (the only file
//!   with timestamps);
//! * `summary.json` — per-check verdicts, byte-identical across reruns with
//!   the same config and seed;
//! * `<check>.csv` — one row per comparison, header
//!   `test_name,params,estimate,se,target_finite_n,target_limit,verdict`;
//! * `fields/` — per-replica `t,x,u` dumps when `--dump-fields` is set.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime};

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;

use sbm_core::clt::{compute_sheet, SheetGrid};
use sbm_core::heat::{SampledFunction, Spectral};
use sbm_core::lattice::{build_lattice_with, Lattice, LatticeOptions, SeedPlan};
use sbm_core::parallel::run_replicas;
use sbm_core::sim::{
    simulate_fd_with, simulate_particles, DensityPath, FdOptions, ParticleOptions,
};

use crate::checks::{self, CheckReport, FdData, Needs, ParticleData, RunInputs, SheetData};
use crate::config::{self, BackendChoice, ExperimentConfig};

#[derive(Debug, Clone, Default)]
pub struct RunFlags {
    pub dump_fields: bool,
    pub replicas: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Serialize)]
struct CheckSummary {
    name: String,
    anchor: String,
    pass: bool,
    rows: usize,
    failed_rows: usize,
}

#[derive(Serialize)]
struct Summary {
    experiment: String,
    seed: u64,
    replicas: usize,
    pass: bool,
    checks: Vec<CheckSummary>,
}

#[derive(Serialize)]
struct Manifest {
    experiment: String,
    config_path: String,
    config: String,
    version: String,
    started_unix_s: f64,
    wall_time_s: f64,
}

fn build_lattice_from(cfg: &ExperimentConfig) -> Result<Lattice<f64>> {
    let lat = cfg
        .lattice
        .as_ref()
        .ok_or_else(|| anyhow!("the requested checks need a [lattice] section"))?;
    let opts = LatticeOptions {
        dt_factor: lat.dt_factor,
        max_steps: lat.max_steps,
    };
    Ok(build_lattice_with(
        lat.length,
        lat.dx,
        lat.t_max,
        &lat.observation_times,
        &opts,
    )?)
}

fn dump_density_csv(dir: &Path, prefix: &str, path: &DensityPath<f64>) -> Result<()> {
    fs::create_dir_all(dir)?;
    let file = dir.join(format!("{prefix}_rep{:05}.csv", path.replica()));
    let mut out = String::from("t,x,u\n");
    let lat = path.lattice();
    for (i, t) in path.times().iter().enumerate() {
        for (j, &u) in path.field(i).iter().enumerate() {
            out.push_str(&format!("{t},{},{u}\n", lat.x(j)));
        }
    }
    fs::write(file, out)?;
    Ok(())
}

fn build_fd_data(cfg: &ExperimentConfig, dump_dir: Option<&Path>) -> Result<FdData> {
    let lattice = build_lattice_from(cfg)?;
    if cfg.replicas == 0 {
        bail!("stochastic checks need replicas > 0");
    }
    let plan = SeedPlan::new(cfg.seed, cfg.replicas);
    let ctx = Spectral::new(lattice.clone());
    let window = SampledFunction::indicator(&ctx, 0.0, 1.0);
    let n_obs = lattice.observation_steps().len();
    let out = run_replicas(cfg.replicas, |rep| {
        let path = simulate_fd_with(&lattice, &plan, rep, &FdOptions::default())?;
        let mut fns = Vec::with_capacity(n_obs);
        for i in 0..n_obs {
            fns.push(path.functional(&window, i)?);
        }
        if let Some(dir) = dump_dir {
            dump_density_csv(dir, "fd", &path)
                .map_err(|e| sbm_core::Error::Lattice(format!("field dump failed: {e}")))?;
        }
        Ok((fns, path.clamp_fraction()))
    })?;
    let mean_clamp = out.iter().map(|(_, c)| *c).sum::<f64>() / out.len() as f64;
    Ok(FdData {
        obs_times: lattice.observation_times(),
        lattice,
        functionals: out.into_iter().map(|(f, _)| f).collect(),
        mean_clamp_fraction: mean_clamp,
    })
}

fn build_particle_data(cfg: &ExperimentConfig, dump_dir: Option<&Path>) -> Result<ParticleData> {
    let lattice = build_lattice_from(cfg)?;
    if cfg.replicas == 0 {
        bail!("stochastic checks need replicas > 0");
    }
    let section = cfg
        .particles
        .as_ref()
        .ok_or_else(|| anyhow!("particle checks need a [particles] section"))?;
    let options = ParticleOptions {
        mass_resolution: section.mass_resolution,
        cap_factor: section.cap_factor,
    };
    let plan = SeedPlan::new(cfg.seed, cfg.replicas);
    let ctx = Spectral::new(lattice.clone());
    let window = SampledFunction::indicator(&ctx, 0.0, 1.0);
    let n_obs = lattice.observation_steps().len();
    let out = run_replicas(cfg.replicas, |rep| {
        let ens = simulate_particles(&lattice, &plan, rep, &options)?;
        let mut fns = Vec::with_capacity(n_obs);
        let mut masses = Vec::with_capacity(n_obs);
        for i in 0..n_obs {
            fns.push(ens.functional(&window, i)?);
            masses.push(ens.total_mass(i));
        }
        if let Some(dir) = dump_dir {
            dump_density_csv(dir, "particles", &ens.density_path())
                .map_err(|e| sbm_core::Error::Lattice(format!("field dump failed: {e}")))?;
        }
        Ok((fns, masses))
    })?;
    Ok(ParticleData {
        obs_times: lattice.observation_times(),
        functionals: out.iter().map(|(f, _)| f.clone()).collect(),
        masses: out.into_iter().map(|(_, m)| m).collect(),
        mass_resolution: section.mass_resolution,
        branch_prob: section.mass_resolution * lattice.dt(),
        length: lattice.length(),
    })
}

fn build_sheet_data(cfg: &ExperimentConfig, dump_dir: Option<&Path>) -> Result<SheetData> {
    let lattice = build_lattice_from(cfg)?;
    if cfg.replicas == 0 {
        bail!("stochastic checks need replicas > 0");
    }
    let section = cfg
        .sheet
        .as_ref()
        .ok_or_else(|| anyhow!("sheet checks need a [sheet] section"))?;
    let grid = SheetGrid::new(section.grid_t.clone(), section.grid_x.clone())?;
    for &t in grid.times() {
        if t > 0.0 && lattice.step_of_time(t).is_none() {
            bail!("sheet grid time {t} is not an observation time of the lattice");
        }
    }
    let plan = SeedPlan::new(cfg.seed, cfg.replicas);
    let scale_n = section.scale_n;
    let samples = run_replicas(cfg.replicas, |rep| {
        let path = simulate_fd_with(&lattice, &plan, rep, &FdOptions::default())?;
        if let Some(dir) = dump_dir {
            dump_density_csv(dir, "sheet_fd", &path)
                .map_err(|e| sbm_core::Error::Lattice(format!("field dump failed: {e}")))?;
        }
        compute_sheet(&path, scale_n, &grid)
    })?;
    let ctx = Spectral::new(lattice);
    Ok(SheetData {
        grid,
        samples,
        ctx,
        scale_n,
    })
}

fn write_check_csv(dir: &Path, name: &str, report: &CheckReport) -> Result<()> {
    let mut out =
        String::from("test_name,params,estimate,se,target_finite_n,target_limit,verdict\n");
    let fmt = |v: &Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for row in &report.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            name,
            row.params,
            fmt(&row.estimate),
            fmt(&row.se),
            fmt(&row.target_finite_n),
            fmt(&row.target_limit),
            if row.pass { "pass" } else { "fail" }
        ));
    }
    fs::write(dir.join(format!("{name}.csv")), out)?;
    Ok(())
}

/// Runs the experiment; returns `true` when every check passed.
pub fn run(config_path: &Path, flags: &RunFlags) -> Result<bool> {
    let started = Instant::now();
    let started_unix = SystemTime::now()
        .duration_since(SystemTime::UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0);

    let text = fs::read_to_string(config_path)
        .with_context(|| format!("reading config {}", config_path.display()))?;
    let mut cfg = config::parse(&text)?;
    if let Some(r) = flags.replicas {
        cfg.replicas = r;
    }
    if let Some(s) = flags.seed {
        cfg.seed = s;
    }

    let requested: Vec<&'static checks::CheckDef> = cfg
        .checks
        .iter()
        .map(|name| {
            checks::find(name).ok_or_else(|| {
                anyhow!("unknown check `{name}`; `sbm-lab list-checks` shows the registry")
            })
        })
        .collect::<Result<_>>()?;

    let mut needs = Needs::default();
    for c in &requested {
        needs.fd |= c.needs.fd;
        needs.particles |= c.needs.particles;
        needs.sheet |= c.needs.sheet;
    }
    if needs.fd && !matches!(cfg.backend, BackendChoice::Fd | BackendChoice::Both) {
        bail!("requested checks need the fd backend, but backend = particles");
    }
    if needs.particles && !matches!(cfg.backend, BackendChoice::Particles | BackendChoice::Both) {
        bail!("requested checks need the particle backend, but backend = fd");
    }

    let out_dir = PathBuf::from(&cfg.output_dir);
    fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating output dir {}", out_dir.display()))?;
    let fields_dir = out_dir.join("fields");
    let dump_dir = flags.dump_fields.then_some(fields_dir.as_path());

    let fd = if needs.fd {
        Some(build_fd_data(&cfg, dump_dir)?)
    } else {
        None
    };
    let particles = if needs.particles {
        Some(build_particle_data(&cfg, dump_dir)?)
    } else {
        None
    };
    let sheet = if needs.sheet {
        Some(build_sheet_data(&cfg, dump_dir)?)
    } else {
        None
    };

    let inputs = RunInputs {
        cfg: &cfg,
        fd: fd.as_ref(),
        particles: particles.as_ref(),
        sheet: sheet.as_ref(),
    };

    let mut summaries = Vec::new();
    let mut all_pass = true;
    for def in &requested {
        let report = (def.run)(&inputs).with_context(|| format!("running check {}", def.name))?;
        let pass = report.pass();
        all_pass &= pass;
        println!(
            "{} {} [{}] ({} rows, {} failed)",
            if pass { "PASS" } else { "FAIL" },
            def.name,
            def.anchor,
            report.rows.len(),
            report.failed_rows()
        );
        write_check_csv(&out_dir, def.name, &report)?;
        summaries.push(CheckSummary {
            name: def.name.to_string(),
            anchor: def.anchor.to_string(),
            pass,
            rows: report.rows.len(),
            failed_rows: report.failed_rows(),
        });
    }

    let summary = Summary {
        experiment: cfg.name.clone(),
        seed: cfg.seed,
        replicas: cfg.replicas,
        pass: all_pass,
        checks: summaries,
    };
    let mut summary_bytes = serde_json::to_vec_pretty(&summary)?;
    summary_bytes.push(b'\n');
    fs::write(out_dir.join("summary.json"), summary_bytes)?;

    let manifest = Manifest {
        experiment: cfg.name.clone(),
        config_path: config_path.display().to_string(),
        config: config::serialize(&cfg),
        version: env!("CARGO_PKG_VERSION").to_string(),
        started_unix_s: started_unix,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    let mut manifest_bytes = serde_json::to_vec_pretty(&manifest)?;
    manifest_bytes.push(b'\n');
    fs::write(out_dir.join("manifest.json"), manifest_bytes)?;

    Ok(all_pass)
}
