//! Experiment configuration: a flat, diff-able key-value format with
//! `[section]` headers, `key = value` lines and `#` comments.
//!
//! Parsing is strict (unknown keys and duplicate keys are errors, anchored to
//! their line) and configurations round-trip through
//! [`serialize`]/[`parse`] unchanged.

use std::collections::BTreeMap;

use anyhow::{anyhow, bail, Context, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendChoice {
    Fd,
    Particles,
    Both,
}

impl BackendChoice {
    pub fn as_str(&self) -> &'static str {
        match self {
            BackendChoice::Fd => "fd",
            BackendChoice::Particles => "particles",
            BackendChoice::Both => "both",
        }
    }

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fd" => Ok(BackendChoice::Fd),
            "particles" => Ok(BackendChoice::Particles),
            "both" => Ok(BackendChoice::Both),
            other => bail!("unknown backend {other:?} (expected fd, particles or both)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeSection {
    pub length: f64,
    pub dx: f64,
    pub t_max: f64,
    pub observation_times: Vec<f64>,
    pub dt_factor: f64,
    pub max_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SheetSection {
    pub scale_n: f64,
    pub grid_t: Vec<f64>,
    pub grid_x: Vec<f64>,
    /// Subgrid for the covariance/centering verdicts (defaults to the full
    /// grid axes).
    pub cov_t: Option<Vec<f64>>,
    pub cov_x: Option<Vec<f64>>,
    /// When set, every empirical covariance must also sit within this
    /// absolute distance of the Brownian-sheet limit.
    pub limit_abs_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticlesSection {
    pub mass_resolution: f64,
    pub cap_factor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaplaceSection {
    pub times: Vec<f64>,
    pub thetas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FddSection {
    pub times: Vec<f64>,
    pub xs: Vec<f64>,
    pub thetas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HolderSection {
    pub spatial_t: f64,
    pub spatial_lags: Vec<f64>,
    pub temporal_x: f64,
    pub temporal_base: f64,
    pub temporal_lags: Vec<f64>,
    pub rect_t0: f64,
    pub rect_x0: f64,
    pub rect_lags: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureSection {
    /// Scales for the pair-integral convergence check.
    pub n_list: Vec<f64>,
    /// Scales for the iterated-exponent convergence check.
    pub exponent_n_list: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    pub replicas: usize,
    pub backend: BackendChoice,
    pub output_dir: String,
    pub checks: Vec<String>,
    pub lattice: Option<LatticeSection>,
    pub sheet: Option<SheetSection>,
    pub particles: Option<ParticlesSection>,
    pub laplace: Option<LaplaceSection>,
    pub fdd: Option<FddSection>,
    pub holder: Option<HolderSection>,
    pub quadrature: Option<QuadratureSection>,
}

struct Entry {
    value: String,
    line: usize,
    used: bool,
}

struct Sections {
    map: BTreeMap<String, BTreeMap<String, Entry>>,
    lines: BTreeMap<String, usize>,
}

impl Sections {
    fn parse(text: &str) -> Result<Self> {
        let mut map: BTreeMap<String, BTreeMap<String, Entry>> = BTreeMap::new();
        let mut lines = BTreeMap::new();
        let mut current: Option<String> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| anyhow!("line {line_no}: unterminated section header"))?
                    .trim()
                    .to_string();
                if name.is_empty() {
                    bail!("line {line_no}: empty section name");
                }
                if map.contains_key(&name) {
                    bail!("line {line_no}: duplicate section [{name}]");
                }
                lines.insert(name.clone(), line_no);
                map.insert(name.clone(), BTreeMap::new());
                current = Some(name);
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {line_no}: expected `key = value`"))?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            let section = current
                .as_ref()
                .ok_or_else(|| anyhow!("line {line_no}: `{key}` appears before any [section]"))?;
            let entries = map.get_mut(section).unwrap();
            if entries.contains_key(&key) {
                bail!("line {line_no}: duplicate key `{key}` in [{section}]");
            }
            entries.insert(
                key,
                Entry {
                    value,
                    line: line_no,
                    used: false,
                },
            );
        }
        Ok(Self { map, lines })
    }

    fn take(&mut self, section: &str, key: &str) -> Option<(String, usize)> {
        let entry = self.map.get_mut(section)?.get_mut(key)?;
        entry.used = true;
        Some((entry.value.clone(), entry.line))
    }

    fn required(&mut self, section: &str, key: &str) -> Result<(String, usize)> {
        self.take(section, key).ok_or_else(|| {
            anyhow!(
                "line {}: [{section}] is missing required key `{key}`",
                self.lines.get(section).copied().unwrap_or(0)
            )
        })
    }

    fn has(&self, section: &str) -> bool {
        self.map.contains_key(section)
    }

    fn check_unused(&self) -> Result<()> {
        for (section, entries) in &self.map {
            for (key, entry) in entries {
                if !entry.used {
                    bail!("line {}: unknown key `{key}` in [{section}]", entry.line);
                }
            }
        }
        Ok(())
    }
}

fn parse_f64(raw: &(String, usize)) -> Result<f64> {
    raw.0
        .parse::<f64>()
        .with_context(|| format!("line {}: `{}` is not a number", raw.1, raw.0))
}

fn parse_u64(raw: &(String, usize)) -> Result<u64> {
    raw.0
        .parse::<u64>()
        .with_context(|| format!("line {}: `{}` is not an integer", raw.1, raw.0))
}

fn parse_list_f64(raw: &(String, usize)) -> Result<Vec<f64>> {
    raw.0
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .with_context(|| format!("line {}: `{}` is not a number", raw.1, s.trim()))
        })
        .collect()
}

fn parse_list_str(raw: &(String, usize)) -> Vec<String> {
    raw.0
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

/// Parses a configuration, reporting the offending line on failure.
pub fn parse(text: &str) -> Result<ExperimentConfig> {
    let mut sec = Sections::parse(text)?;
    if !sec.has("experiment") {
        bail!("line 1: missing [experiment] section");
    }

    let name = sec.required("experiment", "name")?.0;
    let seed = match sec.take("experiment", "seed") {
        Some(raw) => parse_u64(&raw)?,
        None => bail!(
            "line {}: seed required (no entropy defaults)",
            sec.lines.get("experiment").copied().unwrap_or(1)
        ),
    };
    let replicas = match sec.take("experiment", "replicas") {
        Some(raw) => parse_u64(&raw)? as usize,
        None => 0,
    };
    let backend = match sec.take("experiment", "backend") {
        Some(raw) => BackendChoice::from_str(&raw.0).with_context(|| format!("line {}", raw.1))?,
        None => BackendChoice::Fd,
    };
    let output_dir = match sec.take("experiment", "output_dir") {
        Some(raw) => raw.0,
        None => format!("out/{name}"),
    };
    let checks_raw = sec.required("experiment", "checks")?;
    let checks = parse_list_str(&checks_raw);
    if checks.is_empty() {
        bail!("line {}: checks list is empty", checks_raw.1);
    }

    let lattice = if sec.has("lattice") {
        Some(LatticeSection {
            length: parse_f64(&sec.required("lattice", "length")?)?,
            dx: parse_f64(&sec.required("lattice", "dx")?)?,
            t_max: parse_f64(&sec.required("lattice", "t_max")?)?,
            observation_times: parse_list_f64(&sec.required("lattice", "observation_times")?)?,
            dt_factor: match sec.take("lattice", "dt_factor") {
                Some(raw) => parse_f64(&raw)?,
                None => 0.25,
            },
            max_steps: match sec.take("lattice", "max_steps") {
                Some(raw) => parse_u64(&raw)? as usize,
                None => 10_000_000,
            },
        })
    } else {
        None
    };

    let sheet = if sec.has("sheet") {
        Some(SheetSection {
            scale_n: parse_f64(&sec.required("sheet", "scale_n")?)?,
            grid_t: parse_list_f64(&sec.required("sheet", "grid_t")?)?,
            grid_x: parse_list_f64(&sec.required("sheet", "grid_x")?)?,
            cov_t: match sec.take("sheet", "cov_t") {
                Some(raw) => Some(parse_list_f64(&raw)?),
                None => None,
            },
            cov_x: match sec.take("sheet", "cov_x") {
                Some(raw) => Some(parse_list_f64(&raw)?),
                None => None,
            },
            limit_abs_tol: match sec.take("sheet", "limit_abs_tol") {
                Some(raw) => Some(parse_f64(&raw)?),
                None => None,
            },
        })
    } else {
        None
    };

    let particles = if sec.has("particles") {
        Some(ParticlesSection {
            mass_resolution: parse_f64(&sec.required("particles", "mass_resolution")?)?,
            cap_factor: match sec.take("particles", "cap_factor") {
                Some(raw) => parse_f64(&raw)?,
                None => 32.0,
            },
        })
    } else {
        None
    };

    let laplace = if sec.has("laplace") {
        Some(LaplaceSection {
            times: parse_list_f64(&sec.required("laplace", "times")?)?,
            thetas: parse_list_f64(&sec.required("laplace", "thetas")?)?,
        })
    } else {
        None
    };

    let fdd = if sec.has("fdd") {
        Some(FddSection {
            times: parse_list_f64(&sec.required("fdd", "times")?)?,
            xs: parse_list_f64(&sec.required("fdd", "xs")?)?,
            thetas: parse_list_f64(&sec.required("fdd", "thetas")?)?,
        })
    } else {
        None
    };

    let holder = if sec.has("holder") {
        Some(HolderSection {
            spatial_t: parse_f64(&sec.required("holder", "spatial_t")?)?,
            spatial_lags: parse_list_f64(&sec.required("holder", "spatial_lags")?)?,
            temporal_x: parse_f64(&sec.required("holder", "temporal_x")?)?,
            temporal_base: parse_f64(&sec.required("holder", "temporal_base")?)?,
            temporal_lags: parse_list_f64(&sec.required("holder", "temporal_lags")?)?,
            rect_t0: parse_f64(&sec.required("holder", "rect_t0")?)?,
            rect_x0: parse_f64(&sec.required("holder", "rect_x0")?)?,
            rect_lags: parse_list_f64(&sec.required("holder", "rect_lags")?)?,
        })
    } else {
        None
    };

    let quadrature = if sec.has("quadrature") {
        Some(QuadratureSection {
            n_list: match sec.take("quadrature", "n_list") {
                Some(raw) => parse_list_f64(&raw)?,
                None => vec![1.0, 10.0, 100.0, 1000.0],
            },
            exponent_n_list: match sec.take("quadrature", "exponent_n_list") {
                Some(raw) => parse_list_f64(&raw)?,
                None => vec![16.0, 64.0, 256.0],
            },
        })
    } else {
        None
    };

    sec.check_unused()?;

    Ok(ExperimentConfig {
        name,
        seed,
        replicas,
        backend,
        output_dir,
        checks,
        lattice,
        sheet,
        particles,
        laplace,
        fdd,
        holder,
        quadrature,
    })
}

fn fmt_list(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Canonical text form; `parse(serialize(c)) == c`.
pub fn serialize(cfg: &ExperimentConfig) -> String {
    let mut out = String::new();
    out.push_str("[experiment]\n");
    out.push_str(&format!("name = {}\n", cfg.name));
    out.push_str(&format!("seed = {}\n", cfg.seed));
    out.push_str(&format!("replicas = {}\n", cfg.replicas));
    out.push_str(&format!("backend = {}\n", cfg.backend.as_str()));
    out.push_str(&format!("output_dir = {}\n", cfg.output_dir));
    out.push_str(&format!("checks = {}\n", cfg.checks.join(", ")));

    if let Some(lat) = &cfg.lattice {
        out.push_str("\n[lattice]\n");
        out.push_str(&format!("length = {}\n", lat.length));
        out.push_str(&format!("dx = {}\n", lat.dx));
        out.push_str(&format!("t_max = {}\n", lat.t_max));
        out.push_str(&format!(
            "observation_times = {}\n",
            fmt_list(&lat.observation_times)
        ));
        out.push_str(&format!("dt_factor = {}\n", lat.dt_factor));
        out.push_str(&format!("max_steps = {}\n", lat.max_steps));
    }
    if let Some(sheet) = &cfg.sheet {
        out.push_str("\n[sheet]\n");
        out.push_str(&format!("scale_n = {}\n", sheet.scale_n));
        out.push_str(&format!("grid_t = {}\n", fmt_list(&sheet.grid_t)));
        out.push_str(&format!("grid_x = {}\n", fmt_list(&sheet.grid_x)));
        if let Some(cov_t) = &sheet.cov_t {
            out.push_str(&format!("cov_t = {}\n", fmt_list(cov_t)));
        }
        if let Some(cov_x) = &sheet.cov_x {
            out.push_str(&format!("cov_x = {}\n", fmt_list(cov_x)));
        }
        if let Some(tol) = sheet.limit_abs_tol {
            out.push_str(&format!("limit_abs_tol = {tol}\n"));
        }
    }
    if let Some(p) = &cfg.particles {
        out.push_str("\n[particles]\n");
        out.push_str(&format!("mass_resolution = {}\n", p.mass_resolution));
        out.push_str(&format!("cap_factor = {}\n", p.cap_factor));
    }
    if let Some(l) = &cfg.laplace {
        out.push_str("\n[laplace]\n");
        out.push_str(&format!("times = {}\n", fmt_list(&l.times)));
        out.push_str(&format!("thetas = {}\n", fmt_list(&l.thetas)));
    }
    if let Some(f) = &cfg.fdd {
        out.push_str("\n[fdd]\n");
        out.push_str(&format!("times = {}\n", fmt_list(&f.times)));
        out.push_str(&format!("xs = {}\n", fmt_list(&f.xs)));
        out.push_str(&format!("thetas = {}\n", fmt_list(&f.thetas)));
    }
    if let Some(h) = &cfg.holder {
        out.push_str("\n[holder]\n");
        out.push_str(&format!("spatial_t = {}\n", h.spatial_t));
        out.push_str(&format!("spatial_lags = {}\n", fmt_list(&h.spatial_lags)));
        out.push_str(&format!("temporal_x = {}\n", h.temporal_x));
        out.push_str(&format!("temporal_base = {}\n", h.temporal_base));
        out.push_str(&format!("temporal_lags = {}\n", fmt_list(&h.temporal_lags)));
        out.push_str(&format!("rect_t0 = {}\n", h.rect_t0));
        out.push_str(&format!("rect_x0 = {}\n", h.rect_x0));
        out.push_str(&format!("rect_lags = {}\n", fmt_list(&h.rect_lags)));
    }
    if let Some(q) = &cfg.quadrature {
        out.push_str("\n[quadrature]\n");
        out.push_str(&format!("n_list = {}\n", fmt_list(&q.n_list)));
        out.push_str(&format!(
            "exponent_n_list = {}\n",
            fmt_list(&q.exponent_n_list)
        ));
    }
    out
}
