//! File formats: JSON for measures, couplings, and reports; CSV for
//! grid-valued data (maps, barrier lines, trajectories).
//!
//! JSON floats go through serde_json's shortest round-trip formatting and
//! CSV floats are written with 17 significant digits, so both re-read to
//! bit-identical values. CSV files carry their manifest in a leading `#`
//! comment line.

use crate::manifest::RunManifest;
use anyhow::{bail, Context, Result};
use motkit::coupling::Coupling;
use motkit::curtain::TMaps;
use motkit::skorokhod::{Barrier, LineFamily};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

/// 17 significant digits: enough to reproduce any f64 exactly.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CouplingFile {
    pub manifest: RunManifest,
    pub entries: Vec<CouplingEntry>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CouplingEntry {
    pub x: f64,
    pub y: f64,
    pub w: f64,
}

pub fn write_coupling_json(path: &Path, pi: &Coupling, manifest: &RunManifest) -> Result<()> {
    let file = CouplingFile {
        manifest: manifest.clone(),
        entries: pi
            .entries()
            .iter()
            .map(|e| CouplingEntry {
                x: e.x,
                y: e.y,
                w: e.w,
            })
            .collect(),
    };
    write_json(path, &file)
}

pub fn read_coupling_json(path: &Path) -> Result<(Coupling, RunManifest)> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading coupling {}", path.display()))?;
    let file: CouplingFile = serde_json::from_str(&text)
        .with_context(|| format!("parsing coupling {}", path.display()))?;
    let pi = Coupling::new(file.entries.iter().map(|e| (e.x, e.y, e.w)).collect())?;
    Ok((pi, file.manifest))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = std::fs::File::create(path)
        .with_context(|| format!("creating {}", path.display()))?;
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

fn manifest_comment(manifest: &RunManifest) -> Result<String> {
    Ok(format!("# manifest: {}", serde_json::to_string(manifest)?))
}

pub fn write_tmaps_csv(path: &Path, t: &TMaps, manifest: &RunManifest) -> Result<()> {
    let mut out = String::new();
    out.push_str(&manifest_comment(manifest)?);
    out.push_str("\nx,t_down,t_up,q\n");
    for i in 0..t.len() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_f64(t.grid()[i]),
            fmt_f64(t.t_down()[i]),
            fmt_f64(t.t_up()[i]),
            fmt_f64(t.q()[i]),
        ));
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

pub fn read_tmaps_csv(path: &Path) -> Result<TMaps> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading maps {}", path.display()))?;
    let mut grid = Vec::new();
    let mut t_down = Vec::new();
    let mut t_up = Vec::new();
    let mut q = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('x') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            bail!("line {}: expected 4 columns, got {}", ln + 1, fields.len());
        }
        let parse = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .with_context(|| format!("line {}: bad float {s:?}", ln + 1))
        };
        grid.push(parse(fields[0])?);
        t_down.push(parse(fields[1])?);
        t_up.push(parse(fields[2])?);
        q.push(parse(fields[3])?);
    }
    Ok(TMaps::new(grid, t_down, t_up, q)?)
}

pub fn write_barrier_csv(path: &Path, barrier: &Barrier, manifest: &RunManifest) -> Result<()> {
    let mut out = String::new();
    out.push_str(&manifest_comment(manifest)?);
    out.push_str("\nthreshold,height,family\n");
    for line in barrier.lines() {
        let family = match line.family {
            LineFamily::Up => "up",
            LineFamily::Down => "down",
            LineFamily::Stay => "stay",
        };
        out.push_str(&format!(
            "{},{},{family}\n",
            fmt_f64(line.threshold),
            fmt_f64(line.height),
        ));
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

/// Phase-plane trajectories `(B_t - B_0, B_t)`, one row per step.
pub fn write_trajectories_csv(
    path: &Path,
    trajectories: &[Vec<f64>],
    dt: f64,
    manifest: &RunManifest,
) -> Result<()> {
    let mut out = String::new();
    out.push_str(&manifest_comment(manifest)?);
    out.push_str("\npath,t,displacement,level\n");
    for (id, path_vals) in trajectories.iter().enumerate() {
        let start = path_vals.first().copied().unwrap_or(0.0);
        for (step, &b) in path_vals.iter().enumerate() {
            out.push_str(&format!(
                "{id},{},{},{}\n",
                fmt_f64(step as f64 * dt),
                fmt_f64(b - start),
                fmt_f64(b),
            ));
        }
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}
