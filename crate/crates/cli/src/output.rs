//! Files written by the commands. Floats use Rust's shortest round-trip
//! formatting so identical runs give byte-identical output.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};

use multimesh::analysis::eval;
use multimesh::{CutTopology, MultimeshFunction, Point2};

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    write_file(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

/// `(x, y, u)` on an `n × n` grid over the bounding box of the background,
/// leaving out points inside holes.
pub fn probe_grid(topo: &CutTopology, u: &MultimeshFunction, n: usize) -> Result<Vec<[f64; 3]>> {
    let bb = topo.parts()[0].predomain.bbox();
    let voids: Vec<_> = topo.parts().iter().filter_map(|p| p.void.as_ref()).collect();
    let step = |lo: f64, hi: f64, i: usize| if n > 1 { lo + (hi - lo) * i as f64 / (n - 1) as f64 } else { 0.5 * (lo + hi) };
    let mut out = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            let x = Point2::new(step(bb.min.x, bb.max.x, i), step(bb.min.y, bb.max.y, j));
            if voids.iter().any(|v| v.contains_strict(x, 1e-12)) {
                continue;
            }
            out.push([x.x, x.y, eval(u, topo, x)?]);
        }
    }
    Ok(out)
}

pub fn probe_csv(points: &[[f64; 3]]) -> String {
    let mut s = String::from("x,y,u\n");
    for [x, y, u] in points {
        writeln!(s, "{x:e},{y:e},{u:e}").unwrap();
    }
    s
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |v| format!("{v:e}"))
}
