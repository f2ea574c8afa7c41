//! Plain-text mesh format:
//!
//! ```text
//! ntrimesh 2
//! <node count>
//! <x> <y>            (17 significant digits)
//! <cell count>
//! <a> <b> <c>        (0-based node indices)
//! ```

use std::io::{BufRead, Write};

use super::TriMesh;
use crate::error::{Error, Result};
use crate::geom2d::Point2;

const HEADER: &str = "ntrimesh 2";

pub fn write_mesh<W: Write>(mesh: &TriMesh, mut w: W) -> Result<()> {
    writeln!(w, "{HEADER}")?;
    writeln!(w, "{}", mesh.nodes().len())?;
    for p in mesh.nodes() {
        writeln!(w, "{:.16e} {:.16e}", p.x, p.y)?;
    }
    writeln!(w, "{}", mesh.num_cells())?;
    for [a, b, c] in mesh.cells() {
        writeln!(w, "{a} {b} {c}")?;
    }
    Ok(())
}

pub fn read_mesh<R: BufRead>(r: R) -> Result<TriMesh> {
    let mut lines = r
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty()));
    let mut next = |what: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((n, Ok(l))) => Ok((n, l)),
            Some((_, Err(e))) => Err(e.into()),
            None => Err(Error::Parse {
                line: 0,
                msg: format!("unexpected end of file, expected {what}"),
            }),
        }
    };
    let perr = |line: usize, msg: String| Error::Parse { line, msg };

    let (n, header) = next("header")?;
    if header.trim() != HEADER {
        return Err(perr(n, format!("expected '{HEADER}', got '{}'", header.trim())));
    }
    let (n, count) = next("node count")?;
    let n_nodes: usize = count.trim().parse().map_err(|e| perr(n, format!("node count: {e}")))?;
    let mut nodes = Vec::with_capacity(n_nodes);
    for _ in 0..n_nodes {
        let (n, l) = next("node")?;
        let v: Vec<f64> = l
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| perr(n, format!("coordinate: {e}")))?;
        if v.len() != 2 {
            return Err(perr(n, format!("expected 2 coordinates, got {}", v.len())));
        }
        nodes.push(Point2::new(v[0], v[1]));
    }
    let (n, count) = next("cell count")?;
    let n_cells: usize = count.trim().parse().map_err(|e| perr(n, format!("cell count: {e}")))?;
    let mut cells = Vec::with_capacity(n_cells);
    for _ in 0..n_cells {
        let (n, l) = next("cell")?;
        let v: Vec<usize> = l
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| perr(n, format!("cell index: {e}")))?;
        if v.len() != 3 {
            return Err(perr(n, format!("expected 3 indices, got {}", v.len())));
        }
        cells.push([v[0], v[1], v[2]]);
    }
    TriMesh::new(nodes, cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom2d::rotate_rect;
    use crate::mesh::build_structured_mesh;

    #[test]
    fn round_trip_is_bit_exact() {
        let r = rotate_rect((0.2, 0.8, 0.3, 0.75), 23.0, None).unwrap();
        let m = build_structured_mesh(&r, 0.1).unwrap();
        let mut buf = Vec::new();
        write_mesh(&m, &mut buf).unwrap();
        let back = read_mesh(buf.as_slice()).unwrap();
        assert_eq!(back.cells(), m.cells());
        for (a, b) in back.nodes().iter().zip(m.nodes()) {
            assert_eq!(a.x.to_bits(), b.x.to_bits());
            assert_eq!(a.y.to_bits(), b.y.to_bits());
        }
        let mut again = Vec::new();
        write_mesh(&back, &mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn malformed_input() {
        assert!(read_mesh("nomesh\n".as_bytes()).is_err());
        assert!(read_mesh("ntrimesh 2\n3\n0 0\n1 0\n".as_bytes()).is_err());
        let bad = "ntrimesh 2\n3\n0 0\n1 0\n0 1\n1\n0 1 x\n";
        assert!(matches!(read_mesh(bad.as_bytes()), Err(Error::Parse { line: 7, .. })));
        let ok = "ntrimesh 2\n3\n0 0\n1 0\n0 1\n1\n0 1 2\n";
        assert_eq!(read_mesh(ok.as_bytes()).unwrap().num_cells(), 1);
    }
}
