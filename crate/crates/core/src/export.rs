//! CSV and binary dumps of weight and space-time fields.
//!
//! Binary layout, little-endian throughout:
//!
//! | bytes | content |
//! |-------|---------|
//! | 4 | magic `CLAB` |
//! | 4 | format version, `u32` |
//! | 4 | rank `d`, `u32` |
//! | 8·d | dimensions, `u64` each |
//! | 8·∏dims | values, `f64`, row-major |
//!
//! Weight dumps have dims `[n_t, n_nodes, 8]` with the eight CSV columns in
//! order. Field dumps have dims `[n_comp, n_t, n_r, n_theta]`.

use std::io::{Read, Write};

use crate::geometry::grid::PolarGrid;
use crate::geometry::weights::WeightFields;
use crate::pde::field::SpaceTimeField;
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"CLAB";
pub const FORMAT_VERSION: u32 = 1;

pub const WEIGHT_COLUMNS: [&str; 8] = ["t", "r", "theta", "psi", "phi", "alpha", "phi_tilde", "alpha_tilde"];
pub const FIELD_COLUMNS: [&str; 5] = ["component", "t", "r", "theta", "value"];

/// A decoded binary dump.
#[derive(Clone, Debug, PartialEq)]
pub struct Dump {
    pub version: u32,
    pub dims: Vec<usize>,
    pub values: Vec<f64>,
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn weight_row(w: &WeightFields, grid: &PolarGrid, m: usize, k: usize) -> [f64; 8] {
    let (r, th) = grid.polar(k);
    [grid.time(m), r, th, w.psi[k], w.phi(m, k), w.alpha(m, k), w.phi_tilde(m, k), w.alpha_tilde(m, k)]
}

fn check_weights(w: &WeightFields, grid: &PolarGrid) -> Result<()> {
    if w.n_t != grid.n_t || w.n_nodes != grid.n_nodes() {
        return Err(Error::WeightGridMismatch(format!("weights are {}x{}, grid is {}x{}", w.n_t, w.n_nodes, grid.n_t, grid.n_nodes())));
    }
    Ok(())
}

/// One row per space-time node. The endpoint slices carry `phi = inf` and
/// `alpha = -inf`.
pub fn write_weights_csv<W: Write>(w: &WeightFields, grid: &PolarGrid, out: W) -> Result<()> {
    check_weights(w, grid)?;
    let mut wr = csv::Writer::from_writer(out);
    wr.write_record(WEIGHT_COLUMNS).map_err(csv_err)?;
    for m in 0..w.n_t {
        for k in 0..w.n_nodes {
            wr.write_record(weight_row(w, grid, m, k).iter().map(|v| format!("{v:e}"))).map_err(csv_err)?;
        }
    }
    wr.flush()?;
    Ok(())
}

pub fn write_weights_binary<W: Write>(w: &WeightFields, grid: &PolarGrid, out: W) -> Result<()> {
    check_weights(w, grid)?;
    let mut values = Vec::with_capacity(w.n_t * w.n_nodes * 8);
    for m in 0..w.n_t {
        for k in 0..w.n_nodes {
            values.extend_from_slice(&weight_row(w, grid, m, k));
        }
    }
    write_dump(out, &[w.n_t, w.n_nodes, 8], &values)
}

/// One row per component and space-time node.
pub fn write_field_csv<W: Write>(f: &SpaceTimeField, grid: &PolarGrid, out: W) -> Result<()> {
    f.check_grid(grid)?;
    let mut wr = csv::Writer::from_writer(out);
    wr.write_record(FIELD_COLUMNS).map_err(csv_err)?;
    for c in 0..f.n_comp {
        for m in 0..f.n_t {
            for k in 0..f.n_nodes {
                let (r, th) = grid.polar(k);
                wr.write_record(&[
                    c.to_string(),
                    format!("{:e}", grid.time(m)),
                    format!("{r:e}"),
                    format!("{th:e}"),
                    format!("{:e}", f.get(c, m, k)),
                ])
                .map_err(csv_err)?;
            }
        }
    }
    wr.flush()?;
    Ok(())
}

pub fn write_field_binary<W: Write>(f: &SpaceTimeField, grid: &PolarGrid, out: W) -> Result<()> {
    f.check_grid(grid)?;
    write_dump(out, &[f.n_comp, f.n_t, grid.n_r, grid.n_theta], &f.values)
}

/// Rebuild a field from a dump written by [`write_field_binary`].
pub fn read_field_binary<R: Read>(input: R, grid: &PolarGrid) -> Result<SpaceTimeField> {
    let d = read_dump(input)?;
    match d.dims[..] {
        [n_comp, n_t, n_r, n_theta] if n_t == grid.n_t && n_r == grid.n_r && n_theta == grid.n_theta => {
            Ok(SpaceTimeField { n_comp, n_t, n_nodes: n_r * n_theta, values: d.values })
        }
        _ => Err(Error::ShapeMismatch(format!("dump dims {:?} do not fit the grid", d.dims))),
    }
}

pub fn write_dump<W: Write>(mut out: W, dims: &[usize], values: &[f64]) -> Result<()> {
    if dims.iter().product::<usize>() != values.len() {
        return Err(Error::ShapeMismatch(format!("dims {dims:?} for {} values", values.len())));
    }
    out.write_all(MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&(dims.len() as u32).to_le_bytes())?;
    for &d in dims {
        out.write_all(&(d as u64).to_le_bytes())?;
    }
    for v in values {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_dump<R: Read>(mut input: R) -> Result<Dump> {
    let mut b4 = [0u8; 4];
    input.read_exact(&mut b4)?;
    if &b4 != MAGIC {
        return Err(Error::ShapeMismatch("missing CLAB magic".into()));
    }
    input.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != FORMAT_VERSION {
        return Err(Error::ShapeMismatch(format!("unsupported dump version {version}")));
    }
    input.read_exact(&mut b4)?;
    let rank = u32::from_le_bytes(b4) as usize;
    let mut b8 = [0u8; 8];
    let mut dims = Vec::with_capacity(rank);
    for _ in 0..rank {
        input.read_exact(&mut b8)?;
        dims.push(u64::from_le_bytes(b8) as usize);
    }
    let len: usize = dims.iter().product();
    let mut values = Vec::with_capacity(len);
    for _ in 0..len {
        input.read_exact(&mut b8)?;
        values.push(f64::from_le_bytes(b8));
    }
    Ok(Dump { version, dims, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::psi0::construct_psi0_radial;
    use crate::geometry::weights::{choose_shift_k, eval_weights};

    fn grid() -> PolarGrid {
        PolarGrid::new(1.0, 2.0, 5, 8, 1.0, 4).unwrap()
    }

    #[test]
    fn field_binary_round_trip() {
        let g = grid();
        let f = SpaceTimeField::from_fn(2, &g, |c, t, r, th| c as f64 + t * r * th.sin());
        let mut buf = Vec::new();
        write_field_binary(&f, &g, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"CLAB");
        assert_eq!(buf.len(), 12 + 4 * 8 + f.values.len() * 8);
        assert_eq!(read_field_binary(&buf[..], &g).unwrap(), f);
        assert!(read_dump(&b"XLAB"[..]).is_err());
    }

    #[test]
    fn field_csv_has_component_column() {
        let g = grid();
        let f = SpaceTimeField::from_fn(2, &g, |c, _, _, _| c as f64);
        let mut buf = Vec::new();
        write_field_csv(&f, &g, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "component,t,r,theta,value");
        assert_eq!(lines.len(), 1 + f.values.len());
        assert!(lines.last().unwrap().starts_with("1,"));
    }

    #[test]
    fn weights_exports_agree() {
        let g = grid();
        let psi0 = construct_psi0_radial(&g);
        let w = eval_weights(&psi0, &choose_shift_k(&psi0, 1.0).with_lambda(0.5), &g).unwrap();
        let mut csv_buf = Vec::new();
        write_weights_csv(&w, &g, &mut csv_buf).unwrap();
        let mut bin = Vec::new();
        write_weights_binary(&w, &g, &mut bin).unwrap();
        let dump = read_dump(&bin[..]).unwrap();
        assert_eq!(dump.dims, vec![g.n_t, g.n_nodes(), 8]);
        let mut rdr = csv::Reader::from_reader(&csv_buf[..]);
        assert_eq!(rdr.headers().unwrap().iter().collect::<Vec<_>>(), WEIGHT_COLUMNS);
        for (row, rec) in rdr.records().enumerate() {
            for (col, s) in rec.unwrap().iter().enumerate() {
                let v: f64 = s.parse().unwrap();
                let b = dump.values[row * 8 + col];
                assert!(v == b || (v - b).abs() <= 1e-14 * b.abs(), "row {row} col {col}");
            }
        }
    }
}
