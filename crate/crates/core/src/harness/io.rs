//! Delimited-text outputs. Floats use the shortest round-trip representation, so
//! identical states produce byte-identical files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::diagnostics::GreyPoint;
use super::problems::Problem;
use crate::dg::{DGField, Discretization, FluidField};
use crate::error::{Error, Result};
use crate::moments::{number_density, Conserved, Primitive};
use crate::timeint::Ledger;

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::Io(format!("{}: {e}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

pub const SNAPSHOT_COLUMNS: &str = "element,node,x1,x2,eps,E,F1,F2,F3,J,H1,H2,H3,gamma_over_E,N";

/// One row per phase-space node after a `#`-prefixed header naming the grid.
pub fn write_snapshot(
    path: &Path,
    problem: &Problem,
    disc: &Discretization,
    fluid: &FluidField,
    t: f64,
    u: &DGField,
    prims: &[Primitive],
) -> Result<()> {
    let mut w = create(path)?;
    let npe = disc.nodes_per_element();
    let ne = disc.n_energy_nodes();
    let mut body = || -> std::io::Result<()> {
        writeln!(w, "# radmoment snapshot")?;
        writeln!(w, "# problem={} time={t:e}", problem.kind)?;
        writeln!(w, "# {}", problem.grid_summary())?;
        writeln!(
            w,
            "# nodes_per_element={npe} energy_nodes={ne} space_nodes={}",
            disc.n_space_nodes()
        )?;
        writeln!(w, "{SNAPSHOT_COLUMNS}")?;
        for e in 0..disc.mesh.n_elements() {
            let (ks, ie) = disc.mesh.split(e);
            for a in 0..npe {
                let (p, q) = disc.unpack(a);
                let x = disc.x_node(ks, q);
                let eps = disc.energy_node(ie, p);
                let uu: &Conserved = &u.data[e * npe + a];
                let m = &prims[e * npe + a];
                let v = &fluid.velocity[ks * disc.spatial_nodes() + a / ne];
                let n = number_density(m, v, eps).map_or(f64::NAN, |r| r.0);
                writeln!(
                    w,
                    "{e},{a},{:e},{:e},{eps:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{n:e}",
                    x[0],
                    x[1],
                    uu.e,
                    uu.f[0],
                    uu.f[1],
                    uu.f[2],
                    m.j,
                    m.h[0],
                    m.h[1],
                    m.h[2],
                    uu.gamma() / uu.e,
                )?;
            }
        }
        w.flush()
    };
    body().map_err(io_err(path))
}

pub const GREY_COLUMNS: &str = "x1,x2,weight,J,E,D,N,F1,F2,F3,H1,H2,H3,eps_rms";

/// Energy-integrated moments, one row per spatial node.
pub fn write_grey(path: &Path, problem: &Problem, t: f64, grey: &[GreyPoint]) -> Result<()> {
    let mut w = create(path)?;
    let mut body = || -> std::io::Result<()> {
        writeln!(w, "# radmoment grey moments")?;
        writeln!(w, "# problem={} time={t:e}", problem.kind)?;
        writeln!(w, "# {}", problem.grid_summary())?;
        writeln!(w, "{GREY_COLUMNS}")?;
        for g in grey {
            writeln!(
                w,
                "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                g.x[0],
                g.x[1],
                g.weight,
                g.j,
                g.e,
                g.d,
                g.n,
                g.f[0],
                g.f[1],
                g.f[2],
                g.h[0],
                g.h[1],
                g.h[2],
                g.rms_energy()
            )?;
        }
        w.flush()
    };
    body().map_err(io_err(path))
}

pub const LEDGER_COLUMNS: &str = "step,t,E,F1,F2,F3,outflow_E,source_E,imbalance_E,residual";

/// Conservation time series: totals, accumulated boundary and source terms, and
/// the relative residual (total − initial + outflow − source)/reference.
pub struct LedgerWriter {
    w: BufWriter<File>,
    path: std::path::PathBuf,
}

impl LedgerWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut w = create(path)?;
        writeln!(w, "{LEDGER_COLUMNS}").map_err(io_err(path))?;
        Ok(Self {
            w,
            path: path.to_path_buf(),
        })
    }

    pub fn row(&mut self, step: usize, t: f64, total: &Conserved, ledger: &Ledger) -> Result<()> {
        let imb = ledger.imbalance(total);
        writeln!(
            self.w,
            "{step},{t:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            total.e,
            total.f[0],
            total.f[1],
            total.f[2],
            ledger.outflow.e,
            ledger.source.e,
            imb.e,
            ledger.residual(total)
        )
        .map_err(io_err(&self.path))
    }

    pub fn flush(&mut self) -> Result<()> {
        self.w.flush().map_err(io_err(&self.path))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::problems::ProblemKind;

    #[test]
    fn snapshot_header_and_rows() {
        let mut p = Problem::defaults(ProblemKind::Doppler, false);
        p.cells = [3, 1];
        p.energy_cells = 2;
        let (integ, u) = p.build().unwrap();
        let op = &integ.op;
        let mut cache = op.new_cache();
        op.recover_nodes(&u, &mut cache).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        write_snapshot(&path, &p, &op.disc, &op.fluid, 0.0, &u, &cache.nodes).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with('#'));
        assert!(lines[2].contains("energy_cells=2"));
        assert_eq!(lines[4], SNAPSHOT_COLUMNS);
        assert_eq!(lines.len(), 5 + op.disc.n_nodes());
        let cols = SNAPSHOT_COLUMNS.split(',').count();
        assert!(lines[5..].iter().all(|l| l.split(',').count() == cols));
        let j: f64 = lines[5].split(',').nth(9).unwrap().parse().unwrap();
        assert_eq!(j, 1e-40);
    }

    #[test]
    fn ledger_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ledger.csv");
        let mut lw = LedgerWriter::create(&path).unwrap();
        let l = Ledger::new(Conserved::new(2.0, [0.0; 3]));
        lw.row(1, 0.5, &Conserved::new(2.0, [0.0; 3]), &l).unwrap();
        lw.flush().unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(row.len(), LEDGER_COLUMNS.split(',').count());
        assert_eq!(row[0], "1");
        assert_eq!(row[9].parse::<f64>().unwrap(), 0.0);
    }
}
