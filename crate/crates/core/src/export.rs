//! CSV writers. Numbers use Rust's shortest round-trip formatting, so output
//! is byte-identical for identical inputs.

use std::io::{self, Write};

use crate::ensemble::EnsembleSummary;
use crate::fluid::FluidGrid;
use crate::sim::SimTrajectory;

pub const TRAJECTORY_HEADER: &str = "t,L";
pub const ENSEMBLE_HEADER: &str = "t,mean,std,min,max";
pub const FLUID_HEADER: &str = "t,l";
pub const GRID_HEADER: &str = "t,v,g";

pub fn write_trajectory<W: Write>(mut out: W, traj: &SimTrajectory) -> io::Result<()> {
    writeln!(out, "{TRAJECTORY_HEADER}")?;
    for (t, l) in traj.times.iter().zip(&traj.tip_counts) {
        writeln!(out, "{t},{l}")?;
    }
    out.flush()
}

pub fn write_ensemble<W: Write>(mut out: W, summary: &EnsembleSummary) -> io::Result<()> {
    writeln!(out, "{ENSEMBLE_HEADER}")?;
    for k in 0..summary.times.len() {
        writeln!(
            out,
            "{},{},{},{},{}",
            summary.times[k], summary.mean[k], summary.std[k], summary.min[k], summary.max[k]
        )?;
    }
    out.flush()
}

/// Writes every `stride`-th value of `l(t)`, always including the last.
pub fn write_fluid<W: Write>(mut out: W, grid: &FluidGrid, stride: usize) -> io::Result<()> {
    let stride = stride.max(1);
    writeln!(out, "{FLUID_HEADER}")?;
    let last = grid.l.len() - 1;
    for (n, l) in grid.l.iter().enumerate() {
        if n % stride == 0 || n == last {
            writeln!(out, "{},{l}", n as f64 * grid.step)?;
        }
    }
    out.flush()
}

/// Dumps the stored `g` snapshots as long-format rows.
pub fn write_grid<W: Write>(mut out: W, grid: &FluidGrid) -> io::Result<()> {
    writeln!(out, "{GRID_HEADER}")?;
    for snap in &grid.snapshots {
        for (i, g) in snap.g.iter().enumerate() {
            writeln!(out, "{},{},{g}", snap.time, i as f64 * grid.step)?;
        }
    }
    out.flush()
}
