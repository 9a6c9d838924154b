use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Ellipsoidal harmonics, Coulomb expansions and solvation energies in a
/// dielectric ellipsoid.
///
/// Lengths are in Å and charges in units of e. Energies are reported in
/// kcal/mol (e²/Å times 332.0637).
#[derive(Debug, Parser)]
#[command(name = "ellipsoidal", version)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// Semiaxes a,b,c with a > b > c > 0
    #[arg(long, global = true, value_parser = parse_triple, default_value = "2,1.5,1")]
    pub semiaxes: [f64; 3],
    /// Truncation degree N of every expansion
    #[arg(long, global = true, default_value_t = 12)]
    pub order: usize,
    /// Largest degree the Lamé table may build
    #[arg(long, global = true, default_value_t = ellipsoidal::lame1::DEFAULT_N_MAX)]
    pub n_max: usize,
    /// Interior (solute) dielectric
    #[arg(long, global = true, default_value_t = 4.0)]
    pub eps1: f64,
    /// Exterior (solvent) dielectric
    #[arg(long, global = true, default_value_t = 80.0)]
    pub eps2: f64,
    /// Charge file: one `x y z q` per line, `#` starts a comment
    #[arg(long, global = true)]
    pub charges: Option<PathBuf>,
    /// Starting Gauss-Legendre order per axis for normalization constants
    #[arg(long, global = true, default_value_t = ellipsoidal::harmonics::DEFAULT_GAMMA_ORDER)]
    pub gamma_order: usize,
    /// Relative tolerance of the second-kind integrals
    #[arg(long, global = true, default_value_t = ellipsoidal::lame2::DEFAULT_REL_TOL)]
    pub quad_rel_tol: f64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Output file; stdout when absent
    #[arg(long, global = true)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Cartesian to ellipsoidal coordinates with round-trip residuals
    Transform {
        /// Point x,y,z (repeatable)
        #[arg(long = "point", value_parser = parse_triple)]
        points: Vec<[f64; 3]>,
        /// Add an n×n×n grid in every octant, spanning 1.5 times the semiaxes
        #[arg(long)]
        brick: Option<usize>,
    },
    /// First-kind Lamé function of one degree and order at sample points
    Lame {
        #[arg(long)]
        degree: usize,
        /// 1-based order p in 1..=2n+1
        #[arg(long)]
        p: usize,
        /// Comma-separated sample values of s
        #[arg(long, value_delimiter = ',', required = true)]
        s: Vec<f64>,
    },
    /// Interior and exterior solid harmonics at a point, all degrees up to --order
    Harmonic {
        #[arg(long, value_parser = parse_triple)]
        point: [f64; 3],
    },
    /// Normalization constants gamma for all degrees up to --order
    Gamma,
    /// Degree-by-degree convergence of the Coulomb expansion
    Coulomb {
        #[arg(long, value_parser = parse_triple, default_value = "0,0,0.5")]
        source: [f64; 3],
        #[arg(long, value_parser = parse_triple, default_value = "0,0,2")]
        field: [f64; 3],
    },
    /// Reaction-field solvation energy of the charges in --charges
    Solvation,
    /// Solvation energy of a central unit charge as the ellipsoid tends to a unit sphere
    BornLimit {
        /// Semiaxes are (1+d, 1+d/5, 1+d/10) for each d
        #[arg(long, value_delimiter = ',', default_value = "1,0.3,0.1,0.03,0.01,0.003,0.001")]
        deltas: Vec<f64>,
    },
    /// Boundary-element energies over mesh refinements against the harmonic solution
    BemValidate {
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
        refinements: Vec<usize>,
        /// Write the finest mesh as a triangle soup
        #[arg(long)]
        #[serde(skip)]
        mesh_out: Option<PathBuf>,
    },
}

fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated numbers, got {s:?}"));
    }
    let mut out = [0.0; 3];
    for (o, p) in out.iter_mut().zip(&parts) {
        *o = p.parse().map_err(|e| format!("{p:?}: {e}"))?;
    }
    Ok(out)
}
