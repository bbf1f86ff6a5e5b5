//! Command-line surface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::grid::GridSpec;

#[derive(Parser, Debug)]
#[command(name = "lopt", version, about = "Exact perturbation orders of anharmonic oscillators and their large-order asymptotics")]
pub struct Cli {
    /// Potential file, e.g. {"coeffs": {"4": "-1"}}. Defaults to V = Q^2/2 - Q^4.
    #[arg(long, global = true)]
    pub potential: Option<PathBuf>,

    /// Working precision in bits (>= 64). Overrides LOPT_PRECISION_BITS.
    #[arg(long, global = true)]
    pub precision: Option<u32>,

    /// Write CSV here instead of standard output.
    #[arg(long, short = 'o', global = true)]
    pub output: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Exact orders and energy corrections.
    Series(SeriesArgs),
    /// Exact A_k(xi) against the asymptotic exponent A(xi).
    #[command(name = "curve-A")]
    CurveA(CurveArgs),
    /// Exact M_k(xi) against the asymptotic prefactor.
    #[command(name = "curve-M")]
    CurveM(CurveArgs),
    /// Rescaled orders at fixed x against the limiting profile.
    #[command(name = "fixed-x")]
    FixedX(FixedXArgs),
    /// Exact energy corrections over their large-order asymptote.
    #[command(name = "eigen-ratio")]
    EigenRatio(EigenRatioArgs),
    /// Exact matrix elements against their large-order asymptote.
    Matelem(MatelemArgs),
    /// Exact density-matrix orders against the Laplace prediction.
    Density(DensityArgs),
    /// (kappa, eta) curves at fixed p_kappa along the trajectory.
    Trajectories(TrajectoriesArgs),
    /// Run the verification suite; exits 1 if any check fails.
    Verify,
}

#[derive(Args, Debug)]
pub struct SeriesArgs {
    /// Level n.
    #[arg(long, default_value_t = 0)]
    pub n: u32,
    /// Highest order K (<= 200).
    #[arg(long = "k-max")]
    pub k_max: u32,
    /// Emit every polynomial coefficient instead of one row per order.
    #[arg(long)]
    pub coefficients: bool,
}

#[derive(Args, Debug)]
pub struct CurveArgs {
    #[arg(long, default_value_t = 0)]
    pub n: u32,
    /// Orders, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub k: Vec<u32>,
    /// Scaled arguments as min:max:points or a comma list.
    #[arg(long)]
    pub xi: GridSpec,
}

#[derive(Args, Debug)]
pub struct FixedXArgs {
    #[arg(long, default_value_t = 0)]
    pub n: u32,
    #[arg(long, value_delimiter = ',', required = true)]
    pub k: Vec<u32>,
    /// Arguments as min:max:points or a comma list.
    #[arg(long, default_value = "0:2:41")]
    pub x: GridSpec,
}

#[derive(Args, Debug)]
pub struct EigenRatioArgs {
    #[arg(long, default_value_t = 0)]
    pub n: u32,
    #[arg(long = "k-max")]
    pub k_max: u32,
}

#[derive(Args, Debug)]
pub struct MatelemArgs {
    #[arg(long, default_value_t = 0)]
    pub n1: u32,
    #[arg(long, default_value_t = 0)]
    pub n2: u32,
    /// Power of x.
    #[arg(long, default_value_t = 2)]
    pub m1: u32,
    /// Power of -d/dx.
    #[arg(long, default_value_t = 0)]
    pub m2: u32,
    #[arg(long = "k-max")]
    pub k_max: u32,
    /// Euclidean times; replaces x^m1 by x(tau_1)...x(tau_m) in the asymptote column.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub shifts: Option<Vec<String>>,
}

#[derive(Args, Debug)]
pub struct DensityArgs {
    #[arg(long, default_value_t = 0)]
    pub n1: u32,
    #[arg(long, default_value_t = 0)]
    pub n2: u32,
    /// k / N.
    #[arg(long, default_value = "1")]
    pub kappa: String,
    /// x1 / sqrt(N).
    #[arg(long)]
    pub eta: String,
    /// x2 / sqrt(N); defaults to eta (the diagonal).
    #[arg(long)]
    pub eta2: Option<String>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub k: Vec<u32>,
}

#[derive(Args, Debug)]
pub struct TrajectoriesArgs {
    /// Values of p_kappa, comma separated.
    #[arg(long = "p-kappa", value_delimiter = ',', allow_hyphen_values = true, default_value = "-1,0,1")]
    pub p_kappa: Vec<String>,
    /// Keep every stride-th trajectory sample.
    #[arg(long, default_value_t = 8)]
    pub stride: usize,
}
