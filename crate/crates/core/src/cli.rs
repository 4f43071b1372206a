//! Command-line front end.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{add_gaussian_noise, bounding_box_diagonal, PointCloud};
use crate::index::NeighborIndex;
use crate::io::{read_path, write_atomic, write_path};
use crate::metrics::{evaluate, DEFAULT_MSE_NEIGHBORS};
use crate::pipeline::{filter, filter_sampled, FilterParams, Scheme};
use crate::rpca::RpcaParams;
use crate::similarity::{build_descriptor_table_with, find_similar};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_IO: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "nlpf",
    version,
    about = "Non-local low-rank point cloud filtering"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Filter a noisy point cloud.
    Filter {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Patch size (neighbors per patch).
        #[arg(long)]
        k: usize,
        /// Descriptor distance threshold, in input units (or unit-diagonal units with --normalize).
        #[arg(long)]
        theta: f64,
        #[arg(long, default_value_t = 1)]
        iters: usize,
        /// 1: search similar patches every iteration; 2: reuse the first search.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
        scheme: u8,
        /// Fraction of points to filter; the rest are copied unchanged.
        #[arg(long)]
        sample: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write per-iteration timings and similar-set statistics here.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Scale to unit bounding-box diagonal before filtering and restore afterwards.
        #[arg(long)]
        normalize: bool,
    },
    /// Add isotropic Gaussian noise scaled by the bounding-box diagonal.
    Noise {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Standard deviation as a fraction of the bounding-box diagonal (0.005 = 0.5%).
        #[arg(long)]
        level: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compare a cloud against a reference.
    Metrics {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MSE_NEIGHBORS)]
        k: usize,
    },
    /// Dump the centers of the patches similar to one point.
    Similar {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        point: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        theta: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Maps library errors onto exit codes.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidParameter(_)
        | Error::PatchLargerThanCloud { .. }
        | Error::IndexOutOfRange { .. } => EXIT_USAGE,
        Error::EmptyInput
        | Error::NonFinitePoint(_)
        | Error::NonFiniteMatrix
        | Error::Parse { .. }
        | Error::Io { .. } => EXIT_IO,
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

struct Normalization {
    center: Vector3<f64>,
    scale: f64,
}

impl Normalization {
    fn fit(cloud: &PointCloud) -> Result<Self> {
        let (lo, hi) = cloud.bounds()?;
        let diag = bounding_box_diagonal(cloud)?;
        Ok(Self {
            center: (lo.coords + hi.coords) * 0.5,
            scale: if diag > 0.0 { diag } else { 1.0 },
        })
    }

    fn forward(&self, cloud: &PointCloud) -> Result<PointCloud> {
        cloud.map(|p| Point3::from((p.coords - self.center) / self.scale))
    }

    fn backward(&self, cloud: &PointCloud) -> Result<PointCloud> {
        cloud.map(|p| Point3::from(p.coords * self.scale + self.center))
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Filter {
            input,
            out,
            k,
            theta,
            iters,
            scheme,
            sample,
            seed,
            report,
            normalize,
        } => {
            let scheme = if scheme == 2 {
                Scheme::ReuseFirstSearch
            } else {
                Scheme::RefindEachIteration
            };
            let params = FilterParams::new(k, theta, iters, scheme);
            params.validate()?;
            match scheme {
                Scheme::RefindEachIteration => eprintln!(
                    "scheme 1: similar patches re-searched every iteration (suited to heavy noise)"
                ),
                Scheme::ReuseFirstSearch => eprintln!(
                    "scheme 2: first similar-patch search reused (faster, suited to light noise)"
                ),
            }
            let cloud = read_path(&input)?;
            let norm = if normalize {
                Some(Normalization::fit(&cloud)?)
            } else {
                None
            };
            let work = match &norm {
                Some(n) => n.forward(&cloud)?,
                None => cloud,
            };
            let (filtered, rep) = match sample {
                Some(f) => filter_sampled(&work, &params, f, seed)?,
                None => filter(&work, &params)?,
            };
            let filtered = match &norm {
                Some(n) => n.backward(&filtered)?,
                None => filtered,
            };
            write_path(&filtered, &out)?;
            if let Some(path) = report {
                write_atomic(&path, rep.to_text().as_bytes())?;
            }
            eprintln!(
                "filtered {} points in {:.3}s",
                filtered.len(),
                rep.total().as_secs_f64()
            );
            Ok(())
        }
        Command::Noise {
            input,
            out,
            level,
            seed,
        } => {
            if !(level >= 0.0 && level.is_finite()) {
                return Err(Error::invalid(format!(
                    "noise level must be non-negative, got {level}"
                )));
            }
            let cloud = read_path(&input)?;
            write_path(&add_gaussian_noise(&cloud, level, seed)?, &out)
        }
        Command::Metrics {
            reference,
            input,
            k,
        } => {
            if k == 0 {
                return Err(Error::invalid("--k must be at least 1"));
            }
            let r = read_path(&reference)?;
            let c = read_path(&input)?;
            let m = evaluate(&r, &c, k)?;
            println!("chamfer={} mse={}", m.chamfer, m.mse);
            println!(
                "chamfer_e-5={:.4} mse_e-3={:.4}",
                m.chamfer * 1e5,
                m.mse * 1e3
            );
            Ok(())
        }
        Command::Similar {
            input,
            point,
            k,
            theta,
            out,
        } => {
            if k < 3 {
                return Err(Error::invalid(format!("K must be at least 3, got {k}")));
            }
            if theta.is_nan() || theta <= 0.0 {
                return Err(Error::invalid(format!(
                    "theta must be positive, got {theta}"
                )));
            }
            let cloud = read_path(&input)?;
            if point >= cloud.len() {
                return Err(Error::IndexOutOfRange {
                    index: point,
                    n: cloud.len(),
                });
            }
            let index = NeighborIndex::build(&cloud)?;
            let table = build_descriptor_table_with(&cloud, k, &RpcaParams::default(), &index)?;
            let set = find_similar(point, &table, theta);
            let centers = PointCloud::new(
                set.member_indices
                    .iter()
                    .map(|&i| cloud.points()[i])
                    .collect(),
            )?;
            write_path(&centers, &out)?;
            eprintln!("{} similar patches", set.len());
            Ok(())
        }
    }
}
