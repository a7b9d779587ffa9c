//! Gaussian-process sampler for boundary functions wrapped around the genome
//! perimeter, plus training-dataset generation.
//!
//! The kernel acts on the *periodic* arclength distance, so sampled traces
//! are continuous across the perimeter seam by construction.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fd::genome_solver_numeric;
use crate::field::BoundaryTrace;
use crate::sobol::SobolSequence;

pub const DATASET_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    SquaredExponential,
    PowerExponential,
}

/// Stationary kernel on perimeter arclength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    /// Marginal variance sigma^2.
    pub variance: f64,
    /// Lengthscale in arclength units (the unit genome's perimeter is 4).
    pub lengthscale: f64,
    /// Exponent for the power-exponential family, in [1, 2].
    pub power: f64,
    /// Diagonal nugget added before factorization.
    pub jitter: f64,
}

impl KernelSpec {
    pub fn squared_exponential(variance: f64, lengthscale: f64) -> Self {
        Self {
            family: KernelFamily::SquaredExponential,
            variance,
            lengthscale,
            power: 2.0,
            jitter: 1e-10,
        }
    }

    pub fn power_exponential(variance: f64, lengthscale: f64, power: f64) -> Self {
        Self {
            family: KernelFamily::PowerExponential,
            variance,
            lengthscale,
            power,
            jitter: 1e-10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.variance > 0.0) || !self.variance.is_finite() {
            return Err(Error::Config(format!(
                "kernel variance must be positive, got {}",
                self.variance
            )));
        }
        if !(self.lengthscale > 0.0) || !self.lengthscale.is_finite() {
            return Err(Error::Config(format!(
                "kernel lengthscale must be positive, got {}",
                self.lengthscale
            )));
        }
        if !(self.jitter > 0.0) || !self.jitter.is_finite() {
            return Err(Error::Config(format!(
                "kernel jitter must be positive, got {}",
                self.jitter
            )));
        }
        if !(1.0..=2.0).contains(&self.power) {
            return Err(Error::Config(format!(
                "kernel power must lie in [1, 2], got {}",
                self.power
            )));
        }
        Ok(())
    }
}

/// Covariance between two perimeter arclengths under the periodic distance
/// min(|s - s'|, perimeter - |s - s'|).
pub fn kernel_eval(spec: &KernelSpec, s: f64, s_other: f64, perimeter: f64) -> f64 {
    let raw = (s - s_other).abs() % perimeter;
    let d = raw.min(perimeter - raw);
    match spec.family {
        KernelFamily::SquaredExponential => {
            let z = d / spec.lengthscale;
            spec.variance * (-0.5 * z * z).exp()
        }
        KernelFamily::PowerExponential => {
            let z = d / spec.lengthscale;
            spec.variance * (-z.powf(spec.power)).exp()
        }
    }
}

/// In-place lower Cholesky factorization. Returns false when the matrix is
/// not positive definite at working precision.
fn cholesky_in_place(a: &mut [f64], n: usize) -> bool {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if d <= 0.0 || !d.is_finite() {
            return false;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in (j + 1)..n {
            let mut v = a[i * n + j];
            for k in 0..j {
                v -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = v / d;
        }
    }
    // Zero the strict upper triangle so the factor can be used directly.
    for i in 0..n {
        for j in (i + 1)..n {
            a[i * n + j] = 0.0;
        }
    }
    true
}

/// Builds the trace covariance, factorizes it (escalating jitter x10 up to 3
/// retries), and returns L z for a standard-normal z from the seeded stream.
pub fn sample_trace(
    spec: &KernelSpec,
    edge_length: f64,
    n_per_edge: usize,
    seed: u64,
) -> Result<BoundaryTrace> {
    spec.validate()?;
    let n = 4 * n_per_edge;
    let perimeter = 4.0 * edge_length;
    let step = edge_length / n_per_edge as f64;

    let mut cov = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = kernel_eval(spec, i as f64 * step, j as f64 * step, perimeter);
            cov[i * n + j] = v;
            cov[j * n + i] = v;
        }
    }

    let mut factor = None;
    let mut jitter = spec.jitter;
    for _ in 0..4 {
        let mut attempt = cov.clone();
        for i in 0..n {
            attempt[i * n + i] += jitter;
        }
        if cholesky_in_place(&mut attempt, n) {
            factor = Some(attempt);
            break;
        }
        jitter *= 10.0;
    }
    let l = factor.ok_or_else(|| {
        Error::Numerical(format!(
            "covariance Cholesky failed even with jitter {jitter:e}"
        ))
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let values: Vec<f64> = (0..n)
        .map(|i| (0..=i).map(|k| l[i * n + k] * z[k]).sum())
        .collect();
    BoundaryTrace::new(values, edge_length, n_per_edge)
}

/// One training record: a boundary trace plus interior data points.
#[derive(Debug, Clone)]
pub struct TrainingSample {
    pub trace: BoundaryTrace,
    /// (x, y, u) triples in genome-local coordinates.
    pub data_points: Vec<(f64, f64, f64)>,
    pub sample_id: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub n_samples: usize,
    pub n_data_points: usize,
    pub kernel_family: KernelFamily,
    pub lengthscale_range: (f64, f64),
    pub variance_range: (f64, f64),
    /// Sampled only for the power-exponential family.
    pub power_range: (f64, f64),
    pub jitter: f64,
    pub genome_edge: f64,
    /// Grid cells per genome edge; trace points sit on boundary vertices.
    pub resolution: usize,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            n_samples: 100,
            n_data_points: 100,
            kernel_family: KernelFamily::SquaredExponential,
            lengthscale_range: (0.3, 3.0),
            variance_range: (0.25, 4.0),
            power_range: (1.0, 2.0),
            jitter: 1e-10,
            genome_edge: 1.0,
            resolution: crate::field::N_PER_EDGE,
            seed: 0,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::Config("n_samples must be positive".into()));
        }
        let interior = (self.resolution - 1) * (self.resolution - 1);
        if self.n_data_points > interior {
            return Err(Error::Config(format!(
                "n_data_points {} exceeds interior vertex count {interior}",
                self.n_data_points
            )));
        }
        for (name, (lo, hi)) in [
            ("lengthscale_range", self.lengthscale_range),
            ("variance_range", self.variance_range),
        ] {
            if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                return Err(Error::Config(format!("{name} invalid: ({lo}, {hi})")));
            }
        }
        let (plo, phi) = self.power_range;
        if !(1.0..=2.0).contains(&plo) || !(1.0..=2.0).contains(&phi) || phi < plo {
            return Err(Error::Config(format!(
                "power_range must lie within [1, 2]: ({plo}, {phi})"
            )));
        }
        if !(self.jitter > 0.0) {
            return Err(Error::Config(format!(
                "jitter must be positive, got {}",
                self.jitter
            )));
        }
        if self.resolution < 3 {
            return Err(Error::Config(format!(
                "resolution must be at least 3, got {}",
                self.resolution
            )));
        }
        Ok(())
    }

    /// Kernel for the k-th sample: hyperparameters from the k-th Sobol point
    /// scaled into the configured ranges.
    pub fn kernel_for_sample(&self, k: u64) -> KernelSpec {
        let dims = match self.kernel_family {
            KernelFamily::SquaredExponential => 2,
            KernelFamily::PowerExponential => 3,
        };
        let p = SobolSequence::point(k, dims);
        let scale = |t: f64, (lo, hi): (f64, f64)| lo + t * (hi - lo);
        KernelSpec {
            family: self.kernel_family,
            lengthscale: scale(p[0], self.lengthscale_range),
            variance: scale(p[1], self.variance_range),
            power: if dims == 3 {
                scale(p[2], self.power_range)
            } else {
                2.0
            },
            jitter: self.jitter,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub n_samples: usize,
    pub n_boundary_points: usize,
    pub n_data_points: usize,
    pub config: DatasetConfig,
}

/// In-memory dataset plus the manifest describing it.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub samples: Vec<TrainingSample>,
}

/// Generates `n_samples` records: GP trace, FD genome solve, and
/// `n_data_points` interior vertices chosen uniformly without replacement.
/// Per-sample randomness derives from `seed ^ sample_id`.
pub fn generate_dataset(config: &DatasetConfig) -> Result<Dataset> {
    config.validate()?;
    let n_per_edge = config.resolution;
    let samples: Vec<TrainingSample> = (0..config.n_samples as u64)
        .map(|k| {
            let spec = config.kernel_for_sample(k);
            let sample_seed = config.seed ^ k;
            let trace = sample_trace(&spec, config.genome_edge, n_per_edge, sample_seed)?;
            let field = genome_solver_numeric(&trace)?;
            let grid = field.grid();
            // Interior vertices, x fastest, then a seeded partial shuffle.
            let interior = (n_per_edge - 1) * (n_per_edge - 1);
            let mut indices: Vec<usize> = (0..interior).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(sample_seed.wrapping_add(1));
            for i in 0..config.n_data_points {
                let j = rng.random_range(i..indices.len());
                indices.swap(i, j);
            }
            let data_points = indices[..config.n_data_points]
                .iter()
                .map(|&idx| {
                    let i = idx % (n_per_edge - 1) + 1;
                    let j = idx / (n_per_edge - 1) + 1;
                    let (x, y) = grid.position(i, j);
                    (x, y, grid.at(i, j))
                })
                .collect();
            Ok(TrainingSample {
                trace,
                data_points,
                sample_id: k,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Dataset {
        manifest: DatasetManifest {
            format_version: DATASET_FORMAT_VERSION,
            n_samples: config.n_samples,
            n_boundary_points: 4 * n_per_edge,
            n_data_points: config.n_data_points,
            config: config.clone(),
        },
        samples,
    })
}

impl Dataset {
    /// Writes `manifest.json` and `samples.bin` into `dir`.
    ///
    /// `samples.bin` holds consecutive fixed-size little-endian f64 records:
    /// 4 * n_per_edge trace values, then n_data_points (x, y, u) triples.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let manifest_path = dir.join("manifest.json");
        let manifest = serde_json::to_string_pretty(&self.manifest)
            .map_err(|e| Error::Format(format!("manifest serialization: {e}")))?;
        std::fs::write(&manifest_path, manifest).map_err(|e| Error::io(&manifest_path, e))?;

        let bin_path = dir.join("samples.bin");
        let file = std::fs::File::create(&bin_path).map_err(|e| Error::io(&bin_path, e))?;
        let mut w = std::io::BufWriter::new(file);
        for s in &self.samples {
            for &v in s.trace.values() {
                w.write_all(&v.to_le_bytes())
                    .map_err(|e| Error::io(&bin_path, e))?;
            }
            for &(x, y, u) in &s.data_points {
                for v in [x, y, u] {
                    w.write_all(&v.to_le_bytes())
                        .map_err(|e| Error::io(&bin_path, e))?;
                }
            }
        }
        w.flush().map_err(|e| Error::io(&bin_path, e))?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let manifest_path = dir.join("manifest.json");
        let text =
            std::fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
        let manifest: DatasetManifest = serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("manifest parse: {e}")))?;
        if manifest.format_version != DATASET_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported dataset format version {}",
                manifest.format_version
            )));
        }
        let bin_path = dir.join("samples.bin");
        let file = std::fs::File::open(&bin_path).map_err(|e| Error::io(&bin_path, e))?;
        let mut r = std::io::BufReader::new(file);
        let n_trace = manifest.n_boundary_points;
        let record_len = n_trace + 3 * manifest.n_data_points;
        let mut buf = vec![0u8; record_len * 8];
        let mut samples = Vec::with_capacity(manifest.n_samples);
        for k in 0..manifest.n_samples {
            r.read_exact(&mut buf).map_err(|_| {
                Error::Format(format!(
                    "samples.bin truncated at record {k} of {}",
                    manifest.n_samples
                ))
            })?;
            let vals: Vec<f64> = buf
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            let trace = BoundaryTrace::new(
                vals[..n_trace].to_vec(),
                manifest.config.genome_edge,
                n_trace / 4,
            )?;
            let data_points = vals[n_trace..]
                .chunks_exact(3)
                .map(|t| (t[0], t[1], t[2]))
                .collect();
            samples.push(TrainingSample {
                trace,
                data_points,
                sample_id: k as u64,
            });
        }
        let mut rest = Vec::new();
        r.read_to_end(&mut rest).map_err(|e| Error::io(&bin_path, e))?;
        if !rest.is_empty() {
            return Err(Error::Format(format!(
                "samples.bin has {} trailing bytes",
                rest.len()
            )));
        }
        Ok(Self { manifest, samples })
    }
}
