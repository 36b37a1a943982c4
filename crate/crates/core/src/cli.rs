//! Command-line front end: `generate`, `embed`, `perturb` and `theorem2`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use faer::Mat;
use serde::Serialize;

use crate::datasets::{load_csv, load_matrix_csv, preimage_path, save_matrix_csv, Generator};
use crate::diagnostics::{
    linear_projection_diagnostic, perturbation_experiment, theorem2_check, theorem2_statistics,
    PerturbationConfig, PerturbationSummary, Theorem2Report,
};
use crate::embedding::{embed_with, EigenSolver};
use crate::error::{LleError, Result};
use crate::neighbors::{knn, max_radius};
use crate::weights::{assemble_weight_matrix, write_spectra_csv, WeightMethod, DEFAULT_DELTA};

pub const EXIT_OK: i32 = 0;
/// Input/output failures and failed verifications.
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DISCONNECTED: i32 = 3;
pub const EXIT_GENERAL_POSITION: i32 = 4;
pub const EXIT_NUMERICAL: i32 = 5;

/// Largest allowed growth of the pre-image ratio over its value at the smallest sample size.
pub const RATIO_GROWTH_LIMIT: f64 = 2.0;
/// Smallest acceptable improvement of the true pre-image over permuted ones.
pub const NULL_FACTOR_MIN: f64 = 10.0;

#[derive(Debug, Parser)]
#[command(name = "lle", version, about = "Locally linear embedding with low-dimensional neighborhood weights")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a synthetic manifold; writes the points and a sibling `.preimage.csv`.
    Generate(GenerateArgs),
    /// Compute an embedding and a JSON sidecar describing the run.
    Embed(EmbedArgs),
    /// Run the weight-perturbation experiment on the grid cross.
    Perturb(PerturbArgs),
    /// Evaluate the pre-image objective over a sweep of sample sizes.
    Theorem2(Theorem2Args),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorArg {
    Ring,
    Scurve,
    Swissroll,
}

impl From<GeneratorArg> for Generator {
    fn from(g: GeneratorArg) -> Self {
        match g {
            GeneratorArg::Ring => Generator::Ring,
            GeneratorArg::Scurve => Generator::Scurve,
            GeneratorArg::Swissroll => Generator::Swissroll,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Classical,
    Ldr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverArg {
    Auto,
    Dense,
    Lanczos,
}

impl From<SolverArg> for EigenSolver {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Auto => EigenSolver::Auto,
            SolverArg::Dense => EigenSolver::Dense,
            SolverArg::Lanczos => EigenSolver::ShiftInvertLanczos,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    pub name: GeneratorArg,
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Points CSV; defaults to `<name>.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    /// Points CSV, one point per line. A sibling `.preimage.csv` is used for diagnostics if present.
    #[arg(long, conflicts_with = "generator", required_unless_present = "generator")]
    pub input: Option<PathBuf>,
    /// Generate the input in memory instead of reading a file.
    #[arg(long)]
    pub generator: Option<GeneratorArg>,
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 12)]
    pub k: usize,
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    #[arg(long, value_enum, default_value_t = MethodArg::Ldr)]
    pub method: MethodArg,
    /// Regularization constant for the classical method.
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    pub delta: f64,
    #[arg(long, value_enum, default_value_t = SolverArg::Auto)]
    pub solver: SolverArg,
    /// Embedding CSV (`N x d`, unit-norm centered columns).
    #[arg(long, default_value = "embedding.csv")]
    pub out: PathBuf,
    /// JSON sidecar; defaults to the embedding path with extension `.json`.
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
    /// Neighbor indices, one line per point.
    #[arg(long)]
    pub dump_neighbors: Option<PathBuf>,
    /// Weight matrix as `i,j,w` triplets.
    #[arg(long)]
    pub dump_weights: Option<PathBuf>,
    /// Per-point `i, lambda_1..lambda_K, alpha, radius`.
    #[arg(long)]
    pub dump_spectra: Option<PathBuf>,
}

fn parse_epsilon(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|e| format!("{s:?}: {e}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("perturbation size must be positive, got {s}"))
    }
}

fn parse_size(s: &str) -> std::result::Result<usize, String> {
    s.trim().parse().map_err(|e| format!("{s:?}: {e}"))
}

#[derive(Debug, Args)]
pub struct PerturbArgs {
    #[arg(long, value_delimiter = ',', value_parser = parse_epsilon, default_values_t = vec![1e-2, 1e-4, 1e-6])]
    pub epsilons: Vec<f64>,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "perturbation.json")]
    pub out: PathBuf,
    /// Per-trial distances: `epsilon,trial,classical,ldr,preconditions_met`.
    #[arg(long)]
    pub distances: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Theorem2Args {
    #[arg(long, conflicts_with = "input")]
    pub generator: Option<GeneratorArg>,
    /// Points CSV with a sibling `.preimage.csv` holding the ground truth.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', value_parser = parse_size, default_values_t = vec![500, 1000, 2000])]
    pub n: Vec<usize>,
    #[arg(long, default_value_t = 12)]
    pub k: usize,
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "theorem2.json")]
    pub out: PathBuf,
}

/// Full description of an `embed` run, stored in its sidecar.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: &'static str,
    pub input: InputSpec,
    pub k: usize,
    pub d: usize,
    pub method: MethodArg,
    pub delta: Option<f64>,
    pub seed: u64,
    pub solver: SolverArg,
    pub outputs: Vec<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InputSpec {
    File(PathBuf),
    Generator { name: GeneratorArg, n: usize, seed: u64 },
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(LleError::InvalidArgument("K must be at least 1".into()));
        }
        if self.d < 1 {
            return Err(LleError::InvalidArgument("d must be at least 1".into()));
        }
        if self.method == MethodArg::Ldr && self.k < self.d + 1 {
            return Err(LleError::InvalidArgument(format!(
                "the ldr method needs K >= d + 1 (K = {}, d = {})",
                self.k, self.d
            )));
        }
        if let Some(delta) = self.delta {
            if !(delta >= 0.0 && delta.is_finite()) {
                return Err(LleError::InvalidArgument(format!(
                    "Delta must be finite and non-negative, got {delta}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AlphaStats {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EmbedSidecar {
    pub config: RunConfig,
    pub n: usize,
    pub input_dim: usize,
    /// Eigenvalues of `M` for the embedding columns, ascending.
    pub eigenvalues: Vec<f64>,
    pub dropped_eigenvalue: f64,
    /// `Phi(Y)` re-evaluated from `W`; equals the eigenvalue sum.
    pub phi: f64,
    pub eigenvalue_sum: f64,
    pub alpha: Option<AlphaStats>,
    pub r_max: f64,
    /// Points whose spectral gap `(lambda_d - lambda_{d+1}) / lambda_1` is below the warning level.
    pub gap_warnings: Vec<usize>,
    pub linear_r2: f64,
    pub procrustes_residual: Option<f64>,
    pub rank_correlation: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PerturbOutput {
    pub config: PerturbationConfig,
    pub results: Vec<PerturbationSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Theorem2Output {
    pub source: String,
    pub k: usize,
    pub d: usize,
    pub seed: u64,
    pub rows: Vec<Theorem2Report>,
    /// Largest ratio divided by the ratio at the first sample size.
    pub max_ratio_growth: f64,
    pub bounded: bool,
    pub min_null_factor: f64,
    pub beats_null: bool,
}

/// Maps an error to the process exit code.
pub fn exit_code(err: &LleError) -> i32 {
    match err.root() {
        LleError::InvalidArgument(_) => EXIT_USAGE,
        LleError::DisconnectedGraph { .. } => EXIT_DISCONNECTED,
        LleError::GeneralPosition { .. } => EXIT_GENERAL_POSITION,
        LleError::SingularNeighborhood { .. }
        | LleError::DegenerateWeights
        | LleError::Numerical(_)
        | LleError::UndefinedCorrelation => EXIT_NUMERICAL,
        _ => EXIT_FAILURE,
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> LleError + '_ {
    move |source| LleError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_with<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let mut out = BufWriter::new(File::create(path).map_err(io_err(path))?);
    f(&mut out).and_then(|_| out.flush()).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_with(path, |out| {
        serde_json::to_writer_pretty(&mut *out, value)?;
        writeln!(out)
    })
}

/// Runs a parsed command and returns the exit code; diagnostics go to stderr.
pub fn run(cli: Cli) -> i32 {
    let outcome = match cli.command {
        Command::Generate(a) => cmd_generate(&a).map(|_| EXIT_OK),
        Command::Embed(a) => cmd_embed(&a).map(|_| EXIT_OK),
        Command::Perturb(a) => cmd_perturb(&a),
        Command::Theorem2(a) => cmd_theorem2(&a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    let generator = Generator::from(args.name);
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{generator}.csv")));
    let sample = generator.generate(args.n, args.seed)?;
    let pre = sample.save(&out)?;
    println!("wrote {} and {}", out.display(), pre.display());
    Ok(())
}

pub fn cmd_embed(args: &EmbedArgs) -> Result<()> {
    let sidecar_path = args.sidecar.clone().unwrap_or_else(|| args.out.with_extension("json"));
    let mut outputs = vec![args.out.clone(), sidecar_path.clone()];
    outputs.extend(
        [&args.dump_neighbors, &args.dump_weights, &args.dump_spectra]
            .into_iter()
            .flatten()
            .cloned(),
    );
    let config = RunConfig {
        command: "embed",
        input: match (&args.input, args.generator) {
            (Some(p), _) => InputSpec::File(p.clone()),
            (None, Some(name)) => InputSpec::Generator {
                name,
                n: args.n,
                seed: args.seed,
            },
            (None, None) => {
                return Err(LleError::InvalidArgument("either --input or --generator is required".into()))
            }
        },
        k: args.k,
        d: args.d,
        method: args.method,
        delta: (args.method == MethodArg::Classical).then_some(args.delta),
        seed: args.seed,
        solver: args.solver,
        outputs,
    };
    config.validate()?;

    let (cloud, preimage) = match &config.input {
        InputSpec::File(path) => {
            let cloud = load_csv(path)?;
            let pre = preimage_path(path);
            let preimage = if pre.exists() { Some(load_matrix_csv(&pre)?) } else { None };
            (cloud, preimage)
        }
        InputSpec::Generator { name, n, seed } => {
            let sample = Generator::from(*name).generate(*n, *seed)?;
            (sample.points, Some(sample.preimage))
        }
    };
    let preimage = preimage.filter(|p| p.nrows() == cloud.len());

    let method = match args.method {
        MethodArg::Classical => WeightMethod::Classical { delta: args.delta },
        MethodArg::Ldr => WeightMethod::Ldr,
    };
    let graph = knn(&cloud, args.k)?;
    let assembly = assemble_weight_matrix(&cloud, &graph, method, args.d)?;
    let embedding = embed_with(&assembly.matrix, args.d, args.solver.into())?;
    let diag = linear_projection_diagnostic(
        &cloud,
        &embedding,
        &assembly.matrix,
        preimage.as_ref().map(Mat::as_ref),
    )?;

    let alphas: Vec<f64> = assembly.spectra.iter().map(|s| s.alpha).collect();
    let alpha = (!alphas.is_empty()).then(|| AlphaStats {
        min: alphas.iter().copied().fold(f64::INFINITY, f64::min),
        mean: alphas.iter().sum::<f64>() / alphas.len() as f64,
        max: alphas.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    });
    let gap_warnings: Vec<usize> = assembly
        .spectra
        .iter()
        .filter(|s| s.gap_warning)
        .map(|s| s.center_index)
        .collect();
    if !gap_warnings.is_empty() {
        eprintln!(
            "warning: {} neighborhoods have a near-degenerate spectral gap at d = {}",
            gap_warnings.len(),
            args.d
        );
    }

    save_matrix_csv(embedding.y.as_ref(), &args.out)?;
    if let Some(p) = &args.dump_neighbors {
        write_with(p, |out| graph.write_csv(out))?;
    }
    if let Some(p) = &args.dump_weights {
        write_with(p, |out| assembly.matrix.write_coo(out))?;
    }
    if let Some(p) = &args.dump_spectra {
        write_with(p, |out| write_spectra_csv(&assembly.spectra, out))?;
    }
    let sidecar = EmbedSidecar {
        n: cloud.len(),
        input_dim: cloud.dim(),
        eigenvalue_sum: embedding.eigenvalues.iter().sum(),
        eigenvalues: embedding.eigenvalues.clone(),
        dropped_eigenvalue: embedding.dropped_eigenvalue,
        phi: diag.phi_value,
        alpha,
        r_max: max_radius(&cloud, &graph)?,
        gap_warnings,
        linear_r2: diag.linear_r2,
        procrustes_residual: diag.procrustes_residual,
        rank_correlation: diag.rank_correlation,
        config,
    };
    write_json(&sidecar_path, &sidecar)?;
    println!(
        "wrote {} ({}x{}), phi = {:.6e}, linear R^2 = {:.4}",
        args.out.display(),
        cloud.len(),
        args.d,
        sidecar.phi,
        sidecar.linear_r2
    );
    Ok(())
}

/// Returns `EXIT_FAILURE` when any trial violates the bound.
pub fn cmd_perturb(args: &PerturbArgs) -> Result<i32> {
    let config = PerturbationConfig {
        epsilons: args.epsilons.clone(),
        trials: args.trials,
        seed: args.seed,
    };
    let reports = perturbation_experiment(&config)?;
    let output = PerturbOutput {
        config,
        results: reports.iter().map(|r| r.summary()).collect(),
    };
    write_json(&args.out, &output)?;
    if let Some(p) = &args.distances {
        write_with(p, |out| {
            writeln!(out, "epsilon,trial,classical,ldr,preconditions_met")?;
            for r in &reports {
                for t in 0..r.trials {
                    writeln!(
                        out,
                        "{:?},{t},{:?},{:?},{}",
                        r.epsilon, r.distances_classical[t], r.distances_ldr[t], r.preconditions_met[t]
                    )?;
                }
            }
            Ok(())
        })?;
    }
    let mut violations = 0;
    for s in &output.results {
        println!(
            "eps = {:.0e}: bound = {}, ldr median = {:.3e}, classical median = {:.3e}, violations = {}",
            s.epsilon,
            s.bound.map_or("n/a".to_string(), |b| format!("{b:.3e}")),
            s.ldr.median,
            s.classical.median,
            s.violations
        );
        violations += s.violations;
    }
    Ok(if violations == 0 { EXIT_OK } else { EXIT_FAILURE })
}

/// Returns `EXIT_FAILURE` when the ratio grows too much or the null model is not beaten.
pub fn cmd_theorem2(args: &Theorem2Args) -> Result<i32> {
    let (source, rows) = match (&args.input, args.generator) {
        (Some(path), _) => {
            let pre = preimage_path(path);
            if !pre.exists() {
                return Err(LleError::Format {
                    path: pre,
                    message: "missing pre-image file; the pre-image objective needs ground-truth \
                              coordinates for every point"
                        .into(),
                });
            }
            let cloud = load_csv(path)?;
            let z = load_matrix_csv(&pre)?;
            let report = theorem2_statistics(&cloud, z.as_ref(), args.k, args.d, args.seed)?;
            (path.display().to_string(), vec![report])
        }
        (None, Some(name)) => {
            if args.n.is_empty() {
                return Err(LleError::InvalidArgument("no sample sizes given".into()));
            }
            let generator = Generator::from(name);
            let rows = args
                .n
                .iter()
                .map(|&n| theorem2_check(&generator.generate(n, args.seed)?, args.k, args.d))
                .collect::<Result<Vec<_>>>()?;
            (generator.to_string(), rows)
        }
        (None, None) => {
            return Err(LleError::InvalidArgument("either --input or --generator is required".into()))
        }
    };
    let base = rows[0].ratio;
    let max_ratio_growth = rows.iter().map(|r| r.ratio / base).fold(f64::NEG_INFINITY, f64::max);
    let min_null_factor = rows.iter().map(|r| r.null_factor).fold(f64::INFINITY, f64::min);
    let output = Theorem2Output {
        source,
        k: args.k,
        d: args.d,
        seed: args.seed,
        bounded: max_ratio_growth <= RATIO_GROWTH_LIMIT,
        beats_null: min_null_factor >= NULL_FACTOR_MIN,
        max_ratio_growth,
        min_null_factor,
        rows,
    };
    write_json(&args.out, &output)?;
    println!("{:>8} {:>14} {:>14} {:>12} {:>12} {:>12}", "n", "phi_z/n", "max_l_d+1", "r_max", "ratio", "null_x");
    for r in &output.rows {
        println!(
            "{:>8} {:>14.6e} {:>14.6e} {:>12.6} {:>12.4e} {:>12.1}",
            r.n, r.phi_z_over_n, r.max_lambda_dp1, r.r_max, r.ratio, r.null_factor
        );
    }
    println!("bounded = {}, beats null = {}", output.bounded, output.beats_null);
    Ok(if output.bounded && output.beats_null { EXIT_OK } else { EXIT_FAILURE })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(k: usize, d: usize, method: MethodArg, delta: Option<f64>) -> RunConfig {
        RunConfig {
            command: "embed",
            input: InputSpec::File("x.csv".into()),
            k,
            d,
            method,
            delta,
            seed: 0,
            solver: SolverArg::Auto,
            outputs: vec![],
        }
    }

    #[test]
    fn config_validation() {
        assert!(config(1, 1, MethodArg::Ldr, None).validate().is_err());
        assert!(config(2, 1, MethodArg::Ldr, None).validate().is_ok());
        assert!(config(1, 1, MethodArg::Classical, Some(0.0)).validate().is_ok());
        assert!(config(4, 1, MethodArg::Classical, Some(-1.0)).validate().is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&LleError::DisconnectedGraph { components: 2 }), EXIT_DISCONNECTED);
        let gp = LleError::GeneralPosition { alpha: 1.0, mass: 0.0 }.at_point(3);
        assert_eq!(exit_code(&gp), EXIT_GENERAL_POSITION);
        assert_eq!(exit_code(&LleError::Numerical("x".into())), EXIT_NUMERICAL);
        assert_eq!(exit_code(&LleError::InvalidArgument("x".into())), EXIT_USAGE);
    }

    #[test]
    fn epsilon_parser() {
        assert_eq!(parse_epsilon("1e-4"), Ok(1e-4));
        assert!(parse_epsilon("0").is_err());
        assert!(parse_epsilon("-1").is_err());
        assert!(parse_epsilon("x").is_err());
    }

    #[test]
    fn clap_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
