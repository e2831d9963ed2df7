//! Command-line grammar.

use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "qtomo",
    version,
    about = "Quantum state tomography from incomplete measurements"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample random density matrices into a dataset file
    #[command(args_override_self = true)]
    Gen(GenArgs),
    /// Train a corrector or LSTM model
    #[command(args_override_self = true)]
    Train(TrainArgs),
    /// Mean Bures distance against the number of measurements
    #[command(args_override_self = true)]
    Sweep(SweepArgs),
    /// Element-wise mean absolute error maps for fixed collections
    #[command(args_override_self = true)]
    Errormap(ErrorMapArgs),
    /// Lowest-eigenvalue statistics of raw reconstructions
    #[command(args_override_self = true)]
    Psdstats(PsdArgs),
    /// Print the header of a dataset or checkpoint file
    Inspect(InspectArgs),
}

/// Comma-separated list of positive integers, e.g. `1,3`.
#[derive(Clone, Debug, PartialEq)]
pub struct IndexList(pub Vec<usize>);

impl FromStr for IndexList {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let v = s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|_| format!("bad integer '{t}'"))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if v.is_empty() || v.contains(&0) {
            return Err("expected positive integers".into());
        }
        Ok(Self(v))
    }
}

/// M values as a mix of single values and ranges, e.g. `1-4,8`. 0 is allowed.
#[derive(Clone, Debug, PartialEq)]
pub struct MList(pub Vec<usize>);

impl FromStr for MList {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let mut out = Vec::new();
        for part in s.split(',') {
            let part = part.trim();
            let num = |t: &str| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|_| format!("bad M value '{t}'"))
            };
            match part.split_once('-') {
                Some((a, b)) => {
                    let (a, b) = (num(a)?, num(b)?);
                    if a > b {
                        return Err(format!("empty range {part}"));
                    }
                    out.extend(a..=b);
                }
                None => out.push(num(part)?),
            }
        }
        Ok(Self(out))
    }
}

/// Collections separated by `;`, each a comma list, e.g. `1,2;3,4`.
#[derive(Clone, Debug, PartialEq)]
pub struct SubsetList(pub Vec<Vec<usize>>);

impl FromStr for SubsetList {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        s.split(';')
            .map(|p| p.parse::<IndexList>().map(|l| l.0))
            .collect::<Result<_, _>>()
            .map(Self)
    }
}

/// Comma-separated paths.
#[derive(Clone, Debug, PartialEq)]
pub struct PathList(pub Vec<PathBuf>);

impl FromStr for PathList {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(Self(
            s.split(',')
                .filter(|p| !p.is_empty())
                .map(PathBuf::from)
                .collect(),
        ))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    #[value(name = "corrector_full_m")]
    CorrectorFullM,
    #[value(name = "corrector_pi_only")]
    CorrectorPiOnly,
    #[value(name = "corrector_quadratic")]
    CorrectorQuadratic,
    #[value(name = "lstm_random")]
    LstmRandom,
    #[value(name = "lstm_predefined")]
    LstmPredefined,
    #[value(name = "lstm_custom")]
    LstmCustom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodName {
    Pinv,
    Mle,
    Analytic,
    Corrector,
    Lstm,
}

/// Comma-separated methods.
#[derive(Clone, Debug, PartialEq)]
pub struct MethodList(pub Vec<MethodName>);

impl FromStr for MethodList {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(|t| MethodName::from_str(t.trim(), false))
            .collect::<Result<_, _>>()
            .map(Self)
    }
}

#[derive(Clone, Debug, Args)]
pub struct MleArgs {
    /// MLE iteration cap
    #[arg(long, default_value_t = 2000)]
    pub mle_max_iters: usize,
    /// MLE convergence tolerance
    #[arg(long, default_value_t = 1e-10)]
    pub mle_tol: f64,
    /// MLE dilution in (0, 1]
    #[arg(long, default_value_t = 0.5)]
    pub mle_dilution: f64,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// key = value config file; explicit flags override it
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub n_qubits: usize,
    #[arg(long, default_value_t = 1000)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// `default` or a weighted mix such as `ginibre:0.5,purified:0.5`
    /// (haar-pure, ginibre, purified, x-state, max-entangled)
    #[arg(long, default_value = "default")]
    pub ensemble: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// key = value config file; explicit flags override it
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub model: ModelKind,
    /// Training dataset (QTDS)
    #[arg(long)]
    pub data: PathBuf,
    /// Checkpoint to write
    #[arg(long)]
    pub out: PathBuf,
    /// Training log CSV [default: <out>.log.csv]
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Expected qubit count; checked against the dataset
    #[arg(long)]
    pub n_qubits: Option<usize>,
    /// Corrector: measurements per collection
    #[arg(long)]
    pub m: Option<usize>,
    /// Corrector: train on this single collection only, e.g. `1,3`
    #[arg(long)]
    pub subset: Option<IndexList>,
    /// Corrector: collections sampled into the training pool
    #[arg(long, default_value_t = 100)]
    pub collections: usize,
    /// Corrector hidden layer widths
    #[arg(long, default_value = "64,64,64,64,64,64")]
    pub hidden: IndexList,
    /// LSTM hidden size [default: 256]
    #[arg(long)]
    pub lstm_hidden: Option<usize>,
    /// LSTM layers [default: 1 for up to 2 qubits, else 2]
    #[arg(long)]
    pub lstm_layers: Option<usize>,
    /// LSTM steps per training episode [default: 4^N]
    #[arg(long)]
    pub episode_len: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub learning_rate: f64,
    /// Corrector orthogonality penalty weight
    #[arg(long, default_value_t = 0.1)]
    pub ortho_weight: f64,
    /// Global gradient-norm clip [default: off]
    #[arg(long)]
    pub grad_clip: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Continue training from this checkpoint
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// key = value config file; explicit flags override it
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated: pinv, mle, analytic, corrector, lstm
    #[arg(long)]
    pub method: MethodList,
    /// Test dataset (QTDS)
    #[arg(long)]
    pub data: PathBuf,
    /// M values, e.g. `1-4` or `0,2,8` [default: 1 to 4^N]
    #[arg(long)]
    pub m: Option<MList>,
    /// Comma-separated model checkpoints (one corrector per M, one LSTM)
    #[arg(long)]
    pub checkpoint: Option<PathList>,
    /// Collections sampled per M
    #[arg(long, default_value_t = 100)]
    pub collections: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; output does not depend on it
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Report CSV
    #[arg(long)]
    pub out: PathBuf,
    /// Optional SVG line chart
    #[arg(long)]
    pub svg: Option<PathBuf>,
    #[command(flatten)]
    pub mle: MleArgs,
}

#[derive(Debug, Args)]
pub struct ErrorMapArgs {
    /// key = value config file; explicit flags override it
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub method: MethodName,
    /// Test dataset (QTDS)
    #[arg(long)]
    pub data: PathBuf,
    /// Collections, e.g. `1,2;3,4` [default: all pairs for one qubit]
    #[arg(long)]
    pub subsets: Option<SubsetList>,
    /// Comma-separated corrector checkpoints
    #[arg(long)]
    pub checkpoint: Option<PathList>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub mle: MleArgs,
}

#[derive(Debug, Args)]
pub struct PsdArgs {
    /// key = value config file; explicit flags override it
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated: pinv, mle, analytic, corrector, lstm
    #[arg(long)]
    pub method: MethodList,
    #[arg(long)]
    pub data: PathBuf,
    /// M values [default: 1 to 4^N]
    #[arg(long)]
    pub m: Option<MList>,
    #[arg(long)]
    pub checkpoint: Option<PathList>,
    #[arg(long, default_value_t = 100)]
    pub collections: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub mle: MleArgs,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    /// Dataset or checkpoint file
    pub path: PathBuf,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn list_parsers() {
        assert_eq!("1,3".parse::<IndexList>().unwrap().0, vec![1, 3]);
        assert!("0,3".parse::<IndexList>().is_err());
        assert_eq!("0,2-4,8".parse::<MList>().unwrap().0, vec![0, 2, 3, 4, 8]);
        assert!("4-2".parse::<MList>().is_err());
        assert_eq!(
            "1,2;3,4".parse::<SubsetList>().unwrap().0,
            vec![vec![1, 2], vec![3, 4]]
        );
        assert_eq!(
            "pinv,mle".parse::<MethodList>().unwrap().0,
            vec![MethodName::Pinv, MethodName::Mle]
        );
        assert!("pinv,nope".parse::<MethodList>().is_err());
    }

    #[test]
    fn grammar_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
