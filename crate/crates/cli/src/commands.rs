use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use hamming_embed::io::{self as formats, Payload, TrainingMetadata};
use hamming_embed::metrics::{cosine_scores, evaluate_knn, hamming_scores};
use hamming_embed::training::{mean_loss, train_with_progress};
use hamming_embed::{
    avg_abs_correlation, avg_abs_correlation_codes, eval_similarity, median_binarize, memory_report, synthetic,
    BinaryCode, CodeIndex, Rng, TrainConfig,
};

use crate::{Cli, Command, Metric, SyntheticKind};

/// Collects report lines as either human text or `key=value` pairs.
struct Report {
    porcelain: bool,
    out: String,
}

impl Report {
    fn new(porcelain: bool) -> Self {
        Self {
            porcelain,
            out: String::new(),
        }
    }

    fn field(&mut self, key: &str, human: &str, value: impl std::fmt::Display) {
        if self.porcelain {
            let _ = writeln!(self.out, "{key}={value}");
        } else {
            let _ = writeln!(self.out, "{human}: {value}");
        }
    }

    fn line(&mut self, text: impl std::fmt::Display) {
        let _ = writeln!(self.out, "{text}");
    }

    fn print(self) -> Result<()> {
        io::stdout().lock().write_all(self.out.as_bytes())?;
        Ok(())
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Train(a) => {
            let data = formats::read_embeddings(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
            if data.is_empty() {
                bail!("{} holds no embeddings", a.input.display());
            }
            let cfg = TrainConfig {
                learning_rate: a.lr,
                batch_size: a.batch_size,
                max_epochs: a.max_epochs,
                patience_window: a.patience,
                delta_tolerance: a.delta,
                tau: a.tau,
                tau_final: a.tau_final,
                seed: cli.seed,
            };
            let bits = a.bits as usize;
            let quiet = cli.quiet;
            let (model, history) = train_with_progress(&data, data.dim(), bits, &cfg, |epoch, loss| {
                if !quiet {
                    eprintln!("epoch {epoch}\tloss {loss}");
                }
            })
            .context("training failed")?;
            let meta = TrainingMetadata {
                config: cfg,
                epochs_run: history.epochs_run,
                stop_reason: history.stop_reason,
                final_loss: history.final_loss,
            };
            formats::write_model(&a.out, &model, Some(&meta))?;
            let mut r = Report::new(cli.porcelain);
            r.field("epochs", "epochs run", history.epochs_run);
            r.field("stop", "stop reason", history.stop_reason.as_str());
            r.field("final_loss", "final mean reconstruction loss", history.final_loss);
            r.field("mean_sq_norm", "mean squared input norm", data.mean_sq_norm());
            r.print()
        }
        Command::Encode(a) => {
            let (model, _) = formats::read_model(&a.model).with_context(|| format!("reading {}", a.model.display()))?;
            let data = formats::read_embeddings(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
            if !data.is_empty() && data.dim() != model.dim() {
                bail!(
                    "dimension mismatch: model expects {} dimensions, embeddings have {}",
                    model.dim(),
                    data.dim()
                );
            }
            let codes = (0..data.len())
                .map(|i| model.encode_code(&data.vector(i)))
                .collect::<hamming_embed::Result<Vec<_>>>()?;
            let index = CodeIndex::new(model.bits(), codes, data.meta().clone())?;
            let loss = if a.report_loss && !data.is_empty() {
                Some(mean_loss(&model, &data)?)
            } else {
                None
            };
            formats::write_codes(&a.out, &index)?;
            let mut r = Report::new(cli.porcelain);
            r.field("encoded", "encoded records", index.len());
            r.field("bits", "bits per code", index.nbits());
            if let Some(loss) = loss {
                r.field("mean_loss", "mean reconstruction loss", loss);
            }
            r.print()
        }
        Command::Baseline(a) => {
            let data = formats::read_embeddings(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
            let (index, thresholds) = median_binarize(&data)?;
            let sidecar = a.thresholds.clone().unwrap_or_else(|| sidecar_path(&a.out));
            let mut text = String::new();
            for t in thresholds.as_slice() {
                let _ = writeln!(text, "{t}");
            }
            formats::write_codes(&a.out, &index)?;
            fs::write(&sidecar, text)?;
            let mut r = Report::new(cli.porcelain);
            r.field("encoded", "encoded records", index.len());
            r.field("bits", "bits per code", index.nbits());
            r.field("thresholds", "thresholds written to", sidecar.display());
            r.print()
        }
        Command::Search(a) => {
            let index = formats::read_codes(&a.codes).with_context(|| format!("reading {}", a.codes.display()))?;
            let query = if let Some(id) = &a.query_id {
                let pos = (0..index.len())
                    .find(|&i| index.meta().id(i) == id.as_str())
                    .with_context(|| format!("unknown query id `{id}`"))?;
                index.codes()[pos].clone()
            } else if let Some(hex) = &a.query_hex {
                BinaryCode::from_hex(hex, index.nbits())?
            } else {
                let bits = a.query_bits.as_deref().expect("clap enforces one query");
                let code = BinaryCode::from_bit_str(bits)?;
                if code.nbits() != index.nbits() {
                    bail!("query has {} bits, index has {}", code.nbits(), index.nbits());
                }
                code
            };
            let mut r = Report::new(cli.porcelain);
            for hit in index.knn_search(&query, a.k as usize)? {
                r.line(format_args!("{}\t{}\t{}", hit.rank, hit.id, hit.distance));
            }
            r.print()
        }
        Command::EvalSim(a) => {
            let payload = formats::read_payload(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
            let pairs = formats::read_pairs(&a.pairs).with_context(|| format!("reading {}", a.pairs.display()))?;
            if pairs.is_empty() {
                bail!("{} holds no pairs", a.pairs.display());
            }
            let scores = match (a.metric, &payload) {
                (Metric::Cosine, Payload::Embeddings(set)) => cosine_scores(set, &pairs)?,
                (Metric::Hamming, Payload::Codes(index)) => hamming_scores(index, &pairs)?,
                (Metric::Cosine, Payload::Codes(_)) => bail!("cosine metric needs an embedding file, got codes"),
                (Metric::Hamming, Payload::Embeddings(_)) => bail!("hamming metric needs a code file, got embeddings"),
            };
            let rho = eval_similarity(&pairs, &scores)?;
            let mut r = Report::new(cli.porcelain);
            match rho {
                Some(rho) => r.field("spearman", "Spearman's rho", rho),
                None => r.field("spearman", "Spearman's rho", "undefined"),
            }
            r.field("pairs", "pairs", pairs.len());
            r.print()
        }
        Command::EvalKnn(a) => {
            let train = formats::read_codes(&a.train).with_context(|| format!("reading {}", a.train.display()))?;
            let test = formats::read_codes(&a.test).with_context(|| format!("reading {}", a.test.display()))?;
            if train.labels().is_none() || test.labels().is_none() {
                bail!("both code files must carry labels");
            }
            let report = evaluate_knn(&train, &test, a.k as usize)?;
            let mut r = Report::new(cli.porcelain);
            r.field("error", "classification error", report.error);
            r.field("n", "test records", test.len());
            for ((truth, pred), count) in &report.confusion {
                if cli.porcelain {
                    r.line(format_args!("confusion={truth}\t{pred}\t{count}"));
                } else {
                    r.line(format_args!("  {truth} -> {pred}: {count}"));
                }
            }
            r.print()
        }
        Command::Correlation(a) => {
            let payload = formats::read_payload(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
            let report = match &payload {
                Payload::Embeddings(set) => avg_abs_correlation(set)?,
                Payload::Codes(index) => avg_abs_correlation_codes(index)?,
            };
            let mut r = Report::new(cli.porcelain);
            r.field(
                "avg_abs_correlation_percent",
                "average absolute correlation (%)",
                100.0 * report.average_abs,
            );
            r.field("dims", "dimensions", report.dim);
            r.field("constant_dims", "constant dimensions", report.constant_dims.len());
            r.print()
        }
        Command::Memreport(a) => {
            let report = memory_report(a.n, a.dim, a.bits)?;
            let mut r = Report::new(cli.porcelain);
            if cli.porcelain {
                let (num, den) = report.ratio_fraction();
                r.line(format_args!("n={}", report.n));
                r.line(format_args!("original_bytes={}", report.original_bytes));
                r.line(format_args!("compressed_bytes={}", report.compressed_bytes));
                r.line(format_args!("ratio={}", report.ratio));
                r.line(format_args!("ratio_fraction={num}/{den}"));
            } else {
                r.line(report);
            }
            r.print()
        }
        Command::ExportBitmap(a) => {
            let index = formats::read_codes(&a.codes).with_context(|| format!("reading {}", a.codes.display()))?;
            let mut rows: Vec<usize> = match &a.label {
                None => (0..index.len()).collect(),
                Some(label) => {
                    let labels = index
                        .labels()
                        .context("label filter given but the code file has no labels")?;
                    (0..index.len()).filter(|&i| &labels[i] == label).collect()
                }
            };
            if let Some(n) = a.sample {
                if n < rows.len() {
                    let mut rng = Rng::new(cli.seed);
                    rng.shuffle(&mut rows);
                    rows.truncate(n);
                    rows.sort_unstable();
                }
            }
            let selected: Vec<&BinaryCode> = rows.iter().map(|&i| &index.codes()[i]).collect();
            fs::write(&a.out, formats::pbm(&selected, index.nbits()))?;
            let mut r = Report::new(cli.porcelain);
            r.field("rows", "rows written", selected.len());
            r.field("width", "bits per row", index.nbits());
            r.print()
        }
        Command::GenSynthetic(g) => {
            let mut r = Report::new(cli.porcelain);
            match &g.kind {
                SyntheticKind::Planted { dim, bits, n, out } => {
                    let (set, _, _) = synthetic::planted(*dim, *bits, *n, cli.seed)?;
                    formats::write_embeddings(out, &set)?;
                    r.field("records", "records written", set.len());
                    r.field("mean_sq_norm", "mean squared norm", set.mean_sq_norm());
                }
                SyntheticKind::Factors {
                    factors,
                    copies,
                    noise,
                    n,
                    out,
                } => {
                    let set = synthetic::duplicated_factors(*factors, *copies, *noise, *n, cli.seed)?;
                    formats::write_embeddings(out, &set)?;
                    r.field("records", "records written", set.len());
                }
                SyntheticKind::Gaussian { dim, n, out } => {
                    let set = synthetic::gaussian(*dim, *n, cli.seed)?;
                    formats::write_embeddings(out, &set)?;
                    r.field("records", "records written", set.len());
                }
                SyntheticKind::Clusters {
                    bits,
                    n_train,
                    n_test,
                    flip,
                    out,
                    test_out,
                } => {
                    let (train, test) = synthetic::two_clusters(*bits, *n_train, *n_test, *flip, cli.seed)?;
                    formats::write_codes(out, &train)?;
                    formats::write_codes(test_out, &test)?;
                    r.field("records", "training records written", train.len());
                    r.field("test_records", "test records written", test.len());
                }
            }
            r.print()
        }
        Command::ImportCsv(a) => {
            let set = formats::read_embeddings(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
            formats::write_embeddings(&a.out, &set)?;
            let mut r = Report::new(cli.porcelain);
            r.field("records", "records written", set.len());
            r.field("dim", "dimension", set.dim());
            r.print()
        }
    }
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".thresholds");
    PathBuf::from(s)
}
