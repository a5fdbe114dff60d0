#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dcasr/backbones.hpp"
#include "dcasr/evalkit.hpp"
#include "dcasr/mdl.hpp"
#include "dcasr/preprocess.hpp"

namespace dcasr {

struct OptimizerConfig {
  double lr = 0.001;
  std::size_t batch_size = 64;
  std::size_t epochs = 5;
};

struct SelectConfig {
  std::string metric = "ndcg";
  std::size_t cutoff = 10;
};

/// Full experiment description, loadable from JSON. Unknown JSON keys are
/// rejected so config typos fail fast.
struct ExperimentConfig {
  std::string data_dir;
  std::string out_dir;
  EncoderConfig encoder;
  double lambda = 1.0;
  std::vector<double> lambda_sweep;
  std::size_t truncate_top_k = 0;
  OptimizerConfig optimizer;
  std::uint64_t seed = 42;
  std::vector<std::size_t> cutoffs{10, 20};
  std::vector<double> betas{0.5, 1.0, 2.0};
  std::size_t eval_every = 1;
  SelectConfig select;

  void validate() const;
  std::string to_json() const;
};

ExperimentConfig config_from_json(const std::string& text);

/// Reads a JSON config file and applies the DCA_SEED environment override.
ExperimentConfig load_config(const std::string& path);

struct EpochRecord {
  LossBreakdown train_loss;
  bool has_valid_report = false;
  MetricReport valid_report;
};

struct RunRecord {
  ExperimentConfig config;
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 1-based; 0 = no validation reports
  std::string checkpoint_dir;
  MetricReport test_report;
  double train_seconds = 0.0;
  double eval_seconds = 0.0;

  std::string to_json() const;
};

/// Trains with Adam on the sequence-split train sessions, evaluates on the
/// validation split per cadence, keeps the checkpoint of the best epoch by
/// the configured selection metric, then evaluates that checkpoint on test.
/// Writes checkpoint/, run.json and metrics.csv under config.out_dir.
/// Deterministic for a fixed (config, seed, split).
RunRecord train(const ExperimentConfig& config, const SplitDataset& split);

/// Sequence-splits `sessions` and ranks the full vocabulary per example.
/// When `scores_out` is non-null, writes `example_id,item_id,score` rows of
/// every softmax distribution to it.
MetricReport evaluate_model(SessionModel<float>& model, const std::vector<Session>& sessions,
                            const ItemCatalog& catalog, const std::vector<std::size_t>& cutoffs,
                            const std::vector<double>& betas, std::ostream* scores_out = nullptr);

/// Loads a checkpoint directory written by train() and evaluates it on the
/// split's test sessions. The checkpoint must match the split's catalog.
MetricReport evaluate_checkpoint(const std::string& checkpoint_dir, const SplitDataset& split,
                                 const std::vector<std::size_t>& cutoffs,
                                 const std::vector<double>& betas,
                                 std::ostream* scores_out = nullptr);

struct SweepResult {
  std::vector<std::pair<double, MetricReport>> rows;
  std::string csv;
};

/// One full train+evaluate per lambda in config.lambda_sweep, shared seed.
/// Writes sweep.csv (with the ild-minus-one plot column) under out_dir.
SweepResult sweep_lambda(const ExperimentConfig& config, const SplitDataset& split);

struct AblationResult {
  std::vector<std::pair<std::string, RunRecord>> runs;  // base, mdl, nca, dca
  std::string markdown;
  std::string csv;
};

/// Four runs sharing seed and data: base (lambda 0), base+MDL, base+NCA
/// (lambda 0) and the full framework. For the gru4rec backbone the base
/// uses the attention readout so the category table is the only delta.
/// Writes ablation.md and ablation.csv under out_dir.
AblationResult ablate(const ExperimentConfig& config, const SplitDataset& split);

struct ReportResult {
  std::string markdown;
  std::string csv;
};

/// Collects run.json files (directly in `runs_dir` or one level deep) into
/// combined per-cutoff tables.
ReportResult report(const std::string& runs_dir);

/// Finite-difference check of the composite objective on a fixed toy
/// fixture (20 items, 4 categories, 3 examples, double precision), covering
/// every trainable coordinate. Returns the max relative error.
double gradcheck_max_rel_error(const EncoderConfig& encoder, double lambda,
                               std::size_t truncate_top_k = 0, double eps = 1e-3);

}  // namespace dcasr
