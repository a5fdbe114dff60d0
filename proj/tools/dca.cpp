// Command-line front end: preprocess -> train -> evaluate -> report, plus
// rerank / sweep / ablate / gradcheck utilities. Exit codes: 0 success,
// 2 usage error, 1 runtime failure (one line on stderr).
#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dcasr/errors.hpp"
#include "dcasr/evalkit.hpp"
#include "dcasr/preprocess.hpp"
#include "dcasr/runner.hpp"
#include "dcasr/synth.hpp"

namespace {

using namespace dcasr;

struct PreprocessArgs {
  std::string input;
  std::string schema = "presession";
  std::string categories;
  bool millis = false;
  bool synth = false;
  std::string out;
  bool by_day = false;
  std::int64_t gap_minutes = 30;
  double sample = 1.0;
  std::uint64_t seed = 1;
  std::size_t min_session_len = 2;
  std::size_t min_item_support = 5;
  std::size_t test_days = 7;
  std::size_t valid_days = 7;
  std::size_t synth_sessions = 1000;
  std::size_t synth_items = 200;
  std::size_t synth_categories = 10;
};

void run_preprocess(const PreprocessArgs& a) {
  std::vector<RawSession> raw;
  if (a.synth) {
    SynthConfig sc;
    sc.n_sessions = a.synth_sessions;
    sc.n_items = a.synth_items;
    sc.n_categories = a.synth_categories;
    sc.seed = a.seed;
    raw = generate_synthetic(sc);
  } else {
    if (a.input.empty()) throw ValidationError("preprocess: --input or --synth required");
    IngestOptions opt;
    opt.schema = parse_schema(a.schema);
    opt.timestamps_in_millis = a.millis;
    opt.categories_path = a.categories;
    const EventLog log = ingest_events(a.input, opt);
    if (opt.schema == Schema::usertime)
      raw = a.by_day ? sessionize_by_day(log) : sessionize_idle(log, a.gap_minutes);
    else
      raw = group_by_session(log);
  }
  if (a.sample < 1.0) raw = sample_sessions(raw, a.sample, a.seed);
  auto [sessions, catalog] = filter_core(raw, a.min_session_len, a.min_item_support);
  const SplitDataset split = temporal_split(sessions, catalog, a.test_days, a.valid_days);
  const DatasetStats stats = dataset_stats(split);
  write_split(a.out, split, stats);
  std::cout << stats.to_json() << "\n";
}

void run_train(const std::string& config_path) {
  const ExperimentConfig config = load_config(config_path);
  if (config.data_dir.empty()) throw ValidationError("config: data_dir not set");
  const SplitDataset split = read_split(config.data_dir);
  const RunRecord rec = train(config, split);
  std::cout << "best_epoch=" << rec.best_epoch << " checkpoint=" << rec.checkpoint_dir << "\n";
  std::cout << rec.test_report.to_json() << "\n";
}

void run_evaluate(const std::string& checkpoint, const std::string& data_dir,
                  const std::vector<std::size_t>& cutoffs, const std::vector<double>& betas,
                  const std::string& scores_path) {
  const SplitDataset split = read_split(data_dir);
  MetricReport rep;
  if (scores_path.empty()) {
    rep = evaluate_checkpoint(checkpoint, split, cutoffs, betas);
  } else {
    std::ofstream scores(scores_path, std::ios::binary | std::ios::trunc);
    if (!scores) throw IoError("cannot open for writing: " + scores_path);
    rep = evaluate_checkpoint(checkpoint, split, cutoffs, betas, &scores);
  }
  std::cout << rep.to_json() << "\n";
}

/// Reads `example_id,item_id,score` rows (header optional) into per-example
/// score vectors over the catalog's dense item space.
std::map<std::size_t, std::vector<double>> read_score_file(const std::string& path,
                                                           std::size_t num_items) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open score file: " + path);
  std::map<std::size_t, std::vector<double>> by_example;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (lineno == 1 && line.rfind("example_id", 0) == 0) continue;
    std::size_t example = 0;
    std::size_t item = 0;
    double score = 0.0;
    char extra = 0;
    if (std::sscanf(line.c_str(), "%zu,%zu,%lf%c", &example, &item, &score, &extra) != 3)
      throw SchemaError("score file line " + std::to_string(lineno) + ": expected example_id,item_id,score");
    if (item >= num_items)
      throw SchemaError("score file line " + std::to_string(lineno) + ": item id out of range");
    auto [it, inserted] = by_example.try_emplace(example, std::vector<double>(num_items, 0.0));
    it->second[item] = score;
  }
  if (by_example.empty()) throw ValidationError("score file has no rows: " + path);
  return by_example;
}

void run_rerank(const std::string& scores_path, const std::string& data_dir, std::size_t n,
                double lambda, std::size_t pool, bool convex, const std::string& out_path) {
  const SplitDataset split = read_split(data_dir);
  const auto by_example = read_score_file(scores_path, split.catalog.num_items());
  MmrOptions opt;
  opt.lambda_div = lambda;
  opt.pool = pool;
  opt.convex = convex;

  std::ostringstream out;
  out << "example_id,item_id,score\n";
  for (const auto& [example, probs] : by_example) {
    ScoreDistribution dist;
    dist.item_probs = probs;
    const RecommendationList rec = mmr_rerank(dist, split.catalog, n, opt);
    for (const auto& [item, score] : rec.entries) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "%zu,%zu,%.9g\n", example, static_cast<std::size_t>(item),
                    score);
      out << buf;
    }
  }
  std::ofstream sink(out_path, std::ios::binary | std::ios::trunc);
  if (!sink) throw IoError("cannot open for writing: " + out_path);
  sink << out.str();
  if (!sink.flush()) throw IoError("write failed: " + out_path);
  std::cout << "wrote " << out_path << "\n";
}

void run_sweep(const std::string& config_path) {
  const ExperimentConfig config = load_config(config_path);
  if (config.data_dir.empty()) throw ValidationError("config: data_dir not set");
  const SweepResult res = sweep_lambda(config, read_split(config.data_dir));
  std::cout << res.csv;
}

void run_ablate(const std::string& config_path) {
  const ExperimentConfig config = load_config(config_path);
  if (config.data_dir.empty()) throw ValidationError("config: data_dir not set");
  const AblationResult res = ablate(config, read_split(config.data_dir));
  std::cout << res.markdown;
}

int run_gradcheck(const std::string& backbone, bool nca, bool gru_attention, double lambda,
                  std::size_t truncate_top_k, std::size_t embed, std::size_t hidden, double eps) {
  EncoderConfig enc;
  enc.backbone = parse_backbone(backbone);
  enc.use_nca = nca;
  enc.gru_attention = gru_attention;
  enc.embed_dim = embed;
  enc.hidden_dim = hidden;
  const double max_rel = gradcheck_max_rel_error(enc, lambda, truncate_top_k, eps);
  std::printf("max_rel_err=%.6g\n", max_rel);
  return max_rel < 1e-4 ? 0 : 1;
}

void run_report(const std::string& runs_dir, const std::string& out_md,
                const std::string& out_csv) {
  const ReportResult res = report(runs_dir);
  const auto write_file = [](const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << text;
  };
  if (!out_md.empty()) write_file(out_md, res.markdown);
  if (!out_csv.empty()) write_file(out_csv, res.csv);
  std::cout << res.markdown;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"category-aware diversified session recommendation harness"};
  app.require_subcommand(1);

  PreprocessArgs pa;
  CLI::App* pre = app.add_subcommand("preprocess", "ingest, sessionize, filter and split a log");
  pre->add_option("--input", pa.input, "raw event CSV (plain or gzip)")->check(CLI::ExistingFile);
  pre->add_option("--schema", pa.schema, "presession | usertime | diginetica");
  pre->add_option("--categories", pa.categories, "side table item,category")
      ->check(CLI::ExistingFile);
  pre->add_flag("--millis", pa.millis, "timestamps are in milliseconds");
  pre->add_flag("--synth", pa.synth, "generate the synthetic benchmark instead of ingesting");
  pre->add_option("--out", pa.out, "output split directory")->required();
  pre->add_flag("--by-day", pa.by_day, "sessionize per UTC day instead of idle gaps");
  pre->add_option("--gap-minutes", pa.gap_minutes, "idle gap for sessionization");
  pre->add_option("--sample", pa.sample, "keep this fraction of sessions");
  pre->add_option("--seed", pa.seed, "sampling / synthetic seed");
  pre->add_option("--min-session-len", pa.min_session_len);
  pre->add_option("--min-item-support", pa.min_item_support);
  pre->add_option("--test-days", pa.test_days);
  pre->add_option("--valid-days", pa.valid_days);
  pre->add_option("--synth-sessions", pa.synth_sessions);
  pre->add_option("--synth-items", pa.synth_items);
  pre->add_option("--synth-categories", pa.synth_categories);
  pre->callback([&] { run_preprocess(pa); });

  std::string train_config;
  CLI::App* tr = app.add_subcommand("train", "train one model from a JSON config");
  tr->add_option("--config", train_config, "experiment config JSON")
      ->required()
      ->check(CLI::ExistingFile);
  tr->callback([&] { run_train(train_config); });

  std::string ev_checkpoint, ev_data, ev_scores;
  std::vector<std::size_t> ev_cutoffs{10, 20};
  std::vector<double> ev_betas{0.5, 1.0, 2.0};
  CLI::App* ev = app.add_subcommand("evaluate", "evaluate a checkpoint on a split's test set");
  ev->add_option("--checkpoint", ev_checkpoint, "checkpoint directory")->required();
  ev->add_option("--data", ev_data, "preprocessed split directory")->required();
  ev->add_option("--cutoffs", ev_cutoffs, "cutoffs, e.g. --cutoffs 10 20");
  ev->add_option("--betas", ev_betas, "f-beta values");
  ev->add_option("--scores", ev_scores, "dump per-example score rows to this CSV");
  ev->callback([&] { run_evaluate(ev_checkpoint, ev_data, ev_cutoffs, ev_betas, ev_scores); });

  std::string rr_scores, rr_data, rr_out;
  std::size_t rr_n = 10;
  double rr_lambda = 5e-6;
  std::size_t rr_pool = 100;
  bool rr_convex = false;
  CLI::App* rr = app.add_subcommand("rerank", "MMR-rerank a saved score file");
  rr->add_option("--scores", rr_scores, "score CSV: example_id,item_id,score")
      ->required()
      ->check(CLI::ExistingFile);
  rr->add_option("--data", rr_data, "split directory (for the category catalog)")->required();
  rr->add_option("--n", rr_n, "list length");
  rr->add_option("--lambda", rr_lambda, "diversity weight");
  rr->add_option("--pool", rr_pool, "candidate pool size");
  rr->add_flag("--convex", rr_convex, "convex blend (1-lambda)*rel + lambda*div");
  rr->add_option("--out", rr_out, "output CSV")->required();
  rr->callback([&] { run_rerank(rr_scores, rr_data, rr_n, rr_lambda, rr_pool, rr_convex, rr_out); });

  std::string sweep_config;
  CLI::App* sw = app.add_subcommand("sweep", "train once per lambda in the config's mdl.sweep");
  sw->add_option("--config", sweep_config, "experiment config JSON")
      ->required()
      ->check(CLI::ExistingFile);
  sw->callback([&] { run_sweep(sweep_config); });

  std::string ablate_config;
  CLI::App* ab = app.add_subcommand("ablate", "base / +MDL / +NCA / full comparison");
  ab->add_option("--config", ablate_config, "experiment config JSON")
      ->required()
      ->check(CLI::ExistingFile);
  ab->callback([&] { run_ablate(ablate_config); });

  std::string gc_backbone = "narm";
  bool gc_nca = false;
  bool gc_gru_attention = false;
  double gc_lambda = 1.0;
  std::size_t gc_truncate = 0;
  std::size_t gc_embed = 8;
  std::size_t gc_hidden = 8;
  double gc_eps = 1e-3;
  int gc_status = 0;
  CLI::App* gc = app.add_subcommand("gradcheck", "finite-difference check of the objective");
  gc->add_option("--backbone", gc_backbone, "gru4rec | narm | stamp");
  gc->add_flag("--nca", gc_nca, "enable the category-aware attention path");
  gc->add_flag("--gru-attention", gc_gru_attention, "attention readout for gru4rec");
  gc->add_option("--lambda", gc_lambda, "diversity weight");
  gc->add_option("--truncate-top-k", gc_truncate, "truncated diversity variant");
  gc->add_option("--embed", gc_embed, "embedding dim");
  gc->add_option("--hidden", gc_hidden, "hidden dim");
  gc->add_option("--eps", gc_eps, "finite-difference step");
  gc->callback([&] {
    gc_status = run_gradcheck(gc_backbone, gc_nca, gc_gru_attention, gc_lambda, gc_truncate,
                              gc_embed, gc_hidden, gc_eps);
  });

  std::string rp_runs, rp_md, rp_csv;
  CLI::App* rp = app.add_subcommand("report", "combine run.json files into one table");
  rp->add_option("--runs", rp_runs, "directory of runs")->required();
  rp->add_option("--out-md", rp_md, "also write markdown here");
  rp->add_option("--out-csv", rp_csv, "also write CSV here");
  rp->callback([&] { run_report(rp_runs, rp_md, rp_csv); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return gc_status;
}
