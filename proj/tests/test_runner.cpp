#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dcasr/errors.hpp"
#include "dcasr/mdl.hpp"
#include "dcasr/runner.hpp"
#include "dcasr/synth.hpp"

using namespace dcasr;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("dcasr_runner_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::size_t count_lines(const std::string& text) {
  std::size_t n = 0;
  for (const char c : text)
    if (c == '\n') ++n;
  return n;
}

/// Small, fast split shared by the training tests.
SplitDataset tiny_split() {
  SynthConfig sc;
  sc.n_sessions = 150;
  sc.n_items = 40;
  sc.n_categories = 5;
  sc.seed = 9;
  return synthetic_split(sc);
}

ExperimentConfig tiny_config(const std::string& out_tag) {
  ExperimentConfig c;
  c.out_dir = fresh_dir(out_tag).string();
  c.encoder.backbone = Backbone::narm;
  c.encoder.embed_dim = 8;
  c.encoder.hidden_dim = 8;
  c.encoder.use_nca = true;
  c.lambda = 1.0;
  c.optimizer.lr = 0.01;
  c.optimizer.batch_size = 32;
  c.optimizer.epochs = 2;
  c.seed = 21;
  c.cutoffs = {5, 10};
  c.betas = {1.0};
  c.select.cutoff = 10;
  return c;
}

}  // namespace

TEST_CASE("config json round-trips through its own schema") {
  ExperimentConfig c = tiny_config("roundtrip");
  c.data_dir = "somewhere";
  c.lambda_sweep = {0.0, 0.25, 1.0};
  c.truncate_top_k = 7;
  c.eval_every = 2;
  c.encoder.backbone = Backbone::stamp;
  const ExperimentConfig back = config_from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  CHECK(back.lambda_sweep == c.lambda_sweep);
  CHECK(back.encoder.backbone == Backbone::stamp);
  CHECK(back.seed == c.seed);
}

TEST_CASE("config defaults load from the empty object") {
  const ExperimentConfig c = config_from_json("{}");
  CHECK(c.lambda == 1.0);
  CHECK(c.optimizer.batch_size == 64);
  CHECK(c.cutoffs == std::vector<std::size_t>{10, 20});
  CHECK(c.select.metric == "ndcg");
}

TEST_CASE("config rejects unknown keys at every nesting level") {
  CHECK_THROWS_AS((void)config_from_json(R"({"learning_rate": 0.1})"), SchemaError);
  CHECK_THROWS_AS((void)config_from_json(R"({"encoder": {"backbne": "narm"}})"), SchemaError);
  CHECK_THROWS_AS((void)config_from_json(R"({"mdl": {"lamda": 1}})"), SchemaError);
  CHECK_THROWS_AS((void)config_from_json(R"({"optimizer": {"momentum": 0.9}})"), SchemaError);
  CHECK_THROWS_AS((void)config_from_json(R"({"select": {"metrics": "hr"}})"), SchemaError);
}

TEST_CASE("config rejects bad json and bad types") {
  CHECK_THROWS_AS((void)config_from_json("not json"), SchemaError);
  CHECK_THROWS_AS((void)config_from_json(R"([1, 2])"), SchemaError);
  CHECK_THROWS_AS((void)config_from_json(R"({"optimizer": {"lr": "fast"}})"), SchemaError);
  CHECK_THROWS_AS((void)config_from_json(R"({"cutoffs": "10"})"), SchemaError);
}

TEST_CASE("config invariants are enforced") {
  CHECK_THROWS_AS((void)config_from_json(R"({"optimizer": {"lr": 0}})"), ValidationError);
  CHECK_THROWS_AS((void)config_from_json(R"({"optimizer": {"batch_size": 0}})"), ValidationError);
  CHECK_THROWS_AS((void)config_from_json(R"({"optimizer": {"epochs": 0}})"), ValidationError);
  CHECK_THROWS_AS((void)config_from_json(R"({"mdl": {"lambda": -0.5}})"), ValidationError);
  CHECK_THROWS_AS((void)config_from_json(R"({"mdl": {"sweep": [0.5, -1]}})"), ValidationError);
  CHECK_THROWS_AS((void)config_from_json(R"({"cutoffs": []})"), ValidationError);
  CHECK_THROWS_AS((void)config_from_json(R"({"betas": [0]})"), ValidationError);
  CHECK_THROWS_AS((void)config_from_json(R"({"eval_every": 0})"), ValidationError);
  CHECK_THROWS_AS((void)config_from_json(R"({"select": {"metric": "auc"}})"), ValidationError);
  CHECK_THROWS_AS((void)config_from_json(R"({"select": {"cutoff": 7}})"), ValidationError);
  CHECK_THROWS_AS((void)config_from_json(R"({"encoder": {"fusor": "concat"}})"), ContractError);
}

TEST_CASE("load_config applies the DCA_SEED override") {
  const fs::path dir = fresh_dir("loadcfg");
  const fs::path cfg = dir / "cfg.json";
  std::ofstream(cfg) << R"({"seed": 7})";

  CHECK(load_config(cfg.string()).seed == 7);

  REQUIRE(setenv("DCA_SEED", "12345", 1) == 0);
  CHECK(load_config(cfg.string()).seed == 12345);

  REQUIRE(setenv("DCA_SEED", "12x", 1) == 0);
  CHECK_THROWS_AS((void)load_config(cfg.string()), SchemaError);
  REQUIRE(unsetenv("DCA_SEED") == 0);

  CHECK_THROWS_AS((void)load_config((dir / "missing.json").string()), IoError);
}

TEST_CASE("one-epoch training on a toy split produces a sane run record") {
  const SplitDataset split = tiny_split();
  ExperimentConfig c = tiny_config("smoke");
  c.optimizer.epochs = 1;
  const RunRecord rec = train(c, split);

  REQUIRE(rec.epochs.size() == 1);
  CHECK(rec.epochs[0].has_valid_report);
  CHECK(std::isfinite(rec.epochs[0].train_loss.total));
  CHECK(rec.epochs[0].train_loss.l_acc > 0.0);
  CHECK(rec.best_epoch == 1);
  CHECK(rec.train_seconds >= 0.0);
  CHECK(rec.eval_seconds >= 0.0);
  rec.test_report.validate(split.catalog.num_categories());

  CHECK(fs::exists(fs::path(rec.checkpoint_dir) / "manifest.json"));
  CHECK(fs::exists(fs::path(rec.checkpoint_dir) / "params.bin"));
  CHECK(fs::exists(fs::path(c.out_dir) / "run.json"));
  CHECK(fs::exists(fs::path(c.out_dir) / "metrics.csv"));
}

TEST_CASE("validation cadence controls which epochs carry reports") {
  const SplitDataset split = tiny_split();
  ExperimentConfig c = tiny_config("cadence");
  c.optimizer.epochs = 3;
  c.eval_every = 2;
  const RunRecord rec = train(c, split);
  REQUIRE(rec.epochs.size() == 3);
  CHECK(!rec.epochs[0].has_valid_report);
  CHECK(rec.epochs[1].has_valid_report);
  CHECK(rec.epochs[2].has_valid_report);  // final epoch always evaluates
  CHECK(rec.best_epoch >= 2);
}

TEST_CASE("same config and seed give byte-identical checkpoints and reports") {
  const SplitDataset split = tiny_split();
  ExperimentConfig a = tiny_config("det_a");
  ExperimentConfig b = tiny_config("det_b");
  const RunRecord ra = train(a, split);
  const RunRecord rb = train(b, split);

  CHECK(slurp(fs::path(ra.checkpoint_dir) / "params.bin") ==
        slurp(fs::path(rb.checkpoint_dir) / "params.bin"));
  CHECK(ra.test_report.to_json() == rb.test_report.to_json());
  CHECK(slurp(fs::path(a.out_dir) / "metrics.csv") == slurp(fs::path(b.out_dir) / "metrics.csv"));
  for (std::size_t e = 0; e < ra.epochs.size(); ++e)
    CHECK(ra.epochs[e].train_loss.total == rb.epochs[e].train_loss.total);

  ExperimentConfig c = tiny_config("det_c");
  c.seed = 22;
  const RunRecord rc = train(c, split);
  CHECK(slurp(fs::path(ra.checkpoint_dir) / "params.bin") !=
        slurp(fs::path(rc.checkpoint_dir) / "params.bin"));
}

TEST_CASE("lambda 0 trains on the accuracy objective alone") {
  const SplitDataset split = tiny_split();
  ExperimentConfig c = tiny_config("lambda0");
  c.lambda = 0.0;
  const RunRecord rec = train(c, split);
  for (const EpochRecord& e : rec.epochs) {
    CHECK(e.train_loss.lambda == 0.0);
    CHECK(e.train_loss.total == e.train_loss.l_acc);
    CHECK(e.train_loss.l_div <= 0.0);  // reported but unweighted
  }
}

TEST_CASE("non-finite training loss aborts with a diagnostic") {
  const SplitDataset split = tiny_split();
  ExperimentConfig c = tiny_config("diverge");
  c.optimizer.lr = 1e18;
  c.optimizer.batch_size = 8;
  CHECK_THROWS_AS((void)train(c, split), NumericError);
}

TEST_CASE("evaluate_model matches a per-example reimplementation") {
  const SplitDataset split = tiny_split();
  const std::vector<std::size_t> cutoffs{5, 10};
  const std::vector<double> betas{1.0};
  EncoderConfig enc;
  enc.embed_dim = 8;
  enc.hidden_dim = 8;
  enc.backbone = Backbone::narm;
  enc.use_nca = true;
  SessionModel<float> model(enc, split.catalog.num_items(), split.catalog.num_categories(), 3);

  std::ostringstream scores;
  const MetricReport got = evaluate_model(model, split.valid, split.catalog, cutoffs, betas,
                                          &scores);

  std::vector<RecommendationList> recs;
  std::vector<ItemId> targets;
  for (const Session& s : split.valid)
    for (const PrefixTarget& ex : sequence_split(s)) {
      std::vector<CatId> cats;
      for (const ItemId it : ex.prefix) cats.push_back(split.catalog.category(it));
      recs.push_back(top_n_by_score(item_distribution(model.logits(ex.prefix, cats)), 10));
      targets.push_back(ex.target);
    }
  const MetricReport want = evaluate_examples(recs, targets, split.catalog, cutoffs, betas);
  CHECK(got.to_json() == want.to_json());

  // Score dump: header plus one row per (example, item).
  const std::string dump = scores.str();
  CHECK(dump.rfind("example_id,item_id,score\n", 0) == 0);
  CHECK(count_lines(dump) == 1 + recs.size() * split.catalog.num_items());
}

TEST_CASE("evaluate_model rejects mismatched catalogs and oversized cutoffs") {
  const SplitDataset split = tiny_split();
  EncoderConfig enc;
  enc.embed_dim = 4;
  enc.hidden_dim = 4;
  SessionModel<float> wrong(enc, split.catalog.num_items() + 1,
                            split.catalog.num_categories(), 3);
  CHECK_THROWS_AS((void)evaluate_model(wrong, split.valid, split.catalog, {5}, {1.0}),
                  ContractError);

  SessionModel<float> model(enc, split.catalog.num_items(), split.catalog.num_categories(), 3);
  CHECK_THROWS_AS((void)evaluate_model(model, split.valid, split.catalog,
                                       {split.catalog.num_items() + 1}, {1.0}),
                  ContractError);
  CHECK_THROWS_AS((void)evaluate_model(model, split.valid, split.catalog, {}, {1.0}),
                  ContractError);
}

TEST_CASE("evaluate_checkpoint reproduces the run's test report") {
  const SplitDataset split = tiny_split();
  ExperimentConfig c = tiny_config("ckpt");
  c.optimizer.epochs = 1;
  const RunRecord rec = train(c, split);

  const MetricReport again = evaluate_checkpoint(rec.checkpoint_dir, split, c.cutoffs, c.betas);
  CHECK(again.to_json() == rec.test_report.to_json());

  SynthConfig other;
  other.n_sessions = 150;
  other.n_items = 60;
  other.n_categories = 5;
  other.seed = 10;
  const SplitDataset mismatched = synthetic_split(other);
  CHECK_THROWS_AS((void)evaluate_checkpoint(rec.checkpoint_dir, mismatched, c.cutoffs, c.betas),
                  ContractError);
}

TEST_CASE("lambda sweep writes one csv row per lambda per cutoff") {
  const SplitDataset split = tiny_split();
  ExperimentConfig c = tiny_config("sweep");
  c.optimizer.epochs = 1;
  c.lambda_sweep = {0.0, 0.5};
  const SweepResult res = sweep_lambda(c, split);

  REQUIRE(res.rows.size() == 2);
  CHECK(res.rows[0].first == 0.0);
  CHECK(res.rows[1].first == 0.5);
  CHECK(count_lines(res.csv) == 1 + res.rows.size() * c.cutoffs.size());
  CHECK(res.csv.find("ild_minus_one") != std::string::npos);
  CHECK(slurp(fs::path(c.out_dir) / "sweep.csv") == res.csv);

  // The lambda=0 leg is the plain baseline run under the shared seed.
  ExperimentConfig base = tiny_config("sweep_base");
  base.optimizer.epochs = 1;
  base.lambda = 0.0;
  const RunRecord baseline = train(base, split);
  CHECK(res.rows[0].second.to_json() == baseline.test_report.to_json());

  ExperimentConfig empty = tiny_config("sweep_empty");
  CHECK_THROWS_AS((void)sweep_lambda(empty, split), ContractError);
}

TEST_CASE("ablation wires the four variants and emits both artifacts") {
  const SplitDataset split = tiny_split();
  ExperimentConfig c = tiny_config("ablate");
  c.optimizer.epochs = 1;
  c.lambda = 0.8;
  const AblationResult res = ablate(c, split);

  REQUIRE(res.runs.size() == 4);
  CHECK(res.runs[0].first == "base");
  CHECK(res.runs[1].first == "mdl");
  CHECK(res.runs[2].first == "nca");
  CHECK(res.runs[3].first == "dca");
  CHECK(res.runs[0].second.config.lambda == 0.0);
  CHECK(res.runs[1].second.config.lambda == 0.8);
  CHECK(res.runs[2].second.config.lambda == 0.0);
  CHECK(res.runs[3].second.config.lambda == 0.8);
  CHECK(!res.runs[0].second.config.encoder.use_nca);
  CHECK(!res.runs[1].second.config.encoder.use_nca);
  CHECK(res.runs[2].second.config.encoder.use_nca);
  CHECK(res.runs[3].second.config.encoder.use_nca);

  // model column + one row per (variant, cutoff)
  CHECK(count_lines(res.csv) == 1 + 4 * c.cutoffs.size());
  CHECK(res.markdown.find("| base |") != std::string::npos);
  CHECK(res.markdown.find("improvement") != std::string::npos);
  CHECK(slurp(fs::path(c.out_dir) / "ablation.md") == res.markdown);
  CHECK(slurp(fs::path(c.out_dir) / "ablation.csv") == res.csv);
}

TEST_CASE("report combines run.json files one level deep") {
  const SplitDataset split = tiny_split();
  const fs::path dir = fresh_dir("report");
  for (const char* name : {"alpha", "beta"}) {
    ExperimentConfig c = tiny_config(std::string("report_") + name);
    c.optimizer.epochs = 1;
    c.out_dir = (dir / name).string();
    (void)train(c, split);
  }
  const ReportResult res = report(dir.string());
  CHECK(res.markdown.find("| alpha |") != std::string::npos);
  CHECK(res.markdown.find("| beta |") != std::string::npos);
  CHECK(count_lines(res.csv) == 1 + 2 * 2);  // two runs, cutoffs {5, 10}

  CHECK_THROWS_AS((void)report(fresh_dir("report_empty").string()), ValidationError);
  CHECK_THROWS_AS((void)report((dir / "nothere").string()), IoError);
}

TEST_CASE("gradcheck fixture stays below the acceptance threshold") {
  EncoderConfig enc;
  enc.embed_dim = 8;
  enc.hidden_dim = 8;
  enc.backbone = Backbone::narm;
  enc.use_nca = true;
  CHECK(gradcheck_max_rel_error(enc, 1.0) < 1e-6);
  CHECK_THROWS_AS((void)gradcheck_max_rel_error(enc, -1.0), ContractError);
}
