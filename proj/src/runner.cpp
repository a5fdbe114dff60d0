#include "dcasr/runner.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <string>

#include "dcasr/checkpoint.hpp"
#include "dcasr/errors.hpp"
#include "dcasr/rng.hpp"

namespace dcasr {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void check_keys(const json& j, const std::string& where,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw SchemaError("config: " + where + " must be a JSON object");
  for (const auto& item : j.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* a) { return item.key() == a; });
    if (!known) throw SchemaError("config: unknown key '" + item.key() + "' in " + where);
  }
}

json encoder_to_json(const EncoderConfig& e) {
  json j;
  j["backbone"] = to_string(e.backbone);
  j["embed_dim"] = e.embed_dim;
  j["hidden_dim"] = e.hidden_dim;
  j["n_gru_layers"] = e.n_gru_layers;
  j["use_nca"] = e.use_nca;
  j["gru_attention"] = e.gru_attention;
  j["fusor"] = "add";
  return j;
}

EncoderConfig encoder_from_json(const json& j) {
  check_keys(j, "encoder",
             {"backbone", "embed_dim", "hidden_dim", "n_gru_layers", "use_nca", "gru_attention",
              "fusor"});
  EncoderConfig e;
  if (j.contains("backbone")) e.backbone = parse_backbone(j.at("backbone").get<std::string>());
  if (j.contains("embed_dim")) e.embed_dim = j.at("embed_dim").get<std::size_t>();
  if (j.contains("hidden_dim")) e.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  if (j.contains("n_gru_layers")) e.n_gru_layers = j.at("n_gru_layers").get<std::size_t>();
  if (j.contains("use_nca")) e.use_nca = j.at("use_nca").get<bool>();
  if (j.contains("gru_attention")) e.gru_attention = j.at("gru_attention").get<bool>();
  if (j.contains("fusor")) e.fusor = parse_fusor(j.at("fusor").get<std::string>());
  return e;
}

json config_to_json_obj(const ExperimentConfig& c) {
  json j;
  j["data_dir"] = c.data_dir;
  j["out_dir"] = c.out_dir;
  j["encoder"] = encoder_to_json(c.encoder);
  j["mdl"] = {{"lambda", c.lambda}, {"sweep", c.lambda_sweep}, {"truncate_top_k", c.truncate_top_k}};
  j["optimizer"] = {{"lr", c.optimizer.lr},
                    {"batch_size", c.optimizer.batch_size},
                    {"epochs", c.optimizer.epochs}};
  j["seed"] = c.seed;
  j["cutoffs"] = c.cutoffs;
  j["betas"] = c.betas;
  j["eval_every"] = c.eval_every;
  j["select"] = {{"metric", c.select.metric}, {"cutoff", c.select.cutoff}};
  return j;
}

ExperimentConfig config_from_json_obj(const json& j) {
  check_keys(j, "config",
             {"data_dir", "out_dir", "encoder", "mdl", "optimizer", "seed", "cutoffs", "betas",
              "eval_every", "select"});
  ExperimentConfig c;
  if (j.contains("data_dir")) c.data_dir = j.at("data_dir").get<std::string>();
  if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
  if (j.contains("encoder")) c.encoder = encoder_from_json(j.at("encoder"));
  if (j.contains("mdl")) {
    const json& m = j.at("mdl");
    check_keys(m, "mdl", {"lambda", "sweep", "truncate_top_k"});
    if (m.contains("lambda")) c.lambda = m.at("lambda").get<double>();
    if (m.contains("sweep")) c.lambda_sweep = m.at("sweep").get<std::vector<double>>();
    if (m.contains("truncate_top_k")) c.truncate_top_k = m.at("truncate_top_k").get<std::size_t>();
  }
  if (j.contains("optimizer")) {
    const json& o = j.at("optimizer");
    check_keys(o, "optimizer", {"lr", "batch_size", "epochs"});
    if (o.contains("lr")) c.optimizer.lr = o.at("lr").get<double>();
    if (o.contains("batch_size")) c.optimizer.batch_size = o.at("batch_size").get<std::size_t>();
    if (o.contains("epochs")) c.optimizer.epochs = o.at("epochs").get<std::size_t>();
  }
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("cutoffs")) c.cutoffs = j.at("cutoffs").get<std::vector<std::size_t>>();
  if (j.contains("betas")) c.betas = j.at("betas").get<std::vector<double>>();
  if (j.contains("eval_every")) c.eval_every = j.at("eval_every").get<std::size_t>();
  if (j.contains("select")) {
    const json& s = j.at("select");
    check_keys(s, "select", {"metric", "cutoff"});
    if (s.contains("metric")) c.select.metric = s.at("metric").get<std::string>();
    if (s.contains("cutoff")) c.select.cutoff = s.at("cutoff").get<std::size_t>();
  }
  c.validate();
  return c;
}

std::string run_label(const ExperimentConfig& c) {
  std::string label = to_string(c.encoder.backbone);
  if (c.encoder.use_nca)
    label += "+nca";
  else if (c.encoder.backbone == Backbone::gru4rec && c.encoder.gru_attention)
    label += "+attn";
  if (c.lambda > 0.0) label += "+mdl";
  return label;
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << text;
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

double select_value(const MetricReport& report, const SelectConfig& select) {
  const auto it = report.per_cutoff.find(select.cutoff);
  if (it == report.per_cutoff.end())
    throw ContractError("selection cutoff missing from validation report");
  return metric_value(it->second, select.metric);
}

/// Header cells shared by every emitted metric table, after the leading
/// identity columns.
std::vector<std::string> metric_columns(const std::vector<double>& betas) {
  std::vector<std::string> cols = metric_keys();
  for (const double b : betas) cols.push_back("f_beta_" + beta_key(b));
  return cols;
}

std::vector<double> metric_row(const MetricValues& v, const std::vector<double>& betas) {
  std::vector<double> row;
  for (const std::string& k : metric_keys()) row.push_back(metric_value(v, k));
  for (const double b : betas) row.push_back(v.f_beta.at(beta_key(b)));
  return row;
}

MetricValues values_from_json(const json& j) {
  MetricValues v;
  v.hr = j.at("hr").get<double>();
  v.mrr = j.at("mrr").get<double>();
  v.ndcg = j.at("ndcg").get<double>();
  v.ild = j.at("ild").get<double>();
  v.entropy = j.at("entropy").get<double>();
  v.ds = j.at("ds").get<double>();
  v.f1_hr_ild = j.at("f1_hr_ild").get<double>();
  for (const auto& item : j.at("f_beta").items()) v.f_beta[item.key()] = item.value().get<double>();
  return v;
}

MetricReport report_from_json(const json& j) {
  MetricReport r;
  for (const auto& item : j.items()) {
    std::size_t n = 0;
    const std::string& key = item.key();
    const auto [p, ec] = std::from_chars(key.data(), key.data() + key.size(), n);
    if (ec != std::errc() || p != key.data() + key.size())
      throw SchemaError("metric report: bad cutoff key '" + key + "'");
    r.per_cutoff[n] = values_from_json(item.value());
  }
  return r;
}

/// Markdown table of one row per (model, cutoff).
std::string markdown_metric_table(const std::vector<std::pair<std::string, MetricReport>>& rows,
                                  const std::vector<double>& betas) {
  std::string out = "| model | cutoff |";
  for (const std::string& c : metric_columns(betas)) out += " " + c + " |";
  out += "\n|---|---|";
  for (std::size_t i = 0; i < metric_columns(betas).size(); ++i) out += "---|";
  out += "\n";
  for (const auto& [label, report] : rows)
    for (const auto& [n, values] : report.per_cutoff) {
      out += "| " + label + " | " + std::to_string(n) + " |";
      for (const double v : metric_row(values, betas)) out += " " + fmt_double(v) + " |";
      out += "\n";
    }
  return out;
}

std::string csv_metric_table(const std::vector<std::pair<std::string, MetricReport>>& rows) {
  std::string out;
  bool header = true;
  for (const auto& [label, report] : rows) {
    out += metric_report_csv(label, report, header);
    header = false;
  }
  return out;
}

}  // namespace

void ExperimentConfig::validate() const {
  encoder.validate();
  if (!(optimizer.lr > 0.0)) throw ValidationError("config: lr must be > 0");
  if (optimizer.batch_size < 1) throw ValidationError("config: batch_size must be >= 1");
  if (optimizer.epochs < 1) throw ValidationError("config: epochs must be >= 1");
  if (lambda < 0.0) throw ValidationError("config: lambda must be >= 0");
  for (const double v : lambda_sweep)
    if (v < 0.0) throw ValidationError("config: sweep values must be >= 0");
  if (cutoffs.empty()) throw ValidationError("config: cutoffs must be nonempty");
  for (const std::size_t n : cutoffs)
    if (n < 1) throw ValidationError("config: cutoffs must be >= 1");
  for (const double b : betas)
    if (!(b > 0.0)) throw ValidationError("config: betas must be > 0");
  if (eval_every < 1) throw ValidationError("config: eval_every must be >= 1");
  const auto& keys = metric_keys();
  if (std::find(keys.begin(), keys.end(), select.metric) == keys.end())
    throw ValidationError("config: unknown selection metric '" + select.metric + "'");
  if (std::find(cutoffs.begin(), cutoffs.end(), select.cutoff) == cutoffs.end())
    throw ValidationError("config: selection cutoff must be one of cutoffs");
}

std::string ExperimentConfig::to_json() const { return config_to_json_obj(*this).dump(2); }

ExperimentConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& ex) {
    throw SchemaError(std::string("config: ") + ex.what());
  }
  try {
    return config_from_json_obj(j);
  } catch (const json::exception& ex) {
    throw SchemaError(std::string("config: ") + ex.what());
  }
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  ExperimentConfig c = config_from_json(buf.str());
  if (const char* env = std::getenv("DCA_SEED")) {
    std::uint64_t s = 0;
    const std::string_view sv(env);
    const auto [p, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), s);
    if (ec != std::errc() || p != sv.data() + sv.size())
      throw SchemaError("DCA_SEED must be a non-negative integer, got '" + std::string(env) + "'");
    c.seed = s;
  }
  return c;
}

std::string RunRecord::to_json() const {
  json j;
  j["config"] = config_to_json_obj(config);
  j["epochs"] = json::array();
  for (const EpochRecord& e : epochs) {
    json je;
    je["train_loss"] = {{"l_acc", e.train_loss.l_acc},
                        {"l_div", e.train_loss.l_div},
                        {"lambda", e.train_loss.lambda},
                        {"total", e.train_loss.total}};
    if (e.has_valid_report) je["valid"] = json::parse(e.valid_report.to_json());
    j["epochs"].push_back(je);
  }
  j["best_epoch"] = best_epoch;
  j["checkpoint_dir"] = checkpoint_dir;
  j["test"] = json::parse(test_report.to_json());
  j["train_seconds"] = train_seconds;
  j["eval_seconds"] = eval_seconds;
  return j.dump(2);
}

RunRecord train(const ExperimentConfig& config, const SplitDataset& split) {
  config.validate();
  if (config.out_dir.empty()) throw ContractError("train: out_dir not set");
  if (split.train.empty()) throw ValidationError("train: empty train split");
  const ItemCatalog& catalog = split.catalog;

  std::vector<PrefixTarget> examples;
  std::vector<std::vector<CatId>> example_cats;
  for (const Session& s : split.train) {
    s.validate(catalog);
    for (PrefixTarget& ex : sequence_split(s)) {
      std::vector<CatId> cats;
      cats.reserve(ex.prefix.size());
      for (const ItemId it : ex.prefix) cats.push_back(catalog.category(it));
      examples.push_back(std::move(ex));
      example_cats.push_back(std::move(cats));
    }
  }
  const std::size_t n_examples = examples.size();

  SessionModel<float> model(config.encoder, catalog.num_items(), catalog.num_categories(),
                            config.seed);
  ParameterStore<float>& ps = model.params();
  AdamConfig adam;
  adam.lr = config.optimizer.lr;
  Rng shuffle_rng(hash_name(config.seed, "train/shuffle"));
  const std::vector<CatId>& cat_of = catalog.category_of();

  RunRecord rec;
  rec.config = config;
  rec.checkpoint_dir = (fs::path(config.out_dir) / "checkpoint").string();
  fs::create_directories(config.out_dir);

  const json meta_base = {{"num_items", catalog.num_items()},
                          {"num_categories", catalog.num_categories()},
                          {"encoder", encoder_to_json(config.encoder)},
                          {"seed", config.seed},
                          {"lambda", config.lambda}};

  const auto t0 = std::chrono::steady_clock::now();
  double best_value = -std::numeric_limits<double>::infinity();
  std::vector<std::size_t> order(n_examples);
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 1; epoch <= config.optimizer.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double sum_acc = 0.0;
    double sum_div = 0.0;
    for (std::size_t start = 0; start < n_examples; start += config.optimizer.batch_size) {
      const std::size_t bsz = std::min(config.optimizer.batch_size, n_examples - start);
      ps.zero_grads();
      double batch_total = 0.0;
      for (std::size_t i = start; i < start + bsz; ++i) {
        const PrefixTarget& ex = examples[order[i]];
        Tape<float> t(&ps);
        const ValueId logits = model.forward_logits(t, ex.prefix, example_cats[order[i]]);
        const ValueId l_acc = t.cross_entropy_from_logits(logits, ex.target);
        // The diversity graph is built even at lambda 0: the zero-scaled
        // branch backpropagates exact zeros, so the lambda=0 run is the
        // plain baseline while keeping one code path.
        const MdlNodes div =
            diversity_graph(t, logits, cat_of, catalog.num_categories(), config.truncate_top_k);
        const ValueId total = composite_loss(t, l_acc, div.l_div, config.lambda);
        t.backward(total, static_cast<float>(1.0 / static_cast<double>(bsz)));
        sum_acc += static_cast<double>(t.value(l_acc).data[0]);
        sum_div += static_cast<double>(t.value(div.l_div).data[0]);
        batch_total += static_cast<double>(t.value(total).data[0]);
      }
      if (!std::isfinite(batch_total))
        throw NumericError("training diverged: non-finite loss at epoch " +
                           std::to_string(epoch));
      ps.adam_step(adam);
    }

    EpochRecord er;
    er.train_loss.l_acc = sum_acc / static_cast<double>(n_examples);
    // Single-precision forward values can overshoot the exact
    // [-log2(C), 0] range by a few float ulps; clamp so the record keeps
    // the double-precision invariant.
    const double div_floor = -std::log2(static_cast<double>(catalog.num_categories()));
    er.train_loss.l_div =
        std::clamp(sum_div / static_cast<double>(n_examples), div_floor, 0.0);
    er.train_loss.lambda = config.lambda;
    er.train_loss.total = er.train_loss.l_acc + config.lambda * er.train_loss.l_div;
    er.train_loss.validate(catalog.num_categories());

    const bool due = epoch % config.eval_every == 0 || epoch == config.optimizer.epochs;
    if (due && !split.valid.empty()) {
      er.valid_report = evaluate_model(model, split.valid, catalog, config.cutoffs, config.betas);
      er.has_valid_report = true;
      const double v = select_value(er.valid_report, config.select);
      if (v > best_value) {
        best_value = v;
        rec.best_epoch = epoch;
        json meta = meta_base;
        meta["epoch"] = epoch;
        save_checkpoint(rec.checkpoint_dir, ps, meta);
      }
    }
    rec.epochs.push_back(std::move(er));
  }
  if (rec.best_epoch == 0) {
    // No validation reports; keep the final parameters.
    json meta = meta_base;
    meta["epoch"] = config.optimizer.epochs;
    save_checkpoint(rec.checkpoint_dir, ps, meta);
  }
  rec.train_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  load_checkpoint(rec.checkpoint_dir, ps);
  const auto t1 = std::chrono::steady_clock::now();
  rec.test_report = evaluate_model(model, split.test, catalog, config.cutoffs, config.betas);
  rec.eval_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t1).count();

  write_text_file(fs::path(config.out_dir) / "run.json", rec.to_json());
  write_text_file(fs::path(config.out_dir) / "metrics.csv",
                  metric_report_csv(run_label(config), rec.test_report));
  return rec;
}

MetricReport evaluate_model(SessionModel<float>& model, const std::vector<Session>& sessions,
                            const ItemCatalog& catalog, const std::vector<std::size_t>& cutoffs,
                            const std::vector<double>& betas, std::ostream* scores_out) {
  if (model.num_items() != catalog.num_items() ||
      model.num_categories() != catalog.num_categories())
    throw ContractError("evaluate: catalog does not match the model");
  if (cutoffs.empty()) throw ContractError("evaluate: no cutoffs");
  const std::size_t top = *std::max_element(cutoffs.begin(), cutoffs.end());
  if (top > catalog.num_items())
    throw ContractError("evaluate: cutoff exceeds the catalog size");

  if (scores_out) *scores_out << "example_id,item_id,score\n";
  std::vector<RecommendationList> recs;
  std::vector<ItemId> targets;
  std::size_t example_id = 0;
  for (const Session& s : sessions) {
    for (const PrefixTarget& ex : sequence_split(s)) {
      std::vector<CatId> cats;
      cats.reserve(ex.prefix.size());
      for (const ItemId it : ex.prefix) cats.push_back(catalog.category(it));
      const ScoreDistribution dist = item_distribution(model.logits(ex.prefix, cats));
      if (scores_out) {
        for (std::size_t i = 0; i < dist.item_probs.size(); ++i) {
          char buf[96];
          std::snprintf(buf, sizeof buf, "%zu,%zu,%.9g\n", example_id, i, dist.item_probs[i]);
          *scores_out << buf;
        }
      }
      recs.push_back(top_n_by_score(dist, top));
      targets.push_back(ex.target);
      ++example_id;
    }
  }
  if (recs.empty()) throw ValidationError("evaluate: no examples");
  return evaluate_examples(recs, targets, catalog, cutoffs, betas);
}

MetricReport evaluate_checkpoint(const std::string& checkpoint_dir, const SplitDataset& split,
                                 const std::vector<std::size_t>& cutoffs,
                                 const std::vector<double>& betas, std::ostream* scores_out) {
  const json manifest = read_checkpoint_manifest(checkpoint_dir);
  std::size_t num_items = 0;
  std::size_t num_categories = 0;
  EncoderConfig enc;
  std::uint64_t seed = 0;
  try {
    const json& meta = manifest.at("meta");
    num_items = meta.at("num_items").get<std::size_t>();
    num_categories = meta.at("num_categories").get<std::size_t>();
    enc = encoder_from_json(meta.at("encoder"));
    seed = meta.at("seed").get<std::uint64_t>();
  } catch (const json::exception& ex) {
    throw SchemaError(std::string("checkpoint meta: ") + ex.what());
  }
  if (num_items != split.catalog.num_items() || num_categories != split.catalog.num_categories())
    throw ContractError("checkpoint was trained on a different catalog");
  SessionModel<float> model(enc, num_items, num_categories, seed);
  load_checkpoint(checkpoint_dir, model.params());
  return evaluate_model(model, split.test, split.catalog, cutoffs, betas, scores_out);
}

SweepResult sweep_lambda(const ExperimentConfig& config, const SplitDataset& split) {
  config.validate();
  if (config.lambda_sweep.empty()) throw ContractError("sweep: empty lambda list");
  if (config.out_dir.empty()) throw ContractError("sweep: out_dir not set");

  SweepResult out;
  std::string csv = "lambda,cutoff";
  for (const std::string& c : metric_columns(config.betas)) csv += "," + c;
  csv += ",ild_minus_one\n";

  for (const double lam : config.lambda_sweep) {
    ExperimentConfig c = config;
    c.lambda = lam;
    c.lambda_sweep.clear();
    char tag[32];
    std::snprintf(tag, sizeof tag, "%g", lam);
    c.out_dir = (fs::path(config.out_dir) / (std::string("lambda_") + tag)).string();
    const RunRecord run = train(c, split);
    for (const auto& [n, values] : run.test_report.per_cutoff) {
      csv += std::string(tag) + "," + std::to_string(n);
      for (const double v : metric_row(values, config.betas)) csv += "," + fmt_double(v);
      csv += "," + fmt_double(values.ild - 1.0) + "\n";
    }
    out.rows.emplace_back(lam, run.test_report);
  }
  out.csv = csv;
  fs::create_directories(config.out_dir);
  write_text_file(fs::path(config.out_dir) / "sweep.csv", csv);
  return out;
}

AblationResult ablate(const ExperimentConfig& config, const SplitDataset& split) {
  config.validate();
  if (config.out_dir.empty()) throw ContractError("ablate: out_dir not set");

  struct Variant {
    const char* name;
    bool use_nca;
    double lambda;
  };
  const Variant variants[] = {{"base", false, 0.0},
                              {"mdl", false, config.lambda},
                              {"nca", true, 0.0},
                              {"dca", true, config.lambda}};

  AblationResult out;
  for (const Variant& v : variants) {
    ExperimentConfig c = config;
    c.encoder.use_nca = v.use_nca;
    if (c.encoder.backbone == Backbone::gru4rec) c.encoder.gru_attention = true;
    c.lambda = v.lambda;
    c.lambda_sweep.clear();
    c.out_dir = (fs::path(config.out_dir) / v.name).string();
    out.runs.emplace_back(v.name, train(c, split));
  }

  std::vector<std::pair<std::string, MetricReport>> rows;
  for (const auto& [name, run] : out.runs) rows.emplace_back(name, run.test_report);

  std::string md = "# Ablation\n\n";
  md += markdown_metric_table(rows, config.betas);
  md += "\n## Mean relative improvement over base\n\n";
  md += "| model | cutoff |";
  for (const std::string& c : metric_columns(config.betas)) md += " " + c + " |";
  md += "\n|---|---|";
  for (std::size_t i = 0; i < metric_columns(config.betas).size(); ++i) md += "---|";
  md += "\n";
  const MetricReport& base = out.runs.front().second.test_report;
  for (std::size_t vi = 1; vi < out.runs.size(); ++vi) {
    const ImprovementReport imp = improvements({{out.runs[vi].second.test_report, base}});
    for (const auto& [n, deltas] : imp.mean_delta) {
      md += "| " + out.runs[vi].first + " | " + std::to_string(n) + " |";
      for (const std::string& c : metric_columns(config.betas)) {
        const auto it = deltas.find(c);
        if (it == deltas.end()) {
          md += " n/a |";
        } else {
          char buf[32];
          std::snprintf(buf, sizeof buf, " %+.2f%% |", 100.0 * it->second);
          md += buf;
        }
      }
      md += "\n";
    }
  }

  out.markdown = md;
  out.csv = csv_metric_table(rows);
  write_text_file(fs::path(config.out_dir) / "ablation.md", out.markdown);
  write_text_file(fs::path(config.out_dir) / "ablation.csv", out.csv);
  return out;
}

double gradcheck_max_rel_error(const EncoderConfig& encoder, double lambda,
                               std::size_t truncate_top_k, double eps) {
  if (lambda < 0.0) throw ContractError("gradcheck: negative lambda");
  const std::size_t n_items = 20;
  const std::size_t n_cats = 4;
  std::vector<CatId> cat_of(n_items);
  for (std::size_t i = 0; i < n_items; ++i) cat_of[i] = static_cast<CatId>(i % n_cats);
  const std::vector<std::vector<ItemId>> prefixes = {{0, 5, 9, 13}, {2, 7}, {19, 1, 4}};
  const std::vector<ItemId> targets = {7, 11, 3};
  std::vector<std::vector<CatId>> prefix_cats;
  for (const auto& p : prefixes) {
    std::vector<CatId> cs;
    for (const ItemId it : p) cs.push_back(cat_of[it]);
    prefix_cats.push_back(std::move(cs));
  }

  SessionModel<double> model(encoder, n_items, n_cats, 77);
  const auto loss_and_grad = [&](ParameterStore<double>& ps) {
    double total = 0.0;
    const double inv_b = 1.0 / static_cast<double>(prefixes.size());
    for (std::size_t e = 0; e < prefixes.size(); ++e) {
      Tape<double> t(&ps);
      const ValueId logits = model.forward_logits(t, prefixes[e], prefix_cats[e]);
      const ValueId l_acc = t.cross_entropy_from_logits(logits, targets[e]);
      const MdlNodes div = diversity_graph(t, logits, cat_of, n_cats, truncate_top_k);
      const ValueId loss = composite_loss(t, l_acc, div.l_div, lambda);
      t.backward(loss, inv_b);
      total += t.value(loss).data[0];
    }
    return total / static_cast<double>(prefixes.size());
  };

  GradCheckOptions opt;
  opt.eps = eps;
  opt.sample = std::size_t{1} << 20;  // full coverage at this scale
  return grad_check<double>(model.params(), loss_and_grad, opt);
}

ReportResult report(const std::string& runs_dir) {
  if (!fs::is_directory(runs_dir)) throw IoError("report: not a directory: " + runs_dir);

  std::vector<std::pair<std::string, MetricReport>> rows;
  const auto add_run = [&rows](const std::string& label, const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    json j;
    try {
      j = json::parse(in);
      rows.emplace_back(label, report_from_json(j.at("test")));
    } catch (const json::exception& ex) {
      throw SchemaError("report: bad run file " + path.string() + ": " + ex.what());
    }
  };

  if (fs::exists(fs::path(runs_dir) / "run.json"))
    add_run(fs::path(runs_dir).filename().string(), fs::path(runs_dir) / "run.json");
  std::vector<fs::path> subdirs;
  for (const auto& entry : fs::directory_iterator(runs_dir))
    if (entry.is_directory() && fs::exists(entry.path() / "run.json"))
      subdirs.push_back(entry.path());
  std::sort(subdirs.begin(), subdirs.end());
  for (const fs::path& d : subdirs) add_run(d.filename().string(), d / "run.json");

  if (rows.empty()) throw ValidationError("report: no run.json found under " + runs_dir);

  // Column set from the first run; improvements() enforced nothing here, so
  // runs with differing beta grids fail when rows are rendered.
  std::vector<double> betas;
  for (const auto& [key, value] : rows.front().second.per_cutoff.begin()->second.f_beta)
    betas.push_back(std::strtod(key.c_str(), nullptr));
  std::sort(betas.begin(), betas.end());

  ReportResult out;
  out.markdown = "# Runs\n\n" + markdown_metric_table(rows, betas);
  out.csv = csv_metric_table(rows);
  return out;
}

}  // namespace dcasr
