#include "dcasr/preprocess.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>
#include <zlib.h>

#include "dcasr/errors.hpp"
#include "dcasr/rng.hpp"

namespace dcasr {

namespace {

constexpr std::int64_t kDaySeconds = 86400;

std::string read_file_maybe_gzip(const std::string& path) {
  // gzopen reads plain files transparently, so one code path covers both.
  gzFile f = gzopen(path.c_str(), "rb");
  if (f == nullptr) throw IoError("cannot open " + path);
  std::string out;
  char buf[1 << 16];
  int n = 0;
  while ((n = gzread(f, buf, sizeof buf)) > 0) out.append(buf, static_cast<std::size_t>(n));
  const bool bad = n < 0;
  gzclose(f);
  if (bad) throw IoError("cannot decompress " + path);
  return out;
}

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delim, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t pos = text.find('\n', start);
    if (pos == std::string::npos) pos = text.size();
    std::string line = text.substr(start, pos - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    start = pos + 1;
  }
  return lines;
}

bool parse_i64(const std::string& s, std::int64_t& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && !s.empty();
}

/// Days since 1970-01-01 for a proleptic Gregorian date.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

bool parse_date(const std::string& s, std::int64_t& epoch) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
  std::int64_t y = 0, m = 0, d = 0;
  if (!parse_i64(s.substr(0, 4), y) || !parse_i64(s.substr(5, 2), m) ||
      !parse_i64(s.substr(8, 2), d))
    return false;
  if (m < 1 || m > 12 || d < 1 || d > 31) return false;
  epoch = days_from_civil(y, static_cast<unsigned>(m), static_cast<unsigned>(d)) * kDaySeconds;
  return true;
}

std::size_t require_column(const std::vector<std::string>& header, const std::string& name,
                           const std::string& path) {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end())
    throw SchemaError(path + ": missing required column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

std::unordered_map<std::string, std::string> read_category_table(const std::string& path) {
  const std::vector<std::string> lines = split_lines(read_file_maybe_gzip(path));
  if (lines.empty()) throw SchemaError(path + ": empty category table");
  const char delim = lines.front().find(';') != std::string::npos ? ';' : ',';
  const std::vector<std::string> header = split_line(lines.front(), delim);
  const std::size_t item_col = require_column(header, "itemId", path);
  const std::size_t cat_col = require_column(header, "categoryId", path);
  std::unordered_map<std::string, std::string> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const std::vector<std::string> f = split_line(lines[i], delim);
    if (f.size() <= std::max(item_col, cat_col) || f[item_col].empty()) continue;
    out.emplace(f[item_col], f[cat_col]);
  }
  return out;
}

void canonical_order(std::vector<RawSession>& sessions) {
  std::sort(sessions.begin(), sessions.end(), [](const RawSession& a, const RawSession& b) {
    if (a.timestamps.back() != b.timestamps.back())
      return a.timestamps.back() < b.timestamps.back();
    return a.session_id < b.session_id;
  });
}

/// Stable within-group event order: timestamp, then source order hint.
void sort_events(std::vector<const EventRow*>& rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const EventRow* a, const EventRow* b) {
    if (a->timestamp != b->timestamp) return a->timestamp < b->timestamp;
    return a->order_hint < b->order_hint;
  });
}

RawSession to_session(std::string id, const std::vector<const EventRow*>& rows) {
  RawSession s;
  s.session_id = std::move(id);
  for (const EventRow* r : rows) {
    s.items.push_back(r->item);
    s.categories.push_back(r->category);
    s.timestamps.push_back(r->timestamp);
  }
  return s;
}

std::map<std::string, std::vector<const EventRow*>> group_by_user(const EventLog& events) {
  for (const EventRow& r : events.rows)
    if (r.user_key.empty()) throw ContractError("sessionize: events lack a user key");
  std::map<std::string, std::vector<const EventRow*>> by_user;
  for (const EventRow& r : events.rows) by_user[r.user_key].push_back(&r);
  for (auto& [user, rows] : by_user) sort_events(rows);
  return by_user;
}

}  // namespace

Schema parse_schema(const std::string& name) {
  if (name == "presession") return Schema::presession;
  if (name == "usertime") return Schema::usertime;
  if (name == "diginetica") return Schema::diginetica;
  throw SchemaError("unknown schema '" + name + "'");
}

std::string to_string(Schema s) {
  switch (s) {
    case Schema::presession: return "presession";
    case Schema::usertime: return "usertime";
    case Schema::diginetica: return "diginetica";
  }
  throw ContractError("unhandled schema");
}

EventLog ingest_events(const std::string& path, const IngestOptions& opt) {
  const std::vector<std::string> lines = split_lines(read_file_maybe_gzip(path));
  if (lines.empty()) throw SchemaError(path + ": empty file");

  const char delim = opt.schema == Schema::diginetica ? ';' : ',';
  const std::vector<std::string> header = split_line(lines.front(), delim);

  std::size_t session_col = 0, user_col = 0, item_col = 0, cat_col = 0, ts_col = 0, date_col = 0;
  bool has_user = false, has_cat = false;
  if (opt.schema == Schema::presession) {
    session_col = require_column(header, "sessionId", path);
    item_col = require_column(header, "itemId", path);
    cat_col = require_column(header, "categoryId", path);
    ts_col = require_column(header, "timestamp", path);
    has_cat = true;
  } else if (opt.schema == Schema::usertime) {
    user_col = require_column(header, "userId", path);
    item_col = require_column(header, "itemId", path);
    cat_col = require_column(header, "categoryId", path);
    ts_col = require_column(header, "timestamp", path);
    has_user = true;
    has_cat = true;
  } else {
    session_col = require_column(header, "sessionId", path);
    item_col = require_column(header, "itemId", path);
    ts_col = require_column(header, "timeframe", path);
    date_col = require_column(header, "eventdate", path);
  }

  std::unordered_map<std::string, std::string> side_categories;
  if (!opt.categories_path.empty()) side_categories = read_category_table(opt.categories_path);

  EventLog log;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const std::vector<std::string> f = split_line(lines[i], delim);
    const auto field = [&](std::size_t col) -> const std::string& {
      static const std::string empty;
      return col < f.size() ? f[col] : empty;
    };

    EventRow row;
    row.item = field(item_col);
    if (opt.schema != Schema::usertime) row.session_key = field(session_col);
    if (has_user) row.user_key = field(user_col);
    if (has_cat) row.category = field(cat_col);

    bool ok = !row.item.empty();
    ok = ok && (opt.schema == Schema::usertime || !row.session_key.empty());
    ok = ok && (!has_user || !row.user_key.empty());
    if (ok && opt.schema == Schema::diginetica) {
      std::int64_t date_epoch = 0, timeframe = 0;
      ok = parse_date(field(date_col), date_epoch) && parse_i64(field(ts_col), timeframe);
      if (ok) {
        row.timestamp = date_epoch;
        row.order_hint = timeframe;
        const auto it = side_categories.find(row.item);
        if (it != side_categories.end()) row.category = it->second;
      }
    } else if (ok) {
      std::int64_t ts = 0;
      ok = parse_i64(field(ts_col), ts);
      if (ok) row.timestamp = opt.timestamps_in_millis ? ts / 1000 : ts;
    }

    if (!ok) {
      ++log.skipped;
      continue;
    }
    log.rows.push_back(std::move(row));
  }
  if (log.rows.empty()) throw ValidationError(path + ": no valid rows after ingestion");
  return log;
}

std::vector<RawSession> group_by_session(const EventLog& events) {
  std::map<std::string, std::vector<const EventRow*>> by_session;
  for (const EventRow& r : events.rows) {
    if (r.session_key.empty()) throw ContractError("group_by_session: event without session key");
    by_session[r.session_key].push_back(&r);
  }
  std::vector<RawSession> out;
  for (auto& [id, rows] : by_session) {
    sort_events(rows);
    out.push_back(to_session(id, rows));
  }
  canonical_order(out);
  return out;
}

std::vector<RawSession> sessionize_idle(const EventLog& events, std::int64_t gap_minutes) {
  if (gap_minutes <= 0) throw ContractError("sessionize_idle: gap must be positive");
  const std::int64_t gap_seconds = gap_minutes * 60;
  std::vector<RawSession> out;
  for (const auto& [user, rows] : group_by_user(events)) {
    std::vector<const EventRow*> current;
    std::size_t counter = 0;
    const auto flush = [&] {
      if (current.empty()) return;
      out.push_back(to_session(user + "#" + std::to_string(counter++), current));
      current.clear();
    };
    for (const EventRow* r : rows) {
      if (!current.empty() && r->timestamp - current.back()->timestamp > gap_seconds) flush();
      current.push_back(r);
    }
    flush();
  }
  canonical_order(out);
  return out;
}

std::vector<RawSession> sessionize_by_day(const EventLog& events) {
  std::vector<RawSession> out;
  for (const auto& [user, rows] : group_by_user(events)) {
    std::vector<const EventRow*> current;
    std::int64_t current_day = 0;
    const auto flush = [&] {
      if (current.empty()) return;
      out.push_back(to_session(user + "@d" + std::to_string(current_day), current));
      current.clear();
    };
    for (const EventRow* r : rows) {
      const std::int64_t day =
          r->timestamp >= 0 ? r->timestamp / kDaySeconds : (r->timestamp - kDaySeconds + 1) / kDaySeconds;
      if (!current.empty() && day != current_day) flush();
      current_day = day;
      current.push_back(r);
    }
    flush();
  }
  canonical_order(out);
  return out;
}

std::vector<RawSession> sample_sessions(const std::vector<RawSession>& sessions, double fraction,
                                        std::uint64_t seed) {
  if (!(fraction > 0.0) || fraction > 1.0)
    throw ContractError("sample_sessions: fraction must be in (0, 1]");
  const std::size_t n = sessions.size();
  const std::size_t k =
      std::min(n, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n))));
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(seed);
  rng.shuffle(idx);
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  std::vector<RawSession> out;
  out.reserve(k);
  for (const std::size_t i : idx) out.push_back(sessions[i]);
  return out;
}

std::pair<std::vector<Session>, ItemCatalog> filter_core(const std::vector<RawSession>& sessions,
                                                         std::size_t min_session_len,
                                                         std::size_t min_item_support) {
  if (sessions.empty()) throw ContractError("filter_core: no sessions");

  std::vector<const RawSession*> survivors;
  for (const RawSession& s : sessions)
    if (s.items.size() >= min_session_len) survivors.push_back(&s);

  std::unordered_map<std::string, std::size_t> support;
  for (const RawSession* s : survivors)
    for (const std::string& item : s->items) ++support[item];

  std::vector<RawSession> kept;
  for (const RawSession* s : survivors) {
    RawSession trimmed;
    trimmed.session_id = s->session_id;
    for (std::size_t i = 0; i < s->items.size(); ++i) {
      if (support.at(s->items[i]) < min_item_support) continue;
      trimmed.items.push_back(s->items[i]);
      trimmed.categories.push_back(s->categories[i]);
      trimmed.timestamps.push_back(s->timestamps[i]);
    }
    if (trimmed.items.size() >= min_session_len) kept.push_back(std::move(trimmed));
  }
  if (kept.empty()) throw ValidationError("filter_core: all sessions eliminated");

  std::vector<std::pair<std::string, std::string>> records;
  std::unordered_set<std::string> seen;
  for (const RawSession& s : kept)
    for (std::size_t i = 0; i < s.items.size(); ++i)
      if (seen.insert(s.items[i]).second) records.emplace_back(s.items[i], s.categories[i]);
  ItemCatalog catalog = validate_catalog(records);

  std::vector<Session> out;
  out.reserve(kept.size());
  for (const RawSession& s : kept) {
    Session d;
    d.session_id = s.session_id;
    d.timestamps = s.timestamps;
    for (const std::string& item : s.items) d.items.push_back(*catalog.find_item(item));
    out.push_back(std::move(d));
  }
  return {std::move(out), std::move(catalog)};
}

SplitDataset temporal_split(const std::vector<Session>& sessions, const ItemCatalog& catalog,
                            std::size_t test_window_days, std::size_t valid_window_days) {
  if (sessions.empty()) throw ContractError("temporal_split: no sessions");
  for (const Session& s : sessions)
    if (!s.has_timestamps()) throw ContractError("temporal_split: sessions lack timestamps");

  std::int64_t max_ts = sessions.front().last_timestamp();
  for (const Session& s : sessions) max_ts = std::max(max_ts, s.last_timestamp());
  const std::int64_t test_cut = max_ts - static_cast<std::int64_t>(test_window_days) * kDaySeconds;

  std::vector<const Session*> test_raw, remainder;
  for (const Session& s : sessions)
    (s.last_timestamp() > test_cut ? test_raw : remainder).push_back(&s);
  if (remainder.empty()) throw ValidationError("temporal_split: empty train after split");
  if (test_raw.empty()) throw ValidationError("temporal_split: empty test after split");

  std::int64_t rem_max = remainder.front()->last_timestamp();
  for (const Session* s : remainder) rem_max = std::max(rem_max, s->last_timestamp());
  const std::int64_t valid_cut =
      rem_max - static_cast<std::int64_t>(valid_window_days) * kDaySeconds;

  std::vector<const Session*> valid_raw, train_raw;
  for (const Session* s : remainder)
    (valid_window_days > 0 && s->last_timestamp() > valid_cut ? valid_raw : train_raw)
        .push_back(s);
  if (train_raw.empty()) throw ValidationError("temporal_split: empty train after split");

  // Re-densify to the train vocabulary; the original UNK category maps back
  // to the empty marker so it keeps its reserved last slot.
  std::vector<std::pair<std::string, std::string>> records;
  std::unordered_set<ItemId> train_items;
  for (const Session* s : train_raw)
    for (const ItemId i : s->items)
      if (train_items.insert(i).second) {
        const std::string& cat_name = catalog.category_name(catalog.category(i));
        records.emplace_back(catalog.item_name(i),
                             cat_name == ItemCatalog::kUnkCategory ? "" : cat_name);
      }
  ItemCatalog dense = validate_catalog(records);

  const auto remap_keep_all = [&](const Session& s) {
    Session d;
    d.session_id = s.session_id;
    d.timestamps = s.timestamps;
    for (const ItemId i : s.items) d.items.push_back(*dense.find_item(catalog.item_name(i)));
    return d;
  };
  const auto remap_drop_unseen = [&](const Session& s, std::vector<Session>& sink) {
    Session d;
    d.session_id = s.session_id;
    for (std::size_t i = 0; i < s.items.size(); ++i) {
      const auto mapped = dense.find_item(catalog.item_name(s.items[i]));
      if (!mapped) continue;
      d.items.push_back(*mapped);
      d.timestamps.push_back(s.timestamps[i]);
    }
    if (d.items.size() >= 2) sink.push_back(std::move(d));
  };

  SplitDataset split;
  for (const Session* s : train_raw) split.train.push_back(remap_keep_all(*s));
  for (const Session* s : valid_raw) remap_drop_unseen(*s, split.valid);
  for (const Session* s : test_raw) remap_drop_unseen(*s, split.test);
  if (split.test.empty()) throw ValidationError("temporal_split: empty test after item drop");
  split.catalog = std::move(dense);
  return split;
}

std::vector<PrefixTarget> sequence_split(const Session& session) {
  if (session.items.size() < 2)
    throw ContractError("sequence_split: session shorter than 2 items");
  std::vector<PrefixTarget> out;
  out.reserve(session.items.size() - 1);
  for (std::size_t k = 1; k < session.items.size(); ++k) {
    PrefixTarget pt;
    pt.prefix.assign(session.items.begin(),
                     session.items.begin() + static_cast<std::ptrdiff_t>(k));
    pt.target = session.items[k];
    out.push_back(std::move(pt));
  }
  return out;
}

void DatasetStats::validate() const {
  if (avg_len < 2.0) throw ValidationError("stats: avg_len below 2");
  if (!(ds > 0.0) || ds > 1.0) throw ValidationError("stats: ds outside (0, 1]");
  if (rr < 0.0 || rr >= 1.0) throw ValidationError("stats: rr outside [0, 1)");
}

std::string DatasetStats::to_json() const {
  nlohmann::json j;
  j["n_interactions"] = n_interactions;
  j["n_train_sessions"] = n_train_sessions;
  j["n_test_sessions"] = n_test_sessions;
  j["n_items"] = n_items;
  j["n_categories"] = n_categories;
  j["avg_len"] = avg_len;
  j["ds"] = ds;
  j["rr"] = rr;
  return j.dump(2);
}

DatasetStats dataset_stats(const SplitDataset& split) {
  DatasetStats st;
  st.n_train_sessions = split.train.size();
  st.n_test_sessions = split.test.size();
  st.n_items = split.catalog.num_items();
  st.n_categories = split.catalog.num_categories();

  std::size_t total_sessions = 0;
  for (const std::vector<Session>* part : {&split.train, &split.valid, &split.test}) {
    total_sessions += part->size();
    for (const Session& s : *part) st.n_interactions += s.items.size();
  }
  if (total_sessions == 0) throw ContractError("dataset_stats: empty split");
  st.avg_len = static_cast<double>(st.n_interactions) / static_cast<double>(total_sessions);

  double ds_sum = 0.0, rr_sum = 0.0;
  for (const Session& s : split.train) {
    std::set<CatId> cats;
    std::set<ItemId> items;
    for (const ItemId i : s.items) {
      cats.insert(split.catalog.category(i));
      items.insert(i);
    }
    const double len = static_cast<double>(s.items.size());
    ds_sum += static_cast<double>(cats.size()) / len;
    rr_sum += 1.0 - static_cast<double>(items.size()) / len;
  }
  if (!split.train.empty()) {
    ds_sum /= static_cast<double>(split.train.size());
    rr_sum /= static_cast<double>(split.train.size());
  }
  st.ds = ds_sum;
  st.rr = rr_sum;
  return st;
}

namespace {

void write_sessions_tsv(const std::string& path, const std::vector<Session>& sessions) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  for (const Session& s : sessions) {
    out << s.session_id << '\t';
    for (std::size_t i = 0; i < s.items.size(); ++i) {
      if (i > 0) out << ',';
      out << s.items[i];
    }
    out << '\t' << s.last_timestamp() << '\n';
  }
  if (!out) throw IoError("write failed for " + path);
}

std::vector<Session> read_sessions_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  std::vector<Session> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> f = split_line(line, '\t');
    if (f.size() != 3)
      throw SchemaError(path + ":" + std::to_string(lineno) + ": expected 3 tab fields");
    Session s;
    s.session_id = f[0];
    std::int64_t last_ts = 0;
    if (!parse_i64(f[2], last_ts))
      throw SchemaError(path + ":" + std::to_string(lineno) + ": bad timestamp");
    for (const std::string& tok : split_line(f[1], ',')) {
      std::int64_t v = 0;
      if (!parse_i64(tok, v))
        throw SchemaError(path + ":" + std::to_string(lineno) + ": bad item id");
      s.items.push_back(static_cast<ItemId>(v));
    }
    s.timestamps.assign(s.items.size(), last_ts);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

void write_split(const std::string& dir, const SplitDataset& split, const DatasetStats& stats) {
  std::filesystem::create_directories(dir);
  write_sessions_tsv(dir + "/train.tsv", split.train);
  write_sessions_tsv(dir + "/valid.tsv", split.valid);
  write_sessions_tsv(dir + "/test.tsv", split.test);

  std::ofstream cat(dir + "/catalog.tsv");
  if (!cat) throw IoError("cannot write " + dir + "/catalog.tsv");
  for (std::size_t i = 0; i < split.catalog.num_items(); ++i) {
    const CatId c = split.catalog.category(static_cast<ItemId>(i));
    cat << i << '\t' << c << '\t' << split.catalog.item_name(static_cast<ItemId>(i)) << '\t'
        << split.catalog.category_name(c) << '\n';
  }
  if (!cat) throw IoError("write failed for " + dir + "/catalog.tsv");

  std::ofstream st(dir + "/stats.json");
  if (!st) throw IoError("cannot write " + dir + "/stats.json");
  st << stats.to_json() << '\n';
  if (!st) throw IoError("write failed for " + dir + "/stats.json");
}

SplitDataset read_split(const std::string& dir) {
  std::ifstream cat(dir + "/catalog.tsv");
  if (!cat) throw IoError("cannot read " + dir + "/catalog.tsv");
  std::vector<CatId> category_of;
  std::vector<std::string> item_names;
  std::vector<std::string> category_names;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(cat, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> f = split_line(line, '\t');
    if (f.size() != 4)
      throw SchemaError(dir + "/catalog.tsv:" + std::to_string(lineno) + ": expected 4 fields");
    std::int64_t item = 0, c = 0;
    if (!parse_i64(f[0], item) || !parse_i64(f[1], c) ||
        item != static_cast<std::int64_t>(category_of.size()) || c < 0)
      throw SchemaError(dir + "/catalog.tsv:" + std::to_string(lineno) + ": bad dense ids");
    category_of.push_back(static_cast<CatId>(c));
    item_names.push_back(f[2]);
    const std::size_t ci = static_cast<std::size_t>(c);
    if (ci >= category_names.size()) category_names.resize(ci + 1);
    if (!category_names[ci].empty() && category_names[ci] != f[3])
      throw SchemaError(dir + "/catalog.tsv:" + std::to_string(lineno) +
                        ": conflicting category names");
    category_names[ci] = f[3];
  }
  for (const std::string& name : category_names)
    if (name.empty()) throw SchemaError(dir + "/catalog.tsv: category index gap");

  SplitDataset split;
  split.catalog = ItemCatalog(std::move(category_of), std::move(item_names),
                              std::move(category_names));
  split.train = read_sessions_tsv(dir + "/train.tsv");
  split.valid = read_sessions_tsv(dir + "/valid.tsv");
  split.test = read_sessions_tsv(dir + "/test.tsv");
  for (const std::vector<Session>* part : {&split.train, &split.valid, &split.test})
    for (const Session& s : *part) s.validate(split.catalog);
  return split;
}

DatasetStats read_stats(const std::string& dir) {
  std::ifstream in(dir + "/stats.json");
  if (!in) throw IoError("cannot read " + dir + "/stats.json");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(dir + "/stats.json: " + e.what());
  }
  DatasetStats st;
  try {
    st.n_interactions = j.at("n_interactions").get<std::size_t>();
    st.n_train_sessions = j.at("n_train_sessions").get<std::size_t>();
    st.n_test_sessions = j.at("n_test_sessions").get<std::size_t>();
    st.n_items = j.at("n_items").get<std::size_t>();
    st.n_categories = j.at("n_categories").get<std::size_t>();
    st.avg_len = j.at("avg_len").get<double>();
    st.ds = j.at("ds").get<double>();
    st.rr = j.at("rr").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(dir + "/stats.json: " + e.what());
  }
  return st;
}

}  // namespace dcasr
