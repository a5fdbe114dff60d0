#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <zlib.h>

#include "dcasr/preprocess.hpp"

using namespace dcasr;

namespace {

std::filesystem::path test_dir() {
  const auto dir = std::filesystem::temp_directory_path() / "dcasr_preprocess_tests";
  std::filesystem::create_directories(dir);
  return dir;
}

std::string write_text(const std::string& name, const std::string& content) {
  const auto path = test_dir() / name;
  std::ofstream out(path);
  out << content;
  return path.string();
}

std::string write_gzip(const std::string& name, const std::string& content) {
  const auto path = test_dir() / name;
  gzFile f = gzopen(path.string().c_str(), "wb");
  REQUIRE(f != nullptr);
  REQUIRE(gzwrite(f, content.data(), static_cast<unsigned>(content.size())) ==
          static_cast<int>(content.size()));
  gzclose(f);
  return path.string();
}

// 25-event mini log. Hand-traced expectations:
//  - u1 gaps 600/1800/1900 s: the 1800 s gap does not split (strict >),
//    the 1900 s gap does -> u1#0=[a,b,c], u1#1=[a,b,a].
//  - u2 spans midnight (86340 -> 86460) within one idle session.
//  - support 3 removes h (2), q (1); u3 is length-1; u5 collapses.
//  - temporal split: test={u7}, valid={u6}, train=rest; item x never
//    occurs in train, so valid/test drop it.
const char* kMiniLog =
    "userId,itemId,categoryId,timestamp\n"
    "u1,a,X,1000\n"
    "u1,b,X,1600\n"
    "u1,c,Y,3400\n"
    "u1,a,X,5300\n"
    "u1,b,X,5400\n"
    "u1,a,X,5500\n"
    "u2,d,Y,86340\n"
    "u2,f,X,86460\n"
    "u2,f,X,90000\n"
    "u2,f,X,90060\n"
    "u3,h,Z,20000\n"
    "u4,h,Z,30000\n"
    "u4,a,X,30100\n"
    "u4,b,X,30200\n"
    "u5,h,Z,40000\n"
    "u5,q,Z,40100\n"
    "u6,c,Y,1036800\n"
    "u6,d,Y,1036900\n"
    "u6,x,Z,1037000\n"
    "u6,x,Z,1037100\n"
    "u7,x,Z,1987200\n"
    "u7,c,Y,1987300\n"
    "u7,d,Y,1987400\n"
    "u7,c,Y,1987500\n"
    "u7,d,Y,1987600\n";

EventLog mini_log() {
  IngestOptions opt;
  opt.schema = Schema::usertime;
  return ingest_events(write_text("mini.csv", kMiniLog), opt);
}

std::vector<std::string> ids(const std::vector<RawSession>& ss) {
  std::vector<std::string> out;
  for (const auto& s : ss) out.push_back(s.session_id);
  return out;
}

}  // namespace

TEST_CASE("ingest parses the usertime schema and counts skipped rows") {
  const EventLog log = mini_log();
  CHECK(log.rows.size() == 25);
  CHECK(log.skipped == 0);
  CHECK(log.rows.front().user_key == "u1");
  CHECK(log.rows.front().item == "a");
  CHECK(log.rows.front().category == "X");
  CHECK(log.rows.front().timestamp == 1000);

  const std::string path = write_text("malformed.csv",
                                      "userId,itemId,categoryId,timestamp\n"
                                      "u1,a,X,100\n"
                                      "u1,,X,200\n"
                                      "u1,b,X,not_a_number\n"
                                      "u1,c,X,300\n");
  IngestOptions opt;
  opt.schema = Schema::usertime;
  const EventLog l2 = ingest_events(path, opt);
  CHECK(l2.rows.size() == 2);
  CHECK(l2.skipped == 2);
}

TEST_CASE("ingest rejects missing columns, empty results and unknown schemas") {
  IngestOptions opt;
  opt.schema = Schema::usertime;
  const std::string no_ts = write_text("no_ts.csv", "userId,itemId,categoryId\nu1,a,X\n");
  CHECK_THROWS_AS((void)ingest_events(no_ts, opt), SchemaError);

  const std::string all_bad =
      write_text("all_bad.csv", "userId,itemId,categoryId,timestamp\nu1,a,X,zzz\n");
  CHECK_THROWS_AS((void)ingest_events(all_bad, opt), ValidationError);

  CHECK_THROWS_AS((void)ingest_events("/nonexistent/file.csv", opt), IoError);
  CHECK_THROWS_AS((void)parse_schema("parquet"), SchemaError);
  CHECK(parse_schema("presession") == Schema::presession);
  CHECK(to_string(Schema::diginetica) == "diginetica");
}

TEST_CASE("ingest reads gzip and the presession schema") {
  const std::string content =
      "sessionId,itemId,categoryId,timestamp\n"
      "s1,a,X,100\n"
      "s1,b,Y,50\n"
      "s2,c,X,200\n"
      "s2,d,,300\n";
  const std::string path = write_gzip("pre.csv.gz", content);
  const EventLog log = ingest_events(path);
  CHECK(log.rows.size() == 4);

  const std::vector<RawSession> sessions = group_by_session(log);
  REQUIRE(sessions.size() == 2);
  // Within-session order is chronological even when the file is not.
  CHECK(sessions[0].session_id == "s1");
  CHECK(sessions[0].items == std::vector<std::string>{"b", "a"});
  CHECK(sessions[1].session_id == "s2");
  CHECK(sessions[1].categories == std::vector<std::string>{"X", ""});
}

TEST_CASE("ingest parses the diginetica layout with a category side table") {
  const std::string events = write_text("digi.csv",
                                        "sessionId;userId;itemId;timeframe;eventdate\n"
                                        "1;NA;81766;526309;2016-05-09\n"
                                        "1;NA;31331;1031018;2016-05-09\n"
                                        "1;NA;32118;243569;2016-05-09\n"
                                        "2;NA;9654;75848;2016-05-10\n"
                                        "2;NA;bad;;2016-05-10\n");
  const std::string cats = write_text("digi_cats.csv",
                                      "itemId;categoryId\n"
                                      "81766;1028\n"
                                      "31331;977\n"
                                      "9654;58\n");
  IngestOptions opt;
  opt.schema = Schema::diginetica;
  opt.categories_path = cats;
  const EventLog log = ingest_events(events, opt);
  CHECK(log.rows.size() == 4);
  CHECK(log.skipped == 1);
  // 2016-05-09 is 16930 days after the epoch.
  CHECK(log.rows.front().timestamp == 16930LL * 86400);
  CHECK(log.rows.front().category == "1028");
  CHECK(log.rows[2].category.empty());

  const std::vector<RawSession> sessions = group_by_session(log);
  REQUIRE(sessions.size() == 2);
  // Same eventdate: the timeframe column orders the session.
  CHECK(sessions[0].items == std::vector<std::string>{"32118", "81766", "31331"});
}

TEST_CASE("millisecond timestamps are converted on request") {
  const std::string path = write_text("ms.csv",
                                      "userId,itemId,categoryId,timestamp\n"
                                      "u1,a,X,1000999\n");
  IngestOptions opt;
  opt.schema = Schema::usertime;
  opt.timestamps_in_millis = true;
  CHECK(ingest_events(path, opt).rows.front().timestamp == 1000);
}

TEST_CASE("idle sessionization splits on strictly exceeded gaps") {
  const std::vector<RawSession> sessions = sessionize_idle(mini_log(), 30);
  CHECK(ids(sessions) == std::vector<std::string>{"u1#0", "u1#1", "u3#0", "u4#0", "u5#0",
                                                  "u2#0", "u2#1", "u6#0", "u7#0"});
  CHECK(sessions[0].items == std::vector<std::string>{"a", "b", "c"});
  CHECK(sessions[0].timestamps == std::vector<std::int64_t>{1000, 1600, 3400});
  CHECK(sessions[1].items == std::vector<std::string>{"a", "b", "a"});
  // The midnight-spanning pair stays one idle session.
  CHECK(sessions[5].items == std::vector<std::string>{"d", "f"});
  CHECK(sessions[6].items == std::vector<std::string>{"f", "f"});

  EventLog no_user;
  no_user.rows.push_back({"s1", "", "a", "X", 100, 0});
  CHECK_THROWS_AS((void)sessionize_idle(no_user, 30), ContractError);
  CHECK_THROWS_AS((void)sessionize_idle(mini_log(), 0), ContractError);
}

TEST_CASE("by-day sessionization cuts at the UTC midnight") {
  const std::vector<RawSession> sessions = sessionize_by_day(mini_log());
  RawSession day0, day1;
  for (const RawSession& s : sessions) {
    if (s.session_id == "u2@d0") day0 = s;
    if (s.session_id == "u2@d1") day1 = s;
  }
  CHECK(day0.items == std::vector<std::string>{"d"});
  CHECK(day1.items == std::vector<std::string>{"f", "f", "f"});
  CHECK(day1.timestamps.front() == 86460);
}

TEST_CASE("session sampling is a deterministic ceiling-sized subset") {
  std::vector<RawSession> sessions(16);
  for (std::size_t i = 0; i < sessions.size(); ++i) {
    sessions[i].session_id = "s" + std::to_string(i);
    sessions[i].items = {"a", "b"};
    sessions[i].categories = {"X", "X"};
    sessions[i].timestamps = {std::int64_t(i), std::int64_t(i + 1)};
  }

  const auto one = sample_sessions(sessions, 1.0 / 16.0, 7);
  CHECK(one.size() == 1);
  const auto all = sample_sessions(sessions, 1.0, 7);
  REQUIRE(all.size() == 16);
  for (std::size_t i = 0; i < 16; ++i) CHECK(all[i].session_id == sessions[i].session_id);

  const auto a = sample_sessions(sessions, 0.5, 99);
  const auto b = sample_sessions(sessions, 0.5, 99);
  REQUIRE(a.size() == 8);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].session_id == b[i].session_id);

  CHECK_THROWS_AS((void)sample_sessions(sessions, 0.0, 1), ContractError);
  CHECK_THROWS_AS((void)sample_sessions(sessions, 1.5, 1), ContractError);
}

TEST_CASE("core filtering applies length, support and repair passes in order") {
  const std::vector<RawSession> sessions = sessionize_idle(mini_log(), 30);
  const auto [filtered, catalog] = filter_core(sessions, 2, 3);

  REQUIRE(filtered.size() == 7);
  CHECK(filtered[0].session_id == "u1#0");
  CHECK(filtered[1].session_id == "u1#1");
  CHECK(filtered[2].session_id == "u4#0");  // [h,a,b] -> [a,b]
  CHECK(filtered[3].session_id == "u2#0");
  CHECK(filtered[4].session_id == "u2#1");
  CHECK(filtered[5].session_id == "u6#0");
  CHECK(filtered[6].session_id == "u7#0");

  CHECK(catalog.num_items() == 6);  // a b c d f x
  CHECK(catalog.num_categories() == 3);
  CHECK(catalog.item_name(0) == "a");
  CHECK(catalog.item_name(5) == "x");
  CHECK(catalog.category_name(catalog.category(*catalog.find_item("a"))) == "X");
  CHECK(catalog.category_name(catalog.category(*catalog.find_item("c"))) == "Y");
  CHECK(catalog.category_name(catalog.category(*catalog.find_item("x"))) == "Z");

  CHECK(filtered[2].items == std::vector<ItemId>{0, 1});
  CHECK(filtered[2].timestamps == std::vector<std::int64_t>{30100, 30200});

  // Full rescan: every support >= 3, every length >= 2.
  std::map<ItemId, int> support;
  for (const Session& s : filtered) {
    CHECK(s.items.size() >= 2);
    for (const ItemId i : s.items) ++support[i];
  }
  for (const auto& [item, count] : support) CHECK(count >= 3);

  CHECK_THROWS_AS((void)filter_core({}, 2, 3), ContractError);
  RawSession tiny;
  tiny.session_id = "t";
  tiny.items = {"z"};
  tiny.categories = {"X"};
  tiny.timestamps = {1};
  CHECK_THROWS_AS((void)filter_core({tiny}, 2, 1), ValidationError);
}

TEST_CASE("temporal split separates windows and drops train-unseen items") {
  const auto [filtered, catalog] = filter_core(sessionize_idle(mini_log(), 30), 2, 3);
  const SplitDataset split = temporal_split(filtered, catalog, 7, 7);

  REQUIRE(split.train.size() == 5);
  CHECK(split.train[0].session_id == "u1#0");
  CHECK(split.train[4].session_id == "u2#1");
  REQUIRE(split.valid.size() == 1);
  CHECK(split.valid[0].session_id == "u6#0");
  REQUIRE(split.test.size() == 1);
  CHECK(split.test[0].session_id == "u7#0");

  // x never occurs in train: re-densified vocabulary drops it and the
  // category Z disappears with it.
  CHECK(split.catalog.num_items() == 5);
  CHECK(split.catalog.num_categories() == 2);
  CHECK(!split.catalog.find_item("x").has_value());

  CHECK(split.valid[0].items == std::vector<ItemId>{2, 3});
  CHECK(split.test[0].items == std::vector<ItemId>{2, 3, 2, 3});
  CHECK(split.train[3].items == std::vector<ItemId>{3, 4});

  // items(valid|test) subset of items(train), by rescan.
  std::set<ItemId> train_items;
  for (const Session& s : split.train) train_items.insert(s.items.begin(), s.items.end());
  for (const std::vector<Session>* part : {&split.valid, &split.test})
    for (const Session& s : *part)
      for (const ItemId i : s.items) CHECK(train_items.count(i) == 1);

  // All sessions on one day: nothing older than the test window remains.
  std::vector<Session> same_day;
  for (Session s : split.train) {
    s.timestamps.assign(s.items.size(), 1000);
    same_day.push_back(std::move(s));
  }
  CHECK_THROWS_AS((void)temporal_split(same_day, split.catalog, 7, 7), ValidationError);
}

TEST_CASE("sequence split expands a session into prefix-target examples") {
  Session s;
  s.session_id = "s";
  s.items = {1, 2, 3};
  const std::vector<PrefixTarget> ex = sequence_split(s);
  REQUIRE(ex.size() == 2);
  CHECK(ex[0].prefix == std::vector<ItemId>{1});
  CHECK(ex[0].target == 2);
  CHECK(ex[1].prefix == std::vector<ItemId>{1, 2});
  CHECK(ex[1].target == 3);

  Session two;
  two.items = {4, 5};
  REQUIRE(sequence_split(two).size() == 1);
  CHECK(sequence_split(two)[0].prefix == std::vector<ItemId>{4});
  CHECK(sequence_split(two)[0].target == 5);

  Session ten;
  for (ItemId i = 0; i < 10; ++i) ten.items.push_back(i);
  const auto ex10 = sequence_split(ten);
  REQUIRE(ex10.size() == 9);
  for (std::size_t k = 0; k < 9; ++k) CHECK(ex10[k].prefix.size() == k + 1);

  Session one;
  one.items = {1};
  CHECK_THROWS_AS((void)sequence_split(one), ContractError);
}

TEST_CASE("sequence split counts obey the sum law on the golden split") {
  const auto [filtered, catalog] = filter_core(sessionize_idle(mini_log(), 30), 2, 3);
  const SplitDataset split = temporal_split(filtered, catalog, 7, 7);
  std::size_t examples = 0, expect = 0;
  for (const Session& s : split.train) {
    examples += sequence_split(s).size();
    expect += s.items.size() - 1;
  }
  CHECK(examples == expect);
  CHECK(examples == 7);
}

TEST_CASE("dataset statistics match the hand-traced golden values") {
  const auto [filtered, catalog] = filter_core(sessionize_idle(mini_log(), 30), 2, 3);
  const SplitDataset split = temporal_split(filtered, catalog, 7, 7);
  const DatasetStats st = dataset_stats(split);

  CHECK(st.n_interactions == 18);
  CHECK(st.n_train_sessions == 5);
  CHECK(st.n_test_sessions == 1);
  CHECK(st.n_items == 5);
  CHECK(st.n_categories == 2);
  CHECK(st.avg_len == doctest::Approx(18.0 / 7.0).epsilon(1e-12));
  CHECK(st.ds == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(st.rr == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
  st.validate();

  DatasetStats bad = st;
  bad.rr = 1.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("stats formulas on a single handmade session") {
  std::vector<RawSession> raw(1);
  raw[0].session_id = "s";
  raw[0].items = {"a", "b", "a"};
  raw[0].categories = {"A", "B", "A"};
  raw[0].timestamps = {1, 2, 3};
  const auto [sessions, catalog] = filter_core(raw, 2, 1);
  SplitDataset split;
  split.train = sessions;
  split.test = sessions;
  split.catalog = catalog;
  const DatasetStats st = dataset_stats(split);
  CHECK(st.avg_len == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(st.rr == doctest::Approx(1.0 - 2.0 / 3.0).epsilon(1e-12));
  CHECK(st.ds == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("split directories round-trip through write and read") {
  const auto [filtered, catalog] = filter_core(sessionize_idle(mini_log(), 30), 2, 3);
  const SplitDataset split = temporal_split(filtered, catalog, 7, 7);
  const DatasetStats st = dataset_stats(split);

  const std::string dir = (test_dir() / "golden_split").string();
  std::filesystem::remove_all(dir);
  write_split(dir, split, st);

  const SplitDataset back = read_split(dir);
  REQUIRE(back.train.size() == split.train.size());
  for (std::size_t i = 0; i < split.train.size(); ++i) {
    CHECK(back.train[i].session_id == split.train[i].session_id);
    CHECK(back.train[i].items == split.train[i].items);
    CHECK(back.train[i].last_timestamp() == split.train[i].last_timestamp());
  }
  CHECK(back.valid.size() == split.valid.size());
  CHECK(back.test.size() == split.test.size());
  CHECK(back.test[0].items == split.test[0].items);
  CHECK(back.catalog.num_items() == split.catalog.num_items());
  CHECK(back.catalog.num_categories() == split.catalog.num_categories());
  for (std::size_t i = 0; i < back.catalog.num_items(); ++i) {
    const auto id = static_cast<ItemId>(i);
    CHECK(back.catalog.item_name(id) == split.catalog.item_name(id));
    CHECK(back.catalog.category(id) == split.catalog.category(id));
  }

  const DatasetStats st2 = read_stats(dir);
  CHECK(st2.n_interactions == st.n_interactions);
  CHECK(st2.avg_len == doctest::Approx(st.avg_len).epsilon(1e-12));
  CHECK(st2.ds == doctest::Approx(st.ds).epsilon(1e-12));
  CHECK(st2.rr == doctest::Approx(st.rr).epsilon(1e-12));

  CHECK_THROWS_AS((void)read_split((test_dir() / "missing_dir").string()), IoError);
}
