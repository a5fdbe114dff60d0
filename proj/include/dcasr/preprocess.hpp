#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dcasr/domain.hpp"

namespace dcasr {

/// One clickstream event. `order_hint` is a secondary within-session sort
/// key for sources whose timestamps are coarser than the event order
/// (diginetica's day-resolution eventdate plus millisecond timeframe).
struct EventRow {
  std::string session_key;
  std::string user_key;
  std::string item;
  std::string category;
  std::int64_t timestamp = 0;
  std::int64_t order_hint = 0;
};

struct EventLog {
  std::vector<EventRow> rows;
  std::size_t skipped = 0;
};

enum class Schema { presession, usertime, diginetica };

Schema parse_schema(const std::string& name);
std::string to_string(Schema s);

struct IngestOptions {
  Schema schema = Schema::presession;
  bool timestamps_in_millis = false;
  /// Optional side table mapping raw item ids to category ids
  /// (diginetica ships categories in a separate file).
  std::string categories_path;
};

/// Reads a CSV event file (plain or gzip; the .gz suffix is not required).
/// Rows with missing or unparseable required fields are counted in
/// `skipped`; a missing required column raises SchemaError and an input
/// with zero valid rows raises ValidationError.
EventLog ingest_events(const std::string& path, const IngestOptions& opt = {});

/// Raw-id session; produced by sessionization, consumed by filter_core.
struct RawSession {
  std::string session_id;
  std::vector<std::string> items;
  std::vector<std::string> categories;
  std::vector<std::int64_t> timestamps;
};

/// Groups rows that already carry a session key. Within-session order is
/// (timestamp, order_hint, input order); sessions are emitted sorted by
/// (last timestamp, session id).
std::vector<RawSession> group_by_session(const EventLog& events);

/// Splits each user's chronological stream whenever the idle gap strictly
/// exceeds `gap_minutes`.
std::vector<RawSession> sessionize_idle(const EventLog& events, std::int64_t gap_minutes = 30);

/// One session per (user, UTC calendar day).
std::vector<RawSession> sessionize_by_day(const EventLog& events);

/// Keeps a uniform random subset of ceil(fraction * n) sessions,
/// deterministic in `seed`. Relative order is preserved.
std::vector<RawSession> sample_sessions(const std::vector<RawSession>& sessions, double fraction,
                                        std::uint64_t seed);

/// Session-length filter, then item-support filter over the survivors, then
/// one repair pass dropping sessions the item filter shortened below the
/// minimum. No fix-point iteration. Ids are densified into the returned
/// catalog; items with conflicting categories keep the first one seen.
std::pair<std::vector<Session>, ItemCatalog> filter_core(const std::vector<RawSession>& sessions,
                                                         std::size_t min_session_len = 2,
                                                         std::size_t min_item_support = 5);

struct SplitDataset {
  std::vector<Session> train;
  std::vector<Session> valid;
  std::vector<Session> test;
  ItemCatalog catalog;
};

/// Splits on each session's last timestamp: test takes the final
/// `test_window_days`, valid the final `valid_window_days` of the
/// remainder, train the rest. Valid/test items unseen in train are removed
/// and sessions that fall below length 2 are dropped; ids are re-densified
/// to the train vocabulary.
SplitDataset temporal_split(const std::vector<Session>& sessions, const ItemCatalog& catalog,
                            std::size_t test_window_days = 7, std::size_t valid_window_days = 7);

/// Expands a length-n session into its n-1 (prefix, next item) examples.
std::vector<PrefixTarget> sequence_split(const Session& session);

struct DatasetStats {
  std::size_t n_interactions = 0;
  std::size_t n_train_sessions = 0;
  std::size_t n_test_sessions = 0;
  std::size_t n_items = 0;
  std::size_t n_categories = 0;
  double avg_len = 0.0;
  double ds = 0.0;
  double rr = 0.0;

  void validate() const;
  std::string to_json() const;
};

/// avg_len is taken over all splits; ds and rr over train sessions.
DatasetStats dataset_stats(const SplitDataset& split);

/// Writes train/valid/test TSV (`session_id TAB items TAB last-timestamp`),
/// catalog.tsv and stats.json into `dir` (created if needed).
void write_split(const std::string& dir, const SplitDataset& split, const DatasetStats& stats);

/// Reads a directory written by write_split. Per-event timestamps are not
/// stored, so each session's last timestamp is replicated per item.
SplitDataset read_split(const std::string& dir);

DatasetStats read_stats(const std::string& dir);

}  // namespace dcasr
