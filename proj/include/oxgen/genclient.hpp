#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "oxgen/annotations.hpp"
#include "oxgen/error.hpp"
#include "oxgen/raster.hpp"

namespace oxgen {

inline constexpr std::string_view kDefaultPrompt =
    "Herd of muskoxen seen from above with a winter background, aerial imagery";
inline constexpr int kMaxBatchSize = 10;
inline constexpr std::array<int, 3> kSupportedSizes = {256, 512, 1024};

struct GenRequest {
  std::string prompt{kDefaultPrompt};
  int n = kMaxBatchSize;
  int size = 1024;
  std::string backend = "stub";
  std::uint64_t seed = 0;

  /// Throws ConfigError for n outside [1, 10] or an unsupported size.
  void validate() const;
};

struct BackendResponse {
  std::string response_id;
  std::vector<std::vector<std::uint8_t>> images;  // PNG payloads
};

/// Failure worth retrying (network error, 429, 5xx).
class TransientError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ImageBackend {
 public:
  virtual ~ImageBackend() = default;
  virtual std::string name() const = 0;
  virtual BackendResponse generate(const GenRequest& request) = 0;
};

/// Deterministic offline backend: checkerboards keyed by (seed, index).
class StubBackend : public ImageBackend {
 public:
  explicit StubBackend(std::string name = "stub") : name_(std::move(name)) {}

  std::string name() const override { return name_; }
  BackendResponse generate(const GenRequest& request) override;

  int calls() const { return calls_; }
  /// Makes the next `n` calls throw TransientError.
  void fail_next(int n) { failures_left_ = n; }
  /// Makes the backend return fewer images than requested.
  void set_truncate(bool truncate) { truncate_ = truncate; }

 private:
  std::string name_;
  int calls_ = 0;
  int failures_left_ = 0;
  bool truncate_ = false;
};

Image stub_checkerboard(int size, std::uint64_t seed, int index);

struct HttpBackendConfig {
  std::string name = "openai";
  std::string base_url = "https://api.openai.com";
  std::string endpoint = "/v1/images/generations";
  std::string model = "dall-e-2";
  std::string api_key;  // from OXGEN_API_KEY
  int timeout_seconds = 120;
};

/// OpenAI-style images endpoint: JSON {model, prompt, n, size,
/// response_format: "b64_json"} answered by {created, data: [{b64_json}]}.
class HttpImageBackend : public ImageBackend {
 public:
  explicit HttpImageBackend(HttpBackendConfig config);
  std::string name() const override { return config_.name; }
  BackendResponse generate(const GenRequest& request) override;

 private:
  HttpBackendConfig config_;
};

std::vector<std::uint8_t> base64_decode(std::string_view text);
std::string base64_encode(std::span<const std::uint8_t> bytes);

struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds initial_delay{500};
  std::chrono::milliseconds max_delay{8000};
};

using SleepFn = std::function<void(std::chrono::milliseconds)>;

/// Exponential backoff on TransientError; other exceptions propagate at once.
template <typename Fn>
auto call_with_retries(Fn&& fn, const RetryPolicy& policy, const SleepFn& sleep) {
  for (int attempt = 0;; ++attempt) {
    try {
      return fn();
    } catch (const TransientError& e) {
      if (attempt >= policy.max_retries) {
        throw InputError("all " + std::to_string(policy.max_retries) +
                                 " retries failed; last failure: " + e.what());
      }
      auto delay = policy.initial_delay * (1LL << std::min(attempt, 30));
      if (delay > policy.max_delay) delay = policy.max_delay;
      if (sleep) sleep(delay);
    }
  }
}

enum class Decision { pending, keep, discard };
enum class Reason {
  none,
  perspective_mismatch,
  unrealistic_animal,
  colour_anomaly,
  background_anomaly,
  viewing_angle,
};
inline constexpr std::array<Reason, 6> kAllReasons = {
    Reason::none,          Reason::perspective_mismatch, Reason::unrealistic_animal,
    Reason::colour_anomaly, Reason::background_anomaly,  Reason::viewing_angle};

std::string_view to_string(Decision d);
std::string_view to_string(Reason r);
std::optional<Decision> parse_decision(std::string_view s);
std::optional<Reason> parse_reason(std::string_view s);

struct CurationRecord {
  std::string image_id;
  Decision decision = Decision::pending;
  Reason reason = Reason::none;
  std::string decided_at;
  std::string reviewer;
  // provenance
  std::string backend;
  std::string prompt;
  std::string request_id;
  std::string file;  // relative to the store directory
  int size = 0;
};

struct AuditEntry {
  std::string image_id;
  Decision from = Decision::pending;
  Decision to = Decision::pending;
  Reason reason = Reason::none;
  std::string decided_at;
  std::string reviewer;
};

struct CostEntry {
  std::string request_id;
  std::string backend;
  int n = 0;
  int size = 0;
  std::int64_t unit_cost_cents = 0;
  std::int64_t total_cents = 0;
};

struct LedgerState {
  std::map<std::string, CurationRecord> records;
  std::vector<std::string> order;  // generation order
  std::vector<AuditEntry> audit;
  std::vector<CostEntry> costs;
  std::uint64_t last_seq = 0;

  std::int64_t total_cost_cents() const;
};

/// Curation and cost ledger. Mutations are serialized and appended to
/// `ledger.jsonl`; readers take immutable snapshots without locking.
/// `compact()` writes `ledger.snapshot.json`, which load() replays the log on top of.
class CurationLedger {
 public:
  using Clock = std::function<std::string()>;

  /// In-memory ledger.
  CurationLedger();
  /// Persistent ledger in `store_dir`; existing state is loaded.
  explicit CurationLedger(std::filesystem::path store_dir);

  void set_clock(Clock clock) { clock_ = std::move(clock); }

  std::shared_ptr<const LedgerState> snapshot() const;

  void add_generated(std::span<const CurationRecord> records, const CostEntry& cost);

  /// Throws InputError for unknown ids, `pending` decisions, keep with a
  /// reason, or discard without one.
  CurationRecord record_decision(const std::string& image_id, Decision decision, Reason reason,
                                 const std::string& reviewer = {});

  void compact() const;

  const std::optional<std::filesystem::path>& store_dir() const { return dir_; }

 private:
  void publish(std::shared_ptr<const LedgerState> next);
  void append_log(const nlohmann::json& event);
  void load();

  std::optional<std::filesystem::path> dir_;
  Clock clock_;
  mutable std::mutex write_mu_;
  std::shared_ptr<const LedgerState> state_;
};

std::string utc_timestamp();

enum class GroupBy { backend, prompt };

struct SelectionRow {
  std::string group;
  std::int64_t generated = 0;
  std::int64_t kept = 0;
  std::int64_t discarded = 0;
  std::int64_t pending = 0;
  std::optional<double> fraction;  // kept / generated
};

std::vector<SelectionRow> selection_report(std::span<const CurationRecord> records, GroupBy by);
SelectionRow selection_totals(std::span<const CurationRecord> records);
std::vector<CurationRecord> records_in_order(const LedgerState& state);

/// Percent at the precision of the published selection table: whole
/// percent from 1% up, one decimal below; "n/a" when undefined.
std::string format_fraction(std::optional<double> fraction);

struct CostTable {
  std::map<int, std::int64_t> unit_cost_cents = {{256, 2}, {512, 2}, {1024, 2}};
  std::int64_t for_size(int size) const;
};

std::string format_cents(std::int64_t cents);

struct GenerateResult {
  std::vector<SurveyImage> images;
  CostEntry cost;
};

/// Runs batches against registered backends, stores PNGs under
/// `<store>/images`, and records them as pending. One batch in flight per
/// backend.
class BatchGenerator {
 public:
  BatchGenerator(CurationLedger& ledger, std::filesystem::path store_dir, CostTable costs = {},
                 RetryPolicy retry = {}, SleepFn sleep = {});

  void add_backend(std::shared_ptr<ImageBackend> backend);
  GenerateResult generate_batch(const GenRequest& request);

 private:
  CurationLedger& ledger_;
  std::filesystem::path store_dir_;
  CostTable costs_;
  RetryPolicy retry_;
  SleepFn sleep_;
  std::mutex registry_mu_;
  std::map<std::string, std::shared_ptr<ImageBackend>> backends_;
  std::map<std::string, std::unique_ptr<std::mutex>> in_flight_;
};

// `image_id,decision,reason` interchange.
inline constexpr std::string_view kDecisionCsvHeader = "image_id,decision,reason";
std::string export_decisions_csv(const LedgerState& state);
struct DecisionImportReport {
  std::size_t applied = 0;
  std::vector<IngestIssue> errors;
};
DecisionImportReport import_decisions_csv(CurationLedger& ledger, std::string_view text,
                                          const std::string& reviewer = "csv-import");

nlohmann::json summary_json(const LedgerState& state);
nlohmann::json record_json(const CurationRecord& r);

}  // namespace oxgen
