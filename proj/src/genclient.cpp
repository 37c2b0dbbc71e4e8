#include "oxgen/genclient.hpp"

#include <openssl/evp.h>

#include <cctype>
#include <cmath>
#include <ctime>
#include <fstream>
#include <thread>

#include "httplib.h"
#include "oxgen/error.hpp"
#include "oxgen/fileio.hpp"
#include "oxgen/random.hpp"

namespace oxgen {

using nlohmann::json;
namespace fs = std::filesystem;

void GenRequest::validate() const {
  if (n < 1 || n > kMaxBatchSize)
    throw ConfigError("batch size n=" + std::to_string(n) + " outside [1, " +
                      std::to_string(kMaxBatchSize) + "]");
  if (std::find(kSupportedSizes.begin(), kSupportedSizes.end(), size) == kSupportedSizes.end())
    throw ConfigError("unsupported image size " + std::to_string(size) +
                      " (expected 256, 512 or 1024)");
  if (prompt.empty()) throw ConfigError("empty prompt");
}

Image stub_checkerboard(int size, std::uint64_t seed, int index) {
  Rng rng(derive_seed(seed, "stub:" + std::to_string(index)));
  std::array<std::array<std::uint8_t, 3>, 2> colours{};
  for (auto& c : colours)
    for (auto& v : c) v = static_cast<std::uint8_t>(rng.below(256));
  const int cell = std::max(1, size / 8);
  Image img(size, size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const auto& c = colours[static_cast<std::size_t>((x / cell + y / cell) % 2)];
      for (int ch = 0; ch < 3; ++ch) img.at(x, y, ch) = c[static_cast<std::size_t>(ch)];
    }
  return img;
}

BackendResponse StubBackend::generate(const GenRequest& request) {
  ++calls_;
  if (failures_left_ > 0) {
    --failures_left_;
    throw TransientError("stub: simulated transient failure");
  }
  BackendResponse r;
  r.response_id = name_ + "-" + std::to_string(request.seed) + "-" + std::to_string(calls_);
  const int count = truncate_ ? request.n - 1 : request.n;
  for (int i = 0; i < count; ++i)
    r.images.push_back(encode_png(stub_checkerboard(request.size, request.seed, i)));
  return r;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  std::string clean;
  clean.reserve(text.size());
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) clean.push_back(c);
  if (clean.size() % 4 != 0) throw InputError("base64 length is not a multiple of 4");
  std::vector<std::uint8_t> out(clean.size() / 4 * 3);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(clean.data()),
                                static_cast<int>(clean.size()));
  if (n < 0) throw InputError("invalid base64 payload");
  std::size_t pad = 0;
  if (!clean.empty() && clean.back() == '=') ++pad;
  if (clean.size() > 1 && clean[clean.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out((bytes.size() + 2) / 3 * 4 + 1, '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

HttpImageBackend::HttpImageBackend(HttpBackendConfig config) : config_(std::move(config)) {
  if (config_.base_url.empty()) throw ConfigError("backend '" + config_.name + "': empty base_url");
}

BackendResponse HttpImageBackend::generate(const GenRequest& request) {
  httplib::Client client(config_.base_url);
  client.set_connection_timeout(config_.timeout_seconds);
  client.set_read_timeout(config_.timeout_seconds);
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
  const std::string size = std::to_string(request.size) + "x" + std::to_string(request.size);
  const json body = {{"model", config_.model},           {"prompt", request.prompt},
                     {"n", request.n},                   {"size", size},
                     {"response_format", "b64_json"}};
  auto res = client.Post(config_.endpoint, headers, body.dump(), "application/json");
  if (!res) throw TransientError("HTTP request failed: " + httplib::to_string(res.error()));
  if (res->status == 429 || res->status >= 500)
    throw TransientError("HTTP " + std::to_string(res->status));
  if (res->status != 200)
    throw InputError("backend '" + config_.name + "' answered HTTP " +
                     std::to_string(res->status) + ": " + res->body.substr(0, 200));
  json doc;
  try {
    doc = json::parse(res->body);
  } catch (const json::exception& e) {
    throw InputError("backend '" + config_.name + "' returned invalid JSON: " + e.what());
  }
  BackendResponse out;
  if (res->has_header("x-request-id")) out.response_id = res->get_header_value("x-request-id");
  else if (doc.contains("id") && doc["id"].is_string()) out.response_id = doc["id"];
  else if (doc.contains("created")) out.response_id = "created-" + doc["created"].dump();
  else out.response_id = "unknown";
  if (doc.contains("data") && doc["data"].is_array())
    for (const auto& item : doc["data"])
      if (item.contains("b64_json") && item["b64_json"].is_string())
        out.images.push_back(base64_decode(item["b64_json"].get<std::string>()));
  return out;
}

std::string_view to_string(Decision d) {
  switch (d) {
    case Decision::pending: return "pending";
    case Decision::keep: return "keep";
    case Decision::discard: return "discard";
  }
  return "pending";
}

std::string_view to_string(Reason r) {
  switch (r) {
    case Reason::none: return "none";
    case Reason::perspective_mismatch: return "perspective_mismatch";
    case Reason::unrealistic_animal: return "unrealistic_animal";
    case Reason::colour_anomaly: return "colour_anomaly";
    case Reason::background_anomaly: return "background_anomaly";
    case Reason::viewing_angle: return "viewing_angle";
  }
  return "none";
}

std::optional<Decision> parse_decision(std::string_view s) {
  for (auto d : {Decision::pending, Decision::keep, Decision::discard})
    if (to_string(d) == s) return d;
  return std::nullopt;
}

std::optional<Reason> parse_reason(std::string_view s) {
  for (auto r : kAllReasons)
    if (to_string(r) == s) return r;
  return std::nullopt;
}

std::int64_t LedgerState::total_cost_cents() const {
  std::int64_t total = 0;
  for (const auto& c : costs) total += c.total_cents;
  return total;
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

namespace {

json cost_json(const CostEntry& c) {
  return {{"request_id", c.request_id}, {"backend", c.backend},
          {"n", c.n},                   {"size", c.size},
          {"unit_cost_cents", c.unit_cost_cents}, {"total_cents", c.total_cents}};
}

CostEntry cost_from_json(const json& j) {
  CostEntry c;
  c.request_id = j.at("request_id").get<std::string>();
  c.backend = j.at("backend").get<std::string>();
  c.n = j.at("n").get<int>();
  c.size = j.at("size").get<int>();
  c.unit_cost_cents = j.at("unit_cost_cents").get<std::int64_t>();
  c.total_cents = j.at("total_cents").get<std::int64_t>();
  return c;
}

Decision decision_from(const json& j) {
  auto d = parse_decision(j.get<std::string>());
  if (!d) throw InputError("unknown decision '" + j.get<std::string>() + "'");
  return *d;
}

Reason reason_from(const json& j) {
  auto r = parse_reason(j.get<std::string>());
  if (!r) throw InputError("unknown reason '" + j.get<std::string>() + "'");
  return *r;
}

CurationRecord record_from_json(const json& j) {
  CurationRecord r;
  r.image_id = j.at("image_id").get<std::string>();
  r.decision = decision_from(j.at("decision"));
  r.reason = reason_from(j.at("reason"));
  r.decided_at = j.value("decided_at", "");
  r.reviewer = j.value("reviewer", "");
  r.backend = j.value("backend", "");
  r.prompt = j.value("prompt", "");
  r.request_id = j.value("request_id", "");
  r.file = j.value("file", "");
  r.size = j.value("size", 0);
  return r;
}

json audit_json(const AuditEntry& a) {
  return {{"image_id", a.image_id},       {"from", to_string(a.from)},
          {"to", to_string(a.to)},        {"reason", to_string(a.reason)},
          {"decided_at", a.decided_at},   {"reviewer", a.reviewer}};
}

AuditEntry audit_from_json(const json& j) {
  AuditEntry a;
  a.image_id = j.at("image_id").get<std::string>();
  a.from = decision_from(j.at("from"));
  a.to = decision_from(j.at("to"));
  a.reason = reason_from(j.at("reason"));
  a.decided_at = j.value("decided_at", "");
  a.reviewer = j.value("reviewer", "");
  return a;
}

void validate_decision(Decision decision, Reason reason) {
  if (decision == Decision::pending) throw InputError("decision must be keep or discard");
  if (decision == Decision::keep && reason != Reason::none)
    throw InputError("keep requires reason none");
  if (decision == Decision::discard && reason == Reason::none)
    throw InputError("discard requires a reason");
}

// Applies one log event; shared by live mutations and replay.
void apply_event(LedgerState& s, const json& e) {
  const std::string type = e.at("type").get<std::string>();
  if (type == "generated") {
    for (const auto& rj : e.at("records")) {
      auto r = record_from_json(rj);
      if (s.records.count(r.image_id)) throw InputError("duplicate image id '" + r.image_id + "'");
      s.order.push_back(r.image_id);
      s.records.emplace(r.image_id, std::move(r));
    }
    s.costs.push_back(cost_from_json(e.at("cost")));
  } else if (type == "decision") {
    const std::string id = e.at("image_id").get<std::string>();
    auto it = s.records.find(id);
    if (it == s.records.end()) throw InputError("unknown image id '" + id + "'");
    AuditEntry a;
    a.image_id = id;
    a.from = it->second.decision;
    a.to = decision_from(e.at("decision"));
    a.reason = reason_from(e.at("reason"));
    a.decided_at = e.value("decided_at", "");
    a.reviewer = e.value("reviewer", "");
    validate_decision(a.to, a.reason);
    it->second.decision = a.to;
    it->second.reason = a.reason;
    it->second.decided_at = a.decided_at;
    it->second.reviewer = a.reviewer;
    s.audit.push_back(std::move(a));
  } else {
    throw InputError("unknown ledger event '" + type + "'");
  }
  s.last_seq = e.at("seq").get<std::uint64_t>();
}

}  // namespace

json record_json(const CurationRecord& r) {
  return {{"image_id", r.image_id},   {"decision", to_string(r.decision)},
          {"reason", to_string(r.reason)}, {"decided_at", r.decided_at},
          {"reviewer", r.reviewer},   {"backend", r.backend},
          {"prompt", r.prompt},       {"request_id", r.request_id},
          {"file", r.file},           {"size", r.size}};
}

CurationLedger::CurationLedger()
    : clock_(utc_timestamp), state_(std::make_shared<const LedgerState>()) {}

CurationLedger::CurationLedger(fs::path store_dir)
    : dir_(std::move(store_dir)), clock_(utc_timestamp), state_(std::make_shared<const LedgerState>()) {
  fs::create_directories(*dir_);
  load();
}

std::shared_ptr<const LedgerState> CurationLedger::snapshot() const {
  return std::atomic_load(&state_);
}

void CurationLedger::publish(std::shared_ptr<const LedgerState> next) {
  std::atomic_store(&state_, std::move(next));
}

void CurationLedger::append_log(const json& event) {
  if (!dir_) return;
  std::ofstream out(*dir_ / "ledger.jsonl", std::ios::app | std::ios::binary);
  out << event.dump() << '\n';
  out.flush();
  if (!out) throw InputError("cannot append to " + (*dir_ / "ledger.jsonl").string());
}

void CurationLedger::load() {
  auto s = std::make_shared<LedgerState>();
  const fs::path snap = *dir_ / "ledger.snapshot.json";
  if (fs::exists(snap)) {
    try {
      const json j = json::parse(read_text_file(snap));
      for (const auto& rj : j.at("records")) {
        auto r = record_from_json(rj);
        s->order.push_back(r.image_id);
        s->records.emplace(r.image_id, std::move(r));
      }
      for (const auto& a : j.at("audit")) s->audit.push_back(audit_from_json(a));
      for (const auto& c : j.at("costs")) s->costs.push_back(cost_from_json(c));
      s->last_seq = j.at("last_seq").get<std::uint64_t>();
    } catch (const json::exception& e) {
      throw ParseError(snap.string(), e.what());
    }
  }
  const fs::path log = *dir_ / "ledger.jsonl";
  if (fs::exists(log)) {
    const std::string text = read_text_file(log);
    const auto lines = split_lines(text);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      json e;
      try {
        e = json::parse(lines[i]);
      } catch (const json::exception& ex) {
        // An interrupted final append leaves a torn last line; cut it so
        // the next append starts on a fresh line.
        if (i + 1 == lines.size() && text.back() != '\n') {
          fs::resize_file(log, text.rfind('\n') == std::string::npos ? 0 : text.rfind('\n') + 1);
          break;
        }
        throw ParseError(log.string() + " line " + std::to_string(i + 1), ex.what());
      }
      try {
        if (e.at("seq").get<std::uint64_t>() <= s->last_seq) continue;
        apply_event(*s, e);
      } catch (const json::exception& ex) {
        throw ParseError(log.string() + " line " + std::to_string(i + 1), ex.what());
      }
    }
  }
  publish(std::move(s));
}

void CurationLedger::add_generated(std::span<const CurationRecord> records, const CostEntry& cost) {
  std::lock_guard lock(write_mu_);
  auto next = std::make_shared<LedgerState>(*snapshot());
  json recs = json::array();
  for (const auto& r : records) {
    if (r.decision != Decision::pending || r.reason != Reason::none)
      throw InputError("generated record '" + r.image_id + "' must be pending");
    recs.push_back(record_json(r));
  }
  OXGEN_ENSURE(cost.total_cents == cost.unit_cost_cents * cost.n, "cost total != n * unit cost");
  const json event = {{"seq", next->last_seq + 1},
                      {"type", "generated"},
                      {"records", recs},
                      {"cost", cost_json(cost)}};
  apply_event(*next, event);
  append_log(event);
  publish(std::move(next));
}

CurationRecord CurationLedger::record_decision(const std::string& image_id, Decision decision,
                                               Reason reason, const std::string& reviewer) {
  validate_decision(decision, reason);
  std::lock_guard lock(write_mu_);
  auto next = std::make_shared<LedgerState>(*snapshot());
  if (!next->records.count(image_id)) throw InputError("unknown image id '" + image_id + "'");
  const json event = {{"seq", next->last_seq + 1},
                      {"type", "decision"},
                      {"image_id", image_id},
                      {"decision", to_string(decision)},
                      {"reason", to_string(reason)},
                      {"decided_at", clock_()},
                      {"reviewer", reviewer}};
  apply_event(*next, event);
  append_log(event);
  CurationRecord out = next->records.at(image_id);
  publish(std::move(next));
  return out;
}

void CurationLedger::compact() const {
  if (!dir_) return;
  std::lock_guard lock(write_mu_);
  const auto s = snapshot();
  json records = json::array();
  for (const auto& id : s->order) records.push_back(record_json(s->records.at(id)));
  json audit = json::array();
  for (const auto& a : s->audit) audit.push_back(audit_json(a));
  json costs = json::array();
  for (const auto& c : s->costs) costs.push_back(cost_json(c));
  const json j = {{"schema_version", 1}, {"last_seq", s->last_seq}, {"records", records},
                  {"audit", audit},      {"costs", costs}};
  write_file_atomic(*dir_ / "ledger.snapshot.json", j.dump(2) + "\n");
}

std::vector<CurationRecord> records_in_order(const LedgerState& state) {
  std::vector<CurationRecord> out;
  out.reserve(state.order.size());
  for (const auto& id : state.order) out.push_back(state.records.at(id));
  return out;
}

namespace {

void tally(SelectionRow& row, const CurationRecord& r) {
  ++row.generated;
  switch (r.decision) {
    case Decision::keep: ++row.kept; break;
    case Decision::discard: ++row.discarded; break;
    case Decision::pending: ++row.pending; break;
  }
}

void finish(SelectionRow& row) {
  if (row.generated > 0)
    row.fraction = static_cast<double>(row.kept) / static_cast<double>(row.generated);
}

}  // namespace

std::vector<SelectionRow> selection_report(std::span<const CurationRecord> records, GroupBy by) {
  std::vector<SelectionRow> rows;
  std::map<std::string, std::size_t> index;
  for (const auto& r : records) {
    const std::string& key = by == GroupBy::backend ? r.backend : r.prompt;
    auto [it, inserted] = index.emplace(key, rows.size());
    if (inserted) rows.emplace_back().group = key;
    tally(rows[it->second], r);
  }
  for (auto& row : rows) finish(row);
  return rows;
}

SelectionRow selection_totals(std::span<const CurationRecord> records) {
  SelectionRow row;
  row.group = "total";
  for (const auto& r : records) tally(row, r);
  finish(row);
  return row;
}

std::string format_fraction(std::optional<double> fraction) {
  if (!fraction) return "n/a";
  const double pct = *fraction * 100.0;
  if (pct >= 1.0) return std::to_string(static_cast<long long>(std::llround(pct))) + "%";
  return format_fixed(pct, 1) + "%";
}

std::int64_t CostTable::for_size(int size) const {
  auto it = unit_cost_cents.find(size);
  if (it == unit_cost_cents.end())
    throw ConfigError("no unit cost configured for size " + std::to_string(size));
  return it->second;
}

std::string format_cents(std::int64_t cents) {
  const bool neg = cents < 0;
  const std::uint64_t abs = neg ? static_cast<std::uint64_t>(-cents) : static_cast<std::uint64_t>(cents);
  std::string frac = std::to_string(abs % 100);
  if (frac.size() < 2) frac.insert(0, "0");
  return std::string(neg ? "-$" : "$") + std::to_string(abs / 100) + "." + frac;
}

BatchGenerator::BatchGenerator(CurationLedger& ledger, fs::path store_dir, CostTable costs,
                               RetryPolicy retry, SleepFn sleep)
    : ledger_(ledger),
      store_dir_(std::move(store_dir)),
      costs_(std::move(costs)),
      retry_(retry),
      sleep_(sleep ? std::move(sleep) : SleepFn([](std::chrono::milliseconds d) {
        std::this_thread::sleep_for(d);
      })) {}

void BatchGenerator::add_backend(std::shared_ptr<ImageBackend> backend) {
  std::lock_guard lock(registry_mu_);
  const std::string name = backend->name();
  in_flight_.emplace(name, std::make_unique<std::mutex>());
  backends_[name] = std::move(backend);
}

GenerateResult BatchGenerator::generate_batch(const GenRequest& request) {
  request.validate();
  const std::int64_t unit = costs_.for_size(request.size);
  std::shared_ptr<ImageBackend> backend;
  std::mutex* gate = nullptr;
  {
    std::lock_guard lock(registry_mu_);
    auto it = backends_.find(request.backend);
    if (it == backends_.end()) throw ConfigError("unknown backend '" + request.backend + "'");
    backend = it->second;
    gate = in_flight_.at(request.backend).get();
  }
  std::lock_guard batch(*gate);

  BackendResponse response =
      call_with_retries([&] { return backend->generate(request); }, retry_, sleep_);
  if (static_cast<int>(response.images.size()) < request.n)
    throw InputError("backend '" + request.backend + "' returned " +
                     std::to_string(response.images.size()) + " of " + std::to_string(request.n) +
                     " images (response id " + response.response_id + ")");
  response.images.resize(static_cast<std::size_t>(request.n));

  // Ids count per backend; only this backend's batches (serialized above) add to it.
  std::int64_t existing = 0;
  for (const auto& [id, r] : ledger_.snapshot()->records)
    if (r.backend == request.backend) ++existing;

  const fs::path image_dir = store_dir_ / "images";
  fs::create_directories(image_dir);
  GenerateResult result;
  std::vector<CurationRecord> records;
  for (int i = 0; i < request.n; ++i) {
    const auto& bytes = response.images[static_cast<std::size_t>(i)];
    const Image img = decode_png(bytes);
    char num[24];
    std::snprintf(num, sizeof num, "%06lld", static_cast<long long>(existing + i + 1));
    const std::string id = request.backend + "_" + num;
    const fs::path file = image_dir / (id + ".png");
    write_file_atomic(file, std::span<const std::uint8_t>(bytes));

    CurationRecord r;
    r.image_id = id;
    r.backend = request.backend;
    r.prompt = request.prompt;
    r.request_id = response.response_id;
    r.file = "images/" + id + ".png";
    r.size = request.size;
    records.push_back(r);

    SurveyImage s;
    s.id = id;
    s.path = file;
    s.width_px = img.width;
    s.height_px = img.height;
    s.kind = ImageKind::synthetic;
    s.source_tag = request.backend;
    result.images.push_back(std::move(s));
  }
  result.cost = {response.response_id, request.backend, request.n, request.size, unit,
                 unit * request.n};
  ledger_.add_generated(records, result.cost);
  return result;
}

std::string export_decisions_csv(const LedgerState& state) {
  std::string out(kDecisionCsvHeader);
  out += '\n';
  for (const auto& id : state.order) {
    const auto& r = state.records.at(id);
    out += csv_escape(r.image_id) + "," + std::string(to_string(r.decision)) + "," +
           std::string(to_string(r.reason)) + "\n";
  }
  return out;
}

DecisionImportReport import_decisions_csv(CurationLedger& ledger, std::string_view text,
                                          const std::string& reviewer) {
  auto lines = split_lines(text);
  if (lines.empty()) throw ParseError("line 1", "missing header");
  std::string_view header = lines[0];
  if (header.substr(0, 3) == "\xEF\xBB\xBF") header.remove_prefix(3);
  if (header != kDecisionCsvHeader)
    throw ParseError("line 1", "expected header '" + std::string(kDecisionCsvHeader) + "'");
  DecisionImportReport rep;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const std::string where = "line " + std::to_string(i + 1);
    const auto f = split_csv_record(lines[i]);
    if (f.size() != 3) {
      rep.errors.push_back({where, "expected 3 fields, got " + std::to_string(f.size())});
      continue;
    }
    const auto d = parse_decision(f[1]);
    const auto r = f[2].empty() ? std::optional<Reason>(Reason::none) : parse_reason(f[2]);
    if (!d || *d == Decision::pending) {
      // Pending rows come from exports of undecided records; nothing to apply.
      if (d) continue;
      rep.errors.push_back({where, "unknown decision '" + f[1] + "'"});
      continue;
    }
    if (!r) {
      rep.errors.push_back({where, "unknown reason '" + f[2] + "'"});
      continue;
    }
    try {
      ledger.record_decision(f[0], *d, *r, reviewer);
      ++rep.applied;
    } catch (const InputError& e) {
      rep.errors.push_back({where, e.what()});
    }
  }
  return rep;
}

namespace {

json selection_row_json(const SelectionRow& r) {
  return {{"group", r.group},         {"generated", r.generated}, {"kept", r.kept},
          {"discarded", r.discarded}, {"pending", r.pending},
          {"fraction", r.fraction ? json(*r.fraction) : json(nullptr)},
          {"fraction_display", format_fraction(r.fraction)}};
}

}  // namespace

json summary_json(const LedgerState& state) {
  const auto records = records_in_order(state);
  json by_backend = json::array();
  for (const auto& r : selection_report(records, GroupBy::backend))
    by_backend.push_back(selection_row_json(r));
  json by_prompt = json::array();
  for (const auto& r : selection_report(records, GroupBy::prompt))
    by_prompt.push_back(selection_row_json(r));
  json reasons = json::array();
  json discard_reasons = json::object();
  for (auto r : kAllReasons) {
    reasons.push_back(to_string(r));
    if (r != Reason::none) discard_reasons[std::string(to_string(r))] = 0;
  }
  for (const auto& r : records)
    if (r.decision == Decision::discard)
      discard_reasons[std::string(to_string(r.reason))] =
          discard_reasons[std::string(to_string(r.reason))].get<int>() + 1;
  const auto cost = state.total_cost_cents();
  return {{"schema_version", 1},
          {"totals", selection_row_json(selection_totals(records))},
          {"by_backend", by_backend},
          {"by_prompt", by_prompt},
          {"reasons", reasons},
          {"discard_reasons", discard_reasons},
          {"cost_cents", cost},
          {"cost_display", format_cents(cost)}};
}

}  // namespace oxgen
