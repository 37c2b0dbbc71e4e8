#include <atomic>
#include <fstream>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "oxgen/fileio.hpp"
#include "oxgen/genclient.hpp"
#include "support.hpp"

using namespace oxgen;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

CurationRecord pending(const std::string& id, const std::string& backend = "stub",
                       const std::string& prompt = "p") {
  CurationRecord r;
  r.image_id = id;
  r.backend = backend;
  r.prompt = prompt;
  r.request_id = "req";
  r.file = "images/" + id + ".png";
  r.size = 1024;
  return r;
}

CostEntry cost(int n) { return {"req", "stub", n, 1024, 2, 2LL * n}; }

std::vector<CurationRecord> make_records(std::size_t generated, std::size_t kept, const std::string& backend) {
  std::vector<CurationRecord> out;
  for (std::size_t i = 0; i < generated; ++i) {
    auto r = pending(backend + std::to_string(i), backend);
    if (i < kept) r.decision = Decision::keep;
    out.push_back(r);
  }
  return out;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("request validation") {
  GenRequest r;
  CHECK_NOTHROW(r.validate());
  r.n = 11;
  CHECK_THROWS_AS(r.validate(), ConfigError);
  r.n = 0;
  CHECK_THROWS_AS(r.validate(), ConfigError);
  r.n = 1;
  r.size = 300;
  CHECK_THROWS_AS(r.validate(), ConfigError);
  r.size = 256;
  r.prompt.clear();
  CHECK_THROWS_AS(r.validate(), ConfigError);
}

TEST_CASE("stub backend is deterministic") {
  const auto a = stub_checkerboard(256, 42, 0);
  CHECK(a == stub_checkerboard(256, 42, 0));
  CHECK_FALSE(a == stub_checkerboard(256, 43, 0));
  CHECK_FALSE(a == stub_checkerboard(256, 42, 1));
  CHECK(a.width == 256);
  // 8x8 cells of two colours
  CHECK(a.at(0, 0, 0) == a.at(31, 31, 0));
  CHECK(a.at(0, 0, 1) == a.at(64, 0, 1));
  StubBackend stub;
  GenRequest req;
  req.n = 2;
  req.size = 256;
  req.seed = 9;
  const auto r = stub.generate(req);
  REQUIRE(r.images.size() == 2);
  CHECK(decode_png(r.images[1]) == stub_checkerboard(256, 9, 1));
  CHECK(stub.calls() == 1);
}

TEST_CASE("base64 round trip") {
  CHECK(base64_encode(std::vector<std::uint8_t>{'f', 'o', 'o', 'b'}) == "Zm9vYg==");
  CHECK(base64_decode("Zm9vYg==") == std::vector<std::uint8_t>{'f', 'o', 'o', 'b'});
  CHECK(base64_decode("Zm9v\nYmE=") == std::vector<std::uint8_t>{'f', 'o', 'o', 'b', 'a'});
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    std::vector<std::uint8_t> bytes(rng.below(64));
    for (auto& b : bytes) b = static_cast<std::uint8_t>(rng.below(256));
    CHECK(base64_decode(base64_encode(bytes)) == bytes);
  }
  CHECK_THROWS(base64_decode("@@@@"));
}

TEST_CASE("retry with exponential backoff") {
  RetryPolicy policy{3, std::chrono::milliseconds(100), std::chrono::milliseconds(250)};
  std::vector<long> sleeps;
  SleepFn sleep = [&](std::chrono::milliseconds d) { sleeps.push_back(static_cast<long>(d.count())); };
  int calls = 0;
  const int v = call_with_retries(
      [&] {
        if (++calls < 3) throw TransientError("busy");
        return 7;
      },
      policy, sleep);
  CHECK(v == 7);
  CHECK(sleeps == std::vector<long>{100, 200});
  sleeps.clear();
  calls = 0;
  CHECK_THROWS_AS(call_with_retries([&]() -> int { ++calls; throw TransientError("down"); }, policy, sleep),
                  InputError);
  CHECK(calls == 4);
  CHECK(sleeps == std::vector<long>{100, 200, 250});
  calls = 0;
  CHECK_THROWS_AS(call_with_retries([&]() -> int { ++calls; throw InputError("bad"); }, policy, sleep),
                  InputError);
  CHECK(calls == 1);
}

TEST_CASE("batch generation writes images and charges the ledger") {
  testing::TempDir dir("gen");
  CurationLedger ledger(dir.path());
  auto stub = std::make_shared<StubBackend>();
  BatchGenerator gen(ledger, dir.path(), {}, {}, [](std::chrono::milliseconds) {});
  gen.add_backend(stub);
  GenRequest req;
  req.size = 256;
  req.seed = 5;
  const auto res = gen.generate_batch(req);
  CHECK(res.images.size() == 10);
  CHECK(res.cost.total_cents == 20);
  CHECK(format_cents(ledger.snapshot()->total_cost_cents()) == "$0.20");
  CHECK(fs::exists(dir.path() / "images" / "stub_000001.png"));
  CHECK(fs::exists(dir.path() / "images" / "stub_000010.png"));
  const auto snap = ledger.snapshot();
  CHECK(snap->records.size() == 10);
  for (const auto& [id, r] : snap->records) CHECK(r.decision == Decision::pending);

  req.n = 11;
  CHECK_THROWS_AS(gen.generate_batch(req), ConfigError);
  CHECK(stub->calls() == 1);

  req.n = 3;
  req.backend = "nope";
  CHECK_THROWS_AS(gen.generate_batch(req), ConfigError);
}

TEST_CASE("batch generation failures") {
  testing::TempDir dir("gen");
  CurationLedger ledger(dir.path());
  auto stub = std::make_shared<StubBackend>();
  int sleeps = 0;
  RetryPolicy policy{2, std::chrono::milliseconds(1), std::chrono::milliseconds(1)};
  BatchGenerator gen(ledger, dir.path(), {}, policy, [&](std::chrono::milliseconds) { ++sleeps; });
  gen.add_backend(stub);
  GenRequest req;
  req.n = 2;
  req.size = 256;
  stub->fail_next(2);
  CHECK(gen.generate_batch(req).images.size() == 2);
  CHECK(sleeps == 2);
  stub->fail_next(5);
  CHECK_THROWS_AS(gen.generate_batch(req), InputError);
  stub->fail_next(0);
  stub->set_truncate(true);
  try {
    gen.generate_batch(req);
    FAIL("expected truncated payload error");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("stub-0-") != std::string::npos);
  }
  CHECK(ledger.snapshot()->records.size() == 2);
}

TEST_CASE("decisions and audit trail") {
  CurationLedger ledger;
  ledger.set_clock([] { return std::string("2026-01-01T00:00:00Z"); });
  std::vector<CurationRecord> recs{pending("a"), pending("b")};
  ledger.add_generated(recs, cost(2));
  auto r = ledger.record_decision("a", Decision::keep, Reason::none, "ann");
  CHECK(r.decision == Decision::keep);
  CHECK(r.reason == Reason::none);
  CHECK(r.decided_at == "2026-01-01T00:00:00Z");
  r = ledger.record_decision("b", Decision::discard, Reason::perspective_mismatch);
  CHECK(r.reason == Reason::perspective_mismatch);
  r = ledger.record_decision("a", Decision::discard, Reason::colour_anomaly, "bo");
  CHECK(r.decision == Decision::discard);
  const auto snap = ledger.snapshot();
  REQUIRE(snap->audit.size() == 3);
  CHECK(snap->audit[2].from == Decision::keep);
  CHECK(snap->audit[2].to == Decision::discard);
  CHECK(snap->audit[2].reviewer == "bo");

  CHECK_THROWS_AS(ledger.record_decision("zz", Decision::keep, Reason::none), InputError);
  CHECK_THROWS_AS(ledger.record_decision("a", Decision::keep, Reason::viewing_angle), InputError);
  CHECK_THROWS_AS(ledger.record_decision("a", Decision::discard, Reason::none), InputError);
  CHECK_THROWS_AS(ledger.record_decision("a", Decision::pending, Reason::none), InputError);
  CHECK(ledger.snapshot()->audit.size() == 3);
  CHECK_THROWS_AS(ledger.add_generated(std::vector<CurationRecord>{pending("a")}, cost(1)), InputError);
}

TEST_CASE("enum names round trip") {
  for (auto r : kAllReasons) CHECK(parse_reason(to_string(r)) == r);
  for (auto d : {Decision::pending, Decision::keep, Decision::discard}) CHECK(parse_decision(to_string(d)) == d);
  CHECK_FALSE(parse_reason("blurry").has_value());
  CHECK(to_string(Reason::perspective_mismatch) == "perspective_mismatch");
}

TEST_CASE("ledger persists, compacts and tolerates a torn tail") {
  testing::TempDir dir("gen");
  {
    CurationLedger ledger(dir.path());
    ledger.add_generated(std::vector<CurationRecord>{pending("a"), pending("b"), pending("c")}, cost(3));
    ledger.record_decision("a", Decision::keep, Reason::none);
  }
  {
    CurationLedger ledger(dir.path());
    const auto s = ledger.snapshot();
    CHECK(s->records.size() == 3);
    CHECK(s->records.at("a").decision == Decision::keep);
    CHECK(s->total_cost_cents() == 6);
    ledger.compact();
    ledger.record_decision("b", Decision::discard, Reason::unrealistic_animal);
  }
  CHECK(fs::exists(dir.path() / "ledger.snapshot.json"));
  {
    std::ofstream out(dir.path() / "ledger.jsonl", std::ios::app);
    out << "{\"seq\":99,\"type\":\"deci";
  }
  CurationLedger ledger(dir.path());
  const auto s = ledger.snapshot();
  CHECK(s->records.at("b").decision == Decision::discard);
  CHECK(s->records.at("a").decision == Decision::keep);
  CHECK(s->audit.size() == 2);
  CHECK(s->order == std::vector<std::string>{"a", "b", "c"});
  ledger.record_decision("c", Decision::keep, Reason::none);
  CurationLedger again(dir.path());
  CHECK(again.snapshot()->records.at("c").decision == Decision::keep);
}

TEST_CASE("concurrent mutations are serialized") {
  CurationLedger ledger;
  std::vector<CurationRecord> recs;
  for (int i = 0; i < 40; ++i) recs.push_back(pending("i" + std::to_string(i)));
  ledger.add_generated(recs, cost(40));
  std::vector<std::thread> threads;
  std::atomic<int> reads{0};
  for (int t = 0; t < 4; ++t)
    threads.emplace_back([&, t] {
      for (int i = 0; i < 40; ++i) {
        ledger.record_decision("i" + std::to_string(i), t % 2 ? Decision::keep : Decision::discard,
                               t % 2 ? Reason::none : Reason::viewing_angle, "t" + std::to_string(t));
        const auto s = ledger.snapshot();
        if (s->records.size() == 40) ++reads;
      }
    });
  for (auto& th : threads) th.join();
  const auto s = ledger.snapshot();
  CHECK(s->audit.size() == 160);
  CHECK(reads == 160);
  for (const auto& [id, r] : s->records) {
    // the final state equals the last audit entry for that id
    const auto last = std::find_if(s->audit.rbegin(), s->audit.rend(),
                                   [&](const AuditEntry& a) { return a.image_id == id; });
    REQUIRE(last != s->audit.rend());
    CHECK(r.decision == last->to);
  }
}

TEST_CASE("selection report") {
  auto dalle2 = make_records(1000, 160, "dalle2");
  CHECK(format_fraction(selection_totals(dalle2).fraction) == "16%");
  auto dalle3 = make_records(612, 160, "dalle3");
  CHECK(format_fraction(selection_totals(dalle3).fraction) == "26%");
  CHECK(format_fraction(selection_totals(std::vector<CurationRecord>{}).fraction) == "n/a");
  CHECK(format_fraction(1.0 / 200) == "0.5%");
  auto all = dalle2;
  all.insert(all.end(), dalle3.begin(), dalle3.end());
  all[0].decision = Decision::discard;
  all[0].reason = Reason::viewing_angle;
  all[500].decision = Decision::discard;
  all[500].reason = Reason::colour_anomaly;
  const auto rows = selection_report(all, GroupBy::backend);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].group == "dalle2");
  CHECK(rows[0].generated == 1000);
  CHECK(rows[0].kept == 159);
  CHECK(rows[0].discarded == 2);
  CHECK(rows[0].pending == 839);
  CHECK(rows[1].kept == 160);
  const auto by_prompt = selection_report(all, GroupBy::prompt);
  REQUIRE(by_prompt.size() == 1);
  CHECK(by_prompt[0].generated == 1612);
}

TEST_CASE("decisions CSV export and import") {
  CurationLedger ledger;
  ledger.add_generated(std::vector<CurationRecord>{pending("a"), pending("b"), pending("c")}, cost(3));
  ledger.record_decision("a", Decision::keep, Reason::none);
  const std::string csv = export_decisions_csv(*ledger.snapshot());
  CHECK(csv == "image_id,decision,reason\na,keep,none\nb,pending,none\nc,pending,none\n");

  const std::string in =
      "\xEF\xBB\xBFimage_id,decision,reason\n"
      "b,discard,background_anomaly\n"
      "c,pending,none\n"
      "zz,keep,none\n"
      "a,keep,viewing_angle\n"
      "c,maybe,none\n";
  const auto rep = import_decisions_csv(ledger, in);
  CHECK(rep.applied == 1);
  REQUIRE(rep.errors.size() == 3);
  CHECK(rep.errors[0].path == "line 4");
  CHECK(ledger.snapshot()->records.at("b").reason == Reason::background_anomaly);
  CHECK(ledger.snapshot()->records.at("b").reviewer == "csv-import");
  CHECK_THROWS_AS(import_decisions_csv(ledger, "id,decision\n"), InputError);
}

TEST_CASE("summary JSON") {
  CurationLedger ledger;
  ledger.add_generated(std::vector<CurationRecord>{pending("a"), pending("b")}, cost(2));
  ledger.record_decision("b", Decision::discard, Reason::perspective_mismatch);
  const auto j = summary_json(*ledger.snapshot());
  CHECK(j.at("schema_version") == 1);
  CHECK(j.at("totals").at("generated") == 2);
  CHECK(j.at("totals").at("discarded") == 1);
  CHECK(j.at("cost_cents") == 4);
  CHECK(j.at("cost_display") == "$0.04");
  CHECK(j.at("reasons").size() == kAllReasons.size());
  CHECK(j.at("discard_reasons").at("perspective_mismatch") == 1);
}

TEST_CASE("HTTP backend against a local server") {
  httplib::Server server;
  std::atomic<int> status{200};
  std::atomic<bool> drop_images{false};
  json last_body;
  std::string last_auth;
  std::mutex mu;
  server.Post("/v1/images/generations", [&](const httplib::Request& req, httplib::Response& res) {
    {
      std::lock_guard lock(mu);
      last_body = json::parse(req.body);
      last_auth = req.get_header_value("Authorization");
    }
    res.status = status.load();
    if (res.status != 200) {
      res.set_content("{\"error\":\"nope\"}", "application/json");
      return;
    }
    json data = json::array();
    const int n = drop_images ? 0 : last_body.at("n").get<int>();
    for (int i = 0; i < n; ++i)
      data.push_back({{"b64_json", base64_encode(encode_png(stub_checkerboard(256, 1, i)))}});
    res.set_header("x-request-id", "req-abc");
    res.set_content(json{{"created", 1}, {"data", data}}.dump(), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  HttpBackendConfig cfg;
  cfg.name = "mock";
  cfg.base_url = "http://127.0.0.1:" + std::to_string(port);
  cfg.api_key = "k";
  cfg.timeout_seconds = 5;
  HttpImageBackend backend(cfg);
  GenRequest req;
  req.n = 2;
  req.size = 256;
  auto r = backend.generate(req);
  CHECK(r.response_id == "req-abc");
  REQUIRE(r.images.size() == 2);
  CHECK(decode_png(r.images[1]) == stub_checkerboard(256, 1, 1));
  {
    std::lock_guard lock(mu);
    CHECK(last_body.at("size") == "256x256");
    CHECK(last_body.at("response_format") == "b64_json");
    CHECK(last_auth == "Bearer k");
  }
  status = 429;
  CHECK_THROWS_AS(backend.generate(req), TransientError);
  status = 503;
  CHECK_THROWS_AS(backend.generate(req), TransientError);
  status = 400;
  CHECK_THROWS_AS(backend.generate(req), InputError);

  status = 200;
  drop_images = true;
  testing::TempDir dir("gen");
  CurationLedger ledger(dir.path());
  BatchGenerator gen(ledger, dir.path());
  gen.add_backend(std::make_shared<HttpImageBackend>(cfg));
  req.backend = "mock";
  try {
    gen.generate_batch(req);
    FAIL("expected missing images error");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("req-abc") != std::string::npos);
  }
  server.stop();
  th.join();

  HttpBackendConfig dead = cfg;
  dead.base_url = "http://127.0.0.1:1";
  CHECK_THROWS_AS(HttpImageBackend(dead).generate(req), TransientError);
}
