#include <fstream>
#include <sstream>

#include "doctest.h"
#include "oxgen/cli.hpp"
#include "oxgen/evaluator.hpp"
#include "oxgen/fileio.hpp"
#include "support.hpp"
#include "published_folds.hpp"

using namespace oxgen;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

void write(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

json load(const fs::path& p) { return json::parse(slurp(p)); }

std::vector<std::string> csv_rows(const std::string& text) {
  std::vector<std::string> rows;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);)
    if (!line.empty() && line[0] != '#') rows.push_back(line);
  return rows;
}

json image_set(const std::string& prefix, int count, const std::string& kind) {
  json images = json::array();
  for (int i = 0; i < count; ++i)
    images.push_back({{"id", prefix + std::to_string(i)},
                      {"path", "img/" + prefix + std::to_string(i) + ".png"},
                      {"width", 1024},
                      {"height", 1024},
                      {"kind", kind},
                      {"source_tag", ""},
                      {"gsd_cm_per_px", nullptr}});
  return {{"schema_version", 1}, {"kind", "image_set"}, {"command", "fixture"}, {"config", json::object()},
          {"images", images},    {"boxes", json::array()}};
}

// Three patches: a has one hit, one miss and one false alarm; b one hit; c one miss.
void write_eval_fixture(const testing::TempDir& dir) {
  const json patches = {
      {"schema_version", 1},
      {"kind", "patch_manifest"},
      {"command", "fixture"},
      {"config", json::object()},
      {"patches",
       {{{"id", "a"}, {"parent_image_id", "i"}, {"origin_x", 0}, {"origin_y", 0}, {"width", 512}, {"height", 512},
         {"file", "patches/a.png"}, {"labels", {{10, 10}, {100, 100}}}},
        {{"id", "b"}, {"parent_image_id", "i"}, {"origin_x", 256}, {"origin_y", 0}, {"width", 512}, {"height", 512},
         {"file", "patches/b.png"}, {"labels", {{50, 50}}}},
        {{"id", "c"}, {"parent_image_id", "i"}, {"origin_x", 0}, {"origin_y", 256}, {"width", 512}, {"height", 512},
         {"file", "patches/c.png"}, {"labels", {{200, 200}}}}}}};
  write(dir / "patches.json", patches.dump());
  write(dir / "dets.jsonl",
        "{\"patch_id\":\"a\",\"x\":12,\"y\":10,\"score\":0.9}\n"
        "{\"patch_id\":\"a\",\"x\":300,\"y\":300,\"score\":0.8}\n"
        "{\"patch_id\":\"b\",\"x\":50,\"y\":60,\"score\":0.7}\n");
}

}  // namespace

TEST_CASE("evaluate on a three-patch fixture") {
  testing::TempDir dir("cli_eval");
  write_eval_fixture(dir);
  const auto out = (dir / "out").string();
  const auto r = cli({"evaluate", (dir / "patches.json").string(), "--detections", (dir / "dets.jsonl").string(),
                      "--model", "BL", "--fold", "1", "--out", out});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto rows = parse_metrics_csv(slurp(dir / "out" / "metrics.csv"));
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].precision == doctest::Approx(2.0 / 3).epsilon(1e-6));
  CHECK(rows[0].recall == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(rows[0].f1 == doctest::Approx(4.0 / 7).epsilon(1e-6));
  CHECK(rows[0].ap == doctest::Approx(5.0 / 12).epsilon(1e-6));
  CHECK(rows[0].mae == doctest::Approx(1.0 / 3).epsilon(1e-6));
  CHECK(rows[0].rmse == doctest::Approx(std::sqrt(1.0 / 3)).epsilon(1e-6));
  const auto ev = load(dir / "out" / "evaluation.json");
  CHECK(ev.at("schema_version") == 1);
  CHECK(ev.at("stats").at("tp") == 2);
  CHECK(ev.at("stats").at("fp") == 1);
  CHECK(ev.at("stats").at("fn") == 2);
  CHECK(ev.at("config").at("match").at("radius_px") == 30.0);

  // A tighter radius turns b's hit into a miss and a false alarm.
  const auto r2 = cli({"evaluate", (dir / "patches.json").string(), "--detections", (dir / "dets.jsonl").string(),
                       "--radius", "5", "--out", (dir / "out2").string()});
  REQUIRE(r2.code == 0);
  CHECK(load(dir / "out2" / "evaluation.json").at("stats").at("tp") == 1);
}

TEST_CASE("reruns are byte-identical") {
  testing::TempDir dir("cli_idem");
  write_eval_fixture(dir);
  for (const char* sub : {"o1", "o2"})
    REQUIRE(cli({"evaluate", (dir / "patches.json").string(), "--detections", (dir / "dets.jsonl").string(),
                 "--out", (dir / sub).string()})
                .code == 0);
  CHECK(slurp(dir / "o1" / "metrics.csv") == slurp(dir / "o2" / "metrics.csv"));
  CHECK(slurp(dir / "o1" / "evaluation.json") == slurp(dir / "o2" / "evaluation.json"));

  write(dir / "real.json", image_set("r", 120, "real").dump());
  write(dir / "syn.json", image_set("s", 120, "synthetic").dump());
  for (const char* sub : {"c1", "c2"})
    REQUIRE(cli({"compose", "--schedule", "FS3", "--real", (dir / "real.json").string(), "--synthetic",
                 (dir / "syn.json").string(), "--seed", "11", "--out", (dir / sub).string()})
                .code == 0);
  CHECK(slurp(dir / "c1" / "manifest.json") == slurp(dir / "c2" / "manifest.json"));
}

TEST_CASE("compose FS3 takes 96 real and 96 synthetic") {
  testing::TempDir dir("cli_compose");
  write(dir / "real.json", image_set("r", 100, "real").dump());
  write(dir / "syn.json", image_set("s", 200, "synthetic").dump());
  const auto r = cli({"compose", "--schedule", "FS3", "--real", (dir / "real.json").string(), "--synthetic",
                      (dir / "syn.json").string(), "--out", dir.path().string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto m = load(dir / "manifest.json");
  CHECK(m.at("kind") == "dataset_manifest");
  CHECK(m.at("schema_version") == 1);
  CHECK(m.at("counts").at("real") == 96);
  CHECK(m.at("counts").at("synthetic") == 96);
  CHECK(m.at("config").at("training").at("epochs") == 300);

  REQUIRE(cli({"split", (dir / "manifest.json").string(), "--out", dir.path().string()}).code == 0);
  const auto train = load(dir / "train.json"), val = load(dir / "val.json");
  CHECK(train.at("schema_version") == 1);
  REQUIRE(cli({"folds", (dir / "manifest.json").string(), "-k", "4", "--out", dir.path().string()}).code == 0);
  CHECK(load(dir / "folds.json").at("kind") == "fold_plan");

  // ZS5 needs 160 synthetic images; a 90-image pool falls short.
  write(dir / "few.json", image_set("f", 90, "synthetic").dump());
  const auto shortfall = cli({"compose", "--schedule", "ZS5", "--synthetic", (dir / "few.json").string(), "--out",
                              (dir / "bl").string()});
  CHECK(shortfall.code == kExitInput);
  CHECK_FALSE(fs::exists(dir / "bl" / "manifest.json"));
}

TEST_CASE("exit codes") {
  testing::TempDir dir("cli_exit");
  CHECK(cli({"frobnicate"}).code == kExitConfig);
  CHECK(cli({}).code == kExitConfig);
  CHECK(cli({"resize", (dir / "missing.json").string()}).code == kExitInput);
  CHECK(cli({"compose", "--schedule", "XX9", "--out", dir.path().string()}).code == kExitConfig);

  write(dir / "bad.json", R"({"tile":{"overlap":10},"colour":1})");
  CHECK(cli({"folds", "x.json", "--config", (dir / "bad.json").string()}).code == kExitConfig);
  write(dir / "bad2.json", R"({"match":{"radius_px":"far"}})");
  CHECK(cli({"folds", "x.json", "--config", (dir / "bad2.json").string()}).code == kExitConfig);

  write(dir / "notjson.json", "{");
  CHECK(cli({"resize", (dir / "notjson.json").string()}).code == kExitInput);
  write(dir / "wrongkind.json", R"({"schema_version":1,"kind":"fold_plan"})");
  const auto r = cli({"resize", (dir / "wrongkind.json").string()});
  CHECK(r.code == kExitInput);
  CHECK(r.err.find("image_set") != std::string::npos);

  CHECK(cli({"gen", "-n", "11", "--store", (dir / "s").string()}).code == kExitConfig);
}

TEST_CASE("config file values reach artifacts") {
  testing::TempDir dir("cli_cfg");
  write_eval_fixture(dir);
  write(dir / "cfg.json", R"({"match":{"radius_px":5.0,"mode":"optimal"},"seed":3})");
  REQUIRE(cli({"evaluate", (dir / "patches.json").string(), "--detections", (dir / "dets.jsonl").string(),
               "--config", (dir / "cfg.json").string(), "--out", dir.path().string()})
              .code == 0);
  const auto ev = load(dir / "evaluation.json");
  CHECK(ev.at("config").at("match").at("radius_px") == 5.0);
  CHECK(ev.at("config").at("match").at("mode") == "optimal");
  CHECK(ev.at("config").at("seed") == 3);
  CHECK(ev.at("stats").at("tp") == 1);
}

TEST_CASE("stats on the published F1 folds") {
  testing::TempDir dir("cli_stats");
  std::vector<MetricsRow> rows;
  for (const auto& t : testing::kPublishedFolds)
    rows.push_back({t.model, std::to_string(t.fold), t.ap, t.mae, t.mse, t.rmse, t.precision, t.recall, t.f1});
  write(dir / "metrics.csv", write_metrics_csv(rows, "{\"schema_version\":1}"));
  const auto r = cli({"stats", (dir / "metrics.csv").string(), "--models", "BL,ZS1,ZS2,ZS3,ZS4,ZS5", "--out",
                      dir.path().string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto s = load(dir / "stats.json");
  CHECK(s.at("schema_version") == 1);
  CHECK(s.at("kind") == "stat_report");
  CHECK(s.at("groups").size() == 6);
  const auto& norm = s.at("normality");
  bool all_pass = true;
  for (const auto& g : norm.at("results")) all_pass = all_pass && g.at("passes").get<bool>();
  CHECK(norm.at("all_pass") == all_pass);
  const bool levene_pass = s.at("levene").at("passes");
  const std::string path = s.at("decision").at("path");
  CHECK(path == (all_pass && levene_pass ? "anova" : "kruskal_wallis"));
  CHECK(s.at("omnibus").at("test") == path);
  const double p = s.at("omnibus").at("p");
  CHECK(s.at("omnibus").at("significant") == (p < 0.05));
  CHECK(s.at("posthoc").at("pairs").is_null() == (p >= 0.05));
  CHECK(s.at("posthoc").at("test") == (path == "anova" ? "tukey_hsd" : "dunn"));

  CHECK(cli({"stats", (dir / "metrics.csv").string(), "--models", "BL,NOPE", "--out", dir.path().string()}).code ==
        kExitInput);
  CHECK(cli({"stats", (dir / "metrics.csv").string(), "--metric", "iou", "--out", dir.path().string()}).code ==
        kExitConfig);
}

TEST_CASE("gen and curate-import") {
  testing::TempDir dir("cli_gen");
  const auto store = (dir / "store").string();
  auto r = cli({"gen", "-n", "10", "--size", "256", "--store", store});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(r.out.find("$0.20") != std::string::npos);
  REQUIRE(cli({"curate-import", "--store", store, "--export", (dir / "dec.csv").string()}).code == 0);
  const auto exported = slurp(dir / "dec.csv");
  CHECK(exported.rfind("image_id,decision,reason\n", 0) == 0);
  CHECK(csv_rows(exported).size() == 11);

  write(dir / "in.csv", "image_id,decision,reason\nstub_000001,keep,none\nstub_000002,discard,colour_anomaly\n");
  CHECK(cli({"curate-import", (dir / "in.csv").string(), "--store", store}).code == 0);
  write(dir / "bad.csv", "image_id,decision,reason\nstub_000003,keep,viewing_angle\n");
  CHECK(cli({"curate-import", (dir / "bad.csv").string(), "--store", store}).code == kExitInput);
  CurationLedger ledger{fs::path(store)};
  CHECK(ledger.snapshot()->records.at("stub_000002").decision == Decision::discard);
  CHECK(ledger.snapshot()->records.at("stub_000003").decision == Decision::pending);
}

TEST_CASE("ingest, resize and patch from a box CSV") {
  testing::TempDir dir("cli_pipe");
  Image img(800, 600);
  write_png(dir / "img" / "a.png", img);
  write(dir / "boxes.csv",
        "image_id,x_min,y_min,width,height,label\na,100,100,50,50,muskox\na,400,300,50,50,muskox\n");
  auto r = cli({"ingest", (dir / "boxes.csv").string(), "--images", (dir / "img").string(), "--out",
                (dir / "w").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto set = load(dir / "w" / "images.json");
  CHECK(set.at("images").at(0).at("width") == 800);
  CHECK(set.at("boxes").size() == 2);
  r = cli({"resize", (dir / "w" / "images.json").string(), "--out", (dir / "r").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto resized = load(dir / "r" / "images.json");
  CHECK(resized.at("images").at(0).at("width") == 1600);
  r = cli({"patch", (dir / "r" / "images.json").string(), "--out", (dir / "p").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto patches = load(dir / "p" / "patches.json");
  CHECK(patches.at("kind") == "patch_manifest");
  CHECK_FALSE(patches.at("patches").empty());
  for (const auto& p : patches.at("patches")) CHECK(fs::exists(dir / "p" / p.at("file").get<std::string>()));
  r = cli({"augment-preview", (dir / "p" / "patches.json").string(), "--count", "2", "--out", (dir / "a").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(load(dir / "a" / "augment_preview.json").at("items").size() <= 2);
}
