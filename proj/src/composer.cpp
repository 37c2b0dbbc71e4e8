#include "oxgen/composer.hpp"

#include <algorithm>
#include <cmath>

#include "oxgen/error.hpp"
#include "oxgen/random.hpp"

namespace oxgen {

using nlohmann::json;

namespace {

constexpr int kSchemaVersion = 1;

struct ScheduleRow {
  Schedule schedule;
  std::string_view name;
  ScheduleCounts counts;
};

constexpr ScheduleRow kTable[] = {
    {Schedule::BL, "BL", {96, 0}},    {Schedule::ZS1, "ZS1", {0, 30}},
    {Schedule::ZS2, "ZS2", {0, 60}},  {Schedule::ZS3, "ZS3", {0, 96}},
    {Schedule::ZS4, "ZS4", {0, 130}}, {Schedule::ZS5, "ZS5", {0, 160}},
    {Schedule::FS1, "FS1", {96, 30}}, {Schedule::FS2, "FS2", {96, 60}},
    {Schedule::FS3, "FS3", {96, 96}}, {Schedule::FS4, "FS4", {96, 130}},
    {Schedule::FS5, "FS5", {96, 160}},
};

std::vector<SurveyImage> take_shuffled(std::span<const SurveyImage> pool, std::size_t count,
                                       Rng& rng) {
  std::vector<SurveyImage> v(pool.begin(), pool.end());
  rng.shuffle(v);
  v.resize(std::min(count, v.size()));
  return v;
}

}  // namespace

std::string_view to_string(Schedule s) {
  for (const auto& row : kTable)
    if (row.schedule == s) return row.name;
  return "custom";
}

std::optional<Schedule> parse_schedule(std::string_view s) {
  for (const auto& row : kTable)
    if (row.name == s) return row.schedule;
  if (s == "custom") return Schedule::custom;
  return std::nullopt;
}

ScheduleCounts schedule_counts(Schedule s) {
  for (const auto& row : kTable)
    if (row.schedule == s) return row.counts;
  throw ConfigError("custom schedules carry explicit counts");
}

std::vector<std::string> DatasetManifest::image_ids() const {
  std::vector<std::string> ids;
  ids.reserve(size());
  for (const auto& im : real_images) ids.push_back(im.id);
  for (const auto& im : synthetic_images) ids.push_back(im.id);
  return ids;
}

DatasetManifest compose(Schedule schedule, std::span<const SurveyImage> real_pool,
                        std::span<const SurveyImage> synthetic_pool, std::uint64_t seed,
                        const ComposeOptions& options) {
  ScheduleCounts counts;
  if (schedule == Schedule::custom) {
    if (!options.custom_counts) throw ConfigError("custom schedule requires explicit counts");
    counts = *options.custom_counts;
    if (counts.real < 0 || counts.synthetic < 0) throw ConfigError("counts must be non-negative");
  } else {
    counts = schedule_counts(schedule);
  }
  for (const auto& im : real_pool)
    if (im.kind != ImageKind::real) throw InputError("synthetic image '" + im.id + "' in the real pool");
  for (const auto& im : synthetic_pool)
    if (im.kind != ImageKind::synthetic)
      throw InputError("real image '" + im.id + "' in the synthetic pool");

  if (!options.allow_short_pool) {
    std::string shortfall;
    if (real_pool.size() < static_cast<std::size_t>(counts.real))
      shortfall += "real pool has " + std::to_string(real_pool.size()) + ", needs " +
                   std::to_string(counts.real) + " (short by " +
                   std::to_string(counts.real - real_pool.size()) + ")";
    if (synthetic_pool.size() < static_cast<std::size_t>(counts.synthetic)) {
      if (!shortfall.empty()) shortfall += "; ";
      shortfall += "synthetic pool has " + std::to_string(synthetic_pool.size()) + ", needs " +
                   std::to_string(counts.synthetic) + " (short by " +
                   std::to_string(counts.synthetic - synthetic_pool.size()) + ")";
    }
    if (!shortfall.empty())
      throw InputError("insufficient pool for " + std::string(to_string(schedule)) + ": " + shortfall);
  }

  Rng rng(derive_seed(seed, "compose"));
  DatasetManifest m;
  m.name = std::string(to_string(schedule));
  m.schedule = schedule;
  m.seed = seed;
  m.real_images = take_shuffled(real_pool, static_cast<std::size_t>(counts.real), rng);
  m.synthetic_images = take_shuffled(synthetic_pool, static_cast<std::size_t>(counts.synthetic), rng);
  return m;
}

std::size_t train_size(std::size_t n, double ratio) {
  return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 0.5));
}

std::pair<DatasetManifest, DatasetManifest> split_train_val(const DatasetManifest& manifest,
                                                            double ratio, std::uint64_t seed) {
  const std::size_t n = manifest.size();
  if (n < 2) throw InputError("a split needs at least two images");
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("split ratio must lie in (0, 1)");
  const std::size_t n_train = train_size(n, ratio);
  if (n_train == 0 || n_train == n)
    throw ConfigError("split ratio leaves the train or validation side empty");

  // Largest-remainder apportionment of the train side across kinds; ties
  // go to the real images.
  const std::size_t n_real = manifest.real_images.size();
  const std::size_t n_syn = manifest.synthetic_images.size();
  const double q_real = ratio * static_cast<double>(n_real);
  const double q_syn = ratio * static_cast<double>(n_syn);
  std::size_t t_real = static_cast<std::size_t>(std::floor(q_real));
  std::size_t t_syn = static_cast<std::size_t>(std::floor(q_syn));
  while (t_real + t_syn < n_train) {
    const double r_real = t_real < n_real ? q_real - static_cast<double>(t_real) : -1.0;
    const double r_syn = t_syn < n_syn ? q_syn - static_cast<double>(t_syn) : -1.0;
    if (r_real >= r_syn)
      ++t_real;
    else
      ++t_syn;
  }

  Rng rng(derive_seed(seed, "split"));
  auto real = manifest.real_images;
  auto syn = manifest.synthetic_images;
  rng.shuffle(real);
  rng.shuffle(syn);

  DatasetManifest train;
  DatasetManifest val;
  for (auto* m : {&train, &val}) {
    m->schedule = manifest.schedule;
    m->seed = seed;
  }
  train.name = manifest.name + "/train";
  val.name = manifest.name + "/val";
  train.real_images.assign(real.begin(), real.begin() + static_cast<std::ptrdiff_t>(t_real));
  val.real_images.assign(real.begin() + static_cast<std::ptrdiff_t>(t_real), real.end());
  train.synthetic_images.assign(syn.begin(), syn.begin() + static_cast<std::ptrdiff_t>(t_syn));
  val.synthetic_images.assign(syn.begin() + static_cast<std::ptrdiff_t>(t_syn), syn.end());
  return {std::move(train), std::move(val)};
}

std::vector<std::size_t> FoldPlan::fold_sizes() const {
  std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
  for (const auto& [id, fold] : assignment) ++sizes[static_cast<std::size_t>(fold)];
  return sizes;
}

FoldPlan plan_folds(const DatasetManifest& manifest, int k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("k must be at least 2");
  auto ids = manifest.image_ids();
  if (ids.size() < static_cast<std::size_t>(k))
    throw InputError("cannot form " + std::to_string(k) + " folds from " +
                     std::to_string(ids.size()) + " images");
  Rng rng(derive_seed(seed, "folds"));
  rng.shuffle(ids);
  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!plan.assignment.emplace(ids[i], static_cast<int>(i % static_cast<std::size_t>(k))).second)
      throw InputError("duplicate image id '" + ids[i] + "' in manifest");
  }
  return plan;
}

std::pair<DatasetManifest, DatasetManifest> fold_split(const DatasetManifest& manifest,
                                                       const FoldPlan& plan, int fold) {
  if (fold < 0 || fold >= plan.k) throw ConfigError("fold index out of range");
  DatasetManifest train;
  DatasetManifest val;
  train.name = manifest.name + "/fold" + std::to_string(fold) + "/train";
  val.name = manifest.name + "/fold" + std::to_string(fold) + "/val";
  for (auto* m : {&train, &val}) {
    m->schedule = manifest.schedule;
    m->seed = plan.seed;
  }
  auto route = [&](const SurveyImage& im, auto member) {
    auto it = plan.assignment.find(im.id);
    if (it == plan.assignment.end())
      throw InputError("image '" + im.id + "' missing from the fold plan");
    ((it->second == fold ? val : train).*member).push_back(im);
  };
  for (const auto& im : manifest.real_images) route(im, &DatasetManifest::real_images);
  for (const auto& im : manifest.synthetic_images) route(im, &DatasetManifest::synthetic_images);
  return {std::move(train), std::move(val)};
}

json manifest_to_json(const DatasetManifest& m) {
  return json{{"schema_version", kSchemaVersion},
              {"name", m.name},
              {"schedule", to_string(m.schedule)},
              {"seed", m.seed},
              {"counts", {{"real", m.real_images.size()}, {"synthetic", m.synthetic_images.size()}}},
              {"real_images", m.real_images},
              {"synthetic_images", m.synthetic_images}};
}

DatasetManifest manifest_from_json(const json& j) {
  if (j.value("schema_version", 0) != kSchemaVersion)
    throw InputError("unsupported manifest schema version");
  DatasetManifest m;
  m.name = j.at("name").get<std::string>();
  const auto schedule = parse_schedule(j.at("schedule").get<std::string>());
  if (!schedule) throw InputError("unknown schedule in manifest");
  m.schedule = *schedule;
  m.seed = j.at("seed").get<std::uint64_t>();
  m.real_images = j.at("real_images").get<std::vector<SurveyImage>>();
  m.synthetic_images = j.at("synthetic_images").get<std::vector<SurveyImage>>();
  return m;
}

json fold_plan_to_json(const FoldPlan& plan, const std::string& manifest_name) {
  json folds = json::array();
  for (int f = 0; f < plan.k; ++f) {
    json ids = json::array();
    for (const auto& [id, fold] : plan.assignment)
      if (fold == f) ids.push_back(id);
    folds.push_back(std::move(ids));
  }
  return json{{"schema_version", kSchemaVersion},
              {"manifest", manifest_name},
              {"k", plan.k},
              {"seed", plan.seed},
              {"folds", std::move(folds)}};
}

FoldPlan fold_plan_from_json(const json& j) {
  if (j.value("schema_version", 0) != kSchemaVersion)
    throw InputError("unsupported fold plan schema version");
  FoldPlan plan;
  plan.k = j.at("k").get<int>();
  plan.seed = j.at("seed").get<std::uint64_t>();
  const auto& folds = j.at("folds");
  if (!folds.is_array() || folds.size() != static_cast<std::size_t>(plan.k))
    throw InputError("fold plan lists the wrong number of folds");
  for (std::size_t f = 0; f < folds.size(); ++f)
    for (const auto& id : folds[f]) plan.assignment[id.get<std::string>()] = static_cast<int>(f);
  return plan;
}

}  // namespace oxgen
