#include "oxgen/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "oxgen/error.hpp"
#include "oxgen/special.hpp"

namespace oxgen {

using nlohmann::json;

void GroupedSamples::validate() const {
  if (groups.size() < 2) throw InputError("need at least two groups");
  for (const auto& g : groups)
    if (g.values.size() < 3)
      throw InputError("group '" + g.label + "' has fewer than three observations");
}

namespace {

double poly(const double* c, int n, double x) {
  double r = c[n - 1];
  for (int i = n - 2; i >= 0; --i) r = r * x + c[i];
  return r;
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct SumsOfSquares {
  double between = 0.0;
  double within = 0.0;
  std::size_t k = 0;
  std::size_t n = 0;
  std::vector<double> means;
};

SumsOfSquares sums_of_squares(std::span<const std::vector<double>> groups) {
  SumsOfSquares ss;
  ss.k = groups.size();
  double grand = 0.0;
  for (const auto& g : groups) {
    ss.n += g.size();
    grand += std::accumulate(g.begin(), g.end(), 0.0);
  }
  grand /= static_cast<double>(ss.n);
  for (const auto& g : groups) {
    const double m = mean_of(g);
    ss.means.push_back(m);
    ss.between += static_cast<double>(g.size()) * (m - grand) * (m - grand);
    for (double x : g) ss.within += (x - m) * (x - m);
  }
  return ss;
}

void require_groups(std::span<const std::vector<double>> groups, std::size_t min_size) {
  if (groups.size() < 2) throw InputError("need at least two groups");
  for (const auto& g : groups)
    if (g.size() < min_size)
      throw InputError("each group needs at least " + std::to_string(min_size) + " observations");
}

struct Ranking {
  std::vector<double> mean_rank;  // per group
  std::vector<std::size_t> sizes;
  std::size_t n = 0;
  double tie_sum = 0.0;  // sum of t^3 - t over tie blocks
};

Ranking rank_groups(std::span<const std::vector<double>> groups) {
  struct Obs {
    double value;
    std::size_t group;
  };
  std::vector<Obs> all;
  for (std::size_t g = 0; g < groups.size(); ++g)
    for (double x : groups[g]) all.push_back({x, g});
  std::sort(all.begin(), all.end(), [](const Obs& a, const Obs& b) { return a.value < b.value; });
  Ranking r;
  r.n = all.size();
  r.mean_rank.assign(groups.size(), 0.0);
  r.sizes.resize(groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g) r.sizes[g] = groups[g].size();
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].value == all[i].value) ++j;
    const double t = static_cast<double>(j - i);
    const double mid = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (std::size_t m = i; m < j; ++m) r.mean_rank[all[m].group] += mid;
    r.tie_sum += t * t * t - t;
    i = j;
  }
  for (std::size_t g = 0; g < groups.size(); ++g)
    r.mean_rank[g] /= static_cast<double>(r.sizes[g]);
  return r;
}

}  // namespace

TestResult shapiro_wilk(std::span<const double> sample) {
  const std::size_t n = sample.size();
  if (n < 3 || n > 5000) throw InputError("Shapiro-Wilk needs 3 <= n <= 5000");
  std::vector<double> x(sample.begin(), sample.end());
  std::sort(x.begin(), x.end());
  if (x.back() - x.front() <= 0.0) throw InputError("zero variance");

  static constexpr double c1[] = {0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056};
  static constexpr double c2[] = {0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633};
  static constexpr double c3[] = {0.544, -0.39978, 0.025054, -6.714e-4};
  static constexpr double c4[] = {1.3822, -0.77857, 0.062767, -0.0020322};
  static constexpr double c5[] = {-1.5861, -0.31082, -0.083751, 0.0038915};
  static constexpr double c6[] = {-0.4803, -0.082676, 0.0030302};
  static constexpr double g[] = {-2.273, 0.459};

  const std::size_t half = n / 2;
  const double an = static_cast<double>(n);
  std::vector<double> a(half);
  if (n == 3) {
    a[0] = std::sqrt(0.5);
  } else {
    std::vector<double> m(half);
    double summ2 = 0.0;
    for (std::size_t i = 0; i < half; ++i) {
      m[i] = special::normal_quantile((static_cast<double>(i + 1) - 0.375) / (an + 0.25));
      summ2 += m[i] * m[i];
    }
    summ2 *= 2.0;
    const double ssumm2 = std::sqrt(summ2);
    const double rsn = 1.0 / std::sqrt(an);
    const double a1 = poly(c1, 6, rsn) - m[0] / ssumm2;
    std::size_t first;
    double fac;
    if (n > 5) {
      first = 2;
      const double a2 = -m[1] / ssumm2 + poly(c2, 6, rsn);
      fac = std::sqrt((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) /
                      (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2));
      a[1] = a2;
    } else {
      first = 1;
      fac = std::sqrt((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1));
    }
    a[0] = a1;
    for (std::size_t i = first; i < half; ++i) a[i] = -m[i] / fac;
  }

  // Centre and scale before forming sums for numerical stability.
  const double range = x.back() - x.front();
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= an;
  double ssq = 0.0;
  for (double v : x) {
    const double d = (v - mean) / range;
    ssq += d * d;
  }
  double num = 0.0;
  for (std::size_t i = 0; i < half; ++i) num += a[i] * (x[n - 1 - i] - x[i]) / range;
  double w = std::min(1.0, num * num / ssq);

  TestResult r;
  r.statistic = w;
  if (n == 3) {
    const double pi6 = 6.0 / M_PI;
    const double stqr = std::asin(std::sqrt(0.75));
    r.p = std::clamp(pi6 * (std::asin(std::sqrt(w)) - stqr), 0.0, 1.0);
    return r;
  }
  const double w1 = std::log1p(-w);
  double y = w1;
  double mu;
  double sigma;
  if (n <= 11) {
    const double gamma = poly(g, 2, an);
    if (y >= gamma) {
      r.p = 1e-99;
      return r;
    }
    y = -std::log(gamma - w1);
    mu = poly(c3, 4, an);
    sigma = std::exp(poly(c4, 4, an));
  } else {
    const double xx = std::log(an);
    mu = poly(c5, 4, xx);
    sigma = std::exp(poly(c6, 3, xx));
  }
  r.p = std::clamp(special::normal_sf((y - mu) / sigma), 0.0, 1.0);
  return r;
}

TestResult levene(std::span<const std::vector<double>> groups, LeveneCenter center) {
  require_groups(groups, 2);
  std::vector<std::vector<double>> dev;
  bool all_zero = true;
  for (const auto& g : groups) {
    const double c = center == LeveneCenter::mean ? mean_of(g) : median_of(g);
    std::vector<double> d;
    for (double x : g) {
      d.push_back(std::fabs(x - c));
      if (d.back() != 0.0) all_zero = false;
    }
    dev.push_back(std::move(d));
  }
  if (all_zero) return {0.0, 1.0};
  const auto ss = sums_of_squares(dev);
  const double df1 = static_cast<double>(ss.k - 1);
  const double df2 = static_cast<double>(ss.n - ss.k);
  if (ss.within == 0.0) return {std::numeric_limits<double>::infinity(), 0.0};
  const double f = (ss.between / df1) / (ss.within / df2);
  return {f, special::f_sf(f, df1, df2)};
}

TestResult anova_oneway(std::span<const std::vector<double>> groups) {
  require_groups(groups, 2);
  const auto ss = sums_of_squares(groups);
  if (ss.within == 0.0) throw InputError("degenerate within-variance");
  const double df1 = static_cast<double>(ss.k - 1);
  const double df2 = static_cast<double>(ss.n - ss.k);
  const double f = (ss.between / df1) / (ss.within / df2);
  return {f, special::f_sf(f, df1, df2)};
}

TestResult kruskal_wallis(std::span<const std::vector<double>> groups) {
  require_groups(groups, 1);
  const auto r = rank_groups(groups);
  if (r.n < 3) throw InputError("Kruskal-Wallis needs at least three observations");
  const double n = static_cast<double>(r.n);
  const double correction = 1.0 - r.tie_sum / (n * n * n - n);
  if (correction <= 0.0) throw InputError("all tied");
  double h = 0.0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double d = r.mean_rank[g] - (n + 1.0) / 2.0;
    h += static_cast<double>(r.sizes[g]) * d * d;
  }
  h *= 12.0 / (n * (n + 1.0));
  h /= correction;
  return {h, special::chi2_sf(h, static_cast<double>(groups.size() - 1))};
}

std::vector<PairwiseResult> tukey_hsd(std::span<const std::vector<double>> groups, double alpha) {
  require_groups(groups, 2);
  const auto ss = sums_of_squares(groups);
  if (ss.within == 0.0) throw InputError("degenerate within-variance");
  const double df = static_cast<double>(ss.n - ss.k);
  const double msw = ss.within / df;
  const int k = static_cast<int>(ss.k);
  std::vector<PairwiseResult> out;
  for (std::size_t i = 0; i < groups.size(); ++i)
    for (std::size_t j = i + 1; j < groups.size(); ++j) {
      const double se = std::sqrt(msw / 2.0 *
                                  (1.0 / static_cast<double>(groups[i].size()) +
                                   1.0 / static_cast<double>(groups[j].size())));
      const double q = std::fabs(ss.means[i] - ss.means[j]) / se;
      const double p = std::clamp(special::studentized_range_sf(q, k, df), 0.0, 1.0);
      out.push_back({i, j, q, p, p < alpha});
    }
  return out;
}

std::vector<PairwiseResult> dunn(std::span<const std::vector<double>> groups,
                                 DunnAdjustment adjustment, double alpha) {
  require_groups(groups, 1);
  const auto r = rank_groups(groups);
  const double n = static_cast<double>(r.n);
  if (r.n < 3) throw InputError("Dunn's test needs at least three observations");
  const double variance = n * (n + 1.0) / 12.0 - r.tie_sum / (12.0 * (n - 1.0));
  if (variance <= 0.0) throw InputError("all tied");
  const double pairs = static_cast<double>(groups.size() * (groups.size() - 1) / 2);
  std::vector<PairwiseResult> out;
  for (std::size_t i = 0; i < groups.size(); ++i)
    for (std::size_t j = i + 1; j < groups.size(); ++j) {
      const double se = std::sqrt(variance * (1.0 / static_cast<double>(r.sizes[i]) +
                                              1.0 / static_cast<double>(r.sizes[j])));
      const double z = (r.mean_rank[i] - r.mean_rank[j]) / se;
      double p = 2.0 * special::normal_sf(std::fabs(z));
      if (adjustment == DunnAdjustment::bonferroni) p = std::min(1.0, p * pairs);
      p = std::clamp(p, 0.0, 1.0);
      out.push_back({i, j, z, p, p < alpha});
    }
  return out;
}

Omnibus select_omnibus(std::span<const TestResult> normality, const TestResult& levene_result,
                       double alpha) {
  const bool normal = std::all_of(normality.begin(), normality.end(),
                                  [&](const TestResult& t) { return t.p >= alpha; });
  return normal && levene_result.p >= alpha ? Omnibus::anova : Omnibus::kruskal_wallis;
}

StatReport compare_models(const GroupedSamples& samples, const StatOptions& options) {
  samples.validate();
  if (!(options.alpha > 0.0 && options.alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  std::vector<std::vector<double>> values;
  StatReport rep;
  rep.metric_name = samples.metric_name;
  rep.alpha = options.alpha;
  rep.options = options;
  for (const auto& g : samples.groups) {
    rep.labels.push_back(g.label);
    values.push_back(g.values);
    try {
      rep.normality.push_back(shapiro_wilk(g.values));
    } catch (const InputError& e) {
      throw InputError("Shapiro-Wilk on group '" + g.label + "': " + e.what());
    }
  }
  rep.levene = levene(values, options.levene_center);
  rep.omnibus = select_omnibus(rep.normality, rep.levene, options.alpha);
  if (rep.omnibus == Omnibus::anova) {
    rep.omnibus_result = anova_oneway(values);
    if (rep.omnibus_result.p < options.alpha) rep.posthoc = tukey_hsd(values, options.alpha);
  } else {
    rep.omnibus_result = kruskal_wallis(values);
    if (rep.omnibus_result.p < options.alpha)
      rep.posthoc = dunn(values, options.dunn_adjustment, options.alpha);
  }
  return rep;
}

std::string_view to_string(Omnibus o) {
  return o == Omnibus::anova ? "anova" : "kruskal_wallis";
}

namespace {

json finite_or_string(double v) {
  if (std::isfinite(v)) return v;
  return v > 0 ? "inf" : "-inf";
}

}  // namespace

json stat_report_to_json(const StatReport& r) {
  json normality = json::array();
  for (std::size_t i = 0; i < r.labels.size(); ++i)
    normality.push_back({{"group", r.labels[i]},
                         {"W", r.normality[i].statistic},
                         {"p", r.normality[i].p},
                         {"passes", r.normality[i].p >= r.alpha}});
  const bool all_normal = std::all_of(r.normality.begin(), r.normality.end(),
                                      [&](const TestResult& t) { return t.p >= r.alpha; });
  const bool equal_var = r.levene.p >= r.alpha;
  std::string reason = all_normal && equal_var ? "all groups normal and variances homogeneous"
                       : !all_normal          ? "normality rejected for at least one group"
                                              : "variance homogeneity rejected";
  json posthoc = nullptr;
  if (r.posthoc) {
    posthoc = json::array();
    for (const auto& p : *r.posthoc)
      posthoc.push_back({{"a", r.labels[p.a]},
                         {"b", r.labels[p.b]},
                         {r.omnibus == Omnibus::anova ? "q" : "z", p.statistic},
                         {"p", p.p},
                         {"significant", p.significant}});
  }
  return json{
      {"schema_version", 1},
      {"metric", r.metric_name},
      {"alpha", r.alpha},
      {"groups", r.labels},
      {"normality", {{"test", "shapiro_wilk"}, {"results", normality}, {"all_pass", all_normal}}},
      {"levene",
       {{"center", r.options.levene_center == LeveneCenter::mean ? "mean" : "median"},
        {"F", finite_or_string(r.levene.statistic)},
        {"p", r.levene.p},
        {"passes", equal_var}}},
      {"decision", {{"path", to_string(r.omnibus)}, {"reason", reason}}},
      {"omnibus",
       {{"test", to_string(r.omnibus)},
        {"statistic", r.omnibus_result.statistic},
        {"p", r.omnibus_result.p},
        {"significant", r.omnibus_result.p < r.alpha}}},
      {"posthoc",
       {{"test", r.omnibus == Omnibus::anova ? "tukey_hsd" : "dunn"},
        {"adjustment", r.omnibus == Omnibus::anova
                           ? "studentized_range"
                           : (r.options.dunn_adjustment == DunnAdjustment::bonferroni ? "bonferroni"
                                                                                      : "none")},
        {"pairs", posthoc}}},
  };
}

}  // namespace oxgen
