#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>

#include "doctest.h"
#include "oxgen/random.hpp"
#include "oxgen/special.hpp"

using namespace oxgen;

TEST_CASE("incomplete beta against Boost") {
  Rng rng(1);
  for (int i = 0; i < 2000; ++i) {
    const double a = std::exp(rng.uniform(-2.5, 5.5));
    const double b = std::exp(rng.uniform(-2.5, 5.5));
    const double x = rng.uniform(0, 1);
    CHECK(special::incomplete_beta(a, b, x) == doctest::Approx(boost::math::ibeta(a, b, x)).epsilon(1e-9));
  }
  CHECK(special::incomplete_beta(2, 3, 0) == 0.0);
  CHECK(special::incomplete_beta(2, 3, 1) == 1.0);
}

TEST_CASE("incomplete beta frozen values") {
  CHECK(special::incomplete_beta(0.5, 0.5, 0.3) == doctest::Approx(0.36901011956554536).epsilon(1e-12));
  CHECK(special::incomplete_beta(2, 3, 0.4) == doctest::Approx(0.5248).epsilon(1e-12));
  CHECK(special::incomplete_beta(10, 20, 0.35) == doctest::Approx(0.5923866636639051).epsilon(1e-11));
  CHECK(special::incomplete_beta(100, 50, 0.66) == doctest::Approx(0.4240271219993158).epsilon(1e-10));
  CHECK(special::incomplete_beta(0.1, 5, 0.01) == doctest::Approx(0.7690889207843462).epsilon(1e-11));
}

TEST_CASE("incomplete gamma against Boost") {
  Rng rng(2);
  for (int i = 0; i < 2000; ++i) {
    const double a = std::exp(rng.uniform(-2.0, 5.0));
    const double x = rng.uniform(0, 3 * a + 5);
    const double p = special::gamma_p(a, x);
    CHECK(p == doctest::Approx(boost::math::gamma_p(a, x)).epsilon(1e-9));
    CHECK(special::gamma_q(a, x) == doctest::Approx(boost::math::gamma_q(a, x)).epsilon(1e-9));
  }
  CHECK(special::gamma_p(0.5, 0.2) == doctest::Approx(0.47291074313446196).epsilon(1e-12));
  CHECK(special::gamma_q(10, 15) == doctest::Approx(0.06985366069940986).epsilon(1e-11));
  CHECK(special::gamma_p(50, 40) == doctest::Approx(0.07033506665939494).epsilon(1e-10));
  CHECK(special::gamma_p(1, 1e-3) == doctest::Approx(0.0009995001666250082).epsilon(1e-12));
}

TEST_CASE("normal functions") {
  const boost::math::normal n;
  for (double z = -8; z <= 8; z += 0.173) {
    CHECK(special::normal_cdf(z) == doctest::Approx(boost::math::cdf(n, z)).epsilon(1e-12));
    CHECK(special::normal_sf(z) == doctest::Approx(0.5 * boost::math::erfc(z / std::sqrt(2.0))).epsilon(1e-12));
  }
  CHECK(special::normal_quantile(1e-10) == doctest::Approx(-6.361340902404056).epsilon(1e-13));
  CHECK(special::normal_quantile(0.001) == doctest::Approx(-3.090232306167813).epsilon(1e-13));
  CHECK(special::normal_quantile(0.025) == doctest::Approx(-1.9599639845400545).epsilon(1e-13));
  CHECK(special::normal_quantile(0.3) == doctest::Approx(-0.5244005127080409).epsilon(1e-13));
  CHECK(special::normal_quantile(0.5) == 0.0);
  CHECK(special::normal_quantile(0.999999) == doctest::Approx(4.753424308817087).epsilon(1e-13));
  for (double p = 0.0005; p < 1; p += 0.0131)
    CHECK(special::normal_cdf(special::normal_quantile(p)) == doctest::Approx(p).epsilon(1e-12));
}

TEST_CASE("F and chi-square tails") {
  CHECK(special::f_sf(1.5, 1, 4) == doctest::Approx(0.2878641347266907).epsilon(1e-12));
  CHECK(special::chi2_sf(2.4, 1) == doctest::Approx(0.12133525035848208).epsilon(1e-12));
  CHECK(special::f_sf(3.2, 4, 20) == doctest::Approx(0.03483162372878263).epsilon(1e-11));
  CHECK(special::chi2_sf(11.0, 4) == doctest::Approx(0.026564014350016436).epsilon(1e-11));
  Rng rng(3);
  for (int i = 0; i < 500; ++i) {
    const double d1 = static_cast<double>(rng.between(1, 60));
    const double d2 = static_cast<double>(rng.between(1, 200));
    const double f = rng.uniform(0, 10);
    const boost::math::fisher_f fd(d1, d2);
    CHECK(special::f_cdf(f, d1, d2) == doctest::Approx(boost::math::cdf(fd, f)).epsilon(1e-8));
    CHECK(special::f_cdf(f, d1, d2) + special::f_sf(f, d1, d2) == doctest::Approx(1.0));
    const boost::math::chi_squared cd(d1);
    CHECK(special::chi2_cdf(f * 5, d1) == doctest::Approx(boost::math::cdf(cd, f * 5)).epsilon(1e-8));
  }
}

TEST_CASE("studentized range frozen values") {
  struct Case {
    double q;
    int k;
    double df;
    double cdf;
  };
  const Case cases[] = {
      {3.5, 3, 10, 0.9228966891615896}, {2.0, 2, 5, 0.7835627707303147},
      {4.0, 5, 20, 0.9304128560769541}, {1.0, 3, 2, 0.2158180092854727},
      {5.5, 10, 30, 0.9841787707506147}, {3.0, 4, 1000, 0.8530066638952293},
      {0.5, 2, 1, 0.21634689593878548}, {6.0, 20, 60, 0.9896649423812391},
      {2.8, 3, 12, 0.8403898813144252}, {7.0, 50, 100, 0.9972059543817133},
  };
  for (const auto& c : cases) {
    CAPTURE(c.q);
    CAPTURE(c.k);
    CAPTURE(c.df);
    CHECK(std::abs(special::studentized_range_cdf(c.q, c.k, c.df) - c.cdf) < 1e-7);
    CHECK(std::abs(special::studentized_range_sf(c.q, c.k, c.df) - (1 - c.cdf)) < 1e-7);
  }
}

TEST_CASE("studentized range with k = 2 reduces to Student t") {
  // Q = sqrt(2) |T| for two groups.
  for (double df : {3.0, 8.0, 25.0}) {
    for (double q = 0.5; q < 6; q += 0.75) {
      const double t = q / std::sqrt(2.0);
      const double two_sided = boost::math::ibeta(df / 2, 0.5, df / (df + t * t));
      CHECK(std::abs(special::studentized_range_cdf(q, 2, df) - (1 - two_sided)) < 1e-7);
    }
  }
}

TEST_CASE("studentized range is monotone in q") {
  for (int k : {2, 3, 7, 30}) {
    double prev = 0;
    for (double q = 0.1; q < 10; q += 0.3) {
      const double c = special::studentized_range_cdf(q, k, 15);
      CHECK(c >= prev - 1e-12);
      CHECK(c <= 1.0);
      prev = c;
    }
  }
}
