#pragma once

// Special functions and distribution tails backing the hypothesis tests.

namespace oxgen::special {

/// Regularized incomplete beta I_x(a, b), continued fraction (modified Lentz).
double incomplete_beta(double a, double b, double x);

/// Regularized lower incomplete gamma P(a, x): series below a + 1,
/// continued fraction for Q above.
double gamma_p(double a, double x);
double gamma_q(double a, double x);

double normal_cdf(double z);
/// Upper tail 1 - Phi(z), accurate for large z.
double normal_sf(double z);
/// Inverse standard normal CDF (Wichura AS 241).
double normal_quantile(double p);

double chi2_cdf(double x, double df);
double chi2_sf(double x, double df);

double f_cdf(double f, double df1, double df2);
double f_sf(double f, double df1, double df2);

/// P(range of k iid N(0,1) <= w), the infinite-df studentized range.
double normal_range_cdf(double w, int k);

/// Studentized range CDF P(Q <= q; k, df) by Gauss-Legendre quadrature of
/// the double integral over the chi scale density. Absolute error < 1e-7
/// for k in [2, 100], df >= 1.
double studentized_range_cdf(double q, int k, double df);
double studentized_range_sf(double q, int k, double df);

}  // namespace oxgen::special
