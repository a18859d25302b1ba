#pragma once

namespace invseg::sf {

// Natural log of Gamma(x), x > 0. Lanczos approximation, ~1e-14 relative.
double log_gamma(double x);

// Regularized incomplete beta I_x(a,b), continued-fraction evaluation.
double incomplete_beta(double a, double b, double x);

// Regularized incomplete gamma: lower P(a,x) and upper Q(a,x).
double lower_gamma(double a, double x);
double upper_gamma(double a, double x);

double normal_cdf(double x);
double normal_sf(double x);

// Survival functions used by the test battery.
double chi_square_sf(double x, double df);
double f_sf(double f, double df1, double df2);
double student_t_sf_two_sided(double t, double df);

// Studentized range distribution with k groups and df error degrees of
// freedom: outer quadrature over the pooled-SD density, inner quadrature over
// the range of k standard normals. Absolute accuracy ~1e-8.
double studentized_range_cdf(double q, int k, double df);
double studentized_range_sf(double q, int k, double df);

}  // namespace invseg::sf
