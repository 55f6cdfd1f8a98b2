#pragma once

#include <functional>
#include <vector>

namespace zoneliq {

double norm_pdf(double x);
double norm_cdf(double x);
double norm_sf(double x);   // 1 - Phi(x), accurate in the tail
double erfcx(double x);     // exp(x^2) erfc(x), stable for large x

// E[(M_t - a)^+] where M is the running maximum of a standard BM with
// drift mu, a >= 0. This is the expected pushing (local time) of the
// reflected process started at offset a, in reduced units.
double expected_pushing(double t, double a, double mu);

// d/dt of expected_pushing: the local-time rate in reduced units,
//   phi((a - mu t)/sqrt t)/sqrt t + mu * Phibar((a - mu t)/sqrt t).
double pushing_rate(double t, double a, double mu);

// P(first passage of BM with drift mu through level m > 0 occurs by t).
// Defective for mu < 0.
double first_passage_cdf(double t, double level, double mu);

// Inverse-CDF sample of the first-passage time conditioned on {tau <= t_max},
// given a uniform draw u in (0,1). Bisection on first_passage_cdf.
double first_passage_conditional(double u, double t_max, double level, double mu);

// Adaptive Simpson on [a, b] to absolute tolerance tol. Throws
// NumericalError with a refinement hint when the depth cap is exceeded.
double adaptive_simpson(const std::function<double(double)>& f,
                        double a, double b, double tol, int max_depth = 48);

// Shape-preserving cubic (Fritsch-Carlson) slopes for monotone-in-x data.
std::vector<double> pchip_slopes(const std::vector<double>& x, const std::vector<double>& y);
double hermite_eval(double x0, double x1, double y0, double y1,
                    double d0, double d1, double x);

// 8-point Gauss-Legendre on [0, 1]: nodes and weights.
extern const double gl8_nodes[8];
extern const double gl8_weights[8];

} // namespace zoneliq
