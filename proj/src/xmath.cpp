#include "zoneliq/xmath.hpp"

#include "zoneliq/model.hpp"

#include <cmath>
#include <string>

namespace zoneliq {

namespace {
constexpr double kInvSqrt2Pi = 0.3989422804014326779;
constexpr double kInvSqrt2 = 0.7071067811865475244;
}

double norm_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double norm_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

double norm_sf(double x) { return 0.5 * std::erfc(x * kInvSqrt2); }

double erfcx(double x) {
    if (x < 0.0) return 2.0 * std::exp(x * x) - erfcx(-x);
    if (x <= 20.0) return std::exp(x * x) * std::erfc(x);
    // asymptotic series, relative error < 1e-16 for x > 20
    const double ix2 = 1.0 / (2.0 * x * x);
    double term = 1.0, sum = 1.0;
    for (int k = 1; k <= 6; ++k) {
        term *= -(2 * k - 1) * ix2;
        sum += term;
    }
    return sum / (x * std::sqrt(M_PI));
}

namespace {

// exp(2 mu a) * Phibar((a + mu t)/sqrt t) without overflow.
double scaled_tail(double t, double a, double mu) {
    const double st = std::sqrt(t);
    const double v0 = (a + mu * t) / st;
    if (v0 <= 0.0) return std::exp(2.0 * mu * a) * norm_sf(v0); // mu<0 here, no overflow
    const double u0 = (a - mu * t) / st;
    return 0.5 * erfcx(v0 * kInvSqrt2) * std::exp(-0.5 * u0 * u0);
}

} // namespace

double expected_pushing(double t, double a, double mu) {
    if (t <= 0.0) return 0.0;
    const double st = std::sqrt(t);
    const double x = a / st;
    if (std::abs(mu) * (st + a) < 1e-6) {
        // series around mu = 0; second order term is negligible at this threshold
        const double i0 = 2.0 * (st * norm_pdf(x) - a * norm_sf(x));
        const double i1 = t * (norm_sf(x) * (1.0 - x * x) + x * norm_pdf(x));
        return i0 + mu * i1;
    }
    const double u0 = (a - mu * t) / st;
    const double base = st * (norm_pdf(u0) - u0 * norm_sf(u0));
    const double corr = (norm_sf(u0) - scaled_tail(t, a, mu)) / (2.0 * mu);
    return base + corr;
}

double pushing_rate(double t, double a, double mu) {
    if (t <= 0.0) return 0.0;
    const double st = std::sqrt(t);
    const double u0 = (a - mu * t) / st;
    const double r = norm_pdf(u0) / st + mu * norm_sf(u0);
    return r > 0.0 ? r : 0.0;
}

double first_passage_cdf(double t, double level, double mu) {
    if (t <= 0.0) return 0.0;
    const double st = std::sqrt(t);
    const double term1 = norm_cdf((mu * t - level) / st);
    // exp(2 mu level) * Phi(-(level + mu t)/sqrt t), log-space for large mu*level
    const double w = (level + mu * t) / st;
    double term2;
    if (w >= 0.0) {
        term2 = 0.5 * erfcx(w * kInvSqrt2) * std::exp(2.0 * mu * level - 0.5 * w * w);
    } else {
        term2 = std::exp(2.0 * mu * level) * norm_cdf(-w);
    }
    const double p = term1 + term2;
    return p < 0.0 ? 0.0 : (p > 1.0 ? 1.0 : p);
}

double first_passage_conditional(double u, double t_max, double level, double mu) {
    const double target = u * first_passage_cdf(t_max, level, mu);
    double lo = 0.0, hi = t_max;
    for (int i = 0; i < 80; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (first_passage_cdf(mid, level, mu) < target)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

namespace {

double simpson_rec(const std::function<double(double)>& f, double a, double b,
                   double fa, double fm, double fb, double whole, double tol,
                   int depth, int max_depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (std::abs(delta) <= 15.0 * tol || (b - a) < 1e-14)
        return left + right + delta / 15.0;
    if (depth >= max_depth)
        throw NumericalError("quadrature did not converge on [" + std::to_string(a) + ", " +
                             std::to_string(b) + "]; refine the integrand or loosen the tolerance");
    return simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1, max_depth) +
           simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1, max_depth);
}

} // namespace

double adaptive_simpson(const std::function<double(double)>& f,
                        double a, double b, double tol, int max_depth) {
    if (a == b) return 0.0;
    const double m = 0.5 * (a + b);
    const double fa = f(a), fm = f(m), fb = f(b);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return simpson_rec(f, a, b, fa, fm, fb, whole, tol, 0, max_depth);
}

std::vector<double> pchip_slopes(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    std::vector<double> d(n, 0.0);
    if (n < 2) return d;
    std::vector<double> h(n - 1), s(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        h[i] = x[i + 1] - x[i];
        s[i] = (y[i + 1] - y[i]) / h[i];
    }
    if (n == 2) {
        d[0] = d[1] = s[0];
        return d;
    }
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (s[i - 1] * s[i] <= 0.0) {
            d[i] = 0.0;
        } else {
            const double w1 = 2.0 * h[i] + h[i - 1];
            const double w2 = h[i] + 2.0 * h[i - 1];
            d[i] = (w1 + w2) / (w1 / s[i - 1] + w2 / s[i]);
        }
    }
    // one-sided endpoint formulas with monotonicity guard
    auto endpoint = [](double h0, double h1, double s0, double s1) {
        double d0 = ((2.0 * h0 + h1) * s0 - h0 * s1) / (h0 + h1);
        if (d0 * s0 <= 0.0) d0 = 0.0;
        else if (s0 * s1 < 0.0 && std::abs(d0) > 3.0 * std::abs(s0)) d0 = 3.0 * s0;
        return d0;
    };
    d[0] = endpoint(h[0], h[1], s[0], s[1]);
    d[n - 1] = endpoint(h[n - 2], h[n - 3], s[n - 2], s[n - 3]);
    return d;
}

double hermite_eval(double x0, double x1, double y0, double y1,
                    double d0, double d1, double x) {
    const double h = x1 - x0;
    const double t = (x - x0) / h;
    const double t2 = t * t, t3 = t2 * t;
    return y0 * (2.0 * t3 - 3.0 * t2 + 1.0) + h * d0 * (t3 - 2.0 * t2 + t) +
           y1 * (-2.0 * t3 + 3.0 * t2) + h * d1 * (t3 - t2);
}

const double gl8_nodes[8] = {
    0.019855071751231884, 0.101666761293186630, 0.237233795041835507, 0.408282678752175098,
    0.591717321247824902, 0.762766204958164493, 0.898333238706813370, 0.980144928248768116};
const double gl8_weights[8] = {
    0.050614268145188130, 0.111190517226687235, 0.156853322938943644, 0.181341891689180991,
    0.181341891689180991, 0.156853322938943644, 0.111190517226687235, 0.050614268145188130};

} // namespace zoneliq
