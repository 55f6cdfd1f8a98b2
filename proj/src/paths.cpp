#include "zoneliq/paths.hpp"

#include "zoneliq/rng.hpp"
#include "zoneliq/xmath.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace zoneliq {

namespace {

// Exact bridge maximum over one step: given driving values x0 -> x1 over dt,
// M = (x0 + x1 + sqrt((x1-x0)^2 - 2 dt log U)) / 2.
double bridge_max(double x0, double x1, double dt, double u) {
    const double d = x1 - x0;
    return 0.5 * (x0 + x1 + std::sqrt(d * d - 2.0 * dt * std::log(u)));
}

PathBundle simulate_reduced(const ModelSpec& model, double T, int steps, const RngSpec& rng,
                            MaxRefinement refine) {
    if (steps <= 0) throw ValidationError("simulate: steps must be >= 1");
    if (!(T > 0.0)) throw ValidationError("simulate: horizon must be > 0");

    const ReducedFrame frame = reduce(model);
    const double dt = T / steps;
    const double sdt = std::sqrt(dt);

    PathBundle path;
    path.model = model;
    path.rng = rng;
    path.times.resize(steps + 1);
    path.prices.resize(steps + 1);
    path.loctime.resize(steps + 1);
    path.contact.assign(steps, 0);

    PathRng gen(rng);
    double x = 0.0;      // driving BM with drift mu
    double mx = 0.0;     // running maximum
    path.times[0] = 0.0;
    path.prices[0] = frame.barrier_t + frame.sgn * frame.sigma * frame.a0;
    path.loctime[0] = 0.0;

    for (int k = 0; k < steps; ++k) {
        const double xn = x + frame.mu * dt + sdt * gen.normal();
        double step_max;
        if (refine == MaxRefinement::BridgeExact) {
            step_max = bridge_max(x, xn, dt, gen.uniform());
        } else {
            step_max = x > xn ? x : xn;
        }
        if (step_max >= mx && step_max >= frame.a0) path.contact[k] = 1;
        if (step_max > mx) mx = step_max;
        const double a = (frame.a0 > mx ? frame.a0 : mx) - xn;
        const double push = mx > frame.a0 ? mx - frame.a0 : 0.0;
        path.times[k + 1] = (k + 1) * dt;
        path.prices[k + 1] = frame.barrier_t + frame.sgn * frame.sigma * a;
        path.loctime[k + 1] = frame.ell_scale * push;
        x = xn;
    }
    path.times[steps] = T;
    return path;
}

ReducedFrame frame_checked(const ModelSpec& model, const DensityQuery& q) {
    if (!(q.elapsed > 0.0)) throw ValidationError("density: elapsed must be > 0");
    const ReducedFrame frame = reduce(model);
    if (frame.offset(q.from) < 0.0 || frame.offset(q.to) < 0.0)
        throw ValidationError("density: endpoints must lie on the admissible side of the barrier");
    return frame;
}

} // namespace

PathBundle simulate_abm(const ModelSpec& model, double T, int steps, const RngSpec& rng,
                        MaxRefinement refine) {
    if (model.kind != Kind::Abm) throw ValidationError("simulate_abm: model.kind must be ABM");
    return simulate_reduced(model, T, steps, rng, refine);
}

PathBundle simulate_gbm(const ModelSpec& model, double T, int steps, const RngSpec& rng,
                        MaxRefinement refine) {
    if (model.kind != Kind::Gbm) throw ValidationError("simulate_gbm: model.kind must be GBM");
    PathBundle path = simulate_reduced(model, T, steps, rng, refine);
    for (double& p : path.prices) p = std::exp(p);
    return path;
}

PathBundle simulate(const ModelSpec& model, double T, int steps, const RngSpec& rng,
                    MaxRefinement refine) {
    return model.kind == Kind::Abm ? simulate_abm(model, T, steps, rng, refine)
                                   : simulate_gbm(model, T, steps, rng, refine);
}

double free_density(const ModelSpec& model, const DensityQuery& q) {
    if (!(q.elapsed > 0.0)) throw ValidationError("density: elapsed must be > 0");
    const double s = q.elapsed;
    if (model.kind == Kind::Abm) {
        const double sd = model.sigma * std::sqrt(s);
        return norm_pdf((q.to - q.from - model.drift * s) / sd) / sd;
    }
    // lognormal kernel of the unreflected GBM
    const double sd = model.sigma * std::sqrt(s);
    const double m = std::log(q.from) + (model.drift - 0.5 * model.sigma * model.sigma) * s;
    return norm_pdf((std::log(q.to) - m) / sd) / (sd * q.to);
}

double reflected_density(const ModelSpec& model, const DensityQuery& q) {
    const ReducedFrame frame = frame_checked(model, q);
    const double x = frame.offset(q.from);
    const double y = frame.offset(q.to);
    const double t = q.elapsed;
    const double nu = frame.mu;
    const double st = std::sqrt(t);

    // density of the reduced reflected process at offset y:
    //   phi_t(x-y-nu t)(1 + e^{-2xy/t}) + 2 nu e^{-2 nu y} Phibar((x+y-nu t)/sqrt t)
    const double g = norm_pdf((x - y - nu * t) / st) / st;
    double p = g * (1.0 + std::exp(-2.0 * x * y / t));
    if (nu != 0.0) {
        const double w = (x + y - nu * t) / st;
        double tail;
        if (nu > 0.0) {
            tail = std::exp(-2.0 * nu * y) * norm_sf(w);
        } else {
            // w > 0 here; route through erfcx to keep the product finite
            const double expo = 2.0 * nu * x - 0.5 * ((x + y + nu * t) / st) * ((x + y + nu * t) / st);
            tail = 0.5 * erfcx(w * 0.7071067811865475244) * std::exp(expo);
        }
        p += 2.0 * nu * tail;
    }
    if (p < 0.0) p = 0.0;

    // Jacobian of offset(z): 1/sigma for ABM, 1/(sigma z) for GBM
    const double jac = frame.log_price ? 1.0 / (frame.sigma * q.to) : 1.0 / frame.sigma;
    return p * jac;
}

double barrier_flux(const ModelSpec& model, double z, double s) {
    if (!(s > 0.0)) throw ValidationError("barrier_flux: s must be > 0");
    const ReducedFrame frame = reduce(model);
    const double a = frame.offset(z);
    if (a < 0.0) throw ValidationError("barrier_flux: z must lie on the admissible side of the barrier");
    return frame.ell_scale * pushing_rate(s, a, frame.mu);
}

void write_path_csv(std::ostream& os, const PathBundle& path) {
    os << "t,S,L\n";
    char buf[96];
    for (std::size_t k = 0; k < path.times.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.12g,%.12g,%.12g\n",
                      path.times[k], path.prices[k], path.loctime[k]);
        os << buf;
    }
}

} // namespace zoneliq
