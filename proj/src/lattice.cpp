#include "zoneliq/lattice.hpp"

#include "zoneliq/parallel.hpp"
#include "zoneliq/rng.hpp"

#include <cmath>
#include <string>

namespace zoneliq {

namespace {

struct WalkFrame {
    double h;        // grid spacing in transformed coordinates
    double b_eff;    // drift of the transformed ABM
    double sigma;
    double barrier_t;
    double sgn;      // +1 lower, -1 upper (interior states at barrier_t + sgn*h*idx)
    bool log_price;
    double ell_step; // local-time gain per barrier visit
};

WalkFrame walk_frame(const ModelSpec& m, int level) {
    WalkFrame f;
    f.h = std::ldexp(1.0, -level);
    f.sigma = m.sigma;
    f.log_price = m.kind == Kind::Gbm;
    f.b_eff = f.log_price ? m.drift - 0.5 * m.sigma * m.sigma : m.drift;
    f.barrier_t = f.log_price ? std::log(m.barrier) : m.barrier;
    f.sgn = m.side == Side::Lower ? 1.0 : -1.0;
    f.ell_step = f.h * m.sigma * (f.log_price ? m.barrier : 1.0);
    return f;
}

double price_at(const WalkFrame& f, int idx) {
    const double x = f.barrier_t + f.sgn * f.h * idx;
    return f.log_price ? std::exp(x) : x;
}

} // namespace

LatticePath embedded_walk(const ModelSpec& model, int level, double T, const RngSpec& rng) {
    if (level < 0) throw ValidationError("embedded_walk: level must be >= 0");
    if (!(T > 0.0)) throw ValidationError("embedded_walk: horizon must be > 0");
    const WalkFrame f = walk_frame(model, level);
    const double steps_d = std::ceil(std::ldexp(1.0, 2 * level) * T);
    if (steps_d > 5e8) throw ValidationError("embedded_walk: level/horizon too large");
    const int steps = static_cast<int>(steps_d);

    // exit probability of the drifted motion from (-h, h), toward the drift
    const double theta = 2.0 * f.sgn * f.b_eff * f.h / (f.sigma * f.sigma);
    const double q_up = 1.0 / (1.0 + std::exp(-theta));

    PathRng gen(rng);
    LatticePath lat;
    lat.level = level;
    lat.h = f.h;
    lat.state_idx.reserve(steps + 1);
    lat.states.reserve(steps + 1);
    lat.ell.reserve(steps + 1);
    lat.clock.reserve(steps + 1);

    // initial grid state: two-sided exit from the bracketing levels
    const double z0t = f.log_price ? std::log(model.z0) : model.z0;
    const double a0 = f.sgn * (z0t - f.barrier_t) / f.h; // start in grid units, >= 0
    int idx = static_cast<int>(std::floor(a0 + 1e-12));
    const double fr = a0 - idx;
    if (fr > 1e-12) {
        // P(hit upper first) from the scale function of the drifted motion
        double p_hi;
        if (std::abs(theta) < 1e-12) {
            p_hi = fr;
        } else {
            p_hi = std::expm1(theta * fr) / std::expm1(theta);
        }
        idx += gen.uniform() < p_hi ? 1 : 0;
    }

    double ell = 0.0;
    const double dt_clock = std::ldexp(1.0, -2 * level);
    for (int k = 0; k <= steps; ++k) {
        if (k > 0) {
            if (idx == 0)
                idx = 1; // reflected move
            else
                idx += gen.uniform() < q_up ? 1 : -1;
        }
        if (idx == 0) ell += f.ell_step;
        lat.state_idx.push_back(idx);
        lat.states.push_back(price_at(f, idx));
        lat.ell.push_back(ell);
        lat.clock.push_back(k * dt_clock);
    }
    return lat;
}

LatticePath crossings_from_path(const PathBundle& path, int level) {
    const WalkFrame f = walk_frame(path.model, level);
    const std::size_t n = path.times.size();
    if (n < 2) throw ValidationError("crossings_from_path: path too short");
    const double T = path.times.back();
    const double dt = T / static_cast<double>(n - 1);
    const double step_sd = f.sigma * std::sqrt(dt);
    if (step_sd > f.h / 4.0) {
        const double need = std::ceil(16.0 * f.sigma * f.sigma * T / (f.h * f.h));
        throw ValidationError("crossings_from_path: path too coarse for level " +
                              std::to_string(level) + "; needs >= " +
                              std::to_string(static_cast<long long>(need)) + " steps");
    }

    LatticePath lat;
    lat.level = level;
    lat.h = f.h;
    lat.has_measured_tau = true;
    const double dt_clock = std::ldexp(1.0, -2 * level);

    // work in grid units relative to the barrier
    auto grid_pos = [&](double price) {
        const double x = f.log_price ? std::log(price) : price;
        return f.sgn * (x - f.barrier_t) / f.h;
    };

    double ell = 0.0;
    bool started = false;
    int idx = 0;
    auto emit = [&](int state, double t) {
        if (state == 0) ell += f.ell_step;
        lat.state_idx.push_back(state);
        lat.states.push_back(price_at(f, state));
        lat.ell.push_back(ell);
        lat.clock.push_back(static_cast<double>(lat.tau.size()) * dt_clock);
        lat.tau.push_back(t);
    };

    double g_prev = grid_pos(path.prices[0]);
    if (std::abs(g_prev - std::round(g_prev)) < 1e-9) {
        idx = static_cast<int>(std::round(g_prev));
        emit(idx, 0.0);
        started = true;
    }
    for (std::size_t k = 1; k < n; ++k) {
        // each segment is a straight line from gs to ge; crossings of
        // successive levels happen in order along it
        const double gs = g_prev;
        const double ge = grid_pos(path.prices[k]);
        const double t0 = path.times[k - 1], t1 = path.times[k];
        auto cross_time = [&](double level) {
            return t0 + (level - gs) / (ge - gs) * (t1 - t0);
        };
        if (!started) {
            const int lo = static_cast<int>(std::ceil(std::min(gs, ge) - 1e-12));
            const int hi = static_cast<int>(std::floor(std::max(gs, ge) + 1e-12));
            if (lo <= hi) {
                idx = ge > gs ? lo : hi;
                emit(idx, cross_time(idx));
                started = true;
            }
        }
        if (started) {
            if (ge > gs) {
                while (ge >= idx + 1 - 1e-12 && static_cast<double>(idx + 1) > gs) {
                    ++idx;
                    emit(idx, cross_time(idx));
                }
            } else if (ge < gs) {
                while (idx - 1 >= 0 && ge <= idx - 1 + 1e-12 && static_cast<double>(idx - 1) < gs) {
                    --idx;
                    emit(idx, cross_time(idx));
                }
            }
        }
        g_prev = ge;
    }
    if (lat.states.empty()) {
        // path never reached a grid level: single synthetic state at the
        // nearest level, no increments
        idx = static_cast<int>(std::round(grid_pos(path.prices[0])));
        emit(std::max(idx, 0), 0.0);
    }
    return lat;
}

std::vector<double> discrete_inventory(double x0, std::span<const double> xi,
                                       const LatticePath& lat) {
    const std::size_t n = lat.ell.size();
    if (xi.size() < n)
        throw ValidationError("discrete_inventory: xi has fewer samples than the lattice path");
    std::vector<double> inv(n);
    double prev_ell = 0.0;
    double x = x0;
    for (std::size_t k = 0; k < n; ++k) {
        x += xi[k] * (lat.ell[k] - prev_ell);
        prev_ell = lat.ell[k];
        inv[k] = x;
    }
    return inv;
}

double discrete_cost(std::span<const double> xi, const LatticePath& lat, double p) {
    const std::size_t n = lat.ell.size();
    if (xi.size() < n)
        throw ValidationError("discrete_cost: xi has fewer samples than the lattice path");
    double cost = 0.0;
    double prev_ell = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double d = lat.ell[k] - prev_ell;
        if (d > 0.0) cost += std::pow(std::abs(xi[k]), p) * d;
        prev_ell = lat.ell[k];
    }
    return cost;
}

std::vector<LatticeStudyRow> lattice_convergence_study(const ModelSpec& model, double T,
                                                       int level_lo, int level_hi, int npaths,
                                                       const RngSpec& rng, double p,
                                                       int threads) {
    if (level_lo < 0 || level_hi < level_lo)
        throw ValidationError("lattice study: need 0 <= level_lo <= level_hi");
    if (npaths < 1) throw ValidationError("lattice study: npaths must be >= 1");
    const int nlev = level_hi - level_lo + 1;

    // fixed smooth trading speed used for the cost comparison
    auto xi_fn = [T](double t) { return 1.0 + 0.5 * std::cos(2.0 * M_PI * t / T); };

    // simulate past T so crossing indices up to floor(2^{2n} T) are realized
    const double t_sim = 1.15 * T;
    const double h_min = std::ldexp(1.0, -level_hi);
    const long long steps = static_cast<long long>(
        std::ceil(16.0 * model.sigma * model.sigma * t_sim / (h_min * h_min)));
    if (steps > 100000000LL) throw ValidationError("lattice study: level_hi too large");

    std::vector<std::vector<double>> sup_err(nlev), cost_gap(nlev);
    for (int l = 0; l < nlev; ++l) {
        sup_err[l].resize(npaths);
        cost_gap[l].resize(npaths);
    }

    parallel_for(static_cast<std::size_t>(npaths), threads, [&](std::size_t i) {
        RngSpec rs{rng.seed, rng.stream_id + i};
        const PathBundle path = simulate(model, t_sim, static_cast<int>(steps), rs,
                                         MaxRefinement::NodeOnly);
        // Stieltjes cost of xi on the fine path up to T
        double stieltjes = 0.0;
        for (std::size_t k = 0; k + 1 < path.times.size() && path.times[k + 1] <= T; ++k) {
            const double dl = path.loctime[k + 1] - path.loctime[k];
            if (dl > 0.0)
                stieltjes +=
                    std::pow(std::abs(xi_fn(0.5 * (path.times[k] + path.times[k + 1]))), p) * dl;
        }
        for (int l = 0; l < nlev; ++l) {
            const int level = level_lo + l;
            const LatticePath lat = crossings_from_path(path, level);
            const double scale = std::ldexp(1.0, 2 * level);
            const std::size_t nstops = lat.ell.size();
            double sup = 0.0;
            for (std::size_t k = 0; k < path.times.size() && path.times[k] <= T; ++k) {
                std::size_t idx = static_cast<std::size_t>(scale * path.times[k]);
                if (idx >= nstops) idx = nstops - 1;
                const double d = std::abs(lat.ell[idx] - path.loctime[k]);
                if (d > sup) sup = d;
            }
            sup_err[l][i] = sup;

            std::size_t kmax = static_cast<std::size_t>(scale * T);
            if (kmax >= nstops) kmax = nstops - 1;
            double dcost = 0.0, prev = 0.0;
            for (std::size_t k = 0; k <= kmax; ++k) {
                const double d = lat.ell[k] - prev;
                if (d > 0.0) dcost += std::pow(std::abs(xi_fn(lat.tau[k])), p) * d;
                prev = lat.ell[k];
            }
            cost_gap[l][i] = std::abs(dcost - stieltjes);
        }
    });

    auto median = [](std::vector<double>& v) {
        std::sort(v.begin(), v.end());
        const std::size_t n = v.size();
        return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    };
    std::vector<LatticeStudyRow> rows(nlev);
    for (int l = 0; l < nlev; ++l) {
        rows[l].level = level_lo + l;
        rows[l].median_sup_err = median(sup_err[l]);
        rows[l].median_cost_gap = median(cost_gap[l]);
    }
    return rows;
}

} // namespace zoneliq
