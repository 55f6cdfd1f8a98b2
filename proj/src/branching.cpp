#include "zoneliq/branching.hpp"

#include "zoneliq/parallel.hpp"
#include "zoneliq/rng.hpp"
#include "zoneliq/xmath.hpp"

#include <cmath>
#include <vector>

namespace zoneliq {

namespace {

struct Particle {
    double a;       // reduced offset from the barrier
    double thresh;  // remaining local time until the branch clock fires
};

// First-passage time of a drifted BM through level m > 0, conditioned on
// {tau <= t_max}; exact inversion of the closed-form CDF.
double conditional_passage(PathRng& gen, double t_max, double level, double mu) {
    return first_passage_conditional(gen.uniform(), t_max, level, mu);
}

} // namespace

PopulationResult simulate_population(const ValidatedProblem& vp, const BranchParams& params,
                                     const RngSpec& rng, double start_z) {
    if (std::abs(vp.cost.p - 2.0) > 1e-12)
        throw ValidationError("simulate_population: particle validator requires beta = 1 (p = 2)");
    if (params.n_scale < 1) throw ValidationError("simulate_population: n_scale must be >= 1");
    if (!(params.dt > 0.0)) throw ValidationError("simulate_population: dt must be > 0");

    const ReducedFrame frame = reduce(vp.model);
    const double a_start = frame.offset(start_z);
    if (a_start < 0.0)
        throw ValidationError("simulate_population: start must lie on the admissible side");

    const double T = vp.cost.horizon;
    const int nepochs = std::max(1, static_cast<int>(std::llround(T / params.dt)));
    const double dt = T / nepochs;
    const double mu = frame.mu;
    const double mass = 1.0 / params.n_scale;
    // clock rate per unit of physical local time L = ell_scale * pushing
    const double rate = params.lambda * params.n_scale * frame.ell_scale;
    const bool use_phi = !vp.cost.phi.is_zero();

    PathRng gen(rng);
    auto fresh_thresh = [&] { return gen.exponential() / rate; };

    std::vector<Particle> pop(static_cast<std::size_t>(params.n_scale));
    for (auto& pt : pop) pt = Particle{a_start, fresh_thresh()};

    PopulationResult res;
    std::vector<Particle> next;
    struct Segment { double a, thresh, time_left; };
    std::vector<Segment> stack;

    const int checkpoint_every = std::max(1, nepochs / 4);

    for (int e = 0; e < nepochs && !res.censored; ++e) {
        next.clear();
        for (const Particle& start : pop) {
            stack.push_back({start.a, start.thresh, dt});
            while (!stack.empty()) {
                Segment seg = stack.back();
                stack.pop_back();
                const double sdt = std::sqrt(seg.time_left);
                const double x = mu * seg.time_left + sdt * gen.normal();
                const double d = x;
                const double mstep =
                    0.5 * (x + std::sqrt(d * d - 2.0 * seg.time_left * std::log(gen.uniform())));
                const double push = mstep > seg.a ? mstep - seg.a : 0.0;
                if (push < seg.thresh) {
                    // no branch before the epoch ends
                    const double anew = (seg.a > mstep ? seg.a : mstep) - x;
                    if (use_phi)
                        res.phi_integral += mass * seg.time_left * 0.5 *
                                            (vp.cost.phi.eval(frame.price(seg.a)) +
                                             vp.cost.phi.eval(frame.price(anew)));
                    next.push_back({anew, seg.thresh - push});
                    continue;
                }
                // clock fires when the driving maximum reaches a + thresh
                const double tau =
                    conditional_passage(gen, seg.time_left, seg.a + seg.thresh, mu);
                if (use_phi)
                    res.phi_integral += mass * tau * 0.5 *
                                        (vp.cost.phi.eval(frame.price(seg.a)) +
                                         vp.cost.phi.eval(frame.price(0.0)));
                const double offset = std::abs(frame.price(0.0) - vp.model.barrier);
                if (offset > res.max_branch_offset) res.max_branch_offset = offset;
                if (gen.uniform() < 0.5) {
                    const double left = seg.time_left - tau;
                    stack.push_back({0.0, fresh_thresh(), left});
                    stack.push_back({0.0, fresh_thresh(), left});
                    if (next.size() + stack.size() > params.max_particles) {
                        res.censored = true;
                        break;
                    }
                }
            }
            if (res.censored) break;
        }
        pop.swap(next);
        if (!res.censored && ((e + 1) % checkpoint_every == 0 || e + 1 == nepochs))
            res.mass_checkpoints.emplace_back((e + 1) * dt, mass * pop.size());
    }

    if (!res.censored) {
        res.final_mass = mass * pop.size();
        if (!vp.cost.rho.is_zero())
            for (const Particle& pt : pop)
                res.rho_terminal += mass * vp.cost.rho.eval(frame.price(pt.a));
    }
    return res;
}

LaplaceEstimate laplace_estimate(const ValidatedProblem& vp, const BranchParams& params,
                                 int npops, const RngSpec& rng, double z, int threads) {
    if (npops < 2) throw ValidationError("laplace_estimate: npops must be >= 2");
    const std::size_t n = static_cast<std::size_t>(npops);
    std::vector<PopulationResult> results(n);
    parallel_for(n, threads, [&](std::size_t i) {
        RngSpec rs{rng.seed, rng.stream_id + i};
        results[i] = simulate_population(vp, params, rs, z);
    });

    LaplaceEstimate est;
    est.npops = npops;
    std::vector<double> vals;
    vals.reserve(n);
    std::size_t ncheck = 0;
    for (const auto& r : results) {
        if (r.censored) {
            ++est.censored;
            continue;
        }
        vals.push_back(std::exp(-r.phi_integral - r.rho_terminal));
        ncheck = std::max(ncheck, r.mass_checkpoints.size());
    }
    if (vals.size() < 2) throw NumericalError("laplace_estimate: too many censored populations");
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= static_cast<double>(vals.size());
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    var /= static_cast<double>(vals.size() - 1);
    est.estimate = mean;
    est.se = std::sqrt(var / static_cast<double>(vals.size()));

    est.mass_times.resize(ncheck, 0.0);
    est.mass_means.resize(ncheck, 0.0);
    est.mass_ses.resize(ncheck, 0.0);
    std::vector<double> m2(ncheck, 0.0);
    std::size_t count = 0;
    for (const auto& r : results) {
        if (r.censored || r.mass_checkpoints.size() != ncheck) continue;
        ++count;
        for (std::size_t j = 0; j < ncheck; ++j) {
            est.mass_times[j] = r.mass_checkpoints[j].first;
            est.mass_means[j] += r.mass_checkpoints[j].second;
            m2[j] += r.mass_checkpoints[j].second * r.mass_checkpoints[j].second;
        }
    }
    if (count > 1) {
        for (std::size_t j = 0; j < ncheck; ++j) {
            est.mass_means[j] /= static_cast<double>(count);
            const double v =
                std::max(0.0, m2[j] / static_cast<double>(count) -
                                  est.mass_means[j] * est.mass_means[j]);
            est.mass_ses[j] = std::sqrt(v / static_cast<double>(count - 1));
        }
    }
    return est;
}

} // namespace zoneliq
