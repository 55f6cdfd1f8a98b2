#include "zoneliq/value.hpp"

#include "zoneliq/parallel.hpp"
#include "zoneliq/paths.hpp"
#include "zoneliq/rng.hpp"
#include "zoneliq/xmath.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace zoneliq {

namespace {

// reduced reflected transition density at offset y from offset x (no jacobian)
double reduced_density(double t, double x, double y, double nu) {
    const double st = std::sqrt(t);
    const double g = norm_pdf((x - y - nu * t) / st) / st;
    double p = g * (1.0 + std::exp(-2.0 * x * y / t));
    if (nu != 0.0) {
        const double w = (x + y - nu * t) / st;
        double tail;
        if (nu > 0.0) {
            tail = std::exp(-2.0 * nu * y) * norm_sf(w);
        } else {
            const double v = (x + y + nu * t) / st;
            tail = 0.5 * erfcx(w * 0.7071067811865475244) * std::exp(2.0 * nu * x - 0.5 * v * v);
        }
        p += 2.0 * nu * tail;
    }
    return p > 0.0 ? p : 0.0;
}

// E_a[f(price(A_s))] for the reduced reflected process started at offset a.
// The density has up to three scales (free peak of width sqrt(s), image
// layer at the barrier, drift layer for mu > 0); panels are anchored at
// each so the adaptive pass cannot overlook a narrow peak.
double reflected_expectation(const ReducedFrame& frame, const FunctionSpec& f,
                             double s, double a) {
    if (f.is_zero()) return 0.0;
    if (f.is_constant()) return f.upper_bound();
    const double nu = frame.mu;
    const double spread = 13.0 * std::sqrt(s);
    const double ymax = a + std::abs(nu) * s + spread; // density mass beyond is < 2e-33
    const double peak = a - nu * s;                    // reflected process drifts at -nu

    std::vector<double> knots = {0.0, ymax, spread, peak - spread, peak, peak + spread};
    if (nu > 0.0) {
        knots.push_back(nu * s - a - spread);
        knots.push_back(nu * s - a + spread);
        knots.push_back(0.5 / nu);
        knots.push_back(10.0 / nu);
    }
    if (f.variant == FunctionSpec::Variant::Table)
        for (double zk : f.knots) {
            const double yk = frame.offset(zk);
            if (yk > 0.0 && yk < ymax) knots.push_back(yk);
        }
    for (double& k : knots) k = std::clamp(k, 0.0, ymax);
    std::sort(knots.begin(), knots.end());
    knots.erase(std::unique(knots.begin(), knots.end()), knots.end());

    const double tol = 1e-11 * (1.0 + f.upper_bound()) * std::max(1.0, ymax) /
                       static_cast<double>(knots.size());
    auto integrand = [&](double y) {
        return f.eval(frame.price(y)) * reduced_density(s, a, y, frame.mu);
    };
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < knots.size(); ++i)
        acc += adaptive_simpson(integrand, knots[i], knots[i + 1], tol);
    return acc;
}

std::vector<double> make_tgrid(double T, int nt) {
    std::vector<double> t(nt + 1);
    for (int i = 0; i <= nt; ++i) t[i] = T * i / nt;
    t.back() = T;
    return t;
}

std::vector<double> make_zgrid(const ModelSpec& model, const GridSpec& grid) {
    // offsets from the barrier in price units, clustered near the barrier
    std::vector<double> off(grid.nz + 1);
    for (int j = 0; j <= grid.nz; ++j) {
        const double r = static_cast<double>(j) / grid.nz;
        off[j] = grid.z_far * (grid.stretch == Stretch::SqrtClusteredAtBarrier ? r * r : r);
    }
    std::vector<double> z(grid.nz + 1);
    const double sgn = model.side == Side::Lower ? 1.0 : -1.0;
    for (int j = 0; j <= grid.nz; ++j) z[j] = model.barrier + sgn * off[j];
    if (model.kind == Kind::Gbm) {
        for (double& zz : z)
            if (zz <= 0.0) throw ValidationError("grid.z_far reaches nonpositive prices for GBM");
    }
    if (sgn < 0.0) std::reverse(z.begin(), z.end());
    return z;
}

// h(t_i, a) on the whole tgrid for one start offset.
// Time integral of the phi part uses the substitution s = v^2 so the
// sqrt-type short-time behavior integrates cleanly on the grid.
std::vector<double> source_column(const ValidatedProblem& vp, const ReducedFrame& frame,
                                  const std::vector<double>& tgrid, double a) {
    const std::size_t n = tgrid.size();
    std::vector<double> h(n, 0.0);
    const bool rho_const = vp.cost.rho.is_constant();
    const bool phi_zero = vp.cost.phi.is_zero();
    const bool phi_const = vp.cost.phi.is_constant();

    std::vector<double> psi; // E_a[phi(S_s)] on the grid
    if (!phi_zero && !phi_const) {
        psi.resize(n);
        psi[0] = vp.cost.phi.eval(frame.price(a));
        for (std::size_t i = 1; i < n; ++i)
            psi[i] = reflected_expectation(frame, vp.cost.phi, tgrid[i], a);
    }

    double running = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double hv;
        if (rho_const)
            hv = vp.c_rho;
        else if (tgrid[i] == 0.0)
            hv = vp.cost.rho.eval(frame.price(a));
        else
            hv = reflected_expectation(frame, vp.cost.rho, tgrid[i], a);
        if (phi_const) {
            hv += vp.c_phi * tgrid[i];
        } else if (!phi_zero && i > 0) {
            const double v0 = std::sqrt(tgrid[i - 1]), v1 = std::sqrt(tgrid[i]);
            running += (v1 - v0) * (v0 * psi[i - 1] + v1 * psi[i]);
            hv += running;
        }
        h[i] = hv;
    }
    return h;
}

// exact kernel moments K_j = ell_scale * int_{t_j}^{t_{j+1}} rate(s, a) ds
std::vector<double> kernel_moments(const ReducedFrame& frame, const std::vector<double>& tgrid,
                                   double a) {
    const std::size_t n = tgrid.size();
    std::vector<double> K(n - 1);
    double prev = expected_pushing(tgrid[0], a, frame.mu);
    for (std::size_t j = 0; j + 1 < n; ++j) {
        const double next = expected_pushing(tgrid[j + 1], a, frame.mu);
        K[j] = frame.ell_scale * (next - prev);
        prev = next;
    }
    return K;
}

// nonlocal term at row i: sum_j K[j] * (g[i-j] + g[i-j-1])/2 for j < i
double convolve_row(const std::vector<double>& K, const std::vector<double>& g, std::size_t i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < i; ++j)
        acc += K[j] * 0.5 * (g[i - j] + g[i - j - 1]);
    return acc;
}

} // namespace

double source_term(const ValidatedProblem& vp, double t, double z) {
    if (t < 0.0 || t > vp.cost.horizon)
        throw ValidationError("source_term: t must lie in [0, horizon]");
    const ReducedFrame frame = reduce(vp.model);
    const double a = frame.offset(z);
    if (a < 0.0) throw ValidationError("source_term: z must lie on the admissible side");
    if (t == 0.0) return vp.cost.rho.eval(z);

    double h = vp.cost.rho.is_constant() ? vp.c_rho
                                         : reflected_expectation(frame, vp.cost.rho, t, a);
    if (vp.cost.phi.is_constant()) {
        h += vp.c_phi * t;
    } else if (!vp.cost.phi.is_zero()) {
        // int_0^t E[phi] ds = int_0^sqrt(t) 2 v E[phi(S_{v^2})] dv
        auto integrand = [&](double v) {
            if (v == 0.0) return 0.0;
            return 2.0 * v * reflected_expectation(frame, vp.cost.phi, v * v, a);
        };
        h += adaptive_simpson(integrand, 0.0, std::sqrt(t), 1e-9 * (1.0 + vp.c_phi), 24);
    }
    return h;
}

std::vector<double> solve_barrier(const ValidatedProblem& vp, const GridSpec& grid) {
    validate_grid(grid);
    const ReducedFrame frame = reduce(vp.model);
    const std::vector<double> tgrid = make_tgrid(vp.cost.horizon, grid.nt);
    const std::vector<double> H = source_column(vp, frame, tgrid, 0.0);
    const std::vector<double> K = kernel_moments(frame, tgrid, 0.0);

    const double p = vp.cost.p;
    const double pw = p / (p - 1.0); // 1 + beta, computed from p directly
    const double inv_beta = p - 1.0;
    const double bound = vp.u_bound();
    const std::size_t n = tgrid.size();

    std::vector<double> w(n), g(n);
    w[0] = H[0];
    g[0] = std::pow(w[0], pw);
    const SolverMeta meta; // default tolerances
    for (std::size_t i = 1; i < n; ++i) {
        double known = 0.0;
        for (std::size_t j = 1; j < i; ++j)
            known += K[j] * 0.5 * (g[i - j] + g[i - j - 1]);
        known += K[0] * 0.5 * g[i - 1];
        const double a0 = 0.5 * K[0];

        double wi = w[i - 1];
        bool converged = false;
        for (int it = 0; it < meta.max_fixed_point_iters; ++it) {
            const double gi = std::pow(std::max(wi, 0.0), pw);
            const double next = H[i] - inv_beta * (known + a0 * gi);
            if (std::abs(next - wi) < meta.fixed_point_tol) {
                wi = next;
                converged = true;
                break;
            }
            wi = 0.5 * (wi + next);
        }
        if (!converged)
            throw NumericalError("solve_barrier: fixed point did not converge at step " +
                                 std::to_string(i) + "; refine the time grid");
        if (wi < -1e-8)
            throw NumericalError("solve_barrier: negative barrier trace (" + std::to_string(wi) +
                                 "); kernel misconfiguration");
        if (wi > bound + 1e-8)
            throw NumericalError("solve_barrier: barrier trace exceeds the a priori bound");
        w[i] = wi;
        g[i] = std::pow(std::max(wi, 0.0), pw);
    }
    return w;
}

ValueGrid extend_field(const ValidatedProblem& vp, const std::vector<double>& w,
                       const GridSpec& grid, int threads) {
    validate_grid(grid);
    const ReducedFrame frame = reduce(vp.model);
    ValueGrid vg;
    vg.tgrid = make_tgrid(vp.cost.horizon, grid.nt);
    vg.zgrid = make_zgrid(vp.model, grid);
    vg.w = w;
    vg.u_bound = vp.u_bound();
    vg.p = vp.cost.p;
    vg.beta = vp.cost.beta;
    vg.model = vp.model;
    vg.meta.h_method = vp.cost.rho.is_constant() && vp.cost.phi.is_constant()
                           ? "closed-form" : "quadrature";

    const std::size_t nt = vg.tgrid.size();
    const std::size_t nz = vg.zgrid.size();
    vg.u.resize(nt * nz);
    vg.h.resize(nt * nz);

    const double pw = vp.cost.p / (vp.cost.p - 1.0);
    const double inv_beta = vp.cost.p - 1.0;
    std::vector<double> g(nt);
    for (std::size_t i = 0; i < nt; ++i) g[i] = std::pow(std::max(w[i], 0.0), pw);

    parallel_for(nz, threads, [&](std::size_t jz) {
        const double a = frame.offset(vg.zgrid[jz]);
        const std::vector<double> hcol = source_column(vp, frame, vg.tgrid, a);
        const std::vector<double> K = kernel_moments(frame, vg.tgrid, a);
        for (std::size_t i = 0; i < nt; ++i) {
            vg.h[i * nz + jz] = hcol[i];
            vg.u[i * nz + jz] = hcol[i] - inv_beta * convolve_row(K, g, i);
        }
    });

    // pin the barrier column to the trace it came from
    const double zb = vp.model.barrier;
    std::size_t jb = 0;
    double best = std::abs(vg.zgrid[0] - zb);
    for (std::size_t j = 1; j < nz; ++j) {
        const double d = std::abs(vg.zgrid[j] - zb);
        if (d < best) { best = d; jb = j; }
    }
    if (best < 1e-12 * std::max(1.0, std::abs(zb)))
        for (std::size_t i = 0; i < nt; ++i) vg.u[i * nz + jb] = w[i];

    vg.build_interpolant();
    return vg;
}

ValueGrid solve_value(const ValidatedProblem& vp, const GridSpec& grid, int threads) {
    return extend_field(vp, solve_barrier(vp, grid), grid, threads);
}

void ValueGrid::build_interpolant() {
    const std::size_t nt = tgrid.size(), nz = zgrid.size();
    z_slopes.resize(nt * nz);
    std::vector<double> row(nz), d;
    for (std::size_t i = 0; i < nt; ++i) {
        for (std::size_t j = 0; j < nz; ++j) row[j] = u[i * nz + j];
        d = pchip_slopes(zgrid, row);
        for (std::size_t j = 0; j < nz; ++j) z_slopes[i * nz + j] = d[j];
    }
}

double ValueGrid::w_at(double t) const {
    const double T = tgrid.back();
    if (t <= 0.0) return std::clamp(w.front(), 0.0, u_bound);
    if (t >= T) return std::clamp(w.back(), 0.0, u_bound);
    const double x = t / T * (tgrid.size() - 1);
    const std::size_t i = std::min(static_cast<std::size_t>(x), tgrid.size() - 2);
    const double f = x - i;
    return std::clamp(w[i] * (1.0 - f) + w[i + 1] * f, 0.0, u_bound);
}

double ValueGrid::value_at(double t, double z) const {
    const std::size_t nz = zgrid.size();
    const double zc = std::clamp(z, zgrid.front(), zgrid.back());
    auto it = std::upper_bound(zgrid.begin(), zgrid.end(), zc);
    std::size_t j = it == zgrid.begin() ? 0 : static_cast<std::size_t>(it - zgrid.begin()) - 1;
    if (j > nz - 2) j = nz - 2;

    auto row_value = [&](std::size_t i) {
        return hermite_eval(zgrid[j], zgrid[j + 1], u[i * nz + j], u[i * nz + j + 1],
                            z_slopes[i * nz + j], z_slopes[i * nz + j + 1], zc);
    };
    const double T = tgrid.back();
    double val;
    if (t <= 0.0) val = row_value(0);
    else if (t >= T) val = row_value(tgrid.size() - 1);
    else {
        const double x = t / T * (tgrid.size() - 1);
        const std::size_t i = std::min(static_cast<std::size_t>(x), tgrid.size() - 2);
        const double f = x - i;
        val = row_value(i) * (1.0 - f) + row_value(i + 1) * f;
    }
    return std::clamp(val, 0.0, u_bound);
}

std::vector<ResidualProbe> residual_mc(const ValidatedProblem& vp, const ValueGrid& vg,
                                       int npaths, const RngSpec& rng, int threads) {
    const double T = vp.cost.horizon;
    const double zb = vp.model.barrier;
    const std::size_t nz = vg.zgrid.size();
    const double zmid = vg.zgrid[nz / 2];
    const double zfar = vp.model.side == Side::Lower ? vg.zgrid.back() : vg.zgrid.front();
    const std::vector<std::pair<double, double>> probes = {
        {T, zb}, {T, zmid}, {T, zfar}, {0.5 * T, zb}, {0.5 * T, zmid}};

    const int steps = 256;
    const double pw = vp.cost.p / (vp.cost.p - 1.0);
    const double inv_beta = vp.cost.p - 1.0;

    std::vector<ResidualProbe> out;
    for (auto [pt, pz] : probes) {
        ModelSpec m = vp.model;
        m.z0 = pz;
        std::vector<double> y(static_cast<std::size_t>(npaths));
        parallel_for(y.size(), threads, [&](std::size_t i) {
            RngSpec rs{rng.seed, rng.stream_id + 1000003 + i};
            const PathBundle path = simulate(m, pt, steps, rs);
            double val = vp.cost.rho.eval(path.prices.back());
            if (!vp.cost.phi.is_zero()) {
                double acc = 0.0;
                for (int k = 0; k < steps; ++k) {
                    const double dt = path.times[k + 1] - path.times[k];
                    acc += 0.5 * dt * (vp.cost.phi.eval(path.prices[k]) +
                                       vp.cost.phi.eval(path.prices[k + 1]));
                }
                val += acc;
            }
            double nonlocal = 0.0;
            for (int k = 0; k < steps; ++k) {
                const double dl = path.loctime[k + 1] - path.loctime[k];
                if (dl > 0.0) {
                    const double tbar = 0.5 * (path.times[k] + path.times[k + 1]);
                    nonlocal += std::pow(vg.w_at(pt - tbar), pw) * dl;
                }
            }
            y[i] = val - inv_beta * nonlocal;
        });
        double mean = 0.0;
        for (double v : y) mean += v;
        mean /= static_cast<double>(y.size());
        double var = 0.0;
        for (double v : y) var += (v - mean) * (v - mean);
        var /= static_cast<double>(y.size() - 1);
        const double se = std::sqrt(var / static_cast<double>(y.size()));

        ResidualProbe r;
        r.t = pt;
        r.z = pz;
        r.u_value = vg.value_at(pt, pz);
        r.mc_mean = mean;
        r.mc_stderr = se;
        if (se < 1e-14)
            r.zscore = std::abs(r.u_value - mean) < 1e-10 ? 0.0
                       : std::numeric_limits<double>::infinity();
        else
            r.zscore = std::abs(r.u_value - mean) / se;
        r.pass = r.zscore < 3.0;
        out.push_back(r);
    }
    return out;
}

} // namespace zoneliq
