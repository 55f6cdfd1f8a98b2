#include "zoneliq/strategy.hpp"

#include "zoneliq/parallel.hpp"
#include "zoneliq/xmath.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace zoneliq {

Policy Policy::optimal() { return Policy{}; }

Policy Policy::scaled_optimal(double factor) {
    Policy p;
    p.kind = Kind::ScaledOptimal;
    p.factor = factor;
    return p;
}

Policy Policy::constant_rate(double rate) {
    Policy p;
    p.kind = Kind::ConstantRate;
    p.rate = rate;
    return p;
}

Policy Policy::custom_table(std::vector<double> t, std::vector<double> xi) {
    Policy p;
    p.kind = Kind::CustomTable;
    p.table_t = std::move(t);
    p.table_xi = std::move(xi);
    return p;
}

double phi_p(double x, double y, double p) {
    return std::pow(x, p) - p * std::pow(y, p - 1.0) * x + (p - 1.0) * std::pow(y, p);
}

double excess_cost_certificate(const ExecutionRecord& rec) { return rec.certificate; }

namespace {

double table_eval(const std::vector<double>& t, const std::vector<double>& v, double x) {
    if (x <= t.front()) return v.front();
    if (x >= t.back()) return v.back();
    auto it = std::upper_bound(t.begin(), t.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - t.begin());
    const double w = (x - t[i - 1]) / (t[i] - t[i - 1]);
    return v[i - 1] + w * (v[i] - v[i - 1]);
}

} // namespace

ExecutionRecord execute(const Policy& policy, const PathBundle& path,
                        const ValidatedProblem& vp, const ValueGrid* vg) {
    const bool needs_grid = policy.kind == Policy::Kind::Optimal ||
                            policy.kind == Policy::Kind::ScaledOptimal;
    if (needs_grid && vg == nullptr)
        throw ValidationError("execute: optimal policies require a solved value grid");
    if (policy.kind == Policy::Kind::ScaledOptimal && !(policy.factor > 0.0))
        throw ValidationError("execute: scale factor must be > 0");
    if (policy.kind == Policy::Kind::ConstantRate && policy.rate < 0.0)
        throw ValidationError("execute: constant rate must be >= 0");
    if (policy.kind == Policy::Kind::CustomTable &&
        (policy.table_t.size() < 2 || policy.table_t.size() != policy.table_xi.size()))
        throw ValidationError("execute: custom table needs >= 2 matching samples");

    const std::size_t M = path.times.size() - 1;
    const double T = vp.cost.horizon;
    const double p = vp.cost.p;
    const double beta = vp.cost.beta;
    const double x0 = vp.cost.x0;
    const double sgn = x0 >= 0.0 ? 1.0 : -1.0;
    const double ax0 = std::abs(x0);

    ExecutionRecord rec;
    rec.xi.resize(M + 1);
    rec.inventory.resize(M + 1);

    const double kappa = policy.kind == Policy::Kind::ScaledOptimal ? policy.factor : 1.0;
    double log_decay = 0.0;   // accumulated int kappa u^beta dL, optimal family
    double amag = ax0;        // |X|, constant-rate family
    double xcur = x0;         // signed X, custom table

    auto node_inventory = [&](void) {
        switch (policy.kind) {
        case Policy::Kind::Optimal:
        case Policy::Kind::ScaledOptimal: return sgn * ax0 * std::exp(-log_decay);
        case Policy::Kind::ConstantRate: return sgn * amag;
        case Policy::Kind::CustomTable: return xcur;
        }
        return 0.0;
    };
    auto node_xi = [&](double t, double price, double inv) {
        switch (policy.kind) {
        case Policy::Kind::Optimal:
        case Policy::Kind::ScaledOptimal:
            return -kappa * inv * std::pow(vg->value_at(T - t, price), beta);
        case Policy::Kind::ConstantRate:
            return inv == 0.0 ? 0.0 : -sgn * policy.rate;
        case Policy::Kind::CustomTable:
            return table_eval(policy.table_t, policy.table_xi, t);
        }
        return 0.0;
    };

    rec.inventory[0] = node_inventory();
    rec.xi[0] = node_xi(path.times[0], path.prices[0], rec.inventory[0]);
    double running = 0.0;
    double prev_run = vp.cost.phi.is_zero()
                          ? 0.0
                          : vp.cost.phi.eval(path.prices[0]) * std::pow(std::abs(rec.inventory[0]), p);

    for (std::size_t k = 0; k < M; ++k) {
        const double dl = path.loctime[k + 1] - path.loctime[k];
        if (dl > 0.0) {
            const double tbar = 0.5 * (path.times[k] + path.times[k + 1]);
            const double g = vg != nullptr ? std::pow(vg->w_at(T - tbar), beta) : 0.0;
            switch (policy.kind) {
            case Policy::Kind::Optimal:
            case Policy::Kind::ScaledOptimal: {
                const double kg = kappa * g;
                if (kg > 0.0) {
                    const double xman = ax0 * std::exp(-log_decay);
                    const double decay = -std::expm1(-p * kg * dl); // 1 - e^{-p kg dl}
                    rec.cost_impact +=
                        std::pow(kg, p - 1.0) * std::pow(xman, p) * decay / p;
                    rec.certificate += phi_p(kappa, 1.0, p) * std::pow(g, p) *
                                       std::pow(xman, p) * decay / (p * kg);
                    log_decay += kg * dl;
                }
                break;
            }
            case Policy::Kind::ConstantRate: {
                const double r = policy.rate;
                if (r > 0.0 && amag > 0.0) {
                    const double stop = amag / r;
                    const double dleff = dl < stop ? dl : stop;
                    rec.cost_impact += std::pow(r, p) * dleff;
                    for (int q = 0; q < 8; ++q) {
                        const double ell = gl8_nodes[q] * dleff;
                        rec.certificate += gl8_weights[q] * dleff *
                                           phi_p(r, (amag - r * ell) * g, p);
                    }
                    amag = std::max(0.0, amag - r * dl);
                } else if (g > 0.0) {
                    rec.certificate += (p - 1.0) * std::pow(amag * g, p) * dl;
                }
                break;
            }
            case Policy::Kind::CustomTable: {
                const double tbar2 = 0.5 * (path.times[k] + path.times[k + 1]);
                const double xi = table_eval(policy.table_t, policy.table_xi, tbar2);
                rec.cost_impact += std::pow(std::abs(xi), p) * dl;
                for (int q = 0; q < 8; ++q) {
                    const double ell = gl8_nodes[q] * dl;
                    const double xv = sgn * (xcur + xi * ell);
                    rec.certificate += gl8_weights[q] * dl *
                                       phi_p(std::abs(xi), std::max(0.0, xv) * g, p);
                }
                xcur += xi * dl;
                break;
            }
            }
        }
        rec.inventory[k + 1] = node_inventory();
        rec.xi[k + 1] = node_xi(path.times[k + 1], path.prices[k + 1], rec.inventory[k + 1]);
        if (!vp.cost.phi.is_zero()) {
            const double cur = vp.cost.phi.eval(path.prices[k + 1]) *
                               std::pow(std::abs(rec.inventory[k + 1]), p);
            running += 0.5 * (path.times[k + 1] - path.times[k]) * (prev_run + cur);
            prev_run = cur;
        }
    }
    rec.cost_running = running;
    rec.cost_terminal =
        vp.cost.rho.eval(path.prices.back()) * std::pow(std::abs(rec.inventory.back()), p);
    return rec;
}

namespace {

struct Accum {
    double total = 0.0, total2 = 0.0;
    double impact = 0.0, running = 0.0, terminal = 0.0;
    double cert = 0.0, cert2 = 0.0;
};

McCostResult finalize(const std::vector<double>& totals, const Accum& acc, int npaths) {
    McCostResult r;
    r.npaths = npaths;
    const double n = static_cast<double>(npaths);
    r.mean = acc.total / n;
    r.mean_impact = acc.impact / n;
    r.mean_running = acc.running / n;
    r.mean_terminal = acc.terminal / n;
    r.mean_certificate = acc.cert / n;
    double var = 0.0;
    for (double v : totals) var += (v - r.mean) * (v - r.mean);
    r.se = npaths > 1 ? std::sqrt(var / (n * (n - 1.0))) : 0.0;
    const double cvar = std::max(0.0, acc.cert2 / n - r.mean_certificate * r.mean_certificate);
    r.se_certificate = npaths > 1 ? std::sqrt(cvar / (n - 1.0)) : 0.0;
    return r;
}

} // namespace

McCostResult mc_cost(const Policy& policy, const ValidatedProblem& vp, const ValueGrid* vg,
                     int npaths, int steps, const RngSpec& rng, int threads) {
    if (npaths < 2) throw ValidationError("mc_cost: npaths must be >= 2");
    std::vector<double> totals(static_cast<std::size_t>(npaths));
    std::vector<ExecutionRecord> recs(static_cast<std::size_t>(npaths));
    parallel_for(totals.size(), threads, [&](std::size_t i) {
        RngSpec rs{rng.seed, rng.stream_id + i};
        const PathBundle path = simulate(vp.model, vp.cost.horizon, steps, rs);
        ExecutionRecord rec = execute(policy, path, vp, vg);
        totals[i] = rec.cost_total();
        rec.xi.clear();
        rec.xi.shrink_to_fit();
        rec.inventory.clear();
        rec.inventory.shrink_to_fit();
        recs[i] = std::move(rec);
    });
    Accum acc;
    for (std::size_t i = 0; i < totals.size(); ++i) {
        acc.total += totals[i];
        acc.impact += recs[i].cost_impact;
        acc.running += recs[i].cost_running;
        acc.terminal += recs[i].cost_terminal;
        acc.cert += recs[i].certificate;
        acc.cert2 += recs[i].certificate * recs[i].certificate;
    }
    return finalize(totals, acc, npaths);
}

PairedResult mc_cost_paired(const Policy& pa, const Policy& pb, const ValidatedProblem& vp,
                            const ValueGrid* vg, int npaths, int steps, const RngSpec& rng,
                            int threads) {
    if (npaths < 2) throw ValidationError("mc_cost_paired: npaths must be >= 2");
    const std::size_t n = static_cast<std::size_t>(npaths);
    std::vector<double> ca(n), cb(n);
    std::vector<ExecutionRecord> ra(n), rb(n);
    parallel_for(n, threads, [&](std::size_t i) {
        RngSpec rs{rng.seed, rng.stream_id + i};
        const PathBundle path = simulate(vp.model, vp.cost.horizon, steps, rs);
        ExecutionRecord reca = execute(pa, path, vp, vg);
        ExecutionRecord recb = execute(pb, path, vp, vg);
        ca[i] = reca.cost_total();
        cb[i] = recb.cost_total();
        reca.xi.clear(); reca.inventory.clear();
        recb.xi.clear(); recb.inventory.clear();
        ra[i] = std::move(reca);
        rb[i] = std::move(recb);
    });
    Accum aa, ab;
    for (std::size_t i = 0; i < n; ++i) {
        aa.total += ca[i]; aa.impact += ra[i].cost_impact; aa.running += ra[i].cost_running;
        aa.terminal += ra[i].cost_terminal; aa.cert += ra[i].certificate;
        aa.cert2 += ra[i].certificate * ra[i].certificate;
        ab.total += cb[i]; ab.impact += rb[i].cost_impact; ab.running += rb[i].cost_running;
        ab.terminal += rb[i].cost_terminal; ab.cert += rb[i].certificate;
        ab.cert2 += rb[i].certificate * rb[i].certificate;
    }
    PairedResult out;
    out.a = finalize(ca, aa, npaths);
    out.b = finalize(cb, ab, npaths);
    const double nd = static_cast<double>(npaths);
    double md = 0.0;
    for (std::size_t i = 0; i < n; ++i) md += cb[i] - ca[i];
    md /= nd;
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = cb[i] - ca[i] - md;
        var += d * d;
    }
    out.mean_diff = md;
    out.se_diff = std::sqrt(var / (nd * (nd - 1.0)));
    return out;
}

double calibrate_constant_rate(const ValidatedProblem& vp, const ValueGrid& vg,
                               int pilot_paths, int steps, const RngSpec& rng, int threads) {
    const std::size_t n = static_cast<std::size_t>(pilot_paths);
    std::vector<double> lt(n), xt(n);
    const Policy opt = Policy::optimal();
    parallel_for(n, threads, [&](std::size_t i) {
        RngSpec rs{rng.seed, rng.stream_id + 500000 + i};
        const PathBundle path = simulate(vp.model, vp.cost.horizon, steps, rs);
        const ExecutionRecord rec = execute(opt, path, vp, &vg);
        lt[i] = path.loctime.back();
        xt[i] = std::abs(rec.inventory.back());
    });
    double target = 0.0;
    for (double v : xt) target += v;
    target /= static_cast<double>(n);
    const double ax0 = std::abs(vp.cost.x0);
    if (target >= ax0 - 1e-15) return 0.0;

    auto mean_residual = [&](double r) {
        double m = 0.0;
        for (double l : lt) m += std::max(0.0, ax0 - r * l);
        return m / static_cast<double>(n);
    };
    double hi = 1.0;
    for (int i = 0; i < 80 && mean_residual(hi) > target; ++i) hi *= 2.0;
    double lo = 0.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mean_residual(mid) > target) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi);
}

void write_execution_csv(std::ostream& os, const PathBundle& path, const ExecutionRecord& rec) {
    os << "t,S,L,xi,X\n";
    char buf[160];
    for (std::size_t k = 0; k < path.times.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.12g,%.12g,%.12g,%.12g,%.12g\n", path.times[k],
                      path.prices[k], path.loctime[k], rec.xi[k], rec.inventory[k]);
        os << buf;
    }
}

} // namespace zoneliq
