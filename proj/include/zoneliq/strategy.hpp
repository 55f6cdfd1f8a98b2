#pragma once

#include "zoneliq/model.hpp"
#include "zoneliq/paths.hpp"
#include "zoneliq/value.hpp"

#include <vector>

namespace zoneliq {

// Trading policies. Optimal and ScaledOptimal need a solved ValueGrid;
// ConstantRate trades at a fixed speed toward zero inventory and stops
// there; CustomTable is a deterministic speed profile xi(t).
struct Policy {
    enum class Kind { Optimal, ScaledOptimal, ConstantRate, CustomTable };
    Kind kind = Kind::Optimal;
    double factor = 1.0;  // ScaledOptimal multiplier
    double rate = 0.0;    // ConstantRate speed, >= 0
    std::vector<double> table_t, table_xi;

    static Policy optimal();
    static Policy scaled_optimal(double factor);
    static Policy constant_rate(double rate);
    static Policy custom_table(std::vector<double> t, std::vector<double> xi);
};

struct ExecutionRecord {
    std::vector<double> xi;         // speed at grid nodes
    std::vector<double> inventory;  // X at grid nodes
    double cost_impact = 0.0;
    double cost_running = 0.0;
    double cost_terminal = 0.0;
    double certificate = 0.0;       // pathwise int Phi_p(|xi|, X u^beta) dL
    double cost_total() const { return cost_impact + cost_running + cost_terminal; }
};

// Pathwise execution. Local-time integrals use the exact dL increments from
// the path engine; within each increment the inventory ODE dX = -kappa X u^beta dL
// is integrated in closed form, so trading off the barrier is exactly zero.
ExecutionRecord execute(const Policy& policy, const PathBundle& path,
                        const ValidatedProblem& vp, const ValueGrid* vg);

// Phi_p(x, y) = x^p - p y^{p-1} x + (p-1) y^p  >= 0, zero iff x == y.
double phi_p(double x, double y, double p);

// Pathwise optimality gap; nonnegative, ~0 for the optimal policy.
double excess_cost_certificate(const ExecutionRecord& rec);

struct McCostResult {
    double mean = 0.0, se = 0.0;
    double mean_impact = 0.0, mean_running = 0.0, mean_terminal = 0.0;
    double mean_certificate = 0.0, se_certificate = 0.0;
    int npaths = 0;
};

McCostResult mc_cost(const Policy& policy, const ValidatedProblem& vp, const ValueGrid* vg,
                     int npaths, int steps, const RngSpec& rng, int threads = 0);

// Common-random-number comparison: both policies on the same simulated paths.
struct PairedResult {
    McCostResult a, b;
    double mean_diff = 0.0;   // b - a
    double se_diff = 0.0;
};

PairedResult mc_cost_paired(const Policy& pa, const Policy& pb, const ValidatedProblem& vp,
                            const ValueGrid* vg, int npaths, int steps, const RngSpec& rng,
                            int threads = 0);

// Rate such that the constant-rate baseline matches the optimal policy's
// expected terminal inventory, calibrated on a pilot run.
double calibrate_constant_rate(const ValidatedProblem& vp, const ValueGrid& vg,
                               int pilot_paths, int steps, const RngSpec& rng, int threads = 0);

void write_execution_csv(std::ostream& os, const PathBundle& path, const ExecutionRecord& rec);

} // namespace zoneliq
