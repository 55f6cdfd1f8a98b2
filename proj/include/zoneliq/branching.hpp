#pragma once

#include "zoneliq/model.hpp"

#include <vector>

namespace zoneliq {

// Critical binary branching particle validator, beta = 1 only. Particles
// move as the reflected diffusion; each carries an exponential local-time
// clock of rate lambda * n_scale and, when its own local time crosses the
// clock, is replaced at the barrier by 0 or 2 offspring with equal
// probability. lambda = 2 makes the quadratic mechanism coefficient match
// the deterministic solver.
struct BranchParams {
    int n_scale = 20;
    double dt = 1.0 / 16.0;           // epoch length; only phi-accumulation accuracy depends on it
    double lambda = 2.0;
    std::size_t max_particles = 1000000;
};

struct PopulationResult {
    double phi_integral = 0.0;        // int <phi, Y_t> dt, trapezoid within epochs
    double rho_terminal = 0.0;        // <rho, Y_T>
    double final_mass = 0.0;
    bool censored = false;
    double max_branch_offset = 0.0;   // max |branch position - barrier|, price units
    std::vector<std::pair<double, double>> mass_checkpoints; // (t, total mass)
};

PopulationResult simulate_population(const ValidatedProblem& vp, const BranchParams& params,
                                     const RngSpec& rng, double start_z);

struct LaplaceEstimate {
    double estimate = 0.0;
    double se = 0.0;
    int censored = 0;
    int npops = 0;
    // batch means of total mass at T/4, T/2, T with standard errors
    std::vector<double> mass_times, mass_means, mass_ses;
};

// Estimate of E[exp(-int <phi,Y> dt - <rho, Y_T>)] with Y_0 = delta_z;
// -log(estimate) approximates u(T, z).
LaplaceEstimate laplace_estimate(const ValidatedProblem& vp, const BranchParams& params,
                                 int npops, const RngSpec& rng, double z, int threads = 0);

} // namespace zoneliq
