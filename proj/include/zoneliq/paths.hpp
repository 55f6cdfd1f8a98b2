#pragma once

#include "zoneliq/model.hpp"

#include <iosfwd>
#include <vector>

namespace zoneliq {

// Contact tolerance used by support checks; reflection itself is exact
// by construction (tol_reflect = 0).
inline double tol_contact(const ModelSpec& m, double T) {
    return m.sigma * std::sqrt(T) / 1048576.0; // 2^-20 sigma sqrt(T)
}

// One simulated trajectory of the reflected price and its local time on a
// uniform grid. loctime is the pushing-process normalization: nondecreasing,
// starts at 0, increases only over steps with barrier contact.
struct PathBundle {
    ModelSpec model;
    std::vector<double> times;
    std::vector<double> prices;
    std::vector<double> loctime;
    // 1 where the simulated step [t_k, t_{k+1}] touched the barrier
    std::vector<unsigned char> contact;
    RngSpec rng;
};

// BridgeExact samples the within-step maximum of the driving motion exactly
// (inverse transform of the bridge-max law), so (S, L) at grid nodes is
// exact in law. NodeOnly uses node values only: cheaper, O(sqrt(dt)) bias.
enum class MaxRefinement { BridgeExact, NodeOnly };

PathBundle simulate_abm(const ModelSpec& model, double T, int steps, const RngSpec& rng,
                        MaxRefinement refine = MaxRefinement::BridgeExact);

// GBM path via the log transform: prices = exp(ABM prices), loctime scaled
// by the barrier level.
PathBundle simulate_gbm(const ModelSpec& model, double T, int steps, const RngSpec& rng,
                        MaxRefinement refine = MaxRefinement::BridgeExact);

PathBundle simulate(const ModelSpec& model, double T, int steps, const RngSpec& rng,
                    MaxRefinement refine = MaxRefinement::BridgeExact);

struct DensityQuery {
    double from = 0.0;
    double to = 0.0;
    double elapsed = 1.0;
};

// Transition density of the unreflected driving motion (Gaussian for ABM,
// lognormal for GBM).
double free_density(const ModelSpec& model, const DensityQuery& q);

// Transition density of the reflected process, closed form for all drifts
// (method of images plus a drift tail term).
double reflected_density(const ModelSpec& model, const DensityQuery& q);

// rho_s(z) = d/ds E_z[L_s]: the rate at which expected local time accrues.
// For driftless unit-sigma reflection at 0 this is the free Gaussian kernel
// evaluated at the barrier.
double barrier_flux(const ModelSpec& model, double z, double s);

// CSV with header "t,S,L", one row per grid node.
void write_path_csv(std::ostream& os, const PathBundle& path);

} // namespace zoneliq
