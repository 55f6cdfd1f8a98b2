#pragma once

#include "zoneliq/model.hpp"
#include "zoneliq/paths.hpp"

#include <span>
#include <vector>

namespace zoneliq {

// Embedded reflecting walk at resolution level n. States live on the grid
// c + 2^-n Z (ABM) or c exp(2^-n Z) (GBM); state_idx counts grid steps from
// the barrier (always >= 0). The lattice local time gains exactly
// 2^-n sigma (ABM) or 2^-n sigma c (GBM) at every visit to the barrier state.
struct LatticePath {
    int level = 0;
    double h = 1.0;                  // 2^-level
    std::vector<int> state_idx;
    std::vector<double> states;      // prices
    std::vector<double> ell;         // lattice local time, one entry per state
    std::vector<double> clock;       // approximate physical times k 2^-2n
    std::vector<double> tau;         // measured crossing times when derived from a path
    bool has_measured_tau = false;
};

// Direct simulation of the embedded chain, ceil(2^{2n} T) steps. Step-up
// probability is the two-sided exit probability of the drifted driving
// motion: q_up = 1 / (1 + exp(-2 b h / sigma^2)). From the barrier the
// reflected move is always one step up.
LatticePath embedded_walk(const ModelSpec& model, int level, double T, const RngSpec& rng);

// Crossing times of the grid c + 2^-n Z extracted from a continuous path
// (by linear interpolation between nodes). Rejects paths whose per-step
// moves are too coarse for the requested level.
LatticePath crossings_from_path(const PathBundle& path, int level);

// X_N = x0 + sum_{k<=N} xi_k (ell_k - ell_{k-1}), with ell_{-1} = 0.
std::vector<double> discrete_inventory(double x0, std::span<const double> xi,
                                       const LatticePath& lat);

// sum_k |xi_k|^p (ell_k - ell_{k-1})
double discrete_cost(std::span<const double> xi, const LatticePath& lat, double p);

// Paired convergence study on common driving randomness: per path, a fine
// polygonal trajectory provides both the reference local time and the
// crossing sequences at every level. sup_err is sup_{t<=T} of
// |ell^(n) at index floor(2^{2n} t) - L_t|; cost_gap compares the discrete
// cost of a fixed smooth speed profile against the Stieltjes cost on the
// same path.
struct LatticeStudyRow {
    int level = 0;
    double median_sup_err = 0.0;
    double median_cost_gap = 0.0;
};

std::vector<LatticeStudyRow> lattice_convergence_study(const ModelSpec& model, double T,
                                                       int level_lo, int level_hi, int npaths,
                                                       const RngSpec& rng, double p = 2.0,
                                                       int threads = 0);

} // namespace zoneliq
