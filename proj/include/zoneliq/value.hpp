#pragma once

#include "zoneliq/model.hpp"

#include <string>
#include <vector>

namespace zoneliq {

struct ResidualProbe {
    double t = 0.0, z = 0.0;
    double u_value = 0.0;
    double mc_mean = 0.0, mc_stderr = 0.0;
    double zscore = 0.0;
    bool pass = true;
};

struct SolverMeta {
    double fixed_point_tol = 1e-10;
    int max_fixed_point_iters = 500;
    std::string h_method;            // "closed-form" | "quadrature"
    std::vector<ResidualProbe> residuals;
};

// Solved value field. w is the barrier trace u(t, c); u and h are stored
// row-major as [it * zgrid.size() + iz]. zgrid holds original price units.
struct ValueGrid {
    std::vector<double> tgrid;
    std::vector<double> zgrid;
    std::vector<double> w;
    std::vector<double> u;
    std::vector<double> h;
    double u_bound = 0.0;
    double p = 2.0, beta = 1.0;
    ModelSpec model;
    SolverMeta meta;

    double u_at(std::size_t it, std::size_t iz) const { return u[it * zgrid.size() + iz]; }
    double h_at(std::size_t it, std::size_t iz) const { return h[it * zgrid.size() + iz]; }

    // barrier trace, linear in t, clamped to [0, u_bound]
    double w_at(double t) const;
    // shape-preserving cubic in z, linear in t, clamped to [0, u_bound]
    double value_at(double t, double z) const;

    // slopes for the cubic interpolation; built once after solving
    std::vector<double> z_slopes;
    void build_interpolant();
};

// h(t, z) = E_z[rho(S_t)] + int_0^t E_z[phi(S_s)] ds, by quadrature against
// the reflected transition density (closed form for constant penalties).
double source_term(const ValidatedProblem& vp, double t, double z);

// Barrier trace of the nonlinear Volterra equation
//   w(t) = h(t,c) - (1/beta) int_0^t w(t-s)^{1+beta} rho_s(c) ds
// by forward product integration: the weakly singular kernel is integrated
// exactly per step against a piecewise-constant w^{1+beta}, and each step is
// closed with a damped fixed point to 1e-10. Never clamps: out-of-bound or
// negative iterates are rejected.
std::vector<double> solve_barrier(const ValidatedProblem& vp, const GridSpec& grid);

// Full field u(t,z) = h(t,z) - (1/beta) int_0^t w(t-s)^{1+beta} rho_s(z) ds,
// columns computed independently (parallel over z).
ValueGrid extend_field(const ValidatedProblem& vp, const std::vector<double>& w,
                       const GridSpec& grid, int threads = 0);

// solve_barrier + extend_field
ValueGrid solve_value(const ValidatedProblem& vp, const GridSpec& grid, int threads = 0);

// Direct Monte Carlo verification of the integral equation at probe points:
// reports |u - (h_hat - (1/beta) nonlocal_hat)| / stderr per probe.
std::vector<ResidualProbe> residual_mc(const ValidatedProblem& vp, const ValueGrid& vg,
                                       int npaths, const RngSpec& rng, int threads = 0);

} // namespace zoneliq
