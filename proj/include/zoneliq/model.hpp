#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace zoneliq {

// Thrown for invalid model/cost/config data. Maps to CLI exit code 2.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown when a numerical self-check fails (solver divergence, residual
// out of tolerance). Maps to CLI exit code 3.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Kind { Abm, Gbm };
enum class Side { Lower, Upper };

// Reflected price process: ABM or GBM with volatility sigma, drift b,
// one reflecting barrier c. side=Lower keeps S >= c, side=Upper keeps S <= c.
struct ModelSpec {
    Kind kind = Kind::Abm;
    double sigma = 1.0;
    double drift = 0.0;
    double barrier = 0.0;
    Side side = Side::Lower;
    double z0 = 0.0;
};

// Bounded nonnegative scalar function on the price domain. A closed family
// rather than arbitrary code so that upper bounds are machine-checkable.
struct FunctionSpec {
    enum class Variant { Constant, AffineClamped, GaussianBump, Table };
    Variant variant = Variant::Constant;

    // Constant
    double v = 0.0;
    // AffineClamped: clamp(a + b*z, lo, hi)
    double a = 0.0, b = 0.0, lo = 0.0, hi = 0.0;
    // GaussianBump: height * exp(-(z-center)^2 / (2 width^2))
    double center = 0.0, width = 1.0, height = 0.0;
    // Table: piecewise linear through (knots, values), clamped outside
    std::vector<double> knots, values;

    double eval(double z) const;
    double upper_bound() const;
    bool is_zero() const;
    bool is_constant() const;

    static FunctionSpec constant(double value);
    static FunctionSpec affine_clamped(double a, double b, double lo, double hi);
    static FunctionSpec gaussian_bump(double center, double width, double height);
    static FunctionSpec table(std::vector<double> knots, std::vector<double> values);
};

// Control problem data. beta = 1/(p-1) is derived and stored at validation.
struct CostSpec {
    double p = 2.0;
    double beta = 1.0;
    FunctionSpec phi;   // running penalty
    FunctionSpec rho;   // terminal penalty
    double horizon = 1.0;
    double x0 = 1.0;
};

enum class Stretch { Uniform, SqrtClusteredAtBarrier };

struct GridSpec {
    int nt = 1024;
    int nz = 96;
    double z_far = 6.0;   // truncation distance from the barrier, price units
    Stretch stretch = Stretch::SqrtClusteredAtBarrier;
};

// Identical (seed, stream_id) reproduce identical draws.
struct RngSpec {
    std::uint64_t seed = 0;
    std::uint64_t stream_id = 0;
};

struct ValidatedProblem {
    ModelSpec model;
    CostSpec cost;
    double c_phi = 0.0;   // upper bound of phi
    double c_rho = 0.0;   // upper bound of rho
    double u_bound() const { return c_rho + cost.horizon * c_phi; }
};

ValidatedProblem validate(const ModelSpec& model, const CostSpec& cost);
void validate_grid(const GridSpec& grid);
double eval_fn(const FunctionSpec& f, double z);

// Common reduction used by every engine: shift the barrier to 0, scale out
// sigma, log-transform GBM. The reflected process becomes
//   A_t = max(a0, M_t) - V_t,   pushing P_t = max(0, M_t - a0),
// where V is a standard BM with drift mu and M its running maximum.
// Physical local time is L = ell_scale * P.
struct ReducedFrame {
    double a0 = 0.0;        // reduced start offset, >= 0
    double mu = 0.0;        // drift of the driving process V
    double sigma = 1.0;
    double ell_scale = 1.0; // sigma (ABM), sigma*c (GBM)
    double barrier_t = 0.0; // barrier in transformed coordinates (log c for GBM)
    double sgn = 1.0;       // +1 lower reflection, -1 upper
    bool log_price = false;

    double price(double a) const;    // reduced offset -> original price
    double offset(double z) const;   // original price -> reduced offset
};

ReducedFrame reduce(const ModelSpec& m);

} // namespace zoneliq
