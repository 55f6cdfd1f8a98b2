#include "zoneliq/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace zoneliq {

namespace {

bool finite(double x) { return std::isfinite(x); }

void require(bool ok, const std::string& msg) {
    if (!ok) throw ValidationError(msg);
}

} // namespace

FunctionSpec FunctionSpec::constant(double value) {
    FunctionSpec f;
    f.variant = Variant::Constant;
    f.v = value;
    return f;
}

FunctionSpec FunctionSpec::affine_clamped(double a, double b, double lo, double hi) {
    FunctionSpec f;
    f.variant = Variant::AffineClamped;
    f.a = a; f.b = b; f.lo = lo; f.hi = hi;
    return f;
}

FunctionSpec FunctionSpec::gaussian_bump(double center, double width, double height) {
    FunctionSpec f;
    f.variant = Variant::GaussianBump;
    f.center = center; f.width = width; f.height = height;
    return f;
}

FunctionSpec FunctionSpec::table(std::vector<double> knots, std::vector<double> values) {
    FunctionSpec f;
    f.variant = Variant::Table;
    f.knots = std::move(knots);
    f.values = std::move(values);
    return f;
}

double FunctionSpec::eval(double z) const {
    switch (variant) {
    case Variant::Constant:
        return v;
    case Variant::AffineClamped:
        return std::clamp(a + b * z, lo, hi);
    case Variant::GaussianBump: {
        const double d = (z - center) / width;
        return height * std::exp(-0.5 * d * d);
    }
    case Variant::Table: {
        if (z <= knots.front()) return values.front();
        if (z >= knots.back()) return values.back();
        auto it = std::upper_bound(knots.begin(), knots.end(), z);
        const std::size_t i = static_cast<std::size_t>(it - knots.begin());
        const double w = (z - knots[i - 1]) / (knots[i] - knots[i - 1]);
        return values[i - 1] + w * (values[i] - values[i - 1]);
    }
    }
    return 0.0;
}

double FunctionSpec::upper_bound() const {
    switch (variant) {
    case Variant::Constant: return v;
    case Variant::AffineClamped: return hi;
    case Variant::GaussianBump: return height;
    case Variant::Table: return *std::max_element(values.begin(), values.end());
    }
    return 0.0;
}

bool FunctionSpec::is_zero() const {
    return upper_bound() == 0.0;
}

bool FunctionSpec::is_constant() const {
    switch (variant) {
    case Variant::Constant: return true;
    case Variant::AffineClamped: return b == 0.0 || lo == hi;
    case Variant::GaussianBump: return height == 0.0;
    case Variant::Table:
        return std::all_of(values.begin(), values.end(),
                           [&](double x) { return x == values.front(); });
    }
    return false;
}

double eval_fn(const FunctionSpec& f, double z) { return f.eval(z); }

namespace {

void validate_fn(const FunctionSpec& f, const char* name, bool positive_domain) {
    switch (f.variant) {
    case FunctionSpec::Variant::Constant:
        require(finite(f.v) && f.v >= 0.0, std::string(name) + ": constant value must be finite and >= 0");
        break;
    case FunctionSpec::Variant::AffineClamped:
        require(finite(f.a) && finite(f.b), std::string(name) + ": affine coefficients must be finite");
        require(finite(f.lo) && finite(f.hi) && f.lo >= 0.0 && f.hi >= f.lo,
                std::string(name) + ": affine-clamped needs finite 0 <= lo <= hi");
        break;
    case FunctionSpec::Variant::GaussianBump:
        require(finite(f.height) && f.height >= 0.0, std::string(name) + ": bump height must be >= 0");
        require(finite(f.width) && f.width > 0.0, std::string(name) + ": bump width must be > 0");
        break;
    case FunctionSpec::Variant::Table: {
        require(f.knots.size() >= 2 && f.knots.size() == f.values.size(),
                std::string(name) + ": table needs >= 2 knots and matching values");
        for (std::size_t i = 1; i < f.knots.size(); ++i)
            require(f.knots[i] > f.knots[i - 1], std::string(name) + ": table knots must be strictly increasing");
        for (double v : f.values)
            require(finite(v) && v >= 0.0, std::string(name) + ": table values must be finite and >= 0");
        if (positive_domain)
            require(f.knots.front() >= 0.0, std::string(name) + ": table knots must lie in the positive price domain");
        break;
    }
    }
}

} // namespace

ValidatedProblem validate(const ModelSpec& model, const CostSpec& cost) {
    require(finite(model.sigma) && model.sigma > 0.0, "model.sigma must be > 0");
    require(finite(model.drift), "model.drift must be finite");
    require(finite(model.barrier), "model.barrier must be finite");
    require(finite(model.z0), "model.z0 must be finite");
    if (model.kind == Kind::Gbm) {
        require(model.barrier > 0.0, "model.barrier must be positive for GBM");
        require(model.z0 > 0.0, "model.z0 must be positive for GBM");
    }
    if (model.side == Side::Lower)
        require(model.z0 >= model.barrier, "model.z0 must satisfy z0 >= barrier for lower reflection");
    else
        require(model.z0 <= model.barrier, "model.z0 must satisfy z0 <= barrier for upper reflection");

    require(finite(cost.p) && cost.p >= 2.0 && cost.p <= 10.0, "cost.p must lie in [2, 10]");
    require(finite(cost.horizon) && cost.horizon > 0.0, "cost.horizon must be > 0");
    require(finite(cost.x0), "cost.x0 must be finite");

    const bool positive_domain = model.kind == Kind::Gbm;
    validate_fn(cost.phi, "cost.phi", positive_domain);
    validate_fn(cost.rho, "cost.rho", positive_domain);

    ValidatedProblem vp;
    vp.model = model;
    vp.cost = cost;
    vp.cost.beta = 1.0 / (cost.p - 1.0);
    vp.c_phi = cost.phi.upper_bound();
    vp.c_rho = cost.rho.upper_bound();
    return vp;
}

void validate_grid(const GridSpec& grid) {
    require(grid.nt >= 2, "grid.nt must be >= 2");
    require(grid.nz >= 2, "grid.nz must be >= 2");
    require(finite(grid.z_far) && grid.z_far > 0.0, "grid.z_far must be > 0");
}

double ReducedFrame::price(double a) const {
    const double x = barrier_t + sgn * sigma * a;
    return log_price ? std::exp(x) : x;
}

double ReducedFrame::offset(double z) const {
    const double x = log_price ? std::log(z) : z;
    return sgn * (x - barrier_t) / sigma;
}

ReducedFrame reduce(const ModelSpec& m) {
    ReducedFrame f;
    f.sigma = m.sigma;
    f.sgn = m.side == Side::Lower ? 1.0 : -1.0;
    f.log_price = m.kind == Kind::Gbm;
    const double b_eff = m.kind == Kind::Gbm ? m.drift - 0.5 * m.sigma * m.sigma : m.drift;
    f.mu = -f.sgn * b_eff / m.sigma;
    f.barrier_t = m.kind == Kind::Gbm ? std::log(m.barrier) : m.barrier;
    f.ell_scale = m.kind == Kind::Gbm ? m.sigma * m.barrier : m.sigma;
    f.a0 = f.offset(m.z0);
    return f;
}

} // namespace zoneliq
