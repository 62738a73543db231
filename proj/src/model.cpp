#include "fbp/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace fbp {

// --- geometry --------------------------------------------------------------

bool Box::empty() const {
    if (lo.size() != hi.size() || lo.empty()) return true;
    for (std::size_t k = 0; k < lo.size(); ++k)
        if (!(lo[k] < hi[k])) return true;
    return false;
}

double Box::volume() const {
    double v = 1.0;
    for (std::size_t k = 0; k < lo.size(); ++k) v *= hi[k] - lo[k];
    return v;
}

bool Box::contains(std::span<const double> x) const {
    if (x.size() != lo.size()) return false;
    for (std::size_t k = 0; k < lo.size(); ++k)
        if (x[k] < lo[k] || x[k] > hi[k]) return false;
    return true;
}

int lex_compare(std::span<const double> a, std::span<const double> b) {
    const std::size_t n = std::min(a.size(), b.size());
    for (std::size_t k = 0; k < n; ++k) {
        if (a[k] < b[k]) return -1;
        if (a[k] > b[k]) return 1;
    }
    if (a.size() < b.size()) return -1;
    if (a.size() > b.size()) return 1;
    return 0;
}

// --- fitness ---------------------------------------------------------------

FitnessFunction FitnessFunction::linear(std::vector<double> lambda) {
    bool all_zero = std::all_of(lambda.begin(), lambda.end(), [](double v) { return v == 0.0; });
    if (lambda.empty() || all_zero)
        throw std::invalid_argument("linear fitness requires a nonzero direction");
    FitnessFunction f;
    f.type = FitnessType::linear;
    f.lambda = std::move(lambda);
    return f;
}

FitnessFunction FitnessFunction::coordinate(std::size_t axis) {
    FitnessFunction f;
    f.type = FitnessType::coordinate;
    f.axis = axis;
    return f;
}

FitnessFunction FitnessFunction::custom(std::function<double(std::span<const double>)> eval) {
    FitnessFunction f;
    f.type = FitnessType::custom;
    f.custom_eval = std::move(eval);
    return f;
}

double FitnessFunction::operator()(std::span<const double> x) const {
    for (double v : x)
        if (!std::isfinite(v)) throw std::domain_error("fitness: non-finite input");
    double r = 0.0;
    switch (type) {
        case FitnessType::linear:
            if (x.size() != lambda.size())
                throw std::invalid_argument("fitness: dimension mismatch");
            r = std::inner_product(lambda.begin(), lambda.end(), x.begin(), 0.0);
            break;
        case FitnessType::coordinate:
            if (axis >= x.size()) throw std::invalid_argument("fitness: axis out of range");
            r = x[axis];
            break;
        case FitnessType::custom:
            r = custom_eval(x);
            break;
    }
    if (!std::isfinite(r)) throw std::domain_error("fitness: non-finite value");
    return r;
}

double fitness(const FitnessFunction& f, std::span<const double> x) { return f(x); }

// --- branching kernel ------------------------------------------------------

namespace {

double normal_cdf(double t) { return 0.5 * std::erfc(-t * M_SQRT1_2); }

}  // namespace

BranchingKernel BranchingKernel::gaussian_isotropic(std::size_t dimension, double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("gaussian kernel: sigma must be positive");
    BranchingKernel k;
    k.type = KernelType::gaussian;
    k.dimension = dimension;
    k.sigma = sigma;
    k.dominating_constant = 1.0;
    return k;
}

BranchingKernel BranchingKernel::uniform_displacement(std::size_t dimension) {
    BranchingKernel k;
    k.type = KernelType::uniform_cube;
    k.dimension = dimension;
    k.dominating_constant = 1.0;
    return k;
}

double BranchingKernel::density(std::span<const double> y, std::span<const double> x) const {
    for (double v : y)
        if (!std::isfinite(v)) throw std::domain_error("kernel density: non-finite input");
    for (double v : x)
        if (!std::isfinite(v)) throw std::domain_error("kernel density: non-finite input");
    if (y.size() != dimension || x.size() != dimension)
        throw std::invalid_argument("kernel density: dimension mismatch");
    switch (type) {
        case KernelType::gaussian: {
            double q = 0.0;
            for (std::size_t k = 0; k < dimension; ++k) {
                double dv = (x[k] - y[k]) / sigma;
                q += dv * dv;
            }
            double norm = std::pow(2.0 * M_PI * sigma * sigma, -0.5 * double(dimension));
            return norm * std::exp(-0.5 * q);
        }
        case KernelType::uniform_cube: {
            for (std::size_t k = 0; k < dimension; ++k) {
                double dv = x[k] - y[k];
                if (dv < 0.0 || dv > 1.0) return 0.0;
            }
            return 1.0;
        }
        case KernelType::custom: {
            double r = custom_density(y, x);
            if (!(r >= 0.0) || !std::isfinite(r))
                throw std::domain_error("kernel density: negative or non-finite value");
            return r;
        }
    }
    return 0.0;
}

Point BranchingKernel::sample(std::span<const double> y, RandomStream& rng) const {
    if (y.size() != dimension) throw std::invalid_argument("kernel sample: dimension mismatch");
    Point x(dimension);
    switch (type) {
        case KernelType::gaussian:
            for (std::size_t k = 0; k < dimension; ++k) x[k] = y[k] + sigma * rng.normal();
            break;
        case KernelType::uniform_cube:
            for (std::size_t k = 0; k < dimension; ++k) x[k] = y[k] + rng.uniform();
            break;
        case KernelType::custom:
            x = custom_sampler(y, rng);
            if (x.size() != dimension)
                throw std::domain_error("kernel sample: sampler dimension mismatch");
            break;
    }
    return x;
}

double BranchingKernel::profile(std::span<const double> v) const {
    switch (type) {
        case KernelType::gaussian: {
            double q = 0.0;
            for (double c : v) q += (c / sigma) * (c / sigma);
            return std::pow(2.0 * M_PI * sigma * sigma, -0.5 * double(dimension)) *
                   std::exp(-0.5 * q);
        }
        case KernelType::uniform_cube: {
            for (double c : v)
                if (c < 0.0 || c > 1.0) return 0.0;
            return 1.0;
        }
        case KernelType::custom:
            return custom_profile ? custom_profile(v) : 0.0;
    }
    return 0.0;
}

double BranchingKernel::axis_cdf(double t) const {
    switch (type) {
        case KernelType::gaussian:
            return normal_cdf(t / sigma);
        case KernelType::uniform_cube:
            return std::clamp(t, 0.0, 1.0);
        case KernelType::custom:
            throw std::logic_error("axis_cdf: custom kernels are not separable");
    }
    return 0.0;
}

Box BranchingKernel::support_box(std::span<const double> y) const {
    Box b;
    b.lo.resize(dimension);
    b.hi.resize(dimension);
    for (std::size_t k = 0; k < dimension; ++k) {
        switch (type) {
            case KernelType::gaussian:
                b.lo[k] = y[k] - 10.0 * sigma;
                b.hi[k] = y[k] + 10.0 * sigma;
                break;
            case KernelType::uniform_cube:
                b.lo[k] = y[k];
                b.hi[k] = y[k] + 1.0;
                break;
            case KernelType::custom:
                throw std::logic_error("support_box: unknown for custom kernels");
        }
    }
    return b;
}

double kernel_density(const BranchingKernel& k, std::span<const double> y,
                      std::span<const double> x) {
    return k.density(y, x);
}

Point kernel_sample(const BranchingKernel& k, std::span<const double> y, RandomStream& rng) {
    return k.sample(y, rng);
}

// --- initial condition -----------------------------------------------------

InitialCondition InitialCondition::uniform(Box support, double lambda0) {
    if (support.empty()) throw std::invalid_argument("initial condition: empty support box");
    InitialCondition ic;
    ic.type = InitialType::uniform_box;
    ic.support = std::move(support);
    ic.lambda0 = lambda0;
    return ic;
}

InitialCondition InitialCondition::tabulated(Box window, std::vector<std::size_t> resolution,
                                             std::vector<double> values, double lambda0) {
    if (window.empty()) throw std::invalid_argument("initial condition: empty window");
    std::size_t cells = 1;
    for (std::size_t n : resolution) cells *= n;
    if (cells == 0 || values.size() != cells)
        throw std::invalid_argument("initial condition: resolution/value size mismatch");
    for (double v : values)
        if (!(v >= 0.0)) throw std::invalid_argument("initial condition: negative density");
    InitialCondition ic;
    ic.type = InitialType::tabulated;
    ic.tab_window = std::move(window);
    ic.tab_resolution = std::move(resolution);
    ic.tab_values = std::move(values);
    ic.lambda0 = lambda0;
    ic.build_tab_cdf();
    return ic;
}

void InitialCondition::build_tab_cdf() {
    const std::size_t d = tab_window.dimension();
    double cell_vol = 1.0;
    for (std::size_t k = 0; k < d; ++k)
        cell_vol *= (tab_window.hi[k] - tab_window.lo[k]) / double(tab_resolution[k]);
    tab_cdf_.resize(tab_values.size());
    double acc = 0.0;
    for (std::size_t c = 0; c < tab_values.size(); ++c) {
        acc += tab_values[c] * cell_vol;
        tab_cdf_[c] = acc;
    }
    if (!(acc > 0.0)) throw std::invalid_argument("initial condition: zero total mass");
}

double InitialCondition::density(std::span<const double> x) const {
    if (type == InitialType::uniform_box) {
        return support.contains(x) ? 1.0 / support.volume() : 0.0;
    }
    const std::size_t d = tab_window.dimension();
    if (!tab_window.contains(x)) return 0.0;
    std::size_t cell = 0;
    for (std::size_t k = 0; k < d; ++k) {
        double h = (tab_window.hi[k] - tab_window.lo[k]) / double(tab_resolution[k]);
        auto i = static_cast<std::size_t>(
            std::min<double>(double(tab_resolution[k]) - 1.0, (x[k] - tab_window.lo[k]) / h));
        cell = cell * tab_resolution[k] + i;
    }
    return tab_values[cell];
}

Point InitialCondition::sample(RandomStream& rng) const {
    if (type == InitialType::uniform_box) {
        const std::size_t d = support.dimension();
        Point x(d);
        for (std::size_t k = 0; k < d; ++k) x[k] = rng.uniform(support.lo[k], support.hi[k]);
        return x;
    }
    // Pick a cell by cumulative mass, then a uniform location inside it.
    double u = rng.uniform() * tab_cdf_.back();
    auto it = std::upper_bound(tab_cdf_.begin(), tab_cdf_.end(), u);
    std::size_t cell = std::min<std::size_t>(tab_cdf_.size() - 1,
                                             std::size_t(it - tab_cdf_.begin()));
    const std::size_t d = tab_window.dimension();
    Point x(d);
    std::size_t rem = cell;
    for (std::size_t k = d; k-- > 0;) {
        std::size_t i = rem % tab_resolution[k];
        rem /= tab_resolution[k];
        double h = (tab_window.hi[k] - tab_window.lo[k]) / double(tab_resolution[k]);
        x[k] = tab_window.lo[k] + (double(i) + rng.uniform()) * h;
    }
    return x;
}

// --- tie order ---------------------------------------------------------------

int TieOrder::compare(std::span<const double> a, std::uint32_t label_a,
                      std::span<const double> b, std::uint32_t label_b) const {
    int c = lex_compare(a, b);
    if (c != 0) return c;
    if (label_a < label_b) return -1;
    if (label_a > label_b) return 1;
    return 0;
}

int tie_compare(const TieOrder& order, std::span<const double> a, std::uint32_t label_a,
                std::span<const double> b, std::uint32_t label_b) {
    return order.compare(a, label_a, b, label_b);
}

// --- validation --------------------------------------------------------------

namespace {

// Composite Simpson over a box, tensorized; nodes per axis is odd.
double simpson_box(const Box& box, std::size_t nodes_per_axis,
                   const std::function<double(std::span<const double>)>& f) {
    const std::size_t d = box.dimension();
    std::size_t n = nodes_per_axis | 1;  // force odd
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = (i == 0 || i == n - 1) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    std::vector<double> h(d);
    for (std::size_t k = 0; k < d; ++k) h[k] = (box.hi[k] - box.lo[k]) / double(n - 1);

    std::vector<std::size_t> idx(d, 0);
    Point x(d);
    double sum = 0.0;
    while (true) {
        double weight = 1.0;
        for (std::size_t k = 0; k < d; ++k) {
            x[k] = box.lo[k] + double(idx[k]) * h[k];
            weight *= w[idx[k]] * h[k] / 3.0;
        }
        sum += weight * f(x);
        std::size_t k = 0;
        for (; k < d; ++k) {
            if (++idx[k] < n) break;
            idx[k] = 0;
        }
        if (k == d) break;
    }
    return sum;
}

std::size_t quadrature_nodes(std::size_t d) {
    if (d <= 1) return 1025;
    if (d == 2) return 257;
    return 65;
}

std::string format_double(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

}  // namespace

bool ValidationReport::all_passed() const {
    return std::all_of(clauses.begin(), clauses.end(),
                       [](const ValidationClause& c) { return c.informational || c.pass; });
}

const ValidationClause* ValidationReport::find(const std::string& name) const {
    for (const auto& c : clauses)
        if (c.name == name) return &c;
    return nullptr;
}

ValidationReport validate_model(const ModelSpec& spec, const Box& window, std::size_t samples,
                                const ValidationOptions& options) {
    if (window.empty()) throw std::invalid_argument("validate_model: empty window");
    if (samples < 1) throw std::invalid_argument("validate_model: samples must be >= 1");
    if (window.dimension() != spec.dimension)
        throw std::invalid_argument("validate_model: window dimension mismatch");

    ValidationReport report;
    RandomStream rng = seed_stream(0x5eedULL, 0xc0deULL);
    const std::size_t d = spec.dimension;

    auto sample_window_point = [&](RandomStream& r) {
        Point y(d);
        for (std::size_t k = 0; k < d; ++k) y[k] = r.uniform(window.lo[k], window.hi[k]);
        return y;
    };

    // Kernel normalization: |int rho(y, .) dx - 1| by quadrature at probed y.
    {
        ValidationClause c;
        c.name = "kernel_normalization";
        const std::size_t probes = std::min<std::size_t>(samples, 16);
        double worst = 0.0;
        bool ok = true;
        try {
            for (std::size_t p = 0; p < probes; ++p) {
                Point y = sample_window_point(rng);
                Box domain = spec.kernel.type == KernelType::custom ? window
                                                                    : spec.kernel.support_box(y);
                double mass = simpson_box(domain, quadrature_nodes(d),
                                          [&](std::span<const double> x) {
                                              return spec.kernel.density(y, x);
                                          });
                worst = std::max(worst, std::abs(mass - 1.0));
            }
        } catch (const std::exception& e) {
            ok = false;
            c.detail = e.what();
        }
        c.slack = worst;
        c.pass = ok && worst < options.quadrature_tol;
        if (c.detail.empty())
            c.detail = "max |quadrature mass - 1| over " + std::to_string(probes) +
                       " probe points: " + format_double(worst);
        report.clauses.push_back(std::move(c));
    }

    // Domination rho(y,x) <= c~ rho~(x-y) on sampled pairs.
    {
        ValidationClause c;
        c.name = "kernel_domination";
        double worst = 0.0;
        bool ok = true;
        try {
            for (std::size_t s = 0; s < samples; ++s) {
                Point y = sample_window_point(rng);
                Point x = (s % 2 == 0) ? spec.kernel.sample(y, rng) : sample_window_point(rng);
                Point v(d);
                for (std::size_t k = 0; k < d; ++k) v[k] = x[k] - y[k];
                double lhs = spec.kernel.density(y, x);
                double rhs = spec.kernel.dominating_constant * spec.kernel.profile(v);
                worst = std::max(worst, lhs - rhs);
            }
        } catch (const std::exception& e) {
            ok = false;
            c.detail = e.what();
        }
        c.slack = worst;
        c.pass = ok && worst <= 1e-12;
        if (c.detail.empty()) c.detail = "max(density - c~ profile) = " + format_double(worst);
        report.clauses.push_back(std::move(c));
    }

    // Upward mass: from y with F(y) > a, the kernel must place mass above level a.
    {
        ValidationClause c;
        c.name = "kernel_upward_mass";
        double worst_fraction = 1.0;
        try {
            const std::size_t draws = 256;
            std::size_t probed = 0;
            for (std::size_t s = 0; s < std::min<std::size_t>(samples, 32); ++s) {
                Point y = sample_window_point(rng);
                double a = spec.fitness(y) - 1e-9;
                std::size_t above = 0;
                for (std::size_t i = 0; i < draws; ++i) {
                    Point x = spec.kernel.sample(y, rng);
                    if (spec.fitness(x) > a) ++above;
                }
                worst_fraction = std::min(worst_fraction, double(above) / double(draws));
                ++probed;
            }
            c.pass = probed > 0 && worst_fraction > 0.0;
        } catch (const std::exception& e) {
            c.pass = false;
            c.detail = e.what();
        }
        c.slack = worst_fraction;
        if (c.detail.empty())
            c.detail = "min fraction of offspring above the parent level: " +
                       format_double(worst_fraction);
        report.clauses.push_back(std::move(c));
    }

    // Initial mass: int u0 = 1.
    {
        ValidationClause c;
        c.name = "initial_mass";
        Box domain = spec.initial.type == InitialType::uniform_box ? spec.initial.support
                                                                   : spec.initial.tab_window;
        double mass = simpson_box(domain, quadrature_nodes(d), [&](std::span<const double> x) {
            return spec.initial.density(x);
        });
        c.slack = std::abs(mass - 1.0);
        c.pass = c.slack < options.quadrature_tol;
        c.detail = "|mass - 1| = " + format_double(c.slack);
        report.clauses.push_back(std::move(c));
    }

    // u0 vanishes on {F < lambda0} and is nonnegative: sampled on the window.
    {
        ValidationClause c;
        c.name = "initial_support";
        double worst = 0.0;
        bool nonneg = true;
        for (std::size_t s = 0; s < samples; ++s) {
            Point x = sample_window_point(rng);
            double u = spec.initial.density(x);
            if (u < 0.0) nonneg = false;
            if (spec.fitness(x) < spec.initial.lambda0 - 1e-12 && u > 0.0)
                worst = std::max(worst, u);
        }
        c.slack = worst;
        c.pass = nonneg && worst == 0.0;
        c.detail = nonneg ? "max u0 below lambda0 over samples: " + format_double(worst)
                          : "negative density sampled";
        report.clauses.push_back(std::move(c));
    }

    // Shell positivity: int_{F in (lambda, lambda+delta)} u0 > 0 on the ladder.
    {
        ValidationClause c;
        c.name = "initial_shell_positivity";
        Box domain = spec.initial.type == InitialType::uniform_box ? spec.initial.support
                                                                   : spec.initial.tab_window;
        // Default ladder: within the F-range of the initial support.
        std::vector<double> ladder = options.level_ladder;
        std::vector<double> widths = options.shell_widths;
        if (ladder.empty() || widths.empty()) {
            double fmax = -std::numeric_limits<double>::infinity();
            RandomStream probe = seed_stream(0x5eedULL, 0xfaceULL);
            for (std::size_t s = 0; s < 512; ++s) {
                Point x = spec.initial.sample(probe);
                fmax = std::max(fmax, spec.fitness(x));
            }
            double range = std::max(1e-6, fmax - spec.initial.lambda0);
            if (ladder.empty())
                ladder = {spec.initial.lambda0, spec.initial.lambda0 + 0.25 * range,
                          spec.initial.lambda0 + 0.5 * range};
            if (widths.empty()) widths = {0.2 * range};
        }
        double min_mass = std::numeric_limits<double>::infinity();
        for (double lambda : ladder) {
            for (double delta : widths) {
                double m = simpson_box(domain, quadrature_nodes(d),
                                       [&](std::span<const double> x) {
                                           double fv = spec.fitness(x);
                                           return (fv > lambda && fv < lambda + delta)
                                                      ? spec.initial.density(x)
                                                      : 0.0;
                                       });
                min_mass = std::min(min_mass, m);
            }
        }
        c.slack = min_mass;
        c.pass = min_mass > 0.0;
        c.detail = "min shell mass over ladder: " + format_double(min_mass);
        report.clauses.push_back(std::move(c));
    }

    // Tie order laws on random triples.
    {
        ValidationClause c;
        c.name = "tie_order_total";
        bool ok = true;
        for (std::size_t s = 0; s < samples && ok; ++s) {
            Point a = sample_window_point(rng), b = sample_window_point(rng),
                  cpt = sample_window_point(rng);
            auto la = std::uint32_t(rng.uniform_index(8)), lb = std::uint32_t(rng.uniform_index(8)),
                 lc = std::uint32_t(rng.uniform_index(8));
            int ab = spec.order.compare(a, la, b, lb);
            int ba = spec.order.compare(b, lb, a, la);
            int bc = spec.order.compare(b, lb, cpt, lc);
            int ac = spec.order.compare(a, la, cpt, lc);
            if (ab != -ba) ok = false;                       // antisymmetry
            if (ab < 0 && bc < 0 && !(ac < 0)) ok = false;   // transitivity
            if (ab == 0 && !(a == b && la == lb)) ok = false;  // equality only when identical
        }
        c.pass = ok;
        c.detail = ok ? "antisymmetric, transitive, total on sampled triples" : "order law violated";
        report.clauses.push_back(std::move(c));
    }

    // Continuity modulus of rho(y, .) on built-ins: informational only.
    {
        ValidationClause c;
        c.name = "kernel_continuity_modulus";
        c.informational = true;
        double modulus = 0.0;
        if (spec.kernel.type != KernelType::custom) {
            const double h = 1e-3;
            for (std::size_t s = 0; s < std::min<std::size_t>(samples, 128); ++s) {
                Point y = sample_window_point(rng);
                Point x = spec.kernel.sample(y, rng);
                for (std::size_t k = 0; k < d; ++k) {
                    Point xs = x;
                    xs[k] += h;
                    modulus = std::max(modulus, std::abs(spec.kernel.density(y, xs) -
                                                         spec.kernel.density(y, x)));
                }
            }
        }
        c.pass = true;
        c.slack = modulus;
        c.detail = "sampled |rho(y,x+h)-rho(y,x)| at h=1e-3: " + format_double(modulus);
        report.clauses.push_back(std::move(c));
    }

    return report;
}

}  // namespace fbp
