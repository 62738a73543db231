#include "fbp/kernel_op.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "fbp/io.hpp"

namespace fbp {

namespace {

constexpr char kCacheMagic[8] = {'F', 'B', 'P', 'K', '1', 0, 0, 0};

// Per-axis support interval of the displacement distribution.
void axis_support(const BranchingKernel& kernel, double& lo, double& hi) {
    switch (kernel.type) {
        case KernelType::gaussian:
            lo = -10.0 * kernel.sigma;
            hi = 10.0 * kernel.sigma;
            return;
        case KernelType::uniform_cube:
            lo = 0.0;
            hi = 1.0;
            return;
        case KernelType::custom:
            throw std::logic_error("axis_support: custom kernel");
    }
}

template <bool Parallel>
void convolve_axis(const std::vector<double>& src, std::vector<double>& dst,
                   std::size_t n, std::size_t stride, long omin,
                   const std::vector<double>& w) {
    const long ntaps = long(w.size());
    const long cells = long(src.size());
#pragma omp parallel for schedule(static) if (Parallel)
    for (long c = 0; c < cells; ++c) {
        const long i = (c / long(stride)) % long(n);
        const long base = c - i * long(stride);
        // target - source = o in [omin, omin + ntaps); source index j = i - o
        long jmin = i - (omin + ntaps - 1);
        long jmax = i - omin;
        if (jmin < 0) jmin = 0;
        if (jmax > long(n) - 1) jmax = long(n) - 1;
        double acc = 0.0;
        for (long j = jmin; j <= jmax; ++j)
            acc += w[std::size_t(i - j - omin)] * src[std::size_t(base + j * long(stride))];
        dst[std::size_t(c)] = acc;
    }
}

template <bool Parallel>
void apply_dense(const std::vector<double>& mat, const std::vector<double>& src,
                 std::vector<double>& dst) {
    const long cells = long(src.size());
#pragma omp parallel for schedule(static) if (Parallel)
    for (long c = 0; c < cells; ++c) {
        const double* row = mat.data() + std::size_t(c) * std::size_t(cells);
        double acc = 0.0;
        for (long s = 0; s < cells; ++s) acc += row[std::size_t(s)] * src[std::size_t(s)];
        dst[std::size_t(c)] = acc;
    }
}

template <bool Parallel>
void apply_impl(const KernelOperator& op, const DensityField& in, DensityField& out,
                std::vector<double>* scratch) {
    if (in.values.size() != op.cells) throw std::invalid_argument("apply_kernel: grid mismatch");
    out.values.resize(op.cells);
    out.time = in.time;
    if (op.repr == KernelOperator::Repr::dense) {
        apply_dense<Parallel>(op.dense, in.values, out.values);
        return;
    }
    const std::size_t d = op.resolution.size();
    std::vector<double> local;
    std::vector<double>* tmp = scratch ? scratch : &local;
    tmp->resize(op.cells);

    // Axis-by-axis sweep; strides follow row-major layout (last axis fastest).
    const std::vector<double>* src = &in.values;
    std::vector<double>* dst = (d % 2 == 1) ? &out.values : tmp;
    std::size_t stride = 1;
    for (std::size_t k = d; k-- > 0;) {
        convolve_axis<Parallel>(*src, *dst, op.resolution[k], stride, op.axes[k].offset_min,
                                op.axes[k].weights);
        stride *= op.resolution[k];
        src = dst;
        dst = (dst == &out.values) ? tmp : &out.values;
    }
    // After d sweeps the result sits in out.values by the parity choice above.
}

}  // namespace

void KernelOperator::apply(const DensityField& in, DensityField& out,
                           std::vector<double>* scratch) const {
    apply_impl<true>(*this, in, out, scratch);
}

void KernelOperator::apply_serial(const DensityField& in, DensityField& out,
                                  std::vector<double>* scratch) const {
    apply_impl<false>(*this, in, out, scratch);
}

double KernelOperator::leaked_mass(const Grid& grid, const DensityField& u) const {
    double lost = 0.0;
    for (std::size_t c = 0; c < cells; ++c)
        lost += u.values[c] * (1.0 - source_retention[c]);
    return lost * grid.cell_volume;
}

std::uint64_t kernel_hash(const BranchingKernel& kernel) {
    Fnv64 h;
    h.add(std::uint64_t(kernel.type));
    h.add(std::uint64_t(kernel.dimension));
    h.add(kernel.sigma);
    h.add(kernel.dominating_constant);
    return h.value();
}

KernelOperator build_kernel(const Grid& grid, const BranchingKernel& kernel,
                            const KernelBuildOptions& options) {
    if (kernel.dimension != grid.dimension())
        throw std::invalid_argument("build_kernel: kernel/grid dimension mismatch");

    const std::uint64_t ghash = grid.hash();
    const std::uint64_t khash = kernel_hash(kernel);
    if (options.cache_dir) {
        auto file = *options.cache_dir /
                    ("kernel_" + hex64(ghash) + "_" + hex64(khash) + ".bin");
        if (auto cached = load_kernel_cache(file, ghash, khash)) return std::move(*cached);
    }

    KernelOperator op;
    op.cells = grid.cell_count();
    op.resolution = grid.resolution;
    op.grid_hash = ghash;
    op.kernel_hash = khash;
    const std::size_t d = grid.dimension();

    if (kernel.separable()) {
        op.repr = KernelOperator::Repr::separable;
        op.axes.resize(d);
        for (std::size_t k = 0; k < d; ++k) {
            double lo, hi;
            axis_support(kernel, lo, hi);
            const double h = grid.spacing[k];
            long omin = long(std::floor(lo / h - 0.5));
            long omax = long(std::ceil(hi / h + 0.5));
            std::vector<double> w(std::size_t(omax - omin + 1));
            for (long o = omin; o <= omax; ++o)
                w[std::size_t(o - omin)] =
                    kernel.axis_cdf(h * (double(o) + 0.5)) - kernel.axis_cdf(h * (double(o) - 0.5));
            // Drop empty leading/trailing taps.
            std::size_t first = 0, last = w.size();
            while (first < last && w[first] == 0.0) ++first;
            while (last > first && w[last - 1] == 0.0) --last;
            op.axes[k].offset_min = omin + long(first);
            op.axes[k].weights.assign(w.begin() + long(first), w.begin() + long(last));
            if (op.axes[k].weights.empty()) {
                op.axes[k].offset_min = 0;
                op.axes[k].weights = {0.0};
            }
        }
        // Retention factors per axis: R[j] = sum_i w[i - j], i over in-window targets.
        op.source_retention.assign(op.cells, 1.0);
        std::size_t stride = 1;
        for (std::size_t k = d; k-- > 0;) {
            const std::size_t n = grid.resolution[k];
            const auto& ax = op.axes[k];
            std::vector<double> r(n, 0.0);
            for (std::size_t j = 0; j < n; ++j)
                for (std::size_t t = 0; t < ax.weights.size(); ++t) {
                    long i = long(j) + ax.offset_min + long(t);
                    if (i >= 0 && i < long(n)) r[j] += ax.weights[t];
                }
            for (std::size_t c = 0; c < op.cells; ++c) {
                std::size_t j = (c / stride) % n;
                op.source_retention[c] *= r[j];
            }
            stride *= n;
        }
    } else {
        if (op.cells > options.dense_cell_cap)
            throw std::invalid_argument(
                "build_kernel: custom kernels use a dense matrix; cell count " +
                std::to_string(op.cells) + " exceeds cap " +
                std::to_string(options.dense_cell_cap));
        op.repr = KernelOperator::Repr::dense;
        op.dense.resize(op.cells * op.cells);
        for (std::size_t t = 0; t < op.cells; ++t) {
            Point x = grid.cell_center(t);
            for (std::size_t s = 0; s < op.cells; ++s) {
                Point y = grid.cell_center(s);
                op.dense[t * op.cells + s] = kernel.density(y, x) * grid.cell_volume;
            }
        }
        op.source_retention.assign(op.cells, 0.0);
        for (std::size_t t = 0; t < op.cells; ++t)
            for (std::size_t s = 0; s < op.cells; ++s)
                op.source_retention[s] += op.dense[t * op.cells + s];
    }

    double min_retention = 1.0;
    std::size_t lossy = 0;
    for (double r : op.source_retention) {
        min_retention = std::min(min_retention, r);
        if (r < 0.5) ++lossy;
    }
    op.leakage_bound = std::max(0.0, 1.0 - min_retention);
    // Edge cells always lose part of their kernel mass; warn only when a
    // large fraction of the window does.
    const double lossy_fraction = double(lossy) / double(op.cells);
    if (lossy_fraction > options.leakage_warn_threshold)
        op.warning = "window too small for the kernel: " +
                     std::to_string(100.0 * lossy_fraction) +
                     "% of cells lose over half their offspring mass per application";

    if (options.cache_dir) {
        std::filesystem::create_directories(*options.cache_dir);
        auto file = *options.cache_dir /
                    ("kernel_" + hex64(ghash) + "_" + hex64(khash) + ".bin");
        save_kernel_cache(op, file);
    }
    return op;
}

void save_kernel_cache(const KernelOperator& op, const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw std::runtime_error("kernel cache: cannot write " + file.string());
    auto put_u64 = [&](std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); };
    auto put_vec = [&](const std::vector<double>& v) {
        put_u64(v.size());
        out.write(reinterpret_cast<const char*>(v.data()), std::streamsize(v.size() * 8));
    };
    out.write(kCacheMagic, 8);
    put_u64(op.grid_hash);
    put_u64(op.kernel_hash);
    put_u64(std::uint64_t(op.repr));
    put_u64(op.cells);
    put_u64(op.resolution.size());
    for (std::size_t n : op.resolution) put_u64(n);
    put_u64(op.axes.size());
    for (const auto& ax : op.axes) {
        put_u64(std::uint64_t(std::int64_t(ax.offset_min)));
        put_vec(ax.weights);
    }
    put_vec(op.dense);
    put_vec(op.source_retention);
    out.write(reinterpret_cast<const char*>(&op.leakage_bound), 8);
}

std::optional<KernelOperator> load_kernel_cache(const std::filesystem::path& file,
                                                std::uint64_t grid_hash,
                                                std::uint64_t kernel_hash) {
    std::ifstream in(file, std::ios::binary);
    if (!in) return std::nullopt;
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kCacheMagic, 8) != 0) return std::nullopt;
    auto get_u64 = [&]() {
        std::uint64_t v = 0;
        in.read(reinterpret_cast<char*>(&v), 8);
        return v;
    };
    auto get_vec = [&](std::vector<double>& v) {
        v.resize(get_u64());
        in.read(reinterpret_cast<char*>(v.data()), std::streamsize(v.size() * 8));
    };
    KernelOperator op;
    op.grid_hash = get_u64();
    op.kernel_hash = get_u64();
    if (op.grid_hash != grid_hash || op.kernel_hash != kernel_hash) return std::nullopt;
    op.repr = KernelOperator::Repr(get_u64());
    op.cells = get_u64();
    op.resolution.resize(get_u64());
    for (auto& n : op.resolution) n = get_u64();
    op.axes.resize(get_u64());
    for (auto& ax : op.axes) {
        ax.offset_min = long(std::int64_t(get_u64()));
        get_vec(ax.weights);
    }
    get_vec(op.dense);
    get_vec(op.source_retention);
    in.read(reinterpret_cast<char*>(&op.leakage_bound), 8);
    if (!in) return std::nullopt;
    return op;
}

DensityField apply_kernel(const KernelOperator& op, const Grid& grid, const DensityField& u) {
    if (u.values.size() != grid.cell_count())
        throw std::invalid_argument("apply_kernel: grid mismatch");
    DensityField out;
    op.apply(u, out);
    return out;
}

}  // namespace fbp
