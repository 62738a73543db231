#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fbp/grid.hpp"
#include "fbp/model.hpp"

namespace fbp {

/// Quadrature realization of u |-> int u(y) rho(y, x) dy on a grid.
///
/// Built-in (translation-invariant, separable) kernels use per-axis weights
/// obtained from exact CDF differences over the target cell, so the discrete
/// operator is mass-preserving up to window truncation only. Custom kernels
/// fall back to a dense midpoint-rule matrix.
///
/// Mass escaping the window ("leakage") is tracked per source cell; the
/// recorded bound is the worst-case fraction lost in one application.
struct KernelOperator {
    enum class Repr { dense, separable };

    struct AxisStencil {
        long offset_min = 0;
        std::vector<double> weights;  // weight for target_index - source_index = offset_min + i
    };

    Repr repr = Repr::separable;
    std::size_t cells = 0;
    std::vector<std::size_t> resolution;
    std::vector<AxisStencil> axes;        // separable
    std::vector<double> dense;            // dense, row-major [target * cells + source]
    std::vector<double> source_retention; // per source cell, in-window column sum
    double leakage_bound = 0.0;           // max over sources of (1 - retention)
    std::string warning;                  // set when the leakage bound looks excessive
    std::uint64_t grid_hash = 0;
    std::uint64_t kernel_hash = 0;

    /// OpenMP-parallel application (pure map over output cells).
    void apply(const DensityField& in, DensityField& out,
               std::vector<double>* scratch = nullptr) const;
    /// Serial reference implementation; bitwise-identical output to apply().
    void apply_serial(const DensityField& in, DensityField& out,
                      std::vector<double>* scratch = nullptr) const;

    /// Mass lost by one application to u, computed from the retention table.
    double leaked_mass(const Grid& grid, const DensityField& u) const;
};

struct KernelBuildOptions {
    std::size_t dense_cell_cap = 4096;       // guard against accidental huge matrices
    double leakage_warn_threshold = 0.5;     // warn when this fraction of cells is lossy
    std::optional<std::filesystem::path> cache_dir;  // binary cache keyed by (grid, kernel) hash
};

std::uint64_t kernel_hash(const BranchingKernel& kernel);

KernelOperator build_kernel(const Grid& grid, const BranchingKernel& kernel,
                            const KernelBuildOptions& options = {});

void save_kernel_cache(const KernelOperator& op, const std::filesystem::path& file);
std::optional<KernelOperator> load_kernel_cache(const std::filesystem::path& file,
                                                std::uint64_t grid_hash,
                                                std::uint64_t kernel_hash);

DensityField apply_kernel(const KernelOperator& op, const Grid& grid, const DensityField& u);

}  // namespace fbp
