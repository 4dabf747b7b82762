#pragma once

// The separator autoencoder.
//
// Encoder: for each qubit X in {A, B, C} and each channel i, a 4x4 kernel is
// contracted with the real part of rho and a second one with the imaginary
// part, over the index pattern that isolates qubit X. With an identity kernel
// this is exactly the partial trace onto X. The n_k extracted 2x2 complex
// matrices of a qubit are flattened (length 8 n_k) and passed through that
// qubit's own stack of shape-preserving fully connected layers.
//
// Decoder: rho_hat = (1/N) sum_i F_Ai (x) F_Bi (x) F_Ci with N the real trace
// of the sum, so any output is a sum of product operators.
//
// Loss: (1/64) sum_ij |rho_ij - rho_hat_ij|.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qsep/linalg.hpp"
#include "qsep/states.hpp"

namespace qsep {

enum class Activation { Relu, Tanh };
enum class Qubit : unsigned { A = 0, B = 1, C = 2 };
enum class Part : unsigned { Re = 0, Im = 1 };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct SeparatorConfig {
    int n_k = 24;
    bool use_fc = true;
    int fc_depth = 4;
    bool tie_weights = true;
    Activation activation = Activation::Relu;

    int width() const { return 8 * n_k; }
    int paths() const { return tie_weights ? 1 : 3; }
    int path_of(Qubit q) const { return tie_weights ? 0 : static_cast<int>(q); }
    /// Throws std::invalid_argument when n_k < 1 or fc_depth < 1.
    void validate() const;

    bool operator==(const SeparatorConfig&) const = default;
};

using Kernel = std::array<double, 16>;  // row-major 4x4
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// All trainable weights stored in one flat buffer; the same type doubles as
/// the container for gradients and optimizer moments.
class SeparatorParams {
public:
    explicit SeparatorParams(SeparatorConfig config);

    /// Kernels I + U[-0.05, 0.05]; FC layers start near identity with zero
    /// bias (noise U[-1, 1] * kernel_noise / sqrt(width)).
    static SeparatorParams initialized(SeparatorConfig config, Rng& rng, double kernel_noise = 0.05);
    /// Identity kernels, identity FC weights, zero bias. Without FC layers this
    /// reproduces the marginals exactly; activations distort them otherwise.
    static SeparatorParams identity(SeparatorConfig config);

    const SeparatorConfig& config() const noexcept { return config_; }

    std::span<double> kernel(int path, int channel, Part part);
    std::span<const double> kernel(int path, int channel, Part part) const;

    Eigen::Map<RowMatrix> fc_weight(int path, int layer);
    Eigen::Map<const RowMatrix> fc_weight(int path, int layer) const;
    Eigen::Map<Eigen::VectorXd> fc_bias(int path, int layer);
    Eigen::Map<const Eigen::VectorXd> fc_bias(int path, int layer) const;

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }
    std::size_t size() const noexcept { return values_.size(); }
    std::size_t kernel_count() const noexcept { return fc_offset_; }

    void set_zero();
    bool all_finite() const;

private:
    std::size_t kernel_offset(int path, int channel, Part part) const;
    std::size_t weight_offset(int path, int layer) const;

    SeparatorConfig config_;
    std::size_t fc_offset_ = 0;
    // fixed alignment keeps Eigen's vectorized summation order, and thus
    // results, identical from run to run
    std::vector<double, Eigen::aligned_allocator<double>> values_;
};

struct Factor2 {
    std::array<cdouble, 4> m{};  // row-major 2x2
    CMatrix matrix() const { return CMatrix(2, {m[0], m[1], m[2], m[3]}); }
};

struct Reconstruction {
    CMatrix rho_hat;
    /// factors[i][X] is the 2x2 output for channel i and qubit X.
    std::vector<std::array<Factor2, 3>> per_qubit_factors;
    double loss = 0.0;
};

/// Index of the rho row/column touched by output index i (0..1) and kernel
/// index k (0..3) when isolating `qubit`.
std::size_t extraction_index(Qubit qubit, std::size_t i, std::size_t k);

/// out[i][j] = sum_{k,q} K[k][q] X[r(i,k)][r(j,q)] with X = Re or Im of rho.
std::array<double, 4> extract_qubit(const CMatrix& rho, Qubit qubit, std::span<const double> kernel, Part part);

/// Kernel actually applied for a path: with tied weights the stored kernel is
/// symmetrized under exchange of the two traced qubits, which makes the
/// model exactly equivariant under every qubit permutation.
Kernel effective_kernel(const SeparatorConfig& config, std::span<const double> stored);

/// The FC stack of one path; throws std::invalid_argument on a length mismatch.
Eigen::VectorXd fc_forward(const Eigen::VectorXd& features, int path, const SeparatorParams& params);

/// Normalized Kronecker sum of per-channel factor triples.
CMatrix decode(std::span<const std::array<Factor2, 3>> factors);

double reconstruction_loss(const CMatrix& rho, const CMatrix& rho_hat);

Reconstruction forward(const CMatrix& rho, const SeparatorParams& params);

/// rho_A (x) rho_B (x) rho_C from the single-qubit reductions.
Reconstruction baseline_forward(const CMatrix& rho);

struct LossAndGradient {
    double mean_loss = 0.0;
    SeparatorParams gradient;
};

/// Mean loss over the batch and its gradient with respect to every weight.
/// Subgradient 0 is used at |0| and at the ReLU kink. Samples are processed
/// in fixed-size chunks whose partial sums are reduced in order, so the
/// result does not depend on the thread count.
LossAndGradient loss_and_gradient(const SeparatorParams& params, std::span<const CMatrix> batch,
                                  unsigned threads = 1);

SeparatorParams gradient(const SeparatorParams& params, std::span<const CMatrix> batch, unsigned threads = 1);

/// Per-sample losses for many states (forward only, chunked).
std::vector<double> batch_losses(const SeparatorParams& params, std::span<const CMatrix> states, unsigned threads = 1);

// ---------------------------------------------------------------------------
// Checkpoints

struct TrainingMeta {
    int epoch = 0;
    double val_loss = 0.0;
    std::uint64_t seed = 0;
};

struct Checkpoint {
    SeparatorParams params;
    TrainingMeta meta;
};

inline constexpr int kCheckpointFormatVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const SeparatorParams& params, const TrainingMeta& meta);
/// Throws FormatError on malformed content.
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string checkpoint_json(const SeparatorParams& params, const TrainingMeta& meta);
Checkpoint checkpoint_from_json(const std::string& text);

/// CSV with one 4x4 block per (path, channel, part).
void export_kernels_csv(const std::filesystem::path& path, const SeparatorParams& params);

/// mean over kernels of |K - c I| after the least-squares scale c per kernel.
double kernel_identity_deviation(const SeparatorParams& params);

}  // namespace qsep
