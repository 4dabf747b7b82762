#pragma once

// Loss-threshold classification, metric sweeps and the 2D state map.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qsep/dataset.hpp"
#include "qsep/separator.hpp"

namespace qsep {

/// Anything that scores a state by reconstruction loss.
class LossModel {
public:
    virtual ~LossModel() = default;
    virtual std::string name() const = 0;
    virtual std::vector<double> losses(std::span<const CMatrix> states, unsigned threads = 1) const = 0;
    double loss(const CMatrix& rho) const { return losses(std::span(&rho, 1))[0]; }
};

class SeparatorModel : public LossModel {
public:
    explicit SeparatorModel(SeparatorParams params) : params_(std::move(params)) {}
    std::string name() const override { return "separator"; }
    std::vector<double> losses(std::span<const CMatrix> states, unsigned threads = 1) const override;
    const SeparatorParams& params() const { return params_; }

private:
    SeparatorParams params_;
};

/// Reconstructs every state as the product of its single-qubit marginals.
class BaselineModel : public LossModel {
public:
    std::string name() const override { return "baseline"; }
    std::vector<double> losses(std::span<const CMatrix> states, unsigned threads = 1) const override;
};

/// Which states count as positive: entangled ones, or all discordant ones
/// (discordant separable plus entangled).
enum class LabelMode { Entanglement, Discord };
std::string to_string(LabelMode m);
std::optional<LabelMode> label_mode_from_string(std::string_view s);
bool is_positive(const StateLabel& label, LabelMode mode);

struct Confusion {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

    std::size_t total() const { return tp + fp + tn + fn; }
    double accuracy() const;
    /// 1 when nothing is predicted positive.
    double precision() const;
    double recall() const;
    double specificity() const;
    double balanced_accuracy() const { return 0.5 * (recall() + specificity()); }
};

/// A state is predicted positive when its loss exceeds tau.
Confusion confusion_at(std::span<const double> losses, std::span<const StateLabel> labels, LabelMode mode, double tau);

struct SweepPoint {
    double tau = 0.0;
    Confusion confusion;
};

/// n log-spaced thresholds from lo to hi inclusive.
std::vector<double> log_thresholds(std::size_t n = 400, double lo = 1e-5, double hi = 1.0);

/// Throws std::invalid_argument if the labels contain only one class under
/// `mode` or the sizes differ.
std::vector<SweepPoint> sweep(std::span<const double> losses, std::span<const StateLabel> labels, LabelMode mode,
                              std::span<const double> taus);

enum class Metric { Accuracy, BalancedAccuracy, Precision, Recall };
double metric_value(const Confusion& c, Metric m);
/// Index of the first sweep point attaining the maximum of `m`.
std::size_t best_index(std::span<const SweepPoint> points, Metric m);

/// Columns: tau, tp, fp, tn, fn, pr, rc, ba, accuracy.
void write_sweep_csv(const std::filesystem::path& path, std::span<const SweepPoint> points,
                     const std::string& comment = {});

struct GroupStat {
    std::size_t count = 0;
    double sum = 0.0;
    void add(double x) { sum += x, ++count; }
    /// Absent for an empty group.
    std::optional<double> mean() const;
};

/// Mean loss per group of states.
struct ClassMeans {
    GroupStat product;
    GroupStat non_discordant;  // product or non-product zero discord
    GroupStat separable;       // every separable state
    GroupStat discordant;      // discordant separable or entangled
    GroupStat discordant_separable;
    GroupStat entangled;
    GroupStat pure_separable;  // purity > 1 - 1e-9
    GroupStat pure_entangled;
};
ClassMeans class_means(std::span<const double> losses, std::span<const CMatrix> states,
                       std::span<const StateLabel> labels);
/// Columns: class, count, mean_loss (empty for an absent group).
void write_class_means_csv(const std::filesystem::path& path, const ClassMeans& means, const std::string& comment = {});

// ---------------------------------------------------------------------------
// 2D map

struct MapCell {
    double u = 0.0;
    double v = 0.0;
    double loss = 0.0;
    StateClass klass = StateClass::Product;
};

/// grid_n x grid_n cells over [0, 2]^2; cells[iv * n + iu] holds
/// u = 2 iu / (n - 1), v = 2 iv / (n - 1).
struct MapGrid {
    int n = 0;
    std::vector<MapCell> cells;
    const MapCell& at(int iu, int iv) const { return cells[static_cast<std::size_t>(iv) * n + iu]; }
};

/// Throws std::invalid_argument for grid_n < 11.
MapGrid render_map(const LossModel& model, int grid_n, unsigned threads = 1);

/// Optional `comment` is written first as a '#' line.
void write_map_csv(const std::filesystem::path& path, const MapGrid& grid, const std::string& comment = {});
/// Plain PGM of the min-max normalized loss; the top row is v = 2.
void write_map_pgm(const std::filesystem::path& path, const MapGrid& grid, const std::string& comment = {});

/// Intersection over union of {loss < tau} with the oracle non-discordant cells.
double map_iou(const MapGrid& grid, double tau);
/// Number of distinct oracle classes on the grid.
int map_class_count(const MapGrid& grid);

/// FNV-1a 64-bit digest, printed as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);

}  // namespace qsep
