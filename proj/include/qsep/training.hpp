#pragma once

// Mini-batch training of the separator on separable states.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "qsep/separator.hpp"

namespace qsep {

enum class Optimizer { Adam, Sgd };

struct TrainConfig {
    int epochs = 20;
    // larger batches or rates diverge or stall at the partial-trace solution
    int batch_size = 16;
    double learning_rate = 1e-4;
    Optimizer optimizer = Optimizer::Adam;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    /// Multiplier applied to the learning rate after every epoch.
    double lr_decay = 1.0;
    /// Gradients with a larger global L2 norm are rescaled to it; 0 disables.
    double grad_clip = 0.0;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    /// Written (atomically) whenever the validation loss improves.
    std::optional<std::filesystem::path> checkpoint;

    /// Throws std::invalid_argument on non-positive sizes or rates.
    void validate() const;
};

struct EpochStats {
    int epoch = 0;  // 0 is the untrained model
    double train_loss = 0.0;
    double val_loss = 0.0;
    double learning_rate = 0.0;
    double seconds = 0.0;
};

struct TrainReport {
    std::vector<EpochStats> history;
    int best_epoch = 0;
    double best_val_loss = 0.0;
    SeparatorParams best_params;
    SeparatorParams final_params;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Trains from `init`; the best-validation parameters are kept. Throws
/// DivergenceError on a non-finite loss or weight, std::invalid_argument on
/// an empty training set.
TrainReport train(SeparatorParams init, std::span<const CMatrix> train_set, std::span<const CMatrix> val_set,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Columns: epoch, train_loss, val_loss, learning_rate, seconds.
void write_history_csv(const std::filesystem::path& path, const std::vector<EpochStats>& history);

}  // namespace qsep
