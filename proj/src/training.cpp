#include "qsep/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "qsep/errors.hpp"

namespace qsep {

namespace {

class AdamState {
public:
    AdamState(const SeparatorConfig& cfg, const TrainConfig& tc) : m_(cfg), v_(cfg), tc_(tc) {}

    void step(SeparatorParams& params, const SeparatorParams& grad, double lr) {
        ++t_;
        auto p = params.values();
        const auto g = grad.values();
        auto m = m_.values();
        auto v = v_.values();
        const double c1 = 1.0 - std::pow(tc_.beta1, t_);
        const double c2 = 1.0 - std::pow(tc_.beta2, t_);
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = tc_.beta1 * m[i] + (1.0 - tc_.beta1) * g[i];
            v[i] = tc_.beta2 * v[i] + (1.0 - tc_.beta2) * g[i] * g[i];
            p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + tc_.epsilon);
        }
    }

private:
    SeparatorParams m_, v_;
    const TrainConfig& tc_;
    int t_ = 0;
};

double mean_loss(const SeparatorParams& params, std::span<const CMatrix> states, unsigned threads) {
    if (states.empty()) return std::numeric_limits<double>::quiet_NaN();
    const auto losses = batch_losses(params, states, threads);
    return std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(losses.size());
}

void clip_norm(SeparatorParams& grad, double max_norm) {
    double sq = 0.0;
    for (double g : grad.values()) sq += g * g;
    const double norm = std::sqrt(sq);
    if (norm > max_norm)
        for (auto& g : grad.values()) g *= max_norm / norm;
}

}  // namespace

void TrainConfig::validate() const {
    if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
    if (!(lr_decay > 0.0)) throw std::invalid_argument("lr decay must be positive");
    if (!(grad_clip >= 0.0)) throw std::invalid_argument("gradient clip must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw std::invalid_argument("betas must be in [0, 1)");
}

TrainReport train(SeparatorParams init, std::span<const CMatrix> train_set, std::span<const CMatrix> val_set,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
    config.validate();
    if (train_set.empty()) throw std::invalid_argument("train: empty training set");
    using clock = std::chrono::steady_clock;

    SeparatorParams params = std::move(init);
    AdamState adam(params.config(), config);
    Rng rng(config.seed ^ 0x5eed5eedULL);

    TrainReport report{{}, 0, 0.0, params, params};
    auto record = [&](EpochStats stats) {
        report.history.push_back(stats);
        if (on_epoch) on_epoch(stats);
    };

    const bool have_val = !val_set.empty();
    auto initial_start = clock::now();
    EpochStats initial;
    initial.train_loss = mean_loss(params, train_set, config.threads);
    initial.val_loss = have_val ? mean_loss(params, val_set, config.threads) : initial.train_loss;
    initial.learning_rate = config.learning_rate;
    initial.seconds = std::chrono::duration<double>(clock::now() - initial_start).count();
    if (!std::isfinite(initial.val_loss)) throw DivergenceError("non-finite loss for the initial model");
    report.best_val_loss = initial.val_loss;
    record(initial);

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<CMatrix> batch;
    double lr = config.learning_rate;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto start = clock::now();
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        for (std::size_t lo = 0; lo < order.size(); lo += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t hi = std::min(order.size(), lo + static_cast<std::size_t>(config.batch_size));
            batch.clear();
            for (std::size_t i = lo; i < hi; ++i) batch.push_back(train_set[order[i]]);
            auto lg = loss_and_gradient(params, batch, config.threads);
            if (!std::isfinite(lg.mean_loss) || !lg.gradient.all_finite())
                throw DivergenceError("non-finite loss or gradient in epoch " + std::to_string(epoch));
            loss_sum += lg.mean_loss * static_cast<double>(hi - lo);
            if (config.grad_clip > 0.0) clip_norm(lg.gradient, config.grad_clip);
            if (config.optimizer == Optimizer::Adam) {
                adam.step(params, lg.gradient, lr);
            } else {
                auto p = params.values();
                const auto g = lg.gradient.values();
                for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * g[i];
            }
        }
        if (!params.all_finite()) throw DivergenceError("non-finite weights after epoch " + std::to_string(epoch));

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = loss_sum / static_cast<double>(order.size());
        stats.val_loss = have_val ? mean_loss(params, val_set, config.threads) : stats.train_loss;
        stats.learning_rate = lr;
        if (!std::isfinite(stats.val_loss)) throw DivergenceError("non-finite validation loss in epoch " + std::to_string(epoch));

        if (stats.val_loss < report.best_val_loss) {
            report.best_val_loss = stats.val_loss;
            report.best_epoch = epoch;
            report.best_params = params;
            if (config.checkpoint)
                save_checkpoint(*config.checkpoint, params, {epoch, stats.val_loss, config.seed});
        }
        stats.seconds = std::chrono::duration<double>(clock::now() - start).count();
        record(stats);
        lr *= config.lr_decay;
    }
    if (config.checkpoint && report.best_epoch == 0)
        save_checkpoint(*config.checkpoint, report.best_params, {0, report.best_val_loss, config.seed});
    report.final_params = std::move(params);
    return report;
}

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochStats>& history) {
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp);
        if (!out) throw std::runtime_error("cannot write " + path.string());
        out.precision(10);
        out << "epoch,train_loss,val_loss,learning_rate,seconds\n";
        for (const auto& s : history)
            out << s.epoch << ',' << s.train_loss << ',' << s.val_loss << ',' << s.learning_rate << ',' << s.seconds << '\n';
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace qsep
