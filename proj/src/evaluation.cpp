#include "qsep/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <cstdio>
#include <limits>
#include <set>
#include <stdexcept>

#include "qsep/parallel.hpp"

namespace qsep {

namespace {

double ratio(std::size_t num, std::size_t den, double empty) {
    return den == 0 ? empty : static_cast<double>(num) / static_cast<double>(den);
}

void check_sizes(std::size_t losses, std::size_t labels) {
    if (losses != labels) throw std::invalid_argument("losses and labels differ in length");
}

template <typename Write>
void atomic_write(const std::filesystem::path& path, Write&& write) {
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + path.string());
        write(out);
        if (!out) throw std::runtime_error("failed writing " + path.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace

std::vector<double> SeparatorModel::losses(std::span<const CMatrix> states, unsigned threads) const {
    return batch_losses(params_, states, threads);
}

std::vector<double> BaselineModel::losses(std::span<const CMatrix> states, unsigned threads) const {
    std::vector<double> out(states.size());
    parallel_for(states.size(), threads, [&](std::size_t i) { out[i] = baseline_forward(states[i]).loss; });
    return out;
}

std::string to_string(LabelMode m) { return m == LabelMode::Entanglement ? "entanglement" : "discord"; }

std::optional<LabelMode> label_mode_from_string(std::string_view s) {
    if (s == "entanglement") return LabelMode::Entanglement;
    if (s == "discord") return LabelMode::Discord;
    return std::nullopt;
}

bool is_positive(const StateLabel& label, LabelMode mode) {
    return mode == LabelMode::Entanglement ? !label.separable() : !label.zero_discord();
}

double Confusion::accuracy() const { return ratio(tp + tn, total(), 0.0); }
double Confusion::precision() const { return ratio(tp, tp + fp, 1.0); }
double Confusion::recall() const { return ratio(tp, tp + fn, 0.0); }
double Confusion::specificity() const { return ratio(tn, tn + fp, 0.0); }

Confusion confusion_at(std::span<const double> losses, std::span<const StateLabel> labels, LabelMode mode, double tau) {
    check_sizes(losses.size(), labels.size());
    Confusion c;
    for (std::size_t i = 0; i < losses.size(); ++i) {
        const bool pred = losses[i] > tau;
        if (is_positive(labels[i], mode))
            ++(pred ? c.tp : c.fn);
        else
            ++(pred ? c.fp : c.tn);
    }
    return c;
}

std::vector<double> log_thresholds(std::size_t n, double lo, double hi) {
    if (n < 2 || !(lo > 0.0) || !(hi > lo)) throw std::invalid_argument("log_thresholds: need n >= 2 and 0 < lo < hi");
    std::vector<double> taus(n);
    const double a = std::log(lo), b = std::log(hi);
    for (std::size_t i = 0; i < n; ++i)
        taus[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
    taus.front() = lo;
    taus.back() = hi;
    return taus;
}

std::vector<SweepPoint> sweep(std::span<const double> losses, std::span<const StateLabel> labels, LabelMode mode,
                              std::span<const double> taus) {
    check_sizes(losses.size(), labels.size());
    std::size_t pos = 0;
    for (const auto& l : labels) pos += is_positive(l, mode);
    if (pos == 0 || pos == labels.size())
        throw std::invalid_argument("sweep: data has a single class under " + to_string(mode) + " labels");

    // Sort once; each threshold is then a binary search per class.
    std::vector<double> pos_losses, neg_losses;
    for (std::size_t i = 0; i < losses.size(); ++i)
        (is_positive(labels[i], mode) ? pos_losses : neg_losses).push_back(losses[i]);
    std::sort(pos_losses.begin(), pos_losses.end());
    std::sort(neg_losses.begin(), neg_losses.end());

    std::vector<SweepPoint> out;
    out.reserve(taus.size());
    for (double tau : taus) {
        const auto pos_below = static_cast<std::size_t>(std::upper_bound(pos_losses.begin(), pos_losses.end(), tau) - pos_losses.begin());
        const auto neg_below = static_cast<std::size_t>(std::upper_bound(neg_losses.begin(), neg_losses.end(), tau) - neg_losses.begin());
        Confusion c;
        c.fn = pos_below;
        c.tp = pos_losses.size() - pos_below;
        c.tn = neg_below;
        c.fp = neg_losses.size() - neg_below;
        out.push_back({tau, c});
    }
    return out;
}

double metric_value(const Confusion& c, Metric m) {
    switch (m) {
        case Metric::Accuracy: return c.accuracy();
        case Metric::BalancedAccuracy: return c.balanced_accuracy();
        case Metric::Precision: return c.precision();
        case Metric::Recall: return c.recall();
    }
    return 0.0;
}

std::size_t best_index(std::span<const SweepPoint> points, Metric m) {
    if (points.empty()) throw std::invalid_argument("best_index: empty sweep");
    std::size_t best = 0;
    for (std::size_t i = 1; i < points.size(); ++i)
        if (metric_value(points[i].confusion, m) > metric_value(points[best].confusion, m)) best = i;
    return best;
}

void write_sweep_csv(const std::filesystem::path& path, std::span<const SweepPoint> points,
                     const std::string& comment) {
    atomic_write(path, [&](std::ostream& out) {
        out.precision(10);
        if (!comment.empty()) out << "# " << comment << '\n';
        out << "# pr is 1 where nothing is predicted positive\n";
        out << "tau,tp,fp,tn,fn,pr,rc,ba,accuracy\n";
        for (const auto& p : points) {
            const auto& c = p.confusion;
            out << p.tau << ',' << c.tp << ',' << c.fp << ',' << c.tn << ',' << c.fn << ',' << c.precision() << ','
                << c.recall() << ',' << c.balanced_accuracy() << ',' << c.accuracy() << '\n';
        }
    });
}

std::optional<double> GroupStat::mean() const {
    if (count == 0) return std::nullopt;
    return sum / static_cast<double>(count);
}

ClassMeans class_means(std::span<const double> losses, std::span<const CMatrix> states,
                       std::span<const StateLabel> labels) {
    check_sizes(losses.size(), labels.size());
    check_sizes(states.size(), labels.size());
    ClassMeans m;
    for (std::size_t i = 0; i < losses.size(); ++i) {
        const auto& l = labels[i];
        const double x = losses[i];
        const bool pure = states[i].purity() > 1.0 - 1e-9;
        if (l.klass == StateClass::Product) m.product.add(x);
        if (l.zero_discord()) m.non_discordant.add(x);
        if (l.klass == StateClass::DiscordantSeparable) m.discordant_separable.add(x);
        if (!l.zero_discord()) m.discordant.add(x);
        if (l.separable()) {
            m.separable.add(x);
            if (pure) m.pure_separable.add(x);
        } else {
            m.entangled.add(x);
            if (pure) m.pure_entangled.add(x);
        }
    }
    return m;
}

void write_class_means_csv(const std::filesystem::path& path, const ClassMeans& means, const std::string& comment) {
    const std::pair<const char*, const GroupStat*> rows[] = {
        {"product", &means.product},
        {"non-discordant", &means.non_discordant},
        {"separable", &means.separable},
        {"discordant", &means.discordant},
        {"discordant-separable", &means.discordant_separable},
        {"entangled", &means.entangled},
        {"pure-separable", &means.pure_separable},
        {"pure-entangled", &means.pure_entangled},
    };
    atomic_write(path, [&](std::ostream& out) {
        out.precision(10);
        if (!comment.empty()) out << "# " << comment << '\n';
        out << "class,count,mean_loss\n";
        for (const auto& [name, g] : rows) {
            out << name << ',' << g->count << ',';
            if (const auto m = g->mean()) out << *m;
            out << '\n';
        }
    });
}

MapGrid render_map(const LossModel& model, int grid_n, unsigned threads) {
    if (grid_n < 11) throw std::invalid_argument("render_map: grid_n must be >= 11");
    const auto n = static_cast<std::size_t>(grid_n);
    MapGrid grid{grid_n, std::vector<MapCell>(n * n)};
    std::vector<CMatrix> states(n * n);
    parallel_for(n, threads, [&](std::size_t iv) {
        for (std::size_t iu = 0; iu < n; ++iu) {
            auto& cell = grid.cells[iv * n + iu];
            cell.u = 2.0 * static_cast<double>(iu) / static_cast<double>(n - 1);
            cell.v = 2.0 * static_cast<double>(iv) / static_cast<double>(n - 1);
            states[iv * n + iu] = map_state(map_point(cell.u, cell.v));
            cell.klass = classify(states[iv * n + iu]).klass;
        }
    });
    const auto losses = model.losses(states, threads);
    for (std::size_t i = 0; i < losses.size(); ++i) grid.cells[i].loss = losses[i];
    return grid;
}

void write_map_csv(const std::filesystem::path& path, const MapGrid& grid, const std::string& comment) {
    atomic_write(path, [&](std::ostream& out) {
        out.precision(10);
        if (!comment.empty()) out << "# " << comment << '\n';
        out << "u,v,loss,klass\n";
        for (const auto& c : grid.cells) out << c.u << ',' << c.v << ',' << c.loss << ',' << to_string(c.klass) << '\n';
    });
}

void write_map_pgm(const std::filesystem::path& path, const MapGrid& grid, const std::string& comment) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& c : grid.cells) lo = std::min(lo, c.loss), hi = std::max(hi, c.loss);
    const double span = hi > lo ? hi - lo : 1.0;
    atomic_write(path, [&](std::ostream& out) {
        out << "P2\n";
        if (!comment.empty()) out << "# " << comment << '\n';
        out << grid.n << ' ' << grid.n << "\n255\n";
        for (int iv = grid.n - 1; iv >= 0; --iv) {
            for (int iu = 0; iu < grid.n; ++iu) {
                const auto level = std::lround(255.0 * (grid.at(iu, iv).loss - lo) / span);
                out << level << (iu + 1 < grid.n ? ' ' : '\n');
            }
        }
    });
}

double map_iou(const MapGrid& grid, double tau) {
    std::size_t inter = 0, uni = 0;
    for (const auto& c : grid.cells) {
        const bool below = c.loss <= tau;
        const bool nd = c.klass == StateClass::Product || c.klass == StateClass::NonDiscordant;
        inter += below && nd;
        uni += below || nd;
    }
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

int map_class_count(const MapGrid& grid) {
    std::set<StateClass> seen;
    for (const auto& c : grid.cells) seen.insert(c.klass);
    return static_cast<int>(seen.size());
}

std::string fnv1a_hex(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace qsep
