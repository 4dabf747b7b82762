// Acceptance run: trains the desk-scale models and prints one PASS/FAIL line
// per criterion. Exit status is the number of failed criteria.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <set>

#include "properties.hpp"
#include "qsep/dataset.hpp"
#include "qsep/evaluation.hpp"
#include "qsep/oracles.hpp"
#include "qsep/parallel.hpp"
#include "qsep/training.hpp"

using namespace qsep;
namespace fs = std::filesystem;

namespace {

// pinned tolerances
constexpr double kPureAccuracy = 0.97;
constexpr double kRuntimeLimit = 30 * 60;
constexpr double kDiscordBa = 0.85;
constexpr double kBaGap = 0.05;
constexpr double kPureLossRatio = 10.0;
constexpr double kFpOverFn = 5.0;
constexpr double kCollapseBa = 0.03;
constexpr double kCollapseKernel = 0.1;
constexpr double kMapIou = 0.7;
constexpr int kMapGrid = 101;
constexpr double kFdTolerance = 1e-4;
constexpr std::size_t kFdCoordinates = 600;
constexpr double kTraceTolerance = 1e-12;
constexpr double kEquivarianceTolerance = 1e-10;
constexpr double kGhzTolerance = 1e-9;
constexpr int kHierarchyStates = 1000;
constexpr double kPropertyTime = 5 * 60;

constexpr std::size_t kPureTestSize = 4000;
constexpr std::size_t kMixedTestSize = 4000;

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

int failures = 0;

void report(int n, bool pass, const std::string& detail) {
    std::printf("criterion %d: %s  %s\n", n, pass ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    failures += !pass;
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

struct Sweeps {
    std::vector<SweepPoint> discord, entanglement;
    std::vector<double> losses;
};

Sweeps evaluate(const LossModel& m, const Dataset& data, unsigned threads) {
    const auto states = data.states();
    const auto labels = data.labels();
    Sweeps s;
    s.losses = m.losses(states, threads);
    const auto taus = log_thresholds();
    s.discord = sweep(s.losses, labels, LabelMode::Discord, taus);
    s.entanglement = sweep(s.losses, labels, LabelMode::Entanglement, taus);
    return s;
}

double max_ba(const std::vector<SweepPoint>& pts) { return pts[best_index(pts, Metric::BalancedAccuracy)].confusion.balanced_accuracy(); }
double best_tau(const std::vector<SweepPoint>& pts) { return pts[best_index(pts, Metric::BalancedAccuracy)].tau; }

double max_ba_gap(const std::vector<SweepPoint>& a, const std::vector<SweepPoint>& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        worst = std::max(worst, std::abs(a[i].confusion.balanced_accuracy() - b[i].confusion.balanced_accuracy()));
    return worst;
}

TrainConfig train_config(int epochs, std::uint64_t seed, unsigned threads) {
    TrainConfig tc;
    tc.epochs = epochs;
    tc.seed = seed;
    tc.threads = threads;
    return tc;
}

TrainReport fit(const SeparatorConfig& cfg, const Dataset& train_set, const Dataset& val_set, const TrainConfig& tc,
                const char* tag) {
    Rng rng(tc.seed);
    const auto tr = train_set.states(), va = val_set.states();
    return train(SeparatorParams::initialized(cfg, rng), tr, va, tc, [tag](const EpochStats& s) {
        std::printf("  [%s] epoch %2d  train %.5f  val %.5f  %.1fs\n", tag, s.epoch, s.train_loss, s.val_loss, s.seconds);
        std::fflush(stdout);
    });
}

void properties() {
    const auto start = Clock::now();
    std::vector<std::string> failed;
    const auto fd = test::gradient_fd_check(kFdCoordinates, 101);
    if (!(fd.worst_relative_error <= kFdTolerance && fd.coordinates >= 500)) failed.push_back("gradient");
    const double trace_err = test::identity_partial_trace_error(200, 102);
    if (!(trace_err <= kTraceTolerance)) failed.push_back("identity-trace");
    const double equiv = test::permutation_equivariance_error(20, 103);
    if (!(equiv <= kEquivarianceTolerance)) failed.push_back("equivariance");
    const auto dec = test::decoder_separability(500, 104);
    if (!(dec.form_error <= 1e-12 && dec.all_density && dec.max_negativity <= kEntanglementTolerance))
        failed.push_back("decoder");

    CMatrix ghz(8), ghz_mix(8);
    for (std::size_t i : {0u, 7u})
        for (std::size_t j : {0u, 7u}) ghz(i, j) = 0.5;
    ghz_mix(0, 0) = ghz_mix(7, 7) = 0.5;
    double ghz_err = 0.0;
    for (Cut c : kAllCuts) ghz_err = std::max(ghz_err, std::abs(negativity(ghz, c) - 0.5));
    if (!(ghz_err <= kGhzTolerance)) failed.push_back("ghz-negativity");
    int zd_checks = 0;
    for (Cut c : kAllCuts)
        for (MeasuredSide side : {MeasuredSide::Small, MeasuredSide::Large}) zd_checks += zero_discord_check(ghz_mix, c, side);
    if (zd_checks != 6) failed.push_back("zero-discord-checks");

    Rng rng(105);
    int violations = 0;
    const std::array<CMatrix (*)(Rng&), 4> gens{random_mixed_product, random_zero_discord, random_discordant_separable,
                                                [](Rng& r) { return random_mixed_entangled(r); }};
    for (auto gen : gens)
        for (int i = 0; i < kHierarchyStates; ++i) {
            const CMatrix rho = gen(rng);
            const auto l = classify(rho);
            const bool zd = std::none_of(l.discordant_check.begin(), l.discordant_check.end(), [](bool b) { return b; });
            violations += (l.is_product && !zd) || (zd && max_negativity(rho) > kEntanglementTolerance);
        }
    if (violations) failed.push_back("hierarchy");
    const double t = seconds_since(start);
    if (t > kPropertyTime) failed.push_back("time");

    std::string detail = fmt("fd worst rel %.2e over %zu coords; trace %.1e; equivariance %.1e; decoder form %.1e "
                             "negativity %.1e; GHZ negativity err %.1e; zero-discord checks %d/6; hierarchy "
                             "violations %d/%d; %.0f s",
                             fd.worst_relative_error, fd.coordinates, trace_err, equiv, dec.form_error, dec.max_negativity,
                             ghz_err, zd_checks, violations, 4 * kHierarchyStates, t);
    for (const auto& f : failed) detail += " [" + f + " failed]";
    report(7, failed.empty(), detail);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria 1-7"};
    double scale = 0.04;
    int epochs = 20;
    std::uint64_t seed = 2024;
    unsigned threads = 0;
    std::string out;
    std::set<int> only;
    app.add_option("--scale", scale, "Training-set scale")->capture_default_str();
    app.add_option("--epochs", epochs, "Epochs")->capture_default_str();
    app.add_option("--seed", seed, "Seed")->capture_default_str();
    app.add_option("--threads", threads, "Worker threads");
    app.add_option("--out", out, "Directory for sweep, mean, map and checkpoint files");
    app.add_option("--only", only, "Run only these criteria");
    CLI11_PARSE(app, argc, argv);
    threads = resolve_threads(threads);
    auto want = [&](std::initializer_list<int> ns) {
        if (only.empty()) return true;
        for (int n : ns)
            if (only.count(n)) return true;
        return false;
    };
    const fs::path dir = out;
    if (!out.empty()) fs::create_directories(dir);
    auto path = [&](const std::string& name) { return dir / name; };

    if (want({7})) properties();
    if (!want({1, 2, 3, 4, 5, 6})) return failures;

    const auto start = Clock::now();
    const auto sets = build_training_sets(scale, seed, threads);
    const Dataset s_pure = generate(DatasetKind::SPure, kPureTestSize, seed + 1, threads);
    const Dataset s_mixed = generate(DatasetKind::SMixed, kMixedTestSize, seed + 2, threads);
    std::printf("  train %zu, val %zu, S_pure %zu, S_mixed %zu (%.1fs)\n", sets.train.size(), sets.val.size(),
                s_pure.size(), s_mixed.size(), seconds_since(start));

    const BaselineModel baseline;
    const Sweeps base_mixed = evaluate(baseline, s_mixed, threads);

    if (want({1, 2, 3, 4, 6})) {
        const auto tc = train_config(epochs, seed, threads);
        const auto rep = fit(SeparatorConfig{}, sets.train, sets.val, tc, "Sep");
        const SeparatorModel model(rep.best_params);
        const Sweeps pure = evaluate(model, s_pure, threads);
        const Sweeps mixed = evaluate(model, s_mixed, threads);
        const double runtime = seconds_since(start);
        const std::string prov = fmt("seed=%llu epochs=%d scale=%g best_epoch=%d", static_cast<unsigned long long>(seed),
                                     epochs, scale, rep.best_epoch);
        if (!out.empty()) {
            save_checkpoint(path("separator.json"), rep.best_params, {rep.best_epoch, rep.best_val_loss, seed});
            write_history_csv(path("history.csv"), rep.history);
            write_sweep_csv(path("s_mixed_discord.csv"), mixed.discord, prov);
            write_sweep_csv(path("s_mixed_entanglement.csv"), mixed.entanglement, prov);
            write_sweep_csv(path("s_pure_entanglement.csv"), pure.entanglement, prov);
            write_sweep_csv(path("baseline_s_mixed_discord.csv"), base_mixed.discord, "baseline");
            write_sweep_csv(path("baseline_s_mixed_entanglement.csv"), base_mixed.entanglement, "baseline");
            write_class_means_csv(path("s_mixed_means.csv"), class_means(mixed.losses, s_mixed.states(), s_mixed.labels()), prov);
            write_class_means_csv(path("s_pure_means.csv"), class_means(pure.losses, s_pure.states(), s_pure.labels()), prov);
        }

        if (want({1})) {
            const auto& p = pure.entanglement[best_index(pure.entanglement, Metric::Accuracy)];
            const double acc = p.confusion.accuracy();
            report(1, acc >= kPureAccuracy && runtime <= kRuntimeLimit,
                   fmt("S_pure best accuracy %.4f (>= %.2f) at tau %.3g; train+eval %.0f s (<= %.0f s)", acc,
                       kPureAccuracy, p.tau, runtime, kRuntimeLimit));
        }
        const double ba_d = max_ba(mixed.discord), ba_e = max_ba(mixed.entanglement);
        if (want({2})) {
            report(2, ba_d >= ba_e + kBaGap && ba_d >= kDiscordBa,
                   fmt("S_mixed max BA discord %.4f (tau %.3g), entanglement %.4f (tau %.3g); need discord >= %.2f "
                       "and gap >= %.2f (gap %.4f); baseline %.4f / %.4f",
                       ba_d, best_tau(mixed.discord), ba_e, best_tau(mixed.entanglement), kDiscordBa, kBaGap, ba_d - ba_e,
                       max_ba(base_mixed.discord), max_ba(base_mixed.entanglement)));
        }
        if (want({3})) {
            const auto m = class_means(mixed.losses, s_mixed.states(), s_mixed.labels());
            const auto p = class_means(pure.losses, s_pure.states(), s_pure.labels());
            const double nd = m.non_discordant.mean().value(), sep = m.separable.mean().value();
            const double disc = m.discordant.mean().value(), ent = m.entangled.mean().value();
            const double ps = p.pure_separable.mean().value(), pe = p.pure_entangled.mean().value();
            report(3, nd < sep && sep < disc && disc <= ent && pe >= kPureLossRatio * ps,
                   fmt("mixed means ND %.3g < separable %.3g < discordant %.3g <= entangled %.3g; pure separable %.3g "
                       "vs entangled %.3g (ratio %.1f, need >= %.0f)",
                       nd, sep, disc, ent, ps, pe, pe / ps, kPureLossRatio));
        }
        const double tau_d = best_tau(mixed.discord);
        if (want({4})) {
            const auto labels = s_mixed.labels();
            const auto e = confusion_at(mixed.losses, labels, LabelMode::Entanglement, tau_d);
            const auto d = confusion_at(mixed.losses, labels, LabelMode::Discord, tau_d);
            report(4, e.fp >= kFpOverFn * e.fn && d.fn > d.fp,
                   fmt("at tau %.3g: entanglement FP %zu vs FN %zu (need >= %.0fx); discord FN %zu vs FP %zu (need FN > FP)",
                       tau_d, e.fp, e.fn, kFpOverFn, d.fn, d.fp));
        }
        if (want({6})) {
            const auto grid = render_map(model, kMapGrid, threads);
            const auto base_grid = render_map(baseline, kMapGrid, threads);
            const double tau_b = best_tau(base_mixed.discord);
            const double iou = map_iou(grid, tau_d), iou_b = map_iou(base_grid, tau_b);
            const int classes = map_class_count(grid);
            if (!out.empty()) {
                write_map_csv(path("map.csv"), grid, prov);
                write_map_pgm(path("map.pgm"), grid, prov);
                write_map_csv(path("map_baseline.csv"), base_grid, "baseline");
                write_map_pgm(path("map_baseline.pgm"), base_grid, "baseline");
            }
            report(6, classes == 4 && iou >= kMapIou && iou > iou_b,
                   fmt("%d oracle classes on the %dx%d grid; IoU(loss <= %.3g, non-discordant) %.3f (need >= %.2f); "
                       "baseline %.3f at its tau %.3g",
                       classes, kMapGrid, kMapGrid, tau_d, iou, kMapIou, iou_b, tau_b));
        }
    }

    if (want({5})) {
        SeparatorConfig cfg;
        cfg.use_fc = false;
        const Dataset prod = filter_subset(sets.train, TrainSubset::Prod);
        const Dataset prod_val = filter_subset(sets.val, TrainSubset::Prod);
        Rng rng(seed + 5);
        const double dev0 = kernel_identity_deviation(SeparatorParams::initialized(cfg, rng));
        const auto rep = fit(cfg, prod, prod_val, train_config(epochs, seed + 5, threads), "no-FC/Prod");
        const SeparatorModel model(rep.best_params);
        const Sweeps mixed = evaluate(model, s_mixed, threads);
        const double gap = std::max(max_ba_gap(mixed.discord, base_mixed.discord),
                                    max_ba_gap(mixed.entanglement, base_mixed.entanglement));
        const double dev = kernel_identity_deviation(rep.best_params);
        if (!out.empty()) {
            save_checkpoint(path("nofc_prod.json"), rep.best_params, {rep.best_epoch, rep.best_val_loss, seed + 5});
            write_sweep_csv(path("nofc_prod_s_mixed_discord.csv"), mixed.discord, "no-FC Prod");
            write_sweep_csv(path("nofc_prod_s_mixed_entanglement.csv"), mixed.entanglement, "no-FC Prod");
        }
        report(5, gap <= kCollapseBa && dev <= kCollapseKernel,
               fmt("no-FC on %zu products: max |BA - BA_baseline| over the sweep %.4f (<= %.2f); mean |K - cI| %.4f "
                   "(<= %.1f, epoch 0 %.4f, best epoch %d)",
                   prod.size(), gap, kCollapseBa, dev, kCollapseKernel, dev0, rep.best_epoch));
    }
    std::printf("%d criteria failed, total %.0f s\n", failures, seconds_since(start));
    return failures;
}
