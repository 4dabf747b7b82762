// qsep: generate labeled 3-qubit datasets, train the separator, evaluate
// loss-threshold classifiers and render the 2D state map.
//
// Exit codes: 0 ok, 1 other failure, 2 usage, 3 data format, 4 divergence.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "qsep/dataset.hpp"
#include "qsep/errors.hpp"
#include "qsep/evaluation.hpp"
#include "qsep/parallel.hpp"
#include "qsep/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace qsep;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kUsage = 2, kDataFormat = 3, kDivergence = 4 };

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Values from the --config file fill in options not given on the command
// line; a key is looked up in the subcommand's section first, then at the
// top level.
class Config {
public:
    void load(const std::string& path) {
        if (path.empty()) return;
        std::ifstream in(path);
        if (!in) throw UsageError("cannot open config file " + path);
        try {
            root_ = json::parse(in);
        } catch (const json::exception& e) {
            throw UsageError("config file " + path + ": " + e.what());
        }
        if (!root_.is_object()) throw UsageError("config file must hold a JSON object");
    }

    template <class T>
    void fill(T& target, const CLI::Option* opt, const std::string& section, const std::string& key) const {
        if (opt->count() > 0) return;
        const json* v = nullptr;
        if (root_.contains(section) && root_[section].contains(key))
            v = &root_[section][key];
        else if (root_.contains(key))
            v = &root_[key];
        if (!v) return;
        try {
            target = v->get<T>();
        } catch (const json::exception&) {
            throw UsageError("config key '" + key + "' has the wrong type");
        }
    }

private:
    json root_ = json::object();
};

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_json(const fs::path& path, const json& j) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw std::runtime_error("cannot write " + path.string());
        out << j.dump(2) << '\n';
    }
    fs::rename(tmp, path);
}

fs::path manifest_path(const fs::path& out) { return out.string() + ".manifest.json"; }

void require_file(const std::string& path, const char* what) {
    if (!fs::is_regular_file(path)) throw UsageError(std::string(what) + " not found: " + path);
}

json class_counts_json(const Dataset& d) {
    const auto c = d.class_counts();
    json j;
    for (std::size_t k = 0; k < c.size(); ++k) j[std::string(to_string(static_cast<StateClass>(k)))] = c[k];
    return j;
}

Dataset load_dataset(const std::string& path, unsigned threads, double verify_fraction) {
    require_file(path, "dataset");
    Dataset d = read_qsd1(path);
    if (verify_fraction > 0.0) {
        const auto bad = verify_labels(d, verify_fraction, threads);
        if (!bad.empty())
            throw FormatError(path + ": stored label of record " + std::to_string(bad.front()) +
                              " disagrees with the oracles (" + std::to_string(bad.size()) + " mismatches in sample)");
    }
    return d;
}

// Model selected by --checkpoint or --model baseline, plus the provenance
// line written into every output.
struct LoadedModel {
    std::unique_ptr<LossModel> model;
    std::string provenance;
};

LoadedModel load_model(const std::string& kind, const std::string& checkpoint) {
    if (kind == "baseline") {
        if (!checkpoint.empty()) throw UsageError("--model baseline takes no checkpoint");
        return {std::make_unique<BaselineModel>(), "model=baseline seed=none checkpoint=none"};
    }
    if (kind != "separator") throw UsageError("unknown model '" + kind + "' (separator, baseline)");
    if (checkpoint.empty()) throw UsageError("--checkpoint is required for the separator model");
    require_file(checkpoint, "checkpoint");
    const std::string text = read_file(checkpoint);
    auto ckpt = checkpoint_from_json(text);
    std::string prov = "model=separator seed=" + std::to_string(ckpt.meta.seed) + " checkpoint=" + fnv1a_hex(text);
    return {std::make_unique<SeparatorModel>(std::move(ckpt.params)), prov};
}

// ---------------------------------------------------------------------------

struct GenArgs {
    std::string kind;
    std::size_t count = 0;
    std::uint64_t seed = 0;
    std::string out, csv;
    unsigned threads = 0;
};

int run_gen(const GenArgs& a) {
    const auto kind = dataset_kind_from_string(a.kind);
    if (!kind) throw UsageError("unknown dataset kind '" + a.kind + "'");
    const unsigned threads = resolve_threads(a.threads);
    const Dataset d = generate(*kind, a.count, a.seed, threads);
    write_qsd1(a.out, d);
    if (!a.csv.empty()) write_csv(a.csv, d);
    write_json(manifest_path(a.out), {{"command", "gen"},
                                      {"kind", a.kind},
                                      {"count", a.count},
                                      {"seed", a.seed},
                                      {"format", "QSD1"},
                                      {"format_version", kQsdVersion},
                                      {"class_counts", class_counts_json(d)},
                                      {"sha", fnv1a_hex(read_file(a.out))}});
    std::cout << "wrote " << d.size() << " records to " << a.out << '\n';
    return kOk;
}

struct TrainArgs {
    std::string train, val, out, history;
    int epochs = 20;
    int n_k = 24;
    int fc_depth = 4;
    double lr = 1e-4;
    int batch = 16;
    double lr_decay = 1.0;
    double grad_clip = 0.0;
    std::string subset = "Sep";
    std::string activation = "relu";
    std::string optimizer = "adam";
    bool no_fc = false;
    bool untie = false;
    std::uint64_t seed = 0;
    unsigned threads = 0;
    bool quiet = false;
};

int run_train(const TrainArgs& a) {
    const unsigned threads = resolve_threads(a.threads);
    const auto subset = train_subset_from_string(a.subset);
    if (!subset) throw UsageError("unknown subset '" + a.subset + "' (Pure, Prod, ZD, Sep, NPS)");
    if (a.optimizer != "adam" && a.optimizer != "sgd") throw UsageError("optimizer must be adam or sgd");

    SeparatorConfig cfg;
    cfg.n_k = a.n_k;
    cfg.fc_depth = a.fc_depth;
    cfg.use_fc = !a.no_fc;
    cfg.tie_weights = !a.untie;
    try {
        cfg.activation = activation_from_string(a.activation);
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }

    TrainConfig tc;
    tc.epochs = a.epochs;
    tc.batch_size = a.batch;
    tc.learning_rate = a.lr;
    tc.lr_decay = a.lr_decay;
    tc.grad_clip = a.grad_clip;
    tc.optimizer = a.optimizer == "adam" ? Optimizer::Adam : Optimizer::Sgd;
    tc.seed = a.seed;
    tc.threads = threads;
    try {
        tc.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }

    // read and check everything before creating any output
    const Dataset train_all = load_dataset(a.train, threads, 0.01);
    const Dataset val_all = a.val.empty() ? Dataset{} : load_dataset(a.val, threads, 0.01);
    const Dataset train_set = filter_subset(train_all, *subset);
    const Dataset val_set = filter_subset(val_all, *subset);
    if (train_set.empty()) throw UsageError("no training records in subset " + a.subset);

    const fs::path out = a.out;
    const fs::path partial = out.string() + ".partial";
    const fs::path history = a.history.empty() ? fs::path(out.string() + ".history.csv") : fs::path(a.history);
    tc.checkpoint = partial;

    Rng rng(a.seed);
    auto init = SeparatorParams::initialized(cfg, rng);
    const auto train_states = train_set.states();
    const auto val_states = val_set.states();
    std::optional<TrainReport> trained;
    try {
        trained = train(std::move(init), train_states, val_states, tc, [&](const EpochStats& s) {
            if (!a.quiet)
                std::printf("epoch %3d  train %.6g  val %.6g  (%.1fs)\n", s.epoch, s.train_loss, s.val_loss, s.seconds);
            std::fflush(stdout);
        });
    } catch (...) {
        fs::remove(partial);
        throw;
    }
    const TrainReport& report = *trained;
    fs::rename(partial, out);
    write_history_csv(history, report.history);

    json manifest = {{"command", "train"},
                     {"train", a.train},
                     {"train_sha", fnv1a_hex(read_file(a.train))},
                     {"val", a.val},
                     {"subset", a.subset},
                     {"train_records", train_set.size()},
                     {"val_records", val_set.size()},
                     {"separator",
                      {{"n_k", cfg.n_k},
                       {"use_fc", cfg.use_fc},
                       {"fc_depth", cfg.fc_depth},
                       {"tie_weights", cfg.tie_weights},
                       {"activation", to_string(cfg.activation)}}},
                     {"epochs", a.epochs},
                     {"lr", a.lr},
                     {"lr_decay", a.lr_decay},
                     {"grad_clip", a.grad_clip},
                     {"batch", a.batch},
                     {"optimizer", a.optimizer},
                     {"seed", a.seed},
                     {"threads", threads},
                     {"best_epoch", report.best_epoch},
                     {"best_val_loss", report.best_val_loss},
                     {"checkpoint", out.string()},
                     {"checkpoint_sha", fnv1a_hex(read_file(out))},
                     {"history", history.string()}};
    if (!a.val.empty()) manifest["val_sha"] = fnv1a_hex(read_file(a.val));
    write_json(manifest_path(out), manifest);
    std::printf("best epoch %d, validation loss %.6g -> %s\n", report.best_epoch, report.best_val_loss, out.c_str());
    return kOk;
}

struct EvalArgs {
    std::string model = "separator";
    std::string checkpoint, data, label = "discord", out, confusion, means;
    std::optional<double> tau;
    std::size_t n_taus = 400;
    double tau_min = 1e-5, tau_max = 1.0;
    unsigned threads = 0;
};

int run_eval(const EvalArgs& a) {
    const auto mode = label_mode_from_string(a.label);
    if (!mode) throw UsageError("label must be discord or entanglement");
    const unsigned threads = resolve_threads(a.threads);
    const auto loaded = load_model(a.model, a.checkpoint);
    const Dataset data = load_dataset(a.data, threads, 0.01);
    const auto states = data.states();
    const auto labels = data.labels();
    const auto losses = loaded.model->losses(states, threads);

    std::vector<SweepPoint> points;
    try {
        points = sweep(losses, labels, *mode, log_thresholds(a.n_taus, a.tau_min, a.tau_max));
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    const std::string comment = loaded.provenance + " data=" + a.data + " label=" + a.label;
    write_sweep_csv(a.out, points, comment);
    if (!a.means.empty()) write_class_means_csv(a.means, class_means(losses, states, labels), comment);

    const auto& best = points[best_index(points, Metric::BalancedAccuracy)];
    std::printf("max balanced accuracy %.4f at tau %.4g\n", best.confusion.balanced_accuracy(), best.tau);

    if (a.tau) {
        const auto c = confusion_at(losses, labels, *mode, *a.tau);
        const fs::path path = a.confusion.empty() ? fs::path(a.out + ".confusion.csv") : fs::path(a.confusion);
        const bool disc = *mode == LabelMode::Discord;
        std::ofstream f(path.string() + ".tmp");
        f << "# " << comment << " tau=" << *a.tau << '\n'
          << "label,predicted_" << (disc ? "non-discordant" : "separable") << ",predicted_"
          << (disc ? "discordant" : "entangled") << '\n'
          << (disc ? "non-discordant" : "separable") << ',' << c.tn << ',' << c.fp << '\n'
          << (disc ? "discordant" : "entangled") << ',' << c.fn << ',' << c.tp << '\n';
        f.close();
        fs::rename(path.string() + ".tmp", path);
        std::printf("tau %.4g: TN %zu FP %zu FN %zu TP %zu  BA %.4f\n", *a.tau, c.tn, c.fp, c.fn, c.tp,
                    c.balanced_accuracy());
    }
    return kOk;
}

struct MapArgs {
    std::string model = "separator";
    std::string checkpoint, out;
    int grid = 101;
    std::optional<double> tau;
    unsigned threads = 0;
};

int run_map(const MapArgs& a) {
    if (a.grid < 11) throw UsageError("--grid must be at least 11");
    const unsigned threads = resolve_threads(a.threads);
    const auto loaded = load_model(a.model, a.checkpoint);

    auto emit = [&](const LossModel& m, const std::string& prefix, const std::string& prov) {
        const auto grid = render_map(m, a.grid, threads);
        write_map_csv(prefix + ".csv", grid, prov);
        write_map_pgm(prefix + ".pgm", grid, prov);
        std::printf("%s: %d oracle classes", (prefix + ".csv").c_str(), map_class_count(grid));
        if (a.tau) std::printf(", IoU(loss < %.4g, non-discordant) = %.4f", *a.tau, map_iou(grid, *a.tau));
        std::printf("\n");
    };
    emit(*loaded.model, a.out, loaded.provenance);
    if (a.model != "baseline") emit(BaselineModel{}, a.out + "_baseline", "model=baseline seed=none checkpoint=none");
    return kOk;
}

int run_kernels(const std::string& checkpoint, const std::string& out) {
    require_file(checkpoint, "checkpoint");
    const auto ckpt = load_checkpoint(checkpoint);
    export_kernels_csv(out, ckpt.params);
    std::printf("mean |K - cI| = %.4g\n", kernel_identity_deviation(ckpt.params));
    return kOk;
}

int run_verify(const std::string& data, double fraction, unsigned threads_req) {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw UsageError("--fraction must be in (0, 1]");
    const unsigned threads = resolve_threads(threads_req);
    require_file(data, "dataset");
    const Dataset d = read_qsd1(data);
    const auto bad = verify_labels(d, fraction, threads);
    const auto counts = d.class_counts();
    std::printf("%zu records (product %zu, non-discordant %zu, discordant-separable %zu, entangled %zu)\n", d.size(),
                counts[0], counts[1], counts[2], counts[3]);
    if (!bad.empty()) {
        std::printf("%zu label mismatches, first at record %zu\n", bad.size(), bad.front());
        return kDataFormat;
    }
    std::printf("labels verified\n");
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Separator autoencoder for 3-qubit quantum correlations"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "JSON file with option defaults");
    Config config;

    GenArgs gen;
    auto* gen_cmd = app.add_subcommand("gen", "Generate a labeled dataset");
    gen_cmd->add_option("kind", gen.kind, "pure-sep, pure-ent, mixed-sep, mixed-ent, zd, product, s-pure, s-mixed, train, val")
        ->required();
    gen_cmd->add_option("count", gen.count, "Number of records")->required();
    auto* gen_seed = gen_cmd->add_option("--seed", gen.seed, "Seed");
    gen_cmd->add_option("--out,-o", gen.out, "Output QSD1 file")->required();
    gen_cmd->add_option("--csv", gen.csv, "Also write a CSV copy");
    auto* gen_threads = gen_cmd->add_option("--threads", gen.threads, "Worker threads (0: QSEP_THREADS or all cores)");

    TrainArgs tr;
    auto* tr_cmd = app.add_subcommand("train", "Train the separator");
    tr_cmd->add_option("--train", tr.train, "Training set (QSD1)")->required();
    tr_cmd->add_option("--val", tr.val, "Validation set (QSD1)");
    tr_cmd->add_option("--out,-o", tr.out, "Checkpoint to write (JSON)")->required();
    tr_cmd->add_option("--history", tr.history, "Per-epoch loss CSV (default <out>.history.csv)");
    auto* o_epochs = tr_cmd->add_option("--epochs", tr.epochs, "Epochs")->capture_default_str();
    auto* o_nk = tr_cmd->add_option("--nk", tr.n_k, "Kernels per extractor")->capture_default_str();
    auto* o_depth = tr_cmd->add_option("--fc-depth", tr.fc_depth, "FC layers per qubit")->capture_default_str();
    auto* o_lr = tr_cmd->add_option("--lr", tr.lr, "Learning rate")->capture_default_str();
    auto* o_batch = tr_cmd->add_option("--batch", tr.batch, "Batch size")->capture_default_str();
    auto* o_decay = tr_cmd->add_option("--lr-decay", tr.lr_decay, "Per-epoch learning-rate factor")->capture_default_str();
    auto* o_clip = tr_cmd->add_option("--grad-clip", tr.grad_clip, "Global gradient-norm clip (0: off)");
    auto* o_subset = tr_cmd->add_option("--subset", tr.subset, "Pure, Prod, ZD, Sep or NPS")->capture_default_str();
    auto* o_act = tr_cmd->add_option("--activation", tr.activation, "relu or tanh")->capture_default_str();
    auto* o_opt = tr_cmd->add_option("--optimizer", tr.optimizer, "adam or sgd")->capture_default_str();
    auto* o_nofc = tr_cmd->add_flag("--no-fc", tr.no_fc, "Drop the FC layers");
    auto* o_untie = tr_cmd->add_flag("--untie", tr.untie, "Separate weights per qubit");
    auto* o_seed = tr_cmd->add_option("--seed", tr.seed, "Seed for initialization and shuffling");
    auto* o_threads = tr_cmd->add_option("--threads", tr.threads, "Worker threads");
    tr_cmd->add_flag("--quiet,-q", tr.quiet, "No per-epoch output");

    EvalArgs ev;
    auto* ev_cmd = app.add_subcommand("eval", "Threshold sweep and confusion matrix");
    auto* ev_model = ev_cmd->add_option("--model", ev.model, "separator or baseline")->capture_default_str();
    ev_cmd->add_option("--checkpoint,-c", ev.checkpoint, "Separator checkpoint");
    ev_cmd->add_option("--data,-d", ev.data, "Dataset (QSD1)")->required();
    auto* ev_label = ev_cmd->add_option("--label", ev.label, "discord or entanglement")->capture_default_str();
    ev_cmd->add_option("--out,-o", ev.out, "Sweep CSV")->required();
    ev_cmd->add_option("--tau", ev.tau, "Also write the confusion matrix at this threshold");
    ev_cmd->add_option("--confusion", ev.confusion, "Confusion CSV path (default <out>.confusion.csv)");
    ev_cmd->add_option("--means", ev.means, "Per-class mean loss CSV");
    auto* ev_ntaus = ev_cmd->add_option("--taus", ev.n_taus, "Number of thresholds")->capture_default_str();
    auto* ev_threads = ev_cmd->add_option("--threads", ev.threads, "Worker threads");

    MapArgs mp;
    auto* mp_cmd = app.add_subcommand("map", "Render the 2D loss map");
    mp_cmd->add_option("--model", mp.model, "separator or baseline")->capture_default_str();
    mp_cmd->add_option("--checkpoint,-c", mp.checkpoint, "Separator checkpoint");
    auto* mp_grid = mp_cmd->add_option("--grid", mp.grid, "Cells per side")->capture_default_str();
    mp_cmd->add_option("--out,-o", mp.out, "Output prefix (.csv and .pgm)")->required();
    mp_cmd->add_option("--tau", mp.tau, "Report IoU of loss < tau with the non-discordant cells");
    auto* mp_threads = mp_cmd->add_option("--threads", mp.threads, "Worker threads");

    std::string k_ckpt, k_out;
    auto* k_cmd = app.add_subcommand("kernels", "Export effective kernels as CSV");
    k_cmd->add_option("--checkpoint,-c", k_ckpt, "Separator checkpoint")->required();
    k_cmd->add_option("--out,-o", k_out, "CSV path")->required();

    std::string v_data;
    double v_fraction = 1.0;
    unsigned v_threads = 0;
    auto* v_cmd = app.add_subcommand("verify", "Re-run the oracles on a dataset");
    v_cmd->add_option("--data,-d", v_data, "Dataset (QSD1)")->required();
    v_cmd->add_option("--fraction", v_fraction, "Fraction of records to check")->capture_default_str();
    v_cmd->add_option("--threads", v_threads, "Worker threads");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        config.load(config_path);
        if (*gen_cmd) {
            config.fill(gen.seed, gen_seed, "gen", "seed");
            config.fill(gen.threads, gen_threads, "gen", "threads");
            return run_gen(gen);
        }
        if (*tr_cmd) {
            config.fill(tr.epochs, o_epochs, "train", "epochs");
            config.fill(tr.n_k, o_nk, "train", "nk");
            config.fill(tr.fc_depth, o_depth, "train", "fc_depth");
            config.fill(tr.lr, o_lr, "train", "lr");
            config.fill(tr.batch, o_batch, "train", "batch");
            config.fill(tr.lr_decay, o_decay, "train", "lr_decay");
            config.fill(tr.grad_clip, o_clip, "train", "grad_clip");
            config.fill(tr.subset, o_subset, "train", "subset");
            config.fill(tr.activation, o_act, "train", "activation");
            config.fill(tr.optimizer, o_opt, "train", "optimizer");
            config.fill(tr.no_fc, o_nofc, "train", "no_fc");
            config.fill(tr.untie, o_untie, "train", "untie");
            config.fill(tr.seed, o_seed, "train", "seed");
            config.fill(tr.threads, o_threads, "train", "threads");
            return run_train(tr);
        }
        if (*ev_cmd) {
            config.fill(ev.model, ev_model, "eval", "model");
            config.fill(ev.label, ev_label, "eval", "label");
            config.fill(ev.n_taus, ev_ntaus, "eval", "taus");
            config.fill(ev.threads, ev_threads, "eval", "threads");
            return run_eval(ev);
        }
        if (*mp_cmd) {
            config.fill(mp.grid, mp_grid, "map", "grid");
            config.fill(mp.threads, mp_threads, "map", "threads");
            return run_map(mp);
        }
        if (*k_cmd) return run_kernels(k_ckpt, k_out);
        if (*v_cmd) return run_verify(v_data, v_fraction, v_threads);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const FormatError& e) {
        std::cerr << "format error: " << e.what() << '\n';
        return kDataFormat;
    } catch (const DivergenceError& e) {
        std::cerr << "diverged: " << e.what() << '\n';
        return kDivergence;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFailure;
    }
    return kUsage;
}
