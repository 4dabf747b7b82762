#include "qsep/dataset.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <stdexcept>

#include "qsep/errors.hpp"
#include "qsep/parallel.hpp"
#include "qsep/states.hpp"

namespace qsep {

namespace {

constexpr std::array<char, 4> kMagic{'Q', 'S', 'D', '1'};

void put_u16(std::string& buf, std::uint16_t v) {
    for (int i = 0; i < 2; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u32(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_f64(std::string& buf, double d) {
    const auto v = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_le(const std::string& buf, std::size_t off, int n) {
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[off + i])) << (8 * i);
    return v;
}

// Sources the composite dataset kinds draw from.
enum class Source {
    HaarProduct,
    CircuitProduct,
    MixedProduct,
    DephasedProduct,
    ZeroDiscord,
    DiscordantSeparable,
    HaarEntangled,
    CircuitEntangled,
    MixedEntangled,
};

struct Share {
    Source source;
    double weight;
};

std::vector<Share> composition(DatasetKind kind) {
    using enum Source;
    switch (kind) {
        case DatasetKind::PureSep: return {{HaarProduct, 0.5}, {CircuitProduct, 0.5}};
        case DatasetKind::PureEnt: return {{HaarEntangled, 0.5}, {CircuitEntangled, 0.5}};
        case DatasetKind::MixedSep: return {{DiscordantSeparable, 1.0}};
        case DatasetKind::MixedEnt: return {{MixedEntangled, 1.0}};
        case DatasetKind::ZeroDiscord: return {{ZeroDiscord, 1.0}};
        case DatasetKind::Product: return {{HaarProduct, 0.5}, {MixedProduct, 0.5}};
        case DatasetKind::SPure:
            return {{HaarProduct, 0.25}, {CircuitProduct, 0.25}, {HaarEntangled, 0.25}, {CircuitEntangled, 0.25}};
        case DatasetKind::SMixed:
            // the non-discordant share is mostly mixed product states
            return {{MixedProduct, 0.36}, {ZeroDiscord, 0.04}, {DiscordantSeparable, 0.27}, {MixedEntangled, 0.33}};
        case DatasetKind::Train:
        case DatasetKind::Val:
            return {{HaarProduct, 0.18},     {CircuitProduct, 0.18}, {MixedProduct, 0.115},
                    {DephasedProduct, 0.115}, {ZeroDiscord, 0.19},    {DiscordantSeparable, 0.22}};
    }
    return {};
}

Source source_for(const std::vector<Share>& shares, std::size_t i, std::size_t count) {
    double cum = 0.0;
    for (const auto& s : shares) {
        cum += s.weight;
        if (i < static_cast<std::size_t>(std::llround(cum * static_cast<double>(count)))) return s.source;
    }
    return shares.back().source;
}

Record draw(Source source, Rng& rng) {
    CMatrix rho;
    bool separable = true;
    switch (source) {
        case Source::HaarProduct: rho = random_separable_pure(rng).density(); break;
        case Source::CircuitProduct:
            rho = random_circuit_state(kQubits, kDefaultCircuitDepth, false, rng).density();
            break;
        case Source::MixedProduct: rho = random_mixed_product(rng); break;
        case Source::DephasedProduct: {
            auto p = ParameterizedGenParams::sample(rng);
            p.phases = {0.0, 0.0, 0.0};
            rho = parameterized_mixed(p);
            break;
        }
        case Source::ZeroDiscord: rho = random_zero_discord(rng); break;
        case Source::DiscordantSeparable: rho = random_discordant_separable(rng); break;
        case Source::HaarEntangled:
            separable = false;
            rho = haar_random_pure(kQubits, rng).density();
            break;
        case Source::CircuitEntangled:
            separable = false;
            do {
                rho = random_circuit_state(kQubits, kDefaultCircuitDepth, true, rng).density();
            } while (max_negativity(rho) <= 1e-6);
            break;
        case Source::MixedEntangled:
            separable = false;
            rho = random_mixed_entangled(rng);
            break;
    }
    StateLabel label = separable ? classify(rho, true) : classify(rho);
    return {std::move(rho), label};
}

Rng record_rng(std::uint64_t seed, DatasetKind kind, std::size_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(kind), static_cast<std::uint32_t>(index),
                      static_cast<std::uint32_t>(static_cast<std::uint64_t>(index) >> 32)};
    return Rng(seq);
}

std::size_t scaled(double scale, std::size_t full) {
    if (!(scale > 0.0 && scale <= 1.0)) throw std::invalid_argument("scale must be in (0, 1]");
    return static_cast<std::size_t>(std::llround(scale * static_cast<double>(full)));
}

}  // namespace

std::array<std::size_t, 4> Dataset::class_counts() const {
    std::array<std::size_t, 4> c{};
    for (const auto& r : records) ++c[static_cast<std::size_t>(r.label.klass)];
    return c;
}

std::vector<CMatrix> Dataset::states() const {
    std::vector<CMatrix> s;
    s.reserve(records.size());
    for (const auto& r : records) s.push_back(r.rho);
    return s;
}

std::vector<StateLabel> Dataset::labels() const {
    std::vector<StateLabel> l;
    l.reserve(records.size());
    for (const auto& r : records) l.push_back(r.label);
    return l;
}

void write_qsd1(const std::filesystem::path& path, const Dataset& data) {
    std::string buf;
    buf.reserve(kQsdHeaderBytes + data.size() * kQsdRecordBytes);
    buf.append(kMagic.data(), kMagic.size());
    put_u32(buf, kQsdVersion);
    buf.push_back(static_cast<char>(3));
    put_u32(buf, static_cast<std::uint32_t>(data.size()));
    for (const auto& r : data.records) {
        if (r.rho.dim() != 8) throw std::invalid_argument("write_qsd1: record is not 8x8");
        for (auto z : r.rho.data()) {
            put_f64(buf, z.real());
            put_f64(buf, z.imag());
        }
        put_u16(buf, r.label.bits());
    }
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + path.string());
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (!out) throw std::runtime_error("failed writing " + path.string());
    }
    std::filesystem::rename(tmp, path);
}

Dataset read_qsd1(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open dataset " + path.string());
    const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (buf.size() < kQsdHeaderBytes) throw FormatError("QSD1 header truncated", buf.size());
    if (!std::equal(kMagic.begin(), kMagic.end(), buf.begin())) throw FormatError("bad magic, expected QSD1", 0);
    if (get_le(buf, 4, 4) != kQsdVersion) throw FormatError("unsupported QSD1 version " + std::to_string(get_le(buf, 4, 4)), 4);
    if (get_le(buf, 8, 1) != 3) throw FormatError("unsupported qubit count " + std::to_string(get_le(buf, 8, 1)), 8);
    const std::uint64_t count = get_le(buf, 9, 4);
    const std::uint64_t expected = kQsdHeaderBytes + count * kQsdRecordBytes;
    if (buf.size() < expected) {
        const std::uint64_t complete = (buf.size() - kQsdHeaderBytes) / kQsdRecordBytes;
        throw FormatError("truncated record " + std::to_string(complete) + " of " + std::to_string(count),
                          kQsdHeaderBytes + complete * kQsdRecordBytes);
    }
    if (buf.size() > expected) throw FormatError("trailing bytes after last record", expected);

    Dataset data;
    data.records.reserve(count);
    std::size_t off = kQsdHeaderBytes;
    for (std::uint64_t r = 0; r < count; ++r) {
        CMatrix rho(8);
        for (std::size_t i = 0; i < 64; ++i) {
            const double re = std::bit_cast<double>(get_le(buf, off, 8));
            const double im = std::bit_cast<double>(get_le(buf, off + 8, 8));
            if (!std::isfinite(re) || !std::isfinite(im)) throw FormatError("non-finite matrix entry", off);
            rho.data()[i] = {re, im};
            off += 16;
        }
        StateLabel label;
        try {
            label = StateLabel::from_bits(static_cast<std::uint16_t>(get_le(buf, off, 2)));
        } catch (const std::invalid_argument& e) {
            throw FormatError(e.what(), off);
        }
        off += 2;
        data.records.push_back({std::move(rho), label});
    }
    return data;
}

void write_csv(const std::filesystem::path& path, const Dataset& data) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.precision(17);
    out << "index,klass,bits";
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) out << ",re_" << i << j << ",im_" << i << j;
    out << '\n';
    for (std::size_t r = 0; r < data.size(); ++r) {
        const auto& rec = data.records[r];
        out << r << ',' << to_string(rec.label.klass) << ',' << rec.label.bits();
        for (auto z : rec.rho.data()) out << ',' << z.real() << ',' << z.imag();
        out << '\n';
    }
}

std::vector<std::size_t> verify_labels(const Dataset& data, double fraction, unsigned threads) {
    if (data.empty()) return {};
    const auto n_check = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(data.size()))), 1, data.size());
    const double stride = static_cast<double>(data.size()) / static_cast<double>(n_check);
    std::vector<char> bad(n_check, 0);
    std::vector<std::size_t> idx(n_check);
    for (std::size_t k = 0; k < n_check; ++k) idx[k] = static_cast<std::size_t>(static_cast<double>(k) * stride);
    parallel_for(n_check, threads, [&](std::size_t k) {
        const auto& rec = data.records[idx[k]];
        const auto relabel = rec.label.separable() ? classify(rec.rho, true) : classify(rec.rho);
        bad[k] = relabel.bits() != rec.label.bits();
    });
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < n_check; ++k)
        if (bad[k]) out.push_back(idx[k]);
    return out;
}

std::optional<DatasetKind> dataset_kind_from_string(std::string_view s) {
    for (auto k : {DatasetKind::PureSep, DatasetKind::PureEnt, DatasetKind::MixedSep, DatasetKind::MixedEnt,
                   DatasetKind::ZeroDiscord, DatasetKind::Product, DatasetKind::SPure, DatasetKind::SMixed,
                   DatasetKind::Train, DatasetKind::Val})
        if (to_string(k) == s) return k;
    return std::nullopt;
}

std::string_view to_string(DatasetKind k) {
    switch (k) {
        case DatasetKind::PureSep: return "pure-sep";
        case DatasetKind::PureEnt: return "pure-ent";
        case DatasetKind::MixedSep: return "mixed-sep";
        case DatasetKind::MixedEnt: return "mixed-ent";
        case DatasetKind::ZeroDiscord: return "zd";
        case DatasetKind::Product: return "product";
        case DatasetKind::SPure: return "s-pure";
        case DatasetKind::SMixed: return "s-mixed";
        case DatasetKind::Train: return "train";
        case DatasetKind::Val: return "val";
    }
    return "unknown";
}

Dataset generate(DatasetKind kind, std::size_t count, std::uint64_t seed, unsigned threads) {
    const auto shares = composition(kind);
    Dataset data;
    data.meta = {std::string(to_string(kind)), seed};
    data.records.resize(count);
    constexpr std::size_t kBlock = 256;
    parallel_for((count + kBlock - 1) / kBlock, threads, [&](std::size_t block) {
        const std::size_t hi = std::min(count, (block + 1) * kBlock);
        for (std::size_t i = block * kBlock; i < hi; ++i) {
            Rng rng = record_rng(seed, kind, i);
            data.records[i] = draw(source_for(shares, i, count), rng);
        }
    });
    return data;
}

TrainingSets build_training_sets(double scale, std::uint64_t seed, unsigned threads) {
    const std::size_t n_train = scaled(scale, kFullTrainSize);
    const std::size_t n_val = scaled(scale, kFullValSize);
    return {generate(DatasetKind::Train, n_train, seed, threads), generate(DatasetKind::Val, n_val, seed, threads)};
}

TestSets build_test_sets(double scale, std::uint64_t seed, unsigned threads) {
    return {generate(DatasetKind::SPure, scaled(scale, kFullPureTestSize), seed, threads),
            generate(DatasetKind::SMixed, scaled(scale, kFullMixedTestSize), seed, threads)};
}

std::optional<TrainSubset> train_subset_from_string(std::string_view s) {
    for (auto k : {TrainSubset::Pure, TrainSubset::Prod, TrainSubset::ZD, TrainSubset::Sep, TrainSubset::NPS})
        if (to_string(k) == s) return k;
    return std::nullopt;
}

std::string_view to_string(TrainSubset s) {
    switch (s) {
        case TrainSubset::Pure: return "Pure";
        case TrainSubset::Prod: return "Prod";
        case TrainSubset::ZD: return "ZD";
        case TrainSubset::Sep: return "Sep";
        case TrainSubset::NPS: return "NPS";
    }
    return "unknown";
}

bool in_subset(const Record& r, TrainSubset subset) {
    if (!r.label.separable()) return false;
    switch (subset) {
        case TrainSubset::Pure: return r.label.klass == StateClass::Product && r.rho.purity() > 1.0 - 1e-9;
        case TrainSubset::Prod: return r.label.klass == StateClass::Product;
        case TrainSubset::ZD: return r.label.zero_discord();
        case TrainSubset::Sep: return true;
        case TrainSubset::NPS: return r.label.klass != StateClass::Product;
    }
    return false;
}

Dataset filter_subset(const Dataset& data, TrainSubset subset) {
    Dataset out;
    out.meta = data.meta;
    out.meta.generator_mix += "/" + std::string(to_string(subset));
    for (const auto& r : data.records)
        if (in_subset(r, subset)) out.records.push_back(r);
    return out;
}

}  // namespace qsep
