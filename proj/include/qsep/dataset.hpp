#pragma once

// Labeled state collections, their generators, and the QSD1 binary format.
//
// QSD1 layout (little-endian):
//   "QSD1" | u32 version = 1 | u8 n_qubits = 3 | u32 record count
//   per record: 128 x f64 (8x8 row-major, interleaved re, im) | u16 label bits

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qsep/linalg.hpp"
#include "qsep/oracles.hpp"

namespace qsep {

struct Record {
    CMatrix rho;
    StateLabel label;
};

struct DatasetMeta {
    std::string generator_mix;
    std::uint64_t seed = 0;
};

struct Dataset {
    std::vector<Record> records;
    DatasetMeta meta;

    std::size_t size() const { return records.size(); }
    bool empty() const { return records.empty(); }
    /// Record count per StateClass, indexed by the enum value.
    std::array<std::size_t, 4> class_counts() const;
    std::vector<CMatrix> states() const;
    std::vector<StateLabel> labels() const;
};

inline constexpr std::uint32_t kQsdVersion = 1;
inline constexpr std::size_t kQsdHeaderBytes = 13;
inline constexpr std::size_t kQsdRecordBytes = 128 * 8 + 2;

void write_qsd1(const std::filesystem::path& path, const Dataset& data);
/// Throws FormatError (with byte offset) on a bad magic, version, qubit count,
/// truncated content, non-finite entry or inconsistent label.
Dataset read_qsd1(const std::filesystem::path& path);

/// Columns: index, klass, bits, then re_ij, im_ij for the 64 entries.
void write_csv(const std::filesystem::path& path, const Dataset& data);

/// Re-runs the oracles on `fraction` of the records (at least one, evenly
/// strided) and returns the indices whose stored label disagrees.
std::vector<std::size_t> verify_labels(const Dataset& data, double fraction, unsigned threads = 1);

// ---------------------------------------------------------------------------
// Generation

enum class DatasetKind { PureSep, PureEnt, MixedSep, MixedEnt, ZeroDiscord, Product, SPure, SMixed, Train, Val };

std::optional<DatasetKind> dataset_kind_from_string(std::string_view s);
std::string_view to_string(DatasetKind k);

/// `count` labeled records of the given kind. Record i is drawn from its own
/// stream seeded by (seed, kind, i), so output is independent of threading.
Dataset generate(DatasetKind kind, std::size_t count, std::uint64_t seed, unsigned threads = 1);

/// Training composition: ~36% pure separable, ~23% mixed product,
/// ~19% non-product zero-discord, remainder discordant separable.
struct TrainingSets {
    Dataset train;
    Dataset val;
};
inline constexpr std::size_t kFullTrainSize = 530000;
inline constexpr std::size_t kFullValSize = 50000;
inline constexpr std::size_t kFullPureTestSize = 30000;
inline constexpr std::size_t kFullMixedTestSize = 65000;

/// Sizes round(scale * 530000) and round(scale * 50000); scale in (0, 1].
TrainingSets build_training_sets(double scale, std::uint64_t seed, unsigned threads = 1);

struct TestSets {
    Dataset s_pure;
    Dataset s_mixed;
};
/// Balanced pure separable/entangled set and the four-class mixed set.
TestSets build_test_sets(double scale, std::uint64_t seed, unsigned threads = 1);

enum class TrainSubset { Pure, Prod, ZD, Sep, NPS };
std::optional<TrainSubset> train_subset_from_string(std::string_view s);
std::string_view to_string(TrainSubset s);

bool in_subset(const Record& r, TrainSubset subset);
Dataset filter_subset(const Dataset& data, TrainSubset subset);

}  // namespace qsep
