#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <tuple>
#include <vector>

namespace pid {

using FeatureVector = std::vector<double>;
using ConfidenceVector = std::vector<double>;

struct Example {
    FeatureVector x;
    std::size_t y_true = 0;

    bool operator==(const Example &) const = default;
};

struct Dataset {
    std::string name;
    std::size_t k = 0;
    std::size_t d = 0;
    std::vector<Example> examples;

    std::size_t size() const { return examples.size(); }
    bool empty() const { return examples.empty(); }

    bool operator==(const Dataset &) const = default;
};

enum class GeneratorKind { blobs, rings };

GeneratorKind parse_generator_kind(const std::string &s);
std::string to_string(GeneratorKind kind);

// Blobs: unit-variance isotropic Gaussian clusters whose centers sit
// `separation` apart. Rings: concentric annuli in the first two dims with
// radius (c+1)*separation. Both are rescaled by one global affine map into
// [0,1]^d. Pure function of the arguments.
Dataset gen_synthetic(GeneratorKind kind, std::size_t k, std::size_t d, std::size_t n_per_class,
                      double separation, std::uint64_t seed);

// Seeded shuffle then largest-remainder apportionment of the fractions.
std::tuple<Dataset, Dataset, Dataset> split(const Dataset &ds, const std::array<double, 3> &fractions,
                                            std::uint64_t seed);

// Sizes used by split(); exposed for tests.
std::array<std::size_t, 3> apportion(std::size_t n, const std::array<double, 3> &fractions);

// Checks the Example/Dataset invariants; throws ValidationError.
void validate(const Dataset &ds);

struct PredictionRecord {
    std::string id;
    std::size_t y_true = 0;
    ConfidenceVector f_scores;
    ConfidenceVector g_scores;
    bool is_adversarial = false;

    bool operator==(const PredictionRecord &) const = default;
};

// Line-delimited JSON. An optional first line {"k": K} fixes the class count.
std::vector<PredictionRecord> load_prediction_records(const std::filesystem::path &path);
void write_prediction_records(const std::filesystem::path &path, const std::vector<PredictionRecord> &records);

std::string format_prediction_record(const PredictionRecord &record);

} // namespace pid
