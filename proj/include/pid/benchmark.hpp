#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pid/batch.hpp"
#include "pid/datasets.hpp"
#include "pid/detector.hpp"
#include "pid/eval.hpp"
#include "pid/models.hpp"

namespace pid {

struct DatasetSpec {
    GeneratorKind kind = GeneratorKind::blobs;
    std::size_t k = 3;
    std::size_t d = 8;
    std::size_t n_per_class = 500;
    double separation = 4.0;
    std::array<double, 3> split{0.5, 0.25, 0.25};  // train, calibrate, test
};

struct ModelSpec {
    ArchKind kind = ArchKind::mlp;
    std::vector<std::size_t> hidden{32};
    Activation activation = Activation::relu;
    TrainingMode mode = TrainingMode::natural;
    std::size_t epochs = 50;
    std::size_t batch_size = 32;
    double learning_rate = 0.1;
    double weight_decay = 5e-4;
    // Inner attack for adversarial training.
    AttackConfig adversarial = default_training_attack();

    static AttackConfig default_training_attack() {
        AttackConfig a;
        a.epsilon = 0.1;
        a.step_size = 0.025;
        a.iterations = 10;
        a.random_init = true;
        return a;
    }
};

Architecture architecture_for(const ModelSpec &spec, std::size_t d, std::size_t k);
TrainConfig train_config_for(const ModelSpec &spec, std::uint64_t seed);

struct BenchmarkConfig {
    DatasetSpec dataset;
    ModelSpec primal;
    ModelSpec auxiliary;
    std::vector<AttackSpec> attacks;  // cfg.seed is overwritten from `seed`
    std::vector<Metric> metrics{Metric::label_confidence};
    std::size_t top_n = 3;
    double target_fpr = 0.05;
    std::uint64_t seed = 0;
};

void validate(const BenchmarkConfig &cfg);

// Canonical JSON form; the config digest hashes its dump.
nlohmann::json to_json(const BenchmarkConfig &cfg);
std::string config_digest(const BenchmarkConfig &cfg);

struct ReportRow {
    std::string attack_name;
    double epsilon = 0.0;
    int metric_id = 1;
    double auc = 0.0;
    double asr = 0.0;
    double threshold = 0.0;
    double empirical_fpr = 0.0;
    double tpr_at_threshold = 0.0;
    std::size_t n_adv = 0;
    std::size_t n_clean = 0;
};

struct DetectionReport {
    std::vector<ReportRow> rows;
    std::uint64_t seed = 0;
    std::string config_digest;
    double primal_accuracy = 0.0;
    double auxiliary_accuracy = 0.0;
};

std::string format_report_json(const DetectionReport &report);
// Aligned plain-text table, percentages to 2 decimals.
std::string format_report_table(const DetectionReport &report);

struct AttackOutcome {
    AttackSpec spec;
    std::vector<std::uint64_t> sample_indices;  // positions in the test split
    std::vector<AdversarialPair> pairs;         // every attacked sample
    std::vector<PredictionRecord> records;      // clean test NEs, then successful AEs
    Histogram clean_aux_confidence;             // g_y on NEs, y = primal label
    std::optional<Histogram> adv_aux_confidence;
};

struct BenchmarkResult {
    DetectionReport report;
    Dataset train;
    Dataset calibrate;
    Dataset test;
    Model primal;
    Model auxiliary;
    std::optional<Model> substitute;
    std::vector<PredictionRecord> calibration_records;
    std::vector<AttackOutcome> attacks;
};

struct Splits {
    Dataset train;
    Dataset calibrate;
    Dataset test;
};

// Generates the dataset and splits it; both draw from `seed` sub-streams.
Splits make_splits(const BenchmarkConfig &cfg);

enum class ModelRole { primal, auxiliary, substitute };

std::string to_string(ModelRole role);

// Trains the model for `role` on the train split. The substitute uses the
// primal recipe with its own seed stream.
Model train_model(const BenchmarkConfig &cfg, ModelRole role, const Dataset &train_set);

// Test samples the primal classifies correctly, with their clean records.
struct CleanSelection {
    std::vector<Example> samples;
    std::vector<std::uint64_t> indices;  // positions in the test split
    std::vector<PredictionRecord> records;
};

CleanSelection select_clean(const Dataset &test, const Model &primal, const Model &auxiliary);

// Attack spec with its seed drawn from the global seed and attack name.
AttackSpec seeded(const AttackSpec &spec, std::uint64_t global_seed);

// Crafts AEs for every selected sample and builds the record list (clean
// NEs first, then AEs that fool the primal).
AttackOutcome run_attack(const AttackSpec &spec, const AttackModels &models, const CleanSelection &clean);

// Scores a record list: adversarial and clean scores in file order.
struct RecordScores {
    std::vector<double> adv;
    std::vector<double> clean;
    std::vector<double> all;  // aligned with the input records
};
RecordScores score_records(const std::vector<PredictionRecord> &records, Metric metric, std::size_t n);

// End-to-end desk-scale study: data, primal and auxiliary training, attacks
// on correctly classified test samples, scoring, calibration and one report
// row per (attack, metric). Failures are rethrown as StageError.
BenchmarkResult benchmark_run(const BenchmarkConfig &cfg);

} // namespace pid
