#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pid/benchmark.hpp"
#include "pid/detector.hpp"

namespace pid::cli {

struct RunConfig {
    BenchmarkConfig bench;
    DetectorConfig detector;
    std::optional<std::filesystem::path> output_dir;
};

// Strict schema: unknown keys and type mismatches raise ConfigError naming
// the key path; "seed" is mandatory.
RunConfig parse_config_text(const std::string &text);
RunConfig parse_config(const std::filesystem::path &path);

// Resolved configuration as written next to the artifacts.
nlohmann::json to_json(const RunConfig &cfg);

// --out flag, then output_dir from the file, then $PID_OUT_DIR, then "pid-out".
std::filesystem::path resolve_output_dir(const RunConfig &cfg, const std::optional<std::string> &flag);

struct PipelineArtifacts {
    std::filesystem::path report_json;
    std::filesystem::path report_table;
    DetectionReport report;
};

// Runs benchmark_run and writes models, adversarial pairs, prediction
// records, calibration, analysis and report under `out_dir`. An INCOMPLETE
// sentinel marks the directory until every artifact is written.
PipelineArtifacts run_pipeline(const RunConfig &cfg, const std::filesystem::path &out_dir);

struct DetectSummary {
    double threshold = 0.0;
    std::optional<double> auc;
    std::vector<double> scores;
    std::vector<Decision> decisions;
};

// Scores every record with `detector.metric`. The threshold comes from the
// config, else calibration on `calibration` records, else on the clean
// records of the input itself.
DetectSummary detect_records(const std::vector<PredictionRecord> &records, const DetectorConfig &detector,
                             const std::vector<PredictionRecord> *calibration);

// Built-in reference study; the same documents ship under configs/.
extern const char *const kReferenceNaturalConfig;
extern const char *const kReferenceAdversarialConfig;

enum ExitCode : int {
    kExitOk = 0,
    kExitConfig = 1,
    kExitRuntime = 2,
    kExitGate = 3,
};

int run(int argc, char **argv, std::ostream &out, std::ostream &err);

} // namespace pid::cli
