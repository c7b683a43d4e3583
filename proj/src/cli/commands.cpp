#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "pid/cli.hpp"
#include "pid/error.hpp"
#include "pid/text_format.hpp"
#include "reference_configs.hpp"

namespace pid::cli {

const char *const kReferenceNaturalConfig = generated::reference_nat;
const char *const kReferenceAdversarialConfig = generated::reference_adv;

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const fs::path &path, const std::string &text) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << text;
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

json histogram_json(const Histogram &h) {
    return json{{"bin_edges", h.bin_edges}, {"counts", h.counts}, {"mean", h.mean},
                {"q05", h.q05},             {"q50", h.q50},       {"q95", h.q95}};
}

void write_pairs(const fs::path &path, const AttackOutcome &o) {
    std::string text;
    for (std::size_t i = 0; i < o.pairs.size(); ++i) {
        text += format_adversarial_pair(o.spec.name + "-" + std::to_string(o.sample_indices[i]), o.pairs[i]);
        text += '\n';
    }
    write_text(path, text);
}

std::string report_stem(const DetectionReport &r) {
    return "report-" + r.config_digest + "-s" + std::to_string(r.seed);
}

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<int> metric;
    std::optional<std::size_t> n;
    std::optional<double> target_fpr;
    std::optional<double> threshold;
};

void add_detector_flags(CLI::App *cmd, Overrides &o) {
    cmd->add_option("--metric", o.metric, "inconsistency metric (1-4)");
    cmd->add_option("--n", o.n, "top-n for metric 3");
    cmd->add_option("--target-fpr", o.target_fpr, "calibration false-positive rate");
    cmd->add_option("--threshold", o.threshold, "fixed decision threshold");
}

// Flags win over file values; everything is re-validated afterwards.
void apply(RunConfig &cfg, const Overrides &o) {
    if (o.seed) cfg.bench.seed = *o.seed;
    if (o.metric) {
        try {
            cfg.detector.metric = metric_from_id(*o.metric);
        } catch (const Error &e) {
            throw ConfigError(std::string("--metric: ") + e.what());
        }
        if (std::find(cfg.bench.metrics.begin(), cfg.bench.metrics.end(), cfg.detector.metric) ==
            cfg.bench.metrics.end()) {
            cfg.bench.metrics.insert(cfg.bench.metrics.begin(), cfg.detector.metric);
        }
    }
    if (o.n) cfg.detector.n = cfg.bench.top_n = *o.n;
    if (o.target_fpr) cfg.detector.target_fpr = cfg.bench.target_fpr = *o.target_fpr;
    if (o.threshold) cfg.detector.threshold = *o.threshold;
    try {
        validate(cfg.detector);
        validate(cfg.bench);
    } catch (const ConfigError &) {
        throw;
    } catch (const Error &e) {
        throw ConfigError(e.what());
    }
}

RunConfig load(const std::string &path, const Overrides &o) {
    RunConfig cfg;
    try {
        cfg = parse_config(path);
    } catch (const IoError &e) {
        // An unreadable config is a config problem as far as the exit code goes.
        throw ConfigError(e.what());
    }
    apply(cfg, o);
    return cfg;
}

double threshold_for(const RunConfig &cfg, const std::vector<PredictionRecord> &calibration) {
    if (cfg.detector.threshold) {
        return *cfg.detector.threshold;
    }
    const auto s = score_records(calibration, cfg.detector.metric, cfg.detector.n);
    return calibrate_threshold(s.clean, cfg.detector.target_fpr);
}

std::string detect_lines(const std::vector<PredictionRecord> &records, const DetectSummary &s, Metric metric) {
    std::string text;
    for (std::size_t i = 0; i < records.size(); ++i) {
        text += "{\"id\":" + text::quote(records[i].id) + ",\"score\":" + text::format_double(s.scores[i]) +
                ",\"decision\":" + text::quote(to_string(s.decisions[i])) + "}\n";
    }
    std::size_t flagged = 0;
    for (Decision d : s.decisions) {
        flagged += d == Decision::adversarial ? 1 : 0;
    }
    text += "{\"summary\":{\"metric\":" + std::to_string(metric_id(metric)) +
            ",\"threshold\":" + text::format_double(s.threshold) +
            ",\"auc\":" + (s.auc ? text::format_double(*s.auc) : std::string("null")) +
            ",\"records\":" + std::to_string(records.size()) + ",\"flagged\":" + std::to_string(flagged) + "}}\n";
    return text;
}

struct Gate {
    std::string name;
    bool passed;
    std::string detail;
};

const ReportRow &row_of(const DetectionReport &r, const std::string &attack, int metric) {
    for (const auto &row : r.rows) {
        if (row.attack_name == attack && row.metric_id == metric) {
            return row;
        }
    }
    throw Error("report has no row for attack '" + attack + "' metric " + std::to_string(metric));
}

std::string pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
    return buf;
}

std::vector<Gate> reference_gates(const DetectionReport &nat, const DetectionReport &adv) {
    std::vector<Gate> gates;
    const double nat_pgd = row_of(nat, "pgd", 1).auc;
    const double adv_pgd = row_of(adv, "pgd", 1).auc;
    const double nat_adaptive = row_of(nat, "adaptive", 1).auc;
    const double adv_m3 = row_of(adv, "pgd", 3).auc;
    const double adv_m4 = row_of(adv, "pgd", 4).auc;
    gates.push_back({"natural primal, pgd, metric 1 AUC >= 90", nat_pgd >= 0.90, pct(nat_pgd)});
    gates.push_back({"adversarial primal, pgd, metric 1 AUC >= 90", adv_pgd >= 0.90, pct(adv_pgd)});
    gates.push_back({"adaptive attack drops metric 1 AUC by >= 5 points", nat_pgd - nat_adaptive >= 0.05,
                     pct(nat_pgd) + " -> " + pct(nat_adaptive)});
    gates.push_back({"adversarial primal, metric 1 >= metric 3 and metric 4", adv_pgd >= adv_m3 && adv_pgd >= adv_m4,
                     pct(adv_pgd) + " vs " + pct(adv_m3) + " / " + pct(adv_m4)});
    return gates;
}

int cmd_train(const std::string &config_path, const std::optional<std::string> &out_flag, const Overrides &o,
              std::ostream &out) {
    const RunConfig cfg = load(config_path, o);
    const fs::path dir = resolve_output_dir(cfg, out_flag);
    const Splits s = make_splits(cfg.bench);
    const Model f = train_model(cfg.bench, ModelRole::primal, s.train);
    const Model g = train_model(cfg.bench, ModelRole::auxiliary, s.train);
    fs::create_directories(dir / "models");
    save_model(dir / "models" / "primal.json", f);
    save_model(dir / "models" / "auxiliary.json", g);
    out << "primal accuracy " << pct(evaluate_accuracy(f, s.test)) << "%, auxiliary accuracy "
        << pct(evaluate_accuracy(g, s.test)) << "%\n";
    const bool transfer = std::any_of(cfg.bench.attacks.begin(), cfg.bench.attacks.end(),
                                      [](const AttackSpec &a) { return a.kind == AttackKind::transfer; });
    if (transfer) {
        save_model(dir / "models" / "substitute.json", train_model(cfg.bench, ModelRole::substitute, s.train));
    }
    out << "models written to " << (dir / "models").string() << "\n";
    return kExitOk;
}

int cmd_attack(const std::string &config_path, const std::optional<std::string> &out_flag, const Overrides &o,
               std::ostream &out) {
    const RunConfig cfg = load(config_path, o);
    const fs::path dir = resolve_output_dir(cfg, out_flag);
    const auto model_at = [&](const std::string &name) {
        const fs::path p = dir / "models" / (name + ".json");
        if (!fs::exists(p)) {
            throw IoError("missing " + p.string() + " (run 'pid train' first)");
        }
        return load_model(p);
    };
    const Splits s = make_splits(cfg.bench);
    const Model f = model_at("primal");
    const Model g = model_at("auxiliary");
    std::optional<Model> sub;
    for (const auto &a : cfg.bench.attacks) {
        if (a.kind == AttackKind::transfer && !sub) sub = model_at("substitute");
    }
    const AttackModels models{&f, &g, sub ? &*sub : nullptr};
    const CleanSelection clean = select_clean(s.test, f, g);
    fs::create_directories(dir / "records");
    for (const auto &spec : cfg.bench.attacks) {
        const AttackOutcome o2 = run_attack(seeded(spec, cfg.bench.seed), models, clean);
        write_pairs(dir / "attacks" / (spec.name + ".jsonl"), o2);
        write_prediction_records(dir / "records" / (spec.name + ".jsonl"), o2.records);
        out << spec.name << ": success rate " << pct(attack_success_rate(f, o2.pairs)) << "% over "
            << o2.pairs.size() << " samples\n";
    }
    return kExitOk;
}

int cmd_detect(const std::string &records_path, const std::optional<std::string> &calibration_path,
               const std::optional<std::string> &out_path, const Overrides &o, std::ostream &out) {
    DetectorConfig det;
    if (o.metric) {
        try {
            det.metric = metric_from_id(*o.metric);
        } catch (const Error &e) {
            throw ConfigError(std::string("--metric: ") + e.what());
        }
    }
    if (o.n) det.n = *o.n;
    if (o.target_fpr) det.target_fpr = *o.target_fpr;
    det.threshold = o.threshold;
    try {
        validate(det);
    } catch (const Error &e) {
        throw ConfigError(e.what());
    }
    const auto records = load_prediction_records(records_path);
    std::vector<PredictionRecord> calibration;
    if (calibration_path) {
        calibration = load_prediction_records(*calibration_path);
    }
    const DetectSummary s = detect_records(records, det, calibration_path ? &calibration : nullptr);
    const std::string text = detect_lines(records, s, det.metric);
    if (out_path) {
        write_text(*out_path, text);
        out << "auc " << (s.auc ? text::format_double(*s.auc) : std::string("n/a")) << "\n";
    } else {
        out << text;
    }
    return kExitOk;
}

int cmd_evaluate(const std::string &config_path, const std::optional<std::string> &out_flag, const Overrides &o,
                 std::ostream &out) {
    const RunConfig cfg = load(config_path, o);
    const auto art = run_pipeline(cfg, resolve_output_dir(cfg, out_flag));
    out << format_report_table(art.report);
    out << "report: " << art.report_json.string() << "\n";
    return kExitOk;
}

int cmd_reproduce(const std::optional<std::string> &out_flag, std::ostream &out) {
    RunConfig nat = parse_config_text(kReferenceNaturalConfig);
    RunConfig adv = parse_config_text(kReferenceAdversarialConfig);
    const fs::path dir = resolve_output_dir(nat, out_flag);

    const auto nat_art = run_pipeline(nat, dir / "natural");
    out << "== naturally trained primal ==\n" << format_report_table(nat_art.report) << "\n";
    const auto adv_art = run_pipeline(adv, dir / "adversarial");
    out << "== adversarially trained primal ==\n" << format_report_table(adv_art.report) << "\n";

    bool ok = true;
    std::string summary;
    for (const auto &g : reference_gates(nat_art.report, adv_art.report)) {
        ok = ok && g.passed;
        summary += std::string(g.passed ? "PASS " : "FAIL ") + g.name + " (" + g.detail + ")\n";
    }
    write_text(dir / "gates.txt", summary);
    out << summary;
    return ok ? kExitOk : kExitGate;
}

} // namespace

PipelineArtifacts run_pipeline(const RunConfig &cfg, const fs::path &out_dir) {
    // Nothing touches the disk until the config has been checked.
    try {
        validate(cfg.detector);
        validate(cfg.bench);
    } catch (const ConfigError &) {
        throw;
    } catch (const Error &e) {
        throw ConfigError(e.what());
    }

    fs::create_directories(out_dir);
    const fs::path sentinel = out_dir / "INCOMPLETE";
    write_text(sentinel, "pipeline started\n");

    try {
        const BenchmarkResult r = benchmark_run(cfg.bench);
        write_text(out_dir / "config.resolved.json", to_json(cfg).dump(2) + "\n");
        for (const char *sub : {"models", "records", "attacks"}) {
            fs::create_directories(out_dir / sub);
        }

        save_model(out_dir / "models" / "primal.json", r.primal);
        save_model(out_dir / "models" / "auxiliary.json", r.auxiliary);
        if (r.substitute) {
            save_model(out_dir / "models" / "substitute.json", *r.substitute);
        }

        write_prediction_records(out_dir / "records" / "calibration.jsonl", r.calibration_records);
        json analysis = json::array();
        for (const auto &o : r.attacks) {
            write_pairs(out_dir / "attacks" / (o.spec.name + ".jsonl"), o);
            write_prediction_records(out_dir / "records" / (o.spec.name + ".jsonl"), o.records);
            json entry{{"attack", o.spec.name}, {"clean_aux_confidence", histogram_json(o.clean_aux_confidence)}};
            if (o.adv_aux_confidence) {
                entry["adversarial_aux_confidence"] = histogram_json(*o.adv_aux_confidence);
            }
            analysis.push_back(std::move(entry));
        }
        write_text(out_dir / "analysis.json", json{{"attacks", analysis}}.dump(2) + "\n");

        const double threshold = threshold_for(cfg, r.calibration_records);
        const auto cal = score_records(r.calibration_records, cfg.detector.metric, cfg.detector.n);
        const json calibration{{"metric", metric_id(cfg.detector.metric)},
                               {"n", cfg.detector.n},
                               {"target_fpr", cfg.detector.target_fpr},
                               {"threshold", threshold},
                               {"source", cfg.detector.threshold ? "config" : "calibration"},
                               {"calibration_fpr", flagged_fraction(cal.clean, threshold)},
                               {"n_calibration", cal.clean.size()}};
        write_text(out_dir / "calibration.json", calibration.dump(2) + "\n");

        PipelineArtifacts art;
        art.report = r.report;
        art.report_json = out_dir / (report_stem(r.report) + ".json");
        art.report_table = out_dir / (report_stem(r.report) + ".txt");
        write_text(art.report_json, format_report_json(r.report));
        write_text(art.report_table, format_report_table(r.report));
        fs::remove(sentinel);
        return art;
    } catch (const std::exception &e) {
        std::ofstream(sentinel, std::ios::app) << "failed: " << e.what() << "\n";
        throw;
    }
}

DetectSummary detect_records(const std::vector<PredictionRecord> &records, const DetectorConfig &detector,
                             const std::vector<PredictionRecord> *calibration) {
    validate(detector);
    if (records.empty()) {
        throw ParameterError("detect: no records");
    }
    const auto scored = score_records(records, detector.metric, detector.n);
    DetectSummary s;
    s.scores = scored.all;
    if (detector.threshold) {
        s.threshold = *detector.threshold;
    } else {
        const auto cal = calibration ? score_records(*calibration, detector.metric, detector.n).clean : scored.clean;
        if (cal.empty()) {
            throw ParameterError("detect: no clean records to calibrate on; pass a threshold");
        }
        s.threshold = calibrate_threshold(cal, detector.target_fpr);
    }
    for (std::size_t i = 0; i < records.size(); ++i) {
        s.decisions.push_back(decide(InconsistencyScore{s.scores[i], detector.metric, std::nullopt}, s.threshold));
    }
    if (!scored.adv.empty() && !scored.clean.empty()) {
        s.auc = auc(scored.adv, scored.clean);
    }
    return s;
}

int run(int argc, char **argv, std::ostream &out, std::ostream &err) {
    CLI::App app{"Prediction inconsistency detector toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::string> out_flag;
    Overrides o;

    auto *train = app.add_subcommand("train", "train the primal and auxiliary models");
    auto *attack = app.add_subcommand("attack", "craft adversarial examples against trained models");
    auto *evaluate = app.add_subcommand("evaluate", "run the full pipeline and write a detection report");
    for (auto *cmd : {train, attack, evaluate}) {
        cmd->add_option("--config", config_path, "config file")->required();
        cmd->add_option("--out", out_flag, "output directory");
        cmd->add_option("--seed", o.seed, "global seed");
    }
    add_detector_flags(evaluate, o);

    std::string records_path;
    std::optional<std::string> calibration_path;
    auto *detect = app.add_subcommand("detect", "score a prediction-record file");
    detect->add_option("--records", records_path, "prediction-record file")->required();
    detect->add_option("--calibration", calibration_path, "records used to calibrate the threshold");
    detect->add_option("--out", out_flag, "write per-record decisions here");
    add_detector_flags(detect, o);

    auto *reproduce = app.add_subcommand("reproduce", "run the built-in reference study and check its gates");
    reproduce->add_option("--out", out_flag, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*train) return cmd_train(config_path, out_flag, o, out);
        if (*attack) return cmd_attack(config_path, out_flag, o, out);
        if (*evaluate) return cmd_evaluate(config_path, out_flag, o, out);
        if (*detect) return cmd_detect(records_path, calibration_path, out_flag, o, out);
        return cmd_reproduce(out_flag, out);
    } catch (const ConfigError &e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception &e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

} // namespace pid::cli
