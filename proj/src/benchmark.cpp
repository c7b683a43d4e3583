#include "pid/benchmark.hpp"

#include <cstdio>
#include <sstream>

#include "pid/error.hpp"
#include "pid/rng.hpp"

namespace pid {

Architecture architecture_for(const ModelSpec &spec, std::size_t d, std::size_t k) {
    Architecture arch = spec.kind == ArchKind::linear ? linear_arch(d, k) : mlp_arch(d, spec.hidden, k, spec.activation);
    validate(arch);
    return arch;
}

TrainConfig train_config_for(const ModelSpec &spec, std::uint64_t seed) {
    TrainConfig cfg;
    cfg.epochs = spec.epochs;
    cfg.batch_size = spec.batch_size;
    cfg.learning_rate = spec.learning_rate;
    cfg.weight_decay = spec.weight_decay;
    cfg.seed = seed;
    if (spec.mode == TrainingMode::adversarial) {
        cfg.adversarial = spec.adversarial;
    }
    return cfg;
}

void validate(const BenchmarkConfig &cfg) {
    const auto &ds = cfg.dataset;
    if (ds.k < 2 || ds.d < 2 || ds.n_per_class < 1 || !(ds.separation > 0.0)) {
        throw ParameterError("dataset: need k >= 2, d >= 2, n_per_class >= 1, separation > 0");
    }
    apportion(ds.k * ds.n_per_class, ds.split);
    for (const ModelSpec *spec : {&cfg.primal, &cfg.auxiliary}) {
        architecture_for(*spec, ds.d, ds.k);
        validate(train_config_for(*spec, 0));
    }
    for (const auto &a : cfg.attacks) {
        if (a.name.empty()) {
            throw ParameterError("attack name must not be empty");
        }
        validate(a.cfg);
        if (a.kind == AttackKind::random_search && a.cfg.query_budget < 1) {
            throw ParameterError("attack '" + a.name + "': random_search needs query_budget >= 1");
        }
        if (a.cfg.targeted) {
            throw ParameterError("attack '" + a.name + "': fixed targets are not supported in a benchmark");
        }
    }
    for (std::size_t i = 0; i < cfg.attacks.size(); ++i) {
        for (std::size_t j = i + 1; j < cfg.attacks.size(); ++j) {
            if (cfg.attacks[i].name == cfg.attacks[j].name) {
                throw ParameterError("duplicate attack name '" + cfg.attacks[i].name + "'");
            }
        }
    }
    if (cfg.metrics.empty()) {
        throw ParameterError("at least one metric is required");
    }
    for (Metric m : cfg.metrics) {
        metric_from_id(metric_id(m));
        if (m == Metric::top_n_l1 && (cfg.top_n < 1 || cfg.top_n > ds.k)) {
            throw ParameterError("metric 3 needs 1 <= n <= k");
        }
    }
    if (!(cfg.target_fpr > 0.0 && cfg.target_fpr < 1.0)) {
        throw ParameterError("target_fpr must lie in (0,1)");
    }
}

namespace {

// Key names follow the config file schema so the canonical form reads back.
nlohmann::json attack_json(const AttackConfig &c) {
    return {{"epsilon", c.epsilon},
            {"step_size", c.step_size},
            {"iterations", c.iterations},
            {"random_init", c.random_init}};
}

nlohmann::json model_json(const ModelSpec &m) {
    return {{"arch", {{"kind", to_string(m.kind)}, {"hidden", m.hidden}, {"activation", to_string(m.activation)}}},
            {"training",
             {{"mode", to_string(m.mode)},
              {"epochs", m.epochs},
              {"batch_size", m.batch_size},
              {"learning_rate", m.learning_rate},
              {"weight_decay", m.weight_decay},
              {"adversarial", attack_json(m.adversarial)}}}};
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

} // namespace

nlohmann::json to_json(const BenchmarkConfig &cfg) {
    nlohmann::json attacks = nlohmann::json::array();
    for (const auto &a : cfg.attacks) {
        auto j = attack_json(a.cfg);
        j["lambda"] = a.cfg.lambda;
        j["query_budget"] = a.cfg.query_budget;
        j["name"] = a.name;
        j["kind"] = to_string(a.kind);
        attacks.push_back(j);
    }
    std::vector<int> metrics;
    for (Metric m : cfg.metrics) {
        metrics.push_back(metric_id(m));
    }
    return {{"seed", cfg.seed},
            {"dataset",
             {{"kind", to_string(cfg.dataset.kind)},
              {"k", cfg.dataset.k},
              {"d", cfg.dataset.d},
              {"n_per_class", cfg.dataset.n_per_class},
              {"separation", cfg.dataset.separation},
              {"split", cfg.dataset.split}}},
            {"primal", model_json(cfg.primal)},
            {"auxiliary", model_json(cfg.auxiliary)},
            {"attacks", attacks},
            {"detector", {{"report_metrics", metrics}, {"n", cfg.top_n}, {"target_fpr", cfg.target_fpr}}}};
}

std::string config_digest(const BenchmarkConfig &cfg) {
    const std::string canon = to_json(cfg).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : canon) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return hex64(h);
}

std::string format_report_json(const DetectionReport &report) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto &r : report.rows) {
        rows.push_back({{"attack_name", r.attack_name},
                        {"epsilon", r.epsilon},
                        {"metric_id", r.metric_id},
                        {"auc", r.auc},
                        {"asr", r.asr},
                        {"threshold", r.threshold},
                        {"empirical_fpr", r.empirical_fpr},
                        {"tpr_at_threshold", r.tpr_at_threshold},
                        {"n_adv", r.n_adv},
                        {"n_clean", r.n_clean}});
    }
    nlohmann::json doc{{"seed", report.seed},
                       {"config_digest", report.config_digest},
                       {"primal_accuracy", report.primal_accuracy},
                       {"auxiliary_accuracy", report.auxiliary_accuracy},
                       {"rows", rows}};
    return doc.dump(2) + "\n";
}

std::string format_report_table(const DetectionReport &report) {
    std::ostringstream os;
    char line[256];
    std::snprintf(line, sizeof line, "config %s  seed %llu  primal acc %.2f%%  auxiliary acc %.2f%%\n",
                  report.config_digest.c_str(), static_cast<unsigned long long>(report.seed),
                  100.0 * report.primal_accuracy, 100.0 * report.auxiliary_accuracy);
    os << line;
    std::snprintf(line, sizeof line, "%-16s %8s %6s %8s %8s %10s %8s %8s %6s %6s\n", "attack", "eps", "metric",
                  "AUC%", "ASR%", "threshold", "FPR%", "TPR%", "n_adv", "n_ne");
    os << line;
    for (const auto &r : report.rows) {
        std::snprintf(line, sizeof line, "%-16s %8.4f %6d %8.2f %8.2f %10.4f %8.2f %8.2f %6zu %6zu\n",
                      r.attack_name.c_str(), r.epsilon, r.metric_id, 100.0 * r.auc, 100.0 * r.asr, r.threshold,
                      100.0 * r.empirical_fpr, 100.0 * r.tpr_at_threshold, r.n_adv, r.n_clean);
        os << line;
    }
    return os.str();
}

RecordScores score_records(const std::vector<PredictionRecord> &records, Metric metric, std::size_t n) {
    std::vector<ConfidenceVector> f;
    std::vector<ConfidenceVector> g;
    f.reserve(records.size());
    g.reserve(records.size());
    for (const auto &r : records) {
        f.push_back(r.f_scores);
        g.push_back(r.g_scores);
    }
    RecordScores out;
    out.all = score_batch(metric, f, g, n);
    for (std::size_t i = 0; i < records.size(); ++i) {
        (records[i].is_adversarial ? out.adv : out.clean).push_back(out.all[i]);
    }
    return out;
}

namespace {

template <typename Fn>
auto stage(const std::string &name, Fn &&fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const StageError &) {
        throw;
    } catch (const std::exception &e) {
        throw StageError(name, e.what());
    }
}

std::vector<FeatureVector> inputs_of(const Dataset &ds) {
    std::vector<FeatureVector> xs;
    xs.reserve(ds.size());
    for (const auto &e : ds.examples) {
        xs.push_back(e.x);
    }
    return xs;
}

PredictionRecord make_record(std::string id, std::size_t y, ConfidenceVector f, ConfidenceVector g, bool adv) {
    return {std::move(id), y, std::move(f), std::move(g), adv};
}

std::vector<double> aux_on_primal_label(const std::vector<PredictionRecord> &records, bool adversarial) {
    std::vector<double> out;
    for (const auto &r : records) {
        if (r.is_adversarial == adversarial) {
            out.push_back(r.g_scores[predicted_label(r.f_scores)]);
        }
    }
    return out;
}

} // namespace

Splits make_splits(const BenchmarkConfig &cfg) {
    const auto &ds = cfg.dataset;
    const Dataset full = gen_synthetic(ds.kind, ds.k, ds.d, ds.n_per_class, ds.separation, cfg.seed);
    auto [train, calibrate, test] = split(full, ds.split, cfg.seed);
    return {std::move(train), std::move(calibrate), std::move(test)};
}

std::string to_string(ModelRole role) {
    switch (role) {
    case ModelRole::primal: return "primal";
    case ModelRole::auxiliary: return "auxiliary";
    case ModelRole::substitute: return "substitute";
    }
    return "?";
}

Model train_model(const BenchmarkConfig &cfg, ModelRole role, const Dataset &train_set) {
    const ModelSpec &spec = role == ModelRole::auxiliary ? cfg.auxiliary : cfg.primal;
    const auto arch = architecture_for(spec, cfg.dataset.d, cfg.dataset.k);
    return train(arch, train_set, train_config_for(spec, derive_seed(cfg.seed, "train/" + to_string(role))));
}

CleanSelection select_clean(const Dataset &test, const Model &primal, const Model &auxiliary) {
    const auto xs = inputs_of(test);
    const auto f = forward_batch(primal, xs);
    const auto g = forward_batch(auxiliary, xs);
    CleanSelection sel;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const auto &e = test.examples[i];
        if (predicted_label(f[i]) == e.y_true) {
            sel.samples.push_back(e);
            sel.indices.push_back(i);
            sel.records.push_back(make_record("ne-" + std::to_string(i), e.y_true, f[i], g[i], false));
        }
    }
    return sel;
}

AttackSpec seeded(const AttackSpec &spec, std::uint64_t global_seed) {
    AttackSpec out = spec;
    out.cfg.seed = derive_seed(global_seed, "attack/" + spec.name);
    return out;
}

AttackOutcome run_attack(const AttackSpec &spec, const AttackModels &models, const CleanSelection &clean) {
    AttackOutcome o;
    o.spec = spec;
    o.sample_indices = clean.indices;
    o.pairs = craft_batch(spec, models, clean.samples, clean.indices);

    const Model &f = *models.primal;
    std::vector<FeatureVector> adv_x;
    std::vector<std::size_t> adv_pos;
    for (std::size_t i = 0; i < o.pairs.size(); ++i) {
        // Only AEs that fool the primal enter detection scoring.
        if (predicted_label(forward(f, o.pairs[i].x_adv)) != o.pairs[i].y_true) {
            adv_x.push_back(o.pairs[i].x_adv);
            adv_pos.push_back(i);
        }
    }
    o.records = clean.records;
    if (adv_x.empty()) {
        o.clean_aux_confidence = score_distribution_summary(aux_on_primal_label(o.records, false), 10);
        return o;
    }
    const auto adv_f = forward_batch(f, adv_x);
    const auto adv_g = forward_batch(*models.auxiliary, adv_x);
    for (std::size_t j = 0; j < adv_x.size(); ++j) {
        o.records.push_back(make_record(spec.name + "-" + std::to_string(clean.indices[adv_pos[j]]),
                                        o.pairs[adv_pos[j]].y_true, adv_f[j], adv_g[j], true));
    }
    o.clean_aux_confidence = score_distribution_summary(aux_on_primal_label(o.records, false), 10);
    o.adv_aux_confidence = score_distribution_summary(aux_on_primal_label(o.records, true), 10);
    return o;
}

BenchmarkResult benchmark_run(const BenchmarkConfig &cfg) {
    stage("config", [&] { validate(cfg); });

    BenchmarkResult result;
    result.report.seed = cfg.seed;
    result.report.config_digest = config_digest(cfg);

    stage("data", [&] {
        auto s = make_splits(cfg);
        result.train = std::move(s.train);
        result.calibrate = std::move(s.calibrate);
        result.test = std::move(s.test);
    });

    result.primal = stage("train/primal", [&] { return train_model(cfg, ModelRole::primal, result.train); });
    result.auxiliary = stage("train/auxiliary", [&] { return train_model(cfg, ModelRole::auxiliary, result.train); });
    const bool needs_substitute = std::any_of(cfg.attacks.begin(), cfg.attacks.end(),
                                              [](const AttackSpec &a) { return a.kind == AttackKind::transfer; });
    if (needs_substitute) {
        result.substitute =
            stage("train/substitute", [&] { return train_model(cfg, ModelRole::substitute, result.train); });
    }

    CleanSelection clean;
    stage("score/clean", [&] {
        result.report.primal_accuracy = evaluate_accuracy(result.primal, result.test);
        result.report.auxiliary_accuracy = evaluate_accuracy(result.auxiliary, result.test);

        const auto cal_x = inputs_of(result.calibrate);
        const auto cal_f = forward_batch(result.primal, cal_x);
        const auto cal_g = forward_batch(result.auxiliary, cal_x);
        for (std::size_t i = 0; i < cal_x.size(); ++i) {
            result.calibration_records.push_back(
                make_record("cal-" + std::to_string(i), result.calibrate.examples[i].y_true, cal_f[i], cal_g[i], false));
        }
        clean = select_clean(result.test, result.primal, result.auxiliary);
        if (clean.samples.empty()) {
            throw Error("primal classifies no test sample correctly");
        }
    });

    const AttackModels models{&result.primal, &result.auxiliary,
                              result.substitute ? &*result.substitute : nullptr};

    std::vector<std::vector<double>> cal_scores;
    stage("calibrate", [&] {
        for (Metric m : cfg.metrics) {
            cal_scores.push_back(score_records(result.calibration_records, m, cfg.top_n).all);
        }
    });

    for (const auto &spec_in : cfg.attacks) {
        const AttackSpec spec = seeded(spec_in, cfg.seed);
        AttackOutcome outcome = stage("attack/" + spec.name, [&] {
            auto o = run_attack(spec, models, clean);
            if (!o.adv_aux_confidence) {
                throw Error("no adversarial example fooled the primal model");
            }
            return o;
        });

        stage("score/" + spec.name, [&] {
            const double asr = attack_success_rate(result.primal, outcome.pairs);
            for (std::size_t mi = 0; mi < cfg.metrics.size(); ++mi) {
                const Metric m = cfg.metrics[mi];
                const auto scores = score_records(outcome.records, m, cfg.top_n);
                ReportRow row;
                row.attack_name = spec.name;
                row.epsilon = spec.cfg.epsilon;
                row.metric_id = metric_id(m);
                row.auc = auc(scores.adv, scores.clean);
                row.asr = asr;
                row.threshold = calibrate_threshold(cal_scores[mi], cfg.target_fpr);
                row.empirical_fpr = flagged_fraction(scores.clean, row.threshold);
                row.tpr_at_threshold = flagged_fraction(scores.adv, row.threshold);
                row.n_adv = scores.adv.size();
                row.n_clean = scores.clean.size();
                result.report.rows.push_back(row);
            }
        });
        result.attacks.push_back(std::move(outcome));
    }
    return result;
}

} // namespace pid
