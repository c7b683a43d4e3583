#include <cctype>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "pid/cli.hpp"
#include "pid/error.hpp"

namespace pid::cli {

namespace {

using nlohmann::json;

// Reads fields off one JSON object and rejects anything left unread.
class Fields {
public:
    Fields(const json &obj, std::string path) : obj_(obj), path_(std::move(path)) {
        if (!obj_.is_object()) {
            throw ConfigError("'" + where() + "' must be an object");
        }
    }

    std::string key_path(const std::string &key) const { return path_.empty() ? key : path_ + "." + key; }

    const json *find(const std::string &key) {
        seen_.insert(key);
        auto it = obj_.find(key);
        return it == obj_.end() ? nullptr : &*it;
    }

    template <typename T>
    T get(const std::string &key, T fallback) {
        const json *v = find(key);
        return v == nullptr ? fallback : convert<T>(*v, key);
    }

    template <typename T>
    T require(const std::string &key) {
        const json *v = find(key);
        if (v == nullptr) {
            throw ConfigError("missing required key '" + key_path(key) + "'");
        }
        return convert<T>(*v, key);
    }

    Fields child(const std::string &key) {
        static const json empty = json::object();
        const json *v = find(key);
        return Fields(v == nullptr ? empty : *v, key_path(key));
    }

    void finish() const {
        for (const auto &[key, _] : obj_.items()) {
            if (!seen_.contains(key)) {
                throw ConfigError("unknown key '" + key_path(key) + "'");
            }
        }
    }

private:
    std::string where() const { return path_.empty() ? "<root>" : path_; }

    template <typename T>
    T convert(const json &v, const std::string &key) const {
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) throw ConfigError("key '" + key_path(key) + "' must be a boolean");
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) throw ConfigError("key '" + key_path(key) + "' must be a string");
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_unsigned()) {
                throw ConfigError("key '" + key_path(key) + "' must be a non-negative integer");
            }
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) throw ConfigError("key '" + key_path(key) + "' must be a number");
        }
        try {
            return v.get<T>();
        } catch (const json::exception &) {
            throw ConfigError("key '" + key_path(key) + "' has the wrong type");
        }
    }

    const json &obj_;
    std::string path_;
    std::set<std::string> seen_;
};

template <typename Fn>
auto as_config_error(const std::string &key, Fn &&fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const ConfigError &) {
        throw;
    } catch (const Error &e) {
        throw ConfigError("key '" + key + "': " + e.what());
    }
}

void read_attack_fields(Fields &f, AttackConfig &a) {
    a.epsilon = f.get<double>("epsilon", a.epsilon);
    a.step_size = f.get<double>("step_size", a.step_size);
    a.iterations = f.get<std::size_t>("iterations", a.iterations);
    a.random_init = f.get<bool>("random_init", a.random_init);
}

ModelSpec read_model(Fields f, ModelSpec spec) {
    Fields arch = f.child("arch");
    spec.kind = as_config_error(arch.key_path("kind"),
                                [&] { return parse_arch_kind(arch.get<std::string>("kind", to_string(spec.kind))); });
    if (const json *h = arch.find("hidden")) {
        if (!h->is_array()) {
            throw ConfigError("key '" + arch.key_path("hidden") + "' must be an array");
        }
        spec.hidden.clear();
        for (const auto &w : *h) {
            if (!w.is_number_unsigned() || w.get<std::size_t>() == 0) {
                throw ConfigError("key '" + arch.key_path("hidden") + "' must hold positive integers");
            }
            spec.hidden.push_back(w.get<std::size_t>());
        }
    }
    spec.activation = as_config_error(arch.key_path("activation"), [&] {
        return parse_activation(arch.get<std::string>("activation", to_string(spec.activation)));
    });
    arch.finish();

    Fields tr = f.child("training");
    spec.mode = as_config_error(tr.key_path("mode"),
                                [&] { return parse_training_mode(tr.get<std::string>("mode", to_string(spec.mode))); });
    spec.epochs = tr.get<std::size_t>("epochs", spec.epochs);
    spec.batch_size = tr.get<std::size_t>("batch_size", spec.batch_size);
    spec.learning_rate = tr.get<double>("learning_rate", spec.learning_rate);
    spec.weight_decay = tr.get<double>("weight_decay", spec.weight_decay);
    Fields adv = tr.child("adversarial");
    read_attack_fields(adv, spec.adversarial);
    adv.finish();
    tr.finish();
    f.finish();

    if (spec.epochs < 1) throw ConfigError("key '" + tr.key_path("epochs") + "' must be >= 1");
    if (spec.batch_size < 1) throw ConfigError("key '" + tr.key_path("batch_size") + "' must be >= 1");
    if (!(spec.learning_rate > 0.0)) throw ConfigError("key '" + tr.key_path("learning_rate") + "' must be > 0");
    if (!(spec.weight_decay >= 0.0)) throw ConfigError("key '" + tr.key_path("weight_decay") + "' must be >= 0");
    if (spec.kind == ArchKind::mlp && spec.hidden.empty()) {
        throw ConfigError("key '" + arch.key_path("hidden") + "' needs at least one layer for an mlp");
    }
    return spec;
}

AttackSpec read_attack(Fields f) {
    AttackSpec spec;
    spec.kind = as_config_error(f.key_path("kind"), [&] { return parse_attack_kind(f.require<std::string>("kind")); });
    spec.name = f.get<std::string>("name", to_string(spec.kind));
    // Defaults mirror the reference PGD recipe: step = eps / 4, 10 steps.
    spec.cfg.epsilon = 0.1;
    if (spec.kind != AttackKind::fgsm && spec.kind != AttackKind::random_search) {
        spec.cfg.step_size = 0.025;
        spec.cfg.iterations = 10;
        spec.cfg.random_init = true;
    }
    if (spec.kind == AttackKind::random_search) {
        spec.cfg.query_budget = 2000;
    }
    read_attack_fields(f, spec.cfg);
    spec.cfg.lambda = f.get<double>("lambda", spec.cfg.lambda);
    spec.cfg.query_budget = f.get<std::size_t>("query_budget", spec.cfg.query_budget);
    f.finish();

    if (spec.name.empty()) throw ConfigError("key '" + f.key_path("name") + "' must not be empty");
    // Names become file names.
    for (char c : spec.name) {
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-' && c != '.') {
            throw ConfigError("key '" + f.key_path("name") + "' may only use letters, digits, '_', '-' and '.'");
        }
    }
    if (!(spec.cfg.epsilon >= 0.0)) throw ConfigError("key '" + f.key_path("epsilon") + "' must be >= 0");
    if (spec.cfg.iterations > 0 && !(spec.cfg.step_size > 0.0)) {
        throw ConfigError("key '" + f.key_path("step_size") + "' must be > 0");
    }
    if (!(spec.cfg.lambda >= 0.0)) throw ConfigError("key '" + f.key_path("lambda") + "' must be >= 0");
    if (spec.kind == AttackKind::random_search && spec.cfg.query_budget < 1) {
        throw ConfigError("key '" + f.key_path("query_budget") + "' must be >= 1");
    }
    return spec;
}

ModelSpec default_auxiliary() {
    ModelSpec s;
    s.hidden = {64};
    s.activation = Activation::tanh;
    s.epochs = 10;
    return s;
}

} // namespace

RunConfig parse_config_text(const std::string &text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error &e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }

    RunConfig cfg;
    Fields root(doc, "");
    cfg.bench.seed = root.require<std::uint64_t>("seed");
    if (const json *o = root.find("output_dir")) {
        if (!o->is_string() || o->get<std::string>().empty()) {
            throw ConfigError("key 'output_dir' must be a non-empty string");
        }
        cfg.output_dir = o->get<std::string>();
    }

    {
        Fields ds = root.child("dataset");
        auto &d = cfg.bench.dataset;
        d.kind = as_config_error("dataset.kind",
                                 [&] { return parse_generator_kind(ds.get<std::string>("kind", to_string(d.kind))); });
        d.k = ds.get<std::size_t>("k", d.k);
        d.d = ds.get<std::size_t>("d", d.d);
        d.n_per_class = ds.get<std::size_t>("n_per_class", d.n_per_class);
        d.separation = ds.get<double>("separation", d.separation);
        if (const json *s = ds.find("split")) {
            if (!s->is_array() || s->size() != 3 || !std::all_of(s->begin(), s->end(), [](const json &v) { return v.is_number(); })) {
                throw ConfigError("key 'dataset.split' must be an array of 3 numbers");
            }
            for (std::size_t i = 0; i < 3; ++i) {
                d.split[i] = (*s)[i].get<double>();
            }
        }
        ds.finish();
        if (d.k < 2) throw ConfigError("key 'dataset.k' must be >= 2");
        if (d.d < 2) throw ConfigError("key 'dataset.d' must be >= 2");
        if (d.n_per_class < 1) throw ConfigError("key 'dataset.n_per_class' must be >= 1");
        if (!(d.separation > 0.0)) throw ConfigError("key 'dataset.separation' must be > 0");
        as_config_error("dataset.split", [&] { apportion(d.k * d.n_per_class, d.split); });
    }

    cfg.bench.primal = read_model(root.child("primal"), ModelSpec{});
    cfg.bench.auxiliary = read_model(root.child("auxiliary"), default_auxiliary());

    if (const json *attacks = root.find("attacks")) {
        if (!attacks->is_array()) {
            throw ConfigError("key 'attacks' must be an array");
        }
        for (std::size_t i = 0; i < attacks->size(); ++i) {
            cfg.bench.attacks.push_back(read_attack(Fields((*attacks)[i], "attacks[" + std::to_string(i) + "]")));
        }
    } else {
        cfg.bench.attacks.push_back(read_attack(Fields(json{{"kind", "pgd"}}, "attacks[0]")));
    }

    {
        Fields det = root.child("detector");
        const int m = det.get<int>("metric", 1);
        cfg.detector.metric = as_config_error("detector.metric", [&] { return metric_from_id(m); });
        cfg.detector.n = det.get<std::size_t>("n", cfg.detector.n);
        cfg.detector.target_fpr = det.get<double>("target_fpr", cfg.detector.target_fpr);
        if (const json *t = det.find("threshold")) {
            if (!t->is_number()) throw ConfigError("key 'detector.threshold' must be a number");
            cfg.detector.threshold = t->get<double>();
        }
        cfg.bench.metrics = {cfg.detector.metric};
        if (const json *rm = det.find("report_metrics")) {
            if (!rm->is_array() || rm->empty()) {
                throw ConfigError("key 'detector.report_metrics' must be a non-empty array");
            }
            cfg.bench.metrics.clear();
            for (const auto &v : *rm) {
                if (!v.is_number_integer()) throw ConfigError("key 'detector.report_metrics' must hold integers");
                cfg.bench.metrics.push_back(
                    as_config_error("detector.report_metrics", [&] { return metric_from_id(v.get<int>()); }));
            }
        }
        det.finish();
        cfg.bench.top_n = cfg.detector.n;
        cfg.bench.target_fpr = cfg.detector.target_fpr;
        as_config_error("detector", [&] { validate(cfg.detector); });
    }
    root.finish();

    as_config_error("<config>", [&] { validate(cfg.bench); });
    return cfg;
}

RunConfig parse_config(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open config file " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

nlohmann::json to_json(const RunConfig &cfg) {
    auto j = to_json(cfg.bench);
    j["detector"]["metric"] = metric_id(cfg.detector.metric);
    if (cfg.detector.threshold) {
        j["detector"]["threshold"] = *cfg.detector.threshold;
    }
    return j;
}

std::filesystem::path resolve_output_dir(const RunConfig &cfg, const std::optional<std::string> &flag) {
    if (flag) {
        return *flag;
    }
    if (cfg.output_dir) {
        return *cfg.output_dir;
    }
    if (const char *env = std::getenv("PID_OUT_DIR"); env != nullptr && *env != '\0') {
        return env;
    }
    return "pid-out";
}

} // namespace pid::cli
