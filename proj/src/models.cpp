#include "pid/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "pid/attacks.hpp"
#include "pid/detector.hpp"
#include "pid/error.hpp"
#include "pid/rng.hpp"
#include "pid/text_format.hpp"

namespace pid {

std::string to_string(ArchKind k) { return k == ArchKind::linear ? "linear" : "mlp"; }
std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }
std::string to_string(TrainingMode m) { return m == TrainingMode::natural ? "natural" : "adversarial"; }

ArchKind parse_arch_kind(const std::string &s) {
    if (s == "linear") return ArchKind::linear;
    if (s == "mlp") return ArchKind::mlp;
    throw ParameterError("unknown architecture kind '" + s + "'");
}

Activation parse_activation(const std::string &s) {
    if (s == "relu") return Activation::relu;
    if (s == "tanh") return Activation::tanh;
    throw ParameterError("unknown activation '" + s + "'");
}

TrainingMode parse_training_mode(const std::string &s) {
    if (s == "natural") return TrainingMode::natural;
    if (s == "adversarial") return TrainingMode::adversarial;
    throw ParameterError("unknown training mode '" + s + "'");
}

Architecture linear_arch(std::size_t d, std::size_t k) { return {ArchKind::linear, {d, k}, Activation::relu}; }

Architecture mlp_arch(std::size_t d, std::vector<std::size_t> hidden, std::size_t k, Activation act) {
    Architecture a{ArchKind::mlp, {d}, act};
    a.widths.insert(a.widths.end(), hidden.begin(), hidden.end());
    a.widths.push_back(k);
    return a;
}

void validate(const Architecture &arch) {
    if (arch.widths.size() < 2) {
        throw ParameterError("architecture needs input and output widths");
    }
    if (std::any_of(arch.widths.begin(), arch.widths.end(), [](std::size_t w) { return w == 0; })) {
        throw ParameterError("architecture widths must be positive");
    }
    if (arch.num_classes() < 2) {
        throw ParameterError("architecture needs at least 2 output classes");
    }
    if (arch.kind == ArchKind::linear && arch.widths.size() != 2) {
        throw ParameterError("linear architecture takes exactly [d, k]");
    }
    if (arch.kind == ArchKind::mlp && arch.widths.size() < 3) {
        throw ParameterError("mlp architecture needs at least one hidden layer");
    }
}

Model init_model(const Architecture &arch, std::uint64_t seed) {
    validate(arch);
    Model m;
    m.arch = arch;
    m.seed = seed;
    Rng rng(derive_seed(seed, "train/init"));
    for (std::size_t l = 0; l + 1 < arch.widths.size(); ++l) {
        Layer layer;
        layer.in = arch.widths[l];
        layer.out = arch.widths[l + 1];
        const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
        layer.weights.resize(layer.in * layer.out);
        layer.bias.resize(layer.out);
        for (double &w : layer.weights) {
            w = rng.uniform(-bound, bound);
        }
        for (double &b : layer.bias) {
            b = rng.uniform(-bound, bound);
        }
        m.layers.push_back(std::move(layer));
    }
    return m;
}

double log_sum_exp(std::span<const double> z) {
    if (z.empty()) {
        throw ParameterError("log_sum_exp of empty vector");
    }
    const double zmax = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (double v : z) {
        s += std::exp(v - zmax);
    }
    return zmax + std::log(s);
}

ConfidenceVector softmax(std::span<const double> z) {
    if (z.size() < 2) {
        throw ParameterError("softmax needs at least 2 logits");
    }
    for (double v : z) {
        if (!std::isfinite(v)) {
            throw NumericError("non-finite logit");
        }
    }
    const double zmax = *std::max_element(z.begin(), z.end());
    ConfidenceVector p(z.size());
    double s = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        p[i] = std::exp(z[i] - zmax);
        s += p[i];
    }
    for (double &v : p) {
        v /= s;
    }
    return p;
}

namespace {

double activate(Activation a, double v) { return a == Activation::relu ? (v > 0.0 ? v : 0.0) : std::tanh(v); }

double activate_grad(Activation a, double pre, double post) {
    if (a == Activation::relu) {
        return pre > 0.0 ? 1.0 : 0.0;
    }
    return 1.0 - post * post;
}

// act[0] = x, act[l + 1] = output of layer l (logits for the last layer);
// pre[l] = pre-activation of layer l.
struct Pass {
    std::vector<std::vector<double>> act;
    std::vector<std::vector<double>> pre;

    const std::vector<double> &logits() const { return act.back(); }
};

void check_input(const Model &m, std::span<const double> x) {
    if (x.size() != m.input_dim()) {
        throw ParameterError("input has dimension " + std::to_string(x.size()) + ", model expects " +
                             std::to_string(m.input_dim()));
    }
}

Pass run_forward(const Model &m, std::span<const double> x) {
    check_input(m, x);
    Pass pass;
    pass.act.reserve(m.layers.size() + 1);
    pass.pre.reserve(m.layers.size());
    pass.act.emplace_back(x.begin(), x.end());
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        const Layer &layer = m.layers[l];
        const auto &in = pass.act.back();
        std::vector<double> z(layer.out);
        for (std::size_t o = 0; o < layer.out; ++o) {
            double s = layer.bias[o];
            const double *row = &layer.weights[o * layer.in];
            for (std::size_t i = 0; i < layer.in; ++i) {
                s += row[i] * in[i];
            }
            z[o] = s;
        }
        pass.pre.push_back(z);
        if (l + 1 < m.layers.size()) {
            for (double &v : z) {
                v = activate(m.arch.activation, v);
            }
        }
        pass.act.push_back(std::move(z));
    }
    return pass;
}

// Propagates dL/dlogits back to the input. When `grads` is non-null the
// parameter gradients are added into it.
std::vector<double> backprop(const Model &m, const Pass &pass, std::vector<double> delta, std::vector<Layer> *grads) {
    for (std::size_t l = m.layers.size(); l-- > 0;) {
        const Layer &layer = m.layers[l];
        const auto &in = pass.act[l];
        if (grads != nullptr) {
            Layer &g = (*grads)[l];
            for (std::size_t o = 0; o < layer.out; ++o) {
                g.bias[o] += delta[o];
                double *row = &g.weights[o * layer.in];
                for (std::size_t i = 0; i < layer.in; ++i) {
                    row[i] += delta[o] * in[i];
                }
            }
        }
        std::vector<double> prev(layer.in, 0.0);
        for (std::size_t o = 0; o < layer.out; ++o) {
            const double *row = &layer.weights[o * layer.in];
            for (std::size_t i = 0; i < layer.in; ++i) {
                prev[i] += row[i] * delta[o];
            }
        }
        if (l > 0) {
            for (std::size_t i = 0; i < layer.in; ++i) {
                prev[i] *= activate_grad(m.arch.activation, pass.pre[l - 1][i], in[i]);
            }
        }
        delta = std::move(prev);
    }
    return delta;
}

std::vector<double> logit_delta(const Pass &pass, std::size_t label) {
    auto delta = softmax(pass.logits());
    delta[label] -= 1.0;
    return delta;
}

void check_label(const Model &m, std::size_t label) {
    if (label >= m.num_classes()) {
        throw ParameterError("label " + std::to_string(label) + " out of range for " +
                             std::to_string(m.num_classes()) + " classes");
    }
}

} // namespace

std::vector<double> logits(const Model &m, std::span<const double> x) { return run_forward(m, x).logits(); }

ConfidenceVector forward(const Model &m, std::span<const double> x) { return softmax(run_forward(m, x).logits()); }

double cross_entropy(const Model &m, std::span<const double> x, std::size_t label) {
    check_label(m, label);
    const auto z = logits(m, x);
    return log_sum_exp(z) - z[label];
}

std::vector<double> input_gradient(const Model &m, std::span<const double> x, std::size_t label, GradientSign sign) {
    check_label(m, label);
    const Pass pass = run_forward(m, x);
    auto grad = backprop(m, pass, logit_delta(pass, label), nullptr);
    if (sign == GradientSign::minimize) {
        for (double &g : grad) {
            g = -g;
        }
    }
    return grad;
}

void validate(const TrainConfig &cfg) {
    if (cfg.epochs < 1) {
        throw ParameterError("epochs must be >= 1");
    }
    if (cfg.batch_size < 1) {
        throw ParameterError("batch_size must be >= 1");
    }
    if (!(cfg.learning_rate > 0.0)) {
        throw ParameterError("learning_rate must be > 0");
    }
    if (!(cfg.weight_decay >= 0.0)) {
        throw ParameterError("weight_decay must be >= 0");
    }
    if (cfg.adversarial) {
        validate(*cfg.adversarial);
    }
}

Model train(const Architecture &arch, const Dataset &train_set, const TrainConfig &cfg) {
    validate(cfg);
    if (train_set.empty()) {
        throw ParameterError("train: empty dataset");
    }
    if (train_set.d != arch.input_dim() || train_set.k != arch.num_classes()) {
        throw ParameterError("train: dataset shape does not match architecture");
    }

    Model m = init_model(arch, cfg.seed);
    m.training_mode = cfg.adversarial ? TrainingMode::adversarial : TrainingMode::natural;

    const std::size_t n = train_set.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(cfg.seed, "train/shuffle"));
    const std::uint64_t adv_root = derive_seed(cfg.seed, "attack/init");

    std::vector<Layer> grads = m.layers;
    std::vector<FeatureVector> batch_x;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = n; i > 1; --i) {
            std::swap(order[i - 1], order[shuffle_rng.below(i)]);
        }
        const std::uint64_t epoch_seed = derive_seed(adv_root, epoch);

        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t stop = std::min(n, start + cfg.batch_size);
            const std::size_t count = stop - start;

            batch_x.resize(count);
            if (cfg.adversarial) {
                // Inner maximization; samples are independent and each
                // writes its own slot, so the result is schedule-free.
#pragma omp parallel for schedule(static)
                for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(count); ++b) {
                    const Example &e = train_set.examples[order[start + static_cast<std::size_t>(b)]];
                    AttackConfig ac = *cfg.adversarial;
                    ac.targeted.reset();
                    ac.seed = derive_seed(epoch_seed, order[start + static_cast<std::size_t>(b)]);
                    batch_x[static_cast<std::size_t>(b)] = pgd(m, e.x, e.y_true, ac).x_adv;
                }
            } else {
                for (std::size_t b = 0; b < count; ++b) {
                    batch_x[b] = train_set.examples[order[start + b]].x;
                }
            }

            for (auto &g : grads) {
                std::fill(g.weights.begin(), g.weights.end(), 0.0);
                std::fill(g.bias.begin(), g.bias.end(), 0.0);
            }
            for (std::size_t b = 0; b < count; ++b) {
                const Pass pass = run_forward(m, batch_x[b]);
                backprop(m, pass, logit_delta(pass, train_set.examples[order[start + b]].y_true), &grads);
            }

            const double scale = cfg.learning_rate / static_cast<double>(count);
            for (std::size_t l = 0; l < m.layers.size(); ++l) {
                Layer &layer = m.layers[l];
                const Layer &g = grads[l];
                for (std::size_t j = 0; j < layer.weights.size(); ++j) {
                    layer.weights[j] -= scale * g.weights[j] + cfg.learning_rate * cfg.weight_decay * layer.weights[j];
                }
                for (std::size_t j = 0; j < layer.bias.size(); ++j) {
                    layer.bias[j] -= scale * g.bias[j];
                }
            }
        }
    }
    return m;
}

double evaluate_accuracy(const Model &m, const Dataset &ds) {
    if (ds.empty()) {
        throw ParameterError("evaluate_accuracy: empty dataset");
    }
    std::size_t correct = 0;
    for (const auto &e : ds.examples) {
        if (predicted_label(forward(m, e.x)) == e.y_true) {
            ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(ds.size());
}

GradientCheck finite_diff_check(const Model &m, std::span<const double> x, std::size_t label,
                                std::span<const double> analytic, double h, double tol) {
    if (!(h > 0.0) || !(tol > 0.0)) {
        throw ParameterError("finite_diff_check: h and tol must be > 0");
    }
    check_input(m, x);
    if (analytic.size() != x.size()) {
        throw ParameterError("finite_diff_check: gradient dimension mismatch");
    }
    GradientCheck out;
    std::vector<double> probe(x.begin(), x.end());
    for (std::size_t i = 0; i < x.size(); ++i) {
        probe[i] = x[i] + h;
        const double up = cross_entropy(m, probe, label);
        probe[i] = x[i] - h;
        const double down = cross_entropy(m, probe, label);
        probe[i] = x[i];
        const double numeric = (up - down) / (2.0 * h);
        const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
        out.max_rel_error = std::max(out.max_rel_error, std::abs(analytic[i] - numeric) / denom);
    }
    out.pass = out.max_rel_error <= tol;
    return out;
}

GradientCheck finite_diff_check(const Model &m, std::span<const double> x, std::size_t label, double h, double tol) {
    const auto g = input_gradient(m, x, label, GradientSign::maximize);
    return finite_diff_check(m, x, label, g, h, tol);
}

std::string format_model(const Model &m) {
    std::ostringstream os;
    os << "{\n  \"version\": \"pid-model/1\",\n";
    os << "  \"arch\": {\"kind\": " << text::quote(to_string(m.arch.kind)) << ", \"widths\": [";
    for (std::size_t i = 0; i < m.arch.widths.size(); ++i) {
        os << (i ? ", " : "") << m.arch.widths[i];
    }
    os << "], \"activation\": " << text::quote(to_string(m.arch.activation)) << "},\n";
    os << "  \"seed\": " << m.seed << ",\n";
    os << "  \"training_mode\": " << text::quote(to_string(m.training_mode)) << ",\n";
    os << "  \"layers\": [\n";
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        os << "    {\"weights\": " << text::format_array(m.layers[l].weights)
           << ",\n     \"bias\": " << text::format_array(m.layers[l].bias) << "}"
           << (l + 1 < m.layers.size() ? ",\n" : "\n");
    }
    os << "  ]\n}\n";
    return os.str();
}

Model parse_model(const std::string &text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error &e) {
        throw ValidationError(std::string("model file is not valid JSON: ") + e.what());
    }
    try {
        if (doc.at("version").get<std::string>() != "pid-model/1") {
            throw ValidationError("unsupported model version '" + doc.at("version").get<std::string>() + "'");
        }
        Model m;
        const auto &arch = doc.at("arch");
        m.arch.kind = parse_arch_kind(arch.at("kind").get<std::string>());
        m.arch.widths = arch.at("widths").get<std::vector<std::size_t>>();
        m.arch.activation = parse_activation(arch.at("activation").get<std::string>());
        validate(m.arch);
        m.seed = doc.at("seed").get<std::uint64_t>();
        m.training_mode = parse_training_mode(doc.at("training_mode").get<std::string>());
        const auto &layers = doc.at("layers");
        if (layers.size() + 1 != m.arch.widths.size()) {
            throw ValidationError("model layer count does not match architecture");
        }
        for (std::size_t l = 0; l < layers.size(); ++l) {
            Layer layer;
            layer.in = m.arch.widths[l];
            layer.out = m.arch.widths[l + 1];
            layer.weights = layers[l].at("weights").get<std::vector<double>>();
            layer.bias = layers[l].at("bias").get<std::vector<double>>();
            if (layer.weights.size() != layer.in * layer.out || layer.bias.size() != layer.out) {
                throw ValidationError("layer " + std::to_string(l) + " has inconsistent shape");
            }
            m.layers.push_back(std::move(layer));
        }
        return m;
    } catch (const nlohmann::json::exception &e) {
        throw ValidationError(std::string("malformed model file: ") + e.what());
    }
}

void save_model(const std::filesystem::path &path, const Model &m) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write model file " + path.string());
    }
    out << format_model(m);
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

Model load_model(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open model file " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_model(buf.str());
}

} // namespace pid
