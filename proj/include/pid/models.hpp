#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pid/attack_config.hpp"
#include "pid/datasets.hpp"

namespace pid {

enum class ArchKind { linear, mlp };
enum class Activation { relu, tanh };
enum class TrainingMode { natural, adversarial };

std::string to_string(ArchKind k);
std::string to_string(Activation a);
std::string to_string(TrainingMode m);
ArchKind parse_arch_kind(const std::string &s);
Activation parse_activation(const std::string &s);
TrainingMode parse_training_mode(const std::string &s);

struct Architecture {
    ArchKind kind = ArchKind::linear;
    std::vector<std::size_t> widths;  // d, hidden..., k
    Activation activation = Activation::relu;

    std::size_t input_dim() const { return widths.front(); }
    std::size_t num_classes() const { return widths.back(); }

    bool operator==(const Architecture &) const = default;
};

Architecture linear_arch(std::size_t d, std::size_t k);
Architecture mlp_arch(std::size_t d, std::vector<std::size_t> hidden, std::size_t k, Activation act);

void validate(const Architecture &arch);

// Dense layer, weights row-major (out x in).
struct Layer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> weights;
    std::vector<double> bias;

    double &w(std::size_t o, std::size_t i) { return weights[o * in + i]; }
    double w(std::size_t o, std::size_t i) const { return weights[o * in + i]; }

    bool operator==(const Layer &) const = default;
};

struct Model {
    Architecture arch;
    std::vector<Layer> layers;
    TrainingMode training_mode = TrainingMode::natural;
    std::uint64_t seed = 0;

    std::size_t input_dim() const { return arch.input_dim(); }
    std::size_t num_classes() const { return arch.num_classes(); }

    bool operator==(const Model &) const = default;
};

// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] per layer, biases included.
Model init_model(const Architecture &arch, std::uint64_t seed);

// Max-subtracted exp-normalize. Throws NumericError on non-finite input.
ConfidenceVector softmax(std::span<const double> logits);
double log_sum_exp(std::span<const double> logits);

std::vector<double> logits(const Model &m, std::span<const double> x);
ConfidenceVector forward(const Model &m, std::span<const double> x);

// CE(softmax(logits), label) computed as lse(z) - z_label.
double cross_entropy(const Model &m, std::span<const double> x, std::size_t label);

enum class GradientSign { maximize, minimize };

// dCE/dx by backprop; negated for GradientSign::minimize so that stepping
// along the result always moves toward the attacker's goal.
std::vector<double> input_gradient(const Model &m, std::span<const double> x, std::size_t label,
                                   GradientSign sign = GradientSign::maximize);

struct TrainConfig {
    std::size_t epochs = 1;
    std::size_t batch_size = 32;
    double learning_rate = 0.1;
    double weight_decay = 0.0;
    std::uint64_t seed = 0;
    std::optional<AttackConfig> adversarial;  // inner PGD when set
};

void validate(const TrainConfig &cfg);

// Mini-batch SGD on cross-entropy with L2 weight decay on the weight
// matrices. With cfg.adversarial each batch is replaced by PGD examples
// crafted against the current weights before the step.
Model train(const Architecture &arch, const Dataset &train_set, const TrainConfig &cfg);

double evaluate_accuracy(const Model &m, const Dataset &ds);

struct GradientCheck {
    double max_rel_error = 0.0;
    bool pass = false;
};

// Central differences of the cross-entropy against `analytic`; relative
// error per coordinate is |a-b| / max(|a|, |b|, 1e-8).
GradientCheck finite_diff_check(const Model &m, std::span<const double> x, std::size_t label,
                                std::span<const double> analytic, double h, double tol);
GradientCheck finite_diff_check(const Model &m, std::span<const double> x, std::size_t label, double h, double tol);

// "pid-model/1" JSON document.
std::string format_model(const Model &m);
Model parse_model(const std::string &text);
void save_model(const std::filesystem::path &path, const Model &m);
Model load_model(const std::filesystem::path &path);

} // namespace pid
