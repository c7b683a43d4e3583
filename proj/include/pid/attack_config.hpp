#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>

namespace pid {

enum class Norm { linf };

struct AttackConfig {
    double epsilon = 0.0;  // l_inf budget in feature units
    double step_size = 0.0;
    std::size_t iterations = 0;
    bool random_init = false;
    Norm norm = Norm::linf;
    std::optional<std::size_t> targeted;
    double lambda = 1.0;  // auxiliary weight in the joint attack
    std::size_t query_budget = 0;  // random search only
    std::uint64_t seed = 0;
};

// Throws ParameterError on a malformed configuration.
void validate(const AttackConfig &cfg);

} // namespace pid
