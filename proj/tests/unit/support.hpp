#pragma once

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pid/datasets.hpp"
#include "pid/rng.hpp"

namespace pid::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string &tag) {
        std::string pattern = (std::filesystem::temp_directory_path() / ("pid-" + tag + "-XXXXXX")).string();
        if (mkdtemp(pattern.data()) == nullptr) {
            throw std::runtime_error("mkdtemp failed");
        }
        path_ = pattern;
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir &) = delete;
    TempDir &operator=(const TempDir &) = delete;

    const std::filesystem::path &path() const { return path_; }
    std::filesystem::path operator/(const std::string &name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path &p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline void spit(const std::filesystem::path &p, const std::string &text) {
    std::ofstream(p, std::ios::binary) << text;
}

// Random point on the simplex; a few entries are exact zeros when `sparse`.
inline std::vector<double> random_simplex(Rng &rng, std::size_t k, bool sparse = false) {
    std::vector<double> p(k);
    double total = 0.0;
    for (auto &v : p) {
        v = sparse && rng.uniform() < 0.3 ? 0.0 : -std::log(1.0 - rng.uniform());
        total += v;
    }
    if (total == 0.0) {
        p[rng.below(k)] = 1.0;
        return p;
    }
    for (auto &v : p) {
        v /= total;
    }
    return p;
}

} // namespace pid::testing
