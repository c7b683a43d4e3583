#include "pid/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include <json.hpp>

#include "pid/detector.hpp"
#include "pid/error.hpp"
#include "pid/rng.hpp"
#include "pid/text_format.hpp"

namespace pid {

GeneratorKind parse_generator_kind(const std::string &s) {
    if (s == "blobs") {
        return GeneratorKind::blobs;
    }
    if (s == "rings") {
        return GeneratorKind::rings;
    }
    throw ParameterError("unknown generator kind '" + s + "'");
}

std::string to_string(GeneratorKind kind) { return kind == GeneratorKind::blobs ? "blobs" : "rings"; }

namespace {

void rescale_unit_box(std::vector<Example> &examples) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto &e : examples) {
        for (double v : e.x) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    const double span = hi - lo;
    for (auto &e : examples) {
        for (double &v : e.x) {
            v = span > 0.0 ? std::clamp((v - lo) / span, 0.0, 1.0) : 0.5;
        }
    }
}

} // namespace

Dataset gen_synthetic(GeneratorKind kind, std::size_t k, std::size_t d, std::size_t n_per_class, double separation,
                      std::uint64_t seed) {
    if (k < 2) {
        throw ParameterError("gen_synthetic: k must be >= 2");
    }
    if (d < 2) {
        throw ParameterError("gen_synthetic: d must be >= 2");
    }
    if (n_per_class < 1) {
        throw ParameterError("gen_synthetic: n_per_class must be >= 1");
    }
    if (!(separation > 0.0) || !std::isfinite(separation)) {
        throw ParameterError("gen_synthetic: separation must be > 0");
    }

    Rng rng(derive_seed(seed, "data/gen"));
    Dataset ds;
    ds.k = k;
    ds.d = d;
    ds.name = to_string(kind) + "-k" + std::to_string(k) + "-d" + std::to_string(d) + "-n" + std::to_string(n_per_class) +
              "-s" + std::to_string(seed);
    ds.examples.reserve(k * n_per_class);

    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t i = 0; i < n_per_class; ++i) {
            Example e;
            e.y_true = c;
            e.x.assign(d, 0.0);
            if (kind == GeneratorKind::blobs) {
                // k <= d: centers on scaled axes so every pair is `separation`
                // apart. Otherwise centers on a line along axis 0.
                for (std::size_t j = 0; j < d; ++j) {
                    e.x[j] = rng.normal();
                }
                if (k <= d) {
                    e.x[c] += separation / std::numbers::sqrt2;
                } else {
                    e.x[0] += separation * static_cast<double>(c);
                }
            } else {
                const double radius = separation * static_cast<double>(c + 1);
                const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
                const double r = radius + 0.1 * separation * rng.normal();
                e.x[0] = r * std::cos(theta);
                e.x[1] = r * std::sin(theta);
                for (std::size_t j = 2; j < d; ++j) {
                    e.x[j] = 0.1 * separation * rng.normal();
                }
            }
            ds.examples.push_back(std::move(e));
        }
    }
    rescale_unit_box(ds.examples);
    return ds;
}

std::array<std::size_t, 3> apportion(std::size_t n, const std::array<double, 3> &fractions) {
    double total = 0.0;
    for (double f : fractions) {
        if (!(f > 0.0) || !std::isfinite(f)) {
            throw ParameterError("split fractions must all be positive");
        }
        total += f;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw ParameterError("split fractions must sum to 1");
    }

    std::array<std::size_t, 3> sizes{};
    std::array<double, 3> remainders{};
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        const double quota = fractions[i] * static_cast<double>(n);
        sizes[i] = static_cast<std::size_t>(std::floor(quota));
        remainders[i] = quota - static_cast<double>(sizes[i]);
        assigned += sizes[i];
    }
    std::array<std::size_t, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b]; });
    for (std::size_t i = 0; assigned < n; i = (i + 1) % 3) {
        ++sizes[order[i]];
        ++assigned;
    }
    return sizes;
}

std::tuple<Dataset, Dataset, Dataset> split(const Dataset &ds, const std::array<double, 3> &fractions,
                                            std::uint64_t seed) {
    const auto sizes = apportion(ds.size(), fractions);

    std::vector<std::size_t> perm(ds.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(derive_seed(seed, "data/split"));
    for (std::size_t i = perm.size(); i > 1; --i) {
        std::swap(perm[i - 1], perm[rng.below(i)]);
    }

    std::array<Dataset, 3> parts;
    static constexpr const char *suffix[] = {"/train", "/calibrate", "/test"};
    std::size_t offset = 0;
    for (std::size_t p = 0; p < 3; ++p) {
        parts[p].name = ds.name + suffix[p];
        parts[p].k = ds.k;
        parts[p].d = ds.d;
        parts[p].examples.reserve(sizes[p]);
        for (std::size_t i = 0; i < sizes[p]; ++i) {
            parts[p].examples.push_back(ds.examples[perm[offset + i]]);
        }
        offset += sizes[p];
    }
    return {std::move(parts[0]), std::move(parts[1]), std::move(parts[2])};
}

void validate(const Dataset &ds) {
    if (ds.k < 2 || ds.d < 1) {
        throw ValidationError("dataset '" + ds.name + "' has invalid shape");
    }
    for (std::size_t i = 0; i < ds.examples.size(); ++i) {
        const auto &e = ds.examples[i];
        if (e.x.size() != ds.d) {
            throw ValidationError("example " + std::to_string(i) + " has dimension " + std::to_string(e.x.size()) +
                                  ", expected " + std::to_string(ds.d));
        }
        if (e.y_true >= ds.k) {
            throw ValidationError("example " + std::to_string(i) + " label out of range");
        }
        for (double v : e.x) {
            if (!(v >= 0.0 && v <= 1.0)) {
                throw ValidationError("example " + std::to_string(i) + " has a feature outside [0,1]");
            }
        }
    }
}

namespace {

std::vector<double> read_scores(const nlohmann::json &obj, const char *key, std::size_t line) {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_array()) {
        throw ParseError(std::string("missing array '") + key + "'", line);
    }
    std::vector<double> out;
    out.reserve(it->size());
    for (const auto &v : *it) {
        if (!v.is_number()) {
            throw ParseError(std::string("non-numeric entry in '") + key + "'", line);
        }
        out.push_back(v.get<double>());
    }
    return out;
}

} // namespace

std::vector<PredictionRecord> load_prediction_records(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open record file " + path.string());
    }

    std::vector<PredictionRecord> records;
    std::optional<std::size_t> k;
    std::string text;
    std::size_t line_no = 0;
    while (std::getline(in, text)) {
        ++line_no;
        if (!text.empty() && text.back() == '\r') {
            text.pop_back();
        }
        if (text.find_first_not_of(" \t") == std::string::npos) {
            continue;
        }
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(text);
        } catch (const nlohmann::json::parse_error &e) {
            throw ParseError(std::string("malformed record: ") + e.what(), line_no);
        }
        if (!obj.is_object()) {
            throw ParseError("record is not an object", line_no);
        }

        if (!obj.contains("id")) {
            // File-level header.
            if (!records.empty() || k.has_value() || !obj.contains("k") || !obj["k"].is_number_unsigned()) {
                throw ParseError("record without 'id'", line_no);
            }
            k = obj["k"].get<std::size_t>();
            continue;
        }

        PredictionRecord r;
        try {
            r.id = obj.at("id").get<std::string>();
            r.y_true = obj.at("y_true").get<std::size_t>();
            r.is_adversarial = obj.at("is_adversarial").get<bool>();
        } catch (const nlohmann::json::exception &e) {
            throw ParseError(std::string("bad field: ") + e.what(), line_no);
        }
        for (const auto &[key, _] : obj.items()) {
            if (key != "id" && key != "y_true" && key != "f_scores" && key != "g_scores" && key != "is_adversarial") {
                throw ParseError("unknown key '" + key + "'", line_no);
            }
        }
        r.f_scores = read_scores(obj, "f_scores", line_no);
        r.g_scores = read_scores(obj, "g_scores", line_no);

        try {
            r.f_scores = validate_simplex(r.f_scores);
            r.g_scores = validate_simplex(r.g_scores);
        } catch (const ValidationError &e) {
            throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
        }
        if (r.f_scores.size() != r.g_scores.size()) {
            throw ValidationError("line " + std::to_string(line_no) + ": f_scores and g_scores differ in length");
        }
        if (!k.has_value()) {
            k = r.f_scores.size();
        } else if (*k != r.f_scores.size()) {
            throw ValidationError("line " + std::to_string(line_no) + ": class count " +
                                  std::to_string(r.f_scores.size()) + " differs from " + std::to_string(*k));
        }
        if (r.y_true >= *k) {
            throw ValidationError("line " + std::to_string(line_no) + ": y_true out of range");
        }
        records.push_back(std::move(r));
    }
    return records;
}

std::string format_prediction_record(const PredictionRecord &record) {
    std::string line = "{\"id\":" + text::quote(record.id) + ",\"y_true\":" + std::to_string(record.y_true) +
                       ",\"f_scores\":" + text::format_array(record.f_scores) +
                       ",\"g_scores\":" + text::format_array(record.g_scores) +
                       ",\"is_adversarial\":" + (record.is_adversarial ? "true" : "false") + "}";
    return line;
}

void write_prediction_records(const std::filesystem::path &path, const std::vector<PredictionRecord> &records) {
    if (records.empty()) {
        throw ParameterError("write_prediction_records: no records");
    }
    const std::size_t k = records.front().f_scores.size();
    for (const auto &r : records) {
        if (r.f_scores.size() != k || r.g_scores.size() != k) {
            throw ParameterError("write_prediction_records: records disagree on class count");
        }
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write record file " + path.string());
    }
    out << "{\"k\":" << k << "}\n";
    for (const auto &r : records) {
        out << format_prediction_record(r) << '\n';
    }
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

} // namespace pid
