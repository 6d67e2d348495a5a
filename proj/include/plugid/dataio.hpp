#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "plugid/rng.hpp"

namespace plugid {

// One appliance recording: raw current/voltage sample pairs plus the
// metadata needed to segment and group it.
struct Measurement {
    std::vector<double> current;  // amperes
    std::vector<double> voltage;  // volts
    double sample_rate_hz = 0.0;
    double grid_freq_hz = 0.0;
    int house_id = 0;
    std::string category;
    int appliance_id = 0;

    std::size_t size() const { return current.size(); }
};

// Samples per grid period. Rejects non-integral rate ratios: segmentation is
// defined only when the sampling grid tiles the mains period exactly.
inline int samples_per_period(double sample_rate_hz, double grid_freq_hz) {
    if (sample_rate_hz <= 0.0 || grid_freq_hz <= 0.0) {
        throw std::domain_error("samples_per_period: rates must be positive");
    }
    const double ratio = sample_rate_hz / grid_freq_hz;
    const double rounded = std::round(ratio);
    if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-6 * ratio) {
        throw std::domain_error("samples_per_period: " + std::to_string(sample_rate_hz) + "/" +
                                std::to_string(grid_freq_hz) + " is not an integral ratio");
    }
    return static_cast<int>(rounded);
}

// Checks the Measurement invariants: equal channel lengths, at least two full
// periods, integral samples-per-period.
inline void validate_measurement(const Measurement& m) {
    if (m.current.size() != m.voltage.size()) {
        throw std::invalid_argument("measurement: current/voltage length mismatch");
    }
    const int d = samples_per_period(m.sample_rate_hz, m.grid_freq_hz);
    if (m.current.size() < static_cast<std::size_t>(2 * d)) {
        throw std::length_error("measurement: " + std::to_string(m.current.size()) +
                                " samples, need at least two periods (" + std::to_string(2 * d) + ")");
    }
}

struct MeasurementMeta {
    int house_id = 0;
    std::string category;
    int appliance_id = 0;
};

// Reads a two-column headerless CSV ("I,V" per line). Blank lines are
// ignored; anything else that does not parse as two reals is a row error
// reported with its 1-based line number.
inline Measurement load_measurement(const std::string& csv_path, const MeasurementMeta& meta,
                                    double sample_rate_hz, double grid_freq_hz) {
    std::ifstream in(csv_path);
    if (!in) {
        throw std::runtime_error("cannot open " + csv_path);
    }
    Measurement m;
    m.sample_rate_hz = sample_rate_hz;
    m.grid_freq_hz = grid_freq_hz;
    m.house_id = meta.house_id;
    m.category = meta.category;
    m.appliance_id = meta.appliance_id;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        double i_val = 0.0, v_val = 0.0;
        char trailing = '\0';
        const int got = std::sscanf(line.c_str(), "%lf,%lf%c", &i_val, &v_val, &trailing);
        // allow a trailing carriage return from CRLF files, nothing else
        if (got < 2 || (got == 3 && trailing != '\r')) {
            throw std::runtime_error(csv_path + ": parse error at line " + std::to_string(line_no) +
                                     ": '" + line + "'");
        }
        m.current.push_back(i_val);
        m.voltage.push_back(v_val);
    }
    validate_measurement(m);
    return m;
}

// Writes the two-column CSV format. Values carry 9 significant digits.
inline void save_measurement_csv(const Measurement& m, const std::string& csv_path) {
    std::ofstream out(csv_path);
    if (!out) {
        throw std::runtime_error("cannot write " + csv_path);
    }
    char buf[80];
    for (std::size_t n = 0; n < m.size(); ++n) {
        std::snprintf(buf, sizeof(buf), "%.9g,%.9g\n", m.current[n], m.voltage[n]);
        out << buf;
    }
}

// A corpus: measurements plus the ordered label space they draw from.
struct Dataset {
    std::vector<Measurement> measurements;
    std::vector<std::string> label_space;

    std::vector<int> house_ids() const {
        std::set<int> ids;
        for (const auto& m : measurements) {
            ids.insert(m.house_id);
        }
        return {ids.begin(), ids.end()};
    }
};

// Builds the label space from the measurements themselves: distinct
// categories in ascending lexicographic order.
inline std::vector<std::string> derive_label_space(const std::vector<Measurement>& ms) {
    std::set<std::string> labels;
    for (const auto& m : ms) {
        labels.insert(m.category);
    }
    return {labels.begin(), labels.end()};
}

inline void validate_dataset(const Dataset& ds) {
    for (const auto& m : ds.measurements) {
        if (std::find(ds.label_space.begin(), ds.label_space.end(), m.category) == ds.label_space.end()) {
            throw std::invalid_argument("dataset: category '" + m.category + "' not in label space");
        }
    }
}

// Loads a corpus directory: metadata.json index plus one CSV per measurement.
// The index is an array of {"file","house","category","appliance_id","fs","fg"}.
inline Dataset load_dataset(const std::string& dir) {
    std::ifstream in(dir + "/metadata.json");
    if (!in) {
        throw std::runtime_error("cannot open " + dir + "/metadata.json");
    }
    nlohmann::json index = nlohmann::json::parse(in);
    if (!index.is_array()) {
        throw std::runtime_error(dir + "/metadata.json: expected a top-level array");
    }
    Dataset ds;
    for (const auto& entry : index) {
        MeasurementMeta meta;
        meta.house_id = entry.at("house").get<int>();
        meta.category = entry.at("category").get<std::string>();
        meta.appliance_id = entry.at("appliance_id").get<int>();
        const auto file = entry.at("file").get<std::string>();
        ds.measurements.push_back(load_measurement(dir + "/" + file, meta, entry.at("fs").get<double>(),
                                                   entry.at("fg").get<double>()));
    }
    ds.label_space = derive_label_space(ds.measurements);
    return ds;
}

// Writes a corpus in the same layout load_dataset reads.
inline void save_dataset(const Dataset& ds, const std::string& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::json index = nlohmann::json::array();
    for (std::size_t k = 0; k < ds.measurements.size(); ++k) {
        const auto& m = ds.measurements[k];
        char name[32];
        std::snprintf(name, sizeof(name), "m_%05zu.csv", k);
        save_measurement_csv(m, dir + "/" + name);
        index.push_back({{"file", name},
                         {"house", m.house_id},
                         {"category", m.category},
                         {"appliance_id", m.appliance_id},
                         {"fs", m.sample_rate_hz},
                         {"fg", m.grid_freq_hz}});
    }
    std::ofstream out(dir + "/metadata.json");
    if (!out) {
        throw std::runtime_error("cannot write " + dir + "/metadata.json");
    }
    out << index.dump(1) << "\n";
}

// Splits a dataset into (other houses, held-out house). Both halves keep the
// parent label space so class indices stay comparable across folds.
inline std::pair<Dataset, Dataset> partition_by_house(const Dataset& ds, int test_house) {
    Dataset train, test;
    train.label_space = ds.label_space;
    test.label_space = ds.label_space;
    for (const auto& m : ds.measurements) {
        (m.house_id == test_house ? test : train).measurements.push_back(m);
    }
    if (test.measurements.empty()) {
        throw std::out_of_range("partition_by_house: house " + std::to_string(test_house) +
                                " not in dataset");
    }
    return {std::move(train), std::move(test)};
}

// Keeps ceil(r * #houses) houses, chosen uniformly without replacement.
// Measurement order is preserved, so r=1 returns the dataset unchanged.
inline Dataset subsample_houses(const Dataset& ds, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0) || fraction > 1.0) {
        throw std::domain_error("subsample_houses: fraction must be in (0,1]");
    }
    const std::vector<int> houses = ds.house_ids();
    const std::size_t keep = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(houses.size())));
    if (keep >= houses.size()) {
        return ds;
    }
    std::vector<int> pool = houses;
    Rng rng(seed);
    std::set<int> kept;
    for (std::size_t k = 0; k < keep; ++k) {
        const std::size_t pick = static_cast<std::size_t>(rng.below(pool.size()));
        kept.insert(pool[pick]);
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
    }
    Dataset out;
    out.label_space = ds.label_space;
    for (const auto& m : ds.measurements) {
        if (kept.count(m.house_id)) {
            out.measurements.push_back(m);
        }
    }
    return out;
}

}  // namespace plugid
