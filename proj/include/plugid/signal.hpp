#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "plugid/dataio.hpp"

namespace plugid {

// Result of min/max normalization of one segment. A constant segment cannot
// be scaled into [-1,1]; it comes back as all zeros with the flag set, and
// downstream training excludes flagged features instead of aborting.
struct NormalizedSegment {
    std::vector<double> values;
    bool degenerate = false;
};

// Affine map of a segment onto [-1,1]: out = (2*s - (max+min)) / (max - min),
// evaluated as 2*(s-min)/(max-min) - 1 so both endpoints are attained
// exactly. Non-constant input always touches -1 and +1.
inline NormalizedSegment normalize_segment(std::span<const double> segment) {
    if (segment.empty()) {
        throw std::invalid_argument("normalize_segment: empty segment");
    }
    const auto [lo_it, hi_it] = std::minmax_element(segment.begin(), segment.end());
    const double lo = *lo_it, hi = *hi_it;
    NormalizedSegment out;
    out.values.resize(segment.size());
    if (lo == hi) {
        out.degenerate = true;
        return out;  // zeros
    }
    const double span = hi - lo;
    for (std::size_t n = 0; n < segment.size(); ++n) {
        out.values[n] = 2.0 * ((segment[n] - lo) / span) - 1.0;
    }
    return out;
}

// Normalized one-period signature: d current samples followed by d voltage
// samples, each channel independently scaled to [-1,1].
struct FeatureVector {
    std::vector<double> values;  // length 2d
    std::string label;
    int house_id = 0;
    bool degenerate = false;  // either channel was constant
};

inline FeatureVector build_feature(const Measurement& m, std::size_t tau, int period_len) {
    const auto d = static_cast<std::size_t>(period_len);
    if (period_len < 1 || tau + d > m.size()) {
        throw std::out_of_range("build_feature: window [" + std::to_string(tau) + ", " +
                                std::to_string(tau + d) + ") exceeds measurement of " +
                                std::to_string(m.size()) + " samples");
    }
    NormalizedSegment cur = normalize_segment({m.current.data() + tau, d});
    NormalizedSegment vol = normalize_segment({m.voltage.data() + tau, d});
    FeatureVector fv;
    fv.values.reserve(2 * d);
    fv.values.insert(fv.values.end(), cur.values.begin(), cur.values.end());
    fv.values.insert(fv.values.end(), vol.values.begin(), vol.values.end());
    fv.label = m.category;
    fv.house_id = m.house_id;
    fv.degenerate = cur.degenerate || vol.degenerate;
    return fv;
}

// Start of the final two-period window; the tail of a recording is taken as
// settled steady state.
inline std::size_t steady_state_window(const Measurement& m, int period_len) {
    const auto need = static_cast<std::size_t>(2 * period_len);
    if (m.size() < need) {
        throw std::length_error("steady_state_window: " + std::to_string(m.size()) +
                                " samples < two periods (" + std::to_string(need) + ")");
    }
    return m.size() - need;
}

// Phase-sliding expansion: floor(d/epsilon) features at tau0, tau0+eps, ...
// Every window must fit; the first failing window index is reported.
inline std::vector<FeatureVector> expand_measurement(const Measurement& m, std::size_t tau0,
                                                     int epsilon, int period_len) {
    if (epsilon < 1) {
        throw std::domain_error("expand_measurement: epsilon must be >= 1");
    }
    const std::size_t count = static_cast<std::size_t>(period_len / epsilon);
    std::vector<FeatureVector> features;
    features.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t tau = tau0 + i * static_cast<std::size_t>(epsilon);
        if (tau + static_cast<std::size_t>(period_len) > m.size()) {
            throw std::out_of_range("expand_measurement: window i=" + std::to_string(i) +
                                    " at tau=" + std::to_string(tau) + " exceeds measurement of " +
                                    std::to_string(m.size()) + " samples");
        }
        features.push_back(build_feature(m, tau, period_len));
    }
    return features;
}

}  // namespace plugid
