#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "plugid/dataio.hpp"
#include "plugid/rng.hpp"

namespace plugid {

// Waveform families with visibly distinct current shapes against a common
// sinusoidal voltage.
enum class WaveFamily {
    resistive,  // current in phase with voltage
    reactive,   // current lagging by a per-instance angle
    phase_cut,  // conduction only past a per-instance firing angle
    rectifier   // narrow pulses around the voltage peaks
};

inline WaveFamily wave_family_from_name(const std::string& name) {
    if (name == "resistive") return WaveFamily::resistive;
    if (name == "reactive") return WaveFamily::reactive;
    if (name == "phase_cut") return WaveFamily::phase_cut;
    if (name == "rectifier") return WaveFamily::rectifier;
    throw std::invalid_argument("unknown waveform family '" + name + "'");
}

inline std::string wave_family_name(WaveFamily f) {
    switch (f) {
        case WaveFamily::resistive: return "resistive";
        case WaveFamily::reactive: return "reactive";
        case WaveFamily::phase_cut: return "phase_cut";
        case WaveFamily::rectifier: return "rectifier";
    }
    throw std::invalid_argument("unknown waveform family");
}

struct CategorySpec {
    std::string label;
    WaveFamily family = WaveFamily::resistive;
};

struct SynthSpec {
    std::vector<CategorySpec> categories;
    int houses = 12;
    int instances_per_house = 3;
    int periods = 8;
    double sample_rate_hz = 30000.0;
    double grid_freq_hz = 60.0;
    double noise_sigma = 0.0;  // relative to unit current amplitude
    std::uint64_t seed = 0;
};

inline std::vector<CategorySpec> default_categories() {
    return {{"heater", WaveFamily::resistive},
            {"motor", WaveFamily::reactive},
            {"dimmer", WaveFamily::phase_cut},
            {"charger", WaveFamily::rectifier}};
}

namespace detail {

constexpr double kDegree = std::numbers::pi / 180.0;

// Unit-amplitude current at phase theta (radians into the grid cycle).
inline double family_current(WaveFamily family, double theta, double param) {
    switch (family) {
        case WaveFamily::resistive:
            return std::sin(theta);
        case WaveFamily::reactive:
            return std::sin(theta - param);  // param: lag angle
        case WaveFamily::phase_cut: {
            // param: firing angle; conduction from there to the end of each
            // half cycle
            const double half_phase = std::fmod(theta, std::numbers::pi);
            return half_phase >= param ? std::sin(theta) : 0.0;
        }
        case WaveFamily::rectifier: {
            // cosine-squared pulses centered on the voltage extrema, width
            // 10% of the period, signed by voltage polarity
            const double half_width = 0.1 * std::numbers::pi;  // phase half-width
            const double two_pi = 2.0 * std::numbers::pi;
            const auto pulse = [&](double center) {
                // shift keeps the fmod argument positive for any theta in [0, 4pi)
                double u = std::fmod(theta - center + 3.0 * std::numbers::pi, two_pi) - std::numbers::pi;
                if (std::abs(u) >= half_width) {
                    return 0.0;
                }
                const double c = std::cos(0.5 * std::numbers::pi * u / half_width);
                return c * c;
            };
            return pulse(0.5 * std::numbers::pi) - pulse(1.5 * std::numbers::pi);
        }
    }
    throw std::invalid_argument("unknown waveform family");
}

}  // namespace detail

// Deterministic multi-house corpus. Voltage is a clean sinusoid; current
// follows the category's family with per-instance parameter jitter, a
// per-house gain, a per-measurement phase, and additive Gaussian noise on
// the unit-amplitude waveform.
inline Dataset generate(const SynthSpec& spec) {
    if (spec.houses < 2) {
        throw std::invalid_argument("synth: need at least 2 houses");
    }
    if (spec.categories.size() < 2) {
        throw std::invalid_argument("synth: need at least 2 categories");
    }
    if (spec.periods < 2) {
        throw std::invalid_argument("synth: need at least 2 periods");
    }
    if (spec.instances_per_house < 1) {
        throw std::invalid_argument("synth: need at least 1 instance per house");
    }
    const int d = samples_per_period(spec.sample_rate_hz, spec.grid_freq_hz);
    const std::size_t length = static_cast<std::size_t>(d) * static_cast<std::size_t>(spec.periods);
    const double two_pi = 2.0 * std::numbers::pi;
    const double voltage_amp = 325.0;

    Dataset ds;
    Rng rng(spec.seed);
    for (int house = 0; house < spec.houses; ++house) {
        const double house_gain = rng.uniform(0.5, 2.0);
        for (const auto& cat : spec.categories) {
            for (int instance = 0; instance < spec.instances_per_house; ++instance) {
                const double amplitude = house_gain * rng.uniform(0.8, 1.2);
                double param = 0.0;
                switch (cat.family) {
                    case WaveFamily::reactive:
                        param = rng.uniform(20.0 * detail::kDegree, 70.0 * detail::kDegree);
                        break;
                    case WaveFamily::phase_cut:
                        param = rng.uniform(30.0 * detail::kDegree, 120.0 * detail::kDegree);
                        break;
                    default:
                        break;
                }
                const double phase0 = rng.uniform(0.0, two_pi);

                Measurement m;
                m.sample_rate_hz = spec.sample_rate_hz;
                m.grid_freq_hz = spec.grid_freq_hz;
                m.house_id = house;
                m.category = cat.label;
                m.appliance_id = instance;
                m.current.resize(length);
                m.voltage.resize(length);
                for (std::size_t n = 0; n < length; ++n) {
                    const double theta =
                        std::fmod(phase0 + two_pi * static_cast<double>(n) / static_cast<double>(d),
                                  two_pi);
                    m.voltage[n] = voltage_amp * std::sin(theta);
                    double unit = detail::family_current(cat.family, theta, param);
                    if (spec.noise_sigma > 0.0) {
                        unit += rng.normal(spec.noise_sigma);
                    }
                    m.current[n] = amplitude * unit;
                }
                validate_measurement(m);
                ds.measurements.push_back(std::move(m));
            }
        }
    }
    ds.label_space = derive_label_space(ds.measurements);
    return ds;
}

}  // namespace plugid
