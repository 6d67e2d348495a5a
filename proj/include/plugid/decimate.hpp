#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "plugid/dataio.hpp"

namespace plugid {

// Rational resampling plan: out_rate = in_rate * up / down, with a linear
// phase low-pass FIR applied in the upsampled domain.
struct DecimationPlan {
    int up_factor = 1;
    int down_factor = 1;
    std::vector<double> fir_taps;
};

inline void validate_plan(const DecimationPlan& plan) {
    if (plan.up_factor < 1 || plan.down_factor < 1 || std::gcd(plan.up_factor, plan.down_factor) != 1) {
        throw std::domain_error("decimation plan: up/down must be positive and coprime");
    }
    const std::size_t taps = plan.fir_taps.size();
    if (taps == 0 || taps % 2 == 0) {
        throw std::domain_error("decimation plan: FIR must have odd length");
    }
    for (std::size_t n = 0; n < taps / 2; ++n) {
        const double a = plan.fir_taps[n], b = plan.fir_taps[taps - 1 - n];
        if (std::abs(a - b) > 1e-12 * std::max(1.0, std::abs(a))) {
            throw std::domain_error("decimation plan: FIR is not symmetric");
        }
    }
}

namespace detail {

// Best rational approximation of x by continued fractions, denominator
// capped. Returns {num, den} or throws if x is not representable.
inline std::pair<std::int64_t, std::int64_t> to_fraction(double x, std::int64_t max_den) {
    std::int64_t p_prev = 1, q_prev = 0;
    std::int64_t p = static_cast<std::int64_t>(std::floor(x));
    std::int64_t q = 1;
    double frac = x - std::floor(x);
    while (std::abs(static_cast<double>(p) / static_cast<double>(q) - x) > 1e-9 * std::max(1.0, x)) {
        if (frac <= 0.0) {
            break;
        }
        const double inv = 1.0 / frac;
        auto a = static_cast<std::int64_t>(std::floor(inv));
        double rem = inv - static_cast<double>(a);
        if (rem > 1.0 - 1e-9) {  // inv landed a hair under an integer
            a += 1;
            rem = 0.0;
        }
        frac = rem;
        const std::int64_t p_next = a * p + p_prev;
        const std::int64_t q_next = a * q + q_prev;
        if (q_next > max_den) {
            break;
        }
        p_prev = p;
        q_prev = q;
        p = p_next;
        q = q_next;
    }
    if (q < 1 || std::abs(static_cast<double>(p) / static_cast<double>(q) - x) > 1e-9 * std::max(1.0, x)) {
        throw std::domain_error("decimation: rate ratio has no small rational form");
    }
    const std::int64_t g = std::gcd(p, q);
    return {p / g, q / g};
}

}  // namespace detail

// Kaiser-windowed sinc low-pass for a rational rate change. Fixed design
// targets: 60 dB stopband, transition width 10% of the output Nyquist,
// cutoff at the output Nyquist, unity passband gain after upsampling.
inline DecimationPlan design_decimation(double fs_in, double fs_out) {
    if (!(fs_in > 0.0) || !(fs_out > 0.0) || fs_out >= fs_in) {
        throw std::domain_error("design_decimation: need 0 < fs_out < fs_in");
    }
    auto [up, down] = detail::to_fraction(fs_out / fs_in, 1 << 20);

    const double stopband_db = 60.0;
    const double beta = 0.1102 * (stopband_db - 8.7);
    const double fs_up = fs_in * static_cast<double>(up);
    const double transition_hz = 0.1 * (fs_out / 2.0);
    const double delta_omega = 2.0 * M_PI * transition_hz / fs_up;
    int taps = static_cast<int>(std::ceil((stopband_db - 7.95) / (2.285 * delta_omega))) + 1;
    if (taps % 2 == 0) {
        ++taps;
    }

    const double cutoff_norm = (fs_out / 2.0) / fs_up;  // cycles per upsampled sample
    const int mid = (taps - 1) / 2;
    const double i0_beta = std::cyl_bessel_i(0.0, beta);
    DecimationPlan plan;
    plan.up_factor = static_cast<int>(up);
    plan.down_factor = static_cast<int>(down);
    plan.fir_taps.resize(static_cast<std::size_t>(taps));
    double sum = 0.0;
    for (int n = 0; n < taps; ++n) {
        const double x = static_cast<double>(n - mid);
        const double sinc = (x == 0.0) ? 2.0 * cutoff_norm
                                       : std::sin(2.0 * M_PI * cutoff_norm * x) / (M_PI * x);
        const double t = x / static_cast<double>(mid);
        const double window = std::cyl_bessel_i(0.0, beta * std::sqrt(1.0 - t * t)) / i0_beta;
        plan.fir_taps[static_cast<std::size_t>(n)] = sinc * window;
        sum += sinc * window;
    }
    // unity DC gain through zero stuffing
    const double gain = static_cast<double>(up) / sum;
    for (auto& h : plan.fir_taps) {
        h *= gain;
    }
    validate_plan(plan);
    return plan;
}

namespace detail {

// Polyphase evaluation of filter-then-resample with group delay removed.
// Output sample k sits at input time (k + m_min) * down / up; only samples
// whose full convolution window lies inside the input are produced, so the
// edges carry no zero-padding transients.
inline std::vector<double> resample_channel(const std::vector<double>& x, const DecimationPlan& plan) {
    const auto up = static_cast<std::int64_t>(plan.up_factor);
    const auto down = static_cast<std::int64_t>(plan.down_factor);
    const auto taps = static_cast<std::int64_t>(plan.fir_taps.size());
    const std::int64_t delay = (taps - 1) / 2;
    const auto n_up = static_cast<std::int64_t>(x.size()) * up;

    const std::int64_t m_min = (delay + down - 1) / down;
    const std::int64_t m_max = (n_up - 1 - delay) / down;
    if (m_max < m_min) {
        throw std::length_error("apply_decimation: signal shorter than the FIR transient");
    }
    std::vector<double> y(static_cast<std::size_t>(m_max - m_min + 1));
    for (std::int64_t m = m_min; m <= m_max; ++m) {
        const std::int64_t center = m * down + delay;
        double acc = 0.0;
        for (std::int64_t t = center % up; t < taps; t += up) {
            acc += plan.fir_taps[static_cast<std::size_t>(t)] *
                   x[static_cast<std::size_t>((center - t) / up)];
        }
        y[static_cast<std::size_t>(m - m_min)] = acc;
    }
    return y;
}

}  // namespace detail

// Resamples both channels identically. Fails before any filtering if the new
// rate would not give an integral number of samples per grid period.
inline Measurement apply_decimation(const Measurement& m, const DecimationPlan& plan) {
    validate_plan(plan);
    const double new_rate =
        m.sample_rate_hz * static_cast<double>(plan.up_factor) / static_cast<double>(plan.down_factor);
    samples_per_period(new_rate, m.grid_freq_hz);  // throws on non-integral d

    Measurement out;
    out.sample_rate_hz = new_rate;
    out.grid_freq_hz = m.grid_freq_hz;
    out.house_id = m.house_id;
    out.category = m.category;
    out.appliance_id = m.appliance_id;
    out.current = detail::resample_channel(m.current, plan);
    out.voltage = detail::resample_channel(m.voltage, plan);
    validate_measurement(out);
    return out;
}

}  // namespace plugid
