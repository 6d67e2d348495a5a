// Acceptance suite: one pass/fail line per criterion, nonzero exit on any failure.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <plugid/plugid.hpp>

namespace {

using namespace plugid;
using Clock = std::chrono::steady_clock;

int g_failures = 0;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
    bool ok = false;
    std::string detail;
};

void run_criterion(const char* name, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
        o = fn();
    } catch (const std::exception& e) {
        o.ok = false;
        o.detail = std::string("exception: ") + e.what();
    }
    std::printf("[%s] %-28s %s\n", o.ok ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
    if (!o.ok) ++g_failures;
}

int worker_count() {
    const unsigned hw = std::thread::hardware_concurrency();
    return static_cast<int>(std::clamp(hw, 1u, 8u));
}

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), pattern, a, b, c);
    return buf;
}

// ---- shared synthetic corpus and configuration for the end-to-end criteria ----

const Dataset& benchmark_corpus() {
    static const Dataset ds = [] {
        SynthSpec spec;
        spec.categories = default_categories();
        spec.houses = 12;
        spec.instances_per_house = 3;
        spec.periods = 16;
        spec.sample_rate_hz = 7200.0;
        spec.grid_freq_hz = 60.0;
        spec.noise_sigma = 0.03;
        spec.seed = 11;
        return generate(spec);
    }();
    return ds;
}

ExperimentConfig benchmark_config() {
    ExperimentConfig cfg;
    cfg.epsilon = 10;
    cfg.hidden_dim = 16;
    cfg.train_opts.max_iterations = 80;
    cfg.train_opts.patience = 10;
    cfg.train_opts.eval_interval = 5;
    cfg.train_opts.validation_fraction = 0.30;
    cfg.seed = 5;
    cfg.jobs = worker_count();
    return cfg;
}

double g_baseline_alpha = -1.0;  // filled by the end-to-end criterion

// ---- criteria ----

Outcome kappa_formula_oracle() {
    const auto t0 = Clock::now();
    Rng rng(401);
    double max_diff = 0.0;
    int evaluated = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t m = 2 + static_cast<std::size_t>(rng.below(10));
        std::vector<std::string> labels;
        for (std::size_t k = 0; k < m; ++k) labels.push_back("k" + std::to_string(k));
        ConfusionMatrix cm(labels);
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                for (std::uint64_t c = rng.below(51); c > 0; --c) cm.accumulate_index(i, j);
            }
        }
        if (cm.total() == 0) cm.accumulate_index(0, 0);

        const auto got = cohens_kappa(cm);
        const auto s = static_cast<double>(cm.total());
        double chance = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            chance += (static_cast<double>(cm.row_sum(k)) / s) *
                      (static_cast<double>(cm.col_sum(k)) / s);
        }
        const double observed = static_cast<double>(cm.trace()) / s;
        if (chance == 1.0) {
            if (got.has_value()) return {false, "expected undefined kappa at chance agreement 1"};
            continue;
        }
        const double want = (observed - chance) / (1.0 - chance);
        if (!got.has_value()) return {false, "kappa undefined where reference is defined"};
        max_diff = std::max(max_diff, std::fabs(*got - want));
        ++evaluated;
    }
    const double elapsed = seconds_since(t0);
    const bool ok = max_diff <= 1e-12 && evaluated >= 990 && elapsed < 1.0;
    return {ok, fmt("max |diff| = %.2e over 1000 matrices, %.2f s (limit 1 s)", max_diff, elapsed)};
}

Outcome confusion_hand_check() {
    ConfusionMatrix cm({"x", "y"});
    const int counts[2][2] = {{3, 1}, {2, 4}};
    for (std::size_t i = 0; i < 2; ++i) {
        for (std::size_t j = 0; j < 2; ++j) {
            for (int c = 0; c < counts[i][j]; ++c) cm.accumulate_index(i, j);
        }
    }
    const ClassMetrics m0 = per_class(cm, 0);
    const bool ok = accuracy(cm) == 0.7 && m0.recall && *m0.recall == 0.75 && m0.precision &&
                    *m0.precision == 0.6 && m0.specificity && *m0.specificity == 2.0 / 3.0 &&
                    m0.f1 && *m0.f1 == 2.0 / 3.0;
    return {ok, "alpha, recall, precision, specificity, f1 on a 2x2 hand count, exact"};
}

Outcome gradient_finite_difference() {
    const auto t0 = Clock::now();
    Rng rng(402);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const int in = 2 + static_cast<int>(rng.below(7));
        const int hid = 2 + static_cast<int>(rng.below(5));
        const Network net = init_network(in, hid, 1000 + trial);
        const int n = 5 + static_cast<int>(rng.below(8));
        Batch batch;
        batch.inputs = Eigen::MatrixXd(in, n);
        batch.targets = Eigen::MatrixXd::Zero(2, n);
        for (int c = 0; c < n; ++c) {
            for (int r = 0; r < in; ++r) batch.inputs(r, c) = rng.uniform(-2.0, 2.0);
            batch.targets(rng.below(2) == 0 ? 0 : 1, c) = 1.0;
        }
        const auto [loss, grad] = loss_and_gradient(net, batch);
        (void)loss;
        const Eigen::VectorXd theta = flatten(net);
        const double h = 1e-6;
        for (int pick = 0; pick < 12; ++pick) {
            const auto k = static_cast<Eigen::Index>(rng.below(theta.size()));
            Eigen::VectorXd shifted = theta;
            shifted[k] = theta[k] + h;
            const double up = loss_and_gradient(unflatten(shifted, in, hid), batch).first;
            shifted[k] = theta[k] - h;
            const double dn = loss_and_gradient(unflatten(shifted, in, hid), batch).first;
            const double fd = (up - dn) / (2.0 * h);
            const double scale = std::max({1.0, std::fabs(fd), std::fabs(grad[k])});
            worst = std::max(worst, std::fabs(fd - grad[k]) / scale);
        }
    }
    const double elapsed = seconds_since(t0);
    const bool ok = worst < 1e-5 && elapsed < 5.0;
    return {ok, fmt("max relative error = %.2e over 50 networks, %.2f s (limit 5 s)", worst, elapsed)};
}

Outcome normalization_properties() {
    const auto t0 = Clock::now();
    Rng rng(403);
    double worst = 0.0;
    for (int trial = 0; trial < 10000; ++trial) {
        const std::size_t n = 2 + static_cast<std::size_t>(rng.below(120));
        const double scale = std::pow(10.0, static_cast<double>(rng.below(7)) - 3.0);
        std::vector<double> s(n);
        for (auto& v : s) v = rng.uniform(-scale, scale);
        if (*std::min_element(s.begin(), s.end()) == *std::max_element(s.begin(), s.end())) {
            s[0] += scale;
        }
        const NormalizedSegment base = normalize_segment(s);
        if (base.degenerate) return {false, "non-constant segment flagged degenerate"};
        const auto [lo, hi] = std::minmax_element(base.values.begin(), base.values.end());
        if (*lo != -1.0 || *hi != 1.0) {
            return {false, fmt("endpoints not attained exactly: [%.17g, %.17g]", *lo, *hi)};
        }
        const double a = std::exp(rng.uniform(-2.0, 2.0));
        const double b = rng.uniform(-10.0, 10.0) * scale;
        std::vector<double> t(n);
        for (std::size_t k = 0; k < n; ++k) t[k] = a * s[k] + b;
        const NormalizedSegment mapped = normalize_segment(t);
        for (std::size_t k = 0; k < n; ++k) {
            worst = std::max(worst, std::fabs(mapped.values[k] - base.values[k]));
        }
    }
    const double elapsed = seconds_since(t0);
    const bool ok = worst <= 1e-12 && elapsed < 5.0;
    return {ok,
            fmt("scale/offset drift = %.2e over 10000 segments, %.2f s (limit 5 s)", worst, elapsed)};
}

Outcome window_expansion_count() {
    const int d = 500;
    Measurement m;
    m.sample_rate_hz = 30000.0;
    m.grid_freq_hz = 60.0;
    m.house_id = 1;
    m.category = "probe";
    m.appliance_id = 1;
    const std::size_t len = 4 * static_cast<std::size_t>(d);
    m.current.resize(len);
    m.voltage.resize(len);
    for (std::size_t n = 0; n < len; ++n) {
        const double theta = 2.0 * std::numbers::pi * static_cast<double>(n) / d;
        m.current[n] = std::sin(theta) + 0.2 * std::sin(3.0 * theta);
        m.voltage[n] = 325.0 * std::sin(theta);
    }
    const std::size_t tau0 = steady_state_window(m, d);
    const auto windows = expand_measurement(m, tau0, 10, d);
    const auto single = expand_measurement(m, tau0, d, d);
    const bool ok = windows.size() == 50 && single.size() == 1 &&
                    windows.front().values.size() == 2 * static_cast<std::size_t>(d);
    return {ok, fmt("d=500, step 10 -> %.0f windows (want 50), step 500 -> %.0f",
                    static_cast<double>(windows.size()), static_cast<double>(single.size()))};
}

Outcome voting_brute_force_oracle() {
    Rng rng(404);
    double worst_complement = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t m = 2 + static_cast<std::size_t>(rng.below(5));
        std::vector<std::string> labels;
        for (std::size_t k = 0; k < m; ++k) labels.push_back("c" + std::to_string(k));
        ScoreTable table(labels);
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = i + 1; j < m; ++j) {
                if (rng.below(5) == 0) continue;  // omitted pair
                table.set(i, j, static_cast<double>(rng.below(5)) / 4.0);
            }
        }
        if (!table.present[0][1]) table.set(0, 1, 0.75);

        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = i + 1; j < m; ++j) {
                if (!table.present[i][j]) continue;
                worst_complement = std::max(
                    worst_complement, std::fabs(table.entries[i][j] + table.entries[j][i] - 1.0));
            }
        }

        std::vector<double> weighted(m, 0.0), majority(m, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                if (i == j || !table.present[i][j]) continue;
                weighted[i] += table.entries[i][j];
                if (table.entries[i][j] > table.entries[j][i]) majority[i] += 1.0;
            }
        }
        const auto check = [&](const Vote& got, const std::vector<double>& tally) -> bool {
            std::size_t win = 0;
            int at_max = 0;
            for (std::size_t k = 0; k < m; ++k) {
                if (tally[k] > tally[win]) win = k;
            }
            for (std::size_t k = 0; k < m; ++k) {
                if (tally[k] == tally[win]) ++at_max;
            }
            return got.index == win && got.label == table.labels[win] && got.tally == tally &&
                   got.tie == (at_max > 1);
        };
        if (!check(vote_weighted(table), weighted)) {
            return {false, "confidence-weighted vote disagrees with enumeration"};
        }
        if (!check(vote_majority(table), majority)) {
            return {false, "majority vote disagrees with enumeration"};
        }
    }
    const bool ok = worst_complement <= 1e-12;
    return {ok, fmt("1000 tables enumerated, complement residual = %.2e", worst_complement)};
}

Outcome end_to_end_crossval() {
    const auto t0 = Clock::now();
    const ExperimentConfig cfg = benchmark_config();
    const CvReport weighted = leave_house_out(benchmark_corpus(), cfg);

    ExperimentConfig cfg_major = cfg;
    cfg_major.voting = Voting::majority;
    const CvReport major = leave_house_out(benchmark_corpus(), cfg_major);

    const double elapsed = seconds_since(t0);
    g_baseline_alpha = weighted.alpha;
    const bool ok = weighted.alpha >= 0.95 && weighted.kappa.has_value() &&
                    *weighted.kappa >= 0.90 && std::fabs(weighted.alpha - major.alpha) <= 0.05 &&
                    elapsed < 300.0;
    return {ok, fmt("weighted alpha = %.4f, kappa = %.4f, majority alpha = %.4f", weighted.alpha,
                    weighted.kappa.value_or(-1.0), major.alpha) +
                    fmt(", %.0f s (limit 300 s)", elapsed)};
}

Outcome decimated_crossval() {
    const auto t0 = Clock::now();
    ExperimentConfig cfg = benchmark_config();
    cfg.target_sample_rate_hz = 600.0;  // 12x reduction of the 7200 Hz corpus
    cfg.epsilon = 1;
    const CvReport report = leave_house_out(benchmark_corpus(), cfg);
    const double elapsed = seconds_since(t0);
    const bool ok = report.alpha >= 0.85 && g_baseline_alpha >= 0.95 && elapsed < 300.0;
    return {ok, fmt("alpha = %.4f at 12x reduction (baseline %.4f), %.0f s (limit 300 s)",
                    report.alpha, g_baseline_alpha, elapsed)};
}

Outcome inventory_restriction() {
    const Dataset& base = benchmark_corpus();
    Dataset pruned;
    pruned.label_space = base.label_space;
    for (const auto& m : base.measurements) {
        const auto h = static_cast<std::size_t>(m.house_id);
        if (h < 3 && m.category == base.label_space[h]) continue;  // houses 0..2 lack one category
        pruned.measurements.push_back(m);
    }
    const ExperimentConfig cfg = benchmark_config();
    const CvReport plain = leave_house_out(pruned, cfg);
    const CvReport prior = run_with_prior_knowledge(pruned, cfg);
    if (plain.per_house.size() != prior.per_house.size()) {
        return {false, "fold lists differ between plain and restricted runs"};
    }
    double min_delta = 1.0;
    for (std::size_t k = 0; k < plain.per_house.size(); ++k) {
        if (plain.per_house[k].house_id != prior.per_house[k].house_id) {
            return {false, "fold order differs between plain and restricted runs"};
        }
        min_delta = std::min(min_delta, prior.per_house[k].alpha - plain.per_house[k].alpha);
    }
    const bool ok = min_delta >= 0.0;
    return {ok, fmt("min per-fold alpha delta = %+.4f (plain %.4f -> restricted %.4f)", min_delta,
                    plain.alpha, prior.alpha)};
}

Outcome leakage_and_reproducibility() {
    SynthSpec spec;
    spec.categories = default_categories();
    spec.categories.resize(3);
    spec.houses = 6;
    spec.instances_per_house = 2;
    spec.periods = 12;
    spec.sample_rate_hz = 1200.0;
    spec.grid_freq_hz = 60.0;
    spec.noise_sigma = 0.02;
    spec.seed = 3;
    const Dataset ds = generate(spec);

    ExperimentConfig cfg;
    cfg.epsilon = 5;
    cfg.hidden_dim = 4;
    cfg.train_opts.max_iterations = 30;
    cfg.train_opts.patience = 10;
    cfg.seed = 5;
    cfg.jobs = 1;

    const CvReport first = leave_house_out(ds, cfg);   // throws on any house overlap
    const CvReport second = leave_house_out(ds, cfg);
    ExperimentConfig threaded = cfg;
    threaded.jobs = 3;
    const CvReport third = leave_house_out(ds, threaded);

    const std::string j1 = report_to_json(first, cfg).dump(1);
    const std::string j2 = report_to_json(second, cfg).dump(1);
    const std::string j3 = report_to_json(third, threaded).dump(1);
    const bool ok = first.per_house.size() == 6 && first.skipped_folds == 0 && j1 == j2 && j1 == j3;
    return {ok, fmt("6 folds audited; identical-seed reports byte-identical across "
                    "reruns and 1 vs 3 workers (alpha = %.4f)",
                    first.alpha)};
}

Outcome external_corpus() {
    const char* dir = std::getenv("PLAID_DIR");
    if (dir == nullptr) {
        return {true, "optional: set PLAID_DIR to a measurement directory to run"};
    }
    const auto t0 = Clock::now();
    const Dataset ds = load_dataset(dir);
    ExperimentConfig cfg;  // epsilon 10, hidden 30, weighted voting
    cfg.jobs = worker_count();
    const CvReport report = leave_house_out(ds, cfg);
    const double elapsed = seconds_since(t0);
    const bool ok = std::fabs(report.alpha - 0.897) <= 0.03 && report.kappa.has_value() &&
                    std::fabs(*report.kappa - 0.882) <= 0.03;
    return {ok, fmt("alpha = %.4f (want 0.897 +/- 0.03), kappa = %.4f (want 0.882 +/- 0.03), %.0f s",
                    report.alpha, report.kappa.value_or(-1.0), elapsed)};
}

}  // namespace

int main() {
    const char* plaid = std::getenv("PLAID_DIR");

    run_criterion("kappa-formula-oracle", kappa_formula_oracle);
    run_criterion("confusion-hand-check", confusion_hand_check);
    run_criterion("gradient-finite-difference", gradient_finite_difference);
    run_criterion("normalization-properties", normalization_properties);
    run_criterion("window-expansion-count", window_expansion_count);
    run_criterion("voting-brute-force-oracle", voting_brute_force_oracle);
    run_criterion("end-to-end-crossval", end_to_end_crossval);
    run_criterion("decimated-crossval", decimated_crossval);
    run_criterion("inventory-restriction", inventory_restriction);
    run_criterion("leakage-and-reproducibility", leakage_and_reproducibility);
    if (plaid == nullptr) {
        std::printf("[SKIP] %-28s optional external corpus; set PLAID_DIR to run\n",
                    "external-corpus");
    } else {
        run_criterion("external-corpus", external_corpus);
    }

    if (g_failures == 0) {
        std::printf("all acceptance criteria passed\n");
        return 0;
    }
    std::printf("%d acceptance criteria failed\n", g_failures);
    return 1;
}
