#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <limits>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "plugid/dataio.hpp"
#include "plugid/decimate.hpp"
#include "plugid/ensemble.hpp"
#include "plugid/metrics.hpp"
#include "plugid/mlp.hpp"
#include "plugid/rng.hpp"
#include "plugid/signal.hpp"

namespace plugid {

enum class Voting { weighted, majority };
enum class Scoring { measurement, window };

inline std::string voting_name(Voting v) {
    return v == Voting::weighted ? "weighted" : "majority";
}

inline Voting voting_from_name(const std::string& name) {
    if (name == "weighted") return Voting::weighted;
    if (name == "majority") return Voting::majority;
    throw std::invalid_argument("unknown voting rule '" + name + "'");
}

inline std::string scoring_name(Scoring s) {
    return s == Scoring::measurement ? "measurement" : "window";
}

inline Scoring scoring_from_name(const std::string& name) {
    if (name == "measurement") return Scoring::measurement;
    if (name == "window") return Scoring::window;
    throw std::invalid_argument("unknown scoring mode '" + name + "'");
}

struct ExperimentConfig {
    int epsilon = 10;                             // phase-sliding step in samples
    Voting voting = Voting::weighted;
    double train_fraction = 1.0;                  // share of training houses kept per fold
    std::optional<double> target_sample_rate_hz;  // decimate the corpus first when set
    std::optional<int> phase_shift_tau;           // single fixed test phase when set
    bool prior_knowledge = false;                 // restrict folds to the test house inventory
    std::uint64_t seed = 1;
    TrainOptions train_opts;
    int hidden_dim = 30;
    int jobs = 1;                                 // concurrent folds
    Scoring scoring = Scoring::measurement;
};

inline void validate_config(const ExperimentConfig& cfg) {
    if (cfg.epsilon < 1) {
        throw std::invalid_argument("config: epsilon must be >= 1");
    }
    if (!(cfg.train_fraction > 0.0) || cfg.train_fraction > 1.0) {
        throw std::invalid_argument("config: train_fraction must be in (0,1]");
    }
    if (cfg.hidden_dim < 1) {
        throw std::invalid_argument("config: hidden_dim must be >= 1");
    }
    if (cfg.jobs < 1) {
        throw std::invalid_argument("config: jobs must be >= 1");
    }
    if (cfg.phase_shift_tau && *cfg.phase_shift_tau < 0) {
        throw std::invalid_argument("config: phase shift must be >= 0");
    }
    if (!(cfg.train_opts.validation_fraction > 0.0) || cfg.train_opts.validation_fraction >= 1.0) {
        throw std::invalid_argument("config: validation_fraction must be in (0,1)");
    }
    if (cfg.train_opts.patience < 1 || cfg.train_opts.eval_interval < 1 ||
        cfg.train_opts.max_iterations < 1 || cfg.train_opts.restarts < 1) {
        throw std::invalid_argument("config: training options must be >= 1");
    }
}

struct HouseResult {
    int house_id = 0;
    ConfusionMatrix matrix;
    double alpha = 0.0;
};

struct CvReport {
    std::vector<HouseResult> per_house;  // ascending house id, skipped folds absent
    ConfusionMatrix aggregate;
    double alpha = std::numeric_limits<double>::quiet_NaN();
    std::optional<double> kappa;
    std::int64_t tie_count = 0;
    std::vector<std::string> omitted_pairs;
    std::vector<std::string> warnings;
    int skipped_folds = 0;
    std::string voting_mode;
    std::string scoring_mode;
};

// Building-based validation split: houses are shuffled by seed and assigned
// to validation until the requested share of features is covered. Houses are
// never split; training never empties. With a single house the features
// validate on themselves, reported through `warnings`.
inline std::pair<std::vector<FeatureVector>, std::vector<FeatureVector>> split_validation_by_house(
    const std::vector<FeatureVector>& features, double fraction, std::uint64_t seed,
    std::vector<std::string>* warnings = nullptr) {
    if (features.empty()) {
        throw std::invalid_argument("validation split: no features");
    }
    if (!(fraction > 0.0) || fraction >= 1.0) {
        throw std::invalid_argument("validation split: fraction must be in (0,1)");
    }
    std::set<int> distinct;
    for (const auto& f : features) {
        distinct.insert(f.house_id);
    }
    if (distinct.size() < 2) {
        if (warnings != nullptr) {
            warnings->push_back("validation split: single training house " +
                                std::to_string(*distinct.begin()) + ", validating on training data");
        }
        return {features, features};
    }
    std::vector<int> houses(distinct.begin(), distinct.end());
    Rng rng(seed);
    rng.shuffle(houses);
    std::set<int> val_houses;
    std::size_t covered = 0;
    const double total = static_cast<double>(features.size());
    for (std::size_t k = 0; k < houses.size() - 1; ++k) {  // keep >= 1 training house
        if (static_cast<double>(covered) >= fraction * total) {
            break;
        }
        val_houses.insert(houses[k]);
        for (const auto& f : features) {
            if (f.house_id == houses[k]) {
                ++covered;
            }
        }
    }
    std::vector<FeatureVector> train_part, val_part;
    for (const auto& f : features) {
        (val_houses.count(f.house_id) ? val_part : train_part).push_back(f);
    }
    return {std::move(train_part), std::move(val_part)};
}

namespace detail {

// Phase-sliding expansion over the final two periods of each measurement.
// Features with a constant channel are excluded from training.
inline std::vector<FeatureVector> training_features(const std::vector<Measurement>& ms, int epsilon,
                                                    std::size_t* dropped = nullptr) {
    std::vector<FeatureVector> out;
    for (const auto& m : ms) {
        const int d = samples_per_period(m.sample_rate_hz, m.grid_freq_hz);
        for (auto& f : expand_measurement(m, steady_state_window(m, d), epsilon, d)) {
            if (f.degenerate) {
                if (dropped != nullptr) {
                    ++*dropped;
                }
                continue;
            }
            out.push_back(std::move(f));
        }
    }
    return out;
}

struct FoldOutcome {
    int house_id = 0;
    bool skipped = false;
    ConfusionMatrix matrix;
    std::int64_t ties = 0;
    std::vector<std::string> omitted;
    std::vector<std::string> warnings;
};

inline FoldOutcome run_fold(const Dataset& ds, int house, const ExperimentConfig& cfg) {
    FoldOutcome fold;
    fold.house_id = house;
    fold.matrix = ConfusionMatrix(ds.label_space);
    const std::uint64_t fold_seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(house));

    auto [train_ds, test_ds] = partition_by_house(ds, house);
    if (cfg.train_fraction < 1.0) {
        train_ds = subsample_houses(train_ds, cfg.train_fraction, mix_seed(fold_seed, 101));
    }

    std::size_t dropped = 0;
    std::vector<FeatureVector> features = training_features(train_ds.measurements, cfg.epsilon, &dropped);
    if (dropped > 0) {
        fold.warnings.push_back("house " + std::to_string(house) + ": dropped " +
                                std::to_string(dropped) + " constant-channel training windows");
    }
    std::set<std::string> classes;
    for (const auto& f : features) {
        classes.insert(f.label);
    }
    if (classes.size() < 2) {
        fold.skipped = true;
        fold.warnings.push_back("house " + std::to_string(house) + ": fold skipped, training data has " +
                                std::to_string(classes.size()) + " class(es)");
        return fold;
    }

    // restriction target under prior knowledge: the held-out house inventory
    std::vector<std::string> inventory;
    if (cfg.prior_knowledge) {
        std::set<std::string> inv;
        for (const auto& m : test_ds.measurements) {
            inv.insert(m.category);
        }
        inventory.assign(inv.begin(), inv.end());
        if (inventory.size() < 2) {
            fold.skipped = true;
            fold.warnings.push_back("house " + std::to_string(house) +
                                    ": fold skipped, house inventory has fewer than 2 categories");
            return fold;
        }
    }

    auto [train_part, val_part] =
        split_validation_by_house(features, cfg.train_opts.validation_fraction,
                                  mix_seed(fold_seed, 202), &fold.warnings);
    for (const auto& f : train_part) {
        if (f.house_id == house) {
            throw std::logic_error("leakage audit: held-out house in training features");
        }
    }
    for (const auto& f : val_part) {
        if (f.house_id == house) {
            throw std::logic_error("leakage audit: held-out house in validation features");
        }
    }

    TrainOptions opts = cfg.train_opts;
    opts.seed = mix_seed(fold_seed, 303);
    Ensemble ens = train_ensemble(train_part, val_part, ds.label_space, cfg.hidden_dim, opts, 1);
    for (const auto& [a, b] : ens.omitted_pairs()) {
        fold.omitted.push_back("house " + std::to_string(house) + ": " + a + "|" + b);
    }
    const Ensemble eval_ens = cfg.prior_knowledge ? restrict_labels(ens, inventory) : std::move(ens);

    for (const auto& m : test_ds.measurements) {
        const int d = samples_per_period(m.sample_rate_hz, m.grid_freq_hz);
        std::vector<FeatureVector> windows;
        if (cfg.phase_shift_tau) {
            const std::size_t tau = static_cast<std::size_t>(*cfg.phase_shift_tau);
            if (tau + static_cast<std::size_t>(d) > m.size()) {
                fold.warnings.push_back("house " + std::to_string(house) + ": " + m.category + " #" +
                                        std::to_string(m.appliance_id) + ": phase " +
                                        std::to_string(tau) + " out of range, measurement skipped");
                continue;
            }
            windows.push_back(build_feature(m, tau, d));
        } else {
            windows = expand_measurement(m, steady_state_window(m, d), cfg.epsilon, d);
        }
        if (windows.empty()) {
            fold.warnings.push_back("house " + std::to_string(house) + ": " + m.category + " #" +
                                    std::to_string(m.appliance_id) +
                                    ": no test windows (step exceeds period), measurement skipped");
            continue;
        }

        std::vector<std::size_t> wins(eval_ens.num_labels(), 0);
        for (const auto& w : windows) {
            const Vote v = cfg.voting == Voting::weighted ? predict_weighted(eval_ens, w.values)
                                                          : predict_majority(eval_ens, w.values);
            if (v.tie) {
                ++fold.ties;
            }
            if (cfg.scoring == Scoring::window) {
                fold.matrix.accumulate(m.category, v.label);
            } else {
                ++wins[v.index];
            }
        }
        if (cfg.scoring == Scoring::measurement) {
            std::size_t best = 0;
            for (std::size_t i = 1; i < wins.size(); ++i) {
                if (wins[i] > wins[best]) {
                    best = i;
                }
            }
            for (std::size_t i = 0; i < wins.size(); ++i) {
                if (i != best && wins[i] == wins[best]) {
                    ++fold.ties;
                    break;
                }
            }
            fold.matrix.accumulate(m.category, eval_ens.label_space[best]);
        }
    }
    return fold;
}

}  // namespace detail

// Leave-house-out cross-validation: one fold per house, each training on all
// other houses and scoring the held-out one. Folds run concurrently up to
// cfg.jobs and are merged in ascending house order, so the report does not
// depend on scheduling.
inline CvReport leave_house_out(const Dataset& ds, const ExperimentConfig& cfg) {
    validate_config(cfg);
    validate_dataset(ds);
    const std::vector<int> houses = ds.house_ids();
    if (houses.size() < 2) {
        throw std::invalid_argument("leave_house_out: need at least 2 houses");
    }
    if (ds.label_space.size() < 2) {
        throw std::invalid_argument("leave_house_out: need at least 2 categories");
    }

    Dataset working;
    const Dataset* data = &ds;
    if (cfg.target_sample_rate_hz) {
        working.label_space = ds.label_space;
        for (const auto& m : ds.measurements) {
            working.measurements.push_back(
                apply_decimation(m, design_decimation(m.sample_rate_hz, *cfg.target_sample_rate_hz)));
        }
        data = &working;
    }

    std::vector<detail::FoldOutcome> folds(houses.size());
    std::vector<std::exception_ptr> errors(houses.size());
    const int workers = std::max(1, std::min<int>(cfg.jobs, static_cast<int>(houses.size())));
    if (workers <= 1) {
        for (std::size_t k = 0; k < houses.size(); ++k) {
            folds[k] = detail::run_fold(*data, houses[k], cfg);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t k = next.fetch_add(1); k < houses.size(); k = next.fetch_add(1)) {
                    try {
                        folds[k] = detail::run_fold(*data, houses[k], cfg);
                    } catch (...) {
                        errors[k] = std::current_exception();
                    }
                }
            });
        }
        for (auto& th : pool) {
            th.join();
        }
        for (const auto& err : errors) {
            if (err) {
                std::rethrow_exception(err);
            }
        }
    }

    CvReport report;
    report.aggregate = ConfusionMatrix(data->label_space);
    report.voting_mode = voting_name(cfg.voting);
    report.scoring_mode = scoring_name(cfg.scoring);
    for (const auto& fold : folds) {
        report.warnings.insert(report.warnings.end(), fold.warnings.begin(), fold.warnings.end());
        report.omitted_pairs.insert(report.omitted_pairs.end(), fold.omitted.begin(), fold.omitted.end());
        if (fold.skipped) {
            ++report.skipped_folds;
            continue;
        }
        report.tie_count += fold.ties;
        report.aggregate += fold.matrix;
        HouseResult hr;
        hr.house_id = fold.house_id;
        hr.matrix = fold.matrix;
        hr.alpha = fold.matrix.total() > 0 ? accuracy(fold.matrix)
                                           : std::numeric_limits<double>::quiet_NaN();
        report.per_house.push_back(std::move(hr));
    }
    if (report.aggregate.total() > 0) {
        report.alpha = accuracy(report.aggregate);
        report.kappa = cohens_kappa(report.aggregate);
    } else {
        report.warnings.push_back("no fold produced predictions");
    }
    return report;
}

// Leave-house-out with each fold restricted to the held-out house's true
// category inventory.
inline CvReport run_with_prior_knowledge(const Dataset& ds, const ExperimentConfig& cfg) {
    ExperimentConfig restricted = cfg;
    restricted.prior_knowledge = true;
    return leave_house_out(ds, restricted);
}

struct SweepRow {
    double x = 0.0;
    double alpha = 0.0;
    std::optional<double> kappa;
};

struct SweepResult {
    std::vector<SweepRow> rows;          // one per accepted sweep value
    std::vector<CvReport> reports;       // parallel to rows
    std::vector<std::string> rejected;   // sweep values refused, with reasons
};

// Sweep over the share of training houses kept per fold.
inline SweepResult study_training_size(const Dataset& ds, const ExperimentConfig& cfg,
                                       const std::vector<double>& fractions) {
    SweepResult result;
    for (const double r : fractions) {
        if (!(r > 0.0) || r > 1.0) {
            result.rejected.push_back("r=" + std::to_string(r) + ": outside (0,1]");
            continue;
        }
        ExperimentConfig run_cfg = cfg;
        run_cfg.train_fraction = r;
        CvReport report = leave_house_out(ds, run_cfg);
        result.rows.push_back({r, report.alpha, report.kappa});
        result.reports.push_back(std::move(report));
    }
    return result;
}

// Sweep over target sampling rates; rates that do not divide into an
// integral samples-per-period (or do not reduce the rate) are rejected.
inline SweepResult study_sampling_freq(const Dataset& ds, const ExperimentConfig& cfg,
                                       const std::vector<double>& rates_hz) {
    SweepResult result;
    for (const double rate : rates_hz) {
        ExperimentConfig run_cfg = cfg;
        run_cfg.target_sample_rate_hz = rate;
        try {
            CvReport report = leave_house_out(ds, run_cfg);
            result.rows.push_back({rate, report.alpha, report.kappa});
            result.reports.push_back(std::move(report));
        } catch (const std::domain_error& e) {
            result.rejected.push_back("rate " + std::to_string(rate) + " Hz: " + e.what());
        } catch (const std::length_error& e) {
            result.rejected.push_back("rate " + std::to_string(rate) + " Hz: " + e.what());
        }
    }
    return result;
}

// Sweep over fixed test phases: a single window at each phase, training
// untouched.
inline SweepResult study_phase_shift(const Dataset& ds, const ExperimentConfig& cfg,
                                     const std::vector<int>& taus) {
    SweepResult result;
    for (const int tau : taus) {
        if (tau < 0) {
            result.rejected.push_back("tau=" + std::to_string(tau) + ": negative phase");
            continue;
        }
        ExperimentConfig run_cfg = cfg;
        run_cfg.phase_shift_tau = tau;
        CvReport report = leave_house_out(ds, run_cfg);
        result.rows.push_back({static_cast<double>(tau), report.alpha, report.kappa});
        result.reports.push_back(std::move(report));
    }
    return result;
}

inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
    nlohmann::json j;
    j["epsilon"] = cfg.epsilon;
    j["voting"] = voting_name(cfg.voting);
    j["scoring"] = scoring_name(cfg.scoring);
    j["train_fraction"] = cfg.train_fraction;
    j["target_sample_rate_hz"] =
        cfg.target_sample_rate_hz ? nlohmann::json(*cfg.target_sample_rate_hz) : nlohmann::json(nullptr);
    j["phase_shift_tau"] =
        cfg.phase_shift_tau ? nlohmann::json(*cfg.phase_shift_tau) : nlohmann::json(nullptr);
    j["prior_knowledge"] = cfg.prior_knowledge;
    j["seed"] = cfg.seed;
    j["hidden_dim"] = cfg.hidden_dim;
    j["train_opts"] = {{"max_iterations", cfg.train_opts.max_iterations},
                       {"restarts", cfg.train_opts.restarts},
                       {"patience", cfg.train_opts.patience},
                       {"eval_interval", cfg.train_opts.eval_interval},
                       {"validation_fraction", cfg.train_opts.validation_fraction}};
    return j;
}

inline nlohmann::json report_to_json(const CvReport& report, const ExperimentConfig& cfg) {
    nlohmann::json j;
    j["config"] = config_to_json(cfg);
    j["voting"] = report.voting_mode;
    j["scoring"] = report.scoring_mode;
    j["alpha"] = std::isfinite(report.alpha) ? nlohmann::json(report.alpha) : nlohmann::json(nullptr);
    j["kappa"] = report.kappa ? nlohmann::json(*report.kappa) : nlohmann::json(nullptr);
    j["tie_count"] = report.tie_count;
    j["skipped_folds"] = report.skipped_folds;
    j["omitted_pairs"] = report.omitted_pairs;
    j["warnings"] = report.warnings;
    j["aggregate"] = to_json(report.aggregate);
    nlohmann::json houses = nlohmann::json::array();
    for (const auto& hr : report.per_house) {
        houses.push_back({{"house", hr.house_id},
                          {"alpha", std::isfinite(hr.alpha) ? nlohmann::json(hr.alpha) : nlohmann::json(nullptr)},
                          {"matrix", hr.matrix.counts()},
                          {"n", hr.matrix.total()}});
    }
    j["per_house"] = std::move(houses);
    return j;
}

inline std::string report_to_text(const CvReport& report) {
    std::string out;
    char line[160];
    out += "voting=" + report.voting_mode + " scoring=" + report.scoring_mode + "\n\n";
    out += format_table(report.aggregate);
    out += "\nper-house results\n";
    for (const auto& hr : report.per_house) {
        std::snprintf(line, sizeof(line), "house %-4d n=%-5lld alpha=%.4f\n", hr.house_id,
                      static_cast<long long>(hr.matrix.total()), hr.alpha);
        out += line;
    }
    std::snprintf(line, sizeof(line), "\nties=%lld skipped_folds=%d omitted_pairs=%zu warnings=%zu\n",
                  static_cast<long long>(report.tie_count), report.skipped_folds,
                  report.omitted_pairs.size(), report.warnings.size());
    out += line;
    for (const auto& w : report.warnings) {
        out += "warning: " + w + "\n";
    }
    for (const auto& p : report.omitted_pairs) {
        out += "omitted: " + p + "\n";
    }
    return out;
}

// Plot-ready sweep serialization: header then "x,alpha,kappa" per row.
inline std::string sweep_to_csv(const SweepResult& result) {
    std::string out = "x,alpha,kappa\n";
    char line[96];
    for (const auto& row : result.rows) {
        if (row.kappa) {
            std::snprintf(line, sizeof(line), "%.10g,%.10g,%.10g\n", row.x, row.alpha, *row.kappa);
        } else {
            std::snprintf(line, sizeof(line), "%.10g,%.10g,nan\n", row.x, row.alpha);
        }
        out += line;
    }
    return out;
}

}  // namespace plugid
