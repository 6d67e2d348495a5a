#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "plugid/plugid.hpp"

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<std::string> split_csv(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

std::vector<plugid::CategorySpec> parse_categories(const std::string& text) {
    std::vector<plugid::CategorySpec> cats;
    for (const auto& item : split_csv(text)) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) {
            throw std::invalid_argument("category '" + item + "' must be label:family");
        }
        cats.push_back({item.substr(0, colon), plugid::wave_family_from_name(item.substr(colon + 1))});
    }
    return cats;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write '" + path + "'");
    }
    out << text;
}

struct CommonFlags {
    std::string data_dir;
    plugid::ExperimentConfig cfg;
    bool strict = false;

    void attach(CLI::App* cmd, bool with_data = true) {
        if (with_data) {
            cmd->add_option("--data", data_dir, "corpus directory (metadata.json + CSVs)")
                ->envname("PLUGID_DATA_DIR")
                ->required();
        }
        cmd->add_option("--epsilon", cfg.epsilon, "phase-sliding step in samples");
        cmd->add_option("--voting", [this](const std::vector<std::string>& v) {
                cfg.voting = plugid::voting_from_name(v.front());
                return true;
            }, "voting rule: weighted|majority")->type_name("TEXT");
        cmd->add_option("--scoring", [this](const std::vector<std::string>& v) {
                cfg.scoring = plugid::scoring_from_name(v.front());
                return true;
            }, "scoring unit: measurement|window")->type_name("TEXT");
        cmd->add_option("--train-fraction", cfg.train_fraction, "share of training houses kept per fold");
        cmd->add_option("--rate", [this](const std::vector<std::string>& v) {
                cfg.target_sample_rate_hz = std::stod(v.front());
                return true;
            }, "decimate the corpus to this rate (Hz) first")->type_name("FLOAT");
        cmd->add_option("--tau", [this](const std::vector<std::string>& v) {
                cfg.phase_shift_tau = std::stoi(v.front());
                return true;
            }, "fixed test phase offset in samples (single window)")->type_name("INT");
        cmd->add_flag("--prior-knowledge", cfg.prior_knowledge,
                      "restrict each fold to the held-out house's category inventory");
        cmd->add_option("--seed", cfg.seed, "experiment seed");
        cmd->add_option("--hidden", cfg.hidden_dim, "hidden units per pair network");
        cmd->add_option("--jobs", cfg.jobs, "concurrent folds");
        cmd->add_option("--max-iters", cfg.train_opts.max_iterations, "CG iteration cap per restart");
        cmd->add_option("--restarts", cfg.train_opts.restarts, "random restarts per pair network");
        cmd->add_option("--patience", cfg.train_opts.patience,
                        "non-improving validation checks before stopping");
        cmd->add_option("--eval-interval", cfg.train_opts.eval_interval,
                        "CG iterations between validation checks");
        cmd->add_option("--val-fraction", cfg.train_opts.validation_fraction,
                        "building-based validation share");
        cmd->add_flag("--strict", strict, "nonzero exit when folds were skipped or values rejected");
    }
};

int finish_run(const plugid::CvReport& report, bool strict) {
    for (const auto& w : report.warnings) {
        std::cerr << "warning: " << w << "\n";
    }
    if (report.skipped_folds > 0 && strict) {
        std::cerr << "error: " << report.skipped_folds << " fold(s) skipped under --strict\n";
        return 3;
    }
    return 0;
}

int cmd_synth(const std::string& out_dir, const plugid::SynthSpec& spec) {
    const auto start = Clock::now();
    plugid::Dataset ds = plugid::generate(spec);
    plugid::save_dataset(ds, out_dir);
    const std::string corpus_digest = plugid::digest_directory(out_dir);

    plugid::RunManifest manifest;
    manifest.command = "synth";
    manifest.config = {{"houses", spec.houses},
                       {"instances_per_house", spec.instances_per_house},
                       {"periods", spec.periods},
                       {"sample_rate_hz", spec.sample_rate_hz},
                       {"grid_freq_hz", spec.grid_freq_hz},
                       {"noise_sigma", spec.noise_sigma},
                       {"seed", spec.seed}};
    nlohmann::json cats = nlohmann::json::array();
    for (const auto& c : spec.categories) {
        cats.push_back({{"label", c.label}, {"family", plugid::wave_family_name(c.family)}});
    }
    manifest.config["categories"] = std::move(cats);
    manifest.input_digest = "";
    manifest.output_digests["corpus"] = corpus_digest;
    manifest.elapsed_seconds = seconds_since(start);
    manifest.save((fs::path(out_dir) / "run_manifest.json").string());
    std::printf("wrote %zu measurements to %s (digest %s)\n", ds.measurements.size(), out_dir.c_str(),
                corpus_digest.c_str());
    return 0;
}

int cmd_crossval(const CommonFlags& flags, const std::string& out_dir) {
    const auto start = Clock::now();
    plugid::Dataset ds = plugid::load_dataset(flags.data_dir);
    const std::string input_digest = plugid::digest_directory(flags.data_dir);
    plugid::CvReport report = plugid::leave_house_out(ds, flags.cfg);

    fs::create_directories(out_dir);
    const std::string json_path = (fs::path(out_dir) / "report.json").string();
    const std::string text_path = (fs::path(out_dir) / "report.txt").string();
    write_text(json_path, plugid::report_to_json(report, flags.cfg).dump(1) + "\n");
    write_text(text_path, plugid::report_to_text(report));

    plugid::RunManifest manifest;
    manifest.command = "crossval";
    manifest.config = plugid::config_to_json(flags.cfg);
    manifest.config["data"] = flags.data_dir;
    manifest.input_digest = input_digest;
    manifest.jobs = flags.cfg.jobs;
    manifest.output_digests["report.json"] = plugid::hex64(plugid::fnv1a64_file(json_path));
    manifest.output_digests["report.txt"] = plugid::hex64(plugid::fnv1a64_file(text_path));
    manifest.elapsed_seconds = seconds_since(start);
    manifest.save((fs::path(out_dir) / "run_manifest.json").string());

    std::printf("%s", plugid::report_to_text(report).c_str());
    return finish_run(report, flags.strict);
}

int cmd_study(const CommonFlags& flags, const std::string& out_dir, const std::string& study,
              const std::string& values_text) {
    const auto start = Clock::now();
    plugid::Dataset ds = plugid::load_dataset(flags.data_dir);
    const std::string input_digest = plugid::digest_directory(flags.data_dir);

    plugid::SweepResult sweep;
    if (study == "size") {
        std::vector<double> rs;
        for (const auto& v : split_csv(values_text)) {
            rs.push_back(std::stod(v));
        }
        sweep = plugid::study_training_size(ds, flags.cfg, rs);
    } else if (study == "freq") {
        std::vector<double> rates;
        for (const auto& v : split_csv(values_text)) {
            rates.push_back(std::stod(v));
        }
        sweep = plugid::study_sampling_freq(ds, flags.cfg, rates);
    } else if (study == "phase") {
        std::vector<int> taus;
        for (const auto& v : split_csv(values_text)) {
            taus.push_back(std::stoi(v));
        }
        sweep = plugid::study_phase_shift(ds, flags.cfg, taus);
    } else {
        throw std::invalid_argument("unknown study '" + study + "' (size|freq|phase)");
    }

    fs::create_directories(out_dir);
    const std::string csv_path = (fs::path(out_dir) / ("study_" + study + ".csv")).string();
    write_text(csv_path, plugid::sweep_to_csv(sweep));

    plugid::RunManifest manifest;
    manifest.command = "study";
    manifest.config = plugid::config_to_json(flags.cfg);
    manifest.config["data"] = flags.data_dir;
    manifest.config["study"] = study;
    manifest.config["values"] = values_text;
    manifest.config["rejected"] = sweep.rejected;
    manifest.input_digest = input_digest;
    manifest.jobs = flags.cfg.jobs;
    manifest.output_digests["csv"] = plugid::hex64(plugid::fnv1a64_file(csv_path));
    manifest.elapsed_seconds = seconds_since(start);
    manifest.save((fs::path(out_dir) / "run_manifest.json").string());

    std::printf("%s", plugid::sweep_to_csv(sweep).c_str());
    int skipped = 0;
    for (const auto& r : sweep.rejected) {
        std::cerr << "rejected: " << r << "\n";
    }
    for (const auto& report : sweep.reports) {
        skipped += report.skipped_folds;
        for (const auto& w : report.warnings) {
            std::cerr << "warning: " << w << "\n";
        }
    }
    if (flags.strict && (skipped > 0 || !sweep.rejected.empty())) {
        std::cerr << "error: skipped folds or rejected values under --strict\n";
        return 3;
    }
    return 0;
}

int cmd_train(const CommonFlags& flags, const std::string& out_dir) {
    const auto start = Clock::now();
    plugid::Dataset ds = plugid::load_dataset(flags.data_dir);
    const std::string input_digest = plugid::digest_directory(flags.data_dir);
    plugid::validate_config(flags.cfg);

    std::size_t dropped = 0;
    std::vector<plugid::FeatureVector> features =
        plugid::detail::training_features(ds.measurements, flags.cfg.epsilon, &dropped);
    std::vector<std::string> warnings;
    auto [train_part, val_part] = plugid::split_validation_by_house(
        features, flags.cfg.train_opts.validation_fraction, plugid::mix_seed(flags.cfg.seed, 202),
        &warnings);
    plugid::TrainOptions opts = flags.cfg.train_opts;
    opts.seed = plugid::mix_seed(flags.cfg.seed, 303);
    plugid::Ensemble ens = plugid::train_ensemble(train_part, val_part, ds.label_space,
                                                  flags.cfg.hidden_dim, opts, flags.cfg.jobs);
    plugid::save_ensemble(ens, out_dir);

    plugid::RunManifest manifest;
    manifest.command = "train";
    manifest.config = plugid::config_to_json(flags.cfg);
    manifest.config["data"] = flags.data_dir;
    manifest.input_digest = input_digest;
    manifest.jobs = flags.cfg.jobs;
    manifest.elapsed_seconds = seconds_since(start);
    manifest.save((fs::path(out_dir) / "run_manifest.json").string());

    for (const auto& w : warnings) {
        std::cerr << "warning: " << w << "\n";
    }
    std::printf("trained %zu pair networks over %zu labels into %s\n",
                ens.networks.size() - ens.omitted_pairs().size(), ens.label_space.size(),
                out_dir.c_str());
    return 0;
}

int cmd_predict(const CommonFlags& flags, const std::string& model_dir, const std::string& out_file) {
    const auto start = Clock::now();
    plugid::Dataset ds = plugid::load_dataset(flags.data_dir);
    plugid::Ensemble ens = plugid::load_ensemble(model_dir);

    std::string csv = "house,appliance_id,true_label,predicted_label\n";
    plugid::ConfusionMatrix cm(ens.label_space);
    std::size_t scored = 0;
    for (const auto& m : ds.measurements) {
        const int d = plugid::samples_per_period(m.sample_rate_hz, m.grid_freq_hz);
        const auto windows =
            plugid::expand_measurement(m, plugid::steady_state_window(m, d), flags.cfg.epsilon, d);
        if (windows.empty()) {
            std::cerr << "warning: no windows for house " << m.house_id << " " << m.category << "\n";
            continue;
        }
        std::vector<std::size_t> wins(ens.num_labels(), 0);
        for (const auto& w : windows) {
            const plugid::Vote v = flags.cfg.voting == plugid::Voting::weighted
                                       ? plugid::predict_weighted(ens, w.values)
                                       : plugid::predict_majority(ens, w.values);
            ++wins[v.index];
        }
        std::size_t best = 0;
        for (std::size_t i = 1; i < wins.size(); ++i) {
            if (wins[i] > wins[best]) {
                best = i;
            }
        }
        const std::string& predicted = ens.label_space[best];
        csv += std::to_string(m.house_id) + "," + std::to_string(m.appliance_id) + "," + m.category +
               "," + predicted + "\n";
        if (std::find(ens.label_space.begin(), ens.label_space.end(), m.category) !=
            ens.label_space.end()) {
            cm.accumulate(m.category, predicted);
            ++scored;
        }
    }
    write_text(out_file, csv);

    plugid::RunManifest manifest;
    manifest.command = "predict";
    manifest.config = plugid::config_to_json(flags.cfg);
    manifest.config["data"] = flags.data_dir;
    manifest.config["model"] = model_dir;
    manifest.input_digest = plugid::digest_directory(flags.data_dir);
    manifest.output_digests["predictions"] = plugid::hex64(plugid::fnv1a64_file(out_file));
    manifest.elapsed_seconds = seconds_since(start);
    manifest.save(out_file + ".manifest.json");

    if (scored > 0) {
        std::printf("alpha=%.4f over %zu measurements\n", plugid::accuracy(cm), scored);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"one-vs-one appliance identification from plug-level waveforms"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a deterministic synthetic corpus");
    plugid::SynthSpec spec;
    spec.categories = plugid::default_categories();
    std::string synth_out;
    std::string categories_text;
    synth->add_option("--out", synth_out, "output corpus directory")->required();
    synth->add_option("--houses", spec.houses, "number of houses");
    synth->add_option("--instances", spec.instances_per_house, "instances per house and category");
    synth->add_option("--periods", spec.periods, "grid periods per measurement");
    synth->add_option("--fs", spec.sample_rate_hz, "sample rate in Hz");
    synth->add_option("--fg", spec.grid_freq_hz, "grid frequency in Hz");
    synth->add_option("--noise", spec.noise_sigma, "relative noise sigma");
    synth->add_option("--seed", spec.seed, "corpus seed");
    synth->add_option("--categories", categories_text,
                      "comma list of label:family (families: resistive, reactive, phase_cut, rectifier)");

    // crossval
    auto* crossval = app.add_subcommand("crossval", "leave-house-out cross-validation");
    CommonFlags cv_flags;
    std::string cv_out = "crossval_out";
    cv_flags.attach(crossval);
    crossval->add_option("--out", cv_out, "output directory for report.json/report.txt");

    // study
    auto* study = app.add_subcommand("study", "sweep training size, sampling rate, or test phase");
    CommonFlags study_flags;
    std::string study_out = "study_out";
    std::string study_kind;
    std::string study_values;
    study_flags.attach(study);
    study->add_option("--study", study_kind, "size|freq|phase")->required();
    study->add_option("--values", study_values, "comma-separated sweep values")->required();
    study->add_option("--out", study_out, "output directory for the sweep CSV");

    // train
    auto* train = app.add_subcommand("train", "train one ensemble on a whole corpus");
    CommonFlags train_flags;
    std::string train_out = "model";
    train_flags.attach(train);
    train->add_option("--out", train_out, "model output directory");

    // predict
    auto* predict = app.add_subcommand("predict", "classify a corpus with a saved ensemble");
    CommonFlags predict_flags;
    std::string predict_model;
    std::string predict_out = "predictions.csv";
    predict_flags.attach(predict);
    predict->add_option("--model", predict_model, "ensemble directory")->required();
    predict->add_option("--out", predict_out, "predictions CSV path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            if (!categories_text.empty()) {
                spec.categories = parse_categories(categories_text);
            }
            return cmd_synth(synth_out, spec);
        }
        if (crossval->parsed()) {
            return cmd_crossval(cv_flags, cv_out);
        }
        if (study->parsed()) {
            return cmd_study(study_flags, study_out, study_kind, study_values);
        }
        if (train->parsed()) {
            return cmd_train(train_flags, train_out);
        }
        if (predict->parsed()) {
            return cmd_predict(predict_flags, predict_model, predict_out);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
