#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "plugid/mlp.hpp"
#include "plugid/signal.hpp"

namespace plugid {

inline std::size_t pair_count(std::size_t num_labels) {
    return num_labels * (num_labels - 1) / 2;
}

// Index of the unordered pair (i, j), i < j, in the flattened upper triangle.
inline std::size_t pair_index(std::size_t i, std::size_t j, std::size_t num_labels) {
    if (i >= j || j >= num_labels) {
        throw std::out_of_range("pair_index: need i < j < number of labels");
    }
    return i * num_labels - i * (i + 1) / 2 + (j - i - 1);
}

struct PairDiagnostics {
    double validation_loss = 0.0;
    int iterations = 0;
    int aborted_restarts = 0;
};

// One-vs-one ensemble: one binary network per unordered label pair. A pair
// whose training fold lacked one of its classes stays untrained and
// contributes nothing to any vote.
struct Ensemble {
    std::vector<std::string> label_space;
    int input_dim = 0;
    int hidden_dim = 0;
    std::vector<Network> networks;          // pair_count entries, triangular order
    std::vector<std::uint8_t> trained;      // parallel to networks
    std::vector<PairDiagnostics> diagnostics;

    std::size_t num_labels() const { return label_space.size(); }

    std::size_t index_of(const std::string& label) const {
        const auto it = std::find(label_space.begin(), label_space.end(), label);
        if (it == label_space.end()) {
            throw std::invalid_argument("ensemble: unknown label '" + label + "'");
        }
        return static_cast<std::size_t>(it - label_space.begin());
    }

    std::vector<std::pair<std::string, std::string>> omitted_pairs() const {
        std::vector<std::pair<std::string, std::string>> out;
        for (std::size_t i = 0; i < num_labels(); ++i) {
            for (std::size_t j = i + 1; j < num_labels(); ++j) {
                if (!trained[pair_index(i, j, num_labels())]) {
                    out.emplace_back(label_space[i], label_space[j]);
                }
            }
        }
        return out;
    }
};

// Features of the two classes as a training batch: targets [1,0] for the
// first label, [0,1] for the second.
inline Batch pairwise_subset(const std::vector<FeatureVector>& features, const std::string& label_i,
                             const std::string& label_j) {
    if (label_i == label_j) {
        throw std::invalid_argument("pairwise_subset: labels must differ");
    }
    std::vector<const FeatureVector*> picked;
    std::size_t count_i = 0, count_j = 0;
    for (const auto& f : features) {
        if (f.label == label_i) {
            ++count_i;
            picked.push_back(&f);
        } else if (f.label == label_j) {
            ++count_j;
            picked.push_back(&f);
        }
    }
    if (count_i == 0 || count_j == 0) {
        throw std::invalid_argument("pairwise_subset: no features labeled '" +
                                    (count_i == 0 ? label_i : label_j) + "'");
    }
    const Eigen::Index dim = static_cast<Eigen::Index>(picked.front()->values.size());
    Batch batch;
    batch.inputs.resize(dim, static_cast<Eigen::Index>(picked.size()));
    batch.targets.resize(2, static_cast<Eigen::Index>(picked.size()));
    for (std::size_t c = 0; c < picked.size(); ++c) {
        if (static_cast<Eigen::Index>(picked[c]->values.size()) != dim) {
            throw std::invalid_argument("pairwise_subset: inconsistent feature dimensions");
        }
        for (Eigen::Index r = 0; r < dim; ++r) {
            batch.inputs(r, static_cast<Eigen::Index>(c)) = picked[c]->values[static_cast<std::size_t>(r)];
        }
        const bool first = picked[c]->label == label_i;
        batch.targets(0, static_cast<Eigen::Index>(c)) = first ? 1.0 : 0.0;
        batch.targets(1, static_cast<Eigen::Index>(c)) = first ? 0.0 : 1.0;
    }
    return batch;
}

// Train one network per label pair over a shared immutable feature set. The
// seed for pair k is opts.seed XOR k, so results do not depend on training
// order or thread count. Pairs with an absent class are skipped; pairs whose
// classes never reach the validation split validate on their training data.
inline Ensemble train_ensemble(const std::vector<FeatureVector>& train_features,
                               const std::vector<FeatureVector>& val_features,
                               const std::vector<std::string>& label_space, int hidden_dim,
                               const TrainOptions& opts, int jobs = 1) {
    if (label_space.size() < 2) {
        throw std::invalid_argument("train_ensemble: need at least 2 labels");
    }
    if (train_features.empty()) {
        throw std::invalid_argument("train_ensemble: no training features");
    }
    for (const auto& f : train_features) {
        if (std::find(label_space.begin(), label_space.end(), f.label) == label_space.end()) {
            throw std::invalid_argument("train_ensemble: feature labeled '" + f.label +
                                        "' outside the label space");
        }
    }

    Ensemble ens;
    ens.label_space = label_space;
    ens.hidden_dim = hidden_dim;
    ens.input_dim = static_cast<int>(train_features.front().values.size());
    const std::size_t pairs = pair_count(label_space.size());
    ens.networks.resize(pairs);
    ens.trained.assign(pairs, 0);
    ens.diagnostics.resize(pairs);

    std::vector<std::size_t> label_counts(label_space.size(), 0);
    for (const auto& f : train_features) {
        label_counts[std::find(label_space.begin(), label_space.end(), f.label) - label_space.begin()]++;
    }

    struct PairTask {
        std::size_t i, j, idx;
    };
    std::vector<PairTask> tasks;
    for (std::size_t i = 0; i < label_space.size(); ++i) {
        for (std::size_t j = i + 1; j < label_space.size(); ++j) {
            if (label_counts[i] > 0 && label_counts[j] > 0) {
                tasks.push_back({i, j, pair_index(i, j, label_space.size())});
            }
        }
    }

    const auto run_task = [&](const PairTask& task) {
        const std::string& wi = ens.label_space[task.i];
        const std::string& wj = ens.label_space[task.j];
        const Batch train_batch = pairwise_subset(train_features, wi, wj);
        Batch val_batch;
        bool has_i = false, has_j = false;
        for (const auto& f : val_features) {
            has_i = has_i || f.label == wi;
            has_j = has_j || f.label == wj;
        }
        if (has_i && has_j) {
            val_batch = pairwise_subset(val_features, wi, wj);
        } else if (has_i || has_j) {
            // one-sided validation subset: keep whatever is there
            const std::string& present = has_i ? wi : wj;
            std::vector<const FeatureVector*> picked;
            for (const auto& f : val_features) {
                if (f.label == present) {
                    picked.push_back(&f);
                }
            }
            const Eigen::Index dim = static_cast<Eigen::Index>(picked.front()->values.size());
            val_batch.inputs.resize(dim, static_cast<Eigen::Index>(picked.size()));
            val_batch.targets.resize(2, static_cast<Eigen::Index>(picked.size()));
            for (std::size_t c = 0; c < picked.size(); ++c) {
                for (Eigen::Index r = 0; r < dim; ++r) {
                    val_batch.inputs(r, static_cast<Eigen::Index>(c)) =
                        picked[c]->values[static_cast<std::size_t>(r)];
                }
                val_batch.targets(0, static_cast<Eigen::Index>(c)) = has_i ? 1.0 : 0.0;
                val_batch.targets(1, static_cast<Eigen::Index>(c)) = has_i ? 0.0 : 1.0;
            }
        } else {
            val_batch = train_batch;
        }

        TrainOptions pair_opts = opts;
        pair_opts.seed = opts.seed ^ static_cast<std::uint64_t>(task.idx);
        const Network start = init_network(ens.input_dim, hidden_dim, pair_opts.seed);
        TrainOutcome outcome = train(start, train_batch, val_batch, pair_opts);
        ens.networks[task.idx] = std::move(outcome.net);
        ens.trained[task.idx] = 1;
        ens.diagnostics[task.idx] = {outcome.validation_loss, outcome.iterations,
                                     outcome.aborted_restarts};
    };

    const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(tasks.size())));
    if (workers <= 1) {
        for (const auto& task : tasks) {
            run_task(task);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t t = next.fetch_add(1); t < tasks.size(); t = next.fetch_add(1)) {
                    run_task(tasks[t]);
                }
            });
        }
        for (auto& th : pool) {
            th.join();
        }
    }
    return ens;
}

// Pairwise score table for one input: entry (i, j) is the score of label i
// against label j. The lower triangle is derived from the complement
// identity, never recomputed.
struct ScoreTable {
    std::vector<std::string> labels;
    std::vector<std::vector<double>> entries;        // entries[i][j], diagonal unused
    std::vector<std::vector<std::uint8_t>> present;  // pair evaluated at all

    explicit ScoreTable(std::vector<std::string> label_space = {})
        : labels(std::move(label_space)),
          entries(labels.size(), std::vector<double>(labels.size(), 0.0)),
          present(labels.size(), std::vector<std::uint8_t>(labels.size(), 0)) {}

    void set(std::size_t i, std::size_t j, double p_ij) {
        entries.at(i).at(j) = p_ij;
        entries.at(j).at(i) = 1.0 - p_ij;
        present[i][j] = present[j][i] = 1;
    }
};

inline ScoreTable score(const Ensemble& ens, std::span<const double> x) {
    if (static_cast<int>(x.size()) != ens.input_dim) {
        throw std::invalid_argument("score: expected input of size " + std::to_string(ens.input_dim) +
                                    ", got " + std::to_string(x.size()));
    }
    ScoreTable table(ens.label_space);
    for (std::size_t i = 0; i < ens.num_labels(); ++i) {
        for (std::size_t j = i + 1; j < ens.num_labels(); ++j) {
            const std::size_t idx = pair_index(i, j, ens.num_labels());
            if (ens.trained[idx]) {
                table.set(i, j, forward(ens.networks[idx], x)[0]);
            }
        }
    }
    return table;
}

// Voting outcome. `tie` reports that another label reached exactly the same
// winning tally and label-space order decided.
struct Vote {
    std::size_t index = 0;
    std::string label;
    std::vector<double> tally;
    bool tie = false;
};

namespace detail {

inline Vote argmax_vote(const ScoreTable& table, std::vector<double> tally) {
    if (table.labels.empty()) {
        throw std::invalid_argument("vote: empty score table");
    }
    Vote v;
    v.tally = std::move(tally);
    for (std::size_t i = 1; i < v.tally.size(); ++i) {
        if (v.tally[i] > v.tally[v.index]) {
            v.index = i;
        }
    }
    for (std::size_t i = 0; i < v.tally.size(); ++i) {
        if (i != v.index && v.tally[i] == v.tally[v.index]) {
            v.tie = true;
            break;
        }
    }
    v.label = table.labels[v.index];
    return v;
}

}  // namespace detail

// Confidence-weighted voting: the label maximizing the sum of its pairwise
// scores against every other label.
inline Vote vote_weighted(const ScoreTable& table) {
    std::vector<double> tally(table.labels.size(), 0.0);
    for (std::size_t i = 0; i < table.labels.size(); ++i) {
        for (std::size_t j = 0; j < table.labels.size(); ++j) {
            if (i != j && table.present[i][j]) {
                tally[i] += table.entries[i][j];
            }
        }
    }
    return detail::argmax_vote(table, std::move(tally));
}

// Unweighted majority voting: the label with the most strict pairwise wins.
inline Vote vote_majority(const ScoreTable& table) {
    std::vector<double> tally(table.labels.size(), 0.0);
    for (std::size_t i = 0; i < table.labels.size(); ++i) {
        for (std::size_t j = 0; j < table.labels.size(); ++j) {
            if (i != j && table.present[i][j] && table.entries[i][j] > table.entries[j][i]) {
                tally[i] += 1.0;
            }
        }
    }
    return detail::argmax_vote(table, std::move(tally));
}

inline Vote predict_weighted(const Ensemble& ens, std::span<const double> x) {
    return vote_weighted(score(ens, x));
}

inline Vote predict_majority(const Ensemble& ens, std::span<const double> x) {
    return vote_majority(score(ens, x));
}

// Ensemble over a label subset: keeps exactly the pairs inside `allowed`,
// preserving the original label order. Predictions afterwards stay inside
// the subset.
inline Ensemble restrict_labels(const Ensemble& ens, const std::vector<std::string>& allowed) {
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < ens.num_labels(); ++i) {
        if (std::find(allowed.begin(), allowed.end(), ens.label_space[i]) != allowed.end()) {
            keep.push_back(i);
        }
    }
    for (const auto& label : allowed) {
        if (std::find(ens.label_space.begin(), ens.label_space.end(), label) == ens.label_space.end()) {
            throw std::invalid_argument("restrict_labels: label '" + label +
                                        "' is not in the ensemble");
        }
    }
    if (keep.size() < 2) {
        throw std::domain_error("restrict_labels: need at least 2 allowed labels");
    }
    Ensemble out;
    out.input_dim = ens.input_dim;
    out.hidden_dim = ens.hidden_dim;
    for (const auto i : keep) {
        out.label_space.push_back(ens.label_space[i]);
    }
    const std::size_t pairs = pair_count(keep.size());
    out.networks.resize(pairs);
    out.trained.assign(pairs, 0);
    out.diagnostics.resize(pairs);
    for (std::size_t a = 0; a < keep.size(); ++a) {
        for (std::size_t b = a + 1; b < keep.size(); ++b) {
            const std::size_t src = pair_index(keep[a], keep[b], ens.num_labels());
            const std::size_t dst = pair_index(a, b, keep.size());
            out.networks[dst] = ens.networks[src];
            out.trained[dst] = ens.trained[src];
            out.diagnostics[dst] = ens.diagnostics[src];
        }
    }
    return out;
}

// Directory layout: manifest.json naming the labels and the pair-to-file
// mapping, one binary model per trained pair, one metadata sidecar each.
inline void save_ensemble(const Ensemble& ens, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::json pairs_json = nlohmann::json::array();
    for (std::size_t i = 0; i < ens.num_labels(); ++i) {
        for (std::size_t j = i + 1; j < ens.num_labels(); ++j) {
            const std::size_t idx = pair_index(i, j, ens.num_labels());
            nlohmann::json entry = {{"a", ens.label_space[i]}, {"b", ens.label_space[j]}};
            if (ens.trained[idx]) {
                char name[32];
                std::snprintf(name, sizeof(name), "pair_%04zu.net", idx);
                entry["file"] = name;
                save_network(ens.networks[idx], (fs::path(dir) / name).string());
                nlohmann::json sidecar = {{"labels", {ens.label_space[i], ens.label_space[j]}},
                                          {"validation_loss", ens.diagnostics[idx].validation_loss},
                                          {"iterations", ens.diagnostics[idx].iterations},
                                          {"aborted_restarts", ens.diagnostics[idx].aborted_restarts}};
                std::ofstream side((fs::path(dir) / (std::string(name) + ".json")).string(),
                                   std::ios::trunc);
                side << sidecar.dump(1) << "\n";
            } else {
                entry["file"] = nullptr;
            }
            pairs_json.push_back(std::move(entry));
        }
    }
    nlohmann::json manifest = {{"format", "one-vs-one-ensemble"},
                               {"version", 1},
                               {"labels", ens.label_space},
                               {"input_dim", ens.input_dim},
                               {"hidden_dim", ens.hidden_dim},
                               {"pairs", std::move(pairs_json)}};
    std::ofstream out((fs::path(dir) / "manifest.json").string(), std::ios::trunc);
    if (!out) {
        throw std::runtime_error("save_ensemble: cannot write manifest in '" + dir + "'");
    }
    out << manifest.dump(1) << "\n";
}

inline Ensemble load_ensemble(const std::string& dir) {
    namespace fs = std::filesystem;
    std::ifstream in((fs::path(dir) / "manifest.json").string());
    if (!in) {
        throw std::runtime_error("load_ensemble: no manifest.json in '" + dir + "'");
    }
    nlohmann::json manifest;
    in >> manifest;
    if (manifest.value("format", "") != "one-vs-one-ensemble" || manifest.value("version", 0) != 1) {
        throw std::runtime_error("load_ensemble: unrecognized manifest in '" + dir + "'");
    }
    Ensemble ens;
    ens.label_space = manifest.at("labels").get<std::vector<std::string>>();
    ens.input_dim = manifest.at("input_dim").get<int>();
    ens.hidden_dim = manifest.at("hidden_dim").get<int>();
    const std::size_t pairs = pair_count(ens.label_space.size());
    if (manifest.at("pairs").size() != pairs) {
        throw std::runtime_error("load_ensemble: manifest pair count mismatch in '" + dir + "'");
    }
    ens.networks.resize(pairs);
    ens.trained.assign(pairs, 0);
    ens.diagnostics.resize(pairs);
    std::size_t idx = 0;
    for (std::size_t i = 0; i < ens.num_labels(); ++i) {
        for (std::size_t j = i + 1; j < ens.num_labels(); ++j, ++idx) {
            const auto& entry = manifest.at("pairs").at(idx);
            if (entry.at("a").get<std::string>() != ens.label_space[i] ||
                entry.at("b").get<std::string>() != ens.label_space[j]) {
                throw std::runtime_error("load_ensemble: pair ordering mismatch in '" + dir + "'");
            }
            if (!entry.at("file").is_null()) {
                const std::string file = entry.at("file").get<std::string>();
                Network net = load_network((fs::path(dir) / file).string());
                if (net.input_dim() != ens.input_dim || net.hidden_dim() != ens.hidden_dim) {
                    throw std::runtime_error("load_ensemble: '" + file + "' dimension mismatch");
                }
                ens.networks[pair_index(i, j, ens.num_labels())] = std::move(net);
                ens.trained[pair_index(i, j, ens.num_labels())] = 1;
            }
        }
    }
    return ens;
}

}  // namespace plugid
