#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace plugid {

// Multi-class confusion counts. Rows are the true class, columns the
// predicted class; this orientation is fixed across the library.
class ConfusionMatrix {
public:
    ConfusionMatrix() = default;

    explicit ConfusionMatrix(std::vector<std::string> label_space)
        : labels_(std::move(label_space)),
          counts_(labels_.size(), std::vector<std::int64_t>(labels_.size(), 0)) {}

    const std::vector<std::string>& labels() const { return labels_; }
    std::size_t num_classes() const { return labels_.size(); }

    std::int64_t at(std::size_t true_idx, std::size_t pred_idx) const {
        return counts_.at(true_idx).at(pred_idx);
    }

    std::size_t index_of(const std::string& label) const {
        const auto it = std::find(labels_.begin(), labels_.end(), label);
        if (it == labels_.end()) {
            throw std::invalid_argument("confusion matrix: unknown label '" + label + "'");
        }
        return static_cast<std::size_t>(it - labels_.begin());
    }

    void accumulate(const std::string& true_label, const std::string& predicted_label) {
        counts_[index_of(true_label)][index_of(predicted_label)] += 1;
    }

    void accumulate_index(std::size_t true_idx, std::size_t pred_idx) {
        counts_.at(true_idx).at(pred_idx) += 1;
    }

    std::int64_t total() const {
        std::int64_t sum = 0;
        for (const auto& row : counts_) {
            for (const auto c : row) {
                sum += c;
            }
        }
        return sum;
    }

    std::int64_t trace() const {
        std::int64_t sum = 0;
        for (std::size_t m = 0; m < counts_.size(); ++m) {
            sum += counts_[m][m];
        }
        return sum;
    }

    std::int64_t row_sum(std::size_t m) const {
        std::int64_t sum = 0;
        for (const auto c : counts_.at(m)) {
            sum += c;
        }
        return sum;
    }

    std::int64_t col_sum(std::size_t m) const {
        std::int64_t sum = 0;
        for (const auto& row : counts_) {
            sum += row.at(m);
        }
        return sum;
    }

    // Elementwise addition, for merging per-fold matrices.
    ConfusionMatrix& operator+=(const ConfusionMatrix& other) {
        if (other.labels_ != labels_) {
            throw std::invalid_argument("confusion matrix: label space mismatch in merge");
        }
        for (std::size_t i = 0; i < counts_.size(); ++i) {
            for (std::size_t j = 0; j < counts_.size(); ++j) {
                counts_[i][j] += other.counts_[i][j];
            }
        }
        return *this;
    }

    const std::vector<std::vector<std::int64_t>>& counts() const { return counts_; }

private:
    std::vector<std::string> labels_;
    std::vector<std::vector<std::int64_t>> counts_;
};

// Per-class counts and rates. A rate whose denominator is zero is left
// unset rather than reported as 0.
struct ClassMetrics {
    std::int64_t tp = 0, tn = 0, fp = 0, fn = 0;
    std::optional<double> recall;       // TP / (TP + FN)
    std::optional<double> precision;    // TP / (TP + FP)
    std::optional<double> specificity;  // TN / (TN + FP)
    std::optional<double> f1;           // 2TP / (2TP + FP + FN)
};

inline ClassMetrics per_class(const ConfusionMatrix& cm, std::size_t m) {
    if (m >= cm.num_classes()) {
        throw std::out_of_range("per_class: class index out of range");
    }
    ClassMetrics out;
    out.tp = cm.at(m, m);
    out.fn = cm.row_sum(m) - out.tp;
    out.fp = cm.col_sum(m) - out.tp;
    out.tn = cm.total() - out.tp - out.fp - out.fn;
    const auto rate = [](std::int64_t num, std::int64_t den) -> std::optional<double> {
        if (den == 0) {
            return std::nullopt;
        }
        return static_cast<double>(num) / static_cast<double>(den);
    };
    out.recall = rate(out.tp, out.tp + out.fn);
    out.precision = rate(out.tp, out.tp + out.fp);
    out.specificity = rate(out.tn, out.tn + out.fp);
    out.f1 = rate(2 * out.tp, 2 * out.tp + out.fp + out.fn);
    return out;
}

// Unweighted accuracy: trace over grand total.
inline double accuracy(const ConfusionMatrix& cm) {
    const std::int64_t total = cm.total();
    if (total == 0) {
        throw std::domain_error("accuracy: empty confusion matrix");
    }
    return static_cast<double>(cm.trace()) / static_cast<double>(total);
}

// Cohen's kappa from the trace/ones-matrix form:
//   (tr(L)*S - tr(L*J*L)) / (S^2 - tr(L*J*L)),  S the grand total.
// tr(L*J*L) reduces to the sum over classes of row_sum*col_sum. Unset when
// chance agreement is total (denominator zero).
inline std::optional<double> cohens_kappa(const ConfusionMatrix& cm) {
    const std::int64_t total = cm.total();
    if (total == 0) {
        throw std::domain_error("cohens_kappa: empty confusion matrix");
    }
    std::int64_t marginal = 0;  // tr(L*J*L)
    for (std::size_t m = 0; m < cm.num_classes(); ++m) {
        marginal += cm.row_sum(m) * cm.col_sum(m);
    }
    const double numerator = static_cast<double>(cm.trace()) * static_cast<double>(total) -
                             static_cast<double>(marginal);
    const double denominator = static_cast<double>(total) * static_cast<double>(total) -
                               static_cast<double>(marginal);
    if (denominator == 0.0) {
        return std::nullopt;
    }
    return numerator / denominator;
}

inline nlohmann::json to_json(const ConfusionMatrix& cm) {
    nlohmann::json per;
    for (std::size_t m = 0; m < cm.num_classes(); ++m) {
        const ClassMetrics cls = per_class(cm, m);
        const auto opt = [](const std::optional<double>& v) {
            return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
        };
        per.push_back({{"label", cm.labels()[m]},
                       {"tp", cls.tp},
                       {"tn", cls.tn},
                       {"fp", cls.fp},
                       {"fn", cls.fn},
                       {"recall", opt(cls.recall)},
                       {"precision", opt(cls.precision)},
                       {"specificity", opt(cls.specificity)},
                       {"f1", opt(cls.f1)}});
    }
    nlohmann::json out;
    out["labels"] = cm.labels();
    out["matrix"] = cm.counts();
    out["per_class"] = per;
    out["total"] = cm.total();
    if (cm.total() > 0) {
        out["accuracy"] = accuracy(cm);
        const auto kappa = cohens_kappa(cm);
        out["kappa"] = kappa ? nlohmann::json(*kappa) : nlohmann::json(nullptr);
    }
    return out;
}

// Aligned per-category table plus the aggregate line.
inline std::string format_table(const ConfusionMatrix& cm) {
    std::string out;
    char line[256];
    std::size_t width = 8;
    for (const auto& label : cm.labels()) {
        width = std::max(width, label.size());
    }
    std::snprintf(line, sizeof(line), "%-*s %6s %6s %6s %6s  %7s %9s %11s %7s\n",
                  static_cast<int>(width), "category", "TP", "TN", "FP", "FN", "recall", "precision",
                  "specificity", "F1");
    out += line;
    const auto fmt = [](const std::optional<double>& v, int w) {
        char buf[32];
        if (v) {
            std::snprintf(buf, sizeof(buf), "%*.3f", w, *v);
        } else {
            std::snprintf(buf, sizeof(buf), "%*s", w, "n/a");
        }
        return std::string(buf);
    };
    for (std::size_t m = 0; m < cm.num_classes(); ++m) {
        const ClassMetrics cls = per_class(cm, m);
        std::snprintf(line, sizeof(line), "%-*s %6lld %6lld %6lld %6lld  %s %s %s %s\n",
                      static_cast<int>(width), cm.labels()[m].c_str(),
                      static_cast<long long>(cls.tp), static_cast<long long>(cls.tn),
                      static_cast<long long>(cls.fp), static_cast<long long>(cls.fn),
                      fmt(cls.recall, 7).c_str(), fmt(cls.precision, 9).c_str(),
                      fmt(cls.specificity, 11).c_str(), fmt(cls.f1, 7).c_str());
        out += line;
    }
    if (cm.total() > 0) {
        const auto kappa = cohens_kappa(cm);
        std::snprintf(line, sizeof(line), "alpha = %.4f   kappa = %s   n = %lld\n", accuracy(cm),
                      kappa ? fmt(*kappa, 0).c_str() : "n/a", static_cast<long long>(cm.total()));
        out += line;
    }
    return out;
}

}  // namespace plugid
