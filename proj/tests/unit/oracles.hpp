#pragma once

// Independent reference implementations used to freeze expected values.
// These deliberately avoid the library's code paths: plain triple loops,
// long-double evaluation of textbook formulas, and set arithmetic.

#include <cmath>
#include <set>
#include <tuple>
#include <vector>

namespace oracle {

// Element-by-element triple-loop product, k ascending.
inline std::vector<double> matmul(const std::vector<double>& a, int m, int k, const std::vector<double>& b,
                                  int n) {
    std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int t = 0; t < k; ++t)
                acc += a[static_cast<std::size_t>(i) * k + t] * b[static_cast<std::size_t>(t) * n + j];
            out[static_cast<std::size_t>(i) * n + j] = acc;
        }
    return out;
}

// Softmax by the plain definition exp(x_i)/sum exp(x_j), evaluated in
// extended precision. exp(1000) fits in a long double, so no shifting is
// needed here.
inline std::vector<double> softmax_row_highprec(const std::vector<double>& row) {
    long double denom = 0.0L;
    std::vector<long double> e(row.size());
    for (std::size_t i = 0; i < row.size(); ++i) {
        e[i] = std::exp(static_cast<long double>(row[i]));
        denom += e[i];
    }
    std::vector<double> out(row.size());
    for (std::size_t i = 0; i < row.size(); ++i) out[i] = static_cast<double>(e[i] / denom);
    return out;
}

// Two-step reference: explicit softmax, then mean of -log p[target].
inline double cross_entropy_highprec(const std::vector<std::vector<double>>& logits,
                                     const std::vector<int>& targets) {
    long double total = 0.0L;
    for (std::size_t r = 0; r < logits.size(); ++r) {
        long double denom = 0.0L;
        for (double v : logits[r]) denom += std::exp(static_cast<long double>(v));
        const long double p =
            std::exp(static_cast<long double>(logits[r][static_cast<std::size_t>(targets[r])])) / denom;
        total += -std::log(p);
    }
    return static_cast<double>(total / static_cast<long double>(logits.size()));
}

// Direct evaluation of the per-token binary logistic loss.
inline double logistic_highprec(const std::vector<double>& scores, const std::vector<int>& labels) {
    long double total = 0.0L;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const long double s = scores[i];
        const long double sig = 1.0L / (1.0L + std::exp(-s));
        total += labels[i] ? -std::log(sig) : -std::log(1.0L - sig);
    }
    return static_cast<double>(total / static_cast<long double>(scores.size()));
}

// Span triple for set-based scoring: (query, start, end).
using SpanKey = std::tuple<int, int, int>;

struct SetScore {
    long tp = 0, fp = 0, fn = 0;
};

inline SetScore span_set_score(const std::set<SpanKey>& gold, const std::set<SpanKey>& pred) {
    SetScore s;
    for (const auto& k : pred) {
        if (gold.count(k)) {
            s.tp += 1;
        } else {
            s.fp += 1;
        }
    }
    for (const auto& k : gold) {
        if (!pred.count(k)) s.fn += 1;
    }
    return s;
}

}  // namespace oracle
