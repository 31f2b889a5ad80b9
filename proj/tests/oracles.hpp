#pragma once

// Brute-force reference implementations, written directly from the
// definitions and sharing no code with the library.

#include "marc/numcore/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace marc::oracle {

inline Matrix gaussian_kernel(const Matrix& x, double sigma) {
    const Index n = x.rows();
    Matrix k(n, n);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
            double d = 0.0;
            for (Index c = 0; c < x.cols(); ++c) d += (x(i, c) - x(j, c)) * (x(i, c) - x(j, c));
            k(i, j) = std::exp(-d / (2.0 * sigma * sigma));
        }
    }
    return k;
}

/// Tr(K_X J K_Y J) / (n - 1)^2 with an explicit centering matrix.
inline double hsic(const Matrix& x, const Matrix& y, double sigma_x, double sigma_y) {
    const Index n = x.rows();
    const Matrix j = Matrix::Identity(n, n) - Matrix::Constant(n, n, 1.0 / static_cast<double>(n));
    const Matrix kx = gaussian_kernel(x, sigma_x);
    const Matrix ky = gaussian_kernel(y, sigma_y);
    const Matrix prod = kx * j * ky * j;
    return prod.trace() / static_cast<double>((n - 1) * (n - 1));
}

/// Sort-and-select median of the nonzero pairwise squared distances.
inline double median_sigma(const Matrix& x) {
    std::vector<double> d;
    for (Index i = 0; i < x.rows(); ++i) {
        for (Index j = i + 1; j < x.rows(); ++j) {
            const double s = (x.row(i) - x.row(j)).squaredNorm();
            if (s > 0.0) d.push_back(s);
        }
    }
    if (d.empty()) return 1.0;
    std::sort(d.begin(), d.end());
    const std::size_t m = d.size();
    const double med = m % 2 == 1 ? d[m / 2] : 0.5 * (d[m / 2 - 1] + d[m / 2]);
    return std::sqrt(med / 2.0);
}

/// O(P N) pairwise count with ties worth one half.
inline double auc(const std::vector<double>& scores, const std::vector<double>& labels) {
    double wins = 0.0;
    double pairs = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 1.0) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] != 0.0) continue;
            pairs += 1.0;
            if (scores[i] > scores[j]) wins += 1.0;
            else if (scores[i] == scores[j]) wins += 0.5;
        }
    }
    return wins / pairs;
}

inline double ndcg_at(const std::vector<int>& rel, std::size_t k) {
    double dcg = 0.0;
    for (std::size_t r = 0; r < k; ++r) {
        if (rel[r]) dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
    }
    std::size_t total = 0;
    for (int v : rel) total += v ? 1 : 0;
    double idcg = 0.0;
    for (std::size_t r = 0; r < std::min(k, total); ++r) idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
    return idcg > 0.0 ? dcg / idcg : 0.0;
}

/// Average precision over the top k, normalized by min(#relevant, k).
inline double map_at(const std::vector<int>& rel, std::size_t k) {
    std::size_t total = 0;
    for (int v : rel) total += v ? 1 : 0;
    double sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t r = 0; r < k; ++r) {
        if (!rel[r]) continue;
        ++hits;
        sum += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
    return sum / static_cast<double>(std::min(total, k));
}

inline double hit_at(const std::vector<int>& rel, std::size_t k) {
    for (std::size_t r = 0; r < k; ++r) {
        if (rel[r]) return 1.0;
    }
    return 0.0;
}

inline double reciprocal_rank(const std::vector<int>& rel) {
    for (std::size_t r = 0; r < rel.size(); ++r) {
        if (rel[r]) return 1.0 / static_cast<double>(r + 1);
    }
    return 0.0;
}

}  // namespace marc::oracle
