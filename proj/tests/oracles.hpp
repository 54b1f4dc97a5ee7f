#pragma once

#include <algorithm>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "drift/econometrics.hpp"

/// Brute-force reference computations shared by the unit and acceptance tests.
namespace oracles {

using drift::econ::Factor;
using Eigen::MatrixXd;
using Eigen::VectorXd;

inline Factor make_factor(const std::vector<int>& codes) {
    Factor f;
    f.codes = codes;
    f.levels = codes.empty() ? 0 : *std::max_element(codes.begin(), codes.end()) + 1;
    return f;
}

inline std::vector<int> random_codes(std::mt19937_64& rng, int n, int levels) {
    std::uniform_int_distribution<int> d(0, levels - 1);
    std::vector<int> c(static_cast<std::size_t>(n));
    for (int i = 0; i < levels && i < n; ++i) c[static_cast<std::size_t>(i)] = i;  // every level used
    for (int i = levels; i < n; ++i) c[static_cast<std::size_t>(i)] = d(rng);
    return c;
}

inline VectorXd normals(std::mt19937_64& rng, Eigen::Index n) {
    std::normal_distribution<double> d(0.0, 1.0);
    VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = d(rng);
    return v;
}

// Least squares through the normal equations.
inline VectorXd normal_eq(const MatrixXd& X, const VectorXd& y) {
    return (X.transpose() * X).ldlt().solve(X.transpose() * y);
}

// Explicit-dummy regression: regressors, all levels of the first FE, all but the
// first level of the others. Returns the regressor coefficients.
inline VectorXd dummy_ols(const MatrixXd& X, const VectorXd& y, const std::vector<std::vector<int>>& fes) {
    std::vector<VectorXd> cols;
    for (Eigen::Index j = 0; j < X.cols(); ++j) cols.push_back(X.col(j));
    for (std::size_t d = 0; d < fes.size(); ++d) {
        const int levels = *std::max_element(fes[d].begin(), fes[d].end()) + 1;
        for (int l = d == 0 ? 0 : 1; l < levels; ++l) {
            VectorXd c = VectorXd::Zero(X.rows());
            for (Eigen::Index i = 0; i < X.rows(); ++i) c(i) = fes[d][static_cast<std::size_t>(i)] == l;
            cols.push_back(c);
        }
    }
    MatrixXd D(X.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) D.col(static_cast<Eigen::Index>(j)) = cols[j];
    VectorXd b = D.colPivHouseholderQr().solve(y);
    return b.head(X.cols());
}

// Sandwich with CR1 factor, cluster sums accumulated by string key.
inline MatrixXd oracle_cr1(const MatrixXd& X, const VectorXd& e, const std::vector<std::string>& keys) {
    const MatrixXd B = (X.transpose() * X).inverse();
    std::map<std::string, VectorXd> s;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        auto& v = s.try_emplace(keys[static_cast<std::size_t>(i)], VectorXd::Zero(X.cols())).first->second;
        v += X.row(i).transpose() * e(i);
    }
    MatrixXd meat = MatrixXd::Zero(X.cols(), X.cols());
    for (const auto& [k, v] : s) meat += v * v.transpose();
    const double G = static_cast<double>(s.size()), n = static_cast<double>(X.rows()),
                 K = static_cast<double>(X.cols());
    return G / (G - 1) * (n - 1) / (n - K) * B * meat * B;
}

/// Multi-way VCOV as the signed sum of CR1 terms over every non-empty subset of
/// cluster dimensions, intersections keyed by string.
inline MatrixXd oracle_multiway(const MatrixXd& X, const VectorXd& e, const std::vector<std::vector<int>>& dims) {
    const int nd = static_cast<int>(dims.size());
    MatrixXd v = MatrixXd::Zero(X.cols(), X.cols());
    for (int mask = 1; mask < (1 << nd); ++mask) {
        std::vector<std::string> keys;
        for (Eigen::Index i = 0; i < X.rows(); ++i) {
            std::string k;
            for (int d = 0; d < nd; ++d)
                if (mask & (1 << d)) k += std::to_string(dims[static_cast<std::size_t>(d)][static_cast<std::size_t>(i)]) + "|";
            keys.push_back(k);
        }
        const int r = __builtin_popcount(static_cast<unsigned>(mask));
        v += (r % 2 == 1 ? 1.0 : -1.0) * oracle_cr1(X, e, keys);
    }
    return v;
}

}  // namespace oracles
