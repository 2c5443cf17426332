#include "condkl/sparse_grid.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include <Eigen/Eigenvalues>

#include "condkl/error.hpp"

namespace condkl {

QuadratureRule gauss_hermite(int n) {
  if (n < 1) throw InvalidArgument("gauss_hermite: n must be >= 1");
  QuadratureRule rule;
  if (n == 1) {
    rule.nodes = Vector::Zero(1);
    rule.weights = Vector::Ones(1);
    return rule;
  }
  // Jacobi matrix of the monic He_k recurrence: x He_k = He_{k+1} + k He_{k-1}.
  Vector diag = Vector::Zero(n);
  Vector off(n - 1);
  for (int k = 1; k < n; ++k) off[k - 1] = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Matrix> es;
  es.computeFromTridiagonal(diag, off, Eigen::ComputeEigenvectors);
  if (es.info() != Eigen::Success) throw Error("gauss_hermite: eigen solve failed");
  Vector x = es.eigenvalues();
  Vector w = es.eigenvectors().row(0).transpose().array().square();

  // Enforce the exact symmetry of the rule so shared abscissae coincide.
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    const int j = n - 1 - i;
    rule.nodes[i] = 0.5 * (x[i] - x[j]);
    rule.weights[i] = 0.5 * (w[i] + w[j]);
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  rule.weights /= rule.weights.sum();
  return rule;
}

namespace {

double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return std::round(r);
}

// Lexicographic order that treats coordinates within the merge tolerance as
// equal. The 1D abscissae of different sizes are far apart, so this is a
// consistent ordering on the node sets produced here.
struct NodeLess {
  bool operator()(const std::vector<double>& a, const std::vector<double>& b) const {
    for (std::size_t k = 0; k < a.size(); ++k) {
      if (a[k] < b[k] - kNodeMergeTolerance) return true;
      if (a[k] > b[k] + kNodeMergeTolerance) return false;
    }
    return false;
  }
};

// All multi-indices i >= 1 with lo <= |i| <= hi, in lexicographic order.
void enumerate(int dim, int lo, int hi, std::vector<int>& cur, int sum,
               std::vector<std::vector<int>>& out) {
  const int k = static_cast<int>(cur.size());
  if (k == dim) {
    if (sum >= lo) out.push_back(cur);
    return;
  }
  const int remaining = dim - k - 1;
  for (int v = 1; sum + v + remaining <= hi; ++v) {
    cur.push_back(v);
    enumerate(dim, lo, hi, cur, sum + v, out);
    cur.pop_back();
  }
}

}  // namespace

SparseGridRule smolyak_grid(int dim, int level) {
  if (dim < 1) throw InvalidArgument("smolyak_grid: dim must be >= 1");
  if (level < 1) throw InvalidArgument("smolyak_grid: level must be >= 1");
  const int q = dim + level - 1;
  std::vector<QuadratureRule> rules;
  for (int m = 1; m <= level; ++m) rules.push_back(gauss_hermite(m));

  std::vector<std::vector<int>> indices;
  std::vector<int> cur;
  enumerate(dim, std::max(dim, q - dim + 1), q, cur, 0, indices);

  std::map<std::vector<double>, std::size_t, NodeLess> lookup;
  std::vector<std::vector<double>> nodes;
  std::vector<double> weights;
  std::vector<double> point(static_cast<std::size_t>(dim));
  std::vector<int> pos(static_cast<std::size_t>(dim));

  for (const auto& idx : indices) {
    int norm = 0;
    for (int v : idx) norm += v;
    const double coef = ((q - norm) % 2 ? -1.0 : 1.0) * binomial(dim - 1, q - norm);
    if (coef == 0.0) continue;
    std::fill(pos.begin(), pos.end(), 0);
    for (;;) {
      double w = coef;
      for (int k = 0; k < dim; ++k) {
        const QuadratureRule& r = rules[static_cast<std::size_t>(idx[k] - 1)];
        point[static_cast<std::size_t>(k)] = r.nodes[pos[k]];
        w *= r.weights[pos[k]];
      }
      auto [it, inserted] = lookup.emplace(point, nodes.size());
      if (inserted) {
        nodes.push_back(point);
        weights.push_back(w);
      } else {
        weights[it->second] += w;
      }
      int k = 0;
      while (k < dim && ++pos[k] == idx[k]) pos[k++] = 0;
      if (k == dim) break;
    }
  }

  SparseGridRule rule;
  rule.dim = dim;
  rule.level = level;
  rule.nodes.resize(static_cast<Index>(nodes.size()), dim);
  rule.weights.resize(static_cast<Index>(nodes.size()));
  for (std::size_t j = 0; j < nodes.size(); ++j) {
    for (int k = 0; k < dim; ++k) rule.nodes(static_cast<Index>(j), k) = nodes[j][static_cast<std::size_t>(k)];
    rule.weights[static_cast<Index>(j)] = weights[j];
  }
  return rule;
}

}  // namespace condkl
