#pragma once

// Independent reference computations shared by the unit and acceptance
// tests. None of them goes through the library's design or solver code.

#include "regadj/model.hpp"
#include "regadj/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <utility>
#include <vector>

namespace oracles {

struct Instance {
  regadj::ModelSpec spec;
  regadj::Dataset data;
};

// n in [max(12, 4p + 6), 30], p in {1, 2, 3}; each arm has at least p + 3
// units; constraints drawn from {free, 0, 1, -0.5}; centering empirical or
// a random known mean.
inline Instance random_instance(regadj::Rng& rng) {
  std::uniform_int_distribution<int> pdim(1, 3);
  std::uniform_int_distribution<int> kind(0, 3);
  std::normal_distribution<double> nd;
  const int p = pdim(rng);
  std::uniform_int_distribution<int> ndim(std::max(12, 4 * p + 6), 30);
  const int n = ndim(rng);

  Instance out;
  auto& d = out.data;
  d.a.resize(n);
  d.x.resize(n, p);
  d.y.resize(n);
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  std::shuffle(idx.begin(), idx.end(), rng);
  std::uniform_int_distribution<int> n1dist(p + 3, n - (p + 3));
  const int n1 = n1dist(rng);
  d.a.setZero();
  for (int k = 0; k < n1; ++k) d.a[idx[k]] = 1.0;
  for (int i = 0; i < n; ++i) {
    double lin = 0.0;
    for (int j = 0; j < p; ++j) {
      d.x(i, j) = 1.0 + j + nd(rng);
      lin += (0.5 - 0.3 * j) * d.x(i, j);
    }
    d.y[i] = 1.0 + 2.0 * d.a[i] + lin + d.a[i] * d.x(i, 0) +
             (1.0 + std::abs(d.x(i, 0))) * nd(rng);
  }

  const double values[] = {0.0, 1.0, -0.5};
  std::vector<regadj::CoefConstraint> g, dl;
  for (int j = 0; j < p; ++j) {
    const int kg = kind(rng), kd = kind(rng);
    g.push_back(kg == 3 ? regadj::CoefConstraint::free() : regadj::CoefConstraint::fixed(values[kg]));
    dl.push_back(kd == 3 ? regadj::CoefConstraint::free() : regadj::CoefConstraint::fixed(values[kd]));
  }
  regadj::Centering c = regadj::Centering::empirical();
  if (kind(rng) % 2 == 0) {
    Eigen::VectorXd mu(p);
    for (int j = 0; j < p; ++j) mu[j] = nd(rng);
    c = regadj::Centering::known_mean(mu);
  }
  out.spec = regadj::ModelSpec(g, dl, c);
  return out;
}

// Minimizes ||y - W t||^2 over the full (2 + 2p)-vector
// t = (alpha, beta, gamma, delta) subject to the fixed entries, through the
// Lagrangian system [[W'W, C'], [C, 0]] [t; lambda] = [W'y; c].
inline Eigen::VectorXd kkt_constrained_ols(const regadj::ModelSpec& spec,
                                           const regadj::Dataset& data) {
  const int n = data.n(), p = spec.p(), k = 2 + 2 * p;
  const Eigen::VectorXd center = spec.centering.is_empirical()
                                     ? Eigen::VectorXd(data.x.colwise().mean().transpose())
                                     : spec.centering.mean;
  Eigen::MatrixXd w(n, k);
  for (int i = 0; i < n; ++i) {
    w(i, 0) = 1.0;
    w(i, 1) = data.a[i];
    for (int j = 0; j < p; ++j) {
      const double xc = data.x(i, j) - center[j];
      w(i, 2 + j) = xc;
      w(i, 2 + p + j) = data.a[i] * xc;
    }
  }
  std::vector<std::pair<int, double>> fixed;
  for (int j = 0; j < p; ++j) {
    if (spec.gamma[j].is_fixed()) fixed.emplace_back(2 + j, spec.gamma[j].value());
    if (spec.delta[j].is_fixed()) fixed.emplace_back(2 + p + j, spec.delta[j].value());
  }
  const int m = static_cast<int>(fixed.size());
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(k + m, k + m);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k + m);
  kkt.topLeftCorner(k, k) = w.transpose() * w;
  rhs.head(k) = w.transpose() * data.y;
  for (int r = 0; r < m; ++r) {
    kkt(k + r, fixed[r].first) = 1.0;
    kkt(fixed[r].first, k + r) = 1.0;
    rhs[k + r] = fixed[r].second;
  }
  const Eigen::VectorXd sol = kkt.completeOrthogonalDecomposition().solve(rhs);
  return sol.head(k);
}

// mean(Y - X1 | A = 1) - mean(Y - X1 | A = 0).
inline double gain_score_difference(const regadj::Dataset& d) {
  double s1 = 0, s0 = 0;
  int n1 = 0, n0 = 0;
  for (int i = 0; i < d.n(); ++i) {
    const double g = d.y[i] - d.x(i, 0);
    if (d.a[i] == 1.0) {
      s1 += g;
      ++n1;
    } else {
      s0 += g;
      ++n0;
    }
  }
  return s1 / n1 - s0 / n0;
}

// Constraints drawn per entry from {free, 0, 1, -0.5}.
inline regadj::ModelSpec random_spec(int p, regadj::Rng& rng) {
  std::uniform_int_distribution<int> kind(0, 3);
  const double values[] = {0.0, 1.0, -0.5};
  std::vector<regadj::CoefConstraint> g, d;
  for (int j = 0; j < p; ++j) {
    const int kg = kind(rng), kd = kind(rng);
    g.push_back(kg == 3 ? regadj::CoefConstraint::free() : regadj::CoefConstraint::fixed(values[kg]));
    d.push_back(kd == 3 ? regadj::CoefConstraint::free() : regadj::CoefConstraint::fixed(values[kd]));
  }
  return regadj::ModelSpec(g, d);
}

enum class PairCondition {
  Nested,                 // Gamma_1 >= Gamma_2, Delta_1 >= Delta_2
  NestedCoveringMains,    // plus U(Delta_1) >= U(Gamma_1)
  NestedEqualFreeSets     // plus U(Gamma_1) == U(Delta_1)
};

// spec1 is obtained from spec2 by freeing entries, then closing under the
// requested condition.
inline regadj::ModelSpec random_superset(const regadj::ModelSpec& spec2,
                                         PairCondition cond, regadj::Rng& rng) {
  std::bernoulli_distribution coin(0.5);
  regadj::ModelSpec s = spec2;
  for (int j = 0; j < s.p(); ++j) {
    if (coin(rng)) s.gamma[j] = regadj::CoefConstraint::free();
    if (coin(rng)) s.delta[j] = regadj::CoefConstraint::free();
    if (cond == PairCondition::NestedCoveringMains && s.gamma[j].is_free()) {
      s.delta[j] = regadj::CoefConstraint::free();
    }
    if (cond == PairCondition::NestedEqualFreeSets &&
        (s.gamma[j].is_free() || s.delta[j].is_free())) {
      s.gamma[j] = regadj::CoefConstraint::free();
      s.delta[j] = regadj::CoefConstraint::free();
    }
  }
  return s;
}

}  // namespace oracles
