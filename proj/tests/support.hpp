#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "eoslab/datagen.hpp"
#include "eoslab/model.hpp"
#include "eoslab/rng.hpp"

namespace eoslab::testsupport {

// Literal loop transcription of the model definition; the production code is
// checked against this, never the other way around.
inline double naive_forward(const ModelParams& p, const ReceptiveFields& fields,
                            const Eigen::VectorXd& x) {
  const int J = fields.J();
  double out = p.beta;
  for (int k = 0; k < p.K; ++k) {
    double pooled = 0.0;
    for (int j = 0; j < J; ++j) {
      double a = -p.b[k];
      for (int c = 0; c < fields.m; ++c) a += p.W(k, c) * x[fields.subsets[j][c]];
      if (a > 0.0) pooled += a;
    }
    out += p.v[k] * pooled / J;
  }
  return out;
}

inline double naive_loss(const ModelParams& p, const ReceptiveFields& fields,
                         const Dataset& data) {
  double acc = 0.0;
  for (int i = 0; i < data.n(); ++i) {
    const double r = naive_forward(p, fields, data.X.row(i)) - data.y[i];
    acc += r * r;
  }
  return acc / (2.0 * data.n());
}

inline Eigen::VectorXd fd_gradient(const ModelParams& p, const ReceptiveFields& fields,
                                   const Dataset& data, double h) {
  const Eigen::VectorXd theta = flatten(p);
  Eigen::VectorXd g(theta.size());
  for (Eigen::Index q = 0; q < theta.size(); ++q) {
    Eigen::VectorXd up = theta, dn = theta;
    up[q] += h;
    dn[q] -= h;
    g[q] = (loss(unflatten(up, p.K, p.m), fields, data) -
            loss(unflatten(dn, p.K, p.m), fields, data)) /
           (2.0 * h);
  }
  return g;
}

inline double dense_top_eig(const Eigen::MatrixXd& H) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
  return es.eigenvalues().maxCoeff();
}

inline double rel_err(double got, double want) {
  return std::abs(got - want) / (1.0 + std::abs(want));
}

inline double vec_rel_err(const Eigen::VectorXd& got, const Eigen::VectorXd& want) {
  return (got - want).norm() / (1.0 + want.norm());
}

// Random disjoint-or-overlapping receptive fields. Disjoint when tile is
// true (then d = J*m); otherwise J arbitrary sorted index subsets of a
// larger ambient space.
inline ReceptiveFields random_fields(RngStream& rng, int J, int m, bool tile) {
  ReceptiveFields f;
  f.m = m;
  if (tile) {
    f = ReceptiveFields::disjoint(J * m, m);
    return f;
  }
  f.d = m + 1 + static_cast<int>(rng.uniform_below(2 * m));
  for (int j = 0; j < J; ++j) {
    std::vector<int> pool(f.d);
    for (int c = 0; c < f.d; ++c) pool[c] = c;
    for (int c = 0; c < m; ++c) {
      const int pick = c + static_cast<int>(rng.uniform_below(f.d - c));
      std::swap(pool[c], pool[pick]);
    }
    f.subsets.push_back({pool.begin(), pool.begin() + m});
  }
  f.validate();
  return f;
}

inline ModelParams random_params(const ReceptiveFields& fields, int K, RngStream& rng,
                                 double scale = 1.0) {
  ModelParams p;
  p.K = K;
  p.m = fields.m;
  p.W.resize(K, fields.m);
  p.b.resize(K);
  p.v.resize(K);
  for (int k = 0; k < K; ++k) {
    double sq = 0.0;
    for (int c = 0; c < fields.m; ++c) {
      p.W(k, c) = scale * rng.gaussian();
      sq += p.W(k, c) * p.W(k, c);
    }
    if (sq == 0.0) p.W(k, 0) = scale;
    p.b[k] = 0.3 * scale * rng.gaussian();
    p.v[k] = rng.gaussian();
  }
  p.beta = 0.1 * rng.gaussian();
  return p;
}

inline Dataset sphere_dataset(const ReceptiveFields& fields, int n, RngStream& rng) {
  Dataset data;
  data.X = sample_sphere(n, fields.d, rng);
  data.y.resize(n);
  for (int i = 0; i < n; ++i) data.y[i] = rng.gaussian();
  data.R = 1.0;
  data.D = data.y.cwiseAbs().maxCoeff();
  return data;
}

// Draws instances until the minimum pre-activation margin clears the given
// floor, so finite-difference probes cannot flip a gate.
inline void margin_safe_instance(RngStream& rng, int J, int m, int K, int n,
                                 double margin_floor, ReceptiveFields& fields,
                                 ModelParams& params, Dataset& data) {
  for (int attempt = 0; attempt < 200; ++attempt) {
    fields = random_fields(rng, J, m, attempt % 2 == 0);
    params = random_params(fields, K, rng);
    data = sphere_dataset(fields, n, rng);
    if (min_margin(params, fields, data) > margin_floor) return;
  }
  throw std::runtime_error("margin_safe_instance: no margin-safe draw in 200 attempts");
}

}  // namespace eoslab::testsupport
