#include "eoslab/interpolator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "eoslab/rng.hpp"

namespace eoslab {

namespace {

// Lexicographic order on canonicalized rows; -0.0 + 0.0 == +0.0, so signed
// zeros compare equal and duplicate detection is purely set-theoretic.
bool row_less(const Eigen::MatrixXd& P, long a, long b) {
  for (long c = 0; c < P.cols(); ++c) {
    const double x = P(a, c) + 0.0;
    const double y = P(b, c) + 0.0;
    if (x != y) return x < y;
  }
  return false;
}

bool row_equal(const Eigen::MatrixXd& P, long a, long b) {
  for (long c = 0; c < P.cols(); ++c)
    if (P(a, c) + 0.0 != P(b, c) + 0.0) return false;
  return true;
}

[[noreturn]] void assumption_violated(const std::string& detail) {
  throw std::runtime_error("interpolation assumption violated: " + detail);
}

}  // namespace

AnchorMap find_anchors(const Dataset& data, const ReceptiveFields& fields, double norm_tol) {
  if (!(norm_tol >= 0.0)) throw std::invalid_argument("find_anchors: norm_tol must be >= 0");
  Workspace ws(fields, data);
  const Eigen::MatrixXd& P = ws.P;
  const long N = P.rows();
  const int J = ws.J;

  for (long r = 0; r < N; ++r) {
    if (P.row(r).norm() > 1.0 + norm_tol)
      assumption_violated("patch " + std::to_string(r % J) + " of sample " +
                          std::to_string(r / J) + " has norm above 1");
  }

  // Mark rows that appear more than once (exact duplicates).
  std::vector<long> order(N);
  for (long r = 0; r < N; ++r) order[r] = r;
  std::sort(order.begin(), order.end(), [&](long a, long b) { return row_less(P, a, b); });
  std::vector<char> duplicated(N, 0);
  for (long k = 0; k + 1 < N; ++k) {
    if (row_equal(P, order[k], order[k + 1])) duplicated[order[k]] = duplicated[order[k + 1]] = 1;
  }

  AnchorMap anchors;
  for (long i = 0; i < data.n(); ++i) {
    if (data.y[i] == 0.0) continue;
    int chosen = -1;
    for (int j = 0; j < J; ++j) {
      const long r = i * J + j;
      const double norm = P.row(r).norm();
      if (std::abs(norm - 1.0) > norm_tol) continue;
      if (duplicated[r]) continue;
      chosen = j;
      break;
    }
    if (chosen < 0)
      assumption_violated("no unit-norm unique anchor patch for sample " + std::to_string(i));

    AnchorEntry e;
    e.sample = i;
    e.patch = chosen;
    e.p = P.row(i * J + chosen).transpose();
    const Eigen::VectorXd dots = P * e.p;
    // Correlations are bounded below by -1 on this cloud, so -1 doubles as
    // the value for an empty "rest of the cloud" (single-patch dataset).
    double rho = -1.0;
    for (long r = 0; r < N; ++r)
      if (r != i * J + chosen) rho = std::max(rho, dots[r]);
    e.rho = rho;
    if (!(e.rho < 1.0))
      assumption_violated("anchor of sample " + std::to_string(i) +
                          " is not separated from the rest of the cloud");
    anchors.entries.push_back(std::move(e));
  }
  return anchors;
}

ModelParams construct_interpolant(const Dataset& data, const ReceptiveFields& fields,
                                  const AnchorMap& anchors) {
  const int K = static_cast<int>(anchors.entries.size());
  const double J = fields.J();
  ModelParams p;
  p.K = K;
  p.m = fields.m;
  p.W.resize(K, fields.m);
  p.b.resize(K);
  p.v.resize(K);
  p.beta = 0.0;
  for (int k = 0; k < K; ++k) {
    const AnchorEntry& e = anchors.entries[k];
    const double b = (e.rho + 1.0) / 2.0;
    const double v = J * data.y[e.sample] / (1.0 - b);
    // Rescale along the relu homogeneity direction (w,b,v) -> (cw,cb,v/c)
    // with c = |v|, leaving the network function unchanged while every
    // output weight becomes +-1.
    const double c = std::abs(v);
    p.W.row(k) = c * e.p.transpose();
    p.b[k] = c * b;
    p.v[k] = v / c;
  }
  if (K > 0) p.validate();
  return p;
}

InterpolationReport verify_interpolant(const ModelParams& params, const Dataset& data,
                                       const ReceptiveFields& fields, bool with_offset) {
  Workspace ws(fields, data);
  PointState st = point_state(params, ws);
  InterpolationReport rep;
  rep.max_residual = st.r.cwiseAbs().maxCoeff();
  const double J = fields.J();
  rep.bound = (data.D * data.D + 2.0 / (J * J)) / data.n() + (with_offset ? 1.0 : 0.0);

  const int Q = params.param_count();
  EigResult eig;
  if (with_offset) {
    eig = sharpness(params, ws, st);
  } else {
    // Curvature of the network scored without its offset parameter: project
    // the offset coordinate out of the operator and start from a vector with
    // no offset component.
    auto op = [&](const Eigen::VectorXd& x) {
      Eigen::VectorXd y = hvp(params, ws, st, x, true);
      y[Q - 1] = 0.0;
      return y;
    };
    RngStream rng(0, stream_id("power-iteration-start"));
    Eigen::VectorXd x0 = gaussian_vector(rng, Q);
    x0[Q - 1] = 0.0;
    eig = top_eigenvalue(op, Q, 1e-8, 1000, 0, &x0);
  }
  rep.lambda_max = eig.value;
  rep.sharp_converged = eig.converged;
  rep.pass = rep.max_residual <= 1e-10 * (1.0 + data.D) &&
             rep.lambda_max <= rep.bound + 1e-8 * (1.0 + rep.bound);
  return rep;
}

}  // namespace eoslab
