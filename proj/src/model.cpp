#include "eoslab/model.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "eoslab/rng.hpp"

namespace eoslab {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

// Pools (nJ)-row per-patch values into n per-sample means: out_i = (1/J) sum_j in_(i*J+j).
Eigen::VectorXd pool_rows(const Eigen::VectorXd& in, int n, int J) {
  Eigen::VectorXd out(n);
  for (int i = 0; i < n; ++i) out[i] = in.segment(static_cast<long>(i) * J, J).sum() / J;
  return out;
}

// Lifts an n-vector to nJ entries, repeating each J times.
Eigen::VectorXd lift_rows(const Eigen::VectorXd& in, int J) {
  const int n = static_cast<int>(in.size());
  Eigen::VectorXd out(static_cast<long>(n) * J);
  for (int i = 0; i < n; ++i) out.segment(static_cast<long>(i) * J, J).setConstant(in[i]);
  return out;
}

void check_dims(const ModelParams& p, const Workspace& ws) {
  require(p.m == ws.m, "model/workspace patch dimension mismatch");
}

}  // namespace

// --- types -----------------------------------------------------------------

void ReceptiveFields::validate() const {
  require(d >= 1, "receptive fields: d must be >= 1");
  require(m >= 1 && m <= d, "receptive fields: need 1 <= m <= d");
  require(!subsets.empty(), "receptive fields: need at least one subset");
  for (const auto& s : subsets) {
    require(static_cast<int>(s.size()) == m, "receptive fields: subset size != m");
    for (int idx : s) require(idx >= 0 && idx < d, "receptive fields: index out of range");
  }
}

ReceptiveFields ReceptiveFields::fcn(int d) {
  ReceptiveFields f;
  f.d = d;
  f.m = d;
  f.subsets.resize(1);
  f.subsets[0].resize(d);
  std::iota(f.subsets[0].begin(), f.subsets[0].end(), 0);
  f.validate();
  return f;
}

ReceptiveFields ReceptiveFields::disjoint(int d, int m) {
  require(m >= 1 && d >= 1 && d % m == 0, "disjoint fields require m | d");
  ReceptiveFields f;
  f.d = d;
  f.m = m;
  const int J = d / m;
  f.subsets.resize(J);
  for (int j = 0; j < J; ++j) {
    f.subsets[j].resize(m);
    std::iota(f.subsets[j].begin(), f.subsets[j].end(), j * m);
  }
  f.validate();
  return f;
}

void ModelParams::validate() const {
  require(K >= 0, "model: K must be >= 0");
  require(W.rows() == K && W.cols() == m, "model: W must be K x m");
  require(b.size() == K && v.size() == K, "model: b, v must have length K");
  require(std::isfinite(beta), "model: beta must be finite");
  require(W.allFinite() && b.allFinite() && v.allFinite(), "model: parameters must be finite");
  for (int k = 0; k < K; ++k)
    require(W.row(k).norm() > 0.0, "model: zero filters are not allowed");
}

void Dataset::validate() const {
  require(X.rows() >= 1, "dataset: need n >= 1");
  require(y.size() == X.rows(), "dataset: label count != sample count");
  require(X.allFinite() && y.allFinite(), "dataset: entries must be finite");
  const double epsentry = 1e-9;
  for (int i = 0; i < X.rows(); ++i) {
    require(X.row(i).norm() <= R * (1 + 1e-12) + epsentry, "dataset: ||x_i|| exceeds R");
  }
  for (int i = 0; i < y.size(); ++i)
    require(std::abs(y[i]) <= D * (1 + 1e-12) + epsentry, "dataset: |y_i| exceeds D");
  if (f_true.size() != 0) require(f_true.size() == y.size(), "dataset: f_true size mismatch");
}

Eigen::VectorXd flatten(const ModelParams& p) {
  Eigen::VectorXd theta(p.param_count());
  for (int k = 0; k < p.K; ++k) theta.segment(static_cast<long>(k) * p.m, p.m) = p.W.row(k);
  theta.segment(static_cast<long>(p.K) * p.m, p.K) = p.b;
  theta.segment(static_cast<long>(p.K) * (p.m + 1), p.K) = p.v;
  theta[p.param_count() - 1] = p.beta;
  return theta;
}

ModelParams unflatten(const Eigen::Ref<const Eigen::VectorXd>& theta, int K, int m) {
  require(theta.size() == static_cast<long>(K) * (m + 2) + 1, "unflatten: wrong length");
  ModelParams p;
  p.K = K;
  p.m = m;
  p.W.resize(K, m);
  for (int k = 0; k < K; ++k) p.W.row(k) = theta.segment(static_cast<long>(k) * m, m);
  p.b = theta.segment(static_cast<long>(K) * m, K);
  p.v = theta.segment(static_cast<long>(K) * (m + 1), K);
  p.beta = theta[theta.size() - 1];
  return p;
}

Workspace::Workspace(const ReceptiveFields& fields, const Dataset& data) {
  fields.validate();
  require(fields.d == data.d(), "workspace: fields.d != dataset dimension");
  n = data.n();
  J = fields.J();
  m = fields.m;
  y = data.y;
  P.resize(static_cast<long>(n) * J, m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < J; ++j) {
      const auto& s = fields.subsets[j];
      for (int c = 0; c < m; ++c) P(static_cast<long>(i) * J + j, c) = data.X(i, s[c]);
    }
}

// --- state -----------------------------------------------------------------

PointState point_state(const ModelParams& p, const Workspace& ws) {
  check_dims(p, ws);
  PointState st;
  const long NJ = ws.P.rows();
  st.A.noalias() = ws.P * p.W.transpose();
  st.A.rowwise() -= p.b.transpose();
  st.gate = (st.A.array() > 0.0).cast<double>();
  Eigen::MatrixXd relu = st.A.cwiseMax(0.0);
  st.H.resize(ws.n, p.K);
  for (int i = 0; i < ws.n; ++i)
    st.H.row(i) = relu.middleRows(static_cast<long>(i) * ws.J, ws.J).colwise().sum() / ws.J;
  st.f = st.H * p.v;
  st.f.array() += p.beta;
  st.r = st.f - ws.y;
  st.L = st.r.squaredNorm() / (2.0 * ws.n);
  Eigen::VectorXd rl = lift_rows(st.r, ws.J);
  Eigen::MatrixXd M = st.gate.array().colwise() * rl.array();
  const double scale = 1.0 / (static_cast<double>(ws.n) * ws.J);
  st.rw_moment.noalias() = (M.transpose() * ws.P) * scale;
  st.rw_mass = M.colwise().sum() * scale;
  (void)NJ;
  return st;
}

// --- forward / loss --------------------------------------------------------

double forward(const ModelParams& p, const ReceptiveFields& fields,
               const Eigen::Ref<const Eigen::VectorXd>& x) {
  fields.validate();
  p.validate();
  require(p.m == fields.m, "forward: params.m != fields.m");
  require(x.size() == fields.d, "forward: input dimension mismatch");
  const int J = fields.J();
  double out = p.beta;
  Eigen::VectorXd patch(fields.m);
  for (int k = 0; k < p.K; ++k) {
    double acc = 0.0;
    for (int j = 0; j < J; ++j) {
      const auto& s = fields.subsets[j];
      for (int c = 0; c < fields.m; ++c) patch[c] = x[s[c]];
      const double a = p.W.row(k).dot(patch) - p.b[k];
      if (a > 0.0) acc += a;
    }
    out += p.v[k] * acc / J;
  }
  return out;
}

Eigen::VectorXd predict(const ModelParams& p, const Workspace& ws) {
  check_dims(p, ws);
  Eigen::MatrixXd A = ws.P * p.W.transpose();
  A.rowwise() -= p.b.transpose();
  Eigen::VectorXd q = A.cwiseMax(0.0) * p.v;
  Eigen::VectorXd f = pool_rows(q, ws.n, ws.J);
  f.array() += p.beta;
  return f;
}

double loss(const ModelParams& p, const ReceptiveFields& fields, const Dataset& data) {
  Workspace ws(fields, data);
  Eigen::VectorXd r = predict(p, ws) - ws.y;
  return r.squaredNorm() / (2.0 * ws.n);
}

double plugin_risk(const ModelParams& p, const ReceptiveFields& fields, const Dataset& data) {
  return 2.0 * loss(p, fields, data);
}

// --- gates -----------------------------------------------------------------

GateMatrix gates(const ModelParams& p, const ReceptiveFields& fields, const Dataset& data) {
  Workspace ws(fields, data);
  Eigen::MatrixXd A = ws.P * p.W.transpose();
  A.rowwise() -= p.b.transpose();
  return (A.array() > 0.0).cast<std::uint8_t>();
}

// --- gradient --------------------------------------------------------------

Eigen::VectorXd gradient(const ModelParams& p, const Workspace& ws) {
  return gradient(p, ws, point_state(p, ws));
}

Eigen::VectorXd gradient(const ModelParams& p, const Workspace& ws, const PointState& st) {
  Eigen::VectorXd g(p.param_count());
  // w-block: v_k scales the residual-gated patch moment of neuron k.
  for (int k = 0; k < p.K; ++k)
    g.segment(static_cast<long>(k) * p.m, p.m) = p.v[k] * st.rw_moment.row(k);
  g.segment(static_cast<long>(p.K) * p.m, p.K) = -p.v.cwiseProduct(st.rw_mass);
  g.segment(static_cast<long>(p.K) * (p.m + 1), p.K) = st.H.transpose() * st.r / ws.n;
  g[g.size() - 1] = st.r.mean();
  return g;
}

Eigen::VectorXd gradient(const ModelParams& p, const ReceptiveFields& fields,
                         const Dataset& data) {
  Workspace ws(fields, data);
  return gradient(p, ws);
}

Eigen::MatrixXd gradient_factorized(const ModelParams& p, const Workspace& ws) {
  check_dims(p, ws);
  PointState st = point_state(p, ws);
  Eigen::VectorXd rl = lift_rows(st.r, ws.J);
  // G = (1/nJ) (rbar v^T) ⊙ gate, then G^T P. Unlike gradient(), v_k enters
  // every summand before the reduction, so the two routes agree only up to
  // floating-point associativity.
  Eigen::MatrixXd G = st.gate.array().colwise() * rl.array();
  G.array().rowwise() *= p.v.transpose().array();
  G /= static_cast<double>(ws.n) * ws.J;
  return G.transpose() * ws.P;
}

Eigen::MatrixXd gradient_factorized(const ModelParams& p, const ReceptiveFields& fields,
                                    const Dataset& data) {
  Workspace ws(fields, data);
  return gradient_factorized(p, ws);
}

// --- Hessian-vector product ------------------------------------------------

Eigen::VectorXd hvp(const ModelParams& p, const Workspace& ws, const PointState& st,
                    const Eigen::Ref<const Eigen::VectorXd>& dir,
                    bool include_residual_term) {
  check_dims(p, ws);
  require(dir.size() == p.param_count(), "hvp: direction has wrong length");
  const ModelParams d = unflatten(dir, p.K, p.m);  // Aw = d.W, ab = d.b, av = d.v
  const double scale = 1.0 / (static_cast<double>(ws.n) * ws.J);

  // Tangent derivative t_i = grad f(x_i) . dir for every sample.
  Eigen::VectorXd t = Eigen::VectorXd::Constant(ws.n, d.beta);
  Eigen::MatrixXd C;
  if (p.K > 0) {
    C.noalias() = ws.P * d.W.transpose();
    C.rowwise() -= d.b.transpose();
    Eigen::VectorXd q = (st.gate.cwiseProduct(C)) * p.v;
    t += pool_rows(q, ws.n, ws.J);
    t.noalias() += st.H * d.v;
  }

  Eigen::VectorXd out(p.param_count());
  // Gram part: the gradient formulas with t in place of the residual.
  Eigen::VectorXd tl = lift_rows(t, ws.J);
  Eigen::MatrixXd Mt = st.gate.array().colwise() * tl.array();
  Eigen::MatrixXd tw_moment = (Mt.transpose() * ws.P) * scale;
  Eigen::VectorXd tw_mass = Mt.colwise().sum() * scale;
  for (int k = 0; k < p.K; ++k)
    out.segment(static_cast<long>(k) * p.m, p.m) = p.v[k] * tw_moment.row(k);
  Eigen::VectorXd out_b = -p.v.cwiseProduct(tw_mass);
  Eigen::VectorXd out_v = st.H.transpose() * t / ws.n;
  double out_beta = t.mean();

  if (include_residual_term && p.K > 0) {
    // Mixed-block part, applied through the residual-gated moments:
    //   w_k += av_k * rw_moment_k,  b_k += -av_k * rw_mass_k,
    //   v_k += rw_moment_k . Aw_k - rw_mass_k * ab_k.
    for (int k = 0; k < p.K; ++k)
      out.segment(static_cast<long>(k) * p.m, p.m) += d.v[k] * st.rw_moment.row(k);
    out_b -= d.v.cwiseProduct(st.rw_mass);
    out_v += (st.rw_moment.cwiseProduct(d.W)).rowwise().sum() - st.rw_mass.cwiseProduct(d.b);
  }

  out.segment(static_cast<long>(p.K) * p.m, p.K) = out_b;
  out.segment(static_cast<long>(p.K) * (p.m + 1), p.K) = out_v;
  out[out.size() - 1] = out_beta;
  return out;
}

Eigen::VectorXd hvp(const ModelParams& p, const ReceptiveFields& fields,
                    const Dataset& data, const Eigen::Ref<const Eigen::VectorXd>& dir) {
  Workspace ws(fields, data);
  PointState st = point_state(p, ws);
  return hvp(p, ws, st, dir, true);
}

// --- dense Hessian (oracle route) ------------------------------------------

Eigen::MatrixXd dense_hessian(const ModelParams& p, const ReceptiveFields& fields,
                              const Dataset& data) {
  const int Q = p.param_count();
  require(Q <= 5000, "dense_hessian: parameter count above the 5000 guard");
  fields.validate();
  p.validate();
  const int n = data.n();
  const int J = fields.J();
  const int m = fields.m;

  // Per-sample flat gradients of f, assembled by plain loops (this keeps the
  // route independent of the batched GEMM path it is an oracle for).
  Eigen::MatrixXd Gm(n, Q);
  Eigen::MatrixXd S(n * p.K, m);  // s_k per sample: (1/J) sum_j gate * patch
  Eigen::MatrixXd T(n, p.K);      // t_k per sample: (1/J) sum_j gate
  Eigen::VectorXd resid(n);
  Eigen::VectorXd patch(m);
  for (int i = 0; i < n; ++i) {
    Gm.row(i).setZero();
    double f = p.beta;
    for (int k = 0; k < p.K; ++k) {
      Eigen::VectorXd s_k = Eigen::VectorXd::Zero(m);
      double t_k = 0.0, relu_sum = 0.0;
      for (int j = 0; j < J; ++j) {
        const auto& sub = fields.subsets[j];
        for (int c = 0; c < m; ++c) patch[c] = data.X(i, sub[c]);
        const double a = p.W.row(k).dot(patch) - p.b[k];
        if (a > 0.0) {
          relu_sum += a;
          s_k += patch;
          t_k += 1.0;
        }
      }
      s_k /= J;
      t_k /= J;
      relu_sum /= J;
      f += p.v[k] * relu_sum;
      S.row(static_cast<long>(i) * p.K + k) = s_k;
      T(i, k) = t_k;
      Gm.row(i).segment(static_cast<long>(k) * m, m) = p.v[k] * s_k;
      Gm(i, static_cast<long>(p.K) * m + k) = -p.v[k] * t_k;
      Gm(i, static_cast<long>(p.K) * (m + 1) + k) = relu_sum;
    }
    Gm(i, Q - 1) = 1.0;
    resid[i] = f - data.y[i];
  }

  Eigen::MatrixXd H = (Gm.transpose() * Gm) / n;
  for (int k = 0; k < p.K; ++k) {
    const long wk = static_cast<long>(k) * m;
    const long bk = static_cast<long>(p.K) * m + k;
    const long vk = static_cast<long>(p.K) * (m + 1) + k;
    Eigen::VectorXd ws_acc = Eigen::VectorXd::Zero(m);
    double tb_acc = 0.0;
    for (int i = 0; i < n; ++i) {
      ws_acc += resid[i] * S.row(static_cast<long>(i) * p.K + k);
      tb_acc += resid[i] * T(i, k);
    }
    ws_acc /= n;
    tb_acc /= n;
    // Mixed (w_k, v_k) block is +s_k; mixed (b_k, v_k) is -t_k, inheriting the
    // sign of df/db_k. Both sides assigned identically keeps H exactly symmetric.
    H.block(wk, vk, m, 1) += ws_acc;
    H.block(vk, wk, 1, m) += ws_acc.transpose();
    H(bk, vk) -= tb_acc;
    H(vk, bk) -= tb_acc;
  }
  return H;
}

// --- power iteration -------------------------------------------------------

namespace {

// Runs power iteration on op + shift*I and returns the Rayleigh quotient of
// op at the final iterate plus convergence data. `op` must be symmetric.
template <typename MatVec>
EigResult power_phase(const MatVec& op, Eigen::VectorXd x, double shift, double tol,
                      int max_iter) {
  EigResult res;
  x.normalize();
  double prev = std::numeric_limits<double>::quiet_NaN();
  for (int it = 1; it <= max_iter; ++it) {
    Eigen::VectorXd y = op(x);
    const double rq = x.dot(y);  // Rayleigh quotient of op (shift cancels in reporting)
    res.value = rq;
    res.iters = it;
    if (it > 1 && std::abs(rq - prev) < tol * (1.0 + std::abs(rq))) {
      res.converged = true;
      res.vector = x;
      return res;
    }
    prev = rq;
    y += shift * x;
    const double norm = y.norm();
    if (norm == 0.0) {  // x is in the kernel of op + shift I; rq is exact there
      res.converged = true;
      res.vector = x;
      return res;
    }
    x = y / norm;
  }
  res.vector = x;
  return res;
}

Eigen::VectorXd start_vector(int Q, std::uint64_t seed, const Eigen::VectorXd* warm) {
  if (warm != nullptr && warm->size() == Q && warm->norm() > 0) return *warm;
  RngStream rng(seed, stream_id("power-iteration-start"));
  return gaussian_vector(rng, Q);
}

}  // namespace

EigResult top_eigenvalue(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& op,
                         int dim, double tol, int max_iter, std::uint64_t seed,
                         const Eigen::VectorXd* warm_start) {
  require(tol > 0, "top_eigenvalue: tol must be positive");
  Eigen::VectorXd x0 = start_vector(dim, seed, warm_start);

  // Phase 1 homes in on the dominant-magnitude eigenvalue mu. When that is
  // already the top algebraic eigenvalue (mu >= 0, converged) we are done.
  // Otherwise iterate on H + |mu| I, whose top eigenvalue is the algebraic
  // maximum shifted up, and report the unshifted Rayleigh quotient. The shift
  // is also applied when phase 1 stalls (near-tied +/- extremes oscillate).
  EigResult phase1 = power_phase(op, x0, 0.0, tol, max_iter);
  if (phase1.converged && phase1.value >= 0.0) return phase1;

  const double shift = std::abs(phase1.value);
  EigResult phase2 = power_phase(op, x0, shift, tol, max_iter);
  phase2.iters += phase1.iters;
  return phase2;
}

EigResult sharpness(const ModelParams& p, const Workspace& ws, const PointState& st,
                    double tol, int max_iter, std::uint64_t seed,
                    const Eigen::VectorXd* warm_start) {
  auto op = [&](const Eigen::VectorXd& x) { return hvp(p, ws, st, x, true); };
  return top_eigenvalue(op, p.param_count(), tol, max_iter, seed, warm_start);
}

EigResult sharpness(const ModelParams& p, const ReceptiveFields& fields, const Dataset& data,
                    double tol, int max_iter, std::uint64_t seed,
                    const Eigen::VectorXd* warm_start) {
  Workspace ws(fields, data);
  PointState st = point_state(p, ws);
  return sharpness(p, ws, st, tol, max_iter, seed, warm_start);
}

EigResult tangent_top_eig(const ModelParams& p, const ReceptiveFields& fields,
                          const Dataset& data, double tol, int max_iter,
                          std::uint64_t seed) {
  require(tol > 0, "tangent_top_eig: tol must be positive");
  Workspace ws(fields, data);
  PointState st = point_state(p, ws);
  auto op = [&](const Eigen::VectorXd& x) { return hvp(p, ws, st, x, false); };
  // The Gram part is positive semidefinite, so plain power iteration finds
  // its top eigenvalue directly.
  return power_phase(op, start_vector(p.param_count(), seed, nullptr), 0.0, tol, max_iter);
}

// --- margin ----------------------------------------------------------------

double min_margin(const ModelParams& p, const Workspace& ws) {
  check_dims(p, ws);
  if (p.K == 0) return std::numeric_limits<double>::infinity();
  Eigen::MatrixXd A = ws.P * p.W.transpose();
  A.rowwise() -= p.b.transpose();
  return A.cwiseAbs().minCoeff();
}

double min_margin(const ModelParams& p, const ReceptiveFields& fields, const Dataset& data) {
  Workspace ws(fields, data);
  return min_margin(p, ws);
}

}  // namespace eoslab
