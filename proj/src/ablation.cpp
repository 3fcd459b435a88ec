#include "eoslab/ablation.hpp"

#include <cmath>
#include <stdexcept>

#include "eoslab/rng.hpp"
#include "eoslab/training.hpp"

namespace eoslab {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

// Per-location views of the lexicographic (i*J+j) patch matrix.
std::vector<Eigen::MatrixXd> split_locations(const Workspace& ws) {
  std::vector<Eigen::MatrixXd> P_j(ws.J, Eigen::MatrixXd(ws.n, ws.m));
  for (long i = 0; i < ws.n; ++i)
    for (int j = 0; j < ws.J; ++j) P_j[j].row(i) = ws.P.row(i * ws.J + j);
  return P_j;
}

struct UnsharedState {
  std::vector<Eigen::MatrixXd> gate;  // per location, n x K
  Eigen::MatrixXd H;                  // n x K pooled activations
  Eigen::VectorXd r;                  // residuals
  double L = 0.0;
};

UnsharedState unshared_state(const UnsharedParams& p, const Workspace& ws,
                             const std::vector<Eigen::MatrixXd>& P_j) {
  UnsharedState st;
  st.gate.resize(p.J);
  st.H = Eigen::MatrixXd::Zero(ws.n, p.K);
  for (int j = 0; j < p.J; ++j) {
    Eigen::MatrixXd A =
        (P_j[j] * p.W.middleRows(static_cast<long>(j) * p.K, p.K).transpose()).rowwise() -
        p.b.segment(static_cast<long>(j) * p.K, p.K).transpose();
    st.gate[j] = (A.array() > 0.0).cast<double>();
    st.H += A.cwiseMax(0.0);
  }
  st.H /= static_cast<double>(p.J);
  st.r = st.H * p.v;
  st.r.array() += p.beta;
  st.r -= ws.y;
  st.L = st.r.squaredNorm() / (2.0 * ws.n);
  return st;
}

}  // namespace

void UnsharedParams::validate() const {
  require(K >= 1 && J >= 1 && m >= 1, "unshared params: bad shape");
  require(W.rows() == static_cast<long>(J) * K && W.cols() == m,
          "unshared params: W shape mismatch");
  require(b.size() == static_cast<long>(J) * K && v.size() == K,
          "unshared params: b/v shape mismatch");
  require(W.allFinite() && b.allFinite() && v.allFinite() && std::isfinite(beta),
          "unshared params: non-finite entry");
}

UnsharedParams init_unshared(const ReceptiveFields& fields, int K, std::uint64_t seed,
                             const std::string& label) {
  require(K >= 1, "init_unshared: K must be >= 1");
  RngStream rng(seed, stream_id(label));
  UnsharedParams p;
  p.K = K;
  p.J = fields.J();
  p.m = fields.m;
  p.W.resize(static_cast<long>(p.J) * K, p.m);
  std::vector<double> buf(p.m);
  const double w_scale = std::sqrt(2.0 / p.m);
  for (long row = 0; row < p.W.rows(); ++row) {
    fill_gaussian(rng, buf.data(), p.m);
    for (int c = 0; c < p.m; ++c) p.W(row, c) = w_scale * buf[c];
  }
  p.b = Eigen::VectorXd::Zero(static_cast<long>(p.J) * K);
  p.v.resize(K);
  fill_gaussian(rng, p.v.data(), K);
  p.v *= std::sqrt(2.0 / K);
  p.beta = 0.0;
  p.validate();
  return p;
}

Eigen::VectorXd predict_unshared(const UnsharedParams& p, const Workspace& ws) {
  require(p.J == ws.J && p.m == ws.m, "predict_unshared: shape mismatch");
  const std::vector<Eigen::MatrixXd> P_j = split_locations(ws);
  UnsharedState st = unshared_state(p, ws, P_j);
  return st.r + ws.y;
}

double loss_unshared(const UnsharedParams& p, const Workspace& ws) {
  require(p.J == ws.J && p.m == ws.m, "loss_unshared: shape mismatch");
  const std::vector<Eigen::MatrixXd> P_j = split_locations(ws);
  return unshared_state(p, ws, P_j).L;
}

double unshared_gd_step(UnsharedParams& p, const Workspace& ws, double eta) {
  require(p.J == ws.J && p.m == ws.m, "unshared_gd_step: shape mismatch");
  const std::vector<Eigen::MatrixXd> P_j = split_locations(ws);
  UnsharedState st = unshared_state(p, ws, P_j);

  const double scale = 1.0 / (static_cast<double>(ws.n) * p.J);
  Eigen::VectorXd gv = st.H.transpose() * st.r / ws.n;
  const double gbeta = st.r.mean();
  for (int j = 0; j < p.J; ++j) {
    // G_j = gate_j ⊙ (r v^T) / (nJ); filter and bias gradients follow as in
    // the shared model, per location.
    Eigen::MatrixXd G = st.gate[j].array().colwise() * st.r.array();
    G.array().rowwise() *= p.v.transpose().array();
    G *= scale;
    p.W.middleRows(static_cast<long>(j) * p.K, p.K) -= eta * (G.transpose() * P_j[j]);
    p.b.segment(static_cast<long>(j) * p.K, p.K) += eta * G.colwise().sum().transpose();
  }
  p.v -= eta * gv;
  p.beta -= eta * gbeta;
  return st.L;
}

const char* arch_name(AblationArch arch) {
  switch (arch) {
    case AblationArch::fcn:
      return "fcn";
    case AblationArch::lcn:
      return "lcn";
    default:
      return "lcn-ws";
  }
}

void AblationRunConfig::validate() const {
  require(K >= 1, "ablation config: K must be >= 1");
  require(eta > 0.0 && eta < 2.0, "ablation config: eta must be in (0,2)");
  require(epochs >= 1 && record_every >= 1, "ablation config: bad epoch settings");
  require(divergence_loss > 0.0, "ablation config: bad divergence threshold");
}

LossCurve ablation_train(AblationArch arch, int J, int m, const Dataset& train,
                         const Dataset& test, const AblationRunConfig& cfg) {
  cfg.validate();
  require(J >= 1 && m >= 1, "ablation_train: bad patch shape");
  const int d = J * m;
  require(train.d() == d && test.d() == d, "ablation_train: dataset dimension != J*m");

  const ReceptiveFields fields =
      arch == AblationArch::fcn ? ReceptiveFields::fcn(d) : ReceptiveFields::disjoint(d, m);
  Workspace ws(fields, train);
  Workspace ws_test(fields, test);

  const std::string label = std::string("init/ablation/") + arch_name(arch);
  LossCurve curve;

  auto record = [&](long epoch, double train_L, double test_L) {
    curve.epochs.push_back(epoch);
    curve.train_loss.push_back(train_L);
    curve.test_loss.push_back(test_L);
  };
  auto bad = [&](double L) { return !std::isfinite(L) || L > cfg.divergence_loss; };
  auto is_record_epoch = [&](long epoch) {
    return epoch % cfg.record_every == 0 || epoch == cfg.epochs;
  };

  if (arch == AblationArch::lcn) {
    UnsharedParams p = init_unshared(fields, cfg.K, cfg.seed, label);
    for (long epoch = 0; epoch <= cfg.epochs; ++epoch) {
      if (is_record_epoch(epoch)) {
        const double train_L = loss_unshared(p, ws);
        curve.diverged = bad(train_L);
        record(epoch, train_L, loss_unshared(p, ws_test));
        if (curve.diverged || epoch == cfg.epochs) return curve;
      }
      // The step reports the loss at the point it left, catching blow-ups
      // between record epochs. At a record epoch that value was just checked
      // above (same point), so no duplicate row can appear.
      const double L = unshared_gd_step(p, ws, cfg.eta);
      if (bad(L)) {
        curve.diverged = true;
        record(epoch, L, loss_unshared(p, ws_test));
        return curve;
      }
    }
    return curve;
  }

  ModelParams p = init_params(fields, cfg.K, cfg.seed, label);
  for (long epoch = 0; epoch <= cfg.epochs; ++epoch) {
    PointState st = point_state(p, ws);
    if (bad(st.L) || is_record_epoch(epoch)) {
      curve.diverged = bad(st.L);
      const Eigen::VectorXd f_test = predict(p, ws_test);
      record(epoch, st.L, (f_test - test.y).squaredNorm() / (2.0 * test.n()));
      if (curve.diverged || epoch == cfg.epochs) return curve;
    }
    Eigen::VectorXd theta = flatten(p);
    theta -= cfg.eta * gradient(p, ws, st);
    p = unflatten(theta, p.K, p.m);
  }
  return curve;
}

}  // namespace eoslab
