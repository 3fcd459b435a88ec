#include "eoslab/stability.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "eoslab/datagen.hpp"
#include "eoslab/rng.hpp"

namespace eoslab {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

void check_unit(const Eigen::Ref<const Eigen::VectorXd>& u) {
  require(std::abs(u.norm() - 1.0) < 1e-10, "hyperplane direction must be unit norm");
}

}  // namespace

void PatchCloud::validate() const {
  require(m >= 1, "patch cloud: m must be >= 1");
  require(points.rows() >= 1, "patch cloud: need at least one point");
  require(points.cols() == m, "patch cloud: column count != m");
  require(points.allFinite(), "patch cloud: points must be finite");
}

PatchCloud extract_cloud(const Dataset& data, const ReceptiveFields& fields) {
  Workspace ws(fields, data);
  PatchCloud cloud;
  cloud.m = fields.m;
  cloud.points = std::move(ws.P);
  cloud.source = PatchCloud::Source::dataset;
  return cloud;
}

WeightStats weight_stats(const PatchCloud& cloud, const Eigen::Ref<const Eigen::VectorXd>& u,
                         double t) {
  cloud.validate();
  require(u.size() == cloud.m, "weight_stats: direction dimension mismatch");
  check_unit(u);
  const Eigen::VectorXd s = cloud.points * u;
  WeightStats st;
  st.a_bar = Eigen::VectorXd::Zero(cloud.m);
  long active = 0;
  double margin_sum = 0.0;
  for (long i = 0; i < s.size(); ++i) {
    if (s[i] > t) {
      ++active;
      margin_sum += s[i] - t;
      st.a_bar += cloud.points.row(i);
    }
  }
  const double N = static_cast<double>(s.size());
  st.p_bar = active / N;
  st.r_bar = margin_sum / N;
  st.a_bar /= N;
  return st;
}

double weight_product_form(const PatchCloud& cloud,
                           const Eigen::Ref<const Eigen::VectorXd>& u, double t) {
  const WeightStats st = weight_stats(cloud, u, t);
  if (st.p_bar == 0.0) return 0.0;
  return st.r_bar * std::sqrt(st.p_bar * st.p_bar + st.a_bar.squaredNorm());
}

double weight_conditional_form(const PatchCloud& cloud,
                               const Eigen::Ref<const Eigen::VectorXd>& u, double t) {
  const WeightStats st = weight_stats(cloud, u, t);
  if (st.p_bar == 0.0) return 0.0;
  const double cond_margin = st.r_bar / st.p_bar;
  const Eigen::VectorXd cond_moment = st.a_bar / st.p_bar;
  return st.p_bar * st.p_bar * cond_margin * std::sqrt(1.0 + cond_moment.squaredNorm());
}

double weight_function(const PatchCloud& cloud, const Eigen::Ref<const Eigen::VectorXd>& u,
                       double t) {
  return std::min(weight_product_form(cloud, u, t), weight_product_form(cloud, -u, -t));
}

double weighted_path_norm(const ModelParams& p, const PatchCloud& cloud) {
  require(p.m == cloud.m, "weighted_path_norm: dimension mismatch");
  double acc = 0.0;
  for (int k = 0; k < p.K; ++k) {
    const double wn = p.W.row(k).norm();
    require(wn > 0.0, "weighted_path_norm: zero filter");
    const Eigen::VectorXd u = p.W.row(k).transpose() / wn;
    acc += std::abs(p.v[k]) * wn * weight_function(cloud, u, p.b[k] / wn);
  }
  return acc;
}

Certificate certificate(const ModelParams& p, const ReceptiveFields& fields,
                        const Dataset& data, std::optional<double> eta, double sharp_tol,
                        int sharp_max_iter) {
  Workspace ws(fields, data);
  PointState st = point_state(p, ws);
  const EigResult eig = sharpness(p, ws, st, sharp_tol, sharp_max_iter);

  PatchCloud cloud;
  cloud.m = ws.m;
  cloud.points = ws.P;
  cloud.source = PatchCloud::Source::dataset;

  Certificate cert;
  cert.lhs = weighted_path_norm(p, cloud);
  cert.sharpness = eig.value;
  cert.sharp_converged = eig.converged;
  cert.loss = st.L;
  cert.margin = min_margin(p, ws);
  const double drift = 2.0 * (data.R + 1.0) * std::sqrt(2.0 * st.L);
  cert.rhs = (eig.value + drift - 1.0) / 2.0;
  cert.slack = cert.rhs - cert.lhs;
  cert.holds = cert.lhs <= cert.rhs + 1e-8 * (1.0 + std::abs(cert.rhs));
  if (eta.has_value()) {
    require(*eta > 0.0 && *eta < 2.0, "certificate: eta must be in (0,2)");
    cert.rhs_beos = 1.0 / *eta - 0.5 + (data.R + 1.0) * std::sqrt(2.0 * st.L);
  }
  return cert;
}

// --- spherical marginals ---------------------------------------------------

namespace {

constexpr double LN2 = 0.6931471805599453094;

double log_c_d(int d) {
  return std::lgamma(d / 2.0) - std::lgamma((d - 1) / 2.0) - 0.5 * std::log(M_PI);
}

}  // namespace

SphereMarginals SphereMarginals::make(int d) {
  require(d > 1, "sphere marginals: need d > 1");
  SphereMarginals sm;
  sm.d = d;
  sm.alpha = (d - 3) / 2.0;
  const double lcd = log_c_d(d);
  sm.c_d = std::exp(lcd);
  const double lden = 2.0 * std::log(sm.alpha + 1.0) + std::log(sm.alpha + 2.0);
  sm.c_L = std::exp(2.0 * lcd - lden);
  sm.c_U = std::exp(2.0 * lcd + 2.0 * sm.alpha * LN2 - lden);
  return sm;
}

double SphereMarginals::density(double z) const {
  if (std::abs(z) >= 1.0) return 0.0;
  return std::exp(std::log(c_d) + alpha * std::log1p(-z * z));
}

Bracket sphere_tail(int d, double t) {
  require(d > 1, "sphere_tail: need d > 1");
  require(t >= 0.0 && t < 1.0, "sphere_tail: t must be in [0,1)");
  const double alpha = (d - 3) / 2.0;
  const double base = log_c_d(d) - std::log(alpha + 1.0) + (alpha + 1.0) * std::log1p(-t);
  return {std::exp(base), std::exp(base + alpha * LN2)};
}

Bracket sphere_relu_margin(int d, double t) {
  require(d > 1, "sphere_relu_margin: need d > 1");
  require(t >= 0.0 && t < 1.0, "sphere_relu_margin: t must be in [0,1)");
  const double alpha = (d - 3) / 2.0;
  const double base = log_c_d(d) - std::log(alpha + 1.0) - std::log(alpha + 2.0) +
                      (alpha + 2.0) * std::log1p(-t);
  return {std::exp(base), std::exp(base + alpha * LN2)};
}

Bracket sphere_product(int d, double t) {
  require(d > 1, "sphere_product: need d > 1");
  require(t >= 0.0 && t < 1.0, "sphere_product: t must be in [0,1)");
  const SphereMarginals sm = SphereMarginals::make(d);
  const double shape = (2.0 * sm.alpha + 3.0) * std::log1p(-t);
  return {sm.c_L * std::exp(shape), sm.c_U * std::exp(shape)};
}

BoundaryBracket boundary_tail(int d, int m, double t) {
  require(m >= 1 && m < d, "boundary_tail: need 1 <= m < d");
  require(t > 0.0 && t <= 0.25, "boundary_tail: t must be in (0, 1/4]");
  BoundaryBracket out;
  out.beta_a = m / 2.0;
  out.beta_b = (d - m) / 2.0;
  const double log_beta = std::lgamma(out.beta_a) + std::lgamma(out.beta_b) -
                          std::lgamma(out.beta_a + out.beta_b);
  const double half_excess = std::abs(m / 2.0 - 1.0);
  const double log_shared = -std::log(out.beta_b) - log_beta;
  out.c_L = std::exp(log_shared - half_excess * LN2);
  out.c_U = std::exp(log_shared + (half_excess + out.beta_b) * LN2);
  const double shape = out.beta_b * std::log(t);
  out.lower = std::exp(log_shared - half_excess * LN2 + shape);
  out.upper = std::exp(log_shared + (half_excess + out.beta_b) * LN2 + shape);
  return out;
}

// --- rate-exponent calculator ----------------------------------------------

RateBound rate_bound(int d, int m, double J, double n, double eta, double M, double delta,
                     double D, const RateBoundConstants& consts) {
  require(d >= 1 && m >= 1 && m <= d, "rate_bound: need 1 <= m <= d");
  require(J >= 1.0 && n >= 1.0, "rate_bound: need J >= 1 and n >= 1");
  require(eta > 0.0 && eta < 2.0, "rate_bound: eta must be in (0,2)");
  require(M > 0.0 && M >= D, "rate_bound: need M > 0 and M >= D");
  require(delta > 0.0 && delta < 1.0, "rate_bound: delta must be in (0,1)");

  RateBound rb;
  rb.d = d;
  rb.m = m;
  rb.J = J;
  rb.n = n;
  rb.eta = eta;
  rb.M = M;
  rb.delta = delta;
  rb.D = D;
  rb.consts = consts;

  const double dd = d;
  rb.A = 1.0 / eta - 1.0 + 4.0 * M;
  rb.P = (dd - m) * (dd + 3.0) + 2.0 * dd * dd;
  rb.alpha_A = dd * (dd - m) / rb.P;
  rb.alpha_J = dd * (dd + m) / rb.P;
  rb.alpha_M = 4.0 * dd * dd / rb.P +
               3.0 * (dd + 2.0) * (dd - m) * (dd + 3.0) / ((2.0 * dd + 3.0) * rb.P);
  rb.alpha_n = (dd - m) * (dd + 3.0) / (2.0 * rb.P);
  rb.valid = d > 3 && m < dd * (dd - 3.0) / (dd + 3.0);

  const double lnA = std::log(rb.A);
  const double lnJ = std::log(J);
  const double lnM = std::log(M);
  const double lnn = std::log(n);

  // Optimal epsilon, constants dropped:
  //   eps* = A^{2d/P} J^{-2(2d+3)/P} M^{-2d(d+3)/((2d+3)P)} n^{-(d+3)/P}.
  const double ln_eps_star = (2.0 * dd / rb.P) * lnA - (2.0 * (2.0 * dd + 3.0) / rb.P) * lnJ -
                             (2.0 * dd * (dd + 3.0) / ((2.0 * dd + 3.0) * rb.P)) * lnM -
                             ((dd + 3.0) / rb.P) * lnn;
  rb.eps_star = std::exp(ln_eps_star);

  // Smallest epsilon the deviation bound tolerates, with the surrogate
  // c_L(d) ~ 1/d^2 and both unspecified constants folded into C_val * C_ep:
  //   eps_min^d = C d^2 sqrt((m + log(2J/delta)) / n).
  const double lnC = std::log(consts.C_val) + std::log(consts.C_ep);
  const double ln_eps_min =
      (lnC + 2.0 * std::log(dd) +
       0.5 * (std::log(m + std::log(2.0 * J / delta)) - lnn)) /
      dd;
  rb.eps_min = std::exp(ln_eps_min);

  rb.eps_dagger = std::max(rb.eps_min, rb.eps_star);
  const double ln_eps = std::log(rb.eps_dagger);

  const double ln_approx = lnJ + 2.0 * lnM + 0.5 * (dd - m) * ln_eps;
  const double ln_fluct = (dd / (dd + 3.0)) * (lnA - lnJ - dd * ln_eps) +
                          (3.0 * (dd + 2.0) / (2.0 * dd + 3.0)) * lnM - 0.5 * lnn;
  rb.term_approx = std::exp(ln_approx);
  rb.term_fluct = std::exp(ln_fluct);
  rb.bound = rb.term_approx + rb.term_fluct;
  return rb;
}

// --- uniform-deviation experiment ------------------------------------------

namespace {

// Sorted projection scan: after one O(N log N + N m) pass per direction, the
// weight function at any offset costs O(log N + m) through prefix sums.
struct DirectionalScan {
  long N = 0;
  std::vector<double> s;            // sorted ascending projections
  std::vector<double> cum_s;        // cum_s[l] = sum of first l sorted projections
  Eigen::MatrixXd cum_coord;        // (N+1) x m, prefix sums of sorted points

  DirectionalScan(const PatchCloud& cloud, const Eigen::VectorXd& u) {
    N = cloud.N();
    const Eigen::VectorXd proj = cloud.points * u;
    std::vector<long> order(N);
    for (long i = 0; i < N; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](long a, long b) { return proj[a] < proj[b]; });
    s.resize(N);
    cum_s.assign(N + 1, 0.0);
    cum_coord = Eigen::MatrixXd::Zero(N + 1, cloud.m);
    for (long l = 0; l < N; ++l) {
      s[l] = proj[order[l]];
      cum_s[l + 1] = cum_s[l] + s[l];
      cum_coord.row(l + 1) = cum_coord.row(l) + cloud.points.row(order[l]);
    }
  }

  // Weight g at offset t: min over the two orientations of the product form.
  double weight(double t) const {
    const double Nf = static_cast<double>(N);
    // (+) orientation: active where s > t.
    const long pos_up = std::upper_bound(s.begin(), s.end(), t) - s.begin();
    const long cnt_up = N - pos_up;
    double g_plus = 0.0;
    if (cnt_up > 0) {
      const double p = cnt_up / Nf;
      const double r = ((cum_s[N] - cum_s[pos_up]) - cnt_up * t) / Nf;
      const double a2 = (cum_coord.row(N) - cum_coord.row(pos_up)).squaredNorm() / (Nf * Nf);
      g_plus = r * std::sqrt(p * p + a2);
    }
    // (-) orientation: gate (-u).p > -t, i.e. s < t.
    const long pos_lo = std::lower_bound(s.begin(), s.end(), t) - s.begin();
    double g_minus = 0.0;
    if (pos_lo > 0) {
      const double p = pos_lo / Nf;
      const double r = (pos_lo * t - cum_s[pos_lo]) / Nf;
      const double a2 = cum_coord.row(pos_lo).squaredNorm() / (Nf * Nf);
      g_minus = r * std::sqrt(p * p + a2);
    }
    return std::min(g_plus, g_minus);
  }
};

PatchCloud sphere_patch_cloud(int d, int m, int J, int n, std::uint64_t seed,
                              const char* stream_label) {
  RngStream rng(seed, stream_id(stream_label));
  const Eigen::MatrixXd X = sample_sphere(n, d, rng);
  Dataset data;
  data.X = X;
  data.y = Eigen::VectorXd::Zero(n);
  data.R = 1.0;
  data.D = 0.0;
  ReceptiveFields fields = ReceptiveFields::disjoint(J * m, m);
  require(fields.d == d, "deviation_experiment: need d = J*m");
  return extract_cloud(data, fields);
}

}  // namespace

std::vector<DeviationRow> deviation_experiment(int d, int m, int J,
                                               const std::vector<int>& n_list,
                                               const DeviationConfig& cfg,
                                               std::uint64_t seed) {
  require(d == J * m, "deviation_experiment: requires d = J*m (disjoint patches)");
  require(cfg.n_dirs >= 1 && cfg.n_offsets >= 1 && cfg.n_pop >= 1,
          "deviation_experiment: grid sizes must be positive");

  RngStream dir_rng(seed, stream_id("deviation/dirs"));
  std::vector<Eigen::VectorXd> dirs(cfg.n_dirs);
  for (auto& u : dirs) u = unit_vector(dir_rng, m);
  std::vector<double> offsets(cfg.n_offsets);
  for (int l = 0; l < cfg.n_offsets; ++l)
    offsets[l] = cfg.n_offsets == 1 ? 0.0 : -1.0 + 2.0 * l / (cfg.n_offsets - 1);

  const PatchCloud pop = sphere_patch_cloud(d, m, J, cfg.n_pop, seed, "deviation/pop");
  std::vector<PatchCloud> emp;
  emp.reserve(n_list.size());
  for (int n : n_list) emp.push_back(sphere_patch_cloud(d, m, J, n, seed, "deviation/data"));

  std::vector<double> max_dev(n_list.size(), 0.0);
  for (const auto& u : dirs) {
    const DirectionalScan scan_pop(pop, u);
    for (std::size_t i = 0; i < emp.size(); ++i) {
      const DirectionalScan scan_emp(emp[i], u);
      for (double t : offsets)
        max_dev[i] = std::max(max_dev[i], std::abs(scan_emp.weight(t) - scan_pop.weight(t)));
    }
  }
  std::vector<DeviationRow> rows;
  for (std::size_t i = 0; i < n_list.size(); ++i) rows.push_back({n_list[i], max_dev[i]});
  return rows;
}

}  // namespace eoslab
