#pragma once
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "eoslab/model.hpp"

namespace eoslab {

// Multiset of patches in R^m. When extracted from a dataset the rows are the
// nJ patches pi_j(x_i) in (sample, patch)-lexicographic order; external clouds
// (image patches, Monte-Carlo surrogates) use the same container.
struct PatchCloud {
  enum class Source { dataset, external };

  int m = 0;
  Eigen::MatrixXd points;  // N x m
  Source source = Source::external;

  int N() const { return static_cast<int>(points.rows()); }
  void validate() const;
};

PatchCloud extract_cloud(const Dataset& data, const ReceptiveFields& fields);

// Empirical half-space statistics of a cloud at hyperplane (u, t), ||u|| = 1:
//   p_bar = (1/N) sum 1{u.p > t}          gate probability
//   r_bar = (1/N) sum relu(u.p - t)       expected margin
//   a_bar = (1/N) sum p 1{u.p > t}        gated first moment
struct WeightStats {
  double p_bar = 0.0;
  double r_bar = 0.0;
  Eigen::VectorXd a_bar;
};

WeightStats weight_stats(const PatchCloud& cloud, const Eigen::Ref<const Eigen::VectorXd>& u,
                         double t);

// One orientation of the weight function, product form:
//   g~(u,t) = r_bar * sqrt(p_bar^2 + ||a_bar||^2).
// Total: returns 0 when the half-space is empty (p_bar = 0).
double weight_product_form(const PatchCloud& cloud,
                           const Eigen::Ref<const Eigen::VectorXd>& u, double t);

// Conditional form P^2 E[u.p - t | active] sqrt(1 + ||E[p | active]||^2);
// defined only for p_bar > 0 (returns 0 otherwise). Equals the product form
// whenever p_bar > 0; kept as a cross-check of the canonical form above.
double weight_conditional_form(const PatchCloud& cloud,
                               const Eigen::Ref<const Eigen::VectorXd>& u, double t);

// Orientation-symmetrized weight g(u,t) = min(g~(u,t), g~(-u,-t)).
double weight_function(const PatchCloud& cloud, const Eigen::Ref<const Eigen::VectorXd>& u,
                       double t);

// sum_k |v_k| ||w_k|| g(w_k/||w_k||, b_k/||w_k||). Zero filters are rejected.
double weighted_path_norm(const ModelParams& p, const PatchCloud& cloud);

// Sharpness-vs-path-norm certificate. Unconditionally,
//   weighted path norm <= (lambda_max + 2(R+1) sqrt(2L) - 1) / 2,
// and under the step-size stability condition lambda_max <= 2/eta the cap
// tightens to 1/eta - 1/2 + (R+1) sqrt(2L) (reported when eta is supplied).
struct Certificate {
  double lhs = 0.0;        // weighted path norm
  double rhs = 0.0;        // sharpness-based cap
  double slack = 0.0;      // rhs - lhs
  bool holds = false;      // lhs <= rhs + 1e-8 (1 + |rhs|)
  double sharpness = 0.0;
  bool sharp_converged = false;
  double loss = 0.0;
  double margin = 0.0;     // min pre-activation margin at the evaluated point
  std::optional<double> rhs_beos;  // step-size variant, present when eta given
};

Certificate certificate(const ModelParams& p, const ReceptiveFields& fields,
                        const Dataset& data, std::optional<double> eta = std::nullopt,
                        double sharp_tol = 1e-8, int sharp_max_iter = 1000);

// --- closed-form marginals of Uniform(S^{d-1}) -----------------------------

// One-coordinate marginal density f_d(z) = c_d (1 - z^2)^((d-3)/2) with
// c_d = Gamma(d/2) / (sqrt(pi) Gamma((d-1)/2)), and the constants of the
// polynomial tail brackets built from it. Evaluated through lgamma so d up
// to 10^4 cannot overflow.
struct SphereMarginals {
  int d = 0;
  double alpha = 0.0;
  double c_d = 0.0;
  double c_L = 0.0;  // c_d^2 / ((alpha+1)^2 (alpha+2))
  double c_U = 0.0;  // c_d^2 4^alpha / ((alpha+1)^2 (alpha+2))

  static SphereMarginals make(int d);
  double density(double z) const;  // 0 outside (-1, 1)
};

struct Bracket {
  double lower = 0.0;
  double upper = 0.0;
};

// P(Z > t) in [c_d/(alpha+1) (1-t)^(alpha+1), c_d 2^alpha/(alpha+1) (1-t)^(alpha+1)].
Bracket sphere_tail(int d, double t);

// E[relu(Z - t)] bracket; same shape with one more power and factor 1/(alpha+2).
Bracket sphere_relu_margin(int d, double t);

// P(Z > t) * E[relu(Z - t)] bracket with the c_L/c_U constants above.
Bracket sphere_product(int d, double t);

// Tail of the projected radius: ||proj_m Z||^2 ~ Beta(m/2, (d-m)/2) and for
// t in (0, 1/4],
//   c_L(d,m) t^{(d-m)/2} <= P(||proj_m Z|| > 1 - t) <= c_U(d,m) t^{(d-m)/2}.
struct BoundaryBracket {
  double lower = 0.0;
  double upper = 0.0;
  double beta_a = 0.0;  // m/2
  double beta_b = 0.0;  // (d-m)/2
  double c_L = 0.0;
  double c_U = 0.0;
};

BoundaryBracket boundary_tail(int d, int m, double t);

// --- rate-exponent calculator ----------------------------------------------

// The two constants the source material leaves unspecified; both default to 1
// and are echoed in every output so downstream readers know the bound values
// are order-of-magnitude diagnostics, not certified constants.
struct RateBoundConstants {
  double C_ep = 1.0;   // uniform-deviation constant
  double C_val = 1.0;  // constant hidden in the validity condition
};

struct RateBound {
  int d = 0, m = 0;
  double J = 0, n = 0, eta = 0, M = 0, delta = 0, D = 0;
  RateBoundConstants consts;

  double A = 0;  // 1/eta - 1 + 4M
  double P = 0;  // (d-m)(d+3) + 2d^2
  double alpha_A = 0, alpha_J = 0, alpha_M = 0, alpha_n = 0;
  double eps_min = 0, eps_star = 0, eps_dagger = 0;
  double term_approx = 0;  // J M^2 eps^((d-m)/2)
  double term_fluct = 0;   // ((A/J) eps^-d)^{d/(d+3)} M^{3(d+2)/(2d+3)} n^{-1/2}
  double bound = 0;        // sum of the two, constants set to 1
  bool valid = false;      // d > 3 and m < d(d-3)/(d+3)
};

RateBound rate_bound(int d, int m, double J, double n, double eta, double M, double delta,
                     double D, const RateBoundConstants& consts = {});

// --- empirical uniform-deviation experiment --------------------------------

struct DeviationConfig {
  int n_dirs = 256;     // random unit directions
  int n_offsets = 64;   // equispaced offsets in [-1, 1]
  int n_pop = 32768;    // samples behind the population surrogate cloud
};

struct DeviationRow {
  int n = 0;
  double max_dev = 0.0;  // max over the (u,t) grid of |g_cloud - g_surrogate|
};

// For each n: draw a fresh spherical dataset with disjoint patches, extract
// its cloud, and compare its weight function against a high-sample surrogate
// cloud on a fixed (u, t) grid. The grid and the surrogate are derived from
// `seed` only, so rows are comparable across n.
std::vector<DeviationRow> deviation_experiment(int d, int m, int J,
                                               const std::vector<int>& n_list,
                                               const DeviationConfig& cfg,
                                               std::uint64_t seed);

}  // namespace eoslab
