#pragma once
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace eoslab {

// ---------------------------------------------------------------------------
// Two-layer locally connected ReLU network with weight sharing:
//
//   f(x) = sum_k v_k * (1/J) * sum_j relu(w_k . pi_j(x) - b_k) + beta
//
// where pi_j extracts the coordinates of receptive field S_j. The fully
// connected network is the special case J = 1, S_1 = all coordinates.
// Training minimizes L = (1/2n) sum_i (f(x_i) - y_i)^2; the un-halved
// plug-in risk (1/n) sum (f - y)^2 = 2L is what risk reports use.
// ---------------------------------------------------------------------------

// Ordered coordinate subsets S_1..S_J of {0..d-1}, each of size m.
struct ReceptiveFields {
  int d = 0;
  int m = 0;
  std::vector<std::vector<int>> subsets;

  int J() const { return static_cast<int>(subsets.size()); }
  void validate() const;  // throws std::invalid_argument

  static ReceptiveFields fcn(int d);
  // Contiguous disjoint patches S_j = [j*m, (j+1)*m); requires m | d.
  static ReceptiveFields disjoint(int d, int m);
};

// Width-K parameter set. K = 0 (output-bias-only model) is legal and is the
// cleanest analytic Hessian case; zero filters are rejected.
struct ModelParams {
  int K = 0;
  int m = 0;
  Eigen::MatrixXd W;  // K x m filters
  Eigen::VectorXd b;  // K biases
  Eigen::VectorXd v;  // K output weights
  double beta = 0.0;

  int param_count() const { return K * (m + 2) + 1; }
  void validate() const;
};

struct Dataset {
  Eigen::MatrixXd X;  // n x d, one sample per row
  Eigen::VectorXd y;  // n labels
  double R = 0.0;     // input-norm bound, ||x_i|| <= R
  double D = 0.0;     // label bound, |y_i| <= D
  // Noiseless teacher values (size 0 when unknown); lets excess risk be
  // computed on held-out data without re-evaluating the teacher.
  Eigen::VectorXd f_true;

  int n() const { return static_cast<int>(X.rows()); }
  int d() const { return static_cast<int>(X.cols()); }
  void validate() const;
};

// Canonical flat parameter order: w_1..w_K (each of length m), b_1..b_K,
// v_1..v_K, beta. Length K(m+2)+1. File formats and all Hessian/gradient
// vectors use this order.
Eigen::VectorXd flatten(const ModelParams& p);
ModelParams unflatten(const Eigen::Ref<const Eigen::VectorXd>& theta, int K, int m);

// Patch matrix shared by the batched operations: row i*J + j is pi_j(x_i)
// ((sample, patch)-lexicographic, patch index fastest). Building it once and
// reusing it is what makes the training loop a handful of GEMMs per step.
struct Workspace {
  int n = 0, J = 0, m = 0;
  Eigen::MatrixXd P;  // (nJ) x m
  Eigen::VectorXd y;  // n

  Workspace() = default;
  Workspace(const ReceptiveFields& fields, const Dataset& data);
};

// Per-point quantities every Hessian-vector product at a fixed parameter
// point reuses. gate entries are the strict indicators (A > 0) stored as
// 0/1 doubles so they can enter matrix products directly.
struct PointState {
  Eigen::MatrixXd A;     // (nJ) x K pre-activations w_k.p - b_k
  Eigen::MatrixXd gate;  // (nJ) x K
  Eigen::MatrixXd H;     // n x K pooled responses (1/J) sum_j relu(A)
  Eigen::VectorXd f;     // n predictions
  Eigen::VectorXd r;     // n residuals f - y
  double L = 0.0;        // (1/2n) ||r||^2
  // Residual-gated patch moments: row k of rw_moment is
  // (1/nJ) sum_{ij} gate_{(ij)k} r_i pi_j(x_i), and rw_mass_k is
  // (1/nJ) sum_{ij} gate_{(ij)k} r_i. They carry the entire curvature
  // contribution of the mixed second-derivative blocks.
  Eigen::MatrixXd rw_moment;  // K x m
  Eigen::VectorXd rw_mass;    // K
};

PointState point_state(const ModelParams& p, const Workspace& ws);

// --- forward / loss --------------------------------------------------------

double forward(const ModelParams& p, const ReceptiveFields& fields,
               const Eigen::Ref<const Eigen::VectorXd>& x);
Eigen::VectorXd predict(const ModelParams& p, const Workspace& ws);

double loss(const ModelParams& p, const ReceptiveFields& fields, const Dataset& data);
double plugin_risk(const ModelParams& p, const ReceptiveFields& fields, const Dataset& data);

// --- gates -----------------------------------------------------------------

using GateMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

// Exact strict indicator gate[(i,j), k] = 1{w_k . pi_j(x_i) > b_k}; ties are 0.
GateMatrix gates(const ModelParams& p, const ReceptiveFields& fields, const Dataset& data);

// --- derivatives -----------------------------------------------------------

// Analytic gradient of L in flat order, gates frozen at the current sign
// pattern. Accumulated sample-by-sample (fixed order).
Eigen::VectorXd gradient(const ModelParams& p, const ReceptiveFields& fields,
                         const Dataset& data);
Eigen::VectorXd gradient(const ModelParams& p, const Workspace& ws);
Eigen::VectorXd gradient(const ModelParams& p, const Workspace& ws, const PointState& st);

// Filter-block gradient via the gate factorization: with S the gate matrix,
// lifted residuals rbar_(i,j) = f(x_i) - y_i and G = (1/nJ) (rbar v^T) ⊙ S,
// returns G^T P. Equals the w-block of gradient() up to summation order.
Eigen::MatrixXd gradient_factorized(const ModelParams& p, const ReceptiveFields& fields,
                                    const Dataset& data);
Eigen::MatrixXd gradient_factorized(const ModelParams& p, const Workspace& ws);

// Hessian-vector product (T + R)·dir without forming the Hessian.
//   T·dir = (1/n) sum_i grad f(x_i) (grad f(x_i) . dir)       (Gram part)
//   R·dir = (1/n) sum_i r_i (per-sample predictor Hessian)·dir
// The per-sample predictor Hessian has only mixed blocks: d2f/dw_k dv_k =
// (1/J) sum_j gate·pi_j(x_i) and d2f/db_k dv_k = -(1/J) sum_j gate (the
// minus mirrors df/db_k = -(1/J) sum_j gate·v_k).
Eigen::VectorXd hvp(const ModelParams& p, const ReceptiveFields& fields,
                    const Dataset& data, const Eigen::Ref<const Eigen::VectorXd>& dir);
Eigen::VectorXd hvp(const ModelParams& p, const Workspace& ws, const PointState& st,
                    const Eigen::Ref<const Eigen::VectorXd>& dir,
                    bool include_residual_term = true);

// Explicit dense Hessian (independent per-sample assembly; test oracle).
// Refuses parameter counts above 5000.
Eigen::MatrixXd dense_hessian(const ModelParams& p, const ReceptiveFields& fields,
                              const Dataset& data);

// --- top eigenvalues -------------------------------------------------------

struct EigResult {
  double value = 0.0;
  bool converged = false;
  int iters = 0;
  Eigen::VectorXd vector;  // final iterate (unit norm)
};

// Largest algebraic eigenvalue of the loss Hessian by two-phase shifted power
// iteration on hvp: phase 1 estimates the dominant-magnitude eigenvalue mu;
// if mu < 0 phase 2 iterates on H + |mu| I and subtracts the shift. Converged
// when successive Rayleigh quotients differ by < tol*(1+|estimate|).
// warm_start (when given) seeds the iteration, which makes telemetry along a
// training trajectory cheap; otherwise the start vector is drawn from a
// counter-based stream keyed by `seed`.
EigResult sharpness(const ModelParams& p, const ReceptiveFields& fields, const Dataset& data,
                    double tol = 1e-8, int max_iter = 1000, std::uint64_t seed = 0,
                    const Eigen::VectorXd* warm_start = nullptr);
EigResult sharpness(const ModelParams& p, const Workspace& ws, const PointState& st,
                    double tol = 1e-8, int max_iter = 1000, std::uint64_t seed = 0,
                    const Eigen::VectorXd* warm_start = nullptr);

// Largest algebraic eigenvalue of an arbitrary symmetric operator, same
// two-phase scheme as sharpness. `op` must map R^dim to R^dim linearly and
// symmetrically.
EigResult top_eigenvalue(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& op,
                         int dim, double tol = 1e-8, int max_iter = 1000,
                         std::uint64_t seed = 0,
                         const Eigen::VectorXd* warm_start = nullptr);

// Top eigenvalue of the Gram part T alone (positive semidefinite, plain power
// iteration). Always >= 1: the pure-beta direction has quadratic form 1.
EigResult tangent_top_eig(const ModelParams& p, const ReceptiveFields& fields,
                          const Dataset& data, double tol = 1e-8, int max_iter = 1000,
                          std::uint64_t seed = 0);

// Minimum pre-activation margin min_{i,j,k} |w_k . pi_j(x_i) - b_k|; +inf for
// K = 0. Reported alongside sharpness values: the strict-gate derivative
// objects are one-sided at a kink, and a healthy margin certifies we are not
// on one.
double min_margin(const ModelParams& p, const ReceptiveFields& fields, const Dataset& data);
double min_margin(const ModelParams& p, const Workspace& ws);

}  // namespace eoslab
