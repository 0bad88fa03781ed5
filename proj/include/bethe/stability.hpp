#pragma once

#include <ostream>
#include <utility>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "bethe/free_energy.hpp"
#include "bethe/gmrf.hpp"
#include "bethe/message_passing.hpp"

namespace bethe {

// Directed-edge adjacency M(alpha): entry (ij, jk) = 1 for k in dj \ i and
// (ij, ji) = 1 - alpha. The (ij, ji) entry takes the 1 - alpha branch, the
// coefficient the lambda update actually applies to the reverse message. Each
// row sums to n_j - alpha.
using EdgeAdjacency = Eigen::SparseMatrix<double>;

EdgeAdjacency edge_adjacency(const GmrfModel& model, double alpha);

struct StabilityDetails {
    double eta_max_real = 0.0;     // largest real part over the eta spectrum
    double lambda_max_real = 0.0;  // largest real part over the lambda spectrum
};

struct StabilityReport {
    double rho_eta = 0.0;
    double rho_lambda = 0.0;
    // Stability of the realized iteration. For models with h = 0 the eta
    // subsystem carries no dynamics (eta stays identically zero), so only
    // rho_lambda enters; otherwise both radii must be below 1.
    bool stable = false;
    bool hessian_pd = false;
    StabilityDetails details;
};

// Builds the similarity-transformed Jacobians
//   J_eta    ~ -(1/alpha) diag(v_ij / sqrt(v_i v_j)) M(alpha)
//   J_lambda ~  (1/alpha) diag(v_ij^2 / (v_i v_j))   M(alpha)
// with v_ij = pair_covariance_star(alpha, R_ij, v_i, v_j) and node variances
// taken from the moment-matched pair marginals (gate: moment_match_residual
// <= gate, else NotAFixedPoint). Dense eigensolve; n is guarded.
StabilityReport jacobian_spectra(const GmrfModel& model, const PairMarginals& fixed_point,
                                 double alpha, double moment_gate = 1e-6, int n_guard = 500);

// det(I - diag(w) M(alpha)/alpha) versus
// det(I_n + A(w)/alpha) * prod_{i~j} (1 - w_ij w_ji), the product over
// unordered pairs. Returns (lhs, rhs).
std::pair<double, double> det_identity_check(const GmrfModel& model, const Eigen::VectorXd& w,
                                             double alpha, int n_guard = 500);

// Schur complement of the free-energy Hessian over the node variances, with
// c_ij = v_ij / sqrt(v_i v_j):
//   H_ii = (1 + sum_j c^4/(1-c^4)/a) / (2 v_i^2)
//   H_ij = -c^2/(1-c^4)/a / (2 v_i v_j) on edges.
// v_edge is unconstrained input, not necessarily the inner minimizer.
Eigen::MatrixXd hessian_schur(const GmrfModel& model, const MomentMarginals& marginals,
                              const AlphaAssignment& alpha);

// lhs = det(I - diag(c(V)^2) M(alpha)/alpha); rhs = f(V) det(H[F_alpha](V))
// with the full Hessian over (m, v_edge, v) and
//   f(V) = 2^n alpha^|E| det(Q)^-1 prod v_k^2
//          prod_e (v_i v_j - v_ij^2)^2/(v_i v_j + v_ij^2) (1 - v_ij^4/(v_i v_j)^2),
// |E| counting undirected edges.
std::pair<double, double> hessian_det_identity(const GmrfModel& model,
                                               const MomentMarginals& marginals, double alpha,
                                               int n_guard = 500);

enum class MinimumVerdict { Minimum, SaddleOrMax, Indeterminate };

const char* to_string(MinimumVerdict verdict);

// Positive definiteness of the Schur complement certifies the full Hessian
// (the other blocks are positive definite by construction). Gated on
// stationarity of the moment gradient.
MinimumVerdict is_local_minimum(const GmrfModel& model, const MomentMarginals& marginals,
                                const AlphaAssignment& alpha, double stationarity_gate = 1e-6);

// Smallest singular value of M(alpha), dense decomposition under the n-guard.
double m_alpha_singularity(const GmrfModel& model, double alpha, int n_guard = 500);

// max over directed edges ij of c_ij((n_j - 1) + |1 - alpha|)/alpha with the
// local-correlation magnitude c_ij = |v*(alpha, vhat_ij, vhat_ji)| /
// sqrt(vhat_ij vhat_ji); upper-bounds both Jacobian spectral radii built from
// the same local variances.
double gershgorin_bound(const GmrfModel& model, const Eigen::VectorXd& vhat_directed,
                        double alpha);

// CSV: rho_eta,rho_lambda,stable,hessian_pd,sigma_min_M
void write_stability_csv(std::ostream& out, const StabilityReport& report, double sigma_min_m);

}  // namespace bethe
