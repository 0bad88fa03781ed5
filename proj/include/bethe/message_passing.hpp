#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "bethe/free_energy.hpp"
#include "bethe/gmrf.hpp"

namespace bethe {

// Canonical message parameters (eta_ij, lambda_ij) over directed edges in
// DirectedEdgeIndex order.
struct MessageState {
    Eigen::VectorXd eta;
    Eigen::VectorXd lambda;
};

struct BpOptions {
    double alpha = 1.0;     // uniform fractional parameter
    double epsilon = 1.0;   // damping in (0, 1]
    double tol = 1e-10;     // convergence threshold on max message change
    int max_iters = 10000;  // Jacobi sweeps
};

enum class BpStatus { Converged, MaxIters, NonNormalizable, Diverged };

const char* to_string(BpStatus status);

struct BpTraceRow {
    int iter = 0;
    double max_delta_eta = 0.0;
    double max_delta_lambda = 0.0;
    bool normalizable = false;
    std::optional<double> f_alpha_c;  // constrained energy at reconstructed (m, v)
};

// Local pair-marginal parameters per edge, without moment-matching enforced:
// v_local[d] and m_local[d] are the variance/mean of the target node of
// directed edge d inside that edge's pair marginal; v_cross is per undirected
// edge.
struct PairMarginals {
    Eigen::VectorXd v_local;
    Eigen::VectorXd m_local;
    Eigen::VectorXd v_cross;
};

struct BpResult {
    BpStatus status = BpStatus::MaxIters;
    int iterations = 0;
    MessageState state;
    std::optional<PairMarginals> pair_marginals;  // when reconstructable at the final state
    std::optional<MomentMarginals> marginals;
    std::vector<BpTraceRow> trace;
    std::string detail;
};

// Zero message state, verified: every edge's initial 2x2 precision block must
// have positive determinant, i.e. gamma_ij^i gamma_ij^j > R_ij^2. Offending
// edges are reported in the error message.
MessageState init_messages(const GmrfModel& model, const EdgePartition& partition,
                           double alpha);

// One synchronous (Jacobi) damped sweep of the fractional updates. Throws
// ZeroDenominator (|denominator| <= 1e-14, edge identified) or NonFinite.
MessageState sweep(const GmrfModel& model, const EdgePartition& partition,
                   const MessageState& state, const BpOptions& options);

// Iterates sweeps from the zero state until the max message change drops
// below tol, the iteration cap, or divergence (non-finite values or
// |lambda|_inf > 1e12). Intermediate non-normalizable marginals do not abort;
// a message-converged final state that is not normalizable yields
// NonNormalizable. Note the zero state itself is used unchecked here: the
// init_messages normalizability guarantee is not required for the iteration.
BpResult run(const GmrfModel& model, const EdgePartition& partition, const BpOptions& options);

// Inverts each edge's Eq.-(18)-style precision block. Throws
// NonNormalizablePair if some block is not positive definite.
PairMarginals marginals_from_messages(const GmrfModel& model, const EdgePartition& partition,
                                      const MessageState& state, double alpha);

// Node marginals taken from the lexicographically smallest incident edge.
MomentMarginals to_moment_marginals(const GmrfModel& model, const PairMarginals& pm);

// Max over nodes and incident edge pairs of |v_ij^i - v_ik^i|, combined with
// the analogous mean discrepancy. Zero at moment-matched fixed points.
double moment_match_residual(const GmrfModel& model, const PairMarginals& pm);

// Per-directed-edge update denominators alpha gamma_ij^j + sum lambda_jk +
// (1-alpha) lambda_ji at the given state (the moment-map vector y).
Eigen::VectorXd update_denominators(const GmrfModel& model, const EdgePartition& partition,
                                    const MessageState& state, double alpha);

// CSV: iter,max_delta_eta,max_delta_lambda,f_alpha_c,normalizable
void write_trace_csv(std::ostream& out, const BpResult& result);

}  // namespace bethe
