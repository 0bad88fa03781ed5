#pragma once

#include <cstdint>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "bethe/errors.hpp"

namespace bethe {

struct Edge {
    int i = 0;  // i < j
    int j = 0;
    friend bool operator==(const Edge&, const Edge&) = default;
};

struct IncidentEdge {
    int neighbor = 0;
    int edge = 0;  // undirected edge id
};

// Canonical Gaussian model exp(h'x - x'Qx/2) with Q = I + R, unit diagonal,
// R zero-diagonal symmetric. The edge list is exactly the nonzero off-diagonal
// pattern of Q, sorted lexicographically with i < j. Immutable after
// construction; build through validate_model, generate_model or kregular.
struct GmrfModel {
    int n = 0;
    Eigen::VectorXd h;
    std::vector<Edge> edges;
    Eigen::VectorXd r;  // R_ij per edge, same order as `edges`
    std::vector<int> degrees;
    std::vector<std::vector<IncidentEdge>> adjacency;  // sorted by neighbor
    bool connected = false;

    int edge_count() const { return static_cast<int>(edges.size()); }
    bool h_is_zero() const;
    Eigen::SparseMatrix<double> q_sparse() const;
    Eigen::MatrixXd q_dense() const;
    Eigen::MatrixXd abs_r_dense() const;
};

// Directed-edge numbering. Undirected edge e = (i, j) with i < j yields
// directed index 2e for (i, j) -- the message into i from j -- and 2e + 1 for
// (j, i), so index(ij) + 1 == index(ji) and blocks follow the lexicographic
// order of the undirected list.
class DirectedEdgeIndex {
public:
    explicit DirectedEdgeIndex(const GmrfModel& model);

    int size() const { return static_cast<int>(pairs_.size()); }
    // position of the directed edge (a, b): the message into a from b
    int index(int a, int b) const;
    static int reverse(int d) { return d ^ 1; }
    int undirected(int d) const { return d >> 1; }
    int target(int d) const { return pairs_[d].first; }
    int source(int d) const { return pairs_[d].second; }
    const std::pair<int, int>& pair_of(int d) const { return pairs_[d]; }

private:
    std::vector<std::pair<int, int>> pairs_;
    std::unordered_map<std::int64_t, int> position_;
    int n_ = 0;
};

enum class PartitionStrategy { Symmetric, PairwiseNormalizable };

// Per-directed-edge weights gamma_ij^i splitting each node potential across
// its incident edges: gamma[d] with d = (a, b) is the weight of node a's
// potential on edge {a, b}. Per-node sums are exactly 1 and all entries are
// strictly positive.
struct EdgePartition {
    PartitionStrategy strategy = PartitionStrategy::Symmetric;
    Eigen::VectorXd gamma;                    // per directed edge
    Eigen::VectorXd pre_normalization_sums;   // per node, before renormalizing
};

struct SpectralReport {
    double lambda_max = 0.0;      // largest eigenvalue of |R|
    Eigen::VectorXd u_max;        // Perron vector, entrywise positive, unit 2-norm
    int iterations = 0;
    double residual = 0.0;        // || |R| u - lambda u ||_inf
};

enum class Boundedness { BoundedAll, UnboundedAll, Boundary };

struct BoundednessClass {
    Boundedness kind = Boundedness::BoundedAll;
    bool boundary_bounded = false;   // meaningful only for Boundary
    double lambda_max = 0.0;
    double alpha_inverse_sum = 0.0;  // sum over directed edges of boundary components
    double threshold = 0.0;          // 2n of the boundary components
};

// Moment parameterization: node means m, node variances v, edge covariances
// v_edge in the undirected edge order of the model.
struct MomentMarginals {
    Eigen::VectorXd m;
    Eigen::VectorXd v;
    Eigen::VectorXd v_edge;
};

enum class SignMode { AllPositive, Mixed };

struct GeneratorSpec {
    int n = 8;
    // fraction of all n(n-1)/2 pairs to realize as edges; a random spanning
    // tree is always included, so the effective minimum is n-1 edges
    double density = 0.3;
    double target_lambda_max = 0.9;
    SignMode sign_mode = SignMode::Mixed;
    std::uint64_t seed = 0;
};

// ---------------------------------------------------------------------------

// Checks symmetry, unit diagonal, positive definiteness (sparse Cholesky) and
// extracts the edge structure plus connectivity.
GmrfModel validate_model(const Eigen::VectorXd& h, const Eigen::SparseMatrix<double>& q);

// Q' = D^-1 Q D^-1 with D = diag(sqrt(Q_ii)), h' = D^-1 h. Marginals of the
// scaled model map back via m = m'/sqrt(Q_ii), v = v'/Q_ii. Returns the
// validated unit-diagonal model and the scale vector sqrt(Q_ii).
std::pair<GmrfModel, Eigen::VectorXd> rescale_to_unit_diagonal(
    const Eigen::VectorXd& h, const Eigen::SparseMatrix<double>& q);

// Dense exact inference: m = Q^-1 h, v_i = [Q^-1]_ii, v_ij = [Q^-1]_ij on
// edges. Guarded to keep the dense oracle honest about scope.
MomentMarginals exact_marginals(const GmrfModel& model, int dense_guard = 2000);

// Power iteration for the Perron pair of |R|. Runs on |R| + I (same
// eigenvectors, spectrum shifted by one) so that bipartite graphs, whose |R|
// spectrum is symmetric about zero, still converge; the residual is measured
// on |R| itself. Starts from the all-ones vector.
SpectralReport spectral_analysis(const GmrfModel& model, double tol = 1e-12,
                                 int max_iters_factor = 100);

// symmetric: gamma_ij^i = 1/n_i. pairwise_normalizable: gamma_ij^i =
// |R_ij| u_max^j / (lambda_max u_max^i), renormalized per node to sum exactly
// to 1 (pre-normalization sums are recorded); requires lambda_max <= 1.
EdgePartition partition_potentials(const GmrfModel& model, PartitionStrategy strategy,
                                   const SpectralReport& spectral);

// Boundedness of the fractional Bethe free energy. lambda_max < 1 - tol:
// bounded for all alpha; > 1 + tol: unbounded for all alpha; otherwise
// Boundary with bounded <=> sum_i sum_{j in di} 1/alpha_ij >= 2n, the double
// sum running over directed edges. Disconnected models are classified per
// connected component (unbounded if any component is).
BoundednessClass classify_boundedness(const GmrfModel& model,
                                      const Eigen::VectorXd& alpha_per_edge,
                                      double lambda_tol = 1e-9);
BoundednessClass classify_boundedness(const GmrfModel& model, double uniform_alpha,
                                      double lambda_tol = 1e-9);

// Random connected model: spanning tree plus density-driven extra edges,
// |R_ij| ~ U[0.5, 1.5] with signs per sign_mode, scaled so lambda_max(|R|)
// hits the target, h ~ N(0, 1). When the target is >= 1 the positive
// definiteness of Q is not automatic; signs are resampled up to 50 times
// before CannotSatisfy. Deterministic given the seed.
GmrfModel generate_model(const GeneratorSpec& spec);

// component id per node, ids dense from 0 in order of first appearance
std::vector<int> connected_components(const GmrfModel& model);

}  // namespace bethe
