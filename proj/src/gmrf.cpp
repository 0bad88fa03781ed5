#include "bethe/gmrf.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/SparseCholesky>

#include "bethe/rng.hpp"

namespace bethe {

namespace {

std::string edge_name(int i, int j) {
    return "(" + std::to_string(i) + "," + std::to_string(j) + ")";
}

GmrfModel finalize_model(int n, Eigen::VectorXd h, std::vector<Edge> edges,
                         Eigen::VectorXd r) {
    GmrfModel model;
    model.n = n;
    model.h = std::move(h);
    model.edges = std::move(edges);
    model.r = std::move(r);
    model.degrees.assign(n, 0);
    model.adjacency.assign(n, {});
    for (int e = 0; e < model.edge_count(); ++e) {
        const Edge& ed = model.edges[e];
        model.adjacency[ed.i].push_back({ed.j, e});
        model.adjacency[ed.j].push_back({ed.i, e});
    }
    for (int i = 0; i < n; ++i) {
        auto& inc = model.adjacency[i];
        std::sort(inc.begin(), inc.end(),
                  [](const IncidentEdge& a, const IncidentEdge& b) { return a.neighbor < b.neighbor; });
        model.degrees[i] = static_cast<int>(inc.size());
    }
    const auto comp = connected_components(model);
    model.connected = true;
    for (int c : comp)
        if (c != 0) model.connected = false;
    return model;
}

bool q_positive_definite(const GmrfModel& model) {
    Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt(model.q_sparse());
    return llt.info() == Eigen::Success;
}

// Power iteration on |R| + I restricted to one connected component.
// Returns (lambda_max of |R| on the component, component Perron vector,
// iterations, residual); throws NoConvergence at the iteration cap.
struct ComponentSpectral {
    double lambda = 0.0;
    Eigen::VectorXd u;  // full length, zero off component
    int iterations = 0;
    double residual = 0.0;
};

ComponentSpectral component_power_iteration(const GmrfModel& model,
                                            const std::vector<int>& comp, int comp_id,
                                            double tol, int max_iters_factor) {
    const int n = model.n;
    int comp_size = 0;
    for (int c : comp)
        if (c == comp_id) ++comp_size;

    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i)
        if (comp[i] == comp_id) x[i] = 1.0;
    x /= x.norm();

    auto matvec_abs_r = [&](const Eigen::VectorXd& in) {
        Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
        for (int e = 0; e < model.edge_count(); ++e) {
            const Edge& ed = model.edges[e];
            if (comp[ed.i] != comp_id) continue;
            const double a = std::abs(model.r[e]);
            out[ed.i] += a * in[ed.j];
            out[ed.j] += a * in[ed.i];
        }
        return out;
    };

    const int cap = max_iters_factor * std::max(comp_size, 1);
    double lambda = 0.0;
    double residual = 0.0;
    for (int it = 1; it <= cap; ++it) {
        Eigen::VectorXd y = matvec_abs_r(x);
        lambda = x.dot(y);  // Rayleigh quotient, x normalized
        residual = (y - lambda * x).lpNorm<Eigen::Infinity>();
        if (residual <= tol) {
            ComponentSpectral out;
            out.lambda = lambda;
            out.u = x;
            out.iterations = it;
            out.residual = residual;
            return out;
        }
        y += x;  // shift: iterate on |R| + I
        x = y / y.norm();
    }
    throw NoConvergenceError("spectral_analysis: power iteration cap " +
                             std::to_string(cap) + " hit, residual " +
                             std::to_string(residual));
}

}  // namespace

bool GmrfModel::h_is_zero() const {
    return h.size() == 0 || h.lpNorm<Eigen::Infinity>() == 0.0;
}

Eigen::SparseMatrix<double> GmrfModel::q_sparse() const {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(n) + 2 * edges.size());
    for (int i = 0; i < n; ++i) trip.emplace_back(i, i, 1.0);
    for (int e = 0; e < edge_count(); ++e) {
        trip.emplace_back(edges[e].i, edges[e].j, r[e]);
        trip.emplace_back(edges[e].j, edges[e].i, r[e]);
    }
    Eigen::SparseMatrix<double> q(n, n);
    q.setFromTriplets(trip.begin(), trip.end());
    return q;
}

Eigen::MatrixXd GmrfModel::q_dense() const {
    Eigen::MatrixXd q = Eigen::MatrixXd::Identity(n, n);
    for (int e = 0; e < edge_count(); ++e) {
        q(edges[e].i, edges[e].j) = r[e];
        q(edges[e].j, edges[e].i) = r[e];
    }
    return q;
}

Eigen::MatrixXd GmrfModel::abs_r_dense() const {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (int e = 0; e < edge_count(); ++e) {
        a(edges[e].i, edges[e].j) = std::abs(r[e]);
        a(edges[e].j, edges[e].i) = std::abs(r[e]);
    }
    return a;
}

DirectedEdgeIndex::DirectedEdgeIndex(const GmrfModel& model) : n_(model.n) {
    pairs_.reserve(2 * model.edges.size());
    position_.reserve(2 * model.edges.size());
    for (int e = 0; e < model.edge_count(); ++e) {
        const Edge& ed = model.edges[e];
        pairs_.emplace_back(ed.i, ed.j);
        pairs_.emplace_back(ed.j, ed.i);
        position_[static_cast<std::int64_t>(ed.i) * n_ + ed.j] = 2 * e;
        position_[static_cast<std::int64_t>(ed.j) * n_ + ed.i] = 2 * e + 1;
    }
}

int DirectedEdgeIndex::index(int a, int b) const {
    const auto it = position_.find(static_cast<std::int64_t>(a) * n_ + b);
    if (it == position_.end())
        throw Error("DirectedEdgeIndex: " + edge_name(a, b) + " is not an edge");
    return it->second;
}

std::vector<int> connected_components(const GmrfModel& model) {
    std::vector<int> comp(model.n, -1);
    int next_id = 0;
    std::vector<int> stack;
    for (int s = 0; s < model.n; ++s) {
        if (comp[s] >= 0) continue;
        comp[s] = next_id;
        stack.push_back(s);
        while (!stack.empty()) {
            const int u = stack.back();
            stack.pop_back();
            for (const IncidentEdge& inc : model.adjacency[u]) {
                if (comp[inc.neighbor] < 0) {
                    comp[inc.neighbor] = next_id;
                    stack.push_back(inc.neighbor);
                }
            }
        }
        ++next_id;
    }
    return comp;
}

GmrfModel validate_model(const Eigen::VectorXd& h, const Eigen::SparseMatrix<double>& q) {
    if (q.rows() != q.cols())
        throw DimensionMismatchError("validate_model: Q is " + std::to_string(q.rows()) +
                                     "x" + std::to_string(q.cols()));
    const int n = static_cast<int>(q.rows());
    if (h.size() != n)
        throw DimensionMismatchError("validate_model: h has length " +
                                     std::to_string(h.size()) + ", Q is " +
                                     std::to_string(n) + "x" + std::to_string(n));

    // collect strictly-upper entries and diagonal; check symmetry as we go
    std::vector<Edge> edges;
    std::vector<double> rvals;
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
    Eigen::SparseMatrix<double> qc = q;
    qc.makeCompressed();
    Eigen::SparseMatrix<double> qt = Eigen::SparseMatrix<double>(qc.transpose());
    for (int k = 0; k < qc.outerSize(); ++k) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(qc, k); it; ++it) {
            if (it.row() == it.col()) {
                diag[it.row()] = it.value();
                continue;
            }
            const double mirrored = qt.coeff(it.row(), it.col());
            if (std::abs(it.value() - mirrored) > 1e-12 * std::max(1.0, std::abs(it.value())))
                throw NotSymmetricError("validate_model: Q(" + std::to_string(it.row()) + "," +
                                        std::to_string(it.col()) + ") != Q(" +
                                        std::to_string(it.col()) + "," + std::to_string(it.row()) + ")");
            if (it.row() < it.col() && it.value() != 0.0) {
                edges.push_back({static_cast<int>(it.row()), static_cast<int>(it.col())});
                rvals.push_back(it.value());
            }
        }
    }
    for (int i = 0; i < n; ++i)
        if (std::abs(diag[i] - 1.0) > 1e-12)
            throw NotUnitDiagonalError("validate_model: Q_ii = " + std::to_string(diag[i]) +
                                       " at node " + std::to_string(i) +
                                       "; rescale_to_unit_diagonal first");

    std::vector<int> order(edges.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = static_cast<int>(k);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return std::pair(edges[a].i, edges[a].j) < std::pair(edges[b].i, edges[b].j);
    });
    std::vector<Edge> sorted_edges(edges.size());
    Eigen::VectorXd r(static_cast<Eigen::Index>(edges.size()));
    for (std::size_t k = 0; k < order.size(); ++k) {
        sorted_edges[k] = edges[order[k]];
        r[static_cast<Eigen::Index>(k)] = rvals[order[k]];
    }

    GmrfModel model = finalize_model(n, h, std::move(sorted_edges), std::move(r));
    if (!q_positive_definite(model))
        throw NotPositiveDefiniteError("validate_model: Cholesky factorization failed");
    return model;
}

std::pair<GmrfModel, Eigen::VectorXd> rescale_to_unit_diagonal(
    const Eigen::VectorXd& h, const Eigen::SparseMatrix<double>& q) {
    if (q.rows() != q.cols() || h.size() != q.rows())
        throw DimensionMismatchError("rescale_to_unit_diagonal: dimension mismatch");
    const int n = static_cast<int>(q.rows());
    Eigen::VectorXd scale(n);
    for (int i = 0; i < n; ++i) {
        const double qii = q.coeff(i, i);
        if (!(qii > 0.0))
            throw NonpositiveDiagonalError("rescale_to_unit_diagonal: Q_ii = " +
                                           std::to_string(qii) + " at node " + std::to_string(i));
        scale[i] = std::sqrt(qii);
    }
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(q.nonZeros()));
    for (int k = 0; k < q.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(q, k); it; ++it) {
            double v = it.value() / (scale[it.row()] * scale[it.col()]);
            if (it.row() == it.col()) v = 1.0;  // exact unit diagonal
            trip.emplace_back(it.row(), it.col(), v);
        }
    Eigen::SparseMatrix<double> qs(n, n);
    qs.setFromTriplets(trip.begin(), trip.end());
    Eigen::VectorXd hs = h.cwiseQuotient(scale);
    return {validate_model(hs, qs), scale};
}

MomentMarginals exact_marginals(const GmrfModel& model, int dense_guard) {
    if (model.n > dense_guard)
        throw TooLargeError("exact_marginals: n = " + std::to_string(model.n) +
                            " exceeds dense guard " + std::to_string(dense_guard));
    const Eigen::MatrixXd q = model.q_dense();
    Eigen::LLT<Eigen::MatrixXd> llt(q);
    if (llt.info() != Eigen::Success)
        throw NotPositiveDefiniteError("exact_marginals: Cholesky factorization failed");
    const Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(model.n, model.n));
    MomentMarginals mm;
    mm.m = llt.solve(model.h);
    mm.v = cov.diagonal();
    mm.v_edge.resize(model.edge_count());
    for (int e = 0; e < model.edge_count(); ++e)
        mm.v_edge[e] = cov(model.edges[e].i, model.edges[e].j);
    return mm;
}

SpectralReport spectral_analysis(const GmrfModel& model, double tol, int max_iters_factor) {
    if (!model.connected)
        throw NotConnectedError("spectral_analysis: model is not connected");
    const std::vector<int> comp(model.n, 0);
    ComponentSpectral cs = component_power_iteration(model, comp, 0, tol, max_iters_factor);
    SpectralReport report;
    report.lambda_max = cs.lambda;
    report.u_max = cs.u;
    report.iterations = cs.iterations;
    report.residual = cs.residual;
    return report;
}

EdgePartition partition_potentials(const GmrfModel& model, PartitionStrategy strategy,
                                   const SpectralReport& spectral) {
    const DirectedEdgeIndex idx(model);
    EdgePartition part;
    part.strategy = strategy;
    part.gamma.resize(idx.size());
    part.pre_normalization_sums.resize(model.n);

    if (strategy == PartitionStrategy::Symmetric) {
        for (int i = 0; i < model.n; ++i) {
            const auto& inc = model.adjacency[i];
            const int deg = static_cast<int>(inc.size());
            double partial = 0.0;
            for (int k = 0; k < deg; ++k) {
                // remainder on the last incident edge keeps the per-node sum exactly 1
                const double g = (k + 1 < deg) ? 1.0 / deg : 1.0 - partial;
                part.gamma[idx.index(i, inc[k].neighbor)] = g;
                partial += g;
            }
            part.pre_normalization_sums[i] = deg > 0 ? 1.0 : 0.0;
        }
        return part;
    }

    if (spectral.lambda_max > 1.0 + 1e-12)
        throw StrategyInapplicableError(
            "partition_potentials: pairwise_normalizable needs lambda_max <= 1, got " +
            std::to_string(spectral.lambda_max));
    for (int d = 0; d < idx.size(); ++d) {
        const auto [a, b] = idx.pair_of(d);
        const int e = idx.undirected(d);
        part.gamma[d] = std::abs(model.r[e]) * spectral.u_max[b] /
                        (spectral.lambda_max * spectral.u_max[a]);
    }
    for (int i = 0; i < model.n; ++i) {
        const auto& inc = model.adjacency[i];
        double sum = 0.0;
        for (const IncidentEdge& ie : inc) sum += part.gamma[idx.index(i, ie.neighbor)];
        part.pre_normalization_sums[i] = sum;
        double partial = 0.0;
        for (std::size_t k = 0; k < inc.size(); ++k) {
            const int d = idx.index(i, inc[k].neighbor);
            const double g = (k + 1 < inc.size()) ? part.gamma[d] / sum : 1.0 - partial;
            part.gamma[d] = g;
            partial += g;
        }
    }
    return part;
}

BoundednessClass classify_boundedness(const GmrfModel& model,
                                      const Eigen::VectorXd& alpha_per_edge,
                                      double lambda_tol) {
    if (alpha_per_edge.size() != model.edge_count())
        throw DimensionMismatchError("classify_boundedness: alpha has length " +
                                     std::to_string(alpha_per_edge.size()) + ", model has " +
                                     std::to_string(model.edge_count()) + " edges");
    for (int e = 0; e < model.edge_count(); ++e)
        if (!(alpha_per_edge[e] > 0.0))
            throw NonpositiveAlphaError("classify_boundedness: alpha <= 0 on edge " +
                                        edge_name(model.edges[e].i, model.edges[e].j));

    const std::vector<int> comp = connected_components(model);
    int ncomp = 0;
    for (int c : comp) ncomp = std::max(ncomp, c + 1);

    BoundednessClass out;
    std::vector<double> comp_lambda(ncomp, 0.0);
    for (int c = 0; c < ncomp; ++c) {
        ComponentSpectral cs = component_power_iteration(model, comp, c, 1e-12, 100);
        comp_lambda[c] = cs.lambda;
        out.lambda_max = std::max(out.lambda_max, cs.lambda);
    }

    bool any_boundary = false;
    bool boundary_bounded = true;
    double boundary_sum = 0.0;
    double boundary_threshold = 0.0;
    for (int c = 0; c < ncomp; ++c) {
        if (comp_lambda[c] > 1.0 + lambda_tol) {
            out.kind = Boundedness::UnboundedAll;
            return out;
        }
        if (comp_lambda[c] >= 1.0 - lambda_tol) {
            any_boundary = true;
            double s = 0.0;
            for (int e = 0; e < model.edge_count(); ++e)
                if (comp[model.edges[e].i] == c) s += 2.0 / alpha_per_edge[e];
            int nodes = 0;
            for (int cc : comp)
                if (cc == c) ++nodes;
            boundary_sum += s;
            boundary_threshold += 2.0 * nodes;
            if (s < 2.0 * nodes) boundary_bounded = false;
        }
    }
    if (any_boundary) {
        out.kind = Boundedness::Boundary;
        out.boundary_bounded = boundary_bounded;
        out.alpha_inverse_sum = boundary_sum;
        out.threshold = boundary_threshold;
    } else {
        out.kind = Boundedness::BoundedAll;
    }
    return out;
}

BoundednessClass classify_boundedness(const GmrfModel& model, double uniform_alpha,
                                      double lambda_tol) {
    return classify_boundedness(
        model, Eigen::VectorXd::Constant(model.edge_count(), uniform_alpha), lambda_tol);
}

GmrfModel generate_model(const GeneratorSpec& spec) {
    if (spec.n < 2) throw InvalidSpecError("generate_model: need n >= 2");
    if (!(spec.target_lambda_max > 0.0))
        throw InvalidSpecError("generate_model: target_lambda_max must be > 0");
    SplitMix64 rng(spec.seed);

    // random spanning tree via a random attachment order
    const int n = spec.n;
    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = i;
    for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.uniform_int(i + 1)]);
    std::vector<std::pair<int, int>> pairs;
    for (int k = 1; k < n; ++k) {
        const int a = perm[k];
        const int b = perm[rng.uniform_int(k)];
        pairs.emplace_back(std::min(a, b), std::max(a, b));
    }

    const long long all_pairs = static_cast<long long>(n) * (n - 1) / 2;
    const long long want = std::min<long long>(
        all_pairs, std::llround(spec.density * static_cast<double>(all_pairs)));
    std::sort(pairs.begin(), pairs.end());
    auto has_pair = [&](int a, int b) {
        return std::binary_search(pairs.begin(), pairs.end(), std::pair(a, b));
    };
    long long attempts = 0;
    while (static_cast<long long>(pairs.size()) < want && attempts < 200 * all_pairs) {
        ++attempts;
        const int a = rng.uniform_int(n);
        const int b = rng.uniform_int(n);
        if (a == b) continue;
        const auto p = std::pair(std::min(a, b), std::max(a, b));
        if (has_pair(p.first, p.second)) continue;
        pairs.insert(std::lower_bound(pairs.begin(), pairs.end(), p), p);
    }

    const int ne = static_cast<int>(pairs.size());
    std::vector<Edge> edges(ne);
    for (int e = 0; e < ne; ++e) edges[e] = {pairs[e].first, pairs[e].second};
    Eigen::VectorXd magnitude(ne);
    for (int e = 0; e < ne; ++e) magnitude[e] = rng.uniform(0.5, 1.5);
    Eigen::VectorXd h(n);
    for (int i = 0; i < n; ++i) h[i] = rng.normal();

    // lambda_max(|R|) is sign-independent, so one spectral run fixes the scale
    {
        GmrfModel probe = finalize_model(n, Eigen::VectorXd::Zero(n), edges, magnitude);
        const SpectralReport sr = spectral_analysis(probe);
        magnitude *= spec.target_lambda_max / sr.lambda_max;
    }

    const int retry_cap = 50;
    const int tries = (spec.sign_mode == SignMode::Mixed) ? retry_cap : 1;
    for (int attempt = 0; attempt < tries; ++attempt) {
        Eigen::VectorXd r = magnitude;
        if (spec.sign_mode == SignMode::Mixed)
            for (int e = 0; e < ne; ++e)
                if (rng.coin()) r[e] = -r[e];
        GmrfModel model = finalize_model(n, h, edges, std::move(r));
        if (q_positive_definite(model)) return model;
        if (spec.target_lambda_max < 1.0)
            throw Error("generate_model: internal error, Q must be positive definite below 1");
    }
    throw CannotSatisfyError("generate_model: no positive definite Q found at lambda_max " +
                             std::to_string(spec.target_lambda_max) + " after " +
                             std::to_string(tries) + " sign draws");
}

}  // namespace bethe
