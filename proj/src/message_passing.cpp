#include "bethe/message_passing.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

namespace bethe {

namespace {

constexpr double kDenominatorTol = 1e-14;
constexpr double kLambdaDivergenceCap = 1e12;

std::string edge_name(int a, int b) {
    return "(" + std::to_string(a) + "<-" + std::to_string(b) + ")";
}

void check_options(const BpOptions& options) {
    if (!(options.alpha > 0.0))
        throw NonpositiveAlphaError("BpOptions: alpha = " + std::to_string(options.alpha));
    if (!(options.epsilon > 0.0 && options.epsilon <= 1.0))
        throw Error("BpOptions: epsilon must be in (0, 1]");
    if (!(options.tol > 0.0) || options.max_iters < 1)
        throw Error("BpOptions: bad tol or max_iters");
}

void check_partition(const GmrfModel& model, const EdgePartition& partition) {
    if (partition.gamma.size() != 2 * model.edge_count())
        throw DimensionMismatchError("EdgePartition does not match the model");
}

// Flattened per-directed-edge incoming lists: for d = (a, b), the directed
// indices (b, k) with k in db \ a.
struct SweepPlan {
    DirectedEdgeIndex idx;
    std::vector<int> in_offsets;  // size m+1
    std::vector<int> in_edges;

    explicit SweepPlan(const GmrfModel& model) : idx(model) {
        const int m = idx.size();
        in_offsets.assign(m + 1, 0);
        for (int d = 0; d < m; ++d) {
            const auto [a, b] = idx.pair_of(d);
            in_offsets[d + 1] = in_offsets[d];
            for (const IncidentEdge& inc : model.adjacency[b]) {
                if (inc.neighbor == a) continue;
                in_edges.push_back(idx.index(b, inc.neighbor));
                ++in_offsets[d + 1];
            }
        }
    }
};

MessageState sweep_impl(const GmrfModel& model, const EdgePartition& partition,
                        const SweepPlan& plan, const MessageState& state,
                        const BpOptions& options) {
    const int m = plan.idx.size();
    const double alpha = options.alpha;
    const double eps = options.epsilon;
    MessageState next;
    next.eta.resize(m);
    next.lambda.resize(m);
    for (int d = 0; d < m; ++d) {
        const auto [a, b] = plan.idx.pair_of(d);
        const int e = plan.idx.undirected(d);
        const int rev = DirectedEdgeIndex::reverse(d);
        double den = alpha * partition.gamma[rev] + (1.0 - alpha) * state.lambda[rev];
        double num = alpha * partition.gamma[rev] * model.h[b] + (1.0 - alpha) * state.eta[rev];
        for (int k = plan.in_offsets[d]; k < plan.in_offsets[d + 1]; ++k) {
            den += state.lambda[plan.in_edges[k]];
            num += state.eta[plan.in_edges[k]];
        }
        if (std::abs(den) <= kDenominatorTol)
            throw ZeroDenominatorError("sweep: zero denominator on directed edge " +
                                       edge_name(a, b));
        const double r = model.r[e];
        next.lambda[d] =
            (1.0 - eps) * state.lambda[d] + eps * (partition.gamma[d] - alpha * r * r / den);
        next.eta[d] = (1.0 - eps) * state.eta[d] +
                      eps * (partition.gamma[d] * model.h[a] - r * num / den);
        if (!std::isfinite(next.lambda[d]) || !std::isfinite(next.eta[d]))
            throw NonFiniteError("sweep: non-finite update on directed edge " + edge_name(a, b));
    }
    return next;
}

Eigen::VectorXd denominators_impl(const GmrfModel& model, const EdgePartition& partition,
                                  const SweepPlan& plan, const MessageState& state,
                                  double alpha) {
    const int m = plan.idx.size();
    Eigen::VectorXd den(m);
    for (int d = 0; d < m; ++d) {
        const int rev = DirectedEdgeIndex::reverse(d);
        double s = alpha * partition.gamma[rev] + (1.0 - alpha) * state.lambda[rev];
        for (int k = plan.in_offsets[d]; k < plan.in_offsets[d + 1]; ++k)
            s += state.lambda[plan.in_edges[k]];
        den[d] = s;
    }
    (void)model;
    return den;
}

std::optional<PairMarginals> try_marginals(const GmrfModel& model, const EdgePartition& partition,
                                           const SweepPlan& plan, const MessageState& state,
                                           double alpha) {
    const int m = 2 * model.edge_count();
    const Eigen::VectorXd den = denominators_impl(model, partition, plan, state, alpha);
    Eigen::VectorXd num(m);
    for (int d = 0; d < m; ++d) {
        const auto [a, b] = plan.idx.pair_of(d);
        (void)a;
        const int rev = DirectedEdgeIndex::reverse(d);
        double s = alpha * partition.gamma[rev] * model.h[b] + (1.0 - alpha) * state.eta[rev];
        for (int k = plan.in_offsets[d]; k < plan.in_offsets[d + 1]; ++k)
            s += state.eta[plan.in_edges[k]];
        num[d] = s;
    }
    PairMarginals pm;
    pm.v_local.resize(m);
    pm.m_local.resize(m);
    pm.v_cross.resize(model.edge_count());
    for (int e = 0; e < model.edge_count(); ++e) {
        const int dij = 2 * e;      // (i, j): message into i
        const int dji = 2 * e + 1;  // (j, i)
        // precision block over (x_i, x_j): [[den_ji, aR], [aR, den_ij]]
        const double p_ii = den[dji];
        const double p_jj = den[dij];
        const double off = alpha * model.r[e];
        const double det = p_ii * p_jj - off * off;
        if (!(det > 0.0) || !(p_ii > 0.0)) return std::nullopt;
        const double b_i = num[dji];
        const double b_j = num[dij];
        pm.v_local[dij] = p_jj / det;
        pm.v_local[dji] = p_ii / det;
        pm.v_cross[e] = -off / det;
        pm.m_local[dij] = (p_jj * b_i - off * b_j) / det;
        pm.m_local[dji] = (p_ii * b_j - off * b_i) / det;
    }
    return pm;
}

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

}  // namespace

const char* to_string(BpStatus status) {
    switch (status) {
        case BpStatus::Converged: return "Converged";
        case BpStatus::MaxIters: return "MaxIters";
        case BpStatus::NonNormalizable: return "NonNormalizable";
        case BpStatus::Diverged: return "Diverged";
    }
    return "?";
}

MessageState init_messages(const GmrfModel& model, const EdgePartition& partition,
                           double alpha) {
    check_partition(model, partition);
    if (!(alpha > 0.0))
        throw NonpositiveAlphaError("init_messages: alpha = " + std::to_string(alpha));
    std::string offending;
    for (int e = 0; e < model.edge_count(); ++e) {
        const double gi = partition.gamma[2 * e];
        const double gj = partition.gamma[2 * e + 1];
        const double r = model.r[e];
        if (!(gi * gj > r * r)) {
            if (!offending.empty()) offending += ", ";
            offending += "(" + std::to_string(model.edges[e].i) + "," +
                         std::to_string(model.edges[e].j) + ")";
        }
    }
    if (!offending.empty())
        throw InitialNonNormalizableError(
            "init_messages: gamma_ij^i gamma_ij^j <= R_ij^2 on edges " + offending);
    MessageState state;
    state.eta = Eigen::VectorXd::Zero(2 * model.edge_count());
    state.lambda = Eigen::VectorXd::Zero(2 * model.edge_count());
    return state;
}

MessageState sweep(const GmrfModel& model, const EdgePartition& partition,
                   const MessageState& state, const BpOptions& options) {
    check_options(options);
    check_partition(model, partition);
    const SweepPlan plan(model);
    return sweep_impl(model, partition, plan, state, options);
}

BpResult run(const GmrfModel& model, const EdgePartition& partition, const BpOptions& options) {
    check_options(options);
    check_partition(model, partition);
    const SweepPlan plan(model);

    BpResult result;
    result.state.eta = Eigen::VectorXd::Zero(2 * model.edge_count());
    result.state.lambda = Eigen::VectorXd::Zero(2 * model.edge_count());
    result.trace.reserve(256);

    if (model.edge_count() == 0) {
        // Q = I: node potentials are the exact marginals
        result.status = BpStatus::Converged;
        result.iterations = 0;
        result.pair_marginals = PairMarginals{Eigen::VectorXd(0), Eigen::VectorXd(0),
                                              Eigen::VectorXd(0)};
        result.marginals = MomentMarginals{model.h, Eigen::VectorXd::Ones(model.n),
                                           Eigen::VectorXd(0)};
        return result;
    }

    for (int it = 1; it <= options.max_iters; ++it) {
        MessageState next;
        try {
            next = sweep_impl(model, partition, plan, result.state, options);
        } catch (const Error& err) {
            result.status = BpStatus::Diverged;
            result.iterations = it;
            result.detail = err.what();
            return result;
        }
        const double d_eta = (next.eta - result.state.eta).lpNorm<Eigen::Infinity>();
        const double d_lambda = (next.lambda - result.state.lambda).lpNorm<Eigen::Infinity>();
        result.state = std::move(next);
        result.iterations = it;

        if (result.state.lambda.lpNorm<Eigen::Infinity>() > kLambdaDivergenceCap) {
            result.status = BpStatus::Diverged;
            result.detail = "lambda magnitude exceeded divergence cap";
            return result;
        }

        auto pm = try_marginals(model, partition, plan, result.state, options.alpha);
        BpTraceRow row;
        row.iter = it;
        row.max_delta_eta = d_eta;
        row.max_delta_lambda = d_lambda;
        row.normalizable = pm.has_value();
        if (pm) {
            const MomentMarginals mm = to_moment_marginals(model, *pm);
            row.f_alpha_c = f_alpha_constrained(model, mm.m, mm.v,
                                                AlphaAssignment::uniform(model, options.alpha))
                                .value;
        }
        result.trace.push_back(row);

        if (std::max(d_eta, d_lambda) <= options.tol) {
            if (pm) {
                result.status = BpStatus::Converged;
                result.pair_marginals = std::move(pm);
                result.marginals = to_moment_marginals(model, *result.pair_marginals);
            } else {
                result.status = BpStatus::NonNormalizable;
                result.detail = "message change below tol but final marginals not normalizable";
            }
            return result;
        }
    }

    result.status = BpStatus::MaxIters;
    auto pm = try_marginals(model, partition, plan, result.state, options.alpha);
    if (pm) {
        result.pair_marginals = std::move(pm);
        result.marginals = to_moment_marginals(model, *result.pair_marginals);
    }
    return result;
}

PairMarginals marginals_from_messages(const GmrfModel& model, const EdgePartition& partition,
                                      const MessageState& state, double alpha) {
    check_partition(model, partition);
    const SweepPlan plan(model);
    auto pm = try_marginals(model, partition, plan, state, alpha);
    if (!pm)
        throw NonNormalizablePairError(
            "marginals_from_messages: some pair precision block is not positive definite");
    return *pm;
}

MomentMarginals to_moment_marginals(const GmrfModel& model, const PairMarginals& pm) {
    MomentMarginals mm;
    mm.m.resize(model.n);
    mm.v.resize(model.n);
    mm.v_edge = pm.v_cross;
    for (int i = 0; i < model.n; ++i) {
        int best = std::numeric_limits<int>::max();
        for (const IncidentEdge& inc : model.adjacency[i]) best = std::min(best, inc.edge);
        if (best == std::numeric_limits<int>::max())
            throw Error("to_moment_marginals: node " + std::to_string(i) + " has no edges");
        const int d = (model.edges[best].i == i) ? 2 * best : 2 * best + 1;
        mm.v[i] = pm.v_local[d];
        mm.m[i] = pm.m_local[d];
    }
    return mm;
}

double moment_match_residual(const GmrfModel& model, const PairMarginals& pm) {
    double res = 0.0;
    for (int i = 0; i < model.n; ++i) {
        double vmin = std::numeric_limits<double>::infinity(), vmax = -vmin;
        double mmin = vmin, mmax = -vmin;
        if (model.adjacency[i].size() < 2) continue;
        for (const IncidentEdge& inc : model.adjacency[i]) {
            const int d = (model.edges[inc.edge].i == i) ? 2 * inc.edge : 2 * inc.edge + 1;
            vmin = std::min(vmin, pm.v_local[d]);
            vmax = std::max(vmax, pm.v_local[d]);
            mmin = std::min(mmin, pm.m_local[d]);
            mmax = std::max(mmax, pm.m_local[d]);
        }
        res = std::max(res, vmax - vmin);
        res = std::max(res, mmax - mmin);
    }
    return res;
}

Eigen::VectorXd update_denominators(const GmrfModel& model, const EdgePartition& partition,
                                    const MessageState& state, double alpha) {
    check_partition(model, partition);
    const SweepPlan plan(model);
    return denominators_impl(model, partition, plan, state, alpha);
}

void write_trace_csv(std::ostream& out, const BpResult& result) {
    out << "iter,max_delta_eta,max_delta_lambda,f_alpha_c,normalizable\n";
    for (const BpTraceRow& row : result.trace) {
        out << row.iter << "," << fmt(row.max_delta_eta) << "," << fmt(row.max_delta_lambda)
            << ",";
        if (row.f_alpha_c) out << fmt(*row.f_alpha_c);
        out << "," << (row.normalizable ? 1 : 0) << "\n";
    }
}

}  // namespace bethe
