#include "bethe/stability.hpp"

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

namespace bethe {

namespace {

void check_guard(const GmrfModel& model, int n_guard, const char* who) {
    if (model.n > n_guard)
        throw TooLargeError(std::string(who) + ": n = " + std::to_string(model.n) +
                            " exceeds dense guard " + std::to_string(n_guard));
}

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

struct SpectrumSummary {
    double radius = 0.0;
    double max_real = 0.0;
};

SpectrumSummary dense_spectrum(const Eigen::MatrixXd& m) {
    SpectrumSummary out;
    if (m.rows() == 0) return out;
    Eigen::EigenSolver<Eigen::MatrixXd> es(m, /*computeEigenvectors=*/false);
    for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) {
        out.radius = std::max(out.radius, std::abs(es.eigenvalues()[k]));
        out.max_real = std::max(out.max_real, es.eigenvalues()[k].real());
    }
    return out;
}

void check_normalizable(const GmrfModel& model, const MomentMarginals& marginals) {
    if (marginals.v.size() != model.n || marginals.v_edge.size() != model.edge_count())
        throw DimensionMismatchError("marginals do not match the model");
    for (int i = 0; i < model.n; ++i)
        if (!(marginals.v[i] > 0.0))
            throw NonpositiveVarianceError("v[" + std::to_string(i) + "] <= 0");
    for (int e = 0; e < model.edge_count(); ++e) {
        const double vv = marginals.v[model.edges[e].i] * marginals.v[model.edges[e].j];
        if (!(marginals.v_edge[e] * marginals.v_edge[e] < vv))
            throw NonNormalizablePairError("v_ij^2 >= v_i v_j on edge " + std::to_string(e));
    }
}

// Full Hessian of f_alpha over (m; v_edge; v), the block structure behind the
// Schur complement. Entries are the second derivatives of the moment-space
// energy; the v_edge block is diagonal.
Eigen::MatrixXd full_hessian(const GmrfModel& model, const MomentMarginals& marginals,
                             const AlphaAssignment& alpha) {
    const int n = model.n;
    const int ne = model.edge_count();
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n + ne + n, n + ne + n);
    h.topLeftCorner(n, n) = model.q_dense();
    for (int i = 0; i < n; ++i)
        h(n + ne + i, n + ne + i) = 0.5 / (marginals.v[i] * marginals.v[i]);
    for (int e = 0; e < ne; ++e) {
        const int i = model.edges[e].i;
        const int j = model.edges[e].j;
        const double a = alpha.values[e];
        const double w = marginals.v_edge[e];
        const double vi = marginals.v[i];
        const double vj = marginals.v[j];
        const double p = vi * vj - w * w;
        h(n + e, n + e) = (vi * vj + w * w) / (a * p * p);
        h(n + e, n + ne + i) = h(n + ne + i, n + e) = -vj * w / (a * p * p);
        h(n + e, n + ne + j) = h(n + ne + j, n + e) = -vi * w / (a * p * p);
        h(n + ne + i, n + ne + j) += w * w / (2.0 * a * p * p);
        h(n + ne + j, n + ne + i) += w * w / (2.0 * a * p * p);
        h(n + ne + i, n + ne + i) += 0.5 / a * (vj * vj / (p * p) - 1.0 / (vi * vi));
        h(n + ne + j, n + ne + j) += 0.5 / a * (vi * vi / (p * p) - 1.0 / (vj * vj));
    }
    return h;
}

}  // namespace

EdgeAdjacency edge_adjacency(const GmrfModel& model, double alpha) {
    const DirectedEdgeIndex idx(model);
    std::vector<Eigen::Triplet<double>> trip;
    for (int d = 0; d < idx.size(); ++d) {
        const auto [a, b] = idx.pair_of(d);
        for (const IncidentEdge& inc : model.adjacency[b]) {
            if (inc.neighbor == a) {
                if (alpha != 1.0) trip.emplace_back(d, idx.index(b, a), 1.0 - alpha);
            } else {
                trip.emplace_back(d, idx.index(b, inc.neighbor), 1.0);
            }
        }
    }
    EdgeAdjacency m(idx.size(), idx.size());
    m.setFromTriplets(trip.begin(), trip.end());
    return m;
}

StabilityReport jacobian_spectra(const GmrfModel& model, const PairMarginals& fixed_point,
                                 double alpha, double moment_gate, int n_guard) {
    check_guard(model, n_guard, "jacobian_spectra");
    if (!(alpha > 0.0)) throw NonpositiveAlphaError("jacobian_spectra: alpha <= 0");
    const double residual = moment_match_residual(model, fixed_point);
    if (!(residual <= moment_gate))
        throw NotAFixedPointError("jacobian_spectra: moment-match residual " +
                                  std::to_string(residual) + " above gate " +
                                  std::to_string(moment_gate));

    const MomentMarginals mm = to_moment_marginals(model, fixed_point);
    const int ne = model.edge_count();
    Eigen::VectorXd c(2 * ne);
    Eigen::VectorXd star(ne);
    for (int e = 0; e < ne; ++e) {
        const double vi = mm.v[model.edges[e].i];
        const double vj = mm.v[model.edges[e].j];
        star[e] = pair_covariance_star(alpha, model.r[e], vi, vj);
        c[2 * e] = c[2 * e + 1] = star[e] / std::sqrt(vi * vj);
    }

    const Eigen::MatrixXd m_alpha = Eigen::MatrixXd(edge_adjacency(model, alpha));
    const Eigen::MatrixXd j_eta = (-1.0 / alpha) * c.asDiagonal() * m_alpha;
    const Eigen::MatrixXd j_lambda =
        (1.0 / alpha) * c.cwiseProduct(c).asDiagonal() * m_alpha;

    StabilityReport report;
    const SpectrumSummary se = dense_spectrum(j_eta);
    const SpectrumSummary sl = dense_spectrum(j_lambda);
    report.rho_eta = se.radius;
    report.rho_lambda = sl.radius;
    report.details.eta_max_real = se.max_real;
    report.details.lambda_max_real = sl.max_real;
    report.stable =
        report.rho_lambda < 1.0 && (report.rho_eta < 1.0 || model.h_is_zero());

    MomentMarginals at_star = mm;
    at_star.v_edge = star;
    const Eigen::MatrixXd schur =
        hessian_schur(model, at_star, AlphaAssignment::uniform(model, alpha));
    Eigen::LLT<Eigen::MatrixXd> llt(schur);
    report.hessian_pd = llt.info() == Eigen::Success;
    return report;
}

std::pair<double, double> det_identity_check(const GmrfModel& model, const Eigen::VectorXd& w,
                                             double alpha, int n_guard) {
    check_guard(model, n_guard, "det_identity_check");
    if (!(alpha > 0.0)) throw NonpositiveAlphaError("det_identity_check: alpha <= 0");
    const int ne = model.edge_count();
    if (w.size() != 2 * ne)
        throw DimensionMismatchError("det_identity_check: w must have one entry per directed edge");
    for (int e = 0; e < ne; ++e) {
        const double p = w[2 * e] * w[2 * e + 1];
        if (std::abs(1.0 - p) < 1e-14)
            throw DegenerateEdgeError("det_identity_check: w_ij w_ji = 1 on edge " +
                                      std::to_string(e));
    }

    const Eigen::MatrixXd m_alpha = Eigen::MatrixXd(edge_adjacency(model, alpha));
    const Eigen::MatrixXd lhs_mat = Eigen::MatrixXd::Identity(2 * ne, 2 * ne) -
                                    (1.0 / alpha) * w.asDiagonal() * m_alpha;
    const double lhs = lhs_mat.determinant();

    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(model.n, model.n);
    double prod = 1.0;
    for (int e = 0; e < ne; ++e) {
        const int i = model.edges[e].i;
        const int j = model.edges[e].j;
        const double wij = w[2 * e];
        const double wji = w[2 * e + 1];
        const double d = 1.0 - wij * wji;
        a(i, i) += wij * wji / d;
        a(j, j) += wij * wji / d;
        a(i, j) = -wij / d;
        a(j, i) = -wji / d;
        prod *= d;
    }
    const double rhs =
        (Eigen::MatrixXd::Identity(model.n, model.n) + a / alpha).determinant() * prod;
    return {lhs, rhs};
}

Eigen::MatrixXd hessian_schur(const GmrfModel& model, const MomentMarginals& marginals,
                              const AlphaAssignment& alpha) {
    alpha.validate(model);
    check_normalizable(model, marginals);
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(model.n, model.n);
    for (int i = 0; i < model.n; ++i)
        h(i, i) = 0.5 / (marginals.v[i] * marginals.v[i]);
    for (int e = 0; e < model.edge_count(); ++e) {
        const int i = model.edges[e].i;
        const int j = model.edges[e].j;
        const double a = alpha.values[e];
        const double vi = marginals.v[i];
        const double vj = marginals.v[j];
        const double c2 = marginals.v_edge[e] * marginals.v_edge[e] / (vi * vj);
        const double c4 = c2 * c2;
        h(i, i) += 0.5 / (vi * vi) / a * c4 / (1.0 - c4);
        h(j, j) += 0.5 / (vj * vj) / a * c4 / (1.0 - c4);
        const double off = -0.5 / (vi * vj) / a * c2 / (1.0 - c4);
        h(i, j) = h(j, i) = off;
    }
    return h;
}

std::pair<double, double> hessian_det_identity(const GmrfModel& model,
                                               const MomentMarginals& marginals, double alpha,
                                               int n_guard) {
    check_guard(model, n_guard, "hessian_det_identity");
    if (!(alpha > 0.0)) throw NonpositiveAlphaError("hessian_det_identity: alpha <= 0");
    check_normalizable(model, marginals);
    const int ne = model.edge_count();

    Eigen::VectorXd c2(2 * ne);
    for (int e = 0; e < ne; ++e) {
        const double vv = marginals.v[model.edges[e].i] * marginals.v[model.edges[e].j];
        const double c = marginals.v_edge[e] * marginals.v_edge[e] / vv;
        c2[2 * e] = c2[2 * e + 1] = c;
    }
    const Eigen::MatrixXd m_alpha = Eigen::MatrixXd(edge_adjacency(model, alpha));
    const double lhs = (Eigen::MatrixXd::Identity(2 * ne, 2 * ne) -
                        (1.0 / alpha) * c2.asDiagonal() * m_alpha)
                           .determinant();

    double f = std::pow(2.0, model.n) * std::pow(alpha, ne) / model.q_dense().determinant();
    for (int i = 0; i < model.n; ++i) f *= marginals.v[i] * marginals.v[i];
    for (int e = 0; e < ne; ++e) {
        const double vv = marginals.v[model.edges[e].i] * marginals.v[model.edges[e].j];
        const double w2 = marginals.v_edge[e] * marginals.v_edge[e];
        const double p = vv - w2;
        f *= p * p / (vv + w2) * (1.0 - (w2 / vv) * (w2 / vv));
    }
    const double rhs =
        f * full_hessian(model, marginals, AlphaAssignment::uniform(model, alpha)).determinant();
    return {lhs, rhs};
}

const char* to_string(MinimumVerdict verdict) {
    switch (verdict) {
        case MinimumVerdict::Minimum: return "Minimum";
        case MinimumVerdict::SaddleOrMax: return "SaddleOrMax";
        case MinimumVerdict::Indeterminate: return "Indeterminate";
    }
    return "?";
}

MinimumVerdict is_local_minimum(const GmrfModel& model, const MomentMarginals& marginals,
                                const AlphaAssignment& alpha, double stationarity_gate) {
    const MomentGradient grad = grad_f_alpha_moments(model, marginals, alpha);
    double gmax = grad.v.size() ? grad.v.lpNorm<Eigen::Infinity>() : 0.0;
    if (grad.v_edge.size()) gmax = std::max(gmax, grad.v_edge.lpNorm<Eigen::Infinity>());
    if (!(gmax <= stationarity_gate))
        throw NotStationaryError("is_local_minimum: gradient norm " + std::to_string(gmax) +
                                 " above gate " + std::to_string(stationarity_gate));
    const Eigen::MatrixXd schur = hessian_schur(model, marginals, alpha);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(schur, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    if (lo > 1e-10 * scale) return MinimumVerdict::Minimum;
    if (lo < -1e-10 * scale) return MinimumVerdict::SaddleOrMax;
    return MinimumVerdict::Indeterminate;
}

double m_alpha_singularity(const GmrfModel& model, double alpha, int n_guard) {
    check_guard(model, n_guard, "m_alpha_singularity");
    const Eigen::MatrixXd m_alpha = Eigen::MatrixXd(edge_adjacency(model, alpha));
    if (m_alpha.rows() == 0) return 0.0;
    Eigen::BDCSVD<Eigen::MatrixXd> svd(m_alpha);
    return svd.singularValues().minCoeff();
}

double gershgorin_bound(const GmrfModel& model, const Eigen::VectorXd& vhat_directed,
                        double alpha) {
    if (!(alpha > 0.0)) throw NonpositiveAlphaError("gershgorin_bound: alpha <= 0");
    const int ne = model.edge_count();
    if (vhat_directed.size() != 2 * ne)
        throw DimensionMismatchError("gershgorin_bound: vhat must have one entry per directed edge");
    for (Eigen::Index d = 0; d < vhat_directed.size(); ++d)
        if (!(vhat_directed[d] > 0.0))
            throw NonpositiveVarianceError("gershgorin_bound: vhat <= 0");
    const DirectedEdgeIndex idx(model);
    double bound = 0.0;
    for (int d = 0; d < idx.size(); ++d) {
        const int e = idx.undirected(d);
        const int rev = DirectedEdgeIndex::reverse(d);
        const double vi = vhat_directed[d];
        const double vj = vhat_directed[rev];
        const double c =
            std::abs(pair_covariance_star(alpha, model.r[e], vi, vj)) / std::sqrt(vi * vj);
        const int n_j = model.degrees[idx.source(d)];
        bound = std::max(bound, c / alpha * ((n_j - 1) + std::abs(1.0 - alpha)));
    }
    return bound;
}

void write_stability_csv(std::ostream& out, const StabilityReport& report, double sigma_min_m) {
    out << "rho_eta,rho_lambda,stable,hessian_pd,sigma_min_M\n";
    out << fmt(report.rho_eta) << "," << fmt(report.rho_lambda) << ","
        << (report.stable ? 1 : 0) << "," << (report.hessian_pd ? 1 : 0) << ","
        << fmt(sigma_min_m) << "\n";
}

}  // namespace bethe
