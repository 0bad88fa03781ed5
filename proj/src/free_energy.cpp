#include "bethe/free_energy.hpp"

#include <cmath>
#include <string>

#include <Eigen/Cholesky>

namespace bethe {

namespace {

void check_positive_variances(const Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (!(v[i] > 0.0))
            throw NonpositiveVarianceError("v[" + std::to_string(i) +
                                           "] = " + std::to_string(v[i]));
}

void check_sizes(const GmrfModel& model, const Eigen::VectorXd& m, const Eigen::VectorXd& v) {
    if (m.size() != model.n || v.size() != model.n)
        throw DimensionMismatchError("m/v length does not match model size");
}

// -h'm + m'Qm/2 accumulated in edge-index order for reproducibility
double quadratic_part(const GmrfModel& model, const Eigen::VectorXd& m) {
    double mqm = m.squaredNorm();
    for (int e = 0; e < model.edge_count(); ++e)
        mqm += 2.0 * model.r[e] * m[model.edges[e].i] * m[model.edges[e].j];
    return -model.h.dot(m) + 0.5 * mqm;
}

}  // namespace

AlphaAssignment AlphaAssignment::uniform(const GmrfModel& model, double alpha) {
    if (!(alpha > 0.0))
        throw NonpositiveAlphaError("AlphaAssignment: alpha = " + std::to_string(alpha));
    return {Eigen::VectorXd::Constant(model.edge_count(), alpha)};
}

void AlphaAssignment::validate(const GmrfModel& model) const {
    if (values.size() != model.edge_count())
        throw DimensionMismatchError("AlphaAssignment: " + std::to_string(values.size()) +
                                     " entries for " + std::to_string(model.edge_count()) +
                                     " edges");
    for (Eigen::Index e = 0; e < values.size(); ++e)
        if (!(values[e] > 0.0))
            throw NonpositiveAlphaError("AlphaAssignment: alpha <= 0 on edge " +
                                        std::to_string(e));
}

EnergyValue f_mf(const GmrfModel& model, const Eigen::VectorXd& m, const Eigen::VectorXd& v) {
    check_sizes(model, m, v);
    check_positive_variances(v);
    EnergyValue out;
    out.components.quadratic = quadratic_part(model, m);
    out.components.trace = 0.5 * v.sum();  // Q_kk = 1
    double logsum = 0.0;
    for (int i = 0; i < model.n; ++i) logsum += std::log(v[i]);
    out.components.node_log = -0.5 * logsum;
    out.value = out.components.quadratic + out.components.trace + out.components.node_log;
    return out;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> mf_minimum(const GmrfModel& model) {
    Eigen::LLT<Eigen::MatrixXd> llt(model.q_dense());
    if (llt.info() != Eigen::Success)
        throw NotPositiveDefiniteError("mf_minimum: factorization failed");
    return {llt.solve(model.h), Eigen::VectorXd::Ones(model.n)};
}

double pair_covariance_star(double alpha, double r, double v_i, double v_j) {
    const double s = std::sqrt(1.0 + 4.0 * alpha * alpha * r * r * v_i * v_j);
    return -2.0 * alpha * r * v_i * v_j / (1.0 + s);
}

EnergyValue f_alpha(const GmrfModel& model, const MomentMarginals& marginals,
                    const AlphaAssignment& alpha) {
    check_sizes(model, marginals.m, marginals.v);
    check_positive_variances(marginals.v);
    alpha.validate(model);
    if (marginals.v_edge.size() != model.edge_count())
        throw DimensionMismatchError("f_alpha: v_edge length mismatch");

    EnergyValue out;
    out.components.quadratic = quadratic_part(model, marginals.m);
    double trace = 0.5 * marginals.v.sum();
    double edge_log = 0.0;
    for (int e = 0; e < model.edge_count(); ++e) {
        const int i = model.edges[e].i;
        const int j = model.edges[e].j;
        const double vv = marginals.v[i] * marginals.v[j];
        const double c2 = marginals.v_edge[e] * marginals.v_edge[e] / vv;
        if (!(c2 < 1.0))
            throw NonNormalizablePairError("f_alpha: v_ij^2 >= v_i v_j on edge (" +
                                           std::to_string(i) + "," + std::to_string(j) + ")");
        trace += model.r[e] * marginals.v_edge[e];
        edge_log -= 0.5 / alpha.values[e] * std::log1p(-c2);
    }
    out.components.trace = trace;
    out.components.edge_log = edge_log;
    double logsum = 0.0;
    for (int i = 0; i < model.n; ++i) logsum += std::log(marginals.v[i]);
    out.components.node_log = -0.5 * logsum;
    out.value = out.components.quadratic + out.components.trace + out.components.edge_log +
                out.components.node_log;
    return out;
}

EnergyValue f_alpha_constrained(const GmrfModel& model, const Eigen::VectorXd& m,
                                const Eigen::VectorXd& v, const AlphaAssignment& alpha) {
    check_sizes(model, m, v);
    check_positive_variances(v);
    alpha.validate(model);

    EnergyValue out;
    out.components.quadratic = quadratic_part(model, m);
    out.components.trace = 0.5 * v.sum();
    double edge_log = 0.0;
    for (int e = 0; e < model.edge_count(); ++e) {
        const double a = alpha.values[e];
        const double r = model.r[e];
        const double vv = v[model.edges[e].i] * v[model.edges[e].j];
        const double s = std::sqrt(1.0 + 4.0 * a * a * r * r * vv);
        // -(S-1)/(2a) and -log(2(S-1)/x)/(2a) with x = S^2-1, in stable form
        edge_log -= 2.0 * a * r * r * vv / (1.0 + s);
        edge_log += 0.5 / a * std::log1p(0.5 * (s - 1.0));
    }
    out.components.edge_log = edge_log;
    double logsum = 0.0;
    for (int i = 0; i < model.n; ++i) logsum += std::log(v[i]);
    out.components.node_log = -0.5 * logsum;
    out.value = out.components.quadratic + out.components.trace + out.components.edge_log +
                out.components.node_log;
    return out;
}

EnergyValue lower_bound(const GmrfModel& model, const Eigen::VectorXd& m,
                        const Eigen::VectorXd& v) {
    EnergyValue out = f_mf(model, m, v);
    double coupling = 0.0;
    for (int e = 0; e < model.edge_count(); ++e)
        coupling += std::abs(model.r[e]) * std::sqrt(v[model.edges[e].i] * v[model.edges[e].j]);
    out.components.edge_log = -coupling;  // -sqrt(v)'|R|sqrt(v)/2, both (i,j),(j,i) terms
    out.value += out.components.edge_log;
    return out;
}

ConstrainedGradient grad_f_alpha_constrained(const GmrfModel& model, const Eigen::VectorXd& m,
                                             const Eigen::VectorXd& v,
                                             const AlphaAssignment& alpha) {
    check_sizes(model, m, v);
    check_positive_variances(v);
    alpha.validate(model);

    ConstrainedGradient grad;
    grad.m = -model.h;
    grad.m += m;  // unit diagonal part of Qm
    for (int e = 0; e < model.edge_count(); ++e) {
        grad.m[model.edges[e].i] += model.r[e] * m[model.edges[e].j];
        grad.m[model.edges[e].j] += model.r[e] * m[model.edges[e].i];
    }
    grad.v = Eigen::VectorXd::Constant(model.n, 0.5) - 0.5 * v.cwiseInverse();
    for (int e = 0; e < model.edge_count(); ++e) {
        const int i = model.edges[e].i;
        const int j = model.edges[e].j;
        const double a = alpha.values[e];
        const double r2 = model.r[e] * model.r[e];
        const double s = std::sqrt(1.0 + 4.0 * a * a * r2 * v[i] * v[j]);
        grad.v[i] -= a * r2 * v[j] / (1.0 + s);
        grad.v[j] -= a * r2 * v[i] / (1.0 + s);
    }
    return grad;
}

MomentGradient grad_f_alpha_moments(const GmrfModel& model, const MomentMarginals& marginals,
                                    const AlphaAssignment& alpha) {
    check_positive_variances(marginals.v);
    alpha.validate(model);
    MomentGradient grad;
    grad.v = Eigen::VectorXd::Constant(model.n, 0.5) - 0.5 * marginals.v.cwiseInverse();
    grad.v_edge.resize(model.edge_count());
    for (int e = 0; e < model.edge_count(); ++e) {
        const int i = model.edges[e].i;
        const int j = model.edges[e].j;
        const double a = alpha.values[e];
        const double w = marginals.v_edge[e];
        const double p = marginals.v[i] * marginals.v[j] - w * w;
        if (!(p > 0.0))
            throw NonNormalizablePairError("grad_f_alpha_moments: non-normalizable edge");
        grad.v_edge[e] = model.r[e] + w / (a * p);
        grad.v[i] -= 0.5 / a * w * w / (marginals.v[i] * p);
        grad.v[j] -= 0.5 / a * w * w / (marginals.v[j] * p);
    }
    return grad;
}

}  // namespace bethe
