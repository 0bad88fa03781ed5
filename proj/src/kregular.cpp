#include "bethe/kregular.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/SparseCholesky>

namespace bethe {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

void check_spec(const KRegularSpec& spec) {
    if (spec.k < 2 || spec.k % 2 != 0)
        throw InvalidSpecError("k must be even and >= 2, got " + std::to_string(spec.k));
    if (spec.k >= spec.n)
        throw InvalidSpecError("need k < n, got k = " + std::to_string(spec.k) +
                               ", n = " + std::to_string(spec.n));
}

}  // namespace

GmrfModel build_k_regular(const KRegularSpec& spec) {
    check_spec(spec);
    std::vector<Edge> edges;
    for (int i = 0; i < spec.n; ++i) {
        for (int s = 1; s <= spec.k / 2; ++s) {
            const int j = (i + s) % spec.n;
            edges.push_back({std::min(i, j), std::max(i, j)});
        }
    }
    std::sort(edges.begin(), edges.end(),
              [](const Edge& a, const Edge& b) { return std::pair(a.i, a.j) < std::pair(b.i, b.j); });

    Eigen::VectorXd r = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(edges.size()), spec.r);
    std::vector<Eigen::Triplet<double>> trip;
    for (int i = 0; i < spec.n; ++i) trip.emplace_back(i, i, 1.0);
    for (const Edge& e : edges) {
        trip.emplace_back(e.i, e.j, spec.r);
        trip.emplace_back(e.j, e.i, spec.r);
    }
    Eigen::SparseMatrix<double> q(spec.n, spec.n);
    q.setFromTriplets(trip.begin(), trip.end());
    GmrfModel model = validate_model(Eigen::VectorXd::Zero(spec.n), q);
    for (int d : model.degrees)
        if (d != spec.k) throw InvalidSpecError("build_k_regular: graph is not k-regular");
    return model;
}

double critical_r(int k, double alpha) {
    if (!(alpha > 0.0) || !(alpha < static_cast<double>(k)))
        throw AlphaOutOfRangeError("critical_r: need 0 < alpha < K, got alpha = " +
                                   std::to_string(alpha) + ", K = " + std::to_string(k));
    return 1.0 / (2.0 * std::sqrt(alpha * (k - alpha)));
}

double critical_alpha(int k, double r) {
    const double kr = k * r;
    if (!(kr > 1.0))
        throw RegimeMismatchError("critical_alpha: formula addresses Kr > 1, got Kr = " +
                                  std::to_string(kr));
    return 0.5 * k * (1.0 - std::sqrt(1.0 - 1.0 / (kr * kr)));
}

double r_valid(int n, int k) {
    KRegularSpec spec;
    spec.n = n;
    spec.k = k;
    spec.r = 0.0;
    check_spec(spec);
    double lambda_min = 0.0;
    for (int j = 0; j < n; ++j) {
        double mu = 0.0;
        for (int s = 1; s <= k / 2; ++s) mu += 2.0 * std::cos(kTwoPi * j * s / n);
        lambda_min = std::min(lambda_min, mu);
    }
    return 1.0 / -lambda_min;
}

}  // namespace bethe
