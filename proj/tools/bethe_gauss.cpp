// bethe-gauss: batch front-end for Gaussian fractional Bethe experiments.
// Subcommands: analyze, oracle, bp, minimize, profile, sweep-alpha, kregular, gen.
// Exit codes: 0 success, 1 non-convergence status, 2 input error.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "bethe/direct_min.hpp"
#include "bethe/kregular.hpp"
#include "bethe/message_passing.hpp"
#include "bethe/model_io.hpp"
#include "bethe/stability.hpp"

using namespace bethe;

namespace {

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

// shorter precision for the human-facing summary lines
std::string fmt_short(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", x);
    return buf;
}

int dense_guard_from_env() {
    const char* env = std::getenv("BETHE_GAUSS_DENSE_GUARD");
    if (env == nullptr) return 2000;
    try {
        return std::stoi(env);
    } catch (...) {
        throw Error("BETHE_GAUSS_DENSE_GUARD is not an integer: " + std::string(env));
    }
}

// output stream: --out file or stdout
struct OutStream {
    std::ofstream file;
    std::ostream* os = &std::cout;
    void open(const std::string& path) {
        if (path.empty()) return;
        file.open(path);
        if (!file) throw Error("cannot open output file " + path);
        os = &file;
    }
    std::ostream& operator*() { return *os; }
};

EdgePartition choose_partition(const GmrfModel& model, const SpectralReport& spectral,
                               const std::string& mode) {
    if (mode == "symmetric")
        return partition_potentials(model, PartitionStrategy::Symmetric, spectral);
    if (mode == "pairwise")
        return partition_potentials(model, PartitionStrategy::PairwiseNormalizable, spectral);
    if (mode != "auto") throw Error("--init-partition must be symmetric, pairwise or auto");
    return partition_potentials(model,
                                spectral.lambda_max < 1.0
                                    ? PartitionStrategy::PairwiseNormalizable
                                    : PartitionStrategy::Symmetric,
                                spectral);
}

void write_marginals_block(std::ostream& out, const GmrfModel& model,
                           const MomentMarginals& mm) {
    out << "kind,i,j,m,v,cov\n";
    for (int i = 0; i < model.n; ++i)
        out << "node," << i << ",," << fmt(mm.m[i]) << "," << fmt(mm.v[i]) << ",\n";
    for (int e = 0; e < model.edge_count(); ++e)
        out << "edge," << model.edges[e].i << "," << model.edges[e].j << ",,,"
            << fmt(mm.v_edge[e]) << "\n";
}

std::string class_string(const BoundednessClass& c) {
    switch (c.kind) {
        case Boundedness::BoundedAll: return "BoundedAll";
        case Boundedness::UnboundedAll: return "UnboundedAll";
        case Boundedness::Boundary:
            return std::string("Boundary(bounded=") + (c.boundary_bounded ? "true" : "false") +
                   ")";
    }
    return "?";
}

Eigen::VectorXd parse_sigma_grid(const std::string& text) {
    double lo, hi;
    int count;
    if (std::sscanf(text.c_str(), "%lf:%lf:%d", &lo, &hi, &count) != 3 || count < 2 ||
        !(lo > 0.0) || !(hi > lo))
        throw Error("--sigma-grid expects lo:hi:count with 0 < lo < hi, count >= 2");
    Eigen::VectorXd g(count);
    for (int k = 0; k < count; ++k) g[k] = lo + (hi - lo) * k / (count - 1);
    return g;
}

std::vector<double> parse_alphas(const std::string& text) {
    std::vector<double> out;
    if (text.rfind("log:", 0) == 0) {
        double lo, hi;
        int count;
        if (std::sscanf(text.c_str() + 4, "%lf:%lf:%d", &lo, &hi, &count) != 3 || count < 2 ||
            !(lo > 0.0) || !(hi > lo))
            throw Error("--alphas log grid expects log:lo:hi:count with 0 < lo < hi");
        for (int k = 0; k < count; ++k)
            out.push_back(lo * std::pow(hi / lo, static_cast<double>(k) / (count - 1)));
        return out;
    }
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (item.empty()) continue;
        out.push_back(std::stod(item));
    }
    if (out.empty()) throw Error("--alphas is empty");
    std::sort(out.begin(), out.end());
    return out;
}

// ---------------------------------------------------------------------------

int cmd_analyze(const std::string& path, double alpha) {
    const GmrfModel model = read_model(path);
    const BoundednessClass cls = classify_boundedness(model, alpha);
    std::cout << "lambda_max=" << fmt_short(cls.lambda_max) << " class=" << class_string(cls)
              << " pairwise_normalizable=" << (cls.lambda_max < 1.0 ? "true" : "false")
              << " connected=" << (model.connected ? "true" : "false") << " n=" << model.n
              << " edges=" << model.edge_count() << "\n";
    if (cls.kind == Boundedness::Boundary)
        std::cout << "boundary_sum=" << fmt_short(cls.alpha_inverse_sum)
                  << " threshold=" << fmt_short(cls.threshold) << "\n";
    if (model.connected && model.edge_count() > 0) {
        const SpectralReport sr = spectral_analysis(model);
        std::cout << "u_max=";
        for (int i = 0; i < model.n; ++i) std::cout << (i ? "," : "") << fmt(sr.u_max[i]);
        std::cout << "\n";
    }
    return 0;
}

int cmd_oracle(const std::string& path, const std::string& out_path) {
    const GmrfModel model = read_model(path);
    const MomentMarginals mm = exact_marginals(model, dense_guard_from_env());
    OutStream out;
    out.open(out_path);
    write_marginals_block(*out, model, mm);
    return 0;
}

int cmd_bp(const std::string& path, double alpha, double epsilon, double tol, int max_iters,
           const std::string& partition_mode, const std::string& out_path) {
    const GmrfModel model = read_model(path);
    const SpectralReport spectral = spectral_analysis(model);
    const EdgePartition partition = choose_partition(model, spectral, partition_mode);
    BpOptions opt;
    opt.alpha = alpha;
    opt.epsilon = epsilon;
    opt.tol = tol;
    opt.max_iters = max_iters;
    const BpResult res = run(model, partition, opt);

    OutStream out;
    out.open(out_path);
    write_trace_csv(*out, res);
    *out << "\n";
    *out << "status,iterations,mean_err_vs_oracle,sigma_err_vs_oracle\n";
    std::string mean_err, sigma_err;
    if (res.marginals && model.n <= dense_guard_from_env()) {
        const MomentMarginals oracle = exact_marginals(model, dense_guard_from_env());
        mean_err = fmt((res.marginals->m - oracle.m).lpNorm<Eigen::Infinity>());
        sigma_err = fmt((res.marginals->v.cwiseSqrt() - oracle.v.cwiseSqrt()).norm());
    }
    *out << to_string(res.status) << "," << res.iterations << "," << mean_err << ","
         << sigma_err << "\n";
    if (res.marginals) {
        *out << "\n";
        write_marginals_block(*out, model, *res.marginals);
    }
    if (res.status == BpStatus::Converged && model.edge_count() > 0) {
        *out << "\n";
        const StabilityReport rep = jacobian_spectra(model, *res.pair_marginals, alpha);
        write_stability_csv(*out, rep, m_alpha_singularity(model, alpha));
    }
    return res.status == BpStatus::Converged ? 0 : 1;
}

int cmd_minimize(const std::string& path, double alpha, double v0, double tol_grad,
                 int max_iters, const std::string& out_path) {
    const GmrfModel model = read_model(path);
    MinOptions opt;
    opt.v0 = Eigen::VectorXd::Constant(model.n, v0);
    opt.tol_grad = tol_grad;
    opt.max_iters = max_iters;
    const MinResult res = newton_minimize(model, AlphaAssignment::uniform(model, alpha), opt);

    OutStream out;
    out.open(out_path);
    write_minimize_trace_csv(*out, res);
    *out << "\n";
    *out << "status,f,grad_inf,hessian_pd\n";
    *out << to_string(res.status) << "," << fmt(res.f_value) << "," << fmt(res.grad_norm)
         << "," << (res.hessian_pd ? 1 : 0) << "\n";
    return res.status == MinStatus::Converged ? 0 : 1;
}

int cmd_profile(const std::string& path, double alpha, const std::string& grid_text,
                const std::string& direction_mode, const std::string& out_path) {
    const GmrfModel model = read_model(path);
    Eigen::VectorXd direction;
    if (direction_mode == "ones") {
        direction = Eigen::VectorXd::Ones(model.n);
    } else if (direction_mode == "perron") {
        direction = spectral_analysis(model).u_max;
    } else {
        throw Error("--direction must be 'perron' or 'ones'");
    }
    const ProfileResult prof = symmetric_profile(model, AlphaAssignment::uniform(model, alpha),
                                                 parse_sigma_grid(grid_text), direction);
    OutStream out;
    out.open(out_path);
    *out << "sigma,f\n";
    for (const ProfilePoint& p : prof.points) *out << fmt(p.sigma) << "," << fmt(p.f) << "\n";
    *out << "\n";
    *out << "interior_min_sigma,interior_min_f\n";
    for (int k : prof.interior_minima)
        *out << fmt(prof.points[k].sigma) << "," << fmt(prof.points[k].f) << "\n";
    return 0;
}

int cmd_sweep_alpha(const std::string& path, const std::string& alphas_text, double epsilon,
                    double tol, int max_iters, const std::string& partition_mode,
                    const std::string& out_path) {
    const GmrfModel model = read_model(path);
    const SpectralReport spectral = spectral_analysis(model);
    const std::vector<double> alphas = parse_alphas(alphas_text);

    std::optional<MomentMarginals> oracle;
    if (model.n <= dense_guard_from_env())
        oracle = exact_marginals(model, dense_guard_from_env());

    OutStream out;
    out.open(out_path);
    *out << "alpha,status,iterations,f_final,sigma_err,mean_err\n";
    bool all_converged = true;
    for (double alpha : alphas) {
        const EdgePartition partition = choose_partition(model, spectral, partition_mode);
        BpOptions opt;
        opt.alpha = alpha;
        opt.epsilon = epsilon;
        opt.tol = tol;
        opt.max_iters = max_iters;
        const BpResult res = run(model, partition, opt);
        *out << fmt(alpha) << "," << to_string(res.status) << "," << res.iterations;
        if (res.status == BpStatus::Converged) {
            const double f = f_alpha_constrained(model, res.marginals->m, res.marginals->v,
                                                 AlphaAssignment::uniform(model, alpha))
                                 .value;
            *out << "," << fmt(f);
            if (oracle) {
                *out << ","
                     << fmt((res.marginals->v.cwiseSqrt() - oracle->v.cwiseSqrt()).norm())
                     << ","
                     << fmt((res.marginals->m - oracle->m).lpNorm<Eigen::Infinity>());
            } else {
                *out << ",,";
            }
        } else {
            all_converged = false;
            *out << ",,,";  // missing values indicate non-convergence
        }
        *out << "\n";
        out.os->flush();
    }
    return all_converged ? 0 : 1;
}

int cmd_kregular(int n, int k, double r, const std::string& out_base) {
    const GmrfModel model = build_k_regular({n, k, r});
    write_model(out_base + ".mtx", model);
    std::cout << "written=" << out_base << ".mtx n=" << n << " k=" << k << " r=" << fmt_short(r)
              << " lambda_max=" << fmt_short(k * std::abs(r)) << " r_valid=" << fmt_short(r_valid(n, k))
              << "\n";
    if (k * r > 1.0) std::cout << "critical_alpha=" << fmt_short(critical_alpha(k, r)) << "\n";
    return 0;
}

int cmd_gen(int n, double density, double target, const std::string& signs,
            std::uint64_t seed, bool zero_h, const std::string& out_base) {
    GeneratorSpec gs;
    gs.n = n;
    gs.density = density;
    gs.target_lambda_max = target;
    gs.seed = seed;
    if (signs == "positive") {
        gs.sign_mode = SignMode::AllPositive;
    } else if (signs == "mixed") {
        gs.sign_mode = SignMode::Mixed;
    } else {
        throw Error("--signs must be 'positive' or 'mixed'");
    }
    GmrfModel model = generate_model(gs);
    if (zero_h) model.h.setZero();
    write_model(out_base + ".mtx", model);
    std::cout << "written=" << out_base << ".mtx n=" << n << " edges=" << model.edge_count()
              << " lambda_max=" << fmt_short(target) << " seed=" << seed << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "Gaussian fractional Bethe toolbox: boundedness analysis, fractional belief\n"
        "propagation, direct Newton minimization and energy profiles for Gaussian\n"
        "Markov random fields. Models are Matrix Market files (*.mtx, coordinate real\n"
        "symmetric) with the linear term in a sibling *.h.txt, one decimal per line.\n"
        "Set BETHE_GAUSS_DENSE_GUARD to override the dense-oracle size guard (2000).\n"
        "Exit codes: 0 success, 1 non-convergence, 2 input error."};
    app.require_subcommand(1);

    std::string model_path, out_path, partition_mode = "auto", direction = "ones";
    std::string sigma_grid = "0.5:4:200", alphas = "1", signs = "mixed";
    std::string out_base = "model";
    double alpha = 1.0, epsilon = 1.0, tol = 1e-10, tol_grad = 1e-9, v0 = 1.0, r = 0.27;
    double density = 0.3, target = 0.9;
    int max_iters = 10000, min_iters = 200, n = 8, k = 4;
    std::uint64_t seed = 0;
    bool zero_h = false;

    auto* analyze = app.add_subcommand(
        "analyze",
        "Spectral and boundedness report: lambda_max(|R|), boundedness class,\n"
        "pairwise normalizability, connectivity and the Perron vector.");
    analyze->add_option("model", model_path, "model .mtx file")->required();
    analyze->add_option("--alpha", alpha, "uniform fractional parameter for the boundary rule");

    auto* oracle = app.add_subcommand(
        "oracle",
        "Dense exact marginals. CSV columns: kind,i,j,m,v,cov (node rows carry\n"
        "m and v; edge rows carry the covariance).");
    oracle->add_option("model", model_path)->required();
    oracle->add_option("--out", out_path, "output file (default stdout)");

    auto* bp = app.add_subcommand(
        "bp",
        "Fractional message passing from the zero state. Emits the per-sweep trace\n"
        "(iter,max_delta_eta,max_delta_lambda,f_alpha_c,normalizable), a summary\n"
        "(status,iterations,mean_err_vs_oracle,sigma_err_vs_oracle), the final\n"
        "marginals (kind,i,j,m,v,cov) and, when converged, the stability report\n"
        "(rho_eta,rho_lambda,stable,hessian_pd,sigma_min_M); blocks separated by\n"
        "blank lines.");
    bp->add_option("model", model_path)->required();
    bp->add_option("--alpha", alpha, "uniform fractional parameter (default 1)");
    bp->add_option("--epsilon", epsilon, "damping in (0,1] (default 1)");
    bp->add_option("--tol", tol, "convergence threshold on max message change");
    bp->add_option("--max-iters", max_iters, "sweep cap");
    bp->add_option("--init-partition", partition_mode,
                   "symmetric | pairwise | auto (pairwise when lambda_max < 1)");
    bp->add_option("--out", out_path);

    auto* minimize = app.add_subcommand(
        "minimize",
        "Newton minimization of the constrained energy over node variances.\n"
        "Emits the trace (iter,f,grad_inf,step_size,min_v) and a verdict row\n"
        "(status,f,grad_inf,hessian_pd).");
    minimize->add_option("model", model_path)->required();
    minimize->add_option("--alpha", alpha);
    minimize->add_option("--v0", v0, "initial variance, same for every node (default 1)");
    minimize->add_option("--tol-grad", tol_grad);
    minimize->add_option("--max-iters", min_iters);
    minimize->add_option("--out", out_path);

    auto* profile = app.add_subcommand(
        "profile",
        "Constrained energy along sqrt(v) = sigma * direction. Emits the curve\n"
        "(sigma,f) and the sampled interior minima (interior_min_sigma,\n"
        "interior_min_f).");
    profile->add_option("model", model_path)->required();
    profile->add_option("--alpha", alpha);
    profile->add_option("--sigma-grid", sigma_grid, "lo:hi:count linear grid");
    profile->add_option("--direction", direction, "ones | perron");
    profile->add_option("--out", out_path);

    auto* sweep = app.add_subcommand(
        "sweep-alpha",
        "Run bp for each alpha; rows ordered by alpha. CSV columns:\n"
        "alpha,status,iterations,f_final,sigma_err,mean_err. Empty cells on\n"
        "non-converged rows are the missing values.");
    sweep->add_option("model", model_path)->required();
    sweep->add_option("--alphas", alphas, "comma list or log:lo:hi:count");
    sweep->add_option("--epsilon", epsilon);
    sweep->add_option("--tol", tol);
    sweep->add_option("--max-iters", max_iters);
    sweep->add_option("--init-partition", partition_mode);
    sweep->add_option("--out", out_path);

    auto* kreg = app.add_subcommand(
        "kregular",
        "Write the circulant K-regular model C_n(1..K/2) with coupling r and\n"
        "print its critical constants.");
    kreg->add_option("--n", n)->required();
    kreg->add_option("--K", k)->required();
    kreg->add_option("--r", r)->required();
    kreg->add_option("--out-base", out_base, "writes <base>.mtx and <base>.h.txt");

    auto* gen = app.add_subcommand(
        "gen", "Write a random connected model scaled to a target lambda_max(|R|).");
    gen->add_option("--n", n)->required();
    gen->add_option("--density", density, "fraction of all pairs to realize as edges");
    gen->add_option("--target", target, "target lambda_max(|R|)")->required();
    gen->add_option("--signs", signs, "positive | mixed");
    gen->add_option("--seed", seed);
    gen->add_flag("--zero-h", zero_h, "write h = 0 instead of the N(0,1) draw");
    gen->add_option("--out-base", out_base);

    CLI11_PARSE(app, argc, argv);

    try {
        if (analyze->parsed()) return cmd_analyze(model_path, alpha);
        if (oracle->parsed()) return cmd_oracle(model_path, out_path);
        if (bp->parsed())
            return cmd_bp(model_path, alpha, epsilon, tol, max_iters, partition_mode, out_path);
        if (minimize->parsed())
            return cmd_minimize(model_path, alpha, v0, tol_grad, min_iters, out_path);
        if (profile->parsed())
            return cmd_profile(model_path, alpha, sigma_grid, direction, out_path);
        if (sweep->parsed())
            return cmd_sweep_alpha(model_path, alphas, epsilon, tol, max_iters, partition_mode,
                                   out_path);
        if (kreg->parsed()) return cmd_kregular(n, k, r, out_base);
        if (gen->parsed()) return cmd_gen(n, density, target, signs, seed, zero_h, out_base);
    } catch (const CannotSatisfyError& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    } catch (const Error& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 2;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 2;
    }
    return 2;
}
