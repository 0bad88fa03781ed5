#include "bethe/model_io.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "bethe/errors.hpp"

namespace bethe {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

[[noreturn]] void fail(const std::string& path, int line, const std::string& what) {
    throw ParseError(path + ":" + std::to_string(line) + ": " + what);
}

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

}  // namespace

std::string h_path_for(const std::string& mtx_path) {
    const std::string suffix = ".mtx";
    if (mtx_path.size() > suffix.size() &&
        mtx_path.compare(mtx_path.size() - suffix.size(), suffix.size(), suffix) == 0)
        return mtx_path.substr(0, mtx_path.size() - suffix.size()) + ".h.txt";
    return mtx_path + ".h.txt";
}

Eigen::SparseMatrix<double> read_matrix_market(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path + ": cannot open");
    std::string line;
    int lineno = 0;

    if (!std::getline(in, line)) fail(path, 1, "empty file");
    ++lineno;
    std::istringstream hdr(line);
    std::string banner, object, format, field, symmetry;
    hdr >> banner >> object >> format >> field >> symmetry;
    if (banner != "%%MatrixMarket") fail(path, lineno, "missing %%MatrixMarket banner");
    if (lower(object) != "matrix") fail(path, lineno, "unsupported object '" + object + "'");
    if (lower(format) != "coordinate")
        fail(path, lineno, "unsupported format '" + format + "' (coordinate required)");
    const std::string f = lower(field);
    if (f == "pattern") fail(path, lineno, "pattern files carry no values");
    if (f == "complex") fail(path, lineno, "complex matrices are not supported");
    if (f != "real" && f != "integer") fail(path, lineno, "unsupported field '" + field + "'");
    const std::string sym = lower(symmetry);
    const bool mirror = sym == "symmetric";
    if (!mirror && sym != "general")
        fail(path, lineno, "unsupported symmetry '" + symmetry + "'");

    long long rows = -1, cols = -1, nnz = -1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line[0] == '%') continue;
        std::istringstream sizes(line);
        if (!(sizes >> rows >> cols >> nnz)) fail(path, lineno, "bad size line");
        break;
    }
    if (rows < 0) fail(path, lineno, "missing size line");
    if (rows != cols) fail(path, lineno, "matrix is not square");

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(mirror ? 2 * nnz : nnz));
    long long seen = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '%') continue;
        std::istringstream row(line);
        long long i, j;
        double v;
        if (!(row >> i >> j >> v)) fail(path, lineno, "bad entry line");
        if (i < 1 || i > rows || j < 1 || j > cols) fail(path, lineno, "index out of range");
        trip.emplace_back(static_cast<int>(i - 1), static_cast<int>(j - 1), v);
        if (mirror && i != j)
            trip.emplace_back(static_cast<int>(j - 1), static_cast<int>(i - 1), v);
        ++seen;
    }
    if (seen != nnz)
        fail(path, lineno, "expected " + std::to_string(nnz) + " entries, found " +
                               std::to_string(seen));
    Eigen::SparseMatrix<double> q(static_cast<int>(rows), static_cast<int>(cols));
    q.setFromTriplets(trip.begin(), trip.end());
    return q;
}

Eigen::VectorXd read_h_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path + ": cannot open");
    std::vector<double> vals;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream row(line);
        double v;
        if (!(row >> v)) fail(path, lineno, "bad value");
        std::string extra;
        if (row >> extra) fail(path, lineno, "one decimal per line expected");
        vals.push_back(v);
    }
    Eigen::VectorXd h(static_cast<Eigen::Index>(vals.size()));
    for (std::size_t k = 0; k < vals.size(); ++k) h[static_cast<Eigen::Index>(k)] = vals[k];
    return h;
}

GmrfModel read_model(const std::string& mtx_path) {
    const Eigen::SparseMatrix<double> q = read_matrix_market(mtx_path);
    const Eigen::VectorXd h = read_h_file(h_path_for(mtx_path));
    if (h.size() != q.rows())
        throw DimensionMismatchError(mtx_path + ": Q is " + std::to_string(q.rows()) + "x" +
                                     std::to_string(q.cols()) + " but h file has " +
                                     std::to_string(h.size()) + " entries");
    return validate_model(h, q);
}

void write_matrix_market(const std::string& path, const GmrfModel& model) {
    std::ofstream out(path);
    if (!out) throw Error("write_matrix_market: cannot open " + path);
    out << "%%MatrixMarket matrix coordinate real symmetric\n";
    out << model.n << " " << model.n << " " << model.n + model.edge_count() << "\n";
    for (int i = 0; i < model.n; ++i) out << i + 1 << " " << i + 1 << " 1\n";
    // lower triangle: edge (i, j) with i < j is written as row j+1, col i+1
    for (int e = 0; e < model.edge_count(); ++e)
        out << model.edges[e].j + 1 << " " << model.edges[e].i + 1 << " " << fmt(model.r[e])
            << "\n";
}

void write_h_file(const std::string& path, const Eigen::VectorXd& h) {
    std::ofstream out(path);
    if (!out) throw Error("write_h_file: cannot open " + path);
    for (Eigen::Index i = 0; i < h.size(); ++i) out << fmt(h[i]) << "\n";
}

void write_model(const std::string& mtx_path, const GmrfModel& model) {
    write_matrix_market(mtx_path, model);
    write_h_file(h_path_for(mtx_path), model.h);
}

}  // namespace bethe
