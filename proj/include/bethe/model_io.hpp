#pragma once

#include <string>
#include <utility>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "bethe/gmrf.hpp"

namespace bethe {

// On-disk model format: Q in Matrix Market symmetric coordinate form
// (`*.mtx`), h as one decimal per line in a sibling `*.h.txt`.

// "model.mtx" -> "model.h.txt"
std::string h_path_for(const std::string& mtx_path);

// Reads a coordinate real/integer Matrix Market file. Pattern, complex and
// array variants are rejected. "symmetric" entries are mirrored; "general"
// files are accepted as-is (validate_model still checks symmetry).
Eigen::SparseMatrix<double> read_matrix_market(const std::string& path);

// one decimal per line
Eigen::VectorXd read_h_file(const std::string& path);

// Convenience: read "<base>.mtx" + sibling h file and validate.
GmrfModel read_model(const std::string& mtx_path);

void write_matrix_market(const std::string& path, const GmrfModel& model);
void write_h_file(const std::string& path, const Eigen::VectorXd& h);
void write_model(const std::string& mtx_path, const GmrfModel& model);

}  // namespace bethe
