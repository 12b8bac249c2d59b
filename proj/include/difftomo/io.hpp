#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

namespace difftomo {

/// Plain numeric CSV, one matrix row per line, full double precision.
void write_matrix_csv(const Eigen::MatrixXd& m, const std::string& path);
Eigen::MatrixXd read_matrix_csv(const std::string& path);

/// Two-column CSV with a header line: `<index_name>,<value_name>`.
void write_vector_csv(const Eigen::VectorXd& v, const std::string& path,
                      const std::string& index_name = "index", const std::string& value_name = "value");
Eigen::VectorXd read_vector_csv(const std::string& path);

/// 8-bit binary PGM scaled linearly from [min, max] to [0, 255]; the
/// scaling is written next to it as `<path>.scale` (`min,max`).
/// Row 0 of the matrix is the top image row.
void write_pgm(const Eigen::MatrixXd& image, const std::string& path);

/// Reads a PGM written by write_pgm, undoing the sidecar scaling.
Eigen::MatrixXd read_pgm(const std::string& path);

}  // namespace difftomo
