#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fpdpm/errors.hpp"
#include "fpdpm/model.hpp"

namespace fpdpm::cli {

/// File could not be read, written or parsed.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Matrix CSV: header `v0,v1,...`, one unit per row. Image rows store pixels in
/// column-major order (pixel (r, c) of an R-row image is column c * R + r).
void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix_csv(const std::string& path);

/// Binary matrix: two little-endian uint64 (rows, cols), then rows * cols
/// little-endian float64 in row-major order.
void write_matrix_binary(const std::string& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix_binary(const std::string& path);

/// Dispatches on the extension: ".bin" is binary, anything else CSV.
void write_matrix(const std::string& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix(const std::string& path);

/// Label CSV with one named column per label set; rows are units.
void write_labels_csv(const std::string& path, const std::vector<std::string>& names,
                      const std::vector<std::vector<int>>& columns);
struct LabelTable {
  std::vector<std::string> names;
  std::vector<std::vector<int>> columns;

  const std::vector<int>& column(const std::string& name) const;
  bool has(const std::string& name) const;
};
LabelTable read_labels_csv(const std::string& path);

/// Membership trace CSV: `sample,unit,level0,...,levelJ,cov`, labels 1-based.
void write_membership_trace(const std::string& path, const Trace& trace);
/// Restores n, num_levels, retained, memberships and cov_memberships.
Trace read_membership_trace(const std::string& path);

void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

}  // namespace fpdpm::cli
