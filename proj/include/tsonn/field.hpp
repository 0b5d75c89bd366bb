#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "tsonn/types.hpp"

namespace tsonn {

// Values sampled on a set of points: reference solutions, oracle output and
// network predictions all use this form.
struct Field {
  std::string problem;
  std::string provenance;  // analytic | oracle | file | prediction
  std::vector<std::string> coordinate_names;
  std::vector<std::string> component_names;
  std::vector<Index> shape;  // grid shape, product equals coords.rows()
  Eigen::MatrixXd coords;    // one row per point
  Eigen::MatrixXd values;    // one row per point, one column per component
  std::map<std::string, std::string> metadata;
};

// ||pred - ref||_2 / ||ref||_2 over all entries.
double relative_l2(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& ref);

// CSV with a header row of coordinate then component names, 17 significant
// digits, LF line endings; plus a JSON sidecar next to it (same stem, .json).
void write_field(const Field& field, const std::filesystem::path& csv_path);
Field read_field(const std::filesystem::path& csv_path);
std::filesystem::path sidecar_path(const std::filesystem::path& csv_path);

// Bilinear interpolation of a 2-D tensor-grid field (shape {nx, ny}, x
// fastest) at arbitrary points. Points outside the grid are clamped.
Eigen::MatrixXd interpolate_bilinear(const Field& grid_field, const Eigen::MatrixXd& points);

}  // namespace tsonn
