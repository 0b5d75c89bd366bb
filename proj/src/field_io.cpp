#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "tsonn/field.hpp"

namespace tsonn {

double relative_l2(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& ref) {
  if (pred.rows() != ref.rows() || pred.cols() != ref.cols())
    throw std::invalid_argument("relative_l2: shapes differ (" + std::to_string(pred.rows()) +
                                "x" + std::to_string(pred.cols()) + " vs " +
                                std::to_string(ref.rows()) + "x" +
                                std::to_string(ref.cols()) + ")");
  const double denom = ref.norm();
  if (!(denom > 0.0)) throw std::invalid_argument("relative_l2: reference norm is zero");
  return (pred - ref).norm() / denom;
}

std::filesystem::path sidecar_path(const std::filesystem::path& csv_path) {
  auto p = csv_path;
  p.replace_extension(".json");
  return p;
}

void write_field(const Field& field, const std::filesystem::path& csv_path) {
  if (field.coords.rows() != field.values.rows())
    throw std::invalid_argument("field coordinates and values have different row counts");
  std::ofstream csv(csv_path, std::ios::binary);
  if (!csv) throw std::runtime_error("cannot write " + csv_path.string());
  bool first = true;
  for (const auto& name : field.coordinate_names) {
    csv << (first ? "" : ",") << name;
    first = false;
  }
  for (const auto& name : field.component_names) {
    csv << (first ? "" : ",") << name;
    first = false;
  }
  csv << '\n';
  char buf[32];
  for (Index r = 0; r < field.coords.rows(); ++r) {
    for (Index c = 0; c < field.coords.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", field.coords(r, c));
      csv << (c ? "," : "") << buf;
    }
    for (Index c = 0; c < field.values.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", field.values(r, c));
      csv << ',' << buf;
    }
    csv << '\n';
  }
  if (!csv) throw std::runtime_error("error writing " + csv_path.string());

  nlohmann::json side;
  side["problem"] = field.problem;
  side["provenance"] = field.provenance;
  side["coordinate_names"] = field.coordinate_names;
  side["component_names"] = field.component_names;
  side["shape"] = field.shape;
  side["rows"] = field.coords.rows();
  side["metadata"] = field.metadata;
  std::ofstream js(sidecar_path(csv_path), std::ios::binary);
  if (!js) throw std::runtime_error("cannot write " + sidecar_path(csv_path).string());
  js << side.dump(2) << '\n';
}

Field read_field(const std::filesystem::path& csv_path) {
  Field field;
  std::ifstream js(sidecar_path(csv_path));
  if (!js) throw std::runtime_error("missing sidecar " + sidecar_path(csv_path).string());
  const auto side = nlohmann::json::parse(js);
  field.problem = side.value("problem", "");
  field.provenance = side.value("provenance", "file");
  field.coordinate_names = side.at("coordinate_names").get<std::vector<std::string>>();
  field.component_names = side.at("component_names").get<std::vector<std::string>>();
  field.shape = side.at("shape").get<std::vector<Index>>();
  if (side.contains("metadata"))
    field.metadata = side["metadata"].get<std::map<std::string, std::string>>();

  std::ifstream csv(csv_path);
  if (!csv) throw std::runtime_error("cannot read " + csv_path.string());
  std::string line;
  std::getline(csv, line);
  const Index nc = Index(field.coordinate_names.size());
  const Index nv = Index(field.component_names.size());
  std::vector<double> data;
  Index rows = 0;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    const char* p = line.c_str();
    for (Index k = 0; k < nc + nv; ++k) {
      char* end = nullptr;
      data.push_back(std::strtod(p, &end));
      if (end == p) throw std::runtime_error("malformed CSV row " + std::to_string(rows + 2));
      p = *end == ',' ? end + 1 : end;
    }
    ++rows;
  }
  field.coords.resize(rows, nc);
  field.values.resize(rows, nv);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < nc; ++c) field.coords(r, c) = data[std::size_t(r * (nc + nv) + c)];
    for (Index c = 0; c < nv; ++c)
      field.values(r, c) = data[std::size_t(r * (nc + nv) + nc + c)];
  }
  return field;
}

Eigen::MatrixXd interpolate_bilinear(const Field& g, const Eigen::MatrixXd& points) {
  if (g.shape.size() != 2 || g.coords.cols() != 2)
    throw std::invalid_argument("bilinear interpolation needs a 2-D tensor grid");
  const Index nx = g.shape[0];
  const Index ny = g.shape[1];
  std::vector<double> xs(static_cast<std::size_t>(nx)), ys(static_cast<std::size_t>(ny));
  for (Index i = 0; i < nx; ++i) xs[std::size_t(i)] = g.coords(i, 0);
  for (Index j = 0; j < ny; ++j) ys[std::size_t(j)] = g.coords(j * nx, 1);
  auto locate = [](const std::vector<double>& axis, double v, Index& k, double& w) {
    v = std::clamp(v, axis.front(), axis.back());
    auto it = std::upper_bound(axis.begin(), axis.end(), v);
    k = std::clamp<Index>(Index(it - axis.begin()) - 1, 0, Index(axis.size()) - 2);
    w = (v - axis[std::size_t(k)]) / (axis[std::size_t(k + 1)] - axis[std::size_t(k)]);
  };
  Eigen::MatrixXd out(points.rows(), g.values.cols());
  for (Index p = 0; p < points.rows(); ++p) {
    Index i, j;
    double wx, wy;
    locate(xs, points(p, 0), i, wx);
    locate(ys, points(p, 1), j, wy);
    out.row(p) = (1 - wx) * (1 - wy) * g.values.row(j * nx + i) +
                 wx * (1 - wy) * g.values.row(j * nx + i + 1) +
                 (1 - wx) * wy * g.values.row((j + 1) * nx + i) +
                 wx * wy * g.values.row((j + 1) * nx + i + 1);
  }
  return out;
}

}  // namespace tsonn
