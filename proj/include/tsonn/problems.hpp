#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "tsonn/field.hpp"
#include "tsonn/jet_point.hpp"
#include "tsonn/network.hpp"

namespace tsonn {

enum class ProblemId { laplace_cylinder, burgers_steady, cavity, allen_cahn };

std::string to_string(ProblemId id);
ProblemId parse_problem_id(const std::string& name);

// One of the four benchmark problems with its physical parameters and loss
// weights.
//
// N[u] follows the pseudo-time convention du/dtau = N[u] with the highest
// spatial derivative acting diffusively:
//   laplace-cylinder  N = phi_xx + phi_yy
//   burgers-steady    N = -u u_x + nu u_xx
//   cavity            N = (-(u.grad u + p_x - lap u / Re),
//                          -(u.grad v + p_y - lap v / Re),
//                          -beta div u)
//   allen-cahn        N = -(u_t - D u_xx + k u^3 - k u)
struct ProblemSpec {
  ProblemId id = ProblemId::burgers_steady;

  // laplace-cylinder
  double v_inf = 1.0;
  double r_wall = 0.5;
  double r_far = 15.0;
  // burgers-steady
  double nu = 0.05;
  double u_left = 1.0;
  double u_right = -1.0;
  // cavity (artificial compressibility for the pressure component)
  double reynolds = 100.0;
  double beta = 1.0;
  // allen-cahn
  double ac_diffusivity = 1e-4;
  double ac_reaction = 5.0;

  double lambda_bc = 1.0;
  double lambda_ic = 0.0;

  void validate() const;

  int input_dim() const;
  int state_dim() const;
  bool time_dependent() const { return id == ProblemId::allen_cahn; }

  JetLayout interior_layout() const;
  JetLayout boundary_layout() const;
  JetLayout initial_layout() const;

  // Quantities compared against references (velocity for the potential and
  // cavity flows, u otherwise).
  JetLayout observable_layout() const;
  int observable_dim() const;
  std::vector<std::string> observable_names() const;
  std::vector<std::string> coordinate_names() const;
};

ProblemSpec make_problem(ProblemId id);

enum class BoundaryKind { wall, farfield, dirichlet, periodic };

// A boundary residual term. Periodic terms couple point a with point b.
struct BoundaryItem {
  BoundaryKind kind = BoundaryKind::dirichlet;
  Index a = 0;
  Index b = -1;
  std::array<double, 2> normal{0.0, 0.0};
  std::array<double, 3> target{0.0, 0.0, 0.0};
};

enum class SamplingStrategy { mesh, uniform_random };

std::string to_string(SamplingStrategy s);
SamplingStrategy parse_sampling(const std::string& name);

struct SampleCounts {
  Index interior = 0;
  Index boundary = 0;
  Index initial = 0;
  // Tensor-mesh dimensions for the mesh strategy (theta x r for the annulus,
  // x x y for the cavity). Zero means derive from `interior`.
  std::array<Index, 2> mesh{0, 0};
};

struct PointSet {
  PointMatrix interior;
  PointMatrix boundary;
  std::vector<BoundaryItem> boundary_items;
  PointMatrix initial;
  std::uint64_t seed = 0;
  SamplingStrategy strategy = SamplingStrategy::mesh;
};

PointSet sample_points(const ProblemSpec& problem, const SampleCounts& counts,
                       std::uint64_t seed, SamplingStrategy strategy);

// Replaces the interior points with a fresh uniform-random draw; boundary and
// initial points are kept.
void resample_interior(const ProblemSpec& problem, PointSet& points, std::uint64_t seed);

std::array<double, 2> analytic_cylinder_velocity(double x, double y, double v_inf,
                                                 double radius);
// Velocity potential whose gradient is analytic_cylinder_velocity.
double analytic_cylinder_potential(double x, double y, double v_inf, double radius);

inline double allen_cahn_initial(double x) {
  return x * x * std::cos(std::numbers::pi * x);
}

// ---------------------------------------------------------------------------
// Residual operators on a single jet point. S is either a plain scalar or a
// Dual for differentiating through the operator.

template <typename S>
void pde_operator(const ProblemSpec& pb, const JetPoint<S>& j, S* out) {
  using R = scalar_of_t<S>;
  switch (pb.id) {
    case ProblemId::laplace_cylinder:
      out[0] = j.d2u[0][0][0] + j.d2u[0][1][1];
      return;
    case ProblemId::burgers_steady:
      out[0] = -j.u[0] * j.du[0][0] + R(pb.nu) * j.d2u[0][0][0];
      return;
    case ProblemId::cavity: {
      const S& u = j.u[0];
      const S& v = j.u[1];
      const R inv_re = R(1.0 / pb.reynolds);
      out[0] = -(u * j.du[0][0] + v * j.du[0][1] + j.du[2][0] -
                 inv_re * (j.d2u[0][0][0] + j.d2u[0][1][1]));
      out[1] = -(u * j.du[1][0] + v * j.du[1][1] + j.du[2][1] -
                 inv_re * (j.d2u[1][0][0] + j.d2u[1][1][1]));
      out[2] = -R(pb.beta) * (j.du[0][0] + j.du[1][1]);
      return;
    }
    case ProblemId::allen_cahn: {
      const S& u = j.u[0];
      const R k = R(pb.ac_reaction);
      out[0] = -(j.du[0][1] - R(pb.ac_diffusivity) * j.d2u[0][0][0] + k * (u * u * u) - k * u);
      return;
    }
  }
}

// Returns the number of residual components written.
template <typename S>
int boundary_operator(const ProblemSpec& pb, const BoundaryItem& item, const JetPoint<S>& a,
                      const JetPoint<S>& b, S* out) {
  using R = scalar_of_t<S>;
  switch (item.kind) {
    case BoundaryKind::wall:
      out[0] = a.du[0][0] * R(item.normal[0]) + a.du[0][1] * R(item.normal[1]);
      return 1;
    case BoundaryKind::farfield:
      out[0] = a.du[0][0] - R(pb.v_inf);
      out[1] = a.du[0][1];
      return 2;
    case BoundaryKind::dirichlet: {
      const int k = pb.id == ProblemId::cavity ? 2 : 1;
      for (int c = 0; c < k; ++c) out[c] = a.u[c] - R(item.target[c]);
      return k;
    }
    case BoundaryKind::periodic:
      out[0] = a.u[0] - b.u[0];
      out[1] = a.du[0][0] - b.du[0][0];
      return 2;
  }
  return 0;
}

template <typename S>
void initial_operator(const ProblemSpec&, const JetPoint<S>& j, S* out) {
  using R = scalar_of_t<S>;
  out[0] = j.u[0] - R(allen_cahn_initial(j.x[0]));
}

// ---------------------------------------------------------------------------
// Batch forms with layout checks.

template <typename T>
Matrix<T> pde_residual(const ProblemSpec& pb, const JetBatch<T>& jets,
                       const PointMatrix& coords) {
  if (!jets.layout().covers(pb.interior_layout()))
    throw std::invalid_argument("jet does not carry the derivatives " + to_string(pb.id) +
                                " needs");
  if (jets.output_dim() != pb.state_dim())
    throw std::invalid_argument("jet output dimension does not match problem state");
  Matrix<T> res(jets.points(), pb.state_dim());
  T out[kMaxState];
  for (Index p = 0; p < jets.points(); ++p) {
    pde_operator(pb, plain_point(jets, coords, p), out);
    for (int c = 0; c < pb.state_dim(); ++c) res(p, c) = out[c];
  }
  return res;
}

// One row per boundary item; unused trailing columns are zero.
template <typename T>
Matrix<T> boundary_residual(const ProblemSpec& pb, const JetBatch<T>& jets,
                            const PointMatrix& coords, const std::vector<BoundaryItem>& items) {
  if (!jets.layout().covers(pb.boundary_layout()))
    throw std::invalid_argument("jet order too low for " + to_string(pb.id) +
                                " boundary conditions");
  Matrix<T> res = Matrix<T>::Zero(Index(items.size()), 2);
  T out[kMaxState];
  for (std::size_t k = 0; k < items.size(); ++k) {
    const auto& item = items[k];
    if (item.kind == BoundaryKind::wall) {
      const double nn = std::hypot(item.normal[0], item.normal[1]);
      if (!(std::abs(nn - 1.0) < 1e-9))
        throw std::invalid_argument("wall boundary point without a unit normal");
    }
    const auto a = plain_point(jets, coords, item.a);
    const auto b = item.b >= 0 ? plain_point(jets, coords, item.b) : a;
    const int m = boundary_operator(pb, item, a, b, out);
    for (int c = 0; c < m; ++c) res(Index(k), c) = out[c];
  }
  return res;
}

template <typename T>
Vector<T> initial_residual(const ProblemSpec& pb, const JetBatch<T>& jets,
                           const PointMatrix& coords) {
  if (!pb.time_dependent())
    throw std::invalid_argument(to_string(pb.id) + " has no initial condition");
  for (Index p = 0; p < coords.rows(); ++p)
    if (std::abs(coords(p, 1)) > 1e-14)
      throw std::invalid_argument("initial residual requested off t = 0");
  Vector<T> res(jets.points());
  T out[1];
  for (Index p = 0; p < jets.points(); ++p) {
    initial_operator(pb, plain_point(jets, coords, p), out);
    res[p] = out[0];
  }
  return res;
}

template <typename T>
Matrix<T> observables(const ProblemSpec& pb, const JetBatch<T>& jets) {
  Matrix<T> obs(jets.points(), pb.observable_dim());
  for (Index p = 0; p < jets.points(); ++p) {
    if (pb.id == ProblemId::laplace_cylinder) {
      obs(p, 0) = jets.grad(p, 0, 0);
      obs(p, 1) = jets.grad(p, 0, 1);
    } else {
      for (int c = 0; c < pb.observable_dim(); ++c) obs(p, c) = jets.value(p, c);
    }
  }
  return obs;
}

// ---------------------------------------------------------------------------
// Reference fields.

struct GridConfig {
  // laplace: theta x r interior mesh (wall and far rings are added);
  // burgers: interior nodes (end points added); cavity: n x n nodes;
  // allen-cahn: nx x nt nodes.
  std::array<Index, 2> dims{0, 0};
  // Oracle resolution used to build cavity / allen-cahn references.
  Index oracle_n = 0;
  Index oracle_steps_per_unit = 0;
};

GridConfig default_grid(const ProblemSpec& pb, bool desk_scale);

// Evaluation grid coordinates in row-per-point layout plus its shape.
Field evaluation_grid(const ProblemSpec& pb, const GridConfig& grid);

// Reference values of the observables on the evaluation grid.
Field reference_field(const ProblemSpec& pb, const GridConfig& grid);

}  // namespace tsonn
