#include "tsonn/problems.hpp"

#include <random>
#include <stdexcept>

#include "tsonn/oracle.hpp"

namespace tsonn {

std::string to_string(ProblemId id) {
  switch (id) {
    case ProblemId::laplace_cylinder: return "laplace-cylinder";
    case ProblemId::burgers_steady: return "burgers-steady";
    case ProblemId::cavity: return "cavity";
    case ProblemId::allen_cahn: return "allen-cahn";
  }
  return "?";
}

ProblemId parse_problem_id(const std::string& name) {
  for (auto id : {ProblemId::laplace_cylinder, ProblemId::burgers_steady, ProblemId::cavity,
                  ProblemId::allen_cahn})
    if (to_string(id) == name) return id;
  throw std::invalid_argument("unknown problem '" + name +
                              "' (expected laplace-cylinder, burgers-steady, cavity, allen-cahn)");
}

std::string to_string(SamplingStrategy s) {
  return s == SamplingStrategy::mesh ? "mesh" : "uniform-random";
}

SamplingStrategy parse_sampling(const std::string& name) {
  if (name == "mesh") return SamplingStrategy::mesh;
  if (name == "uniform-random") return SamplingStrategy::uniform_random;
  throw std::invalid_argument("unknown sampling strategy '" + name + "'");
}

void ProblemSpec::validate() const {
  auto positive = [](double v, const char* what) {
    if (!(v > 0)) throw std::invalid_argument(std::string(what) + " must be positive");
  };
  positive(v_inf, "v_inf");
  positive(r_wall, "r_wall");
  if (!(r_far > r_wall)) throw std::invalid_argument("r_far must exceed r_wall");
  positive(nu, "nu");
  positive(reynolds, "reynolds");
  positive(beta, "beta");
  positive(ac_diffusivity, "ac_diffusivity");
  positive(ac_reaction, "ac_reaction");
  if (lambda_bc < 0 || lambda_ic < 0) throw std::invalid_argument("loss weights must be >= 0");
}

int ProblemSpec::input_dim() const { return id == ProblemId::burgers_steady ? 1 : 2; }

int ProblemSpec::state_dim() const { return id == ProblemId::cavity ? 3 : 1; }

JetLayout ProblemSpec::interior_layout() const {
  switch (id) {
    case ProblemId::laplace_cylinder:
    case ProblemId::cavity: return JetLayout::second(2, {{0, 0}, {1, 1}});
    case ProblemId::burgers_steady: return JetLayout::second(1, {{0, 0}});
    case ProblemId::allen_cahn: return JetLayout::second(2, {{0, 0}});
  }
  return {};
}

JetLayout ProblemSpec::boundary_layout() const {
  switch (id) {
    case ProblemId::laplace_cylinder:
    case ProblemId::allen_cahn: return JetLayout::first(2);
    case ProblemId::burgers_steady: return JetLayout::values(1);
    case ProblemId::cavity: return JetLayout::values(2);
  }
  return {};
}

JetLayout ProblemSpec::initial_layout() const { return JetLayout::values(input_dim()); }

JetLayout ProblemSpec::observable_layout() const {
  return id == ProblemId::laplace_cylinder ? JetLayout::first(2) : JetLayout::values(input_dim());
}

int ProblemSpec::observable_dim() const {
  return id == ProblemId::laplace_cylinder || id == ProblemId::cavity ? 2 : 1;
}

std::vector<std::string> ProblemSpec::observable_names() const {
  if (observable_dim() == 2) return {"u", "v"};
  return {"u"};
}

std::vector<std::string> ProblemSpec::coordinate_names() const {
  switch (id) {
    case ProblemId::burgers_steady: return {"x"};
    case ProblemId::allen_cahn: return {"x", "t"};
    default: return {"x", "y"};
  }
}

ProblemSpec make_problem(ProblemId id) {
  ProblemSpec pb;
  pb.id = id;
  switch (id) {
    case ProblemId::laplace_cylinder: pb.lambda_bc = 0.1; break;
    case ProblemId::burgers_steady: pb.lambda_bc = 1.0; break;
    case ProblemId::cavity: pb.lambda_bc = 1.0; break;
    case ProblemId::allen_cahn:
      pb.lambda_bc = 1.0;
      pb.lambda_ic = 10.0;
      break;
  }
  return pb;
}

std::array<double, 2> analytic_cylinder_velocity(double x, double y, double v_inf,
                                                 double radius) {
  const double r2 = x * x + y * y;
  if (r2 == 0.0) throw std::invalid_argument("cylinder velocity undefined at the origin");
  const double R2 = radius * radius;
  return {v_inf * (1.0 - R2 * (x * x - y * y) / (r2 * r2)), -v_inf * (2.0 * R2 * x * y / (r2 * r2))};
}

double analytic_cylinder_potential(double x, double y, double v_inf, double radius) {
  const double r2 = x * x + y * y;
  if (r2 == 0.0) throw std::invalid_argument("cylinder potential undefined at the origin");
  return v_inf * x * (1.0 + radius * radius / r2);
}

// ---------------------------------------------------------------------------
// Sampling

namespace {

Index checked_root(Index count, Index divisor, const char* what) {
  const Index target = count / divisor;
  Index k = Index(std::llround(std::sqrt(double(target))));
  if (count % divisor != 0 || k * k != target)
    throw std::invalid_argument(std::string("interior count ") + std::to_string(count) +
                                " does not factor into a " + what + " mesh");
  return k;
}

void annulus_rings(const ProblemSpec& pb, Index per_ring, PointSet& ps) {
  ps.boundary.resize(2 * per_ring, 2);
  ps.boundary_items.clear();
  for (Index i = 0; i < per_ring; ++i) {
    const double th = 2.0 * std::numbers::pi * double(i) / double(per_ring);
    const double c = std::cos(th);
    const double s = std::sin(th);
    ps.boundary.row(i) << pb.r_wall * c, pb.r_wall * s;
    ps.boundary.row(per_ring + i) << pb.r_far * c, pb.r_far * s;
    BoundaryItem wall;
    wall.kind = BoundaryKind::wall;
    wall.a = i;
    wall.normal = {c, s};
    ps.boundary_items.push_back(wall);
  }
  for (Index i = 0; i < per_ring; ++i) {
    BoundaryItem far;
    far.kind = BoundaryKind::farfield;
    far.a = per_ring + i;
    const double th = 2.0 * std::numbers::pi * double(i) / double(per_ring);
    far.normal = {std::cos(th), std::sin(th)};
    ps.boundary_items.push_back(far);
  }
}

PointMatrix random_interior(const ProblemSpec& pb, Index count, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  PointMatrix pts(count, pb.input_dim());
  for (Index p = 0; p < count; ++p) {
    switch (pb.id) {
      case ProblemId::laplace_cylinder: {
        double r;
        do {
          const double a = pb.r_wall * pb.r_wall;
          const double b = pb.r_far * pb.r_far;
          r = std::sqrt(a + (b - a) * unit(rng));
        } while (!(r > pb.r_wall && r < pb.r_far));
        const double th = 2.0 * std::numbers::pi * unit(rng);
        pts.row(p) << r * std::cos(th), r * std::sin(th);
        break;
      }
      case ProblemId::burgers_steady: {
        double x;
        do x = -1.0 + 2.0 * unit(rng);
        while (!(x > -1.0));
        pts(p, 0) = x;
        break;
      }
      case ProblemId::cavity: {
        double x, y;
        do {
          x = unit(rng);
          y = unit(rng);
        } while (!(x > 0.0 && y > 0.0));
        pts.row(p) << x, y;
        break;
      }
      case ProblemId::allen_cahn: {
        double x, t;
        do {
          x = -1.0 + 2.0 * unit(rng);
          t = unit(rng);
        } while (!(x > -1.0 && t > 0.0));
        pts.row(p) << x, t;
        break;
      }
    }
  }
  return pts;
}

}  // namespace

PointSet sample_points(const ProblemSpec& pb, const SampleCounts& counts, std::uint64_t seed,
                       SamplingStrategy strategy) {
  pb.validate();
  if (counts.interior <= 0) throw std::invalid_argument("interior point count must be > 0");
  PointSet ps;
  ps.seed = seed;
  ps.strategy = strategy;
  std::mt19937_64 rng(seed);

  switch (pb.id) {
    case ProblemId::laplace_cylinder: {
      Index nth = counts.mesh[0];
      Index nr = counts.mesh[1];
      if (strategy == SamplingStrategy::mesh) {
        if (nth == 0 && nr == 0) {
          nr = checked_root(counts.interior, 2, "2:1 polar");
          nth = 2 * nr;
        }
        if (nth * nr != counts.interior)
          throw std::invalid_argument("mesh dimensions do not match the interior count");
        const double dr = (pb.r_far - pb.r_wall) / double(nr + 1);
        ps.interior.resize(nth * nr, 2);
        for (Index j = 0; j < nr; ++j)
          for (Index i = 0; i < nth; ++i) {
            const double r = pb.r_wall + double(j + 1) * dr;
            const double th = 2.0 * std::numbers::pi * double(i) / double(nth);
            ps.interior.row(j * nth + i) << r * std::cos(th), r * std::sin(th);
          }
        if (counts.boundary != 0 && counts.boundary != 2 * nth)
          throw std::invalid_argument("mesh boundary count must be 2 x ntheta");
        annulus_rings(pb, nth, ps);
      } else {
        ps.interior = random_interior(pb, counts.interior, rng);
        if (counts.boundary <= 0 || counts.boundary % 2 != 0)
          throw std::invalid_argument("annulus boundary count must be positive and even");
        annulus_rings(pb, counts.boundary / 2, ps);
      }
      break;
    }
    case ProblemId::burgers_steady: {
      const Index n = counts.interior;
      if (strategy == SamplingStrategy::mesh) {
        ps.interior.resize(n, 1);
        for (Index i = 0; i < n; ++i) ps.interior(i, 0) = -1.0 + 2.0 * double(i + 1) / double(n + 1);
      } else {
        ps.interior = random_interior(pb, n, rng);
      }
      if (counts.boundary != 0 && counts.boundary != 2)
        throw std::invalid_argument("burgers has exactly two boundary points");
      ps.boundary.resize(2, 1);
      ps.boundary << -1.0, 1.0;
      BoundaryItem left, right;
      left.a = 0;
      left.target = {pb.u_left, 0.0, 0.0};
      right.a = 1;
      right.target = {pb.u_right, 0.0, 0.0};
      ps.boundary_items = {left, right};
      break;
    }
    case ProblemId::cavity: {
      if (strategy == SamplingStrategy::mesh) {
        Index nx = counts.mesh[0];
        Index ny = counts.mesh[1];
        if (nx == 0 && ny == 0) nx = ny = checked_root(counts.interior, 1, "square");
        if (nx * ny != counts.interior)
          throw std::invalid_argument("mesh dimensions do not match the interior count");
        ps.interior.resize(nx * ny, 2);
        for (Index j = 0; j < ny; ++j)
          for (Index i = 0; i < nx; ++i)
            ps.interior.row(j * nx + i) << double(i + 1) / double(nx + 1),
                double(j + 1) / double(ny + 1);
      } else {
        ps.interior = random_interior(pb, counts.interior, rng);
      }
      if (counts.boundary <= 0 || counts.boundary % 4 != 0)
        throw std::invalid_argument("cavity boundary count must be a positive multiple of 4");
      const Index side = counts.boundary / 4;
      ps.boundary.resize(counts.boundary, 2);
      for (Index k = 0; k < side; ++k) {
        const double s = (double(k) + 0.5) / double(side);
        ps.boundary.row(k) << s, 1.0;             // lid
        ps.boundary.row(side + k) << s, 0.0;      // bottom
        ps.boundary.row(2 * side + k) << 0.0, s;  // left
        ps.boundary.row(3 * side + k) << 1.0, s;  // right
      }
      for (Index k = 0; k < counts.boundary; ++k) {
        BoundaryItem item;
        item.a = k;
        if (k < side) item.target = {1.0, 0.0, 0.0};
        ps.boundary_items.push_back(item);
      }
      break;
    }
    case ProblemId::allen_cahn: {
      if (strategy == SamplingStrategy::mesh) {
        Index nx = counts.mesh[0];
        Index nt = counts.mesh[1];
        if (nx == 0 && nt == 0) nx = nt = checked_root(counts.interior, 1, "square");
        if (nx * nt != counts.interior)
          throw std::invalid_argument("mesh dimensions do not match the interior count");
        ps.interior.resize(nx * nt, 2);
        for (Index k = 0; k < nt; ++k)
          for (Index i = 0; i < nx; ++i)
            ps.interior.row(k * nx + i) << -1.0 + 2.0 * double(i + 1) / double(nx + 1),
                double(k + 1) / double(nt);
      } else {
        ps.interior = random_interior(pb, counts.interior, rng);
      }
      if (counts.initial < 2) throw std::invalid_argument("allen-cahn needs >= 2 initial points");
      ps.initial.resize(counts.initial, 2);
      for (Index i = 0; i < counts.initial; ++i)
        ps.initial.row(i) << -1.0 + 2.0 * double(i) / double(counts.initial - 1), 0.0;
      if (counts.boundary < 4 || counts.boundary % 2 != 0)
        throw std::invalid_argument("allen-cahn boundary count must be even and >= 4");
      const Index pairs = counts.boundary / 2;
      ps.boundary.resize(counts.boundary, 2);
      for (Index k = 0; k < pairs; ++k) {
        const double t = double(k) / double(pairs - 1);
        ps.boundary.row(k) << -1.0, t;
        ps.boundary.row(pairs + k) << 1.0, t;
        BoundaryItem item;
        item.kind = BoundaryKind::periodic;
        item.a = k;
        item.b = pairs + k;
        ps.boundary_items.push_back(item);
      }
      break;
    }
  }
  return ps;
}

void resample_interior(const ProblemSpec& pb, PointSet& points, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  points.interior = random_interior(pb, points.interior.rows(), rng);
  points.seed = seed;
}

// ---------------------------------------------------------------------------
// Evaluation grids and references

GridConfig default_grid(const ProblemSpec& pb, bool desk_scale) {
  GridConfig g;
  switch (pb.id) {
    case ProblemId::laplace_cylinder:
      g.dims = desk_scale ? std::array<Index, 2>{100, 50} : std::array<Index, 2>{200, 100};
      break;
    case ProblemId::burgers_steady: g.dims = {500, 0}; break;
    case ProblemId::cavity:
      g.dims = desk_scale ? std::array<Index, 2>{129, 129} : std::array<Index, 2>{500, 500};
      g.oracle_n = desk_scale ? 129 : 257;
      break;
    case ProblemId::allen_cahn:
      g.dims = {257, 101};
      g.oracle_n = 2048;
      g.oracle_steps_per_unit = 100000;
      break;
  }
  return g;
}

Field evaluation_grid(const ProblemSpec& pb, const GridConfig& grid) {
  Field f;
  f.problem = to_string(pb.id);
  f.coordinate_names = pb.coordinate_names();
  const Index a = grid.dims[0];
  const Index b = grid.dims[1];
  switch (pb.id) {
    case ProblemId::laplace_cylinder: {
      if (a < 4 || b < 1) throw std::invalid_argument("laplace grid needs ntheta >= 4, nr >= 1");
      const Index rings = b + 2;
      const double dr = (pb.r_far - pb.r_wall) / double(b + 1);
      f.shape = {a, rings};
      f.coords.resize(a * rings, 2);
      for (Index j = 0; j < rings; ++j)
        for (Index i = 0; i < a; ++i) {
          const double r = pb.r_wall + double(j) * dr;
          const double th = 2.0 * std::numbers::pi * double(i) / double(a);
          f.coords.row(j * a + i) << r * std::cos(th), r * std::sin(th);
        }
      break;
    }
    case ProblemId::burgers_steady: {
      if (a < 1) throw std::invalid_argument("burgers grid needs >= 1 interior node");
      f.shape = {a + 2};
      f.coords.resize(a + 2, 1);
      for (Index i = 0; i < a + 2; ++i) f.coords(i, 0) = -1.0 + 2.0 * double(i) / double(a + 1);
      break;
    }
    case ProblemId::cavity: {
      if (a < 2 || b < 2) throw std::invalid_argument("cavity grid needs >= 2 nodes per side");
      f.shape = {a, b};
      f.coords.resize(a * b, 2);
      for (Index j = 0; j < b; ++j)
        for (Index i = 0; i < a; ++i)
          f.coords.row(j * a + i) << double(i) / double(a - 1), double(j) / double(b - 1);
      break;
    }
    case ProblemId::allen_cahn: {
      if (a < 2 || b < 2) throw std::invalid_argument("allen-cahn grid needs >= 2 nodes per axis");
      f.shape = {a, b};
      f.coords.resize(a * b, 2);
      for (Index k = 0; k < b; ++k)
        for (Index i = 0; i < a; ++i)
          f.coords.row(k * a + i) << -1.0 + 2.0 * double(i) / double(a - 1),
              double(k) / double(b - 1);
      break;
    }
  }
  return f;
}

Field reference_field(const ProblemSpec& pb, const GridConfig& grid) {
  Field f = evaluation_grid(pb, grid);
  f.component_names = pb.observable_names();
  f.values.resize(f.coords.rows(), pb.observable_dim());
  switch (pb.id) {
    case ProblemId::laplace_cylinder:
      f.provenance = "analytic";
      for (Index p = 0; p < f.coords.rows(); ++p) {
        const auto uv = analytic_cylinder_velocity(f.coords(p, 0), f.coords(p, 1), pb.v_inf,
                                                   pb.r_wall);
        f.values.row(p) << uv[0], uv[1];
      }
      break;
    case ProblemId::burgers_steady:
      f.provenance = "analytic";
      for (Index p = 0; p < f.coords.rows(); ++p)
        f.values(p, 0) = oracle::burgers_closed_form(pb.nu, f.coords(p, 0));
      break;
    case ProblemId::cavity: {
      f.provenance = "oracle";
      oracle::CavitySettings cs;
      cs.reynolds = pb.reynolds;
      cs.n = grid.oracle_n > 0 ? grid.oracle_n : grid.dims[0];
      const auto sol = oracle::cavity_fd(cs);
      if (cs.n == grid.dims[0] && cs.n == grid.dims[1]) {
        f.values = sol.field.values.leftCols(2);
      } else {
        f.values = interpolate_bilinear(sol.field, f.coords).leftCols(2);
      }
      f.metadata["oracle_n"] = std::to_string(cs.n);
      f.metadata["oracle_residual"] = std::to_string(sol.residual);
      break;
    }
    case ProblemId::allen_cahn: {
      f.provenance = "oracle";
      oracle::AllenCahnSettings as;
      as.nx = grid.dims[0];
      as.nt = grid.dims[1];
      if (grid.oracle_n > 0) as.cells = grid.oracle_n;
      if (grid.oracle_steps_per_unit > 0) as.steps_per_unit = grid.oracle_steps_per_unit;
      as.diffusivity = pb.ac_diffusivity;
      as.reaction = pb.ac_reaction;
      const auto sol = oracle::allen_cahn_fd(as);
      f.values = sol.field.values;
      f.metadata["oracle_cells"] = std::to_string(as.cells);
      f.metadata["oracle_steps_per_unit"] = std::to_string(as.steps_per_unit);
      break;
    }
  }
  return f;
}

}  // namespace tsonn
