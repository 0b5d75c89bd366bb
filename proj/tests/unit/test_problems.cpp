#include <doctest.h>

#include <numeric>
#include <random>

#include "support/jets.hpp"
#include "tsonn/problems.hpp"

using namespace tsonn;
using test::PointJet;

namespace {

PointMatrix ring(double r, int n) {
  PointMatrix p(n, 2);
  for (int i = 0; i < n; ++i) {
    const double th = 2 * std::numbers::pi * (i + 0.25) / n;
    p.row(i) << r * std::cos(th), r * std::sin(th);
  }
  return p;
}

JetBatch<double> cylinder_jets(const JetLayout& layout, const PointMatrix& pts) {
  return test::make_jets(layout, 1, pts, [](const auto& x, int) {
    return test::cylinder_potential_jet(x[0], x[1], 1.0, 0.5);
  });
}

JetBatch<double> constant_jets(const JetLayout& layout, const PointMatrix& pts, double c,
                               int outputs = 1) {
  return test::make_jets(layout, outputs, pts, [c](const auto&, int) {
    PointJet j;
    j.v = c;
    return j;
  });
}

}  // namespace

TEST_SUITE("problems") {

TEST_CASE("problem ids round-trip") {
  for (auto id : {ProblemId::laplace_cylinder, ProblemId::burgers_steady, ProblemId::cavity,
                  ProblemId::allen_cahn})
    CHECK(parse_problem_id(to_string(id)) == id);
  CHECK_THROWS_AS(parse_problem_id("poisson"), std::invalid_argument);
}

TEST_CASE("default weights") {
  CHECK(make_problem(ProblemId::laplace_cylinder).lambda_bc == 0.1);
  CHECK(make_problem(ProblemId::burgers_steady).lambda_bc == 1.0);
  CHECK(make_problem(ProblemId::cavity).lambda_bc == 1.0);
  const auto ac = make_problem(ProblemId::allen_cahn);
  CHECK(ac.lambda_bc == 1.0);
  CHECK(ac.lambda_ic == 10.0);
  ProblemSpec bad = make_problem(ProblemId::burgers_steady);
  bad.nu = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("laplace residual of the exact potential vanishes") {
  const auto pb = make_problem(ProblemId::laplace_cylinder);
  const PointMatrix pts = ring(2.0, 16);
  const auto res = pde_residual(pb, cylinder_jets(pb.interior_layout(), pts), pts);
  CHECK(res.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("exact potential satisfies wall and far-field conditions") {
  const auto pb = make_problem(ProblemId::laplace_cylinder);
  SampleCounts c;
  c.interior = 8 * 4;
  c.mesh = {8, 4};
  const PointSet ps = sample_points(pb, c, 0, SamplingStrategy::mesh);
  const auto jets = cylinder_jets(pb.boundary_layout(), ps.boundary);
  const auto res = boundary_residual(pb, jets, ps.boundary, ps.boundary_items);
  for (std::size_t k = 0; k < ps.boundary_items.size(); ++k) {
    const auto& it = ps.boundary_items[k];
    if (it.kind == BoundaryKind::wall) {
      CHECK(std::abs(res(Index(k), 0)) < 1e-10);
    } else {
      CHECK(it.kind == BoundaryKind::farfield);
      CHECK(res.row(Index(k)).norm() <= 1.2e-3);
    }
  }
  // And the interior residual on the same mesh.
  const auto r_int = pde_residual(pb, cylinder_jets(pb.interior_layout(), ps.interior),
                                  ps.interior);
  CHECK(r_int.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("wall point without a unit normal is rejected") {
  const auto pb = make_problem(ProblemId::laplace_cylinder);
  PointMatrix pts(1, 2);
  pts << 0.5, 0.0;
  BoundaryItem wall;
  wall.kind = BoundaryKind::wall;
  wall.normal = {0.0, 0.0};
  CHECK_THROWS_AS(boundary_residual(pb, cylinder_jets(pb.boundary_layout(), pts), pts, {wall}),
                  std::invalid_argument);
}

TEST_CASE("burgers residual of a constant is zero") {
  const auto pb = make_problem(ProblemId::burgers_steady);
  PointMatrix x = PointMatrix::Random(10, 1);
  const auto res = pde_residual(pb, constant_jets(pb.interior_layout(), x, 0.7), x);
  CHECK(res.isZero(0));
}

TEST_CASE("burgers sign convention") {
  // u = x: N = -u u_x + nu u_xx = -x.
  const auto pb = make_problem(ProblemId::burgers_steady);
  PointMatrix x(3, 1);
  x << -0.5, 0.1, 0.9;
  const auto jets = test::make_jets(pb.interior_layout(), 1, x, [](const auto& p, int) {
    PointJet j;
    j.v = p[0];
    j.g[0] = 1;
    return j;
  });
  const auto res = pde_residual(pb, jets, x);
  for (Index i = 0; i < 3; ++i) CHECK(res(i, 0) == doctest::Approx(-x(i, 0)));
}

TEST_CASE("allen-cahn equilibria") {
  const auto pb = make_problem(ProblemId::allen_cahn);
  PointMatrix x = PointMatrix::Random(6, 2);
  for (double c : {-1.0, 0.0, 1.0}) {
    const auto res = pde_residual(pb, constant_jets(pb.interior_layout(), x, c), x);
    CHECK(res.cwiseAbs().maxCoeff() == 0.0);
  }
  // u = 0.5: N = -(5/8 - 5/2) = 1.875
  const auto res = pde_residual(pb, constant_jets(pb.interior_layout(), x, 0.5), x);
  CHECK(res(0, 0) == doctest::Approx(1.875));
}

TEST_CASE("cavity: divergence-free jet has zero continuity residual") {
  const auto pb = make_problem(ProblemId::cavity);
  PointMatrix x = PointMatrix::Random(5, 2);
  // u = sin(x) cos(y), v = -cos(x) sin(y), p = x y
  const auto jets = test::make_jets(pb.interior_layout(), 3, x, [](const auto& q, int o) {
    const double sx = std::sin(q[0]), cx = std::cos(q[0]), sy = std::sin(q[1]), cy = std::cos(q[1]);
    PointJet j;
    if (o == 0) {
      j.v = sx * cy;
      j.g = {cx * cy, -sx * sy, 0};
      j.h[0][0] = -sx * cy;
      j.h[1][1] = -sx * cy;
    } else if (o == 1) {
      j.v = -cx * sy;
      j.g = {sx * sy, -cx * cy, 0};
      j.h[0][0] = cx * sy;
      j.h[1][1] = cx * sy;
    } else {
      j.v = q[0] * q[1];
      j.g = {q[1], q[0], 0};
    }
    return j;
  });
  const auto res = pde_residual(pb, jets, x);
  for (Index p = 0; p < x.rows(); ++p) {
    CHECK(res(p, 2) == 0.0);
    // Momentum: -(u u_x + v u_y + p_x - lap u / Re)
    const double X = x(p, 0), Y = x(p, 1);
    const double u = std::sin(X) * std::cos(Y), v = -std::cos(X) * std::sin(Y);
    const double expect = -(u * std::cos(X) * std::cos(Y) + v * (-std::sin(X) * std::sin(Y)) + Y -
                            (-2 * std::sin(X) * std::cos(Y)) / pb.reynolds);
    CHECK(res(p, 0) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("cavity lid condition") {
  const auto pb = make_problem(ProblemId::cavity);
  PointMatrix x(1, 2);
  x << 0.3, 1.0;
  const auto jets = test::make_jets(pb.boundary_layout(), 3, x, [](const auto&, int o) {
    PointJet j;
    j.v = o == 0 ? 1.0 : (o == 1 ? 0.0 : 5.0);
    return j;
  });
  BoundaryItem lid;
  lid.target = {1.0, 0.0, 0.0};
  const auto res = boundary_residual(pb, jets, x, {lid});
  CHECK(res.row(0).isZero(0));
}

TEST_CASE("initial condition targets") {
  const auto pb = make_problem(ProblemId::allen_cahn);
  CHECK(allen_cahn_initial(0.0) == 0.0);
  CHECK(allen_cahn_initial(1.0) == doctest::Approx(-1.0));
  CHECK(std::abs(allen_cahn_initial(0.5)) < 1e-15);
  PointMatrix x(4, 2);
  x << -1, 0, -0.3, 0, 0.5, 0, 0.8, 0;
  const auto res = initial_residual(pb, constant_jets(pb.initial_layout(), x, 0.0), x);
  for (Index i = 0; i < 4; ++i) CHECK(res[i] == doctest::Approx(-allen_cahn_initial(x(i, 0))));
  // Exact match gives zero.
  const auto exact = test::make_jets(pb.initial_layout(), 1, x, [](const auto& q, int) {
    PointJet j;
    j.v = allen_cahn_initial(q[0]);
    return j;
  });
  CHECK(initial_residual(pb, exact, x).isZero(0));
  PointMatrix off = x;
  off(0, 1) = 0.1;
  CHECK_THROWS_AS(initial_residual(pb, constant_jets(pb.initial_layout(), off, 0.0), off),
                  std::invalid_argument);
  const auto burgers = make_problem(ProblemId::burgers_steady);
  PointMatrix b(1, 1);
  b << 0.0;
  CHECK_THROWS_AS(initial_residual(burgers, constant_jets(JetLayout::values(1), b, 0.0), b),
                  std::invalid_argument);
}

TEST_CASE("allen-cahn periodic pairs") {
  const auto pb = make_problem(ProblemId::allen_cahn);
  SampleCounts c;
  c.interior = 100;
  c.initial = 257;
  c.boundary = 202;
  const PointSet ps = sample_points(pb, c, 4, SamplingStrategy::uniform_random);
  REQUIRE(ps.boundary_items.size() == 101);
  for (const auto& it : ps.boundary_items) {
    CHECK(it.kind == BoundaryKind::periodic);
    CHECK(ps.boundary(it.a, 0) == -1.0);
    CHECK(ps.boundary(it.b, 0) == 1.0);
    CHECK(ps.boundary(it.a, 1) == ps.boundary(it.b, 1));
  }
  // Field periodic in x: u = cos(pi x) gives zero residual in both components.
  const auto jets = test::make_jets(pb.boundary_layout(), 1, ps.boundary, [](const auto& q, int) {
    PointJet j;
    j.v = std::cos(std::numbers::pi * q[0]) * (1 + q[1]);
    j.g[0] = -std::numbers::pi * std::sin(std::numbers::pi * q[0]) * (1 + q[1]);
    return j;
  });
  const auto res = boundary_residual(pb, jets, ps.boundary, ps.boundary_items);
  CHECK(res.cwiseAbs().maxCoeff() < 1e-12);
  CHECK(ps.initial.rows() == 257);
  CHECK((ps.initial.col(1).array() == 0.0).all());
}

TEST_CASE("jet without the needed derivatives is rejected") {
  const auto pb = make_problem(ProblemId::burgers_steady);
  PointMatrix x = PointMatrix::Zero(2, 1);
  CHECK_THROWS_AS(pde_residual(pb, constant_jets(JetLayout::first(1), x, 1.0), x),
                  std::invalid_argument);
  const auto cav = make_problem(ProblemId::cavity);
  PointMatrix y = PointMatrix::Zero(2, 2);
  CHECK_THROWS_AS(pde_residual(cav, constant_jets(cav.interior_layout(), y, 1.0, 1), y),
                  std::invalid_argument);
}

TEST_CASE("residuals are local") {
  const auto pb = make_problem(ProblemId::laplace_cylinder);
  const PointMatrix pts = ring(3.0, 12);
  auto jets_fn = [](const auto& q, int) {
    PointJet j;
    j.v = q[0] * q[0] * q[1];
    j.g = {2 * q[0] * q[1], q[0] * q[0], 0};
    j.h[0][0] = 2 * q[1];
    j.h[0][1] = j.h[1][0] = 2 * q[0];
    return j;
  };
  const auto res = pde_residual(pb, test::make_jets(pb.interior_layout(), 1, pts, jets_fn), pts);
  std::vector<Index> perm(12);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(5));
  PointMatrix shuffled(12, 2);
  for (Index i = 0; i < 12; ++i) shuffled.row(i) = pts.row(perm[std::size_t(i)]);
  const auto res2 =
      pde_residual(pb, test::make_jets(pb.interior_layout(), 1, shuffled, jets_fn), shuffled);
  for (Index i = 0; i < 12; ++i) CHECK(res2(i, 0) == res(perm[std::size_t(i)], 0));
}

TEST_CASE("laplace O-mesh 200 x 100") {
  const auto pb = make_problem(ProblemId::laplace_cylinder);
  SampleCounts c;
  c.interior = 20000;
  c.mesh = {200, 100};
  const PointSet ps = sample_points(pb, c, 0, SamplingStrategy::mesh);
  CHECK(ps.interior.rows() == 20000);
  const Eigen::ArrayXd r = ps.interior.rowwise().norm().array();
  CHECK((r > 0.5).all());
  CHECK((r < 15.0).all());
  CHECK(ps.boundary_items.size() == 400);
  for (const auto& it : ps.boundary_items)
    CHECK(std::abs(std::hypot(it.normal[0], it.normal[1]) - 1.0) <= 1e-12);
  // Derived 2:1 factorization.
  SampleCounts d;
  d.interior = 20000;
  CHECK(sample_points(pb, d, 0, SamplingStrategy::mesh).interior.rows() == 20000);
  d.interior = 20001;
  CHECK_THROWS_AS(sample_points(pb, d, 0, SamplingStrategy::mesh), std::invalid_argument);
}

TEST_CASE("sampling is deterministic per seed") {
  const auto pb = make_problem(ProblemId::cavity);
  SampleCounts c;
  c.interior = 500;
  c.boundary = 40;
  const auto a = sample_points(pb, c, 9, SamplingStrategy::uniform_random);
  const auto b = sample_points(pb, c, 9, SamplingStrategy::uniform_random);
  const auto d = sample_points(pb, c, 10, SamplingStrategy::uniform_random);
  CHECK(a.interior == b.interior);
  CHECK(a.boundary == b.boundary);
  CHECK(a.interior != d.interior);
}

TEST_CASE("cavity random points are uniform") {
  const auto pb = make_problem(ProblemId::cavity);
  SampleCounts c;
  c.interior = 20000;
  c.boundary = 2000;
  const auto ps = sample_points(pb, c, 17, SamplingStrategy::uniform_random);
  const double left = double((ps.interior.col(0).array() <= 0.5).count()) / 20000.0;
  CHECK(std::abs(left - 0.5) <= 0.02);
  CHECK((ps.interior.array() > 0.0).all());
  CHECK((ps.interior.array() < 1.0).all());
  // Four sides, lid first.
  CHECK(ps.boundary_items.size() == 2000);
  CHECK(ps.boundary_items[0].target[0] == 1.0);
  CHECK(ps.boundary_items[500].target[0] == 0.0);
}

TEST_CASE("resampling replaces interior points only") {
  const auto pb = make_problem(ProblemId::cavity);
  SampleCounts c;
  c.interior = 100;
  c.boundary = 40;
  auto ps = sample_points(pb, c, 1, SamplingStrategy::uniform_random);
  const auto before = ps;
  resample_interior(pb, ps, 99);
  CHECK(ps.interior.rows() == 100);
  CHECK(ps.interior != before.interior);
  CHECK(ps.boundary == before.boundary);
}

TEST_CASE("analytic cylinder velocity") {
  auto s = analytic_cylinder_velocity(-0.5, 0.0, 1.0, 0.5);
  CHECK(std::abs(s[0]) < 1e-15);
  CHECK(std::abs(s[1]) < 1e-15);
  auto top = analytic_cylinder_velocity(0.0, 0.5, 1.0, 0.5);
  CHECK(top[0] == doctest::Approx(2.0));
  CHECK(std::abs(top[1]) < 1e-15);
  auto far = analytic_cylinder_velocity(1e6, 0.0, 1.0, 0.5);
  CHECK(std::abs(far[0] - 1.0) < 1e-12);
  CHECK(std::abs(far[1]) < 1e-12);
  CHECK_THROWS_AS(analytic_cylinder_velocity(0.0, 0.0, 1.0, 0.5), std::invalid_argument);
  // Potential gradient is the velocity.
  const double h = 1e-6, x = 0.8, y = -1.3;
  const double px = (analytic_cylinder_potential(x + h, y, 1, 0.5) -
                     analytic_cylinder_potential(x - h, y, 1, 0.5)) / (2 * h);
  CHECK(px == doctest::Approx(analytic_cylinder_velocity(x, y, 1, 0.5)[0]).epsilon(1e-8));
}

TEST_CASE("laplace reference on its own grid is harmonic") {
  const auto pb = make_problem(ProblemId::laplace_cylinder);
  GridConfig g;
  g.dims = {40, 20};
  const Field ref = reference_field(pb, g);
  CHECK(ref.coords.rows() == 40 * 22);
  CHECK(ref.shape == std::vector<Index>{40, 22});
  const auto res = pde_residual(pb, cylinder_jets(pb.interior_layout(), ref.coords), ref.coords);
  CHECK(res.cwiseAbs().maxCoeff() < 1e-10);
  for (Index p = 0; p < ref.coords.rows(); ++p) {
    const auto uv = analytic_cylinder_velocity(ref.coords(p, 0), ref.coords(p, 1), 1, 0.5);
    CHECK(ref.values(p, 0) == uv[0]);
  }
}

TEST_CASE("burgers reference is antisymmetric") {
  const auto pb = make_problem(ProblemId::burgers_steady);
  GridConfig g;
  g.dims = {499, 0};
  const Field ref = reference_field(pb, g);
  REQUIRE(ref.coords.rows() == 501);
  CHECK(ref.coords(250, 0) == 0.0);
  CHECK(std::abs(ref.values(250, 0)) < 1e-15);
  CHECK(ref.values(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ref.values(500, 0) == doctest::Approx(-1.0).epsilon(1e-12));
  for (Index i = 0; i < 501; ++i) CHECK(ref.values(i, 0) == doctest::Approx(-ref.values(500 - i, 0)));
}

}
