#include <doctest.h>

#include <random>

#include "support/fd.hpp"
#include "support/table_model.hpp"
#include "tsonn/oracle.hpp"
#include "tsonn/trainer.hpp"

using namespace tsonn;

namespace {

PointSet burgers_points(Index m) {
  SampleCounts c;
  c.interior = m;
  c.boundary = 2;
  return sample_points(make_problem(ProblemId::burgers_steady), c, 0, SamplingStrategy::mesh);
}

// Table model over the mesh of burgers_points(m), boundary nodes fixed at the
// Dirichlet values.
test::TableModel table(Index m) { return test::TableModel(-1.0, 1.0, m, 1.0, -1.0); }

Field table_field(const PointSet& ps, const Vector<double>& theta) {
  const Index m = ps.interior.rows();
  Field f;
  f.coords.resize(m + 2, 1);
  f.values.resize(m + 2, 1);
  f.coords(0, 0) = -1.0;
  f.values(0, 0) = 1.0;
  f.coords(m + 1, 0) = 1.0;
  f.values(m + 1, 0) = -1.0;
  for (Index i = 0; i < m; ++i) {
    f.coords(i + 1, 0) = ps.interior(i, 0);
    f.values(i + 1, 0) = theta[i];
  }
  return f;
}

TrainConfig<double> exact_fit_config(Index m, double dtau, int steps) {
  TrainConfig<double> cfg;
  cfg.mode = Mode::etsonn;
  cfg.dtau = dtau;
  cfg.inner = 1;
  cfg.outer = steps;
  cfg.optimizer = OptimizerKind::sgd;
  // One gradient step of mean (u - label)^2 / dtau^2 lands on the label.
  cfg.sgd_lr = double(m) * dtau * dtau / 2.0;
  return cfg;
}

struct Setup {
  ProblemSpec pb;
  NetworkShape shape;
  PointSet ps;
};

Setup small_burgers() {
  Setup s{make_problem(ProblemId::burgers_steady), {1, 1, 2, 8}, burgers_points(40)};
  return s;
}

double program_loss(const Mlp<double>& net, const Setup& s, Mode mode, double dtau,
                    const Vector<double>& theta, const Vector<double>& snapshot) {
  LossProgram<Mlp<double>> lp(net, s.pb, s.ps, mode, dtau);
  if (mode == Mode::etsonn) lp.bind_labels(explicit_labels(net, snapshot, s.ps, s.pb, dtau));
  if (mode == Mode::itsonn) lp.bind_anchor(snapshot_values(net, snapshot, s.ps, s.pb));
  return lp.evaluate(theta, nullptr).total;
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("config validation") {
  TrainConfig<double> c;
  CHECK_NOTHROW(c.validate());
  c.inner = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.dtau = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c.mode = Mode::pinn;
  CHECK_NOTHROW(c.validate());
  CHECK(parse_optimizer("lbfgs") == OptimizerKind::lbfgs);
  CHECK_THROWS_AS(parse_optimizer("sgd2"), std::invalid_argument);
  CHECK_THROWS_AS(parse_mode("tsonn"), std::invalid_argument);
}

TEST_CASE("label at a fixed point is the current value") {
  // A constant state with matching ends has N = 0 exactly.
  const Index m = 9;
  const auto ps = burgers_points(m);
  const auto pb = make_problem(ProblemId::burgers_steady);
  test::TableModel flat(-1.0, 1.0, m, 0.25, 0.25);
  const Vector<double> theta = Vector<double>::Constant(m, 0.25);
  const auto labels = explicit_labels(flat, theta, ps, pb, 0.7);
  for (Index p = 0; p < m; ++p) CHECK(labels(0, p) == 0.25);
}

TEST_CASE("label arithmetic: u = 1, N = 2, dtau = 0.1 gives 1.2") {
  const auto pb = make_problem(ProblemId::burgers_steady);
  const auto ps = burgers_points(1);
  // Ends 3 and -1 around a single node at x = 0 (h = 1): u_x = -2 and
  // u_xx = 2 - 2u, so N(1) = 2.
  test::TableModel tm(-1.0, 1.0, 1, 3.0, -1.0);
  Vector<double> theta(1);
  theta << 1.0;
  const auto labels = explicit_labels(tm, theta, ps, pb, 0.1);
  CHECK(labels(0, 0) == doctest::Approx(1.2).epsilon(1e-15));
}

TEST_CASE("single point with N = 2 has loss 4 in every mode at the snapshot") {
  auto pb = make_problem(ProblemId::burgers_steady);
  pb.lambda_bc = 0;
  const auto ps = burgers_points(1);
  test::TableModel tm(-1.0, 1.0, 1, 3.0, -1.0);
  Vector<double> theta(1);
  theta << 1.0;
  for (Mode mode : {Mode::pinn, Mode::etsonn, Mode::itsonn}) {
    LossProgram<test::TableModel> lp(tm, pb, ps, mode, 0.1);
    if (mode == Mode::etsonn) lp.bind_labels(explicit_labels(tm, theta, ps, pb, 0.1));
    if (mode == Mode::itsonn) lp.bind_anchor(snapshot_values(tm, theta, ps, pb));
    CHECK(lp.evaluate(theta, nullptr).total == doctest::Approx(4.0).epsilon(1e-12));
  }
}

TEST_CASE("loss equality at the snapshot on every problem") {
  std::mt19937_64 rng(7);
  for (auto id : {ProblemId::laplace_cylinder, ProblemId::burgers_steady, ProblemId::cavity,
                  ProblemId::allen_cahn}) {
    const auto pb = make_problem(id);
    SampleCounts c;
    c.interior = 30;
    c.boundary = id == ProblemId::burgers_steady ? 2 : 12;
    c.initial = 6;
    const auto ps = sample_points(pb, c, 3, SamplingStrategy::uniform_random);
    const NetworkShape shape{pb.input_dim(), pb.state_dim(), 2, 8};
    const Mlp<double> net(shape);
    const auto theta = init_parameters<double>(shape, rng());
    const Setup s{pb, shape, ps};
    for (double dtau : {1e-3, 0.3, 50.0}) {
      const double lp = program_loss(net, s, Mode::pinn, dtau, theta, theta);
      const double le = program_loss(net, s, Mode::etsonn, dtau, theta, theta);
      const double li = program_loss(net, s, Mode::itsonn, dtau, theta, theta);
      CHECK(std::abs(le - lp) <= 1e-12 * lp);
      CHECK(std::abs(li - lp) <= 1e-12 * lp);
    }
  }
}

TEST_CASE("large dtau: iTSONN loss approaches the PINN loss") {
  const auto s = small_burgers();
  const Mlp<double> net(s.shape);
  const auto snap = init_parameters<double>(s.shape, 1);
  const auto theta = init_parameters<double>(s.shape, 2);
  const double lp = program_loss(net, s, Mode::pinn, 1.0, theta, snap);
  const double li = program_loss(net, s, Mode::itsonn, 1e6, theta, snap);
  CHECK(std::abs(li - lp) <= 1e-5 * lp);
}

TEST_CASE("TS interior term at the snapshot does not depend on dtau") {
  const auto s = small_burgers();
  const Mlp<double> net(s.shape);
  const auto theta = init_parameters<double>(s.shape, 4);
  const double a = program_loss(net, s, Mode::itsonn, 0.01, theta, theta);
  const double b = program_loss(net, s, Mode::itsonn, 10.0, theta, theta);
  CHECK(std::abs(a - b) <= 1e-12 * a);
}

TEST_CASE("loss gradients match finite differences in all modes") {
  const auto s = small_burgers();
  const Mlp<double> net(s.shape);
  const auto snap = init_parameters<double>(s.shape, 8);
  const auto theta = init_parameters<double>(s.shape, 9);
  for (Mode mode : {Mode::pinn, Mode::etsonn, Mode::itsonn}) {
    LossProgram<Mlp<double>> lp(net, s.pb, s.ps, mode, 0.2);
    if (mode == Mode::etsonn) lp.bind_labels(explicit_labels(net, snap, s.ps, s.pb, 0.2));
    if (mode == Mode::itsonn) lp.bind_anchor(snapshot_values(net, snap, s.ps, s.pb));
    Vector<double> g;
    lp.evaluate(theta, &g);
    const auto fd = test::central_gradient(
        [&](const Vector<double>& q) { return double(lp.evaluate(q, nullptr).total); }, theta,
        1e-6);
    CHECK(test::max_rel_error(g, fd) < 1e-5);
  }
}

TEST_CASE("evaluating a TS program without its snapshot data is an error") {
  const auto s = small_burgers();
  const Mlp<double> net(s.shape);
  const auto theta = init_parameters<double>(s.shape, 1);
  LossProgram<Mlp<double>> lp(net, s.pb, s.ps, Mode::itsonn, 0.1);
  CHECK_THROWS_AS(lp.evaluate(theta, nullptr), std::logic_error);
  CHECK_THROWS_AS(LossProgram<Mlp<double>>(net, s.pb, s.ps, Mode::etsonn, 0.0),
                  std::invalid_argument);
}

TEST_CASE("exact-fit table reproduces explicit Euler below the stability bound") {
  const Index m = 100;
  const auto ps = burgers_points(m);
  const auto tm = table(m);
  const auto pb = make_problem(ProblemId::burgers_steady);
  Vector<double> theta(m);
  for (Index i = 0; i < m; ++i) theta[i] = -ps.interior(i, 0);
  const double dtau = 0.5 * oracle::burgers_explicit_bound(pb.nu, m + 1);
  const auto traj = oracle::explicit_euler_trajectory(pb, table_field(ps, theta), dtau, 50);
  Trainer<test::TableModel> tr(tm, pb, ps, exact_fit_config(m, dtau, 50), theta);
  for (int step = 1; step <= 50; ++step) {
    tr.step_outer();
    double err = 0;
    for (Index i = 0; i < m; ++i)
      err = std::max(err, std::abs(tr.params()[i] - traj[std::size_t(step)].field.values(i + 1, 0)));
    CHECK(err <= 1e-10);
    if (step < 50) CHECK(tr.snapshot().params() == tr.params());
  }
  CHECK(tr.history().status == RunStatus::completed);
}

TEST_CASE("snapshot equals theta after each outer update; points fixed without resampling") {
  const auto s = small_burgers();
  const Mlp<double> net(s.shape);
  TrainConfig<double> cfg;
  cfg.inner = 5;
  cfg.outer = 3;
  Trainer<Mlp<double>> tr(net, s.pb, s.ps, cfg, init_parameters<double>(s.shape, 1));
  const PointMatrix before = tr.points().interior;
  tr.step_outer();
  CHECK(tr.snapshot().params() == tr.params());
  CHECK(tr.snapshot().outer_index() == 1);
  CHECK(tr.points().interior == before);
  tr.run();
  CHECK(tr.history().status == RunStatus::completed);
  CHECK(tr.history().rows.size() == 15);
}

TEST_CASE("resampling replaces interior points at outer boundaries") {
  const auto pb = make_problem(ProblemId::burgers_steady);
  SampleCounts c;
  c.interior = 30;
  c.boundary = 2;
  const auto ps = sample_points(pb, c, 5, SamplingStrategy::uniform_random);
  const NetworkShape shape{1, 1, 1, 6};
  const Mlp<double> net(shape);
  TrainConfig<double> cfg;
  cfg.inner = 2;
  cfg.outer = 3;
  cfg.resample_on_outer = true;
  cfg.seed = 5;
  Trainer<Mlp<double>> tr(net, pb, ps, cfg, init_parameters<double>(shape, 1));
  tr.step_outer();
  CHECK(tr.points().interior != ps.interior);
  CHECK(tr.points().boundary == ps.boundary);
}

TEST_CASE("L-BFGS restarts with steepest descent after an outer update") {
  const auto s = small_burgers();
  const Mlp<double> net(s.shape);
  TrainConfig<double> cfg;
  cfg.optimizer = OptimizerKind::lbfgs;
  cfg.inner = 4;
  cfg.outer = 2;
  Trainer<Mlp<double>> tr(net, s.pb, s.ps, cfg, init_parameters<double>(s.shape, 3));
  tr.step_outer();
  CHECK(tr.lbfgs().history_size() > 1);
  const Vector<double> snap = tr.params();
  // Gradient the second outer iteration starts from.
  LossProgram<Mlp<double>> lp(net, s.pb, s.ps, Mode::itsonn, cfg.dtau);
  lp.bind_anchor(snapshot_values(net, snap, s.ps, s.pb));
  Vector<double> g;
  lp.evaluate(snap, &g);

  TrainConfig<double> one = cfg;
  one.outer = 1;
  one.inner = 1;
  Trainer<Mlp<double>> first(net, s.pb, s.ps, one, snap);
  first.step_outer();
  CHECK((first.lbfgs().last_direction() + g).norm() <= 1e-12 * g.norm());
  // Reset at the boundary: the second outer iteration retraces a fresh run.
  one.inner = cfg.inner;
  Trainer<Mlp<double>> fresh(net, s.pb, s.ps, one, snap);
  fresh.step_outer();
  tr.step_outer();
  CHECK(tr.params() == fresh.params());
}

TEST_CASE("PINN ignores the outer/inner split") {
  const auto s = small_burgers();
  const Mlp<double> net(s.shape);
  const auto theta0 = init_parameters<double>(s.shape, 6);
  auto losses = [&](int outer, int inner) {
    TrainConfig<double> cfg;
    cfg.mode = Mode::pinn;
    cfg.outer = outer;
    cfg.inner = inner;
    Trainer<Mlp<double>> tr(net, s.pb, s.ps, cfg, theta0);
    tr.run();
    std::vector<double> out;
    for (const auto& r : tr.history().rows) out.push_back(r.loss_total);
    return out;
  };
  CHECK(losses(5, 20) == losses(1, 100));
}

TEST_CASE("iTSONN at dtau = 1e9 tracks PINN") {
  // Random points: on a mirror-symmetric mesh the zero-bias network is odd
  // and Adam blows rounding noise in the symmetric directions up to O(lr)
  // steps, which swamps the 1/dtau term this test is about.
  const auto pb = make_problem(ProblemId::burgers_steady);
  SampleCounts c;
  c.interior = 60;
  c.boundary = 2;
  const auto ps = sample_points(pb, c, 2, SamplingStrategy::uniform_random);
  const NetworkShape shape{1, 1, 2, 8};
  const Mlp<double> net(shape);
  const auto theta0 = init_parameters<double>(shape, 6);
  auto losses = [&](Mode mode) {
    TrainConfig<double> cfg;
    cfg.mode = mode;
    cfg.dtau = 1e9;
    cfg.outer = 1;
    cfg.inner = 100;
    Trainer<Mlp<double>> tr(net, pb, ps, cfg, theta0);
    tr.run();
    std::vector<double> out;
    for (const auto& r : tr.history().rows) out.push_back(r.loss_total);
    return out;
  };
  const auto a = losses(Mode::pinn), b = losses(Mode::itsonn);
  REQUIRE(a.size() == 100);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-6 * a[i]);
}

TEST_CASE("divergence is recorded at the first bad loss") {
  const Index m = 100;
  const auto ps = burgers_points(m);
  const auto tm = table(m);
  const auto pb = make_problem(ProblemId::burgers_steady);
  Vector<double> theta(m);
  for (Index i = 0; i < m; ++i) theta[i] = -ps.interior(i, 0);
  // Ten times the explicit bound: the exact-fit run must blow up.
  const double dtau = 10 * oracle::burgers_explicit_bound(pb.nu, m + 1);
  Trainer<test::TableModel> tr(tm, pb, ps, exact_fit_config(m, dtau, 500), theta);
  const auto& h = tr.run();
  REQUIRE(h.status == RunStatus::diverged);
  CHECK(long(h.rows.size()) == h.iterations);
  CHECK(h.divergence_iter == h.rows.back().iter);
  const double first = h.rows.front().loss_total;
  for (std::size_t i = 0; i + 1 < h.rows.size(); ++i) {
    CHECK(std::isfinite(h.rows[i].loss_total));
    CHECK(h.rows[i].loss_total <= 1e6 * first);
  }
  const double last = h.rows.back().loss_total;
  CHECK((!std::isfinite(last) || last > 1e6 * first));
  CHECK(tr.params().size() == m);  // parameters kept for postmortem
}

TEST_CASE("history rows: monotone indices and rel_l2 once per outer iteration") {
  const auto s = small_burgers();
  const Mlp<double> net(s.shape);
  TrainConfig<double> cfg;
  cfg.inner = 4;
  cfg.outer = 3;
  Trainer<Mlp<double>> tr(net, s.pb, s.ps, cfg, init_parameters<double>(s.shape, 1));
  int calls = 0;
  tr.set_error_function([&](const Vector<double>&) { return double(++calls); });
  const auto& h = tr.run();
  REQUIRE(h.rows.size() == 12);
  for (std::size_t i = 0; i < h.rows.size(); ++i) {
    CHECK(h.rows[i].iter == long(i));
    CHECK(h.rows[i].outer_n == int(i / 4));
    CHECK(h.rows[i].inner_k == int(i % 4));
    CHECK(h.rows[i].rel_l2.has_value() == (i % 4 == 3));
    if (i > 0) CHECK(h.rows[i].wall_time_s >= h.rows[i - 1].wall_time_s);
  }
  CHECK(calls == 3);
}

TEST_CASE("history cadence thins rows but keeps the last of each outer") {
  const auto s = small_burgers();
  const Mlp<double> net(s.shape);
  TrainConfig<double> cfg;
  cfg.inner = 10;
  cfg.outer = 2;
  cfg.history_every = 4;
  Trainer<Mlp<double>> tr(net, s.pb, s.ps, cfg, init_parameters<double>(s.shape, 1));
  const auto& h = tr.run();
  CHECK(h.iterations == 20);
  std::vector<int> ks;
  for (const auto& r : h.rows) ks.push_back(r.inner_k);
  CHECK(ks == std::vector<int>{0, 4, 8, 9, 0, 4, 8, 9});
}

TEST_CASE("wrong parameter count is rejected") {
  const auto s = small_burgers();
  const Mlp<double> net(s.shape);
  CHECK_THROWS_AS(Trainer<Mlp<double>>(net, s.pb, s.ps, TrainConfig<double>{}, Vector<double>(3)),
                  std::invalid_argument);
}

}
