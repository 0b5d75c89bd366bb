#include "tsonn/oracle.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace tsonn::oracle {

namespace {

using Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// Burgers

double burgers_closed_form_speed(double nu) {
  if (!(nu > 0)) throw std::invalid_argument("viscosity must be positive");
  // f(c) = c tanh(c / 2nu) - 1 is increasing on c > 0 and f(0) = -1, f(2) > 0.
  auto f = [nu](double c) { return c * std::tanh(c / (2.0 * nu)) - 1.0; };
  double lo = 0.0;
  double hi = 2.0;
  while (f(hi) < 0) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) < 0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double burgers_closed_form(double nu, double x) {
  const double c = burgers_closed_form_speed(nu);
  return -c * std::tanh(c * x / (2.0 * nu));
}

double burgers_explicit_bound(double nu, Index n_cells) {
  const double h = 2.0 / double(n_cells);
  return std::min(h * h / (2.0 * nu), 2.0 * nu);
}

GridField burgers_steady_fd(double nu, Index n_cells, double dtau, double tol, long max_steps) {
  if (n_cells < 4) throw std::invalid_argument("burgers_steady_fd needs at least 4 cells");
  const double bound = burgers_explicit_bound(nu, n_cells);
  if (!(dtau > 0) || dtau > bound)
    throw OracleError("pseudo-time step " + fmt(dtau) + " exceeds the explicit bound " +
                      fmt(bound));
  const double h = 2.0 / double(n_cells);
  const Index n = n_cells + 1;
  VectorXd x(n), u(n), rate = VectorXd::Zero(n);
  for (Index i = 0; i < n; ++i) {
    x[i] = -1.0 + double(i) * h;
    u[i] = -x[i];
  }
  u[0] = 1.0;
  u[n - 1] = -1.0;

  GridField out;
  long step = 0;
  double res = 0.0;
  for (; step <= max_steps; ++step) {
    res = 0.0;
    for (Index i = 1; i + 1 < n; ++i) {
      rate[i] = -u[i] * ((u[i + 1] - u[i - 1]) / (2.0 * h)) +
                nu * ((u[i + 1] - 2.0 * u[i] + u[i - 1]) / (h * h));
      res = std::max(res, std::abs(rate[i]));
    }
    if (!rate.allFinite() || !u.allFinite() || u.cwiseAbs().maxCoeff() > 10.0)
      throw OracleError("burgers march became unstable at step " + std::to_string(step) +
                        "; explicit bound is " + fmt(bound));
    if (res < tol) {
      out.converged = true;
      break;
    }
    u += dtau * rate;
  }

  out.residual = res;
  out.iterations = step;
  out.max_stable_dt = bound;
  out.field.problem = "burgers-steady";
  out.field.provenance = "oracle";
  out.field.coordinate_names = {"x"};
  out.field.component_names = {"u"};
  out.field.shape = {n};
  out.field.coords = x;
  out.field.values = u;
  return out;
}

// ---------------------------------------------------------------------------
// Laplace on the polar O-mesh

namespace {

struct PolarMesh {
  Index ntheta, nr;  // nr interior rings; total rings nr + 2
  double r_wall, r_far, dr, dtheta;
  Index rings() const { return nr + 2; }
  Index size() const { return ntheta * rings(); }
  Index node(Index i, Index j) const { return j * ntheta + ((i % ntheta) + ntheta) % ntheta; }
  double radius(Index j) const { return r_wall + double(j) * dr; }
  double angle(Index i) const { return double(i) * dtheta; }
};

PolarMesh make_mesh(Index ntheta, Index nr, double r_wall, double r_far) {
  if (ntheta < 4 || nr < 1) throw std::invalid_argument("polar mesh too small");
  return {ntheta, nr, r_wall, r_far, (r_far - r_wall) / double(nr + 1),
          2.0 * std::numbers::pi / double(ntheta)};
}

// Discrete polar Laplacian with Neumann rings (ghost-node closure). The
// inhomogeneous Neumann data enter through `rhs` so that L phi + rhs = 0.
SparseMatrix polar_laplacian(const PolarMesh& m, const VectorXd* wall_flux,
                             const VectorXd* far_flux, VectorXd* rhs) {
  std::vector<Triplet> t;
  t.reserve(std::size_t(m.size()) * 5);
  if (rhs) *rhs = VectorXd::Zero(m.size());
  const double ar2 = 1.0 / (m.dr * m.dr);
  for (Index j = 0; j < m.rings(); ++j) {
    const double r = m.radius(j);
    const double ar1 = 1.0 / (2.0 * r * m.dr);
    const double at = 1.0 / (r * r * m.dtheta * m.dtheta);
    for (Index i = 0; i < m.ntheta; ++i) {
      const Index k = m.node(i, j);
      t.emplace_back(k, m.node(i - 1, j), at);
      t.emplace_back(k, m.node(i + 1, j), at);
      t.emplace_back(k, k, -2.0 * ar2 - 2.0 * at);
      if (j == 0) {
        t.emplace_back(k, m.node(i, 1), 2.0 * ar2);
        if (rhs && wall_flux) (*rhs)[k] = (*wall_flux)[i] * (-2.0 / m.dr + 1.0 / r);
      } else if (j == m.rings() - 1) {
        t.emplace_back(k, m.node(i, j - 1), 2.0 * ar2);
        if (rhs && far_flux) (*rhs)[k] = (*far_flux)[i] * (2.0 / m.dr + 1.0 / r);
      } else {
        t.emplace_back(k, m.node(i, j + 1), ar2 + ar1);
        t.emplace_back(k, m.node(i, j - 1), ar2 - ar1);
      }
    }
  }
  SparseMatrix L(m.size(), m.size());
  L.setFromTriplets(t.begin(), t.end());
  return L;
}

// Marches e <- e + dt L e and reports whether the perturbation grew.
bool explicit_march_grows(const SparseMatrix& L, double dt, int steps, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  VectorXd e(L.rows());
  for (Index k = 0; k < e.size(); ++k) e[k] = gauss(rng);
  const double start = e.norm();
  VectorXd le(e.size());
  for (int s = 0; s < steps; ++s) {
    le.noalias() = L * e;
    e += dt * le;
    if (!(e.norm() <= 100.0 * start)) return true;
  }
  return false;
}

}  // namespace

double laplace_explicit_bound(Index ntheta, Index nr, double r_wall, double r_far) {
  const PolarMesh m = make_mesh(ntheta, nr, r_wall, r_far);
  const SparseMatrix L = polar_laplacian(m, nullptr, nullptr, nullptr);
  // Gershgorin radius gives a bracket: 2/G is stable, 4/G is not.
  double gersh = 0.0;
  for (Index k = 0; k < L.outerSize(); ++k) {
    double row = 0.0;
    for (SparseMatrix::InnerIterator it(L, k); it; ++it) row += std::abs(it.value());
    gersh = std::max(gersh, row);
  }
  double lo = 1.0 / gersh;
  double hi = 4.0 / gersh;
  const int steps = 4000;
  while (!explicit_march_grows(L, hi, steps, 7)) {
    lo = hi;
    hi *= 2.0;
  }
  while (hi / lo > 1.002) {
    const double mid = std::sqrt(lo * hi);
    (explicit_march_grows(L, mid, steps, 7) ? hi : lo) = mid;
  }
  return lo;
}

GridField laplace_annulus_fd(Index ntheta, Index nr, FarField far, double v_inf, double r_wall,
                             double r_far, bool measure_stability) {
  const PolarMesh m = make_mesh(ntheta, nr, r_wall, r_far);
  VectorXd wall_flux = VectorXd::Zero(ntheta);
  VectorXd far_flux(ntheta);
  for (Index i = 0; i < ntheta; ++i) {
    const double c = std::cos(m.angle(i));
    far_flux[i] = far == FarField::freestream
                      ? v_inf * c
                      : v_inf * (1.0 - r_wall * r_wall / (r_far * r_far)) * c;
  }
  VectorXd rhs;
  SparseMatrix L = polar_laplacian(m, &wall_flux, &far_flux, &rhs);
  VectorXd b = -rhs;

  // Pure Neumann problem: pin the potential at one wall node.
  const Index pin = m.node(0, 0);
  const double pin_value =
      far == FarField::analytic ? analytic_cylinder_potential(r_wall, 0.0, v_inf, r_wall) : 0.0;
  L.prune([pin](Index row, Index, double) { return row != pin; });
  L.coeffRef(pin, pin) = 1.0;
  b[pin] = pin_value;
  L.makeCompressed();

  Eigen::SparseLU<SparseMatrix> lu;
  lu.compute(L);
  if (lu.info() != Eigen::Success) throw OracleError("laplace system factorization failed");
  const VectorXd phi = lu.solve(b);
  if (lu.info() != Eigen::Success || !phi.allFinite())
    throw OracleError("laplace system solve failed");

  GridField out;
  out.residual = (L * phi - b).lpNorm<Eigen::Infinity>();
  out.iterations = 1;
  out.converged = true;
  Field& f = out.field;
  f.problem = "laplace-cylinder";
  f.provenance = "oracle";
  f.coordinate_names = {"x", "y"};
  f.component_names = {"u", "v", "phi"};
  f.shape = {ntheta, m.rings()};
  f.coords.resize(m.size(), 2);
  f.values.resize(m.size(), 3);
  for (Index j = 0; j < m.rings(); ++j) {
    const double r = m.radius(j);
    for (Index i = 0; i < ntheta; ++i) {
      const Index k = m.node(i, j);
      const double th = m.angle(i);
      double phi_r;
      if (j == 0)
        phi_r = wall_flux[i];
      else if (j == m.rings() - 1)
        phi_r = far_flux[i];
      else
        phi_r = (phi[m.node(i, j + 1)] - phi[m.node(i, j - 1)]) / (2.0 * m.dr);
      const double phi_t = (phi[m.node(i + 1, j)] - phi[m.node(i - 1, j)]) / (2.0 * m.dtheta);
      f.coords(k, 0) = r * std::cos(th);
      f.coords(k, 1) = r * std::sin(th);
      f.values(k, 0) = std::cos(th) * phi_r - std::sin(th) * phi_t / r;
      f.values(k, 1) = std::sin(th) * phi_r + std::cos(th) * phi_t / r;
      f.values(k, 2) = phi[k];
    }
  }
  if (measure_stability) out.max_stable_dt = laplace_explicit_bound(ntheta, nr, r_wall, r_far);
  return out;
}

// ---------------------------------------------------------------------------
// Allen-Cahn

GridField allen_cahn_fd(const AllenCahnSettings& s) {
  if (s.nx < 2 || s.nt < 2) throw std::invalid_argument("allen_cahn_fd output grid too small");
  if (s.cells % (s.nx - 1) != 0)
    throw std::invalid_argument("allen_cahn_fd: cells must be a multiple of nx - 1");
  if (s.steps_per_unit % (s.nt - 1) != 0)
    throw std::invalid_argument("allen_cahn_fd: steps_per_unit must be a multiple of nt - 1");
  const Index m = s.cells;
  const double h = 2.0 / double(m);
  const double dt = 1.0 / double(s.steps_per_unit);

  VectorXd u(m);
  for (Index i = 0; i < m; ++i) u[i] = allen_cahn_initial(-1.0 + double(i) * h);

  // (I - dt D L) u_{n+1} = u_n + dt k (u_n - u_n^3), L periodic.
  std::vector<Triplet> t;
  const double a = dt * s.diffusivity / (h * h);
  for (Index i = 0; i < m; ++i) {
    t.emplace_back(i, i, 1.0 + 2.0 * a);
    t.emplace_back(i, (i + 1) % m, -a);
    t.emplace_back(i, (i + m - 1) % m, -a);
  }
  SparseMatrix A(m, m);
  A.setFromTriplets(t.begin(), t.end());
  Eigen::SparseLU<SparseMatrix> lu;
  lu.compute(A);
  if (lu.info() != Eigen::Success) throw OracleError("allen-cahn factorization failed");

  GridField out;
  Field& f = out.field;
  f.problem = "allen-cahn";
  f.provenance = "oracle";
  f.coordinate_names = {"x", "t"};
  f.component_names = {"u"};
  f.shape = {s.nx, s.nt};
  f.coords.resize(s.nx * s.nt, 2);
  f.values.resize(s.nx * s.nt, 1);
  const Index stride = m / (s.nx - 1);
  const Index steps_per_slice = s.steps_per_unit / (s.nt - 1);
  auto record = [&](Index slice) {
    const double time = double(slice) / double(s.nt - 1);
    for (Index i = 0; i < s.nx; ++i) {
      const Index row = slice * s.nx + i;
      f.coords(row, 0) = -1.0 + 2.0 * double(i) / double(s.nx - 1);
      f.coords(row, 1) = time;
      f.values(row, 0) = u[(i * stride) % m];
    }
  };
  record(0);
  // The t = 0 slice is the initial profile itself, end points included.
  for (Index i = 0; i < s.nx; ++i) f.values(i, 0) = allen_cahn_initial(f.coords(i, 0));

  VectorXd rhs(m);
  long step = 0;
  for (Index slice = 1; slice < s.nt; ++slice) {
    for (Index k = 0; k < steps_per_slice; ++k, ++step) {
      rhs = u.array() + dt * s.reaction * (u.array() - u.array().cube());
      u = lu.solve(rhs);
      const double peak = u.cwiseAbs().maxCoeff();
      if (!(peak <= 1.0 + 1e-6))
        throw OracleError("allen-cahn step rejected: max|u| = " + fmt(peak) + " at step " +
                          std::to_string(step) + "; reduce the time step");
    }
    record(slice);
  }
  out.iterations = step;
  out.converged = true;
  out.residual = 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// Lid-driven cavity

GridField cavity_fd(const CavitySettings& s) {
  if (s.reynolds > 1000.0)
    throw std::invalid_argument("cavity_fd supports Re <= 1000 only");
  if (s.n < 5) throw std::invalid_argument("cavity grid too small");
  const Index n = s.n;
  const Index ni = n - 2;
  const double h = 1.0 / double(n - 1);
  const double nu = 1.0 / s.reynolds;
  // Thom's lagged wall vorticity goes unstable once dt nu / h^2 is well above 1.
  const double dt = s.dt > 0 ? s.dt : std::min({1.0 / s.reynolds, h, h * h / nu});
  const double lid = 1.0;

  auto interior = [ni](Index i, Index j) { return (j - 1) * ni + (i - 1); };
  auto node = [n](Index i, Index j) { return j * n + i; };

  // -lap_h on interior nodes with homogeneous Dirichlet closure.
  std::vector<Triplet> t;
  for (Index j = 1; j <= ni; ++j)
    for (Index i = 1; i <= ni; ++i) {
      const Index k = interior(i, j);
      t.emplace_back(k, k, 4.0 / (h * h));
      if (i > 1) t.emplace_back(k, interior(i - 1, j), -1.0 / (h * h));
      if (i < ni) t.emplace_back(k, interior(i + 1, j), -1.0 / (h * h));
      if (j > 1) t.emplace_back(k, interior(i, j - 1), -1.0 / (h * h));
      if (j < ni) t.emplace_back(k, interior(i, j + 1), -1.0 / (h * h));
    }
  SparseMatrix neg_lap(ni * ni, ni * ni);
  neg_lap.setFromTriplets(t.begin(), t.end());
  SparseMatrix diffusion(ni * ni, ni * ni);
  diffusion.setIdentity();
  diffusion += (dt * nu) * neg_lap;

  Eigen::SimplicialLDLT<SparseMatrix> poisson(neg_lap);
  Eigen::SimplicialLDLT<SparseMatrix> implicit(diffusion);
  if (poisson.info() != Eigen::Success || implicit.info() != Eigen::Success)
    throw OracleError("cavity factorization failed");

  VectorXd psi = VectorXd::Zero(n * n);
  VectorXd omega = VectorXd::Zero(n * n);
  VectorXd w(ni * ni), rhs(ni * ni), sol(ni * ni);

  auto solve_psi = [&]() {
    for (Index j = 1; j <= ni; ++j)
      for (Index i = 1; i <= ni; ++i) w[interior(i, j)] = omega[node(i, j)];
    sol = poisson.solve(w);
    for (Index j = 1; j <= ni; ++j)
      for (Index i = 1; i <= ni; ++i) psi[node(i, j)] = sol[interior(i, j)];
  };
  // Thom's wall vorticity.
  auto wall_vorticity = [&]() {
    for (Index i = 1; i < n - 1; ++i) {
      omega[node(i, 0)] = -2.0 * psi[node(i, 1)] / (h * h);
      omega[node(i, n - 1)] = -2.0 * (psi[node(i, n - 2)] + h * lid) / (h * h);
    }
    for (Index j = 1; j < n - 1; ++j) {
      omega[node(0, j)] = -2.0 * psi[node(1, j)] / (h * h);
      omega[node(n - 1, j)] = -2.0 * psi[node(n - 2, j)] / (h * h);
    }
  };

  GridField out;
  double res = 0.0;
  long step = 0;
  for (; step < s.max_steps; ++step) {
    solve_psi();
    wall_vorticity();
    for (Index j = 1; j <= ni; ++j)
      for (Index i = 1; i <= ni; ++i) {
        const double u = (psi[node(i, j + 1)] - psi[node(i, j - 1)]) / (2.0 * h);
        const double v = -(psi[node(i + 1, j)] - psi[node(i - 1, j)]) / (2.0 * h);
        const double wx = (omega[node(i + 1, j)] - omega[node(i - 1, j)]) / (2.0 * h);
        const double wy = (omega[node(i, j + 1)] - omega[node(i, j - 1)]) / (2.0 * h);
        double r = omega[node(i, j)] - dt * (u * wx + v * wy);
        const double c = dt * nu / (h * h);
        if (i == 1) r += c * omega[node(0, j)];
        if (i == ni) r += c * omega[node(n - 1, j)];
        if (j == 1) r += c * omega[node(i, 0)];
        if (j == ni) r += c * omega[node(i, n - 1)];
        rhs[interior(i, j)] = r;
      }
    sol = implicit.solve(rhs);
    res = 0.0;
    for (Index j = 1; j <= ni; ++j)
      for (Index i = 1; i <= ni; ++i) {
        const double nw = sol[interior(i, j)];
        const double d = std::abs(nw - omega[node(i, j)]) / dt;
        if (std::isnan(d) || d > res) res = d;
        omega[node(i, j)] = nw;
      }
    if (!std::isfinite(res)) throw OracleError("cavity relaxation diverged");
    if (res < s.tol) {
      out.converged = true;
      ++step;
      break;
    }
  }
  solve_psi();
  wall_vorticity();
  if (!out.converged)
    throw OracleError("cavity relaxation did not converge: residual " + fmt(res) + " after " +
                      std::to_string(step) + " steps");

  out.residual = res;
  out.iterations = step;
  Field& f = out.field;
  f.problem = "cavity";
  f.provenance = "oracle";
  f.coordinate_names = {"x", "y"};
  f.component_names = {"u", "v", "psi", "omega"};
  f.shape = {n, n};
  f.coords.resize(n * n, 2);
  f.values = Eigen::MatrixXd::Zero(n * n, 4);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i) {
      const Index k = node(i, j);
      f.coords(k, 0) = double(i) * h;
      f.coords(k, 1) = double(j) * h;
      double u = 0.0;
      double v = 0.0;
      if (i > 0 && i < n - 1 && j > 0 && j < n - 1) {
        u = (psi[node(i, j + 1)] - psi[node(i, j - 1)]) / (2.0 * h);
        v = -(psi[node(i + 1, j)] - psi[node(i - 1, j)]) / (2.0 * h);
      } else if (j == n - 1 && i > 0 && i < n - 1) {
        u = lid;
      }
      f.values(k, 0) = u;
      f.values(k, 1) = v;
      f.values(k, 2) = psi[k];
      f.values(k, 3) = omega[k];
    }
  return out;
}

double cavity_mass_flux(const GridField& cavity, Index row) {
  const Index n = cavity.field.shape.at(0);
  const auto& psi = cavity.field.values.col(2);
  // v = -d psi/dx on faces; summing face fluxes h * v telescopes.
  double flux = 0.0;
  for (Index i = 0; i + 1 < n; ++i) flux += -(psi[row * n + i + 1] - psi[row * n + i]);
  return flux;
}

// ---------------------------------------------------------------------------

std::vector<GridField> explicit_euler_trajectory(const ProblemSpec& problem,
                                                 const Field& initial, double dtau,
                                                 int steps) {
  if (problem.id != ProblemId::burgers_steady)
    throw std::invalid_argument("explicit_euler_trajectory supports burgers-steady only");
  const Index n = initial.coords.rows();
  if (n < 3 || initial.coords.cols() != 1 || initial.values.cols() != 1)
    throw std::invalid_argument("explicit_euler_trajectory needs a 1-D scalar field");
  const double h = (initial.coords(n - 1, 0) - initial.coords(0, 0)) / double(n - 1);
  for (Index i = 1; i < n; ++i)
    if (std::abs(initial.coords(i, 0) - initial.coords(i - 1, 0) - h) > 1e-9 * std::abs(h))
      throw std::invalid_argument("explicit_euler_trajectory needs uniformly spaced nodes");

  std::vector<GridField> states;
  states.reserve(std::size_t(steps) + 1);
  GridField current;
  current.field = initial;
  current.field.provenance = "oracle";
  states.push_back(current);
  const double nu = problem.nu;
  VectorXd u = initial.values.col(0);
  VectorXd next = u;
  for (int s = 0; s < steps; ++s) {
    double res = 0.0;
    for (Index i = 1; i + 1 < n; ++i) {
      const double rate = -u[i] * ((u[i + 1] - u[i - 1]) / (2.0 * h)) +
                          nu * ((u[i + 1] - 2.0 * u[i] + u[i - 1]) / (h * h));
      next[i] = u[i] + dtau * rate;
      res = std::max(res, std::abs(rate));
    }
    u = next;
    current.field.values.col(0) = u;
    current.residual = res;
    current.iterations = s + 1;
    states.push_back(current);
  }
  return states;
}

}  // namespace tsonn::oracle
