#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "tsonn/field.hpp"
#include "tsonn/problems.hpp"

namespace tsonn::oracle {

class OracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GridField {
  Field field;
  double residual = 0.0;     // terminal residual norm
  long iterations = 0;
  bool converged = false;
  double max_stable_dt = 0.0;  // explicit pseudo-time bound where measured
};

// Steady viscous Burgers -u u_x + nu u_xx = 0 on [-1, 1], u(-1) = 1,
// u(1) = -1 has the closed form u = -c tanh(c x / (2 nu)) with
// c tanh(c / (2 nu)) = 1.
double burgers_closed_form_speed(double nu);
double burgers_closed_form(double nu, double x);

// Explicit stability bound of central FTCS on a uniform grid with n_cells
// cells: min(h^2 / (2 nu), 2 nu / max|u|^2) with max|u| = 1.
double burgers_explicit_bound(double nu, Index n_cells);

// Marches du/dtau = -u u_x + nu u_xx from u = -x until ||N[u]||_inf < tol.
GridField burgers_steady_fd(double nu, Index n_cells, double dtau, double tol,
                            long max_steps = 50'000'000);

enum class FarField { freestream, analytic };

// Potential flow around the cylinder on the polar O-mesh (ntheta x nr
// interior nodes plus wall and far rings), solved directly. Components are
// u, v, phi. max_stable_dt is the explicit pseudo-time bound measured by
// marching on the same mesh.
GridField laplace_annulus_fd(Index ntheta, Index nr, FarField far = FarField::freestream,
                             double v_inf = 1.0, double r_wall = 0.5, double r_far = 15.0,
                             bool measure_stability = true);

// Largest explicit pseudo-time step for which marching the polar Laplacian
// does not amplify a perturbation, found by bisection.
double laplace_explicit_bound(Index ntheta, Index nr, double r_wall = 0.5, double r_far = 15.0);

struct AllenCahnSettings {
  Index nx = 257;        // output nodes in x (both end points included)
  Index nt = 101;        // output time slices on [0, 1]
  Index cells = 2048;    // periodic computational cells
  Index steps_per_unit = 100000;
  double diffusivity = 1e-4;
  double reaction = 5.0;
};

// Semi-implicit (implicit diffusion, explicit reaction) periodic solver.
// Output points are ordered with x fastest, shape {nx, nt}.
GridField allen_cahn_fd(const AllenCahnSettings& settings);

struct CavitySettings {
  double reynolds = 100.0;
  Index n = 129;       // nodes per side
  double tol = 1e-7;   // on max |d omega / d tau|
  long max_steps = 2'000'000;
  double dt = 0.0;     // 0 selects min(1/Re, h, h^2 Re)
};

// Steady lid-driven cavity by vorticity-streamfunction pseudo-time
// relaxation. Components are u, v, psi, omega on the n x n node grid (x
// fastest).
GridField cavity_fd(const CavitySettings& settings);

// Net flux of v through the horizontal grid line `row`, from face
// differences of the streamfunction.
double cavity_mass_flux(const GridField& cavity, Index row);

// Explicit Euler pseudo-time states u_{n+1} = u_n + dtau N[u_n] on a uniform
// 1-D node set (boundary nodes held fixed). Entry 0 is the initial state.
std::vector<GridField> explicit_euler_trajectory(const ProblemSpec& problem,
                                                 const Field& initial, double dtau,
                                                 int steps);

}  // namespace tsonn::oracle
