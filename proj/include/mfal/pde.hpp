#ifndef MFAL_PDE_HPP
#define MFAL_PDE_HPP

#include "mfal/numkit.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace mfal {

enum class Equation { Burgers, Poisson, Heat };

std::string to_string(Equation e);

/// One fidelity level: a mesh and its normalized query cost.
struct FidelitySpec {
  Index mesh_nx = 0;
  /// Time levels for Burgers/Heat, y-nodes for Poisson.
  Index mesh_nt_or_ny = 0;
  double cost_lambda = 1.0;

  Index output_dim() const { return mesh_nx * mesh_nt_or_ny; }
};

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

struct PdeProblem {
  std::string name;
  Equation equation = Equation::Poisson;
  std::vector<Interval> input_box;
  /// Ordered lowest to highest fidelity.
  std::vector<FidelitySpec> fidelities;
  /// Dense mesh used to build reference test outputs.
  FidelitySpec dense;

  Index input_dim() const { return static_cast<Index>(input_box.size()); }
  int num_fidelities() const { return static_cast<int>(fidelities.size()); }
  const FidelitySpec &fidelity(int m) const;

  bool contains(const VectorXd &x, double tol = 1e-12) const;
  /// Affine maps between the input box and the unit box.
  VectorXd to_unit(const VectorXd &x) const;
  VectorXd from_unit(const VectorXd &u) const;
};

/// Built-in problems: poisson2, poisson3, burgers2, heat2.
PdeProblem make_problem(const std::string &name);
std::vector<std::string> problem_names();

struct FieldSample {
  VectorXd input;
  /// 1-based.
  int fidelity = 1;
  VectorXd values;
  double cost = 0.0;
};

/// Training examples grouped by fidelity; by_fidelity[m-1] holds level m.
struct MultiFidelityDataset {
  std::vector<std::vector<FieldSample>> by_fidelity;

  explicit MultiFidelityDataset(int num_fidelities = 0)
      : by_fidelity(num_fidelities) {}

  int num_fidelities() const { return static_cast<int>(by_fidelity.size()); }
  void add(FieldSample s);
  std::size_t count(int m) const;
  std::size_t total() const;
};

// ---------------------------------------------------------------------------
// Solvers. Fields are returned as (nx x n2) grids; row i is the i-th x node.
// ---------------------------------------------------------------------------

/// Delta u = beta * delta(x - c) on [0,1]^2, c the domain center. Boundary
/// constants are ordered {left (x=0), right (x=1), bottom (y=0), top (y=1)};
/// corners take the mean of their two sides.
MatrixXd solve_poisson(const std::array<double, 4> &boundary, double beta,
                       Index nx, Index ny);

/// Delta_h u = rhs on the interior of an (nx x ny) node grid; boundary rows and
/// columns of `boundary` are copied into the solution.
MatrixXd solve_poisson_dirichlet(const MatrixXd &rhs, const MatrixXd &boundary);

/// u_t = alpha u_xx on [0,1] x [0,5], u_x(0) = flux_left, u_x(1) = flux_right,
/// backward Euler in time. Returns nx spatial nodes x nt time levels.
MatrixXd solve_heat(double flux_left, double flux_right, double alpha, Index nx,
                    Index nt);

/// Trapezoid-weighted mean of a nodal profile on [0,1]; the quantity the heat
/// scheme conserves under zero flux.
double trapezoid_mean(const Eigen::Ref<const VectorXd> &u);

/// Viscous Burgers on [0,1] x [0,3] with P1 elements (lumped mass,
/// skew-symmetric convection) and backward Euler; Picard iterations per step.
/// Returns nx spatial nodes x nt time levels.
MatrixXd solve_burgers(double viscosity, Index nx, Index nt);

/// Bilinear resampling between uniform node grids covering the same domain.
MatrixXd interpolate_bilinear(const MatrixXd &field, Index dst_rows,
                              Index dst_cols);

VectorXd flatten_row_major(const MatrixXd &field);
MatrixXd unflatten_row_major(const VectorXd &values, Index rows, Index cols);

/// Solve the problem at an arbitrary mesh and return the grid.
MatrixXd solve_on_mesh(const PdeProblem &problem, const VectorXd &x,
                       const FidelitySpec &mesh);

/// Solve at fidelity m (1-based) and attach its cost.
FieldSample query_oracle(const PdeProblem &problem, const VectorXd &x, int m);

struct TestSet {
  std::vector<VectorXd> inputs;
  /// Dense-mesh solutions interpolated to the highest-fidelity grid.
  std::vector<VectorXd> outputs;

  std::size_t size() const { return inputs.size(); }
};

/// Input i is drawn from an RNG seeded with seed + i, so samples are
/// independent of evaluation order.
TestSet generate_test_set(const PdeProblem &problem, std::size_t n,
                          std::uint64_t seed);

/// Uniform draw from the problem's input box.
template <typename Rng> VectorXd sample_input(const PdeProblem &problem, Rng &rng);

// ---------------------------------------------------------------------------
// Dataset persistence: CSV header x_0..x_{p-1},y_0..y_{d-1}, 17 significant
// digits, plus a JSON sidecar.
// ---------------------------------------------------------------------------

void write_samples_csv(const std::filesystem::path &path, Index input_dim,
                       const std::vector<VectorXd> &inputs,
                       const std::vector<VectorXd> &outputs);

struct SampleTable {
  std::vector<VectorXd> inputs;
  std::vector<VectorXd> outputs;
};

SampleTable read_samples_csv(const std::filesystem::path &path);

void write_dataset_sidecar(const std::filesystem::path &path,
                           const PdeProblem &problem, std::uint64_t seed,
                           const std::string &role);

} // namespace mfal

#include <random>

namespace mfal {

template <typename Rng>
VectorXd sample_input(const PdeProblem &problem, Rng &rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  VectorXd u(problem.input_dim());
  for (Index i = 0; i < u.size(); ++i)
    u[i] = unif(rng);
  return problem.from_unit(u);
}

} // namespace mfal

#endif
