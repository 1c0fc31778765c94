#include "mfal/pde.hpp"
#include "mfal/parallel.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <sstream>

namespace mfal {

std::string to_string(Equation e) {
  switch (e) {
  case Equation::Burgers:
    return "burgers";
  case Equation::Poisson:
    return "poisson";
  case Equation::Heat:
    return "heat";
  }
  return "unknown";
}

const FidelitySpec &PdeProblem::fidelity(int m) const {
  if (m < 1 || m > num_fidelities())
    throw UnknownFidelity("fidelity " + std::to_string(m) + " not in [1, " +
                          std::to_string(num_fidelities()) + "]");
  return fidelities[m - 1];
}

bool PdeProblem::contains(const VectorXd &x, double tol) const {
  if (x.size() != input_dim())
    return false;
  for (Index i = 0; i < x.size(); ++i) {
    const double span = input_box[i].hi - input_box[i].lo;
    if (!(x[i] >= input_box[i].lo - tol * span &&
          x[i] <= input_box[i].hi + tol * span))
      return false;
  }
  return true;
}

VectorXd PdeProblem::to_unit(const VectorXd &x) const {
  VectorXd u(x.size());
  for (Index i = 0; i < x.size(); ++i)
    u[i] = (x[i] - input_box[i].lo) / (input_box[i].hi - input_box[i].lo);
  return u;
}

VectorXd PdeProblem::from_unit(const VectorXd &u) const {
  VectorXd x(u.size());
  for (Index i = 0; i < u.size(); ++i)
    x[i] = input_box[i].lo + u[i] * (input_box[i].hi - input_box[i].lo);
  return x;
}

void MultiFidelityDataset::add(FieldSample s) {
  if (s.fidelity < 1 || s.fidelity > num_fidelities())
    throw UnknownFidelity("dataset has no fidelity " + std::to_string(s.fidelity));
  by_fidelity[s.fidelity - 1].push_back(std::move(s));
}

std::size_t MultiFidelityDataset::count(int m) const {
  if (m < 1 || m > num_fidelities())
    throw UnknownFidelity("dataset has no fidelity " + std::to_string(m));
  return by_fidelity[m - 1].size();
}

std::size_t MultiFidelityDataset::total() const {
  std::size_t n = 0;
  for (const auto &f : by_fidelity)
    n += f.size();
  return n;
}

PdeProblem make_problem(const std::string &name) {
  PdeProblem p;
  p.name = name;
  const FidelitySpec f16{16, 16, 1.0}, f32{32, 32, 3.0}, f64{64, 64, 10.0};
  if (name == "poisson2" || name == "poisson3") {
    p.equation = Equation::Poisson;
    p.input_box.assign(5, Interval{0.1, 0.9});
    p.fidelities = {f16, f32};
    if (name == "poisson3")
      p.fidelities.push_back(f64);
    p.dense = {128, 128, 0.0};
  } else if (name == "burgers2") {
    p.equation = Equation::Burgers;
    p.input_box = {Interval{0.001, 0.1}};
    p.fidelities = {f16, f32};
    p.dense = {128, 128, 0.0};
  } else if (name == "heat2") {
    p.equation = Equation::Heat;
    p.input_box = {Interval{0.0, 1.0}, Interval{-1.0, 0.0},
                   Interval{0.01, 0.1}};
    p.fidelities = {f16, f32};
    p.dense = {100, 100, 0.0};
  } else {
    throw ConfigError("unknown problem '" + name + "'");
  }
  return p;
}

std::vector<std::string> problem_names() {
  return {"poisson2", "poisson3", "burgers2", "heat2"};
}

// ---------------------------------------------------------------------------
// Poisson
// ---------------------------------------------------------------------------

namespace {

using SpdFactor = Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>;

/// Factorization of -Delta_h on the interior nodes, shared per mesh size.
std::shared_ptr<const SpdFactor> laplacian_factor(Index nx, Index ny) {
  static std::mutex mu;
  static std::map<std::pair<Index, Index>, std::shared_ptr<const SpdFactor>>
      cache;
  std::lock_guard lock(mu);
  auto it = cache.find({nx, ny});
  if (it != cache.end())
    return it->second;

  const Index mx = nx - 2, my = ny - 2, n = mx * my;
  const double hx = 1.0 / double(nx - 1), hy = 1.0 / double(ny - 1);
  const double cx = 1.0 / (hx * hx), cy = 1.0 / (hy * hy);
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(5 * n);
  auto idx = [my](Index i, Index j) { return i * my + j; };
  for (Index i = 0; i < mx; ++i)
    for (Index j = 0; j < my; ++j) {
      const Index r = idx(i, j);
      trips.emplace_back(r, r, 2 * cx + 2 * cy);
      if (i > 0)
        trips.emplace_back(r, idx(i - 1, j), -cx);
      if (i + 1 < mx)
        trips.emplace_back(r, idx(i + 1, j), -cx);
      if (j > 0)
        trips.emplace_back(r, idx(i, j - 1), -cy);
      if (j + 1 < my)
        trips.emplace_back(r, idx(i, j + 1), -cy);
    }
  Eigen::SparseMatrix<double> A(n, n);
  A.setFromTriplets(trips.begin(), trips.end());
  auto factor = std::make_shared<SpdFactor>(A);
  if (factor->info() != Eigen::Success)
    throw SolverSingular("Poisson: Laplacian factorization failed");
  cache.emplace(std::pair{nx, ny}, factor);
  return factor;
}

} // namespace

MatrixXd solve_poisson_dirichlet(const MatrixXd &rhs, const MatrixXd &boundary) {
  const Index nx = boundary.rows(), ny = boundary.cols();
  if (nx < 3 || ny < 3)
    throw ShapeMismatch("Poisson: mesh needs at least 3x3 nodes");
  if (rhs.rows() != nx || rhs.cols() != ny)
    throw ShapeMismatch("Poisson: rhs and boundary grids differ in shape");

  const Index mx = nx - 2, my = ny - 2;
  const double hx = 1.0 / double(nx - 1), hy = 1.0 / double(ny - 1);
  const double cx = 1.0 / (hx * hx), cy = 1.0 / (hy * hy);
  VectorXd b(mx * my);
  for (Index i = 1; i <= mx; ++i)
    for (Index j = 1; j <= my; ++j) {
      double v = -rhs(i, j);
      if (i == 1)
        v += cx * boundary(0, j);
      if (i == mx)
        v += cx * boundary(nx - 1, j);
      if (j == 1)
        v += cy * boundary(i, 0);
      if (j == my)
        v += cy * boundary(i, ny - 1);
      b[(i - 1) * my + (j - 1)] = v;
    }
  const auto factor = laplacian_factor(nx, ny);
  const VectorXd u = factor->solve(b);
  if (factor->info() != Eigen::Success || !u.allFinite())
    throw SolverSingular("Poisson: solve failed");

  MatrixXd field = boundary;
  for (Index i = 1; i <= mx; ++i)
    for (Index j = 1; j <= my; ++j)
      field(i, j) = u[(i - 1) * my + (j - 1)];
  return field;
}

MatrixXd solve_poisson(const std::array<double, 4> &bc, double beta, Index nx,
                       Index ny) {
  if (nx < 3 || ny < 3)
    throw ShapeMismatch("Poisson: mesh needs at least 3x3 nodes");
  const auto [left, right, bottom, top] = bc;
  MatrixXd boundary = MatrixXd::Zero(nx, ny);
  boundary.row(0).setConstant(left);
  boundary.row(nx - 1).setConstant(right);
  boundary.col(0).setConstant(bottom);
  boundary.col(ny - 1).setConstant(top);
  boundary(0, 0) = 0.5 * (left + bottom);
  boundary(0, ny - 1) = 0.5 * (left + top);
  boundary(nx - 1, 0) = 0.5 * (right + bottom);
  boundary(nx - 1, ny - 1) = 0.5 * (right + top);

  // Point source spread over the enclosing cell with bilinear weights.
  const double hx = 1.0 / double(nx - 1), hy = 1.0 / double(ny - 1);
  MatrixXd rhs = MatrixXd::Zero(nx, ny);
  const double sx = 0.5 * double(nx - 1), sy = 0.5 * double(ny - 1);
  const Index i0 = static_cast<Index>(std::floor(sx));
  const Index j0 = static_cast<Index>(std::floor(sy));
  const double fx = sx - double(i0), fy = sy - double(j0);
  const double density = beta / (hx * hy);
  rhs(i0, j0) += density * (1 - fx) * (1 - fy);
  if (fx > 0)
    rhs(i0 + 1, j0) += density * fx * (1 - fy);
  if (fy > 0)
    rhs(i0, j0 + 1) += density * (1 - fx) * fy;
  if (fx > 0 && fy > 0)
    rhs(i0 + 1, j0 + 1) += density * fx * fy;
  return solve_poisson_dirichlet(rhs, boundary);
}

// ---------------------------------------------------------------------------
// Tridiagonal solve (no pivoting; callers guarantee diagonal dominance)
// ---------------------------------------------------------------------------

namespace {

VectorXd solve_tridiagonal(const VectorXd &lower, const VectorXd &diag,
                           const VectorXd &upper, const VectorXd &rhs) {
  const Index n = diag.size();
  VectorXd c(n), d(n);
  double denom = diag[0];
  if (denom == 0)
    throw SolverSingular("tridiagonal system has a zero pivot");
  c[0] = n > 1 ? upper[0] / denom : 0.0;
  d[0] = rhs[0] / denom;
  for (Index i = 1; i < n; ++i) {
    denom = diag[i] - lower[i] * c[i - 1];
    if (denom == 0)
      throw SolverSingular("tridiagonal system has a zero pivot");
    c[i] = i + 1 < n ? upper[i] / denom : 0.0;
    d[i] = (rhs[i] - lower[i] * d[i - 1]) / denom;
  }
  VectorXd x(n);
  x[n - 1] = d[n - 1];
  for (Index i = n - 2; i >= 0; --i)
    x[i] = d[i] - c[i] * x[i + 1];
  return x;
}

} // namespace

// ---------------------------------------------------------------------------
// Heat
// ---------------------------------------------------------------------------

double trapezoid_mean(const Eigen::Ref<const VectorXd> &u) {
  const Index n = u.size();
  if (n < 2)
    throw ShapeMismatch("trapezoid_mean needs at least two nodes");
  return (u.sum() - 0.5 * (u[0] + u[n - 1])) / double(n - 1);
}

MatrixXd solve_heat(double flux_left, double flux_right, double alpha, Index nx,
                    Index nt) {
  if (nx < 3 || nt < 2)
    throw ShapeMismatch("Heat: needs nx >= 3 and nt >= 2");
  constexpr double t_end = 5.0;
  const double h = 1.0 / double(nx - 1);
  const double dt = t_end / double(nt - 1);
  const double r = alpha * dt / (h * h);

  // Initial step H(x-0.25) - H(x-0.75), averaged over each node's dual cell.
  VectorXd u(nx);
  for (Index i = 0; i < nx; ++i) {
    const double a = std::max(0.0, (double(i) - 0.5) * h);
    const double b = std::min(1.0, (double(i) + 0.5) * h);
    const double overlap = std::max(0.0, std::min(b, 0.75) - std::max(a, 0.25));
    u[i] = overlap / (b - a);
  }

  VectorXd lower = VectorXd::Constant(nx, -r), upper = VectorXd::Constant(nx, -r);
  VectorXd diag = VectorXd::Constant(nx, 1 + 2 * r);
  upper[0] = -2 * r;
  lower[nx - 1] = -2 * r;

  MatrixXd field(nx, nt);
  field.col(0) = u;
  for (Index n = 1; n < nt; ++n) {
    VectorXd rhs = u;
    rhs[0] -= 2 * r * h * flux_left;
    rhs[nx - 1] += 2 * r * h * flux_right;
    u = solve_tridiagonal(lower, diag, upper, rhs);
    if (!u.allFinite())
      throw SolverSingular("Heat: non-finite solution");
    field.col(n) = u;
  }
  return field;
}

// ---------------------------------------------------------------------------
// Burgers
// ---------------------------------------------------------------------------

MatrixXd solve_burgers(double viscosity, Index nx, Index nt) {
  if (nx < 3 || nt < 2)
    throw ShapeMismatch("Burgers: needs nx >= 3 and nt >= 2");
  if (!(viscosity > 0))
    throw OutOfDomain("Burgers: viscosity must be positive");
  constexpr double t_end = 3.0;
  constexpr double picard_tol = 1e-10;
  constexpr int picard_max = 100;

  const double h = 1.0 / double(nx - 1);
  const double dt_out = t_end / double(nt - 1);
  const Index substeps = std::max<Index>(1, Index(std::ceil(dt_out / h)));
  const double dt = dt_out / double(substeps);
  const Index m = nx - 2;

  MatrixXd field(nx, nt);
  VectorXd full(nx);
  for (Index i = 0; i < nx; ++i)
    full[i] = std::sin(double(i) * h * std::numbers::pi / 2);
  field.col(0) = full;

  // Interior unknowns only; boundary values are zero for t > 0. With lumped
  // mass h and skew-symmetric convection C(w) (C_{i,i+1} = (w_i + w_{i+1})/6,
  // C_{i+1,i} = -C_{i,i+1}) each row reads
  //   (h/dt)(u_i - u_i^old) + nu/h (2u_i - u_{i-1} - u_{i+1}) + (C(w)u)_i = 0.
  const double mass = h / dt, diff = viscosity / h;
  VectorXd u = full.segment(1, m);
  auto w_at = [&](const VectorXd &w, Index node) {
    return (node == 0 || node == nx - 1) ? 0.0 : w[node - 1];
  };
  auto residual = [&](const VectorXd &w, const VectorXd &v, const VectorXd &old) {
    VectorXd res(m);
    for (Index k = 0; k < m; ++k) {
      const Index node = k + 1;
      const double left = k > 0 ? v[k - 1] : 0.0;
      const double right = k + 1 < m ? v[k + 1] : 0.0;
      const double c_minus = -(w_at(w, node - 1) + w_at(w, node)) / 6;
      const double c_plus = (w_at(w, node) + w_at(w, node + 1)) / 6;
      res[k] = mass * (v[k] - old[k]) + diff * (2 * v[k] - left - right) +
               c_minus * left + c_plus * right;
    }
    return res;
  };

  VectorXd lower(m), diag(m), upper(m);
  for (Index n = 1; n < nt; ++n) {
    for (Index s = 0; s < substeps; ++s) {
      const VectorXd old = u;
      VectorXd w = u;
      bool converged = false;
      for (int it = 0; it < picard_max; ++it) {
        for (Index k = 0; k < m; ++k) {
          const Index node = k + 1;
          diag[k] = mass + 2 * diff;
          lower[k] = -diff - (w_at(w, node - 1) + w_at(w, node)) / 6;
          upper[k] = -diff + (w_at(w, node) + w_at(w, node + 1)) / 6;
        }
        const VectorXd next = solve_tridiagonal(lower, diag, upper, mass * old);
        if (!next.allFinite())
          throw NonlinearSolveFailed("Burgers: non-finite Picard iterate");
        w = next;
        if (residual(w, w, old).cwiseAbs().maxCoeff() < picard_tol) {
          converged = true;
          break;
        }
      }
      if (!converged)
        throw NonlinearSolveFailed("Burgers: Picard did not converge at v=" +
                                   std::to_string(viscosity));
      u = w;
    }
    full.setZero();
    full.segment(1, m) = u;
    field.col(n) = full;
  }
  return field;
}

// ---------------------------------------------------------------------------
// Interpolation and dispatch
// ---------------------------------------------------------------------------

MatrixXd interpolate_bilinear(const MatrixXd &field, Index dst_rows,
                              Index dst_cols) {
  const Index sr = field.rows(), sc = field.cols();
  if (sr < 2 || sc < 2 || dst_rows < 2 || dst_cols < 2)
    throw ShapeMismatch("interpolate_bilinear: grids need at least 2x2 nodes");
  auto locate = [](Index i, Index dst, Index src, Index &i0, double &f) {
    const double s = double(i) * double(src - 1) / double(dst - 1);
    i0 = std::min<Index>(Index(std::floor(s)), src - 2);
    f = s - double(i0);
  };
  MatrixXd out(dst_rows, dst_cols);
  for (Index i = 0; i < dst_rows; ++i) {
    Index i0;
    double fx;
    locate(i, dst_rows, sr, i0, fx);
    for (Index j = 0; j < dst_cols; ++j) {
      Index j0;
      double fy;
      locate(j, dst_cols, sc, j0, fy);
      out(i, j) = (1 - fx) * (1 - fy) * field(i0, j0) +
                  fx * (1 - fy) * field(i0 + 1, j0) +
                  (1 - fx) * fy * field(i0, j0 + 1) +
                  fx * fy * field(i0 + 1, j0 + 1);
    }
  }
  return out;
}

VectorXd flatten_row_major(const MatrixXd &field) {
  VectorXd v(field.size());
  Eigen::Map<RowMajorMatrixXd>(v.data(), field.rows(), field.cols()) = field;
  return v;
}

MatrixXd unflatten_row_major(const VectorXd &values, Index rows, Index cols) {
  if (values.size() != rows * cols)
    throw ShapeMismatch("unflatten_row_major: size mismatch");
  return Eigen::Map<const RowMajorMatrixXd>(values.data(), rows, cols);
}

MatrixXd solve_on_mesh(const PdeProblem &problem, const VectorXd &x,
                       const FidelitySpec &mesh) {
  if (x.size() != problem.input_dim())
    throw ShapeMismatch("problem '" + problem.name + "' takes " +
                        std::to_string(problem.input_dim()) + " inputs, got " +
                        std::to_string(x.size()));
  if (!problem.contains(x))
    throw OutOfDomain("input outside the box of problem '" + problem.name + "'");
  switch (problem.equation) {
  case Equation::Poisson:
    return solve_poisson({x[0], x[1], x[2], x[3]}, x[4], mesh.mesh_nx,
                         mesh.mesh_nt_or_ny);
  case Equation::Heat:
    return solve_heat(x[0], x[1], x[2], mesh.mesh_nx, mesh.mesh_nt_or_ny);
  case Equation::Burgers:
    return solve_burgers(x[0], mesh.mesh_nx, mesh.mesh_nt_or_ny);
  }
  throw ConfigError("unhandled equation");
}

FieldSample query_oracle(const PdeProblem &problem, const VectorXd &x, int m) {
  const FidelitySpec &spec = problem.fidelity(m);
  FieldSample s;
  s.input = x;
  s.fidelity = m;
  s.values = flatten_row_major(solve_on_mesh(problem, x, spec));
  s.cost = spec.cost_lambda;
  return s;
}

TestSet generate_test_set(const PdeProblem &problem, std::size_t n,
                          std::uint64_t seed) {
  if (n < 1)
    throw ConfigError("test set size must be at least 1");
  const FidelitySpec &top = problem.fidelities.back();
  TestSet set;
  set.inputs.resize(n);
  set.outputs.resize(n);
  parallel_for(n, [&](std::size_t i) {
    std::mt19937_64 rng(seed + i);
    set.inputs[i] = sample_input(problem, rng);
    const MatrixXd dense = solve_on_mesh(problem, set.inputs[i], problem.dense);
    set.outputs[i] = flatten_row_major(
        interpolate_bilinear(dense, top.mesh_nx, top.mesh_nt_or_ny));
  });
  return set;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

void write_samples_csv(const std::filesystem::path &path, Index input_dim,
                       const std::vector<VectorXd> &inputs,
                       const std::vector<VectorXd> &outputs) {
  if (inputs.size() != outputs.size())
    throw ShapeMismatch("write_samples_csv: inputs and outputs differ in count");
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw IoError("cannot write " + path.string());
  const Index d = outputs.empty() ? 0 : outputs.front().size();
  for (Index i = 0; i < input_dim; ++i)
    out << (i ? "," : "") << "x_" << i;
  for (Index j = 0; j < d; ++j)
    out << "," << "y_" << j;
  out << '\n' << std::setprecision(17);
  for (std::size_t r = 0; r < inputs.size(); ++r) {
    if (inputs[r].size() != input_dim || outputs[r].size() != d)
      throw ShapeMismatch("write_samples_csv: ragged rows");
    for (Index i = 0; i < input_dim; ++i)
      out << (i ? "," : "") << inputs[r][i];
    for (Index j = 0; j < d; ++j)
      out << ',' << outputs[r][j];
    out << '\n';
  }
}

SampleTable read_samples_csv(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  Index p = 0, d = 0;
  {
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, ',')) {
      if (col.rfind("x_", 0) == 0)
        ++p;
      else if (col.rfind("y_", 0) == 0)
        ++d;
      else
        throw IoError(path.string() + ": unexpected column '" + col + "'");
    }
  }
  SampleTable table;
  while (std::getline(in, line)) {
    if (line.empty())
      continue;
    std::stringstream ss(line);
    std::string cell;
    VectorXd x(p), y(d);
    for (Index i = 0; i < p + d; ++i) {
      if (!std::getline(ss, cell, ','))
        throw IoError(path.string() + ": short row");
      (i < p ? x[i] : y[i - p]) = std::stod(cell);
    }
    table.inputs.push_back(std::move(x));
    table.outputs.push_back(std::move(y));
  }
  return table;
}

void write_dataset_sidecar(const std::filesystem::path &path,
                           const PdeProblem &problem, std::uint64_t seed,
                           const std::string &role) {
  nlohmann::json j;
  j["problem"] = problem.name;
  j["equation"] = to_string(problem.equation);
  j["seed"] = seed;
  j["role"] = role;
  for (const auto &f : problem.fidelities)
    j["fidelities"].push_back({{"mesh_nx", f.mesh_nx},
                               {"mesh_nt_or_ny", f.mesh_nt_or_ny},
                               {"cost_lambda", f.cost_lambda},
                               {"output_dim", f.output_dim()}});
  j["dense_mesh"] = {problem.dense.mesh_nx, problem.dense.mesh_nt_or_ny};
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

} // namespace mfal
