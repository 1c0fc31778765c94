#include "mfal/pde.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <filesystem>
#include <numbers>
#include <random>

using namespace mfal;
using std::numbers::pi;

namespace {

double node(Index i, Index n) { return double(i) / double(n - 1); }

/// Max-norm error of the 5-point solve for u = sin(pi x) sinh(y) + x^2 y.
double manufactured_error(Index n) {
  auto u = [](double x, double y) {
    return std::sin(pi * x) * std::sinh(y) + x * x * y + std::exp(x * y);
  };
  auto lap = [](double x, double y) {
    return (1 - pi * pi) * std::sin(pi * x) * std::sinh(y) + 2 * y +
           (x * x + y * y) * std::exp(x * y);
  };
  MatrixXd rhs(n, n), exact(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      rhs(i, j) = lap(node(i, n), node(j, n));
      exact(i, j) = u(node(i, n), node(j, n));
    }
  const MatrixXd sol = solve_poisson_dirichlet(rhs, exact);
  return (sol - exact).cwiseAbs().maxCoeff();
}

} // namespace

TEST_CASE("Poisson manufactured solution converges at second order") {
  const double e1 = manufactured_error(17);
  const double e2 = manufactured_error(33);
  const double e3 = manufactured_error(65);
  CHECK(e1 / e2 >= 3.5);
  CHECK(e1 / e2 <= 4.5);
  CHECK(e2 / e3 >= 3.5);
  CHECK(e2 / e3 <= 4.5);
}

TEST_CASE("Poisson with equal boundaries and no source is constant") {
  const MatrixXd u = solve_poisson({0.3, 0.3, 0.3, 0.3}, 0.0, 16, 16);
  CHECK((u.array() - 0.3).abs().maxCoeff() < 1e-12);
}

TEST_CASE("Poisson symmetric boundaries give a symmetric field") {
  for (Index n : {16, 17, 32}) {
    const MatrixXd u = solve_poisson({0.4, 0.4, 0.2, 0.7}, 0.9, n, n);
    CHECK((u - u.colwise().reverse()).cwiseAbs().maxCoeff() < 1e-12);
  }
  const MatrixXd v = solve_poisson({0.5, 0.5, 0.5, 0.5}, 0.6, 16, 16);
  CHECK((v - v.transpose()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("Poisson is linear in boundary values and source strength") {
  const MatrixXd a = solve_poisson({0.1, 0.2, 0.3, 0.4}, 0.5, 16, 16);
  const MatrixXd b = solve_poisson({0.6, 0.1, 0.8, 0.2}, 0.3, 16, 16);
  const MatrixXd ab = solve_poisson({0.7, 0.3, 1.1, 0.6}, 0.8, 16, 16);
  CHECK((a + b - ab).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("Poisson point source converges under refinement away from the center") {
  auto at_third = [](Index n) {
    const MatrixXd u = solve_poisson({0.1, 0.1, 0.1, 0.1}, 0.9, n, n);
    return interpolate_bilinear(u, 127, 127)(42, 42);
  };
  const double ref = at_third(256);
  const double e16 = std::abs(at_third(16) - ref);
  const double e64 = std::abs(at_third(64) - ref);
  CHECK(e64 < e16);
  CHECK(e16 < 0.02);
}

TEST_CASE("Heat with zero flux conserves the mean at every step") {
  for (double alpha : {0.01, 0.05, 0.1}) {
    const MatrixXd u = solve_heat(0.0, 0.0, alpha, 32, 40);
    const double m0 = trapezoid_mean(u.col(0));
    CHECK(m0 == doctest::Approx(0.5).epsilon(1e-12));
    for (Index t = 0; t < u.cols(); ++t)
      CHECK(std::abs(trapezoid_mean(u.col(t)) - m0) < 1e-10);
  }
}

TEST_CASE("Heat relaxes to the uniform mean") {
  const MatrixXd u = solve_heat(0.0, 0.0, 0.1, 32, 64);
  CHECK((u.col(u.cols() - 1).array() - 0.5).abs().maxCoeff() < 1e-2);
  const MatrixXd fine = solve_heat(0.0, 0.0, 0.1, 128, 256);
  CHECK(std::abs(fine(64, 255) - u(16, 63)) < 1e-2);
}

TEST_CASE("Heat outflux lowers the mean") {
  // u_x(0) = 1 > 0 drains heat through the left end; u_x(1) = -1 through the right.
  const MatrixXd u = solve_heat(1.0, -1.0, 0.05, 32, 20);
  CHECK(trapezoid_mean(u.col(19)) < trapezoid_mean(u.col(0)));
}

TEST_CASE("Burgers energy is non-increasing for v >= 0.01") {
  for (double v : {0.01, 0.05, 0.1}) {
    const MatrixXd u = solve_burgers(v, 32, 32);
    for (Index t = 1; t + 1 < u.cols(); ++t) {
      const double e0 = u.col(t).squaredNorm();
      const double e1 = u.col(t + 1).squaredNorm();
      CHECK(e1 <= e0 + 1e-12);
    }
  }
}

TEST_CASE("Burgers boundary values vanish after the initial step") {
  const MatrixXd u = solve_burgers(0.05, 16, 16);
  CHECK(u(15, 0) == doctest::Approx(1.0));
  for (Index t = 1; t < u.cols(); ++t) {
    CHECK(u(0, t) == 0.0);
    CHECK(u(15, t) == 0.0);
  }
}

TEST_CASE("Burgers low viscosity gives steeper gradients") {
  auto max_slope = [](const MatrixXd &u) {
    const Index last = u.cols() - 1;
    double s = 0;
    for (Index i = 0; i + 1 < u.rows(); ++i)
      s = std::max(s, std::abs(u(i + 1, last) - u(i, last)) * double(u.rows() - 1));
    return s;
  };
  CHECK(max_slope(solve_burgers(0.001, 64, 16)) > max_slope(solve_burgers(0.1, 64, 16)));
}

TEST_CASE("solvers are bitwise deterministic") {
  CHECK(solve_burgers(0.02, 16, 16) == solve_burgers(0.02, 16, 16));
  CHECK(solve_heat(0.3, -0.4, 0.05, 16, 16) == solve_heat(0.3, -0.4, 0.05, 16, 16));
  CHECK(solve_poisson({0.2, 0.3, 0.4, 0.5}, 0.6, 16, 16) ==
        solve_poisson({0.2, 0.3, 0.4, 0.5}, 0.6, 16, 16));
}

TEST_CASE("bilinear interpolation") {
  SUBCASE("constant field") {
    const MatrixXd c = MatrixXd::Constant(5, 7, 2.5);
    CHECK((interpolate_bilinear(c, 9, 4).array() - 2.5).abs().maxCoeff() < 1e-15);
  }
  SUBCASE("linear functions are reproduced exactly") {
    MatrixXd f(5, 5), g(9, 9);
    for (Index i = 0; i < 5; ++i)
      for (Index j = 0; j < 5; ++j)
        f(i, j) = 2 * node(i, 5) + 3 * node(j, 5);
    for (Index i = 0; i < 9; ++i)
      for (Index j = 0; j < 9; ++j)
        g(i, j) = 2 * node(i, 9) + 3 * node(j, 9);
    CHECK((interpolate_bilinear(f, 9, 9) - g).cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("smooth field error is second order") {
    auto err = [](Index n) {
      MatrixXd f(n, n);
      for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j)
          f(i, j) = std::sin(3 * node(i, n)) * std::cos(2 * node(j, n));
      const MatrixXd g = interpolate_bilinear(f, 97, 97);
      double e = 0;
      for (Index i = 0; i < 97; ++i)
        for (Index j = 0; j < 97; ++j)
          e = std::max(e, std::abs(g(i, j) - std::sin(3 * node(i, 97)) *
                                                 std::cos(2 * node(j, 97))));
      return e;
    };
    const double ratio = err(16) / err(32);
    CHECK(ratio > 3.0);
    CHECK(ratio < 5.0);
  }
  SUBCASE("corners map exactly") {
    std::mt19937_64 rng(1);
    const MatrixXd f = oracle::random_matrix(rng, 6, 4);
    const MatrixXd g = interpolate_bilinear(f, 11, 13);
    CHECK(g(0, 0) == f(0, 0));
    CHECK(g(10, 12) == f(5, 3));
    CHECK(g(0, 12) == f(0, 3));
    CHECK(g(10, 0) == f(5, 0));
  }
}

TEST_CASE("row-major flatten round trip") {
  MatrixXd f(2, 3);
  f << 1, 2, 3, 4, 5, 6;
  const VectorXd v = flatten_row_major(f);
  CHECK(v[1] == 2.0);
  CHECK(v[3] == 4.0);
  CHECK(unflatten_row_major(v, 2, 3) == f);
  CHECK_THROWS_AS(unflatten_row_major(v, 4, 2), ShapeMismatch);
}

TEST_CASE("query_oracle dispatch, sizes and costs") {
  const PdeProblem p2 = make_problem("poisson2");
  const VectorXd x = VectorXd::Constant(5, 0.5);
  const FieldSample s1 = query_oracle(p2, x, 1);
  CHECK(s1.values.size() == 256);
  CHECK(s1.cost == 1.0);
  const FieldSample s2 = query_oracle(p2, x, 2);
  CHECK(s2.values.size() == 1024);
  CHECK(s2.cost == 3.0);
  const PdeProblem p3 = make_problem("poisson3");
  const FieldSample s3 = query_oracle(p3, x, 3);
  CHECK(s3.values.size() == 4096);
  CHECK(s3.cost == 10.0);
  CHECK_THROWS_AS(query_oracle(p2, x, 3), UnknownFidelity);
  CHECK_THROWS_AS(query_oracle(p2, x, 0), UnknownFidelity);
  CHECK_THROWS_AS(query_oracle(p2, VectorXd::Constant(5, 0.95), 1), OutOfDomain);
  CHECK_THROWS_AS(query_oracle(p2, VectorXd::Constant(4, 0.5), 1), ShapeMismatch);

  const PdeProblem heat = make_problem("heat2");
  VectorXd xh(3);
  xh << 0.5, -0.5, 0.05;
  CHECK(query_oracle(heat, xh, 1).values.size() == 256);
  const PdeProblem burgers = make_problem("burgers2");
  CHECK(query_oracle(burgers, VectorXd::Constant(1, 0.01), 2).values.size() == 1024);
}

TEST_CASE("unit-box maps invert each other") {
  const PdeProblem p = make_problem("heat2");
  VectorXd x(3);
  x << 0.25, -0.75, 0.03;
  CHECK((p.from_unit(p.to_unit(x)) - x).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(p.contains(x));
  CHECK_FALSE(p.contains(VectorXd::Constant(3, 2.0)));
  CHECK_THROWS_AS(make_problem("navier_stokes"), ConfigError);
}

TEST_CASE("test set generation is seeded per sample") {
  const PdeProblem p = make_problem("burgers2");
  const TestSet a = generate_test_set(p, 3, 11);
  const TestSet b = generate_test_set(p, 3, 11);
  CHECK(a.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(a.inputs[i] == b.inputs[i]);
    CHECK(a.outputs[i] == b.outputs[i]);
    CHECK(a.outputs[i].size() == 1024);
    CHECK(p.contains(a.inputs[i]));
  }
  const TestSet c = generate_test_set(p, 1, 13);
  CHECK(c.inputs[0] == a.inputs[2]);
  CHECK(c.outputs[0] == a.outputs[2]);
}

TEST_CASE("heat test set uses the 100x100 dense mesh") {
  const PdeProblem p = make_problem("heat2");
  CHECK(p.dense.mesh_nx == 100);
  CHECK(p.dense.mesh_nt_or_ny == 100);
  const TestSet t = generate_test_set(p, 1, 0);
  const MatrixXd dense = solve_on_mesh(p, t.inputs[0], p.dense);
  CHECK(t.outputs[0] == flatten_row_major(interpolate_bilinear(dense, 32, 32)));
}

TEST_CASE("sample CSV round trip is exact") {
  std::mt19937_64 rng(3);
  std::vector<VectorXd> xs, ys;
  for (int i = 0; i < 4; ++i) {
    xs.push_back(oracle::random_vector(rng, 2));
    ys.push_back(oracle::random_vector(rng, 5) * 1e-7);
  }
  const auto dir = std::filesystem::temp_directory_path() / "mfal_test_pde_csv";
  std::filesystem::create_directories(dir);
  write_samples_csv(dir / "s.csv", 2, xs, ys);
  const SampleTable t = read_samples_csv(dir / "s.csv");
  REQUIRE(t.inputs.size() == 4);
  for (int i = 0; i < 4; ++i) {
    CHECK(t.inputs[i] == xs[i]);
    CHECK(t.outputs[i] == ys[i]);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("dataset grouping by fidelity") {
  MultiFidelityDataset d(2);
  d.add({VectorXd::Zero(1), 1, VectorXd::Zero(2), 1.0});
  d.add({VectorXd::Zero(1), 2, VectorXd::Zero(2), 3.0});
  d.add({VectorXd::Zero(1), 2, VectorXd::Zero(2), 3.0});
  CHECK(d.count(1) == 1);
  CHECK(d.count(2) == 2);
  CHECK(d.total() == 3);
  CHECK_THROWS_AS(d.add({VectorXd::Zero(1), 3, VectorXd::Zero(2), 1.0}), UnknownFidelity);
}
