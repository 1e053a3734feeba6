#include <cmath>
#include <filesystem>
#include <random>
#include <stdexcept>

#include "doctest.h"
#include "flowembed/spectral.hpp"
#include "oracles.hpp"

using namespace flowembed;

namespace {

Domain square(std::int64_t n) {
  Domain d;
  d.ndim = 2;
  d.dims = {n, n, 1};
  d.spacing = {1.0, 1.0, 1.0};
  d.origin = {-0.5 * double(n - 1), -0.5 * double(n - 1), 0.0};
  return d;
}

SparseMatrix center_laplacian(std::int64_t n, int half_length) {
  const auto f = make_analytic("center", {}, square(n));
  AssemblyConfig cfg;
  cfg.kernel = make_kernel(KernelShape::box, half_length);
  cfg.step = 0.5;
  const auto p = assemble_probability_matrix(f, cfg);
  return laplacian(mixture_matrix(normalize_cols(p)));
}

// Laplacian of the unweighted 4-node path graph 0-1-2-3.
SparseMatrix path4() {
  oracle::Dense d = oracle::Dense::zeros(4, 4);
  const double a[16] = {1, -1, 0, 0, -1, 2, -1, 0, 0, -1, 2, -1, 0, 0, -1, 1};
  d.a.assign(a, a + 16);
  SparseMatrix m;
  m.nrows = m.ncols = 4;
  m.row_offsets.push_back(0);
  for (std::int64_t i = 0; i < 4; ++i) {
    for (std::int64_t j = 0; j < 4; ++j)
      if (d.at(i, j) != 0.0) {
        m.col_indices.push_back(j);
        m.values.push_back(d.at(i, j));
      }
    m.row_offsets.push_back(std::int64_t(m.values.size()));
  }
  return m;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST_CASE("path-graph spectrum in closed form") {
  // Eigenvalues of the 4-node path Laplacian: 4 sin^2(k pi / 8), k = 0..3.
  const auto set = smallest_eigenpairs(path4(), 4);
  REQUIRE(set.pairs.size() == 4);
  const double expected[4] = {0.0, 2.0 - std::sqrt(2.0), 2.0, 2.0 + std::sqrt(2.0)};
  for (int i = 0; i < 4; ++i) {
    CHECK(std::abs(set.pairs[std::size_t(i)].value - expected[i]) <= 1e-8);
    CHECK(set.pairs[std::size_t(i)].residual <= 1e-8);
  }
  CHECK(set.kernel_dimension == 1);
  CHECK_FALSE(set.disconnected_warning);
}

TEST_CASE("zero matrix returns zero eigenpairs and a disconnected warning") {
  SparseMatrix z;
  z.nrows = z.ncols = 6;
  z.row_offsets.assign(7, 0);
  const auto set = smallest_eigenpairs(z, 3);
  REQUIRE(set.pairs.size() == 3);
  for (const auto& p : set.pairs) {
    CHECK(p.value == 0.0);
    CHECK(p.residual <= 1e-12);
  }
  CHECK(set.kernel_dimension == 3);
  CHECK(set.disconnected_warning);
}

TEST_CASE("sparse solver matches the dense Jacobi oracle") {
  const auto l = center_laplacian(8, 3);  // 64 cells
  const int k = 6;
  const auto set = smallest_eigenpairs(l, k);
  const auto ref = oracle::jacobi_eigen(oracle::to_dense(l));
  REQUIRE(int(set.pairs.size()) == k);
  for (int i = 0; i < k; ++i) {
    const double lam = set.pairs[std::size_t(i)].value;
    const double lam_ref = ref.values[std::size_t(i)];
    CHECK(std::abs(lam - lam_ref) <= 1e-6 * std::max(std::abs(lam_ref), 1.0));
    // Degenerate eigenvalues fix only the eigenspace, not the basis inside
    // it: compare the projection onto the span of all matching oracle modes.
    double align2 = 0.0;
    for (std::size_t j = 0; j < ref.values.size(); ++j) {
      if (std::abs(ref.values[j] - lam) > std::max(1e-6 * std::abs(lam), 1e-8)) continue;
      const double c = dot(set.pairs[std::size_t(i)].vector, ref.vectors[j]);
      align2 += c * c;
    }
    CHECK(std::sqrt(align2) >= 1.0 - 1e-6);
  }
}

TEST_CASE("returned eigenvectors are orthonormal") {
  const auto l = center_laplacian(9, 3);
  const auto set = smallest_eigenpairs(l, 5);
  for (std::size_t i = 0; i < set.pairs.size(); ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      const double g = dot(set.pairs[i].vector, set.pairs[j].vector);
      CHECK(std::abs(g - (i == j ? 1.0 : 0.0)) <= 1e-8);
    }
  }
}

TEST_CASE("residual bounds hold against a direct recomputation") {
  const auto l = center_laplacian(8, 2);
  const SpectralOptions opts;
  const auto set = smallest_eigenpairs(l, 4, opts);
  for (const auto& p : set.pairs) {
    const auto lv = spmv(l, p.vector);
    double r2 = 0.0;
    for (std::size_t i = 0; i < lv.size(); ++i) {
      const double r = lv[i] - p.value * p.vector[i];
      r2 += r * r;
    }
    const double r = std::sqrt(r2);
    CHECK(std::abs(r - p.residual) <= 1e-12 + 1e-8 * r);
    CHECK(p.residual <= opts.tol);
  }
}

TEST_CASE("eigenvalues are ascending and the first is the flat mode") {
  const auto l = center_laplacian(10, 4);
  const auto set = smallest_eigenpairs(l, 6);
  CHECK(set.pairs[0].value <= 1e-8);
  for (std::size_t i = 1; i < set.pairs.size(); ++i)
    CHECK(set.pairs[i].value >= set.pairs[i - 1].value);
  // The flat mode is constant: all entries equal 1/sqrt(N) after sign fixing.
  const double expect = 1.0 / std::sqrt(double(l.nrows));
  for (double v : set.pairs[0].vector) CHECK(std::abs(v - expect) <= 1e-6);
  CHECK(set.kernel_dimension == 1);
  CHECK_FALSE(set.disconnected_warning);
}

TEST_CASE("smallest eigenpair minimizes the Rayleigh quotient over perturbations") {
  const auto l = center_laplacian(8, 3);
  const auto set = smallest_eigenpairs(l, 3);
  const auto& v1 = set.pairs[1].vector;  // first non-constant mode
  std::mt19937_64 rng(21);
  const auto rayleigh = [&](const std::vector<double>& x) {
    const auto lx = spmv(l, x);
    return dot(x, lx) / dot(x, x);
  };
  // Any perturbation orthogonal to the kernel cannot go below lambda_1.
  const double base = rayleigh(v1);
  for (int trial = 0; trial < 10; ++trial) {
    auto x = v1;
    const auto noise = oracle::random_unit_vector(l.nrows, rng);
    double mean = 0.0;
    for (double w : noise) mean += w;
    mean /= double(noise.size());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += 0.05 * (noise[i] - mean);
    CHECK(rayleigh(x) >= base - 1e-10);
  }
}

TEST_CASE("iteration cap raises NotConvergedError with partial results") {
  const auto l = center_laplacian(10, 4);
  SpectralOptions opts;
  opts.tol = 1e-12;
  opts.max_iter = 3;  // far too few for 6 pairs
  try {
    smallest_eigenpairs(l, 6, opts);
    FAIL("expected NotConvergedError");
  } catch (const NotConvergedError& e) {
    CHECK(int(e.partial_result.pairs.size()) < 6);
    for (const auto& p : e.partial_result.pairs) CHECK(p.residual <= opts.tol);
  }
}

TEST_CASE("amplitude p-norms") {
  const std::vector<double> e1 = {1.0, 0.0, 0.0};
  CHECK(amplitude(e1, 2.0) == doctest::Approx(1.0).epsilon(1e-15));
  const std::vector<double> v = {0.6, 0.8};
  CHECK(amplitude(v, 2.0) == doctest::Approx(1.0).epsilon(1e-14));
  const std::vector<double> w = {0.5, -0.5, 0.5, -0.5};
  const double inf = std::numeric_limits<double>::infinity();
  CHECK(amplitude(w, inf) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(amplitude(w, 1.0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK_THROWS_AS(amplitude(w, 0.5), std::invalid_argument);
}

TEST_CASE("selection ranks by amplitude and excludes the constant mode") {
  EmbeddingSet set;
  set.pairs.resize(4);
  set.pairs[0].value = 0.0;
  set.pairs[0].vector = {0.5, 0.5, 0.5, 0.5};
  set.pairs[1].value = 0.1;
  set.pairs[1].vector = {0.9, 0.1, 0.3, 0.1};
  set.pairs[2].value = 0.2;
  set.pairs[2].vector = {0.1, 0.2, 0.1, 0.2};
  set.pairs[3].value = 0.3;
  set.pairs[3].vector = {0.4, 0.4, 0.4, 0.4};
  const double inf = std::numeric_limits<double>::infinity();
  SUBCASE("amplitude descending") {
    const auto sel = select_eigenvectors(set, 3, inf);
    REQUIRE(sel.size() == 3);
    CHECK(sel[0] == 1);  // max-norm 0.9
    CHECK(sel[1] == 3);  // 0.4
    CHECK(sel[2] == 2);  // 0.2
    CHECK(set.amplitudes.size() == 4);
    CHECK(set.amplitudes[1] == doctest::Approx(0.9));
  }
  SUBCASE("m is clamped to the available non-constant modes") {
    const auto sel = select_eigenvectors(set, 10, inf);
    CHECK(sel.size() == 3);
  }
  SUBCASE("ties break toward the smaller eigenvalue") {
    set.pairs[2].vector = {0.4, 0.1, 0.1, 0.1};  // tie with pair 3 at 0.4
    const auto sel = select_eigenvectors(set, 3, inf);
    CHECK(sel[0] == 1);
    CHECK(sel[1] == 2);
    CHECK(sel[2] == 3);
  }
}

TEST_CASE("EMB1 round-trip is bit-exact") {
  const auto l = center_laplacian(6, 2);
  auto set = smallest_eigenpairs(l, 4);
  set.domain = square(6);
  select_eigenvectors(set, 2, 2.0);
  const auto path = (std::filesystem::temp_directory_path() / "emb_rt.emb1").string();
  save_embeddings(set, path);
  const auto in = load_embeddings(path);
  REQUIRE(in.pairs.size() == set.pairs.size());
  for (std::size_t i = 0; i < set.pairs.size(); ++i) {
    CHECK(in.pairs[i].value == set.pairs[i].value);
    CHECK(in.pairs[i].vector == set.pairs[i].vector);
    CHECK(in.amplitudes[i] == set.amplitudes[i]);
  }
  CHECK(in.domain.dims == set.domain.dims);
  std::filesystem::remove(path);
}
