// Acceptance gate: one pass/fail line per criterion, nonzero exit on any
// failure. Each criterion is self-contained and uses independent dense or
// closed-form oracles where a reference value is needed.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "flowembed/pipeline.hpp"
#include "flowembed/render.hpp"
#include "flowembed/spectral.hpp"
#include "oracles.hpp"

using namespace flowembed;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Domain square(std::int64_t n) {
  Domain d;
  d.ndim = 2;
  d.dims = {n, n, 1};
  d.spacing = {1.0, 1.0, 1.0};
  d.origin = {-0.5 * double(n - 1), -0.5 * double(n - 1), 0.0};
  return d;
}

struct Chain {
  SparseMatrix p, p_row, p_col, h, l;
};

Chain build_chain(const VectorField& f, KernelShape shape, int half_length,
                  Deposition dep = Deposition::multilinear) {
  AssemblyConfig cfg;
  cfg.kernel = make_kernel(shape, half_length);
  cfg.step = 0.5 * f.domain().min_spacing();
  cfg.deposit = dep;
  Chain c;
  c.p = assemble_probability_matrix(f, cfg);
  c.p_row = normalize_rows(c.p);
  c.p_col = normalize_cols(c.p);
  c.h = mixture_matrix(c.p_col);
  c.l = laplacian(c.h);
  return c;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

int failures = 0;

void report(int id, bool pass, const std::string& what) {
  std::printf("[%s] criterion %2d: %s\n", pass ? "PASS" : "FAIL", id, what.c_str());
  if (!pass) ++failures;
}

// 1. L annihilates constants and has a near-zero smallest eigenvalue.
void criterion1() {
  const auto t0 = Clock::now();
  bool ok = true;
  std::string detail;
  try {
    const auto f = make_analytic("center", {}, square(32));
    const auto c = build_chain(f, KernelShape::box, 10);
    const std::vector<double> ones(std::size_t(c.l.nrows), 1.0);
    double linf = 0.0;
    for (double v : spmv(c.l, ones)) linf = std::max(linf, std::abs(v));
    const auto set = smallest_eigenpairs(c.l, 1);
    const double elapsed = seconds_since(t0);
    ok = linf <= 1e-10 && set.pairs.front().value <= 1e-8 && elapsed < 30.0;
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "Laplacian kernel 32x32: ||L*1||_inf=%.2e, lambda_min=%.2e, %.1fs", linf,
                  set.pairs.front().value, elapsed);
    detail = buf;
  } catch (const std::exception& e) {
    ok = false;
    detail = std::string("Laplacian kernel 32x32: exception: ") + e.what();
  }
  report(1, ok, detail);
}

// 2. Sparse eigensolver vs dense Jacobi oracle on 16x16 center flow.
void criterion2() {
  const auto t0 = Clock::now();
  bool ok = true;
  std::string detail;
  try {
    const auto f = make_analytic("center", {}, square(16));
    const auto c = build_chain(f, KernelShape::box, 5);
    const int k = 6;
    const auto set = smallest_eigenpairs(c.l, k);
    const auto ref = oracle::jacobi_eigen(oracle::to_dense(c.l));
    double worst_val = 0.0, worst_align = 1.0;
    for (int i = 0; i < k; ++i) {
      const double lam = set.pairs[std::size_t(i)].value;
      const double lam_ref = ref.values[std::size_t(i)];
      worst_val = std::max(worst_val,
                           std::abs(lam - lam_ref) / std::max(std::abs(lam_ref), 1.0));
      // Degenerate eigenvalues define an eigenspace, not a basis: measure the
      // projection onto the span of all oracle modes at the same eigenvalue.
      double align2 = 0.0;
      for (std::size_t j = 0; j < ref.values.size(); ++j) {
        if (std::abs(ref.values[j] - lam) > std::max(1e-6 * std::abs(lam), 1e-8)) continue;
        const double d = dot(set.pairs[std::size_t(i)].vector, ref.vectors[j]);
        align2 += d * d;
      }
      worst_align = std::min(worst_align, std::sqrt(align2));
    }
    const double elapsed = seconds_since(t0);
    ok = worst_val <= 1e-6 && worst_align >= 1.0 - 1e-6 && elapsed < 60.0;
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "dense-oracle match 16x16: max rel err %.2e, min alignment %.9f, %.1fs",
                  worst_val, worst_align, elapsed);
    detail = buf;
  } catch (const std::exception& e) {
    ok = false;
    detail = std::string("dense-oracle match 16x16: exception: ") + e.what();
  }
  report(2, ok, detail);
}

// 3. Energy identity sum_ij H_ij (f_i - f_j)^2 == 2 f^T L f.
void criterion3() {
  bool ok = true;
  std::string detail;
  try {
    const auto f = make_analytic("center", {}, square(24));
    const auto c = build_chain(f, KernelShape::box, 5);
    const auto hd = oracle::to_dense(c.h);
    std::mt19937_64 rng(31);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const auto x = oracle::random_unit_vector(c.l.nrows, rng);
      double energy = 0.0;
      for (std::int64_t i = 0; i < hd.nrows; ++i)
        for (std::int64_t j = 0; j < hd.ncols; ++j) {
          const double diff = x[std::size_t(i)] - x[std::size_t(j)];
          energy += hd.at(i, j) * diff * diff;
        }
      const auto lx = spmv(c.l, x);
      const double q2 = 2.0 * dot(x, lx);
      const double err = std::abs(energy - q2);
      worst = std::max(worst, err / std::max(q2, 1e-300));
      if (err > 1e-9 * q2) ok = false;
    }
    char buf[160];
    std::snprintf(buf, sizeof(buf), "energy identity 24x24, 100 vectors: worst rel err %.2e",
                  worst);
    detail = buf;
  } catch (const std::exception& e) {
    ok = false;
    detail = std::string("energy identity 24x24: exception: ") + e.what();
  }
  report(3, ok, detail);
}

// 4. Row normalization preserves the max, column normalization the sum.
void criterion4() {
  bool ok = true;
  std::string detail;
  try {
    const auto f = make_analytic("center", {}, square(24));
    const auto c = build_chain(f, KernelShape::box, 5);
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    double worst_max = 0.0, worst_sum = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> x(std::size_t(c.p.nrows));
      for (auto& v : x) v = u(rng);
      double mx = x[0], sum = 0.0;
      for (double v : x) {
        mx = std::max(mx, v);
        sum += v;
      }
      for (double v : spmv(c.p_row, x)) worst_max = std::max(worst_max, v - mx);
      double sum2 = 0.0;
      for (double v : spmv(c.p_col, x)) sum2 += v;
      worst_sum = std::max(worst_sum, std::abs(sum2 - sum));
    }
    ok = worst_max <= 1e-12 && worst_sum <= 1e-9 * double(c.p.nrows);
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "preservation laws: max overshoot %.2e, sum drift %.2e (N=%lld)", worst_max,
                  worst_sum, static_cast<long long>(c.p.nrows));
    detail = buf;
  } catch (const std::exception& e) {
    ok = false;
    detail = std::string("preservation laws: exception: ") + e.what();
  }
  report(4, ok, detail);
}

// 5. Four-node path-graph Laplacian spectrum in closed form.
void criterion5() {
  bool ok = true;
  std::string detail;
  try {
    SparseMatrix l;
    l.nrows = l.ncols = 4;
    l.row_offsets = {0, 2, 5, 8, 10};
    l.col_indices = {0, 1, 0, 1, 2, 1, 2, 3, 2, 3};
    l.values = {1, -1, -1, 2, -1, -1, 2, -1, -1, 1};
    const auto set = smallest_eigenpairs(l, 4);
    const double expected[4] = {0.0, 2.0 - std::sqrt(2.0), 2.0, 2.0 + std::sqrt(2.0)};
    double worst = 0.0;
    for (int i = 0; i < 4; ++i)
      worst = std::max(worst, std::abs(set.pairs[std::size_t(i)].value - expected[i]));
    ok = worst <= 1e-8;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "path-graph spectrum: max abs err %.2e", worst);
    detail = buf;
  } catch (const std::exception& e) {
    ok = false;
    detail = std::string("path-graph spectrum: exception: ") + e.what();
  }
  report(5, ok, detail);
}

// 6. Mixture-matrix row sparsity bound 2D^2 - 2D + 1 for trajectory span D.
void criterion6() {
  bool ok = true;
  std::string detail = "sparsity bound 64x64:";
  try {
    const auto f = make_analytic("constant", {{"vx", 1.0}}, square(64));
    for (int half : {1, 2, 4}) {  // spans D = 3, 5, 9
      AssemblyConfig cfg;
      cfg.kernel = make_kernel(KernelShape::box, half);
      cfg.step = 1.0;  // one cell per sample
      cfg.deposit = Deposition::nearest;
      const auto p = assemble_probability_matrix(f, cfg);
      const auto h = mixture_matrix(normalize_cols(p));
      const std::int64_t span = 2 * half + 1;
      const std::int64_t bound = 2 * span * span - 2 * span + 1;
      std::int64_t max_nnz = 0;
      for (std::int64_t i = 0; i < h.nrows; ++i)
        max_nnz = std::max(max_nnz, h.row_offsets[std::size_t(i) + 1] -
                                        h.row_offsets[std::size_t(i)]);
      if (max_nnz > bound) ok = false;
      char buf[64];
      std::snprintf(buf, sizeof(buf), " D=%lld max %lld <= %lld;",
                    static_cast<long long>(span), static_cast<long long>(max_nnz),
                    static_cast<long long>(bound));
      detail += buf;
    }
  } catch (const std::exception& e) {
    ok = false;
    detail += std::string(" exception: ") + e.what();
  }
  report(6, ok, detail);
}

// 7. LIC output is strongly correlated along the flow and not across it.
void criterion7() {
  bool ok = true;
  std::string detail;
  try {
    const std::int64_t n = 128;
    const auto f = make_analytic("constant", {{"vx", 1.0}}, square(n));
    const auto c = build_chain(f, KernelShape::box, 10);
    const auto noise = binary_noise(f.domain(), 77);
    const auto lic = lic_image(c.p_row, noise);
    double mean = 0.0;
    for (double v : lic.samples) mean += v;
    mean /= double(lic.samples.size());
    auto autocorr = [&](std::int64_t dx, std::int64_t dy) {
      double num = 0.0, den = 0.0;
      for (std::int64_t y = 0; y + dy < n; ++y)
        for (std::int64_t x = 0; x + dx < n; ++x) {
          const double a = lic.samples[std::size_t(y * n + x)] - mean;
          const double b = lic.samples[std::size_t((y + dy) * n + (x + dx))] - mean;
          num += a * b;
          den += a * a;
        }
      return num / den;
    };
    const double along = autocorr(1, 0);
    const double across = autocorr(0, 1);
    ok = along >= 0.8 && std::abs(across) <= 0.15 && mean >= 0.46 && mean <= 0.54;
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "LIC anisotropy 128x128: along %.3f, across %.3f, mean %.3f", along, across,
                  mean);
    detail = buf;
  } catch (const std::exception& e) {
    ok = false;
    detail = std::string("LIC anisotropy: exception: ") + e.what();
  }
  report(7, ok, detail);
}

// 8. Eigenvector oscillation grows with the eigenvalue (multiscale ordering).
void criterion8() {
  bool ok = true;
  std::string detail;
  try {
    const std::int64_t n = 64;
    const auto f = make_analytic("center", {}, square(n));
    // A long kernel so streamline mixing dominates: the low spectrum is then
    // mostly radial modes whose oscillation grows with the eigenvalue.
    const auto c = build_chain(f, KernelShape::box, 50);
    const int k = 8;
    SpectralOptions opts;
    const auto set = smallest_eigenpairs(c.l, k, opts);
    // Zero crossings along the middle scan line. Entries below 1e-3 of the
    // line maximum are skipped: one partner of a degenerate angular pair is
    // numerically null on this line and its signs are noise.
    std::vector<int> crossings;
    for (const auto& pair : set.pairs) {
      double line_max = 0.0;
      for (std::int64_t x = 0; x < n; ++x)
        line_max = std::max(line_max, std::abs(pair.vector[std::size_t((n / 2) * n + x)]));
      int count = 0, last = 0;
      for (std::int64_t x = 0; x < n; ++x) {
        const double v = pair.vector[std::size_t((n / 2) * n + x)];
        if (std::abs(v) <= 1e-3 * line_max) continue;
        const int s = v > 0.0 ? 1 : -1;
        if (last != 0 && s != last) ++count;
        last = s;
      }
      crossings.push_back(count);
    }
    int inversions = 0;
    for (std::size_t i = 1; i < crossings.size(); ++i)
      if (crossings[i] < crossings[i - 1]) ++inversions;
    bool rayleigh_ok = true;
    for (std::size_t i = 1; i < set.pairs.size(); ++i) {
      const auto lx = spmv(c.l, set.pairs[i].vector);
      const auto ly = spmv(c.l, set.pairs[i - 1].vector);
      const double qi = dot(set.pairs[i].vector, lx);
      const double qp = dot(set.pairs[i - 1].vector, ly);
      if (qi < qp - opts.tol) rayleigh_ok = false;
    }
    ok = inversions <= 1 && rayleigh_ok;
    std::string cs;
    for (std::size_t i = 0; i < crossings.size(); ++i)
      cs += (i ? "," : "") + std::to_string(crossings[i]);
    detail = "multiscale ordering 64x64: crossings [" + cs + "], inversions " +
             std::to_string(inversions) + ", Rayleigh " + (rayleigh_ok ? "ordered" : "NOT ordered");
  } catch (const std::exception& e) {
    ok = false;
    detail = std::string("multiscale ordering: exception: ") + e.what();
  }
  report(8, ok, detail);
}

// 9. Identical configurations produce bit-identical artifacts.
void criterion9() {
  bool ok = true;
  std::string detail;
  try {
    auto run = [&](const fs::path& out, int ndim) {
      PipelineConfig cfg;
      cfg.field = ndim == 2 ? "center" : "abc";
      cfg.dims = ndim == 2 ? std::vector<std::int64_t>{16, 16}
                           : std::vector<std::int64_t>{10, 10, 10};
      if (ndim == 3) cfg.spacing = {0.6, 0.6, 0.6};
      cfg.half_length = 4;
      cfg.eig_count = 4;
      cfg.select_count = 2;
      cfg.seed = 9;
      cfg.out_dir = out.string();
      fs::remove_all(out);
      run_pipeline(cfg);
    };
    auto read_bytes = [](const fs::path& p) {
      std::ifstream in(p, std::ios::binary);
      return std::string((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
    };
    int compared = 0;
    for (int ndim : {2, 3}) {
      const fs::path a = fs::temp_directory_path() / ("acc9_a" + std::to_string(ndim));
      const fs::path b = fs::temp_directory_path() / ("acc9_b" + std::to_string(ndim));
      run(a, ndim);
      run(b, ndim);
      for (const auto& entry : fs::directory_iterator(a)) {
        const auto name = entry.path().filename().string();
        if (name == "report.txt") continue;  // wall-clock timings differ
        if (read_bytes(entry.path()) != read_bytes(b / name)) {
          ok = false;
          detail = "reproducibility: mismatch in " + name;
        }
        ++compared;
      }
      fs::remove_all(a);
      fs::remove_all(b);
    }
    if (ok)
      detail = "reproducibility: " + std::to_string(compared) +
               " artifacts bit-identical across reruns (2D and 3D)";
  } catch (const std::exception& e) {
    ok = false;
    detail = std::string("reproducibility: exception: ") + e.what();
  }
  report(9, ok, detail);
}

// 10. Full-scale configuration completes end to end inside the time budget.
void criterion10() {
  const auto t0 = Clock::now();
  bool ok = true;
  std::string detail;
  try {
    PipelineConfig cfg;
    cfg.field = "center";
    cfg.dims = {256, 256};
    cfg.kernel = KernelShape::gaussian;
    cfg.half_length = 100;
    cfg.eig_count = 5;
    cfg.select_count = 3;
    cfg.seed = 10;
    const fs::path out = fs::temp_directory_path() / "acc10_full";
    fs::remove_all(out);
    cfg.out_dir = out.string();
    const auto rep = run_pipeline(cfg);
    const double elapsed = seconds_since(t0);
    const bool has_records = !rep.get("matrix.P.nnz").empty() &&
                             !rep.get("matrix.H.nnz").empty() &&
                             !rep.get("stage.eigensolve.seconds").empty();
    ok = elapsed < 7200.0 && has_records;
    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "full scale 256x256 (gaussian, half-length 100, k=5): %.1fs, P nnz %s, H nnz %s",
                  elapsed, rep.get("matrix.P.nnz").c_str(), rep.get("matrix.H.nnz").c_str());
    detail = buf;
    fs::remove_all(out);
  } catch (const std::exception& e) {
    ok = false;
    detail = std::string("full scale 256x256: exception: ") + e.what();
  }
  report(10, ok, detail);
}

}  // namespace

int main() {
  criterion1();
  criterion2();
  criterion3();
  criterion4();
  criterion5();
  criterion6();
  criterion7();
  criterion8();
  criterion9();
  criterion10();
  if (failures == 0) {
    std::printf("acceptance: all 10 criteria passed\n");
    return 0;
  }
  std::printf("acceptance: %d criterion(s) failed\n", failures);
  return 1;
}
