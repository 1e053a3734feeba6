#include "flowembed/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace flowembed {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

// Symmetric tridiagonal QL with implicit shifts (EISPACK tql2). diag/off are
// overwritten with eigenvalues (ascending) and garbage; z accumulates the
// eigenvector matrix (columns are eigenvectors), starting from identity.
void tridiag_ql(std::vector<double>& diag, std::vector<double>& off,
                std::vector<std::vector<double>>& z) {
  const int n = int(diag.size());
  if (n == 0) return;
  off.push_back(0.0);
  for (int l = 0; l < n; ++l) {
    int iter = 0;
    int m;
    do {
      for (m = l; m < n - 1; ++m) {
        const double dd = std::abs(diag[m]) + std::abs(diag[m + 1]);
        if (std::abs(off[m]) <= std::numeric_limits<double>::epsilon() * dd) break;
      }
      if (m != l) {
        if (iter++ == 50) throw std::runtime_error("spectral: tridiagonal QL stalled");
        double g = (diag[l + 1] - diag[l]) / (2.0 * off[l]);
        double r = std::hypot(g, 1.0);
        g = diag[m] - diag[l] + off[l] / (g + std::copysign(r, g));
        double s = 1.0, c = 1.0, p = 0.0;
        int i = m - 1;
        for (; i >= l; --i) {
          double f = s * off[i];
          const double b = c * off[i];
          r = std::hypot(f, g);
          off[i + 1] = r;
          if (r == 0.0) {
            diag[i + 1] -= p;
            off[m] = 0.0;
            break;
          }
          s = f / r;
          c = g / r;
          g = diag[i + 1] - p;
          r = (diag[i] - g) * s + 2.0 * c * b;
          p = s * r;
          diag[i + 1] = g + p;
          g = c * r - b;
          for (int row = 0; row < n; ++row) {
            f = z[std::size_t(row)][std::size_t(i + 1)];
            z[std::size_t(row)][std::size_t(i + 1)] =
                s * z[std::size_t(row)][std::size_t(i)] + c * f;
            z[std::size_t(row)][std::size_t(i)] =
                c * z[std::size_t(row)][std::size_t(i)] - s * f;
          }
        }
        if (r == 0.0 && i >= l) continue;
        diag[l] -= p;
        off[l] = g;
        off[m] = 0.0;
      }
    } while (m != l);
  }
  off.pop_back();
  // Sort ascending, permuting eigenvector columns.
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return diag[std::size_t(a)] < diag[std::size_t(b)]; });
  std::vector<double> d2(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) d2[std::size_t(i)] = diag[std::size_t(order[std::size_t(i)])];
  diag = d2;
  for (auto& row : z) {
    std::vector<double> r2(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) r2[std::size_t(i)] = row[std::size_t(order[std::size_t(i)])];
    row = r2;
  }
}

struct RitzInfo {
  std::vector<double> values;              // ascending
  std::vector<std::vector<double>> vecs;   // z[row][col]
};

RitzInfo solve_tridiag(const std::vector<double>& alpha, const std::vector<double>& beta) {
  RitzInfo r;
  const int m = int(alpha.size());
  r.values = alpha;
  std::vector<double> off(beta.begin(), beta.begin() + std::max(0, m - 1));
  r.vecs.assign(std::size_t(m), std::vector<double>(std::size_t(m), 0.0));
  for (int i = 0; i < m; ++i) r.vecs[std::size_t(i)][std::size_t(i)] = 1.0;
  tridiag_ql(r.values, off, r.vecs);
  return r;
}

void fix_sign(std::vector<double>& v) {
  std::size_t imax = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (std::abs(v[i]) > std::abs(v[imax])) imax = i;
  if (v[imax] < 0.0)
    for (auto& x : v) x = -x;
}

}  // namespace

EmbeddingSet smallest_eigenpairs(const SparseMatrix& l, int k, const SpectralOptions& opts) {
  const std::int64_t n = l.nrows;
  if (l.ncols != n) throw std::invalid_argument("spectral: matrix must be square");
  if (k < 1 || std::int64_t(k) > n)
    throw std::invalid_argument("spectral: k must be in [1, N]");

  // Default step budget grows with the problem: clustered low ends of large
  // spectra need far more than the classical 40k steps.
  const std::int64_t budget =
      opts.max_iter > 0 ? opts.max_iter
                        : std::max<std::int64_t>(40 * k, std::min<std::int64_t>(n, 1024));
  std::int64_t steps_used = 0;
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  // Matrix scale for breakdown detection.
  double scale = 0.0;
  for (double v : l.values) scale = std::max(scale, std::abs(v));
  const double breakdown_tol = std::max(scale, 1.0) * 1e-13;

  // Converged pairs are locked and deflated out of subsequent rounds; a plain
  // Krylov space holds one vector per eigenspace, so degenerate copies are
  // only reachable through restarted, deflated rounds.
  std::vector<EigenPair> locked;

  // One Lanczos round with full reorthogonalization against both the locked
  // vectors and the round's own basis. Returns up to `need` assembled pairs
  // whose true residual meets the tolerance.
  auto run_round = [&](int need) -> std::vector<EigenPair> {
    const std::int64_t space = n - std::int64_t(locked.size());
    if (space <= 0 || steps_used >= budget) return {};

    std::vector<std::vector<double>> basis;
    std::vector<double> alpha, beta;

    auto orthogonalize = [&](std::vector<double>& w) {
      for (const auto& p : locked) {
        const double c = dot(w, p.vector);
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= c * p.vector[i];
      }
      for (const auto& u : basis) {
        const double c = dot(w, u);
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= c * u[i];
      }
    };

    auto random_orthogonal_unit = [&](std::vector<double>& v) -> bool {
      for (int attempt = 0; attempt < 8; ++attempt) {
        for (auto& x : v) x = gauss(rng);
        orthogonalize(v);
        orthogonalize(v);
        const double nv = norm2(v);
        if (nv > 1e-8) {
          for (auto& x : v) x /= nv;
          return true;
        }
      }
      return false;
    };

    std::vector<double> v(static_cast<std::size_t>(n));
    if (!random_orthogonal_unit(v)) return {};

    RitzInfo ritz;
    std::int64_t last_check = -1;
    while (std::int64_t(basis.size()) < space && steps_used < budget) {
      ++steps_used;
      basis.push_back(v);
      std::vector<double> w = spmv(l, v);
      alpha.push_back(dot(w, v));
      // Full reorthogonalization (twice) subsumes the classical alpha/beta
      // subtraction and keeps the basis orthonormal to machine precision.
      orthogonalize(w);
      orthogonalize(w);
      const double b = norm2(w);
      if (b > breakdown_tol) {
        beta.push_back(b);
        for (std::size_t i = 0; i < w.size(); ++i) v[i] = w[i] / b;
      } else {
        beta.push_back(0.0);
        if (std::int64_t(basis.size()) < space) {
          if (!random_orthogonal_unit(v)) break;  // invariant subspace exhausted
        }
      }

      const std::int64_t m = std::int64_t(basis.size());
      const std::int64_t check_every = std::max<std::int64_t>(8, m / 8);
      const bool must_check = m >= need && (m - last_check >= check_every || m == space ||
                                            steps_used == budget || beta.back() == 0.0);
      if (!must_check) continue;
      last_check = m;
      ritz = solve_tridiag(alpha, beta);
      bool all_ok = true;
      for (int i = 0; i < need; ++i) {
        const double bound =
            std::abs(beta.back() * ritz.vecs[std::size_t(m - 1)][std::size_t(i)]);
        if (bound > 0.1 * opts.tol) {
          all_ok = false;
          break;
        }
      }
      if (all_ok) break;
    }

    const std::int64_t m = std::int64_t(basis.size());
    if (m == 0) return {};
    if (std::int64_t(ritz.values.size()) != m) ritz = solve_tridiag(alpha, beta);

    std::vector<EigenPair> out;
    const int avail = int(std::min<std::int64_t>(need, m));
    for (int i = 0; i < avail; ++i) {
      EigenPair pair;
      pair.vector.assign(std::size_t(n), 0.0);
      for (std::int64_t j = 0; j < m; ++j) {
        const double c = ritz.vecs[std::size_t(j)][std::size_t(i)];
        if (c == 0.0) continue;
        const auto& u = basis[std::size_t(j)];
        for (std::size_t t = 0; t < pair.vector.size(); ++t) pair.vector[t] += c * u[t];
      }
      const double nv = norm2(pair.vector);
      if (nv <= 0.0) continue;
      for (auto& x : pair.vector) x /= nv;
      // True residual and Rayleigh value of the assembled vector.
      const std::vector<double> lv = spmv(l, pair.vector);
      double lambda = dot(lv, pair.vector);
      double res = 0.0;
      for (std::size_t t = 0; t < lv.size(); ++t) {
        const double r = lv[t] - lambda * pair.vector[t];
        res += r * r;
      }
      pair.residual = std::sqrt(res);
      if (lambda < 0.0 && lambda > -opts.tol) lambda = 0.0;
      pair.value = lambda;
      if (pair.residual <= opts.tol) out.push_back(std::move(pair));
    }
    return out;
  };

  // Collection: lock batches of smallest deflated pairs until k are held.
  while (std::int64_t(locked.size()) < k) {
    auto got = run_round(k - int(locked.size()));
    if (got.empty()) break;
    for (auto& p : got) locked.push_back(std::move(p));
  }

  // Verification: the smallest eigenvalue outside the locked span must not
  // undercut the largest locked one, or a degenerate copy was missed.
  while (std::int64_t(locked.size()) >= k && steps_used < budget) {
    auto probe = run_round(1);
    if (probe.empty()) break;
    auto worst = std::max_element(
        locked.begin(), locked.end(),
        [](const EigenPair& a, const EigenPair& b) { return a.value < b.value; });
    if (probe.front().value < worst->value - opts.tol) {
      *worst = std::move(probe.front());
    } else {
      break;
    }
  }

  EmbeddingSet set;
  set.start_seed = opts.seed;
  set.pairs = std::move(locked);
  std::sort(set.pairs.begin(), set.pairs.end(),
            [](const EigenPair& a, const EigenPair& b) { return a.value < b.value; });
  for (auto& p : set.pairs) fix_sign(p.vector);

  set.kernel_dimension = 0;
  for (const auto& p : set.pairs)
    if (p.value <= 1e-8) ++set.kernel_dimension;
  set.disconnected_warning = set.kernel_dimension > 1;

  if (std::int64_t(set.pairs.size()) < k) {
    throw NotConvergedError(
        "spectral: only " + std::to_string(set.pairs.size()) + " of " + std::to_string(k) +
            " eigenpairs converged within " + std::to_string(budget) + " Lanczos steps",
        std::move(set));
  }
  return set;
}

double amplitude(std::span<const double> v, double p) {
  if (v.empty()) throw std::invalid_argument("spectral: amplitude of empty vector");
  if (std::isinf(p)) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
  }
  if (p < 1.0) throw std::invalid_argument("spectral: amplitude norm order must be >= 1");
  double s = 0.0;
  for (double x : v) s += std::pow(std::abs(x), p);
  return std::pow(s, 1.0 / p);
}

std::vector<int> select_eigenvectors(EmbeddingSet& set, int m, double p) {
  const int k = int(set.pairs.size());
  if (k == 0) throw std::invalid_argument("spectral: empty embedding set");
  set.amplitudes.resize(std::size_t(k));
  for (int i = 0; i < k; ++i)
    set.amplitudes[std::size_t(i)] = amplitude(set.pairs[std::size_t(i)].vector, p);
  // Pair 0 is the constant kernel vector; it carries no flow detail.
  std::vector<int> candidates;
  for (int i = 1; i < k; ++i) candidates.push_back(i);
  if (m < 1) throw std::invalid_argument("spectral: selection count must be >= 1");
  std::stable_sort(candidates.begin(), candidates.end(), [&](int a, int b) {
    if (set.amplitudes[std::size_t(a)] != set.amplitudes[std::size_t(b)])
      return set.amplitudes[std::size_t(a)] > set.amplitudes[std::size_t(b)];
    return set.pairs[std::size_t(a)].value < set.pairs[std::size_t(b)].value;
  });
  if (m < int(candidates.size())) candidates.resize(std::size_t(m));
  return candidates;
}

void save_embeddings(const EmbeddingSet& set, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("spectral: cannot open '" + path + "' for writing");
  const std::int64_t n = set.pairs.empty() ? 0 : std::int64_t(set.pairs.front().vector.size());
  std::ostringstream header;
  header << "EMB1 " << n << " " << set.pairs.size();
  for (int a = 0; a < set.domain.ndim; ++a) header << " " << set.domain.dims[a];
  header << "\n";
  const std::string h = header.str();
  out.write(h.data(), std::streamsize(h.size()));
  for (std::size_t i = 0; i < set.pairs.size(); ++i) {
    const double value = set.pairs[i].value;
    const double amp = i < set.amplitudes.size() ? set.amplitudes[i] : 0.0;
    out.write(reinterpret_cast<const char*>(&value), sizeof(double));
    out.write(reinterpret_cast<const char*>(&amp), sizeof(double));
    out.write(reinterpret_cast<const char*>(set.pairs[i].vector.data()),
              std::streamsize(set.pairs[i].vector.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("spectral: write failed for '" + path + "'");
}

EmbeddingSet load_embeddings(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("spectral: cannot open '" + path + "'");
  std::string header_line;
  std::getline(in, header_line);
  std::istringstream hs(header_line);
  std::string magic;
  std::int64_t n = 0, k = 0;
  hs >> magic >> n >> k;
  if (magic != "EMB1" || !hs || n < 0 || k < 0)
    throw std::runtime_error("spectral: '" + path + "': bad EMB1 header");
  EmbeddingSet set;
  std::vector<std::int64_t> dims;
  std::int64_t d;
  while (hs >> d) dims.push_back(d);
  set.domain.ndim = int(dims.size());
  for (std::size_t a = 0; a < dims.size() && a < 3; ++a) set.domain.dims[a] = dims[a];
  for (std::int64_t i = 0; i < k; ++i) {
    EigenPair pair;
    double amp = 0.0;
    in.read(reinterpret_cast<char*>(&pair.value), sizeof(double));
    in.read(reinterpret_cast<char*>(&amp), sizeof(double));
    pair.vector.resize(static_cast<std::size_t>(n));
    in.read(reinterpret_cast<char*>(pair.vector.data()),
            std::streamsize(pair.vector.size() * sizeof(double)));
    if (!in) throw std::runtime_error("spectral: '" + path + "': truncated EMB1 payload");
    set.amplitudes.push_back(amp);
    set.pairs.push_back(std::move(pair));
  }
  return set;
}

}  // namespace flowembed
