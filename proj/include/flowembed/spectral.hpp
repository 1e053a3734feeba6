#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowembed/sparse.hpp"

namespace flowembed {

struct EigenPair {
  double value = 0.0;           // eigenvalue, >= 0 up to solver tolerance
  std::vector<double> vector;   // unit 2-norm; largest-magnitude entry positive
  double residual = 0.0;        // ||L v - lambda v||_2
};

struct EmbeddingSet {
  std::vector<EigenPair> pairs;     // ascending eigenvalue
  std::vector<double> amplitudes;   // per-pair p-norms, filled by select_eigenvectors
  Domain domain;
  std::uint64_t start_seed = 0;     // RNG seed of the Lanczos start vector
  int kernel_dimension = 0;         // count of eigenvalues below 1e-8
  bool disconnected_warning = false;
};

struct SpectralOptions {
  double tol = 1e-8;            // residual bound per returned pair
  std::int64_t max_iter = 0;    // Lanczos step cap; 0 means 40*k
  std::uint64_t seed = 0x5eed5eedULL;
};

/// Thrown when fewer than k pairs converge within max_iter; carries the
/// converged pairs and their residuals.
class NotConvergedError : public std::runtime_error {
 public:
  NotConvergedError(const std::string& what, EmbeddingSet partial)
      : std::runtime_error(what), partial_result(std::move(partial)) {}
  EmbeddingSet partial_result;
};

/// k smallest eigenpairs of a symmetric PSD matrix via Lanczos iteration with
/// full reorthogonalization. The near-zero constant-vector pair is returned,
/// not suppressed.
EmbeddingSet smallest_eigenpairs(const SparseMatrix& l, int k,
                                 const SpectralOptions& opts = {});

/// p-norm amplitude; p >= 1, or infinity for the max norm.
double amplitude(std::span<const double> v, double p);

/// Ranks pairs 1..k-1 (the constant pair 0 is excluded) by amplitude
/// descending, ties broken by ascending eigenvalue; returns the first m
/// indices into set.pairs and fills set.amplitudes. m larger than the number
/// of non-constant vectors is clamped.
std::vector<int> select_eigenvectors(EmbeddingSet& set, int m, double p);

// "EMB1" dump: text header `EMB1 <N> <k> <dims...>\n`, then per pair f64
// eigenvalue, f64 amplitude, N x f64 vector entries, little-endian.
void save_embeddings(const EmbeddingSet& set, const std::string& path);
EmbeddingSet load_embeddings(const std::string& path);

}  // namespace flowembed
