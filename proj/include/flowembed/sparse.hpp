#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "flowembed/field.hpp"
#include "flowembed/kernel.hpp"
#include "flowembed/tracer.hpp"

namespace flowembed {

/// Compressed sparse row matrix. Column indices are strictly increasing
/// within each row; immutable after construction.
struct SparseMatrix {
  std::int64_t nrows = 0;
  std::int64_t ncols = 0;
  std::vector<std::int64_t> row_offsets;  // nrows + 1
  std::vector<std::int64_t> col_indices;
  std::vector<double> values;

  std::int64_t nnz() const { return std::int64_t(values.size()); }

  static SparseMatrix identity(std::int64_t n);

  /// Throws std::runtime_error if the CSR structure is inconsistent.
  void validate() const;
};

// ---------------------------------------------------------------------------
// SpMV. The OpenMP version partitions rows across threads; results are
// bit-identical to the serial reference for any thread count.
std::vector<double> spmv(const SparseMatrix& m, std::span<const double> x);
std::vector<double> spmv_serial(const SparseMatrix& m, std::span<const double> x);

SparseMatrix transpose(const SparseMatrix& m);

/// Scale each row to sum 1. Throws on a zero row (names the cell).
SparseMatrix normalize_rows(const SparseMatrix& m);

/// Scale each column to sum 1 (the Bayes transition from per-particle to
/// per-cell conditionals). Throws on a zero column (names the cell).
SparseMatrix normalize_cols(const SparseMatrix& m);

/// H = P * P^T with every diagonal entry overwritten with 1. The lower
/// triangle is computed and mirrored, so H is symmetric by construction.
SparseMatrix mixture_matrix(const SparseMatrix& p_col);

/// L = D - H with D_ii = sum_j H_ij. Requires H symmetric (checked to 1e-12)
/// with unit diagonal.
SparseMatrix laplacian(const SparseMatrix& h);

/// Sparse-sparse product B * P (per-row dense-workspace scatter).
SparseMatrix compose_filters(const SparseMatrix& b, const SparseMatrix& p);
SparseMatrix compose_filters_serial(const SparseMatrix& b, const SparseMatrix& p);

// ---------------------------------------------------------------------------
// Assembly of the trajectory probability matrix P.

enum class Deposition { nearest, multilinear };

Deposition deposition_from_string(const std::string& s);
std::string to_string(Deposition d);

struct AssemblyConfig {
  DiscreteKernel kernel;
  double step = 0.0;  // > 0
  Parameterization mode = Parameterization::arc_length;
  Deposition deposit = Deposition::multilinear;
};

/// Row i: trace a particle seeded at the center of cell i and deposit
/// kernel-weighted interpolation mass onto the visited cells. Truncated
/// trajectories are renormalized over the surviving sample indices.
SparseMatrix assemble_probability_matrix(const VectorField& field,
                                         const AssemblyConfig& cfg);
SparseMatrix assemble_probability_matrix_serial(const VectorField& field,
                                                const AssemblyConfig& cfg);

// ---------------------------------------------------------------------------
// "SMAT1" dump: text header `SMAT1 <nrows> <ncols> <nnz>\n` then raw
// little-endian u64 row_offsets, u64 col_indices, f64 values.
void save_matrix(const SparseMatrix& m, const std::string& path);
SparseMatrix load_matrix(const std::string& path);

}  // namespace flowembed
