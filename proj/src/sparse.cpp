#include "flowembed/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace flowembed {

SparseMatrix SparseMatrix::identity(std::int64_t n) {
  SparseMatrix m;
  m.nrows = m.ncols = n;
  m.row_offsets.resize(std::size_t(n + 1));
  m.col_indices.resize(static_cast<std::size_t>(n));
  m.values.assign(std::size_t(n), 1.0);
  for (std::int64_t i = 0; i <= n; ++i) m.row_offsets[std::size_t(i)] = i;
  for (std::int64_t i = 0; i < n; ++i) m.col_indices[std::size_t(i)] = i;
  return m;
}

void SparseMatrix::validate() const {
  if (std::int64_t(row_offsets.size()) != nrows + 1)
    throw std::runtime_error("sparse: row_offsets size mismatch");
  if (row_offsets.front() != 0 || row_offsets.back() != nnz())
    throw std::runtime_error("sparse: row_offsets bounds mismatch");
  if (col_indices.size() != values.size())
    throw std::runtime_error("sparse: col/value size mismatch");
  for (std::int64_t i = 0; i < nrows; ++i) {
    if (row_offsets[std::size_t(i)] > row_offsets[std::size_t(i) + 1])
      throw std::runtime_error("sparse: decreasing row_offsets");
    for (std::int64_t e = row_offsets[std::size_t(i)]; e < row_offsets[std::size_t(i) + 1];
         ++e) {
      const std::int64_t c = col_indices[std::size_t(e)];
      if (c < 0 || c >= ncols) throw std::runtime_error("sparse: column out of range");
      if (e > row_offsets[std::size_t(i)] && col_indices[std::size_t(e - 1)] >= c)
        throw std::runtime_error("sparse: columns not strictly increasing");
      if (!std::isfinite(values[std::size_t(e)]))
        throw std::runtime_error("sparse: non-finite value");
    }
  }
}

std::vector<double> spmv_serial(const SparseMatrix& m, std::span<const double> x) {
  if (std::int64_t(x.size()) != m.ncols)
    throw std::invalid_argument("sparse: spmv length mismatch");
  std::vector<double> y(std::size_t(m.nrows), 0.0);
  for (std::int64_t i = 0; i < m.nrows; ++i) {
    double acc = 0.0;
    for (std::int64_t e = m.row_offsets[std::size_t(i)];
         e < m.row_offsets[std::size_t(i) + 1]; ++e)
      acc += m.values[std::size_t(e)] * x[std::size_t(m.col_indices[std::size_t(e)])];
    y[std::size_t(i)] = acc;
  }
  return y;
}

std::vector<double> spmv(const SparseMatrix& m, std::span<const double> x) {
  if (std::int64_t(x.size()) != m.ncols)
    throw std::invalid_argument("sparse: spmv length mismatch");
  std::vector<double> y(std::size_t(m.nrows), 0.0);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < m.nrows; ++i) {
    double acc = 0.0;
    for (std::int64_t e = m.row_offsets[std::size_t(i)];
         e < m.row_offsets[std::size_t(i) + 1]; ++e)
      acc += m.values[std::size_t(e)] * x[std::size_t(m.col_indices[std::size_t(e)])];
    y[std::size_t(i)] = acc;
  }
  return y;
}

SparseMatrix transpose(const SparseMatrix& m) {
  SparseMatrix t;
  t.nrows = m.ncols;
  t.ncols = m.nrows;
  t.row_offsets.assign(std::size_t(t.nrows + 1), 0);
  t.col_indices.resize(std::size_t(m.nnz()));
  t.values.resize(std::size_t(m.nnz()));
  for (std::int64_t e = 0; e < m.nnz(); ++e)
    ++t.row_offsets[std::size_t(m.col_indices[std::size_t(e)]) + 1];
  for (std::int64_t i = 0; i < t.nrows; ++i)
    t.row_offsets[std::size_t(i) + 1] += t.row_offsets[std::size_t(i)];
  std::vector<std::int64_t> cursor(t.row_offsets.begin(), t.row_offsets.end() - 1);
  for (std::int64_t i = 0; i < m.nrows; ++i) {
    for (std::int64_t e = m.row_offsets[std::size_t(i)];
         e < m.row_offsets[std::size_t(i) + 1]; ++e) {
      const std::int64_t c = m.col_indices[std::size_t(e)];
      const std::int64_t slot = cursor[std::size_t(c)]++;
      t.col_indices[std::size_t(slot)] = i;  // rows visited in order -> sorted
      t.values[std::size_t(slot)] = m.values[std::size_t(e)];
    }
  }
  return t;
}

SparseMatrix normalize_rows(const SparseMatrix& m) {
  SparseMatrix out = m;
  for (std::int64_t i = 0; i < m.nrows; ++i) {
    double sum = 0.0;
    for (std::int64_t e = m.row_offsets[std::size_t(i)];
         e < m.row_offsets[std::size_t(i) + 1]; ++e)
      sum += m.values[std::size_t(e)];
    if (!(sum > 0.0))
      throw std::runtime_error("sparse: zero row sum at cell " + std::to_string(i));
    for (std::int64_t e = m.row_offsets[std::size_t(i)];
         e < m.row_offsets[std::size_t(i) + 1]; ++e)
      out.values[std::size_t(e)] /= sum;
  }
  return out;
}

SparseMatrix normalize_cols(const SparseMatrix& m) {
  std::vector<double> colsum(std::size_t(m.ncols), 0.0);
  for (std::int64_t e = 0; e < m.nnz(); ++e)
    colsum[std::size_t(m.col_indices[std::size_t(e)])] += m.values[std::size_t(e)];
  for (std::int64_t c = 0; c < m.ncols; ++c) {
    if (!(colsum[std::size_t(c)] > 0.0))
      throw std::runtime_error("sparse: unvisited cell (zero column sum) at cell " +
                               std::to_string(c));
  }
  SparseMatrix out = m;
  for (std::int64_t e = 0; e < m.nnz(); ++e)
    out.values[std::size_t(e)] /= colsum[std::size_t(m.col_indices[std::size_t(e)])];
  return out;
}

namespace {

// Rows of the product accumulate into a per-thread dense workspace with a
// marker array tracking the touched columns.
struct RowWorkspace {
  std::vector<double> acc;
  std::vector<std::int64_t> mark;  // row stamp per column
  std::vector<std::int64_t> touched;
  std::int64_t stamp = 0;
  explicit RowWorkspace(std::int64_t ncols)
      : acc(std::size_t(ncols), 0.0), mark(std::size_t(ncols), -1) {}
};

void accumulate_product_row(const SparseMatrix& a, const SparseMatrix& b, std::int64_t row,
                            std::int64_t col_limit, RowWorkspace& ws,
                            std::vector<std::int64_t>& cols_out,
                            std::vector<double>& vals_out) {
  ws.touched.clear();
  const std::int64_t stamp = ws.stamp++;
  for (std::int64_t ea = a.row_offsets[std::size_t(row)];
       ea < a.row_offsets[std::size_t(row) + 1]; ++ea) {
    const std::int64_t k = a.col_indices[std::size_t(ea)];
    const double av = a.values[std::size_t(ea)];
    for (std::int64_t eb = b.row_offsets[std::size_t(k)];
         eb < b.row_offsets[std::size_t(k) + 1]; ++eb) {
      const std::int64_t j = b.col_indices[std::size_t(eb)];
      if (j >= col_limit) break;  // columns are sorted
      if (ws.mark[std::size_t(j)] != stamp) {
        ws.mark[std::size_t(j)] = stamp;
        ws.acc[std::size_t(j)] = 0.0;
        ws.touched.push_back(j);
      }
      ws.acc[std::size_t(j)] += av * b.values[std::size_t(eb)];
    }
  }
  std::sort(ws.touched.begin(), ws.touched.end());
  cols_out.clear();
  vals_out.clear();
  for (std::int64_t j : ws.touched) {
    cols_out.push_back(j);
    vals_out.push_back(ws.acc[std::size_t(j)]);
  }
}

SparseMatrix spgemm(const SparseMatrix& a, const SparseMatrix& b, bool parallel) {
  if (a.ncols != b.nrows) throw std::invalid_argument("sparse: spgemm dimension mismatch");
  SparseMatrix c;
  c.nrows = a.nrows;
  c.ncols = b.ncols;
  c.row_offsets.assign(std::size_t(a.nrows + 1), 0);
  std::vector<std::vector<std::int64_t>> row_cols(std::size_t(a.nrows));
  std::vector<std::vector<double>> row_vals(std::size_t(a.nrows));
#pragma omp parallel if (parallel)
  {
    RowWorkspace ws(b.ncols);
    std::vector<std::int64_t> cols;
    std::vector<double> vals;
#pragma omp for schedule(dynamic, 64)
    for (std::int64_t i = 0; i < a.nrows; ++i) {
      accumulate_product_row(a, b, i, b.ncols, ws, cols, vals);
      row_cols[std::size_t(i)] = cols;
      row_vals[std::size_t(i)] = vals;
    }
  }
  for (std::int64_t i = 0; i < a.nrows; ++i)
    c.row_offsets[std::size_t(i) + 1] =
        c.row_offsets[std::size_t(i)] + std::int64_t(row_cols[std::size_t(i)].size());
  c.col_indices.reserve(std::size_t(c.row_offsets.back()));
  c.values.reserve(std::size_t(c.row_offsets.back()));
  for (std::int64_t i = 0; i < a.nrows; ++i) {
    c.col_indices.insert(c.col_indices.end(), row_cols[std::size_t(i)].begin(),
                         row_cols[std::size_t(i)].end());
    c.values.insert(c.values.end(), row_vals[std::size_t(i)].begin(),
                    row_vals[std::size_t(i)].end());
  }
  return c;
}

}  // namespace

SparseMatrix compose_filters(const SparseMatrix& b, const SparseMatrix& p) {
  return spgemm(b, p, true);
}

SparseMatrix compose_filters_serial(const SparseMatrix& b, const SparseMatrix& p) {
  return spgemm(b, p, false);
}

SparseMatrix mixture_matrix(const SparseMatrix& p_col) {
  if (p_col.nrows != p_col.ncols)
    throw std::invalid_argument("sparse: mixture matrix requires a square P");
  const std::int64_t n = p_col.nrows;
  const SparseMatrix pt = transpose(p_col);

  // Strict lower triangle of P P^T, one row per work item.
  std::vector<std::vector<std::int64_t>> row_cols(static_cast<std::size_t>(n));
  std::vector<std::vector<double>> row_vals(static_cast<std::size_t>(n));
#pragma omp parallel
  {
    RowWorkspace ws(n);
    std::vector<std::int64_t> cols;
    std::vector<double> vals;
#pragma omp for schedule(dynamic, 64)
    for (std::int64_t i = 0; i < n; ++i) {
      accumulate_product_row(p_col, pt, i, i, ws, cols, vals);
      row_cols[std::size_t(i)] = cols;
      row_vals[std::size_t(i)] = vals;
    }
  }

  // Mirror: row i of H = lower entries (i, j<i), diagonal 1, mirrored upper
  // entries (i, j>i) taken from lower rows.
  std::vector<std::int64_t> upper_count(std::size_t(n), 0);
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j : row_cols[std::size_t(i)]) ++upper_count[std::size_t(j)];

  SparseMatrix h;
  h.nrows = h.ncols = n;
  h.row_offsets.assign(std::size_t(n + 1), 0);
  for (std::int64_t i = 0; i < n; ++i)
    h.row_offsets[std::size_t(i) + 1] =
        h.row_offsets[std::size_t(i)] + std::int64_t(row_cols[std::size_t(i)].size()) + 1 +
        upper_count[std::size_t(i)];
  h.col_indices.resize(std::size_t(h.row_offsets.back()));
  h.values.resize(std::size_t(h.row_offsets.back()));

  std::vector<std::int64_t> cursor(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    std::int64_t slot = h.row_offsets[std::size_t(i)];
    for (std::size_t e = 0; e < row_cols[std::size_t(i)].size(); ++e, ++slot) {
      h.col_indices[std::size_t(slot)] = row_cols[std::size_t(i)][e];
      h.values[std::size_t(slot)] = row_vals[std::size_t(i)][e];
    }
    h.col_indices[std::size_t(slot)] = i;
    h.values[std::size_t(slot)] = 1.0;  // forced unit diagonal
    cursor[std::size_t(i)] = slot + 1;
  }
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::size_t e = 0; e < row_cols[std::size_t(i)].size(); ++e) {
      const std::int64_t j = row_cols[std::size_t(i)][e];
      const std::int64_t slot = cursor[std::size_t(j)]++;
      h.col_indices[std::size_t(slot)] = i;  // i ascending per column j -> sorted
      h.values[std::size_t(slot)] = row_vals[std::size_t(i)][e];
    }
  }
  return h;
}

SparseMatrix laplacian(const SparseMatrix& h) {
  if (h.nrows != h.ncols) throw std::invalid_argument("sparse: laplacian requires square H");
  // Symmetry check to 1e-12.
  const SparseMatrix ht = transpose(h);
  if (ht.row_offsets != h.row_offsets || ht.col_indices != h.col_indices)
    throw std::runtime_error("sparse: laplacian input is structurally asymmetric");
  for (std::int64_t e = 0; e < h.nnz(); ++e) {
    if (std::abs(ht.values[std::size_t(e)] - h.values[std::size_t(e)]) > 1e-12)
      throw std::runtime_error("sparse: laplacian input asymmetric beyond 1e-12");
  }
  SparseMatrix l = h;
  for (std::int64_t i = 0; i < h.nrows; ++i) {
    double degree = 0.0;
    std::int64_t diag = -1;
    for (std::int64_t e = h.row_offsets[std::size_t(i)];
         e < h.row_offsets[std::size_t(i) + 1]; ++e) {
      degree += h.values[std::size_t(e)];
      if (h.col_indices[std::size_t(e)] == i) diag = e;
      l.values[std::size_t(e)] = -h.values[std::size_t(e)];
    }
    if (diag < 0) throw std::runtime_error("sparse: laplacian input missing diagonal at row " +
                                           std::to_string(i));
    l.values[std::size_t(diag)] = degree - h.values[std::size_t(diag)];
  }
  return l;
}

// ---------------------------------------------------------------------------
// Assembly.

Deposition deposition_from_string(const std::string& s) {
  if (s == "nearest") return Deposition::nearest;
  if (s == "multilinear") return Deposition::multilinear;
  throw std::invalid_argument("sparse: unknown deposition '" + s + "'");
}

std::string to_string(Deposition d) {
  return d == Deposition::nearest ? "nearest" : "multilinear";
}

namespace {

// Deposit interpolation weights of a physical position onto the surrounding
// cells; weights sum to 1 (boundary queries clamp to the boundary cells).
void deposit_weights(const Domain& d, const Vec3& pos, Deposition scheme,
                     std::vector<std::pair<std::int64_t, double>>& out) {
  const int nd = d.ndim;
  if (scheme == Deposition::nearest) {
    std::array<std::int64_t, 3> idx{0, 0, 0};
    for (int a = 0; a < nd; ++a) {
      const double g = (pos[a] - d.origin[a]) / d.spacing[a];
      std::int64_t i = std::int64_t(std::llround(g));
      i = std::clamp<std::int64_t>(i, 0, d.dims[a] - 1);
      idx[a] = i;
    }
    out.emplace_back(d.flat_index(idx), 1.0);
    return;
  }
  std::array<std::int64_t, 3> base{0, 0, 0};
  std::array<double, 3> frac{0.0, 0.0, 0.0};
  for (int a = 0; a < nd; ++a) {
    const double g = (pos[a] - d.origin[a]) / d.spacing[a];
    std::int64_t i0 = std::int64_t(std::floor(g));
    double fr = g - double(i0);
    if (i0 < 0) {
      i0 = 0;
      fr = 0.0;
    } else if (i0 > d.dims[a] - 2) {
      i0 = d.dims[a] - 2;
      fr = std::min(g - double(i0), 1.0);
    }
    base[a] = i0;
    frac[a] = fr;
  }
  const int corners = 1 << nd;
  for (int c = 0; c < corners; ++c) {
    double w = 1.0;
    std::array<std::int64_t, 3> idx{0, 0, 0};
    for (int a = 0; a < nd; ++a) {
      const int bit = (c >> a) & 1;
      w *= bit ? frac[a] : (1.0 - frac[a]);
      idx[a] = base[a] + bit;
    }
    if (w > 0.0) out.emplace_back(d.flat_index(idx), w);
  }
}

void build_row(const VectorField& field, const AssemblyConfig& cfg, std::int64_t row,
               std::vector<std::pair<std::int64_t, double>>& entries) {
  const Domain& d = field.domain();
  TraceConfig tc{cfg.kernel.half_length, cfg.step, cfg.mode};
  const Trajectory traj = trace(field, d.cell_center(row), tc);
  const DiscreteKernel kern =
      (traj.first_index() == -cfg.kernel.half_length &&
       traj.last_index() == cfg.kernel.half_length)
          ? cfg.kernel
          : renormalize_truncated(cfg.kernel, traj.first_index(), traj.last_index());
  entries.clear();
  for (const auto& s : traj.samples) {
    const double kw = kern.weight(s.index);
    if (kw == 0.0) continue;
    const std::size_t before = entries.size();
    deposit_weights(d, s.position, cfg.deposit, entries);
    for (std::size_t e = before; e < entries.size(); ++e) entries[e].second *= kw;
  }
  // Merge duplicate cells.
  std::sort(entries.begin(), entries.end());
  std::size_t w = 0;
  for (std::size_t r = 0; r < entries.size(); ++r) {
    if (w > 0 && entries[w - 1].first == entries[r].first) {
      entries[w - 1].second += entries[r].second;
    } else {
      entries[w++] = entries[r];
    }
  }
  entries.resize(w);
}

SparseMatrix assemble(const VectorField& field, const AssemblyConfig& cfg, bool parallel) {
  if (!(cfg.step > 0.0)) throw std::invalid_argument("sparse: assembly step must be > 0");
  const Domain& d = field.domain();
  d.validate();
  const std::int64_t n = d.cell_count();
  std::vector<std::vector<std::pair<std::int64_t, double>>> rows(static_cast<std::size_t>(n));
#pragma omp parallel if (parallel)
  {
    std::vector<std::pair<std::int64_t, double>> entries;
#pragma omp for schedule(dynamic, 64)
    for (std::int64_t i = 0; i < n; ++i) {
      build_row(field, cfg, i, entries);
      rows[std::size_t(i)] = entries;
    }
  }
  SparseMatrix p;
  p.nrows = p.ncols = n;
  p.row_offsets.assign(std::size_t(n + 1), 0);
  for (std::int64_t i = 0; i < n; ++i)
    p.row_offsets[std::size_t(i) + 1] =
        p.row_offsets[std::size_t(i)] + std::int64_t(rows[std::size_t(i)].size());
  p.col_indices.reserve(std::size_t(p.row_offsets.back()));
  p.values.reserve(std::size_t(p.row_offsets.back()));
  for (std::int64_t i = 0; i < n; ++i) {
    for (const auto& [c, v] : rows[std::size_t(i)]) {
      p.col_indices.push_back(c);
      p.values.push_back(v);
    }
  }
  return p;
}

}  // namespace

SparseMatrix assemble_probability_matrix(const VectorField& field,
                                         const AssemblyConfig& cfg) {
  return assemble(field, cfg, true);
}

SparseMatrix assemble_probability_matrix_serial(const VectorField& field,
                                                const AssemblyConfig& cfg) {
  return assemble(field, cfg, false);
}

// ---------------------------------------------------------------------------
// SMAT1 I/O.

void save_matrix(const SparseMatrix& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("sparse: cannot open '" + path + "' for writing");
  std::ostringstream header;
  header << "SMAT1 " << m.nrows << " " << m.ncols << " " << m.nnz() << "\n";
  const std::string h = header.str();
  out.write(h.data(), std::streamsize(h.size()));
  auto write_u64 = [&](const std::vector<std::int64_t>& v) {
    std::vector<std::uint64_t> u(v.begin(), v.end());
    out.write(reinterpret_cast<const char*>(u.data()),
              std::streamsize(u.size() * sizeof(std::uint64_t)));
  };
  write_u64(m.row_offsets);
  write_u64(m.col_indices);
  out.write(reinterpret_cast<const char*>(m.values.data()),
            std::streamsize(m.values.size() * sizeof(double)));
  if (!out) throw std::runtime_error("sparse: write failed for '" + path + "'");
}

SparseMatrix load_matrix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("sparse: cannot open '" + path + "'");
  std::string header_line;
  std::getline(in, header_line);
  std::istringstream hs(header_line);
  std::string magic;
  SparseMatrix m;
  std::int64_t nnz = 0;
  hs >> magic >> m.nrows >> m.ncols >> nnz;
  if (magic != "SMAT1" || !hs || m.nrows < 0 || m.ncols < 0 || nnz < 0)
    throw std::runtime_error("sparse: '" + path + "': bad SMAT1 header");
  auto read_u64 = [&](std::vector<std::int64_t>& v, std::int64_t count) {
    std::vector<std::uint64_t> u(static_cast<std::size_t>(count));
    in.read(reinterpret_cast<char*>(u.data()),
            std::streamsize(u.size() * sizeof(std::uint64_t)));
    v.assign(u.begin(), u.end());
  };
  read_u64(m.row_offsets, m.nrows + 1);
  read_u64(m.col_indices, nnz);
  m.values.resize(std::size_t(nnz));
  in.read(reinterpret_cast<char*>(m.values.data()),
          std::streamsize(m.values.size() * sizeof(double)));
  if (!in) throw std::runtime_error("sparse: '" + path + "': truncated SMAT1 payload");
  m.validate();
  return m;
}

}  // namespace flowembed
