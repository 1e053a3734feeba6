#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace flowembed {

using Vec3 = std::array<double, 3>;

/// Rectangular cell grid. `origin` is the physical position of the center of
/// cell (0,...); cells extend half a spacing beyond the outermost centers.
struct Domain {
  int ndim = 2;
  std::array<std::int64_t, 3> dims{1, 1, 1};
  Vec3 origin{0.0, 0.0, 0.0};
  Vec3 spacing{1.0, 1.0, 1.0};

  std::int64_t cell_count() const {
    std::int64_t n = 1;
    for (int a = 0; a < ndim; ++a) n *= dims[a];
    return n;
  }

  std::int64_t flat_index(const std::array<std::int64_t, 3>& idx) const {
    std::int64_t f = 0;
    for (int a = ndim - 1; a >= 0; --a) f = f * dims[a] + idx[a];
    return f;
  }

  std::array<std::int64_t, 3> grid_index(std::int64_t flat) const {
    std::array<std::int64_t, 3> idx{0, 0, 0};
    for (int a = 0; a < ndim; ++a) {
      idx[a] = flat % dims[a];
      flat /= dims[a];
    }
    return idx;
  }

  Vec3 cell_center(const std::array<std::int64_t, 3>& idx) const {
    Vec3 p{0.0, 0.0, 0.0};
    for (int a = 0; a < ndim; ++a) p[a] = origin[a] + double(idx[a]) * spacing[a];
    return p;
  }

  Vec3 cell_center(std::int64_t flat) const { return cell_center(grid_index(flat)); }

  /// True if pos lies in the physical bounding box (cell centers plus the
  /// half-cell margin on every side).
  bool contains(const Vec3& pos) const {
    for (int a = 0; a < ndim; ++a) {
      const double lo = origin[a] - 0.5 * spacing[a];
      const double hi = origin[a] + (double(dims[a]) - 0.5) * spacing[a];
      if (!(pos[a] >= lo && pos[a] <= hi)) return false;
    }
    return true;
  }

  double min_spacing() const;
  double max_spacing() const;

  /// Throws std::invalid_argument on bad dims/spacing.
  void validate() const;

  bool operator==(const Domain&) const = default;
};

/// Analytic or grid-sampled flow field over a Domain. Immutable after
/// construction; sampling from multiple threads is safe.
class VectorField {
 public:
  /// name in {constant, zero, center, saddle, stuart_vortex, abc}.
  static VectorField analytic(const std::string& name,
                              const std::map<std::string, double>& params,
                              const Domain& domain);

  /// Per-cell vectors in row-major cell order (x fastest), ndim components
  /// per cell, stored at cell centers.
  static VectorField grid(const Domain& domain, std::vector<float> vectors);

  /// nullopt signals the position is outside the domain.
  std::optional<Vec3> sample(const Vec3& pos) const;

  const Domain& domain() const { return domain_; }
  bool is_grid() const { return kind_ == Kind::grid; }
  const std::vector<float>& grid_vectors() const { return vectors_; }
  const std::string& analytic_name() const { return name_; }
  const std::map<std::string, double>& analytic_params() const { return params_; }

 private:
  enum class Kind { analytic, grid };

  Vec3 evaluate_analytic(const Vec3& pos) const;
  Vec3 interpolate_grid(const Vec3& pos) const;

  Kind kind_ = Kind::analytic;
  Domain domain_;
  std::string name_;
  std::map<std::string, double> params_;
  std::vector<float> vectors_;
  // resolved analytic dispatch
  int analytic_id_ = 0;
  std::array<double, 4> coeffs_{0, 0, 0, 0};
};

VectorField make_analytic(const std::string& name,
                          const std::map<std::string, double>& params,
                          const Domain& domain);

/// "FFLD1" field file format (see save_grid_field).
VectorField load_grid_field(const std::string& path);

/// Text header `FFLD1 <ndim> <dims...> <origin...> <spacing...>\n` followed
/// by raw little-endian f32, ndim components per cell, row-major (x fastest).
void save_grid_field(const VectorField& field, const std::string& path);

}  // namespace flowembed
