#include "flowembed/field.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace flowembed {

namespace {

enum AnalyticId {
  kConstant = 0,
  kZero,
  kCenter,
  kSaddle,
  kStuartVortex,
  kAbc,
};

double get_param(const std::map<std::string, double>& params, const std::string& key,
                 double fallback) {
  auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

}  // namespace

double Domain::min_spacing() const {
  double s = spacing[0];
  for (int a = 1; a < ndim; ++a) s = std::min(s, spacing[a]);
  return s;
}

double Domain::max_spacing() const {
  double s = spacing[0];
  for (int a = 1; a < ndim; ++a) s = std::max(s, spacing[a]);
  return s;
}

void Domain::validate() const {
  if (ndim != 2 && ndim != 3) throw std::invalid_argument("domain: ndim must be 2 or 3");
  for (int a = 0; a < ndim; ++a) {
    if (dims[a] < 2)
      throw std::invalid_argument("domain: dims must be >= 2 on every axis");
    if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a]))
      throw std::invalid_argument("domain: spacing must be strictly positive");
    if (!std::isfinite(origin[a]))
      throw std::invalid_argument("domain: origin must be finite");
  }
}

VectorField VectorField::analytic(const std::string& name,
                                  const std::map<std::string, double>& params,
                                  const Domain& domain) {
  domain.validate();
  VectorField f;
  f.kind_ = Kind::analytic;
  f.domain_ = domain;
  f.name_ = name;
  f.params_ = params;
  if (name == "constant") {
    f.analytic_id_ = kConstant;
    f.coeffs_ = {get_param(params, "vx", 1.0), get_param(params, "vy", 0.0),
                 get_param(params, "vz", 0.0), 0.0};
  } else if (name == "zero") {
    f.analytic_id_ = kZero;
  } else if (name == "center") {
    f.analytic_id_ = kCenter;
  } else if (name == "saddle") {
    f.analytic_id_ = kSaddle;
  } else if (name == "stuart_vortex") {
    if (domain.ndim != 3)
      throw std::invalid_argument("field: stuart_vortex requires a 3D domain");
    f.analytic_id_ = kStuartVortex;
    f.coeffs_ = {get_param(params, "t", 0.0), 0.0, 0.0, 0.0};
  } else if (name == "abc") {
    if (domain.ndim != 3) throw std::invalid_argument("field: abc requires a 3D domain");
    f.analytic_id_ = kAbc;
    f.coeffs_ = {get_param(params, "A", std::sqrt(3.0)),
                 get_param(params, "B", std::sqrt(2.0)), get_param(params, "C", 1.0),
                 0.0};
  } else {
    throw std::invalid_argument("field: unknown analytic field '" + name + "'");
  }
  return f;
}

VectorField VectorField::grid(const Domain& domain, std::vector<float> vectors) {
  domain.validate();
  const std::int64_t expected = domain.cell_count() * domain.ndim;
  if (std::int64_t(vectors.size()) != expected) {
    throw std::invalid_argument("field: grid vector count mismatch, expected " +
                                std::to_string(expected) + " got " +
                                std::to_string(vectors.size()));
  }
  for (float v : vectors) {
    if (!std::isfinite(v)) throw std::invalid_argument("field: non-finite grid vector");
  }
  VectorField f;
  f.kind_ = Kind::grid;
  f.domain_ = domain;
  f.vectors_ = std::move(vectors);
  return f;
}

std::optional<Vec3> VectorField::sample(const Vec3& pos) const {
  if (!domain_.contains(pos)) return std::nullopt;
  return kind_ == Kind::grid ? interpolate_grid(pos) : evaluate_analytic(pos);
}

Vec3 VectorField::evaluate_analytic(const Vec3& pos) const {
  const double x = pos[0], y = pos[1], z = pos[2];
  switch (analytic_id_) {
    case kConstant:
      return {coeffs_[0], coeffs_[1], coeffs_[2]};
    case kZero:
      return {0.0, 0.0, 0.0};
    case kCenter:
      return {-y, x, 0.0};
    case kSaddle:
      return {x, -y, 0.0};
    case kStuartVortex: {
      const double t = coeffs_[0];
      const double a = 2.0 * (t - x);
      return {std::sinh(2.0 * y), 0.25 * std::sin(a),
              z * (std::cosh(2.0 * y) - 0.25 * std::cos(a))};
    }
    case kAbc: {
      const double A = coeffs_[0], B = coeffs_[1], C = coeffs_[2];
      return {A * std::sin(z) + C * std::cos(y), B * std::sin(x) + A * std::cos(z),
              C * std::sin(y) + B * std::cos(x)};
    }
  }
  return {0.0, 0.0, 0.0};
}

Vec3 VectorField::interpolate_grid(const Vec3& pos) const {
  const int nd = domain_.ndim;
  // Per axis: base cell index and interpolation fraction, with half-cell
  // margin queries clamped to the boundary cell value.
  std::array<std::int64_t, 3> base{0, 0, 0};
  std::array<double, 3> frac{0.0, 0.0, 0.0};
  for (int a = 0; a < nd; ++a) {
    const double g = (pos[a] - domain_.origin[a]) / domain_.spacing[a];
    std::int64_t i0 = std::int64_t(std::floor(g));
    double fr = g - double(i0);
    if (i0 < 0) {
      i0 = 0;
      fr = 0.0;
    } else if (i0 > domain_.dims[a] - 2) {
      i0 = domain_.dims[a] - 2;
      fr = std::min(g - double(i0), 1.0);
    }
    base[a] = i0;
    frac[a] = fr;
  }
  Vec3 out{0.0, 0.0, 0.0};
  const int corners = 1 << nd;
  for (int c = 0; c < corners; ++c) {
    double w = 1.0;
    std::array<std::int64_t, 3> idx{0, 0, 0};
    for (int a = 0; a < nd; ++a) {
      const int bit = (c >> a) & 1;
      w *= bit ? frac[a] : (1.0 - frac[a]);
      idx[a] = base[a] + bit;
    }
    if (w == 0.0) continue;
    const std::int64_t flat = domain_.flat_index(idx);
    for (int a = 0; a < nd; ++a) out[a] += w * double(vectors_[std::size_t(flat * nd + a)]);
  }
  return out;
}

VectorField make_analytic(const std::string& name,
                          const std::map<std::string, double>& params,
                          const Domain& domain) {
  return VectorField::analytic(name, params, domain);
}

void save_grid_field(const VectorField& field, const std::string& path) {
  if (!field.is_grid())
    throw std::invalid_argument("field: save_grid_field requires a grid field");
  const Domain& d = field.domain();
  std::ostringstream header;
  header << "FFLD1 " << d.ndim;
  for (int a = 0; a < d.ndim; ++a) header << " " << d.dims[a];
  for (int a = 0; a < d.ndim; ++a) header << " " << d.origin[a];
  for (int a = 0; a < d.ndim; ++a) header << " " << d.spacing[a];
  header << "\n";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("field: cannot open '" + path + "' for writing");
  const std::string h = header.str();
  out.write(h.data(), std::streamsize(h.size()));
  out.write(reinterpret_cast<const char*>(field.grid_vectors().data()),
            std::streamsize(field.grid_vectors().size() * sizeof(float)));
  if (!out) throw std::runtime_error("field: write failed for '" + path + "'");
}

VectorField load_grid_field(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("field: cannot open '" + path + "'");
  std::string header_line;
  if (!std::getline(in, header_line))
    throw std::runtime_error("field: '" + path + "': missing header at byte 0");
  const std::int64_t data_offset = std::int64_t(header_line.size()) + 1;
  std::istringstream hs(header_line);
  std::string magic;
  int ndim = 0;
  hs >> magic >> ndim;
  if (magic != "FFLD1" || (ndim != 2 && ndim != 3))
    throw std::runtime_error("field: '" + path + "': bad FFLD1 header at byte 0");
  Domain d;
  d.ndim = ndim;
  for (int a = 0; a < ndim; ++a) hs >> d.dims[a];
  for (int a = 0; a < ndim; ++a) hs >> d.origin[a];
  for (int a = 0; a < ndim; ++a) hs >> d.spacing[a];
  if (!hs) throw std::runtime_error("field: '" + path + "': malformed header at byte 0");
  d.validate();
  const std::int64_t count = d.cell_count() * ndim;
  std::vector<float> vectors(static_cast<std::size_t>(count));
  in.read(reinterpret_cast<char*>(vectors.data()), std::streamsize(count * sizeof(float)));
  if (in.gcount() != std::streamsize(count * sizeof(float))) {
    throw std::runtime_error("field: '" + path + "': size mismatch, expected " +
                             std::to_string(count * sizeof(float)) + " data bytes at byte " +
                             std::to_string(data_offset) + ", got " +
                             std::to_string(in.gcount()));
  }
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (!std::isfinite(vectors[i])) {
      throw std::runtime_error("field: '" + path + "': non-finite value at byte " +
                               std::to_string(data_offset + std::int64_t(i * sizeof(float))));
    }
  }
  return VectorField::grid(d, std::move(vectors));
}

}  // namespace flowembed
