#include "flowembed/render.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

namespace flowembed {

std::vector<double> binary_noise_vector(std::int64_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> out(static_cast<std::size_t>(n));
  for (auto& v : out) v = double(rng() & 1u);
  return out;
}

RenderImage binary_noise(const Domain& domain, std::uint64_t seed) {
  if (domain.ndim != 2)
    throw std::invalid_argument("render: binary_noise image requires a 2D domain");
  RenderImage img;
  img.width = domain.dims[0];
  img.height = domain.dims[1];
  img.channels = 1;
  img.samples = binary_noise_vector(domain.cell_count(), seed);
  return img;
}

RenderImage lic_image(const SparseMatrix& p_row, const RenderImage& noise) {
  if (noise.channels != 1)
    throw std::invalid_argument("render: lic_image needs a single-channel noise image");
  if (std::int64_t(noise.samples.size()) != p_row.ncols)
    throw std::invalid_argument("render: lic_image dimension mismatch");
  RenderImage out = noise;
  out.samples = spmv(p_row, noise.samples);
  return out;
}

std::vector<double> histogram_equalize(std::span<const double> values) {
  constexpr int kBins = 256;
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  std::vector<double> out(values.begin(), values.end());
  if (*mn == *mx) return out;  // degenerate histogram
  std::array<std::int64_t, kBins> counts{};
  auto bin_of = [&](double v) {
    return std::min(kBins - 1, int(v * kBins));
  };
  for (double v : values) ++counts[std::size_t(bin_of(v))];
  std::array<double, kBins> cdf{};
  double running = 0.0;
  for (int b = 0; b < kBins; ++b) {
    running += double(counts[std::size_t(b)]);
    cdf[std::size_t(b)] = running / double(values.size());
  }
  for (auto& v : out) v = cdf[std::size_t(bin_of(v))];
  return out;
}

RenderImage histogram_equalize(const RenderImage& img) {
  if (img.channels != 1)
    throw std::invalid_argument("render: histogram_equalize needs a single-channel image");
  RenderImage out = img;
  out.samples = histogram_equalize(std::span<const double>(img.samples));
  return out;
}

std::array<double, 3> viridis(double t) {
  t = std::clamp(t, 0.0, 1.0);
  const double x = t * 255.0;
  const int i0 = std::min(254, int(x));
  const double f = x - double(i0);
  std::array<double, 3> out;
  for (int c = 0; c < 3; ++c)
    out[std::size_t(c)] = (1.0 - f) * kViridisTable[std::size_t(i0)][std::size_t(c)] +
                          f * kViridisTable[std::size_t(i0 + 1)][std::size_t(c)];
  return out;
}

std::vector<double> composite_scalar(const std::vector<std::span<const double>>& embeddings,
                                     std::span<const double> weights) {
  if (embeddings.empty())
    throw std::invalid_argument("render: composite needs at least one embedding");
  if (weights.size() != embeddings.size())
    throw std::invalid_argument("render: weight count mismatch");
  double wsum = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw std::invalid_argument("render: negative transfer weight");
    wsum += w;
  }
  if (!(wsum > 0.0)) throw std::invalid_argument("render: all transfer weights are zero");
  const std::size_t n = embeddings.front().size();
  std::vector<double> s(n, 0.0);
  for (std::size_t k = 0; k < embeddings.size(); ++k) {
    if (embeddings[k].size() != n)
      throw std::invalid_argument("render: embedding length mismatch");
    const double c = weights[k] / wsum;
    for (std::size_t i = 0; i < n; ++i) s[i] += c * embeddings[k][i];
  }
  const auto [mn, mx] = std::minmax_element(s.begin(), s.end());
  const double lo = *mn, hi = *mx;
  if (hi > lo) {
    for (auto& v : s) v = (v - lo) / (hi - lo);
  } else {
    for (auto& v : s) v = 0.5;
  }
  return s;
}

RenderImage composite_transfer(const std::vector<std::span<const double>>& embeddings,
                               const TransferFunction& tf, const Domain& domain) {
  if (tf.colormap != "viridis")
    throw std::invalid_argument("render: unknown colormap '" + tf.colormap + "'");
  const std::vector<double> s = composite_scalar(embeddings, tf.weights);
  RenderImage img;
  img.width = domain.dims[0];
  img.height = domain.ndim >= 2 ? domain.dims[1] : 1;
  img.channels = 3;
  img.samples.resize(s.size() * 3);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto rgb = viridis(s[i]);
    img.samples[3 * i + 0] = rgb[0];
    img.samples[3 * i + 1] = rgb[1];
    img.samples[3 * i + 2] = rgb[2];
  }
  return img;
}

void modulate_luminance(RenderImage& rgb, const RenderImage& lic) {
  if (rgb.channels != 3 || lic.channels != 1 ||
      rgb.width != lic.width || rgb.height != lic.height)
    throw std::invalid_argument("render: modulation image mismatch");
  for (std::size_t i = 0; i < lic.samples.size(); ++i) {
    const double m = 0.5 + 0.5 * lic.samples[i];
    for (int c = 0; c < 3; ++c) rgb.samples[3 * i + std::size_t(c)] *= m;
  }
}

std::vector<double> segment_thresholds(std::span<const double> values, int k) {
  if (k < 1) throw std::invalid_argument("render: threshold count must be >= 1");
  std::vector<double> uniq(values.begin(), values.end());
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  if (uniq.size() < 2) return {};
  // Midpoints of the k largest gaps between consecutive unique values.
  std::vector<std::size_t> gaps(uniq.size() - 1);
  for (std::size_t i = 0; i + 1 < uniq.size(); ++i) gaps[i] = i;
  std::stable_sort(gaps.begin(), gaps.end(), [&](std::size_t a, std::size_t b) {
    return uniq[a + 1] - uniq[a] > uniq[b + 1] - uniq[b];
  });
  gaps.resize(std::min<std::size_t>(std::size_t(k), gaps.size()));
  std::vector<double> thresholds;
  for (std::size_t g : gaps) thresholds.push_back(0.5 * (uniq[g] + uniq[g + 1]));
  std::sort(thresholds.begin(), thresholds.end());
  return thresholds;
}

std::vector<int> segment_regions(std::span<const double> values,
                                 std::span<const double> thresholds) {
  std::vector<int> regions(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    int r = 0;
    for (double t : thresholds)
      if (values[i] > t) ++r;
    regions[i] = r;
  }
  return regions;
}

// ---------------------------------------------------------------------------
// PGM / PPM / VOL1 I/O.

namespace {

std::uint8_t quantize(double v) {
  return std::uint8_t(std::clamp(std::lround(v * 255.0), 0l, 255l));
}

}  // namespace

void export_image(const RenderImage& img, const std::string& path) {
  if (img.channels != 1 && img.channels != 3)
    throw std::invalid_argument("render: image must have 1 or 3 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("render: cannot open '" + path + "' for writing");
  std::ostringstream header;
  header << (img.channels == 1 ? "P5" : "P6") << "\n"
         << img.width << " " << img.height << "\n255\n";
  const std::string h = header.str();
  out.write(h.data(), std::streamsize(h.size()));
  std::vector<std::uint8_t> bytes(img.samples.size());
  for (std::size_t i = 0; i < img.samples.size(); ++i) bytes[i] = quantize(img.samples[i]);
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw std::runtime_error("render: write failed for '" + path + "'");
}

RenderImage load_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("render: cannot open '" + path + "'");
  std::string magic;
  std::int64_t w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if ((magic != "P5" && magic != "P6") || maxval != 255 || w <= 0 || h <= 0)
    throw std::runtime_error("render: '" + path + "': unsupported PNM header");
  in.get();  // single whitespace after maxval
  RenderImage img;
  img.width = w;
  img.height = h;
  img.channels = magic == "P5" ? 1 : 3;
  std::vector<std::uint8_t> bytes(std::size_t(w * h * img.channels));
  in.read(reinterpret_cast<char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!in) throw std::runtime_error("render: '" + path + "': truncated PNM payload");
  img.samples.resize(bytes.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) img.samples[i] = double(bytes[i]) / 255.0;
  return img;
}

void export_volume(const RenderVolume& vol, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("render: cannot open '" + path + "' for writing");
  std::ostringstream header;
  header << "VOL1 " << vol.dims[0] << " " << vol.dims[1] << " " << vol.dims[2] << " "
         << vol.channels << "\n";
  const std::string h = header.str();
  out.write(h.data(), std::streamsize(h.size()));
  out.write(reinterpret_cast<const char*>(vol.samples.data()),
            std::streamsize(vol.samples.size() * sizeof(float)));
  if (!out) throw std::runtime_error("render: write failed for '" + path + "'");
}

RenderVolume load_volume(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("render: cannot open '" + path + "'");
  std::string header_line;
  std::getline(in, header_line);
  std::istringstream hs(header_line);
  std::string magic;
  RenderVolume vol;
  hs >> magic >> vol.dims[0] >> vol.dims[1] >> vol.dims[2] >> vol.channels;
  if (magic != "VOL1" || !hs || vol.channels < 1)
    throw std::runtime_error("render: '" + path + "': bad VOL1 header");
  const std::int64_t count = vol.dims[0] * vol.dims[1] * vol.dims[2] * vol.channels;
  vol.samples.resize(std::size_t(count));
  in.read(reinterpret_cast<char*>(vol.samples.data()),
          std::streamsize(vol.samples.size() * sizeof(float)));
  if (!in) throw std::runtime_error("render: '" + path + "': truncated VOL1 payload");
  return vol;
}

RenderImage volume_mid_slice(const RenderVolume& vol, int axis) {
  if (axis < 0 || axis > 2) throw std::invalid_argument("render: slice axis must be 0..2");
  const auto& d = vol.dims;
  const std::int64_t mid = d[std::size_t(axis)] / 2;
  const int u = axis == 0 ? 1 : 0;
  const int v = axis == 2 ? 1 : 2;
  RenderImage img;
  img.width = d[std::size_t(u)];
  img.height = d[std::size_t(v)];
  img.channels = vol.channels;
  img.samples.resize(std::size_t(img.width * img.height * img.channels));
  for (std::int64_t j = 0; j < img.height; ++j) {
    for (std::int64_t i = 0; i < img.width; ++i) {
      std::array<std::int64_t, 3> idx;
      idx[std::size_t(axis)] = mid;
      idx[std::size_t(u)] = i;
      idx[std::size_t(v)] = j;
      const std::int64_t flat = (idx[2] * d[1] + idx[1]) * d[0] + idx[0];
      for (int c = 0; c < vol.channels; ++c)
        img.samples[std::size_t((j * img.width + i) * img.channels + c)] =
            double(vol.samples[std::size_t(flat * vol.channels + c)]);
    }
  }
  return img;
}

}  // namespace flowembed
