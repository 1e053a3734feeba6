#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "flowembed/field.hpp"
#include "flowembed/sparse.hpp"

namespace flowembed {

/// 2D raster; samples in [0,1], row-major (x fastest), channel-interleaved.
struct RenderImage {
  std::int64_t width = 0;
  std::int64_t height = 0;
  int channels = 1;  // 1 gray, 3 RGB
  std::vector<double> samples;
};

/// 3D raster kept at stored (f32) precision so volume exports round-trip
/// bit-identically.
struct RenderVolume {
  std::array<std::int64_t, 3> dims{1, 1, 1};
  int channels = 1;
  std::vector<float> samples;  // row-major (x fastest), channel-interleaved
};

struct TransferFunction {
  std::vector<double> weights;  // non-negative amplitudes a_k, sum > 0
  std::string colormap = "viridis";
};

extern const std::array<std::array<double, 3>, 256> kViridisTable;

/// Per-cell iid {0,1} with probability 1/2 from a seeded deterministic
/// generator; flat row-major vector of length domain.cell_count().
std::vector<double> binary_noise_vector(std::int64_t n, std::uint64_t seed);
RenderImage binary_noise(const Domain& domain, std::uint64_t seed);

/// One SpMV of the row-normalized probability matrix against the noise.
RenderImage lic_image(const SparseMatrix& p_row, const RenderImage& noise);

/// 256-bin cumulative-histogram remap to [0,1]; monotone; a constant image
/// is returned unchanged.
RenderImage histogram_equalize(const RenderImage& img);
std::vector<double> histogram_equalize(std::span<const double> values);

/// Piecewise-linear lookup in the 256-entry viridis table; t clamped to [0,1].
std::array<double, 3> viridis(double t);

/// Amplitude-weighted combination sum_k (a_k / sum_l a_l) v_k, affinely
/// rescaled to [0,1] over the image, mapped through the colormap.
RenderImage composite_transfer(const std::vector<std::span<const double>>& embeddings,
                               const TransferFunction& tf, const Domain& domain);

/// Weighted scalar field of the transfer function before colormapping,
/// rescaled to [0,1].
std::vector<double> composite_scalar(const std::vector<std::span<const double>>& embeddings,
                                     std::span<const double> weights);

/// Luminance modulation of an RGB image by a gray backdrop: rgb *= 0.5 + 0.5*lic.
void modulate_luminance(RenderImage& rgb, const RenderImage& lic);

/// 1D k-threshold segmentation: thresholds at the k largest gaps between
/// sorted unique values. Returns ascending thresholds (gap midpoints).
std::vector<double> segment_thresholds(std::span<const double> values, int k);
/// Region index per value: count of thresholds below the value.
std::vector<int> segment_regions(std::span<const double> values,
                                 std::span<const double> thresholds);

// ---------------------------------------------------------------------------
// Image / volume I/O. 2D: binary PGM (P5) / PPM (P6), maxval 255. 3D: "VOL1"
// header `VOL1 <dims...> <channels>\n` plus raw little-endian f32.
void export_image(const RenderImage& img, const std::string& path);
RenderImage load_image(const std::string& path);

void export_volume(const RenderVolume& vol, const std::string& path);
RenderVolume load_volume(const std::string& path);

/// Axis-aligned slice through the middle of the volume (axis 0=x,1=y,2=z).
RenderImage volume_mid_slice(const RenderVolume& vol, int axis);

}  // namespace flowembed
