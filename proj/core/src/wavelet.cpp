#include "fpdpm/wavelet.hpp"

#include <array>
#include <cmath>
#include <string>

#include "fpdpm/errors.hpp"

namespace fpdpm {
namespace {

struct FilterPair {
  std::vector<double> low;
  std::vector<double> high;
};

FilterPair make_filters(WaveletFamily family) {
  FilterPair f;
  switch (family) {
    case WaveletFamily::Haar: {
      const double s = 1.0 / std::sqrt(2.0);
      f.low = {s, s};
      break;
    }
    case WaveletFamily::Daubechies4: {
      const double r3 = std::sqrt(3.0);
      const double k = 4.0 * std::sqrt(2.0);
      f.low = {(1 + r3) / k, (3 + r3) / k, (3 - r3) / k, (1 - r3) / k};
      break;
    }
  }
  const std::size_t m = f.low.size();
  f.high.resize(m);
  for (std::size_t n = 0; n < m; ++n) {
    const double sign = (n % 2 == 0) ? 1.0 : -1.0;
    f.high[n] = sign * f.low[m - 1 - n];
  }
  return f;
}

// One periodic analysis step on x[0..len): low half then high half.
void analyze(const FilterPair& f, const double* x, double* out, int len, std::vector<double>& tmp) {
  const int half = len / 2;
  tmp.assign(len, 0.0);
  const int m = static_cast<int>(f.low.size());
  for (int k = 0; k < half; ++k) {
    double a = 0.0;
    double d = 0.0;
    for (int n = 0; n < m; ++n) {
      const double v = x[(2 * k + n) % len];
      a += f.low[n] * v;
      d += f.high[n] * v;
    }
    tmp[k] = a;
    tmp[half + k] = d;
  }
  for (int i = 0; i < len; ++i) out[i] = tmp[i];
}

void synthesize(const FilterPair& f, const double* x, double* out, int len, std::vector<double>& tmp) {
  const int half = len / 2;
  tmp.assign(len, 0.0);
  const int m = static_cast<int>(f.low.size());
  for (int k = 0; k < half; ++k) {
    const double a = x[k];
    const double d = x[half + k];
    for (int n = 0; n < m; ++n) tmp[(2 * k + n) % len] += f.low[n] * a + f.high[n] * d;
  }
  for (int i = 0; i < len; ++i) out[i] = tmp[i];
}

void check_dyadic_shape(const Image& image) {
  const bool one_d = image.cols() == 1;
  if (!is_power_of_two(static_cast<int>(image.rows())) || image.rows() < 2) {
    throw DimensionError("image rows must be a power of two >= 2, got " +
                         std::to_string(image.rows()));
  }
  if (!one_d && image.rows() != image.cols()) {
    throw DimensionError("2-D transforms require a square dyadic image, got " +
                         std::to_string(image.rows()) + "x" + std::to_string(image.cols()));
  }
  if (image.size() < 4) throw DimensionError("grid must contain at least 4 points");
}

// Mallat-layout forward transform, in place.
void forward_mallat(Image& a, const FilterPair& f) {
  std::vector<double> tmp;
  std::vector<double> line;
  if (a.cols() == 1) {
    for (int len = static_cast<int>(a.rows()); len >= 2; len /= 2) analyze(f, a.data(), a.data(), len, tmp);
    return;
  }
  const int n = static_cast<int>(a.rows());
  for (int len = n; len >= 2; len /= 2) {
    for (int c = 0; c < len; ++c) analyze(f, &a(0, c), &a(0, c), len, tmp);
    line.resize(len);
    for (int r = 0; r < len; ++r) {
      for (int c = 0; c < len; ++c) line[c] = a(r, c);
      analyze(f, line.data(), line.data(), len, tmp);
      for (int c = 0; c < len; ++c) a(r, c) = line[c];
    }
  }
}

void inverse_mallat(Image& a, const FilterPair& f) {
  std::vector<double> tmp;
  std::vector<double> line;
  if (a.cols() == 1) {
    for (int len = 2; len <= a.rows(); len *= 2) synthesize(f, a.data(), a.data(), len, tmp);
    return;
  }
  const int n = static_cast<int>(a.rows());
  for (int len = 2; len <= n; len *= 2) {
    line.resize(len);
    for (int r = 0; r < len; ++r) {
      for (int c = 0; c < len; ++c) line[c] = a(r, c);
      synthesize(f, line.data(), line.data(), len, tmp);
      for (int c = 0; c < len; ++c) a(r, c) = line[c];
    }
    for (int c = 0; c < len; ++c) synthesize(f, &a(0, c), &a(0, c), len, tmp);
  }
}

// Copies between the Mallat layout and the level grouping. `to_levels` selects
// the direction.
void exchange(Image& mallat, WaveletCoefficients& wc, bool to_levels) {
  const Grid& g = wc.grid;
  auto move = [&](double& cell, double& coeff) {
    if (to_levels) {
      coeff = cell;
    } else {
      cell = coeff;
    }
  };
  move(mallat(0, 0), wc.scaling);
  for (int j = 0; j < g.num_levels(); ++j) {
    Eigen::VectorXd& lvl = wc.levels[j];
    const int s = 1 << j;
    if (g.d() == 1) {
      for (int k = 0; k < s; ++k) move(mallat(s + k, 0), lvl[k]);
      continue;
    }
    int idx = 0;
    // LH: rows [0, s), cols [s, 2s)
    for (int r = 0; r < s; ++r)
      for (int c = 0; c < s; ++c) move(mallat(r, s + c), lvl[idx++]);
    // HL: rows [s, 2s), cols [0, s)
    for (int r = 0; r < s; ++r)
      for (int c = 0; c < s; ++c) move(mallat(s + r, c), lvl[idx++]);
    // HH
    for (int r = 0; r < s; ++r)
      for (int c = 0; c < s; ++c) move(mallat(s + r, s + c), lvl[idx++]);
  }
}

}  // namespace

const char* to_string(WaveletFamily family) {
  return family == WaveletFamily::Haar ? "haar" : "db4";
}

WaveletFamily wavelet_family_from_string(const std::string& name) {
  if (name == "haar") return WaveletFamily::Haar;
  if (name == "db4" || name == "daubechies4") return WaveletFamily::Daubechies4;
  throw ParameterError("unknown wavelet family '" + name + "'");
}

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

int next_power_of_two(int v) {
  int p = 1;
  while (p < v) p <<= 1;
  return p;
}

Grid::Grid(std::vector<int> d) : dims(std::move(d)) {
  if (dims.empty() || dims.size() > 2) throw DimensionError("grid must be 1-D or 2-D");
  for (int v : dims) {
    if (!is_power_of_two(v) || v < 2) {
      throw DimensionError("grid extents must be powers of two >= 2, got " + std::to_string(v));
    }
  }
  if (dims.size() == 2 && dims[0] != dims[1]) {
    throw DimensionError("2-D grids must be square");
  }
  if (size() < 4) throw DimensionError("grid must contain at least 4 points");
}

int Grid::size() const {
  int s = 1;
  for (int v : dims) s *= v;
  return s;
}

int Grid::J() const {
  int levels = 0;
  for (int v = rows(); v > 1; v /= 2) ++levels;
  return levels - 1;
}

int Grid::level_size(int j) const {
  const int s = 1 << j;
  return d() == 1 ? s : 3 * s * s;
}

int Grid::level_offset(int j) const {
  int off = 1;
  for (int k = 0; k < j; ++k) off += level_size(k);
  return off;
}

Image PaddingRecord::crop(const Image& padded) const {
  if (static_cast<int>(padded.rows()) != padded_dims.at(0) ||
      static_cast<int>(padded.cols()) != (padded_dims.size() > 1 ? padded_dims[1] : 1)) {
    throw DimensionError("padded image does not match the padding record");
  }
  const int rows = original_dims.at(0);
  const int cols = original_dims.size() > 1 ? original_dims[1] : 1;
  const int r0 = offsets.at(0);
  const int c0 = offsets.size() > 1 ? offsets[1] : 0;
  return padded.block(r0, c0, rows, cols);
}

PaddedImage pad_to_dyadic(const Image& image, const std::vector<int>& target_dims, bool center) {
  if (target_dims.empty() || target_dims.size() > 2) {
    throw DimensionError("target dims must have one or two entries");
  }
  const int rows = static_cast<int>(image.rows());
  const int cols = static_cast<int>(image.cols());
  const int trows = target_dims[0];
  const int tcols = target_dims.size() > 1 ? target_dims[1] : 1;
  for (int t : target_dims) {
    if (!is_power_of_two(t)) throw DimensionError("target dims must be powers of two");
  }
  if (trows < rows || tcols < cols) {
    throw DimensionError("target " + std::to_string(trows) + "x" + std::to_string(tcols) +
                         " is smaller than the image " + std::to_string(rows) + "x" +
                         std::to_string(cols));
  }
  PaddedImage out;
  const int r0 = center ? (trows - rows) / 2 : 0;
  const int c0 = center ? (tcols - cols) / 2 : 0;
  out.image = Image::Zero(trows, tcols);
  out.image.block(r0, c0, rows, cols) = image;
  out.record.original_dims = target_dims.size() > 1 ? std::vector<int>{rows, cols} : std::vector<int>{rows};
  out.record.offsets = target_dims.size() > 1 ? std::vector<int>{r0, c0} : std::vector<int>{r0};
  out.record.padded_dims = target_dims;
  return out;
}

Eigen::VectorXd WaveletCoefficients::flatten() const {
  Eigen::VectorXd flat(grid.size());
  flat[0] = scaling;
  for (int j = 0; j < grid.num_levels(); ++j) {
    flat.segment(grid.level_offset(j), grid.level_size(j)) = levels.at(j);
  }
  return flat;
}

WaveletCoefficients WaveletCoefficients::from_flat(const Grid& grid, WaveletFamily family,
                                                   const Eigen::VectorXd& flat) {
  if (flat.size() != grid.size()) {
    throw DimensionError("flat coefficient vector has length " + std::to_string(flat.size()) +
                         ", grid needs " + std::to_string(grid.size()));
  }
  WaveletCoefficients wc;
  wc.grid = grid;
  wc.family = family;
  wc.scaling = flat[0];
  wc.levels.resize(grid.num_levels());
  for (int j = 0; j < grid.num_levels(); ++j) {
    wc.levels[j] = flat.segment(grid.level_offset(j), grid.level_size(j));
  }
  return wc;
}

WaveletCoefficients WaveletCoefficients::zeros(const Grid& grid, WaveletFamily family) {
  return from_flat(grid, family, Eigen::VectorXd::Zero(grid.size()));
}

double WaveletCoefficients::squared_norm() const {
  double s = scaling * scaling;
  for (const auto& l : levels) s += l.squaredNorm();
  return s;
}

WaveletCoefficients forward_dwt(const Image& image, WaveletFamily family, int J) {
  check_dyadic_shape(image);
  const Grid grid = image.cols() == 1 ? Grid::line(static_cast<int>(image.rows()))
                                      : Grid::square(static_cast<int>(image.rows()));
  if (J >= 0 && J != grid.J()) {
    throw DimensionError("requested depth J=" + std::to_string(J) + " but the grid implies J=" +
                         std::to_string(grid.J()));
  }
  Image work = image;
  forward_mallat(work, make_filters(family));
  WaveletCoefficients wc = WaveletCoefficients::zeros(grid, family);
  exchange(work, wc, true);
  return wc;
}

Image inverse_dwt(const WaveletCoefficients& coeffs) {
  const Grid& g = coeffs.grid;
  if (static_cast<int>(coeffs.levels.size()) != g.num_levels()) {
    throw StructureError("expected " + std::to_string(g.num_levels()) + " levels, got " +
                         std::to_string(coeffs.levels.size()));
  }
  for (int j = 0; j < g.num_levels(); ++j) {
    if (coeffs.levels[j].size() != g.level_size(j)) {
      throw StructureError("level " + std::to_string(j) + " has " +
                           std::to_string(coeffs.levels[j].size()) + " coefficients, expected " +
                           std::to_string(g.level_size(j)));
    }
  }
  Image work(g.rows(), g.cols());
  WaveletCoefficients copy = coeffs;
  exchange(work, copy, false);
  inverse_mallat(work, make_filters(coeffs.family));
  return work;
}

Image synthesize_level(int j, const Eigen::VectorXd& beta, const Grid& grid, WaveletFamily family) {
  if (j < 0 || j >= grid.num_levels()) {
    throw DimensionError("level " + std::to_string(j) + " outside 0.." + std::to_string(grid.J()));
  }
  if (beta.size() != grid.level_size(j)) {
    throw DimensionError("level " + std::to_string(j) + " needs " +
                         std::to_string(grid.level_size(j)) + " coefficients, got " +
                         std::to_string(beta.size()));
  }
  WaveletCoefficients wc = WaveletCoefficients::zeros(grid, family);
  wc.levels[j] = beta;
  return inverse_dwt(wc);
}

WaveletBasis::WaveletBasis(Grid grid, WaveletFamily family) : grid_(std::move(grid)), family_(family) {}

Eigen::VectorXd WaveletBasis::forward(const Eigen::VectorXd& pixels) const {
  if (pixels.size() != grid_.size()) throw DimensionError("pixel vector length mismatch");
  const Image img = Eigen::Map<const Image>(pixels.data(), grid_.rows(), grid_.cols());
  return forward_dwt(img, family_).flatten();
}

Eigen::VectorXd WaveletBasis::inverse(const Eigen::VectorXd& coefficients) const {
  const Image img = inverse_dwt(WaveletCoefficients::from_flat(grid_, family_, coefficients));
  return Eigen::Map<const Eigen::VectorXd>(img.data(), img.size());
}

Eigen::MatrixXd WaveletBasis::forward_columns(const Eigen::MatrixXd& pixels) const {
  Eigen::MatrixXd out(pixels.rows(), pixels.cols());
  for (Eigen::Index c = 0; c < pixels.cols(); ++c) out.col(c) = forward(pixels.col(c));
  return out;
}

}  // namespace fpdpm
