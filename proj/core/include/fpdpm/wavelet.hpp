#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace fpdpm {

/// Images are stored as Eigen matrices. One-dimensional signals use a single
/// column. Flattened images follow Eigen's column-major order: pixel (r, c) of
/// an R-row image sits at index c * R + r.
using Image = Eigen::MatrixXd;

enum class WaveletFamily { Haar, Daubechies4 };

const char* to_string(WaveletFamily family);
WaveletFamily wavelet_family_from_string(const std::string& name);

/// Dyadic sampling grid. One-dimensional grids have a single entry in `dims`;
/// two-dimensional grids are square.
struct Grid {
  std::vector<int> dims;

  Grid() = default;
  explicit Grid(std::vector<int> d);
  static Grid square(int side) { return Grid({side, side}); }
  static Grid line(int length) { return Grid({length}); }

  int d() const { return static_cast<int>(dims.size()); }
  int rows() const { return dims.at(0); }
  int cols() const { return d() == 1 ? 1 : dims.at(1); }
  /// Total number of points L.
  int size() const;
  /// Finest detail level index; levels run j = 0 (coarse) .. J (fine).
  int J() const;
  int num_levels() const { return J() + 1; }
  /// Number of detail coefficients at level j: 2^j in 1-D, 3 * 4^j in 2-D.
  int level_size(int j) const;
  /// Offset of level j inside a flattened coefficient vector. The single
  /// scaling coefficient occupies index 0.
  int level_offset(int j) const;

  bool operator==(const Grid&) const = default;
};

bool is_power_of_two(int v);
int next_power_of_two(int v);

/// Records how an image was embedded into a larger dyadic canvas.
struct PaddingRecord {
  std::vector<int> original_dims;
  std::vector<int> offsets;  // zeros placed before the original data on each axis
  std::vector<int> padded_dims;

  Image crop(const Image& padded) const;
};

struct PaddedImage {
  Image image;
  PaddingRecord record;
};

/// Zero-pads `image` to `target_dims` (rows, cols). The original occupies the
/// top-left window unless `center` is set.
PaddedImage pad_to_dyadic(const Image& image, const std::vector<int>& target_dims,
                          bool center = false);

/// Detail coefficients grouped by resolution level, coarse to fine.
///
/// In 2-D a level holds the LH, HL and HH subbands of one decomposition scale,
/// concatenated in that order, each stored row-major. LH is the top-right
/// quadrant of the Mallat layout (low-pass along rows, high-pass along
/// columns), HL the bottom-left and HH the bottom-right.
struct WaveletCoefficients {
  Grid grid;
  WaveletFamily family = WaveletFamily::Haar;
  double scaling = 0.0;
  std::vector<Eigen::VectorXd> levels;

  /// [scaling, level 0, level 1, ..., level J]; length L.
  Eigen::VectorXd flatten() const;
  static WaveletCoefficients from_flat(const Grid& grid, WaveletFamily family,
                                       const Eigen::VectorXd& flat);
  static WaveletCoefficients zeros(const Grid& grid, WaveletFamily family);
  double squared_norm() const;
};

/// Full-depth orthonormal DWT. `J` may be passed to assert the expected depth;
/// a negative value means "derive from the image size".
WaveletCoefficients forward_dwt(const Image& image, WaveletFamily family = WaveletFamily::Haar,
                                int J = -1);
Image inverse_dwt(const WaveletCoefficients& coeffs);

/// Psi_j * beta_j: the image contributed by the level-j detail coefficients alone.
Image synthesize_level(int j, const Eigen::VectorXd& beta, const Grid& grid,
                       WaveletFamily family = WaveletFamily::Haar);

/// Flat-vector front end used on hot paths. Pixels are column-major flattened
/// images, coefficients follow WaveletCoefficients::flatten().
class WaveletBasis {
 public:
  WaveletBasis(Grid grid, WaveletFamily family);

  const Grid& grid() const { return grid_; }
  WaveletFamily family() const { return family_; }
  int size() const { return grid_.size(); }

  Eigen::VectorXd forward(const Eigen::VectorXd& pixels) const;
  Eigen::VectorXd inverse(const Eigen::VectorXd& coefficients) const;
  /// Applies forward() to every column.
  Eigen::MatrixXd forward_columns(const Eigen::MatrixXd& pixels) const;

 private:
  Grid grid_;
  WaveletFamily family_;
};

}  // namespace fpdpm
