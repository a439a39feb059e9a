#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "jointgan/rng.hpp"
#include "jointgan/tensor.hpp"

namespace jointgan {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Row-major sample matrix; rows are samples.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return {values.data() + r * cols, cols}; }

  /// Gathers the given rows into an [indices.size(), cols] tensor.
  ad::Tensor gather(std::span<const std::size_t> indices) const;
  Matrix take(std::span<const std::size_t> indices) const;
  static Matrix from_tensor(const ad::Tensor& t);
  ad::Tensor to_tensor() const;
  bool operator==(const Matrix&) const = default;
};

/// Horizontal concatenation of equally tall matrices.
Matrix hstack(std::span<const Matrix> parts);

enum class Pairing { Paired, Unpaired, TwoOverlappingPairs };

std::string to_string(Pairing p);
Pairing parse_pairing(const std::string& s);

struct Column {
  std::string name;
  Matrix values;
};

/// Named per-domain sample columns sharing a row count. Two-domain data use
/// columns "x" and "y"; overlapping pair tables use "xy.x", "xy.y", "yz.y",
/// "yz.z".
class Dataset {
 public:
  Dataset() = default;
  Dataset(Pairing pairing, std::vector<Column> columns,
          std::map<std::string, std::string> metadata = {});

  Pairing pairing() const { return pairing_; }
  std::size_t rows() const;
  const std::vector<Column>& columns() const { return columns_; }
  const Matrix& column(const std::string& name) const;
  bool has_column(const std::string& name) const;
  const std::map<std::string, std::string>& metadata() const { return metadata_; }
  std::map<std::string, std::string>& metadata() { return metadata_; }

  /// Unpaired copy: every column shuffled with its own seed derived from
  /// `seed`, so row order carries no cross-column meaning.
  Dataset unpaired(std::uint64_t seed) const;
  Dataset take_rows(std::span<const std::size_t> indices) const;

 private:
  Pairing pairing_ = Pairing::Paired;
  std::vector<Column> columns_;
  std::map<std::string, std::string> metadata_;
};

/// Writes the dataset format: a tab-separated text header followed by one
/// row per line with 17 significant digits.
void save_dataset(const Dataset& ds, const std::string& path);
std::string format_dataset(const Dataset& ds);

/// `view` selects the pairing to present. An unpaired view of a paired file
/// shuffles each column independently using seeds derived from `seed`.
Dataset load_dataset(const std::string& path, Pairing view, std::uint64_t seed = 0);
Dataset parse_dataset(const std::string& text, Pairing view, std::uint64_t seed = 0);
/// The file exactly as written, in its stored pairing and row order.
Dataset load_dataset_as_stored(const std::string& path);

/// Disjoint reproducible row partition; `fraction` of rows go to the test part.
std::pair<Dataset, Dataset> holdout_split(const Dataset& ds, double fraction, std::uint64_t seed);

/// Row-aligned (x, y) samples.
class PairedView {
 public:
  explicit PairedView(const Dataset& ds);
  const Matrix& x() const { return *x_; }
  const Matrix& y() const { return *y_; }
  std::size_t rows() const { return x_->rows; }

 private:
  const Matrix* x_;
  const Matrix* y_;
};

/// Independent x and y marginals with no usable pairing.
class UnpairedView {
 public:
  explicit UnpairedView(const Dataset& ds);
  const Matrix& x() const { return *x_; }
  const Matrix& y() const { return *y_; }

 private:
  const Matrix* x_;
  const Matrix* y_;
};

using TwoDomainView = std::variant<PairedView, UnpairedView>;

/// Empirical q(x, y) and q(y, z) tables; no (x, z) or (x, y, z) rows exist.
class OverlappingPairsView {
 public:
  explicit OverlappingPairsView(const Dataset& ds);
  const Matrix& xy_x() const { return *xy_x_; }
  const Matrix& xy_y() const { return *xy_y_; }
  const Matrix& yz_y() const { return *yz_y_; }
  const Matrix& yz_z() const { return *yz_z_; }

 private:
  const Matrix* xy_x_;
  const Matrix* xy_y_;
  const Matrix* yz_y_;
  const Matrix* yz_z_;
};

}  // namespace jointgan
