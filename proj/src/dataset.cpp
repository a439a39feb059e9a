#include "jointgan/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>

namespace jointgan {

namespace {

constexpr const char* kMagic = "#jointgan-dataset\t1";
constexpr const char* kDataMarker = "#data";

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, std::size_t line) {
  double v = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw DataError("malformed value '" + s + "' on line " + std::to_string(line));
  }
  return v;
}

std::size_t parse_size(const std::string& s, const std::string& what) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw DataError("malformed " + what + " '" + s + "'");
  }
  return v;
}

std::vector<std::string> required_columns(Pairing p) {
  if (p == Pairing::TwoOverlappingPairs) return {"xy.x", "xy.y", "yz.y", "yz.z"};
  if (p == Pairing::Unpaired) return {};  // views check for the columns they read
  return {"x", "y"};
}

std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.index(i)]);
  return idx;
}

}  // namespace

ad::Tensor Matrix::gather(std::span<const std::size_t> indices) const {
  std::vector<double> out(indices.size() * cols);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= rows) throw DataError("row index out of range");
    std::copy_n(values.data() + indices[i] * cols, cols, out.data() + i * cols);
  }
  return ad::Tensor({indices.size(), cols}, std::move(out));
}

Matrix Matrix::take(std::span<const std::size_t> indices) const {
  Matrix m(indices.size(), cols);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    std::copy_n(values.data() + indices[i] * cols, cols, m.values.data() + i * cols);
  }
  return m;
}

Matrix Matrix::from_tensor(const ad::Tensor& t) {
  Matrix m(t.rows(), t.cols());
  std::copy(t.data().begin(), t.data().end(), m.values.begin());
  return m;
}

ad::Tensor Matrix::to_tensor() const { return ad::Tensor({rows, cols}, values); }

Matrix hstack(std::span<const Matrix> parts) {
  if (parts.empty()) return {};
  std::size_t cols = 0;
  for (const auto& p : parts) {
    if (p.rows != parts.front().rows) throw DataError("hstack of matrices with different row counts");
    cols += p.cols;
  }
  Matrix m(parts.front().rows, cols);
  for (std::size_t r = 0; r < m.rows; ++r) {
    std::size_t c0 = 0;
    for (const auto& p : parts) {
      std::copy_n(p.values.data() + r * p.cols, p.cols, m.values.data() + r * cols + c0);
      c0 += p.cols;
    }
  }
  return m;
}

std::string to_string(Pairing p) {
  switch (p) {
    case Pairing::Paired: return "paired";
    case Pairing::Unpaired: return "unpaired";
    case Pairing::TwoOverlappingPairs: return "two_overlapping_pairs";
  }
  return "paired";
}

Pairing parse_pairing(const std::string& s) {
  if (s == "paired") return Pairing::Paired;
  if (s == "unpaired") return Pairing::Unpaired;
  if (s == "two_overlapping_pairs") return Pairing::TwoOverlappingPairs;
  throw DataError("unknown pairing '" + s + "'");
}

Dataset::Dataset(Pairing pairing, std::vector<Column> columns,
                 std::map<std::string, std::string> metadata)
    : pairing_(pairing), columns_(std::move(columns)), metadata_(std::move(metadata)) {
  for (const auto& name : required_columns(pairing_)) {
    if (!has_column(name)) throw DataError("dataset is missing column '" + name + "'");
  }
  for (const auto& c : columns_) {
    if (c.values.rows != columns_.front().values.rows) {
      throw DataError("column '" + c.name + "' has a different row count");
    }
    if (c.values.cols == 0) throw DataError("column '" + c.name + "' has zero width");
  }
  if (rows() == 0) throw DataError("dataset has no rows");
}

std::size_t Dataset::rows() const { return columns_.empty() ? 0 : columns_.front().values.rows; }

bool Dataset::has_column(const std::string& name) const {
  return std::any_of(columns_.begin(), columns_.end(), [&](const Column& c) { return c.name == name; });
}

const Matrix& Dataset::column(const std::string& name) const {
  for (const auto& c : columns_) {
    if (c.name == name) return c.values;
  }
  throw DataError("dataset has no column '" + name + "'");
}

Dataset Dataset::unpaired(std::uint64_t seed) const {
  if (pairing_ == Pairing::TwoOverlappingPairs) {
    throw DataError("overlapping pair tables have no unpaired view");
  }
  std::vector<Column> cols;
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    auto idx = permutation(rows(), derive_seed(seed, 1000 + i));
    cols.push_back({columns_[i].name, columns_[i].values.take(idx)});
  }
  auto meta = metadata_;
  meta["view_seed"] = std::to_string(seed);
  return Dataset(Pairing::Unpaired, std::move(cols), std::move(meta));
}

Dataset Dataset::take_rows(std::span<const std::size_t> indices) const {
  std::vector<Column> cols;
  for (const auto& c : columns_) cols.push_back({c.name, c.values.take(indices)});
  return Dataset(pairing_, std::move(cols), metadata_);
}

std::string format_dataset(const Dataset& ds) {
  std::ostringstream os;
  os << kMagic << '\n';
  os << "pairing\t" << to_string(ds.pairing()) << '\n';
  os << "rows\t" << ds.rows() << '\n';
  os << "columns";
  for (const auto& c : ds.columns()) os << '\t' << c.name << ':' << c.values.cols;
  os << '\n';
  for (const auto& [k, v] : ds.metadata()) os << "meta\t" << k << '\t' << v << '\n';
  os << kDataMarker << '\n';
  char buf[40];
  for (std::size_t r = 0; r < ds.rows(); ++r) {
    bool first = true;
    for (const auto& c : ds.columns()) {
      for (double v : c.values.row(r)) {
        if (!first) os << '\t';
        first = false;
        std::snprintf(buf, sizeof buf, "%.17g", v);
        os << buf;
      }
    }
    os << '\n';
  }
  return os.str();
}

void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write dataset '" + path + "'");
  out << format_dataset(ds);
  if (!out) throw DataError("failed writing dataset '" + path + "'");
}

namespace {

Dataset parse_impl(const std::string& text, std::optional<Pairing> requested, std::uint64_t seed) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line) || line != kMagic) throw DataError("not a jointgan dataset file");

  std::optional<Pairing> pairing;
  std::optional<std::size_t> rows;
  std::vector<std::pair<std::string, std::size_t>> layout;
  std::map<std::string, std::string> meta;
  bool data = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line == kDataMarker) {
      data = true;
      break;
    }
    auto fields = split(line, '\t');
    if (fields[0] == "pairing" && fields.size() == 2) {
      pairing = parse_pairing(fields[1]);
    } else if (fields[0] == "rows" && fields.size() == 2) {
      rows = parse_size(fields[1], "row count");
    } else if (fields[0] == "columns") {
      for (std::size_t i = 1; i < fields.size(); ++i) {
        auto colon = fields[i].rfind(':');
        if (colon == std::string::npos) throw DataError("malformed column entry '" + fields[i] + "'");
        layout.emplace_back(fields[i].substr(0, colon),
                            parse_size(fields[i].substr(colon + 1), "column width"));
      }
    } else if (fields[0] == "meta" && fields.size() == 3) {
      meta[fields[1]] = fields[2];
    } else {
      throw DataError("malformed header line " + std::to_string(lineno) + ": '" + line + "'");
    }
  }
  if (!data) throw DataError("dataset file has no #data section");
  if (!pairing) throw DataError("dataset header lacks pairing");
  if (!rows) throw DataError("dataset header lacks rows");
  for (const auto& name : required_columns(*pairing)) {
    bool found = std::any_of(layout.begin(), layout.end(), [&](const auto& c) { return c.first == name; });
    if (!found) throw DataError("dataset file is missing column '" + name + "'");
  }

  std::size_t width = 0;
  for (const auto& [_, w] : layout) width += w;
  std::vector<Column> columns;
  for (const auto& [name, w] : layout) columns.push_back({name, Matrix(*rows, w)});
  for (std::size_t r = 0; r < *rows; ++r) {
    ++lineno;
    if (!std::getline(in, line)) throw DataError("dataset file truncated at row " + std::to_string(r));
    auto fields = split(line, '\t');
    if (fields.size() != width) {
      throw DataError("line " + std::to_string(lineno) + " has " + std::to_string(fields.size()) +
                      " values, expected " + std::to_string(width));
    }
    std::size_t f = 0;
    for (auto& c : columns) {
      for (std::size_t j = 0; j < c.values.cols; ++j) c.values(r, j) = parse_double(fields[f++], lineno);
    }
  }
  while (std::getline(in, line)) {
    if (!line.empty()) throw DataError("trailing data after declared rows");
  }

  Dataset ds(*pairing, std::move(columns), std::move(meta));
  if (!requested) return ds;
  switch (*requested) {
    case Pairing::Paired:
      if (*pairing != Pairing::Paired) {
        throw DataError("cannot present a paired view of a " + to_string(*pairing) + " file");
      }
      return ds;
    case Pairing::Unpaired:
      if (*pairing == Pairing::TwoOverlappingPairs) {
        throw DataError("cannot present an unpaired view of overlapping pair tables");
      }
      return ds.unpaired(seed);
    case Pairing::TwoOverlappingPairs:
      if (*pairing != Pairing::TwoOverlappingPairs) {
        throw DataError("file is " + to_string(*pairing) + ", not two_overlapping_pairs");
      }
      return ds;
  }
  return ds;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

Dataset parse_dataset(const std::string& text, Pairing view, std::uint64_t seed) {
  return parse_impl(text, view, seed);
}

Dataset load_dataset(const std::string& path, Pairing view, std::uint64_t seed) {
  return parse_impl(read_file(path), view, seed);
}

Dataset load_dataset_as_stored(const std::string& path) { return parse_impl(read_file(path), std::nullopt, 0); }

std::pair<Dataset, Dataset> holdout_split(const Dataset& ds, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw DataError("holdout fraction must lie in (0, 1)");
  const auto n = ds.rows();
  const auto test_n = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  if (test_n == 0 || test_n >= n) throw DataError("holdout fraction leaves an empty partition");
  auto idx = permutation(n, derive_seed(seed, 7));
  std::vector<std::size_t> test(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(test_n));
  std::vector<std::size_t> train(idx.begin() + static_cast<std::ptrdiff_t>(test_n), idx.end());
  std::sort(test.begin(), test.end());
  std::sort(train.begin(), train.end());
  return {ds.take_rows(train), ds.take_rows(test)};
}

PairedView::PairedView(const Dataset& ds) {
  if (ds.pairing() != Pairing::Paired) {
    throw DataError("paired joint draws requested from a " + to_string(ds.pairing()) + " dataset");
  }
  x_ = &ds.column("x");
  y_ = &ds.column("y");
}

UnpairedView::UnpairedView(const Dataset& ds) {
  if (ds.pairing() != Pairing::Unpaired) {
    throw DataError("unpaired mode requires an unpaired dataset view, got " + to_string(ds.pairing()));
  }
  x_ = &ds.column("x");
  y_ = &ds.column("y");
}

OverlappingPairsView::OverlappingPairsView(const Dataset& ds) {
  if (ds.pairing() != Pairing::TwoOverlappingPairs) {
    throw DataError("three-domain mode requires overlapping pair tables, got " + to_string(ds.pairing()));
  }
  xy_x_ = &ds.column("xy.x");
  xy_y_ = &ds.column("xy.y");
  yz_y_ = &ds.column("yz.y");
  yz_z_ = &ds.column("yz.z");
}

}  // namespace jointgan
