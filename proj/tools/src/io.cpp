#include "io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace fpdpm::cli {
namespace {

static_assert(std::endian::native == std::endian::little, "binary matrix I/O assumes a little-endian host");

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    std::string cell = line.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!cell.empty() && cell.back() == '\r') cell.pop_back();
    out.push_back(cell);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::ifstream open_in(const std::string& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return in;
}

std::ofstream open_out(const std::string& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  return out;
}

double parse_double(const std::string& s, const std::string& path, int row) {
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw IoError(path + ": row " + std::to_string(row) + ": '" + s + "' is not a number");
  }
  return v;
}

int parse_int(const std::string& s, const std::string& path, int row) {
  int v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw IoError(path + ": row " + std::to_string(row) + ": '" + s + "' is not an integer");
  }
  return v;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m) {
  auto out = open_out(path);
  for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? "," : "") << 'v' << c;
  out << '\n';
  char buf[32];
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", m(r, c));
      out << (c ? "," : "") << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

Eigen::MatrixXd read_matrix_csv(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw IoError(path + ": empty file");
  const std::size_t cols = split_csv_line(line).size();
  std::vector<double> values;
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != cols) {
      throw IoError(path + ": row " + std::to_string(rows + 1) + " has " + std::to_string(cells.size()) +
                    " fields, header has " + std::to_string(cols));
    }
    for (const auto& cell : cells) values.push_back(parse_double(cell, path, rows + 1));
    ++rows;
  }
  Eigen::MatrixXd m(rows, static_cast<Eigen::Index>(cols));
  for (int r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) m(r, static_cast<Eigen::Index>(c)) = values[r * cols + c];
  }
  return m;
}

void write_matrix_binary(const std::string& path, const Eigen::MatrixXd& m) {
  auto out = open_out(path, std::ios::binary);
  const std::uint64_t dims[2] = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
  out.write(reinterpret_cast<const char*>(dims), sizeof dims);
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
  out.write(reinterpret_cast<const char*>(rm.data()), static_cast<std::streamsize>(sizeof(double) * rm.size()));
  if (!out) throw IoError("write failed for '" + path + "'");
}

Eigen::MatrixXd read_matrix_binary(const std::string& path) {
  auto in = open_in(path, std::ios::binary);
  std::uint64_t dims[2] = {0, 0};
  in.read(reinterpret_cast<char*>(dims), sizeof dims);
  if (!in) throw IoError(path + ": truncated header");
  if (dims[0] > (1u << 28) || dims[1] > (1u << 28)) throw IoError(path + ": implausible dimensions");
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(dims[0], dims[1]);
  in.read(reinterpret_cast<char*>(rm.data()), static_cast<std::streamsize>(sizeof(double) * rm.size()));
  if (!in) throw IoError(path + ": truncated data");
  return rm;
}

void write_matrix(const std::string& path, const Eigen::MatrixXd& m) {
  if (ends_with(path, ".bin")) {
    write_matrix_binary(path, m);
  } else {
    write_matrix_csv(path, m);
  }
}

Eigen::MatrixXd read_matrix(const std::string& path) {
  return ends_with(path, ".bin") ? read_matrix_binary(path) : read_matrix_csv(path);
}

void write_labels_csv(const std::string& path, const std::vector<std::string>& names,
                      const std::vector<std::vector<int>>& columns) {
  if (names.size() != columns.size()) throw ParameterError("label names and columns differ in count");
  const std::size_t n = columns.empty() ? 0 : columns[0].size();
  for (const auto& c : columns) {
    if (c.size() != n) throw ParameterError("label columns differ in length");
  }
  auto out = open_out(path);
  for (std::size_t k = 0; k < names.size(); ++k) out << (k ? "," : "") << names[k];
  out << '\n';
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < columns.size(); ++k) out << (k ? "," : "") << columns[k][i];
    out << '\n';
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

const std::vector<int>& LabelTable::column(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw IoError("label column '" + name + "' not found");
  return columns[static_cast<std::size_t>(it - names.begin())];
}

bool LabelTable::has(const std::string& name) const {
  return std::find(names.begin(), names.end(), name) != names.end();
}

LabelTable read_labels_csv(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw IoError(path + ": empty file");
  LabelTable t;
  t.names = split_csv_line(line);
  t.columns.assign(t.names.size(), {});
  int row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    ++row;
    const auto cells = split_csv_line(line);
    if (cells.size() != t.names.size()) throw IoError(path + ": row " + std::to_string(row) + " has the wrong width");
    for (std::size_t k = 0; k < cells.size(); ++k) t.columns[k].push_back(parse_int(cells[k], path, row));
  }
  return t;
}

void write_membership_trace(const std::string& path, const Trace& trace) {
  auto out = open_out(path);
  out << "sample,unit";
  for (int j = 0; j < trace.num_levels; ++j) out << ",level" << j;
  out << ",cov\n";
  for (int r = 0; r < static_cast<int>(trace.memberships.size()); ++r) {
    for (int i = 0; i < trace.n; ++i) {
      out << r << ',' << i;
      for (int j = 0; j < trace.num_levels; ++j) out << ',' << trace.membership(r, i, j) + 1;
      const int cov = r < static_cast<int>(trace.cov_memberships.size()) ? trace.cov_memberships[r][i] + 1 : 0;
      out << ',' << cov << '\n';
    }
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

Trace read_membership_trace(const std::string& path) {
  const LabelTable t = read_labels_csv(path);
  if (t.names.size() < 4 || t.names[0] != "sample" || t.names[1] != "unit" || t.names.back() != "cov") {
    throw IoError(path + ": not a membership trace (expected sample,unit,level0..,cov)");
  }
  Trace tr;
  tr.num_levels = static_cast<int>(t.names.size()) - 3;
  const auto& sample = t.columns[0];
  const auto& unit = t.columns[1];
  if (sample.empty()) throw IoError(path + ": trace has no samples");
  tr.n = *std::max_element(unit.begin(), unit.end()) + 1;
  tr.retained = *std::max_element(sample.begin(), sample.end()) + 1;
  if (static_cast<std::size_t>(tr.n) * tr.retained != sample.size()) {
    throw IoError(path + ": rows do not form a complete samples x units table");
  }
  tr.memberships.assign(tr.retained, std::vector<int>(static_cast<std::size_t>(tr.n) * tr.num_levels));
  tr.cov_memberships.assign(tr.retained, std::vector<int>(tr.n));
  for (std::size_t row = 0; row < sample.size(); ++row) {
    const int r = sample[row];
    const int i = unit[row];
    if (r < 0 || i < 0) throw IoError(path + ": negative sample or unit index");
    for (int j = 0; j < tr.num_levels; ++j) {
      const int l = t.columns[2 + j][row];
      if (l < 1) throw IoError(path + ": labels must be 1-based");
      tr.memberships[r][static_cast<std::size_t>(i) * tr.num_levels + j] = l - 1;
    }
    tr.cov_memberships[r][i] = t.columns.back()[row] - 1;
  }
  return tr;
}

void write_text(const std::string& path, const std::string& text) {
  auto out = open_out(path, std::ios::binary);
  out << text;
  if (!out) throw IoError("write failed for '" + path + "'");
}

std::string read_text(const std::string& path) {
  auto in = open_in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace fpdpm::cli
