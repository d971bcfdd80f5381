#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace nestgam {

constexpr int kFormatVersion = 1;

/// Named numeric columns of equal length.
class DataTable {
 public:
  int rows() const { return rows_; }
  int cols() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& names() const { return names_; }
  bool has(const std::string& name) const;
  const Eigen::VectorXd& col(const std::string& name) const;
  const Eigen::VectorXd& col(int j) const { return cols_[j]; }
  void add(const std::string& name, const Eigen::VectorXd& values);
  void set_rows(int n) { rows_ = n; }
  /// Rows [begin, end).
  DataTable slice(int begin, int end) const;

 private:
  std::vector<std::string> names_;
  std::vector<Eigen::VectorXd> cols_;
  int rows_ = 0;
};

/// Reads a header-first CSV; lines starting with '#' are metadata and skipped.
DataTable read_csv(const std::string& path);
DataTable parse_csv(const std::string& text);
void write_csv(const std::string& path, const DataTable& table, const std::vector<std::string>& meta = {});
std::string format_csv(const DataTable& table, const std::vector<std::string>& meta = {});

std::string read_text(const std::string& path);
void write_text(const std::string& path, const std::string& text);

/// 64-bit FNV-1a digest as 16 hex characters.
std::string fnv1a_hex(const std::string& bytes);

/// Metadata line embedded in every output file.
std::string provenance_line(const std::string& config_hash, std::uint64_t seed);

/// Shortest round-trip decimal representation.
std::string format_double(double v);

}  // namespace nestgam
