#include "nestgam/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "nestgam/error.hpp"

namespace nestgam {

bool DataTable::has(const std::string& name) const {
  for (const auto& n : names_)
    if (n == name) return true;
  return false;
}

const Eigen::VectorXd& DataTable::col(const std::string& name) const {
  for (size_t j = 0; j < names_.size(); ++j)
    if (names_[j] == name) return cols_[j];
  fail(ErrorCode::Data, "missing column '" + name + "'");
}

void DataTable::add(const std::string& name, const Eigen::VectorXd& values) {
  require(!has(name), "duplicate column '" + name + "'", ErrorCode::Data);
  if (names_.empty())
    rows_ = static_cast<int>(values.size());
  else
    require(values.size() == rows_, "column '" + name + "' has the wrong length", ErrorCode::Data);
  names_.push_back(name);
  cols_.push_back(values);
}

DataTable DataTable::slice(int begin, int end) const {
  require(begin >= 0 && end <= rows_ && begin <= end, "row slice out of range");
  DataTable t;
  for (size_t j = 0; j < names_.size(); ++j) t.add(names_[j], cols_[j].segment(begin, end - begin));
  t.rows_ = end - begin;
  return t;
}

namespace {

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(trim(cur));
  return out;
}

double parse_number(const std::string& s, int line, const std::string& col) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = b + s.size();
  auto res = std::from_chars(b, e, v);
  if (res.ec != std::errc() || res.ptr != e) {
    if (s == "nan" || s == "NaN" || s == "NA" || s.empty())
      fail(ErrorCode::Data, "missing value in column '" + col + "' at line " + std::to_string(line));
    fail(ErrorCode::Data, "unparseable value '" + s + "' in column '" + col + "' at line " + std::to_string(line));
  }
  return v;
}

}  // namespace

DataTable parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> header;
  std::vector<std::vector<double>> cols;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (header.empty()) {
      header = split(t);
      for (const auto& h : header) require(!h.empty(), "empty column name in CSV header", ErrorCode::Data);
      cols.assign(header.size(), {});
      continue;
    }
    const auto cells = split(t);
    require(cells.size() == header.size(),
            "CSV line " + std::to_string(lineno) + " has " + std::to_string(cells.size()) + " fields, expected " +
                std::to_string(header.size()),
            ErrorCode::Data);
    for (size_t j = 0; j < cells.size(); ++j) cols[j].push_back(parse_number(cells[j], lineno, header[j]));
  }
  require(!header.empty(), "CSV has no header row", ErrorCode::Data);
  DataTable tab;
  for (size_t j = 0; j < header.size(); ++j)
    tab.add(header[j], Eigen::Map<Eigen::VectorXd>(cols[j].data(), static_cast<Eigen::Index>(cols[j].size())));
  tab.set_rows(cols.empty() ? 0 : static_cast<int>(cols[0].size()));
  return tab;
}

std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::Io, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::Io, "cannot write '" + path + "'");
  f << text;
  if (!f) fail(ErrorCode::Io, "write failed for '" + path + "'");
}

DataTable read_csv(const std::string& path) { return parse_csv(read_text(path)); }

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string format_csv(const DataTable& table, const std::vector<std::string>& meta) {
  std::string out;
  for (const auto& m : meta) out += "# " + m + "\n";
  for (int j = 0; j < table.cols(); ++j) out += (j ? "," : "") + table.names()[j];
  out += "\n";
  for (int i = 0; i < table.rows(); ++i) {
    for (int j = 0; j < table.cols(); ++j) {
      if (j) out += ",";
      out += format_double(table.col(j)(i));
    }
    out += "\n";
  }
  return out;
}

void write_csv(const std::string& path, const DataTable& table, const std::vector<std::string>& meta) {
  write_text(path, format_csv(table, meta));
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string provenance_line(const std::string& config_hash, std::uint64_t seed) {
  return "nestgam format_version=" + std::to_string(kFormatVersion) + " config_hash=" + config_hash +
         " seed=" + std::to_string(seed);
}

}  // namespace nestgam
