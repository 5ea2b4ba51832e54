#pragma once

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "sketchlra/errors.hpp"
#include "sketchlra/sparse_matrix.hpp"

namespace sketchlra {

enum class MatrixFormat { matrix_market, bag_of_words };

inline MatrixFormat parse_format(const std::string& s) {
  if (s == "mm" || s == "matrix_market" || s == "mtx") return MatrixFormat::matrix_market;
  if (s == "bow" || s == "bag_of_words" || s == "bag_of_words_triplets") return MatrixFormat::bag_of_words;
  throw std::invalid_argument("unknown format '" + s + "' (expected matrix_market or bag_of_words)");
}

struct LoadedMatrix {
  SparseMatrix matrix;
  bool transposed = false;  // true when a D x W bag-of-words was stored as W x D
};

namespace detail {

class LineReader {
 public:
  LineReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  // Next line that is not blank and does not start with '%'.
  bool next(std::string& line) {
    while (std::getline(in_, line)) {
      ++line_no_;
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos || line[first] == '%') continue;
      return true;
    }
    return false;
  }

  bool raw(std::string& line) {
    if (!std::getline(in_, line)) return false;
    ++line_no_;
    return true;
  }

  [[noreturn]] void fail(const std::string& what) const { throw parse_error(source_, line_no_, what); }

  std::size_t line_no() const { return line_no_; }

 private:
  std::istream& in_;
  std::string source_;
  std::size_t line_no_ = 0;
};

inline std::vector<std::string> split_fields(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  for (std::string f; ss >> f;) out.push_back(f);
  return out;
}

inline std::size_t parse_count(const std::string& s, const LineReader& r, const char* what) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
    r.fail(std::string("expected non-negative integer for ") + what + ", got '" + s + "'");
  }
  errno = 0;
  const unsigned long long v = std::strtoull(s.c_str(), nullptr, 10);
  if (errno == ERANGE) r.fail(std::string(what) + " out of range");
  return static_cast<std::size_t>(v);
}

inline double parse_value(const std::string& s, const LineReader& r) {
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0' || errno == ERANGE || !std::isfinite(v)) {
    r.fail("invalid numeric value '" + s + "'");
  }
  return v;
}

struct LinedTriplet {
  Triplet t;
  std::size_t line;
};

inline SparseMatrix assemble(std::size_t rows, std::size_t cols, std::vector<LinedTriplet> entries,
                             const std::string& source) {
  std::sort(entries.begin(), entries.end(), [](const LinedTriplet& a, const LinedTriplet& b) {
    return std::tie(a.t.row, a.t.col, a.line) < std::tie(b.t.row, b.t.col, b.line);
  });
  std::vector<Triplet> trips;
  trips.reserve(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (i > 0 && entries[i].t.row == entries[i - 1].t.row && entries[i].t.col == entries[i - 1].t.col) {
      throw parse_error(source, entries[i].line,
                        "duplicate coordinate (" + std::to_string(entries[i].t.row + 1) + ", " +
                            std::to_string(entries[i].t.col + 1) + "), first seen on line " +
                            std::to_string(entries[i - 1].line));
    }
    trips.push_back(entries[i].t);
  }
  return SparseMatrix::from_triplets(rows, cols, std::move(trips));
}

}  // namespace detail

/// Matrix Market coordinate format, real or integer, general symmetry.
inline SparseMatrix read_matrix_market(std::istream& in, const std::string& source = "<stream>") {
  detail::LineReader r(in, source);
  std::string line;
  if (!r.raw(line)) r.fail("empty input");
  std::vector<std::string> banner = detail::split_fields(line);
  for (auto& f : banner) std::transform(f.begin(), f.end(), f.begin(), [](unsigned char c) { return std::tolower(c); });
  if (banner.size() != 5 || banner[0] != "%%matrixmarket" || banner[1] != "matrix") {
    r.fail("missing '%%MatrixMarket matrix ...' banner");
  }
  if (banner[2] != "coordinate") r.fail("only coordinate format is supported, got '" + banner[2] + "'");
  if (banner[3] != "real" && banner[3] != "integer") r.fail("unsupported field type '" + banner[3] + "'");
  if (banner[4] != "general") r.fail("unsupported symmetry '" + banner[4] + "'");

  if (!r.next(line)) r.fail("missing size line");
  const auto size = detail::split_fields(line);
  if (size.size() != 3) r.fail("size line must have 3 fields: rows cols nnz");
  const std::size_t rows = detail::parse_count(size[0], r, "rows");
  const std::size_t cols = detail::parse_count(size[1], r, "cols");
  const std::size_t nnz = detail::parse_count(size[2], r, "nnz");

  std::vector<detail::LinedTriplet> entries;
  entries.reserve(nnz);
  while (r.next(line)) {
    const auto f = detail::split_fields(line);
    if (f.size() != 3) r.fail("entry must have 3 fields: row col value");
    const std::size_t i = detail::parse_count(f[0], r, "row index");
    const std::size_t j = detail::parse_count(f[1], r, "column index");
    if (i < 1 || i > rows || j < 1 || j > cols) {
      r.fail("index (" + f[0] + ", " + f[1] + ") outside " + std::to_string(rows) + "x" + std::to_string(cols));
    }
    if (entries.size() == nnz) r.fail("more entries than the declared nnz=" + std::to_string(nnz));
    entries.push_back({{i - 1, j - 1, detail::parse_value(f[2], r)}, r.line_no()});
  }
  if (entries.size() != nnz) {
    r.fail("declared nnz=" + std::to_string(nnz) + " but found " + std::to_string(entries.size()));
  }
  return detail::assemble(rows, cols, std::move(entries), source);
}

/// UCI bag-of-words: lines D, W, NNZ, then "docID wordID count" (1-based).
/// The D x W matrix is returned transposed when D < W so that rows >= cols.
inline LoadedMatrix read_bag_of_words(std::istream& in, const std::string& source = "<stream>") {
  detail::LineReader r(in, source);
  std::string line;
  std::size_t header[3];
  const char* names[3] = {"document count", "word count", "nnz"};
  for (int h = 0; h < 3; ++h) {
    if (!r.next(line)) r.fail(std::string("missing header line: ") + names[h]);
    const auto f = detail::split_fields(line);
    if (f.size() != 1) r.fail(std::string("header line must hold a single ") + names[h]);
    header[h] = detail::parse_count(f[0], r, names[h]);
  }
  const std::size_t docs = header[0], words = header[1], nnz = header[2];

  std::vector<detail::LinedTriplet> entries;
  entries.reserve(nnz);
  while (r.next(line)) {
    const auto f = detail::split_fields(line);
    if (f.size() != 3) r.fail("entry must have 3 fields: docID wordID count");
    const std::size_t d = detail::parse_count(f[0], r, "docID");
    const std::size_t w = detail::parse_count(f[1], r, "wordID");
    if (d < 1 || d > docs) r.fail("docID " + f[0] + " outside [1, " + std::to_string(docs) + "]");
    if (w < 1 || w > words) r.fail("wordID " + f[1] + " outside [1, " + std::to_string(words) + "]");
    if (entries.size() == nnz) r.fail("more entries than the declared nnz=" + std::to_string(nnz));
    entries.push_back({{d - 1, w - 1, detail::parse_value(f[2], r)}, r.line_no()});
  }
  if (entries.size() != nnz) {
    r.fail("declared nnz=" + std::to_string(nnz) + " but found " + std::to_string(entries.size()));
  }
  LoadedMatrix out;
  out.matrix = detail::assemble(docs, words, std::move(entries), source);
  if (docs < words) {
    out.matrix = out.matrix.transposed();
    out.transposed = true;
  }
  return out;
}

inline LoadedMatrix load_matrix(const std::string& path, MatrixFormat format) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "': " + std::strerror(errno));
  if (format == MatrixFormat::bag_of_words) return read_bag_of_words(in, path);
  return LoadedMatrix{read_matrix_market(in, path), false};
}

inline void write_matrix_market(std::ostream& out, const SparseMatrix& a) {
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << a.rows() << ' ' << a.cols() << ' ' << a.nnz() << '\n';
  char buf[64];
  for (const Triplet& t : a.triplets()) {
    std::snprintf(buf, sizeof buf, "%.17g", t.value);
    out << t.row + 1 << ' ' << t.col + 1 << ' ' << buf << '\n';
  }
}

inline void write_matrix_market(const std::string& path, const SparseMatrix& a) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "': " + std::strerror(errno));
  write_matrix_market(out, a);
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

}  // namespace sketchlra
