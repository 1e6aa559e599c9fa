// Core raster types: a generic Grid<T>, binary Mask and probability ProbMap
// rasters with value invariants enforced on every construction path, plus
// pixel coordinates and 4-/8-neighbourhood helpers shared by the whole
// library.
#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace tube {

// Pixel coordinate, (row, col) everywhere in this library.
struct Coord {
  int row = 0;
  int col = 0;

  friend bool operator==(const Coord&, const Coord&) = default;
  friend auto operator<=>(const Coord&, const Coord&) = default;
};

inline bool are_8_adjacent(Coord a, Coord b) {
  const int dr = a.row - b.row;
  const int dc = a.col - b.col;
  return !(dr == 0 && dc == 0) && dr >= -1 && dr <= 1 && dc >= -1 && dc <= 1;
}

// Neighbour offsets in fixed scan order (row-major), used everywhere a
// deterministic expansion order matters.
inline constexpr std::array<Coord, 8> kNeighbours8 = {
    Coord{-1, -1}, Coord{-1, 0}, Coord{-1, 1}, Coord{0, -1},
    Coord{0, 1},   Coord{1, -1}, Coord{1, 0},  Coord{1, 1}};

inline constexpr std::array<Coord, 4> kNeighbours4 = {
    Coord{-1, 0}, Coord{0, -1}, Coord{0, 1}, Coord{1, 0}};

class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// Dense row-major 2-D grid. No value invariants; Mask and ProbMap wrap it
// when invariants are required.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int rows, int cols, T fill = T{}) : rows_(rows), cols_(cols) {
    if (rows < 1 || cols < 1) {
      throw std::invalid_argument("Grid: dimensions must be >= 1");
    }
    v_.assign(static_cast<size_t>(rows) * cols, fill);
  }
  Grid(int rows, int cols, std::vector<T> values)
      : rows_(rows), cols_(cols), v_(std::move(values)) {
    if (rows < 1 || cols < 1) {
      throw std::invalid_argument("Grid: dimensions must be >= 1");
    }
    if (v_.size() != static_cast<size_t>(rows) * cols) {
      throw std::invalid_argument("Grid: value count does not match shape");
    }
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  size_t size() const { return v_.size(); }

  bool in_bounds(int r, int c) const {
    return r >= 0 && r < rows_ && c >= 0 && c < cols_;
  }
  bool in_bounds(Coord p) const { return in_bounds(p.row, p.col); }

  T& operator()(int r, int c) { return v_[static_cast<size_t>(r) * cols_ + c]; }
  const T& operator()(int r, int c) const {
    return v_[static_cast<size_t>(r) * cols_ + c];
  }
  T& operator()(Coord p) { return (*this)(p.row, p.col); }
  const T& operator()(Coord p) const { return (*this)(p.row, p.col); }

  T& at(int r, int c) {
    check_bounds(r, c);
    return (*this)(r, c);
  }
  const T& at(int r, int c) const {
    check_bounds(r, c);
    return (*this)(r, c);
  }

  std::vector<T>& values() { return v_; }
  const std::vector<T>& values() const { return v_; }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  void check_bounds(int r, int c) const {
    if (!in_bounds(r, c)) {
      throw std::out_of_range("Grid: index (" + std::to_string(r) + ", " +
                              std::to_string(c) + ") outside " +
                              std::to_string(rows_) + "x" +
                              std::to_string(cols_));
    }
  }

  int rows_ = 0;
  int cols_ = 0;
  std::vector<T> v_;
};

// Binary raster; every value is 0 or 1.
class Mask {
 public:
  Mask() = default;
  Mask(int rows, int cols) : g_(rows, cols, std::uint8_t{0}) {}

  static Mask from_values(int rows, int cols, std::vector<std::uint8_t> v) {
    for (size_t i = 0; i < v.size(); ++i) {
      if (v[i] > 1) {
        throw std::invalid_argument("Mask: value at index " +
                                    std::to_string(i) + " is not 0 or 1");
      }
    }
    Mask m;
    m.g_ = Grid<std::uint8_t>(rows, cols, std::move(v));
    return m;
  }

  int rows() const { return g_.rows(); }
  int cols() const { return g_.cols(); }
  size_t size() const { return g_.size(); }
  bool in_bounds(int r, int c) const { return g_.in_bounds(r, c); }
  bool in_bounds(Coord p) const { return g_.in_bounds(p); }

  std::uint8_t operator()(int r, int c) const { return g_(r, c); }
  std::uint8_t operator()(Coord p) const { return g_(p); }
  std::uint8_t at(int r, int c) const { return g_.at(r, c); }

  void set(int r, int c, bool fg) { g_.at(r, c) = fg ? 1 : 0; }
  void set(Coord p, bool fg) { set(p.row, p.col, fg); }

  // Treats out-of-bounds as background.
  bool fg(int r, int c) const { return g_.in_bounds(r, c) && g_(r, c) != 0; }
  bool fg(Coord p) const { return fg(p.row, p.col); }

  const std::vector<std::uint8_t>& values() const { return g_.values(); }

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  Grid<std::uint8_t> g_;
};

// Probability raster; every value lies in [0, 1].
class ProbMap {
 public:
  ProbMap() = default;
  ProbMap(int rows, int cols) : g_(rows, cols, 0.0f) {}

  static ProbMap from_values(int rows, int cols, std::vector<float> v) {
    for (size_t i = 0; i < v.size(); ++i) {
      if (!(v[i] >= 0.0f && v[i] <= 1.0f)) {
        throw std::invalid_argument("ProbMap: value at index " +
                                    std::to_string(i) + " outside [0, 1]");
      }
    }
    ProbMap m;
    m.g_ = Grid<float>(rows, cols, std::move(v));
    return m;
  }

  int rows() const { return g_.rows(); }
  int cols() const { return g_.cols(); }
  size_t size() const { return g_.size(); }
  bool in_bounds(int r, int c) const { return g_.in_bounds(r, c); }
  bool in_bounds(Coord p) const { return g_.in_bounds(p); }

  float operator()(int r, int c) const { return g_(r, c); }
  float operator()(Coord p) const { return g_(p); }
  float at(int r, int c) const { return g_.at(r, c); }

  void set(int r, int c, float v) {
    if (!(v >= 0.0f && v <= 1.0f)) {
      throw std::invalid_argument("ProbMap: value outside [0, 1]");
    }
    g_.at(r, c) = v;
  }
  void set(Coord p, float v) { set(p.row, p.col, v); }

  const std::vector<float>& values() const { return g_.values(); }

  friend bool operator==(const ProbMap&, const ProbMap&) = default;

 private:
  Grid<float> g_;
};

template <typename A, typename B>
bool same_shape(const A& a, const B& b) {
  return a.rows() == b.rows() && a.cols() == b.cols();
}

inline size_t count_foreground(const Mask& m) {
  size_t n = 0;
  for (auto v : m.values()) n += v;
  return n;
}

inline Mask threshold(const ProbMap& p, double t) {
  Mask out(p.rows(), p.cols());
  for (int r = 0; r < p.rows(); ++r) {
    for (int c = 0; c < p.cols(); ++c) {
      if (p(r, c) > t) out.set(r, c, true);
    }
  }
  return out;
}

// Indicator map of a mask: 1.0 on foreground, 0.0 elsewhere.
inline ProbMap indicator(const Mask& m) {
  std::vector<float> v(m.size());
  for (size_t i = 0; i < v.size(); ++i) v[i] = m.values()[i] ? 1.0f : 0.0f;
  return ProbMap::from_values(m.rows(), m.cols(), std::move(v));
}

}  // namespace tube
