#pragma once
// Dense row-major 2D pixel grid shared by images, masks and distance maps.

#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vterr {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ShapeMismatch : public Error {
public:
  using Error::Error;
};

struct Shape {
  int width = 0;
  int height = 0;

  [[nodiscard]] std::size_t size() const {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
  bool operator==(const Shape &) const = default;
};

inline std::string to_string(Shape s) {
  return std::to_string(s.width) + "x" + std::to_string(s.height);
}

template <typename T> class Grid {
public:
  using value_type = T;

  Grid() = default;
  Grid(int width, int height, T fill = T{})
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(checked(width)) *
                  static_cast<std::size_t>(checked(height)),
              fill) {}
  Grid(Shape s, T fill = T{}) : Grid(s.width, s.height, fill) {}

  [[nodiscard]] int width() const { return width_; }
  [[nodiscard]] int height() const { return height_; }
  [[nodiscard]] Shape shape() const { return {width_, height_}; }
  [[nodiscard]] std::size_t size() const { return data_.size(); }
  [[nodiscard]] bool empty() const { return data_.empty(); }

  T &operator()(int x, int y) { return data_[index(x, y)]; }
  const T &operator()(int x, int y) const { return data_[index(x, y)]; }

  [[nodiscard]] bool contains(int x, int y) const {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  std::span<T> pixels() { return data_; }
  std::span<const T> pixels() const { return data_; }
  std::span<T> row(int y) {
    return std::span<T>(data_).subspan(static_cast<std::size_t>(y) * width_,
                                       width_);
  }
  std::span<const T> row(int y) const {
    return std::span<const T>(data_).subspan(
        static_cast<std::size_t>(y) * width_, width_);
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool operator==(const Grid &) const = default;

private:
  static int checked(int v) {
    if (v < 0)
      throw Error("negative grid dimension");
    return v;
  }
  [[nodiscard]] std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

inline void require_same_shape(Shape a, Shape b, const char *what) {
  if (a != b)
    throw ShapeMismatch(std::string(what) + ": shape mismatch (" +
                        to_string(a) + " vs " + to_string(b) + ")");
}

} // namespace vterr
