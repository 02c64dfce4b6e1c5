#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace simba {

/// Dense 3D array, x fastest.
template <typename T>
class Array3 {
 public:
  Array3() = default;
  Array3(std::size_t nx, std::size_t ny, std::size_t nz, T fill = T{})
      : nx_(nx), ny_(ny), nz_(nz), data_(nx * ny * nz, fill) {}

  std::size_t nx() const { return nx_; }
  std::size_t ny() const { return ny_; }
  std::size_t nz() const { return nz_; }
  std::size_t size() const { return data_.size(); }
  std::array<std::size_t, 3> shape() const { return {nx_, ny_, nz_}; }
  bool same_shape(const Array3& o) const { return shape() == o.shape(); }

  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const {
    return (z * ny_ + y) * nx_ + x;
  }
  T& operator()(std::size_t x, std::size_t y, std::size_t z) { return data_[index(x, y, z)]; }
  const T& operator()(std::size_t x, std::size_t y, std::size_t z) const {
    return data_[index(x, y, z)];
  }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& values() { return data_; }
  const std::vector<T>& values() const { return data_; }

  bool operator==(const Array3&) const = default;

 private:
  std::size_t nx_ = 0;
  std::size_t ny_ = 0;
  std::size_t nz_ = 0;
  std::vector<T> data_;
};

}  // namespace simba
