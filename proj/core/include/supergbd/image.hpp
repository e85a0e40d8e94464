// Copyright 2026 The supergbd Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace supergbd {

// Dense row-major image with interleaved channels.
template <typename T>
class Image {
 public:
  Image() = default;
  Image(int rows, int cols, int channels = 1, T fill = T{})
      : rows_(rows), cols_(cols), channels_(channels),
        data_(static_cast<std::size_t>(rows) * cols * channels, fill) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int channels() const { return channels_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(rows_) * cols_; }
  bool empty() const { return data_.empty(); }

  bool same_size(int rows, int cols) const { return rows_ == rows && cols_ == cols; }
  template <typename U>
  bool same_size(const Image<U>& other) const {
    return rows_ == other.rows() && cols_ == other.cols();
  }

  bool in_bounds(int r, int c) const { return r >= 0 && r < rows_ && c >= 0 && c < cols_; }

  T& operator()(int r, int c, int ch = 0) {
    return data_[(static_cast<std::size_t>(r) * cols_ + c) * channels_ + ch];
  }
  const T& operator()(int r, int c, int ch = 0) const {
    return data_[(static_cast<std::size_t>(r) * cols_ + c) * channels_ + ch];
  }

  // Flat pixel index access for single-channel images.
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  int channels_ = 1;
  std::vector<T> data_;
};

using LabelMap = Image<std::int32_t>;
using Mask = Image<std::uint8_t>;

}  // namespace supergbd
