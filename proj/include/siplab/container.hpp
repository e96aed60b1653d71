// SPDX-License-Identifier: Apache-2.0
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

#ifndef SIPLAB_CONTAINER_HPP
#define SIPLAB_CONTAINER_HPP

#include <complex>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace siplab {

using Shape = std::vector<std::uint64_t>;

template <typename T>
struct NamedArray {
  Shape shape;
  std::vector<T> data;  // row-major
};

/// Chunked n-dimensional array file with named arrays (HDF5 underneath). Array names
/// may contain '/' to form groups. Every file carries a mandatory "format" string.
/// All failures surface as FormatError.
class Container {
 public:
  static Container create(const std::string& path, const std::string& format);
  /// Opens read-only and checks the format string.
  static Container open(const std::string& path, const std::string& expected_format);

  Container(Container&&) noexcept;
  Container& operator=(Container&&) noexcept;
  ~Container();

  const std::string& path() const { return path_; }
  std::string format() const;
  bool has(const std::string& name) const;
  /// Names of arrays directly under a group ("" for root).
  std::vector<std::string> list(const std::string& group) const;

  void write(const std::string& name, std::span<const float> data, const Shape& shape);
  void write(const std::string& name, std::span<const double> data, const Shape& shape);
  void write(const std::string& name, std::span<const std::uint64_t> data, const Shape& shape);
  void write(const std::string& name, std::span<const std::complex<float>> data, const Shape& shape);

  NamedArray<float> read_float(const std::string& name) const;
  NamedArray<double> read_double(const std::string& name) const;
  NamedArray<std::uint64_t> read_u64(const std::string& name) const;
  NamedArray<std::complex<float>> read_complex(const std::string& name) const;

  void set_attr(const std::string& key, const std::string& value);
  std::string attr(const std::string& key) const;
  bool has_attr(const std::string& key) const;

 private:
  struct Impl;
  Container(std::unique_ptr<Impl> impl, std::string path);
  std::unique_ptr<Impl> impl_;
  std::string path_;
};

}  // namespace siplab

#endif  // SIPLAB_CONTAINER_HPP
