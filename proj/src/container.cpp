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

#include "siplab/container.hpp"

#include <H5Cpp.h>

#include <numeric>

#include "siplab/types.hpp"

namespace siplab {

namespace {

std::uint64_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::uint64_t{1},
                         [](std::uint64_t a, std::uint64_t b) { return a * b; });
}

H5::CompType complex64_type() {
  H5::CompType type(sizeof(std::complex<float>));
  type.insertMember("r", 0, H5::PredType::NATIVE_FLOAT);
  type.insertMember("i", sizeof(float), H5::PredType::NATIVE_FLOAT);
  return type;
}

H5::DSetCreatPropList chunked(const Shape& shape) {
  H5::DSetCreatPropList plist;
  if (!shape.empty() && element_count(shape) > 0) {
    // One chunk per leading index keeps per-sample reads cheap.
    std::vector<hsize_t> chunk(shape.begin(), shape.end());
    chunk[0] = 1;
    if (element_count(Shape(chunk.begin(), chunk.end())) < 4096) {
      chunk[0] = shape[0];
    }
    plist.setChunk(static_cast<int>(chunk.size()), chunk.data());
  }
  return plist;
}

template <typename Fn>
auto guarded(const std::string& what, Fn&& fn) {
  try {
    return fn();
  } catch (const H5::Exception& ex) {
    throw FormatError(what + ": " + ex.getDetailMsg());
  }
}

}  // namespace

struct Container::Impl {
  H5::H5File file;
};

Container::Container(std::unique_ptr<Impl> impl, std::string path)
    : impl_(std::move(impl)), path_(std::move(path)) {}
Container::Container(Container&&) noexcept = default;
Container& Container::operator=(Container&&) noexcept = default;
Container::~Container() = default;

Container Container::create(const std::string& path, const std::string& format) {
  H5::Exception::dontPrint();
  auto impl = guarded("cannot create " + path, [&] {
    auto p = std::make_unique<Impl>();
    p->file = H5::H5File(path, H5F_ACC_TRUNC);
    return p;
  });
  Container c(std::move(impl), path);
  c.set_attr("format", format);
  return c;
}

Container Container::open(const std::string& path, const std::string& expected_format) {
  H5::Exception::dontPrint();
  auto impl = guarded("cannot open " + path, [&] {
    auto p = std::make_unique<Impl>();
    p->file = H5::H5File(path, H5F_ACC_RDONLY);
    return p;
  });
  Container c(std::move(impl), path);
  if (!c.has_attr("format")) {
    throw FormatError(path + ": missing format string");
  }
  const std::string fmt = c.format();
  if (fmt != expected_format) {
    throw FormatError(path + ": format '" + fmt + "', expected '" + expected_format + "'");
  }
  return c;
}

std::string Container::format() const { return attr("format"); }

bool Container::has(const std::string& name) const {
  return guarded("lookup " + name, [&] {
    // Walk the path so missing intermediate groups are not an error.
    std::string prefix;
    std::size_t pos = 0;
    while (true) {
      const std::size_t next = name.find('/', pos);
      prefix = name.substr(0, next);
      if (!impl_->file.nameExists(prefix)) return false;
      if (next == std::string::npos) return true;
      pos = next + 1;
    }
  });
}

std::vector<std::string> Container::list(const std::string& group) const {
  return guarded("list " + group, [&] {
    std::vector<std::string> names;
    H5::Group g = impl_->file.openGroup(group.empty() ? "/" : group);
    for (hsize_t i = 0; i < g.getNumObjs(); ++i) {
      names.push_back(g.getObjnameByIdx(i));
    }
    return names;
  });
}

namespace {

template <typename T>
void write_impl(H5::H5File& file, const std::string& name, const T* data, const Shape& shape,
                const H5::DataType& type) {
  std::vector<hsize_t> dims(shape.begin(), shape.end());
  H5::DataSpace space(static_cast<int>(dims.size()), dims.data());
  H5::LinkCreatPropList lcpl;
  H5Pset_create_intermediate_group(lcpl.getId(), 1);
  H5::DataSet ds = file.createDataSet(name, type, space, chunked(shape), H5::DSetAccPropList(), lcpl);
  if (element_count(shape) > 0) {
    ds.write(data, type);
  }
}

template <typename T>
NamedArray<T> read_impl(const H5::H5File& file, const std::string& name, const H5::DataType& type) {
  H5::DataSet ds = file.openDataSet(name);
  H5::DataSpace space = ds.getSpace();
  const int rank = space.getSimpleExtentNdims();
  std::vector<hsize_t> dims(static_cast<std::size_t>(rank));
  space.getSimpleExtentDims(dims.data());
  NamedArray<T> out;
  out.shape.assign(dims.begin(), dims.end());
  out.data.resize(element_count(out.shape));
  if (!out.data.empty()) {
    ds.read(out.data.data(), type);
  }
  return out;
}

}  // namespace

void Container::write(const std::string& name, std::span<const float> data, const Shape& shape) {
  if (data.size() != element_count(shape)) throw FormatError(name + ": data/shape size mismatch");
  guarded("write " + name, [&] {
    write_impl(impl_->file, name, data.data(), shape, H5::PredType::NATIVE_FLOAT);
    return 0;
  });
}

void Container::write(const std::string& name, std::span<const double> data, const Shape& shape) {
  if (data.size() != element_count(shape)) throw FormatError(name + ": data/shape size mismatch");
  guarded("write " + name, [&] {
    write_impl(impl_->file, name, data.data(), shape, H5::PredType::NATIVE_DOUBLE);
    return 0;
  });
}

void Container::write(const std::string& name, std::span<const std::uint64_t> data,
                      const Shape& shape) {
  if (data.size() != element_count(shape)) throw FormatError(name + ": data/shape size mismatch");
  guarded("write " + name, [&] {
    write_impl(impl_->file, name, data.data(), shape, H5::PredType::NATIVE_UINT64);
    return 0;
  });
}

void Container::write(const std::string& name, std::span<const std::complex<float>> data,
                      const Shape& shape) {
  if (data.size() != element_count(shape)) throw FormatError(name + ": data/shape size mismatch");
  guarded("write " + name, [&] {
    write_impl(impl_->file, name, data.data(), shape, complex64_type());
    return 0;
  });
}

NamedArray<float> Container::read_float(const std::string& name) const {
  if (!has(name)) throw FormatError(path_ + ": missing array '" + name + "'");
  return guarded("read " + name,
                 [&] { return read_impl<float>(impl_->file, name, H5::PredType::NATIVE_FLOAT); });
}

NamedArray<double> Container::read_double(const std::string& name) const {
  if (!has(name)) throw FormatError(path_ + ": missing array '" + name + "'");
  return guarded("read " + name,
                 [&] { return read_impl<double>(impl_->file, name, H5::PredType::NATIVE_DOUBLE); });
}

NamedArray<std::uint64_t> Container::read_u64(const std::string& name) const {
  if (!has(name)) throw FormatError(path_ + ": missing array '" + name + "'");
  return guarded("read " + name, [&] {
    return read_impl<std::uint64_t>(impl_->file, name, H5::PredType::NATIVE_UINT64);
  });
}

NamedArray<std::complex<float>> Container::read_complex(const std::string& name) const {
  if (!has(name)) throw FormatError(path_ + ": missing array '" + name + "'");
  return guarded("read " + name, [&] {
    H5::DataSet ds = impl_->file.openDataSet(name);
    if (ds.getTypeClass() != H5T_COMPOUND) {
      throw FormatError(path_ + ": array '" + name + "' is not complex");
    }
    return read_impl<std::complex<float>>(impl_->file, name, complex64_type());
  });
}

void Container::set_attr(const std::string& key, const std::string& value) {
  guarded("attribute " + key, [&] {
    H5::Group root = impl_->file.openGroup("/");
    if (root.attrExists(key)) root.removeAttr(key);
    H5::StrType type(H5::PredType::C_S1, value.empty() ? 1 : value.size());
    H5::Attribute a = root.createAttribute(key, type, H5::DataSpace(H5S_SCALAR));
    a.write(type, value.empty() ? std::string(1, '\0') : value);
    return 0;
  });
}

bool Container::has_attr(const std::string& key) const {
  return guarded("attribute " + key, [&] { return impl_->file.openGroup("/").attrExists(key); });
}

std::string Container::attr(const std::string& key) const {
  if (!has_attr(key)) throw FormatError(path_ + ": missing attribute '" + key + "'");
  return guarded("attribute " + key, [&] {
    H5::Attribute a = impl_->file.openGroup("/").openAttribute(key);
    H5::StrType type = a.getStrType();
    std::string value;
    a.read(type, value);
    while (!value.empty() && value.back() == '\0') value.pop_back();
    return value;
  });
}

}  // namespace siplab
