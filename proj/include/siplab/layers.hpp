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

#ifndef SIPLAB_LAYERS_HPP
#define SIPLAB_LAYERS_HPP

#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "siplab/autodiff.hpp"

namespace siplab {

/// A named learnable matrix. `group` is one of "W_p", "W_c", "W_d".
template <typename Scalar>
struct Param {
  std::string name;
  std::string group;
  Matrix<Scalar> value;
  Matrix<Scalar> grad;
  bool trainable = true;
};

/// Ordered parameter collection plus non-learnable buffers (normalization statistics).
template <typename Scalar>
class ParamStore {
 public:
  Index add(const std::string& name, const std::string& group, Matrix<Scalar> init) {
    if (index_.count(name) != 0) throw std::logic_error("duplicate parameter " + name);
    index_[name] = static_cast<Index>(params_.size());
    Param<Scalar> p{name, group, std::move(init), {}, true};
    p.grad = Matrix<Scalar>::Zero(p.value.rows(), p.value.cols());
    params_.push_back(std::move(p));
    return static_cast<Index>(params_.size()) - 1;
  }

  Index size() const { return static_cast<Index>(params_.size()); }
  Param<Scalar>& at(Index i) { return params_[static_cast<std::size_t>(i)]; }
  const Param<Scalar>& at(Index i) const { return params_[static_cast<std::size_t>(i)]; }
  bool has(const std::string& name) const { return index_.count(name) != 0; }
  Index index(const std::string& name) const {
    const auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("unknown parameter " + name);
    return it->second;
  }
  Param<Scalar>& operator[](const std::string& name) { return at(index(name)); }
  const Param<Scalar>& operator[](const std::string& name) const { return at(index(name)); }

  /// Scalar learnable parameters, optionally restricted to one group.
  Index count(const std::string& group = "") const {
    Index n = 0;
    for (const auto& p : params_) {
      if (group.empty() || p.group == group) n += p.value.size();
    }
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) p.grad.setZero();
  }

  std::map<std::string, ad::BatchNormState<Scalar>>& buffers() { return buffers_; }
  const std::map<std::string, ad::BatchNormState<Scalar>>& buffers() const { return buffers_; }

  template <typename Other>
  ParamStore<Other> cast() const {
    ParamStore<Other> out;
    for (const auto& p : params_) {
      const Index i = out.add(p.name, p.group, p.value.template cast<Other>());
      out.at(i).trainable = p.trainable;
    }
    for (const auto& [name, st] : buffers_) {
      out.buffers()[name] = {st.running_mean.template cast<Other>(), st.running_var.template cast<Other>()};
    }
    return out;
  }

 private:
  std::vector<Param<Scalar>> params_;
  std::map<std::string, Index> index_;
  std::map<std::string, ad::BatchNormState<Scalar>> buffers_;
};

/// Tape variables for every parameter of a store, created once per forward pass.
template <typename Scalar>
class Binding {
 public:
  Binding(ad::Tape<Scalar>& tape, ParamStore<Scalar>& store) : tape_(tape), store_(store) {
    vars_.reserve(static_cast<std::size_t>(store.size()));
    for (Index i = 0; i < store.size(); ++i) {
      auto t = ad::Tensor<Scalar>::rows(store.at(i).value);
      vars_.push_back(store.at(i).trainable ? tape.variable(std::move(t)) : tape.constant(std::move(t)));
    }
  }

  ad::Var operator()(const std::string& name) const { return vars_[static_cast<std::size_t>(store_.index(name))]; }
  ad::Tape<Scalar>& tape() const { return tape_; }
  ParamStore<Scalar>& store() const { return store_; }

  /// Adds tape gradients into the store's grad buffers.
  void collect() {
    for (Index i = 0; i < store_.size(); ++i) {
      const ad::Var v = vars_[static_cast<std::size_t>(i)];
      if (tape_.requires_grad(v) && tape_.has_grad(v)) store_.at(i).grad += tape_.grad(v);
    }
  }

 private:
  ad::Tape<Scalar>& tape_;
  ParamStore<Scalar>& store_;
  std::vector<ad::Var> vars_;
};

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-8;
};

template <typename Scalar>
class Adam {
 public:
  Adam() = default;
  explicit Adam(AdamOptions opt) : opt_(opt) {}

  /// One update of every trainable parameter; `lr_scale` maps group name to a multiplier.
  void step(ParamStore<Scalar>& store, const std::map<std::string, double>& lr_scale = {}) {
    ++t_;
    const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
    for (Index i = 0; i < store.size(); ++i) {
      auto& p = store.at(i);
      if (!p.trainable) continue;
      auto& m = state(p.name, p.value).first;
      auto& v = state(p.name, p.value).second;
      m = Scalar(opt_.beta1) * m + Scalar(1 - opt_.beta1) * p.grad;
      v = Scalar(opt_.beta2) * v + Scalar(1 - opt_.beta2) * p.grad.cwiseAbs2();
      double lr = opt_.lr;
      if (const auto it = lr_scale.find(p.group); it != lr_scale.end()) lr *= it->second;
      if (lr == 0.0) continue;
      const Scalar step = Scalar(lr / c1);
      const Scalar vs = Scalar(1.0 / c2);
      p.value.array() -= step * m.array() / ((v.array() * vs).sqrt() + Scalar(opt_.eps));
    }
  }

  std::int64_t steps() const { return t_; }
  void set_steps(std::int64_t t) { t_ = t; }
  const AdamOptions& options() const { return opt_; }
  std::map<std::string, std::pair<Matrix<Scalar>, Matrix<Scalar>>>& moments() { return moments_; }
  const std::map<std::string, std::pair<Matrix<Scalar>, Matrix<Scalar>>>& moments() const { return moments_; }

 private:
  std::pair<Matrix<Scalar>, Matrix<Scalar>>& state(const std::string& name, const Matrix<Scalar>& like) {
    auto it = moments_.find(name);
    if (it == moments_.end()) {
      it = moments_
               .emplace(name, std::make_pair(Matrix<Scalar>::Zero(like.rows(), like.cols()),
                                             Matrix<Scalar>::Zero(like.rows(), like.cols())))
               .first;
    }
    return it->second;
  }

  AdamOptions opt_;
  std::int64_t t_ = 0;
  std::map<std::string, std::pair<Matrix<Scalar>, Matrix<Scalar>>> moments_;
};

// ---- layer helpers -------------------------------------------------------------

/// Uniform(-bound, bound) with bound = gain * sqrt(3 / fan_in).
template <typename Scalar, typename Rng>
Matrix<Scalar> uniform_init(Rng& rng, Index rows, Index cols, Index fan_in, double gain) {
  const double bound = gain * std::sqrt(3.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> u(-bound, bound);
  Matrix<Scalar> w(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) w(i, j) = static_cast<Scalar>(u(rng));
  }
  return w;
}

/// Registers name.w (cout x cin*k*k) and name.b (1 x cout).
template <typename Scalar, typename Rng>
void add_conv(ParamStore<Scalar>& store, Rng& rng, const std::string& name, const std::string& group, Index cin,
              Index cout, Index kernel, double gain) {
  store.add(name + ".w", group, uniform_init<Scalar>(rng, cout, cin * kernel * kernel, cin * kernel * kernel, gain));
  store.add(name + ".b", group, Matrix<Scalar>::Zero(1, cout));
}

/// Registers name.w (cin x cout*k*k) and name.b for a transposed convolution.
template <typename Scalar, typename Rng>
void add_conv_transpose(ParamStore<Scalar>& store, Rng& rng, const std::string& name, const std::string& group,
                        Index cin, Index cout, Index kernel, double gain) {
  // Each output receives about cin * k * k / stride^2 contributions.
  const Index fan_in = std::max<Index>(1, cin * kernel * kernel / 4);
  store.add(name + ".w", group, uniform_init<Scalar>(rng, cin, cout * kernel * kernel, fan_in, gain));
  store.add(name + ".b", group, Matrix<Scalar>::Zero(1, cout));
}

template <typename Scalar, typename Rng>
void add_linear(ParamStore<Scalar>& store, Rng& rng, const std::string& name, const std::string& group, Index fin,
                Index fout, double gain) {
  store.add(name + ".w", group, uniform_init<Scalar>(rng, fout, fin, fin, gain));
  store.add(name + ".b", group, Matrix<Scalar>::Zero(1, fout));
}

template <typename Scalar>
void add_batch_norm(ParamStore<Scalar>& store, const std::string& name, const std::string& group, Index channels) {
  store.add(name + ".gamma", group, Matrix<Scalar>::Ones(1, channels));
  store.add(name + ".beta", group, Matrix<Scalar>::Zero(1, channels));
  store.buffers()[name] = {Vector<Scalar>::Zero(channels), Vector<Scalar>::Ones(channels)};
}

template <typename Scalar>
ad::Var conv(const Binding<Scalar>& p, ad::Var x, const std::string& name, Index kernel = 3, Index stride = 1) {
  return ad::conv2d(p.tape(), x, p(name + ".w"), p(name + ".b"), kernel, stride, kernel / 2);
}

template <typename Scalar>
ad::Var conv_up(const Binding<Scalar>& p, ad::Var x, const std::string& name) {
  return ad::conv_transpose2d(p.tape(), x, p(name + ".w"), p(name + ".b"), 3, 2, 1);
}

template <typename Scalar>
ad::Var dense(const Binding<Scalar>& p, ad::Var x, const std::string& name) {
  return ad::linear(p.tape(), x, p(name + ".w"), p(name + ".b"));
}

template <typename Scalar>
ad::Var norm(const Binding<Scalar>& p, ad::Var x, const std::string& name, bool training) {
  return ad::batch_norm(p.tape(), x, p(name + ".gamma"), p(name + ".beta"), p.store().buffers().at(name), training);
}

}  // namespace siplab

#endif  // SIPLAB_LAYERS_HPP
