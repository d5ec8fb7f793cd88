#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "otonav/random.hpp"

namespace otonav::net {

using Index = Eigen::Index;

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
struct ParamBlock {
  std::string name;
  Matrix<T> value;
  Matrix<T> grad;
  Matrix<T> m;  // first moment
  Matrix<T> v;  // second moment
};

// Named parameter blocks with matching gradient and optimizer buffers.
// Layers refer to blocks by index, so one architecture object serves both
// the single precision training copy and double precision check copies.
template <typename T>
class ModelParams {
 public:
  std::size_t add(std::string name, Index rows, Index cols);

  ParamBlock<T>& operator[](std::size_t i) { return blocks_[i]; }
  const ParamBlock<T>& operator[](std::size_t i) const { return blocks_[i]; }
  std::size_t size() const { return blocks_.size(); }
  std::vector<ParamBlock<T>>& blocks() { return blocks_; }
  const std::vector<ParamBlock<T>>& blocks() const { return blocks_; }

  std::optional<std::size_t> find(std::string_view name) const;
  std::size_t num_values() const;
  void zero_grad();

  template <typename U>
  ModelParams<U> cast() const {
    ModelParams<U> out;
    for (const auto& b : blocks_) {
      const std::size_t i = out.add(b.name, b.value.rows(), b.value.cols());
      out[i].value = b.value.template cast<U>();
      out[i].m = b.m.template cast<U>();
      out[i].v = b.v.template cast<U>();
    }
    out.step = step;
    return out;
  }

  std::int64_t step = 0;  // optimizer steps taken

 private:
  std::vector<ParamBlock<T>> blocks_;
};

// Glorot-uniform fill of a weight block.
template <typename T>
void init_uniform(ParamBlock<T>& b, Index fan_in, Index fan_out, Rng& rng);

extern template class ModelParams<float>;
extern template class ModelParams<double>;

}  // namespace otonav::net
