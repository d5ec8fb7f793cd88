#include "otonav/net/params.hpp"

#include <cmath>
#include <stdexcept>

namespace otonav::net {

template <typename T>
std::size_t ModelParams<T>::add(std::string name, Index rows, Index cols) {
  if (rows <= 0 || cols <= 0) throw std::invalid_argument("parameter block '" + name + "' has an empty shape");
  if (find(name)) throw std::invalid_argument("duplicate parameter block '" + name + "'");
  ParamBlock<T> b;
  b.name = std::move(name);
  b.value = Matrix<T>::Zero(rows, cols);
  b.grad = Matrix<T>::Zero(rows, cols);
  b.m = Matrix<T>::Zero(rows, cols);
  b.v = Matrix<T>::Zero(rows, cols);
  blocks_.push_back(std::move(b));
  return blocks_.size() - 1;
}

template <typename T>
std::optional<std::size_t> ModelParams<T>::find(std::string_view name) const {
  for (std::size_t i = 0; i < blocks_.size(); ++i)
    if (blocks_[i].name == name) return i;
  return std::nullopt;
}

template <typename T>
std::size_t ModelParams<T>::num_values() const {
  std::size_t n = 0;
  for (const auto& b : blocks_) n += static_cast<std::size_t>(b.value.size());
  return n;
}

template <typename T>
void ModelParams<T>::zero_grad() {
  for (auto& b : blocks_) b.grad.setZero();
}

template <typename T>
void init_uniform(ParamBlock<T>& b, Index fan_in, Index fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (Index i = 0; i < b.value.size(); ++i) b.value.data()[i] = static_cast<T>(uniform(rng, -limit, limit));
}

template class ModelParams<float>;
template class ModelParams<double>;
template void init_uniform(ParamBlock<float>&, Index, Index, Rng&);
template void init_uniform(ParamBlock<double>&, Index, Index, Rng&);

}  // namespace otonav::net
