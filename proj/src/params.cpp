// SPDX-License-Identifier: Apache-2.0
#include "mcdn/params.hpp"

namespace mcdn {

Tensor &ParamStore::add(const std::string &name, Tensor value, bool trainable,
                        Mask frozen_rows) {
  if (index_.count(name))
    throw std::invalid_argument("duplicate parameter name " + name);
  if (!frozen_rows.empty() && (value.rank() != 2 || frozen_rows.size() != value.rows()))
    throw ShapeError("frozen-row mask does not match parameter " + name);
  value.set_requires_grad(trainable);
  index_[name] = entries_.size();
  entries_.push_back({name, std::move(value), std::move(frozen_rows), trainable});
  return entries_.back().value;
}

Tensor &ParamStore::get(const std::string &name) {
  auto it = index_.find(name);
  if (it == index_.end())
    throw std::out_of_range("no parameter named " + name);
  return entries_[it->second].value;
}

const Tensor &ParamStore::get(const std::string &name) const {
  return const_cast<ParamStore *>(this)->get(name);
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto &p : entries_)
    n += p.value.numel();
  return n;
}

std::vector<Tensor> ParamStore::trainable() const {
  std::vector<Tensor> out;
  for (const auto &p : entries_)
    if (p.trainable)
      out.push_back(p.value);
  return out;
}

Tensor ParamStore::l2_penalty() const {
  std::vector<Tensor> terms;
  for (const auto &p : entries_)
    if (p.trainable)
      terms.push_back(ops::sum_squares(p.value, p.frozen_rows));
  if (terms.empty())
    return Tensor::scalar(0.0);
  Tensor total = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i)
    total = ops::add(total, terms[i]);
  return total;
}

void ParamStore::zero_grad() {
  for (auto &p : entries_)
    if (p.trainable)
      p.value.zero_grad();
}

} // namespace mcdn
