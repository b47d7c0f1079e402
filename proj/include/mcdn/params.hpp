// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include "mcdn/ops.hpp"

namespace mcdn {

struct Parameter {
  std::string name;
  Tensor value;
  /// Per-row flags for matrices; flagged rows never change and skip L2.
  Mask frozen_rows;
  bool trainable = true;
};

/// Named parameters in registration order.
class ParamStore {
public:
  /// Registers a tensor. Trainable tensors get requires_grad set.
  Tensor &add(const std::string &name, Tensor value, bool trainable = true,
              Mask frozen_rows = {});

  Tensor &get(const std::string &name);
  const Tensor &get(const std::string &name) const;
  bool contains(const std::string &name) const { return index_.count(name) != 0; }

  std::vector<Parameter> &entries() { return entries_; }
  const std::vector<Parameter> &entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;

  /// Trainable tensors, sharing nodes with the store.
  std::vector<Tensor> trainable() const;
  /// Sum of squares over trainable parameters, excluding frozen rows.
  Tensor l2_penalty() const;
  void zero_grad();

private:
  std::vector<Parameter> entries_;
  std::map<std::string, std::size_t> index_;
};

} // namespace mcdn
