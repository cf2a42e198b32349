#pragma once

#include <map>
#include <string>
#include <vector>

#include "e2eaec/numcore/tensor.h"

namespace e2eaec::numcore {

// Insertion-ordered name -> tensor container.
template <typename T>
class NamedTensors {
 public:
  void add(const std::string& name, Tensor<T> value) {
    if (index_.count(name)) {
      throw ContractError("duplicate tensor name '" + name + "'");
    }
    index_[name] = names_.size();
    names_.push_back(name);
    tensors_.push_back(std::move(value));
  }

  bool contains(const std::string& name) const { return index_.count(name); }

  Tensor<T>& get(const std::string& name) { return tensors_[lookup(name)]; }
  const Tensor<T>& get(const std::string& name) const {
    return tensors_[lookup(name)];
  }

  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }
  Tensor<T>& at(std::size_t i) { return tensors_.at(i); }
  const Tensor<T>& at(std::size_t i) const { return tensors_.at(i); }

  std::size_t total_elements() const {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += t.size();
    return n;
  }

 private:
  std::size_t lookup(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) {
      throw ContractError("no tensor named '" + name + "'");
    }
    return it->second;
  }

  std::vector<std::string> names_;
  std::vector<Tensor<T>> tensors_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace e2eaec::numcore
