#include "prefalign/nn/params.hpp"

#include <algorithm>

#include "prefalign/common/error.hpp"

namespace prefalign::nn {

Tensor ParameterSet::add(std::string name, int rows, int cols) {
  Tensor t = Tensor::zeros(rows, cols, /*requires_grad=*/true);
  entries_.push_back({std::move(name), t});
  count_ += t.size();
  return t;
}

std::vector<double> ParameterSet::flatten() const {
  std::vector<double> out;
  out.reserve(count_);
  for (const auto& e : entries_) out.insert(out.end(), e.tensor.values().begin(), e.tensor.values().end());
  return out;
}

void ParameterSet::assign(std::span<const double> flat) {
  if (flat.size() != count_) throw Error("ParameterSet::assign: expected " + std::to_string(count_) + " values");
  std::size_t off = 0;
  for (const auto& e : entries_) {
    auto dst = const_cast<Tensor&>(e.tensor).values();
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(off), dst.size(), dst.begin());
    off += dst.size();
  }
}

std::vector<double> ParameterSet::flat_grad() const {
  std::vector<double> out;
  out.reserve(count_);
  for (const auto& e : entries_) {
    const Node* n = e.tensor.node();
    if (n->grad.size() == n->value.size()) {
      out.insert(out.end(), n->grad.begin(), n->grad.end());
    } else {
      out.insert(out.end(), n->value.size(), 0.0);
    }
  }
  return out;
}

void ParameterSet::zero_grad() {
  for (auto& e : entries_) {
    Node* n = e.tensor.node();
    n->grad.assign(n->value.size(), 0.0);
  }
}

const Tensor& ParameterSet::get(const std::string& name) const {
  auto it = std::find_if(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.name == name; });
  if (it == entries_.end()) throw Error("no parameter named " + name);
  return it->tensor;
}

void init_normal(Tensor& t, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& v : t.values()) v = dist(rng);
}

void init_constant(Tensor& t, double v) { std::fill(t.values().begin(), t.values().end(), v); }

}  // namespace prefalign::nn
