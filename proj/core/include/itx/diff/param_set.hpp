#pragma once

#include <Eigen/Core>
#include <map>
#include <string>
#include <vector>

#include "itx/util/error.hpp"

namespace itx::diff {

using Mat = Eigen::MatrixXd;

// A named collection of real-valued matrices (network weights, joint angles,
// root transforms...).  Iteration order is lexicographic by name, which is
// also the serialization order used by checkpoints, so two ParamSets with the
// same contents behave identically everywhere.
class ParamSet {
 public:
  ParamSet() = default;

  void add(const std::string& name, Mat value) {
    require(!entries_.count(name), "ParamSet: duplicate entry '" + name + "'");
    entries_.emplace(name, std::move(value));
  }

  bool has(const std::string& name) const { return entries_.count(name) != 0; }

  Mat& at(const std::string& name) {
    auto it = entries_.find(name);
    require(it != entries_.end(), "ParamSet: no entry '" + name + "'");
    return it->second;
  }
  const Mat& at(const std::string& name) const {
    auto it = entries_.find(name);
    require(it != entries_.end(), "ParamSet: no entry '" + name + "'");
    return it->second;
  }

  std::size_t size() const { return entries_.size(); }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [k, v] : entries_) out.push_back(k);
    return out;
  }

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  // Same names and shapes (values may differ).
  bool congruent(const ParamSet& other) const {
    if (entries_.size() != other.entries_.size()) return false;
    auto a = entries_.begin();
    auto b = other.entries_.begin();
    for (; a != entries_.end(); ++a, ++b) {
      if (a->first != b->first) return false;
      if (a->second.rows() != b->second.rows() || a->second.cols() != b->second.cols())
        return false;
    }
    return true;
  }

  // A congruent set with every entry zeroed.
  ParamSet zeros_like() const {
    ParamSet out;
    for (const auto& [k, v] : entries_) out.add(k, Mat::Zero(v.rows(), v.cols()));
    return out;
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& [k, v] : entries_) n += static_cast<std::size_t>(v.size());
    return n;
  }

  bool all_finite() const {
    for (const auto& [k, v] : entries_)
      if (!v.allFinite()) return false;
    return true;
  }

  double squared_norm() const {
    double s = 0.0;
    for (const auto& [k, v] : entries_) s += v.squaredNorm();
    return s;
  }

  bool equals(const ParamSet& other) const {
    if (!congruent(other)) return false;
    auto a = entries_.begin();
    auto b = other.entries_.begin();
    for (; a != entries_.end(); ++a, ++b)
      if (a->second != b->second) return false;
    return true;
  }

 private:
  std::map<std::string, Mat> entries_;
};

}  // namespace itx::diff
