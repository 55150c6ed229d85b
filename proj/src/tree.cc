/*
 * Copyright 2026 The bootmon Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "bootmon/tree.h"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace bootmon {

void Tree::predict_add(const Matrix& X, double weight,
                       std::span<double> out) const {
  for (std::size_t r = 0; r < X.rows(); ++r) {
    out[r] += weight * predict(X.row(r));
  }
}

std::size_t Tree::depth() const {
  if (nodes_.empty()) return 0;
  std::vector<std::size_t> level(nodes_.size(), 0);
  std::size_t deepest = 0;
  // Children are always stored after their parent.
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    deepest = std::max(deepest, level[i]);
    if (!nodes_[i].is_leaf()) {
      level[nodes_[i].left] = level[i] + 1;
      level[nodes_[i].right] = level[i] + 1;
    }
  }
  return deepest;
}

std::size_t Tree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(),
                    [](const TreeNode& n) { return n.is_leaf(); }));
}

ColumnOrder::ColumnOrder(const Matrix& X) : rows_(X.rows()) {
  order_.resize(X.cols());
  for (std::size_t f = 0; f < X.cols(); ++f) {
    auto& o = order_[f];
    o.resize(X.rows());
    std::iota(o.begin(), o.end(), std::uint32_t{0});
    std::sort(o.begin(), o.end(), [&](std::uint32_t a, std::uint32_t b) {
      const double va = X(a, f);
      const double vb = X(b, f);
      return va < vb || (va == vb && a < b);
    });
  }
}

TreeBuilder::TreeBuilder(const Matrix& X,
                         std::span<const std::size_t> sample_rows,
                         const ColumnOrder& presorted, TreeParams params)
    : params_(params), d_(X.cols()) {
  if (presorted.rows() != X.rows()) {
    throw std::invalid_argument("TreeBuilder: presorted order shape mismatch");
  }
  if (sample_rows.empty()) {
    throw std::invalid_argument("TreeBuilder: empty sample");
  }
  if (params_.min_samples_leaf == 0) params_.min_samples_leaf = 1;
  std::vector<std::uint32_t> counts(X.rows(), 0);
  for (std::size_t r : sample_rows) ++counts[r];
  sorted_.resize(d_);
  sorted_values_.resize(d_);
  for (std::size_t f = 0; f < d_; ++f) {
    auto& s = sorted_[f];
    auto& v = sorted_values_[f];
    s.reserve(sample_rows.size());
    v.reserve(sample_rows.size());
    for (std::uint32_t r : presorted.order(f)) {
      for (std::uint32_t c = counts[r]; c > 0; --c) {
        s.push_back(r);
        v.push_back(X(r, f));
      }
    }
  }
  scratch_rows_.resize(sample_rows.size());
  scratch_values_.resize(sample_rows.size());
  scratch_targets_.resize(sample_rows.size());
  goes_left_.assign(X.rows(), 0);
}

Tree TreeBuilder::build(std::span<const double> targets, Rng* rng) {
  if (targets.size() != goes_left_.size()) {
    throw std::invalid_argument("TreeBuilder::build: targets size mismatch");
  }
  rng_ = rng;
  work_ = sorted_;
  work_values_ = sorted_values_;
  work_targets_.resize(d_);
  for (std::size_t f = 0; f < d_; ++f) {
    auto& t = work_targets_[f];
    t.resize(work_[f].size());
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = targets[work_[f][i]];
  }
  std::vector<TreeNode> nodes;
  grow(0, work_[0].size(), 0, nodes);
  return Tree(std::move(nodes));
}

TreeBuilder::Split TreeBuilder::best_split(
    std::size_t begin, std::size_t end, double node_mean,
    std::span<const std::size_t> features) const {
  const std::size_t n = end - begin;
  const std::size_t msl = params_.min_samples_leaf;
  Split best;
  for (std::size_t f : features) {
    const double* t = work_targets_[f].data();
    const double* x = work_values_[f].data();
    double total = 0.0;
    for (std::size_t i = begin; i < end; ++i) total += t[i] - node_mean;
    const double parent = total * total / static_cast<double>(n);
    double left_sum = 0.0;
    for (std::size_t i = begin; i + 1 < end; ++i) {
      left_sum += t[i] - node_mean;
      const std::size_t n_left = i - begin + 1;
      const double v = x[i];
      const double next = x[i + 1];
      if (v == next) continue;
      if (n_left < msl || n - n_left < msl) continue;
      const double right_sum = total - left_sum;
      const double gain =
          left_sum * left_sum / static_cast<double>(n_left) +
          right_sum * right_sum / static_cast<double>(n - n_left) - parent;
      if (gain > best.gain) {
        double mid = v + (next - v) / 2.0;
        if (!(mid < next)) mid = v;
        best.gain = gain;
        best.threshold = mid;
        best.feature = static_cast<std::int32_t>(f);
      }
    }
  }
  return best;
}

std::int32_t TreeBuilder::grow(std::size_t begin, std::size_t end,
                               std::size_t depth,
                               std::vector<TreeNode>& nodes) {
  const std::size_t n = end - begin;
  const auto& any = work_targets_[0];
  double sum = 0.0;
  double lo = any[begin];
  double hi = lo;
  for (std::size_t i = begin; i < end; ++i) {
    const double t = any[i];
    sum += t;
    lo = std::min(lo, t);
    hi = std::max(hi, t);
  }
  const double node_mean = sum / static_cast<double>(n);
  const auto index = static_cast<std::int32_t>(nodes.size());
  TreeNode leaf;
  leaf.value = node_mean;
  leaf.cover = static_cast<double>(n);
  nodes.push_back(leaf);

  if (lo == hi || n < 2 * params_.min_samples_leaf ||
      (params_.max_depth > 0 && depth >= params_.max_depth)) {
    return index;
  }
  double sse = 0.0;
  for (std::size_t i = begin; i < end; ++i) {
    const double c = any[i] - node_mean;
    sse += c * c;
  }

  std::vector<std::size_t> all(d_);
  std::iota(all.begin(), all.end(), std::size_t{0});
  Split split;
  if (params_.max_features > 0 && params_.max_features < d_ &&
      rng_ != nullptr) {
    // Partial Fisher-Yates; evaluated in ascending order for tie-breaking.
    for (std::size_t k = 0; k < params_.max_features; ++k) {
      std::swap(all[k], all[k + uniform_index(*rng_, d_ - k)]);
    }
    std::vector<std::size_t> chosen(all.begin(),
                                    all.begin() + params_.max_features);
    std::vector<std::size_t> rest(all.begin() + params_.max_features,
                                  all.end());
    std::sort(chosen.begin(), chosen.end());
    std::sort(rest.begin(), rest.end());
    split = best_split(begin, end, node_mean, chosen);
    if (split.feature < 0) split = best_split(begin, end, node_mean, rest);
  } else {
    split = best_split(begin, end, node_mean, all);
  }
  if (split.feature < 0 || !(split.gain > 1e-12 * sse)) return index;

  // Within the node the split feature is sorted, so the left child is a
  // prefix of its order.
  const auto f = static_cast<std::size_t>(split.feature);
  std::size_t n_left = 0;
  {
    const auto& rows = work_[f];
    const auto& vals = work_values_[f];
    while (begin + n_left < end && vals[begin + n_left] <= split.threshold) {
      ++n_left;
    }
    for (std::size_t i = begin; i < end; ++i) {
      goes_left_[rows[i]] = i < begin + n_left;
    }
  }
  for (std::size_t g = 0; g < d_; ++g) {
    if (g == f) continue;
    auto& rows = work_[g];
    auto& vals = work_values_[g];
    auto& tgts = work_targets_[g];
    std::size_t l = begin;
    std::size_t r = 0;
    for (std::size_t i = begin; i < end; ++i) {
      const std::uint32_t row = rows[i];
      if (goes_left_[row]) {
        rows[l] = row;
        vals[l] = vals[i];
        tgts[l] = tgts[i];
        ++l;
      } else {
        scratch_rows_[r] = row;
        scratch_values_[r] = vals[i];
        scratch_targets_[r] = tgts[i];
        ++r;
      }
    }
    std::copy(scratch_rows_.begin(), scratch_rows_.begin() + r, rows.begin() + l);
    std::copy(scratch_values_.begin(), scratch_values_.begin() + r,
              vals.begin() + l);
    std::copy(scratch_targets_.begin(), scratch_targets_.begin() + r,
              tgts.begin() + l);
  }

  nodes[index].feature = split.feature;
  nodes[index].threshold = split.threshold;
  const std::int32_t left = grow(begin, begin + n_left, depth + 1, nodes);
  const std::int32_t right = grow(begin + n_left, end, depth + 1, nodes);
  nodes[index].left = left;
  nodes[index].right = right;
  return index;
}

}  // namespace bootmon
