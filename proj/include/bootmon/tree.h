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

#ifndef BOOTMON_TREE_H_
#define BOOTMON_TREE_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "bootmon/matrix.h"
#include "bootmon/random.h"

namespace bootmon {

// One node of a fitted regression tree. Internal nodes send rows with
// x[feature] <= threshold to `left`. `cover` is the number of training rows
// (counting bootstrap duplicates) that reached the node.
struct TreeNode {
  double threshold = 0.0;
  double value = 0.0;  // mean target of the rows in the node
  double cover = 0.0;
  std::int32_t feature = -1;
  std::int32_t left = -1;
  std::int32_t right = -1;

  bool is_leaf() const { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

// Flat tree; node 0 is the root.
class Tree {
 public:
  Tree() = default;
  explicit Tree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

  double predict(std::span<const double> x) const {
    std::size_t i = 0;
    while (!nodes_[i].is_leaf()) {
      const TreeNode& n = nodes_[i];
      i = x[n.feature] <= n.threshold ? n.left : n.right;
    }
    return nodes_[i].value;
  }
  // Accumulates weight * prediction into `out` for every row of `X`.
  void predict_add(const Matrix& X, double weight,
                   std::span<double> out) const;

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  const TreeNode& node(std::size_t i) const { return nodes_[i]; }
  std::size_t size() const { return nodes_.size(); }
  std::size_t depth() const;
  std::size_t leaf_count() const;

  friend bool operator==(const Tree&, const Tree&) = default;

 private:
  std::vector<TreeNode> nodes_;
};

struct TreeParams {
  std::size_t max_depth = 0;  // 0: unlimited
  std::size_t min_samples_leaf = 1;
  std::size_t max_features = 0;  // 0: all features at every node
};

// Row ids of a matrix sorted by each column (ties by row id). Computed once
// and shared by all trees grown on subsets of the same matrix.
class ColumnOrder {
 public:
  explicit ColumnOrder(const Matrix& X);
  std::span<const std::uint32_t> order(std::size_t feature) const {
    return order_[feature];
  }
  std::size_t rows() const { return rows_; }

 private:
  std::size_t rows_;
  std::vector<std::vector<std::uint32_t>> order_;
};

// Exact greedy least-squares CART on a multiset of rows of `X`. Split
// candidates are midpoints between consecutive distinct values; among equal
// gains the lowest feature index, then the lowest threshold, wins.
class TreeBuilder {
 public:
  TreeBuilder(const Matrix& X, std::span<const std::size_t> sample_rows,
              const ColumnOrder& presorted, TreeParams params);

  // `targets` is indexed by row id of `X`. `rng` is needed only when
  // max_features subsamples the columns.
  Tree build(std::span<const double> targets, Rng* rng = nullptr);

 private:
  struct Split {
    double gain = 0.0;
    double threshold = 0.0;
    std::int32_t feature = -1;
  };

  std::int32_t grow(std::size_t begin, std::size_t end, std::size_t depth,
                    std::vector<TreeNode>& nodes);
  Split best_split(std::size_t begin, std::size_t end, double node_mean,
                   std::span<const std::size_t> features) const;

  TreeParams params_;
  std::size_t d_;
  // Per feature, every sample in sorted order: row ids and feature values.
  std::vector<std::vector<std::uint32_t>> sorted_;
  std::vector<std::vector<double>> sorted_values_;
  // Working copies, partitioned node by node, with the targets alongside.
  std::vector<std::vector<std::uint32_t>> work_;
  std::vector<std::vector<double>> work_values_;
  std::vector<std::vector<double>> work_targets_;
  std::vector<std::uint32_t> scratch_rows_;
  std::vector<double> scratch_values_;
  std::vector<double> scratch_targets_;
  std::vector<std::uint8_t> goes_left_;  // indexed by row id
  Rng* rng_ = nullptr;
};

}  // namespace bootmon

#endif  // BOOTMON_TREE_H_
