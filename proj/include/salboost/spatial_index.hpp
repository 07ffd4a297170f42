#pragma once

#include <compare>
#include <cstddef>
#include <span>
#include <vector>

#include "salboost/cloud.hpp"

namespace salboost {

struct Neighbor {
  std::size_t index = 0;  // index into the source cloud
  double distance = 0.0;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Exact kd-tree over the valid points of a cloud.
///
/// Every query is deterministic: results are ordered by ascending distance,
/// equal distances by ascending source index. Squared distances are summed
/// as dx*dx + dy*dy + dz*dz so results agree bit-for-bit with a linear scan
/// that uses the same expression.
class KdTree3 {
 public:
  /// Throws InvalidArgument when the cloud has no valid point.
  explicit KdTree3(const PointCloud& cloud);
  /// Indexes the finite entries of `points`; indices refer to this span.
  explicit KdTree3(std::span<const Vec3> points);

  std::size_t size() const { return ids_.size(); }

  /// Points with distance <= radius. Throws InvalidArgument unless radius > 0.
  std::vector<Neighbor> radius_search(const Vec3& query, double radius) const;
  /// The min(k, size) nearest points. Throws InvalidArgument when k == 0.
  std::vector<Neighbor> knn(const Vec3& query, std::size_t k) const;
  Neighbor nearest(const Vec3& query) const;

  const Vec3& position(std::size_t source_index) const;

 private:
  struct Node {
    // Leaf when left < 0: entries [begin, end) of order_.
    int left = -1;
    int right = -1;
    int axis = 0;
    double split = 0.0;
    std::size_t begin = 0;
    std::size_t end = 0;
  };

  void build(std::vector<std::pair<std::size_t, Vec3>> entries);
  int build_node(std::size_t begin, std::size_t end);

  std::vector<Node> nodes_;
  std::vector<Vec3> positions_;   // tree order
  std::vector<std::size_t> ids_;  // tree order -> source index
  std::vector<std::size_t> lookup_;  // source index -> tree order (npos if absent)
};

/// Where a database descriptor came from. Ordered lexicographically.
struct Provenance {
  int model = 0;
  int view = 0;
  std::size_t keypoint = 0;

  friend auto operator<=>(const Provenance&, const Provenance&) = default;
};

struct DescriptorMatch {
  Provenance provenance;
  std::size_t row = 0;
  double distance = 0.0;
};

/// Exact Euclidean nearest neighbor over fixed-dimension vectors. Rows are
/// stored sorted by provenance so that the first minimum found is the
/// lexicographically smallest one.
class DescriptorIndex {
 public:
  struct Row {
    Provenance provenance;
    std::vector<double> values;
  };

  DescriptorIndex() = default;
  /// Throws InvalidArgument when a row's length differs from `dimension` or
  /// a provenance repeats.
  DescriptorIndex(std::size_t dimension, std::vector<Row> rows);

  std::size_t dimension() const { return dim_; }
  std::size_t rows() const { return provenance_.size(); }
  bool empty() const { return provenance_.empty(); }
  const Provenance& provenance(std::size_t row) const { return provenance_[row]; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * dim_, dim_}; }

  /// Throws InvalidArgument on dimension mismatch or an empty index.
  DescriptorMatch nearest(std::span<const double> query) const;
  /// nearest() for each row of a row-major (count x dimension) block. The
  /// answers are identical to nearest(); a matrix product only narrows the
  /// rows that need an exact distance.
  std::vector<DescriptorMatch> nearest_batch(std::span<const double> queries) const;

 private:
  std::size_t dim_ = 0;
  std::vector<Provenance> provenance_;
  std::vector<double> data_;
  std::vector<double> norms_;  // squared row norms
};

}  // namespace salboost
