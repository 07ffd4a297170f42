#include "salboost/spatial_index.hpp"

#include <algorithm>
#include <limits>
#include <queue>

#include "salboost/error.hpp"

namespace salboost {

namespace {

constexpr std::size_t kLeafSize = 12;
constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

inline double sq_dist(const Vec3& a, const Vec3& b) {
  const double dx = a.x() - b.x();
  const double dy = a.y() - b.y();
  const double dz = a.z() - b.z();
  return dx * dx + dy * dy + dz * dz;
}

struct Candidate {
  double d2;
  std::size_t id;
  bool operator<(const Candidate& o) const { return d2 < o.d2 || (d2 == o.d2 && id < o.id); }
};

}  // namespace

KdTree3::KdTree3(const PointCloud& cloud) {
  std::vector<std::pair<std::size_t, Vec3>> entries;
  entries.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i)
    if (cloud[i].valid()) entries.emplace_back(i, cloud[i].position);
  lookup_.assign(cloud.size(), kNone);
  build(std::move(entries));
}

KdTree3::KdTree3(std::span<const Vec3> points) {
  std::vector<std::pair<std::size_t, Vec3>> entries;
  entries.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i)
    if (points[i].allFinite()) entries.emplace_back(i, points[i]);
  lookup_.assign(points.size(), kNone);
  build(std::move(entries));
}

void KdTree3::build(std::vector<std::pair<std::size_t, Vec3>> entries) {
  if (entries.empty()) throw InvalidArgument("kd-tree needs at least one valid point");
  ids_.resize(entries.size());
  positions_.resize(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    ids_[i] = entries[i].first;
    positions_[i] = entries[i].second;
  }
  nodes_.reserve(2 * entries.size() / kLeafSize + 2);
  build_node(0, ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) lookup_[ids_[i]] = i;
}

int KdTree3::build_node(std::size_t begin, std::size_t end) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{-1, -1, 0, 0.0, begin, end});
  if (end - begin <= kLeafSize) return id;

  Vec3 lo = positions_[begin], hi = positions_[begin];
  for (std::size_t i = begin + 1; i < end; ++i) {
    lo = lo.cwiseMin(positions_[i]);
    hi = hi.cwiseMax(positions_[i]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (hi[axis] == lo[axis]) return id;  // all coincident

  // Partition by median along the widest axis (co-sorting ids and positions).
  std::vector<std::size_t> perm(end - begin);
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = begin + i;
  const std::size_t mid = perm.size() / 2;
  std::nth_element(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(mid), perm.end(),
                   [&](std::size_t a, std::size_t b) { return positions_[a][axis] < positions_[b][axis]; });
  std::vector<Vec3> pos(perm.size());
  std::vector<std::size_t> ids(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    pos[i] = positions_[perm[i]];
    ids[i] = ids_[perm[i]];
  }
  std::copy(pos.begin(), pos.end(), positions_.begin() + static_cast<std::ptrdiff_t>(begin));
  std::copy(ids.begin(), ids.end(), ids_.begin() + static_cast<std::ptrdiff_t>(begin));

  const double split = positions_[begin + mid][axis];
  nodes_[static_cast<std::size_t>(id)].axis = axis;
  nodes_[static_cast<std::size_t>(id)].split = split;
  const int left = build_node(begin, begin + mid);
  const int right = build_node(begin + mid, end);
  nodes_[static_cast<std::size_t>(id)].left = left;
  nodes_[static_cast<std::size_t>(id)].right = right;
  return id;
}

const Vec3& KdTree3::position(std::size_t source_index) const {
  if (source_index >= lookup_.size() || lookup_[source_index] == kNone)
    throw InvalidArgument("point is not indexed by this tree");
  return positions_[lookup_[source_index]];
}

std::vector<Neighbor> KdTree3::radius_search(const Vec3& query, double radius) const {
  if (!(radius > 0)) throw InvalidArgument("radius must be positive");
  const double r2 = radius * radius;
  std::vector<Candidate> found;
  std::vector<int> stack{0};
  while (!stack.empty()) {
    const Node& n = nodes_[static_cast<std::size_t>(stack.back())];
    stack.pop_back();
    if (n.left < 0) {
      for (std::size_t i = n.begin; i < n.end; ++i) {
        const double d2 = sq_dist(positions_[i], query);
        if (d2 <= r2) found.push_back({d2, ids_[i]});
      }
      continue;
    }
    // Left holds values <= split, right holds values >= split.
    const double diff = query[n.axis] - n.split;
    if (diff <= 0 || diff * diff <= r2) stack.push_back(n.left);
    if (diff >= 0 || diff * diff <= r2) stack.push_back(n.right);
  }
  std::sort(found.begin(), found.end());
  std::vector<Neighbor> out(found.size());
  for (std::size_t i = 0; i < found.size(); ++i) out[i] = {found[i].id, std::sqrt(found[i].d2)};
  return out;
}

std::vector<Neighbor> KdTree3::knn(const Vec3& query, std::size_t k) const {
  if (k == 0) throw InvalidArgument("k must be at least 1");
  k = std::min(k, ids_.size());
  std::priority_queue<Candidate> heap;  // worst on top
  auto visit = [&](auto&& self, int node_id) -> void {
    const Node& n = nodes_[static_cast<std::size_t>(node_id)];
    if (n.left < 0) {
      for (std::size_t i = n.begin; i < n.end; ++i) {
        const Candidate c{sq_dist(positions_[i], query), ids_[i]};
        if (heap.size() < k) {
          heap.push(c);
        } else if (c < heap.top()) {
          heap.pop();
          heap.push(c);
        }
      }
      return;
    }
    const double diff = query[n.axis] - n.split;
    const int near = diff <= 0 ? n.left : n.right;
    const int far = diff <= 0 ? n.right : n.left;
    self(self, near);
    if (heap.size() < k || diff * diff <= heap.top().d2) self(self, far);
  };
  visit(visit, 0);
  std::vector<Neighbor> out(heap.size());
  for (std::size_t i = out.size(); i-- > 0;) {
    out[i] = {heap.top().id, std::sqrt(heap.top().d2)};
    heap.pop();
  }
  return out;
}

Neighbor KdTree3::nearest(const Vec3& query) const { return knn(query, 1).front(); }

DescriptorIndex::DescriptorIndex(std::size_t dimension, std::vector<Row> rows) : dim_(dimension) {
  if (dimension == 0) throw InvalidArgument("descriptor dimension must be positive");
  std::sort(rows.begin(), rows.end(),
            [](const Row& a, const Row& b) { return a.provenance < b.provenance; });
  provenance_.reserve(rows.size());
  data_.reserve(rows.size() * dim_);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].values.size() != dim_)
      throw InvalidArgument("descriptor row has length " + std::to_string(rows[i].values.size()) +
                            ", index dimension is " + std::to_string(dim_));
    if (i > 0 && rows[i].provenance == rows[i - 1].provenance)
      throw InvalidArgument("duplicate descriptor provenance");
    provenance_.push_back(rows[i].provenance);
    data_.insert(data_.end(), rows[i].values.begin(), rows[i].values.end());
    norms_.push_back(Eigen::Map<const Eigen::VectorXd>(rows[i].values.data(), static_cast<Eigen::Index>(dim_))
                         .squaredNorm());
  }
}

DescriptorMatch DescriptorIndex::nearest(std::span<const double> query) const {
  if (query.size() != dim_)
    throw InvalidArgument("query dimension " + std::to_string(query.size()) + " != index dimension " +
                          std::to_string(dim_));
  if (empty()) throw InvalidArgument("nearest descriptor in an empty index");
  constexpr std::size_t kBlock = 16;
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_row = 0;
  for (std::size_t r = 0; r < rows(); ++r) {
    const double* row = data_.data() + r * dim_;
    // Partial sums only grow, so a row is abandoned once it cannot win; rows
    // are in provenance order, so an equal sum never displaces the incumbent.
    double acc = 0.0;
    std::size_t d = 0;
    bool pruned = false;
    while (d < dim_) {
      const std::size_t stop = std::min(dim_, d + kBlock);
      for (; d < stop; ++d) {
        const double diff = row[d] - query[d];
        acc += diff * diff;
      }
      if (acc >= best) {
        pruned = true;
        break;
      }
    }
    if (!pruned) {
      best = acc;
      best_row = r;
    }
  }
  return DescriptorMatch{provenance_[best_row], best_row, std::sqrt(best)};
}

std::vector<DescriptorMatch> DescriptorIndex::nearest_batch(std::span<const double> queries) const {
  if (dim_ == 0 || queries.size() % dim_ != 0)
    throw InvalidArgument("query block is not a whole number of rows of dimension " + std::to_string(dim_));
  const std::size_t count = queries.size() / dim_;
  std::vector<DescriptorMatch> out;
  if (count == 0) return out;
  if (empty()) throw InvalidArgument("nearest descriptor in an empty index");
  out.reserve(count);

  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const auto n_rows = static_cast<Eigen::Index>(rows());
  const auto dim = static_cast<Eigen::Index>(dim_);
  const Eigen::Map<const RowMajor> table(data_.data(), n_rows, dim);
  const double max_norm = *std::max_element(norms_.begin(), norms_.end());
  constexpr std::size_t kChunk = 128;
  std::vector<std::size_t> candidates;
  for (std::size_t start = 0; start < count; start += kChunk) {
    const std::size_t n = std::min(kChunk, count - start);
    const Eigen::Map<const RowMajor> q(queries.data() + start * dim_, static_cast<Eigen::Index>(n), dim);
    const RowMajor dots = q * table.transpose();
    for (std::size_t i = 0; i < n; ++i) {
      const double* query = queries.data() + (start + i) * dim_;
      const double qn = q.row(static_cast<Eigen::Index>(i)).squaredNorm();
      double approx_best = std::numeric_limits<double>::infinity();
      for (Eigen::Index r = 0; r < n_rows; ++r)
        approx_best = std::min(approx_best, qn + norms_[static_cast<std::size_t>(r)] - 2.0 * dots(static_cast<Eigen::Index>(i), r));
      // Rounding in the expanded form is far below this margin.
      const double margin = 1e-9 * (qn + max_norm) + 1e-300;
      candidates.clear();
      for (Eigen::Index r = 0; r < n_rows; ++r)
        if (qn + norms_[static_cast<std::size_t>(r)] - 2.0 * dots(static_cast<Eigen::Index>(i), r) <= approx_best + margin)
          candidates.push_back(static_cast<std::size_t>(r));
      double best = std::numeric_limits<double>::infinity();
      std::size_t best_row = candidates.front();
      for (auto r : candidates) {
        const double* row = data_.data() + r * dim_;
        double acc = 0.0;
        for (std::size_t d = 0; d < dim_; ++d) {
          const double diff = row[d] - query[d];
          acc += diff * diff;
        }
        if (acc < best) {
          best = acc;
          best_row = r;
        }
      }
      out.push_back(DescriptorMatch{provenance_[best_row], best_row, std::sqrt(best)});
    }
  }
  return out;
}

}  // namespace salboost
